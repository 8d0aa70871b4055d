//! End-to-end batch pipeline.
//!
//! Three passes over a frame directory: a parallel detection pass (decode,
//! segment, clean, measure each consecutive pair), a serial tracking pass
//! (association must see frames in order), and a parallel annotation pass.
//! All products are deterministic for a given input and configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::frame_io::{
    self, list_frame_files, load_frame, to_grayscale, write_annotated_frame, write_mask_png,
    BoundingBox, BoxRecord,
};
use crate::moments::extract_features;
use crate::morphology::{clean_and_extract, scaled_min_area};
use crate::segmentation::{motion_mask, BinaryMask};
use crate::tracker::{Detection, Tracker};

/// Mean per-frame stage costs of a run, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSummary {
    /// Frames that were segmented and tracked (sequence length minus one).
    pub processed: usize,
    /// Grayscale conversion plus the temporal statistic.
    pub segmentation_ms: f64,
    /// Hole filling, erosion, labelling, and the area filter.
    pub morphology_ms: f64,
    /// Feature extraction plus association.
    pub tracking_ms: f64,
    /// Wall-clock time of the whole run divided by processed frames.
    pub total_ms: f64,
}

impl TimingSummary {
    /// Human-readable block, one stage per line.
    pub fn render(&self) -> String {
        format!(
            "Per-frame mean stage times over {} frames (ms):\n\
             \x20 Segmentation  {:>10.3}\n\
             \x20 Morphology    {:>10.3}\n\
             \x20 Tracking      {:>10.3}\n\
             \x20 Total         {:>10.3}\n",
            self.processed,
            self.segmentation_ms,
            self.morphology_ms,
            self.tracking_ms,
            self.total_ms,
        )
    }
}

/// What a run produced and where.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Frames found in the input directory.
    pub frames: usize,
    /// Rows written to the track CSV.
    pub track_rows: usize,
    /// Distinct track identities that ever existed.
    pub tracks_created: u64,
    pub tracks_csv: PathBuf,
    pub timing: TimingSummary,
}

/// Everything measured about one consecutive frame pair.
struct PairAnalysis {
    /// Index of the later frame; the mask and detections belong to it.
    frame_index: usize,
    detections: Vec<Detection>,
    /// Foreground pixels of the surviving blobs (the tracker's view).
    clean_mask: BinaryMask,
    segmentation: Duration,
    morphology: Duration,
    features: Duration,
}

fn analyze_pair(paths: &[PathBuf], t: usize, config: &PipelineConfig) -> Result<PairAnalysis> {
    let prev = load_frame(&paths[t - 1], t - 1).map_err(|e| e.in_stage(t, "decode"))?;
    let cur = load_frame(&paths[t], t).map_err(|e| e.in_stage(t, "decode"))?;

    let seg_start = Instant::now();
    let prev_gray = to_grayscale(&prev);
    let cur_gray = to_grayscale(&cur);
    let mask = motion_mask(&prev_gray, &cur_gray, &config.segmentation)
        .map_err(|e| e.in_stage(t, "segmentation"))?;
    let segmentation = seg_start.elapsed();

    let morph_start = Instant::now();
    let min_area = scaled_min_area(config.morphology.min_area, cur.width(), cur.height());
    let blobs = clean_and_extract(&mask, config.morphology.erode_iterations, min_area);
    let mut clean_mask = BinaryMask::new(cur.width(), cur.height(), t);
    for blob in &blobs {
        for &(x, y) in &blob.pixels {
            clean_mask.set(x, y, true);
        }
    }
    let morphology = morph_start.elapsed();

    let feat_start = Instant::now();
    let mut detections = Vec::with_capacity(blobs.len());
    for blob in &blobs {
        let features = extract_features(&cur, blob, config.hu_transform)
            .map_err(|e| e.in_stage(t, "features"))?;
        detections.push(Detection {
            features,
            bbox: blob.bbox,
            label: blob.label,
        });
    }
    let features = feat_start.elapsed();

    Ok(PairAnalysis {
        frame_index: t,
        detections,
        clean_mask,
        segmentation,
        morphology,
        features,
    })
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn require_sequence(input: &Path) -> Result<Vec<PathBuf>> {
    let paths = list_frame_files(input)?;
    if paths.len() < 2 {
        return Err(Error::Usage(format!(
            "{}: found {} frame(s); tracking needs at least 2",
            input.display(),
            paths.len()
        )));
    }
    Ok(paths)
}

fn feature_csv(rows: &[(usize, &Detection)]) -> String {
    let mut out = String::from(
        "frame_index,blob_label,area,\
         mean_r,std_r,skew_r,mean_g,std_g,skew_g,mean_b,std_b,skew_b,\
         phi1,phi2,phi3,phi4,phi5,phi6,phi7\n",
    );
    for (frame_index, det) in rows {
        out.push_str(&format!("{},{},{}", frame_index, det.label, det.features.area));
        for v in det.features.values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Run the full pipeline on a frame directory, writing `tracks.csv`,
/// `timing.txt`, and any artifacts enabled in `config.output` into `out`.
pub fn run(input: &Path, out: &Path, config: &PipelineConfig) -> Result<RunSummary> {
    config.validate()?;
    let wall_start = Instant::now();
    let paths = require_sequence(input)?;
    ensure_dir(out)?;

    // Pass 1: independent per-pair detection work, in parallel.
    let analyses: Vec<PairAnalysis> = (1..paths.len())
        .into_par_iter()
        .map(|t| analyze_pair(&paths, t, config))
        .collect::<Result<Vec<_>>>()?;

    if config.output.masks {
        let mask_dir = out.join("masks");
        ensure_dir(&mask_dir)?;
        analyses.par_iter().try_for_each(|a| {
            write_mask_png(
                &a.clean_mask,
                &mask_dir.join(format!("mask_{:06}.png", a.frame_index)),
            )
        })?;
    }

    // Pass 2: serial association.
    let track_start = Instant::now();
    let mut tracker = Tracker::new(config.tracker);
    let mut track_rows: Vec<BoxRecord> = Vec::new();
    let mut association_rows = String::new();
    // Boxes drawn on each frame; frame 0 has no tracking information.
    let mut boxes_per_frame: Vec<Vec<(u64, BoundingBox)>> = vec![Vec::new(); paths.len()];
    for analysis in &analyses {
        let t = analysis.frame_index;
        let result = tracker
            .step(&analysis.detections, t)
            .map_err(|e| e.in_stage(t, "tracking"))?;
        let mut observed: Vec<(u64, usize)> = result
            .matches
            .iter()
            .map(|m| (m.track_id, m.detection))
            .chain(result.new_tracks.iter().map(|n| (n.track_id, n.detection)))
            .collect();
        observed.sort_unstable();
        for (track_id, detection) in &observed {
            let bbox = analysis.detections[*detection].bbox;
            track_rows.push(BoxRecord {
                frame_index: t,
                object_id: *track_id,
                bbox,
            });
            boxes_per_frame[t].push((*track_id, bbox));
        }
        if config.output.associations {
            let mut matches = result.matches.clone();
            matches.sort_unstable_by_key(|m| m.track_id);
            for m in &matches {
                association_rows.push_str(&format!(
                    "{},{},{},{}\n",
                    t,
                    m.track_id,
                    analysis.detections[m.detection].label,
                    m.distance
                ));
            }
        }
    }
    let tracking_assoc = track_start.elapsed();

    let tracks_csv = out.join("tracks.csv");
    frame_io::save_box_records(&track_rows, &tracks_csv)?;
    if config.output.associations {
        frame_io::write_text_file(&out.join("associations.csv"), &association_rows)?;
    }
    if config.output.features {
        let rows: Vec<(usize, &Detection)> = analyses
            .iter()
            .flat_map(|a| a.detections.iter().map(move |d| (a.frame_index, d)))
            .collect();
        frame_io::write_text_file(&out.join("features.csv"), &feature_csv(&rows))?;
    }

    // Pass 3: annotation, in parallel (frame 0 is written unmodified).
    if config.output.annotated {
        let annotated_dir = out.join("annotated");
        ensure_dir(&annotated_dir)?;
        (0..paths.len()).into_par_iter().try_for_each(|t| {
            let frame = load_frame(&paths[t], t).map_err(|e| e.in_stage(t, "annotate"))?;
            write_annotated_frame(
                &frame,
                &boxes_per_frame[t],
                &annotated_dir.join(format!("frame_{:06}.png", t)),
            )
        })?;
    }

    let processed = analyses.len();
    let stage_total = |f: fn(&PairAnalysis) -> Duration| -> f64 {
        analyses.iter().map(f).sum::<Duration>().as_secs_f64() * 1000.0 / processed as f64
    };
    let features_ms = stage_total(|a| a.features);
    let timing = TimingSummary {
        processed,
        segmentation_ms: stage_total(|a| a.segmentation),
        morphology_ms: stage_total(|a| a.morphology),
        tracking_ms: features_ms
            + tracking_assoc.as_secs_f64() * 1000.0 / processed as f64,
        total_ms: wall_start.elapsed().as_secs_f64() * 1000.0 / processed as f64,
    };
    frame_io::write_text_file(&out.join("timing.txt"), &timing.render())?;

    Ok(RunSummary {
        frames: paths.len(),
        track_rows: track_rows.len(),
        tracks_created: tracker.next_id() - 1,
        tracks_csv,
        timing,
    })
}

/// Write per-frame motion masks for a sequence into `out`.
///
/// With `raw` set the masks come straight from segmentation; otherwise they
/// show the pixels of the blobs that survive the full cleanup chain.
/// Returns the number of masks written.
pub fn segment(input: &Path, out: &Path, config: &PipelineConfig, raw: bool) -> Result<usize> {
    config.validate()?;
    let paths = require_sequence(input)?;
    ensure_dir(out)?;
    (1..paths.len())
        .into_par_iter()
        .try_for_each(|t| -> Result<()> {
            let mask = if raw {
                let prev = load_frame(&paths[t - 1], t - 1).map_err(|e| e.in_stage(t, "decode"))?;
                let cur = load_frame(&paths[t], t).map_err(|e| e.in_stage(t, "decode"))?;
                motion_mask(&to_grayscale(&prev), &to_grayscale(&cur), &config.segmentation)
                    .map_err(|e| e.in_stage(t, "segmentation"))?
            } else {
                analyze_pair(&paths, t, config)?.clean_mask
            };
            write_mask_png(&mask, &out.join(format!("mask_{:06}.png", t)))
        })?;
    Ok(paths.len() - 1)
}

/// Write the per-blob feature table for a sequence to `out_file` as CSV.
/// Returns the number of feature rows.
pub fn feature_report(input: &Path, out_file: &Path, config: &PipelineConfig) -> Result<usize> {
    config.validate()?;
    let paths = require_sequence(input)?;
    let analyses: Vec<PairAnalysis> = (1..paths.len())
        .into_par_iter()
        .map(|t| analyze_pair(&paths, t, config))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<(usize, &Detection)> = analyses
        .iter()
        .flat_map(|a| a.detections.iter().map(move |d| (a.frame_index, d)))
        .collect();
    frame_io::write_text_file(out_file, &feature_csv(&rows))?;
    Ok(rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_io::write_frame_png;
    use crate::synth::{render, SceneScript};

    const SCENE: &str = "\
scene.frames = 12
scene.width = 90
scene.height = 70
scene.background = 15, 15, 15

actor.1.shape = rect
actor.1.color = 230, 60, 40
actor.1.size = 12, 10
actor.1.start = 6, 8
actor.1.velocity = 3, 2
";

    fn write_scene(dir: &Path) -> usize {
        let script = SceneScript::parse(SCENE).unwrap();
        let (frames, _) = render(&script, 11).unwrap();
        for frame in &frames {
            let name = format!("frame_{:06}.png", frame.index());
            write_frame_png(frame, &dir.join(name)).unwrap();
        }
        frames.len()
    }

    fn test_config() -> PipelineConfig {
        PipelineConfig::default()
    }

    #[test]
    fn run_tracks_a_single_moving_object_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("frames");
        let out = dir.path().join("out");
        fs::create_dir_all(&input).unwrap();
        let frames = write_scene(&input);

        let summary = run(&input, &out, &test_config()).unwrap();
        assert_eq!(summary.frames, frames);
        assert_eq!(summary.timing.processed, frames - 1);
        assert_eq!(summary.tracks_created, 1, "one persistent identity");
        assert_eq!(summary.track_rows, frames - 1);

        let gt = frame_io::load_box_records(&summary.tracks_csv).unwrap();
        assert_eq!(gt.records.len(), frames - 1);
        assert!(gt.records.iter().all(|r| r.object_id == 1));
        let indices: Vec<usize> = gt.records.iter().map(|r| r.frame_index).collect();
        let expected: Vec<usize> = (1..frames).collect();
        assert_eq!(indices, expected);

        assert!(out.join("timing.txt").exists());
        assert!(out.join("annotated/frame_000000.png").exists());
        assert!(out.join("annotated").read_dir().unwrap().count() == frames);
        // Disabled by default:
        assert!(!out.join("masks").exists());
        assert!(!out.join("features.csv").exists());
    }

    #[test]
    fn run_is_deterministic_and_optional_outputs_appear() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("frames");
        fs::create_dir_all(&input).unwrap();
        write_scene(&input);

        let mut config = test_config();
        config.apply_set("output.masks=true").unwrap();
        config.apply_set("output.features=true").unwrap();
        config.apply_set("output.associations=true").unwrap();
        config.apply_set("output.annotated=false").unwrap();

        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        run(&input, &out_a, &config).unwrap();
        run(&input, &out_b, &config).unwrap();
        for name in ["tracks.csv", "features.csv", "associations.csv"] {
            let a = fs::read(out_a.join(name)).unwrap();
            let b = fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} must be byte-identical");
            assert!(!a.is_empty(), "{name} must not be empty");
        }
        assert!(out_a.join("masks/mask_000001.png").exists());
        assert!(!out_a.join("annotated").exists());

        let features = fs::read_to_string(out_a.join("features.csv")).unwrap();
        let mut lines = features.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("frame_index,blob_label,area,mean_r"));
        assert!(header.ends_with("phi7"));
        assert_eq!(header.split(',').count(), 19);
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 19);

        let associations = fs::read_to_string(out_a.join("associations.csv")).unwrap();
        // Frame 1 creates the track (no match); matches start at frame 2.
        assert!(associations.lines().all(|l| l.split(',').count() == 4));
        assert_eq!(associations.lines().count(), 10);
    }

    #[test]
    fn identical_frames_produce_empty_track_csv() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("frames");
        fs::create_dir_all(&input).unwrap();
        let frame = crate::frame_io::Frame::filled(40, 30, [90, 90, 90], 0).unwrap();
        for i in 0..4 {
            write_frame_png(&frame, &input.join(format!("f_{i}.png"))).unwrap();
        }
        let out = dir.path().join("out");
        let summary = run(&input, &out, &PipelineConfig::default()).unwrap();
        assert_eq!(summary.track_rows, 0);
        assert_eq!(summary.tracks_created, 0);
        assert_eq!(fs::read_to_string(out.join("tracks.csv")).unwrap(), "");
    }

    #[test]
    fn fewer_than_two_frames_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("frames");
        fs::create_dir_all(&input).unwrap();
        let err = run(&input, &dir.path().join("out"), &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert!(err.to_string().contains("0 frame(s)"));
    }

    #[test]
    fn mismatched_dimensions_name_frame_and_stage() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("frames");
        fs::create_dir_all(&input).unwrap();
        let a = crate::frame_io::Frame::filled(20, 20, [0, 0, 0], 0).unwrap();
        let b = crate::frame_io::Frame::filled(24, 20, [0, 0, 0], 0).unwrap();
        write_frame_png(&a, &input.join("f_0.png")).unwrap();
        write_frame_png(&b, &input.join("f_1.png")).unwrap();
        let err = run(&input, &dir.path().join("out"), &PipelineConfig::default()).unwrap_err();
        match &err {
            Error::Stage {
                frame_index, stage, ..
            } => {
                assert_eq!(*frame_index, 1);
                assert_eq!(*stage, "segmentation");
            }
            other => panic!("expected stage error, got {other}"),
        }
        assert!(err.to_string().contains("dimension mismatch"));
    }

    #[test]
    fn segment_writes_masks_in_both_modes() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("frames");
        fs::create_dir_all(&input).unwrap();
        let frames = write_scene(&input);

        let cleaned = dir.path().join("cleaned");
        let count = segment(&input, &cleaned, &test_config(), false).unwrap();
        assert_eq!(count, frames - 1);
        assert!(cleaned.join("mask_000001.png").exists());
        assert!(cleaned.join(format!("mask_{:06}.png", frames - 1)).exists());

        let raw = dir.path().join("raw");
        segment(&input, &raw, &test_config(), true).unwrap();
        // Raw masks keep at least as many foreground pixels as cleaned ones.
        let load = |p: &Path| {
            let img = image::open(p).unwrap().into_luma8();
            img.pixels().filter(|p| p.0[0] > 0).count()
        };
        let raw_fg = load(&raw.join("mask_000004.png"));
        let clean_fg = load(&cleaned.join("mask_000004.png"));
        assert!(raw_fg >= clean_fg);
        assert!(clean_fg > 0);
    }

    #[test]
    fn feature_report_covers_every_detection() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("frames");
        fs::create_dir_all(&input).unwrap();
        let frames = write_scene(&input);
        let out_file = dir.path().join("features.csv");
        let rows = feature_report(&input, &out_file, &test_config()).unwrap();
        assert_eq!(rows, frames - 1, "one moving blob per processed frame");
        let text = fs::read_to_string(&out_file).unwrap();
        assert_eq!(text.lines().count(), rows + 1);
    }
}
