//! Correspondence-based tracking evaluation.
//!
//! A tracker output is scored against ground truth on consecutive-frame
//! correspondences: every track present on frames `t` and `t+1` establishes
//! one correspondence, which counts as correct when the track's box matches
//! the same ground-truth object (by best IoU at or above the threshold) on
//! both frames. Precision is correct/established, recall is
//! correct/actual, where actual counts the ground truth's own
//! consecutive-frame pairs.

use std::collections::{BTreeMap, HashMap};

use crate::frame_io::{BoundingBox, BoxRecord, GroundTruth};

/// Intersection-over-union of two boxes; 0 when either is empty or they do
/// not overlap.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    if a.w <= 0 || a.h <= 0 || b.w <= 0 || b.h <= 0 {
        return 0.0;
    }
    let ix = (a.right().min(b.right()) - a.x.max(b.x)).max(0);
    let iy = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0);
    let inter = ix * iy;
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Counts and the two derived ratios for one scored sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceScore {
    /// Distinct ground-truth object ids.
    pub objects: usize,
    /// Track correspondences across consecutive frame pairs.
    pub established: usize,
    /// Established correspondences that follow one ground-truth object.
    pub correct: usize,
    /// Ground-truth correspondences across consecutive frame pairs.
    pub actual: usize,
    /// `correct / established`, or 0 when nothing was established.
    pub precision: f64,
    /// `correct / actual`, or 0 when the ground truth has no pairs.
    pub recall: f64,
}

/// For each record, the ground-truth id its box matches best on that frame,
/// requiring IoU >= threshold; ties prefer the higher IoU, then the smaller
/// ground-truth id.
fn best_gt_match(
    bbox: &BoundingBox,
    gt_frame: &[(u64, BoundingBox)],
    iou_threshold: f64,
) -> Option<u64> {
    let mut best: Option<(f64, u64)> = None;
    for (gt_id, gt_box) in gt_frame {
        let overlap = iou(bbox, gt_box);
        if overlap < iou_threshold {
            continue;
        }
        let better = match best {
            None => true,
            Some((best_iou, best_id)) => {
                overlap > best_iou || (overlap == best_iou && *gt_id < best_id)
            }
        };
        if better {
            best = Some((overlap, *gt_id));
        }
    }
    best.map(|(_, id)| id)
}

/// Count consecutive-frame presence pairs per id.
fn consecutive_pairs(per_id: &HashMap<u64, BTreeMap<usize, BoundingBox>>) -> usize {
    per_id
        .values()
        .map(|frames| {
            frames
                .keys()
                .filter(|&&t| frames.contains_key(&(t + 1)))
                .count()
        })
        .sum()
}

/// Score tracker output records against ground truth at an IoU threshold
/// in (0, 1].
pub fn score(tracks: &[BoxRecord], gt: &GroundTruth, iou_threshold: f64) -> SequenceScore {
    let mut gt_by_frame: BTreeMap<usize, Vec<(u64, BoundingBox)>> = BTreeMap::new();
    let mut gt_by_id: HashMap<u64, BTreeMap<usize, BoundingBox>> = HashMap::new();
    for r in &gt.records {
        gt_by_frame
            .entry(r.frame_index)
            .or_default()
            .push((r.object_id, r.bbox));
        gt_by_id
            .entry(r.object_id)
            .or_default()
            .insert(r.frame_index, r.bbox);
    }
    for frame in gt_by_frame.values_mut() {
        frame.sort_unstable_by_key(|&(id, _)| id);
    }

    let mut track_by_id: HashMap<u64, BTreeMap<usize, BoundingBox>> = HashMap::new();
    for r in tracks {
        track_by_id
            .entry(r.object_id)
            .or_default()
            .insert(r.frame_index, r.bbox);
    }

    let empty = Vec::new();
    let mut established = 0;
    let mut correct = 0;
    for frames in track_by_id.values() {
        for (&t, bbox) in frames {
            let Some(next_bbox) = frames.get(&(t + 1)) else {
                continue;
            };
            established += 1;
            let gt_t = gt_by_frame.get(&t).unwrap_or(&empty);
            let gt_next = gt_by_frame.get(&(t + 1)).unwrap_or(&empty);
            let here = best_gt_match(bbox, gt_t, iou_threshold);
            let there = best_gt_match(next_bbox, gt_next, iou_threshold);
            if let (Some(a), Some(b)) = (here, there) {
                if a == b {
                    correct += 1;
                }
            }
        }
    }

    let actual = consecutive_pairs(&gt_by_id);
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    SequenceScore {
        objects: gt_by_id.len(),
        established,
        correct,
        actual,
        precision: ratio(correct, established),
        recall: ratio(correct, actual),
    }
}

/// One line of a multi-sequence report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub scene: String,
    pub objects: usize,
    pub precision: f64,
    pub recall: f64,
}

/// A scored set of sequences plus pooled counts across all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    /// Pooled counts over every sequence.
    pub established: usize,
    pub correct: usize,
    pub actual: usize,
}

impl EvalReport {
    pub fn from_scores(scored: Vec<(String, String, SequenceScore)>) -> EvalReport {
        let mut rows = Vec::with_capacity(scored.len());
        let (mut established, mut correct, mut actual) = (0, 0, 0);
        for (dataset, scene, s) in scored {
            established += s.established;
            correct += s.correct;
            actual += s.actual;
            rows.push(ReportRow {
                dataset,
                scene,
                objects: s.objects,
                precision: s.precision,
                recall: s.recall,
            });
        }
        EvalReport {
            rows,
            established,
            correct,
            actual,
        }
    }

    /// Arithmetic mean of the per-row precisions (0 for an empty report).
    pub fn average_precision(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.precision).sum::<f64>() / self.rows.len() as f64
    }

    /// Arithmetic mean of the per-row recalls (0 for an empty report).
    pub fn average_recall(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.recall).sum::<f64>() / self.rows.len() as f64
    }

    /// Aligned text table with a trailing `Average` row.
    pub fn to_text(&self) -> String {
        let mut width_dataset = "Dataset".len();
        let mut width_scene = "Scene".len();
        for row in &self.rows {
            width_dataset = width_dataset.max(row.dataset.len());
            width_scene = width_scene.max(row.scene.len());
        }
        width_dataset = width_dataset.max("Average".len());
        let mut out = format!(
            "{:<wd$}  {:<ws$}  {:>7}  {:>9}  {:>7}\n",
            "Dataset",
            "Scene",
            "Objects",
            "Precision",
            "Recall",
            wd = width_dataset,
            ws = width_scene,
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{:<wd$}  {:<ws$}  {:>7}  {:>9.4}  {:>7.4}\n",
                row.dataset,
                row.scene,
                row.objects,
                row.precision,
                row.recall,
                wd = width_dataset,
                ws = width_scene,
            ));
        }
        out.push_str(&format!(
            "{:<wd$}  {:<ws$}  {:>7}  {:>9.4}  {:>7.4}\n",
            "Average",
            "",
            "",
            self.average_precision(),
            self.average_recall(),
            wd = width_dataset,
            ws = width_scene,
        ));
        out
    }

    /// CSV form: `dataset,scene,objects,precision,recall` rows plus a
    /// trailing `Average` row with blank dataset-specific fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,scene,objects,precision,recall\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4}\n",
                row.dataset, row.scene, row.objects, row.precision, row.recall
            ));
        }
        out.push_str(&format!(
            "Average,,,{:.4},{:.4}\n",
            self.average_precision(),
            self.average_recall()
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(frame_index: usize, object_id: u64, x: i64, y: i64, w: i64, h: i64) -> BoxRecord {
        BoxRecord {
            frame_index,
            object_id,
            bbox: BoundingBox::new(x, y, w, h),
        }
    }

    #[test]
    fn iou_basics() {
        let a = BoundingBox::new(0, 0, 10, 10);
        assert_eq!(iou(&a, &a), 1.0);
        let disjoint = BoundingBox::new(30, 30, 5, 5);
        assert_eq!(iou(&a, &disjoint), 0.0);
        let touching = BoundingBox::new(10, 0, 10, 10);
        assert_eq!(iou(&a, &touching), 0.0);
        // Half-overlap: 50 / (100 + 100 - 50).
        let shifted = BoundingBox::new(5, 0, 10, 10);
        assert!((iou(&a, &shifted) - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(iou(&a, &shifted), iou(&shifted, &a));
    }

    #[test]
    fn perfect_tracking_scores_one_one() {
        let gt = GroundTruth {
            records: vec![
                rec(0, 1, 0, 0, 10, 10),
                rec(1, 1, 2, 0, 10, 10),
                rec(2, 1, 4, 0, 10, 10),
                rec(0, 2, 50, 50, 8, 8),
                rec(1, 2, 50, 52, 8, 8),
                rec(2, 2, 50, 54, 8, 8),
            ],
        };
        // Same boxes, relabelled ids.
        let tracks: Vec<BoxRecord> = gt
            .records
            .iter()
            .map(|r| BoxRecord {
                object_id: r.object_id + 70,
                ..*r
            })
            .collect();
        for threshold in [0.3, 0.5, 1.0] {
            let s = score(&tracks, &gt, threshold);
            assert_eq!(s.objects, 2);
            assert_eq!(s.established, 4);
            assert_eq!(s.correct, 4);
            assert_eq!(s.actual, 4);
            assert_eq!(s.precision, 1.0);
            assert_eq!(s.recall, 1.0);
        }
    }

    #[test]
    fn empty_tracks_score_zero_but_do_not_divide_by_zero() {
        let gt = GroundTruth {
            records: vec![rec(0, 1, 0, 0, 10, 10), rec(1, 1, 0, 0, 10, 10)],
        };
        let s = score(&[], &gt, 0.5);
        assert_eq!(s.established, 0);
        assert_eq!(s.correct, 0);
        assert_eq!(s.actual, 1);
        assert_eq!(s.precision, 0.0);
        assert_eq!(s.recall, 0.0);

        let empty_gt = GroundTruth::default();
        let s2 = score(&[rec(0, 1, 0, 0, 4, 4), rec(1, 1, 0, 0, 4, 4)], &empty_gt, 0.5);
        assert_eq!(s2.established, 1);
        assert_eq!(s2.correct, 0);
        assert_eq!(s2.actual, 0);
        assert_eq!(s2.recall, 0.0);
    }

    #[test]
    fn identity_switch_is_not_correct() {
        // Two stationary objects; the tracker swaps ids between frames 1
        // and 2, so its correspondences bridge different objects.
        let gt = GroundTruth {
            records: vec![
                rec(1, 1, 0, 0, 10, 10),
                rec(2, 1, 0, 0, 10, 10),
                rec(1, 2, 40, 0, 10, 10),
                rec(2, 2, 40, 0, 10, 10),
            ],
        };
        let tracks = vec![
            rec(1, 7, 0, 0, 10, 10),
            rec(2, 7, 40, 0, 10, 10), // jumped to the other object
            rec(1, 8, 40, 0, 10, 10),
            rec(2, 8, 0, 0, 10, 10),
        ];
        let s = score(&tracks, &gt, 0.5);
        assert_eq!(s.established, 2);
        assert_eq!(s.correct, 0);
        assert_eq!(s.precision, 0.0);
    }

    #[test]
    fn drifting_box_below_threshold_is_not_correct() {
        let gt = GroundTruth {
            records: vec![rec(0, 1, 0, 0, 10, 10), rec(1, 1, 0, 0, 10, 10)],
        };
        // Frame-1 box overlaps the object at IoU 1/3 only.
        let tracks = vec![rec(0, 1, 0, 0, 10, 10), rec(1, 1, 5, 0, 10, 10)];
        let strict = score(&tracks, &gt, 0.5);
        assert_eq!(strict.established, 1);
        assert_eq!(strict.correct, 0);
        let loose = score(&tracks, &gt, 0.3);
        assert_eq!(loose.correct, 1);
    }

    #[test]
    fn gap_in_track_presence_establishes_nothing() {
        let gt = GroundTruth {
            records: vec![
                rec(0, 1, 0, 0, 10, 10),
                rec(1, 1, 0, 0, 10, 10),
                rec(2, 1, 0, 0, 10, 10),
            ],
        };
        // Track skips frame 1: no consecutive presence anywhere.
        let tracks = vec![rec(0, 3, 0, 0, 10, 10), rec(2, 3, 0, 0, 10, 10)];
        let s = score(&tracks, &gt, 0.5);
        assert_eq!(s.established, 0);
        assert_eq!(s.actual, 2);
    }

    #[test]
    fn best_match_prefers_higher_iou_then_smaller_id() {
        let frame = vec![
            (4u64, BoundingBox::new(0, 0, 10, 10)),
            (2u64, BoundingBox::new(2, 0, 10, 10)),
        ];
        // Query equals object 4's box exactly.
        let q = BoundingBox::new(0, 0, 10, 10);
        assert_eq!(best_gt_match(&q, &frame, 0.3), Some(4));
        // Equidistant query between two identical boxes -> smaller id.
        let tie = vec![
            (9u64, BoundingBox::new(0, 0, 10, 10)),
            (3u64, BoundingBox::new(0, 0, 10, 10)),
        ];
        assert_eq!(best_gt_match(&q, &tie, 0.5), Some(3));
        assert_eq!(best_gt_match(&q, &[], 0.5), None);
    }

    #[test]
    fn report_averages_rows_arithmetically() {
        let a = SequenceScore {
            objects: 3,
            established: 10,
            correct: 9,
            actual: 12,
            precision: 0.9,
            recall: 0.75,
        };
        let b = SequenceScore {
            objects: 1,
            established: 4,
            correct: 2,
            actual: 4,
            precision: 0.5,
            recall: 0.5,
        };
        let report = EvalReport::from_scores(vec![
            ("setA".into(), "indoor".into(), a),
            ("setB".into(), "outdoor".into(), b),
        ]);
        assert!((report.average_precision() - 0.7).abs() < 1e-12);
        assert!((report.average_recall() - 0.625).abs() < 1e-12);
        assert_eq!(report.established, 14);
        assert_eq!(report.correct, 11);

        let csv = report.to_csv();
        assert_eq!(
            csv,
            "dataset,scene,objects,precision,recall\n\
             setA,indoor,3,0.9000,0.7500\n\
             setB,outdoor,1,0.5000,0.5000\n\
             Average,,,0.7000,0.6250\n"
        );
        let text = report.to_text();
        assert!(text.starts_with("Dataset"));
        assert!(text.contains("Average"));
        assert!(text.contains("0.7000"));
    }

    proptest! {
        #[test]
        fn score_is_invariant_under_track_relabelling(seed in 0u64..150) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut gt_records = Vec::new();
            let mut track_records = Vec::new();
            for frame in 0..6usize {
                for id in 1..=3u64 {
                    if rng.random::<f64>() < 0.8 {
                        let x = rng.random_range(0..40i64);
                        let y = rng.random_range(0..40i64);
                        gt_records.push(rec(frame, id, x, y, 10, 10));
                    }
                    if rng.random::<f64>() < 0.8 {
                        let x = rng.random_range(0..40i64);
                        let y = rng.random_range(0..40i64);
                        track_records.push(rec(frame, id, x, y, 10, 10));
                    }
                }
            }
            let gt = GroundTruth { records: gt_records };
            let base = score(&track_records, &gt, 0.5);
            let relabelled: Vec<BoxRecord> = track_records
                .iter()
                .map(|r| BoxRecord { object_id: r.object_id * 13 + 5, ..*r })
                .collect();
            let moved = score(&relabelled, &gt, 0.5);
            prop_assert_eq!(base, moved);
        }

        #[test]
        fn raising_threshold_never_helps(seed in 0u64..150) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut gt_records = Vec::new();
            let mut track_records = Vec::new();
            for frame in 0..5usize {
                for id in 1..=2u64 {
                    gt_records.push(rec(frame, id, (id as i64) * 30, 0, 12, 12));
                    let jitter_x = rng.random_range(-6..6i64);
                    let jitter_y = rng.random_range(-6..6i64);
                    track_records.push(rec(
                        frame,
                        id,
                        (id as i64) * 30 + jitter_x,
                        jitter_y,
                        12,
                        12,
                    ));
                }
            }
            let gt = GroundTruth { records: gt_records };
            let loose = score(&track_records, &gt, 0.2);
            let strict = score(&track_records, &gt, 0.7);
            prop_assert!(strict.correct <= loose.correct);
            prop_assert!(strict.recall <= loose.recall);
        }
    }
}
