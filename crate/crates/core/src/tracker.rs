//! Identity association across frames.
//!
//! Each frame's detections are matched to the live tracks by a greedy
//! global nearest-neighbour pass over the Chi-Square feature distance:
//! candidate pairs are sorted by ascending distance and consumed skipping
//! any track or detection that is already taken. Detections that stay
//! unmatched open new tracks; tracks that stay unmatched accumulate misses
//! and exit once the allowance is exhausted.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::frame_io::BoundingBox;
use crate::moments::{FeatureVector, FEATURE_LEN};

/// Persistent track identity; assigned from 1 upward and never reused.
pub type TrackId = u64;

/// Denominator convention of the feature distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    /// `(a-b)^2 / (a+b)` with equal entries contributing zero; near-zero
    /// denominators for unequal entries are an error. Meaningful for
    /// non-negative features only.
    Strict,
    /// `(a-b)^2 / (|a| + |b| + epsilon)`: total, non-negative, symmetric,
    /// and zero exactly on identical vectors.
    Robust,
}

/// Association tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams {
    pub distance_mode: DistanceMode,
    /// Stabiliser for robust mode; gate for strict-mode denominators.
    pub epsilon: f64,
    /// Distances above this never match; such detections open new tracks.
    pub tau_new: f64,
    /// Consecutive unmatched frames a track survives before exiting.
    pub k_miss: u32,
    /// Standardise features with running per-dimension statistics before
    /// measuring distances.
    pub normalize: bool,
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams {
            distance_mode: DistanceMode::Robust,
            epsilon: 1e-9,
            tau_new: 1e6,
            k_miss: 0,
            normalize: false,
        }
    }
}

/// Lifecycle state of a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Active,
    Exited,
}

/// One tracked object: identity plus the most recent observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: TrackId,
    /// Features of the last matched detection.
    pub features: FeatureVector,
    /// Box of the last matched detection.
    pub bbox: BoundingBox,
    /// Frame index of the last matched detection.
    pub last_seen: usize,
    /// Consecutive frames without a match.
    pub misses: u32,
    pub status: TrackStatus,
}

/// A detection handed to the tracker: measured features plus where and what
/// it was in the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub features: FeatureVector,
    pub bbox: BoundingBox,
    /// Connected-component label within the source frame.
    pub label: u32,
}

/// A matched (track, detection) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub track_id: TrackId,
    /// Index into the detection list passed to [`associate`] / `step`.
    pub detection: usize,
    pub distance: f64,
}

/// A detection that opened a new track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NewTrack {
    pub track_id: TrackId,
    /// Index into the detection list.
    pub detection: usize,
}

/// Outcome of associating one frame's detections.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssociationResult {
    pub matches: Vec<Match>,
    pub new_tracks: Vec<NewTrack>,
    /// Tracks that exhausted their miss allowance this step; filled by
    /// [`Tracker::step`], always empty from plain [`associate`].
    pub exited: Vec<TrackId>,
}

/// Chi-Square distance between two 16-entry feature vectors.
///
/// Strict mode errors with the offending feature index when unequal entries
/// meet a denominator of magnitude below `epsilon`; equal entries always
/// contribute zero (covering the 0/0 case). Robust mode is total for any
/// `epsilon > 0`.
pub fn chi_square_distance(
    a: &FeatureVector,
    b: &FeatureVector,
    mode: DistanceMode,
    epsilon: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for n in 0..FEATURE_LEN {
        let x = a.values[n];
        let y = b.values[n];
        if x == y {
            continue;
        }
        let diff = x - y;
        match mode {
            DistanceMode::Robust => {
                sum += diff * diff / (x.abs() + y.abs() + epsilon);
            }
            DistanceMode::Strict => {
                let denom = x + y;
                if denom.abs() < epsilon {
                    return Err(Error::DegenerateDenominator { index: n });
                }
                sum += diff * diff / denom;
            }
        }
    }
    Ok(sum)
}

fn distance_pairs(
    track_features: &[(TrackId, FeatureVector)],
    detections: &[FeatureVector],
    params: &TrackerParams,
) -> Vec<(f64, TrackId, usize)> {
    let mut pairs = Vec::with_capacity(track_features.len() * detections.len());
    for (tid, tf) in track_features {
        for (j, df) in detections.iter().enumerate() {
            // Strict-mode degenerate pairs are simply not candidates.
            if let Ok(d) = chi_square_distance(tf, df, params.distance_mode, params.epsilon) {
                if d <= params.tau_new {
                    pairs.push((d, *tid, j));
                }
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    pairs
}

fn associate_features(
    track_features: &[(TrackId, FeatureVector)],
    detections: &[FeatureVector],
    params: &TrackerParams,
    next_id: TrackId,
) -> AssociationResult {
    let mut result = AssociationResult::default();
    let mut used_tracks = HashSet::new();
    let mut used_detections = HashSet::new();
    for (distance, track_id, detection) in distance_pairs(track_features, detections, params) {
        if used_tracks.contains(&track_id) || used_detections.contains(&detection) {
            continue;
        }
        used_tracks.insert(track_id);
        used_detections.insert(detection);
        result.matches.push(Match {
            track_id,
            detection,
            distance,
        });
    }
    let mut id = next_id;
    for detection in 0..detections.len() {
        if !used_detections.contains(&detection) {
            result.new_tracks.push(NewTrack {
                track_id: id,
                detection,
            });
            id += 1;
        }
    }
    result
}

/// Pure association of detections to tracks; new tracks receive ids
/// `next_id, next_id + 1, ...` in detection order. The `exited` list is
/// always empty here — lifecycle bookkeeping belongs to [`Tracker::step`].
pub fn associate(
    tracks: &[Track],
    detections: &[FeatureVector],
    params: &TrackerParams,
    next_id: TrackId,
) -> AssociationResult {
    let track_features: Vec<(TrackId, FeatureVector)> =
        tracks.iter().map(|t| (t.id, t.features)).collect();
    associate_features(&track_features, detections, params, next_id)
}

/// Per-dimension running mean/variance (Welford) used by the optional
/// feature standardisation.
#[derive(Debug, Clone, Default)]
struct RunningStats {
    count: u64,
    mean: [f64; FEATURE_LEN],
    m2: [f64; FEATURE_LEN],
}

impl RunningStats {
    fn update(&mut self, values: &[f64; FEATURE_LEN]) {
        self.count += 1;
        let n = self.count as f64;
        for i in 0..FEATURE_LEN {
            let delta = values[i] - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (values[i] - self.mean[i]);
        }
    }

    fn transform(&self, fv: &FeatureVector) -> FeatureVector {
        let mut out = *fv;
        if self.count == 0 {
            return out;
        }
        let n = self.count as f64;
        for i in 0..FEATURE_LEN {
            let sd = (self.m2[i] / n).sqrt().max(1e-9);
            out.values[i] = (fv.values[i] - self.mean[i]) / sd;
        }
        out
    }
}

/// Stateful frame-to-frame tracker.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    tracks: Vec<Track>,
    next_id: TrackId,
    last_frame: Option<usize>,
    stats: RunningStats,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Tracker {
        Tracker {
            params,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            stats: RunningStats::default(),
        }
    }

    /// Currently live tracks.
    pub fn active_tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Next identity that will be assigned.
    pub fn next_id(&self) -> TrackId {
        self.next_id
    }

    /// Advance the tracker by one frame of detections.
    ///
    /// Frame indices must be strictly increasing across calls. Matched
    /// tracks adopt their detection's features and box; unmatched tracks
    /// gain a miss and exit (reported once in `exited`) when the miss count
    /// exceeds the allowance; unmatched detections open new tracks.
    pub fn step(&mut self, detections: &[Detection], frame_index: usize) -> Result<AssociationResult> {
        if let Some(last) = self.last_frame {
            if frame_index <= last {
                return Err(Error::FrameOrder {
                    got: frame_index,
                    last,
                });
            }
        }
        self.last_frame = Some(frame_index);

        let features: Vec<FeatureVector> = detections.iter().map(|d| d.features).collect();
        let mut result = if self.params.normalize {
            for f in &features {
                self.stats.update(&f.values);
            }
            let track_features: Vec<(TrackId, FeatureVector)> = self
                .tracks
                .iter()
                .map(|t| (t.id, self.stats.transform(&t.features)))
                .collect();
            let det_features: Vec<FeatureVector> =
                features.iter().map(|f| self.stats.transform(f)).collect();
            associate_features(&track_features, &det_features, &self.params, self.next_id)
        } else {
            associate(&self.tracks, &features, &self.params, self.next_id)
        };

        let matched: std::collections::HashMap<TrackId, &Match> =
            result.matches.iter().map(|m| (m.track_id, m)).collect();
        let mut exited = Vec::new();
        for track in &mut self.tracks {
            if let Some(m) = matched.get(&track.id) {
                let detection = &detections[m.detection];
                track.features = detection.features;
                track.bbox = detection.bbox;
                track.last_seen = frame_index;
                track.misses = 0;
            } else {
                track.misses += 1;
                if track.misses > self.params.k_miss {
                    track.status = TrackStatus::Exited;
                    exited.push(track.id);
                }
            }
        }
        self.tracks.retain(|t| t.status == TrackStatus::Active);
        for nt in &result.new_tracks {
            let detection = &detections[nt.detection];
            self.tracks.push(Track {
                id: nt.track_id,
                features: detection.features,
                bbox: detection.bbox,
                last_seen: frame_index,
                misses: 0,
                status: TrackStatus::Active,
            });
            self.next_id = nt.track_id + 1;
        }
        result.exited = exited;
        Ok(result)
    }
}
