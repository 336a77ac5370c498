//! The tracker: four-level confidence-guided association plus the
//! New / Tracked / Lost / Removed track lifecycle.
//!
//! Per frame, after predicting every live track:
//!
//! 1. high-loc/high-cls detections vs. all tracks, motion similarity;
//!    New tracks left unmatched are removed.
//! 2. high-loc/low-cls detections and level-1 leftovers vs. remaining
//!    Tracked and Lost tracks, motion similarity.
//! 3. low-loc/high-cls detections vs. remaining tracks, appearance similarity.
//! 4. low-loc/low-cls detections and every leftover vs. remaining Tracked
//!    tracks, blended similarity.
//!
//! A disabled level matches nothing and passes its inputs through unmatched.
//! Matched tracks leave the cascade, so a track matches at most once a frame.

use std::fmt;

use crate::assignment::{solve_with, AssignmentResult};
use crate::config::{LevelCost, TrackerConfig};
use crate::costs::{cost_c3, cost_c4, motion_similarity, SimilarityMatrix};
use crate::detection::{classify, Detection, Embedding, FrameInput};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::motion::{state_to_box, KalmanFilter, KalmanState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackState {
    New,
    Tracked,
    Lost,
    Removed,
}

impl TrackState {
    /// Whether `self -> to` is a legal lifecycle edge.
    pub fn can_become(self, to: TrackState) -> bool {
        use TrackState::*;
        matches!(
            (self, to),
            (New, Tracked) | (New, Removed) | (Tracked, Lost) | (Lost, Tracked) | (Lost, Removed)
        )
    }
}

impl fmt::Display for TrackState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    pub kalman: KalmanState,
    pub embedding: Option<Embedding>,
    pub consecutive_hits: u32,
    pub frames_since_update: u32,
    pub last_box: BBox,
    pub last_det_conf: f64,
}

impl Track {
    pub fn predicted_box(&self) -> BBox {
        state_to_box(&self.kalman)
    }
}

/// One lifecycle edge; `from` is `None` when the track is spawned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub frame: u32,
    pub track_id: u64,
    pub from: Option<TrackState>,
    pub to: TrackState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelMatch {
    /// 1-based cascade level.
    pub level: u8,
    pub detection: usize,
    pub track_id: u64,
    pub similarity: f64,
}

/// What happened to each detection of a frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssociationLog {
    /// Detection indices offered at each level.
    pub candidates: [Vec<usize>; 4],
    pub matches: Vec<LevelMatch>,
    /// `(detection index, new track id)`.
    pub spawned: Vec<(usize, u64)>,
    /// Unmatched detections too weak (or degenerate) to start a track.
    pub discarded: Vec<usize>,
}

impl AssociationLog {
    pub fn matches_at(&self, level: u8) -> usize {
        self.matches.iter().filter(|m| m.level == level).count()
    }

    pub fn level_of(&self, detection: usize) -> Option<u8> {
        self.matches
            .iter()
            .find(|m| m.detection == detection)
            .map(|m| m.level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedObject {
    pub id: u64,
    pub bbox: BBox,
    pub det_conf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub frame_index: u32,
    /// Tracked tracks matched this frame, by ascending id, carrying the
    /// matched detection's box.
    pub objects: Vec<TrackedObject>,
    pub log: AssociationLog,
}

/// `normalize(momentum * track + (1 - momentum) * det)`; the prior is kept
/// when the blend vanishes.
pub fn ema_update(track: &Embedding, det: &Embedding, momentum: f64) -> Result<Embedding> {
    if track.dim() != det.dim() {
        return Err(Error::DimensionMismatch {
            left: track.dim(),
            right: det.dim(),
        });
    }
    if momentum == 1.0 {
        return Ok(track.clone());
    }
    if momentum == 0.0 {
        return Ok(det.clone());
    }
    let blended: Vec<f64> = track
        .as_slice()
        .iter()
        .zip(det.as_slice())
        .map(|(t, d)| momentum * t + (1.0 - momentum) * d)
        .collect();
    let norm = blended.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return Ok(track.clone());
    }
    Embedding::normalized(blended)
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    filter: KalmanFilter,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
    transitions: Option<Vec<Transition>>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Tracker {
            filter: KalmanFilter::new(config.kalman),
            config,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            transitions: None,
        })
    }

    /// Records every lifecycle transition for later inspection.
    pub fn with_transition_log(mut self) -> Self {
        self.transitions = Some(Vec::new());
        self
    }

    pub fn take_transitions(&mut self) -> Vec<Transition> {
        self.transitions
            .as_mut()
            .map(std::mem::take)
            .unwrap_or_default()
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live (non-removed) tracks by ascending id.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }

    fn record(&mut self, frame: u32, track_id: u64, from: Option<TrackState>, to: TrackState) {
        if let Some(log) = self.transitions.as_mut() {
            log.push(Transition {
                frame,
                track_id,
                from,
                to,
            });
        }
    }

    fn validate_frame(&self, frame: &FrameInput) -> Result<()> {
        if let Some(previous) = self.last_frame {
            if frame.frame_index <= previous {
                return Err(Error::NonMonotoneFrame {
                    previous,
                    got: frame.frame_index,
                });
            }
        }
        for (i, d) in frame.detections.iter().enumerate() {
            d.validate()?;
            if self.config.appearance && d.embedding.is_none() {
                return Err(Error::MissingEmbedding {
                    side: "detection",
                    index: i,
                });
            }
        }
        Ok(())
    }

    fn similarity(
        &self,
        cost: LevelCost,
        dets: &[usize],
        tracks: &[usize],
        frame: &FrameInput,
    ) -> Result<SimilarityMatrix> {
        let det_refs: Vec<&Detection> = dets.iter().map(|&i| &frame.detections[i]).collect();
        let m = match cost {
            LevelCost::Appearance if self.config.appearance => {
                let embeddings: Vec<Option<&Embedding>> = tracks
                    .iter()
                    .map(|&t| self.tracks[t].embedding.as_ref())
                    .collect();
                cost_c3(&det_refs, &embeddings)?
            }
            _ => {
                let boxes: Vec<BBox> = tracks
                    .iter()
                    .map(|&t| self.tracks[t].predicted_box())
                    .collect();
                motion_similarity(&det_refs, &boxes, self.config.motion_fusion)
            }
        };
        Ok(m.with_index_maps(dets.to_vec(), tracks.to_vec()))
    }

    fn blended(
        &self,
        dets: &[usize],
        tracks: &[usize],
        frame: &FrameInput,
    ) -> Result<SimilarityMatrix> {
        let motion = self.similarity(LevelCost::Motion, dets, tracks, frame)?;
        if !self.config.appearance {
            return Ok(motion);
        }
        let appearance = self.similarity(LevelCost::Appearance, dets, tracks, frame)?;
        cost_c4(&motion, &appearance, self.config.alpha)
    }

    fn associate(
        &self,
        level: u8,
        m: &SimilarityMatrix,
        log: &mut AssociationLog,
        track_match: &mut [Option<usize>],
    ) -> AssignmentResult {
        let result = solve_with(
            m,
            self.config.gates[level as usize - 1],
            self.config.gate_mode,
        );
        for mt in &result.matches {
            track_match[mt.track] = Some(mt.detection);
            log.matches.push(LevelMatch {
                level,
                detection: mt.detection,
                track_id: self.tracks[mt.track].id,
                similarity: mt.similarity,
            });
        }
        result
    }

    /// Processes one frame. Frames must arrive with strictly increasing index.
    pub fn step(&mut self, frame: &FrameInput) -> Result<FrameOutput> {
        self.validate_frame(frame)?;
        let frame_index = frame.frame_index;

        for t in &mut self.tracks {
            t.kalman = self.filter.predict(&t.kalman);
        }

        let mut by_quadrant: [Vec<usize>; 4] = Default::default();
        for (i, d) in frame.detections.iter().enumerate() {
            let q = classify(d, self.config.theta_loc, self.config.theta_cls);
            by_quadrant[q.level() - 1].push(i);
        }

        let mut log = AssociationLog::default();
        let mut track_match: Vec<Option<usize>> = vec![None; self.tracks.len()];
        let mut doomed_new: Vec<usize> = Vec::new();
        let all_tracks: Vec<usize> = (0..self.tracks.len()).collect();
        let enabled = self.config.levels_enabled;

        // level 1
        let l1_dets = by_quadrant[0].clone();
        log.candidates[0] = l1_dets.clone();
        let m = self.similarity(LevelCost::Motion, &l1_dets, &all_tracks, frame)?;
        let r1 = self.associate(1, &m, &mut log, &mut track_match);
        let mut pool: Vec<usize> = Vec::new();
        for t in r1.unmatched_tracks {
            if self.tracks[t].state == TrackState::New && self.config.strict_new_removal {
                doomed_new.push(t);
            } else {
                pool.push(t);
            }
        }

        // level 2
        let l2_dets = merge_sorted(&by_quadrant[1], &r1.unmatched_detections);
        log.candidates[1] = l2_dets.clone();
        let (d_u2, t_u2) = if enabled[0] {
            let m = self.similarity(self.config.level2_cost, &l2_dets, &pool, frame)?;
            let r = self.associate(2, &m, &mut log, &mut track_match);
            (r.unmatched_detections, r.unmatched_tracks)
        } else {
            (l2_dets, pool)
        };

        // level 3
        let l3_dets = by_quadrant[2].clone();
        log.candidates[2] = l3_dets.clone();
        let (d_u3, t_u3) = if enabled[1] {
            let m = self.similarity(self.config.level3_cost, &l3_dets, &t_u2, frame)?;
            let r = self.associate(3, &m, &mut log, &mut track_match);
            (r.unmatched_detections, r.unmatched_tracks)
        } else {
            (l3_dets, t_u2)
        };

        // level 4
        let l4_dets = merge_sorted(&merge_sorted(&by_quadrant[3], &d_u2), &d_u3);
        log.candidates[3] = l4_dets.clone();
        let l4_tracks: Vec<usize> = t_u3
            .into_iter()
            .filter(|&t| self.tracks[t].state == TrackState::Tracked)
            .collect();
        let unmatched_dets = if enabled[2] {
            let m = self.blended(&l4_dets, &l4_tracks, frame)?;
            self.associate(4, &m, &mut log, &mut track_match)
                .unmatched_detections
        } else {
            l4_dets
        };
        log.matches.sort_by_key(|m| m.detection);

        // track bookkeeping
        let mut objects = Vec::new();
        let mut removed = vec![false; self.tracks.len()];
        for t in doomed_new {
            removed[t] = true;
        }
        for idx in 0..self.tracks.len() {
            let id = self.tracks[idx].id;
            match track_match[idx] {
                Some(d) => {
                    let det = &frame.detections[d];
                    let momentum = self.config.ema_momentum;
                    let appearance = self.config.appearance;
                    let t_max = self.config.t_max_confirm;
                    let track = &mut self.tracks[idx];
                    track.kalman = self.filter.update(&track.kalman, &det.bbox);
                    if appearance {
                        if let (Some(te), Some(de)) = (&track.embedding, &det.embedding) {
                            track.embedding = Some(ema_update(te, de, momentum)?);
                        }
                    }
                    track.consecutive_hits += 1;
                    track.frames_since_update = 0;
                    track.last_box = det.bbox;
                    track.last_det_conf = det.det_conf();
                    let before = track.state;
                    let after = match before {
                        TrackState::New if track.consecutive_hits >= t_max => TrackState::Tracked,
                        TrackState::Lost => TrackState::Tracked,
                        s => s,
                    };
                    track.state = after;
                    if after == TrackState::Tracked {
                        objects.push(TrackedObject {
                            id,
                            bbox: det.bbox,
                            det_conf: det.det_conf(),
                        });
                    }
                    if before != after {
                        self.record(frame_index, id, Some(before), after);
                    }
                }
                None => {
                    let l_max = self.config.l_max_lost;
                    let track = &mut self.tracks[idx];
                    track.consecutive_hits = 0;
                    track.frames_since_update += 1;
                    match track.state {
                        TrackState::New => {
                            removed[idx] = true;
                        }
                        TrackState::Tracked => {
                            track.state = TrackState::Lost;
                            let lost_long = track.frames_since_update >= l_max;
                            self.record(
                                frame_index,
                                id,
                                Some(TrackState::Tracked),
                                TrackState::Lost,
                            );
                            if lost_long {
                                removed[idx] = true;
                            }
                        }
                        TrackState::Lost => {
                            if track.frames_since_update >= l_max {
                                removed[idx] = true;
                            }
                        }
                        TrackState::Removed => unreachable!("removed tracks are dropped"),
                    }
                }
            }
        }
        for (idx, &gone) in removed.iter().enumerate() {
            if gone {
                let (id, from) = (self.tracks[idx].id, self.tracks[idx].state);
                self.tracks[idx].state = TrackState::Removed;
                self.record(frame_index, id, Some(from), TrackState::Removed);
            }
        }
        self.tracks.retain(|t| t.state != TrackState::Removed);

        // new tracks from leftovers
        for d in unmatched_dets {
            let det = &frame.detections[d];
            if det.det_conf() <= self.config.s_low {
                log.discarded.push(d);
                continue;
            }
            let Ok(kalman) = self.filter.initiate(&det.bbox) else {
                log.discarded.push(d);
                continue;
            };
            let id = self.next_id;
            self.next_id += 1;
            let mut track = Track {
                id,
                state: TrackState::New,
                kalman,
                embedding: if self.config.appearance {
                    det.embedding.clone()
                } else {
                    None
                },
                consecutive_hits: 1,
                frames_since_update: 0,
                last_box: det.bbox,
                last_det_conf: det.det_conf(),
            };
            self.record(frame_index, id, None, TrackState::New);
            if track.consecutive_hits >= self.config.t_max_confirm {
                track.state = TrackState::Tracked;
                self.record(frame_index, id, Some(TrackState::New), TrackState::Tracked);
            }
            self.tracks.push(track);
            log.spawned.push((d, id));
        }
        log.discarded.sort_unstable();

        objects.sort_by_key(|o| o.id);
        self.last_frame = Some(frame_index);
        Ok(FrameOutput {
            frame_index,
            objects,
            log,
        })
    }
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}
