//! Multi-object tracking by detection with a confidence-guided, four-level
//! association cascade.
//!
//! Detections carry separate classification and localization confidences.
//! The pair routes each detection to the association level whose similarity
//! suits it: motion for well-localized boxes, appearance for clearly visible
//! but poorly localized ones, and a blend of both for the rest.
//!
//! Besides the tracker this crate holds the evaluation metrics (CLEAR MOT and
//! IDF1), a deterministic synthetic scenario generator, the text file formats
//! and an ablation harness.

pub mod ablation;
pub mod assignment;
pub mod cascade;
pub mod config;
pub mod costs;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod synth;

pub use assignment::{solve, AssignmentResult, GateMode, Match};
pub use cascade::{
    ema_update, AssociationLog, FrameOutput, LevelMatch, Track, TrackState, TrackedObject, Tracker,
    Transition,
};
pub use config::{LevelCost, TrackerConfig};
pub use costs::{cosine_similarity, cost_c1, cost_c3, cost_c4, ConfidenceFusion, SimilarityMatrix};
pub use detection::{classify, det_conf, ConfidenceQuadrant, Detection, Embedding, FrameInput};
pub use error::{Error, Result};
pub use geometry::{iou, BBox};

pub use metrics::{
    evaluate, EvalOptions, EvalReport, GroundTruth, GtObject, ResultBox, TrackResults,
};
pub use motion::{state_to_box, KalmanFilter, KalmanNoise, KalmanState};
