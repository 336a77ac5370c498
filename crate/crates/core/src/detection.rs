//! Detector outputs and the confidence quadrants that route them through
//! the association cascade.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::BBox;

const UNIT_TOLERANCE: f64 = 1e-6;

/// Unit-length appearance feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `raw` to unit length. Zero and non-finite vectors are
    /// rejected; vectors already unit within 1e-12 are kept bit for bit.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() || raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::ZeroEmbedding);
        }
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroEmbedding);
        }
        if (norm - 1.0).abs() <= 1e-12 {
            return Ok(Embedding(raw));
        }
        Ok(Embedding(raw.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    /// Classification confidence.
    pub cls_conf: f64,
    /// Localization confidence.
    pub loc_conf: f64,
    pub embedding: Option<Embedding>,
}

impl Detection {
    pub fn new(bbox: BBox, cls_conf: f64, loc_conf: f64) -> Result<Self> {
        let d = Detection {
            bbox,
            cls_conf,
            loc_conf,
            embedding: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bbox.is_valid() {
            return Err(Error::InvalidBox(format!("{:?}", self.bbox)));
        }
        for (name, v) in [("cls_conf", self.cls_conf), ("loc_conf", self.loc_conf)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidDetection(format!(
                    "{name} {v} outside [0, 1]"
                )));
            }
        }
        if let Some(e) = &self.embedding {
            if (e.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidDetection(
                    "embedding is not unit length".into(),
                ));
            }
        }
        Ok(())
    }

    /// Combined detection confidence, `cls_conf * loc_conf`.
    pub fn det_conf(&self) -> f64 {
        det_conf(self)
    }
}

pub fn det_conf(d: &Detection) -> f64 {
    d.cls_conf * d.loc_conf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConfidenceQuadrant {
    HighLocHighCls,
    HighLocLowCls,
    LowLocHighCls,
    LowLocLowCls,
}

impl ConfidenceQuadrant {
    pub const ALL: [ConfidenceQuadrant; 4] = [
        ConfidenceQuadrant::HighLocHighCls,
        ConfidenceQuadrant::HighLocLowCls,
        ConfidenceQuadrant::LowLocHighCls,
        ConfidenceQuadrant::LowLocLowCls,
    ];

    /// Cascade level (1-based) at which detections of this quadrant enter.
    pub fn level(self) -> usize {
        match self {
            ConfidenceQuadrant::HighLocHighCls => 1,
            ConfidenceQuadrant::HighLocLowCls => 2,
            ConfidenceQuadrant::LowLocHighCls => 3,
            ConfidenceQuadrant::LowLocLowCls => 4,
        }
    }

    pub fn high_loc(self) -> bool {
        matches!(
            self,
            ConfidenceQuadrant::HighLocHighCls | ConfidenceQuadrant::HighLocLowCls
        )
    }

    pub fn high_cls(self) -> bool {
        matches!(
            self,
            ConfidenceQuadrant::HighLocHighCls | ConfidenceQuadrant::LowLocHighCls
        )
    }
}

impl fmt::Display for ConfidenceQuadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConfidenceQuadrant::HighLocHighCls => "HH",
            ConfidenceQuadrant::HighLocLowCls => "HL",
            ConfidenceQuadrant::LowLocHighCls => "LH",
            ConfidenceQuadrant::LowLocLowCls => "LL",
        };
        f.write_str(s)
    }
}

/// A threshold counts as "high" when the confidence is at or above it.
pub fn classify(d: &Detection, theta_loc: f64, theta_cls: f64) -> ConfidenceQuadrant {
    match (d.loc_conf >= theta_loc, d.cls_conf >= theta_cls) {
        (true, true) => ConfidenceQuadrant::HighLocHighCls,
        (true, false) => ConfidenceQuadrant::HighLocLowCls,
        (false, true) => ConfidenceQuadrant::LowLocHighCls,
        (false, false) => ConfidenceQuadrant::LowLocLowCls,
    }
}

/// One frame of detector output, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameInput {
    pub frame_index: u32,
    pub detections: Vec<Detection>,
}

impl FrameInput {
    pub fn new(frame_index: u32, detections: Vec<Detection>) -> Self {
        FrameInput {
            frame_index,
            detections,
        }
    }
}
