//! Detection-to-track similarity matrices.
//!
//! Every matrix is "higher is better" with entries in `[0, 1]`:
//!
//! * motion: `IoU(d_i, t_j) * loc_conf_i`
//! * appearance: `max(0, cos(e_i, e_j)) * det_conf_i`
//! * fused: `alpha * motion + (1 - alpha) * appearance`

use std::borrow::Borrow;

use nalgebra::DMatrix;

use crate::detection::{Detection, Embedding};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

/// Which detection confidence scales IoU in the motion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceFusion {
    #[default]
    Localization,
    Classification,
    Detection,
    /// Raw IoU.
    None,
}

impl ConfidenceFusion {
    pub fn weight(self, d: &Detection) -> f64 {
        match self {
            ConfidenceFusion::Localization => d.loc_conf,
            ConfidenceFusion::Classification => d.cls_conf,
            ConfidenceFusion::Detection => d.det_conf(),
            ConfidenceFusion::None => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: DMatrix<f64>,
    /// Row `i` corresponds to caller detection `det_index[i]`.
    pub det_index: Vec<usize>,
    /// Column `j` corresponds to caller track `track_index[j]`.
    pub track_index: Vec<usize>,
}

impl SimilarityMatrix {
    /// Wraps raw values with identity index maps.
    pub fn from_values(values: DMatrix<f64>) -> Self {
        let det_index = (0..values.nrows()).collect();
        let track_index = (0..values.ncols()).collect();
        SimilarityMatrix {
            values,
            det_index,
            track_index,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        Self::from_values(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn with_index_maps(mut self, det_index: Vec<usize>, track_index: Vec<usize>) -> Self {
        assert_eq!(det_index.len(), self.values.nrows());
        assert_eq!(track_index.len(), self.values.ncols());
        self.det_index = det_index;
        self.track_index = track_index;
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn get(&self, det: usize, track: usize) -> f64 {
        self.values[(det, track)]
    }
}

/// `max(0, a . b)` for unit vectors.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    Ok(a.dot(b)?.clamp(0.0, 1.0))
}

pub fn motion_similarity<D: Borrow<Detection>>(
    dets: &[D],
    track_boxes: &[BBox],
    fusion: ConfidenceFusion,
) -> SimilarityMatrix {
    let values = DMatrix::from_fn(dets.len(), track_boxes.len(), |i, j| {
        let d = dets[i].borrow();
        iou(&d.bbox, &track_boxes[j]) * fusion.weight(d)
    });
    SimilarityMatrix::from_values(values)
}

/// IoU scaled by each detection's localization confidence.
pub fn cost_c1<D: Borrow<Detection>>(dets: &[D], track_boxes: &[BBox]) -> SimilarityMatrix {
    motion_similarity(dets, track_boxes, ConfidenceFusion::Localization)
}

/// Clamped cosine similarity scaled by each detection's combined confidence.
pub fn cost_c3<D: Borrow<Detection>, E: Borrow<Embedding>>(
    dets: &[D],
    track_embeddings: &[Option<E>],
) -> Result<SimilarityMatrix> {
    let mut values = DMatrix::zeros(dets.len(), track_embeddings.len());
    for (i, d) in dets.iter().enumerate() {
        let d = d.borrow();
        let de = d.embedding.as_ref().ok_or(Error::MissingEmbedding {
            side: "detection",
            index: i,
        })?;
        let conf = d.det_conf();
        for (j, te) in track_embeddings.iter().enumerate() {
            let te = te.as_ref().ok_or(Error::MissingEmbedding {
                side: "track",
                index: j,
            })?;
            values[(i, j)] = cosine_similarity(de, te.borrow())? * conf;
        }
    }
    Ok(SimilarityMatrix::from_values(values))
}

/// Entry-wise `alpha * c1 + (1 - alpha) * c3`. The endpoints return the
/// corresponding input unchanged.
pub fn cost_c4(
    c1: &SimilarityMatrix,
    c3: &SimilarityMatrix,
    alpha: f64,
) -> Result<SimilarityMatrix> {
    if c1.shape() != c3.shape() || c1.det_index != c3.det_index || c1.track_index != c3.track_index
    {
        return Err(Error::ShapeMismatch {
            left: c1.shape(),
            right: c3.shape(),
        });
    }
    if alpha == 1.0 {
        return Ok(c1.clone());
    }
    if alpha == 0.0 {
        return Ok(c3.clone());
    }
    let values = c1
        .values
        .zip_map(&c3.values, |a, b| alpha * a + (1.0 - alpha) * b);
    Ok(SimilarityMatrix {
        values,
        det_index: c1.det_index.clone(),
        track_index: c1.track_index.clone(),
    })
}
