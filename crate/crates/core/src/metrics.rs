//! CLEAR MOT accuracy and identity (IDF1) scores of tracker output against
//! ground truth.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::assignment::optimal_assignment;
use crate::cascade::FrameOutput;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::io::fmt_decimal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtObject {
    pub id: u64,
    pub bbox: BBox,
    /// Fraction of the object visible, in `[0, 1]`.
    pub visibility: f64,
    /// MOT-Challenge "consider" flag; inactive boxes are never scored.
    pub active: bool,
}

impl GtObject {
    pub fn new(id: u64, bbox: BBox) -> Self {
        GtObject {
            id,
            bbox,
            visibility: 1.0,
            active: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    frames: BTreeMap<u32, Vec<GtObject>>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an object, rejecting a duplicate id within the frame.
    pub fn push(&mut self, frame: u32, object: GtObject) -> Result<()> {
        let objects = self.frames.entry(frame).or_default();
        if objects.iter().any(|o| o.id == object.id) {
            return Err(Error::InvalidDetection(format!(
                "duplicate ground-truth id {} in frame {frame}",
                object.id
            )));
        }
        objects.push(object);
        Ok(())
    }

    /// Registers a frame that has no objects, so it counts toward the range.
    pub fn touch_frame(&mut self, frame: u32) {
        self.frames.entry(frame).or_default();
    }

    pub fn frames(&self) -> &BTreeMap<u32, Vec<GtObject>> {
        &self.frames
    }

    pub fn frame(&self, frame: u32) -> &[GtObject] {
        self.frames.get(&frame).map_or(&[], Vec::as_slice)
    }

    pub fn frame_range(&self) -> Option<(u32, u32)> {
        Some((
            *self.frames.keys().next()?,
            *self.frames.keys().next_back()?,
        ))
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ground truth as if a perfect tracker had produced it.
    pub fn as_results(&self) -> TrackResults {
        let mut r = TrackResults::default();
        for (&f, objs) in &self.frames {
            for o in objs {
                r.push(
                    f,
                    ResultBox {
                        id: o.id,
                        bbox: o.bbox,
                        conf: 1.0,
                    },
                );
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultBox {
    pub id: u64,
    pub bbox: BBox,
    pub conf: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackResults {
    frames: BTreeMap<u32, Vec<ResultBox>>,
}

impl TrackResults {
    pub fn push(&mut self, frame: u32, b: ResultBox) {
        self.frames.entry(frame).or_default().push(b);
    }

    pub fn from_outputs(outputs: &[FrameOutput]) -> Self {
        let mut r = TrackResults::default();
        for out in outputs {
            for o in &out.objects {
                r.push(
                    out.frame_index,
                    ResultBox {
                        id: o.id,
                        bbox: o.bbox,
                        conf: o.det_conf,
                    },
                );
            }
        }
        r
    }

    pub fn frames(&self) -> &BTreeMap<u32, Vec<ResultBox>> {
        &self.frames
    }

    pub fn frame(&self, frame: u32) -> &[ResultBox] {
        self.frames.get(&frame).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every row with a track id replaced through `f`.
    pub fn map_ids(&self, f: impl Fn(u64) -> u64) -> Self {
        let mut r = self.clone();
        for boxes in r.frames.values_mut() {
            for b in boxes {
                b.id = f(b.id);
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub iou_threshold: f64,
    /// Ground-truth boxes below this visibility are neither missed nor matched.
    pub min_visibility: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            iou_threshold: 0.5,
            min_visibility: 0.0,
        }
    }
}

/// Additive event counts; merging sequences sums them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub frames: u64,
    pub gt_count: u64,
    pub pred_count: u64,
    pub matches: u64,
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

impl Counts {
    pub fn add(&mut self, o: &Counts) {
        self.frames += o.frames;
        self.gt_count += o.gt_count;
        self.pred_count += o.pred_count;
        self.matches += o.matches;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.idsw += o.idsw;
        self.idtp += o.idtp;
        self.idfp += o.idfp;
        self.idfn += o.idfn;
    }

    /// `1 - (fn + fp + idsw) / gt_count`; undefined without ground truth.
    pub fn mota(&self) -> Option<f64> {
        (self.gt_count > 0)
            .then(|| 1.0 - (self.fn_ + self.fp + self.idsw) as f64 / self.gt_count as f64)
    }

    pub fn idf1(&self) -> Option<f64> {
        let denom = self.gt_count + self.pred_count;
        (denom > 0).then(|| 2.0 * self.idtp as f64 / denom as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceReport {
    pub name: String,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvalReport {
    pub sequences: Vec<SequenceReport>,
}

impl EvalReport {
    pub fn totals(&self) -> Counts {
        let mut c = Counts::default();
        for s in &self.sequences {
            c.add(&s.counts);
        }
        c
    }

    pub fn mota(&self) -> Option<f64> {
        self.totals().mota()
    }

    pub fn idf1(&self) -> Option<f64> {
        self.totals().idf1()
    }

    pub fn idsw(&self) -> u64 {
        self.totals().idsw
    }

    pub fn merge(mut self, other: EvalReport) -> EvalReport {
        self.sequences.extend(other.sequences);
        self
    }

    /// Flat `key = value` text: totals first, then `<sequence>.<key>` lines.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        write_counts(&mut out, "", &self.totals());
        for s in &self.sequences {
            write_counts(&mut out, &format!("{}.", s.name), &s.counts);
        }
        out
    }
}

fn write_counts(out: &mut String, prefix: &str, c: &Counts) {
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), fmt_decimal);
    let _ = writeln!(out, "{prefix}mota = {}", opt(c.mota()));
    let _ = writeln!(out, "{prefix}idf1 = {}", opt(c.idf1()));
    for (k, v) in [
        ("idsw", c.idsw),
        ("fp", c.fp),
        ("fn", c.fn_),
        ("gt_count", c.gt_count),
        ("pred_count", c.pred_count),
        ("matches", c.matches),
        ("idtp", c.idtp),
        ("idfp", c.idfp),
        ("idfn", c.idfn),
        ("frames", c.frames),
    ] {
        let _ = writeln!(out, "{prefix}{k} = {v}");
    }
}

pub fn evaluate(
    gt: &GroundTruth,
    results: &TrackResults,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    evaluate_sequence("sequence", gt, results, opts)
}

/// Per-frame CLEAR matching with continuity: a ground-truth object keeps its
/// last matched track while their IoU stays above threshold; the rest are
/// matched by maximum cardinality, then maximum total IoU. IDF1 uses one
/// global ground-truth-id to track-id matching over per-frame overlaps.
pub fn evaluate_sequence(
    name: &str,
    gt: &GroundTruth,
    results: &TrackResults,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if let Some((first, last)) = gt.frame_range() {
        for &frame in results.frames.keys() {
            if frame < first || frame > last {
                return Err(Error::FrameRange { frame, first, last });
            }
        }
    }

    let frames: BTreeSet<u32> = gt
        .frames
        .keys()
        .chain(results.frames.keys())
        .copied()
        .collect();
    let mut c = Counts {
        frames: frames.len() as u64,
        ..Counts::default()
    };
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    let mut overlap: HashMap<(u64, u64), u64> = HashMap::new();

    for &frame in &frames {
        let gts = gt.frame(frame);
        let preds = results.frame(frame);
        let counted = |o: &GtObject| o.active && o.visibility >= opts.min_visibility;
        let ious = DMatrix::from_fn(gts.len(), preds.len(), |i, j| {
            iou(&gts[i].bbox, &preds[j].bbox)
        });
        let valid = |i: usize, j: usize| ious[(i, j)] >= opts.iou_threshold && ious[(i, j)] > 0.0;

        let mut gt_to_pred: Vec<Option<usize>> = vec![None; gts.len()];
        let mut pred_taken = vec![false; preds.len()];
        for (i, g) in gts.iter().enumerate() {
            if let Some(&h) = last_match.get(&g.id) {
                if let Some(j) = preds.iter().position(|p| p.id == h) {
                    if !pred_taken[j] && valid(i, j) {
                        gt_to_pred[i] = Some(j);
                        pred_taken[j] = true;
                    }
                }
            }
        }

        let free_g: Vec<usize> = (0..gts.len())
            .filter(|&i| gt_to_pred[i].is_none())
            .collect();
        let free_p: Vec<usize> = (0..preds.len()).filter(|&j| !pred_taken[j]).collect();
        if !free_g.is_empty() && !free_p.is_empty() {
            let bonus = (free_g.len().min(free_p.len()) + 1) as f64;
            let w = DMatrix::from_fn(free_g.len(), free_p.len(), |a, b| {
                let (i, j) = (free_g[a], free_p[b]);
                if valid(i, j) {
                    bonus + ious[(i, j)]
                } else {
                    0.0
                }
            });
            for (a, b) in optimal_assignment(&w) {
                let (i, j) = (free_g[a], free_p[b]);
                if valid(i, j) {
                    gt_to_pred[i] = Some(j);
                    pred_taken[j] = true;
                }
            }
        }

        // predictions that cover ignored ground truth drop out entirely
        let mut pred_dropped = vec![false; preds.len()];
        for (i, g) in gts.iter().enumerate() {
            match gt_to_pred[i] {
                Some(j) if counted(g) => {
                    c.matches += 1;
                    let h = preds[j].id;
                    if let Some(prev) = last_match.insert(g.id, h) {
                        if prev != h {
                            c.idsw += 1;
                        }
                    }
                }
                Some(j) => pred_dropped[j] = true,
                None if counted(g) => c.fn_ += 1,
                None => {}
            }
        }
        c.fp += (0..preds.len()).filter(|&j| !pred_taken[j]).count() as u64;

        let counted_gts: Vec<&GtObject> = gts.iter().filter(|g| counted(g)).collect();
        c.gt_count += counted_gts.len() as u64;
        c.pred_count += pred_dropped.iter().filter(|d| !**d).count() as u64;
        for (i, g) in gts.iter().enumerate() {
            if !counted(g) {
                continue;
            }
            for (j, p) in preds.iter().enumerate() {
                if !pred_dropped[j] && valid(i, j) {
                    *overlap.entry((g.id, p.id)).or_default() += 1;
                }
            }
        }
    }

    c.idtp = identity_true_positives(&overlap);
    c.idfn = c.gt_count - c.idtp;
    c.idfp = c.pred_count - c.idtp;

    Ok(EvalReport {
        sequences: vec![SequenceReport {
            name: name.to_string(),
            counts: c,
        }],
    })
}

/// Maximum total overlap of a one-to-one ground-truth-id to track-id mapping.
fn identity_true_positives(overlap: &HashMap<(u64, u64), u64>) -> u64 {
    if overlap.is_empty() {
        return 0;
    }
    let gt_ids: Vec<u64> = overlap
        .keys()
        .map(|k| k.0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let tr_ids: Vec<u64> = overlap
        .keys()
        .map(|k| k.1)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let w = DMatrix::from_fn(gt_ids.len(), tr_ids.len(), |i, j| {
        overlap.get(&(gt_ids[i], tr_ids[j])).copied().unwrap_or(0) as f64
    });
    optimal_assignment(&w)
        .into_iter()
        .map(|(i, j)| w[(i, j)] as u64)
        .sum()
}
