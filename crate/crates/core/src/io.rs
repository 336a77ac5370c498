//! Text formats: detections, embedding sidecars, MOT result and
//! ground-truth files.
//!
//! Numbers are written with six fractional digits (round half to even on
//! exact ties, never exponent notation). Embedding components use the
//! shortest representation that parses back to the same value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::detection::{Detection, Embedding};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::metrics::{GroundTruth, GtObject, ResultBox, TrackResults};

/// Six-decimal fixed formatting with negative zero folded to zero.
pub fn fmt_decimal(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame: u32,
    pub detection: Detection,
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn fields(line_no: usize, line: &str, min: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() < min {
        return Err(Error::parse(
            line_no,
            format!("expected at least {min} fields, found {}", f.len()),
        ));
    }
    Ok(f)
}

fn num(line_no: usize, name: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(line_no, format!("{name}: not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line_no, format!("{name}: not finite")));
    }
    Ok(v)
}

fn int<T: std::str::FromStr>(line_no: usize, name: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(line_no, format!("{name}: not an integer: {s:?}")))
}

fn frame_number(line_no: usize, s: &str) -> Result<u32> {
    let f: u32 = int(line_no, "frame", s)?;
    if f == 0 {
        return Err(Error::parse(line_no, "frame numbers start at 1"));
    }
    Ok(f)
}

fn bbox(line_no: usize, f: &[&str]) -> Result<BBox> {
    let v = [
        num(line_no, "left", f[0])?,
        num(line_no, "top", f[1])?,
        num(line_no, "width", f[2])?,
        num(line_no, "height", f[3])?,
    ];
    BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::parse(line_no, e.to_string()))
}

/// `frame,left,top,width,height,cls_conf,loc_conf` per line, frames non-decreasing.
pub fn parse_detections(text: &str) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    let mut last = 0;
    for (n, line) in records(text) {
        let f = fields(n, line, 7)?;
        if f.len() != 7 {
            return Err(Error::parse(
                n,
                format!("expected 7 fields, found {}", f.len()),
            ));
        }
        let frame = frame_number(n, f[0])?;
        if frame < last {
            return Err(Error::parse(n, format!("frame {frame} after frame {last}")));
        }
        last = frame;
        let b = bbox(n, &f[1..5])?;
        let cls = num(n, "cls_conf", f[5])?;
        let loc = num(n, "loc_conf", f[6])?;
        let detection = Detection::new(b, cls, loc).map_err(|e| Error::parse(n, e.to_string()))?;
        out.push(DetectionRecord { frame, detection });
    }
    Ok(out)
}

/// MOT detection lines `frame,id,left,top,width,height,conf,...`; both
/// confidences become `sqrt(conf)` so their product restores `conf`.
pub fn parse_legacy_detections(text: &str) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    let mut last = 0;
    for (n, line) in records(text) {
        let f = fields(n, line, 7)?;
        let frame = frame_number(n, f[0])?;
        if frame < last {
            return Err(Error::parse(n, format!("frame {frame} after frame {last}")));
        }
        last = frame;
        let b = bbox(n, &f[2..6])?;
        let conf = num(n, "conf", f[6])?.clamp(0.0, 1.0);
        let c = conf.sqrt();
        let detection = Detection::new(b, c, c).map_err(|e| Error::parse(n, e.to_string()))?;
        out.push(DetectionRecord { frame, detection });
    }
    Ok(out)
}

pub fn write_detections(records: &[DetectionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let d = &r.detection;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.frame,
            fmt_decimal(d.bbox.left),
            fmt_decimal(d.bbox.top),
            fmt_decimal(d.bbox.width),
            fmt_decimal(d.bbox.height),
            fmt_decimal(d.cls_conf),
            fmt_decimal(d.loc_conf)
        );
    }
    out
}

/// One comma-separated vector per line, all of one dimension, normalized on
/// load. `expected` is the detection count the sidecar must match.
pub fn parse_embeddings(text: &str, expected: usize) -> Result<Vec<Embedding>> {
    let mut out = Vec::new();
    let mut dim = None;
    for (n, line) in records(text) {
        let raw = line
            .split(',')
            .map(|s| num(n, "component", s.trim()))
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(raw.len()),
            Some(d) if d != raw.len() => {
                return Err(Error::parse(
                    n,
                    format!("dimension {} differs from {d}", raw.len()),
                ))
            }
            _ => {}
        }
        out.push(Embedding::normalized(raw).map_err(|e| Error::parse(n, e.to_string()))?);
    }
    if out.len() != expected {
        return Err(Error::EmbeddingCount {
            detections: expected,
            embeddings: out.len(),
        });
    }
    Ok(out)
}

pub fn write_embeddings<'a>(embeddings: impl IntoIterator<Item = &'a Embedding>) -> String {
    let mut out = String::new();
    for e in embeddings {
        let line: Vec<String> = e.as_slice().iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Pairs each detection with the sidecar line of the same index.
pub fn attach_embeddings(
    records: &mut [DetectionRecord],
    embeddings: Vec<Embedding>,
) -> Result<()> {
    if records.len() != embeddings.len() {
        return Err(Error::EmbeddingCount {
            detections: records.len(),
            embeddings: embeddings.len(),
        });
    }
    for (r, e) in records.iter_mut().zip(embeddings) {
        r.detection.embedding = Some(e);
    }
    Ok(())
}

/// `frame,id,left,top,width,height,conf,-1,-1,-1`, ordered by frame then id.
pub fn write_results(results: &TrackResults) -> String {
    let mut out = String::new();
    for (frame, boxes) in results.frames() {
        let mut boxes: Vec<&ResultBox> = boxes.iter().collect();
        boxes.sort_by_key(|b| b.id);
        for b in boxes {
            let _ = writeln!(
                out,
                "{frame},{},{},{},{},{},{},-1,-1,-1",
                b.id,
                fmt_decimal(b.bbox.left),
                fmt_decimal(b.bbox.top),
                fmt_decimal(b.bbox.width),
                fmt_decimal(b.bbox.height),
                fmt_decimal(b.conf)
            );
        }
    }
    out
}

pub fn parse_results(text: &str) -> Result<TrackResults> {
    let mut r = TrackResults::default();
    for (n, line) in records(text) {
        let f = fields(n, line, 7)?;
        let frame = frame_number(n, f[0])?;
        let id = int(n, "id", f[1])?;
        let b = bbox(n, &f[2..6])?;
        let conf = num(n, "conf", f[6])?;
        r.push(frame, ResultBox { id, bbox: b, conf });
    }
    Ok(r)
}

/// MOT ground truth `frame,id,left,top,width,height[,flag[,class[,visibility]]]`.
/// A zero flag marks a box that is never scored.
pub fn parse_ground_truth(text: &str) -> Result<GroundTruth> {
    let mut gt = GroundTruth::new();
    for (n, line) in records(text) {
        let f = fields(n, line, 6)?;
        let frame = frame_number(n, f[0])?;
        let id = int(n, "id", f[1])?;
        let b = bbox(n, &f[2..6])?;
        let active = match f.get(6) {
            Some(s) => num(n, "flag", s)? != 0.0,
            None => true,
        };
        let visibility = match f.get(8) {
            Some(s) => num(n, "visibility", s)?,
            None => 1.0,
        };
        gt.push(
            frame,
            GtObject {
                id,
                bbox: b,
                visibility,
                active,
            },
        )
        .map_err(|e| Error::parse(n, e.to_string()))?;
    }
    Ok(gt)
}

pub fn write_ground_truth(gt: &GroundTruth) -> String {
    let mut out = String::new();
    for (frame, objects) in gt.frames() {
        let mut objects: Vec<&GtObject> = objects.iter().collect();
        objects.sort_by_key(|o| o.id);
        for o in objects {
            let _ = writeln!(
                out,
                "{frame},{},{},{},{},{},{},1,{}",
                o.id,
                fmt_decimal(o.bbox.left),
                fmt_decimal(o.bbox.top),
                fmt_decimal(o.bbox.width),
                fmt_decimal(o.bbox.height),
                u8::from(o.active),
                fmt_decimal(o.visibility)
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimal_formatting() {
        assert_eq!(fmt_decimal(0.0), "0.000000");
        assert_eq!(fmt_decimal(-0.0), "0.000000");
        assert_eq!(fmt_decimal(-1e-9), "0.000000");
        assert_eq!(fmt_decimal(1234.5), "1234.500000");
        assert_eq!(fmt_decimal(1e20), "100000000000000000000.000000");
        // exact binary ties round to even
        assert_eq!(fmt_decimal(1.0 / 128.0), "0.007812");
        assert_eq!(fmt_decimal(3.0 / 128.0), "0.023438");
        assert_eq!(fmt_decimal(-1.0 / 128.0), "-0.007812");
    }

    #[test]
    fn detection_line() {
        let recs =
            parse_detections("# header\n1,10,20,30,40,0.9,0.8\n\n2, 1.5,2,3,4,0.1,0.2\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].frame, 2);
        assert_eq!(recs[1].detection.bbox.left, 1.5);
        assert_eq!(recs[0].detection.loc_conf, 0.8);
        assert_eq!(
            write_detections(&recs[..1]),
            "1,10.000000,20.000000,30.000000,40.000000,0.900000,0.800000\n"
        );
    }

    #[test]
    fn detection_errors_carry_line_numbers() {
        let cases = [
            "1,0,0,1,1,0.5,0.5\n1,0,0,1,1,1.5,0.5\n",
            "1,0,0,1,1,0.5,0.5\nx,0,0,1,1,0.5,0.5\n",
            "1,0,0,1,1,0.5,0.5\n1,0,0,-1,1,0.5,0.5\n",
            "1,0,0,1,1,0.5,0.5\n1,0,0,1,1,0.5\n",
            "2,0,0,1,1,0.5,0.5\n1,0,0,1,1,0.5,0.5\n",
            "1,0,0,1,1,0.5,0.5\n0,0,0,1,1,0.5,0.5\n",
            "1,0,0,1,1,0.5,0.5\n1,0,0,1,1,0.5,NaN\n",
        ];
        for text in cases {
            match parse_detections(text) {
                Err(Error::Parse { line: 2, .. }) => {}
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn legacy_converter_splits_confidence() {
        let recs = parse_legacy_detections("1,-1,0,0,10,10,0.64,-1,-1,-1\n").unwrap();
        let d = &recs[0].detection;
        assert_eq!((d.cls_conf, d.loc_conf), (0.8, 0.8));
        assert!((d.det_conf() - 0.64).abs() < 1e-15);
    }

    #[test]
    fn embedding_count_mismatch_names_both() {
        let err = parse_embeddings("1,0\n0,1\n", 3).unwrap_err();
        assert!(matches!(
            err,
            Error::EmbeddingCount {
                detections: 3,
                embeddings: 2
            }
        ));
        let msg = err.to_string();
        assert!(msg.contains('3') && msg.contains('2'), "{msg}");
    }

    #[test]
    fn embeddings_normalized_on_load() {
        let e = parse_embeddings("3,4\n", 1).unwrap();
        assert_eq!(e[0].as_slice(), &[0.6, 0.8]);
        assert!(matches!(
            parse_embeddings("0,0\n", 1),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_embeddings("1,0\n1,0,0\n", 2),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn result_lines_sorted_by_frame_then_id() {
        let mut r = TrackResults::default();
        let b = BBox::new(1.0, 2.0, 3.0, 4.0).unwrap();
        r.push(
            2,
            ResultBox {
                id: 1,
                bbox: b,
                conf: 0.5,
            },
        );
        r.push(
            1,
            ResultBox {
                id: 9,
                bbox: b,
                conf: 0.5,
            },
        );
        r.push(
            1,
            ResultBox {
                id: 3,
                bbox: b,
                conf: 0.25,
            },
        );
        let text = write_results(&r);
        assert_eq!(
            text,
            "1,3,1.000000,2.000000,3.000000,4.000000,0.250000,-1,-1,-1\n\
             1,9,1.000000,2.000000,3.000000,4.000000,0.500000,-1,-1,-1\n\
             2,1,1.000000,2.000000,3.000000,4.000000,0.500000,-1,-1,-1\n"
        );
        assert_eq!(write_results(&parse_results(&text).unwrap()), text);
    }

    #[test]
    fn ground_truth_flags_and_visibility() {
        let gt = parse_ground_truth("1,1,0,0,10,10,1,1,0.25\n1,2,0,0,10,10,0,7,1\n2,1,5,5,10,10\n")
            .unwrap();
        let f1 = gt.frame(1);
        assert_eq!(f1[0].visibility, 0.25);
        assert!(f1[0].active && !f1[1].active);
        assert_eq!(gt.frame(2)[0].visibility, 1.0);
        assert!(parse_ground_truth("1,1,0,0,1,1\n1,1,0,0,1,1\n").is_err());
        assert_eq!(parse_ground_truth(&write_ground_truth(&gt)).unwrap(), gt);
    }

    fn grid() -> impl Strategy<Value = f64> {
        (-5_000_000_000i64..5_000_000_000).prop_map(|k| k as f64 / 1e6)
    }

    fn grid_pos() -> impl Strategy<Value = f64> {
        (0i64..5_000_000_000).prop_map(|k| k as f64 / 1e6)
    }

    fn grid_unit() -> impl Strategy<Value = f64> {
        (0i64..=1_000_000).prop_map(|k| k as f64 / 1e6)
    }

    fn arb_record() -> impl Strategy<Value = DetectionRecord> {
        (
            1u32..5,
            grid(),
            grid(),
            grid_pos(),
            grid_pos(),
            grid_unit(),
            grid_unit(),
        )
            .prop_map(|(frame, l, t, w, h, c, lc)| DetectionRecord {
                frame,
                detection: Detection::new(BBox::new(l, t, w, h).unwrap(), c, lc).unwrap(),
            })
    }

    proptest! {
        #[test]
        fn detections_round_trip(mut recs in prop::collection::vec(arb_record(), 0..20)) {
            recs.sort_by_key(|r| r.frame);
            let text = write_detections(&recs);
            prop_assert_eq!(parse_detections(&text).unwrap(), recs);
        }

        #[test]
        fn embeddings_round_trip(raw in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 8), 1..10)) {
            let embs: Vec<Embedding> = raw.into_iter().filter_map(|r| Embedding::normalized(r).ok()).collect();
            let text = write_embeddings(&embs);
            prop_assert_eq!(parse_embeddings(&text, embs.len()).unwrap(), embs);
        }

        #[test]
        fn results_round_trip(rows in prop::collection::vec((1u32..6, 1u64..50, grid(), grid(), grid_pos(), grid_pos(), grid_unit()), 0..30)) {
            let mut r = TrackResults::default();
            let mut seen = std::collections::HashSet::new();
            for (f, id, l, t, w, h, c) in rows {
                if seen.insert((f, id)) {
                    r.push(f, ResultBox { id, bbox: BBox::new(l, t, w, h).unwrap(), conf: c });
                }
            }
            let text = write_results(&r);
            let back = parse_results(&text).unwrap();
            prop_assert_eq!(write_results(&back), text);
            for (f, boxes) in r.frames() {
                let mut a = boxes.clone();
                a.sort_by_key(|b| b.id);
                prop_assert_eq!(back.frame(*f), a.as_slice());
            }
        }
    }
}
