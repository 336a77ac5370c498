//! End-to-end run: detection records in, MOT results and a run log out.

use std::fmt::Write as _;

use crate::cascade::{FrameOutput, Tracker};
use crate::config::TrackerConfig;
use crate::detection::FrameInput;
use crate::error::{Error, Result};
use crate::io::{write_results, DetectionRecord};
use crate::metrics::TrackResults;
use crate::synth::Scenario;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub outputs: Vec<FrameOutput>,
    pub results: TrackResults,
    /// Config echo as `# key = value` lines, then one line per frame with
    /// per-level match counts.
    pub log: String,
}

impl RunOutput {
    pub fn result_text(&self) -> String {
        write_results(&self.results)
    }
}

/// Groups records into frames `1..=last`, with empty frames for gaps.
pub fn frames_from_records(records: Vec<DetectionRecord>) -> Result<Vec<FrameInput>> {
    let last = records.iter().map(|r| r.frame).max().unwrap_or(0);
    let mut frames: Vec<FrameInput> = (1..=last).map(|f| FrameInput::new(f, Vec::new())).collect();
    let mut previous = 0;
    for r in records {
        if r.frame < previous {
            return Err(Error::NonMonotoneFrame {
                previous,
                got: r.frame,
            });
        }
        previous = r.frame;
        frames[r.frame as usize - 1].detections.push(r.detection);
    }
    Ok(frames)
}

/// Embeddings must be present on every record iff appearance is on.
pub fn check_appearance(records: &[DetectionRecord], config: &TrackerConfig) -> Result<()> {
    let with = records
        .iter()
        .filter(|r| r.detection.embedding.is_some())
        .count();
    if config.appearance && with < records.len() {
        return Err(Error::AppearanceMismatch {
            mode: "on",
            given: if with == 0 { "absent" } else { "incomplete" },
        });
    }
    if !config.appearance && with > 0 {
        return Err(Error::AppearanceMismatch {
            mode: "off",
            given: "supplied",
        });
    }
    Ok(())
}

pub fn run(records: Vec<DetectionRecord>, config: &TrackerConfig) -> Result<RunOutput> {
    check_appearance(&records, config)?;
    run_frames(&frames_from_records(records)?, config)
}

/// Runs a synthetic scenario, dropping its embeddings when appearance is off.
pub fn run_scenario(scenario: &Scenario, config: &TrackerConfig) -> Result<RunOutput> {
    if config.appearance {
        return run_frames(&scenario.frames, config);
    }
    let frames: Vec<FrameInput> = scenario
        .frames
        .iter()
        .map(|f| {
            let mut f = f.clone();
            for d in &mut f.detections {
                d.embedding = None;
            }
            f
        })
        .collect();
    run_frames(&frames, config)
}

pub fn run_frames(frames: &[FrameInput], config: &TrackerConfig) -> Result<RunOutput> {
    let mut tracker = Tracker::new(config.clone())?;
    let mut log = String::new();
    for line in config.to_config_string().lines() {
        let _ = writeln!(log, "# {line}");
    }
    let mut outputs = Vec::with_capacity(frames.len());
    for frame in frames {
        let out = tracker.step(frame)?;
        let l = &out.log;
        let _ = writeln!(
            log,
            "frame={} dets={} l1={} l2={} l3={} l4={} total={} spawned={} discarded={} output={}",
            out.frame_index,
            frame.detections.len(),
            l.matches_at(1),
            l.matches_at(2),
            l.matches_at(3),
            l.matches_at(4),
            l.matches.len(),
            l.spawned.len(),
            l.discarded.len(),
            out.objects.len()
        );
        outputs.push(out);
    }
    Ok(RunOutput {
        results: TrackResults::from_outputs(&outputs),
        outputs,
        log,
    })
}
