//! Ablation suites: one tracker variant per row, each run over the same
//! fixed set of synthetic sequences and scored with MOTA / IDF1 / IDSW.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::config::{LevelCost, TrackerConfig};
use crate::costs::ConfidenceFusion;
use crate::error::{Error, Result};
use crate::io::fmt_decimal;
use crate::metrics::{evaluate_sequence, EvalOptions, EvalReport};
use crate::pipeline::run_scenario;
use crate::synth::{crossing_spec, generate, mixed_spec, Scenario};

pub const DEFAULT_SEED: u64 = 20_240_917;
pub const SEQUENCES_PER_SUITE: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Similarity used at levels 2 and 3, on crossing objects.
    CostMatrix,
    /// Confidence that scales IoU in the motion similarity.
    Fusion,
    /// Knocking out cascade levels.
    Levels,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::CostMatrix, Suite::Fusion, Suite::Levels];

    pub fn name(self) -> &'static str {
        match self {
            Suite::CostMatrix => "cost-matrix",
            Suite::Fusion => "fusion",
            Suite::Levels => "levels",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Variant {
    pub name: &'static str,
    pub config: TrackerConfig,
}

pub fn variants(suite: Suite) -> Vec<Variant> {
    let base = TrackerConfig::default();
    let with = |name, f: &dyn Fn(&mut TrackerConfig)| {
        let mut config = base.clone();
        f(&mut config);
        Variant { name, config }
    };
    match suite {
        Suite::CostMatrix => vec![
            with("C1/C1", &|c| {
                c.level2_cost = LevelCost::Motion;
                c.level3_cost = LevelCost::Motion;
            }),
            with("C3/C3", &|c| {
                c.level2_cost = LevelCost::Appearance;
                c.level3_cost = LevelCost::Appearance;
            }),
            with("C1/C3", &|c| {
                c.level2_cost = LevelCost::Motion;
                c.level3_cost = LevelCost::Appearance;
            }),
        ],
        Suite::Fusion => vec![
            with("IoU*det", &|c| {
                c.motion_fusion = ConfidenceFusion::Detection
            }),
            with("IoU*cls", &|c| {
                c.motion_fusion = ConfidenceFusion::Classification
            }),
            with("IoU*loc", &|c| {
                c.motion_fusion = ConfidenceFusion::Localization
            }),
        ],
        Suite::Levels => vec![
            with("levels-1234", &|_| {}),
            with("no-level-2", &|c| c.levels_enabled = [false, true, true]),
            with("no-level-3", &|c| c.levels_enabled = [true, false, true]),
            with("no-level-4", &|c| c.levels_enabled = [true, true, false]),
            with("level-1-only", &|c| {
                c.levels_enabled = [false, false, false]
            }),
        ],
    }
}

/// The sequences a suite runs on; sequence `i` uses seed `seed + i`.
pub fn scenarios(suite: Suite, seed: u64) -> Result<Vec<(String, Scenario)>> {
    (0..SEQUENCES_PER_SUITE)
        .map(|i| {
            let s = seed.wrapping_add(i);
            let (name, spec) = match suite {
                Suite::CostMatrix => ("crossing", crossing_spec(s)),
                Suite::Fusion | Suite::Levels => ("mixed", mixed_spec(s)),
            };
            Ok((format!("{name}-{i:02}"), generate(&spec)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationRow {
    pub variant: &'static str,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationTable {
    pub suite: Suite,
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# suite = {} seed = {} sequences = {}",
            self.suite, self.seed, SEQUENCES_PER_SUITE
        );
        let _ = writeln!(
            out,
            "{:<14} {:>10} {:>10} {:>6}",
            "variant", "mota", "idf1", "idsw"
        );
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), fmt_decimal);
            let _ = writeln!(
                out,
                "{:<14} {:>10} {:>10} {:>6}",
                r.variant,
                opt(r.report.mota()),
                opt(r.report.idf1()),
                r.report.idsw()
            );
        }
        out
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<AblationTable> {
    let sequences = scenarios(suite, seed)?;
    let opts = EvalOptions::default();
    let mut rows = Vec::new();
    for v in variants(suite) {
        let mut report = EvalReport::default();
        for (name, scenario) in &sequences {
            let out = run_scenario(scenario, &v.config)?;
            report = report.merge(evaluate_sequence(
                name,
                &scenario.ground_truth,
                &out.results,
                &opts,
            )?);
        }
        rows.push(AblationRow {
            variant: v.name,
            report,
        });
    }
    Ok(AblationTable { suite, seed, rows })
}
