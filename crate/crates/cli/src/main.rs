//! `loctrack` command line: run, eval, synth, ablate, render.
//!
//! Exit status is 0 on success, 1 for invalid input, 2 for internal or I/O
//! failures.

mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use loctrack::ablation::{run_suite, Suite, DEFAULT_SEED};
use loctrack::io::{
    attach_embeddings, parse_detections, parse_embeddings, parse_ground_truth,
    parse_legacy_detections, parse_results, read_text, write_text,
};
use loctrack::metrics::evaluate_sequence;
use loctrack::pipeline::run;
use loctrack::synth::{clean_spec, crossing_spec, generate, mixed_spec, quadrant_fixture_spec};
use loctrack::{EvalOptions, TrackerConfig};
use log::{debug, info};

#[derive(Parser)]
#[command(
    name = "loctrack",
    version,
    about = "Confidence-guided multi-object tracker"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a detection file and write MOT results.
    Run {
        #[arg(long)]
        detections: PathBuf,
        /// Embedding sidecar, one line per detection line.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// `key = value` config file; absent keys keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key, e.g. `--set appearance=off`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Read MOT `frame,id,l,t,w,h,conf,...` detections instead.
        #[arg(long)]
        legacy: bool,
        #[arg(long)]
        output: PathBuf,
        /// Run log with the config echo and per-frame match counts.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a result file against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou_threshold: f64,
        #[arg(long, default_value_t = 0.0)]
        min_visibility: f64,
        /// Where to write the `key = value` report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic scenario as det.txt, emb.txt and gt.txt.
    Synth {
        #[arg(long, value_enum)]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        frames: Option<u32>,
        /// Skip the embedding sidecar.
        #[arg(long)]
        no_embeddings: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an ablation suite and write its comparison table.
    Ablate {
        /// cost-matrix, fusion or levels
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw result boxes (and optionally ground truth) into PPM frames.
    Render {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        width: u32,
        #[arg(long)]
        height: u32,
        /// Render at least this many frames.
        #[arg(long, default_value_t = 0)]
        frames: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Clean,
    Crossing,
    Mixed,
    Quadrant,
}

enum Failure {
    Invalid(String),
    Internal(String),
}

impl From<loctrack::Error> for Failure {
    fn from(e: loctrack::Error) -> Self {
        use loctrack::Error::*;
        match e {
            Io { .. } | DimensionMismatch { .. } | ShapeMismatch { .. } => {
                Failure::Internal(e.to_string())
            }
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Internal(format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<TrackerConfig, Failure> {
    let mut config = match path {
        Some(p) => TrackerConfig::parse(&read_text(p)?)?,
        None => TrackerConfig::default(),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Failure::Invalid(format!("--set expects KEY=VALUE, got {o:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            detections,
            embeddings,
            config,
            overrides,
            legacy,
            output,
            log,
        } => {
            let config = load_config(config.as_deref(), &overrides)?;
            let text = read_text(&detections)?;
            let mut records = if legacy {
                parse_legacy_detections(&text)?
            } else {
                parse_detections(&text)?
            };
            if let Some(path) = embeddings {
                let embs = parse_embeddings(&read_text(&path)?, records.len())?;
                attach_embeddings(&mut records, embs)?;
            }
            info!("{} detections from {}", records.len(), detections.display());
            let out = run(records, &config)?;
            for line in out.log.lines().filter(|l| !l.starts_with('#')) {
                debug!("{line}");
            }
            write_text(&output, &out.result_text())?;
            if let Some(path) = log {
                write_text(&path, &out.log)?;
            }
            info!(
                "{} result rows written to {}",
                out.results.len(),
                output.display()
            );
        }
        Command::Eval {
            gt,
            results,
            iou_threshold,
            min_visibility,
            report,
        } => {
            if !(0.0..=1.0).contains(&iou_threshold) || !(0.0..=1.0).contains(&min_visibility) {
                return Err(Failure::Invalid("thresholds must lie in [0, 1]".into()));
            }
            let gt_data = parse_ground_truth(&read_text(&gt)?)?;
            let res = parse_results(&read_text(&results)?)?;
            let opts = EvalOptions {
                iou_threshold,
                min_visibility,
            };
            let name = gt.file_stem().map_or_else(
                || "sequence".to_string(),
                |s| s.to_string_lossy().into_owned(),
            );
            let text = evaluate_sequence(&name, &gt_data, &res, &opts)?.to_kv_string();
            print!("{text}");
            if let Some(path) = report {
                write_text(&path, &text)?;
            }
        }
        Command::Synth {
            scenario,
            seed,
            frames,
            no_embeddings,
            out,
        } => {
            let mut spec = match scenario {
                Scenario::Clean => clean_spec(seed),
                Scenario::Crossing => crossing_spec(seed),
                Scenario::Mixed => mixed_spec(seed),
                Scenario::Quadrant => quadrant_fixture_spec(),
            };
            if let Some(n) = frames {
                spec.n_frames = n;
            }
            if no_embeddings {
                spec.embedding_dim = 0;
            }
            let s = generate(&spec)?;
            std::fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;
            write_text(&out.join("det.txt"), &s.detection_text())?;
            write_text(&out.join("gt.txt"), &s.ground_truth_text())?;
            if let Some(text) = s.embedding_text() {
                write_text(&out.join("emb.txt"), &text)?;
            }
            info!("{} frames written to {}", s.frames.len(), out.display());
        }
        Command::Ablate { suite, seed, out } => {
            let suite: Suite = suite.parse()?;
            let table = run_suite(suite, seed)?;
            let text = table.to_text();
            std::fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;
            write_text(&out.join(format!("{suite}.txt")), &text)?;
            print!("{text}");
        }
        Command::Render {
            results,
            gt,
            out,
            width,
            height,
            frames,
        } => {
            let res = parse_results(&read_text(&results)?)?;
            let gt_data = match gt {
                Some(p) => Some(parse_ground_truth(&read_text(&p)?)?),
                None => None,
            };
            let last = res
                .frames()
                .keys()
                .chain(gt_data.iter().flat_map(|g| g.frames().keys()))
                .copied()
                .max()
                .unwrap_or(0)
                .max(frames);
            let paths = render::render_all(&out, width, height, last, &res, gt_data.as_ref())
                .map_err(|e| {
                    if e.starts_with("image size") {
                        Failure::Invalid(e)
                    } else {
                        Failure::Internal(e)
                    }
                })?;
            info!("{} frames rendered to {}", paths.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(2)
        }
    }
}
