//! Tracker configuration and its flat `key = value` file form.

use std::fmt::Write as _;

use crate::assignment::GateMode;
use crate::costs::ConfidenceFusion;
use crate::error::{Error, Result};
use crate::motion::KalmanNoise;

/// Similarity used at a cascade level that supports a choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelCost {
    /// IoU scaled by a detection confidence.
    Motion,
    /// Appearance cosine scaled by the detection confidence.
    Appearance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub theta_loc: f64,
    pub theta_cls: f64,
    /// Per-level thresholds, levels 1 to 4.
    pub gates: [f64; 4],
    pub gate_mode: GateMode,
    /// Motion weight in the level-4 blend.
    pub alpha: f64,
    /// Minimum `det_conf` for an unmatched detection to start a track.
    pub s_low: f64,
    /// Consecutive matched frames (spawn frame included) before New becomes Tracked.
    pub t_max_confirm: u32,
    /// Consecutive unmatched frames after which a Lost track is removed.
    pub l_max_lost: u32,
    pub ema_momentum: f64,
    pub appearance: bool,
    /// Remove New tracks left unmatched after level 1.
    pub strict_new_removal: bool,
    pub kalman: KalmanNoise,
    pub level2_cost: LevelCost,
    pub level3_cost: LevelCost,
    pub motion_fusion: ConfidenceFusion,
    /// Whether levels 2, 3 and 4 run. Level 1 always runs.
    pub levels_enabled: [bool; 3],
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            theta_loc: 0.55,
            theta_cls: 0.75,
            gates: [0.65, 0.65, 0.5, 0.55],
            gate_mode: GateMode::MaxCost,
            alpha: 0.5,
            s_low: 0.1,
            t_max_confirm: 2,
            l_max_lost: 30,
            ema_momentum: 0.9,
            appearance: true,
            strict_new_removal: true,
            kalman: KalmanNoise::default(),
            level2_cost: LevelCost::Motion,
            level3_cost: LevelCost::Appearance,
            motion_fusion: ConfidenceFusion::Localization,
            levels_enabled: [true; 3],
        }
    }
}

const KEYS: &[&str] = &[
    "theta_loc",
    "theta_cls",
    "gate1",
    "gate2",
    "gate3",
    "gate4",
    "gate_mode",
    "alpha",
    "s_low",
    "t_max_confirm",
    "l_max_lost",
    "ema_momentum",
    "appearance",
    "strict_new_removal",
    "kalman_std_position",
    "kalman_std_velocity",
    "kalman_std_measurement",
    "kalman_std_initial_velocity",
    "level2_cost",
    "level3_cost",
    "motion_fusion",
    "level2",
    "level3",
    "level4",
];

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("theta_loc", self.theta_loc),
            ("theta_cls", self.theta_cls),
            ("gate1", self.gates[0]),
            ("gate2", self.gates[1]),
            ("gate3", self.gates[2]),
            ("gate4", self.gates[3]),
            ("alpha", self.alpha),
            ("s_low", self.s_low),
            ("ema_momentum", self.ema_momentum),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.t_max_confirm < 1 {
            return Err(Error::Config("t_max_confirm must be at least 1".into()));
        }
        if self.l_max_lost < 1 {
            return Err(Error::Config("l_max_lost must be at least 1".into()));
        }
        let k = &self.kalman;
        for (name, v) in [
            ("kalman_std_position", k.position),
            ("kalman_std_velocity", k.velocity),
            ("kalman_std_measurement", k.measurement),
            ("kalman_std_initial_velocity", k.initial_velocity),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    /// Parses a config file. Blank lines and `#` comments are skipped, absent
    /// keys keep their defaults and unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrackerConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(line_no, format!("expected `key = value`, got `{line}`"))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let real = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("{key}: `{value}` is not a number")))
        };
        let int = || -> Result<u32> {
            value.parse::<u32>().map_err(|_| {
                Error::Config(format!("{key}: `{value}` is not a non-negative integer"))
            })
        };
        let switch = || -> Result<bool> {
            match value {
                "on" | "true" => Ok(true),
                "off" | "false" => Ok(false),
                _ => Err(Error::Config(format!(
                    "{key}: expected on/off, got `{value}`"
                ))),
            }
        };
        let level_cost = || -> Result<LevelCost> {
            match value {
                "c1" | "motion" => Ok(LevelCost::Motion),
                "c3" | "appearance" => Ok(LevelCost::Appearance),
                _ => Err(Error::Config(format!(
                    "{key}: expected c1 or c3, got `{value}`"
                ))),
            }
        };
        match key {
            "theta_loc" => self.theta_loc = real()?,
            "theta_cls" => self.theta_cls = real()?,
            "gate1" => self.gates[0] = real()?,
            "gate2" => self.gates[1] = real()?,
            "gate3" => self.gates[2] = real()?,
            "gate4" => self.gates[3] = real()?,
            "gate_mode" => {
                self.gate_mode = match value {
                    "cost" => GateMode::MaxCost,
                    "similarity" => GateMode::MinSimilarity,
                    _ => {
                        return Err(Error::Config(format!(
                            "gate_mode: expected cost or similarity, got `{value}`"
                        )))
                    }
                }
            }
            "alpha" => self.alpha = real()?,
            "s_low" => self.s_low = real()?,
            "t_max_confirm" => self.t_max_confirm = int()?,
            "l_max_lost" => self.l_max_lost = int()?,
            "ema_momentum" => self.ema_momentum = real()?,
            "appearance" => self.appearance = switch()?,
            "strict_new_removal" => self.strict_new_removal = switch()?,
            "kalman_std_position" => self.kalman.position = real()?,
            "kalman_std_velocity" => self.kalman.velocity = real()?,
            "kalman_std_measurement" => self.kalman.measurement = real()?,
            "kalman_std_initial_velocity" => self.kalman.initial_velocity = real()?,
            "level2_cost" => self.level2_cost = level_cost()?,
            "level3_cost" => self.level3_cost = level_cost()?,
            "motion_fusion" => {
                self.motion_fusion = match value {
                    "loc" => ConfidenceFusion::Localization,
                    "cls" => ConfidenceFusion::Classification,
                    "det" => ConfidenceFusion::Detection,
                    "iou" => ConfidenceFusion::None,
                    _ => {
                        return Err(Error::Config(format!(
                            "motion_fusion: expected loc, cls, det or iou, got `{value}`"
                        )))
                    }
                }
            }
            "level2" => self.levels_enabled[0] = switch()?,
            "level3" => self.levels_enabled[1] = switch()?,
            "level4" => self.levels_enabled[2] = switch()?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// All keys in file form. Reals use the shortest representation that
    /// parses back to the same value.
    pub fn to_config_string(&self) -> String {
        let on = |b: bool| if b { "on" } else { "off" };
        let cost = |c: LevelCost| match c {
            LevelCost::Motion => "c1",
            LevelCost::Appearance => "c3",
        };
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("theta_loc", self.theta_loc.to_string());
        put("theta_cls", self.theta_cls.to_string());
        for (i, g) in self.gates.iter().enumerate() {
            put(&format!("gate{}", i + 1), g.to_string());
        }
        put(
            "gate_mode",
            match self.gate_mode {
                GateMode::MaxCost => "cost",
                GateMode::MinSimilarity => "similarity",
            }
            .into(),
        );
        put("alpha", self.alpha.to_string());
        put("s_low", self.s_low.to_string());
        put("t_max_confirm", self.t_max_confirm.to_string());
        put("l_max_lost", self.l_max_lost.to_string());
        put("ema_momentum", self.ema_momentum.to_string());
        put("appearance", on(self.appearance).into());
        put("strict_new_removal", on(self.strict_new_removal).into());
        put("kalman_std_position", self.kalman.position.to_string());
        put("kalman_std_velocity", self.kalman.velocity.to_string());
        put(
            "kalman_std_measurement",
            self.kalman.measurement.to_string(),
        );
        put(
            "kalman_std_initial_velocity",
            self.kalman.initial_velocity.to_string(),
        );
        put("level2_cost", cost(self.level2_cost).into());
        put("level3_cost", cost(self.level3_cost).into());
        put(
            "motion_fusion",
            match self.motion_fusion {
                ConfidenceFusion::Localization => "loc",
                ConfidenceFusion::Classification => "cls",
                ConfidenceFusion::Detection => "det",
                ConfidenceFusion::None => "iou",
            }
            .into(),
        );
        put("level2", on(self.levels_enabled[0]).into());
        put("level3", on(self.levels_enabled[1]).into());
        put("level4", on(self.levels_enabled[2]).into());
        out
    }

    pub fn keys() -> &'static [&'static str] {
        KEYS
    }
}
