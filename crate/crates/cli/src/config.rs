//! Run configuration: a single TOML file with exactly the fields below.
//! Unknown keys are a hard error — a typo in a security parameter must
//! not be silently ignored.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use sdiq_core::finitesize::{BoundedDiffMode, NGuessMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Si,
    Mdi,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Si => write!(f, "si"),
            Protocol::Mdi => write!(f, "mdi"),
        }
    }
}

/// A parameter that is either fixed or searched over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Fixed(f64),
    Keyword(SettingKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SettingKeyword {
    Optimize,
}

impl Setting {
    pub fn fixed(&self) -> Option<f64> {
        match self {
            Setting::Fixed(v) => Some(*v),
            Setting::Keyword(_) => None,
        }
    }

    pub fn is_optimize(&self) -> bool {
        matches!(self, Setting::Keyword(SettingKeyword::Optimize))
    }
}

/// Loss in dB: a single point or an inclusive range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LossSpec {
    Single(f64),
    Range { start: f64, stop: f64, step: f64 },
}

impl LossSpec {
    /// The loss points, in increasing order.
    pub fn points(&self) -> Result<Vec<f64>, ConfigError> {
        match *self {
            LossSpec::Single(v) => {
                if !v.is_finite() || v < 0.0 {
                    return Err(ConfigError(format!("loss_db = {v} must be finite and >= 0")));
                }
                Ok(vec![v])
            }
            LossSpec::Range { start, stop, step } => {
                if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
                    return Err(ConfigError("loss range must be finite".into()));
                }
                if start < 0.0 || step <= 0.0 || stop < start {
                    return Err(ConfigError(format!(
                        "empty or invalid loss range: start {start}, stop {stop}, step {step}"
                    )));
                }
                let n = ((stop - start) / step + 1.0 + 1e-9).floor() as usize;
                Ok((0..n).map(|k| start + step * k as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CMode {
    Paper,
    #[default]
    Conservative,
}

impl From<CMode> for BoundedDiffMode {
    fn from(m: CMode) -> Self {
        match m {
            CMode::Paper => BoundedDiffMode::Paper,
            CMode::Conservative => BoundedDiffMode::Conservative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMode {
    Paper,
    #[default]
    Derived,
}

impl From<DeltaMode> for NGuessMode {
    fn from(m: DeltaMode) -> Self {
        match m {
            DeltaMode::Paper => NGuessMode::Paper,
            DeltaMode::Derived => NGuessMode::Derived,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub n_tot: u64,
    pub epsilon: f64,
    pub p_d: f64,
    pub p_z: f64,
    pub p_s: f64,
    pub mu: Setting,
    pub p_sig: Setting,
    pub loss_db: LossSpec,
    #[serde(default)]
    pub mode_c: CMode,
    #[serde(default)]
    pub mode_delta: DeltaMode,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_tot == 0 {
            return Err(ConfigError("n_tot must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ConfigError(format!("epsilon = {} outside (0, 1)", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.p_d) {
            return Err(ConfigError(format!("p_d = {} outside [0, 1)", self.p_d)));
        }
        for (name, v) in [("p_z", self.p_z), ("p_s", self.p_s)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError(format!("{name} = {v} outside (0, 1)")));
            }
        }
        if let Some(mu) = self.mu.fixed() {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(ConfigError(format!("mu = {mu} must be finite and > 0")));
            }
        }
        if let Some(p_sig) = self.p_sig.fixed() {
            if !(p_sig > 0.0 && p_sig < 1.0) {
                return Err(ConfigError(format!("p_sig = {p_sig} outside (0, 1)")));
            }
        }
        self.loss_db.points()?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
