use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discovery::{Example, NetworkType};
use crate::error::{Error, Result};
use crate::nn::Init;
use crate::noise::NoiseKind;

/// Everything needed to reproduce one run. Serialized as TOML (flat
/// `key = value` lines) into every artifact directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub example: Example,
    pub network_type: NetworkType,
    /// Fixed order used to generate data for Type 1 and to evaluate Type 2.
    pub alpha: f64,
    /// Orders whose data is pooled to train Type 2.
    pub alpha_sequence: Vec<f64>,
    pub noise: NoiseKind,
    pub noise_level: f64,
    /// Intervals per direction: `h_x = h_t = 1 / grid`.
    pub grid: usize,
    /// `None` picks the per-experiment default.
    pub epochs: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub width: usize,
    pub depth: usize,
    pub init: Init,
    /// `None` derives a fixed seed from (example, type, noise, level, grid).
    pub seed: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            example: Example::Ex1,
            network_type: NetworkType::Type1,
            alpha: 0.3,
            alpha_sequence: default_alpha_sequence(),
            noise: NoiseKind::None,
            noise_level: 0.0,
            grid: 100,
            epochs: None,
            batch_size: 256,
            learning_rate: 1e-2,
            width: 100,
            depth: 10,
            init: Init::Uniform,
            seed: None,
        }
    }
}

/// `{l / 10 : l = 1..=10}`.
pub fn default_alpha_sequence() -> Vec<f64> {
    (1..=10).map(|l| l as f64 / 10.0).collect()
}

/// Epoch counts used for each benchmark.
pub fn default_epochs(example: Example, network_type: NetworkType) -> usize {
    match (example, network_type) {
        (Example::Ex1, _) => 250,
        (Example::Ex2, NetworkType::Type1) => 200,
        (Example::Ex3, NetworkType::Type1) => 255,
        (_, NetworkType::Type2) => 270,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream seed for sub-task `stream` of a run, in 63 bits.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream)) >> 1
}

fn check_alpha(a: f64, what: &str) -> Result<()> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Domain(format!("{what} must lie in (0, 1], got {a}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn resolved_epochs(&self) -> usize {
        self.epochs
            .unwrap_or_else(|| default_epochs(self.example, self.network_type))
    }

    /// Explicit seed, or a hash of the identifying fields. The evaluation
    /// `alpha` is left out so per-column Type 1 retraining shares one seed.
    pub fn resolved_seed(&self) -> u64 {
        if let Some(s) = self.seed {
            return s;
        }
        let key = format!(
            "{}/{}/{}/{}/{}",
            self.example,
            self.network_type,
            self.noise,
            self.noise_level.to_bits(),
            self.grid
        );
        // TOML integers are signed 64-bit.
        key.bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| splitmix64(h ^ b as u64))
            >> 1
    }

    /// Copy with epochs and seed filled in, as echoed into artifacts.
    pub fn resolved(&self) -> Self {
        Self {
            epochs: Some(self.resolved_epochs()),
            seed: Some(self.resolved_seed()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.example, self.noise) {
            (_, NoiseKind::None) => {}
            (Example::Ex1 | Example::Ex2, NoiseKind::Uniform) => {}
            (Example::Ex3, NoiseKind::Gaussian) => {}
            (ex, kind) => {
                return Err(Error::Domain(format!(
                    "{ex} is paired with {} noise, got {kind}",
                    if ex == Example::Ex3 {
                        "gaussian"
                    } else {
                        "uniform"
                    }
                )))
            }
        }
        if !self.noise_level.is_finite() || self.noise_level < 0.0 {
            return Err(Error::Domain(format!(
                "bad noise level {}",
                self.noise_level
            )));
        }
        check_alpha(self.alpha, "alpha")?;
        if self.network_type == NetworkType::Type2 {
            if self.alpha_sequence.is_empty() {
                return Err(Error::Domain("alpha_sequence is empty".into()));
            }
            for &a in &self.alpha_sequence {
                check_alpha(a, "alpha_sequence entry")?;
            }
        }
        if self.grid < 2 {
            return Err(Error::Domain(format!(
                "grid must be at least 2, got {}",
                self.grid
            )));
        }
        if self.epochs == Some(0) || self.batch_size == 0 || self.width == 0 || self.depth == 0 {
            return Err(Error::Domain(
                "epochs, batch_size, width and depth must be positive".into(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Domain(format!(
                "bad learning rate {}",
                self.learning_rate
            )));
        }
        if self.seed.is_some_and(|s| s > i64::MAX as u64) {
            return Err(Error::Domain("seed must fit in 63 bits".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Applies a `key=value` override, the value written in TOML syntax
    /// (bare words are taken as strings). Keys may be dotted, in which case
    /// only the last segment is used (`train.epochs=10` sets `epochs`).
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("override {assignment:?} is not key=value")))?;
        let key = key.trim().rsplit('.').next().unwrap_or_default();
        let value = value.trim();
        let mut table: toml::Table =
            toml::from_str(&self.to_toml()).map_err(|e| Error::Parse(e.to_string()))?;
        let parsed = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
        *self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        Ok(())
    }
}
