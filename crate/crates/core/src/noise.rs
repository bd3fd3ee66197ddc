//! Additive source perturbations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    None,
    Uniform,
    Gaussian,
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseKind::None => "none",
            NoiseKind::Uniform => "uniform",
            NoiseKind::Gaussian => "gaussian",
        })
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "clean" => Ok(NoiseKind::None),
            "uniform" => Ok(NoiseKind::Uniform),
            "gaussian" | "normal" => Ok(NoiseKind::Gaussian),
            other => Err(Error::Parse(format!("unknown noise kind {other:?}"))),
        }
    }
}

/// `level * ξ` per node with `ξ ~ U(0,1)` (uniform) or `ξ ~ N(0,1)` (gaussian).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn clean() -> Self {
        Self {
            kind: NoiseKind::None,
            level: 0.0,
            seed: 0,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.kind == NoiseKind::None || self.level == 0.0
    }
}

/// Adds independent draws to every node of `base`, row by row in m-major order.
/// The same spec always yields the same field.
pub fn inject_noise(base: &Field, spec: &NoiseSpec) -> Result<Field> {
    if !spec.level.is_finite() || spec.level < 0.0 {
        return Err(Error::Domain(format!(
            "noise level must be finite and non-negative, got {}",
            spec.level
        )));
    }
    if spec.is_clean() {
        return Ok(base.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = base.values().clone();
    for v in values.iter_mut() {
        let xi: f64 = match spec.kind {
            NoiseKind::Uniform => rng.random::<f64>(),
            NoiseKind::Gaussian => rng.sample(StandardNormal),
            NoiseKind::None => unreachable!(),
        };
        *v += spec.level * xi;
    }
    Field::from_array(*base.grid(), values)
}
