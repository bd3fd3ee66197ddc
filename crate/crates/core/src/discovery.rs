//! Source recovery from solution data, the benchmark sources, and training
//! set assembly.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::exec::ExecPolicy;
use crate::grid::{Field, Grid};
use crate::l1::caputo_weights;

/// The three benchmark problems. `Ex2` and `Ex3` share a source and differ
/// only in the noise they are paired with (uniform vs gaussian).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    Ex1,
    Ex2,
    Ex3,
}

impl std::fmt::Display for Example {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Example::Ex1 => "ex1",
            Example::Ex2 => "ex2",
            Example::Ex3 => "ex3",
        })
    }
}

impl std::str::FromStr for Example {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ex1" | "1" => Ok(Example::Ex1),
            "ex2" | "2" => Ok(Example::Ex2),
            "ex3" | "3" => Ok(Example::Ex3),
            other => Err(Error::Parse(format!("unknown example {other:?}"))),
        }
    }
}

/// `χ(x) = 1` on `0 <= x <= 1/2`, else 0.
fn left_half_indicator(x: f64) -> f64 {
    if (0.0..=0.5).contains(&x) {
        1.0
    } else {
        0.0
    }
}

const DOMAIN_SLACK: f64 = 1e-12;

/// Clean source `f̄(x, t)` of a benchmark problem on `[0,1]²`.
pub fn benchmark_source(example: Example, x: f64, t: f64) -> Result<f64> {
    let inside = |v: f64| (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&v);
    if !inside(x) || !inside(t) {
        return Err(Error::Domain(format!("({x}, {t}) lies outside [0,1]^2")));
    }
    let chi = left_half_indicator(x);
    Ok(match example {
        Example::Ex1 => (t + 1.0).powi(2) * (1.0 + chi),
        Example::Ex2 | Example::Ex3 => {
            if x <= 0.5 {
                (t + 1.0).powf(0.25) * (1.0 + chi)
            } else {
                (t + 1.0).powi(2) * (1.0 + chi)
            }
        }
    })
}

/// Initial data `g(x) = sqrt(x (1 - x))` shared by all benchmarks.
pub fn benchmark_initial(x: f64) -> f64 {
    (x * (1.0 - x)).max(0.0).sqrt()
}

/// Benchmark source sampled at every node.
pub fn benchmark_field(example: Example, grid: Grid) -> Result<Field> {
    let mut values = Array2::zeros(grid.shape());
    for ((m, n), v) in values.indexed_iter_mut() {
        *v = benchmark_source(example, grid.x(m), grid.t(n))?;
    }
    Field::from_array(grid, values)
}

/// Source recovered by the discrete inverse operator. Entries outside the
/// mask (boundary `m`, `n = 0`) are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryTarget {
    alpha: f64,
    target: Field,
}

impl DiscoveryTarget {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn grid(&self) -> &Grid {
        self.target.grid()
    }
    pub fn field(&self) -> &Field {
        &self.target
    }
}

/// `f_m^n = Σ_k ω_{n-k} u_m^k - δ_x² u_m^n` on every masked node.
pub fn discover_source(u: &Field, alpha: f64, policy: ExecPolicy) -> Result<DiscoveryTarget> {
    let grid = *u.grid();
    if u.values().dim() != grid.shape() {
        return Err(shape_err(
            format!("{:?}", grid.shape()),
            format!("{:?}", u.values().dim()),
        ));
    }
    let (nx, nt) = (grid.nx(), grid.nt());
    let weights = caputo_weights(alpha, grid.tau(), nt)?;
    let inv_h2 = 1.0 / (grid.hx() * grid.hx());

    let rows: Vec<Vec<f64>> = policy.map_indices(nx - 1, |i| {
        let m = i + 1;
        let (left, here, right) = (u.history(m - 1), u.history(m), u.history(m + 1));
        let mut row = vec![0.0; nt + 1];
        for n in 1..=nt {
            let caputo = weights.w(0) * here[n] + weights.history_term(&here[..n]);
            let lap = (right[n] - 2.0 * here[n] + left[n]) * inv_h2;
            row[n] = caputo - lap;
        }
        row
    });

    let mut values = Array2::zeros(grid.shape());
    for (i, row) in rows.into_iter().enumerate() {
        values.row_mut(i + 1).assign(&ndarray::Array1::from(row));
    }
    Ok(DiscoveryTarget {
        alpha,
        target: Field::from_array(grid, values)?,
    })
}

/// Network input layout: `(x, t)` or `(x, t, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkType {
    Type1,
    Type2,
}

impl NetworkType {
    pub fn input_dim(self) -> usize {
        match self {
            NetworkType::Type1 => 2,
            NetworkType::Type2 => 3,
        }
    }
}

impl std::fmt::Display for NetworkType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NetworkType::Type1 => "type1",
            NetworkType::Type2 => "type2",
        })
    }
}

impl std::str::FromStr for NetworkType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type1" | "1" => Ok(NetworkType::Type1),
            "type2" | "2" => Ok(NetworkType::Type2),
            other => Err(Error::Parse(format!("unknown network type {other:?}"))),
        }
    }
}

/// Flattened regression data; `inputs` is row-major `len x input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    input_dim: usize,
    inputs: Vec<f64>,
    labels: Vec<f64>,
}

impl TrainingSet {
    pub fn new(input_dim: usize, inputs: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if input_dim == 0 || inputs.len() != labels.len() * input_dim {
            return Err(shape_err(
                format!("{} inputs of width {input_dim}", labels.len()),
                inputs.len(),
            ));
        }
        Ok(Self {
            input_dim,
            inputs,
            labels,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
    pub fn len(&self) -> usize {
        self.labels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }
}

fn same_alpha(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// Builds `(x_m, t_n) -> f_m^n` pairs (Type 1, exactly one target) or
/// `(x_m, t_n, α_l) -> f_m^n` pairs (Type 2, one target per entry of
/// `alphas`, in that order). Pairs are m-major within each target; when
/// `shuffle_seed` is set the whole set is permuted deterministically.
pub fn assemble_training_set(
    targets: &[DiscoveryTarget],
    network_type: NetworkType,
    alphas: &[f64],
    shuffle_seed: Option<u64>,
) -> Result<TrainingSet> {
    if targets.is_empty() {
        return Err(Error::Domain("no discovery targets given".into()));
    }
    let ordered: Vec<&DiscoveryTarget> = match network_type {
        NetworkType::Type1 => {
            if targets.len() != 1 {
                return Err(Error::Domain(format!(
                    "type1 expects a single fixed-alpha target, got {}",
                    targets.len()
                )));
            }
            vec![&targets[0]]
        }
        NetworkType::Type2 => {
            if alphas.is_empty() {
                return Err(Error::Domain(
                    "type2 needs a non-empty alpha sequence".into(),
                ));
            }
            if targets.len() != alphas.len() {
                return Err(Error::Domain(format!(
                    "type2 expects {} targets (one per alpha), got {}",
                    alphas.len(),
                    targets.len()
                )));
            }
            alphas
                .iter()
                .map(|&a| {
                    let mut hits = targets.iter().filter(|t| same_alpha(t.alpha, a));
                    match (hits.next(), hits.next()) {
                        (Some(t), None) => Ok(t),
                        (None, _) => Err(Error::Domain(format!("no target for alpha {a}"))),
                        (Some(_), Some(_)) => {
                            Err(Error::Domain(format!("duplicate targets for alpha {a}")))
                        }
                    }
                })
                .collect::<Result<_>>()?
        }
    };
    let grid = *ordered[0].grid();
    if ordered.iter().any(|t| *t.grid() != grid) {
        return Err(Error::Domain("type2 targets must share one grid".into()));
    }

    let dim = network_type.input_dim();
    let total = grid.masked_count() * ordered.len();
    let mut inputs = Vec::with_capacity(total * dim);
    let mut labels = Vec::with_capacity(total);
    for t in &ordered {
        for (m, n) in grid.masked_nodes() {
            inputs.push(grid.x(m));
            inputs.push(grid.t(n));
            if network_type == NetworkType::Type2 {
                inputs.push(t.alpha);
            }
            labels.push(t.target.get(m, n));
        }
    }

    if let Some(seed) = shuffle_seed {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let inputs_s = order
            .iter()
            .flat_map(|&i| inputs[i * dim..(i + 1) * dim].iter().copied())
            .collect();
        let labels_s = order.iter().map(|&i| labels[i]).collect();
        return TrainingSet::new(dim, inputs_s, labels_s);
    }
    TrainingSet::new(dim, inputs, labels)
}
