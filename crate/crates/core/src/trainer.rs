//! Loss, mini-batch training loop, relative error, and surrogate evaluation.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::{NetworkType, TrainingSet};
use crate::error::{shape_err, Error, Result};
use crate::exec::ExecPolicy;
use crate::grid::{Field, Grid};
use crate::nn::{AdamConfig, AdamState, Gradients, Mlp};

/// Rows per gradient work item. Fixed so the reduction order, and therefore
/// every parameter bit, does not depend on the execution policy.
pub const GRADIENT_CHUNK: usize = 64;
const EVAL_CHUNK: usize = 1024;
const SHUFFLE_STREAM: u64 = 0x05ee_d0fb_a7c4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaPolicy {
    Fixed(f64),
    Sequence(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub network_type: NetworkType,
    pub alpha: AlphaPolicy,
}

impl TrainConfig {
    pub fn new(network_type: NetworkType, alpha: AlphaPolicy, epochs: usize, seed: u64) -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs,
            batch_size: 256,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            seed,
            network_type,
            alpha,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Domain(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        // zero is accepted: it freezes the parameters, which tests rely on
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Domain(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean squared error over the training set, accumulated batch by batch
    /// during each epoch.
    pub epoch_loss: Vec<f64>,
    pub optimizer_steps: u64,
    /// Grid-normalized loss of the final network, filled in by the caller.
    pub grid_loss: Option<f64>,
    pub relative_error: Option<f64>,
    pub seed: u64,
    pub config: TrainConfig,
    /// Not persisted: artifacts must be byte-reproducible.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// Training aborted; carries the report up to the failing epoch.
#[derive(Debug, Error)]
#[error("training failed in epoch {epoch}: {source}")]
pub struct TrainFailure {
    pub epoch: usize,
    pub report: Box<TrainReport>,
    #[source]
    pub source: Error,
}

/// `Σ (pred - label)² / normalizer`. With `normalizer = N_t N_x - 1` this is
/// the grid loss `J_h` against the discovery target.
pub fn residual_loss(predictions: &[f64], labels: &[f64], normalizer: f64) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    if predictions.len() != labels.len() {
        return Err(shape_err(labels.len(), predictions.len()));
    }
    if normalizer.is_nan() || normalizer <= 0.0 {
        return Err(Error::Domain(format!(
            "normalizer must be positive, got {normalizer}"
        )));
    }
    let sse: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l) * (p - l))
        .sum();
    Ok(sse / normalizer)
}

/// `N_t N_x - 1`.
pub fn grid_normalizer(grid: &Grid) -> f64 {
    (grid.nt() * grid.nx()) as f64 - 1.0
}

/// Frobenius-norm ratio `||pred - truth|| / ||truth||` over the masked nodes.
pub fn relative_error(predicted: &Field, truth: &Field) -> Result<f64> {
    predicted.check_same_grid(truth)?;
    let grid = truth.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for (m, n) in grid.masked_nodes() {
        let t = truth.get(m, n);
        let d = predicted.get(m, n) - t;
        num += d * d;
        den += t * t;
    }
    if den == 0.0 {
        return Err(Error::Domain("reference field vanishes on the mask".into()));
    }
    Ok((num / den).sqrt())
}

/// Mean-squared-error gradient of one batch: returns the batch sum of
/// squared residuals and the gradient of `SSE / B`.
pub fn batch_gradient(
    mlp: &Mlp,
    inputs: ArrayView2<f64>,
    labels: &[f64],
    policy: ExecPolicy,
) -> Result<(f64, Gradients)> {
    let rows = inputs.nrows();
    if rows == 0 || rows != labels.len() {
        return Err(shape_err(format!("{rows} labels"), labels.len()));
    }
    let scale = 2.0 / rows as f64;
    let chunks = rows.div_ceil(GRADIENT_CHUNK);
    let parts = policy.map_indices(chunks, |c| -> Result<(f64, Gradients)> {
        let lo = c * GRADIENT_CHUNK;
        let hi = (lo + GRADIENT_CHUNK).min(rows);
        let x = inputs.slice(ndarray::s![lo..hi, ..]);
        let (out, cache) = mlp.forward(x)?;
        let mut sse = 0.0;
        let mut grad_out = Array2::zeros((hi - lo, 1));
        for i in 0..hi - lo {
            let r = out[[i, 0]] - labels[lo + i];
            sse += r * r;
            grad_out[[i, 0]] = scale * r;
        }
        Ok((sse, mlp.backward(&cache, grad_out.view())?))
    });
    let mut iter = parts.into_iter();
    let (mut sse, mut grads) = iter.next().expect("at least one chunk")?;
    for part in iter {
        let (s, g) = part?;
        sse += s;
        grads.add_assign(&g);
    }
    Ok((sse, grads))
}

/// Predictions for every row of `set`, computed in fixed-size chunks.
pub fn predict_set(mlp: &Mlp, set: &TrainingSet, policy: ExecPolicy) -> Result<Vec<f64>> {
    predict_rows(mlp, set.inputs(), set.input_dim(), policy)
}

fn predict_rows(mlp: &Mlp, inputs: &[f64], dim: usize, policy: ExecPolicy) -> Result<Vec<f64>> {
    if mlp.input_dim() != dim {
        return Err(shape_err(format!("input width {}", mlp.input_dim()), dim));
    }
    let rows = inputs.len() / dim;
    let chunks = rows.div_ceil(EVAL_CHUNK);
    let parts = policy.map_indices(chunks, |c| -> Result<Vec<f64>> {
        let lo = c * EVAL_CHUNK;
        let hi = (lo + EVAL_CHUNK).min(rows);
        let x = ArrayView2::from_shape((hi - lo, dim), &inputs[lo * dim..hi * dim])
            .map_err(|e| Error::Domain(e.to_string()))?;
        Ok(mlp.predict(x)?.column(0).to_vec())
    });
    let mut out = Vec::with_capacity(rows);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Runs `config.epochs` epochs of shuffled mini-batch Adam on the mean
/// squared error. Deterministic for a fixed seed, data and initial network.
pub fn train(
    config: &TrainConfig,
    set: &TrainingSet,
    mut mlp: Mlp,
    policy: ExecPolicy,
) -> std::result::Result<(Mlp, TrainReport), TrainFailure> {
    let started = Instant::now();
    let mut report = TrainReport {
        epoch_loss: Vec::with_capacity(config.epochs),
        optimizer_steps: 0,
        grid_loss: None,
        relative_error: None,
        seed: config.seed,
        config: config.clone(),
        wall_clock_secs: 0.0,
    };
    let fail = |epoch: usize, report: &TrainReport, source: Error| TrainFailure {
        epoch,
        report: Box::new(TrainReport {
            wall_clock_secs: started.elapsed().as_secs_f64(),
            ..report.clone()
        }),
        source,
    };

    if let Err(e) = config.validate() {
        return Err(fail(0, &report, e));
    }
    if set.is_empty() {
        return Err(fail(0, &report, Error::Domain("empty training set".into())));
    }
    let dim = config.network_type.input_dim();
    if set.input_dim() != dim || mlp.input_dim() != dim || mlp.output_dim() != 1 {
        let e = shape_err(
            format!("{} inputs and a scalar output", dim),
            format!("set width {}, network {:?}", set.input_dim(), mlp.widths()),
        );
        return Err(fail(0, &report, e));
    }

    let mut adam = AdamState::new(&mlp, config.adam());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut x = Vec::with_capacity(config.batch_size * dim);
    let mut y = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for batch in order.chunks(config.batch_size) {
            x.clear();
            y.clear();
            for &i in batch {
                x.extend_from_slice(set.input(i));
                y.push(set.labels()[i]);
            }
            let view = ArrayView2::from_shape((batch.len(), dim), &x).expect("batch shape");
            let step = batch_gradient(&mlp, view, &y, policy)
                .and_then(|(s, g)| adam.step(&mut mlp, &g).map(|_| s));
            match step {
                Ok(s) => sse += s,
                Err(e) => return Err(fail(epoch, &report, e)),
            }
            report.optimizer_steps = adam.steps();
        }
        let loss = sse / set.len() as f64;
        report.epoch_loss.push(loss);
        if !loss.is_finite() {
            return Err(fail(
                epoch,
                &report,
                Error::NonFinite(format!("epoch loss {loss}")),
            ));
        }
    }
    report.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok((mlp, report))
}

/// Samples the surrogate on every masked node (zero elsewhere). Type 2
/// networks receive `alpha` as their third input.
pub fn evaluate_surrogate(
    mlp: &Mlp,
    grid: &Grid,
    network_type: NetworkType,
    alpha: f64,
    policy: ExecPolicy,
) -> Result<Field> {
    let dim = network_type.input_dim();
    if mlp.input_dim() != dim {
        return Err(shape_err(
            format!("network of input width {dim}"),
            mlp.input_dim(),
        ));
    }
    let mut inputs = Vec::with_capacity(grid.masked_count() * dim);
    for (m, n) in grid.masked_nodes() {
        inputs.push(grid.x(m));
        inputs.push(grid.t(n));
        if network_type == NetworkType::Type2 {
            inputs.push(alpha);
        }
    }
    let preds = predict_rows(mlp, &inputs, dim, policy)?;
    let mut values = Array2::zeros(grid.shape());
    for ((m, n), p) in grid.masked_nodes().zip(preds) {
        values[[m, n]] = p;
    }
    Field::from_array(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Init;

    #[test]
    fn residual_loss_cases() {
        assert_eq!(residual_loss(&[1.0, 2.0], &[1.0, 2.0], 5.0).unwrap(), 0.0);
        let v = residual_loss(&[3.0], &[1.0], 100.0 * 100.0 - 1.0).unwrap();
        assert!((v - 4.0 / 9999.0).abs() < 1e-18);
        assert!((v - 4.0004e-4).abs() < 1e-7);
        let a = residual_loss(&[1.5, -0.5], &[1.0, 0.0], 3.0).unwrap();
        let b = residual_loss(&[2.0, -1.0], &[1.0, 0.0], 3.0).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-15);
        assert!(residual_loss(&[], &[], 1.0).is_err());
        assert!(residual_loss(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(residual_loss(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn relative_error_cases() {
        let g = Grid::unit_square(10).unwrap();
        let truth = Field::from_fn(g, |x, t| 1.0 + x * t).unwrap();
        assert_eq!(relative_error(&truth, &truth).unwrap(), 0.0);
        let scaled = Field::from_array(g, truth.values() * 1.1).unwrap();
        assert!((relative_error(&scaled, &truth).unwrap() - 0.1).abs() < 1e-14);
        assert!(relative_error(&truth, &Field::zeros(g)).is_err());
        let other = Field::zeros(Grid::unit_square(11).unwrap());
        assert!(relative_error(&other, &truth).is_err());
    }

    fn tiny_set(label: f64) -> TrainingSet {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            inputs.extend([i as f64 / 40.0, (i % 7) as f64 / 7.0]);
            labels.push(label);
        }
        TrainingSet::new(2, inputs, labels).unwrap()
    }

    fn cfg(epochs: usize, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::new(NetworkType::Type1, AlphaPolicy::Fixed(0.3), epochs, seed);
        c.batch_size = 8;
        c
    }

    fn full_mse(mlp: &Mlp, set: &TrainingSet) -> f64 {
        let p = predict_set(mlp, set, ExecPolicy::Sequential).unwrap();
        residual_loss(&p, set.labels(), set.len() as f64).unwrap()
    }

    #[test]
    fn constant_target_is_learned() {
        let set = tiny_set(2.5);
        let improved = (0..3).any(|seed| {
            let mlp = Mlp::new(&[2, 8, 8, 1], Init::Uniform, seed).unwrap();
            let before = full_mse(&mlp, &set);
            let (trained, report) =
                train(&cfg(1, seed), &set, mlp, ExecPolicy::Sequential).unwrap();
            assert_eq!(report.epoch_loss.len(), 1);
            full_mse(&trained, &set) < before
        });
        assert!(improved);
    }

    #[test]
    fn zero_learning_rate_freezes() {
        let set = tiny_set(1.0);
        let mlp = Mlp::new(&[2, 6, 1], Init::Uniform, 2).unwrap();
        let mut c = cfg(4, 2);
        c.learning_rate = 0.0;
        let (trained, report) = train(&c, &set, mlp.clone(), ExecPolicy::Sequential).unwrap();
        assert_eq!(trained.layers(), mlp.layers());
        assert!(report.epoch_loss.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn training_is_deterministic_across_policies() {
        let set = tiny_set(0.7);
        let mlp = Mlp::new(&[2, 16, 16, 1], Init::Uniform, 5).unwrap();
        let mut c = cfg(3, 9);
        c.batch_size = 150; // several gradient chunks per batch
        let (a, ra) = train(&c, &set, mlp.clone(), ExecPolicy::Sequential).unwrap();
        let (b, rb) = train(&c, &set, mlp, ExecPolicy::Parallel).unwrap();
        assert_eq!(a.layers(), b.layers());
        assert_eq!(ra.epoch_loss, rb.epoch_loss);
    }

    #[test]
    fn rejects_bad_inputs() {
        let set = tiny_set(1.0);
        let mlp3 = Mlp::new(&[3, 4, 1], Init::Uniform, 0).unwrap();
        assert!(train(&cfg(1, 0), &set, mlp3, ExecPolicy::Sequential).is_err());
        let mlp = Mlp::new(&[2, 4, 1], Init::Uniform, 0).unwrap();
        let mut c = cfg(1, 0);
        c.epochs = 0;
        assert!(train(&c, &set, mlp.clone(), ExecPolicy::Sequential).is_err());
        let empty = TrainingSet::new(2, vec![], vec![]).unwrap();
        assert!(train(&cfg(1, 0), &empty, mlp, ExecPolicy::Sequential).is_err());
    }

    #[test]
    fn non_finite_labels_abort_with_report() {
        let mut set = tiny_set(1.0);
        let mut labels = set.labels().to_vec();
        labels[3] = f64::INFINITY;
        set = TrainingSet::new(2, set.inputs().to_vec(), labels).unwrap();
        let mlp = Mlp::new(&[2, 4, 1], Init::Uniform, 0).unwrap();
        let err = train(&cfg(2, 0), &set, mlp, ExecPolicy::Sequential).unwrap_err();
        assert_eq!(err.epoch, 1);
        assert!(err.report.epoch_loss.is_empty());
    }

    #[test]
    fn tiny_step_descends() {
        let set = tiny_set(1.0);
        for seed in 0..5 {
            let mut mlp = Mlp::new(&[2, 10, 10, 1], Init::Uniform, seed).unwrap();
            let x = ArrayView2::from_shape((set.len(), 2), set.inputs()).unwrap();
            let (_, g) = batch_gradient(&mlp, x, set.labels(), ExecPolicy::Sequential).unwrap();
            let before = full_mse(&mlp, &set);
            let mut adam = AdamState::new(
                &mlp,
                AdamConfig {
                    learning_rate: 1e-6,
                    ..AdamConfig::default()
                },
            );
            adam.step(&mut mlp, &g).unwrap();
            assert!(full_mse(&mlp, &set) <= before);
        }
    }

    #[test]
    fn surrogate_of_zero_net_is_bias() {
        let g = Grid::unit_square(8).unwrap();
        let mut mlp = Mlp::zeros(&[3, 4, 1]).unwrap();
        mlp.layers_mut()[1].bias[0] = -0.75;
        let f =
            evaluate_surrogate(&mlp, &g, NetworkType::Type2, 0.3, ExecPolicy::Parallel).unwrap();
        for (m, n) in g.masked_nodes() {
            assert_eq!(f.get(m, n), -0.75);
        }
        assert_eq!(f.get(0, 3), 0.0);
        assert!(
            evaluate_surrogate(&mlp, &g, NetworkType::Type1, 0.3, ExecPolicy::Parallel).is_err()
        );
    }

    #[test]
    fn type2_surrogate_is_continuous_in_alpha() {
        let g = Grid::unit_square(10).unwrap();
        let mlp = Mlp::new(&[3, 20, 20, 1], Init::Uniform, 8).unwrap();
        let a =
            evaluate_surrogate(&mlp, &g, NetworkType::Type2, 0.3, ExecPolicy::Sequential).unwrap();
        let b = evaluate_surrogate(
            &mlp,
            &g,
            NetworkType::Type2,
            0.300_000_01,
            ExecPolicy::Sequential,
        )
        .unwrap();
        // Lipschitz constant bounded by the product of layer operator norms
        // (Frobenius norms bound them).
        let lip: f64 = mlp
            .layers()
            .iter()
            .map(|l| l.weight.iter().map(|v| v * v).sum::<f64>().sqrt())
            .product();
        let max_diff = (a.values() - b.values())
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_diff <= lip * 1e-8 + 1e-15);
    }
}
