//! L1 quadrature weights for the Caputo time derivative.
//!
//! The discrete derivative at level `n` is
//!
//! ```text
//! D u^n = sum_{k=1}^{n} w[n-k] u^k + c_n u^0
//! ```
//!
//! with `w[0] = b_0 / s`, `w[j] = (b_j - b_{j-1}) / s` for `j >= 1`,
//! `c_n = -b_{n-1} / s`, `b_j = (j+1)^{1-α} - j^{1-α}` and
//! `s = Γ(2-α) τ^α`. The starting coefficient `c_n` differs from the
//! interior formula `w[n]`, which is why it is stored separately.

use crate::error::{shape_err, Error, Result};
use crate::special::gamma;

#[derive(Debug, Clone, PartialEq)]
pub struct L1Weights {
    alpha: f64,
    tau: f64,
    w: Vec<f64>,
    start: Vec<f64>,
}

/// Fractional-order L1 weights for `0 < alpha < 1`.
pub fn l1_weights(alpha: f64, tau: f64, n_max: usize) -> Result<L1Weights> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "L1 weights need 0 < alpha < 1, got {alpha}"
        )));
    }
    check_tau(tau)?;
    if n_max < 1 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let scale = gamma(2.0 - alpha)? * tau.powf(alpha);
    let p = 1.0 - alpha;
    let b: Vec<f64> = (0..=n_max)
        .map(|j| ((j + 1) as f64).powf(p) - (j as f64).powf(p))
        .collect();
    let mut w = Vec::with_capacity(n_max + 1);
    w.push(b[0] / scale);
    w.extend((1..=n_max).map(|j| (b[j] - b[j - 1]) / scale));
    let mut start = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        start[n] = -b[n - 1] / scale;
    }
    Ok(L1Weights {
        alpha,
        tau,
        w,
        start,
    })
}

/// First-order backward difference, the `alpha = 1` limit of the L1 scheme.
pub fn backward_difference_weights(tau: f64, n_max: usize) -> Result<L1Weights> {
    check_tau(tau)?;
    let n_max = n_max.max(2);
    let mut w = vec![0.0; n_max + 1];
    w[0] = 1.0 / tau;
    w[1] = -1.0 / tau;
    let mut start = vec![0.0; n_max + 1];
    start[1] = -1.0 / tau;
    Ok(L1Weights {
        alpha: 1.0,
        tau,
        w,
        start,
    })
}

/// Dispatches `alpha = 1` to [`backward_difference_weights`] and
/// `0 < alpha < 1` to [`l1_weights`].
pub fn caputo_weights(alpha: f64, tau: f64, n_max: usize) -> Result<L1Weights> {
    if alpha == 1.0 {
        backward_difference_weights(tau, n_max)
    } else {
        l1_weights(alpha, tau, n_max)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::Domain(format!(
            "time step must be positive, got {tau}"
        )));
    }
    Ok(())
}

impl L1Weights {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Largest level these weights can be applied at.
    pub fn n_max(&self) -> usize {
        self.w.len() - 1
    }

    /// Convolution weight `ω_j`.
    #[inline]
    pub fn w(&self, j: usize) -> f64 {
        self.w[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Coefficient multiplying `u^0` at level `n >= 1`.
    #[inline]
    pub fn start_coefficient(&self, n: usize) -> f64 {
        self.start[n]
    }

    /// Coefficient of `u^k` at level `n`, for `0 <= k <= n`.
    #[inline]
    pub fn coefficient(&self, n: usize, k: usize) -> f64 {
        if k == 0 {
            self.start[n]
        } else {
            self.w[n - k]
        }
    }

    /// Full coefficient vector over `u^0 ..= u^n` at level `n`.
    pub fn level_coefficients(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|k| self.coefficient(n, k)).collect()
    }

    /// `sum_{k=0}^{n-1} coefficient(n, k) u^k` where `prefix = u^0 ..= u^{n-1}`.
    /// This is everything in the derivative except the `w[0] u^n` term.
    pub(crate) fn history_term(&self, prefix: &[f64]) -> f64 {
        let n = prefix.len();
        debug_assert!(n >= 1 && n <= self.n_max());
        pairwise_sum(0, n, &|k| self.coefficient(n, k) * prefix[k])
    }
}

/// Discrete Caputo derivative at `t_n` from `history = u^0 ..= u^n`.
pub fn caputo_apply(weights: &L1Weights, history: &[f64]) -> Result<f64> {
    let len = history.len();
    if len < 2 || len - 1 > weights.n_max() {
        return Err(shape_err(
            format!("history of length 2..={}", weights.n_max() + 1),
            len,
        ));
    }
    let n = len - 1;
    Ok(weights.w(0) * history[n] + weights.history_term(&history[..n]))
}

/// Pairwise (cascade) summation of `f(lo..hi)`.
pub(crate) fn pairwise_sum(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
    const BLOCK: usize = 16;
    if hi - lo <= BLOCK {
        (lo..hi).map(f).sum()
    } else {
        let mid = lo + (hi - lo) / 2;
        pairwise_sum(lo, mid, f) + pairwise_sum(mid, hi, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

    #[test]
    fn half_order_unit_step() {
        let w = l1_weights(0.5, 1.0, 1).unwrap();
        assert_relative_eq!(w.w(0), FRAC_2_SQRT_PI, max_relative = 1e-14);
        assert_relative_eq!(
            w.start_coefficient(1),
            -FRAC_2_SQRT_PI,
            max_relative = 1e-14
        );
    }

    #[test]
    fn telescoping_and_signs() {
        for &alpha in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            let w = l1_weights(alpha, 0.01, 100).unwrap();
            for n in 1..=100 {
                let c = w.level_coefficients(n);
                let s: f64 = c.iter().sum();
                assert!(s.abs() <= 1e-12 * w.w(0), "alpha={alpha} n={n} sum={s:e}");
                assert!(c[n] > 0.0);
                assert!(c[..n].iter().all(|&v| v <= 0.0));
            }
            for j in 1..100 {
                assert!(w.w(j) < 0.0);
                assert!(w.w(j + 1).abs() <= w.w(j).abs());
            }
        }
    }

    #[test]
    fn constant_history_has_zero_derivative() {
        let w = l1_weights(0.42, 0.02, 50).unwrap();
        for n in 1..=50 {
            let d = caputo_apply(&w, &vec![7.3; n + 1]).unwrap();
            assert!(d.abs() <= 1e-12 * (w.w(0) * 7.3).abs(), "n={n} d={d:e}");
        }
    }

    #[test]
    fn exact_on_linear_history() {
        for &alpha in &[0.1, 0.5, 0.9] {
            let tau = 0.01;
            let w = l1_weights(alpha, tau, 100).unwrap();
            let u: Vec<f64> = (0..=100).map(|k| k as f64 * tau).collect();
            let g = gamma(2.0 - alpha).unwrap();
            for n in 1..=100 {
                let exact = (n as f64 * tau).powf(1.0 - alpha) / g;
                let d = caputo_apply(&w, &u[..=n]).unwrap();
                assert_relative_eq!(d, exact, max_relative = 1e-10);
            }
        }
        let w = l1_weights(0.5, 0.01, 100).unwrap();
        let u: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        assert_relative_eq!(
            caputo_apply(&w, &u).unwrap(),
            FRAC_2_SQRT_PI,
            max_relative = 1e-10
        );
    }

    #[test]
    fn quadratic_history_converges_at_rate_two_minus_alpha() {
        let alpha = 0.5;
        let exact = 2.0 / gamma(3.0 - alpha).unwrap();
        let errors: Vec<f64> = [32usize, 64, 128, 256]
            .iter()
            .map(|&nt| {
                let tau = 1.0 / nt as f64;
                let w = l1_weights(alpha, tau, nt).unwrap();
                let u: Vec<f64> = (0..=nt).map(|k| (k as f64 * tau).powi(2)).collect();
                (caputo_apply(&w, &u).unwrap() - exact).abs()
            })
            .collect();
        for pair in errors.windows(2) {
            let rate = (pair[0] / pair[1]).log2();
            assert!((rate - 1.5).abs() < 0.1, "rate {rate}");
        }
    }

    #[test]
    fn backward_difference() {
        let w = backward_difference_weights(0.01, 10).unwrap();
        assert_eq!(w.alpha(), 1.0);
        assert_relative_eq!(w.w(0), 100.0);
        assert_relative_eq!(w.w(1), -100.0);
        assert_eq!(w.w(2), 0.0);
        let lin: Vec<f64> = (0..=10).map(|k| k as f64 * 0.01).collect();
        for n in 1..=10 {
            assert_relative_eq!(
                caputo_apply(&w, &lin[..=n]).unwrap(),
                1.0,
                max_relative = 1e-12
            );
            assert_eq!(caputo_apply(&w, &vec![3.0; n + 1]).unwrap(), 0.0);
        }
        assert!(caputo_weights(1.0, 0.1, 5).unwrap().alpha() == 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(l1_weights(0.0, 0.1, 10).is_err());
        assert!(l1_weights(1.0, 0.1, 10).is_err());
        assert!(l1_weights(0.5, 0.0, 10).is_err());
        assert!(l1_weights(0.5, 0.1, 0).is_err());
        assert!(backward_difference_weights(-1.0, 3).is_err());
        let w = l1_weights(0.5, 0.1, 3).unwrap();
        assert!(caputo_apply(&w, &[1.0]).is_err());
        assert!(caputo_apply(&w, &[1.0; 5]).is_err());
    }
}
