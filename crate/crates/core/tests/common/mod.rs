//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use ndarray::Array2;
use subdiff_core::nn::Mlp;
use subdiff_core::{Field, Grid};

/// Double-exponential (tanh-sinh) quadrature of `f` over `[a, b]`. Nodes are
/// placed relative to the nearer endpoint so integrable endpoint
/// singularities are resolved to full precision.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = 1.0 / 64.0;
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    let kmax = (4.5 / h) as i64;
    for k in -kmax..=kmax {
        let s = k as f64 * h;
        let u = FRAC_PI_2 * s.sinh();
        let cu = u.cosh();
        let weight = FRAC_PI_2 * s.cosh() / (cu * cu);
        if weight == 0.0 {
            continue;
        }
        let x = if u <= 0.0 {
            a + half * (2.0 / (1.0 + (-2.0 * u).exp()))
        } else {
            b - half * (2.0 / (1.0 + (2.0 * u).exp()))
        };
        if x <= a || x >= b {
            continue;
        }
        sum += weight * f(x);
    }
    sum * h * half
}

/// `∫_0^b s^{-α} ds` by quadrature after substituting `s = v^k`, which
/// turns the integrand into `k v^{k(1-α)-1}`; `k` is chosen so the
/// remaining singularity is mild enough for the double-exponential tails.
pub fn singular_power_integral(alpha: f64, b: f64) -> f64 {
    let k = (0.5 / (1.0 - alpha)).ceil().max(1.0);
    let p = k * (1.0 - alpha) - 1.0;
    tanh_sinh(|v| k * v.powf(p), 0.0, b.powf(1.0 / k))
}

/// L1 kernel integrals `a_j = (1/(Γ(1-α) τ)) ∫_{jτ}^{(j+1)τ} σ^{-α} dσ`
/// by quadrature, for `j = 0..n`.
pub fn kernel_integrals(alpha: f64, tau: f64, n: usize) -> Vec<f64> {
    let scale = 1.0 / (statrs::function::gamma::gamma(1.0 - alpha) * tau);
    (0..n)
        .map(|j| {
            let lo = j as f64 * tau;
            let integral = if j == 0 {
                singular_power_integral(alpha, tau)
            } else {
                tanh_sinh(|s| s.powf(-alpha), lo, lo + tau)
            };
            scale * integral
        })
        .collect()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= factor * p;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Time stepping with the L1 differences written out from the kernel
/// integrals and each level solved densely. `alpha = 1` degenerates to
/// backward Euler.
pub fn dense_l1_solve(alpha: f64, initial: &[f64], source: &Field) -> Array2<f64> {
    let grid = *source.grid();
    let (nx, nt) = (grid.nx(), grid.nt());
    let tau = grid.tau();
    let a: Vec<f64> = if alpha == 1.0 {
        let mut a = vec![0.0; nt];
        a[0] = 1.0 / tau;
        a
    } else {
        kernel_integrals(alpha, tau, nt)
    };
    let inv_h2 = 1.0 / (grid.hx() * grid.hx());
    let mut u = Array2::zeros(grid.shape());
    for m in 1..nx {
        u[[m, 0]] = initial[m];
    }
    let dim = nx - 1;
    for n in 1..=nt {
        let mut mat = vec![vec![0.0; dim]; dim];
        let mut rhs = vec![0.0; dim];
        for i in 0..dim {
            let m = i + 1;
            mat[i][i] = a[0] + 2.0 * inv_h2;
            if i > 0 {
                mat[i][i - 1] = -inv_h2;
            }
            if i + 1 < dim {
                mat[i][i + 1] = -inv_h2;
            }
            let mut r = source.get(m, n) + a[0] * u[[m, n - 1]];
            for k in 0..n.saturating_sub(1) {
                r -= a[n - 1 - k] * (u[[m, k + 1]] - u[[m, k]]);
            }
            rhs[i] = r;
        }
        let x = dense_solve(mat, rhs);
        for i in 0..dim {
            u[[i + 1, n]] = x[i];
        }
    }
    u
}

/// Backward Euler for `u_t - u_xx = f`, solved densely level by level.
pub fn backward_euler(initial: &[f64], source: &Field) -> Array2<f64> {
    let grid = *source.grid();
    let (nx, nt) = (grid.nx(), grid.nt());
    let (tau, h2) = (grid.tau(), grid.hx() * grid.hx());
    let mut u = Array2::zeros(grid.shape());
    for m in 1..nx {
        u[[m, 0]] = initial[m];
    }
    for n in 1..=nt {
        let dim = nx - 1;
        let mut mat = vec![vec![0.0; dim]; dim];
        let mut rhs = vec![0.0; dim];
        for i in 0..dim {
            mat[i][i] = 1.0 / tau + 2.0 / h2;
            if i > 0 {
                mat[i][i - 1] = -1.0 / h2;
            }
            if i + 1 < dim {
                mat[i][i + 1] = -1.0 / h2;
            }
            rhs[i] = source.get(i + 1, n) + u[[i + 1, n - 1]] / tau;
        }
        for (i, v) in dense_solve(mat, rhs).into_iter().enumerate() {
            u[[i + 1, n]] = v;
        }
    }
    u
}

/// Mean squared error of `mlp` on `(x, y)`.
pub fn mse(mlp: &Mlp, x: &Array2<f64>, y: &[f64]) -> f64 {
    let out = mlp.predict(x.view()).unwrap();
    out.column(0)
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64
}

/// Central-difference gradient of the MSE, flattened layer by layer
/// (weights row-major, then biases).
pub fn fd_gradient(mlp: &Mlp, x: &Array2<f64>, y: &[f64], step: f64) -> Vec<f64> {
    let mut grads = Vec::new();
    let layers = mlp.layers().to_vec();
    for l in 0..layers.len() {
        for which in 0..2 {
            let len = if which == 0 {
                layers[l].weight.len()
            } else {
                layers[l].bias.len()
            };
            for p in 0..len {
                let eval = |delta: f64| {
                    let mut perturbed = layers.clone();
                    if which == 0 {
                        perturbed[l].weight.as_slice_mut().unwrap()[p] += delta;
                    } else {
                        perturbed[l].bias[p] += delta;
                    }
                    mse(&Mlp::from_layers(perturbed).unwrap(), x, y)
                };
                grads.push((eval(step) - eval(-step)) / (2.0 * step));
            }
        }
    }
    grads
}

/// Manufactured solution `u* = x(1-x)t²` with zero initial data.
pub fn manufactured_exact(x: f64, t: f64) -> f64 {
    x * (1.0 - x) * t * t
}

/// `D_t^α u* - u*_xx` for the manufactured solution.
pub fn manufactured_source(alpha: f64, x: f64, t: f64) -> f64 {
    2.0 * t.powf(2.0 - alpha) * x * (1.0 - x) / statrs::function::gamma::gamma(3.0 - alpha)
        + 2.0 * t * t
}

/// Max-norm error of the L1 solver on the manufactured problem.
pub fn manufactured_error(alpha: f64, nx: usize, nt: usize) -> f64 {
    use subdiff_core::{forward_solve, ExecPolicy, Problem};
    let grid = Grid::new(1.0, 1.0, nx, nt).unwrap();
    let f = Field::from_fn(grid, |x, t| manufactured_source(alpha, x, t)).unwrap();
    let u = forward_solve(
        &Problem::new(alpha, |_| 0.0, f).unwrap(),
        ExecPolicy::default(),
    )
    .unwrap();
    let mut err: f64 = 0.0;
    for m in 0..=nx {
        for n in 0..=nt {
            err = err.max((u.get(m, n) - manufactured_exact(grid.x(m), grid.t(n))).abs());
        }
    }
    err
}
