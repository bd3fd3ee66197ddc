//! Implicit L1 / central-difference solver for
//! `D_t^α u - u_xx = f` on `(0, l) x (0, T]` with homogeneous Dirichlet data.
//!
//! Each level solves `(ω_0 I - δ_x²) u^n = f^n - Σ_{k<n} c_{n,k} u^k` on the
//! interior nodes. The matrix is the same at every level, so it is factored
//! once and the history sums dominate the cost.

use ndarray::Array2;

use crate::error::{shape_err, Error, Result};
use crate::exec::ExecPolicy;
use crate::grid::{Field, Grid};
use crate::l1::caputo_weights;

/// Forward problem data, sampled on the grid.
#[derive(Debug, Clone)]
pub struct Problem {
    grid: Grid,
    alpha: f64,
    initial: Vec<f64>,
    source: Field,
}

impl Problem {
    /// `initial` is evaluated at the nodes `x_m`; the two boundary samples are
    /// forced to zero to match the Dirichlet data.
    pub fn new(alpha: f64, initial: impl Fn(f64) -> f64, source: Field) -> Result<Self> {
        let grid = *source.grid();
        let mut samples: Vec<f64> = (0..=grid.nx()).map(|m| initial(grid.x(m))).collect();
        samples[0] = 0.0;
        samples[grid.nx()] = 0.0;
        Self::from_samples(alpha, samples, source)
    }

    pub fn from_samples(alpha: f64, mut initial: Vec<f64>, source: Field) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        let grid = *source.grid();
        if initial.len() != grid.nx() + 1 {
            return Err(shape_err(grid.nx() + 1, initial.len()));
        }
        if let Some(v) = initial.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("initial value {v}")));
        }
        initial[0] = 0.0;
        initial[grid.nx()] = 0.0;
        Ok(Self {
            grid,
            alpha,
            initial,
            source,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }
    pub fn source(&self) -> &Field {
        &self.source
    }
}

/// Tridiagonal system `lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    fn check(&self) -> Result<()> {
        let n = self.diag.len();
        if n == 0 {
            return Err(shape_err("non-empty system", 0));
        }
        if self.lower.len() != n - 1 || self.upper.len() != n - 1 || self.rhs.len() != n {
            return Err(shape_err(
                format!("lower/upper of length {}, rhs of length {n}", n - 1),
                format!(
                    "lower {}, upper {}, rhs {}",
                    self.lower.len(),
                    self.upper.len(),
                    self.rhs.len()
                ),
            ));
        }
        Ok(())
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * x[i + 1];
                }
                v
            })
            .collect()
    }
}

/// LU factors of a tridiagonal matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
struct ThomasFactor {
    lower: Vec<f64>,
    // modified super-diagonal c'_i and inverse pivots 1 / (b_i - a_i c'_{i-1})
    upper_mod: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl ThomasFactor {
    fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut upper_mod = vec![0.0; n.saturating_sub(1)];
        let mut inv_pivot = vec![0.0; n];
        for i in 0..n {
            let pivot = if i == 0 {
                diag[0]
            } else {
                diag[i] - lower[i - 1] * upper_mod[i - 1]
            };
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::ZeroPivot(i));
            }
            inv_pivot[i] = 1.0 / pivot;
            if i + 1 < n {
                upper_mod[i] = upper[i] * inv_pivot[i];
            }
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper_mod,
            inv_pivot,
        })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i - 1] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.upper_mod[i] * x[i + 1];
        }
    }
}

/// Thomas elimination.
pub fn thomas_solve(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    sys.check()?;
    let factor = ThomasFactor::new(&sys.lower, &sys.diag, &sys.upper)?;
    let mut x = sys.rhs.clone();
    factor.solve_in_place(&mut x);
    Ok(x)
}

/// `δ_x² u_m = (u_{m+1} - 2 u_m + u_{m-1}) / h²` at interior index `m`.
pub fn laplacian_stencil(column: &[f64], m: usize, hx: f64) -> Result<f64> {
    if column.len() < 3 || m < 1 || m + 1 >= column.len() {
        return Err(Error::IndexOutOfRange {
            index: m,
            lo: 1,
            hi: column.len().saturating_sub(2),
        });
    }
    Ok((column[m + 1] - 2.0 * column[m] + column[m - 1]) / (hx * hx))
}

/// Marches the implicit scheme from `u^0 = g` to `t = T`.
///
/// For `alpha = 1` the backward-difference weights are used, giving backward
/// Euler for the heat equation.
pub fn forward_solve(problem: &Problem, policy: ExecPolicy) -> Result<Field> {
    let grid = problem.grid;
    let (nx, nt) = (grid.nx(), grid.nt());
    let weights = caputo_weights(problem.alpha, grid.tau(), nt)?;
    let inv_h2 = 1.0 / (grid.hx() * grid.hx());

    let interior = nx - 1;
    let off = vec![-inv_h2; interior - 1];
    let diag = vec![weights.w(0) + 2.0 * inv_h2; interior];
    let factor = ThomasFactor::new(&off, &diag, &off)?;

    let mut u = Array2::<f64>::zeros(grid.shape());
    for (m, &g) in problem.initial.iter().enumerate() {
        u[[m, 0]] = g;
    }
    let source = problem.source.values();

    for n in 1..=nt {
        let mut rhs = {
            let u_ref = &u;
            policy.map_indices(interior, |i| {
                let m = i + 1;
                let row = u_ref.row(m);
                let history = &row.as_slice().expect("standard layout")[..n];
                source[[m, n]] - weights.history_term(history)
            })
        };
        factor.solve_in_place(&mut rhs);
        for (i, v) in rhs.into_iter().enumerate() {
            u[[i + 1, n]] = v;
        }
    }
    Field::from_array(grid, u)
}
