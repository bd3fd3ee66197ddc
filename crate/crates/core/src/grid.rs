//! Uniform space-time meshes and grid-sampled fields.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Uniform mesh over `[0, length] x [0, horizon]` with `nx` space and `nt`
/// time intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    horizon: f64,
    nx: usize,
    nt: usize,
    hx: f64,
    tau: f64,
}

impl Grid {
    pub fn new(length: f64, horizon: f64, nx: usize, nt: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) || !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!(
                "grid extents must be positive, got l={length}, T={horizon}"
            )));
        }
        if nx < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 space intervals, got {nx}"
            )));
        }
        if nt < 1 {
            return Err(Error::Domain("need at least 1 time interval".into()));
        }
        Ok(Self {
            length,
            horizon,
            nx,
            nt,
            hx: length / nx as f64,
            tau: horizon / nt as f64,
        })
    }

    /// `[0,1] x [0,1]` with `n` intervals in both directions (`h_x = h_t = 1/n`).
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(1.0, 1.0, n, n)
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn x(&self, m: usize) -> f64 {
        m as f64 * self.hx
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    /// `(nx + 1, nt + 1)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.nx + 1, self.nt + 1)
    }

    /// Nodes where the discovery operator is defined: interior space index,
    /// time index at least 1.
    #[inline]
    pub fn is_masked(&self, m: usize, n: usize) -> bool {
        m >= 1 && m < self.nx && n >= 1 && n <= self.nt
    }

    /// Masked nodes in m-major order.
    pub fn masked_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.nx).flat_map(move |m| (1..=self.nt).map(move |n| (m, n)))
    }

    pub fn masked_count(&self) -> usize {
        (self.nx - 1) * self.nt
    }
}

/// Real values on every node of a [`Grid`], indexed `[m, n]` (space, time).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Array2<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: Array2::zeros(grid.shape()),
        }
    }

    /// Samples `f(x_m, t_n)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = Array2::from_shape_fn(grid.shape(), |(m, n)| f(grid.x(m), grid.t(n)));
        Self::from_array(grid, values)
    }

    pub fn from_array(grid: Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(shape_err(
                format!("{:?}", grid.shape()),
                format!("{:?}", values.dim()),
            ));
        }
        if let Some(((m, n), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "field value {v} at node ({m}, {n})"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.values[[m, n]]
    }

    /// Time history `u_m^0 ..= u_m^{nt}` at space index `m`.
    pub fn history(&self, m: usize) -> &[f64] {
        let row = self.values.row(m);
        row.to_slice()
            .expect("fields are stored in standard layout")
    }

    /// Spatial profile `u_0^n ..= u_{nx}^n` at time index `n`.
    pub fn column(&self, n: usize) -> Vec<f64> {
        self.values.column(n).to_vec()
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(shape_err(
                format!("{:?}", self.grid),
                format!("{:?}", other.grid),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_steps_and_nodes() {
        let g = Grid::unit_square(100).unwrap();
        assert_eq!(g.hx() * 100.0, 1.0);
        assert_eq!(g.tau() * 100.0, 1.0);
        assert_eq!(g.x(100), 1.0);
        assert!((0..100).all(|m| g.x(m) < g.x(m + 1)));
        assert_eq!(g.masked_count(), 9900);
        assert_eq!(g.masked_nodes().count(), 9900);
        assert_eq!(g.masked_nodes().next(), Some((1, 1)));
    }

    #[test]
    fn grid_rejects_degenerate() {
        assert!(Grid::new(1.0, 1.0, 1, 10).is_err());
        assert!(Grid::new(1.0, 1.0, 10, 0).is_err());
        assert!(Grid::new(-1.0, 1.0, 10, 10).is_err());
    }

    #[test]
    fn field_rejects_nan_and_bad_shape() {
        let g = Grid::unit_square(4).unwrap();
        assert!(Field::from_fn(g, |x, _| if x > 0.5 { f64::NAN } else { 0.0 }).is_err());
        assert!(Field::from_array(g, Array2::zeros((4, 5))).is_err());
        let f = Field::from_fn(g, |x, t| x + 10.0 * t).unwrap();
        assert_eq!(f.history(2), &[0.5, 3.0, 5.5, 8.0, 10.5]);
    }
}
