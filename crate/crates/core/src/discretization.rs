//! Method-of-lines semi-discretization on a uniform grid with ghost-node
//! elimination of the Robin boundary conditions.
//!
//! Node `i` sits at `ξ_i = i Δξ`, `Δξ = 1/(N-1)`. Boundary rows use a
//! first-order one-sided difference, so `A = A0 + B K` where `A0` is the
//! pure-Neumann operator and `B K` carries the two feedback gains.

use nalgebra::{DMatrix, DVector};

use crate::error::{CcdError, Result};
use crate::model::{DesignPoint, Weights};

/// First zero of `J0`, used to shape the initial field `J0(n ξ)`.
pub const BESSEL_J0_FIRST_ZERO: f64 = 2.405;

const BESSEL_TERMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 26 }
    }
}

impl GridConfig {
    pub fn new(n: usize) -> Result<Self> {
        let g = Self { n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(CcdError::GridTooSmall(self.n));
        }
        Ok(())
    }

    pub fn dxi(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.dxi();
        (0..self.n).map(|i| i as f64 * h).collect()
    }

    /// Composite trapezoid weights on the nodes.
    pub fn trapezoid_weights(&self) -> DVector<f64> {
        let h = self.dxi();
        DVector::from_fn(self.n, |i, _| if i == 0 || i == self.n - 1 { 0.5 * h } else { h })
    }
}

/// How the initial-state weighting `X0` in `tr(P X0)` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum X0Mode {
    #[default]
    Identity,
    OuterProductOfInitialField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub a: DMatrix<f64>,
    pub a0: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub qd: DMatrix<f64>,
    pub rd: DMatrix<f64>,
    pub x0: DMatrix<f64>,
    pub grid: GridConfig,
}

impl DiscreteSystem {
    /// Total state weight `Qd + Kᵀ Rd K`.
    pub fn qtilde(&self) -> DMatrix<f64> {
        &self.qd + self.k.transpose() * &self.rd * &self.k
    }
}

/// Closed-loop matrix only; the hot path for trial points in the line search.
pub fn closed_loop_matrix(p: &DesignPoint, grid: &GridConfig) -> DMatrix<f64> {
    let n = grid.n;
    let h = grid.dxi();
    let h2 = h * h;
    let off = p.a / h2;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = (-2.0 * p.a + p.b * h2) / h2;
        if i > 0 {
            a[(i, i - 1)] = off;
        }
        if i + 1 < n {
            a[(i, i + 1)] = off;
        }
    }
    a[(0, 0)] = (-p.a - p.a * p.k1 * h + p.b * h2) / h2;
    a[(n - 1, n - 1)] = (-p.a + p.a * p.k2 * h + p.b * h2) / h2;
    a
}

fn open_loop_matrix(p: &DesignPoint, grid: &GridConfig) -> DMatrix<f64> {
    let open = DesignPoint { k1: 0.0, k2: 0.0, ..*p };
    closed_loop_matrix(&open, grid)
}

/// `N×2` input matrix mapping boundary fluxes into the end nodes.
pub fn input_matrix(a: f64, grid: &GridConfig) -> DMatrix<f64> {
    let n = grid.n;
    let h = grid.dxi();
    let mut b = DMatrix::zeros(n, 2);
    // (∓a Δξ)/Δξ² reduced to ∓a/Δξ
    b[(0, 0)] = -a / h;
    b[(n - 1, 1)] = a / h;
    b
}

/// `2×N` static output-feedback gain.
pub fn gain_matrix(k1: f64, k2: f64, n: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(2, n);
    k[(0, 0)] = k1;
    k[(1, n - 1)] = k2;
    k
}

/// `q (Δξ/2) diag(1/2, 1, …, 1, 1/2)`.
pub fn state_weight(q: f64, grid: &GridConfig) -> DMatrix<f64> {
    let n = grid.n;
    let h = grid.dxi();
    DMatrix::from_fn(n, n, |i, j| {
        if i != j {
            0.0
        } else if i == 0 || i == n - 1 {
            0.25 * q * h
        } else {
            0.5 * q * h
        }
    })
}

pub fn assemble(
    p: &DesignPoint,
    w: &Weights,
    grid: &GridConfig,
    x0_mode: X0Mode,
) -> Result<DiscreteSystem> {
    grid.validate()?;
    p.validate()?;
    let n = grid.n;
    let x0 = match x0_mode {
        X0Mode::Identity => DMatrix::identity(n, n),
        X0Mode::OuterProductOfInitialField => {
            let f = sample_initial_field(grid);
            &f * f.transpose()
        }
    };
    Ok(DiscreteSystem {
        a: closed_loop_matrix(p, grid),
        a0: open_loop_matrix(p, grid),
        b: input_matrix(p.a, grid),
        k: gain_matrix(p.k1, p.k2, n),
        qd: state_weight(w.q, grid),
        rd: DMatrix::identity(2, 2) * w.r,
        x0,
        grid: *grid,
    })
}

/// `J0(2.405 ξ_i)` on the grid nodes.
pub fn sample_initial_field(grid: &GridConfig) -> DVector<f64> {
    let h = grid.dxi();
    DVector::from_fn(grid.n, |i, _| bessel_j0(BESSEL_J0_FIRST_ZERO * i as f64 * h))
}

/// Order-zero Bessel function of the first kind, truncated power series
/// `Σ (-1)^m (x/2)^{2m} / (m!)²`. Accurate to well below 1e-10 for `|x| ≤ 3`.
pub fn bessel_j0(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..BESSEL_TERMS {
        let mf = m as f64;
        term *= -y / (mf * mf);
        sum += term;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_mat(actual: &DMatrix<f64>, expected: &[&[f64]], tol: f64) {
        for (i, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!(
                    (actual[(i, j)] - v).abs() <= tol,
                    "({i},{j}): {} vs {v}",
                    actual[(i, j)]
                );
            }
        }
    }

    #[test]
    fn three_node_neumann_stencil() {
        let grid = GridConfig::new(3).unwrap();
        let a = closed_loop_matrix(&DesignPoint::new(1.0, 0.0, 0.0, 0.0), &grid);
        assert_mat(&a, &[&[-4.0, 4.0, 0.0], &[4.0, -8.0, 4.0], &[0.0, 4.0, -4.0]], 1e-12);
    }

    #[test]
    fn left_gain_enters_first_diagonal() {
        let grid = GridConfig::new(3).unwrap();
        let a = closed_loop_matrix(&DesignPoint::new(1.0, 0.0, 1.0, 0.0), &grid);
        assert_mat(&a, &[&[-6.0, 4.0, 0.0], &[4.0, -8.0, 4.0], &[0.0, 4.0, -4.0]], 1e-12);
    }

    #[test]
    fn state_weight_four_nodes() {
        let grid = GridConfig::new(4).unwrap();
        let qd = state_weight(1.0, &grid);
        let expected = [1.0 / 12.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 12.0];
        for i in 0..4 {
            assert!((qd[(i, i)] - expected[i]).abs() < 1e-15);
        }
        assert_eq!(qd.iter().filter(|v| **v != 0.0).count(), 4);
    }

    #[test]
    fn rejects_tiny_grid() {
        assert_eq!(GridConfig::new(2), Err(CcdError::GridTooSmall(2)));
        let p = DesignPoint::new(1.0, 0.0, 0.0, 0.0);
        assert!(assemble(&p, &Weights::default(), &GridConfig { n: 2 }, X0Mode::Identity).is_err());
    }

    #[test]
    fn assembled_blocks() {
        let grid = GridConfig::new(5).unwrap();
        let p = DesignPoint::new(2.0, -1.0, 3.0, -4.0);
        let w = Weights { q: 2.0, r: 7.0, ..Weights::default() };
        let sys = assemble(&p, &w, &grid, X0Mode::Identity).unwrap();
        assert_eq!(sys.k[(0, 0)], 3.0);
        assert_eq!(sys.k[(1, 4)], -4.0);
        assert_eq!(sys.k.iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(sys.rd, DMatrix::identity(2, 2) * 7.0);
        assert_eq!(sys.x0, DMatrix::identity(5, 5));
        let diff = &sys.a - (&sys.a0 + &sys.b * &sys.k);
        assert!(diff.amax() < 1e-12 * sys.a.amax());
    }

    #[test]
    fn outer_product_x0() {
        let grid = GridConfig::new(6).unwrap();
        let p = DesignPoint::new(1.0, 0.0, 1.0, -1.0);
        let sys = assemble(&p, &Weights::default(), &grid, X0Mode::OuterProductOfInitialField).unwrap();
        let f = sample_initial_field(&grid);
        assert_eq!(sys.x0, &f * f.transpose());
        assert_eq!(sys.x0, sys.x0.transpose());
        // Rank one with a non-negative trace.
        assert!((sys.x0.trace() - f.norm_squared()).abs() < 1e-14);
    }

    #[test]
    fn initial_field_endpoints() {
        let grid = GridConfig::new(26).unwrap();
        let f = sample_initial_field(&grid);
        assert_eq!(f[0], 1.0);
        assert!(f[25].abs() < 5e-4);
    }

    #[test]
    fn j0_at_unit_argument_node() {
        // ξ = 1/2.405 lands on a node only for a tailored grid; evaluate directly.
        assert!((bessel_j0(BESSEL_J0_FIRST_ZERO * (1.0 / BESSEL_J0_FIRST_ZERO)) - 0.765198).abs() < 1e-6);
    }

    #[test]
    fn j0_examples() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert!(bessel_j0(2.405).abs() < 5e-4);
        assert!((bessel_j0(1.0) - 0.7651976866).abs() < 1e-9);
    }
}
