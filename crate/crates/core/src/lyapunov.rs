//! Dense continuous Lyapunov solver `AᵀP + PA + Q̃ = 0` (Bartels–Stewart),
//! Hurwitz test, and the reformulated cost `J_f = f_d + tr(P X0)`.
//!
//! `A` is reduced once to real Schur form `A = Z T Zᵀ`; the factor is reused
//! for the Hurwitz test, the cost solve and every sensitivity solve at the
//! same design point.

use std::ops::Range;

use nalgebra::{Cholesky, Complex, DMatrix};

use crate::discretization::DiscreteSystem;
use crate::error::{CcdError, Result};
use crate::model::{DesignPoint, Weights};

/// `A` counts as Hurwitz only when `max Re λ < HURWITZ_THRESHOLD`.
pub const HURWITZ_THRESHOLD: f64 = -1e-12;

const SCHUR_BASE_ITERS: usize = 1000;

#[derive(Debug, Clone)]
pub struct SchurFactor {
    z: DMatrix<f64>,
    t: DMatrix<f64>,
    blocks: Vec<Range<usize>>,
    eigenvalues: Vec<Complex<f64>>,
}

impl SchurFactor {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(CcdError::InvalidArgument(format!(
                "expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(CcdError::NonFinite("matrix passed to Schur reduction"));
        }
        let n = a.nrows();
        let budget = SCHUR_BASE_ITERS + 100 * n;
        let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, budget)
            .ok_or(CcdError::SchurNoConvergence(budget))?;
        let (z, t) = schur.unpack();

        let mut blocks = Vec::new();
        let mut eigenvalues = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)] != 0.0 {
                let (l1, l2) = block_eigenvalues(t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
                eigenvalues.push(l1);
                eigenvalues.push(l2);
                blocks.push(i..i + 2);
                i += 2;
            } else {
                eigenvalues.push(Complex::new(t[(i, i)], 0.0));
                blocks.push(i..i + 1);
                i += 1;
            }
        }
        Ok(Self { z, t, blocks, eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn eigenvalues(&self) -> &[Complex<f64>] {
        &self.eigenvalues
    }

    pub fn max_real_eig(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_hurwitz(&self) -> bool {
        self.max_real_eig() < HURWITZ_THRESHOLD
    }

    /// Solves `AᵀX + XA + Q = 0` without symmetrizing the result.
    pub fn solve_unsymmetrized(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if q.nrows() != n || q.ncols() != n {
            return Err(CcdError::InvalidArgument(format!(
                "forcing is {}x{}, expected {n}x{n}",
                q.nrows(),
                q.ncols()
            )));
        }
        let c = self.z.transpose() * q * &self.z;
        let t = &self.t;
        let scale = t.amax().max(f64::MIN_POSITIVE);
        let mut x = DMatrix::<f64>::zeros(n, n);

        // Tᵀ is lower quasi-triangular, so block (I, J) only needs rows above I
        // in column J and columns left of J in row I.
        for bi in &self.blocks {
            for bj in &self.blocks {
                let m = bi.len();
                let k = bj.len();
                let mut rhs = [[0.0f64; 2]; 2];
                for (ai, r) in bi.clone().enumerate() {
                    for (aj, s) in bj.clone().enumerate() {
                        let mut v = -c[(r, s)];
                        for l in 0..bi.start {
                            v -= t[(l, r)] * x[(l, s)];
                        }
                        for l in 0..bj.start {
                            v -= x[(r, l)] * t[(l, s)];
                        }
                        rhs[ai][aj] = v;
                    }
                }
                let y = solve_small_sylvester(t, bi, bj, rhs, scale)
                    .ok_or(CcdError::SingularSylvester { row: bi.start, col: bj.start })?;
                for ai in 0..m {
                    for aj in 0..k {
                        x[(bi.start + ai, bj.start + aj)] = y[ai][aj];
                    }
                }
            }
        }
        Ok(&self.z * x * self.z.transpose())
    }

    /// Solves `AᵀP + PA + Q̃ = 0`, symmetrizes, and reports the residual.
    pub fn solve(&self, a: &DMatrix<f64>, qtilde: &DMatrix<f64>) -> Result<LyapunovSolution> {
        let raw = self.solve_unsymmetrized(qtilde)?;
        let asymmetry = (&raw - raw.transpose()).norm();
        let p = symmetrize(&raw);
        let residual_norm = lyapunov_residual(a, &p, qtilde).norm();
        let positive_definite = Cholesky::new(p.clone()).is_some();
        Ok(LyapunovSolution {
            p,
            residual_norm,
            positive_definite,
            asymmetry,
        })
    }
}

/// Eigenvalues of `[[p, q], [r, s]]`.
fn block_eigenvalues(p: f64, q: f64, r: f64, s: f64) -> (Complex<f64>, Complex<f64>) {
    let half_tr = 0.5 * (p + s);
    let half_diff = 0.5 * (p - s);
    let disc = half_diff * half_diff + q * r;
    if disc >= 0.0 {
        let d = disc.sqrt();
        (Complex::new(half_tr + d, 0.0), Complex::new(half_tr - d, 0.0))
    } else {
        let d = (-disc).sqrt();
        (Complex::new(half_tr, d), Complex::new(half_tr, -d))
    }
}

/// `T_IIᵀ Y + Y T_JJ = R` for blocks of size 1 or 2, via the vectorized
/// (at most 4×4) system with partial pivoting.
fn solve_small_sylvester(
    t: &DMatrix<f64>,
    bi: &Range<usize>,
    bj: &Range<usize>,
    rhs: [[f64; 2]; 2],
    scale: f64,
) -> Option<[[f64; 2]; 2]> {
    let m = bi.len();
    let k = bj.len();
    let dim = m * k;
    // Unknown (a, b) lives at index a + m*b.
    let mut mat = [[0.0f64; 4]; 4];
    let mut vec = [0.0f64; 4];
    for b in 0..k {
        for a in 0..m {
            let row = a + m * b;
            vec[row] = rhs[a][b];
            for a2 in 0..m {
                mat[row][a2 + m * b] += t[(bi.start + a2, bi.start + a)];
            }
            for b2 in 0..k {
                mat[row][a + m * b2] += t[(bj.start + b2, bj.start + b)];
            }
        }
    }

    let tiny = 4.0 * f64::EPSILON * scale;
    for col in 0..dim {
        let piv = (col..dim)
            .max_by(|&i, &j| mat[i][col].abs().total_cmp(&mat[j][col].abs()))
            .unwrap();
        if mat[piv][col].abs() <= tiny {
            return None;
        }
        mat.swap(col, piv);
        vec.swap(col, piv);
        for row in col + 1..dim {
            let f = mat[row][col] / mat[col][col];
            if f != 0.0 {
                for c in col..dim {
                    mat[row][c] -= f * mat[col][c];
                }
                vec[row] -= f * vec[col];
            }
        }
    }
    let mut sol = [0.0f64; 4];
    for row in (0..dim).rev() {
        let mut v = vec[row];
        for c in row + 1..dim {
            v -= mat[row][c] * sol[c];
        }
        sol[row] = v / mat[row][row];
    }

    let mut y = [[0.0f64; 2]; 2];
    for b in 0..k {
        for a in 0..m {
            y[a][b] = sol[a + m * b];
        }
    }
    Some(y)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `AᵀP + PA + Q̃`.
pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>, qtilde: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * p + p * a + qtilde
}

#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub p: DMatrix<f64>,
    /// Frobenius norm of `AᵀP + PA + Q̃`.
    pub residual_norm: f64,
    pub positive_definite: bool,
    /// `‖X − Xᵀ‖_F` of the raw back-substituted solution.
    pub asymmetry: f64,
}

pub fn max_real_eig(a: &DMatrix<f64>) -> Result<f64> {
    Ok(SchurFactor::new(a)?.max_real_eig())
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> Result<bool> {
    Ok(SchurFactor::new(a)?.is_hurwitz())
}

/// Refuses non-Hurwitz `A`: the equation then has no PSD solution in general.
pub fn solve_lyapunov(a: &DMatrix<f64>, qtilde: &DMatrix<f64>) -> Result<LyapunovSolution> {
    let factor = SchurFactor::new(a)?;
    if !factor.is_hurwitz() {
        return Err(CcdError::NotHurwitz { max_re: factor.max_real_eig() });
    }
    factor.solve(a, qtilde)
}

/// Cost at one design point, bundled with everything the gradient reuses.
#[derive(Debug, Clone)]
pub struct CostEvaluation {
    pub jf: f64,
    pub solution: LyapunovSolution,
    pub factor: SchurFactor,
}

pub fn cost_jf(sys: &DiscreteSystem, p: &DesignPoint, w: &Weights) -> Result<CostEvaluation> {
    let factor = SchurFactor::new(&sys.a)?;
    if !factor.is_hurwitz() {
        return Err(CcdError::NotHurwitz { max_re: factor.max_real_eig() });
    }
    let solution = factor.solve(&sys.a, &sys.qtilde())?;
    let jf = w.fd.value(p) + solution.p.dot(&sys.x0);
    Ok(CostEvaluation { jf, solution, factor })
}
