//! Analytic gradient of `J_f` through sensitivity Lyapunov equations.
//!
//! Differentiating `AᵀP + PA + Q̃ = 0` with respect to a parameter θ gives
//! another Lyapunov equation in `∂P/∂θ` with the same `A`, so every
//! sensitivity reuses the Schur factor from the cost evaluation.

use nalgebra::DMatrix;

use crate::discretization::{gain_matrix, DiscreteSystem, GridConfig};
use crate::error::Result;
use crate::lyapunov::{symmetrize, CostEvaluation, SchurFactor};
use crate::model::{DesignPoint, Var, Weights};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDerivatives {
    pub da_da: DMatrix<f64>,
    pub da_db: DMatrix<f64>,
    pub da_dk1: DMatrix<f64>,
    pub da_dk2: DMatrix<f64>,
    pub dk_dk1: DMatrix<f64>,
    pub dk_dk2: DMatrix<f64>,
}

impl ParamDerivatives {
    pub fn da(&self, var: Var) -> &DMatrix<f64> {
        match var {
            Var::A => &self.da_da,
            Var::B => &self.da_db,
            Var::K1 => &self.da_dk1,
            Var::K2 => &self.da_dk2,
        }
    }

    pub fn dk(&self, var: Var) -> Option<&DMatrix<f64>> {
        match var {
            Var::K1 => Some(&self.dk_dk1),
            Var::K2 => Some(&self.dk_dk2),
            _ => None,
        }
    }
}

pub fn param_derivatives(p: &DesignPoint, grid: &GridConfig) -> ParamDerivatives {
    let n = grid.n;
    let h = grid.dxi();
    let h2 = h * h;

    let mut da_da = DMatrix::zeros(n, n);
    for i in 0..n {
        da_da[(i, i)] = -2.0 / h2;
        if i > 0 {
            da_da[(i, i - 1)] = 1.0 / h2;
        }
        if i + 1 < n {
            da_da[(i, i + 1)] = 1.0 / h2;
        }
    }
    da_da[(0, 0)] = (-1.0 - p.k1 * h) / h2;
    da_da[(n - 1, n - 1)] = (-1.0 + p.k2 * h) / h2;

    let mut da_dk1 = DMatrix::zeros(n, n);
    da_dk1[(0, 0)] = -p.a / h;
    let mut da_dk2 = DMatrix::zeros(n, n);
    da_dk2[(n - 1, n - 1)] = p.a / h;

    ParamDerivatives {
        da_da,
        da_db: DMatrix::identity(n, n),
        da_dk1,
        da_dk2,
        dk_dk1: gain_matrix(1.0, 0.0, n),
        dk_dk2: gain_matrix(0.0, 1.0, n),
    }
}

/// Sensitivity of `P` to a plant parameter: solves
/// `Aᵀ P' + P' A + ∂Aᵀ P + P ∂A = 0`.
pub fn sensitivity_p_design(
    factor: &SchurFactor,
    p: &DMatrix<f64>,
    da: &DMatrix<f64>,
) -> Result<SensitivitySolution> {
    let forcing = da.transpose() * p + p * da;
    solve_sensitivity(factor, &forcing)
}

/// Sensitivity of `P` to a feedback gain: the design forcing plus the
/// control-weight pair `∂Kᵀ Rd K + Kᵀ Rd ∂K`.
pub fn sensitivity_p_gain(
    factor: &SchurFactor,
    p: &DMatrix<f64>,
    da: &DMatrix<f64>,
    k: &DMatrix<f64>,
    dk: &DMatrix<f64>,
    rd: &DMatrix<f64>,
) -> Result<SensitivitySolution> {
    let kr = dk.transpose() * rd * k;
    let forcing = da.transpose() * p + p * da + &kr + kr.transpose();
    solve_sensitivity(factor, &forcing)
}

#[derive(Debug, Clone)]
pub struct SensitivitySolution {
    pub dp: DMatrix<f64>,
    /// `‖X − Xᵀ‖_F` before symmetrization.
    pub asymmetry: f64,
}

fn solve_sensitivity(factor: &SchurFactor, forcing: &DMatrix<f64>) -> Result<SensitivitySolution> {
    let raw = factor.solve_unsymmetrized(forcing)?;
    let asymmetry = (&raw - raw.transpose()).norm();
    Ok(SensitivitySolution {
        dp: symmetrize(&raw),
        asymmetry,
    })
}

/// `∂J_f/∂(a, b, k1, k2)` with frozen coordinates zeroed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub g: [f64; 4],
    pub norm: f64,
}

impl Gradient {
    pub fn from_components(g: [f64; 4], mask: [bool; 4]) -> Self {
        let mut g = g;
        for (gi, free) in g.iter_mut().zip(mask) {
            if !free {
                *gi = 0.0;
            }
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self { g, norm }
    }
}

pub fn gradient_jf(
    p: &DesignPoint,
    w: &Weights,
    sys: &DiscreteSystem,
    eval: &CostEvaluation,
) -> Result<Gradient> {
    let derivs = param_derivatives(p, &sys.grid);
    let pm = &eval.solution.p;
    let fd_grad = w.fd.gradient(p);
    let mut g = [0.0; 4];
    for var in Var::ALL {
        if !p.is_free(var) {
            continue;
        }
        let da = derivs.da(var);
        let sens = match derivs.dk(var) {
            Some(dk) => sensitivity_p_gain(&eval.factor, pm, da, &sys.k, dk, &sys.rd)?,
            None => sensitivity_p_design(&eval.factor, pm, da)?,
        };
        let trace = sens.dp.dot(&sys.x0);
        g[var as usize] = match var {
            Var::A => fd_grad[0] + trace,
            Var::B => fd_grad[1] + trace,
            _ => trace,
        };
    }
    Ok(Gradient::from_components(g, p.free_mask))
}
