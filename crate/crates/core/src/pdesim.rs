//! Time-domain validation: integrate `Ẋ = A X` with an implicit one-step
//! scheme, track the energy `V = ½∫x²`, and evaluate the original double
//! integral cost by trapezoid quadrature in space and time.

use nalgebra::{DMatrix, DVector};

use crate::discretization::{closed_loop_matrix, sample_initial_field, GridConfig};
use crate::error::{CcdError, Result};
use crate::lyapunov::SchurFactor;
use crate::model::{theorem1_margins, DesignPoint, Weights};

/// Relative end-state bound for a run to count as decayed.
pub const DECAY_RATIO: f64 = 1e-4;
/// Leading steps excluded from the monotone-energy check.
pub const TRANSIENT_STEPS: usize = 5;
/// Allowed per-step energy increase after the transient.
pub const ENERGY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    CrankNicolson,
    #[default]
    BackwardEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_final: f64,
    pub nt: usize,
    pub n: usize,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_final: 200.0,
            nt: 500,
            n: 26,
            scheme: Scheme::BackwardEuler,
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn grid(&self) -> GridConfig {
        GridConfig { n: self.n }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid().validate()?;
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(CcdError::InvalidArgument(format!("T must be > 0, got {}", self.t_final)));
        }
        if self.nt == 0 {
            return Err(CcdError::InvalidArgument("nt must be >= 1".into()));
        }
        Ok(())
    }
}

/// Space-time samples `x(ξ_i, t_j)`; column `j` is the slice at `t_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub xi: Vec<f64>,
    pub times: Vec<f64>,
    pub field: DMatrix<f64>,
    /// `V(t_j) = ½ trapz_ξ(x²)`.
    pub energy: Vec<f64>,
    pub weights: DVector<f64>,
}

impl FieldSolution {
    pub fn slice(&self, j: usize) -> DVector<f64> {
        self.field.column(j).into_owned()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

pub fn simulate(p: &DesignPoint, sim: &SimConfig) -> Result<FieldSolution> {
    p.validate()?;
    sim.validate()?;
    let grid = sim.grid();
    simulate_matrix(&closed_loop_matrix(p, &grid), &sample_initial_field(&grid), sim)
}

/// Integrates an arbitrary `Ẋ = A X` from `x0` on the grid of `sim`.
pub fn simulate_matrix(a: &DMatrix<f64>, x0: &DVector<f64>, sim: &SimConfig) -> Result<FieldSolution> {
    sim.validate()?;
    let n = a.nrows();
    if a.ncols() != n || x0.len() != n || n != sim.n {
        return Err(CcdError::InvalidArgument(format!(
            "dimension mismatch: A is {}x{}, x0 has {}, grid has {}",
            a.nrows(),
            a.ncols(),
            x0.len(),
            sim.n
        )));
    }
    let dt = sim.dt();
    let eye = DMatrix::<f64>::identity(n, n);
    let (lhs, rhs) = match sim.scheme {
        Scheme::CrankNicolson => (&eye - a * (0.5 * dt), Some(&eye + a * (0.5 * dt))),
        Scheme::BackwardEuler => (&eye - a * dt, None),
    };
    let scale = lhs.amax();
    let lu = lhs.lu();
    let u = lu.u();
    if (0..n).any(|i| u[(i, i)].abs() <= f64::EPSILON * scale) {
        return Err(CcdError::SingularStep { dt });
    }

    let weights = sim.grid().trapezoid_weights();
    let mut field = DMatrix::zeros(n, sim.nt + 1);
    field.set_column(0, x0);
    let mut x = x0.clone();
    for j in 1..=sim.nt {
        let b = match &rhs {
            Some(r) => r * &x,
            None => x,
        };
        x = lu.solve(&b).ok_or(CcdError::SingularStep { dt })?;
        field.set_column(j, &x);
    }
    let energy = (0..=sim.nt)
        .map(|j| 0.5 * field.column(j).iter().zip(weights.iter()).map(|(v, w)| w * v * v).sum::<f64>())
        .collect();
    let solution = FieldSolution {
        xi: sim.grid().nodes(),
        times: (0..=sim.nt).map(|j| j as f64 * dt).collect(),
        field,
        energy,
        weights,
    };
    if solution.field.iter().any(|v| !v.is_finite()) {
        return Err(CcdError::NonFinite("simulated field"));
    }
    Ok(solution)
}

/// The original double-integral cost evaluated on a simulated field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCost {
    /// `∫∫ (q x² + r uᵀu) dξ dt` only.
    pub j_control: f64,
    /// `j_control + f_d`.
    pub j_total: f64,
    /// `j_control + T · f_d`, the alternative bookkeeping of the design term.
    pub j_total_time_scaled: f64,
}

pub fn cost_quadrature(sol: &FieldSolution, p: &DesignPoint, w: &Weights) -> PdeCost {
    let last = sol.xi.len() - 1;
    let integrand: Vec<f64> = (0..sol.times.len())
        .map(|j| {
            let col = sol.field.column(j);
            let state: f64 = col.iter().zip(sol.weights.iter()).map(|(v, wt)| wt * w.q * v * v).sum();
            let u1 = p.k1 * col[0];
            let u2 = p.k2 * col[last];
            state + w.r * (u1 * u1 + u2 * u2)
        })
        .collect();
    let j_control = trapezoid(&integrand, sol.dt());
    let fd = w.fd.value(p);
    let t_final = *sol.times.last().unwrap_or(&0.0);
    PdeCost {
        j_control,
        j_total: j_control + fd,
        j_total_time_scaled: j_control + t_final * fd,
    }
}

/// Uniform-spacing composite trapezoid rule.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub ok: bool,
    pub decay_ratio: f64,
    pub diagnostic: Option<String>,
}

/// End-state decay plus monotone energy after the initial transient.
pub fn check_decay(sol: &FieldSolution) -> DecayReport {
    let x0 = sol.slice(0).norm();
    let xt = sol.slice(sol.times.len() - 1).norm();
    let decay_ratio = if x0 > 0.0 { xt / x0 } else { 0.0 };
    let mut diagnostic = None;
    if !(xt <= DECAY_RATIO * x0) {
        diagnostic = Some(format!("‖X(T)‖/‖X(0)‖ = {decay_ratio:e} exceeds {DECAY_RATIO:e}"));
    } else if let Some(j) = (TRANSIENT_STEPS..sol.energy.len().saturating_sub(1))
        .find(|&j| sol.energy[j + 1] > sol.energy[j] + ENERGY_SLACK)
    {
        diagnostic = Some(format!(
            "energy increases at step {j}: {:e} -> {:e}",
            sol.energy[j],
            sol.energy[j + 1]
        ));
    }
    DecayReport {
        ok: diagnostic.is_none(),
        decay_ratio,
        diagnostic,
    }
}

/// Checks that a co-designed point stabilizes the simulated PDE: it must be
/// feasible on the simulation grid and its field must decay.
pub fn verify_corollary2(p: &DesignPoint, sim: &SimConfig) -> Result<DecayReport> {
    let margins = theorem1_margins(p);
    let a = closed_loop_matrix(p, &sim.grid());
    let hurwitz = SchurFactor::new(&a)?.is_hurwitz();
    let report = margins.with_hurwitz(hurwitz);
    if !report.in_d {
        return Ok(DecayReport {
            ok: false,
            decay_ratio: f64::NAN,
            diagnostic: Some(format!("not in the feasible set: {}", report.violations().join("; "))),
        });
    }
    Ok(check_decay(&simulate(p, sim)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_basics() {
        assert_eq!(trapezoid(&[], 1.0), 0.0);
        assert_eq!(trapezoid(&[3.0], 1.0), 0.0);
        assert_eq!(trapezoid(&[1.0, 1.0, 1.0], 0.5), 1.0);
        // x² on [0, 1] with h = 1/2: (0 + 2·0.25 + 1)/4
        assert_eq!(trapezoid(&[0.0, 0.25, 1.0], 0.5), 0.375);
    }

    #[test]
    fn first_slice_is_initial_field() {
        let sim = SimConfig { nt: 10, ..SimConfig::default() };
        let sol = simulate(&DesignPoint::new(10.0, 0.0, 7.0, -5.0), &sim).unwrap();
        assert_eq!(sol.slice(0), sample_initial_field(&sim.grid()));
        assert_eq!(sol.field.ncols(), 11);
        assert_eq!(sol.times[10], 200.0);
    }

    #[test]
    fn uncontrolled_plant_keeps_mean_mode() {
        // A is symmetric with zero row sums, so 1ᵀx is conserved and the field
        // relaxes to its nodal mean; the energy settles at that constant's.
        let sim = SimConfig::default();
        let sol = simulate(&DesignPoint::new(10.0, 0.0, 0.0, 0.0), &sim).unwrap();
        let mean = sol.slice(0).mean();
        let ratio = sol.energy[sim.nt] / sol.energy[0];
        assert!((ratio - 0.5 * mean * mean / sol.energy[0]).abs() < 1e-9, "ratio {ratio}");
        assert!(ratio > 0.5);
    }

    #[test]
    fn initial_gains_stabilize() {
        let sol = simulate(&DesignPoint::new(10.0, 0.0, 7.0, -5.0), &SimConfig::default()).unwrap();
        assert!(sol.slice(500).norm() <= 1e-6 * sol.slice(0).norm());
    }

    #[test]
    fn reaction_term_alone_dissipates() {
        let sol = simulate(&DesignPoint::new(10.0, -1.0, 0.0, 0.0), &SimConfig::default()).unwrap();
        assert!(sol.energy.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn zero_field_costs_only_design_term() {
        let sim = SimConfig { nt: 4, ..SimConfig::default() };
        let a = DMatrix::from_diagonal_element(sim.n, sim.n, -1.0);
        let sol = simulate_matrix(&a, &DVector::zeros(sim.n), &sim).unwrap();
        let w = Weights { fd: crate::model::DesignObjective::SquareOfA, ..Weights::default() };
        let p = DesignPoint::new(3.0, 0.0, 1.0, -1.0);
        let c = cost_quadrature(&sol, &p, &w);
        assert_eq!(c.j_control, 0.0);
        assert_eq!(c.j_total, 9.0);
        assert_eq!(c.j_total_time_scaled, 1800.0);
    }

    #[test]
    fn synthetic_decay_passes() {
        let sim = SimConfig::default();
        let a = DMatrix::from_diagonal_element(sim.n, sim.n, -10.0);
        let sol = simulate_matrix(&a, &sample_initial_field(&sim.grid()), &sim).unwrap();
        let r = check_decay(&sol);
        assert!(r.ok, "{:?}", r.diagnostic);
    }

    #[test]
    fn corollary_check_rejects_infeasible() {
        let r = verify_corollary2(&DesignPoint::new(10.0, 0.0, 0.0, 0.0), &SimConfig::default()).unwrap();
        assert!(!r.ok);
        assert!(r.diagnostic.unwrap().contains("m3"));
    }

    #[test]
    fn singular_step_reported() {
        // I - dt A vanishes when A = I/dt.
        let sim = SimConfig { t_final: 1.0, nt: 1, n: 3, scheme: Scheme::BackwardEuler };
        let a = DMatrix::<f64>::identity(3, 3);
        assert_eq!(
            simulate_matrix(&a, &DVector::from_element(3, 1.0), &sim),
            Err(CcdError::SingularStep { dt: 1.0 })
        );
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { nt: 0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { t_final: -1.0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { n: 2, ..SimConfig::default() }.validate().is_err());
    }
}
