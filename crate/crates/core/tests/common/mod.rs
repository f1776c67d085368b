//! Independent oracles and random instance generators shared by the
//! integration tests. Nothing here calls the crate's Lyapunov solver.
#![allow(dead_code)]

use ccd_core::discretization::{closed_loop_matrix, GridConfig};
use ccd_core::model::{theorem1_margins, DesignPoint};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `AᵀP + PA + Q = 0` as one dense `n² × n²` linear system.
pub fn kron_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let x = op.lu().solve(&rhs).expect("Kronecker operator is nonsingular for Hurwitz A");
    DMatrix::from_column_slice(n, n, x.as_slice())
}

/// Spectral abscissa from nalgebra's own eigenvalue routine.
pub fn oracle_abscissa(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Random Hurwitz matrix: a random matrix shifted either by its Gershgorin
/// bound or just past its measured abscissa, the latter keeping complex
/// pairs and strongly non-normal structure.
pub fn random_hurwitz(r: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::<f64>::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
    if r.gen_bool(0.5) {
        let radius = (0..n).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        m - DMatrix::identity(n, n) * (radius + r.gen_range(0.1..1.0))
    } else {
        let shift = oracle_abscissa(&m) + r.gen_range(0.2..2.0);
        m - DMatrix::identity(n, n) * shift
    }
}

/// `G Gᵀ`, optionally plus a multiple of the identity.
pub fn random_psd(r: &mut impl Rng, n: usize, definite: bool) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
    let mut q = &g * g.transpose();
    if definite {
        q += DMatrix::identity(n, n) * r.gen_range(0.1..1.0);
    }
    q
}

/// `∫₀^∞ xᵀQx dt` for `ẋ = Ax`, classical RK4 on the state augmented with
/// the running cost, stopped once `‖x‖ ≤ 1e-8 ‖x₀‖`. The step keeps
/// `h·|λ| ≤ 0.02` for every eigenvalue.
pub fn rk4_cost(a: &DMatrix<f64>, q: &DMatrix<f64>, x0: &DVector<f64>) -> f64 {
    let radius = a.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(1.0, f64::max);
    let h = 0.02 / radius;
    let f = |x: &DVector<f64>| (a * x, x.dot(&(q * x)));
    let mut x = x0.clone();
    let mut cost = 0.0;
    let stop = 1e-8 * x0.norm();
    while x.norm() > stop {
        let (k1, c1) = f(&x);
        let (k2, c2) = f(&(&x + &k1 * (0.5 * h)));
        let (k3, c3) = f(&(&x + &k2 * (0.5 * h)));
        let (k4, c4) = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        cost += (c1 + 2.0 * c2 + 2.0 * c3 + c4) * (h / 6.0);
    }
    cost
}

/// `J0(x) = (1/π) ∫₀^π cos(x sin θ) dθ`; the trapezoid rule converges
/// geometrically on this periodic integrand.
pub fn bessel_j0_integral(x: f64) -> f64 {
    let m = 400;
    let h = std::f64::consts::PI / m as f64;
    // Both endpoints contribute cos(0) = 1 with weight ½.
    let mut s = 1.0;
    for i in 1..m {
        s += (x * (i as f64 * h).sin()).cos();
    }
    s * h / std::f64::consts::PI
}

/// Margins at most `-delta` and a closed loop on `grid` whose abscissa,
/// measured by nalgebra, is below `-delta` as well.
pub fn in_d_with_buffer(p: &DesignPoint, grid: &GridConfig, delta: f64) -> bool {
    theorem1_margins(p).theorem_ok_with_buffer(delta) && oracle_abscissa(&closed_loop_matrix(p, grid)) < -delta
}

/// Rejection-samples a design point with all four variables free that
/// stays feasible under perturbations of size about `delta`.
pub fn random_feasible_point(r: &mut impl Rng, grid: &GridConfig, delta: f64) -> DesignPoint {
    loop {
        let a = r.gen_range(0.5..20.0);
        let p = DesignPoint::new(
            a,
            r.gen_range(-3.0..(0.2 * a)),
            r.gen_range(-0.8..10.0),
            r.gen_range(-10.0..-0.5),
        );
        if in_d_with_buffer(&p, grid, delta) {
            return p;
        }
    }
}
