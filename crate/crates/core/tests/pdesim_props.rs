mod common;

use ccd_core::cli::preset;
use ccd_core::discretization::{assemble, sample_initial_field, GridConfig, X0Mode};
use ccd_core::lyapunov::{max_real_eig, solve_lyapunov};
use ccd_core::optimizer::run_ccd;
use ccd_core::pdesim::{simulate, simulate_matrix, trapezoid, Scheme, SimConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn schemes_agree_to_first_order(seed in any::<u64>(), n in 4usize..=8) {
        let mut r = common::rng(seed);
        let p = common::random_feasible_point(&mut r, &GridConfig::new(n).unwrap(), 1e-6);
        let end_gap = |nt: usize| {
            let run = |scheme| {
                let sim = SimConfig { t_final: 0.05, nt, n, scheme };
                simulate(&p, &sim).unwrap().slice(nt)
            };
            (run(Scheme::CrankNicolson) - run(Scheme::BackwardEuler)).norm()
        };
        let coarse = end_gap(1000);
        let fine = end_gap(4000);
        prop_assert!(fine * 3.0 <= coarse, "{p:?}: {coarse} -> {fine}");
    }

    #[test]
    fn margin_feasible_points_dissipate_energy(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let sim = SimConfig::default();
        let p = common::random_feasible_point(&mut r, &sim.grid(), 0.0);
        let sol = simulate(&p, &sim).unwrap();
        for j in 0..sim.nt {
            prop_assert!(sol.energy[j + 1] <= sol.energy[j] + 1e-10, "{p:?} step {j}");
        }
    }

    #[test]
    fn first_slice_is_sampled_field(n in 3usize..60, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let sim = SimConfig { n, nt: 3, ..SimConfig::default() };
        let p = common::random_feasible_point(&mut r, &sim.grid(), 0.0);
        prop_assert_eq!(simulate(&p, &sim).unwrap().slice(0), sample_initial_field(&sim.grid()));
    }
}

/// Simulated `∫ XᵀQ̃X dt` against `x₀ᵀ P x₀` at each case optimum.
#[test]
fn lyapunov_cost_matches_simulated_quadratic_form() {
    let grid = GridConfig::new(26).unwrap();
    for name in ["case1-hom", "case2-hom", "case3-nonhom"] {
        let spec = preset(name).unwrap();
        let (out, _) = run_ccd(&spec.p0, &spec.weights, &grid, X0Mode::Identity, &spec.optimizer).unwrap();
        let p = out.p_star;
        let sys = assemble(&p, &spec.weights, &grid, X0Mode::OuterProductOfInitialField).unwrap();
        let qt = sys.qtilde();
        let x0 = sample_initial_field(&grid);
        let lyap = x0.dot(&(solve_lyapunov(&sys.a, &qt).unwrap().p * &x0));

        let sim = SimConfig { t_final: 200.0, nt: 200_000, n: 26, scheme: Scheme::CrankNicolson };
        let sol = simulate_matrix(&sys.a, &x0, &sim).unwrap();
        let integrand: Vec<f64> = (0..=sim.nt)
            .map(|j| {
                let x = sol.field.column(j);
                x.dot(&(&qt * x))
            })
            .collect();
        let quad = trapezoid(&integrand, sim.dt());
        let xt = sol.slice(sim.nt);
        let tail = xt.norm_squared() * qt.norm() / (2.0 * max_real_eig(&sys.a).unwrap().abs());
        assert!(tail < 1e-3 * quad, "{name}: tail {tail}");
        assert!((quad - lyap).abs() <= 0.01 * lyap, "{name}: {quad} vs {lyap}");
    }
}
