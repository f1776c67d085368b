mod common;

use ccd_core::discretization::{assemble, input_matrix, GridConfig, X0Mode};
use ccd_core::lyapunov::{cost_jf, solve_lyapunov, SchurFactor};
use ccd_core::model::{DesignObjective, DesignPoint, Var, Weights};
use ccd_core::sensitivity::{gradient_jf, param_derivatives, sensitivity_p_design, sensitivity_p_gain};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn jf(p: &DesignPoint, w: &Weights, grid: &GridConfig, mode: X0Mode) -> f64 {
    let sys = assemble(p, w, grid, mode).unwrap();
    cost_jf(&sys, p, w).unwrap().jf
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>(), n in 4usize..=8, square in any::<bool>(), outer in any::<bool>()) {
        let mut r = common::rng(seed);
        let grid = GridConfig::new(n).unwrap();
        let p = common::random_feasible_point(&mut r, &grid, 1e-3);
        let w = Weights { fd: if square { DesignObjective::SquareOfA } else { DesignObjective::Zero }, ..Weights::default() };
        let mode = if outer { X0Mode::OuterProductOfInitialField } else { X0Mode::Identity };
        let sys = assemble(&p, &w, &grid, mode).unwrap();
        let ev = cost_jf(&sys, &p, &w).unwrap();
        let g = gradient_jf(&p, &w, &sys, &ev).unwrap();
        let h = 1e-5;
        for var in Var::ALL {
            let at = |d: f64| {
                let mut v = p.to_array();
                v[var as usize] += d;
                jf(&p.from_array(v), &w, &grid, mode)
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let an = g.g[var as usize];
            prop_assert!((an - fd).abs() <= (1e-5 * an.abs()).max(1e-8), "{:?} {}: {} vs {}", p, var.name(), an, fd);
        }
    }

    #[test]
    fn sensitivities_are_linear_and_symmetric(seed in any::<u64>(), n in 3usize..=16) {
        let mut r = common::rng(seed);
        let grid = GridConfig::new(n).unwrap();
        let p = common::random_feasible_point(&mut r, &grid, 1e-6);
        let w = Weights::default();
        let sys = assemble(&p, &w, &grid, X0Mode::Identity).unwrap();
        let ev = cost_jf(&sys, &p, &w).unwrap();
        let d = param_derivatives(&p, &grid);
        for var in Var::ALL {
            let da = d.da(var);
            let (one, two) = match d.dk(var) {
                Some(dk) => (
                    sensitivity_p_gain(&ev.factor, &ev.solution.p, da, &sys.k, dk, &sys.rd).unwrap(),
                    sensitivity_p_gain(&ev.factor, &ev.solution.p, &(da * 2.0), &sys.k, &(dk * 2.0), &sys.rd).unwrap(),
                ),
                None => (
                    sensitivity_p_design(&ev.factor, &ev.solution.p, da).unwrap(),
                    sensitivity_p_design(&ev.factor, &ev.solution.p, &(da * 2.0)).unwrap(),
                ),
            };
            let scale = one.dp.norm();
            prop_assert!((&two.dp - &one.dp * 2.0).norm() <= 1e-12 * 2.0 * scale);
            prop_assert_eq!(&one.dp, &one.dp.transpose());
            prop_assert!(one.asymmetry <= 1e-10 * scale, "{}: {} vs {}", var.name(), one.asymmetry, scale);
        }
    }

    #[test]
    fn gain_derivatives_factor_through_input_matrix(a in -20.0..20.0f64, b in -5.0..5.0f64, k1 in -10.0..10.0f64, k2 in -10.0..10.0f64, n in 3usize..64) {
        let grid = GridConfig::new(n).unwrap();
        let p = DesignPoint::new(a, b, k1, k2);
        let d = param_derivatives(&p, &grid);
        let bm = input_matrix(a, &grid);
        prop_assert_eq!(&d.da_dk1, &(&bm * &d.dk_dk1));
        prop_assert_eq!(&d.da_dk2, &(&bm * &d.dk_dk2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn design_sensitivity_matches_perturbed_solves(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let n = 6;
        let a = common::random_hurwitz(&mut r, n);
        let q = common::random_psd(&mut r, n, true);
        let da = DMatrix::<f64>::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
        let factor = SchurFactor::new(&a).unwrap();
        let p = solve_lyapunov(&a, &q).unwrap().p;
        let dp = sensitivity_p_design(&factor, &p, &da).unwrap().dp;
        let h = 1e-5;
        let plus = solve_lyapunov(&(&a + &da * h), &q).unwrap().p;
        let minus = solve_lyapunov(&(&a - &da * h), &q).unwrap().p;
        let fd = (plus - minus) / (2.0 * h);
        prop_assert!((&dp - &fd).norm() <= 1e-5 * fd.norm(), "{} vs {}", dp.norm(), fd.norm());
    }
}
