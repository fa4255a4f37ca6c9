use std::f64::consts::PI;

use dirac_edge::analytic::{gap_eigenvalue, gap_state, q_matrix, sigma_edge_analytic, slope_law, current_expectation};
use dirac_edge::discrete::{assemble_fiber, Grid1D};
use dirac_edge::{z_from_zeta, zeta_from_z, BoundaryParam, EnergyWindow, PhysParams, SwitchFunction, SwitchProfile, Zeta};
use num_complex::Complex64;
use proptest::prelude::*;

fn mass() -> impl Strategy<Value = f64> {
    prop_oneof![0.2f64..3.0, -3.0f64..-0.2]
}

fn zeta() -> impl Strategy<Value = f64> {
    prop_oneof![-5.0f64..5.0, Just(0.0), Just(1.0), Just(-1.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn z_zeta_round_trip(phi in -PI..PI) {
        let z = Complex64::from_polar(1.0, phi);
        let back = z_from_zeta(zeta_from_z(z).unwrap());
        prop_assert!((back - z).norm() < 1e-10);
    }
}

proptest! {
    #[test]
    fn zeta_z_round_trip(z in -50.0f64..50.0) {
        let back = zeta_from_z(z_from_zeta(Zeta::Finite(z))).unwrap();
        let b = back.finite().unwrap();
        prop_assert!((b - z).abs() < 1e-9 * (1.0 + z * z));
    }

    #[test]
    fn gap_states_carry_no_normal_current(m in mass(), z in zeta(), k in -4.0f64..4.0) {
        let p = PhysParams::natural(m);
        let bc = BoundaryParam::finite(z);
        if let Ok(s) = gap_state(k, &p, &bc) {
            prop_assert!(s.spinor.normal_current().abs() < 1e-12);
            prop_assert!((current_expectation(&s) - slope_law(&bc)).abs() < 1e-10);
        }
    }

    #[test]
    fn opposite_boundaries_sum_to_mass_sign(m in mass(), z in zeta()) {
        prop_assume!(z != 0.0);
        let p = PhysParams::natural(m);
        let a = sigma_edge_analytic(&p, &BoundaryParam::finite(z));
        let b = sigma_edge_analytic(&p, &BoundaryParam::finite(-z));
        prop_assert_eq!(a + b, m.signum() as i32);
    }

    #[test]
    fn sign_flip_symmetry(m in mass(), z in zeta(), k in -4.0f64..4.0) {
        let p = PhysParams::natural(m);
        let q = PhysParams::natural(-m);
        let a = gap_eigenvalue(k, &p, &BoundaryParam::finite(z));
        let b = gap_eigenvalue(k, &q, &BoundaryParam::finite(-z));
        prop_assert_eq!(a.has_gap_state, b.has_gap_state);
        if let (Some(x), Some(y)) = (a.e_g, b.e_g) {
            prop_assert!((x + y).abs() < 1e-12 * (1.0 + x.abs()));
        }
        prop_assert_eq!(
            sigma_edge_analytic(&p, &BoundaryParam::finite(z)),
            -sigma_edge_analytic(&q, &BoundaryParam::finite(-z))
        );
    }

    #[test]
    fn symbol_squares_to_energy(m in mass(), k in -4.0f64..4.0, e_frac in -0.99f64..0.99) {
        let p = PhysParams::natural(m);
        let e = e_frac * m.abs();
        let kappa = (k * k + m * m - e * e).sqrt();
        let q = q_matrix(k, kappa, &p);
        for i in 0..2 {
            for j in 0..2 {
                let s = q[i][0] * q[0][j] + q[i][1] * q[1][j];
                let want = if i == j { e * e } else { 0.0 };
                prop_assert!((s - want).norm() < 1e-12 * (1.0 + k * k + m * m));
            }
        }
    }

    #[test]
    fn fibers_are_hermitian(m in mass(), z in zeta(), k in -3.0f64..3.0, r in 0.5f64..2.0) {
        let p = PhysParams::natural(m);
        let h = 0.1 / m.abs();
        let a = assemble_fiber(k, &p, &BoundaryParam::finite(z), None, &Grid1D::new(h, 40).unwrap(), r).unwrap();
        prop_assert!(a.hermiticity_defect() < 1e-13);
        let inf = assemble_fiber(k, &p, &BoundaryParam::infinite(), None, &Grid1D::new(h, 40).unwrap(), r).unwrap();
        prop_assert!(inf.hermiticity_defect() < 1e-13);
    }

    #[test]
    fn switch_functions_are_monotone(lo in -0.9f64..0.0, width in 0.05f64..0.9, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let w = EnergyWindow::new(lo, lo + width).unwrap();
        let (x, y) = (lo - 0.1 + a * (width + 0.2), lo - 0.1 + b * (width + 0.2));
        for profile in SwitchProfile::ALL {
            let g = SwitchFunction::new(profile, w);
            let (gx, gy) = (g.value(x), g.value(y));
            prop_assert!((0.0..=1.0).contains(&gx));
            if x <= y {
                prop_assert!(gx <= gy + 1e-15);
            }
            prop_assert!(g.derivative(x) >= 0.0);
        }
    }

    #[test]
    fn boundary_param_serde_round_trip(z in zeta()) {
        let bc = BoundaryParam::finite(z);
        let s = serde_json::to_string(&bc).unwrap();
        let back: BoundaryParam = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back.zeta(), bc.zeta());
    }
}
