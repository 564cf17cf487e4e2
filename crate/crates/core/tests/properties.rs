use proptest::prelude::*;

use kpo_core::fockspace::coherent_state;
use kpo_core::lindblad::{evolve, make_ramp, Controls, Waveform};
use kpo_core::reflection::{ReflectionModel, DEFAULT_LEVELS};
use kpo_core::tomography::{ideal_gate_action, reconstruct, Gate, Measurements, QubitDensityMatrix};
use kpo_core::{DensityMatrix, KpoParams, C64};

fn bloch_state(r: f64, theta: f64, phi: f64) -> QubitDensityMatrix {
    let (x, y, z) = (r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos());
    let half = 0.5;
    QubitDensityMatrix::new([
        [C64::new(half * (1.0 + z), 0.0), C64::new(half * x, -half * y)],
        [C64::new(half * x, half * y), C64::new(half * (1.0 - z), 0.0)],
    ])
    .unwrap()
}

fn ideal_measurements(rho: &QubitDensityMatrix) -> Measurements {
    Measurements {
        d_z: rho.rho00(),
        d_x: ideal_gate_action(Gate::RxHalf, rho).rho00(),
        d_y: ideal_gate_action(Gate::RyHalf, rho).rho00(),
    }
}

proptest! {
    #[test]
    fn reconstruction_is_always_a_state(d_z in 0.0..=1.0f64, d_x in 0.0..=1.0f64, d_y in 0.0..=1.0f64) {
        let rho = reconstruct(&Measurements { d_z, d_x, d_y }).unwrap();
        prop_assert!(rho.min_eigenvalue() >= -1e-12);
        prop_assert!((rho.rho00() - d_z).abs() < 1e-15);
    }

    #[test]
    fn repair_is_idempotent(d_z in 0.0..=1.0f64, d_x in 0.0..=1.0f64, d_y in 0.0..=1.0f64) {
        let once = reconstruct(&Measurements { d_z, d_x, d_y }).unwrap();
        let twice = reconstruct(&ideal_measurements(&once)).unwrap();
        prop_assert!((once.rho01() - twice.rho01()).norm() < 1e-12);
        prop_assert!((once.fidelity(&twice) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ideal_readings_recover_the_state(r in 0.0..=1.0f64, theta in 0.0..std::f64::consts::PI, phi in 0.0..std::f64::consts::TAU) {
        let rho = bloch_state(r, theta, phi);
        let back = reconstruct(&ideal_measurements(&rho)).unwrap();
        prop_assert!((back.rho00() - rho.rho00()).abs() < 1e-12);
        prop_assert!((back.rho01() - rho.rho01()).norm() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in (0.0..=1.0f64, 0.0..3.2f64, 0.0..6.3f64), b in (0.0..=1.0f64, 0.0..3.2f64, 0.0..6.3f64)) {
        let (x, y) = (bloch_state(a.0, a.1, a.2), bloch_state(b.0, b.1, b.2));
        let (f, g) = (x.fidelity(&y), y.fidelity(&x));
        prop_assert!((f - g).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn zero_readout_error_changes_nothing(d_z in 0.0..=1.0f64, d_x in 0.0..=1.0f64, d_y in 0.0..=1.0f64) {
        let m = Measurements { d_z, d_x, d_y };
        let p = m.perturbed(0.0);
        prop_assert!((p.d_z - d_z).abs() < 1e-15 && (p.d_x - d_x).abs() < 1e-15 && (p.d_y - d_y).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gamma_is_affine_in_rho00(p in 2.0..12.0f64, omega in 0.05..0.8f64, offset in -0.05..0.05f64, r in 0.0..=1.0f64) {
        let params = KpoParams::new(p).with_drive(omega).with_losses(0.01, 0.005).with_dephasing(1e-3);
        let model = ReflectionModel::new(&params, DEFAULT_LEVELS).unwrap();
        let w = model.tables.transition(0, 2) + offset;
        let g0 = model.gamma_diagonal(0.0, w).unwrap();
        let g1 = model.gamma_diagonal(1.0, w).unwrap();
        let g = model.gamma_diagonal(r, w).unwrap();
        prop_assert!((g - (g0 + (g1 - g0) * r)).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn evolved_states_stay_physical(
        p in 1.0..6.0f64,
        re in -1.5..1.5f64,
        im in -1.5..1.5f64,
        omega in 0.0..0.5f64,
        gamma in 0.0..0.05f64,
    ) {
        let params = KpoParams::new(p).with_dim(36).with_drive(omega).with_losses(0.05, 0.02).with_dephasing(gamma);
        let rho = DensityMatrix::from_pure(&coherent_state(C64::new(re, im), 36).unwrap()).unwrap();
        let controls = Controls::new(make_ramp(omega.max(1e-3), 2.0).unwrap(), Waveform::zero());
        let times: Vec<f64> = (0..=8).map(|k| k as f64 * 0.5).collect();
        let out = evolve(&rho, &params, &controls, (0.0, 4.0), &times, 1e-8).unwrap();
        for state in &out.states {
            prop_assert!((state.trace() - C64::new(1.0, 0.0)).norm() < 1e-9);
            prop_assert!(state.hermiticity_error() < 1e-12);
            prop_assert!(state.min_eigenvalue() > -1e-8);
        }
    }
}
