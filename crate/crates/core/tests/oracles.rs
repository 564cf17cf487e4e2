//! Closed-form checks against textbook results.

use std::f64::consts::PI;

use kpo_core::fockspace::{coherent_state, displacement, number, wigner, StateVector};
use kpo_core::lindblad::{evolve, evolve_pure, Controls};
use kpo_core::model::{build_hamiltonian, top_eigenpairs};
use kpo_core::reflection::{ReflectionModel, DEFAULT_LEVELS};
use kpo_core::{DensityMatrix, KpoParams, C64};

#[test]
fn coherent_wigner_is_a_gaussian() {
    let beta = C64::new(1.1, -0.4);
    let rho = DensityMatrix::from_pure(&coherent_state(beta, 40).unwrap()).unwrap();
    let grid: Vec<C64> = (0..25)
        .map(|k| C64::new(-1.0 + 0.15 * (k % 5) as f64 * 3.0, -1.5 + 0.25 * (k / 5) as f64 * 2.0))
        .collect();
    for (z, w) in grid.iter().zip(wigner(&rho, &grid)) {
        let want = 2.0 / PI * (-2.0 * (z - beta).norm_sqr()).exp();
        assert!((w - want).abs() < 1e-10, "z = {z}: {w} vs {want}");
    }
}

#[test]
fn displaced_vacuum_is_coherent() {
    let alpha = C64::new(0.7, 1.3);
    let dim = 50;
    let d = displacement(alpha, dim).unwrap();
    let moved = d.apply(&StateVector::fock(0, dim).unwrap()).unwrap();
    let reference = coherent_state(alpha, dim).unwrap();
    assert!((moved.inner(&reference).unwrap().norm() - 1.0).abs() < 1e-12);
    let n = number(dim).unwrap().expectation(&moved).unwrap().re;
    assert!((n - alpha.norm_sqr()).abs() < 1e-10);
}

#[test]
fn undriven_top_levels_are_degenerate_cats() {
    // for Omega = Delta = 0 the two highest levels sit at p^2 / 2K with even and odd parity
    let p = 4.0;
    let params = KpoParams::new(p);
    let h = build_hamiltonian(&params, 0.0, 0.0).unwrap();
    let spectrum = top_eigenpairs(&h, 2).unwrap();
    for energy in &spectrum.eigenvalues {
        assert!((energy - 0.5 * p * p).abs() < 1e-8, "{energy}");
    }
}

#[test]
fn closed_kerr_revival() {
    // with p = Omega = 0 a coherent state returns to itself after t = 2 pi / K
    let params = KpoParams::new(0.0).with_dim(30);
    let psi = coherent_state(C64::new(1.5, 0.0), 30).unwrap();
    let out = evolve_pure(&psi, &params, &Controls::constant_drive(0.0), (0.0, 2.0 * PI), &[2.0 * PI], 1e-11)
        .unwrap();
    assert!((out.states[0].inner(&psi).unwrap().norm() - 1.0).abs() < 1e-7);
}

#[test]
fn fock_population_decays_exponentially() {
    let kappa = 0.3;
    let params = KpoParams::new(0.0).with_dim(8).with_losses(kappa, 0.0);
    let rho = DensityMatrix::from_pure(&StateVector::fock(1, 8).unwrap()).unwrap();
    let times = [0.5, 2.0, 6.0];
    let out = evolve(&rho, &params, &Controls::constant_drive(0.0), (0.0, 6.0), &times, 1e-10).unwrap();
    for (t, state) in out.times.iter().zip(&out.states) {
        let p1 = state.matrix()[(1, 1)].re;
        assert!((p1 - (-kappa * t).exp()).abs() < 1e-9, "t = {t}");
    }
}

#[test]
fn far_detuned_probe_reflects_fully() {
    let params = KpoParams::new(9.0).with_drive(0.5).with_losses(0.01, 0.005);
    let model = ReflectionModel::new(&params, DEFAULT_LEVELS).unwrap();
    for rho00 in [0.0, 0.5, 1.0] {
        let g = model.gamma_diagonal(rho00, 500.0).unwrap();
        assert!((g - C64::new(1.0, 0.0)).norm() < 1e-3, "{g}");
    }
}
