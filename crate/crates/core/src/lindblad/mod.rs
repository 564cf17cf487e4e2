//! Time-dependent Lindblad evolution of the driven oscillator.

mod integrator;
mod schedule;

pub use integrator::StepStats;
pub use schedule::{
    make_ramp, make_rx_detuning, make_rz_drive, Controls, PulseKind, PulseSchedule, Waveform,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{KpoError, Result};
use crate::fockspace::{hermiticity_error, same_dim, DensityMatrix, StateVector, C64};
use crate::model::{KpoParams, Spectrum};

pub const DEFAULT_TOL: f64 = 1e-8;

/// Bookkeeping from one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// `max |Tr rho(t) - 1|` over accepted steps.
    pub max_trace_drift: f64,
    /// `max |rho - rho^dag|` over sampled states.
    pub max_hermiticity_drift: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub diagnostics: Diagnostics,
}

impl EvolutionResult {
    /// The last sampled state.
    pub fn final_state(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }
}

#[derive(Debug, Clone)]
pub struct PureEvolution {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub diagnostics: Diagnostics,
}

/// Zero border around every stored row and column, so band neighbours of
/// edge entries read zeros instead of needing bounds checks.
const PAD: usize = 2;

/// Band entries of `H(t)` on a padded index range; border entries stay zero.
struct Bands {
    dim: usize,
    p: f64,
    kerr: Vec<f64>,
    n: Vec<f64>,
    /// `sqrt(n + 1)`, zero for `n = dim - 1`
    sq1: Vec<f64>,
    /// `sqrt((n + 1)(n + 2))`, zero for `n >= dim - 2`
    sq2: Vec<f64>,
    diag: Vec<f64>,
    off1: Vec<f64>,
    off2: Vec<f64>,
}

impl Bands {
    fn new(p: f64, dim: usize) -> Self {
        let width = dim + 2 * PAD;
        let mut kerr = vec![0.0; width];
        let mut n = vec![0.0; width];
        let mut sq1 = vec![0.0; width];
        let mut sq2 = vec![0.0; width];
        for k in 0..dim {
            let x = k as f64;
            kerr[k + PAD] = -0.5 * x * (x - 1.0);
            n[k + PAD] = x;
            if k + 1 < dim {
                sq1[k + PAD] = (x + 1.0).sqrt();
            }
            if k + 2 < dim {
                sq2[k + PAD] = ((x + 1.0) * (x + 2.0)).sqrt();
            }
        }
        Self {
            dim,
            p,
            kerr,
            n,
            sq1,
            sq2,
            diag: vec![0.0; width],
            off1: vec![0.0; width],
            off2: vec![0.0; width],
        }
    }

    fn width(&self) -> usize {
        self.dim + 2 * PAD
    }

    /// `diag[k] = H[k][k]`, `off1[k] = H[k][k+1]`, `off2[k] = H[k][k+2]` in
    /// padded indices, at drive `omega` and detuning `delta`.
    fn update(&mut self, omega: f64, delta: f64) {
        let half_p = 0.5 * self.p;
        for k in PAD..PAD + self.dim {
            self.diag[k] = self.kerr[k] + delta * self.n[k];
            self.off1[k] = omega * self.sq1[k];
            self.off2[k] = half_p * self.sq2[k];
        }
    }
}

struct LindbladRhs<'a> {
    bands: Bands,
    kappa: f64,
    gamma: f64,
    controls: &'a Controls,
}

impl<'a> LindbladRhs<'a> {
    fn new(params: &KpoParams, controls: &'a Controls) -> Self {
        Self {
            bands: Bands::new(params.p, params.dim),
            kappa: params.kappa_tot(),
            gamma: params.gamma,
            controls,
        }
    }

    /// `rho` is padded row-major; only the upper triangle is computed, the
    /// lower one is its conjugate mirror.
    fn eval(&mut self, t: f64, rho: &[C64], out: &mut [C64]) {
        self.bands
            .update(self.controls.omega.value(t), self.controls.delta.value(t));
        let b = &self.bands;
        let w = b.width();
        let (d, o1, o2, n, sq1) = (&b.diag, &b.off1, &b.off2, &b.n, &b.sq1);
        let half_kappa = 0.5 * self.kappa;
        let end = PAD + b.dim;
        for i in PAD..end {
            let row = |k: usize| &rho[k * w..(k + 1) * w];
            let (rm2, rm1, r0, rp1, rp2) = (row(i - 2), row(i - 1), row(i), row(i + 1), row(i + 2));
            let (hm2, hm1, h0, hp1, hp2) = (o2[i - 2], o1[i - 1], d[i], o1[i], o2[i]);
            let jump_i = self.kappa * sq1[i];
            let (ni, len) = (n[i], end - i);
            // equal-length views over columns j = i..end (shifted where needed)
            let cols = |v, shift| window(v, i + shift - 2, len);
            let reals = |v, shift| window(v, i + shift - 2, len);
            let (c0, cl1, cr1, cl2, cr2) = (cols(r0, 2), cols(r0, 1), cols(r0, 3), cols(r0, 0), cols(r0, 4));
            let (um2, um1, up1, up2, diag_jump) = (cols(rm2, 2), cols(rm1, 2), cols(rp1, 2), cols(rp2, 2), cols(rp1, 3));
            let (dj, o1l, o1r, o2l, o2r, nj, sqj) = (
                reals(d, 2),
                reals(o1, 1),
                reals(o1, 2),
                reals(o2, 0),
                reals(o2, 2),
                reals(n, 2),
                reals(sq1, 2),
            );
            for k in 0..len {
                let x = c0[k];
                let h_rho = x * h0 + um1[k] * hm1 + up1[k] * hp1 + um2[k] * hm2 + up2[k] * hp2;
                let rho_h = x * dj[k] + cl1[k] * o1l[k] + cr1[k] * o1r[k] + cl2[k] * o2l[k] + cr2[k] * o2r[k];
                let comm = h_rho - rho_h;
                let dn = ni - nj[k];
                let loss = half_kappa * (ni + nj[k]) + self.gamma * dn * dn;
                let v = C64::new(comm.im, -comm.re) - x * loss + diag_jump[k] * (jump_i * sqj[k]);
                let j = i + k;
                if k == 0 {
                    // a real diagonal keeps roundoff out of the mirrored half
                    out[i * w + i] = C64::new(v.re, 0.0);
                    continue;
                }
                out[i * w + j] = v;
                out[j * w + i] = v.conj();
            }
        }
    }
}

fn window<T>(v: &[T], start: usize, len: usize) -> &[T] {
    &v[start..start + len]
}

fn to_padded(m: &DMatrix<C64>) -> Vec<C64> {
    let dim = m.nrows();
    let w = dim + 2 * PAD;
    let mut data = vec![C64::default(); w * w];
    // only the Hermitian part is evolved
    for i in 0..dim {
        for j in 0..dim {
            data[(i + PAD) * w + j + PAD] = 0.5 * (m[(i, j)] + m[(j, i)].conj());
        }
    }
    data
}

fn from_padded(dim: usize, data: &[C64]) -> DMatrix<C64> {
    let w = dim + 2 * PAD;
    DMatrix::from_fn(dim, dim, |i, j| data[(i + PAD) * w + j + PAD])
}

fn padded_trace(dim: usize, data: &[C64]) -> C64 {
    let w = dim + 2 * PAD;
    (PAD..PAD + dim).map(|k| data[k * w + k]).sum()
}

fn check_request(t_span: (f64, f64), sample_times: &[f64], tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(KpoError::InvalidParameter {
            name: "tol",
            value: tol,
            reason: "must be positive",
        });
    }
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(KpoError::InvalidParameter {
            name: "t_span",
            value: t1 - t0,
            reason: "end must not precede start",
        });
    }
    let mut samples = sample_times.to_vec();
    if let Some(&bad) = samples.iter().find(|&&t| !(t >= t0 && t <= t1)) {
        return Err(KpoError::InvalidParameter {
            name: "sample_times",
            value: bad,
            reason: "sample outside the integration span",
        });
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples)
}

/// Integrates the master equation with decay `kappa_tot / 2 D[a]` and
/// dephasing `gamma D[n]`, returning states at `sample_times` (sorted).
pub fn evolve(
    rho0: &DensityMatrix,
    params: &KpoParams,
    controls: &Controls,
    t_span: (f64, f64),
    sample_times: &[f64],
    tol: f64,
) -> Result<EvolutionResult> {
    params.validate()?;
    same_dim(params.dim, rho0.dim())?;
    let samples = check_request(t_span, sample_times, tol)?;
    let dim = params.dim;
    let mut rhs = LindbladRhs::new(params, controls);
    let mut y = to_padded(rho0.matrix());
    let trace0 = padded_trace(dim, &y);
    let limit = 100.0 * tol;

    let mut diagnostics = Diagnostics::default();
    let mut times = Vec::with_capacity(samples.len());
    let mut states = Vec::with_capacity(samples.len());
    let mut max_drift = (trace0 - C64::new(1.0, 0.0)).norm();
    let mut max_herm: f64 = 0.0;

    let stats = integrator::integrate(
        &mut y,
        t_span.0,
        t_span.1,
        &samples,
        tol,
        |t, rho, out| rhs.eval(t, rho, out),
        |_, t, rho| {
            let m = from_padded(dim, rho);
            max_herm = max_herm.max(hermiticity_error(&m));
            times.push(t);
            states.push(DensityMatrix::from_matrix_unchecked(m)?);
            Ok(())
        },
        |_, rho| {
            let drift = (padded_trace(dim, rho) - C64::new(1.0, 0.0)).norm();
            max_drift = max_drift.max(drift);
            if drift > limit {
                Err(KpoError::IntegratorFailure { drift, limit })
            } else {
                Ok(())
            }
        },
    )?;
    diagnostics.steps = stats.accepted;
    diagnostics.rejected = stats.rejected;
    diagnostics.rhs_evals = stats.rhs_evals;
    diagnostics.max_trace_drift = max_drift;
    diagnostics.max_hermiticity_drift = max_herm;
    Ok(EvolutionResult {
        times,
        states,
        diagnostics,
    })
}

/// Closed-system evolution `d psi / dt = -i H(t) psi`.
pub fn evolve_pure(
    psi0: &StateVector,
    params: &KpoParams,
    controls: &Controls,
    t_span: (f64, f64),
    sample_times: &[f64],
    tol: f64,
) -> Result<PureEvolution> {
    params.validate()?;
    same_dim(params.dim, psi0.dim())?;
    let samples = check_request(t_span, sample_times, tol)?;
    let dim = params.dim;
    let mut bands = Bands::new(params.p, dim);
    let mut y = vec![C64::default(); dim + 2 * PAD];
    for (slot, &a) in y[PAD..PAD + dim].iter_mut().zip(psi0.amplitudes().iter()) {
        *slot = a;
    }
    let norm0 = psi0.norm();
    let limit = 100.0 * tol;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut max_drift: f64 = 0.0;

    let stats = integrator::integrate(
        &mut y,
        t_span.0,
        t_span.1,
        &samples,
        tol,
        |t, psi, out| {
            bands.update(controls.omega.value(t), controls.delta.value(t));
            let (d, o1, o2) = (&bands.diag, &bands.off1, &bands.off2);
            for i in PAD..PAD + dim {
                let h = psi[i] * d[i]
                    + psi[i - 1] * o1[i - 1]
                    + psi[i + 1] * o1[i]
                    + psi[i - 2] * o2[i - 2]
                    + psi[i + 2] * o2[i];
                out[i] = C64::new(h.im, -h.re);
            }
        },
        |_, t, psi| {
            times.push(t);
            states.push(StateVector::from_amplitudes(DVector::from_column_slice(&psi[PAD..PAD + dim]))?);
            Ok(())
        },
        |_, psi| {
            let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let drift = (norm - norm0).abs();
            max_drift = max_drift.max(drift);
            if drift > limit {
                Err(KpoError::IntegratorFailure { drift, limit })
            } else {
                Ok(())
            }
        },
    )?;
    Ok(PureEvolution {
        times,
        states,
        diagnostics: Diagnostics {
            steps: stats.accepted,
            rejected: stats.rejected,
            rhs_evals: stats.rhs_evals,
            max_trace_drift: max_drift,
            max_hermiticity_drift: 0.0,
        },
    })
}

/// `<psi_i| rho |psi_j>` over the levels of `spectrum`.
pub fn project(rho: &DensityMatrix, spectrum: &Spectrum) -> Result<DMatrix<C64>> {
    same_dim(rho.dim(), spectrum.dim())?;
    let basis = DMatrix::from_columns(
        &spectrum
            .eigenvectors
            .iter()
            .map(|v| v.amplitudes().clone())
            .collect::<Vec<_>>(),
    );
    Ok(basis.adjoint() * rho.matrix() * basis)
}

/// [`project`] applied to every sampled state.
pub fn populations_in_eigenbasis(
    result: &EvolutionResult,
    spectrum: &Spectrum,
) -> Result<Vec<DMatrix<C64>>> {
    result.states.iter().map(|rho| project(rho, spectrum)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{annihilation, coherent_state, number};
    use crate::model::build_hamiltonian;

    fn random_hermitian(dim: usize) -> DMatrix<C64> {
        let mut m = DMatrix::from_fn(dim, dim, |i, j| {
            let x = ((i * 7 + j * 13) % 11) as f64 / 11.0;
            let y = ((i * 5 + j * 3) % 7) as f64 / 7.0;
            C64::new(x - 0.4, y - 0.3)
        });
        m = (&m + m.adjoint()).scale(0.5);
        m
    }

    fn dissipator(o: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let od = o.adjoint();
        (o * rho * &od).scale(2.0) - &od * o * rho - rho * &od * o
    }

    #[test]
    fn banded_rhs_matches_dense_generator() {
        let dim = 9;
        let params = KpoParams::new(2.5)
            .with_dim(dim)
            .with_losses(0.3, 0.1)
            .with_dephasing(0.07);
        let controls = Controls::new(PulseSchedule::constant(0.6), PulseSchedule::constant(-1.3));
        let rho = random_hermitian(dim);
        let mut rhs = LindbladRhs::new(&params, &controls);
        let w = dim + 2 * PAD;
        let mut out = vec![C64::default(); w * w];
        rhs.eval(0.0, &to_padded(&rho), &mut out);
        let banded = from_padded(dim, &out);

        let h = build_hamiltonian(&params, 0.6, -1.3).unwrap();
        let a = annihilation(dim).unwrap();
        let n = number(dim).unwrap();
        let comm = h.matrix() * &rho - &rho * h.matrix();
        let dense = comm * C64::new(0.0, -1.0)
            + dissipator(a.matrix(), &rho).scale(0.5 * params.kappa_tot())
            + dissipator(n.matrix(), &rho).scale(params.gamma);
        assert!((banded - dense).camax() < 1e-12);
    }

    #[test]
    fn linear_cavity_decay() {
        let dim = 30;
        let kappa = 0.4;
        let params = KpoParams::new(0.0).with_dim(dim).with_losses(kappa, 0.0);
        // H commutes with n when p = omega = 0, so <n> decays exactly as in a linear cavity
        let rho0 = DensityMatrix::from_pure(&coherent_state(C64::new(1.2, 0.9), dim).unwrap()).unwrap();
        let n0 = rho0.expectation(&number(dim).unwrap()).unwrap().re;
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let res = evolve(&rho0, &params, &Controls::constant_drive(0.0), (0.0, 5.0), &times, 1e-10).unwrap();
        let n = number(dim).unwrap();
        for (t, rho) in res.times.iter().zip(&res.states) {
            let got = rho.expectation(&n).unwrap().re;
            let want = n0 * (-kappa * t).exp();
            assert!((got - want).abs() < 1e-8 * want.max(1.0), "t = {t}");
        }
        assert!(res.diagnostics.max_trace_drift < 1e-10);
    }

    #[test]
    fn imaginary_diagonal_noise_stays_bounded() {
        // the loss term would amplify Im rho_nn if the mirrored half flipped its sign
        let dim = 40;
        let params = KpoParams::new(0.0).with_dim(dim).with_losses(1.0, 0.0);
        let mut m = DensityMatrix::from_pure(&coherent_state(C64::new(1.0, 0.0), dim).unwrap())
            .unwrap()
            .into_matrix();
        for k in 0..dim {
            m[(k, k)].im += 1e-17;
        }
        let rho0 = DensityMatrix::from_matrix_unchecked(m).unwrap();
        let res = evolve(&rho0, &params, &Controls::constant_drive(0.0), (0.0, 40.0), &[40.0], 1e-8).unwrap();
        assert!(res.diagnostics.max_trace_drift < 1e-12);
    }

    #[test]
    fn rejects_bad_requests() {
        let params = KpoParams::new(1.0).with_dim(10);
        let rho0 = DensityMatrix::from_pure(&StateVector::fock(0, 10).unwrap()).unwrap();
        let c = Controls::constant_drive(0.0);
        assert!(evolve(&rho0, &params, &c, (0.0, 1.0), &[2.0], 1e-8).is_err());
        assert!(evolve(&rho0, &params, &c, (0.0, 1.0), &[0.5], 0.0).is_err());
        let wrong = DensityMatrix::from_pure(&StateVector::fock(0, 11).unwrap()).unwrap();
        assert!(matches!(
            evolve(&wrong, &params, &c, (0.0, 1.0), &[], 1e-8),
            Err(KpoError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pure_and_mixed_evolution_agree_without_loss() {
        let dim = 20;
        let params = KpoParams::new(2.0).with_dim(dim);
        let controls = Controls::new(make_ramp(0.3, 2.0).unwrap(), make_rx_detuning(-1.0, 3.0).unwrap());
        let psi0 = StateVector::fock(1, dim).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi0).unwrap();
        let pure = evolve_pure(&psi0, &params, &controls, (0.0, 3.0), &[3.0], 1e-11).unwrap();
        let mixed = evolve(&rho0, &params, &controls, (0.0, 3.0), &[3.0], 1e-11).unwrap();
        let want = pure.states[0].projector();
        assert!((mixed.states[0].matrix() - want).camax() < 1e-8);
    }
}
