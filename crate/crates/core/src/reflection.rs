//! Reflection coefficient of the oscillator seen from the transmission line,
//! built from eigenbasis matrix elements and the zero-frequency density
//! matrix.

use nalgebra::DMatrix;

use crate::error::{KpoError, Result};
use crate::fockspace::{coherent_state, StateVector, C64};
use crate::lindblad::{project, EvolutionResult};
use crate::model::{build_hamiltonian, top_eigenpairs, KpoParams, Spectrum, Well};

/// Levels kept in the double sum by default.
pub const DEFAULT_LEVELS: usize = 5;

const SINGULAR_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-6;

/// Matrix elements over the retained levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTables {
    /// `X[m][n] = <psi_m| a |psi_n>`
    pub x: DMatrix<C64>,
    /// `Y[m][n] = <psi_m| a^dag a |psi_n>`
    pub y: DMatrix<C64>,
    /// `Z[m] = <psi_m| (a^dag a)^2 |psi_m>`
    pub z_diag: Vec<f64>,
    /// Level energies `omega_m`.
    pub frequencies: Vec<f64>,
}

impl TransitionTables {
    pub fn levels(&self) -> usize {
        self.frequencies.len()
    }

    /// Probe detuning resonant with `psi_m -> psi_n`: `omega_n - omega_m`.
    pub fn transition(&self, m: usize, n: usize) -> f64 {
        self.frequencies[n] - self.frequencies[m]
    }
}

fn lower(psi: &StateVector) -> Vec<C64> {
    let amps = psi.amplitudes();
    let dim = amps.len();
    (0..dim)
        .map(|n| {
            if n + 1 < dim {
                amps[n + 1] * ((n + 1) as f64).sqrt()
            } else {
                C64::default()
            }
        })
        .collect()
}

fn count(psi: &StateVector) -> Vec<C64> {
    psi.amplitudes()
        .iter()
        .enumerate()
        .map(|(n, &c)| c * n as f64)
        .collect()
}

fn braket(bra: &StateVector, ket: &[C64]) -> C64 {
    bra.amplitudes()
        .iter()
        .zip(ket)
        .map(|(b, k)| b.conj() * k)
        .sum()
}

pub fn transition_tables(spectrum: &Spectrum) -> Result<TransitionTables> {
    let levels = spectrum.len();
    if levels < 2 {
        return Err(KpoError::InvalidParameter {
            name: "levels",
            value: levels as f64,
            reason: "at least two levels are needed",
        });
    }
    let lowered: Vec<Vec<C64>> = spectrum.eigenvectors.iter().map(lower).collect();
    let counted: Vec<Vec<C64>> = spectrum.eigenvectors.iter().map(count).collect();
    let vecs = &spectrum.eigenvectors;
    let x = DMatrix::from_fn(levels, levels, |m, n| braket(&vecs[m], &lowered[n]));
    let mut y = DMatrix::from_fn(levels, levels, |m, n| braket(&vecs[m], &counted[n]));
    y = (&y + y.adjoint()).scale(0.5);
    let z_diag = counted
        .iter()
        .map(|v| v.iter().map(|c| c.norm_sqr()).sum())
        .collect();
    Ok(TransitionTables {
        x,
        y,
        z_diag,
        frequencies: spectrum.eigenvalues.clone(),
    })
}

/// Rates entering the reflection formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub kappa_ex: f64,
    pub kappa_int: f64,
    /// Pure dephasing rate.
    pub gamma: f64,
}

impl Couplings {
    pub fn kappa_tot(&self) -> f64 {
        self.kappa_ex + self.kappa_int
    }
}

impl From<&KpoParams> for Couplings {
    fn from(params: &KpoParams) -> Self {
        Self {
            kappa_ex: params.kappa_ex,
            kappa_int: params.kappa_int,
            gamma: params.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionResult {
    /// Probe detuning from half the pump frequency.
    pub omega_in: f64,
    pub gamma: C64,
    /// `xi[m][n]`, the contribution of `psi_m -> psi_n`.
    pub xi_terms: DMatrix<C64>,
}

fn check_rho_f(tables: &TransitionTables, rho_f: &DMatrix<C64>) -> Result<()> {
    let levels = tables.levels();
    if rho_f.nrows() != levels || rho_f.ncols() != levels {
        return Err(KpoError::DimensionMismatch {
            expected: levels,
            found: rho_f.nrows(),
        });
    }
    Ok(())
}

/// `kappa_ex X_mn sum_k (X*_kn rhoF_km - rhoF_nk X*_mk)`.
fn numerator(tables: &TransitionTables, rho_f: &DMatrix<C64>, kappa_ex: f64, m: usize, n: usize) -> C64 {
    let x = &tables.x;
    let sum: C64 = (0..tables.levels())
        .map(|k| x[(k, n)].conj() * rho_f[(k, m)] - rho_f[(n, k)] * x[(m, k)].conj())
        .sum();
    x[(m, n)] * sum * kappa_ex
}

/// Damping part of the denominator: everything except `i Delta_nm`.
fn damping(tables: &TransitionTables, c: Couplings, m: usize, n: usize) -> C64 {
    let (x, y, z) = (&tables.x, &tables.y, &tables.z_diag);
    let kt = c.kappa_tot();
    let l = y[(n, n)] * y[(m, m)].conj() * (2.0 * c.gamma) - c.gamma * (z[n] + z[m]);
    x[(n, n)] * x[(m, m)].conj() * kt - (y[(n, n)] + y[(m, m)]) * (0.5 * kt) + l
}

fn evaluate(
    tables: &TransitionTables,
    rho_f: &DMatrix<C64>,
    c: Couplings,
    omega_in: f64,
) -> Result<ReflectionResult> {
    let levels = tables.levels();
    let mut xi_terms = DMatrix::zeros(levels, levels);
    for m in 0..levels {
        for n in 0..levels {
            let num = numerator(tables, rho_f, c.kappa_ex, m, n);
            if num == C64::default() {
                continue;
            }
            let detuning = omega_in - tables.frequencies[n] + tables.frequencies[m];
            let denom = C64::new(0.0, detuning) + damping(tables, c, m, n);
            let magnitude = denom.norm();
            if magnitude < SINGULAR_TOL {
                return Err(KpoError::SingularDenominator { m, n, magnitude });
            }
            xi_terms[(m, n)] = num / denom;
        }
    }
    let gamma = C64::new(1.0, 0.0) + xi_terms.sum();
    Ok(ReflectionResult {
        omega_in,
        gamma,
        xi_terms,
    })
}

/// `Gamma = 1 + sum_mn xi_mn` for the zero-frequency eigenbasis density
/// matrix `rho_f` (unit trace).
pub fn reflection_coefficient(
    tables: &TransitionTables,
    rho_f: &DMatrix<C64>,
    couplings: Couplings,
    omega_in: f64,
) -> Result<ReflectionResult> {
    check_rho_f(tables, rho_f)?;
    let trace = rho_f.trace();
    if (trace - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
        return Err(KpoError::InvalidState(format!(
            "rhoF trace {trace} differs from one"
        )));
    }
    evaluate(tables, rho_f, couplings, omega_in)
}

/// Qubit-subspace density matrix `rho_ij` in the `{|alpha>, |-alpha>}` basis.
pub type QubitMatrix = [[C64; 2]; 2];

/// How the coherent-basis qubit state is carried into the eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitLoading {
    /// The drive ramp moves `|+-alpha>` onto the level of matching well
    /// (`psi_0` and `psi_1`), phases fixed by `<psi|+-alpha>`.
    Adiabatic,
    /// No ramp: project `sum rho_ij |i~><j~|` onto the levels as is.
    Direct,
}

/// Zero-frequency eigenbasis matrix for a qubit state.
///
/// With `Adiabatic` loading the first two levels must be `psi_0`, `psi_1` of
/// the ramped Hamiltonian; when they carry labels the `+` well level takes
/// the `|alpha>` population.
pub fn qubit_rho_f(
    spectrum: &Spectrum,
    alpha: f64,
    rho: &QubitMatrix,
    loading: QubitLoading,
) -> Result<DMatrix<C64>> {
    let levels = spectrum.len();
    let dim = spectrum.dim();
    let wells = [
        coherent_state(C64::new(alpha, 0.0), dim)?,
        coherent_state(C64::new(-alpha, 0.0), dim)?,
    ];
    let mut rho_f = DMatrix::zeros(levels, levels);
    match loading {
        QubitLoading::Adiabatic => {
            if levels < 2 {
                return Err(KpoError::InvalidParameter {
                    name: "levels",
                    value: levels as f64,
                    reason: "at least two levels are needed",
                });
            }
            let plus_first = spectrum
                .labels
                .first()
                .map_or(true, |l| l.well == Well::Plus);
            let slot = if plus_first { [0, 1] } else { [1, 0] };
            let phase = |i: usize| {
                let o = spectrum.eigenvectors[slot[i]].inner(&wells[i])?;
                Ok::<_, KpoError>(if o.norm() > 0.0 { o / o.norm() } else { C64::new(1.0, 0.0) })
            };
            let u = [phase(0)?, phase(1)?];
            for i in 0..2 {
                for j in 0..2 {
                    rho_f[(slot[i], slot[j])] = rho[i][j] * u[i] * u[j].conj();
                }
            }
        }
        QubitLoading::Direct => {
            let overlaps: Vec<[C64; 2]> = spectrum
                .eigenvectors
                .iter()
                .map(|psi| Ok([psi.inner(&wells[0])?, psi.inner(&wells[1])?]))
                .collect::<Result<_>>()?;
            for m in 0..levels {
                for n in 0..levels {
                    let mut acc = C64::default();
                    for i in 0..2 {
                        for j in 0..2 {
                            acc += overlaps[m][i] * rho[i][j] * overlaps[n][j].conj();
                        }
                    }
                    rho_f[(m, n)] = acc;
                }
            }
        }
    }
    Ok(rho_f)
}

/// `diag(rho00, 1 - rho00, 0, ...)`: the relaxed post-ramp state.
pub fn diagonal_rho_f(levels: usize, rho00: f64) -> DMatrix<C64> {
    let mut rho_f = DMatrix::zeros(levels, levels);
    rho_f[(0, 0)] = C64::new(rho00, 0.0);
    if levels > 1 {
        rho_f[(1, 1)] = C64::new(1.0 - rho00, 0.0);
    }
    rho_f
}

/// Spectrum, tables and rates of one parameter point, reused across probes.
#[derive(Debug, Clone)]
pub struct ReflectionModel {
    pub spectrum: Spectrum,
    pub tables: TransitionTables,
    pub couplings: Couplings,
    pub alpha: f64,
}

impl ReflectionModel {
    /// Top `levels` eigenpairs of `H` at drive `params.omega0` and zero
    /// detuning.
    pub fn new(params: &KpoParams, levels: usize) -> Result<Self> {
        let h = build_hamiltonian(params, params.omega0, 0.0)?;
        let spectrum = top_eigenpairs(&h, levels)?;
        Self::from_spectrum(spectrum, params)
    }

    pub fn from_spectrum(spectrum: Spectrum, params: &KpoParams) -> Result<Self> {
        let tables = transition_tables(&spectrum)?;
        Ok(Self {
            spectrum,
            tables,
            couplings: params.into(),
            alpha: params.alpha(),
        })
    }

    pub fn gamma(&self, rho_f: &DMatrix<C64>, omega_in: f64) -> Result<C64> {
        Ok(reflection_coefficient(&self.tables, rho_f, self.couplings, omega_in)?.gamma)
    }

    /// Skips the trace check, for states projected onto the truncated
    /// eigenbasis where a little population sits outside the kept levels.
    pub fn gamma_unchecked(&self, rho_f: &DMatrix<C64>, omega_in: f64) -> Result<C64> {
        let levels = self.tables.levels();
        if rho_f.nrows() != levels || rho_f.ncols() != levels {
            return Err(KpoError::DimensionMismatch {
                expected: levels,
                found: rho_f.nrows(),
            });
        }
        Ok(evaluate(&self.tables, rho_f, self.couplings, omega_in)?.gamma)
    }

    /// `Gamma` for the relaxed state with the given `rho00`.
    pub fn gamma_diagonal(&self, rho00: f64, omega_in: f64) -> Result<C64> {
        self.gamma(&diagonal_rho_f(self.tables.levels(), rho00), omega_in)
    }

    /// `|Gamma(1) - Gamma(0)|` at the given probe.
    pub fn sensitivity_at(&self, omega_in: f64) -> Result<f64> {
        Ok((self.gamma_diagonal(1.0, omega_in)? - self.gamma_diagonal(0.0, omega_in)?).norm())
    }
}

/// `|Gamma(1) - Gamma(0)|` with the probe at `omega_n - omega_m + probe_offset`
/// for transition `(m, n)` of the Hamiltonian at `params.omega0`.
pub fn sensitivity(params: &KpoParams, transition: (usize, usize), probe_offset: f64) -> Result<f64> {
    let (m, n) = transition;
    let levels = DEFAULT_LEVELS.max(m.max(n) + 1);
    let model = ReflectionModel::new(params, levels)?;
    model.sensitivity_at(model.tables.transition(m, n) + probe_offset)
}

/// Effective rates from matching `1 + xi_mn` to a linear resonator line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalRates {
    pub kappa_ex: f64,
    pub kappa_int: f64,
    /// Imaginary parts discarded from `(kappa_ex, kappa_int)`.
    pub imag_residuals: (f64, f64),
}

pub fn nominal_decay_rates(
    tables: &TransitionTables,
    rho_f: &DMatrix<C64>,
    couplings: Couplings,
    transition: (usize, usize),
) -> Result<NominalRates> {
    check_rho_f(tables, rho_f)?;
    let (m, n) = transition;
    if m >= tables.levels() || n >= tables.levels() {
        return Err(KpoError::InvalidParameter {
            name: "transition",
            value: m.max(n) as f64,
            reason: "level beyond the tables",
        });
    }
    let ex = numerator(tables, rho_f, couplings.kappa_ex, m, n);
    let int = damping(tables, couplings, m, n) * -2.0 - ex;
    Ok(NominalRates {
        kappa_ex: ex.re,
        kappa_int: int.re,
        imag_residuals: (ex.im, int.im),
    })
}

/// Mean of `Gamma` over the samples of `trajectory` inside `window`, each
/// evaluated with the instantaneous projection `<psi_i| rho(t) |psi_j>` onto
/// the levels of `model`.
///
/// Population that has left the retained levels is simply absent from the
/// projection, so no unit-trace check is applied here.
pub fn time_averaged_gamma(
    trajectory: &EvolutionResult,
    model: &ReflectionModel,
    omega_in: f64,
    window: (f64, f64),
) -> Result<C64> {
    let (start, end) = window;
    let mut total = C64::default();
    let mut samples = 0usize;
    for (t, rho) in trajectory.times.iter().zip(&trajectory.states) {
        if *t < start || *t > end {
            continue;
        }
        let rho_f = project(rho, &model.spectrum)?;
        total += evaluate(&model.tables, &rho_f, model.couplings, omega_in)?.gamma;
        samples += 1;
    }
    if samples == 0 {
        return Err(KpoError::EmptyWindow { start, end });
    }
    Ok(total / samples as f64)
}
