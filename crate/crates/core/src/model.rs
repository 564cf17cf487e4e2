//! Driven Kerr parametric oscillator: Hamiltonian, labeled spectrum and the
//! analytic reference states.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{KpoError, Result};
use crate::fockspace::{
    check_dim, coherent_state, displacement, hermitian_eigen, OperatorMatrix, StateVector, C64,
};

/// Physical parameters, all rates in units of the Kerr coefficient `K`.
///
/// `K` itself is never stored; it is fixed to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpoParams {
    /// Two-photon pump amplitude `p`.
    pub p: f64,
    /// Single-photon drive amplitude after the ramp.
    pub omega0: f64,
    /// Detuning amplitude used by the Rx pulse.
    pub delta0: f64,
    pub kappa_ex: f64,
    pub kappa_int: f64,
    /// Pure dephasing rate.
    pub gamma: f64,
    /// Fock truncation.
    pub dim: usize,
}

impl KpoParams {
    /// Parameters with no loss, no drive and the default truncation for `p`.
    pub fn new(p: f64) -> Self {
        Self {
            p,
            omega0: 0.0,
            delta0: 0.0,
            kappa_ex: 0.0,
            kappa_int: 0.0,
            gamma: 0.0,
            dim: default_dim(p),
        }
    }

    pub fn with_drive(mut self, omega0: f64) -> Self {
        self.omega0 = omega0;
        self
    }

    pub fn with_losses(mut self, kappa_ex: f64, kappa_int: f64) -> Self {
        self.kappa_ex = kappa_ex;
        self.kappa_int = kappa_int;
        self
    }

    pub fn with_dephasing(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    /// Coherent amplitude `sqrt(p / K)` of the qubit states.
    pub fn alpha(&self) -> f64 {
        self.p.max(0.0).sqrt()
    }

    pub fn kappa_tot(&self) -> f64 {
        self.kappa_ex + self.kappa_int
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg: [(&'static str, f64); 4] = [
            ("p", self.p),
            ("kappa_ex", self.kappa_ex),
            ("kappa_int", self.kappa_int),
            ("gamma", self.gamma),
        ];
        for (name, value) in nonneg {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(KpoError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and non-negative",
                });
            }
        }
        for (name, value) in [("omega0", self.omega0), ("delta0", self.delta0)] {
            if !value.is_finite() {
                return Err(KpoError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        check_dim(self.dim)
    }
}

/// Default truncation `max(30, ceil(a^2 + 7a + 10))` with `a = sqrt(p) + 1`.
pub fn default_dim(p: f64) -> usize {
    let a = p.max(0.0).sqrt() + 1.0;
    (a * a + 7.0 * a + 10.0).ceil().max(30.0) as usize
}

/// The Hamiltonian `Delta n - (1/2) a^dag^2 a^2 + (p/2)(a^dag^2 + a^2) + Omega (a^dag + a)`
/// is real symmetric with bandwidth two; this keeps only the three bands.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedHamiltonian {
    /// `H[n][n]`
    pub diag: Vec<f64>,
    /// `H[n][n+1] = H[n+1][n]`
    pub off1: Vec<f64>,
    /// `H[n][n+2] = H[n+2][n]`
    pub off2: Vec<f64>,
}

impl BandedHamiltonian {
    pub fn new(p: f64, omega: f64, delta: f64, dim: usize) -> Self {
        let diag = (0..dim)
            .map(|n| {
                let n = n as f64;
                delta * n - 0.5 * n * (n - 1.0)
            })
            .collect();
        let off1 = (0..dim.saturating_sub(1))
            .map(|n| omega * ((n + 1) as f64).sqrt())
            .collect();
        let off2 = (0..dim.saturating_sub(2))
            .map(|n| 0.5 * p * (((n + 1) * (n + 2)) as f64).sqrt())
            .collect();
        Self { diag, off1, off2 }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (n, &d) in self.diag.iter().enumerate() {
            m[(n, n)] = C64::new(d, 0.0);
        }
        for (n, &v) in self.off1.iter().enumerate() {
            m[(n, n + 1)] = C64::new(v, 0.0);
            m[(n + 1, n)] = C64::new(v, 0.0);
        }
        for (n, &v) in self.off2.iter().enumerate() {
            m[(n, n + 2)] = C64::new(v, 0.0);
            m[(n + 2, n)] = C64::new(v, 0.0);
        }
        m
    }
}

/// Hamiltonian at drive `omega` and detuning `delta` for the pump and
/// truncation in `params`.
pub fn build_hamiltonian(params: &KpoParams, omega: f64, delta: f64) -> Result<OperatorMatrix> {
    params.validate()?;
    OperatorMatrix::from_matrix(BandedHamiltonian::new(params.p, omega, delta, params.dim).to_dense())
}

/// Which coherent well a level sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Well {
    Plus,
    Minus,
}

impl Well {
    pub fn sign(self) -> f64 {
        match self {
            Well::Plus => 1.0,
            Well::Minus => -1.0,
        }
    }

    fn other(self) -> Self {
        match self {
            Well::Plus => Well::Minus,
            Well::Minus => Well::Plus,
        }
    }
}

/// Label `D(+-alpha)|m>` attached to an eigenstate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelLabel {
    pub well: Well,
    pub excitation: usize,
    /// `|<psi| D(+-alpha) |m>|^2`
    pub overlap: f64,
}

impl LevelLabel {
    fn key(&self) -> (Well, usize) {
        (self.well, self.excitation)
    }
}

impl fmt::Display for LevelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.well {
            Well::Plus => '+',
            Well::Minus => '-',
        };
        write!(f, "({s},{})", self.excitation)
    }
}

/// Top of the spectrum in descending energy order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
    /// Empty for [`top_eigenpairs`]; one entry per level for [`top_spectrum`].
    pub labels: Vec<LevelLabel>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.first().map_or(0, StateVector::dim)
    }

    /// `Delta omega_{nm} = omega_n - omega_m`.
    pub fn transition(&self, n: usize, m: usize) -> f64 {
        self.eigenvalues[n] - self.eigenvalues[m]
    }
}

const DEGENERACY_TOL: f64 = 1e-10;
const LABEL_TIE_TOL: f64 = 1e-9;
/// Wells are treated as distinguishable once `e^{-2 alpha^2}` is below this.
const WELL_SEPARATION: f64 = 1e-3;

/// Top `count` eigenpairs, descending, with the largest-magnitude amplitude of
/// each eigenvector made real positive. Parity-preserving Hamiltonians are
/// diagonalized per parity sector so degenerate cat doublets stay parity
/// eigenstates; such doublets are ordered even first.
pub fn top_eigenpairs(h: &OperatorMatrix, count: usize) -> Result<Spectrum> {
    let dim = h.dim();
    if count == 0 || count > dim {
        return Err(KpoError::InvalidParameter {
            name: "count",
            value: count as f64,
            reason: "must be between 1 and the Fock dimension",
        });
    }
    let m = h.matrix();
    let scale = h.max_abs().max(1.0);
    let parity_breaking = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .filter(|(i, j)| (i + j) % 2 == 1)
        .map(|(i, j)| m[(i, j)].norm())
        .fold(0.0, f64::max);

    // (energy, parity rank, vector)
    let mut pairs: Vec<(f64, usize, DVector<C64>)> = Vec::with_capacity(dim);
    if parity_breaking <= 1e-12 * scale {
        for parity in 0..2 {
            let idx: Vec<usize> = (parity..dim).step_by(2).collect();
            let block = DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])]);
            let (vals, vecs) = hermitian_eigen(&block);
            for k in 0..idx.len() {
                let mut v = DVector::zeros(dim);
                for (r, &i) in idx.iter().enumerate() {
                    v[i] = vecs[(r, k)];
                }
                pairs.push((vals[k], parity, v));
            }
        }
    } else {
        let (vals, vecs) = hermitian_eigen(m);
        for k in 0..dim {
            pairs.push((vals[k], 0, vecs.column(k).into_owned()));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    // near-degenerate neighbours: even sector first
    for i in 1..pairs.len() {
        if (pairs[i - 1].0 - pairs[i].0).abs() < DEGENERACY_TOL && pairs[i - 1].1 > pairs[i].1 {
            pairs.swap(i - 1, i);
        }
    }
    pairs.truncate(count);

    let mut eigenvalues = Vec::with_capacity(count);
    let mut eigenvectors = Vec::with_capacity(count);
    for (val, _, mut v) in pairs {
        fix_phase(&mut v);
        eigenvalues.push(val);
        eigenvectors.push(StateVector::from_amplitudes(v)?);
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        labels: Vec::new(),
    })
}

fn fix_phase(v: &mut DVector<C64>) {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() * (1.0 + 1e-12) {
            best = i;
        }
    }
    let pivot = v[best];
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        v.apply(|z| *z *= phase);
    }
}

/// Top `count` eigenpairs labeled by their best match among
/// `D(+-alpha)|m>`, `m < count`.
///
/// Each level claims the candidate of largest overlap; exact ties (cat
/// states) resolve to the first unclaimed candidate in the order
/// `(+,0), (-,0), (+,1), ...`. Two levels claiming the same label raise
/// [`KpoError::LabelAmbiguity`]. When the wells are well separated the
/// labels must also follow the energy order `(h,0), (l,0), (h,1), (l,1), ...`
/// where `h` is the higher well, otherwise [`KpoError::LevelOrderChanged`].
pub fn top_spectrum(h: &OperatorMatrix, count: usize, alpha: C64) -> Result<Spectrum> {
    let mut spectrum = top_eigenpairs(h, count)?;
    let dim = h.dim();
    let d_plus = displacement(alpha, dim)?;
    let d_minus = displacement(-alpha, dim)?;
    let candidates: Vec<(Well, usize)> = (0..count)
        .flat_map(|m| [(Well::Plus, m), (Well::Minus, m)])
        .collect();

    let mut labels: Vec<LevelLabel> = Vec::with_capacity(count);
    for (level, psi) in spectrum.eigenvectors.iter().enumerate() {
        let overlaps: Vec<f64> = candidates
            .iter()
            .map(|&(well, m)| {
                let d = if well == Well::Plus { &d_plus } else { &d_minus };
                psi.amplitudes().dotc(&d.matrix().column(m)).norm_sqr()
            })
            .collect();
        let best = overlaps.iter().copied().fold(0.0, f64::max);
        let tied: Vec<usize> = (0..candidates.len())
            .filter(|&c| overlaps[c] >= best - LABEL_TIE_TOL)
            .collect();
        let claimed = |c: usize| labels.iter().position(|l| l.key() == candidates[c]);
        match tied.iter().copied().find(|&c| claimed(c).is_none()) {
            Some(c) => labels.push(LevelLabel {
                well: candidates[c].0,
                excitation: candidates[c].1,
                overlap: overlaps[c],
            }),
            None => {
                let c = tied[0];
                let other = claimed(c).expect("tied candidate is claimed");
                return Err(KpoError::LabelAmbiguity {
                    level_a: other,
                    level_b: level,
                    label: labels[other].to_string(),
                    overlap_a: labels[other].overlap,
                    overlap_b: overlaps[c],
                });
            }
        }
    }

    if (-2.0 * alpha.norm_sqr()).exp() < WELL_SEPARATION {
        let high = labels[0].well;
        for (level, label) in labels.iter().enumerate() {
            let expected_well = if level % 2 == 0 { high } else { high.other() };
            let expected = (expected_well, level / 2);
            if label.key() != expected {
                return Err(KpoError::LevelOrderChanged {
                    level,
                    expected: LevelLabel {
                        well: expected.0,
                        excitation: expected.1,
                        overlap: 0.0,
                    }
                    .to_string(),
                    found: label.to_string(),
                });
            }
        }
    }
    spectrum.labels = labels;
    Ok(spectrum)
}

/// Even and odd cat states `N+-(|alpha> +- |-alpha>)`, `alpha = sqrt(p)`.
/// At `p = 0` they reduce to the Fock states `|0>` and `|1>`.
pub fn cat_states(params: &KpoParams) -> Result<(StateVector, StateVector)> {
    params.validate()?;
    let alpha = params.alpha();
    let dim = params.dim;
    if alpha * alpha < 1e-14 {
        return Ok((StateVector::fock(0, dim)?, StateVector::fock(1, dim)?));
    }
    let plus = coherent_state(C64::new(alpha, 0.0), dim)?;
    let minus = coherent_state(C64::new(-alpha, 0.0), dim)?;
    let even = plus.add(&minus)?.normalized()?;
    let odd = plus.add(&minus.scaled(C64::new(-1.0, 0.0)))?.normalized()?;
    Ok((even, odd))
}

/// `|<psi_level| D(sign * alpha) |m>|^2`.
pub fn displaced_fock_overlap(
    spectrum: &Spectrum,
    level: usize,
    alpha: C64,
    m: usize,
    well: Well,
) -> Result<f64> {
    let psi = spectrum.eigenvectors.get(level).ok_or(KpoError::InvalidParameter {
        name: "level",
        value: level as f64,
        reason: "beyond the computed spectrum",
    })?;
    let dim = psi.dim();
    if m >= dim {
        return Err(KpoError::InvalidParameter {
            name: "m",
            value: m as f64,
            reason: "beyond the Fock truncation",
        });
    }
    let d = displacement(alpha * well.sign(), dim)?;
    Ok(psi.amplitudes().dotc(&d.matrix().column(m)).norm_sqr())
}

/// `<a'| H |a'>` for real `a'` at zero detuning: `-(1/2)a'^4 + p a'^2 + 2 Omega a'`.
pub fn effective_potential(params: &KpoParams, omega: f64, alpha_grid: &[f64]) -> Vec<f64> {
    alpha_grid
        .iter()
        .map(|&x| -0.5 * x.powi(4) + params.p * x * x + 2.0 * omega * x)
        .collect()
}
