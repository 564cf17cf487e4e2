//! Single-qubit tomography of the coherent-state qubit: gate pulse programs,
//! the diagonal readout and reconstruction of the full 2x2 density matrix.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{KpoError, Result};
use crate::fockspace::{coherent_state, DensityMatrix, StateVector, C64};
use crate::lindblad::{
    evolve, evolve_pure, make_ramp, make_rx_detuning, make_rz_drive, project, Controls, Waveform,
    DEFAULT_TOL,
};
use crate::model::KpoParams;
use crate::reflection::{ReflectionModel, DEFAULT_LEVELS};

const QUBIT_TOL: f64 = 1e-9;
const RANGE_TOL: f64 = 1e-6;
const MIN_SEPARATION: f64 = 1e-6;
/// Coarse-grid maxima below this are not candidate calibrations.
const ACCEPT_FIDELITY: f64 = 0.9;

type Matrix2 = [[C64; 2]; 2];

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[C64::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn dagger(a: &Matrix2) -> Matrix2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// Qubit state in the `{|alpha>, |-alpha>}` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensityMatrix {
    m: Matrix2,
}

impl QubitDensityMatrix {
    /// Checks unit trace, Hermiticity and positivity to 1e-9.
    pub fn new(m: Matrix2) -> Result<Self> {
        let trace = m[0][0] + m[1][1];
        if (trace - c(1.0, 0.0)).norm() > QUBIT_TOL {
            return Err(KpoError::InvalidState(format!("qubit trace {trace}")));
        }
        let herm = (m[0][1] - m[1][0].conj())
            .norm()
            .max(m[0][0].im.abs())
            .max(m[1][1].im.abs());
        if herm > QUBIT_TOL {
            return Err(KpoError::InvalidState(format!("qubit matrix not Hermitian: {herm:e}")));
        }
        let rho = Self { m };
        if rho.min_eigenvalue() < -QUBIT_TOL {
            return Err(KpoError::InvalidState(format!(
                "negative qubit eigenvalue {:e}",
                rho.min_eigenvalue()
            )));
        }
        Ok(rho)
    }

    /// `|psi><psi|` for `psi = c0 |alpha> + c1 |-alpha>` (normalized here).
    pub fn pure(c0: C64, c1: C64) -> Result<Self> {
        let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if norm == 0.0 {
            return Err(KpoError::InvalidState("zero qubit vector".into()));
        }
        let (a, b) = (c0 / norm, c1 / norm);
        Self::new([[a * a.conj(), a * b.conj()], [b * a.conj(), b * b.conj()]])
    }

    pub fn matrix(&self) -> &Matrix2 {
        &self.m
    }

    pub fn rho00(&self) -> f64 {
        self.m[0][0].re
    }

    pub fn rho01(&self) -> C64 {
        self.m[0][1]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.m[0][0].re;
        let d = self.m[1][1].re;
        let off = self.m[0][1].norm();
        0.5 * (a + d) - (0.25 * (a - d) * (a - d) + off * off).sqrt()
    }

    fn determinant(&self) -> f64 {
        (self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]).re
    }

    /// Uhlmann fidelity; for 2x2 states `Tr(rho sigma) + 2 sqrt(det rho det sigma)`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        let overlap: f64 = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (self.m[i][j] * other.m[j][i]).re)
            .sum();
        let dets = (self.determinant().max(0.0) * other.determinant().max(0.0)).sqrt();
        (overlap + 2.0 * dets).clamp(0.0, 1.0)
    }

    /// `sum rho_ij |i~><j~|` on the Fock basis with `|0~> = |alpha>`,
    /// `|1~> = |-alpha>`, renormalized for the small overlap of the wells.
    pub fn to_fock(&self, alpha: f64, dim: usize) -> Result<DensityMatrix> {
        let wells = well_states(alpha, dim)?;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..2 {
            for j in 0..2 {
                m += wells[i].amplitudes() * wells[j].amplitudes().adjoint() * self.m[i][j];
            }
        }
        let trace = m.trace();
        DensityMatrix::new(m / trace)
    }
}

fn well_states(alpha: f64, dim: usize) -> Result<[StateVector; 2]> {
    Ok([
        coherent_state(c(alpha, 0.0), dim)?,
        coherent_state(c(-alpha, 0.0), dim)?,
    ])
}

/// The six Bloch-cardinal states used to score tomography.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferenceState {
    XPlus,
    XMinus,
    YPlus,
    YMinus,
    ZPlus,
    ZMinus,
}

impl ReferenceState {
    pub const ALL: [ReferenceState; 6] = [
        ReferenceState::XPlus,
        ReferenceState::XMinus,
        ReferenceState::YPlus,
        ReferenceState::YMinus,
        ReferenceState::ZPlus,
        ReferenceState::ZMinus,
    ];

    /// Amplitudes on `(|alpha>, |-alpha>)`, unnormalized.
    pub fn amplitudes(self) -> (C64, C64) {
        match self {
            ReferenceState::XPlus => (c(1.0, 0.0), c(1.0, 0.0)),
            ReferenceState::XMinus => (c(1.0, 0.0), c(-1.0, 0.0)),
            ReferenceState::YPlus => (c(1.0, 0.0), c(0.0, 1.0)),
            ReferenceState::YMinus => (c(1.0, 0.0), c(0.0, -1.0)),
            ReferenceState::ZPlus => (c(1.0, 0.0), c(0.0, 0.0)),
            ReferenceState::ZMinus => (c(0.0, 0.0), c(1.0, 0.0)),
        }
    }

    pub fn density(self) -> QubitDensityMatrix {
        let (a, b) = self.amplitudes();
        QubitDensityMatrix::pure(a, b).expect("reference states are valid")
    }

    pub fn name(self) -> &'static str {
        match self {
            ReferenceState::XPlus => "x+",
            ReferenceState::XMinus => "x-",
            ReferenceState::YPlus => "y+",
            ReferenceState::YMinus => "y-",
            ReferenceState::ZPlus => "z+",
            ReferenceState::ZMinus => "z-",
        }
    }
}

impl fmt::Display for ReferenceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Identity,
    RxHalf,
    RyHalf,
    Rz(f64),
    Rx(f64),
}

impl Gate {
    /// Ideal 2x2 unitary in the `{|alpha>, |-alpha>}` basis.
    pub fn matrix(self) -> Matrix2 {
        let rx = |theta: f64| {
            let (s, co) = (0.5 * theta).sin_cos();
            [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
        };
        match self {
            Gate::Identity => [[c(1.0, 0.0), C64::default()], [C64::default(), c(1.0, 0.0)]],
            Gate::RxHalf => rx(FRAC_PI_2),
            Gate::Rx(theta) => rx(theta),
            Gate::RyHalf => {
                let (s, co) = (0.5 * FRAC_PI_2).sin_cos();
                [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
            }
            Gate::Rz(theta) => [
                [C64::from_polar(1.0, -0.5 * theta), C64::default()],
                [C64::default(), C64::from_polar(1.0, 0.5 * theta)],
            ],
        }
    }
}

/// `U rho U^dag` with the ideal gate matrix.
pub fn ideal_gate_action(gate: Gate, rho: &QubitDensityMatrix) -> QubitDensityMatrix {
    let u = gate.matrix();
    QubitDensityMatrix {
        m: mul(&mul(&u, &rho.m), &dagger(&u)),
    }
}

/// Durations of the elementary pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateTiming {
    pub t_x: f64,
    pub t_z: f64,
}

impl Default for GateTiming {
    fn default() -> Self {
        Self { t_x: 2.5, t_z: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxCalibration {
    pub theta: f64,
    pub t_x: f64,
    pub delta0: f64,
    /// Mean `|<ideal|out>|` over the six reference states.
    pub fidelity: f64,
}

/// Search interval and resolution of the detuning calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSearch {
    pub lower: f64,
    pub upper: f64,
    pub coarse_points: usize,
    pub tol: f64,
}

impl Default for CalibrationSearch {
    fn default() -> Self {
        Self {
            lower: -12.0,
            upper: 0.0,
            coarse_points: 49,
            tol: 1e-3,
        }
    }
}

/// Closed-system gate fidelity of the detuning pulse `Delta0 sin^2(pi t / T_x)`
/// against `Rx(theta)`: the amplitude overlap `|<ideal|out>|`, not its square,
/// averaged over the six reference states.
pub fn rx_gate_fidelity(params: &KpoParams, t_x: f64, theta: f64, delta0: f64) -> Result<f64> {
    let alpha = params.alpha();
    let closed = KpoParams {
        kappa_ex: 0.0,
        kappa_int: 0.0,
        gamma: 0.0,
        ..*params
    };
    let controls = Controls::new(Waveform::zero(), make_rx_detuning(delta0, t_x)?);
    let wells = well_states(alpha, params.dim)?;
    let mut evolved = Vec::with_capacity(2);
    for psi in &wells {
        let run = evolve_pure(psi, &closed, &controls, (0.0, t_x), &[t_x], 1e-10)?;
        evolved.push(run.states.into_iter().next().expect("one sample"));
    }
    let u = Gate::Rx(theta).matrix();
    let combine = |states: &[StateVector; 2], a: C64, b: C64| -> Result<StateVector> {
        states[0].scaled(a).add(&states[1].scaled(b))?.normalized()
    };
    let outputs = [evolved[0].clone(), evolved[1].clone()];
    let mut total = 0.0;
    for state in ReferenceState::ALL {
        let (a, b) = state.amplitudes();
        let out = combine(&outputs, a, b)?;
        let (ia, ib) = (u[0][0] * a + u[0][1] * b, u[1][0] * a + u[1][1] * b);
        let ideal = combine(&wells, ia, ib)?;
        total += ideal.inner(&out)?.norm();
    }
    Ok(total / 6.0)
}

/// Maximizes [`rx_gate_fidelity`] over `Delta0`: a coarse scan brackets the
/// local maximum closest to zero, golden-section search refines it.
pub fn calibrate_rx(
    params: &KpoParams,
    t_x: f64,
    theta: f64,
    search: CalibrationSearch,
) -> Result<RxCalibration> {
    if !(search.upper > search.lower) || search.coarse_points < 3 || !(search.tol > 0.0) {
        return Err(KpoError::Calibration(format!("bad search setup {search:?}")));
    }
    let score = |d: f64| rx_gate_fidelity(params, t_x, theta, d);
    let n = search.coarse_points;
    let step = (search.upper - search.lower) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|k| search.lower + step * k as f64).collect();
    let mut values = Vec::with_capacity(n);
    for &d in &grid {
        values.push(score(d)?);
    }
    // the relative phase keeps growing with |Delta0|, so Rx(theta + 2 pi k)
    // recurs further out; take the smallest pulse that reaches the target
    let best = (1..n - 1)
        .filter(|&k| values[k] >= values[k - 1] && values[k] >= values[k + 1])
        .filter(|&k| values[k] >= ACCEPT_FIDELITY)
        .min_by(|&a, &b| grid[a].abs().total_cmp(&grid[b].abs()))
        .ok_or_else(|| {
            KpoError::Calibration(format!(
                "no interior maximum above {ACCEPT_FIDELITY} in [{}, {}] for theta = {theta}",
                search.lower, search.upper
            ))
        })?;
    let mut lo = grid[best - 1];
    let mut hi = grid[best + 1];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (score(x1)?, score(x2)?);
    while hi - lo > search.tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = score(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = score(x2)?;
        }
    }
    let (mut delta0, mut fidelity) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if values[best] > fidelity {
        delta0 = grid[best];
        fidelity = values[best];
    }
    Ok(RxCalibration {
        theta,
        t_x,
        delta0,
        fidelity,
    })
}

/// Calibrated `Rx(pi/2)` and `Rx(-pi/2)` pulses for one pump amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateSet {
    pub p: f64,
    pub timing: GateTiming,
    pub rx_half: RxCalibration,
    pub rx_minus_half: RxCalibration,
}

impl GateSet {
    /// A negative detuning pulse reaches `Rx(-pi/2)` as the equivalent
    /// `Rx(3pi/2)`, with a larger amplitude than `Rx(pi/2)`.
    pub fn calibrate(params: &KpoParams, timing: GateTiming) -> Result<Self> {
        let search = CalibrationSearch::default();
        let rx_half = calibrate_rx(params, timing.t_x, FRAC_PI_2, search)?;
        let rx_minus_half = calibrate_rx(params, timing.t_x, -FRAC_PI_2, search)?;
        Ok(Self {
            p: params.p,
            timing,
            rx_half,
            rx_minus_half,
        })
    }

    /// Uses the given detunings without running the optimizer.
    pub fn with_detunings(p: f64, timing: GateTiming, half: f64, minus_half: f64) -> Self {
        let cal = |theta, delta0| RxCalibration {
            theta,
            t_x: timing.t_x,
            delta0,
            fidelity: f64::NAN,
        };
        Self {
            p,
            timing,
            rx_half: cal(FRAC_PI_2, half),
            rx_minus_half: cal(-FRAC_PI_2, minus_half),
        }
    }

    /// Pulse program for `RxHalf`, `RyHalf` or `Identity`, plus `Rz(theta)`.
    pub fn program(&self, gate: Gate) -> Result<GateProgram> {
        let t = self.timing;
        let (omega, delta, duration) = match gate {
            Gate::Identity => (Waveform::zero(), Waveform::zero(), 0.0),
            Gate::RxHalf => (
                Waveform::zero(),
                make_rx_detuning(self.rx_half.delta0, t.t_x)?.into(),
                t.t_x,
            ),
            Gate::Rz(theta) => (make_rz_drive(theta, t.t_z, self.p, 0.0)?.into(), Waveform::zero(), t.t_z),
            Gate::RyHalf => {
                let first = make_rx_detuning(self.rx_half.delta0, t.t_x)?;
                let back = make_rx_detuning(self.rx_minus_half.delta0, t.t_x)?.delayed(t.t_x + t.t_z);
                (
                    make_rz_drive(FRAC_PI_2, t.t_z, self.p, t.t_x)?.into(),
                    Waveform::new(vec![first, back]),
                    2.0 * t.t_x + t.t_z,
                )
            }
            Gate::Rx(_) => {
                return Err(KpoError::Calibration(
                    "arbitrary Rx angles need their own calibration".into(),
                ))
            }
        };
        Ok(GateProgram {
            gate,
            controls: Controls::new(omega, delta),
            duration,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GateProgram {
    pub gate: Gate,
    pub controls: Controls,
    /// `T_g`
    pub duration: f64,
}

/// How the diagonal element is read after the gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Readout {
    /// `<alpha| rho(T_g) |alpha>` taken as exact.
    GateEnd,
    /// Drive ramp, free delay, then the reflection coefficient at the probe.
    Reflection {
        omega0: f64,
        t_ramp: f64,
        /// `None` means `0.4 / kappa_ex`.
        t_delay: Option<f64>,
        /// Transition `(m, n)` the probe is tuned to.
        probe: (usize, usize),
    },
}

impl Readout {
    /// Ramp to `Omega0 = 0.1` over `20/K`, default delay, probe on `0 -> 2`.
    pub fn reflection() -> Self {
        Readout::Reflection {
            omega0: 0.1,
            t_ramp: 20.0,
            t_delay: None,
            probe: (0, 2),
        }
    }
}

/// `Gamma(0)` and `Gamma(1)` of the readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchors {
    pub gamma0: C64,
    pub gamma1: C64,
}

/// `rho00 = Re[(Gamma - Gamma(0)) / (Gamma(1) - Gamma(0))]` clamped to
/// `[0, 1]`, with the discarded imaginary part.
pub fn extract_rho00(measured: C64, anchors: &Anchors) -> Result<(f64, f64)> {
    let span = anchors.gamma1 - anchors.gamma0;
    if span.norm() <= MIN_SEPARATION {
        return Err(KpoError::InsensitiveProbe {
            separation: span.norm(),
        });
    }
    let ratio = (measured - anchors.gamma0) / span;
    Ok((ratio.re.clamp(0.0, 1.0), ratio.im))
}

/// Raw output of one simulated run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Signal {
    Population(f64),
    Reflection(C64),
}

/// Simulates gate and readout on `rho0` and returns the raw signal.
pub fn simulate_readout(
    rho0: &QubitDensityMatrix,
    program: &GateProgram,
    params: &KpoParams,
    readout: Readout,
) -> Result<Signal> {
    let alpha = params.alpha();
    let dim = params.dim;
    let start = rho0.to_fock(alpha, dim)?;
    match readout {
        Readout::GateEnd => {
            let rho = if program.duration > 0.0 {
                let run = evolve(
                    &start,
                    params,
                    &program.controls,
                    (0.0, program.duration),
                    &[program.duration],
                    DEFAULT_TOL,
                )?;
                run.states.into_iter().next().expect("one sample")
            } else {
                start
            };
            let plus = coherent_state(c(alpha, 0.0), dim)?;
            Ok(Signal::Population(rho.element(&plus, &plus)?.re))
        }
        Readout::Reflection {
            omega0,
            t_ramp,
            t_delay,
            probe,
        } => {
            let t_delay = match t_delay {
                Some(t) => t,
                None if params.kappa_ex > 0.0 => 0.4 / params.kappa_ex,
                None => {
                    return Err(KpoError::InvalidParameter {
                        name: "kappa_ex",
                        value: params.kappa_ex,
                        reason: "default delay 0.4/kappa_ex needs kappa_ex > 0",
                    })
                }
            };
            let t_g = program.duration;
            let mut omega = program.controls.omega.clone();
            omega.push(make_ramp(omega0, t_ramp)?.delayed(t_g));
            let controls = Controls {
                omega,
                delta: program.controls.delta.clone(),
            };
            let t_f = t_g + t_ramp + t_delay;
            let run = evolve(&start, params, &controls, (0.0, t_f), &[t_f], DEFAULT_TOL)?;
            let rho = run.states.into_iter().next().expect("one sample");
            let model = ReflectionModel::new(
                &KpoParams { omega0, ..*params },
                DEFAULT_LEVELS.max(probe.0.max(probe.1) + 1),
            )?;
            let rho_f = project(&rho, &model.spectrum)?;
            let omega_in = model.tables.transition(probe.0, probe.1);
            Ok(Signal::Reflection(model.gamma_unchecked(&rho_f, omega_in)?))
        }
    }
}

/// Measured `rho00` after `program`, using `anchors` for reflection readouts.
pub fn run_protocol(
    rho0: &QubitDensityMatrix,
    program: &GateProgram,
    params: &KpoParams,
    readout: Readout,
    anchors: Option<&Anchors>,
) -> Result<f64> {
    match simulate_readout(rho0, program, params, readout)? {
        Signal::Population(p) => Ok(p),
        Signal::Reflection(gamma) => {
            let anchors = anchors.ok_or_else(|| {
                KpoError::Calibration("reflection readout needs anchors".into())
            })?;
            Ok(extract_rho00(gamma, anchors)?.0)
        }
    }
}

/// Diagonal readings after the three tomography gates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    /// No gate.
    pub d_z: f64,
    /// After `Rx(pi/2)`.
    pub d_x: f64,
    /// After `Ry(pi/2)`.
    pub d_y: f64,
}

impl Measurements {
    /// Replaces each reading `cos^2(theta/2)` by `cos^2((theta + dtheta)/2)`.
    pub fn perturbed(&self, delta_theta: f64) -> Self {
        let f = |d: f64| {
            let theta = 2.0 * d.clamp(0.0, 1.0).sqrt().acos();
            (0.5 * (theta + delta_theta)).cos().powi(2)
        };
        Self {
            d_z: f(self.d_z),
            d_x: f(self.d_x),
            d_y: f(self.d_y),
        }
    }
}

/// `rho00 = d_z`, `Im rho01 = 1/2 - d_x`, `Re rho01 = 1/2 - d_y`, with the
/// off-diagonal scaled by `eta = min(1, sqrt(rho00 rho11) / |rho01|)`.
pub fn reconstruct(meas: &Measurements) -> Result<QubitDensityMatrix> {
    for value in [meas.d_z, meas.d_x, meas.d_y] {
        if !(value >= -RANGE_TOL && value <= 1.0 + RANGE_TOL) {
            return Err(KpoError::MeasurementRange { value });
        }
    }
    let d_z = meas.d_z.clamp(0.0, 1.0);
    let (r00, r11) = (d_z, 1.0 - d_z);
    let off = c(0.5 - meas.d_y, 0.5 - meas.d_x);
    let bound = (r00 * r11).sqrt();
    let eta = if off.norm() > bound { bound / off.norm() } else { 1.0 };
    let off = off * eta;
    Ok(QubitDensityMatrix {
        m: [[c(r00, 0.0), off], [off.conj(), c(r11, 0.0)]],
    })
}

/// Full simulated tomography for one parameter point.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub params: KpoParams,
    pub gates: GateSet,
    pub readout: Readout,
    pub anchors: Option<Anchors>,
}

impl Protocol {
    /// Anchors come from the same protocol on `|z->` and `|z+>`.
    pub fn new(params: KpoParams, gates: GateSet, readout: Readout) -> Result<Self> {
        params.validate()?;
        let mut protocol = Self {
            params,
            gates,
            readout,
            anchors: None,
        };
        if let Readout::Reflection { .. } = readout {
            let identity = gates.program(Gate::Identity)?;
            let signal = |state: ReferenceState| -> Result<C64> {
                match simulate_readout(&state.density(), &identity, &params, readout)? {
                    Signal::Reflection(g) => Ok(g),
                    Signal::Population(_) => unreachable!("reflection readout"),
                }
            };
            protocol.anchors = Some(Anchors {
                gamma0: signal(ReferenceState::ZMinus)?,
                gamma1: signal(ReferenceState::ZPlus)?,
            });
        }
        Ok(protocol)
    }

    pub fn measure(&self, rho0: &QubitDensityMatrix, gate: Gate) -> Result<f64> {
        let program = self.gates.program(gate)?;
        run_protocol(rho0, &program, &self.params, self.readout, self.anchors.as_ref())
    }

    pub fn measurements(&self, rho0: &QubitDensityMatrix) -> Result<Measurements> {
        Ok(Measurements {
            d_z: self.measure(rho0, Gate::Identity)?,
            d_x: self.measure(rho0, Gate::RxHalf)?,
            d_y: self.measure(rho0, Gate::RyHalf)?,
        })
    }
}

/// Mean fidelity over the reference states after perturbing every reading by
/// `delta_theta` and reconstructing.
pub fn error_injection_study(
    measured: &[(ReferenceState, Measurements)],
    delta_theta: f64,
) -> Result<f64> {
    if !(delta_theta.abs() < PI) {
        return Err(KpoError::InvalidParameter {
            name: "delta_theta",
            value: delta_theta,
            reason: "must satisfy |delta_theta| < pi",
        });
    }
    if measured.is_empty() {
        return Err(KpoError::InvalidState("no measured states".into()));
    }
    let mut total = 0.0;
    for (state, meas) in measured {
        let rho = reconstruct(&meas.perturbed(delta_theta))?;
        total += rho.fidelity(&state.density());
    }
    Ok(total / measured.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &QubitDensityMatrix, b: &QubitDensityMatrix, tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a.m[i][j] - b.m[i][j]).norm() < tol))
    }

    #[test]
    fn gate_matrices_are_unitary() {
        for gate in [Gate::Identity, Gate::RxHalf, Gate::RyHalf, Gate::Rz(0.7), Gate::Rx(-1.3)] {
            let u = gate.matrix();
            let p = mul(&u, &dagger(&u));
            assert!((p[0][0] - c(1.0, 0.0)).norm() < 1e-15);
            assert!(p[0][1].norm() < 1e-15);
        }
    }

    #[test]
    fn ry_is_rx_rz_rx() {
        let composed = mul(
            &mul(&Gate::Rx(-FRAC_PI_2).matrix(), &Gate::Rz(FRAC_PI_2).matrix()),
            &Gate::RxHalf.matrix(),
        );
        let ry = Gate::RyHalf.matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert!((composed[i][j] - ry[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn gates_expose_the_off_diagonal() {
        let rho = QubitDensityMatrix::pure(c(0.8, 0.0), c(0.36, 0.48)).unwrap();
        let r01 = rho.rho01();
        let x = ideal_gate_action(Gate::RxHalf, &rho);
        assert!((x.rho00() - (0.5 - r01.im)).abs() < 1e-14);
        let y = ideal_gate_action(Gate::RyHalf, &rho);
        assert!((y.rho00() - (0.5 - r01.re)).abs() < 1e-14);
        assert!(close(&ideal_gate_action(Gate::Identity, &rho), &rho, 1e-15));
    }

    #[test]
    fn reconstruct_examples() {
        let x_plus = reconstruct(&Measurements { d_z: 0.5, d_x: 0.5, d_y: 0.0 }).unwrap();
        assert!(close(&x_plus, &ReferenceState::XPlus.density(), 1e-15));

        // d_x = 0.4 implies |rho01| = 0.1 at d_z = 1, which is not PSD
        let repaired = reconstruct(&Measurements { d_z: 1.0, d_x: 0.4, d_y: 0.5 }).unwrap();
        assert!(close(&repaired, &ReferenceState::ZPlus.density(), 1e-15));

        let mixed = reconstruct(&Measurements { d_z: 0.5, d_x: 0.5, d_y: 0.5 }).unwrap();
        assert_eq!(mixed.rho01(), C64::default());
        assert_eq!(mixed.rho00(), 0.5);

        assert!(matches!(
            reconstruct(&Measurements { d_z: 1.1, d_x: 0.5, d_y: 0.5 }),
            Err(KpoError::MeasurementRange { .. })
        ));
    }

    #[test]
    fn repair_leaves_valid_states_alone() {
        for state in ReferenceState::ALL {
            let rho = state.density();
            let meas = Measurements {
                d_z: rho.rho00(),
                d_x: ideal_gate_action(Gate::RxHalf, &rho).rho00(),
                d_y: ideal_gate_action(Gate::RyHalf, &rho).rho00(),
            };
            let back = reconstruct(&meas).unwrap();
            assert!(close(&back, &rho, 1e-12), "{state}");
            assert!((back.fidelity(&rho) - 1.0).abs() < 1e-12);
            let again = reconstruct(&meas).unwrap();
            assert_eq!(back, again);
        }
    }

    #[test]
    fn extraction_is_affine() {
        let anchors = Anchors {
            gamma0: c(0.9, 0.1),
            gamma1: c(-0.3, -0.2),
        };
        assert_eq!(extract_rho00(anchors.gamma0, &anchors).unwrap().0, 0.0);
        assert_eq!(extract_rho00(anchors.gamma1, &anchors).unwrap().0, 1.0);
        let mid = (anchors.gamma0 + anchors.gamma1) * 0.5;
        assert!((extract_rho00(mid, &anchors).unwrap().0 - 0.5).abs() < 1e-15);
        let flat = Anchors {
            gamma0: c(1.0, 0.0),
            gamma1: c(1.0, 1e-9),
        };
        assert!(matches!(
            extract_rho00(c(1.0, 0.0), &flat),
            Err(KpoError::InsensitiveProbe { .. })
        ));
    }

    #[test]
    fn perturbation_model() {
        let m = Measurements { d_z: 1.0, d_x: 0.5, d_y: 0.0 };
        assert!((m.perturbed(0.0).d_x - m.d_x).abs() < 1e-15);
        let shifted = m.perturbed(0.2);
        assert!((shifted.d_z - 0.1f64.cos().powi(2)).abs() < 1e-15);
        assert!((shifted.d_x - (0.25 * PI + 0.1).cos().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn qubit_fidelity_matches_pure_overlap() {
        let a = QubitDensityMatrix::pure(c(1.0, 0.0), c(0.3, 0.2)).unwrap();
        let b = QubitDensityMatrix::pure(c(0.2, -0.5), c(1.0, 0.0)).unwrap();
        let (a0, a1) = (c(1.0, 0.0), c(0.3, 0.2));
        let (b0, b1) = (c(0.2, -0.5), c(1.0, 0.0));
        let na = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        let nb = (b0.norm_sqr() + b1.norm_sqr()).sqrt();
        let overlap = ((a0.conj() * b0 + a1.conj() * b1) / (na * nb)).norm_sqr();
        assert!((a.fidelity(&b) - overlap).abs() < 1e-12);
    }
}
