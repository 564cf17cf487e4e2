//! One function per experiment. Sweep points run on the rayon pool and are
//! gathered in grid order, so output never depends on scheduling.

use std::f64::consts::PI;

use rayon::prelude::*;

use kpo_core::fockspace::{state_fidelity, wigner, C64};
use kpo_core::lindblad::{
    evolve, make_ramp, populations_in_eigenbasis, project, Controls, EvolutionResult, Waveform,
};
use kpo_core::model::{
    build_hamiltonian, default_dim, displaced_fock_overlap, top_eigenpairs, top_spectrum, Well,
};
use kpo_core::reflection::{
    diagonal_rho_f, nominal_decay_rates, qubit_rho_f, time_averaged_gamma, QubitLoading,
    ReflectionModel, DEFAULT_LEVELS,
};
use kpo_core::tomography::{
    error_injection_study, reconstruct, GateSet, GateTiming, Measurements, Protocol,
    QubitDensityMatrix, Readout, ReferenceState,
};
use kpo_core::{DensityMatrix, KpoParams};

use crate::config::{range, Experiment, ExperimentConfig};
use crate::csv::Dataset;
use crate::error::{AtPoint, ExperimentError, Result};

/// Runs `config` and returns its datasets in a fixed order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    match config.experiment {
        Experiment::RampRelaxation => ramp_relaxation(config),
        Experiment::GammaMaps => gamma_maps(config),
        Experiment::GammaComplexPlane => gamma_complex_plane(config),
        Experiment::SensitivityVsWin => sensitivity_vs_win(config),
        Experiment::SensitivityVsP => sensitivity_vs_p(config),
        Experiment::SensitivityVsOmega => sensitivity_vs_omega(config),
        Experiment::TomoFidelityVsKex => tomo_fidelity_vs_kex(config),
        Experiment::WignerReconstruction => wigner_reconstruction(config),
        Experiment::DthetaRobustness => dtheta_robustness(config),
        Experiment::OffdiagEffect => offdiag_effect(config),
        Experiment::DisplacedOverlaps => displaced_overlaps(config),
        Experiment::DephasingPopulations => dephasing_populations(config),
        Experiment::GammabarVsRho00 => gammabar_vs_rho00(config),
        Experiment::NominalRates => nominal_rates(config),
    }
}

/// Parameters with the configured losses at the given pump, drive and
/// dephasing. `dim = 0` uses the default truncation for `p`.
fn params_at(config: &ExperimentConfig, p: f64, omega0: f64, kappa_ex: f64, gamma: f64) -> Result<KpoParams> {
    let dim = match config.scalar("dim") as usize {
        0 => default_dim(p),
        d => d,
    };
    let params = KpoParams::new(p)
        .with_drive(omega0)
        .with_losses(kappa_ex, kappa_ex * config.scalar("kappa_int_ratio"))
        .with_dephasing(gamma)
        .with_dim(dim);
    params.validate().at(|| format!("p = {p}"))?;
    Ok(params)
}

fn base_params(config: &ExperimentConfig) -> Result<KpoParams> {
    params_at(
        config,
        config.scalar("p"),
        config.scalar("omega0"),
        config.scalar("kappa_ex"),
        config.scalar("gamma"),
    )
}

fn tag(x: f64) -> String {
    format!("{x}")
}

/// Probe offsets used throughout: the `0 -> 2` and `1 -> 3` lines.
const LINE_20: (usize, usize) = (0, 2);
const LINE_31: (usize, usize) = (1, 3);

fn sensitivity_pair(model: &ReflectionModel) -> kpo_core::Result<(f64, f64)> {
    let s20 = model.sensitivity_at(model.tables.transition(LINE_20.0, LINE_20.1))?;
    let s31 = model.sensitivity_at(model.tables.transition(LINE_31.0, LINE_31.1))?;
    Ok((s20, s31))
}

fn qubit_start(rho00: f64) -> kpo_core::Result<QubitDensityMatrix> {
    QubitDensityMatrix::pure(C64::new(rho00.sqrt(), 0.0), C64::new((1.0 - rho00).sqrt(), 0.0))
}

/// Ramp of the drive from zero, then constant.
fn ramp_controls(config: &ExperimentConfig, omega0: f64) -> Result<Controls> {
    let ramp = make_ramp(omega0, config.scalar("t_ramp")).at(|| "ramp".into())?;
    Ok(Controls::new(ramp, Waveform::zero()))
}

fn ramp_relaxation(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let params = base_params(config)?;
    let rho00 = config.scalar("rho00");
    let point = || format!("p = {}, rho00 = {rho00}", params.p);
    let start = qubit_start(rho00)
        .and_then(|q| q.to_fock(params.alpha(), params.dim))
        .at(point)?;
    let times = range(0.0, config.scalar("dt"), config.scalar("t_max"))?;
    let controls = ramp_controls(config, params.omega0)?;
    let t_max = *times.last().expect("non-empty grid");
    let run = evolve(&start, &params, &controls, (0.0, t_max), &times, config.scalar("tol")).at(point)?;

    let h = build_hamiltonian(&params, params.omega0, 0.0).at(point)?;
    let spectrum = top_spectrum(&h, 4, C64::new(params.alpha(), 0.0)).at(point)?;
    let index = |well: Well| {
        spectrum
            .labels
            .iter()
            .position(|l| l.well == well && l.excitation == 0)
            .ok_or_else(|| ExperimentError::Numeric {
                point: point(),
                source: kpo_core::KpoError::InvalidState(format!("no ground level in the {well:?} well")),
            })
    };
    let (i0, i1) = (index(Well::Plus)?, index(Well::Minus)?);
    let target = spectrum.eigenvectors[i0].projector() * C64::new(rho00, 0.0)
        + spectrum.eigenvectors[i1].projector() * C64::new(1.0 - rho00, 0.0);
    let target = DensityMatrix::new(target).at(point)?;

    let mut data = Dataset::new(
        "ramp_relaxation",
        &["t", "infidelity", "pop00", "pop11", "offdiag"],
    )
    .with_note("steps", run.diagnostics.steps)
    .with_note("max_trace_drift", run.diagnostics.max_trace_drift);
    let rows: Vec<Vec<f64>> = run
        .times
        .par_iter()
        .zip(run.states.par_iter())
        .map(|(&t, rho)| {
            let f = state_fidelity(rho, &target)?;
            let proj = project(rho, &spectrum)?;
            Ok(vec![
                t,
                1.0 - f,
                proj[(i0, i0)].norm(),
                proj[(i1, i1)].norm(),
                proj[(i0, i1)].norm(),
            ])
        })
        .collect::<kpo_core::Result<_>>()
        .at(point)?;
    data.rows = rows;
    Ok(vec![data])
}

fn gamma_maps(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let omega_grid = config.list("omega_in_grid");
    let omega0 = config.scalar("omega0");
    let per_p: Vec<Vec<(f64, C64, C64)>> = config
        .list("p_grid")
        .par_iter()
        .map(|&p| {
            let params = params_at(config, p, omega0, config.scalar("kappa_ex"), config.scalar("gamma"))?;
            let model = ReflectionModel::new(&params, DEFAULT_LEVELS).at(|| format!("p = {p}"))?;
            omega_grid
                .iter()
                .map(|&w| {
                    let point = || format!("p = {p}, omega_in = {w}");
                    Ok((w, model.gamma_diagonal(0.0, w).at(point)?, model.gamma_diagonal(1.0, w).at(point)?))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (which, name) in [(0, "gamma_maps_rho00_0"), (1, "gamma_maps_rho00_1")] {
        let mut data = Dataset::new(name, &["p", "omega_in", "re_gamma", "im_gamma"])
            .with_note("rho00", which)
            .with_note("omega_in", "measured from half the pump frequency");
        for (&p, rows) in config.list("p_grid").iter().zip(&per_p) {
            for &(w, g0, g1) in rows {
                let g = if which == 0 { g0 } else { g1 };
                data.push(vec![p, w, g.re, g.im]);
            }
        }
        out.push(data);
    }
    Ok(out)
}

fn gamma_complex_plane(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let params = base_params(config)?;
    let model = ReflectionModel::new(&params, DEFAULT_LEVELS).at(|| format!("p = {}", params.p))?;
    let mut out = Vec::new();
    for (line, label) in [(LINE_20, "20"), (LINE_31, "31")] {
        let center = model.tables.transition(line.0, line.1);
        let gamma = |rho00: f64, dw: f64| {
            model
                .gamma_diagonal(rho00, center + dw)
                .at(|| format!("rho00 = {rho00}, d_omega = {dw}"))
        };
        let mut sweep = Dataset::new(
            format!("gamma_complex_plane_sweep_{label}"),
            &["rho00", "d_omega", "re_gamma", "im_gamma"],
        )
        .with_note("line_frequency", center);
        for &rho00 in config.list("rho00_grid") {
            for &dw in config.list("d_omega_grid") {
                let g = gamma(rho00, dw)?;
                sweep.push(vec![rho00, dw, g.re, g.im]);
            }
        }
        let mut fixed = Dataset::new(
            format!("gamma_complex_plane_fixed_{label}"),
            &["d_omega", "rho00", "re_gamma", "im_gamma"],
        )
        .with_note("line_frequency", center);
        for &dw in config.list("d_omega_fixed") {
            for &rho00 in config.list("rho00_grid") {
                let g = gamma(rho00, dw)?;
                fixed.push(vec![dw, rho00, g.re, g.im]);
            }
        }
        out.push(sweep);
        out.push(fixed);
    }
    Ok(out)
}

fn sensitivity_vs_win(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let omega0 = config.scalar("omega0");
    let mut out = Vec::new();
    for &p in config.list("p_grid") {
        let mut data = Dataset::new(
            format!("sensitivity_vs_win_p{}", tag(p)),
            &["kappa_ex", "omega_in", "sensitivity"],
        )
        .with_note("panel_p", p);
        let mut lines = Dataset::new(
            format!("sensitivity_vs_win_p{}_lines", tag(p)),
            &["m", "n", "delta_omega"],
        );
        for (k, &kappa_ex) in config.list("kappa_ex_grid").iter().enumerate() {
            let params = params_at(config, p, omega0, kappa_ex, config.scalar("gamma"))?;
            let model = ReflectionModel::new(&params, DEFAULT_LEVELS).at(|| format!("p = {p}"))?;
            let rows: Vec<Vec<f64>> = config
                .list("omega_in_grid")
                .par_iter()
                .map(|&w| {
                    let s = model
                        .sensitivity_at(w)
                        .at(|| format!("p = {p}, kappa_ex = {kappa_ex}, omega_in = {w}"))?;
                    Ok(vec![kappa_ex, w, s])
                })
                .collect::<Result<_>>()?;
            data.rows.extend(rows);
            if k == 0 {
                for m in 0..model.tables.levels() {
                    for n in m + 1..model.tables.levels() {
                        lines.push(vec![m as f64, n as f64, model.tables.transition(m, n)]);
                    }
                }
            }
        }
        out.push(data);
        out.push(lines);
    }
    Ok(out)
}

fn sensitivity_vs_p(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let mut out = Vec::new();
    for &omega in config.list("omega_grid") {
        let rows: Vec<Vec<f64>> = config
            .list("p_grid")
            .par_iter()
            .map(|&p| {
                let params = params_at(config, p, omega, config.scalar("kappa_ex"), config.scalar("gamma"))?;
                let point = || format!("p = {p}, omega = {omega}");
                let model = ReflectionModel::new(&params, DEFAULT_LEVELS).at(point)?;
                let (s20, s31) = sensitivity_pair(&model).at(point)?;
                Ok(vec![p, s20, s31])
            })
            .collect::<Result<_>>()?;
        let mut data = Dataset::new(format!("sensitivity_vs_p_omega{}", tag(omega)), &["p", "s20", "s31"])
            .with_note("panel_omega", omega)
            .with_note("asymptote", 2.0 / (1.0 + config.scalar("kappa_int_ratio")));
        data.rows = rows;
        out.push(data);
    }
    Ok(out)
}

fn sensitivity_vs_omega(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let p = config.scalar("p");
    let rows: Vec<Vec<f64>> = config
        .list("omega_grid")
        .par_iter()
        .map(|&omega| {
            let params = params_at(config, p, omega, config.scalar("kappa_ex"), config.scalar("gamma"))?;
            let point = || format!("p = {p}, omega = {omega}");
            let model = ReflectionModel::new(&params, DEFAULT_LEVELS).at(point)?;
            let (s20, s31) = sensitivity_pair(&model).at(point)?;
            Ok(vec![omega, s20, s31])
        })
        .collect::<Result<_>>()?;
    let mut data = Dataset::new("sensitivity_vs_omega", &["omega", "s20", "s31"]);
    data.rows = rows;
    Ok(vec![data])
}

/// Calibrated gates for the configured pump; decoherence plays no part.
fn gate_set(config: &ExperimentConfig) -> Result<GateSet> {
    let timing = GateTiming {
        t_x: config.scalar("t_x"),
        t_z: config.scalar("t_z"),
    };
    let params = params_at(config, config.scalar("p"), 0.0, 0.0, 0.0)?;
    GateSet::calibrate(&params, timing).at(|| format!("Rx calibration at p = {}", params.p))
}

fn reflection_readout(config: &ExperimentConfig) -> Readout {
    let t_delay = config.scalar("t_delay");
    Readout::Reflection {
        omega0: config.scalar("omega0"),
        t_ramp: config.scalar("t_ramp"),
        t_delay: (t_delay > 0.0).then_some(t_delay),
        probe: LINE_20,
    }
}

/// Tomography readings for every reference state, in `ReferenceState::ALL`
/// order.
fn measure_all(
    config: &ExperimentConfig,
    gates: GateSet,
    kappa_ex: f64,
    readout: Readout,
    states: &[ReferenceState],
) -> Result<Vec<Measurements>> {
    let params = params_at(config, config.scalar("p"), 0.0, kappa_ex, config.scalar("gamma"))?;
    let point = |state: Option<ReferenceState>| {
        let state = state.map_or("anchors".to_string(), |s| s.to_string());
        format!("kappa_ex = {kappa_ex}, {state}")
    };
    let protocol = Protocol::new(params, gates, readout).at(|| point(None))?;
    states
        .par_iter()
        .map(|&s| protocol.measurements(&s.density()).at(|| point(Some(s))))
        .collect()
}

fn mean_fidelity(states: &[ReferenceState], meas: &[Measurements]) -> Result<f64> {
    let mut total = 0.0;
    for (s, m) in states.iter().zip(meas) {
        total += reconstruct(m).at(|| s.to_string())?.fidelity(&s.density());
    }
    Ok(total / states.len() as f64)
}

fn tomo_fidelity_vs_kex(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let gates = gate_set(config)?;
    let full = config.scalar("full_protocol") > 0.0;
    let states = ReferenceState::ALL;
    let mut columns = vec!["kappa_ex", "fidelity_gate_end"];
    if full {
        columns.push("fidelity_full");
    }
    let mut summary = Dataset::new("tomo_fidelity_vs_kex", &columns)
        .with_note("rx_half_delta0", gates.rx_half.delta0)
        .with_note("rx_minus_half_delta0", gates.rx_minus_half.delta0);
    let mut detail = Dataset::new(
        "tomo_fidelity_vs_kex_states",
        &["kappa_ex", "state", "full_protocol", "d_z", "d_x", "d_y", "fidelity"],
    )
    .with_note("state", "0..5 = x+, x-, y+, y-, z+, z-");
    for &kappa_ex in config.list("kappa_ex_grid") {
        let mut row = vec![kappa_ex];
        let mut readouts = vec![(0.0, Readout::GateEnd)];
        if full {
            readouts.push((1.0, reflection_readout(config)));
        }
        for (flag, readout) in readouts {
            let meas = measure_all(config, gates, kappa_ex, readout, &states)?;
            for (k, (s, m)) in states.iter().zip(&meas).enumerate() {
                let f = reconstruct(m).at(|| s.to_string())?.fidelity(&s.density());
                detail.push(vec![kappa_ex, k as f64, flag, m.d_z, m.d_x, m.d_y, f]);
            }
            row.push(mean_fidelity(&states, &meas)?);
        }
        summary.push(row);
    }
    Ok(vec![summary, detail])
}

fn wigner_grid(config: &ExperimentConfig) -> (Vec<(f64, f64)>, Vec<C64>) {
    let coords: Vec<(f64, f64)> = config
        .list("x_grid")
        .iter()
        .flat_map(|&x| config.list("y_grid").iter().map(move |&y| (x, y)))
        .collect();
    let points = coords.iter().map(|&(x, y)| C64::new(x, y)).collect();
    (coords, points)
}

fn wigner_dataset(
    name: String,
    rho: &QubitDensityMatrix,
    params: &KpoParams,
    coords: &[(f64, f64)],
    points: &[C64],
) -> Result<Dataset> {
    let fock = rho.to_fock(params.alpha(), params.dim).at(|| name.clone())?;
    let values: Vec<f64> = points
        .par_chunks(64)
        .flat_map_iter(|chunk| wigner(&fock, chunk))
        .collect();
    let mut data = Dataset::new(name, &["x", "y", "w"]);
    for (&(x, y), w) in coords.iter().zip(values) {
        data.push(vec![x, y, w]);
    }
    Ok(data)
}

fn wigner_reconstruction(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let gates = gate_set(config)?;
    let (coords, points) = wigner_grid(config);
    let states = [ReferenceState::XPlus, ReferenceState::YPlus];
    let names = ["xplus", "yplus"];
    let params = base_params(config)?;
    let mut out = Vec::new();
    let mut fidelity = Dataset::new("wigner_reconstruction_fidelity", &["kappa_ex", "state", "fidelity"])
        .with_note("state", "0 = x+, 2 = y+");
    for (s, name) in states.iter().zip(names) {
        out.push(wigner_dataset(
            format!("wigner_reconstruction_{name}_reference"),
            &s.density(),
            &params,
            &coords,
            &points,
        )?);
    }
    for &kappa_ex in config.list("kappa_ex_grid") {
        let meas = measure_all(config, gates, kappa_ex, reflection_readout(config), &states)?;
        for ((s, name), m) in states.iter().zip(names).zip(&meas) {
            let rho = reconstruct(m).at(|| s.to_string())?;
            let index = ReferenceState::ALL.iter().position(|r| r == s).expect("listed") as f64;
            fidelity.push(vec![kappa_ex, index, rho.fidelity(&s.density())]);
            out.push(
                wigner_dataset(
                    format!("wigner_reconstruction_{name}_kex{}", tag(kappa_ex)),
                    &rho,
                    &params,
                    &coords,
                    &points,
                )?
                .with_note("panel_kappa_ex", kappa_ex),
            );
        }
    }
    out.push(fidelity);
    Ok(out)
}

fn dtheta_robustness(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let gates = gate_set(config)?;
    let readout = if config.scalar("full_protocol") > 0.0 {
        reflection_readout(config)
    } else {
        Readout::GateEnd
    };
    let states = ReferenceState::ALL;
    let meas = measure_all(config, gates, config.scalar("kappa_ex"), readout, &states)?;
    let cached: Vec<(ReferenceState, Measurements)> = states.iter().copied().zip(meas).collect();
    let mut data = Dataset::new("dtheta_robustness", &["dtheta_over_pi", "fidelity"]);
    for &x in config.list("dtheta_over_pi_grid") {
        let f = error_injection_study(&cached, x * PI).at(|| format!("dtheta/pi = {x}"))?;
        data.push(vec![x, f]);
    }
    Ok(vec![data])
}

fn offdiag_effect(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let half = C64::new(0.5, 0.0);
    let zero = C64::default();
    let coherent = [[half, half], [half, half]];
    let mixed = [[half, zero], [zero, half]];
    let omega0 = config.scalar("omega0");
    let rows: Vec<Vec<f64>> = config
        .list("p_grid")
        .par_iter()
        .map(|&p| {
            let params = params_at(config, p, omega0, config.scalar("kappa_ex"), config.scalar("gamma"))?;
            let point = || format!("p = {p}");
            let model = ReflectionModel::new(&params, DEFAULT_LEVELS).at(point)?;
            let load = |rho| qubit_rho_f(&model.spectrum, params.alpha(), rho, QubitLoading::Adiabatic);
            let (with, without) = (load(&coherent).at(point)?, load(&mixed).at(point)?);
            let mut row = vec![p];
            for (m, n) in [LINE_20, LINE_31] {
                let w = model.tables.transition(m, n);
                let (a, b) = (model.gamma(&with, w).at(point)?, model.gamma(&without, w).at(point)?);
                row.extend([a.norm(), b.norm(), (a - b).norm()]);
            }
            row.push(model.tables.x[(1, 2)].norm());
            row.push(model.tables.x[(0, 3)].norm());
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut data = Dataset::new(
        "offdiag_effect",
        &[
            "p",
            "abs_gamma_rho_20",
            "abs_gamma_rhop_20",
            "abs_diff_20",
            "abs_gamma_rho_31",
            "abs_gamma_rhop_31",
            "abs_diff_31",
            "abs_x12",
            "abs_x03",
        ],
    )
    .with_note("rho", "(|0~> + |1~>)(<0~| + <1~|)/2")
    .with_note("rhop", "(|0~><0~| + |1~><1~|)/2");
    data.rows = rows;
    Ok(vec![data])
}

/// `|<psi_i| D(+-alpha) |m>|^2` for `psi_0, psi_2` in the `+` well and
/// `psi_1, psi_3` in the `-` well, `m = 0, 0, 1, 1`.
fn displaced_row(config: &ExperimentConfig, p: f64, omega: f64) -> Result<Vec<f64>> {
    let params = params_at(config, p, omega, config.scalar("kappa_ex"), config.scalar("gamma"))?;
    let point = || format!("p = {p}, omega = {omega}");
    let h = build_hamiltonian(&params, omega, 0.0).at(point)?;
    let spectrum = top_eigenpairs(&h, 4).at(point)?;
    let alpha = C64::new(params.alpha(), 0.0);
    [(0, Well::Plus, 0), (1, Well::Minus, 0), (2, Well::Plus, 1), (3, Well::Minus, 1)]
        .into_iter()
        .map(|(level, well, m)| displaced_fock_overlap(&spectrum, level, alpha, m, well).at(point))
        .collect()
}

fn displaced_overlaps(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let columns = |x: &str| [x, "psi0", "psi1", "psi2", "psi3"].map(str::to_string).to_vec();
    let omega0 = config.scalar("omega0");
    let p0 = config.scalar("p");
    let vs_p: Vec<Vec<f64>> = config
        .list("p_grid")
        .par_iter()
        .map(|&p| Ok([vec![p], displaced_row(config, p, omega0)?].concat()))
        .collect::<Result<_>>()?;
    let vs_omega: Vec<Vec<f64>> = config
        .list("omega_grid")
        .par_iter()
        .map(|&w| Ok([vec![w], displaced_row(config, p0, w)?].concat()))
        .collect::<Result<_>>()?;
    let mut a = Dataset::new("displaced_overlaps_vs_p", &[]).with_note("panel_omega", omega0);
    a.columns = columns("p");
    a.rows = vs_p;
    let mut b = Dataset::new("displaced_overlaps_vs_omega", &[]).with_note("panel_p", p0);
    b.columns = columns("omega");
    b.rows = vs_omega;
    Ok(vec![a, b])
}

/// Ramp from the qubit state `sqrt(rho00)|alpha> + sqrt(1 - rho00)|-alpha>`.
fn relax(config: &ExperimentConfig, gamma: f64, rho00: f64, times: &[f64]) -> Result<(KpoParams, EvolutionResult)> {
    let params = params_at(config, config.scalar("p"), config.scalar("omega0"), config.scalar("kappa_ex"), gamma)?;
    let point = || format!("gamma = {gamma}, rho00 = {rho00}");
    let start = qubit_start(rho00)
        .and_then(|q| q.to_fock(params.alpha(), params.dim))
        .at(point)?;
    let controls = ramp_controls(config, params.omega0)?;
    let t_end = *times.last().expect("non-empty grid");
    let run = evolve(&start, &params, &controls, (0.0, t_end), times, config.scalar("tol")).at(point)?;
    Ok((params, run))
}

fn dephasing_populations(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let times = range(0.0, config.scalar("dt"), config.scalar("t_max"))?;
    let rho00 = config.scalar("rho00");
    config
        .list("gamma_grid")
        .par_iter()
        .map(|&gamma| {
            let (params, run) = relax(config, gamma, rho00, &times)?;
            let point = || format!("gamma = {gamma}");
            let h = build_hamiltonian(&params, params.omega0, 0.0).at(point)?;
            let spectrum = top_eigenpairs(&h, DEFAULT_LEVELS).at(point)?;
            let projected = populations_in_eigenbasis(&run, &spectrum).at(point)?;
            let mut data = Dataset::new(
                format!("dephasing_populations_gamma{}", tag(gamma)),
                &["t", "pop0", "pop1", "pop2", "pop3", "pop4", "offdiag01"],
            )
            .with_note("panel_gamma", gamma);
            for (&t, m) in run.times.iter().zip(&projected) {
                let mut row = vec![t];
                row.extend((0..DEFAULT_LEVELS).map(|i| m[(i, i)].re));
                row.push(m[(0, 1)].norm());
                data.push(row);
            }
            Ok(data)
        })
        .collect()
}

fn gammabar_vs_rho00(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let (start, end) = (config.scalar("window_start"), config.scalar("window_end"));
    if !(end > start) {
        return Err(ExperimentError::Config(format!(
            "window_end {end} must exceed window_start {start}"
        )));
    }
    let times = range(start, config.scalar("dt"), end)?;
    let points: Vec<(f64, f64)> = config
        .list("gamma_grid")
        .iter()
        .flat_map(|&g| config.list("rho00_grid").iter().map(move |&r| (g, r)))
        .collect();
    let values: Vec<C64> = points
        .par_iter()
        .map(|&(gamma, rho00)| {
            let (params, run) = relax(config, gamma, rho00, &times)?;
            let point = || format!("gamma = {gamma}, rho00 = {rho00}");
            let model = ReflectionModel::new(&params, DEFAULT_LEVELS).at(point)?;
            let w = model.tables.transition(LINE_20.0, LINE_20.1);
            time_averaged_gamma(&run, &model, w, (start, end)).at(point)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &gamma in config.list("gamma_grid") {
        let mut data = Dataset::new(
            format!("gammabar_vs_rho00_gamma{}", tag(gamma)),
            &["rho00", "re_gammabar", "im_gammabar"],
        )
        .with_note("panel_gamma", gamma);
        for (&(g, rho00), v) in points.iter().zip(&values) {
            if g == gamma {
                data.push(vec![rho00, v.re, v.im]);
            }
        }
        out.push(data);
    }
    Ok(out)
}

fn nominal_rates(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let omega0 = config.scalar("omega0");
    let gamma = config.scalar("gamma");
    let rows: Vec<Vec<f64>> = config
        .list("alpha_grid")
        .par_iter()
        .map(|&alpha| {
            let p = alpha * alpha;
            let point = || format!("alpha = {alpha}");
            let rates = |gamma: f64| -> Result<_> {
                let params = params_at(config, p, omega0, config.scalar("kappa_ex"), gamma)?;
                let model = ReflectionModel::new(&params, DEFAULT_LEVELS).at(point)?;
                let rho_f = diagonal_rho_f(DEFAULT_LEVELS, 1.0);
                let r = nominal_decay_rates(&model.tables, &rho_f, model.couplings, LINE_20).at(point)?;
                let w = model.tables.transition(LINE_20.0, LINE_20.1);
                let g1 = model.gamma_diagonal(1.0, w).at(point)?;
                let g0 = model.gamma_diagonal(0.0, w).at(point)?;
                Ok((r, g1, g0))
            };
            let (r, g1, g0) = rates(gamma)?;
            let (r0, _, _) = rates(0.0)?;
            Ok(vec![alpha, r.kappa_ex, r.kappa_int, r0.kappa_int, g1.re, g0.re])
        })
        .collect::<Result<_>>()?;
    let mut data = Dataset::new(
        "nominal_rates",
        &[
            "alpha",
            "kappa_ex_nominal",
            "kappa_int_nominal",
            "kappa_int_nominal_gamma0",
            "re_gamma1",
            "re_gamma0",
        ],
    )
    .with_note("rho_f", "diag(1, 0, ...)");
    data.rows = rows;
    Ok(vec![data])
}
