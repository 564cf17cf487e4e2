//! Experiment names, caption-default settings and override parsing.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

/// A setting is a number or a grid of numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Scalar(x) => write!(f, "{x}"),
            Value::List(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

impl FromStr for Value {
    type Err = ExperimentError;

    /// `1.5`, `1,2,3` or an inclusive range `start:step:stop`.
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| ExperimentError::Config(format!("`{s}` is not a number")))
        };
        if text.contains(':') {
            let parts: Vec<f64> = text.split(':').map(number).collect::<Result<_>>()?;
            let [start, step, stop] = parts[..] else {
                return Err(ExperimentError::Config(format!(
                    "range `{text}` must be start:step:stop"
                )));
            };
            return Ok(Value::List(range(start, step, stop)?));
        }
        if text.contains(',') {
            return Ok(Value::List(text.split(',').map(number).collect::<Result<_>>()?));
        }
        Ok(Value::Scalar(number(text)?))
    }
}

/// Inclusive grid from `start` to `stop`; the last point snaps to `stop`.
pub fn range(start: f64, step: f64, stop: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(ExperimentError::Config(format!(
            "bad range {start}:{step}:{stop}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(ExperimentError::Config(format!("range {start}:{step}:{stop} too long")));
    }
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

macro_rules! experiments {
    ($($variant:ident => $name:literal, $about:literal;)*) => {
        /// The experiments this tool can run.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum Experiment {
            $($variant,)*
        }

        impl Experiment {
            pub const ALL: &'static [Experiment] = &[$(Experiment::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Experiment::$variant => $name,)*
                }
            }

            pub fn about(self) -> &'static str {
                match self {
                    $(Experiment::$variant => $about,)*
                }
            }
        }
    };
}

experiments! {
    RampRelaxation => "ramp_relaxation", "infidelity and populations while the drive ramps and the state relaxes";
    GammaMaps => "gamma_maps", "Re and Im of Gamma over (omega_in, p) for rho00 = 0 and 1";
    GammaComplexPlane => "gamma_complex_plane", "Gamma in the complex plane near the 0-2 and 1-3 lines";
    SensitivityVsWin => "sensitivity_vs_win", "|Gamma(1) - Gamma(0)| against probe frequency";
    SensitivityVsP => "sensitivity_vs_p", "sensitivity at the 0-2 and 1-3 lines against p";
    SensitivityVsOmega => "sensitivity_vs_omega", "sensitivity at the 0-2 and 1-3 lines against the drive";
    TomoFidelityVsKex => "tomo_fidelity_vs_kex", "average tomography fidelity against kappa_ex";
    WignerReconstruction => "wigner_reconstruction", "Wigner functions of x+, y+ and their reconstructions";
    DthetaRobustness => "dtheta_robustness", "tomography fidelity under a readout angle error";
    OffdiagEffect => "offdiag_effect", "Gamma with and without qubit coherence, |X12| and |X03|";
    DisplacedOverlaps => "displaced_overlaps", "overlap of eigenstates with displaced Fock states";
    DephasingPopulations => "dephasing_populations", "level populations under pure dephasing";
    GammabarVsRho00 => "gammabar_vs_rho00", "time-averaged Gamma against the initial rho00";
    NominalRates => "nominal_rates", "nominal external and internal rates against alpha";
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(name: &str) -> Result<Self> {
        Experiment::ALL
            .iter()
            .copied()
            .find(|e| e.name() == name)
            .ok_or_else(|| ExperimentError::Config(format!("unknown experiment `{name}`")))
    }
}

fn s(x: f64) -> Value {
    Value::Scalar(x)
}

fn l(xs: &[f64]) -> Value {
    Value::List(xs.to_vec())
}

fn g(start: f64, step: f64, stop: f64) -> Value {
    Value::List(range(start, step, stop).expect("static grid"))
}

/// Keys shared by every experiment. `dim = 0` picks the default truncation.
fn base(p: f64, omega0: f64, kappa_ex: f64) -> Vec<(&'static str, Value)> {
    vec![
        ("p", s(p)),
        ("omega0", s(omega0)),
        ("kappa_ex", s(kappa_ex)),
        ("kappa_int_ratio", s(0.5)),
        ("gamma", s(0.0)),
        ("dim", s(0.0)),
    ]
}

impl Experiment {
    /// Caption parameters plus the grids used when the caption is silent.
    pub fn defaults(self) -> Vec<(&'static str, Value)> {
        let mut d = match self {
            Experiment::RampRelaxation => {
                let mut d = base(9.0, 0.1, 0.01);
                d.extend([
                    ("t_ramp", s(20.0)),
                    ("rho00", s(0.2)),
                    ("t_max", s(400.0)),
                    ("dt", s(2.0)),
                    ("tol", s(1e-8)),
                ]);
                d
            }
            Experiment::GammaMaps => {
                let mut d = base(9.0, 0.5, 0.01);
                d.extend([("p_grid", g(1.0, 0.5, 12.0)), ("omega_in_grid", g(-30.0, 0.02, 2.0))]);
                d
            }
            Experiment::GammaComplexPlane => {
                let mut d = base(9.0, 0.5, 0.01);
                d.extend([
                    ("rho00_grid", l(&[0.0, 0.25, 0.5, 0.75, 1.0])),
                    ("d_omega_grid", g(-0.05, 0.0005, 0.05)),
                    ("d_omega_fixed", l(&[-0.01, 0.0, 0.01])),
                ]);
                d
            }
            Experiment::SensitivityVsWin => {
                let mut d = base(9.0, 0.5, 0.01);
                d.extend([
                    ("p_grid", l(&[4.0, 9.0])),
                    ("kappa_ex_grid", l(&[0.33, 0.1, 0.01])),
                    ("omega_in_grid", g(-25.0, 0.005, 1.0)),
                ]);
                d
            }
            Experiment::SensitivityVsP => {
                let mut d = base(9.0, 0.1, 0.01);
                d.extend([("omega_grid", l(&[0.1, 0.5])), ("p_grid", g(1.0, 0.25, 30.0))]);
                d
            }
            Experiment::SensitivityVsOmega => {
                let mut d = base(4.0, 0.5, 0.01);
                d.extend([("omega_grid", g(0.0, 0.02, 1.0))]);
                d
            }
            Experiment::TomoFidelityVsKex => {
                let mut d = base(9.0, 0.1, 1e-3);
                d.extend(tomography_keys());
                d.extend([
                    ("kappa_ex_grid", l(&[1e-3, 2e-3, 3e-3, 5e-3, 7e-3, 1e-2])),
                    ("full_protocol", s(1.0)),
                ]);
                d
            }
            Experiment::WignerReconstruction => {
                let mut d = base(9.0, 0.1, 1e-3);
                d.extend(tomography_keys());
                d.extend([
                    ("kappa_ex_grid", l(&[1e-3, 1e-2])),
                    ("x_grid", g(-5.0, 0.125, 5.0)),
                    ("y_grid", g(-2.5, 0.125, 2.5)),
                ]);
                d
            }
            Experiment::DthetaRobustness => {
                let mut d = base(9.0, 0.1, 1e-3);
                d.extend(tomography_keys());
                d.extend([
                    ("dtheta_over_pi_grid", g(-0.2, 0.01, 0.2)),
                    ("full_protocol", s(1.0)),
                ]);
                d
            }
            Experiment::OffdiagEffect => {
                let mut d = base(9.0, 0.5, 0.01);
                d.extend([("p_grid", g(2.0, 0.25, 14.0))]);
                d
            }
            Experiment::DisplacedOverlaps => {
                let mut d = base(4.0, 0.5, 0.01);
                d.extend([("p_grid", g(1.0, 0.25, 14.0)), ("omega_grid", g(0.0, 0.02, 1.5))]);
                d
            }
            Experiment::DephasingPopulations => {
                let mut d = base(9.0, 0.1, 0.01);
                d.extend([
                    ("t_ramp", s(20.0)),
                    ("rho00", s(0.2)),
                    ("gamma_grid", l(&[1e-4, 1e-3])),
                    ("t_max", s(220.0)),
                    ("dt", s(1.0)),
                    ("tol", s(1e-8)),
                ]);
                d
            }
            Experiment::GammabarVsRho00 => {
                let mut d = base(9.0, 0.1, 0.01);
                d.extend([
                    ("t_ramp", s(20.0)),
                    ("gamma_grid", l(&[1e-4, 1e-3])),
                    ("rho00_grid", l(&[0.0, 0.25, 0.5, 0.75, 1.0])),
                    ("window_start", s(20.0)),
                    ("window_end", s(220.0)),
                    ("dt", s(0.5)),
                    ("tol", s(1e-8)),
                ]);
                d
            }
            Experiment::NominalRates => {
                let mut d = base(9.0, 0.1, 0.01);
                d.extend([("gamma", s(1e-3)), ("alpha_grid", g(1.5, 0.02, 4.0))]);
                d
            }
        };
        // `gamma` may be replaced by an experiment-specific default above
        let mut seen = std::collections::HashSet::new();
        d.reverse();
        d.retain(|(k, _)| seen.insert(*k));
        d.reverse();
        d
    }

    /// Coarse grids for quick runs.
    pub fn smoke_overrides(self) -> Vec<(&'static str, Value)> {
        match self {
            Experiment::RampRelaxation => vec![("t_max", s(30.0))],
            Experiment::GammaMaps => vec![
                ("p_grid", l(&[4.0, 9.0])),
                ("omega_in_grid", g(-30.0, 0.5, 0.0)),
            ],
            Experiment::GammaComplexPlane => vec![("d_omega_grid", g(-0.05, 0.01, 0.05))],
            Experiment::SensitivityVsWin => vec![("omega_in_grid", g(-25.0, 0.5, 0.0))],
            Experiment::SensitivityVsP => vec![("p_grid", g(2.0, 2.0, 30.0))],
            Experiment::SensitivityVsOmega => vec![("omega_grid", g(0.0, 0.25, 1.0))],
            Experiment::TomoFidelityVsKex => vec![
                ("kappa_ex_grid", l(&[1e-2])),
                ("full_protocol", s(0.0)),
            ],
            Experiment::WignerReconstruction => vec![
                ("kappa_ex_grid", l(&[1e-2])),
                ("x_grid", g(-4.0, 1.0, 4.0)),
                ("y_grid", g(-2.0, 1.0, 2.0)),
                ("t_delay", s(5.0)),
            ],
            Experiment::DthetaRobustness => vec![
                ("dtheta_over_pi_grid", g(-0.1, 0.05, 0.1)),
                ("full_protocol", s(0.0)),
            ],
            Experiment::OffdiagEffect => vec![("p_grid", g(4.0, 2.0, 12.0))],
            Experiment::DisplacedOverlaps => vec![
                ("p_grid", g(2.0, 4.0, 14.0)),
                ("omega_grid", g(0.0, 0.5, 1.5)),
            ],
            Experiment::DephasingPopulations => vec![("gamma_grid", l(&[1e-3])), ("t_max", s(30.0))],
            Experiment::GammabarVsRho00 => vec![
                ("gamma_grid", l(&[1e-3])),
                ("rho00_grid", l(&[0.0, 1.0])),
                ("window_end", s(30.0)),
            ],
            Experiment::NominalRates => vec![("alpha_grid", g(1.5, 0.25, 4.0))],
        }
    }
}

/// Gate and readout timing of the tomography experiments. `t_delay = 0`
/// means `0.4 / kappa_ex`.
fn tomography_keys() -> Vec<(&'static str, Value)> {
    vec![
        ("t_x", s(2.5)),
        ("t_z", s(1.0)),
        ("t_ramp", s(20.0)),
        ("t_delay", s(0.0)),
    ]
}

/// Keys whose values must be strictly positive.
const POSITIVE: &[&str] = &[
    "t_ramp", "t_max", "dt", "tol", "t_x", "t_z", "window_end", "kappa_ex_grid",
];

/// Keys whose values must be non-negative.
const NON_NEGATIVE: &[&str] = &[
    "p", "kappa_ex", "kappa_int_ratio", "gamma", "dim", "t_delay", "window_start", "p_grid",
    "gamma_grid", "alpha_grid",
];

/// Keys whose values must lie in `[0, 1]`.
const UNIT: &[&str] = &["rho00", "rho00_grid", "full_protocol"];

/// A validated experiment with every setting resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    settings: BTreeMap<String, Value>,
}

/// On-disk form: `{"experiment": "...", "overrides": {"key": value}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Experiment,
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
}

impl ExperimentConfig {
    /// Caption defaults.
    pub fn new(experiment: Experiment) -> Self {
        let settings = experiment
            .defaults()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Self { experiment, settings }
    }

    /// Defaults with the experiment's coarse grids.
    pub fn smoke(experiment: Experiment) -> Self {
        let mut config = Self::new(experiment);
        for (key, value) in experiment.smoke_overrides() {
            config
                .set(key, value)
                .expect("smoke overrides use known keys");
        }
        config
    }

    /// Replaces one setting after checking the key and range.
    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        let current = self.settings.get(key).ok_or_else(|| {
            ExperimentError::Config(format!(
                "unknown key `{key}` for experiment {}",
                self.experiment
            ))
        })?;
        let value = match (current, value) {
            (Value::List(_), Value::Scalar(x)) => Value::List(vec![x]),
            (Value::Scalar(_), Value::List(xs)) => match xs[..] {
                [x] => Value::Scalar(x),
                _ => {
                    return Err(ExperimentError::Config(format!(
                        "`{key}` takes a single number"
                    )))
                }
            },
            (_, v) => v,
        };
        check_range(key, &value)?;
        self.settings.insert(key.to_string(), value);
        Ok(())
    }

    /// Applies `key=value` strings.
    pub fn apply_assignments<'a>(&mut self, assignments: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for assignment in assignments {
            let (key, value) = assignment.split_once('=').ok_or_else(|| {
                ExperimentError::Config(format!("override `{assignment}` is not key=value"))
            })?;
            self.set(key.trim(), value.parse()?)?;
        }
        Ok(())
    }

    pub fn settings(&self) -> &BTreeMap<String, Value> {
        &self.settings
    }

    pub fn scalar(&self, key: &str) -> f64 {
        match self.settings.get(key) {
            Some(Value::Scalar(x)) => *x,
            other => panic!("`{key}` is not a scalar setting of {}: {other:?}", self.experiment),
        }
    }

    pub fn list(&self, key: &str) -> &[f64] {
        match self.settings.get(key) {
            Some(Value::List(xs)) => xs,
            other => panic!("`{key}` is not a grid setting of {}: {other:?}", self.experiment),
        }
    }

    /// The file form of this config, listing every resolved setting.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            experiment: self.experiment,
            overrides: self.settings.clone(),
        }
    }
}

fn check_range(key: &str, value: &Value) -> Result<()> {
    let values: &[f64] = match value {
        Value::Scalar(x) => std::slice::from_ref(x),
        Value::List(xs) => xs,
    };
    if values.is_empty() {
        return Err(ExperimentError::Config(format!("`{key}` grid is empty")));
    }
    for &x in values {
        let bad = if !x.is_finite() {
            Some("must be finite")
        } else if POSITIVE.contains(&key) && x <= 0.0 {
            Some("must be positive")
        } else if NON_NEGATIVE.contains(&key) && x < 0.0 {
            Some("must be non-negative")
        } else if UNIT.contains(&key) && !(0.0..=1.0).contains(&x) {
            Some("must lie in [0, 1]")
        } else if key == "dim" && (x.fract() != 0.0 || x == 1.0) {
            Some("must be 0 (automatic) or an integer of at least 2")
        } else {
            None
        };
        if let Some(reason) = bad {
            return Err(ExperimentError::Config(format!("`{key}` = {x} {reason}")));
        }
    }
    Ok(())
}

/// Parses a JSON config; syntax errors carry line and column.
pub fn validate_config(text: &str) -> Result<ExperimentConfig> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| {
        ExperimentError::Config(format!(
            "line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    let mut config = ExperimentConfig::new(file.experiment);
    for (key, value) in file.overrides {
        config.set(&key, value)?;
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values() {
        assert_eq!("1e-3".parse::<Value>().unwrap(), Value::Scalar(1e-3));
        assert_eq!("1, 2,3".parse::<Value>().unwrap(), Value::List(vec![1.0, 2.0, 3.0]));
        assert_eq!(
            "0:0.5:2".parse::<Value>().unwrap(),
            Value::List(vec![0.0, 0.5, 1.0, 1.5, 2.0])
        );
        assert!("0:1".parse::<Value>().is_err());
        assert!("abc".parse::<Value>().is_err());
        assert_eq!(range(0.0, 0.1, 1.0).unwrap().len(), 11);
    }

    #[test]
    fn every_experiment_has_unique_keys_and_valid_defaults() {
        for &e in Experiment::ALL {
            let defaults = e.defaults();
            let keys: std::collections::HashSet<_> = defaults.iter().map(|(k, _)| *k).collect();
            assert_eq!(keys.len(), defaults.len(), "{e}");
            for (k, v) in &defaults {
                check_range(k, v).unwrap();
            }
            let smoke = ExperimentConfig::smoke(e);
            assert_eq!(smoke.settings().len(), defaults.len());
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert_eq!(Experiment::ALL.len(), 14);
    }

    #[test]
    fn empty_overrides_give_caption_defaults() {
        let config = validate_config(r#"{"experiment": "ramp_relaxation"}"#).unwrap();
        assert_eq!(config, ExperimentConfig::new(Experiment::RampRelaxation));
        assert_eq!(config.scalar("p"), 9.0);
        assert_eq!(config.scalar("kappa_ex"), 0.01);
    }

    #[test]
    fn rejects_bad_configs() {
        let err = validate_config(
            r#"{"experiment": "ramp_relaxation", "overrides": {"kappa_ex": -1}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("kappa_ex"), "{err}");
        let err = validate_config(r#"{"experiment": "ramp_relaxation", "overrides": {"bogus": 1}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let err = validate_config("{\n  \"experiment\": ").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(validate_config(r#"{"experiment": "nope"}"#).is_err());
        assert!(validate_config(r#"{"experiment": "gamma_maps", "extra": 1}"#).is_err());
        let mut config = ExperimentConfig::new(Experiment::RampRelaxation);
        assert!(config.apply_assignments(["rho00=1.5"]).is_err());
        assert!(config.apply_assignments(["p"]).is_err());
        assert!(config.apply_assignments(["dim=2.5"]).is_err());
        assert!(config.apply_assignments(["p=1,2"]).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let mut config = ExperimentConfig::new(Experiment::SensitivityVsP);
        config.apply_assignments(["p=9", "omega0=0.1", "p_grid=4"]).unwrap();
        assert_eq!(config.list("p_grid"), &[4.0]);
        let text = serde_json::to_string(&config.to_file()).unwrap();
        let back = validate_config(&text).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.scalar("p"), 9.0);
        assert_eq!(back.scalar("omega0"), 0.1);
    }
}
