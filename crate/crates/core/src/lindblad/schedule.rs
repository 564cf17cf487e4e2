//! Closed-form control waveforms for the drive `Omega(t)` and detuning `Delta(t)`.

use std::f64::consts::PI;

use crate::error::{KpoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    /// `amplitude` at all times.
    Constant,
    /// `(A/2)(1 - cos(pi s / T))` on `[0, T]`, then held at `A`.
    RampCosine,
    /// `A sin^2(pi s / T)` on `[0, T]`, zero outside.
    SineSquared,
    /// `A sin(pi s / T)` on `[0, T]`, zero outside.
    SineLobe,
}

/// Scalar control `f(t)`; `s = t - start_time` is the local time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSchedule {
    pub kind: PulseKind,
    pub amplitude: f64,
    pub duration: f64,
    pub start_time: f64,
}

impl PulseSchedule {
    pub fn constant(amplitude: f64) -> Self {
        Self {
            kind: PulseKind::Constant,
            amplitude,
            duration: 0.0,
            start_time: 0.0,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    fn windowed(kind: PulseKind, amplitude: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(KpoError::InvalidParameter {
                name: "duration",
                value: duration,
                reason: "pulse duration must be positive",
            });
        }
        Ok(Self {
            kind,
            amplitude,
            duration,
            start_time: 0.0,
        })
    }

    /// Same pulse shifted later by `shift`.
    pub fn delayed(mut self, shift: f64) -> Self {
        self.start_time += shift;
        self
    }

    pub fn end_time(&self) -> f64 {
        match self.kind {
            PulseKind::Constant => self.start_time,
            _ => self.start_time + self.duration,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.kind == PulseKind::Constant {
            return self.amplitude;
        }
        let s = t - self.start_time;
        let (a, d) = (self.amplitude, self.duration);
        match self.kind {
            PulseKind::RampCosine => {
                if s <= 0.0 {
                    0.0
                } else if s >= d {
                    a
                } else {
                    0.5 * a * (1.0 - (PI * s / d).cos())
                }
            }
            PulseKind::SineSquared if (0.0..=d).contains(&s) => a * (PI * s / d).sin().powi(2),
            PulseKind::SineLobe if (0.0..=d).contains(&s) => a * (PI * s / d).sin(),
            _ => 0.0,
        }
    }
}

/// Drive ramp `Omega(t) = (Omega0/2)[1 - cos(pi t / t_ramp)]`, held at `Omega0`
/// afterwards.
pub fn make_ramp(omega0: f64, t_ramp: f64) -> Result<PulseSchedule> {
    PulseSchedule::windowed(PulseKind::RampCosine, omega0, t_ramp)
}

/// Rx detuning pulse `Delta(t) = Delta0 sin^2(pi t / T_x)` on `[0, T_x]`.
pub fn make_rx_detuning(delta0: f64, t_x: f64) -> Result<PulseSchedule> {
    PulseSchedule::windowed(PulseKind::SineSquared, delta0, t_x)
}

/// Rz drive lobe `Omega(t) = pi theta / (8 T_z sqrt(p)) sin(pi (t - start) / T_z)`
/// whose area is `theta / (4 sqrt(p))`.
pub fn make_rz_drive(theta: f64, t_z: f64, p: f64, start: f64) -> Result<PulseSchedule> {
    if !(p > 0.0) {
        return Err(KpoError::InvalidParameter {
            name: "p",
            value: p,
            reason: "the Rz pulse needs a positive pump",
        });
    }
    let amplitude = PI * theta / (8.0 * t_z * p.sqrt());
    Ok(PulseSchedule::windowed(PulseKind::SineLobe, amplitude, t_z)?.delayed(start))
}

/// Sum of pulses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Waveform {
    pub pulses: Vec<PulseSchedule>,
}

impl Waveform {
    pub fn new(pulses: Vec<PulseSchedule>) -> Self {
        Self { pulses }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn value(&self, t: f64) -> f64 {
        self.pulses.iter().map(|p| p.value(t)).sum()
    }

    pub fn push(&mut self, pulse: PulseSchedule) {
        self.pulses.push(pulse);
    }

    /// Latest end time of the windowed pulses (0 when there are none).
    pub fn end_time(&self) -> f64 {
        self.pulses.iter().map(PulseSchedule::end_time).fold(0.0, f64::max)
    }
}

impl From<PulseSchedule> for Waveform {
    fn from(p: PulseSchedule) -> Self {
        Self { pulses: vec![p] }
    }
}

/// Drive and detuning waveforms applied together.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Controls {
    pub omega: Waveform,
    pub delta: Waveform,
}

impl Controls {
    pub fn new(omega: impl Into<Waveform>, delta: impl Into<Waveform>) -> Self {
        Self {
            omega: omega.into(),
            delta: delta.into(),
        }
    }

    /// Constant drive and no detuning.
    pub fn constant_drive(omega: f64) -> Self {
        Self::new(PulseSchedule::constant(omega), Waveform::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn derivative(f: impl Fn(f64) -> f64, t: f64) -> f64 {
        let h = 1e-6;
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    #[test]
    fn ramp_endpoints_and_midpoint() {
        let r = make_ramp(0.1, 20.0).unwrap();
        assert_eq!(r.value(0.0), 0.0);
        assert!((r.value(20.0) - 0.1).abs() < 1e-15);
        assert!((r.value(10.0) - 0.05).abs() < 1e-15);
        assert_eq!(r.value(35.0), 0.1);
        assert_eq!(r.value(-1.0), 0.0);
        // one-sided slopes vanish at both ends
        assert!(derivative(|t| r.value(t), 0.0).abs() < 1e-6);
        assert!(derivative(|t| r.value(t), 20.0).abs() < 1e-6);
        let flat = make_ramp(0.0, 5.0).unwrap();
        assert!((0..50).all(|k| flat.value(k as f64 * 0.2) == 0.0));
    }

    #[test]
    fn ramp_rejects_nonpositive_duration() {
        assert!(make_ramp(0.1, 0.0).is_err());
        assert!(make_rx_detuning(-6.9, -1.0).is_err());
    }

    #[test]
    fn rx_envelope() {
        let d = make_rx_detuning(-6.938, 2.5).unwrap();
        assert!(d.value(0.0).abs() < 1e-15);
        assert!(d.value(2.5).abs() < 1e-12);
        assert!((d.value(1.25) + 6.938).abs() < 1e-12);
        assert_eq!(d.value(3.0), 0.0);
    }

    #[test]
    fn rz_lobe_area() {
        let theta = std::f64::consts::FRAC_PI_2;
        let (tz, p, start) = (1.0, 9.0, 2.5);
        let lobe = make_rz_drive(theta, tz, p, start).unwrap();
        // composite Simpson quadrature
        let n = 2000;
        let h = tz / n as f64;
        let mut area = lobe.value(start) + lobe.value(start + tz);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            area += w * lobe.value(start + k as f64 * h);
        }
        area *= h / 3.0;
        assert!((area - theta / (4.0 * p.sqrt())).abs() < 1e-12);
        assert_eq!(lobe.value(start - 0.1), 0.0);
        let none = make_rz_drive(0.0, tz, p, start).unwrap();
        assert_eq!(none.value(start + 0.5), 0.0);
    }

    #[test]
    fn waveform_sums_pulses() {
        let w = Waveform::new(vec![
            make_rx_detuning(-1.0, 1.0).unwrap(),
            make_rx_detuning(-2.0, 1.0).unwrap().delayed(2.0),
        ]);
        assert!((w.value(0.5) + 1.0).abs() < 1e-15);
        assert!((w.value(2.5) + 2.0).abs() < 1e-15);
        assert_eq!(w.end_time(), 3.0);
    }
}
