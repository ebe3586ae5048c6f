use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar fault or disturbance generator.
///
/// Frequencies are in rad/s except for the chirp, whose instantaneous
/// frequency `f0 + rate·t` enters the phase `f0·t + rate·t²/2` directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultSignal {
    Zero,
    Sinusoid { amp: f64, freq: f64, #[serde(default)] phase: f64 },
    /// `+amp` for the first `duty` fraction of each period, `−amp` after.
    Square { amp: f64, period: f64, #[serde(default = "half")] duty: f64 },
    ChirpSin { amp: f64, f0: f64, rate: f64 },
    Sum { terms: Vec<FaultSignal> },
    /// Piecewise-linear through `(t, value)` samples, held flat outside.
    Tabulated { samples: Vec<(f64, f64)> },
}

fn half() -> f64 {
    0.5
}

impl FaultSignal {
    pub fn sinusoid(amp: f64, freq: f64) -> Self {
        FaultSignal::Sinusoid { amp, freq, phase: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match self {
            FaultSignal::Zero => Ok(()),
            FaultSignal::Sinusoid { amp, freq, phase } if finite(&[*amp, *freq, *phase]) => Ok(()),
            FaultSignal::Square { amp, period, duty }
                if finite(&[*amp]) && *period > 0.0 && period.is_finite() && (0.0..=1.0).contains(duty) =>
            {
                Ok(())
            }
            FaultSignal::ChirpSin { amp, f0, rate } if finite(&[*amp, *f0, *rate]) => Ok(()),
            FaultSignal::Sum { terms } => terms.iter().try_for_each(FaultSignal::validate),
            FaultSignal::Tabulated { samples }
                if !samples.is_empty()
                    && samples.iter().all(|(t, v)| t.is_finite() && v.is_finite())
                    && samples.windows(2).all(|w| w[0].0 < w[1].0) =>
            {
                Ok(())
            }
            other => Err(Error::Input(format!("invalid fault signal {other:?}"))),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            FaultSignal::Zero => 0.0,
            FaultSignal::Sinusoid { amp, freq, phase } => amp * (freq * t + phase).sin(),
            FaultSignal::Square { amp, period, duty } => {
                let frac = (t / period).rem_euclid(1.0);
                if frac < *duty {
                    *amp
                } else {
                    -amp
                }
            }
            FaultSignal::ChirpSin { amp, f0, rate } => amp * (f0 * t + 0.5 * rate * t * t).sin(),
            FaultSignal::Sum { terms } => terms.iter().map(|s| s.eval(t)).sum(),
            FaultSignal::Tabulated { samples } => interpolate(samples, t),
        }
    }

    /// The fault used by the second ball and beam scenario: a chirped sine
    /// of magnitude 6 plus a square wave of magnitude 2.
    pub fn scenario_two(f0: f64, rate: f64, square_period: f64) -> Self {
        FaultSignal::Sum {
            terms: vec![
                FaultSignal::ChirpSin { amp: 6.0, f0, rate },
                FaultSignal::Square { amp: 2.0, period: square_period, duty: 0.5 },
            ],
        }
    }
}

fn interpolate(samples: &[(f64, f64)], t: f64) -> f64 {
    let (first, last) = (samples[0], samples[samples.len() - 1]);
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = samples.partition_point(|(ts, _)| *ts <= t);
    let (t0, v0) = samples[i - 1];
    let (t1, v1) = samples[i];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn sinusoid_peak() {
        assert!((FaultSignal::sinusoid(6.0, 1.0).eval(FRAC_PI_2) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn square_starts_high() {
        let sq = FaultSignal::Square { amp: 2.0, period: 4.0, duty: 0.5 };
        assert_eq!(sq.eval(1e-9), 2.0);
        assert_eq!(sq.eval(2.5), -2.0);
        assert_eq!(sq.eval(4.1), 2.0);
    }

    #[test]
    fn sum_is_pointwise() {
        let chirp = FaultSignal::ChirpSin { amp: 6.0, f0: 1.0, rate: 0.5 };
        let sq = FaultSignal::Square { amp: 2.0, period: 4.0, duty: 0.5 };
        let sum = FaultSignal::Sum { terms: vec![chirp.clone(), sq.clone()] };
        for i in 0..100 {
            let t = i as f64 * 0.173;
            assert_eq!(sum.eval(t), chirp.eval(t) + sq.eval(t));
        }
    }

    #[test]
    fn chirp_phase_derivative_is_instantaneous_frequency() {
        let (f0, rate) = (1.0, 0.5);
        let phase = |t: f64| f0 * t + 0.5 * rate * t * t;
        let t = 3.0;
        let h = 1e-6;
        let inst = (phase(t + h) - phase(t - h)) / (2.0 * h);
        assert!((inst - (f0 + rate * t)).abs() < 1e-8);
    }

    #[test]
    fn tabulated_interpolates_and_holds() {
        let tab = FaultSignal::Tabulated { samples: vec![(0.0, 0.0), (1.0, 2.0), (3.0, -2.0)] };
        assert_eq!(tab.eval(0.5), 1.0);
        assert_eq!(tab.eval(2.0), 0.0);
        assert_eq!(tab.eval(10.0), -2.0);
    }

    #[test]
    fn validation_rejects_bad_square() {
        let bad = FaultSignal::Square { amp: 1.0, period: 0.0, duty: 0.5 };
        assert!(bad.validate().is_err());
        let unsorted = FaultSignal::Tabulated { samples: vec![(1.0, 0.0), (0.0, 1.0)] };
        assert!(unsorted.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let s = serde_json::to_string(&FaultSignal::sinusoid(6.0, 1.0)).unwrap();
        assert_eq!(s, r#"{"kind":"sinusoid","amp":6.0,"freq":1.0,"phase":0.0}"#);
        let back: FaultSignal = serde_json::from_str(r#"{"kind":"square","amp":2,"period":4}"#).unwrap();
        assert_eq!(back, FaultSignal::Square { amp: 2.0, period: 4.0, duty: 0.5 });
    }
}
