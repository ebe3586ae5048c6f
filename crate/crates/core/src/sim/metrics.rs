use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn rmse(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn mae(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
}

pub fn max_ae(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Trapezoidal `∫|v| dt` over the sample times.
pub fn iae(times: &[f64], v: &[f64]) -> f64 {
    trapezoid(times, |i| v[i].abs())
}

/// Trapezoidal `∫t|v| dt` over the sample times.
pub fn itae(times: &[f64], v: &[f64]) -> f64 {
    trapezoid(times, |i| times[i] * v[i].abs())
}

fn trapezoid(times: &[f64], g: impl Fn(usize) -> f64) -> f64 {
    (1..times.len())
        .map(|i| 0.5 * (times[i] - times[i - 1]) * (g(i) + g(i - 1)))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetric {
    pub name: String,
    pub rmse: f64,
    pub mae: f64,
    pub max_ae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMetric {
    pub name: String,
    pub iae: f64,
    pub itae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricReport {
    pub errors: Vec<ErrorMetric>,
    pub states: Vec<StateMetric>,
}

impl MetricReport {
    pub fn error(&self, name: &str) -> Option<&ErrorMetric> {
        self.errors.iter().find(|m| m.name == name)
    }

    pub fn state(&self, name: &str) -> Option<&StateMetric> {
        self.states.iter().find(|m| m.name == name)
    }
}

/// Builds a report from named error and state columns sampled on `times`.
pub fn report(times: &[f64], errors: &[(String, Vec<f64>)], states: &[(String, Vec<f64>)]) -> Result<MetricReport> {
    if times.is_empty() {
        return Err(Error::Input("metrics need at least one sample".into()));
    }
    let check = |name: &str, v: &[f64]| {
        if v.len() == times.len() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "column {name} has {} samples, expected {}",
                v.len(),
                times.len()
            )))
        }
    };
    let mut out = MetricReport::default();
    for (name, v) in errors {
        check(name, v)?;
        out.errors.push(ErrorMetric {
            name: name.clone(),
            rmse: rmse(v),
            mae: mae(v),
            max_ae: max_ae(v),
        });
    }
    for (name, v) in states {
        check(name, v)?;
        out.states.push(StateMetric {
            name: name.clone(),
            iae: iae(times, v),
            itae: itae(times, v),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_error() {
        let v = vec![-0.3; 17];
        assert!((rmse(&v) - 0.3).abs() < 1e-15);
        assert!((mae(&v) - 0.3).abs() < 1e-15);
        assert_eq!(max_ae(&v), 0.3);
    }

    #[test]
    fn exponential_integrals() {
        let dt = 1e-3;
        let times: Vec<f64> = (0..=10_000).map(|i| i as f64 * dt).collect();
        let v: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let e10 = (-10.0_f64).exp();
        assert!((iae(&times, &v) - (1.0 - e10)).abs() < 1e-6);
        assert!((itae(&times, &v) - (1.0 - 11.0 * e10)).abs() < 1e-5);
    }

    #[test]
    fn report_rejects_ragged_columns() {
        let times = vec![0.0, 1.0];
        let bad = vec![("e1".to_string(), vec![0.0])];
        assert!(report(&times, &bad, &[]).is_err());
        assert!(report(&[], &[], &[]).is_err());
    }
}
