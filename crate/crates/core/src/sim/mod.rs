//! Closed-loop simulation of plant, observer and controller.
//!
//! The coupled state `[x; ς]` is integrated with fixed-step RK4. The
//! observer integrates `ς` and decodes `x̃̂ = ς + Ny`; `x̂ = H1x̃̂`,
//! `d̂ = H2x̃̂`.

pub mod fault;
pub mod integrate;
pub mod metrics;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::controller::{control_law, ControllerDesign};
use crate::error::{Error, Result};
use crate::matcore::{Mat, Vector};
use crate::model::{fas_rhs, DescriptorAug, FasModel};
use crate::observer::ObserverDesign;
use fault::FaultSignal;
use metrics::MetricReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ObserverInit {
    /// Initial augmented estimate `x̃̂(0)`, converted with `y(0)`.
    XtildeHat(Vec<f64>),
    /// Initial integrator state `ς(0)`.
    Sigma(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub x0: Vec<f64>,
    pub observer_init: ObserverInit,
    /// One generator per fault channel.
    pub fault: Vec<FaultSignal>,
    /// Record every `stride`-th step.
    #[serde(default = "one")]
    pub stride: usize,
    /// Exogenous factor passed through to the plant callbacks.
    #[serde(default)]
    pub zeta: Vec<f64>,
}

fn one() -> usize {
    1
}

impl SimConfig {
    pub fn validate(&self, model: &FasModel) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Input(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::Input(format!(
                "t_end must be at least dt ({}), got {}",
                self.dt, self.t_end
            )));
        }
        if self.stride == 0 {
            return Err(Error::Input("stride must be at least 1".into()));
        }
        if self.x0.len() != model.s() {
            return Err(Error::Shape(format!(
                "x0 must have length {}, got {}",
                model.s(),
                self.x0.len()
            )));
        }
        let init_len = match &self.observer_init {
            ObserverInit::XtildeHat(v) | ObserverInit::Sigma(v) => v.len(),
        };
        if init_len != model.s() + model.q() {
            return Err(Error::Shape(format!(
                "observer init must have length {}, got {init_len}",
                model.s() + model.q()
            )));
        }
        if self.fault.len() != model.q() {
            return Err(Error::Shape(format!(
                "need {} fault signals, got {}",
                model.q(),
                self.fault.len()
            )));
        }
        self.fault.iter().try_for_each(FaultSignal::validate)?;
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("x0 must be finite".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn fault_at(&self, t: f64) -> Vector {
        Vector::from_iterator(self.fault.len(), self.fault.iter().map(|f| f.eval(t)))
    }
}

/// Observer gains prepared for repeated evaluation.
pub struct Observer<'a> {
    design: &'a ObserverDesign,
    aug: &'a DescriptorAug,
    tm: Mat,
}

impl<'a> Observer<'a> {
    pub fn new(design: &'a ObserverDesign, aug: &'a DescriptorAug) -> Result<Self> {
        let n = aug.n();
        if design.t.shape() != (n, n) || design.n.shape() != (n, aug.p) || design.l.shape() != (n, aug.p) {
            return Err(Error::Shape(format!(
                "observer design does not match a plant with s+q={n}, p={}",
                aug.p
            )));
        }
        Ok(Self {
            design,
            aug,
            tm: &design.t * &aug.m_tilde_e,
        })
    }

    /// `x̃̂ = ς + Ny`.
    pub fn decode(&self, sigma: &Vector, y: &Vector) -> Vector {
        sigma + &self.design.n * y
    }

    /// `ς` for a desired `x̃̂` at output `y`.
    pub fn encode(&self, xtilde_hat: &Vector, y: &Vector) -> Vector {
        xtilde_hat - &self.design.n * y
    }

    pub fn split(&self, xtilde_hat: &Vector) -> (Vector, Vector) {
        (
            xtilde_hat.rows(0, self.aug.s).into_owned(),
            xtilde_hat.rows(self.aug.s, self.aug.q).into_owned(),
        )
    }

    /// `ς̇ = TP̃x̃̂ + TM̃_E f(x̂) + TM̃_E B u + L(y − C̃x̃̂)`, with `x̃̂`.
    pub fn rhs(&self, model: &FasModel, sigma: &Vector, y: &Vector, u: &Vector, zeta: &[f64], t: f64) -> (Vector, Vector) {
        let xth = self.decode(sigma, y);
        let x_hat = xth.rows(0, self.aug.s).into_owned();
        let dynamics = &model.dynamics;
        let top = dynamics.drift(&x_hat, zeta, t) + dynamics.input_matrix(y, zeta, t) * u;
        let innovation = y - &self.aug.ctilde * &xth;
        let ds = &self.design.t * (self.aug.ptilde(y) * &xth) + &self.tm * top + &self.design.l * innovation;
        (ds, xth)
    }
}

/// One-shot form of [`Observer::rhs`].
#[allow(clippy::too_many_arguments)]
pub fn observer_rhs(
    design: &ObserverDesign,
    aug: &DescriptorAug,
    model: &FasModel,
    sigma: &Vector,
    y: &Vector,
    u: &Vector,
    zeta: &[f64],
    t: f64,
) -> Result<(Vector, Vector)> {
    Ok(Observer::new(design, aug)?.rhs(model, sigma, y, u, zeta, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub t: f64,
    pub kind: String,
    pub reason: String,
    /// Last accepted `[x; ς]`.
    pub state: Vec<f64>,
}

/// Recorded samples on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub s: usize,
    pub q: usize,
    pub p: usize,
    pub rr: usize,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xtilde_hat: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub abort: Option<AbortRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn x_hat(&self, i: usize) -> &[f64] {
        &self.xtilde_hat[i][..self.s]
    }

    pub fn d_hat(&self, i: usize) -> &[f64] {
        &self.xtilde_hat[i][self.s..]
    }

    /// `e = [x; d] − x̃̂`.
    pub fn error(&self, i: usize) -> Vector {
        let n = self.s + self.q;
        Vector::from_iterator(
            n,
            (0..n).map(|j| {
                let truth = if j < self.s { self.x[i][j] } else { self.d[i][j - self.s] };
                truth - self.xtilde_hat[i][j]
            }),
        )
    }

    pub fn error_norms(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.error(i).norm()).collect()
    }

    pub fn state_norm(&self, i: usize) -> f64 {
        self.x[i].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn state_column(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|x| x[j]).collect()
    }

    pub fn error_column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.error(i)[j]).collect()
    }

    /// Column names in CSV order: `t, x…, x̂…, d…, d̂…, u…, y…`.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        let mut push = |prefix: &str, n: usize| h.extend((1..=n).map(|i| format!("{prefix}{i}")));
        push("x", self.s);
        push("xhat", self.s);
        push("d", self.q);
        push("dhat", self.q);
        push("u", self.rr);
        push("y", self.p);
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header().join(",");
        out.push('\n');
        for i in 0..self.len() {
            let row = std::iter::once(self.times[i])
                .chain(self.x[i].iter().copied())
                .chain(self.x_hat(i).iter().copied())
                .chain(self.d[i].iter().copied())
                .chain(self.d_hat(i).iter().copied())
                .chain(self.u[i].iter().copied())
                .chain(self.y[i].iter().copied());
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                let _ = write!(out, "{v:e}");
            }
            out.push('\n');
        }
        out
    }

    /// RMSE/MAE/MaxAE of every error channel and IAE/ITAE of every state.
    pub fn metrics(&self) -> Result<MetricReport> {
        let n = self.s + self.q;
        let errors: Vec<(String, Vec<f64>)> = (0..n).map(|j| (format!("e{}", j + 1), self.error_column(j))).collect();
        let states: Vec<(String, Vec<f64>)> = (0..self.s).map(|j| (format!("x{}", j + 1), self.state_column(j))).collect();
        metrics::report(&self.times, &errors, &states)
    }
}

/// Simulates the plant with the observer in the loop.
///
/// With `ctrl = None` the input is held at zero. Otherwise the control law
/// uses the observer estimates, with or without fault compensation. Errors
/// raised mid-run (actuation loss, safe-region exit, non-finite state)
/// truncate the trajectory and leave an [`AbortRecord`].
pub fn simulate(
    model: &FasModel,
    aug: &DescriptorAug,
    obs: &ObserverDesign,
    ctrl: Option<&ControllerDesign>,
    cfg: &SimConfig,
    compensation: bool,
) -> Result<Trajectory> {
    cfg.validate(model)?;
    let observer = Observer::new(obs, aug)?;
    if let Some(c) = ctrl {
        if c.k.shape() != (model.rr(), model.s()) {
            return Err(Error::Shape(format!(
                "gain K must be {}x{}, got {:?}",
                model.rr(),
                model.s(),
                c.k.shape()
            )));
        }
    }
    let (s, n) = (model.s(), aug.n());
    let zeta = cfg.zeta.as_slice();

    let x0 = Vector::from_column_slice(&cfg.x0);
    let sigma0 = match &cfg.observer_init {
        ObserverInit::Sigma(v) => Vector::from_column_slice(v),
        ObserverInit::XtildeHat(v) => {
            let y0 = model.output(&x0, &cfg.fault_at(0.0));
            observer.encode(&Vector::from_column_slice(v), &y0)
        }
    };
    let mut z = Vector::zeros(s + n);
    z.rows_mut(0, s).copy_from(&x0);
    z.rows_mut(s, n).copy_from(&sigma0);

    // measured quantities and the input at a given coupled state
    let evaluate = |t: f64, z: &Vector| -> Result<(Vector, Vector, Vector, Vector)> {
        let x = z.rows(0, s).into_owned();
        let d = cfg.fault_at(t);
        let y = model.output(&x, &d);
        let xth = observer.decode(&z.rows(s, n).into_owned(), &y);
        let u = match ctrl {
            None => Vector::zeros(model.rr()),
            Some(c) => {
                let (x_hat, d_hat) = observer.split(&xth);
                control_law(c, model, &x_hat, &d_hat, &y, zeta, t, compensation)?
            }
        };
        Ok((d, y, xth, u))
    };
    let mut rhs = |t: f64, z: &Vector| -> Result<Vector> {
        let (d, y, _, u) = evaluate(t, z)?;
        let x = z.rows(0, s).into_owned();
        let (xdot, _) = fas_rhs(model, &x, &u, &d, zeta, t)?;
        let (sdot, _) = observer.rhs(model, &z.rows(s, n).into_owned(), &y, &u, zeta, t);
        let mut out = Vector::zeros(s + n);
        out.rows_mut(0, s).copy_from(&xdot);
        out.rows_mut(s, n).copy_from(&sdot);
        Ok(out)
    };

    let mut traj = Trajectory {
        s,
        q: model.q(),
        p: model.p(),
        rr: model.rr(),
        times: Vec::new(),
        x: Vec::new(),
        xtilde_hat: Vec::new(),
        u: Vec::new(),
        d: Vec::new(),
        y: Vec::new(),
        abort: None,
    };
    let abort = |t: f64, err: &Error, z: &Vector| AbortRecord {
        t,
        kind: err.kind().to_string(),
        reason: err.to_string(),
        state: z.iter().copied().collect(),
    };
    let check_state = |z: &Vector| -> Result<()> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("state became non-finite".into()));
        }
        match model.dynamics.region_violation(&z.rows(0, s).into_owned()) {
            Some(reason) => Err(Error::SafeRegion(reason)),
            None => Ok(()),
        }
    };

    let steps = cfg.steps();
    for i in 0..=steps {
        let t = i as f64 * cfg.dt;
        if let Err(e) = check_state(&z) {
            traj.abort = Some(abort(t, &e, &z));
            break;
        }
        if i % cfg.stride == 0 || i == steps {
            match evaluate(t, &z) {
                Ok((d, y, xth, u)) => {
                    traj.times.push(t);
                    traj.x.push(z.rows(0, s).iter().copied().collect());
                    traj.xtilde_hat.push(xth.iter().copied().collect());
                    traj.u.push(u.iter().copied().collect());
                    traj.d.push(d.iter().copied().collect());
                    traj.y.push(y.iter().copied().collect());
                }
                Err(e) => {
                    traj.abort = Some(abort(t, &e, &z));
                    break;
                }
            }
        }
        if i == steps {
            break;
        }
        match integrate::rk4_step(&mut rhs, t, &z, cfg.dt) {
            Ok(next) => z = next,
            Err(e) => {
                traj.abort = Some(abort(t, &e, &z));
                break;
            }
        }
    }
    Ok(traj)
}

/// JSON summary of a run: configuration, metrics and abort information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub schema_version: u32,
    pub plant: String,
    pub open_loop: bool,
    pub compensation: bool,
    pub config: SimConfig,
    pub samples: usize,
    pub final_time: f64,
    pub final_state_norm: f64,
    pub final_error_norm: f64,
    pub metrics: MetricReport,
    pub abort: Option<AbortRecord>,
}

impl SimSummary {
    pub fn new(plant: &str, cfg: &SimConfig, traj: &Trajectory, open_loop: bool, compensation: bool) -> Result<Self> {
        let last = traj.len().checked_sub(1);
        let metrics = if traj.is_empty() { MetricReport::default() } else { traj.metrics()? };
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            plant: plant.to_string(),
            open_loop,
            compensation,
            config: cfg.clone(),
            samples: traj.len(),
            final_time: last.map_or(0.0, |i| traj.times[i]),
            final_state_norm: last.map_or(f64::NAN, |i| traj.state_norm(i)),
            final_error_norm: last.map_or(f64::NAN, |i| traj.error(i).norm()),
            metrics,
            abort: traj.abort.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::from_rows;
    use crate::model::testing::linear_model;
    use crate::model::{augment, FasSignature};
    use crate::observer::{synthesize, SynthOptions};

    fn setup() -> (FasModel, DescriptorAug, ObserverDesign) {
        let model = linear_model(
            FasSignature::single(2, 1).unwrap(),
            from_rows(&[&[-1.0, -1.0]]),
            from_rows(&[&[1.0]]),
            from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]),
            from_rows(&[&[0.0], &[1.0]]),
        );
        let aug = augment(&model).unwrap();
        let obs = synthesize(&aug, 1.0, 1.5, &Vector::zeros(2), &SynthOptions::default()).unwrap();
        (model, aug, obs)
    }

    fn config(x0: Vec<f64>, init: Vec<f64>, fault: FaultSignal) -> SimConfig {
        SimConfig {
            t_end: 1.0,
            dt: 1e-3,
            x0,
            observer_init: ObserverInit::XtildeHat(init),
            fault: vec![fault],
            stride: 10,
            zeta: vec![],
        }
    }

    #[test]
    fn zero_everything_stays_zero() {
        let (model, aug, obs) = setup();
        let cfg = config(vec![0.0; 2], vec![0.0; 3], FaultSignal::Zero);
        let traj = simulate(&model, &aug, &obs, None, &cfg, true).unwrap();
        assert_eq!(traj.len(), 101);
        assert!(traj.abort.is_none());
        for i in 0..traj.len() {
            assert!(traj.x[i].iter().chain(&traj.xtilde_hat[i]).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn exact_initial_estimate_stays_exact() {
        let (model, aug, obs) = setup();
        let fault = FaultSignal::Zero;
        let cfg = config(vec![0.5, -0.2], vec![0.5, -0.2, 0.0], fault);
        let traj = simulate(&model, &aug, &obs, None, &cfg, true).unwrap();
        assert!(traj.error_norms().iter().all(|e| *e < 1e-12));
    }

    #[test]
    fn encode_decode_round_trip() {
        let (_, aug, obs) = setup();
        let observer = Observer::new(&obs, &aug).unwrap();
        let xth = Vector::from_vec(vec![6.6805, -42.5471, -16.35]);
        let y = Vector::from_vec(vec![1.0, 0.3]);
        let back = observer.decode(&observer.encode(&xth, &y), &y);
        assert!((back - xth).amax() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let (model, aug, obs) = setup();
        let mut cfg = config(vec![0.0; 2], vec![0.0; 3], FaultSignal::Zero);
        cfg.t_end = 0.0;
        assert!(simulate(&model, &aug, &obs, None, &cfg, true).is_err());
        let mut cfg = config(vec![0.0; 3], vec![0.0; 3], FaultSignal::Zero);
        assert!(matches!(simulate(&model, &aug, &obs, None, &cfg, true), Err(Error::Shape(_))));
        cfg.x0.pop();
        cfg.stride = 0;
        assert!(simulate(&model, &aug, &obs, None, &cfg, true).is_err());
    }

    #[test]
    fn csv_header_order() {
        let (model, aug, obs) = setup();
        let cfg = config(vec![0.0; 2], vec![0.0; 3], FaultSignal::Zero);
        let traj = simulate(&model, &aug, &obs, None, &cfg, true).unwrap();
        let csv = traj.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "t,x1,x2,xhat1,xhat2,d1,dhat1,u1,y1,y2");
        assert_eq!(csv.lines().count(), traj.len() + 1);
    }
}
