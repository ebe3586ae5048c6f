use std::sync::Arc;

use fasctl_core::lmi::{self, LmiSolution};
use fasctl_core::matcore::{self, from_rows};
use fasctl_core::model::{linear_model, FasDynamics};
use fasctl_core::observer::{self, check_constraint, decay_certificate, gains_from_s, lyapunov_value, synthesize, SynthOptions};
use fasctl_core::plants::{self, BALLBEAM, ELECTROMECH, REGISTRY};
use fasctl_core::sim::{simulate, ObserverInit, SimConfig};
use fasctl_core::{augment, controller, Complex64, DescriptorAug, FasModel, FasSignature, FaultSignal, Mat, ObserverDesign, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn design_for(name: &str) -> (FasModel, DescriptorAug, ObserverDesign) {
    let pre = plants::preset(name).unwrap();
    let model = plants::by_name(name).unwrap();
    let aug = augment(&model).unwrap();
    let obs = synthesize(&aug, pre.mu_e, pre.gamma_f, &Vector::zeros(2), &SynthOptions::default()).unwrap();
    (model, aug, obs)
}

fn linear_setup(a: Mat) -> (FasModel, DescriptorAug) {
    let model = linear_model(
        FasSignature::single(2, 1).unwrap(),
        a,
        from_rows(&[&[1.0]]),
        Mat::identity(2, 2),
        from_rows(&[&[0.0], &[1.0]]),
    )
    .unwrap();
    let aug = augment(&model).unwrap();
    (model, aug)
}

fn open_loop_cfg(x0: Vec<f64>, init: Vec<f64>, fault: FaultSignal, t_end: f64, dt: f64, stride: usize) -> SimConfig {
    SimConfig {
        t_end,
        dt,
        x0,
        observer_init: ObserverInit::XtildeHat(init),
        fault: vec![fault],
        stride,
        zeta: vec![],
    }
}

#[test]
fn both_plants_synthesize_with_certified_invariants() {
    for name in REGISTRY {
        let pre = plants::preset(name).unwrap();
        let (_, aug, obs) = design_for(name);
        assert!(check_constraint(&obs.t, &obs.n, &aug).unwrap() < 1e-8, "{name}");
        assert!(observer::observer_poles(&obs, &aug).unwrap().max_real < -pre.mu_e + 1e-6, "{name}");
        assert!(matcore::lambda_min(&obs.p_e).unwrap() > 0.0);
        assert!(obs.eta > 0.0);
        assert!(obs.margin > 1e-6);
        assert_eq!(obs.t.shape(), (aug.n(), aug.n()));
        assert_eq!(obs.l.shape(), (aug.n(), 2));
    }
}

#[test]
fn solver_margin_reverifies() {
    let pre = plants::preset(ELECTROMECH).unwrap();
    let (_, aug, obs) = design_for(ELECTROMECH);
    let problem = lmi::assemble_theorem1(&aug, pre.mu_e, pre.gamma_f, &Vector::zeros(2), 1e-6).unwrap();
    let x = problem
        .pack(&[obs.p_e.clone(), &obs.p_e * &obs.l, &obs.p_e * &obs.s, Mat::from_element(1, 1, obs.eta)])
        .unwrap();
    let report = lmi::verify(&problem, &LmiSolution { x, margin: obs.margin, iterations: 0 }, 1e-6).unwrap();
    assert!(report.pass);
    assert!((report.margin - obs.margin).abs() < 1e-9 * obs.margin.max(1.0));
}

#[test]
fn random_free_matrix_keeps_constraint_on_plants() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for name in REGISTRY {
        let aug = augment(&plants::by_name(name).unwrap()).unwrap();
        for _ in 0..25 {
            let s = Mat::from_fn(aug.n(), aug.n() + aug.p, |_, _| rng.random_range(-50.0..50.0));
            let (t, n) = gains_from_s(&aug, &s).unwrap();
            assert!(check_constraint(&t, &n, &aug).unwrap() < 1e-8);
        }
        let (t, n) = observer::fast_path(&aug).unwrap();
        assert!(check_constraint(&t, &n, &aug).unwrap() < 1e-10);
    }
}

#[test]
fn published_ballbeam_gains_meet_constraint_to_rounding() {
    let aug = augment(&plants::by_name(BALLBEAM).unwrap()).unwrap();
    let g = plants::published_gains(BALLBEAM).unwrap();
    assert!(check_constraint(&g.t, &g.n, &aug).unwrap() < 5e-3);
}

#[test]
fn published_electromech_gains_disagree_with_listed_constants() {
    // Row four of TE + NC̃ − I is T43 + 10·M_e in the third column. The
    // printed T43 = −1.6642 matches M_e ≈ 0.1664, not the 0.0642 that the
    // listed physical parameters give.
    let p = plants::ElectromechParams::default();
    let aug = augment(&plants::by_name(ELECTROMECH).unwrap()).unwrap();
    let g = plants::published_gains(ELECTROMECH).unwrap();
    let residual = check_constraint(&g.t, &g.n, &aug).unwrap();
    let expected = (-1.6642 + 10.0 * p.inertia()).abs();
    assert!((residual - expected).abs() < 1e-9, "{residual} vs {expected}");
    assert!(residual > 1.0);
}

#[test]
fn linear_plant_error_matches_matrix_exponential() {
    let a = from_rows(&[&[-0.5, -0.3]]);
    let (model, aug) = linear_setup(a.clone());
    let obs = synthesize(&aug, 1.5, model.gamma_f, &Vector::zeros(2), &SynthOptions::default()).unwrap();
    // ė = (TP̃ − LC̃ + TM̃ A H1) e for linear f
    let m = observer::error_matrix(&obs, &aug, &Vector::zeros(2)) + &obs.t * &aug.m_tilde_e * &a * &aug.h1;

    let cfg = open_loop_cfg(vec![1.0, -0.5], vec![0.0, 0.0, 0.5], FaultSignal::sinusoid(1.0, 2.0), 3.0, 1e-3, 50);
    let traj = simulate(&model, &aug, &obs, None, &cfg, true).unwrap();
    let e0 = traj.error(0);
    for i in 0..traj.len() {
        let want = (&m * traj.times[i]).exp() * &e0;
        let got = traj.error(i);
        assert!((got - &want).amax() < 1e-5, "t = {}", traj.times[i]);
    }
}

#[test]
fn linear_plant_respects_decay_envelope_and_slope() {
    let (model, aug) = linear_setup(from_rows(&[&[-0.2, -0.1]]));
    let obs = synthesize(&aug, 2.0, model.gamma_f, &Vector::zeros(2), &SynthOptions::default()).unwrap();
    let cert = decay_certificate(&obs, &aug).unwrap();
    assert!(cert.c1 > 0.0, "c1 = {}", cert.c1);

    let cfg = open_loop_cfg(vec![0.8, 0.4], vec![-1.0, 1.0, 2.0], FaultSignal::sinusoid(2.0, 1.0), 4.0, 1e-3, 10);
    let traj = simulate(&model, &aug, &obs, None, &cfg, true).unwrap();
    let v0 = lyapunov_value(&obs, &traj.error(0));
    for i in 0..traj.len() {
        let e2 = traj.error(i).norm_squared();
        assert!(e2 <= cert.bound(v0, traj.times[i]) * (1.0 + 1e-6));
    }
    let norms = traj.error_norms();
    let t1 = traj.times.iter().position(|&t| t >= 0.5).unwrap();
    let t2 = norms.iter().rposition(|&e| e > 1e-9).unwrap();
    assert!(t2 > t1 + 10);
    let slope = (norms[t2].ln() - norms[t1].ln()) / (traj.times[t2] - traj.times[t1]);
    assert!(slope <= -cert.c1 / 2.0, "slope {slope} vs -c1/2 = {}", -cert.c1 / 2.0);
}

struct ScheduledGain;

impl FasDynamics for ScheduledGain {
    fn drift(&self, x: &Vector, _zeta: &[f64], _t: f64) -> Vector {
        Vector::from_element(1, -x[0])
    }
    fn input_matrix(&self, _y: &Vector, zeta: &[f64], _t: f64) -> Mat {
        Mat::from_element(1, 1, 1.0 + zeta[0])
    }
    fn fault_matrix(&self, _y: &Vector) -> Mat {
        Mat::from_element(1, 1, 1.0)
    }
}

#[test]
fn exogenous_factor_reaches_input_matrix() {
    let sig = FasSignature::single(1, 1).unwrap();
    let c = from_rows(&[&[1.0], &[0.0]]);
    let d2 = from_rows(&[&[0.0], &[1.0]]);
    let model = FasModel::new("scheduled", sig, Arc::new(ScheduledGain), c, d2, 1.0, 1.0).unwrap();
    let aug = augment(&model).unwrap();
    let obs = synthesize(&aug, 1.0, 1.0, &Vector::zeros(2), &SynthOptions::default()).unwrap();
    let ctrl = controller::design_from_poles(&model.sig, &[vec![Complex64::new(-2.0, 0.0)]], None).unwrap();
    let run = |zeta: f64| {
        let mut cfg = open_loop_cfg(vec![1.0], vec![1.0, 0.0], FaultSignal::Zero, 1.0, 1e-3, 100);
        cfg.zeta = vec![zeta];
        simulate(&model, &aug, &obs, Some(&ctrl), &cfg, true).unwrap()
    };
    // the law divides by B(ζ), so the applied input scales with 1/(1 + ζ)
    let (a, b) = (run(0.0), run(3.0));
    assert!((a.x[5][0] - b.x[5][0]).abs() < 1e-12);
    assert!((a.u[5][0] - 4.0 * b.u[5][0]).abs() < 1e-12);
    // −1 makes B singular: the run aborts instead of dividing by zero
    let dead = run(-1.0);
    assert_eq!(dead.abort.as_ref().unwrap().kind, "actuation");
}

#[test]
fn electromech_open_loop_estimation_converges() {
    let pre = plants::preset(ELECTROMECH).unwrap();
    let (model, aug, obs) = design_for(ELECTROMECH);
    let cfg = open_loop_cfg(pre.x0.clone(), pre.xtilde_hat0.clone(), FaultSignal::sinusoid(6.0, 1.0), 5.0, 1e-4, 100);
    let traj = simulate(&model, &aug, &obs, None, &cfg, true).unwrap();
    assert!(traj.abort.is_none());
    assert!(traj.u.iter().all(|u| u[0] == 0.0));
    let last = traj.len() - 1;
    assert!(traj.error(last).norm() < 1e-2);
    // published initial estimate is decoded exactly
    for (a, b) in traj.xtilde_hat[0].iter().zip(&pre.xtilde_hat0) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn electromech_closed_loop_settles_and_compensation_helps() {
    let pre = plants::preset(ELECTROMECH).unwrap();
    let (model, aug, obs) = design_for(ELECTROMECH);
    let poles: Vec<Complex64> = pre.poles.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let ctrl = controller::design_from_poles(&model.sig, &[poles], None).unwrap();
    let cfg = open_loop_cfg(pre.x0.clone(), pre.xtilde_hat0.clone(), FaultSignal::sinusoid(6.0, 1.0), 10.0, 1e-4, 100);
    let on = simulate(&model, &aug, &obs, Some(&ctrl), &cfg, true).unwrap();
    let off = simulate(&model, &aug, &obs, Some(&ctrl), &cfg, false).unwrap();
    assert!(on.state_norm(on.len() - 1) < 1e-2);
    let itae = |t: &fasctl_core::Trajectory| t.metrics().unwrap().state("x1").unwrap().itae;
    assert!(itae(&on) < itae(&off));
}

#[test]
fn ballbeam_uncompensated_run_leaves_safe_region() {
    let pre = plants::preset(BALLBEAM).unwrap();
    let (model, aug, obs) = design_for(BALLBEAM);
    let poles: Vec<Complex64> = pre.poles.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let ctrl = controller::design_from_poles(&model.sig, &[poles], None).unwrap();
    let cfg = open_loop_cfg(pre.x0.clone(), pre.xtilde_hat0.clone(), FaultSignal::sinusoid(6.0, 1.0), 5.0, 1e-4, 100);
    let off = simulate(&model, &aug, &obs, Some(&ctrl), &cfg, false).unwrap();
    let abort = off.abort.clone().expect("uncompensated run should abort");
    assert_eq!(abort.kind, "safe_region");
    assert!(off.len() < 5 * 100);
}
