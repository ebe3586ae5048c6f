use fasctl_core::model::{estimate_lipschitz, fas_rhs};
use fasctl_core::observer::{synthesize, SynthOptions};
use fasctl_core::plants::{self, BallBeamParams, ElectromechParams};
use fasctl_core::sim::integrate::rk4_step;
use fasctl_core::sim::{simulate, ObserverInit, SimConfig};
use fasctl_core::{augment, controller, Complex64, Error, FaultSignal, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Res<T> = Result<T, Error>;

fn integrate_fas(model: &fasctl_core::FasModel, x0: Vector, u: impl Fn(f64) -> f64, d: impl Fn(f64) -> f64, dt: f64, steps: usize) -> Vec<Vector> {
    let mut f = |t: f64, x: &Vector| -> Res<Vector> {
        let (xdot, _) = fas_rhs(model, x, &Vector::from_element(1, u(t)), &Vector::from_element(1, d(t)), &[], t)?;
        Ok(xdot)
    };
    let mut out = vec![x0.clone()];
    let mut x = x0;
    for i in 0..steps {
        x = rk4_step(&mut f, i as f64 * dt, &x, dt).unwrap();
        out.push(x.clone());
    }
    out
}

#[test]
fn electromech_fas_agrees_with_motor_link_model() {
    let p = ElectromechParams::default();
    let model = plants::electromech_fas(&p).unwrap();
    let volt = |t: f64| 2.0 * (3.0 * t).sin();
    let dist = |t: f64| 6.0 * t.sin();
    let (dt, steps) = (1e-4, 50_000);

    let mut orig = |t: f64, s: &Vector| -> Res<Vector> {
        Ok(Vector::from_column_slice(&p.original_rhs(&[s[0], s[1], s[2]], volt(t), dist(t))))
    };
    let mut s = Vector::from_vec(vec![1.0, 1.0, 1.0]);
    let fas = integrate_fas(&model, p.to_fas(&[1.0, 1.0, 1.0]), volt, dist, dt, steps);
    let mut worst = 0.0_f64;
    for (i, x) in fas.iter().enumerate() {
        worst = worst.max((x[0] - s[0]).abs()).max((x[1] - s[2]).abs());
        if i < steps {
            s = rk4_step(&mut orig, i as f64 * dt, &s, dt).unwrap();
        }
    }
    assert!(worst < 1e-6, "max deviation {worst:e}");
}

#[test]
fn ballbeam_fas_agrees_with_pre_transform_model() {
    let p = BallBeamParams::default();
    let model = plants::ballbeam_fas(&p).unwrap();
    let u = |t: f64| 0.05 * t.sin();
    let d = |t: f64| 0.02 * (2.0 * t).cos();
    let (dt, steps) = (1e-4, 50_000);
    let init = [0.05, 0.0, 0.1, 0.0];

    let phys = plants::simulate_ballbeam_original(&p, init, u, d, dt, dt * steps as f64);
    let fas = integrate_fas(&model, Vector::from_column_slice(&p.diffeo(&init).unwrap()), u, d, dt, steps);
    assert_eq!(phys.len(), fas.len());
    let mut worst = 0.0_f64;
    for (sample, x) in phys.iter().zip(&fas) {
        let mapped = p.diffeo(&sample.state).unwrap();
        assert!(x[2].abs() < 1.0 - p.delta);
        for j in 0..4 {
            worst = worst.max((mapped[j] - x[j]).abs());
        }
    }
    assert!(worst < 1e-5, "max deviation {worst:e}");
}

#[test]
fn diffeo_round_trip_on_random_points() {
    let p = BallBeamParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let phys = [
            rng.random_range(-0.2..0.2),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.5..1.5),
            rng.random_range(-3.0..3.0),
        ];
        let back = p.inverse_diffeo(&p.diffeo(&phys).unwrap()).unwrap();
        for j in 0..4 {
            assert!((back[j] - phys[j]).abs() < 1e-12, "{phys:?} -> {back:?}");
        }
    }
}

#[test]
fn ballbeam_input_gain_stays_above_clamp_bound() {
    let p = BallBeamParams::default();
    let model = plants::ballbeam_fas(&p).unwrap();
    let aug = augment(&model).unwrap();
    let pre = plants::preset(plants::BALLBEAM).unwrap();
    let obs = synthesize(&aug, pre.mu_e, pre.gamma_f, &Vector::zeros(2), &SynthOptions::default()).unwrap();
    let poles: Vec<Complex64> = pre.poles.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let ctrl = controller::design_from_poles(&model.sig, &[poles], None).unwrap();
    let cfg = SimConfig {
        t_end: 5.0,
        dt: 1e-4,
        x0: pre.x0.clone(),
        observer_init: ObserverInit::XtildeHat(pre.xtilde_hat0.clone()),
        fault: vec![FaultSignal::sinusoid(6.0, 1.0)],
        stride: 10,
        zeta: vec![],
    };
    let traj = simulate(&model, &aug, &obs, Some(&ctrl), &cfg, true).unwrap();
    assert!(traj.abort.is_none());
    let floor = p.eps3() * (2.0 * p.delta - p.delta * p.delta).sqrt();
    for y in &traj.y {
        let b = model.dynamics.input_matrix(&Vector::from_column_slice(y), &[], 0.0)[(0, 0)];
        assert!(b >= floor);
    }
}

#[test]
fn electromech_lipschitz_estimate_within_gradient_bound() {
    let p = ElectromechParams::default();
    let model = plants::electromech_fas(&p).unwrap();
    let pi = std::f64::consts::PI;
    let bounds = [(-pi, pi), (-5.0, 5.0), (-5.0, 5.0)];
    let est = estimate_lipschitz(&model, &bounds, 20_000, 9).unwrap();

    let (m, n, b) = (p.inertia(), p.gravity(), p.friction());
    let ml = m * p.l_e;
    let d_qdd = b / m + p.r_e / p.l_e;
    let d_qd = (p.r_e * b + p.k_b) / ml + n / m;
    let d_q = 5.0 * n / m + p.r_e * n / ml;
    let upper = (d_qdd * d_qdd + d_qd * d_qd + d_q * d_q).sqrt();
    assert!(est.is_finite());
    assert!(est <= upper, "{est} > {upper}");
    // the q̈ coefficient alone is already far above the declared γ_f = 1
    assert!(est > 0.5 * d_qdd);
}
