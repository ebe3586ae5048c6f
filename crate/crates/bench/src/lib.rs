//! Shared fixtures for the criterion benches.

use fasctl_core::observer::{synthesize, SynthOptions};
use fasctl_core::sim::{ObserverInit, SimConfig};
use fasctl_core::{augment, controller, plants, Complex64, ControllerDesign, DescriptorAug, FasModel, FaultSignal, Mat, ObserverDesign, Vector};

/// Deterministic dense test matrix with entries in `[-1, 1]`.
pub fn test_matrix(rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |i, j| (((i * 7 + j * 13 + 3) % 17) as f64 / 8.0) - 1.0)
}

pub struct Loop {
    pub model: FasModel,
    pub aug: DescriptorAug,
    pub observer: ObserverDesign,
    pub controller: ControllerDesign,
    pub config: SimConfig,
}

/// Reference closed loop for a registry plant over `t_end` seconds.
pub fn reference_loop(name: &str, t_end: f64) -> Loop {
    let pre = plants::preset(name).expect("registered plant");
    let model = plants::by_name(name).expect("registered plant");
    let aug = augment(&model).expect("augmentable");
    let observer = synthesize(&aug, pre.mu_e, pre.gamma_f, &Vector::zeros(model.p()), &SynthOptions::default()).expect("feasible");
    let poles: Vec<Complex64> = pre.poles.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let controller = controller::design_from_poles(&model.sig, &[poles], None).expect("placeable");
    let config = SimConfig {
        t_end,
        dt: 1e-4,
        x0: pre.x0,
        observer_init: ObserverInit::XtildeHat(pre.xtilde_hat0),
        fault: vec![FaultSignal::sinusoid(6.0, 1.0)],
        stride: 10,
        zeta: vec![],
    };
    Loop { model, aug, observer, controller, config }
}
