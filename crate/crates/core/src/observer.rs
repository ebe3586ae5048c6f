//! Unknown-input observer synthesis for the descriptor form `[x; d]`.
//!
//! The observer gains are `T = Θ†H3 + SH3 − SΘΘ†H3`,
//! `N = Θ†H4 + SH4 − SΘΘ†H4` and `L = P_e⁻¹Q`, with `S = P_e⁻¹W` taken from
//! a feasible point of the observer LMI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{self, SolveOptions};
use crate::matcore::{self, serde_mat, Mat, Spectrum, Vector};
use crate::model::DescriptorAug;

/// Observer gains together with the certificate that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverDesign {
    #[serde(with = "serde_mat")]
    pub t: Mat,
    #[serde(with = "serde_mat")]
    pub n: Mat,
    #[serde(with = "serde_mat")]
    pub l: Mat,
    #[serde(with = "serde_mat")]
    pub s: Mat,
    #[serde(with = "serde_mat")]
    pub p_e: Mat,
    pub eta: f64,
    pub mu_e: f64,
    pub gamma_f: f64,
    pub c1: f64,
    /// Certified LMI margin; zero for designs that did not come from the LMI.
    pub margin: f64,
    /// Output at which `P̃` was frozen for synthesis.
    pub y_op: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub solve: SolveOptions,
    /// Strictness offset in `εI − P_e ≺ 0` and `ε − η < 0`.
    pub epsilon: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            epsilon: 1e-6,
        }
    }
}

/// `(T, N)` for a given free matrix `S` of shape `(s+q) × (s+q+p)`.
pub fn gains_from_s(aug: &DescriptorAug, s: &Mat) -> Result<(Mat, Mat)> {
    let n = aug.n();
    if s.shape() != (n, n + aug.p) {
        return Err(Error::Shape(format!(
            "S must be {}x{}, got {}x{}",
            n,
            n + aug.p,
            s.nrows(),
            s.ncols()
        )));
    }
    let tp = matcore::pinv(&aug.theta)?;
    let proj = Mat::identity(n + aug.p, n + aug.p) - &aug.theta * &tp;
    let base = &tp + s * proj;
    Ok((&base * &aug.h3, &base * &aug.h4))
}

/// `T = Θ†H3`, `N = Θ†H4`, skipping the LMI.
pub fn fast_path(aug: &DescriptorAug) -> Result<(Mat, Mat)> {
    check_structure(aug)?;
    gains_from_s(aug, &Mat::zeros(aug.n(), aug.n() + aug.p))
}

/// `‖TE + NC̃ − I‖∞` as the largest absolute entry.
pub fn check_constraint(t: &Mat, n: &Mat, aug: &DescriptorAug) -> Result<f64> {
    let dim = aug.n();
    if t.shape() != (dim, dim) || n.shape() != (dim, aug.p) {
        return Err(Error::Shape(format!(
            "T must be {dim}x{dim} and N {dim}x{}, got {:?} and {:?}",
            aug.p,
            t.shape(),
            n.shape()
        )));
    }
    let r = t * &aug.e + n * &aug.ctilde - Mat::identity(dim, dim);
    Ok(matcore::max_abs(&r))
}

/// Θ full column rank and the PBH test `rank[Φ_E(0); C] = s` at `λ = 0`.
fn check_structure(aug: &DescriptorAug) -> Result<()> {
    let n = aug.n();
    let rk = matcore::rank(&aug.theta);
    if rk < n {
        return Err(Error::Structural(format!(
            "Theta has rank {rk}, needs full column rank {n}"
        )));
    }
    let c = aug.ctilde.columns(0, aug.s).into_owned();
    let pbh = matcore::vstack(&[&aug.phi_e, &c])?;
    let rk = matcore::rank(&pbh);
    if rk < aug.s {
        return Err(Error::Assumption(format!(
            "(Phi_E(0), C) not detectable: PBH rank {rk} < {}",
            aug.s
        )));
    }
    Ok(())
}

/// Error-dynamics matrix `TP̃ − LC̃` at output `y`.
pub fn error_matrix(design: &ObserverDesign, aug: &DescriptorAug, y: &Vector) -> Mat {
    &design.t * aug.ptilde(y) - &design.l * &aug.ctilde
}

/// Spectrum of the error dynamics at the synthesis operating point.
pub fn observer_poles(design: &ObserverDesign, aug: &DescriptorAug) -> Result<Spectrum> {
    let y = Vector::from_column_slice(&design.y_op);
    matcore::spectrum(&error_matrix(design, aug, &y))
}

/// Runs the full synthesis pipeline at operating output `y_op`.
pub fn synthesize(
    aug: &DescriptorAug,
    mu_e: f64,
    gamma_f: f64,
    y_op: &Vector,
    opts: &SynthOptions,
) -> Result<ObserverDesign> {
    if !(mu_e > 0.0 && mu_e.is_finite()) {
        return Err(Error::Input(format!("mu_e must be positive, got {mu_e}")));
    }
    if !(gamma_f >= 0.0 && gamma_f.is_finite()) {
        return Err(Error::Input(format!("gamma_f must be nonnegative, got {gamma_f}")));
    }
    check_structure(aug)?;
    let problem = lmi::assemble_theorem1(aug, mu_e, gamma_f, y_op, opts.epsilon)?;
    let sol = lmi::solve(&problem, &opts.solve)?;
    let vars = lmi::unpack_theorem1(&problem, &sol)?;

    let chol = vars.p_e.clone().cholesky().ok_or_else(|| {
        Error::Structural("P_e from the LMI is not positive definite".into())
    })?;
    let s = chol.solve(&vars.w);
    let l = chol.solve(&vars.q);
    let (t, n) = gains_from_s(aug, &s)?;

    let mut design = ObserverDesign {
        t,
        n,
        l,
        s,
        p_e: vars.p_e,
        eta: vars.eta,
        mu_e,
        gamma_f,
        c1: 0.0,
        margin: sol.margin,
        y_op: y_op.iter().copied().collect(),
    };
    design.c1 = decay_certificate(&design, aug)?.c1;

    let residual = check_constraint(&design.t, &design.n, aug)?;
    if residual > 1e-8 {
        return Err(Error::InfeasibleEquation { residual });
    }
    let poles = observer_poles(&design, aug)?;
    if poles.max_real >= -mu_e + 1e-6 {
        return Err(Error::DecayRateUnachievable {
            max_real: poles.max_real,
            mu: mu_e,
        });
    }
    Ok(design)
}

/// Exponential envelope `‖e(t)‖² ≤ V_e(0) e^{−c1 t} / λ_min(P_e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub c1: f64,
    pub lambda_min: f64,
}

impl DecayCertificate {
    /// Right-hand side of the envelope given `V_e(0) = e(0)ᵀP_e e(0)`.
    pub fn bound(&self, v0: f64, t: f64) -> f64 {
        v0 * (-self.c1 * t).exp() / self.lambda_min
    }

    pub fn is_decaying(&self) -> bool {
        self.c1 > 0.0
    }
}

/// `c1 = μ_e − μ_e⁻¹γ_f²λ_min⁻¹(P_e)‖P_e‖‖TM̃_E‖²‖H1‖²`.
pub fn decay_certificate(design: &ObserverDesign, aug: &DescriptorAug) -> Result<DecayCertificate> {
    certificate_with_h1(design, aug, &aug.h1)
}

pub(crate) fn certificate_with_h1(
    design: &ObserverDesign,
    aug: &DescriptorAug,
    h1: &Mat,
) -> Result<DecayCertificate> {
    let lambda_min = matcore::lambda_min(&design.p_e)?;
    if !(lambda_min > 0.0) {
        return Err(Error::Structural(format!(
            "P_e is not positive definite (lambda_min = {lambda_min:.3e})"
        )));
    }
    let tm = matcore::norm2(&(&design.t * &aug.m_tilde_e));
    let penalty = design.gamma_f.powi(2) / lambda_min
        * matcore::norm2(&design.p_e)
        * tm
        * tm
        * matcore::norm2(h1).powi(2);
    Ok(DecayCertificate {
        c1: design.mu_e - penalty / design.mu_e,
        lambda_min,
    })
}

/// `V_e = eᵀP_e e`.
pub fn lyapunov_value(design: &ObserverDesign, e: &Vector) -> f64 {
    e.dot(&(&design.p_e * e))
}
