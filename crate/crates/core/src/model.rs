//! Mixed-order fully actuated plants and their lifted forms.
//!
//! A plant is `x_i^(m_i) = f(x, ζ, t) + B(y, ζ, t) u + D1(y) d` with output
//! `y = C x + D2 d`, where `x` stacks every block's derivatives of order
//! `0..m_i-1`. [`augment`] builds the descriptor form over `[x; d]`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, block_diag, hstack, vstack, Mat, Vector};

/// Block structure `(m_i, r_i)` of a mixed-order plant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FasSignature {
    m: Vec<usize>,
    r: Vec<usize>,
}

impl FasSignature {
    pub fn new(m: Vec<usize>, r: Vec<usize>) -> Result<Self> {
        if m.is_empty() || m.len() != r.len() {
            return Err(Error::Model(format!(
                "signature needs matching nonempty order/width lists, got {} and {}",
                m.len(),
                r.len()
            )));
        }
        if m.iter().chain(r.iter()).any(|&v| v == 0) {
            return Err(Error::Model("orders and widths must be >= 1".into()));
        }
        Ok(Self { m, r })
    }

    /// Single block of order `m` and width `r`.
    pub fn single(m: usize, r: usize) -> Result<Self> {
        Self::new(vec![m], vec![r])
    }

    pub fn xi(&self) -> usize {
        self.m.len()
    }

    pub fn orders(&self) -> &[usize] {
        &self.m
    }

    pub fn widths(&self) -> &[usize] {
        &self.r
    }

    /// Lifted state dimension `Σ m_i r_i`.
    pub fn s(&self) -> usize {
        self.m.iter().zip(&self.r).map(|(m, r)| m * r).sum()
    }

    /// Input dimension `Σ r_i`.
    pub fn rr(&self) -> usize {
        self.r.iter().sum()
    }

    pub fn max_order(&self) -> usize {
        self.m.iter().copied().max().unwrap_or(0)
    }

    /// Start index of each block inside the lifted state.
    pub fn state_offsets(&self) -> Vec<usize> {
        self.m
            .iter()
            .zip(&self.r)
            .scan(0, |acc, (m, r)| {
                let start = *acc;
                *acc += m * r;
                Some(start)
            })
            .collect()
    }
}

/// Nonlinear parts of a plant. Implementations must be reentrant.
pub trait FasDynamics: Send + Sync {
    /// `f(x, ζ, t)`, length `rr`.
    fn drift(&self, x: &Vector, zeta: &[f64], t: f64) -> Vector;

    /// `B(y, ζ, t)`, `rr × rr`.
    fn input_matrix(&self, y: &Vector, zeta: &[f64], t: f64) -> Mat;

    /// `D1(y)`, `rr × q`.
    fn fault_matrix(&self, y: &Vector) -> Mat;

    /// Reason the state is outside the declared operating region, if it is.
    fn region_violation(&self, _x: &Vector) -> Option<String> {
        None
    }
}

/// A mixed-order fully actuated plant.
#[derive(Clone)]
pub struct FasModel {
    pub name: String,
    pub sig: FasSignature,
    pub dynamics: Arc<dyn FasDynamics>,
    pub c: Mat,
    pub d2: Mat,
    /// Declared Lipschitz constant of `f`.
    pub gamma_f: f64,
    /// Declared bound on `‖D1(y)‖` over the operating region.
    pub d1_bound: f64,
}

impl fmt::Debug for FasModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FasModel")
            .field("name", &self.name)
            .field("sig", &self.sig)
            .field("c", &self.c)
            .field("d2", &self.d2)
            .field("gamma_f", &self.gamma_f)
            .field("d1_bound", &self.d1_bound)
            .finish_non_exhaustive()
    }
}

impl FasModel {
    pub fn new(
        name: impl Into<String>,
        sig: FasSignature,
        dynamics: Arc<dyn FasDynamics>,
        c: Mat,
        d2: Mat,
        gamma_f: f64,
        d1_bound: f64,
    ) -> Result<Self> {
        let s = sig.s();
        if c.ncols() != s {
            return Err(Error::Shape(format!(
                "C must have {s} columns, got {}",
                c.ncols()
            )));
        }
        if d2.nrows() != c.nrows() {
            return Err(Error::Shape(format!(
                "D2 must have {} rows, got {}",
                c.nrows(),
                d2.nrows()
            )));
        }
        matcore::ensure_finite(&c, "C")?;
        matcore::ensure_finite(&d2, "D2")?;
        if !(gamma_f > 0.0 && gamma_f.is_finite()) {
            return Err(Error::Model(format!("gamma_f must be positive, got {gamma_f}")));
        }
        if !(d1_bound >= 0.0 && d1_bound.is_finite()) {
            return Err(Error::Model(format!(
                "D1 bound must be nonnegative, got {d1_bound}"
            )));
        }
        Ok(Self {
            name: name.into(),
            sig,
            dynamics,
            c,
            d2,
            gamma_f,
            d1_bound,
        })
    }

    pub fn s(&self) -> usize {
        self.sig.s()
    }

    pub fn rr(&self) -> usize {
        self.sig.rr()
    }

    /// Fault dimension.
    pub fn q(&self) -> usize {
        self.d2.ncols()
    }

    /// Output dimension.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn output(&self, x: &Vector, d: &Vector) -> Vector {
        &self.c * x + &self.d2 * d
    }
}

/// `Φ_E(0)`: block diagonal of upper block-shift matrices.
pub fn build_phi_e(sig: &FasSignature) -> Mat {
    let blocks: Vec<Mat> = sig
        .orders()
        .iter()
        .zip(sig.widths())
        .map(|(&m, &r)| {
            let n = m * r;
            Mat::from_fn(n, n, |i, j| if j == i + r { 1.0 } else { 0.0 })
        })
        .collect();
    block_diag(&blocks)
}

/// `M_E`: block diagonal of selectors `[0; I_r]` onto the top derivative.
pub fn build_m_e(sig: &FasSignature) -> Mat {
    let blocks: Vec<Mat> = sig
        .orders()
        .iter()
        .zip(sig.widths())
        .map(|(&m, &r)| {
            let mut b = Mat::zeros(m * r, r);
            b.view_mut(((m - 1) * r, 0), (r, r))
                .copy_from(&Mat::identity(r, r));
            b
        })
        .collect();
    block_diag(&blocks)
}

/// Companion-form `Φ_E(A)` for the gain `K = blockdiag(A^i)`: each block is
/// the shift `Φ_i(0)` with `−A^i` in its last block row.
pub fn build_phi_e_closed(sig: &FasSignature, k: &Mat) -> Result<Mat> {
    let s = sig.s();
    if k.shape() != (sig.rr(), s) {
        return Err(Error::Shape(format!(
            "gain must be {}x{s}, got {}x{}",
            sig.rr(),
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(build_phi_e(sig) - build_m_e(sig) * k)
}

/// Descriptor form of a plant over the augmented state `[x; d]`.
#[derive(Clone)]
pub struct DescriptorAug {
    pub s: usize,
    pub q: usize,
    pub p: usize,
    pub rr: usize,
    pub phi_e: Mat,
    pub m_e: Mat,
    pub e: Mat,
    pub ctilde: Mat,
    pub m_tilde_e: Mat,
    pub theta: Mat,
    pub h1: Mat,
    pub h2: Mat,
    pub h3: Mat,
    pub h4: Mat,
    dynamics: Arc<dyn FasDynamics>,
}

impl fmt::Debug for DescriptorAug {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DescriptorAug")
            .field("s", &self.s)
            .field("q", &self.q)
            .field("p", &self.p)
            .field("e", &self.e)
            .field("ctilde", &self.ctilde)
            .field("theta", &self.theta)
            .finish_non_exhaustive()
    }
}

impl DescriptorAug {
    /// Augmented dimension `s + q`.
    pub fn n(&self) -> usize {
        self.s + self.q
    }

    /// `P̃ = [Φ_E(0), M_E D1; 0, 0]` for a given `D1` value.
    pub fn ptilde_with(&self, d1: &Mat) -> Mat {
        let n = self.n();
        let mut p = Mat::zeros(n, n);
        p.view_mut((0, 0), (self.s, self.s)).copy_from(&self.phi_e);
        if self.q > 0 {
            p.view_mut((0, self.s), (self.s, self.q))
                .copy_from(&(&self.m_e * d1));
        }
        p
    }

    /// `P̃(y)` with `D1` evaluated at the output `y`.
    pub fn ptilde(&self, y: &Vector) -> Mat {
        self.ptilde_with(&self.dynamics.fault_matrix(y))
    }
}

/// Builds `E, P̃, C̃, M̃_E, Θ, H1..H4` from a plant.
pub fn augment(model: &FasModel) -> Result<DescriptorAug> {
    let s = model.s();
    let q = model.q();
    let p = model.p();
    let rr = model.rr();
    if q > p {
        return Err(Error::Assumption(format!(
            "fault dimension q={q} exceeds output dimension p={p}"
        )));
    }
    if q > 0 && matcore::rank(&model.d2) < q {
        return Err(Error::Model("D2 must have full column rank".into()));
    }
    let n = s + q;
    let phi_e = build_phi_e(&model.sig);
    let m_e = build_m_e(&model.sig);

    let mut e = Mat::zeros(n, n);
    e.view_mut((0, 0), (s, s)).copy_from(&Mat::identity(s, s));
    let ctilde = hstack(&[&model.c, &model.d2])?;
    let m_tilde_e = vstack(&[&m_e, &Mat::zeros(q, rr)])?;
    let theta = vstack(&[&e, &ctilde])?;
    let h1 = hstack(&[&Mat::identity(s, s), &Mat::zeros(s, q)])?;
    let h2 = hstack(&[&Mat::zeros(q, s), &Mat::identity(q, q)])?;
    let h3 = vstack(&[&Mat::identity(n, n), &Mat::zeros(p, n)])?;
    let h4 = vstack(&[&Mat::zeros(n, p), &Mat::identity(p, p)])?;

    Ok(DescriptorAug {
        s,
        q,
        p,
        rr,
        phi_e,
        m_e,
        e,
        ctilde,
        m_tilde_e,
        theta,
        h1,
        h2,
        h3,
        h4,
        dynamics: Arc::clone(&model.dynamics),
    })
}

/// Fails unless `b` is square, finite and has condition number below 1e12.
pub fn check_actuation(b: &Mat) -> Result<()> {
    if !b.is_square() {
        return Err(Error::Actuation(format!(
            "input matrix is {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Actuation("input matrix is not finite".into()));
    }
    let sv = matcore::singular_values(b);
    let smax = sv.iter().fold(0.0_f64, |m, v| m.max(*v));
    let smin = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if smax == 0.0 || smin < 1e-12 * smax {
        return Err(Error::Actuation(format!(
            "input matrix is singular (sigma_min={smin:.3e}, sigma_max={smax:.3e})"
        )));
    }
    Ok(())
}

fn check_len(v: &Vector, want: usize, what: &str) -> Result<()> {
    if v.len() == want {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what} must have length {want}, got {}",
            v.len()
        )))
    }
}

/// Time derivative of the lifted state and the output at that instant.
pub fn fas_rhs(
    model: &FasModel,
    x: &Vector,
    u: &Vector,
    d: &Vector,
    zeta: &[f64],
    t: f64,
) -> Result<(Vector, Vector)> {
    check_len(x, model.s(), "state")?;
    check_len(u, model.rr(), "input")?;
    check_len(d, model.q(), "fault")?;
    let y = model.output(x, d);
    let b = model.dynamics.input_matrix(&y, zeta, t);
    check_actuation(&b)?;
    let dyn_ = &model.dynamics;
    let top = dyn_.drift(x, zeta, t) + b * u + dyn_.fault_matrix(&y) * d;
    let xdot = build_phi_e(&model.sig) * x + build_m_e(&model.sig) * top;
    Ok((xdot, y))
}

/// Sampled lower estimate of the Lipschitz constant of `f` on a box.
///
/// Advisory only: synthesis always uses the declared `gamma_f`.
pub fn estimate_lipschitz(
    model: &FasModel,
    bounds: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if bounds.len() != model.s() {
        return Err(Error::Shape(format!(
            "box needs {} intervals, got {}",
            model.s(),
            bounds.len()
        )));
    }
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(Error::Input("box must be bounded with lo <= hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        Vector::from_iterator(
            bounds.len(),
            bounds.iter().map(|&(lo, hi)| {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            }),
        )
    };
    let mut best = 0.0_f64;
    for _ in 0..samples {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let dx = (&a - &b).norm();
        if dx < 1e-12 {
            continue;
        }
        let df = (model.dynamics.drift(&a, &[], 0.0) - model.dynamics.drift(&b, &[], 0.0)).norm();
        best = best.max(df / dx);
    }
    Ok(best)
}

/// `f(x) = Ax`, `B = I`, `D1 = G`: a linear fully actuated plant.
#[derive(Debug, Clone)]
pub struct LinearDynamics {
    pub a: Mat,
    pub g: Mat,
}

impl FasDynamics for LinearDynamics {
    fn drift(&self, x: &Vector, _zeta: &[f64], _t: f64) -> Vector {
        &self.a * x
    }
    fn input_matrix(&self, _y: &Vector, _zeta: &[f64], _t: f64) -> Mat {
        Mat::identity(self.a.nrows(), self.a.nrows())
    }
    fn fault_matrix(&self, _y: &Vector) -> Mat {
        self.g.clone()
    }
}

/// Linear plant with `gamma_f = ‖A‖₂` and `D̄1 = ‖G‖₂`.
pub fn linear_model(sig: FasSignature, a: Mat, g: Mat, c: Mat, d2: Mat) -> Result<FasModel> {
    if a.shape() != (sig.rr(), sig.s()) || g.shape() != (sig.rr(), d2.ncols()) {
        return Err(Error::Shape(format!(
            "linear plant needs A {}x{} and G {}x{}",
            sig.rr(),
            sig.s(),
            sig.rr(),
            d2.ncols()
        )));
    }
    let gamma_f = matcore::norm2(&a).max(1e-12);
    let d1_bound = matcore::norm2(&g);
    FasModel::new("linear", sig, Arc::new(LinearDynamics { a, g }), c, d2, gamma_f, d1_bound)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    pub fn linear_model(sig: FasSignature, a: Mat, g: Mat, c: Mat, d2: Mat) -> FasModel {
        super::linear_model(sig, a, g, c, d2).unwrap()
    }
}
