//! Small dense LMI feasibility problems.
//!
//! A problem is a list of symmetric blocks `G_b(θ) = C_b + Σ_k θ_k A_bk`,
//! each required to be negative definite. The solver minimizes `t` subject
//! to `G_b(θ) ⪯ tI` for every block with a log-det barrier and damped
//! Newton steps, and stops as soon as `t < −min_margin`. A ball
//! `‖θ‖ ≤ R` keeps homogeneous problems bounded.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, serde_mat, Mat, Vector};
use crate::model::DescriptorAug;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarKind {
    Symmetric { n: usize },
    Full { rows: usize, cols: usize },
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VarKind,
}

impl VarSpec {
    pub fn new(name: impl Into<String>, kind: VarKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    /// Number of scalar unknowns (upper triangle for symmetric matrices).
    pub fn count(&self) -> usize {
        match self.kind {
            VarKind::Symmetric { n } => n * (n + 1) / 2,
            VarKind::Full { rows, cols } => rows * cols,
            VarKind::Scalar => 1,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self.kind {
            VarKind::Symmetric { n } => (n, n),
            VarKind::Full { rows, cols } => (rows, cols),
            VarKind::Scalar => (1, 1),
        }
    }

    fn to_matrix(&self, x: &[f64]) -> Mat {
        match self.kind {
            VarKind::Symmetric { n } => {
                let mut m = Mat::zeros(n, n);
                let mut k = 0;
                for i in 0..n {
                    for j in i..n {
                        m[(i, j)] = x[k];
                        m[(j, i)] = x[k];
                        k += 1;
                    }
                }
                m
            }
            VarKind::Full { rows, cols } => Mat::from_fn(rows, cols, |i, j| x[i * cols + j]),
            VarKind::Scalar => Mat::from_element(1, 1, x[0]),
        }
    }

    fn from_matrix(&self, m: &Mat, out: &mut Vec<f64>) {
        match self.kind {
            VarKind::Symmetric { n } => {
                for i in 0..n {
                    for j in i..n {
                        out.push(0.5 * (m[(i, j)] + m[(j, i)]));
                    }
                }
            }
            VarKind::Full { rows, cols } => {
                for i in 0..rows {
                    for j in 0..cols {
                        out.push(m[(i, j)]);
                    }
                }
            }
            VarKind::Scalar => out.push(m[(0, 0)]),
        }
    }

    fn initial(&self) -> Mat {
        match self.kind {
            VarKind::Symmetric { n } => Mat::identity(n, n),
            VarKind::Full { rows, cols } => Mat::zeros(rows, cols),
            VarKind::Scalar => Mat::from_element(1, 1, 1.0),
        }
    }
}

/// One constraint `constant + Σ θ_k coeffs[k] ≺ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiBlock {
    pub name: String,
    #[serde(with = "serde_mat")]
    pub constant: Mat,
    #[serde(with = "serde_mat::vec")]
    pub coeffs: Vec<Mat>,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, x: &[f64]) -> Mat {
        let mut g = self.constant.clone();
        for (c, &v) in self.coeffs.iter().zip(x) {
            if v != 0.0 {
                g += c * v;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiProblem {
    pub schema_version: u32,
    pub vars: Vec<VarSpec>,
    pub blocks: Vec<LmiBlock>,
    /// Margin used for strict definiteness of variables (`P ⪰ εI`).
    pub epsilon: f64,
}

impl LmiProblem {
    /// Extracts the affine form of `f` by evaluating it at zero and at
    /// every basis direction. `f` must be affine in the unpacked variables.
    pub fn from_affine<F>(vars: Vec<VarSpec>, names: &[&str], epsilon: f64, f: F) -> Result<Self>
    where
        F: Fn(&[Mat]) -> Vec<Mat>,
    {
        let n_vars: usize = vars.iter().map(VarSpec::count).sum();
        let zero = vec![0.0; n_vars];
        let base = f(&unpack_with(&vars, &zero));
        if base.len() != names.len() {
            return Err(Error::Shape(format!(
                "{} block names for {} blocks",
                names.len(),
                base.len()
            )));
        }
        for (b, name) in base.iter().zip(names) {
            if !b.is_square() || matcore::max_abs(&(b - b.transpose())) > 1e-9 * matcore::max_abs(b).max(1.0) {
                return Err(Error::Input(format!("block '{name}' is not symmetric")));
            }
        }
        let mut coeffs: Vec<Vec<Mat>> = vec![Vec::with_capacity(n_vars); base.len()];
        let mut unit = zero;
        for k in 0..n_vars {
            unit[k] = 1.0;
            let at = f(&unpack_with(&vars, &unit));
            unit[k] = 0.0;
            for (b, (g, g0)) in at.iter().zip(&base).enumerate() {
                coeffs[b].push(matcore::symmetrize(&(g - g0)));
            }
        }
        let blocks = base
            .into_iter()
            .zip(coeffs)
            .zip(names)
            .map(|((constant, coeffs), name)| LmiBlock {
                name: name.to_string(),
                constant: matcore::symmetrize(&constant),
                coeffs,
            })
            .collect();
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            vars,
            blocks,
            epsilon,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.vars.iter().map(VarSpec::count).sum()
    }

    pub fn unpack(&self, x: &[f64]) -> Vec<Mat> {
        unpack_with(&self.vars, x)
    }

    pub fn pack(&self, mats: &[Mat]) -> Result<Vec<f64>> {
        if mats.len() != self.vars.len() {
            return Err(Error::Shape("one matrix per variable required".into()));
        }
        let mut out = Vec::with_capacity(self.n_vars());
        for (v, m) in self.vars.iter().zip(mats) {
            if m.shape() != v.shape() {
                return Err(Error::Shape(format!(
                    "variable '{}' must be {:?}, got {:?}",
                    v.name,
                    v.shape(),
                    m.shape()
                )));
            }
            v.from_matrix(m, &mut out);
        }
        Ok(out)
    }

    /// Symmetric variables at `I`, full matrices at `0`, scalars at `1`.
    pub fn initial_point(&self) -> Vec<f64> {
        let mats: Vec<Mat> = self.vars.iter().map(VarSpec::initial).collect();
        self.pack(&mats).expect("initial shapes match")
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    fn validate(&self) -> Result<()> {
        let k = self.n_vars();
        for b in &self.blocks {
            if !b.constant.is_square() {
                return Err(Error::Shape(format!("block '{}' is not square", b.name)));
            }
            if b.coeffs.len() != k {
                return Err(Error::Shape(format!(
                    "block '{}' has {} coefficients for {k} variables",
                    b.name,
                    b.coeffs.len()
                )));
            }
            if b.coeffs.iter().any(|c| c.shape() != b.constant.shape()) {
                return Err(Error::Shape(format!(
                    "block '{}' has mis-shaped coefficients",
                    b.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        if p.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported LMI schema version {}",
                p.schema_version
            )));
        }
        p.validate()?;
        Ok(p)
    }
}

fn unpack_with(vars: &[VarSpec], x: &[f64]) -> Vec<Mat> {
    let mut off = 0;
    vars.iter()
        .map(|v| {
            let n = v.count();
            let m = v.to_matrix(&x[off..off + n]);
            off += n;
            m
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiSolution {
    pub x: Vec<f64>,
    /// `−max_b λ_max(G_b(x))`.
    pub margin: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub min_margin: f64,
    pub max_iterations: usize,
    /// Radius of the bounding ball on the decision vector.
    pub radius: f64,
    /// Barrier weight growth per centering round.
    pub barrier_growth: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            min_margin: 1e-6,
            max_iterations: 2000,
            radius: 1e6,
            barrier_growth: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMargin {
    pub name: String,
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub blocks: Vec<BlockMargin>,
    pub margin: f64,
    pub min_margin: f64,
    pub pass: bool,
}

fn worst_eigenvalue(problem: &LmiProblem, x: &[f64]) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for b in &problem.blocks {
        worst = worst.max(matcore::lambda_max(&b.evaluate(x))?);
    }
    Ok(worst)
}

/// Recomputes every block's largest eigenvalue at the candidate.
pub fn verify(problem: &LmiProblem, candidate: &LmiSolution, min_margin: f64) -> Result<MarginReport> {
    problem.validate()?;
    if candidate.x.len() != problem.n_vars() {
        return Err(Error::Shape(format!(
            "candidate has {} entries, problem has {} unknowns",
            candidate.x.len(),
            problem.n_vars()
        )));
    }
    let mut blocks = Vec::with_capacity(problem.blocks.len());
    let mut worst = f64::NEG_INFINITY;
    for b in &problem.blocks {
        let lm = matcore::lambda_max(&b.evaluate(&candidate.x))?;
        worst = worst.max(lm);
        blocks.push(BlockMargin {
            name: b.name.clone(),
            max_eigenvalue: lm,
        });
    }
    let margin = -worst;
    Ok(MarginReport {
        blocks,
        margin,
        min_margin,
        pass: margin.is_finite() && margin >= min_margin,
    })
}

struct Barrier<'a> {
    problem: &'a LmiProblem,
    radius_sq: f64,
}

impl Barrier<'_> {
    /// Barrier value at `(x, t)`, or `None` outside the domain.
    fn value(&self, x: &[f64], t: f64) -> Option<f64> {
        let mut phi = 0.0;
        for b in &self.problem.blocks {
            let z = Mat::identity(b.dim(), b.dim()) * t - b.evaluate(x);
            let chol = Cholesky::new(z)?;
            phi -= 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        if !x.is_empty() {
            let slack = self.radius_sq - x.iter().map(|v| v * v).sum::<f64>();
            if slack <= 0.0 {
                return None;
            }
            phi -= slack.ln();
        }
        Some(phi)
    }

    /// Gradient and Hessian of the barrier over `(x, t)`; `t` is last.
    fn derivatives(&self, x: &[f64], t: f64) -> Option<(Vector, Mat)> {
        let k = x.len();
        let mut g = Vector::zeros(k + 1);
        let mut h = Mat::zeros(k + 1, k + 1);
        for b in &self.problem.blocks {
            let n = b.dim();
            let z = Mat::identity(n, n) * t - b.evaluate(x);
            let zinv = Cholesky::new(z)?.inverse();
            let m: Vec<Mat> = b.coeffs.iter().map(|a| &zinv * a).collect();
            let mz: Vec<Mat> = m.iter().map(|mk| mk * &zinv).collect();
            for i in 0..k {
                g[i] += m[i].trace();
                for j in i..k {
                    // tr(M_i M_j)
                    let v = m[i].component_mul(&m[j].transpose()).sum();
                    h[(i, j)] += v;
                    if i != j {
                        h[(j, i)] += v;
                    }
                }
                let v = -mz[i].trace();
                h[(i, k)] += v;
                h[(k, i)] += v;
            }
            g[k] -= zinv.trace();
            h[(k, k)] += zinv.component_mul(&zinv.transpose()).sum();
        }
        if k > 0 {
            let xs = Vector::from_column_slice(x);
            let slack = self.radius_sq - xs.norm_squared();
            if slack <= 0.0 {
                return None;
            }
            for i in 0..k {
                g[i] += 2.0 * x[i] / slack;
                h[(i, i)] += 2.0 / slack;
                for j in 0..k {
                    h[(i, j)] += 4.0 * x[i] * x[j] / (slack * slack);
                }
            }
        }
        Some((g, h))
    }
}

/// Solves the feasibility problem; never returns an uncertified point.
pub fn solve(problem: &LmiProblem, opts: &SolveOptions) -> Result<LmiSolution> {
    problem.validate()?;
    let k = problem.n_vars();
    let mut x = problem.initial_point();
    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let radius = opts.radius.max(10.0 * x_norm + 1.0);
    let barrier = Barrier {
        problem,
        radius_sq: radius * radius,
    };

    let mut worst = worst_eigenvalue(problem, &x)?;
    let mut best_margin = -worst;
    let mut iterations = 0;
    if -worst >= opts.min_margin {
        return Ok(LmiSolution {
            x,
            margin: -worst,
            iterations,
        });
    }

    let degree: f64 = problem.blocks.iter().map(|b| b.dim() as f64).sum::<f64>() + 1.0;
    let mut t = worst + 1.0;
    let mut tau = 1.0 / worst.abs().max(1.0);

    while iterations < opts.max_iterations {
        // one Newton step on tau*t + barrier
        let Some((mut g, h)) = barrier.derivatives(&x, t) else {
            break;
        };
        g[k] += tau;
        let step = match Cholesky::new(h.clone()) {
            Some(c) => c.solve(&(-&g)),
            None => {
                let reg = h.diagonal().amax().max(1.0) * 1e-10;
                match Cholesky::new(h + Mat::identity(k + 1, k + 1) * reg) {
                    Some(c) => c.solve(&(-&g)),
                    None => break,
                }
            }
        };
        let decrement = -g.dot(&step);
        iterations += 1;

        if decrement < 1e-10 {
            let gap = degree / tau;
            if gap < 1e-12 * worst.abs().max(1.0) {
                break;
            }
            tau *= opts.barrier_growth;
            continue;
        }

        let f0 = tau * t + barrier.value(&x, t).unwrap_or(f64::INFINITY);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
            let tn = t + alpha * step[k];
            if let Some(phi) = barrier.value(&xn, tn) {
                if tau * tn + phi <= f0 - 0.25 * alpha * decrement {
                    x = xn;
                    t = tn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            if decrement < 1e-6 {
                tau *= opts.barrier_growth;
                continue;
            }
            break;
        }

        worst = worst_eigenvalue(problem, &x)?;
        best_margin = best_margin.max(-worst);
        if -worst >= opts.min_margin {
            return Ok(LmiSolution {
                x,
                margin: -worst,
                iterations,
            });
        }
    }
    Err(Error::LmiInfeasible {
        best_margin,
        iterations,
    })
}

/// Variables of the observer LMI, unpacked.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Vars {
    pub p_e: Mat,
    pub q: Mat,
    pub w: Mat,
    pub eta: f64,
}

pub fn unpack_theorem1(problem: &LmiProblem, sol: &LmiSolution) -> Result<Theorem1Vars> {
    let names: Vec<&str> = problem.vars.iter().map(|v| v.name.as_str()).collect();
    if names != ["P_e", "Q", "W", "eta"] {
        return Err(Error::Schema(format!(
            "not an observer LMI: variables {names:?}"
        )));
    }
    let mats = problem.unpack(&sol.x);
    Ok(Theorem1Vars {
        p_e: mats[0].clone(),
        q: mats[1].clone(),
        w: mats[2].clone(),
        eta: mats[3][(0, 0)],
    })
}

/// Observer design LMI at the operating output `y_op`.
///
/// Blocks: `[Λ11 Λ12; * −ηI] ≺ 0`, `εI − P_e ≺ 0`, `ε − η < 0`, with
/// `Λ11 = sym(P_eΘ†H3P̃ + WH3P̃ − WΘΘ†H3P̃) − sym(QC̃) + 2μ_eP_e + ηγ_f²H1ᵀH1`
/// and `Λ12 = P_eΘ†H3M̃_E + WH3M̃_E − WΘΘ†H3M̃_E`.
pub fn assemble_theorem1(
    aug: &DescriptorAug,
    mu_e: f64,
    gamma_f: f64,
    y_op: &Vector,
    epsilon: f64,
) -> Result<LmiProblem> {
    if y_op.len() != aug.p {
        return Err(Error::Shape(format!(
            "operating output must have length {}, got {}",
            aug.p,
            y_op.len()
        )));
    }
    let n = aug.n();
    let p = aug.p;
    let rr = aug.rr;
    let ptilde = aug.ptilde(y_op);
    let theta_pinv = matcore::pinv(&aug.theta)?;
    let free_proj = &aug.h3 - &aug.theta * &theta_pinv * &aug.h3;
    let a_fixed = &theta_pinv * &aug.h3 * &ptilde;
    let a_free = &free_proj * &ptilde;
    let m_fixed = &theta_pinv * &aug.h3 * &aug.m_tilde_e;
    let m_free = &free_proj * &aug.m_tilde_e;
    let h1th1 = aug.h1.transpose() * &aug.h1;
    let ctilde = aug.ctilde.clone();
    let g2 = gamma_f * gamma_f;

    let vars = vec![
        VarSpec::new("P_e", VarKind::Symmetric { n }),
        VarSpec::new("Q", VarKind::Full { rows: n, cols: p }),
        VarSpec::new("W", VarKind::Full { rows: n, cols: n + p }),
        VarSpec::new("eta", VarKind::Scalar),
    ];
    LmiProblem::from_affine(vars, &["observer", "P_e_positive", "eta_positive"], epsilon, |v| {
        let (pe, q, w, eta) = (&v[0], &v[1], &v[2], v[3][(0, 0)]);
        let l11 = matcore::sym(&(pe * &a_fixed + w * &a_free))
            - matcore::sym(&(q * &ctilde))
            + pe * (2.0 * mu_e)
            + &h1th1 * (eta * g2);
        let l12 = pe * &m_fixed + w * &m_free;
        let mut big = Mat::zeros(n + rr, n + rr);
        big.view_mut((0, 0), (n, n)).copy_from(&l11);
        big.view_mut((0, n), (n, rr)).copy_from(&l12);
        big.view_mut((n, 0), (rr, n)).copy_from(&l12.transpose());
        big.view_mut((n, n), (rr, rr))
            .copy_from(&(-Mat::identity(rr, rr) * eta));
        vec![
            big,
            Mat::identity(n, n) * epsilon - pe,
            Mat::from_element(1, 1, epsilon - eta),
        ]
    })
}
