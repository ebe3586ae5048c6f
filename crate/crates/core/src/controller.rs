//! Parametric pole placement for fully actuated blocks and the
//! compensating control law `u = −B⁻¹(Kx̂ + f(x̂) + D1(y)d̂)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, serde_mat, Mat, Vector};
use crate::model::{check_actuation, FasModel, FasSignature};

/// Relative threshold on `|det V| / Π‖row‖` below which `V` counts as singular.
const DET_V_RTOL: f64 = 1e-10;

/// Design data for one block of order `m` and width `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDesign {
    pub order: usize,
    pub width: usize,
    #[serde(with = "serde_mat")]
    pub f: Mat,
    #[serde(with = "serde_mat")]
    pub z: Mat,
    #[serde(with = "serde_mat")]
    pub v: Mat,
    /// `A_{0∼m−1}`, `r × mr`.
    #[serde(with = "serde_mat")]
    pub coeffs: Mat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerDesign {
    /// Block-diagonal gain, `rr × s`.
    #[serde(with = "serde_mat")]
    pub k: Mat,
    pub blocks: Vec<BlockDesign>,
}

/// `V = [Z; ZF; …; ZF^{m−1}]`.
pub fn build_v(z: &Mat, f: &Mat, m: usize) -> Mat {
    let (r, n) = z.shape();
    let mut v = Mat::zeros(r * m, n);
    let mut zf = z.clone();
    for i in 0..m {
        v.view_mut((i * r, 0), (r, n)).copy_from(&zf);
        zf = &zf * f;
    }
    v
}

/// Coefficients `A_{0∼m−1} = −ZF^mV⁻¹` for which the block companion
/// matrix `Φ(A)` is similar to `F` through `V`.
pub fn place_block(z: &Mat, f: &Mat, m: usize) -> Result<Mat> {
    if m == 0 {
        return Err(Error::Input("block order must be at least 1".into()));
    }
    let r = z.nrows();
    let n = m * r;
    if r == 0 || z.ncols() != n || f.shape() != (n, n) {
        return Err(Error::Shape(format!(
            "order {m}: Z must be r x {n} and F {n}x{n}, got Z {:?} and F {:?}",
            z.shape(),
            f.shape()
        )));
    }
    matcore::ensure_finite(z, "Z")?;
    matcore::ensure_finite(f, "F")?;
    let v = build_v(z, f, m);
    let det = v.determinant();
    let scale: f64 = v.row_iter().map(|row| row.norm()).product();
    if !(scale > 0.0) || !(det.abs() > DET_V_RTOL * scale) {
        return Err(Error::ParameterChoice { det: det.abs() });
    }
    let v_inv = v.clone().try_inverse().ok_or(Error::ParameterChoice { det: det.abs() })?;
    let zfm = z * f.pow(m as u32);
    Ok(-zfm * v_inv)
}

/// Block companion matrix with identity super-diagonal and last block
/// row `−A_{0∼m−1}`.
pub fn companion(coeffs: &Mat, m: usize) -> Mat {
    let r = coeffs.nrows();
    let n = m * r;
    let mut phi = Mat::zeros(n, n);
    for i in 0..m.saturating_sub(1) {
        phi.view_mut((i * r, (i + 1) * r), (r, r))
            .copy_from(&Mat::identity(r, r));
    }
    phi.view_mut(((m - 1) * r, 0), (r, n)).copy_from(&(-coeffs));
    phi
}

/// Real block-diagonal matrix with the given spectrum: `1×1` blocks for real
/// poles and `[[a, b], [−b, a]]` for each pair `a ± bi`.
pub fn poles_to_f(poles: &[Complex64]) -> Result<Mat> {
    let tol = |z: Complex64| 1e-12 * z.norm().max(1.0);
    let mut used = vec![false; poles.len()];
    let mut blocks = Vec::new();
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        let p = poles[i];
        if !(p.re.is_finite() && p.im.is_finite()) {
            return Err(Error::Input(format!("pole {p} is not finite")));
        }
        used[i] = true;
        if p.im.abs() <= tol(p) {
            blocks.push(Mat::from_element(1, 1, p.re));
            continue;
        }
        let partner = (i + 1..poles.len()).find(|&j| !used[j] && (poles[j] - p.conj()).norm() <= tol(p));
        let Some(j) = partner else {
            return Err(Error::Input(format!("complex pole {p} has no conjugate partner")));
        };
        used[j] = true;
        let (a, b) = (p.re, p.im.abs());
        blocks.push(matcore::from_rows(&[&[a, b], &[-b, a]]));
    }
    Ok(matcore::block_diag(&blocks))
}

/// Default free parameter `[I_r … I_r]`; the all-ones row when `r = 1`.
pub fn default_z(order: usize, width: usize) -> Mat {
    let mut z = Mat::zeros(width, order * width);
    for i in 0..order {
        z.view_mut((0, i * width), (width, width))
            .copy_from(&Mat::identity(width, width));
    }
    z
}

/// Designs every block and assembles `K = blockdiag(A^i_{0∼m_i−1})`.
///
/// `zs` defaults to [`default_z`] per block.
pub fn design_controller(sig: &FasSignature, fs: &[Mat], zs: Option<&[Mat]>) -> Result<ControllerDesign> {
    if fs.len() != sig.xi() {
        return Err(Error::Input(format!(
            "need one F per block ({}), got {}",
            sig.xi(),
            fs.len()
        )));
    }
    if let Some(z) = zs {
        if z.len() != sig.xi() {
            return Err(Error::Input(format!(
                "need one Z per block ({}), got {}",
                sig.xi(),
                z.len()
            )));
        }
    }
    let mut blocks = Vec::with_capacity(sig.xi());
    for (i, f) in fs.iter().enumerate() {
        let (m, r) = (sig.orders()[i], sig.widths()[i]);
        if f.shape() != (m * r, m * r) {
            return Err(Error::Input(format!(
                "block {i} of order {m} and width {r} needs {} poles, got {}",
                m * r,
                f.nrows()
            )));
        }
        let z = zs.map_or_else(|| default_z(m, r), |z| z[i].clone());
        let coeffs = place_block(&z, f, m)?;
        let v = build_v(&z, f, m);
        blocks.push(BlockDesign {
            order: m,
            width: r,
            f: f.clone(),
            z,
            v,
            coeffs,
        });
    }
    let k = matcore::block_diag(&blocks.iter().map(|b| b.coeffs.clone()).collect::<Vec<_>>());
    Ok(ControllerDesign { k, blocks })
}

/// Pole lists per block turned into `F` matrices, then [`design_controller`].
pub fn design_from_poles(sig: &FasSignature, poles: &[Vec<Complex64>], zs: Option<&[Mat]>) -> Result<ControllerDesign> {
    let fs = poles.iter().map(|p| poles_to_f(p)).collect::<Result<Vec<_>>>()?;
    design_controller(sig, &fs, zs)
}

/// Evaluates the control input from the current estimates.
///
/// With `compensation` off, the `D1(y)d̂` term is dropped.
#[allow(clippy::too_many_arguments)]
pub fn control_law(
    design: &ControllerDesign,
    model: &FasModel,
    x_hat: &Vector,
    d_hat: &Vector,
    y: &Vector,
    zeta: &[f64],
    t: f64,
    compensation: bool,
) -> Result<Vector> {
    if x_hat.len() != model.s() || d_hat.len() != model.q() || y.len() != model.p() {
        return Err(Error::Shape(format!(
            "control law needs x_hat[{}], d_hat[{}], y[{}]",
            model.s(),
            model.q(),
            model.p()
        )));
    }
    let b = model.dynamics.input_matrix(y, zeta, t);
    check_actuation(&b)?;
    let mut rhs = &design.k * x_hat + model.dynamics.drift(x_hat, zeta, t);
    if compensation {
        rhs += model.dynamics.fault_matrix(y) * d_hat;
    }
    let u = b
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Actuation("input matrix is singular".into()))?;
    Ok(-u)
}
