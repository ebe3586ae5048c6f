//! Dense real linear algebra used by every other module.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. The decompositions (SVD, real
//! Schur, symmetric eigen, LU) come from nalgebra; this module adds the
//! control-specific pieces on top: the Moore-Penrose inverse with a
//! relative cutoff, the general solution of `AXB = Y`, spectra sorted by
//! real part, and the shifted Lyapunov solve.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values below `PINV_RCOND * sigma_max` are treated as zero.
pub const PINV_RCOND: f64 = 1e-12;

/// Eigenvalues of a square matrix, sorted by descending real part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub max_real: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

pub fn ensure_finite(a: &Mat, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input(format!("{what} has non-finite entries")))
    }
}

fn ensure_square(a: &Mat, what: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// Largest absolute entry.
pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn singular_values(a: &Mat) -> Vector {
    if a.is_empty() {
        return Vector::zeros(0);
    }
    a.clone().svd(false, false).singular_values
}

/// Spectral norm (largest singular value).
pub fn norm2(a: &Mat) -> f64 {
    singular_values(a).iter().fold(0.0_f64, |m, v| m.max(*v))
}

pub fn rank(a: &Mat) -> usize {
    let sv = singular_values(a);
    let smax = sv.iter().fold(0.0_f64, |m, v| m.max(*v));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > PINV_RCOND * smax).count()
}

/// Moore-Penrose pseudoinverse via SVD.
pub fn pinv(a: &Mat) -> Result<Mat> {
    ensure_finite(a, "pinv input")?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Mat::zeros(n, m));
    }
    if m < n {
        return Ok(pinv(&a.transpose())?.transpose());
    }
    let (cols, v, sv) = jacobi_svd(a)?;
    let smax = sv.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let cutoff = PINV_RCOND * smax;
    let mut out = Mat::zeros(n, m);
    for (k, &s) in sv.iter().enumerate() {
        if s > cutoff {
            out += (v.column(k) * cols.column(k).transpose()) / (s * s);
        }
    }
    Ok(out)
}

/// One-sided Jacobi SVD of a tall matrix: returns `AV`, `V` and the column
/// norms of `AV`. Slower than bidiagonal QR but accurate to a few ulps of
/// each singular value, which the pseudoinverse needs on ill-conditioned input.
fn jacobi_svd(a: &Mat) -> Result<(Mat, Mat, Vec<f64>)> {
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = Mat::identity(n, n);
    // columns below this are numerically zero and never rotated
    let floor = (f64::EPSILON * a.norm()).powi(2);
    let tol = f64::EPSILON * n as f64;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if alpha <= floor || beta <= floor || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * x - s * y;
                        mat[(i, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            let sv = (0..n).map(|k| w.column(k).norm()).collect();
            return Ok((w, v, sv));
        }
    }
    Err(Error::NoConvergence)
}

/// General solution `X = A†YB† + S − A†ASBB†` of `AXB = Y`.
///
/// Fails with [`Error::InfeasibleEquation`] when `AA†YB†B ≠ Y`.
pub fn general_solution_axb(a: &Mat, b: &Mat, y: &Mat, s: &Mat) -> Result<Mat> {
    if a.nrows() != y.nrows() || b.ncols() != y.ncols() {
        return Err(Error::Shape(format!(
            "AXB=Y: A is {}x{}, B is {}x{}, Y is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    if s.shape() != (a.ncols(), b.nrows()) {
        return Err(Error::Shape(format!(
            "free matrix S must be {}x{}, got {}x{}",
            a.ncols(),
            b.nrows(),
            s.nrows(),
            s.ncols()
        )));
    }
    let ap = pinv(a)?;
    let bp = pinv(b)?;
    let projected = a * &ap * y * &bp * b;
    let residual = max_abs(&(projected - y));
    if residual > 1e-8 * max_abs(y).max(1.0) {
        return Err(Error::InfeasibleEquation { residual });
    }
    Ok(&ap * y * &bp + s - &ap * a * s * b * &bp)
}

/// Eigenvalues via real Schur form; conjugate pairs are adjacent.
pub fn spectrum(a: &Mat) -> Result<Spectrum> {
    ensure_square(a, "spectrum input")?;
    ensure_finite(a, "spectrum input")?;
    if a.nrows() == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            max_real: f64::NEG_INFINITY,
        });
    }
    // the QR iteration occasionally stalls at machine precision; a looser
    // deflation tolerance costs nothing measurable on the eigenvalues
    let schur = [1.0, 8.0, 64.0]
        .iter()
        .find_map(|k| a.clone().try_schur(k * f64::EPSILON, 100_000))
        .ok_or(Error::NoConvergence)?;
    let mut eigenvalues: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    eigenvalues.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    let max_real = eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |m, z| m.max(z.re));
    Ok(Spectrum {
        eigenvalues,
        max_real,
    })
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn symmetric_eigenvalues(a: &Mat) -> Result<Vec<f64>> {
    ensure_square(a, "symmetric eigen input")?;
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let sym = symmetrize(a);
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn lambda_min(a: &Mat) -> Result<f64> {
    Ok(symmetric_eigenvalues(a)?
        .first()
        .copied()
        .unwrap_or(f64::INFINITY))
}

pub fn lambda_max(a: &Mat) -> Result<f64> {
    Ok(symmetric_eigenvalues(a)?
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY))
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// `sym(A) = A + Aᵀ`.
pub fn sym(a: &Mat) -> Mat {
    a + a.transpose()
}

/// Solves `(A+μI)ᵀP + P(A+μI) = −I` by Kronecker vectorization.
///
/// The result satisfies `AᵀP + PA + 2μP = −I ⪯ 0` and is positive definite
/// whenever every eigenvalue of `A` has real part below `−μ`.
pub fn solve_lyapunov(a: &Mat, mu: f64) -> Result<Mat> {
    ensure_square(a, "Lyapunov input")?;
    ensure_finite(a, "Lyapunov input")?;
    let n = a.nrows();
    let spec = spectrum(a)?;
    if n > 0 && spec.max_real >= -mu {
        return Err(Error::DecayRateUnachievable {
            max_real: spec.max_real,
            mu,
        });
    }
    let shifted = a + Mat::identity(n, n) * mu;
    let eye = Mat::identity(n, n);
    let st = shifted.transpose();
    let op = eye.kronecker(&st) + st.kronecker(&eye);
    let rhs = -Vector::from_column_slice(Mat::identity(n, n).as_slice());
    let sol = op.lu().solve(&rhs).ok_or(Error::DecayRateUnachievable {
        max_real: spec.max_real,
        mu,
    })?;
    let p = Mat::from_column_slice(n, n, sol.as_slice());
    Ok(symmetrize(&p))
}

pub fn block_diag(blocks: &[Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Stacks blocks vertically; all must share a column count.
pub fn vstack(blocks: &[&Mat]) -> Result<Mat> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    if blocks.iter().any(|b| b.ncols() != cols) {
        return Err(Error::Shape("vstack: column counts differ".into()));
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(*b);
        r += b.nrows();
    }
    Ok(out)
}

/// Stacks blocks horizontally; all must share a row count.
pub fn hstack(blocks: &[&Mat]) -> Result<Mat> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    if blocks.iter().any(|b| b.nrows() != rows) {
        return Err(Error::Shape("hstack: row counts differ".into()));
    }
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), b.shape()).copy_from(*b);
        c += b.ncols();
    }
    Ok(out)
}

/// Copy of the rectangular window starting at `(r, c)`.
pub fn slice(a: &Mat, r: usize, c: usize, rows: usize, cols: usize) -> Mat {
    a.view((r, c), (rows, cols)).into_owned()
}

/// Row-major nested-array row construction, mostly for fixtures.
pub fn from_rows(rows: &[&[f64]]) -> Mat {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(nr, nc, |i, j| rows[i][j])
}

/// Serde adapter storing a matrix as row-major nested arrays.
pub mod serde_mat {
    use super::Mat;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_nested(rows: &[Vec<f64>], cols_hint: usize) -> Result<Mat, String> {
        let nc = rows.first().map_or(cols_hint, |r| r.len());
        if rows.iter().any(|r| r.len() != nc) {
            return Err("ragged matrix rows".into());
        }
        Ok(Mat::from_fn(rows.len(), nc, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_nested(&rows, 0).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[Mat], s: S) -> Result<S::Ok, S::Error> {
            let rows: Vec<Vec<Vec<f64>>> = ms.iter().map(to_rows).collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mat>, D::Error> {
            let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
            all.iter()
                .map(|r| from_nested(r, 0).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}
