//! Dense complex matrix helpers shared by every other module.

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_rows(rows: &[&[C64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(n, m, |i, j| c(rows[i][j], 0.0))
}

pub fn diag(entries: &[C64]) -> CMat {
    CMat::from_diagonal(&DVector::from_column_slice(entries))
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn bracket(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Frobenius norm.
pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

pub fn expm(m: &CMat) -> CMat {
    m.clone().exp()
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    let scale = fro(m).max(1e-300);
    let inv = m.clone().try_inverse().ok_or(Error::NotInvertible)?;
    if !inv.iter().all(|z| z.is_finite()) || fro(&inv) * scale > 1e14 {
        return Err(Error::NotInvertible);
    }
    Ok(inv)
}

/// Conjugation `g x g^{-1}`.
pub fn ad(g: &CMat, x: &CMat) -> Result<CMat> {
    Ok(g * x * inverse(g)?)
}

/// Principal square root by the Denman-Beavers iteration.
pub fn sqrtm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = identity(n);
    for _ in 0..100 {
        let yi = inverse(&y)?;
        let zi = inverse(&z)?;
        let y_next = (&y + &zi) * c(0.5, 0.0);
        let z_next = (&z + &yi) * c(0.5, 0.0);
        let delta = fro(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * fro(&y).max(1.0) {
            return Ok(y);
        }
    }
    Err(Error::NonConvergence {
        what: "matrix square root".into(),
        history: vec![],
    })
}

/// Principal logarithm by inverse scaling and squaring.
pub fn logm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let id = identity(n);
    let mut x = a.clone();
    let mut squarings = 0;
    while fro(&(&x - &id)) > 0.25 {
        x = sqrtm(&x)?;
        squarings += 1;
        if squarings > 60 {
            return Err(Error::Domain("logarithm: no principal branch".into()));
        }
    }
    let y = &x - &id;
    let mut term = y.clone();
    let mut acc = zeros(n);
    for k in 1..=60 {
        let coef = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
        acc += &term * c(coef, 0.0);
        if fro(&term) < 1e-18 {
            break;
        }
        term = &term * &y;
    }
    Ok(acc * c(2f64.powi(squarings), 0.0))
}

/// Orthonormal basis of `sl(n)` with respect to the Frobenius inner product.
pub fn sl_basis(n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(n * n - 1);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let mut m = zeros(n);
                m[(i, j)] = c(1.0, 0.0);
                out.push(m);
            }
        }
    }
    for k in 1..n {
        // Gell-Mann style diagonal generators.
        let norm = ((k * (k + 1)) as f64).sqrt();
        let mut m = zeros(n);
        for i in 0..k {
            m[(i, i)] = c(1.0 / norm, 0.0);
        }
        m[(k, k)] = c(-(k as f64) / norm, 0.0);
        out.push(m);
    }
    out
}

pub fn coords(basis: &[CMat], x: &CMat) -> DVector<C64> {
    DVector::from_iterator(basis.len(), basis.iter().map(|b| b.iter().zip(x.iter()).map(|(p, q)| p.conj() * q).sum()))
}

pub fn from_coords(basis: &[CMat], v: &DVector<C64>) -> CMat {
    let n = basis[0].nrows();
    let mut m = zeros(n);
    for (b, z) in basis.iter().zip(v.iter()) {
        m += b * *z;
    }
    m
}

/// Matrix of a linear map on `span(basis)` in basis coordinates, assuming the
/// basis is orthonormal.
pub fn operator_matrix<F: Fn(&CMat) -> CMat>(basis: &[CMat], f: F) -> CMat {
    let d = basis.len();
    let mut m = CMat::zeros(d, d);
    for (j, b) in basis.iter().enumerate() {
        let col = coords(basis, &f(b));
        m.set_column(j, &col);
    }
    m
}

/// Result of a rank computation with the singular values that decided it.
#[derive(Clone, Debug)]
pub struct RankInfo {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Singular values that fell inside the ambiguity band.
    pub ambiguous: Vec<f64>,
}

/// Numerical rank with threshold `rel_tol * sigma_max` and an ambiguity band
/// `[band.0, band.1] * sigma_max`.
pub fn rank_info(singular_values: &[f64], rel_tol: f64, band: (f64, f64)) -> RankInfo {
    rank_info_scaled(singular_values, 0.0, rel_tol, band)
}

/// As [`rank_info`], measuring against `max(sigma_max, reference)` so that a
/// map whose image is pure rounding noise has rank zero.
pub fn rank_info_scaled(singular_values: &[f64], reference: f64, rel_tol: f64, band: (f64, f64)) -> RankInfo {
    let smax = singular_values.iter().cloned().fold(reference, f64::max);
    if smax == 0.0 {
        return RankInfo {
            rank: 0,
            singular_values: singular_values.to_vec(),
            ambiguous: vec![],
        };
    }
    let rank = singular_values.iter().filter(|&&s| s > rel_tol * smax).count();
    let ambiguous = singular_values.iter().cloned().filter(|&s| s >= band.0 * smax && s <= band.1 * smax).collect();
    RankInfo {
        rank,
        singular_values: singular_values.to_vec(),
        ambiguous,
    }
}

/// Orthonormal kernel basis of a complex matrix, plus all singular values.
pub fn kernel(m: &CMat, rel_tol: f64) -> (Vec<DVector<C64>>, Vec<f64>) {
    kernel_scaled(m, 0.0, rel_tol)
}

/// As [`kernel`], with the threshold measured against
/// `max(sigma_max, reference)`.
pub fn kernel_scaled(m: &CMat, reference: f64, rel_tol: f64) -> (Vec<DVector<C64>>, Vec<f64>) {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = CMat::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let smax = sv.iter().cloned().fold(reference, f64::max);
    let mut ker = Vec::new();
    for (i, s) in sv.iter().enumerate() {
        if smax == 0.0 || *s <= rel_tol * smax {
            ker.push(vt.row(i).adjoint());
        }
    }
    let sv_true: Vec<f64> = sv.into_iter().take(rows.min(cols)).collect();
    (ker, sv_true)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    SVD::new(m.clone(), false, false).singular_values.iter().cloned().collect()
}

pub fn real_singular_values(m: &RMat) -> Vec<f64> {
    SVD::new(m.clone(), false, false).singular_values.iter().cloned().collect()
}

/// 2-norm condition number.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = singular_values(m);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Gram-Schmidt on matrices, dropping near-dependent members.
pub fn orthonormalize(list: &[CMat], tol: f64) -> Vec<CMat> {
    let mut out: Vec<CMat> = Vec::new();
    for m in list {
        let mut v = m.clone();
        for _ in 0..2 {
            for b in &out {
                let p: C64 = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
                v -= b * p;
            }
        }
        let nrm = fro(&v);
        if nrm > tol {
            out.push(v / c(nrm, 0.0));
        }
    }
    out
}

/// Eigenvalues of a complex square matrix via the Schur form.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let ev = m.clone().eigenvalues().ok_or_else(|| Error::NonConvergence {
        what: "Schur decomposition".into(),
        history: vec![],
    })?;
    Ok(ev.iter().cloned().collect())
}

/// Real-linear map from a complex vector to its stacked real and imaginary parts.
pub fn realify(v: &[C64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * v.len());
    out.extend(v.iter().map(|z| z.re));
    out.extend(v.iter().map(|z| z.im));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sl_basis_is_orthonormal_and_traceless() {
        for n in 2..=4 {
            let b = sl_basis(n);
            assert_eq!(b.len(), n * n - 1);
            for (i, x) in b.iter().enumerate() {
                assert!(trace(x).norm() < 1e-15);
                for (j, y) in b.iter().enumerate() {
                    let ip: C64 = x.iter().zip(y.iter()).map(|(p, q)| p.conj() * q).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - want).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn log_inverts_exp() {
        let x = from_rows(&[&[c(0.3, 0.1), c(-0.7, 0.2)], &[c(0.4, 0.0), c(-0.3, -0.1)]]);
        let l = logm(&expm(&x)).unwrap();
        assert!(fro(&(l - x)) < 1e-12);
    }

    #[test]
    fn log_of_large_rotation() {
        let x = from_real_rows(&[&[0.0, 2.5], &[-2.5, 0.0]]);
        let l = logm(&expm(&x)).unwrap();
        assert!(fro(&(expm(&l) - expm(&x))) < 1e-12);
    }

    #[test]
    fn kernel_of_wide_matrix() {
        let m = from_real_rows(&[&[1.0, 0.0, 1.0]]);
        let (ker, sv) = kernel(&m, 1e-12);
        assert_eq!(ker.len(), 2);
        assert_eq!(sv.len(), 1);
        for v in ker {
            assert!((&m * v).norm() < 1e-14);
        }
    }

    #[test]
    fn rank_band() {
        let info = rank_info(&[1.0, 1e-3, 1e-9], 1e-9, (1e-11, 1e-7));
        assert_eq!(info.rank, 2);
        assert_eq!(info.ambiguous, vec![1e-9]);
    }
}
