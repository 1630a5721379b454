//! Finite-dimensional graded Lie algebra: grading by an inner automorphism of
//! finite order, the compact real form, the Iwasawa splitting of the degree-zero
//! part and classification of elements.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Tolerances {
    /// Generic equality threshold.
    pub general: f64,
    /// Eigen-reconstruction residual below which an element counts as semisimple.
    pub semisimple: f64,
    /// Upper edge of the indeterminate band above `semisimple`.
    pub gray: f64,
    /// Eigenvector condition number bound for semisimplicity.
    pub condition: f64,
    /// Relative singular value threshold for rank decisions.
    pub rank: f64,
    /// Relative band around `rank` in which a rank decision is refused.
    pub rank_band: (f64, f64),
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            general: 1e-10,
            semisimple: 1e-8,
            gray: 1e-6,
            condition: 1e6,
            rank: 1e-9,
            rank_band: (1e-11, 1e-7),
        }
    }
}

/// A complex matrix Lie algebra `sl(n, C)` graded by `tau(X) = Q X Q^{-1}` with
/// `Q` diagonal unitary, together with the real form fixed by `sigma(X) = -X^†`.
#[derive(Clone, Debug)]
pub struct GradedLieAlgebra {
    n: usize,
    k: usize,
    omega: C64,
    q: Vec<C64>,
    grade: Vec<Vec<usize>>,
    blocks: Vec<Vec<usize>>,
    group_case: bool,
    pub tol: Tolerances,
}

/// Serializable description of an algebra.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AlgebraDescriptor {
    pub n: usize,
    pub k: usize,
    /// Diagonal of the conjugator as `[re, im]` pairs. A full `n*n` row-major
    /// list is also accepted if it is diagonal.
    pub q: Vec<[f64; 2]>,
    #[serde(default)]
    pub group_case: bool,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Zero,
    Semisimple,
    Nilpotent,
    Mixed,
    Indeterminate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Classification {
    pub kind: ElementKind,
    pub regular: bool,
    /// Eigen-reconstruction residual relative to the norm of the input.
    pub residual: f64,
    pub eigenvector_condition: f64,
    pub centralizer_dim: usize,
}

impl GradedLieAlgebra {
    /// Builds the algebra from the diagonal of `Q`.
    pub fn new(k: usize, q: Vec<C64>, tol: Tolerances) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain("order k must be at least 2".into()));
        }
        Self::build(k, q, tol, false)
    }

    fn build(k: usize, q: Vec<C64>, tol: Tolerances, group_case: bool) -> Result<Self> {
        let n = q.len();
        if n < 2 {
            return Err(Error::Domain("matrix size must be at least 2".into()));
        }
        for z in &q {
            if (z.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Domain("conjugator must be unitary".into()));
            }
        }
        let omega = C64::from_polar(1.0, 2.0 * PI / k as f64);
        let qk0 = q[0].powi(k as i32);
        if q.iter().any(|z| (z.powi(k as i32) - qk0).norm() > 1e-10) {
            return Err(Error::Domain("Q^k is not proportional to the identity".into()));
        }
        let mut grade = vec![vec![0usize; n]; n];
        for i in 0..n {
            for j in 0..n {
                let ratio = q[i] / q[j];
                let l = (ratio.arg() / (2.0 * PI / k as f64)).round() as i64;
                let l = l.rem_euclid(k as i64) as usize;
                if (ratio - omega.powi(l as i32)).norm() > 1e-10 {
                    return Err(Error::Domain("eigenvalue ratios of Q are not powers of omega".into()));
                }
                grade[i][j] = l;
            }
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            match blocks.iter_mut().find(|b| grade[b[0]][i] == 0) {
                Some(b) => b.push(i),
                None => blocks.push(vec![i]),
            }
        }
        Ok(GradedLieAlgebra {
            n,
            k,
            omega,
            q,
            grade,
            blocks,
            group_case,
            tol,
        })
    }

    /// `su(2)` with `Q = diag(1, -1)`.
    pub fn su2() -> Self {
        Self::new(2, vec![c(1.0, 0.0), c(-1.0, 0.0)], Tolerances::default()).unwrap()
    }

    /// `su(3)` with `Q = diag(1, w, w^2)`, `w = exp(2 pi i / 3)`: the cyclic
    /// grading whose degree `-1` part contains `E12 + E23 + E31`.
    pub fn su3_cyclic() -> Self {
        let w = C64::from_polar(1.0, 2.0 * PI / 3.0);
        Self::new(3, vec![c(1.0, 0.0), w, w * w], Tolerances::default()).unwrap()
    }

    /// `su(3)` with `Q = diag(1, 1, -1)`.
    pub fn su3_projective() -> Self {
        Self::new(2, vec![c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)], Tolerances::default()).unwrap()
    }

    /// The group case for maps into `SU(2)`. The swap automorphism on
    /// `SL(2) x SL(2)` is realized through projection to the second factor,
    /// which leaves the untwisted loop algebra of `sl(2)` with `Q = I`.
    pub fn group_case_su2() -> Self {
        Self::build(1, vec![c(1.0, 0.0), c(1.0, 0.0)], Tolerances::default(), true).unwrap()
    }

    pub fn from_descriptor(d: &AlgebraDescriptor) -> Result<Self> {
        let tol = d.tolerances.clone().unwrap_or_default();
        let q: Vec<C64> = if d.q.len() == d.n {
            d.q.iter().map(|p| c(p[0], p[1])).collect()
        } else if d.q.len() == d.n * d.n {
            let full: Vec<C64> = d.q.iter().map(|p| c(p[0], p[1])).collect();
            for i in 0..d.n {
                for j in 0..d.n {
                    if i != j && full[i * d.n + j].norm() > 1e-14 {
                        return Err(Error::Domain("only diagonal conjugators are supported".into()));
                    }
                }
            }
            (0..d.n).map(|i| full[i * d.n + i]).collect()
        } else {
            return Err(Error::Domain(format!("conjugator needs {} or {} entries, got {}", d.n, d.n * d.n, d.q.len())));
        };
        if d.group_case {
            if d.n != 2 || d.k != 1 && d.k != 2 {
                return Err(Error::Domain("group case is only provided for SU(2)".into()));
            }
            let mut g = Self::group_case_su2();
            g.tol = tol;
            return Ok(g);
        }
        Self::new(d.k, q, tol)
    }

    pub fn descriptor(&self) -> AlgebraDescriptor {
        AlgebraDescriptor {
            n: self.n,
            k: self.k,
            q: self.q.iter().map(|z| [z.re, z.im]).collect(),
            group_case: self.group_case,
            tolerances: Some(self.tol.clone()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn omega(&self) -> C64 {
        self.omega
    }

    pub fn is_group_case(&self) -> bool {
        self.group_case
    }

    pub fn conjugator(&self) -> CMat {
        linalg::diag(&self.q)
    }

    /// Blocks of indices on which `Q` is constant; the degree-zero part is
    /// block diagonal with respect to them.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Degree of the elementary matrix `E_ij`.
    pub fn entry_grade(&self, i: usize, j: usize) -> usize {
        self.grade[i][j]
    }

    pub fn grade_mod(&self, l: i64) -> usize {
        l.rem_euclid(self.k as i64) as usize
    }

    pub fn tau(&self, x: &CMat) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.q[i] * x[(i, j)] / self.q[j])
    }

    pub fn tau_inv(&self, x: &CMat) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.q[j] * x[(i, j)] / self.q[i])
    }

    /// Projection onto the `omega^l` eigenspace of `tau`.
    pub fn grade_project(&self, x: &CMat, l: i64) -> CMat {
        let l = self.grade_mod(l);
        let mut acc = linalg::zeros(self.n);
        let mut t = x.clone();
        for j in 0..self.k {
            acc += &t * self.omega.powi(-((l * j) as i32));
            t = self.tau(&t);
        }
        acc / c(self.k as f64, 0.0)
    }

    /// Distance of `x` from the degree `l` subspace.
    pub fn grade_residual(&self, x: &CMat, l: i64) -> f64 {
        linalg::fro(&(x - self.grade_project(x, l)))
    }

    pub fn sigma(&self, x: &CMat) -> CMat {
        -x.adjoint()
    }

    /// Cartan involution on the group, `g -> (g^†)^{-1}`.
    pub fn theta(&self, g: &CMat) -> Result<CMat> {
        linalg::inverse(&g.adjoint())
    }

    /// Mass of `x` outside the block-diagonal degree-zero pattern.
    pub fn off_block_mass(&self, x: &CMat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if self.grade[i][j] != 0 {
                    s += x[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    /// Position of `i` inside its block, used to define triangularity.
    fn block_position(&self, i: usize) -> (usize, usize) {
        for (b, blk) in self.blocks.iter().enumerate() {
            if let Some(p) = blk.iter().position(|&j| j == i) {
                return (b, p);
            }
        }
        unreachable!()
    }

    /// Relation of the entry `(i, j)` to the block triangular structure:
    /// `Some(Less)` strictly lower, `Some(Equal)` diagonal, `Some(Greater)`
    /// strictly upper, `None` off the block diagonal.
    pub fn entry_position(&self, i: usize, j: usize) -> Option<std::cmp::Ordering> {
        let (bi, pi) = self.block_position(i);
        let (bj, pj) = self.block_position(j);
        if bi != bj {
            None
        } else {
            Some(pj.cmp(&pi))
        }
    }

    /// Splits `x` in the degree-zero part into compact and solvable summands.
    pub fn iwasawa_algebra(&self, x: &CMat) -> Result<(CMat, CMat)> {
        let off = self.off_block_mass(x);
        if off > self.tol.general * linalg::fro(x).max(1.0) {
            return Err(Error::Domain(format!("element is not in the degree-zero part (off-block mass {off:.3e})")));
        }
        let (xk, xb) = self.split_zero(x);
        Ok((xk, xb))
    }

    /// Compact/solvable split of the block-diagonal part, ignoring the rest.
    pub fn split_zero(&self, x: &CMat) -> (CMat, CMat) {
        use std::cmp::Ordering::*;
        let n = self.n;
        let mut xk = linalg::zeros(n);
        for i in 0..n {
            for j in 0..n {
                match self.entry_position(i, j) {
                    Some(Less) => {
                        xk[(i, j)] += x[(i, j)];
                        xk[(j, i)] -= x[(i, j)].conj();
                    }
                    Some(Equal) => xk[(i, i)] = c(0.0, x[(i, i)].im),
                    _ => {}
                }
            }
        }
        let mut xb = linalg::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if self.entry_position(i, j).is_some() {
                    xb[(i, j)] = x[(i, j)] - xk[(i, j)];
                }
            }
        }
        (xk, xb)
    }

    /// Projection of a degree-zero element onto the solvable summand.
    pub fn project_b(&self, x: &CMat) -> CMat {
        self.split_zero(x).1
    }

    /// Distance of an algebra element from the solvable subalgebra.
    pub fn b_algebra_residual(&self, x: &CMat) -> f64 {
        use std::cmp::Ordering::*;
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                match self.entry_position(i, j) {
                    None | Some(Less) => s += x[(i, j)].norm_sqr(),
                    Some(Equal) => s += x[(i, i)].im * x[(i, i)].im,
                    Some(Greater) => {}
                }
            }
        }
        s.sqrt()
    }

    /// Distance of a group element from `B`: block upper triangular with
    /// positive real diagonal.
    pub fn b_group_residual(&self, g: &CMat) -> f64 {
        use std::cmp::Ordering::*;
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                match self.entry_position(i, j) {
                    None | Some(Less) => s += g[(i, j)].norm_sqr(),
                    Some(Equal) => {
                        let z = g[(i, i)];
                        s += z.im * z.im + if z.re < 0.0 { z.re * z.re } else { 0.0 };
                    }
                    Some(Greater) => {}
                }
            }
        }
        s.sqrt()
    }

    /// Factors `g` in the complexified degree-zero group as `k_K k_B`.
    pub fn iwasawa_group(&self, g: &CMat) -> Result<(CMat, CMat)> {
        let off = self.off_block_mass(g);
        if off > self.tol.general * linalg::fro(g).max(1.0) {
            return Err(Error::Domain(format!("element is not in the degree-zero group (off-block mass {off:.3e})")));
        }
        let n = self.n;
        let mut kk = linalg::zeros(n);
        let mut kb = linalg::zeros(n);
        for blk in &self.blocks {
            let m = blk.len();
            let sub = CMat::from_fn(m, m, |a, b| g[(blk[a], blk[b])]);
            let qr = sub.qr();
            let mut qm = qr.q();
            let mut rm = qr.r();
            for a in 0..m {
                let d = rm[(a, a)];
                if d.norm() < 1e-14 * linalg::fro(g).max(1e-300) {
                    return Err(Error::NotInvertible);
                }
                let ph = d / d.norm();
                for row in 0..m {
                    qm[(row, a)] *= ph;
                }
                for col in 0..m {
                    rm[(a, col)] /= ph;
                }
            }
            for a in 0..m {
                for b in 0..m {
                    kk[(blk[a], blk[b])] = qm[(a, b)];
                    kb[(blk[a], blk[b])] = rm[(a, b)];
                }
            }
        }
        Ok((kk, kb))
    }

    /// Orthonormal basis of `sl(n)`.
    pub fn basis(&self) -> Vec<CMat> {
        linalg::sl_basis(self.n)
    }

    /// Orthonormal basis of the degree `l` subspace.
    pub fn grade_basis(&self, l: i64) -> Vec<CMat> {
        let l = self.grade_mod(l);
        let projected: Vec<CMat> = self.basis().iter().map(|b| self.grade_project(b, l as i64)).collect();
        linalg::orthonormalize(&projected, 1e-9)
    }

    /// Real basis of the compact part of the degree-zero subspace.
    pub fn k_basis(&self) -> Vec<CMat> {
        let mut gens = Vec::new();
        for b in self.grade_basis(0) {
            gens.push(&b + self.sigma(&b));
            gens.push((&b - self.sigma(&b)) * linalg::I);
        }
        real_orthonormalize(&gens, 1e-9)
    }

    fn ad_matrix(&self, x: &CMat) -> CMat {
        let basis = self.basis();
        linalg::operator_matrix(&basis, |y| linalg::bracket(x, y))
    }

    /// Orthonormal basis of the centralizer of `x`, or of the centre of that
    /// centralizer when `center_only` is set.
    pub fn centralizer(&self, x: &CMat, center_only: bool) -> Result<Vec<CMat>> {
        let basis = self.basis();
        let m = self.ad_matrix(x);
        let (ker, sv) = linalg::kernel(&m, self.tol.rank);
        self.check_rank(&sv)?;
        let cent: Vec<CMat> = ker.iter().map(|v| linalg::from_coords(&basis, v)).collect();
        if !center_only || cent.is_empty() {
            return Ok(cent);
        }
        // y = sum a_i c_i commutes with every c_j.
        let d = cent.len();
        let nb = basis.len();
        let mut big = CMat::zeros(nb * d, d);
        for (i, ci) in cent.iter().enumerate() {
            for (j, cj) in cent.iter().enumerate() {
                let v = linalg::coords(&basis, &linalg::bracket(ci, cj));
                for r in 0..nb {
                    big[(j * nb + r, i)] = v[r];
                }
            }
        }
        // The basis is orthonormal, so commutators are measured against 1.
        let (ker2, sv2) = linalg::kernel_scaled(&big, 1.0, self.tol.rank);
        let info = linalg::rank_info_scaled(&sv2, 1.0, self.tol.rank, self.tol.rank_band);
        if !info.ambiguous.is_empty() {
            return Err(Error::RankAmbiguous {
                singular_values: info.singular_values,
            });
        }
        let centre: Vec<CMat> = ker2
            .iter()
            .map(|a| {
                let mut y = linalg::zeros(self.n);
                for (ai, ci) in a.iter().zip(&cent) {
                    y += ci * *ai;
                }
                y
            })
            .collect();
        Ok(linalg::orthonormalize(&centre, 1e-9))
    }

    fn check_rank(&self, sv: &[f64]) -> Result<()> {
        let info = linalg::rank_info(sv, self.tol.rank, self.tol.rank_band);
        if !info.ambiguous.is_empty() {
            return Err(Error::RankAmbiguous {
                singular_values: info.singular_values,
            });
        }
        Ok(())
    }

    /// Semisimple / nilpotent / mixed classification plus regularity.
    pub fn classify_element(&self, x: &CMat) -> Result<Classification> {
        let n = self.n;
        let scale = linalg::fro(x);
        if scale < 1e-14 {
            return Ok(Classification {
                kind: ElementKind::Zero,
                regular: false,
                residual: 0.0,
                eigenvector_condition: 1.0,
                centralizer_dim: n * n - 1,
            });
        }
        let cent = self.centralizer(x, false)?;
        let mut abelian = true;
        for a in &cent {
            for b in &cent {
                if linalg::fro(&linalg::bracket(a, b)) > self.tol.general.max(1e-9) {
                    abelian = false;
                }
            }
        }
        let regular = abelian;
        let mut pow = x.clone();
        for _ in 1..n {
            pow = &pow * x;
        }
        if linalg::fro(&pow) <= 1e-10 * scale.powi(n as i32) {
            return Ok(Classification {
                kind: ElementKind::Nilpotent,
                regular,
                residual: f64::INFINITY,
                eigenvector_condition: f64::INFINITY,
                centralizer_dim: cent.len(),
            });
        }
        let eig = linalg::eigenvalues(x)?;
        let mut clusters: Vec<C64> = Vec::new();
        for e in eig {
            if !clusters.iter().any(|m| (m - e).norm() < 1e-6 * scale) {
                clusters.push(e);
            }
        }
        let mut cols: Vec<DVector<C64>> = Vec::new();
        let mut vals: Vec<C64> = Vec::new();
        for mu in &clusters {
            let shifted = x - linalg::identity(n) * *mu;
            let (ker, _) = linalg::kernel(&shifted, 1e-9);
            for v in ker {
                cols.push(v);
                vals.push(*mu);
            }
        }
        if cols.len() != n {
            return Ok(Classification {
                kind: ElementKind::Mixed,
                regular,
                residual: f64::INFINITY,
                eigenvector_condition: f64::INFINITY,
                centralizer_dim: cent.len(),
            });
        }
        let v = CMat::from_columns(&cols);
        let cond = linalg::condition_number(&v);
        let residual = match linalg::inverse(&v) {
            Ok(vi) => linalg::fro(&(&v * linalg::diag(&vals) * vi - x)) / scale,
            Err(_) => f64::INFINITY,
        };
        let kind = if residual < self.tol.semisimple && cond < self.tol.condition {
            ElementKind::Semisimple
        } else if residual < self.tol.gray && cond < self.tol.condition * 1e4 {
            ElementKind::Indeterminate
        } else {
            ElementKind::Mixed
        };
        Ok(Classification {
            kind,
            regular,
            residual,
            eigenvector_condition: cond,
            centralizer_dim: cent.len(),
        })
    }
}

/// Gram-Schmidt with respect to the real inner product `Re tr(a^† b)`.
pub fn real_orthonormalize(list: &[CMat], tol: f64) -> Vec<CMat> {
    let mut out: Vec<CMat> = Vec::new();
    for m in list {
        let mut v = m.clone();
        for _ in 0..2 {
            for b in &out {
                let p: f64 = b.iter().zip(v.iter()).map(|(x, y)| (x.conj() * y).re).sum();
                v -= b * c(p, 0.0);
            }
        }
        let nrm = linalg::fro(&v);
        if nrm > tol {
            out.push(v / c(nrm, 0.0));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro, from_real_rows};

    fn e(n: usize, i: usize, j: usize) -> CMat {
        let mut m = linalg::zeros(n);
        m[(i, j)] = c(1.0, 0.0);
        m
    }

    #[test]
    fn su2_grading() {
        let g = GradedLieAlgebra::su2();
        let x = e(2, 0, 1);
        assert!(fro(&(g.grade_project(&x, 1) - &x)) < 1e-15);
        assert!(fro(&g.grade_project(&x, 0)) < 1e-15);
    }

    #[test]
    fn su3_cyclic_grading_of_e12() {
        let g = GradedLieAlgebra::su3_cyclic();
        let x = e(3, 0, 1);
        assert!(fro(&(g.grade_project(&x, 2) - &x)) < 1e-14);
        assert!(fro(&(g.grade_project(&x, -1) - &x)) < 1e-14);
        assert_eq!(g.entry_grade(0, 1), 2);
    }

    #[test]
    fn centre_of_abelian_centralizer_is_everything() {
        let g = GradedLieAlgebra::su3_cyclic();
        let a: CMat = g.grade_basis(-1).iter().fold(linalg::zeros(3), |acc, x| acc + x);
        assert_eq!(g.centralizer(&a, false).unwrap().len(), 2);
        assert_eq!(g.centralizer(&a, true).unwrap().len(), 2);
    }

    #[test]
    fn iwasawa_examples() {
        let g = GradedLieAlgebra::su2();
        let (kk, kb) = g.iwasawa_group(&from_real_rows(&[&[3.0, 0.0], &[0.0, 1.0 / 3.0]])).unwrap();
        assert!(fro(&(kk - linalg::identity(2))) < 1e-14);
        assert!((kb[(0, 0)].re - 3.0).abs() < 1e-14);
        let u = linalg::diag(&[C64::from_polar(1.0, 0.7), C64::from_polar(1.0, -0.7)]);
        let (kk, kb) = g.iwasawa_group(&u).unwrap();
        assert!(fro(&(kk - &u)) < 1e-14);
        assert!(fro(&(kb - linalg::identity(2))) < 1e-14);
        let x = linalg::diag(&[c(0.0, 2.0), c(0.0, -2.0)]);
        let (xk, xb) = g.iwasawa_algebra(&x).unwrap();
        assert!(fro(&(xk - &x)) < 1e-15 && fro(&xb) < 1e-15);
        let x = linalg::diag(&[c(2.0, 0.0), c(-2.0, 0.0)]);
        let (xk, xb) = g.iwasawa_algebra(&x).unwrap();
        assert!(fro(&xk) < 1e-15 && fro(&(xb - &x)) < 1e-15);
    }

    #[test]
    fn iwasawa_rejects_off_block() {
        let g = GradedLieAlgebra::su2();
        assert!(matches!(g.iwasawa_group(&from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]])), Err(Error::Domain(_))));
    }

    #[test]
    fn iwasawa_on_projective_block() {
        let g = GradedLieAlgebra::su3_projective();
        let x = CMat::from_fn(3, 3, |i, j| {
            if i < 2 && j < 2 {
                c(1.0 + i as f64 * 0.3, 0.2 * j as f64 - 0.1)
            } else if i == 2 && j == 2 {
                c(0.5, 0.5)
            } else {
                c(0.0, 0.0)
            }
        });
        let (kk, kb) = g.iwasawa_group(&x).unwrap();
        assert!(fro(&(&kk * &kb - &x)) < 1e-13);
        assert!(fro(&(&kk * kk.adjoint() - linalg::identity(3))) < 1e-13);
        assert!(g.b_group_residual(&kb) < 1e-14);
    }

    #[test]
    fn classification_examples() {
        let g = GradedLieAlgebra::su2();
        let a = from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let cl = g.classify_element(&a).unwrap();
        assert_eq!(cl.kind, ElementKind::Semisimple);
        assert!(cl.regular);
        let nil = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(g.classify_element(&nil).unwrap().kind, ElementKind::Nilpotent);
        let d = from_real_rows(&[&[0.4, 0.0], &[0.0, -0.4]]);
        let cl = g.classify_element(&d).unwrap();
        assert_eq!(cl.kind, ElementKind::Semisimple);
        assert!(cl.regular);
        let non_normal = from_real_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, -2.0]]);
        let g3 = GradedLieAlgebra::su3_cyclic();
        let jordan = from_real_rows(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, -2.0]]);
        assert_eq!(g3.classify_element(&jordan).unwrap().kind, ElementKind::Mixed);
        assert_eq!(g3.classify_element(&non_normal).unwrap().kind, ElementKind::Semisimple);
    }

    #[test]
    fn near_defective_is_not_silently_semisimple() {
        let g = GradedLieAlgebra::su2();
        let x = from_real_rows(&[&[1e-7, 1.0], &[0.0, -1e-7]]);
        let kind = g.classify_element(&x).unwrap().kind;
        assert_ne!(kind, ElementKind::Semisimple);
    }

    #[test]
    fn centralizer_examples() {
        let g = GradedLieAlgebra::su2();
        let h = from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let cz = g.centralizer(&h, true).unwrap();
        assert_eq!(cz.len(), 1);
        let a = from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let ca = g.centralizer(&a, false).unwrap();
        assert_eq!(ca.len(), 1);
        assert!(fro(&linalg::bracket(&ca[0], &a)) < 1e-14);
        let g3 = GradedLieAlgebra::su3_projective();
        let x = from_real_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, -2.0]]);
        assert_eq!(g3.centralizer(&x, false).unwrap().len(), 4);
        assert_eq!(g3.centralizer(&x, true).unwrap().len(), 1);
    }

    #[test]
    fn k_basis_dimension() {
        let g = GradedLieAlgebra::su3_projective();
        // s(u(2) x u(1)) has dimension 4.
        assert_eq!(g.k_basis().len(), 4);
        let g = GradedLieAlgebra::su3_cyclic();
        assert_eq!(g.k_basis().len(), 2);
    }

    #[test]
    fn rejects_bad_conjugator() {
        assert!(GradedLieAlgebra::new(3, vec![c(1.0, 0.0), c(-1.0, 0.0)], Tolerances::default()).is_err());
        assert!(GradedLieAlgebra::new(1, vec![c(1.0, 0.0), c(1.0, 0.0)], Tolerances::default()).is_err());
    }
}
