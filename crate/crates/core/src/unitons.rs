//! Nilpotent seeds and finite uniton number in the 2x2 setting.
//!
//! For `sl(2)` the exponential has the closed form
//! `exp(X) = cosh(D) I + sinh(D)/D X` with `D^2 = -det X`, so `exp(z eta)` has
//! an essential singularity at `lambda = 0` exactly when `det eta` has a pole.
//! The classifier reads the verdict off the negative modes of `det eta` and
//! backs it with the observed band of `exp(+-z eta)` at a few points `z`.
//!
//! Maps into `SU(2)` itself are handled through the group case: loops into
//! `SU(2) x SU(2)` that commute with the swap are pairs `(k(-lambda), k(lambda))`
//! and only the second factor `k` is stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::ExtendedFraming;
use crate::lie::{ElementKind, GradedLieAlgebra};
use crate::linalg::{self, c, CMat, C64};
use crate::loops::{Ctx, Flavor, LoopContext, LoopElement};

/// Below this `|D|` the series for `cosh D` and `sinh D / D` is used.
pub const SERIES_RADIUS: f64 = 1e-4;

/// Points `z` at which the band of `exp(+-z eta)` is inspected.
pub const EVIDENCE_POINTS: [f64; 3] = [0.5, 1.0, 2.0];

/// Relative level below which a weighted band tail counts as collapsed.
const COLLAPSE_LEVEL: f64 = 1e-10;

fn check_2x2(m: &CMat) -> Result<()> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(Error::Mismatch(format!("expected a 2x2 matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

fn det2(m: &CMat) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// `exp(z m)` for traceless 2x2 `m`.
pub fn sl2_exp(m: &CMat, z: C64) -> Result<CMat> {
    check_2x2(m)?;
    let tr = linalg::trace(m);
    if tr.norm() > 1e-12 * linalg::fro(m).max(1.0) {
        return Err(Error::Domain(format!("matrix is not traceless (trace {tr:.3e})")));
    }
    let x = m * z;
    let w = -det2(&x);
    let (ch, shc) = if w.norm() < SERIES_RADIUS * SERIES_RADIUS {
        // cosh D = sum w^j / (2j)!, sinh D / D = sum w^j / (2j+1)!; w^3 terms are below 1e-24.
        (c(1.0, 0.0) + w / 2.0 + w * w / 24.0, c(1.0, 0.0) + w / 6.0 + w * w / 120.0)
    } else {
        let d = w.sqrt();
        (d.cosh(), d.sinh() / d)
    };
    Ok(linalg::identity(2) * ch + x * shc)
}

fn entry(x: &LoopElement, i: usize, j: usize) -> Vec<C64> {
    x.coeffs().iter().map(|m| m[(i, j)]).collect()
}

/// Scalar product of two series on modes `-nn..=nn`, returning modes `lo..=hi`.
fn scalar_convolve(a: &[C64], b: &[C64], nn: i64, lo: i64, hi: i64) -> Vec<C64> {
    let mut out = vec![c(0.0, 0.0); (hi - lo + 1) as usize];
    for (i, x) in a.iter().enumerate() {
        if *x == c(0.0, 0.0) {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            let p = i as i64 + j as i64 - 2 * nn;
            if p >= lo && p <= hi {
                out[(p - lo) as usize] += x * y;
            }
        }
    }
    out
}

/// Laurent coefficients of `det eta` on modes `-2..=N-1`, which are exact for
/// a loop of pole order at most one.
pub fn det_series(eta: &LoopElement) -> Result<Vec<(i64, C64)>> {
    check_seed(eta)?;
    let nn = eta.trunc();
    let hi = nn - 1;
    let ad = scalar_convolve(&entry(eta, 0, 0), &entry(eta, 1, 1), nn, -2, hi);
    let bc = scalar_convolve(&entry(eta, 0, 1), &entry(eta, 1, 0), nn, -2, hi);
    Ok((-2..=hi).zip(ad.iter().zip(&bc).map(|(p, q)| p - q)).collect())
}

fn check_seed(eta: &LoopElement) -> Result<()> {
    if eta.ctx().n() != 2 {
        return Err(Error::Mismatch("uniton classification needs a 2x2 realization".into()));
    }
    if eta.flavor() != Flavor::Algebra {
        return Err(Error::Mismatch("expected an algebra loop".into()));
    }
    let nn = eta.trunc();
    let below: f64 = (-nn..-1).map(|n| linalg::fro(eta.coeff_ref(n))).sum();
    if below > 0.0 {
        return Err(Error::Domain(format!("seed has a pole of order above one (mass {below:.3e})")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum UnitonVerdict {
    /// `uniton_bound` is the smallest `d` at which `lambda^d exp(+-z eta)`
    /// became holomorphic at every evidence point.
    Finite {
        uniton_bound: usize,
    },
    Infinite,
    Indeterminate,
}

/// Weighted norms `sum_{n < -d} |c_n| eps^n` of `exp(+-z eta)` for `d = 0..N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandEvidence {
    pub z: f64,
    pub tails: Vec<f64>,
    /// First `d` whose tail is below the collapse level.
    pub collapse: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnitonReport {
    pub verdict: UnitonVerdict,
    /// Coefficients of `lambda^{-2}` and `lambda^{-1}` in `det eta`.
    #[serde(with = "crate::io::c64_vec")]
    pub det_tail: Vec<C64>,
    pub det_tail_norm: f64,
    pub evidence: Vec<BandEvidence>,
    /// Whether the bands collapsed at `d <= 1` exactly when the determinant
    /// test says finite.
    pub evidence_agrees: bool,
}

fn weighted_tails(x: &LoopElement) -> (Vec<f64>, f64) {
    let nn = x.trunc();
    let eps = x.ctx().eps();
    let w: Vec<f64> = (-nn..=nn).map(|n| linalg::fro(x.coeff_ref(n)) * eps.powi(n as i32)).collect();
    let total: f64 = w.iter().sum();
    // tails[d] sums modes -nn..=-d-1, i.e. indices 0..nn-d.
    let tails = (0..nn as usize).map(|d| w[..nn as usize - d].iter().sum()).collect();
    (tails, total)
}

/// Band of `exp(z eta)` and `exp(-z eta)` on the circle of radius `eps`.
pub fn band_evidence(eta: &LoopElement, z: f64) -> Result<BandEvidence> {
    check_seed(eta)?;
    let ctx = eta.ctx();
    let eps = ctx.eps();
    let samples = eta.sample(eps);
    let mut tails: Vec<f64> = vec![0.0; eta.trunc() as usize];
    let mut level: f64 = 1.0;
    for s in [1.0, -1.0] {
        let vals: Result<Vec<CMat>> = samples.iter().map(|m| sl2_exp(m, c(s * z, 0.0))).collect();
        let x = LoopElement::from_samples(ctx, Flavor::Group, eps, &vals?)?;
        let (t, total) = weighted_tails(&x);
        level = level.max(total);
        for (a, b) in tails.iter_mut().zip(t) {
            *a = a.max(b);
        }
    }
    let collapse = tails.iter().position(|t| *t < COLLAPSE_LEVEL * level);
    Ok(BandEvidence { z, tails, collapse })
}

/// Finite uniton number test for a 2x2 seed of pole order at most one.
///
/// The verdict comes from `det eta`: finite iff its negative modes vanish. A
/// tail within a decade of `tol` either way is reported as indeterminate.
pub fn uniton_classify(eta: &LoopElement, tol: f64) -> Result<UnitonReport> {
    let det = det_series(eta)?;
    let det_tail: Vec<C64> = det.iter().filter(|(n, _)| *n < 0).map(|(_, v)| *v).collect();
    let det_tail_norm = det_tail.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let scale = eta.max_norm().powi(2).max(1.0);
    let evidence: Result<Vec<BandEvidence>> = EVIDENCE_POINTS.iter().map(|z| band_evidence(eta, *z)).collect();
    let evidence = evidence?;
    let collapsed_early = evidence.iter().all(|e| e.collapse.is_some_and(|d| d <= 1));
    let verdict = if det_tail_norm < 0.1 * tol * scale {
        let uniton_bound = evidence.iter().filter_map(|e| e.collapse).max().unwrap_or(1).min(1);
        UnitonVerdict::Finite { uniton_bound }
    } else if det_tail_norm > 10.0 * tol * scale {
        UnitonVerdict::Infinite
    } else {
        UnitonVerdict::Indeterminate
    };
    let evidence_agrees = match verdict {
        UnitonVerdict::Finite { .. } => collapsed_early,
        UnitonVerdict::Infinite => !collapsed_early,
        UnitonVerdict::Indeterminate => true,
    };
    Ok(UnitonReport {
        verdict,
        det_tail,
        det_tail_norm,
        evidence,
        evidence_agrees,
    })
}

/// `Ad gamma eta` with `gamma = diag(1, lambda^{-1})`: the upper right entry is
/// multiplied by `lambda`, the lower left by `lambda^{-1}`. Twisting is not
/// preserved, so the result is a plain matrix loop.
pub fn standard_realization(eta: &LoopElement) -> Result<LoopElement> {
    if eta.ctx().n() != 2 {
        return Err(Error::Mismatch("the standard realization is defined for 2x2 loops".into()));
    }
    let ctx = eta.ctx();
    let nn = eta.trunc();
    let mut out = LoopElement::zero(ctx, Flavor::Algebra);
    let mut lost = 0.0;
    for n in -nn..=nn {
        let m = eta.coeff_ref(n);
        for (i, j, shift) in [(0, 0, 0), (1, 1, 0), (0, 1, 1), (1, 0, -1)] {
            let v = m[(i, j)];
            let p = n + shift;
            if p.abs() <= nn {
                out.coeff_mut(p)[(i, j)] += v;
            } else {
                lost += v.norm();
            }
        }
    }
    out.add_discarded(lost + eta.discarded());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NilpotentForm {
    /// `[[0, 1], [0, 0]]`
    E,
    /// `[[0, 0], [1, 0]]`
    F,
}

impl NilpotentForm {
    pub fn matrix(self) -> CMat {
        match self {
            NilpotentForm::E => linalg::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]),
            NilpotentForm::F => linalg::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NilpotentNormalForm {
    pub form: NilpotentForm,
    #[serde(with = "crate::io::cmat")]
    pub conjugator: CMat,
    pub residual: f64,
}

/// Conjugates a nonzero nilpotent `x` in `g_{-1}` by an element of `K^C` onto
/// `e` or `f`.
///
/// With `x = v w^T` and `u` such that `x u = v`, the basis `(v, u)` carries `x`
/// to `e` and `(u, v)` carries it to `f`; both are rescaled to determinant one.
pub fn nilpotent_normal_form(alg: &GradedLieAlgebra, x: &CMat) -> Result<NilpotentNormalForm> {
    check_2x2(x)?;
    if alg.n() != 2 {
        return Err(Error::Mismatch("nilpotent normal form is defined for 2x2 algebras".into()));
    }
    let scale = linalg::fro(x);
    if scale < 1e-14 {
        return Err(Error::Domain("zero element has no normal form".into()));
    }
    let gr = alg.grade_residual(x, -1);
    if gr > alg.tol.general * scale {
        return Err(Error::Twist { residual: gr });
    }
    let cl = alg.classify_element(x)?;
    if cl.kind != ElementKind::Nilpotent {
        return Err(Error::Domain(format!("element is {:?}, not nilpotent", cl.kind)));
    }
    // Image vector: the larger column of x.
    let col = if x.column(0).norm() >= x.column(1).norm() { 0 } else { 1 };
    let v = x.column(col).into_owned();
    // x = v w^T with w_j = x[(i, j)] / v_i for the largest entry i of v.
    let i = if v[0].norm() >= v[1].norm() { 0 } else { 1 };
    let w = x.row(i).transpose() / v[i];
    let u = w.map(|t| t.conj()) / c(w.norm_squared(), 0.0);
    let (form, p) = if x[(0, 1)].norm() >= x[(1, 0)].norm() {
        (NilpotentForm::E, CMat::from_columns(&[v.clone(), u.clone()]))
    } else {
        (NilpotentForm::F, CMat::from_columns(&[u.clone(), v.clone()]))
    };
    let det = det2(&p);
    let p = p / det.sqrt();
    let conjugator = linalg::inverse(&p)?;
    let off = alg.off_block_mass(&conjugator);
    if off > alg.tol.general * linalg::fro(&conjugator) {
        return Err(Error::Domain(format!("conjugator leaves K^C (off-block mass {off:.3e})")));
    }
    let residual = linalg::fro(&(&conjugator * x * &p - form.matrix()));
    Ok(NilpotentNormalForm { form, conjugator, residual })
}

/// Loops into `SU(2) x SU(2)` commuting with the swap, stored through their
/// second factor.
#[derive(Clone, Debug)]
pub struct GroupCaseContext {
    ctx: Ctx,
}

impl GroupCaseContext {
    pub fn new(eps: f64, trunc: usize) -> Result<Self> {
        Ok(GroupCaseContext {
            ctx: LoopContext::new(GradedLieAlgebra::group_case_su2(), eps, trunc)?,
        })
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    fn check(&self, k: &LoopElement) -> Result<()> {
        if !k.algebra().is_group_case() || k.ctx().n() != 2 {
            return Err(Error::Mismatch("loop does not belong to the group case".into()));
        }
        Ok(())
    }

    /// `(k(-lambda), k(lambda))`.
    pub fn pair(&self, k: &LoopElement) -> Result<(LoopElement, LoopElement)> {
        self.check(k)?;
        let flipped = k.map_coeffs(|n, m| if n.rem_euclid(2) == 1 { -m } else { m.clone() });
        Ok((flipped, k.clone()))
    }

    /// Second factor of a pair, after checking that the first one is its
    /// reflection.
    pub fn from_pair(&self, pair: &(LoopElement, LoopElement), tol: f64) -> Result<LoopElement> {
        let (first, k) = pair;
        let (expected, _) = self.pair(k)?;
        let defect = first.distance(&expected)?;
        if defect > tol * k.max_norm().max(1.0) {
            return Err(Error::Twist { residual: defect });
        }
        Ok(k.clone())
    }
}

/// The map `phi = F(-1) F(1)^{-1}` into `SU(2)` on the grid of a group-case
/// framing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupMap {
    #[serde(with = "crate::io::cmat_vec")]
    pub values: Vec<CMat>,
    /// `max |phi^* phi - 1|` over the grid.
    pub unitarity: f64,
}

pub fn group_map_from_framing(framing: &ExtendedFraming) -> Result<GroupMap> {
    if !framing.ctx.algebra().is_group_case() {
        return Err(Error::Mismatch("framing is not in the group case".into()));
    }
    let id = linalg::identity(2);
    let mut values = Vec::with_capacity(framing.values.len());
    let mut unitarity: f64 = 0.0;
    for f in &framing.values {
        let minus = f.evaluate(c(-1.0, 0.0))?;
        let plus = f.evaluate(c(1.0, 0.0))?;
        let phi = minus * linalg::inverse(&plus)?;
        unitarity = unitarity.max(linalg::fro(&(linalg::dagger(&phi) * &phi - &id)));
        values.push(phi);
    }
    Ok(GroupMap { values, unitarity })
}

/// The extended solution `F_lambda F_1^{-1}` at each grid point.
pub fn extended_solution(framing: &ExtendedFraming) -> Result<Vec<LoopElement>> {
    if !framing.ctx.algebra().is_group_case() {
        return Err(Error::Mismatch("framing is not in the group case".into()));
    }
    framing
        .values
        .iter()
        .map(|f| {
            let base = linalg::inverse(&f.evaluate(c(1.0, 0.0))?)?;
            Ok(f.map_coeffs(|_, m| m * &base))
        })
        .collect()
}
