//! Truncated matrix Laurent series with twist and reality bookkeeping.
//!
//! A loop is stored as coefficients `c_n`, `|n| <= N`, of `sum c_n lambda^n`.
//! Pointwise operations sample on a circle, apply the matrix function and refit
//! by FFT; the radius is chosen per operation because sampling on a small
//! circle amplifies round-off in the positive modes by `radius^{-n}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::GradedLieAlgebra;
use crate::linalg::{self, c, CMat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Algebra,
    Group,
}

/// Shared parameters for loops: the graded algebra, the circle radius `eps`,
/// the truncation order and the FFT grid.
pub struct LoopContext {
    algebra: Arc<GradedLieAlgebra>,
    eps: f64,
    trunc: usize,
    samples: usize,
    pub tol: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for LoopContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoopContext")
            .field("n", &self.algebra.n())
            .field("k", &self.algebra.k())
            .field("eps", &self.eps)
            .field("trunc", &self.trunc)
            .field("samples", &self.samples)
            .finish()
    }
}

pub type Ctx = Arc<LoopContext>;

pub const DEFAULT_EPS: f64 = 0.5;
pub const DEFAULT_TRUNC: usize = 24;

impl LoopContext {
    pub fn new(algebra: GradedLieAlgebra, eps: f64, trunc: usize) -> Result<Ctx> {
        Self::with_algebra(Arc::new(algebra), eps, trunc)
    }

    pub fn with_algebra(algebra: Arc<GradedLieAlgebra>, eps: f64, trunc: usize) -> Result<Ctx> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")));
        }
        if trunc < algebra.k().max(2) {
            return Err(Error::Domain("truncation order must be at least k".into()));
        }
        let samples = (4 * trunc).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(samples);
        let inv = planner.plan_fft_inverse(samples);
        let tol = algebra.tol.general;
        Ok(Arc::new(LoopContext {
            algebra,
            eps,
            trunc,
            samples,
            tol,
            fwd,
            inv,
        }))
    }

    pub fn default_for(algebra: GradedLieAlgebra) -> Ctx {
        Self::new(algebra, DEFAULT_EPS, DEFAULT_TRUNC).expect("default parameters are valid")
    }

    /// Same algebra and truncation with another radius.
    pub fn with_eps(&self, eps: f64) -> Result<Ctx> {
        Self::with_algebra(self.algebra.clone(), eps, self.trunc)
    }

    pub fn algebra(&self) -> &GradedLieAlgebra {
        &self.algebra
    }

    pub fn algebra_arc(&self) -> Arc<GradedLieAlgebra> {
        self.algebra.clone()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn n(&self) -> usize {
        self.algebra.n()
    }

    /// Sample points `radius * exp(2 pi i j / M)`.
    pub fn sample_points(&self, radius: f64) -> Vec<C64> {
        (0..self.samples)
            .map(|j| C64::from_polar(radius, 2.0 * PI * j as f64 / self.samples as f64))
            .collect()
    }
}

/// Coefficient convolution restricted to output modes `lo..=hi`. Inputs are
/// given as coefficient slices starting at modes `a_lo` and `b_lo`. Returns the
/// product and an upper bound for the mass of dropped modes.
pub fn convolve(a: &[CMat], a_lo: i64, b: &[CMat], b_lo: i64, lo: i64, hi: i64) -> (Vec<CMat>, f64) {
    let n = a.first().or(b.first()).map_or(0, |m| m.nrows());
    let mut out = vec![linalg::zeros(n); (hi - lo + 1).max(0) as usize];
    let an: Vec<f64> = a.iter().map(linalg::fro).collect();
    let bn: Vec<f64> = b.iter().map(linalg::fro).collect();
    let mut dropped = 0.0;
    for (i, ai) in a.iter().enumerate() {
        if an[i] == 0.0 {
            continue;
        }
        let mi = a_lo + i as i64;
        for (j, bj) in b.iter().enumerate() {
            if bn[j] == 0.0 {
                continue;
            }
            let m = mi + b_lo + j as i64;
            if m < lo || m > hi {
                dropped += an[i] * bn[j];
                continue;
            }
            out[(m - lo) as usize] += ai * bj;
        }
    }
    (out, dropped)
}

/// Symmetry diagnostics of a loop.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub twist_residual: f64,
    pub reality_residual: f64,
    pub e_residual: f64,
    pub i_residual: f64,
    pub b_residual: f64,
    /// Norms of the coefficients at modes `-N` and `N`.
    pub edge_norms: (f64, f64),
    pub discarded_mass: f64,
}

#[derive(Clone)]
pub struct LoopElement {
    ctx: Ctx,
    flavor: Flavor,
    coeffs: Vec<CMat>,
    discarded: f64,
}

impl fmt::Debug for LoopElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.support().unwrap_or((0, 0));
        write!(f, "LoopElement({:?}, modes {}..={}, ctx {:?})", self.flavor, lo, hi, self.ctx)
    }
}

impl LoopElement {
    pub fn zero(ctx: &Ctx, flavor: Flavor) -> Self {
        let n = ctx.n();
        LoopElement {
            ctx: ctx.clone(),
            flavor,
            coeffs: vec![linalg::zeros(n); 2 * ctx.trunc + 1],
            discarded: 0.0,
        }
    }

    pub fn identity(ctx: &Ctx) -> Self {
        Self::constant(ctx, Flavor::Group, linalg::identity(ctx.n()))
    }

    pub fn constant(ctx: &Ctx, flavor: Flavor, m: CMat) -> Self {
        let mut x = Self::zero(ctx, flavor);
        x.coeffs[ctx.trunc] = m;
        x
    }

    /// Loop with the given `(mode, coefficient)` terms; repeated modes add up.
    pub fn from_terms(ctx: &Ctx, flavor: Flavor, terms: &[(i64, CMat)]) -> Result<Self> {
        let mut x = Self::zero(ctx, flavor);
        for (n, m) in terms {
            if n.unsigned_abs() as usize > ctx.trunc {
                return Err(Error::Domain(format!("mode {n} exceeds truncation {}", ctx.trunc)));
            }
            if m.nrows() != ctx.n() || m.ncols() != ctx.n() {
                return Err(Error::Mismatch("coefficient has wrong size".into()));
            }
            *x.coeff_mut(*n) += m;
        }
        Ok(x)
    }

    /// Loop from coefficients of modes `lo..lo+len`, silently dropping modes
    /// outside the truncation but recording their mass.
    pub fn from_slice(ctx: &Ctx, flavor: Flavor, lo: i64, coeffs: &[CMat]) -> Self {
        let mut x = Self::zero(ctx, flavor);
        let nn = ctx.trunc as i64;
        for (i, m) in coeffs.iter().enumerate() {
            let mode = lo + i as i64;
            if mode.abs() <= nn {
                x.coeffs[(mode + nn) as usize] = m.clone();
            } else {
                x.discarded += linalg::fro(m);
            }
        }
        x
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn algebra(&self) -> &GradedLieAlgebra {
        self.ctx.algebra()
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    pub fn trunc(&self) -> i64 {
        self.ctx.trunc as i64
    }

    pub fn discarded(&self) -> f64 {
        self.discarded
    }

    pub fn add_discarded(&mut self, mass: f64) {
        self.discarded += mass;
    }

    /// Coefficient of `lambda^n`; zero outside the truncation.
    pub fn coeff(&self, n: i64) -> CMat {
        let nn = self.trunc();
        if n.abs() > nn {
            linalg::zeros(self.ctx.n())
        } else {
            self.coeffs[(n + nn) as usize].clone()
        }
    }

    pub fn coeff_ref(&self, n: i64) -> &CMat {
        &self.coeffs[(n + self.trunc()) as usize]
    }

    pub fn coeff_mut(&mut self, n: i64) -> &mut CMat {
        let nn = self.trunc();
        &mut self.coeffs[(n + nn) as usize]
    }

    /// All coefficients from mode `-N` upwards.
    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }

    /// Coefficients of modes `lo..=hi` (clamped to the truncation).
    pub fn band(&self, lo: i64, hi: i64) -> Vec<CMat> {
        (lo..=hi).map(|n| self.coeff(n)).collect()
    }

    fn check_same(&self, other: &LoopElement) -> Result<()> {
        if self.ctx.trunc != other.ctx.trunc || self.ctx.n() != other.ctx.n() {
            return Err(Error::Mismatch("loops live in different contexts".into()));
        }
        Ok(())
    }

    /// Lowest and highest modes with non-zero coefficients.
    pub fn support(&self) -> Option<(i64, i64)> {
        let nn = self.trunc();
        let nz: Vec<i64> = (-nn..=nn).filter(|&n| linalg::fro(self.coeff_ref(n)) > 0.0).collect();
        Some((*nz.first()?, *nz.last()?))
    }

    pub fn evaluate(&self, lambda: C64) -> Result<CMat> {
        let nn = self.trunc();
        if lambda == C64::new(0.0, 0.0) {
            for n in -nn..0 {
                if linalg::fro(self.coeff_ref(n)) > 0.0 {
                    return Err(Error::Pole { order: -n as i32 });
                }
            }
            return Ok(self.coeff(0));
        }
        Ok(self.evaluate_unchecked(lambda))
    }

    fn evaluate_unchecked(&self, lambda: C64) -> CMat {
        let nn = self.trunc();
        let mut acc = linalg::zeros(self.ctx.n());
        for n in -nn..=nn {
            let m = self.coeff_ref(n);
            if linalg::fro(m) > 0.0 {
                acc += m * lambda.powi(n as i32);
            }
        }
        acc
    }

    /// Values on the FFT grid of the circle of the given radius.
    pub fn sample(&self, radius: f64) -> Vec<CMat> {
        let ctx = &self.ctx;
        let m = ctx.samples;
        let n = ctx.n();
        let nn = self.trunc();
        let mut out = vec![linalg::zeros(n); m];
        let mut buf = vec![C64::new(0.0, 0.0); m];
        for a in 0..n {
            for b in 0..n {
                buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                for k in -nn..=nn {
                    let v = self.coeff_ref(k)[(a, b)];
                    if v != C64::new(0.0, 0.0) {
                        buf[k.rem_euclid(m as i64) as usize] += v * radius.powi(k as i32);
                    }
                }
                ctx.inv.process(&mut buf);
                for (j, z) in buf.iter().enumerate() {
                    out[j][(a, b)] = *z;
                }
            }
        }
        out
    }

    /// Least-squares fit of coefficients `|n| <= N` to samples on the FFT grid
    /// of the given radius. The energy in the dropped frequencies is recorded.
    pub fn from_samples(ctx: &Ctx, flavor: Flavor, radius: f64, values: &[CMat]) -> Result<Self> {
        let m = ctx.samples;
        if values.len() != m {
            return Err(Error::Mismatch(format!("expected {m} samples, got {}", values.len())));
        }
        let n = ctx.n();
        let nn = ctx.trunc as i64;
        let mut x = Self::zero(ctx, flavor);
        let mut buf = vec![C64::new(0.0, 0.0); m];
        let mut dropped = 0.0;
        for a in 0..n {
            for b in 0..n {
                for (j, v) in values.iter().enumerate() {
                    buf[j] = v[(a, b)];
                }
                ctx.fwd.process(&mut buf);
                for k in 0..m as i64 {
                    let mode = if k <= m as i64 / 2 { k } else { k - m as i64 };
                    let v = buf[k as usize] / m as f64;
                    if mode.abs() <= nn {
                        x.coeffs[(mode + nn) as usize][(a, b)] = v / radius.powi(mode as i32);
                    } else {
                        dropped += v.norm_sqr();
                    }
                }
            }
        }
        x.discarded = dropped.sqrt();
        Ok(x)
    }

    /// Applies a matrix function pointwise on the circle of the given radius.
    pub fn map_pointwise<F>(&self, radius: f64, flavor: Flavor, f: F) -> Result<Self>
    where
        F: Fn(C64, &CMat) -> Result<CMat>,
    {
        let pts = self.ctx.sample_points(radius);
        let vals = self.sample(radius);
        let mapped: Result<Vec<CMat>> = pts.iter().zip(&vals).map(|(l, v)| f(*l, v)).collect();
        let mut y = Self::from_samples(&self.ctx, flavor, radius, &mapped?)?;
        y.discarded += self.discarded;
        Ok(y)
    }

    pub fn add(&self, other: &LoopElement) -> Result<Self> {
        self.check_same(other)?;
        let mut x = self.clone();
        for (a, b) in x.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        x.discarded += other.discarded;
        Ok(x)
    }

    pub fn sub(&self, other: &LoopElement) -> Result<Self> {
        self.check_same(other)?;
        let mut x = self.clone();
        for (a, b) in x.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= b;
        }
        x.discarded += other.discarded;
        Ok(x)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut x = self.clone();
        x.coeffs.iter_mut().for_each(|m| *m *= s);
        x
    }

    /// Applies a linear map to every coefficient.
    pub fn map_coeffs<F: Fn(i64, &CMat) -> CMat>(&self, f: F) -> Self {
        let nn = self.trunc();
        let mut x = self.clone();
        for n in -nn..=nn {
            x.coeffs[(n + nn) as usize] = f(n, self.coeff_ref(n));
        }
        x
    }

    /// Multiplication by `lambda^m`.
    pub fn shift(&self, m: i64) -> Self {
        let nn = self.trunc();
        let mut x = Self::zero(&self.ctx, self.flavor);
        x.discarded = self.discarded;
        for n in -nn..=nn {
            let t = n + m;
            if t.abs() <= nn {
                x.coeffs[(t + nn) as usize] = self.coeff(n);
            } else {
                x.discarded += linalg::fro(self.coeff_ref(n));
            }
        }
        x
    }

    /// Keeps only modes in `lo..=hi`.
    pub fn restrict(&self, lo: i64, hi: i64) -> Self {
        self.map_coeffs(|n, m| if n >= lo && n <= hi { m.clone() } else { linalg::zeros(m.nrows()) })
    }

    /// Truncated Cauchy product; result takes the flavor of `self`.
    pub fn mul(&self, other: &LoopElement) -> Result<Self> {
        self.check_same(other)?;
        let nn = self.trunc();
        let (out, dropped) = convolve(&self.coeffs, -nn, &other.coeffs, -nn, -nn, nn);
        Ok(LoopElement {
            ctx: self.ctx.clone(),
            flavor: self.flavor,
            coeffs: out,
            discarded: self.discarded + other.discarded + dropped,
        })
    }

    /// Product in the loop group.
    pub fn multiply(&self, other: &LoopElement) -> Result<Self> {
        if self.flavor != Flavor::Group || other.flavor != Flavor::Group {
            return Err(Error::Mismatch("multiply expects group loops".into()));
        }
        self.mul(other)
    }

    pub fn bracket(&self, other: &LoopElement) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    fn has_negative_modes(&self) -> bool {
        (-self.trunc()..0).any(|n| linalg::fro(self.coeff_ref(n)) > 0.0)
    }

    /// Inverse in the loop group.
    pub fn invert(&self) -> Result<Self> {
        if self.flavor != Flavor::Group {
            return Err(Error::Mismatch("invert expects a group loop".into()));
        }
        if !self.has_negative_modes() {
            return self.invert_taylor();
        }
        let y0 = self.map_pointwise(1.0, Flavor::Group, |_, v| {
            if linalg::condition_number(v) > 1e12 {
                return Err(Error::NotInvertible);
            }
            linalg::inverse(v)
        })?;
        self.newton_inverse(y0)
    }

    fn newton_inverse(&self, mut y: LoopElement) -> Result<Self> {
        let id = LoopElement::identity(&self.ctx);
        let mut res = self.mul(&y)?.sub(&id)?.max_norm();
        let mut history = vec![res];
        for _ in 0..12 {
            if res < 1e-15 {
                break;
            }
            let xy = self.mul(&y)?;
            let corr = id.scale(c(2.0, 0.0)).sub(&xy)?;
            let cand = y.mul(&corr)?;
            let r = self.mul(&cand)?.sub(&id)?.max_norm();
            history.push(r);
            if r >= res {
                break;
            }
            let improved = r < 0.5 * res;
            y = cand;
            res = r;
            if !improved {
                break;
            }
        }
        if !res.is_finite() || res > 1e-6 {
            return Err(Error::NonConvergence {
                what: "loop inverse".into(),
                history,
            });
        }
        y.discarded += self.discarded;
        Ok(y)
    }

    /// Power-series inverse of a loop without negative modes.
    fn invert_taylor(&self) -> Result<Self> {
        let nn = self.trunc();
        let x0inv = linalg::inverse(self.coeff_ref(0))?;
        let mut y = Self::zero(&self.ctx, Flavor::Group);
        y.coeffs[nn as usize] = x0inv.clone();
        for n in 1..=nn {
            let mut acc = linalg::zeros(self.ctx.n());
            for j in 1..=n {
                let xj = self.coeff_ref(j);
                if linalg::fro(xj) > 0.0 {
                    acc += xj * y.coeff_ref(n - j);
                }
            }
            y.coeffs[(n + nn) as usize] = -(&x0inv * acc);
        }
        y.discarded = self.discarded;
        Ok(y)
    }

    /// `g x g^{-1}` for a group loop `g`.
    pub fn adjoint(g: &LoopElement, x: &LoopElement) -> Result<Self> {
        let gi = g.invert()?;
        Self::adjoint_with(g, &gi, x)
    }

    pub fn adjoint_with(g: &LoopElement, ginv: &LoopElement, x: &LoopElement) -> Result<Self> {
        Ok(g.mul(x)?.mul(ginv)?.with_flavor(x.flavor))
    }

    /// Exponential of an algebra loop by scaling and squaring on coefficients,
    /// so each mode is accurate relative to its own size.
    pub fn exp(&self) -> Result<Self> {
        let norm = self.l1_norm();
        let mut squarings = 0;
        while norm / 2f64.powi(squarings) > 0.5 {
            squarings += 1;
        }
        let x = self.scale(c(0.5f64.powi(squarings), 0.0)).with_flavor(Flavor::Group);
        let mut acc = LoopElement::identity(&self.ctx);
        let mut term = LoopElement::identity(&self.ctx);
        for k in 1..=24 {
            term = term.mul(&x)?.scale(c(1.0 / k as f64, 0.0));
            acc = acc.add(&term)?;
            if term.l1_norm() < 1e-18 {
                break;
            }
        }
        for _ in 0..squarings {
            acc = acc.mul(&acc)?;
        }
        acc.discarded += self.discarded;
        Ok(acc)
    }

    /// Pointwise exponential sampled on the circle of the given radius.
    pub fn exp_on(&self, radius: f64) -> Result<Self> {
        self.map_pointwise(radius, Flavor::Group, |_, v| Ok(linalg::expm(v)))
    }

    /// Pointwise principal logarithm sampled on the circle of the given radius.
    pub fn log_on(&self, radius: f64) -> Result<Self> {
        self.map_pointwise(radius, Flavor::Algebra, |_, v| linalg::logm(v))
    }

    /// `x^*(lambda) = x(1 / conj(lambda))^†`; coefficientwise `(x^*)_n = c_{-n}^†`.
    pub fn star(&self) -> Self {
        self.map_coeffs(|n, _| self.coeff_ref(-n).adjoint())
    }

    /// The real-form involution on algebra loops, `sigma(x(1 / conj(lambda)))`.
    pub fn sigma(&self) -> Self {
        self.map_coeffs(|n, _| -self.coeff_ref(-n).adjoint())
    }

    /// Largest coefficient norm.
    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(linalg::fro).fold(0.0, f64::max)
    }

    /// Sum of coefficient norms, an upper bound for the sup norm on the unit circle.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(linalg::fro).sum()
    }

    /// `max_{|n| > band} |c_n|`.
    pub fn tail_norm(&self, band: i64) -> f64 {
        let nn = self.trunc();
        (-nn..=nn)
            .filter(|n| n.abs() > band)
            .map(|n| linalg::fro(self.coeff_ref(n)))
            .fold(0.0, f64::max)
    }

    /// `sum_{n<0} |c_n|`.
    pub fn negative_mass(&self) -> f64 {
        (-self.trunc()..0).map(|n| linalg::fro(self.coeff_ref(n))).sum()
    }

    pub fn distance(&self, other: &LoopElement) -> Result<f64> {
        Ok(self.sub(other)?.max_norm())
    }

    /// Coefficient twist defect `max_n |c_n - P_{n mod k} c_n|`.
    pub fn coefficient_twist_residual(&self) -> f64 {
        let alg = self.algebra();
        (-self.trunc()..=self.trunc())
            .map(|n| alg.grade_residual(self.coeff_ref(n), n))
            .fold(0.0, f64::max)
    }

    /// Projects every coefficient onto its grade.
    pub fn project_twist(&self) -> Self {
        let alg = self.ctx.algebra_arc();
        self.map_coeffs(|n, m| alg.grade_project(m, n))
    }

    pub fn check_symmetries(&self) -> SymmetryReport {
        let alg = self.algebra();
        let ctx = &self.ctx;
        let nn = self.trunc();
        let probes = 32;
        let circle = |r: f64| -> Vec<C64> { (0..probes).map(|j| C64::from_polar(r, 2.0 * PI * (j as f64 + 0.25) / probes as f64)).collect() };
        let omega = alg.omega();
        let mut twist: f64 = 0.0;
        for l in circle(ctx.eps) {
            let a = self.evaluate_unchecked(omega * l);
            let b = alg.tau(&self.evaluate_unchecked(l));
            twist = twist.max(linalg::fro(&(a - b)));
        }
        let mut reality: f64 = 0.0;
        let mut pts = circle(1.0);
        pts.extend(circle(ctx.eps));
        for l in pts {
            let a = self.evaluate_unchecked(l);
            let b = self.evaluate_unchecked(C64::new(1.0, 0.0) / l.conj());
            let r = match self.flavor {
                Flavor::Group => linalg::fro(&(a * b.adjoint() - linalg::identity(ctx.n()))),
                Flavor::Algebra => linalg::fro(&(alg.sigma(&a) - b)),
            };
            reality = reality.max(r);
        }
        let e_residual = match self.flavor {
            Flavor::Group => match self.star().mul(self).and_then(|p| p.sub(&LoopElement::identity(ctx))) {
                Ok(d) => d.max_norm(),
                Err(_) => f64::INFINITY,
            },
            Flavor::Algebra => (-nn..=nn)
                .map(|n| linalg::fro(&(self.coeff_ref(n) - alg.sigma(self.coeff_ref(-n)))))
                .fold(0.0, f64::max),
        };
        let b_residual = match self.flavor {
            Flavor::Group => alg.b_group_residual(self.coeff_ref(0)),
            Flavor::Algebra => alg.b_algebra_residual(self.coeff_ref(0)),
        };
        SymmetryReport {
            twist_residual: twist,
            reality_residual: reality,
            e_residual,
            i_residual: self.negative_mass(),
            b_residual,
            edge_norms: (linalg::fro(self.coeff_ref(-nn)), linalg::fro(self.coeff_ref(nn))),
            discarded_mass: self.discarded,
        }
    }
}
