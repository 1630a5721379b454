//! Splitting of loop algebras and groups into outer (E) and inner (I) parts,
//! framings obtained by factorizing exponentials, the dressing action and
//! finite-difference diagnostics of framings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};
use crate::loops::{convolve, Ctx, Flavor, LoopElement};
use crate::ode::{self, OdeOptions};

/// Splits an algebra loop into `xi_E + xi_I`: `xi_E` satisfies the reality
/// condition and `xi_I` has no negative modes with degree-zero part in `b`.
pub fn split_algebra(xi: &LoopElement) -> Result<(LoopElement, LoopElement)> {
    let alg = xi.algebra();
    let scale = xi.max_norm().max(1.0);
    let tw = xi.coefficient_twist_residual();
    if tw > xi.ctx().tol * scale {
        return Err(Error::Twist { residual: tw });
    }
    let nn = xi.trunc();
    let mut e = LoopElement::zero(xi.ctx(), Flavor::Algebra);
    for n in -nn..0 {
        *e.coeff_mut(n) = xi.coeff(n);
        *e.coeff_mut(-n) = alg.sigma(xi.coeff_ref(n));
    }
    *e.coeff_mut(0) = alg.split_zero(xi.coeff_ref(0)).0;
    let i = xi.sub(&e)?;
    Ok((e, i))
}

/// Inner-part projection used by the factorization flow.
fn project_inner(ctx: &Ctx, w: &[CMat], nn: i64) -> Vec<CMat> {
    let alg = ctx.algebra();
    let mut out = Vec::with_capacity(nn as usize + 1);
    out.push(alg.split_zero(&w[nn as usize]).1);
    for n in 1..=nn {
        out.push(&w[(n + nn) as usize] - alg.sigma(&w[(nn - n) as usize]));
    }
    out
}

fn taylor_inverse(x: &[CMat]) -> Result<Vec<CMat>> {
    let x0inv = linalg::inverse(&x[0])?;
    let mut y: Vec<CMat> = Vec::with_capacity(x.len());
    y.push(x0inv.clone());
    for n in 1..x.len() {
        let mut acc = linalg::zeros(x[0].nrows());
        for j in 1..=n {
            acc += &x[j] * &y[n - j];
        }
        y.push(-(&x0inv * acc));
    }
    Ok(y)
}

/// An exponential path `X(t) = base_e * base_i * exp(t * generator)`; at
/// `t = 0` the factors are known.
#[derive(Clone, Debug)]
pub struct ExpPath {
    pub base_e: Option<LoopElement>,
    pub base_i: Option<LoopElement>,
    pub generator: LoopElement,
}

impl ExpPath {
    pub fn from_identity(generator: LoopElement) -> Self {
        ExpPath {
            base_e: None,
            base_i: None,
            generator,
        }
    }

    /// The end point of the path.
    pub fn end_point(&self) -> Result<LoopElement> {
        let mut x = self.generator.exp()?;
        if let Some(bi) = &self.base_i {
            x = bi.mul(&x)?;
        }
        if let Some(be) = &self.base_e {
            x = be.mul(&x)?;
        }
        Ok(x.with_flavor(Flavor::Group))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorReport {
    pub e_residual: f64,
    pub i_residual: f64,
    pub b_residual: f64,
    pub product_residual: f64,
    pub newton_history: Vec<f64>,
    pub ode_steps: usize,
    pub discarded_mass: f64,
}

#[derive(Clone, Debug)]
pub struct Factorization {
    pub e: LoopElement,
    pub i: LoopElement,
    pub report: FactorReport,
}

/// Relative truncation loss above which pipelines abort.
pub const MAX_DISCARDED: f64 = 1e-6;
const NEWTON_TARGET: f64 = 1e-14;
const NEWTON_ACCEPT: f64 = 1e-10;

/// Factors a group loop as `X = X_E X_I`. With a path the inner factor is
/// carried along the exponential flow and then polished by Newton iteration on
/// the reality defect of `X X_I^{-1}`. Without a path a pointwise logarithm on
/// the unit circle supplies one, falling back to Newton iteration from the
/// identity.
pub fn factor_group(x: &LoopElement, path: Option<&ExpPath>) -> Result<Factorization> {
    if x.flavor() != Flavor::Group {
        return Err(Error::Mismatch("factor_group expects a group loop".into()));
    }
    let ctx = x.ctx().clone();
    let (i0, steps) = match path {
        Some(p) => flow_inner(p)?,
        None => match x.log_on(1.0) {
            Ok(g) if g.discarded() < MAX_DISCARDED * g.max_norm().max(1.0) => match flow_inner(&ExpPath::from_identity(g)) {
                Ok(v) => v,
                Err(_) => (LoopElement::identity(&ctx), 0),
            },
            _ => (LoopElement::identity(&ctx), 0),
        },
    };
    polish(x, i0, steps)
}

/// Integrates the inner factor along the path.
fn flow_inner(path: &ExpPath) -> Result<(LoopElement, usize)> {
    let gamma = &path.generator;
    let ctx = gamma.ctx().clone();
    let n = ctx.n();
    let nn = ctx.trunc() as i64;
    let tw = gamma.coefficient_twist_residual();
    if tw > ctx.tol * gamma.max_norm().max(1.0) {
        return Err(Error::Twist { residual: tw });
    }
    let start = match &path.base_i {
        Some(b) => b.band(0, nn),
        None => LoopElement::identity(&ctx).band(0, nn),
    };
    let gcoeffs = gamma.coeffs().to_vec();
    let pack = |v: &[CMat]| -> Vec<C64> { v.iter().flat_map(|m| m.iter().cloned()).collect() };
    let unpack = |y: &[C64]| -> Vec<CMat> { y.chunks(n * n).map(|ch| CMat::from_column_slice(n, n, ch)).collect() };
    let rhs = |_t: f64, y: &[C64]| -> Result<Vec<C64>> {
        let i = unpack(y);
        let iinv = taylor_inverse(&i)?;
        let (ig, _) = convolve(&i, 0, &gcoeffs, -nn, -nn, nn);
        let (w, _) = convolve(&ig, -nn, &iinv, 0, -nn, nn);
        let p = project_inner(&ctx, &w, nn);
        let (di, _) = convolve(&p, 0, &i, 0, 0, nn);
        Ok(pack(&di))
    };
    let (y, stats) = ode::integrate(rhs, pack(&start), 0.0, 1.0, &OdeOptions::default())?;
    let i = LoopElement::from_slice(&ctx, Flavor::Group, 0, &unpack(&y));
    Ok((i, stats.accepted + stats.rejected))
}

/// Newton iteration `E <- E (1 + d)^{-1}`, `I <- (1 + d) I` driving `E^* E - 1`
/// to zero.
fn polish(x: &LoopElement, mut inner: LoopElement, steps: usize) -> Result<Factorization> {
    let ctx = x.ctx().clone();
    let alg = ctx.algebra_arc();
    let nn = ctx.trunc() as i64;
    let id = LoopElement::identity(&ctx);
    let mut outer = x.mul(&inner.invert()?)?;
    let mut history = Vec::new();
    let mut best: Option<(f64, LoopElement, LoopElement)> = None;
    for _ in 0..30 {
        let s = outer.star().mul(&outer)?.sub(&id)?;
        let scale = outer.max_norm().powi(2).max(1.0);
        let r = s.max_norm() / scale;
        history.push(r);
        if best.as_ref().map_or(true, |b| r < b.0) {
            best = Some((r, outer.clone(), inner.clone()));
        }
        if r < NEWTON_TARGET {
            break;
        }
        let len = history.len();
        if len >= 4 && history[len - 1] > 0.5 * history[len - 4] {
            break;
        }
        let mut delta = LoopElement::zero(&ctx, Flavor::Group);
        let s0 = s.coeff_ref(0);
        let mut d0 = linalg::zeros(ctx.n());
        for a in 0..ctx.n() {
            for b in 0..ctx.n() {
                match alg.entry_position(a, b) {
                    Some(std::cmp::Ordering::Greater) => d0[(a, b)] = s0[(a, b)],
                    Some(std::cmp::Ordering::Equal) => d0[(a, a)] = c(0.5 * s0[(a, a)].re, 0.0),
                    _ => {}
                }
            }
        }
        *delta.coeff_mut(0) = &id.coeff(0) + d0;
        for k in 1..=nn {
            *delta.coeff_mut(k) = alg.grade_project(s.coeff_ref(k), k);
        }
        let dinv = delta.invert()?;
        outer = outer.mul(&dinv)?;
        inner = delta.mul(&inner)?.restrict(0, nn);
    }
    let (r, outer, inner) = best.expect("at least one iteration");
    if !(r < NEWTON_ACCEPT) {
        return Err(Error::NonConvergence {
            what: "factorization polish".into(),
            history,
        });
    }
    let discarded = x.discarded() + outer.discarded();
    if discarded > MAX_DISCARDED * x.max_norm().max(1.0) {
        return Err(Error::Truncation { mass: discarded });
    }
    let prod = outer.mul(&inner)?;
    let report = FactorReport {
        e_residual: r,
        i_residual: inner.negative_mass(),
        b_residual: alg.b_group_residual(inner.coeff_ref(0)),
        product_residual: prod.distance(x)?,
        newton_history: history,
        ode_steps: steps,
        discarded_mass: discarded,
    };
    Ok(Factorization {
        e: outer.with_flavor(Flavor::Group),
        i: inner.with_flavor(Flavor::Group),
        report,
    })
}

/// Points `z` at which framings are evaluated; index 0 is always `z = 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZGrid {
    #[serde(with = "crate::io::c64_vec")]
    pub points: Vec<C64>,
    pub stencils: Vec<Stencil>,
}

/// A 5x5 stencil `center + h (a + i b)`, `a, b` in `-2..=2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stencil {
    #[serde(with = "crate::io::c64")]
    pub center: C64,
    pub h: f64,
    pub index: [[usize; 5]; 5],
}

impl ZGrid {
    pub fn new(points: &[C64]) -> Self {
        let mut g = ZGrid {
            points: vec![C64::new(0.0, 0.0)],
            stencils: vec![],
        };
        for p in points {
            g.insert(*p);
        }
        g
    }

    fn insert(&mut self, z: C64) -> usize {
        if let Some(i) = self.points.iter().position(|p| (p - z).norm() < 1e-15) {
            return i;
        }
        self.points.push(z);
        self.points.len() - 1
    }

    /// Grid made of finite-difference stencils around the given centers.
    pub fn stencils(centers: &[C64], h: f64) -> Self {
        let mut g = ZGrid::new(&[]);
        for c0 in centers {
            g.add_stencil(*c0, h);
        }
        g
    }

    pub fn add_stencil(&mut self, center: C64, h: f64) {
        let mut index = [[0usize; 5]; 5];
        for a in -2..=2i32 {
            for b in -2..=2i32 {
                index[(a + 2) as usize][(b + 2) as usize] = self.insert(center + C64::new(a as f64 * h, b as f64 * h));
            }
        }
        self.stencils.push(Stencil { center, h, index });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn same_points(&self, other: &ZGrid) -> bool {
        self.points.len() == other.points.len() && self.points.iter().zip(&other.points).all(|(a, b)| (a - b).norm() < 1e-14)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Provenance {
    Symes,
    Vacuum,
    Lax,
    Dressed(Box<Provenance>),
    Loaded,
}

#[derive(Clone, Debug)]
pub struct ExtendedFraming {
    pub ctx: Ctx,
    pub grid: ZGrid,
    pub values: Vec<LoopElement>,
    /// Inner factors `b(z)` with `exp(z eta) = F(z) b(z)` when available.
    pub inner: Option<Vec<LoopElement>>,
    pub provenance: Provenance,
    pub reports: Vec<FactorReport>,
}

impl ExtendedFraming {
    pub fn value_at(&self, z: C64) -> Option<&LoopElement> {
        self.grid.points.iter().position(|p| (p - z).norm() < 1e-14).map(|i| &self.values[i])
    }
}

fn check_pole_order(eta: &LoopElement, order: i64) -> Result<()> {
    let nn = eta.trunc();
    for n in -nn..-order {
        if linalg::fro(eta.coeff_ref(n)) > 0.0 {
            return Err(Error::Domain(format!("pole order exceeds {order}")));
        }
    }
    Ok(())
}

/// Framing `z -> (exp z eta)_E` for `eta` with a pole of order at most one.
pub fn symes_framing(eta: &LoopElement, grid: &ZGrid) -> Result<ExtendedFraming> {
    check_pole_order(eta, 1)?;
    let ctx = eta.ctx().clone();
    let tw = eta.coefficient_twist_residual();
    if tw > ctx.tol * eta.max_norm().max(1.0) {
        return Err(Error::Twist { residual: tw });
    }
    let eta = eta.clone().with_flavor(Flavor::Algebra);
    let results: Vec<Result<Factorization>> = grid
        .points
        .par_iter()
        .map(|z| {
            if z.norm() == 0.0 {
                let id = LoopElement::identity(&ctx);
                return Ok(trivial_factorization(&id));
            }
            let gen = eta.scale(*z);
            let x = gen.exp()?;
            factor_group(&x, Some(&ExpPath::from_identity(gen)))
        })
        .collect();
    collect_framing(&ctx, grid, results, Provenance::Symes)
}

fn trivial_factorization(id: &LoopElement) -> Factorization {
    Factorization {
        e: id.clone(),
        i: id.clone(),
        report: FactorReport {
            e_residual: 0.0,
            i_residual: 0.0,
            b_residual: 0.0,
            product_residual: 0.0,
            newton_history: vec![],
            ode_steps: 0,
            discarded_mass: 0.0,
        },
    }
}

fn collect_framing(ctx: &Ctx, grid: &ZGrid, results: Vec<Result<Factorization>>, provenance: Provenance) -> Result<ExtendedFraming> {
    let mut values = Vec::with_capacity(results.len());
    let mut inner = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        let f = r?;
        values.push(f.e);
        inner.push(f.i);
        reports.push(f.report);
    }
    Ok(ExtendedFraming {
        ctx: ctx.clone(),
        grid: grid.clone(),
        values,
        inner: Some(inner),
        provenance,
        reports,
    })
}

/// Checks that `a` has degree `-1` and commutes with `sigma(a)`.
pub fn check_vacuum_seed(ctx: &Ctx, a: &CMat) -> Result<()> {
    let alg = ctx.algebra();
    let scale = linalg::fro(a).max(1.0);
    let gr = alg.grade_residual(a, -1);
    if gr > ctx.tol * scale {
        return Err(Error::Twist { residual: gr });
    }
    let comm = linalg::fro(&linalg::bracket(a, &alg.sigma(a)));
    if comm > ctx.tol * scale * scale {
        return Err(Error::NotVacuum { residual: comm });
    }
    Ok(())
}

/// Closed-form vacuum `exp(z lambda^{-1} A + conj(z) lambda sigma(A))`.
pub fn vacuum_framing(ctx: &Ctx, a: &CMat, z: C64) -> Result<LoopElement> {
    check_vacuum_seed(ctx, a)?;
    let alg = ctx.algebra();
    let gen = LoopElement::from_terms(ctx, Flavor::Algebra, &[(-1, a * z), (1, alg.sigma(a) * z.conj())])?;
    gen.exp()
}

pub fn vacuum_framing_grid(ctx: &Ctx, a: &CMat, grid: &ZGrid) -> Result<ExtendedFraming> {
    check_vacuum_seed(ctx, a)?;
    let values: Result<Vec<LoopElement>> = grid.points.par_iter().map(|z| vacuum_framing(ctx, a, *z)).collect();
    Ok(ExtendedFraming {
        ctx: ctx.clone(),
        grid: grid.clone(),
        values: values?,
        inner: None,
        provenance: Provenance::Vacuum,
        reports: vec![],
    })
}

/// Holomorphic loop on the inner disk acting by dressing.
#[derive(Clone, Debug)]
pub struct DressingElement {
    pub g: LoopElement,
    /// A logarithm of `g` with no negative modes, when known.
    pub generator: Option<LoopElement>,
}

impl DressingElement {
    /// Validates inner holomorphy, the twist and `g(0)` in `B` (`strict`) or in
    /// the complexified degree-zero group.
    pub fn new(g: LoopElement, generator: Option<LoopElement>, strict: bool) -> Result<Self> {
        let ctx = g.ctx().clone();
        let alg = ctx.algebra();
        let scale = g.max_norm().max(1.0);
        let neg = g.negative_mass();
        if neg > ctx.tol * scale {
            return Err(Error::Domain(format!("dressing loop has negative modes (mass {neg:.3e})")));
        }
        let tw = g.coefficient_twist_residual();
        if tw > ctx.tol * scale {
            return Err(Error::Twist { residual: tw });
        }
        let g0 = g.coeff(0);
        if strict {
            let b = alg.b_group_residual(&g0);
            if b > 1e-8 * scale {
                return Err(Error::Domain(format!("g(0) is not in B (residual {b:.3e})")));
            }
        } else if alg.off_block_mass(&g0) > ctx.tol * scale {
            return Err(Error::Domain("g(0) is not block diagonal".into()));
        }
        let nn = g.trunc();
        let g = g.restrict(0, nn).with_flavor(Flavor::Group);
        let generator = generator.map(|x| x.restrict(0, nn).with_flavor(Flavor::Algebra));
        Ok(DressingElement { g, generator })
    }

    /// `exp(x)` for an algebra loop `x` without negative modes.
    pub fn from_generator(x: &LoopElement, strict: bool) -> Result<Self> {
        let g = x.exp()?;
        Self::new(g, Some(x.clone()), strict)
    }

    pub fn identity(ctx: &Ctx) -> Self {
        DressingElement {
            g: LoopElement::identity(ctx),
            generator: Some(LoopElement::zero(ctx, Flavor::Algebra)),
        }
    }

    pub fn log(&self) -> Result<LoopElement> {
        match &self.generator {
            Some(x) => Ok(x.clone()),
            None => {
                let ctx = self.g.ctx();
                Ok(self.g.log_on(ctx.eps())?.restrict(0, self.g.trunc()))
            }
        }
    }
}

/// `g # F(z) = (g F(z))_E`, renormalized so that the value at `z = 0` is the
/// identity.
pub fn dress_framing(g: &DressingElement, framing: &ExtendedFraming) -> Result<ExtendedFraming> {
    let ctx = framing.ctx.clone();
    let logg = g.log()?;
    let results: Vec<Result<Factorization>> = framing
        .values
        .par_iter()
        .map(|f| {
            let gen = f.star().mul(&logg)?.mul(f)?.with_flavor(Flavor::Algebra).project_twist();
            let x = g.g.mul(f)?;
            let path = ExpPath {
                base_e: Some(f.clone()),
                base_i: None,
                generator: gen,
            };
            factor_group(&x, Some(&path))
        })
        .collect();
    let mut out = collect_framing(&ctx, &framing.grid, results, Provenance::Dressed(Box::new(framing.provenance.clone())))?;
    let k0 = out.values[0].coeff(0);
    let (ku, _) = ctx.algebra().iwasawa_group(&k0).unwrap_or((k0.clone(), k0.clone()));
    let kinv = LoopElement::constant(&ctx, Flavor::Group, ku.adjoint());
    for v in out.values.iter_mut() {
        *v = v.mul(&kinv)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeReport {
    pub equivalent: bool,
    pub max_leakage: f64,
    pub max_unitarity_defect: f64,
    #[serde(with = "crate::io::cmat_vec")]
    pub witness: Vec<CMat>,
}

/// Tests whether `F' = F k` with `k(z)` constant in `lambda` and unitary.
pub fn gauge_equivalent(f: &ExtendedFraming, fp: &ExtendedFraming, tol: f64) -> Result<GaugeReport> {
    if !f.grid.same_points(&fp.grid) {
        return Err(Error::Mismatch("framings live on different grids".into()));
    }
    let parts: Result<Vec<(f64, f64, CMat)>> = f
        .values
        .par_iter()
        .zip(fp.values.par_iter())
        .map(|(a, b)| {
            let k = a.invert()?.mul(b)?;
            let k0 = k.coeff(0);
            let leak = k.sub(&LoopElement::constant(a.ctx(), Flavor::Group, k0.clone()))?.l1_norm();
            let unit = linalg::fro(&(&k0 * k0.adjoint() - linalg::identity(k0.nrows())));
            Ok((leak, unit, k0))
        })
        .collect();
    let parts = parts?;
    let max_leakage = parts.iter().map(|p| p.0).fold(0.0, f64::max);
    let max_unitarity_defect = parts.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(GaugeReport {
        equivalent: max_leakage < tol && max_unitarity_defect < tol,
        max_leakage,
        max_unitarity_defect,
        witness: parts.into_iter().map(|p| p.2).collect(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CenterResidual {
    #[serde(with = "crate::io::c64")]
    pub z: C64,
    pub extended: f64,
    pub flatness: f64,
    /// Mode `-1` of the `dz` part of `F^{-1} dF`.
    #[serde(with = "crate::io::cmat")]
    pub alpha_minus1: CMat,
    /// Mode `0` of the `dz` part.
    #[serde(with = "crate::io::cmat")]
    pub alpha_zero: CMat,
    /// Mode `1` of the `dzbar` part.
    #[serde(with = "crate::io::cmat")]
    pub alpha_bar_plus1: CMat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FramingReport {
    pub extended_residual: f64,
    pub flatness_residual: f64,
    /// Second-order flatness residuals at spacing `h` and `2h`.
    pub flatness_order2: (f64, f64),
    pub warning: Option<String>,
    pub centers: Vec<CenterResidual>,
}

const D4: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];

/// Maurer-Cartan diagnostics by finite differences on the grid stencils.
pub fn framing_residuals(framing: &ExtendedFraming) -> Result<FramingReport> {
    if framing.grid.stencils.is_empty() {
        return Err(Error::Domain("framing grid has no finite-difference stencils".into()));
    }
    let per: Result<Vec<(CenterResidual, f64, f64)>> = framing.grid.stencils.par_iter().map(|s| center_residual(framing, s)).collect();
    let per = per?;
    let extended_residual = per.iter().map(|p| p.0.extended).fold(0.0, f64::max);
    let flatness_residual = per.iter().map(|p| p.0.flatness).fold(0.0, f64::max);
    let o2h = per.iter().map(|p| p.1).fold(0.0, f64::max);
    let o22h = per.iter().map(|p| p.2).fold(0.0, f64::max);
    let warning = if o22h > 1e-11 && o22h < 2.0 * o2h {
        Some(format!(
            "second-order flatness residual does not drop under refinement ({o22h:.3e} at 2h, {o2h:.3e} at h)"
        ))
    } else {
        None
    };
    Ok(FramingReport {
        extended_residual,
        flatness_residual,
        flatness_order2: (o2h, o22h),
        warning,
        centers: per.into_iter().map(|p| p.0).collect(),
    })
}

fn lin_comb(terms: &[(f64, &LoopElement)]) -> Result<LoopElement> {
    let mut acc = terms[0].1.scale(c(terms[0].0, 0.0));
    for (w, x) in &terms[1..] {
        if *w != 0.0 {
            acc = acc.add(&x.scale(c(*w, 0.0)))?;
        }
    }
    Ok(acc)
}

fn center_residual(framing: &ExtendedFraming, s: &Stencil) -> Result<(CenterResidual, f64, f64)> {
    let alg = framing.ctx.algebra();
    let h = s.h;
    let f = |a: i32, b: i32| &framing.values[s.index[(a + 2) as usize][(b + 2) as usize]];
    // Fourth-order derivatives in x along row b, in y along column a.
    let dx4 = |b: i32| -> Result<LoopElement> {
        let t: Vec<(f64, &LoopElement)> = (-2..=2).map(|a| (D4[(a + 2) as usize] / h, f(a, b))).collect();
        lin_comb(&t)
    };
    let dy4 = |a: i32| -> Result<LoopElement> {
        let t: Vec<(f64, &LoopElement)> = (-2..=2).map(|b| (D4[(b + 2) as usize] / h, f(a, b))).collect();
        lin_comb(&t)
    };
    let alpha_y_at = |a: i32| -> Result<LoopElement> { f(a, 0).invert()?.mul(&dy4(a)?) };
    let alpha_x_at = |b: i32| -> Result<LoopElement> { f(0, b).invert()?.mul(&dx4(b)?) };
    let ay: Vec<LoopElement> = (-2..=2).map(alpha_y_at).collect::<Result<_>>()?;
    let ax: Vec<LoopElement> = (-2..=2).map(alpha_x_at).collect::<Result<_>>()?;
    let d4 = |v: &[LoopElement]| -> Result<LoopElement> {
        let t: Vec<(f64, &LoopElement)> = (0..5).map(|i| (D4[i] / h, &v[i])).collect();
        lin_comb(&t)
    };
    let curv = d4(&ay)?.sub(&d4(&ax)?)?.add(&ax[2].bracket(&ay[2])?)?;
    let probes: Vec<C64> = (0..8).map(|j| C64::from_polar(1.0, std::f64::consts::PI * j as f64 / 4.0)).collect();
    let sup = |x: &LoopElement| -> Result<f64> {
        let mut m: f64 = 0.0;
        for l in &probes {
            m = m.max(linalg::fro(&x.evaluate(*l)?));
        }
        Ok(m)
    };
    let flatness = sup(&curv)?;
    let half = c(0.5, 0.0);
    let az = ax[2].sub(&ay[2].scale(linalg::I))?.scale(half);
    let azb = ax[2].add(&ay[2].scale(linalg::I))?.scale(half);
    let nn = az.trunc();
    let mut extended = 0.0;
    for n in -nn..=nn {
        if n != -1 && n != 0 {
            extended += linalg::fro(az.coeff_ref(n));
        }
        if n != 0 && n != 1 {
            extended += linalg::fro(azb.coeff_ref(n));
        }
    }
    let am1 = az.coeff(-1);
    extended += alg.grade_residual(&am1, -1);
    // Second-order residuals at spacing h and 2h.
    let order2 = |m: i32| -> Result<f64> {
        let hh = m as f64 * h;
        let ay_at = |a: i32| -> Result<LoopElement> {
            let d = f(a, m).sub(f(a, -m))?.scale(c(0.5 / hh, 0.0));
            f(a, 0).invert()?.mul(&d)
        };
        let ax_at = |b: i32| -> Result<LoopElement> {
            let d = f(m, b).sub(f(-m, b))?.scale(c(0.5 / hh, 0.0));
            f(0, b).invert()?.mul(&d)
        };
        let dxay = ay_at(m)?.sub(&ay_at(-m)?)?.scale(c(0.5 / hh, 0.0));
        let dyax = ax_at(m)?.sub(&ax_at(-m)?)?.scale(c(0.5 / hh, 0.0));
        let cur = dxay.sub(&dyax)?.add(&ax_at(0)?.bracket(&ay_at(0)?)?)?;
        sup(&cur)
    };
    let o1 = order2(1)?;
    let o2 = order2(2)?;
    Ok((
        CenterResidual {
            z: s.center,
            extended,
            flatness,
            alpha_minus1: am1,
            alpha_zero: az.coeff(0),
            alpha_bar_plus1: azb.coeff(1),
        },
        o1,
        o2,
    ))
}

/// Checks that `alpha'_{-1}` at each stencil center equals `Ad b(z)(0) eta_{-1}`
/// for a Symes framing and has the same spectral invariants as `eta_{-1}`.
pub fn symes_orbit_residual(framing: &ExtendedFraming, report: &FramingReport, eta: &LoopElement) -> Result<f64> {
    let inner = framing.inner.as_ref().ok_or_else(|| Error::Domain("framing carries no inner factors".into()))?;
    let em1 = eta.coeff(-1);
    let mut worst: f64 = 0.0;
    for cr in &report.centers {
        let idx = framing
            .grid
            .points
            .iter()
            .position(|p| (p - cr.z).norm() < 1e-14)
            .ok_or_else(|| Error::Domain("stencil center missing from grid".into()))?;
        let b0 = inner[idx].coeff(0);
        let want = linalg::ad(&b0, &em1)?;
        worst = worst.max(linalg::fro(&(&cr.alpha_minus1 - want)));
        let (mut p, mut q) = (cr.alpha_minus1.clone(), em1.clone());
        for _ in 2..=em1.nrows() {
            p = &p * &cr.alpha_minus1;
            q = &q * &em1;
            worst = worst.max((linalg::trace(&p) - linalg::trace(&q)).norm());
        }
    }
    Ok(worst)
}
