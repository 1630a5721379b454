//! Vacuum seeds, the reduction of a semisimple seed to a normal vacuum, the
//! untangling of pole-order-one loops, and fibre/stabilizer tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::DressingElement;
use crate::lie::{ElementKind, GradedLieAlgebra};
use crate::linalg::{self, CMat, C64};
use crate::loops::{Ctx, Flavor, LoopElement};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum SeedProvenance {
    Given,
    Normalized {
        #[serde(with = "crate::io::cmat")]
        x: CMat,
        #[serde(with = "crate::io::cmat")]
        b: CMat,
    },
}

/// `A` in degree `-1` with `[A, sigma(A)] = 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VacuumSeed {
    #[serde(with = "crate::io::cmat")]
    pub a: CMat,
    pub provenance: SeedProvenance,
}

impl VacuumSeed {
    pub fn new(alg: &GradedLieAlgebra, a: CMat) -> Result<Self> {
        let scale = linalg::fro(&a).max(1.0);
        let tw = alg.grade_residual(&a, -1);
        if tw > alg.tol.general * scale {
            return Err(Error::Twist { residual: tw });
        }
        let c = linalg::fro(&linalg::bracket(&a, &alg.sigma(&a)));
        if c > alg.tol.general * scale * scale {
            return Err(Error::NotVacuum { residual: c });
        }
        Ok(VacuumSeed {
            a,
            provenance: SeedProvenance::Given,
        })
    }

    /// The loop `lambda^{-1} A`.
    pub fn eta(&self, ctx: &Ctx) -> Result<LoopElement> {
        LoopElement::from_terms(ctx, Flavor::Algebra, &[(-1, self.a.clone())])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalizeReport {
    /// `|Y|^2` after each accepted step.
    pub norms: Vec<f64>,
    pub commutator: f64,
    pub steps: usize,
}

/// Moves a semisimple `X` in degree `-1` along its `Ad B` orbit to an `A` with
/// `[A, sigma(A)] = 0`. Returns `(A, b)` with `A = Ad b X`.
pub fn normalize_semisimple(alg: &GradedLieAlgebra, x: &CMat) -> Result<(VacuumSeed, CMat, NormalizeReport)> {
    let n = alg.n();
    let tw = alg.grade_residual(x, -1);
    if tw > alg.tol.general * linalg::fro(x).max(1.0) {
        return Err(Error::Twist { residual: tw });
    }
    let class = alg.classify_element(x)?;
    match class.kind {
        ElementKind::Semisimple | ElementKind::Zero => {}
        ElementKind::Indeterminate => return Err(Error::Indeterminate { residual: class.residual }),
        _ => return Err(Error::Domain(format!("element is {:?}, not semisimple", class.kind))),
    }
    let norm2 = |y: &CMat| linalg::fro(y).powi(2);
    let comm = |y: &CMat| linalg::bracket(y, &alg.sigma(y));
    let mut y = x.clone();
    let mut k = linalg::identity(n);
    let mut norms = vec![norm2(&y)];
    let mut steps = 0;
    // Stop well inside the 1e-10 contract so that the final unitary
    // conjugation cannot push the commutator over it.
    let target = 1e-12 * linalg::fro(x).powi(2).max(1.0);
    let mut c = comm(&y);
    let mut s = 0.1 / linalg::fro(&c).max(1e-300);
    while linalg::fro(&c) > target {
        if steps > 100_000 {
            return Err(Error::NonConvergence {
                what: "normalize_semisimple (iteration budget)".into(),
                history: norms,
            });
        }
        // Descent along -grad |Y|^2 in the Hermitian directions of degree zero.
        let g = linalg::fro(&c).powi(2);
        loop {
            let step = linalg::expm(&(&c * linalg::c(s, 0.0)));
            let y_new = &step * &y * linalg::inverse(&step)?;
            let f_new = norm2(&y_new);
            let f = norms[norms.len() - 1];
            // Near the minimum the Armijo decrease drops below the rounding
            // unit of |Y|^2; the gradient norm is still measurable there.
            let accept = if 1e-4 * s * g > 8.0 * f64::EPSILON * f {
                f_new <= f - 1e-4 * s * g
            } else {
                f_new <= f * (1.0 + 4.0 * f64::EPSILON) && linalg::fro(&comm(&y_new)) < linalg::fro(&c)
            };
            if accept {
                y = y_new;
                k = step * k;
                norms.push(f_new);
                steps += 1;
                s *= 2.0;
                break;
            }
            s *= 0.5;
            if s < 1e-14 {
                return Err(Error::NonConvergence {
                    what: "normalize_semisimple (step underflow)".into(),
                    history: norms,
                });
            }
        }
        c = comm(&y);
    }
    let (kk, kb) = alg.iwasawa_group(&k)?;
    let a = linalg::ad(&kk.adjoint(), &y)?;
    let seed = VacuumSeed {
        a: a.clone(),
        provenance: SeedProvenance::Normalized { x: x.clone(), b: kb.clone() },
    };
    Ok((
        seed,
        kb,
        NormalizeReport {
            norms,
            commutator: linalg::fro(&comm(&a)),
            steps,
        },
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UntangleReport {
    /// Radius of the circle the loop was sampled on.
    pub radius: f64,
    pub shrinks: usize,
    pub max_newton_iterations: usize,
    pub max_condition: f64,
    pub twist_residual: f64,
    pub commutator_residual: f64,
    pub leading_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Untangled {
    pub g: DressingElement,
    pub report: UntangleReport,
}

const NEWTON_CONDITION: f64 = 1e8;

struct Splitting {
    basis: Vec<CMat>,
    ker: Vec<CMat>,
    im: Vec<CMat>,
}

fn splitting(alg: &GradedLieAlgebra, a: &CMat) -> Result<Splitting> {
    let basis = alg.basis();
    let ker = alg.centralizer(a, false)?;
    let mut all = ker.clone();
    all.extend(basis.iter().cloned());
    let full = linalg::orthonormalize(&all, 1e-9);
    let im = full[ker.len()..].to_vec();
    Ok(Splitting { basis, ker, im })
}

/// `sum_m (ad y)^m w / (m+1)!`.
fn dexp(y: &CMat, w: &CMat) -> CMat {
    let mut term = w.clone();
    let mut out = w.clone();
    for m in 1..60 {
        term = linalg::bracket(y, &term) / linalg::c((m + 1) as f64, 0.0);
        out += &term;
        if linalg::fro(&term) < 1e-18 * linalg::fro(&out).max(1e-300) {
            break;
        }
    }
    out
}

struct SampleSolution {
    y: CMat,
    iterations: usize,
    condition: f64,
}

/// Solves `Ad exp(y) x = chi` for `x` in `ker ad A`, `y` in `im ad A`,
/// starting from `(A, 0)`.
fn solve_sample(sp: &Splitting, a: &CMat, chi: &CMat) -> Option<SampleSolution> {
    let dk = sp.ker.len();
    let di = sp.im.len();
    let mut x = a.clone();
    let mut y = linalg::zeros(a.nrows());
    let scale = linalg::fro(chi).max(1.0);
    let mut cond_max: f64 = 1.0;
    for it in 0..60 {
        let ey = linalg::expm(&y);
        let eyi = linalg::inverse(&ey).ok()?;
        let adx = &ey * &x * &eyi;
        let r = &adx - chi;
        let rn = linalg::fro(&r);
        if rn < 1e-14 * scale {
            return Some(SampleSolution {
                y,
                iterations: it,
                condition: cond_max,
            });
        }
        if !rn.is_finite() || rn > 1e6 * scale {
            return None;
        }
        let mut cols: Vec<CMat> = Vec::with_capacity(dk + di);
        for v in &sp.ker {
            cols.push(&ey * v * &eyi);
        }
        for w in &sp.im {
            cols.push(linalg::bracket(&dexp(&y, w), &adx));
        }
        let nb = sp.basis.len();
        let mut jac = CMat::zeros(nb, dk + di);
        for (j, col) in cols.iter().enumerate() {
            let v = linalg::coords(&sp.basis, col);
            for i in 0..nb {
                jac[(i, j)] = v[i];
            }
        }
        let cond = linalg::condition_number(&jac);
        cond_max = cond_max.max(cond);
        if !(cond < NEWTON_CONDITION) {
            return None;
        }
        let rhs = -linalg::coords(&sp.basis, &r);
        let delta = jac.lu().solve(&rhs)?;
        for (i, v) in sp.ker.iter().enumerate() {
            x += v * delta[i];
        }
        for (j, w) in sp.im.iter().enumerate() {
            y += w * delta[dk + j];
        }
    }
    None
}

/// Builds `g` with `g(0) = 1`, `Ad g (lambda^{-1} A)`-centralizing `Ad g eta`,
/// by solving `Ad exp(psi_2) psi_1 = lambda eta(lambda)` on a circle and
/// setting `g = exp(-psi_2)`. The radius is halved when a sample leaves the
/// Newton basin.
pub fn untangle_to_vacuum(eta: &LoopElement) -> Result<Untangled> {
    let ctx0 = eta.ctx().clone();
    let alg = ctx0.algebra_arc();
    let scale = eta.max_norm().max(1.0);
    if eta.tail_norm(i64::MAX).is_nan() {
        return Err(Error::Domain("non-finite loop".into()));
    }
    let low: f64 = (-eta.trunc()..-1).map(|n| linalg::fro(eta.coeff_ref(n))).sum();
    if low > ctx0.tol * scale {
        return Err(Error::Pole {
            order: -eta.support().map(|s| s.0).unwrap_or(0) as i32,
        });
    }
    let a = eta.coeff(-1);
    VacuumSeed::new(&alg, a.clone())?;
    let sp = splitting(&alg, &a)?;
    let lam_eta = eta.shift(1);
    let mut radius = ctx0.eps();
    let mut shrinks = 0;
    loop {
        let ctx = if shrinks == 0 { ctx0.clone() } else { ctx0.with_eps(radius)? };
        let chis = LoopElement::from_slice(&ctx, Flavor::Algebra, -lam_eta.trunc(), lam_eta.coeffs()).sample(radius);
        let sols: Vec<Option<SampleSolution>> = chis.par_iter().map(|chi| solve_sample(&sp, &a, chi)).collect();
        if sols.iter().any(|s| s.is_none()) {
            shrinks += 1;
            radius *= 0.5;
            if shrinks > 6 {
                return Err(Error::NonConvergence {
                    what: "untangle_to_vacuum (Newton basin lost at every radius)".into(),
                    history: vec![radius],
                });
            }
            continue;
        }
        let sols: Vec<SampleSolution> = sols.into_iter().map(|s| s.unwrap()).collect();
        let gen_samples: Vec<CMat> = sols.iter().map(|s| -&s.y).collect();
        let gen = LoopElement::from_samples(&ctx, Flavor::Algebra, radius, &gen_samples)?;
        let g_samples: Vec<CMat> = gen_samples.iter().map(linalg::expm).collect();
        let ginv_samples: Vec<CMat> = sols.iter().map(|s| linalg::expm(&s.y)).collect();
        let g = LoopElement::from_samples(&ctx, Flavor::Group, radius, &g_samples)?;
        let ginv = LoopElement::from_samples(&ctx, Flavor::Group, radius, &ginv_samples)?;
        let gscale = g.max_norm().max(1.0);
        let twist_residual = g.coefficient_twist_residual() / gscale;
        if twist_residual > 1e-8 {
            return Err(Error::Twist { residual: twist_residual });
        }
        let eta_c = LoopElement::from_slice(&ctx, Flavor::Algebra, -eta.trunc(), eta.coeffs());
        let ad = LoopElement::adjoint_with(&g, &ginv, &eta_c)?;
        let a_loop = LoopElement::constant(&ctx, Flavor::Algebra, a.clone());
        let comm = a_loop.bracket(&ad)?;
        let commutator_residual = comm.sample(radius).iter().map(linalg::fro).fold(0.0, f64::max);
        let leading_residual = linalg::fro(&(ad.coeff(-1) - &a));
        let dressing = DressingElement::new(g, Some(gen.restrict(0, gen.trunc())), true)?;
        return Ok(Untangled {
            g: dressing,
            report: UntangleReport {
                radius,
                shrinks,
                max_newton_iterations: sols.iter().map(|s| s.iterations).max().unwrap_or(0),
                max_condition: sols.iter().map(|s| s.condition).fold(1.0, f64::max),
                twist_residual,
                commutator_residual,
                leading_residual,
            },
        });
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FibreMethod {
    /// `eta` is a vacuum loop: `[zeta, A] = 0`.
    Vacuum,
    /// Regular semisimple leading term: `[zeta, eta] = 0`.
    RegularSemisimple,
    /// Negative modes of `(ad eta)^n zeta` for `n = 1..=n_max`.
    Series,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FibreReport {
    pub equivalent: bool,
    pub method: FibreMethod,
    pub leading_residual: f64,
    pub residuals: Vec<f64>,
}

pub const FIBRE_N_MAX: usize = 6;

/// Whether `zeta` and `eta` (both of pole order at most one) give the same
/// harmonic map.
pub fn fibre_equivalent(zeta: &LoopElement, eta: &LoopElement, n_max: usize, tol: f64) -> Result<FibreReport> {
    let alg = eta.algebra();
    let nn = eta.trunc();
    for x in [zeta, eta] {
        let low: f64 = (-nn..-1).map(|n| linalg::fro(x.coeff_ref(n))).sum();
        if low > tol {
            return Err(Error::Domain("fibre test needs pole order at most one".into()));
        }
    }
    let a = eta.coeff(-1);
    let leading_residual = linalg::fro(&(zeta.coeff(-1) - &a));
    let is_vacuum = eta.distance(&LoopElement::from_terms(eta.ctx(), Flavor::Algebra, &[(-1, a.clone())])?)? < tol;
    let class = alg.classify_element(&a)?;
    let semisimple = class.kind == ElementKind::Semisimple;
    let (method, residuals) = if is_vacuum && semisimple {
        let al = LoopElement::constant(eta.ctx(), Flavor::Algebra, a.clone());
        (FibreMethod::Vacuum, vec![zeta.bracket(&al)?.l1_norm()])
    } else if semisimple && class.regular {
        (FibreMethod::RegularSemisimple, vec![zeta.bracket(eta)?.l1_norm()])
    } else {
        let mut w = zeta.clone();
        let mut res = Vec::with_capacity(n_max);
        for _ in 0..n_max {
            w = eta.bracket(&w)?;
            res.push(w.negative_mass());
        }
        (FibreMethod::Series, res)
    };
    let equivalent = leading_residual < tol && residuals.iter().all(|r| *r < tol);
    Ok(FibreReport {
        equivalent,
        method,
        leading_residual,
        residuals,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilizerReport {
    pub member: bool,
    pub max_defect: f64,
    /// Largest variation of `Ad g(lambda) A` over the sampled points.
    pub variation: f64,
}

/// Whether `Ad g(lambda) A = A` on the inner disk, sampled on `C_eps` and on
/// the circle of half that radius.
pub fn stabilizer_membership(g: &DressingElement, seed: &VacuumSeed, tol: f64) -> Result<StabilizerReport> {
    let ctx = g.g.ctx().clone();
    let mut max_defect: f64 = 0.0;
    let mut values: Vec<CMat> = Vec::new();
    for radius in [ctx.eps(), 0.5 * ctx.eps()] {
        let gs = g.g.sample(radius);
        for gv in gs {
            let v = linalg::ad(&gv, &seed.a)?;
            max_defect = max_defect.max(linalg::fro(&(&v - &seed.a)));
            values.push(v);
        }
    }
    let v0 = linalg::ad(&g.g.coeff(0), &seed.a)?;
    max_defect = max_defect.max(linalg::fro(&(&v0 - &seed.a)));
    let variation = values.iter().map(|v| linalg::fro(&(v - &v0))).fold(0.0, f64::max);
    Ok(StabilizerReport {
        member: max_defect < tol,
        max_defect,
        variation,
    })
}

/// Builds `exp(sum_n c_n lambda^n x_n)` over a centralizer basis of `A`, with
/// the degree-zero part restricted to `b`.
pub fn centralizer_loop(ctx: &Ctx, seed: &VacuumSeed, coeffs: &[(i64, C64)]) -> Result<DressingElement> {
    let alg = ctx.algebra();
    let cent = alg.centralizer(&seed.a, false)?;
    let mut terms: Vec<(i64, CMat)> = Vec::new();
    for (n, cn) in coeffs {
        if *n < 0 {
            return Err(Error::Domain("centralizer loop must be holomorphic on the inner disk".into()));
        }
        let mut x = linalg::zeros(alg.n());
        for (i, cb) in cent.iter().enumerate() {
            let mut p = alg.grade_project(cb, *n);
            if *n == 0 {
                p = alg.project_b(&p);
            }
            x += p * (*cn * linalg::c(1.0 + 0.37 * i as f64, 0.0));
        }
        terms.push((*n, x));
    }
    let gen = LoopElement::from_terms(ctx, Flavor::Algebra, &terms)?;
    DressingElement::from_generator(&gen, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{dress_framing, gauge_equivalent, symes_framing, vacuum_framing_grid, ZGrid};
    use crate::linalg::{c, diag, fro, from_real_rows};
    use crate::loops::LoopContext;

    fn a() -> CMat {
        from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])
    }

    #[test]
    fn normalized_input_is_fixed() {
        let alg = GradedLieAlgebra::su2();
        let (seed, b, rep) = normalize_semisimple(&alg, &a()).unwrap();
        assert!(fro(&(seed.a - a())) < 1e-14);
        assert!(fro(&(b - linalg::identity(2))) < 1e-14);
        assert_eq!(rep.steps, 0);
    }

    #[test]
    fn undo_diagonal_conjugation() {
        let alg = GradedLieAlgebra::su2();
        let r = 1.3;
        let x = linalg::ad(&diag(&[c(r, 0.0), c(1.0 / r, 0.0)]), &a()).unwrap();
        let (seed, b, rep) = normalize_semisimple(&alg, &x).unwrap();
        assert!(rep.commutator < 1e-10, "{rep:?}");
        // Strict decrease until the step's decrease is below rounding of |Y|^2.
        assert!(rep.norms.windows(2).all(|w| w[1] < w[0] || (w[0] - w[1]).abs() <= 4.0 * f64::EPSILON * w[0]));
        assert!(rep.norms[rep.norms.len() - 1] < rep.norms[0]);
        assert!(fro(&seed.a) <= fro(&x));
        assert!(fro(&(linalg::ad(&b, &x).unwrap() - &seed.a)) < 1e-10);
        assert!(fro(&(b - diag(&[c(1.0 / r, 0.0), c(r, 0.0)]))) < 1e-8);
    }

    #[test]
    fn normalize_rejects_nilpotent() {
        let alg = GradedLieAlgebra::su2();
        let x = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(normalize_semisimple(&alg, &x).is_err());
    }

    #[test]
    fn untangle_vacuum_is_identity() {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let eta = LoopElement::from_terms(&ctx, Flavor::Algebra, &[(-1, a())]).unwrap();
        let u = untangle_to_vacuum(&eta).unwrap();
        assert!(u.g.g.distance(&LoopElement::identity(&ctx)).unwrap() < 1e-14);
    }

    #[test]
    fn untangle_perturbed_seed() {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let cpert = from_real_rows(&[&[0.0, 0.2], &[0.1, 0.0]]) * c(1.0, 0.5);
        let eta = LoopElement::from_terms(&ctx, Flavor::Algebra, &[(-1, a()), (1, cpert)]).unwrap();
        let u = untangle_to_vacuum(&eta).unwrap();
        assert!(u.report.commutator_residual < 1e-8, "{:?}", u.report);
        assert!(u.report.leading_residual < 1e-10);
        let grid = ZGrid::new(&[c(0.3, 0.1), c(-0.4, 0.5)]);
        let dressed = dress_framing(&u.g, &symes_framing(&eta, &grid).unwrap()).unwrap();
        let vac = vacuum_framing_grid(&ctx, &a(), &grid).unwrap();
        let rep = gauge_equivalent(&dressed, &vac, 1e-6).unwrap();
        assert!(rep.equivalent, "{rep:?}");
    }

    #[test]
    fn fibre_examples() {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let eta = LoopElement::from_terms(&ctx, Flavor::Algebra, &[(-1, a())]).unwrap();
        assert!(fibre_equivalent(&eta, &eta, FIBRE_N_MAX, 1e-10).unwrap().equivalent);
        let zeta = LoopElement::from_terms(&ctx, Flavor::Algebra, &[(-1, a()), (1, a() * c(0.4, 0.2)), (3, a() * c(-1.0, 0.0))]).unwrap();
        let rep = fibre_equivalent(&zeta, &eta, FIBRE_N_MAX, 1e-10).unwrap();
        assert_eq!(rep.method, FibreMethod::Vacuum);
        assert!(rep.equivalent);
        let x = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let bad = zeta.add(&LoopElement::from_terms(&ctx, Flavor::Algebra, &[(1, x)]).unwrap()).unwrap();
        let rep = fibre_equivalent(&bad, &zeta, FIBRE_N_MAX, 1e-10).unwrap();
        assert_eq!(rep.method, FibreMethod::RegularSemisimple);
        assert!(!rep.equivalent);
        // The series test agrees with the commutator shortcut.
        let mut w = bad.clone();
        let mut neg = 0.0;
        for _ in 0..FIBRE_N_MAX {
            w = zeta.bracket(&w).unwrap();
            neg += w.negative_mass();
        }
        assert!(neg > 1e-3);
    }

    #[test]
    fn stabilizer_examples() {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let seed = VacuumSeed::new(ctx.algebra(), a()).unwrap();
        let id = DressingElement::identity(&ctx);
        assert!(stabilizer_membership(&id, &seed, 1e-10).unwrap().member);
        let g = centralizer_loop(&ctx, &seed, &[(1, c(0.3, 0.1)), (3, c(-0.2, 0.0))]).unwrap();
        let rep = stabilizer_membership(&g, &seed, 1e-10).unwrap();
        assert!(rep.member && rep.variation < 1e-10, "{rep:?}");
        let b = LoopElement::constant(&ctx, Flavor::Group, diag(&[c(1.2, 0.0), c(1.0 / 1.2, 0.0)]));
        let b = DressingElement::new(b, None, true).unwrap();
        assert!(!stabilizer_membership(&b, &seed, 1e-10).unwrap().member);
    }
}
