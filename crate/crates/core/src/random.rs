//! Seeded random inputs for the property suites and scenario runs.
//!
//! Everything is drawn from a ChaCha stream so a seed reproduces the same
//! inputs on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::factorization::DressingElement;
use crate::lie::GradedLieAlgebra;
use crate::linalg::{self, c, CMat, C64};
use crate::loops::{Ctx, Flavor, LoopElement};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real and imaginary parts uniform in `[-scale, scale]`.
pub fn complex(rng: &mut SeededRng, scale: f64) -> C64 {
    c(rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale))
}

/// Complex combination of `basis`, rescaled to Frobenius norm `norm`.
pub fn combination(rng: &mut SeededRng, basis: &[CMat], norm: f64) -> CMat {
    let n = basis.first().map_or(0, |b| b.nrows());
    let mut x = linalg::zeros(n);
    for b in basis {
        x += b * complex(rng, 1.0);
    }
    let f = linalg::fro(&x);
    if f > 0.0 {
        x * c(norm / f, 0.0)
    } else {
        x
    }
}

/// Traceless `n x n` matrix with Frobenius norm uniform in `[0, max_norm]`.
pub fn traceless(rng: &mut SeededRng, n: usize, max_norm: f64) -> CMat {
    let norm = rng.gen_range(0.0..=max_norm);
    combination(rng, &linalg::sl_basis(n), norm)
}

/// Element of `g_l` with the given norm.
pub fn graded(rng: &mut SeededRng, alg: &GradedLieAlgebra, l: i64, norm: f64) -> CMat {
    combination(rng, &alg.grade_basis(l), norm)
}

/// Real combination of the compact degree-zero basis.
pub fn compact(rng: &mut SeededRng, alg: &GradedLieAlgebra, scale: f64) -> CMat {
    let mut x = linalg::zeros(alg.n());
    for b in alg.k_basis() {
        x += b * c(rng.gen_range(-scale..=scale), 0.0);
    }
    x
}

/// Twisted algebra loop with random coefficients on modes `lo..=hi`.
pub fn twisted_band(rng: &mut SeededRng, ctx: &Ctx, lo: i64, hi: i64, scale: f64) -> Result<LoopElement> {
    let alg = ctx.algebra();
    let terms: Vec<(i64, CMat)> = (lo..=hi).map(|n| (n, graded(rng, alg, n, scale))).collect();
    LoopElement::from_terms(ctx, Flavor::Algebra, &terms)
}

/// Seed `lambda^{-1} x_{-1} + sum_{0 <= n <= degree} lambda^n x_n` of pole
/// order one.
pub fn seed(rng: &mut SeededRng, ctx: &Ctx, degree: i64, scale: f64) -> Result<LoopElement> {
    twisted_band(rng, ctx, -1, degree, scale)
}

/// Real element of the band `lambda^{-d} .. lambda^d`: `x_n = sigma(x_{-n})`
/// and `x_0` compact.
pub fn real_band(rng: &mut SeededRng, ctx: &Ctx, d: i64, scale: f64) -> Result<LoopElement> {
    let alg = ctx.algebra();
    let mut terms = vec![(0, compact(rng, alg, scale))];
    for m in 1..=d {
        let x = graded(rng, alg, -m, scale);
        terms.push((m, alg.sigma(&x)));
        terms.push((-m, x));
    }
    LoopElement::from_terms(ctx, Flavor::Algebra, &terms)
}

/// `exp(x)` for a random generator on modes `0..=degree` whose constant term
/// lies in the solvable part, so that `g(0)` is in `B`.
pub fn dressing(rng: &mut SeededRng, ctx: &Ctx, degree: i64, scale: f64) -> Result<DressingElement> {
    let alg = ctx.algebra();
    let mut x = twisted_band(rng, ctx, 1, degree, scale)?;
    *x.coeff_mut(0) = alg.project_b(&graded(rng, alg, 0, scale));
    DressingElement::from_generator(&x, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::LoopContext;

    #[test]
    fn streams_are_reproducible() {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su3_cyclic());
        let a = seed(&mut rng(7), &ctx, 3, 0.5).unwrap();
        let b = seed(&mut rng(7), &ctx, 3, 0.5).unwrap();
        assert_eq!(a.distance(&b).unwrap(), 0.0);
        assert!(a.coefficient_twist_residual() < 1e-15);
    }

    #[test]
    fn dressing_is_normalized() {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let g = dressing(&mut rng(3), &ctx, 2, 0.3).unwrap();
        assert!(ctx.algebra().b_group_residual(&g.g.coeff(0)) < 1e-12);
        assert!(g.g.negative_mass() == 0.0);
    }
}
