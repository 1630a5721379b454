use loopgroup::factorization::{factor_group, split_algebra, ExpPath};
use loopgroup::io::LoopDoc;
use loopgroup::lie::GradedLieAlgebra;
use loopgroup::linalg::{fro, C64};
use loopgroup::loops::{Ctx, Flavor, LoopContext, LoopElement};
use loopgroup::random;
use proptest::prelude::*;

fn context(i: usize) -> Ctx {
    let alg = match i {
        0 => GradedLieAlgebra::su2(),
        1 => GradedLieAlgebra::su3_cyclic(),
        _ => GradedLieAlgebra::su3_projective(),
    };
    LoopContext::default_for(alg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn products_agree_with_pointwise_products(i in 0..3usize, seed in any::<u64>()) {
        let ctx = context(i);
        let mut rng = random::rng(seed);
        let x = random::twisted_band(&mut rng, &ctx, -3, 3, 1.0).unwrap();
        let y = random::twisted_band(&mut rng, &ctx, -4, 2, 1.0).unwrap();
        let xy = x.mul(&y).unwrap();
        for z in ctx.sample_points(0.8).into_iter().chain(ctx.sample_points(1.0)).step_by(3) {
            let lhs = xy.evaluate(z).unwrap();
            let rhs = x.evaluate(z).unwrap() * y.evaluate(z).unwrap();
            prop_assert!(fro(&(lhs - &rhs)) < 1e-11 * fro(&rhs).max(1.0));
        }
    }

    #[test]
    fn multiplication_and_inversion_keep_the_twist(i in 0..3usize, seed in any::<u64>()) {
        let ctx = context(i);
        let mut rng = random::rng(seed);
        let g = random::twisted_band(&mut rng, &ctx, -2, 2, 0.3).unwrap().exp().unwrap();
        let h = random::twisted_band(&mut rng, &ctx, -1, 3, 0.3).unwrap().exp().unwrap();
        let gh = g.mul(&h).unwrap();
        let ginv = g.invert().unwrap();
        prop_assert!(gh.coefficient_twist_residual() < 1e-12);
        prop_assert!(ginv.coefficient_twist_residual() < 1e-12);
        let id = LoopElement::identity(&ctx);
        prop_assert!(g.mul(&ginv).unwrap().distance(&id).unwrap() < 1e-10);
    }

    #[test]
    fn fourier_round_trip(i in 0..3usize, seed in any::<u64>(), band in 1i64..10) {
        let ctx = context(i);
        let mut rng = random::rng(seed);
        let x = random::twisted_band(&mut rng, &ctx, -band, band, 1.0).unwrap();
        let back = LoopElement::from_samples(&ctx, Flavor::Algebra, 1.0, &x.sample(1.0)).unwrap();
        prop_assert!(back.distance(&x).unwrap() < 1e-10);
    }

    #[test]
    fn splits_do_not_depend_on_the_radius(i in 0..3usize, seed in any::<u64>(), eps in 0.3f64..0.7) {
        let ctx = context(i);
        let other = ctx.with_eps(eps).unwrap();
        let mut rng = random::rng(seed);
        let terms: Vec<(i64, _)> = (-2..=2).map(|n| (n, random::graded(&mut rng, ctx.algebra(), n, 0.3))).collect();
        let x = LoopElement::from_terms(&ctx, Flavor::Algebra, &terms).unwrap();
        let y = LoopElement::from_terms(&other, Flavor::Algebra, &terms).unwrap();
        let (xe, _) = split_algebra(&x).unwrap();
        let (ye, _) = split_algebra(&y).unwrap();
        for n in -3..=3 {
            prop_assert!(fro(&(xe.coeff(n) - ye.coeff(n))) < 1e-14);
        }
        let fx = factor_group(&x.exp().unwrap(), Some(&ExpPath::from_identity(x.clone()))).unwrap();
        let fy = factor_group(&y.exp().unwrap(), Some(&ExpPath::from_identity(y.clone()))).unwrap();
        let nn = ctx.trunc() as i64;
        for n in -nn..=nn {
            prop_assert!(fro(&(fx.e.coeff(n) - fy.e.coeff(n))) < 1e-6);
        }
    }

    #[test]
    fn json_round_trip(i in 0..3usize, seed in any::<u64>()) {
        let ctx = context(i);
        let mut rng = random::rng(seed);
        let x = random::twisted_band(&mut rng, &ctx, -3, 5, 2.0).unwrap();
        let text = serde_json::to_string(&LoopDoc::from_loop(&x)).unwrap();
        let doc: LoopDoc = serde_json::from_str(&text).unwrap();
        let y = doc.to_loop_in(&doc.context(ctx.algebra_arc(), None).unwrap()).unwrap();
        prop_assert_eq!(x.distance(&y).unwrap(), 0.0);
    }
}

#[test]
fn evaluation_respects_the_twist() {
    let ctx = context(1);
    let mut rng = random::rng(11);
    let x = random::twisted_band(&mut rng, &ctx, -2, 2, 1.0).unwrap();
    let alg = ctx.algebra();
    let z = C64::from_polar(0.9, 0.4);
    let lhs = x.evaluate(alg.omega() * z).unwrap();
    let rhs = alg.tau(&x.evaluate(z).unwrap());
    assert!(fro(&(lhs - rhs)) < 1e-12);
}
