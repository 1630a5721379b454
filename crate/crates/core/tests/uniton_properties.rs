use loopgroup::factorization::{dress_framing, gauge_equivalent, symes_framing, ZGrid};
use loopgroup::lie::GradedLieAlgebra;
use loopgroup::linalg::{self, c, fro};
use loopgroup::loops::{Flavor, LoopContext, LoopElement};
use loopgroup::orbit::normalize_semisimple;
use loopgroup::random;
use loopgroup::unitons::{sl2_exp, standard_realization, uniton_classify, NilpotentForm, UnitonVerdict};
use proptest::prelude::*;

/// `sum_n c_n lambda^n E` over odd `n >= -1`: nilpotent at every `lambda`.
fn nilpotent_seed(rng: &mut random::SeededRng, top: i64) -> LoopElement {
    let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
    let e = NilpotentForm::E.matrix();
    let terms: Vec<(i64, _)> = (-1..=top)
        .filter(|n| n.rem_euclid(2) == 1)
        .map(|n| (n, &e * random::complex(rng, 0.5)))
        .collect();
    LoopElement::from_terms(&ctx, Flavor::Algebra, &terms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closed_form_exponential_matches_pade(seed in any::<u64>(), max in 0.0f64..5.0, zr in -1.5f64..1.5, zi in -1.5f64..1.5) {
        let mut rng = random::rng(seed);
        let m = random::traceless(&mut rng, 2, max);
        let z = c(zr, zi);
        let got = sl2_exp(&m, z).unwrap();
        let want = linalg::expm(&(&m * z));
        prop_assert!(fro(&(got - &want)) < 1e-12 * fro(&want).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nilpotent_seeds_have_finite_uniton_number(seed in any::<u64>(), top in 1i64..6) {
        let mut rng = random::rng(seed);
        let eta = nilpotent_seed(&mut rng, top);
        let rep = uniton_classify(&eta, 1e-10).unwrap();
        prop_assert_eq!(rep.verdict, UnitonVerdict::Finite { uniton_bound: 1 });
        prop_assert!(rep.evidence_agrees);
        // The standard realization has no negative modes.
        let std = standard_realization(&eta).unwrap();
        prop_assert!(std.negative_mass() == 0.0);
    }

    #[test]
    fn vacua_have_infinite_uniton_number(seed in any::<u64>(), norm in 0.2f64..2.0) {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let mut rng = random::rng(seed);
        let x = random::graded(&mut rng, ctx.algebra(), -1, norm);
        prop_assume!(ctx.algebra().classify_element(&x).unwrap().kind == loopgroup::lie::ElementKind::Semisimple);
        let (s, _, _) = normalize_semisimple(ctx.algebra(), &x).unwrap();
        let eta = LoopElement::from_terms(&ctx, Flavor::Algebra, &[(-1, s.a)]).unwrap();
        let rep = uniton_classify(&eta, 1e-10).unwrap();
        prop_assert_eq!(rep.verdict, UnitonVerdict::Infinite);
        prop_assert!(rep.evidence_agrees);
    }

    #[test]
    fn dressing_keeps_the_verdict(seed in any::<u64>(), nilpotent in any::<bool>()) {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let mut rng = random::rng(seed);
        let eta = if nilpotent {
            nilpotent_seed(&mut rng, 1)
        } else {
            random::seed(&mut rng, &ctx, 1, 0.5).unwrap()
        };
        let g = random::dressing(&mut rng, &ctx, 2, 0.2).unwrap();
        // Dressing conjugates the seed by g, which fixes det(eta).
        let moved = LoopElement::adjoint(&g.g, &eta).unwrap().restrict(-1, ctx.trunc() as i64);
        let before = uniton_classify(&eta, 1e-10).unwrap().verdict;
        let after = uniton_classify(&moved, 1e-10).unwrap().verdict;
        prop_assert_eq!(before, after);
        // The dressed framing is the framing of the conjugated seed.
        let grid = ZGrid::new(&[c(0.2, 0.1), c(-0.3, 0.4)]);
        let dressed = dress_framing(&g, &symes_framing(&eta, &grid).unwrap()).unwrap();
        let direct = symes_framing(&moved, &grid).unwrap();
        prop_assert!(gauge_equivalent(&dressed, &direct, 1e-6).unwrap().equivalent);
    }
}
