use loopgroup::factorization::{dress_framing, gauge_equivalent, symes_framing, vacuum_framing_grid, ZGrid};
use loopgroup::lie::GradedLieAlgebra;
use loopgroup::linalg::{self, c, fro, from_real_rows, CMat};
use loopgroup::loops::{Flavor, LoopContext, LoopElement};
use loopgroup::orbit::{centralizer_loop, fibre_equivalent, normalize_semisimple, stabilizer_membership, untangle_to_vacuum, VacuumSeed, FIBRE_N_MAX};
use loopgroup::random;
use proptest::prelude::*;

fn rot() -> CMat {
    from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])
}

fn cyclic_seed(alg: &GradedLieAlgebra) -> CMat {
    alg.grade_basis(-1).iter().fold(linalg::zeros(3), |acc, e| acc + e)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalization_reaches_a_normal_seed(cyclic in any::<bool>(), seed in any::<u64>(), norm in 0.2f64..3.0) {
        let alg = if cyclic { GradedLieAlgebra::su3_cyclic() } else { GradedLieAlgebra::su2() };
        let mut rng = random::rng(seed);
        let x = random::graded(&mut rng, &alg, -1, norm);
        prop_assume!(alg.classify_element(&x).unwrap().kind == loopgroup::lie::ElementKind::Semisimple);
        let (s, b, rep) = normalize_semisimple(&alg, &x).unwrap();
        let comm = linalg::bracket(&s.a, &alg.sigma(&s.a));
        prop_assert!(fro(&comm) < 1e-10);
        prop_assert!(fro(&s.a) <= fro(&x) * (1.0 + 1e-14));
        prop_assert!(rep.norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 4.0 * f64::EPSILON)));
        prop_assert!(fro(&(linalg::ad(&b, &x).unwrap() - &s.a)) < 1e-9 * norm.max(1.0));
        prop_assert!(alg.b_group_residual(&b) < 1e-10);
    }

    #[test]
    fn centralizer_loops_fix_the_seed_pointwise(cyclic in any::<bool>(), seed in any::<u64>()) {
        let alg = if cyclic { GradedLieAlgebra::su3_cyclic() } else { GradedLieAlgebra::su2() };
        let a = if cyclic { cyclic_seed(&alg) } else { rot() };
        let ctx = LoopContext::default_for(alg);
        let s = VacuumSeed::new(ctx.algebra(), a).unwrap();
        let mut rng = random::rng(seed);
        let w: Vec<(i64, _)> = (0..4).map(|n| (n, random::complex(&mut rng, 0.2))).collect();
        let g = centralizer_loop(&ctx, &s, &w).unwrap();
        let rep = stabilizer_membership(&g, &s, 1e-8).unwrap();
        prop_assert!(rep.member);
        prop_assert!(rep.variation < 1e-10);
        let h = random::dressing(&mut rng, &ctx, 2, 0.3).unwrap();
        prop_assert!(!stabilizer_membership(&h, &s, 1e-8).unwrap().member);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn untangled_seeds_dress_to_the_vacuum(seed in any::<u64>(), norm in 0.0f64..0.3) {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let mut rng = random::rng(seed);
        let cp = random::graded(&mut rng, ctx.algebra(), 1, norm);
        let eta = LoopElement::from_terms(&ctx, Flavor::Algebra, &[(-1, rot()), (1, cp)]).unwrap();
        let u = untangle_to_vacuum(&eta).unwrap();
        prop_assert!(u.report.commutator_residual < 1e-8);
        let grid = ZGrid::new(&[c(0.3, 0.1), c(-0.4, 0.2)]);
        let dressed = dress_framing(&u.g, &symes_framing(&eta, &grid).unwrap()).unwrap();
        let vac = vacuum_framing_grid(&ctx, &rot(), &grid).unwrap();
        prop_assert!(gauge_equivalent(&dressed, &vac, 1e-6).unwrap().equivalent);
    }
}

#[test]
fn fibre_equivalence_is_an_equivalence_on_samples() {
    let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
    let alg = ctx.algebra();
    let sa = alg.sigma(&rot());
    let mut rng = random::rng(5);
    let samples: Vec<LoopElement> = [
        vec![(-1, rot())],
        vec![(-1, rot()), (1, &sa * c(0.3, 0.0))],
        vec![(-1, rot()), (1, &sa * c(0.1, 0.2))],
        vec![(-1, rot()), (1, random::graded(&mut rng, alg, 1, 0.4))],
        vec![(-1, rot()), (1, random::graded(&mut rng, alg, 1, 0.4))],
    ]
    .iter()
    .map(|t| LoopElement::from_terms(&ctx, Flavor::Algebra, t).unwrap())
    .collect();
    let n = samples.len();
    let rel: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| fibre_equivalent(&samples[i], &samples[j], FIBRE_N_MAX, 1e-8).unwrap().equivalent)
                .collect()
        })
        .collect();
    for i in 0..n {
        assert!(rel[i][i]);
        for j in 0..n {
            assert_eq!(rel[i][j], rel[j][i], "{i} {j}");
            for k in 0..n {
                if rel[i][j] && rel[j][k] {
                    assert!(rel[i][k], "{i} {j} {k}");
                }
            }
        }
    }
    // The first three lie in one class; the random perturbations do not.
    assert!(rel[0][1] && rel[1][2]);
    assert!(!rel[0][3] && !rel[0][4] && !rel[3][4]);
}
