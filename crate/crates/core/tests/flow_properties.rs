use loopgroup::factorization::DressingElement;
use loopgroup::flows::{flow_apply, flow_commutator, orbit_rank_probe, FlowGenerator};
use loopgroup::lie::GradedLieAlgebra;
use loopgroup::linalg::{self, from_real_rows, CMat};
use loopgroup::loops::{Ctx, LoopContext};
use loopgroup::orbit::{centralizer_loop, stabilizer_membership, VacuumSeed};
use loopgroup::random;
use proptest::prelude::*;

fn setup(cyclic: bool) -> (Ctx, VacuumSeed) {
    if cyclic {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su3_cyclic());
        let a: CMat = ctx.algebra().grade_basis(-1).iter().fold(linalg::zeros(3), |acc, e| acc + e);
        let seed = VacuumSeed::new(ctx.algebra(), a).unwrap();
        (ctx, seed)
    } else {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let seed = VacuumSeed::new(ctx.algebra(), from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])).unwrap();
        (ctx, seed)
    }
}

/// Whether `g^{-1} h` fixes the seed.
fn same_coset(g: &DressingElement, h: &DressingElement, seed: &VacuumSeed) -> f64 {
    let q = g.g.invert().unwrap().mul(&h.g).unwrap();
    let q = DressingElement::new(q, None, false).unwrap();
    stabilizer_membership(&q, seed, 1.0).unwrap().max_defect
}

fn generator(ctx: &Ctx, seed: &VacuumSeed, rng: &mut random::SeededRng, modes: &[i64]) -> FlowGenerator {
    let w: Vec<(i64, _)> = modes.iter().map(|n| (*n, random::complex(rng, 0.3))).collect();
    FlowGenerator::from_weights(ctx, seed, &w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn flows_commute(cyclic in any::<bool>(), seed in any::<u64>(), s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let (ctx, vs) = setup(cyclic);
        let mut rng = random::rng(seed);
        let base = flow_apply(&DressingElement::identity(&ctx), &generator(&ctx, &vs, &mut rng, &[-1]), 0.5).unwrap();
        let z1 = generator(&ctx, &vs, &mut rng, &[-2, -1, 1]);
        let z2 = generator(&ctx, &vs, &mut rng, &[-1, 0, 2]);
        let rep = flow_commutator(&base, &z1, s, &z2, t).unwrap();
        prop_assert!(rep.stabilizer_defect < 1e-6, "{rep:?}");
    }

    #[test]
    fn flows_are_defined_on_cosets(cyclic in any::<bool>(), seed in any::<u64>()) {
        let (ctx, vs) = setup(cyclic);
        let mut rng = random::rng(seed);
        let g = random::dressing(&mut rng, &ctx, 2, 0.2).unwrap();
        let w: Vec<(i64, _)> = [0, 1, 2].iter().map(|n| (*n, random::complex(&mut rng, 0.2))).collect();
        let gamma = centralizer_loop(&ctx, &vs, &w).unwrap();
        let g2 = DressingElement::new(g.g.mul(&gamma.g).unwrap().restrict(0, ctx.trunc() as i64), None, true).unwrap();
        let z = generator(&ctx, &vs, &mut rng, &[-1, 1]);
        let h = flow_apply(&g, &z, 0.7).unwrap();
        let h2 = flow_apply(&g2, &z, 0.7).unwrap();
        prop_assert!(same_coset(&h, &h2, &vs) < 1e-6);
    }

    #[test]
    fn holomorphic_generators_act_trivially(cyclic in any::<bool>(), seed in any::<u64>()) {
        let (ctx, vs) = setup(cyclic);
        let mut rng = random::rng(seed);
        let g = random::dressing(&mut rng, &ctx, 2, 0.2).unwrap();
        let z = generator(&ctx, &vs, &mut rng, &[1, 2, 3]);
        let h = flow_apply(&g, &z, 1.0).unwrap();
        prop_assert!(same_coset(&g, &h, &vs) < 1e-8);
    }

    #[test]
    fn orbit_ranks_do_not_decrease(cyclic in any::<bool>(), seed in any::<u64>()) {
        let (ctx, vs) = setup(cyclic);
        let mut rng = random::rng(seed);
        let g = random::dressing(&mut rng, &ctx, 2, 0.3).unwrap();
        let probe = orbit_rank_probe(&g, &vs, 8).unwrap();
        let r = probe.ranks();
        prop_assert!(r.windows(2).all(|w| w[1] >= w[0]), "{r:?}");
    }
}

#[test]
fn vacuum_has_zero_rank() {
    let (ctx, vs) = setup(false);
    let probe = orbit_rank_probe(&DressingElement::identity(&ctx), &vs, 6).unwrap();
    assert!(probe.ranks().iter().all(|r| *r == 0));
    assert!(probe.stabilized);
    assert!(probe.as_csv().starts_with("m,"));
}
