//! Commuting flows on the dressing orbit of a vacuum: generators valued in the
//! centre of the centralizer of `A`, their action `[g] -> [(g exp zeta)_I]`,
//! orbit-rank probes and stability of the degree-`d` finite-type locus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{factor_group, split_algebra, DressingElement, ExpPath};
use crate::finite_type::{finite_type_witness, FiniteTypeVerdict};
use crate::linalg::{self, CMat, RMat, C64};
use crate::loops::{Ctx, Flavor, LoopElement};
use crate::orbit::{stabilizer_membership, VacuumSeed};

/// `zeta = sum_{n >= -m} lambda^n c_n` with every `c_n` in the centre of the
/// centralizer of `A`.
#[derive(Clone, Debug)]
pub struct FlowGenerator {
    pub seed: VacuumSeed,
    pub centre: Vec<CMat>,
    pub zeta: LoopElement,
}

impl FlowGenerator {
    pub fn new(seed: &VacuumSeed, zeta: LoopElement) -> Result<Self> {
        let alg = zeta.algebra();
        let centre = alg.centralizer(&seed.a, true)?;
        let scale = zeta.max_norm().max(1.0);
        let tw = zeta.coefficient_twist_residual();
        if tw > zeta.ctx().tol * scale {
            return Err(Error::Twist { residual: tw });
        }
        let nn = zeta.trunc();
        for n in -nn..=nn {
            let c = zeta.coeff_ref(n);
            let mut rest = c.clone();
            for z in &centre {
                let p = (z.adjoint() * c).trace();
                rest -= z * p;
            }
            if linalg::fro(&rest) > 1e-10 * scale {
                return Err(Error::Domain(format!("coefficient {n} is not in the centre of the centralizer")));
            }
        }
        Ok(FlowGenerator {
            seed: seed.clone(),
            centre,
            zeta,
        })
    }

    /// `sum_n w_n lambda^n z_n` with `z_n` the projection of the centre onto
    /// degree `n`.
    pub fn from_weights(ctx: &Ctx, seed: &VacuumSeed, weights: &[(i64, C64)]) -> Result<Self> {
        let alg = ctx.algebra();
        let centre = alg.centralizer(&seed.a, true)?;
        let mut terms = Vec::new();
        for (n, w) in weights {
            let mut x = linalg::zeros(alg.n());
            for (i, z) in centre.iter().enumerate() {
                x += alg.grade_project(z, *n) * (*w * linalg::c(1.0 + 0.5 * i as f64, 0.0));
            }
            terms.push((*n, x));
        }
        Self::new(seed, LoopElement::from_terms(ctx, Flavor::Algebra, &terms)?)
    }

    pub fn pole_order(&self) -> i64 {
        self.zeta.support().map(|s| (-s.0).max(0)).unwrap_or(0)
    }
}

/// `exp(t zeta) . [g] = [(g exp(t zeta))_I]`.
pub fn flow_apply(g: &DressingElement, zeta: &FlowGenerator, t: f64) -> Result<DressingElement> {
    flow_apply_loop(g, &zeta.zeta, t)
}

fn flow_apply_loop(g: &DressingElement, zeta: &LoopElement, t: f64) -> Result<DressingElement> {
    if t == 0.0 {
        return Ok(g.clone());
    }
    let gen = zeta.scale(linalg::c(t, 0.0));
    let path = ExpPath {
        base_e: None,
        base_i: Some(g.g.clone()),
        generator: gen,
    };
    let x = path.end_point()?;
    let f = factor_group(&x, Some(&path))?;
    DressingElement::new(f.i, None, true)
}

/// Same, returning the outer factor as well.
pub fn flow_factors(g: &DressingElement, zeta: &FlowGenerator, t: f64) -> Result<(LoopElement, LoopElement)> {
    let gen = zeta.zeta.scale(linalg::c(t, 0.0));
    let path = ExpPath {
        base_e: None,
        base_i: Some(g.g.clone()),
        generator: gen,
    };
    let x = path.end_point()?;
    let f = factor_group(&x, Some(&path))?;
    Ok((f.e, f.i))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommutatorReport {
    /// Distance between the two composite inner factors.
    pub distance: f64,
    /// `h_1^{-1} h_2` measured against the stabilizer of `A`.
    pub stabilizer_defect: f64,
}

/// Compares `flow(z1, s) . flow(z2, t)` with `flow(z2, t) . flow(z1, s)`.
pub fn flow_commutator(g: &DressingElement, z1: &FlowGenerator, s: f64, z2: &FlowGenerator, t: f64) -> Result<CommutatorReport> {
    let a = flow_apply(&flow_apply(g, z2, t)?, z1, s)?;
    let b = flow_apply(&flow_apply(g, z1, s)?, z2, t)?;
    let distance = a.g.distance(&b.g)?;
    let q = a.g.invert()?.mul(&b.g)?;
    let q = DressingElement::new(q, None, false)?;
    let st = stabilizer_membership(&q, &z1.seed, 1.0)?;
    Ok(CommutatorReport {
        distance,
        stabilizer_defect: st.max_defect,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankEntry {
    pub m: usize,
    pub rank: usize,
    /// Singular values in the ambiguous band.
    pub gray: Vec<f64>,
    pub columns: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankProbe {
    pub entries: Vec<RankEntry>,
    /// `r(m + k) = r(m)` for the last two periods of `k`.
    pub stabilized: bool,
    /// Dimension of the centralizer of `A`, for cross-checking the kernel.
    pub centralizer_dim: usize,
}

impl RankProbe {
    pub fn ranks(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.rank).collect()
    }

    /// `r(m + k) > r(m)` for every `m` with `m + k <= m_max`.
    pub fn strictly_increasing_by_period(&self, k: usize) -> bool {
        let r = self.ranks();
        (0..r.len()).filter(|m| m + k < r.len()).all(|m| r[m + k] > r[m])
    }

    pub fn as_csv(&self) -> String {
        let mut s = String::from("m,rank\n");
        for e in &self.entries {
            s.push_str(&format!("{},{}\n", e.m, e.rank));
        }
        s
    }
}

/// Ranks of `zeta -> Ad g^{-1} (Ad g zeta)_I` modulo the kernel of `[., A]` on
/// the slices `{zeta : pole order <= m}`, `m = 0..=m_max`.
pub fn orbit_rank_probe(g: &DressingElement, seed: &VacuumSeed, m_max: usize) -> Result<RankProbe> {
    let ctx = g.g.ctx().clone();
    let alg = ctx.algebra_arc();
    let nn = ctx.trunc() as i64;
    if 2 * m_max as i64 > nn {
        return Err(Error::Domain(format!("m_max = {m_max} exceeds half the truncation {nn}")));
    }
    let centre = alg.centralizer(&seed.a, true)?;
    let centralizer_dim = alg.centralizer(&seed.a, false)?.len();
    let ginv = g.g.invert()?;
    let a_loop = LoopElement::constant(&ctx, Flavor::Algebra, seed.a.clone());
    // Rows: modes 0..=N - m_max, where every product is exact.
    let top = nn - m_max as i64;
    let image = |zeta: &LoopElement| -> Result<Vec<f64>> {
        let w = LoopElement::adjoint_with(&g.g, &ginv, zeta)?;
        let (_, wi) = split_algebra(&w)?;
        let back = LoopElement::adjoint_with(&ginv, &g.g, &wi)?;
        let c = back.bracket(&a_loop)?;
        let v: Vec<C64> = (0..=top).flat_map(|n| c.coeff(n).iter().cloned().collect::<Vec<_>>()).collect();
        Ok(linalg::realify(&v))
    };
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut entries = Vec::new();
    let k = alg.k();
    for m in 0..=m_max {
        let n = -(m as i64);
        for z in &centre {
            let p = alg.grade_project(z, n);
            if linalg::fro(&p) < 1e-12 {
                continue;
            }
            for s in [linalg::c(1.0, 0.0), linalg::I] {
                let zeta = LoopElement::from_terms(&ctx, Flavor::Algebra, &[(n, &p * s)])?;
                cols.push(image(&zeta)?);
            }
        }
        let (rank, gray) = if cols.is_empty() {
            (0, vec![])
        } else {
            let rows = cols[0].len();
            let mat = RMat::from_fn(rows, cols.len(), |i, j| cols[j][i]);
            let sv = linalg::real_singular_values(&mat);
            let info = linalg::rank_info_scaled(&sv, linalg::fro(&seed.a), alg.tol.rank, alg.tol.rank_band);
            (info.rank, info.ambiguous.clone())
        };
        entries.push(RankEntry {
            m,
            rank,
            gray,
            columns: cols.len(),
        });
    }
    let r: Vec<usize> = entries.iter().map(|e| e.rank).collect();
    let stabilized = r.len() > 2 * k && r[r.len() - 1] == r[r.len() - 1 - k] && r[r.len() - 1 - k] == r[r.len() - 1 - 2 * k];
    Ok(RankProbe {
        entries,
        stabilized,
        centralizer_dim,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportFactor {
    /// `(g exp zeta)_I`, the correct transport.
    Inner,
    /// `(g exp zeta)_E`, a structural negative control.
    Outer,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OdStabilityReport {
    pub stable: bool,
    pub band_tail: f64,
    pub leading_residual: f64,
    pub commutator_residual: f64,
    pub witness_residual: f64,
}

fn mass(x: &LoopElement, lo: i64, hi: i64) -> f64 {
    (lo..=hi).map(|n| linalg::fro(x.coeff_ref(n))).sum()
}

/// Transports the degree-`d` witness of `[g]` along `exp zeta` and checks that
/// it is a degree-`d` witness of the flowed point.
pub fn od_stability_check(g: &DressingElement, zeta: &FlowGenerator, d: usize, factor: TransportFactor, tol: f64) -> Result<OdStabilityReport> {
    let ctx = g.g.ctx().clone();
    let nn = ctx.trunc() as i64;
    let dd = d as i64;
    let a = &zeta.seed.a;
    let rep = finite_type_witness(&g.g, a, d)?;
    let xi = match rep.verdict {
        FiniteTypeVerdict::Witness { xi, .. } => xi,
        FiniteTypeVerdict::Infeasible { residual, .. } => return Err(Error::Domain(format!("no degree-{d} witness (residual {residual:.3e})"))),
    };
    let (e, i) = flow_factors(g, zeta, 1.0)?;
    let h = match factor {
        TransportFactor::Inner => i,
        TransportFactor::Outer => e,
    };
    let ginv = g.g.invert()?;
    let back = LoopElement::adjoint_with(&ginv, &g.g, &xi)?;
    let hinv = h.invert()?;
    let xi_hat = LoopElement::adjoint_with(&h, &hinv, &back)?;
    let exact = nn - 2 * dd;
    let band_tail = mass(&xi_hat, -nn, -dd - 1) + mass(&xi_hat, dd + 1, exact);
    let h0 = h.coeff(0);
    let leading_residual = linalg::fro(&(xi_hat.coeff(-dd) - linalg::ad(&h0, a)?));
    let a_loop = LoopElement::constant(&ctx, Flavor::Algebra, a.clone());
    let ad_a = LoopElement::adjoint_with(&h, &hinv, &a_loop)?;
    let comm = xi_hat.bracket(&ad_a)?;
    let commutator_residual = mass(&comm, -nn, exact);
    Ok(OdStabilityReport {
        stable: band_tail < tol && leading_residual < tol && commutator_residual < tol,
        band_tail,
        leading_residual,
        commutator_residual,
        witness_residual: rep.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{dress_framing, gauge_equivalent, vacuum_framing, vacuum_framing_grid, ExtendedFraming, Provenance, ZGrid};
    use crate::lie::GradedLieAlgebra;
    use crate::linalg::{c, diag, from_real_rows};
    use crate::loops::LoopContext;
    use crate::orbit::centralizer_loop;

    fn a() -> CMat {
        from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])
    }

    fn setup() -> (Ctx, VacuumSeed) {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let seed = VacuumSeed::new(ctx.algebra(), a()).unwrap();
        (ctx, seed)
    }

    #[test]
    fn zero_time_is_identity() {
        let (ctx, seed) = setup();
        let z = FlowGenerator::from_weights(&ctx, &seed, &[(-1, c(1.0, 0.0))]).unwrap();
        let g = centralizer_loop(&ctx, &seed, &[(1, c(0.2, 0.0))]).unwrap();
        assert_eq!(flow_apply(&g, &z, 0.0).unwrap().g.distance(&g.g).unwrap(), 0.0);
    }

    #[test]
    fn generator_must_lie_in_centre() {
        let (ctx, seed) = setup();
        let bad = LoopElement::from_terms(&ctx, Flavor::Algebra, &[(-1, from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]))]).unwrap();
        assert!(FlowGenerator::new(&seed, bad).is_err());
    }

    #[test]
    fn first_flow_translates_vacuum() {
        let (ctx, seed) = setup();
        let t = 0.35;
        let z = FlowGenerator::from_weights(&ctx, &seed, &[(-1, c(1.0, 0.0))]).unwrap();
        let h = flow_apply(&DressingElement::identity(&ctx), &z, t).unwrap();
        let grid = ZGrid::new(&[c(0.2, 0.3), c(-0.3, 0.1)]);
        let vac = vacuum_framing_grid(&ctx, &a(), &grid).unwrap();
        let dressed = dress_framing(&h, &vac).unwrap();
        let ft_inv = vacuum_framing(&ctx, &a(), c(t, 0.0)).unwrap().invert().unwrap();
        let values: Vec<LoopElement> = grid
            .points
            .iter()
            .map(|zp| ft_inv.mul(&vacuum_framing(&ctx, &a(), zp + t).unwrap()).unwrap())
            .collect();
        let want = ExtendedFraming {
            ctx: ctx.clone(),
            grid: grid.clone(),
            values,
            inner: None,
            provenance: Provenance::Vacuum,
            reports: vec![],
        };
        let rep = gauge_equivalent(&dressed, &want, 1e-8).unwrap();
        assert!(rep.equivalent, "{rep:?}");
    }

    #[test]
    fn flows_commute() {
        let (ctx, seed) = setup();
        let z1 = FlowGenerator::from_weights(&ctx, &seed, &[(-1, c(1.0, 0.0))]).unwrap();
        let z2 = FlowGenerator::from_weights(&ctx, &seed, &[(-3, c(0.0, 0.7)), (-1, c(0.2, 0.0))]).unwrap();
        let g = DressingElement::new(LoopElement::constant(&ctx, Flavor::Group, diag(&[c(1.2, 0.0), c(1.0 / 1.2, 0.0)])), None, true).unwrap();
        let rep = flow_commutator(&g, &z1, 0.3, &z2, 0.2).unwrap();
        assert!(rep.distance < 1e-6 && rep.stabilizer_defect < 1e-6, "{rep:?}");
    }

    #[test]
    fn inner_generators_act_trivially() {
        let (ctx, seed) = setup();
        let z = FlowGenerator::from_weights(&ctx, &seed, &[(1, c(0.4, 0.1)), (3, c(0.1, 0.0))]).unwrap();
        let g = DressingElement::new(LoopElement::constant(&ctx, Flavor::Group, diag(&[c(1.2, 0.0), c(1.0 / 1.2, 0.0)])), None, true).unwrap();
        let h = flow_apply(&g, &z, 1.0).unwrap();
        let q = DressingElement::new(g.g.invert().unwrap().mul(&h.g).unwrap(), None, true).unwrap();
        assert!(stabilizer_membership(&q, &seed, 1e-8).unwrap().member);
    }

    #[test]
    fn rank_probes() {
        let (ctx, seed) = setup();
        let vac = orbit_rank_probe(&DressingElement::identity(&ctx), &seed, 8).unwrap();
        assert!(vac.stabilized, "{:?}", vac.ranks());
        let b = DressingElement::new(LoopElement::constant(&ctx, Flavor::Group, diag(&[c(1.2, 0.0), c(1.0 / 1.2, 0.0)])), None, true).unwrap();
        let pb = orbit_rank_probe(&b, &seed, 8).unwrap();
        let r = pb.ranks();
        assert!(r.windows(2).all(|w| w[1] >= w[0]), "{r:?}");
        assert!(pb.strictly_increasing_by_period(2), "{r:?}");
        assert!(!pb.stabilized);
    }

    #[test]
    fn od_stability_at_vacuum() {
        let (ctx, seed) = setup();
        let z = FlowGenerator::from_weights(&ctx, &seed, &[(-3, c(0.3, 0.0)), (-1, c(0.5, 0.2))]).unwrap();
        let id = DressingElement::identity(&ctx);
        for f in [TransportFactor::Inner, TransportFactor::Outer] {
            let rep = od_stability_check(&id, &z, 1, f, 1e-7).unwrap();
            assert!(rep.stable, "{rep:?}");
        }
    }

    // On these points the outer factor commutes with Ad g^{-1} xi, so it
    // transports the witness as well; both factors must come out stable.
    #[test]
    fn od_stability_off_vacuum() {
        let (ctx, seed) = setup();
        let z0 = FlowGenerator::from_weights(&ctx, &seed, &[(-3, c(0.4, 0.1))]).unwrap();
        let g = flow_apply(&DressingElement::identity(&ctx), &z0, 1.0).unwrap();
        let z = FlowGenerator::from_weights(&ctx, &seed, &[(-1, c(0.5, 0.2))]).unwrap();
        for f in [TransportFactor::Inner, TransportFactor::Outer] {
            let rep = od_stability_check(&g, &z, 3, f, 1e-7).unwrap();
            assert!(rep.stable, "{f:?} {rep:?}");
        }
    }

    #[test]
    fn od_stability_cyclic() {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su3_cyclic());
        let alg = ctx.algebra();
        let a: CMat = alg.grade_basis(-1).iter().fold(linalg::zeros(3), |acc, e| acc + e);
        let seed = VacuumSeed::new(alg, a).unwrap();
        let z0 = FlowGenerator::from_weights(&ctx, &seed, &[(-2, c(0.3, 0.1))]).unwrap();
        let g = flow_apply(&DressingElement::identity(&ctx), &z0, 1.0).unwrap();
        let z = FlowGenerator::from_weights(&ctx, &seed, &[(-2, c(0.2, -0.1)), (-1, c(0.4, 0.0))]).unwrap();
        for f in [TransportFactor::Inner, TransportFactor::Outer] {
            let rep = od_stability_check(&g, &z, 4, f, 1e-7).unwrap();
            assert!(rep.stable, "{f:?} {rep:?}");
        }
    }
}
