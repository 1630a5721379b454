//! JSON formats for matrices, loops, grids and framings.
//!
//! Complex numbers are `[re, im]` pairs; square matrices are row-major lists of
//! such pairs. Every top-level document carries `"version": 1`.

use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::factorization::{ExtendedFraming, Provenance, ZGrid};
use crate::lie::GradedLieAlgebra;
use crate::linalg::{CMat, C64};
use crate::loops::{Ctx, Flavor, LoopContext, LoopElement};

pub const FORMAT_VERSION: u32 = 1;

pub fn matrix_to_pairs(m: &CMat) -> Vec<[f64; 2]> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * m.ncols());
    for i in 0..n {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

pub fn matrix_from_pairs(p: &[[f64; 2]]) -> Result<CMat> {
    let n = (p.len() as f64).sqrt().round() as usize;
    if n * n != p.len() || n == 0 {
        return Err(Error::Parse(format!("matrix with {} entries is not square", p.len())));
    }
    Ok(CMat::from_fn(n, n, |i, j| C64::new(p[i * n + j][0], p[i * n + j][1])))
}

pub mod c64 {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<C64, D::Error> {
        let p = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(p[0], p[1]))
    }
}

pub mod c64_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<C64>, D::Error> {
        let p = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(p.into_iter().map(|q| C64::new(q[0], q[1])).collect())
    }
}

pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_pairs(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let p = Vec::<[f64; 2]>::deserialize(d)?;
        matrix_from_pairs(&p).map_err(serde::de::Error::custom)
    }
}

pub mod cmat_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[CMat], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(matrix_to_pairs).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMat>, D::Error> {
        let p = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        p.iter().map(|q| matrix_from_pairs(q).map_err(serde::de::Error::custom)).collect()
    }
}

/// A matrix document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub version: u32,
    #[serde(with = "cmat")]
    pub matrix: CMat,
}

impl MatrixDoc {
    pub fn new(matrix: CMat) -> Self {
        MatrixDoc {
            version: FORMAT_VERSION,
            matrix,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoeffDoc {
    pub n: i64,
    #[serde(with = "cmat")]
    pub matrix: CMat,
}

/// A loop document; only non-zero coefficients are listed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoopDoc {
    pub version: u32,
    pub flavor: Flavor,
    pub eps: f64,
    #[serde(default)]
    pub trunc: Option<usize>,
    pub coeffs: Vec<CoeffDoc>,
}

impl LoopDoc {
    pub fn from_loop(x: &LoopElement) -> Self {
        let nn = x.trunc();
        let coeffs = (-nn..=nn)
            .filter(|&n| crate::linalg::fro(x.coeff_ref(n)) > 0.0)
            .map(|n| CoeffDoc { n, matrix: x.coeff(n) })
            .collect();
        LoopDoc {
            version: FORMAT_VERSION,
            flavor: x.flavor(),
            eps: x.ctx().eps(),
            trunc: Some(nn as usize),
            coeffs,
        }
    }

    /// Builds the loop in a context over `algebra`, using the stored radius and
    /// truncation unless the caller overrides them.
    pub fn to_loop_in(&self, ctx: &Ctx) -> Result<LoopElement> {
        check_version(self.version)?;
        let terms: Vec<(i64, CMat)> = self.coeffs.iter().map(|c| (c.n, c.matrix.clone())).collect();
        LoopElement::from_terms(ctx, self.flavor, &terms)
    }

    pub fn context(&self, algebra: Arc<GradedLieAlgebra>, trunc_override: Option<usize>) -> Result<Ctx> {
        let trunc = trunc_override.or(self.trunc).unwrap_or(crate::loops::DEFAULT_TRUNC);
        LoopContext::with_algebra(algebra, self.eps, trunc)
    }
}

pub fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(v));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridDoc {
    pub version: u32,
    #[serde(with = "c64_vec", default)]
    pub points: Vec<C64>,
    /// Finite-difference stencils as `{center, h}`.
    #[serde(default)]
    pub stencils: Vec<StencilDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StencilDoc {
    #[serde(with = "c64")]
    pub center: C64,
    pub h: f64,
}

impl GridDoc {
    pub fn to_grid(&self) -> Result<ZGrid> {
        check_version(self.version)?;
        let mut g = ZGrid::new(&self.points);
        for s in &self.stencils {
            if !(s.h > 0.0) {
                return Err(Error::Parse("stencil spacing must be positive".into()));
            }
            g.add_stencil(s.center, s.h);
        }
        Ok(g)
    }

    pub fn from_grid(g: &ZGrid) -> Self {
        GridDoc {
            version: FORMAT_VERSION,
            points: g.points.clone(),
            stencils: g.stencils.iter().map(|s| StencilDoc { center: s.center, h: s.h }).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FramingValueDoc {
    #[serde(with = "c64")]
    pub z: C64,
    pub coeffs: Vec<CoeffDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FramingDoc {
    pub version: u32,
    pub eps: f64,
    pub trunc: usize,
    pub provenance: Provenance,
    pub grid: GridDoc,
    pub values: Vec<FramingValueDoc>,
}

impl FramingDoc {
    pub fn from_framing(f: &ExtendedFraming) -> Self {
        FramingDoc {
            version: FORMAT_VERSION,
            eps: f.ctx.eps(),
            trunc: f.ctx.trunc(),
            provenance: f.provenance.clone(),
            grid: GridDoc::from_grid(&f.grid),
            values: f
                .grid
                .points
                .iter()
                .zip(&f.values)
                .map(|(z, v)| FramingValueDoc {
                    z: *z,
                    coeffs: LoopDoc::from_loop(v).coeffs,
                })
                .collect(),
        }
    }

    pub fn to_framing(&self, algebra: Arc<GradedLieAlgebra>) -> Result<ExtendedFraming> {
        check_version(self.version)?;
        let ctx = LoopContext::with_algebra(algebra, self.eps, self.trunc)?;
        let grid = self.grid.to_grid()?;
        let mut values = Vec::with_capacity(grid.len());
        for z in &grid.points {
            let v = self
                .values
                .iter()
                .find(|v| (v.z - z).norm() < 1e-14)
                .ok_or_else(|| Error::Parse(format!("framing has no value at z = {z}")))?;
            let terms: Vec<(i64, CMat)> = v.coeffs.iter().map(|c| (c.n, c.matrix.clone())).collect();
            values.push(LoopElement::from_terms(&ctx, Flavor::Group, &terms)?);
        }
        Ok(ExtendedFraming {
            ctx,
            grid,
            values,
            inner: None,
            provenance: Provenance::Loaded,
            reports: vec![],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real_rows};

    #[test]
    fn loop_round_trip() {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let a = from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let x = LoopElement::from_terms(&ctx, Flavor::Algebra, &[(-1, a.clone() * c(0.0, 1.5)), (3, a)]).unwrap();
        let s = serde_json::to_string(&LoopDoc::from_loop(&x)).unwrap();
        let doc: LoopDoc = serde_json::from_str(&s).unwrap();
        let y = doc.to_loop_in(&ctx).unwrap();
        assert_eq!(x.distance(&y).unwrap(), 0.0);
    }

    #[test]
    fn version_is_checked() {
        let ctx = LoopContext::default_for(GradedLieAlgebra::su2());
        let doc = LoopDoc {
            version: 7,
            flavor: Flavor::Group,
            eps: 0.5,
            trunc: None,
            coeffs: vec![],
        };
        assert!(matches!(doc.to_loop_in(&ctx), Err(Error::UnsupportedVersion(7))));
    }

    #[test]
    fn non_square_matrix_rejected() {
        assert!(matrix_from_pairs(&[[1.0, 0.0], [0.0, 0.0], [1.0, 1.0]]).is_err());
    }
}
