//! Algebra selection, contexts and loading of JSON documents.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use loopgroup::factorization::{DressingElement, ExtendedFraming, ZGrid};
use loopgroup::io::{FramingDoc, GridDoc, LoopDoc, MatrixDoc};
use loopgroup::lie::{AlgebraDescriptor, GradedLieAlgebra};
use loopgroup::linalg::{c, CMat};
use loopgroup::loops::{Ctx, LoopContext, LoopElement, DEFAULT_EPS, DEFAULT_TRUNC};

use crate::error::{CliError, CliResult};

pub const PRESETS: [&str; 4] = ["su2", "su3-cyclic", "su3-projective", "su2-group"];

pub fn preset(name: &str) -> Option<GradedLieAlgebra> {
    Some(match name {
        "su2" => GradedLieAlgebra::su2(),
        "su3-cyclic" => GradedLieAlgebra::su3_cyclic(),
        "su3-projective" => GradedLieAlgebra::su3_projective(),
        "su2-group" => GradedLieAlgebra::group_case_su2(),
        _ => return None,
    })
}

/// A preset name or the path of a TOML algebra descriptor.
pub fn algebra_from_arg(arg: &str) -> CliResult<GradedLieAlgebra> {
    if let Some(a) = preset(arg) {
        return Ok(a);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(CliError::Input(format!(
            "unknown algebra '{arg}': expected one of {} or a descriptor file",
            PRESETS.join(", ")
        )));
    }
    let text = read(path)?;
    let d: AlgebraDescriptor = toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(GradedLieAlgebra::from_descriptor(&d)?)
}

pub fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    parse_json_in(path, &[])
}

/// Parses a document, or the document stored under one of `keys` in the
/// output of another command.
fn parse_json_in<T: serde::de::DeserializeOwned>(path: &Path, keys: &[&str]) -> CliResult<T> {
    let text = read(path)?;
    let bad = |e: serde_json::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    if v.get("version").is_none() {
        if let Some(k) = keys.iter().find(|k| v.get(**k).is_some()) {
            v = v[*k].take();
        }
    }
    serde_json::from_value(v).map_err(bad)
}

/// Shared settings for one command or scenario.
#[derive(Clone)]
pub struct Session {
    pub algebra: Arc<GradedLieAlgebra>,
    pub eps: Option<f64>,
    pub trunc: Option<usize>,
    pub tol: Option<f64>,
}

impl Session {
    pub fn new(algebra: GradedLieAlgebra, eps: Option<f64>, trunc: Option<usize>, tol: Option<f64>) -> Self {
        Session {
            algebra: Arc::new(algebra),
            eps,
            trunc,
            tol,
        }
    }

    /// Context from the flags, falling back to the radius and truncation stored
    /// in `doc` and then to the defaults.
    pub fn ctx(&self, doc: Option<&LoopDoc>) -> CliResult<Ctx> {
        let eps = self.eps.or(doc.map(|d| d.eps)).unwrap_or(DEFAULT_EPS);
        let trunc = self.trunc.or(doc.and_then(|d| d.trunc)).unwrap_or(DEFAULT_TRUNC);
        Ok(LoopContext::with_algebra(self.algebra.clone(), eps, trunc)?)
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    pub fn load_matrix(&self, path: &Path) -> CliResult<CMat> {
        let doc: MatrixDoc = parse_json_in(path, &["A"])?;
        loopgroup::io::check_version(doc.version)?;
        self.check_matrix(&doc.matrix)?;
        Ok(doc.matrix)
    }

    pub fn check_matrix(&self, m: &CMat) -> CliResult<()> {
        let n = self.algebra.n();
        if m.nrows() != n {
            return Err(CliError::Input(format!("{}x{} matrix does not fit the {n}x{n} algebra", m.nrows(), m.ncols())));
        }
        Ok(())
    }

    pub fn loop_doc(&self, path: &Path) -> CliResult<LoopDoc> {
        parse_json_in(path, &["g"])
    }

    pub fn load_loop(&self, path: &Path, ctx: &Ctx) -> CliResult<LoopElement> {
        let doc = self.loop_doc(path)?;
        self.loop_from_doc(&doc, ctx)
    }

    pub fn loop_from_doc(&self, doc: &LoopDoc, ctx: &Ctx) -> CliResult<LoopElement> {
        for c in &doc.coeffs {
            self.check_matrix(&c.matrix)?;
        }
        let x = doc.to_loop_in(ctx).map_err(|e| CliError::Input(e.to_string()))?;
        let tw = x.coefficient_twist_residual();
        if tw > 1e-10 * x.max_norm().max(1.0) {
            return Err(CliError::Input(loopgroup::Error::Twist { residual: tw }.to_string()));
        }
        Ok(x)
    }

    pub fn load_dressing(&self, path: &Path, ctx: &Ctx) -> CliResult<DressingElement> {
        let g = self.load_loop(path, ctx)?;
        DressingElement::new(g, None, true).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn load_grid(&self, path: &Path) -> CliResult<ZGrid> {
        let doc: GridDoc = parse_json(path)?;
        Ok(doc.to_grid()?)
    }

    pub fn load_framing(&self, path: &Path) -> CliResult<ExtendedFraming> {
        let doc: FramingDoc = parse_json_in(path, &["framing"])?;
        if let Some(t) = self.trunc {
            if t != doc.trunc {
                return Err(CliError::Input(format!("framing was stored with trunc {}, not {t}", doc.trunc)));
            }
        }
        Ok(doc.to_framing(self.algebra.clone())?)
    }
}

/// Grid used when a command is given none: one stencil at `0.3 + 0.2i` with
/// spacing `1e-3`.
pub fn default_grid() -> ZGrid {
    ZGrid::stencils(&[c(0.3, 0.2)], 1e-3)
}
