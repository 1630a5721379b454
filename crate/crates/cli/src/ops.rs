//! Operations shared by the subcommands and scenario steps.
//!
//! Each returns an [`Output`]: the typed value for chaining, a small JSON object
//! of metrics, optionally the full document the value serializes to and
//! optionally CSV rows for plotting.

use loopgroup::factorization::{
    dress_framing, framing_residuals, gauge_equivalent, symes_framing, vacuum_framing_grid, DressingElement, ExtendedFraming, FramingReport, ZGrid,
};
use loopgroup::finite_type::{
    band_defects, field_distance, finite_type_witness, integrate_killing_field, killing_field_via_symes, spectral_invariants, AksStructure, FiniteTypeVerdict,
    PolynomialKillingField,
};
use loopgroup::flows::{flow_apply, orbit_rank_probe, FlowGenerator};
use loopgroup::io::{matrix_to_pairs, FramingDoc, LoopDoc, MatrixDoc};
use loopgroup::linalg::CMat;
use loopgroup::loops::LoopElement;
use loopgroup::orbit::{normalize_semisimple, stabilizer_membership, untangle_to_vacuum, VacuumSeed};
use loopgroup::unitons::uniton_classify;
use serde_json::{json, Value as Json};

use crate::error::CliResult;
use crate::session::Session;

pub const GAUGE_TOL: f64 = 1e-6;
pub const STAB_TOL: f64 = 1e-8;
pub const UNITON_TOL: f64 = 1e-10;

#[derive(Clone)]
pub enum Value {
    Matrix(CMat),
    Loop(LoopElement),
    Dressing(DressingElement),
    Framing(ExtendedFraming),
    Field(PolynomialKillingField),
    Grid(ZGrid),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Matrix,
    Loop,
    Dressing,
    Framing,
    Field,
    Grid,
    /// Metrics only.
    Report,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Matrix => "matrix",
            Kind::Loop => "loop",
            Kind::Dressing => "dressing element",
            Kind::Framing => "framing",
            Kind::Field => "Killing field",
            Kind::Grid => "grid",
            Kind::Report => "report",
        }
    }
}

pub struct Output {
    pub value: Option<Value>,
    pub metrics: Json,
    /// Key and content of the full document, printed by the subcommands.
    pub document: Option<(&'static str, Json)>,
    pub csv: Option<String>,
}

impl Output {
    fn report(metrics: Json) -> Self {
        Output {
            value: None,
            metrics,
            document: None,
            csv: None,
        }
    }

    /// Metrics with the document merged in under its key.
    pub fn full_json(&self) -> Json {
        let mut out = self.metrics.clone();
        if let (Some((key, doc)), Json::Object(map)) = (&self.document, &mut out) {
            map.insert((*key).to_string(), doc.clone());
        }
        out
    }
}

fn to_json<T: serde::Serialize>(x: &T) -> Json {
    serde_json::to_value(x).expect("report types serialize")
}

fn framing_metrics(f: &ExtendedFraming) -> CliResult<(Json, Option<String>)> {
    if f.grid.stencils.is_empty() {
        return Ok((json!({ "points": f.grid.len() }), None));
    }
    let rep = framing_residuals(f)?;
    Ok((residual_json(f, &rep), Some(residual_csv(&rep))))
}

fn residual_json(f: &ExtendedFraming, rep: &FramingReport) -> Json {
    json!({
        "points": f.grid.len(),
        "extended_residual": rep.extended_residual,
        "flatness_residual": rep.flatness_residual,
        "flatness_order2": [rep.flatness_order2.0, rep.flatness_order2.1],
        "warning": rep.warning,
    })
}

fn residual_csv(rep: &FramingReport) -> String {
    let mut s = String::from("z_re,z_im,extended,flatness\n");
    for c in &rep.centers {
        s.push_str(&format!("{:e},{:e},{:e},{:e}\n", c.z.re, c.z.im, c.extended, c.flatness));
    }
    s
}

fn framing_output(f: ExtendedFraming) -> CliResult<Output> {
    let (metrics, csv) = framing_metrics(&f)?;
    Ok(Output {
        document: Some(("framing", to_json(&FramingDoc::from_framing(&f)))),
        value: Some(Value::Framing(f)),
        metrics,
        csv,
    })
}

pub fn check(x: &LoopElement) -> Output {
    Output::report(to_json(&x.check_symmetries()))
}

pub fn symes(eta: &LoopElement, grid: &ZGrid) -> CliResult<Output> {
    framing_output(symes_framing(eta, grid)?)
}

pub fn vacuum(s: &Session, a: &CMat, grid: &ZGrid) -> CliResult<Output> {
    let ctx = s.ctx(None)?;
    framing_output(vacuum_framing_grid(&ctx, a, grid)?)
}

pub fn dress(g: &DressingElement, f: &ExtendedFraming) -> CliResult<Output> {
    framing_output(dress_framing(g, f)?)
}

pub fn residuals(f: &ExtendedFraming) -> CliResult<Output> {
    let rep = framing_residuals(f)?;
    Ok(Output {
        value: None,
        metrics: residual_json(f, &rep),
        document: None,
        csv: Some(residual_csv(&rep)),
    })
}

pub fn gauge(f: &ExtendedFraming, fp: &ExtendedFraming, tol: f64) -> CliResult<Output> {
    let rep = gauge_equivalent(f, fp, tol)?;
    Ok(Output::report(json!({
        "equivalent": rep.equivalent,
        "max_leakage": rep.max_leakage,
        "max_unitarity_defect": rep.max_unitarity_defect,
    })))
}

/// Largest coefficient distance between two framings on the same grid.
pub fn compare(f: &ExtendedFraming, fp: &ExtendedFraming) -> CliResult<Output> {
    if !f.grid.same_points(&fp.grid) {
        return Err(loopgroup::Error::Mismatch("framings live on different grids".into()).into());
    }
    let mut d: f64 = 0.0;
    for (a, b) in f.values.iter().zip(&fp.values) {
        d = d.max(a.distance(b)?);
    }
    Ok(Output::report(json!({ "distance": d })))
}

fn band_degree(x: &LoopElement) -> usize {
    x.support().map(|(lo, hi)| (-lo).max(hi).max(1) as usize).unwrap_or(1)
}

fn field_output(field: PolynomialKillingField) -> CliResult<Output> {
    let spec = spectral_invariants(&field)?;
    let d = field.aks.d;
    let (mut band, mut reality, mut twist): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut values = Vec::new();
    for (z, v) in field.grid.points.iter().zip(&field.values) {
        let (b, r, t) = band_defects(v, d);
        band = band.max(b);
        reality = reality.max(r);
        twist = twist.max(t);
        values.push(json!({ "z": [z.re, z.im], "coeffs": to_json(&LoopDoc::from_loop(v).coeffs) }));
    }
    Ok(Output {
        metrics: json!({
            "d": d,
            "points": field.grid.len(),
            "spectral_drift": spec.drift,
            "band_defect": band,
            "reality_defect": reality,
            "twist_defect": twist,
        }),
        document: Some(("values", Json::Array(values))),
        value: Some(Value::Field(field)),
        csv: None,
    })
}

pub fn lax(s: &Session, xi0: &LoopElement, d: Option<usize>, grid: &ZGrid) -> CliResult<Output> {
    let aks = AksStructure::new(&s.algebra, d.unwrap_or_else(|| band_degree(xi0)))?;
    field_output(integrate_killing_field(xi0, &aks, grid)?)
}

pub fn lax_symes(s: &Session, xi0: &LoopElement, d: Option<usize>, grid: &ZGrid) -> CliResult<Output> {
    let aks = AksStructure::new(&s.algebra, d.unwrap_or_else(|| band_degree(xi0)))?;
    field_output(killing_field_via_symes(xi0, &aks, grid)?)
}

pub fn field_compare(a: &PolynomialKillingField, b: &PolynomialKillingField) -> CliResult<Output> {
    Ok(Output::report(json!({ "distance": field_distance(a, b)? })))
}

pub fn ft_test(g: &LoopElement, a: &CMat, d: usize) -> CliResult<Output> {
    let rep = finite_type_witness(g, a, d)?;
    let (verdict, detail) = match &rep.verdict {
        FiniteTypeVerdict::Witness { xi, .. } => ("witness", ("xi", to_json(&LoopDoc::from_loop(xi)))),
        FiniteTypeVerdict::Infeasible { obstruction, .. } => ("infeasible", ("obstruction", to_json(&MatrixDoc::new(obstruction.clone())))),
    };
    Ok(Output {
        value: None,
        metrics: json!({
            "d": d,
            "verdict": verdict,
            "residual": rep.residual,
            "margin_warning": rep.margin_warning,
        }),
        document: Some(detail),
        csv: None,
    })
}

pub fn normalize(s: &Session, x: &CMat) -> CliResult<Output> {
    let (seed, b, rep) = normalize_semisimple(&s.algebra, x)?;
    Ok(Output {
        metrics: json!({
            "commutator": rep.commutator,
            "steps": rep.steps,
            "initial_norm2": rep.norms.first(),
            "final_norm2": rep.norms.last(),
            "b": matrix_to_pairs(&b),
        }),
        document: Some(("A", to_json(&MatrixDoc::new(seed.a.clone())))),
        value: Some(Value::Matrix(seed.a)),
        csv: None,
    })
}

pub fn untangle(eta: &LoopElement) -> CliResult<Output> {
    let u = untangle_to_vacuum(eta)?;
    Ok(Output {
        metrics: to_json(&u.report),
        document: Some(("g", to_json(&LoopDoc::from_loop(&u.g.g)))),
        value: Some(Value::Dressing(u.g)),
        csv: None,
    })
}

pub fn stab(s: &Session, g: &DressingElement, a: &CMat, tol: f64) -> CliResult<Output> {
    let seed = VacuumSeed::new(&s.algebra, a.clone())?;
    Ok(Output::report(to_json(&stabilizer_membership(g, &seed, tol)?)))
}

pub fn flow(s: &Session, g: &DressingElement, zeta: &LoopElement, a: &CMat, t: f64) -> CliResult<Output> {
    let seed = VacuumSeed::new(&s.algebra, a.clone())?;
    let generator = FlowGenerator::new(&seed, zeta.clone())?;
    let h = flow_apply(g, &generator, t)?;
    let check = h.g.check_symmetries();
    Ok(Output {
        metrics: json!({
            "t": t,
            "pole_order": generator.pole_order(),
            "twist_residual": check.twist_residual,
            "negative_mass": h.g.negative_mass(),
            "b_residual": check.b_residual,
        }),
        document: Some(("g", to_json(&LoopDoc::from_loop(&h.g)))),
        value: Some(Value::Dressing(h)),
        csv: None,
    })
}

pub fn rank_probe(s: &Session, g: &DressingElement, a: &CMat, m_max: usize) -> CliResult<Output> {
    let seed = VacuumSeed::new(&s.algebra, a.clone())?;
    let probe = orbit_rank_probe(g, &seed, m_max)?;
    let k = s.algebra.k();
    Ok(Output {
        value: None,
        metrics: json!({
            "ranks": probe.ranks(),
            "stabilized": probe.stabilized,
            "strictly_increasing": probe.strictly_increasing_by_period(k),
            "centralizer_dim": probe.centralizer_dim,
        }),
        document: None,
        csv: Some(probe.as_csv()),
    })
}

pub fn uniton(eta: &LoopElement, tol: f64) -> CliResult<Output> {
    let rep = uniton_classify(eta, tol)?;
    let mut csv = String::from("z,d,tail\n");
    for e in &rep.evidence {
        for (d, t) in e.tails.iter().enumerate() {
            csv.push_str(&format!("{},{d},{t:e}\n", e.z));
        }
    }
    Ok(Output {
        value: None,
        metrics: to_json(&rep),
        document: None,
        csv: Some(csv),
    })
}
