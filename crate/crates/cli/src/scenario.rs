//! TOML scenarios: named inputs, an ordered pipeline of steps and assertions on
//! the step metrics. The schema is described in the repository README.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use loopgroup::factorization::ZGrid;
use loopgroup::io::{matrix_from_pairs, CoeffDoc, LoopDoc, FORMAT_VERSION};
use loopgroup::lie::{AlgebraDescriptor, GradedLieAlgebra};
use loopgroup::linalg::c;
use loopgroup::loops::{Ctx, Flavor};
use loopgroup::random;
use serde::Deserialize;
use serde_json::{json, Value as Json};

use crate::error::{CliError, CliResult};
use crate::ops::{self, Kind, Output, Value};
use crate::session::{self, Session};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: u32,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    algebra: Option<toml::Value>,
    #[serde(default)]
    eps: Option<f64>,
    #[serde(default)]
    trunc: Option<usize>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    grid: Option<GridSpec>,
    #[serde(default)]
    inputs: BTreeMap<String, InputSpec>,
    #[serde(default, rename = "step")]
    steps: Vec<StepSpec>,
    #[serde(default, rename = "assert")]
    asserts: Vec<AssertSpec>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    #[serde(default)]
    points: Vec<[f64; 2]>,
    #[serde(default)]
    stencils: Vec<StencilSpec>,
    /// Ring of `resolution` points at this radius.
    #[serde(default)]
    radius: Option<f64>,
    #[serde(default)]
    resolution: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StencilSpec {
    center: [f64; 2],
    h: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffSpec {
    n: i64,
    matrix: Vec<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputSpec {
    #[serde(default)]
    matrix: Option<Vec<[f64; 2]>>,
    #[serde(default, rename = "loop")]
    coeffs: Option<Vec<CoeffSpec>>,
    #[serde(default)]
    flavor: Option<Flavor>,
    /// Treat a group loop as an element acting by dressing.
    #[serde(default)]
    dressing: Option<bool>,
    #[serde(default)]
    file: Option<PathBuf>,
    /// Kind of the value stored in `file`.
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    random: Option<String>,
    #[serde(default)]
    degree: Option<i64>,
    #[serde(default)]
    scale: Option<f64>,
    #[serde(default)]
    grade: Option<i64>,
    #[serde(default)]
    grid: Option<GridSpec>,
}

#[derive(Debug, Deserialize)]
struct StepSpec {
    op: String,
    #[serde(default)]
    out: Option<String>,
    /// Spread grid points over all cores; steps run on one thread otherwise.
    #[serde(default)]
    parallel: bool,
    #[serde(flatten)]
    args: BTreeMap<String, toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssertSpec {
    /// `name.field[.field...]`; array entries are addressed by index.
    value: String,
    #[serde(default)]
    lt: Option<f64>,
    #[serde(default)]
    le: Option<f64>,
    #[serde(default)]
    gt: Option<f64>,
    #[serde(default)]
    ge: Option<f64>,
    #[serde(default)]
    eq: Option<toml::Value>,
}

struct OpSpec {
    name: &'static str,
    refs: &'static [(&'static str, &'static [Kind], bool)],
    params: &'static [(&'static str, Param, bool)],
    out: Kind,
}

#[derive(Clone, Copy)]
enum Param {
    Real,
    Count,
}

use Kind::*;

const OPS: &[OpSpec] = &[
    OpSpec {
        name: "check",
        refs: &[("x", &[Loop, Dressing], true)],
        params: &[],
        out: Report,
    },
    OpSpec {
        name: "symes",
        refs: &[("eta", &[Loop], true), ("grid", &[Grid], false)],
        params: &[],
        out: Framing,
    },
    OpSpec {
        name: "vacuum",
        refs: &[("A", &[Matrix], true), ("grid", &[Grid], false)],
        params: &[],
        out: Framing,
    },
    OpSpec {
        name: "dress",
        refs: &[("g", &[Dressing], true), ("framing", &[Framing], true)],
        params: &[],
        out: Framing,
    },
    OpSpec {
        name: "residuals",
        refs: &[("framing", &[Framing], true)],
        params: &[],
        out: Report,
    },
    OpSpec {
        name: "gauge",
        refs: &[("a", &[Framing], true), ("b", &[Framing], true)],
        params: &[("tol", Param::Real, false)],
        out: Report,
    },
    OpSpec {
        name: "compare",
        refs: &[("a", &[Framing], true), ("b", &[Framing], true)],
        params: &[],
        out: Report,
    },
    OpSpec {
        name: "lax",
        refs: &[("seed", &[Loop], true), ("grid", &[Grid], false)],
        params: &[("d", Param::Count, false)],
        out: Field,
    },
    OpSpec {
        name: "lax-symes",
        refs: &[("seed", &[Loop], true), ("grid", &[Grid], false)],
        params: &[("d", Param::Count, false)],
        out: Field,
    },
    OpSpec {
        name: "field-compare",
        refs: &[("a", &[Field], true), ("b", &[Field], true)],
        params: &[],
        out: Report,
    },
    OpSpec {
        name: "ft-test",
        refs: &[("g", &[Dressing, Loop], true), ("A", &[Matrix], true)],
        params: &[("d", Param::Count, true)],
        out: Report,
    },
    OpSpec {
        name: "normalize",
        refs: &[("X", &[Matrix], true)],
        params: &[],
        out: Matrix,
    },
    OpSpec {
        name: "untangle",
        refs: &[("eta", &[Loop], true)],
        params: &[],
        out: Dressing,
    },
    OpSpec {
        name: "stab",
        refs: &[("g", &[Dressing], true), ("A", &[Matrix], true)],
        params: &[("tol", Param::Real, false)],
        out: Report,
    },
    OpSpec {
        name: "flow",
        refs: &[("g", &[Dressing], true), ("zeta", &[Loop], true), ("A", &[Matrix], true)],
        params: &[("t", Param::Real, true)],
        out: Dressing,
    },
    OpSpec {
        name: "rank-probe",
        refs: &[("g", &[Dressing], true), ("A", &[Matrix], true)],
        params: &[("mmax", Param::Count, false)],
        out: Report,
    },
    OpSpec {
        name: "uniton",
        refs: &[("eta", &[Loop], true)],
        params: &[("tol", Param::Real, false)],
        out: Report,
    },
];

pub fn op_names() -> Vec<&'static str> {
    OPS.iter().map(|o| o.name).collect()
}

enum Source {
    Matrix(Vec<[f64; 2]>),
    Loop(Vec<CoeffSpec>, Flavor),
    File(PathBuf, Kind),
    Random {
        what: String,
        degree: Option<i64>,
        scale: Option<f64>,
        grade: Option<i64>,
    },
    Grid(GridSpec),
}

struct Input {
    name: String,
    source: Source,
    kind: Kind,
}

struct Step {
    name: String,
    parallel: bool,
    op: &'static OpSpec,
    refs: BTreeMap<&'static str, String>,
    params: BTreeMap<&'static str, f64>,
}

enum Comparison {
    Lt(f64),
    Le(f64),
    Gt(f64),
    Ge(f64),
    Eq(Json),
}

struct Assertion {
    path: String,
    cmp: Comparison,
}

/// A validated scenario.
pub struct Scenario {
    name: String,
    description: Option<String>,
    dir: PathBuf,
    algebra: Option<GradedLieAlgebra>,
    eps: Option<f64>,
    trunc: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
    grid: Option<GridSpec>,
    inputs: Vec<Input>,
    steps: Vec<Step>,
    asserts: Vec<Assertion>,
}

fn schema(errors: Vec<String>) -> CliError {
    CliError::Input(format!("scenario schema errors:\n  {}", errors.join("\n  ")))
}

fn parse_algebra(v: &toml::Value) -> Result<GradedLieAlgebra, String> {
    if let Some(t) = v.as_table() {
        if let Some(p) = t.get("preset") {
            if t.len() != 1 {
                return Err("algebra: 'preset' cannot be combined with other keys".into());
            }
            let name = p.as_str().ok_or("algebra.preset must be a string")?;
            return session::preset(name).ok_or_else(|| format!("algebra: unknown preset '{name}' (known: {})", session::PRESETS.join(", ")));
        }
    }
    let d: AlgebraDescriptor = v.clone().try_into().map_err(|e| format!("algebra: {e}"))?;
    GradedLieAlgebra::from_descriptor(&d).map_err(|e| format!("algebra: {e}"))
}

fn validate_grid(g: &GridSpec, what: &str, errors: &mut Vec<String>) {
    match (g.radius, g.resolution) {
        (Some(r), Some(m)) if r > 0.0 && m > 0 => {}
        (None, None) => {}
        _ => errors.push(format!("{what}: 'radius' and 'resolution' must be given together and be positive")),
    }
    for s in &g.stencils {
        if !(s.h > 0.0) {
            errors.push(format!("{what}: stencil spacing must be positive"));
        }
    }
}

fn build_grid(g: &GridSpec) -> ZGrid {
    let mut points: Vec<_> = g.points.iter().map(|p| c(p[0], p[1])).collect();
    if let (Some(r), Some(m)) = (g.radius, g.resolution) {
        for j in 0..m {
            points.push(loopgroup::linalg::C64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / m as f64));
        }
    }
    let mut grid = ZGrid::new(&points);
    for s in &g.stencils {
        grid.add_stencil(c(s.center[0], s.center[1]), s.h);
    }
    grid
}

fn kind_from_name(s: &str) -> Option<Kind> {
    Some(match s {
        "matrix" => Matrix,
        "loop" => Loop,
        "dressing" => Dressing,
        "grid" => Grid,
        "framing" => Framing,
        _ => return None,
    })
}

fn input_source(name: &str, spec: InputSpec, errors: &mut Vec<String>) -> Option<(Source, Kind)> {
    let given = [
        spec.matrix.is_some(),
        spec.coeffs.is_some(),
        spec.file.is_some(),
        spec.random.is_some(),
        spec.grid.is_some(),
    ];
    if given.iter().filter(|g| **g).count() != 1 {
        errors.push(format!("input '{name}': give exactly one of matrix, loop, file, random, grid"));
        return None;
    }
    let dressing = spec.dressing.unwrap_or(false);
    if let Some(m) = spec.matrix {
        return Some((Source::Matrix(m), Matrix));
    }
    if let Some(coeffs) = spec.coeffs {
        let flavor = spec.flavor.unwrap_or(if dressing { Flavor::Group } else { Flavor::Algebra });
        if dressing && flavor != Flavor::Group {
            errors.push(format!("input '{name}': a dressing element must be a group loop"));
        }
        return Some((Source::Loop(coeffs, flavor), if dressing { Dressing } else { Loop }));
    }
    if let Some(file) = spec.file {
        let Some(kind) = spec.kind.as_deref().and_then(kind_from_name) else {
            errors.push(format!("input '{name}': file inputs need kind = matrix | loop | dressing | grid | framing"));
            return None;
        };
        return Some((Source::File(file, kind), kind));
    }
    if let Some(g) = spec.grid {
        validate_grid(&g, &format!("input '{name}'"), errors);
        return Some((Source::Grid(g), Grid));
    }
    let what = spec.random.unwrap_or_default();
    let kind = match what.as_str() {
        "seed" | "real-band" | "twisted-band" => Loop,
        "dressing" => Dressing,
        "graded" | "traceless" => Matrix,
        other => {
            errors.push(format!("input '{name}': unknown random kind '{other}'"));
            return None;
        }
    };
    if spec.scale.is_some_and(|s| !(s >= 0.0)) {
        errors.push(format!("input '{name}': scale must be non-negative"));
    }
    if spec.degree.is_some_and(|d| d < 1) {
        errors.push(format!("input '{name}': degree must be at least 1"));
    }
    Some((
        Source::Random {
            what,
            degree: spec.degree,
            scale: spec.scale,
            grade: spec.grade,
        },
        kind,
    ))
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = session::read(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, dir)
    }

    pub fn parse(text: &str, dir: PathBuf) -> CliResult<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Input(format!("scenario: {e}")))?;
        let mut errors = Vec::new();
        if file.version != FORMAT_VERSION {
            errors.push(format!("unsupported scenario version {}", file.version));
        }
        let algebra = match &file.algebra {
            Some(v) => match parse_algebra(v) {
                Ok(a) => Some(a),
                Err(e) => {
                    errors.push(e);
                    None
                }
            },
            None => None,
        };
        if let Some(e) = file.eps {
            if !(e > 0.0 && e < 1.0) {
                errors.push(format!("eps = {e} is outside (0, 1)"));
            }
        }
        if let Some(g) = &file.grid {
            validate_grid(g, "grid", &mut errors);
        }
        let mut kinds: BTreeMap<String, Kind> = BTreeMap::new();
        let mut inputs = Vec::new();
        for (name, spec) in file.inputs {
            if let Some((source, kind)) = input_source(&name, spec, &mut errors) {
                kinds.insert(name.clone(), kind);
                inputs.push(Input { name, source, kind });
            }
        }
        let mut steps = Vec::new();
        for (i, s) in file.steps.into_iter().enumerate() {
            let label = format!("step {} ({})", i + 1, s.op);
            let Some(op) = OPS.iter().find(|o| o.name == s.op) else {
                errors.push(format!("step {}: unknown op '{}' (known: {})", i + 1, s.op, op_names().join(", ")));
                continue;
            };
            let name = s.out.clone().unwrap_or_else(|| format!("step{}", i + 1));
            let mut refs = BTreeMap::new();
            let mut params = BTreeMap::new();
            for key in s.args.keys() {
                if !op.refs.iter().any(|r| r.0 == key) && !op.params.iter().any(|p| p.0 == key) {
                    errors.push(format!("{label}: unexpected argument '{key}'"));
                }
            }
            for (arg, accepted, required) in op.refs {
                match s.args.get(*arg) {
                    Some(toml::Value::String(target)) => match kinds.get(target) {
                        None => errors.push(format!("{label}: '{arg}' refers to '{target}', which is not defined before this step")),
                        Some(k) if !accepted.contains(k) => errors.push(format!(
                            "{label}: '{arg}' needs a {}, but '{target}' is a {}",
                            accepted.iter().map(|k| k.name()).collect::<Vec<_>>().join(" or "),
                            k.name()
                        )),
                        Some(_) => {
                            refs.insert(*arg, target.clone());
                        }
                    },
                    Some(_) => errors.push(format!("{label}: '{arg}' must name an input or an earlier step")),
                    None if *required => errors.push(format!("{label}: missing argument '{arg}'")),
                    None => {}
                }
            }
            for (arg, kind, required) in op.params {
                let v = match s.args.get(*arg) {
                    Some(toml::Value::Float(x)) => Some(*x),
                    Some(toml::Value::Integer(x)) => Some(*x as f64),
                    Some(_) => {
                        errors.push(format!("{label}: '{arg}' must be a number"));
                        continue;
                    }
                    None => None,
                };
                match (v, kind) {
                    (Some(x), Param::Count) if x < 1.0 || x.fract() != 0.0 => errors.push(format!("{label}: '{arg}' must be a positive integer")),
                    (Some(x), Param::Real) if !x.is_finite() => errors.push(format!("{label}: '{arg}' must be finite")),
                    (Some(x), _) => {
                        params.insert(*arg, x);
                    }
                    (None, _) if *required => errors.push(format!("{label}: missing parameter '{arg}'")),
                    (None, _) => {}
                }
            }
            if kinds.contains_key(&name) {
                errors.push(format!("{label}: name '{name}' is already defined"));
            }
            kinds.insert(name.clone(), op.out);
            steps.push(Step {
                name,
                parallel: s.parallel,
                op,
                refs,
                params,
            });
        }
        let mut asserts = Vec::new();
        for (i, a) in file.asserts.into_iter().enumerate() {
            let head = a.value.split('.').next().unwrap_or_default();
            if !steps.iter().any(|s| s.name == head) {
                errors.push(format!("assertion {}: '{}' does not start with a step name", i + 1, a.value));
            }
            let mut cmps = Vec::new();
            if let Some(x) = a.lt {
                cmps.push(Comparison::Lt(x));
            }
            if let Some(x) = a.le {
                cmps.push(Comparison::Le(x));
            }
            if let Some(x) = a.gt {
                cmps.push(Comparison::Gt(x));
            }
            if let Some(x) = a.ge {
                cmps.push(Comparison::Ge(x));
            }
            if let Some(x) = a.eq {
                cmps.push(Comparison::Eq(serde_json::to_value(x).expect("toml values serialize")));
            }
            if cmps.len() != 1 {
                errors.push(format!("assertion {}: give exactly one of lt, le, gt, ge, eq", i + 1));
                continue;
            }
            asserts.push(Assertion {
                path: a.value,
                cmp: cmps.pop().unwrap(),
            });
        }
        if !errors.is_empty() {
            return Err(schema(errors));
        }
        Ok(Scenario {
            name: file.name.unwrap_or_else(|| "scenario".into()),
            description: file.description,
            dir,
            algebra,
            eps: file.eps,
            trunc: file.trunc,
            tol: file.tol,
            seed: file.seed,
            grid: file.grid,
            inputs,
            steps,
            asserts,
        })
    }
}

/// Overrides from the command line; they take precedence over the file.
#[derive(Default)]
pub struct Overrides {
    pub algebra: Option<GradedLieAlgebra>,
    pub eps: Option<f64>,
    pub trunc: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

pub struct RunResult {
    pub report: Json,
    pub passed: bool,
    /// `(step name, csv)` for steps that produce tabular data.
    pub csv: Vec<(String, String)>,
}

fn load_input(s: &Session, ctx: &Ctx, dir: &Path, input: &Input, rng: &mut random::SeededRng) -> CliResult<Value> {
    let alg = ctx.algebra();
    Ok(match &input.source {
        Source::Matrix(pairs) => {
            let m = matrix_from_pairs(pairs).map_err(|e| CliError::Input(format!("input '{}': {e}", input.name)))?;
            s.check_matrix(&m)?;
            Value::Matrix(m)
        }
        Source::Loop(coeffs, flavor) => {
            let doc = LoopDoc {
                version: FORMAT_VERSION,
                flavor: *flavor,
                eps: ctx.eps(),
                trunc: Some(ctx.trunc()),
                coeffs: coeffs
                    .iter()
                    .map(|c| {
                        matrix_from_pairs(&c.matrix)
                            .map(|matrix| CoeffDoc { n: c.n, matrix })
                            .map_err(|e| CliError::Input(format!("input '{}': {e}", input.name)))
                    })
                    .collect::<CliResult<_>>()?,
            };
            let x = s
                .loop_from_doc(&doc, ctx)
                .map_err(|e| CliError::Input(format!("input '{}': {e}", input.name)))?;
            if input.kind == Dressing {
                Value::Dressing(
                    loopgroup::factorization::DressingElement::new(x, None, true).map_err(|e| CliError::Input(format!("input '{}': {e}", input.name)))?,
                )
            } else {
                Value::Loop(x)
            }
        }
        Source::File(path, kind) => {
            let path = if path.is_absolute() { path.clone() } else { dir.join(path) };
            match kind {
                Matrix => Value::Matrix(s.load_matrix(&path)?),
                Loop => Value::Loop(s.load_loop(&path, ctx)?),
                Dressing => Value::Dressing(s.load_dressing(&path, ctx)?),
                Grid => Value::Grid(s.load_grid(&path)?),
                Framing => Value::Framing(s.load_framing(&path)?),
                Field | Report => unreachable!("not a file kind"),
            }
        }
        Source::Grid(g) => Value::Grid(build_grid(g)),
        Source::Random { what, degree, scale, grade } => match what.as_str() {
            "seed" => Value::Loop(random::seed(rng, ctx, degree.unwrap_or(1), scale.unwrap_or(0.4))?),
            "real-band" => Value::Loop(random::real_band(rng, ctx, degree.unwrap_or(1), scale.unwrap_or(0.4))?),
            "twisted-band" => {
                let d = degree.unwrap_or(2);
                Value::Loop(random::twisted_band(rng, ctx, -d, d, scale.unwrap_or(1.0))?)
            }
            "dressing" => Value::Dressing(random::dressing(rng, ctx, degree.unwrap_or(2), scale.unwrap_or(0.2))?),
            "graded" => Value::Matrix(random::graded(rng, alg, grade.unwrap_or(-1), scale.unwrap_or(1.0))),
            "traceless" => Value::Matrix(random::traceless(rng, alg.n(), scale.unwrap_or(1.0))),
            _ => unreachable!("validated"),
        },
    })
}

fn execute(s: &Session, step: &Step, values: &BTreeMap<String, Value>, default_grid: &ZGrid) -> CliResult<Output> {
    let get = |arg: &str| -> CliResult<&Value> {
        let target = &step.refs[arg];
        values
            .get(target)
            .ok_or_else(|| loopgroup::Error::Domain(format!("'{target}' is unavailable because an earlier step failed")).into())
    };
    let opt_grid = || -> CliResult<&ZGrid> {
        match step.refs.get("grid") {
            Some(_) => match get("grid")? {
                Value::Grid(g) => Ok(g),
                _ => unreachable!(),
            },
            None => Ok(default_grid),
        }
    };
    macro_rules! arg {
        ($name:expr, $variant:ident) => {
            match get($name)? {
                Value::$variant(x) => x,
                _ => unreachable!("kinds are validated"),
            }
        };
    }
    let param = |name: &str| step.params.get(name).copied();
    let count = |name: &str| param(name).map(|x| x as usize);
    match step.op.name {
        "check" => Ok(match get("x")? {
            Value::Loop(x) => ops::check(x),
            Value::Dressing(g) => ops::check(&g.g),
            _ => unreachable!(),
        }),
        "symes" => ops::symes(arg!("eta", Loop), opt_grid()?),
        "vacuum" => ops::vacuum(s, arg!("A", Matrix), opt_grid()?),
        "dress" => ops::dress(arg!("g", Dressing), arg!("framing", Framing)),
        "residuals" => ops::residuals(arg!("framing", Framing)),
        "gauge" => ops::gauge(arg!("a", Framing), arg!("b", Framing), param("tol").unwrap_or(s.tol_or(ops::GAUGE_TOL))),
        "compare" => ops::compare(arg!("a", Framing), arg!("b", Framing)),
        "lax" => ops::lax(s, arg!("seed", Loop), count("d"), opt_grid()?),
        "lax-symes" => ops::lax_symes(s, arg!("seed", Loop), count("d"), opt_grid()?),
        "field-compare" => ops::field_compare(arg!("a", Field), arg!("b", Field)),
        "ft-test" => {
            let g = match get("g")? {
                Value::Loop(x) => x,
                Value::Dressing(g) => &g.g,
                _ => unreachable!(),
            };
            ops::ft_test(g, arg!("A", Matrix), count("d").expect("required"))
        }
        "normalize" => ops::normalize(s, arg!("X", Matrix)),
        "untangle" => ops::untangle(arg!("eta", Loop)),
        "stab" => ops::stab(s, arg!("g", Dressing), arg!("A", Matrix), param("tol").unwrap_or(s.tol_or(ops::STAB_TOL))),
        "flow" => ops::flow(s, arg!("g", Dressing), arg!("zeta", Loop), arg!("A", Matrix), param("t").expect("required")),
        "rank-probe" => ops::rank_probe(s, arg!("g", Dressing), arg!("A", Matrix), count("mmax").unwrap_or(8)),
        "uniton" => ops::uniton(arg!("eta", Loop), param("tol").unwrap_or(s.tol_or(ops::UNITON_TOL))),
        other => unreachable!("unknown op {other}"),
    }
}

fn lookup<'a>(metrics: &'a BTreeMap<String, Json>, path: &str) -> Option<&'a Json> {
    let mut parts = path.split('.');
    let mut cur = metrics.get(parts.next()?)?;
    for p in parts {
        cur = match cur {
            Json::Object(m) => m.get(p)?,
            Json::Array(a) => a.get(p.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    Some(cur)
}

fn check(cmp: &Comparison, actual: Option<&Json>) -> bool {
    let Some(actual) = actual else { return false };
    let num = actual.as_f64();
    match cmp {
        Comparison::Lt(x) => num.is_some_and(|v| v < *x),
        Comparison::Le(x) => num.is_some_and(|v| v <= *x),
        Comparison::Gt(x) => num.is_some_and(|v| v > *x),
        Comparison::Ge(x) => num.is_some_and(|v| v >= *x),
        Comparison::Eq(want) => match (num, want.as_f64()) {
            (Some(a), Some(b)) => a == b,
            _ => actual == want,
        },
    }
}

fn describe(cmp: &Comparison) -> (&'static str, Json) {
    match cmp {
        Comparison::Lt(x) => ("lt", json!(x)),
        Comparison::Le(x) => ("le", json!(x)),
        Comparison::Gt(x) => ("gt", json!(x)),
        Comparison::Ge(x) => ("ge", json!(x)),
        Comparison::Eq(x) => ("eq", x.clone()),
    }
}

impl Scenario {
    pub fn run(&self, over: Overrides) -> CliResult<RunResult> {
        let algebra = over.algebra.or_else(|| self.algebra.clone()).unwrap_or_else(GradedLieAlgebra::su2);
        let s = Session::new(algebra, over.eps.or(self.eps), over.trunc.or(self.trunc), over.tol.or(self.tol));
        let ctx = s.ctx(None)?;
        let seed = over.seed.or(self.seed).unwrap_or(0);
        let mut rng = random::rng(seed);
        let default_grid = self.grid.as_ref().map(build_grid).unwrap_or_else(session::default_grid);

        let mut values = BTreeMap::new();
        for input in &self.inputs {
            values.insert(input.name.clone(), load_input(&s, &ctx, &self.dir, input, &mut rng)?);
        }

        let mut metrics = BTreeMap::new();
        let mut step_reports = Vec::new();
        let mut timings = Vec::new();
        let mut csv = Vec::new();
        let mut steps_ok = true;
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
        for step in &self.steps {
            let start = Instant::now();
            let result = if step.parallel {
                execute(&s, step, &values, &default_grid)
            } else {
                serial.install(|| execute(&s, step, &values, &default_grid))
            };
            timings.push(json!({ "step": step.name, "seconds": start.elapsed().as_secs_f64() }));
            match result {
                Ok(out) => {
                    if let Some(v) = out.value {
                        values.insert(step.name.clone(), v);
                    }
                    if let Some(c) = out.csv {
                        csv.push((step.name.clone(), c));
                    }
                    step_reports.push(json!({ "name": step.name, "op": step.op.name, "ok": true, "metrics": out.metrics }));
                    metrics.insert(step.name.clone(), out.metrics);
                }
                Err(e) => {
                    steps_ok = false;
                    step_reports.push(json!({ "name": step.name, "op": step.op.name, "ok": false, "error": e.to_string() }));
                }
            }
        }

        let mut assertions = Vec::new();
        let mut asserts_ok = true;
        for a in &self.asserts {
            let actual = lookup(&metrics, &a.path);
            let pass = check(&a.cmp, actual);
            asserts_ok &= pass;
            let (op, expected) = describe(&a.cmp);
            assertions.push(json!({ "value": a.path, op: expected, "actual": actual, "pass": pass }));
        }
        let passed = steps_ok && asserts_ok;
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let report = json!({
            "version": FORMAT_VERSION,
            "scenario": self.name,
            "description": self.description,
            "algebra": s.algebra.descriptor(),
            "eps": ctx.eps(),
            "trunc": ctx.trunc(),
            "seed": seed,
            "steps": step_reports,
            "assertions": assertions,
            "passed": passed,
            "meta": { "timestamp": timestamp, "timings": timings },
        });
        Ok(RunResult { report, passed, csv })
    }
}

/// Writes `<dir>/<step>.csv` for every step with tabular output.
pub fn write_csv(dir: &Path, csv: &[(String, String)]) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    for (name, body) in csv {
        let path = dir.join(format!("{name}.csv"));
        fs::write(&path, body).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> CliResult<Scenario> {
        Scenario::parse(text, PathBuf::new())
    }

    #[test]
    fn paths_descend_objects_and_arrays() {
        let mut m = BTreeMap::new();
        m.insert("r".to_string(), json!({ "ranks": [0, 2, 4], "v": { "verdict": "finite" } }));
        assert_eq!(lookup(&m, "r.ranks.2"), Some(&json!(4)));
        assert_eq!(lookup(&m, "r.v.verdict"), Some(&json!("finite")));
        assert_eq!(lookup(&m, "r.ranks.7"), None);
        assert_eq!(lookup(&m, "q"), None);
    }

    #[test]
    fn comparisons() {
        assert!(check(&Comparison::Lt(1.0), Some(&json!(0.5))));
        assert!(!check(&Comparison::Lt(1.0), Some(&json!(1.0))));
        assert!(check(&Comparison::Le(1.0), Some(&json!(1.0))));
        assert!(check(&Comparison::Eq(json!(2.0)), Some(&json!(2))));
        assert!(check(&Comparison::Eq(json!(true)), Some(&json!(true))));
        assert!(!check(&Comparison::Gt(0.0), Some(&json!("x"))));
        assert!(!check(&Comparison::Ge(0.0), None));
    }

    #[test]
    fn step_names_must_be_unique_and_known() {
        let err = parse("version = 1\n[inputs.A]\nmatrix = [[0,0],[1,0],[-1,0],[0,0]]\n[[step]]\nop = \"normalize\"\nout = \"A\"\nX = \"A\"\n")
            .err()
            .unwrap();
        assert!(err.to_string().contains("already defined"));
        let err = parse("version = 1\n[[assert]]\nvalue = \"nope.x\"\nlt = 1\n").err().unwrap();
        assert!(err.to_string().contains("step name"));
    }

    #[test]
    fn assertions_need_one_comparison() {
        let text = "version = 1\n[inputs.A]\nmatrix = [[0,0],[1,0],[-1,0],[0,0]]\n[[step]]\nop = \"normalize\"\nout = \"n\"\nX = \"A\"\n\
                    [[assert]]\nvalue = \"n.steps\"\nlt = 1\ngt = 0\n";
        assert!(parse(text).err().unwrap().to_string().contains("exactly one"));
    }

    #[test]
    fn counts_must_be_positive_integers() {
        let text = "version = 1\n[inputs.g]\nrandom = \"dressing\"\n[inputs.A]\nmatrix = [[0,0],[1,0],[-1,0],[0,0]]\n\
                    [[step]]\nop = \"rank-probe\"\ng = \"g\"\nA = \"A\"\nmmax = 2.5\n";
        assert!(parse(text).err().unwrap().to_string().contains("positive integer"));
    }

    #[test]
    fn inputs_take_exactly_one_source() {
        let text = "version = 1\n[inputs.x]\nmatrix = [[1,0]]\nrandom = \"seed\"\n";
        assert!(parse(text).err().unwrap().to_string().contains("exactly one"));
        assert!(parse("version = 1\n[inputs.x]\nrandom = \"banana\"\n").is_err());
    }

    #[test]
    fn ring_grids() {
        let g = build_grid(&GridSpec {
            radius: Some(0.5),
            resolution: Some(4),
            stencils: vec![StencilSpec { center: [0.1, 0.0], h: 1e-3 }],
            ..Default::default()
        });
        assert_eq!(g.stencils.len(), 1);
        assert!(g.points.iter().any(|p| (p - c(0.0, 0.5)).norm() < 1e-15));
    }
}
