mod error;
mod ops;
mod scenario;
mod session;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use loopgroup::io::{LoopDoc, MatrixDoc};
use loopgroup::random;
use serde_json::Value as Json;

use error::{CliError, CliResult};
use ops::Output;
use scenario::{Overrides, Scenario};
use session::Session;

#[derive(Parser)]
#[command(name = "loopgroup", version, about = "Harmonic maps into k-symmetric spaces via twisted loop groups")]
struct Cli {
    /// Preset (su2, su3-cyclic, su3-projective, su2-group) or TOML descriptor file.
    #[arg(long, global = true, env = "LOOPGROUP_ALGEBRA")]
    algebra: Option<String>,
    /// Radius of the inner circle of the annulus.
    #[arg(long, global = true, env = "LOOPGROUP_EPS")]
    eps: Option<f64>,
    /// Highest stored Fourier mode.
    #[arg(long, global = true, env = "LOOPGROUP_TRUNC")]
    trunc: Option<usize>,
    /// Tolerance for commands that take a yes/no decision.
    #[arg(long, global = true, env = "LOOPGROUP_TOL")]
    tol: Option<f64>,
    /// Write tabular output (residuals, ranks, det tails) to this CSV file.
    #[arg(long, global = true, env = "LOOPGROUP_EMIT_CSV")]
    emit_csv: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, short, global = true, env = "LOOPGROUP_OUTPUT")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RandomKind {
    /// Potential with modes -1..=degree.
    Seed,
    /// Real band-limited potential with modes |n| <= degree.
    RealBand,
    /// Twisted loop with modes -degree..=degree.
    TwistedBand,
    /// Group loop in the dressing subgroup.
    Dressing,
    /// Element of the given grade.
    Graded,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a loop document and print its twist and norm data.
    Check {
        #[arg(long = "loop")]
        path: PathBuf,
    },
    /// Extended framing of the Symes construction exp(z eta) = F b.
    Symes {
        #[arg(long)]
        eta: PathBuf,
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Extended framing of the vacuum with the grade -1 element A.
    Vacuum {
        #[arg(long = "A", visible_alias = "a")]
        a: PathBuf,
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Dress a stored framing by a group loop.
    Dress {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        framing: PathBuf,
    },
    /// Polynomial Killing field of a seed along its Lax flow.
    Lax {
        #[arg(long)]
        seed: PathBuf,
        /// Degree; defaults to the top mode of the seed.
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Also run the Symes route and report the distance between the two.
        #[arg(long)]
        symes: bool,
    },
    /// Decide whether the dressed vacuum g.A is of finite type of degree d.
    FtTest {
        #[arg(long)]
        g: PathBuf,
        #[arg(long = "A", visible_alias = "a")]
        a: PathBuf,
        #[arg(long)]
        d: usize,
    },
    /// Bring a semisimple grade -1 element into the Cartan subalgebra.
    Normalize {
        #[arg(long = "X", visible_alias = "x")]
        x: PathBuf,
    },
    /// Untangle a seed exp(z eta) to a vacuum and print the dressing element.
    Untangle {
        #[arg(long)]
        eta: PathBuf,
    },
    /// Whether g lies in the stabilizer of the vacuum.
    Stab {
        #[arg(long)]
        g: PathBuf,
        #[arg(long = "A", visible_alias = "a")]
        a: PathBuf,
    },
    /// Apply the flow of a centralizer generator to g for time t.
    Flow {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        zeta: PathBuf,
        #[arg(long = "A", visible_alias = "a")]
        a: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
    },
    /// Dimension of the orbit spanned by the first flows.
    RankProbe {
        #[arg(long)]
        g: PathBuf,
        #[arg(long = "A", visible_alias = "a")]
        a: PathBuf,
        #[arg(long, default_value_t = 8)]
        mmax: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Uniton number verdict for a seed.
    Uniton {
        #[arg(long)]
        eta: PathBuf,
    },
    /// Run a TOML scenario and print its report.
    Run {
        scenario: PathBuf,
        /// Seed for random inputs; overrides the scenario.
        #[arg(long, env = "LOOPGROUP_SEED")]
        seed: Option<u64>,
        /// Directory receiving one CSV file per step with tabular output.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// Generate a random input document.
    Random {
        #[arg(value_enum)]
        kind: RandomKind,
        #[arg(long, env = "LOOPGROUP_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        degree: Option<i64>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
        grade: i64,
    },
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Input(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn emit(cli: &Cli, json: &Json, csv: Option<&str>) -> CliResult<()> {
    if let Some(path) = &cli.emit_csv {
        match csv {
            Some(body) => fs::write(path, body).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
            None => eprintln!("warning: this command has no tabular output; {} not written", path.display()),
        }
    }
    write_out(cli.output.as_deref(), &serde_json::to_string_pretty(json).expect("json values print"))
}

fn emit_output(cli: &Cli, out: &Output) -> CliResult<()> {
    emit(cli, &out.full_json(), out.csv.as_deref())
}

fn grid_or_default(s: &Session, path: &Option<PathBuf>) -> CliResult<loopgroup::factorization::ZGrid> {
    match path {
        Some(p) => s.load_grid(p),
        None => Ok(session::default_grid()),
    }
}

fn run(cli: &Cli) -> CliResult<bool> {
    let algebra = cli.algebra.as_deref().map(session::algebra_from_arg).transpose()?;
    if let Command::Run { scenario, seed, csv_dir } = &cli.command {
        let sc = Scenario::load(scenario)?;
        let result = sc.run(Overrides {
            algebra,
            eps: cli.eps,
            trunc: cli.trunc,
            tol: cli.tol,
            seed: *seed,
        })?;
        if let Some(dir) = csv_dir {
            scenario::write_csv(dir, &result.csv)?;
        }
        write_out(cli.output.as_deref(), &serde_json::to_string_pretty(&result.report).expect("json values print"))?;
        return Ok(result.passed);
    }
    let s = Session::new(algebra.unwrap_or_else(loopgroup::lie::GradedLieAlgebra::su2), cli.eps, cli.trunc, cli.tol);
    // Loops are read in the context their document records unless flags override it.
    let load_loop = |p: &Path| -> CliResult<(LoopDoc, loopgroup::loops::Ctx)> {
        let doc = s.loop_doc(p)?;
        let ctx = s.ctx(Some(&doc))?;
        Ok((doc, ctx))
    };
    let out = match &cli.command {
        Command::Check { path } => {
            let (doc, ctx) = load_loop(path)?;
            ops::check(&s.loop_from_doc(&doc, &ctx)?)
        }
        Command::Symes { eta, grid } => {
            let (doc, ctx) = load_loop(eta)?;
            ops::symes(&s.loop_from_doc(&doc, &ctx)?, &grid_or_default(&s, grid)?)?
        }
        Command::Vacuum { a, grid } => ops::vacuum(&s, &s.load_matrix(a)?, &grid_or_default(&s, grid)?)?,
        Command::Dress { g, framing } => {
            let f = s.load_framing(framing)?;
            ops::dress(&s.load_dressing(g, &f.ctx)?, &f)?
        }
        Command::Lax { seed, d, grid, symes } => {
            let (doc, ctx) = load_loop(seed)?;
            let xi0 = s.loop_from_doc(&doc, &ctx)?;
            let grid = grid_or_default(&s, grid)?;
            let mut out = ops::lax(&s, &xi0, *d, &grid)?;
            if *symes {
                let other = ops::lax_symes(&s, &xi0, *d, &grid)?;
                if let (Some(ops::Value::Field(a)), Some(ops::Value::Field(b))) = (&out.value, &other.value) {
                    let cmp = ops::field_compare(a, b)?;
                    if let Json::Object(m) = &mut out.metrics {
                        m.insert("symes_distance".into(), cmp.metrics["distance"].clone());
                    }
                }
            }
            out
        }
        Command::FtTest { g, a, d } => {
            let (doc, ctx) = load_loop(g)?;
            ops::ft_test(&s.loop_from_doc(&doc, &ctx)?, &s.load_matrix(a)?, *d)?
        }
        Command::Normalize { x } => ops::normalize(&s, &s.load_matrix(x)?)?,
        Command::Untangle { eta } => {
            let (doc, ctx) = load_loop(eta)?;
            ops::untangle(&s.loop_from_doc(&doc, &ctx)?)?
        }
        Command::Stab { g, a } => {
            let (_, ctx) = load_loop(g)?;
            ops::stab(&s, &s.load_dressing(g, &ctx)?, &s.load_matrix(a)?, s.tol_or(ops::STAB_TOL))?
        }
        Command::Flow { g, zeta, a, t } => {
            let (_, ctx) = load_loop(g)?;
            let gd = s.load_dressing(g, &ctx)?;
            ops::flow(&s, &gd, &s.load_loop(zeta, &ctx)?, &s.load_matrix(a)?, *t)?
        }
        Command::RankProbe { g, a, mmax, format } => {
            let (_, ctx) = load_loop(g)?;
            let out = ops::rank_probe(&s, &s.load_dressing(g, &ctx)?, &s.load_matrix(a)?, *mmax)?;
            if *format == Format::Csv {
                let csv = out.csv.as_deref().expect("rank probes are tabular");
                if let Some(path) = &cli.emit_csv {
                    fs::write(path, csv).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                }
                write_out(cli.output.as_deref(), csv.trim_end())?;
                return Ok(true);
            }
            out
        }
        Command::Uniton { eta } => {
            let (doc, ctx) = load_loop(eta)?;
            ops::uniton(&s.loop_from_doc(&doc, &ctx)?, s.tol_or(ops::UNITON_TOL))?
        }
        Command::Random {
            kind,
            seed,
            degree,
            scale,
            grade,
        } => {
            let ctx = s.ctx(None)?;
            let mut rng = random::rng(*seed);
            let json = match kind {
                RandomKind::Seed => serde_json::to_value(LoopDoc::from_loop(&random::seed(&mut rng, &ctx, degree.unwrap_or(1), scale.unwrap_or(0.4))?)),
                RandomKind::RealBand => serde_json::to_value(LoopDoc::from_loop(&random::real_band(
                    &mut rng,
                    &ctx,
                    degree.unwrap_or(1),
                    scale.unwrap_or(0.4),
                )?)),
                RandomKind::TwistedBand => {
                    let d = degree.unwrap_or(2);
                    serde_json::to_value(LoopDoc::from_loop(&random::twisted_band(&mut rng, &ctx, -d, d, scale.unwrap_or(1.0))?))
                }
                RandomKind::Dressing => serde_json::to_value(LoopDoc::from_loop(
                    &random::dressing(&mut rng, &ctx, degree.unwrap_or(2), scale.unwrap_or(0.2))?.g,
                )),
                RandomKind::Graded => serde_json::to_value(MatrixDoc::new(random::graded(&mut rng, ctx.algebra(), *grade, scale.unwrap_or(1.0)))),
            }
            .expect("documents serialize");
            emit(cli, &json, None)?;
            return Ok(true);
        }
        Command::Run { .. } => unreachable!("handled above"),
    };
    emit_output(cli, &out)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
