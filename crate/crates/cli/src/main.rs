use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use siegel::experiments::{self, region_around_points, ExperimentConfig, Scenario};
use siegel::geometry::SiegelPoint;
use siegel::lattice::{build_lattice, min_separation, verify_covering, Lattice};
use siegel::measures::{AtomicMeasure, Measure};
use siegel::quadrature::QuadratureSpec;
use siegel::schatten::{gram_matrix, schatten_norm, spectrum};
use siegel::transforms::{averaging_function, berezin_transform, keylemma_check, lp_lambda_norm, ScalarField};
use siegel::Region;

#[derive(Parser)]
#[command(
    name = "siegel",
    version,
    about = "Bergman-space toolkit on the Siegel upper half-space"
)]
struct Cli {
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Algebraic identities, inequalities and ball volumes.
    Geometry(RunArgs),
    /// Key integral against its closed form, or a single evaluation with `--s` and `--t`.
    Keylemma(KeylemmaArgs),
    /// Schatten, lattice, averaging and Berezin quantities over a measure family.
    Equivalence(RunArgs),
    /// Growth of the Berezin integral of a point mass near the boundary.
    Cutoff(RunArgs),
    /// Eigenvalue trace against the integral of the Berezin transform.
    Trace(RunArgs),
    /// Berezin transform against the averaged measure.
    Domination(RunArgs),
    #[command(subcommand)]
    Lattice(LatticeCommand),
    /// Berezin transform of a measure at points.
    Berezin(PointArgs),
    /// Averaging function of a measure at points.
    Averaging {
        #[command(flatten)]
        at: PointArgs,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
    },
    /// `L^p(dlambda)` norm of the Berezin transform or averaging function of an atomic measure.
    LpNorm(LpNormArgs),
    /// Schatten norms of the Toeplitz operator of an atomic measure.
    Schatten(SchattenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON); scenario defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report destination; overrides the config and defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the per-case records as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct KeylemmaArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, requires_all = ["s", "t"])]
    n: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Point as JSON `[[re, im], ...]`; the base point by default.
    #[arg(long)]
    point: Option<String>,
    #[arg(long, default_value_t = 1)]
    base_levels: usize,
    #[arg(long, default_value_t = 3)]
    tail_levels: usize,
}

#[derive(Subcommand)]
enum LatticeCommand {
    /// Greedy separated net on a region.
    Build {
        /// Region JSON.
        #[arg(long)]
        region: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Covering fraction and separation of a stored lattice.
    Verify {
        #[arg(long)]
        lattice: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct PointArgs {
    /// Measure JSON (atomic or density).
    #[arg(long)]
    measure: PathBuf,
    /// Point as JSON `[[re, im], ...]`; repeatable.
    #[arg(long = "point", required = true)]
    points: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldKind {
    Berezin,
    Averaging,
}

#[derive(Args)]
struct LpNormArgs {
    /// Atomic measure JSON.
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    p: f64,
    #[arg(long, value_enum, default_value_t = FieldKind::Berezin)]
    field: FieldKind,
    #[arg(long, default_value_t = 0.5)]
    r: f64,
    /// Quadrature settings JSON; a region around the atoms by default.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    base_levels: usize,
    #[arg(long, default_value_t = 3)]
    tail_levels: usize,
}

#[derive(Args)]
struct SchattenArgs {
    /// Atomic measure JSON.
    #[arg(long)]
    measure: PathBuf,
    /// Exponent; repeatable.
    #[arg(long = "p", required = true)]
    ps: Vec<f64>,
    /// Include the spectrum and its diagnostics.
    #[arg(long)]
    report: bool,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_point(s: &str) -> Result<SiegelPoint> {
    SiegelPoint::from_json_slice(s.as_bytes()).with_context(|| format!("parsing point {s}"))
}

fn record(inputs: Value, value: Value, error_estimate: Option<f64>, tail_estimate: Option<f64>) -> Value {
    json!({
        "inputs": inputs,
        "value": value,
        "error_estimate": error_estimate,
        "tail_estimate": tail_estimate,
    })
}

fn emit(v: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match out {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_scenario(scenario: Scenario, args: &RunArgs) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_json_slice(&read(p)?).with_context(|| format!("config {}", p.display()))?,
        None => ExperimentConfig::new(scenario),
    };
    if cfg.scenario != scenario {
        bail!(
            "config is for scenario {:?}, not {:?}",
            cfg.scenario.name(),
            scenario.name()
        );
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    let report = experiments::run(&cfg)?;
    for v in &report.verdicts {
        eprintln!(
            "{} {}: {:e} (threshold {:e})",
            if v.passed { "pass" } else { "FAIL" },
            v.name,
            v.measured,
            v.threshold
        );
    }
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    let text = report.to_json_pretty()?;
    match &cfg.output {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    if let Some(p) = &args.csv {
        fs::write(p, report.records_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(report.passed())
}

fn keylemma_single(a: &KeylemmaArgs) -> Result<bool> {
    let (n, s, t) = (a.n.unwrap(), a.s.unwrap(), a.t.unwrap());
    let z = match &a.point {
        Some(p) => parse_point(p)?,
        None => SiegelPoint::base(n),
    };
    if z.dim() != n {
        bail!("point has dimension {}, expected {n}", z.dim());
    }
    let mut spec = QuadratureSpec::new(Region::around(&z, a.base_levels))
        .with_rel_tol(1e-3)
        .with_tail_levels(a.tail_levels);
    spec.panel_ratio = 3.0;
    let c = keylemma_check(&z, s, t, &spec)?;
    emit(
        &record(
            json!({"n": n, "s": s, "t": t, "point": z}),
            json!({"numeric": c.numeric, "closed_form": c.closed_form, "ratio": c.ratio}),
            Some(c.error_estimate),
            c.tail_estimate,
        ),
        a.run.out.as_deref(),
    )?;
    Ok(true)
}

fn point_values(args: &PointArgs, eval: impl Fn(&Measure, &SiegelPoint) -> siegel::Result<f64>) -> Result<Value> {
    let mu = Measure::from_json_slice(&read(&args.measure)?)?;
    let mut out = Vec::new();
    for s in &args.points {
        let z = parse_point(s)?;
        let v = eval(&mu, &z)?;
        out.push(record(json!({"point": z}), json!(v), None, None));
    }
    Ok(Value::Array(out))
}

fn lp_norm(a: &LpNormArgs) -> Result<Value> {
    let mu = AtomicMeasure::from_json_slice(&read(&a.measure)?)?;
    let spec = match &a.spec {
        Some(p) => QuadratureSpec::from_json_slice(&read(p)?)?,
        None => QuadratureSpec::new(region_around_points(mu.n(), &mu.points(), a.base_levels)?)
            .with_tail_levels(a.tail_levels),
    };
    let field = match a.field {
        FieldKind::Berezin => ScalarField::berezin(&mu),
        FieldKind::Averaging => ScalarField::averaging(&mu, a.r),
    };
    let est = lp_lambda_norm(&field, a.p, &spec)?;
    Ok(record(
        json!({"p": a.p, "field": field.label, "region": est.region}),
        json!({"norm": est.norm, "integral": est.integral, "truncated": est.truncated}),
        Some(est.error_estimate),
        est.tail_estimate,
    ))
}

fn schatten(a: &SchattenArgs) -> Result<Value> {
    let mu = AtomicMeasure::from_json_slice(&read(&a.measure)?)?;
    let sp = spectrum(&gram_matrix(&mu)?)?;
    let mut norms = Vec::new();
    for &p in &a.ps {
        norms.push(record(
            json!({"p": p, "atoms": mu.len()}),
            json!(schatten_norm(&sp, p)?),
            None,
            None,
        ));
    }
    if a.report {
        Ok(json!({"norms": norms, "spectrum": sp}))
    } else {
        Ok(Value::Array(norms))
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Geometry(a) => run_scenario(Scenario::Geometry, &a),
        Command::Keylemma(a) if a.s.is_some() || a.t.is_some() => {
            if a.n.is_none() || a.s.is_none() || a.t.is_none() {
                bail!("a single evaluation needs --n, --s and --t");
            }
            keylemma_single(&a)
        }
        Command::Keylemma(a) => run_scenario(Scenario::Keylemma, &a.run),
        Command::Equivalence(a) => run_scenario(Scenario::Equivalence, &a),
        Command::Cutoff(a) => run_scenario(Scenario::Cutoff, &a),
        Command::Trace(a) => run_scenario(Scenario::Trace, &a),
        Command::Domination(a) => run_scenario(Scenario::Domination, &a),
        Command::Lattice(LatticeCommand::Build { region, r, seed, out }) => {
            let region = Region::from_json_slice(&read(&region)?)?;
            let lat = build_lattice(&region, r, seed)?;
            emit(&serde_json::to_value(&lat)?, out.as_deref())?;
            eprintln!("{} points", lat.len());
            Ok(true)
        }
        Command::Lattice(LatticeCommand::Verify { lattice, samples, seed }) => {
            let lat = Lattice::from_json_slice(&read(&lattice)?)?;
            let cov = verify_covering(&lat, samples, seed)?;
            let sep = min_separation(&lat);
            let ok = cov.fraction == 1.0 && sep >= lat.r / 2.0;
            emit(
                &json!({"points": lat.len(), "r": lat.r, "coverage": cov, "min_separation": sep, "valid": ok}),
                None,
            )?;
            Ok(ok)
        }
        Command::Berezin(a) => {
            emit(&point_values(&a, berezin_transform)?, None)?;
            Ok(true)
        }
        Command::Averaging { at, r } => {
            emit(&point_values(&at, |mu, z| averaging_function(mu, z, r))?, None)?;
            Ok(true)
        }
        Command::LpNorm(a) => {
            emit(&lp_norm(&a)?, None)?;
            Ok(true)
        }
        Command::Schatten(a) => {
            emit(&schatten(&a)?, None)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
