//! Command-line front end: `eval`, `verify`, `decay` and `moments`.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or validation error,
//! 3 insufficient samples. Every output file carries the configuration hash
//! and the master seed.

use crate::collision::{AngularSpec, Collision, Juttner, MomentumFunction};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::kernel::PowerLawKernel;
use crate::macroscopic::{isotropy_defect, lambda_moments, LambdaMoments};
use crate::quadrature::MomentumGrid;
use crate::solver::{run_decay, Solver};
use crate::verify::family::TestFunctionFamily;
use crate::verify::run_verify;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INSUFFICIENT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "relboltz", version, about = "Relativistic Boltzmann collision operators, norms and decay runs")]
pub struct Cli {
    /// TOML run configuration (defaults are used when omitted).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate an operator on the configured momentum grid.
    Eval {
        #[arg(long, value_enum)]
        subject: Subject,
        /// First argument: juttner, sqrt_juttner, zero, null:<0-4> or family:<i>.
        #[arg(long, default_value = "sqrt_juttner")]
        input: String,
        /// Second argument of Q and Γ (defaults to the first).
        #[arg(long)]
        second: Option<String>,
    },
    /// Run the estimate probes and write a JSON report.
    Verify,
    /// Integrate the linearized equation and fit the energy decay.
    Decay {
        /// Also run at doubled resolution and report the change in the rate.
        #[arg(long)]
        refine: bool,
    },
    /// Jüttner normalisation and λ-moments on the configured grid.
    Moments,
}

/// Operator evaluated by `eval`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Q,
    Gamma,
    L,
    N,
    K,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Domain(_) | Error::Io(_) | Error::Serialization(_) => EXIT_USAGE,
        Error::InsufficientSamples(_) => EXIT_INSUFFICIENT,
        _ => EXIT_NUMERICAL,
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    if cli.threads == Some(0) {
        return Err(Error::Validation("--threads must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Validation(e.to_string()))?;
    std::fs::create_dir_all(&config.output_dir)?;
    let ctx = Context { hash: config.hash()?, config };
    pool.install(|| match &cli.command {
        Command::Eval { subject, input, second } => cmd_eval(&ctx, *subject, input, second.as_deref()),
        Command::Verify => cmd_verify(&ctx),
        Command::Decay { refine } => cmd_decay(&ctx, *refine),
        Command::Moments => cmd_moments(&ctx),
    })
}

struct Context {
    config: RunConfig,
    hash: String,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn preamble(&self) -> Vec<String> {
        vec![format!("config_hash={}", self.hash), format!("seed={}", self.config.seed)]
    }

    fn write_json(&self, name: &str, body: serde_json::Value) -> Result<PathBuf> {
        let mut doc = json!({ "config_hash": self.hash, "seed": self.config.seed });
        if let (Some(d), serde_json::Value::Object(b)) = (doc.as_object_mut(), body) {
            d.extend(b);
        }
        let path = self.path(name);
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

fn to_value(v: &impl Serialize) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Serialization(e.to_string()))
}

/// Resolves an input name to a momentum function.
pub fn named_input(name: &str, config: &RunConfig) -> Result<MomentumFunction> {
    let j = Juttner::new();
    let index = |s: &str| s.parse::<usize>().map_err(|_| Error::Validation(format!("bad index in input `{name}`")));
    match name.split_once(':') {
        None => match name {
            "juttner" => Ok(MomentumFunction::juttner(j)),
            "sqrt_juttner" => Ok(MomentumFunction::sqrt_juttner(j)),
            "zero" => Ok(MomentumFunction::zero()),
            _ => Err(Error::Validation(format!("unknown input `{name}`"))),
        },
        Some(("null", i)) => {
            let i = index(i)?;
            if i > 4 {
                return Err(Error::Validation("null-space index must be in 0..=4".into()));
            }
            Ok(MomentumFunction::sqrt_j_times(name, j, move |p| match i {
                0 => 1.0,
                4 => p.p0,
                k => p.p[k - 1],
            }))
        }
        Some(("family", i)) => {
            let i = index(i)?;
            let vc = config.verify_config();
            let family = TestFunctionFamily::new(vc.seed, vc.family_size)?;
            family
                .members
                .get(i)
                .map(|m| m.build())
                .ok_or_else(|| Error::Validation(format!("family has {} members", family.len())))
        }
        _ => Err(Error::Validation(format!("unknown input `{name}`"))),
    }
}

fn cmd_eval(ctx: &Context, subject: Subject, input: &str, second: Option<&str>) -> Result<i32> {
    let cfg = &ctx.config;
    let f = named_input(input, cfg)?;
    let h = match second {
        Some(s) => named_input(s, cfg)?,
        None => f.clone(),
    };
    let kernel = PowerLawKernel::new(cfg.kernel)?;
    let grid = MomentumGrid::new(&cfg.grid)?;
    let angular: &AngularSpec = &cfg.angular;
    let coll = Collision::new(&kernel, &grid, angular)?;
    let values = match subject {
        Subject::Q => coll.on_grid(&grid, |p| coll.q_omega(&f, &h, p))?,
        Subject::Gamma => coll.on_grid(&grid, |p| coll.gamma(&f, &h, p))?,
        Subject::L => coll.on_grid(&grid, |p| coll.linearized(&f, p))?,
        Subject::N => coll.on_grid(&grid, |p| coll.n_apply(&f, p))?,
        Subject::K => coll.on_grid(&grid, |p| coll.k_apply(&f, p))?,
    };
    let name = format!("eval_{}", serde_json::to_value(subject).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
    let csv_path = ctx.path(&format!("{name}.csv"));
    let mut preamble = ctx.preamble();
    preamble.push(format!("subject={subject:?} input={input} second={}", second.unwrap_or(input)));
    write_node_csv(&csv_path, &preamble, &grid, &values)?;
    let max_abs = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let integral = grid.integrate_values(&values)?;
    ctx.write_json(
        &format!("{name}.json"),
        json!({
            "subject": subject,
            "input": input,
            "second": second.unwrap_or(input),
            "nodes": grid.len(),
            "max_abs": max_abs,
            "integral": integral,
            "csv": csv_path,
        }),
    )?;
    println!("{subject:?}({input}) on {} nodes: max |value| = {max_abs:.6e}, integral = {integral:.6e}", grid.len());
    Ok(EXIT_OK)
}

fn write_node_csv(path: &Path, preamble: &[String], grid: &MomentumGrid, values: &[f64]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for line in preamble {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(["p1", "p2", "p3", "p0", "weight", "value"]).map_err(ser)?;
    for ((p, wt), v) in grid.nodes.iter().zip(&grid.weights).zip(values) {
        let row = [p.p[0], p.p[1], p.p[2], p.p0, *wt, *v].map(|x| format!("{x:.15e}"));
        w.write_record(&row).map_err(ser)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_verify(ctx: &Context) -> Result<i32> {
    let report = run_verify(&ctx.config.kernel, &ctx.config.verify_config())?;
    for p in &report.probes {
        let slope = p.slope.map(|s| format!(" slope {s:.4}")).unwrap_or_default();
        println!(
            "{} {:<20} C = {:.4e} (refined {:.4e}){slope}",
            if p.pass { "PASS" } else { "FAIL" },
            p.name,
            p.constant,
            p.constant_refined
        );
        for n in &p.notes {
            println!("     {n}");
        }
    }
    ctx.write_json("verify_report.json", json!({ "report": to_value(&report)? }))?;
    Ok(if report.all_pass { EXIT_OK } else { EXIT_NUMERICAL })
}

fn cmd_decay(ctx: &Context, refine: bool) -> Result<i32> {
    let start = Instant::now();
    let cfg = ctx.config.solver_config();
    let data = ctx.config.initial_data();
    let solver = Solver::new(cfg.clone())?;
    let f0 = data.build(cfg.n_x, cfg.box_length)?;
    let trace = run_decay(&solver, &f0)?;
    let csv_path = ctx.path("decay_trace.csv");
    trace.write_csv(&csv_path, &ctx.preamble())?;
    let lambda = trace.fit.as_ref().map(|f| f.lambda);
    let refined = if refine {
        let rc = cfg.refined();
        let rs = Solver::new(rc.clone())?;
        let rt = run_decay(&rs, &data.build(rc.n_x, rc.box_length)?)?;
        let rl = rt.fit.as_ref().map(|f| f.lambda);
        let change = match (lambda, rl) {
            (Some(a), Some(b)) => Some(((b - a) / a).abs()),
            _ => None,
        };
        Some(json!({ "lambda": rl, "relative_change": change, "wall_seconds": rt.wall_seconds }))
    } else {
        None
    };
    let wall = start.elapsed().as_secs_f64();
    ctx.write_json(
        "decay_meta.json",
        json!({
            "config": to_value(&ctx.config)?,
            "lambda": lambda,
            "r_squared": trace.fit.as_ref().map(|f| f.r_squared),
            "fit": to_value(&trace.fit)?,
            "energy_monotone": trace.energy_monotone(1e-10),
            "max_energy_increase": trace.max_energy_increase,
            "max_conserved": trace.max_conserved,
            "max_residual": trace.max_residual,
            "min_density_ratio": trace.min_density_ratio,
            "coercivity": to_value(&trace.coercivity)?,
            "initial_h_norm": trace.initial_h_norm,
            "steps": trace.records.len() - 1,
            "assembly_seconds": trace.assembly_seconds,
            "wall_seconds": wall,
            "refined": refined,
            "csv": csv_path,
        }),
    )?;
    match &trace.fit {
        Some(f) => println!("λ = {:.6} (R² = {:.6}), ‖f₀‖²_H = {:.4e}, wall {wall:.1} s", f.lambda, f.r_squared, trace.initial_h_norm),
        None => println!("flat trace (‖f₀‖²_H = {:.4e}); no decay fit", trace.initial_h_norm),
    }
    Ok(EXIT_OK)
}

fn cmd_moments(ctx: &Context) -> Result<i32> {
    let grid = MomentumGrid::new(&ctx.config.grid)?;
    let m = lambda_moments(&grid)?;
    let r = LambdaMoments::REFERENCE;
    let pairs = [
        ("total", m.total, r.total),
        ("lambda_0", m.lambda_0, r.lambda_0),
        ("lambda_00", m.lambda_00, r.lambda_00),
        ("lambda_1", m.lambda_1, r.lambda_1),
        ("lambda_10", m.lambda_10, r.lambda_10),
        ("lambda_12", m.lambda_12, r.lambda_12),
        ("lambda_11", m.lambda_11, r.lambda_11),
        ("lambda_100", m.lambda_100, r.lambda_100),
    ];
    let mut errors = serde_json::Map::new();
    for (name, v, reference) in pairs {
        let rel = (v / reference - 1.0).abs();
        println!("{name:<11} {v:.15e}  reference {reference:.15e}  rel {rel:.2e}");
        errors.insert(name.into(), json!(rel));
    }
    let iso = isotropy_defect(&grid)?;
    println!("isotropy defect {iso:.2e}; Z = {:.15}", Juttner::new().z);
    ctx.write_json(
        "moments.json",
        json!({
            "nodes": grid.len(),
            "moments": to_value(&m)?,
            "reference": to_value(&r)?,
            "relative_error": errors,
            "isotropy_defect": iso,
            "z": Juttner::new().z,
        }),
    )?;
    Ok(EXIT_OK)
}
