mod config;
mod error;
mod suites;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use refldiff_core::ReportDocument;

use config::{Experiment, Family, Overrides, RawConfig, SchemeChoice, Suite};
use error::CliError;

/// Diffusions reflected inside Euclidean and hyperbolic spheres: laws,
/// simulation, PDE checks and Monte Carlo validation.
#[derive(Parser)]
#[command(name = "refldiff", version)]
struct Cli {
    /// Worker threads; falls back to REFLDIFF_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites listed in a TOML config.
    Run {
        config: PathBuf,
    },
    /// Simulate paths and write them as CSV (or binary for a .bin target).
    Simulate(ModelArgs),
    /// Tabulate r, kernel, density and cdf at time t.
    Law(ModelArgs),
    /// Check the Cauchy problems and the Neumann condition.
    PdeCheck(ModelArgs),
    /// Simulate and compare against the closed-form laws.
    Validate(ModelArgs),
    /// Compare u_{d+2} from the closed form with the Millson lift of u_d.
    Millson(MillsonArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Start from this config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Reflection radius (R, S or V).
    #[arg(long, visible_aliases = ["R", "S", "V"])]
    radius: Option<f64>,
    /// Final time.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    /// Time step.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeChoice>,
    /// Rows in the law table.
    #[arg(long)]
    points: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MillsonArgs {
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 3)]
    from_d: usize,
    /// Write a JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("refldiff: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("REFLDIFF_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("invalid parameter `threads`: REFLDIFF_THREADS = {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::Config("invalid parameter `threads`: must be at least 1".into()));
    }
    Ok(n)
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("invalid parameter `threads`: {e}")))?;
    }
    match cli.command {
        Command::Run { config } => {
            let exp = Experiment::resolve(RawConfig::load(&config)?, true)?;
            finish(&exp, "run", &mut std::io::stdout())
        }
        Command::Simulate(a) => single(a, Suite::Simulate, "simulate"),
        Command::Law(a) => single(a, Suite::Law, "law"),
        Command::PdeCheck(a) => single(a, Suite::Pde, "pde"),
        Command::Validate(a) => single(a, Suite::Validate, "validate"),
        Command::Millson(a) => millson(a),
    }
}

/// A run filtered to one suite, with flag overrides.
fn single(a: ModelArgs, suite: Suite, name: &str) -> Result<u8, CliError> {
    let mut raw = match &a.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    Overrides {
        family: a.family,
        d: a.d,
        b: a.b,
        radius: a.radius,
        t_end: a.t,
        n_steps: a.n_steps,
        h: a.h,
        n_paths: a.n_paths,
        seed: a.seed,
        scheme: a.scheme,
        points: a.points,
    }
    .apply(&mut raw);
    raw.suites = Some(vec![suite]);
    let mut exp = Experiment::resolve(raw, a.config.is_some())?;
    if let Some(out) = a.out {
        match suite {
            Suite::Simulate => exp.targets.paths = Some(out),
            Suite::Law => exp.targets.law = Some(out),
            _ => exp.targets.report = Some(out),
        }
    }
    // keep standard output clean when an artifact is written there
    let artifact_on_stdout = match suite {
        Suite::Simulate => exp.targets.paths.is_none(),
        Suite::Law => exp.targets.law.is_none(),
        Suite::Validate => exp.targets.report.is_none(),
        _ => false,
    };
    if artifact_on_stdout {
        finish(&exp, name, &mut std::io::stderr())
    } else {
        finish(&exp, name, &mut std::io::stdout())
    }
}

fn finish(exp: &Experiment, name: &str, log: &mut dyn Write) -> Result<u8, CliError> {
    let doc = suites::execute(exp, name, log)?;
    // a validate run without a report file prints the document instead
    if exp.targets.report.is_some() || exp.suites.contains(&Suite::Validate) {
        suites::write_report(exp.targets.report.as_deref(), &doc)?;
    }
    Ok(status(&doc))
}

fn status(doc: &ReportDocument) -> u8 {
    if doc.all_pass() {
        0
    } else {
        1
    }
}

fn millson(a: MillsonArgs) -> Result<u8, CliError> {
    if !(2..=3).contains(&a.from_d) {
        return Err(CliError::Config(format!("invalid parameter `from_d`: must be 2 or 3, got {}", a.from_d)));
    }
    let (routes, report) = suites::millson_report(a.from_d, a.eta, a.t)?;
    let target = a.from_d + 2;
    println!("u{target}({}, {}) closed form:          {:.15e}", a.eta, a.t, routes.analytic);
    println!("u{target}({}, {}) Millson lift of u{}: {:.15e}", a.eta, a.t, a.from_d, routes.lifted);
    println!(
        "difference: {:.3e} (relative {:.3e})",
        routes.lifted - routes.analytic,
        routes.relative_error()
    );
    let mut doc = ReportDocument::new("millson", 0);
    doc.reports.push(report);
    if a.out.is_some() {
        suites::write_report(a.out.as_deref(), &doc)?;
    }
    Ok(status(&doc))
}
