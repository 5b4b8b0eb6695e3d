use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qpl_core::channel::CsiMode;
use qpl_core::experiment::{
    run_experiment, version_string, ExperimentKind, OneOrMany, PartialConfig, RunConfig,
};
use qpl_core::heuristic::OrderingRule;
use qpl_core::oracle::{capacity_joint, capacity_separate, run_agreement_suite, FronthaulBudget};
use qpl_core::{Error, Scheme};

#[derive(Parser)]
#[command(
    name = "qpl",
    version,
    about = "Fronthaul-quantized MU-MIMO precoding simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write `<out>/<experiment>.csv` plus a JSON manifest.
    Run(Box<RunArgs>),
    /// Print fronthaul load for separate and joint transport.
    Capacity(CapacityArgs),
    /// Compare the sphere decoder against brute-force enumeration.
    #[command(name = "oracle-check", alias = "oracle_check")]
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat JSON config, or a manifest written by a previous run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_experiment)]
    experiment: Option<ExperimentKind>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long)]
    snr_spread_db: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    schemes: Option<Vec<Scheme>>,
    #[arg(long)]
    s_users: Option<usize>,
    #[arg(long, value_parser = parse_ordering)]
    ordering: Option<OrderingRule>,
    #[arg(long, value_parser = parse_csi)]
    csi: Option<CsiMode>,
    #[arg(long)]
    pilot_power: Option<f64>,
    #[arg(long)]
    n0: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Comma-separated `KxL` pairs, e.g. `10x2,5x4`.
    #[arg(long, value_delimiter = ',', value_parser = parse_kl)]
    kl_pairs: Option<Vec<(usize, usize)>>,
    #[arg(long)]
    beta_refinements: Option<usize>,
    /// Report zero wall times so the CSV is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = available parallelism).
    #[arg(long, env = "QPL_JOBS")]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CapacityArgs {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    tau: u64,
    #[arg(long)]
    n_precoder: u64,
    #[arg(long)]
    se: f64,
    #[arg(long)]
    n_res: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "QPL_JOBS")]
    jobs: Option<usize>,
}

fn parse_experiment(s: &str) -> Result<ExperimentKind, Error> {
    s.parse()
}

fn parse_scheme(s: &str) -> Result<Scheme, Error> {
    s.parse()
}

fn parse_ordering(s: &str) -> Result<OrderingRule, Error> {
    s.parse()
}

fn parse_csi(s: &str) -> Result<CsiMode, Error> {
    s.parse()
}

fn parse_kl(s: &str) -> Result<(usize, usize), String> {
    let (k, l) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected KxL, got `{s}`"))?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}"));
    Ok((n(k)?, n(l)?))
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::UnknownScheme(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl RunArgs {
    fn overrides(&self) -> PartialConfig {
        PartialConfig {
            experiment: self.experiment,
            m: self.m,
            k: self.k,
            levels: self.levels,
            snr_db: self.snr_db.clone().map(OneOrMany::Many),
            snr_spread_db: self.snr_spread_db,
            trials: self.trials,
            seed: self.seed,
            schemes: self.schemes.clone(),
            s_users: self.s_users,
            ordering: self.ordering,
            csi: self.csi,
            pilot_power: self.pilot_power,
            n0: self.n0,
            q: self.q,
            kl_pairs: self.kl_pairs.clone(),
            beta_refinements: self.beta_refinements,
            timing: self.no_timing.then_some(false),
            jobs: self.jobs,
            out: self.out.as_ref().map(|p| p.display().to_string()),
            ..Default::default()
        }
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            PartialConfig::from_json(&text)?
        }
        None => PartialConfig::default(),
    };
    let merged = file.overlay(&args.overrides());
    let cfg = merged.resolve()?;
    let out = PathBuf::from(merged.out.as_deref().unwrap_or("results"));
    let pool = thread_pool(merged.jobs)?;
    let name = cfg.experiment.name();
    match cfg.experiment {
        ExperimentKind::Capacity => {
            let budget = budget_for(&cfg);
            let line = capacity_line(&budget)?;
            println!("{line}");
            let json = serde_json::json!({
                "version": version_string(),
                "budget": budget,
                "separate": capacity_separate(&budget)?,
                "joint": capacity_joint(&budget)?,
            });
            write(&out, &format!("{name}.json"), &pretty(&json))?;
        }
        ExperimentKind::OracleCheck => {
            let report = pool.install(|| run_agreement_suite(cfg.seed, cfg.trials))?;
            print_agreement(&report);
            let json =
                serde_json::json!({ "version": version_string(), "config": cfg, "report": report });
            write(&out, &format!("{name}.json"), &pretty(&json))?;
            if !report.all_passed() {
                return Err(Failure::Runtime("oracle agreement failures".into()));
            }
        }
        _ => {
            let report = pool.install(|| run_experiment(&cfg))?;
            let csv = write(&out, &format!("{name}.csv"), &report.to_csv())?;
            write(&out, &format!("{name}.json"), &report.manifest_json())?;
            println!("wrote {} ({} rows)", csv.display(), report.rows.len());
        }
    }
    Ok(())
}

/// Capacity budget implied by a run config: `M` and `K` from the config,
/// precoder bits `⌈log2 L⌉`, and the remaining fields at their defaults.
fn budget_for(cfg: &RunConfig) -> FronthaulBudget {
    FronthaulBudget {
        m: cfg.m as u64,
        k: cfg.k as u64,
        tau: 200,
        n_precoder: (cfg.levels as f64).log2().ceil() as u64,
        se: 4.0,
        n_res: 3.0,
    }
}

fn capacity_line(b: &FronthaulBudget) -> Result<String, Failure> {
    let sep = capacity_separate(b)?;
    let joint = capacity_joint(b)?;
    Ok(format!(
        "separate={sep} joint={joint} ratio={:.3}",
        joint / sep
    ))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn print_agreement(report: &qpl_core::oracle::AgreementReport) {
    for c in &report.checks {
        let status = if c.failed == 0 { "PASS" } else { "FAIL" };
        println!(
            "{status} {}: {} passed, {} failed",
            c.name, c.passed, c.failed
        );
    }
}

fn oracle_check(args: OracleArgs) -> Result<(), Failure> {
    let pool = thread_pool(args.jobs)?;
    let report = pool.install(|| run_agreement_suite(args.seed, args.cases))?;
    print_agreement(&report);
    if let Some(dir) = &args.out {
        let json =
            serde_json::json!({ "version": version_string(), "seed": args.seed, "report": report });
        write(dir, "oracle_check.json", &pretty(&json))?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Runtime("oracle agreement failures".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(*args),
        Command::Capacity(a) => {
            let budget = FronthaulBudget {
                m: a.m,
                k: a.k,
                tau: a.tau,
                n_precoder: a.n_precoder,
                se: a.se,
                n_res: a.n_res,
            };
            capacity_line(&budget).map(|line| println!("{line}"))
        }
        Command::OracleCheck(args) => oracle_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("qpl: config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("qpl: {msg}");
            ExitCode::from(3)
        }
    }
}
