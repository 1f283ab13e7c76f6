//! `eagleeye` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 unreachable
//! extremeness (the requested `p_ext` is below anything `k_max` can show).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eagleeye::io::{read_dataset, write_dataset, write_scores, write_truth, ReportDocument};
use eagleeye::synthetic::{generate, preset, preset_source, ScenarioSpec, PRESETS};
use eagleeye::{null_threshold, run, Direction, EagleEyeConfig, Error, Role, ThresholdMethod};

const THREADS_VAR: &str = "EAGLEEYE_THREADS";

#[derive(Parser)]
#[command(name = "eagleeye", version, about = "Local density anomalies between a reference and a test sample")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full detection pipeline on two datasets.
    Detect(DetectArgs),
    /// Print the critical score threshold of the null model.
    Threshold(ThresholdArgs),
    /// Generate a synthetic scenario.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Mc,
}

impl From<Method> for ThresholdMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Exact => ThresholdMethod::ExactDp,
            Method::Mc => ThresholdMethod::MonteCarlo,
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Reference sample, one point per row.
    #[arg(long)]
    reference: PathBuf,
    /// Test sample, one point per row.
    #[arg(long)]
    test: PathBuf,
    /// Largest neighbourhood size; defaults to min(500, 5% of all points).
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, default_value_t = 1e-5)]
    p_ext: f64,
    /// Lower quantile of pruned scores used for recovery.
    #[arg(long, default_value_t = 0.01)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Exact)]
    threshold_method: Method,
    /// Simulated sequences for `--threshold-method mc`.
    #[arg(long, default_value_t = 1_000_000)]
    n_sequences: usize,
    /// Skip background injection and the purity estimates.
    #[arg(long)]
    no_injection: bool,
    /// Report path; the report goes to standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-point score table (CSV).
    #[arg(long)]
    scores_out: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    k_max: usize,
    #[arg(long)]
    p_ext: f64,
    /// Success probability of each trial.
    #[arg(long, default_value_t = 0.5)]
    p_hat: f64,
    #[arg(long, value_enum, default_value_t = Method::Exact)]
    method: Method,
    #[arg(long, default_value_t = 1_000_000)]
    n_sequences: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file, or the name of a bundled preset.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    out_reference: PathBuf,
    #[arg(long)]
    out_test: PathBuf,
    /// Writes `<path>.reference.csv` and `<path>.test.csv` label files.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Detect(a) => detect(a),
        Command::Threshold(a) => threshold(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// `min(500, 5%)` of the pooled size, and at least 1.
fn default_k_max(n_total: usize) -> usize {
    (n_total / 20).clamp(1, 500)
}

fn detect(a: DetectArgs) -> Result<(), Error> {
    let reference = read_dataset(&a.reference, Role::Reference)?;
    let test = read_dataset(&a.test, Role::Test)?;
    let config = EagleEyeConfig {
        k_max: a
            .k_max
            .unwrap_or_else(|| default_k_max(reference.len() + test.len())),
        p_ext: a.p_ext,
        q: a.q,
        seed: a.seed,
        n_null_sequences: a.n_sequences,
        threshold_method: a.threshold_method.into(),
        run_injection: !a.no_injection,
        ..EagleEyeConfig::default()
    };
    let result = run(&reference, &test, &config)?;
    for w in &result.provenance.warnings {
        eprintln!("warning: {w}");
    }
    let doc = ReportDocument::from_run(&result);
    match &a.out {
        Some(path) => {
            doc.write(path)?;
            for d in Direction::BOTH {
                let r = result.report(d);
                println!(
                    "{d}: threshold {:.4}, {} anomalies, {} members",
                    result.direction(d).null_model.threshold,
                    r.clusters.len(),
                    r.totals.members
                );
            }
        }
        None => print!("{}", doc.to_json()),
    }
    if let Some(path) = &a.scores_out {
        write_scores(path, &result)?;
    }
    Ok(())
}

fn threshold(a: ThresholdArgs) -> Result<(), Error> {
    let m = null_threshold(
        a.k_max,
        a.p_hat,
        a.p_ext,
        a.method.into(),
        a.seed,
        a.n_sequences,
    )?;
    match m.standard_error {
        Some(se) => println!("{:.6} ± {:.6}", m.threshold, se),
        None => println!("{:.6}", m.threshold),
    }
    Ok(())
}

fn load_scenario(arg: &str) -> Result<ScenarioSpec, Error> {
    let path = Path::new(arg);
    if !path.exists() && preset_source(arg).is_some() {
        return preset(arg);
    }
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Spec(format!(
            "cannot read scenario {arg:?} ({e}); bundled presets: {}",
            PRESETS.join(", ")
        ))
    })?;
    ScenarioSpec::from_toml(&text)
}

fn simulate(a: SimulateArgs) -> Result<(), Error> {
    let mut spec = load_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let s = generate(&spec)?;
    write_dataset(&a.out_reference, &s.reference)?;
    write_dataset(&a.out_test, &s.test)?;
    if let Some(base) = &a.truth_out {
        let with_suffix = |suffix: &str| {
            let mut p = base.clone().into_os_string();
            p.push(suffix);
            PathBuf::from(p)
        };
        write_truth(&with_suffix(".reference.csv"), &s.reference_truth)?;
        write_truth(&with_suffix(".test.csv"), &s.test_truth)?;
    }
    Ok(())
}
