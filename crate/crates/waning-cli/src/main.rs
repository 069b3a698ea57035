//! `waning`: batch front-end for the waning-bounds pipeline. Every command
//! is deterministic given its arguments; exit codes are 0 (success),
//! 2 (input or data error), 3 (estimation degeneracy), 4 (internal error).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use waning_core::bounds::{bounds_from_hazards, k_interval_bounds};
use waning_core::hazard::rate_hazards;
use waning_core::inference::{
    bootstrap_cis, delta_method_cis, delta_method_k_cis, waning_test, BootstrapConfig, CiPolicy,
    IndividualEstimator, WaningDirection,
};
use waning_core::io::{
    read_cohort_csv, read_interval_spec_json, read_report, read_summary_csv, write_cohort_csv,
    write_counterfactual_csv, write_report, Report, ReportFormat,
};
use waning_core::model::{
    CovariateColumn, CovariateKind, CovariateProfile, KBackend, WaningEstimate,
};
use waning_core::simulate::{
    simulate_dgm_bounds, simulate_dgm_exposure, simulate_dgm_logistic, BoundTarget,
    DgmBoundsConfig, DgmExposureConfig, DgmLogisticConfig,
};
use waning_core::{Error, Result};

const SCHEMA_HELP: &str = "\
File schemas:
  summary CSV     header `k,j,arm,stratum,events,person_time,duration_days`;
                  one row per (interval k, subinterval j, arm, stratum) cell,
                  arm 0 = placebo, 1 = vaccine, empty stratum = marginal table.
  cohort CSV      header `id,arm,time_days,event[,<covariates...>]`; one row
                  per subject with follow-up time in days and event 0/1.
  interval spec   JSON `{\"intervals\": [{\"k\": 1, \"subintervals\":
                  [{\"j\": 1, \"start_day\": 1, \"end_day\": 30}]}, ...]}`;
                  contiguous days, 1-based k and j.
  report JSON     object with a `type` tag (`waning-estimate`, `k-bounds`,
                  `waning-test`); one-sided limits appear as null on the
                  unavailable side.
Reports are written as JSON, or as CSV when the output path ends in `.csv`.
Set WANING_THREADS to cap parallelism (results do not depend on it).";

#[derive(Parser)]
#[command(name = "waning", version, about = "Partial-identification bounds for waning vaccine protection", after_long_help = SCHEMA_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate waning bounds from a summary count table.
    EstimateSummary(EstimateSummaryArgs),
    /// Estimate waning bounds from individual-level data with bootstrap CIs.
    EstimateIndividual(EstimateIndividualArgs),
    /// Generate synthetic trial data from a configured mechanism.
    Simulate(SimulateArgs),
    /// Test the no-waning null from an estimate report's psi-bound CIs.
    TestWaning(TestWaningArgs),
}

#[derive(clap::Args)]
struct EstimateSummaryArgs {
    /// Summary count table (CSV).
    #[arg(long)]
    input: PathBuf,
    /// Interval specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Analyze this stratum instead of the marginal table.
    #[arg(long)]
    stratum: Option<String>,
    /// Confidence level is 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Report per-interval bounds for every k >= 2 instead of the
    /// two-interval summary.
    #[arg(long)]
    k_intervals: bool,
    /// Cumulative-incidence backend for --k-intervals.
    #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
    backend: BackendArg,
    /// Output report path (.csv for CSV, JSON otherwise).
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EstimateIndividualArgs {
    /// Individual-level cohort (CSV).
    #[arg(long)]
    input: PathBuf,
    /// Interval specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Discrete-hazard estimator fit per arm.
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    /// Covariate columns to read, comma separated; `name` is numeric,
    /// `name:categorical` is categorical.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Number of bootstrap resamples.
    #[arg(long, default_value_t = 500)]
    bootstrap: usize,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Confidence level is 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Covariate value at which conditional estimates are evaluated,
    /// as `name=value`, comma separated or repeated.
    #[arg(long, value_parser = parse_profile_entry, value_delimiter = ',')]
    profile: Vec<(String, String)>,
    /// Output report path (.csv for CSV, JSON otherwise).
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Which mechanism to simulate.
    #[arg(long, value_enum)]
    dgm: DgmArg,
    /// Mechanism configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output cohort path (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-subject counterfactual panel (bounds DGM only).
    #[arg(long)]
    counterfactuals: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TestWaningArgs {
    /// Waning-estimate report (JSON) carrying one-sided psi-bound CIs.
    #[arg(long)]
    input: PathBuf,
    /// Nominal level; must match the level the report's CIs were
    /// computed at.
    #[arg(long)]
    alpha: Option<f64>,
    /// Optionally write the test result as a report file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Exact,
    RareEvent,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Logistic,
    Cox,
}

#[derive(Clone, Copy, ValueEnum)]
enum DgmArg {
    Bounds,
    Logistic,
    Exposure,
}

fn parse_profile_entry(raw: &str) -> std::result::Result<(String, String), String> {
    let (name, value) = raw
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{raw}`"))?;
    if name.is_empty() {
        return Err(format!("empty covariate name in `{raw}`"));
    }
    Ok((name.to_string(), value.to_string()))
}

fn parse_covariate(raw: &str) -> Result<CovariateColumn> {
    let (name, kind) = match raw.split_once(':') {
        None => (raw, CovariateKind::Numeric),
        Some((name, "numeric")) => (name, CovariateKind::Numeric),
        Some((name, "categorical")) => (name, CovariateKind::Categorical),
        Some((_, kind)) => {
            return Err(Error::InvalidConfig(format!(
                "covariate kind `{kind}` is not `numeric` or `categorical`"
            )))
        }
    };
    if name.is_empty() {
        return Err(Error::InvalidConfig(format!("empty covariate name in `{raw}`")));
    }
    Ok(CovariateColumn { name: name.to_string(), kind })
}

fn report_format(path: &Path) -> ReportFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
        _ => ReportFormat::Json,
    }
}

fn read_config_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn verdict_line(result: &waning_core::inference::WaningTestResult) -> String {
    let alpha = result.alpha;
    if result.reject {
        format!("reject: {} (alpha={alpha})", result.direction.as_str())
    } else {
        format!("no rejection (alpha={alpha})")
    }
}

fn print_waning_test(est: &WaningEstimate) -> Result<()> {
    match waning_test(est) {
        Ok(result) => {
            println!("waning test: {}", verdict_line(&result));
            println!("  basis: {}", result.basis);
            Ok(())
        }
        Err(Error::MissingCi(why)) => {
            println!("waning test: skipped ({why})");
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn cmd_estimate_summary(args: &EstimateSummaryArgs) -> Result<()> {
    let spec = read_interval_spec_json(&args.spec)?;
    let table = read_summary_csv(&args.input, &spec)?;
    let hazards = rate_hazards(&table)?;
    let policy = CiPolicy::new(args.alpha)?;
    let stratum = args.stratum.as_deref();
    let report = if args.k_intervals {
        let backend = match args.backend {
            BackendArg::Exact => KBackend::ExactProduct,
            BackendArg::RareEvent => KBackend::RareEvent,
        };
        let bounds = k_interval_bounds(&hazards, stratum, backend)?;
        let bounds = match backend {
            KBackend::RareEvent => delta_method_k_cis(&hazards, &bounds, policy)?,
            KBackend::ExactProduct => {
                println!(
                    "note: delta-method CIs apply to the rare-event backend only; \
                     the exact-product report carries points without intervals"
                );
                bounds
            }
        };
        Report::KBounds(bounds)
    } else {
        let estimate = bounds_from_hazards(&hazards, stratum)?;
        let estimate = delta_method_cis(&hazards, &estimate, policy)?;
        print_waning_test(&estimate)?;
        Report::Waning(estimate)
    };
    write_report(&report, report_format(&args.out), &args.out)?;
    println!("wrote report to {}", args.out.display());
    Ok(())
}

fn cmd_estimate_individual(args: &EstimateIndividualArgs) -> Result<()> {
    let spec = read_interval_spec_json(&args.spec)?;
    let columns = args
        .covariates
        .iter()
        .map(|raw| parse_covariate(raw))
        .collect::<Result<Vec<_>>>()?;
    let cohort = read_cohort_csv(&args.input, &columns)?;
    let estimator = match args.estimator {
        EstimatorArg::Logistic => IndividualEstimator::Logistic,
        EstimatorArg::Cox => IndividualEstimator::Cox,
    };
    let profile: CovariateProfile = args.profile.iter().cloned().collect();
    let config = BootstrapConfig::new(args.bootstrap, args.seed)?;
    let policy = CiPolicy::new(args.alpha)?;
    let estimate = bootstrap_cis(&cohort, &spec, estimator, &profile, config, policy)?;
    if let Some(meta) = &estimate.bootstrap {
        if meta.failed > 0 {
            println!(
                "note: {} of {} resamples failed and were dropped",
                meta.failed, meta.resamples
            );
        }
    }
    print_waning_test(&estimate)?;
    let report = Report::Waning(estimate);
    write_report(&report, report_format(&args.out), &args.out)?;
    println!("wrote report to {}", args.out.display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    if args.counterfactuals.is_some() && !matches!(args.dgm, DgmArg::Bounds) {
        return Err(Error::InvalidConfig(
            "--counterfactuals applies to the bounds mechanism only".into(),
        ));
    }
    let cohort = match args.dgm {
        DgmArg::Bounds => {
            let cfg: DgmBoundsConfig = read_config_json(&args.config)?;
            let truth = cfg.analytic_truth()?;
            let out = simulate_dgm_bounds(&cfg)?;
            if let Some(path) = &args.counterfactuals {
                write_counterfactual_csv(&out.panel, path)?;
                println!("wrote counterfactual panel to {}", path.display());
            }
            println!("analytic truth: L2 = {:.6}, U2 = {:.6}", truth.l2, truth.u2);
            let attained = match cfg.target {
                BoundTarget::Lower => "lower bound attained",
                BoundTarget::Upper => "upper bound attained",
            };
            println!("analytic VE2challenge = {:.4} ({attained})", truth.ve2_challenge);
            out.cohort
        }
        DgmArg::Logistic => {
            let cfg: DgmLogisticConfig = read_config_json(&args.config)?;
            simulate_dgm_logistic(&cfg)?
        }
        DgmArg::Exposure => {
            let cfg: DgmExposureConfig = read_config_json(&args.config)?;
            let (cohort, truth) = simulate_dgm_exposure(&cfg)?;
            println!("analytic VEchallenge = {:.4} (every interval)", truth.ve_challenge);
            let observed: Vec<String> = truth
                .ve_k_obs
                .iter()
                .enumerate()
                .map(|(i, ve)| match ve {
                    Some(v) => format!("k={} {:.6}", i + 1, v),
                    None => format!("k={} undefined", i + 1),
                })
                .collect();
            println!("analytic VEobs by interval: {}", observed.join(", "));
            cohort
        }
    };
    write_cohort_csv(&cohort, &args.out)?;
    println!("wrote cohort ({} rows) to {}", cohort.records.len(), args.out.display());
    Ok(())
}

fn cmd_test_waning(args: &TestWaningArgs) -> Result<()> {
    let report = read_report(&args.input)?;
    let Report::Waning(estimate) = report else {
        return Err(Error::Schema(
            "the waning test needs a waning-estimate report \
             (k-bounds and test reports carry no psi CIs)"
                .into(),
        ));
    };
    if let (Some(requested), Some(stored)) = (args.alpha, estimate.alpha) {
        if (requested - stored).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "report CIs were computed at alpha={stored}; re-estimate to test at \
                 alpha={requested}"
            )));
        }
    }
    let result = waning_test(&estimate)?;
    println!("{}", verdict_line(&result));
    println!("basis: {}", result.basis);
    if result.reject && result.direction == WaningDirection::Waning {
        println!("interpretation: protection in interval 2 is below interval 1");
    }
    if let Some(out) = &args.out {
        write_report(&Report::Test(result), report_format(out), out)?;
        println!("wrote report to {}", out.display());
    }
    Ok(())
}

fn run() -> Result<()> {
    if let Ok(value) = std::env::var("WANING_THREADS") {
        let threads: usize = value.parse().map_err(|_| {
            Error::InvalidConfig(format!("WANING_THREADS=`{value}` is not a thread count"))
        })?;
        if threads == 0 {
            return Err(Error::InvalidConfig("WANING_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
    }
    match Cli::parse().command {
        Command::EstimateSummary(args) => cmd_estimate_summary(&args),
        Command::EstimateIndividual(args) => cmd_estimate_individual(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::TestWaning(args) => cmd_test_waning(&args),
    }
}

fn main() -> ExitCode {
    match std::panic::catch_unwind(run) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            eprintln!("internal error: {message}");
            ExitCode::from(4)
        }
    }
}
