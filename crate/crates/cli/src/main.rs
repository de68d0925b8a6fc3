//! Command-line front end: parameter solving, adaptive runs, axiom checks,
//! and comparative reports. All outputs are deterministic for fixed flags;
//! the only randomness (axiom corpora) is seeded explicitly.

use afemlab::axioms::{run_suite, SuiteConfig};
use afemlab::driver::{
    self, divergence_report, divergence_report_samples, first_zero_only_step,
    max_strategy_burn_in_bound, run, DivergenceReport, RunConfig, Trajectory,
};
use afemlab::params::share_sum;
use afemlab::{solve_params, thresholds, EstimatorParams, MarkerConfig, ParamSolution};
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde::Deserialize;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "AFEMLAB_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "afemlab",
    version,
    about = "Laboratory for bulk-chasing (Dörfler) marking on 1D bisection partitions"
)]
struct Cli {
    /// JSON config file; command-line flags take precedence over its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for outputs with default names [env: AFEMLAB_OUT_DIR, default: .]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve (theta, s0, eps) into estimator parameters and print them
    /// with the two thresholds.
    Solve(SolveArgs),
    /// Run the adaptive loop; writes a trajectory CSV and a summary JSON.
    Run(RunArgs),
    /// Check the adaptivity axioms over seeded random nested partitions.
    CheckAxioms(CheckAxiomsArgs),
    /// Run all four marking modes under identical parameters and tabulate
    /// rates at matched cardinalities.
    Compare(CompareArgs),
    /// Recompute divergence reports from a stored trajectory CSV.
    Report(ReportArgs),
}

macro_rules! merge_opts {
    ($target:expr, $source:expr, $($field:ident),+ $(,)?) => {
        $( if $target.$field.is_none() { $target.$field = $source.$field; } )+
    };
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
struct SolveArgs {
    /// Dörfler marking parameter in (0, 1) [default: 0.5]
    #[arg(long)]
    theta: Option<f64>,
    /// Target algebraic rate [default: 1]
    #[arg(long)]
    s0: Option<f64>,
    /// Bound on the gap theta - 1/K [default: 0.1]
    #[arg(long)]
    eps: Option<f64>,
    /// Also write the JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    Ideal,
    Prescribed,
    Greedy,
    Maximum,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Ideal => "ideal",
            Mode::Prescribed => "prescribed",
            Mode::Greedy => "greedy",
            Mode::Maximum => "maximum",
        }
    }
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
struct RunArgs {
    /// Marking mode [default: prescribed]
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Dörfler parameter; solver input and greedy/verification parameter [default: 0.5]
    #[arg(long)]
    theta: Option<f64>,
    /// Target rate for the parameter solver [default: 1]
    #[arg(long)]
    s0: Option<f64>,
    /// Solver gap bound [default: 0.1]
    #[arg(long)]
    eps: Option<f64>,
    /// Explicit indicator decay per zero-element refinement (needs --beta --k --m).
    #[arg(long)]
    alpha: Option<f64>,
    /// Explicit per-generation decay exponent.
    #[arg(long)]
    beta: Option<f64>,
    /// Explicit reliability constant K > 1.
    #[arg(long)]
    k: Option<f64>,
    /// Explicit macro cell count M >= 1.
    #[arg(long)]
    m: Option<u32>,
    /// Maximum-strategy parameter in (0, 1] [default: 0.5]
    #[arg(long)]
    mu: Option<f64>,
    /// Refinement steps [default: cycles * M, or 100 M]
    #[arg(long)]
    steps: Option<u32>,
    /// Marking cycles; shorthand for steps = cycles * M.
    #[arg(long)]
    cycles: Option<u32>,
    /// Rate exponent for divergence reports; repeatable [default: s0]
    #[arg(long = "s")]
    #[serde(rename = "s")]
    rates: Option<Vec<f64>>,
    /// Stop once log2 of the squared indicator falls below this [default: -4000]
    #[arg(long, allow_negative_numbers = true)]
    stop_log2_eta: Option<f64>,
    /// Generation cap [default: 4096]
    #[arg(long)]
    max_gen: Option<u32>,
    /// Trajectory CSV path [default: <out-dir>/trajectory.csv]
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Summary JSON path [default: <out-dir>/summary.json]
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
struct CheckAxiomsArgs {
    /// Seed of the instance generator [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Instances per axiom per parameter set [default: 1000]
    #[arg(long)]
    instances: Option<u32>,
    /// Random parameter sets beside the reference one [default: 5]
    #[arg(long)]
    random_sets: Option<u32>,
    /// Report JSON path [default: <out-dir>/axiom_reports.json]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
struct CompareArgs {
    /// Dörfler parameter [default: 0.5]
    #[arg(long)]
    theta: Option<f64>,
    /// Target rate for the parameter solver [default: 1]
    #[arg(long)]
    s0: Option<f64>,
    /// Solver gap bound [default: 0.1]
    #[arg(long)]
    eps: Option<f64>,
    /// Explicit estimator parameters, as for `run`.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    /// Maximum-strategy parameter [default: 0.5]
    #[arg(long)]
    mu: Option<f64>,
    /// Cycles per mode [default: 40]
    #[arg(long)]
    cycles: Option<u32>,
    /// Rate exponents; repeatable [default: s0]
    #[arg(long = "s")]
    #[serde(rename = "s")]
    rates: Option<Vec<f64>>,
    /// Output JSON path [default: <out-dir>/compare.json]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
struct ReportArgs {
    /// Trajectory CSV written by `run`.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Macro cell count of the run [default: 8]
    #[arg(long)]
    m: Option<u32>,
    /// Rate exponents; repeatable [default: 1]
    #[arg(long = "s")]
    #[serde(rename = "s")]
    rates: Option<Vec<f64>>,
    /// Output JSON path [default: <out-dir>/report.json]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
struct FileConfig {
    out_dir: Option<PathBuf>,
    solve: Option<SolveArgs>,
    run: Option<RunArgs>,
    check_axioms: Option<CheckAxiomsArgs>,
    compare: Option<CompareArgs>,
    report: Option<ReportArgs>,
}

/// Errors before any computation starts are usage errors (exit 2);
/// failures while executing are runtime errors (exit 1).
enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type CliResult<T> = Result<T, CliError>;

fn usage<T>(err: impl Into<anyhow::Error>) -> CliResult<T> {
    Err(CliError::Usage(err.into()))
}

trait RuntimeContext<T> {
    fn runtime(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> RuntimeContext<T> for Result<T, E> {
    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| CliError::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(CliError::Usage(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> CliResult<ExitCode> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))
                .map_err(CliError::Usage)?;
            match serde_json::from_str(&text) {
                Ok(cfg) => cfg,
                Err(err) => {
                    return usage(anyhow!("config {}: {err}", path.display()));
                }
            }
        }
        None => FileConfig::default(),
    };
    let out_dir = cli
        .out_dir
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or(file.out_dir)
        .unwrap_or_else(|| PathBuf::from("."));

    match cli.command {
        Command::Solve(mut args) => {
            if let Some(f) = file.solve {
                merge_opts!(args, f, theta, s0, eps, out);
            }
            cmd_solve(args, &out_dir)
        }
        Command::Run(mut args) => {
            if let Some(f) = file.run {
                merge_opts!(
                    args,
                    f,
                    mode,
                    theta,
                    s0,
                    eps,
                    alpha,
                    beta,
                    k,
                    m,
                    mu,
                    steps,
                    cycles,
                    rates,
                    stop_log2_eta,
                    max_gen,
                    csv,
                    summary
                );
            }
            cmd_run(args, &out_dir)
        }
        Command::CheckAxioms(mut args) => {
            if let Some(f) = file.check_axioms {
                merge_opts!(args, f, seed, instances, random_sets, out);
            }
            cmd_check_axioms(args, &out_dir)
        }
        Command::Compare(mut args) => {
            if let Some(f) = file.compare {
                merge_opts!(args, f, theta, s0, eps, alpha, beta, k, m, mu, cycles, rates, out);
            }
            cmd_compare(args, &out_dir)
        }
        Command::Report(mut args) => {
            if let Some(f) = file.report {
                merge_opts!(args, f, csv, m, rates, out);
            }
            cmd_report(args, &out_dir)
        }
    }
}

/// Parameters in force for a run: solved from (theta, s0, eps) or given
/// explicitly, plus the effective Dörfler parameter.
struct Resolved {
    params: EstimatorParams,
    solution: Option<ParamSolution>,
    theta: f64,
}

#[allow(clippy::too_many_arguments)]
fn resolve_params(
    theta: Option<f64>,
    s0: Option<f64>,
    eps: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    k: Option<f64>,
    m: Option<u32>,
) -> CliResult<Resolved> {
    match (alpha, beta, k, m) {
        (Some(alpha), Some(beta), Some(k), Some(m)) => {
            let params = match EstimatorParams::new(alpha, beta, k, m) {
                Ok(p) => p,
                Err(e) => return usage(e),
            };
            // Without an explicit theta, use the share the cyclic marking
            // realises exactly: 1/K + (1 - 1/K)/S(beta, M).
            let theta = theta.unwrap_or_else(|| 1.0 / k + (1.0 - 1.0 / k) / share_sum(beta, m));
            Ok(Resolved {
                params,
                solution: None,
                theta,
            })
        }
        (None, None, None, None) => {
            let solution =
                match solve_params(theta.unwrap_or(0.5), s0.unwrap_or(1.0), eps.unwrap_or(0.1)) {
                    Ok(s) => s,
                    Err(e) => return usage(e),
                };
            Ok(Resolved {
                params: solution.estimator_params(),
                solution: Some(solution),
                theta: solution.theta,
            })
        }
        _ => usage(anyhow!(
            "explicit parameters require all of --alpha, --beta, --k, --m"
        )),
    }
}

/// Relative output paths resolve against the output directory.
fn resolve_out(out_dir: &Path, path: PathBuf) -> PathBuf {
    if path.is_absolute() {
        path
    } else {
        out_dir.join(path)
    }
}

fn write_output(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))
                .runtime()?;
        }
    }
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()
}

fn pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON serializes");
    text.push('\n');
    text
}

fn cmd_solve(args: SolveArgs, out_dir: &Path) -> CliResult<ExitCode> {
    let theta = args.theta.unwrap_or(0.5);
    let solution = match solve_params(theta, args.s0.unwrap_or(1.0), args.eps.unwrap_or(0.1)) {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let th = thresholds(1.0, solution.k).runtime()?;
    let value = json!({
        "schema": 1,
        "solution": solution,
        "thresholds": {
            "theta_star": th.theta_star,
            "theta_tilde_star": th.theta_tilde_star,
            "theta": theta,
        },
    });
    let text = pretty(&value);
    print!("{text}");
    if let Some(out) = args.out {
        write_output(&resolve_out(out_dir, out), &text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn marker_for(mode: Mode, resolved: &Resolved, mu: f64) -> MarkerConfig {
    match mode {
        Mode::Ideal => MarkerConfig::Ideal,
        Mode::Prescribed => MarkerConfig::DorflerPrescribed,
        Mode::Greedy => MarkerConfig::DorflerGreedy {
            theta: resolved.theta,
        },
        Mode::Maximum => MarkerConfig::Maximum { mu },
    }
}

fn run_mode(
    mode: Mode,
    resolved: &Resolved,
    mu: f64,
    steps: u32,
    rate_exponent: f64,
    stop_log2_eta: Option<f64>,
    max_gen: Option<u32>,
) -> CliResult<Trajectory> {
    let mut config = RunConfig::new(resolved.params, marker_for(mode, resolved, mu));
    config.max_iterations = steps;
    config.rate_exponent = rate_exponent;
    if let Some(stop) = stop_log2_eta {
        config.stop_log2_eta = stop;
    }
    if let Some(cap) = max_gen {
        config.max_gen = cap;
    }
    if matches!(mode, Mode::Prescribed | Mode::Greedy) {
        config.verify_theta = Some(resolved.theta);
    }
    run(&config).runtime()
}

fn divergence_json(
    records: &[driver::TrajectoryRecord],
    m: u32,
    rates: &[f64],
) -> serde_json::Value {
    let entries: Vec<serde_json::Value> = rates
        .iter()
        .map(|&s| match divergence_report(records, m, s) {
            Ok(DivergenceReport {
                diverges,
                growth_exponent_per_cycle,
                positive_increment_fraction,
            }) => json!({
                "s": s,
                "diverges": diverges,
                "growth_exponent_per_cycle": growth_exponent_per_cycle,
                "positive_increment_fraction": positive_increment_fraction,
            }),
            Err(err) => json!({ "s": s, "error": err.to_string() }),
        })
        .collect();
    json!(entries)
}

fn cmd_run(args: RunArgs, out_dir: &Path) -> CliResult<ExitCode> {
    let resolved = resolve_params(
        args.theta, args.s0, args.eps, args.alpha, args.beta, args.k, args.m,
    )?;
    let p = resolved.params;
    let mode = args.mode.unwrap_or(Mode::Prescribed);
    let mu = args.mu.unwrap_or(0.5);
    if let Err(e) = (MarkerConfig::Maximum { mu }).validate() {
        return usage(e);
    }
    let steps = args
        .steps
        .or(args.cycles.map(|c| c * p.m))
        .unwrap_or(100 * p.m);
    let rates = args.rates.unwrap_or_else(|| vec![p.beta]);
    if rates.is_empty() {
        return usage(anyhow!("at least one rate exponent is required"));
    }

    let traj = run_mode(
        mode,
        &resolved,
        mu,
        steps,
        rates[0],
        args.stop_log2_eta,
        args.max_gen,
    )?;

    let csv_path = resolve_out(
        out_dir,
        args.csv.unwrap_or_else(|| PathBuf::from("trajectory.csv")),
    );
    write_output(&csv_path, &driver::csv_string(&traj.records))?;

    let last = traj.records.last().expect("at least one record");
    let mut value = json!({
        "schema": 1,
        "mode": mode.name(),
        "params": p,
        "theta": resolved.theta,
        "solution": resolved.solution,
        "steps": steps,
        "termination": traj.termination,
        "final": {
            "k": last.k,
            "cardinality": last.cardinality.to_string(),
            "added": last.added.to_string(),
            "eta_sq_log2": last.eta_sq_log2,
            "delta_sq_log2": last.delta_sq_log2,
            "g0": last.g0,
        },
        "optimality": traj.optimality,
        "divergence": divergence_json(&traj.records, p.m, &rates),
    });
    if mode == Mode::Maximum {
        let burn_in = first_zero_only_step(&traj.records, 50);
        let post_decay = burn_in.and_then(|k| {
            let i = k as usize;
            (i + 1 < traj.records.len())
                .then(|| traj.records[i].eta_sq_log2 - traj.records[i + 1].eta_sq_log2)
        });
        value["burn_in"] = json!({
            "k_star": burn_in,
            "bound": max_strategy_burn_in_bound(&p, mu),
            "post_decay_per_step_log2": post_decay,
        });
    }
    let text = pretty(&value);
    print!("{text}");
    let summary_path = resolve_out(
        out_dir,
        args.summary
            .unwrap_or_else(|| PathBuf::from("summary.json")),
    );
    write_output(&summary_path, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_check_axioms(args: CheckAxiomsArgs, out_dir: &Path) -> CliResult<ExitCode> {
    let cfg = SuiteConfig {
        seed: args.seed.unwrap_or(0),
        instances: args.instances.unwrap_or(1000),
        random_sets: args.random_sets.unwrap_or(5),
    };
    if cfg.instances < 2 {
        return usage(anyhow!("--instances must be at least 2"));
    }
    let reports = run_suite(&cfg).runtime()?;
    let value = serde_json::to_value(&reports).expect("reports serialize");
    let text = pretty(&value);
    print!("{text}");
    let path = resolve_out(
        out_dir,
        args.out
            .unwrap_or_else(|| PathBuf::from("axiom_reports.json")),
    );
    write_output(&path, &text)?;
    if reports.iter().all(|r| r.pass) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_compare(args: CompareArgs, out_dir: &Path) -> CliResult<ExitCode> {
    let resolved = resolve_params(
        args.theta, args.s0, args.eps, args.alpha, args.beta, args.k, args.m,
    )?;
    let p = resolved.params;
    let mu = args.mu.unwrap_or(0.5);
    if let Err(e) = (MarkerConfig::Maximum { mu }).validate() {
        return usage(e);
    }
    let cycles = args.cycles.unwrap_or(40);
    let steps = cycles * p.m;
    let rates = args.rates.unwrap_or_else(|| vec![p.beta]);

    // Matched cardinality targets: M 2^j.
    let targets: Vec<BigUint> = (0..=cycles).map(|j| BigUint::from(p.m) << j).collect();

    let mut modes = serde_json::Map::new();
    for mode in [Mode::Greedy, Mode::Ideal, Mode::Maximum, Mode::Prescribed] {
        let traj = run_mode(mode, &resolved, mu, steps, rates[0], None, None)?;
        let rows: Vec<serde_json::Value> = targets
            .iter()
            .map(
                |target| match traj.records.iter().find(|r| &r.added >= target) {
                    Some(r) => {
                        let mut per_rate = serde_json::Map::new();
                        for &s in &rates {
                            per_rate.insert(
                                format!("{s}"),
                                json!(driver::rate_functional_log2(&r.added, r.eta_sq_log2, s)),
                            );
                        }
                        json!({
                            "target": target.to_string(),
                            "k": r.k,
                            "added": r.added.to_string(),
                            "eta_sq_log2": r.eta_sq_log2,
                            "rate_log2": per_rate,
                        })
                    }
                    None => serde_json::Value::Null,
                },
            )
            .collect();
        modes.insert(
            mode.name().to_string(),
            json!({
                "rows": rows,
                "divergence": divergence_json(&traj.records, p.m, &rates),
                "final_eta_sq_log2": traj.records.last().unwrap().eta_sq_log2,
            }),
        );
    }

    let value = json!({
        "schema": 1,
        "params": p,
        "theta": resolved.theta,
        "mu": mu,
        "cycles": cycles,
        "targets": targets.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "modes": modes,
    });
    let text = pretty(&value);
    print!("{text}");
    let path = resolve_out(
        out_dir,
        args.out.unwrap_or_else(|| PathBuf::from("compare.json")),
    );
    write_output(&path, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs, out_dir: &Path) -> CliResult<ExitCode> {
    let Some(csv_path) = args.csv else {
        return usage(anyhow!("--csv is required"));
    };
    let m = args.m.unwrap_or(8);
    if m == 0 {
        return usage(anyhow!("--m must be at least 1"));
    }
    let rates = args.rates.unwrap_or_else(|| vec![1.0]);
    let text = fs::read_to_string(&csv_path)
        .with_context(|| format!("reading {}", csv_path.display()))
        .runtime()?;
    let mut samples: Vec<(BigUint, f64)> = Vec::new();
    for (number, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(CliError::Runtime(anyhow!(
                "{}:{}: expected 8 CSV fields, got {}",
                csv_path.display(),
                number + 1,
                fields.len()
            )));
        }
        let added = BigUint::from_str(fields[2])
            .map_err(|e| anyhow!("{}:{}: added: {e}", csv_path.display(), number + 1))
            .runtime()?;
        let eta: f64 = fields[3]
            .parse()
            .map_err(|e| anyhow!("{}:{}: eta_sq_log2: {e}", csv_path.display(), number + 1))
            .runtime()?;
        samples.push((added, eta));
    }

    let entries: Vec<serde_json::Value> = rates
        .iter()
        .map(|&s| match divergence_report_samples(&samples, m, s) {
            Ok(r) => json!({
                "s": s,
                "diverges": r.diverges,
                "growth_exponent_per_cycle": r.growth_exponent_per_cycle,
                "positive_increment_fraction": r.positive_increment_fraction,
            }),
            Err(err) => json!({ "s": s, "error": err.to_string() }),
        })
        .collect();
    let value = json!({
        "schema": 1,
        "m": m,
        "samples": samples.len(),
        "rates": entries,
    });
    let text = pretty(&value);
    print!("{text}");
    let path = resolve_out(
        out_dir,
        args.out.unwrap_or_else(|| PathBuf::from("report.json")),
    );
    write_output(&path, &text)?;
    Ok(ExitCode::SUCCESS)
}
