//! Command-line front end.
//!
//! Thin layer over the library: five subcommands (`sense`, `rate`,
//! `effrate`, `sweep`, `simulate`) sharing a TOML config file whose keys
//! mirror the link policy, with `--set key=value` overrides. All commands
//! are deterministic given `(config, seed)`. Exit codes: 0 success,
//! 2 configuration error, 3 I/O error.

pub mod config;
pub mod sweep;

use crate::effrate::{
    optimize_fixed, optimize_variable, zero_theta_fixed_comparison, EffRateResult, TxMode,
};
use crate::fbcode::{capacity, fb_error_prob, fb_rate, Scenario};
use crate::queuesim::{run_sim_traced, SimConfig, SimResult, TraceRow};
use crate::sensing::{
    check_power_feasibility, priors, sensed_state_probs, InterferenceBudget, InterferenceMode,
    SensingPerf,
};
use clap::{Parser, Subcommand};
use config::{db_to_linear, ConfigError, FileConfig, Resolved};
use std::path::PathBuf;
use sweep::{fmt9, run_sweep, to_csv, SweepMode, SweepRange, SweepSpec, SweepVariable};

const EXIT_OK: i32 = 0;
const EXIT_CONFIG: i32 = 2;
const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<sweep::SweepError> for CliError {
    fn from(e: sweep::SweepError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<crate::effrate::EffRateError> for CliError {
    fn from(e: crate::effrate::EffRateError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<crate::sensing::InvalidParameter> for CliError {
    fn from(e: crate::sensing::InvalidParameter) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "cograte",
    version,
    about = "Buffer-constrained throughput of sensing-based spectrum-sharing links"
)]
struct Cli {
    /// TOML config file; missing file means all defaults
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config field, e.g. --set threshold=0.15 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed for Monte Carlo subcommands
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Concurrent sweep evaluations
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Quadrature order override
    #[arg(long, global = true, value_name = "N")]
    quad_order: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detector operating point, sensed-state probabilities and power
    /// feasibility
    Sense {
        /// Also sweep the threshold and write a CSV: lo:hi:steps[:log]
        #[arg(long, value_name = "RANGE")]
        sweep_lambda: Option<String>,
        /// Output CSV path for --sweep-lambda
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Tolerable average interference over worst-case gain, in dB
        #[arg(long, default_value_t = 7.0)]
        i0_over_gain_db: f64,
        #[arg(long, default_value_t = 0.0)]
        peak_p1_db: f64,
        #[arg(long, default_value_t = 10.0)]
        peak_p2_db: f64,
        /// Interference rule: bound-p1 | avg-interference
        #[arg(long, default_value = "avg-interference")]
        interference_mode: String,
    },
    /// Finite-blocklength rate / error calculator
    Rate {
        /// Explicit SNR; when absent the scenario SNR from the config is used
        #[arg(long)]
        snr: Option<f64>,
        /// Scenario 1-4 selecting the config-derived SNR
        #[arg(long, default_value_t = 4)]
        scenario: usize,
        #[arg(long, default_value_t = 1.0)]
        h2: f64,
        /// Blocklength; default (T-N)B from the config
        #[arg(long)]
        blocklength: Option<u32>,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// Also report the error probability of this fixed rate
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Effective rate at a QoS exponent, optimized or at the configured
    /// parameters
    Effrate {
        #[arg(long, default_value_t = 0.01)]
        theta: f64,
        /// fixed | variable | both
        #[arg(long, default_value = "both")]
        mode: String,
        /// Evaluate at the configured rates / error target instead of
        /// optimizing
        #[arg(long)]
        no_optimize: bool,
    },
    /// Sweep one parameter and write a CSV of effective rates
    Sweep {
        /// lambda | sense-n | theta | blocklength | eps | rate-pair
        #[arg(long)]
        variable: String,
        /// lo:hi:steps[:log]
        #[arg(long)]
        range: Option<String>,
        /// Explicit comma-separated values (alternative to --range)
        #[arg(long)]
        values: Option<String>,
        /// fixed | variable | both
        #[arg(long, default_value = "both")]
        mode: String,
        #[arg(long, default_value_t = 1e-3)]
        theta: f64,
        #[arg(long)]
        no_optimize: bool,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Frame-level queue simulation
    Simulate {
        /// Constant arrivals in bits per frame
        #[arg(long)]
        arrival: Option<f64>,
        /// Set arrivals to the analytical effective rate at this theta
        #[arg(long, value_name = "THETA")]
        arrival_from_theta: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        /// Comma-separated buffer thresholds in bits
        #[arg(long)]
        q_levels: Option<String>,
        /// Overflow-curve CSV path
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Per-frame trace CSV path
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
}

/// Parse arguments from the process environment and run; returns the
/// process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; usage problems are config errors
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            EXIT_IO
        }
    }
}

fn write_file(path: &PathBuf, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn load_resolved(cli: &Cli) -> Result<Resolved, CliError> {
    let mut file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    for pair in &cli.set {
        file.set(pair)?;
    }
    Ok(Resolved::from_file(&file, cli.quad_order)?)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let resolved = load_resolved(&cli)?;
    match &cli.command {
        Command::Sense {
            sweep_lambda,
            out,
            i0_over_gain_db,
            peak_p1_db,
            peak_p2_db,
            interference_mode,
        } => cmd_sense(
            &resolved,
            sweep_lambda.as_deref(),
            out.as_ref(),
            *i0_over_gain_db,
            *peak_p1_db,
            *peak_p2_db,
            interference_mode,
        ),
        Command::Rate {
            snr,
            scenario,
            h2,
            blocklength,
            eps,
            rate,
        } => cmd_rate(&resolved, *snr, *scenario, *h2, *blocklength, *eps, *rate),
        Command::Effrate {
            theta,
            mode,
            no_optimize,
        } => cmd_effrate(&resolved, *theta, mode, *no_optimize),
        Command::Sweep {
            variable,
            range,
            values,
            mode,
            theta,
            no_optimize,
            out,
        } => {
            let variable = SweepVariable::parse(variable)?;
            let range = match (range, values) {
                (Some(r), None) => SweepRange::parse(r)?,
                (None, Some(v)) => SweepRange::Explicit(parse_values(v)?),
                _ => {
                    return Err(CliError::Config(
                        "exactly one of --range or --values is required".into(),
                    ))
                }
            };
            let spec = SweepSpec {
                variable,
                range,
                mode: SweepMode::parse(mode)?,
                theta: *theta,
                optimize: !no_optimize,
            };
            let rows = run_sweep(&spec, &resolved, cli.jobs)?;
            write_file(out, &to_csv(&spec, &rows))?;
            println!("wrote {} rows to {}", rows.len(), out.display());
            Ok(())
        }
        Command::Simulate {
            arrival,
            arrival_from_theta,
            horizon,
            q_levels,
            out,
            trace,
        } => cmd_simulate(
            &resolved,
            *arrival,
            *arrival_from_theta,
            *horizon,
            q_levels.as_deref(),
            out.as_ref(),
            trace.as_ref(),
            cli.seed,
        ),
    }
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad value '{v}' in --values")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// sense
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_sense(
    resolved: &Resolved,
    sweep_lambda: Option<&str>,
    out: Option<&PathBuf>,
    i0_over_gain_db: f64,
    peak_p1_db: f64,
    peak_p2_db: f64,
    interference_mode: &str,
) -> Result<(), CliError> {
    let sensing = resolved.sensing()?;
    let chain = resolved.chain()?;
    let perf = SensingPerf::from_config(&sensing);
    let (pr_busy, pr_idle) = priors(&chain);
    let (sb, si) = sensed_state_probs(&chain, &perf);

    println!("sensing report");
    println!("  samples (N*B):          {}", sensing.samples());
    if sensing.samples_rounded() {
        println!("  note: N*B was not an integer and was rounded");
    }
    println!("  detection prob (P_d):   {}", fmt9(perf.p_detect()));
    println!("  false alarm prob (P_f): {}", fmt9(perf.p_false_alarm()));
    if sensing.interference_var() == 0.0 {
        println!("  note: zero interference power, P_d equals P_f");
    }
    println!("  prior busy / idle:      {} / {}", fmt9(pr_busy), fmt9(pr_idle));
    println!("  sensed busy / idle:     {} / {}", fmt9(sb), fmt9(si));

    let mode = match interference_mode {
        "bound-p1" => InterferenceMode::BoundP1,
        "avg-interference" => InterferenceMode::AvgInterference,
        other => {
            return Err(CliError::Config(format!(
                "unknown interference mode '{other}' (expected bound-p1 or avg-interference)"
            )))
        }
    };
    let budget = InterferenceBudget::new(
        db_to_linear(i0_over_gain_db),
        db_to_linear(peak_p1_db),
        db_to_linear(peak_p2_db),
    )?;
    let report = check_power_feasibility(
        resolved.power_busy,
        resolved.power_idle,
        &perf,
        &budget,
        mode,
    );
    println!("  feasibility ({interference_mode}):");
    println!("    feasible:             {}", report.feasible);
    println!("    binding constraint:   {}", report.binding);
    println!("    slack:                {}", fmt9(report.slack));
    if let Some(avg) = report.avg_interference {
        println!("    avg interference:     {}", fmt9(avg));
    }
    println!("    max p2 given p1:      {}", fmt9(report.max_p2_given_p1));

    if let Some(range) = sweep_lambda {
        let out = out.ok_or_else(|| {
            CliError::Config("--sweep-lambda requires --out for the CSV".into())
        })?;
        let values = SweepRange::parse(range)?.values();
        let mut csv = String::from("lambda,p_d,p_f,pr_sensed_busy,pr_sensed_idle\n");
        for lam in values {
            let cfg = sensing
                .with_threshold(lam)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let perf = SensingPerf::from_config(&cfg);
            let (sb, si) = sensed_state_probs(&chain, &perf);
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt9(lam),
                fmt9(perf.p_detect()),
                fmt9(perf.p_false_alarm()),
                fmt9(sb),
                fmt9(si)
            ));
        }
        write_file(out, &csv)?;
        println!("wrote threshold sweep to {}", out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// rate
// ---------------------------------------------------------------------------

fn cmd_rate(
    resolved: &Resolved,
    snr: Option<f64>,
    scenario: usize,
    h2: f64,
    blocklength: Option<u32>,
    eps: f64,
    rate: Option<f64>,
) -> Result<(), CliError> {
    let frame = resolved.frame()?;
    let n = blocklength.unwrap_or_else(|| frame.blocklength());
    let snr = match snr {
        Some(v) => v,
        None => {
            let policy = resolved.policy()?;
            let sc = Scenario::from_index(scenario)?;
            policy.snrs().for_scenario(sc)
        }
    };
    println!("finite-blocklength rate report");
    println!("  snr:                  {}", fmt9(snr));
    println!("  fading power |h|^2:   {}", fmt9(h2));
    println!("  blocklength n:        {n}");
    println!("  capacity:             {} bits/s/Hz", fmt9(capacity(snr, h2)));
    let r = fb_rate(snr, h2, n, eps).map_err(|e| CliError::Config(e.to_string()))?;
    println!("  rate at eps={eps}:  {} bits/s/Hz", fmt9(r));
    if let Some(r) = rate {
        if r < 0.0 {
            return Err(CliError::Config(format!("rate must be nonnegative, got {r}")));
        }
        let e = fb_error_prob(snr, h2, n, r);
        println!("  error at rate {}: {}", fmt9(r), fmt9(e));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// effrate
// ---------------------------------------------------------------------------

fn print_effrate_result(label: &str, res: &EffRateResult) {
    println!("{label}");
    println!("  effective rate:  {} bits/s/Hz", fmt9(res.value));
    println!("  theta:           {}", fmt9(res.theta));
    match res.argmax {
        TxMode::Fixed { r1, r2 } => {
            println!("  rates (r1, r2):  {} , {}", fmt9(r1), fmt9(r2));
        }
        TxMode::Variable { eps } => {
            println!("  error target:    {}", fmt9(eps));
        }
    }
    println!(
        "  diagnostics:     clamp_fraction={} quad_order={} evals={} converged={}",
        fmt9(res.diagnostics.clamp_fraction),
        res.diagnostics.quad_order,
        res.diagnostics.iterations,
        res.diagnostics.converged
    );
}

fn cmd_effrate(resolved: &Resolved, theta: f64, mode: &str, no_optimize: bool) -> Result<(), CliError> {
    let mode = SweepMode::parse(mode)?;
    if matches!(mode, SweepMode::Fixed | SweepMode::Both) {
        let policy = resolved.policy_with_mode(TxMode::Fixed {
            r1: resolved.rate_busy,
            r2: resolved.rate_idle,
        })?;
        let res = if no_optimize {
            let value = if theta == 0.0 {
                crate::effrate::zero_theta_fixed(&policy)?
            } else {
                crate::effrate::effective_rate_fixed(theta, &policy)?
            };
            EffRateResult {
                value,
                theta,
                argmax: policy.mode,
                diagnostics: crate::effrate::Diagnostics {
                    clamp_fraction: 0.0,
                    quad_order: policy.rule.order(),
                    iterations: 1,
                    converged: true,
                },
            }
        } else {
            optimize_fixed(theta, &policy)?
        };
        print_effrate_result("fixed-rate transmission", &res);
        let cmp = zero_theta_fixed_comparison(&policy)?;
        println!(
            "  zero-theta check: closed form {} vs numerical limit {} (relative gap {})",
            fmt9(cmp.closed_form),
            fmt9(cmp.numerical_limit),
            fmt9(cmp.relative_gap)
        );
    }
    if matches!(mode, SweepMode::Variable | SweepMode::Both) {
        let policy = resolved.policy_with_mode(TxMode::Variable {
            eps: resolved.target_error,
        })?;
        let res = if no_optimize {
            let value = if theta == 0.0 {
                crate::effrate::zero_theta_variable(&policy)?
            } else {
                crate::effrate::effective_rate_variable(theta, &policy)?
            };
            EffRateResult {
                value,
                theta,
                argmax: policy.mode,
                diagnostics: crate::effrate::Diagnostics {
                    clamp_fraction: 0.0,
                    quad_order: policy.rule.order(),
                    iterations: 1,
                    converged: true,
                },
            }
        } else {
            optimize_variable(theta, &policy)?
        };
        print_effrate_result("variable-rate transmission", &res);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    resolved: &Resolved,
    arrival: Option<f64>,
    arrival_from_theta: Option<f64>,
    horizon: u64,
    q_levels: Option<&str>,
    out: Option<&PathBuf>,
    trace: Option<&PathBuf>,
    seed: u64,
) -> Result<(), CliError> {
    let policy = resolved.policy()?;
    let arrival = match (arrival, arrival_from_theta) {
        (Some(a), None) => a,
        (None, Some(theta)) => {
            let tb = policy.frame.frame_duration() * policy.frame.bandwidth();
            let value = match policy.mode {
                TxMode::Fixed { .. } => crate::effrate::effective_rate_fixed(theta, &policy)?,
                TxMode::Variable { .. } => {
                    crate::effrate::effective_rate_variable(theta, &policy)?
                }
            };
            let a = value * tb;
            println!(
                "arrivals set to TB * R_E({theta}) = {} bits/frame",
                fmt9(a)
            );
            a
        }
        (None, None) => {
            return Err(CliError::Config(
                "one of --arrival or --arrival-from-theta is required".into(),
            ))
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "--arrival and --arrival-from-theta are mutually exclusive".into(),
            ))
        }
    };

    let q_levels = match q_levels {
        Some(text) => parse_values(text)?,
        None => {
            let unit = if arrival > 0.0 { arrival } else { 1.0 };
            [5.0, 10.0, 20.0, 30.0, 45.0, 60.0, 80.0, 100.0, 125.0, 150.0]
                .iter()
                .map(|m| m * unit)
                .collect()
        }
    };

    let cfg = SimConfig::new(policy, arrival, horizon, seed, q_levels)?;
    let mut trace_rows: Vec<TraceRow> = Vec::new();
    let result = if trace.is_some() {
        run_sim_traced(&cfg, |row| trace_rows.push(row.clone()))?
    } else {
        crate::queuesim::run_sim(&cfg)?
    };

    print_sim_summary(&cfg, &result);

    if let Some(path) = out {
        let mut csv = String::from("q_bits,probability,std_error,hits\n");
        for o in &result.overflow {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt9(o.q_bits),
                fmt9(o.probability),
                fmt9(o.std_error),
                o.hits
            ));
        }
        write_file(path, &csv)?;
        println!("wrote overflow curve to {}", path.display());
    }
    if let Some(path) = trace {
        let mut csv = String::from("frame,busy,sensed_busy,h2,service_bits,queue_bits\n");
        for r in &trace_rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.frame,
                u8::from(r.busy),
                u8::from(r.sensed_busy),
                fmt9(r.h2),
                fmt9(r.service_bits),
                fmt9(r.queue_bits)
            ));
        }
        write_file(path, &csv)?;
        println!("wrote per-frame trace to {}", path.display());
    }
    Ok(())
}

fn print_sim_summary(cfg: &SimConfig, result: &SimResult) {
    println!("queue simulation summary");
    println!("  arrivals:        {} bits/frame", fmt9(cfg.arrival_bits_per_frame));
    println!(
        "  frames:          {} counted after {} burn-in",
        result.frames_counted, result.burn_in_frames
    );
    println!("  mean service:    {} bits/frame", fmt9(result.mean_service_bits));
    match &result.decay {
        Some(fit) => {
            println!(
                "  decay fit:       rate={} per bit over q in [{}, {}] ({} points, R^2={})",
                fmt9(fit.rate),
                fmt9(fit.window.0),
                fmt9(fit.window.1),
                fit.points,
                fmt9(fit.r_squared)
            );
        }
        None => println!("  decay fit:       unavailable"),
    }
    println!("  overflow curve:");
    for o in &result.overflow {
        println!(
            "    P(Q >= {:>14}) = {}  (se {}, hits {})",
            fmt9(o.q_bits),
            fmt9(o.probability),
            fmt9(o.std_error),
            o.hits
        );
    }
    print!("  state occupancy:");
    for f in result.state_occupancy {
        print!(" {}", fmt9(f));
    }
    println!();
    for w in &result.warnings {
        println!("  warning: {w}");
    }
}
