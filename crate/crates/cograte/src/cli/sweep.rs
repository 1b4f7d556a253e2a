//! Parameter sweeps with CSV output.
//!
//! A sweep varies one parameter over a range, re-derives the policy at
//! each point, optimizes (or evaluates) the effective rate in the
//! requested modes and emits one CSV row per point. Points are evaluated
//! concurrently up to the `--jobs` limit; rows are written in sweep order
//! regardless of completion order, so output files are deterministic.

use super::config::{ConfigError, Resolved};
use crate::effrate::{
    effective_rate_fixed_at, effective_rate_variable_at, optimize_fixed, optimize_variable,
    zero_theta_fixed_at, zero_theta_variable_at, EffRateError, TxMode,
};
use crate::fbcode::average_error_prob;
use crate::sensing::{detection_prob, false_alarm_prob};
use rayon::prelude::*;

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Lambda,
    SenseN,
    Theta,
    Blocklength,
    Eps,
    RatePair,
}

impl SweepVariable {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        Ok(match name {
            "lambda" => Self::Lambda,
            "sense-n" | "sense_n" => Self::SenseN,
            "theta" => Self::Theta,
            "blocklength" => Self::Blocklength,
            "eps" => Self::Eps,
            "rate-pair" | "rate_pair" => Self::RatePair,
            other => {
                return Err(ConfigError(format!(
                    "unknown sweep variable '{other}' (expected lambda, sense-n, theta, \
                     blocklength, eps or rate-pair)"
                )))
            }
        })
    }

    fn column(&self) -> &'static str {
        match self {
            Self::Lambda => "lambda",
            Self::SenseN => "sense_n",
            Self::Theta => "theta",
            Self::Blocklength => "blocklength",
            Self::Eps => "eps",
            Self::RatePair => "r1",
        }
    }
}

/// Value grid: a (lo, hi, steps) range, optionally log-spaced, or an
/// explicit list.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepRange {
    Linear { lo: f64, hi: f64, steps: usize },
    Log { lo: f64, hi: f64, steps: usize },
    Explicit(Vec<f64>),
}

impl SweepRange {
    /// Parse "lo:hi:steps" or "lo:hi:steps:log".
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let parts: Vec<&str> = text.split(':').collect();
        if !(parts.len() == 3 || parts.len() == 4) {
            return Err(ConfigError(format!(
                "range must be lo:hi:steps[:log], got '{text}'"
            )));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| ConfigError(format!("bad range bound '{}'", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| ConfigError(format!("bad range bound '{}'", parts[1])))?;
        let steps: usize = parts[2]
            .parse()
            .map_err(|_| ConfigError(format!("bad step count '{}'", parts[2])))?;
        if !(lo < hi) {
            return Err(ConfigError(format!("range needs lo < hi, got {lo}..{hi}")));
        }
        if steps < 2 {
            return Err(ConfigError(format!("range needs steps >= 2, got {steps}")));
        }
        match parts.get(3) {
            None => Ok(Self::Linear { lo, hi, steps }),
            Some(&"log") => {
                if lo <= 0.0 {
                    return Err(ConfigError("log range needs lo > 0".into()));
                }
                Ok(Self::Log { lo, hi, steps })
            }
            Some(other) => Err(ConfigError(format!("unknown range suffix '{other}'"))),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Linear { lo, hi, steps } => (0..*steps)
                .map(|i| lo + (hi - lo) * i as f64 / (*steps - 1) as f64)
                .collect(),
            Self::Log { lo, hi, steps } => {
                let (llo, lhi) = (lo.ln(), hi.ln());
                (0..*steps)
                    .map(|i| (llo + (lhi - llo) * i as f64 / (*steps - 1) as f64).exp())
                    .collect()
            }
            Self::Explicit(v) => v.clone(),
        }
    }
}

/// Which transmission regimes a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Fixed,
    Variable,
    Both,
}

impl SweepMode {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        Ok(match name {
            "fixed" => Self::Fixed,
            "variable" => Self::Variable,
            "both" => Self::Both,
            other => {
                return Err(ConfigError(format!(
                    "unknown mode '{other}' (expected fixed, variable or both)"
                )))
            }
        })
    }

    fn fixed(&self) -> bool {
        matches!(self, Self::Fixed | Self::Both)
    }

    fn variable(&self) -> bool {
        matches!(self, Self::Variable | Self::Both)
    }
}

/// A fully specified sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub range: SweepRange,
    pub mode: SweepMode,
    pub theta: f64,
    /// Optimize transmission parameters at each point; when false, the
    /// configured rates / error target are used as-is.
    pub optimize: bool,
}

/// One CSV row of sweep output. Missing entries print as empty fields.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub var: f64,
    pub var2: Option<f64>,
    pub re_fixed: Option<f64>,
    pub re_variable: Option<f64>,
    pub p_d: f64,
    pub p_f: f64,
    pub opt_r1: Option<f64>,
    pub opt_r2: Option<f64>,
    pub opt_eps: Option<f64>,
    pub avg_error: Option<f64>,
}

/// Errors carry enough context to map onto the CLI exit codes.
#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Eval(#[from] EffRateError),
}

/// Nine-significant-digit CSV number format.
pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt9).unwrap_or_default()
}

/// Re-derive the resolved parameters with the swept variable applied.
fn apply_variable(
    base: &Resolved,
    variable: SweepVariable,
    value: f64,
) -> Result<Resolved, ConfigError> {
    let mut r = base.clone();
    match variable {
        SweepVariable::Lambda => r.threshold = value,
        SweepVariable::SenseN => r.sense_secs = value,
        SweepVariable::Blocklength => {
            // sweep the blocklength by stretching the frame at fixed N, B
            r.frame_secs = r.sense_secs + value / r.bandwidth_hz;
        }
        SweepVariable::Theta | SweepVariable::Eps | SweepVariable::RatePair => {}
    }
    Ok(r)
}

fn evaluate_point(spec: &SweepSpec, base: &Resolved, value: f64) -> Result<SweepRow, SweepError> {
    let resolved = apply_variable(base, spec.variable, value)?;
    let sensing = resolved.sensing()?;
    let p_d = detection_prob(&sensing);
    let p_f = false_alarm_prob(&sensing);
    let theta = if spec.variable == SweepVariable::Theta {
        value
    } else {
        spec.theta
    };

    let mut row = SweepRow {
        var: value,
        var2: None,
        re_fixed: None,
        re_variable: None,
        p_d,
        p_f,
        opt_r1: None,
        opt_r2: None,
        opt_eps: None,
        avg_error: None,
    };

    if spec.mode.fixed() && spec.variable != SweepVariable::Eps {
        let policy = resolved.policy_with_mode(TxMode::Fixed {
            r1: resolved.rate_busy,
            r2: resolved.rate_idle,
        })?;
        if spec.optimize {
            let res = optimize_fixed(theta, &policy)?;
            row.re_fixed = Some(res.value);
            if let TxMode::Fixed { r1, r2 } = res.argmax {
                row.opt_r1 = Some(r1);
                row.opt_r2 = Some(r2);
            }
        } else {
            let v = if theta == 0.0 {
                zero_theta_fixed_at(&policy, resolved.rate_busy, resolved.rate_idle)?
            } else {
                effective_rate_fixed_at(theta, &policy, resolved.rate_busy, resolved.rate_idle)?
            };
            row.re_fixed = Some(v);
            row.opt_r1 = Some(resolved.rate_busy);
            row.opt_r2 = Some(resolved.rate_idle);
        }
    }

    if spec.mode.variable() {
        let eps_fixed_point = if spec.variable == SweepVariable::Eps {
            Some(value)
        } else if spec.optimize {
            None
        } else {
            Some(resolved.target_error)
        };
        let policy = resolved.policy_with_mode(TxMode::Variable {
            eps: eps_fixed_point.unwrap_or(resolved.target_error),
        })?;
        let eps = match eps_fixed_point {
            Some(eps) => {
                let v = if theta == 0.0 {
                    zero_theta_variable_at(&policy, eps)?
                } else {
                    effective_rate_variable_at(theta, &policy, eps)?
                };
                row.re_variable = Some(v);
                eps
            }
            None => {
                let res = optimize_variable(theta, &policy)?;
                row.re_variable = Some(res.value);
                let TxMode::Variable { eps } = res.argmax else {
                    unreachable!("variable optimizer returns a variable argmax");
                };
                eps
            }
        };
        row.opt_eps = Some(eps);
        row.avg_error = Some(
            average_error_prob(
                &policy.chain,
                &policy.perf(),
                &policy.snrs(),
                &policy.frame,
                eps,
                &policy.dist,
                &policy.rule,
            )
            .map_err(EffRateError::from)?,
        );
    }

    Ok(row)
}

fn evaluate_rate_pair(
    spec: &SweepSpec,
    base: &Resolved,
    r1: f64,
    r2: f64,
) -> Result<SweepRow, SweepError> {
    let sensing = base.sensing()?;
    let policy = base.policy_with_mode(TxMode::Fixed { r1, r2 })?;
    let v = if spec.theta == 0.0 {
        zero_theta_fixed_at(&policy, r1, r2)?
    } else {
        effective_rate_fixed_at(spec.theta, &policy, r1, r2)?
    };
    Ok(SweepRow {
        var: r1,
        var2: Some(r2),
        re_fixed: Some(v),
        re_variable: None,
        p_d: detection_prob(&sensing),
        p_f: false_alarm_prob(&sensing),
        opt_r1: None,
        opt_r2: None,
        opt_eps: None,
        avg_error: None,
    })
}

/// Run the sweep and return rows in sweep order.
pub fn run_sweep(spec: &SweepSpec, base: &Resolved, jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    let points: Vec<(f64, Option<f64>)> = match spec.variable {
        SweepVariable::RatePair => {
            let vals = spec.range.values();
            vals.iter()
                .flat_map(|&a| vals.iter().map(move |&b| (a, Some(b))))
                .collect()
        }
        _ => spec.range.values().into_iter().map(|v| (v, None)).collect(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ConfigError(format!("cannot build thread pool: {e}")))?;
    pool.install(|| {
        points
            .par_iter()
            .map(|&(a, b)| match b {
                Some(r2) => evaluate_rate_pair(spec, base, a, r2),
                None => evaluate_point(spec, base, a),
            })
            .collect()
    })
}

/// Serialize rows as CSV: comma-separated, header row, LF endings, UTF-8.
pub fn to_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(spec.variable.column());
    if spec.variable == SweepVariable::RatePair {
        out.push_str(",r2");
    }
    out.push_str(",re_fixed,re_variable,p_d,p_f,opt_r1,opt_r2,opt_eps,avg_error\n");
    for row in rows {
        out.push_str(&fmt9(row.var));
        if let Some(v2) = row.var2 {
            out.push(',');
            out.push_str(&fmt9(v2));
        }
        out.push(',');
        out.push_str(&fmt_opt(row.re_fixed));
        out.push(',');
        out.push_str(&fmt_opt(row.re_variable));
        out.push(',');
        out.push_str(&fmt9(row.p_d));
        out.push(',');
        out.push_str(&fmt9(row.p_f));
        out.push(',');
        out.push_str(&fmt_opt(row.opt_r1));
        out.push(',');
        out.push_str(&fmt_opt(row.opt_r2));
        out.push(',');
        out.push_str(&fmt_opt(row.opt_eps));
        out.push(',');
        out.push_str(&fmt_opt(row.avg_error));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::FileConfig;

    fn base() -> Resolved {
        let mut cfg = FileConfig::default();
        cfg.quad_order = Some(24); // keep tests fast
        Resolved::from_file(&cfg, None).unwrap()
    }

    #[test]
    fn range_parsing() {
        assert_eq!(
            SweepRange::parse("0:1:3").unwrap(),
            SweepRange::Linear {
                lo: 0.0,
                hi: 1.0,
                steps: 3
            }
        );
        let vals = SweepRange::parse("1e-4:1:5:log").unwrap().values();
        assert_eq!(vals.len(), 5);
        assert!((vals[0] - 1e-4).abs() < 1e-18);
        assert!((vals[4] - 1.0).abs() < 1e-12);
        assert!((vals[2] - 1e-2).abs() < 1e-12);
        assert!(SweepRange::parse("1:0:5").is_err());
        assert!(SweepRange::parse("0:1:1").is_err());
        assert!(SweepRange::parse("0:1:5:exp").is_err());
        assert!(SweepRange::parse("-1:1:5:log").is_err());
    }

    #[test]
    fn lambda_sweep_monotone_detector_columns() {
        let spec = SweepSpec {
            variable: SweepVariable::Lambda,
            range: SweepRange::Linear {
                lo: 0.05,
                hi: 0.25,
                steps: 6,
            },
            mode: SweepMode::Variable,
            theta: 0.001,
            optimize: false,
        };
        let rows = run_sweep(&spec, &base(), 1).unwrap();
        assert_eq!(rows.len(), 6);
        for w in rows.windows(2) {
            assert!(w[1].p_d < w[0].p_d);
            assert!(w[1].p_f <= w[0].p_f);
        }
        let csv = to_csv(&spec, &rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "lambda,re_fixed,re_variable,p_d,p_f,opt_r1,opt_r2,opt_eps,avg_error"
        );
        assert_eq!(csv.lines().count(), 7);
        // fixed-mode columns are empty in variable-only sweeps
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert!(fields[1].is_empty());
        assert!(!fields[2].is_empty());
    }

    #[test]
    fn jobs_do_not_change_results() {
        let spec = SweepSpec {
            variable: SweepVariable::Theta,
            range: SweepRange::Log {
                lo: 1e-3,
                hi: 1e-1,
                steps: 3,
            },
            mode: SweepMode::Fixed,
            theta: 0.0,
            optimize: false,
        };
        let seq = run_sweep(&spec, &base(), 1).unwrap();
        let par = run_sweep(&spec, &base(), 4).unwrap();
        assert_eq!(to_csv(&spec, &seq), to_csv(&spec, &par));
    }

    #[test]
    fn rate_pair_sweep_is_a_grid() {
        let spec = SweepSpec {
            variable: SweepVariable::RatePair,
            range: SweepRange::Linear {
                lo: 0.0,
                hi: 0.03,
                steps: 4,
            },
            mode: SweepMode::Fixed,
            theta: 0.001,
            optimize: false,
        };
        let rows = run_sweep(&spec, &base(), 2).unwrap();
        assert_eq!(rows.len(), 16);
        let csv = to_csv(&spec, &rows);
        assert!(csv.starts_with(
            "r1,r2,re_fixed,re_variable,p_d,p_f,opt_r1,opt_r2,opt_eps,avg_error\n"
        ));
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(0.25), "2.50000000e-1");
        assert_eq!(fmt9(1234.5678), "1.23456780e3");
    }
}
