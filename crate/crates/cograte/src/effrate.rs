//! Effective-rate evaluation and optimization.
//!
//! The effective rate at QoS exponent θ is the largest constant arrival
//! rate (bits/s/Hz) the link can carry while the queue-length tail decays
//! at rate θ. For the rank-2 channel model it reduces to
//! −ln E{sp(φ(−θ)·R(|h|²))} / (θTB): the spectral radius of the
//! MGF-weighted transition matrix, averaged over fading. Fixed-rate
//! operation is optimized over the rate pair (r1, r2); variable-rate
//! operation over the target error probability. θ = 0 is handled by
//! dedicated closed forms, never by dividing by θ.

use crate::fbcode::{
    fb_rate, fb_rate_unclamped, scenario_error_fixed, FrameConfig, Scenario, ScenarioSnrs,
};
use crate::markov8::{
    phi_fixed, phi_variable, spectral_radius_rank2, transition_rows_fixed,
    transition_rows_variable,
};
use crate::numerics::{
    expect_over_fading, FadingDist, NumericsError, QuadratureRule, NODE_FLOOR,
};
use crate::sensing::{ActivityChain, InvalidParameter, SensingConfig, SensingPerf};
use thiserror::Error;

/// Errors from effective-rate evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EffRateError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    InvalidParameter(#[from] InvalidParameter),
    #[error("domain error: {0}")]
    Domain(String),
}

// ---------------------------------------------------------------------------
// Link policy
// ---------------------------------------------------------------------------

/// Transmission regime: fixed rates when only the receiver knows the
/// channel, a fixed error target with channel-adaptive rates when the
/// transmitter knows it too.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TxMode {
    Fixed { r1: f64, r2: f64 },
    Variable { eps: f64 },
}

/// Complete description of the link: activity chain, detector, frame
/// timing, the two power levels, the transmission mode, and the fading
/// model with its quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPolicy {
    pub chain: ActivityChain,
    pub sensing: SensingConfig,
    pub frame: FrameConfig,
    pub p1: f64,
    pub p2: f64,
    pub mode: TxMode,
    pub dist: FadingDist,
    pub rule: QuadratureRule,
}

impl LinkPolicy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        chain: ActivityChain,
        sensing: SensingConfig,
        frame: FrameConfig,
        p1: f64,
        p2: f64,
        mode: TxMode,
        dist: FadingDist,
        rule: QuadratureRule,
    ) -> Result<Self, InvalidParameter> {
        if !(p1 > 0.0 && p2 > 0.0 && p1.is_finite() && p2.is_finite()) {
            return Err(InvalidParameter(format!(
                "powers must be positive and finite, got p1={p1}, p2={p2}"
            )));
        }
        if p1 > p2 {
            return Err(InvalidParameter(format!(
                "sensed-busy power must not exceed sensed-idle power, got p1={p1} > p2={p2}"
            )));
        }
        let bw_gap = (sensing.bandwidth() - frame.bandwidth()).abs();
        if bw_gap > 1e-9 * frame.bandwidth() {
            return Err(InvalidParameter(format!(
                "sensing and frame bandwidths disagree: {} vs {}",
                sensing.bandwidth(),
                frame.bandwidth()
            )));
        }
        match mode {
            TxMode::Fixed { r1, r2 } => {
                if !(r1 >= 0.0 && r2 >= 0.0 && r1.is_finite() && r2.is_finite()) {
                    return Err(InvalidParameter(format!(
                        "fixed rates must be nonnegative, got r1={r1}, r2={r2}"
                    )));
                }
            }
            TxMode::Variable { eps } => {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(InvalidParameter(format!(
                        "target error probability must be in (0,1), got {eps}"
                    )));
                }
            }
        }
        Ok(Self {
            chain,
            sensing,
            frame,
            p1,
            p2,
            mode,
            dist,
            rule,
        })
    }

    /// Scenario SNRs implied by the powers and the noise/interference
    /// variances of the sensing configuration.
    pub fn snrs(&self) -> ScenarioSnrs {
        ScenarioSnrs::from_powers(
            self.p1,
            self.p2,
            &self.frame,
            self.sensing.noise_var(),
            self.sensing.interference_var(),
        )
        .expect("validated at construction")
    }

    /// Analytical detector operating point.
    pub fn perf(&self) -> SensingPerf {
        SensingPerf::from_config(&self.sensing)
    }

    pub fn with_mode(&self, mode: TxMode) -> Result<Self, InvalidParameter> {
        let mut p = self.clone();
        p.mode = mode;
        LinkPolicy::new(
            p.chain, p.sensing, p.frame, p.p1, p.p2, p.mode, p.dist, p.rule,
        )
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// Evaluation metadata carried alongside an optimized effective rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Probability mass of fading states where an adaptive rate had to be
    /// clamped to zero (always 0 in fixed mode).
    pub clamp_fraction: f64,
    pub quad_order: usize,
    /// Objective evaluations spent by the optimizer.
    pub iterations: usize,
    pub converged: bool,
}

/// An effective-rate value with the parameters that attained it.
#[derive(Debug, Clone, PartialEq)]
pub struct EffRateResult {
    /// Effective rate in bits/s/Hz.
    pub value: f64,
    pub theta: f64,
    /// Optimizing parameters: rates in fixed mode, error target otherwise.
    pub argmax: TxMode,
    pub diagnostics: Diagnostics,
}

/// Side-by-side report of the zero-θ closed form against the numerical
/// θ→0 limit of the general expression (they are not algebraically
/// identical; the gap is reported, not reconciled).
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroThetaComparison {
    pub closed_form: f64,
    pub numerical_limit: f64,
    pub relative_gap: f64,
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn require_positive_theta(theta: f64) -> Result<(), EffRateError> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(EffRateError::Domain(format!(
            "theta must be positive (use the zero-theta form at 0), got {theta}"
        )));
    }
    Ok(())
}

fn fixed_rates(policy: &LinkPolicy) -> Result<(f64, f64), EffRateError> {
    match policy.mode {
        TxMode::Fixed { r1, r2 } => Ok((r1, r2)),
        TxMode::Variable { .. } => Err(EffRateError::Domain(
            "operation requires a fixed-rate policy".into(),
        )),
    }
}

fn variable_eps(policy: &LinkPolicy) -> Result<f64, EffRateError> {
    match policy.mode {
        TxMode::Variable { eps } => Ok(eps),
        TxMode::Fixed { .. } => Err(EffRateError::Domain(
            "operation requires a variable-rate policy".into(),
        )),
    }
}

/// Effective rate of fixed-rate operation at QoS exponent θ > 0.
pub fn effective_rate_fixed(theta: f64, policy: &LinkPolicy) -> Result<f64, EffRateError> {
    let (r1, r2) = fixed_rates(policy)?;
    effective_rate_fixed_at(theta, policy, r1, r2)
}

/// Same as [`effective_rate_fixed`] with explicit rates, used by the
/// optimizer without rebuilding policies.
pub fn effective_rate_fixed_at(
    theta: f64,
    policy: &LinkPolicy,
    r1: f64,
    r2: f64,
) -> Result<f64, EffRateError> {
    require_positive_theta(theta)?;
    let snrs = policy.snrs();
    let perf = policy.perf();
    let phi = phi_fixed(theta, &policy.frame, r1, r2);
    let mean_sp = expect_over_fading(
        |h2| {
            let rows = transition_rows_fixed(
                h2,
                &policy.chain,
                &perf,
                &snrs,
                &policy.frame,
                r1,
                r2,
            );
            spectral_radius_rank2(&phi, &rows)
        },
        &policy.dist,
        &policy.rule,
    )?;
    let tb = policy.frame.frame_duration() * policy.frame.bandwidth();
    Ok((-mean_sp.ln() / (theta * tb)).max(0.0))
}

/// Effective rate of variable-rate operation at QoS exponent θ > 0.
pub fn effective_rate_variable(theta: f64, policy: &LinkPolicy) -> Result<f64, EffRateError> {
    let eps = variable_eps(policy)?;
    effective_rate_variable_at(theta, policy, eps)
}

/// Same as [`effective_rate_variable`] with an explicit error target.
pub fn effective_rate_variable_at(
    theta: f64,
    policy: &LinkPolicy,
    eps: f64,
) -> Result<f64, EffRateError> {
    require_positive_theta(theta)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(EffRateError::Domain(format!(
            "target error probability must be in (0,1), got {eps}"
        )));
    }
    let snrs = policy.snrs();
    let perf = policy.perf();
    // Inner fading expectations (the ON-state MGFs) are computed once and
    // enter the outer integrand as constants.
    let phi = phi_variable(theta, &policy.frame, &snrs, eps, &policy.dist, &policy.rule)?;
    let mut inner_err: Option<NumericsError> = None;
    let mean_sp = expect_over_fading(
        |h2| {
            match transition_rows_variable(h2, &policy.chain, &perf, &snrs, &policy.frame, eps)
            {
                Ok(rows) => spectral_radius_rank2(&phi, &rows),
                Err(e) => {
                    inner_err = Some(e);
                    f64::NAN
                }
            }
        },
        &policy.dist,
        &policy.rule,
    );
    if let Some(e) = inner_err {
        return Err(e.into());
    }
    let tb = policy.frame.frame_duration() * policy.frame.bandwidth();
    Ok((-mean_sp?.ln() / (theta * tb)).max(0.0))
}

/// Fading-averaged per-scenario error probabilities of fixed-rate
/// operation.
fn mean_scenario_errors(
    policy: &LinkPolicy,
    snrs: &ScenarioSnrs,
    r1: f64,
    r2: f64,
) -> Result<[f64; 4], EffRateError> {
    let mut out = [0.0; 4];
    for (i, scenario) in Scenario::ALL.iter().enumerate() {
        out[i] = expect_over_fading(
            |h2| scenario_error_fixed(*scenario, h2, snrs, &policy.frame, r1, r2),
            &policy.dist,
            &policy.rule,
        )?;
    }
    Ok(out)
}

fn zero_theta_weights(chain: &ActivityChain) -> (f64, f64, f64) {
    let s = chain.busy_to_idle();
    let q = chain.idle_to_busy();
    let w_busy = (1.0 - s) * (3.0 * q - s) + 4.0 * s * q;
    let w_idle = (1.0 - s) * (3.0 * s - q) + 4.0 * s * q;
    (w_busy, w_idle, 2.0 * (s + q))
}

/// Buffer-unconstrained throughput of fixed-rate operation (closed form of
/// the θ → 0 expression).
pub fn zero_theta_fixed(policy: &LinkPolicy) -> Result<f64, EffRateError> {
    let (r1, r2) = fixed_rates(policy)?;
    zero_theta_fixed_at(policy, r1, r2)
}

/// Same as [`zero_theta_fixed`] with explicit rates.
pub fn zero_theta_fixed_at(policy: &LinkPolicy, r1: f64, r2: f64) -> Result<f64, EffRateError> {
    let snrs = policy.snrs();
    let perf = policy.perf();
    let e = mean_scenario_errors(policy, &snrs, r1, r2)?;
    let (w_busy, w_idle, denom) = zero_theta_weights(&policy.chain);
    let c = policy.frame.data_fraction() / denom;
    let pd = perf.p_detect();
    let pf = perf.p_false_alarm();
    Ok(c * (r1 * pd * w_busy * (1.0 - e[0])
        + r2 * (1.0 - pd) * w_busy * (1.0 - e[1])
        + r1 * pf * w_idle * (1.0 - e[2])
        + r2 * (1.0 - pf) * w_idle * (1.0 - e[3])))
}

/// Buffer-unconstrained throughput of variable-rate operation (closed form
/// of the θ → 0 expression).
pub fn zero_theta_variable(policy: &LinkPolicy) -> Result<f64, EffRateError> {
    let eps = variable_eps(policy)?;
    zero_theta_variable_at(policy, eps)
}

/// Same as [`zero_theta_variable`] with an explicit error target.
pub fn zero_theta_variable_at(policy: &LinkPolicy, eps: f64) -> Result<f64, EffRateError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(EffRateError::Domain(format!(
            "target error probability must be in (0,1), got {eps}"
        )));
    }
    let snrs = policy.snrs();
    let perf = policy.perf();
    let n = policy.frame.blocklength();
    let mean_r1 = expect_over_fading(
        |h2| fb_rate(snrs.snr1(), h2, n, eps).expect("eps validated"),
        &policy.dist,
        &policy.rule,
    )?;
    let mean_r2 = expect_over_fading(
        |h2| fb_rate(snrs.snr4(), h2, n, eps).expect("eps validated"),
        &policy.dist,
        &policy.rule,
    )?;
    let mean_miss = expect_over_fading(
        |h2| {
            crate::fbcode::mismatch_error_missdetect(h2, &snrs, &policy.frame, eps)
                .expect("eps validated")
        },
        &policy.dist,
        &policy.rule,
    )?;
    let mean_false = expect_over_fading(
        |h2| {
            crate::fbcode::mismatch_error_falsealarm(h2, &snrs, &policy.frame, eps)
                .expect("eps validated")
        },
        &policy.dist,
        &policy.rule,
    )?;
    let (w_busy, w_idle, denom) = zero_theta_weights(&policy.chain);
    let c = policy.frame.data_fraction() / denom;
    let pd = perf.p_detect();
    let pf = perf.p_false_alarm();
    Ok(c * (mean_r1 * pd * w_busy * (1.0 - eps)
        + mean_r2 * (1.0 - pd) * w_busy * (1.0 - mean_miss)
        + mean_r1 * pf * w_idle * (1.0 - mean_false)
        + mean_r2 * (1.0 - pf) * w_idle * (1.0 - eps)))
}

/// θ used as the numerical θ → 0 stand-in.
pub const THETA_LIMIT: f64 = 1e-9;

/// Evaluate both routes to the buffer-unconstrained fixed-rate throughput:
/// the printed closed form and the numerical θ → 0 limit of the general
/// expression.
pub fn zero_theta_fixed_comparison(policy: &LinkPolicy) -> Result<ZeroThetaComparison, EffRateError> {
    let closed_form = zero_theta_fixed(policy)?;
    let numerical_limit = effective_rate_fixed(THETA_LIMIT, policy)?;
    let scale = numerical_limit.abs().max(1e-300);
    Ok(ZeroThetaComparison {
        closed_form,
        numerical_limit,
        relative_gap: (closed_form - numerical_limit) / scale,
    })
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

const COARSE_GRID_2D: usize = 25;
const COARSE_GRID_1D: usize = 48;
const EPS_MIN: f64 = 1e-8;
const EPS_MAX: f64 = 0.995;

/// Fraction of fading mass where either adaptive rate clamps to zero.
fn clamp_fraction_variable(policy: &LinkPolicy, eps: f64) -> Result<f64, EffRateError> {
    let snrs = policy.snrs();
    let n = policy.frame.blocklength();
    Ok(expect_over_fading(
        |h2| {
            let a = fb_rate_unclamped(snrs.snr1(), h2, n, eps).expect("eps validated");
            let b = fb_rate_unclamped(snrs.snr4(), h2, n, eps).expect("eps validated");
            if a < 0.0 || b < 0.0 {
                1.0
            } else {
                0.0
            }
        },
        &policy.dist,
        &policy.rule,
    )?)
}

/// Maximize fixed-rate throughput over the rate pair (r1, r2).
///
/// Coarse grid over [0, r_max]² followed by compass-search refinement
/// multi-started from the four corners of the best grid cell; r_max is the
/// capacity at the strongest SNR and the 99th-percentile fading power.
pub fn optimize_fixed(theta: f64, policy: &LinkPolicy) -> Result<EffRateResult, EffRateError> {
    if theta < 0.0 || !theta.is_finite() {
        return Err(EffRateError::Domain(format!(
            "theta must be nonnegative, got {theta}"
        )));
    }
    let snrs = policy.snrs();
    let h2_q99 = policy.dist.upper_quantile(0.01).max(NODE_FLOOR);
    let r_max = crate::fbcode::capacity(snrs.snr4(), h2_q99);
    let mut evals = 0usize;
    let mut objective = |r1: f64, r2: f64| -> Result<f64, EffRateError> {
        evals += 1;
        if theta == 0.0 {
            zero_theta_fixed_at(policy, r1, r2)
        } else {
            effective_rate_fixed_at(theta, policy, r1, r2)
        }
    };

    let step = r_max / (COARSE_GRID_2D - 1) as f64;
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for i in 0..COARSE_GRID_2D {
        for j in 0..COARSE_GRID_2D {
            let (r1, r2) = (i as f64 * step, j as f64 * step);
            let v = objective(r1, r2)?;
            if v > best.2 {
                best = (r1, r2, v);
            }
        }
    }

    // corners of the grid cell around the coarse maximum
    let starts = [
        (best.0, best.1),
        ((best.0 + step).min(r_max), best.1),
        (best.0, (best.1 + step).min(r_max)),
        ((best.0 + step).min(r_max), (best.1 + step).min(r_max)),
    ];
    let tol = (r_max * 1e-7).max(1e-12);
    let mut winner = best;
    let mut converged = false;
    for &(s1, s2) in &starts {
        let (r1, r2, v, ok) = compass_search_2d(&mut objective, s1, s2, step, r_max, tol)?;
        if v > winner.2 {
            winner = (r1, r2, v);
            converged = ok;
        } else if (v - winner.2).abs() <= 1e-12 {
            converged = converged || ok;
        }
    }

    Ok(EffRateResult {
        value: winner.2.max(0.0),
        theta,
        argmax: TxMode::Fixed {
            r1: winner.0,
            r2: winner.1,
        },
        diagnostics: Diagnostics {
            clamp_fraction: 0.0,
            quad_order: policy.rule.order(),
            iterations: evals,
            converged,
        },
    })
}

fn compass_search_2d<F>(
    objective: &mut F,
    mut r1: f64,
    mut r2: f64,
    mut step: f64,
    r_max: f64,
    tol: f64,
) -> Result<(f64, f64, f64, bool), EffRateError>
where
    F: FnMut(f64, f64) -> Result<f64, EffRateError>,
{
    let mut value = objective(r1, r2)?;
    let mut rounds = 0usize;
    while step > tol && rounds < 400 {
        rounds += 1;
        let candidates = [
            ((r1 + step).min(r_max), r2),
            ((r1 - step).max(0.0), r2),
            (r1, (r2 + step).min(r_max)),
            (r1, (r2 - step).max(0.0)),
        ];
        let mut improved = false;
        for &(c1, c2) in &candidates {
            let v = objective(c1, c2)?;
            if v > value {
                value = v;
                r1 = c1;
                r2 = c2;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((r1, r2, value, step <= tol))
}

/// Maximize variable-rate throughput over the target error probability.
///
/// Coarse grid on log-ε, then golden-section refinement inside the
/// bracketing grid cells.
pub fn optimize_variable(theta: f64, policy: &LinkPolicy) -> Result<EffRateResult, EffRateError> {
    if theta < 0.0 || !theta.is_finite() {
        return Err(EffRateError::Domain(format!(
            "theta must be nonnegative, got {theta}"
        )));
    }
    let mut evals = 0usize;
    let mut objective = |eps: f64| -> Result<f64, EffRateError> {
        evals += 1;
        if theta == 0.0 {
            zero_theta_variable_at(policy, eps)
        } else {
            effective_rate_variable_at(theta, policy, eps)
        }
    };

    let (lo, hi) = (EPS_MIN.ln(), EPS_MAX.ln());
    let mut best = (lo, f64::NEG_INFINITY);
    let mut grid = Vec::with_capacity(COARSE_GRID_1D);
    for i in 0..COARSE_GRID_1D {
        let x = lo + (hi - lo) * i as f64 / (COARSE_GRID_1D - 1) as f64;
        let v = objective(x.exp())?;
        grid.push((x, v));
        if v > best.1 {
            best = (x, v);
        }
    }
    let k = grid
        .iter()
        .position(|&(x, _)| x == best.0)
        .expect("best point from grid");
    let mut a = grid[k.saturating_sub(1)].0;
    let mut b = grid[(k + 1).min(COARSE_GRID_1D - 1)].0;

    // golden-section on log-eps
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = objective(c.exp())?;
    let mut fd = objective(d.exp())?;
    let mut iters = 0usize;
    while (b - a) > 1e-10 && iters < 200 {
        iters += 1;
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = objective(c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = objective(d.exp())?;
        }
    }
    let x_star = 0.5 * (a + b);
    let eps_star = x_star.exp();
    let v_star = objective(eps_star)?;
    let (eps_star, v_star) = if v_star >= best.1 {
        (eps_star, v_star)
    } else {
        (best.0.exp(), best.1)
    };

    Ok(EffRateResult {
        value: v_star.max(0.0),
        theta,
        argmax: TxMode::Variable { eps: eps_star },
        diagnostics: Diagnostics {
            clamp_fraction: clamp_fraction_variable(policy, eps_star)?,
            quad_order: policy.rule.order(),
            iterations: evals,
            converged: (b - a) <= 1e-10,
        },
    })
}

// ===========================================================================
// Tests
// ===========================================================================
