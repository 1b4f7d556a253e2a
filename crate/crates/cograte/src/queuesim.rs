//! Frame-level Monte Carlo validation of the buffer-overflow analysis.
//!
//! Each frame the simulator advances the primary-activity chain, draws the
//! sensing decision and the fading power, serves the queue with the
//! frame's (possibly zero) decoded payload and adds the constant arrivals.
//! Decoding success is a Bernoulli draw with the frame's analytical error
//! probability; a failed frame serves nothing and the data waits for
//! retransmission. The tail of the stationary queue distribution yields an
//! empirical decay rate to hold against the analytical effective rate.
//!
//! Randomness is counter-based and keyed by `(seed, frame)`, so runs are
//! reproducible and independent replications just use different seeds.

use crate::effrate::{EffRateError, LinkPolicy, TxMode};
use crate::fbcode::{
    fb_rate, mismatch_error_falsealarm, mismatch_error_missdetect, scenario_error_fixed,
    Scenario,
};
use crate::markov8::{transition_rows_fixed, transition_rows_variable, TransitionRows};
use crate::numerics::expect_over_fading;
use crate::rng::FrameRng;
use crate::sensing::{priors, InvalidParameter};

/// Burn-in fraction discarded before tail statistics are collected.
const BURN_IN_FRACTION: f64 = 0.1;

/// Below this many tail hits the binomial interval is unreliable; the
/// estimate is flagged and the error widened.
const MIN_TAIL_HITS: u64 = 10;

// ---------------------------------------------------------------------------
// Configuration and results
// ---------------------------------------------------------------------------

/// Queue-simulation setup: a link policy, constant arrivals in bits per
/// frame, the horizon, the RNG seed and the buffer thresholds to track.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub policy: LinkPolicy,
    pub arrival_bits_per_frame: f64,
    pub horizon_frames: u64,
    pub seed: u64,
    pub q_levels: Vec<f64>,
}

impl SimConfig {
    pub fn new(
        policy: LinkPolicy,
        arrival_bits_per_frame: f64,
        horizon_frames: u64,
        seed: u64,
        q_levels: Vec<f64>,
    ) -> Result<Self, InvalidParameter> {
        if !(arrival_bits_per_frame >= 0.0 && arrival_bits_per_frame.is_finite()) {
            return Err(InvalidParameter(format!(
                "arrival rate must be nonnegative, got {arrival_bits_per_frame}"
            )));
        }
        if horizon_frames < 10_000 {
            return Err(InvalidParameter(format!(
                "horizon must be at least 10000 frames, got {horizon_frames}"
            )));
        }
        if q_levels.is_empty() {
            return Err(InvalidParameter("q_levels must be nonempty".into()));
        }
        for w in q_levels.windows(2) {
            if w[1] <= w[0] {
                return Err(InvalidParameter(
                    "q_levels must be strictly increasing".into(),
                ));
            }
        }
        if q_levels[0] <= 0.0 {
            return Err(InvalidParameter("q_levels must be positive".into()));
        }
        Ok(Self {
            policy,
            arrival_bits_per_frame,
            horizon_frames,
            seed,
            q_levels,
        })
    }
}

/// Tail estimate at one buffer threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct OverflowEstimate {
    pub q_bits: f64,
    pub probability: f64,
    /// One binomial standard error (widened when hits are scarce).
    pub std_error: f64,
    pub hits: u64,
}

/// Fitted exponential decay of the overflow curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Decay rate of -log P(Q >= q) per bit.
    pub rate: f64,
    /// q-range of the fitted window.
    pub window: (f64, f64),
    /// Points inside the window.
    pub points: usize,
    pub r_squared: f64,
}

/// Simulation output: the overflow curve, the fitted decay rate (when the
/// tail supports a fit), state occupancy and mean service.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub overflow: Vec<OverflowEstimate>,
    pub decay: Option<DecayFit>,
    pub state_occupancy: [f64; 8],
    pub mean_service_bits: f64,
    pub frames_counted: u64,
    pub burn_in_frames: u64,
    pub warnings: Vec<String>,
}

/// One frame of simulation state, for optional trace output.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub frame: u64,
    pub busy: bool,
    pub sensed_busy: bool,
    pub h2: f64,
    pub service_bits: f64,
    pub queue_bits: f64,
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Run one replication of the frame-level queue simulation.
pub fn run_sim(cfg: &SimConfig) -> Result<SimResult, EffRateError> {
    run_sim_inner(cfg, None)
}

/// Like [`run_sim`], invoking the callback once per frame (including
/// burn-in) with the frame's trace row.
pub fn run_sim_traced<F>(cfg: &SimConfig, mut on_frame: F) -> Result<SimResult, EffRateError>
where
    F: FnMut(&TraceRow),
{
    run_sim_inner(cfg, Some(&mut on_frame))
}

fn run_sim_inner(
    cfg: &SimConfig,
    mut trace: Option<&mut dyn FnMut(&TraceRow)>,
) -> Result<SimResult, EffRateError> {
    let policy = &cfg.policy;
    let snrs = policy.snrs();
    let perf = policy.perf();
    let s = policy.chain.busy_to_idle();
    let q_trans = policy.chain.idle_to_busy();
    let pd = perf.p_detect();
    let pf = perf.p_false_alarm();
    let n_sym = policy.frame.blocklength();
    let n = n_sym as f64;
    let omega = policy.dist.mean_power();

    // validate eps eagerly for variable mode
    if let TxMode::Variable { eps } = policy.mode {
        crate::numerics::gaussian_q_inv(eps)?;
    }

    let burn_in = ((cfg.horizon_frames as f64) * BURN_IN_FRACTION) as u64;
    let mut queue = 0.0f64;
    let mut busy = {
        let mut rng = FrameRng::new(cfg.seed, 0);
        rng.uniform() < priors(&policy.chain).0
    };

    let mut hits = vec![0u64; cfg.q_levels.len()];
    let mut occupancy = [0u64; 8];
    let mut service_sum = 0.0f64;
    let mut counted = 0u64;

    for t in 1..=cfg.horizon_frames {
        let mut rng = FrameRng::new(cfg.seed, t);
        busy = if busy {
            rng.uniform() >= s
        } else {
            rng.uniform() < q_trans
        };
        let sensed_busy = rng.bernoulli(if busy { pd } else { pf });
        let h2 = rng.exponential(omega);

        let scenario = match (busy, sensed_busy) {
            (true, true) => Scenario::BusySensedBusy,
            (true, false) => Scenario::BusySensedIdle,
            (false, true) => Scenario::IdleSensedBusy,
            (false, false) => Scenario::IdleSensedIdle,
        };
        let (rate, err) = match policy.mode {
            TxMode::Fixed { r1, r2 } => {
                let rate = if sensed_busy { r1 } else { r2 };
                let err = scenario_error_fixed(scenario, h2, &snrs, &policy.frame, r1, r2);
                (rate, err)
            }
            TxMode::Variable { eps } => {
                let rate = fb_rate(
                    if sensed_busy { snrs.snr1() } else { snrs.snr4() },
                    h2,
                    n_sym,
                    eps,
                )?;
                let err = match scenario {
                    Scenario::BusySensedBusy | Scenario::IdleSensedIdle => eps,
                    Scenario::BusySensedIdle => {
                        mismatch_error_missdetect(h2, &snrs, &policy.frame, eps)?
                    }
                    Scenario::IdleSensedBusy => {
                        mismatch_error_falsealarm(h2, &snrs, &policy.frame, eps)?
                    }
                };
                (rate, err)
            }
        };
        let decoded = !rng.bernoulli(err);
        let service = if decoded { n * rate } else { 0.0 };
        queue = (queue + cfg.arrival_bits_per_frame - service).max(0.0);

        if let Some(cb) = trace.as_deref_mut() {
            cb(&TraceRow {
                frame: t,
                busy,
                sensed_busy,
                h2,
                service_bits: service,
                queue_bits: queue,
            });
        }

        if t > burn_in {
            counted += 1;
            service_sum += service;
            let state = 2 * (scenario.index() - 1) + usize::from(!decoded);
            occupancy[state] += 1;
            for (level, hit) in cfg.q_levels.iter().zip(hits.iter_mut()) {
                if queue >= *level {
                    *hit += 1;
                }
            }
        }
    }

    let mut warnings = Vec::new();
    let overflow: Vec<OverflowEstimate> = cfg
        .q_levels
        .iter()
        .zip(hits.iter())
        .map(|(&q_bits, &h)| {
            let p = h as f64 / counted as f64;
            let mut se = (p * (1.0 - p) / counted as f64).sqrt();
            if h < MIN_TAIL_HITS {
                se = se.max(3.0 / counted as f64);
            }
            OverflowEstimate {
                q_bits,
                probability: p,
                std_error: se,
                hits: h,
            }
        })
        .collect();
    if overflow.iter().any(|o| o.hits > 0 && o.hits < MIN_TAIL_HITS) {
        warnings.push(format!(
            "horizon too short for the deepest q_levels: fewer than {MIN_TAIL_HITS} tail hits; confidence intervals widened"
        ));
    }

    let curve: Vec<(f64, f64)> = overflow
        .iter()
        .map(|o| (o.q_bits, o.probability))
        .collect();
    let decay = match estimate_decay_rate(&curve) {
        Ok(fit) => Some(fit),
        Err(e) => {
            warnings.push(format!("decay-rate fit unavailable: {e}"));
            None
        }
    };

    let total = occupancy.iter().sum::<u64>() as f64;
    let mut state_occupancy = [0.0; 8];
    for (freq, &count) in state_occupancy.iter_mut().zip(occupancy.iter()) {
        *freq = count as f64 / total;
    }

    Ok(SimResult {
        overflow,
        decay,
        state_occupancy,
        mean_service_bits: service_sum / counted as f64,
        frames_counted: counted,
        burn_in_frames: burn_in,
        warnings,
    })
}

/// Least-squares fit of -log P(Q >= q) against q over the most linear
/// region of the overflow curve.
///
/// All contiguous windows of at least three positive-probability points
/// are scanned; the longest window with R² ≥ 0.98 wins (falling back to
/// the best-R² window when none qualifies). The fit window and R² are part
/// of the result rather than a hidden assumption.
pub fn estimate_decay_rate(curve: &[(f64, f64)]) -> Result<DecayFit, InvalidParameter> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|&(q, p)| (q, -p.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(InvalidParameter(format!(
            "need at least 3 q-levels with nonzero tail probability, got {}",
            pts.len()
        )));
    }

    fn fit(window: &[(f64, f64)]) -> (f64, f64) {
        let n = window.len() as f64;
        let sx: f64 = window.iter().map(|p| p.0).sum();
        let sy: f64 = window.iter().map(|p| p.1).sum();
        let sxx: f64 = window.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = window.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / denom;
        let intercept = (sy - slope * sx) / n;
        let mean_y = sy / n;
        let ss_tot: f64 = window.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
        let ss_res: f64 = window
            .iter()
            .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
            .sum();
        let r2 = if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else {
            1.0
        };
        (slope, r2)
    }

    let mut best: Option<(usize, usize, f64, f64)> = None; // (i, j, slope, r2)
    for i in 0..pts.len() {
        for j in (i + 3)..=pts.len() {
            let (slope, r2) = fit(&pts[i..j]);
            let len = j - i;
            let better = match best {
                None => true,
                Some((bi, bj, _, br2)) => {
                    let blen = bj - bi;
                    if r2 >= 0.98 && br2 >= 0.98 {
                        len > blen || (len == blen && r2 > br2)
                    } else if r2 >= 0.98 {
                        true
                    } else if br2 >= 0.98 {
                        false
                    } else {
                        r2 > br2
                    }
                }
            };
            if better {
                best = Some((i, j, slope, r2));
            }
        }
    }
    // pts carry -log p, so the decay rate is the slope itself
    let (i, j, slope, r2) = best.expect("at least one window");
    Ok(DecayFit {
        rate: slope,
        window: (pts[i].0, pts[j - 1].0),
        points: j - i,
        r_squared: r2,
    })
}

/// Analytical stationary occupancy of the eight states for the policy,
/// using fading-averaged transition rows.
pub fn analytical_occupancy(policy: &LinkPolicy) -> Result<[f64; 8], EffRateError> {
    let snrs = policy.snrs();
    let perf = policy.perf();
    let mut avg_busy = [0.0; 8];
    let mut avg_idle = [0.0; 8];
    for m in 0..8 {
        let rows_at = |h2: f64| -> Result<TransitionRows, EffRateError> {
            Ok(match policy.mode {
                TxMode::Fixed { r1, r2 } => transition_rows_fixed(
                    h2,
                    &policy.chain,
                    &perf,
                    &snrs,
                    &policy.frame,
                    r1,
                    r2,
                ),
                TxMode::Variable { eps } => transition_rows_variable(
                    h2,
                    &policy.chain,
                    &perf,
                    &snrs,
                    &policy.frame,
                    eps,
                )?,
            })
        };
        avg_busy[m] = expect_over_fading(
            |h2| rows_at(h2).map(|r| r.row_busy()[m]).unwrap_or(f64::NAN),
            &policy.dist,
            &policy.rule,
        )?;
        avg_idle[m] = expect_over_fading(
            |h2| rows_at(h2).map(|r| r.row_idle()[m]).unwrap_or(f64::NAN),
            &policy.dist,
            &policy.rule,
        )?;
    }
    let rows = TransitionRows::new(avg_busy, avg_idle)?;
    Ok(rows.stationary())
}

// ===========================================================================
// Tests
// ===========================================================================
