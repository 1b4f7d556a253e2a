//! Eight-state Markov model of the cognitive channel.
//!
//! A frame lands in one of four sensing scenarios, and within a scenario
//! decoding either succeeds (ON) or fails (OFF), giving eight states in
//! the order: scenario-major, ON before OFF. Transitions out of a state
//! depend only on whether the channel was truly busy or idle, so the 8×8
//! transition matrix has just two distinct rows and rank 2. That structure
//! gives the spectral radius of the MGF-weighted matrix — the quantity the
//! effective rate is built from — in closed form, and the 8×8 matrix never
//! needs to be materialized outside of test oracles.

use crate::fbcode::{
    fb_rate, mismatch_error_falsealarm, mismatch_error_missdetect, scenario_error_fixed,
    FrameConfig, Scenario, ScenarioSnrs,
};
use crate::numerics::{expect_over_fading, FadingDist, NumericsError, QuadratureRule};
use crate::sensing::{ActivityChain, InvalidParameter, SensingPerf};

/// Decoding outcome of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decode {
    On,
    Off,
}

/// One of the eight channel states: a sensing scenario plus the decoding
/// outcome. The 1-based state index follows scenario-major ordering with
/// ON before OFF, so ON states are 1, 3, 5, 7.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelState {
    pub scenario: Scenario,
    pub decoding: Decode,
}

impl ChannelState {
    pub fn index(&self) -> usize {
        2 * (self.scenario.index() - 1) + usize::from(self.decoding == Decode::Off) + 1
    }

    pub fn from_index(index: usize) -> Result<Self, InvalidParameter> {
        if !(1..=8).contains(&index) {
            return Err(InvalidParameter(format!(
                "state index must be 1..=8, got {index}"
            )));
        }
        let scenario = Scenario::from_index((index - 1) / 2 + 1)?;
        let decoding = if index % 2 == 1 { Decode::On } else { Decode::Off };
        Ok(Self { scenario, decoding })
    }
}

// ---------------------------------------------------------------------------
// Transition rows
// ---------------------------------------------------------------------------

const ROW_SUM_TOL: f64 = 1e-12;

/// The two distinct rows of the 8×8 transition matrix: one conditioned on
/// the channel having been truly busy, one on it having been idle.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRows {
    row_busy: [f64; 8],
    row_idle: [f64; 8],
}

impl TransitionRows {
    pub fn new(row_busy: [f64; 8], row_idle: [f64; 8]) -> Result<Self, InvalidParameter> {
        for (name, row) in [("busy", &row_busy), ("idle", &row_idle)] {
            for (i, &p) in row.iter().enumerate() {
                if !(-1e-15..=1.0 + 1e-15).contains(&p) {
                    return Err(InvalidParameter(format!(
                        "{name} row entry {i} out of [0,1]: {p}"
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(InvalidParameter(format!(
                    "{name} row sums to {sum}, must be 1 within {ROW_SUM_TOL}"
                )));
            }
        }
        Ok(Self { row_busy, row_idle })
    }

    pub fn row_busy(&self) -> &[f64; 8] {
        &self.row_busy
    }

    pub fn row_idle(&self) -> &[f64; 8] {
        &self.row_idle
    }

    /// Row out of the given 1-based state (states 1-4 are busy-truth).
    pub fn row_for_state(&self, index: usize) -> &[f64; 8] {
        if index <= 4 {
            &self.row_busy
        } else {
            &self.row_idle
        }
    }

    /// Stationary distribution of the rank-2 chain.
    pub fn stationary(&self) -> [f64; 8] {
        let to_busy_from_busy: f64 = self.row_busy[..4].iter().sum();
        let to_busy_from_idle: f64 = self.row_idle[..4].iter().sum();
        // solve pb = pb*a + (1-pb)*b
        let pb = to_busy_from_idle / (1.0 - to_busy_from_busy + to_busy_from_idle);
        let mut pi = [0.0; 8];
        for m in 0..8 {
            pi[m] = pb * self.row_busy[m] + (1.0 - pb) * self.row_idle[m];
        }
        pi
    }
}

/// Shared column factors of both rows: sensing outcome × decode outcome
/// for each destination state, given the four per-scenario error
/// probabilities.
fn column_factors(perf: &SensingPerf, eps: [f64; 4]) -> [f64; 8] {
    let pd = perf.p_detect();
    let pf = perf.p_false_alarm();
    [
        pd * (1.0 - eps[0]),
        pd * eps[0],
        (1.0 - pd) * (1.0 - eps[1]),
        (1.0 - pd) * eps[1],
        pf * (1.0 - eps[2]),
        pf * eps[2],
        (1.0 - pf) * (1.0 - eps[3]),
        (1.0 - pf) * eps[3],
    ]
}

fn rows_from_factors(chain: &ActivityChain, factors: [f64; 8]) -> TransitionRows {
    let s = chain.busy_to_idle();
    let q = chain.idle_to_busy();
    let mut row_busy = [0.0; 8];
    let mut row_idle = [0.0; 8];
    for m in 0..8 {
        let (stay_busy, enter_busy) = if m < 4 { (1.0 - s, q) } else { (s, 1.0 - q) };
        row_busy[m] = stay_busy * factors[m];
        row_idle[m] = enter_busy * factors[m];
    }
    TransitionRows { row_busy, row_idle }
}

/// Transition rows of fixed-rate operation at fading power `h2`: the
/// per-scenario error probabilities come from the fixed rates r1, r2.
pub fn transition_rows_fixed(
    h2: f64,
    chain: &ActivityChain,
    perf: &SensingPerf,
    snrs: &ScenarioSnrs,
    frame: &FrameConfig,
    r1: f64,
    r2: f64,
) -> TransitionRows {
    let eps = [
        scenario_error_fixed(Scenario::BusySensedBusy, h2, snrs, frame, r1, r2),
        scenario_error_fixed(Scenario::BusySensedIdle, h2, snrs, frame, r1, r2),
        scenario_error_fixed(Scenario::IdleSensedBusy, h2, snrs, frame, r1, r2),
        scenario_error_fixed(Scenario::IdleSensedIdle, h2, snrs, frame, r1, r2),
    ];
    rows_from_factors(chain, column_factors(perf, eps))
}

/// Transition rows of variable-rate operation at fading power `h2`:
/// correctly sensed scenarios fail at the target `eps`, miss detection at
/// the inflated mismatch error, false alarm at the deflated one. Columns
/// 1, 2, 7, 8 do not depend on `h2`.
pub fn transition_rows_variable(
    h2: f64,
    chain: &ActivityChain,
    perf: &SensingPerf,
    snrs: &ScenarioSnrs,
    frame: &FrameConfig,
    eps: f64,
) -> Result<TransitionRows, NumericsError> {
    let eps_miss = mismatch_error_missdetect(h2, snrs, frame, eps)?;
    let eps_false = mismatch_error_falsealarm(h2, snrs, frame, eps)?;
    Ok(rows_from_factors(
        chain,
        column_factors(perf, [eps, eps_miss, eps_false, eps]),
    ))
}

// ---------------------------------------------------------------------------
// Per-state MGF diagonal
// ---------------------------------------------------------------------------

/// Diagonal of per-state service MGFs evaluated at −θ. OFF states serve
/// nothing, so their entries are exactly 1; ON entries lie in (0, 1] for
/// θ ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiDiag {
    entries: [f64; 8],
}

impl PhiDiag {
    pub fn new(entries: [f64; 8]) -> Result<Self, InvalidParameter> {
        for m in [1usize, 3, 5, 7] {
            if entries[m] != 1.0 {
                return Err(InvalidParameter(format!(
                    "OFF-state entry {} must be exactly 1, got {}",
                    m + 1,
                    entries[m]
                )));
            }
        }
        for m in [0usize, 2, 4, 6] {
            if !(entries[m] > 0.0 && entries[m] <= 1.0) {
                return Err(InvalidParameter(format!(
                    "ON-state entry {} must be in (0,1], got {}",
                    m + 1,
                    entries[m]
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[f64; 8] {
        &self.entries
    }
}

/// MGF diagonal of fixed-rate operation: ON states serve (T−N)B·r bits
/// deterministically, so the entries are e^{−θ(T−N)B·r}.
pub fn phi_fixed(theta: f64, frame: &FrameConfig, r1: f64, r2: f64) -> PhiDiag {
    debug_assert!(theta >= 0.0 && r1 >= 0.0 && r2 >= 0.0);
    let n = frame.blocklength() as f64;
    let on1 = (-theta * n * r1).exp();
    let on2 = (-theta * n * r2).exp();
    PhiDiag {
        entries: [on1, 1.0, on2, 1.0, on1, 1.0, on2, 1.0],
    }
}

/// MGF diagonal of variable-rate operation: the ON-state service depends
/// on the fading draw, so the entries are fading expectations of
/// e^{−θ(T−N)B·r(|h|²)} with the clamped adaptive rates.
pub fn phi_variable(
    theta: f64,
    frame: &FrameConfig,
    snrs: &ScenarioSnrs,
    eps: f64,
    dist: &FadingDist,
    rule: &QuadratureRule,
) -> Result<PhiDiag, NumericsError> {
    debug_assert!(theta >= 0.0);
    crate::numerics::gaussian_q_inv(eps)?;
    if theta == 0.0 {
        // the MGF at zero is identically one; skip the integration so the
        // entries are exact
        return Ok(PhiDiag { entries: [1.0; 8] });
    }
    let n = frame.blocklength();
    let nf = n as f64;
    let on1 = expect_over_fading(
        |h2| {
            let r = fb_rate(snrs.snr1(), h2, n, eps).expect("eps validated above");
            (-theta * nf * r).exp()
        },
        dist,
        rule,
    )?;
    let on2 = expect_over_fading(
        |h2| {
            let r = fb_rate(snrs.snr4(), h2, n, eps).expect("eps validated above");
            (-theta * nf * r).exp()
        },
        dist,
        rule,
    )?;
    Ok(PhiDiag {
        entries: [on1, 1.0, on2, 1.0, on1, 1.0, on2, 1.0],
    })
}

// ---------------------------------------------------------------------------
// Rank-2 spectral radius
// ---------------------------------------------------------------------------

/// Largest-magnitude eigenvalue of diag(φ)·R for the rank-2 transition
/// matrix, in closed form.
///
/// Writing a, c for the φ-weighted busy-row mass on the busy-truth and
/// idle-truth column blocks and b, d for the idle row, the nonzero
/// spectrum is that of the 2×2 matrix [[a, c], [b, d]]:
/// (a+d)/2 + sqrt((a−d)² + 4bc)/2. The discriminant is assembled with
/// `hypot` so near-cancelling a ≈ d costs no precision, and b, c ≥ 0
/// keeps it nonnegative.
pub fn spectral_radius_rank2(phi: &PhiDiag, rows: &TransitionRows) -> f64 {
    let f = phi.entries();
    let rb = rows.row_busy();
    let ri = rows.row_idle();
    let mut a = 0.0; // busy row, columns 1-4
    let mut c = 0.0; // busy row, columns 5-8
    let mut b = 0.0; // idle row, columns 1-4
    let mut d = 0.0; // idle row, columns 5-8
    for m in 0..4 {
        a += f[m] * rb[m];
        b += f[m] * ri[m];
    }
    for m in 4..8 {
        c += f[m] * rb[m];
        d += f[m] * ri[m];
    }
    0.5 * (a + d) + 0.5 * f64::hypot(a - d, 2.0 * (b * c).sqrt())
}

// ===========================================================================
// Tests
// ===========================================================================
