//! Finite-blocklength coding rate and error probability.
//!
//! With codewords of n = (T−N)B symbols, the achievable rate at error
//! probability ε falls below the instantaneous capacity by a dispersion
//! penalty, and conversely any fixed rate is supported only with a nonzero
//! error probability. This module evaluates both directions, the
//! per-scenario error probabilities of fixed-rate operation, the
//! channel-adaptive rates of variable-rate operation, and the actual error
//! probabilities under sensing mismatches (miss detection inflates the
//! error, false alarm deflates it).

use crate::numerics::{
    expect_over_fading, gaussian_q, gaussian_q_inv, FadingDist, NumericsError, QuadratureRule,
};
use crate::sensing::{priors, ActivityChain, InvalidParameter, SensingPerf};

const LOG2_E: f64 = std::f64::consts::LOG2_E;

// ---------------------------------------------------------------------------
// Frame timing
// ---------------------------------------------------------------------------

/// How the signal-to-noise ratio accounts for the sensing overhead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrScaling {
    /// Average power constraint over the data phase: SNR = P/(B·σ²).
    #[default]
    None,
    /// Total-frame energy constraint: the data-phase SNR gains a factor
    /// T/(T−N).
    EnergyConstrained,
}

/// Frame timing: T seconds per frame, the first N of which are spent
/// sensing, leaving a blocklength of (T−N)·B symbols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    frame_duration: f64,
    sense_duration: f64,
    bandwidth: f64,
    snr_scaling: SnrScaling,
    blocklength: u32,
}

impl FrameConfig {
    pub fn new(
        frame_duration: f64,
        sense_duration: f64,
        bandwidth: f64,
        snr_scaling: SnrScaling,
    ) -> Result<Self, InvalidParameter> {
        if !(sense_duration > 0.0 && sense_duration < frame_duration) {
            return Err(InvalidParameter(format!(
                "need 0 < sense duration < frame duration, got N={sense_duration}, T={frame_duration}"
            )));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(InvalidParameter(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        let exact = (frame_duration - sense_duration) * bandwidth;
        let rounded = exact.round();
        if !(rounded >= 2.0 && rounded <= u32::MAX as f64) {
            return Err(InvalidParameter(format!(
                "blocklength (T-N)*B must round to an integer >= 2, got {exact}"
            )));
        }
        Ok(Self {
            frame_duration,
            sense_duration,
            bandwidth,
            snr_scaling,
            blocklength: rounded as u32,
        })
    }

    pub fn frame_duration(&self) -> f64 {
        self.frame_duration
    }

    pub fn sense_duration(&self) -> f64 {
        self.sense_duration
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn snr_scaling(&self) -> SnrScaling {
        self.snr_scaling
    }

    /// Number of data symbols per frame.
    pub fn blocklength(&self) -> u32 {
        self.blocklength
    }

    /// Fraction of the frame spent transmitting, (T−N)/T.
    pub fn data_fraction(&self) -> f64 {
        (self.frame_duration - self.sense_duration) / self.frame_duration
    }

    /// Multiplier applied to every SNR under the configured scaling.
    pub fn snr_factor(&self) -> f64 {
        match self.snr_scaling {
            SnrScaling::None => 1.0,
            SnrScaling::EnergyConstrained => 1.0 / self.data_fraction(),
        }
    }

    pub fn with_frame_duration(&self, frame_duration: f64) -> Result<Self, InvalidParameter> {
        Self::new(
            frame_duration,
            self.sense_duration,
            self.bandwidth,
            self.snr_scaling,
        )
    }

    pub fn with_sense_duration(&self, sense_duration: f64) -> Result<Self, InvalidParameter> {
        Self::new(
            self.frame_duration,
            sense_duration,
            self.bandwidth,
            self.snr_scaling,
        )
    }
}

// ---------------------------------------------------------------------------
// Sensing scenarios and their SNRs
// ---------------------------------------------------------------------------

/// The four joint (truth, sensing decision) outcomes of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Busy channel sensed busy: power p1, interference present.
    BusySensedBusy,
    /// Busy channel sensed idle (miss detection): power p2, interference.
    BusySensedIdle,
    /// Idle channel sensed busy (false alarm): power p1, clean channel.
    IdleSensedBusy,
    /// Idle channel sensed idle: power p2, clean channel.
    IdleSensedIdle,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::BusySensedBusy,
        Scenario::BusySensedIdle,
        Scenario::IdleSensedBusy,
        Scenario::IdleSensedIdle,
    ];

    /// 1-based index in the conventional ordering.
    pub fn index(&self) -> usize {
        match self {
            Scenario::BusySensedBusy => 1,
            Scenario::BusySensedIdle => 2,
            Scenario::IdleSensedBusy => 3,
            Scenario::IdleSensedIdle => 4,
        }
    }

    pub fn from_index(index: usize) -> Result<Self, InvalidParameter> {
        Self::ALL
            .get(index.wrapping_sub(1))
            .copied()
            .ok_or_else(|| InvalidParameter(format!("scenario index must be 1..=4, got {index}")))
    }

    pub fn channel_busy(&self) -> bool {
        matches!(self, Scenario::BusySensedBusy | Scenario::BusySensedIdle)
    }

    pub fn sensed_busy(&self) -> bool {
        matches!(self, Scenario::BusySensedBusy | Scenario::IdleSensedBusy)
    }
}

/// Signal-to-noise ratios of the four scenarios.
///
/// Sensed busy selects power p1, sensed idle p2; a truly busy channel adds
/// the primary interference power to the noise floor. Interference can only
/// lower the SNR, so snr1 ≤ snr3 and snr2 ≤ snr4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSnrs {
    snr1: f64,
    snr2: f64,
    snr3: f64,
    snr4: f64,
}

impl ScenarioSnrs {
    pub fn new(snr1: f64, snr2: f64, snr3: f64, snr4: f64) -> Result<Self, InvalidParameter> {
        for (name, v) in [("snr1", snr1), ("snr2", snr2), ("snr3", snr3), ("snr4", snr4)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if snr1 > snr3 || snr2 > snr4 {
            return Err(InvalidParameter(
                "interference can only lower the SNR: need snr1 <= snr3 and snr2 <= snr4".into(),
            ));
        }
        Ok(Self {
            snr1,
            snr2,
            snr3,
            snr4,
        })
    }

    /// Build the four SNRs from linear powers and per-sample variances,
    /// applying the frame's SNR scaling.
    pub fn from_powers(
        p1: f64,
        p2: f64,
        frame: &FrameConfig,
        noise_var: f64,
        interference_var: f64,
    ) -> Result<Self, InvalidParameter> {
        if !(p1 > 0.0 && p2 > 0.0) {
            return Err(InvalidParameter(format!(
                "powers must be positive, got p1={p1}, p2={p2}"
            )));
        }
        if !(noise_var > 0.0) || interference_var < 0.0 {
            return Err(InvalidParameter(format!(
                "need noise_var > 0 and interference_var >= 0, got {noise_var}, {interference_var}"
            )));
        }
        let k = frame.snr_factor() / frame.bandwidth();
        let dirty = noise_var + interference_var;
        Self::new(
            p1 * k / dirty,
            p2 * k / dirty,
            p1 * k / noise_var,
            p2 * k / noise_var,
        )
    }

    pub fn snr1(&self) -> f64 {
        self.snr1
    }

    pub fn snr2(&self) -> f64 {
        self.snr2
    }

    pub fn snr3(&self) -> f64 {
        self.snr3
    }

    pub fn snr4(&self) -> f64 {
        self.snr4
    }

    pub fn for_scenario(&self, scenario: Scenario) -> f64 {
        match scenario {
            Scenario::BusySensedBusy => self.snr1,
            Scenario::BusySensedIdle => self.snr2,
            Scenario::IdleSensedBusy => self.snr3,
            Scenario::IdleSensedIdle => self.snr4,
        }
    }
}

// ---------------------------------------------------------------------------
// Rate/error kernel
// ---------------------------------------------------------------------------

/// Instantaneous capacity log2(1 + snr·|h|²) in bits/s/Hz.
pub fn capacity(snr: f64, h2: f64) -> f64 {
    (snr * h2).ln_1p() * LOG2_E
}

/// Dispersion square root sqrt((1/n)(1 − (1+v)^{-2})), computed in the
/// cancellation-free form v(2+v)/(1+v)².
fn dispersion_sqrt(v: f64, n: f64) -> f64 {
    let one_plus = 1.0 + v;
    (v * (2.0 + v) / (one_plus * one_plus * n)).sqrt()
}

fn check_eps(eps: f64) -> Result<(), NumericsError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(NumericsError::Domain(format!(
            "target error probability must be in (0,1), got {eps}"
        )));
    }
    Ok(())
}

fn check_blocklength(n: u32) -> Result<(), NumericsError> {
    if n < 2 {
        return Err(NumericsError::Domain(format!(
            "blocklength must be at least 2, got {n}"
        )));
    }
    Ok(())
}

/// Rate supported with error probability `eps` at blocklength `n`, before
/// clamping; negative values mean the dispersion penalty exceeds capacity.
pub fn fb_rate_unclamped(snr: f64, h2: f64, n: u32, eps: f64) -> Result<f64, NumericsError> {
    check_eps(eps)?;
    check_blocklength(n)?;
    let v = snr * h2;
    let z = gaussian_q_inv(eps)?;
    Ok(capacity(snr, h2) - dispersion_sqrt(v, n as f64) * z * LOG2_E)
}

/// Rate supported with error probability `eps`, clamped below at zero
/// (a zero-rate frame carries no data and always decodes).
pub fn fb_rate(snr: f64, h2: f64, n: u32, eps: f64) -> Result<f64, NumericsError> {
    Ok(fb_rate_unclamped(snr, h2, n, eps)?.max(0.0))
}

/// Error probability of transmitting at fixed rate `r` over a channel with
/// the given SNR and fading power.
///
/// At `h2 = 0` both capacity and dispersion vanish; the value is defined as
/// the analytic limit: 1 for r > 0, 0 for r = 0.
pub fn fb_error_prob(snr: f64, h2: f64, n: u32, r: f64) -> f64 {
    debug_assert!(snr > 0.0 && h2 >= 0.0 && r >= 0.0 && n >= 2);
    let v = snr * h2;
    if v == 0.0 {
        return if r > 0.0 { 1.0 } else { 0.0 };
    }
    let denom = dispersion_sqrt(v, n as f64) * LOG2_E;
    gaussian_q((capacity(snr, h2) - r) / denom)
}

/// Error probability of fixed-rate operation in the given scenario: rate r1
/// when sensed busy (scenarios 1, 3), r2 when sensed idle (scenarios 2, 4),
/// each at the scenario's own SNR.
pub fn scenario_error_fixed(
    scenario: Scenario,
    h2: f64,
    snrs: &ScenarioSnrs,
    frame: &FrameConfig,
    r1: f64,
    r2: f64,
) -> f64 {
    let rate = if scenario.sensed_busy() { r1 } else { r2 };
    fb_error_prob(snrs.for_scenario(scenario), h2, frame.blocklength(), rate)
}

/// Channel-adaptive transmission rate for the target error `eps`: computed
/// at snr1 when the channel was sensed busy, snr4 when sensed idle, and
/// clamped below at zero.
pub fn variable_rate(
    sensed_busy: bool,
    h2: f64,
    snrs: &ScenarioSnrs,
    frame: &FrameConfig,
    eps: f64,
) -> Result<f64, NumericsError> {
    let snr = if sensed_busy { snrs.snr1() } else { snrs.snr4() };
    fb_rate(snr, h2, frame.blocklength(), eps)
}

/// Miss-detection mismatch: the link transmits at the sensed-idle rate
/// (computed for snr4) while the channel actually runs at snr2; returns the
/// error probability actually incurred.
pub fn mismatch_error_missdetect(
    h2: f64,
    snrs: &ScenarioSnrs,
    frame: &FrameConfig,
    eps: f64,
) -> Result<f64, NumericsError> {
    check_eps(eps)?;
    let z = gaussian_q_inv(eps)?;
    Ok(mismatch_error(
        h2,
        snrs.snr4(),
        snrs.snr2(),
        frame.blocklength() as f64,
        z,
    ))
}

/// False-alarm mismatch: the link transmits at the sensed-busy rate
/// (computed for snr1) while the channel actually runs at snr3.
pub fn mismatch_error_falsealarm(
    h2: f64,
    snrs: &ScenarioSnrs,
    frame: &FrameConfig,
    eps: f64,
) -> Result<f64, NumericsError> {
    check_eps(eps)?;
    let z = gaussian_q_inv(eps)?;
    Ok(mismatch_error(
        h2,
        snrs.snr1(),
        snrs.snr3(),
        frame.blocklength() as f64,
        z,
    ))
}

/// Error probability when the rate was chosen for `snr_assumed` at target
/// quantile `z` but the channel actually runs at `snr_actual`.
fn mismatch_error(h2: f64, snr_assumed: f64, snr_actual: f64, n: f64, z: f64) -> f64 {
    if h2 == 0.0 {
        // limit of the expression below as h2 -> 0
        return gaussian_q((snr_assumed / snr_actual).sqrt() * z);
    }
    let num = capacity(snr_actual, h2) - capacity(snr_assumed, h2)
        + dispersion_sqrt(snr_assumed * h2, n) * z * LOG2_E;
    let den = dispersion_sqrt(snr_actual * h2, n) * LOG2_E;
    gaussian_q(num / den)
}

/// Average error probability of variable-rate operation: the target `eps`
/// in the correctly sensed scenarios and the fading-averaged mismatch
/// errors otherwise, weighted by the joint (truth, decision) probabilities.
#[allow(clippy::too_many_arguments)]
pub fn average_error_prob(
    chain: &ActivityChain,
    perf: &SensingPerf,
    snrs: &ScenarioSnrs,
    frame: &FrameConfig,
    eps: f64,
    dist: &FadingDist,
    rule: &QuadratureRule,
) -> Result<f64, NumericsError> {
    check_eps(eps)?;
    let z = gaussian_q_inv(eps)?;
    let n = frame.blocklength() as f64;
    let e_miss = expect_over_fading(
        |h2| mismatch_error(h2, snrs.snr4(), snrs.snr2(), n, z),
        dist,
        rule,
    )?;
    let e_false = expect_over_fading(
        |h2| mismatch_error(h2, snrs.snr1(), snrs.snr3(), n, z),
        dist,
        rule,
    )?;
    let (pr_busy, pr_idle) = priors(chain);
    let pd = perf.p_detect();
    let pf = perf.p_false_alarm();
    Ok(pr_busy * pd * eps
        + pr_busy * (1.0 - pd) * e_miss
        + pr_idle * pf * e_false
        + pr_idle * (1.0 - pf) * eps)
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::ActivityChain;
    use approx::assert_abs_diff_eq;

    // Generated by scripts/gen_reference_values.py.
    const FB_RATE_SNR3_N990_EPS1E3: f64 = 1.8628064454754709;
    const EPS2_DEFAULT_R2_0P02: f64 = 0.99010435854947406;
    const VRATE_SNR200_EPS1E3: f64 = 7.5093605509364979;
    const EPS_MISSDETECT_H1_DEFAULT: f64 = 0.057272907062241173;
    const EPS_FALSEALARM_H1_DEFAULT: f64 = 0.0086522160958510015;

    fn default_frame() -> FrameConfig {
        FrameConfig::new(0.1, 1e-3, 1e4, SnrScaling::None).unwrap()
    }

    fn default_snrs() -> ScenarioSnrs {
        ScenarioSnrs::from_powers(1.0, 10.0, &default_frame(), 0.05, 0.12).unwrap()
    }

    #[test]
    fn frame_config_basics() {
        let f = default_frame();
        assert_eq!(f.blocklength(), 990);
        assert_abs_diff_eq!(f.data_fraction(), 0.99, epsilon = 1e-15);
        assert_eq!(f.snr_factor(), 1.0);
        let e = FrameConfig::new(0.1, 1e-3, 1e4, SnrScaling::EnergyConstrained).unwrap();
        assert_abs_diff_eq!(e.snr_factor(), 0.1 / 0.099, epsilon = 1e-15);
        assert!(FrameConfig::new(0.1, 0.1, 1e4, SnrScaling::None).is_err());
        assert!(FrameConfig::new(1e-4, finite_n(), 1e4, SnrScaling::None).is_err());
        fn finite_n() -> f64 {
            9.99e-5 // leaves (T-N)B ~ 0.1 symbols
        }
    }

    #[test]
    fn scenario_snrs_from_default_powers() {
        let s = default_snrs();
        assert_abs_diff_eq!(s.snr1(), 1.0 / 1700.0, epsilon = 1e-18);
        assert_abs_diff_eq!(s.snr2(), 10.0 / 1700.0, epsilon = 1e-17);
        assert_abs_diff_eq!(s.snr3(), 1.0 / 500.0, epsilon = 1e-18);
        assert_abs_diff_eq!(s.snr4(), 10.0 / 500.0, epsilon = 1e-17);
        assert!(ScenarioSnrs::new(2.0, 1.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn fb_rate_examples() {
        // infinite-blocklength limit: dispersion penalty vanishes
        let r = fb_rate(3.0, 1.0, u32::MAX, 1e-3).unwrap();
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-4);
        // eps = 0.5 gives capacity exactly at any blocklength
        let r = fb_rate(3.0, 1.0, 990, 0.5).unwrap();
        assert_eq!(r, capacity(3.0, 1.0));
        // reference point
        let r = fb_rate(3.0, 1.0, 990, 1e-3).unwrap();
        assert_abs_diff_eq!(r, FB_RATE_SNR3_N990_EPS1E3, epsilon = 1e-12);
        // domain errors
        assert!(fb_rate(3.0, 1.0, 990, 0.0).is_err());
        assert!(fb_rate(3.0, 1.0, 990, 1.0).is_err());
        assert!(fb_rate(3.0, 1.0, 1, 0.1).is_err());
        // deep fade clamps to zero
        assert_eq!(fb_rate(0.02, 1e-6, 990, 1e-3).unwrap(), 0.0);
        assert!(fb_rate_unclamped(0.02, 1e-6, 990, 1e-3).unwrap() < 0.0);
    }

    #[test]
    fn fb_error_examples() {
        // at r = capacity the argument is exactly zero
        let c = capacity(3.0, 1.0);
        assert_eq!(fb_error_prob(3.0, 1.0, 990, c), 0.5);
        // round trip with the rate
        let r = fb_rate(3.0, 1.0, 990, 1e-3).unwrap();
        assert_abs_diff_eq!(fb_error_prob(3.0, 1.0, 990, r), 1e-3, epsilon = 1e-13);
        // above capacity, large blocklength: error -> 1
        assert!(fb_error_prob(3.0, 1.0, 1_000_000_000, 2.1) > 1.0 - 1e-12);
        // below capacity, large blocklength: error -> 0
        assert!(fb_error_prob(3.0, 1.0, 1_000_000_000, 1.9) < 1e-12);
        // h2 = 0 singularity
        assert_eq!(fb_error_prob(3.0, 0.0, 990, 0.5), 1.0);
        assert_eq!(fb_error_prob(3.0, 0.0, 990, 0.0), 0.0);
    }

    #[test]
    fn fb_round_trip_grid() {
        for &v in &[0.05f64, 0.3, 1.0, 3.0, 10.0, 60.0] {
            for &n in &[16u32, 200, 990, 20_000] {
                for &eps in &[1e-6, 1e-3, 0.05, 0.4, 0.9] {
                    let r = fb_rate_unclamped(v, 1.0, n, eps).unwrap();
                    if r <= 0.0 {
                        continue;
                    }
                    let back = fb_error_prob(v, 1.0, n, r);
                    assert!(
                        (back - eps).abs() < 1e-10,
                        "round trip: v={v} n={n} eps={eps} -> {back}"
                    );
                }
            }
        }
    }

    #[test]
    fn fb_monotonicity() {
        // rate nondecreasing in n, snr, h2; error nondecreasing in r
        let base = fb_rate(1.0, 1.0, 500, 1e-3).unwrap();
        assert!(fb_rate(1.0, 1.0, 5000, 1e-3).unwrap() >= base);
        assert!(fb_rate(2.0, 1.0, 500, 1e-3).unwrap() >= base);
        assert!(fb_rate(1.0, 2.0, 500, 1e-3).unwrap() >= base);
        let mut prev = -1.0;
        for i in 0..100 {
            let r = 0.05 * i as f64;
            let e = fb_error_prob(1.0, 1.0, 500, r);
            assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn scenario_errors() {
        let frame = default_frame();
        // no interference: scenarios 1 and 3 coincide
        let clean = ScenarioSnrs::from_powers(1.0, 10.0, &frame, 0.05, 0.0).unwrap();
        let e1 = scenario_error_fixed(Scenario::BusySensedBusy, 1.0, &clean, &frame, 0.01, 0.02);
        let e3 = scenario_error_fixed(Scenario::IdleSensedBusy, 1.0, &clean, &frame, 0.01, 0.02);
        assert_eq!(e1, e3);
        // zero rate when sensed busy: error below one half for h2 > 0
        let snrs = default_snrs();
        let e = scenario_error_fixed(Scenario::BusySensedBusy, 1.0, &snrs, &frame, 0.0, 0.02);
        assert!(e < 0.5);
        // frozen regression point for the miss-detection scenario
        let e2 = scenario_error_fixed(Scenario::BusySensedIdle, 1.0, &snrs, &frame, 0.0, 0.02);
        assert_abs_diff_eq!(e2, EPS2_DEFAULT_R2_0P02, epsilon = 1e-12);
        // far-above-capacity rate saturates
        let sat = scenario_error_fixed(Scenario::BusySensedIdle, 1.0, &snrs, &frame, 0.0, 2.0);
        assert!(sat > 1.0 - 1e-15);
    }

    #[test]
    fn variable_rate_examples() {
        let frame = default_frame();
        let snrs = ScenarioSnrs::new(1.0, 5.0, 2.0, 200.0).unwrap();
        // eps = 0.5: capacity exactly
        let r = variable_rate(false, 1.0, &snrs, &frame, 0.5).unwrap();
        assert_eq!(r, capacity(200.0, 1.0));
        // h2 = 0 clamps to zero
        assert_eq!(variable_rate(true, 0.0, &snrs, &frame, 1e-3).unwrap(), 0.0);
        // frozen scalar reference at snr4 = 200
        let r = variable_rate(false, 1.0, &snrs, &frame, 1e-3).unwrap();
        assert_abs_diff_eq!(r, VRATE_SNR200_EPS1E3, epsilon = 1e-12);
    }

    #[test]
    fn mismatch_reference_points() {
        let frame = default_frame();
        let snrs = default_snrs();
        let miss = mismatch_error_missdetect(1.0, &snrs, &frame, 1e-3).unwrap();
        assert_abs_diff_eq!(miss, EPS_MISSDETECT_H1_DEFAULT, epsilon = 1e-12);
        let fa = mismatch_error_falsealarm(1.0, &snrs, &frame, 1e-3).unwrap();
        assert_abs_diff_eq!(fa, EPS_FALSEALARM_H1_DEFAULT, epsilon = 1e-12);
    }

    #[test]
    fn mismatch_identity_when_no_interference() {
        let frame = default_frame();
        let clean = ScenarioSnrs::from_powers(1.0, 10.0, &frame, 0.05, 0.0).unwrap();
        for i in 0..100 {
            let h2 = 0.05 + 0.1 * i as f64;
            let miss = mismatch_error_missdetect(h2, &clean, &frame, 1e-3).unwrap();
            let fa = mismatch_error_falsealarm(h2, &clean, &frame, 1e-3).unwrap();
            assert!((miss - 1e-3).abs() < 1e-12, "miss at h2={h2}: {miss}");
            assert!((fa - 1e-3).abs() < 1e-12, "fa at h2={h2}: {fa}");
        }
    }

    #[test]
    fn mismatch_ordering_in_operational_regime() {
        // moderate SNRs where the unclamped rates stay positive
        let frame = default_frame();
        let snrs = ScenarioSnrs::new(1.0, 5.0, 2.0, 10.0).unwrap();
        for i in 0..100 {
            let h2 = 0.05 + (10.0 - 0.05) * i as f64 / 99.0;
            let miss = mismatch_error_missdetect(h2, &snrs, &frame, 1e-3).unwrap();
            let fa = mismatch_error_falsealarm(h2, &snrs, &frame, 1e-3).unwrap();
            assert!(miss >= 1e-3, "miss ordering at h2={h2}: {miss}");
            assert!(fa <= 1e-3, "false-alarm ordering at h2={h2}: {fa}");
        }
    }

    #[test]
    fn mismatch_extreme_interference() {
        let frame = default_frame();
        // enormous interference: snr2 << snr4 drives the miss error to 1,
        // snr1 << snr3 drives the false-alarm error to 0
        let snrs = ScenarioSnrs::new(1e-9, 5e-9, 2.0, 10.0).unwrap();
        assert!(mismatch_error_missdetect(1.0, &snrs, &frame, 1e-3).unwrap() > 1.0 - 1e-9);
        assert!(mismatch_error_falsealarm(1.0, &snrs, &frame, 1e-3).unwrap() < 1e-9);
    }

    #[test]
    fn average_error_collapses_under_perfect_sensing() {
        let chain = ActivityChain::new(0.6, 0.2).unwrap();
        let frame = default_frame();
        let snrs = default_snrs();
        let dist = FadingDist::unit();
        let rule = QuadratureRule::exponential(64).unwrap();
        let perfect = SensingPerf::new(1.0, 0.0).unwrap();
        let avg = average_error_prob(&chain, &perfect, &snrs, &frame, 1e-3, &dist, &rule).unwrap();
        assert_abs_diff_eq!(avg, 1e-3, epsilon = 1e-15);

        // no interference: mismatch errors equal the target for any perf
        let clean = ScenarioSnrs::from_powers(1.0, 10.0, &frame, 0.05, 0.0).unwrap();
        let perf = SensingPerf::new(0.7, 0.2).unwrap();
        let avg = average_error_prob(&chain, &perf, &clean, &frame, 1e-3, &dist, &rule).unwrap();
        assert_abs_diff_eq!(avg, 1e-3, epsilon = 1e-12);
    }

    #[test]
    fn average_error_bounded_by_components() {
        let chain = ActivityChain::new(0.6, 0.2).unwrap();
        let frame = default_frame();
        let snrs = default_snrs();
        let dist = FadingDist::unit();
        let rule = QuadratureRule::exponential(96).unwrap();
        let perf = SensingPerf::new(0.923936524858, 0.004995412308).unwrap();
        let eps = 1e-3;
        let avg = average_error_prob(&chain, &perf, &snrs, &frame, eps, &dist, &rule).unwrap();
        let z = gaussian_q_inv(eps).unwrap();
        let n = frame.blocklength() as f64;
        let e_miss = expect_over_fading(
            |h2| mismatch_error(h2, snrs.snr4(), snrs.snr2(), n, z),
            &dist,
            &rule,
        )
        .unwrap();
        let e_false = expect_over_fading(
            |h2| mismatch_error(h2, snrs.snr1(), snrs.snr3(), n, z),
            &dist,
            &rule,
        )
        .unwrap();
        let lo = eps.min(e_miss).min(e_false);
        let hi = eps.max(e_miss).max(e_false);
        assert!(avg >= lo && avg <= hi, "avg={avg} outside [{lo}, {hi}]");
    }
}
