//! Energy-detector channel sensing and primary-activity statistics.
//!
//! The licensed user's activity is a two-state (busy/idle) Markov chain.
//! Each frame the secondary link listens for `N` seconds, forms the average
//! energy of the `NB` complex samples, and compares it against a threshold.
//! Under the Gaussian signal model the statistic is gamma-distributed, so
//! detection and false-alarm probabilities reduce to regularized incomplete
//! gamma evaluations. The module also exposes the Bayes-combined
//! sensed-state probabilities, a sample-level Monte Carlo of the detector,
//! and feasibility checks for the interference constraints that cap the
//! transmit powers.

use crate::numerics::regularized_gamma_q;
use crate::rng::FrameRng;
use thiserror::Error;

/// Parameter-validation error for the sensing types.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameter: {0}")]
pub struct InvalidParameter(pub String);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), InvalidParameter> {
    if cond {
        Ok(())
    } else {
        Err(InvalidParameter(msg.into()))
    }
}

// ---------------------------------------------------------------------------
// Primary-activity chain
// ---------------------------------------------------------------------------

/// Two-state Markov chain for the primary users' activity.
///
/// `busy_to_idle` is the probability of leaving the busy state between
/// frames and `idle_to_busy` the probability of entering it. Both must be
/// strictly inside (0, 1) so the chain is ergodic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityChain {
    busy_to_idle: f64,
    idle_to_busy: f64,
}

impl ActivityChain {
    pub fn new(busy_to_idle: f64, idle_to_busy: f64) -> Result<Self, InvalidParameter> {
        ensure(
            busy_to_idle > 0.0 && busy_to_idle < 1.0,
            format!("busy->idle transition probability must be in (0,1), got {busy_to_idle}"),
        )?;
        ensure(
            idle_to_busy > 0.0 && idle_to_busy < 1.0,
            format!("idle->busy transition probability must be in (0,1), got {idle_to_busy}"),
        )?;
        Ok(Self {
            busy_to_idle,
            idle_to_busy,
        })
    }

    pub fn busy_to_idle(&self) -> f64 {
        self.busy_to_idle
    }

    pub fn idle_to_busy(&self) -> f64 {
        self.idle_to_busy
    }
}

/// Stationary prior probabilities `(pr_busy, pr_idle)` of the channel
/// being occupied or free. The pair sums to one exactly.
pub fn priors(chain: &ActivityChain) -> (f64, f64) {
    let s = chain.busy_to_idle();
    let q = chain.idle_to_busy();
    let pr_busy = q / (q + s);
    (pr_busy, 1.0 - pr_busy)
}

// ---------------------------------------------------------------------------
// Detector configuration and performance
// ---------------------------------------------------------------------------

/// Energy-detector configuration.
///
/// `sense_duration` seconds of a `bandwidth`-wide channel give
/// `sense_duration * bandwidth` complex samples; the per-sample average
/// energy is compared with `threshold`. `noise_var` is the background noise
/// power and `interference_var` the aggregate primary-signal power at the
/// sensing receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingConfig {
    sense_duration: f64,
    bandwidth: f64,
    threshold: f64,
    noise_var: f64,
    interference_var: f64,
    samples: u32,
    samples_rounded: bool,
}

impl SensingConfig {
    pub fn new(
        sense_duration: f64,
        bandwidth: f64,
        threshold: f64,
        noise_var: f64,
        interference_var: f64,
    ) -> Result<Self, InvalidParameter> {
        ensure(
            sense_duration > 0.0 && sense_duration.is_finite(),
            format!("sense duration must be positive, got {sense_duration}"),
        )?;
        ensure(
            bandwidth > 0.0 && bandwidth.is_finite(),
            format!("bandwidth must be positive, got {bandwidth}"),
        )?;
        ensure(
            threshold > 0.0 && threshold.is_finite(),
            format!("sensing threshold must be positive, got {threshold}"),
        )?;
        ensure(
            noise_var > 0.0 && noise_var.is_finite(),
            format!("noise variance must be positive, got {noise_var}"),
        )?;
        ensure(
            interference_var >= 0.0 && interference_var.is_finite(),
            format!("interference variance must be nonnegative, got {interference_var}"),
        )?;
        let exact = sense_duration * bandwidth;
        let samples = exact.round();
        ensure(
            samples >= 1.0 && samples <= u32::MAX as f64,
            format!("sample count N*B must round to an integer >= 1, got {exact}"),
        )?;
        // The gamma-law characterization of the statistic needs an integer
        // sample count; non-integer N*B is rounded and flagged.
        let samples_rounded = (exact - samples).abs() > 1e-9 * samples.max(1.0);
        Ok(Self {
            sense_duration,
            bandwidth,
            threshold,
            noise_var,
            interference_var,
            samples: samples as u32,
            samples_rounded,
        })
    }

    pub fn sense_duration(&self) -> f64 {
        self.sense_duration
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn interference_var(&self) -> f64 {
        self.interference_var
    }

    /// Number of complex sensing samples (N*B rounded to an integer).
    pub fn samples(&self) -> u32 {
        self.samples
    }

    /// True when N*B was not an integer and had to be rounded.
    pub fn samples_rounded(&self) -> bool {
        self.samples_rounded
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self, InvalidParameter> {
        Self::new(
            self.sense_duration,
            self.bandwidth,
            threshold,
            self.noise_var,
            self.interference_var,
        )
    }

    pub fn with_sense_duration(&self, sense_duration: f64) -> Result<Self, InvalidParameter> {
        Self::new(
            sense_duration,
            self.bandwidth,
            self.threshold,
            self.noise_var,
            self.interference_var,
        )
    }
}

/// Detector operating point: probability of detection and of false alarm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingPerf {
    p_detect: f64,
    p_false_alarm: f64,
}

impl SensingPerf {
    pub fn new(p_detect: f64, p_false_alarm: f64) -> Result<Self, InvalidParameter> {
        ensure(
            (0.0..=1.0).contains(&p_detect) && (0.0..=1.0).contains(&p_false_alarm),
            format!("probabilities must lie in [0,1], got P_d={p_detect}, P_f={p_false_alarm}"),
        )?;
        ensure(
            p_false_alarm <= p_detect,
            format!("P_f={p_false_alarm} must not exceed P_d={p_detect}"),
        )?;
        Ok(Self {
            p_detect,
            p_false_alarm,
        })
    }

    /// Analytical operating point of the given detector configuration.
    pub fn from_config(cfg: &SensingConfig) -> Self {
        Self {
            p_detect: detection_prob(cfg),
            p_false_alarm: false_alarm_prob(cfg),
        }
    }

    pub fn p_detect(&self) -> f64 {
        self.p_detect
    }

    pub fn p_false_alarm(&self) -> f64 {
        self.p_false_alarm
    }
}

/// Probability that the average energy of pure noise exceeds the threshold.
///
/// With `m` samples the statistic is Gamma(m, noise_var/m), so the false
/// alarm probability is the upper regularized gamma Q(m, m*lambda/noise_var).
/// Strictly decreasing in the threshold.
pub fn false_alarm_prob(cfg: &SensingConfig) -> f64 {
    let m = cfg.samples() as f64;
    regularized_gamma_q(m, m * cfg.threshold() / cfg.noise_var())
        .expect("valid by construction of SensingConfig")
}

/// Probability of declaring busy when the primary users are active; same
/// law with the per-sample variance raised by the interference power.
pub fn detection_prob(cfg: &SensingConfig) -> f64 {
    let m = cfg.samples() as f64;
    let total_var = cfg.noise_var() + cfg.interference_var();
    regularized_gamma_q(m, m * cfg.threshold() / total_var)
        .expect("valid by construction of SensingConfig")
}

/// Bayes-combined probabilities `(pr_sensed_busy, pr_sensed_idle)` of the
/// detector declaring busy or idle, mixing truth priors with the operating
/// point. The pair sums to one exactly.
pub fn sensed_state_probs(chain: &ActivityChain, perf: &SensingPerf) -> (f64, f64) {
    let (pr_busy, pr_idle) = priors(chain);
    let sensed_busy = pr_busy * perf.p_detect() + pr_idle * perf.p_false_alarm();
    (sensed_busy, 1.0 - sensed_busy)
}

/// One Monte Carlo run of the detector: draws the complex samples, forms
/// the average-energy statistic and compares it with the threshold.
///
/// The primary signal is modeled as aggregate zero-mean complex Gaussian
/// with the configured interference power. Reproducible per seed;
/// concurrent replications should use distinct seeds.
pub fn simulate_test_statistic(cfg: &SensingConfig, busy: bool, seed: u64) -> (f64, bool) {
    let var = cfg.noise_var() + if busy { cfg.interference_var() } else { 0.0 };
    let scale = (var / 2.0).sqrt();
    let mut rng = FrameRng::new(seed, 0);
    let mut energy = 0.0;
    for _ in 0..cfg.samples() {
        let (re, im) = rng.normal_pair();
        let (re, im) = (re * scale, im * scale);
        energy += re * re + im * im;
    }
    let statistic = energy / cfg.samples() as f64;
    (statistic, statistic > cfg.threshold())
}

// ---------------------------------------------------------------------------
// Interference constraints
// ---------------------------------------------------------------------------

/// Interference budget at the primary receivers: the tolerable average
/// interference power already normalized by the worst-case channel gain,
/// plus per-level peak transmit caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceBudget {
    pub i0_over_gain: f64,
    pub peak_p1: f64,
    pub peak_p2: f64,
}

impl InterferenceBudget {
    pub fn new(i0_over_gain: f64, peak_p1: f64, peak_p2: f64) -> Result<Self, InvalidParameter> {
        ensure(
            i0_over_gain > 0.0 && peak_p1 > 0.0 && peak_p2 > 0.0,
            "interference budget fields must be positive".to_string(),
        )?;
        Ok(Self {
            i0_over_gain,
            peak_p1,
            peak_p2,
        })
    }
}

/// Which interference-control rule to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferenceMode {
    /// Cap the sensed-busy power alone: p1 <= I0/gain.
    BoundP1,
    /// Cap the detection-weighted average: P_d*p1 + (1-P_d)*p2 <= I0/gain,
    /// together with the peak caps.
    AvgInterference,
}

/// A single power constraint in a feasibility report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerConstraint {
    SensedBusyCap,
    AvgInterference,
    PeakP1,
    PeakP2,
}

impl std::fmt::Display for PowerConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            PowerConstraint::SensedBusyCap => "sensed-busy power cap",
            PowerConstraint::AvgInterference => "average interference",
            PowerConstraint::PeakP1 => "peak p1",
            PowerConstraint::PeakP2 => "peak p2",
        };
        f.write_str(name)
    }
}

/// Outcome of a power-feasibility check. Infeasibility is a report, not an
/// error.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Constraint with the least slack (negative slack when violated).
    pub binding: PowerConstraint,
    /// Slack of the binding constraint, in power units.
    pub slack: f64,
    /// Constraints actually violated, if any.
    pub violated: Vec<PowerConstraint>,
    /// Largest p2 the mode admits for the given p1 (infinite when the mode
    /// places no cap on p2).
    pub max_p2_given_p1: f64,
    /// Detection-weighted average interference power, in avg mode.
    pub avg_interference: Option<f64>,
}

/// Check whether the power pair `(p1, p2)` satisfies the selected
/// interference-control rule.
pub fn check_power_feasibility(
    p1: f64,
    p2: f64,
    perf: &SensingPerf,
    budget: &InterferenceBudget,
    mode: InterferenceMode,
) -> FeasibilityReport {
    let tol = 1e-12 * budget.i0_over_gain.max(1.0);
    match mode {
        InterferenceMode::BoundP1 => {
            let slack = budget.i0_over_gain - p1;
            let feasible = slack >= -tol;
            FeasibilityReport {
                feasible,
                binding: PowerConstraint::SensedBusyCap,
                slack,
                violated: if feasible {
                    vec![]
                } else {
                    vec![PowerConstraint::SensedBusyCap]
                },
                max_p2_given_p1: f64::INFINITY,
                avg_interference: None,
            }
        }
        InterferenceMode::AvgInterference => {
            let pd = perf.p_detect();
            let avg = pd * p1 + (1.0 - pd) * p2;
            let slacks = [
                (PowerConstraint::AvgInterference, budget.i0_over_gain - avg),
                (PowerConstraint::PeakP1, budget.peak_p1 - p1),
                (PowerConstraint::PeakP2, budget.peak_p2 - p2),
            ];
            let (binding, slack) = slacks
                .iter()
                .copied()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty");
            let violated: Vec<PowerConstraint> = slacks
                .iter()
                .filter(|(_, sl)| *sl < -tol)
                .map(|(c, _)| *c)
                .collect();
            let from_avg = if pd < 1.0 {
                (budget.i0_over_gain - pd * p1) / (1.0 - pd)
            } else {
                f64::INFINITY
            };
            FeasibilityReport {
                feasible: violated.is_empty(),
                binding,
                slack,
                violated,
                max_p2_given_p1: from_avg.min(budget.peak_p2).max(0.0),
                avg_interference: Some(avg),
            }
        }
    }
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Generated by scripts/gen_reference_values.py.
    const P_FALSE_ALARM_DEFAULT: f64 = 0.0049954123083075872;
    const P_DETECT_DEFAULT: f64 = 0.92393652485860863;

    fn default_cfg() -> SensingConfig {
        SensingConfig::new(1e-3, 1e4, 0.1, 0.05, 0.12).unwrap()
    }

    #[test]
    fn priors_examples() {
        let chain = ActivityChain::new(0.6, 0.2).unwrap();
        let (b, i) = priors(&chain);
        assert_abs_diff_eq!(b, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(i, 0.75, epsilon = 1e-15);
        assert_eq!(b + i, 1.0);

        let sym = ActivityChain::new(0.37, 0.37).unwrap();
        let (b, i) = priors(&sym);
        assert_abs_diff_eq!(b, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(i, 0.5, epsilon = 1e-15);

        let (b, i) = priors(&ActivityChain::new(0.9, 0.1).unwrap());
        assert_abs_diff_eq!(b, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(i, 0.9, epsilon = 1e-15);
    }

    #[test]
    fn chain_validation() {
        assert!(ActivityChain::new(0.0, 0.5).is_err());
        assert!(ActivityChain::new(1.0, 0.5).is_err());
        assert!(ActivityChain::new(0.5, -0.1).is_err());
    }

    #[test]
    fn detector_operating_point() {
        let cfg = default_cfg();
        assert_eq!(cfg.samples(), 10);
        assert!(!cfg.samples_rounded());
        assert_abs_diff_eq!(false_alarm_prob(&cfg), P_FALSE_ALARM_DEFAULT, epsilon = 1e-12);
        assert_abs_diff_eq!(detection_prob(&cfg), P_DETECT_DEFAULT, epsilon = 1e-12);
    }

    #[test]
    fn detector_threshold_limits() {
        let cfg = default_cfg();
        let tiny = cfg.with_threshold(1e-9).unwrap();
        assert!(false_alarm_prob(&tiny) > 1.0 - 1e-12);
        assert!(detection_prob(&tiny) > 1.0 - 1e-12);
        let huge = cfg.with_threshold(1e6).unwrap();
        assert!(false_alarm_prob(&huge) < 1e-12);
        assert!(detection_prob(&huge) < 1e-12);
    }

    #[test]
    fn detector_equal_hypotheses_when_no_interference() {
        let cfg = SensingConfig::new(1e-3, 1e4, 0.1, 0.05, 0.0).unwrap();
        assert_eq!(false_alarm_prob(&cfg), detection_prob(&cfg));
    }

    #[test]
    fn detector_monotone_in_threshold_and_dominance() {
        let cfg = default_cfg();
        let mut prev_pf = 1.1;
        let mut prev_pd = 1.1;
        for i in 1..80 {
            let lam = 0.005 * i as f64;
            let c = cfg.with_threshold(lam).unwrap();
            let pf = false_alarm_prob(&c);
            let pd = detection_prob(&c);
            assert!(pf <= pd, "P_f > P_d at lambda = {lam}");
            assert!(pf < prev_pf && pd < prev_pd, "not strictly decreasing at {lam}");
            prev_pf = pf;
            prev_pd = pd;
        }
    }

    #[test]
    fn longer_sensing_separates_hypotheses() {
        // lambda between the two per-sample variances
        let mut prev_pd = 0.0;
        let mut prev_pf = 1.0;
        for &n in &[1e-3, 4e-3, 1.6e-2, 6.4e-2] {
            let cfg = SensingConfig::new(n, 1e4, 0.1, 0.05, 0.12).unwrap();
            let pd = detection_prob(&cfg);
            let pf = false_alarm_prob(&cfg);
            assert!(pd >= prev_pd && pf <= prev_pf, "N = {n}");
            prev_pd = pd;
            prev_pf = pf;
        }
        assert!(prev_pd > 1.0 - 1e-6);
        assert!(prev_pf < 1e-6);
    }

    #[test]
    fn sensed_state_examples() {
        let chain = ActivityChain::new(0.6, 0.2).unwrap();
        // perfect sensing reduces to the priors
        let perfect = SensingPerf::new(1.0, 0.0).unwrap();
        let (sb, si) = sensed_state_probs(&chain, &perfect);
        let (b, i) = priors(&chain);
        assert_abs_diff_eq!(sb, b, epsilon = 1e-15);
        assert_abs_diff_eq!(si, i, epsilon = 1e-15);

        // hand arithmetic at the published operating point
        let perf = SensingPerf::new(0.863, 0.005).unwrap();
        let (sb, si) = sensed_state_probs(&chain, &perf);
        assert_abs_diff_eq!(sb, 0.2195, epsilon = 1e-12);
        assert_abs_diff_eq!(si, 0.7805, epsilon = 1e-12);
        assert_eq!(sb + si, 1.0);

        // sensing independent of the truth
        let blind = SensingPerf::new(0.42, 0.42).unwrap();
        let (sb, si) = sensed_state_probs(&chain, &blind);
        assert_abs_diff_eq!(sb, 0.42, epsilon = 1e-15);
        assert_abs_diff_eq!(si, 0.58, epsilon = 1e-15);
    }

    #[test]
    fn simulated_statistic_identical_when_no_interference() {
        let cfg = SensingConfig::new(1e-3, 1e4, 0.1, 0.05, 0.0).unwrap();
        for seed in 0..50 {
            let (sb, db) = simulate_test_statistic(&cfg, true, seed);
            let (si, di) = simulate_test_statistic(&cfg, false, seed);
            assert_eq!(sb, si);
            assert_eq!(db, di);
        }
    }

    #[test]
    fn simulated_rates_match_analytics() {
        // 200k trials here; the acceptance suite runs the full 1e6.
        let cfg = default_cfg();
        let trials = 200_000u64;
        let mut hits_busy = 0u64;
        let mut hits_idle = 0u64;
        for seed in 0..trials {
            if simulate_test_statistic(&cfg, true, seed).1 {
                hits_busy += 1;
            }
            if simulate_test_statistic(&cfg, false, seed + trials).1 {
                hits_idle += 1;
            }
        }
        let pd_hat = hits_busy as f64 / trials as f64;
        let pf_hat = hits_idle as f64 / trials as f64;
        let pd = detection_prob(&cfg);
        let pf = false_alarm_prob(&cfg);
        let se_d = (pd * (1.0 - pd) / trials as f64).sqrt();
        let se_f = (pf * (1.0 - pf) / trials as f64).sqrt();
        assert!((pd_hat - pd).abs() < 3.0 * se_d, "pd_hat={pd_hat} pd={pd}");
        assert!((pf_hat - pf).abs() < 3.0 * se_f, "pf_hat={pf_hat} pf={pf}");
    }

    #[test]
    fn feasibility_examples() {
        let budget = InterferenceBudget::new(3.0, 10.0, 10.0).unwrap();

        // perfect detection: avg constraint reduces to p1 <= I0/gain
        let perfect = SensingPerf::new(1.0, 0.0).unwrap();
        let rep = check_power_feasibility(2.9, 9.9, &perfect, &budget, InterferenceMode::AvgInterference);
        assert!(rep.feasible);
        assert_abs_diff_eq!(rep.avg_interference.unwrap(), 2.9, epsilon = 1e-12);

        // boundary case: 0.5*1 + 0.5*5 = 3 <= 3, feasible and binding
        let half = SensingPerf::new(0.5, 0.0).unwrap();
        let rep = check_power_feasibility(1.0, 5.0, &half, &budget, InterferenceMode::AvgInterference);
        assert!(rep.feasible);
        assert_eq!(rep.binding, PowerConstraint::AvgInterference);
        assert!(rep.slack.abs() < 1e-12);
        assert_abs_diff_eq!(rep.max_p2_given_p1, 5.0, epsilon = 1e-12);

        // p1 above the cap in bound-p1 mode
        let rep = check_power_feasibility(3.5, 1.0, &half, &budget, InterferenceMode::BoundP1);
        assert!(!rep.feasible);
        assert_eq!(rep.binding, PowerConstraint::SensedBusyCap);
        assert_eq!(rep.violated, vec![PowerConstraint::SensedBusyCap]);
        assert!(rep.max_p2_given_p1.is_infinite());

        // peak cap bites before the average constraint
        let rep = check_power_feasibility(1.0, 11.0, &half, &budget, InterferenceMode::AvgInterference);
        assert!(!rep.feasible);
        assert!(rep.violated.contains(&PowerConstraint::AvgInterference));
        assert!(rep.violated.contains(&PowerConstraint::PeakP2));
    }

    #[test]
    fn sensing_config_rounding_flag() {
        let cfg = SensingConfig::new(1.05e-3, 1e4, 0.1, 0.05, 0.12).unwrap();
        assert_eq!(cfg.samples(), 11); // 10.5 rounds away from zero
        assert!(cfg.samples_rounded());
        assert!(SensingConfig::new(1e-6, 1e3, 0.1, 0.05, 0.12).is_err()); // rounds to 0
    }
}
