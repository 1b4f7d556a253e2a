//! Buffer-constrained throughput of sensing-based spectrum-sharing links
//! with finite-blocklength coding.
//!
//! A secondary link senses a licensed channel with an energy detector,
//! picks its transmit power and rate from the (imperfect) sensing decision,
//! and sends short codewords over a Rayleigh block-fading channel. This
//! crate computes the resulting throughput under a buffer constraint — the
//! effective rate at QoS exponent θ — for both fixed-rate and variable-rate
//! operation, optimizes the transmission parameters, and validates the
//! analysis with a frame-level queue simulator.
//!
//! The crate is organized around an eight-state Markov model of the
//! channel (four sensing scenarios × decoding ON/OFF) whose transition
//! matrix has rank 2, which gives the spectral radius — and hence the
//! effective rate — in closed form.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example sensing_performance
//! cargo run --release --example finite_blocklength
//! cargo run --release --example rank2_spectral_radius
//! cargo run --release --example effective_rate_fixed
//! cargo run --release --example effective_rate_variable
//! cargo run --release --example average_error_threshold
//! cargo run --release --example queue_overflow_sim
//! ```
//!
//! A thin CLI over the same machinery ships as the `cograte` binary with
//! subcommands `sense`, `rate`, `effrate`, `sweep` and `simulate`; see the
//! crate README.

pub mod cli;
pub mod effrate;
pub mod fbcode;
pub mod markov8;
pub mod numerics;
pub mod queuesim;
pub mod rng;
pub mod sensing;

pub use effrate::{EffRateResult, LinkPolicy, TxMode};
pub use fbcode::{FrameConfig, ScenarioSnrs};
pub use numerics::{FadingDist, QuadratureRule};
pub use sensing::{ActivityChain, SensingConfig, SensingPerf};
