//! Ruin probabilities, tail diagnostics, and fragility analysis under thin-
//! and fat-tailed uncertainty.
//!
//! The crate is organized around one question: when losses can be large and
//! repeated, what is the probability of crossing an absorbing barrier, and
//! how does that probability respond to the shape of the tail? The modules:
//!
//! * [`distributions`]: parametric families with tail-accurate survival/CDF/
//!   quantile evaluation and deterministic inverse-transform sampling.
//! * [`tail_diagnostics`]: empirical tail classification — convolution and
//!   sum-vs-max ratios, the max-to-sum moment probe, the Hill estimator, an
//!   exponential-moment stability probe, and the tail-by-scope quadrant.
//! * [`ruin`]: repeated-exposure ruin, gambler's-ruin closed forms, and
//!   absorbing-barrier walk simulation.
//! * [`sensitivity`]: per-period and horizon ruin swept over uncertainty
//!   scale and information ratio, family by family.
//! * [`fragility`]: harm convexity probes, concentration-vs-splitting
//!   comparisons, expected-harm differences under widened uncertainty, and
//!   1/n portfolio ruin with an optional common shock.
//! * [`cascade`]: branching-process and network-contagion cascade sizes, the
//!   Borel total-progeny law, and tail reports over simulated sizes.
//! * [`inference`]: statistics-of-differences pitfalls — variance and
//!   coefficient-of-variation of differences done right and naively, the
//!   two-separate-tests fallacy, and luck-quadrant simulations.
//!
//! All randomness flows through [`rng`]: ChaCha8 streams addressed by
//! `(seed, operation, replicate)`, so every result is reproducible bit for
//! bit at any thread count.

pub mod cascade;
pub mod distributions;
pub mod error;
pub mod fragility;
pub mod inference;
pub mod rng;
pub mod ruin;
pub mod sensitivity;
pub mod tail_diagnostics;

pub use cascade::{
    aggregate_tail_report, borel_pmf, run_branching, run_network_contagion, CascadeConfig,
    CascadeModel, CascadeSample, EdgeModel,
};
pub use distributions::{DistributionSpec, Family, SampleSeries, TailProbEstimate};
pub use error::{Error, Result};
pub use fragility::{
    concentration_compare, convexity_probe, expected_harm, fragility_measure, one_over_n_ruin,
    CorrelationModel, HarmForm, HarmFunction, PortfolioSpec,
};
pub use inference::{
    difference_stats, luck_quadrant_sim, two_test_fallacy_sim, ComparisonReport,
    LuckQuadrantReport, Pairing, TwoTestReport,
};
pub use ruin::{
    exposures_to_ruin_level, gambler_ruin_closed_form, repeated_exposure_ruin,
    simulate_absorbing_walk, ExposurePolicy, RuinReport, WalkSpec,
};
pub use sensitivity::{
    information_ratio_sweep, scale_sweep, skepticism_report, SweepConfig, SweepResult,
};
pub use tail_diagnostics::{
    classify_quadrant, classify_tail, diagnose_sample, Quadrant, QuadrantVerdict, Scope,
    TailClass, TailDiagnosticsReport, TailEvidence, TailInput,
};
