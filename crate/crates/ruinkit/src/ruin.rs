//! Ruin probabilities: closed forms for repeated exposure and the
//! gambler's-ruin walk, plus Monte Carlo for absorbing-barrier processes
//! with arbitrary step laws.
//!
//! The one-way nature of absorption is the point: a path that touches the
//! barrier is finished regardless of where its law would have carried it
//! next, so per-exposure probabilities that look harmless compound toward
//! certainty.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::rng::{self, salt};

/// Steps simulated for an unbounded walk before it is cut off and counted
/// as a (flagged) survivor.
pub const DEFAULT_HORIZON_CAP: u64 = 1_000_000;

const Z95: f64 = 1.959963984540054;

/// A repeated independent exposure: per-exposure ruin probability `p`, `n`
/// exposures.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposurePolicy {
    pub p: f64,
    pub n: u64,
}

impl ExposurePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && (0.0..=1.0).contains(&self.p)) {
            return Err(Error::InvalidParameter(format!(
                "per-exposure probability must lie in [0,1], got {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// Probability of at least one ruin event in `n` independent exposures,
/// `1 - (1-p)^n`, evaluated in log space so tiny `p` with huge `n` does not
/// collapse to 0 or 1 prematurely.
pub fn repeated_exposure_ruin(policy: ExposurePolicy) -> Result<f64> {
    policy.validate()?;
    if policy.n == 0 || policy.p == 0.0 {
        return Ok(0.0);
    }
    if policy.p == 1.0 {
        return Ok(1.0);
    }
    Ok(-f64::exp_m1(policy.n as f64 * f64::ln_1p(-policy.p)))
}

/// Smallest exposure count `n` with `1 - (1-p)^n >= target`.
pub fn exposures_to_ruin_level(p: f64, target: f64) -> Result<u64> {
    if !(p.is_finite() && p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "per-exposure probability must lie strictly inside (0,1), got {p}"
        )));
    }
    if !(target.is_finite() && target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!(
            "target ruin level must lie strictly inside (0,1), got {target}"
        )));
    }
    let reaches = |n: u64| -f64::exp_m1(n as f64 * f64::ln_1p(-p)) >= target;
    // ceil of the real-valued solution, then nudged to the exact integer
    // boundary in case the division landed a rounding error away from it.
    let mut n = ((-target).ln_1p() / (-p).ln_1p()).ceil() as u64;
    n = n.max(1);
    while !reaches(n) {
        n += 1;
    }
    while n > 1 && reaches(n - 1) {
        n -= 1;
    }
    Ok(n)
}

/// Ruin probability for the ±1-step gambler starting at `a`, absorbed at 0
/// and (when present) at `upper`, with per-step up probability `p_up`.
///
/// Fair walk: `1 - a/N` with an upper barrier, certain ruin without one.
/// Biased walk with barriers at 0 and N: `(r^a - r^N) / (1 - r^N)` with
/// `r = q/p`; evaluated through `r^{x-N}` when `r > 1` so large `N` cannot
/// overflow. Without an upper barrier a favorable walk escapes with
/// probability `1 - r^a`.
pub fn gambler_ruin_closed_form(a: u64, upper: Option<u64>, p_up: f64) -> Result<f64> {
    if !(p_up.is_finite() && (0.0..=1.0).contains(&p_up)) {
        return Err(Error::Domain(format!(
            "step-up probability must lie in [0,1], got {p_up}"
        )));
    }
    if a == 0 {
        return Err(Error::Domain("start must sit strictly above the barrier".into()));
    }
    if let Some(n) = upper {
        if a >= n {
            return Err(Error::Domain(format!(
                "start {a} must sit strictly below the upper barrier {n}"
            )));
        }
    }
    if p_up == 0.0 {
        return Ok(1.0);
    }
    if p_up == 1.0 {
        return Ok(0.0);
    }
    let Some(n) = upper else {
        return Ok(if p_up <= 0.5 {
            1.0
        } else {
            let ln_r = (1.0 - p_up).ln() - p_up.ln();
            (a as f64 * ln_r).exp()
        });
    };
    if p_up == 0.5 {
        return Ok(1.0 - a as f64 / n as f64);
    }
    let ln_r = (1.0 - p_up).ln() - p_up.ln();
    if ln_r < 0.0 {
        let (ra, rn) = ((a as f64 * ln_r).exp(), (n as f64 * ln_r).exp());
        Ok((ra - rn) / (1.0 - rn))
    } else {
        // r > 1: divide through by r^N to keep every exponent nonpositive.
        let ran = ((a as f64 - n as f64) * ln_r).exp();
        let rnn = (-(n as f64) * ln_r).exp();
        Ok((ran - 1.0) / (rnn - 1.0))
    }
}

/// An absorbing-barrier random walk: `W_{t+1} = W_t + X_t` with i.i.d. steps
/// from `step`, ruined at the first integer step with `W_t <= barrier`,
/// absorbed as a survivor at `W_t >= upper_barrier` when one is set.
///
/// `horizon` bounds the walk length; leaving it unset means unbounded, which
/// is simulated up to [`DEFAULT_HORIZON_CAP`]. Paths still alive at the cap
/// count as survivors and are tallied separately in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub start: f64,
    pub step: DistributionSpec,
    #[serde(default)]
    pub barrier: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_barrier: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
}

impl WalkSpec {
    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if !self.start.is_finite() || !self.barrier.is_finite() {
            return Err(Error::InvalidParameter("start and barrier must be finite".into()));
        }
        if self.start <= self.barrier {
            return Err(Error::InvalidParameter(format!(
                "start {} must sit strictly above the barrier {}",
                self.start, self.barrier
            )));
        }
        if let Some(u) = self.upper_barrier {
            if !u.is_finite() || self.start >= u {
                return Err(Error::InvalidParameter(format!(
                    "start {} must sit strictly below the upper barrier {u}",
                    self.start
                )));
            }
        }
        if self.horizon == Some(0) {
            return Err(Error::InvalidParameter("horizon must be at least one step".into()));
        }
        Ok(())
    }

    fn effective_horizon(&self) -> u64 {
        self.horizon.unwrap_or(DEFAULT_HORIZON_CAP)
    }
}

/// One log2 bin of the time-to-ruin histogram: counts absorbed runs with
/// `bin_lo <= t < bin_hi`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct TimeBin {
    pub bin_lo: u64,
    pub bin_hi: u64,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RuinReport {
    pub ruin_probability: f64,
    pub ci95: [f64; 2],
    pub replicates: u64,
    pub seed: u64,
    pub time_to_ruin: Vec<TimeBin>,
    /// Runs cut off at the horizon without hitting either barrier; they are
    /// counted as survivors, so the estimate is a lower bound when nonzero.
    pub capped: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkOutcome {
    /// Hit the lower barrier at this step.
    Ruined(u64),
    /// Hit the upper barrier at this step.
    Escaped(u64),
    /// Still alive when the horizon ran out.
    Capped,
}

const HIST_BINS: usize = 64;

fn walk_one(spec: &WalkSpec, rng: &mut impl rand::RngCore) -> WalkOutcome {
    let horizon = spec.effective_horizon();
    let mut w = spec.start;
    for t in 1..=horizon {
        w += spec.step.quantile_core(rng::open_unit(rng));
        if w <= spec.barrier {
            return WalkOutcome::Ruined(t);
        }
        if let Some(u) = spec.upper_barrier {
            if w >= u {
                return WalkOutcome::Escaped(t);
            }
        }
    }
    WalkOutcome::Capped
}

/// Monte Carlo over independent replicate walks. Identical results at any
/// thread count: one substream per replicate, integer-count aggregation.
pub fn simulate_absorbing_walk(spec: &WalkSpec, replicates: u64, seed: u64) -> Result<RuinReport> {
    spec.validate()?;
    if replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    struct Tally {
        ruined: u64,
        capped: u64,
        hist: [u64; HIST_BINS],
    }
    let zero = || Tally {
        ruined: 0,
        capped: 0,
        hist: [0; HIST_BINS],
    };
    let tally = (0..replicates)
        .into_par_iter()
        .fold(zero, |mut acc, i| {
            let mut rng = rng::stream(seed, salt::WALK, i);
            match walk_one(spec, &mut rng) {
                WalkOutcome::Ruined(t) => {
                    acc.ruined += 1;
                    acc.hist[63 - t.leading_zeros() as usize] += 1;
                }
                WalkOutcome::Escaped(_) => {}
                WalkOutcome::Capped => acc.capped += 1,
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            a.ruined += b.ruined;
            a.capped += b.capped;
            for (x, y) in a.hist.iter_mut().zip(b.hist) {
                *x += y;
            }
            a
        });
    let r = replicates as f64;
    let p = tally.ruined as f64 / r;
    let half = Z95 * (p * (1.0 - p) / r).sqrt();
    let time_to_ruin = tally
        .hist
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(k, &count)| TimeBin {
            bin_lo: 1 << k,
            bin_hi: if k + 1 < 64 { 1 << (k + 1) } else { u64::MAX },
            count,
        })
        .collect();
    Ok(RuinReport {
        ruin_probability: p,
        ci95: [(p - half).max(0.0), (p + half).min(1.0)],
        replicates,
        seed,
        time_to_ruin,
        capped: tally.capped,
    })
}

/// Trajectory of a single replicate, for inspection: starts at `W_0` and
/// stops at the absorbing step (or the horizon). The returned outcome says
/// which barrier ended it.
pub fn simulate_path(spec: &WalkSpec, seed: u64, replicate: u64) -> Result<(Vec<f64>, WalkOutcome)> {
    spec.validate()?;
    let mut rng = rng::stream(seed, salt::WALK, replicate);
    let horizon = spec.effective_horizon();
    let mut w = spec.start;
    let mut path = vec![w];
    for t in 1..=horizon {
        w += spec.step.quantile_core(rng::open_unit(&mut rng));
        path.push(w);
        if w <= spec.barrier {
            return Ok((path, WalkOutcome::Ruined(t)));
        }
        if let Some(u) = spec.upper_barrier {
            if w >= u {
                return Ok((path, WalkOutcome::Escaped(t)));
            }
        }
    }
    Ok((path, WalkOutcome::Capped))
}
