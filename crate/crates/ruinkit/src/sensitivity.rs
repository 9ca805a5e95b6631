//! Ruin sensitivity to model uncertainty.
//!
//! The experiment: hold the benefit (location) fixed, widen the uncertainty
//! (scale), and watch the probability of a ruinous period, `P(X <= -K)`.
//! A mean-preserving spread leaves the center alone but thickens the left
//! tail, and how much it thickens depends entirely on the family. The
//! information-ratio sweep runs the same computation parameterized by
//! benefit/uncertainty instead.
//!
//! Families here must be symmetric location-scale laws (gaussian, student_t,
//! cauchy): the sweep reinterprets location as benefit and scale as
//! uncertainty, which has no analogue for one-sided laws.

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Family templates; location and scale are overridden per row.
    pub families: Vec<DistributionSpec>,
    /// Benefit per period, the fixed location of the scale sweep.
    pub benefit: f64,
    /// Scale grid for the mean-preserving spread, strictly increasing.
    pub uncertainty_grid: Vec<f64>,
    /// Information-ratio grid (benefit per unit of scale), strictly increasing.
    pub ir_grid: Vec<f64>,
    /// Single-period loss level counted as ruin: the event is X <= -k.
    pub k: f64,
    /// Periods over which per-period ruin compounds.
    pub horizon: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            families: vec![
                DistributionSpec::gaussian(0.0, 1.0).unwrap(),
                DistributionSpec::student_t(2.0).unwrap(),
                DistributionSpec::cauchy(0.0, 1.0).unwrap(),
            ],
            benefit: 1.0,
            uncertainty_grid: vec![0.5, 1.0, 2.0, 4.0],
            ir_grid: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
            k: 10.0,
            horizon: 1000,
        }
    }
}

fn require_strictly_increasing(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{what} must not be empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what} must be finite")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::Config("at least one family is required".into()));
        }
        for spec in &self.families {
            spec.validate()?;
            match spec.family {
                Family::Gaussian | Family::StudentT | Family::Cauchy => {}
                other => {
                    return Err(Error::Config(format!(
                        "sweeps need a symmetric location-scale family; {} has no two-sided benefit/uncertainty reading",
                        other.name()
                    )));
                }
            }
        }
        if !(self.benefit.is_finite() && self.benefit >= 0.0) {
            return Err(Error::Config(format!(
                "benefit must be finite and nonnegative, got {}",
                self.benefit
            )));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::Config(format!("k must be positive, got {}", self.k)));
        }
        if self.k <= self.benefit {
            return Err(Error::Config(format!(
                "ruin level k = {} must exceed the benefit {}; otherwise a typical period is ruinous",
                self.k, self.benefit
            )));
        }
        require_strictly_increasing(&self.uncertainty_grid, "uncertainty grid")?;
        if self.uncertainty_grid[0] <= 0.0 {
            return Err(Error::Config("uncertainty grid must be positive".into()));
        }
        require_strictly_increasing(&self.ir_grid, "information-ratio grid")?;
        if self.ir_grid[0] < 0.0 {
            return Err(Error::Config("information ratios must be nonnegative".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least one period".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub family: String,
    pub mu: f64,
    pub sigma: f64,
    pub ir: f64,
    pub k: f64,
    pub per_period_ruin: f64,
    pub horizon_ruin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// `P(X <= -k)` for the template refit with the given location and scale.
fn per_period_ruin(template: &DistributionSpec, mu: f64, sigma: f64, k: f64) -> Result<f64> {
    template
        .clone()
        .with_location(mu)?
        .with_scale(sigma)?
        .cdf(-k)
}

fn compound(per_period: f64, horizon: u64) -> f64 {
    if per_period <= 0.0 {
        return 0.0;
    }
    if per_period >= 1.0 {
        return 1.0;
    }
    -f64::exp_m1(horizon as f64 * f64::ln_1p(-per_period))
}

/// Mean-preserving spread: benefit fixed, scale swept over the grid.
/// Rows are ordered family-major, then by scale.
pub fn scale_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut rows = Vec::with_capacity(config.families.len() * config.uncertainty_grid.len());
    for template in &config.families {
        for &sigma in &config.uncertainty_grid {
            let p = per_period_ruin(template, config.benefit, sigma, config.k)?;
            rows.push(SweepRow {
                family: template.label(),
                mu: config.benefit,
                sigma,
                ir: config.benefit / sigma,
                k: config.k,
                per_period_ruin: p,
                horizon_ruin: compound(p, config.horizon),
            });
        }
    }
    Ok(SweepResult { rows })
}

/// Benefit proportional to uncertainty: at unit scale, location = IR.
/// Rows are ordered family-major, then by information ratio.
pub fn information_ratio_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let sigma = 1.0;
    let mut rows = Vec::with_capacity(config.families.len() * config.ir_grid.len());
    for template in &config.families {
        for &ir in &config.ir_grid {
            let mu = ir * sigma;
            let p = per_period_ruin(template, mu, sigma, config.k)?;
            rows.push(SweepRow {
                family: template.label(),
                mu,
                sigma,
                ir,
                k: config.k,
                per_period_ruin: p,
                horizon_ruin: compound(p, config.horizon),
            });
        }
    }
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct SkepticismRow {
    pub family: String,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub per_period_lo: f64,
    pub per_period_hi: f64,
    pub horizon_lo: f64,
    pub horizon_hi: f64,
    /// horizon_hi / horizon_lo: how much admitting more uncertainty
    /// multiplies the ruin probability.
    pub horizon_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkepticismReport {
    pub rows: Vec<SkepticismRow>,
}

/// Compares the ends of the uncertainty grid, family by family: being more
/// skeptical about the scale raises ruin everywhere, by a factor that is
/// astronomical for thin tails yet leaves fat tails with the larger
/// absolute probability.
pub fn skepticism_report(config: &SweepConfig) -> Result<SkepticismReport> {
    config.validate()?;
    if config.uncertainty_grid.len() < 2 {
        return Err(Error::Config(
            "skepticism comparison needs at least two scales in the uncertainty grid".into(),
        ));
    }
    let (sigma_lo, sigma_hi) = (
        config.uncertainty_grid[0],
        *config.uncertainty_grid.last().unwrap(),
    );
    let mut rows = Vec::with_capacity(config.families.len());
    for template in &config.families {
        let p_lo = per_period_ruin(template, config.benefit, sigma_lo, config.k)?;
        let p_hi = per_period_ruin(template, config.benefit, sigma_hi, config.k)?;
        let h_lo = compound(p_lo, config.horizon);
        let h_hi = compound(p_hi, config.horizon);
        rows.push(SkepticismRow {
            family: template.label(),
            sigma_lo,
            sigma_hi,
            per_period_lo: p_lo,
            per_period_hi: p_hi,
            horizon_lo: h_lo,
            horizon_hi: h_hi,
            horizon_ratio: if h_lo > 0.0 { h_hi / h_lo } else { f64::INFINITY },
        });
    }
    Ok(SkepticismReport { rows })
}
