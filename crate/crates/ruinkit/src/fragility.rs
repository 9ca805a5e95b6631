//! Convexity of harm and what it implies: concentration hurts more than
//! distribution, wider uncertainty raises expected harm, and splitting
//! exposure across independent sources buys safety that correlation takes
//! back.
//!
//! Harm functions are named forms, not user code: powers, linear, a hard
//! threshold, and piecewise-linear tables. All are zero at zero and
//! nondecreasing up to `domain_max`, the destruction level beyond which
//! harm saturates.

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum HarmForm {
    /// h(x) = x^p.
    Power { p: f64 },
    /// h(x) = a x.
    Linear { a: f64 },
    /// h(x) = 0 below t, 1 at or above: sub-threshold doses do not
    /// accumulate.
    Threshold { t: f64 },
    /// Piecewise-linear through the given (x, h) points, starting at (0, 0),
    /// constant after the last point.
    Table { points: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HarmFunction {
    pub form: HarmForm,
    /// Destruction threshold; harm saturates at h(domain_max) beyond it.
    /// Unset means unbounded (a table still saturates past its last point).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_max: Option<f64>,
}

impl HarmFunction {
    pub fn power(p: f64) -> Self {
        HarmFunction { form: HarmForm::Power { p }, domain_max: None }
    }

    pub fn linear(a: f64) -> Self {
        HarmFunction { form: HarmForm::Linear { a }, domain_max: None }
    }

    pub fn threshold(t: f64) -> Self {
        HarmFunction { form: HarmForm::Threshold { t }, domain_max: None }
    }

    pub fn table(points: Vec<(f64, f64)>) -> Self {
        HarmFunction { form: HarmForm::Table { points }, domain_max: None }
    }

    pub fn with_domain_max(mut self, domain_max: f64) -> Self {
        self.domain_max = Some(domain_max);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.form {
            HarmForm::Power { p } => {
                if !(p.is_finite() && *p > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power exponent must be positive, got {p}"
                    )));
                }
            }
            HarmForm::Linear { a } => {
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "linear slope must be nonnegative, got {a}"
                    )));
                }
            }
            HarmForm::Threshold { t } => {
                if !(t.is_finite() && *t > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "threshold must be positive so that h(0) = 0, got {t}"
                    )));
                }
            }
            HarmForm::Table { points } => {
                if points.first() != Some(&(0.0, 0.0)) {
                    return Err(Error::InvalidParameter(
                        "harm table must start at the point (0, 0)".into(),
                    ));
                }
                for w in points.windows(2) {
                    let ((x0, h0), (x1, h1)) = (w[0], w[1]);
                    if !(x1.is_finite() && h1.is_finite()) {
                        return Err(Error::InvalidParameter("harm table entries must be finite".into()));
                    }
                    if x1 <= x0 {
                        return Err(Error::InvalidParameter(
                            "harm table x-values must be strictly increasing".into(),
                        ));
                    }
                    if h1 < h0 {
                        return Err(Error::InvalidParameter(
                            "harm table must be nondecreasing".into(),
                        ));
                    }
                }
            }
        }
        if let Some(d) = self.domain_max {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "domain_max must be positive and finite, got {d}"
                )));
            }
        }
        Ok(())
    }

    /// Upper end of the meaningful stressor range: `domain_max` if set, the
    /// last table point otherwise, unbounded for the other forms.
    pub fn domain_end(&self) -> f64 {
        if let Some(d) = self.domain_max {
            return d;
        }
        match &self.form {
            HarmForm::Table { points } => points.last().map_or(0.0, |p| p.0),
            _ => f64::INFINITY,
        }
    }

    fn raw(&self, x: f64) -> f64 {
        match &self.form {
            HarmForm::Power { p } => x.powf(*p),
            HarmForm::Linear { a } => a * x,
            HarmForm::Threshold { t } => {
                if x >= *t {
                    1.0
                } else {
                    0.0
                }
            }
            HarmForm::Table { points } => {
                let i = points.partition_point(|(px, _)| *px <= x);
                if i == 0 {
                    return points[0].1;
                }
                if i == points.len() {
                    return points[points.len() - 1].1;
                }
                let ((x0, h0), (x1, h1)) = (points[i - 1], points[i]);
                h0 + (h1 - h0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Harm at intensity `x >= 0`, saturating at the destruction level.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.validate()?;
        if !(x.is_finite() && x >= 0.0) {
            return Err(Error::Domain(format!(
                "stressor intensity must be nonnegative and finite, got {x}"
            )));
        }
        Ok(self.raw(x.min(self.domain_end())))
    }
}

/// Second central difference `h(x+d) + h(x-d) - 2 h(x)`: positive means
/// locally convex, so the harm is fragile at that intensity.
pub fn convexity_probe(h: &HarmFunction, x: f64, delta: f64) -> Result<f64> {
    h.validate()?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("probe width must be positive, got {delta}")));
    }
    if !(x.is_finite() && x - delta >= 0.0 && x + delta <= h.domain_end()) {
        return Err(Error::Domain(format!(
            "probe window [{}, {}] must lie inside the harm domain [0, {}]",
            x - delta,
            x + delta,
            h.domain_end()
        )));
    }
    Ok(h.raw(x + delta) + h.raw(x - delta) - 2.0 * h.raw(x))
}

/// One big dose versus the same total in k equal doses:
/// `(h(total), k * h(total/k))`. For convex harm the first dominates.
pub fn concentration_compare(h: &HarmFunction, total: f64, k: u64) -> Result<(f64, f64)> {
    h.validate()?;
    if k == 0 {
        return Err(Error::Domain("dose count must be at least 1".into()));
    }
    if !(total.is_finite() && total >= 0.0 && total <= h.domain_end()) {
        return Err(Error::Domain(format!(
            "total dose {total} must lie inside the harm domain [0, {}]",
            h.domain_end()
        )));
    }
    Ok((h.raw(total), k as f64 * h.raw(total / k as f64)))
}

/// Cutoff pair for divergence detection: the expectation is recomputed with
/// the tails truncated at these probability levels, and a material gap
/// between the two runs flags a divergent moment.
const CUTOFF_SHALLOW: f64 = 1e-10;
const CUTOFF_DEEP: f64 = 1e-13;
const DIVERGENCE_RTOL: f64 = 1e-3;

/// Expected harm under `spec` truncated to quantile range
/// [u_cut, 1 - u_cut]: a Simpson panel in x over the central 98% of mass,
/// plus log-probability-space Simpson panels for each tail.
fn expected_harm_truncated(
    h: &HarmFunction,
    spec: &DistributionSpec,
    u_cut: f64,
    resolution: usize,
) -> f64 {
    let dmax = h.domain_end();
    let integrand_u = |u: f64| h.raw(spec.quantile_core(u).abs().min(dmax));

    // Central panel in x-space: fine for the bulk of the mass.
    let (a, b) = (spec.quantile_core(0.01), spec.quantile_core(0.99));
    let central = simpson(resolution, a, b, |x| {
        h.raw(x.abs().min(dmax)) * spec.pdf_core(x)
    });

    // Tail panels under v = ln(u) (left) and v = ln(1-u) (right): the
    // substitution turns power-law blowups into smooth exponentials.
    let n_tail = (resolution / 2).max(64);
    let left = simpson(n_tail, u_cut.ln(), 0.01f64.ln(), |v| {
        let u = v.exp();
        integrand_u(u) * u
    });
    let right = simpson(n_tail, u_cut.ln(), 0.01f64.ln(), |v| {
        let s = v.exp();
        integrand_u(1.0 - s) * s
    });
    central + left + right
}

fn simpson(intervals: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = (intervals.max(2) + 1) & !1; // even interval count
    let step = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + step * i as f64);
    }
    acc * step / 3.0
}

/// `E[h(|X|)]` for one law; exact for bernoulli and threshold harms,
/// quadrature otherwise, with the cutoff pair guarding against divergent
/// integrals.
pub fn expected_harm(h: &HarmFunction, spec: &DistributionSpec, resolution: usize) -> Result<f64> {
    h.validate()?;
    spec.validate()?;
    let dmax = h.domain_end();
    if spec.family == Family::Bernoulli {
        // Two-point law: exact expectation, nothing to integrate.
        let p = spec.tail_index.unwrap_or(f64::NAN);
        let lo = spec.location.abs().min(dmax);
        let hi = (spec.location + spec.scale).abs().min(dmax);
        return Ok((1.0 - p) * h.raw(lo) + p * h.raw(hi));
    }
    if let HarmForm::Threshold { t } = h.form {
        // E[h(|X|)] = P(|X| >= t), evaluated through the tail-accurate
        // survival rather than quadrature across a jump.
        if t > dmax {
            return Ok(0.0);
        }
        return Ok(spec.survival_core(t) + spec.cdf_core(-t));
    }
    let shallow = expected_harm_truncated(h, spec, CUTOFF_SHALLOW, resolution);
    let deep = expected_harm_truncated(h, spec, CUTOFF_DEEP, resolution);
    let scale = shallow.abs().max(deep.abs()).max(f64::MIN_POSITIVE);
    if !(shallow.is_finite() && deep.is_finite())
        || (deep - shallow).abs() / scale > DIVERGENCE_RTOL
    {
        return Err(Error::DivergentMoment(format!(
            "E[h(|X|)] does not converge under {}: deepening the tail cutoff moved the estimate from {shallow:.6e} to {deep:.6e}",
            spec.label()
        )));
    }
    Ok(deep)
}

/// Fragility to uncertainty: `E[h(|X|)]` at scale `sigma_hi` minus at
/// `sigma_lo`, location held fixed (a mean-preserving widening). Positive
/// means uncertainty itself inflicts harm.
pub fn fragility_measure(
    h: &HarmFunction,
    spec: &DistributionSpec,
    sigma_lo: f64,
    sigma_hi: f64,
    resolution: usize,
) -> Result<f64> {
    h.validate()?;
    spec.validate()?;
    if !(sigma_lo.is_finite() && sigma_lo > 0.0 && sigma_hi.is_finite() && sigma_hi > 0.0) {
        return Err(Error::Domain("scales must be positive and finite".into()));
    }
    if sigma_hi < sigma_lo {
        return Err(Error::Domain(format!(
            "sigma_hi = {sigma_hi} must not be below sigma_lo = {sigma_lo}"
        )));
    }
    if sigma_hi == sigma_lo {
        return Ok(0.0);
    }
    let lo = expected_harm(h, &spec.clone().with_scale(sigma_lo)?, resolution)?;
    let hi = expected_harm(h, &spec.clone().with_scale(sigma_hi)?, resolution)?;
    Ok(hi - lo)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorrelationModel {
    Independent,
    /// With probability rho every source shares a single failure draw;
    /// otherwise sources fail independently.
    CommonShock { rho: f64 },
}

impl Default for CorrelationModel {
    fn default() -> Self {
        CorrelationModel::Independent
    }
}

/// Equal-weight exposure across `n` sources, each failing with probability
/// `q`; ruin means at least a fraction `theta` of sources fail.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioSpec {
    pub n: u64,
    pub q: f64,
    #[serde(default)]
    pub correlation: CorrelationModel,
    pub theta: f64,
}

impl PortfolioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("need at least one source".into()));
        }
        if !(self.q.is_finite() && (0.0..=1.0).contains(&self.q)) {
            return Err(Error::InvalidParameter(format!(
                "failure probability must lie in [0,1], got {}",
                self.q
            )));
        }
        if !(self.theta.is_finite() && (0.0..=1.0).contains(&self.theta)) {
            return Err(Error::InvalidParameter(format!(
                "ruin fraction must lie in [0,1], got {}",
                self.theta
            )));
        }
        if let CorrelationModel::CommonShock { rho } = self.correlation {
            if !(rho.is_finite() && (0.0..=1.0).contains(&rho)) {
                return Err(Error::InvalidParameter(format!(
                    "shock weight must lie in [0,1], got {rho}"
                )));
            }
        }
        Ok(())
    }

    /// Failed-source count that constitutes ruin: `ceil(theta * n)`, with a
    /// nudge so grid values like 0.3 * 10 do not round up spuriously.
    fn ruin_count(&self) -> u64 {
        (self.theta * self.n as f64 - 1e-9).ceil().max(0.0) as u64
    }
}

/// Exact upper tail of Binomial(n, q) at m: sum of pmf from m to n, built
/// from the log-space pmf at m and the multiplicative recurrence upward.
fn binomial_tail(n: u64, q: f64, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m > n {
        return 0.0;
    }
    if q == 0.0 {
        return 0.0;
    }
    if q == 1.0 {
        return 1.0;
    }
    let (nf, mf) = (n as f64, m as f64);
    let ln_choose = libm::lgamma(nf + 1.0) - libm::lgamma(mf + 1.0) - libm::lgamma(nf - mf + 1.0);
    let mut pmf = (ln_choose + mf * q.ln() + (nf - mf) * (-q).ln_1p()).exp();
    let odds = q / (1.0 - q);
    let mut acc = 0.0;
    for k in m..=n {
        acc += pmf;
        pmf *= odds * (n - k) as f64 / (k + 1) as f64;
    }
    acc.min(1.0)
}

/// Probability that at least a fraction `theta` of the `n` sources fail.
///
/// Independent sources: the exact Binomial(n, q) tail. Common shock with
/// weight rho: the shared draw ruins with probability q (any positive theta
/// is met when everything fails at once), so diversification only governs
/// the remaining 1 - rho of the mass.
pub fn one_over_n_ruin(spec: &PortfolioSpec) -> Result<f64> {
    spec.validate()?;
    let m = spec.ruin_count();
    let independent = binomial_tail(spec.n, spec.q, m);
    Ok(match spec.correlation {
        CorrelationModel::Independent => independent,
        CorrelationModel::CommonShock { rho } => {
            let shock = if m == 0 { 1.0 } else { spec.q };
            rho * shock + (1.0 - rho) * independent
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_matches_hand_values() {
        let sq = HarmFunction::power(2.0);
        for x in [1.0, 3.0, 17.5] {
            assert!((convexity_probe(&sq, x, 1.0).unwrap() - 2.0).abs() < 1e-12);
        }
        let lin = HarmFunction::linear(3.0);
        assert_eq!(convexity_probe(&lin, 5.0, 2.0).unwrap(), 0.0);
        // sqrt is locally concave: sqrt(1.5) + sqrt(0.5) - 2.
        let root = HarmFunction::power(0.5);
        let expected = 1.5f64.sqrt() + 0.5f64.sqrt() - 2.0;
        assert!((convexity_probe(&root, 1.0, 0.5).unwrap() - expected).abs() < 1e-12);
        assert!(expected < 0.0);
    }

    #[test]
    fn probe_respects_the_domain() {
        let h = HarmFunction::power(2.0).with_domain_max(10.0);
        assert!(convexity_probe(&h, 9.5, 1.0).is_err());
        assert!(convexity_probe(&h, 0.5, 1.0).is_err());
        assert!(convexity_probe(&h, 5.0, 1.0).is_ok());
    }

    #[test]
    fn concentration_beats_distribution_for_convex_harm() {
        let sq = HarmFunction::power(2.0);
        let (big, split) = concentration_compare(&sq, 10.0, 10).unwrap();
        assert_eq!((big, split), (100.0, 10.0));

        let lin = HarmFunction::linear(2.0);
        let (big, split) = concentration_compare(&lin, 7.0, 13).unwrap();
        assert!((big - split).abs() < 1e-12);

        // Sub-threshold doses do not accumulate.
        let thresh = HarmFunction::threshold(5.0);
        let (big, split) = concentration_compare(&thresh, 10.0, 10).unwrap();
        assert_eq!((big, split), (1.0, 0.0));
    }

    #[test]
    fn concentration_dominance_holds_across_a_grid() {
        let convex = [
            HarmFunction::power(1.5),
            HarmFunction::power(2.0),
            HarmFunction::power(3.0),
            HarmFunction::table(vec![(0.0, 0.0), (5.0, 1.0), (10.0, 4.0), (20.0, 16.0)]),
        ];
        for h in &convex {
            for total in [0.5, 2.0, 7.5, 18.0] {
                for k in 1..=12u64 {
                    let (big, split) = concentration_compare(h, total, k).unwrap();
                    assert!(
                        big >= split - 1e-12,
                        "{h:?} total {total} k {k}: {big} < {split}"
                    );
                }
            }
        }
    }

    #[test]
    fn table_interpolates_and_saturates() {
        let h = HarmFunction::table(vec![(0.0, 0.0), (2.0, 1.0), (4.0, 5.0)]);
        assert_eq!(h.eval(1.0).unwrap(), 0.5);
        assert_eq!(h.eval(3.0).unwrap(), 3.0);
        assert_eq!(h.eval(100.0).unwrap(), 5.0);
        assert!(HarmFunction::table(vec![(1.0, 0.0), (2.0, 1.0)]).validate().is_err());
        assert!(HarmFunction::table(vec![(0.0, 0.0), (2.0, 3.0), (3.0, 1.0)])
            .validate()
            .is_err());
    }

    #[test]
    fn squared_harm_under_gaussian_matches_the_variance_oracle() {
        // E[X^2] = sigma^2, so widening 1 -> 2 yields exactly 3.
        let h = HarmFunction::power(2.0);
        let spec = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        let d = fragility_measure(&h, &spec, 1.0, 2.0, 4096).unwrap();
        assert!((d - 3.0).abs() < 1e-6, "got {d}");
    }

    #[test]
    fn absolute_harm_under_gaussian_matches_the_half_normal_mean() {
        let h = HarmFunction::linear(1.0);
        let spec = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        let expected = (2.0 / std::f64::consts::PI).sqrt() * (2.5 - 0.5);
        let d = fragility_measure(&h, &spec, 0.5, 2.5, 4096).unwrap();
        assert!((d - expected).abs() < 1e-6, "got {d} want {expected}");
    }

    #[test]
    fn equal_scales_cost_nothing() {
        let h = HarmFunction::power(2.0);
        let spec = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        assert_eq!(fragility_measure(&h, &spec, 1.0, 1.0, 512).unwrap(), 0.0);
    }

    #[test]
    fn divergent_moments_are_refused() {
        let spec = DistributionSpec::cauchy(0.0, 1.0).unwrap();
        let sq = fragility_measure(&HarmFunction::power(2.0), &spec, 1.0, 2.0, 4096);
        assert!(matches!(sq, Err(Error::DivergentMoment(_))), "{sq:?}");
        // Even the first absolute moment diverges for the cauchy.
        let lin = fragility_measure(&HarmFunction::linear(1.0), &spec, 1.0, 2.0, 4096);
        assert!(matches!(lin, Err(Error::DivergentMoment(_))));
        // Variance is infinite at two degrees of freedom.
        let t2 = DistributionSpec::student_t(2.0).unwrap();
        let sq = fragility_measure(&HarmFunction::power(2.0), &t2, 1.0, 2.0, 4096);
        assert!(matches!(sq, Err(Error::DivergentMoment(_))));
        // But its mean absolute deviation converges and scales linearly.
        let lin = fragility_measure(&HarmFunction::linear(1.0), &t2, 1.0, 2.0, 4096).unwrap();
        let expected = 2.0f64.sqrt(); // E|T_2| = sqrt(2), difference = (2-1) sqrt 2
        assert!((lin - expected).abs() < 1e-4, "got {lin} want {expected}");
    }

    #[test]
    fn saturation_restores_convergence() {
        // Bounded harm has finite expectation under any law.
        let h = HarmFunction::power(2.0).with_domain_max(50.0);
        let spec = DistributionSpec::cauchy(0.0, 1.0).unwrap();
        let d = fragility_measure(&h, &spec, 1.0, 2.0, 4096).unwrap();
        assert!(d > 0.0 && d.is_finite());
    }

    #[test]
    fn threshold_harm_reduces_to_exceedance_probability() {
        let h = HarmFunction::threshold(10.0);
        let spec = DistributionSpec::cauchy(0.0, 1.0).unwrap();
        let d = fragility_measure(&h, &spec, 1.0, 2.0, 512).unwrap();
        let p = |sigma: f64| {
            let z: f64 = 10.0 / sigma;
            2.0 * ((1.0 / z).atan() / std::f64::consts::PI)
        };
        assert!((d - (p(2.0) - p(1.0))).abs() < 1e-14, "got {d}");
    }

    #[test]
    fn fragility_is_nonnegative_for_probe_certified_convex_harm() {
        let spec = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        let t2 = DistributionSpec::student_t(2.0).unwrap();
        for h in [
            HarmFunction::power(1.0),
            HarmFunction::power(2.0),
            HarmFunction::power(3.0),
        ] {
            // Probe certifies convexity on a grid first.
            for x in [0.5, 1.0, 2.0, 5.0, 20.0] {
                assert!(convexity_probe(&h, x, 0.25).unwrap() >= -1e-9);
            }
            let d = fragility_measure(&h, &spec, 1.0, 3.0, 4096).unwrap();
            assert!(d >= 0.0, "{h:?}: {d}");
            if let Ok(d) = fragility_measure(&h, &t2, 1.0, 3.0, 4096) {
                assert!(d >= 0.0, "{h:?} under t2: {d}");
            }
        }
    }

    #[test]
    fn bernoulli_expected_harm_is_exact() {
        // +/-1 coin: |X| = 1 always, so E[h] = h(1) at any scale.
        let spec = DistributionSpec::bernoulli(0.5)
            .unwrap()
            .with_location(-1.0)
            .unwrap()
            .with_scale(2.0)
            .unwrap();
        let h = HarmFunction::power(2.0);
        assert_eq!(expected_harm(&h, &spec, 128).unwrap(), 1.0);
    }

    #[test]
    fn portfolio_ruin_closed_cases() {
        let spec = |n, q, theta, correlation| PortfolioSpec { n, q, correlation, theta };
        let p = one_over_n_ruin(&spec(2, 0.1, 1.0, CorrelationModel::Independent)).unwrap();
        assert!((p - 0.01).abs() < 1e-15);
        let p = one_over_n_ruin(&spec(1, 0.37, 0.5, CorrelationModel::Independent)).unwrap();
        assert!((p - 0.37).abs() < 1e-15);
        let p =
            one_over_n_ruin(&spec(2, 0.1, 1.0, CorrelationModel::CommonShock { rho: 1.0 })).unwrap();
        assert!((p - 0.1).abs() < 1e-15);
        // theta = 0 makes ruin vacuous.
        let p = one_over_n_ruin(&spec(5, 0.1, 0.0, CorrelationModel::Independent)).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn binomial_tail_matches_brute_force_enumeration() {
        for n in 1..=12u64 {
            for q in [0.0, 0.05, 0.3, 0.5, 0.77, 1.0] {
                for theta in [0.0, 0.15, 0.3, 0.5, 0.8, 1.0] {
                    let spec = PortfolioSpec {
                        n,
                        q,
                        correlation: CorrelationModel::Independent,
                        theta,
                    };
                    let fast = one_over_n_ruin(&spec).unwrap();
                    let m = ((theta * n as f64) - 1e-9).ceil().max(0.0) as u64;
                    let mut brute = 0.0;
                    for mask in 0u64..(1 << n) {
                        let fails = mask.count_ones() as u64;
                        if fails >= m {
                            brute += q.powi(fails as i32) * (1.0 - q).powi((n - fails) as i32);
                        }
                    }
                    assert!(
                        (fast - brute).abs() < 1e-12,
                        "n={n} q={q} theta={theta}: {fast} vs {brute}"
                    );
                }
            }
        }
    }

    #[test]
    fn diversification_helps_until_correlation_takes_it_back() {
        // theta = 1, independent: ruin falls monotonically with n.
        let mut last = 1.0;
        for n in 1..=10u64 {
            let p = one_over_n_ruin(&PortfolioSpec {
                n,
                q: 0.1,
                correlation: CorrelationModel::Independent,
                theta: 1.0,
            })
            .unwrap();
            assert!(p <= last);
            last = p;
        }
        // Full-failure ruin: the shock term dominates as rho grows.
        let mut last = 0.0;
        for rho in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let p = one_over_n_ruin(&PortfolioSpec {
                n: 10,
                q: 0.1,
                correlation: CorrelationModel::CommonShock { rho },
                theta: 1.0,
            })
            .unwrap();
            assert!(p >= last, "rho={rho}: {p} < {last}");
            last = p;
        }
        // A 10-source portfolio at rho=1 is exactly as fragile as one fund.
        assert!((last - 0.1).abs() < 1e-15);
    }

    #[test]
    fn large_portfolio_tail_stays_normalized() {
        let p = one_over_n_ruin(&PortfolioSpec {
            n: 100_000,
            q: 0.3,
            correlation: CorrelationModel::Independent,
            theta: 0.29,
        })
        .unwrap();
        assert!(p > 0.99 && p <= 1.0);
        let p = one_over_n_ruin(&PortfolioSpec {
            n: 100_000,
            q: 0.3,
            correlation: CorrelationModel::Independent,
            theta: 0.31,
        })
        .unwrap();
        assert!(p < 1e-10);
    }
}
