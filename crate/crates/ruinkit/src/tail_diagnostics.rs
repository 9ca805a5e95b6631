//! Empirical and semi-analytic tail classification.
//!
//! The central question: does the law behind a sample have a tail heavy
//! enough that sums are dominated by single extremes? Four probes feed one
//! verdict:
//!
//! * convolution ratio `P(S_2 > x) / P(X > x)`: tends to 2 for
//!   subexponential laws, diverges for thin ones;
//! * sum-vs-max ratios `P(S_n > x) / P(X > x)` and `P(S_n > x) / P(M_n > x)`:
//!   the latter tends to 1 when the maximum carries the sum;
//! * max-to-sum path `R_n(p) = max |X_i|^p / sum |X_i|^p`: vanishes iff the
//!   p-th moment exists;
//! * Hill estimator of the tail exponent, and an exponential-moment
//!   stability probe (subexponential laws have no exponential moments).
//!
//! Two-tailed samples are folded by absolute value before any of the
//! positive-support diagnostics; spec-driven Monte Carlo uses the law as
//! given.
//!
//! Tail estimates resting on fewer than 100 exceedances are refused rather
//! than returned with a hollow standard error.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::rng::{self, salt};

/// Minimum exceedance count behind any reported tail ratio.
pub const MIN_TAIL_EXCEEDANCES: u64 = 100;

/// Finite-x convolution ratios inside this band read as subexponential.
pub const SUBEXP_BAND: (f64, f64) = (1.5, 3.0);

/// Default epsilons for the exponential-moment probe.
pub const DEFAULT_EPSILONS: [f64; 3] = [0.1, 0.5, 1.0];

/// Relative growth between doubling windows that flags a divergent moment.
const GROWTH_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailClass {
    Thin,
    Subexponential,
    InfiniteVariance,
    InfiniteMean,
}

impl TailClass {
    pub fn name(&self) -> &'static str {
        match self {
            TailClass::Thin => "thin",
            TailClass::Subexponential => "subexponential",
            TailClass::InfiniteVariance => "infinite_variance",
            TailClass::InfiniteMean => "infinite_mean",
        }
    }

    /// Anything beyond thin counts as fat for scope classification.
    pub fn is_fat(&self) -> bool {
        !matches!(self, TailClass::Thin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Local,
    Systemic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Quadrant {
    I,
    II,
    III,
    IV,
}

/// Where a (tail, scope) pair lands, and whether the precautionary regime
/// applies (fat-tailed and systemic).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadrantVerdict {
    pub tail_class: TailClass,
    pub scope: Scope,
    pub quadrant: Quadrant,
    pub pp_applies: bool,
}

pub fn classify_quadrant(tail_class: TailClass, scope: Scope) -> QuadrantVerdict {
    let quadrant = match (tail_class.is_fat(), scope) {
        (false, Scope::Local) => Quadrant::I,
        (false, Scope::Systemic) => Quadrant::II,
        (true, Scope::Local) => Quadrant::III,
        (true, Scope::Systemic) => Quadrant::IV,
    };
    QuadrantVerdict {
        tail_class,
        scope,
        quadrant,
        pp_applies: quadrant == Quadrant::IV,
    }
}

/// Input to the spec-or-sample diagnostics.
#[derive(Debug, Clone, Copy)]
pub enum TailInput<'a> {
    Spec(&'a DistributionSpec),
    Sample(&'a [f64]),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvolutionPoint {
    pub x: f64,
    pub ratio: f64,
    pub stderr: f64,
}

/// `P(S_2 > x) / P(X > x)` at each of `xs`.
///
/// For a spec, the denominator is exact and the numerator is Monte Carlo on
/// per-replicate substreams; for a sample, pairs are resampled with
/// replacement and the denominator is the empirical survival (samples are
/// folded by absolute value first). Each x must sit above the 0.9 quantile,
/// and every reported point must rest on at least
/// [`MIN_TAIL_EXCEEDANCES`] exceedances on both sides.
pub fn convolution_ratio(
    input: TailInput<'_>,
    xs: &[f64],
    replicates: u64,
    seed: u64,
) -> Result<Vec<ConvolutionPoint>> {
    if xs.is_empty() {
        return Err(Error::Domain("no evaluation points given".into()));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("evaluation points must be finite".into()));
    }
    if replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    match input {
        TailInput::Spec(spec) => {
            spec.validate()?;
            let mut denominators = Vec::with_capacity(xs.len());
            for &x in xs {
                let s = spec.survival_core(x);
                if s > 0.1 {
                    return Err(Error::Domain(format!(
                        "x = {x} sits below the 0.9 quantile (survival {s:.4}); tail ratios need tail points"
                    )));
                }
                denominators.push(s);
            }
            let hits = count_sum_exceedances(xs, replicates, |i| {
                let mut rng = rng::stream(seed, salt::CONVOLUTION, i);
                spec.quantile_core(rng::open_unit(&mut rng))
                    + spec.quantile_core(rng::open_unit(&mut rng))
            });
            build_ratio_points(xs, &hits, &denominators, replicates)
        }
        TailInput::Sample(values) => {
            let folded = fold_abs(values)?;
            let n = folded.len();
            let mut denominators = Vec::with_capacity(xs.len());
            for &x in xs {
                let exceed = folded.iter().filter(|v| **v > x).count() as u64;
                let s = exceed as f64 / n as f64;
                if s > 0.1 {
                    return Err(Error::Domain(format!(
                        "x = {x} sits below the empirical 0.9 quantile (survival {s:.4})"
                    )));
                }
                if exceed < MIN_TAIL_EXCEEDANCES {
                    return Err(Error::InsufficientTailData {
                        x,
                        exceedances: exceed,
                        required: MIN_TAIL_EXCEEDANCES,
                    });
                }
                denominators.push(s);
            }
            let hits = count_sum_exceedances(xs, replicates, |i| {
                let mut rng = rng::stream(seed, salt::CONVOLUTION, i);
                let a = folded[(rng.next_u64() % n as u64) as usize];
                let b = folded[(rng.next_u64() % n as u64) as usize];
                a + b
            });
            build_ratio_points(xs, &hits, &denominators, replicates)
        }
    }
}

use rand::RngCore;

fn count_sum_exceedances<F>(xs: &[f64], replicates: u64, draw_sum: F) -> Vec<u64>
where
    F: Fn(u64) -> f64 + Sync,
{
    (0..replicates)
        .into_par_iter()
        .fold(
            || vec![0u64; xs.len()],
            |mut acc, i| {
                let s = draw_sum(i);
                for (slot, &x) in acc.iter_mut().zip(xs) {
                    *slot += u64::from(s > x);
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; xs.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

fn build_ratio_points(
    xs: &[f64],
    hits: &[u64],
    denominators: &[f64],
    replicates: u64,
) -> Result<Vec<ConvolutionPoint>> {
    let mut points = Vec::with_capacity(xs.len());
    for ((&x, &h), &den) in xs.iter().zip(hits).zip(denominators) {
        if h < MIN_TAIL_EXCEEDANCES {
            return Err(Error::InsufficientTailData {
                x,
                exceedances: h,
                required: MIN_TAIL_EXCEEDANCES,
            });
        }
        let p = h as f64 / replicates as f64;
        let stderr = (p * (1.0 - p) / replicates as f64).sqrt();
        points.push(ConvolutionPoint {
            x,
            ratio: p / den,
            stderr: stderr / den,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SumMaxPoint {
    pub n: usize,
    pub x: f64,
    pub ratio_a: f64,
    pub ratio_a_stderr: f64,
    pub ratio_b: f64,
    pub ratio_b_stderr: f64,
}

/// Joint tail ratios for n-fold sums: `ratio_a = P(S_n > x) / P(X > x)` and
/// `ratio_b = P(S_n > x) / P(M_n > x)`.
///
/// Requires a positive-support law: with positive terms `M_n > x` implies
/// `S_n > x`, which is what makes `ratio_b >= 1` and its standard error
/// well-defined.
pub fn sum_max_ratio(
    spec: &DistributionSpec,
    n: usize,
    xs: &[f64],
    replicates: u64,
    seed: u64,
) -> Result<Vec<SumMaxPoint>> {
    spec.validate()?;
    if !spec.positive_support() {
        return Err(Error::Domain(
            "sum/max diagnostics need a positive-support law; fold two-tailed data first".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Domain("need at least one term per sum".into()));
    }
    if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("evaluation points must be finite and nonempty".into()));
    }
    if replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    let width = xs.len();
    let counts = (0..replicates)
        .into_par_iter()
        .fold(
            || vec![0u64; 2 * width],
            |mut acc, i| {
                let mut rng = rng::stream(seed, salt::SUM_MAX, i);
                let mut sum = 0.0;
                let mut max = f64::NEG_INFINITY;
                for _ in 0..n {
                    let v = spec.quantile_core(rng::open_unit(&mut rng));
                    sum += v;
                    max = max.max(v);
                }
                for (j, &x) in xs.iter().enumerate() {
                    acc[j] += u64::from(sum > x);
                    acc[width + j] += u64::from(max > x);
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; 2 * width],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let r = replicates as f64;
    let mut points = Vec::with_capacity(width);
    for (j, &x) in xs.iter().enumerate() {
        let (cs, cm) = (counts[j], counts[width + j]);
        debug_assert!(cm <= cs, "max exceedance without sum exceedance");
        if cm < MIN_TAIL_EXCEEDANCES {
            return Err(Error::InsufficientTailData {
                x,
                exceedances: cm,
                required: MIN_TAIL_EXCEEDANCES,
            });
        }
        let (ps, pm) = (cs as f64 / r, cm as f64 / r);
        let den = spec.survival_core(x);
        let ratio_b = ps / pm;
        // Delta method for the correlated count ratio; the M > x event is a
        // subset of S_n > x, so the covariance term is p_M (1 - p_S).
        let var_rel = ((1.0 - pm) / (r * pm) - (1.0 - ps) / (r * ps)).max(0.0);
        points.push(SumMaxPoint {
            n,
            x,
            ratio_a: ps / den,
            ratio_a_stderr: (ps * (1.0 - ps) / r).sqrt() / den,
            ratio_b,
            ratio_b_stderr: ratio_b * var_rel.sqrt(),
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MaxToSumPoint {
    pub n: usize,
    pub r: f64,
}

/// Cumulative path of `R_n(p) = max_i |X_i|^p / sum_i |X_i|^p` over sample
/// prefixes. `R_n(p) -> 0` iff `E|X|^p` is finite.
///
/// Prefixes that are identically zero have no defined ratio and carry NaN;
/// an all-zero sample is degenerate.
pub fn max_to_sum(values: &[f64], p: u32) -> Result<Vec<MaxToSumPoint>> {
    if values.is_empty() {
        return Err(Error::DegenerateInput("empty sample".into()));
    }
    if p == 0 {
        return Err(Error::Domain("moment order must be at least 1".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("sample contains non-finite values".into()));
    }
    let mut path = Vec::with_capacity(values.len());
    let mut max = 0.0f64;
    let mut sum = 0.0f64;
    for (i, &v) in values.iter().enumerate() {
        let w = v.abs().powi(p as i32);
        max = max.max(w);
        sum += w;
        path.push(MaxToSumPoint {
            n: i + 1,
            r: if sum > 0.0 { max / sum } else { f64::NAN },
        });
    }
    if sum == 0.0 {
        return Err(Error::DegenerateInput("all-zero sample".into()));
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HillEstimate {
    pub alpha: f64,
    pub stderr: f64,
    pub k: usize,
}

/// Hill tail-exponent estimate over the top `k` order statistics of the
/// folded sample: `alpha = k / sum ln(X_(i) / X_(k+1))`, `stderr = alpha/√k`.
pub fn hill_estimator(values: &[f64], k: usize) -> Result<HillEstimate> {
    if k < 10 {
        return Err(Error::Domain(format!(
            "hill estimator needs k >= 10 order statistics, got {k}"
        )));
    }
    let mut positives: Vec<f64> = values
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > 0.0 && v.is_finite())
        .collect();
    if positives.len() < k + 1 {
        return Err(Error::DegenerateInput(format!(
            "need at least k + 1 = {} positive values, got {}",
            k + 1,
            positives.len()
        )));
    }
    positives.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let threshold = positives[k];
    let log_sum: f64 = positives[..k].iter().map(|v| (v / threshold).ln()).sum();
    if log_sum <= 0.0 {
        return Err(Error::DegenerateInput(
            "top order statistics are tied; tail exponent undefined".into(),
        ));
    }
    let alpha = k as f64 / log_sum;
    Ok(HillEstimate {
        alpha,
        stderr: alpha / (k as f64).sqrt(),
        k,
    })
}

/// Default number of order statistics for the Hill estimator: `floor(n^0.6)`.
pub fn default_hill_k(n: usize) -> usize {
    (n as f64).powf(0.6).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentVerdict {
    Stable,
    Divergent,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpMomentPoint {
    pub epsilon: f64,
    pub verdict: MomentVerdict,
}

/// Cauchy-stability probe for `E[exp(eps X)]` on the folded sample: the mean
/// over the first half is compared with the mean over the whole sample; a
/// relative change above 10%, or any overflow, flags divergence.
pub fn exp_moment_probe(values: &[f64], epsilons: &[f64]) -> Result<Vec<ExpMomentPoint>> {
    if values.is_empty() {
        return Err(Error::DegenerateInput("empty sample".into()));
    }
    if epsilons.is_empty() || epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::Domain("epsilons must be positive and finite".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("sample contains non-finite values".into()));
    }
    let n = values.len();
    let half = (n / 2).max(1);
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut sum = 0.0f64;
        let mut half_mean = f64::NAN;
        let mut overflow = false;
        for (i, &v) in values.iter().enumerate() {
            let term = (eps * v.abs()).exp();
            if !term.is_finite() {
                overflow = true;
                break;
            }
            sum += term;
            if i + 1 == half {
                half_mean = sum / half as f64;
            }
        }
        let verdict = if overflow || !sum.is_finite() {
            MomentVerdict::Divergent
        } else {
            let full_mean = sum / n as f64;
            let rel = if half_mean > 0.0 {
                ((full_mean - half_mean) / half_mean).abs()
            } else {
                0.0
            };
            if n >= 2 && rel > GROWTH_TOLERANCE {
                MomentVerdict::Divergent
            } else {
                MomentVerdict::Stable
            }
        };
        out.push(ExpMomentPoint {
            epsilon: eps,
            verdict,
        });
    }
    Ok(out)
}

/// The evidence classify_tail weighs. Hill and the max-to-sum endpoint are
/// required; the convolution ratio and moment probe refine the verdict.
#[derive(Debug, Clone, Copy)]
pub struct TailEvidence {
    pub hill_alpha: f64,
    pub hill_stderr: f64,
    /// Final value of R_n(1) over the sample.
    pub max_to_sum_r1: f64,
    /// Convolution ratio at the deepest feasible x, if one was estimated.
    pub convolution_ratio_deepest: Option<f64>,
    /// Whether the exponential-moment probe diverged at every epsilon.
    pub exp_probe_all_divergent: Option<bool>,
}

/// Tail verdict from assembled evidence.
///
/// Order of application: Hill exponent bounds first (alpha <= 1 infinite
/// mean, alpha <= 2 infinite variance), then the subexponential window
/// (convolution ratio inside [`SUBEXP_BAND`], or no exponential moment at any
/// probed epsilon), else thin. Contradictory evidence is refused: a fat Hill
/// exponent alongside uniformly stable exponential moments, or a thin
/// verdict alongside a max-dominated sum.
pub fn classify_tail(evidence: &TailEvidence) -> Result<TailClass> {
    let alpha = evidence.hill_alpha;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!(
            "hill exponent must be positive and finite, got {alpha}"
        )));
    }
    if !(0.0..=1.0 + 1e-12).contains(&evidence.max_to_sum_r1) {
        return Err(Error::Domain(format!(
            "max-to-sum ratio must lie in (0, 1], got {}",
            evidence.max_to_sum_r1
        )));
    }
    let hill_class = if alpha <= 1.0 {
        Some(TailClass::InfiniteMean)
    } else if alpha <= 2.0 {
        Some(TailClass::InfiniteVariance)
    } else {
        None
    };
    if let Some(class) = hill_class {
        // A law with a tail exponent at or below 2 has divergent exponential
        // moments; a uniformly stable probe contradicts that.
        if evidence.exp_probe_all_divergent == Some(false) {
            return Err(Error::AmbiguousClassification {
                first: class.name().into(),
                second: TailClass::Thin.name().into(),
            });
        }
        return Ok(class);
    }
    let subexp_by_ratio = evidence
        .convolution_ratio_deepest
        .is_some_and(|r| (SUBEXP_BAND.0..=SUBEXP_BAND.1).contains(&r));
    if subexp_by_ratio || evidence.exp_probe_all_divergent == Some(true) {
        return Ok(TailClass::Subexponential);
    }
    // Thin verdict, unless the sum is visibly dominated by its maximum.
    if evidence.max_to_sum_r1 > 0.2 {
        return Err(Error::AmbiguousClassification {
            first: TailClass::Thin.name().into(),
            second: TailClass::InfiniteMean.name().into(),
        });
    }
    Ok(TailClass::Thin)
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxToSumPath {
    pub p: u32,
    pub path: Vec<MaxToSumPoint>,
}

/// Everything the diagnostics produced for one sample, plus the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct TailDiagnosticsReport {
    pub convolution_ratios: Vec<ConvolutionPoint>,
    pub sum_max_ratios: Vec<SumMaxPoint>,
    pub max_to_sum: Vec<MaxToSumPath>,
    pub exp_moment_probe: Vec<ExpMomentPoint>,
    pub hill: HillEstimate,
    pub tail_class: TailClass,
}

/// Convolution replicates used by [`diagnose_sample`].
const DIAGNOSE_CONV_REPLICATES: u64 = 400_000;

/// Run the full diagnostic battery on one sample (folded by absolute value)
/// and classify its tail.
///
/// Convolution ratios are estimated at the empirical 0.95/0.99/0.999
/// quantiles, keeping only levels with at least [`MIN_TAIL_EXCEEDANCES`]
/// sample exceedances. Classification errors (ambiguous or degenerate
/// evidence) propagate.
pub fn diagnose_sample(values: &[f64], seed: u64) -> Result<TailDiagnosticsReport> {
    let folded = fold_abs(values)?;
    let k = default_hill_k(folded.len());
    let hill = hill_estimator(&folded, k)?;
    let r1_path = max_to_sum(&folded, 1)?;
    let r2_path = max_to_sum(&folded, 2)?;
    let r1 = r1_path.last().unwrap().r;
    let probe = exp_moment_probe(&folded, &DEFAULT_EPSILONS)?;

    let mut sorted = folded.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    // Quantile ladder, with each index capped so at least the exceedance
    // floor remains above the chosen point; infeasible levels drop out.
    let mut xs = Vec::new();
    let cap = n.saturating_sub(MIN_TAIL_EXCEEDANCES as usize + 1);
    for q in [0.95, 0.99, 0.999] {
        let idx = ((n as f64 * q).ceil() as usize).min(cap);
        let x = sorted[idx];
        let exceed = (n - sorted.partition_point(|v| *v <= x)) as u64;
        let survival = exceed as f64 / n as f64;
        if exceed >= MIN_TAIL_EXCEEDANCES && survival <= 0.1 && xs.last().copied() != Some(x) {
            xs.push(x);
        }
    }
    let convolution_ratios = if xs.is_empty() {
        Vec::new()
    } else {
        convolution_ratio(
            TailInput::Sample(&folded),
            &xs,
            DIAGNOSE_CONV_REPLICATES,
            seed,
        )?
    };

    let evidence = TailEvidence {
        hill_alpha: hill.alpha,
        hill_stderr: hill.stderr,
        max_to_sum_r1: r1,
        convolution_ratio_deepest: convolution_ratios.last().map(|p| p.ratio),
        exp_probe_all_divergent: Some(
            probe.iter().all(|p| p.verdict == MomentVerdict::Divergent),
        ),
    };
    let tail_class = classify_tail(&evidence)?;

    Ok(TailDiagnosticsReport {
        convolution_ratios,
        sum_max_ratios: Vec::new(),
        max_to_sum: vec![
            MaxToSumPath {
                p: 1,
                path: r1_path,
            },
            MaxToSumPath {
                p: 2,
                path: r2_path,
            },
        ],
        exp_moment_probe: probe,
        hill,
        tail_class,
    })
}

/// Empirical `q`-quantile of `S_n` under the spec, from a pilot Monte Carlo.
pub fn estimate_sum_quantile(
    spec: &DistributionSpec,
    n: usize,
    q: f64,
    replicates: u64,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0,1), got {q}")));
    }
    if replicates == 0 || n == 0 {
        return Err(Error::Domain("need n >= 1 and at least one replicate".into()));
    }
    let mut sums: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, salt::SUM_QUANTILE, i);
            (0..n)
                .map(|_| spec.quantile_core(rng::open_unit(&mut rng)))
                .sum()
        })
        .collect();
    sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((replicates as f64 * q).ceil() as usize).clamp(1, replicates as usize) - 1;
    Ok(sums[idx])
}

fn fold_abs(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::DegenerateInput("empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("sample contains non-finite values".into()));
    }
    Ok(values.iter().map(|v| v.abs()).collect())
}
