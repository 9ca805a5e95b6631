//! Statistics of differences, done right and done wrong.
//!
//! The wrong way is everywhere: subtract the summary statistics of two
//! samples and treat the result as a statistic of the difference. Variances
//! do not subtract (the "difference" can come out negative), coefficients
//! of variation do not subtract, and running two separate significance
//! tests is not a test of the difference. Each operation here computes the
//! correct quantity next to the naive one so the gap is visible.

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::SampleSeries;
use crate::error::{Error, Result};
use crate::rng::{self, salt};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StatsBlock {
    pub mean: f64,
    pub variance: f64,
    /// mean / standard deviation; absent when the variance vanishes.
    pub cv: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// Statistics of the constructed difference sample X - Y.
    pub correct: StatsBlock,
    /// Componentwise differences of the two samples' separate statistics.
    pub naive: StatsBlock,
    /// The naive "variance" came out below zero, which no variance can.
    pub naive_variance_negative: bool,
    /// Some coefficient of variation was undefined (a zero-variance block).
    pub cv_undefined: bool,
    /// Number of difference pairs the correct block was computed over.
    pub pairs: u64,
}

/// How to turn two samples into one difference sample.
#[derive(Debug, Clone, Copy)]
pub enum Pairing {
    /// Index-aligned differences; lengths must match.
    Paired,
    /// Independent resampling with replacement: `pairs` draws of (x_i, y_j).
    Resampled { pairs: u64, seed: u64 },
}

fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

fn block(mean: f64, variance: f64) -> StatsBlock {
    StatsBlock {
        mean,
        variance,
        cv: if variance > 0.0 {
            Some(mean / variance.sqrt())
        } else {
            None
        },
    }
}

/// Correct-versus-naive statistics of X - Y.
///
/// The correct block is computed on an actual difference sample; the naive
/// block subtracts the separate statistics, down to the cv comparison
/// `E(X-Y)/sigma(X-Y)` versus `E(X)/sigma(X) - E(Y)/sigma(Y)`.
pub fn difference_stats(
    x: &SampleSeries,
    y: &SampleSeries,
    pairing: Pairing,
) -> Result<ComparisonReport> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::DegenerateInput(
            "difference statistics need at least two observations per sample".into(),
        ));
    }
    let diffs: Vec<f64> = match pairing {
        Pairing::Paired => {
            if x.len() != y.len() {
                return Err(Error::DegenerateInput(format!(
                    "paired differences need equal lengths, got {} and {}",
                    x.len(),
                    y.len()
                )));
            }
            x.values
                .iter()
                .zip(&y.values)
                .map(|(a, b)| a - b)
                .collect()
        }
        Pairing::Resampled { pairs, seed } => {
            if pairs < 2 {
                return Err(Error::DegenerateInput(
                    "resampled differences need at least two pairs".into(),
                ));
            }
            let mut rng = rng::stream(seed, salt::RESAMPLE, 0);
            let (nx, ny) = (x.len() as u64, y.len() as u64);
            (0..pairs)
                .map(|_| {
                    let i = (rng.next_u64() % nx) as usize;
                    let j = (rng.next_u64() % ny) as usize;
                    x.values[i] - y.values[j]
                })
                .collect()
        }
    };
    let (dm, dv) = mean_and_variance(&diffs);
    let (xm, xv) = mean_and_variance(&x.values);
    let (ym, yv) = mean_and_variance(&y.values);
    let correct = block(dm, dv);
    let naive = StatsBlock {
        mean: xm - ym,
        variance: xv - yv,
        cv: match (xv > 0.0, yv > 0.0) {
            (true, true) => Some(xm / xv.sqrt() - ym / yv.sqrt()),
            _ => None,
        },
    };
    Ok(ComparisonReport {
        naive_variance_negative: naive.variance < 0.0,
        cv_undefined: correct.cv.is_none() || naive.cv.is_none(),
        pairs: diffs.len() as u64,
        correct,
        naive,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoTestReport {
    /// Rate at which "exactly one of the two tests is significant" declares
    /// a difference between the effects.
    pub incorrect_rate: f64,
    /// Rate at which the direct interaction test declares a difference.
    pub correct_rate: f64,
    /// Fraction of replicates where each experiment's own test fired.
    pub power_x: f64,
    pub power_y: f64,
    pub alpha: f64,
    pub n_per_group: u64,
    pub replicates: u64,
    pub seed: u64,
}

/// The two-separate-tests error, measured.
///
/// Each replicate runs two independent two-group experiments (true effects
/// `effect_x` and `effect_y`, unit-variance gaussian subjects, `n_per_group`
/// per arm) and applies both procedures: significance of each experiment
/// separately (difference claimed when exactly one fires), and a two-sided
/// z-test on the difference of estimated effects.
pub fn two_test_fallacy_sim(
    effect_x: f64,
    effect_y: f64,
    n_per_group: u64,
    alpha: f64,
    replicates: u64,
    seed: u64,
) -> Result<TwoTestReport> {
    if n_per_group < 2 {
        return Err(Error::Domain("need at least two subjects per group".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "significance level must lie strictly inside (0,1), got {alpha}"
        )));
    }
    if replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    if !(effect_x.is_finite() && effect_y.is_finite()) {
        return Err(Error::Domain("effects must be finite".into()));
    }
    let z_crit = crate::distributions::DistributionSpec::gaussian(0.0, 1.0)
        .unwrap()
        .quantile_core(1.0 - alpha / 2.0);
    let n = n_per_group;
    // Effect estimate = treatment mean - control mean, variance 2/n under
    // unit subject noise; the interaction contrast has variance 4/n.
    let se_effect = (2.0 / n as f64).sqrt();
    let se_interaction = (4.0 / n as f64).sqrt();
    let counts = (0..replicates)
        .into_par_iter()
        .fold(
            || [0u64; 4],
            |mut acc, i| {
                let mut rng = rng::stream(seed, salt::TWO_TEST, i);
                let mut group_mean = |shift: f64| {
                    let mut sum = 0.0;
                    for _ in 0..n {
                        sum += shift + gaussian_draw(&mut rng);
                    }
                    sum / n as f64
                };
                let est_x = group_mean(effect_x) - group_mean(0.0);
                let est_y = group_mean(effect_y) - group_mean(0.0);
                let sig_x = (est_x / se_effect).abs() > z_crit;
                let sig_y = (est_y / se_effect).abs() > z_crit;
                let sig_interaction = ((est_x - est_y) / se_interaction).abs() > z_crit;
                acc[0] += u64::from(sig_x != sig_y);
                acc[1] += u64::from(sig_interaction);
                acc[2] += u64::from(sig_x);
                acc[3] += u64::from(sig_y);
                acc
            },
        )
        .reduce(
            || [0u64; 4],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let r = replicates as f64;
    Ok(TwoTestReport {
        incorrect_rate: counts[0] as f64 / r,
        correct_rate: counts[1] as f64 / r,
        power_x: counts[2] as f64 / r,
        power_y: counts[3] as f64 / r,
        alpha,
        n_per_group,
        replicates,
        seed,
    })
}

fn gaussian_draw(rng: &mut impl RngCore) -> f64 {
    crate::distributions::DistributionSpec::gaussian(0.0, 1.0)
        .unwrap()
        .quantile_core(rng::open_unit(rng))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadrantCell {
    pub first_lucky: bool,
    pub second_lucky: bool,
    pub frequency: f64,
    /// Mean |outcome difference| within the cell; absent if the cell never
    /// occurred.
    pub mean_abs_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LuckQuadrantReport {
    pub cells: Vec<QuadrantCell>,
    pub p_luck: f64,
    pub replicates: u64,
    pub seed: u64,
}

/// Pairs of independent lucky/unlucky draws with outcomes +1 (lucky) and -1
/// (unlucky): the four quadrants' frequencies and the outcome gap inside
/// each. Matched quadrants have zero gap; mixed ones sit two units apart.
pub fn luck_quadrant_sim(p_luck: f64, replicates: u64, seed: u64) -> Result<LuckQuadrantReport> {
    if !(p_luck.is_finite() && (0.0..=1.0).contains(&p_luck)) {
        return Err(Error::Domain(format!(
            "luck probability must lie in [0,1], got {p_luck}"
        )));
    }
    if replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    let tallies = (0..replicates)
        .into_par_iter()
        .fold(
            || ([0u64; 4], [0.0f64; 4]),
            |(mut counts, mut gaps), i| {
                let mut rng = rng::stream(seed, salt::LUCK, i);
                let first = rng::open_unit(&mut rng) < p_luck;
                let second = rng::open_unit(&mut rng) < p_luck;
                let outcome = |lucky: bool| if lucky { 1.0f64 } else { -1.0 };
                let cell = (first as usize) * 2 + second as usize;
                counts[cell] += 1;
                gaps[cell] += (outcome(first) - outcome(second)).abs();
                (counts, gaps)
            },
        )
        .reduce(
            || ([0u64; 4], [0.0f64; 4]),
            |(mut ca, mut ga), (cb, gb)| {
                for k in 0..4 {
                    ca[k] += cb[k];
                    ga[k] += gb[k];
                }
                (ca, ga)
            },
        );
    let (counts, gaps) = tallies;
    let r = replicates as f64;
    let cells = (0..4)
        .map(|cell| QuadrantCell {
            first_lucky: cell / 2 == 1,
            second_lucky: cell % 2 == 1,
            frequency: counts[cell] as f64 / r,
            mean_abs_gap: if counts[cell] > 0 {
                Some(gaps[cell] / counts[cell] as f64)
            } else {
                None
            },
        })
        .collect();
    Ok(LuckQuadrantReport {
        cells,
        p_luck,
        replicates,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionSpec;

    #[test]
    fn variances_add_rather_than_subtract() {
        let x = DistributionSpec::gaussian(1.0, 1.0).unwrap().sample(200_000, 103).unwrap();
        let y = DistributionSpec::gaussian(1.0, 1.0).unwrap().sample(200_000, 104).unwrap();
        let report = difference_stats(&x, &y, Pairing::Paired).unwrap();
        assert!((report.correct.variance - 2.0).abs() < 0.05);
        assert!(report.naive.variance.abs() < 0.05);
        assert!((report.correct.mean).abs() < 0.02);
        assert!(report.correct.variance >= 0.0);
    }

    #[test]
    fn the_naive_variance_goes_negative_and_is_flagged() {
        let x = DistributionSpec::gaussian(0.0, 1.0).unwrap().sample(50_000, 107).unwrap();
        let y = DistributionSpec::gaussian(0.0, 3.0).unwrap().sample(50_000, 108).unwrap();
        let report = difference_stats(&x, &y, Pairing::Paired).unwrap();
        assert!(report.naive.variance < 0.0);
        assert!(report.naive_variance_negative);
        assert!(report.correct.variance > 0.0);
    }

    #[test]
    fn cv_of_difference_is_not_the_difference_of_cvs() {
        // X ~ N(2,1), Y ~ N(1,4): cv(X-Y) = 1/sqrt(5), naive 2 - 1/2.
        let x = DistributionSpec::gaussian(2.0, 1.0).unwrap().sample(400_000, 109).unwrap();
        let y = DistributionSpec::gaussian(1.0, 2.0).unwrap().sample(400_000, 113).unwrap();
        let report = difference_stats(
            &x,
            &y,
            Pairing::Resampled { pairs: 400_000, seed: 127 },
        )
        .unwrap();
        let correct = report.correct.cv.unwrap();
        let naive = report.naive.cv.unwrap();
        assert!((correct - 1.0 / 5.0f64.sqrt()).abs() < 0.01, "correct cv {correct}");
        assert!((naive - 1.5).abs() < 0.01, "naive cv {naive}");
    }

    #[test]
    fn identical_paired_samples_have_zero_difference() {
        let x = DistributionSpec::gaussian(3.0, 2.0).unwrap().sample(1000, 131).unwrap();
        let report = difference_stats(&x, &x, Pairing::Paired).unwrap();
        assert_eq!(report.correct.mean, 0.0);
        assert_eq!(report.correct.variance, 0.0);
        assert!(report.correct.cv.is_none());
        assert!(report.cv_undefined);
    }

    #[test]
    fn pairing_preconditions_are_enforced() {
        let x = DistributionSpec::gaussian(0.0, 1.0).unwrap().sample(10, 1).unwrap();
        let y = DistributionSpec::gaussian(0.0, 1.0).unwrap().sample(11, 1).unwrap();
        assert!(difference_stats(&x, &y, Pairing::Paired).is_err());
        let tiny = DistributionSpec::gaussian(0.0, 1.0).unwrap().sample(1, 1).unwrap();
        assert!(difference_stats(&tiny, &y, Pairing::Paired).is_err());
    }

    #[test]
    fn equal_effects_at_half_power_fool_the_two_test_procedure() {
        // Effect sized for power 1/2: z_crit * sqrt(2/n).
        let n = 32u64;
        let z_crit = 1.959963984540054;
        let effect = z_crit * (2.0f64 / n as f64).sqrt();
        let report = two_test_fallacy_sim(effect, effect, n, 0.05, 100_000, 137).unwrap();
        assert!((report.power_x - 0.5).abs() < 0.02, "power {}", report.power_x);
        // Exactly one of two fair coins: 2 * 1/2 * 1/2.
        assert!(
            (report.incorrect_rate - 0.5).abs() < 0.02,
            "incorrect {}",
            report.incorrect_rate
        );
        assert!(
            (report.correct_rate - 0.05).abs() < 0.01,
            "correct {}",
            report.correct_rate
        );
    }

    #[test]
    fn null_effects_still_fool_the_two_test_procedure() {
        let report = two_test_fallacy_sim(0.0, 0.0, 16, 0.05, 100_000, 139).unwrap();
        let expected = 2.0 * 0.05 * 0.95;
        assert!(
            (report.incorrect_rate - expected).abs() < 0.01,
            "incorrect {} vs {expected}",
            report.incorrect_rate
        );
        assert!((report.correct_rate - 0.05).abs() < 0.01);
    }

    #[test]
    fn incorrect_procedure_dominates_across_the_power_range() {
        let n = 32u64;
        let z_crit = 1.959963984540054;
        let se = (2.0f64 / n as f64).sqrt();
        // Effects spanning per-test power from ~0.17 to ~0.85.
        for shift in [-1.0f64, -0.5, 0.0, 0.5, 1.0] {
            let effect = (z_crit + shift) * se;
            let report = two_test_fallacy_sim(effect, effect, n, 0.05, 30_000, 149).unwrap();
            assert!(
                report.power_x > 0.1 && report.power_x < 0.9,
                "power {} out of the asserted range",
                report.power_x
            );
            assert!(
                report.incorrect_rate > report.correct_rate,
                "power {}: incorrect {} <= correct {}",
                report.power_x,
                report.incorrect_rate,
                report.correct_rate
            );
        }
    }

    #[test]
    fn luck_quadrants_split_evenly_at_fair_odds() {
        let report = luck_quadrant_sim(0.5, 100_000, 151).unwrap();
        assert_eq!(report.cells.len(), 4);
        for cell in &report.cells {
            assert!((cell.frequency - 0.25).abs() < 0.01);
            let gap = cell.mean_abs_gap.unwrap();
            if cell.first_lucky == cell.second_lucky {
                assert_eq!(gap, 0.0);
            } else {
                assert_eq!(gap, 2.0);
            }
        }
        let total: f64 = report.cells.iter().map(|c| c.frequency).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certain_luck_lands_everything_in_one_quadrant() {
        let report = luck_quadrant_sim(1.0, 10_000, 157).unwrap();
        for cell in &report.cells {
            if cell.first_lucky && cell.second_lucky {
                assert_eq!(cell.frequency, 1.0);
            } else {
                assert_eq!(cell.frequency, 0.0);
                assert!(cell.mean_abs_gap.is_none());
            }
        }
    }

    #[test]
    fn simulations_are_reproducible() {
        let a = two_test_fallacy_sim(0.3, 0.1, 8, 0.05, 5000, 163).unwrap();
        let b = two_test_fallacy_sim(0.3, 0.1, 8, 0.05, 5000, 163).unwrap();
        assert_eq!(a.incorrect_rate, b.incorrect_rate);
        assert_eq!(a.correct_rate, b.correct_rate);
        let c = luck_quadrant_sim(0.3, 5000, 167).unwrap();
        let d = luck_quadrant_sim(0.3, 5000, 167).unwrap();
        assert_eq!(c.cells[1].frequency, d.cells[1].frequency);
    }
}
