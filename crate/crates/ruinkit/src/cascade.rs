//! Cascades: how interdependence manufactures fat tails.
//!
//! Independent shocks aggregate thin-tailed; let each affected unit recruit
//! others and the total size acquires a power-law regime as the branching
//! ratio approaches 1. The branching model is Galton-Watson with Poisson(m)
//! offspring, whose total progeny has the Borel distribution as an exact
//! oracle. The network model is a single-seed independent cascade on a
//! static graph; partition barriers (edges across blocks never transmit)
//! bound cascade size by construction.

use rand::RngCore;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, salt};
use crate::tail_diagnostics::{diagnose_sample, TailDiagnosticsReport};

/// Node budget per branching replicate; a run that reaches it is recorded
/// at exactly this size and flagged. Supercritical ratios are legal, this
/// is what keeps them terminating.
pub const BRANCHING_NODE_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "edges", rename_all = "snake_case", deny_unknown_fields)]
pub enum EdgeModel {
    /// Cycle 0-1-...-(n-1)-0.
    Ring,
    /// rows x cols grid, 4-neighbor edges; rows * cols must equal the node
    /// count.
    Lattice { rows: usize, cols: usize },
    /// Every pair connected.
    Complete,
    /// Each pair connected independently with `edge_prob`, drawn once from
    /// `graph_seed` so every replicate sees the same graph.
    Random { edge_prob: f64, graph_seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CascadeModel {
    Branching {
        /// Poisson offspring mean (the branching ratio m).
        offspring_mean: f64,
    },
    Network {
        nodes: usize,
        #[serde(flatten)]
        edge_model: EdgeModel,
        transmission: f64,
        /// Partition of the node set into blocks; edges between blocks are
        /// removed. Absent means no barriers.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        barriers: Option<Vec<Vec<usize>>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CascadeConfig {
    #[serde(flatten)]
    pub model: CascadeModel,
    pub replicates: u64,
    pub seed: u64,
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("need at least one replicate".into()));
        }
        match &self.model {
            CascadeModel::Branching { offspring_mean } => {
                if !(offspring_mean.is_finite() && *offspring_mean >= 0.0) {
                    return Err(Error::Config(format!(
                        "offspring mean must be nonnegative, got {offspring_mean}"
                    )));
                }
            }
            CascadeModel::Network {
                nodes,
                edge_model,
                transmission,
                barriers,
            } => {
                if *nodes == 0 {
                    return Err(Error::Config("network needs at least one node".into()));
                }
                if !(transmission.is_finite() && (0.0..=1.0).contains(transmission)) {
                    return Err(Error::Config(format!(
                        "transmission probability must lie in [0,1], got {transmission}"
                    )));
                }
                match edge_model {
                    EdgeModel::Lattice { rows, cols } => {
                        if rows * cols != *nodes {
                            return Err(Error::Config(format!(
                                "lattice {rows}x{cols} does not match {nodes} nodes"
                            )));
                        }
                    }
                    EdgeModel::Random { edge_prob, .. } => {
                        if !(edge_prob.is_finite() && (0.0..=1.0).contains(edge_prob)) {
                            return Err(Error::Config(format!(
                                "edge probability must lie in [0,1], got {edge_prob}"
                            )));
                        }
                    }
                    EdgeModel::Ring | EdgeModel::Complete => {}
                }
                if let Some(blocks) = barriers {
                    let mut seen = vec![false; *nodes];
                    for block in blocks {
                        for &v in block {
                            if v >= *nodes {
                                return Err(Error::Config(format!(
                                    "barrier block names node {v}, but there are only {nodes} nodes"
                                )));
                            }
                            if seen[v] {
                                return Err(Error::Config(format!(
                                    "barrier blocks must be disjoint; node {v} appears twice"
                                )));
                            }
                            seen[v] = true;
                        }
                    }
                    if seen.iter().any(|s| !s) {
                        return Err(Error::Config(
                            "barrier blocks must cover every node (they partition the graph)".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Cascade sizes per replicate, in replicate order.
#[derive(Debug, Clone, Serialize)]
pub struct CascadeSample {
    pub sizes: Vec<u64>,
    pub config: CascadeConfig,
    pub seed: u64,
    /// Branching runs stopped at [`BRANCHING_NODE_CAP`].
    pub capped: u64,
}

/// Borel total-progeny pmf: `P(size = n) = e^{-mn} (mn)^{n-1} / n!`,
/// evaluated in log space. Proper for m <= 1; supercritical m has escaping
/// mass and is refused.
pub fn borel_pmf(m: f64, n: u64) -> Result<f64> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Domain(format!(
            "branching ratio must be positive, got {m}"
        )));
    }
    if m > 1.0 {
        return Err(Error::Domain(format!(
            "branching ratio {m} exceeds 1; total progeny is improper (escape mass never lands)"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("total progeny includes the seed, so n >= 1".into()));
    }
    let nf = n as f64;
    let mn = m * nf;
    Ok(((nf - 1.0) * mn.ln() - mn - libm::lgamma(nf + 1.0)).exp())
}

fn branching_size(offspring_mean: f64, rng: &mut impl RngCore) -> (u64, bool) {
    if offspring_mean == 0.0 {
        return (1, false);
    }
    let law = Poisson::new(offspring_mean).expect("validated positive mean");
    let mut total: u64 = 1;
    let mut generation: u64 = 1;
    while generation > 0 {
        let mut next: u64 = 0;
        for _ in 0..generation {
            next += law.sample(rng) as u64;
            if total + next >= BRANCHING_NODE_CAP {
                return (BRANCHING_NODE_CAP, true);
            }
        }
        total += next;
        generation = next;
    }
    (total, false)
}

/// Galton-Watson cascade sizes: one tree per replicate, Poisson(m)
/// offspring, counted until extinction or the node cap.
pub fn run_branching(config: &CascadeConfig) -> Result<CascadeSample> {
    config.validate()?;
    let CascadeModel::Branching { offspring_mean } = config.model else {
        return Err(Error::Config("branching simulation needs a branching config".into()));
    };
    let results: Vec<(u64, bool)> = (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(config.seed, salt::BRANCHING, i);
            branching_size(offspring_mean, &mut rng)
        })
        .collect();
    let capped = results.iter().filter(|(_, c)| *c).count() as u64;
    Ok(CascadeSample {
        sizes: results.into_iter().map(|(s, _)| s).collect(),
        config: config.clone(),
        seed: config.seed,
        capped,
    })
}

fn build_adjacency(
    nodes: usize,
    edge_model: &EdgeModel,
    barriers: &Option<Vec<Vec<usize>>>,
) -> Vec<Vec<u32>> {
    // With barriers, nodes in different blocks are never adjacent.
    let block_of: Option<Vec<usize>> = barriers.as_ref().map(|blocks| {
        let mut map = vec![0usize; nodes];
        for (b, block) in blocks.iter().enumerate() {
            for &v in block {
                map[v] = b;
            }
        }
        map
    });
    let same_block = |u: usize, v: usize| match &block_of {
        Some(map) => map[u] == map[v],
        None => true,
    };
    let mut adj = vec![Vec::new(); nodes];
    let push = |adj: &mut Vec<Vec<u32>>, u: usize, v: usize| {
        if u != v && same_block(u, v) {
            adj[u].push(v as u32);
            adj[v].push(u as u32);
        }
    };
    match edge_model {
        EdgeModel::Ring => {
            if nodes == 2 {
                push(&mut adj, 0, 1);
            } else if nodes > 2 {
                for u in 0..nodes {
                    push(&mut adj, u, (u + 1) % nodes);
                }
            }
        }
        EdgeModel::Lattice { rows, cols } => {
            for r in 0..*rows {
                for c in 0..*cols {
                    let u = r * cols + c;
                    if c + 1 < *cols {
                        push(&mut adj, u, u + 1);
                    }
                    if r + 1 < *rows {
                        push(&mut adj, u, u + cols);
                    }
                }
            }
        }
        EdgeModel::Complete => {
            for u in 0..nodes {
                for v in (u + 1)..nodes {
                    push(&mut adj, u, v);
                }
            }
        }
        EdgeModel::Random {
            edge_prob,
            graph_seed,
        } => {
            let mut rng = rng::stream(*graph_seed, salt::CONTAGION_GRAPH, 0);
            for u in 0..nodes {
                for v in (u + 1)..nodes {
                    // Draw for every pair so the graph does not depend on
                    // which pairs barriers would have pruned.
                    let open = rng::open_unit(&mut rng) < *edge_prob;
                    if open {
                        push(&mut adj, u, v);
                    }
                }
            }
        }
    }
    adj
}

/// Independent-cascade contagion: one uniformly chosen seed node per
/// replicate; each newly affected node gets a single independent
/// `transmission`-probability attempt along each incident edge.
pub fn run_network_contagion(config: &CascadeConfig) -> Result<CascadeSample> {
    config.validate()?;
    let CascadeModel::Network {
        nodes,
        ref edge_model,
        transmission,
        ref barriers,
    } = config.model
    else {
        return Err(Error::Config("network simulation needs a network config".into()));
    };
    let adj = build_adjacency(nodes, edge_model, barriers);
    let sizes: Vec<u64> = (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(config.seed, salt::CONTAGION, i);
            let seed_node = (rng.next_u64() % nodes as u64) as usize;
            let mut affected = vec![false; nodes];
            affected[seed_node] = true;
            let mut frontier = vec![seed_node];
            let mut size: u64 = 1;
            while let Some(u) = frontier.pop() {
                for &v in &adj[u] {
                    let v = v as usize;
                    if !affected[v] && rng::open_unit(&mut rng) < transmission {
                        affected[v] = true;
                        size += 1;
                        frontier.push(v);
                    }
                }
            }
            size
        })
        .collect();
    Ok(CascadeSample {
        sizes,
        config: config.clone(),
        seed: config.seed,
        capped: 0,
    })
}

/// Feed the simulated sizes through the tail-diagnostics battery. A
/// cascade's claim to fat tails is judged by the same evidence as any other
/// sample; degenerate or ambiguous evidence propagates as errors.
pub fn aggregate_tail_report(sample: &CascadeSample) -> Result<TailDiagnosticsReport> {
    if sample.sizes.len() < 1000 {
        return Err(Error::DegenerateInput(format!(
            "tail diagnostics over cascade sizes need at least 1000 replicates, got {}",
            sample.sizes.len()
        )));
    }
    let values: Vec<f64> = sample.sizes.iter().map(|s| *s as f64).collect();
    diagnose_sample(&values, sample.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn branching(m: f64, replicates: u64, seed: u64) -> CascadeConfig {
        CascadeConfig {
            model: CascadeModel::Branching { offspring_mean: m },
            replicates,
            seed,
        }
    }

    fn network(
        nodes: usize,
        edge_model: EdgeModel,
        transmission: f64,
        barriers: Option<Vec<Vec<usize>>>,
        replicates: u64,
    ) -> CascadeConfig {
        CascadeConfig {
            model: CascadeModel::Network {
                nodes,
                edge_model,
                transmission,
                barriers,
            },
            replicates,
            seed: 5,
        }
    }

    #[test]
    fn borel_pmf_matches_hand_values() {
        assert!((borel_pmf(0.5, 1).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((borel_pmf(0.5, 2).unwrap() - (-1.0f64).exp() / 2.0).abs() < 1e-15);
        assert!(borel_pmf(1.2, 1).is_err());
        assert!(borel_pmf(0.0, 1).is_err());
        assert!(borel_pmf(0.5, 0).is_err());
    }

    #[test]
    fn borel_pmf_is_proper_below_criticality() {
        for m in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let mut sum = 0.0;
            for n in 1..=200_000u64 {
                sum += borel_pmf(m, n).unwrap();
                if 1.0 - sum < 1e-10 {
                    break;
                }
            }
            assert!(1.0 - sum < 1e-9, "m={m}: mass {sum}");
        }
    }

    #[test]
    fn critical_borel_truncation_mass_follows_the_square_root_law() {
        // At m=1 the pmf decays like n^{-3/2}; the mass beyond N is about
        // 2/sqrt(2 pi N).
        let n_cap = 1_000_000u64;
        let mut sum = 0.0;
        for n in 1..=n_cap {
            sum += borel_pmf(1.0, n).unwrap();
        }
        let expected_tail = 2.0 / (2.0 * std::f64::consts::PI * n_cap as f64).sqrt();
        let tail = 1.0 - sum;
        assert!(
            (tail - expected_tail).abs() / expected_tail < 0.1,
            "tail {tail} vs {expected_tail}"
        );
    }

    #[test]
    fn zero_branching_ratio_keeps_every_cascade_at_the_seed() {
        let sample = run_branching(&branching(0.0, 1000, 3)).unwrap();
        assert!(sample.sizes.iter().all(|s| *s == 1));
        assert_eq!(sample.capped, 0);
    }

    #[test]
    fn subcritical_sizes_match_the_borel_law() {
        let sample = run_branching(&branching(0.5, 100_000, 7)).unwrap();
        let r = sample.sizes.len() as f64;
        let mean = sample.sizes.iter().sum::<u64>() as f64 / r;
        // Mean total progeny is 1/(1-m) = 2, variance m/(1-m)^3 = 4.
        let se = (4.0f64 / r).sqrt();
        assert!((mean - 2.0).abs() <= 3.0 * se, "mean {mean}");

        // Total variation distance between the empirical law and the pmf.
        let mut counts = std::collections::HashMap::new();
        for &s in &sample.sizes {
            *counts.entry(s).or_insert(0u64) += 1;
        }
        let max_size = *counts.keys().max().unwrap();
        let mut tv = 0.0;
        let mut oracle_mass = 0.0;
        for n in 1..=max_size {
            let p = borel_pmf(0.5, n).unwrap();
            let emp = counts.get(&n).copied().unwrap_or(0) as f64 / r;
            tv += (p - emp).abs();
            oracle_mass += p;
        }
        tv += 1.0 - oracle_mass; // oracle mass beyond the largest observation
        tv /= 2.0;
        assert!(tv < 0.01, "total variation {tv}");
    }

    #[test]
    fn mean_size_tracks_the_subcritical_formula() {
        for (m, seed) in [(0.2, 11u64), (0.5, 13), (0.8, 17)] {
            let sample = run_branching(&branching(m, 100_000, seed)).unwrap();
            let r = sample.sizes.len() as f64;
            let mean = sample.sizes.iter().sum::<u64>() as f64 / r;
            let expected = 1.0 / (1.0 - m);
            let sd = (m / (1.0 - m).powi(3)).sqrt();
            let se = sd / r.sqrt();
            assert!(
                (mean - expected).abs() <= 3.0 * se,
                "m={m}: mean {mean} vs {expected}"
            );
        }
    }

    #[test]
    fn critical_cascades_have_square_root_tails() {
        let sample = run_branching(&branching(1.0, 100_000, 19)).unwrap();
        let r = sample.sizes.len() as f64;
        // Log-log slope of the empirical survival over s in [10, 1000].
        let mut points = Vec::new();
        let mut s = 10u64;
        while s <= 1000 {
            let surv = sample.sizes.iter().filter(|v| **v > s).count() as f64 / r;
            points.push(((s as f64).ln(), surv.ln()));
            s *= 2;
        }
        let n = points.len() as f64;
        let (mx, my) = (
            points.iter().map(|p| p.0).sum::<f64>() / n,
            points.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!(
            (slope - (-0.5)).abs() <= 0.1,
            "log-log survival slope {slope}"
        );
    }

    #[test]
    fn supercritical_runs_cap_out_and_are_flagged() {
        let sample = run_branching(&branching(1.5, 200, 23)).unwrap();
        // Escape probability for m=1.5 is about 0.58; plenty of caps.
        assert!(sample.capped > 50, "capped {}", sample.capped);
        assert!(sample
            .sizes
            .iter()
            .any(|s| *s == BRANCHING_NODE_CAP));
        assert!(sample.sizes.iter().all(|s| *s <= BRANCHING_NODE_CAP));
    }

    #[test]
    fn mean_size_grows_with_the_branching_ratio() {
        let mut last = 0.0;
        for m in [0.2, 0.5, 0.8] {
            let sample = run_branching(&branching(m, 20_000, 29)).unwrap();
            let mean = sample.sizes.iter().sum::<u64>() as f64 / sample.sizes.len() as f64;
            assert!(mean > last, "m={m}: {mean} <= {last}");
            last = mean;
        }
    }

    #[test]
    fn zero_transmission_stops_at_the_seed() {
        let sample =
            run_network_contagion(&network(20, EdgeModel::Ring, 0.0, None, 2000)).unwrap();
        assert!(sample.sizes.iter().all(|s| *s == 1));
    }

    #[test]
    fn full_transmission_on_a_complete_graph_takes_every_node() {
        let sample =
            run_network_contagion(&network(17, EdgeModel::Complete, 1.0, None, 500)).unwrap();
        assert!(sample.sizes.iter().all(|s| *s == 17));
    }

    #[test]
    fn barriers_bound_cascades_by_their_block_size() {
        // 9 nodes in three blocks of 3: no cascade can exceed 3, even at
        // transmission 1 on a complete graph.
        let blocks = vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]];
        for edges in [
            EdgeModel::Ring,
            EdgeModel::Complete,
            EdgeModel::Lattice { rows: 3, cols: 3 },
            EdgeModel::Random { edge_prob: 0.8, graph_seed: 42 },
        ] {
            let sample = run_network_contagion(&network(
                9,
                edges.clone(),
                1.0,
                Some(blocks.clone()),
                2000,
            ))
            .unwrap();
            assert!(
                sample.sizes.iter().all(|s| *s <= 3),
                "{edges:?}: max size {}",
                sample.sizes.iter().max().unwrap()
            );
        }
    }

    #[test]
    fn mean_size_grows_with_transmission() {
        let mut last = 0.0;
        for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let sample = run_network_contagion(&network(
                100,
                EdgeModel::Random { edge_prob: 0.05, graph_seed: 9 },
                t,
                None,
                5000,
            ))
            .unwrap();
            let mean = sample.sizes.iter().sum::<u64>() as f64 / sample.sizes.len() as f64;
            assert!(mean > last, "t={t}: {mean} <= {last}");
            last = mean;
        }
    }

    #[test]
    fn lattice_shape_must_match_the_node_count() {
        let config = network(10, EdgeModel::Lattice { rows: 3, cols: 3 }, 0.5, None, 10);
        assert!(matches!(run_network_contagion(&config), Err(Error::Config(_))));
    }

    #[test]
    fn barrier_partitions_are_validated() {
        let overlapping = network(4, EdgeModel::Ring, 0.5, Some(vec![vec![0, 1], vec![1, 2, 3]]), 10);
        assert!(matches!(run_network_contagion(&overlapping), Err(Error::Config(_))));
        let incomplete = network(4, EdgeModel::Ring, 0.5, Some(vec![vec![0, 1]]), 10);
        assert!(matches!(run_network_contagion(&incomplete), Err(Error::Config(_))));
    }

    #[test]
    fn runs_are_reproducible() {
        let a = run_branching(&branching(0.9, 5000, 31)).unwrap();
        let b = run_branching(&branching(0.9, 5000, 31)).unwrap();
        assert_eq!(a.sizes, b.sizes);
        let c = run_branching(&branching(0.9, 5000, 32)).unwrap();
        assert_ne!(a.sizes, c.sizes);
    }

    #[test]
    fn tail_report_separates_subcritical_from_critical() {
        let quiet = run_branching(&branching(0.2, 100_000, 37)).unwrap();
        let report = aggregate_tail_report(&quiet).unwrap();
        assert!(report.hill.alpha > 2.0, "hill {}", report.hill.alpha);
        assert!(matches!(
            report.tail_class,
            crate::tail_diagnostics::TailClass::Thin
                | crate::tail_diagnostics::TailClass::Subexponential
        ));

        let critical = run_branching(&branching(1.0, 100_000, 37)).unwrap();
        let report = aggregate_tail_report(&critical).unwrap();
        assert!(
            report.hill.alpha >= 0.4 && report.hill.alpha <= 0.7,
            "hill {}",
            report.hill.alpha
        );
    }

    #[test]
    fn degenerate_sizes_are_refused_by_the_tail_report() {
        let constant =
            run_network_contagion(&network(20, EdgeModel::Ring, 0.0, None, 2000)).unwrap();
        assert!(matches!(
            aggregate_tail_report(&constant),
            Err(Error::DegenerateInput(_))
        ));
        let short = run_branching(&branching(0.5, 100, 41)).unwrap();
        assert!(matches!(
            aggregate_tail_report(&short),
            Err(Error::DegenerateInput(_))
        ));
    }
}
