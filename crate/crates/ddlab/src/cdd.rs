//! Counter-based delta debugging: the round counter drives a precomputed
//! subset-size schedule, no per-element probabilities. Also hosts the
//! fixpoint driver shared by all reducers.

use crate::ddmin::{self, partition_ids};
use crate::error::ReduceError;
use crate::input::{ElementId, ElementList, ReductionOutcome};
use crate::oracle::PropertyOracle;
use crate::probdd::{self, ProbDdConfig};
use crate::session::Session;
use crate::telemetry::TelemetrySink;
use crate::theory;
use std::collections::BTreeSet;

/// Subset size for round `r` given the initial probability `p0`.
///
/// The estimated probability grows by the exact factor 1/(1-e^-1) per
/// round; once it reaches 0.5 the optimal subset is a singleton.
pub fn compute_size(r: u32, p0: f64) -> Result<u64, ReduceError> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(ReduceError::InvalidParameter(format!(
            "p0 must be in (0,1), got {p0}"
        )));
    }
    let p_r = theory::prob_at_round(r, p0)
        .map_err(|e| ReduceError::InvalidParameter(e.to_string()))?;
    if p_r >= 0.5 {
        return Ok(1);
    }
    theory::optimal_int_size(p_r).map_err(|e| ReduceError::InvalidParameter(e.to_string()))
}

/// Upper bound on the number of rounds until the schedule reaches size 1.
pub fn max_rounds(p0: f64) -> u32 {
    ((0.5 / p0).ln() / theory::growth_factor().ln()).ceil().max(0.0) as u32 + 1
}

/// One pass of counter-based reduction.
///
/// Each round partitions the current list into chunks of the scheduled
/// size (smaller remainder last) and attempts to delete each chunk in
/// order; successful deletions commit without restarting the sweep. The
/// size-1 round executes exactly once.
pub fn cdd_reduce(
    list: &ElementList,
    oracle: &mut dyn PropertyOracle,
    p0: f64,
    sink: &mut TelemetrySink,
    max_queries: Option<u64>,
) -> Result<ReductionOutcome, ReduceError> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(ReduceError::InvalidParameter(format!(
            "p0 must be in (0,1), got {p0}"
        )));
    }
    let mut session = Session::new(oracle, sink, max_queries);
    if list.is_empty() {
        return session.finish(list.clone(), 0);
    }

    let mut current = list.clone();
    let mut round: u32 = 0;
    loop {
        let size = compute_size(round, p0)? as usize;
        let chunks = partition_ids(&current, size.min(current.len().max(1)));
        for chunk in &chunks {
            let deleted: BTreeSet<ElementId> = chunk.iter().copied().collect();
            if session.attempt(&current, &deleted, round as u64, false)? {
                current = current.without(&deleted);
            }
        }
        round += 1;
        if size == 1 {
            break;
        }
    }
    session.finish(current, round as u64)
}

/// Which reducer a fixpoint run wraps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Ddmin,
    ProbDd,
    ProbDdNoRandom,
    Cdd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ddmin => "ddmin",
            Algorithm::ProbDd => "probdd",
            Algorithm::ProbDdNoRandom => "probdd-norandom",
            Algorithm::Cdd => "cdd",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ddmin" => Ok(Algorithm::Ddmin),
            "probdd" => Ok(Algorithm::ProbDd),
            "probdd-norandom" => Ok(Algorithm::ProbDdNoRandom),
            "cdd" => Ok(Algorithm::Cdd),
            other => Err(format!(
                "unknown algorithm {other:?} (expected ddmin|probdd|probdd-norandom|cdd)"
            )),
        }
    }
}

/// Parameters shared by the reducers; unused fields are ignored per
/// algorithm (ddmin needs none of them).
#[derive(Debug, Clone)]
pub struct ReduceParams {
    pub p0: f64,
    pub seed: u64,
    pub tie_rule: probdd::GainTieRule,
    pub max_queries: Option<u64>,
}

impl Default for ReduceParams {
    fn default() -> Self {
        ReduceParams {
            p0: 0.1,
            seed: 0,
            tie_rule: probdd::GainTieRule::Strict,
            max_queries: None,
        }
    }
}

/// Run one algorithm once.
pub fn reduce_once(
    alg: Algorithm,
    list: &ElementList,
    oracle: &mut dyn PropertyOracle,
    params: &ReduceParams,
    sink: &mut TelemetrySink,
) -> Result<ReductionOutcome, ReduceError> {
    match alg {
        Algorithm::Ddmin => ddmin::ddmin_reduce(list, oracle, sink, params.max_queries),
        Algorithm::Cdd => cdd_reduce(list, oracle, params.p0, sink, params.max_queries),
        Algorithm::ProbDd | Algorithm::ProbDdNoRandom => {
            let cfg = ProbDdConfig {
                p0: params.p0,
                seed: params.seed,
                randomized: alg == Algorithm::ProbDd,
                tie_rule: params.tie_rule,
            };
            probdd::probdd_reduce(list, oracle, &cfg, sink, params.max_queries)
        }
    }
}

/// Outcome of a fixpoint run: per-iteration sizes plus merged counters.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FixpointOutcome {
    pub outcome: ReductionOutcome,
    /// Element count after each iteration, in order.
    pub iteration_sizes: Vec<usize>,
    /// Iterations that actually shrank the list.
    pub productive_iterations: usize,
}

/// Rerun an algorithm on its own output until the element count stops
/// decreasing or `max_iterations` is hit.
pub fn fixpoint_reduce(
    alg: Algorithm,
    list: &ElementList,
    oracle: &mut dyn PropertyOracle,
    params: &ReduceParams,
    max_iterations: u32,
    sink: &mut TelemetrySink,
) -> Result<FixpointOutcome, ReduceError> {
    if max_iterations < 1 {
        return Err(ReduceError::InvalidParameter(
            "max_iterations must be >= 1".into(),
        ));
    }
    let mut current = list.clone();
    let mut iteration_sizes = Vec::new();
    let mut productive = 0usize;
    let mut queries = 0u64;
    let mut cache_hits = 0u64;
    let mut rounds = 0u64;
    let mut wall = 0.0f64;
    let mut last: Option<ReductionOutcome> = None;

    for _ in 0..max_iterations {
        let before = current.len();
        let out = reduce_once(alg, &current, oracle, params, sink)?;
        queries += out.oracle_invocations;
        cache_hits += out.cache_hits;
        rounds += out.rounds;
        wall += out.wall_time_secs;
        current = out.final_list.clone();
        iteration_sizes.push(current.len());
        if current.len() < before {
            productive += 1;
        }
        let done = current.len() == before;
        last = Some(out);
        if done {
            break;
        }
    }

    let mut outcome = last.expect("at least one iteration");
    outcome.oracle_invocations = queries;
    outcome.cache_hits = cache_hits;
    outcome.rounds = rounds;
    outcome.wall_time_secs = wall;
    outcome.final_list = current;
    Ok(FixpointOutcome {
        outcome,
        iteration_sizes,
        productive_iterations: productive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::{segment, Granularity};
    use crate::oracle::{AllFailOracle, PlantedOracle, TableOracle};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn ids(v: &[u64]) -> BTreeSet<ElementId> {
        v.iter().map(|&i| ElementId(i)).collect()
    }

    fn list_n(n: u64) -> ElementList {
        let text: String = (1..=n).map(|i| format!("line{i}\n")).collect();
        segment(text.as_bytes(), Granularity::Line)
    }

    #[test]
    fn schedule_for_quarter_probability() {
        assert_eq!(compute_size(0, 0.25).unwrap(), 4);
        assert_eq!(compute_size(1, 0.25).unwrap(), 2);
        assert_eq!(compute_size(2, 0.25).unwrap(), 1);
    }

    #[test]
    fn schedule_known_values() {
        assert_eq!(compute_size(0, 0.3).unwrap(), 3);
        assert_eq!(compute_size(0, 0.1).unwrap(), 10);
        assert!(compute_size(0, 1.5).is_err());
    }

    #[test]
    fn schedule_is_non_increasing_and_finite() {
        for &p0 in &[0.001, 0.01, 0.1, 0.25, 0.3, 0.49] {
            let mut prev = u64::MAX;
            let mut r = 0;
            loop {
                let s = compute_size(r, p0).unwrap();
                assert!(s <= prev, "p0={p0} r={r}");
                prev = s;
                if s == 1 {
                    break;
                }
                r += 1;
                assert!(r <= max_rounds(p0), "p0={p0} exceeded round bound");
            }
        }
    }

    #[test]
    fn schedule_matches_probdd_size_theory() {
        // compute_size and optimal_int_size(prob_at_round) agree wherever
        // the probability stays below the singleton threshold
        for &p0 in &[0.01, 0.1, 0.25, 0.4] {
            for r in 0..max_rounds(p0) {
                let p_r = theory::prob_at_round(r, p0).unwrap();
                if p_r >= 0.5 {
                    assert_eq!(compute_size(r, p0).unwrap(), 1);
                } else {
                    assert_eq!(
                        compute_size(r, p0).unwrap(),
                        theory::optimal_int_size(p_r).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn literal_growth_constant_gives_same_schedule() {
        // the printed 1.582 versus the exact 1/(1-e^-1), over the starting
        // probabilities used in practice; at extreme p0 (~1e-6) the literal
        // constant shifts the huge early sizes by a few elements
        for &p0 in &[2.5e-3, 0.1, 0.25, 0.49] {
            for r in 0..max_rounds(p0) {
                let p_lit = p0 * 1.582f64.powi(r as i32);
                let exact = compute_size(r, p0).unwrap();
                let lit = if p_lit >= 0.5 {
                    1
                } else {
                    theory::optimal_int_size(p_lit).unwrap()
                };
                assert_eq!(exact, lit, "p0={p0} r={r}");
            }
        }
    }

    #[test]
    fn all_fail_oracle_query_count_follows_schedule() {
        // 8 elements, p0=0.25: rounds of size 4, 2, 1 -> 2+4+8 = 14 queries
        let l = list_n(8);
        let mut oracle = AllFailOracle::new(l.id_set());
        let mut sink = TelemetrySink::new("cdd");
        let out = cdd_reduce(&l, &mut oracle, 0.25, &mut sink, None).unwrap();
        assert_eq!(out.oracle_invocations, 14);
        assert_eq!(out.final_list.id_set(), l.id_set());
        assert_eq!(out.rounds, 3);
    }

    #[test]
    fn all_fail_query_count_is_sum_of_ceil_n_over_s() {
        for (n, p0) in [(37u64, 0.1), (64, 0.25), (10, 0.02)] {
            let l = list_n(n);
            let mut oracle = AllFailOracle::new(l.id_set());
            let mut sink = TelemetrySink::new("cdd");
            let out = cdd_reduce(&l, &mut oracle, p0, &mut sink, None).unwrap();
            let mut expected = 0u64;
            let mut r = 0;
            loop {
                let s = compute_size(r, p0).unwrap();
                expected += n.div_ceil(s);
                if s == 1 {
                    break;
                }
                r += 1;
            }
            assert_eq!(out.oracle_invocations, expected, "n={n} p0={p0}");
        }
    }

    #[test]
    fn planted_kernel_recovered_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (n, k) in [(16u64, 3usize), (64, 9), (256, 16)] {
            let l = list_n(n);
            let mut all: Vec<ElementId> = l.ids().collect();
            all.shuffle(&mut rng);
            let kernel: BTreeSet<ElementId> = all.into_iter().take(k).collect();
            let mut oracle = PlantedOracle::new(kernel.clone()).unwrap();
            let mut sink = TelemetrySink::new("cdd");
            let out = cdd_reduce(&l, &mut oracle, 0.1, &mut sink, None).unwrap();
            assert_eq!(out.final_list.id_set(), kernel, "n={n} k={k}");
        }
    }

    #[test]
    fn no_complement_and_no_revisit_queries() {
        // p0 = 0.25 gives the 4/2/1 schedule, whose chunk sizes divide the
        // live list every round here, so no deleted set ever recurs; with
        // schedules whose remainder chunk shrinks to a single element (e.g.
        // p0 = 0.1 on this input), that singleton is legitimately retried
        // in the final round and counts as one Revisit
        let l = list_n(64);
        let kernel = ids(&[3, 17, 40]);
        let mut oracle = PlantedOracle::new(kernel).unwrap();
        let mut sink = TelemetrySink::new("cdd");
        cdd_reduce(&l, &mut oracle, 0.25, &mut sink, None).unwrap();
        let stats = sink.stats();
        assert_eq!(stats.complement.total, 0);
        assert_eq!(stats.revisit.total, 0);
    }

    #[test]
    fn singleton_schedule_misses_one_minimality() {
        // ψ holds on {a,b,c}, {a,c}, {c}; one singleton sweep stops at {a,c}
        let l = list_n(3);
        let holding = [ids(&[1, 2, 3]), ids(&[1, 3]), ids(&[3])]
            .into_iter()
            .collect();
        let mut oracle = TableOracle::new(ids(&[1, 2, 3]), holding).unwrap();
        let mut sink = TelemetrySink::new("cdd");
        let out = cdd_reduce(&l, &mut oracle, 0.5, &mut sink, None).unwrap();
        assert_eq!(out.final_list.id_set(), ids(&[1, 3]));
    }

    #[test]
    fn fixpoint_converges_on_the_table_oracle() {
        let l = list_n(3);
        let holding = [ids(&[1, 2, 3]), ids(&[1, 3]), ids(&[3])]
            .into_iter()
            .collect();
        let mut oracle = TableOracle::new(ids(&[1, 2, 3]), holding).unwrap();
        let mut sink = TelemetrySink::new("cdd");
        let params = ReduceParams {
            p0: 0.5,
            ..Default::default()
        };
        let fix = fixpoint_reduce(Algorithm::Cdd, &l, &mut oracle, &params, 10, &mut sink).unwrap();
        assert_eq!(fix.outcome.final_list.id_set(), ids(&[3]));
        assert_eq!(fix.iteration_sizes, vec![2, 1, 1]);
        assert_eq!(fix.productive_iterations, 2);
    }

    #[test]
    fn fixpoint_on_planted_confirms_in_one_extra_iteration() {
        let l = list_n(16);
        let kernel = ids(&[2, 9]);
        let mut oracle = PlantedOracle::new(kernel.clone()).unwrap();
        let mut sink = TelemetrySink::new("cdd");
        let params = ReduceParams {
            p0: 0.1,
            ..Default::default()
        };
        let fix = fixpoint_reduce(Algorithm::Cdd, &l, &mut oracle, &params, 10, &mut sink).unwrap();
        assert_eq!(fix.outcome.final_list.id_set(), kernel);
        assert_eq!(fix.iteration_sizes.len(), 2); // shrink, then confirm
        assert_eq!(fix.productive_iterations, 1);
    }

    #[test]
    fn fixpoint_single_iteration_equals_single_run() {
        let l = list_n(12);
        let kernel = ids(&[5]);
        let params = ReduceParams {
            p0: 0.1,
            ..Default::default()
        };

        let mut o1 = PlantedOracle::new(kernel.clone()).unwrap();
        let mut s1 = TelemetrySink::new("cdd");
        let fix = fixpoint_reduce(Algorithm::Cdd, &l, &mut o1, &params, 1, &mut s1).unwrap();

        let mut o2 = PlantedOracle::new(kernel).unwrap();
        let mut s2 = TelemetrySink::new("cdd");
        let single = cdd_reduce(&l, &mut o2, 0.1, &mut s2, None).unwrap();

        assert_eq!(fix.outcome.final_list, single.final_list);
        assert_eq!(fix.outcome.oracle_invocations, single.oracle_invocations);
    }
}
