//! Shared query plumbing for the reduction drivers.
//!
//! A [`Session`] owns the oracle and telemetry sink for the duration of one
//! reduction: it evaluates deletion attempts, records each query, enforces
//! the optional query budget, and re-verifies the final result once at the
//! end (that re-verification is not counted as a query).

use crate::error::ReduceError;
use crate::input::{ElementId, ElementList, ReductionOutcome};
use crate::oracle::PropertyOracle;
use crate::telemetry::{QueryOutcome, TelemetrySink};
use std::collections::BTreeSet;
use std::time::Instant;

pub struct Session<'a> {
    oracle: &'a mut dyn PropertyOracle,
    sink: &'a mut TelemetrySink,
    max_queries: Option<u64>,
    queries: u64,
    cache_hits: u64,
    started: Instant,
}

impl<'a> Session<'a> {
    pub fn new(
        oracle: &'a mut dyn PropertyOracle,
        sink: &'a mut TelemetrySink,
        max_queries: Option<u64>,
    ) -> Self {
        Session {
            oracle,
            sink,
            max_queries,
            queries: 0,
            cache_hits: 0,
            started: Instant::now(),
        }
    }

    /// Test deletion of `deleted` from `current`. Records the query and
    /// returns whether the variant still holds the property.
    pub fn attempt(
        &mut self,
        current: &ElementList,
        deleted: &BTreeSet<ElementId>,
        round: u64,
        revisit_hint: bool,
    ) -> Result<bool, ReduceError> {
        if let Some(budget) = self.max_queries {
            if self.queries >= budget {
                return Err(ReduceError::QueryBudgetExceeded {
                    budget,
                    queries: self.queries,
                });
            }
        }
        let variant = current.without(deleted);
        let t0 = Instant::now();
        let eval = self.oracle.evaluate(&variant)?;
        let duration = t0.elapsed().as_secs_f64();
        self.queries += 1;
        if eval.cached {
            self.cache_hits += 1;
        }
        let outcome = if eval.timed_out {
            QueryOutcome::Timeout
        } else if eval.verdict.holds() {
            QueryOutcome::Holds
        } else {
            QueryOutcome::Fails
        };
        let kept = current.len() - deleted.len();
        self.sink
            .record(round, deleted.clone(), kept, outcome, eval.cached, duration, revisit_hint);
        Ok(outcome.is_success())
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    /// Re-verify the final list once (uncounted) and build the outcome.
    pub fn finish(
        self,
        final_list: ElementList,
        rounds: u64,
    ) -> Result<ReductionOutcome, ReduceError> {
        let wall_time_secs = self.started.elapsed().as_secs_f64();
        let eval = self.oracle.evaluate(&final_list)?;
        if !eval.verdict.holds() {
            return Err(ReduceError::PreconditionFailed(
                "final result no longer satisfies the property; oracle is nondeterministic"
                    .into(),
            ));
        }
        Ok(ReductionOutcome {
            final_list,
            oracle_invocations: self.queries,
            cache_hits: self.cache_hits,
            wall_time_secs,
            rounds,
        })
    }
}
