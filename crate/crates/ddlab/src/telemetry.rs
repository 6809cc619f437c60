//! Per-query records and the Complement/Revisit/Other query taxonomy.
//!
//! Every oracle query made by a reducer is recorded with a category:
//!
//! * `Complement` — the attempt deletes a majority of the live elements,
//!   i.e. it keeps a small subset and removes its complement.
//! * `Revisit` — the attempt repeats an earlier deletion: either the exact
//!   deleted id-set was tried before, or the driver flagged the query as
//!   part of a restarted sweep re-attempting earlier subsets.
//! * `Other` — everything else. An exact-half split is not a minority keep
//!   and goes here on first attempt.
//!
//! Precedence is Complement, then Revisit, then Other; each query gets
//! exactly one category.

use crate::input::ElementId;
use serde::Serialize;
use std::collections::{BTreeSet, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum QueryCategory {
    Complement,
    Revisit,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryOutcome {
    Holds,
    Fails,
    Timeout,
}

impl QueryOutcome {
    pub fn is_success(self) -> bool {
        self == QueryOutcome::Holds
    }
}

/// One oracle invocation.
#[derive(Debug, Clone, Serialize)]
pub struct QueryRecord {
    pub index: u64,
    pub algorithm: String,
    pub round: u64,
    pub deleted_ids: BTreeSet<ElementId>,
    pub deleted_count: usize,
    pub kept_count: usize,
    pub category: QueryCategory,
    pub outcome: QueryOutcome,
    pub cached: bool,
    pub duration_secs: f64,
}

/// Categorize a deletion attempt against the history of earlier attempts.
pub fn classify_query(
    history: &HashSet<BTreeSet<ElementId>>,
    deleted_ids: &BTreeSet<ElementId>,
    deleted_count: usize,
    kept_count: usize,
) -> QueryCategory {
    if deleted_count > kept_count {
        QueryCategory::Complement
    } else if history.contains(deleted_ids) {
        QueryCategory::Revisit
    } else {
        QueryCategory::Other
    }
}

/// Per-category totals, successes and success rates.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CategoryStats {
    pub total: u64,
    pub successes: u64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunStats {
    pub complement: CategoryStats,
    pub revisit: CategoryStats,
    pub other: CategoryStats,
    pub total_queries: u64,
    pub total_successes: u64,
    pub timeouts: u64,
    pub cache_hits: u64,
}

impl RunStats {
    pub fn category(&self, c: QueryCategory) -> &CategoryStats {
        match c {
            QueryCategory::Complement => &self.complement,
            QueryCategory::Revisit => &self.revisit,
            QueryCategory::Other => &self.other,
        }
    }
}

/// Aggregate a query stream into [`RunStats`].
pub fn summarize(records: &[QueryRecord]) -> RunStats {
    let mut stats = RunStats::default();
    for r in records {
        let bucket = match r.category {
            QueryCategory::Complement => &mut stats.complement,
            QueryCategory::Revisit => &mut stats.revisit,
            QueryCategory::Other => &mut stats.other,
        };
        bucket.total += 1;
        if r.outcome.is_success() {
            bucket.successes += 1;
            stats.total_successes += 1;
        }
        if r.outcome == QueryOutcome::Timeout {
            stats.timeouts += 1;
        }
        if r.cached {
            stats.cache_hits += 1;
        }
        stats.total_queries += 1;
    }
    for bucket in [&mut stats.complement, &mut stats.revisit, &mut stats.other] {
        bucket.success_rate = if bucket.total == 0 {
            0.0
        } else {
            bucket.successes as f64 / bucket.total as f64
        };
    }
    stats
}

/// Collects the query records of one reduction run.
///
/// A sink is owned by a single run; parallel runs use independent sinks.
pub struct TelemetrySink {
    algorithm: String,
    records: Vec<QueryRecord>,
    history: HashSet<BTreeSet<ElementId>>,
}

impl TelemetrySink {
    pub fn new(algorithm: impl Into<String>) -> Self {
        TelemetrySink {
            algorithm: algorithm.into(),
            records: Vec::new(),
            history: HashSet::new(),
        }
    }

    /// Record one query. `revisit_hint` marks queries a driver issued while
    /// re-sweeping earlier subsets after a successful deletion (ddmin's
    /// restart); such attempts are revisits even when the exact id-set was
    /// cut short in the interrupted sweep.
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        round: u64,
        deleted_ids: BTreeSet<ElementId>,
        kept_count: usize,
        outcome: QueryOutcome,
        cached: bool,
        duration_secs: f64,
        revisit_hint: bool,
    ) -> QueryCategory {
        let deleted_count = deleted_ids.len();
        let mut category =
            classify_query(&self.history, &deleted_ids, deleted_count, kept_count);
        if revisit_hint && category == QueryCategory::Other {
            category = QueryCategory::Revisit;
        }
        self.history.insert(deleted_ids.clone());
        let record = QueryRecord {
            index: self.records.len() as u64,
            algorithm: self.algorithm.clone(),
            round,
            deleted_ids,
            deleted_count,
            kept_count,
            category,
            outcome,
            cached,
            duration_secs,
        };
        self.records.push(record);
        category
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn stats(&self) -> RunStats {
        summarize(&self.records)
    }

    pub fn algorithm(&self) -> &str {
        &self.algorithm
    }
}

/// Full telemetry document: `{algorithm, input, records, stats}`.
#[derive(Debug, Serialize)]
pub struct TelemetryReport<'a> {
    pub algorithm: &'a str,
    pub input: &'a str,
    pub records: &'a [QueryRecord],
    pub stats: RunStats,
}

impl<'a> TelemetryReport<'a> {
    pub fn new(sink: &'a TelemetrySink, input: &'a str) -> Self {
        TelemetryReport {
            algorithm: sink.algorithm(),
            input,
            records: sink.records(),
            stats: sink.stats(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("telemetry serialization")
    }
}

/// Flatten records to CSV, one row per query.
pub fn records_to_csv(records: &[QueryRecord]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "index",
        "algorithm",
        "round",
        "deleted_ids",
        "deleted_count",
        "kept_count",
        "category",
        "outcome",
        "cached",
        "duration_secs",
    ])?;
    for r in records {
        let ids: Vec<String> = r.deleted_ids.iter().map(|i| i.0.to_string()).collect();
        w.write_record([
            r.index.to_string(),
            r.algorithm.clone(),
            r.round.to_string(),
            ids.join(" "),
            r.deleted_count.to_string(),
            r.kept_count.to_string(),
            format!("{:?}", r.category),
            format!("{:?}", r.outcome),
            r.cached.to_string(),
            format!("{}", r.duration_secs),
        ])?;
    }
    let bytes = w.into_inner().expect("csv into_inner");
    Ok(String::from_utf8(bytes).expect("csv utf8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u64]) -> BTreeSet<ElementId> {
        v.iter().map(|&i| ElementId(i)).collect()
    }

    #[test]
    fn majority_deletion_is_complement() {
        let history = HashSet::new();
        // keeping 1 of 8 deletes 7
        assert_eq!(
            classify_query(&history, &ids(&[2, 3, 4, 5, 6, 7, 8]), 7, 1),
            QueryCategory::Complement
        );
    }

    #[test]
    fn repeated_set_is_revisit() {
        let mut history = HashSet::new();
        history.insert(ids(&[1]));
        assert_eq!(classify_query(&history, &ids(&[1]), 1, 6), QueryCategory::Revisit);
    }

    #[test]
    fn exact_half_first_attempt_is_other() {
        let history = HashSet::new();
        assert_eq!(
            classify_query(&history, &ids(&[1, 2, 3, 4]), 4, 4),
            QueryCategory::Other
        );
    }

    #[test]
    fn complement_takes_precedence_over_revisit() {
        let mut history = HashSet::new();
        history.insert(ids(&[2, 3, 4]));
        assert_eq!(
            classify_query(&history, &ids(&[2, 3, 4]), 3, 1),
            QueryCategory::Complement
        );
    }

    #[test]
    fn summarize_empty_is_all_zero() {
        let stats = summarize(&[]);
        assert_eq!(stats.total_queries, 0);
        assert_eq!(stats.complement.total, 0);
        assert_eq!(stats.revisit.total, 0);
        assert_eq!(stats.other.total, 0);
        assert_eq!(stats.other.success_rate, 0.0);
    }

    #[test]
    fn categories_partition_the_stream() {
        let mut sink = TelemetrySink::new("test");
        sink.record(1, ids(&[1, 2]), 6, QueryOutcome::Fails, false, 0.0, false);
        sink.record(1, ids(&[1, 2]), 6, QueryOutcome::Fails, false, 0.0, false);
        sink.record(1, ids(&[3, 4, 5, 6, 7]), 1, QueryOutcome::Fails, false, 0.0, false);
        let stats = sink.stats();
        assert_eq!(
            stats.complement.total + stats.revisit.total + stats.other.total,
            stats.total_queries
        );
        assert_eq!(stats.revisit.total, 1);
        assert_eq!(stats.complement.total, 1);
    }

    #[test]
    fn csv_has_one_row_per_query() {
        let mut sink = TelemetrySink::new("test");
        sink.record(1, ids(&[1]), 3, QueryOutcome::Holds, false, 0.0, false);
        sink.record(1, ids(&[2]), 2, QueryOutcome::Fails, true, 0.0, false);
        let csv = records_to_csv(sink.records()).unwrap();
        assert_eq!(csv.lines().count(), 3); // header + 2 rows
    }
}
