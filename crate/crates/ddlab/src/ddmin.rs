//! The classic ddmin algorithm: minimize-to-subset, minimize-to-complement,
//! subdivide, at halving granularity. Serves as the baseline and as the
//! 1-minimality reference for the other reducers.

use crate::error::ReduceError;
use crate::input::{ElementId, ElementList, ReductionOutcome};
use crate::oracle::PropertyOracle;
use crate::session::Session;
use crate::telemetry::TelemetrySink;
use std::collections::BTreeSet;

/// Split the current element ids into chunks of `size`, in list order, with
/// a smaller remainder chunk last.
pub(crate) fn partition_ids(list: &ElementList, size: usize) -> Vec<Vec<ElementId>> {
    assert!(size >= 1);
    let ids: Vec<ElementId> = list.ids().collect();
    ids.chunks(size).map(|c| c.to_vec()).collect()
}

fn to_set(ids: &[ElementId]) -> BTreeSet<ElementId> {
    ids.iter().copied().collect()
}

/// Reduce `list` to a 1-minimal sublist preserving the property.
///
/// Preconditions (the caller's responsibility, not re-checked here to keep
/// query counts faithful): the property holds on `list` and fails on the
/// empty list.
pub fn ddmin_reduce(
    list: &ElementList,
    oracle: &mut dyn PropertyOracle,
    sink: &mut TelemetrySink,
    max_queries: Option<u64>,
) -> Result<ReductionOutcome, ReduceError> {
    let mut session = Session::new(oracle, sink, max_queries);
    if list.len() <= 1 {
        return session.finish(list.clone(), 0);
    }

    let mut current = list.clone();
    let mut size = (current.len() / 2).max(1);
    let mut round: u64 = 1;

    'outer: loop {
        // Step 1: minimize to subset. Test each chunk alone; on success keep
        // only that chunk and restart with halved size.
        'step1: loop {
            let chunks = partition_ids(&current, size);
            if chunks.len() < 2 {
                break;
            }
            for chunk in &chunks {
                let complement: BTreeSet<ElementId> = current
                    .ids()
                    .filter(|id| !chunk.contains(id))
                    .collect();
                if session.attempt(&current, &complement, round, false)? {
                    current = current.retain_only(&to_set(chunk));
                    if current.len() <= 1 {
                        break 'outer;
                    }
                    size = (current.len() / 2).max(1);
                    continue 'step1;
                }
            }
            break;
        }

        // Step 2: minimize to complement. Test each chunk's complement; on
        // success remove the chunk, keep the size, and restart the sweep
        // from the first chunk. Skipped entirely when the partition has
        // exactly two chunks (complements duplicate Step 1 variants).
        let mut restarted = false;
        'step2: loop {
            let chunks = partition_ids(&current, size);
            if chunks.len() <= 2 {
                break;
            }
            for chunk in &chunks {
                let deleted = to_set(chunk);
                if session.attempt(&current, &deleted, round, restarted)? {
                    current = current.without(&deleted);
                    restarted = true;
                    continue 'step2;
                }
            }
            break;
        }

        // Step 3: subdivide.
        if size > 1 {
            size = (size / 2).max(1);
            round += 1;
        } else {
            break;
        }
    }

    let rounds = round;
    session.finish(current, rounds)
}
