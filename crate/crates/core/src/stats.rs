//! Per-thread instrumentation counters.
//!
//! Hot loops bump a thread-local record; callers collect it with
//! [`take_local`] and merge records from worker threads.

use std::cell::Cell;
use std::ops::AddAssign;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct QueryStats {
    pub sdf_queries: u64,
    pub clusters_visited: u64,
    pub clusters_skipped: u64,
    pub primitive_evals: u64,
    pub trace_steps: u64,
    pub rays_traced: u64,
    pub shadow_rays: u64,
}

impl QueryStats {
    pub fn merge(&mut self, other: &QueryStats) {
        self.sdf_queries += other.sdf_queries;
        self.clusters_visited += other.clusters_visited;
        self.clusters_skipped += other.clusters_skipped;
        self.primitive_evals += other.primitive_evals;
        self.trace_steps += other.trace_steps;
        self.rays_traced += other.rays_traced;
        self.shadow_rays += other.shadow_rays;
    }
}

impl AddAssign for QueryStats {
    fn add_assign(&mut self, rhs: QueryStats) {
        self.merge(&rhs);
    }
}

impl std::iter::Sum for QueryStats {
    fn sum<I: Iterator<Item = QueryStats>>(iter: I) -> Self {
        let mut total = QueryStats::default();
        for s in iter {
            total += s;
        }
        total
    }
}

thread_local! {
    static LOCAL: Cell<QueryStats> = const { Cell::new(QueryStats {
        sdf_queries: 0,
        clusters_visited: 0,
        clusters_skipped: 0,
        primitive_evals: 0,
        trace_steps: 0,
        rays_traced: 0,
        shadow_rays: 0,
    }) };
}

#[inline]
pub(crate) fn record(f: impl FnOnce(&mut QueryStats)) {
    LOCAL.with(|cell| {
        let mut s = cell.get();
        f(&mut s);
        cell.set(s);
    });
}

/// Returns this thread's counters and resets them.
pub fn take_local() -> QueryStats {
    LOCAL.with(|cell| cell.replace(QueryStats::default()))
}

/// Current counters without resetting.
pub fn peek_local() -> QueryStats {
    LOCAL.with(|cell| cell.get())
}
