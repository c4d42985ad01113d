//! Timed, optionally parallel front end to the core searches.
//!
//! Parallel runs evaluate the stage-1 partitions on the rayon pool and merge
//! them in partition order, so verdicts, witnesses and counts are the same
//! as in a serial run. Partitions after an already found witness are
//! cancelled.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use sumnet_core::families::FamilySpec;
use sumnet_core::gflin::FieldSpec;
use sumnet_core::netmodel::Network;
use sumnet_core::solver::{
    merge_partitions, LinearSearch, Mode, NonlinearSearch, PartitionOutcome, PartitionResult, SearchOptions,
    SearchReport, SolverError,
};

trait Partitioned: Sync {
    fn partitions(&self) -> u64;
    fn run_partition(&self, index: u64, budget: u64, cancel: &dyn Fn() -> bool) -> PartitionOutcome;
    fn run_serial(&self) -> SearchReport;
    fn lossless(&self) -> bool;
    fn mode(&self) -> Mode;
    fn options(&self) -> &SearchOptions;
}

macro_rules! partitioned {
    ($t:ty) => {
        impl Partitioned for $t {
            fn partitions(&self) -> u64 {
                <$t>::partitions(self)
            }
            fn run_partition(&self, index: u64, budget: u64, cancel: &dyn Fn() -> bool) -> PartitionOutcome {
                <$t>::run_partition(self, index, budget, cancel)
            }
            fn run_serial(&self) -> SearchReport {
                <$t>::run_serial(self)
            }
            fn lossless(&self) -> bool {
                <$t>::lossless(self)
            }
            fn mode(&self) -> Mode {
                <$t>::mode(self)
            }
            fn options(&self) -> &SearchOptions {
                <$t>::options(self)
            }
        }
    };
}

partitioned!(LinearSearch<'_>);
partitioned!(NonlinearSearch<'_>);

fn drive(search: &impl Partitioned) -> SearchReport {
    let start = Instant::now();
    let opts = *search.options();
    let mut report = if opts.parallel && search.partitions() > 1 {
        let winner = AtomicU64::new(u64::MAX);
        let outcomes: Vec<PartitionOutcome> = (0..search.partitions())
            .into_par_iter()
            .map(|i| {
                if winner.load(Ordering::Relaxed) < i {
                    return PartitionOutcome { result: PartitionResult::Cancelled, tries: 0 };
                }
                let cancel = || winner.load(Ordering::Relaxed) < i;
                let o = search.run_partition(i, opts.budget, &cancel);
                if matches!(o.result, PartitionResult::Found(_)) {
                    winner.fetch_min(i, Ordering::Relaxed);
                }
                o
            })
            .collect();
        let (verdict, enumerated) = merge_partitions(&outcomes, opts.budget, search.lossless());
        SearchReport { verdict, enumerated, elapsed: Default::default(), mode: search.mode() }
    } else {
        search.run_serial()
    };
    report.elapsed = start.elapsed();
    report
}

/// `(k, n)` linear search over `field`, parallel when `opts.parallel` is set.
pub fn search_linear(
    net: &Network,
    field: FieldSpec,
    k: usize,
    n: usize,
    opts: &SearchOptions,
) -> Result<SearchReport, SolverError> {
    Ok(drive(&LinearSearch::new(net, field, k, n, *opts)?))
}

/// Table-code search over Z_q, parallel when `opts.parallel` is set.
pub fn search_nonlinear(net: &Network, q: u32, opts: &SearchOptions) -> Result<SearchReport, SolverError> {
    Ok(drive(&NonlinearSearch::new(net, q, *opts)?))
}

/// Per-prime `k = n` verdicts for a family member.
pub fn classify(
    family: &FamilySpec,
    k: usize,
    primes: &[u32],
    opts: &SearchOptions,
) -> Result<BTreeMap<u32, SearchReport>, SolverError> {
    let net = family.build()?;
    primes
        .iter()
        .map(|&p| Ok((p, search_linear(&net, FieldSpec::new(p)?, k, k, opts)?)))
        .collect()
}
