//! Exhaustive solvability search for linear `(k, n)` codes over GF(p) and
//! for table codes over Z_q.
//!
//! Stage 1 enumerates the coefficient block of every edge that can reach a
//! terminal; stage 2 solves each terminal's decoders as a linear system (or,
//! for table codes, builds the decode table directly). A terminal is checked
//! as soon as every edge upstream of it is assigned, so failing prefixes are
//! pruned early.
//!
//! An edge's block `A` is `n × D` where `D` is its input dimension (`k` per
//! message at a source, `n` per in-edge at a relay), and the edge carries
//! `A · stack(inputs)`. Two reductions keep the search sound:
//!
//! * *canonical gauge*: `A` and `G·A` for invertible `G` are interchangeable
//!   (downstream coefficients absorb `G⁻¹`), so only reduced row echelon
//!   representatives are tried;
//! * *chain collapsing*: a block of maximal rank can simulate any block whose
//!   row space it contains, so only maximal-rank blocks are tried. When
//!   `D ≤ n` that leaves only the pass-through `[I; 0]`.
//!
//! Fixing source blocks to `[I 0]` (`normalize_sources`) is only lossless
//! when every source edge has `D ≤ n`; otherwise an exhausted search is
//! reported as [`Verdict::Inconclusive`].
//!
//! The search space is split into partitions by fixing the first few
//! variables. Running partitions in order and stopping at the first witness
//! is the serial search; [`merge_partitions`] reproduces it exactly from
//! independently computed partition outcomes.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use thiserror::Error;

use crate::codes::{edge_fan_in, table_index, table_len, LinearCode, NonlinearCode};
use crate::families::FamilySpec;
use crate::gflin::{FieldSpec, GfError, MatrixGF};
use crate::netmodel::{Network, SlotTarget};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Gf(#[from] GfError),
    #[error(transparent)]
    Family(#[from] crate::families::FamilyError),
    #[error("k and n must be at least 1")]
    BadDimensions,
    #[error("alphabet size must be at least 2")]
    BadAlphabet,
    #[error("budget must be at least 1")]
    ZeroBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SearchOptions {
    /// Maximum number of stage-1 candidate assignments tried.
    pub budget: u64,
    /// Fix source blocks to the leading identity (a heuristic unless every
    /// source edge has input dimension at most `n`).
    pub normalize_sources: bool,
    /// Try only maximal-rank blocks.
    pub collapse_chains: bool,
    /// Try only reduced row echelon blocks instead of every matrix.
    pub canonical_gauge: bool,
    /// Evaluate partitions concurrently (honoured by front ends that have threads).
    pub parallel: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            budget: 100_000_000,
            normalize_sources: false,
            collapse_chains: true,
            canonical_gauge: true,
            parallel: false,
        }
    }
}

impl SearchOptions {
    /// Every reduction off: each edge ranges over all `p^(nD)` matrices
    /// (or all tables).
    pub fn naive(budget: u64) -> Self {
        Self { budget, normalize_sources: false, collapse_chains: false, canonical_gauge: false, parallel: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Scalar,
    Vector(usize),
    Fractional(usize, usize),
    Nonlinear(u32),
}

impl Mode {
    pub fn linear(k: usize, n: usize) -> Self {
        match (k, n) {
            (1, 1) => Mode::Scalar,
            (k, n) if k == n => Mode::Vector(k),
            (k, n) => Mode::Fractional(k, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    Linear(LinearCode),
    Nonlinear(NonlinearCode),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Solvable(Witness),
    Unsolvable,
    BudgetExceeded,
    /// The reduced space was exhausted, but the reduction was not lossless.
    Inconclusive,
}

impl Verdict {
    pub fn is_solvable(&self) -> bool {
        matches!(self, Verdict::Solvable(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Solvable(_) => "solvable",
            Verdict::Unsolvable => "unsolvable",
            Verdict::BudgetExceeded => "budget_exceeded",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchReport {
    pub verdict: Verdict,
    /// Stage-1 candidate assignments tried (the budget when it ran out).
    pub enumerated: u64,
    /// Wall time; left zero by the clockless core and filled in by front ends.
    pub elapsed: Duration,
    pub mode: Mode,
}

/// How one partition ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionResult {
    Found(Witness),
    Exhausted,
    /// Needed more tries than the budget it was given.
    OverBudget,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionOutcome {
    pub result: PartitionResult,
    pub tries: u64,
}

/// Combines partition outcomes, given in partition order, into the serial
/// verdict. Each outcome must come from a run with the full `budget`.
/// Outcomes after the first witness may be missing or cancelled.
pub fn merge_partitions<'a>(
    outcomes: impl IntoIterator<Item = &'a PartitionOutcome>,
    budget: u64,
    lossless: bool,
) -> (Verdict, u64) {
    let mut used = 0u64;
    for o in outcomes {
        let remaining = budget - used;
        match &o.result {
            PartitionResult::OverBudget | PartitionResult::Cancelled => return (Verdict::BudgetExceeded, budget),
            _ if o.tries > remaining => return (Verdict::BudgetExceeded, budget),
            PartitionResult::Found(w) => return (Verdict::Solvable(w.clone()), used + o.tries),
            PartitionResult::Exhausted => used += o.tries,
        }
    }
    (if lossless { Verdict::Unsolvable } else { Verdict::Inconclusive }, used)
}

/// Largest candidate list built for a single edge.
const MAX_CANDIDATES: u64 = 1 << 20;
/// Partitions are cut once the fixed prefix has at least this many points.
const TARGET_PARTITIONS: u128 = 64;
/// Largest number of message tuples a table search tracks.
const MAX_TUPLES: u64 = 1 << 20;

/// Variable order and pruning schedule shared by both searches.
#[derive(Debug, Clone)]
struct Plan {
    /// Edge indices in assignment order.
    order: Vec<usize>,
    counts: Vec<u64>,
    /// Terminals (node indices) checked right after assigning `order[d]`.
    checks: Vec<Vec<usize>>,
    /// Terminals with no variable upstream.
    initial: Vec<usize>,
    prefix_len: usize,
    partitions: u64,
}

impl Plan {
    fn new(net: &Network, counts_by_edge: &[u64]) -> Self {
        let useful = net.edges_reaching_terminals();
        let mut topo_pos = vec![0usize; net.node_count()];
        for (i, &v) in net.topo_indices().iter().enumerate() {
            topo_pos[v] = i;
        }
        let terminals: Vec<usize> = (0..net.node_count()).filter(|&v| net.is_terminal(v)).collect();
        // edges upstream of each terminal, in topological edge order
        let ancestors: Vec<Vec<usize>> = terminals
            .iter()
            .map(|&t| {
                let mut seen_node = vec![false; net.node_count()];
                let mut seen_edge = vec![false; net.edge_count()];
                let mut stack = vec![t];
                seen_node[t] = true;
                while let Some(v) = stack.pop() {
                    for &e in net.in_edges(v) {
                        seen_edge[e] = true;
                        let tail = net.tail(e);
                        if !seen_node[tail] {
                            seen_node[tail] = true;
                            stack.push(tail);
                        }
                    }
                }
                let mut list: Vec<usize> = (0..net.edge_count()).filter(|&e| seen_edge[e] && useful[e]).collect();
                list.sort_by_key(|&e| (topo_pos[net.tail(e)], e));
                list
            })
            .collect();
        let mut position: Vec<Option<usize>> = vec![None; net.edge_count()];
        let mut order = Vec::new();
        let mut covered = vec![false; terminals.len()];
        loop {
            let mut best: Option<(u128, usize)> = None;
            for (ti, anc) in ancestors.iter().enumerate() {
                if covered[ti] {
                    continue;
                }
                let cost = anc
                    .iter()
                    .filter(|&&e| position[e].is_none())
                    .fold(1u128, |acc, &e| acc.saturating_mul(counts_by_edge[e] as u128));
                if best.is_none_or(|(c, _)| cost < c) {
                    best = Some((cost, ti));
                }
            }
            let Some((_, ti)) = best else { break };
            for &e in &ancestors[ti] {
                if position[e].is_none() {
                    position[e] = Some(order.len());
                    order.push(e);
                }
            }
            covered[ti] = true;
        }
        let mut checks = vec![Vec::new(); order.len()];
        let mut initial = Vec::new();
        for (ti, anc) in ancestors.iter().enumerate() {
            match anc.iter().filter_map(|&e| position[e]).max() {
                Some(d) => checks[d].push(terminals[ti]),
                None => initial.push(terminals[ti]),
            }
        }
        for c in &mut checks {
            c.sort_unstable();
        }
        let counts: Vec<u64> = order.iter().map(|&e| counts_by_edge[e]).collect();
        let mut prefix_len = 0;
        let mut product: u128 = 1;
        while prefix_len < order.len() && product < TARGET_PARTITIONS {
            product *= counts[prefix_len] as u128;
            prefix_len += 1;
        }
        Self { order, counts, checks, initial, prefix_len, partitions: product.min(u64::MAX as u128) as u64 }
    }

    /// Candidate indices of the prefix variables of partition `i`.
    fn prefix(&self, mut i: u64) -> Vec<u64> {
        let mut digits = vec![0u64; self.prefix_len];
        for d in (0..self.prefix_len).rev() {
            let c = self.counts[d].max(1);
            digits[d] = i % c;
            i /= c;
        }
        digits
    }
}

/// A search state the DFS can drive.
trait Assign {
    /// Called once before the candidates of `order[depth]` are tried.
    fn enter(&mut self, depth: usize);
    fn set(&mut self, depth: usize, candidate: u64);
    fn check(&mut self, terminal: usize) -> bool;
}

enum Flow {
    Continue,
    Stop,
    OverBudget,
    Cancelled,
}

struct Ctl<'a, V> {
    tries: u64,
    budget: u64,
    cancel: &'a dyn Fn() -> bool,
    visit: V,
}

fn dfs<A: Assign, V: FnMut(&mut A) -> bool>(a: &mut A, plan: &Plan, fixed: &[u64], depth: usize, ctl: &mut Ctl<V>) -> Flow {
    if depth == plan.order.len() {
        return if (ctl.visit)(a) { Flow::Continue } else { Flow::Stop };
    }
    a.enter(depth);
    let (lo, hi) = match fixed.get(depth) {
        Some(&c) => (c, c + 1),
        None => (0, plan.counts[depth]),
    };
    for c in lo..hi {
        if ctl.tries >= ctl.budget {
            return Flow::OverBudget;
        }
        if ctl.tries & 0x3ff == 0 && (ctl.cancel)() {
            return Flow::Cancelled;
        }
        ctl.tries += 1;
        a.set(depth, c);
        let checks = &plan.checks[depth];
        if checks.iter().all(|&t| a.check(t)) {
            match dfs(a, plan, fixed, depth + 1, ctl) {
                Flow::Continue => {}
                other => return other,
            }
        }
    }
    Flow::Continue
}

/// Runs one partition (or, with `fixed` empty, the whole space), calling
/// `visit` at every full assignment that passes every check; `visit`
/// returns whether to keep going.
fn run<A: Assign, V: FnMut(&mut A) -> bool>(
    a: &mut A,
    plan: &Plan,
    fixed: &[u64],
    budget: u64,
    cancel: &dyn Fn() -> bool,
    visit: V,
) -> (Flow, u64) {
    if !plan.initial.iter().all(|&t| a.check(t)) {
        return (Flow::Continue, 0);
    }
    let mut ctl = Ctl { tries: 0, budget, cancel, visit };
    let flow = dfs(a, plan, fixed, 0, &mut ctl);
    (flow, ctl.tries)
}

fn never() -> bool {
    false
}

/// Reduced row echelon `n × d` blocks of rank `r`, pivot sets in
/// lexicographic order, free entries in odometer order.
fn rref_blocks(field: FieldSpec, n: usize, d: usize, r: usize, out: &mut Vec<MatrixGF>) {
    let p = field.p();
    let mut pivots: Vec<usize> = (0..r).collect();
    loop {
        let free: Vec<(usize, usize)> = (0..r)
            .flat_map(|row| ((pivots[row] + 1)..d).filter(|c| !pivots.contains(c)).map(move |c| (row, c)))
            .collect();
        let mut digits = vec![0u32; free.len()];
        loop {
            let mut m = MatrixGF::zeros(field, n, d);
            for (row, &c) in pivots.iter().enumerate() {
                m.set(row, c, 1);
            }
            for (&(row, c), &v) in free.iter().zip(&digits) {
                m.set(row, c, v);
            }
            out.push(m);
            if !odometer(&mut digits, p) {
                break;
            }
        }
        if !next_combination(&mut pivots, d) {
            break;
        }
    }
}

fn rref_count(p: u32, d: usize, r: usize) -> u64 {
    let mut pivots: Vec<usize> = (0..r).collect();
    let mut total: u64 = 0;
    loop {
        let free: usize = (0..r).map(|row| ((pivots[row] + 1)..d).filter(|c| !pivots.contains(c)).count()).sum();
        total = total.saturating_add((p as u64).checked_pow(free as u32).unwrap_or(u64::MAX));
        if total > MAX_CANDIDATES || !next_combination(&mut pivots, d) {
            return total;
        }
    }
}

fn next_combination(c: &mut [usize], d: usize) -> bool {
    let r = c.len();
    for i in (0..r).rev() {
        if c[i] < d - r + i {
            c[i] += 1;
            for j in i + 1..r {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Advances a little-endian-last odometer (last digit fastest); false on wrap.
fn odometer(digits: &mut [u32], base: u32) -> bool {
    for s in digits.iter_mut().rev() {
        *s += 1;
        if *s < base {
            return true;
        }
        *s = 0;
    }
    false
}

/// Candidate blocks for one input dimension, or `None` when there are too many.
fn linear_candidates(field: FieldSpec, n: usize, d: usize, opts: &SearchOptions, limit: u64) -> Option<Vec<MatrixGF>> {
    let top = n.min(d);
    let ranks: Vec<usize> = if opts.collapse_chains { vec![top] } else { (0..=top).rev().collect() };
    let mut out = Vec::new();
    if opts.canonical_gauge {
        let count = ranks.iter().fold(0u64, |acc, &r| acc.saturating_add(rref_count(field.p(), d, r)));
        if count > limit {
            return None;
        }
        for r in ranks {
            rref_blocks(field, n, d, r, &mut out);
        }
    } else {
        let total = (field.p() as u64).checked_pow((n * d) as u32).filter(|&t| t <= limit)?;
        // every matrix, grouped by rank in the same order as the reduced lists
        let mut by_rank: Vec<Vec<MatrixGF>> = vec![Vec::new(); top + 1];
        let mut digits = vec![0u32; n * d];
        for _ in 0..total {
            let m = MatrixGF::new(field, n, d, digits.clone()).expect("shape");
            let r = m.rank();
            if ranks.contains(&r) {
                by_rank[r].push(m);
            }
            odometer(&mut digits, field.p());
        }
        for r in ranks {
            out.append(&mut by_rank[r]);
        }
    }
    Some(out)
}

/// A prepared linear search over one network, field and `(k, n)`.
pub struct LinearSearch<'a> {
    net: &'a Network,
    field: FieldSpec,
    k: usize,
    n: usize,
    opts: SearchOptions,
    plan: Plan,
    pool: Vec<Vec<MatrixGF>>,
    edge_pool: Vec<usize>,
    lossless: bool,
    /// Rows of the target transfer matrix, per terminal node.
    targets: BTreeMap<usize, (Vec<usize>, MatrixGF)>,
    too_large: bool,
}

impl<'a> LinearSearch<'a> {
    pub fn new(net: &'a Network, field: FieldSpec, k: usize, n: usize, opts: SearchOptions) -> Result<Self, SolverError> {
        if k == 0 || n == 0 {
            return Err(SolverError::BadDimensions);
        }
        if opts.budget == 0 {
            return Err(SolverError::ZeroBudget);
        }
        let useful = net.edges_reaching_terminals();
        let limit = MAX_CANDIDATES.min(opts.budget);
        let mut pool: Vec<Vec<MatrixGF>> = Vec::new();
        let mut keys: BTreeMap<(bool, usize), usize> = BTreeMap::new();
        let mut edge_pool = vec![usize::MAX; net.edge_count()];
        let mut counts = vec![0u64; net.edge_count()];
        let mut lossless = true;
        let mut too_large = false;
        for e in 0..net.edge_count() {
            if !useful[e] {
                continue;
            }
            let source = net.is_source(net.tail(e));
            let d = if source { k * edge_fan_in(net, e) } else { n * edge_fan_in(net, e) };
            let fixed = source && opts.normalize_sources;
            if fixed && d > n {
                lossless = false;
            }
            let key = (fixed, d);
            let idx = match keys.get(&key) {
                Some(&i) => i,
                None => {
                    let list = if fixed {
                        Some(vec![MatrixGF::leading_identity(field, n, d)])
                    } else {
                        linear_candidates(field, n, d, &opts, limit)
                    };
                    let list = list.unwrap_or_else(|| {
                        too_large = true;
                        Vec::new()
                    });
                    pool.push(list);
                    keys.insert(key, pool.len() - 1);
                    pool.len() - 1
                }
            };
            edge_pool[e] = idx;
            counts[e] = pool[idx].len() as u64;
        }
        let plan = Plan::new(net, &counts);
        let full_target = crate::codes::target_transfer(net, field, k);
        let mut targets = BTreeMap::new();
        for v in (0..net.node_count()).filter(|&v| net.is_terminal(v)) {
            let slots: Vec<usize> = (0..net.slots().len()).filter(|&s| net.slots()[s].terminal == v).collect();
            let mut t = MatrixGF::zeros(field, slots.len() * k, full_target.cols());
            for (i, &s) in slots.iter().enumerate() {
                t.set_block(i * k, 0, &full_target.block(s * k, 0, k, full_target.cols()));
            }
            targets.insert(v, (slots, t));
        }
        Ok(Self { net, field, k, n, opts, plan, pool, edge_pool, lossless, targets, too_large })
    }

    /// Number of independent partitions of the stage-1 space.
    pub fn partitions(&self) -> u64 {
        if self.too_large {
            1
        } else {
            self.plan.partitions
        }
    }

    /// Whether an exhausted search proves unsolvability.
    pub fn lossless(&self) -> bool {
        self.lossless
    }

    pub fn mode(&self) -> Mode {
        Mode::linear(self.k, self.n)
    }

    pub fn options(&self) -> &SearchOptions {
        &self.opts
    }

    fn state(&self) -> LinearState<'_, 'a> {
        let cols = self.net.messages().len() * self.k;
        LinearState {
            s: self,
            globals: vec![MatrixGF::zeros(self.field, self.n, cols); self.net.edge_count()],
            stacked: vec![MatrixGF::zeros(self.field, 0, cols); self.plan.order.len()],
            chosen: vec![0; self.net.edge_count()],
        }
    }

    pub fn run_partition(&self, index: u64, budget: u64, cancel: &dyn Fn() -> bool) -> PartitionOutcome {
        if self.too_large {
            return PartitionOutcome { result: PartitionResult::OverBudget, tries: 0 };
        }
        let prefix = self.plan.prefix(index);
        let mut st = self.state();
        let mut found = None;
        let (flow, tries) = run(&mut st, &self.plan, &prefix, budget, cancel, |st| {
            found = Some(st.witness());
            false
        });
        let result = match flow {
            Flow::Stop => PartitionResult::Found(Witness::Linear(found.expect("visited"))),
            Flow::Continue => PartitionResult::Exhausted,
            Flow::OverBudget => PartitionResult::OverBudget,
            Flow::Cancelled => PartitionResult::Cancelled,
        };
        PartitionOutcome { result, tries }
    }

    /// Serial search: partitions in order, stopping at the first witness.
    pub fn run_serial(&self) -> SearchReport {
        let budget = self.opts.budget;
        let mut outcomes = Vec::new();
        let mut used = 0u64;
        for i in 0..self.partitions() {
            let o = self.run_partition(i, budget - used, &never);
            let stop = !matches!(o.result, PartitionResult::Exhausted);
            used += o.tries;
            // a partition run on the remaining budget that ran out would also
            // run out on the full budget once the earlier tries are counted
            outcomes.push(o);
            if stop {
                break;
            }
        }
        let (verdict, enumerated) = merge_partitions(&outcomes, budget, self.lossless);
        SearchReport { verdict, enumerated, elapsed: Duration::ZERO, mode: self.mode() }
    }

    /// Visits every stage-1 assignment that admits decoders, each completed
    /// with one decoder solution. Returns the number of tries, or `None` if
    /// the budget ran out.
    pub fn for_each_solution(&self, mut visit: impl FnMut(&LinearCode) -> bool) -> Option<u64> {
        if self.too_large {
            return None;
        }
        let mut st = self.state();
        let (flow, tries) = run(&mut st, &self.plan, &[], self.opts.budget, &never, |st| visit(&st.witness()));
        match flow {
            Flow::OverBudget => None,
            _ => Some(tries),
        }
    }
}

struct LinearState<'s, 'a> {
    s: &'s LinearSearch<'a>,
    globals: Vec<MatrixGF>,
    /// Stacked inputs of the variable at each depth.
    stacked: Vec<MatrixGF>,
    chosen: Vec<u64>,
}

impl LinearState<'_, '_> {
    fn block(&self, e: usize) -> &MatrixGF {
        &self.s.pool[self.s.edge_pool[e]][self.chosen[e] as usize]
    }

    fn decoders(&self, terminal: usize) -> Option<MatrixGF> {
        let net = self.s.net;
        let (_, target) = &self.s.targets[&terminal];
        let parts: Vec<&MatrixGF> = net.in_edges(terminal).iter().map(|&e| &self.globals[e]).collect();
        let h = MatrixGF::vstack(self.s.field, target.cols(), &parts).expect("shapes agree");
        h.transpose().solve_right(&target.transpose()).expect("shapes agree").map(|x| x.transpose())
    }

    fn witness(&self) -> LinearCode {
        let s = self.s;
        let net = s.net;
        let mut code = LinearCode::new(s.field, s.k, s.n);
        for &e in &s.plan.order {
            let a = self.block(e);
            let id = &net.edge(e).id;
            let tail = net.tail(e);
            if net.is_source(tail) {
                for (j, mi) in net.messages_at(tail).into_iter().enumerate() {
                    code.set_source(&net.messages()[mi].id, id, a.block(0, j * s.k, s.n, s.k)).expect("shape");
                }
            } else {
                for (j, &ein) in net.in_edges(tail).iter().enumerate() {
                    code.set_local(&net.edge(ein).id, id, a.block(0, j * s.n, s.n, s.n)).expect("shape");
                }
            }
        }
        for (&t, (slots, _)) in &s.targets {
            let gamma = self.decoders(t).expect("checked terminal");
            let tid = net.node_id(t);
            for (i, &slot) in slots.iter().enumerate() {
                for (j, &e) in net.in_edges(t).iter().enumerate() {
                    let g = gamma.block(i * s.k, j * s.n, s.k, s.n);
                    code.set_decode(tid, net.slots()[slot].index, &net.edge(e).id, g).expect("shape");
                }
            }
        }
        code.prune_zeros();
        code
    }
}

impl Assign for LinearState<'_, '_> {
    fn enter(&mut self, depth: usize) {
        let s = self.s;
        let net = s.net;
        let e = s.plan.order[depth];
        let tail = net.tail(e);
        let cols = net.messages().len() * s.k;
        self.stacked[depth] = if net.is_source(tail) {
            let msgs = net.messages_at(tail);
            let mut sel = MatrixGF::zeros(s.field, msgs.len() * s.k, cols);
            for (j, mi) in msgs.into_iter().enumerate() {
                sel.set_block(j * s.k, mi * s.k, &MatrixGF::identity(s.field, s.k));
            }
            sel
        } else {
            let parts: Vec<&MatrixGF> = net.in_edges(tail).iter().map(|&i| &self.globals[i]).collect();
            MatrixGF::vstack(s.field, cols, &parts).expect("shapes agree")
        };
    }

    fn set(&mut self, depth: usize, candidate: u64) {
        let e = self.s.plan.order[depth];
        self.chosen[e] = candidate;
        let g = self.block(e).matmul(&self.stacked[depth]).expect("shapes agree");
        self.globals[e] = g;
    }

    fn check(&mut self, terminal: usize) -> bool {
        self.decoders(terminal).is_some()
    }
}

/// Decides `(k, n)` linear solvability by the staged search (serially).
pub fn search_linear(
    net: &Network,
    field: FieldSpec,
    k: usize,
    n: usize,
    opts: &SearchOptions,
) -> Result<SearchReport, SolverError> {
    let search = LinearSearch::new(net, field, k, n, *opts)?;
    Ok(search.run_serial())
}

/// A prepared search over table codes on Z_q.
pub struct NonlinearSearch<'a> {
    net: &'a Network,
    q: u32,
    opts: SearchOptions,
    plan: Plan,
    /// Message tuples, one row per tuple (last message fastest).
    tuples: Vec<Vec<u32>>,
    too_large: bool,
}

impl<'a> NonlinearSearch<'a> {
    pub fn new(net: &'a Network, q: u32, opts: SearchOptions) -> Result<Self, SolverError> {
        if q < 2 {
            return Err(SolverError::BadAlphabet);
        }
        if opts.budget == 0 {
            return Err(SolverError::ZeroBudget);
        }
        let useful = net.edges_reaching_terminals();
        let mut too_large = false;
        let mut counts = vec![0u64; net.edge_count()];
        for e in 0..net.edge_count() {
            if !useful[e] {
                continue;
            }
            let f = edge_fan_in(net, e);
            counts[e] = if opts.collapse_chains && f <= 1 {
                1
            } else {
                let len = table_len(q, f).unwrap_or(usize::MAX);
                match (q as u64).checked_pow(len.min(u32::MAX as usize) as u32) {
                    Some(c) if c <= opts.budget => c,
                    _ => {
                        too_large = true;
                        1
                    }
                }
            };
        }
        let m = net.messages().len();
        let count = (q as u64).checked_pow(m as u32).filter(|&c| c <= MAX_TUPLES);
        let tuples = match count {
            Some(c) => {
                let mut rows = Vec::with_capacity(c as usize);
                let mut digits = vec![0u32; m];
                for _ in 0..c {
                    rows.push(digits.clone());
                    odometer(&mut digits, q);
                }
                rows
            }
            None => {
                too_large = true;
                Vec::new()
            }
        };
        Ok(Self { net, q, opts, plan: Plan::new(net, &counts), tuples, too_large })
    }

    pub fn partitions(&self) -> u64 {
        if self.too_large {
            1
        } else {
            self.plan.partitions
        }
    }

    pub fn lossless(&self) -> bool {
        true
    }

    pub fn mode(&self) -> Mode {
        Mode::Nonlinear(self.q)
    }

    pub fn options(&self) -> &SearchOptions {
        &self.opts
    }

    pub fn run_partition(&self, index: u64, budget: u64, cancel: &dyn Fn() -> bool) -> PartitionOutcome {
        if self.too_large {
            return PartitionOutcome { result: PartitionResult::OverBudget, tries: 0 };
        }
        let prefix = self.plan.prefix(index);
        let mut st = TableState {
            s: self,
            symbols: vec![vec![0; self.tuples.len()]; self.net.edge_count()],
            keys: vec![Vec::new(); self.plan.order.len()],
            tables: vec![Vec::new(); self.net.edge_count()],
        };
        let mut found = None;
        let (flow, tries) = run(&mut st, &self.plan, &prefix, budget, cancel, |st| {
            found = Some(st.witness());
            false
        });
        let result = match flow {
            Flow::Stop => PartitionResult::Found(Witness::Nonlinear(found.expect("visited"))),
            Flow::Continue => PartitionResult::Exhausted,
            Flow::OverBudget => PartitionResult::OverBudget,
            Flow::Cancelled => PartitionResult::Cancelled,
        };
        PartitionOutcome { result, tries }
    }

    pub fn run_serial(&self) -> SearchReport {
        let budget = self.opts.budget;
        let mut outcomes = Vec::new();
        let mut used = 0u64;
        for i in 0..self.partitions() {
            let o = self.run_partition(i, budget - used, &never);
            let stop = !matches!(o.result, PartitionResult::Exhausted);
            used += o.tries;
            outcomes.push(o);
            if stop {
                break;
            }
        }
        let (verdict, enumerated) = merge_partitions(&outcomes, budget, true);
        SearchReport { verdict, enumerated, elapsed: Duration::ZERO, mode: self.mode() }
    }

    fn target(&self, slot: usize, row: &[u32]) -> u32 {
        match self.net.slots()[slot].target {
            SlotTarget::Sum => row.iter().fold(0, |a, &b| (a + b) % self.q),
            SlotTarget::Message(mi) => row[mi],
        }
    }
}

struct TableState<'s, 'a> {
    s: &'s NonlinearSearch<'a>,
    /// Symbol on each edge for every message tuple.
    symbols: Vec<Vec<u32>>,
    /// Table index read by the variable at each depth, per tuple.
    keys: Vec<Vec<usize>>,
    tables: Vec<Vec<u32>>,
}

impl TableState<'_, '_> {
    /// Decode table of one slot, or `None` on a conflict. Unseen entries are 0.
    fn decode_table(&self, terminal: usize, slot: usize) -> Option<Vec<u32>> {
        let s = self.s;
        let ins = s.net.in_edges(terminal);
        let mut seen: BTreeMap<usize, u32> = BTreeMap::new();
        for (r, row) in s.tuples.iter().enumerate() {
            let key = table_index(s.q, ins.iter().map(|&e| self.symbols[e][r]));
            let want = s.target(slot, row);
            if *seen.entry(key).or_insert(want) != want {
                return None;
            }
        }
        let len = table_len(s.q, ins.len())?;
        let mut table = vec![0; len];
        for (k, v) in seen {
            table[k] = v;
        }
        Some(table)
    }

    fn witness(&self) -> NonlinearCode {
        let s = self.s;
        let net = s.net;
        let mut code = NonlinearCode::new(s.q);
        for e in 0..net.edge_count() {
            let table = if self.tables[e].is_empty() {
                vec![0; table_len(s.q, edge_fan_in(net, e)).expect("small table")]
            } else {
                self.tables[e].clone()
            };
            code.edge_fn.insert(net.edge(e).id.clone(), table);
        }
        for (i, slot) in net.slots().iter().enumerate() {
            let table = self.decode_table(slot.terminal, i).expect("checked terminal");
            code.decode_fn.insert((net.node_id(slot.terminal).to_string(), slot.index), table);
        }
        code
    }
}

impl Assign for TableState<'_, '_> {
    fn enter(&mut self, depth: usize) {
        let s = self.s;
        let net = s.net;
        let e = s.plan.order[depth];
        let tail = net.tail(e);
        self.keys[depth] = if net.is_source(tail) {
            let msgs = net.messages_at(tail);
            s.tuples.iter().map(|row| table_index(s.q, msgs.iter().map(|&mi| row[mi]))).collect()
        } else {
            let ins = net.in_edges(tail);
            (0..s.tuples.len()).map(|r| table_index(s.q, ins.iter().map(|&i| self.symbols[i][r]))).collect()
        };
    }

    fn set(&mut self, depth: usize, candidate: u64) {
        let s = self.s;
        let e = s.plan.order[depth];
        let f = edge_fan_in(s.net, e);
        let len = table_len(s.q, f).expect("checked size");
        let table: Vec<u32> = if s.opts.collapse_chains && f <= 1 {
            (0..len as u32).map(|v| if f == 0 { 0 } else { v }).collect()
        } else {
            // candidate digits, first entry most significant
            let mut t = vec![0u32; len];
            let mut c = candidate;
            for slot in t.iter_mut().rev() {
                *slot = (c % s.q as u64) as u32;
                c /= s.q as u64;
            }
            t
        };
        let keys = &self.keys[depth];
        let sym = &mut self.symbols[e];
        for (r, &k) in keys.iter().enumerate() {
            sym[r] = table[k];
        }
        self.tables[e] = table;
    }

    fn check(&mut self, terminal: usize) -> bool {
        let net = self.s.net;
        (0..net.slots().len()).filter(|&i| net.slots()[i].terminal == terminal).all(|i| self.decode_table(terminal, i).is_some())
    }
}

/// Decides solvability by table codes over Z_q (serially).
pub fn search_nonlinear(net: &Network, q: u32, opts: &SearchOptions) -> Result<SearchReport, SolverError> {
    Ok(NonlinearSearch::new(net, q, *opts)?.run_serial())
}

/// Vector-linear (`k = n`) verdicts of a family member for each prime.
pub fn classify_characteristics(
    family: &FamilySpec,
    k: usize,
    primes: &[u32],
    opts: &SearchOptions,
) -> Result<BTreeMap<u32, SearchReport>, SolverError> {
    let net = family.build()?;
    let mut out = BTreeMap::new();
    for &p in primes {
        let field = FieldSpec::new(p)?;
        out.insert(p, search_linear(&net, field, k, k, opts)?);
    }
    Ok(out)
}
