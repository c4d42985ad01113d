//! Fractional linear codes and table-based nonlinear codes bound to a
//! [`Network`], and the transfer-matrix view of a linear code.
//!
//! Source messages act as virtual in-edges at their source node and decode
//! slots as virtual out-edges at their terminal. A `(k, n)` linear code maps
//! each message (`k` symbols) into `n` symbols per edge:
//!
//! * `source_coeff[(msg, e)]` is `n×k` and weights message `msg` on out-edge `e`,
//! * `local_coeff[(e', e)]` is `n×n` and weights in-edge `e'` on out-edge `e`,
//! * `decode_coeff[(t, slot, e)]` is `k×n` and weights in-edge `e` in slot `slot` of `t`.
//!
//! Absent keys are zero matrices.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::gflin::{FieldSpec, GfError, MatrixGF};
use crate::netmodel::{Network, SlotTarget};
use crate::transforms::{self, TransformError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error(transparent)]
    Gf(#[from] GfError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("coefficient {key} has shape {got:?}, expected {expected:?}")]
    Shape { key: String, got: (usize, usize), expected: (usize, usize) },
    #[error("coefficient over GF({got}) in a code over GF({expected})")]
    FieldMismatch { expected: u32, got: u32 },
    #[error("code over GF({code}) evaluated with field GF({other})")]
    WrongField { code: u32, other: u32 },
    #[error("unknown edge {0}")]
    UnknownEdge(String),
    #[error("unknown message {0}")]
    UnknownMessage(String),
    #[error("{0} is not a terminal")]
    UnknownTerminal(String),
    #[error("terminal {terminal} has no slot {slot}")]
    UnknownSlot { terminal: String, slot: usize },
    #[error("{0} are not adjacent")]
    NotAdjacent(String),
    #[error("input for message {0} is missing or has the wrong length")]
    BadInput(String),
    #[error("no function table for {0}")]
    MissingTable(String),
    #[error("table for {what} has {got} entries, expected {expected}")]
    TableSize { what: String, got: usize, expected: usize },
    #[error("table for {what} has symbol {symbol} outside Z_{q}")]
    TableSymbol { what: String, symbol: u32, q: u32 },
    #[error("exhaustive verification needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("empty path")]
    EmptyPath,
    #[error("invalid path: {0}")]
    BadPath(&'static str),
    #[error("alphabet size must be at least 2")]
    BadAlphabet,
}

/// A `(k, n)` fractional vector linear code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCode {
    field: FieldSpec,
    k: usize,
    n: usize,
    source_coeff: BTreeMap<(String, String), MatrixGF>,
    local_coeff: BTreeMap<(String, String), MatrixGF>,
    decode_coeff: BTreeMap<(String, usize, String), MatrixGF>,
}

impl LinearCode {
    /// The all-zero code.
    pub fn new(field: FieldSpec, k: usize, n: usize) -> Self {
        Self {
            field,
            k,
            n,
            source_coeff: BTreeMap::new(),
            local_coeff: BTreeMap::new(),
            decode_coeff: BTreeMap::new(),
        }
    }

    /// Every adjacency weighted by a leading identity (`I` when `k == n`).
    pub fn all_identity(net: &Network, field: FieldSpec, k: usize, n: usize) -> Self {
        let mut code = Self::new(field, k, n);
        for m in net.messages() {
            for &e in net.out_edges(m.node) {
                code.source_coeff.insert(
                    (m.id.clone(), net.edge(e).id.clone()),
                    MatrixGF::leading_identity(field, n, k),
                );
            }
        }
        for v in 0..net.node_count() {
            for &ein in net.in_edges(v) {
                for &eout in net.out_edges(v) {
                    code.local_coeff.insert(
                        (net.edge(ein).id.clone(), net.edge(eout).id.clone()),
                        MatrixGF::identity(field, n),
                    );
                }
            }
        }
        for slot in net.slots() {
            for &e in net.in_edges(slot.terminal) {
                code.decode_coeff.insert(
                    (net.node_id(slot.terminal).to_string(), slot.index, net.edge(e).id.clone()),
                    MatrixGF::leading_identity(field, k, n),
                );
            }
        }
        code
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn source_coeffs(&self) -> &BTreeMap<(String, String), MatrixGF> {
        &self.source_coeff
    }
    pub fn local_coeffs(&self) -> &BTreeMap<(String, String), MatrixGF> {
        &self.local_coeff
    }
    pub fn decode_coeffs(&self) -> &BTreeMap<(String, usize, String), MatrixGF> {
        &self.decode_coeff
    }

    fn check(&self, key: &str, m: &MatrixGF, expected: (usize, usize)) -> Result<(), CodeError> {
        if m.field() != self.field {
            return Err(CodeError::FieldMismatch { expected: self.field.p(), got: m.field().p() });
        }
        if m.shape() != expected {
            return Err(CodeError::Shape { key: key.to_string(), got: m.shape(), expected });
        }
        Ok(())
    }

    pub fn set_source(&mut self, msg: &str, edge: &str, m: MatrixGF) -> Result<(), CodeError> {
        self.check(&alloc::format!("source({msg}, {edge})"), &m, (self.n, self.k))?;
        self.source_coeff.insert((msg.into(), edge.into()), m);
        Ok(())
    }

    pub fn set_local(&mut self, input: &str, output: &str, m: MatrixGF) -> Result<(), CodeError> {
        self.check(&alloc::format!("local({input}, {output})"), &m, (self.n, self.n))?;
        self.local_coeff.insert((input.into(), output.into()), m);
        Ok(())
    }

    pub fn set_decode(&mut self, terminal: &str, slot: usize, edge: &str, m: MatrixGF) -> Result<(), CodeError> {
        self.check(&alloc::format!("decode({terminal}, {slot}, {edge})"), &m, (self.k, self.n))?;
        self.decode_coeff.insert((terminal.into(), slot, edge.into()), m);
        Ok(())
    }

    pub fn source(&self, msg: &str, edge: &str) -> MatrixGF {
        self.source_coeff
            .get(&(msg.into(), edge.into()))
            .cloned()
            .unwrap_or_else(|| MatrixGF::zeros(self.field, self.n, self.k))
    }

    pub fn local(&self, input: &str, output: &str) -> MatrixGF {
        self.local_coeff
            .get(&(input.into(), output.into()))
            .cloned()
            .unwrap_or_else(|| MatrixGF::zeros(self.field, self.n, self.n))
    }

    pub fn decode(&self, terminal: &str, slot: usize, edge: &str) -> MatrixGF {
        self.decode_coeff
            .get(&(terminal.into(), slot, edge.into()))
            .cloned()
            .unwrap_or_else(|| MatrixGF::zeros(self.field, self.k, self.n))
    }

    /// Drops entries that are zero matrices; they carry no information.
    pub fn prune_zeros(&mut self) {
        self.source_coeff.retain(|_, m| !m.is_zero());
        self.local_coeff.retain(|_, m| !m.is_zero());
        self.decode_coeff.retain(|_, m| !m.is_zero());
    }

    /// Checks that every key names an adjacency of `net`.
    pub fn check_binding(&self, net: &Network) -> Result<(), CodeError> {
        let edge = |id: &str| net.edge_index(id).ok_or_else(|| CodeError::UnknownEdge(id.into()));
        for (msg, e) in self.source_coeff.keys() {
            let mi = net.message_index(msg).ok_or_else(|| CodeError::UnknownMessage(msg.clone()))?;
            if net.tail(edge(e)?) != net.messages()[mi].node {
                return Err(CodeError::NotAdjacent(alloc::format!("message {msg} and edge {e}")));
            }
        }
        for (a, b) in self.local_coeff.keys() {
            if net.head(edge(a)?) != net.tail(edge(b)?) {
                return Err(CodeError::NotAdjacent(alloc::format!("edges {a} and {b}")));
            }
        }
        for (t, slot, e) in self.decode_coeff.keys() {
            let demand = net.terminals().get(t).ok_or_else(|| CodeError::UnknownTerminal(t.clone()))?;
            if *slot >= demand.slot_count() {
                return Err(CodeError::UnknownSlot { terminal: t.clone(), slot: *slot });
            }
            if net.node_id(net.head(edge(e)?)) != t {
                return Err(CodeError::NotAdjacent(alloc::format!("edge {e} and terminal {t}")));
            }
        }
        Ok(())
    }
}

/// Per-edge input wiring of a code, resolved to indices.
struct Wiring {
    /// For each edge: `(input index, coefficient)` where the input is a message
    /// index for source edges and an edge index otherwise.
    inputs: Vec<Vec<(usize, MatrixGF)>>,
    from_source: Vec<bool>,
    /// For each slot: `(in-edge, coefficient)`.
    decode: Vec<Vec<(usize, MatrixGF)>>,
    /// Edges in an order where every edge follows its inputs.
    edge_order: Vec<usize>,
}

impl Wiring {
    fn new(net: &Network, code: &LinearCode) -> Result<Self, CodeError> {
        code.check_binding(net)?;
        let mut inputs = Vec::with_capacity(net.edge_count());
        let mut from_source = Vec::with_capacity(net.edge_count());
        for e in 0..net.edge_count() {
            let tail = net.tail(e);
            let id = &net.edge(e).id;
            if net.is_source(tail) {
                from_source.push(true);
                let ins = net
                    .messages_at(tail)
                    .into_iter()
                    .filter_map(|mi| {
                        let key = (net.messages()[mi].id.clone(), id.clone());
                        code.source_coeff.get(&key).map(|m| (mi, m.clone()))
                    })
                    .collect();
                inputs.push(ins);
            } else {
                from_source.push(false);
                let ins = net
                    .in_edges(tail)
                    .iter()
                    .filter_map(|&ein| {
                        let key = (net.edge(ein).id.clone(), id.clone());
                        code.local_coeff.get(&key).map(|m| (ein, m.clone()))
                    })
                    .collect();
                inputs.push(ins);
            }
        }
        let decode = net
            .slots()
            .iter()
            .map(|s| {
                let t = net.node_id(s.terminal);
                net.in_edges(s.terminal)
                    .iter()
                    .filter_map(|&e| {
                        let key = (t.to_string(), s.index, net.edge(e).id.clone());
                        code.decode_coeff.get(&key).map(|m| (e, m.clone()))
                    })
                    .collect()
            })
            .collect();
        let edge_order = net
            .topo_indices()
            .iter()
            .flat_map(|&v| net.out_edges(v).iter().copied())
            .collect();
        Ok(Self { inputs, from_source, decode, edge_order })
    }
}

/// Forward evaluation of a linear code on concrete message vectors.
///
/// Returns, per terminal, the recovered `k`-vector of each decode slot.
pub fn eval_linear(
    net: &Network,
    code: &LinearCode,
    x: &BTreeMap<String, Vec<u32>>,
) -> Result<BTreeMap<String, Vec<Vec<u32>>>, CodeError> {
    let f = code.field;
    let wiring = Wiring::new(net, code)?;
    let mut msg_vec = Vec::with_capacity(net.messages().len());
    for m in net.messages() {
        let v = x.get(&m.id).filter(|v| v.len() == code.k).ok_or_else(|| CodeError::BadInput(m.id.clone()))?;
        msg_vec.push(MatrixGF::new(f, code.k, 1, v.iter().map(|&s| s % f.p()).collect())?);
    }
    let mut y: Vec<MatrixGF> = vec![MatrixGF::zeros(f, code.n, 1); net.edge_count()];
    for &e in &wiring.edge_order {
        let mut acc = MatrixGF::zeros(f, code.n, 1);
        for (input, coeff) in &wiring.inputs[e] {
            let src = if wiring.from_source[e] { &msg_vec[*input] } else { &y[*input] };
            acc.add_assign(&coeff.matmul(src)?)?;
        }
        y[e] = acc;
    }
    let mut out: BTreeMap<String, Vec<Vec<u32>>> = BTreeMap::new();
    for (slot, terms) in net.slots().iter().zip(&wiring.decode) {
        let mut acc = MatrixGF::zeros(f, code.k, 1);
        for (e, coeff) in terms {
            acc.add_assign(&coeff.matmul(&y[*e])?)?;
        }
        out.entry(net.node_id(slot.terminal).to_string()).or_default().push(acc.entries().to_vec());
    }
    Ok(out)
}

/// The terminal-cut × source-cut block matrix of a linear code.
///
/// Rows are decode slots in (terminal, slot) order and columns are messages
/// in (source node, position) order; every block is `k×k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferMatrix {
    pub k: usize,
    pub rows: Vec<(String, usize)>,
    pub cols: Vec<String>,
    pub matrix: MatrixGF,
}

impl TransferMatrix {
    pub fn block(&self, row: usize, col: usize) -> MatrixGF {
        self.matrix.block(row * self.k, col * self.k, self.k, self.k)
    }

    /// Block-level transpose: also swaps the row and column labels.
    pub fn transpose(&self) -> MatrixGF {
        self.matrix.transpose()
    }

    /// Applies the matrix to stacked message vectors (column order).
    pub fn apply(&self, x: &[Vec<u32>]) -> Result<Vec<Vec<u32>>, CodeError> {
        let f = self.matrix.field();
        let flat: Vec<u32> = x.iter().flat_map(|v| v.iter().map(|&s| s % f.p())).collect();
        let col = MatrixGF::new(f, flat.len(), 1, flat)?;
        let r = self.matrix.matmul(&col)?;
        Ok(r.entries().chunks(self.k.max(1)).map(<[u32]>::to_vec).collect())
    }
}

/// Global coding matrices `n × (|messages|·k)` of every edge.
pub fn global_matrices(net: &Network, code: &LinearCode) -> Result<Vec<MatrixGF>, CodeError> {
    let wiring = Wiring::new(net, code)?;
    let f = code.field;
    let cols = net.messages().len() * code.k;
    let mut g: Vec<MatrixGF> = vec![MatrixGF::zeros(f, code.n, cols); net.edge_count()];
    for &e in &wiring.edge_order {
        let mut acc = MatrixGF::zeros(f, code.n, cols);
        for (input, coeff) in &wiring.inputs[e] {
            if wiring.from_source[e] {
                let mut placed = MatrixGF::zeros(f, code.n, cols);
                placed.set_block(0, input * code.k, coeff);
                acc.add_assign(&placed)?;
            } else {
                acc.add_assign(&coeff.matmul(&g[*input])?)?;
            }
        }
        g[e] = acc;
    }
    Ok(g)
}

/// Computes the transfer matrix by propagating basis columns (one global
/// coding matrix per edge) rather than enumerating paths.
pub fn transfer_matrix(net: &Network, code: &LinearCode) -> Result<TransferMatrix, CodeError> {
    let f = code.field;
    let k = code.k;
    let g = global_matrices(net, code)?;
    let wiring = Wiring::new(net, code)?;
    let cols = net.messages().len() * k;
    let mut matrix = MatrixGF::zeros(f, net.slots().len() * k, cols);
    for (i, terms) in wiring.decode.iter().enumerate() {
        let mut acc = MatrixGF::zeros(f, k, cols);
        for (e, coeff) in terms {
            acc.add_assign(&coeff.matmul(&g[*e])?)?;
        }
        matrix.set_block(i * k, 0, &acc);
    }
    Ok(TransferMatrix {
        k,
        rows: net.slots().iter().map(|s| (net.node_id(s.terminal).to_string(), s.index)).collect(),
        cols: net.messages().iter().map(|m| m.id.clone()).collect(),
        matrix,
    })
}

/// The transfer matrix a solution must have: `I_k` where a slot demands a
/// message (every message for sum slots) and `0_k` elsewhere.
pub fn target_transfer(net: &Network, field: FieldSpec, k: usize) -> MatrixGF {
    let mut t = MatrixGF::zeros(field, net.slots().len() * k, net.messages().len() * k);
    let ident = MatrixGF::identity(field, k);
    for (i, slot) in net.slots().iter().enumerate() {
        match slot.target {
            SlotTarget::Sum => {
                for j in 0..net.messages().len() {
                    t.set_block(i * k, j * k, &ident);
                }
            }
            SlotTarget::Message(j) => t.set_block(i * k, j * k, &ident),
        }
    }
    t
}

/// True iff the code meets every demand. Codes that do not bind to `net`
/// are not solutions.
pub fn is_solution(net: &Network, code: &LinearCode) -> bool {
    match transfer_matrix(net, code) {
        Ok(t) => t.matrix == target_transfer(net, code.field, code.k),
        Err(_) => false,
    }
}

/// One element of a path through the cut-extended network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathStep {
    /// A source process, as a virtual edge into its source node.
    Message(String),
    Edge(String),
    /// A recovered process, as a virtual edge out of its terminal.
    Decode { terminal: String, slot: usize },
}

/// Product of the coefficients between consecutive path steps, later
/// coefficients on the left. A single step has the identity as its gain.
pub fn path_gain(net: &Network, code: &LinearCode, path: &[PathStep]) -> Result<MatrixGF, CodeError> {
    let first = path.first().ok_or(CodeError::EmptyPath)?;
    let dim = |s: &PathStep| if matches!(s, PathStep::Edge(_)) { code.n } else { code.k };
    let mut gain = MatrixGF::identity(code.field, dim(first));
    for (i, w) in path.windows(2).enumerate() {
        if i > 0 && matches!(w[0], PathStep::Message(_)) || matches!(w[1], PathStep::Message(_)) {
            return Err(CodeError::BadPath("a message can only start a path"));
        }
        if matches!(w[0], PathStep::Decode { .. }) {
            return Err(CodeError::BadPath("a decode slot can only end a path"));
        }
        let coeff = step_coefficient(net, code, &w[0], &w[1])?;
        gain = coeff.matmul(&gain)?;
    }
    Ok(gain)
}

fn step_coefficient(net: &Network, code: &LinearCode, a: &PathStep, b: &PathStep) -> Result<MatrixGF, CodeError> {
    let edge = |id: &str| net.edge_index(id).ok_or_else(|| CodeError::UnknownEdge(id.into()));
    match (a, b) {
        (PathStep::Message(m), PathStep::Edge(e)) => {
            let mi = net.message_index(m).ok_or_else(|| CodeError::UnknownMessage(m.clone()))?;
            if net.tail(edge(e)?) != net.messages()[mi].node {
                return Err(CodeError::NotAdjacent(alloc::format!("message {m} and edge {e}")));
            }
            Ok(code.source(m, e))
        }
        (PathStep::Edge(a), PathStep::Edge(b)) => {
            if net.head(edge(a)?) != net.tail(edge(b)?) {
                return Err(CodeError::NotAdjacent(alloc::format!("edges {a} and {b}")));
            }
            Ok(code.local(a, b))
        }
        (PathStep::Edge(e), PathStep::Decode { terminal, slot }) => {
            if net.node_id(net.head(edge(e)?)) != terminal {
                return Err(CodeError::NotAdjacent(alloc::format!("edge {e} and terminal {terminal}")));
            }
            let demand = net
                .terminals()
                .get(terminal)
                .ok_or_else(|| CodeError::UnknownTerminal(terminal.clone()))?;
            if *slot >= demand.slot_count() {
                return Err(CodeError::UnknownSlot { terminal: terminal.clone(), slot: *slot });
            }
            Ok(code.decode(terminal, *slot, e))
        }
        _ => Err(CodeError::BadPath("a message must be followed by an edge")),
    }
}

/// The same path in the reverse network, traversed backwards.
pub fn reverse_path(net: &Network, path: &[PathStep]) -> Result<Vec<PathStep>, CodeError> {
    let labels = transforms::reverse_labels(net)?;
    path.iter()
        .rev()
        .map(|step| match step {
            PathStep::Edge(e) => Ok(PathStep::Edge(e.clone())),
            PathStep::Message(m) => {
                let mi = net.message_index(m).ok_or_else(|| CodeError::UnknownMessage(m.clone()))?;
                let (terminal, slot) = labels.slot_for_message[mi].clone();
                Ok(PathStep::Decode { terminal, slot })
            }
            PathStep::Decode { terminal, slot } => {
                let i = net
                    .slots()
                    .iter()
                    .position(|s| net.node_id(s.terminal) == terminal && s.index == *slot)
                    .ok_or_else(|| CodeError::UnknownSlot { terminal: terminal.clone(), slot: *slot })?;
                Ok(PathStep::Message(labels.message_for_slot[i].clone()))
            }
        })
        .collect()
}

/// The canonical reverse code: every coefficient transposed and re-keyed
/// to the reversed adjacency. Source coefficients become decode
/// coefficients of the reverse network and vice versa.
pub fn canonical_reverse_code(net: &Network, code: &LinearCode) -> Result<LinearCode, CodeError> {
    code.check_binding(net)?;
    let labels = transforms::reverse_labels(net)?;
    let mut rev = LinearCode::new(code.field, code.k, code.n);
    for ((msg, e), m) in &code.source_coeff {
        let mi = net.message_index(msg).expect("binding checked");
        let (terminal, slot) = labels.slot_for_message[mi].clone();
        rev.decode_coeff.insert((terminal, slot, e.clone()), m.transpose());
    }
    for ((a, b), m) in &code.local_coeff {
        rev.local_coeff.insert((b.clone(), a.clone()), m.transpose());
    }
    for ((t, slot, e), m) in &code.decode_coeff {
        let i = net
            .slots()
            .iter()
            .position(|s| net.node_id(s.terminal) == t && s.index == *slot)
            .expect("binding checked");
        rev.source_coeff.insert((labels.message_for_slot[i].clone(), e.clone()), m.transpose());
    }
    Ok(rev)
}

/// A network code over the cyclic group Z_q given by explicit tables.
///
/// A table for an edge is indexed by the tuple of its inputs in mixed radix
/// `q`, first input most significant. Inputs are the messages of the tail
/// when it is a source, and In(tail) in edge-id order otherwise. Decode
/// tables are indexed by In(terminal).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonlinearCode {
    pub q: u32,
    pub edge_fn: BTreeMap<String, Vec<u32>>,
    pub decode_fn: BTreeMap<(String, usize), Vec<u32>>,
}

impl NonlinearCode {
    pub fn new(q: u32) -> Self {
        Self { q, edge_fn: BTreeMap::new(), decode_fn: BTreeMap::new() }
    }

    /// Checks that every edge and slot has a total table over Z_q.
    pub fn check_binding(&self, net: &Network) -> Result<(), CodeError> {
        if self.q < 2 {
            return Err(CodeError::BadAlphabet);
        }
        for id in self.edge_fn.keys() {
            net.edge_index(id).ok_or_else(|| CodeError::UnknownEdge(id.clone()))?;
        }
        for e in 0..net.edge_count() {
            let id = &net.edge(e).id;
            let table = self.edge_fn.get(id).ok_or_else(|| CodeError::MissingTable(id.clone()))?;
            self.check_table(id, table, edge_fan_in(net, e))?;
        }
        for slot in net.slots() {
            let t = net.node_id(slot.terminal);
            let what = alloc::format!("{t} slot {}", slot.index);
            let table = self
                .decode_fn
                .get(&(t.to_string(), slot.index))
                .ok_or_else(|| CodeError::MissingTable(what.clone()))?;
            self.check_table(&what, table, net.in_edges(slot.terminal).len())?;
        }
        Ok(())
    }

    fn check_table(&self, what: &str, table: &[u32], fan_in: usize) -> Result<(), CodeError> {
        let expected = table_len(self.q, fan_in).ok_or(CodeError::TableSize {
            what: what.into(),
            got: table.len(),
            expected: usize::MAX,
        })?;
        if table.len() != expected {
            return Err(CodeError::TableSize { what: what.into(), got: table.len(), expected });
        }
        if let Some(&symbol) = table.iter().find(|&&s| s >= self.q) {
            return Err(CodeError::TableSymbol { what: what.into(), symbol, q: self.q });
        }
        Ok(())
    }
}

/// Number of inputs an edge function reads.
pub fn edge_fan_in(net: &Network, e: usize) -> usize {
    let tail = net.tail(e);
    if net.is_source(tail) {
        net.messages_at(tail).len()
    } else {
        net.in_edges(tail).len()
    }
}

pub(crate) fn table_len(q: u32, fan_in: usize) -> Option<usize> {
    (q as usize).checked_pow(fan_in as u32)
}

#[inline]
pub(crate) fn table_index(q: u32, inputs: impl Iterator<Item = u32>) -> usize {
    inputs.fold(0usize, |acc, s| acc * q as usize + s as usize)
}

/// Evaluates a nonlinear code on one message assignment.
pub fn eval_nonlinear(
    net: &Network,
    code: &NonlinearCode,
    x: &BTreeMap<String, u32>,
) -> Result<BTreeMap<String, Vec<u32>>, CodeError> {
    code.check_binding(net)?;
    let msgs: Vec<u32> = net
        .messages()
        .iter()
        .map(|m| x.get(&m.id).copied().filter(|&s| s < code.q).ok_or_else(|| CodeError::BadInput(m.id.clone())))
        .collect::<Result<_, _>>()?;
    Ok(eval_nonlinear_indexed(net, code, &msgs))
}

fn eval_nonlinear_indexed(net: &Network, code: &NonlinearCode, msgs: &[u32]) -> BTreeMap<String, Vec<u32>> {
    let q = code.q;
    let mut y = vec![0u32; net.edge_count()];
    for &v in net.topo_indices() {
        let source_inputs: Vec<u32> = if net.is_source(v) {
            net.messages_at(v).into_iter().map(|mi| msgs[mi]).collect()
        } else {
            net.in_edges(v).iter().map(|&e| y[e]).collect()
        };
        for &e in net.out_edges(v) {
            let table = &code.edge_fn[&net.edge(e).id];
            y[e] = table[table_index(q, source_inputs.iter().copied())];
        }
    }
    let mut out: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for slot in net.slots() {
        let t = net.node_id(slot.terminal);
        let table = &code.decode_fn[&(t.to_string(), slot.index)];
        let idx = table_index(q, net.in_edges(slot.terminal).iter().map(|&e| y[e]));
        out.entry(t.to_string()).or_default().push(table[idx]);
    }
    out
}

/// Checks every message assignment (`q^|messages|` of them) against the demands.
pub fn verify_nonlinear(net: &Network, code: &NonlinearCode, budget: u64) -> Result<bool, CodeError> {
    code.check_binding(net)?;
    let q = code.q;
    let count = net.messages().len();
    let needed = (q as u128).checked_pow(count as u32).unwrap_or(u128::MAX);
    if needed > budget as u128 {
        return Err(CodeError::BudgetExceeded { needed, budget });
    }
    let mut msgs = vec![0u32; count];
    for _ in 0..needed {
        let out = eval_nonlinear_indexed(net, code, &msgs);
        let sum = msgs.iter().fold(0u32, |a, &b| (a + b) % q);
        for slot in net.slots() {
            let want = match slot.target {
                SlotTarget::Sum => sum,
                SlotTarget::Message(mi) => msgs[mi],
            };
            if out[net.node_id(slot.terminal)][slot.index] != want {
                return Ok(false);
            }
        }
        // next tuple, last message fastest
        for s in msgs.iter_mut().rev() {
            *s += 1;
            if *s < q {
                break;
            }
            *s = 0;
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::netmodel::{build_network, Demand, NetworkSpec};

    fn gf(p: u32) -> FieldSpec {
        FieldSpec::new(p).unwrap()
    }

    fn relay() -> Network {
        let mut spec = NetworkSpec::new("relay");
        spec.node("s").node("t").link("s", "t").source("s", &["x"]).terminal("t", Demand::Sum);
        build_network(spec).unwrap()
    }

    fn inputs(net: &Network, values: &[u32]) -> BTreeMap<String, Vec<u32>> {
        net.messages().iter().zip(values).map(|(m, &v)| (m.id.clone(), vec![v])).collect()
    }

    #[test]
    fn single_edge_identity_relay() {
        let net = relay();
        let code = LinearCode::all_identity(&net, gf(7), 1, 1);
        let out = eval_linear(&net, &code, &inputs(&net, &[5])).unwrap();
        assert_eq!(out["t"], vec![vec![5]]);
        let t = transfer_matrix(&net, &code).unwrap();
        assert!(t.block(0, 0).is_identity());
        assert!(is_solution(&net, &code));
    }

    #[test]
    fn s4_identity_code_over_gf2_and_gf3() {
        let net = families::s_m(4).unwrap();
        let code2 = LinearCode::all_identity(&net, gf(2), 1, 1);
        let out = eval_linear(&net, &code2, &inputs(&net, &[1, 0, 0, 1])).unwrap();
        for t in ["t_1", "t_2", "t_3", "t_4"] {
            assert_eq!(out[t], vec![vec![0]], "terminal {t}");
        }
        let t2 = transfer_matrix(&net, &code2).unwrap();
        assert!(t2.matrix.entries().iter().all(|&v| v == 1));
        assert!(is_solution(&net, &code2));

        let code3 = LinearCode::all_identity(&net, gf(3), 1, 1);
        let out = eval_linear(&net, &code3, &inputs(&net, &[1, 1, 1, 1])).unwrap();
        assert_eq!(out["t_4"], vec![vec![0]]);
        let t3 = transfer_matrix(&net, &code3).unwrap();
        let row = t3.rows.iter().position(|(t, _)| t == "t_4").unwrap();
        assert_eq!(t3.matrix.row(row), &[1, 1, 1, 0]);
        assert!(!is_solution(&net, &code3));
    }

    #[test]
    fn path_gain_orders_later_coefficients_left() {
        let mut spec = NetworkSpec::new("chain");
        spec.node("s").node("a").node("t").link("s", "a").link("a", "t");
        spec.source("s", &["x"]).terminal("t", Demand::Sum);
        let net = build_network(spec).unwrap();
        let f = gf(5);
        let mut code = LinearCode::new(f, 2, 2);
        let a = MatrixGF::from_rows(f, &[&[1, 2], &[0, 1]]).unwrap();
        let b = MatrixGF::from_rows(f, &[&[3, 0], &[1, 1]]).unwrap();
        code.set_source("x", "s->a", a.clone()).unwrap();
        code.set_local("s->a", "a->t", b.clone()).unwrap();
        let path = [PathStep::Message("x".into()), PathStep::Edge("s->a".into()), PathStep::Edge("a->t".into())];
        assert_eq!(path_gain(&net, &code, &path).unwrap(), b.matmul(&a).unwrap());
        assert_eq!(path_gain(&net, &code, &path[..2]).unwrap(), a);
        assert!(path_gain(&net, &code, &[PathStep::Edge("s->a".into())]).unwrap().is_identity());

        let broken = [PathStep::Edge("a->t".into()), PathStep::Edge("s->a".into())];
        assert!(matches!(path_gain(&net, &code, &broken), Err(CodeError::NotAdjacent(_))));
    }

    #[test]
    fn binding_rejects_non_adjacent_keys_and_bad_shapes() {
        let net = relay();
        let f = gf(3);
        let mut code = LinearCode::new(f, 1, 1);
        assert!(matches!(
            code.set_local("s->t", "s->t", MatrixGF::zeros(f, 2, 2)),
            Err(CodeError::Shape { .. })
        ));
        code.set_local("s->t", "s->t", MatrixGF::identity(f, 1)).unwrap();
        assert!(matches!(code.check_binding(&net), Err(CodeError::NotAdjacent(_))));
        assert!(!is_solution(&net, &code));
    }

    #[test]
    fn reverse_of_identity_code_is_identity() {
        let net = families::s_m(4).unwrap();
        let code = LinearCode::all_identity(&net, gf(2), 1, 1);
        let rev_net = transforms::reverse(&net).unwrap();
        let rev = canonical_reverse_code(&net, &code).unwrap();
        assert_eq!(rev, LinearCode::all_identity(&rev_net, gf(2), 1, 1));
        assert!(is_solution(&rev_net, &rev));
    }

    fn xor_code(net: &Network) -> NonlinearCode {
        // the group view of the all-identity linear code: every table sums its inputs
        let q = 2;
        let mut code = NonlinearCode::new(q);
        let sum_table = |fan_in: usize| -> Vec<u32> {
            (0..table_len(q, fan_in).unwrap()).map(|i| (i as u32).count_ones() % 2).collect()
        };
        for e in 0..net.edge_count() {
            code.edge_fn.insert(net.edge(e).id.clone(), sum_table(edge_fan_in(net, e)));
        }
        for s in net.slots() {
            let t = net.node_id(s.terminal).to_string();
            code.decode_fn.insert((t, s.index), sum_table(net.in_edges(s.terminal).len()));
        }
        code
    }

    #[test]
    fn xor_code_solves_s4_and_matches_linear_evaluation() {
        let net = families::s_m(4).unwrap();
        let code = xor_code(&net);
        assert_eq!(verify_nonlinear(&net, &code, 1 << 10), Ok(true));
        let linear = LinearCode::all_identity(&net, gf(2), 1, 1);
        for bits in 0u32..16 {
            let vals: Vec<u32> = (0..4).map(|i| (bits >> (3 - i)) & 1).collect();
            let x: BTreeMap<String, u32> = net.messages().iter().zip(&vals).map(|(m, &v)| (m.id.clone(), v)).collect();
            let nl = eval_nonlinear(&net, &code, &x).unwrap();
            let lin = eval_linear(&net, &linear, &inputs(&net, &vals)).unwrap();
            for (t, slots) in &nl {
                assert_eq!(slots[0], lin[t][0][0]);
            }
        }
    }

    #[test]
    fn nonlinear_relay_chain_and_budget() {
        let mut spec = NetworkSpec::new("chain");
        spec.node("s").node("a").node("t").link("s", "a").link("a", "t");
        spec.source("s", &["x"]).terminal("t", Demand::Sum);
        let net = build_network(spec).unwrap();
        let mut code = NonlinearCode::new(5);
        let id: Vec<u32> = (0..5).collect();
        code.edge_fn.insert("s->a".into(), id.clone());
        code.edge_fn.insert("a->t".into(), id.clone());
        code.decode_fn.insert(("t".into(), 0), id);
        let x = BTreeMap::from([("x".to_string(), 3u32)]);
        assert_eq!(eval_nonlinear(&net, &code, &x).unwrap()["t"], vec![3]);
        assert_eq!(verify_nonlinear(&net, &code, 5), Ok(true));
        assert!(matches!(verify_nonlinear(&net, &code, 4), Err(CodeError::BudgetExceeded { .. })));
    }

    #[test]
    fn single_edge_sum_relay_over_z3() {
        let net = relay();
        let mut code = NonlinearCode::new(3);
        code.edge_fn.insert("s->t".into(), vec![0, 1, 2]);
        code.decode_fn.insert(("t".into(), 0), vec![0, 1, 2]);
        assert_eq!(verify_nonlinear(&net, &code, 100), Ok(true));
        code.decode_fn.insert(("t".into(), 0), vec![0, 2, 1]);
        assert_eq!(verify_nonlinear(&net, &code, 100), Ok(false));
    }

    #[test]
    fn component_zero_code_fails() {
        let net = families::component();
        let mut code = NonlinearCode::new(2);
        for e in 0..net.edge_count() {
            code.edge_fn.insert(net.edge(e).id.clone(), vec![0; 1 << edge_fan_in(&net, e)]);
        }
        for s in net.slots() {
            let t = net.node_id(s.terminal).to_string();
            code.decode_fn.insert((t, s.index), vec![0; 1 << net.in_edges(s.terminal).len()]);
        }
        assert_eq!(verify_nonlinear(&net, &code, 64), Ok(false));
    }

    #[test]
    fn missing_tables_are_reported() {
        let net = relay();
        let code = NonlinearCode::new(2);
        assert_eq!(code.check_binding(&net), Err(CodeError::MissingTable("s->t".into())));
    }
}
