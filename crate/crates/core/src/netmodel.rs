//! Directed acyclic multigraphs with source messages and terminal demands.
//!
//! Ids are plain strings and every listing (nodes, edges, in/out lists,
//! messages, decode slots) is kept in lexicographic id order so that all
//! downstream algorithms are deterministic.

use alloc::collections::{BTreeMap, BinaryHeap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("the graph has a directed cycle through node {0}")]
    CycleDetected(String),
    #[error("edge {edge} references undeclared node {node}")]
    DanglingEndpoint { edge: String, node: String },
    #[error("source node {0} has an incoming edge")]
    SourceHasInEdge(String),
    #[error("message id {0} is generated more than once")]
    DuplicateMessageId(String),
    #[error("node id {0} is declared more than once")]
    DuplicateNode(String),
    #[error("edge id {0} is declared more than once")]
    DuplicateEdge(String),
    #[error("{role} {node} is not a declared node")]
    UnknownRoleNode { role: &'static str, node: String },
    #[error("terminal {terminal} demands unknown message {message}")]
    UnknownMessage { terminal: String, message: String },
    #[error("terminal {0} has an empty recover list")]
    EmptyDemand(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("min-cut endpoints must be distinct (got {0} twice)")]
    SameEndpoints(String),
}

/// What a terminal wants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Demand {
    /// The sum of every source message in the network.
    Sum,
    /// Each listed message separately, one decode slot per message.
    Recover(Vec<String>),
}

impl Demand {
    pub fn slot_count(&self) -> usize {
        match self {
            Demand::Sum => 1,
            Demand::Recover(msgs) => msgs.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub id: String,
    pub tail: String,
    pub head: String,
}

impl Edge {
    pub fn new(id: impl Into<String>, tail: impl Into<String>, head: impl Into<String>) -> Self {
        Self { id: id.into(), tail: tail.into(), head: head.into() }
    }
}

/// Unvalidated network description; [`build_network`] turns it into a [`Network`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetworkSpec {
    pub name: String,
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub sources: BTreeMap<String, Vec<String>>,
    pub terminals: BTreeMap<String, Demand>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    pub fn node(&mut self, id: impl Into<String>) -> &mut Self {
        self.nodes.push(id.into());
        self
    }

    /// Adds an edge with id `tail->head`.
    pub fn link(&mut self, tail: &str, head: &str) -> &mut Self {
        self.edges.push(Edge::new(edge_id(tail, head), tail, head));
        self
    }

    pub fn source(&mut self, node: &str, messages: &[&str]) -> &mut Self {
        self.sources.insert(node.into(), messages.iter().map(|&m| m.into()).collect());
        self
    }

    pub fn terminal(&mut self, node: &str, demand: Demand) -> &mut Self {
        self.terminals.insert(node.into(), demand);
        self
    }
}

/// Conventional id for a non-parallel edge.
pub fn edge_id(tail: &str, head: &str) -> String {
    let mut s = String::with_capacity(tail.len() + head.len() + 2);
    s.push_str(tail);
    s.push_str("->");
    s.push_str(head);
    s
}

/// A source message and where it enters the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub id: String,
    pub node: usize,
    /// Position in the generating node's message list.
    pub position: usize,
}

/// What a decode slot must output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotTarget {
    Sum,
    Message(usize),
}

/// One recovered process at a terminal (a virtual out-edge).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub terminal: usize,
    pub index: usize,
    pub target: SlotTarget,
}

/// A validated directed acyclic multigraph with sources and terminals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    name: String,
    nodes: Vec<String>,
    node_index: BTreeMap<String, usize>,
    edges: Vec<Edge>,
    edge_index: BTreeMap<String, usize>,
    tails: Vec<usize>,
    heads: Vec<usize>,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
    sources: BTreeMap<String, Vec<String>>,
    terminals: BTreeMap<String, Demand>,
    messages: Vec<Message>,
    message_index: BTreeMap<String, usize>,
    slots: Vec<Slot>,
    topo: Vec<usize>,
}

/// Validates a description and builds the network.
pub fn build_network(spec: NetworkSpec) -> Result<Network, NetError> {
    let NetworkSpec { name, nodes: raw_nodes, edges: mut raw_edges, sources, terminals } = spec;

    let mut nodes = raw_nodes;
    nodes.sort();
    if let Some(w) = nodes.windows(2).find(|w| w[0] == w[1]) {
        return Err(NetError::DuplicateNode(w[0].clone()));
    }
    let node_index: BTreeMap<String, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

    raw_edges.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = raw_edges.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(NetError::DuplicateEdge(w[0].id.clone()));
    }
    let mut tails = Vec::with_capacity(raw_edges.len());
    let mut heads = Vec::with_capacity(raw_edges.len());
    let mut in_edges = vec![Vec::new(); nodes.len()];
    let mut out_edges = vec![Vec::new(); nodes.len()];
    for (i, e) in raw_edges.iter().enumerate() {
        let lookup = |n: &String| {
            node_index
                .get(n)
                .copied()
                .ok_or_else(|| NetError::DanglingEndpoint { edge: e.id.clone(), node: n.clone() })
        };
        let (t, h) = (lookup(&e.tail)?, lookup(&e.head)?);
        tails.push(t);
        heads.push(h);
        out_edges[t].push(i);
        in_edges[h].push(i);
    }
    let edge_index = raw_edges.iter().enumerate().map(|(i, e)| (e.id.clone(), i)).collect();

    let mut messages = Vec::new();
    let mut message_index = BTreeMap::new();
    for (node, msgs) in &sources {
        let &ni = node_index
            .get(node)
            .ok_or_else(|| NetError::UnknownRoleNode { role: "source", node: node.clone() })?;
        if !in_edges[ni].is_empty() {
            return Err(NetError::SourceHasInEdge(node.clone()));
        }
        for (position, m) in msgs.iter().enumerate() {
            if message_index.insert(m.clone(), messages.len()).is_some() {
                return Err(NetError::DuplicateMessageId(m.clone()));
            }
            messages.push(Message { id: m.clone(), node: ni, position });
        }
    }
    // sources iterate in node-id order, so `messages` is sorted by (node, position)

    let mut slots = Vec::new();
    for (node, demand) in &terminals {
        let &ti = node_index
            .get(node)
            .ok_or_else(|| NetError::UnknownRoleNode { role: "terminal", node: node.clone() })?;
        match demand {
            Demand::Sum => slots.push(Slot { terminal: ti, index: 0, target: SlotTarget::Sum }),
            Demand::Recover(msgs) => {
                if msgs.is_empty() {
                    return Err(NetError::EmptyDemand(node.clone()));
                }
                for (index, m) in msgs.iter().enumerate() {
                    let &mi = message_index.get(m).ok_or_else(|| NetError::UnknownMessage {
                        terminal: node.clone(),
                        message: m.clone(),
                    })?;
                    slots.push(Slot { terminal: ti, index, target: SlotTarget::Message(mi) });
                }
            }
        }
    }

    let topo = kahn(&nodes, &heads, &in_edges, &out_edges)?;

    Ok(Network {
        name,
        nodes,
        node_index,
        edges: raw_edges,
        edge_index,
        tails,
        heads,
        in_edges,
        out_edges,
        sources,
        terminals,
        messages,
        message_index,
        slots,
        topo,
    })
}

/// Kahn's algorithm with a min-heap so ties break by node id.
fn kahn(
    nodes: &[String],
    heads: &[usize],
    in_edges: &[Vec<usize>],
    out_edges: &[Vec<usize>],
) -> Result<Vec<usize>, NetError> {
    let mut indeg: Vec<usize> = in_edges.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..nodes.len()).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &e in &out_edges[v] {
            let h = heads[e];
            indeg[h] -= 1;
            if indeg[h] == 0 {
                ready.push(Reverse(h));
            }
        }
    }
    if order.len() < nodes.len() {
        let stuck = (0..nodes.len()).find(|&v| indeg[v] > 0).expect("some node is on a cycle");
        return Err(NetError::CycleDetected(nodes[stuck].clone()));
    }
    Ok(order)
}

impl Network {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_id(&self, index: usize) -> &str {
        &self.nodes[index]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, index: usize) -> &Edge {
        &self.edges[index]
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edge_index.get(id).copied()
    }

    pub fn tail(&self, edge: usize) -> usize {
        self.tails[edge]
    }

    pub fn head(&self, edge: usize) -> usize {
        self.heads[edge]
    }

    /// In(v), sorted by edge id.
    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }

    /// Out(v), sorted by edge id.
    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    pub fn sources(&self) -> &BTreeMap<String, Vec<String>> {
        &self.sources
    }

    pub fn terminals(&self) -> &BTreeMap<String, Demand> {
        &self.terminals
    }

    pub fn is_source(&self, node: usize) -> bool {
        self.sources.contains_key(&self.nodes[node])
    }

    pub fn is_terminal(&self, node: usize) -> bool {
        self.terminals.contains_key(&self.nodes[node])
    }

    /// Messages in (source node id, position) order; this is the column order
    /// of every transfer matrix.
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn message_index(&self, id: &str) -> Option<usize> {
        self.message_index.get(id).copied()
    }

    /// Indices of messages generated at `node`, in list order.
    pub fn messages_at(&self, node: usize) -> Vec<usize> {
        self.sources
            .get(&self.nodes[node])
            .map(|ms| ms.iter().map(|m| self.message_index[m]).collect())
            .unwrap_or_default()
    }

    /// Decode slots in (terminal id, slot index) order; the row order of
    /// every transfer matrix.
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Node indices in topological order, ties broken by id.
    pub fn topo_indices(&self) -> &[usize] {
        &self.topo
    }

    /// True when every terminal demands the sum.
    pub fn is_sum_network(&self) -> bool {
        !self.terminals.is_empty() && self.terminals.values().all(|d| *d == Demand::Sum)
    }

    /// Back to an editable description.
    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            name: self.name.clone(),
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            sources: self.sources.clone(),
            terminals: self.terminals.clone(),
        }
    }

    /// Nodes reachable from `from` by directed paths (including itself).
    pub fn reachable_from(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &e in &self.out_edges[v] {
                let h = self.heads[e];
                if !seen[h] {
                    seen[h] = true;
                    stack.push(h);
                }
            }
        }
        seen
    }

    /// Edges with a directed path to some terminal (the edge itself counts
    /// when its head is a terminal).
    pub fn edges_reaching_terminals(&self) -> Vec<bool> {
        let mut useful_node = vec![false; self.nodes.len()];
        for &v in self.topo.iter().rev() {
            useful_node[v] = self.is_terminal(v)
                || self.out_edges[v].iter().any(|&e| useful_node[self.heads[e]]);
        }
        (0..self.edges.len()).map(|e| useful_node[self.heads[e]]).collect()
    }
}

/// Node ids in topological order (stable tie-break by id).
pub fn topo_order(net: &Network) -> Vec<String> {
    net.topo.iter().map(|&v| net.nodes[v].clone()).collect()
}

/// Unit-capacity max-flow from `s` to `t` (Edmonds–Karp, parallel edges
/// count separately).
pub fn min_cut(net: &Network, s: &str, t: &str) -> Result<u32, NetError> {
    let si = net.node_index(s).ok_or_else(|| NetError::UnknownNode(s.into()))?;
    let ti = net.node_index(t).ok_or_else(|| NetError::UnknownNode(t.into()))?;
    if si == ti {
        return Err(NetError::SameEndpoints(s.into()));
    }
    Ok(unit_max_flow(net, si, ti))
}

fn unit_max_flow(net: &Network, s: usize, t: usize) -> u32 {
    let m = net.edge_count();
    let mut flow = vec![false; m];
    let mut total = 0;
    loop {
        // BFS in the residual graph: forward along unused edges, backward along used ones.
        let mut pred: Vec<Option<(usize, bool)>> = vec![None; net.node_count()];
        let mut seen = vec![false; net.node_count()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            if v == t {
                break;
            }
            for &e in net.out_edges(v) {
                let h = net.head(e);
                if !flow[e] && !seen[h] {
                    seen[h] = true;
                    pred[h] = Some((e, true));
                    queue.push_back(h);
                }
            }
            for &e in net.in_edges(v) {
                let tl = net.tail(e);
                if flow[e] && !seen[tl] {
                    seen[tl] = true;
                    pred[tl] = Some((e, false));
                    queue.push_back(tl);
                }
            }
        }
        if !seen[t] {
            return total;
        }
        let mut v = t;
        while v != s {
            let (e, forward) = pred[v].expect("path back to the source");
            flow[e] = forward;
            v = if forward { net.tail(e) } else { net.head(e) };
        }
        total += 1;
    }
}

/// Smallest unit-capacity min-cut over all (source node, terminal) pairs.
/// `None` if the network has no source or no terminal.
pub fn min_source_terminal_cut(net: &Network) -> Option<u32> {
    let mut best: Option<u32> = None;
    for s in net.sources.keys() {
        for t in net.terminals.keys() {
            let si = net.node_index[s];
            let ti = net.node_index[t];
            // a node that is both cannot be cut from itself
            let c = if si == ti { u32::MAX } else { unit_max_flow(net, si, ti) };
            best = Some(best.map_or(c, |b| b.min(c)));
        }
    }
    best
}

/// Source-node × terminal reachability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connectivity {
    pub sources: Vec<String>,
    pub terminals: Vec<String>,
    /// `reach[i][j]`: a directed path exists from `sources[i]` to `terminals[j]`.
    pub reach: Vec<Vec<bool>>,
}

impl Connectivity {
    pub fn all_connected(&self) -> bool {
        self.reach.iter().all(|row| row.iter().all(|&b| b))
    }
}

pub fn connectivity(net: &Network) -> Connectivity {
    let sources: Vec<String> = net.sources.keys().cloned().collect();
    let terminals: Vec<String> = net.terminals.keys().cloned().collect();
    let reach = sources
        .iter()
        .map(|s| {
            let seen = net.reachable_from(net.node_index[s]);
            terminals.iter().map(|t| seen[net.node_index[t]]).collect()
        })
        .collect();
    Connectivity { sources, terminals, reach }
}
