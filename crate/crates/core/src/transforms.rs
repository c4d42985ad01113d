//! Graph constructions relating sum-networks, multiple-unicast and Type I
//! networks, plus network reversal and source scaling of linear codes.
//!
//! Constructions keep the original ids and add nodes with role-derived names
//! (`s_1`, `u_3`, `t_L2`, ...). The `_traced` variants also return a
//! [`TransformTrace`] naming the construction role of every added node and edge.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::codes::LinearCode;
use crate::gflin::{GfError, MatrixGF};
use crate::netmodel::{build_network, edge_id, Demand, Edge, NetError, Network, NetworkSpec, SlotTarget};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Gf(#[from] GfError),
    #[error("not a multiple-unicast network: {0}")]
    NotMultipleUnicast(String),
    #[error("not a Type I network: {0}")]
    NotTypeI(String),
    #[error("not a sum-network: {0}")]
    NotSumNetwork(String),
    #[error("the reverse network has no representable demands: {0}")]
    NotReversible(String),
    #[error("construction id {0} already exists in the input")]
    IdCollision(String),
    #[error("scaling matrix for {0} is singular")]
    Singular(String),
    #[error("scaling matrix for {0} is not k×k over the code field")]
    BadScaling(String),
}

/// Construction roles of the ids a transform added.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransformTrace {
    pub op: String,
    pub nodes: BTreeMap<String, String>,
    pub edges: BTreeMap<String, String>,
}

impl TransformTrace {
    /// The added node playing `role`, if any.
    pub fn node_with_role(&self, role: &str) -> Option<&str> {
        self.nodes.iter().find(|(_, r)| *r == role).map(|(id, _)| id.as_str())
    }

    /// The added edge playing `role`, if any.
    pub fn edge_with_role(&self, role: &str) -> Option<&str> {
        self.edges.iter().find(|(_, r)| *r == role).map(|(id, _)| id.as_str())
    }
}

/// Accumulates added ids on top of an existing network description.
struct Builder {
    spec: NetworkSpec,
    taken: BTreeSet<String>,
    trace: TransformTrace,
}

impl Builder {
    fn new(base: NetworkSpec, name: String, op: &str) -> Self {
        let mut taken: BTreeSet<String> = base.nodes.iter().cloned().collect();
        taken.extend(base.edges.iter().map(|e| e.id.clone()));
        let spec = NetworkSpec { name, ..base };
        Self { spec, taken, trace: TransformTrace { op: op.into(), ..TransformTrace::default() } }
    }

    fn node(&mut self, id: &str, role: impl Into<String>) -> Result<(), TransformError> {
        if !self.taken.insert(id.into()) {
            return Err(TransformError::IdCollision(id.into()));
        }
        self.spec.nodes.push(id.into());
        self.trace.nodes.insert(id.into(), role.into());
        Ok(())
    }

    fn edge(&mut self, tail: &str, head: &str, role: impl Into<String>) -> Result<(), TransformError> {
        let id = edge_id(tail, head);
        if !self.taken.insert(id.clone()) {
            return Err(TransformError::IdCollision(id));
        }
        self.trace.edges.insert(id.clone(), role.into());
        self.spec.edges.push(Edge::new(id, tail, head));
        Ok(())
    }

    /// A new source node generating a message named after itself.
    fn source(&mut self, id: &str, role: impl Into<String>) -> Result<(), TransformError> {
        self.node(id, role)?;
        self.spec.sources.insert(id.into(), alloc::vec![id.into()]);
        Ok(())
    }

    fn finish(self) -> Result<(Network, TransformTrace), TransformError> {
        Ok((build_network(self.spec)?, self.trace))
    }
}

const REVERSE_PREFIX: &str = "reverse(";

fn reversed_name(name: &str) -> String {
    match name.strip_prefix(REVERSE_PREFIX).and_then(|s| s.strip_suffix(')')) {
        Some(inner) => inner.to_string(),
        None => format!("{REVERSE_PREFIX}{name})"),
    }
}

/// How the cut labels of a network map onto its reverse.
pub(crate) struct ReverseLabels {
    /// Indexed like `net.slots()`: the message of the reverse network standing
    /// for that decode slot.
    pub message_for_slot: Vec<String>,
    /// Indexed like `net.messages()`: `(terminal, slot)` of the reverse network.
    pub slot_for_message: Vec<(String, usize)>,
    demands: BTreeMap<String, Demand>,
    sources: BTreeMap<String, Vec<String>>,
}

pub(crate) fn reverse_labels(net: &Network) -> Result<ReverseLabels, TransformError> {
    for t in net.terminals().keys() {
        let v = net.node_index(t).expect("validated");
        if !net.out_edges(v).is_empty() {
            return Err(TransformError::NotReversible(format!("terminal {t} has outgoing edges")));
        }
        if net.is_source(v) {
            return Err(TransformError::NotReversible(format!("{t} is both a source and a terminal")));
        }
    }
    // Old decode slots become messages at the old terminal.
    let mut message_for_slot = Vec::with_capacity(net.slots().len());
    let mut sources: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for slot in net.slots() {
        let t = net.node_id(slot.terminal);
        let id = match slot.target {
            SlotTarget::Sum => t.to_string(),
            SlotTarget::Message(mi) => net.messages()[mi].id.clone(),
        };
        if !seen.insert(id.clone()) {
            return Err(TransformError::NotReversible(format!("message {id} is demanded more than once")));
        }
        sources.entry(t.to_string()).or_default().push(id.clone());
        message_for_slot.push(id);
    }
    // Old messages become decode slots at their source; the slot wants the
    // new messages of every old slot that wanted it.
    let mut slot_for_message = Vec::with_capacity(net.messages().len());
    let mut demands: BTreeMap<String, Demand> = BTreeMap::new();
    for (mi, m) in net.messages().iter().enumerate() {
        let wanted: Vec<usize> = net
            .slots()
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s.target, SlotTarget::Sum) || s.target == SlotTarget::Message(mi))
            .map(|(i, _)| i)
            .collect();
        let node = net.node_id(m.node).to_string();
        let single_recover = wanted.len() == 1 && net.slots()[wanted[0]].target == SlotTarget::Message(mi);
        if single_recover {
            match demands.entry(node.clone()).or_insert_with(|| Demand::Recover(Vec::new())) {
                Demand::Recover(list) => {
                    list.push(message_for_slot[wanted[0]].clone());
                    slot_for_message.push((node, list.len() - 1));
                }
                Demand::Sum => {
                    return Err(TransformError::NotReversible(format!("source {node} mixes sum and recover demands")))
                }
            }
        } else if wanted.len() == net.slots().len() {
            if net.messages_at(m.node).len() != 1 {
                return Err(TransformError::NotReversible(format!(
                    "source {node} would need a sum demand for each of several messages"
                )));
            }
            demands.insert(node.clone(), Demand::Sum);
            slot_for_message.push((node, 0));
        } else {
            return Err(TransformError::NotReversible(format!(
                "message {} is wanted by {} of {} decode slots",
                m.id,
                wanted.len(),
                net.slots().len()
            )));
        }
    }
    Ok(ReverseLabels { message_for_slot, slot_for_message, demands, sources })
}

/// The network with every edge reversed (ids kept). Old terminals generate
/// one message per decode slot and old sources demand the transposed
/// targets, so the transfer matrix of the canonical reverse code is the
/// transpose of the original one.
///
/// A recover slot's message keeps the demanded message's id; a sum slot's
/// message is named after its terminal. Fails when a transposed demand is
/// not a sum or a single message.
pub fn reverse(net: &Network) -> Result<Network, TransformError> {
    let labels = reverse_labels(net)?;
    let spec = NetworkSpec {
        name: reversed_name(net.name()),
        nodes: net.nodes().to_vec(),
        edges: net.edges().iter().map(|e| Edge::new(e.id.clone(), e.head.clone(), e.tail.clone())).collect(),
        sources: labels.sources,
        terminals: labels.demands,
    };
    Ok(build_network(spec)?)
}

/// Source/terminal pairs of a multiple-unicast network, ordered by source id.
fn unicast_pairs(net: &Network) -> Result<Vec<(String, String)>, TransformError> {
    let bad = |why: String| TransformError::NotMultipleUnicast(why);
    let mut demanded_by: BTreeMap<&str, &str> = BTreeMap::new();
    for (t, d) in net.terminals() {
        match d {
            Demand::Recover(list) if list.len() == 1 => {
                if demanded_by.insert(list[0].as_str(), t.as_str()).is_some() {
                    return Err(bad(format!("message {} is demanded twice", list[0])));
                }
            }
            _ => return Err(bad(format!("terminal {t} must demand exactly one message"))),
        }
    }
    let mut pairs = Vec::new();
    for (s, msgs) in net.sources() {
        if msgs.len() != 1 {
            return Err(bad(format!("source {s} must generate exactly one message")));
        }
        let t = demanded_by.remove(msgs[0].as_str()).ok_or_else(|| bad(format!("message {} is never demanded", msgs[0])))?;
        pairs.push((s.clone(), t.to_string()));
    }
    if pairs.is_empty() {
        return Err(bad("no source-terminal pairs".into()));
    }
    Ok(pairs)
}

/// Multiple-unicast to sum-network construction.
pub fn c1(mun: &Network) -> Result<Network, TransformError> {
    c1_traced(mun).map(|(n, _)| n)
}

pub fn c1_traced(mun: &Network) -> Result<(Network, TransformTrace), TransformError> {
    let pairs = unicast_pairs(mun)?;
    let m = pairs.len();
    let mut base = mun.to_spec();
    base.sources.clear();
    base.terminals.clear();
    let mut b = Builder::new(base, format!("c1({})", mun.name()), "c1");
    let s = |i: usize| format!("s_{i}");
    let u = |i: usize| format!("u_{i}");
    let v = |i: usize| format!("v_{i}");
    let tl = |i: usize| format!("t_L{i}");
    let tr = |i: usize| format!("t_R{i}");
    for i in 1..=m + 1 {
        b.source(&s(i), format!("source s_{i}"))?;
    }
    for i in 1..=m {
        b.node(&u(i), format!("u_{i}"))?;
        b.node(&v(i), format!("v_{i}"))?;
        b.node(&tl(i), format!("left terminal t_L{i}"))?;
        b.node(&tr(i), format!("right terminal t_R{i}"))?;
    }
    for (i, (w, z)) in pairs.iter().enumerate().map(|(i, p)| (i + 1, p)) {
        b.edge(&s(i), w, format!("(s_{i},w_{i})"))?;
        for j in (1..=m).filter(|&j| j != i) {
            b.edge(&s(i), &u(j), format!("(s_{i},u_{j})"))?;
        }
        b.edge(&s(m + 1), &u(i), format!("(s_{},u_{i})", m + 1))?;
        b.edge(&s(i), &tr(i), format!("(s_{i},t_R{i})"))?;
        b.edge(&u(i), &v(i), format!("(u_{i},v_{i})"))?;
        b.edge(&v(i), &tl(i), format!("(v_{i},t_L{i})"))?;
        b.edge(&v(i), &tr(i), format!("(v_{i},t_R{i})"))?;
        b.edge(z, &tl(i), format!("(z_{i},t_L{i})"))?;
        b.trace.nodes.insert(w.clone(), format!("w_{i}"));
        b.trace.nodes.insert(z.clone(), format!("z_{i}"));
    }
    for i in 1..=m {
        b.spec.terminals.insert(tl(i), Demand::Sum);
        b.spec.terminals.insert(tr(i), Demand::Sum);
    }
    b.finish()
}

/// Gives every message its own source and every demanded message its own
/// terminal.
pub fn to_type_ia(net: &Network) -> Result<Network, TransformError> {
    to_type_ia_traced(net).map(|(n, _)| n)
}

pub fn to_type_ia_traced(net: &Network) -> Result<(Network, TransformTrace), TransformError> {
    let mut base = net.to_spec();
    base.sources.clear();
    base.terminals.clear();
    let mut b = Builder::new(base, format!("type_ia({})", net.name()), "to_type_ia");
    for m in net.messages() {
        let src = format!("src_{}", m.id);
        b.node(&src, format!("source of {}", m.id))?;
        b.spec.sources.insert(src.clone(), alloc::vec![m.id.clone()]);
        b.edge(&src, net.node_id(m.node), format!("feed {}", m.id))?;
    }
    for (t, d) in net.terminals() {
        let Demand::Recover(list) = d else {
            return Err(TransformError::NotTypeI(format!("terminal {t} demands a sum")));
        };
        for x in list {
            let dst = format!("dst_{t}_{x}");
            b.node(&dst, format!("terminal for {x} at {t}"))?;
            b.edge(t, &dst, format!("deliver {x} from {t}"))?;
            b.spec.terminals.insert(dst, Demand::Recover(alloc::vec![x.clone()]));
        }
    }
    b.finish()
}

/// Type I to sum-network construction (through [`to_type_ia`]).
pub fn c2(net: &Network) -> Result<Network, TransformError> {
    c2_traced(net).map(|(n, _)| n)
}

pub fn c2_traced(net: &Network) -> Result<(Network, TransformTrace), TransformError> {
    let (ia, ia_trace) = to_type_ia_traced(net)?;
    // w_i: one per message, in message order; z^i_j: terminals demanding it.
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for m in ia.messages() {
        let w = ia.node_id(m.node).to_string();
        let zs = ia
            .terminals()
            .iter()
            .filter(|(_, d)| matches!(d, Demand::Recover(l) if l.contains(&m.id)))
            .map(|(t, _)| t.clone())
            .collect();
        groups.push((w, zs));
    }
    let m = groups.len();
    if m == 0 {
        return Err(TransformError::NotTypeI("no messages".into()));
    }
    let mut base = ia.to_spec();
    base.sources.clear();
    base.terminals.clear();
    let mut b = Builder::new(base, format!("c2({})", net.name()), "c2");
    b.trace.nodes = ia_trace.nodes;
    b.trace.edges = ia_trace.edges;
    let s = |i: usize| format!("s_{i}");
    let u = |i: usize| format!("u_{i}");
    let v = |i: usize| format!("v_{i}");
    let t = |i: usize| format!("t_{i}");
    for i in 1..=m + 1 {
        b.source(&s(i), format!("source s_{i}"))?;
    }
    for i in 1..=m {
        b.node(&u(i), format!("u_{i}"))?;
        b.node(&v(i), format!("v_{i}"))?;
        b.node(&t(i), format!("right terminal t_{i}"))?;
        b.spec.terminals.insert(t(i), Demand::Sum);
    }
    for (i, (w, zs)) in groups.iter().enumerate().map(|(i, g)| (i + 1, g)) {
        b.edge(&s(i), w, format!("(s_{i},w_{i})"))?;
        for j in (1..=m).filter(|&j| j != i) {
            b.edge(&s(i), &u(j), format!("(s_{i},u_{j})"))?;
        }
        b.edge(&s(m + 1), &u(i), format!("(s_{},u_{i})", m + 1))?;
        b.edge(&s(i), &t(i), format!("(s_{i},t_{i})"))?;
        b.edge(&u(i), &v(i), format!("(u_{i},v_{i})"))?;
        b.edge(&v(i), &t(i), format!("(v_{i},t_{i})"))?;
        b.trace.nodes.insert(w.clone(), format!("w_{i}"));
        for (j, z) in zs.iter().enumerate().map(|(j, z)| (j + 1, z)) {
            let left = format!("t^{i}_{j}");
            b.node(&left, format!("left terminal t^{i}_{j}"))?;
            b.edge(z, &left, format!("(z^{i}_{j},t^{i}_{j})"))?;
            b.edge(&v(i), &left, format!("(v_{i},t^{i}_{j})"))?;
            b.trace.nodes.insert(z.clone(), format!("z^{i}_{j}"));
            b.spec.terminals.insert(left, Demand::Sum);
        }
    }
    b.finish()
}

/// Sum-network to multiple-unicast construction.
///
/// Upper half: new sources `s_i` feed the old sources `w_i` and the hubs
/// `u_j` (`j ≠ i`); `u_i → v_i`; each old terminal `z_j` feeds `vp_j`; the
/// relay `r_j_i` reads `vp_j` and `v_i` and so can form `X_i`.
///
/// Lower half, chain `i`: a line `L_1 = r_1_i, L_2, …, L_n = t_i` where copy
/// `j ≥ 2` of the component gadget has its `S_1` role at `L_{j-1}`, its `S_2`
/// role at `r_j_i`, its `S_3` role at the new source `s_i_j`, internal nodes
/// `a_i_j`, `b_i_j`, its `t_2` role at terminal `t_i_j` (demanding `s_i_j`)
/// and its `t_1` role at `L_j`. Terminal `t_i` demands `s_i`'s message.
pub fn c3(sumnet: &Network) -> Result<Network, TransformError> {
    c3_traced(sumnet).map(|(n, _)| n)
}

pub fn c3_traced(sumnet: &Network) -> Result<(Network, TransformTrace), TransformError> {
    if !sumnet.is_sum_network() {
        return Err(TransformError::NotSumNetwork("every terminal must demand the sum".into()));
    }
    let ws: Vec<String> = sumnet.sources().keys().cloned().collect();
    for (w, msgs) in sumnet.sources() {
        if msgs.len() != 1 {
            return Err(TransformError::NotSumNetwork(format!("source {w} must generate exactly one message")));
        }
    }
    let zs: Vec<String> = sumnet.terminals().keys().cloned().collect();
    let (m, n) = (ws.len(), zs.len());
    if m == 0 {
        return Err(TransformError::NotSumNetwork("no sources".into()));
    }
    let mut base = sumnet.to_spec();
    base.sources.clear();
    base.terminals.clear();
    let mut b = Builder::new(base, format!("c3({})", sumnet.name()), "c3");
    let s = |i: usize| format!("s_{i}");
    let r = |j: usize, i: usize| format!("r_{j}_{i}");
    for i in 1..=m {
        b.source(&s(i), format!("source s_{i}"))?;
        b.node(&format!("u_{i}"), format!("u_{i}"))?;
        b.node(&format!("v_{i}"), format!("v_{i}"))?;
        b.trace.nodes.insert(ws[i - 1].clone(), format!("w_{i}"));
    }
    for j in 1..=n {
        b.node(&format!("vp_{j}"), format!("v'_{j}"))?;
        b.trace.nodes.insert(zs[j - 1].clone(), format!("z_{j}"));
        for i in 1..=m {
            b.node(&r(j, i), format!("r_{j}_{i}"))?;
        }
    }
    for i in 1..=m {
        b.edge(&s(i), &ws[i - 1], format!("(s_{i},w_{i})"))?;
        for j in (1..=m).filter(|&j| j != i) {
            b.edge(&s(i), &format!("u_{j}"), format!("(s_{i},u_{j})"))?;
        }
        b.edge(&format!("u_{i}"), &format!("v_{i}"), format!("(u_{i},v_{i})"))?;
    }
    for j in 1..=n {
        b.edge(&zs[j - 1], &format!("vp_{j}"), format!("(z_{j},v'_{j})"))?;
        for i in 1..=m {
            b.edge(&format!("vp_{j}"), &r(j, i), format!("(v'_{j},r_{j}_{i})"))?;
            b.edge(&format!("v_{i}"), &r(j, i), format!("(v_{i},r_{j}_{i})"))?;
        }
    }
    for i in 1..=m {
        let ti = format!("t_{i}");
        let line = |j: usize| if j == 1 { r(1, i) } else if j == n { ti.clone() } else { format!("l_{i}_{j}") };
        if n == 1 {
            b.node(&ti, format!("terminal t_{i}"))?;
            b.edge(&r(1, i), &ti, format!("chain {i}: (r_1_{i},t_{i})"))?;
        }
        for j in 2..=n {
            let role = |what: &str| format!("chain {i}, copy {j}: {what}");
            let (prev, next) = (line(j - 1), line(j));
            let (sij, aij, bij, tij) =
                (format!("s_{i}_{j}"), format!("a_{i}_{j}"), format!("b_{i}_{j}"), format!("t_{i}_{j}"));
            if j == n {
                b.node(&next, format!("terminal t_{i}"))?;
            } else {
                b.node(&next, role("t_1 (line)"))?;
            }
            b.source(&sij, role("S_3"))?;
            b.node(&aij, role("a"))?;
            b.node(&bij, role("b"))?;
            b.node(&tij, role("t_2"))?;
            b.edge(&prev, &aij, role("(S_1,a)"))?;
            b.edge(&sij, &aij, role("(S_3,a)"))?;
            b.edge(&aij, &bij, role("(a,b)"))?;
            b.edge(&bij, &next, role("(b,t_1)"))?;
            b.edge(&bij, &tij, role("(b,t_2)"))?;
            b.edge(&sij, &next, role("(S_3,t_1)"))?;
            b.edge(&r(j, i), &tij, role("(S_2,t_2)"))?;
            b.spec.terminals.insert(tij, Demand::Recover(alloc::vec![sij]));
        }
        b.spec.terminals.insert(ti, Demand::Recover(alloc::vec![s(i)]));
    }
    b.finish()
}

/// Right-multiplies every source coefficient of message `x` by `a[x]`
/// (messages absent from `a` are left alone). A code delivering the sum
/// then delivers `Σ a_x X_x` and vice versa.
pub fn scale_sources(code: &LinearCode, a: &BTreeMap<String, MatrixGF>) -> Result<LinearCode, TransformError> {
    let mut out = LinearCode::new(code.field(), code.k(), code.n());
    for (msg, m) in a {
        if m.field() != code.field() || m.shape() != (code.k(), code.k()) {
            return Err(TransformError::BadScaling(msg.clone()));
        }
        if m.rank() != code.k() {
            return Err(TransformError::Singular(msg.clone()));
        }
    }
    for ((msg, e), alpha) in code.source_coeffs() {
        let scaled = match a.get(msg) {
            Some(s) => alpha.matmul(s)?,
            None => alpha.clone(),
        };
        out.set_source(msg, e, scaled).expect("shape preserved");
    }
    for ((x, y), beta) in code.local_coeffs() {
        out.set_local(x, y, beta.clone()).expect("shape preserved");
    }
    for ((t, slot, e), gamma) in code.decode_coeffs() {
        out.set_decode(t, *slot, e, gamma.clone()).expect("shape preserved");
    }
    Ok(out)
}

/// Scaling by the inverses of `a`, undoing [`scale_sources`].
pub fn unscale_sources(code: &LinearCode, a: &BTreeMap<String, MatrixGF>) -> Result<LinearCode, TransformError> {
    let mut inv = BTreeMap::new();
    for (msg, m) in a {
        if m.field() != code.field() || m.shape() != (code.k(), code.k()) {
            return Err(TransformError::BadScaling(msg.clone()));
        }
        let i = m.inverse()?.ok_or_else(|| TransformError::Singular(msg.clone()))?;
        inv.insert(msg.clone(), i);
    }
    scale_sources(code, &inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{eval_linear, is_solution};
    use crate::families;
    use crate::gflin::FieldSpec;
    use crate::netmodel::{connectivity, min_cut};

    fn unicast(m: usize) -> Network {
        let mut spec = NetworkSpec::new(format!("unicast{m}"));
        for i in 1..=m {
            let (w, z) = (format!("w_{i}"), format!("z_{i}"));
            spec.node(w.as_str()).node(z.as_str()).link(&w, &z);
            spec.source(&w, &[&format!("x_{i}")]);
            spec.terminal(&z, Demand::Recover(alloc::vec![format!("x_{i}")]));
        }
        build_network(spec).unwrap()
    }

    #[test]
    fn reverse_single_edge_swaps_roles() {
        let net = unicast(1);
        let rev = reverse(&net).unwrap();
        assert_eq!(rev.name(), "reverse(unicast1)");
        assert_eq!(rev.edge_count(), 1);
        assert_eq!(rev.edges()[0].tail, "z_1");
        assert_eq!(rev.edges()[0].head, "w_1");
        assert_eq!(rev.sources()["z_1"], alloc::vec![String::from("x_1")]);
        assert_eq!(rev.terminals()["w_1"], Demand::Recover(alloc::vec!["x_1".into()]));
        assert_eq!(reverse(&rev).unwrap(), net);
    }

    #[test]
    fn reverse_is_an_involution_on_families() {
        for net in [families::s_m(4).unwrap(), families::s_m_star(5).unwrap(), families::component()] {
            assert_eq!(reverse(&reverse(&net).unwrap()).unwrap(), net, "{}", net.name());
        }
        let c = c1(&unicast(2)).unwrap();
        assert_eq!(reverse(&reverse(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn reverse_of_c1_output_swaps_sources_and_terminals() {
        let c = c1(&families::bottleneck_mun(2).unwrap()).unwrap();
        let rev = reverse(&c).unwrap();
        let sources: Vec<&str> = rev.sources().keys().map(String::as_str).collect();
        assert_eq!(sources, ["t_L1", "t_L2", "t_R1", "t_R2"]);
        let terminals: Vec<&str> = rev.terminals().keys().map(String::as_str).collect();
        assert_eq!(terminals, ["s_1", "s_2", "s_3"]);
        assert!(rev.is_sum_network());
    }

    #[test]
    fn reverse_rejects_terminals_with_out_edges() {
        let mut spec = NetworkSpec::new("bad");
        spec.node("s").node("t").node("x").link("s", "t").link("t", "x");
        spec.source("s", &["a"]).terminal("t", Demand::Sum);
        let net = build_network(spec).unwrap();
        assert!(matches!(reverse(&net), Err(TransformError::NotReversible(_))));
    }

    fn c1_counts(m: usize) -> (usize, usize) {
        (5 * m + 1, m * m + 6 * m)
    }

    #[test]
    fn c1_counts_follow_the_edge_listing() {
        for m in 1..=3 {
            let mun = unicast(m);
            let (c, trace) = c1_traced(&mun).unwrap();
            let (nodes, edges) = c1_counts(m);
            assert_eq!(c.node_count() - mun.node_count(), nodes, "m={m}");
            assert_eq!(c.edge_count() - mun.edge_count(), edges, "m={m}");
            assert_eq!(trace.edges.len(), edges);
            assert_eq!(c.sources().len(), m + 1);
            assert_eq!(c.terminals().len(), 2 * m);
            assert!(c.is_sum_network());
        }
        // per-clause count at m = 2: 2 + 2 + 2 + 2 + 2 + 2 + 2 + 2
        assert_eq!(c1_counts(2).1, 16);
        assert_eq!(c1_counts(1), (6, 7));
    }

    #[test]
    fn c1_roles_are_traceable() {
        let (c, trace) = c1_traced(&unicast(2)).unwrap();
        assert_eq!(trace.node_with_role("u_2"), Some("u_2"));
        assert_eq!(trace.node_with_role("w_1"), Some("w_1"));
        assert_eq!(trace.edge_with_role("(z_2,t_L2)"), Some("z_2->t_L2"));
        assert!(c.edge_index("s_3->u_1").is_some());
        assert!(c.edge_index("s_1->u_1").is_none());
    }

    #[test]
    fn c1_rejects_non_unicast_and_collisions() {
        let net = families::s_m(3).unwrap();
        assert!(matches!(c1(&net), Err(TransformError::NotMultipleUnicast(_))));
        let mut spec = NetworkSpec::new("clash");
        spec.node("u_1").node("z").link("u_1", "z").source("u_1", &["x"]);
        spec.terminal("z", Demand::Recover(alloc::vec!["x".into()]));
        let net = build_network(spec).unwrap();
        assert_eq!(c1(&net), Err(TransformError::IdCollision("u_1".into())));
    }

    #[test]
    fn to_type_ia_splits_messages_and_demands() {
        let mut spec = NetworkSpec::new("multi");
        spec.node("g").node("t").link("g", "t").source("g", &["a", "b"]);
        spec.terminal("t", Demand::Recover(alloc::vec!["a".into(), "b".into()]));
        let net = build_network(spec).unwrap();
        let ia = to_type_ia(&net).unwrap();
        assert_eq!(ia.sources().len(), 2);
        assert!(ia.edge_index("src_a->g").is_some() && ia.edge_index("src_b->g").is_some());
        assert_eq!(ia.terminals().len(), 2);
        assert_eq!(ia.terminals()["dst_t_b"], Demand::Recover(alloc::vec!["b".into()]));

        let mut spec = NetworkSpec::new("three");
        spec.node("g").node("t").link("g", "t").source("g", &["a", "b", "c"]);
        spec.terminal("t", Demand::Recover(alloc::vec!["a".into(), "b".into(), "c".into()]));
        assert_eq!(to_type_ia(&build_network(spec).unwrap()).unwrap().terminals().len(), 3);

        let ia1 = to_type_ia(&unicast(1)).unwrap();
        assert_eq!(ia1.edge_count(), 3);
        assert_eq!(min_cut(&ia1, "src_x_1", "dst_z_1_x_1"), Ok(1));
        assert!(matches!(to_type_ia(&families::s_m(3).unwrap()), Err(TransformError::NotTypeI(_))));
    }

    #[test]
    fn c2_terminal_count() {
        let mut spec = NetworkSpec::new("typei");
        spec.node("a").node("b").node("y").node("z");
        spec.link("a", "y").link("a", "z").link("b", "z");
        spec.source("a", &["p"]).source("b", &["q"]);
        spec.terminal("y", Demand::Recover(alloc::vec!["p".into()]));
        spec.terminal("z", Demand::Recover(alloc::vec!["p".into(), "q".into()]));
        let net = build_network(spec).unwrap();
        let c = c2(&net).unwrap();
        // m = 2 messages, n_1 = 2, n_2 = 1
        assert_eq!(c.terminals().len(), 2 + 3);
        assert!(c.is_sum_network());
        assert!(c.terminals().contains_key("t^1_2"));

        let small = c2(&unicast(1)).unwrap();
        assert_eq!(small.terminals().len(), 2);
        assert_eq!(small.sources().len(), 2);
    }

    #[test]
    fn c3_pair_count_and_forcing_structure() {
        for (m, n) in [(3, 3), (2, 3), (3, 2), (1, 1), (2, 1)] {
            let mut spec = NetworkSpec::new("sum");
            for i in 1..=m {
                spec.node(format!("w_{i}"));
                spec.source(&format!("w_{i}"), &[&format!("w_{i}")]);
            }
            for j in 1..=n {
                let z = format!("z_{j}");
                spec.node(z.as_str());
                for i in 1..=m {
                    spec.link(&format!("w_{i}"), &z);
                }
                spec.terminal(&z, Demand::Sum);
            }
            let net = build_network(spec).unwrap();
            let (c, trace) = c3_traced(&net).unwrap();
            assert_eq!(c.sources().len(), m * n, "m={m} n={n}");
            assert_eq!(c.terminals().len(), m * n);
            assert!(c.terminals().values().all(|d| matches!(d, Demand::Recover(l) if l.len() == 1)));
            assert!(connectivity(&c).reach.iter().flatten().any(|&b| b));
            if n >= 2 {
                assert_eq!(trace.edge_with_role("chain 1, copy 2: (S_2,t_2)"), Some("r_2_1->t_1_2"));
            }
            // every source reaches its own terminal
            for (src, msgs) in c.sources() {
                let t = c.terminals().iter().find(|(_, d)| **d == Demand::Recover(msgs.clone())).unwrap().0;
                assert!(min_cut(&c, src, t).unwrap() >= 1);
            }
        }
        assert!(matches!(c3(&unicast(2)), Err(TransformError::NotSumNetwork(_))));
    }

    #[test]
    fn scale_sources_retargets_the_sum() {
        let f = FieldSpec::new(5).unwrap();
        let mut spec = NetworkSpec::new("two");
        spec.node("s1").node("s2").node("t").link("s1", "t").link("s2", "t");
        spec.source("s1", &["x1"]).source("s2", &["x2"]).terminal("t", Demand::Sum);
        let net = build_network(spec).unwrap();
        let code = LinearCode::all_identity(&net, f, 1, 1);
        assert!(is_solution(&net, &code));
        let a = BTreeMap::from([
            ("x1".to_string(), MatrixGF::scalar(f, 1, 2)),
            ("x2".to_string(), MatrixGF::scalar(f, 1, 3)),
        ]);
        let scaled = scale_sources(&code, &a).unwrap();
        let x = BTreeMap::from([("x1".to_string(), alloc::vec![1]), ("x2".to_string(), alloc::vec![1])]);
        assert_eq!(eval_linear(&net, &code, &x).unwrap()["t"], alloc::vec![alloc::vec![2]]);
        assert_eq!(eval_linear(&net, &scaled, &x).unwrap()["t"], alloc::vec![alloc::vec![0]]);
        let x = BTreeMap::from([("x1".to_string(), alloc::vec![4]), ("x2".to_string(), alloc::vec![2])]);
        assert_eq!(eval_linear(&net, &scaled, &x).unwrap()["t"], alloc::vec![alloc::vec![(2 * 4 + 3 * 2) % 5]]);
        assert_eq!(unscale_sources(&scaled, &a).unwrap(), code);

        let ident = BTreeMap::from([("x1".to_string(), MatrixGF::identity(f, 1))]);
        assert_eq!(scale_sources(&code, &ident).unwrap(), code);
        let singular = BTreeMap::from([("x1".to_string(), MatrixGF::zeros(f, 1, 1))]);
        assert_eq!(scale_sources(&code, &singular), Err(TransformError::Singular("x1".into())));
    }
}
