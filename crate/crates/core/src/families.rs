//! Generators for the named network families and their known codes.
//!
//! Every generated source generates a single message named after its node.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::codes::LinearCode;
use crate::gflin::{FieldSpec, MatrixGF};
use crate::netmodel::{build_network, Demand, Network, NetworkSpec};
use crate::transforms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    SM,
    SMStar,
    Component,
    BottleneckMun,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::SM => "s_m",
            Family::SMStar => "s_m_star",
            Family::Component => "component",
            Family::BottleneckMun => "bottleneck_mun",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "s_m" => Family::SM,
            "s_m_star" => Family::SMStar,
            "component" => Family::Component,
            "bottleneck_mun" => Family::BottleneckMun,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FamilyError {
    #[error("{family} needs m >= {min}, got {m}")]
    ParameterTooSmall { family: &'static str, min: usize, m: usize },
    #[error("{0} needs a parameter m")]
    MissingParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FamilySpec {
    pub family: Family,
    pub m: Option<usize>,
}

impl FamilySpec {
    pub fn new(family: Family, m: Option<usize>) -> Self {
        Self { family, m }
    }

    /// The family member described by this spec.
    pub fn build(&self) -> Result<Network, FamilyError> {
        let m = || self.m.ok_or(FamilyError::MissingParameter(self.family.name()));
        match self.family {
            Family::SM => s_m(m()?),
            Family::SMStar => s_m_star(m()?),
            Family::Component => Ok(component()),
            Family::BottleneckMun => bottleneck_mun(m()?),
        }
    }
}

/// `m` for a list of primes: their product plus two (the empty product is 1).
pub fn m_for_primes(primes: &[u32]) -> usize {
    primes.iter().map(|&p| p as usize).product::<usize>() + 2
}

fn require(family: &'static str, min: usize, m: usize) -> Result<(), FamilyError> {
    if m < min {
        Err(FamilyError::ParameterTooSmall { family, min, m })
    } else {
        Ok(())
    }
}

fn add_source(spec: &mut NetworkSpec, id: &str) {
    spec.node(id).source(id, &[id]);
}

/// The sum-network solvable exactly over fields whose characteristic
/// divides `m − 2`.
pub fn s_m(m: usize) -> Result<Network, FamilyError> {
    require("s_m", 3, m)?;
    let mut spec = NetworkSpec::new(format!("S_{m}"));
    for i in 1..=m {
        add_source(&mut spec, &format!("s_{i}"));
        spec.node(format!("t_{i}"));
        spec.terminal(&format!("t_{i}"), Demand::Sum);
    }
    for i in 1..m {
        spec.node(format!("u_{i}")).node(format!("v_{i}"));
    }
    for i in 1..m {
        let (s, u, v) = (format!("s_{i}"), format!("u_{i}"), format!("v_{i}"));
        for j in (1..m).filter(|&j| j != i) {
            spec.link(&s, &format!("t_{j}"));
        }
        spec.link(&s, &u).link(&format!("s_{m}"), &u).link(&u, &v);
        spec.link(&v, &format!("t_{i}")).link(&v, &format!("t_{m}"));
    }
    Ok(build_network(spec).expect("well-formed family"))
}

/// The sum-network solvable exactly over fields whose characteristic does
/// not divide `m − 2`.
pub fn s_m_star(m: usize) -> Result<Network, FamilyError> {
    require("s_m_star", 3, m)?;
    let mut spec = NetworkSpec::new(format!("S*_{m}"));
    for i in 1..m {
        add_source(&mut spec, &format!("s_{i}"));
        spec.node(format!("u_{i}")).node(format!("v_{i}"));
    }
    for i in 1..=m {
        spec.node(format!("t_{i}"));
        spec.terminal(&format!("t_{i}"), Demand::Sum);
    }
    for i in 1..m {
        let (s, u, v, t) = (format!("s_{i}"), format!("u_{i}"), format!("v_{i}"), format!("t_{i}"));
        spec.link(&s, &t);
        for j in (1..m).filter(|&j| j != i) {
            spec.link(&s, &format!("u_{j}"));
        }
        spec.link(&u, &v).link(&v, &t).link(&v, &format!("t_{m}"));
    }
    Ok(build_network(spec).expect("well-formed family"))
}

/// The component gadget: `x_1` generates `X_1` and feeds the relays `S_1`
/// and `S_2`; `S_3` generates `X_3`. `t_1` wants `X_1`, `t_2` wants `X_3`.
/// In a scalar solution both `S_1->a` and `S_2->t_2` carry a nonzero
/// multiple of `X_1`.
pub fn component() -> Network {
    let mut spec = NetworkSpec::new("component");
    for v in ["x_1", "S_1", "S_2", "S_3", "a", "b", "t_1", "t_2"] {
        spec.node(v);
    }
    spec.source("x_1", &["X_1"]).source("S_3", &["X_3"]);
    for (t, h) in [
        ("x_1", "S_1"),
        ("x_1", "S_2"),
        ("S_1", "a"),
        ("S_3", "a"),
        ("a", "b"),
        ("b", "t_1"),
        ("b", "t_2"),
        ("S_3", "t_1"),
        ("S_2", "t_2"),
    ] {
        spec.link(t, h);
    }
    spec.terminal("t_1", Demand::Recover(vec!["X_1".into()]));
    spec.terminal("t_2", Demand::Recover(vec!["X_3".into()]));
    build_network(spec).expect("well-formed family")
}

/// The out-edges of the component's relays that the gadget forces to carry `X_1`.
pub const COMPONENT_RELAY_EDGES: [&str; 2] = ["S_1->a", "S_2->t_2"];

/// `m` unicast pairs `w_i → z_i` sharing the single edge `a → b`.
pub fn bottleneck_mun(m: usize) -> Result<Network, FamilyError> {
    require("bottleneck_mun", 2, m)?;
    let mut spec = NetworkSpec::new(format!("bottleneck_{m}"));
    spec.node("a").node("b").link("a", "b");
    for i in 1..=m {
        let (w, z, x) = (format!("w_{i}"), format!("z_{i}"), format!("x_{i}"));
        spec.node(w.as_str()).node(z.as_str()).link(&w, "a").link("b", &z);
        spec.source(&w, &[&x]).terminal(&z, Demand::Recover(vec![x]));
    }
    Ok(build_network(spec).expect("well-formed family"))
}

/// The explicit solution known for a family member, if the field admits one:
///
/// * `s_m`: the all-identity scalar code, when `p | m − 2`;
/// * `s_m_star`: identity coding with `(m − 2)⁻¹` decoding at `t_m`, when `p ∤ m − 2`;
/// * `bottleneck_mun`: a `(1, 2)` code for the sum-network `c2(bottleneck_mun(m))`,
///   carrying the bottleneck sum in the first symbol and sending the sum
///   to the right terminals in the second.
pub fn known_code(spec: &FamilySpec, field: FieldSpec) -> Option<LinearCode> {
    let m = spec.m?;
    let p = field.p() as usize;
    match spec.family {
        Family::SM => {
            let net = s_m(m).ok()?;
            ((m - 2) % p == 0).then(|| LinearCode::all_identity(&net, field, 1, 1))
        }
        Family::SMStar => {
            let net = s_m_star(m).ok()?;
            let gamma = field.inv(field.reduce((m - 2) as i64))?;
            let mut code = LinearCode::all_identity(&net, field, 1, 1);
            let tm = format!("t_{m}");
            for i in 1..m {
                code.set_decode(&tm, 0, &format!("v_{i}->{tm}"), MatrixGF::scalar(field, 1, gamma)).ok()?;
            }
            Some(code)
        }
        Family::BottleneckMun => {
            let net = transforms::c2(&bottleneck_mun(m).ok()?).ok()?;
            Some(bottleneck_sum_code(&net, m, field))
        }
        Family::Component => None,
    }
}

/// The time-sharing `(1, 2)` code on `c2(bottleneck_mun(m))`, given as the
/// content of every edge; coefficients are solved for from those contents.
fn bottleneck_sum_code(net: &Network, m: usize, field: FieldSpec) -> LinearCode {
    let msgs = net.messages().len();
    let col = |id: &str| net.message_index(id).expect("c2 source message");
    let x = |i: usize| col(&format!("s_{i}"));
    // Global matrices are 2 × msgs (k = 1).
    let content = |first: &[usize], second: &[usize]| {
        let mut g = MatrixGF::zeros(field, 2, msgs);
        for &c in first {
            g.set(0, c, field.add(g.get(0, c), 1));
        }
        for &c in second {
            g.set(1, c, field.add(g.get(1, c), 1));
        }
        g
    };
    let hub = |i: usize| -> Vec<usize> { (1..=m).filter(|&j| j != i).map(x).chain([x(m + 1)]).collect() };
    let first_only = crate::gflin::MatrixGF::from_rows(field, &[&[1, 0], &[0, 0]]).expect("2x2");
    let mut globals: Vec<Option<MatrixGF>> = vec![None; net.edge_count()];
    for &v in net.topo_indices() {
        for &e in net.out_edges(v) {
            let tail = net.node_id(v);
            let head = net.node_id(net.head(e));
            let index = |s: &str, prefix: &str| s.strip_prefix(prefix).and_then(|r| r.parse::<usize>().ok());
            let g = if let Some(i) = index(tail, "s_") {
                if i == m + 1 {
                    content(&[x(i)], &[x(i)])
                } else if head.starts_with("u_") || head.starts_with("t_") {
                    content(&[], &[x(i)])
                } else {
                    content(&[x(i)], &[])
                }
            } else if let Some(i) = index(tail, "u_").or_else(|| index(tail, "v_")) {
                content(&[x(m + 1)], &hub(i))
            } else {
                // inside the Type IA part: forward the first symbol of the sum
                let mut acc = MatrixGF::zeros(field, 2, msgs);
                for &ein in net.in_edges(v) {
                    let gin = globals[ein].as_ref().expect("topological order");
                    acc.add_assign(&first_only.matmul(gin).expect("shape")).expect("shape");
                }
                acc
            };
            globals[e] = Some(g);
        }
    }
    let globals: Vec<MatrixGF> = globals.into_iter().map(|g| g.expect("every edge visited")).collect();
    realize(net, field, 1, 2, &globals).expect("edge contents are consistent")
}

/// A `(k, n)` code whose edges carry exactly `globals` and whose decoders
/// meet every demand, or `None` if the contents cannot be produced or decoded.
fn realize(net: &Network, field: FieldSpec, k: usize, n: usize, globals: &[MatrixGF]) -> Option<LinearCode> {
    let mut code = LinearCode::new(field, k, n);
    for e in 0..net.edge_count() {
        let tail = net.tail(e);
        let id = net.edge(e).id.clone();
        if net.is_source(tail) {
            for mi in net.messages_at(tail) {
                let alpha = globals[e].block(0, mi * k, n, k);
                code.set_source(&net.messages()[mi].id, &id, alpha).ok()?;
            }
            let mut check = MatrixGF::zeros(field, n, globals[e].cols());
            for mi in net.messages_at(tail) {
                check.set_block(0, mi * k, &globals[e].block(0, mi * k, n, k));
            }
            if check != globals[e] {
                return None;
            }
        } else {
            let ins = net.in_edges(tail);
            let parts: Vec<&MatrixGF> = ins.iter().map(|&i| &globals[i]).collect();
            let h = MatrixGF::vstack(field, globals[e].cols(), &parts).ok()?;
            let a = h.transpose().solve_right(&globals[e].transpose()).ok()??.transpose();
            for (j, &ein) in ins.iter().enumerate() {
                code.set_local(&net.edge(ein).id, &id, a.block(0, j * n, n, n)).ok()?;
            }
        }
    }
    let target = crate::codes::target_transfer(net, field, k);
    for (si, slot) in net.slots().iter().enumerate() {
        let ins = net.in_edges(slot.terminal);
        let parts: Vec<&MatrixGF> = ins.iter().map(|&i| &globals[i]).collect();
        let h = MatrixGF::vstack(field, target.cols(), &parts).ok()?;
        let want = target.block(si * k, 0, k, target.cols());
        let gamma = h.transpose().solve_right(&want.transpose()).ok()??.transpose();
        let t = net.node_id(slot.terminal).to_string();
        for (j, &ein) in ins.iter().enumerate() {
            code.set_decode(&t, slot.index, &net.edge(ein).id, gamma.block(0, j * n, k, n)).ok()?;
        }
    }
    code.prune_zeros();
    Some(code)
}

/// Family parameters keyed by name, for front ends.
pub fn family_names() -> BTreeMap<&'static str, Family> {
    [Family::SM, Family::SMStar, Family::Component, Family::BottleneckMun]
        .into_iter()
        .map(|f| (f.name(), f))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{is_solution, transfer_matrix};
    use crate::netmodel::{connectivity, min_cut};

    fn gf(p: u32) -> FieldSpec {
        FieldSpec::new(p).unwrap()
    }

    #[test]
    fn s_m_shape() {
        let net = s_m(4).unwrap();
        assert_eq!(net.sources().len(), 4);
        assert_eq!(net.terminals().len(), 4);
        assert_eq!(net.edge_count(), 21);
        assert!(net.node_index("u_3").is_some() && net.node_index("u_4").is_none());
        assert!(net.edge_index("s_1->t_4").is_none());
        assert!(net.edge_index("s_4->u_2").is_some());
        for m in 3..=5 {
            assert!(connectivity(&s_m(m).unwrap()).all_connected(), "m={m}");
        }
        assert_eq!(s_m(2), Err(FamilyError::ParameterTooSmall { family: "s_m", min: 3, m: 2 }));
    }

    #[test]
    fn s_m_star_shape() {
        let net = s_m_star(4).unwrap();
        assert_eq!(net.sources().len(), 3);
        assert_eq!(net.terminals().len(), 4);
        assert!(net.edge_index("s_1->u_1").is_none());
        assert!(net.edge_index("s_1->u_2").is_some());
        assert!(s_m_star(2).is_err());
    }

    #[test]
    fn component_and_bottleneck_shapes() {
        let c = component();
        assert_eq!(c.terminals().len(), 2);
        assert!(c.terminals().values().all(|d| matches!(d, Demand::Recover(_))));
        for e in COMPONENT_RELAY_EDGES {
            assert!(c.edge_index(e).is_some());
        }
        let b = bottleneck_mun(3).unwrap();
        for i in 1..=3 {
            assert_eq!(min_cut(&b, &format!("w_{i}"), &format!("z_{i}")), Ok(1));
        }
        assert!(bottleneck_mun(1).is_err());
    }

    #[test]
    fn empty_prime_product() {
        assert_eq!(m_for_primes(&[]), 3);
        assert_eq!(m_for_primes(&[2, 3]), 8);
    }

    #[test]
    fn s_m_known_codes() {
        let spec = FamilySpec::new(Family::SM, Some(4));
        let code = known_code(&spec, gf(2)).unwrap();
        assert!(is_solution(&s_m(4).unwrap(), &code));
        assert!(known_code(&spec, gf(3)).is_none());
        let spec5 = FamilySpec::new(Family::SM, Some(5));
        assert!(is_solution(&s_m(5).unwrap(), &known_code(&spec5, gf(3)).unwrap()));
    }

    #[test]
    fn s_m_star_known_codes() {
        let spec = FamilySpec::new(Family::SMStar, Some(4));
        let code = known_code(&spec, gf(3)).unwrap();
        assert_eq!(code.decode("t_4", 0, "v_1->t_4"), MatrixGF::scalar(gf(3), 1, 2));
        let net = s_m_star(4).unwrap();
        assert!(is_solution(&net, &code));
        assert!(!is_solution(&net, &LinearCode::all_identity(&net, gf(3), 1, 1)));
        assert!(known_code(&spec, gf(2)).is_none());
        let at5 = known_code(&spec, gf(5)).unwrap();
        assert_eq!(at5.decode("t_4", 0, "v_2->t_4"), MatrixGF::scalar(gf(5), 1, 3));
        assert!(is_solution(&net, &at5));
    }

    #[test]
    fn bottleneck_half_rate_code() {
        for m in 2..=4 {
            let spec = FamilySpec::new(Family::BottleneckMun, Some(m));
            let net = transforms::c2(&bottleneck_mun(m).unwrap()).unwrap();
            for p in [2, 3] {
                let code = known_code(&spec, gf(p)).unwrap();
                assert_eq!((code.k(), code.n()), (1, 2));
                assert!(is_solution(&net, &code), "m={m} p={p}");
                // the bottleneck carries only the sum of the unicast messages, in the first symbol
                let t = transfer_matrix(&net, &code).unwrap();
                assert_eq!(t.rows.len(), m + m);
            }
        }
        assert!(known_code(&FamilySpec::new(Family::Component, None), gf(2)).is_none());
    }
}
