//! Seeded random networks and codes shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use sumnet_core::codes::LinearCode;
use sumnet_core::gflin::{FieldSpec, MatrixGF};
use sumnet_core::netmodel::{build_network, Demand, Edge, Network, NetworkSpec};

pub fn random_matrix(rng: &mut impl Rng, field: FieldSpec, rows: usize, cols: usize) -> MatrixGF {
    let entries = (0..rows * cols).map(|_| rng.random_range(0..field.p())).collect();
    MatrixGF::new(field, rows, cols, entries).unwrap()
}

/// Random reversible DAG on at most `max_nodes` nodes: sources come first
/// and have no in-edges, terminals come last and have no out-edges, and
/// parallel edges occur. Either a sum-network with one message per source,
/// or every message is recovered by exactly one terminal.
pub fn random_network(rng: &mut impl Rng, max_nodes: usize) -> Network {
    loop {
        let count = rng.random_range(3..=max_nodes);
        let sources = rng.random_range(1..=2.min(count - 2));
        let terminals = rng.random_range(1..=2.min(count - sources));
        let name = |i: usize| format!("v{i}");
        let mut spec = NetworkSpec::new("random");
        for i in 0..count {
            spec.node(name(i));
        }
        let first_terminal = count - terminals;
        let mut parallel = 0;
        for i in 0..first_terminal {
            for j in (i + 1).max(sources)..count {
                if rng.random_bool(0.4) {
                    spec.link(&name(i), &name(j));
                    if rng.random_bool(0.15) {
                        parallel += 1;
                        spec.edges.push(Edge::new(format!("p{parallel}"), name(i), name(j)));
                    }
                }
            }
        }
        let sum = rng.random_bool(0.5);
        let mut messages = Vec::new();
        for s in 0..sources {
            let per = if sum { 1 } else { rng.random_range(1..=2) };
            let ids: Vec<String> = (0..per).map(|j| format!("x{s}_{j}")).collect();
            messages.extend(ids.iter().cloned());
            spec.sources.insert(name(s), ids);
        }
        if sum {
            for t in first_terminal..count {
                spec.terminal(&name(t), Demand::Sum);
            }
        } else {
            if messages.len() < terminals {
                continue;
            }
            let mut wants: Vec<Vec<String>> = vec![Vec::new(); terminals];
            for (i, msg) in messages.iter().enumerate() {
                let t = if i < terminals { i } else { rng.random_range(0..terminals) };
                wants[t].push(msg.clone());
            }
            for (t, w) in wants.into_iter().enumerate() {
                spec.terminal(&name(first_terminal + t), Demand::Recover(w));
            }
        }
        if let Ok(net) = build_network(spec) {
            return net;
        }
    }
}

/// Random multiple-unicast network with `pairs` source-terminal pairs.
pub fn random_unicast(rng: &mut impl Rng, pairs: usize, relays: usize) -> Network {
    loop {
        let name = |i: usize| format!("v{i}");
        let count = 2 * pairs + relays;
        let mut spec = NetworkSpec::new("unicast");
        for i in 0..count {
            spec.node(name(i));
        }
        for i in 0..pairs + relays {
            for j in (i + 1).max(pairs)..count {
                if rng.random_bool(0.45) {
                    spec.link(&name(i), &name(j));
                }
            }
        }
        for p in 0..pairs {
            let msg = format!("x{p}");
            spec.sources.insert(name(p), vec![msg.clone()]);
            spec.terminal(&name(pairs + relays + p), Demand::Recover(vec![msg]));
        }
        if let Ok(net) = build_network(spec) {
            return net;
        }
    }
}

/// A random `(k, n)` code binding to `net`; each coefficient is present
/// with probability `density`.
pub fn random_code(rng: &mut impl Rng, net: &Network, field: FieldSpec, k: usize, n: usize, density: f64) -> LinearCode {
    let mut code = LinearCode::new(field, k, n);
    for (e, edge) in net.edges().iter().enumerate() {
        let tail = net.tail(e);
        for &m in &net.messages_at(tail) {
            if rng.random_bool(density) {
                let id = &net.messages()[m].id;
                code.set_source(id, &edge.id, random_matrix(rng, field, n, k)).unwrap();
            }
        }
        for &i in net.in_edges(tail) {
            if rng.random_bool(density) {
                code.set_local(&net.edge(i).id, &edge.id, random_matrix(rng, field, n, n)).unwrap();
            }
        }
    }
    for slot in net.slots() {
        for &i in net.in_edges(slot.terminal) {
            if rng.random_bool(density) {
                let t = net.node_id(slot.terminal);
                code.set_decode(t, slot.index, &net.edge(i).id, random_matrix(rng, field, k, n)).unwrap();
            }
        }
    }
    code
}
