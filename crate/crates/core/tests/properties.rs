mod common;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sumnet_core::codes::{canonical_reverse_code, eval_linear, is_solution, transfer_matrix, LinearCode};
use sumnet_core::gflin::{FieldSpec, MatrixGF};
use sumnet_core::netmodel::Network;
use sumnet_core::solver::{search_linear, SearchOptions, Verdict, Witness};
use sumnet_core::transforms::{c1, reverse};

use common::{random_code, random_network, random_unicast};

const PRIMES: [u32; 3] = [2, 3, 5];

/// Sum over every message-to-slot path of the product of its coefficients.
fn path_sum_transfer(net: &Network, code: &LinearCode) -> MatrixGF {
    let (f, k, n) = (code.field(), code.k(), code.n());
    let mut t = MatrixGF::zeros(f, net.slots().len() * k, net.messages().len() * k);
    fn walk(
        net: &Network,
        code: &LinearCode,
        e: usize,
        gain: MatrixGF,
        col: usize,
        t: &mut MatrixGF,
    ) {
        let head = net.head(e);
        let id = &net.edge(e).id;
        for (row, slot) in net.slots().iter().enumerate().filter(|(_, s)| s.terminal == head) {
            let g = code.decode(net.node_id(head), slot.index, id).matmul(&gain).unwrap();
            let k = code.k();
            let mut acc = t.block(row * k, col * k, k, k);
            acc.add_assign(&g).unwrap();
            t.set_block(row * k, col * k, &acc);
        }
        for &next in net.out_edges(head) {
            let g = code.local(id, &net.edge(next).id).matmul(&gain).unwrap();
            walk(net, code, next, g, col, t);
        }
    }
    for (col, m) in net.messages().iter().enumerate() {
        for &e in net.out_edges(m.node) {
            let g = code.source(&m.id, &net.edge(e).id);
            assert_eq!(g.shape(), (n, k));
            walk(net, code, e, g, col, &mut t);
        }
    }
    t
}

#[test]
fn transfer_matrix_matches_path_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &p in &PRIMES {
        let f = FieldSpec::new(p).unwrap();
        for _ in 0..60 {
            let net = random_network(&mut rng, 9);
            let (k, n) = (rng.random_range(1..=2), rng.random_range(1..=2));
            let code = random_code(&mut rng, &net, f, k, n, 0.8);
            assert_eq!(transfer_matrix(&net, &code).unwrap().matrix, path_sum_transfer(&net, &code));
        }
    }
}

#[test]
fn evaluation_agrees_with_transfer_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for &p in &PRIMES {
        let f = FieldSpec::new(p).unwrap();
        for _ in 0..40 {
            let net = random_network(&mut rng, 8);
            let k = rng.random_range(1..=2);
            let code = random_code(&mut rng, &net, f, k, k, 0.8);
            let x: Vec<Vec<u32>> =
                net.messages().iter().map(|_| (0..k).map(|_| rng.random_range(0..p)).collect()).collect();
            let inputs: BTreeMap<String, Vec<u32>> =
                net.messages().iter().zip(&x).map(|(m, v)| (m.id.clone(), v.clone())).collect();
            let out = eval_linear(&net, &code, &inputs).unwrap();
            let t = transfer_matrix(&net, &code).unwrap();
            let y = t.apply(&x).unwrap();
            for (slot, expect) in net.slots().iter().zip(&y) {
                assert_eq!(&out[net.node_id(slot.terminal)][slot.index], expect);
            }
        }
    }
}

#[test]
fn reversal_transposes_transfer_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for &p in &PRIMES {
        let f = FieldSpec::new(p).unwrap();
        for _ in 0..60 {
            let net = random_network(&mut rng, 10);
            let k = rng.random_range(1..=2);
            let code = random_code(&mut rng, &net, f, k, k, 0.7);
            let rev = reverse(&net).unwrap();
            let rcode = canonical_reverse_code(&net, &code).unwrap();
            let t = transfer_matrix(&net, &code).unwrap();
            let rt = transfer_matrix(&rev, &rcode).unwrap();
            assert_eq!(rt.matrix, t.transpose());
            assert_eq!(is_solution(&net, &code), is_solution(&rev, &rcode));

            let back = reverse(&rev).unwrap();
            // Sum sources take their terminal's name, so message ids survive
            // a round trip only when every demand is a recovery.
            if net.is_sum_network() {
                assert_eq!((back.name(), back.edges(), back.terminals()), (net.name(), net.edges(), net.terminals()));
            } else {
                assert_eq!(back, net);
            }
            let bcode = canonical_reverse_code(&rev, &rcode).unwrap();
            assert_eq!(transfer_matrix(&back, &bcode).unwrap().matrix, t.matrix);
        }
    }
}

#[test]
fn reversal_preserves_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let opts = SearchOptions { budget: 200_000, ..SearchOptions::default() };
    let mut checked = 0;
    for &p in &[2, 3] {
        let f = FieldSpec::new(p).unwrap();
        for _ in 0..40 {
            let net = random_network(&mut rng, 7);
            let rev = reverse(&net).unwrap();
            let forward = search_linear(&net, f, 1, 1, &opts).unwrap();
            let backward = search_linear(&rev, f, 1, 1, &opts).unwrap();
            if matches!(forward.verdict, Verdict::BudgetExceeded) || matches!(backward.verdict, Verdict::BudgetExceeded) {
                continue;
            }
            assert_eq!(forward.verdict.is_solvable(), backward.verdict.is_solvable(), "{net:?}");
            for (a, v) in [(&net, &forward.verdict), (&rev, &backward.verdict)] {
                if let Verdict::Solvable(Witness::Linear(code)) = v {
                    assert!(is_solution(a, code));
                    let b = reverse(a).unwrap();
                    assert!(is_solution(&b, &canonical_reverse_code(a, code).unwrap()));
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 10, "too few solvable samples: {checked}");
}

#[test]
fn c1_preserves_scalar_solvability() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let opts = SearchOptions { budget: 2_000_000, ..SearchOptions::default() };
    let mut seen = [0usize; 2];
    for &p in &[2, 3] {
        let f = FieldSpec::new(p).unwrap();
        for _ in 0..25 {
            let pairs = rng.random_range(1..=2);
            let relays = rng.random_range(0..=2);
            let mun = random_unicast(&mut rng, pairs, relays);
            let sum = c1(&mun).unwrap();
            let a = search_linear(&mun, f, 1, 1, &opts).unwrap().verdict;
            let b = search_linear(&sum, f, 1, 1, &opts).unwrap().verdict;
            assert!(!matches!(a, Verdict::BudgetExceeded) && !matches!(b, Verdict::BudgetExceeded));
            assert_eq!(a.is_solvable(), b.is_solvable(), "{mun:?}");
            seen[a.is_solvable() as usize] += 1;
        }
    }
    assert!(seen[0] > 0 && seen[1] > 0, "{seen:?}");
}
