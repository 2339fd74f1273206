//! Brute-force reference computations shared by the integration tests.
//! Everything here enumerates paths or cuts outright, so it is only usable on
//! small circuits.

#![allow(dead_code)]

use qmcircuit::{Circuit, NodeId};

/// Every simple directed path from `a` to `b`, as edge index lists.
pub fn simple_paths(circuit: &Circuit, a: NodeId, b: NodeId) -> Vec<Vec<usize>> {
    fn walk(
        c: &Circuit,
        v: NodeId,
        b: NodeId,
        seen: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if v == b {
            out.push(path.clone());
            return;
        }
        for &e in c.out_edges(v) {
            let w = c.edge(e).head;
            if !seen[w.index()] {
                seen[w.index()] = true;
                path.push(e);
                walk(c, w, b, seen, path, out);
                path.pop();
                seen[w.index()] = false;
            }
        }
    }
    let mut seen = vec![false; circuit.node_count()];
    seen[a.index()] = true;
    let mut out = Vec::new();
    walk(circuit, a, b, &mut seen, &mut Vec::new(), &mut out);
    out
}

/// Shortest path length by enumeration; `None` when unreachable.
pub fn brute_shortest(circuit: &Circuit, a: NodeId, b: NodeId) -> Option<f64> {
    simple_paths(circuit, a, b)
        .iter()
        .map(|p| p.iter().map(|&e| circuit.edge(e).mu).sum::<f64>())
        .reduce(f64::min)
}

/// Smallest possible largest resistance along a path.
pub fn brute_bottleneck(circuit: &Circuit, a: NodeId, b: NodeId) -> Option<f64> {
    simple_paths(circuit, a, b)
        .iter()
        .map(|p| p.iter().map(|&e| circuit.edge(e).mu).fold(0.0, f64::max))
        .reduce(f64::min)
}

/// Minimum `a`-`b` cut capacity over all vertex subsets, with `lambda = 1/mu`.
pub fn brute_min_cut(circuit: &Circuit, a: NodeId, b: NodeId) -> f64 {
    let n = circuit.node_count();
    assert!(n <= 16);
    (0u32..1 << n)
        .filter(|m| m >> a.index() & 1 == 1 && m >> b.index() & 1 == 0)
        .map(|m| cut_capacity(circuit, m))
        .fold(f64::INFINITY, f64::min)
}

pub fn cut_capacity(circuit: &Circuit, mask: u32) -> f64 {
    circuit
        .edges()
        .iter()
        .filter(|e| mask >> e.tail.index() & 1 == 1 && mask >> e.head.index() & 1 == 0)
        .map(|e| e.lambda())
        .sum()
}

/// Largest deficiency-to-capacity ratio over all proper cuts with positive
/// capacity.
pub fn brute_critical_ratio(circuit: &Circuit, boundary: &[f64]) -> f64 {
    let n = circuit.node_count();
    (1u32..(1 << n) - 1)
        .filter_map(|m| {
            let cap = cut_capacity(circuit, m);
            let d: f64 = (0..n)
                .filter(|v| m >> v & 1 == 1)
                .map(|v| boundary[v])
                .sum();
            (cap > 0.0).then_some(d / cap)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn strongly_connected(circuit: &Circuit) -> bool {
    let from = circuit.reach_from(NodeId(0), None);
    let to = circuit.reach_to(NodeId(0), None);
    from.iter().chain(&to).all(|&r| r)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}
