//! Exact combinatorial distances that the limit regimes converge to.
//!
//! Edge lengths are the resistances `mu_e`, widths and capacities are the
//! conductances `lambda_e = 1 / mu_e`. Every distance is reported as an
//! [`ExtResistance`] so it can be compared directly with effective
//! resistances.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use serde::Serialize;

use crate::circuit::{Circuit, NodeId};
use crate::error::{Error, Result};
use crate::ext::ExtResistance;

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    key: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // min-heap on key, ties by node index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over a monotone path cost `combine(cost_so_far, mu_e)`.
fn label_search(circuit: &Circuit, a: NodeId, combine: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let n = circuit.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[a.0] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        key: 0.0,
        node: a.0,
    });
    while let Some(HeapEntry { key, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        for &e in circuit.out_edges(NodeId(node)) {
            let ed = circuit.edge(e);
            let cand = combine(key, ed.mu);
            if cand < dist[ed.head.0] {
                dist[ed.head.0] = cand;
                heap.push(HeapEntry {
                    key: cand,
                    node: ed.head.0,
                });
            }
        }
    }
    dist
}

fn distance(
    circuit: &Circuit,
    a: NodeId,
    b: NodeId,
    combine: impl Fn(f64, f64) -> f64,
) -> Result<ExtResistance> {
    circuit.check_node(a)?;
    circuit.check_node(b)?;
    if a == b {
        return Ok(ExtResistance::Zero);
    }
    let d = label_search(circuit, a, combine)[b.0];
    Ok(if d.is_finite() {
        ExtResistance::Finite(d)
    } else {
        ExtResistance::Infinite
    })
}

/// Length of the shortest directed path with edge lengths `mu_e`.
pub fn shortest_path_length(circuit: &Circuit, a: NodeId, b: NodeId) -> Result<ExtResistance> {
    distance(circuit, a, b, |d, mu| d + mu)
}

/// Inverse of the widest bottleneck width: the minimum over paths of the
/// largest resistance along the path.
pub fn widest_bottleneck(circuit: &Circuit, a: NodeId, b: NodeId) -> Result<ExtResistance> {
    distance(circuit, a, b, f64::max)
}

/// Lexicographically widest bottleneck path, as a list of edge indices.
///
/// Among all widest paths it maximizes the second smallest width, then the
/// third, and so on; a path that runs out of edges compares as wider. This is
/// a shortest-path problem over count vectors: the cost of a path counts its
/// edges per distinct resistance value, compared from the largest resistance
/// downwards.
pub fn lex_widest_path(circuit: &Circuit, a: NodeId, b: NodeId) -> Result<Vec<usize>> {
    circuit.check_node(a)?;
    circuit.check_node(b)?;
    if a == b {
        return Ok(Vec::new());
    }
    let mut levels: Vec<f64> = circuit.edges().iter().map(|e| e.mu).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let level_of = |mu: f64| levels.binary_search_by(|p| p.total_cmp(&mu)).unwrap();
    let g = levels.len();

    // compare count vectors from the highest level down
    let cmp = |x: &[u32], y: &[u32]| -> Ordering {
        for k in (0..g).rev() {
            match x[k].cmp(&y[k]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    };

    let n = circuit.node_count();
    let mut cost: Vec<Option<Vec<u32>>> = vec![None; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    cost[a.0] = Some(vec![0; g]);
    loop {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if done[v] || cost[v].is_none() {
                continue;
            }
            pick = match pick {
                Some(p)
                    if cmp(cost[v].as_ref().unwrap(), cost[p].as_ref().unwrap())
                        != Ordering::Less =>
                {
                    Some(p)
                }
                _ => Some(v),
            };
        }
        let Some(u) = pick else { break };
        done[u] = true;
        if u == b.0 {
            break;
        }
        let base = cost[u].clone().unwrap();
        for &e in circuit.out_edges(NodeId(u)) {
            let ed = circuit.edge(e);
            let w = ed.head.0;
            if done[w] {
                continue;
            }
            let mut cand = base.clone();
            cand[level_of(ed.mu)] += 1;
            let better = match &cost[w] {
                None => true,
                Some(old) => cmp(&cand, old) == Ordering::Less,
            };
            if better {
                cost[w] = Some(cand);
                pred[w] = Some(e);
            }
        }
    }
    if cost[b.0].is_none() {
        return Err(Error::Unreachable);
    }
    let mut path = Vec::new();
    let mut v = b.0;
    while v != a.0 {
        let e = pred[v].expect("predecessor chain");
        path.push(e);
        v = circuit.edge(e).tail.0;
    }
    path.reverse();
    Ok(path)
}

/// Minimum cut certificate for a maximum flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutCertificate {
    pub source_side: Vec<NodeId>,
    pub sink_side: Vec<NodeId>,
    /// Sum of conductances of edges from the source side to the sink side.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxFlow {
    pub value: f64,
    /// Per-edge flow of one maximum flow.
    pub flow: Vec<f64>,
    pub cut: CutCertificate,
}

impl MaxFlow {
    /// The flow value read as a resistance distance, `1 / value`.
    pub fn inverse(&self) -> ExtResistance {
        if self.value > 0.0 {
            ExtResistance::Finite(1.0 / self.value)
        } else {
            ExtResistance::Infinite
        }
    }

    /// Decomposes the flow into source-to-sink paths with their amounts.
    pub fn decompose(&self, circuit: &Circuit) -> Vec<(Vec<usize>, f64)> {
        let a = self.cut.source_side.first().map(|v| v.0);
        let Some(a) = a else { return Vec::new() };
        let sink: Vec<bool> = {
            let mut s = vec![false; circuit.node_count()];
            for v in &self.cut.sink_side {
                s[v.0] = true;
            }
            s
        };
        let eps = 1e-12 * self.value.max(f64::MIN_POSITIVE);
        let mut rest = self.flow.clone();
        let mut out = Vec::new();
        for _ in 0..circuit.edge_count() + 1 {
            // walk along positive flow until the flow leaves through a node with
            // no outgoing flow (the sink) or a cycle is closed
            let mut path = Vec::new();
            let mut seen = vec![false; circuit.node_count()];
            let mut v = a;
            seen[v] = true;
            while let Some(&e) = circuit
                .out_edges(NodeId(v))
                .iter()
                .find(|&&e| rest[e] > eps)
            {
                path.push(e);
                v = circuit.edge(e).head.0;
                if seen[v] {
                    break;
                }
                seen[v] = true;
            }
            if path.is_empty() || !sink[v] {
                break;
            }
            let amount = path.iter().map(|&e| rest[e]).fold(f64::INFINITY, f64::min);
            for &e in &path {
                rest[e] -= amount;
            }
            out.push((path, amount));
        }
        out
    }
}

/// Maximum flow with capacities `lambda_e`, by shortest augmenting paths.
pub fn max_flow(circuit: &Circuit, a: NodeId, b: NodeId) -> Result<MaxFlow> {
    circuit.check_node(a)?;
    circuit.check_node(b)?;
    if a == b {
        return Err(Error::SamePoles);
    }
    let n = circuit.node_count();
    let m = circuit.edge_count();
    let cap: Vec<f64> = circuit.edges().iter().map(|e| e.lambda()).collect();
    let eps = 1e-14 * cap.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let mut flow = vec![0.0; m];

    // residual arcs: (edge, forward?)
    let residual = |flow: &[f64], e: usize, fwd: bool| {
        if fwd {
            cap[e] - flow[e]
        } else {
            flow[e]
        }
    };
    let bfs = |flow: &[f64]| -> Vec<Option<(usize, bool)>> {
        let mut pred: Vec<Option<(usize, bool)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[a.0] = true;
        let mut queue = VecDeque::from([a.0]);
        while let Some(u) = queue.pop_front() {
            let arcs = circuit
                .out_edges(NodeId(u))
                .iter()
                .map(|&e| (e, true, circuit.edge(e).head.0))
                .chain(
                    circuit
                        .in_edges(NodeId(u))
                        .iter()
                        .map(|&e| (e, false, circuit.edge(e).tail.0)),
                );
            for (e, fwd, w) in arcs {
                if !seen[w] && residual(flow, e, fwd) > eps {
                    seen[w] = true;
                    pred[w] = Some((e, fwd));
                    queue.push_back(w);
                }
            }
        }
        pred
    };

    let mut value = 0.0;
    loop {
        let pred = bfs(&flow);
        if pred[b.0].is_none() {
            let mut seen = vec![false; n];
            seen[a.0] = true;
            for (v, p) in pred.iter().enumerate() {
                if p.is_some() {
                    seen[v] = true;
                }
            }
            let source_side: Vec<NodeId> = std::iter::once(a)
                .chain((0..n).filter(|&v| seen[v] && v != a.0).map(NodeId))
                .collect();
            let sink_side: Vec<NodeId> = (0..n).filter(|&v| !seen[v]).map(NodeId).collect();
            let capacity = circuit
                .edges()
                .iter()
                .filter(|e| seen[e.tail.0] && !seen[e.head.0])
                .map(|e| e.lambda())
                .sum();
            return Ok(MaxFlow {
                value,
                flow,
                cut: CutCertificate {
                    source_side,
                    sink_side,
                    capacity,
                },
            });
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = b.0;
        while v != a.0 {
            let (e, fwd) = pred[v].unwrap();
            bottleneck = bottleneck.min(residual(&flow, e, fwd));
            v = if fwd {
                circuit.edge(e).tail.0
            } else {
                circuit.edge(e).head.0
            };
        }
        let mut v = b.0;
        while v != a.0 {
            let (e, fwd) = pred[v].unwrap();
            if fwd {
                flow[e] = (flow[e] + bottleneck).min(cap[e]);
                v = circuit.edge(e).tail.0;
            } else {
                flow[e] = (flow[e] - bottleneck).max(0.0);
                v = circuit.edge(e).head.0;
            }
        }
        value += bottleneck;
    }
}

/// Exact effective resistance of a series-parallel two-pole network.
///
/// Edges that cannot carry current (not on any source-to-sink walk, entering
/// the source or leaving the sink) are dropped first; then parallel bundles
/// (`mu^{-s} = sum mu_i^{-s}`) and interior nodes of in/out degree one
/// (`mu^{s/r} = sum mu_i^{s/r}`) are contracted until a single source-to-sink
/// edge remains.
pub fn series_parallel_reduce(circuit: &Circuit, a: NodeId, b: NodeId) -> Result<ExtResistance> {
    circuit.check_node(a)?;
    circuit.check_node(b)?;
    if a == b {
        return Ok(ExtResistance::Zero);
    }
    if !circuit.reachable(a, b, None)? {
        return Ok(ExtResistance::Infinite);
    }
    let (r, s) = (circuit.r(), circuit.s());
    let p = s / r;
    let n = circuit.node_count();
    let mut edges: Vec<(usize, usize, f64)> = circuit.triples();

    loop {
        let before = edges.len();
        edges = prune(n, a.0, b.0, edges);

        let mut bundles: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(u, v, mu) in &edges {
            *bundles.entry((u, v)).or_insert(0.0) += mu.powf(-s);
        }
        let merged = bundles.len() < edges.len();
        edges = bundles
            .into_iter()
            .map(|((u, v), g)| (u, v, g.powf(-1.0 / s)))
            .collect();

        let mut indeg = vec![0usize; n];
        let mut outdeg = vec![0usize; n];
        for &(u, v, _) in &edges {
            outdeg[u] += 1;
            indeg[v] += 1;
        }
        let series = (0..n).find(|&w| w != a.0 && w != b.0 && indeg[w] == 1 && outdeg[w] == 1);
        let contracted = if let Some(w) = series {
            let i_in = edges.iter().position(|e| e.1 == w).unwrap();
            let i_out = edges.iter().position(|e| e.0 == w).unwrap();
            let (u, _, m1) = edges[i_in];
            let (_, x, m2) = edges[i_out];
            let (hi, lo) = (i_in.max(i_out), i_in.min(i_out));
            edges.remove(hi);
            edges.remove(lo);
            if u != x {
                edges.push((u, x, (m1.powf(p) + m2.powf(p)).powf(1.0 / p)));
            }
            true
        } else {
            false
        };

        if edges.len() == 1 && edges[0].0 == a.0 && edges[0].1 == b.0 {
            return Ok(ExtResistance::Finite(edges[0].2));
        }
        if edges.is_empty() {
            return Ok(ExtResistance::Infinite);
        }
        if !merged && !contracted && edges.len() == before {
            return Err(Error::NotSeriesParallel {
                remaining: edges.len(),
            });
        }
    }
}

fn prune(
    n: usize,
    a: usize,
    b: usize,
    edges: Vec<(usize, usize, f64)>,
) -> Vec<(usize, usize, f64)> {
    let reach = |start: usize, fwd: bool| {
        let mut adj = vec![Vec::new(); n];
        for &(u, v, _) in &edges {
            if fwd {
                adj[u].push(v);
            } else {
                adj[v].push(u);
            }
        }
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    let from_a = reach(a, true);
    let to_b = reach(b, false);
    edges
        .into_iter()
        .filter(|&(u, v, _)| v != a && u != b && from_a[u] && to_b[v])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Circuit {
        Circuit::builder(1.0, 1.0)
            .edge("a", "b", 3.0)
            .edge("a", "c", 1.0)
            .edge("c", "b", 1.0)
            .build()
            .unwrap()
    }

    fn five_node() -> Circuit {
        Circuit::builder(1.0, 1.0)
            .edge("a", "k", 1.0)
            .edge("k", "c", 1.0)
            .edge("c", "l", 1.0)
            .edge("l", "b", 1.0)
            .edge("k", "l", 1.0)
            .build()
            .unwrap()
    }

    fn ids(c: &Circuit, l: &[&str]) -> Vec<NodeId> {
        l.iter().map(|x| c.node(x).unwrap()).collect()
    }

    #[test]
    fn triangle_distances() {
        let c = triangle();
        let v = ids(&c, &["a", "b"]);
        assert_eq!(
            shortest_path_length(&c, v[0], v[1]).unwrap(),
            ExtResistance::Finite(2.0)
        );
        assert_eq!(
            widest_bottleneck(&c, v[0], v[1]).unwrap(),
            ExtResistance::Finite(1.0)
        );
        assert_eq!(
            shortest_path_length(&c, v[1], v[0]).unwrap(),
            ExtResistance::Infinite
        );
        assert_eq!(
            shortest_path_length(&c, v[0], v[0]).unwrap(),
            ExtResistance::Zero
        );
        assert_eq!(lex_widest_path(&c, v[0], v[1]).unwrap(), vec![1, 2]);
    }

    #[test]
    fn single_edge_distances() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 4.0)
            .build()
            .unwrap();
        assert_eq!(
            widest_bottleneck(&c, NodeId(0), NodeId(1)).unwrap(),
            ExtResistance::Finite(4.0)
        );
        assert_eq!(
            shortest_path_length(&c, NodeId(0), NodeId(1)).unwrap(),
            ExtResistance::Finite(4.0)
        );
        assert_eq!(lex_widest_path(&c, NodeId(0), NodeId(1)).unwrap(), vec![0]);
        assert!(matches!(
            lex_widest_path(&c, NodeId(1), NodeId(0)),
            Err(Error::Unreachable)
        ));
    }

    #[test]
    fn five_node_capacities() {
        let c = five_node();
        let v = ids(&c, &["a", "c", "b"]);
        for (s, t) in [(0, 1), (1, 2), (0, 2)] {
            let mf = max_flow(&c, v[s], v[t]).unwrap();
            assert!((mf.value - 1.0).abs() < 1e-12);
            assert!((mf.cut.capacity - mf.value).abs() < 1e-12);
        }
        let mf = max_flow(&c, v[0], v[2]).unwrap();
        let paths = mf.decompose(&c);
        let total: f64 = paths.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_capacities_add() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 1.0)
            .edge("a", "b", 1.0)
            .build()
            .unwrap();
        assert!((max_flow(&c, NodeId(0), NodeId(1)).unwrap().value - 2.0).abs() < 1e-12);
        let rev = max_flow(&c, NodeId(1), NodeId(0)).unwrap();
        assert_eq!(rev.value, 0.0);
        assert_eq!(rev.inverse(), ExtResistance::Infinite);
    }

    #[test]
    fn series_parallel_examples() {
        let par = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 1.0)
            .edge("a", "b", 1.0)
            .build()
            .unwrap();
        let v = series_parallel_reduce(&par, NodeId(0), NodeId(1)).unwrap();
        assert!((v.to_f64() - 0.5).abs() < 1e-15);

        // s/r = 2: (1 + 4)^{1/2}
        let ser = Circuit::builder(1.0, 2.0)
            .edge("a", "c", 1.0)
            .edge("c", "b", 2.0)
            .build()
            .unwrap();
        let v = series_parallel_reduce(&ser, NodeId(0), NodeId(2)).unwrap();
        assert!((v.to_f64() - 5f64.sqrt()).abs() < 1e-14);

        let v = series_parallel_reduce(&triangle(), NodeId(0), NodeId(1)).unwrap();
        assert!((v.to_f64() - 1.2).abs() < 1e-14);
    }

    #[test]
    fn wheatstone_bridge_is_not_series_parallel() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "u", 1.0)
            .edge("a", "w", 2.0)
            .edge("u", "w", 1.0)
            .edge("u", "b", 2.0)
            .edge("w", "b", 1.0)
            .build()
            .unwrap();
        let v = ids(&c, &["a", "b"]);
        assert!(matches!(
            series_parallel_reduce(&c, v[0], v[1]),
            Err(Error::NotSeriesParallel { .. })
        ));
    }

    #[test]
    fn dead_branches_are_ignored() {
        // d is a dead end, e feeds into the sink from an unreachable source, and
        // b->a cannot carry current.
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 2.0)
            .edge("a", "d", 1.0)
            .edge("e", "b", 1.0)
            .edge("b", "a", 1.0)
            .build()
            .unwrap();
        let v = ids(&c, &["a", "b"]);
        assert_eq!(
            series_parallel_reduce(&c, v[0], v[1]).unwrap(),
            ExtResistance::Finite(2.0)
        );
    }
}
