//! Circuit representation: a directed multigraph with per-edge resistances and
//! the two global exponents of the monomial conductance law
//! `current = voltage^r / mu^s` for nonnegative voltage, `0` otherwise.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 0-based node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Dense 0-based edge index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    /// Resistance, strictly positive and finite.
    pub mu: f64,
}

impl Edge {
    /// Conductance `1 / mu`.
    #[inline]
    pub fn lambda(&self) -> f64 {
        1.0 / self.mu
    }
}

/// A weighted digraph together with the exponents `r` and `s`.
///
/// Immutable once built; every modification returns a new circuit.
#[derive(Debug, Clone)]
pub struct Circuit {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    r: f64,
    s: f64,
    // mu^{-s}, derived from `edges` and `s`
    weight: Vec<f64>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
            && self.edges == other.edges
            && self.r == other.r
            && self.s == other.s
    }
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidCircuit(format!(
            "exponent {name} must be positive and finite, got {v}"
        )))
    }
}

impl Circuit {
    /// Builds a circuit from node labels and `(tail, head, mu)` triples.
    pub fn new(
        labels: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        r: f64,
        s: f64,
    ) -> Result<Self> {
        check_exponent("r", r)?;
        check_exponent("s", s)?;
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidCircuit(format!("duplicate node label `{l}`")));
            }
        }
        let n = labels.len();
        let mut list = Vec::new();
        for (i, (t, h, mu)) in edges.into_iter().enumerate() {
            if t >= n || h >= n {
                return Err(Error::InvalidCircuit(format!(
                    "edge {i}: endpoint out of range"
                )));
            }
            if t == h {
                return Err(Error::InvalidCircuit(format!(
                    "edge {i}: self-loop at `{}`",
                    labels[t]
                )));
            }
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::InvalidCircuit(format!(
                    "edge {i}: resistance must be positive and finite, got {mu}"
                )));
            }
            list.push(Edge {
                tail: NodeId(t),
                head: NodeId(h),
                mu,
            });
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (i, e) in list.iter().enumerate() {
            out_adj[e.tail.0].push(i);
            in_adj[e.head.0].push(i);
        }
        let weight = list.iter().map(|e| e.mu.powf(-s)).collect();
        Ok(Self {
            labels,
            index,
            edges: list,
            r,
            s,
            weight,
            out_adj,
            in_adj,
        })
    }

    pub fn builder(r: f64, s: f64) -> CircuitBuilder {
        CircuitBuilder {
            labels: Vec::new(),
            edges: Vec::new(),
            r,
            s,
        }
    }

    #[inline]
    pub fn r(&self) -> f64 {
        self.r
    }

    #[inline]
    pub fn s(&self) -> f64 {
        self.s
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v.0]
    }

    pub fn node(&self, label: &str) -> Result<NodeId> {
        self.index
            .get(label)
            .map(|&i| NodeId(i))
            .ok_or_else(|| Error::UnknownNode(label.to_string()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.labels.len()).map(NodeId)
    }

    /// Edge indices leaving `v`.
    #[inline]
    pub fn out_edges(&self, v: NodeId) -> &[usize] {
        &self.out_adj[v.0]
    }

    /// Edge indices entering `v`.
    #[inline]
    pub fn in_edges(&self, v: NodeId) -> &[usize] {
        &self.in_adj[v.0]
    }

    pub fn check_node(&self, v: NodeId) -> Result<()> {
        if v.0 < self.labels.len() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange(v.0))
        }
    }

    /// Smallest resistance, or `None` for an edgeless circuit.
    pub fn min_mu(&self) -> Option<f64> {
        self.edges.iter().map(|e| e.mu).reduce(f64::min)
    }

    /// Current through edge `e` at the given voltage.
    #[inline]
    pub fn edge_current(&self, e: usize, voltage: f64) -> f64 {
        if voltage > 0.0 {
            let v = if self.r == 1.0 {
                voltage
            } else {
                voltage.powf(self.r)
            };
            v * self.weight[e]
        } else {
            0.0
        }
    }

    /// Per-edge voltages `x_tail - x_head`.
    pub fn voltages(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: x.len(),
            });
        }
        Ok(self
            .edges
            .iter()
            .map(|e| x[e.tail.0] - x[e.head.0])
            .collect())
    }

    /// Per-edge currents induced by potentials `x`.
    pub fn currents(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.voltages(x)?;
        Ok(y.iter()
            .enumerate()
            .map(|(e, &v)| self.edge_current(e, v))
            .collect())
    }

    /// Per-node net outgoing current.
    pub fn fluxes(&self, y_star: &[f64]) -> Result<Vec<f64>> {
        if y_star.len() != self.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: self.edge_count(),
                got: y_star.len(),
            });
        }
        let mut out = vec![0.0; self.node_count()];
        for (e, &c) in self.edges.iter().zip(y_star) {
            out[e.tail.0] += c;
            out[e.head.0] -= c;
        }
        Ok(out)
    }

    /// Whether a directed path `a -> b` exists, optionally avoiding `forbidden`.
    pub fn reachable(&self, a: NodeId, b: NodeId, forbidden: Option<NodeId>) -> Result<bool> {
        self.check_node(a)?;
        self.check_node(b)?;
        if let Some(c) = forbidden {
            self.check_node(c)?;
            if c == a || c == b {
                return Err(Error::ForbiddenEndpoint);
            }
        }
        Ok(self.reach_from(a, forbidden)[b.0])
    }

    /// Nodes reachable from `a` along directed edges (iterative DFS).
    pub fn reach_from(&self, a: NodeId, forbidden: Option<NodeId>) -> Vec<bool> {
        self.search(a, forbidden, &self.out_adj, |e| e.head)
    }

    /// Nodes from which `b` is reachable.
    pub fn reach_to(&self, b: NodeId, forbidden: Option<NodeId>) -> Vec<bool> {
        self.search(b, forbidden, &self.in_adj, |e| e.tail)
    }

    fn search(
        &self,
        start: NodeId,
        forbidden: Option<NodeId>,
        adj: &[Vec<usize>],
        next: impl Fn(&Edge) -> NodeId,
    ) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        if let Some(c) = forbidden {
            seen[c.0] = true;
        }
        seen[start.0] = true;
        let mut stack = vec![start.0];
        while let Some(v) = stack.pop() {
            for &e in &adj[v] {
                let w = next(&self.edges[e]).0;
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if let Some(c) = forbidden {
            seen[c.0] = false;
        }
        seen
    }

    /// Same graph under different exponents.
    pub fn with_exponents(&self, r: f64, s: f64) -> Result<Self> {
        Self::new(self.labels.clone(), self.triples(), r, s)
    }

    /// Same graph with edge `e` given a new resistance.
    pub fn with_mu(&self, e: usize, mu: f64) -> Result<Self> {
        if e >= self.edge_count() {
            return Err(Error::EdgeOutOfRange(e));
        }
        let mut t = self.triples();
        t[e].2 = mu;
        Self::new(self.labels.clone(), t, self.r, self.s)
    }

    /// Same graph with edge `e` removed; later edge indices shift down by one.
    pub fn without_edge(&self, e: usize) -> Result<Self> {
        if e >= self.edge_count() {
            return Err(Error::EdgeOutOfRange(e));
        }
        let mut t = self.triples();
        t.remove(e);
        Self::new(self.labels.clone(), t, self.r, self.s)
    }

    /// Applies `f` to every resistance.
    pub fn map_mu(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let t = self
            .triples()
            .into_iter()
            .enumerate()
            .map(|(i, (a, b, mu))| (a, b, f(i, mu)));
        Self::new(self.labels.clone(), t, self.r, self.s)
    }

    pub fn triples(&self) -> Vec<(usize, usize, f64)> {
        self.edges
            .iter()
            .map(|e| (e.tail.0, e.head.0, e.mu))
            .collect()
    }

    /// Every edge has a reverse partner with equal resistance.
    pub fn is_symmetric(&self) -> bool {
        let mut pending: HashMap<(usize, usize, u64), usize> = HashMap::new();
        for e in &self.edges {
            let rev = (e.head.0, e.tail.0, e.mu.to_bits());
            match pending.get_mut(&rev) {
                Some(c) if *c > 0 => *c -= 1,
                _ => {
                    *pending
                        .entry((e.tail.0, e.head.0, e.mu.to_bits()))
                        .or_insert(0) += 1
                }
            }
        }
        pending.values().all(|&c| c == 0)
    }

    pub fn to_file(&self) -> CircuitFile {
        CircuitFile {
            r: self.r,
            s: self.s,
            nodes: self.labels.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    from: self.labels[e.tail.0].clone(),
                    to: self.labels[e.head.0].clone(),
                    mu: e.mu,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CircuitFile = serde_json::from_str(text)?;
        file.into_circuit()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk circuit document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    pub r: f64,
    pub s: f64,
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub mu: f64,
}

impl CircuitFile {
    pub fn into_circuit(self) -> Result<Circuit> {
        let mut index = HashMap::new();
        for (i, l) in self.nodes.iter().enumerate() {
            if index.insert(l.as_str(), i).is_some() {
                return Err(Error::InvalidCircuit(format!("duplicate node label `{l}`")));
            }
        }
        let mut triples = Vec::with_capacity(self.edges.len());
        for (i, e) in self.edges.iter().enumerate() {
            let lookup = |l: &str| {
                index.get(l).copied().ok_or_else(|| {
                    Error::InvalidCircuit(format!("edge {i}: unknown node label `{l}`"))
                })
            };
            triples.push((lookup(&e.from)?, lookup(&e.to)?, e.mu));
        }
        Circuit::new(self.nodes, triples, self.r, self.s)
    }
}

/// Incremental construction by label.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    labels: Vec<String>,
    edges: Vec<(String, String, f64)>,
    r: f64,
    s: f64,
}

impl CircuitBuilder {
    pub fn node(mut self, label: &str) -> Self {
        if !self.labels.iter().any(|l| l == label) {
            self.labels.push(label.to_string());
        }
        self
    }

    /// Adds an edge, creating unseen endpoint labels in order of appearance.
    pub fn edge(self, from: &str, to: &str, mu: f64) -> Self {
        let mut b = self.node(from).node(to);
        b.edges.push((from.to_string(), to.to_string(), mu));
        b
    }

    pub fn build(self) -> Result<Circuit> {
        CircuitFile {
            r: self.r,
            s: self.s,
            nodes: self.labels,
            edges: self
                .edges
                .into_iter()
                .map(|(from, to, mu)| EdgeRecord { from, to, mu })
                .collect(),
        }
        .into_circuit()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(r: f64, s: f64, mu: f64) -> Circuit {
        Circuit::builder(r, s).edge("a", "b", mu).build().unwrap()
    }

    #[test]
    fn edge_current_examples() {
        assert_eq!(unit(1.0, 1.0, 1.0).edge_current(0, 0.5), 0.5);
        assert_eq!(unit(2.0, 1.0, 2.0).edge_current(0, 3.0), 4.5);
        assert_eq!(unit(0.7, 3.0, 5.0).edge_current(0, -2.0), 0.0);
        assert_eq!(unit(0.7, 3.0, 5.0).edge_current(0, 0.0), 0.0);
    }

    #[test]
    fn voltages_and_fluxes() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 1.0)
            .edge("b", "a", 1.0)
            .build()
            .unwrap();
        assert_eq!(c.voltages(&[1.0, 0.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(c.voltages(&[3.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            c.voltages(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));

        let single = unit(1.0, 1.0, 1.0);
        assert_eq!(single.fluxes(&[1.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(single.fluxes(&[0.0]).unwrap(), vec![0.0, 0.0]);

        let tri = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 1.0)
            .edge("b", "c", 1.0)
            .edge("c", "a", 1.0)
            .build()
            .unwrap();
        assert_eq!(tri.fluxes(&[1.0, 1.0, 1.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn reachability_with_forbidden_node() {
        let tri = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 3.0)
            .edge("a", "c", 1.0)
            .edge("c", "b", 1.0)
            .build()
            .unwrap();
        let (a, b, c) = (
            tri.node("a").unwrap(),
            tri.node("b").unwrap(),
            tri.node("c").unwrap(),
        );
        assert!(tri.reachable(a, b, Some(c)).unwrap());
        assert!(!tri.reachable(b, a, None).unwrap());
        assert!(matches!(
            tri.reachable(a, b, Some(a)),
            Err(Error::ForbiddenEndpoint)
        ));

        let path = Circuit::builder(1.0, 1.0)
            .edge("a", "c", 1.0)
            .edge("c", "b", 1.0)
            .build()
            .unwrap();
        let (a, b, c) = (
            path.node("a").unwrap(),
            path.node("b").unwrap(),
            path.node("c").unwrap(),
        );
        assert!(!path.reachable(a, b, Some(c)).unwrap());
        assert!(path.reachable(a, b, None).unwrap());

        let isolated = Circuit::builder(1.0, 1.0)
            .node("a")
            .node("b")
            .build()
            .unwrap();
        assert!(!isolated.reachable(NodeId(0), NodeId(1), None).unwrap());
    }

    #[test]
    fn deep_path_reachability_does_not_overflow() {
        let n = 200_000;
        let labels = (0..n).map(|i| format!("v{i}")).collect();
        let c = Circuit::new(labels, (0..n - 1).map(|i| (i, i + 1, 1.0)), 1.0, 1.0).unwrap();
        assert!(c.reachable(NodeId(0), NodeId(n - 1), None).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let err = Circuit::from_json(
            r#"{"r":1,"s":1,"nodes":["a","b"],"edges":[{"from":"a","to":"b","mu":1},{"from":"b","to":"a","mu":0}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("edge 1"), "{err}");

        assert!(Circuit::from_json(r#"{"r":1,"s":1,"nodes":["a","a"],"edges":[]}"#).is_err());
        assert!(Circuit::from_json(r#"{"r":1,"s":1,"nodes":["a"],"edges":[],"extra":2}"#).is_err());
        assert!(Circuit::from_json(
            r#"{"r":1,"s":1,"nodes":["a"],"edges":[{"from":"a","to":"a","mu":1}]}"#
        )
        .is_err());
        assert!(Circuit::from_json(r#"{"r":0,"s":1,"nodes":["a"],"edges":[]}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = Circuit::builder(0.5, 2.0)
            .edge("x", "y", 0.3)
            .edge("y", "x", 0.3)
            .edge("x", "y", 1.7)
            .build()
            .unwrap();
        let back = Circuit::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        for (e, edge) in back.edges().iter().enumerate() {
            assert_eq!(edge.lambda() * edge.mu, 1.0, "edge {e}");
        }
    }

    #[test]
    fn symmetry_detection() {
        let sym = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 2.0)
            .edge("b", "a", 2.0)
            .build()
            .unwrap();
        assert!(sym.is_symmetric());
        let asym = unit(1.0, 1.0, 1.0);
        assert!(!asym.is_symmetric());
    }
}
