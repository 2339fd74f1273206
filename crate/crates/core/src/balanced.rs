//! Balanced flows from repeated critical cuts.
//!
//! A cut `(L, R)` has deficiency `D = sum_{v in L} b_v` and capacity
//! `Lambda = sum lambda_e` over edges from `L` to `R`. The critical cut maximizes
//! `D / Lambda`; its edges are saturated at `R * lambda_e`, deleted, and the
//! procedure repeats on the residual boundary.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{Circuit, NodeId};
use crate::error::{Error, Result};

/// Exhaustive cut enumeration is exponential; refuse beyond this.
pub const MAX_CUT_NODES: usize = 16;
/// Residual boundary treated as zero.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Relative band within which cut ratios count as tied.
pub const TIE_REL: f64 = 1e-12;

/// Net boundary flux per node; must sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    values: Vec<f64>,
}

impl Boundary {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "boundary fluxes must be finite".into(),
            ));
        }
        let sum: f64 = values.iter().sum();
        let gross: f64 = values.iter().map(|v| v.abs()).sum();
        if sum.abs() > 1e-12 * gross.max(1.0) {
            return Err(Error::UnbalancedBoundary(sum));
        }
        Ok(Self { values })
    }

    /// Checks the length against `circuit`.
    pub fn for_circuit(circuit: &Circuit, values: Vec<f64>) -> Result<Self> {
        if values.len() != circuit.node_count() {
            return Err(Error::DimensionMismatch {
                expected: circuit.node_count(),
                got: values.len(),
            });
        }
        Self::new(values)
    }

    /// JSON object `{label: flux}`; unlisted nodes get 0.
    pub fn from_json(circuit: &Circuit, text: &str) -> Result<Self> {
        let map: BTreeMap<String, f64> = serde_json::from_str(text)?;
        let mut values = vec![0.0; circuit.node_count()];
        for (label, v) in map {
            values[circuit.node(&label)?.index()] = v;
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.abs() <= RESIDUAL_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum CutRatio {
    Finite(f64),
    /// Positive deficiency with no outgoing capacity.
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cut {
    pub left: Vec<NodeId>,
    pub right: Vec<NodeId>,
    pub deficiency: f64,
    pub capacity: f64,
    pub ratio: CutRatio,
    /// Edges crossing from `left` to `right`.
    pub edges: Vec<usize>,
}

impl Cut {
    pub fn contains(&self, v: NodeId) -> bool {
        self.left.contains(&v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub cut: Cut,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalancedFlow {
    /// Current on every edge; edges never saturated carry 0.
    pub flow: Vec<f64>,
    pub stages: Vec<Stage>,
}

impl BalancedFlow {
    pub fn ratios(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.ratio).collect()
    }

    /// Largest `|out - in - b_v|` over nodes.
    pub fn conservation_error(&self, circuit: &Circuit, boundary: &Boundary) -> f64 {
        let mut net = vec![0.0; circuit.node_count()];
        for (e, edge) in circuit.edges().iter().enumerate() {
            net[edge.tail.index()] += self.flow[e];
            net[edge.head.index()] -= self.flow[e];
        }
        net.iter()
            .zip(boundary.values())
            .map(|(n, b)| (n - b).abs())
            .fold(0.0, f64::max)
    }

    /// `y_e / lambda_e`.
    pub fn utilization(&self, circuit: &Circuit) -> Vec<f64> {
        circuit
            .edges()
            .iter()
            .zip(&self.flow)
            .map(|(e, y)| y / e.lambda())
            .collect()
    }
}

fn check_size(circuit: &Circuit) -> Result<()> {
    let n = circuit.node_count();
    if n > MAX_CUT_NODES {
        return Err(Error::NodeBudget {
            limit: MAX_CUT_NODES,
            nodes: n,
        });
    }
    if n < 2 {
        return Err(Error::InvalidConfig("cuts need at least two nodes".into()));
    }
    Ok(())
}

/// `(deficiency, capacity)` of the cut whose left side is `mask`.
fn measure(circuit: &Circuit, active: &[bool], b: &[f64], mask: u32) -> (f64, f64) {
    let inside = |v: NodeId| mask >> v.index() & 1 == 1;
    let d: f64 = (0..b.len())
        .filter(|&v| mask >> v & 1 == 1)
        .map(|v| b[v])
        .sum();
    let cap: f64 = circuit
        .edges()
        .iter()
        .zip(active)
        .filter(|(e, &on)| on && inside(e.tail) && !inside(e.head))
        .map(|(e, _)| e.lambda())
        .sum();
    (d, cap)
}

/// Sort key; `None` for cuts with no capacity and nonpositive deficiency,
/// which can never be critical.
fn key(d: f64, cap: f64) -> Option<f64> {
    if cap > 0.0 {
        Some(d / cap)
    } else if d > RESIDUAL_TOL {
        Some(f64::INFINITY)
    } else if d >= -RESIDUAL_TOL {
        Some(0.0)
    } else {
        None
    }
}

fn critical(circuit: &Circuit, active: &[bool], b: &[f64]) -> Cut {
    let n = circuit.node_count();
    let full = (1u32 << n) - 1;
    let ratio = |mask: u32| {
        let (d, cap) = measure(circuit, active, b, mask);
        key(d, cap)
    };
    // Left side is a nonempty proper subset.
    let best = (1..full)
        .into_par_iter()
        .filter_map(ratio)
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let threshold = if best.is_infinite() {
        best
    } else {
        best - TIE_REL * best.abs()
    };
    // Smallest mask among the ties keeps the choice deterministic.
    let mask = (1..full)
        .into_par_iter()
        .find_first(|&m| ratio(m).is_some_and(|r| r >= threshold))
        .expect("some cut attains the maximum");

    let (deficiency, capacity) = measure(circuit, active, b, mask);
    let (left, right): (Vec<NodeId>, Vec<NodeId>) =
        (0..n).map(NodeId).partition(|v| mask >> v.index() & 1 == 1);
    let edges = circuit
        .edges()
        .iter()
        .enumerate()
        .filter(|(i, e)| {
            active[*i] && mask >> e.tail.index() & 1 == 1 && mask >> e.head.index() & 1 == 0
        })
        .map(|(i, _)| i)
        .collect();
    Cut {
        left,
        right,
        deficiency,
        capacity,
        ratio: if best.is_infinite() {
            CutRatio::Infinite
        } else {
            CutRatio::Finite(deficiency / capacity.max(f64::MIN_POSITIVE))
        },
        edges,
    }
}

/// Cut maximizing deficiency over capacity, by exhaustive enumeration.
pub fn critical_cut(circuit: &Circuit, boundary: &Boundary) -> Result<Cut> {
    check_size(circuit)?;
    if boundary.values().len() != circuit.node_count() {
        return Err(Error::DimensionMismatch {
            expected: circuit.node_count(),
            got: boundary.values().len(),
        });
    }
    Ok(critical(
        circuit,
        &vec![true; circuit.edge_count()],
        boundary.values(),
    ))
}

pub fn balanced_flow(circuit: &Circuit, boundary: &Boundary) -> Result<BalancedFlow> {
    check_size(circuit)?;
    if boundary.values().len() != circuit.node_count() {
        return Err(Error::DimensionMismatch {
            expected: circuit.node_count(),
            got: boundary.values().len(),
        });
    }
    let m = circuit.edge_count();
    let mut active = vec![true; m];
    let mut residual = boundary.values().to_vec();
    let mut flow = vec![0.0; m];
    let mut stages = Vec::new();

    while !residual.iter().all(|v| v.abs() <= RESIDUAL_TOL) {
        // every stage deletes at least one edge
        if stages.len() >= m {
            return Err(Error::NonTerminating(stages.len()));
        }
        let cut = critical(circuit, &active, &residual);
        let ratio = match cut.ratio {
            CutRatio::Infinite => {
                return Err(Error::NoSatisfactoryFlow {
                    left: cut.left.iter().map(|v| v.index()).collect(),
                    deficiency: cut.deficiency,
                })
            }
            CutRatio::Finite(r) => r,
        };
        if cut.edges.is_empty() || ratio <= 0.0 {
            return Err(Error::NonTerminating(stages.len()));
        }
        for &e in &cut.edges {
            let edge = &circuit.edges()[e];
            let y = ratio * edge.lambda();
            flow[e] = y;
            active[e] = false;
            residual[edge.tail.index()] -= y;
            residual[edge.head.index()] += y;
        }
        stages.push(Stage { cut, ratio });
    }
    Ok(BalancedFlow { flow, stages })
}

/// Ratios of the successive critical cuts; nonincreasing in exact arithmetic.
pub fn ratio_sequence(circuit: &Circuit, boundary: &Boundary) -> Result<Vec<f64>> {
    if boundary.is_zero() {
        return Ok(Vec::new());
    }
    balanced_flow(circuit, boundary).map(|f| f.ratios())
}
