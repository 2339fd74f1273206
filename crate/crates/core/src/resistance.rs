//! Effective resistances between ordered node pairs and the checks built on
//! them: the triangle inequality in its `mu^{s/r}` form with the cut-vertex
//! equality condition, the ultrametric inequality, and monotonicity under
//! changes of a single edge.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, NodeId};
use crate::dissipation::energy_solve;
use crate::error::{Error, Result};
use crate::ext::{format_sig, parse_sentinel, ExtReal, ExtResistance};
use crate::msa::{msa_solve, Solution, SolveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Msa,
    Energy,
}

impl Solver {
    pub fn solve(
        self,
        circuit: &Circuit,
        a: NodeId,
        b: NodeId,
        xa0: f64,
        xb0: f64,
        cfg: &SolveConfig,
    ) -> Result<Solution> {
        match self {
            Solver::Msa => msa_solve(circuit, a, b, xa0, xb0, cfg),
            Solver::Energy => energy_solve(circuit, a, b, xa0, xb0, cfg),
        }
    }
}

/// Converts a pole current at unit voltage into a resistance `current^{-1/s}`.
pub fn resistance_from_current(circuit: &Circuit, current: f64) -> Result<ExtResistance> {
    if current > 0.0 {
        Ok(ExtResistance::Finite(current.powf(-1.0 / circuit.s())))
    } else {
        Err(Error::CurrentUnderflow)
    }
}

/// Effective resistance from `a` to `b`, plus the unit-voltage solution when a
/// solve was needed.
pub fn resistance_and_solution(
    circuit: &Circuit,
    a: NodeId,
    b: NodeId,
    cfg: &SolveConfig,
    solver: Solver,
) -> Result<(ExtResistance, Option<Solution>)> {
    circuit.check_node(a)?;
    circuit.check_node(b)?;
    if a == b {
        return Ok((ExtResistance::Zero, None));
    }
    if !circuit.reachable(a, b, None)? {
        return Ok((ExtResistance::Infinite, None));
    }
    let sol = solver.solve(circuit, a, b, 1.0, 0.0, cfg)?;
    let mu = resistance_from_current(circuit, sol.pole_current)?;
    Ok((mu, Some(sol)))
}

/// Effective resistance `mu_{a,b}` solved with the pumping method.
pub fn effective_resistance(
    circuit: &Circuit,
    a: NodeId,
    b: NodeId,
    cfg: &SolveConfig,
) -> Result<ExtResistance> {
    resistance_and_solution(circuit, a, b, cfg, Solver::Msa).map(|(mu, _)| mu)
}

/// All ordered-pair resistances, rows indexed by source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResistanceMatrix {
    pub nodes: Vec<String>,
    pub entries: Vec<Vec<ExtResistance>>,
}

impl ResistanceMatrix {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> ExtResistance {
        self.entries[a][b]
    }

    /// Largest relative asymmetry over finite pairs, or `None` when some pair
    /// is finite one way and infinite the other.
    pub fn max_asymmetry(&self) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..i {
                match (self.get(i, j), self.get(j, i)) {
                    (ExtResistance::Finite(x), ExtResistance::Finite(y)) => {
                        worst = worst.max((x - y).abs() / x.max(y));
                    }
                    (p, q) if p == q => {}
                    _ => return None,
                }
            }
        }
        Some(worst)
    }

    pub fn is_symmetric(&self, rel: f64) -> bool {
        self.max_asymmetry().is_some_and(|w| w <= rel)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.entries.len() != n || self.entries.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidCircuit("matrix is not square".into()));
        }
        for i in 0..n {
            if self.entries[i][i] != ExtResistance::Zero {
                return Err(Error::InvalidCircuit(format!(
                    "diagonal entry {i} is not 0"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// CSV with a header row of target labels; values at 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.nodes.iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.entries.iter().enumerate() {
            let mut rec = vec![self.nodes[i].clone()];
            rec.extend(row.iter().map(|v| match v {
                ExtResistance::Finite(x) => format_sig(*x, 12),
                other => other.to_string(),
            }));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let nodes: Vec<String> = rd.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut entries = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .skip(1)
                .enumerate()
                .map(|(j, f)| {
                    parse_sentinel(f).ok_or_else(|| {
                        Error::InvalidCircuit(format!(
                            "row {}, column {}: bad value `{f}`",
                            i + 1,
                            j + 1
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            entries.push(row);
        }
        let m = Self { nodes, entries };
        m.validate()?;
        Ok(m)
    }
}

/// Every solve behind a resistance matrix, in row-major pair order.
#[derive(Debug, Clone)]
pub struct MatrixSolve {
    pub matrix: ResistanceMatrix,
    pub solutions: Vec<Solution>,
}

/// Resistance matrix with the individual solutions kept for inspection.
pub fn resistance_matrix_solve(
    circuit: &Circuit,
    cfg: &SolveConfig,
    solver: Solver,
) -> Result<MatrixSolve> {
    let n = circuit.node_count();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let results: Vec<_> = pairs
        .par_iter()
        .map(|&(a, b)| resistance_and_solution(circuit, NodeId(a), NodeId(b), cfg, solver))
        .collect();

    let mut entries = vec![vec![ExtResistance::Zero; n]; n];
    let mut solutions = Vec::new();
    let mut failures = Vec::new();
    for (&(a, b), res) in pairs.iter().zip(results) {
        match res {
            Ok((mu, sol)) => {
                entries[a][b] = mu;
                solutions.extend(sol);
            }
            Err(e) => failures.push(Error::Pair {
                a,
                b,
                source: Box::new(e),
            }),
        }
    }
    if !failures.is_empty() {
        return Err(Error::PairFailures(failures));
    }
    Ok(MatrixSolve {
        matrix: ResistanceMatrix {
            nodes: circuit.labels().to_vec(),
            entries,
        },
        solutions,
    })
}

pub fn resistance_matrix(circuit: &Circuit, cfg: &SolveConfig) -> Result<ResistanceMatrix> {
    resistance_matrix_solve(circuit, cfg, Solver::Msa).map(|m| m.matrix)
}

/// One ordered triple of the triangle check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleReport {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    /// `mu_{a,b}^{s/r}`
    pub lhs: ExtResistance,
    /// `mu_{a,c}^{s/r} + mu_{c,b}^{s/r}`
    pub rhs: ExtResistance,
    pub slack: ExtReal,
    /// Every directed `a -> b` path passes through `c` (vacuously true when
    /// there is no such path).
    pub cut_vertex: bool,
    /// Numerical equality: `|slack| <= tol * max(1, rhs)`.
    pub equality: bool,
    pub violated: bool,
    /// Numerical equality class disagrees with `cut_vertex`.
    pub misclassified: bool,
}

impl TriangleReport {
    pub fn passed(&self) -> bool {
        !self.violated && !self.misclassified
    }
}

/// Checks `mu_{a,b}^{s/r} <= mu_{a,c}^{s/r} + mu_{c,b}^{s/r}` on every ordered
/// triple of distinct nodes and classifies equality against the cut-vertex
/// condition.
pub fn triangle_check(
    matrix: &ResistanceMatrix,
    circuit: &Circuit,
    tol: f64,
) -> Vec<TriangleReport> {
    let n = matrix.len();
    let p = circuit.s() / circuit.r();
    let mut out = Vec::new();
    for a in 0..n {
        let reach_a = circuit.reach_from(NodeId(a), None);
        for b in (0..n).filter(|&b| b != a) {
            for c in (0..n).filter(|&c| c != a && c != b) {
                let lhs = matrix.get(a, b).powf(p);
                let rhs = matrix.get(a, c).powf(p) + matrix.get(c, b).powf(p);
                let slack = rhs.minus(lhs);
                let cut_vertex = !reach_a[b]
                    || !circuit
                        .reachable(NodeId(a), NodeId(b), Some(NodeId(c)))
                        .expect("distinct valid nodes");
                let (equality, violated) = match slack {
                    ExtReal::Finite(sl) => {
                        let band = tol * rhs.finite().unwrap_or(0.0).max(1.0);
                        (sl.abs() <= band, sl < -tol)
                    }
                    ExtReal::PosInf => (false, false),
                    ExtReal::NegInf => (false, true),
                };
                out.push(TriangleReport {
                    a,
                    b,
                    c,
                    lhs,
                    rhs,
                    slack,
                    cut_vertex,
                    equality,
                    violated,
                    misclassified: equality != cut_vertex,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UltraViolation {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub lhs: ExtResistance,
    pub max: ExtResistance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UltrametricReport {
    pub triples: usize,
    /// Triples where `mu_{a,b}` matches `max(mu_{a,c}, mu_{c,b})` within tolerance.
    pub equalities: usize,
    pub violations: Vec<UltraViolation>,
}

impl UltrametricReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `mu_{a,b} <= max(mu_{a,c}, mu_{c,b}) * (1 + tol)` on every ordered
/// triple of distinct nodes.
pub fn ultrametric_check(matrix: &ResistanceMatrix, tol: f64) -> UltrametricReport {
    let n = matrix.len();
    let mut report = UltrametricReport {
        triples: 0,
        equalities: 0,
        violations: Vec::new(),
    };
    for a in 0..n {
        for b in (0..n).filter(|&b| b != a) {
            for c in (0..n).filter(|&c| c != a && c != b) {
                report.triples += 1;
                let lhs = matrix.get(a, b);
                let max = matrix.get(a, c).max(matrix.get(c, b));
                let ok = match (lhs, max) {
                    (_, ExtResistance::Infinite) => true,
                    (ExtResistance::Infinite, _) => false,
                    (l, m) => l.to_f64() <= m.to_f64() * (1.0 + tol),
                };
                let eq = match (lhs, max) {
                    (ExtResistance::Infinite, ExtResistance::Infinite) => true,
                    (l, m) => (l.to_f64() - m.to_f64()).abs() <= tol * m.to_f64(),
                };
                if eq {
                    report.equalities += 1;
                }
                if !ok {
                    report.violations.push(UltraViolation { a, b, c, lhs, max });
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub before: ExtResistance,
    pub after: ExtResistance,
    /// The change moved the resistance in the permitted direction (within `1e-8` relative).
    pub holds: bool,
}

/// Recomputes `mu_{a,b}` after replacing the resistance of `edge` by `mu_new`
/// (`Infinite` deletes the edge).
pub fn monotonicity_check(
    circuit: &Circuit,
    edge: usize,
    mu_new: ExtResistance,
    a: NodeId,
    b: NodeId,
    cfg: &SolveConfig,
) -> Result<MonotoneReport> {
    if edge >= circuit.edge_count() {
        return Err(Error::EdgeOutOfRange(edge));
    }
    let old = circuit.edge(edge).mu;
    let modified = match mu_new {
        ExtResistance::Finite(m) => circuit.with_mu(edge, m)?,
        ExtResistance::Infinite => circuit.without_edge(edge)?,
        ExtResistance::Zero => {
            return Err(Error::InvalidCircuit(
                "edge resistance must be positive".into(),
            ))
        }
    };
    let before = effective_resistance(circuit, a, b, cfg)?;
    let after = effective_resistance(&modified, a, b, cfg)?;
    let new = mu_new.to_f64();
    const REL: f64 = 1e-8;
    let le = |x: ExtResistance, y: ExtResistance| match (x, y) {
        (_, ExtResistance::Infinite) => true,
        (ExtResistance::Infinite, _) => false,
        (x, y) => x.to_f64() <= y.to_f64() * (1.0 + REL),
    };
    let holds = match new.partial_cmp(&old) {
        Some(std::cmp::Ordering::Less) => le(after, before),
        Some(std::cmp::Ordering::Greater) => le(before, after),
        _ => le(after, before) && le(before, after),
    };
    Ok(MonotoneReport {
        before,
        after,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Circuit {
        Circuit::builder(1.0, 1.0)
            .edge("a", "c", 1.0)
            .edge("c", "b", 1.0)
            .edge("a", "b", 3.0)
            .build()
            .unwrap()
    }

    fn close(x: ExtResistance, want: f64, tol: f64) -> bool {
        (x.to_f64() - want).abs() <= tol * want
    }

    #[test]
    fn single_edge_resistance_is_its_mu() {
        for (r, s) in [(1.0, 1.0), (0.5, 2.0), (3.0, 0.7)] {
            let c = Circuit::builder(r, s).edge("a", "b", 2.5).build().unwrap();
            let mu =
                effective_resistance(&c, NodeId(0), NodeId(1), &SolveConfig::default()).unwrap();
            assert!(close(mu, 2.5, 1e-12), "{mu:?}");
            assert_eq!(
                effective_resistance(&c, NodeId(1), NodeId(0), &SolveConfig::default()).unwrap(),
                ExtResistance::Infinite
            );
        }
    }

    #[test]
    fn triangle_ohm_resistance() {
        let c = triangle();
        let (a, b) = (c.node("a").unwrap(), c.node("b").unwrap());
        let mu = effective_resistance(&c, a, b, &SolveConfig::default()).unwrap();
        assert!(close(mu, 1.2, 1e-9), "{mu:?}");
    }

    #[test]
    fn symmetric_unit_path_matrix() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "v", 1.0)
            .edge("v", "a", 1.0)
            .edge("v", "b", 1.0)
            .edge("b", "v", 1.0)
            .build()
            .unwrap();
        let m = resistance_matrix(&c, &SolveConfig::default()).unwrap();
        let (a, b) = (c.node("a").unwrap().0, c.node("b").unwrap().0);
        assert!(close(m.get(a, b), 2.0, 1e-9));
        assert!(close(m.get(b, a), 2.0, 1e-9));
        assert!(m.is_symmetric(1e-9));
    }

    #[test]
    fn single_node_matrix() {
        let c = Circuit::builder(1.0, 1.0).node("a").build().unwrap();
        let m = resistance_matrix(&c, &SolveConfig::default()).unwrap();
        assert_eq!(m.entries, vec![vec![ExtResistance::Zero]]);
    }

    #[test]
    fn triangle_check_series_and_strict() {
        let c = triangle();
        let m = resistance_matrix(&c, &SolveConfig::default()).unwrap();
        let reports = triangle_check(&m, &c, 1e-6);
        assert!(reports.iter().all(TriangleReport::passed));
        let (a, b, cc) = (0, 2, 1);
        assert_eq!(
            (c.label(NodeId(a)), c.label(NodeId(b)), c.label(NodeId(cc))),
            ("a", "b", "c")
        );
        let t = reports
            .iter()
            .find(|t| (t.a, t.b, t.c) == (a, b, cc))
            .unwrap();
        assert!(!t.cut_vertex && !t.equality);

        let series = Circuit::builder(0.5, 1.5)
            .edge("a", "c", 1.0)
            .edge("c", "b", 2.0)
            .build()
            .unwrap();
        let m = resistance_matrix(&series, &SolveConfig::default()).unwrap();
        let reports = triangle_check(&m, &series, 1e-6);
        let t = reports
            .iter()
            .find(|t| (t.a, t.b, t.c) == (0, 2, 1))
            .unwrap();
        assert!(t.cut_vertex && t.equality, "{t:?}");
        assert!(reports.iter().all(TriangleReport::passed));
    }

    #[test]
    fn unreachable_middle_node_gives_infinite_rhs() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 1.0)
            .node("c")
            .build()
            .unwrap();
        let m = resistance_matrix(&c, &SolveConfig::default()).unwrap();
        let reports = triangle_check(&m, &c, 1e-6);
        let t = reports
            .iter()
            .find(|t| (t.a, t.b, t.c) == (0, 1, 2))
            .unwrap();
        assert_eq!(t.rhs, ExtResistance::Infinite);
        assert_eq!(t.slack, ExtReal::PosInf);
        assert!(t.passed());
    }

    #[test]
    fn ultrametric_on_small_matrices() {
        let n = |v: f64| ExtResistance::Finite(v);
        let z = ExtResistance::Zero;
        let flat = ResistanceMatrix {
            nodes: vec!["a".into(), "b".into(), "c".into()],
            entries: vec![
                vec![z, n(1.0), n(1.0)],
                vec![n(1.0), z, n(1.0)],
                vec![n(1.0), n(1.0), z],
            ],
        };
        let rep = ultrametric_check(&flat, 0.0);
        assert!(rep.holds());
        assert_eq!(rep.equalities, rep.triples);

        let c = triangle();
        let m = resistance_matrix(&c, &SolveConfig::default()).unwrap();
        let rep = ultrametric_check(&m, 0.05);
        // 6/5 > max(1, 1)
        assert!(!rep.holds());
        assert!(rep.violations.iter().any(|v| (v.a, v.b, v.c) == (0, 2, 1)));
    }

    #[test]
    fn monotonicity_examples() {
        let c = triangle();
        let (a, b) = (c.node("a").unwrap(), c.node("b").unwrap());
        let cfg = SolveConfig::default();
        let halved = monotonicity_check(&c, 2, ExtResistance::Finite(1.5), a, b, &cfg).unwrap();
        assert!(close(halved.after, 6.0 / 7.0, 1e-9) && halved.holds);
        let deleted = monotonicity_check(&c, 2, ExtResistance::Infinite, a, b, &cfg).unwrap();
        assert!(close(deleted.after, 2.0, 1e-9) && deleted.holds);
        let same = monotonicity_check(&c, 2, ExtResistance::Finite(3.0), a, b, &cfg).unwrap();
        assert_eq!(same.before, same.after);
        assert!(same.holds);
        assert!(matches!(
            monotonicity_check(&c, 7, ExtResistance::Finite(1.0), a, b, &cfg),
            Err(Error::EdgeOutOfRange(7))
        ));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 0.3)
            .node("c")
            .build()
            .unwrap();
        let m = resistance_matrix(&c, &SolveConfig::default()).unwrap();
        let json = m.to_json().unwrap();
        assert_eq!(ResistanceMatrix::from_json(&json).unwrap(), m);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("inf"));
        let back = ResistanceMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.get(0, 2), ExtResistance::Infinite);
        assert!(close(back.get(0, 1), 0.3, 1e-11));
    }
}
