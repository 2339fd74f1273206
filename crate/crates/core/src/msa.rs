//! Monotone potential pumping for two-pole circuits.
//!
//! Both poles are held fixed; every other node starts at the sink potential.
//! Nodes are visited cyclically and each node with negative net outflow has
//! its potential raised to the first point where its flux reaches zero. The
//! potentials only ever increase, and the iteration stops after a full sweep
//! in which no node moved.

use serde::Serialize;

use crate::circuit::{Circuit, NodeId};
use crate::error::{Error, Result};

/// A node counts as balanced once its deficit is below this fraction of the
/// gross current through it, even if the absolute tolerance is not reached.
pub const IMBALANCE_REL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 2200;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum SweepOrder {
    /// Interior nodes in ascending index order.
    #[default]
    Default,
    /// Explicit permutation of the interior nodes.
    Explicit(Vec<NodeId>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Absolute threshold on interior fluxes; `None` picks
    /// `1e-10 * current(min-mu edge, xa0 - xb0)`.
    pub flux_tol: Option<f64>,
    /// Root bracket width; `None` picks `1e-12 * (xa0 - xb0)`.
    pub bisect_tol: Option<f64>,
    pub max_sweeps: usize,
    pub sweep_order: SweepOrder,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            flux_tol: None,
            bisect_tol: None,
            max_sweeps: 100_000,
            sweep_order: SweepOrder::Default,
        }
    }
}

/// Tolerances after resolving the automatic defaults for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub flux_tol: f64,
    pub bisect_tol: f64,
}

impl SolveConfig {
    pub fn with_order(mut self, order: Vec<NodeId>) -> Self {
        self.sweep_order = SweepOrder::Explicit(order);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(t) if !(t.is_finite() && t > 0.0) => Err(Error::InvalidConfig(format!(
                "{name} must be positive, got {t}"
            ))),
            _ => Ok(()),
        };
        positive("flux_tol", self.flux_tol)?;
        positive("bisect_tol", self.bisect_tol)?;
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, circuit: &Circuit, xa0: f64, xb0: f64) -> Tolerances {
        let span = (xa0 - xb0).abs();
        let span = if span > 0.0 { span } else { 1.0 };
        let flux_tol = self.flux_tol.unwrap_or_else(|| {
            let scale = circuit
                .edges()
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.mu.total_cmp(&y.1.mu))
                .map(|(e, _)| circuit.edge_current(e, span))
                .filter(|c| *c > 0.0)
                .unwrap_or(1.0);
            1e-10 * scale
        });
        let bisect_tol = self.bisect_tol.unwrap_or(1e-12 * span);
        Tolerances {
            flux_tol,
            bisect_tol,
        }
    }
}

/// A solved two-pole circuit: potentials, voltages, currents and fluxes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub source: NodeId,
    pub sink: NodeId,
    pub xa: f64,
    pub xb: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_star: Vec<f64>,
    pub x_star: Vec<f64>,
    /// Net outflow at the source.
    pub pole_current: f64,
    /// Largest interior |flux|.
    pub residual: f64,
    pub sweeps_used: usize,
    pub flux_tol: f64,
}

impl Solution {
    /// Derives voltages, currents and fluxes from potentials.
    pub fn from_potentials(
        circuit: &Circuit,
        a: NodeId,
        b: NodeId,
        x: Vec<f64>,
        sweeps_used: usize,
        flux_tol: f64,
    ) -> Result<Self> {
        let y = circuit.voltages(&x)?;
        let y_star: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(e, &v)| circuit.edge_current(e, v))
            .collect();
        let x_star = circuit.fluxes(&y_star)?;
        let residual = x_star
            .iter()
            .enumerate()
            .filter(|&(v, _)| v != a.0 && v != b.0)
            .map(|(_, f)| f.abs())
            .fold(0.0, f64::max);
        Ok(Self {
            source: a,
            sink: b,
            xa: x[a.0],
            xb: x[b.0],
            pole_current: x_star[a.0],
            x,
            y,
            y_star,
            x_star,
            residual,
            sweeps_used,
            flux_tol,
        })
    }

    /// `sum_v x_v x*_v` and `sum_e y_e y*_e`; equal for any potentials and flows.
    pub fn duality_pair(&self) -> (f64, f64) {
        let node: f64 = self.x.iter().zip(&self.x_star).map(|(a, b)| a * b).sum();
        let edge: f64 = self.y.iter().zip(&self.y_star).map(|(a, b)| a * b).sum();
        (node, edge)
    }

    /// Checks the structural invariants of a converged solve, returning a
    /// description of the first violation.
    pub fn verify(&self, circuit: &Circuit) -> std::result::Result<(), String> {
        let (lo, hi) = (self.xa.min(self.xb), self.xa.max(self.xb));
        if self.xa > self.xb {
            for (v, &p) in self.x.iter().enumerate() {
                if p < lo || p > hi {
                    return Err(format!("potential {p} at node {v} outside [{lo}, {hi}]"));
                }
            }
        }
        if self.residual > self.flux_tol {
            return Err(format!(
                "interior residual {:e} above tolerance {:e}",
                self.residual, self.flux_tol
            ));
        }
        let sum: f64 = self.x_star.iter().sum();
        let scale = self.y_star.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        if sum.abs() > 1e-12 * scale {
            return Err(format!("fluxes sum to {sum:e}"));
        }
        if (self.pole_current + self.x_star[self.sink.0]).abs()
            > self.flux_tol * circuit.node_count() as f64 + 1e-12 * scale
        {
            return Err("pole fluxes do not cancel".into());
        }
        if self.y_star.iter().any(|&c| c < 0.0) {
            return Err("negative current".into());
        }
        Ok(())
    }
}

/// Per-sweep view handed to observers of [`msa_solve_observed`].
#[derive(Debug, Clone)]
pub struct SweepSnapshot<'a> {
    pub sweep: usize,
    pub x: &'a [f64],
    pub source_flux: f64,
    pub moved: usize,
}

struct NodeBalance {
    flux: f64,
    gross: f64,
}

fn balance_at(circuit: &Circuit, x: &[f64], v: usize, xv: f64) -> NodeBalance {
    let mut out = 0.0;
    let mut inflow = 0.0;
    for &e in circuit.out_edges(NodeId(v)) {
        out += circuit.edge_current(e, xv - x[circuit.edge(e).head.0]);
    }
    for &e in circuit.in_edges(NodeId(v)) {
        inflow += circuit.edge_current(e, x[circuit.edge(e).tail.0] - xv);
    }
    NodeBalance {
        flux: out - inflow,
        gross: out + inflow,
    }
}

fn deficit_threshold(flux_tol: f64, gross: f64) -> f64 {
    flux_tol.min(IMBALANCE_REL * gross)
}

/// Smallest potential in `[x[v], upper]` at which the flux at `v` vanishes.
///
/// Bisection keeps a bracket `[lo, hi]` with negative flux at `lo` and
/// nonnegative flux at `hi`, and returns `hi` once the bracket is narrower
/// than `bisect_tol` and the flux at `hi` is within `flux_tol` (or the bracket
/// cannot be split further in floating point).
pub fn node_flux_root(
    circuit: &Circuit,
    x: &[f64],
    v: NodeId,
    upper: f64,
    bisect_tol: f64,
    flux_tol: f64,
) -> Result<f64> {
    let v = v.0;
    let mut lo = x[v];
    if balance_at(circuit, x, v, lo).flux >= 0.0 {
        return Ok(lo);
    }
    let mut hi = upper;
    let top = balance_at(circuit, x, v, hi);
    if top.flux < 0.0 {
        return Err(Error::BracketViolation(top.flux));
    }
    let mut hi_flux = top.flux;
    let mut hi_gross = top.gross;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= bisect_tol && hi_flux <= deficit_threshold(flux_tol, hi_gross).max(0.0) {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let b = balance_at(circuit, x, v, mid);
        if b.flux < 0.0 {
            lo = mid;
        } else {
            hi = mid;
            hi_flux = b.flux;
            hi_gross = b.gross;
        }
    }
    Ok(hi)
}

/// Raises `v` together with the interior nodes connected to it by a common
/// shift. Internal currents are unchanged by the shift and every member's flux
/// is nondecreasing in it, so the block may rise until some member's flux
/// exceeds its allowance (the larger of its starting flux and the deficit
/// threshold). A member other than `v` that would cross first is dropped and
/// the step retried; the block moves once `v` is the first to balance. Like a
/// single-node step this never lifts a node past its least solution value.
///
/// With `r < 1` the current `y^r` has unbounded slope at zero voltage, and a
/// node that carries no current in the limit trails its neighbour by a gap
/// whose current starves single-node steps; those steps then shrink like the
/// square of the remaining deficit. Returns whether the block moved.
fn block_pump(
    circuit: &Circuit,
    x: &mut [f64],
    v: usize,
    interior: &[bool],
    tol: &Tolerances,
    upper: f64,
) -> Result<bool> {
    let mut in_block = vec![false; x.len()];
    let mut block = vec![v];
    in_block[v] = true;
    let mut i = 0;
    while i < block.len() {
        let u = block[i];
        i += 1;
        let out = circuit
            .out_edges(NodeId(u))
            .iter()
            .map(|&e| circuit.edge(e).head.0);
        let inc = circuit
            .in_edges(NodeId(u))
            .iter()
            .map(|&e| circuit.edge(e).tail.0);
        for w in out.chain(inc).collect::<Vec<_>>() {
            if interior[w] && !in_block[w] {
                in_block[w] = true;
                block.push(w);
            }
        }
    }

    while block.len() >= 2 {
        let allowance: Vec<f64> = block
            .iter()
            .map(|&u| {
                let b = balance_at(circuit, x, u, x[u]);
                b.flux.max(deficit_threshold(tol.flux_tol, b.gross))
            })
            .collect();
        // First member over its allowance after shifting the block, if any.
        let violator = |shift: f64| {
            let mut moved = x.to_vec();
            for &u in &block {
                moved[u] = (moved[u] + shift).min(upper);
            }
            block
                .iter()
                .zip(&allowance)
                .position(|(&u, &cap)| balance_at(circuit, &moved, u, moved[u]).flux > cap)
        };
        // Members already at the cap stay there; the rest shift together.
        let (bottom, top) = block
            .iter()
            .map(|&u| x[u])
            .filter(|&p| p < upper)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p), hi.max(p))
            });
        if bottom > top {
            return Ok(false);
        }
        let mut lo = 0.0;
        let mut hi = upper - bottom;
        let mut blocker = violator(hi);
        if blocker.is_some() {
            // Bisect to the resolution of the potentials: a tiny common shift
            // is still the right move when `v` itself is the blocker.
            for _ in 0..MAX_BISECTIONS {
                let mid = lo + 0.5 * (hi - lo);
                if top + mid <= top + lo || top + mid >= top + hi {
                    break;
                }
                match violator(mid) {
                    Some(k) => {
                        hi = mid;
                        blocker = Some(k);
                    }
                    None => lo = mid,
                }
            }
        } else {
            lo = hi;
        }
        let progress = block.iter().any(|&u| (x[u] + lo).min(upper) > x[u]);
        match blocker {
            Some(k) if block[k] != v => {
                block.swap_remove(k);
            }
            _ if progress => {
                for &u in &block {
                    x[u] = (x[u] + lo).min(upper);
                }
                return Ok(true);
            }
            _ => return Ok(false),
        }
    }
    Ok(false)
}

/// Interior neighbour outside `taken` across the stiffest edge at `v`, when
/// that edge's incremental conductance `r y*/y` outweighs the rest of `v`'s
/// combined.
fn stiff_partner(
    circuit: &Circuit,
    x: &[f64],
    v: usize,
    interior: &[bool],
    taken: &[usize],
) -> Option<usize> {
    let r = circuit.r();
    let mut total = 0.0;
    let mut best: Option<(usize, f64)> = None;
    let out = circuit
        .out_edges(NodeId(v))
        .iter()
        .map(|&e| (e, circuit.edge(e).head.0, x[v] - x[circuit.edge(e).head.0]));
    let inc = circuit
        .in_edges(NodeId(v))
        .iter()
        .map(|&e| (e, circuit.edge(e).tail.0, x[circuit.edge(e).tail.0] - x[v]));
    for (e, w, y) in out.chain(inc) {
        let g = if y > 0.0 {
            r * circuit.edge_current(e, y) / y
        } else if y == 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        total += g;
        if interior[w] && !taken.contains(&w) && best.is_none_or(|(_, bg)| g > bg) {
            best = Some((w, g));
        }
    }
    best.filter(|&(_, g)| g.is_infinite() || g >= total - g)
        .map(|(w, _)| w)
}

/// Longest chain of stiff partners followed from `v`.
const MAX_CHAIN: usize = 3;

fn stiff_chain(circuit: &Circuit, x: &[f64], v: usize, interior: &[bool]) -> Vec<usize> {
    let mut chain = vec![v];
    while chain.len() < MAX_CHAIN {
        match stiff_partner(circuit, x, chain[chain.len() - 1], interior, &chain) {
            Some(w) => chain.push(w),
            None => break,
        }
    }
    chain
}

/// Least point at or above `base` where every node of `chain` balances, with
/// all other potentials in `trial` held fixed; written into `trial`. The
/// first node is bisected with the rest of the chain re-solved at each trial
/// value. Its flux is monotone along that curve because the followers rise
/// more slowly than it does.
fn settle_chain(
    circuit: &Circuit,
    trial: &mut [f64],
    base: &[f64],
    chain: &[usize],
    tol: &Tolerances,
    upper: f64,
) -> Result<()> {
    let (v, rest) = (chain[0], &chain[1..]);
    if rest.is_empty() {
        trial[v] = base[v];
        trial[v] = node_flux_root(
            circuit,
            trial,
            NodeId(v),
            upper,
            tol.bisect_tol,
            tol.flux_tol,
        )?;
        return Ok(());
    }
    let eval = |trial: &mut [f64], xv: f64| -> Result<f64> {
        trial[v] = xv;
        settle_chain(circuit, trial, base, rest, tol, upper)?;
        Ok(balance_at(circuit, trial, v, xv).flux)
    };
    let mut lo = base[v];
    if eval(trial, lo)? >= 0.0 {
        return Ok(());
    }
    let mut hi = upper;
    let mut f_hi = eval(trial, hi)?;
    if f_hi < 0.0 {
        return Err(Error::BracketViolation(f_hi));
    }
    let mut best: Vec<f64> = rest.iter().map(|&w| trial[w]).collect();
    for _ in 0..MAX_BISECTIONS {
        let g = balance_at(circuit, trial, v, hi).gross;
        if hi - lo <= tol.bisect_tol && f_hi <= deficit_threshold(tol.flux_tol, g).max(0.0) {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = eval(trial, mid)?;
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
            f_hi = f;
            best = rest.iter().map(|&w| trial[w]).collect();
        }
    }
    trial[v] = hi;
    for (&w, &p) in rest.iter().zip(&best) {
        trial[w] = p;
    }
    Ok(())
}

/// Lifts a chain of stiffly coupled nodes to the least point where all of
/// them balance, holding the other potentials fixed. Returns whether any
/// moved.
fn chain_pump(
    circuit: &Circuit,
    x: &mut [f64],
    chain: &[usize],
    tol: &Tolerances,
    upper: f64,
) -> Result<bool> {
    if balance_at(circuit, x, chain[0], x[chain[0]]).flux >= 0.0 {
        return Ok(false);
    }
    let mut trial = x.to_vec();
    settle_chain(circuit, &mut trial, x, chain, tol, upper)?;
    let moved = chain.iter().any(|&u| trial[u] > x[u]);
    for &u in chain {
        x[u] = trial[u].max(x[u]);
    }
    Ok(moved)
}

/// Solves the two-pole circuit with poles held at `xa0` (source) and `xb0` (sink).
pub fn msa_solve(
    circuit: &Circuit,
    a: NodeId,
    b: NodeId,
    xa0: f64,
    xb0: f64,
    cfg: &SolveConfig,
) -> Result<Solution> {
    msa_solve_observed(circuit, a, b, xa0, xb0, cfg, |_| {})
}

/// [`msa_solve`] with a callback invoked after every sweep.
pub fn msa_solve_observed(
    circuit: &Circuit,
    a: NodeId,
    b: NodeId,
    xa0: f64,
    xb0: f64,
    cfg: &SolveConfig,
    mut observe: impl FnMut(&SweepSnapshot<'_>),
) -> Result<Solution> {
    circuit.check_node(a)?;
    circuit.check_node(b)?;
    if a == b {
        return Err(Error::SamePoles);
    }
    cfg.validate()?;
    let order = interior_order(circuit, a, b, &cfg.sweep_order)?;
    let tol = cfg.resolve(circuit, xa0, xb0);

    let n = circuit.node_count();
    let mut x = vec![xb0; n];
    x[a.0] = xa0;

    if xa0 <= xb0 {
        // Zero-current representative: every edge sees a nonpositive voltage
        // from the source and zero voltage elsewhere.
        return Solution::from_potentials(circuit, a, b, x, 0, tol.flux_tol);
    }

    if !circuit.reachable(a, b, None)? {
        // Without a directed path the limit is known exactly: nodes reachable
        // from the source rise to its potential, all currents vanish.
        let reach = circuit.reach_from(a, None);
        for v in order.iter().map(|v| v.0) {
            if reach[v] {
                x[v] = xa0;
            }
        }
        return Solution::from_potentials(circuit, a, b, x, 0, tol.flux_tol);
    }

    let source_flux = |x: &[f64]| balance_at(circuit, x, a.0, x[a.0]).flux;
    let singular = circuit.r() < 1.0;
    let mut interior = vec![false; n];
    for v in &order {
        interior[v.0] = true;
    }
    for sweep in 1..=cfg.max_sweeps {
        let mut moved = 0;
        for &v in &order {
            let bal = balance_at(circuit, &x, v.0, x[v.0]);
            let thr = deficit_threshold(tol.flux_tol, bal.gross);
            if bal.flux < -thr {
                if singular && block_pump(circuit, &mut x, v.0, &interior, &tol, xa0)? {
                    moved += 1;
                    let bal = balance_at(circuit, &x, v.0, x[v.0]);
                    if bal.flux >= -deficit_threshold(tol.flux_tol, bal.gross) {
                        continue;
                    }
                }
                if singular {
                    let chain = stiff_chain(circuit, &x, v.0, &interior);
                    if chain.len() > 1 && chain_pump(circuit, &mut x, &chain, &tol, xa0)? {
                        moved += 1;
                        continue;
                    }
                }
                let root = node_flux_root(circuit, &x, v, xa0, tol.bisect_tol, tol.flux_tol)?;
                if root > x[v.0] {
                    x[v.0] = root;
                    moved += 1;
                }
            }
        }
        observe(&SweepSnapshot {
            sweep,
            x: &x,
            source_flux: source_flux(&x),
            moved,
        });
        if moved == 0 {
            let sol = Solution::from_potentials(circuit, a, b, x, sweep, tol.flux_tol)?;
            if sol.residual > tol.flux_tol {
                // Stalled with a surplus that raising potentials cannot remove.
                return Err(Error::NotConverged {
                    sweeps: sweep,
                    residual: sol.residual,
                    best: Box::new(sol),
                });
            }
            return Ok(sol);
        }
    }
    let best = Solution::from_potentials(circuit, a, b, x, cfg.max_sweeps, tol.flux_tol)?;
    Err(Error::NotConverged {
        sweeps: cfg.max_sweeps,
        residual: best.residual,
        best: Box::new(best),
    })
}

fn interior_order(
    circuit: &Circuit,
    a: NodeId,
    b: NodeId,
    order: &SweepOrder,
) -> Result<Vec<NodeId>> {
    let default: Vec<NodeId> = circuit.nodes().filter(|&v| v != a && v != b).collect();
    match order {
        SweepOrder::Default => Ok(default),
        SweepOrder::Explicit(list) => {
            let mut seen = vec![false; circuit.node_count()];
            for &v in list {
                circuit.check_node(v)?;
                if v == a || v == b || seen[v.0] {
                    return Err(Error::InvalidConfig(format!(
                        "sweep order is not a permutation of the interior nodes (node {})",
                        v.0
                    )));
                }
                seen[v.0] = true;
            }
            if list.len() != default.len() {
                return Err(Error::InvalidConfig(format!(
                    "sweep order lists {} nodes, expected {}",
                    list.len(),
                    default.len()
                )));
            }
            Ok(list.clone())
        }
    }
}

/// Verifies that `(c x, c y, c^r y*, c^r x*)` again satisfies the circuit
/// equations, to `1e-9` relative.
pub fn scaling_check(circuit: &Circuit, sol: &Solution, c: f64) -> bool {
    if !(c.is_finite() && c > 0.0) {
        return false;
    }
    let cr = c.powf(circuit.r());
    let x: Vec<f64> = sol.x.iter().map(|v| c * v).collect();
    let y: Vec<f64> = sol.y.iter().map(|v| c * v).collect();
    let y_star: Vec<f64> = sol.y_star.iter().map(|v| cr * v).collect();
    let x_star: Vec<f64> = sol.x_star.iter().map(|v| cr * v).collect();

    let Ok(y_from_x) = circuit.voltages(&x) else {
        return false;
    };
    let current_from_y: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(e, &v)| circuit.edge_current(e, v))
        .collect();
    let Ok(flux_from_current) = circuit.fluxes(&y_star) else {
        return false;
    };
    let interior_ok = {
        let scale = max_abs(&y_star).max(f64::MIN_POSITIVE);
        x_star
            .iter()
            .enumerate()
            .filter(|&(v, _)| v != sol.source.0 && v != sol.sink.0)
            .all(|(_, f)| f.abs() <= cr * sol.flux_tol + 1e-9 * scale)
    };
    close_rel(&y, &y_from_x, 1e-9)
        && close_rel(&y_star, &current_from_y, 1e-9)
        && close_rel(&x_star, &flux_from_current, 1e-9)
        && interior_ok
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn close_rel(a: &[f64], b: &[f64], rel: f64) -> bool {
    let scale = max_abs(a).max(max_abs(b)).max(f64::MIN_POSITIVE);
    a.len() == b.len() && a.iter().zip(b).all(|(p, q)| (p - q).abs() <= rel * scale)
}

/// Structure of the positive-current subgraph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositiveSubgraph {
    /// Edges with current above the threshold.
    pub edges: Vec<usize>,
    pub acyclic: bool,
    pub strictly_decreasing: bool,
    /// Threshold edges that do not lie on any source-to-sink path made of
    /// positive-current edges.
    pub off_path: Vec<usize>,
}

impl PositiveSubgraph {
    pub fn holds(&self) -> bool {
        self.acyclic && self.strictly_decreasing && self.off_path.is_empty()
    }
}

/// Inspects the subgraph of edges with current above `threshold`.
pub fn positive_subgraph(circuit: &Circuit, sol: &Solution, threshold: f64) -> PositiveSubgraph {
    let edges: Vec<usize> = (0..circuit.edge_count())
        .filter(|&e| sol.y_star[e] > threshold)
        .collect();
    let strictly_decreasing = edges.iter().all(|&e| {
        let ed = circuit.edge(e);
        sol.x[ed.tail.0] > sol.x[ed.head.0]
    });
    let acyclic = is_acyclic(circuit.node_count(), edges.iter().map(|&e| circuit.edge(e)));

    // Path membership uses every strictly positive edge so that a tiny
    // continuation below the threshold still counts.
    let positive: Vec<usize> = (0..circuit.edge_count())
        .filter(|&e| sol.y_star[e] > 0.0)
        .collect();
    let from_a = reach_subset(circuit, &positive, sol.source.0, false);
    let to_b = reach_subset(circuit, &positive, sol.sink.0, true);
    let off_path = edges
        .iter()
        .copied()
        .filter(|&e| {
            let ed = circuit.edge(e);
            !(from_a[ed.tail.0] && to_b[ed.head.0])
        })
        .collect();
    PositiveSubgraph {
        edges,
        acyclic,
        strictly_decreasing,
        off_path,
    }
}

fn reach_subset(circuit: &Circuit, edges: &[usize], start: usize, reverse: bool) -> Vec<bool> {
    let n = circuit.node_count();
    let mut adj = vec![Vec::new(); n];
    for &e in edges {
        let ed = circuit.edge(e);
        let (u, w) = if reverse {
            (ed.head.0, ed.tail.0)
        } else {
            (ed.tail.0, ed.head.0)
        };
        adj[u].push(w);
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
}

fn is_acyclic<'a>(n: usize, edges: impl Iterator<Item = &'a crate::circuit::Edge>) -> bool {
    let mut indeg = vec![0usize; n];
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.tail.0].push(e.head.0);
        indeg[e.head.0] += 1;
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut removed = 0;
    while let Some(u) = queue.pop() {
        removed += 1;
        for &w in &adj[u] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push(w);
            }
        }
    }
    removed == n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(mus: &[f64], r: f64, s: f64) -> Circuit {
        let n = mus.len() + 1;
        let labels = (0..n).map(|i| format!("v{i}")).collect();
        Circuit::new(
            labels,
            mus.iter().enumerate().map(|(i, &m)| (i, i + 1, m)),
            r,
            s,
        )
        .unwrap()
    }

    #[test]
    fn stiff_chain_converges_at_small_r() {
        // a -> d -> c -> e -> b with a shortcut d -> e: at r = 1/16 the three
        // middle nodes sit within 1e-5 of each other.
        let labels = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
        let edges = [
            (0, 3, 1.0),
            (3, 2, 1.0),
            (2, 4, 1.0),
            (4, 1, 1.0),
            (3, 4, 1.0),
        ];
        for r in [0.25, 0.0625] {
            let c = Circuit::new(labels.clone(), edges, r, 1.0).unwrap();
            let cfg = SolveConfig::default();
            let sol = msa_solve(&c, NodeId(0), NodeId(1), 1.0, 0.0, &cfg).unwrap();
            let reference =
                crate::dissipation::energy_solve(&c, NodeId(0), NodeId(1), 1.0, 0.0, &cfg).unwrap();
            assert!(sol.sweeps_used <= 10, "{} sweeps", sol.sweeps_used);
            for (p, q) in sol.y_star.iter().zip(&reference.y_star) {
                assert!((p - q).abs() <= 10.0 * sol.flux_tol, "r={r}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn root_on_symmetric_path() {
        let c = path(&[1.0, 1.0], 1.0, 1.0);
        let x = [1.0, 0.0, 0.0];
        let root = node_flux_root(&c, &x, NodeId(1), 1.0, 1e-13, 1e-14).unwrap();
        assert!((root - 0.5).abs() < 1e-12, "{root}");
    }

    #[test]
    fn root_on_unequal_path() {
        // (1 - x) / 1 = x / 2  =>  x = 2/3
        let c = path(&[1.0, 2.0], 1.0, 1.0);
        let x = [1.0, 0.0, 0.0];
        let root = node_flux_root(&c, &x, NodeId(1), 1.0, 1e-13, 1e-14).unwrap();
        assert!((root - 2.0 / 3.0).abs() < 1e-12, "{root}");
    }

    #[test]
    fn root_returns_left_end_of_zero_plateau() {
        // v has an in-edge from u at 0.3 and an out-edge to w at 0.8: its flux
        // is zero on [0.3, 0.8] and the first zero is 0.3.
        let c = Circuit::builder(1.0, 1.0)
            .edge("u", "v", 1.0)
            .edge("v", "w", 1.0)
            .build()
            .unwrap();
        let x = [0.3, 0.0, 0.8];
        let root = node_flux_root(&c, &x, NodeId(1), 1.0, 1e-12, 1e-14).unwrap();
        assert!(root >= 0.3 && root - 0.3 <= 1e-12, "{root}");
    }

    #[test]
    fn root_detects_bad_bracket() {
        let c = path(&[1.0, 1.0], 1.0, 1.0);
        let x = [1.0, 0.0, 0.0];
        assert!(matches!(
            node_flux_root(&c, &x, NodeId(1), 0.25, 1e-12, 1e-14),
            Err(Error::BracketViolation(_))
        ));
    }

    #[test]
    fn no_move_when_flux_nonnegative() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("v", "b", 1.0)
            .build()
            .unwrap();
        let x = [0.0, 0.0];
        assert_eq!(
            node_flux_root(&c, &x, NodeId(0), 1.0, 1e-12, 1e-14).unwrap(),
            0.0
        );
    }

    #[test]
    fn unit_path_divides_equally() {
        let c = path(&[1.0, 1.0, 1.0], 1.0, 1.0);
        let sol = msa_solve(&c, NodeId(0), NodeId(3), 1.0, 0.0, &SolveConfig::default()).unwrap();
        let expect = [1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0];
        for (got, want) in sol.x.iter().zip(expect) {
            assert!((got - want).abs() < 1e-9, "{:?}", sol.x);
        }
        assert!((sol.pole_current - 1.0 / 3.0).abs() < 1e-9);
        sol.verify(&c).unwrap();
    }

    #[test]
    fn triangle_ohm_current() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "c", 1.0)
            .edge("c", "b", 1.0)
            .edge("a", "b", 3.0)
            .build()
            .unwrap();
        let (a, b) = (c.node("a").unwrap(), c.node("b").unwrap());
        let sol = msa_solve(&c, a, b, 1.0, 0.0, &SolveConfig::default()).unwrap();
        assert!(
            (sol.pole_current - 5.0 / 6.0).abs() < 1e-9,
            "{}",
            sol.pole_current
        );
        assert!((sol.x[c.node("c").unwrap().0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn disconnected_poles_carry_no_current() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "u", 1.0)
            .edge("u", "w", 2.0)
            .edge("p", "b", 1.0)
            .build()
            .unwrap();
        let (a, b) = (c.node("a").unwrap(), c.node("b").unwrap());
        let sol = msa_solve(&c, a, b, 1.0, 0.0, &SolveConfig::default()).unwrap();
        assert_eq!(sol.pole_current, 0.0);
        assert_eq!(sol.x[c.node("u").unwrap().0], 1.0);
        assert_eq!(sol.x[c.node("w").unwrap().0], 1.0);
        assert_eq!(sol.x[c.node("p").unwrap().0], 0.0);
    }

    #[test]
    fn reversed_boundary_gives_zero_current() {
        let c = path(&[1.0, 1.0], 1.0, 1.0);
        let sol = msa_solve(&c, NodeId(0), NodeId(2), 0.0, 1.0, &SolveConfig::default()).unwrap();
        assert!(sol.y_star.iter().all(|&c| c == 0.0));
        assert_eq!(sol.x, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_config_and_poles() {
        let c = path(&[1.0, 1.0], 1.0, 1.0);
        let cfg = SolveConfig {
            max_sweeps: 0,
            ..SolveConfig::default()
        };
        assert!(msa_solve(&c, NodeId(0), NodeId(2), 1.0, 0.0, &cfg).is_err());
        assert!(matches!(
            msa_solve(&c, NodeId(0), NodeId(0), 1.0, 0.0, &SolveConfig::default()),
            Err(Error::SamePoles)
        ));
        let bad_order = SolveConfig::default().with_order(vec![NodeId(0)]);
        assert!(msa_solve(&c, NodeId(0), NodeId(2), 1.0, 0.0, &bad_order).is_err());
    }

    #[test]
    fn sweep_limit_reports_best_iterate() {
        let c = path(&[1.0; 6], 1.0, 1.0);
        let cfg = SolveConfig {
            max_sweeps: 2,
            ..SolveConfig::default()
        };
        match msa_solve(&c, NodeId(0), NodeId(6), 1.0, 0.0, &cfg) {
            Err(Error::NotConverged {
                sweeps,
                residual,
                best,
            }) => {
                assert_eq!(sweeps, 2);
                assert!(residual > 0.0);
                assert_eq!(best.sweeps_used, 2);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn scaling_examples() {
        let c = path(&[1.0, 1.0, 1.0], 1.0, 1.0);
        let sol = msa_solve(&c, NodeId(0), NodeId(3), 1.0, 0.0, &SolveConfig::default()).unwrap();
        assert!(scaling_check(&c, &sol, 1.0));
        assert!(scaling_check(&c, &sol, 2.0));
        let doubled =
            msa_solve(&c, NodeId(0), NodeId(3), 2.0, 0.0, &SolveConfig::default()).unwrap();
        assert!((doubled.pole_current - 2.0 / 3.0).abs() < 1e-9);
        assert!((doubled.x[1] - 4.0 / 3.0).abs() < 1e-9);

        // r = 1/2: currents scale by 4^{1/2} = 2
        let half = c.with_exponents(0.5, 1.0).unwrap();
        let s1 = msa_solve(
            &half,
            NodeId(0),
            NodeId(3),
            1.0,
            0.0,
            &SolveConfig::default(),
        )
        .unwrap();
        let s4 = msa_solve(
            &half,
            NodeId(0),
            NodeId(3),
            4.0,
            0.0,
            &SolveConfig::default(),
        )
        .unwrap();
        assert!((s4.pole_current / s1.pole_current - 2.0).abs() < 1e-8);
        assert!(scaling_check(&half, &s1, 4.0));
    }
}
