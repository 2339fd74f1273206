//! Joule heat of a current vector and an independent potential-side solver.
//!
//! For the conductance law `current = y^r / mu^s` the heat released on an edge
//! carrying current `c` is `mu^{s/r} / (1 + 1/r) * c^{1 + 1/r}`. The dual
//! potential-side functional (co-content)
//!
//! ```text
//! E(x) = sum_e (x_tail - x_head)_+^{r+1} / ((r + 1) mu_e^s)
//! ```
//!
//! has gradient equal to the node fluxes, so its minimizer over the interior
//! potentials satisfies the first Kirchhoff law. `energy_solve` minimizes it
//! by damped Newton steps with a backtracking line search.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::circuit::{Circuit, NodeId};
use crate::error::{Error, Result};
use crate::msa::{Solution, SolveConfig};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Heat released on edge `e` by the given current.
pub fn edge_heat(circuit: &Circuit, e: usize, current: f64) -> Result<f64> {
    if current < 0.0 || current.is_nan() {
        return Err(Error::NegativeCurrent(current));
    }
    if current == 0.0 {
        return Ok(0.0);
    }
    let r = circuit.r();
    let k = 1.0 + 1.0 / r;
    Ok(circuit.edge(e).mu.powf(circuit.s() / r) / k * current.powf(k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub total_heat: f64,
    pub per_edge_heat: Vec<f64>,
    /// Largest interior flux, i.e. the co-content gradient at the solution.
    pub gradient_norm: f64,
}

/// Total heat of a flow vector.
pub fn total_heat(circuit: &Circuit, flow: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (e, &c) in flow.iter().enumerate() {
        sum += edge_heat(circuit, e, c)?;
    }
    Ok(sum)
}

pub fn energy_report(circuit: &Circuit, sol: &Solution) -> Result<EnergyReport> {
    let per_edge_heat = sol
        .y_star
        .iter()
        .enumerate()
        .map(|(e, &c)| edge_heat(circuit, e, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyReport {
        total_heat: per_edge_heat.iter().sum(),
        per_edge_heat,
        gradient_norm: sol.residual,
    })
}

/// Co-content `E(x)`.
pub fn co_content(circuit: &Circuit, x: &[f64]) -> f64 {
    let r1 = circuit.r() + 1.0;
    circuit
        .edges()
        .iter()
        .enumerate()
        .map(|(e, ed)| {
            let y = x[ed.tail.0] - x[ed.head.0];
            circuit.edge_current(e, y) * y / r1
        })
        .sum()
}

/// Gradient of `E` with respect to every potential (equals the flux vector).
pub fn co_content_gradient(circuit: &Circuit, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; circuit.node_count()];
    for (e, ed) in circuit.edges().iter().enumerate() {
        let c = circuit.edge_current(e, x[ed.tail.0] - x[ed.head.0]);
        g[ed.tail.0] += c;
        g[ed.head.0] -= c;
    }
    g
}

/// Minimizes the co-content with the poles fixed. Returns a [`Solution`] with
/// the same contract as [`crate::msa::msa_solve`]; `sweeps_used` counts
/// Newton iterations.
pub fn energy_solve(
    circuit: &Circuit,
    a: NodeId,
    b: NodeId,
    xa0: f64,
    xb0: f64,
    cfg: &SolveConfig,
) -> Result<Solution> {
    circuit.check_node(a)?;
    circuit.check_node(b)?;
    if a == b {
        return Err(Error::SamePoles);
    }
    cfg.validate()?;
    let tol = cfg.resolve(circuit, xa0, xb0);
    let n = circuit.node_count();

    if xa0 <= xb0 {
        let mut x = vec![xb0; n];
        x[a.0] = xa0;
        return Solution::from_potentials(circuit, a, b, x, 0, tol.flux_tol);
    }
    if !circuit.reachable(a, b, None)? {
        let reach = circuit.reach_from(a, None);
        let x = (0..n)
            .map(|v| if reach[v] && v != b.0 { xa0 } else { xb0 })
            .collect();
        return Solution::from_potentials(circuit, a, b, x, 0, tol.flux_tol);
    }

    let mut x = vec![0.5 * (xa0 + xb0); n];
    x[a.0] = xa0;
    x[b.0] = xb0;
    let identity: Vec<Option<usize>> = {
        let mut k = 0;
        (0..n)
            .map(|v| {
                (v != a.0 && v != b.0).then(|| {
                    k += 1;
                    k - 1
                })
            })
            .collect()
    };
    let mut iters = newton(circuit, &mut x, &identity, tol.flux_tol, cfg.max_sweeps);
    let mut best = Solution::from_potentials(circuit, a, b, x.clone(), iters, tol.flux_tol)?;

    // For r < 1 the curvature is unbounded at zero voltage, and Newton stalls
    // where the optimum ties nodes together exactly. Contract near-tied edges
    // and minimize over the merged potentials, accepting the result only if
    // every node balances individually.
    let span = xa0 - xb0;
    for tie in TIE_LEVELS {
        if best.residual <= tol.flux_tol {
            break;
        }
        let Some((var_of, mut xm)) = contract(circuit, &best.x, a.0, b.0, tie * span) else {
            continue;
        };
        iters += newton(circuit, &mut xm, &var_of, tol.flux_tol, cfg.max_sweeps);
        let sol = Solution::from_potentials(circuit, a, b, xm, iters, tol.flux_tol)?;
        if sol.residual < best.residual {
            best = sol;
        }
    }
    best.sweeps_used = iters;
    if best.residual <= tol.flux_tol {
        return Ok(best);
    }
    Err(Error::NotConverged {
        sweeps: iters,
        residual: best.residual,
        best: Box::new(best),
    })
}

/// Edge voltages (relative to the pole voltage) below which nodes are merged
/// when plain Newton stalls.
const TIE_LEVELS: [f64; 3] = [1e-12, 1e-9, 1e-6];

/// Newton iterations without a tenfold gradient reduction before giving up.
const STALL_WINDOW: usize = 500;

/// Groups nodes joined by edges with `|y| <= tie` into shared variables.
/// Groups containing a pole are fixed at that pole; returns `None` when
/// nothing merges or the poles would merge.
fn contract(
    circuit: &Circuit,
    x: &[f64],
    a: usize,
    b: usize,
    tie: f64,
) -> Option<(Vec<Option<usize>>, Vec<f64>)> {
    let n = x.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut v: usize) -> usize {
        while p[v] != v {
            p[v] = p[p[v]];
            v = p[v];
        }
        v
    }
    let mut merged = false;
    for ed in circuit.edges() {
        if (x[ed.tail.0] - x[ed.head.0]).abs() <= tie {
            let (u, w) = (find(&mut parent, ed.tail.0), find(&mut parent, ed.head.0));
            if u != w {
                parent[u] = w;
                merged = true;
            }
        }
    }
    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
    if !merged || ra == rb {
        return None;
    }
    let roots: Vec<usize> = (0..n).map(|v| find(&mut parent, v)).collect();
    let mut slot = vec![None; n];
    let mut k = 0;
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for v in 0..n {
        let root = roots[v];
        sum[root] += x[v];
        count[root] += 1;
        if root != ra && root != rb && slot[root].is_none() {
            slot[root] = Some(k);
            k += 1;
        }
    }
    let var_of = roots.iter().map(|&root| slot[root]).collect();
    let xm = (0..n)
        .map(|v| match roots[v] {
            root if root == ra => x[a],
            root if root == rb => x[b],
            root => sum[root] / count[root] as f64,
        })
        .collect();
    Some((var_of, xm))
}

/// Damped Newton on the co-content over the variables in `var_of` (nodes
/// sharing a variable move together; `None` is fixed). Returns the number of
/// iterations.
fn newton(
    circuit: &Circuit,
    x: &mut Vec<f64>,
    var_of: &[Option<usize>],
    tol: f64,
    max_iter: usize,
) -> usize {
    let m = var_of.iter().flatten().max().map_or(0, |k| k + 1);
    if m == 0 {
        return 0;
    }
    let grad = |x: &[f64]| -> DVector<f64> {
        let g_full = co_content_gradient(circuit, x);
        let mut g = DVector::zeros(m);
        for (v, k) in var_of.iter().enumerate() {
            if let Some(k) = k {
                g[*k] += g_full[v];
            }
        }
        g
    };
    let mut best_norm = f64::INFINITY;
    let mut since_best = 0;
    for iter in 0..max_iter {
        let g = grad(x);
        let gnorm = g.amax();
        if gnorm <= tol {
            return iter;
        }
        if gnorm < 0.1 * best_norm {
            best_norm = gnorm;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > STALL_WINDOW {
                return iter;
            }
        }

        let h = hessian(circuit, x, var_of, m);
        let newton = solve_regularized(h, &g);
        let e0 = co_content(circuit, x);
        let mut accepted = None;
        for dir in [newton, Some(-&g)].into_iter().flatten() {
            let slope = g.dot(&dir);
            if slope >= 0.0 {
                continue;
            }
            if let Some(next) = line_search(circuit, x, var_of, &dir, e0, slope, gnorm, &|t| {
                grad(t).amax()
            }) {
                accepted = Some(next);
                break;
            }
        }
        match accepted {
            Some(next) => *x = next,
            None => return iter,
        }
    }
    max_iter
}

fn hessian(circuit: &Circuit, x: &[f64], var_of: &[Option<usize>], m: usize) -> DMatrix<f64> {
    let r = circuit.r();
    let mut h = DMatrix::zeros(m, m);
    for (e, ed) in circuit.edges().iter().enumerate() {
        let y = x[ed.tail.0] - x[ed.head.0];
        if y <= 0.0 {
            continue;
        }
        // d current / d voltage
        let w = r * circuit.edge_current(e, y) / y;
        let (i, j) = (var_of[ed.tail.0], var_of[ed.head.0]);
        if i == j {
            continue;
        }
        if let Some(i) = i {
            h[(i, i)] += w;
        }
        if let Some(j) = j {
            h[(j, j)] += w;
        }
        if let (Some(i), Some(j)) = (i, j) {
            h[(i, j)] -= w;
            h[(j, i)] -= w;
        }
    }
    h
}

fn solve_regularized(mut h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let m = h.nrows();
    if m == 0 {
        return None;
    }
    let dmax = (0..m).map(|i| h[(i, i)]).fold(0.0, f64::max);
    if !(dmax.is_finite() && dmax > 0.0) {
        return None;
    }
    for i in 0..m {
        // Rows without positive-voltage edges have zero gradient; pin them.
        h[(i, i)] += if h[(i, i)] > 0.0 { 1e-12 * dmax } else { dmax };
    }
    let rhs = -g;
    match h.clone().cholesky() {
        Some(ch) => Some(ch.solve(&rhs)),
        None => h.lu().solve(&rhs),
    }
    .filter(|d| d.iter().all(|v| v.is_finite()))
}

#[allow(clippy::too_many_arguments)]
fn line_search(
    circuit: &Circuit,
    x: &[f64],
    var_of: &[Option<usize>],
    dir: &DVector<f64>,
    e0: f64,
    slope: f64,
    gnorm: f64,
    grad_norm: &dyn Fn(&[f64]) -> f64,
) -> Option<Vec<f64>> {
    let step = |alpha: f64| {
        let mut t = x.to_vec();
        for (v, k) in var_of.iter().enumerate() {
            if let Some(k) = k {
                t[v] += alpha * dir[*k];
            }
        }
        t
    };
    let mut alpha = 1.0;
    for _ in 0..MAX_HALVINGS {
        let t = step(alpha);
        if co_content(circuit, &t) <= e0 + ARMIJO * alpha * slope
            && (grad_norm(&t) < gnorm || co_content(circuit, &t) < e0)
        {
            return Some(t);
        }
        alpha *= 0.5;
    }
    // Close to the optimum the energy decrease is below rounding; fall back to
    // requiring a smaller gradient.
    alpha = 1.0;
    for _ in 0..MAX_HALVINGS {
        let t = step(alpha);
        if grad_norm(&t) < gnorm {
            return Some(t);
        }
        alpha *= 0.5;
    }
    None
}

/// Whether `optimal` dissipates no more heat than `candidate` (within `1e-9`
/// relative), after checking that both flows meet the prescribed fluxes.
pub fn dissipation_certificate(
    circuit: &Circuit,
    candidate: &[f64],
    optimal: &[f64],
    boundary: &[f64],
) -> Result<bool> {
    let scale = boundary
        .iter()
        .chain(candidate)
        .chain(optimal)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-8 * scale;
    for flow in [candidate, optimal] {
        if let Some(&bad) = flow.iter().find(|&&c| c < 0.0) {
            return Err(Error::NegativeCurrent(bad));
        }
        let flux = circuit.fluxes(flow)?;
        if boundary.len() != flux.len() {
            return Err(Error::DimensionMismatch {
                expected: flux.len(),
                got: boundary.len(),
            });
        }
        let bad: Vec<usize> = (0..flux.len())
            .filter(|&v| (flux[v] - boundary[v]).abs() > tol)
            .collect();
        if !bad.is_empty() {
            let worst = bad
                .iter()
                .map(|&v| (flux[v] - boundary[v]).abs())
                .fold(0.0, f64::max);
            return Err(Error::Infeasible { nodes: bad, worst });
        }
    }
    let f_cand = total_heat(circuit, candidate)?;
    let f_opt = total_heat(circuit, optimal)?;
    Ok(f_opt <= f_cand + 1e-9 * f_cand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msa::msa_solve;

    fn single(mu: f64, r: f64, s: f64) -> Circuit {
        Circuit::builder(r, s).edge("a", "b", mu).build().unwrap()
    }

    #[test]
    fn heat_examples() {
        assert_eq!(edge_heat(&single(1.0, 1.0, 1.0), 0, 0.0).unwrap(), 0.0);
        assert!((edge_heat(&single(1.0, 1.0, 1.0), 0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((edge_heat(&single(2.0, 1.0, 1.0), 0, 3.0).unwrap() - 9.0).abs() < 1e-12);
        assert!(matches!(
            edge_heat(&single(1.0, 1.0, 1.0), 0, -1.0),
            Err(Error::NegativeCurrent(_))
        ));
    }

    #[test]
    fn energy_matches_unit_path() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "v", 1.0)
            .edge("v", "b", 1.0)
            .build()
            .unwrap();
        let sol =
            energy_solve(&c, NodeId(0), NodeId(2), 1.0, 0.0, &SolveConfig::default()).unwrap();
        assert!((sol.x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn energy_matches_triangle() {
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "c", 1.0)
            .edge("c", "b", 1.0)
            .edge("a", "b", 3.0)
            .build()
            .unwrap();
        let (a, b) = (c.node("a").unwrap(), c.node("b").unwrap());
        let cfg = SolveConfig::default();
        let e = energy_solve(&c, a, b, 1.0, 0.0, &cfg).unwrap();
        let m = msa_solve(&c, a, b, 1.0, 0.0, &cfg).unwrap();
        assert!((e.pole_current - 5.0 / 6.0).abs() < 1e-9);
        for (p, q) in e.y_star.iter().zip(&m.y_star) {
            assert!((p - q).abs() <= 10.0 * m.flux_tol);
        }
    }

    #[test]
    fn parallel_split_beats_one_sided_routing() {
        // Parallel unit and double resistances at r = s = 1 with total current 3:
        // optimal split (2, 1), heat 2^2/2 + 2*1^2/2 = 3; one-sided (3, 0) gives 4.5.
        let c = Circuit::builder(1.0, 1.0)
            .edge("a", "b", 1.0)
            .edge("a", "b", 2.0)
            .build()
            .unwrap();
        let boundary = [3.0, -3.0];
        let opt = [2.0, 1.0];
        let one_sided = [3.0, 0.0];
        assert!((total_heat(&c, &opt).unwrap() - 3.0).abs() < 1e-12);
        assert!((total_heat(&c, &one_sided).unwrap() - 4.5).abs() < 1e-12);
        assert!(dissipation_certificate(&c, &one_sided, &opt, &boundary).unwrap());
        assert!(!dissipation_certificate(&c, &opt, &one_sided, &boundary).unwrap());
        assert!(dissipation_certificate(&c, &opt, &opt, &boundary).unwrap());
        assert!(matches!(
            dissipation_certificate(&c, &[1.0, 1.0], &opt, &boundary),
            Err(Error::Infeasible { .. })
        ));
    }
}
