//! Parameter sweeps along the four exponent curves and their exact limits.
//!
//! | mode           | `r(t)` | `s(t)` | limit of `mu_{a,b}(t)`                |
//! |----------------|--------|--------|---------------------------------------|
//! | `Ohm`          | 1      | 1      | Ohm resistance (constant in `t`)      |
//! | `ShortestPath` | t      | t      | shortest path length                  |
//! | `Bottleneck`   | 1      | t      | inverse width of the widest path      |
//! | `MaxFlow`      | 1/t    | 1      | inverse maximum flow value            |

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, NodeId};
use crate::error::{Error, Result};
use crate::ext::{format_sig, ExtResistance};
use crate::generators::{rng_stream, STREAM_PERTURB};
use crate::msa::{Solution, SolveConfig};
use crate::oracles::{max_flow, shortest_path_length, widest_bottleneck};
use crate::resistance::{resistance_and_solution, Solver};

/// Resistances are clamped to this range in the large-exponent modes so that
/// `mu^t` stays representable up to `t = 64`.
pub const CLAMP_RANGE: (f64, f64) = (0.25, 4.0);

pub const DEFAULT_T: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
pub const DEFAULT_T_MAXFLOW: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitMode {
    Ohm,
    ShortestPath,
    Bottleneck,
    MaxFlow,
}

impl LimitMode {
    pub const ALL: [LimitMode; 4] = [
        LimitMode::Ohm,
        LimitMode::ShortestPath,
        LimitMode::Bottleneck,
        LimitMode::MaxFlow,
    ];

    /// `(r, s)` at parameter `t`.
    pub fn exponents(self, t: f64) -> (f64, f64) {
        match self {
            LimitMode::Ohm => (1.0, 1.0),
            LimitMode::ShortestPath => (t, t),
            LimitMode::Bottleneck => (1.0, t),
            LimitMode::MaxFlow => (1.0 / t, 1.0),
        }
    }

    fn clamps(self) -> bool {
        matches!(self, LimitMode::ShortestPath | LimitMode::Bottleneck)
    }

    pub fn default_t(self) -> &'static [f64] {
        match self {
            LimitMode::MaxFlow => &DEFAULT_T_MAXFLOW,
            _ => &DEFAULT_T,
        }
    }

    /// The exact distance the sweep converges to.
    pub fn oracle(
        self,
        circuit: &Circuit,
        a: NodeId,
        b: NodeId,
        cfg: &SolveConfig,
    ) -> Result<ExtResistance> {
        match self {
            LimitMode::Ohm => {
                let ohm = circuit.with_exponents(1.0, 1.0)?;
                resistance_and_solution(&ohm, a, b, cfg, Solver::Msa).map(|(mu, _)| mu)
            }
            LimitMode::ShortestPath => shortest_path_length(circuit, a, b),
            LimitMode::Bottleneck => widest_bottleneck(circuit, a, b),
            LimitMode::MaxFlow => {
                if a == b {
                    Ok(ExtResistance::Zero)
                } else {
                    Ok(max_flow(circuit, a, b)?.inverse())
                }
            }
        }
    }
}

impl fmt::Display for LimitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LimitMode::Ohm => "ohm",
            LimitMode::ShortestPath => "shortest",
            LimitMode::Bottleneck => "bottleneck",
            LimitMode::MaxFlow => "maxflow",
        })
    }
}

impl FromStr for LimitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ohm" => Ok(LimitMode::Ohm),
            "shortest" | "shortest-path" => Ok(LimitMode::ShortestPath),
            "bottleneck" => Ok(LimitMode::Bottleneck),
            "maxflow" | "max-flow" => Ok(LimitMode::MaxFlow),
            other => Err(Error::InvalidConfig(format!(
                "unknown limit mode `{other}`"
            ))),
        }
    }
}

/// One parameter value of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub t: f64,
    pub r: f64,
    pub s: f64,
    /// `None` when the solve failed; see `error`.
    pub mu: Option<ExtResistance>,
    pub rel_error: Option<f64>,
    pub sweeps: usize,
    pub residual: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub mode: LimitMode,
    pub source: NodeId,
    pub sink: NodeId,
    pub oracle_value: ExtResistance,
    /// Edges whose resistance was clamped into [`CLAMP_RANGE`].
    pub clamped_edges: usize,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn t_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn mu_trajectory(&self) -> Vec<Option<ExtResistance>> {
        self.points.iter().map(|p| p.mu).collect()
    }

    pub fn relative_errors(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.rel_error).collect()
    }

    pub fn last(&self) -> Option<&SweepPoint> {
        self.points.last()
    }

    /// Rows `t,r,s,mu,oracle,rel_error,sweeps,residual` at 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "r",
            "s",
            "mu",
            "oracle",
            "rel_error",
            "sweeps",
            "residual",
        ])?;
        let ext = |v: Option<ExtResistance>| match v {
            Some(ExtResistance::Finite(x)) => format_sig(x, 12),
            Some(other) => other.to_string(),
            None => "nan".to_string(),
        };
        for p in &self.points {
            w.write_record([
                format_sig(p.t, 12),
                format_sig(p.r, 12),
                format_sig(p.s, 12),
                ext(p.mu),
                ext(Some(self.oracle_value)),
                p.rel_error.map_or_else(String::new, |e| format_sig(e, 12)),
                p.sweeps.to_string(),
                format_sig(p.residual, 12),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Clamps every resistance into [`CLAMP_RANGE`]; returns the circuit and the
/// number of edges changed.
pub fn clamp_mu(circuit: &Circuit) -> Result<(Circuit, usize)> {
    let (lo, hi) = CLAMP_RANGE;
    let changed = circuit
        .edges()
        .iter()
        .filter(|e| e.mu < lo || e.mu > hi)
        .count();
    Ok((circuit.map_mu(|_, mu| mu.clamp(lo, hi))?, changed))
}

/// Effective resistance along the curve of `mode` at each `t`, compared with
/// the exact limit.
pub fn sweep(
    circuit: &Circuit,
    a: NodeId,
    b: NodeId,
    mode: LimitMode,
    t_values: &[f64],
    cfg: &SolveConfig,
) -> Result<SweepReport> {
    circuit.check_node(a)?;
    circuit.check_node(b)?;
    if t_values.is_empty() || t_values.iter().any(|&t| !(t.is_finite() && t >= 1.0)) {
        return Err(Error::InvalidConfig(
            "t values must be finite and >= 1".into(),
        ));
    }
    if t_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "t values must be strictly ascending".into(),
        ));
    }
    let (base, clamped_edges) = if mode.clamps() {
        clamp_mu(circuit)?
    } else {
        (circuit.clone(), 0)
    };
    let oracle_value = mode.oracle(&base, a, b, cfg)?;

    let points = t_values
        .par_iter()
        .map(|&t| {
            let (r, s) = mode.exponents(t);
            let outcome = base
                .with_exponents(r, s)
                .and_then(|c| resistance_and_solution(&c, a, b, cfg, Solver::Msa));
            let mut point = SweepPoint {
                t,
                r,
                s,
                mu: None,
                rel_error: None,
                sweeps: 0,
                residual: 0.0,
                error: None,
            };
            match outcome {
                Ok((mu, sol)) => {
                    point.mu = Some(mu);
                    point.rel_error = mu.relative_error(oracle_value);
                    if let Some(sol) = sol {
                        point.sweeps = sol.sweeps_used;
                        point.residual = sol.residual;
                    }
                }
                Err(Error::NotConverged {
                    sweeps, residual, ..
                }) => {
                    point.sweeps = sweeps;
                    point.residual = residual;
                    point.error = Some(format!("not converged (residual {residual:e})"));
                }
                Err(e) => point.error = Some(e.to_string()),
            }
            point
        })
        .collect();

    Ok(SweepReport {
        mode,
        source: a,
        sink: b,
        oracle_value,
        clamped_edges,
        points,
    })
}

/// Multiplies every resistance by `1 + u * magnitude` with `u` uniform in
/// `(-1, 1)` drawn from the seeded perturbation stream.
pub fn perturb(circuit: &Circuit, magnitude: f64, seed: u64) -> Result<Circuit> {
    if !(0.0..1.0).contains(&magnitude) {
        return Err(Error::InvalidConfig(format!(
            "perturbation magnitude {magnitude} outside [0, 1)"
        )));
    }
    let mut rng = rng_stream(seed, STREAM_PERTURB);
    let factors: Vec<f64> = (0..circuit.edge_count())
        .map(|_| 1.0 + rng.random_range(-1.0..1.0) * magnitude)
        .collect();
    circuit.map_mu(|e, mu| mu * factors[e])
}

/// Largest off-support current as a fraction of the pole current.
pub fn current_concentration(
    solution: &Solution,
    circuit: &Circuit,
    support: &[usize],
) -> Result<f64> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    if let Some(&e) = support.iter().find(|&&e| e >= circuit.edge_count()) {
        return Err(Error::EdgeOutOfRange(e));
    }
    let mut on = vec![false; circuit.edge_count()];
    for &e in support {
        on[e] = true;
    }
    let off = (0..circuit.edge_count())
        .filter(|&e| !on[e])
        .map(|e| solution.y_star[e])
        .fold(0.0, f64::max);
    if off == 0.0 {
        return Ok(0.0);
    }
    Ok(off / solution.pole_current)
}
