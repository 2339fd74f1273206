//! Seeded test-instance families.
//!
//! All randomness goes through [`rng_stream`], a ChaCha generator keyed by a
//! seed and a stream number, so any instance can be rebuilt from the pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::ext::ExtResistance;

pub const STREAM_GENERATE: u64 = 0;
pub const STREAM_PERTURB: u64 = 1;
pub const STREAM_BOUNDARY: u64 = 2;

/// Independent generator for `(seed, stream)`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    /// Each ordered pair gets an edge with probability `p`.
    RandomDigraph { n: usize, p: f64 },
    /// Each unordered pair gets an antiparallel equal-resistance pair with probability `p`.
    Symmetric { n: usize, p: f64 },
    /// Two-pole series-parallel network between `a` and `b`.
    SeriesParallel { depth: usize },
    /// `a->b` (mu 3), `a->c`, `c->b` (mu 1).
    Triangle,
    /// `a->k, k->c, c->l, l->b, k->l`, all mu 1.
    FiveNode,
    /// Two-pole circuit containing an induced path of `k` interior nodes that
    /// carries no current and admits a continuum of potentials.
    InducedPath { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub family: Family,
    pub seed: u64,
    pub mu_range: (f64, f64),
    pub r: f64,
    pub s: f64,
}

impl GenSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self {
            family,
            seed,
            mu_range: (0.5, 2.0),
            r: 1.0,
            s: 1.0,
        }
    }

    pub fn mu_range(mut self, lo: f64, hi: f64) -> Self {
        self.mu_range = (lo, hi);
        self
    }

    pub fn exponents(mut self, r: f64, s: f64) -> Self {
        self.r = r;
        self.s = s;
        self
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.mu_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad mu range [{lo}, {hi}]")));
        }
        let prob = |p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "edge probability {p} outside [0, 1]"
                )))
            }
        };
        match self.family {
            Family::RandomDigraph { n, p } | Family::Symmetric { n, p } => {
                if n == 0 {
                    return Err(Error::InvalidConfig("n must be positive".into()));
                }
                prob(p)
            }
            Family::SeriesParallel { depth } if depth > 12 => Err(Error::InvalidConfig(format!(
                "depth {depth} too large (max 12)"
            ))),
            Family::InducedPath { k: 0 } => {
                Err(Error::InvalidConfig("induced path needs k >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

fn sample_mu(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

pub fn generate(spec: &GenSpec) -> Result<Circuit> {
    spec.validate()?;
    let mut rng = rng_stream(spec.seed, STREAM_GENERATE);
    let (r, s) = (spec.r, spec.s);
    match spec.family {
        Family::RandomDigraph { n, p } => {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.random_bool(p) {
                        edges.push((u, v, sample_mu(&mut rng, spec.mu_range)));
                    }
                }
            }
            Circuit::new(labels(n), edges, r, s)
        }
        Family::Symmetric { n, p } => {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random_bool(p) {
                        let mu = sample_mu(&mut rng, spec.mu_range);
                        edges.push((u, v, mu));
                        edges.push((v, u, mu));
                    }
                }
            }
            Circuit::new(labels(n), edges, r, s)
        }
        Family::SeriesParallel { depth } => {
            series_parallel(depth, spec.seed, spec.mu_range, r, s).map(|(c, _)| c)
        }
        Family::Triangle => Circuit::builder(r, s)
            .node("a")
            .node("b")
            .node("c")
            .edge("a", "b", 3.0)
            .edge("a", "c", 1.0)
            .edge("c", "b", 1.0)
            .build(),
        Family::FiveNode => Circuit::builder(r, s)
            .node("a")
            .node("b")
            .node("c")
            .node("k")
            .node("l")
            .edge("a", "k", 1.0)
            .edge("k", "c", 1.0)
            .edge("c", "l", 1.0)
            .edge("l", "b", 1.0)
            .edge("k", "l", 1.0)
            .build(),
        Family::InducedPath { k } => {
            // u settles at 1/3 and v at 2/3; the path u -> p1 -> ... -> pk -> v
            // is induced and every nondecreasing assignment on it is a solution.
            let mut b = Circuit::builder(r, s)
                .node("a")
                .node("b")
                .edge("a", "v", 1.0)
                .edge("v", "b", 2.0)
                .edge("a", "u", 2.0)
                .edge("u", "b", 1.0);
            let mut prev = "u".to_string();
            for i in 1..=k {
                let next = format!("p{i}");
                b = b.edge(&prev, &next, 1.0);
                prev = next;
            }
            b.edge(&prev, "v", 1.0).build()
        }
    }
}

/// Composition tree of a series-parallel network.
#[derive(Debug, Clone, PartialEq)]
pub enum SpTree {
    Edge(f64),
    Series(Box<SpTree>, Box<SpTree>),
    Parallel(Box<SpTree>, Box<SpTree>),
}

impl SpTree {
    /// Exact two-pole resistance: parallel `mu^{-s} = sum mu_i^{-s}`, series
    /// `mu^{s/r} = sum mu_i^{s/r}`.
    pub fn resistance(&self, r: f64, s: f64) -> ExtResistance {
        ExtResistance::Finite(self.eval(r, s))
    }

    fn eval(&self, r: f64, s: f64) -> f64 {
        match self {
            SpTree::Edge(mu) => *mu,
            SpTree::Series(x, y) => {
                let p = s / r;
                (x.eval(r, s).powf(p) + y.eval(r, s).powf(p)).powf(1.0 / p)
            }
            SpTree::Parallel(x, y) => {
                (x.eval(r, s).powf(-s) + y.eval(r, s).powf(-s)).powf(-1.0 / s)
            }
        }
    }

    pub fn edge_count(&self) -> usize {
        match self {
            SpTree::Edge(_) => 1,
            SpTree::Series(x, y) | SpTree::Parallel(x, y) => x.edge_count() + y.edge_count(),
        }
    }
}

fn random_tree(rng: &mut ChaCha8Rng, depth: usize, range: (f64, f64)) -> SpTree {
    if depth == 0 || rng.random_bool(0.15) {
        return SpTree::Edge(sample_mu(rng, range));
    }
    let x = Box::new(random_tree(rng, depth - 1, range));
    let y = Box::new(random_tree(rng, depth - 1, range));
    if rng.random_bool(0.5) {
        SpTree::Series(x, y)
    } else {
        SpTree::Parallel(x, y)
    }
}

/// Series-parallel network with poles labelled `a` and `b`, plus its tree.
pub fn series_parallel(
    depth: usize,
    seed: u64,
    mu_range: (f64, f64),
    r: f64,
    s: f64,
) -> Result<(Circuit, SpTree)> {
    let mut rng = rng_stream(seed, STREAM_GENERATE);
    let tree = random_tree(&mut rng, depth, mu_range);
    let mut names = vec!["a".to_string(), "b".to_string()];
    let mut edges = Vec::new();
    realize(&tree, 0, 1, &mut names, &mut edges);
    Ok((Circuit::new(names, edges, r, s)?, tree))
}

fn realize(
    tree: &SpTree,
    from: usize,
    to: usize,
    names: &mut Vec<String>,
    edges: &mut Vec<(usize, usize, f64)>,
) {
    match tree {
        SpTree::Edge(mu) => edges.push((from, to, *mu)),
        SpTree::Series(x, y) => {
            let mid = names.len();
            names.push(format!("n{}", mid - 1));
            realize(x, from, mid, names, edges);
            realize(y, mid, to, names, edges);
        }
        SpTree::Parallel(x, y) => {
            realize(x, from, to, names, edges);
            realize(y, from, to, names, edges);
        }
    }
}
