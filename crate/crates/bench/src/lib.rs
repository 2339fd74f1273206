//! Fixtures shared by the solver benchmarks.

use qmcircuit::{generate, Circuit, Family, GenSpec};

/// Random digraph with fixed seed, `n` nodes and exponents `(r, s)`.
pub fn random(n: usize, r: f64, s: f64) -> Circuit {
    generate(&GenSpec::new(Family::RandomDigraph { n, p: 0.4 }, 7).exponents(r, s))
        .expect("valid generator spec")
}

/// Boundary with one unit source at node 0 and the sinks spread evenly.
pub fn spread_boundary(n: usize) -> Vec<f64> {
    let mut b = vec![-1.0 / (n - 1) as f64; n];
    b[0] = 1.0;
    b
}
