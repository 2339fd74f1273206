//! Directed monomial resistor networks.
//!
//! Each edge `e = (u, v)` carries current `y*_e = y_e^r / mu_e^s` when the
//! voltage drop `y_e = x_u - x_v` is positive and nothing otherwise.

pub mod balanced;
pub mod circuit;
pub mod dissipation;
pub mod error;
pub mod ext;
pub mod generators;
pub mod limits;
pub mod msa;
pub mod oracles;
pub mod resistance;

pub use balanced::{
    balanced_flow, critical_cut, ratio_sequence, BalancedFlow, Boundary, Cut, CutRatio,
};
pub use circuit::{Circuit, CircuitFile, Edge, EdgeId, NodeId};
pub use dissipation::{
    dissipation_certificate, energy_report, energy_solve, total_heat, EnergyReport,
};
pub use error::{Error, Result};
pub use ext::{ExtReal, ExtResistance};
pub use generators::{generate, series_parallel, Family, GenSpec, SpTree};
pub use limits::{perturb, sweep, LimitMode, SweepReport};
pub use msa::{msa_solve, Solution, SolveConfig, SweepOrder};
pub use oracles::{
    lex_widest_path, max_flow, series_parallel_reduce, shortest_path_length, widest_bottleneck,
};
pub use resistance::{effective_resistance, resistance_matrix, ResistanceMatrix, Solver};
