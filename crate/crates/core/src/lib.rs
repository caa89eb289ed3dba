//! Cut-based design and verification of jamming-assisted false data injection
//! attacks on DC power system state estimation.
//!
//! A measurement configuration is modelled as a graph whose nodes are buses
//! plus a reference node and whose edges are measurements. Attacks correspond
//! to cuts of that graph; [`attack_design`] searches for cheap feasible cuts,
//! [`oracle`] enumerates them exhaustively for small instances and
//! [`estimator`] replays a plan against a WLS estimator with bad-data removal.

pub mod attack_design;
pub mod attack_graph;
pub mod case_io;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod grid_model;
pub mod harness;
pub mod oracle;

pub use attack_design::{
    cost_gap_bounds, design_detectable_attack, design_hidden_attack, design_jamming_attack, per_cut_optimum,
    AttackKind, AttackPlan, Beta, CostParams, Regime,
};
pub use attack_graph::{global_min_cut, is_feasible, to_graph, to_unit_graph, Cut, MeasurementGraph};
pub use error::{Error, Result};
pub use estimator::{estimate_state, remove_bad_data, simulate_attack};
pub use exec::Execution;
pub use grid_model::{build_system, AugmentedSystem, Grid, Line, Measurement};
pub use oracle::brute_force_optimal;
