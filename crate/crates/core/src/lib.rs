//! Neural-network warm starts for QAOA on MaxCut.
//!
//! The crate simulates the QAOA ansatz exactly on a statevector, optimizes its
//! angles with BFGS, and compares initialization strategies: a linear ramp,
//! TQA, a batch-optimized vector, the average of optimized labels, and a
//! small MLP that predicts angles per graph.
//!
//! ```
//! use qaoa_warmstart::{graph::Graph, simulator::{cost_expectation, QaoaParams}};
//!
//! let g = Graph::from_edges(2, [(0, 1)]).unwrap();
//! let params = QaoaParams::new(vec![std::f64::consts::FRAC_PI_8], vec![std::f64::consts::FRAC_PI_2]).unwrap();
//! assert!((cost_expectation(&g, &params).unwrap() - 1.0).abs() < 1e-12);
//! ```

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod graph;
pub mod initializers;
pub mod neuralnet;
pub mod optimizer;
pub mod pipeline;
pub mod plot;
pub mod seed;
pub mod simulator;

pub use error::{Error, Result};
pub use graph::Graph;
pub use initializers::{InitMethod, Initializer};
pub use pipeline::LabeledInstance;
pub use simulator::{QaoaCircuit, QaoaParams};
