//! Fault-tolerance simulation of the 3D topological cluster state with
//! heralded bond failures.
//!
//! Weights, probabilities and fits are generic over [`Real`]; the aliases
//! below fix the scalar to `f64` or `f32`.

pub mod damage;
pub mod decoder;
pub mod error;
pub mod experiment;
pub mod lattice;
pub mod matching;
pub mod num;
pub mod oracle;
pub mod rng;

pub use damage::{assess_damage, NoiseParams, Scheme};
pub use decoder::{decode_lattice, Backend};
pub use error::{Error, Result};
pub use experiment::{estimate_threshold, run_batch, run_trial, PointEstimate, SweepSpec, ThresholdEstimate};
pub use lattice::{build_lattice, code_distance, LatticeGeometry, LatticeKind, Site};
pub use matching::mwpm;
pub use num::Real;
pub use oracle::{exact_small_logical_rate, exhaustive_mwpm, OracleConfig};

pub type DistanceTable64 = matching::DistanceTable<f64>;
pub type DistanceTable32 = matching::DistanceTable<f32>;
pub type Matching64 = matching::Matching<f64>;
pub type Matching32 = matching::Matching<f32>;
pub type SyndromeGraph64 = decoder::SyndromeGraph<f64>;
pub type SyndromeGraph32 = decoder::SyndromeGraph<f32>;
pub type Superedge64 = decoder::Superedge<f64>;
pub type Superedge32 = decoder::Superedge<f32>;
pub type QuadraticFit64 = experiment::QuadraticFit<f64>;
pub type QuadraticFit32 = experiment::QuadraticFit<f32>;
