//! Simulation and certification toolkit for networks of interacting
//! stochastic processes indexed by a d-dimensional torus, with sparse,
//! random, unscaled connections.
//!
//! The system integrated here is, per site `j` of the cube `V_n = {-n..n}^d`,
//!
//! ```text
//! U^j_t = ∫_0^t ( b_s(U^j) + Σ_{k ∈ V_n} Λ^k_s(J^{j,k}, U^j, U^{(j+k) mod V_n}) ) ds + W^j_t
//! ```
//!
//! with internal FitzHugh-Nagumo dynamics `b`, Hebbian-learned interaction
//! weights inside `Λ`, Brownian driving noise `W`, and a random connection
//! field `J` sampled either from an independent base measure with
//! super-exponentially decaying connection probability or from a Gibbs
//! tilt of that base measure.
//!
//! Beyond simulation, every module carries numeric certificates for the
//! inequalities that make the large-size limit work: summable weight
//! sequences `λ_m^j` with their convolution identities, a-priori Gronwall
//! bounds on trajectories, truncation-error pair bounds, membership
//! thresholds for the compactness sets `A_c`, and exact Lévy-Prokhorov
//! distances between empirical measures.

pub mod config;
pub mod connectivity;
pub mod dynamics;
pub mod harness;
pub mod lattice;
pub mod measure;
pub mod rng;
pub mod solver;
pub mod weights;

pub use lattice::{cube, LatticeVec, TorusSpec};
