//! Simulation and analysis of identical synchronization in networks of
//! FitzHugh–Nagumo reaction–diffusion systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: uniform cell-centred 2D grids, the zero-flux Laplacian and
//!   integral norms.
//! - [`network`]: coupling matrices with vanishing row and column sums.
//! - [`sync_theory`]: per-edge path loads `α_kl` and the sufficient
//!   synchronization thresholds derived from them.
//! - [`fhn`]: FitzHugh–Nagumo node dynamics and the coupled right-hand side.
//! - [`simulator`]: explicit time integration, initial conditions, traces.
//! - [`diagnostics`]: synchronization errors, the Lyapunov function `V` and
//!   energy monitors.
//! - [`lab`]: minimal-coupling search, node-count sweeps and scaling-law fits.
//! - [`config`] and [`io`]: the key-tree configuration format and file output
//!   used by the `fhnsync` binary.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the command-line tool.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fhn;
pub mod grid;
pub mod io;
pub mod lab;
pub mod network;
pub mod scalar;
pub mod simulator;
pub mod sync_theory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Grid64 = grid::Grid<f64>;
pub type Field64 = grid::Field<f64>;
pub type CouplingMatrix64 = network::CouplingMatrix<f64>;
pub type FhnParams64 = fhn::FhnParams<f64>;
pub type NetworkState64 = simulator::NetworkState<f64>;
pub type SimConfig64 = simulator::SimConfig<f64>;
pub type SyncTrace64 = diagnostics::SyncTrace<f64>;
pub type ThresholdResult64 = lab::ThresholdResult<f64>;

pub type Grid32 = grid::Grid<f32>;
pub type Field32 = grid::Field<f32>;
pub type CouplingMatrix32 = network::CouplingMatrix<f32>;
pub type FhnParams32 = fhn::FhnParams<f32>;
pub type NetworkState32 = simulator::NetworkState<f32>;
pub type SimConfig32 = simulator::SimConfig<f32>;
