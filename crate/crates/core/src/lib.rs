//! Relative localization of two radio nodes from multipath components (MPCs)
//! observed in their channels to common third-party observers.
//!
//! The crate provides the channel geometry, a stochastic channel model for
//! simulation, distance and position estimators, MPC association, a Monte
//! Carlo harness and file I/O.

pub mod assignment;
pub mod association;
pub mod channel;
pub mod distance;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod observation;
pub mod optim;
pub mod position;
pub mod rng;
pub mod special;

pub use channel::{ChannelConfig, ChannelModel, Mpc, PathId, Scenario};
pub use error::{Error, Result};
pub use geometry::{MpcGeometry, ProjectionMode, Vec3, C_M_PER_NS};
pub use observation::{MeasuredMpc, Observation, ObserverSets, PairedMpc};
pub use harness::{run_experiment, EstimatorKind, ExperimentConfig, RmseReport};
