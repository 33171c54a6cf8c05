//! Secrecy-capacity optimization for a full-duplex jamming receiver assisted by a
//! simultaneously transmitting and reflecting RIS (STAR-RIS).
//!
//! The crate is organised bottom-up:
//!
//! * [`channels`] synthesizes every link of one channel realization from node
//!   geometry and fading parameters.
//! * [`system`] holds RIS configurations and beamformers and evaluates rates,
//!   self-interference, jamming power and feasibility.
//! * [`sca`] contains the convexification toolbox and the per-block surrogate
//!   builders.
//! * [`solver`] solves the surrogates (log-barrier Newton) and the semidefinite
//!   relaxation used for mode selection.
//! * [`mode`] lifts the binary mode-switching problem and rounds it with
//!   Gaussian randomization.
//! * [`ao`] runs the alternating optimization and the two reference schemes.
//! * [`experiments`] is the seeded Monte-Carlo harness behind the `starjam` CLI.

pub mod ao;
pub mod channels;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod mode;
pub mod sca;
pub mod solver;
pub mod system;

pub use ao::{AoOptions, AoState, AoTrace, InitStrategy, Mode};
pub use channels::{dbm_to_watts, ChannelParams, ChannelSet, GainModel, Geometry};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use sca::{ConvexProblem, QuadraticForm};
pub use solver::{Solution, SolverOptions};
pub use system::{Beamformers, EsRisConfig, LinkMetrics, MsRisConfig, RisConfig, SystemParams};
