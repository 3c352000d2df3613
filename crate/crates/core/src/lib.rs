//! Multi-cell holographic MIMO (HMIMO) downlink beamforming.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: scenario configuration, waveguide propagation, channels and
//!   element constraint sets.
//! * [`wmmse`]: rates, MSE matrices and the WMMSE block updates, including
//!   the closed-form per-RF-chain precoder.
//! * [`binary`]: binary element design (quadratic reformulation, hidden
//!   convexity solver, local search, projection baseline).
//! * [`sphere`]: exact binary element design by accelerated sphere decoding.
//! * [`mm`]: Lorentzian (and unit-modulus) element design by
//!   majorization-minimization.
//! * [`miso`]: closed-form and simulated SNR scaling of single-microstrip
//!   MISO links.
//! * [`harness`]: the overall BCD loop, baselines and experiment sweeps.

pub mod binary;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod miso;
pub mod mm;
pub mod model;
pub mod sphere;
pub mod wmmse;

pub use binary::{ElementDesignProblem, QuadraticForm};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec, RMat, RVec};
pub use model::{ChannelSet, ElementConstraint, Feeding, ScenarioConfig, WaveguideModel};
pub use wmmse::{BeamformerState, Network, RateReport};
