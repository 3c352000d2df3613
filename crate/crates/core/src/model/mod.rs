//! Physical system model: scenario parameters, waveguide propagation,
//! channels and element constraint sets.

pub mod channel;
pub mod config;
pub mod element;
pub mod waveguide;

pub use channel::{generate_channels, generate_channels_seeded, los_steering, ChannelSet};
pub use config::{dbm_to_watts, watts_to_dbm, ChannelParams, ScenarioConfig, SPEED_OF_LIGHT};
pub use element::{project_element, ElementConstraint};
pub use waveguide::{
    build_waveguide, build_waveguide_with, microstrip_coefficients, Feeding, IndexOffset,
    WaveguideModel,
};
