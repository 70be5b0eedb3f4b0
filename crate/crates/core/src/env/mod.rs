//! Cortico-basal-ganglia-thalamic network of Hodgkin-Huxley neurons with
//! DBS current injection into the STN.

pub mod closed_loop;
pub mod config;
pub mod hh;
pub mod network;

pub use closed_loop::{ClosedLoopEnv, EpisodeConfig, Observation};
pub use config::{
    circuit_sign, ConnectionSpec, Mode, NetworkConfig, ParkinsonianGains, PopulationId, PopulationSpec, Sign,
    StimConfig, SynapseParams, CIRCUIT, N_POPULATIONS, POP_SIZE,
};
pub use hh::{hh_derivatives, resting_potential, Gates, GatesDerivative, HhParams};
pub use network::{GpiTrace, NetworkState, NeuronState, Stimulate, N_NEURONS};
