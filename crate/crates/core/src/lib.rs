//! Rotated surface code memory experiments under circuit-level noise, minimum-weight
//! perfect matching decoding, expectation-value estimation and infinite-distance
//! extrapolation.

pub mod circuit;
pub mod decoder;
pub mod dem;
pub mod error;
pub mod ev;
pub mod extrapolation;
pub mod frame;
pub mod jsonfloat;
pub mod layout;
pub mod noise;
pub mod pauli;
pub mod pipeline;
pub mod shots;
pub mod tableau;

pub use circuit::{build_memory_circuit, Basis, MemoryCircuit, PrepState};
pub use error::{Error, Result};
pub use frame::{sample_shots, FrameSampler};
pub use layout::{build_patch, SurfaceCodePatch};
pub use noise::{apply_si1000, NoiseParams, NoisyCircuit};
pub use shots::ShotBatch;
pub use tableau::{tableau_simulate, validate_determinism};
