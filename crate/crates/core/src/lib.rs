//! Layer-wise interpretability for transpose-convolution waveform generators.
//!
//! The crate runs a generator forward pass while keeping every intermediate
//! layer, collapses each layer to a single time series by averaging its
//! post-ReLU feature maps, sweeps individual latent entries, and measures
//! acoustic properties (F0, intensity, formants, durations) of both the
//! generated audio and the layer probes.

pub mod acoustics;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod generator;
pub mod io;
pub mod probe;
pub mod sweep;
pub mod tensor;

pub use error::{Error, LgwError, Result};
pub use generator::{
    forward, forward_until, sample_latent, ForwardTrace, GeneratorSpec, LatentVector, WeightBundle, OUTPUT_SAMPLES,
    SAMPLE_RATE,
};
pub use probe::{average_feature_maps, probe_to_waveform, LayerProbe};
pub use sweep::{run_sweep, sweep_energy_profile, SweepResult, SweepSpec, SweepTarget};
pub use tensor::{Rng, Tensor};
