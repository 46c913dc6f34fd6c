//! Learned antenna selection and downlink channel extrapolation for
//! FDD massive-MIMO arrays.
//!
//! The pipeline: draw multipath scenarios ([`channel`]), pick `M` of `N`
//! antennas with a Gumbel-Softmax relaxation ([`selection`]), regress the
//! full downlink vector from the selected uplink entries with an MLP
//! ([`mlp`]), and optimize both jointly ([`trainer`]). [`harness`] runs the
//! parameter sweeps.

pub mod channel;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod mlp;
pub mod seed;
pub mod selection;
pub mod trainer;

pub use num_complex::Complex64;

pub use channel::{ArrayGeometry, ChannelVector, GeometryKind, Path, PathSet, ScenarioConfig};
pub use dataset::{Dataset, DatasetSidecar, Sample};
pub use error::{Error, Result};
pub use harness::{ExperimentResult, Method, ResultRow, SweepKind, SweepSpec};
pub use matrix::Matrix;
pub use mlp::{Activation, LayerSpec, NetworkParams};
pub use selection::{GumbelNoise, SelectionLogits, SelectionMatrix};
pub use trainer::{Profile, SelectionMode, TrainConfig, TrainOutcome, TrainedModel};
