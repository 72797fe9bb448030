//! Spiking graph neural network toolkit for event-based tactile object recognition.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`] builds tactile graphs over taxel layouts (manual, kNN, MST + distance
//!   threshold) and the normalized adjacency powers used by the graph convolution.
//! - [`lif`] holds the discrete-time leaky integrate-and-fire dynamics and the
//!   rectangular surrogate derivative.
//! - [`network`] has the spiking layers (TAGConv, fully connected, voting) and the
//!   assembled classifier, plus checkpoint IO.
//! - [`training`] implements the voting loss, backpropagation through time, Adam,
//!   stratified splitting and the multi-round training driver.
//! - [`events`] ingests timestamped taxel events, bins them into spike tensors,
//!   reads dataset manifests and generates synthetic datasets.

pub mod error;
pub mod events;
pub mod graph;
pub mod lif;
pub mod network;
pub mod training;

pub use error::{Error, Result};
pub use events::{
    bin_events, generate_synthetic, load_event_file, load_manifest, Dataset, DatasetManifest, EventStream,
    Sample, SpikeTensor, SynthConfig,
};
pub use graph::{GraphMethod, GraphSpec, TactileGraph, TaxelLayout};
pub use lif::{LifConfig, LifState, SpikeMode};
pub use network::{
    Checkpoint, FcParams, FeatureLayer, ModelParams, NetworkConfig, NetworkState, TactileSgNet,
    TagConvParams, VotingMatrix,
};
pub use training::{
    confusion_matrix, loss, stratified_split, train, AdamState, ConfusionMatrix, EpochMetrics, Metrics,
    RoundsSummary, TrainConfig,
};
