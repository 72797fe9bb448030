//! Loss, gradients, optimisation and the experiment protocol.

mod adam;
mod bptt;
mod loss;
mod metrics;
mod split;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use bptt::{backward, loss_and_grad, ResetGradient};
pub use loss::{loss, loss_with_grad, one_hot};
pub use metrics::{format_mean_std, mean_std, ConfusionMatrix, EpochMetrics, Metrics};
pub use split::stratified_split;
pub use trainer::{confusion_matrix, evaluate, run_rounds, train, RoundResult, RoundsSummary, TrainConfig};
