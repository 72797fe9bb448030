//! Reverse-mode gradients through the unrolled LIF recurrence.
//!
//! For each LIF population, walking backwards in time:
//!
//! ```text
//! du[t] = do[t] * s(u[t]) + du[t+1] * beta * (1 - o[t])
//! dI[t] = du[t]
//! ```
//!
//! where `s` is the rectangular surrogate. With [`ResetGradient::Full`] the reset path
//! also contributes `do[t] += du[t+1] * beta * (u_reset - u[t])`.

use ndarray::{Array1, Array2, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use super::loss::loss_with_grad;
use crate::error::{Error, Result};
use crate::lif::{LifConfig, SpikeMode};
use crate::network::{FeatureParams, LayerRecord, ModelParams, NetworkState, TactileSgNet};

/// Whether gradients flow through the `(u_reset - u) * o` reset term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetGradient {
    /// The reset term is a constant during backpropagation.
    #[default]
    Detached,
    /// Exact derivative of the forward recurrence, including the reset path.
    Full,
}

/// `d loss / d I` for one population given `d loss / d o` from above (both `T x n`).
fn lif_backward(
    record: &LayerRecord,
    d_spikes: ArrayView2<'_, f64>,
    cfg: &LifConfig,
    reset: ResetGradient,
) -> Array2<f64> {
    let (steps, n) = record.membrane.dim();
    let mut d_current = Array2::zeros((steps, n));
    let mut du_next = Array1::<f64>::zeros(n);
    for t in (0..steps).rev() {
        let last = t + 1 == steps;
        for i in 0..n {
            let u = record.membrane[[t, i]];
            let o = record.spikes[[t, i]];
            let mut d_o = d_spikes[[t, i]];
            let mut carry = 0.0;
            if !last {
                carry = du_next[i] * cfg.beta * (1.0 - o);
                if reset == ResetGradient::Full {
                    d_o += du_next[i] * cfg.beta * (cfg.u_reset - u);
                }
            }
            let du = d_o * cfg.surrogate(u) + carry;
            d_current[[t, i]] = du;
            du_next[i] = du;
        }
    }
    d_current
}

/// Parameter gradients from a recorded forward pass and `d loss / d o^t` of the output layer.
pub fn backward(
    model: &TactileSgNet,
    state: &NetworkState,
    d_outputs: ArrayView2<'_, f64>,
    reset: ResetGradient,
) -> Result<ModelParams> {
    let params = model.params();
    let cfg = &model.config().lif;
    if state.layers.len() != params.fc.len() + 1 {
        return Err(Error::ShapeMismatch(format!(
            "recorded state has {} layers, network has {}",
            state.layers.len(),
            params.fc.len() + 1
        )));
    }
    let steps = state.timesteps();
    for (l, rec) in state.layers.iter().enumerate() {
        let width = if l == 0 {
            model.config().feature_width(model.graph().num_nodes())
        } else {
            params.fc[l - 1].outputs()
        };
        if rec.membrane.dim() != (steps, width) || rec.spikes.dim() != (steps, width) {
            return Err(Error::ShapeMismatch(format!("recorded layer {l} does not match the network")));
        }
    }
    if d_outputs.dim() != state.outputs().dim() {
        return Err(Error::ShapeMismatch("output gradient does not match the recorded outputs".into()));
    }

    let mut grad = params.zeros_like();
    let mut d_spikes = d_outputs.to_owned();
    for l in (0..params.fc.len()).rev() {
        let d_current = lif_backward(&state.layers[l + 1], d_spikes.view(), cfg, reset);
        let x = state.layers[l].spikes.view();
        d_spikes = params.fc[l].backward_seq(x, d_current.view(), &mut grad.fc[l]);
    }
    let d_current = lif_backward(&state.layers[0], d_spikes.view(), cfg, reset);
    feature_backward(model, state.input.view(), d_current.view(), &mut grad.feature);
    Ok(grad)
}

fn feature_backward(
    model: &TactileSgNet,
    input: ArrayView3<'_, f64>,
    d_current: ArrayView2<'_, f64>,
    grad: &mut FeatureParams,
) {
    let (steps, nodes, channels) = input.dim();
    match (&model.params().feature, grad) {
        (FeatureParams::TagConv(p), FeatureParams::TagConv(g)) => {
            let powers = model.graph().adjacency_powers();
            for t in 0..steps {
                let row = d_current.row(t);
                let dz = row.to_shape((nodes, p.out_features())).expect("row is contiguous");
                p.accumulate_grad(input.index_axis(Axis(0), t), dz.view(), powers, g);
            }
        }
        (FeatureParams::Mlp(p), FeatureParams::Mlp(g)) => {
            let flat = input.to_shape((steps, nodes * channels)).expect("contiguous input");
            p.backward_seq(flat.view(), d_current, g);
        }
        _ => unreachable!("gradient layout mirrors the parameters"),
    }
}

/// Forward pass, voting loss against `y`, and BPTT gradients.
pub fn loss_and_grad(
    model: &TactileSgNet,
    input: ArrayView3<'_, f64>,
    y: &Array1<f64>,
    mode: SpikeMode,
    reset: ResetGradient,
) -> Result<(f64, ModelParams)> {
    let state = model.forward_frames(input, mode)?;
    let (value, d_outputs) = loss_with_grad(state.outputs(), model.voting(), y)?;
    let grad = backward(model, &state, d_outputs.view(), reset)?;
    Ok((value, grad))
}
