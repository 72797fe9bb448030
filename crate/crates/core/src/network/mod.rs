//! Spiking layers and the assembled classifier.
//!
//! The default architecture is `Input -> TAGConv -> FC(128) -> FC(256) -> Voting`, with
//! a LIF population after every trainable layer. The MLP variant swaps TAGConv for a
//! fully connected layer over the flattened `N x C` input.

mod checkpoint;
mod layers;
mod voting;

use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::SpikeTensor;
use crate::graph::TactileGraph;
use crate::lif::{LifConfig, SpikeMode};

pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_FORMAT};
pub use layers::{fc_forward, tagconv_forward, FcParams, TagConvParams};
pub use voting::{vote, VotingMatrix};

/// First (feature-extracting) layer of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureLayer {
    /// Graph convolution of polynomial degree `hops` producing `features` per node.
    TagConv { hops: usize, features: usize },
    /// Fully connected layer of `width` neurons over the flattened input.
    Mlp { width: usize },
}

impl Default for FeatureLayer {
    fn default() -> Self {
        FeatureLayer::TagConv { hops: 2, features: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub feature: FeatureLayer,
    pub fc_sizes: Vec<usize>,
    pub num_classes: usize,
    pub input_channels: usize,
    pub lif: LifConfig,
}

impl NetworkConfig {
    pub fn new(num_classes: usize, input_channels: usize) -> Self {
        Self {
            feature: FeatureLayer::default(),
            fc_sizes: vec![128, 256],
            num_classes,
            input_channels,
            lif: LifConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lif.validate()?;
        if self.num_classes < 2 {
            return Err(Error::InvalidParameter("need at least two classes".into()));
        }
        if self.input_channels == 0 {
            return Err(Error::InvalidParameter("need at least one input channel".into()));
        }
        match self.fc_sizes.last() {
            None => return Err(Error::InvalidParameter("fc_sizes must not be empty".into())),
            Some(&n) if n < self.num_classes => {
                return Err(Error::InvalidParameter(format!(
                    "last layer has {n} neurons for {} classes",
                    self.num_classes
                )))
            }
            _ => {}
        }
        if self.fc_sizes.contains(&0) {
            return Err(Error::InvalidParameter("fc layer of width 0".into()));
        }
        match self.feature {
            FeatureLayer::TagConv { features: 0, .. } | FeatureLayer::Mlp { width: 0 } => {
                Err(Error::InvalidParameter("feature layer of width 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// Neuron count of the feature layer for a graph of `num_nodes` nodes.
    pub fn feature_width(&self, num_nodes: usize) -> usize {
        match self.feature {
            FeatureLayer::TagConv { features, .. } => num_nodes * features,
            FeatureLayer::Mlp { width } => width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureParams {
    TagConv(TagConvParams),
    Mlp(FcParams),
}

/// All trainable tensors of the network. Also used to hold gradients and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub feature: FeatureParams,
    pub fc: Vec<FcParams>,
}

impl ModelParams {
    pub fn zeros(config: &NetworkConfig, num_nodes: usize) -> Self {
        Self::build(config, num_nodes, None)
    }

    pub fn init(config: &NetworkConfig, num_nodes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(config, num_nodes, Some(&mut rng))
    }

    fn build(config: &NetworkConfig, num_nodes: usize, mut rng: Option<&mut ChaCha8Rng>) -> Self {
        let c = config.input_channels;
        let feature = match config.feature {
            FeatureLayer::TagConv { hops, features } => FeatureParams::TagConv(match rng.as_deref_mut() {
                Some(rng) => TagConvParams::init(c, features, hops, rng),
                None => TagConvParams::zeros(c, features, hops),
            }),
            FeatureLayer::Mlp { width } => FeatureParams::Mlp(match rng.as_deref_mut() {
                Some(rng) => FcParams::init(num_nodes * c, width, rng),
                None => FcParams::zeros(num_nodes * c, width),
            }),
        };
        let mut fan_in = config.feature_width(num_nodes);
        let mut fc = Vec::with_capacity(config.fc_sizes.len());
        for &width in &config.fc_sizes {
            fc.push(match rng.as_deref_mut() {
                Some(rng) => FcParams::init(fan_in, width, rng),
                None => FcParams::zeros(fan_in, width),
            });
            fan_in = width;
        }
        Self { feature, fc }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, data) in z.tensors_mut() {
            data.fill(0.0);
        }
        z
    }

    /// `(name, shape, values)` for every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        match &self.feature {
            FeatureParams::TagConv(p) => {
                out.push((
                    "feature.tagconv.coeffs".into(),
                    p.coeffs.shape().to_vec(),
                    slice(p.coeffs.as_slice()),
                ));
                out.push(("feature.tagconv.bias".into(), p.bias.shape().to_vec(), slice(p.bias.as_slice())));
            }
            FeatureParams::Mlp(p) => {
                out.push((
                    "feature.mlp.weight".into(),
                    p.weight.shape().to_vec(),
                    slice(p.weight.as_slice()),
                ));
                out.push(("feature.mlp.bias".into(), p.bias.shape().to_vec(), slice(p.bias.as_slice())));
            }
        }
        for (i, p) in self.fc.iter().enumerate() {
            out.push((format!("fc{}.weight", i + 1), p.weight.shape().to_vec(), slice(p.weight.as_slice())));
            out.push((format!("fc{}.bias", i + 1), p.bias.shape().to_vec(), slice(p.bias.as_slice())));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        match &mut self.feature {
            FeatureParams::TagConv(p) => {
                out.push(("feature.tagconv.coeffs".into(), slice_mut(p.coeffs.as_slice_mut())));
                out.push(("feature.tagconv.bias".into(), slice_mut(p.bias.as_slice_mut())));
            }
            FeatureParams::Mlp(p) => {
                out.push(("feature.mlp.weight".into(), slice_mut(p.weight.as_slice_mut())));
                out.push(("feature.mlp.bias".into(), slice_mut(p.bias.as_slice_mut())));
            }
        }
        for (i, p) in self.fc.iter_mut().enumerate() {
            out.push((format!("fc{}.weight", i + 1), slice_mut(p.weight.as_slice_mut())));
            out.push((format!("fc{}.bias", i + 1), slice_mut(p.bias.as_slice_mut())));
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }
}

fn slice(s: Option<&[f64]>) -> &[f64] {
    s.expect("parameter tensors are contiguous")
}

fn slice_mut(s: Option<&mut [f64]>) -> &mut [f64] {
    s.expect("parameter tensors are contiguous")
}

/// Membrane potentials and spikes of one LIF population over the whole window (`T x n`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub membrane: Array2<f64>,
    pub spikes: Array2<f64>,
}

/// Everything a forward pass recorded, as needed by backpropagation through time.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub mode: SpikeMode,
    /// Input frames `(T, N, C)`.
    pub input: Array3<f64>,
    /// Feature layer first, then each FC layer.
    pub layers: Vec<LayerRecord>,
}

impl NetworkState {
    pub fn timesteps(&self) -> usize {
        self.input.dim().0
    }

    /// Spikes of the last layer, `T x output_neurons`.
    pub fn outputs(&self) -> ArrayView2<'_, f64> {
        self.layers.last().expect("network has layers").spikes.view()
    }
}

/// Runs a LIF population over a `T x n` current sequence starting from rest.
pub(crate) fn run_lif(currents: &Array2<f64>, cfg: &LifConfig, mode: SpikeMode) -> LayerRecord {
    let (steps, n) = currents.dim();
    let mut membrane = Array2::zeros((steps, n));
    let mut spikes = Array2::zeros((steps, n));
    let mut u = Array1::<f64>::zeros(n);
    let mut o = Array1::<f64>::zeros(n);
    for t in 0..steps {
        for i in 0..n {
            u[i] = cfg.integrate(u[i], o[i], currents[[t, i]]);
            o[i] = cfg.fire(u[i], mode);
        }
        membrane.row_mut(t).assign(&u);
        spikes.row_mut(t).assign(&o);
    }
    LayerRecord { membrane, spikes }
}

/// The spiking graph classifier: configuration, graph, parameters and the fixed voting decoder.
#[derive(Debug, Clone)]
pub struct TactileSgNet {
    config: NetworkConfig,
    graph: TactileGraph,
    params: ModelParams,
    voting: VotingMatrix,
}

impl TactileSgNet {
    /// Fresh network with parameters drawn from `seed`.
    pub fn new(config: NetworkConfig, graph: TactileGraph, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(&config, graph.num_nodes(), seed);
        Self::from_params(config, graph, params)
    }

    pub fn from_params(config: NetworkConfig, graph: TactileGraph, params: ModelParams) -> Result<Self> {
        config.validate()?;
        let graph = match config.feature {
            FeatureLayer::TagConv { hops, .. } if graph.hops() != hops => graph.with_hops(hops),
            _ => graph,
        };
        let expected = ModelParams::zeros(&config, graph.num_nodes());
        let want = expected.tensors();
        let got = params.tensors();
        if want.len() != got.len() {
            return Err(Error::ShapeMismatch("parameter set does not match the configuration".into()));
        }
        for (w, g) in want.iter().zip(&got) {
            if w.0 != g.0 || w.1 != g.1 {
                return Err(Error::ShapeMismatch(format!(
                    "{} has shape {:?}, configuration needs {} {:?}",
                    g.0, g.1, w.0, w.1
                )));
            }
        }
        let voting = VotingMatrix::new(config.num_classes, *config.fc_sizes.last().expect("validated"))?;
        Ok(Self { config, graph, params, voting })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn graph(&self) -> &TactileGraph {
        &self.graph
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn voting(&self) -> &VotingMatrix {
        &self.voting
    }

    pub fn forward(&self, sample: &SpikeTensor, mode: SpikeMode) -> Result<NetworkState> {
        self.forward_frames(sample.to_frames().view(), mode)
    }

    /// Forward pass over real-valued input frames `(T, N, C)`; spike inputs are the 0/1 case.
    pub fn forward_frames(&self, input: ArrayView3<'_, f64>, mode: SpikeMode) -> Result<NetworkState> {
        let (steps, nodes, channels) = input.dim();
        if steps == 0 {
            return Err(Error::ShapeMismatch("sample has no timesteps".into()));
        }
        if nodes != self.graph.num_nodes() || channels != self.config.input_channels {
            return Err(Error::ShapeMismatch(format!(
                "sample is {nodes} taxels x {channels} channels, network expects {} x {}",
                self.graph.num_nodes(),
                self.config.input_channels
            )));
        }
        let lif = &self.config.lif;
        let currents = match &self.params.feature {
            FeatureParams::TagConv(p) => {
                let width = nodes * p.out_features();
                let mut currents = Array2::zeros((steps, width));
                for t in 0..steps {
                    let z =
                        p.forward(input.index_axis(ndarray::Axis(0), t), self.graph.adjacency_powers())?;
                    let flat = z.as_standard_layout();
                    currents
                        .row_mut(t)
                        .assign(&ndarray::ArrayView1::from(flat.as_slice().expect("standard layout")));
                }
                currents
            }
            FeatureParams::Mlp(p) => {
                let flat = input.to_shape((steps, nodes * channels)).expect("contiguous input frames");
                p.forward_seq(flat.view())?
            }
        };
        let mut layers = vec![run_lif(&currents, lif, mode)];
        for fc in &self.params.fc {
            let x = layers.last().expect("nonempty").spikes.view();
            let currents = fc.forward_seq(x)?;
            layers.push(run_lif(&currents, lif, mode));
        }
        Ok(NetworkState { mode, input: input.to_owned(), layers })
    }

    /// Class scores and predicted label for one sample (hard spikes).
    pub fn predict(&self, sample: &SpikeTensor) -> Result<(Array1<f64>, usize)> {
        let state = self.forward(sample, SpikeMode::Hard)?;
        vote(state.outputs(), &self.voting)
    }
}

/// Forward pass returning the output spike record `o^1..o^T` and the full recorded state.
pub fn model_forward(sample: &SpikeTensor, model: &TactileSgNet) -> Result<(Array2<f64>, NetworkState)> {
    let state = model.forward(sample, SpikeMode::Hard)?;
    Ok((state.outputs().to_owned(), state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_manual, TaxelLayout};
    use ndarray::array;

    fn two_node_graph() -> TactileGraph {
        let layout = TaxelLayout::new(vec![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        build_manual(&layout, &[(0, 1)]).unwrap()
    }

    #[test]
    fn silent_input_gives_silent_network() {
        let config = NetworkConfig::new(2, 2);
        let mut model = TactileSgNet::new(config, two_node_graph(), 1).unwrap();
        // biases could drive spikes on their own; the claim is about the parameter-free path
        for (name, data) in model.params_mut().tensors_mut() {
            if name.ends_with("bias") {
                data.fill(0.0);
            }
        }
        let state = model.forward_frames(Array3::zeros((7, 2, 2)).view(), SpikeMode::Hard).unwrap();
        for layer in &state.layers {
            assert!(layer.spikes.iter().all(|&v| v == 0.0));
            assert!(layer.membrane.iter().all(|&v| v == 0.0));
        }
        assert_eq!(state.outputs().dim(), (7, 256));
    }

    #[test]
    fn hand_traced_single_step() {
        // TAGConv: 1 channel, 1 feature, one hop; input spike on node 0 lands on node 1.
        let config = NetworkConfig {
            feature: FeatureLayer::TagConv { hops: 1, features: 1 },
            fc_sizes: vec![2, 2],
            num_classes: 2,
            input_channels: 1,
            lif: LifConfig::default(),
        };
        let mut tag = TagConvParams::zeros(1, 1, 1);
        tag.coeffs[[0, 0, 1]] = 0.6;
        let fc1 = FcParams { weight: array![[1.0, 0.0], [0.0, 1.0]], bias: array![0.0, 0.1] };
        let fc2 = FcParams { weight: array![[0.0, 0.3], [0.0, 0.7]], bias: array![0.0, 0.0] };
        let params = ModelParams { feature: FeatureParams::TagConv(tag), fc: vec![fc1, fc2] };
        let model = TactileSgNet::from_params(config, two_node_graph(), params).unwrap();
        let input = Array3::from_shape_vec((1, 2, 1), vec![1.0, 0.0]).unwrap();
        let state = model.forward_frames(input.view(), SpikeMode::Hard).unwrap();
        // feature currents A x * 0.6 = [0, 0.6] -> spikes [0, 1]
        assert_eq!(state.layers[0].membrane.row(0), array![0.0, 0.6]);
        assert_eq!(state.layers[0].spikes.row(0), array![0.0, 1.0]);
        // fc1 currents [0, 1.1] -> spikes [0, 1]
        assert_eq!(state.layers[1].spikes.row(0), array![0.0, 1.0]);
        // fc2 currents [0.3, 0.7] -> spikes [0, 1]
        assert_eq!(state.layers[2].membrane.row(0), array![0.3, 0.7]);
        assert_eq!(state.outputs().row(0), array![0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_shapes() {
        let model = TactileSgNet::new(NetworkConfig::new(2, 2), two_node_graph(), 0).unwrap();
        assert!(model.forward_frames(Array3::zeros((3, 3, 2)).view(), SpikeMode::Hard).is_err());
        assert!(model.forward_frames(Array3::zeros((3, 2, 1)).view(), SpikeMode::Hard).is_err());
        assert!(model.forward_frames(Array3::zeros((0, 2, 2)).view(), SpikeMode::Hard).is_err());
        let mut config = NetworkConfig::new(2, 2);
        config.fc_sizes.clear();
        assert!(TactileSgNet::new(config, two_node_graph(), 0).is_err());
        assert!(TactileSgNet::new(NetworkConfig::new(1, 2), two_node_graph(), 0).is_err());
    }

    #[test]
    fn seeded_forward_is_bit_identical() {
        let frames =
            Array3::from_shape_fn((20, 2, 2), |(t, n, c)| ((t * 7 + n * 3 + c) % 3 == 0) as u8 as f64);
        let run = || {
            let model = TactileSgNet::new(NetworkConfig::new(2, 2), two_node_graph(), 42).unwrap();
            model.forward_frames(frames.view(), SpikeMode::Hard).unwrap()
        };
        let (a, b) = (run(), run());
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            assert_eq!(la, lb);
        }
    }

    #[test]
    fn mlp_variant_shapes() {
        let mut config = NetworkConfig::new(3, 2);
        config.feature = FeatureLayer::Mlp { width: 64 };
        let model = TactileSgNet::new(config, two_node_graph(), 0).unwrap();
        let tensors = model.params().tensors();
        assert_eq!(tensors[0].0, "feature.mlp.weight");
        assert_eq!(tensors[0].1, vec![64, 4]);
        assert_eq!(tensors[2].1, vec![128, 64]);
        let state = model.forward_frames(Array3::ones((4, 2, 2)).view(), SpikeMode::Hard).unwrap();
        assert_eq!(state.outputs().dim(), (4, 256));
    }
}
