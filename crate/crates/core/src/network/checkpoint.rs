use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelParams, NetworkConfig, TactileSgNet};
use crate::error::{Error, Result};
use crate::graph::{graph_hash, GraphMethod, TactileGraph};

pub const CHECKPOINT_FORMAT: &str = "sgnet-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GraphRecord {
    num_nodes: usize,
    method: GraphMethod,
    edges: Vec<(usize, usize)>,
}

/// JSON checkpoint: configuration, graph (with hash), run metadata and named parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: NetworkConfig,
    pub graph_hash: String,
    graph: GraphRecord,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub class_names: Vec<String>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_model(model: &TactileSgNet) -> Self {
        let graph = model.graph();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            config: model.config().clone(),
            graph_hash: graph.hash(),
            graph: GraphRecord {
                num_nodes: graph.num_nodes(),
                method: graph.method().clone(),
                edges: graph.edges().to_vec(),
            },
            seed: None,
            class_names: Vec::new(),
            tensors: model
                .params()
                .tensors()
                .into_iter()
                .map(|(name, shape, data)| NamedTensor { name, shape, data: data.to_vec() })
                .collect(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        self.class_names = names;
        self
    }

    /// Rebuilds the model, checking the graph hash and every tensor name and shape.
    pub fn to_model(&self) -> Result<TactileSgNet> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        let hash = graph_hash(self.graph.num_nodes, &self.graph.edges);
        if hash != self.graph_hash {
            return Err(Error::Checkpoint("stored graph does not match its hash".into()));
        }
        let graph =
            TactileGraph::from_edges(self.graph.num_nodes, &self.graph.edges, self.graph.method.clone())?;
        self.config.validate()?;
        let mut params = ModelParams::zeros(&self.config, graph.num_nodes());
        let shapes: Vec<(String, Vec<usize>)> =
            params.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
        if shapes.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), (_, slot)) in shapes.iter().zip(params.tensors_mut()) {
            let stored = self
                .tensors
                .iter()
                .find(|t| &t.name == name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if &stored.shape != shape || stored.data.len() != slot.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?} ({} values), expected {shape:?}",
                    stored.shape,
                    stored.data.len()
                )));
            }
            slot.copy_from_slice(&stored.data);
        }
        TactileSgNet::from_params(self.config.clone(), graph, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data { path: path.into(), msg: e.to_string() })
    }
}
