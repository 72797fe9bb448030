use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use sgnet_core::graph::load_edge_list;
use sgnet_core::training::ResetGradient;
use sgnet_core::{FeatureLayer, GraphSpec, LifConfig, NetworkConfig, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Manual,
    Knn,
    Mst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Tagconv,
    Mlp,
}

/// Everything a training run needs, read from a flat `key = value` file.
///
/// ```toml
/// manifest = "data/manifest.txt"
/// graph = "knn"
/// k = 3
/// epochs = 50
/// seed = 7
/// ```
///
/// Relative paths in a config file are taken relative to that file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    /// Defaults to `layout.txt` next to the manifest.
    pub layout: Option<PathBuf>,
    pub out_dir: PathBuf,

    pub graph: GraphKind,
    pub k: usize,
    pub sigma_d: f64,
    pub edges: Option<PathBuf>,

    pub feature: FeatureKind,
    pub hops: usize,
    pub features: usize,
    /// MLP baseline width; defaults to the TAGConv output width.
    pub mlp_width: Option<usize>,
    pub fc_sizes: Vec<usize>,

    pub beta: f64,
    pub u_threshold: f64,
    pub u_reset: f64,
    pub surrogate_width: f64,

    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub rounds: usize,
    pub split_fraction: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub reset_gradient: ResetGradient,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let lif = LifConfig::default();
        Self {
            manifest: None,
            layout: None,
            out_dir: PathBuf::from("runs/latest"),
            graph: GraphKind::Mst,
            k: 2,
            sigma_d: 0.0,
            edges: None,
            feature: FeatureKind::Tagconv,
            hops: 2,
            features: 64,
            mlp_width: None,
            fc_sizes: vec![128, 256],
            beta: lif.beta,
            u_threshold: lif.u_threshold,
            u_reset: lif.u_reset,
            surrogate_width: lif.surrogate_width,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            rounds: train.rounds,
            split_fraction: train.split_fraction,
            seed: train.seed,
            adam_beta1: train.adam_betas.0,
            adam_beta2: train.adam_betas.1,
            adam_eps: train.adam_eps,
            reset_gradient: train.reset,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.manifest, &mut cfg.layout, &mut cfg.edges].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn manifest_path(&self) -> Result<&Path, CliError> {
        let path = self.manifest.as_deref().ok_or_else(|| CliError::Usage("no manifest given".into()))?;
        if !path.is_file() {
            return Err(CliError::Data(format!("manifest {} does not exist", path.display())));
        }
        Ok(path)
    }

    pub fn layout_path(&self) -> Result<PathBuf, CliError> {
        let path = match &self.layout {
            Some(p) => p.clone(),
            None => self.manifest_path()?.with_file_name("layout.txt"),
        };
        if !path.is_file() {
            return Err(CliError::Data(format!("layout {} does not exist", path.display())));
        }
        Ok(path)
    }

    pub fn graph_spec(&self) -> Result<GraphSpec, CliError> {
        Ok(match self.graph {
            GraphKind::Manual => {
                let path = self
                    .edges
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("the manual graph needs an edge file".into()))?;
                GraphSpec::Manual { edges: load_edge_list(path)? }
            }
            GraphKind::Knn => GraphSpec::Knn { k: self.k },
            GraphKind::Mst => GraphSpec::Mst { sigma_d: self.sigma_d },
        })
    }

    pub fn network(&self, num_classes: usize, num_channels: usize, num_taxels: usize) -> NetworkConfig {
        let feature = match self.feature {
            FeatureKind::Tagconv => FeatureLayer::TagConv { hops: self.hops, features: self.features },
            FeatureKind::Mlp => {
                FeatureLayer::Mlp { width: self.mlp_width.unwrap_or(num_taxels * self.features) }
            }
        };
        NetworkConfig {
            feature,
            fc_sizes: self.fc_sizes.clone(),
            num_classes,
            input_channels: num_channels,
            lif: LifConfig {
                beta: self.beta,
                u_threshold: self.u_threshold,
                u_reset: self.u_reset,
                surrogate_width: self.surrogate_width,
            },
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            rounds: self.rounds,
            split_fraction: self.split_fraction,
            seed: self.seed,
            adam_betas: (self.adam_beta1, self.adam_beta2),
            adam_eps: self.adam_eps,
            reset: self.reset_gradient,
        }
    }
}
