use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{manifest::ManifestEntry, DatasetManifest, Event, EventStream, DEFAULT_BIN_WIDTH};
use crate::error::{Error, Result};
use crate::graph::{knn_selection, TaxelLayout};

/// How class templates choose their taxels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemplateKind {
    /// Taxels are dealt out so no two classes share one.
    Disjoint,
    /// Each class uses a spatial patch: a random center and its nearest neighbors.
    /// Patches of different classes may overlap.
    Patch { taxels_per_class: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub num_channels: usize,
    /// Sample window in seconds.
    pub duration: f64,
    pub bin_width: f64,
    pub seed: u64,
    /// Background events per taxel per second.
    pub noise_rate: f64,
    pub template: TemplateKind,
    /// Range of template firing rates, events per second.
    pub rate_range: (f64, f64),
    /// Uniform onset jitter half-width, seconds.
    pub onset_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 4,
            samples_per_class: 40,
            num_channels: 2,
            duration: 1.0,
            bin_width: DEFAULT_BIN_WIDTH,
            seed: 0,
            noise_rate: 0.0,
            template: TemplateKind::Disjoint,
            rate_range: (20.0, 60.0),
            onset_jitter: 0.03,
        }
    }
}

#[derive(Debug, Clone)]
struct Firing {
    taxel: usize,
    channel: usize,
    rate: f64,
    onset: f64,
    length: f64,
}

fn class_taxels(cfg: &SynthConfig, layout: &TaxelLayout, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    let n = layout.len();
    match cfg.template {
        TemplateKind::Disjoint => {
            if n < cfg.num_classes {
                return Err(Error::InvalidParameter(format!(
                    "{n} taxels cannot give {} classes disjoint templates",
                    cfg.num_classes
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let mut sets = vec![Vec::new(); cfg.num_classes];
            for (i, taxel) in order.into_iter().enumerate() {
                sets[i % cfg.num_classes].push(taxel);
            }
            sets.iter_mut().for_each(|s| s.sort_unstable());
            Ok(sets)
        }
        TemplateKind::Patch { taxels_per_class } => {
            if taxels_per_class == 0 || taxels_per_class > n {
                return Err(Error::InvalidParameter(format!("patch size {taxels_per_class} for {n} taxels")));
            }
            let mut centers: Vec<usize> = (0..n).collect();
            centers.shuffle(rng);
            Ok((0..cfg.num_classes)
                .map(|c| {
                    let center = centers[c % n];
                    let mut set = vec![center];
                    set.extend(knn_selection(layout, center, taxels_per_class - 1));
                    set.sort_unstable();
                    set
                })
                .collect())
        }
    }
}

fn poisson_times(rng: &mut ChaCha8Rng, rate: f64, start: f64, end: f64, out: &mut Vec<f64>) {
    if rate <= 0.0 || end <= start {
        return;
    }
    let gap = Exp::new(rate).expect("positive rate");
    let mut t = start + gap.sample(rng);
    while t < end {
        out.push(t);
        t += gap.sample(rng);
    }
}

/// Writes a labeled synthetic dataset under `out_dir` and returns its manifest.
///
/// Each class has a template: a set of taxels with per-channel firing rates, onsets and
/// active lengths. A sample draws Poisson events from its class template with jittered
/// onsets and rates, plus uniform background noise on every taxel.
pub fn generate_synthetic(
    cfg: &SynthConfig,
    layout: &TaxelLayout,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    if cfg.num_classes < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {}", cfg.num_classes)));
    }
    if cfg.samples_per_class == 0 || cfg.num_channels == 0 {
        return Err(Error::InvalidParameter("samples per class and channels must be positive".into()));
    }
    if !(cfg.duration > 0.0 && cfg.bin_width > 0.0 && cfg.noise_rate >= 0.0) {
        return Err(Error::InvalidParameter(
            "duration and bin width must be positive, noise nonnegative".into(),
        ));
    }
    let (lo, hi) = cfg.rate_range;
    if !(0.0 < lo && lo <= hi) {
        return Err(Error::InvalidParameter("rate range must be positive and ordered".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let taxel_sets = class_taxels(cfg, layout, &mut rng)?;
    let templates: Vec<Vec<Firing>> = taxel_sets
        .iter()
        .map(|taxels| {
            taxels
                .iter()
                .flat_map(|&taxel| (0..cfg.num_channels).map(move |channel| (taxel, channel)))
                .map(|(taxel, channel)| Firing {
                    taxel,
                    channel,
                    rate: rng.random_range(lo..=hi),
                    onset: rng.random_range(0.0..0.5) * cfg.duration,
                    length: rng.random_range(0.3..0.5) * cfg.duration,
                })
                .collect()
        })
        .collect();

    let sample_dir = out_dir.join("samples");
    fs::create_dir_all(&sample_dir).map_err(|e| Error::io(&sample_dir, e))?;

    let mut entries = Vec::with_capacity(cfg.num_classes * cfg.samples_per_class);
    let mut times = Vec::new();
    for (label, template) in templates.iter().enumerate() {
        for i in 0..cfg.samples_per_class {
            let mut events = Vec::new();
            for f in template {
                let onset = f.onset + rng.random_range(-cfg.onset_jitter..=cfg.onset_jitter);
                let rate = f.rate * rng.random_range(0.8..1.2);
                let start = onset.max(0.0);
                let end = (onset + f.length).min(cfg.duration);
                times.clear();
                poisson_times(&mut rng, rate, start, end, &mut times);
                events.extend(times.iter().map(|&timestamp| Event {
                    timestamp,
                    taxel: f.taxel,
                    channel: f.channel,
                }));
            }
            for taxel in 0..layout.len() {
                times.clear();
                poisson_times(&mut rng, cfg.noise_rate, 0.0, cfg.duration, &mut times);
                for &timestamp in &times {
                    let channel = rng.random_range(0..cfg.num_channels);
                    events.push(Event { timestamp, taxel, channel });
                }
            }
            let stream = EventStream::new(events, cfg.duration, layout.len(), cfg.num_channels)?;
            let path = sample_dir.join(format!("class{label:02}_{i:03}.events"));
            stream.save(&path)?;
            entries.push(ManifestEntry { path, label });
        }
    }

    let manifest = DatasetManifest {
        entries,
        class_names: (0..cfg.num_classes).map(|c| format!("class{c:02}")).collect(),
        num_taxels: layout.len(),
        num_channels: cfg.num_channels,
        bin_width: cfg.bin_width,
        duration: cfg.duration,
    };
    layout.save(out_dir.join("layout.txt"))?;
    manifest.save(out_dir.join("manifest.txt"))?;
    Ok(manifest)
}
