use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sgnet_core::events::TemplateKind;
use sgnet_core::graph::{load_edge_list, GraphExport};
use sgnet_core::training::{evaluate, run_rounds, RoundResult};
use sgnet_core::{
    generate_synthetic, Checkpoint, Dataset, DatasetManifest, GraphSpec, SynthConfig, TactileGraph,
    TaxelLayout,
};

use crate::config::{GraphKind, RunConfig};
use crate::{CliError, EvalArgs, GraphArgs, SynthArgs, TrainArgs};

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn absolute(path: &Path) -> Result<PathBuf, CliError> {
    fs::canonicalize(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn describe(graph: &TactileGraph) -> String {
    let mut out = format!(
        "nodes: {}\nedges: {}\naverage degree: {:.3}\n",
        graph.num_nodes(),
        graph.edges().len(),
        graph.average_degree()
    );
    if let Some(s) = graph.average_selections() {
        out.push_str(&format!("selections per node: {s}\n"));
    }
    out.push_str(&format!("hash: {}\n", graph.hash()));
    out
}

pub fn graph(args: &GraphArgs) -> Result<(), CliError> {
    let layout = match &args.layout {
        Some(path) => TaxelLayout::load(path)?,
        None => TaxelLayout::radial_example(),
    };
    let spec = match args.method {
        GraphKind::Manual => {
            let path = args
                .edges
                .as_deref()
                .ok_or_else(|| CliError::Usage("--method manual needs --edges".into()))?;
            GraphSpec::Manual { edges: load_edge_list(path)? }
        }
        GraphKind::Knn => GraphSpec::Knn { k: args.k },
        GraphKind::Mst => GraphSpec::Mst { sigma_d: args.sigma_d },
    };
    let graph = spec.build(&layout)?;
    let method = match &spec {
        GraphSpec::Manual { .. } => "manual".to_string(),
        GraphSpec::Knn { k } => format!("knn (k = {k})"),
        GraphSpec::Mst { sigma_d } => format!("mst (sigma_d = {sigma_d})"),
    };
    print!("method: {method}\n{}", describe(&graph));
    if let Some(out) = &args.out {
        if let Some(dir) = out.parent() {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        }
        graph.export().save(out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let layout = match &args.layout {
        Some(path) => TaxelLayout::load(path)?,
        None => TaxelLayout::random_grid(args.taxels, &mut ChaCha8Rng::seed_from_u64(args.seed))?,
    };
    let cfg = SynthConfig {
        num_classes: args.classes,
        samples_per_class: args.samples_per_class,
        num_channels: args.channels,
        duration: args.duration,
        bin_width: args.bin_width,
        seed: args.seed,
        noise_rate: args.noise_rate,
        template: match args.patch {
            Some(n) => TemplateKind::Patch { taxels_per_class: n },
            None => TemplateKind::Disjoint,
        },
        rate_range: (args.rate_min, args.rate_max),
        ..SynthConfig::default()
    };
    let manifest = generate_synthetic(&cfg, &layout, &args.out)?;
    println!(
        "wrote {} samples of {} classes ({} taxels, {} channels) to {}",
        manifest.entries.len(),
        manifest.num_classes(),
        manifest.num_taxels,
        manifest.num_channels,
        args.out.join("manifest.txt").display()
    );
    Ok(())
}

fn run_config(args: &TrainArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($field:ident <- $arg:ident),* $(,)?) => {
            $(if let Some(v) = &args.$arg { cfg.$field = v.clone().into(); })*
        };
    }
    set!(manifest <- manifest, layout <- layout, out_dir <- out, graph <- method, k <- k, sigma_d <- sigma_d,
         edges <- edges, feature <- feature, epochs <- epochs, rounds <- rounds,
         learning_rate <- learning_rate, batch_size <- batch_size, seed <- seed);
    Ok(cfg)
}

fn round_dir(out: &Path, round: &RoundResult) -> PathBuf {
    out.join(format!("round_{:02}", round.round + 1))
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = run_config(args)?;
    let manifest_path = absolute(cfg.manifest_path()?)?;
    let layout_path = absolute(&cfg.layout_path()?)?;
    cfg.manifest = Some(manifest_path.clone());
    cfg.layout = Some(layout_path.clone());
    let train_cfg = cfg.train();
    train_cfg.validate()?;

    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
    let manifest = DatasetManifest::parse(&text, &manifest_path)?;
    let data: Dataset = manifest.load_samples()?;
    let layout = TaxelLayout::load(&layout_path)?;
    if layout.len() != manifest.num_taxels {
        return Err(CliError::Data(format!(
            "layout has {} taxels, dataset {}",
            layout.len(),
            manifest.num_taxels
        )));
    }
    let graph = cfg.graph_spec()?.build(&layout)?;
    let network = cfg.network(manifest.num_classes(), manifest.num_channels, layout.len());
    network.validate()?;

    let out = cfg.out_dir.clone();
    write(&out.join("config.toml"), &cfg.to_text())?;
    graph.export().save(out.join("graph.json"))?;
    println!(
        "graph: {} nodes, {} edges, average degree {:.3}",
        graph.num_nodes(),
        graph.edges().len(),
        graph.average_degree()
    );
    println!(
        "dataset: {} samples, {} classes, {} timesteps",
        data.len(),
        data.num_classes(),
        data.samples[0].spikes.timesteps()
    );

    let summary = run_rounds(&data, &graph, &network, &train_cfg, |round| {
        println!(
            "round {:02}: seed {}, test accuracy {:.2}%",
            round.round + 1,
            round.seed,
            100.0 * round.final_accuracy()
        );
        Ok(())
    })?;
    for round in &summary.rounds {
        let dir = round_dir(&out, round);
        write(&dir.join("metrics.csv"), &round.metrics.to_csv())?;
        Checkpoint::from_model(&round.model)
            .with_seed(round.seed)
            .with_class_names(data.class_names.clone())
            .save(dir.join("checkpoint.json"))?;
        if let Some(confusion) = &round.metrics.confusion {
            write(&dir.join("confusion.txt"), &format!("# seed {}\n{}", round.seed, confusion.to_text()))?;
        }
    }

    manifest.subset(&summary.train_indices).save(out.join("train_manifest.txt"))?;
    manifest.subset(&summary.test_indices).save(out.join("test_manifest.txt"))?;
    let mut text = format!("seed {}\nrounds {}\n", cfg.seed, summary.rounds.len());
    for (r, acc) in summary.rounds.iter().zip(summary.accuracies()) {
        text.push_str(&format!("round_{:02} {acc}\n", r.round + 1));
    }
    text.push_str(&format!("mean_std {}\n", summary.formatted()));
    write(&out.join("summary.txt"), &text)?;
    println!("test accuracy over {} rounds: {}", summary.rounds.len(), summary.formatted());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    if let Some(path) = &args.graph {
        let graph = GraphExport::load(path)?;
        if graph.hash != checkpoint.graph_hash {
            return Err(CliError::Data(format!(
                "graph {} (hash {}) does not match the checkpoint's graph (hash {})",
                path.display(),
                graph.hash,
                checkpoint.graph_hash
            )));
        }
    }
    let model = checkpoint.to_model()?;
    let data = Dataset::load(&args.manifest)?;
    let (loss, accuracy, confusion) = evaluate(&model, &data)?;
    println!(
        "test accuracy: {:.2}% ({}/{}), mean loss {loss:.4}",
        100.0 * accuracy,
        confusion.correct(),
        confusion.total()
    );
    print!("{}", confusion.to_text());
    if let Some(out) = &args.out {
        let seed = checkpoint.seed.map_or("unknown".to_string(), |s| s.to_string());
        write(&out.join("confusion.txt"), &format!("# seed {seed}\n{}", confusion.to_text()))?;
        write(
            &out.join("eval.txt"),
            &format!("seed {seed}\nsamples {}\ntest_acc {accuracy}\ntest_loss {loss}\n", confusion.total()),
        )?;
    }
    Ok(())
}
