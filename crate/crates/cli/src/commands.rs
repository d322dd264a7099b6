//! The four subcommands. Each computes every artifact in memory first and
//! only then creates the output directory and writes files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use ncsae::export::{decay_curves_csv, render_receptive_fields, standard_decay_settings};
use ncsae::params::{ae_params_file, network_file, network_from_file, ae_params_from_file, ParamFile, ParamKind};
use ncsae::{
    evaluate_accuracy, finetune as finetune_network, kl_sparsity_measure, nonneg_fraction, predict,
    reconstruction_error, stack_pretrain, train_softmax, weight_histogram, Dataset, Matrix, StackedNetwork,
};
use serde::Serialize;

use crate::config::{RunConfig, RunData};
use crate::{ExportKind, Split};

/// A failed command: `Usage` exits 2, `Runtime` exits 1.
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn usage_err<T>(msg: String) -> Result<T, Failure> {
    Err(Failure::Usage(anyhow!(msg)))
}

/// Files to write, relative to the output directory.
#[derive(Default)]
struct Artifacts(Vec<(String, Vec<u8>)>);

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.0.push((name.into(), bytes.into()));
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).runtime()?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    fn write(self, dir: &Path) -> Result<(), Failure> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .runtime()?;
        for (name, bytes) in self.0 {
            let path = dir.join(&name);
            fs::write(&path, bytes)
                .with_context(|| format!("cannot write {}", path.display()))
                .runtime()?;
            log::info!("wrote {}", path.display());
        }
        Ok(())
    }
}

/// Tile shape for a layer with `n` inputs: the dataset's image shape when it
/// matches, else a square when `n` is a perfect square, else one row.
fn tile_shape(n: usize, image_dims: Option<(usize, usize)>) -> (usize, usize) {
    if let Some((r, c)) = image_dims {
        if r * c == n {
            return (r, c);
        }
    }
    let s = (n as f64).sqrt().round() as usize;
    if s * s == n {
        (s, s)
    } else {
        (1, n)
    }
}

fn grid_cols(units: usize, tile: (usize, usize)) -> usize {
    if tile.0 == 1 {
        1
    } else {
        (units as f64).sqrt().ceil() as usize
    }
}

#[derive(Serialize)]
struct PretrainMetrics {
    phase: &'static str,
    epochs: usize,
    recon: f64,
    kl_sparsity: f64,
    nonneg_fraction_per_layer: Vec<f64>,
    recon_per_layer: Vec<f64>,
    kl_sparsity_per_layer: Vec<f64>,
    layer_sizes: Vec<usize>,
    input_dim: usize,
    seed: u64,
}

struct LayerStats {
    recon: Vec<f64>,
    kl: Vec<f64>,
    nonneg: Vec<f64>,
}

/// Per-layer reconstruction error, KL sparsity (against `p`) and nonnegative
/// share of `w1`, each layer evaluated on the features feeding it.
fn layer_stats(net: &StackedNetwork, x: &Matrix, p: f64) -> ncsae::Result<LayerStats> {
    let mut s = LayerStats {
        recon: Vec::new(),
        kl: Vec::new(),
        nonneg: Vec::new(),
    };
    let mut input = x.clone();
    for e in &net.encoders {
        s.recon.push(reconstruction_error(e, &input)?);
        s.kl.push(kl_sparsity_measure(e, &input, p)?);
        s.nonneg.push(nonneg_fraction(&e.w1)?);
        input = e.encode(&input)?;
    }
    Ok(s)
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, Failure> {
    RunConfig::load(path, seed).usage()
}

pub fn pretrain(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config, seed)?;
    let out = cfg.out_dir(out).usage()?;
    let data = cfg.load_data().runtime()?;
    let hp = &cfg.pretrain;
    let (net, reports) = stack_pretrain(&data.train.x, &cfg.hidden, hp).runtime()?;

    let mut files = Artifacts::default();
    let mut input_dims = data.train.image_dims;
    for (i, (enc, report)) in net.encoders.iter().zip(&reports).enumerate() {
        files.add(format!("layer{i}.params"), ae_params_file(enc).to_text());
        files.add(format!("layer{i}_report.csv"), report.to_csv());
        if cfg.output.receptive_fields {
            let tile = tile_shape(enc.n_visible(), input_dims);
            let img = render_receptive_fields(&enc.w1, tile.0, tile.1, grid_cols(enc.n_hidden(), tile)).runtime()?;
            files.add(format!("layer{i}_rf.pgm"), img.to_pgm());
        }
        if cfg.output.histograms {
            let [lo, hi] = cfg.output.hist_range;
            let h = weight_histogram(&enc.w1, cfg.output.hist_bins, lo, hi).runtime()?;
            files.add(format!("layer{i}_hist.csv"), h.to_csv());
        }
        input_dims = None;
    }
    files.add("network.params", network_file(&net).to_text());

    let stats = layer_stats(&net, &data.train.x, hp.p).runtime()?;
    let metrics = PretrainMetrics {
        phase: "pretrain",
        epochs: hp.epochs,
        recon: stats.recon[0],
        kl_sparsity: stats.kl[0],
        nonneg_fraction_per_layer: stats.nonneg,
        recon_per_layer: stats.recon,
        kl_sparsity_per_layer: stats.kl,
        layer_sizes: cfg.hidden.clone(),
        input_dim: data.train.x.cols(),
        seed: hp.seed,
    };
    files.json("metrics.json", &metrics)?;
    files.write(&out)?;
    println!("pretrained {} layer(s) into {}", net.encoders.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct FinetuneMetrics {
    phase: &'static str,
    epochs: usize,
    softmax_epochs: usize,
    recon: f64,
    kl_sparsity: f64,
    nonneg_fraction_per_layer: Vec<f64>,
    accuracy_before: f64,
    accuracy_after: f64,
    train_accuracy_before: f64,
    train_accuracy_after: f64,
    evaluated_on: &'static str,
    classes: usize,
    seed: u64,
}

fn check_shapes(net: &StackedNetwork, cfg: &RunConfig, data: &RunData, source: &Path) -> Result<(), Failure> {
    let cols = data.train.x.cols();
    if net.input_dim() != Some(cols) {
        return usage_err(format!(
            "{} expects {} inputs but the dataset has {cols} features",
            source.display(),
            net.input_dim().unwrap_or(0)
        ));
    }
    if net.layer_sizes() != cfg.hidden {
        return usage_err(format!(
            "{} has hidden layers {:?} but arch.hidden is {:?}",
            source.display(),
            net.layer_sizes(),
            cfg.hidden
        ));
    }
    Ok(())
}

pub fn finetune(config: &Path, pretrained: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config, seed)?;
    let out = cfg.out_dir(out).usage()?;
    let source = pretrained.join("network.params");
    if !source.is_file() {
        return usage_err(format!("{} does not exist; run pretrain first", source.display()));
    }
    let data = cfg.load_data().runtime()?;
    let net = network_from_file(ParamFile::load(&source).runtime()?)
        .with_context(|| format!("loading {}", source.display()))
        .runtime()?;
    check_shapes(&net, &cfg, &data, &source)?;
    let classes = data.classes(cfg.classes).usage()?;
    let labels = data.train.labels().runtime()?;

    let features = net.features(&data.train.x).runtime()?;
    let (head, softmax_report) = train_softmax(&features, labels, classes, &cfg.softmax).runtime()?;
    let mut net = net;
    net.softmax = Some(head);

    let (eval_set, evaluated_on) = match &data.test {
        Some(t) => (t, "test"),
        None => (&data.train, "train"),
    };
    let eval_labels = eval_set.labels().runtime()?;
    let before = evaluate_accuracy(&net, &eval_set.x, eval_labels).runtime()?;
    let train_before = evaluate_accuracy(&net, &data.train.x, labels).runtime()?;
    let (tuned, report) = finetune_network(&net, &data.train.x, labels, &cfg.finetune).runtime()?;
    let after = evaluate_accuracy(&tuned, &eval_set.x, eval_labels).runtime()?;
    let train_after = evaluate_accuracy(&tuned, &data.train.x, labels).runtime()?;
    let stats = layer_stats(&tuned, &data.train.x, cfg.pretrain.p).runtime()?;

    let mut files = Artifacts::default();
    files.add("network.params", network_file(&tuned).to_text());
    files.add("softmax_report.csv", softmax_report.to_csv());
    files.add("finetune_report.csv", report.to_csv());
    files.json(
        "metrics.json",
        &FinetuneMetrics {
            phase: "finetune",
            epochs: cfg.finetune.epochs,
            softmax_epochs: cfg.softmax.epochs,
            recon: stats.recon[0],
            kl_sparsity: stats.kl[0],
            nonneg_fraction_per_layer: stats.nonneg,
            accuracy_before: before,
            accuracy_after: after,
            train_accuracy_before: train_before,
            train_accuracy_after: train_after,
            evaluated_on,
            classes,
            seed: cfg.finetune.seed,
        },
    )?;
    files.write(&out)?;
    println!("accuracy before fine-tuning ({evaluated_on}): {before}");
    println!("accuracy after fine-tuning ({evaluated_on}): {after}");
    Ok(())
}

#[derive(Serialize)]
struct ClassReport {
    class: usize,
    name: String,
    examples: usize,
    correct: usize,
    accuracy: f64,
}

#[derive(Serialize)]
struct EvalReport {
    model: String,
    split: &'static str,
    examples: usize,
    accuracy: f64,
    per_class: Vec<ClassReport>,
}

pub fn eval(model: &Path, config: &Path, split: Split, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    if !model.is_file() {
        return usage_err(format!("model {} does not exist", model.display()));
    }
    let cfg = load_config(config, seed)?;
    let out = cfg.out_dir(out).usage()?;
    let net = network_from_file(ParamFile::load(model).runtime()?)
        .with_context(|| format!("loading {}", model.display()))
        .runtime()?;
    let Some(head) = &net.softmax else {
        return usage_err(format!("{} has no softmax layer; run finetune first", model.display()));
    };
    let data = cfg.load_data().runtime()?;
    check_shapes(&net, &cfg, &data, model)?;
    let (set, split_name): (&Dataset, _) = match split {
        Split::Train => (&data.train, "train"),
        Split::Test => match &data.test {
            Some(t) => (t, "test"),
            None => return usage_err("the config defines no test data; use --split train".into()),
        },
    };
    let labels = set.labels().runtime()?;
    let (_, predicted) = predict(&net, &set.x).runtime()?;
    let classes = head.classes();
    let mut per_class: Vec<ClassReport> = (0..classes)
        .map(|c| ClassReport {
            class: c,
            name: set
                .class_names
                .as_ref()
                .and_then(|n| n.get(c).cloned())
                .unwrap_or_else(|| c.to_string()),
            examples: 0,
            correct: 0,
            accuracy: 0.0,
        })
        .collect();
    let mut correct = 0;
    for (&p, &y) in predicted.iter().zip(labels) {
        if y >= classes {
            return usage_err(format!("label {y} outside the model's {classes} classes"));
        }
        per_class[y].examples += 1;
        if p == y {
            per_class[y].correct += 1;
            correct += 1;
        }
    }
    for c in &mut per_class {
        c.accuracy = if c.examples == 0 {
            0.0
        } else {
            c.correct as f64 / c.examples as f64
        };
    }
    let report = EvalReport {
        model: model.display().to_string(),
        split: split_name,
        examples: labels.len(),
        accuracy: if labels.is_empty() {
            0.0
        } else {
            correct as f64 / labels.len() as f64
        },
        per_class,
    };
    let mut files = Artifacts::default();
    files.json("eval.json", &report)?;
    files.write(&out)?;
    println!("accuracy: {}", report.accuracy);
    for c in &report.per_class {
        println!("class {}: {} ({}/{})", c.name, c.accuracy, c.correct, c.examples);
    }
    Ok(())
}

pub struct ExportArgs {
    pub what: ExportKind,
    pub model: Option<PathBuf>,
    pub layer: usize,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub tile: Option<String>,
    pub grid_cols: Option<usize>,
    pub normalize: bool,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

fn parse_tile(s: &str) -> Result<(usize, usize), Failure> {
    let parsed = s
        .split_once(['x', 'X'])
        .and_then(|(r, c)| Some((r.trim().parse().ok()?, c.trim().parse().ok()?)));
    match parsed {
        Some((r, c)) if r > 0 && c > 0 => Ok((r, c)),
        _ => usage_err(format!("--tile expects ROWSxCOLS, got {s:?}")),
    }
}

/// Encoder weights of `layer` from a network or single-autoencoder file.
fn encoder_weights(model: &Path, layer: usize) -> Result<Matrix, Failure> {
    if !model.is_file() {
        return usage_err(format!("model {} does not exist", model.display()));
    }
    let file = ParamFile::load(model)
        .with_context(|| format!("loading {}", model.display()))
        .runtime()?;
    let encoders = match file.kind {
        ParamKind::Ae => vec![ae_params_from_file(file).runtime()?],
        ParamKind::Network => network_from_file(file).runtime()?.encoders,
    };
    let count = encoders.len();
    match encoders.into_iter().nth(layer) {
        Some(e) => Ok(e.w1),
        None => usage_err(format!("--layer {layer} out of range: {} has {count} layer(s)", model.display())),
    }
}

pub fn export(args: ExportArgs) -> Result<(), Failure> {
    let mut files = Artifacts::default();
    match args.what {
        ExportKind::Rf => {
            let model = args.model.as_deref().ok_or_else(|| Failure::Usage(anyhow!("rf export needs --model")))?;
            let mut w = encoder_weights(model, args.layer)?;
            if args.normalize {
                let max = w.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if max > 0.0 {
                    w = w.map(|v| v / max);
                }
            }
            let tile = match &args.tile {
                Some(s) => parse_tile(s)?,
                None => tile_shape(w.cols(), None),
            };
            let cols = args.grid_cols.unwrap_or_else(|| grid_cols(w.rows(), tile));
            let img = render_receptive_fields(&w, tile.0, tile.1, cols).usage()?;
            files.add(format!("layer{}_rf.pgm", args.layer), img.to_pgm());
        }
        ExportKind::Hist => {
            let model = args.model.as_deref().ok_or_else(|| Failure::Usage(anyhow!("hist export needs --model")))?;
            let w = encoder_weights(model, args.layer)?;
            let h = weight_histogram(&w, args.bins, args.lo, args.hi).usage()?;
            files.add(format!("layer{}_hist.csv", args.layer), h.to_csv());
        }
        ExportKind::Decay => {
            let mut settings = standard_decay_settings();
            if let Some(cfg) = &args.config {
                let kappa = load_config(cfg, None)?.pretrain.kappa;
                for s in &mut settings {
                    s.kappa = kappa;
                }
            }
            let csv = decay_curves_csv(&settings, args.lo, args.hi, args.steps).usage()?;
            files.add("decay_curves.csv", csv);
        }
    }
    files.write(&args.out)
}
