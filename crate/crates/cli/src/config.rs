//! Run configuration: a TOML document naming the dataset, architecture,
//! per-phase hyperparameters and outputs.
//!
//! Relative paths inside the file resolve against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use ncsae::data::{
    bow_to_dataset, frequency_filter, info_gain_select, load_bow, load_idx, load_matrix_csv, subset_by_labels,
    Dataset,
};
use ncsae::hyperparams::FINETUNE_LEARNING_RATE;
use ncsae::Hyperparams;
use serde::Deserialize;

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    #[default]
    Idx,
    Csv,
    Bow,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default)]
    pub format: DataFormat,
    /// idx: image file; csv/bow: the data file.
    pub train: PathBuf,
    /// idx only.
    pub train_labels: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Original labels to keep, renumbered in this order.
    pub keep: Option<Vec<usize>>,
    /// csv only.
    #[serde(default)]
    pub has_header: bool,
    #[serde(default = "default_freq_lo")]
    pub freq_lo: u64,
    #[serde(default = "default_freq_hi")]
    pub freq_hi: u64,
    #[serde(default = "default_select")]
    pub select: usize,
}

fn default_freq_lo() -> u64 {
    4
}
fn default_freq_hi() -> u64 {
    70
}
fn default_select() -> usize {
    200
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSection {
    pub hidden: Vec<usize>,
    pub classes: Option<usize>,
}

/// Any subset of the hyperparameter fields.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpOverride {
    pub p: Option<f64>,
    pub beta: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub kappa: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
}

impl HpOverride {
    fn apply(&self, hp: &mut Hyperparams) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { hp.$f = v; } )* };
        }
        set!(p, beta, alpha1, alpha2, kappa, learning_rate, epochs, seed);
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub receptive_fields: bool,
    #[serde(default = "yes")]
    pub histograms: bool,
    #[serde(default = "default_bins")]
    pub hist_bins: usize,
    #[serde(default = "default_range")]
    pub hist_range: [f64; 2],
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            receptive_fields: true,
            histograms: true,
            hist_bins: default_bins(),
            hist_range: default_range(),
        }
    }
}

fn yes() -> bool {
    true
}
fn default_bins() -> usize {
    50
}
fn default_range() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub data: DataSection,
    pub arch: ArchSection,
    #[serde(default)]
    pub hyperparams: HpOverride,
    #[serde(default)]
    pub pretrain: HpOverride,
    #[serde(default)]
    pub softmax: HpOverride,
    #[serde(default)]
    pub finetune: HpOverride,
    #[serde(default)]
    pub output: OutputSection,
}

/// A validated configuration with resolved paths and per-phase settings.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub data: DataSection,
    pub hidden: Vec<usize>,
    pub classes: Option<usize>,
    pub pretrain: Hyperparams,
    pub softmax: Hyperparams,
    pub finetune: Hyperparams,
    pub output: OutputSection,
}

/// Training and test data as loaded for one run.
pub struct RunData {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let raw: RawConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_raw(raw, base, seed)
    }

    pub fn from_raw(raw: RawConfig, base: &Path, seed: Option<u64>) -> anyhow::Result<RunConfig> {
        let phase = |default: Hyperparams, section: &HpOverride, name: &str| -> anyhow::Result<Hyperparams> {
            let mut hp = default;
            raw.hyperparams.apply(&mut hp);
            section.apply(&mut hp);
            if let Some(s) = seed {
                hp.seed = s;
            }
            hp.validate().with_context(|| format!("[{name}] hyperparameters"))?;
            Ok(hp)
        };
        let supervised = || Hyperparams {
            learning_rate: FINETUNE_LEARNING_RATE,
            ..Hyperparams::default()
        };
        let pretrain = phase(Hyperparams::default(), &raw.pretrain, "pretrain")?;
        let softmax = phase(supervised(), &raw.softmax, "softmax")?;
        let finetune = phase(supervised(), &raw.finetune, "finetune")?;

        let mut data = raw.data;
        for p in [
            Some(&mut data.train),
            data.train_labels.as_mut(),
            data.test.as_mut(),
            data.test_labels.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            *p = resolve(base, p);
        }
        let mut output = raw.output;
        output.dir = output.dir.map(|d| resolve(base, &d));

        let cfg = RunConfig {
            data,
            hidden: raw.arch.hidden,
            classes: raw.arch.classes,
            pretrain,
            softmax,
            finetune,
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        ensure!(!self.hidden.is_empty(), "arch.hidden must list at least one layer size");
        ensure!(self.hidden.iter().all(|&h| h > 0), "arch.hidden sizes must be positive, got {:?}", self.hidden);
        if let Some(c) = self.classes {
            ensure!(c >= 2, "arch.classes must be at least 2, got {c}");
            if let Some(keep) = &self.data.keep {
                ensure!(
                    keep.len() == c,
                    "arch.classes is {c} but data.keep lists {} labels",
                    keep.len()
                );
            }
        }
        let d = &self.data;
        let check = |field: &str, p: &Path| -> anyhow::Result<()> {
            ensure!(p.is_file(), "data.{field}: {} does not exist", p.display());
            Ok(())
        };
        check("train", &d.train)?;
        match d.format {
            DataFormat::Idx => {
                let labels = d.train_labels.as_ref().context("data.train_labels is required for idx data")?;
                check("train_labels", labels)?;
                match (&d.test, &d.test_labels) {
                    (Some(t), Some(l)) => {
                        check("test", t)?;
                        check("test_labels", l)?;
                    }
                    (None, None) => {}
                    _ => bail!("data.test and data.test_labels must be given together for idx data"),
                }
            }
            DataFormat::Csv | DataFormat::Bow => {
                ensure!(d.train_labels.is_none(), "data.train_labels only applies to idx data");
                ensure!(d.test_labels.is_none(), "data.test_labels only applies to idx data");
                if let Some(t) = &d.test {
                    check("test", t)?;
                }
            }
        }
        if d.format == DataFormat::Bow {
            ensure!(d.keep.is_none(), "data.keep is not supported for bow data");
            ensure!(d.freq_lo <= d.freq_hi, "data.freq_lo must not exceed data.freq_hi");
            ensure!(d.select > 0, "data.select must be positive");
        }
        let o = &self.output;
        ensure!(o.hist_bins > 0, "output.hist_bins must be positive");
        ensure!(o.hist_range[0] < o.hist_range[1], "output.hist_range must be increasing");
        Ok(())
    }

    /// Output directory: the `--out` flag wins over `output.dir`.
    pub fn out_dir(&self, flag: Option<&Path>) -> anyhow::Result<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .context("no output directory: pass --out or set output.dir")
    }

    pub fn load_data(&self) -> ncsae::Result<RunData> {
        let d = &self.data;
        let keep = |ds: Dataset| match &d.keep {
            Some(k) => subset_by_labels(&ds, k),
            None => Ok(ds),
        };
        match d.format {
            DataFormat::Idx => {
                let train = keep(load_idx(&d.train, d.train_labels.as_ref().expect("validated"))?)?;
                let test = match (&d.test, &d.test_labels) {
                    (Some(t), Some(l)) => Some(keep(load_idx(t, l)?)?),
                    _ => None,
                };
                Ok(RunData { train, test })
            }
            DataFormat::Csv => {
                let train = keep(load_matrix_csv(&d.train, d.has_header, true)?)?;
                let test = d
                    .test
                    .as_ref()
                    .map(|t| load_matrix_csv(t, d.has_header, true).and_then(keep))
                    .transpose()?;
                Ok(RunData { train, test })
            }
            DataFormat::Bow => {
                let corpus = load_bow(&d.train)?;
                let filtered = frequency_filter(&corpus, d.freq_lo, d.freq_hi)?;
                let k = d.select.min(filtered.vocab.len());
                let selected = info_gain_select(&filtered, k)?;
                let test = d
                    .test
                    .as_ref()
                    .map(|t| load_bow(t).and_then(|c| c.align_to(&selected)).map(|c| bow_to_dataset(&c)))
                    .transpose()?;
                Ok(RunData {
                    train: bow_to_dataset(&selected),
                    test,
                })
            }
        }
    }
}

impl RunData {
    /// Number of classes: the configured count, else one past the largest
    /// training label.
    pub fn classes(&self, configured: Option<usize>) -> anyhow::Result<usize> {
        let labels = self.train.labels()?;
        let seen = labels.iter().max().map_or(0, |m| m + 1);
        match configured {
            Some(c) => {
                ensure!(seen <= c, "training labels reach {} but arch.classes is {c}", seen - 1);
                Ok(c)
            }
            None => Ok(seen.max(self.train.num_classes())),
        }
    }
}
