//! End-to-end experiment configuration and pipelines: data, split training,
//! attack and evaluation, plus the ablation report.
//!
//! Configs are flat `key = value` text. Blank lines and lines starting with
//! `#` are ignored; lists are comma separated; unknown keys are errors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    dataset_from_idx, empirical_prior, generate_blobs, generate_imbalanced_binary, parse_idx, read_dataset,
    Dataset, LabelPrior,
};
use crate::defense::NoiseConfig;
use crate::error::{invalid, Error, Result};
use crate::eval::{leak_accuracy, test_accuracy};
use crate::gia::{run_gia, AttackConfig, AttackResult, EpochChoice, PriorScope, Regularizers, SelectionObjective};
use crate::nn::{MlpModel, OptimizerKind};
use crate::numerics::{derive_seed, Rng};
use crate::protocol::{split_train, SplitOutcome, TrainConfig, Transcript};

/// Version tags of every file format the tools write.
pub const FORMAT_VERSIONS: &[(&str, u32)] =
    &[("wire", 1), ("transcript", 1), ("checkpoint", 1), ("dataset", 1), ("config", 1)];

/// Formats like C's `%.9g`.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 9;
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (P - 1 - exp) as usize, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Blobs { classes: usize, n: usize, dim: usize, spread: f64 },
    Imbalanced { n: usize, dim: usize, positive_rate: f64 },
    /// A pair of IDX files; `classes` defaults to the largest label + 1.
    Idx { images: PathBuf, labels: PathBuf, classes: Option<usize> },
    /// A dataset file written by `write_dataset`.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSpec,
    /// Rows held out for test accuracy. Generated data gets this many extra
    /// rows; loaded data gives up its last `test_n` rows.
    pub test_n: usize,
    pub f_hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub g_hidden: Vec<usize>,
    pub train: TrainConfig,
    pub attack: AttackConfig,
    pub noise_sigma: f64,
    /// Master seed; every component seed is derived from it.
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSpec::Blobs { classes: 4, n: 2000, dim: 2, spread: 0.5 },
            test_n: 500,
            f_hidden: vec![16],
            embedding_dim: 8,
            g_hidden: vec![],
            train: TrainConfig::default(),
            attack: AttackConfig::default(),
            noise_sigma: 0.0,
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Seed streams derived from the master seed.
pub mod stream {
    pub const DATA: u64 = 1;
    pub const F_INIT: u64 = 2;
    pub const G_INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const NOISE: u64 = 5;
    pub const ATTACK: u64 = 6;
}

fn parse_list(v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("bad list entry {s:?}"))))
        .collect()
}

fn parse_range(v: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(Error::Config(format!("range needs two comma-separated values, got {v:?}")));
    };
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("bad number {s:?}")));
    Ok((num(lo)?, num(hi)?))
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: Vec<(String, String)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", lineno + 1)));
            };
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = Self::default();
        // data.kind decides which shape keys apply, so read it first.
        let kind = kv.iter().rev().find(|(k, _)| k == "data.kind").map(|(_, v)| v.clone());
        if let Some(kind) = kind {
            cfg.data = match kind.as_str() {
                "blobs" => DataSpec::Blobs { classes: 4, n: 2000, dim: 2, spread: 0.5 },
                "imbalanced" => DataSpec::Imbalanced { n: 2000, dim: 8, positive_rate: 0.1 },
                "idx" => DataSpec::Idx { images: PathBuf::new(), labels: PathBuf::new(), classes: None },
                "file" => DataSpec::File { path: PathBuf::new() },
                other => return Err(Error::Config(format!("unknown data.kind {other:?}"))),
            };
        }
        for (k, v) in &kv {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "data.kind" => {}
            "data.classes" | "data.n" | "data.dim" | "data.spread" | "data.positive_rate" | "data.images"
            | "data.labels" | "data.path" => self.set_data(key, v)?,
            "data.test_n" => self.test_n = parse_num(key, v)?,
            "model.f_hidden" => self.f_hidden = parse_list(v)?,
            "model.embedding_dim" => self.embedding_dim = parse_num(key, v)?,
            "model.g_hidden" => self.g_hidden = parse_list(v)?,
            "train.epochs" => self.train.epochs = parse_num(key, v)?,
            "train.batch_size" => self.train.batch_size = parse_num(key, v)?,
            "train.lr" => self.train.optimizer.lr = parse_num(key, v)?,
            "train.optimizer" => {
                self.train.optimizer.kind = match v {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => return Err(Error::Config(format!("{key}: expected adam or sgd, got {v:?}"))),
                }
            }
            "attack.n_outer" => self.attack.n_outer = parse_num(key, v)?,
            "attack.inner_epochs" => self.attack.inner_epochs = parse_num(key, v)?,
            "attack.batch_size" => self.attack.batch_size = parse_num(key, v)?,
            "attack.surrogate_hidden" => self.attack.surrogate_hidden = parse_list(v)?,
            "attack.lambda_ce_range" => self.attack.ranges.lambda_ce = parse_range(v)?,
            "attack.lambda_p_range" => self.attack.ranges.lambda_p = parse_range(v)?,
            "attack.eta_g_range" => self.attack.ranges.eta_g = parse_range(v)?,
            "attack.eta_y_range" => self.attack.ranges.eta_y = parse_range(v)?,
            "attack.use_lpr" => self.attack.regularizers.use_lpr = parse_bool(key, v)?,
            "attack.use_cer" => self.attack.regularizers.use_cer = parse_bool(key, v)?,
            "attack.objective" => {
                self.attack.objective = match v {
                    "grad_loss" => SelectionObjective::GradLoss,
                    "full_loss_unit_lambdas" => SelectionObjective::FullLossUnitLambdas,
                    _ => return Err(Error::Config(format!("{key}: unknown objective {v:?}"))),
                }
            }
            "attack.prior_scope" => {
                self.attack.prior_scope = match v {
                    "batch" => PriorScope::Batch,
                    "full" => PriorScope::Full,
                    _ => return Err(Error::Config(format!("{key}: expected batch or full, got {v:?}"))),
                }
            }
            "attack.epoch" => {
                self.attack.epoch = if v == "last" { EpochChoice::Last } else { EpochChoice::Index(parse_num(key, v)?) }
            }
            "attack.tolerance" => self.attack.tolerance = parse_num(key, v)?,
            "attack.y_init_std" => self.attack.y_init_std = parse_num(key, v)?,
            "defense.sigma" => self.noise_sigma = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    fn set_data(&mut self, key: &str, v: &str) -> Result<()> {
        let mismatch = || Error::Config(format!("{key} does not apply to this data.kind"));
        match (&mut self.data, key) {
            (DataSpec::Blobs { classes, .. }, "data.classes") => *classes = parse_num(key, v)?,
            (DataSpec::Idx { classes, .. }, "data.classes") => *classes = Some(parse_num(key, v)?),
            (DataSpec::Blobs { n, .. } | DataSpec::Imbalanced { n, .. }, "data.n") => *n = parse_num(key, v)?,
            (DataSpec::Blobs { dim, .. } | DataSpec::Imbalanced { dim, .. }, "data.dim") => {
                *dim = parse_num(key, v)?
            }
            (DataSpec::Blobs { spread, .. }, "data.spread") => *spread = parse_num(key, v)?,
            (DataSpec::Imbalanced { positive_rate, .. }, "data.positive_rate") => *positive_rate = parse_num(key, v)?,
            (DataSpec::Idx { images, .. }, "data.images") => *images = PathBuf::from(v),
            (DataSpec::Idx { labels, .. }, "data.labels") => *labels = PathBuf::from(v),
            (DataSpec::File { path }, "data.path") => *path = PathBuf::from(v),
            _ => return Err(mismatch()),
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        match &self.data {
            DataSpec::Blobs { classes, n, dim, spread } => {
                put("data.kind", "blobs".into());
                put("data.classes", classes.to_string());
                put("data.n", n.to_string());
                put("data.dim", dim.to_string());
                put("data.spread", spread.to_string());
            }
            DataSpec::Imbalanced { n, dim, positive_rate } => {
                put("data.kind", "imbalanced".into());
                put("data.n", n.to_string());
                put("data.dim", dim.to_string());
                put("data.positive_rate", positive_rate.to_string());
            }
            DataSpec::Idx { images, labels, classes } => {
                put("data.kind", "idx".into());
                put("data.images", images.display().to_string());
                put("data.labels", labels.display().to_string());
                if let Some(c) = classes {
                    put("data.classes", c.to_string());
                }
            }
            DataSpec::File { path } => {
                put("data.kind", "file".into());
                put("data.path", path.display().to_string());
            }
        }
        put("data.test_n", self.test_n.to_string());
        put("model.f_hidden", join(&self.f_hidden));
        put("model.embedding_dim", self.embedding_dim.to_string());
        put("model.g_hidden", join(&self.g_hidden));
        put("train.epochs", self.train.epochs.to_string());
        put("train.batch_size", self.train.batch_size.to_string());
        put("train.lr", self.train.optimizer.lr.to_string());
        put(
            "train.optimizer",
            match self.train.optimizer.kind {
                OptimizerKind::Adam => "adam",
                OptimizerKind::Sgd => "sgd",
            }
            .into(),
        );
        let a = &self.attack;
        put("attack.n_outer", a.n_outer.to_string());
        put("attack.inner_epochs", a.inner_epochs.to_string());
        put("attack.batch_size", a.batch_size.to_string());
        put("attack.surrogate_hidden", join(&a.surrogate_hidden));
        let r = &a.ranges;
        put("attack.lambda_ce_range", format!("{},{}", r.lambda_ce.0, r.lambda_ce.1));
        put("attack.lambda_p_range", format!("{},{}", r.lambda_p.0, r.lambda_p.1));
        put("attack.eta_g_range", format!("{},{}", r.eta_g.0, r.eta_g.1));
        put("attack.eta_y_range", format!("{},{}", r.eta_y.0, r.eta_y.1));
        put("attack.use_lpr", a.regularizers.use_lpr.to_string());
        put("attack.use_cer", a.regularizers.use_cer.to_string());
        put(
            "attack.objective",
            match a.objective {
                SelectionObjective::GradLoss => "grad_loss",
                SelectionObjective::FullLossUnitLambdas => "full_loss_unit_lambdas",
            }
            .into(),
        );
        put(
            "attack.prior_scope",
            match a.prior_scope {
                PriorScope::Batch => "batch",
                PriorScope::Full => "full",
            }
            .into(),
        );
        put(
            "attack.epoch",
            match a.epoch {
                EpochChoice::Last => "last".into(),
                EpochChoice::Index(i) => i.to_string(),
            },
        );
        put("attack.tolerance", a.tolerance.to_string());
        put("attack.y_init_std", a.y_init_std.to_string());
        put("defense.sigma", self.noise_sigma.to_string());
        put("seed", self.seed.to_string());
        put("output.dir", self.output_dir.display().to_string());
        s
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.embedding_dim == 0 || self.f_hidden.contains(&0) || self.g_hidden.contains(&0) {
            return bad("model widths must be positive".into());
        }
        if self.train.batch_size == 0 {
            return bad("train.batch_size must be positive".into());
        }
        if !(self.train.optimizer.lr >= 0.0 && self.train.optimizer.lr.is_finite()) {
            return bad("train.lr must be finite and non-negative".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("defense.sigma must be finite and non-negative".into());
        }
        match &self.data {
            DataSpec::Blobs { classes, n, dim, spread } => {
                if *classes < 2 || *n < *classes || *dim == 0 || !(*spread >= 0.0) {
                    return bad(format!("invalid blobs shape: classes={classes} n={n} dim={dim} spread={spread}"));
                }
            }
            DataSpec::Imbalanced { n, dim, positive_rate } => {
                if *n == 0 || *dim == 0 || !(*positive_rate > 0.0 && *positive_rate < 1.0) {
                    return bad(format!("invalid imbalanced shape: n={n} dim={dim} rate={positive_rate}"));
                }
            }
            DataSpec::Idx { images, labels, .. } => {
                if images.as_os_str().is_empty() || labels.as_os_str().is_empty() {
                    return bad("idx data needs data.images and data.labels".into());
                }
            }
            DataSpec::File { path } => {
                if path.as_os_str().is_empty() {
                    return bad("file data needs data.path".into());
                }
            }
        }
        self.attack.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Copy with a different master seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn component_seed(&self, stream: u64) -> u64 {
        derive_seed(self.seed, stream)
    }

    pub fn attack_config(&self) -> AttackConfig {
        AttackConfig { seed: self.component_seed(stream::ATTACK), ..self.attack.clone() }
    }

    pub fn noise_config(&self, sigma: f64) -> NoiseConfig {
        NoiseConfig { sigma, seed: self.component_seed(stream::NOISE) }
    }

    pub fn f_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut d = vec![input_dim];
        d.extend(&self.f_hidden);
        d.push(self.embedding_dim);
        d
    }

    pub fn g_dims(&self, num_classes: usize) -> Vec<usize> {
        let mut d = vec![self.embedding_dim];
        d.extend(&self.g_hidden);
        d.push(num_classes);
        d
    }
}

/// The full dataset the config describes, before the held-out split.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let seed = cfg.component_seed(stream::DATA);
    match &cfg.data {
        DataSpec::Blobs { classes, n, dim, spread } => generate_blobs(*classes, n + cfg.test_n, *dim, *spread, seed),
        DataSpec::Imbalanced { n, dim, positive_rate } => {
            generate_imbalanced_binary(n + cfg.test_n, *dim, *positive_rate, seed)
        }
        DataSpec::Idx { images, labels, classes } => {
            let images = parse_idx(&fs::read(images)?)?;
            let labels = parse_idx(&fs::read(labels)?)?;
            dataset_from_idx(images, labels, *classes)
        }
        DataSpec::File { path } => read_dataset(path),
    }
}

/// Training and held-out sets.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let all = load_dataset(cfg)?;
    if cfg.test_n >= all.len() {
        return invalid(format!("test_n = {} leaves no training rows out of {}", cfg.test_n, all.len()));
    }
    Ok(all.split_at(all.len() - cfg.test_n))
}

/// Fresh `f` and `g` and split training with per-element noise `sigma`.
pub fn train_split(cfg: &ExperimentConfig, train: &Dataset, sigma: f64) -> Result<SplitOutcome> {
    let f = MlpModel::new(&cfg.f_dims(train.dim()), &mut Rng::new(cfg.component_seed(stream::F_INIT)))?;
    let g = MlpModel::new(&cfg.g_dims(train.num_classes()), &mut Rng::new(cfg.component_seed(stream::G_INIT)))?;
    let rng = Rng::new(cfg.component_seed(stream::SHUFFLE));
    split_train(f, g, train, cfg.train, Some(cfg.noise_config(sigma)), rng)
}

/// Label prior the attacker is given: the training label frequencies.
pub fn attacker_prior(train: &Dataset) -> Result<LabelPrior> {
    empirical_prior(train.labels(), train.num_classes())
}

/// True labels for `ids`, looked up in `data`.
pub fn truth_for(data: &Dataset, ids: &[u64]) -> Result<Vec<usize>> {
    let by_id: HashMap<u64, usize> = data.ids().iter().copied().zip(data.labels().iter().copied()).collect();
    ids.iter()
        .map(|id| by_id.get(id).copied().ok_or_else(|| Error::InvalidArgument(format!("unknown id {id}"))))
        .collect()
}

/// Leak accuracy of `attack` against the labels in `data`.
pub fn score_attack(attack: &AttackResult, data: &Dataset) -> Result<f64> {
    leak_accuracy(&attack.labels, &truth_for(data, &attack.ids)?, data.num_classes())
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub split: SplitOutcome,
    pub test_accuracy: f64,
    pub attack: AttackResult,
    pub leak_accuracy: f64,
}

/// Train with `sigma`, evaluate on the held-out rows, attack the transcript
/// with `attack` and score it.
pub fn run_with(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    sigma: f64,
    attack: &AttackConfig,
) -> Result<PipelineOutcome> {
    let split = train_split(cfg, train, sigma)?;
    let test_accuracy = test_accuracy(&split.f, &split.g, test)?;
    let result = run_gia(&split.transcript, &attacker_prior(train)?, attack)?;
    let leak_accuracy = score_attack(&result, train)?;
    Ok(PipelineOutcome { split, test_accuracy, attack: result, leak_accuracy })
}

/// The configured pipeline end to end.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutcome> {
    let (train, test) = prepare_data(cfg)?;
    run_with(cfg, &train, &test, cfg.noise_sigma, &cfg.attack_config())
}

/// Median embedding-gradient norm over a transcript.
pub fn median_gradient_norm(t: &Transcript) -> Result<f64> {
    if t.is_empty() {
        return invalid("transcript is empty");
    }
    let mut norms: Vec<f64> = t.records().iter().map(|r| crate::numerics::l2_norm(&r.grad_z)).collect();
    norms.sort_by(f64::total_cmp);
    let n = norms.len();
    Ok(if n % 2 == 1 { norms[n / 2] } else { 0.5 * (norms[n / 2 - 1] + norms[n / 2]) })
}

/// Leak accuracy for each regularizer setting on one trained transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub seed: u64,
    pub original: f64,
    pub no_lpr: f64,
    pub no_cer: f64,
    pub no_lpr_cer: f64,
}

pub const ABLATION_COLUMNS: [&str; 4] = ["Original", "No LPR", "No CER", "No LPR, CER"];

pub fn ablation(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<AblationRow>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = cfg.with_seed(seed);
            let (train, _) = prepare_data(&cfg)?;
            let split = train_split(&cfg, &train, cfg.noise_sigma)?;
            let prior = attacker_prior(&train)?;
            let settings = [(true, true), (false, true), (true, false), (false, false)];
            let accs = settings
                .par_iter()
                .map(|&(use_lpr, use_cer)| {
                    let mut a = cfg.attack_config();
                    a.regularizers = Regularizers { use_lpr, use_cer };
                    score_attack(&run_gia(&split.transcript, &prior, &a)?, &train)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(AblationRow { seed, original: accs[0], no_lpr: accs[1], no_cer: accs[2], no_lpr_cer: accs[3] })
        })
        .collect()
}

pub fn write_ablation_csv(rows: &[AblationRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["seed"];
    header.extend(ABLATION_COLUMNS);
    w.write_record(&header)?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            fmt_float(r.original),
            fmt_float(r.no_lpr),
            fmt_float(r.no_cer),
            fmt_float(r.no_lpr_cer),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Manifest written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub format_versions: HashMap<String, u32>,
    pub tool_version: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            config_hash: None,
            seed: None,
            format_versions: FORMAT_VERSIONS.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
