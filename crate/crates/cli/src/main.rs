use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use splitleak_core::data::{
    dataset_from_idx, empirical_prior, generate_blobs, generate_imbalanced_binary, parse_idx, read_dataset,
    write_dataset, LabelPrior,
};
use splitleak_core::defense::{anchored_sigmas, noise_sweep, write_tradeoff_csv};
use splitleak_core::eval::{leak_accuracy, nce, test_accuracy, MetricsReport};
use splitleak_core::experiment::{
    ablation, fmt_float, prepare_data, train_split, write_ablation_csv, ExperimentConfig, Manifest,
};
use splitleak_core::gia::{run_gia, write_attack_csv, write_attack_json, AttackSlice};
use splitleak_core::nn::{read_checkpoint, write_checkpoint};
use splitleak_core::normattack::{norm_attack_best_threshold, write_norm_attack_csv};
use splitleak_core::protocol::{read_transcript, write_transcript};
use splitleak_core::Error;

#[derive(Parser)]
#[command(name = "splitleak", version, about = "Split-learning label leakage experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Blobs,
    Imbalanced,
    Idx,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or import a dataset file.
    GenData {
        #[arg(long, value_enum)]
        kind: DataKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0.5)]
        spread: f64,
        #[arg(long, default_value_t = 0.1)]
        positive_rate: f64,
        /// IDX image file (kind idx).
        #[arg(long)]
        images: Option<PathBuf>,
        /// IDX label file (kind idx).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run split learning and record the input owner's transcript.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        transcript_out: PathBuf,
        /// Overrides defense.sigma from the config.
        #[arg(long)]
        noise_sigma: Option<f64>,
        /// Directory for models, held-out data, truth labels and the prior.
        /// Defaults to output.dir from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Gradient inversion attack on a transcript.
    AttackGia {
        #[arg(long)]
        transcript: PathBuf,
        /// JSON array with the class prior.
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gradient-norm threshold attack (binary tasks).
    AttackNorm {
        #[arg(long)]
        transcript: PathBuf,
        /// CSV with columns input_id,label.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Epoch to attack; defaults to the last one.
        #[arg(long)]
        epoch: Option<u32>,
    },
    /// Score predicted labels or trained models.
    Eval {
        /// Prediction CSV (input_id,predicted_label,...).
        #[arg(long, requires = "truth")]
        pred: Option<PathBuf>,
        /// CSV with columns input_id,label.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Directory holding f.mlpc and g.mlpc.
        #[arg(long, requires = "heldout", conflicts_with = "pred")]
        models: Option<PathBuf>,
        #[arg(long)]
        heldout: Option<PathBuf>,
        /// JSON prior for NCE; defaults to the held-out label frequencies.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Class count for leak accuracy; defaults to the largest id + 1.
        #[arg(long)]
        classes: Option<usize>,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Utility/privacy trade-off over noise levels.
    SweepNoise {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated sigmas, or `auto` for 0, mid and large anchored to
        /// the undefended gradient scale of each seed.
        #[arg(long)]
        sigmas: String,
        #[arg(long, default_value = "0")]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leak accuracy with each regularizer switched off.
    Ablation {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "0")]
        seeds: String,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Protocol(_) => 4,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Format { .. } | Error::Decode(_) | Error::Idx(_) => 3,
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| config_error(format!("bad number {x:?}"))))
        .collect()
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| config_error(format!("bad seed {x:?}"))))
        .collect()
}

/// `out.csv` -> `out.csv.manifest.json`; directories get `manifest.json`.
fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn with_config(m: &mut Manifest, cfg: &ExperimentConfig) {
    m.config_hash = Some(cfg.hash());
    m.seed = Some(cfg.seed);
}

fn read_prior(path: &Path) -> Result<LabelPrior, Error> {
    let probs: Vec<f64> = serde_json::from_str(&fs::read_to_string(path)?)?;
    LabelPrior::new(probs).map_err(|e| config_error(format!("prior {}: {e}", path.display())))
}

fn write_truth_csv(ids: &[u64], labels: &[usize], path: &Path) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["input_id", "label"])?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// First two columns of a CSV with a header row: id and label.
fn read_labels_csv(path: &Path) -> Result<HashMap<u64, usize>, Error> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = HashMap::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| {
            rec.get(i)
                .and_then(|s| s.trim().parse::<u64>().ok())
                .ok_or_else(|| Error::Format { kind: "label csv", msg: format!("bad row {rec:?} in {}", path.display()) })
        };
        out.insert(field(0)?, field(1)? as usize);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenData { kind, out, classes, n, dim, spread, positive_rate, images, labels, seed } => {
            let ds = match kind {
                DataKind::Blobs => generate_blobs(classes, n, dim, spread, seed)?,
                DataKind::Imbalanced => generate_imbalanced_binary(n, dim, positive_rate, seed)?,
                DataKind::Idx => {
                    let (Some(images), Some(labels)) = (images, labels) else {
                        return Err(config_error("--kind idx needs --images and --labels"));
                    };
                    dataset_from_idx(parse_idx(&fs::read(images)?)?, parse_idx(&fs::read(labels)?)?, None)?
                }
            };
            write_dataset(&ds, &out)?;
            let mut m = Manifest::new("gen-data");
            m.seed = Some(seed);
            m.outputs.push(show(&out));
            m.write(manifest_path(&out))?;
            println!("wrote {} records ({} classes, dim {}) to {}", ds.len(), ds.num_classes(), ds.dim(), out.display());
        }
        Command::Train { config, transcript_out, noise_sigma, out_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = noise_sigma {
                cfg.noise_sigma = s;
                cfg.validate()?;
            }
            let dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            fs::create_dir_all(&dir)?;
            let (train, test) = prepare_data(&cfg)?;
            let outcome = train_split(&cfg, &train, cfg.noise_sigma)?;
            write_transcript(&outcome.transcript, &transcript_out)?;
            write_checkpoint(&outcome.f, dir.join("f.mlpc"))?;
            write_checkpoint(&outcome.g, dir.join("g.mlpc"))?;
            write_dataset(&test, dir.join("heldout.spltds"))?;
            write_truth_csv(train.ids(), train.labels(), &dir.join("train_truth.csv"))?;
            let prior = empirical_prior(train.labels(), train.num_classes())?;
            fs::write(dir.join("prior.json"), serde_json::to_string(prior.as_slice())?)?;
            let acc = test_accuracy(&outcome.f, &outcome.g, &test)?;

            let mut m = Manifest::new("train");
            with_config(&mut m, &cfg);
            m.inputs.push(show(&config));
            m.outputs.push(show(&transcript_out));
            for f in ["f.mlpc", "g.mlpc", "heldout.spltds", "train_truth.csv", "prior.json"] {
                m.outputs.push(show(&dir.join(f)));
            }
            m.write(dir.join("manifest.json"))?;
            println!("trained {} epochs on {} records; test accuracy {}", cfg.train.epochs, train.len(), fmt_float(acc));
        }
        Command::AttackGia { transcript, prior, config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let t = read_transcript(&transcript)?;
            let prior_v = read_prior(&prior)?;
            let result = run_gia(&t, &prior_v, &cfg.attack_config())?;
            fs::create_dir_all(&out)?;
            write_attack_csv(&result, out.join("labels.csv"))?;
            write_attack_json(&result, out.join("attack.json"))?;
            let mut m = Manifest::new("attack-gia");
            with_config(&mut m, &cfg);
            m.inputs.extend([show(&transcript), show(&prior), show(&config)]);
            m.outputs.extend([show(&out.join("labels.csv")), show(&out.join("attack.json"))]);
            m.write(out.join("manifest.json"))?;
            println!(
                "attacked {} records; best trial {} with objective {}",
                result.ids.len(),
                result.best_trial,
                fmt_float(result.best_objective)
            );
        }
        Command::AttackNorm { transcript, truth, out, epoch } => {
            let t = read_transcript(&transcript)?;
            let choice = epoch.map_or(splitleak_core::gia::EpochChoice::Last, splitleak_core::gia::EpochChoice::Index);
            let slice = AttackSlice::from_transcript(&t, choice)?;
            let by_id = read_labels_csv(&truth)?;
            let truth_v = slice
                .ids
                .iter()
                .map(|id| by_id.get(id).copied().ok_or_else(|| config_error(format!("no truth for id {id}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let result = norm_attack_best_threshold(&slice, &truth_v)?;
            fs::create_dir_all(&out)?;
            write_norm_attack_csv(&result, out.join("labels.csv"))?;
            fs::write(out.join("norm_attack.json"), serde_json::to_string_pretty(&result)?)?;
            let mut m = Manifest::new("attack-norm");
            m.inputs.extend([show(&transcript), show(&truth)]);
            m.outputs.extend([show(&out.join("labels.csv")), show(&out.join("norm_attack.json"))]);
            m.write(out.join("manifest.json"))?;
            println!(
                "threshold {} accuracy {}",
                fmt_float(result.threshold),
                fmt_float(result.best_accuracy.unwrap_or(f64::NAN))
            );
        }
        Command::Eval { pred, truth, models, heldout, prior, classes, out } => {
            let mut report = MetricsReport::default();
            let mut m = Manifest::new("eval");
            if let (Some(pred), Some(truth)) = (&pred, &truth) {
                let p = read_labels_csv(pred)?;
                let t = read_labels_csv(truth)?;
                let mut ids: Vec<u64> = p.keys().copied().collect();
                ids.sort_unstable();
                let pv: Vec<usize> = ids.iter().map(|id| p[id]).collect();
                let tv = ids
                    .iter()
                    .map(|id| t.get(id).copied().ok_or_else(|| config_error(format!("no truth for id {id}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                let k = classes.unwrap_or_else(|| pv.iter().chain(&tv).max().map_or(1, |x| x + 1));
                report.leak_accuracy = Some(leak_accuracy(&pv, &tv, k)?);
                report.n_eval = ids.len();
                m.inputs.extend([show(pred), show(truth)]);
            } else if let (Some(models), Some(heldout)) = (&models, &heldout) {
                let f = read_checkpoint(models.join("f.mlpc"))?;
                let g = read_checkpoint(models.join("g.mlpc"))?;
                let data = read_dataset(heldout)?;
                let prior_v = match &prior {
                    Some(p) => read_prior(p)?,
                    None => empirical_prior(data.labels(), data.num_classes())?,
                };
                report.test_accuracy = Some(test_accuracy(&f, &g, &data)?);
                report.nce = Some(nce(&f, &g, &data, &prior_v)?);
                report.n_eval = data.len();
                m.inputs.extend([show(models), show(heldout)]);
            } else {
                return Err(config_error("eval needs --pred with --truth, or --models with --heldout"));
            }
            println!("{:<16}{:>12}", "metric", "value");
            for (name, v) in [
                ("leak_accuracy", report.leak_accuracy),
                ("test_accuracy", report.test_accuracy),
                ("nce", report.nce),
            ] {
                if let Some(v) = v {
                    println!("{name:<16}{:>12}", fmt_float(v));
                }
            }
            println!("{:<16}{:>12}", "n_eval", report.n_eval);
            if let Some(out) = &out {
                fs::write(out, serde_json::to_string_pretty(&report)?)?;
                m.outputs.push(show(out));
                m.write(manifest_path(out))?;
            }
        }
        Command::SweepNoise { config, sigmas, seeds, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seeds = parse_u64_list(&seeds)?;
            let rows = if sigmas.trim() == "auto" {
                let mut rows = Vec::new();
                for &seed in &seeds {
                    let grid = anchored_sigmas(&cfg.with_seed(seed))?;
                    rows.extend(noise_sweep(&grid, &cfg, &[seed])?);
                }
                rows
            } else {
                noise_sweep(&parse_f64_list(&sigmas)?, &cfg, &seeds)?
            };
            write_tradeoff_csv(&rows, &out)?;
            let mut m = Manifest::new("sweep-noise");
            with_config(&mut m, &cfg);
            m.inputs.push(show(&config));
            m.outputs.push(show(&out));
            m.write(manifest_path(&out))?;
            for r in &rows {
                println!(
                    "seed {} sigma {} test {} leak {}",
                    r.seed,
                    fmt_float(r.sigma),
                    fmt_float(r.test_accuracy),
                    fmt_float(r.leak_accuracy)
                );
            }
        }
        Command::Ablation { config, out, seeds } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = ablation(&cfg, &parse_u64_list(&seeds)?)?;
            write_ablation_csv(&rows, &out)?;
            let mut m = Manifest::new("ablation");
            with_config(&mut m, &cfg);
            m.inputs.push(show(&config));
            m.outputs.push(show(&out));
            m.write(manifest_path(&out))?;
            print!("{}", fs::read_to_string(&out)?);
        }
    }
    Ok(())
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("SPLITLEAK_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| config_error(format!("SPLITLEAK_THREADS={v:?} is not a count")))?;
    if n == 0 {
        return Err(config_error("SPLITLEAK_THREADS must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| config_error(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
