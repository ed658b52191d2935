mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use touchsig_core::ann::{train_ann, AnnConfig, ScgConfig, SplitSpec};
use touchsig_core::eval::{evaluate_actions, evaluate_actions_with, evaluate_digits, evaluate_digits_with, EvalReport};
use touchsig_core::files::{FeatureMatrix, ModelFile};
use touchsig_core::ingest::{load_all, serve, write_all, ServerConfig};
use touchsig_core::knn::{TwoStageConfig, TwoStageModel};
use touchsig_core::model::Label;
use touchsig_core::synth::{gen_dataset, ClassSet, DeviceProfile, GenSpec};
use touchsig_core::Phase;

use config::Config;

#[derive(Debug, Parser)]
#[command(name = "touchsig", version, about = "Infer touch actions and PIN digits from motion sensor traces")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "TOUCHSIG_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Accept collector connections and append their traces to a dataset.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
        port: Option<u16>,
        /// Dataset file to append to.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for a raw copy of every session's lines.
        #[arg(long, value_name = "DIR")]
        raw_log: Option<PathBuf>,
    },
    /// Generate a labeled synthetic dataset.
    Synth {
        #[arg(long, value_enum)]
        classes: Classes,
        #[arg(long, default_value_t = 30)]
        per_class: usize,
        /// Signal-to-noise scale; larger means easier classes.
        #[arg(long, default_value_t = 16.0)]
        separation: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// iphone5 or nexus5.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a dataset into a feature matrix.
    Extract {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        phase: u8,
        #[arg(long = "in", value_name = "DATASET")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a classifier to a whole feature matrix.
    Train {
        #[arg(long, value_enum)]
        model: ModelKind,
        /// Hidden units (ann).
        #[arg(long, default_value_t = 100)]
        hidden: usize,
        /// Weight-initialisation seed (ann).
        #[arg(long)]
        seed: Option<u64>,
        /// Train/validation/test split seed (ann).
        #[arg(long)]
        split_seed: Option<u64>,
        #[arg(long = "in", value_name = "MATRIX")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify every row of a matrix with a trained model.
    Predict {
        /// Model file.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "in", value_name = "MATRIX")]
        input: Option<PathBuf>,
        /// Write predictions here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a classifier and write a report.
    ///
    /// With `knn` or `ann` a fresh model is evaluated: k-fold cross-validation
    /// for knn, a stratified holdout for ann. Any other value is read as the
    /// path of a trained model, which is applied to every row.
    Eval {
        #[arg(long, value_name = "knn|ann|PATH")]
        model: String,
        /// Cross-validation folds (knn).
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Fold seed (knn) or weight-initialisation seed (ann).
        #[arg(long)]
        seed: Option<u64>,
        /// Split seed (ann).
        #[arg(long)]
        split_seed: Option<u64>,
        /// Hidden units (ann).
        #[arg(long, default_value_t = 100)]
        hidden: usize,
        #[arg(long = "in", value_name = "MATRIX")]
        input: Option<PathBuf>,
        /// Report records; the text rendering goes next to it as `.txt` and
        /// guess-curve plot data as `.tsv`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render a saved report as text.
    Report {
        #[arg(long = "in", value_name = "REPORT")]
        input: Option<PathBuf>,
        /// Also write guess-curve plot data here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Classes {
    Actions,
    Digits,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelKind {
    Knn,
    Ann,
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    let paths = &cfg.paths;
    match cli.command {
        Command::Serve {
            host,
            port,
            out,
            raw_log,
        } => run_serve(
            &format!(
                "{}:{}",
                host.unwrap_or(cfg.server.host.clone()),
                port.unwrap_or(cfg.server.port)
            ),
            out.unwrap_or(paths.dataset.clone()),
            raw_log.or(cfg.server.raw_log_dir.clone()),
        ),
        Command::Synth {
            classes,
            per_class,
            separation,
            seed,
            profile,
            out,
        } => {
            let profile = DeviceProfile::by_name(profile.as_deref().unwrap_or(&cfg.profile))?;
            let classes = match classes {
                Classes::Actions => ClassSet::Actions,
                Classes::Digits => ClassSet::Digits,
            };
            let seed = seed.unwrap_or(cfg.seeds.synth);
            let spec = GenSpec::new(classes, per_class, separation, seed).with_profile(profile);
            let traces = gen_dataset(&spec)?;
            let out = out.unwrap_or(paths.dataset.clone());
            write_all(&out, &traces)?;
            info!(
                "wrote {} traces to {} (seed {seed}, separation {separation}, profile {})",
                traces.len(),
                out.display(),
                spec.profile.name
            );
            Ok(())
        }
        Command::Extract { phase, input, out } => {
            let phase = Phase::from_number(phase).expect("clap limits the range");
            let input = input.unwrap_or(paths.dataset.clone());
            let traces = load_all(&input).with_context(|| format!("dataset {}", input.display()))?;
            let m = FeatureMatrix::from_traces(&traces, phase)?;
            let out = out.unwrap_or(paths.matrix.clone());
            m.write(&out)?;
            info!("wrote {} phase-{} rows to {}", m.rows.len(), phase.number(), out.display());
            Ok(())
        }
        Command::Train {
            model,
            hidden,
            seed,
            split_seed,
            input,
            out,
        } => {
            let m = read_matrix(&input.unwrap_or(paths.matrix.clone()))?;
            let file = match model {
                ModelKind::Knn => {
                    let rows = m.action_samples();
                    if rows.is_empty() {
                        bail!("matrix has no touch-action rows");
                    }
                    let train: Vec<_> = rows.iter().map(|(x, a)| (x.to_vec(), *a)).collect();
                    let config = TwoStageConfig::default();
                    ModelFile::knn(m.phase, config, TwoStageModel::fit(&train, config)?)
                }
                ModelKind::Ann => {
                    let config = ann_config(&cfg, hidden, seed, split_seed);
                    let rows = m.digit_samples();
                    if rows.is_empty() {
                        bail!("matrix has no digit rows");
                    }
                    let trained = train_ann(&rows, &config)?;
                    info!(
                        "stopped ({:?}) after {} epochs, best epoch {}",
                        trained.history.stop,
                        trained.history.epochs.len() - 1,
                        trained.history.best_epoch
                    );
                    ModelFile::mlp(m.phase, config, Some(trained.history), trained.model)
                }
            };
            let out = out.unwrap_or(paths.model.clone());
            file.save(&out)?;
            info!("wrote model to {}", out.display());
            Ok(())
        }
        Command::Predict { model, input, out } => {
            let file = load_model(&model.unwrap_or(paths.model.clone()))?;
            let m = read_matrix(&input.unwrap_or(paths.matrix.clone()))?;
            check_compatible(&file, &m)?;
            let text = predictions(&file, &m)?;
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(())
        }
        Command::Eval {
            model,
            folds,
            seed,
            split_seed,
            hidden,
            input,
            report,
        } => {
            let input = input.unwrap_or(paths.matrix.clone());
            let report_path = report.unwrap_or(paths.report.clone());
            let keypad = DeviceProfile::by_name(&cfg.profile)?.keypad;
            let r = match model.as_str() {
                "knn" => {
                    let m = read_matrix(&input)?;
                    let seed = seed.unwrap_or(cfg.seeds.folds);
                    evaluate_actions(&m.action_samples(), TwoStageConfig::default(), folds, seed)?
                }
                "ann" => {
                    let m = read_matrix(&input)?;
                    let config = ann_config(&cfg, hidden, seed, split_seed);
                    evaluate_digits(&m.digit_samples(), &config, Some(keypad))?.0
                }
                path => {
                    let file = load_model(Path::new(path))?;
                    let m = read_matrix(&input)?;
                    check_compatible(&file, &m)?;
                    let protocol = format!("trained model {path} applied to {}", input.display());
                    match &file {
                        ModelFile::TwoStageKnn { config, model, .. } => {
                            evaluate_actions_with(model, *config, &m.action_samples(), &protocol)?
                        }
                        ModelFile::Mlp { config, model, .. } => {
                            let seeds = BTreeMap::from([
                                ("init".to_string(), config.scg.seed),
                                ("split".to_string(), config.split.seed),
                            ]);
                            let rows = m.digit_samples();
                            evaluate_digits_with(model, &rows, &protocol, seeds, rows.len(), Some(keypad))?
                        }
                    }
                }
            };
            write_report(&r, &report_path)?;
            print!("{}", r.render_text());
            Ok(())
        }
        Command::Report { input, plot } => {
            let path = input.unwrap_or(paths.report.clone());
            let text = std::fs::read_to_string(&path).with_context(|| format!("report {}", path.display()))?;
            let r = EvalReport::from_ndjson(&text).with_context(|| format!("report {}", path.display()))?;
            if let Some(p) = plot {
                let data = r.plot_data().context("report has no guess curve to plot")?;
                std::fs::write(&p, data).with_context(|| format!("writing {}", p.display()))?;
            }
            print!("{}", r.render_text());
            Ok(())
        }
    }
}

fn ann_config(cfg: &Config, hidden: usize, seed: Option<u64>, split_seed: Option<u64>) -> AnnConfig {
    AnnConfig {
        hidden,
        scg: ScgConfig {
            seed: seed.unwrap_or(cfg.seeds.init),
            ..Default::default()
        },
        split: SplitSpec {
            seed: split_seed.unwrap_or(cfg.seeds.split),
            ..Default::default()
        },
        ..Default::default()
    }
}

fn read_matrix(path: &Path) -> anyhow::Result<FeatureMatrix> {
    Ok(FeatureMatrix::read(path)?)
}

fn load_model(path: &Path) -> anyhow::Result<ModelFile> {
    if !path.exists() {
        bail!("model not found: {}", path.display());
    }
    Ok(ModelFile::load(path)?)
}

fn check_compatible(file: &ModelFile, m: &FeatureMatrix) -> anyhow::Result<()> {
    if file.phase() != m.phase || file.fingerprint() != m.layout().fingerprint() {
        bail!(
            "model expects phase-{} features, matrix holds phase {}",
            file.phase().number(),
            m.phase.number()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct Prediction {
    row: usize,
    actual: Label,
    predicted: Label,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    ranked: Vec<(Label, f64)>,
}

fn predictions(file: &ModelFile, m: &FeatureMatrix) -> anyhow::Result<String> {
    let mut out = String::new();
    for (row, (actual, x)) in m.rows.iter().enumerate() {
        let (predicted, ranked) = match file {
            ModelFile::TwoStageKnn { model, .. } => (Label::Action(model.predict(x)?), Vec::new()),
            ModelFile::Mlp { model, .. } => {
                let ranked = model.predict_ranked(x)?;
                (ranked[0].0, ranked)
            }
        };
        let p = Prediction {
            row,
            actual: *actual,
            predicted,
            ranked,
        };
        out.push_str(&serde_json::to_string(&p)?);
        out.push('\n');
    }
    Ok(out)
}

fn write_report(r: &EvalReport, path: &Path) -> anyhow::Result<()> {
    std::fs::write(path, r.to_ndjson()).with_context(|| format!("writing {}", path.display()))?;
    let text_path = path.with_extension("txt");
    std::fs::write(&text_path, r.render_text()).with_context(|| format!("writing {}", text_path.display()))?;
    if let Some(plot) = r.plot_data() {
        let plot_path = path.with_extension("tsv");
        std::fs::write(&plot_path, plot).with_context(|| format!("writing {}", plot_path.display()))?;
    }
    info!("wrote report to {}", path.display());
    Ok(())
}

fn run_serve(bind: &str, out: PathBuf, raw_log_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let server = serve(&ServerConfig {
        bind: bind.to_string(),
        out,
        raw_log_dir,
    })?;
    println!("listening on {}", server.local_addr());
    std::io::stdout().flush()?;
    let (tx, rx) = mpsc::channel();
    ctrlc::set_handler(move || {
        let _ = tx.send(());
    })
    .context("installing the interrupt handler")?;
    let _ = rx.recv();
    info!("shutting down");
    let stats = server.shutdown()?;
    println!("{}", serde_json::to_string(&stats.snapshot())?);
    Ok(())
}
