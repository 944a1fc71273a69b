use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use handscreen::artifact::{load_model, save_model, ArtifactMeta};
use handscreen::cache::{read_cache, write_cache, CacheHeader};
use handscreen::extract::{extract, read_labels, ExtractConfig};
use handscreen::report::{EvalReportJson, TrainSummaryJson};
use handscreen::screening::run_screening;
use handscreen::service::{serve, AppState};
use handscreen::open_backbone;
use handscreen_core::metrics::MetricsError;
use handscreen_core::trainer::fit;
use handscreen_core::{evaluate, Algorithm, BackboneError, HeadError, LabeledExample, SplitSpec, TrainConfig, TrainError, NORMALIZATION_ID};

#[derive(Parser)]
#[command(name = "handscreen", version, about = "Handwriting-based learning-disorder screening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed labelled images into a cache file.
    Extract {
        #[arg(long)]
        images: PathBuf,
        /// CSV with header "filename,label".
        #[arg(long)]
        labels: PathBuf,
        /// ONNX file, or mock:SEED.
        #[arg(long)]
        backbone: String,
        #[arg(long)]
        out: PathBuf,
        /// Augmented copies per image.
        #[arg(long, default_value_t = 0)]
        augment: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the head on a cache and save the best-validation checkpoint.
    Train {
        #[arg(long)]
        cache: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 25)]
        epochs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0.5)]
        dropout: f64,
        #[arg(long, value_enum, default_value_t = Optimizer::Adam)]
        optimizer: Optimizer,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Print an evaluation report for a saved model.
    Evaluate {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Defaults to the threshold stored in the model.
        #[arg(long)]
        threshold: Option<f64>,
        /// Evaluate only the validation side of this split instead of
        /// every original image in the cache.
        #[arg(long, requires = "train_count")]
        val_count: Option<usize>,
        #[arg(long, requires = "val_count")]
        train_count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_stratify: bool,
        #[arg(long)]
        group_by_source: bool,
    },
    /// Screen one image.
    Predict {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        backbone: String,
        #[arg(long)]
        model: PathBuf,
        /// Refuse a backbone other than the one the model was trained on.
        #[arg(long)]
        strict: bool,
    },
    /// Run the HTTP screening service.
    Serve {
        #[arg(long)]
        backbone: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 447)]
    train_count: usize,
    #[arg(long, default_value_t = 50)]
    val_count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_stratify: bool,
    #[arg(long)]
    group_by_source: bool,
}

impl SplitArgs {
    fn spec(&self) -> SplitSpec {
        SplitSpec {
            stratified: !self.no_stratify,
            group_by_source: self.group_by_source,
            ..SplitSpec::new(self.train_count, self.val_count, self.seed)
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Optimizer {
    Adam,
    Sgd,
}

fn load_examples(path: &Path) -> Result<(CacheHeader, Vec<LabeledExample>)> {
    let (header, records) = read_cache(path).with_context(|| format!("reading {}", path.display()))?;
    if header.normalization_id != NORMALIZATION_ID {
        bail!("cache was built with normalization {:?}, expected {NORMALIZATION_ID:?}", header.normalization_id);
    }
    Ok((header, records.iter().map(|r| r.to_example()).collect()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Extract { images, labels, backbone, out, augment, seed } => {
            let backbone = open_backbone(&backbone)?;
            let rows = read_labels(&labels)?;
            let cfg = ExtractConfig { augment, seed, ..ExtractConfig::default() };
            let records = extract(&images, &rows, backbone.as_ref(), &cfg)?;
            let header = CacheHeader { backbone_digest: backbone.digest(), normalization_id: NORMALIZATION_ID.to_string() };
            write_cache(&out, &header, &records)?;
            log::info!("wrote {} records for {} images to {}", records.len(), rows.len(), out.display());
        }
        Command::Train { cache, split, epochs, out, batch_size, lr, dropout, optimizer, threshold } => {
            let (header, examples) = load_examples(&cache)?;
            let cfg = TrainConfig {
                epochs,
                batch_size,
                dropout_rate: dropout,
                algorithm: match optimizer {
                    Optimizer::Adam => Algorithm::Adam,
                    Optimizer::Sgd => Algorithm::Sgd,
                },
                learning_rate: lr,
                threshold,
                seed: split.seed,
                ..TrainConfig::default()
            };
            let outcome = fit(&examples, &split.spec(), &cfg)?;
            let meta = ArtifactMeta {
                backbone_digest: header.backbone_digest,
                normalization_id: header.normalization_id,
                dropout_rate: dropout,
                threshold,
            };
            let version = save_model(&outcome.params, &meta, &out).with_context(|| format!("writing {}", out.display()))?;
            print_json(&TrainSummaryJson::new(version, &outcome.history))?;
        }
        Command::Evaluate { cache, model, threshold, val_count, train_count, seed, no_stratify, group_by_source } => {
            let (header, examples) = load_examples(&cache)?;
            let model = load_model(&model).with_context(|| format!("reading {}", model.display()))?;
            if header.backbone_digest != model.meta.backbone_digest {
                log::warn!("cache and model were produced with different backbones");
            }
            let examples: Vec<LabeledExample> = match (train_count, val_count) {
                (Some(train), Some(val)) => {
                    let spec = SplitSpec { stratified: !no_stratify, group_by_source, ..SplitSpec::new(train, val, seed) };
                    handscreen_core::split_dataset(&examples, &spec).map_err(TrainError::from)?.1
                }
                _ => examples.into_iter().filter(LabeledExample::is_original).collect(),
            };
            let threshold = threshold.unwrap_or(model.meta.threshold);
            let report = evaluate(&model.params, &examples, threshold)?;
            print_json(&EvalReportJson::from(&report))?;
        }
        Command::Predict { image, backbone, model, strict } => {
            let backbone = open_backbone(&backbone)?;
            let model = load_model(&model).with_context(|| format!("reading {}", model.display()))?;
            let bytes = std::fs::read(&image).with_context(|| format!("reading {}", image.display()))?;
            let result = run_screening(&bytes, backbone.as_ref(), &model, strict)?;
            print_json(&result)?;
        }
        Command::Serve { backbone, model, listen, strict } => {
            let backbone = open_backbone(&backbone)?;
            let state = Arc::new(AppState::new(backbone, None, Some(model), strict));
            if let Err(e) = state.reload() {
                log::error!("starting without a model: {e}");
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(listen).await?;
                log::info!("listening on {}", listener.local_addr()?);
                println!("listening on {}", listener.local_addr()?);
                serve(listener, state).await
            })?;
        }
    }
    Ok(())
}

/// 3 for numeric failures, 2 for everything else that reaches here.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err.chain().any(|cause| {
        matches!(cause.downcast_ref::<HeadError>(), Some(HeadError::Numeric { .. }))
            || matches!(cause.downcast_ref::<TrainError>(), Some(TrainError::Head(HeadError::Numeric { .. })))
            || matches!(
                cause.downcast_ref::<MetricsError>(),
                Some(MetricsError::NonFiniteScore { .. } | MetricsError::Head(HeadError::Numeric { .. }))
            )
            || matches!(
                cause.downcast_ref::<TrainError>(),
                Some(TrainError::Metrics(MetricsError::NonFiniteScore { .. } | MetricsError::Head(HeadError::Numeric { .. })))
            )
            || matches!(cause.downcast_ref::<BackboneError>(), Some(BackboneError::NonFinite { .. }))
    });
    if numeric {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
