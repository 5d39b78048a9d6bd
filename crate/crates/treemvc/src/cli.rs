//! Command-line interface. [`run`] is the whole program minus process exit,
//! so it can be driven in-process by tests.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use treemvc_core::metrics::{clustering_accuracy, pairwise_f1, purity};
use treemvc_core::pipeline::{self, PipelineConfig};

use crate::data::{load_dataset, read_labels, save_dataset, write_labels};
use crate::error::{Error, IoContext, Result};
use crate::export::{feature_name, tree_to_dot, tree_to_json};
use crate::model_io::{load_model, save_model};
use crate::synth::{synth_multiview, SynthConfig, DEFAULT_VIEW_DIM};

#[derive(Debug, Parser)]
#[command(
    name = "treemvc",
    version,
    about = "Interpretable multi-view clustering with decision trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a dataset manifest and save it.
    Fit(FitArgs),
    /// Assign clusters to every instance of a dataset.
    Predict {
        model: PathBuf,
        manifest: PathBuf,
        /// Write labels here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the decision path of one instance.
    Explain {
        model: PathBuf,
        manifest: PathBuf,
        /// Zero-based row index of the instance.
        #[arg(long)]
        instance: usize,
    },
    /// Score predicted labels against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Export the fitted tree.
    ExportTree {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = TreeFormat::Dot)]
        format: TreeFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic multi-view Gaussian dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeFormat {
    Dot,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    pub manifest: PathBuf,
    /// Number of clusters; inferred from the dataset's labels when omitted.
    #[arg(long)]
    pub k: Option<usize>,
    /// Autoencoder pre-training epochs.
    #[arg(long, default_value_t = pipeline::DEFAULT_PRETRAIN_EPOCHS)]
    pub e1: usize,
    /// Fine-tuning epochs per feature phase.
    #[arg(long, default_value_t = pipeline::DEFAULT_FINETUNE_EPOCHS)]
    pub e2: usize,
    #[arg(long, default_value_t = treemvc_core::dtree::DEFAULT_MAX_DEPTH)]
    pub max_depth: usize,
    #[arg(long, default_value_t = treemvc_core::dtree::DEFAULT_MIN_NUM)]
    pub min_num: usize,
    #[arg(long, default_value_t = pipeline::DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = treemvc_core::nn::DEFAULT_LEARNING_RATE)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Alternating optimization cycles.
    #[arg(long, default_value_t = pipeline::DEFAULT_OUTER_CYCLES)]
    pub cycles: usize,
    /// Standardize each view's columns before training.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub views: usize,
    /// Instances per cluster.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated per-view widths (defaults to 10 each).
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl FitArgs {
    fn config(&self, k: usize) -> PipelineConfig {
        let mut c = PipelineConfig::new(k);
        c.pretrain_epochs = self.e1;
        c.finetune_epochs = self.e2;
        c.max_depth = self.max_depth;
        c.min_num = self.min_num;
        c.lambda = self.lambda;
        c.learning_rate = self.lr;
        c.seed = self.seed;
        c.outer_cycles = self.cycles;
        c.standardize = self.standardize;
        c
    }
}

/// Parses `args` (including the program name) and executes the command,
/// writing normal output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli.command, out)
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).at(p),
        None => out.write_all(text.as_bytes()).at(Path::new("<stdout>")),
    }
}

fn line(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{text}").at(Path::new("<stdout>"))
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Fit(args) => {
            let data = load_dataset(&args.manifest)?;
            let k = match (args.k, &data.truth) {
                (Some(k), _) => k,
                (None, Some(t)) => t.iter().max().map_or(1, |m| m + 1),
                (None, None) => {
                    return Err(Error::Dataset(
                        "--k is required when the dataset has no labels".into(),
                    ))
                }
            };
            let state = pipeline::fit(&data.views, &args.config(k))?;
            save_model(&args.out, &state)?;
            line(
                out,
                format_args!(
                    "fitted {}: n={} k={} cycles={} nodes={} leaves={} depth={}",
                    data.name,
                    data.n(),
                    k,
                    state.cycles_completed,
                    state.tree.node_count(),
                    state.tree.leaf_count(),
                    state.tree.depth()
                ),
            )?;
            if let Some(truth) = &data.truth {
                line(out, format_args!("{}", scores(state.labels.hard(), truth)?))?;
            }
            line(out, format_args!("model written to {}", args.out.display()))
        }
        Command::Predict {
            model,
            manifest,
            out: dest,
        } => {
            let state = load_model(&model)?;
            let data = load_dataset(&manifest)?;
            let labels = state.predict(&data.views)?;
            match dest {
                Some(p) => write_labels(&p, &labels),
                None => {
                    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
                    emit(out, None, &text)
                }
            }
        }
        Command::Explain {
            model,
            manifest,
            instance,
        } => {
            let state = load_model(&model)?;
            let data = load_dataset(&manifest)?;
            if instance >= data.n() {
                return Err(Error::Dataset(format!(
                    "instance {instance} out of range (dataset has {} rows)",
                    data.n()
                )));
            }
            let rows: Vec<&[f64]> = data.views.iter().map(|v| v.row(instance)).collect();
            let ex = pipeline::explain(&state, &rows)?;
            let layout = state.layout();
            for s in &ex.steps {
                line(
                    out,
                    format_args!(
                        "{} = {} {} {}",
                        feature_name(&layout, s.feature),
                        s.value,
                        if s.went_left { "\u{2264}" } else { ">" },
                        s.threshold
                    ),
                )?;
            }
            line(out, format_args!("cluster {}", ex.label))
        }
        Command::Eval { pred, truth } => {
            let p = read_labels(&pred)?;
            let t = read_labels(&truth)?;
            line(out, format_args!("{}", scores(&p, &t)?))
        }
        Command::ExportTree {
            model,
            format,
            out: dest,
        } => {
            let state = load_model(&model)?;
            let layout = state.layout();
            let text = match format {
                TreeFormat::Dot => tree_to_dot(&state.tree, &layout),
                TreeFormat::Json => tree_to_json(&state.tree, &layout)? + "\n",
            };
            emit(out, dest.as_deref(), &text)
        }
        Command::Synth(args) => {
            let mut cfg = SynthConfig::new(args.n, args.k, args.views, args.noise, args.seed);
            if let Some(d) = args.dims {
                cfg.dims = d;
            } else {
                cfg.dims = vec![DEFAULT_VIEW_DIM; args.views];
            }
            let ds = synth_multiview(&cfg)?;
            std::fs::create_dir_all(&args.out).at(&args.out)?;
            let manifest = save_dataset(&args.out, "synthetic", &ds.views, Some(&ds.truth))?;
            line(
                out,
                format_args!("dataset written to {}", manifest.display()),
            )
        }
    }
}

fn scores(pred: &[usize], truth: &[usize]) -> Result<String> {
    Ok(format!(
        "purity={:.3} acc={:.3} f1={:.3}",
        purity(pred, truth)?,
        clustering_accuracy(pred, truth)?,
        pairwise_f1(pred, truth)?.f1
    ))
}
