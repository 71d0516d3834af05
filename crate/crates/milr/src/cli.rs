//! Command-line interface.
//!
//! Subcommands: `run` (training experiment from a config file with flag
//! overrides), `mi-curve` (MI vs sample size), `resume` (batch-size-change
//! experiment from a checkpoint), `compare` (merge run CSVs for plotting).
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data;
use crate::error::{Error, Result};
use crate::probe;
use crate::runner::{self, DataKind, PolicyKind, RunCheckpoint, RunConfig};

#[derive(Parser)]
#[command(
    name = "milr",
    version,
    about = "Mutual-information-driven dynamic learning rates",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a training run described by a config file, with overrides
    Run(RunArgs),
    /// Estimate the MI-vs-sample-size curve and write it as CSV
    MiCurve(MiCurveArgs),
    /// Resume a checkpoint, optionally with a changed batch size
    Resume(ResumeArgs),
    /// Merge several runs' records into one long-format comparison table
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; every key has a default when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    lr_min: Option<f64>,
    #[arg(long)]
    lr_max: Option<f64>,
    /// Baseline rate; dynamic bounds default to a decade around it
    #[arg(long)]
    desired_lr: Option<f64>,
    #[arg(long)]
    probe_size: Option<usize>,
    /// KSG neighbor count
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dataset: Option<DataKind>,
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    /// Output directory for records.csv, decisions.csv, checkpoints
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.policy {
            cfg.policy.kind = v;
        }
        if let Some(v) = self.lr_min {
            cfg.policy.lr_min = Some(v);
        }
        if let Some(v) = self.lr_max {
            cfg.policy.lr_max = Some(v);
        }
        if let Some(v) = self.desired_lr {
            cfg.policy.desired_lr = v;
        }
        if let Some(v) = self.probe_size {
            cfg.probe.size = v;
        }
        if let Some(v) = self.k {
            cfg.probe.k = v;
        }
        if let Some(v) = self.batch_size {
            cfg.optimizer.batch_size = v;
        }
        if let Some(v) = self.dataset {
            cfg.data.kind = v;
        }
        if let Some(v) = self.mnist_dir {
            cfg.data.mnist_dir = v;
        }
        if let Some(v) = self.out {
            cfg.out_dir = v;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[clap(rename_all = "kebab-case")]
enum CurveSource {
    /// Correlated bivariate Gaussians with analytic MI
    Gaussian,
    /// Synthetic Gaussian-blob classification data vs its labels
    Blobs,
    /// MNIST training images vs their labels
    Mnist,
}

#[derive(Args)]
struct MiCurveArgs {
    #[arg(long, value_enum, default_value_t = CurveSource::Gaussian)]
    source: CurveSource,
    /// Gaussian correlation coefficient
    #[arg(long, default_value_t = 0.9)]
    rho: f64,
    /// Gaussian pool size to subsample from
    #[arg(long, default_value_t = 20_000)]
    n: usize,
    /// Comma-separated subset sizes
    #[arg(long, default_value = "100,500,1000,2000")]
    sizes: String,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "data/mnist")]
    mnist_dir: PathBuf,
    /// Output CSV path
    #[arg(long, default_value = "mi_curve.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ResumeArgs {
    /// Config of the base run (defaults apply when omitted)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint file to restore
    #[arg(long)]
    checkpoint: PathBuf,
    /// New batch size; keeps the checkpointed one when omitted
    #[arg(long)]
    batch_size: Option<usize>,
    /// Epochs of value-only tracking after the change
    #[arg(long, default_value_t = 3)]
    window: usize,
    /// Total epochs to train to (overrides the config)
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Run directories, each holding a records.csv
    #[arg(required = true)]
    runs: Vec<PathBuf>,
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim().parse::<usize>().map_err(|_| Error::Config {
                key: "sizes".into(),
                reason: format!("`{s}` is not a positive integer"),
            })
        })
        .collect()
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = args.into_config()?;
    let output = runner::run_experiment(&cfg)?;
    let last = output.records.last().expect("at least one epoch");
    println!(
        "run complete: {} epochs, final test accuracy {:.4}, records at {}",
        output.records.len(),
        last.test_acc,
        output.out_dir.join("records.csv").display()
    );
    Ok(())
}

fn cmd_mi_curve(args: MiCurveArgs) -> Result<()> {
    let sizes = parse_sizes(&args.sizes)?;
    let (x, y) = match args.source {
        CurveSource::Gaussian => data::gen_gaussian_pair(args.n, args.rho, args.seed)?,
        CurveSource::Blobs => {
            let cfg = RunConfig::default();
            let ds = data::gen_blobs(
                cfg.data.n_per_class,
                cfg.data.class_count,
                cfg.data.dim,
                cfg.data.separation,
                args.seed,
            )?;
            let y = probe::labels_to_real(&ds.train_labels, 0.0, 0)?;
            (ds.train_x, y)
        }
        CurveSource::Mnist => {
            let ds = data::load_mnist_dataset(&args.mnist_dir)?;
            let y = probe::labels_to_real(&ds.train_labels, 0.0, 0)?;
            (ds.train_x, y)
        }
    };
    let points = probe::mi_vs_sample_size(&x, &y, &sizes, args.repeats, args.k, args.seed)?;
    std::fs::write(&args.out, probe::curve_to_csv(&points))?;
    for p in &points {
        println!(
            "size {:>6}: {:.4} nats (std {:.4}, {} repeats)",
            p.sample_size, p.mean, p.std, p.repeats
        );
    }
    println!("curve written to {}", args.out.display());
    Ok(())
}

fn cmd_resume(args: ResumeArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.out.clone() {
        cfg.out_dir = v;
    }
    let new_batch_size = match args.batch_size {
        Some(v) => v,
        None => RunCheckpoint::load(&args.checkpoint)?.nn.optimizer.batch_size,
    };
    let output =
        runner::resume_with_batch_size(&cfg, &args.checkpoint, new_batch_size, args.window)?;
    let last = output.records.last().expect("at least one epoch");
    println!(
        "resume complete: epochs {}..{}, final test accuracy {:.4}, records at {}",
        output.records.first().expect("nonempty").epoch,
        last.epoch,
        last.test_acc,
        output.out_dir.join("records.csv").display()
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    runner::emit_comparison(&args.runs, &args.out)?;
    println!("comparison written to {}", args.out.display());
    Ok(())
}

/// Parse and dispatch; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::MiCurve(args) => cmd_mi_curve(args),
        Command::Resume(args) => cmd_resume(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => 0,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
