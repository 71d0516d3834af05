//! Experiment orchestration: data -> trainer -> probe -> scheduler per
//! epoch, with CSV outputs, periodic checkpoints, and the batch-size-change
//! resume flow.
//!
//! Per-epoch ordering: train every mini-batch at the current rate, evaluate,
//! probe MI on the captured activations, then step the policy — the decision
//! applies to the next epoch. IXY is estimated once before the first epoch
//! and never recomputed within a run. All randomness is derived from the run
//! seed through named streams, so a resumed run continues bit-for-bit where
//! an uninterrupted one would have gone.

mod config;
mod csv;

pub use config::{
    BatchSizeChange, CheckpointConfig, DataConfig, DataKind, NetworkConfig, OptimizerSettings,
    PolicyConfig, PolicyKind, ProbeSettings, RunConfig,
};
pub use csv::{
    decisions_to_csv, emit_comparison, emit_csv, emit_decisions, emit_timing, parse_csv,
    records_to_csv,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset};
use crate::error::{Error, Result};
use crate::nn::{Network, NetworkSpec, NnCheckpoint, OptimizerConfig};
use crate::probe::{self, ProbeSubset};
use crate::scheduler::{
    layerwise_step, Branch, LrDecision, PolicyConstants, Scheduler, SchedulerState,
};
use crate::seeding;

// named randomness streams of the run seed
const STREAM_PROBE: u64 = 0x01;
const STREAM_REFERENCE: u64 = 0x02;
const STREAM_SHUFFLE: u64 = 0x03;
const STREAM_EPOCH_MI: u64 = 0x04;
const STREAM_TRAIN_EVAL: u64 = 0x05;

/// Train metrics are evaluated on at most this many fixed training rows.
const TRAIN_EVAL_CAP: usize = 10_000;

/// One completed epoch. Wall times are bookkeeping only and are emitted to
/// their own file so the record CSV stays byte-reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Rate(s) this epoch trained at; one entry unless layer-wise.
    pub lrs: Vec<f64>,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    pub ihyll: f64,
    /// Per-layer MI with the labels; empty unless layer-wise.
    pub ihy_per_layer: Vec<f64>,
    pub ixy: f64,
    /// Branch(es) of the decision taken after this epoch.
    pub branches: Vec<Branch>,
    pub train_ms: f64,
    pub probe_ms: f64,
}

/// One scheduling decision, as logged to `decisions.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub epoch: usize,
    pub policy: String,
    /// Layer index for layer-wise runs; None for network-wide decisions.
    pub layer: Option<usize>,
    pub branch: Branch,
    pub delta: Option<f64>,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub lr_next: f64,
}

/// Everything needed to continue a run: network + momentum buffers +
/// optimizer config + per-layer (or single) scheduler states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCheckpoint {
    pub nn: NnCheckpoint,
    pub scheduler_states: Vec<SchedulerState>,
}

impl RunCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)
            .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Checkpoint(format!("parse: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<EpochRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub out_dir: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

/// Network-wide or per-layer scheduling, behind one interface.
enum Driver {
    Single(Scheduler),
    Layerwise {
        states: Vec<SchedulerState>,
        constants: PolicyConstants,
    },
}

impl Driver {
    fn from_config(cfg: &RunConfig, layer_count: usize) -> Result<Driver> {
        let constants = cfg.constants();
        match cfg.network_policy() {
            Some(policy) => Ok(Driver::Single(Scheduler::new(policy, constants)?)),
            None => {
                constants.validate()?;
                Ok(Driver::Layerwise {
                    states: vec![SchedulerState::new(constants.lr_min); layer_count],
                    constants,
                })
            }
        }
    }

    fn policy_name(&self) -> &'static str {
        match self {
            Driver::Single(s) => s.policy.name(),
            Driver::Layerwise { .. } => "layerwise",
        }
    }

    fn is_layerwise(&self) -> bool {
        matches!(self, Driver::Layerwise { .. })
    }

    fn current_lrs(&self) -> Vec<f64> {
        match self {
            Driver::Single(s) => vec![s.state.lr],
            Driver::Layerwise { states, .. } => states.iter().map(|s| s.lr).collect(),
        }
    }

    fn set_ixy(&mut self, ixy: f64) {
        match self {
            Driver::Single(s) => s.set_ixy(ixy),
            Driver::Layerwise { states, .. } => {
                for s in states {
                    s.ixy = Some(ixy);
                }
            }
        }
    }

    fn ixy(&self) -> Option<f64> {
        match self {
            Driver::Single(s) => s.state.ixy,
            Driver::Layerwise { states, .. } => states.first().and_then(|s| s.ixy),
        }
    }

    fn engage_value_only_window(&mut self, epochs: usize) {
        if let Driver::Single(s) = self {
            s.engage_value_only_window(epochs);
        }
    }

    fn observe(&mut self, ihyll: f64, ihy_per_layer: &[f64]) -> Result<Vec<LrDecision>> {
        match self {
            Driver::Single(s) => Ok(vec![s.observe(ihyll)?]),
            Driver::Layerwise { states, constants } => {
                layerwise_step(states, ihy_per_layer, constants)
            }
        }
    }

    fn states(&self) -> Vec<SchedulerState> {
        match self {
            Driver::Single(s) => vec![s.state.clone()],
            Driver::Layerwise { states, .. } => states.clone(),
        }
    }

    fn restore_states(&mut self, saved: &[SchedulerState]) -> Result<()> {
        match self {
            Driver::Single(s) => {
                if saved.len() != 1 {
                    return Err(Error::Contract(format!(
                        "checkpoint carries {} scheduler states for a network-wide run",
                        saved.len()
                    )));
                }
                s.state = saved[0].clone();
            }
            Driver::Layerwise { states, .. } => {
                if saved.len() != states.len() {
                    return Err(Error::Contract(format!(
                        "checkpoint carries {} scheduler states for {} layers",
                        saved.len(),
                        states.len()
                    )));
                }
                states.clone_from_slice(saved);
            }
        }
        Ok(())
    }
}

/// Load or synthesize the configured dataset.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match cfg.data.kind {
        DataKind::Blobs => data::gen_blobs(
            cfg.data.n_per_class,
            cfg.data.class_count,
            cfg.data.dim,
            cfg.data.separation,
            cfg.seed,
        ),
        DataKind::Mnist => data::load_mnist_dataset(&cfg.data.mnist_dir),
    }
}

fn network_spec(cfg: &RunConfig, dataset: &Dataset) -> NetworkSpec {
    let mut layer_sizes = Vec::with_capacity(cfg.network.hidden.len() + 2);
    layer_sizes.push(dataset.input_dim());
    layer_sizes.extend_from_slice(&cfg.network.hidden);
    layer_sizes.push(dataset.class_count);
    NetworkSpec {
        layer_sizes,
        activation: cfg.network.activation,
        seed: cfg.seed,
    }
}

/// Run the configured experiment end to end. With `resume_from` set, state
/// is restored from the checkpoint and the epoch loop continues from its
/// counter; records cover only the resumed epochs.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let resume = match &cfg.resume_from {
        Some(path) => Some(RunCheckpoint::load(path)?),
        None => None,
    };
    run_with(cfg, resume)
}

/// The batch-size-change experiment: restore the checkpoint, apply the new
/// batch size, and track value-only for `value_only_window` epochs before
/// plain change-and-value stepping resumes.
pub fn resume_with_batch_size(
    cfg: &RunConfig,
    checkpoint: &Path,
    new_batch_size: usize,
    value_only_window: usize,
) -> Result<RunOutput> {
    let ck = RunCheckpoint::load(checkpoint)?;
    let mut cfg = cfg.clone();
    cfg.resume_from = Some(checkpoint.to_path_buf());
    cfg.batch_size_change = Some(BatchSizeChange {
        at_epoch: ck.nn.epochs_completed,
        new_batch_size,
        value_only_window,
    });
    cfg.validate()?;
    run_with(&cfg, Some(ck))
}

fn run_with(cfg: &RunConfig, resume: Option<RunCheckpoint>) -> Result<RunOutput> {
    let dataset = load_dataset(cfg)?;
    let spec = network_spec(cfg, &dataset);
    spec.validate()?;
    if cfg.probe.size > dataset.train_x.nrows() {
        return Err(Error::Config {
            key: "probe.size".into(),
            reason: format!(
                "probe size {} exceeds training set size {}",
                cfg.probe.size,
                dataset.train_x.nrows()
            ),
        });
    }

    let mut optimizer = OptimizerConfig {
        momentum: cfg.optimizer.momentum,
        nesterov: cfg.optimizer.nesterov,
        batch_size: cfg.optimizer.batch_size,
    };
    optimizer.validate()?;

    let mut driver = Driver::from_config(cfg, spec.layer_sizes.len() - 1)?;
    let probe_seed = seeding::mix(cfg.seed, STREAM_PROBE);
    let probe_subset = ProbeSubset::build(
        &dataset.train_x,
        &dataset.train_labels,
        cfg.probe.size,
        probe_seed,
    )?;

    let (mut network, start_epoch) = match resume {
        Some(ck) => {
            if ck.nn.network.spec() != &spec {
                return Err(Error::Contract(format!(
                    "checkpoint architecture {:?} does not match the configured {:?}",
                    ck.nn.network.spec().layer_sizes,
                    spec.layer_sizes
                )));
            }
            driver.restore_states(&ck.scheduler_states)?;
            if driver.ixy().is_none() {
                return Err(Error::Checkpoint(
                    "checkpoint scheduler state carries no IXY reference".into(),
                ));
            }
            optimizer = OptimizerConfig {
                batch_size: optimizer.batch_size,
                ..ck.nn.optimizer
            };
            (ck.nn.network, ck.nn.epochs_completed)
        }
        None => {
            // IXY once per run, before any training
            let reference = probe::compute_reference(
                &probe_subset.x_probe,
                &probe_subset.labels,
                cfg.probe.k,
                cfg.probe.tiling_factor,
                seeding::mix(cfg.seed, STREAM_REFERENCE),
            )?;
            driver.set_ixy(reference.ixy.value);
            (Network::init(spec.clone())?, 0)
        }
    };
    let ixy = driver.ixy().expect("reference set above");

    if start_epoch >= cfg.epochs {
        return Err(Error::Param(format!(
            "nothing to do: checkpoint already covers epoch {start_epoch} of {}",
            cfg.epochs
        )));
    }

    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("config.toml"), cfg.to_toml_string())?;

    // fixed subset for train metrics, drawn once per run
    let train_n = dataset.train_x.nrows();
    let train_eval: Option<(crate::SampleMatrix, Vec<usize>)> = if train_n > TRAIN_EVAL_CAP {
        let idx = probe::draw_probe_subset(
            train_n,
            TRAIN_EVAL_CAP,
            seeding::mix(cfg.seed, STREAM_TRAIN_EVAL),
        )?;
        let x = dataset.train_x.select_rows(&idx)?;
        let l = idx.iter().map(|&i| dataset.train_labels[i]).collect();
        Some((x, l))
    } else {
        None
    };

    let layer_count = spec.layer_sizes.len() - 1;
    let mut records: Vec<EpochRecord> = Vec::new();
    let mut decisions: Vec<DecisionRecord> = Vec::new();
    let mut checkpoints: Vec<PathBuf> = Vec::new();
    let mut epoch_probe = probe_subset;

    let mut outcome: Result<()> = Ok(());
    for epoch in start_epoch..cfg.epochs {
        if let Some(bsc) = &cfg.batch_size_change {
            if bsc.at_epoch == epoch {
                optimizer.batch_size = bsc.new_batch_size;
                driver.engage_value_only_window(bsc.value_only_window);
            }
        }
        let lrs = driver.current_lrs();

        // train all mini-batches at the current rate(s)
        let train_start = Instant::now();
        let mut order: Vec<usize> = (0..train_n).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeding::mix3(cfg.seed, STREAM_SHUFFLE, epoch as u64));
        order.shuffle(&mut rng);
        for chunk in order.chunks(optimizer.batch_size) {
            let bx = dataset.train_x.select_rows(chunk)?;
            let bl: Vec<usize> = chunk.iter().map(|&i| dataset.train_labels[i]).collect();
            let (_, grads) = network.loss_and_grad(&bx, &bl)?;
            network.sgd_step(&grads, &lrs, &optimizer)?;
        }
        let train_ms = train_start.elapsed().as_secs_f64() * 1e3;
        if !network.params_finite() {
            outcome = Err(Error::Domain(format!(
                "parameters diverged during epoch {epoch}"
            )));
            break;
        }

        let (train_acc, train_loss) = match &train_eval {
            Some((x, l)) => network.evaluate(x, l)?,
            None => network.evaluate(&dataset.train_x, &dataset.train_labels)?,
        };
        let (test_acc, test_loss) = network.evaluate(&dataset.test_x, &dataset.test_labels)?;

        // MI probe on an immutable snapshot of this epoch's network
        let probe_start = Instant::now();
        if cfg.probe.redraw_per_epoch && epoch > start_epoch {
            epoch_probe = ProbeSubset::build(
                &dataset.train_x,
                &dataset.train_labels,
                cfg.probe.size,
                seeding::mix3(cfg.seed, STREAM_PROBE, epoch as u64),
            )?;
        }
        let captured = network
            .forward(&epoch_probe.x_probe, true)?
            .activations
            .expect("capture requested");
        let mi_seed =
            |layer: usize| seeding::mix3(cfg.seed, STREAM_EPOCH_MI, (epoch * layer_count + layer) as u64);
        let ihy_per_layer: Vec<f64> = if driver.is_layerwise() {
            let estimates: Result<Vec<f64>> = captured
                .iter()
                .enumerate()
                .map(|(l, act)| {
                    Ok(probe::compute_ihy(act, &epoch_probe.y_probe, cfg.probe.k, mi_seed(l))?.value)
                })
                .collect();
            estimates?
        } else {
            Vec::new()
        };
        let ihyll = if let Some(&last) = ihy_per_layer.last() {
            last
        } else {
            probe::compute_ihy(
                captured.last().expect("network has layers"),
                &epoch_probe.y_probe,
                cfg.probe.k,
                mi_seed(layer_count - 1),
            )?
            .value
        };
        let probe_ms = probe_start.elapsed().as_secs_f64() * 1e3;

        let epoch_decisions = driver.observe(ihyll, &ihy_per_layer)?;
        for (l, d) in epoch_decisions.iter().enumerate() {
            decisions.push(DecisionRecord {
                epoch,
                policy: driver.policy_name().to_string(),
                layer: driver.is_layerwise().then_some(l),
                branch: d.branch,
                delta: d.delta,
                d1: d.d1,
                d2: d.d2,
                lr_next: d.lr_next,
            });
        }
        records.push(EpochRecord {
            epoch,
            lrs,
            train_loss,
            train_acc,
            test_loss,
            test_acc,
            ihyll,
            ihy_per_layer,
            ixy,
            branches: epoch_decisions.iter().map(|d| d.branch).collect(),
            train_ms,
            probe_ms,
        });

        let completed = epoch + 1;
        if completed % cfg.checkpoint.every == 0 || completed == cfg.epochs {
            let path = cfg.out_dir.join(format!("checkpoint_epoch_{epoch:04}.json"));
            let ck = RunCheckpoint {
                nn: NnCheckpoint {
                    network: network.clone(),
                    optimizer,
                    epochs_completed: completed,
                },
                scheduler_states: driver.states(),
            };
            if let Err(e) = ck.save(&path) {
                outcome = Err(e);
                break;
            }
            checkpoints.push(path);
        }
    }

    // flush whatever was recorded, even when aborting mid-run
    emit_csv(&records, &cfg.out_dir.join("records.csv"))?;
    emit_decisions(&decisions, &cfg.out_dir.join("decisions.csv"))?;
    emit_timing(&records, &cfg.out_dir.join("timing.csv"))?;
    outcome?;

    if let Some(last) = checkpoints.last() {
        std::fs::copy(last, cfg.out_dir.join("checkpoint_final.json"))?;
    }
    Ok(RunOutput {
        records,
        decisions,
        out_dir: cfg.out_dir.clone(),
        checkpoints,
    })
}
