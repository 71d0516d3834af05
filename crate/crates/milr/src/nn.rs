//! Minimal dense-network trainer.
//!
//! Forward/backward passes, softmax cross-entropy in log-sum-exp form,
//! mini-batch SGD with classic or Nesterov momentum, per-layer learning
//! rates, and per-layer activation capture for the MI probe.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

/// Architecture and initialization seed of a dense network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Input dim, hidden dims..., class count. At least two entries.
    pub layer_sizes: Vec<usize>,
    /// Hidden-layer nonlinearity; the final layer emits raw logits.
    pub activation: Activation,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Contract(
                "layer_sizes needs at least an input dim and a class count".into(),
            ));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Contract("layer sizes must be positive".into()));
        }
        if *self.layer_sizes.last().unwrap() < 2 {
            return Err(Error::Contract("class count must be at least 2".into()));
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    w: Array2<f64>,
    b: Array1<f64>,
    vw: Array2<f64>,
    vb: Array1<f64>,
}

/// Dense layers with their momentum buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Dense>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Momentum coefficient in [0, 1).
    pub momentum: f64,
    pub nesterov: bool,
    pub batch_size: usize,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Param(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Param("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-layer weight and bias gradients.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

/// Logits plus, when requested, every layer's post-activation output. The
/// final captured matrix holds the softmax probabilities — the IHYLL input.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: SampleMatrix,
    pub activations: Option<Vec<SampleMatrix>>,
}

fn apply_activation(z: &mut Array2<f64>, activation: Activation) {
    match activation {
        Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
        Activation::Tanh => z.mapv_inplace(f64::tanh),
    }
}

/// Derivative expressed through the post-activation value.
fn activation_grad(a: &Array2<f64>, activation: Activation) -> Array2<f64> {
    match activation {
        Activation::Relu => a.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        Activation::Tanh => a.mapv(|v| 1.0 - v * v),
    }
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    p
}

impl Network {
    /// Fan-in-scaled zero-mean initialization, deterministic in the spec
    /// seed; biases start at zero.
    pub fn init(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let gain = match spec.activation {
            Activation::Relu => 2.0,
            Activation::Tanh => 1.0,
        };
        let mut layers = Vec::with_capacity(spec.layer_sizes.len() - 1);
        for l in 0..spec.layer_sizes.len() - 1 {
            let fan_in = spec.layer_sizes[l];
            let fan_out = spec.layer_sizes[l + 1];
            let scale = (gain / fan_in as f64).sqrt();
            let layer_seed = seeding::mix(spec.seed, l as u64);
            let w = Array2::from_shape_fn((fan_in, fan_out), |(i, j)| {
                scale * seeding::normal_at(layer_seed, (i * fan_out + j) as u64)
            });
            layers.push(Dense {
                w,
                b: Array1::zeros(fan_out),
                vw: Array2::zeros((fan_in, fan_out)),
                vb: Array1::zeros(fan_out),
            });
        }
        Ok(Network { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Number of trainable (weight, bias) pairs.
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    fn check_input(&self, x: &SampleMatrix) -> Result<()> {
        if x.ncols() != self.spec.layer_sizes[0] {
            return Err(Error::Contract(format!(
                "input width {} does not match network input dim {}",
                x.ncols(),
                self.spec.layer_sizes[0]
            )));
        }
        Ok(())
    }

    fn forward_raw(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        // returns [a_1, ..., a_{L-1}, logits]
        let mut outs = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w) + &layer.b;
            if l + 1 < self.layers.len() {
                apply_activation(&mut z, self.spec.activation);
            }
            a = z.clone();
            outs.push(z);
        }
        outs
    }

    /// Layer-by-layer affine + activation; the final layer emits raw logits.
    /// With `capture` set, every layer's post-activation output is returned,
    /// the last being the softmax probabilities.
    pub fn forward(&self, batch: &SampleMatrix, capture: bool) -> Result<ForwardPass> {
        self.check_input(batch)?;
        let outs = self.forward_raw(batch.as_array());
        let logits = outs.last().unwrap().clone();
        let activations = if capture {
            let mut acts = Vec::with_capacity(outs.len());
            for (l, out) in outs.iter().enumerate() {
                if l + 1 < outs.len() {
                    acts.push(SampleMatrix::new(out.clone())?);
                } else {
                    acts.push(SampleMatrix::new(softmax_rows(out))?);
                }
            }
            Some(acts)
        } else {
            None
        };
        Ok(ForwardPass {
            logits: SampleMatrix::new(logits)?,
            activations,
        })
    }

    /// Mean softmax cross-entropy over the batch and its backpropagated
    /// gradients.
    pub fn loss_and_grad(
        &self,
        batch_x: &SampleMatrix,
        batch_labels: &[usize],
    ) -> Result<(f64, Gradients)> {
        self.check_input(batch_x)?;
        let n = batch_x.nrows();
        if n == 0 {
            return Err(Error::Param("empty batch".into()));
        }
        if n != batch_labels.len() {
            return Err(Error::Contract(format!(
                "{n} rows but {} labels",
                batch_labels.len()
            )));
        }
        let classes = self.spec.class_count();
        if let Some(&bad) = batch_labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Contract(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }

        let outs = self.forward_raw(batch_x.as_array());
        let logits = outs.last().unwrap();

        // loss via log-sum-exp, gradient via softmax - onehot
        let mut loss = 0.0;
        let mut delta = softmax_rows(logits);
        for (i, &label) in batch_labels.iter().enumerate() {
            let row = logits.row(i);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - row[label];
            delta[(i, label)] -= 1.0;
        }
        loss /= n as f64;
        delta /= n as f64;

        let mut grads = vec![None; self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let a_prev = if l == 0 {
                batch_x.as_array()
            } else {
                &outs[l - 1]
            };
            let dw = a_prev.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            grads[l] = Some((dw, db));
            if l > 0 {
                let back = delta.dot(&self.layers[l].w.t());
                delta = back * activation_grad(&outs[l - 1], self.spec.activation);
            }
        }
        Ok((
            loss,
            Gradients {
                layers: grads.into_iter().map(Option::unwrap).collect(),
            },
        ))
    }

    /// Momentum SGD update: v <- mu*v - lr*g, then theta += v, or for
    /// Nesterov theta += mu*v - lr*g with the updated v. A single learning
    /// rate broadcasts to all layers; otherwise one rate per layer.
    pub fn sgd_step(
        &mut self,
        grads: &Gradients,
        lr_per_layer: &[f64],
        cfg: &OptimizerConfig,
    ) -> Result<()> {
        cfg.validate()?;
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Contract(format!(
                "{} gradient entries for {} layers",
                grads.layers.len(),
                self.layers.len()
            )));
        }
        if lr_per_layer.len() != 1 && lr_per_layer.len() != self.layers.len() {
            return Err(Error::Contract(format!(
                "learning-rate list must have length 1 or {}, got {}",
                self.layers.len(),
                lr_per_layer.len()
            )));
        }
        let mu = cfg.momentum;
        for (l, (layer, (dw, db))) in self.layers.iter_mut().zip(grads.layers.iter()).enumerate() {
            let lr = if lr_per_layer.len() == 1 {
                lr_per_layer[0]
            } else {
                lr_per_layer[l]
            };
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Param(format!("learning rate must be positive, got {lr}")));
            }
            layer.vw.zip_mut_with(dw, |v, &g| *v = mu * *v - lr * g);
            layer.vb.zip_mut_with(db, |v, &g| *v = mu * *v - lr * g);
            if cfg.nesterov {
                ndarray::Zip::from(&mut layer.w)
                    .and(&layer.vw)
                    .and(dw)
                    .for_each(|w, &v, &g| *w += mu * v - lr * g);
                ndarray::Zip::from(&mut layer.b)
                    .and(&layer.vb)
                    .and(db)
                    .for_each(|b, &v, &g| *b += mu * v - lr * g);
            } else {
                layer.w += &layer.vw;
                layer.b += &layer.vb;
            }
        }
        Ok(())
    }

    /// Argmax classification accuracy and mean cross-entropy.
    pub fn evaluate(&self, x: &SampleMatrix, labels: &[usize]) -> Result<(f64, f64)> {
        self.check_input(x)?;
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Param("evaluation set is empty".into()));
        }
        if n != labels.len() {
            return Err(Error::Contract(format!("{n} rows but {} labels", labels.len())));
        }
        let classes = self.spec.class_count();
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Contract(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let outs = self.forward_raw(x.as_array());
        let logits = outs.last().unwrap();
        let mut correct = 0usize;
        let mut loss = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = logits.row(i);
            // ties break to the lower class index
            let mut arg = 0;
            let mut best = row[0];
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > best {
                    best = v;
                    arg = j;
                }
            }
            if arg == label {
                correct += 1;
            }
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - row[label];
        }
        Ok((correct as f64 / n as f64, loss / n as f64))
    }

    /// Weight matrix and bias vector of one trainable layer.
    pub fn layer_params(&self, layer: usize) -> (&Array2<f64>, &Array1<f64>) {
        (&self.layers[layer].w, &self.layers[layer].b)
    }

    /// Mutable access for custom updates and perturbation-based checks.
    pub fn layer_params_mut(&mut self, layer: usize) -> (&mut Array2<f64>, &mut Array1<f64>) {
        let l = &mut self.layers[layer];
        (&mut l.w, &mut l.b)
    }

    /// All parameters and momentum buffers finite?
    pub fn params_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.w.iter().all(|v| v.is_finite())
                && l.b.iter().all(|v| v.is_finite())
                && l.vw.iter().all(|v| v.is_finite())
                && l.vb.iter().all(|v| v.is_finite())
        })
    }
}

/// Serialized training state: architecture, parameters, momentum buffers,
/// progress counter, and optimizer settings. JSON keeps every f64 exact
/// across a save/load round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnCheckpoint {
    pub network: Network,
    pub optimizer: OptimizerConfig,
    pub epochs_completed: usize,
}

impl NnCheckpoint {
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
