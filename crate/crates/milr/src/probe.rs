//! Per-epoch MI probing machinery.
//!
//! Turns raw datasets and captured layer activations into the quantities
//! the scheduler consumes: the fixed IXY reference bound (optionally tiled
//! for convolutional equivalence), per-epoch IHYLL / per-layer IHY on a
//! fixed probe subset, and the MI-vs-sample-size diagnostic curve.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::mi::{self, MiEstimate, DEFAULT_JITTER_SCALE};
use crate::parallel;
use crate::seeding;

// Jitter streams split off a caller seed. The label stream is shared between
// the reference computation and the probe labels, so IHY estimates compare
// against the same label embedding the reference was built on.
const STREAM_X: u64 = 0x78;
const STREAM_LABELS: u64 = 0x79;
const STREAM_INDICES: u64 = 0x69;

/// The fixed subsample all per-epoch MI estimates are computed on.
#[derive(Debug, Clone)]
pub struct ProbeSubset {
    /// Distinct, sorted indices into the training set.
    pub indices: Vec<usize>,
    /// Flattened inputs at those indices, unjittered.
    pub x_probe: SampleMatrix,
    /// Raw labels at those indices.
    pub labels: Vec<usize>,
    /// Labels embedded as one jittered real column.
    pub y_probe: SampleMatrix,
}

impl ProbeSubset {
    /// Draw the subset and prepare the label embedding. Deterministic in
    /// `seed`; the same seed must be handed to [`compute_reference`] so both
    /// sides share one label jitter.
    pub fn build(
        train_x: &SampleMatrix,
        train_labels: &[usize],
        probe_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if train_x.nrows() != train_labels.len() {
            return Err(Error::Shape(format!(
                "inputs have {} rows but {} labels",
                train_x.nrows(),
                train_labels.len()
            )));
        }
        let indices = draw_probe_subset(train_x.nrows(), probe_size, seeding::mix(seed, STREAM_INDICES))?;
        let x_probe = train_x.select_rows(&indices)?;
        let labels: Vec<usize> = indices.iter().map(|&i| train_labels[i]).collect();
        let y_probe = labels_to_real(&labels, DEFAULT_JITTER_SCALE, seeding::mix(seed, STREAM_LABELS))?;
        Ok(ProbeSubset {
            indices,
            x_probe,
            labels,
            y_probe,
        })
    }
}

/// The run's soft upper bound on layer MI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBound {
    pub ixy: MiEstimate,
    pub tiling_factor: usize,
}

/// One point of the MI-vs-sample-size curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiCurvePoint {
    pub sample_size: usize,
    pub mean: f64,
    pub std: f64,
    pub repeats: usize,
}

/// `probe_size` distinct indices in `0..dataset_size`, sampled uniformly
/// without replacement, sorted ascending. Deterministic in `seed`.
pub fn draw_probe_subset(dataset_size: usize, probe_size: usize, seed: u64) -> Result<Vec<usize>> {
    if probe_size == 0 {
        return Err(Error::Param("probe size must be positive".into()));
    }
    if probe_size > dataset_size {
        return Err(Error::Param(format!(
            "probe size {probe_size} exceeds dataset size {dataset_size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, dataset_size, probe_size).into_vec();
    indices.sort_unstable();
    Ok(indices)
}

/// Labels as a single jittered real column. KSG needs continuous
/// coordinates; the jitter breaks the within-class degeneracy.
pub fn labels_to_real(labels: &[usize], jitter_scale: f64, seed: u64) -> Result<SampleMatrix> {
    let values: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let column = SampleMatrix::column(&values)?;
    mi::add_jitter(&column, jitter_scale, seed)
}

/// Widen each row to `n` concatenated copies of itself. Duplicated
/// coordinates leave Chebyshev neighbor structure unchanged, which is what
/// makes the tiled reference comparable to the plain one.
pub fn tile_features(m: &SampleMatrix, n: usize) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::Param("tiling factor must be >= 1".into()));
    }
    if n == 1 {
        return Ok(m.clone());
    }
    let d = m.ncols();
    let mut out = ndarray::Array2::zeros((m.nrows(), n * d));
    for i in 0..m.nrows() {
        let row = m.row(i);
        let mut dst = out.row_mut(i);
        for t in 0..n {
            dst.slice_mut(ndarray::s![t * d..(t + 1) * d]).assign(&row);
        }
    }
    SampleMatrix::new(out)
}

/// The IXY reference: jitter both sides, tile both sides, estimate once.
/// Computed once per run and reused for every epoch's comparison.
pub fn compute_reference(
    x: &SampleMatrix,
    y_labels: &[usize],
    k: usize,
    tiling_factor: usize,
    seed: u64,
) -> Result<ReferenceBound> {
    let xj = mi::add_jitter(x, DEFAULT_JITTER_SCALE, seeding::mix(seed, STREAM_X))?;
    let yj = labels_to_real(y_labels, DEFAULT_JITTER_SCALE, seeding::mix(seed, STREAM_LABELS))?;
    let xt = tile_features(&xj, tiling_factor)?;
    let yt = tile_features(&yj, tiling_factor)?;
    let ixy = mi::ksg_mi(&xt, &yt, k)?.with_jitter_seed(seed);
    Ok(ReferenceBound { ixy, tiling_factor })
}

/// MI between one layer's activations and the probe labels. Applied to the
/// final layer's captured output this is IHYLL. Activations are jittered
/// here with the per-estimate seed; `y_probe` arrives already jittered.
pub fn compute_ihy(
    activations: &SampleMatrix,
    y_probe: &SampleMatrix,
    k: usize,
    seed: u64,
) -> Result<MiEstimate> {
    let aj = mi::add_jitter(activations, DEFAULT_JITTER_SCALE, seed)?;
    Ok(mi::ksg_mi(&aj, y_probe, k)?.with_jitter_seed(seed))
}

/// Mean and standard deviation of the KSG estimate over `repeats`
/// independently drawn subsets at each requested size. Subsets are jittered
/// per repeat; repeats run in parallel with per-repeat seeds, so results do
/// not depend on scheduling.
pub fn mi_vs_sample_size(
    x: &SampleMatrix,
    y: &SampleMatrix,
    sizes: &[usize],
    repeats: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<MiCurvePoint>> {
    if x.nrows() != y.nrows() {
        return Err(Error::Contract(format!(
            "paired samples must have equal row counts, got {} and {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if repeats < 2 {
        return Err(Error::Param("repeats must be >= 2".into()));
    }
    if let Some(&bad) = sizes.iter().find(|&&s| s > x.nrows()) {
        return Err(Error::Param(format!(
            "sample size {bad} exceeds available {} rows",
            x.nrows()
        )));
    }

    let mut points = Vec::with_capacity(sizes.len());
    for (si, &size) in sizes.iter().enumerate() {
        let estimates: Vec<Result<f64>> = parallel::map_range(repeats, |r| {
            let draw   = seeding::mix3(seed, si as u64, 3 * r as u64);
            let jx     = seeding::mix3(seed, si as u64, 3 * r as u64 + 1);
            let jy     = seeding::mix3(seed, si as u64, 3 * r as u64 + 2);
            let idx = draw_probe_subset(x.nrows(), size, draw)?;
            let sx = mi::add_jitter(&x.select_rows(&idx)?, DEFAULT_JITTER_SCALE, jx)?;
            let sy = mi::add_jitter(&y.select_rows(&idx)?, DEFAULT_JITTER_SCALE, jy)?;
            Ok(mi::ksg_mi(&sx, &sy, k)?.value)
        });
        let values: Vec<f64> = estimates.into_iter().collect::<Result<_>>()?;
        let mean = values.iter().sum::<f64>() / repeats as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (repeats - 1) as f64;
        points.push(MiCurvePoint {
            sample_size: size,
            mean,
            std: var.sqrt(),
            repeats,
        });
    }
    Ok(points)
}

/// Serialize curve points with the documented column set.
pub fn curve_to_csv(points: &[MiCurvePoint]) -> String {
    let mut out = String::from("sample_size,mean_nats,std_nats,repeats\n");
    for p in points {
        out.push_str(&format!(
            "{},{:.9e},{:.9e},{}\n",
            p.sample_size, p.mean, p.std, p.repeats
        ));
    }
    out
}
