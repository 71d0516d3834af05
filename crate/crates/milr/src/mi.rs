//! KSG k-nearest-neighbor mutual information estimation.
//!
//! The estimator works on continuous multivariate samples under the
//! Chebyshev (max-coordinate) metric. Degenerate data (duplicated points,
//! integer-valued coordinates) must be broken with [`add_jitter`] before
//! estimation; estimates are reported in nats and may come out slightly
//! negative at small sample sizes, which is left to the consumer to handle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::parallel;

/// Default jitter amplitude for degeneracy breaking.
pub const DEFAULT_JITTER_SCALE: f64 = 1e-10;

/// Default neighbor count for the estimator.
pub const DEFAULT_K: usize = 4;

/// An MI value in nats together with the estimation metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    /// Estimated mutual information, nats. Never clamped here.
    pub value: f64,
    /// Sample count the estimate was computed on.
    pub n: usize,
    /// Neighbor parameter.
    pub k: usize,
    /// Seed of the jitter applied to the inputs, 0 when unknown to this call.
    pub jitter_seed: u64,
}

impl MiEstimate {
    pub fn with_jitter_seed(mut self, seed: u64) -> Self {
        self.jitter_seed = seed;
        self
    }
}

/// Digamma function ψ(x) for x > 0.
///
/// Upward recurrence ψ(x+1) = ψ(x) + 1/x walks the argument above 10, where
/// the asymptotic series is accurate to well under 1e-10 absolute.
pub fn digamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!(
            "digamma requires a finite positive argument, got {x}"
        )));
    }
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Asymptotic series with Bernoulli-number coefficients through x^-14.
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    acc + x.ln() - 0.5 * inv - tail
}

/// Copy of `m` with independent uniform noise in [0, scale) added to every
/// entry, deterministic in `seed`. Scale 0 returns an identical copy.
pub fn add_jitter(m: &SampleMatrix, scale: f64, seed: u64) -> Result<SampleMatrix> {
    if !scale.is_finite() || scale < 0.0 {
        return Err(Error::Param(format!(
            "jitter scale must be finite and >= 0, got {scale}"
        )));
    }
    if scale == 0.0 {
        return Ok(m.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = m.as_array().clone();
    for v in out.iter_mut() {
        *v += rng.random::<f64>() * scale;
    }
    SampleMatrix::new(out)
}

/// KSG estimate of I(X;Y) in nats, first variant:
///
/// ψ(k) + ψ(N) − mean_i[ψ(n_x(i)+1) + ψ(n_y(i)+1)]
///
/// where ε_i is the Chebyshev distance in the joint space to the k-th
/// nearest neighbor of sample i (self excluded) and n_x(i), n_y(i) count
/// samples strictly closer than ε_i in each marginal space. Neighbor search
/// is exact brute force; the per-point loop runs on rayon when the
/// `parallel` feature is on, and the estimate is independent of the degree
/// of parallelism.
pub fn ksg_mi(x: &SampleMatrix, y: &SampleMatrix, k: usize) -> Result<MiEstimate> {
    validate_ksg_inputs(x, y, k)?;
    let n = x.nrows();
    let counts = parallel::map_range(n, |i| marginal_counts(x, y, i, k));
    Ok(finish(&counts, n, k))
}

/// Sequential reference path for [`ksg_mi`]; same contract, same result.
pub fn ksg_mi_seq(x: &SampleMatrix, y: &SampleMatrix, k: usize) -> Result<MiEstimate> {
    validate_ksg_inputs(x, y, k)?;
    let n = x.nrows();
    let counts: Vec<(usize, usize)> = (0..n).map(|i| marginal_counts(x, y, i, k)).collect();
    Ok(finish(&counts, n, k))
}

fn validate_ksg_inputs(x: &SampleMatrix, y: &SampleMatrix, k: usize) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Contract(format!(
            "paired samples must have equal row counts, got {} and {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if k == 0 {
        return Err(Error::Param("k must be >= 1".into()));
    }
    if x.nrows() <= k {
        return Err(Error::Param(format!(
            "need more samples than neighbors, got N={} with k={k}",
            x.nrows()
        )));
    }
    if x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::Shape("samples must have at least one column".into()));
    }
    Ok(())
}

/// Accumulate the digamma terms through integer histograms of the neighbor
/// counts, so the summation order is fixed no matter how rows are permuted
/// or how the per-point loop was scheduled.
fn finish(counts: &[(usize, usize)], n: usize, k: usize) -> MiEstimate {
    let mut hist = vec![0u64; n + 1];
    for &(cx, cy) in counts {
        hist[cx] += 1;
        hist[cy] += 1;
    }
    let mut sum = 0.0;
    for (c, &m) in hist.iter().enumerate() {
        if m > 0 {
            sum += m as f64 * digamma_unchecked((c + 1) as f64);
        }
    }
    let value = digamma_unchecked(k as f64) + digamma_unchecked(n as f64) - sum / n as f64;
    MiEstimate {
        value,
        n,
        k,
        jitter_seed: 0,
    }
}

/// (n_x(i), n_y(i)) for one sample.
fn marginal_counts(x: &SampleMatrix, y: &SampleMatrix, i: usize, k: usize) -> (usize, usize) {
    let n = x.nrows();
    let xi = x.row(i);
    let yi = y.row(i);

    // k smallest joint distances, kept sorted ascending. Ties at the current
    // k-th value can be skipped: they cannot lower the k-th order statistic.
    let mut best = vec![f64::INFINITY; k];
    for j in 0..n {
        if j == i {
            continue;
        }
        let bound = best[k - 1];
        let Some(d) = joint_cheb_below(xi, yi, x.row(j), y.row(j), bound) else {
            continue;
        };
        // insertion into the sorted prefix
        let mut pos = k - 1;
        while pos > 0 && best[pos - 1] > d {
            best[pos] = best[pos - 1];
            pos -= 1;
        }
        best[pos] = d;
    }
    let eps = best[k - 1];

    let mut nx = 0;
    let mut ny = 0;
    for j in 0..n {
        if j == i {
            continue;
        }
        if cheb_below(xi, x.row(j), eps) {
            nx += 1;
        }
        if cheb_below(yi, y.row(j), eps) {
            ny += 1;
        }
    }
    (nx, ny)
}

/// Chebyshev distance in the joint space, or None once it provably
/// reaches `bound`.
fn joint_cheb_below(
    xi: ndarray::ArrayView1<f64>,
    yi: ndarray::ArrayView1<f64>,
    xj: ndarray::ArrayView1<f64>,
    yj: ndarray::ArrayView1<f64>,
    bound: f64,
) -> Option<f64> {
    let mut m = 0.0f64;
    for (a, b) in xi.iter().zip(xj.iter()).chain(yi.iter().zip(yj.iter())) {
        let d = (a - b).abs();
        if d >= bound {
            return None;
        }
        if d > m {
            m = d;
        }
    }
    Some(m)
}

/// True iff the Chebyshev distance is strictly below `bound`.
fn cheb_below(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>, bound: f64) -> bool {
    a.iter().zip(b.iter()).all(|(p, q)| (p - q).abs() < bound)
}
