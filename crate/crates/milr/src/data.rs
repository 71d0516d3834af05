//! Dataset ingestion and synthesis.
//!
//! MNIST arrives as big-endian IDX containers (optionally gzip-compressed,
//! detected by magic bytes). Synthetic generators cover the two test needs:
//! correlated Gaussian pairs with a known analytic MI, and Gaussian-blob
//! classification sets for fast end-to-end runs when MNIST files are absent.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::seeding;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803; // 2051
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801; // 2049

/// A classification dataset with features normalized to [0, 1].
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train_x: SampleMatrix,
    pub train_labels: Vec<usize>,
    pub test_x: SampleMatrix,
    pub test_labels: Vec<usize>,
    pub class_count: usize,
}

impl Dataset {
    pub fn input_dim(&self) -> usize {
        self.train_x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_x.nrows() != self.train_labels.len() {
            return Err(Error::Shape(format!(
                "train rows {} vs labels {}",
                self.train_x.nrows(),
                self.train_labels.len()
            )));
        }
        if self.test_x.nrows() != self.test_labels.len() {
            return Err(Error::Shape(format!(
                "test rows {} vs labels {}",
                self.test_x.nrows(),
                self.test_labels.len()
            )));
        }
        if let Some(&bad) = self
            .train_labels
            .iter()
            .chain(self.test_labels.iter())
            .find(|&&l| l >= self.class_count)
        {
            return Err(Error::Param(format!(
                "label {bad} >= class count {}",
                self.class_count
            )));
        }
        Ok(())
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(Error::Io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct IdxCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> IdxCursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        IdxCursor { bytes, pos: 0 }
    }

    fn read_u32_be(&mut self) -> Result<u32> {
        let end = self.pos + 4;
        if end > self.bytes.len() {
            return Err(Error::IdxTruncated {
                needed: end,
                have: self.bytes.len(),
            });
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..end].try_into().unwrap());
        self.pos = end;
        Ok(v)
    }

    fn read_bytes(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(Error::IdxTruncated {
                needed: end,
                have: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

/// Parse a paired IDX image/label file set.
///
/// Pixels are scaled by 1/255 into rows of `rows * cols` features. Either
/// file may be gzip-compressed. Wrong magics, truncation, and image/label
/// count disagreement are reported as distinct errors.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<(SampleMatrix, Vec<usize>)> {
    let img_bytes = read_maybe_gz(images_path)?;
    let mut cur = IdxCursor::new(&img_bytes);
    let magic = cur.read_u32_be()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxMagic {
            expected: IDX_IMAGES_MAGIC,
            got: magic,
        });
    }
    let count = cur.read_u32_be()? as usize;
    let rows = cur.read_u32_be()? as usize;
    let cols = cur.read_u32_be()? as usize;
    let width = rows * cols;
    let pixels = cur.read_bytes(count * width)?;

    let lbl_bytes = read_maybe_gz(labels_path)?;
    let mut cur = IdxCursor::new(&lbl_bytes);
    let magic = cur.read_u32_be()?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxMagic {
            expected: IDX_LABELS_MAGIC,
            got: magic,
        });
    }
    let label_count = cur.read_u32_be()? as usize;
    if label_count != count {
        return Err(Error::IdxCountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let labels: Vec<usize> = cur.read_bytes(label_count)?.iter().map(|&b| b as usize).collect();

    let data: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let x = SampleMatrix::new(
        Array2::from_shape_vec((count, width), data).map_err(|e| Error::Shape(e.to_string()))?,
    )?;
    Ok((x, labels))
}

/// Load the conventional four-file MNIST layout from a directory, accepting
/// plain or `.gz` files.
pub fn load_mnist_dataset(dir: &Path) -> Result<Dataset> {
    let find = |stem: &str| -> Result<std::path::PathBuf> {
        let plain = dir.join(stem);
        if plain.exists() {
            return Ok(plain);
        }
        let gz = dir.join(format!("{stem}.gz"));
        if gz.exists() {
            return Ok(gz);
        }
        Err(Error::Param(format!(
            "missing MNIST file {stem}[.gz] under {}",
            dir.display()
        )))
    };
    let (train_x, train_labels) = load_mnist_idx(
        &find("train-images-idx3-ubyte")?,
        &find("train-labels-idx1-ubyte")?,
    )?;
    let (test_x, test_labels) = load_mnist_idx(
        &find("t10k-images-idx3-ubyte")?,
        &find("t10k-labels-idx1-ubyte")?,
    )?;
    let ds = Dataset {
        train_x,
        train_labels,
        test_x,
        test_labels,
        class_count: 10,
    };
    ds.validate()?;
    Ok(ds)
}

/// n samples of a standard bivariate Gaussian with correlation rho, as two
/// one-column matrices: y = rho*x + sqrt(1-rho^2)*z. Counter-based sampling
/// keeps the output independent of evaluation order.
pub fn gen_gaussian_pair(n: usize, rho: f64, seed: u64) -> Result<(SampleMatrix, SampleMatrix)> {
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::Param(format!("rho must lie in (-1, 1), got {rho}")));
    }
    if n == 0 {
        return Err(Error::Param("n must be positive".into()));
    }
    let sx = seeding::mix(seed, 0xA);
    let sz = seeding::mix(seed, 0xB);
    let ortho = (1.0 - rho * rho).sqrt();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let x = seeding::normal_at(sx, i);
        let z = seeding::normal_at(sz, i);
        xs.push(x);
        ys.push(rho * x + ortho * z);
    }
    Ok((SampleMatrix::column(&xs)?, SampleMatrix::column(&ys)?))
}

/// Gaussian-blob classification set: class c is an isotropic unit Gaussian
/// centered at `separation` times the binary-coded hypercube vertex of c.
/// Features are min-max normalized to [0, 1]; each class splits 80/20 into
/// train/test by construction order.
pub fn gen_blobs(
    n_per_class: usize,
    class_count: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if class_count < 2 {
        return Err(Error::Param("need at least two classes".into()));
    }
    if dim == 0 {
        return Err(Error::Param("dim must be positive".into()));
    }
    if dim < 64 && class_count > (1usize << dim) {
        return Err(Error::Param(format!(
            "{class_count} classes need at least {} dimensions for distinct vertices",
            usize::BITS - (class_count - 1).leading_zeros()
        )));
    }
    if n_per_class < 2 {
        return Err(Error::Param(
            "need at least two samples per class for a train/test split".into(),
        ));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::Param(format!(
            "separation must be finite and >= 0, got {separation}"
        )));
    }

    let total = n_per_class * class_count;
    let mut raw = Array2::zeros((total, dim));
    for c in 0..class_count {
        let class_seed = seeding::mix(seed, c as u64);
        for s in 0..n_per_class {
            let row = c * n_per_class + s;
            for d in 0..dim {
                let vertex = ((c >> d) & 1) as f64;
                raw[(row, d)] = separation * vertex
                    + seeding::normal_at(class_seed, (s * dim + d) as u64);
            }
        }
    }

    // global min-max normalization into [0, 1]
    for d in 0..dim {
        let col = raw.column(d);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in col.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = hi - lo;
        for v in raw.column_mut(d).iter_mut() {
            *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
        }
    }

    let n_train = ((4 * n_per_class) / 5).max(1);
    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    let mut test_rows = Vec::new();
    let mut test_labels = Vec::new();
    for c in 0..class_count {
        for s in 0..n_per_class {
            let row = c * n_per_class + s;
            if s < n_train {
                train_rows.push(row);
                train_labels.push(c);
            } else {
                test_rows.push(row);
                test_labels.push(c);
            }
        }
    }
    let all = SampleMatrix::new(raw)?;
    let ds = Dataset {
        train_x: all.select_rows(&train_rows)?,
        train_labels,
        test_x: all.select_rows(&test_rows)?,
        test_labels,
        class_count,
    };
    ds.validate()?;
    Ok(ds)
}
