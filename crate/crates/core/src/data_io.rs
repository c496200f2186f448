//! Dataset ingestion (CIFAR-10 binary batches), synthetic dataset
//! construction at the average-patch level, label sources, and the
//! filter-bank CSV interchange format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::Mat;
use crate::patch::PcaBasis;
use crate::profile::FilterBank;
use crate::{Error, Result};

pub const CIFAR10_CLASSES: [&str; 10] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

const CIFAR_RECORD: usize = 3073;
const CIFAR_PLANE: usize = 32 * 32;

/// One image, channel-major planes, each plane row-major.
#[derive(Clone, Debug)]
pub struct Image {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), c * h * w);
        Image { c, h, w, data }
    }

    pub fn constant(c: usize, h: usize, w: usize, v: f64) -> Self {
        Image::new(c, h, w, vec![v; c * h * w])
    }

    pub fn at(&self, ch: usize, r: usize, col: usize) -> f64 {
        self.data[ch * self.h * self.w + r * self.w + col]
    }
}

#[derive(Clone, Debug)]
pub struct LabeledImageSet {
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
    pub class_names: Option<Vec<String>>,
}

/// Load one CIFAR-10 binary batch (3073-byte records: label byte then
/// 3072 pixel bytes, R/G/B planes). Pixel bytes are scaled to [0,1].
pub fn load_cifar10_batch(path: &Path) -> Result<LabeledImageSet> {
    load_cifar10_batch_opts(path, true)
}

/// As [`load_cifar10_batch`], with `scale=false` leaving pixel values as
/// 0–255 doubles.
pub fn load_cifar10_batch_opts(path: &Path, scale: bool) -> Result<LabeledImageSet> {
    let bytes = fs::read(path)?;
    if bytes.len() % CIFAR_RECORD != 0 {
        return Err(Error::Format {
            offset: (bytes.len() / CIFAR_RECORD * CIFAR_RECORD) as u64,
            msg: format!(
                "truncated batch: {} trailing bytes (records are {CIFAR_RECORD} bytes)",
                bytes.len() % CIFAR_RECORD
            ),
        });
    }
    let n = bytes.len() / CIFAR_RECORD;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let div = if scale { 255.0 } else { 1.0 };
    for rec in 0..n {
        let off = rec * CIFAR_RECORD;
        let label = bytes[off];
        if label > 9 {
            return Err(Error::Format {
                offset: off as u64,
                msg: format!("label byte {label} out of range 0..=9"),
            });
        }
        let data: Vec<f64> = bytes[off + 1..off + CIFAR_RECORD]
            .iter()
            .map(|&b| b as f64 / div)
            .collect();
        images.push(Image::new(3, 32, 32, data));
        labels.push(label);
    }
    Ok(LabeledImageSet {
        images,
        labels,
        class_names: Some(CIFAR10_CLASSES.iter().map(|s| s.to_string()).collect()),
    })
}

/// Encode images back to CIFAR-10 record bytes (values interpreted on
/// the 0–255 scale after multiplying by 255 when `scaled`). Test support
/// for the decode path.
pub fn encode_cifar10(set: &LabeledImageSet, scaled: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(set.images.len() * CIFAR_RECORD);
    let mul = if scaled { 255.0 } else { 1.0 };
    for (img, &label) in set.images.iter().zip(&set.labels) {
        out.push(label);
        debug_assert_eq!(img.data.len(), 3 * CIFAR_PLANE);
        out.extend(img.data.iter().map(|&v| (v * mul).round() as u8));
    }
    out
}

/// Two-class dataset: either raw images pending patching, or a ready
/// average-patch matrix (rows = per-image average patches).
#[derive(Clone, Debug)]
pub enum BinaryData {
    Images(Vec<Image>),
    AvgPatches(Mat),
}

#[derive(Clone, Debug)]
pub struct BinaryDataset {
    pub data: BinaryData,
    /// 0/1 labels, one per image or matrix row.
    pub y: Vec<u8>,
    pub counts: [usize; 2],
}

impl BinaryDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn is_balanced(&self) -> bool {
        self.counts[0].abs_diff(self.counts[1]) <= 1
    }

    pub fn y_f64(&self) -> Vec<f64> {
        self.y.iter().map(|&b| b as f64).collect()
    }

    pub fn avg_patches(&self) -> Option<&Mat> {
        match &self.data {
            BinaryData::AvgPatches(k) => Some(k),
            BinaryData::Images(_) => None,
        }
    }
}

/// Restrict a labeled set to two classes: class_a rows first with y=0,
/// then class_b with y=1, original order preserved within each class.
pub fn make_binary_subset(
    set: &LabeledImageSet,
    class_a: usize,
    class_b: usize,
) -> Result<BinaryDataset> {
    if class_a == class_b {
        return Err(Error::invalid(format!(
            "class_a and class_b are both {class_a}"
        )));
    }
    let mut images = Vec::new();
    let mut y = Vec::new();
    let mut counts = [0usize; 2];
    for (cls, bit) in [(class_a, 0u8), (class_b, 1u8)] {
        for (img, &label) in set.images.iter().zip(&set.labels) {
            if label as usize == cls {
                images.push(img.clone());
                y.push(bit);
                counts[bit as usize] += 1;
            }
        }
        if counts[bit as usize] == 0 {
            return Err(Error::EmptyClass { class: cls });
        }
    }
    Ok(BinaryDataset {
        data: BinaryData::Images(images),
        y,
        counts,
    })
}

/// Synthetic balanced two-class dataset generated directly at the
/// average-patch level. Class-1 rows are drawn independently and then
/// translated so the two empirical class means coincide exactly.
pub fn gen_shared_mean_dataset(
    n_per_class: usize,
    d: usize,
    spread: f64,
    seed: u64,
) -> Result<BinaryDataset> {
    if n_per_class < 1 || d < 1 {
        return Err(Error::invalid("n_per_class and d must be at least 1"));
    }
    if !(spread > 0.0) {
        return Err(Error::invalid("spread must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu_base: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let draw_block = |rng: &mut ChaCha8Rng| -> Mat {
        Mat::from_fn(n_per_class, d, |_, j| {
            mu_base[j] + spread * rng.sample::<f64, _>(StandardNormal)
        })
    };
    let block0 = draw_block(&mut rng);
    let mut block1 = draw_block(&mut rng);
    let m0 = block0.col_means();
    let m1 = block1.col_means();
    for i in 0..n_per_class {
        // (v - m1) + m0 rather than v + (m0 - m1): with one row per class
        // this reproduces the class-0 mean bit-for-bit
        for (v, (a, b)) in block1.row_mut(i).iter_mut().zip(m0.iter().zip(&m1)) {
            *v = (*v - b) + a;
        }
    }
    let mut rows = Vec::with_capacity(2 * n_per_class);
    let mut y = Vec::with_capacity(2 * n_per_class);
    for i in 0..n_per_class {
        rows.push(block0.row(i).to_vec());
        y.push(0u8);
    }
    for i in 0..n_per_class {
        rows.push(block1.row(i).to_vec());
        y.push(1u8);
    }
    Ok(BinaryDataset {
        data: BinaryData::AvgPatches(Mat::from_rows(&rows)),
        y,
        counts: [n_per_class, n_per_class],
    })
}

/// Shift every class-1 row of K by ε along PCA direction `dir_index`
/// (expressed back in the pixel basis). Class-0 rows are untouched.
pub fn shift_class_mean(
    k: &Mat,
    y: &[u8],
    basis: &PcaBasis,
    dir_index: usize,
    epsilon: f64,
) -> Result<Mat> {
    if dir_index >= basis.dim() {
        return Err(Error::invalid(format!(
            "dir_index {dir_index} out of range for d={}",
            basis.dim()
        )));
    }
    if k.cols() != basis.dim() {
        return Err(Error::DimMismatch {
            context: "shift_class_mean".into(),
            expected: format!("{} columns", basis.dim()),
            found: format!("{}", k.cols()),
        });
    }
    let dir = basis.u.col(dir_index);
    let mut out = k.clone();
    for (i, &label) in y.iter().enumerate() {
        if label == 1 {
            for (v, &u) in out.row_mut(i).iter_mut().zip(&dir) {
                *v += epsilon * u;
            }
        }
    }
    Ok(out)
}

/// Where label vectors come from: the dataset itself, seeded fair coin
/// flips, or the exact Bernoulli(½) expectation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LabelSource {
    True,
    Bernoulli { seed: u64 },
    Expectation,
}

pub fn make_labels(source: LabelSource, true_labels: &[u8]) -> Vec<f64> {
    let n = true_labels.len();
    match source {
        LabelSource::True => true_labels.iter().map(|&b| b as f64).collect(),
        LabelSource::Bernoulli { seed } => bernoulli_labels(n, seed),
        LabelSource::Expectation => vec![0.5; n],
    }
}

pub fn bernoulli_labels(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).collect()
}

const FILTER_MAGIC: &str = "patchlens-filters v1";

/// Write a filter bank as decimal CSV (lossless f64 round trip).
pub fn export_filter_bank(bank: &FilterBank, path: &Path) -> Result<()> {
    if bank.f.rows() == 0 {
        return Err(Error::invalid("empty filter bank"));
    }
    if !bank.f.is_finite() {
        return Err(Error::NonFinite {
            context: "export_filter_bank".into(),
        });
    }
    let mut out = String::new();
    let _ = writeln!(out, "{FILTER_MAGIC}");
    let _ = writeln!(out, "{},{},{},{}", bank.f.rows(), bank.f.cols(), bank.c, bank.k);
    for i in 0..bank.f.rows() {
        let row: Vec<String> = bank.f.row(i).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn import_filter_bank(path: &Path) -> Result<FilterBank> {
    let text = fs::read_to_string(path)?;
    parse_filter_bank(&text)
}

pub fn parse_filter_bank(text: &str) -> Result<FilterBank> {
    let mut lines = text.lines().enumerate();
    let (_, magic) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if magic.trim() != FILTER_MAGIC {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{FILTER_MAGIC}`, found `{}`", magic.trim()),
        });
    }
    let (_, dims) = lines.next().ok_or(Error::Parse {
        line: 2,
        msg: "missing dimension line".into(),
    })?;
    let parts: Vec<&str> = dims.trim().split(',').collect();
    if parts.len() != 4 {
        return Err(Error::Parse {
            line: 2,
            msg: format!("expected `M,d,c,k`, found `{}`", dims.trim()),
        });
    }
    let parse_dim = |s: &str| -> Result<usize> {
        s.trim().parse().map_err(|_| Error::Parse {
            line: 2,
            msg: format!("bad dimension `{s}`"),
        })
    };
    let (m, d, c, k) = (
        parse_dim(parts[0])?,
        parse_dim(parts[1])?,
        parse_dim(parts[2])?,
        parse_dim(parts[3])?,
    );
    if m == 0 {
        return Err(Error::invalid("empty filter bank"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("non-numeric cell `{}`", cell.trim()),
                })
            })
            .collect();
        let vals = vals?;
        if vals.len() != d {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("row has {} values, expected {d}", vals.len()),
            });
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: lineno,
                msg: "non-finite value".into(),
            });
        }
        rows.push(vals);
    }
    if rows.len() != m {
        return Err(Error::Parse {
            line: rows.len() + 2,
            msg: format!("found {} data rows, header says {m}", rows.len()),
        });
    }
    Ok(FilterBank {
        f: Mat::from_rows(&rows),
        c,
        k,
        sigma_init: None,
    })
}
