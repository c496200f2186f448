//! Patch extraction, per-image average patches, and the patch-PCA basis.
//!
//! Flattening is channel-major then row-major within the channel:
//! `index = ch·k² + r·k + col`. Patch rows enumerate valid top-left
//! corners row-major.

use serde::{Deserialize, Serialize};
use std::hash::{Hash, Hasher};

use crate::data_io::Image;
use crate::eigen::jacobi_eigen;
use crate::matrix::Mat;
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct PatchMatrix {
    pub rows: Mat,
    pub c: usize,
    pub k: usize,
    pub stride: usize,
}

/// N×d matrix whose i-th row is the average patch of image i.
#[derive(Clone, Debug)]
pub struct AvgPatchMatrix {
    pub k: Mat,
    pub image_indices: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaPopulation {
    AllPatches,
    AvgPatchRows,
}

/// Orthonormal patch-PCA basis. Eigenvectors are columns of `u`,
/// eigenvalue order descending, and in each column the entry of largest
/// magnitude is positive.
#[derive(Clone, Debug)]
pub struct PcaBasis {
    pub u: Mat,
    pub eigenvalues: Vec<f64>,
    pub centered: bool,
    pub mean_vector: Vec<f64>,
    pub population: PcaPopulation,
    pub c: usize,
    pub k: usize,
}

impl PcaBasis {
    pub fn dim(&self) -> usize {
        self.u.rows()
    }

    /// Stable content hash used to tag profiles with the basis they were
    /// computed against.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for v in self.u.data() {
            v.to_bits().hash(&mut h);
        }
        for v in &self.eigenvalues {
            v.to_bits().hash(&mut h);
        }
        self.centered.hash(&mut h);
        h.finish()
    }

    pub fn to_json(&self) -> String {
        let file = BasisJson {
            version: BASIS_VERSION.to_string(),
            c: self.c,
            k: self.k,
            centered: self.centered,
            population: self.population,
            mean_vector: self.mean_vector.clone(),
            eigenvalues: self.eigenvalues.clone(),
            u: self.u.data().to_vec(),
        };
        serde_json::to_string_pretty(&file).expect("basis serialization")
    }

    pub fn from_json(text: &str) -> Result<PcaBasis> {
        let file: BasisJson = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        if file.version != BASIS_VERSION {
            return Err(Error::invalid(format!(
                "unsupported basis version `{}`",
                file.version
            )));
        }
        let d = file.eigenvalues.len();
        if file.u.len() != d * d || file.mean_vector.len() != d {
            return Err(Error::invalid("basis dimensions inconsistent"));
        }
        Ok(PcaBasis {
            u: Mat::from_vec(d, d, file.u),
            eigenvalues: file.eigenvalues,
            centered: file.centered,
            mean_vector: file.mean_vector,
            population: file.population,
            c: file.c,
            k: file.k,
        })
    }
}

const BASIS_VERSION: &str = "patchlens-basis v1";

#[derive(Serialize, Deserialize)]
struct BasisJson {
    version: String,
    c: usize,
    k: usize,
    centered: bool,
    population: PcaPopulation,
    mean_vector: Vec<f64>,
    eigenvalues: Vec<f64>,
    #[serde(rename = "U")]
    u: Vec<f64>,
}

/// Second-moment statistics of K̃ in the unnormalized convention:
/// `sigma_diag` is the diagonal of the centered scatter and
/// `mu_hat = √N · columnMean(K̃)`, so K̃ᵀK̃ = Σ̂ + μ̂μ̂ᵀ when the scatter
/// is diagonal. `offdiag_max` reports how far from diagonal the centered
/// scatter actually is.
#[derive(Clone, Debug)]
pub struct PatchStats {
    pub sigma_diag: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub n: usize,
    pub offdiag_max: f64,
}

pub fn extract_patches(image: &Image, k: usize, stride: usize) -> Result<PatchMatrix> {
    if k == 0 || k > image.h.min(image.w) {
        return Err(Error::invalid(format!(
            "patch size {k} does not fit a {}x{} image",
            image.h, image.w
        )));
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    let d = image.c * k * k;
    let rows_h = (image.h - k) / stride + 1;
    let rows_w = (image.w - k) / stride + 1;
    let mut rows = Mat::zeros(rows_h * rows_w, d);
    let mut idx = 0;
    for r0 in (0..=image.h - k).step_by(stride) {
        for c0 in (0..=image.w - k).step_by(stride) {
            let row = rows.row_mut(idx);
            for ch in 0..image.c {
                for r in 0..k {
                    for col in 0..k {
                        row[ch * k * k + r * k + col] = image.at(ch, r0 + r, c0 + col);
                    }
                }
            }
            idx += 1;
        }
    }
    Ok(PatchMatrix {
        rows,
        c: image.c,
        k,
        stride,
    })
}

/// Mean over all overlapping (stride-1) patches of one image.
pub fn average_patch(image: &Image, k: usize) -> Result<Vec<f64>> {
    let patches = extract_patches(image, k, 1)?;
    let n = patches.rows.rows() as f64;
    let mut mean = vec![0.0; patches.rows.cols()];
    for row in patches.rows.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}

pub fn build_avg_patch_matrix_seq(images: &[Image], k: usize) -> Result<AvgPatchMatrix> {
    let rows: Result<Vec<Vec<f64>>> = images.iter().map(|img| average_patch(img, k)).collect();
    Ok(AvgPatchMatrix {
        k: Mat::from_rows(&rows?),
        image_indices: (0..images.len()).collect(),
    })
}

/// Average-patch matrix over a dataset; parallel across images, rows
/// placed by index so the result is deterministic.
#[cfg(feature = "parallel")]
pub fn build_avg_patch_matrix(images: &[Image], k: usize) -> Result<AvgPatchMatrix> {
    let rows: Result<Vec<Vec<f64>>> = images
        .par_iter()
        .map(|img| average_patch(img, k))
        .collect();
    Ok(AvgPatchMatrix {
        k: Mat::from_rows(&rows?),
        image_indices: (0..images.len()).collect(),
    })
}

#[cfg(not(feature = "parallel"))]
pub fn build_avg_patch_matrix(images: &[Image], k: usize) -> Result<AvgPatchMatrix> {
    build_avg_patch_matrix_seq(images, k)
}

/// Stack all overlapping patches of every image into one matrix.
pub fn extract_all_patches(images: &[Image], k: usize, stride: usize) -> Result<PatchMatrix> {
    let first = images.first().ok_or_else(|| Error::invalid("no images"))?;
    let per_image: Result<Vec<PatchMatrix>> = {
        #[cfg(feature = "parallel")]
        {
            images
                .par_iter()
                .map(|img| extract_patches(img, k, stride))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            images
                .iter()
                .map(|img| extract_patches(img, k, stride))
                .collect()
        }
    };
    let per_image = per_image?;
    let d = first.c * k * k;
    let total: usize = per_image.iter().map(|p| p.rows.rows()).sum();
    let mut data = Vec::with_capacity(total * d);
    for p in &per_image {
        data.extend_from_slice(p.rows.data());
    }
    Ok(PatchMatrix {
        rows: Mat::from_vec(total, d, data),
        c: first.c,
        k,
        stride,
    })
}

/// Eigendecomposition of (1/n)·XᵀX of the (optionally centered) rows.
pub fn fit_pca(rows: &Mat, centered: bool, population: PcaPopulation) -> Result<PcaBasis> {
    if rows.rows() < 2 {
        return Err(Error::invalid("fit_pca needs at least 2 rows"));
    }
    if rows.cols() > 4096 {
        return Err(Error::invalid("fit_pca supports d up to 4096"));
    }
    if !rows.is_finite() {
        return Err(Error::NonFinite {
            context: "fit_pca input".into(),
        });
    }
    let mean_vector = if centered {
        rows.col_means()
    } else {
        vec![0.0; rows.cols()]
    };
    let x = if centered { rows.centered() } else { rows.clone() };
    let second_moment = x.gram().scale(1.0 / rows.rows() as f64);
    let eig = jacobi_eigen(&second_moment)?;
    let eigenvalues = eig
        .values
        .iter()
        .map(|&l| if l < 0.0 && l >= -1e-12 { 0.0 } else { l })
        .collect();
    Ok(PcaBasis {
        u: eig.vectors,
        eigenvalues,
        centered,
        mean_vector,
        population,
        c: 0,
        k: 0,
    })
}

/// Fit a PCA basis and record the patch geometry on it.
pub fn fit_pca_with_geometry(
    rows: &Mat,
    centered: bool,
    population: PcaPopulation,
    c: usize,
    k: usize,
) -> Result<PcaBasis> {
    let mut basis = fit_pca(rows, centered, population)?;
    basis.c = c;
    basis.k = k;
    Ok(basis)
}

/// K̃ = K·U. The rows of K are rotated, never centered here; centering
/// only happens inside PCA fitting.
pub fn to_pca(k: &Mat, basis: &PcaBasis) -> Result<Mat> {
    if k.cols() != basis.dim() {
        return Err(Error::DimMismatch {
            context: "to_pca".into(),
            expected: format!("{} columns", basis.dim()),
            found: format!("{}", k.cols()),
        });
    }
    Ok(k.matmul(&basis.u))
}

/// Inverse rotation K̃·Uᵀ.
pub fn from_pca(k_tilde: &Mat, basis: &PcaBasis) -> Result<Mat> {
    if k_tilde.cols() != basis.dim() {
        return Err(Error::DimMismatch {
            context: "from_pca".into(),
            expected: format!("{} columns", basis.dim()),
            found: format!("{}", k_tilde.cols()),
        });
    }
    Ok(k_tilde.matmul(&basis.u.transpose()))
}

pub fn second_moment_stats(k_tilde: &Mat) -> PatchStats {
    let n = k_tilde.rows();
    let means = k_tilde.col_means();
    let centered = k_tilde.centered();
    let scatter = centered.gram();
    let d = k_tilde.cols();
    let mut sigma_diag = Vec::with_capacity(d);
    let mut offdiag_max = 0.0f64;
    for i in 0..d {
        sigma_diag.push(scatter[(i, i)].max(0.0));
        for j in 0..d {
            if i != j {
                offdiag_max = offdiag_max.max(scatter[(i, j)].abs());
            }
        }
    }
    let sqrt_n = (n as f64).sqrt();
    let mu_hat = means.iter().map(|m| m * sqrt_n).collect();
    PatchStats {
        sigma_diag,
        mu_hat,
        n,
        offdiag_max,
    }
}

pub fn class_average_patch(k: &Mat, y: &[u8], cls: u8) -> Result<Vec<f64>> {
    assert_eq!(k.rows(), y.len(), "label count mismatch");
    let mut mean = vec![0.0; k.cols()];
    let mut count = 0usize;
    for (i, &yi) in y.iter().enumerate() {
        if yi == cls {
            for (m, &v) in mean.iter_mut().zip(k.row(i)) {
                *m += v;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyClass {
            class: cls as usize,
        });
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    Ok(mean)
}
