//! Brute-force full-batch gradient descent for the average-patch
//! regression that a single-hidden-layer linear CNN reduces to. This is
//! the ground-truth oracle the closed forms in [`crate::analytic`] are
//! checked against, so the iteration loop stays single-threaded and
//! bit-reproducible; only independent runs execute concurrently.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data_io::bernoulli_labels;
use crate::eigen::jacobi_eigen;
use crate::matrix::{axpy, norm, Mat};
use crate::patch::PatchMatrix;
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// MSE loss convention: ½‖Kw−y‖² as-is, or divided by N.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossScale {
    Unnormalized,
    OneOverN,
}

impl LossScale {
    pub fn factor(&self, n: usize) -> f64 {
        match self {
            LossScale::Unnormalized => 1.0,
            LossScale::OneOverN => 1.0 / n as f64,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LossScale::Unnormalized => "unnormalized",
            LossScale::OneOverN => "one_over_n",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unnormalized" => Ok(LossScale::Unnormalized),
            "one_over_n" => Ok(LossScale::OneOverN),
            other => Err(Error::invalid(format!("unknown loss scale `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GdConfig {
    pub eta: f64,
    pub steps: usize,
    pub width: usize,
    pub sigma_init: f64,
    pub seed: u64,
    pub loss_scale: LossScale,
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::invalid("eta must be positive"));
        }
        if self.width < 1 {
            return Err(Error::invalid("width must be at least 1"));
        }
        if self.sigma_init < 0.0 {
            return Err(Error::invalid("sigma_init must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub iter: usize,
    pub filters: Mat,
    pub avg_filter: Vec<f64>,
    /// Per-coordinate empirical variance of the filters about their mean
    /// (denominator M).
    pub dispersion: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub divergence_warning: Option<String>,
}

impl Trajectory {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has snapshots")
    }
}

/// One GD update: w − η·s·Kᵀ(Kw − y).
pub fn gd_step(w: &[f64], k: &Mat, y: &[f64], eta: f64, loss_scale: LossScale) -> Vec<f64> {
    let residual: Vec<f64> = k.matvec(w).iter().zip(y).map(|(p, t)| p - t).collect();
    let grad = k.t_matvec(&residual);
    let s = eta * loss_scale.factor(k.rows());
    let mut out = w.to_vec();
    axpy(&mut out, -s, &grad);
    out
}

/// `max |1 − ηsλ|` over the spectrum of KᵀK; a value above 1 + 1e-12
/// means GD diverges along some direction.
pub fn stability_margin(k: &Mat, eta: f64, loss_scale: LossScale) -> Result<f64> {
    let eig = jacobi_eigen(&k.gram())?;
    let s = eta * loss_scale.factor(k.rows());
    Ok(eig
        .values
        .iter()
        .map(|&l| (1.0 - s * l).abs())
        .fold(0.0, f64::max))
}

fn snapshot_of(filters: &Mat, iter: usize) -> Snapshot {
    let d = filters.cols();
    let m = filters.rows() as f64;
    let avg_filter = filters.col_means();
    let mut dispersion = vec![0.0; d];
    for row in filters.iter_rows() {
        for ((disp, &v), &mean) in dispersion.iter_mut().zip(row).zip(&avg_filter) {
            let dv = v - mean;
            *disp += dv * dv;
        }
    }
    for disp in &mut dispersion {
        *disp /= m;
    }
    Snapshot {
        iter,
        filters: filters.clone(),
        avg_filter,
        dispersion,
    }
}

fn check_finite(w: &[f64], iter: usize) -> Result<()> {
    if w.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { iter })
    }
}

/// Single-filter GD from `w0`, snapshots at the requested iterations
/// (iteration 0, when requested, is the initialization).
pub fn gd_run(
    k: &Mat,
    y: &[f64],
    eta: f64,
    steps: usize,
    w0: &[f64],
    loss_scale: LossScale,
    snaps: &[usize],
) -> Result<Trajectory> {
    assert_eq!(k.rows(), y.len(), "label count mismatch");
    assert_eq!(k.cols(), w0.len(), "w0 dimension mismatch");
    let margin = stability_margin(k, eta, loss_scale)?;
    let divergence_warning = (margin >= 1.0 + 1e-12)
        .then(|| format!("unstable step size: max |1 - eta*lambda| = {margin}"));
    let mut w = w0.to_vec();
    let mut snapshots = Vec::new();
    let want: std::collections::BTreeSet<usize> = snaps.iter().copied().collect();
    if want.contains(&0) {
        snapshots.push(snapshot_of(&Mat::from_rows(&[w.clone()]), 0));
    }
    for t in 1..=steps {
        w = gd_step(&w, k, y, eta, loss_scale);
        check_finite(&w, t)?;
        if want.contains(&t) {
            snapshots.push(snapshot_of(&Mat::from_rows(&[w.clone()]), t));
        }
    }
    if snapshots.last().map(|s| s.iter) != Some(steps) {
        snapshots.push(snapshot_of(&Mat::from_rows(&[w.clone()]), steps));
    }
    Ok(Trajectory {
        snapshots,
        divergence_warning,
    })
}

/// Final weights of a single-filter run from zero initialization.
pub fn gd_solve(k: &Mat, y: &[f64], eta: f64, steps: usize, loss_scale: LossScale) -> Result<Vec<f64>> {
    let traj = gd_run(k, y, eta, steps, &vec![0.0; k.cols()], loss_scale, &[])?;
    Ok(traj.final_snapshot().avg_filter.clone())
}

/// Width-M run. Filters are initialized i.i.d. Gaussian with per-
/// coordinate variance σ², the loss acts on the average filter, and all
/// filters receive the identical gradient — so per-coordinate dispersion
/// is exactly constant through training.
pub fn multi_filter_run(
    k: &Mat,
    y: &[f64],
    config: &GdConfig,
    snaps: &[usize],
) -> Result<Trajectory> {
    config.validate()?;
    assert_eq!(k.rows(), y.len(), "label count mismatch");
    let d = k.cols();
    let margin = stability_margin(k, config.eta, config.loss_scale)?;
    let divergence_warning = (margin >= 1.0 + 1e-12)
        .then(|| format!("unstable step size: max |1 - eta*lambda| = {margin}"));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut filters = Mat::from_fn(config.width, d, |_, _| {
        config.sigma_init * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let want: std::collections::BTreeSet<usize> = snaps.iter().copied().collect();
    let mut snapshots = Vec::new();
    if want.contains(&0) || snaps.is_empty() {
        snapshots.push(snapshot_of(&filters, 0));
    }
    let s = config.eta * config.loss_scale.factor(k.rows());
    for t in 1..=config.steps {
        let avg = filters.col_means();
        let residual: Vec<f64> = k.matvec(&avg).iter().zip(y).map(|(p, t)| p - t).collect();
        let grad = k.t_matvec(&residual);
        for j in 0..config.width {
            axpy(filters.row_mut(j), -s, &grad);
        }
        check_finite(filters.row(0), t)?;
        if want.contains(&t) {
            snapshots.push(snapshot_of(&filters, t));
        }
    }
    if snapshots.last().map(|sn| sn.iter) != Some(config.steps) {
        snapshots.push(snapshot_of(&filters, config.steps));
    }
    Ok(Trajectory {
        snapshots,
        divergence_warning,
    })
}

/// Mean and per-coordinate sample standard deviation of the final
/// weights over `draws` Bernoulli(½) label redraws. Per-draw seeds are
/// `seed + draw_index`; the reduction order is fixed, so the result does
/// not depend on scheduling.
pub fn monte_carlo_bernoulli(
    k: &Mat,
    eta: f64,
    steps: usize,
    loss_scale: LossScale,
    draws: usize,
    seed: u64,
) -> Result<McStats> {
    let run_one = |i: usize| -> Result<Vec<f64>> {
        let y = bernoulli_labels(k.rows(), seed + i as u64);
        gd_solve(k, &y, eta, steps, loss_scale)
    };
    #[cfg(feature = "parallel")]
    let finals: Result<Vec<Vec<f64>>> = (0..draws).into_par_iter().map(run_one).collect();
    #[cfg(not(feature = "parallel"))]
    let finals: Result<Vec<Vec<f64>>> = (0..draws).map(run_one).collect();
    Ok(McStats::from_samples(&finals?))
}

pub fn monte_carlo_bernoulli_seq(
    k: &Mat,
    eta: f64,
    steps: usize,
    loss_scale: LossScale,
    draws: usize,
    seed: u64,
) -> Result<McStats> {
    let finals: Result<Vec<Vec<f64>>> = (0..draws)
        .map(|i| {
            let y = bernoulli_labels(k.rows(), seed + i as u64);
            gd_solve(k, &y, eta, steps, loss_scale)
        })
        .collect();
    Ok(McStats::from_samples(&finals?))
}

#[derive(Clone, Debug)]
pub struct McStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub draws: usize,
}

impl McStats {
    pub fn from_samples(samples: &[Vec<f64>]) -> McStats {
        let r = samples.len();
        let d = samples.first().map_or(0, |s| s.len());
        let mut mean = vec![0.0; d];
        for s in samples {
            for (m, &v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= r as f64;
        }
        let mut var = vec![0.0; d];
        for s in samples {
            for ((v, &x), &m) in var.iter_mut().zip(s).zip(&mean) {
                let dx = x - m;
                *v += dx * dx;
            }
        }
        let denom = (r.max(2) - 1) as f64;
        let std = var.iter().map(|v| (v / denom).sqrt()).collect();
        McStats {
            mean,
            std,
            draws: r,
        }
    }
}

const RANK_CUTOFF: f64 = 1e-10;

fn span_projector_apply(patches: &PatchMatrix, f: &[f64]) -> Result<Vec<f64>> {
    let eig = jacobi_eigen(&patches.rows.gram())?;
    let lmax = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cut = RANK_CUTOFF * lmax;
    Ok(eig.apply_fn(|l| if l > cut { 1.0 } else { 0.0 }, f))
}

/// Distance from `f` to the span of the training patches.
pub fn patch_span_residual(f: &[f64], patches: &PatchMatrix) -> Result<f64> {
    assert_eq!(f.len(), patches.rows.cols(), "filter dimension mismatch");
    let proj = span_projector_apply(patches, f)?;
    let resid: Vec<f64> = f.iter().zip(&proj).map(|(a, b)| a - b).collect();
    Ok(norm(&resid))
}

#[derive(Clone, Debug)]
pub struct PatchWeights {
    /// One coefficient per patch row.
    pub delta: Vec<f64>,
    /// ‖Σ δ_p·p − f‖.
    pub reconstruction_error: f64,
}

/// Minimum-norm least-squares coefficients expressing `f` as a weighted
/// sum of patch rows.
pub fn patch_weight_decomposition(f: &[f64], patches: &PatchMatrix) -> Result<PatchWeights> {
    assert_eq!(f.len(), patches.rows.cols(), "filter dimension mismatch");
    let eig = jacobi_eigen(&patches.rows.gram())?;
    let lmax = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cut = RANK_CUTOFF * lmax;
    let pinv_f = eig.apply_fn(|l| if l > cut { 1.0 / l } else { 0.0 }, f);
    let delta = patches.rows.matvec(&pinv_f);
    let recon = patches.rows.t_matvec(&delta);
    let err: Vec<f64> = recon.iter().zip(f).map(|(a, b)| a - b).collect();
    Ok(PatchWeights {
        delta,
        reconstruction_error: norm(&err),
    })
}
