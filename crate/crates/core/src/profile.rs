//! Energy profiles: per-PCA-component sensitivity of a filter bank,
//! profile correlation, and the patch-pair distance comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{dot, Mat};
use crate::patch::{PatchMatrix, PcaBasis};
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// M×d bank of flattened first-layer filters (rows, channel-major).
#[derive(Clone, Debug)]
pub struct FilterBank {
    pub f: Mat,
    pub c: usize,
    pub k: usize,
    pub sigma_init: Option<f64>,
}

impl FilterBank {
    pub fn from_rows(rows: &[Vec<f64>], c: usize, k: usize) -> Self {
        FilterBank {
            f: Mat::from_rows(rows),
            c,
            k,
            sigma_init: None,
        }
    }
}

/// Which energy definition a profile uses. The two differ by the 1/M
/// normalization and the square root, so correlations are only comparable
/// within one variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyVariant {
    /// e_i = sqrt(Σ_j ⟨f_j, u_i⟩²)
    Rms,
    /// e_i = (1/M)·Σ_j ⟨f_j, u_i⟩²
    MeanSquare,
}

impl EnergyVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnergyVariant::Rms => "rms",
            EnergyVariant::MeanSquare => "mean_square",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rms" => Ok(EnergyVariant::Rms),
            "mean_square" => Ok(EnergyVariant::MeanSquare),
            other => Err(Error::invalid(format!("unknown energy variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnergyProfile {
    pub e: Vec<f64>,
    pub variant: EnergyVariant,
    pub basis_fingerprint: u64,
}

fn energy_coord(f: &Mat, basis_col: &[f64], variant: EnergyVariant) -> f64 {
    // summed in sorted order so the result is invariant under filter
    // permutations, not just deterministic
    let mut sq: Vec<f64> = f
        .iter_rows()
        .map(|row| {
            let p = dot(row, basis_col);
            p * p
        })
        .collect();
    sq.sort_by(f64::total_cmp);
    let sum_sq: f64 = sq.iter().sum();
    match variant {
        EnergyVariant::Rms => sum_sq.sqrt(),
        EnergyVariant::MeanSquare => sum_sq / f.rows() as f64,
    }
}

pub fn energy_profile_seq(
    bank: &FilterBank,
    basis: &PcaBasis,
    variant: EnergyVariant,
) -> Result<EnergyProfile> {
    check_bank_dims(bank, basis)?;
    let e = (0..basis.dim())
        .map(|i| energy_coord(&bank.f, &basis.u.col(i), variant))
        .collect();
    Ok(EnergyProfile {
        e,
        variant,
        basis_fingerprint: basis.fingerprint(),
    })
}

/// Energy along each PCA component. Parallel over components; the
/// per-component summation order over filters is fixed, so results are
/// bit-identical to [`energy_profile_seq`].
#[cfg(feature = "parallel")]
pub fn energy_profile(
    bank: &FilterBank,
    basis: &PcaBasis,
    variant: EnergyVariant,
) -> Result<EnergyProfile> {
    check_bank_dims(bank, basis)?;
    let e = (0..basis.dim())
        .into_par_iter()
        .map(|i| energy_coord(&bank.f, &basis.u.col(i), variant))
        .collect();
    Ok(EnergyProfile {
        e,
        variant,
        basis_fingerprint: basis.fingerprint(),
    })
}

#[cfg(not(feature = "parallel"))]
pub fn energy_profile(
    bank: &FilterBank,
    basis: &PcaBasis,
    variant: EnergyVariant,
) -> Result<EnergyProfile> {
    energy_profile_seq(bank, basis, variant)
}

fn check_bank_dims(bank: &FilterBank, basis: &PcaBasis) -> Result<()> {
    if bank.f.cols() != basis.dim() {
        return Err(Error::DimMismatch {
            context: "energy_profile".into(),
            expected: format!("filters of length {}", basis.dim()),
            found: format!("{}", bank.f.cols()),
        });
    }
    if bank.f.rows() == 0 {
        return Err(Error::invalid("empty filter bank"));
    }
    Ok(())
}

/// Pearson correlation of two equal-length samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::invalid("pearson needs two samples of equal length >= 2"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sa = 0.0;
    let mut sb = 0.0;
    let mut sab = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sa += dx * dx;
        sb += dy * dy;
        sab += dx * dy;
    }
    if sa == 0.0 || sb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(sab / (sa.sqrt() * sb.sqrt()))
}

pub fn profile_correlation(e1: &EnergyProfile, e2: &EnergyProfile) -> Result<f64> {
    if e1.variant != e2.variant {
        return Err(Error::invalid(format!(
            "cannot correlate {} with {} profiles",
            e1.variant.as_str(),
            e2.variant.as_str()
        )));
    }
    pearson(&e1.e, &e2.e)
}

#[derive(Clone, Debug)]
pub struct PairDistances {
    /// (‖x₁−x₂‖, ‖F·x₁−F·x₂‖) per sampled pair.
    pub pairs: Vec<(f64, f64)>,
    /// Pearson correlation of the two distance samples; `None` when one
    /// side is constant (e.g. a zero bank).
    pub correlation: Option<f64>,
}

/// Sample `n_pairs` patch index pairs (distinct within a pair, pairs may
/// repeat) and compare input-space with mapped distances.
pub fn pair_distances(
    patches: &PatchMatrix,
    bank: &FilterBank,
    n_pairs: usize,
    seed: u64,
) -> Result<PairDistances> {
    let n = patches.rows.rows();
    if n < 2 {
        return Err(Error::invalid("need at least 2 patches"));
    }
    if n_pairs < 1 {
        return Err(Error::invalid("n_pairs must be at least 1"));
    }
    if bank.f.cols() != patches.rows.cols() {
        return Err(Error::DimMismatch {
            context: "pair_distances".into(),
            expected: format!("filters of length {}", patches.rows.cols()),
            found: format!("{}", bank.f.cols()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<(usize, usize)> = (0..n_pairs)
        .map(|_| {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n);
            while j == i {
                j = rng.gen_range(0..n);
            }
            (i, j)
        })
        .collect();
    let map_pair = |&(i, j): &(usize, usize)| -> (f64, f64) {
        let xi = patches.rows.row(i);
        let xj = patches.rows.row(j);
        let diff: Vec<f64> = xi.iter().zip(xj).map(|(a, b)| a - b).collect();
        let input = dot(&diff, &diff).sqrt();
        let mapped_sq: f64 = bank
            .f
            .iter_rows()
            .map(|f| {
                let p = dot(f, &diff);
                p * p
            })
            .sum();
        (input, mapped_sq.sqrt())
    };
    #[cfg(feature = "parallel")]
    let pairs: Vec<(f64, f64)> = idx.par_iter().map(map_pair).collect();
    #[cfg(not(feature = "parallel"))]
    let pairs: Vec<(f64, f64)> = idx.iter().map(map_pair).collect();
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
    let correlation = pearson(&a, &b).ok();
    Ok(PairDistances { pairs, correlation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::Image;
    use crate::patch::{extract_patches, fit_pca, PcaPopulation};
    use rand::{Rng, SeedableRng};

    fn random_basis(d: usize, seed: u64) -> PcaBasis {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = Mat::from_fn(4 * d, d, |_, _| rng.gen_range(-1.0..1.0));
        fit_pca(&rows, true, PcaPopulation::AllPatches).unwrap()
    }

    #[test]
    fn basis_vectors_give_unit_profile() {
        let basis = random_basis(6, 1);
        let rows: Vec<Vec<f64>> = (0..6).map(|i| basis.u.col(i)).collect();
        let bank = FilterBank::from_rows(&rows, 0, 0);
        let p = energy_profile(&bank, &basis, EnergyVariant::Rms).unwrap();
        for &e in &p.e {
            assert!((e - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_filter_on_first_component() {
        let basis = random_basis(5, 2);
        let bank = FilterBank::from_rows(&[basis.u.col(0)], 0, 0);
        let p = energy_profile(&bank, &basis, EnergyVariant::Rms).unwrap();
        assert!((p.e[0] - 1.0).abs() < 1e-10);
        for &e in &p.e[1..] {
            assert!(e.abs() < 1e-10);
        }
    }

    #[test]
    fn scaling_homogeneity() {
        let basis = random_basis(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let bank = FilterBank::from_rows(&rows, 0, 0);
        let scaled = FilterBank {
            f: bank.f.scale(3.0),
            ..bank.clone()
        };
        let rms = energy_profile(&bank, &basis, EnergyVariant::Rms).unwrap();
        let rms3 = energy_profile(&scaled, &basis, EnergyVariant::Rms).unwrap();
        let ms = energy_profile(&bank, &basis, EnergyVariant::MeanSquare).unwrap();
        let ms3 = energy_profile(&scaled, &basis, EnergyVariant::MeanSquare).unwrap();
        for i in 0..4 {
            assert!((rms3.e[i] - 3.0 * rms.e[i]).abs() < 1e-10);
            assert!((ms3.e[i] - 9.0 * ms.e[i]).abs() < 1e-10);
            // rms² = M · mean_square
            assert!((rms.e[i] * rms.e[i] - 7.0 * ms.e[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_invariance_exact() {
        let basis = random_basis(4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let bank = FilterBank::from_rows(&rows, 0, 0);
        let mut perm = rows.clone();
        perm.reverse();
        let bank_p = FilterBank::from_rows(&perm, 0, 0);
        for variant in [EnergyVariant::Rms, EnergyVariant::MeanSquare] {
            let a = energy_profile(&bank, &basis, variant).unwrap();
            let b = energy_profile(&bank_p, &basis, variant).unwrap();
            assert_eq!(a.e, b.e);
        }
    }

    #[test]
    fn orthogonal_mixing_invariance() {
        let basis = random_basis(5, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let bank = FilterBank::from_rows(&rows, 0, 0);
        // 3x3 rotation from QR-free construction: Jacobi eigenvectors of a
        // random symmetric matrix are orthogonal
        let sym = Mat::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0)).symmetrized();
        let q = crate::eigen::jacobi_eigen(&sym).unwrap().vectors;
        let mixed = q.matmul(&bank.f);
        let bank_q = FilterBank {
            f: mixed,
            ..bank.clone()
        };
        for variant in [EnergyVariant::Rms, EnergyVariant::MeanSquare] {
            let a = energy_profile(&bank, &basis, variant).unwrap();
            let b = energy_profile(&bank_q, &basis, variant).unwrap();
            for (x, y) in a.e.iter().zip(&b.e) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let basis = random_basis(8, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rows: Vec<Vec<f64>> = (0..16)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let bank = FilterBank::from_rows(&rows, 0, 0);
        let a = energy_profile(&bank, &basis, EnergyVariant::Rms).unwrap();
        let b = energy_profile_seq(&bank, &basis, EnergyVariant::Rms).unwrap();
        assert_eq!(a.e, b.e);
    }

    #[test]
    fn correlation_basics() {
        let basis = random_basis(4, 11);
        let e = EnergyProfile {
            e: vec![1.0, 2.0, 3.0, 4.0],
            variant: EnergyVariant::Rms,
            basis_fingerprint: basis.fingerprint(),
        };
        assert!((profile_correlation(&e, &e).unwrap() - 1.0).abs() < 1e-12);
        let affine = EnergyProfile {
            e: e.e.iter().map(|x| 2.5 * x + 7.0).collect(),
            ..e.clone()
        };
        assert!((profile_correlation(&e, &affine).unwrap() - 1.0).abs() < 1e-12);
        let neg = EnergyProfile {
            e: e.e.iter().map(|x| -x).collect(),
            ..e.clone()
        };
        assert!((profile_correlation(&e, &neg).unwrap() + 1.0).abs() < 1e-12);
        let flat = EnergyProfile {
            e: vec![2.0; 4],
            ..e.clone()
        };
        assert!(matches!(
            profile_correlation(&e, &flat),
            Err(Error::ZeroVariance)
        ));
        let ms = EnergyProfile {
            e: e.e.clone(),
            variant: EnergyVariant::MeanSquare,
            basis_fingerprint: e.basis_fingerprint,
        };
        assert!(profile_correlation(&e, &ms).is_err());
    }

    fn test_patches() -> PatchMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let img = Image::new(1, 8, 8, (0..64).map(|_| rng.gen_range(0.0..1.0)).collect());
        extract_patches(&img, 3, 1).unwrap()
    }

    #[test]
    fn pair_distances_identity_bank() {
        let patches = test_patches();
        let d = patches.rows.cols();
        let eye: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let bank = FilterBank::from_rows(&eye, 1, 3);
        let pd = pair_distances(&patches, &bank, 50, 99).unwrap();
        for &(a, b) in &pd.pairs {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((pd.correlation.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_distances_zero_bank() {
        let patches = test_patches();
        let d = patches.rows.cols();
        let bank = FilterBank::from_rows(&vec![vec![0.0; d]; 3], 1, 3);
        let pd = pair_distances(&patches, &bank, 20, 1).unwrap();
        for &(_, b) in &pd.pairs {
            assert_eq!(b, 0.0);
        }
        assert!(pd.correlation.is_none());
    }

    #[test]
    fn pair_distances_orthonormal_rows_isometry() {
        let patches = test_patches();
        let d = patches.rows.cols();
        let basis = random_basis(d, 13);
        let rows: Vec<Vec<f64>> = (0..d).map(|i| basis.u.col(i)).collect();
        let bank = FilterBank::from_rows(&rows, 1, 3);
        let pd = pair_distances(&patches, &bank, 40, 2).unwrap();
        for &(a, b) in &pd.pairs {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((pd.correlation.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mapped_distance_matches_gram_quadratic_form() {
        let patches = test_patches();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let d = patches.rows.cols();
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let bank = FilterBank::from_rows(&rows, 1, 3);
        let gram = bank.f.gram();
        let pd = pair_distances(&patches, &bank, 30, 3).unwrap();
        // redo the sampling to recover the index pairs
        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        let n = patches.rows.rows();
        for &(_, mapped) in &pd.pairs {
            let i = rng2.gen_range(0..n);
            let mut j = rng2.gen_range(0..n);
            while j == i {
                j = rng2.gen_range(0..n);
            }
            let diff: Vec<f64> = patches
                .rows
                .row(i)
                .iter()
                .zip(patches.rows.row(j))
                .map(|(a, b)| a - b)
                .collect();
            let q = dot(&diff, &gram.matvec(&diff));
            assert!((mapped * mapped - q).abs() < 1e-10);
        }
    }

    #[test]
    fn pair_distances_seeded_determinism() {
        let patches = test_patches();
        let bank = FilterBank::from_rows(&vec![vec![0.1; patches.rows.cols()]; 2], 1, 3);
        let a = pair_distances(&patches, &bank, 25, 7).unwrap();
        let b = pair_distances(&patches, &bank, 25, 7).unwrap();
        assert_eq!(a.pairs, b.pairs);
    }
}
