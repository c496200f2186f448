//! `patchlens verify`: self-contained invariant suite. The golden
//! constants below were computed independently by `scripts/golden.py`
//! (numpy); everything else is cross-checked between the brute-force
//! simulator and the closed forms.

use patchlens::analytic::{ab_diagonals, closed_form_exact, closed_form_paper, expected_random_solution};
use patchlens::data_io::{gen_shared_mean_dataset, Image};
use patchlens::dynamics::{gd_run, gd_solve, multi_filter_run, patch_span_residual, GdConfig, LossScale};
use patchlens::eigen::jacobi_eigen;
use patchlens::matrix::norm;
use patchlens::patch::{build_avg_patch_matrix, extract_all_patches, fit_pca, to_pca, PcaPopulation};
use patchlens::profile::{energy_profile, EnergyVariant, FilterBank};
use patchlens::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Computed by scripts/golden.py — do not edit by hand.
const GOLD_GD_I2_T2: [f64; 2] = [0.19, 0.0];
const GOLD_GEOM_L1_T10: f64 = 0.6513215599;
const GOLD_GD_I2_T10: [f64; 2] = [0.6513215599000001, 0.0];
const GOLD_AB_L1_M1_T1: [f64; 2] = [0.09999999999999998, 0.09999999999999998];
const GOLD_WOODBURY_I2: [f64; 2] = [0.5, 0.0];

type Check = (&'static str, fn(bool) -> Result<String, String>);

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gd_hand_iteration(_quick: bool) -> Result<String, String> {
    let k = Mat::identity(2);
    let y = [1.0, 0.0];
    let w2 = gd_solve(&k, &y, 0.1, 2, LossScale::Unnormalized).map_err(|e| e.to_string())?;
    let w10 = gd_solve(&k, &y, 0.1, 10, LossScale::Unnormalized).map_err(|e| e.to_string())?;
    let err = max_abs_diff(&w2, &GOLD_GD_I2_T2).max(max_abs_diff(&w10, &GOLD_GD_I2_T10));
    if err <= 1e-15 {
        Ok(format!("hand-iterated GD values reproduced, err {err:.1e}"))
    } else {
        Err(format!("golden GD mismatch: {err:.3e}"))
    }
}

fn geometric_series(_quick: bool) -> Result<String, String> {
    let ab = ab_diagonals(&[1.0], &[0.0], 0.1, 10);
    let sol = closed_form_exact(&Mat::identity(2), &[1.0, 0.0], 0.1, 10).map_err(|e| e.to_string())?;
    let err = (ab.a[0] - GOLD_GEOM_L1_T10)
        .abs()
        .max((sol.w_tilde[0] - GOLD_GD_I2_T10[0]).abs())
        .max(sol.w_tilde[1].abs());
    if err <= 1e-12 {
        Ok(format!("geometric-series coefficient matches golden value, err {err:.1e}"))
    } else {
        Err(format!("geometric series mismatch: {err:.3e}"))
    }
}

fn ab_diagonal_values(_quick: bool) -> Result<String, String> {
    let ab = ab_diagonals(&[1.0], &[1.0], 0.1, 1);
    let err = (ab.a[0] - GOLD_AB_L1_M1_T1[0])
        .abs()
        .max((ab.b[0] - GOLD_AB_L1_M1_T1[1]).abs());
    if err <= 1e-15 {
        Ok(format!("A/B diagonals match golden values, err {err:.1e}"))
    } else {
        Err(format!("A/B diagonal mismatch: {err:.3e}"))
    }
}

fn woodbury_identity(_quick: bool) -> Result<String, String> {
    let exp = expected_random_solution(&Mat::identity(2), &[1.0, 0.0]).map_err(|e| e.to_string())?;
    let err = max_abs_diff(&exp.w, &GOLD_WOODBURY_I2);
    let cos = exp.cosine.unwrap_or(0.0);
    if err <= 1e-12 && cos >= 1.0 - 1e-12 {
        Ok(format!("2x2 rank-one update matches golden inverse, err {err:.1e}, cosine {cos:.15}"))
    } else {
        Err(format!("Woodbury mismatch: err {err:.3e}, cosine {cos}"))
    }
}

fn pca_orthonormality(quick: bool) -> Result<String, String> {
    let trials = if quick { 5 } else { 25 };
    let mut worst: f64 = 0.0;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let rows = Mat::from_fn(40, 12, |_, _| rng.gen_range(-1.0..1.0));
        let basis = fit_pca(&rows, true, PcaPopulation::AvgPatchRows).map_err(|e| e.to_string())?;
        let gram = basis.u.gram();
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - want).abs());
            }
        }
    }
    if worst <= 1e-10 {
        Ok(format!("max |UᵀU − I| = {worst:.2e} over {trials} fits"))
    } else {
        Err(format!("orthonormality violated: {worst:.3e}"))
    }
}

fn profile_identities(_quick: bool) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let rows = Mat::from_fn(30, 12, |_, _| rng.gen_range(-1.0..1.0));
    let basis = fit_pca(&rows, true, PcaPopulation::AvgPatchRows).map_err(|e| e.to_string())?;
    let bank = FilterBank {
        f: Mat::from_fn(6, 12, |_, _| rng.gen_range(-1.0..1.0)),
        c: 0,
        k: 0,
        sigma_init: None,
    };
    let rms = energy_profile(&bank, &basis, EnergyVariant::Rms).map_err(|e| e.to_string())?;
    let ms = energy_profile(&bank, &basis, EnergyVariant::MeanSquare).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (r, m) in rms.e.iter().zip(&ms.e) {
        worst = worst.max((r * r - 6.0 * m).abs());
    }
    // The basis itself as a bank has unit response to every component.
    let eye_bank = FilterBank {
        f: basis.u.transpose(),
        c: 0,
        k: 0,
        sigma_init: None,
    };
    let ones = energy_profile(&eye_bank, &basis, EnergyVariant::Rms).map_err(|e| e.to_string())?;
    for e in &ones.e {
        worst = worst.max((e - 1.0).abs());
    }
    if worst <= 1e-10 {
        Ok(format!("rms² = M·mean_square and unit-bank profile hold, err {worst:.2e}"))
    } else {
        Err(format!("profile identity violated: {worst:.3e}"))
    }
}

fn theorem3_equality(quick: bool) -> Result<String, String> {
    let (n, d, steps) = if quick { (20, 9, 100) } else { (50, 27, 500) };
    let ds = gen_shared_mean_dataset(n, d, 1.0, 7).map_err(|e| e.to_string())?;
    let k = ds.avg_patches().unwrap();
    let lmax = jacobi_eigen(&k.gram()).map_err(|e| e.to_string())?.values[0];
    let eta = 0.9 * 2.0 * k.rows() as f64 / lmax;
    let snaps: Vec<usize> = (0..=steps).collect();
    let zero = vec![0.0; d];
    let a = gd_run(k, &ds.y_f64(), eta, steps, &zero, LossScale::OneOverN, &snaps)
        .map_err(|e| e.to_string())?;
    let b = gd_run(k, &vec![0.5; k.rows()], eta, steps, &zero, LossScale::OneOverN, &snaps)
        .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        worst = worst.max(max_abs_diff(&sa.avg_filter, &sb.avg_filter));
    }
    if worst <= 1e-12 {
        Ok(format!("true vs ½·1 labels identical to {worst:.2e} over t ≤ {steps}"))
    } else {
        Err(format!("equal-mean label identity violated: {worst:.3e}"))
    }
}

fn dispersion_constancy(quick: bool) -> Result<String, String> {
    let steps = if quick { 50 } else { 200 };
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let k = Mat::from_fn(30, 12, |_, _| rng.gen_range(-1.0..1.0));
    let y: Vec<f64> = (0..30).map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).collect();
    let lmax = jacobi_eigen(&k.gram()).map_err(|e| e.to_string())?.values[0];
    let config = GdConfig {
        eta: 0.9 * 2.0 / lmax,
        steps,
        width: 16,
        sigma_init: 0.1,
        seed: 3,
        loss_scale: LossScale::Unnormalized,
    };
    let snaps: Vec<usize> = (0..=steps).collect();
    let traj = multi_filter_run(&k, &y, &config, &snaps).map_err(|e| e.to_string())?;
    let d0 = &traj.snapshots[0].dispersion;
    let mut worst: f64 = 0.0;
    for snap in &traj.snapshots {
        for (a, b) in snap.dispersion.iter().zip(d0) {
            worst = worst.max((a - b).abs() / b);
        }
    }
    if worst <= 1e-12 {
        Ok(format!("dispersion drift {worst:.2e} relative over {steps} steps"))
    } else {
        Err(format!("dispersion not constant: {worst:.3e}"))
    }
}

fn patch_span_membership(_quick: bool) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let images: Vec<Image> = (0..2)
        .map(|_| Image::new(3, 4, 4, (0..48).map(|_| rng.gen_range(0.0..1.0)).collect()))
        .collect();
    let patches = extract_all_patches(&images, 3, 1).map_err(|e| e.to_string())?;
    let k = build_avg_patch_matrix(&images, 3).map_err(|e| e.to_string())?.k;
    let lmax = jacobi_eigen(&k.gram()).map_err(|e| e.to_string())?.values[0];
    let config = GdConfig {
        eta: 1.0 / lmax,
        steps: 50,
        width: 2,
        sigma_init: 0.0,
        seed: 1,
        loss_scale: LossScale::Unnormalized,
    };
    let traj = multi_filter_run(&k, &[0.0, 1.0], &config, &[10, 50]).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for snap in &traj.snapshots {
        for j in 0..snap.filters.rows() {
            let f = snap.filters.row(j);
            let r = patch_span_residual(f, &patches).map_err(|e| e.to_string())?;
            if r > 1e-9 * norm(f) {
                return Err(format!("filter left the patch span: residual {r:.3e}"));
            }
            worst = worst.max(r);
        }
    }
    Ok(format!("zero-init filters stay in the patch span, worst residual {worst:.2e}"))
}

fn closed_form_commuting(_quick: bool) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let raw = Mat::from_fn(30, 8, |_, _| rng.gen_range(-1.0..1.0));
    let basis = fit_pca(&raw, true, PcaPopulation::AvgPatchRows).map_err(|e| e.to_string())?;
    let kt = to_pca(&raw.centered(), &basis).map_err(|e| e.to_string())?;
    let y: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lmax = jacobi_eigen(&kt.gram()).map_err(|e| e.to_string())?.values[0];
    let eta = 0.5 / lmax;
    let mut worst: f64 = 0.0;
    for t in [1usize, 5, 50] {
        let gd = gd_solve(&kt, &y, eta, t, LossScale::Unnormalized).map_err(|e| e.to_string())?;
        let paper = closed_form_paper(&kt, &y, eta, t);
        worst = worst.max(max_abs_diff(&paper.w_tilde, &gd));
    }
    if worst <= 1e-9 {
        Ok(format!("binomial closed form matches GD at μ̂ = 0, err {worst:.2e}"))
    } else {
        Err(format!("closed form mismatch in commuting case: {worst:.3e}"))
    }
}

const CHECKS: &[Check] = &[
    ("gd-hand-iteration", gd_hand_iteration),
    ("geometric-series", geometric_series),
    ("ab-diagonals", ab_diagonal_values),
    ("woodbury-identity", woodbury_identity),
    ("pca-orthonormality", pca_orthonormality),
    ("profile-identities", profile_identities),
    ("theorem3-label-equality", theorem3_equality),
    ("lemma2-dispersion-constancy", dispersion_constancy),
    ("theorem1-patch-span", patch_span_membership),
    ("theorem2-closed-form", closed_form_commuting),
];

/// Runs every check, prints one report line each, returns the exit code
/// (0 all pass, 3 otherwise).
pub fn run(quick: bool) -> i32 {
    let mut failures = 0usize;
    for (name, check) in CHECKS {
        match check(quick) {
            Ok(detail) => println!("VERIFY {name} PASS — {detail}"),
            Err(detail) => {
                println!("VERIFY {name} FAIL — {detail}");
                failures += 1;
            }
        }
    }
    if failures == 0 {
        println!("VERIFY OK — {} checks passed", CHECKS.len());
        0
    } else {
        println!("VERIFY FAILED — {failures} of {} checks failed", CHECKS.len());
        3
    }
}
