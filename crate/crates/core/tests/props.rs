//! Property tests for the module-level invariants that hold for *all*
//! inputs, not just hand-picked ones.

use patchlens::data_io::{gen_shared_mean_dataset, parse_filter_bank, shift_class_mean, Image};
use patchlens::matrix::dot;
use patchlens::patch::{class_average_patch, extract_patches, fit_pca, PcaPopulation};
use patchlens::profile::{energy_profile, pearson, EnergyVariant, FilterBank};
use patchlens::Mat;
use proptest::prelude::*;

fn finite_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        -1.0..1.0f64,
        Just(0.0),
        Just(-0.0),
        Just(1.0 / 3.0),
    ]
}

proptest! {
    // Pearson is invariant under positive affine maps of either argument.
    #[test]
    fn pearson_affine_invariance(
        xs in prop::collection::vec(-1e3..1e3f64, 3..20),
        a in 0.1..10.0f64,
        b in -5.0..5.0f64,
    ) {
        let ys: Vec<f64> = xs.iter().map(|&x| a * x + b).collect();
        if let Ok(c) = pearson(&xs, &ys) {
            prop_assert!((c - 1.0).abs() < 1e-9, "{c}");
        }
    }

    // rms² = M · mean_square elementwise, for any bank and basis.
    #[test]
    fn rms_squared_is_m_times_mean_square(seed in 0u64..500, m in 1usize..12, d in 2usize..10) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows = Mat::from_fn(d + 3, d, |_, _| rng.gen_range(-1.0..1.0));
        let basis = fit_pca(&rows, true, PcaPopulation::AvgPatchRows).unwrap();
        let bank = FilterBank {
            f: Mat::from_fn(m, d, |_, _| rng.gen_range(-1.0..1.0)),
            c: 0,
            k: 0,
            sigma_init: None,
        };
        let rms = energy_profile(&bank, &basis, EnergyVariant::Rms).unwrap();
        let ms = energy_profile(&bank, &basis, EnergyVariant::MeanSquare).unwrap();
        for (r, s) in rms.e.iter().zip(&ms.e) {
            prop_assert!((r * r - m as f64 * s).abs() <= 1e-12 * (1.0 + r * r));
        }
    }

    // The filter CSV round-trips arbitrary finite doubles bit-exactly.
    #[test]
    fn filter_csv_roundtrip_exact(
        rows in prop::collection::vec(prop::collection::vec(finite_f64(), 4), 1..8),
    ) {
        let d = rows[0].len();
        let mut text = format!("patchlens-filters v1\n{},{d},1,2\n", rows.len());
        for r in &rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        let bank = parse_filter_bank(&text).unwrap();
        for (parsed, original) in bank.f.iter_rows().zip(&rows) {
            for (p, o) in parsed.iter().zip(original) {
                prop_assert_eq!(p.to_bits(), o.to_bits());
            }
        }
    }

    // Patch count formula over a grid of geometries.
    #[test]
    fn patch_count_formula(h in 3usize..12, w in 3usize..12, k in 1usize..4, stride in 1usize..3) {
        prop_assume!(k <= h.min(w));
        let img = Image::constant(2, h, w, 0.5);
        let patches = extract_patches(&img, k, stride).unwrap();
        let expected = ((h - k) / stride + 1) * ((w - k) / stride + 1);
        prop_assert_eq!(patches.rows.rows(), expected);
        prop_assert_eq!(patches.rows.cols(), 2 * k * k);
    }

    // gen_shared_mean_dataset always yields exactly matching class means,
    // and shift_class_mean moves the projected mean difference by exactly
    // epsilon along the chosen direction and nowhere else.
    #[test]
    fn shared_mean_and_shift(seed in 0u64..200, n in 1usize..20, eps in 0.0..2.0f64) {
        let d = 6;
        let ds = gen_shared_mean_dataset(n, d, 0.7, seed).unwrap();
        let k = ds.avg_patches().unwrap();
        let m0 = class_average_patch(k, &ds.y, 0).unwrap();
        let m1 = class_average_patch(k, &ds.y, 1).unwrap();
        for (a, b) in m0.iter().zip(&m1) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
        let basis = fit_pca(k, true, PcaPopulation::AvgPatchRows).unwrap();
        let dir = 2usize;
        let shifted = shift_class_mean(k, &ds.y, &basis, dir, eps).unwrap();
        let s1 = class_average_patch(&shifted, &ds.y, 1).unwrap();
        let diff: Vec<f64> = s1.iter().zip(&m0).map(|(a, b)| a - b).collect();
        for j in 0..d {
            let proj = dot(&diff, &basis.u.col(j));
            let want = if j == dir { eps } else { 0.0 };
            prop_assert!((proj - want).abs() <= 1e-11, "axis {j}: {proj} vs {want}");
        }
    }
}
