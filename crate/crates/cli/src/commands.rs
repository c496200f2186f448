use std::path::{Path, PathBuf};

use patchlens::analytic::{
    ab_diagonals, closed_form_exact, closed_form_paper, commutation_gap, lambda_matrix,
    predicted_label_sensitivity, predicted_profile, ridge_solution,
};
use patchlens::data_io::{
    export_filter_bank, gen_shared_mean_dataset, import_filter_bank, load_cifar10_batch_opts,
    make_binary_subset, make_labels, shift_class_mean, BinaryData, LabeledImageSet, LabelSource,
};
use patchlens::dynamics::{multi_filter_run, GdConfig, LossScale};
use patchlens::patch::{
    build_avg_patch_matrix, extract_all_patches, fit_pca_with_geometry, to_pca, PcaBasis,
    PcaPopulation,
};
use patchlens::profile::{energy_profile, pair_distances, pearson, EnergyVariant, FilterBank};
use patchlens::{Error, Result};
use serde::Serialize;

use crate::formats;
use crate::manifest::{atomic_write, tmp_path, Manifest};
use crate::svg;
use crate::verify;
use crate::{Cli, Command};

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Pca(args) => pca(cli, args),
        Command::Profile(args) => profile(cli, args),
        Command::Compare(args) => compare(cli, args),
        Command::Distances(args) => distances(cli, args),
        Command::AvgPatch(args) => avg_patch(cli, args),
        Command::Simulate(args) => simulate(cli, args),
        Command::Predict(args) => predict(cli, args),
        Command::Sensitivity(args) => sensitivity(cli, args),
        Command::Synth(args) => synth(cli, args),
        Command::Verify(args) => Ok(verify::run(args.quick)),
    }
}

/// Bad flag *values* (clap only catches unknown flags) → usage error, exit 2.
fn arg_error(msg: &str) -> Result<i32> {
    eprintln!("argument error: {msg}");
    Ok(2)
}

/// Resolve `--data` (or PATCHLENS_DATA) to concrete CIFAR-10 batch files
/// and load them in name order.
fn load_images(
    data: &Option<PathBuf>,
    scale: bool,
    limit: Option<usize>,
) -> Result<(LabeledImageSet, Vec<PathBuf>)> {
    let root = match data {
        Some(p) => p.clone(),
        None => std::env::var("PATCHLENS_DATA")
            .ok()
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .ok_or_else(|| Error::invalid("no --data given and PATCHLENS_DATA is not set"))?,
    };
    let paths: Vec<PathBuf> = if root.is_dir() {
        let dir = if root.join("data_batch_1.bin").exists() {
            root
        } else {
            root.join("cifar-10-batches-bin")
        };
        let mut found: Vec<PathBuf> = (1..=5)
            .map(|i| dir.join(format!("data_batch_{i}.bin")))
            .filter(|p| p.exists())
            .collect();
        if found.is_empty() {
            return Err(Error::invalid(format!(
                "no data_batch_*.bin under {}",
                dir.display()
            )));
        }
        found.sort();
        found
    } else {
        vec![root]
    };
    let mut set = LabeledImageSet {
        images: Vec::new(),
        labels: Vec::new(),
        class_names: None,
    };
    for p in &paths {
        let batch = load_cifar10_batch_opts(p, scale)?;
        set.images.extend(batch.images);
        set.labels.extend(batch.labels);
        if limit.is_some_and(|n| set.images.len() >= n) {
            break;
        }
    }
    if let Some(n) = limit {
        set.images.truncate(n);
        set.labels.truncate(n);
    }
    Ok((set, paths))
}

fn load_basis(path: &Path) -> Result<PcaBasis> {
    PcaBasis::from_json(&std::fs::read_to_string(path)?)
}

/// Default basis for dataset-level commands: centered PCA on the rows of
/// K itself, the population the closed-form theory is stated in.
fn dataset_basis(ds: &formats::Dataset) -> Result<PcaBasis> {
    fit_pca_with_geometry(
        &ds.k,
        true,
        PcaPopulation::AvgPatchRows,
        ds.c,
        ds.patch_k,
    )
}

/// The analytic formulas model the unnormalized GD recursion; warn when
/// the requested step size diverges on this dataset instead of emitting
/// overflow-sized numbers silently.
fn warn_if_unstable(kt: &patchlens::Mat, eta: f64) {
    if let Ok(margin) = patchlens::dynamics::stability_margin(kt, eta, LossScale::Unnormalized) {
        if margin >= 1.0 + 1e-12 {
            eprintln!(
                "warning: step size is unstable for this dataset (max |1 - eta*lambda| = {margin:.3}); \
                 predictions may overflow — reduce --eta"
            );
        }
    }
}

fn label_source(name: &str, seed: u64) -> Option<LabelSource> {
    match name {
        "true" => Some(LabelSource::True),
        "bernoulli" => Some(LabelSource::Bernoulli { seed }),
        "expectation" => Some(LabelSource::Expectation),
        _ => None,
    }
}

fn pca(cli: &Cli, args: &crate::PcaArgs) -> Result<i32> {
    let Ok(population) = PcaPopulationArg::parse(&args.population) else {
        return arg_error("--population must be all_patches or avg_patch_rows");
    };
    let mut manifest = Manifest::new("pca", args);
    let basis = if let Some(dataset) = &args.dataset {
        if population.0 == PcaPopulation::AllPatches {
            return arg_error("--dataset holds average-patch rows; use --population avg_patch_rows");
        }
        manifest.input(dataset)?;
        let ds = formats::parse_dataset(&std::fs::read_to_string(dataset)?)?;
        dataset_basis(&ds)?
    } else {
        let (set, paths) = load_images(&args.data, !cli.no_scale, args.limit)?;
        for p in &paths {
            manifest.input(p)?;
        }
        let c = set.images.first().map_or(0, |im| im.c);
        let rows = match population.0 {
            PcaPopulation::AllPatches => {
                extract_all_patches(&set.images, args.patch_size, args.stride)?.rows
            }
            PcaPopulation::AvgPatchRows => build_avg_patch_matrix(&set.images, args.patch_size)?.k,
        };
        fit_pca_with_geometry(&rows, !args.uncentered, population.0, c, args.patch_size)?
    };
    atomic_write(&args.out, basis.to_json().as_bytes())?;
    manifest.output(&args.out);
    manifest.write(&args.out)?;
    println!(
        "wrote {} (d={}, population={})",
        args.out.display(),
        basis.dim(),
        args.population
    );
    Ok(0)
}

struct PcaPopulationArg(PcaPopulation);

impl PcaPopulationArg {
    fn parse(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "all_patches" => Ok(PcaPopulationArg(PcaPopulation::AllPatches)),
            "avg_patch_rows" => Ok(PcaPopulationArg(PcaPopulation::AvgPatchRows)),
            _ => Err(()),
        }
    }
}

fn profile(_cli: &Cli, args: &crate::ProfileArgs) -> Result<i32> {
    let Ok(variant) = EnergyVariant::parse(&args.variant) else {
        return arg_error("--variant must be rms or mean_square");
    };
    let mut manifest = Manifest::new("profile", args);
    manifest.input(&args.filters)?;
    manifest.input(&args.pca)?;
    let bank = import_filter_bank(&args.filters)?;
    let basis = load_basis(&args.pca)?;
    let prof = energy_profile(&bank, &basis, variant)?;
    let mut energies = prof.e;
    if let Some(init) = &args.subtract_init {
        manifest.input(init)?;
        let init_bank = import_filter_bank(init)?;
        let init_prof = energy_profile(&init_bank, &basis, variant)?;
        for (e, i) in energies.iter_mut().zip(&init_prof.e) {
            *e -= i;
        }
    }
    atomic_write(
        &args.out,
        formats::write_profile(&basis.eigenvalues, &energies).as_bytes(),
    )?;
    manifest.output(&args.out);
    if let Some(svg_path) = &args.svg {
        let points: Vec<(f64, f64)> = energies
            .iter()
            .enumerate()
            .map(|(i, &e)| (i as f64, e))
            .collect();
        let plot = svg::line_plot(
            &points,
            &format!("energy profile ({})", variant.as_str()),
            "PCA component",
            "energy",
        );
        atomic_write(svg_path, plot.as_bytes())?;
        manifest.output(svg_path);
    }
    manifest.write(&args.out)?;
    println!("wrote {} ({} components)", args.out.display(), energies.len());
    Ok(0)
}

#[derive(Serialize)]
struct CompareReport {
    variant: String,
    correlation: f64,
    components: usize,
}

fn compare(_cli: &Cli, args: &crate::CompareArgs) -> Result<i32> {
    if EnergyVariant::parse(&args.variant_a).is_err() || EnergyVariant::parse(&args.variant_b).is_err()
    {
        return arg_error("variants must be rms or mean_square");
    }
    if args.variant_a != args.variant_b {
        return arg_error(&format!(
            "refusing to correlate a {} profile with a {} profile; correlations are only comparable within one variant",
            args.variant_a, args.variant_b
        ));
    }
    let mut manifest = Manifest::new("compare", args);
    manifest.input(&args.a)?;
    manifest.input(&args.b)?;
    let (_, ea) = formats::parse_profile(&std::fs::read_to_string(&args.a)?)?;
    let (_, eb) = formats::parse_profile(&std::fs::read_to_string(&args.b)?)?;
    let correlation = pearson(&ea, &eb)?;
    println!("correlation = {correlation}");
    if let Some(out) = &args.out {
        let report = CompareReport {
            variant: args.variant_a.clone(),
            correlation,
            components: ea.len(),
        };
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::invalid(format!("report serialization: {e}")))?;
        atomic_write(out, text.as_bytes())?;
        manifest.output(out);
        manifest.write(out)?;
    }
    Ok(0)
}

fn distances(cli: &Cli, args: &crate::DistancesArgs) -> Result<i32> {
    let mut manifest = Manifest::new("distances", args);
    let (set, paths) = load_images(&args.data, !cli.no_scale, args.limit)?;
    for p in &paths {
        manifest.input(p)?;
    }
    manifest.input(&args.filters)?;
    let patches = extract_all_patches(&set.images, args.patch_size, args.stride)?;
    let bank = import_filter_bank(&args.filters)?;
    let pd = pair_distances(&patches, &bank, args.pairs, cli.seed)?;
    atomic_write(&args.out, formats::write_pairs(&pd.pairs).as_bytes())?;
    manifest.output(&args.out);
    if let Some(svg_path) = &args.svg {
        let plot = svg::scatter_plot(
            &pd.pairs,
            "patch pair distances",
            "input distance",
            "mapped distance",
        );
        atomic_write(svg_path, plot.as_bytes())?;
        manifest.output(svg_path);
    }
    manifest.write(&args.out)?;
    match pd.correlation {
        Some(c) => println!("correlation = {c}"),
        None => println!("correlation = undefined (constant distances)"),
    }
    Ok(0)
}

fn avg_patch(cli: &Cli, args: &crate::AvgPatchArgs) -> Result<i32> {
    let mut manifest = Manifest::new("avg-patch", args);
    let (set, paths) = load_images(&args.data, !cli.no_scale, args.limit)?;
    for p in &paths {
        manifest.input(p)?;
    }
    let c = set.images.first().map_or(0, |im| im.c);
    let (images, y) = match (args.class_a, args.class_b) {
        (Some(a), Some(b)) => {
            let subset = make_binary_subset(&set, a, b)?;
            let images = match subset.data {
                BinaryData::Images(images) => images,
                BinaryData::AvgPatches(_) => unreachable!("subset of images"),
            };
            (images, subset.y)
        }
        _ => (set.images, set.labels),
    };
    let avg = build_avg_patch_matrix(&images, args.patch_size)?;
    let ds = formats::Dataset {
        k: avg.k,
        y,
        c,
        patch_k: args.patch_size,
    };
    atomic_write(&args.out, formats::write_dataset(&ds).as_bytes())?;
    manifest.output(&args.out);
    manifest.write(&args.out)?;
    println!("wrote {} ({} rows, d={})", args.out.display(), ds.k.rows(), ds.k.cols());
    Ok(0)
}

fn simulate(cli: &Cli, args: &crate::SimulateArgs) -> Result<i32> {
    let Some(source) = label_source(&args.labels, cli.seed) else {
        return arg_error("--labels must be true, bernoulli, or expectation");
    };
    let Ok(loss_scale) = LossScale::parse(&args.loss_scale) else {
        return arg_error("--loss-scale must be unnormalized or one_over_n");
    };
    if args.snap_every == 0 {
        return arg_error("--snap-every must be at least 1");
    }
    let mut manifest = Manifest::new("simulate", args);
    manifest.input(&args.dataset)?;
    let ds = formats::parse_dataset(&std::fs::read_to_string(&args.dataset)?)?;
    let y = make_labels(source, &ds.y);
    let config = GdConfig {
        eta: args.eta,
        steps: args.steps,
        width: args.width,
        sigma_init: args.sigma,
        seed: cli.seed,
        loss_scale,
    };
    let mut snaps: Vec<usize> = (0..=args.steps).step_by(args.snap_every).collect();
    snaps.push(args.steps);
    let traj = multi_filter_run(&ds.k, &y, &config, &snaps)?;
    if let Some(w) = &traj.divergence_warning {
        eprintln!("warning: {w}");
    }
    atomic_write(&args.out, formats::write_trajectory(&traj).as_bytes())?;
    manifest.output(&args.out);
    if let Some(prefix) = &args.filters_out {
        for snap in &traj.snapshots {
            let path = PathBuf::from(format!("{}_iter{}.csv", prefix.display(), snap.iter));
            let bank = FilterBank {
                f: snap.filters.clone(),
                c: ds.c,
                k: ds.patch_k,
                sigma_init: Some(args.sigma),
            };
            let tmp = tmp_path(&path);
            export_filter_bank(&bank, &tmp)?;
            std::fs::rename(&tmp, &path)?;
            manifest.output(&path);
        }
    }
    manifest.write(&args.out)?;
    println!(
        "wrote {} ({} snapshots, final iter {})",
        args.out.display(),
        traj.snapshots.len(),
        traj.final_snapshot().iter
    );
    Ok(0)
}

#[derive(Serialize)]
struct Diagnostics {
    cond: Option<f64>,
    commutation_gap: f64,
}

#[derive(Serialize)]
struct Prediction {
    method: String,
    eta: f64,
    t: usize,
    sigma: f64,
    w_tilde: Vec<f64>,
    profile: Vec<f64>,
    diagnostics: Diagnostics,
}

fn predict(cli: &Cli, args: &crate::PredictArgs) -> Result<i32> {
    let Some(source) = label_source(&args.labels, cli.seed) else {
        return arg_error("--labels must be true, bernoulli, or expectation");
    };
    if !matches!(args.method.as_str(), "exact" | "paper" | "ridge") {
        return arg_error("--method must be exact, paper, or ridge");
    }
    let mut manifest = Manifest::new("predict", args);
    manifest.input(&args.dataset)?;
    let ds = formats::parse_dataset(&std::fs::read_to_string(&args.dataset)?)?;
    let basis = match &args.pca {
        Some(p) => {
            manifest.input(p)?;
            load_basis(p)?
        }
        None => dataset_basis(&ds)?,
    };
    let kt = to_pca(&ds.k, &basis)?;
    warn_if_unstable(&kt, args.eta);
    let y = make_labels(source, &ds.y);
    let sol = match args.method.as_str() {
        "exact" => closed_form_exact(&kt, &y, args.eta, args.t)?,
        "paper" => closed_form_paper(&kt, &y, args.eta, args.t),
        "ridge" => {
            let stats = patchlens::patch::second_moment_stats(&kt);
            let ab = ab_diagonals(&stats.sigma_diag, &stats.mu_hat, args.eta, args.t);
            let lam = lambda_matrix(&ab, &stats.mu_hat, &stats.sigma_diag)?;
            ridge_solution(&kt, &y, &lam.m)?
        }
        _ => unreachable!(),
    };
    let profile = predicted_profile(&sol.w_tilde, args.sigma);
    let gap = commutation_gap(&kt, &y, args.eta, args.t)?;
    let prediction = Prediction {
        method: sol.method.as_str().to_string(),
        eta: args.eta,
        t: args.t,
        sigma: args.sigma,
        w_tilde: sol.w_tilde,
        profile: profile.e,
        diagnostics: Diagnostics {
            cond: sol.condition,
            commutation_gap: gap,
        },
    };
    let text = serde_json::to_string_pretty(&prediction)
        .map_err(|e| Error::invalid(format!("prediction serialization: {e}")))?;
    atomic_write(&args.out, text.as_bytes())?;
    manifest.output(&args.out);
    manifest.write(&args.out)?;
    println!(
        "wrote {} (method={}, commutation gap {gap:.3e})",
        args.out.display(),
        prediction.method
    );
    Ok(0)
}

fn sensitivity(_cli: &Cli, args: &crate::SensitivityArgs) -> Result<i32> {
    if args.eps_steps == 0 {
        return arg_error("--eps-steps must be at least 1");
    }
    let mut manifest = Manifest::new("sensitivity", args);
    manifest.input(&args.dataset)?;
    let ds = formats::parse_dataset(&std::fs::read_to_string(&args.dataset)?)?;
    let basis = match &args.pca {
        Some(p) => {
            manifest.input(p)?;
            load_basis(p)?
        }
        None => dataset_basis(&ds)?,
    };
    warn_if_unstable(&to_pca(&ds.k, &basis)?, args.eta);
    let y: Vec<f64> = ds.y.iter().map(|&b| b as f64).collect();
    let mut curve = Vec::with_capacity(args.eps_steps + 1);
    for i in 0..=args.eps_steps {
        let eps = args.eps_max * i as f64 / args.eps_steps as f64;
        let k_eps = shift_class_mean(&ds.k, &ds.y, &basis, args.dir, eps)?;
        let kt = to_pca(&k_eps, &basis)?;
        let corr = predicted_label_sensitivity(&kt, &y, args.eta, args.t, args.sigma)?;
        curve.push((eps, corr));
    }
    atomic_write(&args.out, formats::write_sensitivity(&curve).as_bytes())?;
    manifest.output(&args.out);
    if let Some(svg_path) = &args.svg {
        let plot = svg::line_plot(
            &curve,
            "predicted true-vs-random profile correlation",
            "class mean shift ε",
            "correlation",
        );
        atomic_write(svg_path, plot.as_bytes())?;
        manifest.output(svg_path);
    }
    manifest.write(&args.out)?;
    println!(
        "wrote {} (corr {} at ε=0, {} at ε={})",
        args.out.display(),
        curve[0].1,
        curve[args.eps_steps].1,
        args.eps_max
    );
    Ok(0)
}

/// Guess a (channels, patch-size) pair for a synthetic dimension so the
/// dataset can feed filter exports; 0,0 when d is not c·k² for c ∈ {3, 1}.
fn infer_geometry(d: usize) -> (usize, usize) {
    for c in [3usize, 1] {
        if d % c == 0 {
            let k = ((d / c) as f64).sqrt().round() as usize;
            if k * k * c == d {
                return (c, k);
            }
        }
    }
    (0, 0)
}

fn synth(cli: &Cli, args: &crate::SynthArgs) -> Result<i32> {
    let mut manifest = Manifest::new("synth", args);
    let data = gen_shared_mean_dataset(args.n_per_class, args.dim, args.spread, cli.seed)?;
    let (c, patch_k) = infer_geometry(args.dim);
    let ds = formats::Dataset {
        k: data.avg_patches().expect("synthetic data is an avg-patch matrix").clone(),
        y: data.y,
        c,
        patch_k,
    };
    atomic_write(&args.out, formats::write_dataset(&ds).as_bytes())?;
    manifest.output(&args.out);
    manifest.write(&args.out)?;
    println!("wrote {} ({} rows, d={})", args.out.display(), ds.k.rows(), args.dim);
    Ok(0)
}
