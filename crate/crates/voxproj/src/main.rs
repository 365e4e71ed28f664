//! The `voxproj` command line: voxelize meshes, render multi-view
//! datasets, reconstruct grids from manifests, and evaluate shape sets.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

// `!(x > 0.0)` guards reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use voxproj::dataset::{self, load_recon_targets, render_grids, VoxelizeParams};
use voxproj::manifest::{kind_from_str, MANIFEST_FILE};
use voxproj::{pgm, voxg};
use voxproj_core::metrics::{chamfer_iou, mmd, ShapeSet};
use voxproj_core::rng::SplitMix64;
use voxproj_core::{
    evaluate_recon, grad_check, reconstruct, ProjectionConfig, ProjectionKind, ReconProblem,
    Resampling, ViewpointSet, VoxelGrid,
};

const USAGE: &str = "\
usage: voxproj <command> [flags]

commands:
  voxelize     --in <dir|file> --out <dir> [--n 32] [--solid]
               [--samples 8] [--seed 0] [--threads 1]
  render       --grid <dir|file> --out <dir> [--kind silhouette|depth|semantic]
               [--views 8] [--supersample 2] [--tau 1.0] [--threads 1]
  reconstruct  --manifest <file> --shape <id> --out <file> [--iters 400]
               [--step 200] [--seed 0] [--losscurve <file>] [--truth <file>]
  evaluate     --set-a <dir> --set-b <dir> --metric <mmd|chamfer>
               [--bandwidth <auto>] [--threshold 0.001]
  gradcheck    [--kind all|silhouette|depth|semantic] [--n 6] [--trials 20]
               [--eps 1e-3] [--seed 0]
";

/// Everything a gradient check must stay under to count as passing.
const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

enum CliError {
    Usage(String),
    Runtime(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(err: E) -> Self {
        CliError::Runtime(err.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}\n\n{USAGE}");
            ExitCode::from(2)
        }
    }
}

fn run(args: &[String]) -> CliResult {
    let Some(command) = args.first() else {
        return Err(usage("missing command"));
    };
    let flags = Flags::parse(&args[1..], &["solid"])?;
    match command.as_str() {
        "voxelize" => cmd_voxelize(&flags),
        "render" => cmd_render(&flags),
        "reconstruct" => cmd_reconstruct(&flags),
        "evaluate" => cmd_evaluate(&flags),
        "gradcheck" => cmd_gradcheck(&flags),
        other => Err(usage(format!("unknown command {other:?}"))),
    }
}

// --- flag parsing ------------------------------------------------------

struct Flags {
    values: BTreeMap<String, String>,
    switches: BTreeSet<String>,
}

impl Flags {
    fn parse(args: &[String], switch_names: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let mut switches = BTreeSet::new();
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            let Some(name) = arg.strip_prefix("--") else {
                return Err(usage(format!("unexpected argument {arg:?}")));
            };
            if switch_names.contains(&name) {
                switches.insert(name.to_string());
                i += 1;
                continue;
            }
            let Some(value) = args.get(i + 1) else {
                return Err(usage(format!("flag --{name} needs a value")));
            };
            values.insert(name.to_string(), value.clone());
            i += 2;
        }
        Ok(Self { values, switches })
    }

    fn switch(&self, name: &str) -> bool {
        self.switches.contains(name)
    }

    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        self.values
            .get(name)
            .map(PathBuf::from)
            .ok_or_else(|| usage(format!("missing required flag --{name}")))
    }

    fn string(&self, name: &str) -> Result<String, CliError> {
        self.values
            .get(name)
            .cloned()
            .ok_or_else(|| usage(format!("missing required flag --{name}")))
    }

    fn opt_path(&self, name: &str) -> Option<PathBuf> {
        self.values.get(name).map(PathBuf::from)
    }

    fn usize_or(&self, name: &str, default: usize) -> Result<usize, CliError> {
        match self.values.get(name) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| usage(format!("--{name}: {raw:?} is not a non-negative integer"))),
        }
    }

    fn f64_or(&self, name: &str, default: f64) -> Result<f64, CliError> {
        match self.values.get(name) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| usage(format!("--{name}: {raw:?} is not a number"))),
        }
    }

    fn str_or<'a>(&'a self, name: &str, default: &'a str) -> &'a str {
        self.values.get(name).map_or(default, |s| s.as_str())
    }
}

// --- commands ----------------------------------------------------------

fn cmd_voxelize(flags: &Flags) -> CliResult {
    let input = flags.path("in")?;
    let out = flags.path("out")?;
    let n = flags.usize_or("n", 32)?;
    let seed = flags.usize_or("seed", 0)? as u64;
    let threads = flags.usize_or("threads", 1)?;
    let params = VoxelizeParams {
        samples_per_area: flags.f64_or("samples", 8.0)?,
        solid: flags.switch("solid"),
    };
    if n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    if !(params.samples_per_area > 0.0) {
        return Err(usage("--samples must be positive"));
    }

    let paths = dataset::mesh_paths(&input)?;
    std::fs::create_dir_all(&out).map_err(|e| voxproj::Error::io(&out, e))?;
    let results = dataset::parallel_map(paths, threads, |path| {
        dataset::voxelize_mesh(path, n, &params, seed).and_then(|(id, grid)| {
            voxg::write_grid(&grid, &out.join(format!("{id}.voxg")))?;
            Ok((id, grid.occupied()))
        })
    });
    let mut successes = 0usize;
    for result in results {
        match result {
            Ok((id, occupied)) => {
                println!("{id} occ={occupied}");
                successes += 1;
            }
            Err(err) => eprintln!("warning: skipped shape: {err}"),
        }
    }
    if successes == 0 {
        return Err(CliError::Runtime("every input mesh failed".into()));
    }
    Ok(())
}

fn parse_kind(raw: &str) -> Result<ProjectionKind, CliError> {
    kind_from_str(raw).ok_or_else(|| usage(format!("unknown render kind {raw:?}")))
}

fn cmd_render(flags: &Flags) -> CliResult {
    let grid_input = flags.path("grid")?;
    let out = flags.path("out")?;
    let kind = parse_kind(flags.str_or("kind", "silhouette"))?;
    let n_views = flags.usize_or("views", 8)?;
    let supersample = flags.usize_or("supersample", 2)?;
    let tau = flags.f64_or("tau", 1.0)?;
    let threads = flags.usize_or("threads", 1)?;
    if n_views == 0 {
        return Err(usage("--views must be at least 1"));
    }
    if supersample == 0 {
        return Err(usage("--supersample must be at least 1"));
    }
    if !(tau > 0.0) {
        return Err(usage("--tau must be positive"));
    }
    let views = ViewpointSet::evenly_spaced(n_views)?;
    let cfg = ProjectionConfig {
        tau,
        resampling: Resampling::Trilinear,
        supersample,
    };
    let manifest = render_grids(&grid_input, &out, &views, kind, &cfg, threads)?;
    println!(
        "entries={} manifest={}",
        manifest.entries.len(),
        out.join(MANIFEST_FILE).display()
    );
    Ok(())
}

fn cmd_reconstruct(flags: &Flags) -> CliResult {
    let manifest_path = flags.path("manifest")?;
    let shape = flags.string("shape")?;
    let out = flags.path("out")?;
    let iters = flags.usize_or("iters", 400)?;
    let step = flags.f64_or("step", 200.0)?;
    let seed = flags.usize_or("seed", 0)? as u64;
    if iters == 0 {
        return Err(usage("--iters must be at least 1"));
    }
    if !(step > 0.0) {
        return Err(usage("--step must be positive"));
    }

    let (targets, kind, n) = load_recon_targets(&manifest_path, &shape)?;
    let problem = ReconProblem::new(kind, targets, n, ProjectionConfig::default())?;
    let report = reconstruct(&problem, iters, step, seed)?;
    voxg::write_grid(&report.grid, &out)?;
    if let Some(curve_path) = flags.opt_path("losscurve") {
        let mut text = String::new();
        for (iteration, loss) in &report.loss_curve {
            text.push_str(&format!("{iteration}\t{loss}\n"));
        }
        std::fs::write(&curve_path, text).map_err(|e| voxproj::Error::io(&curve_path, e))?;
    }
    let final_loss = report.loss_curve.last().map_or(f64::NAN, |(_, l)| *l);
    println!("final_loss={final_loss}");
    if let Some(truth_path) = flags.opt_path("truth") {
        let truth = voxg::read_grid(&truth_path)?;
        let score = evaluate_recon(&report.grid, &truth, 0.5)?;
        println!("iou={score}");
    }
    Ok(())
}

/// Loads a directory as flat value arrays: VOXG grids when present,
/// otherwise PGM images. Returns the arrays and whether they are grids.
fn load_value_set(dir: &Path) -> Result<(Vec<Vec<f64>>, bool), CliError> {
    if let Ok(paths) = dataset::grid_paths(dir) {
        let mut items = Vec::with_capacity(paths.len());
        for path in &paths {
            items.push(voxg::read_grid(path)?.values().to_vec());
        }
        return Ok((items, true));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| voxproj::Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Runtime(format!(
            "{}: no .voxg or .pgm files found",
            dir.display()
        )));
    }
    let mut items = Vec::with_capacity(paths.len());
    for path in &paths {
        items.push(pgm::read_image_pgm(path)?.values().to_vec());
    }
    Ok((items, false))
}

fn cmd_evaluate(flags: &Flags) -> CliResult {
    let dir_a = flags.path("set-a")?;
    let dir_b = flags.path("set-b")?;
    let metric = flags.string("metric")?;
    let threshold = flags.f64_or("threshold", 0.001)?;
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(usage("--threshold must lie in (0, 1)"));
    }

    let (items_a, grids_a) = load_value_set(&dir_a)?;
    let (items_b, grids_b) = load_value_set(&dir_b)?;
    let set_a = ShapeSet::from_values(items_a.iter().map(|v| v.as_slice()), threshold)?;
    let set_b = ShapeSet::from_values(items_b.iter().map(|v| v.as_slice()), threshold)?;

    match metric.as_str() {
        "mmd" => {
            // Bandwidth convention: 1e-2 for voxel sets, 1e-3 for images.
            let default_bandwidth = if grids_a && grids_b { 1e-2 } else { 1e-3 };
            let bandwidth = flags.f64_or("bandwidth", default_bandwidth)?;
            if !(bandwidth > 0.0) {
                return Err(usage("--bandwidth must be positive"));
            }
            let value = mmd(&set_a, &set_b, bandwidth)?;
            println!("mmd={value}");
        }
        "chamfer" => {
            let (coverage, accuracy, avg) = chamfer_iou(&set_a, &set_b)?;
            println!("coverage={coverage} accuracy={accuracy} avg={avg}");
        }
        other => return Err(usage(format!("unknown metric {other:?}"))),
    }
    Ok(())
}

/// Seeded random test grid; multi-channel grids keep per-voxel channel
/// sums away from 1, where the clamped semantic aggregate has no
/// derivative for finite differences to measure.
fn random_grid(n: usize, channels: usize, rng: &mut SplitMix64) -> VoxelGrid {
    let n3 = n * n * n;
    let mut values: Vec<f64> = (0..channels * n3).map(|_| rng.next_f64()).collect();
    if channels > 1 {
        for i in 0..n3 {
            let sum: f64 = (0..channels).map(|c| values[c * n3 + i]).sum();
            if (sum - 1.0).abs() < 0.05 {
                for c in 0..channels {
                    values[c * n3 + i] *= 0.9;
                }
            }
        }
    }
    VoxelGrid::from_values(n, channels, values).expect("values stay in range")
}

fn cmd_gradcheck(flags: &Flags) -> CliResult {
    let kind_arg = flags.str_or("kind", "all");
    let n = flags.usize_or("n", 6)?;
    let trials = flags.usize_or("trials", 20)?;
    let eps = flags.f64_or("eps", 1e-3)?;
    let seed = flags.usize_or("seed", 0)? as u64;
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(usage("--eps must be positive"));
    }
    if n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let kinds: Vec<ProjectionKind> = match kind_arg {
        "all" => vec![
            ProjectionKind::Silhouette,
            ProjectionKind::Depth,
            ProjectionKind::Semantic,
        ],
        other => vec![parse_kind(other)?],
    };

    let cfg = ProjectionConfig {
        tau: 1.0,
        resampling: Resampling::Trilinear,
        supersample: 1,
    };
    let views = ViewpointSet::default();
    let mut all_passed = true;
    for kind in kinds {
        let mut rng = SplitMix64::stream(seed, &format!("gradcheck/{}", kind.as_str()));
        let channels = match kind {
            ProjectionKind::Semantic => 3,
            _ => 1,
        };
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let grid = random_grid(n, channels, &mut rng);
            let view = views
                .get(rng.next_below(views.len()))
                .expect("index in range");
            let err = grad_check(kind, &grid, view, &cfg, eps)?;
            if err > worst {
                worst = err;
            }
        }
        println!("{} max_rel_err={worst}", kind.as_str());
        if worst > GRAD_CHECK_TOLERANCE {
            all_passed = false;
        }
    }
    if !all_passed {
        return Err(CliError::Runtime(format!(
            "gradient check exceeded {GRAD_CHECK_TOLERANCE:e}"
        )));
    }
    Ok(())
}
