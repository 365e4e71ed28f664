//! Multi-view reconstruction by gradient descent through the projections,
//! and the visual-hull baseline it is measured against.
//!
//! Occupancy is parameterized as the sigmoid of an unconstrained field so
//! no projection step is needed; the optimizer is plain gradient descent
//! with step halving whenever a step would increase the loss. Everything
//! is deterministic for a fixed seed.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Image, VoxelGrid};
use crate::metrics::{binarize, iou};
use crate::project::{forward_engine, vjp_engine, ProjectionKind, Rendering};
use crate::rng::SplitMix64;
use crate::rotate::{rotate_cell_forward, rotation_inverse};
use crate::view::{ProjectionConfig, Viewpoint};

/// One observed image with its viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconTarget {
    pub view: Viewpoint,
    pub data: Rendering,
}

/// A multi-view inverse problem: recover an `n^3` grid whose projections
/// match the targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconProblem {
    kind: ProjectionKind,
    targets: Vec<ReconTarget>,
    n: usize,
    channels: usize,
    cfg: ProjectionConfig,
}

impl ReconProblem {
    pub fn new(
        kind: ProjectionKind,
        targets: Vec<ReconTarget>,
        n: usize,
        cfg: ProjectionConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if targets.is_empty() {
            return Err(Error::Empty {
                what: "reconstruction targets",
            });
        }
        let channels = targets[0].data.channels();
        for target in &targets {
            let ok = target.data.h() == n
                && target.data.w() == n
                && target.data.channels() == channels;
            let kind_ok = matches!(
                (kind, &target.data),
                (ProjectionKind::Semantic, Rendering::Semantic(_))
                    | (
                        ProjectionKind::Silhouette | ProjectionKind::Depth,
                        Rendering::Image(_)
                    )
            );
            if !ok || !kind_ok {
                return Err(Error::ShapeMismatch {
                    context: "reconstruction targets",
                });
            }
        }
        Ok(Self {
            kind,
            targets,
            n,
            channels,
            cfg,
        })
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn targets(&self) -> &[ReconTarget] {
        &self.targets
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cfg(&self) -> &ProjectionConfig {
        &self.cfg
    }
}

/// Result of [`reconstruct`]: the recovered grid, the objective at every
/// iterate, and the final per-view mean squared errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconReport {
    pub grid: VoxelGrid,
    pub loss_curve: Vec<(usize, f64)>,
    pub per_view_residuals: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

fn target_values(target: &ReconTarget) -> &[f64] {
    match &target.data {
        Rendering::Image(img) => img.values(),
        Rendering::Semantic(img) => img.values(),
    }
}

/// Occupancy at which the logit field starts, chosen per operator so the
/// first iterations see usable gradients. Silhouette rays saturate once
/// occupancy sums grow (a half-occupied 32-grid starts at sums near 16,
/// scaling gradients by exp(-16)), so those problems start nearly empty.
/// Depth is the mirror image: its pixel saturates when rays stay
/// accessible for long, so only a dense start keeps the accessibility sum
/// small enough to respond.
fn init_occupancy(kind: ProjectionKind) -> f64 {
    match kind {
        ProjectionKind::Depth => 0.5,
        ProjectionKind::Silhouette | ProjectionKind::Semantic => 0.05,
    }
}

/// Minimizes the mean squared pixel error over all targets by plain
/// gradient descent on the logit field (descent direction taken at the
/// sum-of-squares scale, which only re-parameterizes the step size). The
/// occupancy starts at [`init_occupancy`] plus seeded noise of amplitude
/// 0.01 in logit space; whenever a step would increase the loss the step
/// size is halved, at most 10 times over the whole run, so the recorded
/// loss curve never increases.
pub fn reconstruct(
    problem: &ReconProblem,
    iters: usize,
    step: f64,
    seed: u64,
) -> Result<ReconReport> {
    if !(step > 0.0) {
        return Err(Error::Invalid {
            what: "reconstruct",
            why: "step must be positive",
        });
    }
    let n = problem.n;
    let n3 = n * n * n;
    let channels = match problem.kind {
        ProjectionKind::Semantic => problem.channels,
        _ => 1,
    };
    let total_pixels: usize = problem.targets.iter().map(|t| target_values(t).len()).sum();

    let init = init_occupancy(problem.kind);
    let init_logit = libm::log(init / (1.0 - init));
    let mut rng = SplitMix64::stream(seed, "recon-init");
    let mut logits: Vec<f64> = (0..channels * n3)
        .map(|_| init_logit + rng.next_range(-0.01, 0.01))
        .collect();

    let occupancy =
        |w: &[f64]| -> Vec<f64> { w.iter().map(|x| sigmoid(*x)).collect() };

    // Mean squared pixel error over every (view, channel, pixel).
    let loss_of = |values: &[f64]| -> f64 {
        let mut sq_sum = 0.0;
        for target in &problem.targets {
            let out = forward_engine(
                problem.kind,
                values,
                n,
                channels,
                target.view,
                &problem.cfg,
            );
            for (o, t) in out.iter().zip(target_values(target)) {
                let d = o - t;
                sq_sum += d * d;
            }
        }
        sq_sum / total_pixels as f64
    };

    // Sum-of-squares gradient; the mean normalization is folded into the
    // caller-visible step-size convention instead.
    let gradient = |values: &[f64]| -> Vec<f64> {
        let mut grad = vec![0.0; channels * n3];
        for target in &problem.targets {
            let out = forward_engine(
                problem.kind,
                values,
                n,
                channels,
                target.view,
                &problem.cfg,
            );
            let upstream: Vec<f64> = out
                .iter()
                .zip(target_values(target))
                .map(|(o, t)| 2.0 * (o - t))
                .collect();
            let g = vjp_engine(
                problem.kind,
                values,
                n,
                channels,
                target.view,
                &problem.cfg,
                &upstream,
            );
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += gi;
            }
        }
        grad
    };

    let mut values = occupancy(&logits);
    let mut loss = loss_of(&values);
    let mut curve = Vec::with_capacity(iters + 1);
    curve.push((0, loss));

    let mut step = step;
    let mut halvings = 0usize;
    for it in 1..=iters {
        let grad_v = gradient(&values);
        // Chain through the sigmoid: dv/dw = v * (1 - v).
        let grad_w: Vec<f64> = grad_v
            .iter()
            .zip(&values)
            .map(|(g, v)| g * v * (1.0 - v))
            .collect();
        loop {
            let cand_logits: Vec<f64> = logits
                .iter()
                .zip(&grad_w)
                .map(|(w, g)| w - step * g)
                .collect();
            let cand_values = occupancy(&cand_logits);
            let cand_loss = loss_of(&cand_values);
            if cand_loss <= loss {
                logits = cand_logits;
                values = cand_values;
                loss = cand_loss;
                break;
            }
            if halvings >= 10 {
                break; // plateau: keep the current iterate
            }
            halvings += 1;
            step /= 2.0;
        }
        curve.push((it, loss));
    }

    let per_view_residuals = problem
        .targets
        .iter()
        .map(|target| {
            let out = forward_engine(
                problem.kind,
                &values,
                n,
                channels,
                target.view,
                &problem.cfg,
            );
            let sq: f64 = out
                .iter()
                .zip(target_values(target))
                .map(|(o, t)| (o - t) * (o - t))
                .sum();
            sq / out.len() as f64
        })
        .collect();

    let grid = VoxelGrid::from_values(n, channels, values)
        .expect("sigmoid outputs stay inside (0, 1)");
    Ok(ReconReport {
        grid,
        loss_curve: curve,
        per_view_residuals,
    })
}

/// Space carving dual to the nearest-gather renderer.
///
/// For each view, every destination cell samples one source voxel; a voxel
/// is carved when any pixel that actually reads it is off, which makes the
/// hull a strict outer bound for shapes rendered by the same resampling.
/// Voxels no destination cell reads fall back to their forward-projected
/// pixel, so an all-off silhouette still empties the grid. The result is
/// the maximal shape consistent with the views.
pub fn visual_hull(silhouettes: &[Image], views: &[Viewpoint], n: usize) -> Result<VoxelGrid> {
    if silhouettes.len() != views.len() {
        return Err(Error::ShapeMismatch {
            context: "silhouette/view counts",
        });
    }
    if silhouettes.is_empty() {
        return Err(Error::Empty { what: "silhouettes" });
    }
    for s in silhouettes {
        if s.h() != n || s.w() != n {
            return Err(Error::ShapeMismatch {
                context: "silhouette size",
            });
        }
        if s.values().iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::Invalid {
                what: "silhouette",
                why: "values must be binary",
            });
        }
    }
    let n3 = n * n * n;
    let mut keep = vec![true; n3];
    let mut read = vec![false; n3];
    for (silhouette, view) in silhouettes.iter().zip(views) {
        for r in read.iter_mut() {
            *r = false;
        }
        // Carve every source voxel read by an off pixel.
        let inv = rotation_inverse(*view);
        let c0 = (n as f64 - 1.0) / 2.0;
        for x in 0..n {
            for y in 0..n {
                let on = silhouette.get(n - 1 - y, x) >= 0.5;
                for z in 0..n {
                    let d = [x as f64 - c0, y as f64 - c0, z as f64 - c0];
                    let sx = libm::round(inv[0][0] * d[0] + inv[0][1] * d[1] + inv[0][2] * d[2] + c0);
                    let sy = libm::round(inv[1][0] * d[0] + inv[1][1] * d[1] + inv[1][2] * d[2] + c0);
                    let sz = libm::round(inv[2][0] * d[0] + inv[2][1] * d[1] + inv[2][2] * d[2] + c0);
                    let inside = sx >= 0.0
                        && sx < n as f64
                        && sy >= 0.0
                        && sy < n as f64
                        && sz >= 0.0
                        && sz < n as f64;
                    if inside {
                        let src = ((sx as usize) * n + sy as usize) * n + sz as usize;
                        read[src] = true;
                        if !on {
                            keep[src] = false;
                        }
                    }
                }
            }
        }
        // Unread voxels: carve when every pixel overlapping the forward
        // projection is off (or out of the image).
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let src = (x * n + y) * n + z;
                    if read[src] || !keep[src] {
                        continue;
                    }
                    let p = rotate_cell_forward(*view, n, [x, y, z]);
                    let mut any_on = false;
                    for px in [libm::floor(p[0]), libm::ceil(p[0])] {
                        for py in [libm::floor(p[1]), libm::ceil(p[1])] {
                            let inside =
                                px >= 0.0 && px < n as f64 && py >= 0.0 && py < n as f64;
                            if inside && silhouette.get(n - 1 - py as usize, px as usize) >= 0.5
                            {
                                any_on = true;
                            }
                        }
                    }
                    if !any_on {
                        keep[src] = false;
                    }
                }
            }
        }
    }
    let values = keep.iter().map(|k| f64::from(u8::from(*k))).collect();
    VoxelGrid::from_values(n, 1, values)
}

/// IoU of the two grids after binarizing both at `threshold`.
pub fn evaluate_recon(result: &VoxelGrid, ground_truth: &VoxelGrid, threshold: f64) -> Result<f64> {
    if result.n() != ground_truth.n() || result.channels() != ground_truth.channels() {
        return Err(Error::ShapeMismatch {
            context: "evaluate_recon grids",
        });
    }
    iou(
        &binarize(result.values(), threshold),
        &binarize(ground_truth.values(), threshold),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::project_silhouette;
    use crate::view::{Resampling, ViewpointSet};

    /// Solid ball: occupancy 1 wherever the voxel centre is within
    /// `radius` of the grid centre.
    fn solid_ball(n: usize, radius: f64) -> VoxelGrid {
        let c0 = (n as f64 - 1.0) / 2.0;
        let mut grid = VoxelGrid::new(n, 1).unwrap();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let d2 = (x as f64 - c0) * (x as f64 - c0)
                        + (y as f64 - c0) * (y as f64 - c0)
                        + (z as f64 - c0) * (z as f64 - c0);
                    if d2 <= radius * radius {
                        grid.set(0, x, y, z, 1.0).unwrap();
                    }
                }
            }
        }
        grid
    }

    fn binary_silhouettes(
        grid: &VoxelGrid,
        views: &ViewpointSet,
        cfg: &ProjectionConfig,
    ) -> Vec<Image> {
        views
            .iter()
            .map(|view| {
                let img = project_silhouette(grid, view, cfg).unwrap();
                let vals = img.values().iter().map(|v| f64::from(*v > 0.5)).collect();
                Image::from_values(img.h(), img.w(), vals).unwrap()
            })
            .collect()
    }

    #[test]
    fn hull_of_all_ones_is_the_full_grid() {
        let n = 6;
        let ones = Image::from_values(n, n, vec![1.0; n * n]).unwrap();
        let hull = visual_hull(&[ones], &[Viewpoint::front()], n).unwrap();
        assert_eq!(hull.occupied(), n * n * n);
    }

    #[test]
    fn hull_with_an_empty_view_is_empty() {
        let n = 6;
        let ones = Image::from_values(n, n, vec![1.0; n * n]).unwrap();
        let zeros = Image::new(n, n).unwrap();
        let views = [
            Viewpoint::front(),
            Viewpoint::new(0.0, 90f64.to_radians()).unwrap(),
        ];
        let hull = visual_hull(&[ones, zeros], &views, n).unwrap();
        assert_eq!(hull.occupied(), 0);
    }

    #[test]
    fn hull_rejects_non_binary_input() {
        let img = Image::from_values(2, 2, vec![0.5; 4]).unwrap();
        assert!(visual_hull(&[img], &[Viewpoint::front()], 2).is_err());
    }

    #[test]
    fn hull_is_an_outer_bound_on_the_ball() {
        let n = 32;
        let ball = solid_ball(n, 10.0);
        let views = ViewpointSet::default();
        let cfg = ProjectionConfig::flat(Resampling::Nearest);
        let silhouettes = binary_silhouettes(&ball, &views, &cfg);
        let view_list: Vec<Viewpoint> = views.iter().collect();
        let hull = visual_hull(&silhouettes, &view_list, n).unwrap();
        for (truth, hull_v) in ball.values().iter().zip(hull.values()) {
            assert!(hull_v >= truth, "hull carved a true voxel");
        }
        let score = evaluate_recon(&hull, &ball, 0.5).unwrap();
        assert!(score >= 0.9, "hull IoU {score}");
    }

    #[test]
    fn zero_iterations_returns_the_initial_state() {
        let n = 8;
        let ball = solid_ball(n, 3.0);
        let cfg = ProjectionConfig::flat(Resampling::Nearest);
        let views = ViewpointSet::default();
        let targets: Vec<ReconTarget> = views
            .iter()
            .map(|view| ReconTarget {
                view,
                data: Rendering::Image(project_silhouette(&ball, view, &cfg).unwrap()),
            })
            .collect();
        let problem = ReconProblem::new(ProjectionKind::Silhouette, targets, n, cfg).unwrap();
        let report = reconstruct(&problem, 0, 50.0, 1).unwrap();
        assert_eq!(report.loss_curve.len(), 1);
        assert_eq!(report.loss_curve[0].0, 0);
        for v in report.grid.values() {
            assert!((v - 0.05).abs() < 0.002, "initial occupancy {v}");
        }
    }

    #[test]
    fn reconstruction_is_deterministic() {
        let n = 8;
        let ball = solid_ball(n, 3.0);
        let cfg = ProjectionConfig::flat(Resampling::Nearest);
        let views = ViewpointSet::default();
        let targets: Vec<ReconTarget> = views
            .iter()
            .map(|view| ReconTarget {
                view,
                data: Rendering::Image(project_silhouette(&ball, view, &cfg).unwrap()),
            })
            .collect();
        let problem = ReconProblem::new(ProjectionKind::Silhouette, targets, n, cfg).unwrap();
        let a = reconstruct(&problem, 25, 50.0, 9).unwrap();
        let b = reconstruct(&problem, 25, 50.0, 9).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.grid.values(), b.grid.values());
    }

    #[test]
    fn loss_curve_never_increases() {
        let n = 8;
        let ball = solid_ball(n, 3.0);
        let cfg = ProjectionConfig::flat(Resampling::Trilinear);
        let views = ViewpointSet::default();
        let targets: Vec<ReconTarget> = views
            .iter()
            .map(|view| ReconTarget {
                view,
                data: Rendering::Image(project_silhouette(&ball, view, &cfg).unwrap()),
            })
            .collect();
        let problem = ReconProblem::new(ProjectionKind::Silhouette, targets, n, cfg).unwrap();
        let report = reconstruct(&problem, 40, 80.0, 2).unwrap();
        for pair in report.loss_curve.windows(2) {
            assert!(pair[1].1 <= pair[0].1, "loss increased: {pair:?}");
        }
        assert!(report.loss_curve.last().unwrap().1 <= report.loss_curve[0].1);
        assert_eq!(report.per_view_residuals.len(), 8);
    }

    #[test]
    fn carving_the_reconstruction_barely_changes_it() {
        let n = 16;
        let ball = solid_ball(n, 5.0);
        let cfg = ProjectionConfig::flat(Resampling::Nearest);
        let views = ViewpointSet::default();
        let silhouettes = binary_silhouettes(&ball, &views, &cfg);
        let targets: Vec<ReconTarget> = views
            .iter()
            .zip(&silhouettes)
            .map(|(view, img)| ReconTarget {
                view,
                data: Rendering::Image(img.clone()),
            })
            .collect();
        let problem = ReconProblem::new(ProjectionKind::Silhouette, targets, n, cfg).unwrap();
        let report = reconstruct(&problem, 150, 50.0, 3).unwrap();
        let view_list: Vec<Viewpoint> = views.iter().collect();
        let hull = visual_hull(&silhouettes, &view_list, n).unwrap();
        let recon_bin = binarize(report.grid.values(), 0.5);
        let occupied = recon_bin.iter().filter(|b| **b).count();
        let carved = recon_bin
            .iter()
            .zip(hull.values())
            .filter(|(r, h)| **r && **h == 0.0)
            .count();
        assert!(
            (carved as f64) < 0.05 * occupied as f64,
            "carving removed {carved} of {occupied}"
        );
    }

    #[test]
    fn evaluate_recon_basics() {
        let a = solid_ball(8, 3.0);
        assert_eq!(evaluate_recon(&a, &a, 0.5).unwrap(), 1.0);
        let empty = VoxelGrid::new(8, 1).unwrap();
        assert_eq!(evaluate_recon(&empty, &a, 0.5).unwrap(), 0.0);
        let other = VoxelGrid::new(9, 1).unwrap();
        assert!(evaluate_recon(&other, &a, 0.5).is_err());
    }
}
