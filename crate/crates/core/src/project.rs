//! The differentiable renderers.
//!
//! All three operators rotate the grid to the view, then accumulate
//! occupancy along orthographic +z rays:
//!
//! * silhouette: `pixel = 1 - exp(-sum_k v_k)`
//! * depth: `pixel = 1 - exp(-sum_k A_k)` where the accessibility
//!   `A_k = exp(-tau * sum_{l<k} v_l)` counts how far a ray penetrates
//!   before hitting occupancy (larger pixel value = deeper first surface),
//! * semantic: per part channel `pixel_c = 1 - exp(-sum_k v_{c,k} * A_k)`
//!   with `A` computed on the channel-summed grid clamped to `[0,1]`.
//!
//! With `supersample = s`, rays are cast on an `(s*n)^2` grid, sampled
//! trilinearly from the rotated volume, and box-averaged down to `n^2`.
//!
//! Every operator has an exact vector-Jacobian product assembled from the
//! per-ray derivative and the rotation adjoint; [`grad_check`] verifies it
//! against central finite differences in full f64.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{GridGradient, Image, ImageGradient, SemanticImage, VoxelGrid};
use crate::rng::SplitMix64;
use crate::rotate::{rotate_values, rotate_values_adjoint};
use crate::view::{ProjectionConfig, Resampling, Viewpoint, ViewpointSet};

/// Which renderer to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    Silhouette,
    Depth,
    Semantic,
}

impl ProjectionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProjectionKind::Silhouette => "silhouette",
            ProjectionKind::Depth => "depth",
            ProjectionKind::Semantic => "semantic",
        }
    }
}

/// Per-voxel transmittance of a rotated single-channel grid.
///
/// `get(x, y, 0) == 1` always (empty prefix) and values never increase
/// along a ray.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessibilityField {
    n: usize,
    values: Vec<f64>,
}

impl AccessibilityField {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.values[(x * self.n + y) * self.n + k]
    }
}

/// `A(x, y, k) = exp(-tau * sum_{l<k} v(x, y, l))` on an already rotated
/// grid, accumulating the prefix in f64.
pub fn accessibility(rotated: &VoxelGrid, tau: f64) -> Result<AccessibilityField> {
    let vals = rotated.single_channel()?;
    let n = rotated.n();
    let mut values = vec![0.0; n * n * n];
    for x in 0..n {
        for y in 0..n {
            let base = (x * n + y) * n;
            let mut prefix = 0.0;
            for k in 0..n {
                values[base + k] = libm::exp(-tau * prefix);
                prefix += vals[base + k];
            }
        }
    }
    Ok(AccessibilityField { n, values })
}

// --- ray sampling -----------------------------------------------------

/// Bilinear (or nearest) taps of a subray's (x, y) column; the taps are
/// shared by every k along the ray. `base` is `(x*n + y)*n`.
struct ColTaps {
    len: usize,
    base: [usize; 4],
    w: [f64; 4],
}

fn col_taps(n: usize, x: f64, y: f64, mode: Resampling) -> ColTaps {
    let mut taps = ColTaps {
        len: 0,
        base: [0; 4],
        w: [0.0; 4],
    };
    let ni = n as isize;
    let mut push = |xi: isize, yi: isize, w: f64| {
        if xi >= 0 && xi < ni && yi >= 0 && yi < ni && w != 0.0 {
            taps.base[taps.len] = (xi as usize * n + yi as usize) * n;
            taps.w[taps.len] = w;
            taps.len += 1;
        }
    };
    match mode {
        Resampling::Nearest => {
            push(libm::round(x) as isize, libm::round(y) as isize, 1.0);
        }
        Resampling::Trilinear => {
            let x0 = libm::floor(x);
            let y0 = libm::floor(y);
            let (fx, fy) = (x - x0, y - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            push(x0, y0, (1.0 - fx) * (1.0 - fy));
            push(x0 + 1, y0, fx * (1.0 - fy));
            push(x0, y0 + 1, (1.0 - fx) * fy);
            push(x0 + 1, y0 + 1, fx * fy);
        }
    }
    taps
}

#[inline]
fn sample_k(vals: &[f64], chan_base: usize, taps: &ColTaps, k: usize) -> f64 {
    let mut acc = 0.0;
    for t in 0..taps.len {
        acc += taps.w[t] * vals[chan_base + taps.base[t] + k];
    }
    acc
}

#[inline]
fn scatter_k(grad: &mut [f64], chan_base: usize, taps: &ColTaps, k: usize, g: f64) {
    for t in 0..taps.len {
        grad[chan_base + taps.base[t] + k] += taps.w[t] * g;
    }
}

/// Iterates subray columns of one output pixel.
fn for_each_subray(
    n: usize,
    s: usize,
    py: usize,
    px: usize,
    mode: Resampling,
    mut f: impl FnMut(&ColTaps),
) {
    let sf = s as f64;
    for si in 0..s {
        for sj in 0..s {
            let col = px as f64 + (sj as f64 + 0.5) / sf - 0.5;
            let row = py as f64 + (si as f64 + 0.5) / sf - 0.5;
            let y = (n as f64 - 1.0) - row;
            let taps = col_taps(n, col, y, mode);
            f(&taps);
        }
    }
}

/// Clamped channel sum, the aggregated grid driving semantic visibility.
fn aggregate_channels(values: &[f64], n3: usize, channels: usize) -> Vec<f64> {
    let mut agg = vec![0.0; n3];
    for c in 0..channels {
        let base = c * n3;
        for (a, v) in agg.iter_mut().zip(&values[base..base + n3]) {
            *a += v;
        }
    }
    for a in agg.iter_mut() {
        if *a > 1.0 {
            *a = 1.0;
        }
    }
    agg
}

// --- forward engine ----------------------------------------------------

/// Renders raw grid values. Returns `out_channels * n * n` pixel values
/// (`out_channels` is 1 for silhouette/depth, `channels` for semantic).
pub(crate) fn forward_engine(
    kind: ProjectionKind,
    values: &[f64],
    n: usize,
    channels: usize,
    view: Viewpoint,
    cfg: &ProjectionConfig,
) -> Vec<f64> {
    let n3 = n * n * n;
    let s = cfg.supersample;
    let inv_s2 = 1.0 / (s * s) as f64;
    match kind {
        ProjectionKind::Silhouette => {
            let rot = rotate_values(values, n, 1, view, cfg.resampling);
            let mut out = vec![0.0; n * n];
            for py in 0..n {
                for px in 0..n {
                    let mut acc = 0.0;
                    for_each_subray(n, s, py, px, cfg.resampling, |taps| {
                        let mut sum = 0.0;
                        for k in 0..n {
                            sum += sample_k(&rot, 0, taps, k);
                        }
                        acc += 1.0 - libm::exp(-sum);
                    });
                    out[py * n + px] = acc * inv_s2;
                }
            }
            out
        }
        ProjectionKind::Depth => {
            let rot = rotate_values(values, n, 1, view, cfg.resampling);
            let mut out = vec![0.0; n * n];
            for py in 0..n {
                for px in 0..n {
                    let mut acc = 0.0;
                    for_each_subray(n, s, py, px, cfg.resampling, |taps| {
                        let mut prefix = 0.0;
                        let mut depth = 0.0;
                        for k in 0..n {
                            depth += libm::exp(-cfg.tau * prefix);
                            prefix += sample_k(&rot, 0, taps, k);
                        }
                        acc += 1.0 - libm::exp(-depth);
                    });
                    out[py * n + px] = acc * inv_s2;
                }
            }
            out
        }
        ProjectionKind::Semantic => {
            // Rotate the part channels and the aggregated grid together.
            let mut ext = Vec::with_capacity((channels + 1) * n3);
            ext.extend_from_slice(values);
            ext.extend_from_slice(&aggregate_channels(values, n3, channels));
            let rot = rotate_values(&ext, n, channels + 1, view, cfg.resampling);
            let agg_base = channels * n3;
            let mut out = vec![0.0; channels * n * n];
            let mut access = vec![0.0; n];
            for py in 0..n {
                for px in 0..n {
                    for_each_subray(n, s, py, px, cfg.resampling, |taps| {
                        let mut prefix = 0.0;
                        for (k, a) in access.iter_mut().enumerate() {
                            *a = libm::exp(-cfg.tau * prefix);
                            prefix += sample_k(&rot, agg_base, taps, k);
                        }
                        for c in 0..channels {
                            let mut weighted = 0.0;
                            for (k, a) in access.iter().enumerate() {
                                weighted += sample_k(&rot, c * n3, taps, k) * a;
                            }
                            out[(c * n + py) * n + px] +=
                                (1.0 - libm::exp(-weighted)) * inv_s2;
                        }
                    });
                }
            }
            out
        }
    }
}

// --- backward engine ---------------------------------------------------

/// Exact gradient of `<forward(values), upstream>` with respect to the raw
/// grid values.
pub(crate) fn vjp_engine(
    kind: ProjectionKind,
    values: &[f64],
    n: usize,
    channels: usize,
    view: Viewpoint,
    cfg: &ProjectionConfig,
    upstream: &[f64],
) -> Vec<f64> {
    let n3 = n * n * n;
    let s = cfg.supersample;
    let inv_s2 = 1.0 / (s * s) as f64;
    match kind {
        ProjectionKind::Silhouette => {
            let rot = rotate_values(values, n, 1, view, cfg.resampling);
            let mut grad_rot = vec![0.0; n3];
            for py in 0..n {
                for px in 0..n {
                    let u = upstream[py * n + px] * inv_s2;
                    if u == 0.0 {
                        continue;
                    }
                    for_each_subray(n, s, py, px, cfg.resampling, |taps| {
                        let mut sum = 0.0;
                        for k in 0..n {
                            sum += sample_k(&rot, 0, taps, k);
                        }
                        let coef = u * libm::exp(-sum);
                        for k in 0..n {
                            scatter_k(&mut grad_rot, 0, taps, k, coef);
                        }
                    });
                }
            }
            rotate_values_adjoint(&grad_rot, n, 1, view, cfg.resampling)
        }
        ProjectionKind::Depth => {
            let rot = rotate_values(values, n, 1, view, cfg.resampling);
            let mut grad_rot = vec![0.0; n3];
            let mut access = vec![0.0; n];
            for py in 0..n {
                for px in 0..n {
                    let u = upstream[py * n + px] * inv_s2;
                    if u == 0.0 {
                        continue;
                    }
                    for_each_subray(n, s, py, px, cfg.resampling, |taps| {
                        let mut prefix = 0.0;
                        let mut depth = 0.0;
                        for (k, a) in access.iter_mut().enumerate() {
                            *a = libm::exp(-cfg.tau * prefix);
                            depth += *a;
                            prefix += sample_k(&rot, 0, taps, k);
                        }
                        // d pixel / d v_m = -tau * exp(-D) * sum_{k>m} A_k
                        let coef = u * libm::exp(-depth) * -cfg.tau;
                        let mut suffix = 0.0;
                        for m in (0..n).rev() {
                            scatter_k(&mut grad_rot, 0, taps, m, coef * suffix);
                            suffix += access[m];
                        }
                    });
                }
            }
            rotate_values_adjoint(&grad_rot, n, 1, view, cfg.resampling)
        }
        ProjectionKind::Semantic => {
            let mut ext = Vec::with_capacity((channels + 1) * n3);
            ext.extend_from_slice(values);
            ext.extend_from_slice(&aggregate_channels(values, n3, channels));
            let rot = rotate_values(&ext, n, channels + 1, view, cfg.resampling);
            let agg_base = channels * n3;
            let mut grad_rot = vec![0.0; (channels + 1) * n3];
            let mut access = vec![0.0; n];
            let mut exps = vec![0.0; channels];
            for py in 0..n {
                for px in 0..n {
                    for_each_subray(n, s, py, px, cfg.resampling, |taps| {
                        let mut prefix = 0.0;
                        for (k, a) in access.iter_mut().enumerate() {
                            *a = libm::exp(-cfg.tau * prefix);
                            prefix += sample_k(&rot, agg_base, taps, k);
                        }
                        for (c, e) in exps.iter_mut().enumerate() {
                            let mut weighted = 0.0;
                            for (k, a) in access.iter().enumerate() {
                                weighted += sample_k(&rot, c * n3, taps, k) * a;
                            }
                            *e = libm::exp(-weighted) * upstream[(c * n + py) * n + px] * inv_s2;
                        }
                        // Direct path: d pixel_c / d v_{c,m} = A_m exp(-S_c).
                        // Aggregate path via A: d A_k / d g_m = -tau A_k (m<k).
                        let mut suffix = 0.0;
                        for m in (0..n).rev() {
                            let mut agg_weight = 0.0;
                            for (c, e) in exps.iter().enumerate() {
                                if *e != 0.0 {
                                    scatter_k(&mut grad_rot, c * n3, taps, m, e * access[m]);
                                }
                                agg_weight += e * sample_k(&rot, c * n3, taps, m);
                            }
                            scatter_k(&mut grad_rot, agg_base, taps, m, -cfg.tau * suffix);
                            suffix += access[m] * agg_weight;
                        }
                    });
                }
            }
            let back = rotate_values_adjoint(&grad_rot, n, channels + 1, view, cfg.resampling);
            // Split the channel and aggregate paths; the clamp on the
            // aggregated grid kills the latter wherever the channel sum
            // already exceeds 1.
            let mut grad = vec![0.0; channels * n3];
            for i in 0..n3 {
                let mut sum = 0.0;
                for c in 0..channels {
                    sum += values[c * n3 + i];
                }
                let unclamped = sum < 1.0;
                for c in 0..channels {
                    let mut g = back[c * n3 + i];
                    if unclamped {
                        g += back[agg_base + i];
                    }
                    grad[c * n3 + i] = g;
                }
            }
            grad
        }
    }
}

// --- public operators --------------------------------------------------

fn check_single(grid: &VoxelGrid) -> Result<()> {
    if grid.channels() != 1 {
        return Err(Error::MultiChannel {
            channels: grid.channels(),
        });
    }
    Ok(())
}

/// Smooth silhouette: `pixel = 1 - exp(-sum of occupancy along the ray)`.
pub fn project_silhouette(
    grid: &VoxelGrid,
    view: Viewpoint,
    cfg: &ProjectionConfig,
) -> Result<Image> {
    cfg.validate()?;
    check_single(grid)?;
    let out = forward_engine(
        ProjectionKind::Silhouette,
        grid.values(),
        grid.n(),
        1,
        view,
        cfg,
    );
    Image::from_values(grid.n(), grid.n(), out)
}

/// Smooth depth: `pixel = 1 - exp(-sum of accessibility along the ray)`.
/// Larger values mean the ray travels further before hitting occupancy;
/// empty rays saturate near 1.
pub fn project_depth(grid: &VoxelGrid, view: Viewpoint, cfg: &ProjectionConfig) -> Result<Image> {
    cfg.validate()?;
    check_single(grid)?;
    let out = forward_engine(ProjectionKind::Depth, grid.values(), grid.n(), 1, view, cfg);
    Image::from_values(grid.n(), grid.n(), out)
}

/// Per-part projection weighted by the visibility of the aggregated grid.
pub fn project_semantic(
    grid: &VoxelGrid,
    view: Viewpoint,
    cfg: &ProjectionConfig,
) -> Result<SemanticImage> {
    cfg.validate()?;
    let out = forward_engine(
        ProjectionKind::Semantic,
        grid.values(),
        grid.n(),
        grid.channels(),
        view,
        cfg,
    );
    SemanticImage::from_values(grid.n(), grid.n(), grid.channels(), out)
}

/// Gradient of `<forward(grid), upstream>` with respect to every voxel.
pub fn project_vjp(
    kind: ProjectionKind,
    grid: &VoxelGrid,
    view: Viewpoint,
    cfg: &ProjectionConfig,
    upstream: &ImageGradient,
) -> Result<GridGradient> {
    cfg.validate()?;
    let n = grid.n();
    let out_channels = match kind {
        ProjectionKind::Silhouette | ProjectionKind::Depth => {
            check_single(grid)?;
            1
        }
        ProjectionKind::Semantic => grid.channels(),
    };
    if upstream.h != n || upstream.w != n || upstream.channels != out_channels {
        return Err(Error::ShapeMismatch {
            context: "project_vjp upstream",
        });
    }
    let values = vjp_engine(
        kind,
        grid.values(),
        n,
        grid.channels(),
        view,
        cfg,
        &upstream.values,
    );
    Ok(GridGradient {
        n,
        channels: grid.channels(),
        values,
    })
}

/// Central-difference check of [`project_vjp`].
///
/// Perturbs every voxel by `+-eps` in f64, compares the difference quotient
/// of the scalar loss `<forward(grid), upstream>` (with a fixed seeded
/// random upstream) against the analytic gradient, and returns the worst
/// relative error, `|fd - analytic| / max(|fd|, |analytic|, 1e-12)`.
pub fn grad_check(
    kind: ProjectionKind,
    grid: &VoxelGrid,
    view: Viewpoint,
    cfg: &ProjectionConfig,
    eps: f64,
) -> Result<f64> {
    cfg.validate()?;
    if !(eps > 0.0) {
        return Err(Error::Invalid {
            what: "grad_check",
            why: "eps must be positive",
        });
    }
    let n = grid.n();
    let channels = grid.channels();
    let out_channels = match kind {
        ProjectionKind::Silhouette | ProjectionKind::Depth => {
            check_single(grid)?;
            1
        }
        ProjectionKind::Semantic => channels,
    };
    let mut rng = SplitMix64::stream(0x9d5c_f0a3_17b2_44e1, "grad-check-upstream");
    let upstream: Vec<f64> = (0..out_channels * n * n)
        .map(|_| rng.next_range(-1.0, 1.0))
        .collect();

    let analytic = vjp_engine(kind, grid.values(), n, channels, view, cfg, &upstream);

    let loss = |vals: &[f64]| -> f64 {
        forward_engine(kind, vals, n, channels, view, cfg)
            .iter()
            .zip(&upstream)
            .map(|(o, u)| o * u)
            .sum()
    };

    let mut vals = grid.values().to_vec();
    let mut worst = 0.0f64;
    for i in 0..vals.len() {
        let saved = vals[i];
        vals[i] = saved + eps;
        let plus = loss(&vals);
        vals[i] = saved - eps;
        let minus = loss(&vals);
        vals[i] = saved;
        let fd = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let rel = (fd - a).abs() / fd.abs().max(a.abs()).max(1e-12);
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}

/// One rendered view: a plain image or a per-part stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Rendering {
    Image(Image),
    Semantic(SemanticImage),
}

impl Rendering {
    pub fn h(&self) -> usize {
        match self {
            Rendering::Image(img) => img.h(),
            Rendering::Semantic(img) => img.h(),
        }
    }

    pub fn w(&self) -> usize {
        match self {
            Rendering::Image(img) => img.w(),
            Rendering::Semantic(img) => img.w(),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            Rendering::Image(_) => 1,
            Rendering::Semantic(img) => img.channels(),
        }
    }
}

/// Renders one image per viewpoint, in view order.
pub fn render_views(
    grid: &VoxelGrid,
    views: &ViewpointSet,
    kind: ProjectionKind,
    cfg: &ProjectionConfig,
) -> Result<Vec<Rendering>> {
    let mut out = Vec::with_capacity(views.len());
    for view in views.iter() {
        let rendering = match kind {
            ProjectionKind::Silhouette => Rendering::Image(project_silhouette(grid, view, cfg)?),
            ProjectionKind::Depth => Rendering::Image(project_depth(grid, view, cfg)?),
            ProjectionKind::Semantic => Rendering::Semantic(project_semantic(grid, view, cfg)?),
        };
        out.push(rendering);
    }
    Ok(out)
}
