//! Grid rotation and its adjoint.
//!
//! Rotation is gather-style: every destination cell samples the source at
//! the inversely rotated position, which leaves no holes. The rotation is
//! elevation about x followed by azimuth about y, centred on the continuous
//! grid centre `(n-1)/2` so that 90-degree azimuths permute the lattice
//! exactly. Samples outside the grid read as zero.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{GridGradient, VoxelGrid};
use crate::view::{ProjectionConfig, Resampling, Viewpoint};

type Mat3 = [[f64; 3]; 3];

fn rot_x(theta: f64) -> Mat3 {
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn rot_y(phi: f64) -> Mat3 {
    let (s, c) = (libm::sin(phi), libm::cos(phi));
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn apply(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Forward rotation matrix: elevation then azimuth.
pub(crate) fn rotation_forward(view: Viewpoint) -> Mat3 {
    mat_mul(&rot_y(view.phi()), &rot_x(view.theta()))
}

/// Inverse rotation matrix, used for gather-style resampling.
pub(crate) fn rotation_inverse(view: Viewpoint) -> Mat3 {
    mat_mul(&rot_x(-view.theta()), &rot_y(-view.phi()))
}

/// Forward-rotates an integer cell, returning its continuous destination.
pub(crate) fn rotate_cell_forward(view: Viewpoint, n: usize, cell: [usize; 3]) -> [f64; 3] {
    let c0 = (n as f64 - 1.0) / 2.0;
    let m = rotation_forward(view);
    let p = apply(
        &m,
        [
            cell[0] as f64 - c0,
            cell[1] as f64 - c0,
            cell[2] as f64 - c0,
        ],
    );
    [p[0] + c0, p[1] + c0, p[2] + c0]
}

/// Up to 8 (source index, weight) taps for one sampled point.
pub(crate) struct Taps {
    pub len: usize,
    pub idx: [usize; 8],
    pub w: [f64; 8],
}

impl Taps {
    fn empty() -> Self {
        Self {
            len: 0,
            idx: [0; 8],
            w: [0.0; 8],
        }
    }

    fn push(&mut self, idx: usize, w: f64) {
        self.idx[self.len] = idx;
        self.w[self.len] = w;
        self.len += 1;
    }
}

/// Resampling taps for a continuous 3D source position.
/// `stride` maps (x, y, z) to `(x*n + y)*n + z` within one channel.
pub(crate) fn taps_3d(n: usize, p: [f64; 3], mode: Resampling) -> Taps {
    let mut taps = Taps::empty();
    let nf = n as isize;
    match mode {
        Resampling::Nearest => {
            let x = libm::round(p[0]) as isize;
            let y = libm::round(p[1]) as isize;
            let z = libm::round(p[2]) as isize;
            if x >= 0 && x < nf && y >= 0 && y < nf && z >= 0 && z < nf {
                taps.push(((x as usize * n) + y as usize) * n + z as usize, 1.0);
            }
        }
        Resampling::Trilinear => {
            let x0 = libm::floor(p[0]);
            let y0 = libm::floor(p[1]);
            let z0 = libm::floor(p[2]);
            let (fx, fy, fz) = (p[0] - x0, p[1] - y0, p[2] - z0);
            let (x0, y0, z0) = (x0 as isize, y0 as isize, z0 as isize);
            for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                let x = x0 + dx;
                if x < 0 || x >= nf || wx == 0.0 {
                    continue;
                }
                for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
                    let y = y0 + dy;
                    if y < 0 || y >= nf || wy == 0.0 {
                        continue;
                    }
                    for (dz, wz) in [(0, 1.0 - fz), (1, fz)] {
                        let z = z0 + dz;
                        if z < 0 || z >= nf || wz == 0.0 {
                            continue;
                        }
                        taps.push(
                            ((x as usize * n) + y as usize) * n + z as usize,
                            wx * wy * wz,
                        );
                    }
                }
            }
        }
    }
    taps
}

/// Rotates `channels` dense channels of side `n`, gather-style.
pub(crate) fn rotate_values(
    values: &[f64],
    n: usize,
    channels: usize,
    view: Viewpoint,
    mode: Resampling,
) -> Vec<f64> {
    let inv = rotation_inverse(view);
    let c0 = (n as f64 - 1.0) / 2.0;
    let n3 = n * n * n;
    let mut out = vec![0.0; channels * n3];
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let d = [x as f64 - c0, y as f64 - c0, z as f64 - c0];
                let p = apply(&inv, d);
                let taps = taps_3d(n, [p[0] + c0, p[1] + c0, p[2] + c0], mode);
                if taps.len == 0 {
                    continue;
                }
                let dst = (x * n + y) * n + z;
                for c in 0..channels {
                    let base = c * n3;
                    let mut acc = 0.0;
                    for t in 0..taps.len {
                        acc += taps.w[t] * values[base + taps.idx[t]];
                    }
                    out[base + dst] = acc;
                }
            }
        }
    }
    out
}

/// Adjoint of [`rotate_values`]: scatters `upstream` back through the
/// transpose of the sparse resampling map.
pub(crate) fn rotate_values_adjoint(
    upstream: &[f64],
    n: usize,
    channels: usize,
    view: Viewpoint,
    mode: Resampling,
) -> Vec<f64> {
    let inv = rotation_inverse(view);
    let c0 = (n as f64 - 1.0) / 2.0;
    let n3 = n * n * n;
    let mut out = vec![0.0; channels * n3];
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let d = [x as f64 - c0, y as f64 - c0, z as f64 - c0];
                let p = apply(&inv, d);
                let taps = taps_3d(n, [p[0] + c0, p[1] + c0, p[2] + c0], mode);
                if taps.len == 0 {
                    continue;
                }
                let dst = (x * n + y) * n + z;
                for c in 0..channels {
                    let base = c * n3;
                    let u = upstream[base + dst];
                    if u == 0.0 {
                        continue;
                    }
                    for t in 0..taps.len {
                        out[base + taps.idx[t]] += taps.w[t] * u;
                    }
                }
            }
        }
    }
    out
}

/// Returns the grid resampled on its own lattice after rotating by `view`.
pub fn rotate_grid(grid: &VoxelGrid, view: Viewpoint, cfg: &ProjectionConfig) -> VoxelGrid {
    let mut values = rotate_values(
        grid.values(),
        grid.n(),
        grid.channels(),
        view,
        cfg.resampling,
    );
    // Trilinear weights sum to 1 only up to rounding; keep the invariant.
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    VoxelGrid::from_values(grid.n(), grid.channels(), values)
        .expect("rotation preserves shape and range")
}

/// Gradient of `<rotate_grid(grid), upstream>` with respect to the grid.
pub fn rotate_grid_vjp(
    grid: &VoxelGrid,
    view: Viewpoint,
    cfg: &ProjectionConfig,
    upstream: &GridGradient,
) -> Result<GridGradient> {
    if !upstream.matches(grid) {
        return Err(Error::ShapeMismatch {
            context: "rotate_grid_vjp upstream",
        });
    }
    let values = rotate_values_adjoint(
        &upstream.values,
        grid.n(),
        grid.channels(),
        view,
        cfg.resampling,
    );
    Ok(GridGradient {
        n: grid.n(),
        channels: grid.channels(),
        values,
    })
}
