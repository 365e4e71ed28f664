//! Triangle meshes and voxelization.
//!
//! A mesh is normalized into the grid (uniform scale, centred, 5% padding
//! so rotations cannot clip corners), its surface is sampled with a
//! deterministic seeded sampler proportional to triangle area, and samples
//! are binned to `{0, 1}` voxels. Solid fill counts ray/triangle crossing
//! parity per z-column for watertight meshes and falls back to a
//! flood-fill-from-boundary complement otherwise.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::VoxelGrid;
use crate::rng::SplitMix64;

/// Indexed triangle mesh in model units. Triangles may carry a part label,
/// in which case voxelization produces one channel per label.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    labels: Option<Vec<usize>>,
    degenerate_dropped: usize,
}

impl TriangleMesh {
    /// Validates indices and drops degenerate triangles (repeated or
    /// coincident vertices), keeping a count of how many were dropped.
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        Self::build(vertices, triangles, None)
    }

    /// As [`TriangleMesh::new`] with one part label per triangle.
    pub fn with_labels(
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[usize; 3]>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if labels.len() != triangles.len() {
            return Err(Error::LengthMismatch {
                expected: triangles.len(),
                actual: labels.len(),
            });
        }
        Self::build(vertices, triangles, Some(labels))
    }

    fn build(
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[usize; 3]>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::Empty { what: "mesh" });
        }
        let mut kept = Vec::with_capacity(triangles.len());
        let mut kept_labels = labels.as_ref().map(|_| Vec::with_capacity(triangles.len()));
        let mut dropped = 0usize;
        for (t, tri) in triangles.iter().enumerate() {
            for &index in tri {
                if index >= vertices.len() {
                    return Err(Error::VertexIndexOutOfRange {
                        index,
                        vertices: vertices.len(),
                    });
                }
            }
            let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let distinct_indices = tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2];
            if distinct_indices && a != b && b != c && a != c {
                kept.push(*tri);
                if let (Some(out), Some(labels)) = (kept_labels.as_mut(), labels.as_ref()) {
                    out.push(labels[t]);
                }
            } else {
                dropped += 1;
            }
        }
        if kept.is_empty() {
            return Err(Error::Empty { what: "mesh" });
        }
        Ok(Self {
            vertices,
            triangles: kept,
            labels: kept_labels,
            degenerate_dropped: dropped,
        })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// How many degenerate triangles were dropped at construction.
    pub fn degenerate_dropped(&self) -> usize {
        self.degenerate_dropped
    }

    /// Every edge shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &self.triangles {
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                let key = (a.min(b), a.max(b));
                *edges.entry(key).or_insert(0) += 1;
            }
        }
        edges.values().all(|count| *count == 2)
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let n = cross(sub(b, a), sub(c, a));
    0.5 * libm::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
}

struct GridTransform {
    scale: f64,
    center: [f64; 3],
    grid_center: f64,
}

impl GridTransform {
    fn fit(mesh: &TriangleMesh, n: usize) -> Result<Self> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in mesh.vertices() {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(hi[2] - lo[2]);
        if !(extent > 0.0) {
            return Err(Error::Invalid {
                what: "mesh",
                why: "bounding box has zero extent",
            });
        }
        Ok(Self {
            scale: 0.9 * n as f64 / extent,
            center: [
                (lo[0] + hi[0]) / 2.0,
                (lo[1] + hi[1]) / 2.0,
                (lo[2] + hi[2]) / 2.0,
            ],
            grid_center: (n as f64 - 1.0) / 2.0,
        })
    }

    fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        [
            (p[0] - self.center[0]) * self.scale + self.grid_center,
            (p[1] - self.center[1]) * self.scale + self.grid_center,
            (p[2] - self.center[2]) * self.scale + self.grid_center,
        ]
    }
}

fn bin(n: usize, p: [f64; 3]) -> usize {
    let clamp = |v: f64| libm::round(v).clamp(0.0, n as f64 - 1.0) as usize;
    (clamp(p[0]) * n + clamp(p[1])) * n + clamp(p[2])
}

/// Voxelizes a mesh into an `n^3` binary grid (one channel per part label
/// when the mesh is labelled). Surface samples are drawn per triangle with
/// expected count `area * samples_per_area` (area in voxel units); with
/// `solid`, interior voxels are filled as well.
pub fn voxelize(
    mesh: &TriangleMesh,
    n: usize,
    samples_per_area: f64,
    solid: bool,
    seed: u64,
) -> Result<VoxelGrid> {
    if n < 2 {
        return Err(Error::BadSideLength { min: 2 });
    }
    if !(samples_per_area > 0.0) {
        return Err(Error::Invalid {
            what: "voxelize",
            why: "samples_per_area must be positive",
        });
    }
    let transform = GridTransform::fit(mesh, n)?;
    let channels = match mesh.labels() {
        Some(labels) => labels.iter().max().copied().unwrap_or(0) + 1,
        None => 1,
    };
    let n3 = n * n * n;
    let mut occupancy = vec![false; channels * n3];

    let mut rng = SplitMix64::stream(seed, "voxelize");
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = transform.apply(mesh.vertices()[tri[0]]);
        let b = transform.apply(mesh.vertices()[tri[1]]);
        let c = transform.apply(mesh.vertices()[tri[2]]);
        let channel = mesh.labels().map_or(0, |labels| labels[t]);
        let area = triangle_area(a, b, c);
        let count = libm::ceil(area * samples_per_area) as usize;
        // Vertices count as samples so thin triangles are never missed.
        for p in [a, b, c] {
            occupancy[channel * n3 + bin(n, p)] = true;
        }
        for _ in 0..count {
            let r1 = libm::sqrt(rng.next_f64());
            let r2 = rng.next_f64();
            let (wa, wb, wc) = (1.0 - r1, r1 * (1.0 - r2), r1 * r2);
            let p = [
                wa * a[0] + wb * b[0] + wc * c[0],
                wa * a[1] + wb * b[1] + wc * c[1],
                wa * a[2] + wb * b[2] + wc * c[2],
            ];
            occupancy[channel * n3 + bin(n, p)] = true;
        }
    }

    if solid {
        let surface_union: Vec<bool> = (0..n3)
            .map(|i| (0..channels).any(|c| occupancy[c * n3 + i]))
            .collect();
        let interior = if mesh.is_watertight() {
            parity_interior(mesh, &transform, n)
        } else {
            flood_interior(&surface_union, n)
        };
        if channels == 1 {
            for (i, inside) in interior.iter().enumerate() {
                if *inside {
                    occupancy[i] = true;
                }
            }
        } else {
            fill_labelled_interior(&mut occupancy, &surface_union, &interior, n, channels);
        }
    }

    let values = occupancy
        .iter()
        .map(|b| f64::from(u8::from(*b)))
        .collect();
    VoxelGrid::from_values(n, channels, values)
}

/// Per-z-column ray parity on the transformed mesh. Rays pass through
/// voxel centres with a tiny fixed offset so axis-aligned geometry cannot
/// hit triangle edges exactly.
fn parity_interior(mesh: &TriangleMesh, transform: &GridTransform, n: usize) -> Vec<bool> {
    const OFFSET_X: f64 = 1.23e-4;
    const OFFSET_Y: f64 = 4.57e-4;
    let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); n * n];
    for tri in mesh.triangles() {
        let a = transform.apply(mesh.vertices()[tri[0]]);
        let b = transform.apply(mesh.vertices()[tri[1]]);
        let c = transform.apply(mesh.vertices()[tri[2]]);
        let lo_x = a[0].min(b[0]).min(c[0]);
        let hi_x = a[0].max(b[0]).max(c[0]);
        let lo_y = a[1].min(b[1]).min(c[1]);
        let hi_y = a[1].max(b[1]).max(c[1]);
        let x_min = libm::ceil(lo_x - OFFSET_X).max(0.0) as usize;
        let x_max = libm::floor(hi_x - OFFSET_X).min(n as f64 - 1.0) as usize;
        let y_min = libm::ceil(lo_y - OFFSET_Y).max(0.0) as usize;
        let y_max = libm::floor(hi_y - OFFSET_Y).min(n as f64 - 1.0) as usize;
        for x in x_min..=x_max.min(n - 1) {
            for y in y_min..=y_max.min(n - 1) {
                let px = x as f64 + OFFSET_X;
                let py = y as f64 + OFFSET_Y;
                // 2D barycentric test in the xy-projection.
                let d = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
                if d == 0.0 {
                    continue;
                }
                let wa = ((b[1] - c[1]) * (px - c[0]) + (c[0] - b[0]) * (py - c[1])) / d;
                let wb = ((c[1] - a[1]) * (px - c[0]) + (a[0] - c[0]) * (py - c[1])) / d;
                let wc = 1.0 - wa - wb;
                if wa < 0.0 || wb < 0.0 || wc < 0.0 {
                    continue;
                }
                let z = wa * a[2] + wb * b[2] + wc * c[2];
                crossings[x * n + y].push(z);
            }
        }
    }
    let mut interior = vec![false; n * n * n];
    for x in 0..n {
        for y in 0..n {
            let list = &mut crossings[x * n + y];
            list.sort_by(|p, q| p.partial_cmp(q).expect("finite crossing depths"));
            for z in 0..n {
                let below = list.partition_point(|zc| *zc < z as f64);
                if below % 2 == 1 {
                    interior[(x * n + y) * n + z] = true;
                }
            }
        }
    }
    interior
}

/// Complement of the flood fill from the grid boundary through non-surface
/// voxels (6-connectivity).
fn flood_interior(surface: &[bool], n: usize) -> Vec<bool> {
    let idx = |x: usize, y: usize, z: usize| (x * n + y) * n + z;
    let mut outside = vec![false; n * n * n];
    let mut queue: Vec<(usize, usize, usize)> = Vec::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let boundary = x == 0 || y == 0 || z == 0 || x == n - 1 || y == n - 1 || z == n - 1;
                if boundary && !surface[idx(x, y, z)] && !outside[idx(x, y, z)] {
                    outside[idx(x, y, z)] = true;
                    queue.push((x, y, z));
                }
            }
        }
    }
    while let Some((x, y, z)) = queue.pop() {
        let mut visit = |x: usize, y: usize, z: usize| {
            let i = idx(x, y, z);
            if !surface[i] && !outside[i] {
                outside[i] = true;
                queue.push((x, y, z));
            }
        };
        if x > 0 {
            visit(x - 1, y, z);
        }
        if x + 1 < n {
            visit(x + 1, y, z);
        }
        if y > 0 {
            visit(x, y - 1, z);
        }
        if y + 1 < n {
            visit(x, y + 1, z);
        }
        if z > 0 {
            visit(x, y, z - 1);
        }
        if z + 1 < n {
            visit(x, y, z + 1);
        }
    }
    (0..n * n * n)
        .map(|i| !outside[i] && !surface[i])
        .collect()
}

/// Assigns interior voxels of a labelled solid the channel pattern of the
/// nearest surface voxel (multi-source BFS, lowest linear index wins ties).
fn fill_labelled_interior(
    occupancy: &mut [bool],
    surface: &[bool],
    interior: &[bool],
    n: usize,
    channels: usize,
) {
    let n3 = n * n * n;
    let mut source = vec![usize::MAX; n3];
    let mut frontier: Vec<usize> = (0..n3).filter(|i| surface[*i]).collect();
    for &i in &frontier {
        source[i] = i;
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &i in &frontier {
            let z = i % n;
            let y = (i / n) % n;
            let x = i / (n * n);
            // Frontier is sorted, so within a layer the lowest-index
            // neighbour claims a cell first; ties are deterministic.
            let mut push = |j: usize| {
                if interior[j] && source[j] == usize::MAX {
                    source[j] = source[i];
                    next.push(j);
                }
            };
            if x > 0 {
                push(i - n * n);
            }
            if x + 1 < n {
                push(i + n * n);
            }
            if y > 0 {
                push(i - n);
            }
            if y + 1 < n {
                push(i + n);
            }
            if z > 0 {
                push(i - 1);
            }
            if z + 1 < n {
                push(i + 1);
            }
        }
        next.sort_unstable();
        next.dedup();
        frontier = next;
    }
    for i in 0..n3 {
        if interior[i] && source[i] != usize::MAX {
            for c in 0..channels {
                if occupancy[c * n3 + source[i]] {
                    occupancy[c * n3 + i] = true;
                }
            }
        }
    }
}
