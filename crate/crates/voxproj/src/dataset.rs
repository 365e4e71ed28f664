//! Batch pipeline: meshes to voxel grids to multi-view image datasets.
//!
//! Per-shape work is independent and may run on a worker pool; outputs are
//! keyed by shape, and manifests are assembled in input order, so results
//! are byte-identical for any thread count.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use voxproj_core::mesh::{voxelize, TriangleMesh};
use voxproj_core::rng::SplitMix64;
use voxproj_core::{
    render_views, ProjectionConfig, ProjectionKind, Rendering, ViewpointSet,
};
use voxproj_core::{Image, ReconTarget, SemanticImage, Viewpoint, VoxelGrid};

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, ManifestEntry, MANIFEST_FILE};
use crate::obj::load_obj;
use crate::pgm;
use crate::voxg;

/// Knobs for the mesh-to-grid stage.
#[derive(Debug, Clone, Copy)]
pub struct VoxelizeParams {
    pub samples_per_area: f64,
    pub solid: bool,
}

impl Default for VoxelizeParams {
    fn default() -> Self {
        Self {
            samples_per_area: 8.0,
            solid: false,
        }
    }
}

/// Maps `f` over the items on `threads` workers, returning results in
/// input order regardless of scheduling.
pub fn parallel_map<T, R, F>(items: Vec<T>, threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, R)>> = Mutex::new(Vec::with_capacity(items.len()));
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().unwrap().push((i, r));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

/// OBJ files of a directory (or the single given file), in name order.
pub fn mesh_paths(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(|e| Error::io(input, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "obj"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::BadInput {
            path: input.to_path_buf(),
            message: "no .obj files found".into(),
        });
    }
    Ok(paths)
}

/// VOXG files of a directory (or the single given file), in name order.
pub fn grid_paths(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(|e| Error::io(input, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "voxg"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::BadInput {
            path: input.to_path_buf(),
            message: "no .voxg files found".into(),
        });
    }
    Ok(paths)
}

pub fn shape_id(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("shape")
        .to_string()
}

/// Voxelizes one mesh with its own seed sub-stream.
pub fn voxelize_mesh(
    path: &Path,
    n: usize,
    params: &VoxelizeParams,
    seed: u64,
) -> Result<(String, VoxelGrid)> {
    let id = shape_id(path);
    let mesh: TriangleMesh = load_obj(path)?;
    let mesh_seed = SplitMix64::stream(seed, &format!("voxelize/{id}")).next_u64();
    let grid = voxelize(&mesh, n, params.samples_per_area, params.solid, mesh_seed)?;
    Ok((id, grid))
}

fn image_file_name(id: &str, view_index: usize) -> String {
    format!("{id}_v{view_index}.pgm")
}

/// Writes one shape's renders and returns its manifest entries.
fn write_renders(
    out_dir: &Path,
    id: &str,
    renders: &[Rendering],
    views: &ViewpointSet,
    kind: ProjectionKind,
) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::with_capacity(renders.len());
    for (view_index, (rendering, view)) in renders.iter().zip(views.iter()).enumerate() {
        let file = image_file_name(id, view_index);
        let path = out_dir.join(&file);
        let relative_path = match rendering {
            Rendering::Image(img) => {
                pgm::write_image_pgm(img, &path)?;
                PathBuf::from(file)
            }
            Rendering::Semantic(img) => {
                let paths = pgm::write_semantic_pgms(img, &path)?;
                PathBuf::from(
                    paths[0]
                        .file_name()
                        .expect("channel files have names")
                        .to_os_string()
                        .into_string()
                        .expect("ascii file names"),
                )
            }
        };
        let phi_deg = views
            .ring_degrees(view_index)
            .unwrap_or_else(|| view.phi().to_degrees());
        entries.push(ManifestEntry {
            shape_id: id.to_string(),
            view_index,
            theta_deg: view.theta().to_degrees(),
            phi_deg,
            kind,
            relative_path,
        });
    }
    Ok(entries)
}

/// Full pipeline for a directory of meshes: VOXG grids, per-view PGMs and
/// a manifest, all under `out_dir`. Per-mesh failures are reported and
/// skipped; the call fails only when every mesh fails.
#[allow(clippy::too_many_arguments)]
pub fn build_dataset(
    mesh_dir: &Path,
    out_dir: &Path,
    n: usize,
    views: &ViewpointSet,
    kind: ProjectionKind,
    cfg: &ProjectionConfig,
    params: &VoxelizeParams,
    seed: u64,
    threads: usize,
) -> Result<DatasetManifest> {
    let paths = mesh_paths(mesh_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let results = parallel_map(paths, threads, |path| -> Result<(Vec<ManifestEntry>, usize)> {
        let (id, grid) = voxelize_mesh(path, n, params, seed)?;
        voxg::write_grid(&grid, &out_dir.join(format!("{id}.voxg")))?;
        let renders = render_views(&grid, views, kind, cfg)?;
        Ok((write_renders(out_dir, &id, &renders, views, kind)?, n))
    });
    collect_manifest(results, views.len(), out_dir)
}

/// Renders already-voxelized grids into `out_dir` with a manifest.
pub fn render_grids(
    grid_input: &Path,
    out_dir: &Path,
    views: &ViewpointSet,
    kind: ProjectionKind,
    cfg: &ProjectionConfig,
    threads: usize,
) -> Result<DatasetManifest> {
    let paths = grid_paths(grid_input)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let results = parallel_map(paths, threads, |path| -> Result<(Vec<ManifestEntry>, usize)> {
        let id = shape_id(path);
        let grid = voxg::read_grid(path)?;
        let renders = render_views(&grid, views, kind, cfg)?;
        Ok((write_renders(out_dir, &id, &renders, views, kind)?, grid.n()))
    });
    collect_manifest(results, views.len(), out_dir)
}

fn collect_manifest(
    results: Vec<Result<(Vec<ManifestEntry>, usize)>>,
    n_views: usize,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    let mut entries = Vec::new();
    let mut n = 0usize;
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok((batch, side)) => {
                entries.extend(batch);
                n = side;
            }
            Err(err) => failures.push(err),
        }
    }
    for err in &failures {
        eprintln!("warning: skipped shape: {err}");
    }
    if entries.is_empty() {
        return Err(Error::BadInput {
            path: out_dir.to_path_buf(),
            message: "every input shape failed".into(),
        });
    }
    let manifest = DatasetManifest {
        n,
        image_side: n,
        n_views,
        entries,
    };
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Loads the reconstruction targets of one shape from a manifest: images,
/// viewpoints and the render kind, ready for `ReconProblem`.
pub fn load_recon_targets(
    manifest_path: &Path,
    shape: &str,
) -> Result<(Vec<ReconTarget>, ProjectionKind, usize)> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let rows: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| e.shape_id == shape)
        .collect();
    if rows.is_empty() {
        return Err(Error::BadInput {
            path: manifest_path.to_path_buf(),
            message: format!("shape id {shape:?} not present in manifest"),
        });
    }
    let kind = rows[0].kind;
    let mut targets = Vec::with_capacity(rows.len());
    for row in rows {
        if row.kind != kind {
            return Err(Error::BadInput {
                path: manifest_path.to_path_buf(),
                message: format!("shape {shape:?} mixes render kinds"),
            });
        }
        let view = Viewpoint::new(row.theta_deg.to_radians(), row.phi_deg.to_radians())?;
        let data = match kind {
            ProjectionKind::Semantic => {
                Rendering::Semantic(read_semantic_channels(&dir.join(&row.relative_path))?)
            }
            _ => Rendering::Image(pgm::read_image_pgm(&dir.join(&row.relative_path))?),
        };
        targets.push(ReconTarget { view, data });
    }
    let n = manifest.image_side;
    Ok((targets, kind, n))
}

/// Reads `<base>_c0.pgm`, `<base>_c1.pgm`, ... back into one image stack.
fn read_semantic_channels(c0_path: &Path) -> Result<SemanticImage> {
    let name = c0_path
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let base = name.strip_suffix("_c0.pgm").ok_or_else(|| Error::BadInput {
        path: c0_path.to_path_buf(),
        message: "semantic manifest entries must point at the _c0 channel".into(),
    })?;
    let dir = c0_path.parent().unwrap_or_else(|| Path::new("."));
    let mut channels: Vec<Image> = Vec::new();
    loop {
        let candidate = dir.join(format!("{base}_c{}.pgm", channels.len()));
        if !candidate.exists() {
            break;
        }
        channels.push(pgm::read_image_pgm(&candidate)?);
    }
    if channels.is_empty() {
        return Err(Error::BadInput {
            path: c0_path.to_path_buf(),
            message: "no channel files found".into(),
        });
    }
    let (h, w) = (channels[0].h(), channels[0].w());
    let mut values = Vec::with_capacity(channels.len() * h * w);
    for channel in &channels {
        values.extend_from_slice(channel.values());
    }
    Ok(SemanticImage::from_values(h, w, channels.len(), values)?)
}
