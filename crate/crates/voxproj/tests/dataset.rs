//! End-to-end dataset pipeline: meshes in, grids + images + manifest out.

use std::fs;
use std::path::{Path, PathBuf};

use voxproj::dataset::{build_dataset, load_recon_targets, VoxelizeParams};
use voxproj::manifest::{DatasetManifest, MANIFEST_FILE};
use voxproj_core::{ProjectionConfig, ProjectionKind, Rendering, ViewpointSet};

const CUBE_OBJ: &str = "\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 4 7 3
f 4 8 7
f 1 8 4
f 1 5 8
f 2 3 7
f 2 7 6
";

/// Squashed variant so the two shapes differ.
const SLAB_OBJ: &str = "\
v 0 0 0
v 2 0 0
v 2 0.5 0
v 0 0.5 0
v 0 0 2
v 2 0 2
v 2 0.5 2
v 0 0.5 2
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 4 7 3
f 4 8 7
f 1 8 4
f 1 5 8
f 2 3 7
f 2 7 6
";

fn mesh_dir(dir: &Path) -> PathBuf {
    let meshes = dir.join("meshes");
    fs::create_dir(&meshes).unwrap();
    fs::write(meshes.join("cube.obj"), CUBE_OBJ).unwrap();
    fs::write(meshes.join("slab.obj"), SLAB_OBJ).unwrap();
    meshes
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_str().unwrap().to_string();
            (name, fs::read(&p).unwrap())
        })
        .collect()
}

fn build(out: &Path, meshes: &Path, threads: usize) -> DatasetManifest {
    build_dataset(
        meshes,
        out,
        16,
        &ViewpointSet::default(),
        ProjectionKind::Silhouette,
        &ProjectionConfig::default(),
        &VoxelizeParams {
            samples_per_area: 8.0,
            solid: true,
        },
        7,
        threads,
    )
    .unwrap()
}

#[test]
fn two_meshes_times_eight_views_gives_sixteen_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let meshes = mesh_dir(tmp.path());
    let out = tmp.path().join("out");
    let manifest = build(&out, &meshes, 1);
    assert_eq!(manifest.entries.len(), 16);
    assert_eq!(manifest.n_views, 8);

    // manifest <-> files bijection: every entry resolves, no orphan images
    let mut referenced: Vec<String> = manifest
        .entries
        .iter()
        .map(|e| e.relative_path.to_str().unwrap().to_string())
        .collect();
    referenced.sort();
    let mut on_disk: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_str().unwrap().to_string())
        .filter(|name| name.ends_with(".pgm"))
        .collect();
    on_disk.sort();
    assert_eq!(referenced, on_disk);
    // one grid per shape next to the images
    assert!(out.join("cube.voxg").exists());
    assert!(out.join("slab.voxg").exists());
    assert!(out.join(MANIFEST_FILE).exists());
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let meshes = mesh_dir(tmp.path());
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    build(&out_a, &meshes, 1);
    build(&out_b, &meshes, 1);
    assert_eq!(dir_bytes(&out_a), dir_bytes(&out_b));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let meshes = mesh_dir(tmp.path());
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    build(&out_a, &meshes, 1);
    build(&out_b, &meshes, 4);
    assert_eq!(dir_bytes(&out_a), dir_bytes(&out_b));
}

#[test]
fn empty_mesh_directory_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let meshes = tmp.path().join("meshes");
    fs::create_dir(&meshes).unwrap();
    let out = tmp.path().join("out");
    assert!(build_dataset(
        &meshes,
        &out,
        16,
        &ViewpointSet::default(),
        ProjectionKind::Silhouette,
        &ProjectionConfig::default(),
        &VoxelizeParams::default(),
        7,
        1,
    )
    .is_err());
}

#[test]
fn recon_targets_load_back_from_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let meshes = mesh_dir(tmp.path());
    let out = tmp.path().join("out");
    build(&out, &meshes, 1);
    let (targets, kind, n) = load_recon_targets(&out.join(MANIFEST_FILE), "cube").unwrap();
    assert_eq!(kind, ProjectionKind::Silhouette);
    assert_eq!(n, 16);
    assert_eq!(targets.len(), 8);
    for target in &targets {
        match &target.data {
            Rendering::Image(img) => assert_eq!((img.h(), img.w()), (16, 16)),
            Rendering::Semantic(_) => panic!("silhouette dataset produced semantic targets"),
        }
    }
    assert!(load_recon_targets(&out.join(MANIFEST_FILE), "teapot").is_err());
}

#[test]
fn labelled_meshes_produce_semantic_channel_files() {
    let tmp = tempfile::tempdir().unwrap();
    let meshes = tmp.path().join("meshes");
    fs::create_dir(&meshes).unwrap();
    fs::write(meshes.join("cube.obj"), CUBE_OBJ).unwrap();
    // first six faces one part, the rest another
    let labels: String = (0..12).map(|f| if f < 6 { "0\n" } else { "1\n" }).collect();
    fs::write(meshes.join("cube.obj.labels"), labels).unwrap();
    let out = tmp.path().join("out");
    let manifest = build_dataset(
        &meshes,
        &out,
        12,
        &ViewpointSet::evenly_spaced(2).unwrap(),
        ProjectionKind::Semantic,
        &ProjectionConfig::default(),
        &VoxelizeParams::default(),
        3,
        1,
    )
    .unwrap();
    assert_eq!(manifest.entries.len(), 2);
    assert!(out.join("cube_v0_c0.pgm").exists());
    assert!(out.join("cube_v0_c1.pgm").exists());
    let (targets, kind, _) = load_recon_targets(&out.join(MANIFEST_FILE), "cube").unwrap();
    assert_eq!(kind, ProjectionKind::Semantic);
    match &targets[0].data {
        Rendering::Semantic(img) => assert_eq!(img.channels(), 2),
        Rendering::Image(_) => panic!("semantic dataset lost its channels"),
    }
}
