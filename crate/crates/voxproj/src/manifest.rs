//! Line-delimited dataset manifests.
//!
//! One UTF-8 record per line:
//!
//! ```text
//! shape_id<TAB>view_index<TAB>theta_deg<TAB>phi_deg<TAB>kind<TAB>relative_path
//! ```
//!
//! Paths are relative to the manifest's directory. Semantic renders are
//! stored one PGM per channel; their manifest record points at the `_c0`
//! file and siblings follow the `_c<k>` suffix convention.

use std::fs;
use std::path::{Path, PathBuf};

use voxproj_core::ProjectionKind;

use crate::error::{Error, Result};
use crate::pgm;

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub shape_id: String,
    pub view_index: usize,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub kind: ProjectionKind,
    pub relative_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub n: usize,
    pub image_side: usize,
    pub n_views: usize,
    pub entries: Vec<ManifestEntry>,
}

pub fn kind_from_str(s: &str) -> Option<ProjectionKind> {
    match s {
        "silhouette" => Some(ProjectionKind::Silhouette),
        "depth" => Some(ProjectionKind::Depth),
        "semantic" => Some(ProjectionKind::Semantic),
        _ => None,
    }
}

impl DatasetManifest {
    /// Writes the records and validates that every referenced image exists
    /// next to the manifest.
    pub fn write(&self, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let mut out = String::new();
        for entry in &self.entries {
            if entry.view_index >= self.n_views {
                return Err(Error::BadInput {
                    path: path.to_path_buf(),
                    message: format!(
                        "view index {} out of range for {} views",
                        entry.view_index, self.n_views
                    ),
                });
            }
            let target = dir.join(&entry.relative_path);
            if !target.exists() {
                return Err(Error::BadInput {
                    path: target,
                    message: "manifest references a missing file".into(),
                });
            }
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                entry.shape_id,
                entry.view_index,
                entry.theta_deg,
                entry.phi_deg,
                entry.kind.as_str(),
                entry.relative_path.display()
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Parses a manifest; the grid side and image side are read back from
    /// the first referenced image.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (line_index, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let line_no = line_index + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(Error::parse(path, line_no, "expected 6 tab-separated fields"));
            }
            let entry = ManifestEntry {
                shape_id: fields[0].to_string(),
                view_index: fields[1]
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, "malformed view index"))?,
                theta_deg: fields[2]
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, "malformed theta"))?,
                phi_deg: fields[3]
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, "malformed phi"))?,
                kind: kind_from_str(fields[4])
                    .ok_or_else(|| Error::parse(path, line_no, "unknown render kind"))?,
                relative_path: PathBuf::from(fields[5]),
            };
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(Error::BadInput {
                path: path.to_path_buf(),
                message: "manifest has no entries".into(),
            });
        }
        let n_views = entries.iter().map(|e| e.view_index).max().unwrap_or(0) + 1;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let first = pgm::read_image_pgm(&dir.join(&entries[0].relative_path))?;
        Ok(Self {
            n: first.w(),
            image_side: first.w(),
            n_views,
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use voxproj_core::Image;

    #[test]
    fn round_trips_through_disk() {
        let d = tempfile::tempdir().unwrap();
        let img = Image::from_values(4, 4, vec![0.5; 16]).unwrap();
        pgm::write_image_pgm(&img, &d.path().join("chair_v0.pgm")).unwrap();
        pgm::write_image_pgm(&img, &d.path().join("chair_v1.pgm")).unwrap();
        let manifest = DatasetManifest {
            n: 4,
            image_side: 4,
            n_views: 2,
            entries: vec![
                ManifestEntry {
                    shape_id: "chair".into(),
                    view_index: 0,
                    theta_deg: 0.0,
                    phi_deg: 0.0,
                    kind: ProjectionKind::Silhouette,
                    relative_path: "chair_v0.pgm".into(),
                },
                ManifestEntry {
                    shape_id: "chair".into(),
                    view_index: 1,
                    theta_deg: 0.0,
                    phi_deg: 180.0,
                    kind: ProjectionKind::Silhouette,
                    relative_path: "chair_v1.pgm".into(),
                },
            ],
        };
        let path = d.path().join(MANIFEST_FILE);
        manifest.write(&path).unwrap();
        let back = DatasetManifest::load(&path).unwrap();
        assert_eq!(manifest, back);
    }

    #[test]
    fn missing_referenced_file_fails_write() {
        let d = tempfile::tempdir().unwrap();
        let manifest = DatasetManifest {
            n: 4,
            image_side: 4,
            n_views: 1,
            entries: vec![ManifestEntry {
                shape_id: "ghost".into(),
                view_index: 0,
                theta_deg: 0.0,
                phi_deg: 0.0,
                kind: ProjectionKind::Depth,
                relative_path: "ghost_v0.pgm".into(),
            }],
        };
        assert!(manifest.write(&d.path().join(MANIFEST_FILE)).is_err());
    }

    #[test]
    fn malformed_lines_report_positions() {
        let d = tempfile::tempdir().unwrap();
        let path = d.path().join(MANIFEST_FILE);
        fs::write(&path, "chair\t0\t0\t0\tsilhouette\n").unwrap();
        let err = DatasetManifest::load(&path).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
    }
}
