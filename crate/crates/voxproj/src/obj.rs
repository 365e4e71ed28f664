//! ASCII OBJ ingestion: `v` and `f` records only, polygonal faces
//! fan-triangulated, normals and texture coordinates ignored.
//!
//! An optional sidecar `<file>.labels` (one non-negative integer per face
//! line, in face order) assigns a part label to every triangle; labelled
//! meshes voxelize into one channel per part.

use std::fs;
use std::path::Path;

use voxproj_core::mesh::TriangleMesh;

use crate::error::{Error, Result};

pub fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut face_of_triangle: Vec<usize> = Vec::new();
    let mut face_count = 0usize;

    for (line_index, line) in text.lines().enumerate() {
        let line_no = line_index + 1;
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for coord in coords.iter_mut() {
                    *coord = fields
                        .next()
                        .and_then(|f| f.parse().ok())
                        .ok_or_else(|| Error::parse(path, line_no, "malformed vertex"))?;
                }
                vertices.push(coords);
            }
            Some("f") => {
                let mut indices = Vec::new();
                for field in fields {
                    // "i", "i/t", "i/t/n", "i//n" all start with the vertex index
                    let head = field.split('/').next().unwrap_or("");
                    let index: i64 = head
                        .parse()
                        .map_err(|_| Error::parse(path, line_no, "malformed face index"))?;
                    if index < 1 {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("face index {index} is not 1-based"),
                        ));
                    }
                    indices.push(index as usize - 1);
                }
                if indices.len() < 3 {
                    return Err(Error::parse(path, line_no, "face needs at least 3 vertices"));
                }
                for i in 1..indices.len() - 1 {
                    triangles.push([indices[0], indices[i], indices[i + 1]]);
                    face_of_triangle.push(face_count);
                }
                face_count += 1;
            }
            _ => {}
        }
    }

    let labels = read_label_sidecar(path, face_count)?;
    let mesh = match labels {
        Some(face_labels) => {
            let triangle_labels = face_of_triangle.iter().map(|f| face_labels[*f]).collect();
            TriangleMesh::with_labels(vertices, triangles, triangle_labels)?
        }
        None => TriangleMesh::new(vertices, triangles)?,
    };
    Ok(mesh)
}

fn read_label_sidecar(obj_path: &Path, face_count: usize) -> Result<Option<Vec<usize>>> {
    let mut name = obj_path.file_name().unwrap_or_default().to_os_string();
    name.push(".labels");
    let sidecar = obj_path.with_file_name(name);
    if !sidecar.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let mut labels = Vec::with_capacity(face_count);
    for (line_index, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let label: usize = trimmed
            .parse()
            .map_err(|_| Error::parse(&sidecar, line_index + 1, "malformed label"))?;
        labels.push(label);
    }
    if labels.len() != face_count {
        return Err(Error::BadInput {
            path: sidecar,
            message: format!("{} labels for {} faces", labels.len(), face_count),
        });
    }
    Ok(Some(labels))
}
