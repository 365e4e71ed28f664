//! The VOXG grid container.
//!
//! Layout, all multi-byte integers little-endian:
//!
//! ```text
//! "VOXG"          4 ASCII bytes
//! version         u8, currently 0x01
//! channels        u8
//! n               u16
//! values          channels * n^3 IEEE-754 f32, layout ((c*n+x)*n+y)*n+z
//! ```
//!
//! Values are quantized to f32 on disk; reading widens them back exactly,
//! so write/read round-trips are bit-identical for any grid that has been
//! through the format once.

use std::fs;
use std::path::Path;

use voxproj_core::VoxelGrid;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VOXG";
const VERSION: u8 = 0x01;

pub fn write_grid(grid: &VoxelGrid, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + 4 * grid.values().len());
    bytes.extend_from_slice(MAGIC);
    bytes.push(VERSION);
    bytes.push(u8::try_from(grid.channels()).map_err(|_| Error::BadInput {
        path: path.to_path_buf(),
        message: format!("channel count {} does not fit in a byte", grid.channels()),
    })?);
    let n = u16::try_from(grid.n()).map_err(|_| Error::BadInput {
        path: path.to_path_buf(),
        message: format!("side length {} does not fit in 16 bits", grid.n()),
    })?;
    bytes.extend_from_slice(&n.to_le_bytes());
    for v in grid.values() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<VoxelGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 4 || &bytes[0..4] != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < 8 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: 8,
            actual: bytes.len(),
        });
    }
    if bytes[4] != VERSION {
        return Err(Error::BadVersion {
            path: path.to_path_buf(),
            version: bytes[4],
        });
    }
    let channels = bytes[5] as usize;
    let n = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    if channels == 0 || n == 0 {
        return Err(Error::BadInput {
            path: path.to_path_buf(),
            message: "zero side length or channel count".into(),
        });
    }
    let expected = channels * n * n * n * 4;
    let payload = &bytes[8..];
    if payload.len() != expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: payload.len(),
        });
    }
    let mut values = Vec::with_capacity(channels * n * n * n);
    for chunk in payload.chunks_exact(4) {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::ValueOutOfRange {
                path: path.to_path_buf(),
                value: v,
            });
        }
        values.push(v);
    }
    Ok(VoxelGrid::from_values(n, channels, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use voxproj_core::rng::SplitMix64;

    fn dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    /// Random grid whose values are exactly representable in f32.
    fn random_grid(n: usize, channels: usize, seed: u64) -> VoxelGrid {
        let mut rng = SplitMix64::new(seed);
        let values = (0..channels * n * n * n)
            .map(|_| rng.next_f64() as f32 as f64)
            .collect();
        VoxelGrid::from_values(n, channels, values).unwrap()
    }

    #[test]
    fn empty_grid_is_40_bytes() {
        let d = dir();
        let path = d.path().join("empty.voxg");
        write_grid(&VoxelGrid::new(2, 1).unwrap(), &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 40);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let d = dir();
        for seed in 0..5u64 {
            let grid = random_grid(5, 2, seed);
            let path = d.path().join(format!("g{seed}.voxg"));
            write_grid(&grid, &path).unwrap();
            let back = read_grid(&path).unwrap();
            assert_eq!(grid, back);
            // and the file bytes themselves survive a second pass
            let bytes1 = std::fs::read(&path).unwrap();
            write_grid(&back, &path).unwrap();
            assert_eq!(bytes1, std::fs::read(&path).unwrap());
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let d = dir();
        let path = d.path().join("bad.voxg");
        std::fs::write(&path, b"XXXX\x01\x01\x02\x00").unwrap();
        assert!(matches!(read_grid(&path), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let d = dir();
        let path = d.path().join("short.voxg");
        let grid = VoxelGrid::new(2, 1).unwrap();
        write_grid(&grid, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_grid(&path), Err(Error::Truncated { .. })));
    }

    #[test]
    fn out_of_range_value_is_rejected() {
        let d = dir();
        let path = d.path().join("range.voxg");
        let grid = VoxelGrid::new(2, 1).unwrap();
        write_grid(&grid, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8..12].copy_from_slice(&1.5f32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_grid(&path), Err(Error::ValueOutOfRange { .. })));
    }

    #[test]
    fn unwritable_path_reports_io_error_with_context() {
        let grid = VoxelGrid::new(2, 1).unwrap();
        let err = write_grid(&grid, Path::new("/nonexistent-dir/grid.voxg")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("nonexistent-dir"));
    }

    #[test]
    fn bad_version_is_rejected() {
        let d = dir();
        let path = d.path().join("v2.voxg");
        let grid = VoxelGrid::new(2, 1).unwrap();
        write_grid(&grid, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 0x02;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_grid(&path), Err(Error::BadVersion { version: 2, .. })));
    }
}
