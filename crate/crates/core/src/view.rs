//! Viewpoints and projection parameters.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Spherical view direction: `theta` is the elevation about the x-axis,
/// `phi` the azimuth about the y-axis (up). Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    theta: f64,
    phi: f64,
}

impl Viewpoint {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(-core::f64::consts::FRAC_PI_2..=core::f64::consts::FRAC_PI_2).contains(&theta) {
            return Err(Error::ElevationOutOfRange { theta });
        }
        if !(0.0..core::f64::consts::TAU).contains(&phi) {
            return Err(Error::AzimuthOutOfRange { phi });
        }
        Ok(Self { theta, phi })
    }

    /// The identity view: looking down +z with no elevation.
    pub fn front() -> Self {
        Self {
            theta: 0.0,
            phi: 0.0,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// An ordered set of viewpoints. The default is the 8-view ring:
/// `theta = 0`, `phi` evenly spaced every 45 degrees starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointSet {
    views: Vec<Viewpoint>,
}

impl ViewpointSet {
    /// `n_views` azimuths evenly spaced around the y-axis at zero
    /// elevation: view `j` sits at `360 * j / n_views` degrees.
    pub fn evenly_spaced(n_views: usize) -> Result<Self> {
        if n_views == 0 {
            return Err(Error::Empty { what: "view set" });
        }
        let views = (0..n_views)
            .map(|j| Viewpoint {
                theta: 0.0,
                phi: (360.0 * j as f64 / n_views as f64).to_radians(),
            })
            .collect();
        Ok(Self { views })
    }

    /// The exact azimuth in degrees when view `index` sits on the evenly
    /// spaced ring; radians pick up round-trip noise (120 degrees comes
    /// back as 119.99999999999999), so manifest writers ask here first.
    pub fn ring_degrees(&self, index: usize) -> Option<f64> {
        let view = self.get(index)?;
        let ideal = 360.0 * index as f64 / self.len() as f64;
        if view.theta() == 0.0 && view.phi() == ideal.to_radians() {
            Some(ideal)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<Viewpoint> {
        self.views.get(index).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = Viewpoint> + '_ {
        self.views.iter().copied()
    }
}

impl Default for ViewpointSet {
    fn default() -> Self {
        Self::evenly_spaced(8).unwrap()
    }
}

/// Resampling used when a rotated grid is read off the lattice.
///
/// Trilinear is the default: nearest-neighbour resampling makes outputs
/// piecewise constant in voxel positions. Nearest is kept because 90-degree
/// azimuth rotations become exact index permutations under it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    Nearest,
    #[default]
    Trilinear,
}

/// Parameters shared by the projection operators.
///
/// `tau` is the accessibility falloff rate, `supersample` the linear ray
/// oversampling factor (rays are cast on an `(s*n)^2` grid and box-averaged
/// down to `n^2`). Samples outside the grid always read as zero occupancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub tau: f64,
    pub resampling: Resampling,
    pub supersample: usize,
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Invalid {
                what: "projection config",
                why: "tau must be positive",
            });
        }
        if self.supersample == 0 {
            return Err(Error::Invalid {
                what: "projection config",
                why: "supersample factor must be at least 1",
            });
        }
        Ok(())
    }

    /// Plain lattice rays: no supersampling, given resampling mode.
    pub fn flat(resampling: Resampling) -> Self {
        Self {
            tau: 1.0,
            resampling,
            supersample: 1,
        }
    }
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            resampling: Resampling::Trilinear,
            supersample: 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_view_set_is_the_8_ring() {
        let set = ViewpointSet::default();
        assert_eq!(set.len(), 8);
        for (j, view) in set.iter().enumerate() {
            assert_eq!(view.theta(), 0.0);
            let expected = (45.0 * j as f64).to_radians();
            assert!((view.phi() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn three_views_are_at_120_degrees() {
        let set = ViewpointSet::evenly_spaced(3).unwrap();
        let phis: Vec<f64> = set.iter().map(|v| v.phi().to_degrees()).collect();
        assert!((phis[0] - 0.0).abs() < 1e-9);
        assert!((phis[1] - 120.0).abs() < 1e-9);
        assert!((phis[2] - 240.0).abs() < 1e-9);
    }

    #[test]
    fn viewpoint_ranges_are_enforced() {
        assert!(Viewpoint::new(2.0, 0.0).is_err());
        assert!(Viewpoint::new(0.0, -0.1).is_err());
        assert!(Viewpoint::new(0.0, core::f64::consts::TAU).is_err());
        assert!(Viewpoint::new(-core::f64::consts::FRAC_PI_2, 0.0).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(ProjectionConfig::default().validate().is_ok());
        let bad_tau = ProjectionConfig {
            tau: 0.0,
            ..ProjectionConfig::default()
        };
        assert!(bad_tau.validate().is_err());
        let bad_supersample = ProjectionConfig {
            supersample: 0,
            ..ProjectionConfig::default()
        };
        assert!(bad_supersample.validate().is_err());
    }
}
