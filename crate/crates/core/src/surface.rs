//! Ground-plane contact surface: friction coefficient and tangent basis.

use crate::model::Mode;
use crate::real::{lit, Real};
use nalgebra::Vector3;

/// Flat half-space ground at `z = height` with Coulomb friction `mu` and a
/// polyhedral tangent basis of `n_directions` unit vectors (pairs of opposing
/// directions; planar models use ±x).
#[derive(Clone, Debug)]
pub struct Surface<T: Real> {
    pub mu: T,
    /// Ground plane height [mm].
    pub height: T,
    n_directions: usize,
}

impl<T: Real> Surface<T> {
    pub fn new(mu: T, height: T, n_directions: usize, mode: Mode) -> Result<Self, String> {
        if mu < T::zero() {
            return Err("friction coefficient must be nonnegative".into());
        }
        if n_directions % 2 != 0 {
            return Err("friction basis needs an even direction count".into());
        }
        match mode {
            Mode::Planar if n_directions != 2 => {
                return Err("planar contact uses exactly 2 friction directions".into())
            }
            Mode::Spatial if n_directions < 4 => {
                return Err("spatial contact needs at least 4 friction directions".into())
            }
            _ => {}
        }
        Ok(Surface {
            mu,
            height,
            n_directions,
        })
    }

    /// Ground-level surface with the planar two-direction basis.
    pub fn planar(mu: T) -> Self {
        Surface {
            mu,
            height: T::zero(),
            n_directions: 2,
        }
    }

    /// Measured-surface presets: `teflon`, `cardstock`, `sandpaper`.
    pub fn preset(name: &str, mode: Mode) -> Option<Self> {
        let mu = match name {
            "teflon" => 0.29,
            "cardstock" => 0.51,
            "sandpaper" => 1.02,
            _ => return None,
        };
        let d = match mode {
            Mode::Planar => 2,
            Mode::Spatial => 4,
        };
        Some(Surface::new(lit(mu), T::zero(), d, mode).expect("preset is valid"))
    }

    pub fn n_directions(&self) -> usize {
        self.n_directions
    }

    /// Tangent-plane basis directions. Planar: ±x. Spatial: evenly spaced in
    /// the x–y plane, so every direction's negation is also in the set.
    pub fn directions(&self) -> Vec<Vector3<T>> {
        if self.n_directions == 2 {
            return vec![
                Vector3::new(T::one(), T::zero(), T::zero()),
                Vector3::new(-T::one(), T::zero(), T::zero()),
            ];
        }
        let mut dirs = Vec::with_capacity(self.n_directions);
        for j in 0..self.n_directions {
            let angle = lit::<T>(2.0 * std::f64::consts::PI) * lit::<T>(j as f64)
                / lit::<T>(self.n_directions as f64);
            dirs.push(Vector3::new(angle.cos(), angle.sin(), T::zero()));
        }
        dirs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_basis_is_opposing_pair() {
        let s = Surface::<f64>::planar(0.5);
        let d = s.directions();
        assert_eq!(d.len(), 2);
        assert!((d[0] + d[1]).norm() < 1e-15);
    }

    #[test]
    fn spatial_basis_spans_and_negates() {
        let s = Surface::<f64>::new(0.5, 0.0, 4, Mode::Spatial).unwrap();
        let d = s.directions();
        assert_eq!(d.len(), 4);
        // 90° increments: d[2] = -d[0], d[3] = -d[1]
        assert!((d[0] + d[2]).norm() < 1e-12);
        assert!((d[1] + d[3]).norm() < 1e-12);
        assert!((d[0].cross(&d[1]).norm() - 1.0).abs() < 1e-12);
        for v in &d {
            assert_eq!(v.z, 0.0);
        }
    }

    #[test]
    fn invalid_configurations_rejected() {
        assert!(Surface::<f64>::new(-0.1, 0.0, 2, Mode::Planar).is_err());
        assert!(Surface::<f64>::new(0.5, 0.0, 3, Mode::Spatial).is_err());
        assert!(Surface::<f64>::new(0.5, 0.0, 2, Mode::Spatial).is_err());
    }

    #[test]
    fn presets_match_measured_means() {
        assert_eq!(Surface::<f64>::preset("cardstock", Mode::Planar).unwrap().mu, 0.51);
        assert_eq!(Surface::<f64>::preset("teflon", Mode::Planar).unwrap().mu, 0.29);
        assert_eq!(Surface::<f64>::preset("sandpaper", Mode::Planar).unwrap().mu, 1.02);
        assert!(Surface::<f64>::preset("ice", Mode::Planar).is_none());
    }
}
