//! Polarizer angles and the detector geometry of the cascade source.
//!
//! Trigonometry works in radians, but every file and command-line interface
//! speaks degrees, so [`Angle`] keeps its value in degrees and converts on use.
//! A value read from a file therefore serializes back unchanged.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance used to decide whether a geometry sits on one of the two known
/// slices of the angular correlation function.
const SLICE_TOL: f64 = 1e-12;

/// A polarizer orientation.
///
/// Polarizer settings are only meaningful modulo 180°: all detection
/// probabilities depend on them through `cos 2(Δ)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    pub fn from_radians(rad: f64) -> Self {
        Angle(rad.to_degrees())
    }

    pub fn from_degrees(deg: f64) -> Self {
        Angle(deg)
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    /// Reduces the angle into `[0°, 180°)`.
    pub fn canonical(self) -> Self {
        Angle(reduce_degrees(self.0))
    }

    /// `cos 2(self − other)`, the only way settings enter the model.
    pub fn cos2_diff(self, other: Angle) -> f64 {
        (2.0 * (self.0 - other.0).to_radians()).cos()
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle(self.0 + rhs.0)
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle(self.0 - rhs.0)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.degrees())
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Angle::from_degrees)
    }
}

fn reduce_degrees(deg: f64) -> f64 {
    let r = deg.rem_euclid(180.0);
    // rem_euclid can round up to the modulus for tiny negative inputs
    if r >= 180.0 {
        0.0
    } else {
        r
    }
}

/// Reduces an angle in degrees into `[0, 180)`.
pub fn canonicalize_angle(deg: f64) -> Result<f64> {
    if !deg.is_finite() {
        return Err(Error::Domain(format!("angle must be finite, got {deg}")));
    }
    Ok(reduce_degrees(deg))
}

/// Solid angle `Ω = 2π(1 − cos φ)` of a detector with aperture half-angle `phi` (radians).
pub fn solid_angle(phi: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&phi) {
        return Err(Error::Domain(format!(
            "aperture half-angle must lie in [0, π], got {phi}"
        )));
    }
    Ok(2.0 * PI * (1.0 - phi.cos()))
}

/// Angular correlation `g(θ, φ)` of the J = 1 → 0 cascade.
///
/// Only the two closed-form slices are available:
/// `g(θ, 0) = ¾(1 + cos²θ)` and `g(π, φ) = 1 + ⅛ cos²φ (1 + cos φ)²`.
/// Any other combination is rejected rather than extrapolated.
pub fn angular_correlation(theta: f64, phi: f64) -> Result<f64> {
    if !theta.is_finite() || !(0.0..=PI).contains(&phi) {
        return Err(Error::Domain(format!(
            "need finite theta and phi in [0, π], got theta = {theta}, phi = {phi}"
        )));
    }
    if phi.abs() <= SLICE_TOL {
        let c = theta.cos();
        Ok(0.75 * (1.0 + c * c))
    } else if (theta - PI).abs() <= SLICE_TOL {
        let c = phi.cos();
        Ok(1.0 + 0.125 * c * c * (1.0 + c) * (1.0 + c))
    } else {
        Err(Error::UnsupportedGeometry {
            theta_deg: theta.to_degrees(),
            phi_deg: phi.to_degrees(),
        })
    }
}

/// Detector axis separation `theta`, aperture half-angle `phi` and the derived solid angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionGeometry {
    theta: f64,
    phi: f64,
    omega: f64,
}

impl DetectionGeometry {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI + SLICE_TOL).contains(&theta) {
            return Err(Error::Domain(format!(
                "detector separation must lie in [0, π], got {theta}"
            )));
        }
        let omega = solid_angle(phi)?;
        Ok(DetectionGeometry { theta, phi, omega })
    }

    /// Collinear detectors (θ = 180°), the regime in which `phi` may vary.
    pub fn collinear(phi: f64) -> Result<Self> {
        Self::new(PI, phi)
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn angular_correlation(&self) -> Result<f64> {
        angular_correlation(self.theta, self.phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn solid_angle_examples() {
        assert_eq!(solid_angle(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(solid_angle(PI).unwrap(), 4.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(solid_angle(PI / 3.0).unwrap(), PI, epsilon = 1e-12);
    }

    #[test]
    fn solid_angle_rejects_out_of_range() {
        assert!(matches!(solid_angle(-0.1), Err(Error::Domain(_))));
        assert!(matches!(solid_angle(PI + 0.01), Err(Error::Domain(_))));
        assert!(matches!(solid_angle(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn angular_correlation_examples() {
        assert_abs_diff_eq!(angular_correlation(PI, 0.0).unwrap(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            angular_correlation(PI / 2.0, 0.0).unwrap(),
            0.75,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            angular_correlation(PI, PI / 2.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn angular_correlation_branches_agree_at_the_corner() {
        let c = PI.cos();
        let theta_branch = 0.75 * (1.0 + c * c);
        let phi_branch = 1.0 + 0.125 * 1.0 * (1.0 + 1.0f64).powi(2);
        assert_abs_diff_eq!(theta_branch, phi_branch, epsilon = 1e-12);
        assert_abs_diff_eq!(
            angular_correlation(PI, 0.0).unwrap(),
            phi_branch,
            epsilon = 1e-12
        );
    }

    #[test]
    fn angular_correlation_refuses_to_extrapolate() {
        let err = angular_correlation(PI / 2.0, PI / 4.0).unwrap_err();
        assert!(matches!(err, Error::UnsupportedGeometry { .. }));
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize_angle(300.0).unwrap(), 120.0);
        assert_eq!(canonicalize_angle(-120.0).unwrap(), 60.0);
        assert_eq!(canonicalize_angle(0.0).unwrap(), 0.0);
        assert_eq!(canonicalize_angle(180.0).unwrap(), 0.0);
        assert!(canonicalize_angle(f64::INFINITY).is_err());
        assert!(canonicalize_angle(f64::NAN).is_err());
    }

    #[test]
    fn geometry_derives_omega() {
        let g = DetectionGeometry::from_degrees(180.0, 60.0).unwrap();
        assert_abs_diff_eq!(g.omega(), PI, epsilon = 1e-12);
        assert!(g.omega() <= 4.0 * PI);
        assert!(DetectionGeometry::from_degrees(180.0, 181.0).is_err());
    }

    proptest! {
        #[test]
        fn solid_angle_is_monotone(p in 0.0..PI, q in 0.0..PI) {
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(solid_angle(lo).unwrap() <= solid_angle(hi).unwrap());
        }

        #[test]
        fn canonical_form_is_congruent(deg in -1e4..1e4f64) {
            let c = canonicalize_angle(deg).unwrap();
            prop_assert!((0.0..180.0).contains(&c));
            let k = ((deg - c) / 180.0).round();
            prop_assert!((deg - c - 180.0 * k).abs() < 1e-9);
        }

        #[test]
        fn cos2_diff_has_period_180(a in -720.0..720.0f64, b in -720.0..720.0f64) {
            let x = Angle::from_degrees(a);
            let y = Angle::from_degrees(b);
            let shifted = Angle::from_degrees(a + 180.0);
            prop_assert!((x.cos2_diff(y) - shifted.cos2_diff(y)).abs() < 1e-12);
            prop_assert!((x.cos2_diff(y) - x.canonical().cos2_diff(y.canonical())).abs() < 1e-12);
        }
    }
}
