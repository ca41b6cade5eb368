//! Quantum-mechanical detection probabilities for the two-channel cascade
//! experiment, and their completion to a normalized per-pair outcome
//! distribution that includes non-detection.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Angle, DetectionGeometry};

/// Outcome of one side for one emitted pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    /// Ordinary-ray detector fired.
    Plus,
    /// Extraordinary-ray detector fired.
    Minus,
    /// Neither detector fired.
    #[serde(rename = "none")]
    NoDetect,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Plus, Outcome::Minus, Outcome::NoDetect];

    pub fn index(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
            Outcome::NoDetect => 2,
        }
    }

    pub fn is_detection(self) -> bool {
        self != Outcome::NoDetect
    }

    /// Name used in CSV files.
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Plus => "plus",
            Outcome::Minus => "minus",
            Outcome::NoDetect => "none",
        }
    }

    pub fn from_name(name: &str) -> Option<Outcome> {
        match name {
            "plus" => Some(Outcome::Plus),
            "minus" => Some(Outcome::Minus),
            "none" => Some(Outcome::NoDetect),
            _ => None,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Outcome::Plus => "+",
            Outcome::Minus => "-",
            Outcome::NoDetect => "0",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// The six analyzer orientations: `a`, `a′`, `r` on side 1 and `b`, `b′`, `s` on side 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub a: Angle,
    pub a_prime: Angle,
    pub b: Angle,
    pub b_prime: Angle,
    pub r: Angle,
    pub s: Angle,
}

impl Settings {
    /// The reference orientations `(a, b) = (a, b′) = (a′, b) = 120°` and
    /// `(a′, b′) = 0°` modulo 180°, where the ratio inequality evaluates to
    /// `1 − 2.5F` (−1.5 at full visibility).
    pub fn reference() -> Self {
        Settings {
            a: Angle::from_degrees(0.0),
            a_prime: Angle::from_degrees(60.0),
            b: Angle::from_degrees(120.0),
            b_prime: Angle::from_degrees(60.0),
            r: Angle::ZERO,
            s: Angle::ZERO,
        }
    }

    /// Orientations minimizing the ratio inequality, `1 − 2√2·F`: the
    /// correlation block is the CHSH combination, so its optimum sits at
    /// differences of 112.5°, 67.5°, 67.5° and 22.5°.
    pub fn ratio_minimizer() -> Self {
        Settings {
            a: Angle::from_degrees(0.0),
            a_prime: Angle::from_degrees(45.0),
            b: Angle::from_degrees(112.5),
            b_prime: Angle::from_degrees(67.5),
            r: Angle::ZERO,
            s: Angle::ZERO,
        }
    }

    /// Adds `delta` to all six settings.
    pub fn rotated(&self, delta: Angle) -> Self {
        Settings {
            a: self.a + delta,
            a_prime: self.a_prime + delta,
            b: self.b + delta,
            b_prime: self.b_prime + delta,
            r: self.r + delta,
            s: self.s + delta,
        }
    }
}

/// Physical parameters of one experiment plus the analyzer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    /// Detector quantum efficiency η, in `(0, 1]`.
    pub eta: f64,
    pub geometry: DetectionGeometry,
    /// Polarization correlation visibility F, in `[0, 1]`.
    pub visibility: f64,
    pub settings: Settings,
    pub pairs_per_setting: u64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    /// η = 0.2, φ = 30°, θ = 180°, F = 1, reference settings, 10⁶ pairs per setting.
    fn default() -> Self {
        ExperimentConfig {
            eta: 0.2,
            geometry: DetectionGeometry::collinear(PI / 6.0).expect("30° aperture is valid"),
            visibility: 1.0,
            settings: Settings::reference(),
            pairs_per_setting: 1_000_000,
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    /// Checks the scalar invariants (η, F, N). Does not run the distribution sweep.
    pub fn check_parameters(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidConfig {
                field: "eta",
                reason: format!("must lie in (0, 1], got {}", self.eta),
            });
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::InvalidConfig {
                field: "visibility",
                reason: format!("must lie in [0, 1], got {}", self.visibility),
            });
        }
        if self.pairs_per_setting == 0 {
            return Err(Error::InvalidConfig {
                field: "pairs_per_setting",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Full validation: scalar invariants plus [`validate_distribution`].
    pub fn ensure_valid(&self) -> Result<()> {
        self.check_parameters()?;
        self.geometry.angular_correlation()?;
        match validate_distribution(self).failure {
            None => Ok(()),
            Some(f) => Err(f.into_error()),
        }
    }

    /// `K = η² (Ω/8π)² g(θ, φ)`, the common coincidence prefactor.
    pub fn coincidence_scale(&self) -> Result<f64> {
        let g = self.geometry.angular_correlation()?;
        let per_side = self.geometry.omega() / (8.0 * PI);
        Ok(self.eta * self.eta * per_side * per_side * g)
    }

    pub fn with_settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }
}

/// Probabilities per emitted pair of the four coincidence channels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoincidenceProbs {
    pub pp: f64,
    pub mm: f64,
    pub pm: f64,
    pub mp: f64,
}

impl CoincidenceProbs {
    /// `p⁺⁺ + p⁻⁻ − p⁺⁻ − p⁻⁺`.
    pub fn correlation(&self) -> f64 {
        self.pp + self.mm - self.pm - self.mp
    }

    /// Sum over the four coincidence channels.
    pub fn total(&self) -> f64 {
        self.pp + self.mm + self.pm + self.mp
    }

    pub fn get(&self, first: Outcome, second: Outcome) -> f64 {
        match (first, second) {
            (Outcome::Plus, Outcome::Plus) => self.pp,
            (Outcome::Minus, Outcome::Minus) => self.mm,
            (Outcome::Plus, Outcome::Minus) => self.pm,
            (Outcome::Minus, Outcome::Plus) => self.mp,
            _ => 0.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CoincidenceProbs {
            pp: self.pp * factor,
            mm: self.mm * factor,
            pm: self.pm * factor,
            mp: self.mp * factor,
        }
    }
}

/// Single-detector probability `η Ω / 8π`, the same for both channels and both sides.
pub fn singles_probability(config: &ExperimentConfig) -> Result<f64> {
    config.check_parameters()?;
    Ok(config.eta * config.geometry.omega() / (8.0 * PI))
}

/// Joint detection probabilities for side-1 setting `first` and side-2 setting `second`.
pub fn joint_probabilities(
    config: &ExperimentConfig,
    first: Angle,
    second: Angle,
) -> Result<CoincidenceProbs> {
    config.check_parameters()?;
    let k = config.coincidence_scale()?;
    let fc = config.visibility * first.cos2_diff(second);
    let same = k * (1.0 + fc);
    let opposite = k * (1.0 - fc);
    Ok(CoincidenceProbs {
        pp: same,
        mm: same,
        pm: opposite,
        mp: opposite,
    })
}

/// Unnormalized correlation `p⁺⁺ + p⁻⁻ − p⁺⁻ − p⁻⁺ = 4 K F cos 2(first − second)`.
pub fn correlation(config: &ExperimentConfig, first: Angle, second: Angle) -> Result<f64> {
    Ok(joint_probabilities(config, first, second)?.correlation())
}

/// Cells this close below zero are rounding residue and are set to zero.
const ROUNDING_TOL: f64 = 1e-15;

/// Joint distribution over `{+, −, ∅}²` for one emitted pair.
///
/// Cells are indexed `[side 1][side 2]` by [`Outcome::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDistribution {
    cells: [[f64; 3]; 3],
}

impl OutcomeDistribution {
    /// Completes coincidence probabilities and per-channel singles to all nine cells.
    ///
    /// One-sided cells take the marginal remainder, `p(x, ∅) = p_x − Σ_y p(x, y)`,
    /// and `p(∅, ∅)` absorbs what is left. A negative cell is an error, never clamped.
    pub fn from_marginals(
        singles_side1: [f64; 2],
        singles_side2: [f64; 2],
        coincidences: &CoincidenceProbs,
    ) -> Result<Self> {
        let mut cells = [[0.0; 3]; 3];
        for x in [Outcome::Plus, Outcome::Minus] {
            for y in [Outcome::Plus, Outcome::Minus] {
                cells[x.index()][y.index()] = coincidences.get(x, y);
            }
        }
        for x in [Outcome::Plus, Outcome::Minus] {
            let i = x.index();
            cells[i][2] = singles_side1[i] - cells[i][0] - cells[i][1];
            cells[2][i] = singles_side2[i] - cells[0][i] - cells[1][i];
        }
        let rest: f64 = cells.iter().flatten().sum();
        cells[2][2] = 1.0 - rest;

        for cell in cells.iter_mut().flatten() {
            // cancellation noise around an exact zero
            if *cell < 0.0 && *cell >= -ROUNDING_TOL {
                *cell = 0.0;
            }
        }
        let dist = OutcomeDistribution { cells };
        for (x, y, p) in dist.iter() {
            if p < 0.0 || !p.is_finite() {
                return Err(Error::InconsistentConfig {
                    cell: format!("p({x},{y})"),
                    value: p,
                    delta_deg: None,
                });
            }
        }
        Ok(dist)
    }

    pub fn get(&self, first: Outcome, second: Outcome) -> f64 {
        self.cells[first.index()][second.index()]
    }

    /// Cells in the fixed sampling order `++, +−, +∅, −+, −−, −∅, ∅+, ∅−, ∅∅`.
    pub fn iter(&self) -> impl Iterator<Item = (Outcome, Outcome, f64)> + '_ {
        Outcome::ALL.into_iter().flat_map(move |x| {
            Outcome::ALL
                .into_iter()
                .map(move |y| (x, y, self.cells[x.index()][y.index()]))
        })
    }

    pub fn to_array(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (slot, (_, _, p)) in out.iter_mut().zip(self.iter()) {
            *slot = p;
        }
        out
    }

    pub fn marginal_side1(&self, x: Outcome) -> f64 {
        self.cells[x.index()].iter().sum()
    }

    pub fn marginal_side2(&self, y: Outcome) -> f64 {
        self.cells.iter().map(|row| row[y.index()]).sum()
    }
}

/// Per-pair outcome distribution for side-1 setting `first` and side-2 setting `second`.
pub fn full_outcome_distribution(
    config: &ExperimentConfig,
    first: Angle,
    second: Angle,
) -> Result<OutcomeDistribution> {
    let single = singles_probability(config)?;
    let coinc = joint_probabilities(config, first, second)?;
    OutcomeDistribution::from_marginals([single; 2], [single; 2], &coinc).map_err(|e| match e {
        Error::InconsistentConfig { cell, value, .. } => Error::InconsistentConfig {
            cell,
            value,
            delta_deg: Some((first - second).degrees()),
        },
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationFailure {
    /// Setting difference at which the failure occurred, when it is setting-specific.
    pub delta_deg: Option<f64>,
    pub cell: Option<String>,
    pub reason: String,
}

impl ValidationFailure {
    fn into_error(self) -> Error {
        match self.cell {
            Some(cell) => Error::InconsistentConfig {
                cell,
                value: f64::NAN,
                delta_deg: self.delta_deg,
            },
            None => Error::InvalidConfig {
                field: "config",
                reason: self.reason,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    /// Number of setting differences checked.
    pub checked: usize,
    pub failure: Option<ValidationFailure>,
}

/// Builds the outcome distribution on a 1° grid of setting differences
/// (0° to 179°) and reports the first negative cell, if any.
pub fn validate_distribution(config: &ExperimentConfig) -> ValidationReport {
    if let Err(e) = config.check_parameters() {
        return ValidationReport {
            passed: false,
            checked: 0,
            failure: Some(ValidationFailure {
                delta_deg: None,
                cell: None,
                reason: e.to_string(),
            }),
        };
    }
    for (i, delta) in (0..180).enumerate() {
        let delta = f64::from(delta);
        match full_outcome_distribution(config, Angle::from_degrees(delta), Angle::ZERO) {
            Ok(_) => {}
            Err(e) => {
                let cell = match &e {
                    Error::InconsistentConfig { cell, .. } => Some(cell.clone()),
                    _ => None,
                };
                return ValidationReport {
                    passed: false,
                    checked: i + 1,
                    failure: Some(ValidationFailure {
                        delta_deg: Some(delta),
                        cell,
                        reason: e.to_string(),
                    }),
                };
            }
        }
    }
    ValidationReport {
        passed: true,
        checked: 180,
        failure: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn config(eta: f64, phi: f64, visibility: f64) -> ExperimentConfig {
        ExperimentConfig {
            eta,
            geometry: DetectionGeometry::collinear(phi).unwrap(),
            visibility,
            ..ExperimentConfig::default()
        }
    }

    fn deg(d: f64) -> Angle {
        Angle::from_degrees(d)
    }

    // Values below were computed with a 30-digit mpmath evaluation of the
    // closed-form chain Ω → g → K, independent of this module.
    const PP_ETA05_PHI60: f64 = 0.008_361_816_406_25;
    const P_PLUS_NONE_ETA02_PHI60: f64 = 0.023_662_109_375;

    #[test]
    fn singles_examples() {
        assert_abs_diff_eq!(
            singles_probability(&config(1.0, PI, 1.0)).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            singles_probability(&config(0.2, PI / 3.0, 1.0)).unwrap(),
            0.025,
            epsilon = 1e-15
        );
    }

    #[test]
    fn singles_do_not_depend_on_settings() {
        let mut c = config(0.2, PI / 6.0, 1.0);
        let before = singles_probability(&c).unwrap();
        c.settings.a = deg(17.0);
        c.settings.a_prime = deg(133.0);
        assert_eq!(before, singles_probability(&c).unwrap());
    }

    #[test]
    fn joint_probability_examples() {
        let c = config(0.3, PI / 5.0, 0.7);
        let p = joint_probabilities(&c, deg(45.0), deg(0.0)).unwrap();
        assert_abs_diff_eq!(p.pp, p.pm, epsilon = 1e-18);
        assert_abs_diff_eq!(p.mm, p.mp, epsilon = 1e-18);

        let p = joint_probabilities(&config(0.3, PI / 5.0, 1.0), deg(20.0), deg(20.0)).unwrap();
        assert_eq!(p.pm, 0.0);
        assert_eq!(p.mp, 0.0);

        let p = joint_probabilities(&config(0.5, PI / 3.0, 1.0), deg(0.0), deg(0.0)).unwrap();
        assert_abs_diff_eq!(p.pp, PP_ETA05_PHI60, epsilon = 1e-15);
    }

    #[test]
    fn joint_probabilities_reject_unsupported_geometry() {
        let mut c = config(0.2, PI / 6.0, 1.0);
        c.geometry = DetectionGeometry::new(PI / 2.0, PI / 6.0).unwrap();
        assert!(matches!(
            joint_probabilities(&c, deg(0.0), deg(0.0)),
            Err(Error::UnsupportedGeometry { .. })
        ));
    }

    #[test]
    fn outcome_distribution_examples() {
        let c = config(0.2, PI / 3.0, 1.0);
        let d = full_outcome_distribution(&c, deg(0.0), deg(0.0)).unwrap();
        assert_abs_diff_eq!(
            d.iter().map(|(_, _, p)| p).sum::<f64>(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            d.get(Outcome::Plus, Outcome::NoDetect),
            P_PLUS_NONE_ETA02_PHI60,
            epsilon = 1e-15
        );
    }

    #[test]
    fn full_aperture_unit_efficiency_is_marginally_consistent() {
        // g(π, π) = 1, so 2K equals the singles probability and the
        // one-sided cells vanish without going negative.
        let c = config(1.0, PI, 1.0);
        let d = full_outcome_distribution(&c, deg(0.0), deg(0.0)).unwrap();
        assert_eq!(d.get(Outcome::Plus, Outcome::NoDetect), 0.0);
        assert!(validate_distribution(&c).passed);
    }

    #[test]
    fn negative_cells_are_reported_not_clamped() {
        let coinc = CoincidenceProbs {
            pp: 0.4,
            mm: 0.4,
            pm: 0.0,
            mp: 0.0,
        };
        let err = OutcomeDistribution::from_marginals([0.3, 0.5], [0.5, 0.5], &coinc).unwrap_err();
        match err {
            Error::InconsistentConfig { cell, value, .. } => {
                assert_eq!(cell, "p(+,0)");
                assert_abs_diff_eq!(value, -0.1, epsilon = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn correlation_examples() {
        let c = config(0.5, PI / 3.0, 1.0);
        assert_abs_diff_eq!(
            correlation(&c, deg(45.0), deg(0.0)).unwrap(),
            0.0,
            epsilon = 1e-17
        );
        assert_eq!(
            correlation(&config(0.5, PI / 3.0, 0.0), deg(0.0), deg(0.0)).unwrap(),
            0.0
        );
        // −2K with K = PP_ETA05_PHI60 / 2
        assert_abs_diff_eq!(
            correlation(&c, deg(120.0), deg(0.0)).unwrap(),
            -PP_ETA05_PHI60,
            epsilon = 1e-15
        );
    }

    #[test]
    fn validation_examples() {
        assert!(validate_distribution(&config(0.2, PI / 3.0, 1.0)).passed);
        assert!(validate_distribution(&config(1e-6, PI / 3.0, 1.0)).passed);
        let d =
            full_outcome_distribution(&config(1e-6, PI / 3.0, 1.0), deg(0.0), deg(0.0)).unwrap();
        assert!(d.get(Outcome::NoDetect, Outcome::NoDetect) > 1.0 - 1e-6);

        let bad = ExperimentConfig {
            eta: 1.5,
            ..ExperimentConfig::default()
        };
        let report = validate_distribution(&bad);
        assert!(!report.passed);
        assert!(report.failure.unwrap().reason.contains("eta"));
        assert!(bad.ensure_valid().is_err());

        let off_slice = ExperimentConfig {
            geometry: DetectionGeometry::from_degrees(90.0, 30.0).unwrap(),
            ..ExperimentConfig::default()
        };
        let report = validate_distribution(&off_slice);
        assert!(!report.passed);
        assert_eq!(report.failure.unwrap().delta_deg, Some(0.0));
    }

    #[test]
    fn parameter_checks() {
        let c = ExperimentConfig {
            pairs_per_setting: 0,
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            c.check_parameters(),
            Err(Error::InvalidConfig {
                field: "pairs_per_setting",
                ..
            })
        ));
        let c = ExperimentConfig {
            visibility: -0.1,
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            c.check_parameters(),
            Err(Error::InvalidConfig {
                field: "visibility",
                ..
            })
        ));
        let c = ExperimentConfig {
            eta: 0.0,
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            c.check_parameters(),
            Err(Error::InvalidConfig { field: "eta", .. })
        ));
    }

    #[test]
    fn pm_decreases_with_visibility() {
        let mut last = f64::INFINITY;
        for i in 0..=10 {
            let f = f64::from(i) / 10.0;
            let pm = joint_probabilities(&config(0.2, PI / 6.0, f), deg(10.0), deg(10.0))
                .unwrap()
                .pm;
            assert!(pm < last);
            last = pm;
        }
        assert_eq!(last, 0.0);
    }

    proptest! {
        #[test]
        fn symmetric_and_rotation_invariant(
            eta in 0.01..1.0f64, phi in 0.0..PI, f in 0.0..=1.0f64,
            a in -360.0..360.0f64, b in -360.0..360.0f64, delta in -360.0..360.0f64,
        ) {
            let c = config(eta, phi, f);
            let p = joint_probabilities(&c, deg(a), deg(b)).unwrap();
            prop_assert_eq!(p.pp, p.mm);
            prop_assert_eq!(p.pm, p.mp);
            let q = joint_probabilities(&c, deg(a + delta), deg(b + delta)).unwrap();
            prop_assert!((p.pp - q.pp).abs() < 1e-12);
            prop_assert!((p.pm - q.pm).abs() < 1e-12);
        }

        #[test]
        fn nine_cells_normalize_and_match_marginals(
            eta in 0.01..1.0f64, phi in 0.0..PI, f in 0.0..=1.0f64,
            a in 0.0..180.0f64, b in 0.0..180.0f64,
        ) {
            let c = config(eta, phi, f);
            let d = full_outcome_distribution(&c, deg(a), deg(b)).unwrap();
            let single = singles_probability(&c).unwrap();
            prop_assert!((d.iter().map(|(_, _, p)| p).sum::<f64>() - 1.0).abs() < 1e-12);
            for (_, _, p) in d.iter() {
                prop_assert!(p >= 0.0);
            }
            for x in [Outcome::Plus, Outcome::Minus] {
                prop_assert!((d.marginal_side1(x) - single).abs() < 1e-12);
                prop_assert!((d.marginal_side2(x) - single).abs() < 1e-12);
            }
        }
    }
}
