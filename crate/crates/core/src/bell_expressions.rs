//! Evaluators for the two-channel inequalities: the singles form (bound −1,
//! needs the emission count), the ratio form (bound −1, emission count
//! cancels) and its counts version, plus the CHSH value for comparison.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Angle;
use crate::qm_model::{self, CoincidenceProbs, ExperimentConfig, Outcome, Settings};

/// Absolute tolerance of the violation flag.
pub const VIOLATION_TOL: f64 = 1e-12;

/// Local-realistic lower bound shared by both inequalities.
pub const LOCAL_BOUND: f64 = -1.0;

/// Classical bound on |S| for CHSH.
pub const CHSH_BOUND: f64 = 2.0;

/// The seven setting pairs the inequalities need. The first slot is always
/// side 1 (`a`, `a′`, `r`) and the second side 2 (`b`, `b′`, `s`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingPair {
    #[serde(rename = "a_b")]
    AB,
    #[serde(rename = "a_bprime")]
    ABPrime,
    #[serde(rename = "aprime_b")]
    APrimeB,
    #[serde(rename = "aprime_bprime")]
    APrimeBPrime,
    #[serde(rename = "aprime_s")]
    APrimeS,
    #[serde(rename = "r_bprime")]
    RBPrime,
    #[serde(rename = "r_s")]
    RS,
}

/// Which local setting a side uses within a [`SettingPair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalSetting {
    /// `a` or `b`
    First,
    /// `a′` or `b′`
    Second,
    /// `r` or `s`
    Reference,
}

impl SettingPair {
    pub const ALL: [SettingPair; 7] = [
        SettingPair::AB,
        SettingPair::ABPrime,
        SettingPair::APrimeB,
        SettingPair::APrimeBPrime,
        SettingPair::APrimeS,
        SettingPair::RBPrime,
        SettingPair::RS,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SettingPair::AB => "a_b",
            SettingPair::ABPrime => "a_bprime",
            SettingPair::APrimeB => "aprime_b",
            SettingPair::APrimeBPrime => "aprime_bprime",
            SettingPair::APrimeS => "aprime_s",
            SettingPair::RBPrime => "r_bprime",
            SettingPair::RS => "r_s",
        }
    }

    pub fn from_name(name: &str) -> Option<SettingPair> {
        SettingPair::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn local_settings(self) -> (LocalSetting, LocalSetting) {
        use LocalSetting::*;
        match self {
            SettingPair::AB => (First, First),
            SettingPair::ABPrime => (First, Second),
            SettingPair::APrimeB => (Second, First),
            SettingPair::APrimeBPrime => (Second, Second),
            SettingPair::APrimeS => (Second, Reference),
            SettingPair::RBPrime => (Reference, Second),
            SettingPair::RS => (Reference, Reference),
        }
    }

    pub fn angles(self, settings: &Settings) -> (Angle, Angle) {
        let (l1, l2) = self.local_settings();
        let first = match l1 {
            LocalSetting::First => settings.a,
            LocalSetting::Second => settings.a_prime,
            LocalSetting::Reference => settings.r,
        };
        let second = match l2 {
            LocalSetting::First => settings.b,
            LocalSetting::Second => settings.b_prime,
            LocalSetting::Reference => settings.s,
        };
        (first, second)
    }
}

impl fmt::Display for SettingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Single-detector probabilities of the `+` and `−` channels at one setting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelSingles {
    pub plus: f64,
    pub minus: f64,
}

impl ChannelSingles {
    pub fn total(&self) -> f64 {
        self.plus + self.minus
    }
}

/// Probabilities entering the inequalities, keyed by setting pair.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbabilityBundle {
    pub coincidences: BTreeMap<SettingPair, CoincidenceProbs>,
    pub singles_a_prime: Option<ChannelSingles>,
    pub singles_b_prime: Option<ChannelSingles>,
}

impl ProbabilityBundle {
    pub fn coincidence(&self, pair: SettingPair) -> Result<&CoincidenceProbs> {
        self.coincidences
            .get(&pair)
            .ok_or_else(|| Error::IncompleteBundle(format!("coincidences for ({pair})")))
    }

    /// Multiplies every probability by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |s: &ChannelSingles| ChannelSingles {
            plus: s.plus * factor,
            minus: s.minus * factor,
        };
        ProbabilityBundle {
            coincidences: self
                .coincidences
                .iter()
                .map(|(k, v)| (*k, v.scaled(factor)))
                .collect(),
            singles_a_prime: self.singles_a_prime.as_ref().map(scale),
            singles_b_prime: self.singles_b_prime.as_ref().map(scale),
        }
    }

    /// Adds `weight · other` into `self`, entry by entry. Missing entries count as zero.
    pub fn accumulate(&mut self, other: &ProbabilityBundle, weight: f64) {
        for (pair, p) in &other.coincidences {
            let slot = self.coincidences.entry(*pair).or_default();
            slot.pp += weight * p.pp;
            slot.mm += weight * p.mm;
            slot.pm += weight * p.pm;
            slot.mp += weight * p.mp;
        }
        let add = |dst: &mut Option<ChannelSingles>, src: &Option<ChannelSingles>| {
            if let Some(s) = src {
                let d = dst.get_or_insert_with(ChannelSingles::default);
                d.plus += weight * s.plus;
                d.minus += weight * s.minus;
            }
        };
        add(&mut self.singles_a_prime, &other.singles_a_prime);
        add(&mut self.singles_b_prime, &other.singles_b_prime);
    }
}

/// Quantum-mechanical bundle for the configured settings.
pub fn qm_bundle(config: &ExperimentConfig) -> Result<ProbabilityBundle> {
    let mut coincidences = BTreeMap::new();
    for pair in SettingPair::ALL {
        let (first, second) = pair.angles(&config.settings);
        coincidences.insert(pair, qm_model::joint_probabilities(config, first, second)?);
    }
    let single = qm_model::singles_probability(config)?;
    let singles = ChannelSingles {
        plus: single,
        minus: single,
    };
    Ok(ProbabilityBundle {
        coincidences,
        singles_a_prime: Some(singles),
        singles_b_prime: Some(singles),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellValue {
    pub value: f64,
    pub bound: f64,
    pub violated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

impl BellValue {
    pub fn against_local_bound(value: f64) -> Self {
        BellValue {
            value,
            bound: LOCAL_BOUND,
            violated: value < LOCAL_BOUND - VIOLATION_TOL,
            std_error: None,
        }
    }
}

/// Correlation terms shared by both inequalities:
/// `E(a,b) + E(a,b′) + E(a′,b) − 2p⁺⁺(a′,b′) − 2p⁻⁻(a′,b′)`.
fn correlation_block(bundle: &ProbabilityBundle) -> Result<f64> {
    let ab = bundle.coincidence(SettingPair::AB)?;
    let abp = bundle.coincidence(SettingPair::ABPrime)?;
    let apb = bundle.coincidence(SettingPair::APrimeB)?;
    let apbp = bundle.coincidence(SettingPair::APrimeBPrime)?;
    Ok(ab.correlation() + abp.correlation() + apb.correlation() - 2.0 * apbp.pp - 2.0 * apbp.mm)
}

/// Left-hand side of the singles-based inequality (bound −1).
pub fn expression22_lhs(bundle: &ProbabilityBundle) -> Result<BellValue> {
    let block = correlation_block(bundle)?;
    let sa = bundle
        .singles_a_prime
        .ok_or_else(|| Error::IncompleteBundle("singles for a′".into()))?;
    let sb = bundle
        .singles_b_prime
        .ok_or_else(|| Error::IncompleteBundle("singles for b′".into()))?;
    Ok(BellValue::against_local_bound(
        block + sa.total() + sb.total(),
    ))
}

/// Numerator and denominator of the ratio inequality.
///
/// The numerator is the correlation block plus the four-channel coincidence
/// sums at `(a′, s)` and `(r, b′)`; the denominator is the four-channel sum at
/// `(r, s)`. The ratio bounded below by −1 is `numerator / denominator`.
pub fn ratio_terms(bundle: &ProbabilityBundle) -> Result<(f64, f64)> {
    let block = correlation_block(bundle)?;
    let aps = bundle.coincidence(SettingPair::APrimeS)?.total();
    let rbp = bundle.coincidence(SettingPair::RBPrime)?.total();
    let rs = bundle.coincidence(SettingPair::RS)?.total();
    Ok((block + aps + rbp, rs))
}

/// Left-hand side of the ratio inequality. The whole sum is divided by the
/// `(r, s)` coincidence total, so the emission count cancels.
pub fn ratio_lhs(bundle: &ProbabilityBundle) -> Result<BellValue> {
    let (num, den) = ratio_terms(bundle)?;
    if den <= 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(BellValue::against_local_bound(num / den))
}

/// Integer numerator and denominator of the counts form.
pub fn counts_terms(counts: &crate::simulator::CountsTable) -> (i128, i128) {
    let c = |pair, x, y| i128::from(counts.count(pair, x, y));
    let corr = |pair| {
        c(pair, Outcome::Plus, Outcome::Plus) + c(pair, Outcome::Minus, Outcome::Minus)
            - c(pair, Outcome::Plus, Outcome::Minus)
            - c(pair, Outcome::Minus, Outcome::Plus)
    };
    let total = |pair| {
        c(pair, Outcome::Plus, Outcome::Plus)
            + c(pair, Outcome::Minus, Outcome::Minus)
            + c(pair, Outcome::Plus, Outcome::Minus)
            + c(pair, Outcome::Minus, Outcome::Plus)
    };
    let apbp = SettingPair::APrimeBPrime;
    let num = corr(SettingPair::AB) + corr(SettingPair::ABPrime) + corr(SettingPair::APrimeB)
        - 2 * c(apbp, Outcome::Plus, Outcome::Plus)
        - 2 * c(apbp, Outcome::Minus, Outcome::Minus)
        + total(SettingPair::APrimeS)
        + total(SettingPair::RBPrime);
    (num, total(SettingPair::RS))
}

/// The ratio inequality evaluated on detection counts. `std_error` is left
/// empty; [`crate::simulator::estimate_statistic`] attaches a bootstrap one.
pub fn counts_statistic(counts: &crate::simulator::CountsTable) -> Result<BellValue> {
    let (num, den) = counts_terms(counts);
    if den == 0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(BellValue::against_local_bound(num as f64 / den as f64))
}

/// CHSH value `S = Ē(a,b) − Ē(a,b′) + Ē(a′,b) + Ē(a′,b′)` with the normalized
/// correlation `Ē = F cos 2Δ`.
pub fn chsh_value(
    config: &ExperimentConfig,
    a: Angle,
    a_prime: Angle,
    b: Angle,
    b_prime: Angle,
) -> f64 {
    let e = |x: Angle, y: Angle| config.visibility * x.cos2_diff(y);
    e(a, b) - e(a, b_prime) + e(a_prime, b) + e(a_prime, b_prime)
}

/// Margin `factor − 1` of a violation by `factor` relative to the
/// CHSH-family margin `√2 − 1`.
pub fn margin_ratio(factor: f64) -> f64 {
    (factor - 1.0) / (std::f64::consts::SQRT_2 - 1.0)
}

/// [`margin_ratio`] of the factor 1.5 reached at the reference settings.
pub fn violation_margin_ratio() -> f64 {
    margin_ratio(1.5)
}
