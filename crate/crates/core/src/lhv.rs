//! Local-realist side of the argument.
//!
//! The bound −1 on both inequalities rests on an algebraic lemma: for
//! `0 ≤ x ≤ U` and `0 ≤ y ≤ V` the 19-term bilinear form `Z` is non-negative.
//! This module evaluates `Z`, minimizes it over the x-box both by the
//! eight-case closed form and by a grid oracle, samples it at random, and
//! certifies the bounds by sweeping every deterministic local strategy.
//!
//! Deterministic strategies suffice: numerator and denominator of each
//! inequality are affine in every per-λ response probability, so extremes
//! over the response box and over mixtures occur at 0/1 vertices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell_expressions::{
    self, BellValue, ChannelSingles, LocalSetting, ProbabilityBundle, SettingPair, LOCAL_BOUND,
    VIOLATION_TOL,
};
use crate::error::{Error, Result};
use crate::qm_model::{CoincidenceProbs, Outcome};
use crate::rng::{CounterRng, THEOREM_GRID_STREAM, THEOREM_STREAM};

/// Tolerance for a sampled `Z` to count as negative.
pub const Z_TOL: f64 = 1e-12;

/// Ten non-negative reals of the lemma.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TheoremInstance {
    pub x1p: f64,
    pub x1m: f64,
    pub x2p: f64,
    pub x2m: f64,
    pub y1p: f64,
    pub y1m: f64,
    pub y2p: f64,
    pub y2m: f64,
    pub u: f64,
    pub v: f64,
}

fn check_box(name: &str, value: f64, upper: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 || value > upper {
        return Err(Error::InvalidInstance(format!(
            "{name} = {value} must lie in [0, {upper}]"
        )));
    }
    Ok(())
}

impl TheoremInstance {
    pub fn validate(&self) -> Result<()> {
        check_box("U", self.u, f64::INFINITY)?;
        check_box("V", self.v, f64::INFINITY)?;
        for (name, x) in [
            ("x1+", self.x1p),
            ("x1-", self.x1m),
            ("x2+", self.x2p),
            ("x2-", self.x2m),
        ] {
            check_box(name, x, self.u)?;
        }
        for (name, y) in [
            ("y1+", self.y1p),
            ("y1-", self.y1m),
            ("y2+", self.y2p),
            ("y2-", self.y2m),
        ] {
            check_box(name, y, self.v)?;
        }
        Ok(())
    }

    pub fn with_x(ys: &TheoremYs, x: &XAssignment) -> Self {
        TheoremInstance {
            x1p: x.x1p,
            x1m: x.x1m,
            x2p: x.x2p,
            x2m: x.x2m,
            y1p: ys.y1p,
            y1m: ys.y1m,
            y2p: ys.y2p,
            y2m: ys.y2m,
            u: ys.u,
            v: ys.v,
        }
    }
}

/// The 19-term form, term by term in its original order.
fn z_unchecked(t: &TheoremInstance) -> f64 {
    t.x1p * t.y1p + t.x1m * t.y1m - t.x1p * t.y1m - t.x1m * t.y1p + t.x1p * t.y2p + t.x1m * t.y2m
        - t.x1p * t.y2m
        - t.x1m * t.y2p
        + t.x2p * t.y1p
        + t.x2m * t.y1m
        - t.x2p * t.y1m
        - t.x2m * t.y1p
        - 2.0 * t.x2p * t.y2p
        - 2.0 * t.x2m * t.y2m
        + t.v * t.x2p
        + t.v * t.x2m
        + t.u * t.y2p
        + t.u * t.y2m
        + t.u * t.v
}

pub fn z_value(inst: &TheoremInstance) -> Result<f64> {
    inst.validate()?;
    Ok(z_unchecked(inst))
}

/// The side-2 values and box bounds over which `Z` is minimized in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TheoremYs {
    pub y1p: f64,
    pub y1m: f64,
    pub y2p: f64,
    pub y2m: f64,
    pub u: f64,
    pub v: f64,
}

impl TheoremYs {
    pub fn validate(&self) -> Result<()> {
        TheoremInstance::with_x(self, &XAssignment::default()).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct XAssignment {
    pub x1p: f64,
    pub x1m: f64,
    pub x2p: f64,
    pub x2m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseMinimum {
    pub value: f64,
    pub argmin: XAssignment,
    /// Case 1–8, numbered by which of the three coefficients are negative.
    pub case_id: u8,
}

/// Case id from the signs of the coefficients of `x2⁺`, `x2⁻` and `x1⁺ − x1⁻`.
fn case_id(c1_neg: bool, c2_neg: bool, c3_neg: bool) -> u8 {
    match (c1_neg, c2_neg, c3_neg) {
        (false, false, false) => 1,
        (true, false, false) => 2,
        (false, true, false) => 3,
        (false, false, true) => 4,
        (true, true, false) => 5,
        (true, false, true) => 6,
        (false, true, true) => 7,
        (true, true, true) => 8,
    }
}

/// Closed-form minimum of each case.
fn case_minimum(case: u8, ys: &TheoremYs) -> f64 {
    let a = ys.y1p - ys.y1m;
    let (u, v, y2p, y2m) = (ys.u, ys.v, ys.y2p, ys.y2m);
    match case {
        1 => u * (-a + 2.0 * y2m + v),
        2 => 2.0 * u * (v + y2m - y2p),
        3 => 2.0 * u * (v - a),
        4 => u * (a + 2.0 * y2p + v),
        5 => u * (-2.0 * y2p - a + 3.0 * v),
        6 => 2.0 * u * (a + v),
        7 => 2.0 * u * (y2p - y2m + v),
        8 => u * (-2.0 * y2m + a + 3.0 * v),
        _ => unreachable!("case ids run 1..=8"),
    }
}

/// Minimizes `Z` over the x-box analytically.
///
/// Writing `A = y1⁺ − y1⁻`, `Z` is affine in `x2⁺`, `x2⁻` and `x1⁺ − x1⁻` with
/// coefficients `−2y2⁺ + A + V`, `−2y2⁻ − A + V` and `A + y2⁺ − y2⁻`. Each is
/// pushed to the end of its range that its sign prefers, giving eight cases.
/// A coefficient that is exactly zero makes both ends optimal; all such cases
/// are evaluated and the smallest (then lowest id) is returned.
pub fn z_min_analytic(ys: &TheoremYs) -> Result<CaseMinimum> {
    ys.validate()?;
    let a = ys.y1p - ys.y1m;
    let coefficients = [
        -2.0 * ys.y2p + a + ys.v,
        -2.0 * ys.y2m - a + ys.v,
        a + ys.y2p - ys.y2m,
    ];
    let branches = |c: f64| -> &'static [bool] {
        if c < 0.0 {
            &[true]
        } else if c > 0.0 {
            &[false]
        } else {
            &[false, true]
        }
    };

    let mut best: Option<CaseMinimum> = None;
    for &n1 in branches(coefficients[0]) {
        for &n2 in branches(coefficients[1]) {
            for &n3 in branches(coefficients[2]) {
                let id = case_id(n1, n2, n3);
                let pick = |neg: bool| if neg { ys.u } else { 0.0 };
                let (x1p, x1m) = if n3 { (ys.u, 0.0) } else { (0.0, ys.u) };
                let candidate = CaseMinimum {
                    value: case_minimum(id, ys),
                    argmin: XAssignment {
                        x1p,
                        x1m,
                        x2p: pick(n1),
                        x2m: pick(n2),
                    },
                    case_id: id,
                };
                let better = match &best {
                    None => true,
                    Some(b) => (candidate.value, candidate.case_id) < (b.value, b.case_id),
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
    }
    Ok(best.expect("at least one case applies"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMinimum {
    pub value: f64,
    pub argmin: XAssignment,
    pub points: usize,
}

fn axis(upper: f64, step: f64) -> Vec<f64> {
    let mut values = Vec::new();
    let mut k = 0u64;
    loop {
        let x = k as f64 * step;
        if x >= upper - 1e-15 * upper.max(1.0) {
            break;
        }
        values.push(x);
        k += 1;
    }
    // upper end is always a grid point, so the 16 box corners are covered
    values.push(upper);
    values
}

/// Grid oracle for [`z_min_analytic`]: evaluates `Z` on `{0, step, …, U}⁴`
/// (the endpoint `U` always included). `Z` is affine in each `x` separately,
/// so the box corners already contain the exact minimum.
pub fn z_min_bruteforce(ys: &TheoremYs, grid_step: f64) -> Result<GridMinimum> {
    ys.validate()?;
    if grid_step <= 0.0 || !grid_step.is_finite() {
        return Err(Error::InvalidInput(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let values = axis(ys.u, grid_step);
    let mut best = GridMinimum {
        value: f64::INFINITY,
        argmin: XAssignment::default(),
        points: 0,
    };
    for &x1p in &values {
        for &x1m in &values {
            for &x2p in &values {
                for &x2m in &values {
                    let x = XAssignment { x1p, x1m, x2p, x2m };
                    let z = z_unchecked(&TheoremInstance::with_x(ys, &x));
                    best.points += 1;
                    if z < best.value {
                        best.value = z;
                        best.argmin = x;
                    }
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremReport {
    pub samples: u64,
    pub seed: u64,
    /// Samples with `Z < −1e−12`.
    pub violations: u64,
    pub min_z: f64,
    pub min_index: u64,
    pub min_instance: TheoremInstance,
    pub passed: bool,
}

const DRAWS_PER_SAMPLE: u64 = 10;
const THEOREM_SHARD: u64 = 1 << 14;

fn sample_instance(rng: &mut CounterRng) -> TheoremInstance {
    // (0, 1] for the box bounds
    let u = 1.0 - rng.uniform();
    let v = 1.0 - rng.uniform();
    TheoremInstance {
        u,
        v,
        x1p: u * rng.uniform(),
        x1m: u * rng.uniform(),
        x2p: u * rng.uniform(),
        x2m: u * rng.uniform(),
        y1p: v * rng.uniform(),
        y1m: v * rng.uniform(),
        y2p: v * rng.uniform(),
        y2m: v * rng.uniform(),
    }
}

/// Random instance number `index` of the theorem sampler.
pub fn theorem_sample(seed: u64, index: u64) -> TheoremInstance {
    sample_instance(&mut CounterRng::at(
        seed,
        THEOREM_STREAM,
        index * DRAWS_PER_SAMPLE,
    ))
}

/// Samples `U, V ∈ (0, 1]`, `x ∈ [0, U]`, `y ∈ [0, V]` uniformly and checks `Z ≥ −1e−12`.
pub fn verify_theorem(samples: u64, seed: u64) -> Result<TheoremReport> {
    verify_theorem_sharded(samples, seed, THEOREM_SHARD)
}

/// [`verify_theorem`] with an explicit shard length. The report does not
/// depend on `shard_len` or on the number of worker threads.
pub fn verify_theorem_sharded(samples: u64, seed: u64, shard_len: u64) -> Result<TheoremReport> {
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be at least 1".into()));
    }
    if shard_len == 0 {
        return Err(Error::InvalidInput(
            "shard length must be at least 1".into(),
        ));
    }
    let shards = samples.div_ceil(shard_len);
    let (violations, min_z, min_index, min_instance) = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let start = shard * shard_len;
            let end = (start + shard_len).min(samples);
            let mut rng = CounterRng::at(seed, THEOREM_STREAM, start * DRAWS_PER_SAMPLE);
            let mut violations = 0u64;
            let mut best = (f64::INFINITY, u64::MAX, TheoremInstance::default());
            for index in start..end {
                let inst = sample_instance(&mut rng);
                let z = z_unchecked(&inst);
                if z < -Z_TOL {
                    violations += 1;
                }
                if z < best.0 {
                    best = (z, index, inst);
                }
            }
            (violations, best.0, best.1, best.2)
        })
        .reduce(
            || (0, f64::INFINITY, u64::MAX, TheoremInstance::default()),
            |l, r| {
                let v = l.0 + r.0;
                // ties resolved by sample index so the reduction order is irrelevant
                if (r.1, r.2) < (l.1, l.2) {
                    (v, r.1, r.2, r.3)
                } else {
                    (v, l.1, l.2, l.3)
                }
            },
        );
    Ok(TheoremReport {
        samples,
        seed,
        violations,
        min_z,
        min_index,
        min_instance,
        passed: violations == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CornerReport {
    /// Points of `{0, 1}¹⁰` enumerated.
    pub enumerated: u32,
    /// Points satisfying the lemma's hypotheses `x ≤ U`, `y ≤ V`.
    pub admissible: u32,
    /// Admissible points with `U = V = 1`.
    pub unit_box: u32,
    pub violations: u32,
    pub min_z: f64,
}

/// Evaluates `Z` exactly at every 0/1 point of the ten variables.
pub fn verify_corners() -> CornerReport {
    let mut report = CornerReport {
        enumerated: 0,
        admissible: 0,
        unit_box: 0,
        violations: 0,
        min_z: f64::INFINITY,
    };
    for bits in 0u32..1024 {
        let b = |i: u32| f64::from((bits >> i) & 1);
        let inst = TheoremInstance {
            x1p: b(0),
            x1m: b(1),
            x2p: b(2),
            x2m: b(3),
            y1p: b(4),
            y1m: b(5),
            y2p: b(6),
            y2m: b(7),
            u: b(8),
            v: b(9),
        };
        report.enumerated += 1;
        if inst.validate().is_err() {
            continue;
        }
        report.admissible += 1;
        if inst.u == 1.0 && inst.v == 1.0 {
            report.unit_box += 1;
        }
        let z = z_unchecked(&inst);
        if z < 0.0 {
            report.violations += 1;
        }
        report.min_z = report.min_z.min(z);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCheckReport {
    pub instances: u64,
    pub grid_step: f64,
    pub max_abs_diff: f64,
    pub worst: TheoremYs,
    /// Largest violation of the closed form's own consistency: the case
    /// minimum must equal `Z` at the returned assignment.
    pub max_assignment_gap: f64,
    pub min_value: f64,
    pub case_histogram: [u64; 8],
}

/// Random `(y, U, V)` draw `index` for the minimizer cross-check. Every fourth
/// draw snaps the y's to `{0, V/2, V}` so that case boundaries are exercised.
pub fn cross_check_sample(seed: u64, index: u64) -> TheoremYs {
    let mut rng = CounterRng::at(seed, THEOREM_GRID_STREAM, index * 6);
    let u = 1.0 - rng.uniform();
    let v = 1.0 - rng.uniform();
    let mut ys = [0.0; 4];
    for y in &mut ys {
        let w = rng.uniform();
        *y = if index % 4 == 3 {
            v * (2.0 * w).floor() / 2.0
        } else {
            v * w
        };
    }
    TheoremYs {
        y1p: ys[0],
        y1m: ys[1],
        y2p: ys[2],
        y2m: ys[3],
        u,
        v,
    }
}

/// Compares [`z_min_analytic`] against [`z_min_bruteforce`] on `instances` draws.
pub fn cross_check_minimizers(
    instances: u64,
    seed: u64,
    grid_step: f64,
) -> Result<CrossCheckReport> {
    let results: Vec<(TheoremYs, CaseMinimum, GridMinimum)> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let ys = cross_check_sample(seed, i);
            Ok((ys, z_min_analytic(&ys)?, z_min_bruteforce(&ys, grid_step)?))
        })
        .collect::<Result<_>>()?;
    let mut report = CrossCheckReport {
        instances,
        grid_step,
        max_abs_diff: 0.0,
        worst: TheoremYs::default(),
        max_assignment_gap: 0.0,
        min_value: f64::INFINITY,
        case_histogram: [0; 8],
    };
    for (ys, analytic, grid) in results {
        let diff = (analytic.value - grid.value).abs();
        if diff > report.max_abs_diff {
            report.max_abs_diff = diff;
            report.worst = ys;
        }
        let at_argmin = z_unchecked(&TheoremInstance::with_x(&ys, &analytic.argmin));
        report.max_assignment_gap = report
            .max_assignment_gap
            .max((at_argmin - analytic.value).abs());
        report.min_value = report.min_value.min(analytic.value);
        report.case_histogram[usize::from(analytic.case_id - 1)] += 1;
    }
    Ok(report)
}

/// Responses of one side at its three settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalResponse {
    /// Response at `a` (side 1) or `b` (side 2).
    pub first: Outcome,
    /// Response at `a′` or `b′`.
    pub second: Outcome,
    /// Response at `r` or `s`.
    pub reference: Outcome,
}

impl LocalResponse {
    pub fn new(first: Outcome, second: Outcome, reference: Outcome) -> Self {
        LocalResponse {
            first,
            second,
            reference,
        }
    }

    /// Deterministic form of the supplementary assumption: a side that stays
    /// silent at its reference setting stays silent at every setting.
    pub fn satisfies_constraint(&self) -> bool {
        self.reference.is_detection() || (!self.first.is_detection() && !self.second.is_detection())
    }

    pub fn outcome(&self, setting: LocalSetting) -> Outcome {
        match setting {
            LocalSetting::First => self.first,
            LocalSetting::Second => self.second,
            LocalSetting::Reference => self.reference,
        }
    }

    /// `p^outcome(setting | λ)`, an indicator for a deterministic response.
    pub fn probability(&self, setting: LocalSetting, outcome: Outcome) -> f64 {
        if self.outcome(setting) == outcome {
            1.0
        } else {
            0.0
        }
    }

    /// All 19 responses allowed by the constraint, in canonical order.
    pub fn enumerate() -> Vec<LocalResponse> {
        let mut out = Vec::with_capacity(19);
        for first in Outcome::ALL {
            for second in Outcome::ALL {
                for reference in Outcome::ALL {
                    let r = LocalResponse {
                        first,
                        second,
                        reference,
                    };
                    if r.satisfies_constraint() {
                        out.push(r);
                    }
                }
            }
        }
        out
    }
}

/// A deterministic local hidden-variable assignment. The response of each side
/// is a function of its own setting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeterministicStrategy {
    pub side1: LocalResponse,
    pub side2: LocalResponse,
}

impl DeterministicStrategy {
    pub fn new(side1: LocalResponse, side2: LocalResponse) -> Result<Self> {
        let s = DeterministicStrategy { side1, side2 };
        if !s.satisfies_constraint() {
            return Err(Error::InvalidInput(format!(
                "strategy {s:?} violates the supplementary assumption"
            )));
        }
        Ok(s)
    }

    pub fn satisfies_constraint(&self) -> bool {
        self.side1.satisfies_constraint() && self.side2.satisfies_constraint()
    }

    /// Joint per-λ probability: the product of the two local indicators.
    pub fn joint_probability(&self, pair: SettingPair, x: Outcome, y: Outcome) -> f64 {
        let (l1, l2) = pair.local_settings();
        self.side1.probability(l1, x) * self.side2.probability(l2, y)
    }

    pub fn bundle(&self) -> ProbabilityBundle {
        let mut bundle = ProbabilityBundle::default();
        for pair in SettingPair::ALL {
            let p = |x, y| self.joint_probability(pair, x, y);
            bundle.coincidences.insert(
                pair,
                CoincidenceProbs {
                    pp: p(Outcome::Plus, Outcome::Plus),
                    mm: p(Outcome::Minus, Outcome::Minus),
                    pm: p(Outcome::Plus, Outcome::Minus),
                    mp: p(Outcome::Minus, Outcome::Plus),
                },
            );
        }
        let singles = |r: &LocalResponse| ChannelSingles {
            plus: r.probability(LocalSetting::Second, Outcome::Plus),
            minus: r.probability(LocalSetting::Second, Outcome::Minus),
        };
        bundle.singles_a_prime = Some(singles(&self.side1));
        bundle.singles_b_prime = Some(singles(&self.side2));
        bundle
    }
}

#[derive(Serialize)]
struct Side1Json {
    a: Outcome,
    a_prime: Outcome,
    r: Outcome,
}

#[derive(Serialize)]
struct Side2Json {
    b: Outcome,
    b_prime: Outcome,
    s: Outcome,
}

impl Serialize for DeterministicStrategy {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("DeterministicStrategy", 2)?;
        st.serialize_field(
            "side1",
            &Side1Json {
                a: self.side1.first,
                a_prime: self.side1.second,
                r: self.side1.reference,
            },
        )?;
        st.serialize_field(
            "side2",
            &Side2Json {
                b: self.side2.first,
                b_prime: self.side2.second,
                s: self.side2.reference,
            },
        )?;
        st.end()
    }
}

/// Lemma instance induced by a strategy: x's and y's are the response
/// indicators at `a, a′` and `b, b′`; `U` and `V` are the two-channel detection
/// indicators at `r` and `s`.
pub fn instance_from_strategy(strategy: &DeterministicStrategy) -> TheoremInstance {
    let ind = |r: &LocalResponse, l, o| r.probability(l, o);
    let (s1, s2) = (&strategy.side1, &strategy.side2);
    TheoremInstance {
        x1p: ind(s1, LocalSetting::First, Outcome::Plus),
        x1m: ind(s1, LocalSetting::First, Outcome::Minus),
        x2p: ind(s1, LocalSetting::Second, Outcome::Plus),
        x2m: ind(s1, LocalSetting::Second, Outcome::Minus),
        y1p: ind(s2, LocalSetting::First, Outcome::Plus),
        y1m: ind(s2, LocalSetting::First, Outcome::Minus),
        y2p: ind(s2, LocalSetting::Second, Outcome::Plus),
        y2m: ind(s2, LocalSetting::Second, Outcome::Minus),
        u: if s1.reference.is_detection() {
            1.0
        } else {
            0.0
        },
        v: if s2.reference.is_detection() {
            1.0
        } else {
            0.0
        },
    }
}

/// All 19 × 19 = 361 strategies allowed by the constraint, in canonical order.
pub fn enumerate_strategies() -> Vec<DeterministicStrategy> {
    let sides = LocalResponse::enumerate();
    sides
        .iter()
        .flat_map(|&side1| {
            sides
                .iter()
                .map(move |&side2| DeterministicStrategy { side1, side2 })
        })
        .collect()
}

/// The two inequalities with local bound −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Inequality {
    /// Singles form; needs the emission count.
    #[serde(rename = "22")]
    Singles,
    /// Ratio form; coincidences only.
    #[serde(rename = "28")]
    Ratio,
}

impl Inequality {
    pub fn from_id(id: u32) -> Option<Inequality> {
        match id {
            22 => Some(Inequality::Singles),
            28 => Some(Inequality::Ratio),
            _ => None,
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Inequality::Singles => 22,
            Inequality::Ratio => 28,
        }
    }

    pub fn evaluate(self, bundle: &ProbabilityBundle) -> Result<BellValue> {
        match self {
            Inequality::Singles => bell_expressions::expression22_lhs(bundle),
            Inequality::Ratio => bell_expressions::ratio_lhs(bundle),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexCheck {
    pub index: usize,
    pub strategy: DeterministicStrategy,
    /// `None` when the ratio's denominator vanishes.
    pub value: Option<f64>,
    /// Division-free form: `numerator + denominator` for the ratio,
    /// `value + 1` for the singles form. Must be non-negative.
    pub z_form: f64,
    /// `z_form` equals `Z` of the induced lemma instance.
    pub matches_lemma: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LhvBound {
    pub expression: u32,
    pub vertex_count: usize,
    pub min_value: f64,
    pub argmin: DeterministicStrategy,
    pub attaining: usize,
    pub degenerate_excluded: usize,
    pub violations: usize,
    pub passed: bool,
    pub vertices: Vec<VertexCheck>,
}

/// Minimizes an inequality's left-hand side over all 361 deterministic strategies.
///
/// For the ratio form, strategies whose denominator vanishes are left out of
/// the minimum but still checked in the division-free form. The argmin is the
/// first attaining strategy in canonical order.
pub fn lhv_bound(inequality: Inequality) -> LhvBound {
    let strategies = enumerate_strategies();
    let mut vertices = Vec::with_capacity(strategies.len());
    for (index, strategy) in strategies.into_iter().enumerate() {
        let bundle = strategy.bundle();
        let mut inst = instance_from_strategy(&strategy);
        let (value, z_form) = match inequality {
            Inequality::Ratio => {
                let (num, den) =
                    bell_expressions::ratio_terms(&bundle).expect("vertex bundles are complete");
                ((den > 0.0).then(|| num / den), num + den)
            }
            Inequality::Singles => {
                let v = bell_expressions::expression22_lhs(&bundle)
                    .expect("vertex bundles are complete")
                    .value;
                // the singles form uses the unit bounds U = V = 1
                inst.u = 1.0;
                inst.v = 1.0;
                (Some(v), v + 1.0)
            }
        };
        let matches_lemma = z_unchecked(&inst) == z_form;
        let passed = z_form >= 0.0 && value.is_none_or(|v| v >= LOCAL_BOUND - VIOLATION_TOL);
        vertices.push(VertexCheck {
            index,
            strategy,
            value,
            z_form,
            matches_lemma,
            passed,
        });
    }

    let min_value = vertices
        .iter()
        .filter_map(|v| v.value)
        .fold(f64::INFINITY, f64::min);
    let argmin = vertices
        .iter()
        .find(|v| v.value == Some(min_value))
        .map(|v| v.strategy)
        .expect("some vertex has a defined value");
    let attaining = vertices
        .iter()
        .filter(|v| v.value == Some(min_value))
        .count();
    let degenerate_excluded = vertices.iter().filter(|v| v.value.is_none()).count();
    let violations = vertices
        .iter()
        .filter(|v| !v.passed || !v.matches_lemma)
        .count();
    LhvBound {
        expression: inequality.id(),
        vertex_count: vertices.len(),
        min_value,
        argmin,
        attaining,
        degenerate_excluded,
        violations,
        passed: violations == 0 && min_value >= LOCAL_BOUND - VIOLATION_TOL,
        vertices,
    }
}

/// A probability distribution over deterministic strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct LhvModel {
    strategies: Vec<DeterministicStrategy>,
    weights: Vec<f64>,
}

impl LhvModel {
    pub fn new(strategies: Vec<DeterministicStrategy>, weights: Vec<f64>) -> Result<Self> {
        if strategies.is_empty() || strategies.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "need one weight per strategy, got {} strategies and {} weights",
                strategies.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, not 1"
            )));
        }
        if let Some(s) = strategies.iter().find(|s| !s.satisfies_constraint()) {
            return Err(Error::InvalidInput(format!(
                "strategy {s:?} violates the supplementary assumption"
            )));
        }
        Ok(LhvModel {
            strategies,
            weights,
        })
    }

    pub fn uniform(strategies: Vec<DeterministicStrategy>) -> Result<Self> {
        let w = 1.0 / strategies.len() as f64;
        let weights = vec![w; strategies.len()];
        // renormalize against rounding in the 1/n weights
        let total: f64 = weights.iter().sum();
        Self::new(strategies, weights.into_iter().map(|x| x / total).collect())
    }

    /// Ensemble probabilities: the weighted average of the per-strategy probabilities.
    pub fn bundle(&self) -> ProbabilityBundle {
        let mut mixed = ProbabilityBundle::default();
        for (s, w) in self.strategies.iter().zip(&self.weights) {
            mixed.accumulate(&s.bundle(), *w);
        }
        mixed
    }
}

pub fn mixture_value(model: &LhvModel, inequality: Inequality) -> Result<BellValue> {
    inequality.evaluate(&model.bundle())
}
