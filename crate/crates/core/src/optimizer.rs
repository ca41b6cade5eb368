//! Deterministic search over the four analyzer angles `(a, a′, b, b′)`.
//!
//! A full grid scan on `[0°, 180°)⁴` seeds the `starts` best cells, which are
//! then refined by cyclic coordinate descent: each coordinate is line-searched
//! with the interval-halving method on a bracket of ± one grid step.

use rayon::prelude::*;
use serde::Serialize;

use crate::bell_expressions;
use crate::error::{Error, Result};
use crate::geometry::Angle;
use crate::qm_model::{ExperimentConfig, Settings};

pub const DEFAULT_GRID_STEP_DEG: f64 = 5.0;
pub const DEFAULT_STARTS: usize = 8;
pub const DEFAULT_REFINE_ITERS: usize = 40;

/// Line searches stop once the bracket is narrower than this (degrees).
const LINE_TOL_DEG: f64 = 1e-10;
/// Refined optima closer than this in value count as ties.
const TIE_TOL: f64 = 1e-12;
const MAX_GRID_POINTS: u64 = 20_000_000;

/// The four angles entering the correlation terms. Serialized in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyzerAngles {
    pub a: Angle,
    pub a_prime: Angle,
    pub b: Angle,
    pub b_prime: Angle,
}

impl AnalyzerAngles {
    pub fn from_degrees(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        AnalyzerAngles {
            a: Angle::from_degrees(a),
            a_prime: Angle::from_degrees(a_prime),
            b: Angle::from_degrees(b),
            b_prime: Angle::from_degrees(b_prime),
        }
    }

    fn from_vector(x: &[f64; 4]) -> Self {
        Self::from_degrees(x[0], x[1], x[2], x[3])
    }

    pub fn degrees(&self) -> [f64; 4] {
        [
            self.a.degrees(),
            self.a_prime.degrees(),
            self.b.degrees(),
            self.b_prime.degrees(),
        ]
    }

    pub fn canonical(&self) -> Self {
        AnalyzerAngles {
            a: self.a.canonical(),
            a_prime: self.a_prime.canonical(),
            b: self.b.canonical(),
            b_prime: self.b_prime.canonical(),
        }
    }

    /// `(a − b, a − b′, a′ − b, a′ − b′)` reduced into `[0°, 180°)`.
    pub fn differences_deg(&self) -> [f64; 4] {
        [
            (self.a - self.b).canonical().degrees(),
            (self.a - self.b_prime).canonical().degrees(),
            (self.a_prime - self.b).canonical().degrees(),
            (self.a_prime - self.b_prime).canonical().degrees(),
        ]
    }
}

impl From<Settings> for AnalyzerAngles {
    fn from(s: Settings) -> Self {
        AnalyzerAngles {
            a: s.a,
            a_prime: s.a_prime,
            b: s.b,
            b_prime: s.b_prime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    /// 0 is the grid cell; refinement round `k` is iteration `k`.
    pub iteration: usize,
    pub start: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodInfo {
    pub objective: &'static str,
    pub grid_step_deg: f64,
    pub grid_points: u64,
    /// Best value found by the grid scan alone.
    pub grid_best: f64,
    pub starts: usize,
    pub refine_iters: usize,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_settings: AnalyzerAngles,
    pub best_value: f64,
    pub trace: Vec<TraceEntry>,
    pub method: MethodInfo,
}

fn cells_per_axis(grid_step: f64) -> Result<u64> {
    if !(grid_step.is_finite() && grid_step > 0.0 && grid_step <= 180.0) {
        return Err(Error::InvalidInput(format!(
            "grid step must lie in (0°, 180°], got {grid_step}"
        )));
    }
    let n = (180.0 / grid_step).round();
    if (n * grid_step - 180.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "grid step {grid_step}° does not divide 180°"
        )));
    }
    let n = n as u64;
    if n.pow(4) > MAX_GRID_POINTS {
        return Err(Error::InvalidInput(format!(
            "grid step {grid_step}° needs {} points, more than {MAX_GRID_POINTS}",
            n.pow(4)
        )));
    }
    Ok(n)
}

fn grid_point(index: u64, n: u64, step: f64) -> [f64; 4] {
    let mut x = [0.0; 4];
    let mut rest = index;
    for slot in x.iter_mut().rev() {
        *slot = (rest % n) as f64 * step;
        rest /= n;
    }
    x
}

/// Interval-halving line search along coordinate `i` on `[x_i − h, x_i + h]`.
/// The midpoint is always the best point seen, so the value never increases.
fn line_search<F: Fn(&[f64; 4]) -> f64>(
    f: &F,
    x: &mut [f64; 4],
    value: f64,
    i: usize,
    h: f64,
    evals: &mut u64,
) -> f64 {
    let mut lo = x[i] - h;
    let mut hi = x[i] + h;
    let mut mid = x[i];
    let mut f_mid = value;
    let mut probe = *x;
    let mut eval = |t: f64, evals: &mut u64| {
        probe[i] = t;
        *evals += 1;
        f(&probe)
    };
    while hi - lo > LINE_TOL_DEG {
        let quarter = (hi - lo) / 4.0;
        let (x1, x2) = (lo + quarter, hi - quarter);
        let f1 = eval(x1, evals);
        if f1 < f_mid {
            hi = mid;
            mid = x1;
            f_mid = f1;
            continue;
        }
        let f2 = eval(x2, evals);
        if f2 < f_mid {
            lo = mid;
            mid = x2;
            f_mid = f2;
            continue;
        }
        lo = x1;
        hi = x2;
    }
    x[i] = mid;
    f_mid
}

struct Refined {
    x: [f64; 4],
    value: f64,
    trace: Vec<TraceEntry>,
    evaluations: u64,
}

fn refine<F: Fn(&[f64; 4]) -> f64>(
    f: &F,
    start: usize,
    x0: [f64; 4],
    value0: f64,
    h: f64,
    rounds: usize,
) -> Refined {
    let mut x = x0;
    let mut value = value0;
    let mut evaluations = 0;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        start,
        value,
    }];
    for round in 1..=rounds {
        let before = value;
        for i in 0..4 {
            value = line_search(f, &mut x, value, i, h, &mut evaluations);
        }
        trace.push(TraceEntry {
            iteration: round,
            start,
            value,
        });
        if value >= before {
            break;
        }
    }
    Refined {
        x,
        value,
        trace,
        evaluations,
    }
}

/// Grid scan plus coordinate-descent refinement of `objective` (minimized,
/// angles in degrees). Among refined optima within 1e−12 of the best value the
/// lexicographically smallest canonical `(a, a′, b, b′)` is reported.
pub fn minimize_angles<F>(
    objective: F,
    objective_name: &'static str,
    grid_step: f64,
    starts: usize,
    refine_iters: usize,
) -> Result<OptimizationResult>
where
    F: Fn(&[f64; 4]) -> f64 + Sync,
{
    let n = cells_per_axis(grid_step)?;
    if starts == 0 {
        return Err(Error::InvalidInput("need at least one start".into()));
    }
    let total = n.pow(4);
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|i| objective(&grid_point(i, n, grid_step)))
        .collect();

    let mut order: Vec<u64> = (0..total).collect();
    let by_value = |a: &u64, b: &u64| {
        values[*a as usize]
            .total_cmp(&values[*b as usize])
            .then(a.cmp(b))
    };
    let starts = starts.min(total as usize);
    if starts < order.len() {
        order.select_nth_unstable_by(starts - 1, by_value);
        order.truncate(starts);
    }
    order.sort_unstable_by(by_value);
    let grid_best = values[order[0] as usize];

    let refined: Vec<Refined> = order
        .par_iter()
        .enumerate()
        .map(|(k, &cell)| {
            refine(
                &objective,
                k,
                grid_point(cell, n, grid_step),
                values[cell as usize],
                grid_step,
                refine_iters,
            )
        })
        .collect();

    let best_value = refined
        .iter()
        .map(|r| r.value)
        .fold(f64::INFINITY, f64::min);
    let best_settings = refined
        .iter()
        .filter(|r| r.value <= best_value + TIE_TOL)
        .map(|r| AnalyzerAngles::from_vector(&r.x).canonical())
        .min_by(|p, q| {
            p.degrees()
                .iter()
                .zip(q.degrees().iter())
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one start");

    let evaluations = total + refined.iter().map(|r| r.evaluations).sum::<u64>();
    let trace = refined.into_iter().flat_map(|r| r.trace).collect();
    Ok(OptimizationResult {
        best_settings,
        best_value,
        trace,
        method: MethodInfo {
            objective: objective_name,
            grid_step_deg: grid_step,
            grid_points: total,
            grid_best,
            starts,
            refine_iters,
            evaluations,
        },
    })
}

/// Ratio-inequality value of the quantum model at the given four angles,
/// with `r` and `s` taken from `config`.
pub fn ratio_objective(config: &ExperimentConfig, angles: &AnalyzerAngles) -> Result<f64> {
    let mut settings = config.settings;
    settings.a = angles.a;
    settings.a_prime = angles.a_prime;
    settings.b = angles.b;
    settings.b_prime = angles.b_prime;
    let bundle = bell_expressions::qm_bundle(&config.with_settings(settings))?;
    Ok(bell_expressions::ratio_lhs(&bundle)?.value)
}

/// Minimizes the ratio inequality's quantum value over `(a, a′, b, b′)`.
pub fn optimize_ratio(
    config: &ExperimentConfig,
    grid_step: f64,
    starts: usize,
    refine_iters: usize,
) -> Result<OptimizationResult> {
    config.ensure_valid()?;
    // surfaces a degenerate denominator before the scan
    ratio_objective(config, &AnalyzerAngles::from_degrees(0.0, 0.0, 0.0, 0.0))?;
    minimize_angles(
        |x| ratio_objective(config, &AnalyzerAngles::from_vector(x)).unwrap_or(f64::INFINITY),
        "ratio_lhs",
        grid_step,
        starts,
        refine_iters,
    )
}

/// Maximizes `|S|` over the four angles. `best_value` and the trace report `|S|`.
pub fn optimize_chsh(config: &ExperimentConfig, grid_step: f64) -> Result<OptimizationResult> {
    optimize_chsh_with(config, grid_step, DEFAULT_STARTS, DEFAULT_REFINE_ITERS)
}

pub fn optimize_chsh_with(
    config: &ExperimentConfig,
    grid_step: f64,
    starts: usize,
    refine_iters: usize,
) -> Result<OptimizationResult> {
    config.check_parameters()?;
    let s = |x: &[f64; 4]| {
        let q = AnalyzerAngles::from_vector(x);
        -bell_expressions::chsh_value(config, q.a, q.a_prime, q.b, q.b_prime).abs()
    };
    let mut result = minimize_angles(s, "chsh_abs", grid_step, starts, refine_iters)?;
    result.best_value = result.best_value.abs();
    result.method.grid_best = result.method.grid_best.abs();
    for t in &mut result.trace {
        t.value = t.value.abs();
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DetectionGeometry;
    use std::f64::consts::{PI, SQRT_2};

    fn with_visibility(f: f64) -> ExperimentConfig {
        ExperimentConfig {
            visibility: f,
            ..ExperimentConfig::default()
        }
    }

    /// True if `d` is congruent to `target` modulo 180°.
    fn congruent(d: f64, target: f64) -> bool {
        let r = (d - target).rem_euclid(180.0);
        r < 1e-6 || 180.0 - r < 1e-6
    }

    #[test]
    fn grid_step_must_divide_180() {
        assert!(cells_per_axis(7.0).is_err());
        assert!(cells_per_axis(0.0).is_err());
        assert!(cells_per_axis(-5.0).is_err());
        assert!(cells_per_axis(f64::NAN).is_err());
        assert_eq!(cells_per_axis(5.0).unwrap(), 36);
        assert_eq!(cells_per_axis(4.0).unwrap(), 45);
        assert!(
            cells_per_axis(1.0).is_err(),
            "1° lattice is too large for a full 4-D scan"
        );
        assert!(optimize_ratio(&ExperimentConfig::default(), 7.0, 8, 10).is_err());
    }

    #[test]
    fn grid_point_layout() {
        assert_eq!(grid_point(0, 36, 5.0), [0.0; 4]);
        assert_eq!(grid_point(1, 36, 5.0), [0.0, 0.0, 0.0, 5.0]);
        assert_eq!(grid_point(36, 36, 5.0), [0.0, 0.0, 5.0, 0.0]);
        assert_eq!(grid_point(36u64.pow(4) - 1, 36, 5.0), [175.0; 4]);
    }

    fn ratio_minimum(f: f64) -> f64 {
        1.0 - 2.0 * SQRT_2 * f
    }

    #[test]
    fn ratio_optimum_is_the_tsirelson_point() {
        let c = with_visibility(1.0);
        let r = optimize_ratio(&c, 5.0, 8, 40).unwrap();
        assert!(
            (r.best_value - ratio_minimum(1.0)).abs() < 1e-9,
            "{}",
            r.best_value
        );
        // c₁ = c₂ = c₃ = −1/√2 and c₄ = +1/√2 at every minimizer
        let cos = r
            .best_settings
            .differences_deg()
            .map(|d| (2.0 * d.to_radians()).cos());
        let h = SQRT_2 / 2.0;
        for (got, want) in cos.iter().zip([-h, -h, -h, h]) {
            assert!((got - want).abs() < 1e-4, "{cos:?}");
        }
        assert!(r.best_value <= r.method.grid_best);
        assert!(r.trace.iter().all(|t| t.value >= r.best_value));
    }

    #[test]
    fn optimum_beats_the_120_degree_configuration() {
        let c = with_visibility(1.0);
        let at_120 =
            ratio_objective(&c, &AnalyzerAngles::from_degrees(0.0, 60.0, 120.0, 60.0)).unwrap();
        assert!((at_120 + 1.5).abs() < 1e-12);
        let d = AnalyzerAngles::from_degrees(0.0, 60.0, 120.0, 60.0).differences_deg();
        assert!(d[..3]
            .iter()
            .all(|x| congruent(*x, 120.0) || congruent(*x, 60.0)));
        assert!(congruent(d[3], 0.0));
        let r = optimize_ratio(&c, 5.0, 8, 40).unwrap();
        assert!(r.best_value < at_120 - 0.3);
    }

    #[test]
    fn ratio_optimum_scales_with_visibility() {
        let r = optimize_ratio(&with_visibility(0.0), 5.0, 8, 40).unwrap();
        assert!((r.best_value - 1.0).abs() < 1e-9);
        for f in [0.3, 0.5] {
            let r = optimize_ratio(&with_visibility(f), 5.0, 8, 40).unwrap();
            assert!(
                (r.best_value - ratio_minimum(f)).abs() < 1e-9,
                "F = {f}: {}",
                r.best_value
            );
        }
    }

    #[test]
    fn ratio_optimum_off_grid_is_refined() {
        // the minimizers sit at odd multiples of 22.5°, none of which lies on an 18° grid
        let r = optimize_ratio(&with_visibility(1.0), 18.0, 8, 60).unwrap();
        assert!(r.method.grid_best > ratio_minimum(1.0) + 1e-3);
        assert!(
            (r.best_value - ratio_minimum(1.0)).abs() < 1e-9,
            "{}",
            r.best_value
        );
    }

    #[test]
    fn chsh_optimum() {
        let r = optimize_chsh(&with_visibility(1.0), 5.0).unwrap();
        assert!(
            (r.best_value - 2.0 * SQRT_2).abs() < 1e-9,
            "{}",
            r.best_value
        );
        let r0 = optimize_chsh(&with_visibility(0.0), 5.0).unwrap();
        assert_eq!(r0.best_value, 0.0);
    }

    #[test]
    fn chsh_optimum_matches_textbook_angles() {
        let c = with_visibility(1.0);
        let q = AnalyzerAngles::from_degrees(0.0, 45.0, 22.5, 67.5);
        let textbook = bell_expressions::chsh_value(&c, q.a, q.a_prime, q.b, q.b_prime).abs();
        let r = optimize_chsh(&c, 5.0).unwrap();
        assert!((textbook - r.best_value).abs() < 1e-9);
        let p = r.best_settings;
        let at_reported = bell_expressions::chsh_value(&c, p.a, p.a_prime, p.b, p.b_prime).abs();
        assert!((at_reported - r.best_value).abs() < 1e-12);
    }

    #[test]
    fn value_invariant_under_rotation_and_shifts() {
        let c = with_visibility(1.0);
        let r = optimize_ratio(&c, 5.0, 4, 20).unwrap();
        let [a, ap, b, bp] = r.best_settings.degrees();
        for (delta, shift) in [
            (13.0, [0.0; 4]),
            (-71.0, [180.0, 0.0, 0.0, 0.0]),
            (0.0, [0.0, 180.0, -180.0, 360.0]),
        ] {
            let q = AnalyzerAngles::from_degrees(
                a + delta + shift[0],
                ap + delta + shift[1],
                b + delta + shift[2],
                bp + delta + shift[3],
            );
            let v = ratio_objective(&c, &q).unwrap();
            assert!((v - r.best_value).abs() < 1e-9);
        }
    }

    #[test]
    fn landscape_reduces_to_cosine_sum() {
        // 1° lattice with a fixed at 0 (global rotation is a symmetry): the full
        // ratio evaluation and 1 + F·(c₁ + c₂ + c₃ − c₄) agree pointwise and in the minimum.
        let c = with_visibility(0.8);
        let cos2 = |d: f64| (2.0 * d.to_radians()).cos();
        let lattice: Vec<(f64, f64, f64)> = (0..180)
            .flat_map(|ap| {
                (0..180).flat_map(move |b| {
                    (0..180)
                        .step_by(3)
                        .map(move |bp| (f64::from(ap), f64::from(b), f64::from(bp)))
                })
            })
            .collect();
        let (full_min, reduced_min) = lattice
            .par_iter()
            .map(|&(ap, b, bp)| {
                let full =
                    ratio_objective(&c, &AnalyzerAngles::from_degrees(0.0, ap, b, bp)).unwrap();
                let reduced = 1.0 + 0.8 * (cos2(-b) + cos2(-bp) + cos2(ap - b) - cos2(ap - bp));
                assert!((full - reduced).abs() < 1e-12);
                (full, reduced)
            })
            .reduce(
                || (f64::INFINITY, f64::INFINITY),
                |l, r| (l.0.min(r.0), l.1.min(r.1)),
            );
        assert!((full_min - reduced_min).abs() < 1e-12);
        // the lattice misses the 22.5° minimizers but still lies between the
        // continuum minimum and the 120° configuration
        assert!(full_min >= ratio_minimum(0.8) - 1e-12);
        assert!(full_min < 1.0 - 2.5 * 0.8);
    }

    #[test]
    fn result_does_not_depend_on_worker_count() {
        let c = with_visibility(0.9);
        let many = optimize_chsh_with(&c, 10.0, 4, 20).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| optimize_chsh_with(&c, 10.0, 4, 20).unwrap());
        assert_eq!(many, one);
    }

    #[test]
    fn rejects_degenerate_denominator() {
        let c = ExperimentConfig {
            geometry: DetectionGeometry::new(PI / 3.0, 0.0).unwrap(),
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            optimize_ratio(&c, 5.0, 8, 10),
            Err(Error::DegenerateDenominator)
        ));
    }
}
