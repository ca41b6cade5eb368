//! Monte Carlo photon-pair experiment.
//!
//! Each of the seven setting pairs gets its own `N` emissions. Event `i` of
//! pair `p` draws one uniform from [`CounterRng`] stream `p`, index `i`, and
//! picks its cell by inverse CDF over the fixed order
//! `++, +−, +∅, −+, −−, −∅, ∅+, ∅−, ∅∅`. Tallies from any partition of the
//! event range add up to the same table.

use std::io::{Read, Write};

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell_expressions::{self, BellValue, SettingPair};
use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::qm_model::{self, ExperimentConfig, Outcome, OutcomeDistribution};
use crate::rng::{CounterRng, BOOTSTRAP_STREAM_BASE};

pub const DEFAULT_BOOTSTRAP_RESAMPLES: u32 = 200;
const DEFAULT_SHARD_LEN: u64 = 1 << 16;

/// Nine counts per setting pair, in the fixed cell order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    pub pairs_per_setting: u64,
    cells: [[u64; 9]; 7],
}

fn cell_index(x: Outcome, y: Outcome) -> usize {
    3 * x.index() + y.index()
}

impl CountsTable {
    pub fn zeros(pairs_per_setting: u64) -> Self {
        CountsTable {
            pairs_per_setting,
            cells: [[0; 9]; 7],
        }
    }

    /// Builds a table from nine counts per pair; each row must sum to the same `N`.
    pub fn from_cells(cells: [[u64; 9]; 7]) -> Result<Self> {
        let n: u64 = cells[0].iter().sum();
        for (pair, row) in SettingPair::ALL.iter().zip(&cells) {
            let total: u64 = row.iter().sum();
            if total != n {
                return Err(Error::InvalidInput(format!(
                    "pair {pair} has {total} events, expected {n}"
                )));
            }
        }
        Ok(CountsTable {
            pairs_per_setting: n,
            cells,
        })
    }

    pub fn count(&self, pair: SettingPair, x: Outcome, y: Outcome) -> u64 {
        self.cells[pair.index()][cell_index(x, y)]
    }

    pub fn row(&self, pair: SettingPair) -> &[u64; 9] {
        &self.cells[pair.index()]
    }

    /// `N^x` on side 1 at this pair's side-1 setting.
    pub fn singles_side1(&self, pair: SettingPair, x: Outcome) -> u64 {
        Outcome::ALL.iter().map(|&y| self.count(pair, x, y)).sum()
    }

    pub fn singles_side2(&self, pair: SettingPair, y: Outcome) -> u64 {
        Outcome::ALL.iter().map(|&x| self.count(pair, x, y)).sum()
    }

    pub fn merge(&mut self, other: &CountsTable) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// CSV with header `pair,outcome1,outcome2,count`, preceded by a
    /// `# manifest: <ref>` comment line when `manifest_ref` is given.
    pub fn write_csv<W: Write>(&self, mut out: W, manifest_ref: Option<&str>) -> Result<()> {
        if let Some(m) = manifest_ref {
            writeln!(out, "# manifest: {m}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pair", "outcome1", "outcome2", "count"])?;
        for pair in SettingPair::ALL {
            for x in Outcome::ALL {
                for y in Outcome::ALL {
                    w.write_record([
                        pair.name(),
                        x.name(),
                        y.name(),
                        &self.count(pair, x, y).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv). Lines starting
    /// with `#` are ignored; missing cells count as zero.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["pair", "outcome1", "outcome2", "count"] {
            return Err(Error::InvalidInput(format!(
                "unexpected CSV header {headers:?}"
            )));
        }
        let mut cells = [[0u64; 9]; 7];
        for record in reader.records() {
            let record = record?;
            let pair = SettingPair::from_name(&record[0])
                .ok_or_else(|| Error::InvalidInput(format!("unknown pair `{}`", &record[0])))?;
            let x = Outcome::from_name(&record[1])
                .ok_or_else(|| Error::InvalidInput(format!("unknown outcome `{}`", &record[1])))?;
            let y = Outcome::from_name(&record[2])
                .ok_or_else(|| Error::InvalidInput(format!("unknown outcome `{}`", &record[2])))?;
            let n: u64 = record[3]
                .parse()
                .map_err(|e| Error::InvalidInput(format!("bad count `{}`: {e}", &record[3])))?;
            cells[pair.index()][cell_index(x, y)] = n;
        }
        Self::from_cells(cells)
    }
}

/// Cumulative distribution over the nine cells in sampling order.
fn cumulative(dist: &OutcomeDistribution) -> [f64; 9] {
    let mut cdf = [0.0; 9];
    let mut acc = 0.0;
    for (slot, p) in cdf.iter_mut().zip(dist.to_array()) {
        acc += p;
        *slot = acc;
    }
    cdf
}

fn sample_cell(cdf: &[f64; 9], u: f64) -> usize {
    // the last cell takes any rounding slack above cdf[7]
    cdf[..8].iter().position(|&c| u < c).unwrap_or(8)
}

fn tally(cdf: &[f64; 9], seed: u64, stream: u64, start: u64, end: u64) -> [u64; 9] {
    let mut rng = CounterRng::at(seed, stream, start);
    let mut row = [0u64; 9];
    for _ in start..end {
        row[sample_cell(cdf, rng.uniform())] += 1;
    }
    row
}

/// Simulates `pairs_per_setting` emissions at each of the seven setting pairs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<CountsTable> {
    run_experiment_sharded(config, DEFAULT_SHARD_LEN)
}

/// [`run_experiment`] with an explicit shard length; the table is the same for
/// every shard length and worker count.
pub fn run_experiment_sharded(config: &ExperimentConfig, shard_len: u64) -> Result<CountsTable> {
    config.ensure_valid()?;
    if shard_len == 0 {
        return Err(Error::InvalidInput(
            "shard length must be at least 1".into(),
        ));
    }
    let n = config.pairs_per_setting;
    let cdfs = SettingPair::ALL
        .iter()
        .map(|pair| {
            let (first, second) = pair.angles(&config.settings);
            qm_model::full_outcome_distribution(config, first, second).map(|d| cumulative(&d))
        })
        .collect::<Result<Vec<_>>>()?;

    let shards = n.div_ceil(shard_len);
    let jobs: Vec<(usize, u64)> = (0..SettingPair::ALL.len())
        .flat_map(|p| (0..shards).map(move |s| (p, s)))
        .collect();
    let rows: Vec<(usize, [u64; 9])> = jobs
        .into_par_iter()
        .map(|(p, s)| {
            let start = s * shard_len;
            let end = (start + shard_len).min(n);
            (p, tally(&cdfs[p], config.seed, p as u64, start, end))
        })
        .collect();

    let mut table = CountsTable::zeros(n);
    for (p, row) in rows {
        for (c, k) in table.cells[p].iter_mut().zip(row) {
            *c += k;
        }
    }
    Ok(table)
}

/// Multinomial resample of a nine-cell row by sequential conditional binomials.
fn resample_row(row: &[u64; 9], rng: &mut CounterRng) -> [u64; 9] {
    let mut out = [0u64; 9];
    let mut remaining_events: u64 = row.iter().sum();
    let mut remaining_mass: u64 = remaining_events;
    for (slot, &k) in out.iter_mut().zip(row) {
        if remaining_events == 0 || remaining_mass == 0 {
            break;
        }
        if k == remaining_mass {
            *slot = remaining_events;
            break;
        }
        let p = k as f64 / remaining_mass as f64;
        let draw = Binomial::new(remaining_events, p)
            .expect("p is a ratio of counts")
            .sample(rng.generator());
        *slot = draw;
        remaining_events -= draw;
        remaining_mass -= k;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub counts: CountsTable,
    pub statistic: BellValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub seed: u64,
    pub bootstrap_resamples: u32,
    /// Resamples whose `(r, s)` coincidences came out empty; left out of the spread.
    pub degenerate_resamples: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigFile>,
}

/// Counts form of the ratio inequality with a multinomial bootstrap standard
/// error. Each resample redraws every pair's nine cells; resample `k` uses
/// stream `BOOTSTRAP_STREAM_BASE + k`. Fewer than two usable resamples leave
/// the standard error absent.
pub fn estimate_statistic(
    counts: &CountsTable,
    bootstrap_resamples: u32,
    seed: u64,
) -> Result<RunResult> {
    let mut statistic = bell_expressions::counts_statistic(counts)?;
    let replicas: Vec<Option<f64>> = (0..bootstrap_resamples)
        .into_par_iter()
        .map(|k| {
            let mut rng = CounterRng::at(seed, BOOTSTRAP_STREAM_BASE + u64::from(k), 0);
            let mut cells = [[0u64; 9]; 7];
            for (dst, pair) in cells.iter_mut().zip(SettingPair::ALL) {
                *dst = resample_row(counts.row(pair), &mut rng);
            }
            let table = CountsTable {
                pairs_per_setting: counts.pairs_per_setting,
                cells,
            };
            bell_expressions::counts_statistic(&table)
                .ok()
                .map(|v| v.value)
        })
        .collect();
    let values: Vec<f64> = replicas.iter().flatten().copied().collect();
    let degenerate = bootstrap_resamples - values.len() as u32;
    let std_error = (values.len() >= 2).then(|| {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    });
    statistic.std_error = std_error;
    Ok(RunResult {
        counts: counts.clone(),
        statistic,
        std_error,
        seed,
        bootstrap_resamples,
        degenerate_resamples: degenerate,
        config: None,
    })
}

/// Full pipeline: validate, simulate, estimate. The bootstrap reuses the config seed.
pub fn simulate(config: &ExperimentConfig, bootstrap_resamples: u32) -> Result<RunResult> {
    let counts = run_experiment(config)?;
    let mut result = estimate_statistic(&counts, bootstrap_resamples, config.seed)?;
    result.config = Some(ConfigFile::from(config));
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub eta: f64,
    pub eta_alt: f64,
    pub statistic: f64,
    pub statistic_alt: f64,
    pub std_error: Option<f64>,
    pub std_error_alt: Option<f64>,
    pub difference: f64,
    /// Four combined standard errors, `4 √(σ₁² + σ₂²)`.
    pub tolerance: f64,
    pub consistent: bool,
}

/// Runs the same experiment (same `N`, same seed) at two efficiencies and
/// checks that the ratio statistic agrees within four combined standard errors.
pub fn efficiency_invariance_check(
    config: &ExperimentConfig,
    eta_alt: f64,
    bootstrap_resamples: u32,
) -> Result<InvarianceReport> {
    let alt = ExperimentConfig {
        eta: eta_alt,
        ..*config
    };
    let first = simulate(config, bootstrap_resamples)?;
    let second = simulate(&alt, bootstrap_resamples)?;
    let difference = (first.statistic.value - second.statistic.value).abs();
    let s1 = first.std_error.unwrap_or(0.0);
    let s2 = second.std_error.unwrap_or(0.0);
    let tolerance = 4.0 * (s1 * s1 + s2 * s2).sqrt();
    Ok(InvarianceReport {
        eta: config.eta,
        eta_alt,
        statistic: first.statistic.value,
        statistic_alt: second.statistic.value,
        std_error: first.std_error,
        std_error_alt: second.std_error,
        difference,
        tolerance,
        consistent: difference <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Angle;

    fn small(n: u64, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            pairs_per_setting: n,
            seed,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn rejects_empty_runs() {
        assert!(run_experiment(&small(0, 1)).is_err());
    }

    #[test]
    fn conservation_and_marginals() {
        let t = run_experiment(&small(5000, 3)).unwrap();
        for pair in SettingPair::ALL {
            assert_eq!(t.row(pair).iter().sum::<u64>(), 5000);
            let plus: u64 = t.singles_side1(pair, Outcome::Plus);
            assert_eq!(
                plus,
                t.count(pair, Outcome::Plus, Outcome::Plus)
                    + t.count(pair, Outcome::Plus, Outcome::Minus)
                    + t.count(pair, Outcome::Plus, Outcome::NoDetect)
            );
        }
    }

    #[test]
    fn deterministic_across_sharding_and_threads() {
        let c = small(1000, 77);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment_sharded(&c, 13).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let d = one.install(|| run_experiment_sharded(&c, 1).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, d);
        assert_eq!(a, run_experiment(&c).unwrap());
        assert_ne!(a, run_experiment(&small(1000, 78)).unwrap());
    }

    #[test]
    fn inverse_cdf_boundaries() {
        let cdf = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 1.0];
        assert_eq!(sample_cell(&cdf, 0.0), 0);
        assert_eq!(sample_cell(&cdf, 0.1), 1);
        assert_eq!(sample_cell(&cdf, 0.7999), 7);
        assert_eq!(sample_cell(&cdf, 0.8), 8);
        assert_eq!(sample_cell(&cdf, 0.999_999), 8);
    }

    #[test]
    fn proportional_counts_give_exact_statistic() {
        // Coincidence cells proportional to 1 ± F·cos 2Δ at the reference settings
        // with K = 2: cos 2Δ = −½ gives (1, 3) per channel, cos 2Δ = 1 gives (4, 0).
        let row = |same: u64, opposite: u64| {
            let mut r = [0u64; 9];
            r[0] = same;
            r[4] = same;
            r[1] = opposite;
            r[3] = opposite;
            r[8] = 1000 - 2 * same - 2 * opposite;
            r
        };
        let cells = [
            row(1, 3),
            row(1, 3),
            row(1, 3),
            row(4, 0),
            row(1, 3),
            row(1, 3),
            row(4, 0),
        ];
        let t = CountsTable::from_cells(cells).unwrap();
        let r = estimate_statistic(&t, 0, 1).unwrap();
        assert_eq!(r.statistic.value, -1.5);
        assert!(r.statistic.violated);
        assert_eq!(r.std_error, None);
    }

    #[test]
    fn single_cell_counts() {
        let mut cells = [[0u64; 9]; 7];
        for row in cells.iter_mut() {
            row[8] = 1;
        }
        cells[SettingPair::AB.index()] = [1, 0, 0, 0, 0, 0, 0, 0, 0];
        cells[SettingPair::RS.index()] = [1, 0, 0, 0, 0, 0, 0, 0, 0];
        let t = CountsTable::from_cells(cells).unwrap();
        assert_eq!(bell_expressions::counts_statistic(&t).unwrap().value, 1.0);
    }

    #[test]
    fn zero_denominator_is_an_error() {
        let mut cells = [[0u64; 9]; 7];
        for row in cells.iter_mut() {
            row[0] = 1;
        }
        cells[SettingPair::RS.index()] = [0, 0, 1, 0, 0, 0, 0, 0, 0];
        let t = CountsTable::from_cells(cells).unwrap();
        assert!(matches!(
            estimate_statistic(&t, 10, 1),
            Err(Error::DegenerateDenominator)
        ));
    }

    #[test]
    fn bootstrap_is_deterministic_and_conserves_counts() {
        let t = run_experiment(&small(200_000, 9)).unwrap();
        let a = estimate_statistic(&t, 50, 4).unwrap();
        let b = estimate_statistic(&t, 50, 4).unwrap();
        assert_eq!(a.std_error, b.std_error);
        assert!(a.std_error.unwrap() > 0.0);

        let mut rng = CounterRng::at(1, BOOTSTRAP_STREAM_BASE, 0);
        let row = t.row(SettingPair::AB);
        let re = resample_row(row, &mut rng);
        assert_eq!(re.iter().sum::<u64>(), row.iter().sum::<u64>());
        for (r, o) in re.iter().zip(row) {
            if *o == 0 {
                assert_eq!(*r, 0);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let t = run_experiment(&small(100, 5)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf, Some("run_result.json")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# manifest: run_result.json"));
        assert_eq!(lines.next(), Some("pair,outcome1,outcome2,count"));
        assert!(lines.next().unwrap().starts_with("a_b,plus,plus,"));
        assert_eq!(text.lines().count(), 2 + 63);
        assert_eq!(CountsTable::read_csv(text.as_bytes()).unwrap(), t);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(CountsTable::read_csv(
            "pair,outcome1,outcome2,count\nx_y,plus,plus,1\n".as_bytes()
        )
        .is_err());
        assert!(CountsTable::read_csv("a,b,c,d\n".as_bytes()).is_err());
        assert!(
            CountsTable::read_csv("pair,outcome1,outcome2,count\na_b,up,plus,1\n".as_bytes())
                .is_err()
        );
    }

    #[test]
    fn same_efficiency_is_identical() {
        let c = small(20_000, 12);
        let r = efficiency_invariance_check(&c, 0.2, 20).unwrap();
        assert_eq!(r.difference, 0.0);
        assert!(r.consistent);
        assert!(efficiency_invariance_check(&c, 1.5, 20).is_err());
    }

    #[test]
    fn settings_flow_into_sampling() {
        let mut c = small(20_000, 12);
        c.eta = 1.0;
        c.geometry =
            crate::geometry::DetectionGeometry::collinear(std::f64::consts::FRAC_PI_2).unwrap();
        let base = run_experiment(&c).unwrap();
        c.settings.a = Angle::from_degrees(45.0);
        assert_ne!(
            run_experiment(&c).unwrap().row(SettingPair::AB),
            base.row(SettingPair::AB)
        );
    }

    proptest::proptest! {
        #[test]
        fn csv_round_trip(cells in proptest::array::uniform7(proptest::array::uniform8(0u64..1000))) {
            let mut full = [[0u64; 9]; 7];
            let n: u64 = 10_000;
            for (dst, src) in full.iter_mut().zip(cells) {
                dst[..8].copy_from_slice(&src);
                dst[8] = n - src.iter().sum::<u64>();
            }
            let t = CountsTable::from_cells(full).unwrap();
            let mut buf = Vec::new();
            t.write_csv(&mut buf, None).unwrap();
            proptest::prop_assert_eq!(CountsTable::read_csv(buf.as_slice()).unwrap(), t);
        }
    }
}
