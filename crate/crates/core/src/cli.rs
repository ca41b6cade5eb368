//! `twochannel-bell` command line.
//!
//! Every subcommand prints one JSON document to stdout. With `--output-dir`
//! the same documents (plus CSV tables) are also written to disk, each JSON
//! file embedding a [`RunManifest`] and each CSV file naming its manifest in a
//! leading `#` comment.
//!
//! Exit codes: 0 success, 1 a checked claim failed, 2 usage or config error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bell_expressions::{self, ProbabilityBundle};
use crate::config::ConfigFile;
use crate::error::Result;
use crate::lhv::{self, Inequality};
use crate::optimizer::{self, OptimizationResult};
use crate::qm_model::{ExperimentConfig, Settings};
use crate::simulator::{self, DEFAULT_BOOTSTRAP_RESAMPLES};

/// Environment variable supplying the default seed.
pub const SEED_ENV: &str = "TWOCHANNEL_BELL_SEED";
const DEFAULT_THEOREM_SEED: u64 = 7;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CLAIM_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "twochannel-bell",
    version,
    about = "Bell inequalities for two-channel polarizer experiments"
)]
pub struct Cli {
    /// Also write every output to this directory.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Objective {
    /// Minimize the ratio inequality's left-hand side.
    Ratio,
    /// Maximize |S| of CHSH.
    Chsh,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the bilinear lemma on random instances, all 0/1 corners and the
    /// closed-form minimizer against a grid oracle.
    VerifyTheorem {
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        grid_checks: u64,
        /// Step of the brute-force oracle grid.
        #[arg(long, default_value_t = 0.25)]
        grid_step: f64,
    },
    /// Minimize an inequality over all deterministic local strategies.
    LhvBound {
        /// 22 (singles form) or 28 (ratio form).
        #[arg(long, value_parser = parse_expression)]
        expression: Inequality,
    },
    /// Quantum predictions at the configured angles.
    QmEval {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo counts and the ratio statistic with a bootstrap error.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_RESAMPLES)]
        bootstrap: u32,
        /// Overrides the config's seed.
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
    },
    /// Search the analyzer angles for the strongest violation.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = optimizer::DEFAULT_GRID_STEP_DEG)]
        grid_step: f64,
        #[arg(long, default_value_t = optimizer::DEFAULT_STARTS, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
        starts: usize,
        #[arg(long, default_value_t = optimizer::DEFAULT_REFINE_ITERS)]
        refine_iters: usize,
        #[arg(long, value_enum, default_value_t = Objective::Ratio)]
        objective: Objective,
    },
    /// Violation factors of the ratio inequality (reference and optimal
    /// settings) against the CHSH factor √2.
    Compare,
}

fn parse_expression(s: &str) -> std::result::Result<Inequality, String> {
    s.parse::<u32>()
        .ok()
        .and_then(Inequality::from_id)
        .ok_or_else(|| format!("unknown expression `{s}` (expected 22 or 28)"))
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyTheorem { .. } => "verify-theorem",
            Command::LhvBound { .. } => "lhv-bound",
            Command::QmEval { .. } => "qm-eval",
            Command::Simulate { .. } => "simulate",
            Command::Optimize { .. } => "optimize",
            Command::Compare => "compare",
        }
    }
}

/// Provenance block embedded in every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    fn new(subcommand: &str, config_path: Option<&Path>, seed: Option<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            outputs: Vec::new(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

/// One command's results before they are written anywhere.
struct Report {
    json_name: &'static str,
    body: Value,
    csv: Vec<(&'static str, Vec<u8>)>,
    exit: i32,
}

#[derive(Serialize)]
struct TheoremSummary {
    passed: bool,
    samples: u64,
    seed: u64,
    violations: u64,
    min_z: f64,
    min_index: u64,
    min_instance: lhv::TheoremInstance,
    corners: lhv::CornerReport,
    cross_check: lhv::CrossCheckReport,
}

fn verify_theorem(samples: u64, seed: u64, grid_checks: u64, grid_step: f64) -> Result<Report> {
    let sampled = lhv::verify_theorem(samples, seed)?;
    let corners = lhv::verify_corners();
    let cross_check = lhv::cross_check_minimizers(grid_checks, seed, grid_step)?;
    let cross_ok = cross_check.max_abs_diff <= 1e-9
        && cross_check.max_assignment_gap <= 1e-9
        && cross_check.min_value >= -lhv::Z_TOL;
    let passed = sampled.passed && corners.violations == 0 && cross_ok;
    let summary = TheoremSummary {
        passed,
        samples,
        seed,
        violations: sampled.violations,
        min_z: sampled.min_z,
        min_index: sampled.min_index,
        min_instance: sampled.min_instance,
        corners,
        cross_check,
    };
    Ok(Report {
        json_name: "verify_theorem.json",
        body: serde_json::to_value(summary)?,
        csv: Vec::new(),
        exit: if passed { EXIT_OK } else { EXIT_CLAIM_FAILED },
    })
}

fn lhv_bound(inequality: Inequality) -> Result<Report> {
    let bound = lhv::lhv_bound(inequality);
    let exit = if bound.passed {
        EXIT_OK
    } else {
        EXIT_CLAIM_FAILED
    };
    let json_name = match inequality {
        Inequality::Singles => "lhv_bound_22.json",
        Inequality::Ratio => "lhv_bound_28.json",
    };
    Ok(Report {
        json_name,
        body: serde_json::to_value(bound)?,
        csv: Vec::new(),
        exit,
    })
}

#[derive(Serialize)]
struct QmEvaluation {
    config: ConfigFile,
    ardehali_lhs: bell_expressions::BellValue,
    expression22_lhs: bell_expressions::BellValue,
    chsh_value: f64,
    bundle: ProbabilityBundle,
}

fn qm_eval(file: &ConfigFile) -> Result<Report> {
    let config = file.to_config()?;
    let bundle = bell_expressions::qm_bundle(&config)?;
    let s = &config.settings;
    let eval = QmEvaluation {
        config: *file,
        ardehali_lhs: bell_expressions::ratio_lhs(&bundle)?,
        expression22_lhs: bell_expressions::expression22_lhs(&bundle)?,
        chsh_value: bell_expressions::chsh_value(&config, s.a, s.a_prime, s.b, s.b_prime),
        bundle,
    };
    Ok(Report {
        json_name: "qm_eval.json",
        body: serde_json::to_value(eval)?,
        csv: Vec::new(),
        exit: EXIT_OK,
    })
}

fn simulate(file: &ConfigFile, bootstrap: u32) -> Result<Report> {
    let config = file.to_config()?;
    let mut result = simulator::simulate(&config, bootstrap)?;
    // echo the file as written rather than the re-derived degrees
    result.config = Some(*file);
    let mut csv = Vec::new();
    result.counts.write_csv(&mut csv, Some("run_result.json"))?;
    Ok(Report {
        json_name: "run_result.json",
        body: serde_json::to_value(result)?,
        csv: vec![("counts.csv", csv)],
        exit: EXIT_OK,
    })
}

fn trace_csv(result: &OptimizationResult) -> Result<Vec<u8>> {
    let mut buf = b"# manifest: optimization.json\n".to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for t in &result.trace {
            w.serialize(t)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

fn optimize(
    file: &ConfigFile,
    grid_step: f64,
    starts: usize,
    refine_iters: usize,
    objective: Objective,
) -> Result<Report> {
    let config = file.to_config()?;
    let result = match objective {
        Objective::Ratio => optimizer::optimize_ratio(&config, grid_step, starts, refine_iters)?,
        Objective::Chsh => optimizer::optimize_chsh_with(&config, grid_step, starts, refine_iters)?,
    };
    let csv = trace_csv(&result)?;
    let mut body = serde_json::to_value(&result)?;
    body["setting_differences_deg"] = json!(result.best_settings.differences_deg());
    Ok(Report {
        json_name: "optimization.json",
        body,
        csv: vec![("trace.csv", csv)],
        exit: EXIT_OK,
    })
}

/// Violation factor `|value / bound|` of the ratio inequality at full visibility.
fn ratio_factor(settings: Settings) -> Result<f64> {
    let config = ExperimentConfig::default().with_settings(settings);
    let value = bell_expressions::ratio_lhs(&bell_expressions::qm_bundle(&config)?)?.value;
    Ok(value / bell_expressions::LOCAL_BOUND)
}

fn compare() -> Result<Report> {
    let reference = ratio_factor(Settings::reference())?;
    let optimized = ratio_factor(Settings::ratio_minimizer())?;
    let margin_ratio = bell_expressions::margin_ratio(reference);
    let optimized_margin_ratio = bell_expressions::margin_ratio(optimized);
    let body = json!({
        "ardehali_factor": reference,
        "chsh_factor": std::f64::consts::SQRT_2,
        "margin_ratio": margin_ratio,
        "percent_larger": 100.0 * (margin_ratio - 1.0),
        "optimized_factor": optimized,
        "optimized_margin_ratio": optimized_margin_ratio,
        "optimized_settings": optimizer::AnalyzerAngles::from(Settings::ratio_minimizer()),
    });
    Ok(Report {
        json_name: "compare.json",
        body,
        csv: Vec::new(),
        exit: EXIT_OK,
    })
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ConfigFile> {
    let mut file = ConfigFile::load(path)?;
    if let Some(seed) = seed {
        file.seed = seed;
    }
    Ok(file)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let (report, config_path, seed) = match &cli.command {
        Command::VerifyTheorem {
            samples,
            seed,
            grid_checks,
            grid_step,
        } => {
            let seed = seed.unwrap_or(DEFAULT_THEOREM_SEED);
            (
                verify_theorem(*samples, seed, *grid_checks, *grid_step)?,
                None,
                Some(seed),
            )
        }
        Command::LhvBound { expression } => (lhv_bound(*expression)?, None, None),
        Command::QmEval { config } => {
            let file = load_config(config, None)?;
            (qm_eval(&file)?, Some(config.as_path()), None)
        }
        Command::Simulate {
            config,
            bootstrap,
            seed,
        } => {
            let file = load_config(config, *seed)?;
            (
                simulate(&file, *bootstrap)?,
                Some(config.as_path()),
                Some(file.seed),
            )
        }
        Command::Optimize {
            config,
            grid_step,
            starts,
            refine_iters,
            objective,
        } => {
            let file = load_config(config, None)?;
            (
                optimize(&file, *grid_step, *starts, *refine_iters, *objective)?,
                Some(config.as_path()),
                None,
            )
        }
        Command::Compare => (compare()?, None, None),
    };

    let mut manifest = RunManifest::new(cli.command.name(), config_path, seed);
    if let Some(dir) = &cli.output_dir {
        manifest
            .outputs
            .push(dir.join(report.json_name).display().to_string());
        for (name, _) in &report.csv {
            manifest.outputs.push(dir.join(name).display().to_string());
        }
    }
    let mut document = report.body;
    document["manifest"] = serde_json::to_value(&manifest)?;
    let text = serde_json::to_string_pretty(&document)?;

    if let Some(dir) = &cli.output_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(report.json_name), format!("{text}\n"))?;
        for (name, bytes) in &report.csv {
            fs::write(dir.join(name), bytes)?;
        }
    }
    writeln!(out, "{text}")?;
    Ok(report.exit)
}

/// Parses `args` (program name first) and runs the command, writing the JSON
/// report to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("twochannel-bell").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn expression_ids() {
        assert_eq!(parse_expression("22"), Ok(Inequality::Singles));
        assert_eq!(parse_expression("28"), Ok(Inequality::Ratio));
        assert!(parse_expression("30").is_err());
        assert!(parse_expression("x").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(
            run_capture(&["verify-theorem", "--samples", "0"]).0,
            EXIT_USAGE
        );
        assert_eq!(
            run_capture(&["lhv-bound", "--expression", "30"]).0,
            EXIT_USAGE
        );
        assert_eq!(run_capture(&["no-such-command"]).0, EXIT_USAGE);
        let (code, _, err) = run_capture(&["qm-eval", "--config", "/nonexistent/config.json"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("path"), "{err}");
    }

    #[test]
    fn compare_factors() {
        let (code, out, _) = run_capture(&["compare"]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!((v["ardehali_factor"].as_f64().unwrap() - 1.5).abs() < 1e-12);
        assert!((v["chsh_factor"].as_f64().unwrap() - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((v["percent_larger"].as_f64().unwrap() - 20.710678118654755).abs() < 1e-9);
        assert!(
            (v["optimized_factor"].as_f64().unwrap() - (2.0 * std::f64::consts::SQRT_2 - 1.0))
                .abs()
                < 1e-12
        );
        assert!((v["optimized_margin_ratio"].as_f64().unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(v["manifest"]["subcommand"], "compare");
    }

    #[test]
    fn lhv_bound_report() {
        let (code, out, _) = run_capture(&["lhv-bound", "--expression", "28"]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["min_value"].as_f64(), Some(-1.0));
        assert_eq!(v["vertex_count"].as_u64(), Some(361));
        assert_eq!(v["vertices"].as_array().unwrap().len(), 361);
    }
}
