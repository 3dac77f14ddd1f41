//! Command-line interface: argument parsing, seed resolution, versioned JSON
//! config files, and the implementations behind the `kacrice` commands.
//!
//! Commands (`inr`, `dnr-table`, `experiment`, `holes`, `converge`,
//! `calibrate`, plus `rerun` for manifest replay) share one pipeline: resolve
//! the configuration, compute every artifact in memory, then commit the
//! artifacts and a [`RunManifest`](crate::io::RunManifest) atomically into
//! the output directory.  Numerics never depend on `--threads`, so a rerun
//! from the manifest reproduces artifacts byte for byte at any worker count.
//!
//! Seed precedence is `--seed` flag > `KACRICE_SEED` environment variable >
//! config file > default 0; the resolved seed is echoed into the config
//! inside the manifest, so manifests never depend on the environment.
//!
//! Exit codes (mapped in `main`): 0 success, 1 usage/configuration errors,
//! 2 numerical failures (estimator breakdown, reproduction mismatch).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{
    run_convergence_sequence, run_hole_probability, run_moment_experiment, ConvergenceConfig,
    ExperimentConfig, HoleConfig,
};
use crate::io::{
    convergence_rows_csv, convergence_series_csv, dnr_table_csv, hole_report_csv,
    moment_report_csv, read_manifest, RunManifest, RunOutputs,
};
use crate::kostlan::{enumerate_multi_indices, KostlanPolynomial, KostlanSystem};
use crate::limit_law::{dnr, dnr_many, estimate_inr_with_table, DnrEvaluation, McSpec, QuadratureSpec};
use crate::rng::{stream, TAG_CALIBRATE};
use crate::special::sphere_volume;
use crate::zero_stats::crofton_statistic;

/// Schema tags for the JSON config files (explicit versioning).
pub const EXPERIMENT_SCHEMA: &str = "kacrice/experiment-v1";
pub const HOLES_SCHEMA: &str = "kacrice/holes-v1";
pub const CONVERGE_SCHEMA: &str = "kacrice/converge-v1";

/// Top-level command line.
#[derive(Debug, Parser)]
#[command(
    name = "kacrice",
    version,
    about = "Numerical laboratory for zero sets of Kostlan random polynomial systems"
)]
pub struct Cli {
    /// Worker threads for the parallel sections (does not change numerics).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory where artifacts and manifests are written.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the variance constant I_{n,r} by quadrature over Monte Carlo
    /// node estimates; writes a JSON estimate and a per-node CSV.
    Inr(InrArgs),
    /// Tabulate the two-point variance density D_{n,r}(t) on a t grid.
    DnrTable(DnrTableArgs),
    /// Run a moment experiment (empirical vs theoretical zero-set moments)
    /// from a JSON config file.
    Experiment(ConfigArgs),
    /// Estimate hole probabilities for a fixed spherical cap from a JSON
    /// config file.
    Holes(ConfigArgs),
    /// Run independent convergence sequences of the rescaled statistic from
    /// a JSON config file.
    Converge(ConfigArgs),
    /// Check Crofton calibration against exact equator volumes.
    Calibrate(CalibrateArgs),
    /// Re-execute a previous run from its manifest and verify that every
    /// artifact reproduces byte-identically.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct InrArgs {
    /// Ambient dimension n.
    #[arg(long)]
    pub n: usize,
    /// Codimension r (must satisfy r < n).
    #[arg(long)]
    pub r: usize,
    /// Master seed (overrides KACRICE_SEED; default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Truncation point t_max of the quadrature.
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Boundary between the substituted and plain quadrature regions.
    #[arg(long)]
    pub tsplit: Option<f64>,
    /// Gauss–Legendre nodes on (0, t_split].
    #[arg(long)]
    pub nodes_low: Option<usize>,
    /// Gauss–Legendre nodes per panel on [t_split, t_max].
    #[arg(long)]
    pub nodes_high: Option<usize>,
    /// Monte Carlo samples per quadrature node.
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DnrTableArgs {
    /// Ambient dimension n.
    #[arg(long)]
    pub n: usize,
    /// Codimension r (must satisfy r < n).
    #[arg(long)]
    pub r: usize,
    /// Grid start (t > 0).
    #[arg(long, default_value_t = 0.05)]
    pub t_min: f64,
    /// Grid end.
    #[arg(long, default_value_t = 40.0)]
    pub t_max: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 30)]
    pub points: usize,
    /// Use a linear grid instead of the default geometric one.
    #[arg(long)]
    pub linear: bool,
    /// Monte Carlo samples per node.
    #[arg(long, default_value_t = 20_000)]
    pub samples: u64,
    /// Share common random numbers across nodes (smooth curve, correlated
    /// errors) instead of sampling each node independently.
    #[arg(long)]
    pub crn: bool,
    /// Master seed (overrides KACRICE_SEED; default 0).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Path to the JSON config file.
    pub config: PathBuf,
    /// Master seed (overrides KACRICE_SEED and the config file).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Check every ambient dimension n in 2..=max_n.
    #[arg(long, default_value_t = 4)]
    pub max_n: usize,
    /// Haar great circles per dimension.
    #[arg(long, default_value_t = 200)]
    pub k_geodesics: usize,
    /// Master seed (overrides KACRICE_SEED; default 0).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// Path to a manifest written by a previous run.
    pub manifest: PathBuf,
}

/// Resolved configuration echoed by the `inr` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InrConfig {
    pub n: usize,
    pub r: usize,
    pub quadrature: QuadratureSpec,
}

/// Resolved configuration echoed by the `dnr-table` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnrTableConfig {
    pub n: usize,
    pub r: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub linear: bool,
    pub samples: u64,
    pub crn: bool,
    pub seed: u64,
}

/// Resolved configuration echoed by the `calibrate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateConfig {
    pub max_n: usize,
    pub k_geodesics: usize,
    pub seed: u64,
}

/// One dimension of the calibration table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateRow {
    pub n: usize,
    pub estimate: f64,
    pub exact: f64,
    pub rel_error: f64,
    pub counts_exactly_two: bool,
}

/// Parse `KACRICE_SEED` if present.
fn env_seed() -> Result<Option<u64>> {
    match std::env::var("KACRICE_SEED") {
        Ok(text) => text.trim().parse::<u64>().map(Some).map_err(|_| {
            Error::Config(format!(
                "KACRICE_SEED must be an unsigned integer, got {text:?}"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(err) => Err(Error::Config(format!("KACRICE_SEED: {err}"))),
    }
}

/// Seed precedence with an injected environment value (pure, for tests).
fn resolve_seed_from(cli: Option<u64>, env: Option<u64>, config: Option<u64>) -> u64 {
    cli.or(env).or(config).unwrap_or(0)
}

/// Seed precedence: `--seed` flag > `KACRICE_SEED` > config file > 0.
pub fn resolve_seed(cli: Option<u64>, config: Option<u64>) -> Result<u64> {
    Ok(resolve_seed_from(cli, env_seed()?, config))
}

/// Read a JSON config file with an explicit `schema` tag, reporting schema
/// violations with the path to the offending field.
pub fn read_versioned_config<T: DeserializeOwned>(path: &Path, expected: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| Error::Config(format!("cannot read config {}: {err}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|err| Error::Config(format!("config {} is not valid JSON: {err}", path.display())))?;
    let object = value.as_object_mut().ok_or_else(|| {
        Error::Config(format!("config {} must be a JSON object", path.display()))
    })?;
    match object.remove("schema") {
        Some(serde_json::Value::String(schema)) if schema == expected => {}
        Some(serde_json::Value::String(schema)) => {
            return Err(Error::Config(format!(
                "config {} has schema {schema:?}, expected {expected:?}",
                path.display()
            )));
        }
        _ => {
            return Err(Error::Config(format!(
                "config {} lacks the required \"schema\": {expected:?} field",
                path.display()
            )));
        }
    }
    serde_path_to_error::deserialize(value).map_err(|err| {
        Error::Config(format!(
            "config {}: invalid field `{}`: {}",
            path.display(),
            err.path(),
            err.inner()
        ))
    })
}

/// Monotone `t` grid, geometric by default, with exact endpoints.
fn t_grid(t_min: f64, t_max: f64, points: usize, linear: bool) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_min.is_finite()) {
        return Err(Error::Config(format!("t_min must be positive, got {t_min}")));
    }
    if !(t_max > t_min && t_max.is_finite()) {
        return Err(Error::Config(format!(
            "t_max must exceed t_min = {t_min}, got {t_max}"
        )));
    }
    if points < 2 {
        return Err(Error::Config(format!(
            "grid needs at least 2 points, got {points}"
        )));
    }
    let span = (points - 1) as f64;
    let mut ts: Vec<f64> = (0..points)
        .map(|i| {
            let s = i as f64 / span;
            if linear {
                t_min + s * (t_max - t_min)
            } else {
                t_min * (t_max / t_min).powf(s)
            }
        })
        .collect();
    ts[0] = t_min;
    ts[points - 1] = t_max;
    Ok(ts)
}

/// Distinct per-node seed for independent (non-CRN) table mode.
fn node_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// The zero set of `P = X₀` on `S^n`: the equator `S^{n−1}`, as a one-equation
/// Kostlan system (used by the calibration command).
fn equator_system(n: usize) -> Result<KostlanSystem> {
    let indices = enumerate_multi_indices(n, 1)?;
    let mut coefficients = vec![0.0; indices.len()];
    let position = indices
        .iter()
        .position(|alpha| alpha.exponents[0] == 1)
        .expect("degree-1 basis contains X₀");
    // The X₀ monomial has Kostlan weight √binom(1; 1, 0, …) = 1, so a unit
    // coefficient gives exactly P = X₀.
    coefficients[position] = 1.0;
    KostlanSystem::new(vec![KostlanPolynomial::new(n, 1, coefficients)?])
}

/// Compute the `inr` command's artifacts.
pub fn produce_inr(config: &InrConfig) -> Result<(RunOutputs, String)> {
    let (estimate, table) = estimate_inr_with_table(config.n, config.r, config.quadrature)?;
    let stem = format!("inr_n{}_r{}", config.n, config.r);
    let mut outputs = RunOutputs::new("inr", config, config.quadrature.seed)?;
    outputs.set_manifest_stem(&stem);
    outputs.add_json(&format!("{stem}.json"), &estimate)?;
    outputs.add(&format!("{stem}_nodes.csv"), dnr_table_csv(&table));
    let summary = format!(
        "I_{{{},{}}} = {:.12} ± {:.3e} (se) ± {:.3e} (tail bound)",
        config.n, config.r, estimate.value, estimate.statistical_se, estimate.tail_bound
    );
    Ok((outputs, summary))
}

/// Compute the `dnr-table` command's artifacts.
pub fn produce_dnr_table(config: &DnrTableConfig) -> Result<(RunOutputs, String)> {
    let ts = t_grid(config.t_min, config.t_max, config.points, config.linear)?;
    let rows: Vec<DnrEvaluation> = if config.crn {
        dnr_many(
            &ts,
            config.n,
            config.r,
            McSpec {
                n_samples: config.samples,
                seed: config.seed,
            },
        )?
    } else {
        ts.iter()
            .enumerate()
            .map(|(i, &t)| {
                dnr(
                    t,
                    config.n,
                    config.r,
                    McSpec {
                        n_samples: config.samples,
                        seed: node_seed(config.seed, i),
                    },
                )
            })
            .collect::<Result<Vec<_>>>()?
    };
    let stem = format!("dnr_n{}_r{}", config.n, config.r);
    let mut outputs = RunOutputs::new("dnr-table", config, config.seed)?;
    outputs.set_manifest_stem(&stem);
    outputs.add(&format!("{stem}.csv"), dnr_table_csv(&rows));
    let last = rows.last().expect("grid has at least two points");
    let summary = format!(
        "D_{{{},{}}} tabulated on {} nodes in [{}, {}] ({}, {}); D({}) = {:.6e} ± {:.2e}",
        config.n,
        config.r,
        rows.len(),
        config.t_min,
        config.t_max,
        if config.linear { "linear" } else { "geometric" },
        if config.crn {
            "common random numbers"
        } else {
            "independent nodes"
        },
        last.t,
        last.estimate,
        last.std_error
    );
    Ok((outputs, summary))
}

/// Compute the `experiment` command's artifacts.
pub fn produce_experiment(config: &ExperimentConfig) -> Result<(RunOutputs, String)> {
    let report = run_moment_experiment(config)?;
    let mut outputs = RunOutputs::new("experiment", config, config.seed)?;
    outputs.add("experiment.csv", moment_report_csv(&report));
    outputs.add_json("experiment_report.json", &report)?;
    let mut summary = String::new();
    if report.rows.is_empty() {
        summary.push_str("no trials requested; empty report");
    }
    for row in &report.rows {
        let _ = write!(
            summary,
            "d = {:>4}: mean {:.6} vs theory {:.6} ({:+.2}%), corrected var {:.6}",
            row.d,
            row.mean,
            row.theory_mean,
            100.0 * (row.mean / row.theory_mean - 1.0),
            row.var_corrected,
        );
        if let Some(theory_var) = row.theory_var {
            let _ = write!(summary, " vs theory {theory_var:.6}");
        }
        if row.trials_failed > 0 {
            let _ = write!(summary, " [{} trials failed]", row.trials_failed);
        }
        summary.push('\n');
    }
    Ok((outputs, summary.trim_end().to_string()))
}

/// Compute the `holes` command's artifacts.
pub fn produce_holes(config: &HoleConfig) -> Result<(RunOutputs, String)> {
    let report = run_hole_probability(config)?;
    let mut outputs = RunOutputs::new("holes", config, config.seed)?;
    outputs.add("holes.csv", hole_report_csv(&report));
    outputs.add_json("holes_report.json", &report)?;
    let mut summary = String::new();
    for row in &report.rows {
        let _ = writeln!(
            summary,
            "d = {:>4}: p = {:.5} [{:.5}, {:.5}], p·d = {:.4}",
            row.d, row.frequency, row.ci.0, row.ci.1, row.scaled
        );
    }
    Ok((outputs, summary.trim_end().to_string()))
}

/// Compute the `converge` command's artifacts.
pub fn produce_converge(config: &ConvergenceConfig) -> Result<(RunOutputs, String)> {
    let report = run_convergence_sequence(config)?;
    let mut outputs = RunOutputs::new("converge", config, config.seed)?;
    outputs.add("converge.csv", convergence_rows_csv(&report));
    outputs.add("converge_series.csv", convergence_series_csv(&report));
    outputs.add_json("converge_report.json", &report)?;
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "limit {:.6}{}",
        report.limit,
        if report.conjectural {
            " (n = 2: conjectural regime, almost-sure law proved for n ≥ 3)"
        } else {
            ""
        }
    );
    for row in &report.rows {
        let _ = writeln!(
            summary,
            "d = {:>4}: scaled mean {:.6} (deviation {:+.2e}), spread {:.3e}",
            row.d, row.mean_scaled, row.deviation, row.spread
        );
    }
    Ok((outputs, summary.trim_end().to_string()))
}

/// Compute the `calibrate` command's artifacts.
///
/// For each `n` the zero set of `P = X₀` is the equator `S^{n−1}`: the
/// Crofton estimate must return its exact volume with every sampled geodesic
/// meeting it exactly twice.  Any calibration miss is a numerical failure.
pub fn produce_calibrate(config: &CalibrateConfig) -> Result<(RunOutputs, String)> {
    if config.max_n < 2 {
        return Err(Error::Config(format!(
            "calibration needs max_n ≥ 2, got {}",
            config.max_n
        )));
    }
    if config.k_geodesics == 0 {
        return Err(Error::Config(
            "calibration needs at least one geodesic".into(),
        ));
    }
    let mut rows = Vec::new();
    for n in 2..=config.max_n {
        let system = equator_system(n)?;
        let mut rng = stream(config.seed, &[TAG_CALIBRATE, n as u64]);
        let estimate = crofton_statistic(&system, |_| 1.0, config.k_geodesics, &mut rng)?;
        let exact = sphere_volume(n as u32 - 1);
        let counts = estimate.per_geodesic_counts;
        rows.push(CalibrateRow {
            n,
            estimate: estimate.value,
            exact,
            rel_error: (estimate.value - exact) / exact,
            counts_exactly_two: counts.mean() == 2.0 && counts.variance() == 0.0,
        });
    }
    let mut outputs = RunOutputs::new("calibrate", config, config.seed)?;
    let mut csv = String::from("n,estimate,exact,rel_error,counts_exactly_two\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.n, row.estimate, row.exact, row.rel_error, row.counts_exactly_two
        );
    }
    outputs.add("calibrate.csv", csv.into_bytes());
    outputs.add_json("calibrate_report.json", &rows)?;
    let mut summary = String::new();
    for row in &rows {
        let _ = writeln!(
            summary,
            "n = {}: Vol(S^{}) estimate {:.12} vs exact {:.12} (rel {:+.2e}), counts exactly 2: {}",
            row.n,
            row.n - 1,
            row.estimate,
            row.exact,
            row.rel_error,
            row.counts_exactly_two
        );
    }
    // The accumulator's float noise floor is ~1e−8 relative on identical
    // summands; calibration demands agreement well below estimator noise.
    if let Some(bad) = rows
        .iter()
        .find(|row| row.rel_error.abs() > 1e-9 || !row.counts_exactly_two)
    {
        return Err(Error::Numerical(format!(
            "Crofton calibration failed at n = {}: estimate {:.15} vs exact {:.15}, counts exactly 2: {}",
            bad.n, bad.estimate, bad.exact, bad.counts_exactly_two
        )));
    }
    Ok((outputs, summary.trim_end().to_string()))
}

/// Deserialize a manifest's config echo into a typed command config.
fn typed_config<T: DeserializeOwned>(value: serde_json::Value, command: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|err| {
        Error::Dependency(format!(
            "manifest config for {command}: invalid field `{}`: {}",
            err.path(),
            err.inner()
        ))
    })
}

/// Re-execute the command recorded in a manifest, returning fresh artifacts.
pub fn produce_from_manifest(manifest: &RunManifest) -> Result<(RunOutputs, String)> {
    let config = manifest.config.clone();
    match manifest.command.as_str() {
        "inr" => produce_inr(&typed_config::<InrConfig>(config, "inr")?),
        "dnr-table" => produce_dnr_table(&typed_config::<DnrTableConfig>(config, "dnr-table")?),
        "experiment" => {
            produce_experiment(&typed_config::<ExperimentConfig>(config, "experiment")?)
        }
        "holes" => produce_holes(&typed_config::<HoleConfig>(config, "holes")?),
        "converge" => produce_converge(&typed_config::<ConvergenceConfig>(config, "converge")?),
        "calibrate" => produce_calibrate(&typed_config::<CalibrateConfig>(config, "calibrate")?),
        other => Err(Error::Dependency(format!(
            "manifest command {other:?} is not recognized"
        ))),
    }
}

fn commit_and_print(result: (RunOutputs, String), out_dir: &Path) -> Result<()> {
    let (outputs, summary) = result;
    let written = outputs.commit(out_dir)?;
    println!("{summary}");
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_rerun(args: &RerunArgs, out_dir: &Path) -> Result<()> {
    let manifest = read_manifest(&args.manifest)?;
    let (outputs, summary) = produce_from_manifest(&manifest)?;
    let diverging = outputs.diverging_outputs(&manifest.outputs);
    if !diverging.is_empty() {
        return Err(Error::Numerical(format!(
            "reproduction mismatch for `{}`: artifacts {} differ from the manifest hashes",
            manifest.command,
            diverging.join(", ")
        )));
    }
    let written = outputs.commit(out_dir)?;
    println!(
        "reproduced `{}` byte-identically ({} artifacts verified)",
        manifest.command,
        manifest.outputs.len()
    );
    println!("{summary}");
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // Worker count affects scheduling only; all reductions are keyed and
        // order-preserving, so numerics are identical for every pool size.
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|err| {
                Error::Config(format!("cannot configure {threads} worker threads: {err}"))
            })?;
    }
    match &cli.command {
        Command::Inr(args) => {
            let seed = resolve_seed(args.seed, None)?;
            let defaults = QuadratureSpec::default();
            let quadrature = QuadratureSpec {
                t_split: args.tsplit.unwrap_or(defaults.t_split),
                t_max: args.tmax.unwrap_or(defaults.t_max),
                nodes_low: args.nodes_low.unwrap_or(defaults.nodes_low),
                nodes_high: args.nodes_high.unwrap_or(defaults.nodes_high),
                samples_per_node: args.samples.unwrap_or(defaults.samples_per_node),
                seed,
            };
            let config = InrConfig {
                n: args.n,
                r: args.r,
                quadrature,
            };
            commit_and_print(produce_inr(&config)?, &cli.out)
        }
        Command::DnrTable(args) => {
            let seed = resolve_seed(args.seed, None)?;
            let config = DnrTableConfig {
                n: args.n,
                r: args.r,
                t_min: args.t_min,
                t_max: args.t_max,
                points: args.points,
                linear: args.linear,
                samples: args.samples,
                crn: args.crn,
                seed,
            };
            commit_and_print(produce_dnr_table(&config)?, &cli.out)
        }
        Command::Experiment(args) => {
            let mut config: ExperimentConfig =
                read_versioned_config(&args.config, EXPERIMENT_SCHEMA)?;
            config.seed = resolve_seed(args.seed, Some(config.seed))?;
            config.validate()?;
            commit_and_print(produce_experiment(&config)?, &cli.out)
        }
        Command::Holes(args) => {
            let mut config: HoleConfig = read_versioned_config(&args.config, HOLES_SCHEMA)?;
            config.seed = resolve_seed(args.seed, Some(config.seed))?;
            config.validate()?;
            commit_and_print(produce_holes(&config)?, &cli.out)
        }
        Command::Converge(args) => {
            let mut config: ConvergenceConfig =
                read_versioned_config(&args.config, CONVERGE_SCHEMA)?;
            config.seed = resolve_seed(args.seed, Some(config.seed))?;
            config.validate()?;
            commit_and_print(produce_converge(&config)?, &cli.out)
        }
        Command::Calibrate(args) => {
            let seed = resolve_seed(args.seed, None)?;
            let config = CalibrateConfig {
                max_n: args.max_n,
                k_geodesics: args.k_geodesics,
                seed,
            };
            commit_and_print(produce_calibrate(&config)?, &cli.out)
        }
        Command::Rerun(args) => cmd_rerun(args, &cli.out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{EstimatorSpec, ManifoldMode, PhiSpec};
    use crate::kostlan::SpherePoint;

    #[test]
    fn seed_precedence_is_cli_env_config_default() {
        // [TRIVIAL] documented contract: flag > environment > config > 0.
        assert_eq!(resolve_seed_from(Some(1), Some(2), Some(3)), 1);
        assert_eq!(resolve_seed_from(None, Some(2), Some(3)), 2);
        assert_eq!(resolve_seed_from(None, None, Some(3)), 3);
        assert_eq!(resolve_seed_from(None, None, None), 0);
    }

    #[test]
    fn t_grid_is_monotone_with_exact_endpoints() {
        for &linear in &[false, true] {
            let ts = t_grid(0.05, 40.0, 17, linear).unwrap();
            assert_eq!(ts.len(), 17);
            assert_eq!(ts[0], 0.05);
            assert_eq!(ts[16], 40.0);
            assert!(ts.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(t_grid(0.0, 1.0, 5, false).is_err());
        assert!(t_grid(1.0, 1.0, 5, false).is_err());
        assert!(t_grid(0.1, 1.0, 1, false).is_err());
    }

    #[test]
    fn node_seeds_are_distinct() {
        let seeds: Vec<u64> = (0..64).map(|i| node_seed(7, i)).collect();
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), seeds.len());
    }

    #[test]
    fn equator_system_evaluates_to_first_coordinate() {
        for n in 2..=4 {
            let system = equator_system(n).unwrap();
            let mut rng = stream(1, &[TAG_CALIBRATE, 99, n as u64]);
            for _ in 0..10 {
                let point = SpherePoint::random(n, &mut rng);
                let values = system.evaluate(point.coords()).unwrap();
                assert_eq!(values.len(), 1);
                assert!(
                    (values[0] - point.coords()[0]).abs() < 1e-15,
                    "P(x) = {} but x₀ = {}",
                    values[0],
                    point.coords()[0]
                );
            }
        }
    }

    fn write_config(dir: &std::path::Path, body: &serde_json::Value) -> PathBuf {
        let path = dir.join("config.json");
        std::fs::write(&path, serde_json::to_string_pretty(body).unwrap()).unwrap();
        path
    }

    fn minimal_experiment_body() -> serde_json::Value {
        serde_json::json!({
            "schema": EXPERIMENT_SCHEMA,
            "n": 2,
            "r": 1,
            "degrees": [4],
            "trials": 30,
            "estimator": { "method": "crofton", "k_geodesics": 20 },
            "phi": { "name": "constant", "value": 1.0 },
            "seed": 5,
        })
    }

    #[test]
    fn versioned_config_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), &minimal_experiment_body());
        let config: ExperimentConfig = read_versioned_config(&path, EXPERIMENT_SCHEMA).unwrap();
        assert_eq!(config.n, 2);
        assert_eq!(config.degrees, vec![4]);
        assert_eq!(config.seed, 5);
        assert_eq!(config.estimator, EstimatorSpec::Crofton { k_geodesics: 20 });
        assert_eq!(config.phi, PhiSpec::Constant { value: 1.0 });
        assert_eq!(config.mode, ManifoldMode::Sphere, "mode defaults to sphere");
    }

    #[test]
    fn versioned_config_rejects_schema_problems_with_field_paths() {
        let dir = tempfile::tempdir().unwrap();

        // Missing schema tag.
        let mut body = minimal_experiment_body();
        body.as_object_mut().unwrap().remove("schema");
        let path = write_config(dir.path(), &body);
        let err = read_versioned_config::<ExperimentConfig>(&path, EXPERIMENT_SCHEMA).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("schema"), "{err}");

        // Wrong schema version.
        let mut body = minimal_experiment_body();
        body["schema"] = serde_json::json!("kacrice/experiment-v0");
        let path = write_config(dir.path(), &body);
        let err = read_versioned_config::<ExperimentConfig>(&path, EXPERIMENT_SCHEMA).unwrap_err();
        assert!(err.to_string().contains(EXPERIMENT_SCHEMA), "{err}");

        // Type error deep in a field: the message names the path.  (Tagged
        // enums buffer their content, so errors inside `estimator` point at
        // the enum field itself; plain nested fields carry the full path.)
        let mut body = minimal_experiment_body();
        body["degrees"] = serde_json::json!([4, "nine"]);
        let path = write_config(dir.path(), &body);
        let err = read_versioned_config::<ExperimentConfig>(&path, EXPERIMENT_SCHEMA).unwrap_err();
        assert!(
            err.to_string().contains("degrees[1]"),
            "error should point at the field: {err}"
        );

        let mut body = minimal_experiment_body();
        body["estimator"]["k_geodesics"] = serde_json::json!("many");
        let path = write_config(dir.path(), &body);
        let err = read_versioned_config::<ExperimentConfig>(&path, EXPERIMENT_SCHEMA).unwrap_err();
        assert!(
            err.to_string().contains("estimator"),
            "error should point at the enum field: {err}"
        );

        // Unknown field.
        let mut body = minimal_experiment_body();
        body["trails"] = serde_json::json!(100);
        let path = write_config(dir.path(), &body);
        let err = read_versioned_config::<ExperimentConfig>(&path, EXPERIMENT_SCHEMA).unwrap_err();
        assert!(err.to_string().contains("trails"), "{err}");
    }

    #[test]
    fn calibrate_produces_exact_rows() {
        let config = CalibrateConfig {
            max_n: 3,
            k_geodesics: 60,
            seed: 11,
        };
        let (outputs, summary) = produce_calibrate(&config).unwrap();
        assert_eq!(outputs.names(), vec!["calibrate.csv", "calibrate_report.json"]);
        assert!(summary.contains("n = 2"));
        assert!(summary.contains("counts exactly 2: true"));
    }

    #[test]
    fn produce_experiment_stages_csv_json_and_summary() {
        let config = ExperimentConfig {
            n: 2,
            r: 1,
            degrees: vec![4],
            trials: 30,
            estimator: EstimatorSpec::Crofton { k_geodesics: 20 },
            phi: PhiSpec::Constant { value: 1.0 },
            seed: 5,
            mode: ManifoldMode::Sphere,
            inr_source: None,
        };
        let (outputs, summary) = produce_experiment(&config).unwrap();
        assert_eq!(outputs.names(), vec!["experiment.csv", "experiment_report.json"]);
        assert!(summary.contains("d =    4"), "{summary}");
        assert!(summary.contains("theory"), "{summary}");
    }

    #[test]
    fn rerun_detects_matching_and_diverging_artifacts() {
        // produce → records; a fresh produce with the same config must agree.
        // (Calibration is exact, so its artifacts are even invariant to the
        // seed and geodesic budget; use the stochastic dnr table to exercise
        // divergence detection.)
        let config = CalibrateConfig {
            max_n: 2,
            k_geodesics: 40,
            seed: 3,
        };
        let (first, _) = produce_calibrate(&config).unwrap();
        let records = first.records();
        let (again, _) = produce_calibrate(&config).unwrap();
        assert!(again.diverging_outputs(&records).is_empty());

        let table = DnrTableConfig {
            n: 2,
            r: 1,
            t_min: 1.0,
            t_max: 2.0,
            points: 2,
            linear: true,
            samples: 1000,
            crn: true,
            seed: 1,
        };
        let (first, _) = produce_dnr_table(&table).unwrap();
        let records = first.records();
        let (same, _) = produce_dnr_table(&table).unwrap();
        assert!(same.diverging_outputs(&records).is_empty());
        let mut reseeded = table.clone();
        reseeded.seed = 2;
        let (other, _) = produce_dnr_table(&reseeded).unwrap();
        assert!(!other.diverging_outputs(&records).is_empty());
    }
}
