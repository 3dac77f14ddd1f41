//! Experiment harness: closed-form leading-term predictions for zero-set
//! statistics and Monte-Carlo drivers that compare them against sampled
//! Kostlan systems.
//!
//! For the linear statistic `⟨|dV|, φ⟩ = ∫_{Z} φ` of the real zero set `Z` of
//! a Kostlan system on `M ∈ {S^n, RP^n}` the theory side packages
//!
//! ```text
//!   E ⟨|dV|, φ⟩  ≈ d^{r/2}   · (∫_M φ)  · Vol(S^{n−r})/Vol(S^n),
//!   Var ⟨|dV|, φ⟩ ≈ d^{r−n/2} · (∫_M φ²) · Vol(S^{n−1})/(2π)^r · I_{n,r},
//! ```
//!
//! with `I_{n,r}` supplied by [`crate::limit_law`].  The variance formula is
//! stated on the projective quotient; the zero set is antipodally symmetric
//! and every built-in test function is even, so the spherical statistic is
//! exactly twice the projective one.  Volumes integrate 2:1 through the double
//! cover, hence `Var_S = 4·Var_RP` while `∫_{S} φ² = 2 ∫_{RP} φ²`, which
//! leaves a mode factor of 2 in front of the variance formula on the sphere
//! (and 1 on `RP^n`).
//!
//! The experiment side samples systems trial by trial, measures the statistic
//! with the Crofton or marching estimator from [`crate::zero_stats`], and
//! reports empirical moments with 95% confidence intervals next to the
//! predictions.  Per-trial RNG streams are keyed by `(seed, degree, trial)`
//! and reductions preserve trial order, so reports are bit-identical across
//! worker counts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kostlan::{sample_system, SpherePoint};
use crate::limit_law::InrEstimate;
use crate::rng::{stream, TAG_HOLE, TAG_SEQUENCE, TAG_TRIAL};
use crate::special::sphere_volume;
use crate::stats::{normal_ci, wilson_interval, RunningStats, Z_95};
use crate::zero_stats::{
    cap_is_hole, crofton_statistic, marching_length_s2, suggested_marching_level, SphericalCap,
};

/// Which quotient of the sphere the statistic is reported on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldMode {
    /// The unit sphere `S^n` itself.
    Sphere,
    /// The projective quotient `RP^n = S^n/±`; statistics are exactly half
    /// the spherical ones because the zero set is antipodally symmetric and
    /// the built-in test functions are even.
    Projective,
}

/// The manifold a statistic lives on: `S^n` or `RP^n` together with its
/// volume (`Vol(S^n)` in sphere mode, `Vol(S^n)/2` in projective mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldSpec {
    n: usize,
    mode: ManifoldMode,
    volume: f64,
}

impl ManifoldSpec {
    /// Build the spec for `S^n` or `RP^n`.  `n ≥ 1`.
    pub fn new(n: usize, mode: ManifoldMode) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config(
                "manifold dimension n must be at least 1".into(),
            ));
        }
        let sphere = sphere_volume(n as u32);
        let volume = match mode {
            ManifoldMode::Sphere => sphere,
            ManifoldMode::Projective => 0.5 * sphere,
        };
        Ok(Self { n, mode, volume })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> ManifoldMode {
        self.mode
    }

    /// `Vol(M)`: the full sphere volume, halved in projective mode.
    pub fn volume(&self) -> f64 {
        self.volume
    }
}

/// `E[u₀^{2k}]` for a uniform point `u` on `S^n`.
///
/// `u₀²` is Beta(1/2, n/2), so the even moments telescope:
/// `E[u₀^{2k}] = ∏_{j=0}^{k−1} (1/2 + j) / ((n+1)/2 + j)`.
fn coordinate_even_moment(n: usize, k: u32) -> f64 {
    let half_dim = (n as f64 + 1.0) / 2.0;
    let mut value = 1.0;
    for j in 0..k {
        value *= (0.5 + j as f64) / (half_dim + j as f64);
    }
    value
}

/// Built-in test functions `φ: S^n → ℝ`.
///
/// All of them are even (`φ(−x) = φ(x)`), so they descend to `RP^n` and the
/// sphere/projective statistics differ by the exact factor 2.  Their first
/// two moments under the uniform measure have closed forms through the Beta
/// law of a squared coordinate, which is what the theory columns use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSpec {
    /// `φ ≡ value`; the statistic is `value · Vol(Z)`.
    Constant { value: f64 },
    /// `φ(x) = x_axis²`.
    CoordinateSquared { axis: usize },
    /// `φ(x) = x_axis^{2·exponent}`: an even bump concentrated near the
    /// `±e_axis` poles, sharper for larger exponents.
    CapBump { axis: usize, exponent: u32 },
}

impl PhiSpec {
    /// Check the spec against the ambient dimension (points have `n+1`
    /// coordinates, so `axis ≤ n`).
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            PhiSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Config(format!(
                        "constant test function must be finite, got {value}"
                    )));
                }
            }
            PhiSpec::CoordinateSquared { axis } => {
                if *axis > n {
                    return Err(Error::Config(format!(
                        "coordinate axis {axis} out of range for S^{n} (0..={n})"
                    )));
                }
            }
            PhiSpec::CapBump { axis, exponent } => {
                if *axis > n {
                    return Err(Error::Config(format!(
                        "coordinate axis {axis} out of range for S^{n} (0..={n})"
                    )));
                }
                if *exponent == 0 {
                    return Err(Error::Config(
                        "cap bump exponent must be at least 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Evaluate `φ` at a point of `S^n`.
    pub fn evaluate(&self, point: &SpherePoint) -> f64 {
        let coords = point.coords();
        match self {
            PhiSpec::Constant { value } => *value,
            PhiSpec::CoordinateSquared { axis } => coords[*axis] * coords[*axis],
            PhiSpec::CapBump { axis, exponent } => {
                let u = coords[*axis];
                (u * u).powi(*exponent as i32)
            }
        }
    }

    /// `∫_M φ` via the closed-form uniform moments: the integral is
    /// `Vol(M) · E[φ(u)]` and every built-in `φ` is a pure even power of one
    /// coordinate.
    pub fn integral_over(&self, manifold: &ManifoldSpec) -> f64 {
        manifold.volume() * self.uniform_moment(manifold.n(), 1)
    }

    /// `∫_M φ²`, same route with the exponent doubled.
    pub fn square_integral_over(&self, manifold: &ManifoldSpec) -> f64 {
        manifold.volume() * self.uniform_moment(manifold.n(), 2)
    }

    /// `E[φ(u)^power]` for uniform `u ∈ S^n`, `power ∈ {1, 2}`.
    fn uniform_moment(&self, n: usize, power: u32) -> f64 {
        match self {
            PhiSpec::Constant { value } => value.powi(power as i32),
            PhiSpec::CoordinateSquared { .. } => coordinate_even_moment(n, power),
            PhiSpec::CapBump { exponent, .. } => coordinate_even_moment(n, exponent * power),
        }
    }
}

/// Leading term of the expected linear statistic:
/// `E ⟨|dV|, φ⟩ ≈ d^{r/2} · phi_integral · Vol(S^{n−r})/Vol(S^n)`.
///
/// `phi_integral = ∫_M φ` must be taken over the same manifold the statistic
/// is measured on; the manifold argument carries that context and pins the
/// ambient dimension.  No error-term modeling — the exact caller-facing
/// prediction is the leading term only.
pub fn theory_mean(
    n: usize,
    r: usize,
    d: usize,
    phi_integral: f64,
    manifold: &ManifoldSpec,
) -> Result<f64> {
    if manifold.n() != n {
        return Err(Error::Shape(format!(
            "manifold dimension {} does not match n = {n}",
            manifold.n()
        )));
    }
    if r < 1 || r > n {
        return Err(Error::Domain(format!(
            "codimension r = {r} out of range 1..={n}"
        )));
    }
    let ratio = sphere_volume((n - r) as u32) / sphere_volume(n as u32);
    Ok((d as f64).powf(r as f64 / 2.0) * phi_integral * ratio)
}

/// Leading term of the variance of the linear statistic:
/// `Var ⟨|dV|, φ⟩ ≈ mode · d^{r−n/2} · phi_sq_integral · Vol(S^{n−1})/(2π)^r · I_{n,r}`,
/// with mode factor 1 on `RP^n` and 2 on `S^n` (see the module docs).
///
/// The maximal codimension `r = n` is excluded: there the variance scales
/// differently and `I_{n,n}` is not defined.
pub fn theory_variance(
    n: usize,
    r: usize,
    d: usize,
    phi_sq_integral: f64,
    inr: f64,
    manifold: &ManifoldSpec,
) -> Result<f64> {
    if manifold.n() != n {
        return Err(Error::Shape(format!(
            "manifold dimension {} does not match n = {n}",
            manifold.n()
        )));
    }
    if r < 1 || r > n {
        return Err(Error::Domain(format!(
            "codimension r = {r} out of range 1..={n}"
        )));
    }
    if r == n {
        return Err(Error::Unsupported(
            "variance asymptotics exclude the maximal codimension r = n".into(),
        ));
    }
    let mode_factor = match manifold.mode() {
        ManifoldMode::Sphere => 2.0,
        ManifoldMode::Projective => 1.0,
    };
    let constant = sphere_volume((n - 1) as u32) / (2.0 * std::f64::consts::PI).powi(r as i32);
    Ok(mode_factor * (d as f64).powf(r as f64 - n as f64 / 2.0) * phi_sq_integral * constant * inr)
}

/// Where the `I_{n,r}` constant for the theory-variance column comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum InrSource {
    /// Use the given value directly.
    Inline { value: f64 },
    /// Read an [`InrEstimate`] JSON artifact produced by the `inr` command.
    File { path: String },
}

/// Estimator used for the per-system statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Crofton sampling with `k_geodesics` Haar great circles per system.
    /// Works in every ambient dimension and with every built-in `φ`.
    Crofton { k_geodesics: usize },
    /// Icosphere marching on `S²` (constant `φ` only).  `level` picks the
    /// subdivision depth; `None` selects [`suggested_marching_level`] per
    /// degree.  The marching estimate carries no sampling noise, so its
    /// estimator-variance correction is zero.
    Marching { level: Option<usize> },
}

fn default_trials() -> usize {
    1000
}

fn default_mode() -> ManifoldMode {
    ManifoldMode::Sphere
}

/// Configuration of a moment experiment: sweep the listed degrees, sampling
/// `trials` systems per degree and measuring `⟨|dV|, φ⟩` with the chosen
/// estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Ambient sphere dimension `n ≥ 1`.
    pub n: usize,
    /// Number of equations; zero-set experiments require `r = 1`.
    pub r: usize,
    /// Degrees to sweep, strictly ascending.
    pub degrees: Vec<usize>,
    /// Systems per degree: 0 (empty dry run) or at least 30.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Per-system statistic estimator.
    pub estimator: EstimatorSpec,
    /// Test function `φ`.
    pub phi: PhiSpec,
    /// Master seed; trial `t` at degree `d` uses the stream keyed
    /// `(seed, d, t)`.
    #[serde(default)]
    pub seed: u64,
    /// Report statistics on the sphere or the projective quotient.
    #[serde(default = "default_mode")]
    pub mode: ManifoldMode,
    /// Optional `I_{n,r}` source for the theory-variance column.
    #[serde(default)]
    pub inr_source: Option<InrSource>,
}

impl ExperimentConfig {
    /// Validate the configuration (shape of the degree list, trial budget,
    /// estimator applicability, test-function axes).
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("ambient dimension n must be ≥ 1".into()));
        }
        if self.r != 1 {
            return Err(Error::Config(format!(
                "zero-set experiments require r = 1, got r = {}",
                self.r
            )));
        }
        validate_degrees(&self.degrees)?;
        if self.trials != 0 && self.trials < 30 {
            return Err(Error::Config(format!(
                "trials must be 0 (dry run) or at least 30, got {}",
                self.trials
            )));
        }
        match &self.estimator {
            EstimatorSpec::Crofton { k_geodesics } => {
                if *k_geodesics == 0 {
                    return Err(Error::Config(
                        "Crofton estimator needs at least one geodesic per system".into(),
                    ));
                }
            }
            EstimatorSpec::Marching { level } => {
                if self.n != 2 {
                    return Err(Error::Config(format!(
                        "marching estimator is defined on S² only, got n = {}",
                        self.n
                    )));
                }
                if let Some(level) = level {
                    if !(1..=8).contains(level) {
                        return Err(Error::Config(format!(
                            "marching level must lie in 1..=8, got {level}"
                        )));
                    }
                }
                if !matches!(self.phi, PhiSpec::Constant { .. }) {
                    return Err(Error::Config(
                        "marching estimator measures plain length; use a constant φ".into(),
                    ));
                }
            }
        }
        self.phi.validate(self.n)?;
        if let Some(InrSource::Inline { value }) = &self.inr_source {
            if !value.is_finite() {
                return Err(Error::Config(format!(
                    "inline I_nr value must be finite, got {value}"
                )));
            }
        }
        Ok(())
    }
}

fn validate_degrees(degrees: &[usize]) -> Result<()> {
    if degrees.is_empty() {
        return Err(Error::Config("degree list must not be empty".into()));
    }
    if degrees[0] == 0 {
        return Err(Error::Config("degrees must be at least 1".into()));
    }
    if degrees.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "degrees must be strictly ascending, got {degrees:?}"
        )));
    }
    Ok(())
}

/// Resolve the configured `I_{n,r}` source to a number.
///
/// A missing or malformed artifact file is a dependency error: the experiment
/// needs the `inr` command's output before its variance column makes sense.
pub fn resolve_inr(source: &Option<InrSource>) -> Result<Option<f64>> {
    match source {
        None => Ok(None),
        Some(InrSource::Inline { value }) => {
            if !value.is_finite() {
                return Err(Error::Config(format!(
                    "inline I_nr value must be finite, got {value}"
                )));
            }
            Ok(Some(*value))
        }
        Some(InrSource::File { path }) => {
            let text = std::fs::read_to_string(path).map_err(|err| {
                Error::Dependency(format!("cannot read I_nr estimate file {path}: {err}"))
            })?;
            let estimate: InrEstimate = serde_json::from_str(&text).map_err(|err| {
                Error::Dependency(format!("malformed I_nr estimate file {path}: {err}"))
            })?;
            Ok(Some(estimate.value))
        }
    }
}

/// One degree of a moment experiment.
///
/// `mean_ci`/`var_ci` are 95% normal-approximation intervals.  `var_raw` is
/// the variance of the per-system estimates; `var_corrected` subtracts the
/// mean squared estimator standard error (law of total variance), and
/// `estimator_var_correction` reports the subtracted amount.  `theory_var`
/// is present only when an `I_{n,r}` source was configured (and `r < n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub d: usize,
    pub mean: f64,
    pub mean_ci: (f64, f64),
    pub theory_mean: f64,
    pub var_raw: f64,
    pub var_corrected: f64,
    pub var_ci: (f64, f64),
    pub theory_var: Option<f64>,
    pub estimator_var_correction: f64,
    pub trials_used: u64,
    pub trials_failed: u64,
}

/// Full moment-experiment report: the echoed configuration plus one row per
/// degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<MomentRow>,
}

/// Run the moment experiment described by `config`.
///
/// For each degree this samples `trials` systems on independent RNG streams
/// keyed `(seed, d, trial)`, measures `⟨|dV|, φ⟩` per system, and aggregates
/// mean and variance against the theory columns.  Trials run in parallel;
/// the reduction preserves trial order, so the report is bit-identical for
/// every worker count.  A degree aborts with a numerical error if more than
/// 1% of its trials fail.
pub fn run_moment_experiment(config: &ExperimentConfig) -> Result<MomentReport> {
    config.validate()?;
    let manifold = ManifoldSpec::new(config.n, config.mode)?;
    let inr = resolve_inr(&config.inr_source)?;
    let phi_integral = config.phi.integral_over(&manifold);
    let phi_sq_integral = config.phi.square_integral_over(&manifold);
    let mut rows = Vec::new();
    if config.trials > 0 {
        for &d in &config.degrees {
            rows.push(run_degree(
                config,
                &manifold,
                d,
                phi_integral,
                phi_sq_integral,
                inr,
            )?);
        }
    }
    Ok(MomentReport {
        config: config.clone(),
        rows,
    })
}

fn run_degree(
    config: &ExperimentConfig,
    manifold: &ManifoldSpec,
    d: usize,
    phi_integral: f64,
    phi_sq_integral: f64,
    inr: Option<f64>,
) -> Result<MomentRow> {
    let trials = config.trials as u64;
    let outcomes: Vec<Result<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|trial| run_one_trial(config, d, trial))
        .collect();

    let mut values = RunningStats::new();
    let mut corrections = RunningStats::new();
    let mut failed = 0u64;
    for outcome in outcomes {
        match outcome {
            Ok((value, std_error)) => {
                values.push(value);
                corrections.push(std_error * std_error);
            }
            Err(_) => failed += 1,
        }
    }
    if failed * 100 > trials {
        return Err(Error::Numerical(format!(
            "degree {d}: {failed} of {trials} trials failed"
        )));
    }
    if values.count < 2 {
        return Err(Error::Numerical(format!(
            "degree {d}: not enough surviving trials ({}) to form moments",
            values.count
        )));
    }

    let mean = values.mean();
    let mean_ci = normal_ci(mean, values.std_error(), Z_95);
    let var_raw = values.variance();
    let correction = corrections.mean();
    let var_corrected = var_raw - correction;
    // Normal-theory dispersion of a sample variance: se ≈ Var·√(2/(T−1)).
    let var_se = var_raw * (2.0 / (values.count - 1) as f64).sqrt();
    let var_ci = normal_ci(var_corrected, var_se, Z_95);

    let theory_mean_value = theory_mean(config.n, config.r, d, phi_integral, manifold)?;
    let theory_var_value = match inr {
        Some(inr) if config.r < config.n => Some(theory_variance(
            config.n,
            config.r,
            d,
            phi_sq_integral,
            inr,
            manifold,
        )?),
        _ => None,
    };

    Ok(MomentRow {
        d,
        mean,
        mean_ci,
        theory_mean: theory_mean_value,
        var_raw,
        var_corrected,
        var_ci,
        theory_var: theory_var_value,
        estimator_var_correction: correction,
        trials_used: values.count,
        trials_failed: failed,
    })
}

/// Sample one system and measure its statistic; returns the value and the
/// estimator's own standard error (zero for marching).
fn run_one_trial(config: &ExperimentConfig, d: usize, trial: u64) -> Result<(f64, f64)> {
    let mut rng = stream(config.seed, &[TAG_TRIAL, d as u64, trial]);
    let system = sample_system(config.n, d, config.r, &mut rng)?;
    // On RP^n every spherical value is halved: the zero set is antipodally
    // symmetric and φ is even, so the double cover integrates exactly 2:1.
    let mode_scale = match config.mode {
        ManifoldMode::Sphere => 1.0,
        ManifoldMode::Projective => 0.5,
    };
    match &config.estimator {
        EstimatorSpec::Crofton { k_geodesics } => {
            let phi = &config.phi;
            let estimate =
                crofton_statistic(&system, |p| phi.evaluate(p), *k_geodesics, &mut rng)?;
            Ok((mode_scale * estimate.value, mode_scale * estimate.std_error))
        }
        EstimatorSpec::Marching { level } => {
            let phi_value = match &config.phi {
                PhiSpec::Constant { value } => *value,
                // validate() restricts marching configs to constant φ.
                _ => unreachable!("marching estimator validated to constant φ"),
            };
            let level = level.unwrap_or_else(|| suggested_marching_level(d));
            let contour = marching_length_s2(&system.polynomials()[0], level)?;
            Ok((mode_scale * phi_value * contour.refined_value, 0.0))
        }
    }
}

/// Configuration of a hole-probability experiment on `S²`: for each degree,
/// estimate the probability that the zero curve misses a fixed spherical cap
/// centered at the first coordinate pole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleConfig {
    /// Degrees to sweep, strictly ascending.
    pub degrees: Vec<usize>,
    /// Systems per degree (binomial sample size).
    pub trials: usize,
    /// Cap angular radius in `(0, π/2)`; the cap is fixed across degrees.
    pub cap_radius: f64,
    /// Scan resolution passed to [`cap_is_hole`] (radians).
    pub resolution: f64,
    #[serde(default)]
    pub seed: u64,
}

impl HoleConfig {
    pub fn validate(&self) -> Result<()> {
        validate_degrees(&self.degrees)?;
        if self.trials == 0 {
            return Err(Error::Config("hole experiment needs trials ≥ 1".into()));
        }
        if !(self.cap_radius > 0.0 && self.cap_radius < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "cap radius must lie in (0, π/2), got {}",
                self.cap_radius
            )));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::Config(format!(
                "scan resolution must be positive, got {}",
                self.resolution
            )));
        }
        Ok(())
    }
}

/// Hole frequency at one degree, with its Wilson 95% interval and the
/// rate-normalized series `p(d)·d^{n/2}` (`n = 2` here, so the factor is `d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleRow {
    pub d: usize,
    pub trials: u64,
    pub holes: u64,
    pub frequency: f64,
    pub ci: (f64, f64),
    pub scaled: f64,
    pub scaled_ci: (f64, f64),
}

/// Hole-probability report: echoed configuration plus one row per degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleReport {
    pub config: HoleConfig,
    pub rows: Vec<HoleRow>,
}

/// Estimate `P(Z_d ∩ cap = ∅)` for each configured degree on `S²`.
///
/// The expected decay is `O(d^{−n/2}) = O(d^{−1})`, so the scaled column
/// `frequency · d` should stay bounded while the raw frequencies fall.
/// Trial RNG streams are keyed `(seed, d, trial)` on the hole tag.
pub fn run_hole_probability(config: &HoleConfig) -> Result<HoleReport> {
    config.validate()?;
    let mut center = vec![0.0; 3];
    center[0] = 1.0;
    let cap = SphericalCap::new(SpherePoint::new(center)?, config.cap_radius)?;
    let trials = config.trials as u64;
    let mut rows = Vec::new();
    for &d in &config.degrees {
        let outcomes: Vec<Result<bool>> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = stream(config.seed, &[TAG_HOLE, d as u64, trial]);
                let system = sample_system(2, d, 1, &mut rng)?;
                cap_is_hole(&system, &cap, config.resolution)
            })
            .collect();
        let mut holes = 0u64;
        for outcome in outcomes {
            if outcome? {
                holes += 1;
            }
        }
        let frequency = holes as f64 / trials as f64;
        let ci = wilson_interval(holes, trials, Z_95);
        let rate = d as f64;
        rows.push(HoleRow {
            d,
            trials,
            holes,
            frequency,
            ci,
            scaled: frequency * rate,
            scaled_ci: (ci.0 * rate, ci.1 * rate),
        });
    }
    Ok(HoleReport {
        config: config.clone(),
        rows,
    })
}

/// Configuration for almost-sure convergence sequences: independent runs of
/// the rescaled statistic `d^{−1/2}·⟨|dV|, φ⟩` along a degree ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Ambient dimension; the almost-sure statement needs `n ≥ 3`, and `n = 2`
    /// runs are flagged as conjectural.
    pub n: usize,
    /// Degree ladder, strictly ascending.
    pub degrees: Vec<usize>,
    /// Number of independent sequences.
    pub sequences: usize,
    /// Crofton geodesics per system.
    pub k_geodesics: usize,
    pub phi: PhiSpec,
    #[serde(default = "default_mode")]
    pub mode: ManifoldMode,
    #[serde(default)]
    pub seed: u64,
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(
                "convergence sequences need ambient dimension n ≥ 2".into(),
            ));
        }
        validate_degrees(&self.degrees)?;
        if self.sequences == 0 {
            return Err(Error::Config("need at least one sequence".into()));
        }
        if self.k_geodesics == 0 {
            return Err(Error::Config(
                "Crofton estimator needs at least one geodesic per system".into(),
            ));
        }
        self.phi.validate(self.n)
    }
}

/// Cross-sequence summary at one degree of the ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub d: usize,
    /// Mean of `d^{−1/2}·statistic` across sequences.
    pub mean_scaled: f64,
    /// Standard deviation across sequences.
    pub spread: f64,
    /// `mean_scaled − limit`.
    pub deviation: f64,
}

/// Convergence report: the limit value, per-degree summaries, and the raw
/// series (`series[sequence][degree index]`) for plotting individual paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ConvergenceConfig,
    /// `(∫_M φ)·Vol(S^{n−1})/Vol(S^n)`: the almost-sure limit of the
    /// rescaled statistic.
    pub limit: f64,
    /// True when `n = 2`: the almost-sure statement is expected but not
    /// proved there.
    pub conjectural: bool,
    pub rows: Vec<ConvergenceRow>,
    pub series: Vec<Vec<f64>>,
}

/// Run independent sequences of the rescaled hypersurface statistic along the
/// degree ladder and summarize their approach to the limit
/// `(∫_M φ)·Vol(S^{n−1})/Vol(S^n)`.
///
/// Each `(sequence, degree)` cell draws a fresh system on the stream keyed
/// `(seed, sequence, d)` and measures `d^{−1/2}·⟨|dV|, φ⟩` by Crofton
/// sampling.  The spread across sequences should shrink like `d^{(1−n/2)/2}`
/// as the variance exponent `r − n/2` kicks in.
pub fn run_convergence_sequence(config: &ConvergenceConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let manifold = ManifoldSpec::new(config.n, config.mode)?;
    let limit = config.phi.integral_over(&manifold) * sphere_volume((config.n - 1) as u32)
        / sphere_volume(config.n as u32);
    let mode_scale = match config.mode {
        ManifoldMode::Sphere => 1.0,
        ManifoldMode::Projective => 0.5,
    };

    let cells: Vec<(u64, usize)> = (0..config.sequences as u64)
        .flat_map(|seq| config.degrees.iter().map(move |&d| (seq, d)))
        .collect();
    let outcomes: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(seq, d)| {
            let mut rng = stream(config.seed, &[TAG_SEQUENCE, seq, d as u64]);
            let system = sample_system(config.n, d, 1, &mut rng)?;
            let phi = &config.phi;
            let estimate =
                crofton_statistic(&system, |p| phi.evaluate(p), config.k_geodesics, &mut rng)?;
            Ok(mode_scale * estimate.value / (d as f64).sqrt())
        })
        .collect();

    let width = config.degrees.len();
    let mut series = Vec::with_capacity(config.sequences);
    let mut flat = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        flat.push(outcome?);
    }
    for seq in 0..config.sequences {
        series.push(flat[seq * width..(seq + 1) * width].to_vec());
    }

    let rows = config
        .degrees
        .iter()
        .enumerate()
        .map(|(idx, &d)| {
            let mut stats = RunningStats::new();
            for path in &series {
                stats.push(path[idx]);
            }
            let mean_scaled = stats.mean();
            ConvergenceRow {
                d,
                mean_scaled,
                spread: stats.variance().sqrt(),
                deviation: mean_scaled - limit,
            }
        })
        .collect();

    Ok(ConvergenceReport {
        config: config.clone(),
        limit,
        conjectural: config.n == 2,
        rows,
        series,
    })
}

/// Result of a Chebyshev concentration check over a batch of per-trial
/// statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCheck {
    /// Deviation threshold the fractions refer to.
    pub threshold: f64,
    /// Fraction of values with `|x − mean| > threshold`.
    pub exceed_fraction: f64,
    /// `variance / threshold²` from the same batch.
    pub chebyshev_bound: f64,
    /// Binomial standard error `√(f(1−f)/T)` of the exceedance fraction.
    pub binomial_se: f64,
}

/// Chebyshev consistency check: with mean and variance taken from the batch
/// itself, the exceedance fraction can never beat `variance/threshold²`
/// (Σ(x−m̄)² ≥ #exceed · threshold² term by term), so
/// `exceed_fraction ≤ chebyshev_bound` holds deterministically; the binomial
/// standard error quantifies how sharp the comparison is as an estimate of
/// the population statement.
pub fn concentration_check(values: &[f64], threshold: f64) -> Result<ConcentrationCheck> {
    if values.len() < 2 {
        return Err(Error::Domain(
            "concentration check needs at least two values".into(),
        ));
    }
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::Domain(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let mut stats = RunningStats::new();
    for &v in values {
        stats.push(v);
    }
    let mean = stats.mean();
    let count = values.len() as f64;
    let exceed = values.iter().filter(|&&v| (v - mean).abs() > threshold).count() as f64;
    let fraction = exceed / count;
    Ok(ConcentrationCheck {
        threshold,
        exceed_fraction: fraction,
        chebyshev_bound: stats.variance() / (threshold * threshold),
        binomial_se: (fraction * (1.0 - fraction) / count).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::TAG_CALIBRATE;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    // Frozen by the independent I_{2,1} quadrature oracle; see limit_law.
    const I21: f64 = 0.330377011629;

    #[test]
    fn manifold_volume_modes() {
        // [TRIVIAL] Vol(S¹) = 2π, Vol(S²) = 4π, Vol(S³) = 2π²; projective
        // halves each.
        let s2 = ManifoldSpec::new(2, ManifoldMode::Sphere).unwrap();
        assert_relative_eq!(s2.volume(), 4.0 * PI, max_relative = 1e-14);
        let rp2 = ManifoldSpec::new(2, ManifoldMode::Projective).unwrap();
        assert_relative_eq!(rp2.volume(), 2.0 * PI, max_relative = 1e-14);
        let rp1 = ManifoldSpec::new(1, ManifoldMode::Projective).unwrap();
        assert_relative_eq!(rp1.volume(), PI, max_relative = 1e-14);
        let s3 = ManifoldSpec::new(3, ManifoldMode::Sphere).unwrap();
        assert_relative_eq!(s3.volume(), 2.0 * PI * PI, max_relative = 1e-14);
        assert!(ManifoldSpec::new(0, ManifoldMode::Sphere).is_err());
    }

    #[test]
    fn phi_evaluation_basics() {
        // [TRIVIAL] pointwise values of the built-in test functions.
        let constant = PhiSpec::Constant { value: 2.5 };
        let coord = PhiSpec::CoordinateSquared { axis: 1 };
        let bump = PhiSpec::CapBump { axis: 0, exponent: 3 };
        let e0 = SpherePoint::new(vec![1.0, 0.0, 0.0]).unwrap();
        let e1 = SpherePoint::new(vec![0.0, 1.0, 0.0]).unwrap();
        let mixed = SpherePoint::normalized(vec![3.0, 4.0, 0.0]).unwrap();
        assert_eq!(constant.evaluate(&e0), 2.5);
        assert_eq!(coord.evaluate(&e1), 1.0);
        assert_eq!(coord.evaluate(&e0), 0.0);
        assert_relative_eq!(coord.evaluate(&mixed), 0.64, max_relative = 1e-14);
        assert_relative_eq!(bump.evaluate(&mixed), 0.6_f64.powi(6), max_relative = 1e-13);
    }

    #[test]
    fn phi_integrals_match_monte_carlo() {
        // [DERIVED] the closed-form Beta-product moments behind integral_over
        // and square_integral_over, cross-checked by uniform sampling on S^n.
        for &n in &[2usize, 3] {
            let manifold = ManifoldSpec::new(n, ManifoldMode::Sphere).unwrap();
            let specs = [
                PhiSpec::CoordinateSquared { axis: 1 },
                PhiSpec::CapBump { axis: 0, exponent: 2 },
            ];
            let mut rng = stream(7, &[TAG_CALIBRATE, n as u64]);
            let mut first = [RunningStats::new(), RunningStats::new()];
            let mut second = [RunningStats::new(), RunningStats::new()];
            for _ in 0..100_000 {
                let point = SpherePoint::random(n, &mut rng);
                for (i, spec) in specs.iter().enumerate() {
                    let value = spec.evaluate(&point);
                    first[i].push(value);
                    second[i].push(value * value);
                }
            }
            for (i, spec) in specs.iter().enumerate() {
                let volume = manifold.volume();
                let mc = volume * first[i].mean();
                let se = volume * first[i].std_error();
                assert!(
                    (spec.integral_over(&manifold) - mc).abs() <= 5.0 * se,
                    "∫φ mismatch for {spec:?} on S^{n}: closed form {} vs MC {mc} ± {se}",
                    spec.integral_over(&manifold)
                );
                let mc_sq = volume * second[i].mean();
                let se_sq = volume * second[i].std_error();
                assert!(
                    (spec.square_integral_over(&manifold) - mc_sq).abs() <= 5.0 * se_sq,
                    "∫φ² mismatch for {spec:?} on S^{n}: closed form {} vs MC {mc_sq} ± {se_sq}",
                    spec.square_integral_over(&manifold)
                );
            }
        }
    }

    #[test]
    fn theory_mean_matches_known_constants() {
        // [PAPER] (n=1, r=1, φ≡1, RP¹): √d·π·(2/2π) = √d — the Kostlan mean
        // root count of a univariate degree-d polynomial.
        let rp1 = ManifoldSpec::new(1, ManifoldMode::Projective).unwrap();
        for &d in &[4usize, 100, 400] {
            let mean = theory_mean(1, 1, d, PI, &rp1).unwrap();
            assert_relative_eq!(mean, (d as f64).sqrt(), max_relative = 1e-14);
        }
        // [DERIVED] (n=2, r=1, φ≡1): π√d on RP², hence 2π√d on S².
        let rp2 = ManifoldSpec::new(2, ManifoldMode::Projective).unwrap();
        let s2 = ManifoldSpec::new(2, ManifoldMode::Sphere).unwrap();
        assert_relative_eq!(
            theory_mean(2, 1, 9, 2.0 * PI, &rp2).unwrap(),
            3.0 * PI,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            theory_mean(2, 1, 9, 4.0 * PI, &s2).unwrap(),
            6.0 * PI,
            max_relative = 1e-14
        );
    }

    #[test]
    fn theory_variance_matches_known_constants() {
        // [PAPER] (n=2, r=1): exponent r − n/2 = 0, so the prediction is
        // d-independent: 2π·I_{2,1} on RP² and 8π·I_{2,1} on S².
        let rp2 = ManifoldSpec::new(2, ManifoldMode::Projective).unwrap();
        let s2 = ManifoldSpec::new(2, ManifoldMode::Sphere).unwrap();
        let v50 = theory_variance(2, 1, 50, 2.0 * PI, I21, &rp2).unwrap();
        let v200 = theory_variance(2, 1, 200, 2.0 * PI, I21, &rp2).unwrap();
        assert_relative_eq!(v50, 2.0 * PI * I21, max_relative = 1e-13);
        assert_eq!(v50, v200, "d⁰ prediction must not move with d");
        assert_relative_eq!(
            theory_variance(2, 1, 100, 4.0 * PI, I21, &s2).unwrap(),
            8.0 * PI * I21,
            max_relative = 1e-13
        );
        // [PAPER] (n=3, r=1): decays as d^{−1/2}.
        let s3 = ManifoldSpec::new(3, ManifoldMode::Sphere).unwrap();
        let v = theory_variance(3, 1, 16, 1.0, 0.3, &s3).unwrap();
        let v4 = theory_variance(3, 1, 64, 1.0, 0.3, &s3).unwrap();
        assert_relative_eq!(v4 / v, 0.5, max_relative = 1e-12);
        // [PAPER] the maximal codimension r = n is excluded.
        let err = theory_variance(2, 2, 10, 1.0, 0.3, &s2).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn theory_ops_reject_mismatched_shapes() {
        // [TRIVIAL] dimension mismatches and out-of-range codimensions.
        let s2 = ManifoldSpec::new(2, ManifoldMode::Sphere).unwrap();
        assert!(matches!(
            theory_mean(3, 1, 10, 1.0, &s2),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            theory_mean(2, 0, 10, 1.0, &s2),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            theory_mean(2, 3, 10, 1.0, &s2),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            theory_variance(3, 1, 10, 1.0, 0.3, &s2),
            Err(Error::Shape(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn theory_ops_are_degree_one_homogeneous(
            n in 1usize..6,
            r_offset in 0usize..5,
            d in 1usize..400,
            integral in 0.05f64..20.0,
            c in 0.05f64..20.0,
        ) {
            // Homogeneity in the integral argument: scaling ∫φ (or ∫φ²)
            // by c scales the prediction by c.
            let r = 1 + r_offset % n;
            let manifold = ManifoldSpec::new(n, ManifoldMode::Sphere).unwrap();
            let base = theory_mean(n, r, d, integral, &manifold).unwrap();
            let scaled = theory_mean(n, r, d, c * integral, &manifold).unwrap();
            prop_assert!((scaled - c * base).abs() <= 1e-13 * scaled.abs().max(c * base.abs()));
            if r < n {
                let base = theory_variance(n, r, d, integral, 0.37, &manifold).unwrap();
                let scaled = theory_variance(n, r, d, c * integral, 0.37, &manifold).unwrap();
                prop_assert!(
                    (scaled - c * base).abs() <= 1e-13 * scaled.abs().max(c * base.abs())
                );
            }
        }
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n: 2,
            r: 1,
            degrees: vec![9],
            trials: 40,
            estimator: EstimatorSpec::Crofton { k_geodesics: 150 },
            phi: PhiSpec::Constant { value: 1.0 },
            seed: 11,
            mode: ManifoldMode::Sphere,
            inr_source: Some(InrSource::Inline { value: I21 }),
        }
    }

    #[test]
    fn moment_experiment_small_run_matches_theory() {
        // [DERIVED] the S² length statistic has exact mean 2π√d at every
        // degree (each great-circle restriction is a univariate Kostlan
        // polynomial with exactly 2√d expected roots), so the empirical mean
        // must sit within its own confidence band around 2π·3.
        let report = run_moment_experiment(&small_config()).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.d, 9);
        assert_eq!(row.trials_used, 40);
        assert_eq!(row.trials_failed, 0);
        assert_relative_eq!(row.theory_mean, 6.0 * PI, max_relative = 1e-13);
        let mean_se = (row.mean_ci.1 - row.mean_ci.0) / (2.0 * Z_95);
        assert!(
            (row.mean - row.theory_mean).abs() <= 4.0 * mean_se,
            "mean {} vs theory {} with se {mean_se}",
            row.mean,
            row.theory_mean
        );
        // Variance columns: the theory value is the d-independent plateau
        // 8π·I_{2,1}; with 40 trials the sample variance carries ~23%
        // relative noise, so only a wide sanity band is honest here.
        let theory_var = row.theory_var.unwrap();
        assert_relative_eq!(theory_var, 8.0 * PI * I21, max_relative = 1e-12);
        assert!(row.estimator_var_correction > 0.0);
        assert!(row.var_corrected < row.var_raw);
        assert!(
            row.var_corrected > 0.2 * theory_var && row.var_corrected < 2.5 * theory_var,
            "corrected variance {} implausibly far from plateau {theory_var}",
            row.var_corrected
        );
        assert!(row.var_ci.0 <= row.var_corrected && row.var_corrected <= row.var_ci.1);
    }

    #[test]
    fn projective_mode_is_exactly_half_the_sphere_statistic() {
        // The monomial coefficients and geodesics are identical under both
        // modes (same streams), and halving per trial commutes with every
        // accumulator operation (scaling by 2^{−1} is exact and rounding
        // commutes with it), so the projective moments are bitwise half /
        // quarter of the spherical ones.
        let mut sphere = small_config();
        sphere.degrees = vec![5];
        sphere.trials = 30;
        sphere.estimator = EstimatorSpec::Crofton { k_geodesics: 60 };
        let mut projective = sphere.clone();
        projective.mode = ManifoldMode::Projective;
        let sphere_report = run_moment_experiment(&sphere).unwrap();
        let projective_report = run_moment_experiment(&projective).unwrap();
        let s = &sphere_report.rows[0];
        let p = &projective_report.rows[0];
        assert_eq!(2.0 * p.mean, s.mean);
        assert_eq!(4.0 * p.var_raw, s.var_raw);
        assert_eq!(
            4.0 * p.estimator_var_correction,
            s.estimator_var_correction
        );
    }

    #[test]
    fn reports_are_bit_identical_across_thread_counts() {
        // Per-trial streams are keyed (seed, d, trial) and the reduction
        // preserves trial order, so worker count cannot leak into results.
        let mut config = small_config();
        config.degrees = vec![4, 7];
        config.trials = 30;
        config.estimator = EstimatorSpec::Crofton { k_geodesics: 40 };
        let run_in_pool = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_moment_experiment(&config)).unwrap()
        };
        let single = serde_json::to_string(&run_in_pool(1)).unwrap();
        let quad = serde_json::to_string(&run_in_pool(4)).unwrap();
        assert_eq!(single, quad);
    }

    #[test]
    fn marching_estimator_runs_in_experiment() {
        // Marching is deterministic per system: the correction column is
        // exactly zero, and with matched seeds the mean is reproducible.
        let config = ExperimentConfig {
            n: 2,
            r: 1,
            degrees: vec![6],
            trials: 30,
            estimator: EstimatorSpec::Marching { level: Some(3) },
            phi: PhiSpec::Constant { value: 1.0 },
            seed: 4,
            mode: ManifoldMode::Sphere,
            inr_source: None,
        };
        let report = run_moment_experiment(&config).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.estimator_var_correction, 0.0);
        assert_eq!(row.var_raw, row.var_corrected);
        assert!(row.theory_var.is_none());
        let mean_se = (row.mean_ci.1 - row.mean_ci.0) / (2.0 * Z_95);
        // Same exact-mean argument as for Crofton, with a small marching
        // discretization bias allowed on top of the Monte-Carlo band.
        assert!(
            (row.mean - row.theory_mean).abs() <= 4.0 * mean_se + 0.02 * row.theory_mean,
            "marching mean {} vs theory {}",
            row.mean,
            row.theory_mean
        );
    }

    #[test]
    fn trials_zero_yields_empty_report() {
        // [TRIVIAL] dry-run edge: no rows, no error.
        let mut config = small_config();
        config.trials = 0;
        let report = run_moment_experiment(&config).unwrap();
        assert!(report.rows.is_empty());
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        // [TRIVIAL] each invariant of ExperimentConfig::validate.
        let good = small_config();
        assert!(good.validate().is_ok());

        let mut bad = good.clone();
        bad.degrees = vec![9, 9];
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        let mut bad = good.clone();
        bad.degrees = vec![];
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        let mut bad = good.clone();
        bad.trials = 10;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        let mut bad = good.clone();
        bad.r = 2;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        let mut bad = good.clone();
        bad.phi = PhiSpec::CoordinateSquared { axis: 5 };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        let mut bad = good.clone();
        bad.estimator = EstimatorSpec::Crofton { k_geodesics: 0 };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        let mut bad = good.clone();
        bad.n = 3;
        bad.estimator = EstimatorSpec::Marching { level: None };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        let mut bad = good.clone();
        bad.estimator = EstimatorSpec::Marching { level: Some(3) };
        bad.phi = PhiSpec::CoordinateSquared { axis: 0 };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        // Missing I_{n,r} artifact is a dependency error, discovered at run
        // time by resolve_inr.
        let mut missing = good.clone();
        missing.inr_source = Some(InrSource::File {
            path: "/nonexistent/inr-estimate.json".into(),
        });
        assert!(matches!(
            run_moment_experiment(&missing),
            Err(Error::Dependency(_))
        ));
    }

    #[test]
    fn hole_frequencies_decrease_and_scaled_series_stays_bounded() {
        // [PAPER] hole probabilities decay like d^{−1}: between d = 2 and
        // d = 12 the frequency must drop beyond joint binomial noise, and the
        // scaled column p(d)·d stays within a fixed window.
        let config = HoleConfig {
            degrees: vec![2, 12],
            trials: 250,
            cap_radius: 0.8,
            resolution: 0.05,
            seed: 5,
        };
        let report = run_hole_probability(&config).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert_eq!(row.trials, 250);
            assert!(row.frequency >= 0.0 && row.frequency <= 1.0);
            assert_relative_eq!(row.frequency * 250.0, row.holes as f64);
            assert!(row.ci.0 <= row.frequency && row.frequency <= row.ci.1);
            assert!(row.scaled.is_finite());
        }
        let low = &report.rows[0];
        let high = &report.rows[1];
        let se = |row: &HoleRow| (row.ci.1 - row.ci.0) / (2.0 * Z_95);
        let combined = (se(low).powi(2) + se(high).powi(2)).sqrt();
        assert!(
            high.frequency <= low.frequency + 4.0 * combined,
            "hole frequency failed to decrease: {} → {} (±{combined})",
            low.frequency,
            high.frequency
        );
    }

    #[test]
    fn degree_one_zero_set_meets_almost_every_large_cap() {
        // [TRIVIAL] a degree-1 zero set is a great circle; it misses a cap of
        // radius ρ only when its pole lies within π/2 − ρ of the cap center,
        // so for ρ = 1.5 the hole probability is 1 − sin ρ ≈ 0.0026.
        let config = HoleConfig {
            degrees: vec![1],
            trials: 400,
            cap_radius: 1.5,
            resolution: 0.08,
            seed: 2,
        };
        let report = run_hole_probability(&config).unwrap();
        assert!(
            report.rows[0].frequency <= 0.02,
            "degree-1 hole frequency {} too large",
            report.rows[0].frequency
        );
    }

    #[test]
    fn convergence_scaled_statistic_approaches_exact_limit() {
        // [DERIVED] with φ ≡ 1 on S³ the rescaled statistic d^{−1/2}·Vol(Z_d)
        // has exact mean Vol(S²) = 4π at every degree (Crofton + exact 2√d
        // mean circle count), and its spread across sequences shrinks like
        // d^{−1/4}·√(1 + estimator noise).
        let config = ConvergenceConfig {
            n: 3,
            degrees: vec![4, 24],
            sequences: 80,
            k_geodesics: 120,
            phi: PhiSpec::Constant { value: 1.0 },
            mode: ManifoldMode::Sphere,
            seed: 17,
        };
        let report = run_convergence_sequence(&config).unwrap();
        assert!(!report.conjectural);
        assert_relative_eq!(report.limit, 4.0 * PI, max_relative = 1e-13);
        assert_eq!(report.series.len(), 80);
        assert!(report.series.iter().all(|path| path.len() == 2));
        for row in &report.rows {
            let se = row.spread / (config.sequences as f64).sqrt();
            assert!(
                row.deviation.abs() <= 5.0 * se,
                "d = {}: scaled mean {} deviates from limit {} beyond noise",
                row.d,
                row.mean_scaled,
                report.limit
            );
        }
        // Var ∝ d^{−1/2} predicts spread ratio (24/4)^{−1/4} ≈ 0.64; allow
        // for ~8% relative noise on each sample standard deviation.
        assert!(
            report.rows[1].spread < 0.9 * report.rows[0].spread,
            "spread failed to shrink: {} → {}",
            report.rows[0].spread,
            report.rows[1].spread
        );
    }

    #[test]
    fn convergence_single_degree_and_conjectural_flag() {
        // [TRIVIAL] a single-degree ladder gives constant one-point paths,
        // and n = 2 runs carry the conjectural marker.
        let config = ConvergenceConfig {
            n: 2,
            degrees: vec![3],
            sequences: 3,
            k_geodesics: 30,
            phi: PhiSpec::Constant { value: 1.0 },
            mode: ManifoldMode::Sphere,
            seed: 9,
        };
        let report = run_convergence_sequence(&config).unwrap();
        assert!(report.conjectural);
        assert_eq!(report.rows.len(), 1);
        assert!(report.series.iter().all(|path| path.len() == 1));
        assert!(report.rows[0].mean_scaled.is_finite());
    }

    #[test]
    fn concentration_fraction_respects_chebyshev() {
        // With mean and variance taken from the same batch the Chebyshev
        // comparison is a deterministic inequality; check it on real
        // experiment values and make sure the bound is informative (< 1).
        let mut values = Vec::new();
        for trial in 0..80u64 {
            let mut rng = stream(23, &[TAG_TRIAL, 36, trial]);
            let system = sample_system(2, 36, 1, &mut rng).unwrap();
            let estimate = crofton_statistic(&system, |_| 1.0, 120, &mut rng).unwrap();
            values.push(estimate.value);
        }
        // Threshold d^α·ε with α = 1/4 (> r/2 − n/4 = 0) and ε = 2.
        let threshold = (36.0f64).powf(0.25) * 2.0;
        let check = concentration_check(&values, threshold).unwrap();
        assert!(
            check.exceed_fraction <= check.chebyshev_bound + 1e-12,
            "fraction {} exceeds Chebyshev bound {}",
            check.exceed_fraction,
            check.chebyshev_bound
        );
        assert!(
            check.chebyshev_bound < 1.0,
            "bound {} is vacuous for this batch",
            check.chebyshev_bound
        );
        assert!(check.binomial_se.is_finite());
        assert!(concentration_check(&values, -1.0).is_err());
        assert!(concentration_check(&values[..1], 1.0).is_err());
    }
}
