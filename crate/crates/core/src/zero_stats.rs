//! Statistics of real zero sets on the sphere.
//!
//! For a polynomial system with `r = 1` the zero set `Z = {P = 0} ⊂ S^n` is
//! almost surely a smooth hypersurface, and the quantities of interest are
//! linear statistics `⟨|dV|, φ⟩ = ∫_Z φ dV_{n−1}`. This module provides two
//! independent estimators plus supporting machinery:
//!
//! * **Crofton sampling.** For a Haar-random great circle `C`,
//!   `E[Σ_{p ∈ Z∩C} φ(p)] = 2/Vol(S^{n−1}) · ∫_Z φ`, so
//!   `(Vol(S^{n−1})/2) · avg_C Σφ` is unbiased for the statistic. The
//!   normalization is pinned by the equator calibration: the zero set of
//!   `X₀` meets every non-degenerate great circle exactly twice, giving the
//!   volume `Vol(S^{n−1})` with zero variance.
//!
//! * **Marching triangles** on a geodesic icosphere (`n = 2` only): extract
//!   the isocontour by linear interpolation along triangle edges, sum
//!   chord→arc-corrected segment lengths, and Richardson-extrapolate two
//!   refinement levels. Its error mechanism (mesh discretization) is disjoint
//!   from Crofton's (sampling), so agreement cross-validates both.
//!
//! Root counting along a circle exploits that the restriction of a degree-d
//! homogeneous polynomial to a great circle is a trigonometric polynomial
//! whose frequencies `l` satisfy `|l| ≤ d` and `l ≡ d (mod 2)`. Sampling at
//! `d+1` points (even `d`; `2d+2` for odd `d`) is alias-free: the allowed
//! frequencies occupy distinct DFT bins, so one forward FFT recovers the
//! exact spectrum and a zero-padded inverse FFT evaluates the restriction on
//! an arbitrarily fine uniform grid at `O(m log m)` cost. Roots are isolated
//! by sign changes on the fine grid and polished by bisection on the
//! spectral interpolant; the procedure is best-effort (non-certified), with
//! a tangency guard that ternary-refines anomalously small samples.
//!
//! Finally, [`cap_is_hole`] probes the event `Z ∩ U = ∅` for a spherical cap
//! `U` with a center-out low-discrepancy sign scan; hole probabilities decay
//! like `d^{−n/2}`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kostlan::{
    restrict_to_circle, CircleRestriction, KostlanPolynomial, KostlanSystem, SpherePoint,
    evaluate_batch,
};
use crate::special::sphere_volume;
use crate::stats::RunningStats;

/// A great circle of `S^n`, parametrized as `θ ↦ cos θ·u + sin θ·v`.
#[derive(Debug, Clone)]
pub struct GreatCircle {
    u: Vec<f64>,
    v: Vec<f64>,
}

impl GreatCircle {
    /// Build from an orthonormal frame: `‖u‖, ‖v‖` within 10⁻¹² of 1 and
    /// `|u·v| ≤ 10⁻¹⁰`.
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() || u.len() < 2 {
            return Err(Error::Shape(format!(
                "great-circle frame needs two vectors of equal dimension ≥ 2, got {} and {}",
                u.len(),
                v.len()
            )));
        }
        let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        if (nu - 1.0).abs() > 1e-12 || (nv - 1.0).abs() > 1e-12 || dot.abs() > 1e-10 {
            return Err(Error::Frame(format!(
                "great-circle frame not orthonormal: ‖u‖ = {nu}, ‖v‖ = {nv}, u·v = {dot}"
            )));
        }
        Ok(Self { u, v })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Restrict a polynomial to this circle.
    pub fn restrict<'a>(&self, poly: &'a KostlanPolynomial) -> Result<CircleRestriction<'a>> {
        restrict_to_circle(poly, &self.u, &self.v)
    }
}

/// Haar-random great circle of `S^n`: two i.i.d. standard Gaussian vectors in
/// `R^{n+1}`, orthonormalized by Gram–Schmidt. The resulting 2-frame is
/// uniform on the Stiefel manifold, hence the circle's distribution is
/// invariant under rotations. Near-collinear pairs (angle < 10⁻⁸) are
/// resampled internally.
pub fn sample_great_circle(n: usize, rng: &mut impl Rng) -> Result<GreatCircle> {
    if n < 1 {
        return Err(Error::Domain(format!(
            "great circles need ambient sphere dimension n ≥ 1, got {n}"
        )));
    }
    let dims = n + 1;
    loop {
        let g1: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(rng)).collect();
        let n1 = g1.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(n1 > 1e-12) {
            continue;
        }
        let u: Vec<f64> = g1.iter().map(|a| a / n1).collect();
        let g2: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(rng)).collect();
        let n2 = g2.iter().map(|a| a * a).sum::<f64>().sqrt();
        let proj: f64 = g2.iter().zip(&u).map(|(a, b)| a * b).sum();
        let w: Vec<f64> = g2.iter().zip(&u).map(|(a, b)| a - proj * b).collect();
        let nw = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        // sin(angle between g2 and span(u)) = ‖w‖/‖g2‖.
        if !(nw > 1e-8 * n2) {
            continue;
        }
        let v: Vec<f64> = w.iter().map(|a| a / nw).collect();
        return GreatCircle::new(u, v);
    }
}

/// One isolated zero of a circle restriction.
#[derive(Debug, Clone)]
pub struct RootOnCircle {
    /// Angle in `[0, 2π)`.
    pub theta: f64,
    /// Ambient point `cos θ·u + sin θ·v`.
    pub point: SpherePoint,
    /// `|p(θ)|` on the spectral interpolant at the reported root. Bisection
    /// to angular width `tol` and the Bernstein inequality
    /// `‖p′‖_∞ ≤ d·‖p‖_∞` bound this by `2d·tol·max_j|p(θ_j)|` plus the
    /// interpolation noise floor.
    pub residual: f64,
}

/// Options for sampling-based root isolation on circles.
#[derive(Debug, Clone, Copy)]
pub struct RootFindOpts {
    /// Grid density: `m = max(64, ⌈oversample·2d⌉)` scan points. Clamped to
    /// at least 2 so the grid resolves every allowed frequency.
    pub oversample: f64,
    /// Final angular bracket width for bisection.
    pub angle_tol: f64,
}

impl Default for RootFindOpts {
    fn default() -> Self {
        Self {
            oversample: 8.0,
            angle_tol: 1e-10,
        }
    }
}

/// Trigonometric polynomial `p(θ) = Σ_k a_k cos(l_k θ) + b_k sin(l_k θ)`
/// with frequencies `l_k = l₀ + 2k` (one parity class). Evaluation walks the
/// frequency ladder with a complex phase recurrence: two `sin_cos` calls and
/// `O(d)` multiplies per point, drift `O(d·ε)`.
struct TrigSpectrum {
    l0: u32,
    /// `(a_k, b_k)` for frequency `l₀ + 2k`.
    harmonics: Vec<(f64, f64)>,
}

impl TrigSpectrum {
    fn eval(&self, theta: f64) -> f64 {
        let step = Complex::from_polar(1.0, 2.0 * theta);
        let mut w = if self.l0 == 0 {
            Complex::new(1.0, 0.0)
        } else {
            Complex::from_polar(1.0, f64::from(self.l0) * theta)
        };
        let mut acc = 0.0;
        for &(a, b) in &self.harmonics {
            acc += a * w.re + b * w.im;
            w *= step;
        }
        acc
    }
}

/// Reusable root counter for restrictions of a fixed degree: FFT plans for
/// the alias-free sample size and the scan grid are built once and shared
/// across circles.
pub struct CircleRootCounter {
    d: usize,
    opts: RootFindOpts,
    /// Alias-free sample count: `d+1` (even `d`) or `2d+2` (odd `d`).
    m_samples: usize,
    /// Scan grid size `max(64, ⌈oversample·2d⌉)`.
    m_grid: usize,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl CircleRootCounter {
    pub fn new(d: usize, opts: RootFindOpts) -> Self {
        let oversample = opts.oversample.max(2.0);
        let angle_tol = opts.angle_tol.clamp(1e-14, 1e-3);
        let opts = RootFindOpts {
            oversample,
            angle_tol,
        };
        let m_samples = if d % 2 == 0 { d + 1 } else { 2 * d + 2 };
        // Rounding the scan grid up to a power of two keeps the radix-2 FFT
        // path while only increasing the oversampling factor.
        let m_grid = (64usize)
            .max((oversample * 2.0 * d as f64).ceil() as usize)
            .max(2 * d + 2)
            .next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(m_samples);
        let fft_inv = planner.plan_fft_inverse(m_grid);
        Self {
            d,
            opts,
            m_samples,
            m_grid,
            fft_fwd,
            fft_inv,
        }
    }

    /// Exact spectrum of the restriction from `m_samples` values. The sample
    /// count makes the DFT alias-free for frequencies `|l| ≤ d`,
    /// `l ≡ d (mod 2)`, so bin `l` holds exactly `m·c_l`.
    fn spectrum(&self, restriction: &CircleRestriction) -> TrigSpectrum {
        let samples = restriction.eval_uniform(self.m_samples);
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s, 0.0)).collect();
        self.fft_fwd.process(&mut buf);
        let scale = 1.0 / self.m_samples as f64;
        let l0 = (self.d % 2) as u32;
        let mut harmonics = Vec::with_capacity(self.d / 2 + 1);
        let mut l = l0 as usize;
        while l <= self.d {
            let c = buf[l] * scale;
            if l == 0 {
                harmonics.push((c.re, 0.0));
            } else {
                harmonics.push((2.0 * c.re, -2.0 * c.im));
            }
            l += 2;
        }
        TrigSpectrum { l0, harmonics }
    }

    /// Values of the spectrum on the scan grid `θ_j = 2πj/m_grid` via a
    /// zero-padded inverse FFT.
    fn grid_values(&self, spec: &TrigSpectrum) -> Vec<f64> {
        let m = self.m_grid;
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (k, &(a, b)) in spec.harmonics.iter().enumerate() {
            let l = spec.l0 as usize + 2 * k;
            if l == 0 {
                buf[0] = Complex::new(a, 0.0);
            } else {
                let c = Complex::new(0.5 * a, -0.5 * b);
                buf[l] = c;
                buf[m - l] = c.conj();
            }
        }
        self.fft_inv.process(&mut buf);
        buf.iter().map(|z| z.re).collect()
    }

    /// Isolate the zeros of `restriction` (which must have degree `d`).
    ///
    /// Best-effort and non-certified: roots are found as sign changes on the
    /// scan grid (plus the tangency guard below) and polished by bisection to
    /// angular width `angle_tol`. Sign-definite double roots count as zero
    /// crossings. Since the circle's preimage is antipodally symmetric, the
    /// returned count is always even, and it never exceeds `2d` (a degree-d
    /// trigonometric polynomial has at most `2d` zeros).
    pub fn count(&self, restriction: &CircleRestriction) -> Vec<RootOnCircle> {
        assert_eq!(
            restriction.degree(),
            self.d,
            "root counter built for degree {} applied to degree {}",
            self.d,
            restriction.degree()
        );
        let spec = self.spectrum(restriction);
        let values = self.grid_values(&spec);
        let m = self.m_grid;
        let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 {
            // Identically zero restriction: no isolated roots to report.
            return Vec::new();
        }
        let tol = self.opts.angle_tol;
        let theta_of = |j: usize| TAU * j as f64 / m as f64;

        // Pass 1: sign brackets on the grid (x ≥ 0 counts as positive).
        let mut bracket_at = vec![false; m];
        for j in 0..m {
            let a = values[j];
            let b = values[(j + 1) % m];
            if (a >= 0.0) != (b >= 0.0) {
                bracket_at[j] = true;
            }
        }
        let mut thetas: Vec<f64> = Vec::new();
        for (j, &hit) in bracket_at.iter().enumerate() {
            if hit {
                if let Some(root) = bisect(&spec, theta_of(j), TAU * (j + 1) as f64 / m as f64, tol)
                {
                    thetas.push(root);
                }
            }
        }

        // Pass 2: tangency guard. A sample anomalously small relative to its
        // neighborhood, with no adjacent sign change, may hide a pair of
        // near-tangent crossings (or a sign-definite double root). Ternary
        // refinement of the surrounding window either exposes a sign change
        // or certifies the window numerically sign-definite.
        let guard_floor = 1e-8 * scale;
        for j in 0..m {
            // The local 9-sample max never exceeds the global max, so samples
            // at or above the global floor can be rejected without it.
            if values[j].abs() >= guard_floor {
                continue;
            }
            if bracket_at[j] || bracket_at[(j + m - 1) % m] {
                continue;
            }
            let mut local = 0.0f64;
            for k in 0..=8 {
                local = local.max(values[(j + m + k - 4) % m].abs());
            }
            if values[j].abs() < 1e-8 * local {
                let a = theta_of(j) - TAU / m as f64;
                let b = theta_of(j) + TAU / m as f64;
                let positive = values[(j + m - 1) % m] >= 0.0;
                for root in ternary_refine(&spec, a, b, positive, tol) {
                    thetas.push(root);
                }
            }
        }

        // Wrap into [0, 2π), sort, and merge duplicates (roots within 2·tol,
        // including across the wrap point).
        for th in &mut thetas {
            let mut w = th.rem_euclid(TAU);
            if w >= TAU {
                w -= TAU;
            }
            *th = w;
        }
        thetas.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::with_capacity(thetas.len());
        for th in thetas {
            match merged.last() {
                Some(&last) if th - last <= 2.0 * tol => {}
                _ => merged.push(th),
            }
        }
        if merged.len() >= 2 {
            let first = merged[0];
            let last = *merged.last().unwrap();
            if first + TAU - last <= 2.0 * tol {
                merged.pop();
            }
        }

        merged
            .into_iter()
            .map(|theta| {
                let point = SpherePoint::normalized(restriction.point_at(theta))
                    .expect("circle points are unit vectors up to rounding");
                RootOnCircle {
                    theta,
                    point,
                    residual: spec.eval(theta).abs(),
                }
            })
            .collect()
    }
}

/// One-shot convenience wrapper around [`CircleRootCounter`].
pub fn count_roots_on_circle(
    restriction: &CircleRestriction,
    opts: RootFindOpts,
) -> Vec<RootOnCircle> {
    CircleRootCounter::new(restriction.degree(), opts).count(restriction)
}

/// Bracketed root polish on the spectral interpolant. Endpoint values are
/// re-evaluated; if the recomputed endpoint signs agree the bracket was
/// grid-interpolation noise and is dropped. Refinement uses a safeguarded
/// secant step (falling back to the midpoint whenever the secant point
/// leaves the bracket or fails to shrink it geometrically), so the bracket
/// invariant of plain bisection is preserved with far fewer evaluations.
fn bisect(spec: &TrigSpectrum, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = spec.eval(a);
    let mut fb = spec.eval(b);
    if (fa >= 0.0) == (fb >= 0.0) {
        return None;
    }
    while b - a > tol {
        let width = b - a;
        let mut mid = if fa != fb {
            a + (a - b) * fa / (fb - fa)
        } else {
            0.5 * (a + b)
        };
        // Keep the trial point well inside the bracket; otherwise bisect.
        if !(mid > a + 0.01 * width && mid < b - 0.01 * width) {
            mid = 0.5 * (a + b);
        }
        let fm = spec.eval(mid);
        if (fm >= 0.0) == (fa >= 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
        // Guarantee geometric shrink: if the accepted step left more than
        // 3/4 of the previous bracket, take one midpoint step as well.
        if b - a > 0.75 * width && b - a > tol {
            let c = 0.5 * (a + b);
            let fc = spec.eval(c);
            if (fc >= 0.0) == (fa >= 0.0) {
                a = c;
                fa = fc;
            } else {
                b = c;
                fb = fc;
            }
        }
    }
    Some(0.5 * (a + b))
}

/// Ternary refinement of a window whose endpoints share the sign `positive`:
/// drive toward the interior extremum of `p` (minimum if the window is
/// positive, maximum otherwise). Any probe of the opposite sign splits the
/// window into two brackets — a near-tangent crossing pair; if the search
/// converges without a sign change the window is numerically sign-definite
/// and contributes no crossings.
fn ternary_refine(spec: &TrigSpectrum, a0: f64, b0: f64, positive: bool, tol: f64) -> Vec<f64> {
    let sgn = if positive { 1.0 } else { -1.0 };
    let mut a = a0;
    let mut b = b0;
    for _ in 0..200 {
        if b - a < tol.max(1e-13) {
            return Vec::new();
        }
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        let f1 = sgn * spec.eval(m1);
        let f2 = sgn * spec.eval(m2);
        for (probe, f) in [(m1, f1), (m2, f2)] {
            if f < 0.0 {
                let mut out = Vec::with_capacity(2);
                if let Some(r) = bisect(spec, a0, probe, tol) {
                    out.push(r);
                }
                if let Some(r) = bisect(spec, probe, b0, tol) {
                    out.push(r);
                }
                return out;
            }
        }
        if f1 > f2 {
            a = m1;
        } else {
            b = m2;
        }
    }
    Vec::new()
}

/// Crofton estimate of a linear statistic `∫_Z φ` over the zero hypersurface.
#[derive(Debug, Clone)]
pub struct CroftonEstimate {
    /// `(Vol(S^{n−1})/2) · avg_circles Σ_{roots} φ`.
    pub value: f64,
    /// Standard error over the i.i.d. geodesic batch.
    pub std_error: f64,
    pub n_geodesics: u64,
    /// Summary of raw per-geodesic intersection counts.
    pub per_geodesic_counts: RunningStats,
}

/// Crofton estimator over an explicit list of great circles (deterministic
/// given the circles; used by the sampling wrapper and by replay tests).
pub fn crofton_with_circles<F>(
    system: &KostlanSystem,
    phi: F,
    circles: &[GreatCircle],
) -> Result<CroftonEstimate>
where
    F: Fn(&SpherePoint) -> f64,
{
    if system.r() != 1 {
        return Err(Error::Unsupported(format!(
            "Crofton sampling handles hypersurfaces only (r = 1), got r = {}",
            system.r()
        )));
    }
    if circles.is_empty() {
        return Err(Error::Domain(
            "Crofton estimator needs at least one geodesic".into(),
        ));
    }
    let poly = &system.polynomials()[0];
    let n = poly.n();
    let half_volume = 0.5 * sphere_volume(n as u32 - 1);
    let counter = CircleRootCounter::new(poly.d(), RootFindOpts::default());
    let mut weights = RunningStats::new();
    let mut counts = RunningStats::new();
    for circle in circles {
        let restriction = circle.restrict(poly)?;
        let roots = counter.count(&restriction);
        counts.push(roots.len() as f64);
        let total: f64 = roots.iter().map(|root| phi(&root.point)).sum();
        weights.push(half_volume * total);
    }
    Ok(CroftonEstimate {
        value: weights.mean(),
        std_error: weights.std_error(),
        n_geodesics: circles.len() as u64,
        per_geodesic_counts: counts,
    })
}

/// Sample `k_geodesics` Haar great circles and form the Crofton estimate of
/// `∫_Z φ` for the hypersurface `Z = {P = 0}` (systems with `r = 1`).
///
/// Unbiasedness and the constant `Vol(S^{n−1})/2` are pinned by the equator
/// calibration: for `P = X₀` every sampled circle meets `Z` exactly twice.
pub fn crofton_statistic<F>(
    system: &KostlanSystem,
    phi: F,
    k_geodesics: usize,
    rng: &mut impl Rng,
) -> Result<CroftonEstimate>
where
    F: Fn(&SpherePoint) -> f64,
{
    if system.r() != 1 {
        return Err(Error::Unsupported(format!(
            "Crofton sampling handles hypersurfaces only (r = 1), got r = {}",
            system.r()
        )));
    }
    if k_geodesics == 0 {
        return Err(Error::Domain(
            "Crofton estimator needs at least one geodesic".into(),
        ));
    }
    let n = system.polynomials()[0].n();
    let circles: Vec<GreatCircle> = (0..k_geodesics)
        .map(|_| sample_great_circle(n, rng))
        .collect::<Result<_>>()?;
    crofton_with_circles(system, phi, &circles)
}

/// Contour length measurement on `S²` with mesh-refinement diagnostics.
#[derive(Debug, Clone)]
pub struct ContourLength {
    /// Length measured on the finer of the two meshes.
    pub value: f64,
    /// Maximum edge arc length of the finer mesh (the mesh parameter `h`).
    pub resolution: f64,
    /// Richardson extrapolation `(4·L_{h/2} − L_h)/3` of the two levels —
    /// both the chord and the linear-interpolation error are `O(h²)`.
    pub refined_value: f64,
    /// Set when `h > 0.5/√d`, i.e. the mesh cannot resolve the natural
    /// oscillation scale of a degree-d polynomial.
    pub under_resolved: bool,
}

/// Arc length of a base icosahedron edge on the unit sphere
/// (`arccos(1/√5) = arctan 2`).
const ICOSAHEDRON_EDGE_ARC: f64 = 1.107_148_717_794_090_4;

/// Smallest subdivision level whose *finer* mesh (level+1, the one
/// [`marching_length_s2`] measures on) has edges below `0.35/√d`.
pub fn suggested_marching_level(d: usize) -> usize {
    let target = 0.35 / (d as f64).sqrt();
    let mut level = 1usize;
    while ICOSAHEDRON_EDGE_ARC / f64::powi(2.0, level as i32 + 1) > target && level < 8 {
        level += 1;
    }
    level
}

struct IcoMesh {
    verts: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
}

fn base_icosahedron() -> IcoMesh {
    let p = (1.0 + 5.0f64.sqrt()) / 2.0;
    let raw: [[f64; 3]; 12] = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ];
    let verts = raw.iter().map(|v| normalize3(*v)).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    IcoMesh { verts, faces }
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn subdivide(mesh: &IcoMesh) -> IcoMesh {
    let mut verts = mesh.verts.clone();
    let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
    let mut midpoint = |a: u32, b: u32, verts: &mut Vec<[f64; 3]>| -> u32 {
        let key = (a.min(b), a.max(b));
        if let Some(&idx) = cache.get(&key) {
            return idx;
        }
        let pa = verts[a as usize];
        let pb = verts[b as usize];
        let mid = normalize3([pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]]);
        let idx = verts.len() as u32;
        verts.push(mid);
        cache.insert(key, idx);
        idx
    };
    for &[a, b, c] in &mesh.faces {
        let ab = midpoint(a, b, &mut verts);
        let bc = midpoint(b, c, &mut verts);
        let ca = midpoint(c, a, &mut verts);
        faces.push([a, ab, ca]);
        faces.push([b, bc, ab]);
        faces.push([c, ca, bc]);
        faces.push([ab, bc, ca]);
    }
    IcoMesh { verts, faces }
}

fn icosphere(level: usize) -> IcoMesh {
    let mut mesh = base_icosahedron();
    for _ in 0..level {
        mesh = subdivide(&mesh);
    }
    mesh
}

fn arc_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    let chord = (dx * dx + dy * dy + dz * dz).sqrt();
    2.0 * (0.5 * chord).clamp(-1.0, 1.0).asin()
}

/// Contour length of `{P = 0}` on one mesh; also returns the mesh's maximum
/// edge arc.
fn contour_length_on_mesh(poly: &KostlanPolynomial, mesh: &IcoMesh) -> Result<(f64, f64)> {
    let mut flat = Vec::with_capacity(mesh.verts.len() * 3);
    for v in &mesh.verts {
        flat.extend_from_slice(v);
    }
    let vals = evaluate_batch(poly, &flat)?;
    let mut length = 0.0;
    let mut max_edge = 0.0f64;
    for &[a, b, c] in &mesh.faces {
        let (ia, ib, ic) = (a as usize, b as usize, c as usize);
        let (pa, pb, pc) = (mesh.verts[ia], mesh.verts[ib], mesh.verts[ic]);
        max_edge = max_edge
            .max(arc_between(pa, pb))
            .max(arc_between(pb, pc))
            .max(arc_between(pc, pa));
        let (va, vb, vc) = (vals[ia], vals[ib], vals[ic]);
        let (sa, sb, sc) = (va >= 0.0, vb >= 0.0, vc >= 0.0);
        if sa == sb && sb == sc {
            continue;
        }
        // Exactly one vertex has the minority sign; the contour crosses the
        // two edges adjacent to it.
        let (m, x, y, vm, vx, vy) = if sb == sc {
            (pa, pb, pc, va, vb, vc)
        } else if sa == sc {
            (pb, pa, pc, vb, va, vc)
        } else {
            (pc, pa, pb, vc, va, vb)
        };
        let p1 = edge_crossing(m, x, vm, vx);
        let p2 = edge_crossing(m, y, vm, vy);
        length += arc_between(p1, p2);
    }
    Ok((length, max_edge))
}

/// Zero of the linear interpolant along the chord from `a` (value `va`) to
/// `b` (value `vb`), projected back to the sphere.
fn edge_crossing(a: [f64; 3], b: [f64; 3], va: f64, vb: f64) -> [f64; 3] {
    let t = va / (va - vb);
    normalize3([
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ])
}

/// Measure the length of `{P = 0} ⊂ S²` by marching triangles on geodesic
/// icospheres at subdivision levels `level` and `level + 1`.
///
/// The isocontour is extracted per triangle by linear interpolation along
/// sign-changing edges; segment chords get the exact chord→arc correction
/// `2·asin(chord/2)`. Both discretization error sources are `O(h²)`, so the
/// two levels combine into a Richardson-extrapolated `refined_value`.
pub fn marching_length_s2(poly: &KostlanPolynomial, level: usize) -> Result<ContourLength> {
    if poly.n() != 2 {
        return Err(Error::Shape(format!(
            "marching triangles runs on S² (n = 2), polynomial has n = {}",
            poly.n()
        )));
    }
    if level < 1 || level > 8 {
        return Err(Error::Domain(format!(
            "subdivision level {level} outside supported range 1..=8"
        )));
    }
    let coarse_mesh = icosphere(level);
    let fine_mesh = icosphere(level + 1);
    let (coarse, _) = contour_length_on_mesh(poly, &coarse_mesh)?;
    let (fine, fine_edge) = contour_length_on_mesh(poly, &fine_mesh)?;
    let refined = (4.0 * fine - coarse) / 3.0;
    let under_resolved = fine_edge > 0.5 / (poly.d() as f64).sqrt();
    Ok(ContourLength {
        value: fine,
        resolution: fine_edge,
        refined_value: refined,
        under_resolved,
    })
}

/// A closed spherical cap `{p : dist(p, center) ≤ radius}` with radius in
/// `(0, π/2)`.
#[derive(Debug, Clone)]
pub struct SphericalCap {
    pub center: SpherePoint,
    pub radius: f64,
}

impl SphericalCap {
    pub fn new(center: SpherePoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < PI / 2.0) {
            return Err(Error::Domain(format!(
                "cap radius must lie in (0, π/2), got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }
}

/// Golden angle `π(3 − √5)` driving the Fibonacci spiral.
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// Decide whether the cap avoids the zero set of a hypersurface system on
/// `S²`: returns `true` iff `P` keeps one sign on a deterministic
/// low-discrepancy scan of the cap.
///
/// The scan is a center-out Fibonacci spiral with point spacing
/// `s = min(resolution, 0.3/√d)` (about `4·area/s²` points), rotated from
/// the pole to the cap center, evaluated in blocks with early exit on the
/// first sign change. A heuristic: false positives are possible when the
/// zero set threads between scan points (documented; the spacing is chosen
/// well below the `1/√d` oscillation scale so misses are rare).
pub fn cap_is_hole(system: &KostlanSystem, cap: &SphericalCap, resolution: f64) -> Result<bool> {
    if system.r() != 1 {
        return Err(Error::Unsupported(format!(
            "hole detection is a sign test for hypersurfaces (r = 1), got r = {}",
            system.r()
        )));
    }
    let poly = &system.polynomials()[0];
    if poly.n() != 2 {
        return Err(Error::Unsupported(format!(
            "cap scanning is implemented for S² (n = 2), polynomial has n = {}",
            poly.n()
        )));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::Domain(format!(
            "cap scan resolution must be positive, got {resolution}"
        )));
    }
    if !(cap.radius > 0.0 && cap.radius < PI / 2.0) {
        return Err(Error::Domain(format!(
            "cap radius must lie in (0, π/2), got {}",
            cap.radius
        )));
    }
    let spacing = resolution.min(0.3 / (poly.d() as f64).sqrt());
    let depth = 1.0 - cap.radius.cos();
    let area = TAU * depth;
    let n_points = ((4.0 * area / (spacing * spacing)).ceil() as usize).max(32);

    // Rotation taking the north pole e₂ to the cap center (Rodrigues form).
    let c = cap.center.coords();
    let sin_axis = (c[0] * c[0] + c[1] * c[1]).sqrt();
    let rotate = move |p: [f64; 3]| -> [f64; 3] {
        if sin_axis < 1e-12 {
            if c[2] > 0.0 {
                p
            } else {
                [p[0], -p[1], -p[2]]
            }
        } else {
            let k = [-c[1] / sin_axis, c[0] / sin_axis, 0.0];
            let cos_a = c[2];
            let sin_a = sin_axis;
            let kxp = [
                k[1] * p[2] - k[2] * p[1],
                k[2] * p[0] - k[0] * p[2],
                k[0] * p[1] - k[1] * p[0],
            ];
            let kdp = k[0] * p[0] + k[1] * p[1] + k[2] * p[2];
            [
                p[0] * cos_a + kxp[0] * sin_a + k[0] * kdp * (1.0 - cos_a),
                p[1] * cos_a + kxp[1] * sin_a + k[1] * kdp * (1.0 - cos_a),
                p[2] * cos_a + kxp[2] * sin_a + k[2] * kdp * (1.0 - cos_a),
            ]
        }
    };

    const BLOCK: usize = 64;
    let mut first_sign: Option<bool> = None;
    let mut k = 0usize;
    while k < n_points {
        let block_end = (k + BLOCK).min(n_points);
        let mut flat = Vec::with_capacity((block_end - k) * 3);
        for i in k..block_end {
            // Center-out spiral: z descends from the pole through the cap.
            let z = 1.0 - depth * (i as f64 + 0.5) / n_points as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let ang = i as f64 * GOLDEN_ANGLE;
            let local = [rho * ang.cos(), rho * ang.sin(), z];
            flat.extend_from_slice(&rotate(local));
        }
        let vals = evaluate_batch(poly, &flat)?;
        for val in vals {
            let sign = val >= 0.0;
            match first_sign {
                None => first_sign = Some(sign),
                Some(s0) if s0 != sign => return Ok(false),
                _ => {}
            }
        }
        k = block_end;
    }
    Ok(true)
}
