//! The scaling-limit Gaussian objects of the zero-set point process.
//!
//! As the degree `d → ∞`, the suitably rescaled zero set of a KSS system
//! around a point looks like the zero set of a limiting Gaussian field whose
//! two-point Jacobian structure is explicit: for two points at squared
//! rescaled distance `t`, the pair of `r×n` Jacobian matrices `(X(t), Y(t))`
//! is centered Gaussian with independent entry pairs `(X_ij, Y_ij)`, each
//! pair having the 2×2 covariance
//!
//! ```text
//!     j = 1:  a(t) = 1 − t e^{−t} / (1 − e^{−t}),
//!             b(t) = e^{−t/2} (1 − t / (1 − e^{−t})),
//!     j ≥ 2:  a = 1,  b = e^{−t/2},
//! ```
//!
//! where the first column is the direction joining the two points. This
//! module implements that covariance structure, the associated operator
//! `Λ(t)` (its eigenvalues `1 ± e^{−t/2}` with multiplicity `(n−1)r` and
//! `(1 − e^{−t} ± t e^{−t/2})/(1 ± e^{−t/2})` with multiplicity `r`, its
//! determinant, and the inverse-norm function `f(t)`), the co-Jacobian
//! `|det⊥ L| = √det(L Lᵀ)`, and Gaussian sampling of `(X(t), Y(t))`.
//!
//! Monte Carlo estimation of the product moment `E[|det⊥X| |det⊥Y|]`, the
//! integrand `D_{n,r}(t)`, and the variance constant `I_{n,r}` live in the
//! [`moments`] submodule.
//!
//! Numerical care: `a`, `b`, and the small eigenvalue `a + b ~ t²/12` all
//! suffer catastrophic cancellation near `t = 0`; the scalar helpers here
//! switch to truncated Taylor series below documented thresholds so that
//! every quantity is accurate to near machine precision for `t` from
//! `10⁻⁸` to `10³`.

pub mod moments;

use crate::error::{Error, Result};
use crate::special::sphere_volume;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use moments::{
    dnr, dnr_many, estimate_inr, estimate_inr_with_table, estimate_product_moment,
    product_moment_gh_oracle, DnrEvaluation, InrEstimate, McSpec, QuadratureSpec,
};

/// Parameters of the limiting two-point pair `(X(t), Y(t))`.
///
/// `t > 0` is the squared rescaled distance between the two base points,
/// `n` the ambient dimension, `r ≤ n` the codimension (number of equations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitPairParams {
    /// Squared rescaled distance between the two points.
    pub t: f64,
    /// Ambient dimension (columns of the Jacobian matrices).
    pub n: usize,
    /// Codimension (rows of the Jacobian matrices).
    pub r: usize,
}

impl LimitPairParams {
    /// Validated constructor: requires `t > 0` finite and `1 ≤ r ≤ n`.
    pub fn new(t: f64, n: usize, r: usize) -> Result<Self> {
        let params = Self { t, n, r };
        params.validate()?;
        Ok(params)
    }

    /// Check the type invariants.
    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() || self.t <= 0.0 {
            return Err(Error::Domain(format!(
                "limit pair needs t > 0, got t = {}",
                self.t
            )));
        }
        if self.n < 1 || self.r < 1 || self.r > self.n {
            return Err(Error::Domain(format!(
                "limit pair needs 1 <= r <= n, got n = {}, r = {}",
                self.n, self.r
            )));
        }
        Ok(())
    }
}

/// The 2×2 covariance block `[[a, b], [b, a]]` of one entry pair
/// `(X_ij(t), Y_ij(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnCovariance {
    /// Common variance of the two entries.
    pub a: f64,
    /// Covariance between the two entries.
    pub b: f64,
}

/// One sample of the correlated Gaussian matrices `(X(t), Y(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPair {
    /// The matrix at the first point.
    pub x: DMatrix<f64>,
    /// The matrix at the second point.
    pub y: DMatrix<f64>,
}

// ---------------------------------------------------------------------------
// Stable scalar building blocks.
// ---------------------------------------------------------------------------

/// `1 − e^{−t}` without cancellation.
pub(crate) fn one_minus_exp_neg(t: f64) -> f64 {
    -(-t).exp_m1()
}

/// `a(t) = 1 − t e^{−t}/(1 − e^{−t}) = 1 − t/(e^t − 1)`.
///
/// For small `t` the subtraction `1 − t/expm1(t)` loses relative accuracy:
/// the result is ~t/2 but the rounding error stays at the ~10⁻¹⁶ absolute
/// level, which would poison downstream quantities like `λ₋ = a + b ≈ t²/8`.
/// Below `t = 0.1` we therefore use the Bernoulli-number series
/// `t/(e^t − 1) = 1 − t/2 + t²/12 − t⁴/720 + t⁶/30240 − t⁸/1209600 + …`,
/// whose truncation error at the switch point (~2·10⁻⁸ t¹⁰) is below one ulp.
pub(crate) fn a_of_t(t: f64) -> f64 {
    if t < 0.1 {
        let t2 = t * t;
        t / 2.0 - t2 / 12.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 30240.0
            + t2 * t2 * t2 * t2 / 1_209_600.0
    } else {
        1.0 - t / t.exp_m1()
    }
}

/// `b(t) = e^{−t/2} (1 − t/(1 − e^{−t})) = e^{−t/2} (a(t) − t)`.
///
/// Stable for all `t > 0`: `a(t) − t ≈ −t/2` near 0, no cancellation.
pub(crate) fn b_of_t(t: f64) -> f64 {
    (-t / 2.0).exp() * (a_of_t(t) - t)
}

/// `s(t) = 2 sinh(t/2) − t`, the leading cancellation kernel of `a + b`.
///
/// For `t < 1/2` the direct form loses digits (`s ~ t³/24`), so we sum the
/// series `Σ_{k≥1} 2 (t/2)^{2k+1}/(2k+1)!`; six terms reach machine
/// precision at the threshold.
fn two_sinh_half_minus_t(t: f64) -> f64 {
    if t < 0.5 {
        let h = t / 2.0;
        let h2 = h * h;
        let mut term = h * h2 / 3.0; // 2 (t/2)^3 / 3!  (the factor 2 folded in)
        let mut sum = term;
        for k in 2..=6u32 {
            let kk = 2 * k as u64;
            term *= h2 / ((kk * (kk + 1)) as f64);
            sum += term;
        }
        sum
    } else {
        2.0 * (t / 2.0).sinh() - t
    }
}

/// The small eigenvalue `λ₋(t) = a(t) + b(t) = (1 − e^{−t} − t e^{−t/2})/(1 − e^{−t/2})`.
///
/// Computed as `e^{−t/2} (2 sinh(t/2) − t)/(1 − e^{−t/2})`, which is a
/// product of stable factors (`λ₋ ~ t²/12` near 0 with no subtraction).
/// This is also `1/f(t)` and `‖Λ(t)⁻¹‖⁻¹`.
pub(crate) fn lambda_minus(t: f64) -> f64 {
    (-t / 2.0).exp() * two_sinh_half_minus_t(t) / one_minus_exp_neg(t / 2.0)
}

/// The large column eigenvalue `λ₊(t) = a(t) − b(t) = (1 − e^{−t} + t e^{−t/2})/(1 + e^{−t/2})`.
///
/// All-positive direct evaluation; stable everywhere.
pub(crate) fn lambda_plus(t: f64) -> f64 {
    (one_minus_exp_neg(t) + t * (-t / 2.0).exp()) / (1.0 + (-t / 2.0).exp())
}

// ---------------------------------------------------------------------------
// Covariance structure.
// ---------------------------------------------------------------------------

/// Covariance block of the entry pair `(X_ij(t), Y_ij(t))` in column `j`
/// (1-indexed; `j = 1` is the direction joining the two points).
///
/// Exact for `t` from `10⁻⁸` to `10³`; errors on `t ≤ 0` or `j = 0`.
pub fn column_covariance(t: f64, j: usize) -> Result<ColumnCovariance> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!(
            "column covariance needs t > 0, got {t}"
        )));
    }
    if j == 0 {
        return Err(Error::Domain("column index is 1-based".into()));
    }
    if j == 1 {
        Ok(ColumnCovariance {
            a: a_of_t(t),
            b: b_of_t(t),
        })
    } else {
        Ok(ColumnCovariance {
            a: 1.0,
            b: (-t / 2.0).exp(),
        })
    }
}

/// The full `2rn × 2rn` covariance matrix of the pair `(X(t), Y(t))`.
///
/// Coordinates are interleaved per entry: the pair `(X_ij, Y_ij)` for the
/// entry with row `i`, column `j` (0-indexed) occupies coordinates
/// `(2p, 2p+1)` with `p = i·n + j`, so the matrix is block diagonal with
/// `rn` two-by-two blocks `[[a_j, b_j], [b_j, a_j]]`.
pub fn assemble_variance_matrix(params: &LimitPairParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let (n, r) = (params.n, params.r);
    let dim = 2 * r * n;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..r {
        for j in 0..n {
            let block = column_covariance(params.t, j + 1)?;
            let p = 2 * (i * n + j);
            m[(p, p)] = block.a;
            m[(p + 1, p + 1)] = block.a;
            m[(p, p + 1)] = block.b;
            m[(p + 1, p)] = block.b;
        }
    }
    Ok(m)
}

/// Closed-form spectrum of the pair covariance (equivalently of `Λ(t)` up to
/// the tensor structure): `1 ± e^{−t/2}` each with multiplicity `(n−1)r`,
/// and `(1 − e^{−t} ± t e^{−t/2})/(1 ± e^{−t/2})` each with multiplicity `r`.
///
/// Returns `(eigenvalue, multiplicity)` pairs sorted by eigenvalue, with
/// zero-multiplicity entries removed; multiplicities add up to `2nr`. All
/// eigenvalues are strictly positive and below 2, and the smallest equals
/// `1/f(t)`.
pub fn closed_form_eigenvalues(t: f64, n: usize, r: usize) -> Result<Vec<(f64, usize)>> {
    LimitPairParams::new(t, n, r)?;
    let e = (-t / 2.0).exp();
    let mut eigs = vec![(lambda_minus(t), r), (lambda_plus(t), r)];
    if n > 1 {
        eigs.push((1.0 - e, (n - 1) * r));
        eigs.push((1.0 + e, (n - 1) * r));
    }
    eigs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite eigenvalues"));
    Ok(eigs)
}

/// `f(t) = (1 − e^{−t/2})/(1 − e^{−t} − t e^{−t/2})`, the norm of `Λ(t)⁻¹`.
///
/// Decreasing from `12/t² (1 + o(1))` at `0` to `1` at `∞`; evaluated as
/// `1/λ₋(t)` which is stable through the double zero at the origin.
pub fn f_of_t(t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!("f(t) needs t > 0, got {t}")));
    }
    Ok(1.0 / lambda_minus(t))
}

/// Normalized two-point evaluation Jacobian limit `(1 − e^{−t})^r`.
///
/// Strictly in `(0, 1)` for `t > 0`; tends to 0 on the diagonal (full
/// degeneracy) and to 1 at infinity (decorrelation). This is also the
/// determinant of the `2×2 ⊗ I_r` evaluation covariance
/// `[[1, e^{−t/2}], [e^{−t/2}, 1]]^{⊗r}`.
pub fn two_point_jacobian_limit(t: f64, r: usize) -> f64 {
    assert!(t > 0.0 && r >= 1, "two_point_jacobian_limit needs t > 0, r >= 1");
    one_minus_exp_neg(t).powi(r as i32)
}

/// `E[|det⊥ G|]` for a standard Gaussian `r×n` matrix:
/// `(2π)^{r/2} Vol(S^{n−r})/Vol(S^n)`.
///
/// Equals the product of chi-moments `Π_{k=n−r+1}^{n} E[χ_k]`; its square is
/// the `t → ∞` limit of the product moment `E[|det⊥X||det⊥Y|]`.
pub fn gaussian_odet_mean(n: usize, r: usize) -> Result<f64> {
    if n < 1 || r < 1 || r > n {
        return Err(Error::Domain(format!(
            "gaussian_odet_mean needs 1 <= r <= n, got n = {n}, r = {r}"
        )));
    }
    let tau = std::f64::consts::TAU;
    Ok(tau.powf(r as f64 / 2.0) * sphere_volume((n - r) as u32) / sphere_volume(n as u32))
}

// ---------------------------------------------------------------------------
// The co-Jacobian |det⊥|.
// ---------------------------------------------------------------------------

/// `|det⊥ L| = √det(L Lᵀ)` of an `r×n` matrix, the product of its singular
/// values; zero iff the rows are linearly dependent.
///
/// Fast path: `r = 1` is the Euclidean row norm; otherwise Cholesky of the
/// `r×r` Gram matrix, falling back to singular values when the factorization
/// fails near rank deficiency.
pub fn jacobian_odet(m: &DMatrix<f64>) -> Result<f64> {
    let (r, n) = m.shape();
    if r > n {
        return Err(Error::Shape(format!(
            "co-Jacobian needs r <= n, got {r}x{n}"
        )));
    }
    if r == 1 {
        return Ok(m.row(0).norm());
    }
    let mut gram = vec![0.0; r * r];
    let data: Vec<f64> = (0..r)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect();
    for i in 0..r {
        for k in i..r {
            let mut s = 0.0;
            for j in 0..n {
                s += data[i * n + j] * data[k * n + j];
            }
            gram[i * r + k] = s;
            gram[k * r + i] = s;
        }
    }
    match cholesky_det_sqrt(&mut gram, r) {
        Some(v) => Ok(v),
        None => {
            // Rank-deficient or indefinite-from-rounding Gram matrix: the
            // singular values of L itself are the robust route.
            let svd = m.clone().svd(false, false);
            Ok(svd.singular_values.iter().product())
        }
    }
}

/// In-place Cholesky of a dense symmetric `r×r` matrix (row-major slice),
/// returning the product of the pivots' square roots, i.e. `√det`.
/// `None` if a pivot is non-positive.
pub(crate) fn cholesky_det_sqrt(g: &mut [f64], r: usize) -> Option<f64> {
    let mut acc = 1.0;
    for k in 0..r {
        let mut d = g[k * r + k];
        for j in 0..k {
            d -= g[k * r + j] * g[k * r + j];
        }
        if d <= 0.0 {
            return None;
        }
        let l = d.sqrt();
        acc *= l;
        g[k * r + k] = l;
        for i in (k + 1)..r {
            let mut s = g[i * r + k];
            for j in 0..k {
                s -= g[i * r + j] * g[k * r + j];
            }
            g[i * r + k] = s / l;
        }
    }
    Some(acc)
}

/// `|det⊥|` of an `r×n` matrix stored as a row-major slice, with caller
/// scratch of length `r·r`. Hot-path variant of [`jacobian_odet`] used by
/// the Monte Carlo drivers; identical mathematics.
pub(crate) fn odet_rows(rows: &[f64], r: usize, n: usize, scratch: &mut [f64]) -> f64 {
    debug_assert_eq!(rows.len(), r * n);
    debug_assert!(scratch.len() >= r * r);
    if r == 1 {
        let mut s = 0.0;
        for &v in &rows[..n] {
            s += v * v;
        }
        return s.sqrt();
    }
    for i in 0..r {
        for k in i..r {
            let mut s = 0.0;
            for j in 0..n {
                s += rows[i * n + j] * rows[k * n + j];
            }
            scratch[i * r + k] = s;
            scratch[k * r + i] = s;
        }
    }
    match cholesky_det_sqrt(&mut scratch[..r * r], r) {
        Some(v) => v,
        None => {
            let m = DMatrix::from_row_slice(r, n, rows);
            m.svd(false, false).singular_values.iter().product()
        }
    }
}

// ---------------------------------------------------------------------------
// Sampling.
// ---------------------------------------------------------------------------

/// Precomputed entrywise transforms turning standard normals into one
/// sample of `(X(t), Y(t))`.
///
/// Each 2×2 block `[[a, b], [b, a]]` has eigenvectors `(1, ±1)/√2` with
/// eigenvalues `a ± b`, so with `g₁, g₂` iid standard normal,
/// `X = (√(a+b) g₁ + √(a−b) g₂)/√2` and `Y = (√(a+b) g₁ − √(a−b) g₂)/√2`
/// have exactly the block covariance. The eigenvalues are computed by the
/// stable closed forms rather than `a + b` literally.
#[derive(Debug, Clone)]
pub(crate) struct PairSampler {
    r: usize,
    n: usize,
    /// `√(λ/2)` coefficients: (plus, minus) for the first column, then for
    /// the remaining columns.
    sp_first: f64,
    sm_first: f64,
    sp_rest: f64,
    sm_rest: f64,
}

impl PairSampler {
    pub(crate) fn new(params: &LimitPairParams) -> Result<Self> {
        params.validate()?;
        let t = params.t;
        let e = (-t / 2.0).exp();
        // Block eigenvalues: first column (λ₋, λ₊), other columns 1 ∓ e^{−t/2}.
        let lam = [lambda_minus(t), lambda_plus(t), 1.0 - e, 1.0 + e];
        let mut root = [0.0; 4];
        for (dst, &l) in root.iter_mut().zip(&lam) {
            let clamped = if (-1e-14..0.0).contains(&l) { 0.0 } else { l };
            if clamped < 0.0 {
                return Err(Error::Numerical(format!(
                    "covariance block eigenvalue {l} below PSD clamp tolerance at t = {t}"
                )));
            }
            *dst = (clamped / 2.0).sqrt();
        }
        Ok(Self {
            r: params.r,
            n: params.n,
            // The g₁ coefficient is √((a+b)/2), the g₂ coefficient √((a−b)/2).
            // First column: a+b = λ₋, a−b = λ₊ (b < 0 there). Remaining
            // columns: b = e^{−t/2} > 0, so a+b = 1+e and a−b = 1−e.
            sp_first: root[0],
            sm_first: root[1],
            sp_rest: root[3],
            sm_rest: root[2],
        })
    }

    /// The `t → ∞` transform: `X = (g₁ + g₂)/√2`, `Y = (g₁ − g₂)/√2`, an
    /// independent pair of standard Gaussian matrices. This is the exact
    /// distributional limit of the finite-`t` transform (all block
    /// eigenvalues tend to 1), used as a per-sample control variate by the
    /// `I_{n,r}` quadrature.
    pub(crate) fn independence_limit(n: usize, r: usize) -> Self {
        let h = 0.5_f64.sqrt();
        Self {
            r,
            n,
            sp_first: h,
            sm_first: h,
            sp_rest: h,
            sm_rest: h,
        }
    }

    /// Map standard normals `g1, g2` (row-major `r×n` each) to the sample
    /// `(x, y)`, also row-major.
    pub(crate) fn fill(&self, g1: &[f64], g2: &[f64], x: &mut [f64], y: &mut [f64]) {
        let (r, n) = (self.r, self.n);
        debug_assert!(g1.len() == r * n && g2.len() == r * n);
        for i in 0..r {
            for j in 0..n {
                let p = i * n + j;
                let (sp, sm) = if j == 0 {
                    (self.sp_first, self.sm_first)
                } else {
                    (self.sp_rest, self.sm_rest)
                };
                let u = sp * g1[p];
                let v = sm * g2[p];
                x[p] = u + v;
                y[p] = u - v;
            }
        }
    }
}

/// Draw one sample of `(X(t), Y(t))` from the given stream.
///
/// Entry pairs are independent across `(i, j)`; each is the 2×2 Gaussian
/// with [`column_covariance`]`(t, j)`. Deterministic given the stream state:
/// consumes exactly `2rn` standard normals in a fixed order.
pub fn sample_pair<R: Rng + ?Sized>(params: &LimitPairParams, rng: &mut R) -> Result<MatrixPair> {
    let sampler = PairSampler::new(params)?;
    let len = params.r * params.n;
    let mut g1 = vec![0.0; len];
    let mut g2 = vec![0.0; len];
    for g in g1.iter_mut() {
        *g = StandardNormal.sample(rng);
    }
    for g in g2.iter_mut() {
        *g = StandardNormal.sample(rng);
    }
    let mut x = vec![0.0; len];
    let mut y = vec![0.0; len];
    sampler.fill(&g1, &g2, &mut x, &mut y);
    Ok(MatrixPair {
        x: DMatrix::from_row_slice(params.r, params.n, &x),
        y: DMatrix::from_row_slice(params.r, params.n, &y),
    })
}
