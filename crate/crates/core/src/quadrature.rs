//! Gaussian quadrature rules.
//!
//! Two classical rules are generated from scratch:
//!
//! * **Gauss–Legendre** on [-1, 1] — nodes are Newton-refined roots of the
//!   Legendre polynomial `P_m`, weights `w = 2 / ((1-x²) P'_m(x)²)`.
//! * **Gauss–Hermite (probabilists')** for the weight `e^{-z²/2}/√(2π)` —
//!   nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix
//!   (diagonal 0, off-diagonal `√k`), located by Sturm bisection and polished
//!   by Newton on the orthonormal recurrence; weights come from the
//!   Christoffel identity `w_k = 1 / Σ_{j<m} p̃_j(x_k)²`.
//!
//! Both rules are accurate to ~1e-14; for very large Hermite rules the
//! outermost weights underflow to zero, which is harmless for the
//! polynomially bounded integrands used here.

/// Gauss–Legendre rule with `m` nodes on [-1, 1]. Returns `(nodes, weights)`,
/// nodes ascending; integrates polynomials up to degree `2m-1` exactly.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "quadrature rule needs at least one node");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for k in 0..m {
        // Chebyshev-style initial guess for the k-th root (descending order).
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: (j+1) P_{j+1} = (2j+1) x P_j - j P_{j-1}.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 1..m {
                let p2 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p0) / (j + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            // P'_m(x) = m (x P_m - P_{m-1}) / (x² - 1).
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[m - 1 - k] = x;
        weights[m - 1 - k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Affine image of a rule on [-1, 1] onto [a, b].
pub fn map_to_interval(nodes: &[f64], weights: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        nodes.iter().map(|x| mid + half * x).collect(),
        weights.iter().map(|w| half * w).collect(),
    )
}

/// Value of the orthonormal probabilists' Hermite polynomials
/// `p̃_m(x), p̃_{m-1}(x)` via the recurrence
/// `√(k+1) p̃_{k+1} = x p̃_k - √k p̃_{k-1}`.
fn hermite_orthonormal_pair(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0; // p̃_0
    let mut p1 = x; // p̃_1
    if m == 0 {
        return (p0, 0.0);
    }
    for k in 1..m {
        let p2 = (x * p1 - (k as f64).sqrt() * p0) / ((k + 1) as f64).sqrt();
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Number of eigenvalues of the Hermite Jacobi matrix below `lambda`
/// (Sturm count via the LDLᵀ recurrence; off-diagonals are `√k`).
fn hermite_sturm_count(m: usize, lambda: f64) -> usize {
    let mut count = 0usize;
    let mut d = 0.0;
    for k in 0..m {
        d = if k == 0 { -lambda } else { -lambda - k as f64 / d };
        if d == 0.0 {
            // Zero pivot (λ hits a leading-minor eigenvalue, e.g. the exact
            // zero midpoint of the symmetric bracket): perturb as if λ were
            // nudged up, counting the pivot as negative. Catches -0.0 too.
            d = -1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gauss–Hermite rule with `m` nodes for the probabilists' weight
/// `e^{-z²/2}/√(2π)`. Returns `(nodes, weights)`, nodes ascending,
/// `Σ w_k = 1`; integrates polynomials up to degree `2m-1` exactly
/// against the standard normal density.
pub fn gauss_hermite_prob(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "quadrature rule needs at least one node");
    let bound = 2.0 * (m as f64).sqrt() + 4.0;
    let mut nodes = vec![0.0; m];
    for k in 0..m {
        // Bisection on the Sturm count to isolate the k-th eigenvalue.
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if hermite_sturm_count(m, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        // Newton polish: p̃'_m(x) = √m p̃_{m-1}(x).
        for _ in 0..4 {
            let (pm, pm1) = hermite_orthonormal_pair(m, x);
            let dp = (m as f64).sqrt() * pm1;
            if dp == 0.0 || !dp.is_finite() || !pm.is_finite() {
                break;
            }
            x -= pm / dp;
        }
        nodes[k] = x;
    }
    // Exact symmetry of the rule: average the ± pairs.
    for k in 0..m / 2 {
        let s = 0.5 * (nodes[m - 1 - k] - nodes[k]);
        nodes[k] = -s;
        nodes[m - 1 - k] = s;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            // Christoffel: 1/w = Σ_{j=0}^{m-1} p̃_j(x)².
            let mut p0 = 1.0f64;
            let mut p1 = x;
            let mut sum = p0 * p0;
            if m > 1 {
                sum += p1 * p1;
            }
            for k in 1..m - 1 {
                let p2 = (x * p1 - (k as f64).sqrt() * p0) / ((k + 1) as f64).sqrt();
                p0 = p1;
                p1 = p2;
                sum += p2 * p2;
            }
            if sum.is_finite() {
                1.0 / sum
            } else {
                0.0 // far-tail node; its true weight underflows f64
            }
        })
        .collect();
    (nodes, weights)
}
