//! Normal and noncentral chi-square distribution functions.

use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const WEIGHT_CUTOFF: f64 = 1e-18;

pub fn normal_pdf(d: f64) -> f64 {
    if d.is_infinite() {
        return 0.0;
    }
    (-0.5 * d * d).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(d: f64) -> f64 {
    0.5 * erfc(-d * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(d)`, evaluated without cancellation.
pub fn normal_sf(d: f64) -> f64 {
    0.5 * erfc(d * FRAC_1_SQRT_2)
}

/// `(P[Y <= y], P[Y > y])` for `Y` noncentral chi-square with `df` degrees of
/// freedom and noncentrality `nc`.
///
/// Poisson mixture of central chi-squares. One incomplete-gamma evaluation at
/// the Poisson mode, then the recurrences
/// `P(a+1, x) = P(a, x) - x^a e^{-x} / Γ(a+1)` outward in both directions.
pub fn ncx2_cdf_sf(y: f64, df: f64, nc: f64) -> (f64, f64) {
    if y <= 0.0 {
        return (0.0, 1.0);
    }
    if y.is_infinite() {
        return (1.0, 0.0);
    }
    let x = 0.5 * y;
    let half = 0.5 * nc;
    if half <= 0.0 {
        let a = 0.5 * df;
        return (gamma_lr(a, x), gamma_ur(a, x));
    }
    let ln_x = x.ln();
    let j0 = half.floor();
    let a0 = 0.5 * df + j0;
    let lw0 = -half + j0 * half.ln() - ln_gamma(j0 + 1.0);
    let p0 = gamma_lr(a0, x);
    let q0 = gamma_ur(a0, x);

    let lt0 = a0 * ln_x - x - ln_gamma(a0 + 1.0);
    // weights are renormalised: lw0 carries an absolute rounding error of
    // order 1e-16·nc·ln(nc), which matters for large noncentrality
    let mut cdf = 0.0;
    let mut sf = 0.0;
    let mut mass = 0.0;

    // upward from the mode, including it
    let (mut j, mut a, mut lw, mut lt) = (j0, a0, lw0, lt0);
    let (mut p, mut q) = (p0, q0);
    loop {
        let w = lw.exp();
        cdf += w * p;
        sf += w * q;
        mass += w;
        let t = lt.exp();
        lt += ln_x - (a + 1.0).ln();
        p = (p - t).max(0.0);
        q = (q + t).min(1.0);
        j += 1.0;
        a += 1.0;
        lw += half.ln() - j.ln();
        if w < WEIGHT_CUTOFF && j > j0 + 1.0 {
            break;
        }
    }

    // downward from the mode, excluding it
    let (mut j, mut a, mut lt) = (j0, a0, lt0);
    let mut lw = lw0;
    let (mut p, mut q) = (p0, q0);
    while j >= 1.0 {
        lt += a.ln() - ln_x;
        a -= 1.0;
        let t = lt.exp();
        p = (p + t).min(1.0);
        q = (q - t).max(0.0);
        lw += j.ln() - half.ln();
        j -= 1.0;
        let w = lw.exp();
        cdf += w * p;
        sf += w * q;
        mass += w;
        if w < WEIGHT_CUTOFF {
            break;
        }
    }
    ((cdf / mass).clamp(0.0, 1.0), (sf / mass).clamp(0.0, 1.0))
}

/// Density of the noncentral chi-square distribution.
pub fn ncx2_pdf(y: f64, df: f64, nc: f64) -> f64 {
    if y <= 0.0 || y.is_infinite() {
        return 0.0;
    }
    let half = 0.5 * nc;
    let ln_half_y = (0.5 * y).ln();
    let central_ln = |k: f64| (0.5 * k - 1.0) * ln_half_y - 0.5 * y - ln_gamma(0.5 * k) - 2f64.ln();
    if half <= 0.0 {
        return central_ln(df).exp();
    }
    let j0 = half.floor();
    let lw0 = -half + j0 * half.ln() - ln_gamma(j0 + 1.0);
    let mut total = 0.0;
    let mut mass = 0.0;

    let (mut j, mut lw) = (j0, lw0);
    loop {
        let w = lw.exp();
        mass += w;
        total += (lw + central_ln(df + 2.0 * j)).exp();
        j += 1.0;
        lw += half.ln() - j.ln();
        if w < WEIGHT_CUTOFF && j > j0 + 1.0 {
            break;
        }
    }
    let (mut j, mut lw) = (j0, lw0);
    while j >= 1.0 {
        lw += j.ln() - half.ln();
        j -= 1.0;
        mass += lw.exp();
        total += (lw + central_ln(df + 2.0 * j)).exp();
        if lw.exp() < WEIGHT_CUTOFF {
            break;
        }
    }
    total / mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_tails_are_complementary() {
        for d in [-8.0, -1.3, 0.0, 0.4, 5.0] {
            assert_abs_diff_eq!(normal_cdf(d) + normal_sf(d), 1.0, epsilon = 1e-15);
        }
        assert_eq!(normal_cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(normal_sf(f64::INFINITY), 0.0);
    }

    #[test]
    fn central_case_matches_gamma() {
        let (c, s) = ncx2_cdf_sf(3.0, 4.0, 0.0);
        // chi-square(4) cdf at 3: 1 - e^{-1.5}(1 + 1.5)
        let expected = 1.0 - (-1.5f64).exp() * 2.5;
        assert_abs_diff_eq!(c, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(s, 1.0 - expected, epsilon = 1e-14);
    }

    #[test]
    fn noncentral_cdf_matches_integrated_density() {
        // trapezoid on a fine grid as an independent check
        let (df, nc) = (3.5, 7.0);
        let y_max = 6.0;
        let n = 200_000;
        let h = y_max / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let y = i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * ncx2_pdf(y, df, nc);
        }
        let (c, s) = ncx2_cdf_sf(y_max, df, nc);
        assert_abs_diff_eq!(c, acc * h, epsilon = 1e-8);
        assert_abs_diff_eq!(c + s, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn large_noncentrality_stays_normalised() {
        let (df, nc) = (8.0, 40_000.0);
        let mean = df + nc;
        let (c, s) = ncx2_cdf_sf(mean, df, nc);
        assert!(c > 0.45 && c < 0.55, "cdf at mean {c}");
        assert_abs_diff_eq!(c + s, 1.0, epsilon = 1e-12);
    }
}
