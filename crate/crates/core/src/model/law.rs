//! Closed-form transition laws for OU and CIR, their truncated affine moments
//! and exact sampling.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal};

use super::special::{ncx2_cdf_sf, ncx2_pdf, normal_cdf, normal_pdf, normal_sf};
use super::{mean_unchecked, Family, ModelSpec};
use crate::error::{Error, Result};

/// Which side of a truncation point an indicator keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `1{X >= z}`
    Above,
    /// `1{X <= z}`
    Below,
}

/// Distribution of `X_{t+s}` given `X_t = x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawKind {
    /// Point mass at the start value (`s = 0`).
    Degenerate,
    /// `N(mean, sd²)`.
    Normal { sd: f64 },
    /// `scale · Y` with `Y` noncentral chi-square.
    ScaledNcx2 { scale: f64, df: f64, nc: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionLaw {
    pub family: Family,
    /// Elapsed time `s = u − t`.
    pub s: f64,
    /// Start value.
    pub x: f64,
    /// Conditional mean, equal to `mean_m(s, x)`.
    pub mean: f64,
    pub kind: LawKind,
}

/// Transition law of an OU or CIR model over elapsed time `s`.
///
/// `s = 0` returns the degenerate law at `x`, which the kernel uses for the
/// diagonal `u = t` of the time integrals.
pub fn transition_law(model: &ModelSpec, s: f64, x: f64) -> Result<TransitionLaw> {
    if !(s >= 0.0) || s.is_infinite() {
        return Err(Error::Argument(format!("elapsed time must be finite and >= 0, got {s}")));
    }
    if !matches!(model.family, Family::Ou | Family::Cir) {
        return Err(Error::UnsupportedLaw(model.family));
    }
    model.check_state(x)?;
    let mean = mean_unchecked(model, s, x);
    let kind = if s == 0.0 {
        LawKind::Degenerate
    } else {
        let (mu, sigma) = (model.mu, model.sigma);
        match model.family {
            Family::Ou => {
                let var = sigma * sigma * -(-2.0 * mu * s).exp_m1() / (2.0 * mu);
                LawKind::Normal { sd: var.sqrt() }
            }
            _ => {
                let e = (-mu * s).exp();
                let scale = sigma * sigma * -(-mu * s).exp_m1() / (4.0 * mu);
                LawKind::ScaledNcx2 {
                    scale,
                    df: 4.0 * mu * model.theta / (sigma * sigma),
                    nc: x * e / scale,
                }
            }
        }
    };
    Ok(TransitionLaw {
        family: model.family,
        s,
        x,
        mean,
        kind,
    })
}

impl TransitionLaw {
    pub fn variance(&self) -> f64 {
        match self.kind {
            LawKind::Degenerate => 0.0,
            LawKind::Normal { sd } => sd * sd,
            LawKind::ScaledNcx2 { scale, df, nc } => scale * scale * 2.0 * (df + 2.0 * nc),
        }
    }

    /// `(P[X <= y], P[X > y])`. The degenerate law splits an atom at `y`
    /// evenly between the two sides.
    pub fn cdf_sf(&self, y: f64) -> (f64, f64) {
        match self.kind {
            LawKind::Degenerate => degenerate_split(self.x, y),
            LawKind::Normal { sd } => {
                let d = (y - self.mean) / sd;
                (normal_cdf(d), normal_sf(d))
            }
            LawKind::ScaledNcx2 { scale, df, nc } => ncx2_cdf_sf(y / scale, df, nc),
        }
    }

    /// Density at `y`; zero for the degenerate law.
    pub fn density(&self, y: f64) -> f64 {
        match self.kind {
            LawKind::Degenerate => 0.0,
            LawKind::Normal { sd } => normal_pdf((y - self.mean) / sd) / sd,
            LawKind::ScaledNcx2 { scale, df, nc } => {
                if y <= 0.0 {
                    0.0
                } else {
                    ncx2_pdf(y / scale, df, nc) / scale
                }
            }
        }
    }

    /// `(P[X in side of z], E[X · 1{X in side of z}])`.
    fn truncated_moments(&self, z: f64, side: Side) -> (f64, f64) {
        match self.kind {
            LawKind::Degenerate => {
                let (below, above) = degenerate_split(self.x, z);
                let p = if side == Side::Below { below } else { above };
                (p, p * self.x)
            }
            LawKind::Normal { sd } => {
                let d = (z - self.mean) / sd;
                let phi = normal_pdf(d);
                match side {
                    Side::Above => {
                        let p = normal_sf(d);
                        (p, self.mean * p + sd * phi)
                    }
                    Side::Below => {
                        let p = normal_cdf(d);
                        (p, self.mean * p - sd * phi)
                    }
                }
            }
            LawKind::ScaledNcx2 { scale, df, nc } => {
                let y = z / scale;
                let (p_lo, p_hi) = ncx2_cdf_sf(y, df, nc);
                let (f2_lo, f2_hi) = ncx2_cdf_sf(y, df + 2.0, nc);
                let (f4_lo, f4_hi) = ncx2_cdf_sf(y, df + 4.0, nc);
                match side {
                    Side::Above => (p_hi, scale * (df * f2_hi + nc * f4_hi)),
                    Side::Below => (p_lo, scale * (df * f2_lo + nc * f4_lo)),
                }
            }
        }
    }
}

fn degenerate_split(x: f64, y: f64) -> (f64, f64) {
    if x < y {
        (1.0, 0.0)
    } else if x > y {
        (0.0, 1.0)
    } else {
        (0.5, 0.5)
    }
}

/// `E[(a0 + a1 X) 1{X >= z}]` (side `Above`) or `E[(a0 + a1 X) 1{X <= z}]` (side `Below`).
///
/// Infinite `z` is allowed and selects the full or empty expectation.
pub fn truncated_affine_expectation(law: &TransitionLaw, a0: f64, a1: f64, z: f64, side: Side) -> f64 {
    let full = a0 + a1 * law.mean;
    let everything = match side {
        Side::Above => z == f64::NEG_INFINITY,
        Side::Below => z == f64::INFINITY,
    };
    let nothing = match side {
        Side::Above => z == f64::INFINITY,
        Side::Below => z == f64::NEG_INFINITY,
    };
    if everything {
        return full;
    }
    if nothing {
        return 0.0;
    }
    let (p, first) = law.truncated_moments(z, side);
    a0 * p + a1 * first
}

/// One exact draw from the law.
pub fn sample_transition<R: Rng + ?Sized>(law: &TransitionLaw, rng: &mut R) -> f64 {
    match law.kind {
        LawKind::Degenerate => law.x,
        LawKind::Normal { sd } => {
            let z: f64 = StandardNormal.sample(rng);
            law.mean + sd * z
        }
        LawKind::ScaledNcx2 { scale, df, nc } => scale * sample_ncx2(df, nc, rng),
    }
}

fn sample_ncx2<R: Rng + ?Sized>(df: f64, nc: f64, rng: &mut R) -> f64 {
    if df > 1.0 {
        // (Z + √λ)² is noncentral with one degree of freedom
        let z: f64 = StandardNormal.sample(rng);
        let central = ChiSquared::new(df - 1.0).expect("df > 1").sample(rng);
        (z + nc.sqrt()).powi(2) + central
    } else {
        let n = if nc > 0.0 {
            Poisson::new(0.5 * nc).expect("positive rate").sample(rng)
        } else {
            0.0
        };
        ChiSquared::new(df + 2.0 * n).expect("positive df").sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mean_m;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ou() -> ModelSpec {
        ModelSpec::ou(16.0, 0.54, 0.16).unwrap()
    }

    fn cir() -> ModelSpec {
        ModelSpec::cir(16.0, 0.54, 0.16 / 0.54f64.sqrt()).unwrap()
    }

    /// Composite Simpson on [lo, hi].
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn unsupported_families_error() {
        let m = ModelSpec::igbm(1.0, 1.0, 0.2).unwrap();
        assert!(matches!(transition_law(&m, 0.1, 1.0), Err(Error::UnsupportedLaw(Family::Igbm))));
        let j = ModelSpec::jacobi(1.0, 0.5, 0.2, 0.0, 1.0).unwrap();
        assert!(matches!(transition_law(&j, 0.1, 0.5), Err(Error::UnsupportedLaw(Family::Jacobi))));
    }

    #[test]
    fn densities_are_normalised_with_matching_mean() {
        for (model, x) in [(ou(), 0.5), (cir(), 0.5), (cir(), 0.62)] {
            for s in [0.01, 0.1, 0.5] {
                let law = transition_law(&model, s, x).unwrap();
                let sd = law.variance().sqrt();
                let lo = (law.mean - 14.0 * sd).max(0.0);
                let hi = law.mean + 14.0 * sd;
                let mass = simpson(|y| law.density(y), lo, hi, 4000);
                let first = simpson(|y| y * law.density(y), lo, hi, 4000);
                assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
                assert_abs_diff_eq!(first, mean_m(&model, s, x).unwrap(), epsilon = 1e-8);
                assert_abs_diff_eq!(law.mean, mean_m(&model, s, x).unwrap(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn truncated_expectation_matches_quadrature() {
        for model in [ou(), cir()] {
            let law = transition_law(&model, 0.07, 0.5).unwrap();
            let sd = law.variance().sqrt();
            let (a0, a1) = (8.6401, -16.01);
            for z in [0.49, 0.52, 0.55] {
                let hi = law.mean + 14.0 * sd;
                let lo = (law.mean - 14.0 * sd).max(0.0);
                let above = simpson(|y| (a0 + a1 * y) * law.density(y), z, hi, 6000);
                let below = simpson(|y| (a0 + a1 * y) * law.density(y), lo, z, 6000);
                assert_abs_diff_eq!(
                    truncated_affine_expectation(&law, a0, a1, z, Side::Above),
                    above,
                    epsilon = 1e-9
                );
                assert_abs_diff_eq!(
                    truncated_affine_expectation(&law, a0, a1, z, Side::Below),
                    below,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn truncation_at_endpoints() {
        let law = transition_law(&ou(), 0.3, 0.5).unwrap();
        let full = 2.0 + 3.0 * law.mean;
        assert_eq!(truncated_affine_expectation(&law, 2.0, 3.0, f64::NEG_INFINITY, Side::Above), full);
        assert_eq!(truncated_affine_expectation(&law, 2.0, 3.0, f64::INFINITY, Side::Above), 0.0);
        let claw = transition_law(&cir(), 0.3, 0.5).unwrap();
        let v = truncated_affine_expectation(&claw, 2.0, 3.0, 0.0, Side::Above);
        assert_abs_diff_eq!(v, 2.0 + 3.0 * claw.mean, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_law_splits_the_atom() {
        let law = transition_law(&ou(), 0.0, 0.5).unwrap();
        assert_eq!(truncated_affine_expectation(&law, 1.0, 0.0, 0.5, Side::Above), 0.5);
        assert_eq!(truncated_affine_expectation(&law, 1.0, 0.0, 0.4, Side::Above), 1.0);
        assert_eq!(truncated_affine_expectation(&law, 1.0, 0.0, 0.6, Side::Above), 0.0);
    }

    #[test]
    fn short_time_law_concentrates() {
        let law = transition_law(&ou(), 1e-12, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_abs_diff_eq!(sample_transition(&law, &mut rng), 0.5, epsilon = 1e-5);
        }
    }

    #[test]
    fn cir_density_matches_histogram() {
        let law = transition_law(&cir(), 0.05, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let sd = law.variance().sqrt();
        let (lo, hi, bins) = (law.mean - 4.0 * sd, law.mean + 4.0 * sd, 40usize);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u32; bins];
        for _ in 0..n {
            let y = sample_transition(&law, &mut rng);
            assert!(y > 0.0);
            let k = ((y - lo) / width).floor();
            if k >= 0.0 && (k as usize) < bins {
                counts[k as usize] += 1;
            }
        }
        for (k, &c) in counts.iter().enumerate() {
            let a = lo + k as f64 * width;
            let p = simpson(|y| law.density(y), a, a + width, 40);
            let phat = c as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((phat - p).abs() <= 4.5 * se + 1e-12, "bin {k}: {phat} vs {p}");
        }
    }
}
