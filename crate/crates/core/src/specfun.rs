//! Gamma function and the Gauss hypergeometric function for the parameter
//! family that appears in PPP interference Laplace transforms:
//! `2F1[-2/α, M; 1-2/α; z]` with `α > 2`, integer `M ≥ 1` and `z ≤ 0`.
//!
//! The family always has `c = a + 1`. That makes two argument transforms
//! cheap: the Pfaff transform maps `z` to `z/(z-1)` and turns the first
//! parameter into `c - a = 1`, and the reciprocal (`1/z`) transform has one
//! of its two connection terms collapse to the closed-form asymptote
//! `Γ(1-2/α)Γ(M+2/α)/Γ(M)·(-z)^{2/α}`.

use crate::error::{Error, Result};

/// Maximum number of series terms before a sum is declared non-convergent.
pub const MAX_SERIES_TERMS: usize = 100_000;

/// Relative size of a term below which summation stops.
const SERIES_EPS: f64 = 1e-17;

/// `|z|` up to which the defining series is summed directly.
const DIRECT_LIMIT: f64 = 0.5;

/// `|z|` up to which the Pfaff transform is used; beyond it the reciprocal
/// transform takes over (its series argument is then at most 1/4).
const PFAFF_LIMIT: f64 = 4.0;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(x) for `x > 0`.
///
/// Lanczos approximation (g = 7, 9 terms) on `[0.5, ∞)`, reflection below.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma requires a finite x > 0, got {x}")));
    }
    Ok(gamma_positive(x))
}

fn gamma_positive(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return pi / ((pi * x).sin() * gamma_positive(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Arguments of `2F1[a, b; c; z]` restricted to the in-scope family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeometricArgs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z: f64,
}

impl HypergeometricArgs {
    /// `2F1[-2/α, M; 1-2/α; z]`.
    pub fn interference(alpha: f64, m: u32, z: f64) -> Self {
        let a = -2.0 / alpha;
        HypergeometricArgs { a, b: f64::from(m), c: 1.0 + a, z }
    }

    fn validate(&self) -> Result<()> {
        let Self { a, b, c, z } = *self;
        if !(a.is_finite() && b.is_finite() && c.is_finite() && z.is_finite()) {
            return Err(Error::Domain(format!("non-finite 2F1 argument {self:?}")));
        }
        if !(-1.0 < a && a < 0.0) {
            return Err(Error::Domain(format!("2F1 expects -1 < a < 0, got a = {a}")));
        }
        if (c - (a + 1.0)).abs() > 1e-12 {
            return Err(Error::Domain(format!("2F1 expects c = a + 1, got a = {a}, c = {c}")));
        }
        if b < 0.0 || b.fract() != 0.0 {
            return Err(Error::Domain(format!("2F1 expects a non-negative integer b, got {b}")));
        }
        if z > 0.0 {
            return Err(Error::Domain(format!("2F1 expects z <= 0, got {z}")));
        }
        Ok(())
    }
}

/// Sums `Σ_n (a)_n (b)_n / ((c)_n n!) z^n`.
///
/// Terminates when a term is negligible relative to the partial sum, after
/// the terms have started shrinking.
pub(crate) fn series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..MAX_SERIES_TERMS {
        let nf = n as f64;
        let ratio = (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        term *= ratio;
        sum += term;
        if term == 0.0 || (term.abs() <= SERIES_EPS * sum.abs() && ratio.abs() < 1.0) {
            return Ok(sum);
        }
    }
    Err(Error::Numerical(format!(
        "2F1 series [{a}, {b}; {c}; {z}] did not converge in {MAX_SERIES_TERMS} terms"
    )))
}

/// Pfaff route: `2F1[a,b;c;z] = (1-z)^{-b} 2F1[c-a, b; c; z/(z-1)]`.
pub(crate) fn pfaff(args: HypergeometricArgs) -> Result<f64> {
    let HypergeometricArgs { a, b, c, z } = args;
    let w = z / (z - 1.0);
    Ok((1.0 - z).powf(-b) * series(c - a, b, c, w)?)
}

/// Reciprocal-argument route for `z < -1`, specialised to `c = a + 1`:
///
/// `2F1 = Γ(1+a)Γ(b-a)/Γ(b)·(-z)^{-a} + a/(a-b)·(-z)^{-b}·2F1[b, b-a; b-a+1; 1/z]`.
pub(crate) fn reciprocal(args: HypergeometricArgs) -> Result<f64> {
    let HypergeometricArgs { a, b, z, .. } = args;
    let x = -z;
    let leading = gamma(1.0 + a)? * gamma(b - a)? / gamma(b)? * x.powf(-a);
    let correction = a / (a - b) * x.powf(-b) * series(b, b - a, b - a + 1.0, 1.0 / z)?;
    Ok(leading + correction)
}

/// `2F1[a, b; c; z]` for the in-scope family.
pub fn hyp2f1(args: HypergeometricArgs) -> Result<f64> {
    args.validate()?;
    if args.b == 0.0 || args.z == 0.0 {
        return Ok(1.0);
    }
    let mag = -args.z;
    if mag <= DIRECT_LIMIT {
        series(args.a, args.b, args.c, args.z)
    } else if mag <= PFAFF_LIMIT {
        pfaff(args)
    } else {
        reciprocal(args)
    }
}

/// `2F1[-2/α, M; 1-2/α; -γ₀]` minus its large-`γ₀` asymptote.
///
/// Past the Pfaff range this is the reciprocal-transform correction term
/// itself, so it keeps full relative precision even when both the function
/// and the asymptote are huge.
pub fn hyp2f1_excess_over_tail(alpha: f64, m: u32, gamma0: f64) -> Result<f64> {
    let tail = hyp2f1_asymptotic_tail(alpha, m, gamma0)?;
    let args = HypergeometricArgs::interference(alpha, m, -gamma0);
    args.validate()?;
    if gamma0 <= PFAFF_LIMIT {
        return Ok(hyp2f1(args)? - tail);
    }
    let HypergeometricArgs { a, b, z, .. } = args;
    Ok(a / (a - b) * gamma0.powf(-b) * series(b, b - a, b - a + 1.0, 1.0 / z)?)
}

/// Large-`γ₀` asymptote of `2F1[-2/α, M; 1-2/α; -γ₀]`:
/// `Γ(1-2/α)·Γ(M+2/α)/Γ(M)·γ₀^{2/α}`.
pub fn hyp2f1_asymptotic_tail(alpha: f64, m: u32, gamma0: f64) -> Result<f64> {
    if !(alpha > 2.0) || m == 0 || !(gamma0 >= 0.0) {
        return Err(Error::Domain(format!(
            "asymptote needs alpha > 2, M >= 1, gamma0 >= 0 (got {alpha}, {m}, {gamma0})"
        )));
    }
    let delta = 2.0 / alpha;
    let m = f64::from(m);
    Ok(gamma(1.0 - delta)? * gamma(m + delta)? / gamma(m)? * gamma0.powf(delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn f(alpha: f64, m: u32, z: f64) -> f64 {
        hyp2f1(HypergeometricArgs::interference(alpha, m, z)).unwrap()
    }

    #[test]
    fn gamma_known_values() {
        assert_relative_eq!(gamma(1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(4.0).unwrap(), 6.0, max_relative = 1e-14);
        assert_relative_eq!(
            gamma(0.5).unwrap(),
            std::f64::consts::PI.sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(gamma(10.0).unwrap(), 362_880.0, max_relative = 1e-13);
    }

    #[test]
    fn gamma_rejects_non_positive() {
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.5).is_err());
        assert!(gamma(f64::NAN).is_err());
    }

    #[test]
    fn gamma_recurrence_on_grid() {
        for i in 1..=100 {
            let x = f64::from(i) * 0.1;
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn hyp2f1_trivial_cases() {
        let a = -2.0 / 3.7;
        assert_eq!(hyp2f1(HypergeometricArgs { a, b: 3.0, c: 1.0 + a, z: 0.0 }).unwrap(), 1.0);
        assert_eq!(hyp2f1(HypergeometricArgs { a, b: 0.0, c: 1.0 + a, z: -5.0 }).unwrap(), 1.0);
    }

    #[test]
    fn hyp2f1_rejects_out_of_family() {
        let a = -2.0 / 3.7;
        assert!(hyp2f1(HypergeometricArgs { a, b: 1.0, c: 1.0 + a, z: 0.3 }).is_err());
        assert!(hyp2f1(HypergeometricArgs { a, b: 1.5, c: 1.0 + a, z: -0.3 }).is_err());
        assert!(hyp2f1(HypergeometricArgs { a, b: 1.0, c: 0.9, z: -0.3 }).is_err());
    }

    // Reference values from a 40-digit mpmath evaluation.
    #[test]
    fn hyp2f1_matches_high_precision_reference() {
        let cases = [
            (1, -0.1, 1.114_148_631_153_137_3),
            (1, -0.5, 1.516_047_494_380_669_6),
            (1, -0.9, 1.858_065_202_556_037_7),
            (1, -1.0, 1.936_875_287_388_675_1),
            (1, -3.0, 3.198_186_068_150_570_7),
            (1, -100.0, 20.637_854_359_867_179),
            (1, -1e6, 2_997.459_381_863_501_3),
            (4, -0.025, 1.115_398_853_413_847_7),
            (4, -0.25, 1.997_378_423_055_436),
            (4, -2.5, 6.489_294_833_455_338_9),
            (4, -25.0, 22.525_316_343_998_563),
            (4, -1e5, 1_994.023_850_052_294_1),
            (2, -7.5, 7.840_868_877_272_505_6),
        ];
        for (m, z, want) in cases {
            assert_relative_eq!(f(3.7, m, z), want, max_relative = 1e-10);
        }
    }

    // The direct series alternates, so for large M close to z = -1 it loses
    // digits to cancellation; production routing switches to Pfaff at |z| = 0.5.
    #[test]
    fn direct_and_pfaff_routes_agree() {
        for i in 0..=50 {
            let z = -0.5 - 0.499 * f64::from(i) / 50.0;
            for m in [1, 2, 4] {
                let args = HypergeometricArgs::interference(3.7, m, z);
                let direct = series(args.a, args.b, args.c, z).unwrap();
                let transformed = pfaff(args).unwrap();
                assert_relative_eq!(direct, transformed, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn pfaff_and_reciprocal_routes_agree() {
        for z in [-1.5, -2.0, -3.0, -4.0, -6.0] {
            for m in [1, 4] {
                let args = HypergeometricArgs::interference(3.7, m, z);
                assert_relative_eq!(pfaff(args).unwrap(), reciprocal(args).unwrap(), max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn excess_over_tail_is_consistent() {
        for g in [0.0, 0.5, 3.0, 5.0, 40.0] {
            let direct = f(3.7, 1, -g) - hyp2f1_asymptotic_tail(3.7, 1, g).unwrap();
            assert_relative_eq!(hyp2f1_excess_over_tail(3.7, 1, g).unwrap(), direct, max_relative = 1e-9);
        }
        // Leading behaviour (2/α)/(1+2/α)/γ₀ far out, where subtraction would be all rounding noise.
        let d = 2.0 / 3.7;
        let e = hyp2f1_excess_over_tail(3.7, 1, 1e30).unwrap();
        assert_relative_eq!(e, d / (1.0 + d) * 1e-30, max_relative = 1e-6);
    }

    #[test]
    fn asymptote_values() {
        assert_relative_eq!(
            hyp2f1_asymptotic_tail(3.7, 1, 1.0).unwrap(),
            1.712_024_847_218_072_1,
            max_relative = 1e-12
        );
        assert_eq!(hyp2f1_asymptotic_tail(4.0, 2, 0.0).unwrap(), 0.0);
        let ratio = f(3.7, 1, -1e6) / hyp2f1_asymptotic_tail(3.7, 1, 1e6).unwrap();
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
    }
}
