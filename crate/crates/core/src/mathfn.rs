//! Scalar special functions: the bosonic entropy `g`, its derivative, and
//! the Bessel functions needed by the circular-pupil point-spread function.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{Error, Result};

/// Below this argument `g` is evaluated from its series expansion.
pub const G_SERIES_SWITCH: f64 = 1e-3;

/// Above this argument the Bessel functions use the Hankel asymptotic expansion.
const BESSEL_ASYMPTOTIC_SWITCH: f64 = 25.0;
const BESSEL_SERIES_SWITCH: f64 = 4.0;

/// Entropy of a thermal state with mean photon number `x`, in nats:
/// `g(x) = (x+1) ln(x+1) - x ln x`, with `g(0) = 0`.
pub fn g(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("g(x) requires finite x >= 0, got {x}")));
    }
    Ok(g_unchecked(x))
}

pub(crate) fn g_unchecked(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x < G_SERIES_SWITCH {
        g_series(x)
    } else {
        // (x+1)ln(x+1) - x ln x rearranged; the direct form cancels for large x
        x.ln_1p() + x * (1.0 / x).ln_1p()
    }
}

/// `x(1 - ln x) + x^2/2 - x^3/6 + x^4/12`, the expansion of `g` around zero.
pub(crate) fn g_series(x: f64) -> f64 {
    let x2 = x * x;
    x * (1.0 - x.ln()) + x2 * (0.5 - x / 6.0 + x2 / 12.0)
}

/// `g(base + delta) - g(base)` without cancellation when `delta << base`.
pub fn g_increment(base: f64, delta: f64) -> Result<f64> {
    if !base.is_finite() || base < 0.0 || !delta.is_finite() || delta < 0.0 {
        return Err(Error::Domain(format!(
            "g increment requires finite base, delta >= 0, got ({base}, {delta})"
        )));
    }
    Ok(g_increment_unchecked(base, delta))
}

pub(crate) fn g_increment_unchecked(base: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    if base == 0.0 {
        return g_unchecked(delta);
    }
    // (a+1) ln(1 + x/(a+1)) - a ln(1 + x/a) + x ln(1 + 1/(a+x))
    let a = base;
    let x = delta;
    let head = (a + 1.0) * (x / (a + 1.0)).ln_1p() - a * (x / a).ln_1p();
    (head + x * (1.0 / (a + x)).ln_1p()).max(0.0)
}

/// Marginal value of a photon, `g'(x) = ln(1 + 1/x)`.
pub fn g_marginal(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("g'(x) requires x > 0, got {x}")));
    }
    Ok(x.recip().ln_1p())
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("J1 requires a finite argument, got {x}")));
    }
    Ok(bessel_jn(1, x))
}

/// `J1(2 pi u) / u`, continued to `pi` at `u = 0`.
///
/// With `u = R rho` this is the radial factor of the circular-pupil PSF.
pub fn jinc_psf(u: f64) -> Result<f64> {
    if u.is_nan() || u < 0.0 {
        return Err(Error::Domain(format!("jinc_psf requires u >= 0, got {u}")));
    }
    Ok(jinc_unchecked(u))
}

pub(crate) fn jinc_unchecked(u: f64) -> f64 {
    let z = 2.0 * PI * u;
    if z < 1e-4 {
        // J1(z)/u = pi (1 - z^2/8 + z^4/192)
        let z2 = z * z;
        PI * (1.0 - z2 / 8.0 + z2 * z2 / 192.0)
    } else {
        bessel_jn(1, z) / u
    }
}

/// `J_n(x)` for `n` in {0, 1, 2}. The recurrence check in the tests relies
/// on each order being computed independently of the others.
pub(crate) fn bessel_jn(n: u32, x: f64) -> f64 {
    debug_assert!(n <= 2);
    let ax = x.abs();
    let value = if ax <= BESSEL_SERIES_SWITCH {
        jn_series(n, ax)
    } else if ax <= BESSEL_ASYMPTOTIC_SWITCH {
        jn_miller(n, ax)
    } else {
        jn_hankel(n, ax)
    };
    if x < 0.0 && n % 2 == 1 {
        -value
    } else {
        value
    }
}

fn jn_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = (0..n).fold(1.0, |acc, k| acc * half / f64::from(k + 1));
    let mut sum = term;
    for k in 1..60 {
        let kf = f64::from(k);
        term *= q / (kf * (kf + f64::from(n)));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Backward recurrence normalised by `J0 + 2 sum J_2k = 1`.
fn jn_miller(n: u32, x: f64) -> f64 {
    let start = 2 * ((x as usize + 30 + (40.0 * x).sqrt() as usize) / 2);
    let mut next = 0.0_f64; // J_{k+1}
    let mut current = 1e-300_f64; // J_k
    let mut norm = 0.0_f64;
    let mut wanted = 0.0_f64;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * current - next;
        next = current;
        current = prev;
        // `current` now holds J_{k-1}
        if current.abs() > 1e250 {
            current *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
        let order = k - 1;
        if order == n as usize {
            wanted = current;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * current;
        }
    }
    norm += current;
    wanted / norm
}

fn jn_hankel(n: u32, x: f64) -> f64 {
    let mu = 4.0 * f64::from(n * n);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0; // a_k(n) / x^k
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = f64::from(k);
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * 8.0 * x);
        if a.abs() > last {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - f64::from(n) * FRAC_PI_2 - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn g_examples() {
        assert_eq!(g(0.0).unwrap(), 0.0);
        assert_relative_eq!(g(1.0).unwrap(), 2.0 * 2f64.ln(), max_relative = 1e-14);
        // 11 ln 11 - 10 ln 10 evaluated at 30 digits
        assert_relative_eq!(g(10.0).unwrap(), 3.350_997_070_841_619, max_relative = 1e-13);
    }

    #[test]
    fn g_rejects_bad_input() {
        assert!(g(-1e-300).is_err());
        assert!(g(f64::NAN).is_err());
        assert!(g(f64::INFINITY).is_err());
    }

    #[test]
    fn g_marginal_examples() {
        assert_relative_eq!(g_marginal(1.0).unwrap(), 2f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(
            g_marginal(0.1).unwrap(),
            2.397_895_272_798_370_5,
            max_relative = 1e-14
        );
        let far = g_marginal(1e8).unwrap();
        assert!(far > 0.99e-8 && far < 1.01e-8);
        assert!(g_marginal(0.0).is_err());
        assert!(g_marginal(-1.0).is_err());
    }

    #[test]
    fn g_branches_agree_in_overlap() {
        for i in 0..=200 {
            let x = 10f64.powf(-4.0 + 2.0 * f64::from(i) / 200.0);
            let closed = (x + 1.0) * x.ln_1p() - x * x.ln();
            assert_relative_eq!(g_series(x), closed, max_relative = 1e-10);
        }
    }

    #[test]
    fn g_matches_naive_formula_above_switch() {
        for i in 0..=300 {
            let x = 10f64.powf(-3.0 + 5.0 * f64::from(i) / 300.0);
            let naive = (x + 1.0) * (x + 1.0).ln() - x * x.ln();
            assert_relative_eq!(g(x).unwrap(), naive, max_relative = 1e-12);
        }
    }

    #[test]
    fn g_large_argument_asymptote() {
        // g(x) = ln x + 1 + 1/(2x) + O(x^-2)
        for e in [8, 12, 20, 50, 100, 300] {
            let x = 10f64.powi(e);
            assert_relative_eq!(g(x).unwrap(), x.ln() + 1.0 + 0.5 / x, max_relative = 1e-14);
        }
    }

    #[test]
    fn g_increment_matches_difference() {
        for &(a, x) in &[(0.0, 0.3), (1.0, 1.0), (2.0, 5.0), (1e-3, 1e-2), (10.0, 0.25)] {
            let direct = g(a + x).unwrap() - g(a).unwrap();
            assert_relative_eq!(g_increment(a, x).unwrap(), direct, max_relative = 1e-11);
        }
        // deep in the linear regime the increment is x ln(1 + 1/a)
        let inc = g_increment(1e6, 1e-12).unwrap();
        assert_relative_eq!(inc, 1e-12 * (1e-6f64).ln_1p(), max_relative = 1e-6);
    }

    #[test]
    fn bessel_reference_values() {
        // 30-digit reference values
        let table = [
            (0.5, 0.242_268_457_674_873_89, 0.938_469_807_240_812_9, 0.030_604_023_458_682_64),
            (1.0, 0.440_050_585_744_933_5, 0.765_197_686_557_966_6, 0.114_903_484_931_900_5),
            (3.0, 0.339_058_958_525_936_46, -0.260_051_954_901_933_44, 0.486_091_260_585_891_1),
            (7.5, 0.135_248_427_579_705_5, 0.266_339_657_880_378_4, -0.230_273_410_525_790_26),
            (12.0, -0.223_447_104_490_627_6, 0.047_689_310_796_833_54, -0.084_930_494_878_604_8),
            (20.0, 0.066_833_124_175_850_05, 0.167_024_664_340_583_15, -0.160_341_351_922_998_15),
            (24.9, -0.134_855_699_531_408_87, 0.083_245_968_353_015_49, -0.094_077_751_447_907_77),
            (25.1, -0.114_634_784_134_422_57, 0.108_275_671_499_949_45, -0.117_409_917_247_712_2),
            (40.0, 0.126_038_318_037_585, 0.007_366_890_584_237_29, -0.001_064_974_682_358_04),
            (100.0, -0.077_145_352_014_112_16, 0.019_985_850_304_223_12, -0.021_528_757_344_505_37),
            (1000.0, 0.004_728_311_907_089_524, 0.024_786_686_152_420_175, -0.024_777_229_528_606),
            (9999.5, 0.006_603_272_200_132_839, -0.004_478_727_403_128_425, 0.004_480_048_123_604_475),
        ];
        for &(x, j1, j0, j2) in &table {
            assert!((bessel_j1(x).unwrap() - j1).abs() < 1e-12, "J1({x})");
            assert!((bessel_jn(0, x) - j0).abs() < 1e-12, "J0({x})");
            assert!((bessel_jn(2, x) - j2).abs() < 1e-12, "J2({x})");
        }
    }

    #[test]
    fn bessel_j1_first_zero() {
        assert_eq!(bessel_j1(0.0).unwrap(), 0.0);
        assert!(bessel_j1(3.831_706_0).unwrap().abs() < 1e-6);
        assert!(bessel_j1(f64::NAN).is_err());
    }

    /// Bisection on the power series alone, independent of the Miller branch.
    #[test]
    fn bessel_j1_zero_found_by_series_root_search() {
        let (mut lo, mut hi) = (3.0, 4.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if jn_series(1, lo) * jn_series(1, mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((root - 3.831_705_970_207_512).abs() < 1e-9);
        assert!(bessel_j1(root).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bessel_recurrence_consistency() {
        for i in 0..=2000 {
            let x = 0.1 + (100.0 - 0.1) * f64::from(i) / 2000.0;
            let lhs = bessel_jn(0, x) + bessel_jn(2, x);
            let rhs = 2.0 * bessel_jn(1, x) / x;
            assert!((lhs - rhs).abs() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn jinc_examples() {
        assert_eq!(jinc_psf(0.0).unwrap(), PI);
        // 0.6098 is the first zero rounded to four places
        assert!(jinc_psf(0.6098).unwrap().abs() / PI < 1e-4);
        assert!(jinc_psf(3.831705970207512 / (2.0 * PI)).unwrap().abs() < 1e-12);
        assert!((jinc_psf(1e-8).unwrap() - PI).abs() < 1e-12);
        assert!(jinc_psf(-1.0).is_err());
        // continuity across the small-argument switch
        let z = 1e-4 / (2.0 * PI);
        assert_relative_eq!(
            jinc_unchecked(z * (1.0 - 1e-9)),
            jinc_unchecked(z * (1.0 + 1e-9)),
            max_relative = 1e-12
        );
    }

    proptest! {
        #[test]
        fn g_increasing_and_concave(a in 1e-6f64..1e3, db in 1e-6f64..1e3, dc in 1e-6f64..1e3) {
            let b = a + db;
            let c = b + dc;
            let (ga, gb, gc) = (g(a).unwrap(), g(b).unwrap(), g(c).unwrap());
            prop_assert!(ga < gb && gb < gc);
            let mid = g(0.5 * (a + c)).unwrap();
            prop_assert!(mid >= 0.5 * (ga + gc) - 1e-12 * gc.abs());
        }

        #[test]
        fn g_marginal_matches_finite_difference(exp in -3.0f64..3.0) {
            let x = 10f64.powf(exp);
            let h = 1e-6 * x;
            let fd = (g(x + h).unwrap() - g(x - h).unwrap()) / (2.0 * h);
            let exact = g_marginal(x).unwrap();
            prop_assert!(((fd - exact) / exact).abs() < 1e-5);
        }

        #[test]
        fn j1_is_odd(x in -1e4f64..1e4) {
            prop_assert_eq!(bessel_j1(-x).unwrap(), -bessel_j1(x).unwrap());
        }
    }
}
