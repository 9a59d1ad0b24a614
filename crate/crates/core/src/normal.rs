//! Standard normal density, distribution and quantile functions.

use core::f64::consts::FRAC_1_SQRT_2;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Beyond this the upper tail `0.5 * erfc(x / sqrt 2)` underflows, so log-space
/// tail work switches to the asymptotic expansion.
pub const TAIL_CUTOFF: f64 = 37.0;

#[inline]
pub fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

#[inline]
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Lower tail probability P(Z <= x).
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail probability P(Z > x), accurate deep into the right tail.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `ln P(Z > x)`, finite for every finite `x`.
pub fn ln_sf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x < TAIL_CUTOFF {
        let q = sf(x);
        if x < -1.0 {
            return libm::log1p(-cdf(x));
        }
        return libm::log(q);
    }
    // Mills ratio asymptotic series: Q(x) ~ phi(x)/x * (1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8)
    let r = 1.0 / (x * x);
    let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
    ln_pdf(x) - libm::log(x) + libm::log(series)
}

/// `ln P(Z <= x)`.
#[inline]
pub fn ln_cdf(x: f64) -> f64 {
    ln_sf(-x)
}

/// Probability of the interval `(lo, hi]` and its logarithm, computed on
/// whichever tail keeps the difference well conditioned.
pub fn interval(lo: f64, hi: f64) -> (f64, f64) {
    debug_assert!(lo <= hi);
    if lo >= 0.0 {
        // both in the upper half: Q(lo) - Q(hi)
        let (a, b) = (ln_sf(lo), ln_sf(hi));
        let ln_p = a + ln1m_exp(b - a);
        (libm::exp(ln_p), ln_p)
    } else if hi <= 0.0 {
        let (a, b) = (ln_cdf(hi), ln_cdf(lo));
        let ln_p = a + ln1m_exp(b - a);
        (libm::exp(ln_p), ln_p)
    } else {
        let p = 1.0 - sf(hi) - cdf(lo);
        (p, libm::log(p))
    }
}

/// `ln(1 - e^d)` for `d <= 0`.
#[inline]
fn ln1m_exp(d: f64) -> f64 {
    if d == f64::NEG_INFINITY {
        0.0
    } else if d > -core::f64::consts::LN_2 {
        libm::log(-libm::expm1(d))
    } else {
        libm::log1p(-libm::exp(d))
    }
}

/// Ratio `phi(x) / P(Z > x)` (inverse Mills ratio), stable for large `x`.
pub fn hazard(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    libm::exp(ln_pdf(x) - ln_sf(x))
}

/// Quantile function, Wichura's AS 241 (PPND16), relative accuracy about 1e-16.
pub fn quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_7)
                * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn cdf_matches_statrs() {
        let n = Normal::new(0.0, 1.0).unwrap();
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            // statrs carries about ten significant digits in the far tail
            assert!((cdf(x) - n.cdf(x)).abs() <= 1e-9 * n.cdf(x), "x={x}");
        }
    }

    #[test]
    fn cdf_reference_values() {
        // mpmath, 30 digits
        let table = [(-8.0, 6.22096057427178e-16), (-4.2, 1.33457490159063e-5), (-1.0, 0.158655253931457), (0.5, 0.691462461274013)];
        for (x, want) in table {
            assert!((cdf(x) - want).abs() <= 1e-14 * want, "x={x}");
        }
    }

    #[test]
    fn quantile_round_trips() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            assert!((cdf(quantile(p)) - p).abs() < 1e-15);
        }
        for &p in &[1e-300, 1e-100, 1e-20, 1e-10] {
            let x = quantile(p);
            assert!(((cdf(x) - p) / p).abs() < 1e-12, "p={p}");
        }
        assert!((quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
    }

    #[test]
    fn log_tail_is_continuous_across_cutoff() {
        let below = ln_sf(TAIL_CUTOFF - 1e-9);
        let above = ln_sf(TAIL_CUTOFF + 1e-9);
        assert!((below - above).abs() < 1e-6);
        assert!(ln_sf(60.0).is_finite());
        assert!((ln_cdf(-60.0) - ln_sf(60.0)).abs() == 0.0);
    }

    #[test]
    fn interval_probabilities() {
        let (p, lp) = interval(-1.0, 1.0);
        assert!((p - 0.682_689_492_137_085_9).abs() < 1e-15);
        assert!((lp - p.ln()).abs() < 1e-15);
        // far right tail where the naive difference is 0 - 0
        let (p, lp) = interval(40.0, 41.0);
        assert_eq!(p, 0.0);
        assert!(lp.is_finite() && lp < -700.0);
        let (p, _) = interval(f64::NEG_INFINITY, f64::INFINITY);
        assert_eq!(p, 1.0);
    }
}
