//! Central and noncentral chi-square distributions.

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn ln_prefactor(a: f64, x: f64) -> f64 {
    a * libm::log(x) - x - libm::lgamma(a)
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * libm::exp(ln_prefactor(a, x))
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    libm::exp(ln_prefactor(a, x)) * h
}

/// `P(chi2_df <= x)`.
pub fn cdf(x: f64, df: f64) -> f64 {
    gamma_p(0.5 * df, 0.5 * x)
}

/// `P(chi2_df > x)`.
pub fn sf(x: f64, df: f64) -> f64 {
    gamma_q(0.5 * df, 0.5 * x)
}

/// Upper-tail critical value: the `x` with `P(chi2_df > x) = alpha`.
pub fn critical_value(alpha: f64, df: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let mut hi = df.max(1.0);
    while sf(hi, df) > alpha {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sf(mid, df) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Poisson mass left unsummed when the noncentral series stops.
pub const SERIES_TAIL: f64 = 1e-12;

/// Noncentral chi-square CDF `P(chi2_df(eta) <= x)` as a Poisson mixture of
/// central chi-square CDFs, summed outward from the Poisson mode until the
/// remaining Poisson mass drops below [`SERIES_TAIL`].
pub fn noncentral_cdf(x: f64, df: f64, eta: f64) -> f64 {
    noncentral_mixture(df, eta, |k| cdf(x, k))
}

/// Noncentral upper tail `P(chi2_df(eta) > x)`.
pub fn noncentral_sf(x: f64, df: f64, eta: f64) -> f64 {
    noncentral_mixture(df, eta, |k| sf(x, k))
}

fn noncentral_mixture(df: f64, eta: f64, central: impl Fn(f64) -> f64) -> f64 {
    debug_assert!(eta >= 0.0);
    if eta == 0.0 {
        return central(df);
    }
    let lambda = 0.5 * eta;
    let ln_lambda = libm::log(lambda);
    let weight = |j: u64| -> f64 {
        let jf = j as f64;
        libm::exp(-lambda + jf * ln_lambda - libm::lgamma(jf + 1.0))
    };

    let mode = libm::floor(lambda) as u64;
    let mut mass = weight(mode);
    let mut total = mass * central(df + 2.0 * mode as f64);
    let (mut down, mut up) = (mode, mode);
    let (mut w_down, mut w_up) = (mass, mass);
    while 1.0 - mass >= SERIES_TAIL {
        // extend on whichever side carries the larger next weight
        let next_down = if down > 0 { w_down * down as f64 / lambda } else { 0.0 };
        let next_up = w_up * lambda / (up + 1) as f64;
        if next_down >= next_up && down > 0 {
            down -= 1;
            w_down = next_down;
            mass += w_down;
            total += w_down * central(df + 2.0 * down as f64);
        } else {
            up += 1;
            w_up = next_up;
            mass += w_up;
            total += w_up * central(df + 2.0 * up as f64);
        }
        if next_up == 0.0 && down == 0 {
            break;
        }
    }
    total.clamp(0.0, 1.0)
}
