//! Log-probabilities of Gaussian intervals, stable far into the tails.

use libm::{erf, erfc};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `ln erfc(x)` for `x >= 0`, switching to the asymptotic series once `erfc` underflows.
fn ln_erfc_pos(x: f64) -> f64 {
    if x < 25.0 {
        erfc(x).ln()
    } else {
        let x2 = x * x;
        let series = 1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2);
        -x2 - (x * PI.sqrt()).ln() + series.ln()
    }
}

/// `ln(1 - exp(a))` for `a <= 0`.
fn ln_1m_exp(a: f64) -> f64 {
    if a > -std::f64::consts::LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

/// `ln P(lo < Z < hi)` for a standard normal `Z`.
pub fn ln_std_normal_interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return f64::NEG_INFINITY;
    }
    if lo >= 0.0 {
        upper_tail_interval(lo, hi)
    } else if hi <= 0.0 {
        upper_tail_interval(-hi, -lo)
    } else {
        (0.5 * (erf(hi * FRAC_1_SQRT_2) + erf(-lo * FRAC_1_SQRT_2))).ln()
    }
}

fn upper_tail_interval(lo: f64, hi: f64) -> f64 {
    let a = ln_erfc_pos(lo * FRAC_1_SQRT_2);
    if hi.is_infinite() {
        return a - std::f64::consts::LN_2;
    }
    let b = ln_erfc_pos(hi * FRAC_1_SQRT_2);
    a - std::f64::consts::LN_2 + ln_1m_exp(b - a)
}

/// `ln P(|x - W| <= h)` for `W ~ N(0, sigma^2)`; a hard indicator when `sigma == 0`.
pub fn ln_box_probability(x: f64, h: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return if x.abs() <= h { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_std_normal_interval((x - h) / sigma, (x + h) / sigma)
}
