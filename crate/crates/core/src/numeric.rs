//! Log-domain helpers shared by the rate and allocation code.
//!
//! Rates are reported in bits per channel use; the relay budget and the
//! per-UE multiplicative shares are carried as natural logarithms so that
//! `(1 + snr)^N` is never materialized.

use std::f64::consts::LN_2;

/// `C(x) = log2(1 + x)` in bits. `C(inf) = inf`.
#[inline]
pub fn cap(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

#[inline]
pub fn nats_to_bits(x: f64) -> f64 {
    x / LN_2
}

#[inline]
pub fn bits_to_nats(x: f64) -> f64 {
    x * LN_2
}

/// `ln(e^x - 1)` for `x > 0`, accurate both near zero and for large `x`.
pub fn ln_expm1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `log2(sum_i 2^{x_i})` without overflow. Empty input yields `-inf`.
pub fn log2_sum_exp2<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = terms.iter().map(|&t| (t - max).exp2()).sum();
    max + sum.log2()
}

/// `ln(e^a + e^b)`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 + e^z)`.
pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Relative difference with a unit floor on the scale.
#[inline]
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
