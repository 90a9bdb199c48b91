//! Bisection on the water level, used to cross-check the polynomial route.
//!
//! For a water level `X`, UE k takes `delta_k(X) = ln((mu_k b_k / a_k)(X - 1/mu_k))`
//! when `X > omega_k` and nothing otherwise. The total is continuous and
//! nondecreasing in `X`, so the level meeting `sum delta_k = ln lambda_s`
//! can be bracketed and bisected. The search runs over `u = ln X`.

use super::{QuantAllocation, Tolerances};
use crate::error::{Error, Result};
use crate::region::Weights;
use crate::scenario::LinkGains;

fn shares(g: &LinkGains, mu: &Weights, u: f64) -> Vec<f64> {
    (0..g.k())
        .map(|k| {
            if mu[k] <= 0.0 {
                return 0.0;
            }
            // ln(X - 1/mu) = u + ln(1 - e^{-u}/mu)
            let inner = (-(-u - mu[k].ln()).exp()).ln_1p();
            let d = u + inner + (mu[k] * g.b[k]).ln() - g.a[k].ln();
            if inner.is_finite() && d > 0.0 {
                d
            } else {
                0.0
            }
        })
        .collect()
}

pub fn waterfill_bisection(g: &LinkGains, mu: &Weights) -> Result<QuantAllocation> {
    if mu.len() != g.k() {
        return Err(Error::DimensionMismatch {
            field: "mu",
            got: mu.len(),
            expected: g.k(),
        });
    }
    let big_l = g.log_lambda_s;
    let total = |u: f64| shares(g, mu, u).iter().sum::<f64>();

    let min_omega = (0..g.k())
        .filter(|&k| mu[k] > 0.0)
        .map(|k| (g.a[k] + g.b[k]) / (mu[k] * g.b[k]))
        .fold(f64::INFINITY, f64::min);
    let mut lo = min_omega.ln();
    let mut step = 1.0;
    let mut hi = lo + step;
    while total(hi) < big_l {
        lo = hi;
        step *= 2.0;
        hi += step;
        if !hi.is_finite() {
            return Err(Error::Convergence("water level bracket".into()));
        }
    }

    let stop = Tolerances::DEFAULT.root * big_l.max(1.0);
    let mut u = 0.5 * (lo + hi);
    for _ in 0..2000 {
        u = 0.5 * (lo + hi);
        let r = total(u) - big_l;
        if r.abs() <= stop || u <= lo || u >= hi {
            break;
        }
        if r < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
    }
    let log_lambda = shares(g, mu, u);
    Ok(QuantAllocation::from_log_lambda(g, log_lambda, f64::NAN, u))
}
