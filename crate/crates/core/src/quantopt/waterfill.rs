//! Water-filling split for any number of UEs.
//!
//! UEs are ranked by `omega_k = (a_k + b_k) / (mu_k b_k)`. The first
//! `upsilon` of them are relayed, and their shares are
//! `lambda_k = (mu_k b_k / a_k)(x_s + omega_upsilon - 1/mu_k)` where `x_s`
//! is the single positive root of
//! `prod_k (x + omega_upsilon - 1/mu_k) = lambda_s prod_k a_k / (mu_k b_k)`.
//!
//! Writing `g_k = a_k / (mu_k b_k) = omega_k - 1/mu_k` and
//! `D_k = omega_upsilon - omega_k`, the root equation becomes
//! `sum_k ln(1 + (x + D_k) / g_k) = ln lambda_s`, which is what is solved.

use serde::Serialize;

use super::{QuantAllocation, Tolerances};
use crate::error::{Error, Result};
use crate::numeric::{ln_add_exp, softplus};
use crate::region::Weights;
use crate::scenario::{LinkGains, Scenario};

/// UEs sorted by `omega`, ties broken by index. Zero-weight UEs have
/// `omega = inf` and come last.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaOrder {
    pub perm: Vec<usize>,
    /// `omega_k` indexed by original UE.
    pub omega: Vec<f64>,
    /// `ln g_k` indexed by original UE (`inf` for zero weight).
    pub log_g: Vec<f64>,
    /// Number of UEs with positive weight.
    pub finite: usize,
}

pub fn order_omegas(g: &LinkGains, mu: &Weights) -> OmegaOrder {
    let k = g.k();
    let mut omega = Vec::with_capacity(k);
    let mut log_g = Vec::with_capacity(k);
    for i in 0..k {
        if mu[i] > 0.0 {
            let gi = g.a[i] / (mu[i] * g.b[i]);
            omega.push(1.0 / mu[i] + gi);
            log_g.push(g.a[i].ln() - mu[i].ln() - g.b[i].ln());
        } else {
            omega.push(f64::INFINITY);
            log_g.push(f64::INFINITY);
        }
    }
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by(|&i, &j| omega[i].total_cmp(&omega[j]));
    let finite = omega.iter().filter(|w| w.is_finite()).count();
    OmegaOrder {
        perm,
        omega,
        log_g,
        finite,
    }
}

/// `sum_{k <= v} ln(1 + (omega_v - omega_k) / g_k)`, the log of the
/// left-hand product divided by `prod g_k`.
fn level_lhs(order: &OmegaOrder, v: usize) -> f64 {
    let top = order.omega[order.perm[v - 1]];
    order.perm[..v]
        .iter()
        .map(|&i| {
            let d = top - order.omega[i];
            if d <= 0.0 {
                0.0
            } else {
                softplus(d.ln() - order.log_g[i])
            }
        })
        .sum()
}

/// Largest `upsilon` whose threshold test passes, scanning all candidates.
pub fn find_upsilon(g: &LinkGains, order: &OmegaOrder) -> usize {
    (1..=order.finite)
        .rev()
        .find(|&v| level_lhs(order, v) <= g.log_lambda_s)
        .unwrap_or(1)
}

/// Solution of the root equation in the scaled variable `x = e^sigma y`,
/// `y` in `[0, 1]`.
struct ScaledRoot {
    sigma: f64,
    y: f64,
}

impl ScaledRoot {
    fn log_x(&self) -> f64 {
        self.sigma + self.y.ln()
    }
}

fn solve_scaled(g: &LinkGains, order: &OmegaOrder, upsilon: usize) -> Result<ScaledRoot> {
    let tol = Tolerances::DEFAULT;
    let big_l = g.log_lambda_s;
    let active = &order.perm[..upsilon];
    let top = order.omega[active[upsilon - 1]];
    let log_d: Vec<f64> = active
        .iter()
        .map(|&i| {
            let d = top - order.omega[i];
            if d > 0.0 {
                d.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let log_gs: Vec<f64> = active.iter().map(|&i| order.log_g[i]).collect();
    // prod (x + c_k) >= x^upsilon, so x = e^{T/upsilon} overshoots the root.
    let sigma = (big_l + log_gs.iter().sum::<f64>()) / upsilon as f64;
    // ln c_k - sigma, c_k = D_k + g_k
    let log_c_scaled: Vec<f64> = log_d
        .iter()
        .zip(&log_gs)
        .map(|(&d, &lg)| ln_add_exp(d, lg) - sigma)
        .collect();

    let f = |y: f64| -> f64 {
        let ly = sigma + y.ln();
        log_d
            .iter()
            .zip(&log_gs)
            .map(|(&d, &lg)| softplus(ln_add_exp(ly, d) - lg))
            .sum::<f64>()
            - big_l
    };
    let df = |y: f64| -> f64 { log_c_scaled.iter().map(|&lc| 1.0 / (lc.exp() + y)).sum() };

    let stop = tol.root * big_l.max(1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut y = 0.0;
    let mut fy = f(y);
    if fy >= 0.0 {
        return Ok(ScaledRoot { sigma, y: 0.0 });
    }
    for _ in 0..tol.max_iter {
        if fy.abs() <= stop {
            return Ok(ScaledRoot { sigma, y });
        }
        if fy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(ScaledRoot { sigma, y });
        }
        let step = fy / df(y);
        let next = y - step;
        y = if step.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        fy = f(y);
    }
    Err(Error::Convergence(format!(
        "water level root: residual {fy} after {} iterations",
        tol.max_iter
    )))
}

/// Root `x_s >= 0` of the water-filling equation for the first `upsilon`
/// UEs in `order`. May be `inf` when the root exceeds `f64` range; the
/// allocation itself is computed in log domain and is unaffected.
pub fn solve_xs(g: &LinkGains, order: &OmegaOrder, upsilon: usize) -> Result<f64> {
    check_upsilon(order, upsilon)?;
    let r = solve_scaled(g, order, upsilon)?;
    Ok(r.log_x().exp())
}

fn check_upsilon(order: &OmegaOrder, upsilon: usize) -> Result<()> {
    if upsilon == 0 || upsilon > order.finite {
        return Err(Error::InvalidArgument(format!(
            "upsilon {upsilon} outside 1..={}",
            order.finite
        )));
    }
    Ok(())
}

pub fn optimize_k_ue(s: &Scenario, mu: &Weights) -> Result<QuantAllocation> {
    let g = s.link_gains();
    if mu.len() != g.k() {
        return Err(Error::DimensionMismatch {
            field: "mu",
            got: mu.len(),
            expected: g.k(),
        });
    }
    let order = order_omegas(&g, mu);
    let upsilon = find_upsilon(&g, &order);
    let root = solve_scaled(&g, &order, upsilon)?;
    let top = order.omega[order.perm[upsilon - 1]];
    let log_x = root.log_x();
    let mut log_lambda = vec![0.0; g.k()];
    for &i in &order.perm[..upsilon] {
        let d = top - order.omega[i];
        let log_d = if d > 0.0 { d.ln() } else { f64::NEG_INFINITY };
        log_lambda[i] = softplus(ln_add_exp(log_x, log_d) - order.log_g[i]);
    }
    let log_level = ln_add_exp(log_x, top.ln());
    let mut alloc = QuantAllocation::from_log_lambda(&g, log_lambda, log_x.exp(), log_level);
    alloc.upsilon = upsilon;
    Ok(alloc)
}

/// Evidence that the returned root is the unique positive one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescartesCertificate {
    pub upsilon: usize,
    /// `ln(prod(omega_v - 1/mu_k)) - ln(lambda_s prod a_k/(mu_k b_k))` at `v = upsilon`;
    /// nonpositive means the constant term is nonpositive.
    pub margin: f64,
    /// Same margin at `upsilon + 1`; positive when the test fails there.
    pub next_margin: Option<f64>,
    /// Coefficients of the scaled polynomial, leading term first.
    pub coefficients: Vec<f64>,
    pub sign_changes: usize,
}

impl DescartesCertificate {
    pub fn holds(&self) -> bool {
        self.margin <= 0.0 && self.next_margin.is_none_or(|m| m > 0.0) && self.sign_changes <= 1
    }
}

pub fn descartes_certificate(g: &LinkGains, mu: &Weights) -> DescartesCertificate {
    let order = order_omegas(g, mu);
    let upsilon = find_upsilon(g, &order);
    let margin = level_lhs(&order, upsilon) - g.log_lambda_s;
    let next_margin =
        (upsilon < order.finite).then(|| level_lhs(&order, upsilon + 1) - g.log_lambda_s);

    // prod_k (y + c'_k) - 1 with c'_k = c_k e^{-sigma}, sigma = T / upsilon
    let top = order.omega[order.perm[upsilon - 1]];
    let active = &order.perm[..upsilon];
    let sigma =
        (g.log_lambda_s + active.iter().map(|&i| order.log_g[i]).sum::<f64>()) / upsilon as f64;
    let mut coefficients = vec![1.0];
    for &i in active {
        let d = top - order.omega[i];
        let log_d = if d > 0.0 { d.ln() } else { f64::NEG_INFINITY };
        let c = (ln_add_exp(log_d, order.log_g[i]) - sigma).exp();
        let mut next = coefficients.clone();
        next.push(0.0);
        for j in 0..coefficients.len() {
            next[j + 1] += c * coefficients[j];
        }
        coefficients = next;
    }
    *coefficients.last_mut().unwrap() = margin.exp_m1();
    let signs: Vec<bool> = coefficients
        .iter()
        .filter(|&&c| c != 0.0)
        .map(|&c| c > 0.0)
        .collect();
    let sign_changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    DescartesCertificate {
        upsilon,
        margin,
        next_margin,
        coefficients,
        sign_changes,
    }
}
