//! Optimality conditions of the convex form of the split:
//! minimize `sum mu_k ln(a_k + b_k e^{-delta_k})` over `delta_k = ln lambda_k >= 0`
//! with `sum delta_k = ln lambda_s`.
//!
//! Stationarity reads `mu_k b_k / (a_k lambda_k + b_k) + eta_k = eta_s`.
//! Multipliers are rebuilt from the allocation's water level `X = 1/eta_s`:
//! relayed UEs get `eta_k = 0`, the rest get whatever stationarity demands.
//! Stationarity, dual feasibility and slackness residuals are reported
//! relative to `eta_s`.

use serde::Serialize;

use super::QuantAllocation;
use crate::numeric::ln_add_exp;
use crate::region::Weights;
use crate::scenario::LinkGains;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub eta_s: f64,
    pub eta: Vec<f64>,
    pub stationarity: Vec<f64>,
    pub dual_feasibility: Vec<f64>,
    pub slackness: Vec<f64>,
    /// `|sum ln lambda_k - ln lambda_s| / max(1, ln lambda_s)` plus any negative share.
    pub primal: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .iter()
            .chain(&self.dual_feasibility)
            .chain(&self.slackness)
            .copied()
            .fold(self.primal, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.stationarity
            .iter()
            .chain(&self.dual_feasibility)
            .chain(&self.slackness)
            .all(|x| x.is_finite())
            && self.primal.is_finite()
    }
}

pub fn kkt_residuals(g: &LinkGains, mu: &Weights, alloc: &QuantAllocation) -> KktReport {
    let k = g.k();
    let log_x = alloc.log_water_level;
    let mut eta = Vec::with_capacity(k);
    let mut stationarity = Vec::with_capacity(k);
    let mut dual = Vec::with_capacity(k);
    let mut slack = Vec::with_capacity(k);
    for i in 0..k {
        let l = alloc.log_lambda[i];
        // mu b / (a lambda + b) / eta_s, in log domain
        let ratio = if mu[i] > 0.0 {
            ((mu[i] * g.b[i]).ln() + log_x - ln_add_exp(g.a[i].ln() + l, g.b[i].ln())).exp()
        } else {
            0.0
        };
        let eta_rel = if l > 0.0 { 0.0 } else { 1.0 - ratio };
        stationarity.push((ratio + eta_rel - 1.0).abs());
        dual.push((-eta_rel).max(0.0));
        slack.push((eta_rel * l).abs());
        eta.push(eta_rel * (-log_x).exp());
    }
    let negative: f64 = alloc.log_lambda.iter().map(|&l| (-l).max(0.0)).sum();
    let total: f64 = alloc.log_lambda.iter().sum();
    KktReport {
        eta_s: (-log_x).exp(),
        eta,
        stationarity,
        dual_feasibility: dual,
        slackness: slack,
        primal: (total - g.log_lambda_s).abs() / g.log_lambda_s.max(1.0) + negative,
    }
}
