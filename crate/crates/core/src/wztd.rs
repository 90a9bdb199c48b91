//! Phase durations and relay powers for WZ binning with time-division
//! forwarding, and the check that it loses nothing against joint decoding.

use serde::Serialize;

use crate::error::Result;
use crate::numeric::{nats_to_bits, rel_diff};
use crate::quantopt::{optimize, QuantAllocation};
use crate::region::{
    bin_rates, max_weighted_sum, qf_jd_constraints, qf_wztd_rates, Weights, WztdRates,
};
use crate::scenario::{LinkGains, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WztdAllocation {
    pub beta: Vec<f64>,
    pub rho: Vec<f64>,
    /// Bits each phase can carry.
    pub phase_capacity: Vec<f64>,
    /// `ln lambda_sk = beta_k N ln(1 + (rho_k/beta_k)(M-N)/(N d_dr^alpha))`.
    pub log_lambda_sk: Vec<f64>,
}

/// `beta_k = ln lambda_k / ln lambda_s`, `rho_k = beta_k P_r`: every phase
/// runs at the full SCBS power, and unrelayed UEs get an empty phase.
pub fn allocate_phases(g: &LinkGains, alloc: &QuantAllocation) -> WztdAllocation {
    let beta: Vec<f64> = alloc
        .log_lambda
        .iter()
        .map(|&l| (l / g.log_lambda_s).min(1.0))
        .collect();
    let rho: Vec<f64> = beta.iter().map(|&b| b * g.p_r).collect();
    let log_lambda_sk: Vec<f64> = beta
        .iter()
        .zip(&rho)
        .map(|(&b, &r)| {
            if b == 0.0 {
                0.0
            } else {
                b * g.n as f64 * (r / b * g.relay_gain).ln_1p()
            }
        })
        .collect();
    let phase_capacity = log_lambda_sk.iter().map(|&l| nats_to_bits(l)).collect();
    WztdAllocation {
        beta,
        rho,
        phase_capacity,
        log_lambda_sk,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub jd_value: f64,
    pub wztd_value: f64,
    pub beta: Vec<f64>,
    pub rho: Vec<f64>,
    pub rb: Vec<f64>,
    pub phase_capacity: Vec<f64>,
}

impl EquivalenceReport {
    pub fn value_gap(&self) -> f64 {
        rel_diff(self.jd_value, self.wztd_value)
    }

    /// Largest `|R_bk - phase capacity_k|`, relative with a unit floor.
    pub fn binding_gap(&self) -> f64 {
        self.rb
            .iter()
            .zip(&self.phase_capacity)
            .map(|(&r, &c)| rel_diff(r, c))
            .fold(0.0, f64::max)
    }
}

/// Optimizes `Q`, then evaluates the weighted sum under joint decoding
/// and under WZ binning with the proportional phase allocation.
pub fn equivalence_report(s: &Scenario, mu: &Weights) -> Result<EquivalenceReport> {
    let g = s.link_gains();
    let alloc = optimize(s, mu)?;
    equivalence_for(&g, mu, &alloc)
}

pub fn equivalence_for(
    g: &LinkGains,
    mu: &Weights,
    alloc: &QuantAllocation,
) -> Result<EquivalenceReport> {
    let phases = allocate_phases(g, alloc);
    let jd = max_weighted_sum(&qf_jd_constraints(g, &alloc.q)?, mu)?;
    let rates: WztdRates = qf_wztd_rates(g, &alloc.q, &phases.beta, &phases.rho)?;
    let wztd_value = rates.value(mu).unwrap_or(f64::NEG_INFINITY);
    Ok(EquivalenceReport {
        jd_value: jd.value,
        wztd_value,
        beta: phases.beta,
        rho: phases.rho,
        rb: bin_rates(g, &alloc.q)?,
        phase_capacity: rates.phase_capacity,
    })
}
