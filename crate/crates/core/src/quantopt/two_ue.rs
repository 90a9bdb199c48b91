//! Closed-form split for two UEs.
//!
//! With UE 1 the heavier-weighted one, the optimal `lambda_1` is the
//! positive root of `A l^2 - B l + C` clamped to `[1, lambda_s]`, where
//! `A = mu2 P2 s1 a1`, `B = (mu1 - mu2) P1 P2`, `C = -mu1 P1 s2 a2 lambda_s`.

use serde::Serialize;

use super::QuantAllocation;
use crate::error::{Error, Result};
use crate::numeric::ln_add_exp;
use crate::region::Weights;
use crate::scenario::{LinkGains, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoUeQuadratic {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Overflows to `-inf` for very large relay budgets; the root is
    /// computed from the scaled form and does not use this value.
    #[serde(rename = "C")]
    pub c: f64,
    /// `-C / lambda_s`.
    pub c_prime: f64,
    /// `ln lambda_o`, `inf` when `A = 0`.
    pub log_lambda_o: f64,
    /// Index of the UE playing the role of UE 1.
    pub lead: usize,
}

impl TwoUeQuadratic {
    pub fn lambda_o(&self) -> f64 {
        self.log_lambda_o.exp()
    }

    /// `f(lambda_o) / (A lambda_o^2)`, zero at an exact root.
    pub fn scaled_residual(&self, log_lambda_s: f64) -> f64 {
        if self.a == 0.0 {
            return 0.0;
        }
        let l = self.log_lambda_o;
        1.0 - (self.b / self.a) * (-l).exp()
            - (self.c_prime / self.a) * (log_lambda_s - 2.0 * l).exp()
    }
}

/// The quadratic for UE `lead` with the other UE as the lighter one.
fn quadratic(g: &LinkGains, mu: &Weights, lead: usize) -> TwoUeQuadratic {
    let other = 1 - lead;
    let (m1, m2) = (mu[lead], mu[other]);
    let (p1, p2) = (g.power[lead], g.power[other]);
    let (s1, s2) = (g.zf_noise_r[lead], g.zf_noise_r[other]);
    let (a1, a2) = (g.a[lead], g.a[other]);
    let a = m2 * p2 * s1 * a1;
    let b = (m1 - m2) * p1 * p2;
    let c_prime = m1 * p1 * s2 * a2;
    let big_l = g.log_lambda_s;
    let log_lambda_o = if a == 0.0 {
        f64::INFINITY
    } else {
        // lambda = e^{L/2} t:  A t^2 - B e^{-L/2} t - c' = 0
        let b_scaled = b * (-big_l / 2.0).exp();
        let disc = b_scaled * b_scaled + 4.0 * a * c_prime;
        assert!(disc >= 0.0, "negative discriminant {disc}");
        let t = if b_scaled >= 0.0 {
            (b_scaled + disc.sqrt()) / (2.0 * a)
        } else {
            2.0 * c_prime / (disc.sqrt() - b_scaled)
        };
        big_l / 2.0 + t.ln()
    };
    TwoUeQuadratic {
        a,
        b,
        c: -c_prime * big_l.exp(),
        c_prime,
        log_lambda_o,
        lead,
    }
}

/// Quadratic with the heavier-weighted UE in the lead (UE 1 on ties).
pub fn two_ue_quadratic(g: &LinkGains, mu: &Weights) -> Result<TwoUeQuadratic> {
    if g.k() != 2 || mu.len() != 2 {
        return Err(Error::Unsupported(format!(
            "closed form needs K = 2, got {}",
            g.k()
        )));
    }
    let lead = if mu[0] >= 0.5 { 0 } else { 1 };
    Ok(quadratic(g, mu, lead))
}

pub fn optimize_two_ue(s: &Scenario, mu: &Weights) -> Result<QuantAllocation> {
    let g = s.link_gains();
    let quad = two_ue_quadratic(&g, mu)?;
    let big_l = g.log_lambda_s;
    let lead = quad.lead;
    let l_lead = quad.log_lambda_o.clamp(0.0, big_l);
    let mut log_lambda = vec![0.0; 2];
    log_lambda[lead] = l_lead;
    log_lambda[1 - lead] = big_l - l_lead;

    // Water level from the stationarity of a relayed UE: X = (a lambda + b) / (mu b).
    let j = if log_lambda[lead] >= log_lambda[1 - lead] {
        lead
    } else {
        1 - lead
    };
    let log_x = ln_add_exp(g.a[j].ln() + log_lambda[j], g.b[j].ln()) - (mu[j] * g.b[j]).ln();
    Ok(QuantAllocation::from_log_lambda(
        &g,
        log_lambda,
        f64::NAN,
        log_x,
    ))
}
