//! Optimal quantization-noise variances.
//!
//! The relay budget `ln lambda_s` is split into per-UE shares
//! `ln lambda_k >= 0`; a share maps to a variance through
//! `Q_k = (s_k a_k + P_k) / (a_k (lambda_k - 1))` with `s_k = d_rk^alpha / N`.
//! A zero share means the UE is not relayed.

mod bisection;
mod grid;
mod kkt;
mod two_ue;
mod waterfill;

pub use bisection::waterfill_bisection;
pub use grid::{grid_oracle, GridResult, GridSpec};
pub use kkt::{kkt_residuals, KktReport};
pub use two_ue::{optimize_two_ue, two_ue_quadratic, TwoUeQuadratic};
pub use waterfill::{
    descartes_certificate, find_upsilon, optimize_k_ue, order_omegas, solve_xs,
    DescartesCertificate, OmegaOrder,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::ln_expm1;
use crate::region::{QuantNoise, Weights};
use crate::scenario::{LinkGains, Scenario};

/// Numerical tolerances used by the solvers and the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Relative tolerance for algebraic identities.
    pub identity: f64,
    /// Agreement between independent solvers, in `ln lambda`.
    pub cross_solver: f64,
    /// Relative value gap allowed against the grid search.
    pub grid_rel: f64,
    /// Monte Carlo acceptance in standard errors.
    pub mc_sigmas: f64,
    /// Scalar root residual, scaled by `max(1, ln lambda_s)`.
    pub root: f64,
    /// Shares below this (in nats) are snapped to zero.
    pub snap: f64,
    pub max_iter: usize,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        identity: 1e-9,
        cross_solver: 1e-8,
        grid_rel: 1e-3,
        mc_sigmas: 3.0,
        root: 1e-12,
        snap: 1e-12,
        max_iter: 200,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Split of the relay budget across UEs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantAllocation {
    /// `ln lambda_k` in nats.
    pub log_lambda: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<QuantNoise>,
    /// Number of relayed UEs.
    pub upsilon: usize,
    /// Root of the water-filling polynomial (shift of the water level).
    pub x_s: f64,
    /// `ln X` where `X = 1 / eta_s` is the water level.
    pub log_water_level: f64,
}

impl QuantAllocation {
    /// Builds `Q` from the shares, snapping tiny shares to zero.
    pub fn from_log_lambda(
        gains: &LinkGains,
        mut log_lambda: Vec<f64>,
        x_s: f64,
        log_water_level: f64,
    ) -> Self {
        for l in &mut log_lambda {
            if *l < Tolerances::DEFAULT.snap {
                *l = 0.0;
            }
        }
        let q = (0..gains.k())
            .map(|k| quant_noise_for(gains, k, log_lambda[k]))
            .collect();
        let upsilon = log_lambda.iter().filter(|&&l| l > 0.0).count();
        QuantAllocation {
            log_lambda,
            q,
            upsilon,
            x_s,
            log_water_level,
        }
    }

    pub fn k(&self) -> usize {
        self.log_lambda.len()
    }

    /// `|sum ln lambda_k - ln lambda_s| / max(1, ln lambda_s)`.
    pub fn budget_residual(&self, gains: &LinkGains) -> f64 {
        let total: f64 = self.log_lambda.iter().sum();
        (total - gains.log_lambda_s).abs() / gains.log_lambda_s.max(1.0)
    }
}

/// `Q_k` realizing the share `ln lambda_k`, computed in log domain.
pub fn quant_noise_for(gains: &LinkGains, k: usize, log_lambda: f64) -> QuantNoise {
    if log_lambda < Tolerances::DEFAULT.snap {
        return QuantNoise::Unrelayed;
    }
    let (a, s, p) = (gains.a[k], gains.zf_noise_r[k], gains.power[k]);
    QuantNoise::Variance(((s * a + p).ln() - a.ln() - ln_expm1(log_lambda)).exp())
}

/// Closed form for `K = 2`, water-filling otherwise.
pub fn optimize(s: &Scenario, mu: &Weights) -> Result<QuantAllocation> {
    if mu.len() != s.k() {
        return Err(Error::DimensionMismatch {
            field: "mu",
            got: mu.len(),
            expected: s.k(),
        });
    }
    if s.k() == 2 {
        optimize_two_ue(s, mu)
    } else {
        optimize_k_ue(s, mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::{bin_rates, qf_jd_constraints};

    #[test]
    fn share_to_variance_round_trip() {
        let g = Scenario::two_ue_reference([25.0, 30.0]).link_gains();
        for &l in &[1e-9, 1e-3, 0.5, 3.0, 40.0] {
            let q = quant_noise_for(&g, 0, l);
            let rb = bin_rates(&g, &[q, QuantNoise::Unrelayed]).unwrap()[0];
            assert!(
                (rb - l / std::f64::consts::LN_2).abs() <= 1e-9 * rb.max(1e-9),
                "l={l}"
            );
        }
        assert_eq!(quant_noise_for(&g, 0, 1e-13), QuantNoise::Unrelayed);
        assert_eq!(quant_noise_for(&g, 0, 0.0), QuantNoise::Unrelayed);
    }

    #[test]
    fn reference_budget_scale() {
        let g = Scenario::two_ue_reference([25.0, 30.0]).link_gains();
        // P = 10^0.1 105^2.7 / 450, P_r = 5P
        let p = 10f64.powf(0.1) * 105f64.powf(2.7) / 450.0;
        let want = 50.0 * (1.0 + 5.0 * p * 450.0 / (50.0 * 100f64.powf(2.7))).log2();
        assert!((g.relay_bits() - want).abs() < 1e-10);
        assert!((g.relay_bits() - 9.68).abs() < 0.01);
        let alloc = optimize(
            &Scenario::two_ue_reference([25.0, 30.0]),
            &Weights::two(0.5).unwrap(),
        )
        .unwrap();
        assert!(alloc.budget_residual(&g) < 1e-12);
        let c = qf_jd_constraints(&g, &alloc.q).unwrap();
        let sum: f64 = c.i_caps.iter().sum();
        assert!((sum - c.j_subset(0b11)).abs() < 1e-9);
    }
}
