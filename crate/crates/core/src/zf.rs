//! Monte Carlo check of the large-antenna ZF noise gains.
//!
//! The rate formulas treat the post-ZF noise of UE k at the SCBS as having
//! power `d_rk^alpha / N`. For i.i.d. complex Gaussian columns the exact
//! mean of `[(G^H G)^{-1}]_kk` is `d_rk^alpha / (N - K)` (complex inverse
//! Wishart), which is what the sampler is compared against.

use nalgebra::Complex;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Small-cell BS: N antennas, K UE columns.
    Scbs,
    /// Macro-cell BS: M antennas, K UE columns plus N relay columns.
    Mcbs,
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamStat {
    pub label: String,
    pub mean: f64,
    pub std_err: f64,
    /// Exact inverse-Wishart mean.
    pub exact: f64,
    /// Large-antenna approximation used in the rate formulas.
    pub approx: f64,
}

impl StreamStat {
    /// Deviation of the empirical mean from the exact value, in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mean - self.exact) / self.std_err
    }

    pub fn approx_ratio(&self) -> f64 {
        self.mean / self.approx
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZfNoiseReport {
    pub side: Side,
    pub trials: usize,
    pub seed: u64,
    /// Draws rejected because the Gram matrix was numerically singular.
    pub resampled: usize,
    pub streams: Vec<StreamStat>,
}

const MIN_TRIALS: usize = 100;
const MAX_RESAMPLES_PER_TRIAL: usize = 16;

/// Empirical mean of the per-stream ZF noise gains over `trials` seeded draws.
///
/// Trial `t` draws from its own ChaCha stream `(seed, t)`, so results do not
/// depend on how trials are split across threads.
pub fn sample_zf_noise_gains(
    scenario: &Scenario,
    side: Side,
    trials: usize,
    seed: u64,
) -> Result<ZfNoiseReport> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "trials must be >= {MIN_TRIALS}, got {trials}"
        )));
    }
    let k = scenario.k();
    let alpha = scenario.alpha;
    let (rows, variances, labels): (usize, Vec<f64>, Vec<String>) = match side {
        Side::Scbs => (
            scenario.n,
            scenario.d_r.iter().map(|d| d.powf(-alpha)).collect(),
            (1..=k).map(|i| format!("ue{i}")).collect(),
        ),
        Side::Mcbs => {
            let mut v: Vec<f64> = scenario.d_d.iter().map(|d| d.powf(-alpha)).collect();
            v.extend(std::iter::repeat_n(scenario.d_dr.powf(-alpha), scenario.n));
            let mut l: Vec<String> = (1..=k).map(|i| format!("ue{i}")).collect();
            l.extend((1..=scenario.n).map(|i| format!("relay{i}")));
            (scenario.m, v, l)
        }
    };
    let cols = variances.len();
    if rows <= cols {
        return Err(Error::Unsupported(format!(
            "{rows} antennas cannot separate {cols} streams"
        )));
    }
    let (exact_dof, approx_dof) = match side {
        Side::Scbs => ((scenario.n - k) as f64, scenario.n as f64),
        Side::Mcbs => ((rows - cols) as f64, (scenario.m - scenario.n) as f64),
    };

    let draws: Vec<(Vec<f64>, usize)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            draw_noise_gains(&mut rng, rows, &variances)
        })
        .collect::<Result<_>>()?;

    let mut sum = vec![0.0; cols];
    let mut sum_sq = vec![0.0; cols];
    let mut resampled = 0;
    for (gains, rejected) in &draws {
        resampled += rejected;
        for (j, g) in gains.iter().enumerate() {
            sum[j] += g;
            sum_sq[j] += g * g;
        }
    }
    let n = trials as f64;
    let streams = (0..cols)
        .map(|j| {
            let mean = sum[j] / n;
            let var = ((sum_sq[j] - n * mean * mean) / (n - 1.0)).max(0.0);
            let inv_var = 1.0 / variances[j];
            StreamStat {
                label: labels[j].clone(),
                mean,
                std_err: (var / n).sqrt(),
                exact: inv_var / exact_dof,
                approx: inv_var / approx_dof,
            }
        })
        .collect();
    Ok(ZfNoiseReport {
        side,
        trials,
        seed,
        resampled,
        streams,
    })
}

fn draw_noise_gains(
    rng: &mut ChaCha8Rng,
    rows: usize,
    variances: &[f64],
) -> Result<(Vec<f64>, usize)> {
    let cols = variances.len();
    for attempt in 0..MAX_RESAMPLES_PER_TRIAL {
        let g = DMatrix::<Complex<f64>>::from_fn(rows, cols, |_, c| {
            let scale = (variances[c] / 2.0).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(scale * re, scale * im)
        });
        let gram = g.adjoint() * &g;
        if let Some(chol) = gram.cholesky() {
            let inv = chol.inverse();
            let gains: Vec<f64> = (0..cols).map(|j| inv[(j, j)].re).collect();
            if gains.iter().all(|&x| x > 0.0 && x.is_finite()) {
                return Ok((gains, attempt));
            }
        }
    }
    Err(Error::Convergence(
        "repeatedly singular channel draws".into(),
    ))
}
