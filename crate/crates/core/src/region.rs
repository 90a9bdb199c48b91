//! QF-JD and QF-WZTD rate-constraint sets and weighted-sum maximization
//! over them.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp;
use crate::numeric::cap;
use crate::scenario::{LinkGains, Scenario};

/// Quantization noise variance for one UE stream at the SCBS.
/// `Unrelayed` is the `Q = inf` limit: the stream is not forwarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantNoise {
    Variance(f64),
    Unrelayed,
}

impl QuantNoise {
    pub fn new(q: f64) -> Result<Self> {
        if q == f64::INFINITY {
            Ok(QuantNoise::Unrelayed)
        } else if q > 0.0 && q.is_finite() {
            Ok(QuantNoise::Variance(q))
        } else {
            Err(Error::InvalidQuant { ue: 0, value: q })
        }
    }

    pub fn is_relayed(self) -> bool {
        matches!(self, QuantNoise::Variance(_))
    }

    /// Variance as a float, `inf` when unrelayed.
    pub fn as_f64(self) -> f64 {
        match self {
            QuantNoise::Variance(q) => q,
            QuantNoise::Unrelayed => f64::INFINITY,
        }
    }

    /// `C(num / Q)`, taking the `Q = inf` limit exactly.
    fn cap_over(self, num: f64) -> f64 {
        match self {
            QuantNoise::Variance(q) => cap(num / q),
            QuantNoise::Unrelayed => 0.0,
        }
    }
}

impl fmt::Display for QuantNoise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantNoise::Variance(q) => write!(f, "{q:.12e}"),
            QuantNoise::Unrelayed => f.write_str("inf"),
        }
    }
}

impl Serialize for QuantNoise {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            QuantNoise::Variance(q) => s.serialize_f64(*q),
            QuantNoise::Unrelayed => s.serialize_none(),
        }
    }
}

pub fn check_quant(q: &[QuantNoise], k: usize) -> Result<()> {
    if q.len() != k {
        return Err(Error::DimensionMismatch {
            field: "Q",
            got: q.len(),
            expected: k,
        });
    }
    for (ue, &x) in q.iter().enumerate() {
        if let QuantNoise::Variance(v) = x {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidQuant { ue, value: v });
            }
        }
    }
    Ok(())
}

/// Nonnegative priority weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if mu.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
            return Err(Error::InvalidWeights(format!(
                "weights outside [0, 1]: {mu:?}"
            )));
        }
        let sum: f64 = mu.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
        }
        Ok(Weights(mu))
    }

    pub fn two(mu1: f64) -> Result<Self> {
        Self::new(vec![mu1, 1.0 - mu1])
    }

    pub fn uniform(k: usize) -> Self {
        Weights(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// UE indices by decreasing weight, ties by index.
    pub fn priority_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&i, &j| self.0[j].total_cmp(&self.0[i]));
        idx
    }

    fn check_len(&self, k: usize) -> Result<()> {
        if self.0.len() != k {
            return Err(Error::DimensionMismatch {
                field: "mu",
                got: self.0.len(),
                expected: k,
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Weights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Rate of each quantization index, `C((1 + b_k) d_rk^alpha / (N Q_k))`.
pub fn quant_rates(gains: &LinkGains, q: &[QuantNoise]) -> Result<Vec<f64>> {
    check_quant(q, gains.k())?;
    Ok((0..gains.k())
        .map(|i| q[i].cap_over((1.0 + gains.b[i]) * gains.zf_noise_r[i]))
        .collect())
}

/// Rate of each WZ bin index, `C((d_rk^alpha / N + P_k / a_k) / Q_k)`.
pub fn bin_rates(gains: &LinkGains, q: &[QuantNoise]) -> Result<Vec<f64>> {
    check_quant(q, gains.k())?;
    Ok((0..gains.k())
        .map(|i| q[i].cap_over(gains.zf_noise_r[i] + gains.power[i] / gains.a[i]))
        .collect())
}

/// Per-UE caps `I_k`, direct rates, and the shared relay term `xi`. Every
/// subset bound is `J_L = xi + sum_{k in L} direct_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateConstraintSet {
    pub i_caps: Vec<f64>,
    pub xi: f64,
    pub direct: Vec<f64>,
}

impl RateConstraintSet {
    pub fn k(&self) -> usize {
        self.i_caps.len()
    }

    pub fn j(&self, k: usize) -> f64 {
        self.direct[k] + self.xi
    }

    /// `J_L` for the subset encoded by bitmask `mask` (bit k = UE k).
    pub fn j_subset(&self, mask: u64) -> f64 {
        self.xi
            + (0..self.k())
                .filter(|&k| mask >> k & 1 == 1)
                .map(|k| self.direct[k])
                .sum::<f64>()
    }

    /// Whether `rates` satisfies every constraint up to `tol`.
    pub fn contains(&self, rates: &[f64], tol: f64) -> bool {
        let k = self.k();
        if rates.len() != k || rates.iter().any(|&r| r < -tol) {
            return false;
        }
        if (0..k).any(|i| rates[i] > self.i_caps[i] + tol) {
            return false;
        }
        if k <= 20 {
            (1u64..1 << k).all(|mask| {
                let s: f64 = (0..k)
                    .filter(|&i| mask >> i & 1 == 1)
                    .map(|i| rates[i])
                    .sum();
                s <= self.j_subset(mask) + tol
            })
        } else {
            // J_L - R(L) = xi + sum (d - R): the worst subset collects every
            // UE with R_k > d_k, or the single worst UE if none exceeds.
            let excess: Vec<f64> = (0..k).map(|i| rates[i] - self.direct[i]).collect();
            let pos: f64 = excess.iter().filter(|&&e| e > 0.0).sum();
            let worst = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            pos.max(worst) <= self.xi + tol
        }
    }
}

/// QF-JD constraints for quantization noise `q`:
/// `I_k = C(P_k(M-N)/d_dk^alpha + P_k / (d_rk^alpha/N + Q_k))`,
/// `xi = log2 lambda_s - sum_k C(d_rk^alpha / (N Q_k))`.
pub fn qf_jd_constraints(gains: &LinkGains, q: &[QuantNoise]) -> Result<RateConstraintSet> {
    check_quant(q, gains.k())?;
    let k = gains.k();
    let mut i_caps = Vec::with_capacity(k);
    let mut penalty = 0.0;
    for i in 0..k {
        let s = gains.zf_noise_r[i];
        let relayed = match q[i] {
            QuantNoise::Variance(v) => gains.power[i] / (s + v),
            QuantNoise::Unrelayed => 0.0,
        };
        i_caps.push(cap(gains.snr_d[i] + relayed));
        penalty += q[i].cap_over(s);
    }
    Ok(RateConstraintSet {
        i_caps,
        xi: gains.relay_bits() - penalty,
        direct: gains.direct.clone(),
    })
}

/// The five two-UE bounds written out directly from the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoUeBounds {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub zeta: f64,
}

/// Two-UE region evaluated straight from the physical parameters, without
/// going through [`LinkGains`]. Used as a reference for the K-UE code path.
pub fn two_ue_bounds(s: &Scenario, q: [QuantNoise; 2]) -> Result<TwoUeBounds> {
    if s.k() != 2 {
        return Err(Error::Unsupported(format!(
            "two-UE bounds need K = 2, got {}",
            s.k()
        )));
    }
    let c = |x: f64| (1.0 + x).log2();
    let (m, n, alpha) = (s.m as f64, s.n as f64, s.alpha);
    let direct = |k: usize| c(s.p[k] * (m - n) / s.d_d[k].powf(alpha));
    let relayed = |k: usize| match q[k] {
        QuantNoise::Variance(v) => s.p[k] / (s.d_r[k].powf(alpha) / n + v),
        QuantNoise::Unrelayed => 0.0,
    };
    let penalty = |k: usize| match q[k] {
        QuantNoise::Variance(v) => c(s.d_r[k].powf(alpha) / (n * v)),
        QuantNoise::Unrelayed => 0.0,
    };
    let i1 = c(s.p[0] * (m - n) / s.d_d[0].powf(alpha) + relayed(0));
    let i3 = c(s.p[1] * (m - n) / s.d_d[1].powf(alpha) + relayed(1));
    let zeta = n * c(s.p_r * (m - n) / (n * s.d_dr.powf(alpha))) - penalty(0) - penalty(1);
    Ok(TwoUeBounds {
        i1,
        i2: direct(0) + zeta,
        i3,
        i4: direct(1) + zeta,
        i5: direct(0) + direct(1) + zeta,
        zeta,
    })
}

/// Closed-form two-UE weighted-sum maximum by case analysis on
/// `I1 <= I2` and `I1 + I3 <= I5` (roles swapped when `mu1 < 0.5`).
/// Returns the case number (1..=4) and the value.
pub fn four_case_value(bounds: &TwoUeBounds, mu1: f64) -> (u8, f64) {
    let mu2 = 1.0 - mu1;
    // After a swap UE 2 plays UE 1: (I1, I2) <-> (I3, I4).
    let (hi, lo, first, first_j, other) = if mu1 >= 0.5 {
        (mu1, mu2, bounds.i1, bounds.i2, bounds.i3)
    } else {
        (mu2, mu1, bounds.i3, bounds.i4, bounds.i1)
    };
    let i5 = bounds.i5;
    let sum_ok = first + other <= i5;
    if first <= first_j {
        if sum_ok {
            (1, hi * first + lo * other)
        } else {
            (4, (hi - lo) * first + lo * i5)
        }
    } else if sum_ok {
        (3, (hi - lo) * first_j + lo * (first + other))
    } else {
        (2, (hi - lo) * first_j + lo * i5)
    }
}

/// A rate vector together with its weighted sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub rates: Vec<f64>,
    pub value: f64,
}

/// Largest K solved as an explicit LP; above this the greedy vertex is used.
pub const LP_MAX_K: usize = 12;
/// Hard cap on K for building all `2^K` subset rows.
pub const LP_HARD_CAP_K: usize = 16;

/// Maximizes `sum mu_k R_k` over the QF-JD region. Among optimal points the
/// one that is lexicographically largest in priority order (decreasing
/// weight, ties by index) is returned, so zero-weight UEs still get the
/// largest rate left over.
pub fn max_weighted_sum(c: &RateConstraintSet, mu: &Weights) -> Result<RatePoint> {
    if c.k() <= LP_MAX_K {
        max_weighted_sum_lp(c, mu)
    } else {
        max_weighted_sum_greedy(c, mu)
    }
}

/// Explicit LP over K variables and `K + 2^K - 1` constraints.
pub fn max_weighted_sum_lp(c: &RateConstraintSet, mu: &Weights) -> Result<RatePoint> {
    let k = c.k();
    mu.check_len(k)?;
    if k > LP_HARD_CAP_K {
        return Err(Error::Unsupported(format!(
            "explicit LP limited to K <= {LP_HARD_CAP_K}, got {k}"
        )));
    }
    let mut a = Vec::with_capacity(k + (1 << k) - 1);
    let mut b = Vec::with_capacity(a.capacity());
    for i in 0..k {
        let mut row = vec![0.0; k];
        row[i] = 1.0;
        a.push(row);
        b.push(c.i_caps[i]);
    }
    for mask in 1u64..1 << k {
        a.push((0..k).map(|i| (mask >> i & 1) as f64).collect());
        b.push(c.j_subset(mask));
    }
    let mut objectives = vec![mu.as_slice().to_vec()];
    for i in mu.priority_order() {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        objectives.push(e);
    }
    let sol = lp::maximize_lex(&a, &b, &objectives)?;
    let value = weighted(mu, &sol.x);
    Ok(RatePoint {
        rates: sol.x,
        value,
    })
}

/// Greedy vertex of the region seen as a polymatroid: fill UEs in priority
/// order, each taking `h(S_i) - h(S_{i-1})`, where `h(S)` is the largest
/// achievable sum rate of subset `S`.
pub fn max_weighted_sum_greedy(c: &RateConstraintSet, mu: &Weights) -> Result<RatePoint> {
    let k = c.k();
    mu.check_len(k)?;
    if let Some(i) = (0..k).find(|&i| c.j(i) < 0.0) {
        return Err(Error::Infeasible(format!("J_{} = {} < 0", i + 1, c.j(i))));
    }
    let mut rates = vec![0.0; k];
    let (mut cap_sum, mut direct_sum, mut split_sum) = (0.0, 0.0, 0.0);
    let mut prev = 0.0;
    for i in mu.priority_order() {
        cap_sum += c.i_caps[i];
        direct_sum += c.direct[i];
        split_sum += c.i_caps[i].min(c.j(i));
        let h = if c.xi >= 0.0 {
            cap_sum.min(c.xi + direct_sum)
        } else {
            split_sum
        };
        rates[i] = h - prev;
        prev = h;
    }
    let value = weighted(mu, &rates);
    Ok(RatePoint { rates, value })
}

fn weighted(mu: &Weights, rates: &[f64]) -> f64 {
    mu.as_slice().iter().zip(rates).map(|(m, r)| m * r).sum()
}

/// QF-WZTD evaluation for given phase durations and phase powers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WztdRates {
    /// Per-UE rate caps `I_k` (same as QF-JD).
    pub caps: Vec<f64>,
    /// Bin-index rates `R_bk`.
    pub rb: Vec<f64>,
    /// Right-hand side `beta_k N C(rho_k (M-N) / (beta_k N d_dr^alpha))`.
    pub phase_capacity: Vec<f64>,
    pub feasible: Vec<bool>,
}

impl WztdRates {
    pub fn all_feasible(&self) -> bool {
        self.feasible.iter().all(|&f| f)
    }

    /// `phase_capacity - rb` per UE; negative means infeasible.
    pub fn slack(&self) -> Vec<f64> {
        self.phase_capacity
            .iter()
            .zip(&self.rb)
            .map(|(c, r)| c - r)
            .collect()
    }

    /// Weighted sum of the caps, or `None` if some bin rate does not fit.
    pub fn value(&self, mu: &Weights) -> Option<f64> {
        self.all_feasible().then(|| weighted(mu, &self.caps))
    }
}

/// Relative slack allowed when comparing `R_bk` to its phase capacity.
pub const WZTD_FEASIBILITY_TOL: f64 = 1e-9;

pub fn qf_wztd_rates(
    gains: &LinkGains,
    q: &[QuantNoise],
    beta: &[f64],
    rho: &[f64],
) -> Result<WztdRates> {
    let k = gains.k();
    if beta.len() != k || rho.len() != k {
        return Err(Error::InvalidPhases(format!(
            "expected {k} durations and powers, got {} and {}",
            beta.len(),
            rho.len()
        )));
    }
    if beta.iter().any(|&x| !(0.0..=1.0).contains(&x)) || rho.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidPhases("negative duration or power".into()));
    }
    let beta_sum: f64 = beta.iter().sum();
    let rho_sum: f64 = rho.iter().sum();
    if (beta_sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidPhases(format!("durations sum to {beta_sum}")));
    }
    if (rho_sum - gains.p_r).abs() > 1e-9 * gains.p_r {
        return Err(Error::InvalidPhases(format!(
            "phase powers sum to {rho_sum}, SCBS power is {}",
            gains.p_r
        )));
    }
    let caps = qf_jd_constraints(gains, q)?.i_caps;
    let rb = bin_rates(gains, q)?;
    let phase_capacity: Vec<f64> = (0..k)
        .map(|i| gains.phase_capacity(beta[i], rho[i]))
        .collect();
    let feasible = rb
        .iter()
        .zip(&phase_capacity)
        .map(|(&r, &c)| r <= c + WZTD_FEASIBILITY_TOL * c.max(1.0))
        .collect();
    Ok(WztdRates {
        caps,
        rb,
        phase_capacity,
        feasible,
    })
}

/// One traced boundary point.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryPoint {
    pub mu: Weights,
    pub q: Vec<QuantNoise>,
    pub point: RatePoint,
}

/// Traces the QF region boundary: for each weight vector, optimize the
/// quantization and then the rates. Output order follows `mu_grid`.
pub fn boundary_sweep(s: &Scenario, mu_grid: &[Weights]) -> Result<Vec<BoundaryPoint>> {
    let gains = s.link_gains();
    mu_grid
        .par_iter()
        .map(|mu| {
            let alloc = crate::quantopt::optimize(s, mu)?;
            let c = qf_jd_constraints(&gains, &alloc.q)?;
            let point = max_weighted_sum(&c, mu)?;
            Ok(BoundaryPoint {
                mu: mu.clone(),
                q: alloc.q,
                point,
            })
        })
        .collect()
}

/// Direct transmission only: every stream unrelayed.
pub fn direct_point(s: &Scenario, mu: &Weights) -> Result<BoundaryPoint> {
    let gains = s.link_gains();
    let q = vec![QuantNoise::Unrelayed; s.k()];
    let point = max_weighted_sum(&qf_jd_constraints(&gains, &q)?, mu)?;
    Ok(BoundaryPoint {
        mu: mu.clone(),
        q,
        point,
    })
}

pub const REGION_CSV_VERSION: &str = "# qfhet region v1";

/// CSV with a version comment, a header, then one row per point.
/// `scheme` is `qf` or `direct`; an unrelayed `Q` prints as `inf`.
pub fn region_csv(k: usize, qf: &[BoundaryPoint], direct: &[BoundaryPoint]) -> String {
    let mut out = String::new();
    out.push_str(REGION_CSV_VERSION);
    out.push('\n');
    let mut header = vec!["scheme".to_string()];
    header.extend((1..=k).map(|i| format!("mu_{i}")));
    header.extend((1..=k).map(|i| format!("Q_{i}")));
    header.extend((1..=k).map(|i| format!("R_{i}")));
    header.push("value".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for (scheme, points) in [("qf", qf), ("direct", direct)] {
        for p in points {
            let mut row = vec![scheme.to_string()];
            row.extend(p.mu.as_slice().iter().map(|m| format!("{m:.6}")));
            row.extend(p.q.iter().map(|q| q.to_string()));
            row.extend(p.point.rates.iter().map(|r| format!("{r:.12e}")));
            row.push(format!("{:.12e}", p.point.value));
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}
