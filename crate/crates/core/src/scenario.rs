//! Network geometry, powers, and the large-scale link constants derived
//! from them.
//!
//! All powers are noise-normalized (unit noise variance at every receive
//! antenna), so they behave as linear SNRs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::nats_to_bits;

/// Physical description of one small cell and its UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// MCBS antenna count.
    pub m: usize,
    /// SCBS antenna count.
    pub n: usize,
    pub alpha: f64,
    /// UE to MCBS distances (m).
    pub d_d: Vec<f64>,
    /// UE to SCBS distances (m).
    pub d_r: Vec<f64>,
    /// SCBS to MCBS distance (m).
    pub d_dr: f64,
    /// Per-UE transmit power.
    pub p: Vec<f64>,
    /// SCBS transmit power.
    pub p_r: f64,
}

/// On-disk scenario form. `P` is either explicit per-UE powers (with `P_r`)
/// or an SNR anchor for UE 1 plus the SCBS/UE power ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub d_d: Vec<f64>,
    pub d_r: Vec<f64>,
    pub d_dr: f64,
    #[serde(rename = "P")]
    pub power: PowerSpec,
    #[serde(rename = "P_r", default, skip_serializing_if = "Option::is_none")]
    pub p_r: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PowerSpec {
    Explicit(Vec<f64>),
    Snr { snr_db: f64, pr_ratio: f64 },
}

impl Scenario {
    /// Reference two-UE layout: 500/50 antennas,
    /// alpha = 2.7, d_d = (105, 110), d_dr = 100, SNR 1 dB, P_r = 5P.
    pub fn two_ue_reference(d_r: [f64; 2]) -> Self {
        Self::from_snr(
            500,
            50,
            2.7,
            vec![105.0, 110.0],
            d_r.to_vec(),
            100.0,
            1.0,
            5.0,
        )
        .expect("reference scenario is valid")
    }

    /// Three-UE layout: d_d = (105, 110, 120), d_r = (30, 40, 50).
    pub fn three_ue_reference() -> Self {
        Self::from_snr(
            500,
            50,
            2.7,
            vec![105.0, 110.0, 120.0],
            vec![30.0, 40.0, 50.0],
            100.0,
            1.0,
            5.0,
        )
        .expect("reference scenario is valid")
    }

    /// Equal UE powers set from the UE-1 received SNR; `P_r = pr_ratio * P`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_snr(
        m: usize,
        n: usize,
        alpha: f64,
        d_d: Vec<f64>,
        d_r: Vec<f64>,
        d_dr: f64,
        snr_db: f64,
        pr_ratio: f64,
    ) -> Result<Self> {
        if !(pr_ratio > 0.0) {
            return Err(Error::NonPositive("pr_ratio".into()));
        }
        let k = d_d.len();
        let s = Scenario {
            m,
            n,
            alpha,
            d_d,
            d_r,
            d_dr,
            p: vec![1.0; k],
            p_r: pr_ratio,
        }
        .validate()?;
        Ok(s.set_snr(snr_db))
    }

    pub fn k(&self) -> usize {
        self.d_d.len()
    }

    /// Returns the scenario unchanged iff every invariant holds.
    pub fn validate(self) -> Result<Self> {
        let k = self.d_d.len();
        for (field, len) in [("d_r", self.d_r.len()), ("P", self.p.len())] {
            if len != k {
                return Err(Error::DimensionMismatch {
                    field,
                    got: len,
                    expected: k,
                });
            }
        }
        if !(self.m > self.n && self.n > k && k >= 1) {
            return Err(Error::AntennaOrdering {
                m: self.m,
                n: self.n,
                k,
            });
        }
        let positive = |name: String, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::NonPositive(format!("{name} = {v}")))
            }
        };
        positive("alpha".into(), self.alpha)?;
        positive("d_dr".into(), self.d_dr)?;
        positive("P_r".into(), self.p_r)?;
        for i in 0..k {
            positive(format!("d_d[{i}]"), self.d_d[i])?;
            positive(format!("d_r[{i}]"), self.d_r[i])?;
            positive(format!("P[{i}]"), self.p[i])?;
        }
        Ok(self)
    }

    /// Received SNR of UE 1 at the MCBS after ZF, in dB.
    pub fn snr_of(&self) -> f64 {
        10.0 * (self.p[0] * (self.m - self.n) as f64 / self.d_d[0].powf(self.alpha)).log10()
    }

    /// Rescales every UE power and the SCBS power by one common factor so
    /// that UE 1's received SNR at the MCBS equals `snr_db`.
    pub fn set_snr(mut self, snr_db: f64) -> Self {
        let factor = 10f64.powf((snr_db - self.snr_of()) / 10.0);
        for p in &mut self.p {
            *p *= factor;
        }
        self.p_r *= factor;
        self
    }

    pub fn link_gains(&self) -> LinkGains {
        LinkGains::new(self)
    }

    /// Copy with only the listed UEs, in the given order.
    pub fn subset(&self, ues: &[usize]) -> Result<Self> {
        Scenario {
            m: self.m,
            n: self.n,
            alpha: self.alpha,
            d_d: ues.iter().map(|&i| self.d_d[i]).collect(),
            d_r: ues.iter().map(|&i| self.d_r[i]).collect(),
            d_dr: self.d_dr,
            p: ues.iter().map(|&i| self.p[i]).collect(),
            p_r: self.p_r,
        }
        .validate()
    }

    /// Random but well-conditioned scenario with `k` UEs, used by the
    /// randomized checks.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Self {
        let n = rng.random_range((k + 2).max(8)..=64);
        let m = rng.random_range(n + k + 1..=600);
        let alpha = rng.random_range(2.0..4.0);
        let d_d: Vec<f64> = (0..k).map(|_| rng.random_range(80.0..150.0)).collect();
        let d_r: Vec<f64> = (0..k).map(|_| rng.random_range(10.0..100.0)).collect();
        let d_dr = rng.random_range(80.0..150.0);
        let p: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
        let p_r = rng.random_range(1.0..10.0);
        let snr_db = rng.random_range(-10.0..20.0);
        Scenario {
            m,
            n,
            alpha,
            d_d,
            d_r,
            d_dr,
            p,
            p_r,
        }
        .validate()
        .expect("random scenario is valid by construction")
        .set_snr(snr_db)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        Self::try_from(file)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            k: self.k(),
            m: self.m,
            n: self.n,
            alpha: self.alpha,
            d_d: self.d_d.clone(),
            d_r: self.d_r.clone(),
            d_dr: self.d_dr,
            power: PowerSpec::Explicit(self.p.clone()),
            p_r: Some(self.p_r),
        }
    }
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        if f.d_d.len() != f.k {
            return Err(Error::DimensionMismatch {
                field: "d_d",
                got: f.d_d.len(),
                expected: f.k,
            });
        }
        match f.power {
            PowerSpec::Explicit(p) => {
                let p_r = f
                    .p_r
                    .ok_or_else(|| Error::InvalidArgument("explicit P requires P_r".into()))?;
                Scenario {
                    m: f.m,
                    n: f.n,
                    alpha: f.alpha,
                    d_d: f.d_d,
                    d_r: f.d_r,
                    d_dr: f.d_dr,
                    p,
                    p_r,
                }
                .validate()
            }
            PowerSpec::Snr { snr_db, pr_ratio } => {
                if f.d_r.len() != f.k {
                    return Err(Error::DimensionMismatch {
                        field: "d_r",
                        got: f.d_r.len(),
                        expected: f.k,
                    });
                }
                Scenario::from_snr(f.m, f.n, f.alpha, f.d_d, f.d_r, f.d_dr, snr_db, pr_ratio)
            }
        }
    }
}

/// Per-UE large-scale constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkGains {
    /// `a_k = 1 + P_k (M-N) / d_dk^alpha`
    pub a: Vec<f64>,
    /// `b_k = P_k N / d_rk^alpha`
    pub b: Vec<f64>,
    /// Direct-link SNR `a_k - 1`, kept separately for precision.
    pub snr_d: Vec<f64>,
    /// Direct-link rate `log2(a_k)` in bits.
    pub direct: Vec<f64>,
    /// Effective ZF noise at the SCBS, `d_rk^alpha / N`.
    pub zf_noise_r: Vec<f64>,
    pub power: Vec<f64>,
    /// SCBS antenna count.
    pub n: usize,
    pub p_r: f64,
    /// Per-antenna relay link gain `(M-N) / (N d_dr^alpha)`.
    pub relay_gain: f64,
    /// `ln lambda_s = N ln(1 + P_r (M-N) / (N d_dr^alpha))`.
    pub log_lambda_s: f64,
}

impl LinkGains {
    pub fn new(s: &Scenario) -> Self {
        let mn = (s.m - s.n) as f64;
        let nf = s.n as f64;
        let k = s.k();
        let mut a = Vec::with_capacity(k);
        let mut b = Vec::with_capacity(k);
        let mut snr = Vec::with_capacity(k);
        let mut direct = Vec::with_capacity(k);
        let mut zf_noise_r = Vec::with_capacity(k);
        for i in 0..k {
            let snr_d = s.p[i] * mn / s.d_d[i].powf(s.alpha);
            a.push(1.0 + snr_d);
            snr.push(snr_d);
            direct.push(crate::numeric::cap(snr_d));
            let dr = s.d_r[i].powf(s.alpha);
            b.push(s.p[i] * nf / dr);
            zf_noise_r.push(dr / nf);
        }
        let relay_gain = mn / (nf * s.d_dr.powf(s.alpha));
        LinkGains {
            a,
            b,
            snr_d: snr,
            direct,
            zf_noise_r,
            power: s.p.clone(),
            n: s.n,
            p_r: s.p_r,
            relay_gain,
            log_lambda_s: nf * (s.p_r * relay_gain).ln_1p(),
        }
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    /// Relay link budget in bits, `log2 lambda_s`.
    pub fn relay_bits(&self) -> f64 {
        nats_to_bits(self.log_lambda_s)
    }

    /// Bits a TD phase of fraction `beta` carrying power `rho` can deliver:
    /// `beta N C(rho (M-N) / (beta N d_dr^alpha))`, zero for an empty phase.
    pub fn phase_capacity(&self, beta: f64, rho: f64) -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        beta * self.n as f64 * crate::numeric::cap(rho * self.relay_gain / beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Scenario {
        Scenario::two_ue_reference([25.0, 30.0])
    }

    #[test]
    fn reference_scenario_is_accepted() {
        let s = reference();
        assert_eq!((s.m, s.n, s.k()), (500, 50, 2));
        assert!(s.clone().validate().is_ok());
        assert!((s.p_r / s.p[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn antenna_ordering_rejected() {
        let mut s = reference();
        s.m = 50;
        assert!(matches!(s.validate(), Err(Error::AntennaOrdering { .. })));
        let mut s = reference();
        s.n = 2;
        assert!(matches!(s.validate(), Err(Error::AntennaOrdering { .. })));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut s = reference();
        s.d_r = vec![25.0];
        assert!(matches!(
            s.validate(),
            Err(Error::DimensionMismatch { field: "d_r", .. })
        ));
    }

    #[test]
    fn non_positive_rejected() {
        let mut s = reference();
        s.p[1] = 0.0;
        assert!(matches!(s.validate(), Err(Error::NonPositive(_))));
        let mut s = reference();
        s.alpha = -1.0;
        assert!(matches!(s.validate(), Err(Error::NonPositive(_))));
    }

    #[test]
    fn snr_anchor_sets_first_power() {
        let s = reference();
        let want = 10f64.powf(0.1) * 105f64.powf(2.7) / 450.0;
        assert!((s.p[0] - want).abs() <= 1e-9 * want);
        let g = s.link_gains();
        // a_1 = 1 + 10^{0.1}
        assert!((g.a[0] - (1.0 + 10f64.powf(0.1))).abs() < 1e-12);
        assert!((g.a[0] - 2.2589).abs() < 1e-4);
    }

    #[test]
    fn snr_round_trip() {
        let s = reference();
        let back = s.clone().set_snr(s.snr_of());
        for (x, y) in s.p.iter().zip(&back.p) {
            assert!((x - y).abs() <= 1e-12 * x);
        }
        assert!((s.p_r - back.p_r).abs() <= 1e-12 * s.p_r);
    }

    #[test]
    fn doubling_distances_keeps_a1_at_fixed_snr() {
        let s = reference();
        let mut far = s.clone();
        for d in far.d_d.iter_mut().chain(far.d_r.iter_mut()) {
            *d *= 2.0;
        }
        far.d_dr *= 2.0;
        let far = far.set_snr(1.0);
        assert!((s.link_gains().a[0] - far.link_gains().a[0]).abs() < 1e-12);
    }

    #[test]
    fn zero_power_limit() {
        let mut s = reference();
        s.p = vec![1e-300, 1e-300];
        let g = s.link_gains();
        assert!((g.a[0] - 1.0).abs() < 1e-15);
        assert!(g.direct.iter().all(|&d| d.abs() < 1e-15));
    }

    #[test]
    fn symmetric_ues_have_equal_gains() {
        let s = Scenario::from_snr(
            500,
            50,
            2.7,
            vec![105.0, 105.0],
            vec![30.0, 30.0],
            100.0,
            1.0,
            5.0,
        )
        .unwrap();
        let g = s.link_gains();
        assert_eq!(g.a[0], g.a[1]);
        assert_eq!(g.b[0], g.b[1]);
    }

    #[test]
    fn log_lambda_s_additive_in_n() {
        // hold P_r (M - N) / (N d^alpha) fixed while doubling N
        let s = reference();
        let g1 = s.link_gains();
        let mut s2 = s.clone();
        s2.n = 100;
        s2.m = 1000;
        // (M-N)/N: 450/50 = 9 = 900/100
        let g2 = s2.validate().unwrap().link_gains();
        assert!((g2.log_lambda_s - 2.0 * g1.log_lambda_s).abs() < 1e-12 * g2.log_lambda_s);
    }

    #[test]
    fn direct_rate_monotone() {
        let s = reference();
        let base = s.link_gains().direct[0];
        let mut farther = s.clone();
        farther.d_d[0] *= 1.1;
        assert!(farther.link_gains().direct[0] < base);
        let mut louder = s.clone();
        louder.p[0] *= 1.1;
        assert!(louder.link_gains().direct[0] > base);
        let mut more = s.clone();
        more.m += 10;
        assert!(more.link_gains().direct[0] > base);
    }

    #[test]
    fn json_forms() {
        let snr = r#"{"K":2,"M":500,"N":50,"alpha":2.7,"d_d":[105,110],"d_r":[25,30],"d_dr":100,"P":{"snr_db":1.0,"pr_ratio":5.0}}"#;
        let s = Scenario::from_json(snr).unwrap();
        assert_eq!(s, reference());
        let text = serde_json::to_string(&s.to_file()).unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, s);

        let missing_pr = r#"{"K":1,"M":10,"N":5,"alpha":2,"d_d":[1],"d_r":[1],"d_dr":1,"P":[1.0]}"#;
        assert!(Scenario::from_json(missing_pr).is_err());
        let bad_len = r#"{"K":2,"M":500,"N":50,"alpha":2.7,"d_d":[105,110],"d_r":[25],"d_dr":100,"P":{"snr_db":1.0,"pr_ratio":5.0}}"#;
        assert!(matches!(
            Scenario::from_json(bad_len),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
