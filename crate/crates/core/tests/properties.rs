use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qf_hetnet::complexity::{codebook_log2, Scheme};
use qf_hetnet::quantopt::{
    descartes_certificate, kkt_residuals, optimize, optimize_k_ue, quant_noise_for,
    waterfill_bisection,
};
use qf_hetnet::region::{
    bin_rates, four_case_value, max_weighted_sum, max_weighted_sum_greedy, max_weighted_sum_lp,
    qf_jd_constraints, quant_rates, two_ue_bounds, QuantNoise, Weights,
};
use qf_hetnet::scenario::Scenario;
use qf_hetnet::wztd::{allocate_phases, equivalence_report};
use qf_hetnet::zf::{sample_zf_noise_gains, Side};

fn c(x: f64) -> f64 {
    (1.0 + x).log2()
}

fn scenario(seed: u64, k: usize) -> Scenario {
    Scenario::random(&mut ChaCha8Rng::seed_from_u64(seed), k)
}

fn weights(seed: u64, k: usize) -> Weights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.02..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut mu: Vec<f64> = raw.iter().map(|x| x / sum).collect();
    let tail: f64 = mu[1..].iter().sum();
    mu[0] = 1.0 - tail;
    Weights::new(mu).unwrap()
}

fn variances(seed: u64, k: usize) -> Vec<QuantNoise> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    (0..k)
        .map(|_| {
            if rng.random_bool(0.15) {
                QuantNoise::Unrelayed
            } else {
                QuantNoise::Variance(10f64.powf(rng.random_range(-3.0..4.0)))
            }
        })
        .collect()
}

/// `I_k` and `xi` straight from the scenario fields.
fn reference_constraints(s: &Scenario, q: &[QuantNoise]) -> (Vec<f64>, f64, Vec<f64>) {
    let (m, n, a) = (s.m as f64, s.n as f64, s.alpha);
    let direct: Vec<f64> = (0..s.k())
        .map(|i| c(s.p[i] * (m - n) / s.d_d[i].powf(a)))
        .collect();
    let mut i_caps = Vec::new();
    let mut penalty = 0.0;
    for i in 0..s.k() {
        let zf = s.d_r[i].powf(a) / n;
        let snr = s.p[i] * (m - n) / s.d_d[i].powf(a);
        match q[i] {
            QuantNoise::Variance(v) => {
                i_caps.push(c(snr + s.p[i] / (zf + v)));
                penalty += c(zf / v);
            }
            QuantNoise::Unrelayed => i_caps.push(direct[i]),
        }
    }
    let relay = n * c(s.p_r * (m - n) / (n * s.d_dr.powf(a)));
    (i_caps, relay - penalty, direct)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn constraints_match_direct_formulas(seed in any::<u64>(), k in 1usize..6) {
        let s = scenario(seed, k);
        let q = variances(seed, k);
        let got = qf_jd_constraints(&s.link_gains(), &q).unwrap();
        let (i_caps, xi, direct) = reference_constraints(&s, &q);
        for i in 0..k {
            prop_assert!((got.i_caps[i] - i_caps[i]).abs() <= 1e-12 * i_caps[i].max(1.0));
        }
        prop_assert!((got.xi - xi).abs() <= 1e-12 * xi.abs().max(1.0) * k as f64);
        for mask in 1u64..(1 << k) {
            let want = xi + (0..k).filter(|&i| mask >> i & 1 == 1).map(|i| direct[i]).sum::<f64>();
            prop_assert!((got.j_subset(mask) - want).abs() <= 1e-11 * want.abs().max(1.0));
        }
    }

    #[test]
    fn i_decreasing_xi_increasing_in_q(seed in any::<u64>(), k in 1usize..5, ue in 0usize..5, f in 1.01f64..50.0) {
        let ue = ue % k;
        let s = scenario(seed, k);
        let g = s.link_gains();
        let mut q = variances(seed, k);
        let base = q[ue].as_f64().min(1e3);
        q[ue] = QuantNoise::Variance(base);
        let lo = qf_jd_constraints(&g, &q).unwrap();
        q[ue] = QuantNoise::Variance(base * f);
        let hi = qf_jd_constraints(&g, &q).unwrap();
        prop_assert!(hi.i_caps[ue] < lo.i_caps[ue]);
        prop_assert!(hi.xi > lo.xi);
        q[ue] = QuantNoise::Unrelayed;
        let inf = qf_jd_constraints(&g, &q).unwrap();
        prop_assert!(inf.i_caps[ue] < hi.i_caps[ue] && inf.xi > hi.xi);
    }

    #[test]
    fn single_user_bounds_are_redundant_pairs(seed in any::<u64>()) {
        let s = scenario(seed, 2);
        let q = variances(seed, 2);
        let b = two_ue_bounds(&s, [q[0], q[1]]).unwrap();
        let tol = 1e-12 * b.i5.abs().max(1.0);
        prop_assert!(b.i1 + b.i4 >= b.i5 - tol);
        prop_assert!(b.i2 + b.i3 >= b.i5 - tol);
        if q[0].is_relayed() {
            prop_assert!(b.i1 + b.i4 > b.i5);
        }
    }

    #[test]
    fn bin_rate_below_quantization_rate(seed in any::<u64>(), k in 1usize..6) {
        let s = scenario(seed, k);
        let q = variances(seed, k);
        let g = s.link_gains();
        let rq = quant_rates(&g, &q).unwrap();
        let rb = bin_rates(&g, &q).unwrap();
        for i in 0..k {
            prop_assert!(rb[i] >= 0.0 && rb[i] <= rq[i] + 1e-12);
        }
    }

    #[test]
    fn region_dominates_direct(seed in any::<u64>(), k in 1usize..6) {
        let s = scenario(seed, k);
        let g = s.link_gains();
        let q = variances(seed, k);
        let cs = qf_jd_constraints(&g, &q).unwrap();
        prop_assume!(cs.xi >= 0.0);
        let mu = weights(seed, k);
        let direct: f64 = (0..k).map(|i| mu[i] * g.direct[i]).sum();
        prop_assert!(max_weighted_sum(&cs, &mu).unwrap().value >= direct - 1e-12);
    }

    #[test]
    fn greedy_matches_lp(seed in any::<u64>(), k in 1usize..9) {
        let s = scenario(seed, k);
        let cs = qf_jd_constraints(&s.link_gains(), &variances(seed, k)).unwrap();
        prop_assume!(cs.xi >= 0.0);
        let mu = weights(seed, k);
        let lp = max_weighted_sum_lp(&cs, &mu).unwrap();
        let gr = max_weighted_sum_greedy(&cs, &mu).unwrap();
        prop_assert!((lp.value - gr.value).abs() <= 1e-9 * lp.value.abs().max(1.0));
        prop_assert!(cs.contains(&gr.rates, 1e-9) && cs.contains(&lp.rates, 1e-9));
    }

    #[test]
    fn budget_and_sum_identity(seed in any::<u64>(), k in 1usize..9) {
        let s = scenario(seed, k);
        let g = s.link_gains();
        let mu = weights(seed, k);
        let a = optimize(&s, &mu).unwrap();
        prop_assert!(a.budget_residual(&g) <= 1e-9);
        let cs = qf_jd_constraints(&g, &a.q).unwrap();
        let sum: f64 = cs.i_caps.iter().sum();
        let full = cs.j_subset((1u64 << k) - 1);
        prop_assert!((sum - full).abs() <= 1e-9 * full.max(1.0));
    }

    #[test]
    fn solvers_agree_and_satisfy_kkt(seed in any::<u64>(), k in 2usize..9) {
        let s = scenario(seed, k);
        let g = s.link_gains();
        let mu = weights(seed, k);
        let a = optimize_k_ue(&s, &mu).unwrap();
        let b = waterfill_bisection(&g, &mu).unwrap();
        for i in 0..k {
            prop_assert!((a.log_lambda[i] - b.log_lambda[i]).abs() <= 1e-8);
        }
        prop_assert!(kkt_residuals(&g, &mu, &a).max_residual() <= 1e-8);
        prop_assert!(descartes_certificate(&g, &mu).holds());
        prop_assert_eq!(descartes_certificate(&g, &mu).upsilon, a.upsilon);
    }

    #[test]
    fn share_grows_with_own_weight(seed in any::<u64>(), k in 2usize..7, ue in 0usize..7, bump in 0.01f64..0.5) {
        let ue = ue % k;
        let s = scenario(seed, k);
        let mu = weights(seed, k);
        // move weight onto `ue`, shrinking the others proportionally
        let target = mu[ue] + bump * (1.0 - mu[ue]);
        let scale = (1.0 - target) / (1.0 - mu[ue]);
        let mut v: Vec<f64> = mu.as_slice().iter().map(|m| m * scale).collect();
        v[ue] = target;
        let fix: f64 = v.iter().enumerate().filter(|&(i, _)| i != ue).map(|(_, x)| x).sum();
        v[ue] = 1.0 - fix;
        let before = optimize(&s, &mu).unwrap().log_lambda[ue];
        let after = optimize(&s, &Weights::new(v).unwrap()).unwrap().log_lambda[ue];
        prop_assert!(after >= before - 1e-9 * before.max(1.0));
    }

    #[test]
    fn phase_split_reproduces_shares(seed in any::<u64>(), k in 1usize..7) {
        let s = scenario(seed, k);
        let g = s.link_gains();
        let mu = weights(seed, k);
        let a = optimize(&s, &mu).unwrap();
        let p = allocate_phases(&g, &a);
        let beta_sum: f64 = p.beta.iter().sum();
        prop_assert!((beta_sum - 1.0).abs() <= 1e-9);
        for i in 0..k {
            prop_assert!((p.log_lambda_sk[i] - a.log_lambda[i]).abs() <= 1e-9 * a.log_lambda[i].max(1.0));
            if p.beta[i] > 0.0 {
                prop_assert!((p.rho[i] / p.beta[i] - s.p_r).abs() <= 1e-12 * s.p_r);
            } else {
                prop_assert_eq!(p.rho[i], 0.0);
            }
        }
        let r = equivalence_report(&s, &mu).unwrap();
        prop_assert!(r.value_gap() <= 1e-9 && r.binding_gap() <= 1e-9);
    }

    #[test]
    fn share_to_variance_inverse(seed in any::<u64>(), frac in 1e-6f64..1.0) {
        let s = scenario(seed, 2);
        let g = s.link_gains();
        let l = frac * g.log_lambda_s;
        let q = quant_noise_for(&g, 0, l);
        let rb = bin_rates(&g, &[q, QuantNoise::Unrelayed]).unwrap()[0];
        prop_assert!((rb - l / std::f64::consts::LN_2).abs() <= 1e-9 * rb.max(1e-3));
    }

    #[test]
    fn codebook_ordering(k in 1usize..8, n in 2.0f64..200.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rb: Vec<f64> = (0..k).map(|_| rng.random_range(1.0 / n..3.0)).collect();
        let rq: Vec<f64> = rb.iter().map(|b| b + rng.random_range(0.0..2.0)).collect();
        let v = |sch| codebook_log2(sch, n, &rq, &rb).unwrap();
        let (wztd, wz, jd, td) = (v(Scheme::Wztd), v(Scheme::Wz), v(Scheme::Jd), v(Scheme::Td));
        let eps = 1e-9 * jd.max(1.0);
        prop_assert!(wztd <= wz + eps, "wztd {wztd} wz {wz}");
        prop_assert!(wz <= jd + eps);
        prop_assert!(wztd <= td + eps);
        for x in [wztd, wz, jd, td] {
            prop_assert!(x.is_finite() && x >= 0.0);
        }
    }

    #[test]
    fn direct_rate_monotone(seed in any::<u64>(), f in 1.01f64..2.0) {
        let s = scenario(seed, 2);
        let base = s.link_gains().direct[0];
        let mut far = s.clone();
        far.d_d[0] *= f;
        prop_assert!(far.link_gains().direct[0] < base);
        let mut loud = s.clone();
        loud.p[0] *= f;
        prop_assert!(loud.link_gains().direct[0] > base);
        let mut big = s.clone();
        big.m += 50;
        prop_assert!(big.link_gains().direct[0] > base);
    }
}

#[test]
fn relay_budget_additive_in_n() {
    let s = Scenario::two_ue_reference([25.0, 30.0]);
    let mut d = s.clone();
    d.n *= 2;
    // keep P_r (M - N) / N fixed
    d.p_r = s.p_r * ((s.m - s.n) as f64 / s.n as f64) * d.n as f64 / (d.m - d.n) as f64;
    let (a, b) = (s.link_gains().log_lambda_s, d.link_gains().log_lambda_s);
    assert!((b - 2.0 * a).abs() <= 1e-12 * b);
}

#[test]
fn lp_matches_four_case_analysis() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut draws = 0;
    while draws < 1000 {
        let s = Scenario::random(&mut rng, 2);
        let q = [0, 1].map(|_| QuantNoise::Variance(10f64.powf(rng.random_range(-2.0..4.0))));
        let cs = qf_jd_constraints(&s.link_gains(), &q).unwrap();
        if cs.xi < 0.0 {
            continue;
        }
        draws += 1;
        let mu1: f64 = rng.random_range(0.0..=1.0);
        let lp = max_weighted_sum_lp(&cs, &Weights::two(mu1).unwrap()).unwrap();
        let (_, v) = four_case_value(&two_ue_bounds(&s, q).unwrap(), mu1);
        assert!(
            (lp.value - v).abs() <= 1e-9 * v.abs().max(1.0),
            "mu1={mu1} lp={} cases={v}",
            lp.value
        );
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let s = Scenario::two_ue_reference([25.0, 30.0]);
    for side in [Side::Scbs, Side::Mcbs] {
        let a = sample_zf_noise_gains(&s, side, 200, 9).unwrap();
        let b = sample_zf_noise_gains(&s, side, 200, 9).unwrap();
        for (x, y) in a.streams.iter().zip(&b.streams) {
            assert_eq!(x.mean.to_bits(), y.mean.to_bits());
        }
        let c = sample_zf_noise_gains(&s, side, 200, 10).unwrap();
        assert_ne!(a.streams[0].mean.to_bits(), c.streams[0].mean.to_bits());
    }
}
