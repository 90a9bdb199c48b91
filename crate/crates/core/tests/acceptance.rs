//! Acceptance criteria, one line per criterion. Exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qf_hetnet::complexity::{codebook_log2, decoding_log2, Scheme};
use qf_hetnet::quantopt::{
    find_upsilon, grid_oracle, kkt_residuals, optimize_k_ue, optimize_two_ue, order_omegas,
    quant_noise_for, waterfill_bisection, GridSpec,
};
use qf_hetnet::region::{max_weighted_sum, qf_jd_constraints, two_ue_bounds, QuantNoise, Weights};
use qf_hetnet::scenario::Scenario;
use qf_hetnet::wztd::{allocate_phases, equivalence_report};
use qf_hetnet::zf::{sample_zf_noise_gains, Side};

struct Outcome {
    pass: bool,
    detail: String,
}

fn random_weights<R: Rng>(rng: &mut R, k: usize) -> Weights {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut mu: Vec<f64> = raw.iter().map(|x| x / sum).collect();
    let rest: f64 = mu[1..].iter().sum();
    mu[0] = 1.0 - rest;
    Weights::new(mu).unwrap()
}

fn qf_value(s: &Scenario, q: &[QuantNoise], mu: &Weights) -> f64 {
    let c = qf_jd_constraints(&s.link_gains(), q).unwrap();
    max_weighted_sum(&c, mu).unwrap().value
}

fn three_ue_weights(mu1: f64) -> Weights {
    Weights::new(vec![mu1, 0.75 * (1.0 - mu1), 0.25 * (1.0 - mu1)]).unwrap()
}

/// Closed form never loses to the grid, and the grid gets within 1e-6 bits.
fn closed_form_vs_grid() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let spec = GridSpec::with_points(200);
    let (mut worst_excess, mut worst_shortfall, mut worst_rel) =
        (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let mut cases = 0;
    for _ in 0..20 {
        let s = Scenario::random(&mut rng, 2);
        for i in 1..=9 {
            let mu = Weights::two(i as f64 / 10.0).unwrap();
            let closed = qf_value(&s, &optimize_two_ue(&s, &mu).unwrap().q, &mu);
            let grid = grid_oracle(&s, &mu, &spec).unwrap().value;
            worst_excess = worst_excess.max(grid - closed);
            worst_shortfall = worst_shortfall.max(closed - grid);
            worst_rel = worst_rel.max((closed - grid) / closed.abs().max(1e-300));
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_excess <= 0.0 && worst_shortfall <= 1e-6 && elapsed < Duration::from_secs(120);
    Outcome {
        pass,
        detail: format!(
            "{cases} cases: max(grid - closed) = {worst_excess:.3e}, max(closed - grid) = {worst_shortfall:.3e} (limit 1e-6), max relative gap {worst_rel:.3e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn solver_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut dl, mut kkt, mut budget) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..100 {
        let k = 2 + i % 7;
        let s = Scenario::random(&mut rng, k);
        let mu = random_weights(&mut rng, k);
        let g = s.link_gains();
        let a = optimize_k_ue(&s, &mu).unwrap();
        let b = waterfill_bisection(&g, &mu).unwrap();
        for (x, y) in a.log_lambda.iter().zip(&b.log_lambda) {
            dl = dl.max((x - y).abs());
        }
        kkt = kkt
            .max(kkt_residuals(&g, &mu, &a).max_residual())
            .max(kkt_residuals(&g, &mu, &b).max_residual());
        budget = budget.max(a.budget_residual(&g)).max(b.budget_residual(&g));
    }
    Outcome {
        pass: dl <= 1e-8 && kkt <= 1e-8 && budget <= 1e-9,
        detail: format!("max |d ln lambda| = {dl:.3e}, max KKT residual = {kkt:.3e}, max budget residual = {budget:.3e}"),
    }
}

fn reduction_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut dl = 0.0f64;
    for _ in 0..50 {
        let s = Scenario::random(&mut rng, 2);
        for i in 0..=20 {
            let mu = Weights::two(i as f64 / 20.0).unwrap();
            let a = optimize_k_ue(&s, &mu).unwrap();
            let b = optimize_two_ue(&s, &mu).unwrap();
            for (x, y) in a.log_lambda.iter().zip(&b.log_lambda) {
                dl = dl.max((x - y).abs());
            }
        }
    }
    let mut bound_err = 0.0f64;
    for _ in 0..1000 {
        let s = Scenario::random(&mut rng, 2);
        let q: Vec<QuantNoise> = (0..2)
            .map(|_| {
                if rng.random_bool(0.1) {
                    QuantNoise::Unrelayed
                } else {
                    QuantNoise::Variance(10f64.powf(rng.random_range(-4.0..4.0)))
                }
            })
            .collect();
        let c = qf_jd_constraints(&s.link_gains(), &q).unwrap();
        let b = two_ue_bounds(&s, [q[0], q[1]]).unwrap();
        for (x, y) in [
            (c.i_caps[0], b.i1),
            (c.j(0), b.i2),
            (c.i_caps[1], b.i3),
            (c.j(1), b.i4),
            (c.j_subset(0b11), b.i5),
        ] {
            bound_err = bound_err.max((x - y).abs() / x.abs().max(y.abs()).max(1.0));
        }
    }
    let machine = 64.0 * f64::EPSILON;
    Outcome {
        pass: dl <= 1e-9 && bound_err <= machine,
        detail: format!(
            "max |d ln lambda| = {dl:.3e} (limit 1e-9), max bound mismatch = {bound_err:.3e} (limit {machine:.1e})"
        ),
    }
}

fn wztd_equivalence() -> Outcome {
    let s = Scenario::two_ue_reference([25.0, 30.0]);
    let (mut gap, mut bind) = (0.0f64, 0.0f64);
    for i in 0..=20 {
        let mu = Weights::two(i as f64 / 20.0).unwrap();
        let r = equivalence_report(&s, &mu).unwrap();
        gap = gap.max(r.value_gap());
        bind = bind.max(r.binding_gap());
    }
    Outcome {
        pass: gap <= 1e-9 && bind <= 1e-9,
        detail: format!("max value gap = {gap:.3e}, max |R_b - phase capacity| = {bind:.3e}"),
    }
}

/// The identity is evaluated from the scenario fields directly.
fn per_ue_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let c = |x: f64| (1.0 + x).log2();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let k = rng.random_range(1..=5);
        let s = Scenario::random(&mut rng, k);
        let g = s.link_gains();
        let raw: Vec<f64> = (0..k)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random_range(0.0..1.0)
                }
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        if sum == 0.0 {
            continue;
        }
        let (m, n, alpha) = (s.m as f64, s.n as f64, s.alpha);
        for i in 0..k {
            let log_lambda = raw[i] / sum * g.log_lambda_s;
            let q = quant_noise_for(&g, i, log_lambda);
            let zf = s.d_r[i].powf(alpha) / n;
            let direct = c(s.p[i] * (m - n) / s.d_d[i].powf(alpha));
            let (cap_i, penalty) = match q {
                QuantNoise::Variance(v) => (
                    c(s.p[i] * (m - n) / s.d_d[i].powf(alpha) + s.p[i] / (zf + v)),
                    c(zf / v),
                ),
                QuantNoise::Unrelayed => (direct, 0.0),
            };
            let bits = if q.is_relayed() {
                log_lambda / std::f64::consts::LN_2
            } else {
                0.0
            };
            let r = cap_i - direct - bits + penalty;
            worst = worst.max(r.abs() / cap_i.max(1.0));
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("max |I - direct - log2 lambda + C(s/Q)| = {worst:.3e}"),
    }
}

fn three_ue_behavior() -> Outcome {
    let s = Scenario::three_ue_reference();
    let g = s.link_gains();
    let mut bad = Vec::new();
    for i in 0..=10 {
        let mu1 = 0.8 + 0.02 * i as f64;
        let mu = three_ue_weights(mu1);
        let a = optimize_k_ue(&s, &mu).unwrap();
        let p = allocate_phases(&g, &a);
        if a.q[2] != QuantNoise::Unrelayed || p.beta[2] != 0.0 {
            bad.push(format!(
                "mu1={mu1:.2}: Q3={}, beta3={:.4}",
                a.q[2], p.beta[2]
            ));
        }
    }
    let half = find_upsilon(&g, &order_omegas(&g, &three_ue_weights(0.5)));
    // where UE 3 stops being relayed
    let (mut lo, mut hi) = (0.5, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if optimize_k_ue(&s, &three_ue_weights(mid)).unwrap().q[2].is_relayed() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Outcome {
        pass: bad.is_empty() && half == 3,
        detail: format!(
            "upsilon at mu1=0.5: {half}; UE 3 unrelayed from mu1 = {hi:.4}; violations over mu1 in [0.80, 1.00]: {}",
            if bad.is_empty() { "none".to_string() } else { bad.join("; ") }
        ),
    }
}

fn monotone_refinement() -> Outcome {
    let mu = Weights::two(0.5).unwrap();
    let base = Scenario::two_ue_reference([25.0, 30.0]);
    let mut violations = Vec::new();
    for k in 0..2 {
        let mut prev = f64::INFINITY;
        for i in 0..20 {
            let mut s = base.clone();
            s.d_r[k] = 60.0 - 50.0 * i as f64 / 19.0;
            let q = optimize_two_ue(&s, &mu).unwrap().q[k].as_f64();
            if q > prev {
                violations.push(format!("d_r{}={:.2}", k + 1, s.d_r[k]));
            }
            prev = q;
        }
    }
    let mut prev = [f64::INFINITY; 2];
    for i in 0..=30 {
        let snr = -10.0 + i as f64;
        let s = base.clone().set_snr(snr);
        let a = optimize_two_ue(&s, &mu).unwrap();
        for k in 0..2 {
            let q = a.q[k].as_f64();
            if q > prev[k] {
                violations.push(format!("snr={snr} Q{}", k + 1));
            }
            prev[k] = q;
        }
    }
    Outcome {
        pass: violations.is_empty(),
        detail: if violations.is_empty() {
            "Q* nonincreasing along both d_r sweeps and the SNR sweep".into()
        } else {
            format!("violations: {}", violations.join(", "))
        },
    }
}

fn monte_carlo_zf() -> Outcome {
    let start = Instant::now();
    let s = Scenario::two_ue_reference([25.0, 30.0]);
    let r = sample_zf_noise_gains(&s, Side::Scbs, 10_000, 808).unwrap();
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(30);
    let mut parts = Vec::new();
    for st in &r.streams {
        let z = st.z_score();
        let ratio = st.approx_ratio();
        pass &= z.abs() <= 3.0 && (ratio - 1.0).abs() <= 0.1;
        parts.push(format!(
            "{}: z = {z:+.2}, mean/approx = {ratio:.4}",
            st.label
        ));
    }
    Outcome {
        pass,
        detail: format!("{}, {:.2}s", parts.join("; "), elapsed.as_secs_f64()),
    }
}

fn complexity_accounting() -> Outcome {
    let mut worst = 0.0f64;
    let mut check = |got: f64, want: f64| {
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
    };
    for n in [1.0, 10.0, 100.0] {
        for k in [2usize, 3, 5, 10] {
            let kf = k as f64;
            let (r, rq, rb) = (vec![1.5; k], vec![1.0; k], vec![0.5; k]);
            check(
                codebook_log2(Scheme::Wztd, n, &rq, &rb).unwrap(),
                kf.log2() + 0.5 * n,
            );
            check(codebook_log2(Scheme::Jd, n, &rq, &rb).unwrap(), kf * n);
            // K (2^{1.5n} + 2 * 2^{0.5n}) = K 2^{1.5n} (1 + 2^{1-n})
            check(
                decoding_log2(Scheme::Wztd, n, &r, &rq, &rb).unwrap(),
                kf.log2() + 1.5 * n + (2f64.powf(1.0 - n)).ln_1p() / std::f64::consts::LN_2,
            );
            check(
                decoding_log2(Scheme::Jd, n, &r, &rq, &rb).unwrap(),
                2.5 * n * kf,
            );
        }
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max relative mismatch = {worst:.3e}"),
    }
}

fn region_dominance() -> Outcome {
    let mut worst = f64::INFINITY;
    for d_r in [[25.0, 30.0], [50.0, 60.0]] {
        let s = Scenario::two_ue_reference(d_r);
        let g = s.link_gains();
        for i in 0..=100 {
            let mu = Weights::two(i as f64 / 100.0).unwrap();
            let q = optimize_two_ue(&s, &mu).unwrap().q;
            let qf = qf_value(&s, &q, &mu);
            let direct = mu[0] * g.direct[0] + mu[1] * g.direct[1];
            worst = worst.min(qf - direct);
        }
    }
    Outcome {
        pass: worst >= 0.0,
        detail: format!("min (QF - direct) weighted sum over 202 points = {worst:.4e}"),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("closed form vs grid search", closed_form_vs_grid),
        ("water-filling vs bisection and KKT", solver_agreement),
        ("two-UE reduction", reduction_consistency),
        ("WZTD equivalence", wztd_equivalence),
        ("per-UE rate identity", per_ue_identity),
        ("three-UE relaying pattern", three_ue_behavior),
        ("monotone refinement", monotone_refinement),
        ("Monte Carlo ZF noise", monte_carlo_zf),
        ("complexity accounting", complexity_accounting),
        ("region dominance", region_dominance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<36} {}  {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
