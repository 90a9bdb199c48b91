//! Validation suite: every analytic result is compared against an
//! independent reference (grid search, a second solver, an algebraic
//! identity, or simulation).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::numeric::{cap, nats_to_bits, rel_diff};
use crate::quantopt::{
    grid_oracle, kkt_residuals, optimize, optimize_k_ue, quant_noise_for, waterfill_bisection,
    GridSpec, Tolerances,
};
use crate::region::{
    four_case_value, max_weighted_sum, max_weighted_sum_lp, qf_jd_constraints, two_ue_bounds,
    QuantNoise, Weights,
};
use crate::scenario::Scenario;
use crate::wztd::equivalence_report;
use crate::zf::{sample_zf_noise_gains, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Grid,
    CrossSolver,
    Identity,
    MonteCarlo,
    /// Qualitative property such as monotonicity.
    Property,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub target: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn within(
        name: impl Into<String>,
        target: f64,
        reference: f64,
        tolerance: f64,
        provenance: Provenance,
    ) -> Self {
        Check {
            name: name.into(),
            target,
            reference,
            tolerance,
            pass: (target - reference).abs() <= tolerance,
            provenance,
            note: None,
        }
    }

    fn failed(name: impl Into<String>, provenance: Provenance, note: String) -> Self {
        Check {
            name: name.into(),
            target: f64::NAN,
            reference: f64::NAN,
            tolerance: f64::NAN,
            pass: false,
            provenance,
            note: Some(note),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteConfig {
    pub mu_grid: Vec<Weights>,
    /// Finite `Q` grid points per UE for two-UE scenarios.
    pub grid_points: usize,
    /// Finite `Q` grid points per UE for three-UE scenarios.
    pub grid_points_k3: usize,
    pub trials: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// Random `Q` draws for the two-UE reduction check.
    pub reduction_draws: usize,
    pub sweep_points: usize,
}

impl SuiteConfig {
    pub fn for_k(k: usize) -> Self {
        SuiteConfig {
            mu_grid: default_mu_grid(k),
            grid_points: 200,
            grid_points_k3: 60,
            trials: 10_000,
            seed: 1,
            tolerances: Tolerances::DEFAULT,
            reduction_draws: 1000,
            sweep_points: 20,
        }
    }
}

/// `mu_1 = 0.1, ..., 0.9` with the remainder split evenly over the other UEs.
pub fn default_mu_grid(k: usize) -> Vec<Weights> {
    if k == 1 {
        return vec![Weights::uniform(1)];
    }
    (1..=9)
        .map(|i| {
            let m1 = i as f64 / 10.0;
            let mut mu = vec![(1.0 - m1) / (k - 1) as f64; k];
            mu[0] = m1;
            Weights::new(mu).expect("valid by construction")
        })
        .collect()
}

fn mu_label(mu: &Weights) -> String {
    format!("mu1={:.3}", mu[0])
}

pub fn run_suite(s: &Scenario, cfg: &SuiteConfig) -> ValidationReport {
    let mut checks = Vec::new();
    grid_checks(s, cfg, &mut checks);
    solver_checks(s, cfg, &mut checks);
    identity_checks(s, cfg, &mut checks);
    equivalence_checks(s, cfg, &mut checks);
    monte_carlo_checks(s, cfg, &mut checks);
    refinement_checks(s, cfg, &mut checks);
    reduction_checks(s, cfg, &mut checks);
    ValidationReport {
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

fn optimum_value(s: &Scenario, mu: &Weights) -> Result<f64> {
    let alloc = optimize(s, mu)?;
    Ok(max_weighted_sum(&qf_jd_constraints(&s.link_gains(), &alloc.q)?, mu)?.value)
}

/// Closed form against exhaustive search: the grid may not beat it, and it
/// must come within the grid resolution.
fn grid_checks(s: &Scenario, cfg: &SuiteConfig, out: &mut Vec<Check>) {
    let points = match s.k() {
        2 => cfg.grid_points,
        3 => cfg.grid_points_k3,
        _ => return,
    };
    let spec = GridSpec::with_points(points);
    for mu in &cfg.mu_grid {
        let name = format!("grid/{}", mu_label(mu));
        match optimum_value(s, mu).and_then(|v| Ok((v, grid_oracle(s, mu, &spec)?))) {
            Ok((closed, grid)) => {
                let excess_ok = grid.value <= closed + 1e-6;
                let gap_ok = grid.value >= closed * (1.0 - cfg.tolerances.grid_rel);
                out.push(Check {
                    name,
                    target: closed,
                    reference: grid.value,
                    tolerance: cfg.tolerances.grid_rel,
                    pass: excess_ok && gap_ok,
                    provenance: Provenance::Grid,
                    note: None,
                });
            }
            Err(e) => out.push(Check::failed(name, Provenance::Grid, e.to_string())),
        }
    }
}

fn solver_checks(s: &Scenario, cfg: &SuiteConfig, out: &mut Vec<Check>) {
    let g = s.link_gains();
    let tol = cfg.tolerances.cross_solver;
    for mu in &cfg.mu_grid {
        let name = format!("solvers/{}", mu_label(mu));
        let res = (|| -> Result<(f64, f64)> {
            let a = optimize_k_ue(s, mu)?;
            let b = waterfill_bisection(&g, mu)?;
            let mut diff = a
                .log_lambda
                .iter()
                .zip(&b.log_lambda)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if s.k() == 2 {
                let c = optimize(s, mu)?;
                diff = a
                    .log_lambda
                    .iter()
                    .zip(&c.log_lambda)
                    .map(|(x, y)| (x - y).abs())
                    .fold(diff, f64::max);
            }
            let kkt = kkt_residuals(&g, mu, &a)
                .max_residual()
                .max(kkt_residuals(&g, mu, &b).max_residual());
            Ok((diff, kkt))
        })();
        match res {
            Ok((diff, kkt)) => {
                out.push(Check::within(
                    name.clone(),
                    diff,
                    0.0,
                    tol,
                    Provenance::CrossSolver,
                ));
                out.push(Check::within(
                    format!("kkt/{}", mu_label(mu)),
                    kkt,
                    0.0,
                    tol,
                    Provenance::CrossSolver,
                ));
            }
            Err(e) => out.push(Check::failed(name, Provenance::CrossSolver, e.to_string())),
        }
    }
}

fn identity_checks(s: &Scenario, cfg: &SuiteConfig, out: &mut Vec<Check>) {
    let g = s.link_gains();
    let tol = cfg.tolerances.identity;
    for mu in &cfg.mu_grid {
        let name = format!("rate-identity/{}", mu_label(mu));
        let res = (|| -> Result<(f64, f64)> {
            let a = optimize(s, mu)?;
            let c = qf_jd_constraints(&g, &a.q)?;
            let mut worst: f64 = 0.0;
            for k in 0..g.k() {
                let penalty = match a.q[k] {
                    QuantNoise::Variance(v) => cap(g.zf_noise_r[k] / v),
                    QuantNoise::Unrelayed => 0.0,
                };
                let r = c.i_caps[k] - g.direct[k] - nats_to_bits(a.log_lambda[k]) + penalty;
                worst = worst.max(r.abs() / c.i_caps[k].max(1.0));
            }
            Ok((worst, a.budget_residual(&g)))
        })();
        match res {
            Ok((rate, budget)) => {
                out.push(Check::within(name, rate, 0.0, tol, Provenance::Identity));
                out.push(Check::within(
                    format!("budget/{}", mu_label(mu)),
                    budget,
                    0.0,
                    tol,
                    Provenance::Identity,
                ));
            }
            Err(e) => out.push(Check::failed(name, Provenance::Identity, e.to_string())),
        }
    }
}

fn equivalence_checks(s: &Scenario, cfg: &SuiteConfig, out: &mut Vec<Check>) {
    let tol = cfg.tolerances.identity;
    for mu in &cfg.mu_grid {
        let name = format!("wztd-equivalence/{}", mu_label(mu));
        match equivalence_report(s, mu) {
            Ok(r) => {
                out.push(Check {
                    name,
                    target: r.wztd_value,
                    reference: r.jd_value,
                    tolerance: tol,
                    pass: r.value_gap() <= tol,
                    provenance: Provenance::Identity,
                    note: None,
                });
                out.push(Check::within(
                    format!("wztd-binding/{}", mu_label(mu)),
                    r.binding_gap(),
                    0.0,
                    tol,
                    Provenance::Identity,
                ));
            }
            Err(e) => out.push(Check::failed(name, Provenance::Identity, e.to_string())),
        }
    }
}

fn monte_carlo_checks(s: &Scenario, cfg: &SuiteConfig, out: &mut Vec<Check>) {
    match sample_zf_noise_gains(s, Side::Scbs, cfg.trials, cfg.seed) {
        Ok(r) => {
            for st in &r.streams {
                out.push(Check {
                    name: format!("zf-noise/{}", st.label),
                    target: st.mean,
                    reference: st.exact,
                    tolerance: cfg.tolerances.mc_sigmas * st.std_err,
                    pass: st.z_score().abs() <= cfg.tolerances.mc_sigmas,
                    provenance: Provenance::MonteCarlo,
                    note: Some(format!("approx ratio {:.6}", st.approx_ratio())),
                });
            }
        }
        Err(e) => out.push(Check::failed(
            "zf-noise",
            Provenance::MonteCarlo,
            e.to_string(),
        )),
    }
}

/// Moving UE k closer to the SCBS must not coarsen its quantizer.
fn refinement_checks(s: &Scenario, cfg: &SuiteConfig, out: &mut Vec<Check>) {
    let mu = Weights::uniform(s.k());
    let n = cfg.sweep_points.max(2);
    for k in 0..s.k() {
        let name = format!("refinement/ue{}", k + 1);
        let res = (|| -> Result<usize> {
            let d0 = s.d_r[k];
            let mut prev = f64::INFINITY;
            let mut violations = 0;
            // far to near
            for i in 0..n {
                let mut t = s.clone();
                t.d_r[k] = d0 * (1.5 - i as f64 / (n - 1) as f64);
                let q = optimize(&t.validate()?, &mu)?.q[k].as_f64();
                if q > prev * (1.0 + cfg.tolerances.identity) {
                    violations += 1;
                }
                prev = q;
            }
            Ok(violations)
        })();
        match res {
            Ok(v) => out.push(Check::within(
                name,
                v as f64,
                0.0,
                0.0,
                Provenance::Property,
            )),
            Err(e) => out.push(Check::failed(name, Provenance::Property, e.to_string())),
        }
    }
}

/// The K-UE constraint set restricted to two UEs reproduces the two-UE
/// bounds, and the LP reproduces the four-case formula.
fn reduction_checks(s: &Scenario, cfg: &SuiteConfig, out: &mut Vec<Check>) {
    if s.k() < 2 {
        return;
    }
    let res = (|| -> Result<(f64, f64)> {
        let pair = s.subset(&[0, 1])?;
        let g = pair.link_gains();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (mut bound_err, mut lp_err): (f64, f64) = (0.0, 0.0);
        let mut draws = 0;
        while draws < cfg.reduction_draws {
            let q = [random_q(&mut rng, &g, 0), random_q(&mut rng, &g, 1)];
            let c = qf_jd_constraints(&g, &q)?;
            let b = two_ue_bounds(&pair, q)?;
            for (x, y) in [
                (c.i_caps[0], b.i1),
                (c.j(0), b.i2),
                (c.i_caps[1], b.i3),
                (c.j(1), b.i4),
                (c.j_subset(0b11), b.i5),
            ] {
                bound_err = bound_err.max(rel_diff(x, y));
            }
            if c.xi < 0.0 {
                continue;
            }
            let mu1: f64 = rng.random_range(0.0..=1.0);
            let mu = Weights::two(mu1)?;
            let lp = max_weighted_sum_lp(&c, &mu)?;
            lp_err = lp_err.max(rel_diff(lp.value, four_case_value(&b, mu1).1));
            draws += 1;
        }
        Ok((bound_err, lp_err))
    })();
    match res {
        Ok((b, l)) => {
            out.push(Check::within(
                "reduction/bounds",
                b,
                0.0,
                1e-12,
                Provenance::Identity,
            ));
            out.push(Check::within(
                "reduction/four-case",
                l,
                0.0,
                1e-9,
                Provenance::CrossSolver,
            ));
        }
        Err(e) => out.push(Check::failed(
            "reduction",
            Provenance::Identity,
            e.to_string(),
        )),
    }
}

/// Log-uniform draw over the share range, so that `Q` spans the regimes
/// the optimizer actually visits, with some unrelayed draws.
fn random_q<R: Rng>(rng: &mut R, g: &crate::scenario::LinkGains, k: usize) -> QuantNoise {
    if rng.random_bool(0.1) {
        return QuantNoise::Unrelayed;
    }
    let share = rng.random_range(1e-3..1.0) * g.log_lambda_s;
    quant_noise_for(g, k, share)
}
