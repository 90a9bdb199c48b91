//! Exhaustive search over a log-spaced `Q` grid, for validation only.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::region::{max_weighted_sum, qf_jd_constraints, QuantNoise, Weights};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    /// Finite grid points per UE; an unrelayed column is always added.
    pub points_per_dim: usize,
    pub q_min: f64,
    pub q_max: f64,
    /// Refuse grids with more evaluations than this.
    pub max_evals: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points_per_dim: 200,
            q_min: 1e-4,
            q_max: 1e4,
            max_evals: 20_000_000,
        }
    }
}

impl GridSpec {
    pub fn with_points(points_per_dim: usize) -> Self {
        GridSpec {
            points_per_dim,
            ..Self::default()
        }
    }

    /// Grid values for one UE, unrelayed last.
    pub fn axis(&self) -> Vec<QuantNoise> {
        let n = self.points_per_dim;
        let (lo, hi) = (self.q_min.ln(), self.q_max.ln());
        let mut v: Vec<QuantNoise> = (0..n)
            .map(|i| {
                let t = if n == 1 {
                    0.0
                } else {
                    i as f64 / (n - 1) as f64
                };
                QuantNoise::Variance((lo + t * (hi - lo)).exp())
            })
            .collect();
        v.push(QuantNoise::Unrelayed);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    #[serde(rename = "Q")]
    pub q: Vec<QuantNoise>,
    pub value: f64,
    pub evaluated: usize,
    /// Grid points whose rate region is empty.
    pub infeasible: usize,
}

pub fn grid_oracle(s: &Scenario, mu: &Weights, spec: &GridSpec) -> Result<GridResult> {
    let k = s.k();
    if k > 3 {
        return Err(Error::Unsupported(format!(
            "grid search limited to K <= 3, got {k}"
        )));
    }
    if spec.points_per_dim == 0 || !(spec.q_min > 0.0 && spec.q_max >= spec.q_min) {
        return Err(Error::InvalidArgument(format!("bad grid {spec:?}")));
    }
    let axis = spec.axis();
    let total = axis.len().checked_pow(k as u32).unwrap_or(usize::MAX);
    if total > spec.max_evals {
        return Err(Error::Unsupported(format!(
            "grid has {total} points, cap is {}",
            spec.max_evals
        )));
    }
    let gains = s.link_gains();
    let n = axis.len();
    // (value, flat index); ties go to the larger index, i.e. coarser
    // quantization, with unrelayed last on each axis
    let best = (0..total)
        .into_par_iter()
        .map(|flat| {
            let q = unflatten(flat, n, k, &axis);
            let value = qf_jd_constraints(&gains, &q)
                .and_then(|c| max_weighted_sum(&c, mu))
                .map_or(f64::NEG_INFINITY, |p| p.value);
            (value, flat)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |x, y| {
                if y.0 > x.0 || (y.0 == x.0 && (x.1 == usize::MAX || y.1 > x.1)) {
                    y
                } else {
                    x
                }
            },
        );
    let infeasible = (0..total)
        .into_par_iter()
        .filter(|&flat| {
            let q = unflatten(flat, n, k, &axis);
            qf_jd_constraints(&gains, &q)
                .map(|c| (0..k).any(|i| c.j(i) < 0.0))
                .unwrap_or(true)
        })
        .count();
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::Infeasible("no feasible grid point".into()));
    }
    Ok(GridResult {
        q: unflatten(best.1, n, k, &axis),
        value: best.0,
        evaluated: total,
        infeasible,
    })
}

fn unflatten(mut flat: usize, n: usize, k: usize, axis: &[QuantNoise]) -> Vec<QuantNoise> {
    let mut q = vec![QuantNoise::Unrelayed; k];
    for slot in q.iter_mut().rev() {
        *slot = axis[flat % n];
        flat /= n;
    }
    q
}
