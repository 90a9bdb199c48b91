//! Small dense LP: `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! Dictionary-form simplex (one row per constraint, one column per
//! nonbasic variable), so the tableau stays `m x n` even when `m` is the
//! `2^K` subset constraints. The origin is feasible because `b >= 0`, so no
//! phase one is needed. Bland's rule guarantees termination.
//!
//! Several objectives may be given: they are optimized lexicographically,
//! each one only over the optimal face of the previous ones.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Optimal value of each objective, in order.
    pub values: Vec<f64>,
    pub pivots: usize,
}

struct Dictionary {
    n: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    objectives: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl Dictionary {
    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.rows[r][e];
        let width = self.rows[r].len();
        for j in 0..width {
            if j != e {
                self.rows[r][j] /= p;
            }
        }
        self.rows[r][e] = 1.0 / p;
        self.rhs[r] /= p;
        let (pivot_row, pivot_rhs) = (self.rows[r].clone(), self.rhs[r]);

        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][e];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.rows[i];
            for j in 0..width {
                if j != e {
                    row[j] -= f * pivot_row[j];
                }
            }
            row[e] = -f * pivot_row[e];
            self.rhs[i] -= f * pivot_rhs;
            // clamp tiny negatives from cancellation; feasibility is b >= 0
            if self.rhs[i] < 0.0 && self.rhs[i] > -PIVOT_EPS {
                self.rhs[i] = 0.0;
            }
        }
        for (obj, off) in self.objectives.iter_mut().zip(self.offsets.iter_mut()) {
            let f = obj[e];
            if f == 0.0 {
                continue;
            }
            for j in 0..width {
                if j != e {
                    obj[j] -= f * pivot_row[j];
                }
            }
            obj[e] = -f * pivot_row[e];
            *off += f * pivot_rhs;
        }
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[e]);
    }

    fn entering(&self, level: usize, allowed: &[bool]) -> Option<usize> {
        let obj = &self.objectives[level];
        (0..self.nonbasic.len())
            .filter(|&j| allowed[j] && obj[j] > PIVOT_EPS)
            .min_by_key(|&j| self.nonbasic[j])
    }

    fn leaving(&self, e: usize) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (r, row) in self.rows.iter().enumerate() {
            let t = row[e];
            if t <= PIVOT_EPS {
                continue;
            }
            let ratio = self.rhs[r] / t;
            best = match best {
                None => Some((ratio, r)),
                Some((br, bi)) => {
                    if ratio < br - PIVOT_EPS * br.abs().max(1.0)
                        || (ratio <= br + PIVOT_EPS * br.abs().max(1.0)
                            && self.basic[r] < self.basic[bi])
                    {
                        Some((ratio, r))
                    } else {
                        Some((br, bi))
                    }
                }
            };
        }
        best.map(|(_, r)| r)
    }

    fn structural(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (r, &v) in self.basic.iter().enumerate() {
            if v < self.n {
                x[v] = self.rhs[r];
            }
        }
        x
    }
}

/// Lexicographic maximization. `a` is row-major `m x n`; every objective has
/// length `n`. Returns `Infeasible` if some `b_i < 0` and `Unsupported` if an
/// objective is unbounded.
pub fn maximize_lex(a: &[Vec<f64>], b: &[f64], objectives: &[Vec<f64>]) -> Result<LpSolution> {
    let m = a.len();
    if b.len() != m {
        return Err(Error::InvalidArgument("LP row count mismatch".into()));
    }
    let n = objectives.first().map_or(0, Vec::len);
    if a.iter().any(|r| r.len() != n) || objectives.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidArgument("LP column count mismatch".into()));
    }
    if let Some(i) = b.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::Infeasible(format!(
            "constraint {i} has bound {}",
            b[i]
        )));
    }

    let mut d = Dictionary {
        n,
        rows: a.to_vec(),
        rhs: b.to_vec(),
        basic: (n..n + m).collect(),
        nonbasic: (0..n).collect(),
        objectives: objectives.to_vec(),
        offsets: vec![0.0; objectives.len()],
    };
    let mut allowed = vec![true; n];
    let mut pivots = 0;
    for level in 0..objectives.len() {
        while let Some(e) = d.entering(level, &allowed) {
            let r = d
                .leaving(e)
                .ok_or_else(|| Error::Unsupported("unbounded LP objective".into()))?;
            d.pivot(r, e);
            pivots += 1;
            if pivots > MAX_PIVOTS {
                return Err(Error::Convergence("simplex pivot limit".into()));
            }
        }
        // Moving along columns with negative reduced cost leaves the optimal face.
        for (j, ok) in allowed.iter_mut().enumerate() {
            if d.objectives[level][j] < -PIVOT_EPS {
                *ok = false;
            }
        }
    }
    Ok(LpSolution {
        x: d.structural(),
        values: d.offsets.clone(),
        pivots,
    })
}
