//! Dense dictionary simplex (Chvátal form) with Bland's rule.
//!
//! Every variable is nonnegative. Rows are `a·x {≤,≥,=} b`; the dictionary
//! keeps one row per inequality and one column per nonbasic variable, so no
//! slack columns are materialized.

use serde::{Deserialize, Serialize};

pub const FEAS_TOL: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct Lp {
    pub n: usize,
    pub rows: Vec<Row>,
    /// Maximized; all zeros for a pure feasibility question.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Infeasible,
    Unbounded,
    Optimal { x: Vec<f64>, value: f64 },
    /// Pivot budget exhausted, i.e. numerical trouble.
    Stalled,
}

struct Dictionary {
    /// `basic[i] = beta[i] + Σ_j d[i][j] · nonbasic[j]`
    beta: Vec<f64>,
    d: Vec<Vec<f64>>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    z0: f64,
    cost: Vec<f64>,
}

enum Step {
    Optimal,
    Unbounded,
    Pivoted,
}

impl Dictionary {
    fn pivot(&mut self, r: usize, s: usize) {
        let drs = self.d[r][s];
        let row_r: Vec<f64> = self.d[r].iter().map(|&x| -x / drs).collect();
        let beta_r = -self.beta[r] / drs;
        let mut new_r = row_r;
        new_r[s] = 1.0 / drs;
        for i in 0..self.d.len() {
            if i == r {
                continue;
            }
            let f = self.d[i][s];
            if f == 0.0 {
                continue;
            }
            self.beta[i] += f * beta_r;
            let row = &mut self.d[i];
            for (j, x) in row.iter_mut().enumerate() {
                if j == s {
                    *x = f * new_r[s];
                } else {
                    *x += f * new_r[j];
                }
            }
        }
        let f = self.cost[s];
        if f != 0.0 {
            self.z0 += f * beta_r;
            for (j, x) in self.cost.iter_mut().enumerate() {
                if j == s {
                    *x = f * new_r[s];
                } else {
                    *x += f * new_r[j];
                }
            }
        }
        self.d[r] = new_r;
        self.beta[r] = beta_r;
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[s]);
    }

    /// One Bland step: lowest-index improving column, lowest-index tie among
    /// minimal ratios.
    fn step(&mut self) -> Step {
        let entering = (0..self.nonbasic.len())
            .filter(|&j| self.cost[j] > COST_EPS)
            .min_by_key(|&j| self.nonbasic[j]);
        let Some(s) = entering else {
            return Step::Optimal;
        };
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.d.len() {
            let a = self.d[i][s];
            if a < -PIVOT_EPS {
                let ratio = self.beta[i].max(0.0) / -a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basic[i] < self.basic[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        match best {
            None => Step::Unbounded,
            Some((r, _)) => {
                self.pivot(r, s);
                Step::Pivoted
            }
        }
    }

    fn run(&mut self) -> Option<Step> {
        for _ in 0..MAX_PIVOTS {
            match self.step() {
                Step::Pivoted => continue,
                other => return Some(other),
            }
        }
        None
    }
}

/// Rewrites the rows as `a·x ≤ b`.
fn normalized(lp: &Lp) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::with_capacity(lp.rows.len());
    for row in &lp.rows {
        assert_eq!(row.coeffs.len(), lp.n, "row width must equal the variable count");
        let neg = || (row.coeffs.iter().map(|x| -x).collect::<Vec<_>>(), -row.rhs);
        match row.sense {
            Sense::Le => out.push((row.coeffs.clone(), row.rhs)),
            Sense::Ge => out.push(neg()),
            Sense::Eq => {
                out.push((row.coeffs.clone(), row.rhs));
                out.push(neg());
            }
        }
    }
    out
}

pub fn solve(lp: &Lp) -> LpOutcome {
    let rows = normalized(lp);
    let n = lp.n;
    let m = rows.len();
    // variable ids: 0..n structural, n..n+m slacks, n+m the auxiliary x0
    let x0 = n + m;
    let mut dict = Dictionary {
        beta: rows.iter().map(|(_, b)| *b).collect(),
        d: rows
            .iter()
            .map(|(a, _)| {
                let mut r: Vec<f64> = a.iter().map(|x| -x).collect();
                r.push(1.0);
                r
            })
            .collect(),
        basic: (n..n + m).collect(),
        nonbasic: (0..n).chain(std::iter::once(x0)).collect(),
        z0: 0.0,
        cost: {
            let mut c = vec![0.0; n];
            c.push(-1.0);
            c
        },
    };
    let worst = (0..m).min_by(|&i, &j| dict.beta[i].total_cmp(&dict.beta[j]));
    if let Some(r) = worst.filter(|&r| dict.beta[r] < 0.0) {
        dict.pivot(r, n);
        match dict.run() {
            Some(Step::Optimal) => {}
            Some(_) => unreachable!("phase one is bounded by x0 >= 0"),
            None => return LpOutcome::Stalled,
        }
        if dict.z0 < -FEAS_TOL {
            return LpOutcome::Infeasible;
        }
        if let Some(r) = dict.basic.iter().position(|&v| v == x0) {
            match (0..dict.nonbasic.len()).max_by(|&a, &b| dict.d[r][a].abs().total_cmp(&dict.d[r][b].abs())) {
                Some(s) if dict.d[r][s].abs() > PIVOT_EPS => dict.pivot(r, s),
                _ => {
                    dict.d.remove(r);
                    dict.beta.remove(r);
                    dict.basic.remove(r);
                }
            }
        }
    }
    let col = dict.nonbasic.iter().position(|&v| v == x0).expect("x0 is nonbasic after phase one");
    dict.nonbasic.remove(col);
    for row in &mut dict.d {
        row.remove(col);
    }
    for b in &mut dict.beta {
        if *b < 0.0 {
            *b = 0.0;
        }
    }
    // phase two objective in terms of the current nonbasics
    dict.z0 = 0.0;
    dict.cost = vec![0.0; dict.nonbasic.len()];
    for (j, &v) in dict.nonbasic.iter().enumerate() {
        if v < n {
            dict.cost[j] += lp.objective[v];
        }
    }
    for (i, &v) in dict.basic.iter().enumerate() {
        if v < n && lp.objective[v] != 0.0 {
            let c = lp.objective[v];
            dict.z0 += c * dict.beta[i];
            for (j, x) in dict.d[i].iter().enumerate() {
                dict.cost[j] += c * x;
            }
        }
    }
    match dict.run() {
        Some(Step::Optimal) => {}
        Some(Step::Unbounded) => return LpOutcome::Unbounded,
        Some(Step::Pivoted) => unreachable!(),
        None => return LpOutcome::Stalled,
    }
    let mut x = vec![0.0; n];
    for (i, &v) in dict.basic.iter().enumerate() {
        if v < n {
            x[v] = dict.beta[i];
        }
    }
    LpOutcome::Optimal { value: dict.z0, x }
}

/// Largest constraint violation of `x`, relative to `1 + |rhs|`.
pub fn max_violation(lp: &Lp, x: &[f64]) -> f64 {
    let mut worst = x.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
    for row in &lp.rows {
        let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        let v = match row.sense {
            Sense::Le => lhs - row.rhs,
            Sense::Ge => row.rhs - lhs,
            Sense::Eq => (lhs - row.rhs).abs(),
        };
        worst = worst.max(v / (1.0 + row.rhs.abs()));
    }
    worst
}
