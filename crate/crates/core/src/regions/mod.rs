//! Rate-inequality systems and their feasibility.
//!
//! Right-hand sides are kept symbolically as integer combinations of
//! `log2(p)` for primes `p` and canonical entropy keys, so systems built from
//! different state shapes can be compared exactly.

pub mod lp;
pub mod search;
mod step2;
mod step3;
mod thm1;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cqstates::{CqEnsemble, EntropyKey, Item};
use crate::error::{Error, Result};
use lp::{Lp, LpOutcome, Row};

pub use lp::Sense;
pub use step2::stepii_system;
pub use step3::{extra_variables as step3_extra_variables, stepiii_system};
pub use thm1::thm1_system;

/// Tightness tolerance of the boundary test.
pub const BOUNDARY_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "R3")]
    pub r3: f64,
    pub tau: f64,
}

impl RatePoint {
    pub fn new(r1: f64, r2: f64, r3: f64, tau: f64) -> Result<Self> {
        let p = Self { r1, r2, r3, tau };
        if [r1, r2, r3, tau].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Parameter(format!("rate point {p:?} must be finite and nonnegative")));
        }
        Ok(p)
    }

    pub fn rates(&self) -> [f64; 3] {
        [self.r1, self.r2, self.r3]
    }
}

/// `Σ c·log2(p) + Σ c·H(key)` with integer coefficients.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr {
    pub logs: BTreeMap<u32, i64>,
    pub terms: BTreeMap<EntropyKey, i64>,
}

fn factor(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

impl Expr {
    pub fn add_log(&mut self, n: u32, coef: i64) {
        for p in factor(n) {
            let e = self.logs.entry(p).or_insert(0);
            *e += coef;
            if *e == 0 {
                self.logs.remove(&p);
            }
        }
    }

    pub fn add_term(&mut self, key: EntropyKey, coef: i64) {
        if key.is_empty() || coef == 0 {
            return;
        }
        let e = self.terms.entry(key.clone()).or_insert(0);
        *e += coef;
        if *e == 0 {
            self.terms.remove(&key);
        }
    }

    pub fn add(&mut self, other: &Expr, coef: i64) {
        for (&p, &c) in &other.logs {
            self.add_log(p, c * coef);
        }
        for (k, &c) in &other.terms {
            self.add_term(k.clone(), c * coef);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.logs.is_empty() && self.terms.is_empty()
    }

    pub fn eval(&self, e: &CqEnsemble) -> f64 {
        let logs: f64 = self.logs.iter().map(|(&p, &c)| c as f64 * (p as f64).log2()).sum();
        logs + self.terms.iter().map(|(k, &c)| c as f64 * e.entropy_of_key(k)).sum::<f64>()
    }
}

fn signed(first: bool, c: i64, body: &str) -> String {
    let mag = if c.abs() == 1 { body.to_string() } else { format!("{}{}", c.abs(), body) };
    match (first, c < 0) {
        (true, false) => mag,
        (true, true) => format!("-{mag}"),
        (false, false) => format!(" + {mag}"),
        (false, true) => format!(" - {mag}"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (p, &c) in &self.logs {
            write!(f, "{}", signed(first, c, &format!("log2({p})")))?;
            first = false;
        }
        for (k, &c) in &self.terms {
            write!(f, "{}", signed(first, c, &k.to_string()))?;
            first = false;
        }
        Ok(())
    }
}

/// One entropy argument: classical items plus receiver indices (0-based).
pub(crate) type Arg<'x> = (&'x [Item], &'x [usize]);

fn join(a: Arg<'_>, b: Arg<'_>) -> (Vec<Item>, Vec<usize>) {
    (a.0.iter().chain(b.0).cloned().collect(), a.1.iter().chain(b.1).copied().collect())
}

/// Builds a right-hand side together with its as-written description.
pub(crate) struct Rhs<'a> {
    e: &'a CqEnsemble,
    expr: Expr,
    text: String,
}

impl<'a> Rhs<'a> {
    pub fn new(e: &'a CqEnsemble) -> Self {
        Self { e, expr: Expr::default(), text: String::new() }
    }

    fn push(&mut self, coef: i64, body: &str) {
        let s = signed(self.text.is_empty(), coef, body);
        self.text.push_str(&s);
    }

    fn describe(&self, a: Arg<'_>) -> String {
        let mut parts: Vec<String> = a.0.iter().map(|i| self.e.describe(i)).collect();
        parts.extend(a.1.iter().map(|j| format!("Y{}", j + 1)));
        parts.join(",")
    }

    fn key(&self, a: Arg<'_>) -> Result<EntropyKey> {
        self.e.key(a.0, a.1)
    }

    fn empty(a: Arg<'_>) -> bool {
        a.0.is_empty() && a.1.is_empty()
    }

    /// `coef · log2(n)`.
    pub fn log(mut self, n: u32, coef: i64) -> Self {
        if n > 1 && coef != 0 {
            self.expr.add_log(n, coef);
            self.push(coef, &format!("log2({n})"));
        }
        self
    }

    /// `coef · H(a)`.
    pub fn h(mut self, coef: i64, a: Arg<'_>) -> Result<Self> {
        if !Self::empty(a) {
            self.expr.add_term(self.key(a)?, coef);
            let body = format!("H({})", self.describe(a));
            self.push(coef, &body);
        }
        Ok(self)
    }

    /// `coef · H(a | b)`.
    pub fn hc(mut self, coef: i64, a: Arg<'_>, b: Arg<'_>) -> Result<Self> {
        if Self::empty(a) {
            return Ok(self);
        }
        if Self::empty(b) {
            return self.h(coef, a);
        }
        let (ac, aq) = join(a, b);
        self.expr.add_term(self.key((&ac, &aq))?, coef);
        self.expr.add_term(self.key(b)?, -coef);
        let body = format!("H({}|{})", self.describe(a), self.describe(b));
        self.push(coef, &body);
        Ok(self)
    }

    /// `coef · I(a; b)`.
    pub fn mi(mut self, coef: i64, a: Arg<'_>, b: Arg<'_>) -> Result<Self> {
        if Self::empty(a) || Self::empty(b) {
            return Ok(self);
        }
        let (ac, aq) = join(a, b);
        self.expr.add_term(self.key(a)?, coef);
        self.expr.add_term(self.key(b)?, coef);
        self.expr.add_term(self.key((&ac, &aq))?, -coef);
        let body = format!("I({};{})", self.describe(a), self.describe(b));
        self.push(coef, &body);
        Ok(self)
    }

    pub fn finish(self) -> (Expr, String) {
        let text = if self.text.is_empty() { "0".to_string() } else { self.text };
        (self.expr, text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "thm1")]
    Thm1,
    #[serde(rename = "step2")]
    StepII,
    #[serde(rename = "step3")]
    StepIII,
}

#[derive(Debug, Clone, Serialize)]
pub struct Variable {
    pub name: String,
    pub nonnegative: bool,
}

/// `name = max{options[0], options[1]}`, a placeholder variable in constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxTerm {
    pub name: String,
    pub options: [BTreeMap<String, i64>; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearConstraint {
    pub family: String,
    pub coeffs: BTreeMap<String, i64>,
    pub sense: Sense,
    pub rhs: f64,
    /// The bound as written, with the entropy expressions that produced `rhs`.
    pub provenance: String,
    /// Canonical symbolic form of `rhs`.
    pub canonical: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip)]
    pub expr: Expr,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaReport {
    pub theta_all: u32,
    pub value_all: f64,
    pub theta_nonzero: Option<u32>,
    pub value_nonzero: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalitySystem {
    pub theorem: Theorem,
    pub model: String,
    pub expected_cost: f64,
    pub variables: Vec<Variable>,
    pub max_terms: Vec<MaxTerm>,
    pub constraints: Vec<LinearConstraint>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaReport>,
}

/// Accumulates constraints for one theorem.
pub(crate) struct Builder<'a> {
    pub e: &'a CqEnsemble,
    vars: Vec<String>,
    maxes: Vec<MaxTerm>,
    constraints: Vec<LinearConstraint>,
}

pub(crate) fn lhs(terms: &[&str]) -> BTreeMap<String, i64> {
    let mut out = BTreeMap::new();
    for t in terms {
        *out.entry(t.to_string()).or_insert(0) += 1;
    }
    out
}

impl<'a> Builder<'a> {
    pub fn new(e: &'a CqEnsemble, vars: Vec<String>) -> Self {
        Self { e, vars, maxes: Vec::new(), constraints: Vec::new() }
    }

    pub fn max_term(&mut self, name: &str, a: &[&str], b: &[&str]) {
        self.maxes.push(MaxTerm { name: name.into(), options: [lhs(a), lhs(b)] });
    }

    /// Adds a constraint as written; duplicates are kept.
    pub fn push(&mut self, family: &str, coeffs: BTreeMap<String, i64>, sense: Sense, rhs: (Expr, String), note: Option<String>) {
        for k in coeffs.keys() {
            debug_assert!(
                self.vars.contains(k) || self.maxes.iter().any(|m| &m.name == k),
                "undeclared variable {k}"
            );
        }
        let (expr, provenance) = rhs;
        self.constraints.push(LinearConstraint {
            family: family.into(),
            rhs: expr.eval(self.e),
            canonical: expr.to_string(),
            coeffs,
            sense,
            provenance,
            note,
            expr,
        });
    }

    pub fn finish(self, theorem: Theorem, model: String, expected_cost: f64, notes: Vec<String>, theta: Option<ThetaReport>) -> InequalitySystem {
        InequalitySystem {
            theorem,
            model,
            expected_cost,
            variables: self.vars.into_iter().map(|name| Variable { name, nonnegative: true }).collect(),
            max_terms: self.maxes,
            constraints: self.constraints,
            notes,
            theta,
        }
    }
}

/// Picks the maximizing candidate; ties keep the earliest.
pub(crate) fn argmax<T>(cands: Vec<(T, (Expr, String))>, e: &CqEnsemble) -> (T, (Expr, String)) {
    let mut best: Option<(f64, T, (Expr, String))> = None;
    for (t, r) in cands {
        let v = r.0.eval(e);
        if best.as_ref().map_or(true, |(bv, _, _)| v > *bv) {
            best = Some((v, t, r));
        }
    }
    let (_, t, r) = best.expect("at least one candidate");
    (t, r)
}

/// All subsets of `items`, in binary-counter order.
pub(crate) fn subsets<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    (0..1u32 << items.len())
        .map(|mask| items.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x.clone()).collect())
        .collect()
}

pub(crate) fn model_summary(model: &crate::cqstates::AuxiliaryModel) -> String {
    let vars: Vec<String> = model.vars.iter().map(|v| format!("{}:{}", v.name, v.size)).collect();
    format!("{} support points over [{}]", model.pmf.len(), vars.join(", "))
}

/// How each system variable enters an LP: its own column, a constant, or a
/// multiple of a shared scale column.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Column(usize),
    Fixed(f64),
    Scaled(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// Index of the satisfied max-term branch (bit `i` picks option 1 of term `i`).
    pub branch: Option<usize>,
    pub witness: BTreeMap<String, f64>,
}

impl InequalitySystem {
    pub fn variable_names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn branch_count(&self) -> usize {
        1 << self.max_terms.len()
    }

    /// Expands max terms for `branch` and maps variables through `slots`.
    fn lp(&self, branch: usize, slots: &BTreeMap<&str, Slot>, ncols: usize, scale_col: Option<usize>, objective: Vec<f64>) -> Lp {
        let choice: BTreeMap<&str, &BTreeMap<String, i64>> = self
            .max_terms
            .iter()
            .enumerate()
            .map(|(i, m)| (m.name.as_str(), &m.options[branch >> i & 1]))
            .collect();
        let linear = |coeffs: &BTreeMap<String, i64>, sense: Sense, rhs: f64| -> Option<Row> {
            let mut row = vec![0.0; ncols];
            let mut rhs = rhs;
            let mut expanded: BTreeMap<&str, i64> = BTreeMap::new();
            for (k, &c) in coeffs {
                match choice.get(k.as_str()) {
                    Some(opt) => {
                        for (v, &d) in opt.iter() {
                            *expanded.entry(v.as_str()).or_insert(0) += c * d;
                        }
                    }
                    None => *expanded.entry(k.as_str()).or_insert(0) += c,
                }
            }
            for (k, c) in expanded {
                match slots[k] {
                    Slot::Column(i) => row[i] += c as f64,
                    Slot::Fixed(v) => rhs -= c as f64 * v,
                    Slot::Scaled(p) => row[scale_col.expect("scaled slot needs a scale column")] += c as f64 * p,
                }
            }
            // rows with nonnegative coefficients and rhs <= 0 hold for every x >= 0
            if sense == Sense::Ge && rhs <= 0.0 && row.iter().all(|&a| a >= 0.0) {
                return None;
            }
            Some(Row { coeffs: row, sense, rhs })
        };
        let mut rows: Vec<Row> = self.constraints.iter().filter_map(|c| linear(&c.coeffs, c.sense, c.rhs)).collect();
        for (i, m) in self.max_terms.iter().enumerate() {
            let b = branch >> i & 1;
            let mut diff = m.options[b].clone();
            for (k, v) in &m.options[1 - b] {
                *diff.entry(k.clone()).or_insert(0) -= v;
            }
            rows.extend(linear(&diff, Sense::Ge, 0.0));
        }
        Lp { n: ncols, rows: dedup_rows(rows), objective }
    }

    fn slots(&self, fixed: &BTreeMap<&str, Slot>) -> (BTreeMap<&str, Slot>, Vec<&str>) {
        let mut slots = BTreeMap::new();
        let mut cols = Vec::new();
        for v in &self.variables {
            match fixed.get(v.name.as_str()) {
                Some(s) => {
                    slots.insert(v.name.as_str(), *s);
                }
                None => {
                    slots.insert(v.name.as_str(), Slot::Column(cols.len()));
                    cols.push(v.name.as_str());
                }
            }
        }
        (slots, cols)
    }

    fn solve_checked(lp: &Lp) -> Result<LpOutcome> {
        match lp::solve(lp) {
            LpOutcome::Stalled => Err(Error::Numerical("simplex pivot budget exhausted".into())),
            LpOutcome::Optimal { x, value } => {
                let v = lp::max_violation(lp, &x);
                if v > RESIDUAL_TOL {
                    return Err(Error::Numerical(format!("LP solution violates a constraint by {v:e}")));
                }
                Ok(LpOutcome::Optimal { x, value })
            }
            other => Ok(other),
        }
    }

    /// Feasibility of `(R1, R2, R3)` with nonnegative auxiliary rates; OR over
    /// the max-term branches. The cost budget is checked by [`Self::admits`].
    pub fn feasibility(&self, p: &RatePoint) -> Result<Feasibility> {
        let fixed: BTreeMap<&str, Slot> =
            ["R1", "R2", "R3"].iter().zip(p.rates()).map(|(n, v)| (*n, Slot::Fixed(v))).collect();
        let (slots, cols) = self.slots(&fixed);
        for branch in 0..self.branch_count() {
            let lp = self.lp(branch, &slots, cols.len(), None, vec![0.0; cols.len()]);
            if let LpOutcome::Optimal { x, .. } = Self::solve_checked(&lp)? {
                let mut witness: BTreeMap<String, f64> = cols.iter().map(|c| c.to_string()).zip(x).collect();
                for (n, v) in ["R1", "R2", "R3"].iter().zip(p.rates()) {
                    witness.insert(n.to_string(), v);
                }
                return Ok(Feasibility { feasible: true, branch: Some(branch), witness });
            }
        }
        Ok(Feasibility { feasible: false, branch: None, witness: BTreeMap::new() })
    }

    pub fn feasible(&self, p: &RatePoint) -> Result<bool> {
        Ok(self.feasibility(p)?.feasible)
    }

    /// Rate feasibility together with `E[κ(X)] ≤ τ`.
    pub fn admits(&self, p: &RatePoint) -> Result<bool> {
        Ok(self.expected_cost <= p.tau + 1e-12 && self.feasible(p)?)
    }

    /// Largest value of rate `free` (0-based) with the other two fixed.
    pub fn max_rate(&self, free: usize, fixed: [(usize, f64); 2]) -> Result<f64> {
        let names = ["R1", "R2", "R3"];
        if free > 2 || fixed.iter().any(|(i, v)| *i > 2 || *i == free || !(v.is_finite() && *v >= 0.0)) || fixed[0].0 == fixed[1].0 {
            return Err(Error::Parameter("max_rate needs one free and two fixed distinct rates".into()));
        }
        let fixed_slots: BTreeMap<&str, Slot> = fixed.iter().map(|(i, v)| (names[*i], Slot::Fixed(*v))).collect();
        let (slots, cols) = self.slots(&fixed_slots);
        let target = cols.iter().position(|c| *c == names[free]).expect("free rate is a column");
        let mut objective = vec![0.0; cols.len()];
        objective[target] = 1.0;
        let mut best: Option<f64> = None;
        for branch in 0..self.branch_count() {
            match Self::solve_checked(&self.lp(branch, &slots, cols.len(), None, objective.clone()))? {
                LpOutcome::Optimal { value, .. } => best = Some(best.map_or(value, |b: f64| b.max(value))),
                LpOutcome::Unbounded => return Err(Error::Unbounded),
                _ => {}
            }
        }
        best.ok_or_else(|| Error::Infeasible(format!("no feasible point with fixed rates {fixed:?}")))
    }

    /// Rate triple maximizing `dir · R` over all branches; `None` when the
    /// system admits no point at all.
    pub fn support(&self, dir: [f64; 3]) -> Result<Option<[f64; 3]>> {
        let (slots, cols) = self.slots(&BTreeMap::new());
        let idx: Vec<usize> = ["R1", "R2", "R3"]
            .iter()
            .map(|n| cols.iter().position(|c| c == n).expect("rates are columns"))
            .collect();
        let mut objective = vec![0.0; cols.len()];
        for (i, d) in idx.iter().zip(dir) {
            objective[*i] = d;
        }
        let mut best: Option<(f64, [f64; 3])> = None;
        for branch in 0..self.branch_count() {
            match Self::solve_checked(&self.lp(branch, &slots, cols.len(), None, objective.clone()))? {
                LpOutcome::Optimal { x, value } => {
                    if best.map_or(true, |(b, _)| value > b + 1e-12) {
                        best = Some((value, [x[idx[0]], x[idx[1]], x[idx[2]]]));
                    }
                }
                LpOutcome::Unbounded => return Err(Error::Unbounded),
                _ => {}
            }
        }
        Ok(best.map(|(_, r)| r))
    }

    /// `max{λ : λ·(R1, R2, R3) feasible}`; `None` when even the origin fails.
    pub fn max_scale(&self, p: &RatePoint) -> Result<Option<f64>> {
        let fixed: BTreeMap<&str, Slot> =
            ["R1", "R2", "R3"].iter().zip(p.rates()).map(|(n, v)| (*n, Slot::Scaled(v))).collect();
        let (slots, cols) = self.slots(&fixed);
        let n = cols.len() + 1;
        let mut objective = vec![0.0; n];
        objective[n - 1] = 1.0;
        let mut best: Option<f64> = None;
        for branch in 0..self.branch_count() {
            match Self::solve_checked(&self.lp(branch, &slots, n, Some(n - 1), objective.clone()))? {
                LpOutcome::Optimal { value, .. } => best = Some(best.map_or(value, |b: f64| b.max(value))),
                LpOutcome::Unbounded => return Ok(Some(f64::INFINITY)),
                _ => {}
            }
        }
        Ok(best)
    }

    /// Feasible and not strictly inside along its own ray: `λ* ≤ 1 + 1e-9`.
    pub fn on_boundary(&self, p: &RatePoint) -> Result<bool> {
        Ok(match self.max_scale(p)? {
            Some(l) => (1.0 - BOUNDARY_TOL..=1.0 + BOUNDARY_TOL).contains(&l),
            None => false,
        })
    }

    /// Constraints violated by an explicit assignment (max terms evaluated
    /// directly), with their residuals.
    pub fn violations(&self, values: &BTreeMap<String, f64>, tol: f64) -> Vec<(usize, f64)> {
        let get = |k: &str| -> f64 {
            if let Some(m) = self.max_terms.iter().find(|m| m.name == k) {
                let eval = |o: &BTreeMap<String, i64>| o.iter().map(|(v, &c)| c as f64 * values.get(v).copied().unwrap_or(0.0)).sum::<f64>();
                eval(&m.options[0]).max(eval(&m.options[1]))
            } else {
                values.get(k).copied().unwrap_or(0.0)
            }
        };
        let mut out = Vec::new();
        if let Some(v) = values.values().find(|v| **v < -tol) {
            out.push((usize::MAX, -v));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let lhs: f64 = c.coeffs.iter().map(|(k, &a)| a as f64 * get(k)).sum();
            let r = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            if r > tol {
                out.push((i, r));
            }
        }
        out
    }

    /// Canonical constraint set after zeroing `dropped` variables: duplicates
    /// merged and constraints with an empty left side removed.
    pub fn reduced(&self, dropped: &[&str]) -> BTreeSet<(BTreeMap<String, i64>, Sense, Expr)> {
        self.constraints
            .iter()
            .map(|c| {
                let coeffs: BTreeMap<String, i64> =
                    c.coeffs.iter().filter(|(k, _)| !dropped.contains(&k.as_str())).map(|(k, v)| (k.clone(), *v)).collect();
                (coeffs, c.sense, c.expr.clone())
            })
            .filter(|(k, _, _)| !k.is_empty())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }
}

/// Keeps the tightest of rows with identical coefficients and sense.
fn dedup_rows(rows: Vec<Row>) -> Vec<Row> {
    let mut best: BTreeMap<(Vec<u64>, Sense), (usize, f64)> = BTreeMap::new();
    let mut out: Vec<Row> = Vec::new();
    for row in rows {
        let key = (row.coeffs.iter().map(|x| (x + 0.0).to_bits()).collect(), row.sense);
        match best.get_mut(&key) {
            Some((i, rhs)) => {
                let tighter = match row.sense {
                    Sense::Le => row.rhs < *rhs,
                    Sense::Ge => row.rhs > *rhs,
                    Sense::Eq => false,
                };
                if tighter {
                    *rhs = row.rhs;
                    out[*i].rhs = row.rhs;
                } else if row.sense == Sense::Eq && row.rhs != *rhs {
                    out.push(row);
                }
            }
            None => {
                best.insert(key, (out.len(), row.rhs));
                out.push(row);
            }
        }
    }
    out
}
