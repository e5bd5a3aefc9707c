//! Region scans over a family of auxiliary models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lp::{self, Lp, LpOutcome, Row};
use super::{stepii_system, thm1_system, InequalitySystem, RatePoint, Sense, Theorem};
use crate::cqstates::{AuxiliaryModel, CqBroadcastChannel, PmfEntry};
use crate::error::{Error, Result};

const POINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomFamily {
    pub base: AuxiliaryModel,
    pub count: usize,
}

/// Models over fixed alphabets: an explicit list, or random reweightings of
/// a base model's support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySpec {
    pub theorem: Theorem,
    pub tau: f64,
    #[serde(default)]
    pub models: Vec<AuxiliaryModel>,
    #[serde(default)]
    pub random: Option<RandomFamily>,
    /// Random search directions on top of the axes, pairs and the diagonal.
    #[serde(default)]
    pub directions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSample {
    pub model_id: usize,
    pub r: [f64; 3],
    pub feasible: bool,
    pub boundary: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub seed: u64,
    pub models: usize,
    /// Models excluded by the cost budget.
    pub over_budget: Vec<usize>,
    pub samples: Vec<RegionSample>,
    pub hull: Vec<[f64; 3]>,
}

impl FamilySpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// The models in id order; random members are drawn from `seed`.
    pub fn expand(&self, seed: u64) -> Result<Vec<AuxiliaryModel>> {
        let mut out = self
            .models
            .iter()
            .map(|m| AuxiliaryModel::new(m.vars.clone(), m.pmf.clone(), m.fusion.clone()))
            .collect::<Result<Vec<_>>>()?;
        if let Some(r) = &self.random {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..r.count {
                // uniform on the simplex via normalized exponentials
                let w: Vec<f64> = r.base.pmf.iter().map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let total: f64 = w.iter().sum();
                let pmf = r.base.pmf.iter().zip(&w).map(|(e, x)| PmfEntry { point: e.point.clone(), p: x / total }).collect();
                out.push(AuxiliaryModel::new(r.base.vars.clone(), pmf, r.base.fusion.clone())?);
            }
        }
        if out.is_empty() {
            return Err(Error::Model("empty model family".into()));
        }
        Ok(out)
    }
}

pub fn directions(extra: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut out = vec![
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [1.0, 1.0, 1.0],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d1f5);
    for _ in 0..extra {
        out.push([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
    }
    out
}

fn build(theorem: Theorem, model: &AuxiliaryModel, ch: &CqBroadcastChannel) -> Result<InequalitySystem> {
    match theorem {
        Theorem::Thm1 => thm1_system(model, ch),
        Theorem::StepII => stepii_system(model, ch),
        Theorem::StepIII => Err(Error::Parameter("region search supports thm1 and step2 only".into())),
    }
}

fn push_unique(points: &mut Vec<[f64; 3]>, p: [f64; 3]) {
    if !points.iter().any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= POINT_TOL)) {
        points.push(p);
    }
}

/// Support points of each model's region along the search directions.
pub fn search_region(ch: &CqBroadcastChannel, spec: &FamilySpec, seed: u64) -> Result<SearchResult> {
    let models = spec.expand(seed)?;
    let dirs = directions(spec.directions, seed);
    let per_model: Vec<Result<Option<Vec<RegionSample>>>> = models
        .par_iter()
        .enumerate()
        .map(|(id, m)| {
            let sys = build(spec.theorem, m, ch)?;
            if sys.expected_cost > spec.tau + 1e-12 {
                return Ok(None);
            }
            let mut pts = Vec::new();
            for d in &dirs {
                if let Some(p) = sys.support(*d)? {
                    push_unique(&mut pts, p.map(|x| if x.abs() < POINT_TOL { 0.0 } else { x }));
                }
            }
            pts.iter()
                .map(|&r| {
                    let rp = RatePoint::new(r[0].max(0.0), r[1].max(0.0), r[2].max(0.0), spec.tau)?;
                    Ok(RegionSample { model_id: id, r, feasible: sys.feasible(&rp)?, boundary: sys.on_boundary(&rp)? })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        })
        .collect();
    let mut samples = Vec::new();
    let mut over_budget = Vec::new();
    for (id, r) in per_model.into_iter().enumerate() {
        match r? {
            Some(s) => samples.extend(s),
            None => over_budget.push(id),
        }
    }
    let mut union: Vec<[f64; 3]> = Vec::new();
    for s in samples.iter().filter(|s| s.feasible) {
        push_unique(&mut union, s.r);
    }
    Ok(SearchResult { seed, models: models.len(), over_budget, samples, hull: extreme_points(&union) })
}

/// Points not expressible as a convex combination of the others, in input order.
pub fn extreme_points(points: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let others: Vec<&[f64; 3]> = points.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, q)| q).collect();
        if others.is_empty() {
            out.push(*p);
            continue;
        }
        let n = others.len();
        let mut rows: Vec<Row> = (0..3)
            .map(|c| Row { coeffs: others.iter().map(|q| q[c]).collect(), sense: Sense::Eq, rhs: p[c] })
            .collect();
        rows.push(Row { coeffs: vec![1.0; n], sense: Sense::Eq, rhs: 1.0 });
        let inside = matches!(lp::solve(&Lp { n, rows, objective: vec![0.0; n] }), LpOutcome::Optimal { .. });
        if !inside {
            out.push(*p);
        }
    }
    out
}
