//! Seeded random channels and auxiliary models.

use rand::Rng;

use crate::cqstates::{AuxVar, AuxiliaryModel, CqBroadcastChannel, Fusion, PmfEntry, product_space};
use crate::quantum::{c, validate, CMatrix, DensityOperator};

/// `A A† / tr(A A†)` for a `dim × rank` matrix with uniform entries.
pub fn random_state<R: Rng>(rng: &mut R, dim: usize, rank: usize) -> DensityOperator {
    let a: Vec<Vec<_>> = (0..dim)
        .map(|_| (0..rank).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
        .collect();
    let mut m = CMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = (0..rank).map(|k| a[i][k] * a[j][k].conj()).sum();
        }
    }
    let t = m.trace().re;
    validate(m.scale(1.0 / t)).expect("gram matrices are states")
}

/// `n` inputs labeled `x0, x1, ...` with random rank-2 states and zero cost.
pub fn random_channel<R: Rng>(rng: &mut R, n: usize, dims: [usize; 3]) -> CqBroadcastChannel {
    let d: usize = dims.iter().product();
    let states = (0..n).map(|_| random_state(rng, d, 2.min(d)).into_matrix()).collect();
    CqBroadcastChannel::new((0..n).map(|i| format!("x{i}")).collect(), dims, states, vec![0.0; n])
        .expect("random channel is valid")
}

/// Uniform point of the probability simplex.
pub fn dirichlet<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

pub const STEPII_U: [&str; 6] = ["U12", "U13", "U21", "U23", "U31", "U32"];
pub const V: [&str; 3] = ["V1", "V2", "V3"];

fn vars(names: &[&str], size: u32) -> Vec<AuxVar> {
    names.iter().map(|n| AuxVar { name: n.to_string(), size }).collect()
}

fn with_map<R: Rng>(rng: &mut R, vars: Vec<AuxVar>, pmf: Vec<f64>, inputs: usize) -> AuxiliaryModel {
    let sizes: Vec<u32> = vars.iter().map(|v| v.size).collect();
    let pts = product_space(&sizes);
    let f: Vec<usize> = (0..pts.len()).map(|_| rng.gen_range(0..inputs)).collect();
    let entries = pts.iter().zip(&pmf).map(|(p, &q)| PmfEntry { point: p.clone(), p: q }).collect();
    let fusion = pts.iter().zip(&f).map(|(p, &x)| crate::cqstates::FusionEntry { point: p.clone(), x: format!("x{x}") }).collect();
    AuxiliaryModel::new(vars, entries, Fusion::Map(fusion)).expect("random model is valid")
}

/// Binary `U_ji` and `V_j` with a uniformly random joint PMF and a random
/// deterministic fusion map into the channel inputs.
pub fn random_stepii_model<R: Rng>(rng: &mut R, ch: &CqBroadcastChannel) -> AuxiliaryModel {
    let mut v = vars(&STEPII_U, 2);
    v.extend(vars(&V, 2));
    let pmf = dirichlet(rng, 1 << 9);
    with_map(rng, v, pmf, ch.inputs().len())
}

/// Binary `U2, U3, V1, V2, V3` with a random joint PMF and fusion map.
pub fn random_thm1_model<R: Rng>(rng: &mut R, ch: &CqBroadcastChannel) -> AuxiliaryModel {
    let v = vars(&["U2", "U3", "V1", "V2", "V3"], 2);
    let pmf = dirichlet(rng, 1 << 5);
    with_map(rng, v, pmf, ch.inputs().len())
}

/// A model whose `U_ji` are independent uniform bits independent of the
/// `V_j`, with the input drawn from `p(x | u, v)`; returned with its
/// reduction to `(V1, V2, V3, X)`. The `V_j` are independent bits so that
/// the reduced region is not empty.
pub fn baseline_pair<R: Rng>(rng: &mut R, ch: &CqBroadcastChannel) -> (AuxiliaryModel, AuxiliaryModel) {
    let nx = ch.inputs().len() as u32;
    let q: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..0.9)).collect();
    let pv: Vec<f64> = product_space(&[2; 3])
        .iter()
        .map(|v| v.iter().zip(&q).map(|(&b, &p)| if b == 1 { p } else { 1.0 - p }).product())
        .collect();
    let cond: Vec<Vec<f64>> = (0..1 << 9).map(|_| dirichlet(rng, nx as usize)).collect();
    let mut full_vars = vars(&STEPII_U, 2);
    full_vars.extend(vars(&V, 2));
    full_vars.push(AuxVar { name: "X".into(), size: nx });
    let mut full = Vec::new();
    let mut reduced = vec![0.0; 8 * nx as usize];
    for (i, point) in product_space(&[2; 9]).into_iter().enumerate() {
        let vi = (point[6] * 4 + point[7] * 2 + point[8]) as usize;
        for x in 0..nx {
            let p = pv[vi] / 64.0 * cond[i][x as usize];
            let mut pt = point.clone();
            pt.push(x);
            full.push(PmfEntry { point: pt, p });
            reduced[vi * nx as usize + x as usize] += p;
        }
    }
    let full = AuxiliaryModel::new(full_vars, full, Fusion::Coordinate("X".into())).expect("valid");
    let mut red_vars = vars(&V, 2);
    red_vars.push(AuxVar { name: "X".into(), size: nx });
    let red_pmf = product_space(&[2, 2, 2, nx])
        .into_iter()
        .map(|p| {
            let i = ((p[0] * 4 + p[1] * 2 + p[2]) * nx + p[3]) as usize;
            PmfEntry { point: p, p: reduced[i] }
        })
        .collect();
    let reduced = AuxiliaryModel::new(red_vars, red_pmf, Fusion::Coordinate("X".into())).expect("valid");
    (full, reduced)
}
