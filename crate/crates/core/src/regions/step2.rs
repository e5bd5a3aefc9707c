//! Bivariate coset codes for all three receivers: each receiver decodes its
//! own two codebooks, its private codebook, and the sum of the two codebooks
//! aimed at it by the others.

use std::collections::BTreeMap;

use super::{argmax, lhs, model_summary, subsets, Builder, InequalitySystem, Rhs, Sense, Theorem};
use crate::cqstates::{
    build_state_stepii, expected_cost, own_pair, pair_field, sum_pair, AuxiliaryModel, CqBroadcastChannel, CqEnsemble,
    Item, PAIRS,
};
use crate::error::{Error, Result};

pub(crate) const MAX_FIELD: u32 = 5;

pub(crate) fn v(name: &str) -> Item {
    Item::var(name)
}

pub(crate) fn u(pair: &str) -> Item {
    Item::var(&format!("U{pair}"))
}

/// `υ_j` for each receiver, capped for the exhaustive θ enumeration.
pub(crate) fn fields(model: &AuxiliaryModel) -> Result<[u32; 3]> {
    let mut out = [1; 3];
    for j in 1..=3 {
        let (a, b) = sum_pair(j);
        let f = pair_field(model, &format!("U{a}"), &format!("U{b}"))?;
        if f > MAX_FIELD {
            return Err(Error::Parameter(format!("field size {f} for receiver {j} exceeds {MAX_FIELD}")));
        }
        out[j - 1] = f;
    }
    Ok(out)
}

/// `U_ij ⊕ θ U_kj` over `F_{υ_j}`.
pub(crate) fn twisted_sum(j: usize, theta: u32, up: u32) -> Item {
    let (a, b) = sum_pair(j);
    match theta {
        0 => u(&a),
        t => Item::lin(&[(&format!("U{a}"), 1), (&format!("U{b}"), t)], up),
    }
}

/// `A(B)`: the codebooks entering receiver `j`'s sum, for `j ∈ B`.
pub(crate) fn sum_codebooks(b: &[usize]) -> Vec<String> {
    b.iter().flat_map(|&j| {
        let (x, y) = sum_pair(j);
        [x, y]
    })
    .collect()
}

pub(crate) fn theta_tuples(b: &[usize], ups: &[u32; 3]) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for &j in b {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..ups[j - 1]).map(move |x| {
                    let mut t = t.clone();
                    t.push(x);
                    t
                })
            })
            .collect();
    }
    out
}

/// Admissible `(A, B, C)` for the source bounds, in enumeration order.
pub fn source_index() -> Vec<(Vec<String>, Vec<usize>, Vec<usize>)> {
    let pairs: Vec<String> = PAIRS.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();
    for b in subsets(&[1usize, 2, 3]) {
        let excluded = sum_codebooks(&b);
        for a in subsets(&pairs) {
            if a.iter().any(|x| excluded.contains(x)) {
                continue;
            }
            for c in subsets(&[1usize, 2, 3]) {
                out.push((a.clone(), b.clone(), c));
            }
        }
    }
    out
}

pub(crate) fn theta_note(b: &[usize], theta: &[u32]) -> Option<String> {
    if b.is_empty() {
        return None;
    }
    let parts: Vec<String> = b.iter().zip(theta).map(|(j, t)| format!("theta{j} = {t}")).collect();
    Some(parts.join(", "))
}

pub(crate) fn log_sizes<'a>(mut rhs: Rhs<'a>, model: &AuxiliaryModel, a: &[String]) -> Rhs<'a> {
    for x in a {
        rhs = rhs.log(model.size(&format!("U{x}")), 1);
    }
    rhs
}

/// `S_A + M_B + K_C ≥ Θ(A, B, C)` with the maximizing θ tuple recorded.
#[allow(clippy::type_complexity)]
fn theta_bound(
    e: &CqEnsemble,
    model: &AuxiliaryModel,
    ups: &[u32; 3],
    (a, b, c): &(Vec<String>, Vec<usize>, Vec<usize>),
) -> Result<(BTreeMap<String, i64>, (super::Expr, String), Option<String>)> {
    let mut names: Vec<String> = a.iter().map(|x| format!("S{x}")).collect();
    names.extend(b.iter().map(|j| format!("M{j}")));
    names.extend(c.iter().map(|j| format!("K{j}")));
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let vc: Vec<Item> = c.iter().map(|j| v(&format!("V{j}"))).collect();
    let mut cands = Vec::new();
    for theta in theta_tuples(b, ups) {
        let mut rhs = log_sizes(Rhs::new(e), model, a);
        for &j in b {
            rhs = rhs.log(ups[j - 1], 1);
        }
        for x in &vc {
            rhs = rhs.h(1, (std::slice::from_ref(x), &[]))?;
        }
        let mut items: Vec<Item> = a.iter().map(|x| u(x)).collect();
        items.extend(b.iter().zip(&theta).map(|(&j, &t)| twisted_sum(j, t, ups[j - 1])));
        items.extend(vc.iter().cloned());
        cands.push((theta, rhs.h(-1, (&items, &[]))?.finish()));
    }
    let (theta, rhs) = argmax(cands, e);
    Ok((lhs(&refs), rhs, theta_note(b, &theta)))
}

pub fn stepii_system(model: &AuxiliaryModel, ch: &CqBroadcastChannel) -> Result<InequalitySystem> {
    let e = build_state_stepii(model, ch)?;
    let ups = fields(model)?;
    let mut vars: Vec<String> = ["R1", "R2", "R3"].iter().map(|s| s.to_string()).collect();
    for p in PAIRS {
        vars.push(format!("S{p}"));
        vars.push(format!("T{p}"));
    }
    for j in 1..=3 {
        vars.push(format!("K{j}"));
        vars.push(format!("L{j}"));
    }
    let mut bld = Builder::new(&e, vars);
    for j in 1..=3 {
        let (a, b) = sum_pair(j);
        bld.max_term(&format!("M{j}"), &[&format!("S{a}"), &format!("T{a}")], &[&format!("S{b}"), &format!("T{b}")]);
    }

    for idx in source_index() {
        let (coeffs, rhs, note) = theta_bound(&e, model, &ups, &idx)?;
        bld.push("source", coeffs, Sense::Ge, rhs, note);
    }

    for j in 1..=3usize {
        let (ji, jk) = own_pair(j);
        let (ij, kj) = sum_pair(j);
        let up = ups[j - 1];
        let y = [j - 1];
        let vj = v(&format!("V{j}"));
        let sum = v(&format!("U{j}+"));
        let fam = format!("decoder-{j}");
        for aj in subsets(&[ji.clone(), jk.clone()]) {
            let ac: Vec<String> = [&ji, &jk].into_iter().filter(|x| !aj.contains(x)).cloned().collect();
            let ua: Vec<Item> = aj.iter().map(|x| u(x)).collect();
            let uac: Vec<Item> = ac.iter().map(|x| u(x)).collect();
            let st: Vec<String> = aj.iter().flat_map(|x| [format!("S{x}"), format!("T{x}")]).collect();
            let with = |extra: &[String]| -> BTreeMap<String, i64> {
                let mut all = st.clone();
                all.extend_from_slice(extra);
                lhs(&all.iter().map(|s| s.as_str()).collect::<Vec<_>>())
            };
            let plus_ij = [format!("S{ij}"), format!("T{ij}")];
            let plus_kj = [format!("S{kj}"), format!("T{kj}")];
            let kl = [format!("K{j}"), format!("L{j}")];
            let kl_ij: Vec<String> = kl.iter().chain(&plus_ij).cloned().collect();
            let kl_kj: Vec<String> = kl.iter().chain(&plus_kj).cloned().collect();
            let cat = |xs: &[&[Item]]| -> Vec<Item> { xs.iter().flat_map(|x| x.iter().cloned()).collect() };

            // own codebooks given the sum
            let cond = cat(&[&uac, &[sum.clone(), vj.clone()]]);
            let rhs = log_sizes(Rhs::new(&e), model, &aj).hc(-1, (&ua, &[]), (&cond, &y))?.finish();
            bld.push(&fam, with(&[]), Sense::Le, rhs, None);
            // own codebooks with the sum
            let target = cat(&[&ua, &[sum.clone()]]);
            let cond = cat(&[&uac, &[vj.clone()]]);
            let rhs = log_sizes(Rhs::new(&e), model, &aj).log(up, 1).hc(-1, (&target, &[]), (&cond, &y))?.finish();
            bld.push(&fam, with(&plus_ij), Sense::Le, rhs.clone(), None);
            bld.push(&fam, with(&plus_kj), Sense::Le, rhs, None);
            // own and private codebooks given the sum
            let target = cat(&[&ua, &[vj.clone()]]);
            let cond = cat(&[&uac, &[sum.clone()]]);
            let rhs = log_sizes(Rhs::new(&e), model, &aj)
                .h(1, (std::slice::from_ref(&vj), &[]))?
                .hc(-1, (&target, &[]), (&cond, &y))?
                .finish();
            bld.push(&fam, with(&kl), Sense::Le, rhs, None);
            // everything at once
            let target = cat(&[&ua, &[vj.clone(), sum.clone()]]);
            let rhs = log_sizes(Rhs::new(&e), model, &aj)
                .log(up, 1)
                .h(1, (std::slice::from_ref(&vj), &[]))?
                .hc(-1, (&target, &[]), (&uac, &y))?
                .finish();
            bld.push(&fam, with(&kl_ij), Sense::Le, rhs.clone(), None);
            bld.push(&fam, with(&kl_kj), Sense::Le, rhs, None);
        }
        let eq: BTreeMap<String, i64> =
            [(format!("R{j}"), 1), (format!("T{ji}"), -1), (format!("T{jk}"), -1), (format!("L{j}"), -1)].into_iter().collect();
        bld.push("rate-split", eq, Sense::Eq, Rhs::new(&e).finish(), None);
    }

    let notes = vec![
        "strict bounds evaluated as their closures".to_string(),
        "A(B) is taken as the codebooks U_ij, U_kj summed for receiver j in B, matching the U_ij + theta U_kj pattern in Theta".into(),
    ];
    let cost = expected_cost(model, ch)?;
    Ok(bld.finish(Theorem::StepII, model_summary(model), cost, notes, None))
}
