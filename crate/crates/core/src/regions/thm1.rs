//! Two-codebook-sum system: Rx1 decodes `U2 ⊕ U3` alongside its own message.

use std::collections::BTreeMap;

use super::{argmax, lhs, model_summary, subsets, Builder, InequalitySystem, Rhs, Sense, Theorem, ThetaReport};
use crate::cqstates::{build_state_thm1, expected_cost, pair_field, AuxiliaryModel, CqBroadcastChannel, Item};
use crate::error::Result;

const VARS: [&str; 12] = ["R1", "R2", "R3", "K1", "K2", "K3", "L2", "L3", "S2", "T2", "S3", "T3"];

fn v(name: &str) -> Item {
    Item::var(name)
}

/// `U2 ⊕ θ U3` over `F_υ`.
fn twisted(theta: u32, up: u32) -> Item {
    match theta {
        0 => v("U2"),
        t => Item::lin(&[("U2", 1), ("U3", t)], up),
    }
}

pub fn thm1_system(model: &AuxiliaryModel, ch: &CqBroadcastChannel) -> Result<InequalitySystem> {
    let e = build_state_thm1(model, ch)?;
    let up = pair_field(model, "U2", "U3")?;
    let mut b = Builder::new(&e, VARS.iter().map(|s| s.to_string()).collect());
    b.max_term("M", &["S2", "T2"], &["S3", "T3"]);

    for a in subsets(&[2, 3]) {
        for bb in subsets(&[1, 2, 3]) {
            let mut coeffs: Vec<String> = a.iter().map(|j| format!("S{j}")).collect();
            coeffs.extend(bb.iter().map(|j| format!("K{j}")));
            let mut items: Vec<Item> = a.iter().map(|j| v(&format!("U{j}"))).collect();
            let mut rhs = Rhs::new(&e).log(up, a.len() as i64);
            for j in &bb {
                let vj = [v(&format!("V{j}"))];
                rhs = rhs.h(1, (&vj, &[]))?;
                items.push(vj[0].clone());
            }
            let rhs = rhs.h(-1, (&items, &[]))?.finish();
            let refs: Vec<&str> = coeffs.iter().map(|s| s.as_str()).collect();
            b.push("source", lhs(&refs), Sense::Ge, rhs, None);
        }
    }

    let thetas: Vec<u32> = (0..up).collect();
    let cover = |theta: u32| -> Result<_> { Ok(Rhs::new(&e).log(up, 1).h(-1, (&[twisted(theta, up)], &[]))?.finish()) };
    let cands = thetas.iter().map(|&t| Ok((t, cover(t)?))).collect::<Result<Vec<_>>>()?;
    let (theta, sum_rhs) = argmax(cands.clone(), &e);
    let note = Some(format!("theta = {theta}"));
    let h_of = |t: u32| e.cq_entropy(&[twisted(t, up)], &[]);
    let nonzero = argmax(cands.into_iter().filter(|(t, _)| *t != 0).collect::<Vec<_>>(), &e);
    let theta_report = ThetaReport {
        theta_all: theta,
        value_all: h_of(theta)?,
        theta_nonzero: (up > 1).then_some(nonzero.0),
        value_nonzero: if up > 1 { Some(h_of(nonzero.0)?) } else { None },
    };
    b.push("sum-cover", lhs(&["M"]), Sense::Ge, sum_rhs.clone(), note.clone());
    for bb in subsets(&[1, 2, 3]).into_iter().filter(|s| !s.is_empty()) {
        let mut coeffs: Vec<String> = bb.iter().map(|j| format!("K{j}")).collect();
        coeffs.push("M".into());
        let refs: Vec<&str> = coeffs.iter().map(|s| s.as_str()).collect();
        b.push("sum-cover", lhs(&refs), Sense::Ge, sum_rhs.clone(), note.clone());
    }

    let (v1, u) = ([v("V1")], [v("U")]);
    b.push("decoder-1", lhs(&["R1", "K1"]), Sense::Le, Rhs::new(&e).mi(1, (&v1, &[]), (&u, &[0]))?.finish(), None);
    let v1u = [v("V1"), v("U")];
    let rhs = Rhs::new(&e).h(1, (&v1, &[]))?.hc(-1, (&v1u, &[]), (&[], &[0]))?.log(up, 1).finish();
    b.push("decoder-1", lhs(&["R1", "K1", "M"]), Sense::Le, rhs, None);

    for j in [2usize, 3] {
        let (vj, uj) = ([v(&format!("V{j}"))], [v(&format!("U{j}"))]);
        let y = [j - 1];
        let n = |p: &str| format!("{p}{j}");
        let (l, k, s, t) = (n("L"), n("K"), n("S"), n("T"));
        let rhs = Rhs::new(&e).mi(1, (&vj, &[]), (&uj, &y))?.finish();
        b.push(&format!("decoder-{j}"), lhs(&[&l, &k]), Sense::Le, rhs, None);
        let rhs = Rhs::new(&e).log(up, 1).hc(-1, (&uj, &[]), (&vj, &y))?.finish();
        b.push(&format!("decoder-{j}"), lhs(&[&s, &t]), Sense::Le, rhs, None);
        let ujvj = [uj[0].clone(), vj[0].clone()];
        let rhs = Rhs::new(&e).h(1, (&vj, &[]))?.hc(-1, (&ujvj, &[]), (&[], &y))?.log(up, 1).finish();
        b.push(&format!("decoder-{j}"), lhs(&[&l, &k, &s, &t]), Sense::Le, rhs, None);
        let eq: BTreeMap<String, i64> = [(n("R"), 1), (t, -1), (l, -1)].into_iter().collect();
        b.push("rate-split", eq, Sense::Eq, Rhs::new(&e).finish(), None);
    }

    let notes = vec![
        "strict bounds evaluated as their closures".to_string(),
        "min over theta ranges over all of F_v including theta = 0; the theta != 0 minimum is reported separately".into(),
        "the third per-receiver bound's H(U_j;V_j|Y_j) is read as the joint entropy H(U_j,V_j|Y_j)".into(),
        "K2, K3 are declared alongside K1 since the source bounds sum K over subsets of {1,2,3}".into(),
    ];
    let cost = expected_cost(model, ch)?;
    Ok(b.finish(Theorem::Thm1, model_summary(model), cost, notes, Some(theta_report)))
}
