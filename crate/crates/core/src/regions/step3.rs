//! Step II plus a common codebook `W` decoded by everyone and univariate
//! codebooks `Q_ji`, all information quantities conditioned on `W`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::step2::{fields, log_sizes, theta_note, theta_tuples, twisted_sum, u, v};
use super::{argmax, lhs, model_summary, subsets, Builder, Expr, InequalitySystem, Rhs, Sense, Theorem};
use crate::cqstates::{
    build_state_stepiii, expected_cost, own_pair, sum_pair, AuxiliaryModel, CqBroadcastChannel, CqEnsemble, Item, PAIRS,
};
use crate::error::Result;

/// Rate parts that exist only in this system.
pub fn extra_variables() -> Vec<String> {
    let mut out = vec!["alpha".to_string()];
    out.extend((1..=3).map(|j| format!("alpha{j}")));
    out.extend(PAIRS.iter().map(|p| format!("beta{p}")));
    out.extend(PAIRS.iter().map(|p| format!("nu{p}")));
    out
}

fn q(pair: &str) -> Item {
    Item::var(&format!("Q{pair}"))
}

/// Admissible `(A, B, C, D)`, in enumeration order.
pub fn source_index() -> Vec<(Vec<String>, Vec<usize>, Vec<usize>, Vec<String>)> {
    let pairs: Vec<String> = PAIRS.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();
    for d in subsets(&pairs) {
        for (a, b, c) in super::step2::source_index() {
            out.push((a, b, c, d.clone()));
        }
    }
    out
}

type Built = (BTreeMap<String, i64>, (Expr, String), Option<String>);

fn theta_bound(
    e: &CqEnsemble,
    model: &AuxiliaryModel,
    ups: &[u32; 3],
    (a, b, c, d): &(Vec<String>, Vec<usize>, Vec<usize>, Vec<String>),
) -> Result<Built> {
    let w = [v("W")];
    let mut names: Vec<String> = a.iter().map(|x| format!("S{x}")).collect();
    names.extend(b.iter().map(|j| format!("M{j}")));
    names.extend(c.iter().map(|j| format!("K{j}")));
    names.extend(d.iter().map(|x| format!("beta{x}")));
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let vc: Vec<Item> = c.iter().map(|j| v(&format!("V{j}"))).collect();
    let qd: Vec<Item> = d.iter().map(|x| q(x)).collect();
    let mut cands = Vec::new();
    for theta in theta_tuples(b, ups) {
        let mut rhs = log_sizes(Rhs::new(e), model, a);
        for &j in b {
            rhs = rhs.log(ups[j - 1], 1);
        }
        for x in vc.iter().chain(&qd) {
            rhs = rhs.hc(1, (std::slice::from_ref(x), &[]), (&w, &[]))?;
        }
        let mut items: Vec<Item> = a.iter().map(|x| u(x)).collect();
        items.extend(b.iter().zip(&theta).map(|(&j, &t)| twisted_sum(j, t, ups[j - 1])));
        items.extend(vc.iter().cloned());
        items.extend(qd.iter().cloned());
        cands.push((theta, rhs.hc(-1, (&items, &[]), (&w, &[]))?.finish()));
    }
    let (theta, rhs) = argmax(cands, e);
    Ok((lhs(&refs), rhs, theta_note(b, &theta)))
}

fn given_w<'e>(r: Rhs<'e>, vj: &Item, w: &[Item]) -> Result<Rhs<'e>> {
    r.hc(1, (std::slice::from_ref(vj), &[]), (w, &[]))
}

fn cat(xs: &[&[Item]]) -> Vec<Item> {
    xs.iter().flat_map(|x| x.iter().cloned()).collect()
}

fn names(xs: &[&[String]]) -> BTreeMap<String, i64> {
    let all: Vec<&str> = xs.iter().flat_map(|x| x.iter().map(|s| s.as_str())).collect();
    lhs(&all)
}

pub fn stepiii_system(model: &AuxiliaryModel, ch: &CqBroadcastChannel) -> Result<InequalitySystem> {
    let e = build_state_stepiii(model, ch)?;
    let ups = fields(model)?;
    let mut vars: Vec<String> = ["R1", "R2", "R3"].iter().map(|s| s.to_string()).collect();
    vars.extend(extra_variables());
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

    let index = source_index();
    let built: Vec<Built> = index.par_iter().map(|idx| theta_bound(&e, model, &ups, idx)).collect::<Result<_>>()?;
    for (coeffs, rhs, note) in built {
        bld.push("source", coeffs, Sense::Ge, rhs, note);
    }

    let w = v("W");
    for j in 1..=3usize {
        let (ji, jk) = own_pair(j);
        let (ij, kj) = sum_pair(j);
        let up = ups[j - 1];
        let y = [j - 1];
        let vj = v(&format!("V{j}"));
        let sum = v(&format!("U{j}+"));
        let fam = format!("decoder-{j}");
        let own = [ji.clone(), jk.clone()];
        let plus_ij = [format!("S{ij}"), format!("T{ij}")];
        let plus_kj = [format!("S{kj}"), format!("T{kj}")];
        let kl = [format!("K{j}"), format!("L{j}")];
        let wv = [w.clone()];
        for aj in subsets(&own) {
            for cj in subsets(&own) {
                let comp = |s: &[String]| -> Vec<String> { own.iter().filter(|x| !s.contains(x)).cloned().collect() };
                let (ac, cc) = (comp(&aj), comp(&cj));
                let ua: Vec<Item> = aj.iter().map(|x| u(x)).collect();
                let uac: Vec<Item> = ac.iter().map(|x| u(x)).collect();
                let qc: Vec<Item> = cj.iter().map(|x| q(x)).collect();
                let qcc: Vec<Item> = cc.iter().map(|x| q(x)).collect();
                let base: Vec<String> = aj
                    .iter()
                    .flat_map(|x| [format!("S{x}"), format!("T{x}")])
                    .chain(cj.iter().flat_map(|x| [format!("beta{x}"), format!("nu{x}")]))
                    .collect();
                let start = || -> Result<Rhs<'_>> {
                    log_sizes(Rhs::new(&e), model, &aj).hc(1, (&qc, &[]), (&cat(&[&qcc, &wv]), &[]))
                };
                // own codebooks given the sum
                let cond = cat(&[&uac, &qcc, &[sum.clone(), vj.clone(), w.clone()]]);
                let rhs = start()?.hc(-1, (&cat(&[&ua, &qc]), &[]), (&cond, &y))?.finish();
                bld.push(&fam, names(&[&base]), Sense::Le, rhs, None);
                // own codebooks with the sum
                let target = cat(&[&ua, &qc, &[sum.clone()]]);
                let cond = cat(&[&uac, &qcc, &[vj.clone(), w.clone()]]);
                let rhs = start()?.log(up, 1).hc(-1, (&target, &[]), (&cond, &y))?.finish();
                bld.push(&fam, names(&[&base, &plus_ij]), Sense::Le, rhs.clone(), None);
                bld.push(&fam, names(&[&base, &plus_kj]), Sense::Le, rhs, None);
                // own and private codebooks given the sum
                let target = cat(&[&ua, &qc, &[vj.clone()]]);
                let cond = cat(&[&uac, &qcc, &[sum.clone(), w.clone()]]);
                let rhs = given_w(start()?, &vj, &wv)?.hc(-1, (&target, &[]), (&cond, &y))?.finish();
                bld.push(&fam, names(&[&base, &kl]), Sense::Le, rhs, None);
                // everything at once
                let target = cat(&[&ua, &qc, &[vj.clone(), sum.clone()]]);
                let cond = cat(&[&uac, &qcc, &[w.clone()]]);
                let rhs = given_w(start()?.log(up, 1), &vj, &wv)?.hc(-1, (&target, &[]), (&cond, &y))?.finish();
                bld.push(&fam, names(&[&base, &kl, &plus_ij]), Sense::Le, rhs.clone(), None);
                bld.push(&fam, names(&[&base, &kl, &plus_kj]), Sense::Le, rhs, None);
            }
        }
        // W decoded together with everything of receiver j
        let all_own: Vec<String> = own
            .iter()
            .flat_map(|x| [format!("S{x}"), format!("T{x}"), format!("beta{x}"), format!("nu{x}")])
            .chain(["alpha".to_string()])
            .chain(kl.iter().cloned())
            .collect();
        let uj: Vec<Item> = own.iter().map(|x| u(x)).collect();
        let qj: Vec<Item> = own.iter().map(|x| q(x)).collect();
        let start = || -> Result<Rhs<'_>> {
            let r = log_sizes(Rhs::new(&e), model, &own).hc(1, (&qj, &[]), (&wv, &[]))?;
            given_w(r, &vj, &wv)?.h(1, (&wv, &[]))
        };
        let target = cat(&[&uj, &qj, &[w.clone(), vj.clone()]]);
        let rhs = start()?.hc(-1, (&target, &[]), (std::slice::from_ref(&sum), &y))?.finish();
        bld.push(&format!("{fam}-w"), names(&[&all_own]), Sense::Le, rhs, None);
        let target = cat(&[&uj, &qj, &[w.clone(), vj.clone(), sum.clone()]]);
        let rhs = start()?.log(up, 1).hc(-1, (&target, &[]), (&[], &y))?.finish();
        let note = Some("K_ij read as T_ij; log v_j added for the decoded sum".to_string());
        bld.push(&format!("{fam}-w"), names(&[&all_own, &plus_ij]), Sense::Le, rhs.clone(), note.clone());
        let note14 = Some("second copy of the previous bound read with S_kj + T_kj".to_string());
        bld.push(&format!("{fam}-w"), names(&[&all_own, &plus_kj]), Sense::Le, rhs, note14);

        let order: BTreeMap<String, i64> = [("alpha".to_string(), 1), (format!("alpha{j}"), -1)].into_iter().collect();
        bld.push("common-order", order, Sense::Ge, Rhs::new(&e).finish(), None);
        let eq: BTreeMap<String, i64> = [
            (format!("R{j}"), 1),
            (format!("alpha{j}"), -1),
            (format!("nu{ji}"), -1),
            (format!("nu{jk}"), -1),
            (format!("T{ji}"), -1),
            (format!("T{jk}"), -1),
            (format!("L{j}"), -1),
        ]
        .into_iter()
        .collect();
        bld.push("rate-split", eq, Sense::Eq, Rhs::new(&e).finish(), None);
    }

    let notes = vec![
        "strict bounds evaluated as their closures; alpha > alpha_j relaxed to alpha >= alpha_j".to_string(),
        "Theta uses the sum pattern U_ij + theta U_kj with A(B) = {ij, kj}, and Q_D joins the subtracted joint entropy".into(),
        "sum over d in D read as sum of H(Q_d|W)".into(),
        "in the two bounds carrying S_ij + K_ij, K_ij is read as T_ij; the duplicated bound is read with S_kj + T_kj".into(),
        "the W-decoding bounds add H(W) for the W codebook and log v_j for the decoded sum".into(),
    ];
    let cost = expected_cost(model, ch)?;
    Ok(bld.finish(Theorem::StepIII, model_summary(model), cost, notes, None))
}
