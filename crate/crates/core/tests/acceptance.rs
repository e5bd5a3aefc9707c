//! One PASS/FAIL line per acceptance criterion. Exits non-zero on any failure.

use std::time::{Duration, Instant};

use cqbc::example1::{example_commutative, example_noncommuting, gamma, FACT_TOL};
use cqbc::quantum::{binary_convolution, binary_entropy as h, c, eigh, validate, von_neumann_entropy, CMatrix, DensityOperator};
use cqbc::randmodels::{baseline_pair, random_channel, random_stepii_model};
use cqbc::regions::search::directions;
use cqbc::regions::{stepii_system, stepiii_system, RatePoint};
use cqbc::sim::{non_increasing, run, SimConfig};
use cqbc::srm::{error_probability, srm, toy_spec, EnsembleEntry, StateEnsemble, COMPLETENESS_TOL, PSD_TOL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ENTROPY_TOL: f64 = 1e-10;
const HOLEVO_TOL: f64 = 1e-6;
const HELSTROM_TOL: f64 = 1e-8;
const REGRESSION_TOL: f64 = 1e-10;
const TOY_GROUP_ERROR: f64 = 0.03930335613974267;
const TOY_PAIR_ERROR: f64 = 0.039303356139742784;
const MC_TRIALS: usize = 2000;
const MC_SEED: u64 = 1;
const MC_MAX_ERROR: f64 = 0.3;
const MC_OVERSIZED_MIN_ERROR: f64 = 0.5;
const RANDOM_MODELS: u64 = 10;
const CONTAINMENT_TOL: f64 = 1e-7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    let el = t.elapsed();
    let pass = o.pass && el < budget;
    let limit = if budget == Duration::MAX { String::new() } else { format!(" of {:.0}s", budget.as_secs_f64()) };
    println!(
        "criterion {id} [{name}]: {} ({}; {:.2}s{limit})",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        el.as_secs_f64()
    );
    pass
}

fn pure(t: f64) -> DensityOperator {
    validate(CMatrix::pure(&[c(t.cos(), 0.0), c(t.sin(), 0.0)])).unwrap()
}

fn entropy_engine() -> Outcome {
    let s_half = von_neumann_entropy(&DensityOperator::maximally_mixed(2));
    let phi = 45f64.to_radians();
    let mut avg = gamma(phi, 0).scale(0.5);
    avg.add_scaled(&gamma(phi, 1), 0.5);
    let s_gamma = von_neumann_entropy(&validate(avg).unwrap());
    let oracle = h((1.0 + phi.cos()) / 2.0);
    Outcome {
        pass: (s_half - 1.0).abs() <= ENTROPY_TOL && (s_gamma - oracle).abs() <= HOLEVO_TOL,
        detail: format!("S(I/2) = {s_half}, S(gamma avg, 45deg) = {s_gamma} vs h((1+cos)/2) = {oracle}"),
    }
}

fn commutative() -> Outcome {
    let r = example_commutative(0.01, 0.05, 0.10).unwrap();
    let c1 = h(0.059) - h(0.01);
    let c2 = 1.0 - h(0.10);
    let fact_sum = r.one_minus_h_delta1 < c1 + 2.0 * c2 + FACT_TOL;
    let fact_max = r.one_minus_h_delta1 >= c1 + c2 - FACT_TOL;
    let pass = (r.tau_star_delta1 - 0.059).abs() < 1e-15
        && r.condition_i
        && r.condition_ii
        && (r.c1 - c1).abs() < 1e-12
        && (r.c2 - c2).abs() < 1e-12
        && r.feasible
        && r.fact1_sum
        && r.fact1_max
        && fact_sum
        && fact_max;
    Outcome {
        pass,
        detail: format!(
            "tau*delta1 = {}, (i) {}, (ii) {}, C = ({}, {}, {}), feasible {}, 1-h(d1) = {} vs sum {} and C1+max {}",
            r.tau_star_delta1,
            r.condition_i,
            r.condition_ii,
            r.c1,
            r.c2,
            r.c3,
            r.feasible,
            r.one_minus_h_delta1,
            r.c1 + r.c2 + r.c3,
            r.c1 + r.c2.max(r.c3)
        ),
    }
}

fn noncommuting() -> Outcome {
    let r = example_noncommuting(0.01, 0.05, 40f64.to_radians(), 45f64.to_radians()).unwrap();
    let agree = [(r.c2, r.c2_eigen), (r.c2, r.c2_system), (r.c3, r.c3_eigen), (r.c3, r.c3_system)]
        .iter()
        .all(|(a, b)| (a - b).abs() <= HOLEVO_TOL);
    Outcome {
        pass: r.condition_a && r.condition_b && r.feasible && agree,
        detail: format!(
            "(a) {}, (b) {}, C2 = {} (eig {}, system {}), C3 = {} (eig {}, system {}), feasible {}",
            r.condition_a, r.condition_b, r.c2, r.c2_eigen, r.c2_system, r.c3, r.c3_eigen, r.c3_system, r.feasible
        ),
    }
}

fn degeneration() -> Outcome {
    let extra = cqbc::regions::step3_extra_variables();
    let refs: Vec<&str> = extra.iter().map(|s| s.as_str()).collect();
    let mut matched = 0;
    let mut contained = 0;
    let mut checked_points = 0;
    for seed in 0..RANDOM_MODELS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let ch = random_channel(&mut rng, 4, [2, 2, 2]);
        let m = random_stepii_model(&mut rng, &ch);
        let s2 = stepii_system(&m, &ch).unwrap();
        let s3 = stepiii_system(&m, &ch).unwrap();
        if s3.reduced(&refs) == s2.reduced(&[]) {
            matched += 1;
        }
        let (full, reduced) = baseline_pair(&mut rng, &ch);
        let big = stepii_system(&full, &ch).unwrap();
        let small = stepii_system(&reduced, &ch).unwrap();
        let mut ok = true;
        for d in directions(3, seed) {
            if let Some(p) = small.support(d).unwrap() {
                let p = p.map(|x| (x - CONTAINMENT_TOL).max(0.0));
                checked_points += 1;
                ok &= big.feasible(&RatePoint::new(p[0], p[1], p[2], 1.0).unwrap()).unwrap();
            }
        }
        contained += ok as u32;
    }
    Outcome {
        pass: matched == RANDOM_MODELS && contained as u64 == RANDOM_MODELS && checked_points > 0,
        detail: format!(
            "{matched}/{RANDOM_MODELS} exact matches, baseline contained in {contained}/{RANDOM_MODELS} models ({checked_points} support points)"
        ),
    }
}

fn srm_lab() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut povm_ok = true;
    for overlap in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let e = StateEnsemble::new(vec![
            EnsembleEntry { label: "0".into(), prior: 0.5, state: pure(0.0) },
            EnsembleEntry { label: "1".into(), prior: 0.5, state: pure(f64::acos(overlap)) },
        ])
        .unwrap();
        let p = srm(&e).unwrap();
        let chk = p.check();
        povm_ok &= chk.min_eigenvalue >= -PSD_TOL && chk.completeness <= COMPLETENESS_TOL;
        let err = error_probability(&p, &e).unwrap();
        let d = (e.entries()[0].state.matrix() - e.entries()[1].state.matrix()).scale(0.5);
        let helstrom = 0.5 - 0.5 * eigh(&d).unwrap().values.iter().map(|l| l.abs()).sum::<f64>();
        let closed = (1.0 - (1.0 - overlap * overlap).sqrt()) / 2.0;
        worst = worst.max((err - helstrom).abs()).max((err - closed).abs());
    }
    let toy = toy_spec().unwrap().run().unwrap();
    povm_ok &= toy.check.min_eigenvalue >= -PSD_TOL && toy.check.completeness <= COMPLETENESS_TOL;
    povm_ok &= toy.pair_check.min_eigenvalue >= -PSD_TOL && toy.pair_check.completeness <= COMPLETENESS_TOL;
    let reg = (toy.error - TOY_GROUP_ERROR).abs() <= REGRESSION_TOL && (toy.pair_then_sum_error - TOY_PAIR_ERROR).abs() <= REGRESSION_TOL;
    Outcome {
        pass: worst <= HELSTROM_TOL && povm_ok && reg,
        detail: format!(
            "max |SRM - Helstrom| = {worst:e}, POVMs valid {povm_ok}, toy group error {} and pair-then-sum error {}",
            toy.error, toy.pair_then_sum_error
        ),
    }
}

fn monte_carlo() -> Outcome {
    let c1 = h(binary_convolution(0.05, 0.01)) - h(0.01);
    let c2 = 1.0 - h(0.10);
    let cfg = |n: usize, f1: f64| SimConfig::at_rates(n, 0.01, 0.10, 0.05, f1 * c1, 0.6 * c2, MC_TRIALS, MC_SEED);
    let results: Vec<_> = [12, 16, 20, 24].iter().map(|&n| run(&cfg(n, 0.6)).unwrap()).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for j in 0..3 {
        let stats: Vec<_> = results.iter().map(|r| r.receivers[j]).collect();
        let last = stats[3].rate;
        pass &= non_increasing(&stats) && last < MC_MAX_ERROR;
        detail.push(format!("Rx{} {:?}", j + 1, stats.iter().map(|s| s.rate).collect::<Vec<_>>()));
    }
    let over = run(&cfg(24, 1.4)).unwrap();
    pass &= over.receivers[0].rate > MC_OVERSIZED_MIN_ERROR;
    let again = run(&cfg(24, 0.6)).unwrap();
    pass &= again == results[3];
    detail.push(format!("Rx1 at 1.4x: {}", over.receivers[0].rate));
    Outcome { pass, detail: detail.join(", ") }
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        check(1, "entropy engine", s(1), entropy_engine),
        check(2, "commutative example", s(2), commutative),
        check(3, "non-commuting example", s(5), noncommuting),
        check(4, "degeneration and baseline", Duration::MAX, degeneration),
        check(5, "SRM lab", s(10), srm_lab),
        check(6, "Monte Carlo", s(180), monte_carlo),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
