//! The three-user example: Rx1 sees `x1 ⊕ x2 ⊕ x3` through a flipping BSC,
//! Rx2 and Rx3 see their own bit either through BSCs (commutative case) or
//! as non-orthogonal pure qubits (non-commuting case).

use serde::Serialize;

use crate::cqstates::{AuxVar, AuxiliaryModel, CqBroadcastChannel};
use crate::error::{Error, Result};
use crate::quantum::{binary_convolution, binary_entropy as h, c, validate, von_neumann_entropy, CMatrix};
use crate::regions::{thm1_system, InequalitySystem, RatePoint};

/// `σ_δ(x) = (1−δ)|1−x⟩⟨1−x| + δ|x⟩⟨x|`.
pub fn sigma(delta: f64, x: u32) -> CMatrix {
    if x == 0 {
        CMatrix::diag(&[delta, 1.0 - delta])
    } else {
        CMatrix::diag(&[1.0 - delta, delta])
    }
}

/// `γ(0) = |0⟩⟨0|`, `γ(1) = |v_φ⟩⟨v_φ|` with `v_φ = (cos φ, sin φ)`.
pub fn gamma(phi: f64, x: u32) -> CMatrix {
    if x == 0 {
        CMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0)])
    } else {
        CMatrix::pure(&[c(phi.cos(), 0.0), c(phi.sin(), 0.0)])
    }
}

pub fn input_labels() -> Vec<String> {
    (0..8u32).map(|i| format!("{}{}{}", i >> 2 & 1, i >> 1 & 1, i & 1)).collect()
}

fn bits(label: &str) -> [u32; 3] {
    let b: Vec<u32> = label.bytes().map(|c| (c - b'0') as u32).collect();
    [b[0], b[1], b[2]]
}

fn check_crossover(name: &str, d: f64) -> Result<()> {
    if (0.0..=0.5).contains(&d) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} = {d} outside [0, 1/2]")))
    }
}

fn build(delta1: f64, rx: impl Fn(usize, u32) -> CMatrix) -> Result<CqBroadcastChannel> {
    check_crossover("delta1", delta1)?;
    let labels = input_labels();
    let mut states = Vec::new();
    let mut cost = Vec::new();
    for l in &labels {
        let [x1, x2, x3] = bits(l);
        states.push(sigma(delta1, x1 ^ x2 ^ x3).kron(&rx(2, x2)).kron(&rx(3, x3)));
        cost.push(x1 as f64);
    }
    CqBroadcastChannel::new(labels, [2, 2, 2], states, cost)
}

/// `ρ_x = σ_δ1(x1⊕x2⊕x3) ⊗ σ_δ(x2) ⊗ σ_δ(x3)`, cost `x1`.
pub fn commutative_channel(delta1: f64, delta: f64) -> Result<CqBroadcastChannel> {
    check_crossover("delta", delta)?;
    build(delta1, |_, x| sigma(delta, x))
}

/// `ρ_x = σ_δ1(x1⊕x2⊕x3) ⊗ γ_φ2(x2) ⊗ γ_φ3(x3)`, cost `x1`. Angles in radians.
pub fn noncommuting_channel(delta1: f64, phi2: f64, phi3: f64) -> Result<CqBroadcastChannel> {
    build(delta1, |j, x| gamma(if j == 2 { phi2 } else { phi3 }, x))
}

/// U2, U3 uniform bits, V1 ~ Ber(τ), V2 = U2, V3 = U3, input `(v1, u2, u3)`.
pub fn thm1_model(tau: f64) -> Result<AuxiliaryModel> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Parameter(format!("tau = {tau} outside [0, 1]")));
    }
    let vars = ["U2", "U3", "V1", "V2", "V3"].iter().map(|n| AuxVar { name: n.to_string(), size: 2 }).collect();
    AuxiliaryModel::from_fn(
        vars,
        |p| {
            let [u2, u3, v1, v2, v3] = [p[0], p[1], p[2], p[3], p[4]];
            if v2 != u2 || v3 != u3 {
                return 0.0;
            }
            0.25 * if v1 == 1 { tau } else { 1.0 - tau }
        },
        |p| format!("{}{}{}", p[2], p[0], p[1]),
    )
}

/// One rhs constant of the generated system, named by the expression that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantRow {
    pub family: String,
    pub lhs: String,
    pub rhs: f64,
    pub provenance: String,
}

fn constants(sys: &InequalitySystem) -> Vec<ConstantRow> {
    sys.constraints
        .iter()
        .filter(|c| c.family != "rate-split")
        .map(|c| ConstantRow {
            family: c.family.clone(),
            lhs: c.coeffs.iter().map(|(k, v)| if *v == 1 { k.clone() } else { format!("{v}{k}") }).collect::<Vec<_>>().join("+"),
            rhs: c.rhs,
            provenance: c.provenance.clone(),
        })
        .collect()
}

/// The rhs of the unique constraint of `family` on exactly `vars`.
fn rhs_of(sys: &InequalitySystem, family: &str, vars: &[&str]) -> Result<f64> {
    sys.constraints
        .iter()
        .find(|c| c.family == family && c.coeffs.len() == vars.len() && vars.iter().all(|v| c.coeffs.get(*v) == Some(&1)))
        .map(|c| c.rhs)
        .ok_or_else(|| Error::Model(format!("no {family} bound on {vars:?}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutativeReport {
    pub delta1: f64,
    pub tau: f64,
    pub delta: f64,
    pub tau_star_delta1: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `τ∗δ1 < δ`
    pub condition_i: bool,
    /// `h(δ) < (1 + h(τ∗δ1))/2`
    pub condition_ii: bool,
    pub one_minus_h_delta1: f64,
    /// `1 − h(δ1) < C1 + C2 + C3`
    pub fact1_sum: bool,
    /// `1 − h(δ1) ≥ C1 + max{C2, C3}`
    pub fact1_max: bool,
    pub expected_cost: f64,
    pub feasible: bool,
    pub boundary: bool,
    pub constants: Vec<ConstantRow>,
}

/// Comparison slack for the two capacity-sum checks.
pub const FACT_TOL: f64 = 1e-9;

pub fn example_commutative(delta1: f64, tau: f64, delta: f64) -> Result<CommutativeReport> {
    check_crossover("tau", tau)?;
    let ch = commutative_channel(delta1, delta)?;
    let sys = thm1_system(&thm1_model(tau)?, &ch)?;
    let ts = binary_convolution(tau, delta1);
    let c1 = h(ts) - h(delta1);
    let c2 = 1.0 - h(delta);
    let base = 1.0 - h(delta1);
    let p = RatePoint::new(c1, c2, c2, tau)?;
    Ok(CommutativeReport {
        delta1,
        tau,
        delta,
        tau_star_delta1: ts,
        c1,
        c2,
        c3: c2,
        condition_i: ts < delta,
        condition_ii: h(delta) < (1.0 + h(ts)) / 2.0,
        one_minus_h_delta1: base,
        fact1_sum: base < c1 + 2.0 * c2 + FACT_TOL,
        fact1_max: base >= c1 + c2 - FACT_TOL,
        expected_cost: sys.expected_cost,
        feasible: sys.admits(&p)?,
        boundary: sys.on_boundary(&p)?,
        constants: constants(&sys),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NoncommutingReport {
    pub delta1: f64,
    pub tau: f64,
    pub phi2_deg: f64,
    pub phi3_deg: f64,
    pub c1: f64,
    /// `h((1 + cos φ_k)/2)`
    pub c2: f64,
    pub c3: f64,
    /// Entropy of the uniform γ-ensemble average, by eigensolve.
    pub c2_eigen: f64,
    pub c3_eigen: f64,
    /// The same quantity read off the generated decoder bound.
    pub c2_system: f64,
    pub c3_system: f64,
    /// `h(τ∗δ1) + C2 + C3 > 1`
    pub condition_a: bool,
    /// `1 > h(τ∗δ1) + C3`
    pub condition_b: bool,
    pub expected_cost: f64,
    pub feasible: bool,
    pub boundary: bool,
    pub constants: Vec<ConstantRow>,
}

/// Angles in radians, `0 < φ2 < φ3 < π/2`.
pub fn example_noncommuting(delta1: f64, tau: f64, phi2: f64, phi3: f64) -> Result<NoncommutingReport> {
    check_crossover("tau", tau)?;
    if !(0.0 < phi2 && phi2 < phi3 && phi3 < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Parameter(format!("need 0 < phi2 < phi3 < pi/2, got {phi2}, {phi3}")));
    }
    let ch = noncommuting_channel(delta1, phi2, phi3)?;
    let sys = thm1_system(&thm1_model(tau)?, &ch)?;
    let ts = binary_convolution(tau, delta1);
    let c1 = h(ts) - h(delta1);
    let hol = |phi: f64| h((1.0 + phi.cos()) / 2.0);
    let eig = |phi: f64| -> Result<f64> {
        let mut avg = gamma(phi, 0).scale(0.5);
        avg.add_scaled(&gamma(phi, 1), 0.5);
        Ok(von_neumann_entropy(&validate(avg)?))
    };
    // L_j + K_j + S_j + T_j <= H(V_j) − H(U_j,V_j|Y_j) + 1 = 1 + C_j here
    let from_sys = |j: u32| -> Result<f64> {
        let n = |p: &str| format!("{p}{j}");
        let vars = [n("L"), n("K"), n("S"), n("T")];
        let refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
        Ok(rhs_of(&sys, &n("decoder-"), &refs)? - 1.0)
    };
    let (c2, c3) = (hol(phi2), hol(phi3));
    let p = RatePoint::new(c1, c2, c3, tau)?;
    Ok(NoncommutingReport {
        delta1,
        tau,
        phi2_deg: phi2.to_degrees(),
        phi3_deg: phi3.to_degrees(),
        c1,
        c2,
        c3,
        c2_eigen: eig(phi2)?,
        c3_eigen: eig(phi3)?,
        c2_system: from_sys(2)?,
        c3_system: from_sys(3)?,
        condition_a: h(ts) + c2 + c3 > 1.0,
        condition_b: 1.0 > h(ts) + c3,
        expected_cost: sys.expected_cost,
        feasible: sys.admits(&p)?,
        boundary: sys.on_boundary(&p)?,
        constants: constants(&sys),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cqstates::expected_cost;
    use crate::quantum::{validate, von_neumann_entropy};
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigma_flips() {
        let s = sigma(0.1, 0);
        assert_eq!(s[(1, 1)].re, 0.9);
        assert_eq!(sigma(0.1, 1)[(0, 0)].re, 0.9);
    }

    #[test]
    fn channel_states_are_products() {
        let ch = commutative_channel(0.01, 0.1).unwrap();
        let i = ch.input_index("011").unwrap();
        // x1⊕x2⊕x3 = 0, so Y1 ~ σ(0) puts 0.99 on |1⟩
        let y1 = ch.marginal(i, 0b001).unwrap();
        assert_abs_diff_eq!(y1[(1, 1)].re, 0.99, epsilon = 1e-15);
        let y3 = ch.marginal(i, 0b100).unwrap();
        assert_abs_diff_eq!(y3[(0, 0)].re, 0.9, epsilon = 1e-15);
        assert_eq!(ch.cost(i), 0.0);
        assert_eq!(ch.cost(ch.input_index("100").unwrap()), 1.0);
    }

    #[test]
    fn cost_of_thm1_model_is_tau() {
        let ch = commutative_channel(0.01, 0.1).unwrap();
        assert_abs_diff_eq!(expected_cost(&thm1_model(0.05).unwrap(), &ch).unwrap(), 0.05, epsilon = 1e-15);
        assert!(thm1_model(1.5).is_err());
    }

    #[test]
    fn noncommuting_marginal_is_pure() {
        let ch = noncommuting_channel(0.01, 0.7, 0.8).unwrap();
        let y2 = ch.marginal(ch.input_index("010").unwrap(), 0b010).unwrap();
        let s = von_neumann_entropy(&validate(y2).unwrap());
        assert!(s.abs() < 1e-10);
    }

    #[test]
    fn commutative_report_at_reference_parameters() {
        let r = example_commutative(0.01, 0.05, 0.10).unwrap();
        // p∗q = p(1−q) + (1−p)q
        assert_abs_diff_eq!(r.tau_star_delta1, 0.05 * 0.99 + 0.95 * 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(r.tau_star_delta1, 0.059, epsilon = 1e-15);
        assert!(r.condition_i && r.condition_ii && r.fact1_sum && r.fact1_max);
        assert!(r.feasible);
        assert!(r.constants.iter().any(|c| c.provenance.contains("|Y1)")));
    }

    #[test]
    fn zero_cost_budget_silences_user_one() {
        let r = example_commutative(0.01, 0.0, 0.10).unwrap();
        assert_eq!(r.c1, 0.0);
        assert!(r.feasible);
    }

    #[test]
    fn noisy_side_receivers_break_condition_ii() {
        // h(0.4) = 0.971 > (1 + h(0.059))/2 = 0.662
        let r = example_commutative(0.01, 0.05, 0.4).unwrap();
        assert!(!r.condition_ii);
    }

    #[test]
    fn noncommuting_report_matches_eigensolve() {
        let r = example_noncommuting(0.01, 0.05, 40f64.to_radians(), 45f64.to_radians()).unwrap();
        for (a, b, s) in [(r.c2, r.c2_eigen, r.c2_system), (r.c3, r.c3_eigen, r.c3_system)] {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            assert_abs_diff_eq!(a, s, epsilon = 1e-10);
        }
        assert!(r.condition_a && r.condition_b && r.feasible);
    }

    #[test]
    fn near_orthogonal_states_have_unit_capacity() {
        let r = example_noncommuting(0.01, 0.05, 45f64.to_radians(), 89.9f64.to_radians()).unwrap();
        assert_abs_diff_eq!(r.c3, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn angle_ordering_is_strict() {
        let a = 40f64.to_radians();
        assert!(matches!(example_noncommuting(0.01, 0.05, a, a), Err(Error::Parameter(_))));
        assert!(example_noncommuting(0.01, 0.05, 0.0, a).is_err());
    }
}
