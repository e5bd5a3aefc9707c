//! Square-root measurements over small exact ensembles, and a decoder for
//! the sum of two coset codewords.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cqstates::CqBroadcastChannel;
use crate::error::{Error, Result};
use crate::gf::{ncc_codeword, sum_coset, NestedCosetCode};
use crate::quantum::{c, eigenvalues, psd_inv_sqrt, support_projector, validate, CMatrix, DensityOperator};

pub const PRIOR_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;
pub const COMPLETENESS_TOL: f64 = 1e-8;
pub const DIM_CAP: usize = 1024;
pub const REMAINDER: &str = "⊥";

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleEntry {
    pub label: String,
    pub prior: f64,
    pub state: DensityOperator,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateEnsemble {
    entries: Vec<EnsembleEntry>,
    dim: usize,
}

impl StateEnsemble {
    pub fn new(entries: Vec<EnsembleEntry>) -> Result<Self> {
        let dim = entries.first().ok_or_else(|| Error::Dimension("empty ensemble".into()))?.state.dim();
        if let Some(e) = entries.iter().find(|e| e.state.dim() != dim) {
            return Err(Error::Dimension(format!("entry {} has dim {} != {dim}", e.label, e.state.dim())));
        }
        if entries.iter().any(|e| !(e.prior >= 0.0)) {
            return Err(Error::Parameter("negative prior".into()));
        }
        let total: f64 = entries.iter().map(|e| e.prior).sum();
        if (total - 1.0).abs() > PRIOR_TOL {
            return Err(Error::Parameter(format!("priors sum to {total}")));
        }
        let labels: BTreeSet<&str> = entries.iter().map(|e| e.label.as_str()).collect();
        if labels.len() != entries.len() {
            return Err(Error::Label("duplicate ensemble label".into()));
        }
        Ok(Self { entries, dim })
    }

    pub fn entries(&self) -> &[EnsembleEntry] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Σ p_m ρ_m`.
    pub fn average(&self) -> CMatrix {
        let mut s = CMatrix::zeros(self.dim);
        for e in &self.entries {
            s.add_scaled(e.state.matrix(), e.prior);
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PovmElement {
    pub label: String,
    pub op: CMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct Povm {
    elements: Vec<PovmElement>,
    dim: usize,
}

/// Smallest eigenvalue over the elements and the largest entrywise
/// deviation of their sum from the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PovmCheck {
    pub min_eigenvalue: f64,
    pub completeness: f64,
}

fn check(elements: &[PovmElement], dim: usize) -> Result<PovmCheck> {
    let mut total = CMatrix::zeros(dim);
    let mut min_eig = f64::INFINITY;
    for e in elements {
        if e.op.dim() != dim {
            return Err(Error::Dimension(format!("element {} has dim {}", e.label, e.op.dim())));
        }
        let ev = eigenvalues(&e.op)?;
        min_eig = min_eig.min(ev.first().copied().unwrap_or(0.0));
        total = &total + &e.op;
    }
    Ok(PovmCheck { min_eigenvalue: min_eig, completeness: total.max_abs_diff(&CMatrix::identity(dim)) })
}

impl Povm {
    pub fn new(elements: Vec<PovmElement>) -> Result<Self> {
        let dim = elements.first().ok_or_else(|| Error::Povm("no elements".into()))?.op.dim();
        let labels: BTreeSet<&str> = elements.iter().map(|e| e.label.as_str()).collect();
        if labels.len() != elements.len() {
            return Err(Error::Povm("duplicate element label".into()));
        }
        let chk = check(&elements, dim)?;
        if chk.min_eigenvalue < -PSD_TOL {
            return Err(Error::Povm(format!("element with eigenvalue {:e}", chk.min_eigenvalue)));
        }
        if chk.completeness > COMPLETENESS_TOL {
            return Err(Error::Povm(format!("elements sum to identity only within {:e}", chk.completeness)));
        }
        Ok(Self { elements, dim })
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, label: &str) -> Option<&CMatrix> {
        self.elements.iter().find(|e| e.label == label).map(|e| &e.op)
    }

    pub fn check(&self) -> PovmCheck {
        check(&self.elements, self.dim).expect("validated at construction")
    }
}

/// `μ_m = S^{-1/2} p_m ρ_m S^{-1/2}` and the remainder `I − Π_supp(S)`.
pub fn srm(e: &StateEnsemble) -> Result<Povm> {
    let s = e.average();
    let inv = psd_inv_sqrt(&s)?;
    let mut elements: Vec<PovmElement> = e
        .entries
        .iter()
        .map(|x| PovmElement { label: x.label.clone(), op: inv.matmul(&x.state.matrix().scale(x.prior)).matmul(&inv) })
        .collect();
    let rest = &CMatrix::identity(e.dim) - &support_projector(&s)?;
    elements.push(PovmElement { label: REMAINDER.into(), op: rest });
    Povm::new(elements)
}

/// `1 − Σ p_m tr(μ_m ρ_m)`; the remainder element never counts as correct.
pub fn error_probability(p: &Povm, e: &StateEnsemble) -> Result<f64> {
    if p.dim != e.dim {
        return Err(Error::Dimension(format!("POVM dim {} vs ensemble dim {}", p.dim, e.dim)));
    }
    let mut ok = 0.0;
    for x in &e.entries {
        let mu = p.get(&x.label).ok_or_else(|| Error::Label(format!("no POVM element for `{}`", x.label)))?;
        ok += x.prior * mu.trace_product(x.state.matrix()).re;
    }
    Ok((1.0 - ok).clamp(0.0, 1.0))
}

fn tensor_states(ch: &CqBroadcastChannel, word: &[String], rx: usize) -> Result<CMatrix> {
    let mut out = CMatrix::identity(1);
    for x in word {
        let i = ch.input_index(x).ok_or_else(|| Error::Label(format!("unknown input `{x}`")))?;
        out = out.kron(&ch.marginal(i, 1 << rx)?);
    }
    Ok(out)
}

fn check_cap(ch: &CqBroadcastChannel, n: usize, rx: usize) -> Result<usize> {
    let d = ch.out_dims()[rx];
    let dim = (d as f64).powi(n as i32);
    if dim > DIM_CAP as f64 {
        return Err(Error::Cap(format!("receiver dim {d}^{n} exceeds {DIM_CAP}")));
    }
    Ok(dim as usize)
}

/// `⊗_t ρ_{x_t}` reduced to receiver `rx` (0-based) for each word.
pub fn codebook_ensemble(
    ch: &CqBroadcastChannel,
    words: &[(String, Vec<String>)],
    rx: usize,
    priors: &[f64],
) -> Result<StateEnsemble> {
    if rx > 2 {
        return Err(Error::Parameter(format!("receiver index {rx}")));
    }
    if priors.len() != words.len() {
        return Err(Error::Dimension(format!("{} priors for {} words", priors.len(), words.len())));
    }
    let n = words.first().map_or(0, |w| w.1.len());
    if words.iter().any(|w| w.1.len() != n) {
        return Err(Error::Dimension("words of different lengths".into()));
    }
    check_cap(ch, n, rx)?;
    let entries = words
        .iter()
        .zip(priors)
        .map(|((label, w), &p)| Ok(EnsembleEntry { label: label.clone(), prior: p, state: validate(tensor_states(ch, w, rx)?)? }))
        .collect::<Result<Vec<_>>>()?;
    StateEnsemble::new(entries)
}

fn digits(v: &[u32]) -> String {
    v.iter().map(|d| d.to_string()).collect()
}

/// Rx1's letter for the symbol pair `(u2, u3)`, keyed `"{u2}{u3}"`.
pub type LetterMap = BTreeMap<String, String>;

#[derive(Debug, Clone, Serialize)]
pub struct SumDecoderReport {
    pub labels: Vec<String>,
    /// Error of the SRM over groups `m2 ⊕ m3`.
    pub error: f64,
    /// Error of decoding the pair with its own SRM and adding the estimates.
    pub pair_then_sum_error: f64,
    pub dim: usize,
    /// Eigenvalues of the averaged group state.
    pub spectrum: Vec<f64>,
    pub check: PovmCheck,
    pub pair_check: PovmCheck,
    pub decoder: Povm,
}

struct Pair {
    label: String,
    sum: String,
    prior: f64,
    state: CMatrix,
}

/// Groups message pairs by `m2 ⊕ m3` at Rx1 and builds the SRM over groups.
/// Inner codewords are averaged uniformly; `priors` run over `(m2, m3)` in
/// lexicographic order and default to uniform.
pub fn sum_group_decoder(
    ch: &CqBroadcastChannel,
    c2: &NestedCosetCode,
    c3: &NestedCosetCode,
    letters: &LetterMap,
    priors: Option<&[f64]>,
) -> Result<SumDecoderReport> {
    let f = c2.upsilon;
    let dim = check_cap(ch, c2.n, 0)?;
    let m2s: Vec<Vec<u32>> = f.vectors(c2.l()).collect();
    let m3s: Vec<Vec<u32>> = f.vectors(c3.l()).collect();
    let count = m2s.len() * m3s.len();
    let uniform = vec![1.0 / count as f64; count];
    let priors = priors.unwrap_or(&uniform);
    if priors.len() != count {
        return Err(Error::Dimension(format!("{} priors for {count} message pairs", priors.len())));
    }
    let a2s: Vec<Vec<u32>> = f.vectors(c2.k()).collect();
    let a3s: Vec<Vec<u32>> = f.vectors(c3.k()).collect();
    let mut pairs = Vec::with_capacity(count);
    for (i, (m2, m3)) in m2s.iter().flat_map(|a| m3s.iter().map(move |b| (a, b))).enumerate() {
        let (sum, msum) = sum_coset(c2, c3, m2, m3)?;
        let sum_words: BTreeSet<Vec<u32>> = sum.coset(&msum)?.into_iter().collect();
        let mut state = CMatrix::zeros(dim);
        let w = 1.0 / (a2s.len() * a3s.len()) as f64;
        for a2 in &a2s {
            for a3 in &a3s {
                let u2 = ncc_codeword(c2, a2, m2)?;
                let u3 = ncc_codeword(c3, a3, m3)?;
                if !sum_words.contains(&f.add_vec(&u2, &u3)) {
                    return Err(Error::NotSubcoset);
                }
                let word = u2
                    .iter()
                    .zip(&u3)
                    .map(|(x, y)| {
                        let key = format!("{x}{y}");
                        letters.get(&key).cloned().ok_or_else(|| Error::Label(format!("no letter for `{key}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                state.add_scaled(&tensor_states(ch, &word, 0)?, w);
            }
        }
        pairs.push(Pair { label: format!("{}|{}", digits(m2), digits(m3)), sum: digits(&msum), prior: priors[i], state });
    }

    let mut groups: BTreeMap<String, (f64, CMatrix)> = BTreeMap::new();
    for p in &pairs {
        let g = groups.entry(p.sum.clone()).or_insert_with(|| (0.0, CMatrix::zeros(dim)));
        g.0 += p.prior;
        g.1.add_scaled(&p.state, p.prior);
    }
    let group_entries = groups
        .iter()
        .filter(|(_, (p, _))| *p > 0.0)
        .map(|(label, (p, s))| Ok(EnsembleEntry { label: label.clone(), prior: *p, state: validate(s.scale(1.0 / p))? }))
        .collect::<Result<Vec<_>>>()?;
    let group_ens = StateEnsemble::new(group_entries)?;
    let decoder = srm(&group_ens)?;
    let error = error_probability(&decoder, &group_ens)?;

    let pair_ens = StateEnsemble::new(
        pairs
            .iter()
            .map(|p| Ok(EnsembleEntry { label: p.label.clone(), prior: p.prior, state: validate(p.state.clone())? }))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let pair_povm = srm(&pair_ens)?;
    let mut ok = 0.0;
    for p in &pairs {
        for q in pairs.iter().filter(|q| q.sum == p.sum) {
            let mu = pair_povm.get(&q.label).expect("one element per pair");
            ok += p.prior * mu.trace_product(&p.state).re;
        }
    }

    Ok(SumDecoderReport {
        labels: group_ens.entries.iter().map(|e| e.label.clone()).collect(),
        error,
        pair_then_sum_error: (1.0 - ok).clamp(0.0, 1.0),
        dim,
        spectrum: eigenvalues(&group_ens.average())?,
        check: decoder.check(),
        pair_check: pair_povm.check(),
        decoder,
    })
}

/// A toy sum-decoding instance: the input is the bit pair `x2x3`, only Rx1
/// has a non-trivial output, a pure qubit at an angle set by the pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SumDecoderSpec {
    pub channel: CqBroadcastChannel,
    pub code2: NestedCosetCode,
    pub code3: NestedCosetCode,
    pub letters: LetterMap,
    #[serde(default)]
    pub priors: Option<Vec<f64>>,
}

pub const TOY_ANGLES: [(&str, f64); 4] = [("00", 0.0), ("11", 0.3), ("01", 1.2), ("10", 1.5)];

pub fn toy_spec() -> Result<SumDecoderSpec> {
    let labels: Vec<String> = TOY_ANGLES.iter().map(|(l, _)| l.to_string()).collect();
    let states = TOY_ANGLES.iter().map(|(_, t)| CMatrix::pure(&[c(t.cos(), 0.0), c(t.sin(), 0.0)])).collect();
    let channel = CqBroadcastChannel::new(labels.clone(), [2, 1, 1], states, vec![0.0; 4])?;
    let g = vec![vec![1, 1, 0]];
    Ok(SumDecoderSpec {
        channel,
        code2: NestedCosetCode::new(2, vec![], g.clone(), vec![0, 0, 1])?,
        code3: NestedCosetCode::new(2, vec![], g, vec![0, 0, 0])?,
        letters: labels.iter().map(|l| (l.clone(), l.clone())).collect(),
        priors: None,
    })
}

impl SumDecoderSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.code2.validate()?;
        spec.code3.validate()?;
        Ok(spec)
    }

    pub fn run(&self) -> Result<SumDecoderReport> {
        sum_group_decoder(&self.channel, &self.code2, &self.code3, &self.letters, self.priors.as_deref())
    }
}
