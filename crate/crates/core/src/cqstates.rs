//! Channels, auxiliary models and classical-quantum ensembles with a cached
//! entropy engine.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{is_prime, PrimeField};
use crate::quantum::{
    eigenvalues, entropy_of_spectrum, partial_trace_matrix, validate, CMatrix, DensityOperator, ProductSpace,
};

pub const PMF_TOL: f64 = 1e-12;
pub const SUPPORT_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelJson", into = "ChannelJson")]
pub struct CqBroadcastChannel {
    inputs: Vec<String>,
    out_dims: [usize; 3],
    states: Vec<DensityOperator>,
    cost: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    inputs: Vec<String>,
    out_dims: [usize; 3],
    states: BTreeMap<String, CMatrix>,
    cost: BTreeMap<String, f64>,
}

impl TryFrom<ChannelJson> for CqBroadcastChannel {
    type Error = Error;

    fn try_from(raw: ChannelJson) -> Result<Self> {
        let mut states = Vec::new();
        let mut cost = Vec::new();
        for x in &raw.inputs {
            states.push(raw.states.get(x).cloned().ok_or_else(|| Error::Model(format!("no state for input {x}")))?);
            cost.push(raw.cost.get(x).copied().ok_or_else(|| Error::Model(format!("no cost for input {x}")))?);
        }
        Self::new(raw.inputs, raw.out_dims, states, cost)
    }
}

impl From<CqBroadcastChannel> for ChannelJson {
    fn from(ch: CqBroadcastChannel) -> Self {
        ChannelJson {
            states: ch.inputs.iter().cloned().zip(ch.states.iter().map(|s| s.matrix().clone())).collect(),
            cost: ch.inputs.iter().cloned().zip(ch.cost.iter().copied()).collect(),
            inputs: ch.inputs,
            out_dims: ch.out_dims,
        }
    }
}

impl CqBroadcastChannel {
    pub fn new(inputs: Vec<String>, out_dims: [usize; 3], states: Vec<CMatrix>, cost: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() || states.len() != inputs.len() || cost.len() != inputs.len() {
            return Err(Error::Model("channel needs one state and one cost per input".into()));
        }
        let mut sorted = inputs.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != inputs.len() {
            return Err(Error::Model("duplicate input labels".into()));
        }
        if out_dims.iter().any(|&d| d == 0) {
            return Err(Error::Dimension("output dimension 0".into()));
        }
        let dim: usize = out_dims.iter().product();
        let mut valid = Vec::with_capacity(states.len());
        for (x, m) in inputs.iter().zip(states) {
            if m.dim() != dim {
                return Err(Error::Dimension(format!("state for {x} has dim {} (expected {dim})", m.dim())));
            }
            valid.push(validate(m).map_err(|e| Error::Model(format!("input {x}: {e}")))?);
        }
        if let Some((x, k)) = inputs.iter().zip(&cost).find(|(_, &k)| !(k >= 0.0 && k.is_finite())) {
            return Err(Error::Model(format!("cost of {x} is {k}")));
        }
        Ok(Self { inputs, out_dims, states: valid, cost })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel serializes")
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn out_dims(&self) -> [usize; 3] {
        self.out_dims
    }

    pub fn space(&self) -> ProductSpace {
        ProductSpace::new(self.out_dims.to_vec()).expect("dims checked at construction")
    }

    pub fn input_index(&self, x: &str) -> Option<usize> {
        self.inputs.iter().position(|i| i == x)
    }

    pub fn state(&self, idx: usize) -> &DensityOperator {
        &self.states[idx]
    }

    pub fn cost(&self, idx: usize) -> f64 {
        self.cost[idx]
    }

    /// Reduced state of input `idx` on the outputs in `mask` (bit `j` for `Y_{j+1}`).
    pub fn marginal(&self, idx: usize, mask: u8) -> Result<CMatrix> {
        let keep = mask_factors(mask);
        if keep.is_empty() {
            return Ok(CMatrix::identity(1));
        }
        partial_trace_matrix(self.states[idx].matrix(), &self.space(), &keep)
    }
}

pub(crate) fn mask_factors(mask: u8) -> Vec<usize> {
    (0..3).filter(|j| mask & (1 << j) != 0).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxVar {
    pub name: String,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    /// Full auxiliary tuple to channel input label.
    Map(Vec<FusionEntry>),
    /// The named variable indexes the channel inputs directly.
    Coordinate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionEntry {
    pub point: Vec<u32>,
    pub x: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfEntry {
    pub point: Vec<u32>,
    pub p: f64,
}

/// Auxiliary random variables, their joint PMF and the fusion map into the
/// channel input. Variables named `U..` live in prime fields; size 1 marks a
/// trivial variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryModel {
    pub vars: Vec<AuxVar>,
    pub pmf: Vec<PmfEntry>,
    pub fusion: Fusion,
}

impl AuxiliaryModel {
    pub fn new(vars: Vec<AuxVar>, pmf: Vec<PmfEntry>, fusion: Fusion) -> Result<Self> {
        let mut model = Self { vars, pmf, fusion };
        model.normalize()?;
        Ok(model)
    }

    /// Enumerates the full product alphabet; `f` returns the channel input label.
    pub fn from_fn(
        vars: Vec<AuxVar>,
        pmf: impl Fn(&[u32]) -> f64,
        f: impl Fn(&[u32]) -> String,
    ) -> Result<Self> {
        let mut entries = Vec::new();
        let mut fusion = Vec::new();
        for point in product_space(&vars.iter().map(|v| v.size).collect::<Vec<_>>()) {
            let p = pmf(&point);
            if p >= SUPPORT_THRESHOLD {
                fusion.push(FusionEntry { point: point.clone(), x: f(&point) });
                entries.push(PmfEntry { point, p });
            }
        }
        Self::new(vars, entries, Fusion::Map(fusion))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut m: Self = serde_json::from_str(s)?;
        m.normalize()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    fn normalize(&mut self) -> Result<()> {
        let mut names: Vec<&str> = self.vars.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.vars.len() {
            return Err(Error::Model("duplicate variable names".into()));
        }
        for v in &self.vars {
            if v.size == 0 {
                return Err(Error::Model(format!("{} has empty alphabet", v.name)));
            }
            if v.name.starts_with('U') && v.size > 1 && !is_prime(v.size) {
                return Err(Error::Model(format!("{} must live in a prime field (size {})", v.name, v.size)));
            }
        }
        let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for e in &self.pmf {
            if e.point.len() != self.vars.len() {
                return Err(Error::Model(format!("pmf point {:?} has wrong arity", e.point)));
            }
            if e.point.iter().zip(&self.vars).any(|(&x, v)| x >= v.size) {
                return Err(Error::Model(format!("pmf point {:?} outside the alphabets", e.point)));
            }
            if !(e.p >= 0.0 && e.p.is_finite()) {
                return Err(Error::Model(format!("negative probability {}", e.p)));
            }
            *merged.entry(e.point.clone()).or_insert(0.0) += e.p;
        }
        let total: f64 = merged.values().sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(Error::Model(format!("pmf sums to {total}")));
        }
        self.pmf = merged
            .into_iter()
            .filter(|(_, p)| *p >= SUPPORT_THRESHOLD)
            .map(|(point, p)| PmfEntry { point, p })
            .collect();
        match &self.fusion {
            Fusion::Coordinate(name) => {
                if self.index(name).is_none() {
                    return Err(Error::Model(format!("fusion coordinate {name} is not a variable")));
                }
            }
            Fusion::Map(entries) => {
                let keys: BTreeMap<&Vec<u32>, &String> = entries.iter().map(|e| (&e.point, &e.x)).collect();
                if let Some(e) = self.pmf.iter().find(|e| !keys.contains_key(&e.point)) {
                    return Err(Error::Model(format!("fusion undefined on support point {:?}", e.point)));
                }
            }
        }
        Ok(())
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Alphabet size; absent variables are trivial.
    pub fn size(&self, name: &str) -> u32 {
        self.index(name).map_or(1, |i| self.vars[i].size)
    }

    /// Channel input index for every support point, in pmf order.
    pub fn inputs(&self, ch: &CqBroadcastChannel) -> Result<Vec<usize>> {
        match &self.fusion {
            Fusion::Coordinate(name) => {
                let i = self.index(name).expect("checked in normalize");
                if self.vars[i].size as usize != ch.inputs().len() {
                    return Err(Error::Model(format!(
                        "coordinate {name} has size {} but the channel has {} inputs",
                        self.vars[i].size,
                        ch.inputs().len()
                    )));
                }
                Ok(self.pmf.iter().map(|e| e.point[i] as usize).collect())
            }
            Fusion::Map(entries) => {
                let keys: BTreeMap<&Vec<u32>, &String> = entries.iter().map(|e| (&e.point, &e.x)).collect();
                self.pmf
                    .iter()
                    .map(|e| {
                        let x = keys[&e.point];
                        ch.input_index(x).ok_or_else(|| Error::Model(format!("fusion maps to unknown input {x}")))
                    })
                    .collect()
            }
        }
    }

    pub fn marginal_entropy(&self, names: &[&str]) -> Result<f64> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.index(n).ok_or_else(|| Error::UnknownCoordinate(n.to_string())))
            .collect::<Result<_>>()?;
        let mut groups: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for e in &self.pmf {
            *groups.entry(idx.iter().map(|&i| e.point[i]).collect()).or_insert(0.0) += e.p;
        }
        Ok(shannon(groups.into_values().collect()))
    }
}

pub fn product_space(sizes: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..s).map(move |x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    out
}

/// Shannon entropy (bits) summed in ascending probability order.
fn shannon(mut ps: Vec<f64>) -> f64 {
    ps.sort_by(f64::total_cmp);
    ps.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum::<f64>().max(0.0)
}

pub fn expected_cost(model: &AuxiliaryModel, ch: &CqBroadcastChannel) -> Result<f64> {
    let xs = model.inputs(ch)?;
    Ok(model.pmf.iter().zip(xs).map(|(e, x)| e.p * ch.cost(x)).sum())
}

/// A classical coordinate in an entropy query: a single variable, or a linear
/// combination of field-valued variables modulo `modulus`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Item {
    pub terms: Vec<(String, u32)>,
    pub modulus: u32,
}

impl Item {
    pub fn var(name: &str) -> Self {
        Self { terms: vec![(name.to_string(), 1)], modulus: 0 }
    }

    pub fn lin(terms: &[(&str, u32)], modulus: u32) -> Self {
        Self { terms: terms.iter().map(|(n, c)| (n.to_string(), *c)).collect(), modulus }
    }

    pub fn is_var(&self) -> bool {
        self.modulus == 0
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(n, c)| if *c == 1 { n.clone() } else { format!("{c}{n}") })
            .collect();
        write!(f, "{}", parts.join("⊕"))
    }
}

/// Canonical key of a joint entropy `H(items, Y_mask)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntropyKey {
    pub classical: Vec<Item>,
    pub quantum: u8,
}

impl EntropyKey {
    pub fn is_empty(&self) -> bool {
        self.classical.is_empty() && self.quantum == 0
    }

    /// Canonical form: trivial variables and zero coefficients vanish, a
    /// combination of one variable is that variable, combinations are scaled
    /// to a unit leading coefficient, and combinations of variables already
    /// present are redundant.
    pub fn canonical(items: &[Item], quantum: u8, size: &dyn Fn(&str) -> u32) -> Self {
        let mut out: Vec<Item> = Vec::new();
        for it in items {
            if it.is_var() {
                let name = &it.terms[0].0;
                if size(name) > 1 {
                    out.push(Item::var(name));
                }
                continue;
            }
            let p = it.modulus;
            let mut acc: BTreeMap<String, u32> = BTreeMap::new();
            for (n, coef) in &it.terms {
                if size(n) > 1 && p > 1 {
                    let e = acc.entry(n.clone()).or_insert(0);
                    *e = (*e + coef % p) % p;
                }
            }
            let terms: Vec<(String, u32)> = acc.into_iter().filter(|(_, c)| *c != 0).collect();
            match terms.len() {
                0 => {}
                1 => out.push(Item::var(&terms[0].0)),
                _ => {
                    let field = PrimeField::new(p).expect("combination modulus is a prime");
                    let inv = field.inv(terms[0].1);
                    out.push(Item { terms: terms.into_iter().map(|(n, c)| (n, field.mul(c, inv))).collect(), modulus: p });
                }
            }
        }
        let singles: Vec<String> = out.iter().filter(|i| i.is_var()).map(|i| i.terms[0].0.clone()).collect();
        out.retain(|i| i.is_var() || !i.terms.iter().all(|(n, _)| singles.contains(n)));
        out.sort();
        out.dedup();
        Self { classical: out, quantum: quantum & 0b111 }
    }
}

impl fmt::Display for EntropyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.classical.iter().map(|i| i.to_string()).collect();
        parts.extend(mask_factors(self.quantum).iter().map(|j| format!("Y{}", j + 1)));
        write!(f, "H({})", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coordinate {
    pub name: String,
    pub size: u32,
}

#[derive(Debug, Clone)]
pub struct CqEntry {
    pub label: Vec<u32>,
    pub p: f64,
    pub input: usize,
}

/// `Σ p(c) |c⟩⟨c| ⊗ ρ_{x(c)}` with the channel kept by reference.
pub struct CqEnsemble {
    coords: Vec<Coordinate>,
    derived: Vec<(String, Item)>,
    entries: Vec<CqEntry>,
    channel: CqBroadcastChannel,
    reduced: Mutex<HashMap<(usize, u8), Arc<CMatrix>>>,
    cache: RwLock<HashMap<EntropyKey, f64>>,
}

impl fmt::Debug for CqEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CqEnsemble")
            .field("coords", &self.coords)
            .field("entries", &self.entries.len())
            .finish()
    }
}

impl CqEnsemble {
    /// Builds an ensemble over the named coordinates (absent ones trivial),
    /// appending derived field sums and the channel input coordinate `X`.
    pub fn build(
        model: &AuxiliaryModel,
        ch: &CqBroadcastChannel,
        names: &[&str],
        derived: Vec<(String, Item)>,
    ) -> Result<Self> {
        let xs = model.inputs(ch)?;
        let mut coords: Vec<Coordinate> =
            names.iter().map(|n| Coordinate { name: n.to_string(), size: model.size(n) }).collect();
        let base_idx: Vec<Option<usize>> = names.iter().map(|n| model.index(n)).collect();
        let mut entries = Vec::with_capacity(model.pmf.len());
        for (e, &x) in model.pmf.iter().zip(&xs) {
            let label: Vec<u32> = base_idx.iter().map(|i| i.map_or(0, |i| e.point[i])).collect();
            entries.push(CqEntry { label, p: e.p, input: x });
        }
        for (name, item) in &derived {
            let cols: Vec<(usize, u32)> = item
                .terms
                .iter()
                .map(|(n, c)| {
                    names
                        .iter()
                        .position(|m| *m == n.as_str())
                        .map(|i| (i, *c))
                        .ok_or_else(|| Error::UnknownCoordinate(n.clone()))
                })
                .collect::<Result<_>>()?;
            let m = item.modulus.max(1);
            for entry in &mut entries {
                let v = cols.iter().map(|&(i, c)| entry.label[i] as u64 * c as u64).sum::<u64>() % m as u64;
                entry.label.push(v as u32);
            }
            coords.push(Coordinate { name: name.clone(), size: m });
        }
        if !names.contains(&"X") {
            for (entry, &x) in entries.iter_mut().zip(&xs) {
                entry.label.push(x as u32);
            }
            coords.push(Coordinate { name: "X".into(), size: ch.inputs().len() as u32 });
        }
        Ok(Self {
            coords,
            derived,
            entries,
            channel: ch.clone(),
            reduced: Mutex::new(HashMap::new()),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn entries(&self) -> &[CqEntry] {
        &self.entries
    }

    pub fn channel(&self) -> &CqBroadcastChannel {
        &self.channel
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c.name == name)
    }

    pub fn size(&self, name: &str) -> u32 {
        self.coord_index(name).map_or(1, |i| self.coords[i].size)
    }

    /// Number of distinct channel inputs on the support.
    pub fn distinct_states(&self) -> usize {
        let mut xs: Vec<usize> = self.entries.iter().map(|e| e.input).collect();
        xs.sort_unstable();
        xs.dedup();
        xs.len()
    }

    fn resolve(&self, item: &Item) -> Item {
        if item.is_var() {
            if let Some((_, def)) = self.derived.iter().find(|(n, _)| *n == item.terms[0].0) {
                return def.clone();
            }
        }
        item.clone()
    }

    /// Display form with derived coordinates spelled out.
    pub fn describe(&self, item: &Item) -> String {
        self.resolve(item).to_string()
    }

    pub fn key(&self, items: &[Item], quantum: &[usize]) -> Result<EntropyKey> {
        let mask = quantum.iter().try_fold(0u8, |m, &j| {
            if j < 3 {
                Ok(m | (1 << j))
            } else {
                Err(Error::UnknownCoordinate(format!("Y{}", j + 1)))
            }
        })?;
        let resolved: Vec<Item> = items.iter().map(|i| self.resolve(i)).collect();
        for it in &resolved {
            for (n, _) in &it.terms {
                if self.coord_index(n).is_none() {
                    return Err(Error::UnknownCoordinate(n.clone()));
                }
            }
        }
        Ok(EntropyKey::canonical(&resolved, mask, &|n| self.size(n)))
    }

    fn reduced_state(&self, input: usize, mask: u8) -> Arc<CMatrix> {
        if let Some(m) = self.reduced.lock().expect("reduced-state cache poisoned").get(&(input, mask)) {
            return m.clone();
        }
        let m = Arc::new(self.channel.marginal(input, mask).expect("mask is within three outputs"));
        self.reduced.lock().expect("reduced-state cache poisoned").entry((input, mask)).or_insert(m).clone()
    }

    /// `H(C, Y_q)` for a canonical key, via the classical block decomposition.
    pub fn entropy_of_key(&self, key: &EntropyKey) -> f64 {
        if key.is_empty() {
            return 0.0;
        }
        if let Some(&h) = self.cache.read().expect("entropy cache poisoned").get(key) {
            return h;
        }
        let h = self.compute(key);
        *self.cache.write().expect("entropy cache poisoned").entry(key.clone()).or_insert(h)
    }

    fn compute(&self, key: &EntropyKey) -> f64 {
        let cols: Vec<(Vec<(usize, u64)>, u64)> = key
            .classical
            .iter()
            .map(|it| {
                let terms = it
                    .terms
                    .iter()
                    .map(|(n, c)| (self.coord_index(n).expect("key coordinates are validated"), *c as u64))
                    .collect();
                (terms, if it.is_var() { u64::MAX } else { it.modulus as u64 })
            })
            .collect();
        let mut groups: BTreeMap<Vec<u32>, (f64, Option<CMatrix>)> = BTreeMap::new();
        for e in &self.entries {
            let value: Vec<u32> = cols
                .iter()
                .map(|(terms, m)| {
                    if *m == u64::MAX {
                        e.label[terms[0].0]
                    } else {
                        (terms.iter().map(|&(i, c)| e.label[i] as u64 * c).sum::<u64>() % m) as u32
                    }
                })
                .collect();
            let g = groups.entry(value).or_insert((0.0, None));
            g.0 += e.p;
            if key.quantum != 0 {
                let rho = self.reduced_state(e.input, key.quantum);
                match &mut g.1 {
                    Some(acc) => acc.add_scaled(&rho, e.p),
                    None => g.1 = Some(rho.scale(e.p)),
                }
            }
        }
        let probs: Vec<f64> = groups.values().map(|(p, _)| *p).collect();
        let mut h = shannon(probs);
        if key.quantum != 0 {
            for (p, acc) in groups.values() {
                let acc = acc.as_ref().expect("quantum groups accumulate a state");
                if acc.dim() > 1 {
                    let vals = eigenvalues(&acc.scale(1.0 / p)).expect("mixtures of states are Hermitian");
                    h += p * entropy_of_spectrum(&vals);
                }
            }
        }
        h
    }

    pub fn cq_entropy(&self, classical: &[Item], quantum: &[usize]) -> Result<f64> {
        Ok(self.entropy_of_key(&self.key(classical, quantum)?))
    }

    pub fn entropy_names(&self, classical: &[&str], quantum: &[usize]) -> Result<f64> {
        let items: Vec<Item> = classical.iter().map(|n| Item::var(n)).collect();
        self.cq_entropy(&items, quantum)
    }

    /// `H(A | B) = H(A, B) − H(B)`.
    pub fn conditional_entropy(&self, a: (&[Item], &[usize]), b: (&[Item], &[usize])) -> Result<f64> {
        let ab_c: Vec<Item> = a.0.iter().chain(b.0).cloned().collect();
        let ab_q: Vec<usize> = a.1.iter().chain(b.1).copied().collect();
        Ok(self.cq_entropy(&ab_c, &ab_q)? - self.cq_entropy(b.0, b.1)?)
    }

    /// `I(A; B) = H(A) + H(B) − H(A, B)`.
    pub fn mutual_information(&self, a: (&[Item], &[usize]), b: (&[Item], &[usize])) -> Result<f64> {
        let ab_c: Vec<Item> = a.0.iter().chain(b.0).cloned().collect();
        let ab_q: Vec<usize> = a.1.iter().chain(b.1).copied().collect();
        Ok(self.cq_entropy(a.0, a.1)? + self.cq_entropy(b.0, b.1)? - self.cq_entropy(&ab_c, &ab_q)?)
    }

    pub fn cached_terms(&self) -> usize {
        self.cache.read().expect("entropy cache poisoned").len()
    }

    /// Assembles `Σ_c p(c)|c⟩⟨c| ⊗ ρ_c^{Y_q}` over the full label of the given
    /// coordinates. Exponential in size; for cross-checks only.
    pub fn block_diagonal(&self, names: &[&str], quantum: &[usize]) -> Result<DensityOperator> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.coord_index(n).ok_or_else(|| Error::UnknownCoordinate(n.to_string())))
            .collect::<Result<_>>()?;
        let mask = quantum.iter().fold(0u8, |m, &j| m | (1 << j));
        let mut groups: BTreeMap<Vec<u32>, CMatrix> = BTreeMap::new();
        for e in &self.entries {
            let rho = self.reduced_state(e.input, mask);
            let lab: Vec<u32> = idx.iter().map(|&i| e.label[i]).collect();
            groups.entry(lab).or_insert_with(|| CMatrix::zeros(rho.dim())).add_scaled(&rho, e.p);
        }
        let d = groups.values().next().map_or(1, |m| m.dim());
        let total = groups.len() * d;
        let mut out = CMatrix::zeros(total);
        for (b, block) in groups.values().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    out[(b * d + i, b * d + j)] = block[(i, j)];
                }
            }
        }
        validate(out)
    }
}

/// Variables outside the shape are tolerated only when trivial.
fn check_names(model: &AuxiliaryModel, allowed: &[&str], shape: &str) -> Result<()> {
    match model.vars.iter().find(|v| v.size > 1 && !allowed.contains(&v.name.as_str())) {
        Some(v) => Err(Error::Model(format!("variable {} does not belong to the {shape} shape", v.name))),
        None => Ok(()),
    }
}

/// Field size of the pair `(U_a, U_b)` sharing `F_υ`; trivial members are ignored.
pub fn pair_field(model: &AuxiliaryModel, a: &str, b: &str) -> Result<u32> {
    let (sa, sb) = (model.size(a), model.size(b));
    if sa > 1 && sb > 1 && sa != sb {
        return Err(Error::Model(format!("{a} and {b} must share a field (sizes {sa}, {sb})")));
    }
    Ok(sa.max(sb))
}

pub const THM1_NAMES: [&str; 5] = ["U2", "U3", "V1", "V2", "V3"];

pub const PAIRS: [&str; 6] = ["12", "13", "21", "23", "31", "32"];

/// `(ij, kj)`: the two codebooks whose sum receiver `j` decodes.
pub fn sum_pair(j: usize) -> (String, String) {
    let (i, k) = others(j);
    (format!("{i}{j}"), format!("{k}{j}"))
}

/// `(ji, jk)`: receiver `j`'s own codebooks.
pub fn own_pair(j: usize) -> (String, String) {
    let (i, k) = others(j);
    (format!("{j}{i}"), format!("{j}{k}"))
}

pub fn others(j: usize) -> (usize, usize) {
    match j {
        1 => (2, 3),
        2 => (1, 3),
        3 => (1, 2),
        _ => panic!("receiver index {j} outside 1..=3"),
    }
}

pub fn build_state_thm1(model: &AuxiliaryModel, ch: &CqBroadcastChannel) -> Result<CqEnsemble> {
    check_names(model, &THM1_NAMES, "Thm. 1")?;
    let up = pair_field(model, "U2", "U3")?;
    CqEnsemble::build(model, ch, &THM1_NAMES, vec![("U".into(), Item::lin(&[("U2", 1), ("U3", 1)], up))])
}

fn sum_derived(model: &AuxiliaryModel) -> Result<Vec<(String, Item)>> {
    (1..=3)
        .map(|j| {
            let (a, b) = sum_pair(j);
            let (ua, ub) = (format!("U{a}"), format!("U{b}"));
            let up = pair_field(model, &ua, &ub)?;
            Ok((format!("U{j}+"), Item::lin(&[(&ua, 1), (&ub, 1)], up)))
        })
        .collect()
}

pub fn stepii_names() -> Vec<String> {
    let mut v: Vec<String> = PAIRS.iter().map(|p| format!("U{p}")).collect();
    v.extend(["V1", "V2", "V3", "X"].iter().map(|s| s.to_string()));
    v
}

pub fn stepiii_names() -> Vec<String> {
    let mut v = vec!["W".to_string()];
    v.extend(PAIRS.iter().map(|p| format!("Q{p}")));
    v.extend(stepii_names());
    v
}

pub fn build_state_stepii(model: &AuxiliaryModel, ch: &CqBroadcastChannel) -> Result<CqEnsemble> {
    let names = stepii_names();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    check_names(model, &refs, "Step II")?;
    CqEnsemble::build(model, ch, &refs, sum_derived(model)?)
}

pub fn build_state_stepiii(model: &AuxiliaryModel, ch: &CqBroadcastChannel) -> Result<CqEnsemble> {
    let names = stepiii_names();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    check_names(model, &refs, "Step III")?;
    CqEnsemble::build(model, ch, &refs, sum_derived(model)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::testutil::random_state;
    use crate::quantum::{binary_entropy, c, von_neumann_entropy};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn var(name: &str, size: u32) -> AuxVar {
        AuxVar { name: name.into(), size }
    }

    /// Channel with `n` inputs carrying random states on dims (d1, d2, d3).
    fn random_channel(rng: &mut ChaCha8Rng, n: usize, dims: [usize; 3]) -> CqBroadcastChannel {
        let d: usize = dims.iter().product();
        let states = (0..n).map(|_| random_state(rng, d, 2).into_matrix()).collect();
        CqBroadcastChannel::new((0..n).map(|i| format!("x{i}")).collect(), dims, states, vec![0.0; n]).unwrap()
    }

    fn constant_channel(n: usize) -> CqBroadcastChannel {
        let rho = CMatrix::diag(&[0.7, 0.3]);
        CqBroadcastChannel::new(
            (0..n).map(|i| format!("x{i}")).collect(),
            [2, 1, 1],
            vec![rho; n],
            (0..n).map(|i| i as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn channel_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = random_channel(&mut rng, 3, [2, 1, 2]);
        let back = CqBroadcastChannel::from_json(&ch.to_json()).unwrap();
        assert_eq!(back.inputs(), ch.inputs());
        for i in 0..3 {
            assert!(back.state(i).matrix().max_abs_diff(ch.state(i).matrix()) < 1e-15);
        }
        let bad = r#"{"inputs":["a"],"out_dims":[2,1,1],"states":{"a":[[[0.6,0],[0,0]],[[0,0],[0.5,0]]]},"cost":{"a":0}}"#;
        assert!(CqBroadcastChannel::from_json(bad).is_err());
    }

    #[test]
    fn model_validation() {
        let vars = vec![var("U2", 2), var("V1", 3)];
        let pmf = vec![PmfEntry { point: vec![0, 0], p: 0.5 }, PmfEntry { point: vec![1, 2], p: 0.4 }];
        let fusion = Fusion::Map(vec![]);
        assert!(AuxiliaryModel::new(vars.clone(), pmf, fusion.clone()).unwrap_err().to_string().contains("sums to"));
        let pmf = vec![PmfEntry { point: vec![0, 0], p: 1.0 }];
        assert!(AuxiliaryModel::new(vars.clone(), pmf.clone(), fusion).unwrap_err().to_string().contains("fusion"));
        assert!(AuxiliaryModel::new(vec![var("U2", 4)], vec![], Fusion::Coordinate("U2".into())).is_err());
        let m = AuxiliaryModel::new(
            vars,
            vec![PmfEntry { point: vec![0, 0], p: 1.0 - 1e-16 }, PmfEntry { point: vec![1, 1], p: 1e-16 }],
            Fusion::Map(vec![FusionEntry { point: vec![0, 0], x: "x0".into() }]),
        )
        .unwrap();
        assert_eq!(m.pmf.len(), 1, "entries below the support threshold are dropped");
        let back = AuxiliaryModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn point_mass_gives_single_label() {
        let ch = constant_channel(2);
        let m = AuxiliaryModel::from_fn(
            vec![var("U2", 2), var("U3", 2), var("V1", 2)],
            |p| if p == [1, 0, 1] { 1.0 } else { 0.0 },
            |_| "x1".into(),
        )
        .unwrap();
        let e = build_state_thm1(&m, &ch).unwrap();
        assert_eq!(e.entries().len(), 1);
        assert_eq!(e.entries()[0].input, 1);
        assert_eq!(e.entries()[0].label[e.coord_index("U").unwrap()], 1);
        assert_abs_diff_eq!(e.entropy_names(&["U2", "U3", "V1"], &[0]).unwrap(), binary_entropy(0.3), epsilon = 1e-12);
    }

    #[test]
    fn xor_of_uniform_bits_is_uniform() {
        let ch = constant_channel(1);
        let m = AuxiliaryModel::from_fn(vec![var("U2", 2), var("U3", 2)], |_| 0.25, |_| "x0".into()).unwrap();
        let e = build_state_thm1(&m, &ch).unwrap();
        assert_abs_diff_eq!(e.entropy_names(&["U"], &[]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.entropy_names(&["U2"], &[]).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_output_entropy_ignores_pmf() {
        let ch = constant_channel(3);
        let m = AuxiliaryModel::from_fn(
            vec![var("V1", 3)],
            |p| [0.2, 0.5, 0.3][p[0] as usize],
            |p| format!("x{}", p[0]),
        )
        .unwrap();
        let e = build_state_thm1(&m, &ch).unwrap();
        assert_abs_diff_eq!(e.entropy_names(&[], &[0]).unwrap(), binary_entropy(0.3), epsilon = 1e-12);
        assert_abs_diff_eq!(expected_cost(&m, &ch).unwrap(), 0.5 + 2.0 * 0.3, epsilon = 1e-15);
    }

    #[test]
    fn expected_cost_matches_support_sum() {
        let ch = constant_channel(4);
        let pmf = |p: &[u32]| [0.1, 0.2, 0.3, 0.4][(2 * p[0] + p[1]) as usize];
        let m = AuxiliaryModel::from_fn(vec![var("U2", 2), var("U3", 2)], pmf, |p| format!("x{}", p[0] ^ p[1] | p[1] << 1))
            .unwrap();
        let mut oracle = 0.0;
        for u2 in 0..2u32 {
            for u3 in 0..2u32 {
                oracle += pmf(&[u2, u3]) * ((u2 ^ u3) | (u3 << 1)) as f64;
            }
        }
        assert_abs_diff_eq!(expected_cost(&m, &ch).unwrap(), oracle, epsilon = 1e-15);
        let zero = CqBroadcastChannel::new(vec!["a".into()], [1, 1, 1], vec![CMatrix::identity(1)], vec![0.0]).unwrap();
        let mz = AuxiliaryModel::from_fn(vec![var("V1", 2)], |_| 0.5, |_| "a".into()).unwrap();
        assert_eq!(expected_cost(&mz, &zero).unwrap(), 0.0);
    }

    #[test]
    fn canonical_keys() {
        let size = |n: &str| if n == "T" { 1 } else { 3 };
        let k = EntropyKey::canonical(&[Item::lin(&[("B", 2), ("A", 1)], 3), Item::var("T")], 1, &size);
        assert_eq!(k.classical, vec![Item::lin(&[("A", 1), ("B", 2)], 3)]);
        let scaled = EntropyKey::canonical(&[Item::lin(&[("A", 2), ("B", 1)], 3)], 1, &size);
        assert_eq!(scaled, k, "scaling by a unit leaves the key unchanged");
        let single = EntropyKey::canonical(&[Item::lin(&[("A", 2), ("B", 0)], 3)], 0, &size);
        assert_eq!(single.classical, vec![Item::var("A")]);
        let redundant = EntropyKey::canonical(&[Item::var("A"), Item::var("B"), Item::lin(&[("A", 1), ("B", 1)], 3)], 0, &size);
        assert_eq!(redundant.classical.len(), 2);
        assert!(EntropyKey::canonical(&[Item::var("T")], 0, &size).is_empty());
        assert_eq!(k.to_string(), "H(A⊕2B,Y1)");
    }

    #[test]
    fn stepii_sum_labels_and_trivial_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = random_channel(&mut rng, 4, [2, 2, 1]);
        let vars = vec![var("U21", 2), var("U31", 2), var("V1", 2), var("X", 4)];
        let m = AuxiliaryModel::new(
            vars.clone(),
            product_space(&[2, 2, 2, 4]).into_iter().map(|point| PmfEntry { point, p: 1.0 / 32.0 }).collect(),
            Fusion::Coordinate("X".into()),
        )
        .unwrap();
        let e = build_state_stepii(&m, &ch).unwrap();
        let (a, b, s) = (e.coord_index("U21").unwrap(), e.coord_index("U31").unwrap(), e.coord_index("U1+").unwrap());
        assert!(e.entries().iter().all(|x| x.label[s] == x.label[a] ^ x.label[b]));
        assert_eq!(e.entries().len(), 32, "support enumeration");
        assert_eq!(e.size("U12"), 1);
        // all U trivial: only V and X remain
        let v_only = AuxiliaryModel::new(
            vec![var("V1", 2), var("X", 4)],
            product_space(&[2, 4]).into_iter().map(|point| PmfEntry { point, p: 0.125 }).collect(),
            Fusion::Coordinate("X".into()),
        )
        .unwrap();
        let ev = build_state_stepii(&v_only, &ch).unwrap();
        let key = ev.key(&[Item::var("U1+"), Item::var("U12"), Item::var("V1")], &[]).unwrap();
        assert_eq!(key.classical, vec![Item::var("V1")]);
        assert!(build_state_stepii(&AuxiliaryModel::new(vec![var("W", 2)], vec![PmfEntry { point: vec![0], p: 1.0 }], Fusion::Map(vec![FusionEntry { point: vec![0], x: "x0".into() }])).unwrap(), &ch).is_err());
    }

    #[test]
    fn stepiii_trivial_w_matches_stepii() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = random_channel(&mut rng, 2, [2, 1, 2]);
        let m = AuxiliaryModel::from_fn(
            vec![var("U12", 2), var("U32", 2), var("V2", 2), var("W", 1), var("Q12", 1)],
            |p| [0.1, 0.2, 0.3, 0.4][(p[0] * 2 + p[1]) as usize] / 2.0,
            |p| format!("x{}", p[2] ^ p[0]),
        )
        .unwrap();
        let e2 = build_state_stepii(&m, &ch).unwrap();
        let e3 = build_state_stepiii(&m, &ch).unwrap();
        let items = [Item::var("U2+"), Item::var("V2"), Item::var("W")];
        let k2 = e2.key(&items[..2], &[1]).unwrap();
        let k3 = e3.key(&items, &[1]).unwrap();
        assert_eq!(k2, k3);
        assert_eq!(e2.entropy_of_key(&k2), e3.entropy_of_key(&k3));
        // deterministic sums carry zero conditional entropy, exactly
        let base = [Item::var("U12"), Item::var("U32")];
        let h = e3.conditional_entropy((&[Item::var("U2+")], &[]), (&base, &[])).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn example_support_has_eight_states() {
        let ch = crate::example1::commutative_channel(0.01, 0.1).unwrap();
        let m = crate::example1::thm1_model(0.05).unwrap();
        let e = build_state_thm1(&m, &ch).unwrap();
        let mut oracle = std::collections::BTreeSet::new();
        for u2 in 0..2 {
            for u3 in 0..2 {
                for v1 in 0..2 {
                    oracle.insert((v1, u2, u3));
                }
            }
        }
        assert_eq!(e.distinct_states(), oracle.len());
        assert_eq!(e.entries().len(), 8);
    }

    #[test]
    fn noncommuting_y2_entropy_matches_average_state() {
        let phi2 = 40f64.to_radians();
        let ch = crate::example1::noncommuting_channel(0.01, phi2, 45f64.to_radians()).unwrap();
        let m = crate::example1::thm1_model(0.05).unwrap();
        let e = build_state_thm1(&m, &ch).unwrap();
        // average of |0><0| and |v><v| with equal weight, eigensolved directly
        let mut avg = CMatrix::pure(&[c(1.0, 0.0), c(0.0, 0.0)]).scale(0.5);
        avg.add_scaled(&CMatrix::pure(&[c(phi2.cos(), 0.0), c(phi2.sin(), 0.0)]), 0.5);
        let oracle = von_neumann_entropy(&validate(avg).unwrap());
        assert_abs_diff_eq!(e.entropy_names(&[], &[1]).unwrap(), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(oracle, binary_entropy((1.0 + phi2.cos()) / 2.0), epsilon = 1e-12);
    }

    #[test]
    fn unknown_coordinate_is_reported() {
        let ch = constant_channel(1);
        let m = AuxiliaryModel::from_fn(vec![var("V1", 2)], |_| 0.5, |_| "x0".into()).unwrap();
        let e = build_state_thm1(&m, &ch).unwrap();
        assert!(matches!(e.entropy_names(&["Z"], &[]), Err(Error::UnknownCoordinate(_))));
        assert!(e.entropy_names(&[], &[3]).is_err());
    }

    /// Random ensemble: `labels` outcomes over three coordinates, random states.
    fn random_ensemble(seed: u64, labels: u32, dims: [usize; 3]) -> CqEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_channel(&mut rng, labels as usize, dims);
        let weights: Vec<f64> = (0..labels).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let m = AuxiliaryModel::new(
            vec![var("V1", labels), var("V2", 2), var("V3", 2)],
            (0..labels)
                .map(|i| PmfEntry { point: vec![i, i % 2, (i / 2) % 2], p: weights[i as usize] / total })
                .collect(),
            Fusion::Coordinate("V1".into()),
        )
        .unwrap();
        build_state_thm1(&m, &ch).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn block_decomposition_identity(seed in any::<u64>(), labels in 1u32..=8) {
            let e = random_ensemble(seed, labels, [2, 2, 2]);
            for (names, q) in [(vec!["V2"], vec![0usize]), (vec!["V1"], vec![0, 2]), (vec!["V2", "V3"], vec![0, 1, 2])] {
                let fast = e.entropy_names(&names, &q).unwrap();
                let slow = von_neumann_entropy(&e.block_diagonal(&names, &q).unwrap());
                prop_assert!((fast - slow).abs() < 1e-8);
            }
        }

        #[test]
        fn strong_subadditivity(seed in any::<u64>(), labels in 2u32..=8) {
            let e = random_ensemble(seed, labels, [2, 2, 1]);
            let v = |n: &str| vec![Item::var(n)];
            for (a, y, b) in [("V2", 0usize, "V3"), ("V1", 1, "V2"), ("V3", 0, "V1")] {
                let ab: Vec<Item> = v(a).into_iter().chain(v(b)).collect();
                // I(A;Y|B) = H(A,B) + H(Y,B) - H(A,Y,B) - H(B)
                let i = e.cq_entropy(&ab, &[]).unwrap() + e.cq_entropy(&v(b), &[y]).unwrap()
                    - e.cq_entropy(&ab, &[y]).unwrap() - e.cq_entropy(&v(b), &[]).unwrap();
                prop_assert!(i >= -1e-9);
            }
        }

        #[test]
        fn data_processing(seed in any::<u64>(), labels in 2u32..=8) {
            let e = random_ensemble(seed, labels, [2, 2, 1]);
            let c1 = [Item::var("V1")];
            let i12 = e.mutual_information((&c1, &[]), (&[], &[0, 1])).unwrap();
            let i1 = e.mutual_information((&c1, &[]), (&[], &[0])).unwrap();
            prop_assert!(i12 >= i1 - 1e-9);
        }

        #[test]
        fn label_order_does_not_matter(seed in any::<u64>()) {
            let e = random_ensemble(seed, 4, [2, 1, 1]);
            let a = e.entropy_names(&["V2", "V3"], &[0]).unwrap();
            let b = e.entropy_names(&["V3", "V2"], &[0]).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn cache_is_shared_across_threads() {
        let e = random_ensemble(9, 6, [2, 2, 2]);
        let vals: Vec<f64> = std::thread::scope(|s| {
            let hs: Vec<_> = (0..4).map(|_| s.spawn(|| e.entropy_names(&["V2"], &[0, 1]).unwrap())).collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(vals.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(e.cached_terms(), 1);
    }
}
