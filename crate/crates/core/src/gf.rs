//! Prime-field arithmetic and coset / nested coset codes over `F_υ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PrimeField {
    upsilon: u32,
}

impl TryFrom<u32> for PrimeField {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        PrimeField::new(v)
    }
}

impl From<PrimeField> for u32 {
    fn from(f: PrimeField) -> u32 {
        f.upsilon
    }
}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= p as u64 {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    pub fn new(upsilon: u32) -> Result<Self> {
        if !is_prime(upsilon) {
            return Err(Error::NotPrime(upsilon));
        }
        Ok(Self { upsilon })
    }

    pub fn size(&self) -> u32 {
        self.upsilon
    }

    pub fn log_size(&self) -> f64 {
        (self.upsilon as f64).log2()
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.upsilon as u64) as u32
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    pub fn neg(&self, a: u32) -> u32 {
        (self.upsilon - a % self.upsilon) % self.upsilon
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.upsilon as u64) as u32
    }

    /// Multiplicative inverse via Fermat; `a` must be nonzero.
    pub fn inv(&self, a: u32) -> u32 {
        debug_assert!(a % self.upsilon != 0);
        let mut base = a as u64 % self.upsilon as u64;
        let mut e = self.upsilon - 2;
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % self.upsilon as u64;
            }
            base = base * base % self.upsilon as u64;
            e >>= 1;
        }
        acc as u32
    }

    pub fn check(&self, v: &[u32]) -> Result<()> {
        match v.iter().find(|&&x| x >= self.upsilon) {
            Some(&value) => Err(Error::OutOfField { upsilon: self.upsilon, value }),
            None => Ok(()),
        }
    }

    pub fn add_vec(&self, a: &[u32], b: &[u32]) -> Vec<u32> {
        a.iter().zip(b).map(|(&x, &y)| self.add(x, y)).collect()
    }

    pub fn sub_vec(&self, a: &[u32], b: &[u32]) -> Vec<u32> {
        a.iter().zip(b).map(|(&x, &y)| self.sub(x, y)).collect()
    }

    /// Row vector times matrix: `a · g`.
    pub fn vec_mat(&self, a: &[u32], g: &[Vec<u32>], n: usize) -> Vec<u32> {
        let mut out = vec![0u32; n];
        for (coef, row) in a.iter().zip(g) {
            if *coef == 0 {
                continue;
            }
            for (o, &r) in out.iter_mut().zip(row) {
                *o = self.add(*o, self.mul(*coef, r));
            }
        }
        out
    }

    /// Reduced row echelon basis of the span of `rows`. Pivots are taken at the
    /// first nonzero column, lowest row index first.
    pub fn row_basis(&self, rows: &[Vec<u32>], n: usize) -> Vec<Vec<u32>> {
        let mut m: Vec<Vec<u32>> = rows.to_vec();
        let mut basis_rows = 0usize;
        for col in 0..n {
            let Some(piv) = (basis_rows..m.len()).find(|&r| m[r][col] != 0) else {
                continue;
            };
            m.swap(basis_rows, piv);
            let inv = self.inv(m[basis_rows][col]);
            for x in m[basis_rows].iter_mut() {
                *x = self.mul(*x, inv);
            }
            let pivot_row = m[basis_rows].clone();
            for (r, row) in m.iter_mut().enumerate() {
                if r == basis_rows || row[col] == 0 {
                    continue;
                }
                let f = row[col];
                for (x, &p) in row.iter_mut().zip(&pivot_row) {
                    *x = self.sub(*x, self.mul(f, p));
                }
            }
            basis_rows += 1;
        }
        m.truncate(basis_rows);
        m
    }

    pub fn rank(&self, rows: &[Vec<u32>], n: usize) -> usize {
        self.row_basis(rows, n).len()
    }

    pub fn in_row_space(&self, rows: &[Vec<u32>], v: &[u32]) -> bool {
        let n = v.len();
        let basis = self.row_basis(rows, n);
        let mut r = v.to_vec();
        for b in &basis {
            let col = b.iter().position(|&x| x != 0).expect("basis rows are nonzero");
            let f = r[col];
            if f != 0 {
                for (x, &y) in r.iter_mut().zip(b) {
                    *x = self.sub(*x, self.mul(f, y));
                }
            }
        }
        r.iter().all(|&x| x == 0)
    }

    /// All vectors of length `len` in lexicographic order (last coordinate fastest).
    pub fn vectors(&self, len: usize) -> impl Iterator<Item = Vec<u32>> + '_ {
        let total = (self.upsilon as u64).pow(len as u32);
        (0..total).map(move |mut idx| {
            let mut v = vec![0u32; len];
            for slot in v.iter_mut().rev() {
                *slot = (idx % self.upsilon as u64) as u32;
                idx /= self.upsilon as u64;
            }
            v
        })
    }
}

fn check_matrix(f: &PrimeField, g: &[Vec<u32>], n: usize, what: &str) -> Result<()> {
    for row in g {
        if row.len() != n {
            return Err(Error::Dimension(format!("{what} row has length {} (n = {n})", row.len())));
        }
        f.check(row)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetCode {
    pub upsilon: PrimeField,
    pub n: usize,
    pub g: Vec<Vec<u32>>,
    pub b: Vec<u32>,
}

impl CosetCode {
    pub fn new(upsilon: u32, g: Vec<Vec<u32>>, b: Vec<u32>) -> Result<Self> {
        let field = PrimeField::new(upsilon)?;
        let n = b.len();
        check_matrix(&field, &g, n, "g")?;
        field.check(&b)?;
        Ok(Self { upsilon: field, n, g, b })
    }

    pub fn k(&self) -> usize {
        self.g.len()
    }

    pub fn rate(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.k() as f64 / self.n as f64 * self.upsilon.log_size()
    }
}

pub fn coset_codeword(code: &CosetCode, a: &[u32]) -> Result<Vec<u32>> {
    if a.len() != code.k() {
        return Err(Error::Dimension(format!("message length {} != k = {}", a.len(), code.k())));
    }
    let f = code.upsilon;
    f.check(a)?;
    Ok(f.add_vec(&f.vec_mat(a, &code.g, code.n), &code.b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestedCosetCode {
    pub upsilon: PrimeField,
    pub n: usize,
    #[serde(rename = "gI")]
    pub g_i: Vec<Vec<u32>>,
    #[serde(rename = "gOI")]
    pub g_oi: Vec<Vec<u32>>,
    pub b: Vec<u32>,
}

impl NestedCosetCode {
    pub fn new(upsilon: u32, g_i: Vec<Vec<u32>>, g_oi: Vec<Vec<u32>>, b: Vec<u32>) -> Result<Self> {
        let code = Self { upsilon: PrimeField::new(upsilon)?, n: b.len(), g_i, g_oi, b };
        code.validate()?;
        Ok(code)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.len() != self.n {
            return Err(Error::Dimension(format!("bias length {} != n = {}", self.b.len(), self.n)));
        }
        check_matrix(&self.upsilon, &self.g_i, self.n, "gI")?;
        check_matrix(&self.upsilon, &self.g_oi, self.n, "gOI")?;
        self.upsilon.check(&self.b)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let code: Self = serde_json::from_str(s)?;
        code.validate()?;
        Ok(code)
    }

    pub fn k(&self) -> usize {
        self.g_i.len()
    }

    pub fn l(&self) -> usize {
        self.g_oi.len()
    }

    fn all_rows(&self) -> Vec<Vec<u32>> {
        self.g_i.iter().chain(&self.g_oi).cloned().collect()
    }

    /// The coset `{u(a, m) : a}` for a fixed outer message.
    pub fn coset(&self, m: &[u32]) -> Result<Vec<Vec<u32>>> {
        self.upsilon
            .vectors(self.k())
            .map(|a| ncc_codeword(self, &a, m))
            .collect()
    }

    /// Every codeword over all `(a, m)`.
    pub fn codeword_set(&self) -> std::collections::BTreeSet<Vec<u32>> {
        let f = self.upsilon;
        f.vectors(self.k() + self.l())
            .map(|am| {
                let (a, m) = am.split_at(self.k());
                ncc_codeword(self, a, m).expect("enumerated messages are in range")
            })
            .collect()
    }
}

pub fn ncc_codeword(code: &NestedCosetCode, a: &[u32], m: &[u32]) -> Result<Vec<u32>> {
    if a.len() != code.k() || m.len() != code.l() {
        return Err(Error::Dimension(format!(
            "(a, m) lengths ({}, {}) != (k, l) = ({}, {})",
            a.len(),
            m.len(),
            code.k(),
            code.l()
        )));
    }
    let f = code.upsilon;
    f.check(a)?;
    f.check(m)?;
    let inner = f.vec_mat(a, &code.g_i, code.n);
    let outer = f.vec_mat(m, &code.g_oi, code.n);
    Ok(f.add_vec(&f.add_vec(&inner, &outer), &code.b))
}

fn same_space(a: &NestedCosetCode, b: &NestedCosetCode) -> Result<()> {
    if a.upsilon != b.upsilon {
        return Err(Error::FieldMismatch(a.upsilon.size(), b.upsilon.size()));
    }
    if a.n != b.n {
        return Err(Error::Dimension(format!("block lengths {} vs {}", a.n, b.n)));
    }
    Ok(())
}

/// True iff every codeword of `small` is a codeword of `large`.
pub fn is_subcoset(small: &NestedCosetCode, large: &NestedCosetCode) -> Result<bool> {
    same_space(small, large)?;
    let f = large.upsilon;
    let rows = large.all_rows();
    let gens_ok = small.all_rows().iter().all(|r| f.in_row_space(&rows, r));
    Ok(gens_ok && f.in_row_space(&rows, &f.sub_vec(&small.b, &large.b)))
}

fn is_prefix(short: &[Vec<u32>], long: &[Vec<u32>]) -> bool {
    short.len() <= long.len() && short.iter().zip(long).all(|(a, b)| a == b)
}

fn pad(v: &[u32], len: usize) -> Vec<u32> {
    let mut out = v.to_vec();
    out.resize(len, 0);
    out
}

/// Sum coset of two nested codes whose generator rows are nested (the smaller
/// code's rows are a prefix of the larger's), together with `m2 ⊕ m3`.
pub fn sum_coset(
    c2: &NestedCosetCode,
    c3: &NestedCosetCode,
    m2: &[u32],
    m3: &[u32],
) -> Result<(NestedCosetCode, Vec<u32>)> {
    same_space(c2, c3)?;
    if m2.len() != c2.l() || m3.len() != c3.l() {
        return Err(Error::Dimension("message lengths do not match the codes".into()));
    }
    let nested = |a: &NestedCosetCode, b: &NestedCosetCode| {
        is_prefix(&a.g_i, &b.g_i) && is_prefix(&a.g_oi, &b.g_oi)
    };
    let large = if nested(c2, c3) {
        c3
    } else if nested(c3, c2) {
        c2
    } else {
        return Err(Error::NotSubcoset);
    };
    let f = c2.upsilon;
    let t = large.l();
    let sum = NestedCosetCode {
        upsilon: f,
        n: c2.n,
        g_i: large.g_i.clone(),
        g_oi: large.g_oi.clone(),
        b: f.add_vec(&c2.b, &c3.b),
    };
    Ok((sum, f.add_vec(&pad(m2, t), &pad(m3, t))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ncc(up: u32, gi: &[&[u32]], goi: &[&[u32]], b: &[u32]) -> NestedCosetCode {
        NestedCosetCode::new(
            up,
            gi.iter().map(|r| r.to_vec()).collect(),
            goi.iter().map(|r| r.to_vec()).collect(),
            b.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn primality_by_trial_division() {
        let primes: Vec<u32> = (0..30).filter(|&p| is_prime(p)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert!(PrimeField::new(4).is_err());
        assert!(PrimeField::new(1).is_err());
    }

    #[test]
    fn inverses_mod_seven() {
        let f = PrimeField::new(7).unwrap();
        for a in 1..7 {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    #[test]
    fn coset_codeword_examples() {
        let id = vec![vec![1, 0], vec![0, 1]];
        let c = CosetCode::new(2, id.clone(), vec![0, 0]).unwrap();
        assert_eq!(coset_codeword(&c, &[1, 0]).unwrap(), vec![1, 0]);
        let c = CosetCode::new(2, id, vec![1, 1]).unwrap();
        assert_eq!(coset_codeword(&c, &[1, 0]).unwrap(), vec![0, 1]);
        let c = CosetCode::new(3, vec![vec![1, 2], vec![2, 1]], vec![1, 0]).unwrap();
        // direct mod-3 arithmetic
        let expect = vec![(1 + 2 + 1) % 3, (2 + 1) % 3];
        assert_eq!(coset_codeword(&c, &[1, 1]).unwrap(), expect);
        assert_eq!(expect, vec![1, 0]);
    }

    #[test]
    fn coset_codeword_errors() {
        let c = CosetCode::new(2, vec![vec![1, 0]], vec![0, 0]).unwrap();
        assert!(matches!(coset_codeword(&c, &[1, 0]), Err(Error::Dimension(_))));
        assert!(matches!(coset_codeword(&c, &[2]), Err(Error::OutOfField { .. })));
        assert!(CosetCode::new(3, vec![vec![3, 0]], vec![0, 0]).is_err());
    }

    #[test]
    fn rate_formula() {
        let c = CosetCode::new(3, vec![vec![1, 2, 0, 0]], vec![0; 4]).unwrap();
        assert!((c.rate() - 3f64.log2() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn ncc_codeword_examples() {
        let z = ncc(2, &[&[1, 1, 0]], &[&[0, 1, 1]], &[0, 0, 0]);
        assert_eq!(ncc_codeword(&z, &[0], &[0]).unwrap(), vec![0, 0, 0]);
        assert_eq!(ncc_codeword(&z, &[0], &[1]).unwrap(), vec![0, 1, 1]);
        let c = ncc(2, &[&[1, 1, 0]], &[&[0, 1, 1]], &[1, 0, 0]);
        let xor: Vec<u32> = (0..3).map(|i| [1, 1, 0][i] ^ [0, 1, 1][i] ^ [1, 0, 0][i]).collect();
        assert_eq!(ncc_codeword(&c, &[1], &[1]).unwrap(), xor);
        assert_eq!(xor, vec![0, 0, 1]);
        assert!(ncc_codeword(&c, &[1, 0], &[1]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = ncc(3, &[&[1, 2]], &[&[0, 1]], &[2, 2]);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"gI\"") && s.contains("\"gOI\"") && s.contains("\"upsilon\":3"));
        assert_eq!(NestedCosetCode::from_json(&s).unwrap(), c);
        assert!(NestedCosetCode::from_json(r#"{"upsilon":4,"n":1,"gI":[],"gOI":[],"b":[0]}"#).is_err());
    }

    #[test]
    fn subcoset_examples() {
        let large = ncc(2, &[&[1, 1, 0]], &[&[0, 1, 1]], &[0, 0, 0]);
        assert!(is_subcoset(&large, &large).unwrap());
        let small = ncc(2, &[&[1, 1, 0]], &[], &[0, 0, 0]);
        assert!(is_subcoset(&small, &large).unwrap());
        let bad = ncc(2, &[&[1, 0, 0]], &[], &[0, 0, 0]);
        assert!(!is_subcoset(&bad, &large).unwrap());
        // exhaustive oracle agrees
        let big = large.codeword_set();
        assert!(!bad.codeword_set().is_subset(&big));
        let other = ncc(3, &[&[1, 1, 0]], &[], &[0, 0, 0]);
        assert!(matches!(is_subcoset(&other, &large), Err(Error::FieldMismatch(3, 2))));
    }

    #[test]
    fn sum_coset_examples() {
        let c = ncc(2, &[&[1, 0, 1]], &[&[0, 1, 1]], &[1, 1, 0]);
        let (sum, m) = sum_coset(&c, &c, &[0], &[0]).unwrap();
        assert!(sum.codeword_set().contains(&vec![0, 0, 0]));
        assert_eq!(m, vec![0]);
        let c3 = ncc(3, &[], &[&[1, 0], &[0, 1]], &[0, 0]);
        let (_, m) = sum_coset(&c3, &c3, &[1, 2], &[2, 2]).unwrap();
        assert_eq!(m, vec![0, 1]);
        let a = ncc(2, &[], &[&[1, 0, 0]], &[0, 0, 0]);
        let b = ncc(2, &[], &[&[0, 1, 0]], &[0, 0, 0]);
        assert!(matches!(sum_coset(&a, &b, &[0], &[0]), Err(Error::NotSubcoset)));
    }

    fn random_rows(up: u32, rows: usize, n: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
        prop::collection::vec(prop::collection::vec(0..up, n), rows)
    }

    prop_compose! {
        fn nested_pair()(up in prop::sample::select(vec![2u32, 3]), n in 2usize..=5)
            (gi in random_rows(up, 2, n), goi in random_rows(up, 2, n),
             b2 in prop::collection::vec(0..up, n), b3 in prop::collection::vec(0..up, n),
             s2 in 0usize..=2, t2 in 0usize..=2, up in Just(up), n in Just(n))
            -> (NestedCosetCode, NestedCosetCode)
        {
            let large = NestedCosetCode::new(up, gi.clone(), goi.clone(), b3).unwrap();
            let small = NestedCosetCode::new(up, gi[..s2].to_vec(), goi[..t2].to_vec(), b2).unwrap();
            assert_eq!(large.n, n);
            (small, large)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pairwise_closure((c2, c3) in nested_pair(), swap in any::<bool>()) {
            let (c2, c3) = if swap { (c3, c2) } else { (c2, c3) };
            let f = c2.upsilon;
            for m2 in f.vectors(c2.l()) {
                for m3 in f.vectors(c3.l()) {
                    let (sum, mplus) = sum_coset(&c2, &c3, &m2, &m3).unwrap();
                    let members: std::collections::BTreeSet<_> =
                        sum.coset(&mplus).unwrap().into_iter().collect();
                    for u2 in c2.coset(&m2).unwrap() {
                        for u3 in c3.coset(&m3).unwrap() {
                            prop_assert!(members.contains(&f.add_vec(&u2, &u3)));
                        }
                    }
                }
            }
        }

        #[test]
        fn coset_cardinality(gi in random_rows(3, 2, 4), b in prop::collection::vec(0..3u32, 4)) {
            let c = NestedCosetCode::new(3, gi.clone(), vec![vec![1, 0, 0, 1]], b).unwrap();
            let f = c.upsilon;
            for m in f.vectors(1) {
                let distinct: std::collections::BTreeSet<_> = c.coset(&m).unwrap().into_iter().collect();
                prop_assert_eq!(distinct.len(), 3usize.pow(f.rank(&gi, 4) as u32));
            }
        }

        #[test]
        fn coset_disjointness(up in prop::sample::select(vec![2u32, 3]),
                              rows in random_rows(3, 3, 6), b in prop::collection::vec(0..3u32, 6)) {
            let rows: Vec<Vec<u32>> = rows.iter().map(|r| r.iter().map(|x| x % up).collect()).collect();
            let b: Vec<u32> = b.iter().map(|x| x % up).collect();
            let f = PrimeField::new(up).unwrap();
            let (gi, goi) = rows.split_at(1);
            let c = NestedCosetCode::new(up, gi.to_vec(), goi.to_vec(), b).unwrap();
            let independent = f.rank(&rows, 6) == f.rank(gi, 6) + f.rank(goi, 6)
                && f.rank(goi, 6) == goi.len();
            prop_assume!(independent);
            let cosets: Vec<std::collections::BTreeSet<_>> = f
                .vectors(c.l())
                .map(|m| c.coset(&m).unwrap().into_iter().collect())
                .collect();
            for i in 0..cosets.len() {
                for j in i + 1..cosets.len() {
                    prop_assert!(cosets[i].is_disjoint(&cosets[j]));
                }
            }
        }

        #[test]
        fn subcoset_matches_enumeration((small, large) in nested_pair()) {
            let oracle = small.codeword_set().is_subset(&large.codeword_set());
            prop_assert_eq!(is_subcoset(&small, &large).unwrap(), oracle);
        }
    }

    #[test]
    fn closure_at_n8_random_messages() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let n = 8;
        let mut row = || (0..n).map(|_| rng.gen_range(0..2u32)).collect::<Vec<_>>();
        let gi = vec![row(), row()];
        let goi = vec![row(), row(), row()];
        let c3 = NestedCosetCode::new(2, gi.clone(), goi.clone(), row()).unwrap();
        let c2 = NestedCosetCode::new(2, gi[..1].to_vec(), goi[..2].to_vec(), row()).unwrap();
        let f = c2.upsilon;
        for m2 in f.vectors(2) {
            for m3 in f.vectors(3) {
                let (sum, mplus) = sum_coset(&c2, &c3, &m2, &m3).unwrap();
                let members: std::collections::BTreeSet<_> =
                    sum.coset(&mplus).unwrap().into_iter().collect();
                for a2 in f.vectors(1) {
                    for a3 in f.vectors(2) {
                        let u = f.add_vec(
                            &ncc_codeword(&c2, &a2, &m2).unwrap(),
                            &ncc_codeword(&c3, &a3, &m3).unwrap(),
                        );
                        assert!(members.contains(&u));
                    }
                }
            }
        }
    }
}
