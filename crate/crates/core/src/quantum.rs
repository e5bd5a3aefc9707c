//! Dense complex linear algebra for small density operators.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Eigenvalues at or below this define the kernel everywhere in the crate.
pub const SUPPORT_CUTOFF: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const NEG_EIG_TOL: f64 = 1e-10;
const JACOBI_OFF_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{})", self.n, self.n)?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = c(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("matrix is not square".into()));
        }
        Ok(Self { n, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_real(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&x| c(x, 0.0)).collect()).collect())
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        m
    }

    /// `|ψ⟩⟨ψ|` for an unnormalized-safe amplitude vector.
    pub fn pure(psi: &[Complex64]) -> Self {
        let n = psi.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add_scaled(&mut self, other: &CMatrix, s: f64) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        for i in 0..self.n {
            for j in i..self.n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `tr(A B)` without forming the product.
    pub fn trace_product(&self, other: &CMatrix) -> Complex64 {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = c(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn kron(&self, other: &CMatrix) -> Self {
        let (a, b) = (self.n, other.n);
        let mut m = Self::zeros(a * b);
        for i in 0..a {
            for j in 0..a {
                let s = self[(i, j)];
                if s == c(0.0, 0.0) {
                    continue;
                }
                for k in 0..b {
                    for l in 0..b {
                        m[(i * b + k, j * b + l)] = s * other[(k, l)];
                    }
                }
            }
        }
        m
    }

    pub fn matmul(&self, other: &CMatrix) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == c(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        m
    }

    /// `U diag(f(λ)) U†` from an eigendecomposition.
    fn spectral_map(eig: &Eigen, f: impl Fn(f64) -> f64) -> Self {
        let n = eig.values.len();
        let mut m = Self::zeros(n);
        for (k, &lam) in eig.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = eig.vectors[(i, k)] * w;
                for j in 0..n {
                    m[(i, j)] += vik * eig.vectors[(j, k)].conj();
                }
            }
        }
        m
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        let mut m = self.clone();
        m.add_scaled(rhs, 1.0);
        m
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        let mut m = self.clone();
        m.add_scaled(rhs, -1.0);
        m
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| [self[(i, j)].re, self[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        CMatrix::from_rows(
            rows.into_iter().map(|r| r.into_iter().map(|[re, im]| c(re, im)).collect()).collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Eigenvalues (ascending) with eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
    pub sweeps: usize,
}

impl Eigen {
    pub fn reconstruct(&self) -> CMatrix {
        CMatrix::spectral_map(self, |x| x)
    }
}

fn off_norm(a: &CMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
pub fn eigh(m: &CMatrix) -> Result<Eigen> {
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL * m.frobenius().max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let n = m.dim();
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] = c(a[(i, i)].re, 0.0);
    }
    let mut v = CMatrix::identity(n);
    let tol = JACOBI_OFF_TOL * m.frobenius().max(1.0);
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS && off_norm(&a) > tol {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let g = a[(p, q)];
                let gabs = g.norm();
                if gabs < 1e-300 {
                    continue;
                }
                let phase = g / gabs;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * gabs);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // U = D R with D = diag(1, conj(phase)) on (p, q).
                let upp = c(cs, 0.0);
                let upq = c(sn, 0.0);
                let uqp = -phase.conj() * sn;
                let uqq = phase.conj() * cs;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * upp + akq * uqp;
                    a[(k, q)] = akp * upq + akq * uqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
                    a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
                }
                a[(p, q)] = c(0.0, 0.0);
                a[(q, p)] = c(0.0, 0.0);
                a[(p, p)] = c(a[(p, p)].re, 0.0);
                a[(q, q)] = c(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * upp + vkq * uqp;
                    v[(k, q)] = vkp * upq + vkq * uqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = v[(k, src)];
        }
    }
    Ok(Eigen { values, vectors, sweeps })
}

pub fn eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    Ok(eigh(m)?.values)
}

/// Shannon/von Neumann entropy in bits of a spectrum, ignoring values at or below the cutoff.
pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    let mut h = 0.0;
    for &l in values {
        if l > SUPPORT_CUTOFF {
            h -= l * l.log2();
        }
    }
    h.max(0.0)
}

pub fn binary_entropy(p: f64) -> f64 {
    entropy_of_spectrum(&[p, 1.0 - p])
}

/// `p * q = p(1-q) + (1-p)q`.
pub fn binary_convolution(p: f64, q: f64) -> f64 {
    p * (1.0 - q) + (1.0 - p) * q
}

/// Validated density operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityOperator(CMatrix);

impl<'de> Deserialize<'de> for DensityOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        validate(CMatrix::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl DensityOperator {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(CMatrix::identity(n).scale(1.0 / n as f64))
    }

    pub fn tensor(&self, other: &DensityOperator) -> Self {
        Self(self.0.kron(&other.0))
    }
}

pub fn validate(m: CMatrix) -> Result<DensityOperator> {
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
    }
    let tr = m.trace().re;
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::InvalidState(format!("trace {tr}")));
    }
    let min = eigenvalues(&m)?.first().copied().unwrap_or(0.0);
    if min < -NEG_EIG_TOL {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
    }
    Ok(DensityOperator(m))
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    let m = rho.matrix();
    if m.dim() == 1 {
        return 0.0;
    }
    let values = eigenvalues(m).expect("validated operators are Hermitian");
    entropy_of_spectrum(&values)
}

/// Ordered tensor factor dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductSpace {
    pub dims: Vec<usize>,
}

impl ProductSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Dimension("factor dimension 0".into()));
        }
        Ok(Self { dims })
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Partial trace over the factors not listed in `keep`. Kept factors stay in
/// their original order.
pub fn partial_trace_matrix(m: &CMatrix, space: &ProductSpace, keep: &[usize]) -> Result<CMatrix> {
    if space.total() != m.dim() {
        return Err(Error::Dimension(format!(
            "space dims {:?} do not multiply to {}",
            space.dims,
            m.dim()
        )));
    }
    let k = space.dims.len();
    if keep.is_empty() || keep.iter().any(|&i| i >= k) {
        return Err(Error::Dimension(format!("bad keep set {keep:?} for {k} factors")));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.len() == k {
        return Ok(m.clone());
    }
    let traced: Vec<usize> = (0..k).filter(|i| !kept.contains(i)).collect();
    let dk: usize = kept.iter().map(|&i| space.dims[i]).product();
    let dt: usize = traced.iter().map(|&i| space.dims[i]).product();
    // strides of each factor in the full index
    let mut stride = vec![1usize; k];
    for i in (0..k.saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * space.dims[i + 1];
    }
    let offsets = |factors: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for &f in factors.iter().rev() {
            off += (idx % space.dims[f]) * stride[f];
            idx /= space.dims[f];
        }
        off
    };
    let kept_off: Vec<usize> = (0..dk).map(|i| offsets(&kept, i)).collect();
    let traced_off: Vec<usize> = (0..dt).map(|i| offsets(&traced, i)).collect();
    let mut out = CMatrix::zeros(dk);
    for (i, &oi) in kept_off.iter().enumerate() {
        for (j, &oj) in kept_off.iter().enumerate() {
            let mut acc = c(0.0, 0.0);
            for &t in &traced_off {
                acc += m[(oi + t, oj + t)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

pub fn partial_trace(rho: &DensityOperator, space: &ProductSpace, keep: &[usize]) -> Result<DensityOperator> {
    Ok(DensityOperator(partial_trace_matrix(rho.matrix(), space, keep)?))
}

/// Inverse square root on the support, zero on the kernel.
pub fn psd_inv_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = eigh(m)?;
    Ok(CMatrix::spectral_map(&eig, |l| if l > SUPPORT_CUTOFF { 1.0 / l.sqrt() } else { 0.0 }))
}

/// Projector onto the eigenvectors with eigenvalue above the cutoff.
pub fn support_projector(m: &CMatrix) -> Result<CMatrix> {
    let eig = eigh(m)?;
    Ok(CMatrix::spectral_map(&eig, |l| if l > SUPPORT_CUTOFF { 1.0 } else { 0.0 }))
}

pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = eigh(m)?;
    Ok(CMatrix::spectral_map(&eig, |l| l.max(0.0).sqrt()))
}
