use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, ONE, ZERO};

/// Largest chain the operator builders accept unless a larger cap is passed explicitly.
pub const DEFAULT_MAX_SITES: usize = 14;

/// A 2x2 on-site matrix in the local basis (|up>, |down>).
pub type Local2 = [[C64; 2]; 2];

/// Compressed sparse row matrix over the complex numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, row_ptr: vec![0; n + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![ONE; n])
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &v) in d.iter().enumerate() {
            if v != ZERO {
                m.cols.push(i);
                m.vals.push(v);
            }
            m.row_ptr[i + 1] = m.cols.len();
        }
        m
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut m = Self::zeros(n);
        let mut iter = triplets.into_iter().peekable();
        for row in 0..n {
            while let Some(&(r, c, v)) = iter.peek() {
                if r != row {
                    break;
                }
                iter.next();
                let mut acc = v;
                while let Some(&(r2, c2, v2)) = iter.peek() {
                    if r2 == r && c2 == c {
                        acc += v2;
                        iter.next();
                    } else {
                        break;
                    }
                }
                if acc != ZERO {
                    m.cols.push(c);
                    m.vals.push(acc);
                }
            }
            m.row_ptr[row + 1] = m.cols.len();
        }
        m
    }

    pub fn from_dense(d: &DMatrix<C64>) -> Self {
        let n = d.nrows();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = d[(i, j)];
                if v != ZERO {
                    m.cols.push(j);
                    m.vals.push(v);
                }
            }
            m.row_ptr[i + 1] = m.cols.len();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[a..b].binary_search(&j) {
            Ok(k) => self.vals[a + k],
            Err(_) => ZERO,
        }
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n).map(|i| self.row(i).map(|(j, a)| a * v[j]).sum()).collect()
    }

    /// `A^† v` without forming the adjoint.
    pub fn adjoint_matvec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.n];
        for i in 0..self.n {
            let vi = v[i];
            if vi == ZERO {
                continue;
            }
            for (j, a) in self.row(i) {
                out[j] += a.conj() * vi;
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                trip.push((j, i, a.conj()));
            }
        }
        Self::from_triplets(self.n, trip)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= s);
        if s == ZERO {
            return Self::zeros(self.n);
        }
        m
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Self {
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            trip.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            trip.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        Self::from_triplets(self.n, trip)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut acc = vec![ZERO; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; n];
        let mut m = Self::zeros(n);
        for i in 0..n {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != ZERO {
                    m.cols.push(j);
                    m.vals.push(acc[j]);
                }
                acc[j] = ZERO;
                mark[j] = false;
            }
            touched.clear();
            m.row_ptr[i + 1] = m.cols.len();
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = self.combine(ONE, other, -ONE);
        d.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Upper bound on the spectral norm: sqrt(max row sum * max column sum).
    pub fn norm_bound(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        let mut row_max: f64 = 0.0;
        for i in 0..self.n {
            let mut s = 0.0;
            for (j, v) in self.row(i) {
                s += v.norm();
                col[j] += v.norm();
            }
            row_max = row_max.max(s);
        }
        (row_max * col.iter().copied().fold(0.0, f64::max)).sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, _)| j == i))
    }
}

/// Inclusive interval of sites an operator acts on non-trivially.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Support {
    pub first: usize,
    pub last: usize,
}

impl Support {
    pub fn new(first: usize, last: usize) -> Self {
        assert!(first <= last, "empty support");
        Self { first, last }
    }

    pub fn site(x: usize) -> Self {
        Self { first: x, last: x }
    }

    pub fn contains(&self, x: usize) -> bool {
        self.first <= x && x <= self.last
    }

    pub fn hull(&self, other: &Support) -> Support {
        Support { first: self.first.min(other.first), last: self.last.max(other.last) }
    }
}

/// An operator on the 2^L tensor-product space of a spin-1/2 chain.
///
/// Basis convention: site 0 is the slowest-varying index, so site `x` is bit
/// `L-1-x` of the basis label; bit value 0 is |up> (σ³ = +1).
#[derive(Clone, Debug, PartialEq)]
pub struct ManyBodyOperator {
    sites: usize,
    matrix: CsrMatrix,
    support: Option<Support>,
}

impl ManyBodyOperator {
    pub fn new(sites: usize, matrix: CsrMatrix, support: Option<Support>) -> Result<Self> {
        let expected = 1usize << sites;
        if matrix.dim() != expected {
            return Err(Error::DimensionMismatch { expected, found: matrix.dim() });
        }
        if let Some(s) = support {
            if s.last >= sites {
                return Err(Error::Index(format!("support ends at site {} on a chain of {sites}", s.last)));
            }
        }
        Ok(Self { sites, matrix, support })
    }

    pub fn from_dense(sites: usize, d: &DMatrix<C64>) -> Result<Self> {
        Self::new(sites, CsrMatrix::from_dense(d), None)
    }

    pub fn identity(sites: usize) -> Self {
        Self { sites, matrix: CsrMatrix::identity(1 << sites), support: None }
    }

    pub fn zeros(sites: usize) -> Self {
        Self { sites, matrix: CsrMatrix::zeros(1 << sites), support: None }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn support(&self) -> Option<Support> {
        self.support
    }

    pub fn with_support(mut self, support: Option<Support>) -> Self {
        self.support = support;
        self
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.matvec(v)
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.adjoint_matvec(v)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    fn joint_support(&self, other: &Self) -> Option<Support> {
        match (self.support, other.support) {
            (Some(a), Some(b)) => Some(a.hull(&b)),
            _ => None,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self { sites: self.sites, matrix: self.matrix.adjoint(), support: self.support }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { sites: self.sites, matrix: self.matrix.scale(s), support: self.support }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { sites: self.sites, matrix: self.matrix.matmul(&other.matrix), support: self.joint_support(other) })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(ONE, other, ONE)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(ONE, other, -ONE)
    }

    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { sites: self.sites, matrix: self.matrix.combine(a, &other.matrix, b), support: self.joint_support(other) })
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// `{self, other}`.
    pub fn anticommutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.add(&other.mul(self)?)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.matrix.max_abs_diff(&other.matrix))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.max_abs_diff(&self.matrix.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Spectral norm: exact SVD for small spaces, Lanczos on `A^† A` otherwise.
    pub fn operator_norm(&self) -> f64 {
        if self.matrix.nnz() == 0 {
            return 0.0;
        }
        if self.dim() <= 256 {
            let d = self.to_dense();
            return d.singular_values().iter().copied().fold(0.0, f64::max);
        }
        linalg::operator_norm_matfree(&|v| self.apply(v), &|v| self.apply_adjoint(v), self.dim())
    }

    pub fn eigenvalues_hermitian(&self) -> Vec<f64> {
        linalg::eigh(&self.to_dense()).0
    }
}

pub(crate) fn check_sites(sites: usize, max_sites: usize) -> Result<()> {
    if sites == 0 {
        return Err(Error::Validation("chain length must be at least 1".into()));
    }
    if sites > max_sites {
        return Err(Error::Capacity(format!("{sites} sites exceed the cap of {max_sites} (dimension 2^{sites})")));
    }
    Ok(())
}

/// Single-site operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SiteOp {
    #[serde(rename = "sigma1")]
    Sigma1,
    #[serde(rename = "sigma2")]
    Sigma2,
    #[serde(rename = "sigma3")]
    Sigma3,
    #[serde(rename = "sigma+")]
    SigmaPlus,
    #[serde(rename = "sigma-")]
    SigmaMinus,
    #[serde(rename = "identity")]
    Identity,
}

impl SiteOp {
    pub fn matrix(self) -> Local2 {
        let (z, o, i) = (ZERO, ONE, linalg::I);
        match self {
            SiteOp::Sigma1 => [[z, o], [o, z]],
            SiteOp::Sigma2 => [[z, -i], [i, z]],
            SiteOp::Sigma3 => [[o, z], [z, -o]],
            SiteOp::SigmaPlus => [[z, o], [z, z]],
            SiteOp::SigmaMinus => [[z, z], [o, z]],
            SiteOp::Identity => [[o, z], [z, o]],
        }
    }
}

/// Tensor product of on-site matrices placed at distinct sites, identity elsewhere.
pub fn product_operator(sites: usize, factors: &[(usize, Local2)]) -> Result<ManyBodyOperator> {
    product_operator_capped(sites, factors, DEFAULT_MAX_SITES)
}

pub fn product_operator_capped(sites: usize, factors: &[(usize, Local2)], max_sites: usize) -> Result<ManyBodyOperator> {
    check_sites(sites, max_sites)?;
    for (k, &(x, _)) in factors.iter().enumerate() {
        if x >= sites {
            return Err(Error::Index(format!("site {x} out of range for L = {sites}")));
        }
        if factors[..k].iter().any(|&(y, _)| y == x) {
            return Err(Error::Validation(format!("site {x} appears twice in a product")));
        }
    }
    let dim = 1usize << sites;
    let mut trip = Vec::new();
    for col in 0..dim {
        // expand column `col` factor by factor
        let mut entries: Vec<(usize, C64)> = vec![(col, ONE)];
        for &(x, m) in factors {
            let shift = sites - 1 - x;
            let s = (col >> shift) & 1;
            let mut next = Vec::with_capacity(entries.len() * 2);
            for &(row, amp) in &entries {
                for r in 0..2 {
                    let a = m[r][s];
                    if a != ZERO {
                        next.push(((row & !(1 << shift)) | (r << shift), amp * a));
                    }
                }
            }
            entries = next;
        }
        trip.extend(entries.into_iter().map(|(row, a)| (row, col, a)));
    }
    let support = if factors.is_empty() {
        None
    } else {
        let lo = factors.iter().map(|f| f.0).min().unwrap_or(0);
        let hi = factors.iter().map(|f| f.0).max().unwrap_or(0);
        Some(Support::new(lo, hi))
    };
    ManyBodyOperator::new(sites, CsrMatrix::from_triplets(dim, trip), support)
}

/// `1 ⊗ … ⊗ op_x ⊗ … ⊗ 1`.
pub fn site_operator(kind: SiteOp, x: usize, sites: usize) -> Result<ManyBodyOperator> {
    if x >= sites {
        return Err(Error::Index(format!("site {x} out of range for L = {sites}")));
    }
    let op = product_operator(sites, &[(x, kind.matrix())])?;
    Ok(op.with_support(Some(Support::site(x))))
}

/// Sum of weighted Pauli strings, each a list of (site, operator); built directly as triplets.
pub fn pauli_sum(sites: usize, terms: &[(C64, Vec<(usize, SiteOp)>)], max_sites: usize) -> Result<ManyBodyOperator> {
    check_sites(sites, max_sites)?;
    let dim = 1usize << sites;
    let mut trip = Vec::with_capacity(dim * terms.len());
    for (coeff, ops) in terms {
        for &(x, op) in ops {
            if x >= sites {
                return Err(Error::Index(format!("site {x} out of range for L = {sites}")));
            }
            if !matches!(op, SiteOp::Sigma1 | SiteOp::Sigma2 | SiteOp::Sigma3 | SiteOp::Identity) {
                return Err(Error::Validation("pauli_sum accepts Pauli operators only".into()));
            }
        }
        for col in 0..dim {
            let mut row = col;
            let mut amp = *coeff;
            for &(x, op) in ops {
                let shift = sites - 1 - x;
                let s = (row >> shift) & 1;
                match op {
                    SiteOp::Sigma1 => row ^= 1 << shift,
                    SiteOp::Sigma2 => {
                        // σ² |up> = i|down>, σ² |down> = -i|up>
                        amp *= if s == 0 { linalg::I } else { -linalg::I };
                        row ^= 1 << shift;
                    }
                    SiteOp::Sigma3 => {
                        if s == 1 {
                            amp = -amp;
                        }
                    }
                    _ => {}
                }
            }
            trip.push((row, col, amp));
        }
    }
    ManyBodyOperator::new(sites, CsrMatrix::from_triplets(dim, trip), None)
}

/// One-site cyclic translation `T|s_0 … s_{L-1}> = |s_{L-1} s_0 … s_{L-2}>`.
pub fn translation_operator(sites: usize) -> Result<ManyBodyOperator> {
    check_sites(sites, DEFAULT_MAX_SITES)?;
    let dim = 1usize << sites;
    let trip = (0..dim)
        .map(|b| {
            // site x moves to x+1: bit L-1-x moves to bit L-2-x, i.e. shift right cyclically
            let rotated = (b >> 1) | ((b & 1) << (sites - 1));
            (rotated, b, ONE)
        })
        .collect();
    ManyBodyOperator::new(sites, CsrMatrix::from_triplets(dim, trip), None)
}
