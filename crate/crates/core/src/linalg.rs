//! Dense and Krylov-space linear algebra shared by the modules.
//!
//! Dense Hermitian problems go through `nalgebra`; anything larger is handled
//! matrix-free with Lanczos (lowest eigenpairs, operator norms) and Krylov
//! propagation (`exp(-iHt) v`).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Eigen-decomposition of a dense Hermitian matrix, eigenvalues ascending.
///
/// Purely real input takes the (much faster) real symmetric path.
pub fn eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let real = m.iter().all(|z| z.im == 0.0);
    let (vals, vecs) = if real {
        let r = m.map(|z| z.re);
        let r = (&r + r.transpose()) * 0.5;
        let e = SymmetricEigen::new(r);
        (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let e = SymmetricEigen::new(h);
        (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let sorted_vals = order.iter().map(|&k| vals[k]).collect();
    let sorted_vecs = DMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    (sorted_vals, sorted_vecs)
}

/// Real symmetric eigen-decomposition, eigenvalues ascending.
pub fn eigh_real(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]).then(a.cmp(&b)));
    let vals = order.iter().map(|&k| e.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| e.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Applies a scalar function to a Hermitian matrix through its spectrum.
pub fn hermitian_function(m: &DMatrix<C64>, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
    let (vals, vecs) = eigh(m);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vecs.adjoint()
}

/// Determinant via LU with partial pivoting.
pub fn det_complex(m: &DMatrix<C64>) -> C64 {
    if m.nrows() == 0 {
        return ONE;
    }
    m.clone().lu().determinant()
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [C64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        let inv = 1.0 / n;
        v.iter_mut().for_each(|z| *z *= inv);
    }
    n
}

/// Deterministic pseudo-random start vector (splitmix64 on the index).
pub(crate) fn start_vector(dim: usize, salt: u64) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim)
        .map(|i| {
            let mut z = (i as u64).wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            C64::new((z >> 11) as f64 / (1u64 << 53) as f64 - 0.5, 0.0)
        })
        .collect();
    normalize(&mut v);
    v
}

fn project_out(v: &mut [C64], basis: &[Vec<C64>]) {
    // two passes of classical Gram-Schmidt keep the basis orthogonal to working precision
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
    }
}

pub struct LanczosResult {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
}

/// Lowest eigenpair of a Hermitian operator given as a matrix-vector product.
///
/// Full reorthogonalisation; vectors in `deflate` are projected out of the
/// Krylov space, which yields the lowest level orthogonal to them.
pub fn lanczos_lowest(
    apply: &dyn Fn(&[C64]) -> Vec<C64>,
    dim: usize,
    deflate: &[Vec<C64>],
    tol: f64,
    max_krylov: usize,
) -> Result<LanczosResult> {
    if dim == 0 {
        return Err(Error::Validation("empty operator".into()));
    }
    let available = dim - deflate.len().min(dim);
    if available == 0 {
        return Err(Error::Validation("deflation space exhausts the Hilbert space".into()));
    }
    let mut start = start_vector(dim, 17);
    project_out(&mut start, deflate);
    normalize(&mut start);

    let mut best: Option<LanczosResult> = None;
    for _restart in 0..8 {
        let res = lanczos_pass(apply, &start, deflate, tol, max_krylov.min(available))?;
        let done = res.residual <= tol * res.value.abs().max(1.0);
        start = res.vector.clone();
        best = Some(res);
        if done {
            break;
        }
    }
    best.ok_or_else(|| Error::Numerical("Lanczos produced no iterate".into()))
}

fn lanczos_pass(
    apply: &dyn Fn(&[C64]) -> Vec<C64>,
    start: &[C64],
    deflate: &[Vec<C64>],
    tol: f64,
    max_krylov: usize,
) -> Result<LanczosResult> {
    let mut basis: Vec<Vec<C64>> = vec![start.to_vec()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut ritz: (f64, DVector<f64>) = (0.0, DVector::zeros(0));

    for k in 0..max_krylov {
        let mut w = apply(&basis[k]);
        let a = dot(&basis[k], &w).re;
        alpha.push(a);
        project_out(&mut w, deflate);
        project_out(&mut w, &basis);
        let b = norm(&w);

        let m = alpha.len();
        let t = tridiagonal(&alpha, &beta);
        let (vals, vecs) = eigh_real(&t);
        ritz = (vals[0], vecs.column(0).into_owned());
        let estimate = (b * vecs[(m - 1, 0)]).abs();
        if estimate <= 0.1 * tol * vals[0].abs().max(1.0) || b < 1e-13 || m == max_krylov {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|z| *z /= b);
        basis.push(w);
    }

    let dim = start.len();
    let mut vector = vec![ZERO; dim];
    for (j, bvec) in basis.iter().enumerate().take(ritz.1.len()) {
        axpy(C64::new(ritz.1[j], 0.0), bvec, &mut vector);
    }
    project_out(&mut vector, deflate);
    normalize(&mut vector);
    let hv = apply(&vector);
    let value = dot(&vector, &hv).re;
    let mut r = hv;
    axpy(C64::new(-value, 0.0), &vector, &mut r);
    project_out(&mut r, deflate);
    Ok(LanczosResult { value, vector, residual: norm(&r) })
}

/// `exp(-i t H) v` by Krylov propagation with automatic sub-stepping.
///
/// `h_bound` is any upper bound on the spectral radius of `H`.
pub fn krylov_evolve(apply: &dyn Fn(&[C64]) -> Vec<C64>, v: &[C64], t: f64, h_bound: f64) -> Vec<C64> {
    if t == 0.0 {
        return v.to_vec();
    }
    let steps = ((h_bound * t.abs()) / 8.0).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut state = v.to_vec();
    for _ in 0..steps {
        state = krylov_step(apply, &state, dt);
    }
    state
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    })
}

/// `exp(-i dt T) e_1` for the tridiagonal `T`.
fn small_propagator(alpha: &[f64], beta: &[f64], dt: f64) -> Vec<C64> {
    let m = alpha.len();
    let (vals, vecs) = eigh_real(&tridiagonal(alpha, beta));
    (0..m)
        .map(|i| (0..m).map(|k| C64::from_polar(1.0, -dt * vals[k]) * vecs[(i, k)] * vecs[(0, k)]).sum::<C64>())
        .collect()
}

fn krylov_step(apply: &dyn Fn(&[C64]) -> Vec<C64>, v: &[C64], dt: f64) -> Vec<C64> {
    const MAX_KRYLOV: usize = 48;
    const TOL: f64 = 1e-14;
    let mut q = v.to_vec();
    let scale = normalize(&mut q);
    if scale == 0.0 {
        return v.to_vec();
    }
    let mut basis = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut coeffs = Vec::new();
    let limit = MAX_KRYLOV.min(v.len());
    for k in 0..limit {
        let mut w = apply(&basis[k]);
        let a = dot(&basis[k], &w).re;
        alpha.push(a);
        // three-term recurrence, repeated once against the two latest vectors
        for _ in 0..2 {
            let c = dot(&basis[k], &w);
            axpy(-c, &basis[k], &mut w);
            if k > 0 {
                let c = dot(&basis[k - 1], &w);
                axpy(-c, &basis[k - 1], &mut w);
            }
        }
        let b = norm(&w);
        // a posteriori error: weight of the next Krylov direction
        if k >= 3 || b < TOL || k + 1 == limit {
            coeffs = small_propagator(&alpha, &beta, dt);
            let err = b * coeffs[k].norm();
            if err < TOL || b < TOL || k + 1 == limit {
                break;
            }
        }
        beta.push(b);
        w.iter_mut().for_each(|z| *z /= b);
        basis.push(w);
    }
    let mut out = vec![ZERO; v.len()];
    for (c, b) in coeffs.iter().zip(&basis) {
        axpy(*c * scale, b, &mut out);
    }
    out
}

/// Spectral norm of a linear map from Lanczos on `A^† A`.
pub fn operator_norm_matfree(
    apply: &dyn Fn(&[C64]) -> Vec<C64>,
    apply_adjoint: &dyn Fn(&[C64]) -> Vec<C64>,
    dim: usize,
) -> f64 {
    let gram = |v: &[C64]| apply_adjoint(&apply(v));
    let mut basis: Vec<Vec<C64>> = vec![start_vector(dim, 91)];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut top = 0.0f64;
    let max_krylov = dim.min(80);
    for k in 0..max_krylov {
        let mut w = gram(&basis[k]);
        alpha.push(dot(&basis[k], &w).re);
        project_out(&mut w, &basis);
        let b = norm(&w);
        let m = alpha.len();
        let t = tridiagonal(&alpha, &beta);
        let (vals, vecs) = eigh_real(&t);
        let new_top = vals[m - 1].max(0.0);
        let estimate = (b * vecs[(m - 1, m - 1)]).abs();
        let converged = estimate <= 1e-9 * new_top.max(1e-300) && k > 2;
        top = new_top;
        if b < 1e-300 || converged || (new_top == 0.0 && b == 0.0) {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|z| *z /= b);
        basis.push(w);
    }
    top.sqrt()
}
