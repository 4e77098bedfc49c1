use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

/// Pfaffian of an even-dimensional antisymmetric matrix.
///
/// Parlett-Reid tridiagonalization with partial pivoting (the `L T L^T`
/// scheme); every pivot swap flips the sign, so the result is sign-exact.
pub fn pfaffian<T>(m: &DMatrix<T>) -> Result<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Validation(format!("Pfaffian needs a square matrix, got {}x{}", n, m.ncols())));
    }
    if n % 2 == 1 {
        return Err(Error::Validation(format!("Pfaffian of odd dimension {n}")));
    }
    let scale = m.iter().map(|z| z.modulus()).fold(0.0, f64::max);
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            defect = defect.max((m[(i, j)] + m[(j, i)]).modulus());
        }
    }
    if defect > 1e-10 * scale {
        return Err(Error::Validation(format!("matrix is not antisymmetric (defect {defect:e})")));
    }
    Ok(pfaffian_unchecked(m.clone()))
}

pub(crate) fn pfaffian_unchecked<T>(mut a: DMatrix<T>) -> T
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.nrows();
    let mut pf = T::one();
    let mut k = 0;
    while k + 1 < n {
        let mut kp = k + 1;
        let mut best = a[(k + 1, k)].modulus();
        for r in k + 2..n {
            let v = a[(r, k)].modulus();
            if v > best {
                best = v;
                kp = r;
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        if best == 0.0 {
            return T::zero();
        }
        let pivot = a[(k, k + 1)];
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<T> = (k + 2..n).map(|j| a[(k, j)] / pivot).collect();
            let col: Vec<T> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    let upd = tau[ii] * col[jj] - col[ii] * tau[jj];
                    a[(i, j)] += upd;
                }
            }
        }
        k += 2;
    }
    pf
}
