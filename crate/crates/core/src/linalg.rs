//! Small dense linear algebra helpers: jet-valued matrix inversion and a
//! deterministic cyclic Jacobi eigensolver for symmetric f64 matrices.

use crate::error::GeomError;
use crate::jet::Jet;
use nalgebra::{DMatrix, DVector};

/// Invert a `d x d` matrix of jets (row major) by Gauss-Jordan elimination,
/// pivoting on the scalar part.
pub fn jet_mat_inverse(a: &[Jet], d: usize) -> Result<Vec<Jet>, GeomError> {
    assert_eq!(a.len(), d * d);
    let dim = a[0].dim();
    let order = a.iter().map(|x| x.order()).min().unwrap();
    let mut m: Vec<Jet> = a.iter().map(|x| x.truncate(order)).collect();
    let mut inv: Vec<Jet> = (0..d * d)
        .map(|k| Jet::constant(dim, order, if k % (d + 1) == 0 { 1.0 } else { 0.0 }))
        .collect();

    for col in 0..d {
        let mut piv = col;
        for r in col + 1..d {
            if m[r * d + col].value().abs() > m[piv * d + col].value().abs() {
                piv = r;
            }
        }
        if m[piv * d + col].value().abs() < 1e-300 {
            return Err(GeomError::SingularMatrix);
        }
        if piv != col {
            for c in 0..d {
                m.swap(col * d + c, piv * d + c);
                inv.swap(col * d + c, piv * d + c);
            }
        }
        let pinv = m[col * d + col].recip();
        for c in 0..d {
            m[col * d + c] = &m[col * d + c] * &pinv;
            inv[col * d + c] = &inv[col * d + c] * &pinv;
        }
        for r in 0..d {
            if r == col {
                continue;
            }
            let factor = m[r * d + col].clone();
            if factor.value() == 0.0 && factor.order() == 0 {
                continue;
            }
            for c in 0..d {
                m[r * d + c] = &m[r * d + c] - &(&factor * &m[col * d + c]);
                inv[r * d + c] = &inv[r * d + c] - &(&factor * &inv[col * d + c]);
            }
        }
    }
    Ok(inv)
}

/// Determinant of a `d x d` jet matrix via LU with scalar-part pivoting.
pub fn jet_mat_det(a: &[Jet], d: usize) -> Jet {
    assert_eq!(a.len(), d * d);
    let dim = a[0].dim();
    let order = a.iter().map(|x| x.order()).min().unwrap();
    let mut m: Vec<Jet> = a.iter().map(|x| x.truncate(order)).collect();
    let mut det = Jet::constant(dim, order, 1.0);
    for col in 0..d {
        let mut piv = col;
        for r in col + 1..d {
            if m[r * d + col].value().abs() > m[piv * d + col].value().abs() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..d {
                m.swap(col * d + c, piv * d + c);
            }
            det = det.scale(-1.0);
        }
        let pivot = m[col * d + col].clone();
        if pivot.value().abs() < 1e-300 {
            return Jet::constant(dim, order, 0.0);
        }
        det = &det * &pivot;
        let pinv = pivot.recip();
        for r in col + 1..d {
            let factor = &m[r * d + col] * &pinv;
            for c in col..d {
                m[r * d + c] = &m[r * d + c] - &(&factor * &m[col * d + c]);
            }
        }
    }
    det
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
///
/// Deterministic: fixed pivot order, fixed rotation convention, descending
/// eigenvalue sort with stable tie order, and a sign rule making the largest
/// component of each eigenvector positive. Returns (eigenvalues, columns).
pub fn jacobi_eigen_sym(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.amax().max(1e-300);

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)].abs();
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .partial_cmp(&m[(i, i)])
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut vals = Vec::with_capacity(n);
    let mut vecs = DMatrix::<f64>::zeros(n, n);
    for (slot, &idx) in order.iter().enumerate() {
        vals.push(m[(idx, idx)]);
        let mut col = v.column(idx).clone_owned();
        // deterministic sign: largest-magnitude entry positive
        let mut imax = 0;
        for k in 1..n {
            if col[k].abs() > col[imax].abs() + 1e-300 {
                imax = k;
            }
        }
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vecs.set_column(slot, &col);
    }
    (vals, vecs)
}

/// Cholesky factor L with `a = L L^T`; errors if not positive definite.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>, GeomError> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(GeomError::NotPositiveDefinite);
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve `L x = b` (forward) for lower-triangular L.
pub fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        for k in 0..i {
            let lik = l[(i, k)];
            x[i] -= lik * x[k];
        }
        x[i] /= l[(i, i)];
    }
    x
}

/// Solve `L^T x = b` (backward) for lower-triangular L.
pub fn solve_lower_t(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        for k in i + 1..n {
            let lki = l[(k, i)];
            x[i] -= lki * x[k];
        }
        x[i] /= l[(i, i)];
    }
    x
}

/// Generalized symmetric eigenproblem `A v = mu B v` with B positive definite.
/// Returns descending `mu` and B-orthonormal eigenvectors as columns.
pub fn generalized_eigen_sym(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>), GeomError> {
    let n = a.nrows();
    let l = cholesky(b)?;
    // C = L^-1 A L^-T
    let mut c = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let col = solve_lower(&l, &a.column(j).clone_owned());
        c.set_column(j, &col);
    }
    let mut ct = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let row = solve_lower(&l, &c.row(i).transpose());
        ct.set_row(i, &row.transpose());
    }
    // symmetrize away roundoff
    let sym = (&ct + ct.transpose()) * 0.5;
    let (vals, y) = jacobi_eigen_sym(&sym);
    let mut vecs = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let col = solve_lower_t(&l, &y.column(j).clone_owned());
        vecs.set_column(j, &col);
    }
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;

    #[test]
    fn jet_inverse_roundtrip() {
        let p = [0.3, 0.7];
        let x = Jet::seed(&p, 2);
        // matrix with jet-dependent entries
        let a = vec![
            &x[0] + 2.0,
            x[0].clone() * &x[1],
            x[1].clone() * 0.5,
            x[1].squared() + 1.5,
        ];
        let inv = jet_mat_inverse(&a, 2).unwrap();
        // check A * A^-1 = I in value and first derivatives
        for i in 0..2 {
            for j in 0..2 {
                let mut s = Jet::constant(2, 2, 0.0);
                for k in 0..2 {
                    s = s + &a[i * 2 + k] * &inv[k * 2 + j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s.value() - expect).abs() < 1e-13);
                for d in 0..2 {
                    assert!(s.grad(d).abs() < 1e-12);
                    for e in 0..2 {
                        assert!(s.hess(d, e).abs() < 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn jet_det_matches_closed_form() {
        let p = [0.4];
        let x = Jet::seed(&p, 2);
        // det [[1+x, x],[x, 2]] = 2 + 2x - x^2
        let a = vec![
            &x[0] + 1.0,
            x[0].clone(),
            x[0].clone(),
            Jet::constant(1, 2, 2.0),
        ];
        let det = jet_mat_det(&a, 2);
        assert!((det.value() - (2.0 + 2.0 * 0.4 - 0.16)).abs() < 1e-14);
        assert!((det.grad(0) - (2.0 - 0.8)).abs() < 1e-13);
        assert!((det.hess(0, 0) - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn jacobi_recovers_spectrum() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 1.0]);
        let (vals, vecs) = jacobi_eigen_sym(&a);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        for j in 0..3 {
            let v = vecs.column(j);
            let av = &a * v;
            for i in 0..3 {
                assert!((av[i] - vals[j] * v[i]).abs() < 1e-10);
            }
        }
        // determinism
        let (vals2, vecs2) = jacobi_eigen_sym(&a);
        assert_eq!(vals, vals2);
        assert_eq!(vecs, vecs2);
    }

    #[test]
    fn generalized_eigen_b_orthonormal() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.8]);
        let (vals, vecs) = generalized_eigen_sym(&a, &b).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let dot = (vecs.column(i).transpose() * &b * vecs.column(j))[(0, 0)];
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
        let av = &a * vecs.column(0);
        let bv = &b * vecs.column(0);
        for i in 0..2 {
            assert!((av[i] - vals[0] * bv[i]).abs() < 1e-12);
        }
    }
}
