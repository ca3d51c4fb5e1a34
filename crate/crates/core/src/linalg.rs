//! Small dense linear algebra: numeric helpers over nalgebra and a
//! symbolic Gauss–Jordan inverse for matrices of expressions.

use nalgebra::{DMatrix, DVector};

use crate::expr::Expr;

pub fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c])
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: number of singular values above `tol`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis of the null space of `m`.
///
/// The basis is made reproducible by Gram–Schmidt over the projections of
/// the standard basis vectors e_1, e_2, ... in that fixed order.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let n = m.ncols();
    if n == 0 {
        return Vec::new();
    }
    // pad to square so the SVD yields a full right basis
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut projector = DMatrix::<f64>::zeros(n, n);
    let mut nullity = 0;
    for (idx, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= tol {
            let v = v_t.row(idx).transpose();
            projector += &v * v.transpose();
            nullity += 1;
        }
    }
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(nullity);
    for axis in 0..n {
        if basis.len() == nullity {
            break;
        }
        let mut v = projector.column(axis).clone_owned();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    basis
}

pub fn determinant(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        1.0
    } else {
        m.clone().lu().determinant()
    }
}

pub fn inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().try_inverse()
}

/// Symbolic inverse by Gauss–Jordan elimination.
///
/// Pivots prefer nonzero constants (largest magnitude first), then the
/// first entry that is not the literal zero. Returns `None` when a column
/// has no structurally nonzero pivot; numeric invertibility on a domain is
/// the caller's responsibility.
pub fn symbolic_inverse(m: &[Vec<Expr>]) -> Option<Vec<Vec<Expr>>> {
    let n = m.len();
    let mut a: Vec<Vec<Expr>> = m.to_vec();
    let mut inv: Vec<Vec<Expr>> = (0..n)
        .map(|r| (0..n).map(|c| if r == c { Expr::one() } else { Expr::zero() }).collect())
        .collect();
    for col in 0..n {
        let const_pivot = (col..n)
            .filter_map(|r| a[r][col].as_const().filter(|c| *c != 0.0).map(|c| (r, c.abs())))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
            .map(|(r, _)| r);
        let pivot_row = const_pivot.or_else(|| (col..n).find(|&r| !a[r][col].is_zero()))?;
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let pivot = a[col][col].clone();
        if !pivot.is_one() {
            for c in 0..n {
                a[col][c] = &a[col][c] / &pivot;
                inv[col][c] = &inv[col][c] / &pivot;
            }
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in 0..n {
                let da = &factor * &a[col][c];
                a[r][c] = &a[r][c] - &da;
                let di = &factor * &inv[col][c];
                inv[r][c] = &inv[r][c] - &di;
            }
        }
    }
    Some(inv)
}
