//! Small dense-linear-algebra helpers shared by the geometry modules.
//!
//! Everything here operates on dynamically sized `nalgebra` vectors at desk
//! scale (ambient dimension rarely above 4, a few dozen vectors), so SVD-based
//! rank decisions are cheap and robust.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff for rank decisions.
const RANK_REL_TOL: f64 = 1e-10;

/// Stacks vectors as the columns of a matrix. Returns an `n x 0` matrix for an
/// empty slice.
pub fn columns(n: usize, vecs: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(n, vecs.len(), |i, j| vecs[j][i])
}

/// Numerical rank of the span of `vecs` in dimension `n`.
pub fn rank(n: usize, vecs: &[DVector<f64>]) -> usize {
    if vecs.is_empty() {
        return 0;
    }
    let m = columns(n, vecs);
    let svd = m.svd(false, false);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > smax * RANK_REL_TOL)
        .count()
}

/// Orthonormal basis of the span of `vecs`, as columns of the returned matrix.
pub fn span_basis(n: usize, vecs: &[DVector<f64>]) -> DMatrix<f64> {
    if vecs.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    let m = columns(n, vecs);
    let svd = m.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let r = if smax <= 0.0 {
        0
    } else {
        svd.singular_values
            .iter()
            .filter(|&&s| s > smax * RANK_REL_TOL)
            .count()
    };
    u.columns(0, r).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// `basis` (columns are assumed orthonormal) in dimension `n`.
pub fn complement_basis(n: usize, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let k = basis.ncols();
    if k == 0 {
        return DMatrix::identity(n, n);
    }
    if k >= n {
        return DMatrix::zeros(n, 0);
    }
    // Null space of basis^T via SVD of the full square completion.
    let mut m = DMatrix::zeros(n, n);
    m.columns_mut(0, k).copy_from(basis);
    let svd = m.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let smax = svd.singular_values.max().max(1.0);
    let mut cols = Vec::new();
    for j in 0..n {
        if svd.singular_values[j] <= smax * RANK_REL_TOL {
            cols.push(u.column(j).into_owned());
        }
    }
    // SVD orders singular values descending, so the trailing columns of U span
    // the complement; collect exactly n - k of them.
    let mut out = DMatrix::zeros(n, n - k);
    let take = n - k;
    let start = cols.len().saturating_sub(take);
    for (c, col) in cols[start..].iter().enumerate() {
        out.column_mut(c).copy_from(col);
    }
    if cols.len() < take {
        // Degenerate fallback: complete via Gram-Schmidt against the basis.
        return gram_schmidt_complement(n, basis);
    }
    out
}

fn gram_schmidt_complement(n: usize, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let mut ortho: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    let mut extra = Vec::new();
    for i in 0..n {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for b in &ortho {
            let d = b.dot(&v);
            v -= b * d;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            v /= norm;
            ortho.push(v.clone());
            extra.push(v);
        }
        if ortho.len() == n {
            break;
        }
    }
    let mut out = DMatrix::zeros(n, extra.len());
    for (c, col) in extra.iter().enumerate() {
        out.column_mut(c).copy_from(col);
    }
    out
}

/// Orthogonal projector onto the column space of `basis` (columns orthonormal).
pub fn projector(n: usize, basis: &DMatrix<f64>) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return DMatrix::zeros(n, n);
    }
    basis * basis.transpose()
}

/// One-dimensional null space of the span of `vecs` inside the `k`-dimensional
/// ambient space, when the span has rank `k - 1`. Returns a unit vector.
pub fn hyperplane_normal(k: usize, vecs: &[DVector<f64>]) -> Option<DVector<f64>> {
    let m = columns(k, vecs);
    let svd = m.transpose().svd(false, true);
    let vt = svd.v_t.as_ref()?;
    let smax = svd.singular_values.max().max(1.0);
    // The normal is the right singular vector for the smallest singular value;
    // vt has min(rows, k) rows, so the normal only appears when vecs has >= k
    // rows padded implicitly. Fall back to an explicit kernel computation.
    if vt.nrows() == k {
        let last = vt.row(k - 1).transpose();
        let s_last = svd.singular_values[svd.singular_values.len() - 1];
        if s_last <= smax * RANK_REL_TOL || vecs.len() < k {
            let n = last.norm();
            if n > 0.0 {
                return Some(last / n);
            }
        }
        return None;
    }
    // Fewer vectors than k: compute the complement of their span and require
    // it to be one-dimensional.
    let basis = span_basis(k, vecs);
    let comp = complement_basis(k, &basis);
    if comp.ncols() == 1 {
        Some(comp.column(0).into_owned())
    } else {
        None
    }
}

/// Normalizes `v` to unit length; `None` when `|v| <= tol`.
pub fn unit(v: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let n = v.norm();
    if n <= tol {
        None
    } else {
        Some(v / n)
    }
}
