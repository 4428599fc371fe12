//! Small dense symmetric helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let mut s = m.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s)
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    eigen(m).eigenvalues.min()
}

pub(crate) fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    eigen(m).eigenvalues.max()
}

/// `V diag(sqrt(max(lambda, 0)))`, so that `F F^T` is the clipped matrix.
pub(crate) fn psd_factor(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let e = eigen(m);
    let min = e.eigenvalues.min();
    let mut f = e.eigenvectors.clone();
    for (j, &v) in e.eigenvalues.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    (f, min)
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n = rows.len();
    let c = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != c) {
        return None;
    }
    Some(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_of_clipped_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!((min_eigenvalue(&m) + 1.0).abs() < 1e-14);
        assert!((max_eigenvalue(&m) - 3.0).abs() < 1e-14);
        // clipping the -1 eigenvalue (eigenvector (1,-1)/sqrt2) leaves 3/2 J
        let c = DMatrix::from_element(2, 2, 1.5);
        let (f, min) = psd_factor(&m);
        assert!((min + 1.0).abs() < 1e-14);
        assert!((&f * f.transpose() - c).norm() < 1e-13);
    }
}
