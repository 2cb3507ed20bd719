//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Strict-positivity margin for the feasibility certificates.
pub const TOL_FEAS: f64 = 1e-9;
/// Semidefiniteness slack: `λ_min ≥ -TOL_PSD` counts as p.s.d.
pub const TOL_PSD: f64 = 1e-9;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn sym_eigenvalues(m: &Mat) -> Vector {
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

pub fn min_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m).min()
}

pub fn max_eig(m: &Mat) -> f64 {
    sym_eigenvalues(m).max()
}

/// Spectral norm of an arbitrary matrix.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    max_eig(&(m.transpose() * m)).max(0.0).sqrt()
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: &Mat, b: &Mat) -> Option<Mat> {
    symmetrize(a).cholesky().map(|c| c.solve(b))
}

pub fn spd_inverse(a: &Mat) -> Option<Mat> {
    symmetrize(a).cholesky().map(|c| c.inverse())
}

/// General square solve via LU with partial pivoting.
pub fn lu_solve(a: &Mat, b: &Mat) -> Option<Mat> {
    a.clone().lu().solve(b)
}

/// `log det` of a symmetric positive definite matrix.
pub fn logdet_spd(a: &Mat) -> Option<f64> {
    let c = symmetrize(a).cholesky()?;
    Some(2.0 * c.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

/// Principal square root of a symmetric p.s.d. matrix; negative
/// eigenvalues from roundoff are clamped to zero.
pub fn sym_sqrt(m: &Mat) -> Mat {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    symmetrize(&(v * Mat::from_diagonal(&d) * v.transpose()))
}

/// Floors the eigenvalues of a symmetric matrix; returns whether anything moved.
pub fn eig_floor(m: &Mat, floor: f64) -> (Mat, bool) {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.min() >= floor {
        return (m.clone(), false);
    }
    let d = eig.eigenvalues.map(|x| x.max(floor));
    let v = &eig.eigenvectors;
    (symmetrize(&(v * Mat::from_diagonal(&d) * v.transpose())), true)
}

/// Ratio of extreme singular values; `0` for an exactly singular matrix.
pub fn inverse_condition(m: &Mat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

/// Frobenius inner product.
pub fn frob_dot(a: &Mat, b: &Mat) -> f64 {
    a.component_mul(b).sum()
}

/// Builds a matrix from row-major nested rows.
pub fn from_rows(rows: &[&[f64]]) -> Mat {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    Mat::from_fn(r, c, |i, j| rows[i][j])
}
