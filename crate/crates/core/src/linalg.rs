//! Small dense helpers on top of nalgebra. Matrices here are tiny (n ≤ ~10),
//! so the per-path kernels work on raw slices to avoid allocation.

use nalgebra::{DMatrix, SymmetricEigen};

/// Condition-number cap applied before inverting a control weight.
pub const COND_CAP: f64 = 1e12;

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let s = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    lambda_max(&(m.transpose() * m)).max(0.0).sqrt()
}

/// Relative asymmetry ‖M − Mᵀ‖_max / max(1, ‖M‖_max).
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() / scale
}

/// Inverse of a symmetric positive definite matrix, refusing when the
/// smallest eigenvalue is not positive or the condition number exceeds `COND_CAP`.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, String> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let s = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > 0.0) {
        return Err(format!("smallest eigenvalue {lo:e} is not positive"));
    }
    if hi / lo > COND_CAP {
        return Err(format!("condition number {:e} exceeds {COND_CAP:e}", hi / lo));
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    Ok(&eig.eigenvectors * inv_diag * eig.eigenvectors.transpose())
}

/// out += scale · m · x
#[inline]
pub fn gemv_acc(out: &mut [f64], m: &DMatrix<f64>, x: &[f64], scale: f64) {
    let rows = m.nrows();
    let data = m.as_slice();
    for (c, &xc) in x.iter().enumerate() {
        let v = scale * xc;
        if v == 0.0 {
            continue;
        }
        let col = &data[c * rows..(c + 1) * rows];
        for (o, &a) in out.iter_mut().zip(col) {
            *o += a * v;
        }
    }
}

/// out += scale · mᵀ · x
#[inline]
pub fn gemv_t_acc(out: &mut [f64], m: &DMatrix<f64>, x: &[f64], scale: f64) {
    let rows = m.nrows();
    let data = m.as_slice();
    for (c, o) in out.iter_mut().enumerate() {
        let col = &data[c * rows..(c + 1) * rows];
        let mut acc = 0.0;
        for (&a, &xv) in col.iter().zip(x) {
            acc += a * xv;
        }
        *o += scale * acc;
    }
}

/// ⟨x, m y⟩
#[inline]
pub fn bilinear(x: &[f64], m: &DMatrix<f64>, y: &[f64]) -> f64 {
    let rows = m.nrows();
    let data = m.as_slice();
    let mut acc = 0.0;
    for (c, &yc) in y.iter().enumerate() {
        if yc == 0.0 {
            continue;
        }
        let col = &data[c * rows..(c + 1) * rows];
        let mut inner = 0.0;
        for (&a, &xv) in col.iter().zip(x) {
            inner += a * xv;
        }
        acc += inner * yc;
    }
    acc
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemv_matches_nalgebra() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 4.0]);
        let x = [0.3, -2.0, 1.5];
        let mut out = vec![1.0, 1.0];
        gemv_acc(&mut out, &m, &x, 2.0);
        let want = &m * nalgebra::DVector::from_column_slice(&x) * 2.0;
        assert!((out[0] - 1.0 - want[0]).abs() < 1e-14);
        assert!((out[1] - 1.0 - want[1]).abs() < 1e-14);

        let y = [0.7, -0.1];
        let mut t = vec![0.0; 3];
        gemv_t_acc(&mut t, &m, &y, 1.0);
        let want_t = m.transpose() * nalgebra::DVector::from_column_slice(&y);
        for i in 0..3 {
            assert!((t[i] - want_t[i]).abs() < 1e-14);
        }
        let b = bilinear(&y, &m, &x);
        assert!((b - dot(&y, want.as_slice()) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn spd_inverse_guards_conditioning() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let inv = spd_inverse(&m).unwrap();
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((inv[(1, 1)] - 0.25).abs() < 1e-15);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        assert!(spd_inverse(&bad).is_err());
        let neg = DMatrix::from_row_slice(1, 1, &[-1.0]);
        assert!(spd_inverse(&neg).is_err());
    }

    #[test]
    fn op_norm_of_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -5.0]);
        assert!((op_norm(&m) - 5.0).abs() < 1e-12);
    }
}
