//! Small dense linear-algebra helpers shared across modules.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{JobSvd, SVDDC};

/// Column-major vectorization: stacks the columns of `a`, so entry (i, j)
/// lands at index i + rows * j. This is the convention under which
/// vec(A X B^T) = kron(B, A) vec(X).
pub fn vec_col_major(a: &ArrayView2<f64>) -> Array1<f64> {
    let (rows, cols) = a.dim();
    let mut v = Array1::zeros(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            v[i + rows * j] = a[[i, j]];
        }
    }
    v
}

/// Inverse of [`vec_col_major`].
pub fn unvec_col_major(v: &Array1<f64>, rows: usize, cols: usize) -> Array2<f64> {
    assert_eq!(v.len(), rows * cols, "vector length mismatch");
    let mut a = Array2::zeros((rows, cols));
    for j in 0..cols {
        for i in 0..rows {
            a[[i, j]] = v[i + rows * j];
        }
    }
    a
}

/// Dense Kronecker product kron(A, B).
pub fn kron(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let v = a[[i, j]];
            if v == 0.0 {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[[i * br + p, j * bc + q]] = v * b[[p, q]];
                }
            }
        }
    }
    out
}

/// Thin SVD A = U diag(s) V^T with singular values sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub vt: Array2<f64>,
}

impl SvdFactors {
    pub fn compute(a: &ArrayView2<f64>) -> Result<Self> {
        let (m, n) = a.dim();
        let k = m.min(n);
        let (u, s, vt) = a.to_owned().svddc(JobSvd::Some)?;
        let u = u.ok_or_else(|| Error::Linalg("SVD did not return U".into()))?;
        let vt = vt.ok_or_else(|| Error::Linalg("SVD did not return V^T".into()))?;
        // LAPACK's divide-and-conquer "some" mode already returns thin factors,
        // but slice defensively to k columns/rows.
        let u = u.slice(ndarray::s![.., ..k]).to_owned();
        let vt = vt.slice(ndarray::s![..k, ..]).to_owned();
        Ok(SvdFactors { u, s, vt })
    }

    pub fn sigma_max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    /// Apply the pseudoinverse: x = V diag(1/s) U^T b, truncating singular
    /// values at `rel_cutoff * sigma_max`.
    pub fn pinv_apply(&self, b: &ArrayView2<f64>, rel_cutoff: f64) -> Result<Array2<f64>> {
        let cutoff = rel_cutoff * self.sigma_max();
        let kept = self.s.iter().filter(|&&s| s > cutoff).count();
        if kept == 0 {
            return Err(Error::AllSingularValuesTruncated);
        }
        let utb = self.u.t().dot(b);
        let mut scaled = utb;
        for (i, mut row) in scaled.rows_mut().into_iter().enumerate() {
            let s = self.s[i];
            let inv = if s > cutoff { 1.0 / s } else { 0.0 };
            row.mapv_inplace(|v| v * inv);
        }
        Ok(self.vt.t().dot(&scaled))
    }

    /// Dense pseudoinverse matrix with the same truncation rule.
    pub fn pinv_matrix(&self, rel_cutoff: f64) -> Result<Array2<f64>> {
        let m = self.u.nrows();
        let eye = Array2::eye(m);
        self.pinv_apply(&eye.view(), rel_cutoff)
    }
}

/// Singular values only, sorted nonincreasing.
pub fn singular_values(a: &ArrayView2<f64>) -> Result<Array1<f64>> {
    let (_, s, _) = a.to_owned().svddc(JobSvd::None)?;
    Ok(s)
}

pub fn frobenius(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// ||a - b||_F / ||b||_F, with the convention 0/0 = 0.
pub fn relative_frobenius_diff(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    let denom = frobenius(b);
    let num = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    if denom == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / denom
    }
}

pub fn max_abs_diff(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn vec_col_major_round_trip() {
        let a = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let v = vec_col_major(&a.view());
        assert_eq!(v.to_vec(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let back = unvec_col_major(&v, 2, 3);
        assert_eq!(back, a);
    }

    #[test]
    fn kron_small_known_values() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let b = array![[0.0, 1.0], [1.0, 0.0]];
        let k = kron(&a.view(), &b.view());
        assert_eq!(
            k,
            array![
                [0.0, 1.0, 0.0, 2.0],
                [1.0, 0.0, 2.0, 0.0],
                [0.0, 3.0, 0.0, 4.0],
                [3.0, 0.0, 4.0, 0.0]
            ]
        );
    }

    #[test]
    fn kron_vec_identity() {
        let a = array![[1.0, -2.0], [0.5, 3.0], [2.0, 0.0]];
        let b = array![[2.0, 1.0], [-1.0, 4.0], [0.0, 1.0]];
        let x = array![[1.0, 2.0], [3.0, -1.0]];
        let y = a.dot(&x).dot(&b.t());
        let k = kron(&b.view(), &a.view());
        let lhs = vec_col_major(&y.view());
        let rhs = k.dot(&vec_col_major(&x.view()));
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_factors_reconstruct() {
        let a = array![[2.0, 0.0, 1.0], [-1.0, 3.0, 0.5]];
        let f = SvdFactors::compute(&a.view()).unwrap();
        let rebuilt = f.u.dot(&Array2::from_diag(&f.s)).dot(&f.vt);
        assert!(max_abs_diff(&rebuilt.view(), &a.view()) < 1e-12);
        // orthonormal columns
        let utu = f.u.t().dot(&f.u);
        let vtv = f.vt.dot(&f.vt.t());
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((utu[[i, j]] - e).abs() < 1e-12);
                assert!((vtv[[i, j]] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pinv_apply_solves_square_system() {
        let a = array![[3.0, 1.0], [1.0, 2.0]];
        let f = SvdFactors::compute(&a.view()).unwrap();
        let b = array![[5.0], [5.0]];
        let x = f.pinv_apply(&b.view(), 1e-12).unwrap();
        let back = a.dot(&x);
        assert!(max_abs_diff(&back.view(), &b.view()) < 1e-10);
    }

    #[test]
    fn pinv_all_truncated_errors() {
        let a = Array2::<f64>::zeros((3, 3));
        let f = SvdFactors::compute(&a.view()).unwrap();
        assert!(matches!(
            f.pinv_apply(&Array2::eye(3).view(), 1e-10),
            Err(Error::AllSingularValuesTruncated)
        ));
    }
}
