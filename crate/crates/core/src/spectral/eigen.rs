use std::hash::Hash;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{laplacian, GraphAccumulator, LaplacianKind};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Largest order handled by the dense eigensolver.
pub const EIGEN_DENSE_CAP: usize = 2000;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    General,
    Laplacian(LaplacianKind),
}

/// Ascending eigenvalues with matching eigenvector columns.
///
/// Columns are orthonormal, except for the random-walk Laplacian whose
/// eigenvectors are `D`-orthonormal (`QᵀDQ = I`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBundle {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
    pub kind: SpectrumKind,
}

impl SpectrumBundle {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.col(i)
    }

    /// Bottom-`k` truncation.
    pub fn truncated(&self, k: usize) -> SpectrumBundle {
        let k = k.min(self.len());
        SpectrumBundle {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenvectors: self.eigenvectors.leading_cols(k),
            kind: self.kind,
        }
    }

    /// `max |LQ − QΛ|`
    pub fn residual(&self, matrix: &Matrix) -> f64 {
        let lq = matrix.matmul(&self.eigenvectors);
        let mut worst = 0.0f64;
        for i in 0..lq.rows() {
            for (j, &lam) in self.eigenvalues.iter().enumerate() {
                worst = worst.max((lq[(i, j)] - lam * self.eigenvectors[(i, j)]).abs());
            }
        }
        worst
    }

    /// `max |QᵀQ − I|`
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigenvectors.tr_matmul(&self.eigenvectors);
        g.sub(&Matrix::identity(g.rows())).max_abs()
    }

    /// CSV rows `index,eigenvalue,v_0,...,v_{n-1}`.
    pub fn to_csv(&self) -> String {
        let n = self.eigenvectors.rows();
        let mut out = String::from("index,eigenvalue");
        for i in 0..n {
            let _ = write!(out, ",v{i}");
        }
        out.push('\n');
        for (j, lam) in self.eigenvalues.iter().enumerate() {
            let _ = write!(out, "{j},{lam:.16e}");
            for i in 0..n {
                let _ = write!(out, ",{:.16e}", self.eigenvectors[(i, j)]);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiStats {
    pub sweeps: usize,
    pub rotations: usize,
    /// Sum of squared off-diagonal entries at exit.
    pub off_diagonal_sq: f64,
}

fn off_diagonal_sq(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s
}

/// Cyclic Jacobi rotations on a symmetric matrix.
///
/// Returns unsorted eigenvalues and the eigenvectors as the *rows* of the
/// second matrix. Sweeps run until the off-diagonal mass falls below
/// `1e-24·‖A‖_F²` or a sweep performs no rotation.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix, JacobiStats) {
    let n = a.rows();
    let mut a = a.clone();
    let mut vt = Matrix::identity(n);
    let fro_sq = a.frobenius_sq();
    let target = 1e-24 * fro_sq;
    let skip = 1e-300_f64.max(1e-18 * fro_sq.sqrt());
    let mut stats = JacobiStats { sweeps: 0, rotations: 0, off_diagonal_sq: off_diagonal_sq(&a) };
    while stats.off_diagonal_sq > target && stats.sweeps < MAX_SWEEPS {
        let mut rotated = 0;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= skip {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(p, k)];
                    let akq = a[(q, k)];
                    let np = c * akp - s * akq;
                    let nq = s * akp + c * akq;
                    a[(p, k)] = np;
                    a[(k, p)] = np;
                    a[(q, k)] = nq;
                    a[(k, q)] = nq;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                let (rp, rq) = split_rows(&mut vt, p, q);
                for (vp, vq) in rp.iter_mut().zip(rq.iter_mut()) {
                    let (x, y) = (*vp, *vq);
                    *vp = c * x - s * y;
                    *vq = s * x + c * y;
                }
                rotated += 1;
            }
        }
        stats.sweeps += 1;
        stats.rotations += rotated;
        stats.off_diagonal_sq = off_diagonal_sq(&a);
        if rotated == 0 {
            break;
        }
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    (values, vt, stats)
}

fn split_rows(m: &mut Matrix, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let cols = m.cols();
    let (head, tail) = m.as_mut_slice().split_at_mut(q * cols);
    (&mut head[p * cols..(p + 1) * cols], &mut tail[..cols])
}

/// Full (or bottom-`k`) eigendecomposition of a symmetric matrix.
///
/// Eigenvalues ascend; each eigenvector's first component with magnitude
/// above `1e-10` is made positive.
pub fn eigendecompose(matrix: &Matrix, k: Option<usize>) -> Result<SpectrumBundle> {
    if !matrix.is_square() {
        return Err(Error::Shape(format!("{}x{} matrix", matrix.rows(), matrix.cols())));
    }
    let n = matrix.rows();
    if n > EIGEN_DENSE_CAP {
        return Err(Error::TooLarge { n, cap: EIGEN_DENSE_CAP });
    }
    let asym = matrix.max_asymmetry();
    if asym > 1e-10 * matrix.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    // Exact symmetrization so rotations see a symmetric input.
    let sym = Matrix::from_fn(n, n, |i, j| 0.5 * (matrix[(i, j)] + matrix[(j, i)]));
    let (values, vt, _) = jacobi_eigen(&sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let k = k.unwrap_or(n).min(n);
    let mut vectors = Matrix::zeros(n, k);
    for (col, &src) in order.iter().take(k).enumerate() {
        let mut v = vt.row(src).to_vec();
        fix_sign(&mut v);
        vectors.set_col(col, &v);
    }
    Ok(SpectrumBundle {
        eigenvalues: order.iter().take(k).map(|&i| values[i]).collect(),
        eigenvectors: vectors,
        kind: SpectrumKind::General,
    })
}

fn fix_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-10) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Bottom-`k` spectrum of a graph Laplacian.
///
/// The random-walk kind is solved through `L_sym`: `u` is an eigenvector of
/// `L_rw` iff `D^{1/2}u` is one of `L_sym` for the same eigenvalue.
pub fn laplacian_spectrum<K: Hash + Eq>(
    acc: &GraphAccumulator<K>,
    kind: LaplacianKind,
    k: Option<usize>,
) -> Result<SpectrumBundle> {
    match kind {
        LaplacianKind::RandomWalk => {
            let sym = laplacian(acc, LaplacianKind::Symmetric)?;
            let mut bundle = eigendecompose(&sym, k)?;
            let d = acc.degrees();
            for j in 0..bundle.len() {
                let mut u: Vec<f64> = (0..d.len()).map(|i| bundle.eigenvectors[(i, j)] / d[i].sqrt()).collect();
                fix_sign(&mut u);
                bundle.eigenvectors.set_col(j, &u);
            }
            bundle.kind = SpectrumKind::Laplacian(kind);
            Ok(bundle)
        }
        _ => {
            let mut bundle = eigendecompose(&laplacian(acc, kind)?, k)?;
            bundle.kind = SpectrumKind::Laplacian(kind);
            Ok(bundle)
        }
    }
}

/// Orthogonal projector `QQᵀ` onto the span of orthonormal columns.
pub fn subspace_projector(q: &Matrix) -> Matrix {
    q.matmul(&q.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_of_two_spectrum() {
        let l = Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]);
        let b = eigendecompose(&l, None).unwrap();
        assert!((b.eigenvalues[0]).abs() < 1e-15 && (b.eigenvalues[1] - 2.0).abs() < 1e-15);
        let r = 0.5f64.sqrt();
        assert!((b.eigenvectors[(0, 0)] - r).abs() < 1e-15 && (b.eigenvectors[(1, 0)] - r).abs() < 1e-15);
        assert!((b.eigenvectors[(0, 1)] - r).abs() < 1e-15 && (b.eigenvectors[(1, 1)] + r).abs() < 1e-15);
    }

    #[test]
    fn diagonal_is_sorted() {
        let b = eigendecompose(&Matrix::diag(&[3.0, 1.0, 2.0]), None).unwrap();
        assert_eq!(b.eigenvalues, vec![1.0, 2.0, 3.0]);
        assert_eq!(b.vector(0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(eigendecompose(&m, None), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn bottom_k_truncation() {
        let b = eigendecompose(&Matrix::diag(&[4.0, 1.0, 3.0, 2.0]), Some(2)).unwrap();
        assert_eq!(b.eigenvalues, vec![1.0, 2.0]);
        assert_eq!(b.eigenvectors.cols(), 2);
    }
}
