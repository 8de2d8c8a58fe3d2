use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::GraphAccumulator;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    /// `L = D − W`
    Combinatorial,
    /// `L_rw = I − D⁻¹W` (not symmetric)
    RandomWalk,
    /// `L_sym = I − D^{-1/2} W D^{-1/2}`
    Symmetric,
}

/// Dense Laplacian of the accumulated graph.
///
/// The combinatorial kind drops self-edges, which cancel in `D − W`.
pub fn laplacian<K: Hash + Eq>(acc: &GraphAccumulator<K>, kind: LaplacianKind) -> Result<Matrix> {
    let n = acc.n_vertices();
    if n == 0 {
        return Err(Error::InvalidArgument("empty graph".into()));
    }
    let d = acc.degrees();
    if kind != LaplacianKind::Combinatorial {
        if let Some(i) = d.iter().position(|&x| x <= 0.0) {
            return Err(Error::ZeroDegree(i));
        }
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        match kind {
            LaplacianKind::Combinatorial => {
                for (j, w) in acc.neighbors(i) {
                    if j != i {
                        l[(i, j)] = -w;
                        l[(i, i)] += w;
                    }
                }
            }
            LaplacianKind::RandomWalk => {
                l[(i, i)] = 1.0;
                for (j, w) in acc.neighbors(i) {
                    l[(i, j)] -= w / d[i];
                }
            }
            LaplacianKind::Symmetric => {
                l[(i, i)] = 1.0;
                for (j, w) in acc.neighbors(i) {
                    l[(i, j)] -= w / (d[i] * d[j]).sqrt();
                }
            }
        }
    }
    Ok(l)
}

/// `fᵀLf` by the edge sum `Σ_{i<j} w_ij (f_i − f_j)²`.
pub fn quadratic_form<K: Hash + Eq>(acc: &GraphAccumulator<K>, f: &[f64]) -> f64 {
    acc.edges().iter().map(|&(i, j, w)| w * (f[i] - f[j]).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_of_two() {
        let acc = GraphAccumulator::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let l = laplacian(&acc, LaplacianKind::Combinatorial).unwrap();
        assert_eq!(l, Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]));
    }

    #[test]
    fn self_edge_leaves_combinatorial_unchanged() {
        let mut acc = GraphAccumulator::from_edges(3, &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let before = laplacian(&acc, LaplacianKind::Combinatorial).unwrap();
        acc.set_weight(1, 1, 5.0);
        assert_eq!(laplacian(&acc, LaplacianKind::Combinatorial).unwrap(), before);
    }

    #[test]
    fn constant_vector_in_kernel() {
        let acc = GraphAccumulator::from_edges(4, &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (0, 3, 1.0)]).unwrap();
        let l = laplacian(&acc, LaplacianKind::Combinatorial).unwrap();
        assert!(l.matvec(&[1.0; 4]).iter().all(|v| v.abs() < 1e-15));
        let rw = laplacian(&acc, LaplacianKind::RandomWalk).unwrap();
        assert!(rw.matvec(&[1.0; 4]).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn normalized_kinds_need_positive_degrees() {
        let acc = GraphAccumulator::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(laplacian(&acc, LaplacianKind::Symmetric), Err(Error::ZeroDegree(2))));
        assert!(laplacian(&acc, LaplacianKind::Combinatorial).is_ok());
    }
}
