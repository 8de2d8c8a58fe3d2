use std::hash::Hash;

use super::{laplacian, GraphAccumulator, LaplacianKind};
use crate::error::{Error, Result};

/// Cut objectives for a bipartition `(A, Ā)` and their Rayleigh-quotient forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutMeasures {
    /// `W(A, Ā) / |A|`
    pub ratiocut: f64,
    /// `W(A, Ā) / vol_d(A)`
    pub ncut: f64,
    /// `1_Aᵀ L 1_A / 1_Aᵀ 1_A`
    pub rayleigh_ratio: f64,
    /// `1_Aᵀ L 1_A / 1_Aᵀ D 1_A`
    pub rayleigh_normalized: f64,
}

pub fn cut_measures<K: Hash + Eq>(acc: &GraphAccumulator<K>, subset: &[usize]) -> Result<CutMeasures> {
    let n = acc.n_vertices();
    let mut member = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::Shape(format!("vertex {i} outside {n} vertices")));
        }
        member[i] = true;
    }
    let size = member.iter().filter(|&&m| m).count();
    if size == 0 || size == n {
        return Err(Error::InvalidArgument("subset must be nonempty and proper".into()));
    }
    let mut crossing = 0.0;
    let mut volume = 0.0;
    for i in (0..n).filter(|&i| member[i]) {
        volume += acc.degrees()[i];
        for (j, w) in acc.neighbors(i) {
            if !member[j] {
                crossing += w;
            }
        }
    }
    // Quadratic forms built from the dense matrices, independent of the edge walk above.
    let l = laplacian(acc, LaplacianKind::Combinatorial)?;
    let indicator: Vec<f64> = member.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let quad: f64 = l.matvec(&indicator).iter().zip(&indicator).map(|(a, b)| a * b).sum();
    let d_quad: f64 = acc.degrees().iter().zip(&indicator).map(|(d, x)| d * x * x).sum();
    Ok(CutMeasures {
        ratiocut: crossing / size as f64,
        ncut: crossing / volume,
        rayleigh_ratio: quad / size as f64,
        rayleigh_normalized: quad / d_quad,
    })
}
