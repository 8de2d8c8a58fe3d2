//! Graphs built from experience, their Laplacians, cut measures and a dense
//! cyclic-Jacobi eigensolver.

mod cuts;
mod eigen;
mod graph;
mod laplacian;

pub use cuts::{cut_measures, CutMeasures};
pub use eigen::{
    eigendecompose, jacobi_eigen, laplacian_spectrum, subspace_projector, JacobiStats, SpectrumBundle,
    SpectrumKind, EIGEN_DENSE_CAP,
};
pub use graph::GraphAccumulator;
pub use laplacian::{laplacian, quadratic_form, LaplacianKind};
