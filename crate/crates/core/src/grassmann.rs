//! Stiefel/Grassmann geometry and a whitened, constraint-aware optimizer for
//! the sequential Rayleigh quotient (bottom Laplacian eigenvectors).

use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, right_solve_lower_transpose, Matrix};
use crate::spectral::{eigendecompose, jacobi_eigen};
use crate::trust_region::conjugate_gradient;

/// Relative pivot below which a covariance counts as collapsed.
pub const COLLAPSE_TOL: f64 = 1e-12;

/// Thin-SVD pieces of an `n×k` matrix and its nearest orthonormal-column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannProjection {
    /// `Σ_i (σ_i − 1)²`
    pub distance: f64,
    /// Descending singular values.
    pub singular_values: Vec<f64>,
    /// `U·Vᵀ`; `None` when the input is rank deficient.
    pub projection: Option<Matrix>,
}

impl GrassmannProjection {
    pub fn projection(&self) -> Result<&Matrix> {
        self.projection.as_ref().ok_or_else(|| Error::Singular("rank-deficient matrix has no unique projection".into()))
    }
}

/// `d = Σ(σ_i − 1)²` and `B = U·Vᵀ` from the eigendecomposition of `AᵀA`.
pub fn grassmann_distance_and_project(a: &Matrix) -> Result<GrassmannProjection> {
    let (n, k) = (a.rows(), a.cols());
    if n < k || k == 0 {
        return Err(Error::Shape(format!("{n}x{k} matrix needs n >= k >= 1")));
    }
    let gram = a.tr_matmul(a);
    let (values, vt, _) = jacobi_eigen(&gram);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| values[i].max(0.0).sqrt()).collect();
    let distance = sigma.iter().map(|s| (s - 1.0).powi(2)).sum();
    let smax = sigma[0];
    let projection = if smax > 0.0 && sigma[k - 1] > 1e-12 * smax {
        // B = A·V·diag(1/σ)·Vᵀ = A·(AᵀA)^{-1/2}
        let mut inv_sqrt = Matrix::zeros(k, k);
        for (col, &i) in order.iter().enumerate() {
            let v = vt.row(i);
            for r in 0..k {
                for c in 0..k {
                    inv_sqrt[(r, c)] += v[r] * v[c] / sigma[col];
                }
            }
        }
        Some(a.matmul(&inv_sqrt))
    } else {
        None
    };
    Ok(GrassmannProjection { distance, singular_values: sigma, projection })
}

/// Lower-triangular whitening weight, moved toward fresh Cholesky factors at rate `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyLayer {
    pub l: Matrix,
    pub alpha: f64,
}

impl CholeskyLayer {
    pub fn new(l: Matrix, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("layer rate {alpha} outside (0, 1]")));
        }
        check_lower(&l)?;
        Ok(Self { l, alpha })
    }

    /// `L ← (1 − α)·L + α·target`
    pub fn update(&mut self, target: &Matrix) {
        self.l = self.l.scale(1.0 - self.alpha).axpy(self.alpha, target);
    }

    /// `Y·L⁻ᵀ`
    pub fn apply(&self, y: &Matrix) -> Matrix {
        right_solve_lower_transpose(y, &self.l)
    }
}

fn check_lower(l: &Matrix) -> Result<()> {
    for i in 0..l.rows() {
        if !(l[(i, i)] > 0.0) {
            return Err(Error::InvalidArgument(format!("diagonal entry {i} of the layer is not positive")));
        }
        for j in (i + 1)..l.cols() {
            if l[(i, j)] != 0.0 {
                return Err(Error::InvalidArgument("layer weight is not lower triangular".into()));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Whitened {
    /// `Y·L⁻ᵀ`, with `(1/m)·Y*ᵀY* = I`.
    pub y_star: Matrix,
    /// Cholesky factor of `(1/m)·YᵀY`.
    pub l: Matrix,
}

/// `S = (1/m)·YᵀY = L·Lᵀ` and `Y* = Y·L⁻ᵀ`, `m` the row count.
pub fn cholesky_whiten(y: &Matrix) -> Result<Whitened> {
    let m = y.rows() as f64;
    let s = y.tr_matmul(y).scale(1.0 / m);
    let l = cholesky(&s, COLLAPSE_TOL).map_err(|(column, pivot)| Error::CovarianceCollapse { column, pivot })?;
    Ok(Whitened { y_star: right_solve_lower_transpose(y, &l), l })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialRayleigh {
    pub total: f64,
    /// `R_j = tr((Y_jᵀY_j)⁻¹·Y_jᵀAY_j)` for `j = 1..k`.
    pub per_prefix: Vec<f64>,
}

fn leading_block(m: &Matrix, j: usize) -> Matrix {
    Matrix::from_fn(j, j, |r, c| m[(r, c)])
}

fn prefix_inverse(gram: &Matrix, j: usize) -> Result<Matrix> {
    let block = leading_block(gram, j);
    cholesky(&block, COLLAPSE_TOL).map_err(|_| Error::Singular(format!("prefix of {j} columns is rank deficient")))?;
    block.inverse()
}

/// Sum over column prefixes of the generalized Rayleigh quotient.
pub fn sequential_rayleigh(a: &Matrix, y: &Matrix) -> Result<SequentialRayleigh> {
    if !a.is_square() || a.rows() != y.rows() {
        return Err(Error::Shape(format!("{}x{} operator with {} rows", a.rows(), a.cols(), y.rows())));
    }
    let gram = y.tr_matmul(y);
    let quad = y.tr_matmul(&a.matmul(y));
    let mut per_prefix = Vec::with_capacity(y.cols());
    for j in 1..=y.cols() {
        let g_inv = prefix_inverse(&gram, j)?;
        per_prefix.push(g_inv.matmul(&leading_block(&quad, j)).trace());
    }
    Ok(SequentialRayleigh { total: per_prefix.iter().sum(), per_prefix })
}

/// `∂/∂Y Σ_j R_j = Σ_j 2·(A·Y_j·G_j⁻¹ − Y_j·G_j⁻¹·Y_jᵀAY_j·G_j⁻¹)`, padded with zeros.
pub fn sequential_rayleigh_gradient(a: &Matrix, y: &Matrix) -> Result<Matrix> {
    let (n, k) = (y.rows(), y.cols());
    let ay = a.matmul(y);
    let gram = y.tr_matmul(y);
    let quad = y.tr_matmul(&ay);
    let mut grad = Matrix::zeros(n, k);
    for j in 1..=k {
        let g_inv = prefix_inverse(&gram, j)?;
        let inner = g_inv.matmul(&leading_block(&quad, j)).matmul(&g_inv);
        for r in 0..n {
            for c in 0..j {
                let mut v = 0.0;
                for t in 0..j {
                    v += ay[(r, t)] * g_inv[(t, c)] - y[(r, t)] * inner[(t, c)];
                }
                grad[(r, c)] += 2.0 * v;
            }
        }
    }
    Ok(grad)
}

/// `Σ_{j≤k} Σ_{i≤j} λ_i` for ascending eigenvalues.
pub fn optimal_sequential_value(eigenvalues: &[f64], k: usize) -> f64 {
    (1..=k).map(|j| eigenvalues[..j].iter().sum::<f64>()).sum()
}

/// Sines of the principal angles between two column spans, descending.
pub fn principal_angle_sines(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    let qa = grassmann_distance_and_project(a)?.projection()?.clone();
    let qb = grassmann_distance_and_project(b)?.projection()?.clone();
    // Residual of qb after projecting onto span(qa): its singular values are the sines.
    let resid = qb.sub(&qa.matmul(&qa.tr_matmul(&qb)));
    let (values, _, _) = jacobi_eigen(&resid.tr_matmul(&resid));
    let mut s: Vec<f64> = values.into_iter().map(|v| v.max(0.0).sqrt().min(1.0)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Largest principal angle (radians).
pub fn largest_principal_angle(a: &Matrix, b: &Matrix) -> Result<f64> {
    Ok(principal_angle_sines(a, b)?[0].asin())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralNetConfig {
    /// Radius of the quadratic constraint model.
    pub delta: f64,
    /// Update rate for the main step, below 1.
    pub beta: f64,
    /// Cholesky layer rate.
    pub alpha: f64,
    pub armijo_c1: f64,
    pub armijo_shrink: f64,
    pub armijo_max: usize,
    pub stagnation_window: usize,
    /// Rows per batch; `None` uses every vertex.
    pub batch_size: Option<usize>,
    pub max_iters: usize,
    /// Relative objective change regarded as converged.
    pub tol: f64,
    /// Ridge added to the Gauss-Newton constraint matrix.
    pub damping: f64,
    pub cg_iters: usize,
    /// Fraction of the main step's gain the Grassmann step must keep.
    pub retain: f64,
}

impl Default for SpectralNetConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            beta: 0.9,
            alpha: 0.5,
            armijo_c1: 1e-4,
            armijo_shrink: 0.5,
            armijo_max: 20,
            stagnation_window: 10,
            batch_size: None,
            max_iters: 5000,
            tol: 1e-15,
            damping: 0.01,
            cg_iters: 20,
            retain: 0.9,
        }
    }
}

impl SpectralNetConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta", self.delta),
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("armijo_c1", self.armijo_c1),
            ("armijo_shrink", self.armijo_shrink),
            ("damping", self.damping),
            ("tol", self.tol),
            ("retain", self.retain),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.beta >= 1.0 || self.alpha > 1.0 || self.armijo_shrink >= 1.0 || self.retain > 1.0 {
            return Err(Error::Config("beta and armijo_shrink must be below 1; alpha and retain at most 1".into()));
        }
        if self.armijo_max == 0 || self.stagnation_window == 0 || self.max_iters == 0 || self.cg_iters == 0 {
            return Err(Error::Config("iteration counts must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    /// `‖(1/m)·YᵀY − I‖_F²` of the raw parameters.
    pub constraint: f64,
    /// Grassmann distance of `Y/√m`.
    pub grassmann_distance: f64,
    pub step: f64,
    pub grassmann_step: f64,
    /// Main line search failed and the iteration was skipped.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralNetResult {
    /// Whitened output `Y·L⁻ᵀ` on all vertices.
    pub embedding: Matrix,
    pub layer: CholeskyLayer,
    pub trace: Vec<TraceRow>,
    pub objective: f64,
    pub iterations: usize,
}

impl SpectralNetResult {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,objective,constraint,grassmann_distance,step,grassmann_step,skipped\n");
        for r in &self.trace {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.iter,
                r.objective,
                r.constraint,
                r.grassmann_distance,
                r.step,
                r.grassmann_step,
                u8::from(r.skipped)
            );
        }
        out
    }

    pub fn embedding_csv(&self) -> String {
        let k = self.embedding.cols();
        let mut out = String::from("vertex");
        for j in 0..k {
            let _ = write!(out, ",y{j}");
        }
        out.push('\n');
        for i in 0..self.embedding.rows() {
            let _ = write!(out, "{i}");
            for v in self.embedding.row(i) {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Gauss-Newton map of the Gram constraint: `J(D) = (YᵀD + DᵀY)/m`.
fn constraint_jacobian(y: &Matrix, d: &Matrix, m: f64) -> Matrix {
    let ytd = y.tr_matmul(d);
    ytd.add(&ytd.transpose()).scale(1.0 / m)
}

/// `Jᵀ(S) = 2·Y·S/m` for symmetric `S`.
fn constraint_jacobian_t(y: &Matrix, s: &Matrix, m: f64) -> Matrix {
    y.matmul(s).scale(2.0 / m)
}

fn to_matrix(v: &[f64], rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, v.to_vec()).expect("length matches")
}

/// Minimizes the sequential Rayleigh quotient of `a` over `n×k` matrices.
///
/// Each iteration moves the Cholesky layer toward the factor of the batch
/// covariance, takes the objective gradient on the whitened output, solves
/// `(2JᵀJ + μI)·d = g` by conjugate gradient, scales the step to the
/// constraint radius and runs an Armijo search, then applies a Grassmann
/// correction (projected orthogonal to `d`) that must keep `retain` of the
/// gain. Rates halve after `stagnation_window` iterations without progress.
pub fn spectral_network_train<R: Rng + ?Sized>(
    a: &Matrix,
    k: usize,
    config: &SpectralNetConfig,
    rng: &mut R,
) -> Result<SpectralNetResult> {
    config.validate()?;
    let n = a.rows();
    if !a.is_square() || k == 0 || k > n {
        return Err(Error::Shape(format!("{}x{} operator with k = {k}", a.rows(), a.cols())));
    }
    let asym = a.max_asymmetry();
    if asym > 1e-10 * a.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut y = Matrix::from_fn(n, k, |_, _| StandardNormal.sample(rng));
    let w = cholesky_whiten(&y)?;
    y = w.y_star;
    let mut layer = CholeskyLayer::new(Matrix::identity(k), config.alpha)?;
    let mut beta = config.beta;
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut calm = 0;
    let mut iterations = 0;

    for iter in 0..config.max_iters {
        iterations = iter + 1;
        // Batch rows and operator.
        let rows: Option<Vec<usize>> = match config.batch_size {
            Some(bs) if bs < n => {
                let mut idx = sample_indices(rng, n, bs).into_vec();
                idx.sort_unstable();
                Some(idx)
            }
            _ => None,
        };
        let (a_b, y_b) = match &rows {
            Some(idx) => (Matrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])]), y.select_rows(idx)),
            None => (a.clone(), y.clone()),
        };
        let m = y_b.rows() as f64;

        // (1) Cholesky layer.
        let target = cholesky_whiten(&y_b)?.l;
        layer.update(&target);
        let y_star = layer.apply(&y_b);

        // (2) Gradient on the whitened output, pulled back through Y* = Y·L⁻ᵀ.
        let f0 = sequential_rayleigh(&a_b, &y_star)?.total;
        let g_star = sequential_rayleigh_gradient(&a_b, &y_star)?;
        let l_inv = layer.l.inverse()?;
        let g = g_star.matmul(&l_inv);

        // (3) Constraint-metric direction.
        let (rb, cb) = (y_b.rows(), k);
        let apply_m = |v: &[f64]| -> Result<Vec<f64>> {
            let d = to_matrix(v, rb, cb);
            let jd = constraint_jacobian(&y_b, &d, m);
            let out = constraint_jacobian_t(&y_b, &jd, m).scale(2.0).axpy(config.damping, &d);
            Ok(out.as_slice().to_vec())
        };
        let cg = conjugate_gradient(apply_m, g.as_slice(), config.cg_iters, 1e-12)?;
        let d = to_matrix(&cg.x, rb, cb);
        let dmd = {
            let jd = constraint_jacobian(&y_b, &d, m);
            2.0 * jd.frobenius_sq() + config.damping * d.frobenius_sq()
        };
        let slope = g.inner(&d);

        // (4) Armijo.
        let objective_at = |cand: &Matrix| -> Option<f64> {
            sequential_rayleigh(&a_b, &layer.apply(cand)).ok().map(|r| r.total).filter(|v| v.is_finite())
        };
        let mut step = 0.0;
        let mut y_new = y_b.clone();
        let mut f_new = f0;
        let mut skipped = true;
        if dmd > 0.0 && slope > 0.0 {
            let mut t = beta * (2.0 * config.delta / dmd).sqrt();
            for _ in 0..config.armijo_max {
                let cand = y_b.axpy(-t, &d);
                if let Some(fc) = objective_at(&cand) {
                    if fc <= f0 - config.armijo_c1 * t * slope {
                        y_new = cand;
                        f_new = fc;
                        step = t;
                        skipped = false;
                        break;
                    }
                }
                t *= config.armijo_shrink;
            }
        }
        if skipped {
            log::debug!("iteration {iter}: line search failed");
        }

        // (5) Grassmann correction orthogonal to d.
        let mut gstep = 0.0;
        if !skipped {
            let gain = f0 - f_new;
            let sq = m.sqrt();
            let proj = grassmann_distance_and_project(&y_new.scale(1.0 / sq))?;
            if let Some(b) = &proj.projection {
                let mut p = y_new.scale(1.0 / sq).sub(b).scale(2.0 / sq);
                let dd = d.frobenius_sq();
                if dd > 0.0 {
                    p = p.axpy(-p.inner(&d) / dd, &d);
                }
                let mut s = m / 2.0;
                for _ in 0..config.armijo_max {
                    let cand = y_new.axpy(-s, &p);
                    let better_geometry = grassmann_distance_and_project(&cand.scale(1.0 / sq))
                        .map(|c| c.distance < proj.distance)
                        .unwrap_or(false);
                    if better_geometry {
                        if let Some(fc) = objective_at(&cand) {
                            if f0 - fc >= config.retain * gain {
                                y_new = cand;
                                f_new = fc;
                                gstep = s;
                                break;
                            }
                        }
                    }
                    s *= config.armijo_shrink;
                }
            }
        }

        match &rows {
            Some(idx) => {
                for (bi, &vi) in idx.iter().enumerate() {
                    let src = y_new.row(bi).to_vec();
                    y.row_mut(vi).copy_from_slice(&src);
                }
            }
            None => y = y_new,
        }

        // (6) Stagnation.
        if !best.is_finite() || f_new < best - config.tol * best.abs().max(1.0) {
            best = f_new;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.stagnation_window {
                beta *= 0.5;
                layer.alpha *= 0.5;
                since_best = 0;
            }
        }

        let sq = (n as f64).sqrt();
        let gram = y.tr_matmul(&y).scale(1.0 / n as f64);
        trace.push(TraceRow {
            iter,
            objective: f_new,
            constraint: gram.sub(&Matrix::identity(k)).frobenius_sq(),
            grassmann_distance: grassmann_distance_and_project(&y.scale(1.0 / sq))
                .map(|p| p.distance)
                .unwrap_or(f64::NAN),
            step,
            grassmann_step: gstep,
            skipped,
        });

        if rows.is_none() {
            if (f0 - f_new).abs() <= config.tol * f0.abs().max(1.0) {
                calm += 1;
                if calm >= config.stagnation_window {
                    break;
                }
            } else {
                calm = 0;
            }
        }
    }

    let embedding = layer.apply(&y);
    let objective = sequential_rayleigh(a, &embedding)?.total;
    Ok(SpectralNetResult { embedding, layer, trace, objective, iterations })
}

/// Bottom-`k` eigenvectors of `a` from the dense solver (the oracle subspace).
pub fn bottom_eigenspace(a: &Matrix, k: usize) -> Result<(Vec<f64>, Matrix)> {
    let b = eigendecompose(a, Some(k))?;
    Ok((b.eigenvalues, b.eigenvectors))
}
