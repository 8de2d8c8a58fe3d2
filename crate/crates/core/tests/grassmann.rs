use nalgebra::DMatrix;
use optionlab::grassmann::*;
use optionlab::gridworld::GridConfig;
use optionlab::linalg::Matrix;
use optionlab::pvf::transition_graph;
use optionlab::spectral::{laplacian, LaplacianKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(n, k, |_, _| rng.random_range(-1.5..1.5))
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

#[test]
fn distance_matches_the_svd_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.random_range(2..12);
        let k = rng.random_range(1..=n);
        let a = random_matrix(n, k, &mut rng);
        let svd = to_na(&a).svd(true, true);
        let uvt = svd.u.unwrap() * svd.v_t.unwrap();
        let reference = (to_na(&a) - &uvt).norm_squared();
        let g = grassmann_distance_and_project(&a).unwrap();
        assert!((g.distance - reference).abs() < 1e-10, "{} vs {reference}", g.distance);
        let b = to_na(g.projection().unwrap());
        assert!((b - uvt).amax() < 1e-8);
    }
}

#[test]
fn distance_lower_bounds_every_orthonormal_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random_matrix(6, 3, &mut rng);
    let d = grassmann_distance_and_project(&a).unwrap().distance;
    let na = to_na(&a);
    for _ in 0..10_000 {
        let q = to_na(&random_matrix(6, 3, &mut rng)).qr().q();
        assert!((&na - q).norm_squared() >= d - 1e-10);
    }
}

#[test]
fn whitening_gives_identity_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (m, k) in [(10, 1), (40, 3), (200, 8)] {
        let y = random_matrix(m, k, &mut rng);
        let w = cholesky_whiten(&y).unwrap();
        let cov = w.y_star.tr_matmul(&w.y_star).scale(1.0 / m as f64);
        assert!(cov.sub(&Matrix::identity(k)).max_abs() < 1e-10);
        // L·Lᵀ reproduces the covariance.
        let s = y.tr_matmul(&y).scale(1.0 / m as f64);
        assert!(w.l.matmul(&w.l.transpose()).sub(&s).max_abs() < 1e-10);
    }
    let collapsed = Matrix::from_fn(5, 2, |i, _| i as f64);
    assert!(cholesky_whiten(&collapsed).is_err());
}

#[test]
fn sequential_rayleigh_is_minimized_by_ordered_eigenvectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b = random_matrix(7, 7, &mut rng);
    let a = b.add(&b.transpose());
    let (values, q) = bottom_eigenspace(&a, 3).unwrap();
    let opt = optimal_sequential_value(&values, 3);
    assert!((sequential_rayleigh(&a, &q).unwrap().total - opt).abs() < 1e-10);
    for _ in 0..200 {
        let y = random_matrix(7, 3, &mut rng);
        assert!(sequential_rayleigh(&a, &y).unwrap().total >= opt - 1e-10);
    }
}

#[test]
fn sequential_rayleigh_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let b = random_matrix(6, 6, &mut rng);
    let a = b.add(&b.transpose());
    let y = random_matrix(6, 3, &mut rng);
    let grad = sequential_rayleigh_gradient(&a, &y).unwrap();
    let eps = 1e-6;
    for r in 0..6 {
        for c in 0..3 {
            let f = |d: f64| {
                let mut z = y.clone();
                z[(r, c)] += d;
                sequential_rayleigh(&a, &z).unwrap().total
            };
            let fd = (f(eps) - f(-eps)) / (2.0 * eps);
            assert!((fd - grad[(r, c)]).abs() < 1e-6 * grad[(r, c)].abs().max(1.0));
        }
    }
}

fn check_recovery(a: &Matrix, k: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = spectral_network_train(a, k, &SpectralNetConfig::default(), &mut rng).unwrap();
    let (values, q) = bottom_eigenspace(a, k).unwrap();
    let opt = optimal_sequential_value(&values, k);
    let angle = largest_principal_angle(&r.embedding, &q).unwrap();
    assert!(angle < 1e-3, "angle {angle}");
    // Same angle from nalgebra's eigensolver, QR and SVD.
    let n = a.rows();
    let eig = to_na(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let reference = DMatrix::from_fn(n, k, |i, j| eig.eigenvectors[(i, order[j])]);
    let basis = to_na(&r.embedding).qr().q();
    let resid = &basis - &reference * (reference.transpose() * &basis);
    let sine = resid.singular_values().max();
    assert!((sine.asin() - angle).abs() < 1e-8, "{} vs {angle}", sine.asin());
    assert!((r.objective - opt).abs() <= 0.01 * opt.abs(), "{} vs {opt}", r.objective);
}

#[test]
fn recovers_the_bottom_subspace_of_a_diagonal_operator() {
    check_recovery(&Matrix::diag(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]), 2, 1);
}

#[test]
fn recovers_the_bottom_subspace_of_the_four_room_laplacian() {
    let world = GridConfig::default().build(0).unwrap();
    let l = laplacian(&transition_graph(&world.mdp, &world.live_states()), LaplacianKind::Combinatorial).unwrap();
    check_recovery(&l, 4, 0);
}
