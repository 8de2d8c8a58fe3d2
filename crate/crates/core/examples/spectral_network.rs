// Learning the bottom eigenvectors of a diagonal operator with the
// whitened, trust-region spectral network.

use optionlab::grassmann::{
    bottom_eigenspace, grassmann_distance_and_project, largest_principal_angle, optimal_sequential_value,
    spectral_network_train, SpectralNetConfig,
};
use optionlab::linalg::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let a = Matrix::diag(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    let k = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let result = spectral_network_train(&a, k, &SpectralNetConfig::default(), &mut rng)?;

    let (eigenvalues, q) = bottom_eigenspace(&a, k)?;
    println!("iterations {}", result.iterations);
    println!("objective {:.10} (optimum {:.10})", result.objective, optimal_sequential_value(&eigenvalues, k));
    println!("largest principal angle {:.3e}", largest_principal_angle(&result.embedding, &q)?);

    let n = a.rows() as f64;
    let g = grassmann_distance_and_project(&result.embedding.scale(1.0 / n.sqrt()))?;
    println!("distance of Y/sqrt(n) from the Stiefel manifold {:.3e}", g.distance);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
