// Normalized spectral clustering of three Gaussian blobs.

use optionlab::cluster::{gaussian_blobs, permutation_accuracy, polygon_centers, spectral_clustering};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (points, truth) = gaussian_blobs(&polygon_centers(3, 10.0), 100, 1.0, &mut rng)?;
        let labels = spectral_clustering(&points, 3, 10, &mut rng)?;
        println!("seed {seed}: accuracy {:.3}", permutation_accuracy(&labels, &truth, 3)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
