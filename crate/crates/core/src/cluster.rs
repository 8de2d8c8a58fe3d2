//! Spectral clustering of point clouds through a k-nearest-neighbour graph.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::spectral::{laplacian_spectrum, GraphAccumulator, LaplacianKind};
use crate::sampling::sample_categorical;

/// Isotropic Gaussian blobs, `n_per_center` points each; labels follow `centers`.
pub fn gaussian_blobs<R: Rng + ?Sized>(
    centers: &[Vec<f64>],
    n_per_center: usize,
    std: f64,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut points = Vec::with_capacity(centers.len() * n_per_center);
    let mut labels = Vec::with_capacity(points.capacity());
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..n_per_center {
            points.push(c.iter().map(|x| x + normal.sample(rng)).collect());
            labels.push(label);
        }
    }
    Ok((points, labels))
}

/// `k` planar centers on a regular polygon whose adjacent centers are `side` apart.
pub fn polygon_centers(k: usize, side: f64) -> Vec<Vec<f64>> {
    if k <= 1 {
        return vec![vec![0.0, 0.0]; k];
    }
    let radius = side / (2.0 * (std::f64::consts::PI / k as f64).sin());
    (0..k)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            vec![radius * t.cos(), radius * t.sin()]
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Symmetrized unit-weight k-NN graph (an edge if either end lists the other).
/// Distance ties resolve toward the lower index.
pub fn knn_graph(points: &[Vec<f64>], k: usize) -> Result<GraphAccumulator<usize>> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("{k} neighbours for {n} points")));
    }
    let mut g = GraphAccumulator::with_vertices(n);
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (sq_dist(&points[i], &points[j]), j)).collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &others[..k] {
            g.set_weight(i, j, 1.0);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
}

/// Lloyd iterations from a k-means++ seeding.
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, max_iters: usize, rng: &mut R) -> Result<KMeans> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("{k} clusters for {n} points")));
    }
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> =
            points.iter().map(|p| centroids.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let w: Vec<f64> = d2.iter().map(|d| d / total).collect();
            sample_categorical(&w, rng)
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[next].clone());
    }
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k).min_by(|&a, &b| sq_dist(p, &centroids[a]).total_cmp(&sq_dist(p, &centroids[b]))).unwrap();
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centroids[l])).sum();
    Ok(KMeans { labels, centroids, inertia, iterations })
}

/// Bottom-`k` eigenvectors of `L_sym`, rows scaled to unit length.
pub fn spectral_embedding(graph: &GraphAccumulator<usize>, k: usize) -> Result<Vec<Vec<f64>>> {
    let spec = laplacian_spectrum(graph, LaplacianKind::Symmetric, Some(k))?;
    Ok((0..graph.n_vertices())
        .map(|i| {
            let row = spec.eigenvectors.row(i).to_vec();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect())
}

/// k-NN graph, normalized spectral embedding and k-means.
pub fn spectral_clustering<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    neighbours: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let graph = knn_graph(points, neighbours)?;
    let emb = spectral_embedding(&graph, k)?;
    Ok(kmeans(&emb, k, 300, rng)?.labels)
}

/// Accuracy under the best relabelling of `predicted` (exhaustive over permutations).
pub fn permutation_accuracy(predicted: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::Shape("label vectors differ in length or are empty".into()));
    }
    if k > 8 {
        return Err(Error::TooLarge { n: k, cap: 8 });
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::Shape(format!("label outside 0..{k}")));
        }
        confusion[p][t] += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        best = best.max((0..k).map(|i| confusion[i][p[i]]).sum());
    });
    Ok(best as f64 / truth.len() as f64)
}

fn permute(v: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == v.len() {
        visit(v);
        return;
    }
    for i in start..v.len() {
        v.swap(start, i);
        permute(v, start + 1, visit);
        v.swap(start, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_is_permutation_invariant() {
        assert_eq!(permutation_accuracy(&[1, 1, 0, 2], &[0, 0, 1, 2], 3).unwrap(), 1.0);
        assert_eq!(permutation_accuracy(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap(), 0.5);
    }

    #[test]
    fn polygon_sides() {
        let c = polygon_centers(3, 10.0);
        for i in 0..3 {
            assert!((sq_dist(&c[i], &c[(i + 1) % 3]).sqrt() - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_graph_is_symmetric() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0], vec![10.0]];
        let g = knn_graph(&pts, 1).unwrap();
        assert_eq!(g.weight(0, 1), 1.0);
        assert_eq!(g.weight(3, 2), 1.0);
        assert_eq!(g.weight(2, 3), 1.0);
        assert_eq!(g.weight(0, 3), 0.0);
    }
}
