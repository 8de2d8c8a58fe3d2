use nalgebra::{DMatrix, SymmetricEigen};
use optionlab::gridworld::{build_four_rooms, GoalMode};
use optionlab::linalg::Matrix;
use optionlab::pvf::transition_graph;
use optionlab::spectral::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(n: usize, density: f64, rng: &mut ChaCha8Rng) -> GraphAccumulator<usize> {
    let mut edges = Vec::new();
    for i in 0..n {
        // A spanning path keeps every degree positive.
        if i + 1 < n {
            edges.push((i, i + 1, rng.random_range(0.5..2.0)));
        }
        for j in i + 2..n {
            if rng.random::<f64>() < density {
                edges.push((i, j, rng.random_range(0.1..3.0)));
            }
        }
    }
    GraphAccumulator::from_edges(n, &edges).unwrap()
}

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn sorted_reference(m: &Matrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(to_nalgebra(m)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn eigenvalues_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [3, 10, 40, 90] {
        let g = random_graph(n, 0.2, &mut rng);
        for kind in [LaplacianKind::Combinatorial, LaplacianKind::Symmetric] {
            let l = laplacian(&g, kind).unwrap();
            let ours = eigendecompose(&l, None).unwrap();
            for (a, b) in ours.eigenvalues.iter().zip(sorted_reference(&l)) {
                assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
            }
        }
        let dense = Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 7) % 11) as f64 - 5.0 + (i == j) as u8 as f64);
        let sym = dense.add(&dense.transpose());
        for (a, b) in eigendecompose(&sym, None).unwrap().eigenvalues.iter().zip(sorted_reference(&sym)) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn residual_and_orthonormality_on_large_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_graph(300, 0.03, &mut rng);
    let l = laplacian(&g, LaplacianKind::Combinatorial).unwrap();
    let b = eigendecompose(&l, None).unwrap();
    assert!(b.residual(&l) < 1e-8, "residual {}", b.residual(&l));
    assert!(b.orthonormality_error() < 1e-8);
    assert!(b.eigenvalues[0].abs() < 1e-10);
    assert!(b.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn quadratic_form_and_cut_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_graph(25, 0.3, &mut rng);
    let l = laplacian(&g, LaplacianKind::Combinatorial).unwrap();
    let w = g.adjacency_matrix();
    let d = g.degrees();
    for _ in 0..200 {
        let subset: Vec<usize> = loop {
            let s: Vec<usize> = (0..25).filter(|_| rng.random::<bool>()).collect();
            if !s.is_empty() && s.len() < 25 {
                break s;
            }
        };
        let ind: Vec<f64> = (0..25).map(|i| subset.contains(&i) as u8 as f64).collect();
        // Direct sums over the weight matrix.
        let mut crossing = 0.0;
        for &i in &subset {
            for j in (0..25).filter(|j| !subset.contains(j)) {
                crossing += w[(i, j)];
            }
        }
        let vol: f64 = subset.iter().map(|&i| d[i]).sum();
        let c = cut_measures(&g, &subset).unwrap();
        let quad = optionlab::linalg::dot(&ind, &l.matvec(&ind));
        assert!((quad - crossing).abs() < 1e-10);
        assert!((quadratic_form(&g, &ind) - quad).abs() < 1e-10);
        assert!((c.ratiocut - crossing / subset.len() as f64).abs() < 1e-10);
        assert!((c.ncut - crossing / vol).abs() < 1e-10);
        assert!((c.rayleigh_ratio - c.ratiocut).abs() < 1e-10);
        assert!((c.rayleigh_normalized - c.ncut).abs() < 1e-10);
    }
}

#[test]
fn random_walk_and_symmetric_spectra_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let g = random_graph(30, 0.2, &mut rng);
    let sym = laplacian_spectrum(&g, LaplacianKind::Symmetric, None).unwrap();
    let rw = laplacian_spectrum(&g, LaplacianKind::RandomWalk, None).unwrap();
    let l_rw = laplacian(&g, LaplacianKind::RandomWalk).unwrap();
    let d = g.degrees();
    for j in 0..30 {
        assert!((sym.eigenvalues[j] - rw.eigenvalues[j]).abs() < 1e-12);
        let u = rw.vector(j);
        let lu = l_rw.matvec(&u);
        let err = lu.iter().zip(&u).map(|(a, b)| (a - rw.eigenvalues[j] * b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
        let dnorm: f64 = u.iter().zip(d).map(|(x, di)| x * x * di).sum();
        assert!((dnorm - 1.0).abs() < 1e-9);
    }
}

#[test]
fn fiedler_vector_finds_the_brute_force_ratiocut() {
    // Two 6-cliques joined by one light edge.
    let mut edges = Vec::new();
    for base in [0, 6] {
        for i in 0..6 {
            for j in i + 1..6 {
                edges.push((base + i, base + j, 1.0));
            }
        }
    }
    edges.push((2, 9, 0.5));
    let g = GraphAccumulator::from_edges(12, &edges).unwrap();
    let (mut best, mut best_set) = (f64::INFINITY, 0u32);
    for mask in 1..(1u32 << 12) - 1 {
        let subset: Vec<usize> = (0..12).filter(|i| mask >> i & 1 == 1).collect();
        let c = cut_measures(&g, &subset).unwrap();
        let balanced = c.ratiocut + c.ratiocut * subset.len() as f64 / (12 - subset.len()) as f64;
        if balanced < best - 1e-12 {
            best = balanced;
            best_set = mask;
        }
    }
    let fiedler = laplacian_spectrum(&g, LaplacianKind::Combinatorial, Some(2)).unwrap().vector(1);
    let side: u32 = (0..12).filter(|&i| fiedler[i] > 0.0).map(|i| 1 << i).sum();
    assert!(side == best_set || side == !best_set & 0xfff);
    assert_eq!(best_set.count_ones(), 6);
}

#[test]
fn four_room_graph_is_connected_and_sized() {
    let env = build_four_rooms(8, GoalMode::FixedGoal, 0).unwrap();
    let live = env.live_states();
    let g = transition_graph(&env.mdp, &live);
    assert_eq!(g.n_vertices(), live.len());
    assert!(g.components().iter().all(|&c| c == 0));
    let spec = laplacian_spectrum(&g, LaplacianKind::Combinatorial, None).unwrap();
    assert!(spec.eigenvalues[0].abs() < 1e-10 && spec.eigenvalues[1] > 1e-6);
    // Trace of L equals total degree, which is twice the edge weight.
    let total: f64 = spec.eigenvalues.iter().sum();
    assert!((total - g.degrees().iter().sum::<f64>()).abs() < 1e-9);
}

#[test]
fn transitions_accumulate_idempotently() {
    let mut g = GraphAccumulator::<&str>::new();
    for (a, b) in [("x", "y"), ("y", "x"), ("x", "y"), ("y", "z"), ("z", "z")] {
        g.accumulate_transition(a, b);
    }
    assert_eq!(g.n_vertices(), 3);
    assert_eq!(g.edge_count(), 2);
    assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
    assert_eq!(g.components(), vec![0, 0, 0]);
}
