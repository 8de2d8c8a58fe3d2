// Transition-graph Laplacian of the four-room world, its low spectrum and
// the cut value of one room.

use optionlab::gridworld::GridConfig;
use optionlab::pvf::transition_graph;
use optionlab::spectral::{cut_measures, laplacian, laplacian_spectrum, LaplacianKind};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let world = GridConfig::default().build(0)?;
    let graph = transition_graph(&world.mdp, &world.live_states());
    println!("{} vertices, {} edges", graph.n_vertices(), graph.edge_count());

    for kind in [LaplacianKind::Combinatorial, LaplacianKind::Symmetric, LaplacianKind::RandomWalk] {
        let spec = laplacian_spectrum(&graph, kind, Some(5))?;
        let shown: Vec<String> = spec.eigenvalues.iter().map(|x| format!("{x:.4}")).collect();
        println!("{kind:?}: {}", shown.join(" "));
    }

    let l = laplacian(&graph, LaplacianKind::Combinatorial)?;
    let spec = laplacian_spectrum(&graph, LaplacianKind::Combinatorial, None)?;
    println!("residual {:.2e}, orthonormality {:.2e}", spec.residual(&l), spec.orthonormality_error());

    // Vertices in the top-left room.
    let room: Vec<usize> = (0..graph.n_vertices())
        .filter(|&i| match world.key(*graph.key(i)) {
            optionlab::gridworld::StateKey::Live(gs) => gs.agent.0 < 4 && gs.agent.1 < 4,
            _ => false,
        })
        .collect();
    let cut = cut_measures(&graph, &room)?;
    println!("room of {}: ratiocut {:.4}, ncut {:.4}", room.len(), cut.ratiocut, cut.ncut);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
