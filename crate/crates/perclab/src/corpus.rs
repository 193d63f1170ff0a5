//! Bundled small-graph corpus for the exact checks: paths, cycles, stars,
//! trees, a hyperbolic-tiling fragment and grid fragments, all within the
//! enumeration caps. Each entry carries a far-separated vertex triple for
//! the connection-event checks.

use percolib::graph::{build_grid, build_tree, Graph};
use percolib::map::build_tiling;

pub struct CorpusEntry {
    pub name: &'static str,
    pub graph: Graph,
    /// (u, w, v): endpoints far apart with w between them.
    pub triple: (u32, u32, u32),
}

pub fn path_graph(n: u32) -> Graph {
    let edges = (0..n - 1).map(|i| (i, i + 1)).collect();
    Graph::from_edges(&format!("path({n})"), n, edges, &[0, n - 1]).unwrap()
}

pub fn cycle_graph(n: u32) -> Graph {
    let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::from_edges(&format!("cycle({n})"), n, edges, &[]).unwrap()
}

pub fn star_graph(leaves: u32) -> Graph {
    let edges = (1..=leaves).map(|i| (0, i)).collect();
    let boundary: Vec<u32> = (1..=leaves).collect();
    Graph::from_edges(&format!("star({leaves})"), leaves + 1, edges, &boundary).unwrap()
}

/// Two vertices joined by three internally disjoint length-2 paths.
pub fn theta_graph() -> Graph {
    let edges = vec![(0, 2), (2, 1), (0, 3), (3, 1), (0, 4), (4, 1)];
    Graph::from_edges("theta(2,2,2)", 5, edges, &[]).unwrap()
}

/// Wheel fragment of the {3,7} tessellation: a degree-7 hub with its ring.
pub fn heptagonal_wheel() -> Graph {
    let m = build_tiling(3, 7, 2).expect("tiling patch");
    m.graph().ball(0, 1).expect("wheel fragment")
}

/// The fixed corpus: at least ten graphs, each with at most 16 edges.
pub fn corpus() -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    let mut push = |name: &'static str, graph: Graph, triple: (u32, u32, u32)| {
        assert!(graph.edge_count() <= 16, "{name} exceeds 16 edges");
        out.push(CorpusEntry { name, graph, triple });
    };
    push("path5", path_graph(5), (0, 2, 4));
    push("path8", path_graph(8), (0, 3, 7));
    push("cycle5", cycle_graph(5), (0, 1, 3));
    push("cycle8", cycle_graph(8), (0, 2, 4));
    push("star6", star_graph(6), (1, 0, 4));
    push("tree3x2", build_tree(3, 2).unwrap(), (4, 0, 8));
    push("tree4x2", build_tree(4, 2).unwrap(), (5, 0, 13));
    push("theta", theta_graph(), (0, 2, 1));
    push("wheel37", heptagonal_wheel(), (1, 0, 4));
    push("grid3x3", build_grid(3, 3).unwrap(), (0, 4, 8));
    push("ladder2x4", build_grid(4, 2).unwrap(), (0, 1, 7));
    out
}

/// The subset small enough for the ghost-field inequality checks.
pub fn inverse_bk_corpus() -> Vec<CorpusEntry> {
    corpus()
        .into_iter()
        .filter(|e| e.graph.edge_count() <= 14)
        .collect()
}
