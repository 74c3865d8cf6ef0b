use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use locvar::decoder::{build_defect_graph, correction_from_matching, decode, shortest_paths_from};
use locvar::lattice::{build_graph, CodeKind, DecodingGraph, EdgeKind};
use locvar::matching::brute_force_matching_counted;
use locvar::syndrome::{extract_syndrome, Syndrome};

/// Minimum over every simple path; boundary nodes may end a path but not
/// be passed through.
fn enumerate(g: &DecodingGraph, w: &[f64], at: usize, source: usize, cost: f64, seen: &mut Vec<bool>, best: &mut [f64]) {
    if cost < best[at] {
        best[at] = cost;
    }
    if at != source && g.is_boundary(at) {
        return;
    }
    for &(next, e) in g.incident(at) {
        if !seen[next] {
            seen[next] = true;
            enumerate(g, w, next, source, cost + w[e], seen, best);
            seen[next] = false;
        }
    }
}

fn all_simple_paths(g: &DecodingGraph, w: &[f64], source: usize) -> Vec<f64> {
    let mut best = vec![f64::INFINITY; g.node_count()];
    let mut seen = vec![false; g.node_count()];
    seen[source] = true;
    enumerate(g, w, source, source, 0.0, &mut seen, &mut best);
    best
}

#[test]
fn shortest_paths_match_exhaustive_enumeration() {
    // 20 nodes: 2 sites x 9 layers plus two boundaries
    let g = build_graph(CodeKind::Repetition, 3, 8).unwrap();
    assert_eq!(g.node_count(), 20);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let w: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen_range(0.1..5.0)).collect();
        for source in 0..g.node_count() {
            let sp = shortest_paths_from(&g, &w, source).unwrap();
            let oracle = all_simple_paths(&g, &w, source);
            for v in 0..g.node_count() {
                assert!((sp.dist[v] - oracle[v]).abs() < 1e-9, "source {source} target {v}");
                if let Some(path) = sp.path_to(&g, v) {
                    let cost: f64 = path.iter().map(|&e| w[e]).sum();
                    assert!((cost - sp.dist[v]).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn shortest_paths_on_a_wider_lattice() {
    let g = build_graph(CodeKind::Surface, 3, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let w: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen_range(0.1..5.0)).collect();
    for source in 0..g.detection_count() {
        let sp = shortest_paths_from(&g, &w, source).unwrap();
        let oracle = all_simple_paths(&g, &w, source);
        for v in 0..g.node_count() {
            assert!((sp.dist[v] - oracle[v]).abs() < 1e-9);
        }
    }
}

#[test]
fn three_edge_geodesic_is_unique() {
    let g = build_graph(CodeKind::Repetition, 9, 5).unwrap();
    let mut w = vec![1.0; g.edge_count()];
    for e in g.edges() {
        if e.kind == EdgeKind::Time {
            w[e.id] = 1.5;
        }
    }
    let (u, v) = (g.detection_node(3, 2), g.detection_node(6, 2));
    // oracle: count the minimum-cost simple paths by enumeration
    fn count(g: &DecodingGraph, w: &[f64], at: usize, target: usize, cost: f64, limit: f64, seen: &mut Vec<bool>, hits: &mut usize) {
        if cost > limit + 1e-9 {
            return;
        }
        if at == target {
            *hits += 1;
            return;
        }
        if g.is_boundary(at) {
            return;
        }
        for &(next, e) in g.incident(at) {
            if !seen[next] {
                seen[next] = true;
                count(g, w, next, target, cost + w[e], limit, seen, hits);
                seen[next] = false;
            }
        }
    }
    let mut seen = vec![false; g.node_count()];
    seen[u] = true;
    let mut hits = 0;
    count(&g, &w, u, v, 0.0, 3.0, &mut seen, &mut hits);
    assert_eq!(hits, 1);

    let dg = build_defect_graph(&Syndrome { defects: vec![u, v] }, &g, &w).unwrap();
    let c = correction_from_matching(&decode(&dg).unwrap(), &dg, &g).unwrap();
    assert_eq!(c.edges(), &[g.space_edge(4, 2), g.space_edge(5, 2), g.space_edge(6, 2)]);
}

#[test]
fn six_defects_against_all_pairings() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for code in [CodeKind::Repetition, CodeKind::Surface] {
        let g = build_graph(code, 7, 7).unwrap();
        for _ in 0..40 {
            let w: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen_range(0.3..3.0)).collect();
            let mut defects = rand::seq::index::sample(&mut rng, g.detection_count(), 6).into_vec();
            defects.sort_unstable();
            let dg = build_defect_graph(&Syndrome { defects: defects.clone() }, &g, &w).unwrap();
            let m = decode(&dg).unwrap();
            let (oracle, pairings) = brute_force_matching_counted(&dg.to_instance().unwrap()).unwrap();
            assert!(pairings <= 10395);
            assert!((m.weight - oracle.weight).abs() < 1e-9);
            let c = correction_from_matching(&m, &dg, &g).unwrap();
            let cost: f64 = c.edges().iter().map(|&e| w[e]).sum();
            assert!(cost <= m.weight + 1e-9);
            let s = extract_syndrome(&g, &c).unwrap();
            assert_eq!(s.defects, defects);
        }
    }
}
