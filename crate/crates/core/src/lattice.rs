//! Space-time decoding graphs.
//!
//! A graph has one detection node per (check, layer) for layers `0..=T`, plus
//! two boundary nodes (`Left`, `Right`) shared by all layers. A measurement
//! error on check `s` in noisy round `t` is a time edge between layers `t` and
//! `t + 1`; a data error in layer `t < T` is a space edge. Layer `T` is the
//! closing round of perfect measurement and carries no space edges.
//!
//! Only one error sector of the surface code is built: Z errors detected by
//! X-type checks. Checks sit on an `L x (L - 1)` grid, each row has `L`
//! horizontal qubits (the outer two touch the left and right boundaries) and
//! each pair of adjacent rows is joined by `L - 1` vertical qubits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeIndex = usize;
pub type EdgeIndex = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeKind {
    Repetition,
    Surface,
}

impl CodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CodeKind::Repetition => "repetition",
            CodeKind::Surface => "surface",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySide {
    Left,
    Right,
}

/// Structured identity of a node. Repetition-code checks use `row = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeId {
    Detection { row: usize, col: usize, time: usize },
    Boundary { side: BoundarySide },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Space,
    Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeIndex,
    pub endpoints: (NodeIndex, NodeIndex),
    pub kind: EdgeKind,
    /// Layer of a space edge, or the lower layer of a time edge.
    pub layer: usize,
    /// Qubit index for space edges, check (site) index for time edges.
    pub location: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodingGraph {
    code: CodeKind,
    distance: usize,
    rounds: usize,
    rows: usize,
    cols: usize,
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    adj_offsets: Vec<usize>,
    adj: Vec<(NodeIndex, EdgeIndex)>,
}

fn check_size(distance: usize, rounds: usize) -> Result<()> {
    if distance < 3 || distance % 2 == 0 {
        return Err(Error::config(format!(
            "code distance must be an odd integer >= 3, got {distance}"
        )));
    }
    if rounds < 1 {
        return Err(Error::config("number of noisy rounds must be >= 1"));
    }
    Ok(())
}

/// Builds the repetition-code graph: `L - 1` checks per layer and `L` qubits,
/// qubit 0 touching the left boundary and qubit `L - 1` the right one.
pub fn build_repetition_graph(distance: usize, rounds: usize) -> Result<DecodingGraph> {
    check_size(distance, rounds)?;
    let mut b = Builder::new(CodeKind::Repetition, distance, rounds, 1, distance - 1);
    for t in 0..rounds {
        for q in 0..distance {
            let left = if q == 0 { b.left() } else { b.detection(q - 1, t) };
            let right = if q == distance - 1 {
                b.right()
            } else {
                b.detection(q, t)
            };
            b.space_edge(left, right, t, q);
        }
        b.time_edges(t);
    }
    Ok(b.finish())
}

/// Builds one error sector of the `L x L` planar surface code.
pub fn build_surface_graph(distance: usize, rounds: usize) -> Result<DecodingGraph> {
    check_size(distance, rounds)?;
    let l = distance;
    let cols = l - 1;
    let mut b = Builder::new(CodeKind::Surface, distance, rounds, l, cols);
    for t in 0..rounds {
        for r in 0..l {
            for j in 0..l {
                let left = if j == 0 {
                    b.left()
                } else {
                    b.detection(r * cols + j - 1, t)
                };
                let right = if j == l - 1 {
                    b.right()
                } else {
                    b.detection(r * cols + j, t)
                };
                b.space_edge(left, right, t, r * l + j);
            }
        }
        for r in 0..l - 1 {
            for c in 0..cols {
                let up = b.detection(r * cols + c, t);
                let down = b.detection((r + 1) * cols + c, t);
                b.space_edge(up, down, t, l * l + r * cols + c);
            }
        }
        b.time_edges(t);
    }
    Ok(b.finish())
}

pub fn build_graph(code: CodeKind, distance: usize, rounds: usize) -> Result<DecodingGraph> {
    match code {
        CodeKind::Repetition => build_repetition_graph(distance, rounds),
        CodeKind::Surface => build_surface_graph(distance, rounds),
    }
}

/// Log-likelihood weight `ln((1 - p) / p)` of an edge flipped with probability `p`.
pub fn edge_weight(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::Domain(format!(
            "edge weight needs 0 < p < 0.5, got {p}"
        )));
    }
    Ok(((1.0 - p) / p).ln())
}

struct Builder {
    graph: DecodingGraph,
}

impl Builder {
    fn new(code: CodeKind, distance: usize, rounds: usize, rows: usize, cols: usize) -> Self {
        let sites = rows * cols;
        let mut nodes = Vec::with_capacity(sites * (rounds + 1) + 2);
        for time in 0..=rounds {
            for row in 0..rows {
                for col in 0..cols {
                    nodes.push(NodeId::Detection { row, col, time });
                }
            }
        }
        nodes.push(NodeId::Boundary {
            side: BoundarySide::Left,
        });
        nodes.push(NodeId::Boundary {
            side: BoundarySide::Right,
        });
        Builder {
            graph: DecodingGraph {
                code,
                distance,
                rounds,
                rows,
                cols,
                nodes,
                edges: Vec::new(),
                adj_offsets: Vec::new(),
                adj: Vec::new(),
            },
        }
    }

    fn detection(&self, site: usize, time: usize) -> NodeIndex {
        self.graph.detection_node(site, time)
    }

    fn left(&self) -> NodeIndex {
        self.graph.boundary_node(BoundarySide::Left)
    }

    fn right(&self) -> NodeIndex {
        self.graph.boundary_node(BoundarySide::Right)
    }

    fn push(&mut self, a: NodeIndex, b: NodeIndex, kind: EdgeKind, layer: usize, location: usize) {
        let id = self.graph.edges.len();
        self.graph.edges.push(Edge {
            id,
            endpoints: (a, b),
            kind,
            layer,
            location,
        });
    }

    fn space_edge(&mut self, a: NodeIndex, b: NodeIndex, layer: usize, qubit: usize) {
        self.push(a, b, EdgeKind::Space, layer, qubit);
    }

    fn time_edges(&mut self, layer: usize) {
        for s in 0..self.graph.sites() {
            let a = self.detection(s, layer);
            let b = self.detection(s, layer + 1);
            self.push(a, b, EdgeKind::Time, layer, s);
        }
    }

    fn finish(mut self) -> DecodingGraph {
        let g = &mut self.graph;
        let n = g.nodes.len();
        let mut degree = vec![0usize; n + 1];
        for e in &g.edges {
            degree[e.endpoints.0] += 1;
            degree[e.endpoints.1] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut adj = vec![(0, 0); offsets[n]];
        // edges are visited in id order, so every adjacency slice is sorted by edge id
        for e in &g.edges {
            let (a, b) = e.endpoints;
            adj[fill[a]] = (b, e.id);
            fill[a] += 1;
            adj[fill[b]] = (a, e.id);
            fill[b] += 1;
        }
        g.adj_offsets = offsets;
        g.adj = adj;
        self.graph
    }
}

impl DecodingGraph {
    pub fn code(&self) -> CodeKind {
        self.code
    }

    pub fn distance(&self) -> usize {
        self.distance
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Check grid shape of a single layer, `(rows, cols)`.
    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Number of checks per layer.
    pub fn sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn detection_count(&self) -> usize {
        self.sites() * (self.rounds + 1)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeIndex) -> &Edge {
        &self.edges[e]
    }

    pub fn node(&self, n: NodeIndex) -> NodeId {
        self.nodes[n]
    }

    pub fn detection_node(&self, site: usize, time: usize) -> NodeIndex {
        debug_assert!(site < self.sites() && time <= self.rounds);
        time * self.sites() + site
    }

    pub fn boundary_node(&self, side: BoundarySide) -> NodeIndex {
        match side {
            BoundarySide::Left => self.detection_count(),
            BoundarySide::Right => self.detection_count() + 1,
        }
    }

    pub fn is_boundary(&self, n: NodeIndex) -> bool {
        n >= self.detection_count()
    }

    /// `(site, time)` of a detection node, `None` for boundaries.
    pub fn site_time(&self, n: NodeIndex) -> Option<(usize, usize)> {
        if self.is_boundary(n) {
            None
        } else {
            Some((n % self.sites(), n / self.sites()))
        }
    }

    /// `(row, col)` of a check site.
    pub fn site_coords(&self, site: usize) -> (usize, usize) {
        (site / self.cols, site % self.cols)
    }

    /// `(neighbour, edge)` pairs incident to `n`, sorted by edge id.
    pub fn incident(&self, n: NodeIndex) -> &[(NodeIndex, EdgeIndex)] {
        &self.adj[self.adj_offsets[n]..self.adj_offsets[n + 1]]
    }

    pub fn degree(&self, n: NodeIndex) -> usize {
        self.adj_offsets[n + 1] - self.adj_offsets[n]
    }

    /// Time edge of `site` between layers `layer` and `layer + 1`.
    pub fn time_edge(&self, site: usize, layer: usize) -> EdgeIndex {
        debug_assert!(layer < self.rounds);
        let per_layer = self.space_per_layer() + self.sites();
        layer * per_layer + self.space_per_layer() + site
    }

    /// Space edge of `qubit` in `layer`.
    pub fn space_edge(&self, qubit: usize, layer: usize) -> EdgeIndex {
        debug_assert!(layer < self.rounds);
        let per_layer = self.space_per_layer() + self.sites();
        layer * per_layer + qubit
    }

    /// Data qubits per layer.
    pub fn space_per_layer(&self) -> usize {
        match self.code {
            CodeKind::Repetition => self.distance,
            CodeKind::Surface => self.distance * self.distance + (self.distance - 1) * (self.distance - 1),
        }
    }

    /// Whether `e` belongs to the logical cut: the space edges touching the left boundary.
    pub fn on_logical_cut(&self, e: EdgeIndex) -> bool {
        let left = self.boundary_node(BoundarySide::Left);
        let (a, b) = self.edges[e].endpoints;
        a == left || b == left
    }

    /// JSON listing of nodes and edges for the `graph dump` command.
    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(index, id)| serde_json::json!({ "index": index, "id": id }))
            .collect();
        serde_json::json!({
            "code": self.code,
            "distance": self.distance,
            "rounds": self.rounds,
            "nodes": nodes,
            "edges": self.edges,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(g: &DecodingGraph, kind: EdgeKind) -> usize {
        g.edges().iter().filter(|e| e.kind == kind).count()
    }

    fn boundary_edges(g: &DecodingGraph) -> usize {
        g.edges()
            .iter()
            .filter(|e| g.is_boundary(e.endpoints.0) || g.is_boundary(e.endpoints.1))
            .count()
    }

    #[test]
    fn repetition_counts() {
        for &(l, t, det, time, space) in &[(3, 2, 6, 4, 6), (3, 1, 4, 2, 3), (9, 9, 80, 72, 81)] {
            let g = build_repetition_graph(l, t).unwrap();
            assert_eq!(g.detection_count(), det);
            assert_eq!(g.node_count(), det + 2);
            assert_eq!(count(&g, EdgeKind::Time), time);
            assert_eq!(count(&g, EdgeKind::Space), space);
            assert_eq!(boundary_edges(&g), 2 * t);
        }
    }

    #[test]
    fn surface_counts() {
        let g = build_surface_graph(3, 1).unwrap();
        assert_eq!(g.sites(), 6);
        assert_eq!(g.detection_count(), 12);
        assert_eq!(count(&g, EdgeKind::Space), 13);
        assert_eq!(count(&g, EdgeKind::Time), 6);

        let g = build_surface_graph(5, 5).unwrap();
        assert_eq!(g.sites(), 20);
        assert_eq!(count(&g, EdgeKind::Space), 41 * 5);
        assert_eq!(count(&g, EdgeKind::Time), 20 * 5);
        assert_eq!(boundary_edges(&g), 2 * 5 * 5);
    }

    #[test]
    fn rejects_bad_sizes() {
        for l in [0, 1, 2, 4, 10] {
            assert!(matches!(build_repetition_graph(l, 3), Err(Error::Config(_))));
            assert!(matches!(build_surface_graph(l, 3), Err(Error::Config(_))));
        }
        assert!(build_repetition_graph(3, 0).is_err());
    }

    #[test]
    fn degree_bounds_and_adjacency() {
        for g in [build_repetition_graph(7, 5).unwrap(), build_surface_graph(7, 5).unwrap()] {
            let max = if g.code() == CodeKind::Repetition { 4 } else { 6 };
            for n in 0..g.detection_count() {
                assert!(g.degree(n) <= max);
                for &(m, e) in g.incident(n) {
                    let (a, b) = g.edge(e).endpoints;
                    assert!((a, b) == (n, m) || (a, b) == (m, n));
                }
                let ids: Vec<_> = g.incident(n).iter().map(|x| x.1).collect();
                assert!(ids.windows(2).all(|w| w[0] < w[1]));
            }
            for (i, e) in g.edges().iter().enumerate() {
                assert_eq!(e.id, i);
            }
        }
    }

    #[test]
    fn closing_layer_has_only_time_edges() {
        let g = build_surface_graph(5, 3).unwrap();
        for s in 0..g.sites() {
            let n = g.detection_node(s, 3);
            assert_eq!(g.degree(n), 1);
            let e = g.edge(g.incident(n)[0].1);
            assert_eq!(e.kind, EdgeKind::Time);
        }
    }

    #[test]
    fn edge_lookup_helpers() {
        let g = build_surface_graph(5, 4).unwrap();
        for e in g.edges() {
            let looked_up = match e.kind {
                EdgeKind::Time => g.time_edge(e.location, e.layer),
                EdgeKind::Space => g.space_edge(e.location, e.layer),
            };
            assert_eq!(looked_up, e.id);
        }
    }

    #[test]
    fn deterministic_build() {
        assert_eq!(build_surface_graph(5, 5).unwrap(), build_surface_graph(5, 5).unwrap());
    }

    #[test]
    fn weights() {
        assert!((edge_weight(0.1).unwrap() - 9f64.ln()).abs() < 1e-12);
        assert!((edge_weight(0.1).unwrap() - 2.19722).abs() < 1e-5);
        assert!(edge_weight(0.4999).unwrap() < 0.001);
        assert!(edge_weight(0.05).unwrap() > edge_weight(0.15).unwrap());
        for p in [0.0, -0.1, 0.5, 0.7, f64::NAN] {
            assert!(matches!(edge_weight(p), Err(Error::Domain(_))));
        }
    }
}
