//! Defect extraction and logical classification of residual errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DecodingGraph, EdgeIndex, NodeIndex};

/// A set of flipped edges, kept sorted and duplicate-free.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorConfiguration {
    flipped: Vec<EdgeIndex>,
}

impl ErrorConfiguration {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a configuration from edges listed with multiplicity; an edge
    /// listed an even number of times cancels out.
    pub fn from_edges<I: IntoIterator<Item = EdgeIndex>>(edges: I) -> Self {
        let mut v: Vec<EdgeIndex> = edges.into_iter().collect();
        v.sort_unstable();
        let mut flipped = Vec::with_capacity(v.len());
        let mut i = 0;
        while i < v.len() {
            let mut j = i;
            while j < v.len() && v[j] == v[i] {
                j += 1;
            }
            if (j - i) % 2 == 1 {
                flipped.push(v[i]);
            }
            i = j;
        }
        ErrorConfiguration { flipped }
    }

    pub(crate) fn from_sorted_unique(flipped: Vec<EdgeIndex>) -> Self {
        debug_assert!(flipped.windows(2).all(|w| w[0] < w[1]));
        ErrorConfiguration { flipped }
    }

    pub fn edges(&self) -> &[EdgeIndex] {
        &self.flipped
    }

    pub fn len(&self) -> usize {
        self.flipped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flipped.is_empty()
    }

    pub fn contains(&self, e: EdgeIndex) -> bool {
        self.flipped.binary_search(&e).is_ok()
    }

    /// `self ⊕ other`.
    pub fn symmetric_difference(&self, other: &ErrorConfiguration) -> ErrorConfiguration {
        let (a, b) = (&self.flipped, &other.flipped);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        ErrorConfiguration { flipped: out }
    }
}

/// Detection nodes with odd parity, sorted by node index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syndrome {
    pub defects: Vec<NodeIndex>,
}

impl Syndrome {
    pub fn len(&self) -> usize {
        self.defects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }
}

pub fn extract_syndrome(graph: &DecodingGraph, errors: &ErrorConfiguration) -> Result<Syndrome> {
    let mut ends = Vec::with_capacity(2 * errors.len());
    for &e in errors.edges() {
        if e >= graph.edge_count() {
            return Err(Error::Integrity(format!(
                "edge {e} is not in the graph ({} edges)",
                graph.edge_count()
            )));
        }
        let (a, b) = graph.edge(e).endpoints;
        ends.push(a);
        ends.push(b);
    }
    ends.sort_unstable();
    let mut defects = Vec::new();
    let mut i = 0;
    while i < ends.len() {
        let mut j = i;
        while j < ends.len() && ends[j] == ends[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 && !graph.is_boundary(ends[i]) {
            defects.push(ends[i]);
        }
        i = j;
    }
    Ok(Syndrome { defects })
}

/// Parity of the number of flipped edges on the logical cut. Does not check
/// that `residual` is syndrome-free.
pub fn crosses_logical_cut(graph: &DecodingGraph, residual: &ErrorConfiguration) -> bool {
    residual
        .edges()
        .iter()
        .filter(|&&e| graph.on_logical_cut(e))
        .count()
        % 2
        == 1
}

/// Whether a syndrome-free residual implements the logical operator.
pub fn is_logical_failure(graph: &DecodingGraph, residual: &ErrorConfiguration) -> Result<bool> {
    let s = extract_syndrome(graph, residual)?;
    if !s.is_empty() {
        return Err(Error::Contract(format!(
            "residual leaves {} unmatched defects",
            s.len()
        )));
    }
    Ok(crosses_logical_cut(graph, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_repetition_graph, build_surface_graph};

    #[test]
    fn empty_errors_empty_syndrome() {
        let g = build_surface_graph(5, 5).unwrap();
        assert!(extract_syndrome(&g, &ErrorConfiguration::new()).unwrap().is_empty());
        assert!(!is_logical_failure(&g, &ErrorConfiguration::new()).unwrap());
    }

    #[test]
    fn single_interior_edge_flags_both_ends() {
        let g = build_repetition_graph(7, 3).unwrap();
        let e = g.space_edge(3, 1);
        let s = extract_syndrome(&g, &ErrorConfiguration::from_edges([e])).unwrap();
        let (a, b) = g.edge(e).endpoints;
        assert_eq!(s.defects, vec![a.min(b), a.max(b)]);
    }

    #[test]
    fn chain_from_left_boundary_leaves_one_defect() {
        let g = build_repetition_graph(9, 4).unwrap();
        for k in 0..8 {
            // qubits 0..=k connect the left boundary to site k in layer 2
            let chain = ErrorConfiguration::from_edges((0..=k).map(|q| g.space_edge(q, 2)));
            // brute-force parity count over all detection nodes
            let mut odd = Vec::new();
            for n in 0..g.detection_count() {
                let hits = g.incident(n).iter().filter(|(_, e)| chain.contains(*e)).count();
                if hits % 2 == 1 {
                    odd.push(n);
                }
            }
            let s = extract_syndrome(&g, &chain).unwrap();
            assert_eq!(s.defects, odd);
            assert_eq!(s.defects, vec![g.detection_node(k, 2)]);
        }
    }

    #[test]
    fn unknown_edge_is_integrity_error() {
        let g = build_repetition_graph(3, 1).unwrap();
        let bad = ErrorConfiguration::from_edges([g.edge_count()]);
        assert!(matches!(extract_syndrome(&g, &bad), Err(Error::Integrity(_))));
    }

    #[test]
    fn horizontal_logical_chain_fails() {
        let g = build_repetition_graph(5, 3).unwrap();
        let chain = ErrorConfiguration::from_edges((0..5).map(|q| g.space_edge(q, 1)));
        assert!(is_logical_failure(&g, &chain).unwrap());

        let g = build_surface_graph(5, 3).unwrap();
        let row = 2;
        let chain = ErrorConfiguration::from_edges((0..5).map(|j| g.space_edge(row * 5 + j, 0)));
        assert!(is_logical_failure(&g, &chain).unwrap());
    }

    #[test]
    fn plaquette_loops_are_trivial() {
        let l = 5;
        let g = build_surface_graph(l, 2).unwrap();
        let cols = l - 1;
        // every elementary space-like loop around a Z plaquette, and every
        // space-time loop formed by two horizontal edges and two time edges
        for t in 0..2 {
            for r in 0..l - 1 {
                for j in 0..l {
                    let top = r * l + j;
                    let bottom = (r + 1) * l + j;
                    let mut edges = vec![g.space_edge(top, t), g.space_edge(bottom, t)];
                    if j > 0 {
                        edges.push(g.space_edge(l * l + r * cols + j - 1, t));
                    }
                    if j < l - 1 {
                        edges.push(g.space_edge(l * l + r * cols + j, t));
                    }
                    // loops on the boundary close through it: still trivial
                    let c = ErrorConfiguration::from_edges(edges);
                    assert!(!is_logical_failure(&g, &c).unwrap());
                }
            }
            if t + 1 < 2 {
                for q in 0..l * l {
                    let e = g.edge(g.space_edge(q, t));
                    let mut edges = vec![g.space_edge(q, t), g.space_edge(q, t + 1)];
                    for n in [e.endpoints.0, e.endpoints.1] {
                        if let Some((s, _)) = g.site_time(n) {
                            edges.push(g.time_edge(s, t));
                        }
                    }
                    let c = ErrorConfiguration::from_edges(edges);
                    assert!(!is_logical_failure(&g, &c).unwrap());
                }
            }
        }
    }

    #[test]
    fn nonempty_residual_is_contract_violation() {
        let g = build_repetition_graph(5, 3).unwrap();
        let c = ErrorConfiguration::from_edges([g.space_edge(2, 0)]);
        assert!(matches!(is_logical_failure(&g, &c), Err(Error::Contract(_))));
    }

    #[test]
    fn symmetric_difference_cancels() {
        let a = ErrorConfiguration::from_edges([1, 3, 5, 7]);
        let b = ErrorConfiguration::from_edges([3, 4, 7, 9]);
        assert_eq!(a.symmetric_difference(&b).edges(), &[1, 4, 5, 9]);
        assert_eq!(ErrorConfiguration::from_edges([2, 2, 2, 4, 4]).edges(), &[2]);
        assert!(a.symmetric_difference(&a).is_empty());
    }
}
