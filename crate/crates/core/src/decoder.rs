//! Matching decoder: syndrome -> defect graph -> minimum-weight perfect
//! matching -> correction.
//!
//! Boundary nodes are absorbing during path searches: they can be reached
//! but never passed through. A path through a boundary is never needed since
//! matching both of its ends to the boundary costs the same.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{edge_weight, BoundarySide, CodeKind, DecodingGraph, EdgeIndex, EdgeKind, NodeIndex};
use crate::matching::{max_weight_matching, min_weight_perfect_matching, Matching, MatchingInstance};
use crate::noise::{assign_rates, sample_errors, NoiseAssignment, RateDistribution, TemporalMode};
use crate::syndrome::{crosses_logical_cut, extract_syndrome, ErrorConfiguration, Syndrome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderMode {
    /// Every edge weighted from the mean rates.
    #[serde(rename = "mean")]
    MeanRate,
    /// Every edge weighted from its realised rate.
    #[serde(rename = "local")]
    LocalRate,
}

impl DecoderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderMode::MeanRate => "mean",
            DecoderMode::LocalRate => "local",
        }
    }
}

/// How defect-to-defect distances are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// Exact shortest paths over the whole space-time graph.
    #[default]
    Dijkstra,
    /// Manhattan distance with the cheapest time column inside the pair's
    /// horizontal span; repetition code with static noise only.
    Static,
}

impl DistanceMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMetric::Dijkstra => "dijkstra",
            DistanceMetric::Static => "static",
        }
    }
}

/// Weight of an edge with flip probability `p`; impassable when `p == 0`.
fn decoding_weight(p: f64) -> Result<f64> {
    if p == 0.0 {
        Ok(f64::INFINITY)
    } else {
        edge_weight(p)
    }
}

/// Per-edge weights under `mode`. Mean-rate weights use the mean of the
/// measurement law on time edges and `p_space` on space edges.
pub fn decoder_weights(
    graph: &DecodingGraph,
    assignment: &NoiseAssignment,
    meas_dist: &RateDistribution,
    p_space: f64,
    mode: DecoderMode,
) -> Result<Vec<f64>> {
    match mode {
        DecoderMode::MeanRate => mean_weights(graph, meas_dist, p_space),
        DecoderMode::LocalRate => {
            if assignment.len() != graph.edge_count() {
                return Err(Error::Integrity(format!(
                    "assignment covers {} edges, graph has {}",
                    assignment.len(),
                    graph.edge_count()
                )));
            }
            assignment.edge_rates.iter().map(|&p| decoding_weight(p)).collect()
        }
    }
}

pub fn mean_weights(graph: &DecodingGraph, meas_dist: &RateDistribution, p_space: f64) -> Result<Vec<f64>> {
    let w_time = decoding_weight(meas_dist.mean())?;
    let w_space = decoding_weight(p_space)?;
    Ok(graph
        .edges()
        .iter()
        .map(|e| match e.kind {
            EdgeKind::Time => w_time,
            EdgeKind::Space => w_space,
        })
        .collect())
}

const NO_EDGE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, node)
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable Dijkstra buffers.
#[derive(Debug, Default)]
pub struct PathSearch {
    dist: Vec<f64>,
    pred: Vec<u32>,
    settled: Vec<bool>,
    heap: BinaryHeap<HeapItem>,
}

impl PathSearch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs Dijkstra from `source` until `stop` returns true for a newly
    /// settled node (or the graph is exhausted). Among equal-distance
    /// predecessors the lowest edge id wins.
    fn run(
        &mut self,
        graph: &DecodingGraph,
        weights: &[f64],
        source: NodeIndex,
        mut stop: impl FnMut(NodeIndex, f64) -> bool,
    ) {
        let n = graph.node_count();
        self.dist.clear();
        self.dist.resize(n, f64::INFINITY);
        self.pred.clear();
        self.pred.resize(n, NO_EDGE);
        self.settled.clear();
        self.settled.resize(n, false);
        self.heap.clear();
        self.dist[source] = 0.0;
        self.heap.push(HeapItem { dist: 0.0, node: source });
        while let Some(HeapItem { dist, node }) = self.heap.pop() {
            if self.settled[node] {
                continue;
            }
            self.settled[node] = true;
            if stop(node, dist) {
                return;
            }
            if node != source && graph.is_boundary(node) {
                continue;
            }
            for &(next, e) in graph.incident(node) {
                if self.settled[next] {
                    continue;
                }
                let w = weights[e];
                if w == f64::INFINITY {
                    continue;
                }
                let nd = dist + w;
                let e = e as u32;
                if nd < self.dist[next] {
                    self.dist[next] = nd;
                    self.pred[next] = e;
                    self.heap.push(HeapItem { dist: nd, node: next });
                } else if nd == self.dist[next] && e < self.pred[next] {
                    self.pred[next] = e;
                }
            }
        }
    }
}

/// Single-source shortest paths; `pred[v]` is the last edge of one optimal path.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortestPaths {
    pub source: NodeIndex,
    pub dist: Vec<f64>,
    pub pred: Vec<Option<EdgeIndex>>,
}

impl ShortestPaths {
    /// Edges of the recorded path from the source to `target`, source side first.
    pub fn path_to(&self, graph: &DecodingGraph, target: NodeIndex) -> Option<Vec<EdgeIndex>> {
        if self.dist[target] == f64::INFINITY {
            return None;
        }
        let mut out = Vec::new();
        let mut at = target;
        while at != self.source {
            let e = self.pred[at]?;
            out.push(e);
            let (a, b) = graph.edge(e).endpoints;
            at = if a == at { b } else { a };
        }
        out.reverse();
        Some(out)
    }
}

fn check_weights(graph: &DecodingGraph, weights: &[f64]) -> Result<()> {
    if weights.len() != graph.edge_count() {
        return Err(Error::Integrity(format!(
            "{} weights for {} edges",
            weights.len(),
            graph.edge_count()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::Domain(format!("edge weights must be >= 0, got {w}")));
    }
    Ok(())
}

/// Exact distances from `source` to every node (`f64::INFINITY` when unreachable).
pub fn shortest_paths_from(graph: &DecodingGraph, weights: &[f64], source: NodeIndex) -> Result<ShortestPaths> {
    check_weights(graph, weights)?;
    if source >= graph.node_count() {
        return Err(Error::Integrity(format!("node {source} is not in the graph")));
    }
    let mut search = PathSearch::new();
    search.run(graph, weights, source, |_, _| false);
    Ok(ShortestPaths {
        source,
        dist: search.dist,
        pred: search
            .pred
            .iter()
            .map(|&e| (e != NO_EDGE).then_some(e as EdgeIndex))
            .collect(),
    })
}

/// Restricted distance on a static repetition-code instance.
///
/// For detection nodes `(s1, t1)` and `(s2, t2)` with `s1 != s2` the value is
/// `|s1 - s2| w_space + |t1 - t2| min_k w_time(k)` over sites `k` between
/// the two. The closing layer has no space edges, so an endpoint there is
/// first moved down one layer along its own time edge.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticMetric {
    sites: usize,
    rounds: usize,
    w_space: f64,
    w_time: Vec<f64>,
}

impl StaticMetric {
    pub fn new(graph: &DecodingGraph, w_space: f64, w_time: Vec<f64>) -> Result<Self> {
        if graph.code() != CodeKind::Repetition {
            return Err(Error::Contract("the static metric applies to the repetition code only".into()));
        }
        if w_time.len() != graph.sites() {
            return Err(Error::Integrity(format!(
                "{} time weights for {} sites",
                w_time.len(),
                graph.sites()
            )));
        }
        Ok(StaticMetric {
            sites: graph.sites(),
            rounds: graph.rounds(),
            w_space,
            w_time,
        })
    }

    /// Metric with the locally realised rates of a static assignment.
    pub fn from_assignment(graph: &DecodingGraph, assignment: &NoiseAssignment) -> Result<Self> {
        let sites = assignment
            .site_rates
            .as_ref()
            .filter(|_| assignment.temporal == TemporalMode::Static)
            .ok_or_else(|| Error::Contract("the static metric needs a static noise assignment".into()))?;
        if assignment.len() != graph.edge_count() {
            return Err(Error::Integrity("assignment does not match the graph".into()));
        }
        let w_space = decoding_weight(assignment.rate(graph.space_edge(0, 0)))?;
        let w_time = sites.iter().map(|&p| decoding_weight(p)).collect::<Result<_>>()?;
        Self::new(graph, w_space, w_time)
    }

    fn coords(&self, graph: &DecodingGraph, n: NodeIndex) -> Result<(usize, usize)> {
        graph
            .site_time(n)
            .ok_or_else(|| Error::Contract(format!("node {n} is a boundary node")))
    }

    /// Moves an endpoint off the closing layer; returns the cost paid.
    fn lift(&self, site: usize, time: usize) -> (usize, f64) {
        if time == self.rounds {
            (time - 1, self.w_time[site])
        } else {
            (time, 0.0)
        }
    }

    /// Lowest-indexed cheapest time column among sites `lo..=hi`.
    fn cheapest_column(&self, lo: usize, hi: usize) -> usize {
        let mut best = lo;
        for k in lo..=hi {
            if self.w_time[k] < self.w_time[best] {
                best = k;
            }
        }
        best
    }

    pub fn distance(&self, graph: &DecodingGraph, u: NodeIndex, v: NodeIndex) -> Result<f64> {
        let (s1, t1) = self.coords(graph, u)?;
        let (s2, t2) = self.coords(graph, v)?;
        if s1 == s2 {
            return Ok(t1.abs_diff(t2) as f64 * self.w_time[s1]);
        }
        let (t1, c1) = self.lift(s1, t1);
        let (t2, c2) = self.lift(s2, t2);
        let k = self.cheapest_column(s1.min(s2), s1.max(s2));
        let dt = t1.abs_diff(t2);
        let vertical = if dt == 0 { 0.0 } else { dt as f64 * self.w_time[k] };
        Ok(c1 + c2 + s1.abs_diff(s2) as f64 * self.w_space + vertical)
    }

    /// Distance to the nearer boundary (left on ties) along the node's layer.
    pub fn boundary_distance(&self, graph: &DecodingGraph, u: NodeIndex) -> Result<(f64, BoundarySide)> {
        let (s, t) = self.coords(graph, u)?;
        let (_, c) = self.lift(s, t);
        let left = (s + 1) as f64 * self.w_space;
        let right = (self.sites - s) as f64 * self.w_space;
        Ok(if left <= right {
            (c + left, BoundarySide::Left)
        } else {
            (c + right, BoundarySide::Right)
        })
    }

    fn horizontal(graph: &DecodingGraph, from: usize, to: usize, layer: usize, out: &mut Vec<EdgeIndex>) {
        // qubit q joins sites q - 1 and q
        let (lo, hi) = (from.min(to), from.max(to));
        out.extend((lo + 1..=hi).map(|q| graph.space_edge(q, layer)));
    }

    fn vertical(graph: &DecodingGraph, site: usize, t1: usize, t2: usize, out: &mut Vec<EdgeIndex>) {
        out.extend((t1.min(t2)..t1.max(t2)).map(|t| graph.time_edge(site, t)));
    }

    /// Edges of the path realising [`StaticMetric::distance`].
    pub fn path(&self, graph: &DecodingGraph, u: NodeIndex, v: NodeIndex) -> Result<Vec<EdgeIndex>> {
        let (s1, t1) = self.coords(graph, u)?;
        let (s2, t2) = self.coords(graph, v)?;
        let mut out = Vec::new();
        if s1 == s2 {
            Self::vertical(graph, s1, t1, t2, &mut out);
            return Ok(out);
        }
        let (l1, _) = self.lift(s1, t1);
        let (l2, _) = self.lift(s2, t2);
        Self::vertical(graph, s1, t1, l1, &mut out);
        let k = self.cheapest_column(s1.min(s2), s1.max(s2));
        Self::horizontal(graph, s1, k, l1, &mut out);
        Self::vertical(graph, k, l1, l2, &mut out);
        Self::horizontal(graph, k, s2, l2, &mut out);
        Self::vertical(graph, s2, l2, t2, &mut out);
        Ok(out)
    }

    pub fn boundary_path(&self, graph: &DecodingGraph, u: NodeIndex) -> Result<Vec<EdgeIndex>> {
        let (s, t) = self.coords(graph, u)?;
        let (_, side) = self.boundary_distance(graph, u)?;
        let (l, _) = self.lift(s, t);
        let mut out = Vec::new();
        Self::vertical(graph, s, t, l, &mut out);
        match side {
            BoundarySide::Left => out.extend((0..=s).map(|q| graph.space_edge(q, l))),
            BoundarySide::Right => out.extend((s + 1..=self.sites).map(|q| graph.space_edge(q, l))),
        }
        Ok(out)
    }
}

/// Restricted static distance between two detection nodes of a repetition
/// code; the space weight is taken from the assignment's space-edge rate.
pub fn static_repetition_distance(
    graph: &DecodingGraph,
    assignment: &NoiseAssignment,
    u: NodeIndex,
    v: NodeIndex,
) -> Result<f64> {
    StaticMetric::from_assignment(graph, assignment)?.distance(graph, u, v)
}

#[derive(Clone, Debug, PartialEq)]
enum PathStore {
    /// One predecessor array (graph node count long) per defect.
    Trees { stride: usize, preds: Vec<u32> },
    Static(StaticMetric),
}

/// Matching instance derived from a syndrome. Nodes `0..n` are the defects,
/// node `n + i` is the boundary partner of defect `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectGraph {
    pub defects: Vec<NodeIndex>,
    /// Row-major `n x n`, infinite when unreachable.
    pair: Vec<f64>,
    boundary: Vec<f64>,
    boundary_node: Vec<Option<NodeIndex>>,
    paths: PathStore,
}

impl DefectGraph {
    pub fn real_count(&self) -> usize {
        self.defects.len()
    }

    pub fn node_count(&self) -> usize {
        2 * self.defects.len()
    }

    pub fn is_virtual(&self, x: usize) -> bool {
        x >= self.real_count()
    }

    pub fn pair_weight(&self, i: usize, j: usize) -> f64 {
        self.pair[i * self.real_count() + j]
    }

    pub fn boundary_weight(&self, i: usize) -> f64 {
        self.boundary[i]
    }

    /// Weight between two matching nodes; `None` for forbidden pairs.
    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        let n = self.real_count();
        let w = match (a < n, b < n) {
            (true, true) if a != b => self.pair_weight(a, b),
            (true, false) if b - n == a => self.boundary[a],
            (false, true) if a - n == b => self.boundary[b],
            (false, false) if a != b => 0.0,
            _ => return None,
        };
        w.is_finite().then_some(w)
    }

    /// The full `2n`-node instance with every allowed pair.
    pub fn to_instance(&self) -> Result<MatchingInstance> {
        let m = self.node_count();
        let mut edges = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                if let Some(w) = self.weight(a, b) {
                    edges.push((a, b, w));
                }
            }
        }
        MatchingInstance::new(m, edges)
    }

    fn tree_path(&self, graph: &DecodingGraph, stride: usize, preds: &[u32], i: usize, target: NodeIndex) -> Result<Vec<EdgeIndex>> {
        let source = self.defects[i];
        let tree = &preds[i * stride..(i + 1) * stride];
        let mut out = Vec::new();
        let mut at = target;
        while at != source {
            let e = tree[at];
            if e == NO_EDGE {
                return Err(Error::Integrity(format!("no recorded path from node {source} to node {target}")));
            }
            out.push(e as EdgeIndex);
            let (a, b) = graph.edge(e as EdgeIndex).endpoints;
            at = if a == at { b } else { a };
        }
        Ok(out)
    }

    /// Edges of the path joining matching nodes `a` and `b`.
    pub fn path(&self, graph: &DecodingGraph, a: usize, b: usize) -> Result<Vec<EdgeIndex>> {
        let n = self.real_count();
        let (a, b) = (a.min(b), a.max(b));
        if a >= n {
            return Ok(Vec::new());
        }
        if b >= 2 * n {
            return Err(Error::Integrity(format!("matching node {b} out of range")));
        }
        if b >= n && b - n != a {
            return Err(Error::Integrity(format!("defect {a} paired with the boundary partner of {}", b - n)));
        }
        match &self.paths {
            PathStore::Trees { stride, preds } => {
                let target = if b < n {
                    self.defects[b]
                } else {
                    self.boundary_node[a]
                        .ok_or_else(|| Error::Integrity(format!("defect {a} has no reachable boundary")))?
                };
                self.tree_path(graph, *stride, preds, a, target)
            }
            PathStore::Static(metric) => {
                if b < n {
                    metric.path(graph, self.defects[a], self.defects[b])
                } else {
                    metric.boundary_path(graph, self.defects[a])
                }
            }
        }
    }
}

/// Defect graph with shortest-path weights, reusing `search`'s buffers.
pub fn build_defect_graph_with(
    search: &mut PathSearch,
    syndrome: &Syndrome,
    graph: &DecodingGraph,
    weights: &[f64],
) -> Result<DefectGraph> {
    let n = syndrome.len();
    let stride = graph.node_count();
    let mut pair = vec![f64::INFINITY; n * n];
    let mut boundary = vec![f64::INFINITY; n];
    let mut boundary_node = vec![None; n];
    let mut preds = vec![NO_EDGE; n * stride];
    // position of each defect in the syndrome, for target lookup
    let mut slot = vec![usize::MAX; stride];
    for (i, &d) in syndrome.defects.iter().enumerate() {
        if d >= stride || graph.is_boundary(d) {
            return Err(Error::Integrity(format!("defect {d} is not a detection node")));
        }
        slot[d] = i;
    }
    for i in 0..n {
        pair[i * n + i] = 0.0;
        // distances to later defects come from this search, earlier ones are mirrored
        let mut remaining = n - i - 1;
        let mut found_boundary = false;
        search.run(graph, weights, syndrome.defects[i], |node, dist| {
            if graph.is_boundary(node) {
                if !found_boundary {
                    found_boundary = true;
                    boundary[i] = dist;
                    boundary_node[i] = Some(node);
                }
            } else {
                let j = slot[node];
                if j != usize::MAX && j > i {
                    pair[i * n + j] = dist;
                    pair[j * n + i] = dist;
                    remaining -= 1;
                }
            }
            found_boundary && remaining == 0
        });
        preds[i * stride..(i + 1) * stride].copy_from_slice(&search.pred);
    }
    Ok(DefectGraph {
        defects: syndrome.defects.clone(),
        pair,
        boundary,
        boundary_node,
        paths: PathStore::Trees { stride, preds },
    })
}

pub fn build_defect_graph(syndrome: &Syndrome, graph: &DecodingGraph, weights: &[f64]) -> Result<DefectGraph> {
    check_weights(graph, weights)?;
    build_defect_graph_with(&mut PathSearch::new(), syndrome, graph, weights)
}

/// Defect graph using [`StaticMetric`] distances.
pub fn build_static_defect_graph(syndrome: &Syndrome, graph: &DecodingGraph, metric: &StaticMetric) -> Result<DefectGraph> {
    let n = syndrome.len();
    let mut pair = vec![0.0; n * n];
    let mut boundary = Vec::with_capacity(n);
    let mut boundary_node = Vec::with_capacity(n);
    for (i, &u) in syndrome.defects.iter().enumerate() {
        for (j, &v) in syndrome.defects.iter().enumerate().skip(i + 1) {
            let d = metric.distance(graph, u, v)?;
            pair[i * n + j] = d;
            pair[j * n + i] = d;
        }
        let (d, side) = metric.boundary_distance(graph, u)?;
        boundary.push(d);
        boundary_node.push(Some(graph.boundary_node(side)));
    }
    Ok(DefectGraph {
        defects: syndrome.defects.clone(),
        pair,
        boundary,
        boundary_node,
        paths: PathStore::Static(metric.clone()),
    })
}

/// Minimum-weight perfect matching of a defect graph.
///
/// When every defect can reach a boundary the instance is solved through the
/// equivalent maximum-weight matching on the defects alone, with gain
/// `b_i + b_j - d_ij` for pairing `i` with `j` instead of sending both to the
/// boundary; unmatched defects then take their boundary partner and the
/// spare partners pair off at zero cost. Otherwise the full instance is solved.
pub fn decode(defect_graph: &DefectGraph) -> Result<Matching> {
    let n = defect_graph.real_count();
    if n == 0 {
        return Ok(Matching {
            pairs: Vec::new(),
            weight: 0.0,
        });
    }
    if defect_graph.boundary.iter().any(|b| !b.is_finite()) {
        return min_weight_perfect_matching(&defect_graph.to_instance()?);
    }
    let mut gains = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = defect_graph.pair_weight(i, j);
            if d.is_finite() {
                let gain = defect_graph.boundary[i] + defect_graph.boundary[j] - d;
                if gain > 0.0 {
                    gains.push((i, j, gain));
                }
            }
        }
    }
    let mate = max_weight_matching(n, &gains, false);
    let mut pairs = Vec::with_capacity(n);
    let mut spare = Vec::new();
    for (i, m) in mate.iter().enumerate() {
        match *m {
            Some(j) => {
                if i < j {
                    pairs.push((i, j));
                }
                spare.push(n + i);
            }
            None => pairs.push((i, n + i)),
        }
    }
    debug_assert!(spare.len() % 2 == 0);
    pairs.extend(spare.chunks(2).map(|c| (c[0], c[1])));
    Ok(Matching::from_pairs(pairs, |a, b| defect_graph.weight(a, b).unwrap_or(f64::INFINITY)))
}

/// XOR of the paths of every matched pair involving a defect.
pub fn correction_from_matching(
    matching: &Matching,
    defect_graph: &DefectGraph,
    graph: &DecodingGraph,
) -> Result<ErrorConfiguration> {
    let mut edges = Vec::new();
    for &(a, b) in &matching.pairs {
        edges.extend(defect_graph.path(graph, a, b)?);
    }
    Ok(ErrorConfiguration::from_edges(edges))
}

/// Decodes syndromes on one graph; owns scratch space, one per worker.
#[derive(Debug)]
pub struct Decoder<'g> {
    graph: &'g DecodingGraph,
    meas_dist: RateDistribution,
    p_space: f64,
    metric: DistanceMetric,
    check_residual: bool,
    mean_weights: Vec<f64>,
    local_weights: Vec<f64>,
    search: PathSearch,
}

impl<'g> Decoder<'g> {
    pub fn new(graph: &'g DecodingGraph, meas_dist: RateDistribution, p_space: f64, metric: DistanceMetric) -> Result<Self> {
        meas_dist.validate()?;
        if metric == DistanceMetric::Static && graph.code() != CodeKind::Repetition {
            return Err(Error::config("the static metric applies to the repetition code only"));
        }
        Ok(Decoder {
            graph,
            meas_dist,
            p_space,
            metric,
            check_residual: cfg!(debug_assertions),
            mean_weights: mean_weights(graph, &meas_dist, p_space)?,
            local_weights: Vec::new(),
            search: PathSearch::new(),
        })
    }

    /// Verify that every correction clears the syndrome.
    pub fn with_residual_check(mut self, on: bool) -> Self {
        self.check_residual = on;
        self
    }

    pub fn correction(&mut self, syndrome: &Syndrome, assignment: &NoiseAssignment, mode: DecoderMode) -> Result<ErrorConfiguration> {
        if syndrome.is_empty() {
            return Ok(ErrorConfiguration::new());
        }
        let dg = match self.metric {
            DistanceMetric::Dijkstra => {
                let weights = match mode {
                    DecoderMode::MeanRate => &self.mean_weights,
                    DecoderMode::LocalRate => {
                        self.local_weights.clear();
                        for &p in &assignment.edge_rates {
                            self.local_weights.push(decoding_weight(p)?);
                        }
                        &self.local_weights
                    }
                };
                build_defect_graph_with(&mut self.search, syndrome, self.graph, weights)?
            }
            DistanceMetric::Static => {
                let metric = match mode {
                    DecoderMode::LocalRate => StaticMetric::from_assignment(self.graph, assignment)?,
                    DecoderMode::MeanRate => StaticMetric::new(
                        self.graph,
                        decoding_weight(self.p_space)?,
                        vec![decoding_weight(self.meas_dist.mean())?; self.graph.sites()],
                    )?,
                };
                build_static_defect_graph(syndrome, self.graph, &metric)?
            }
        };
        let matching = decode(&dg)?;
        correction_from_matching(&matching, &dg, self.graph)
    }

    /// Decodes `syndrome` and reports whether `errors ⊕ correction` is a logical operator.
    pub fn logical_failure(
        &mut self,
        errors: &ErrorConfiguration,
        syndrome: &Syndrome,
        assignment: &NoiseAssignment,
        mode: DecoderMode,
    ) -> Result<bool> {
        let correction = self.correction(syndrome, assignment, mode)?;
        let residual = errors.symmetric_difference(&correction);
        if self.check_residual {
            let left = extract_syndrome(self.graph, &residual)?;
            if !left.is_empty() {
                return Err(Error::Integrity(format!("correction leaves {} defects", left.len())));
            }
        }
        Ok(crosses_logical_cut(self.graph, &residual))
    }
}

/// One sampled noise realization on a graph.
#[derive(Clone, Debug)]
pub struct TrialSample {
    pub assignment: NoiseAssignment,
    pub errors: ErrorConfiguration,
    pub syndrome: Syndrome,
}

pub fn sample_trial<R: Rng + ?Sized>(
    graph: &DecodingGraph,
    dist: &RateDistribution,
    p_space: f64,
    temporal: TemporalMode,
    rng: &mut R,
) -> Result<TrialSample> {
    let assignment = assign_rates(graph, dist, p_space, temporal, rng)?;
    let errors = sample_errors(&assignment, rng);
    let syndrome = extract_syndrome(graph, &errors)?;
    Ok(TrialSample {
        assignment,
        errors,
        syndrome,
    })
}

/// One full trial with exact shortest-path distances. Returns whether the
/// decoded residual is a logical error.
pub fn run_trial<R: Rng + ?Sized>(
    graph: &DecodingGraph,
    dist: &RateDistribution,
    p_space: f64,
    temporal: TemporalMode,
    decoder_mode: DecoderMode,
    rng: &mut R,
) -> Result<bool> {
    let sample = sample_trial(graph, dist, p_space, temporal, rng)?;
    let mut decoder = Decoder::new(graph, *dist, p_space, DistanceMetric::Dijkstra)?.with_residual_check(true);
    decoder.logical_failure(&sample.errors, &sample.syndrome, &sample.assignment, decoder_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_repetition_graph, build_surface_graph};
    use crate::matching::brute_force_matching;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ln9() -> f64 {
        9f64.ln()
    }

    #[test]
    fn unit_grid_distances() {
        let g = build_repetition_graph(3, 2).unwrap();
        let w = vec![1.0; g.edge_count()];
        let sp = shortest_paths_from(&g, &w, g.detection_node(0, 0)).unwrap();
        assert_eq!(sp.dist[g.detection_node(1, 0)], 1.0);
        assert_eq!(sp.dist[g.detection_node(0, 1)], 1.0);
        assert_eq!(sp.dist[g.boundary_node(BoundarySide::Left)], 1.0);
        assert_eq!(sp.dist[g.boundary_node(BoundarySide::Right)], 2.0);
    }

    #[test]
    fn uniform_rates_scale_hop_counts() {
        let g = build_surface_graph(5, 4).unwrap();
        let unit = vec![1.0; g.edge_count()];
        let w = vec![edge_weight(0.1).unwrap(); g.edge_count()];
        let src = g.detection_node(7, 2);
        let a = shortest_paths_from(&g, &unit, src).unwrap();
        let b = shortest_paths_from(&g, &w, src).unwrap();
        for v in 0..g.node_count() {
            assert!((b.dist[v] - a.dist[v] * ln9()).abs() < 1e-9);
        }
    }

    #[test]
    fn boundaries_are_not_transit_nodes() {
        let g = build_repetition_graph(5, 6).unwrap();
        let w = vec![1.0; g.edge_count()];
        // through the left boundary this would cost 2, in the bulk it costs 6
        let sp = shortest_paths_from(&g, &w, g.detection_node(0, 0)).unwrap();
        assert_eq!(sp.dist[g.detection_node(0, 6)], 6.0);
    }

    #[test]
    fn disconnected_target_is_infinite() {
        let g = build_repetition_graph(3, 2).unwrap();
        let mut w = vec![1.0; g.edge_count()];
        for e in g.edges() {
            if e.kind == EdgeKind::Time {
                w[e.id] = f64::INFINITY;
            }
        }
        let sp = shortest_paths_from(&g, &w, g.detection_node(0, 0)).unwrap();
        assert_eq!(sp.dist[g.detection_node(0, 1)], f64::INFINITY);
        assert!(sp.path_to(&g, g.detection_node(0, 1)).is_none());
    }

    #[test]
    fn rejects_negative_weights() {
        let g = build_repetition_graph(3, 1).unwrap();
        let mut w = vec![1.0; g.edge_count()];
        w[0] = -1.0;
        assert!(shortest_paths_from(&g, &w, 0).is_err());
    }

    #[test]
    fn static_distance_examples() {
        let g = build_repetition_graph(7, 6).unwrap();
        let metric = StaticMetric::new(
            &g,
            ln9(),
            [0.1, 0.05, 0.15, 0.05, 0.1, 0.1].iter().map(|&p| edge_weight(p).unwrap()).collect(),
        )
        .unwrap();
        let u = g.detection_node(0, 1);
        assert_eq!(metric.distance(&g, u, u).unwrap(), 0.0);
        let d = metric.distance(&g, u, g.detection_node(0, 4)).unwrap();
        assert!((d - 3.0 * ln9()).abs() < 1e-12);
        let d = metric.distance(&g, g.detection_node(1, 1), g.detection_node(3, 3)).unwrap();
        let want = 2.0 * ln9() + 2.0 * (0.85f64 / 0.15).ln();
        assert!((d - want).abs() < 1e-12);
    }

    #[test]
    fn static_metric_rejects_dynamic_assignments() {
        let g = build_repetition_graph(5, 5).unwrap();
        let d = RateDistribution::bimodal(0.1, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = assign_rates(&g, &d, 0.1, TemporalMode::Dynamic, &mut rng).unwrap();
        let r = static_repetition_distance(&g, &a, 0, 1);
        assert!(matches!(r, Err(Error::Contract(_))));
        let s = build_surface_graph(5, 5).unwrap();
        assert!(StaticMetric::new(&s, 1.0, vec![1.0; s.sites()]).is_err());
    }

    #[test]
    fn static_paths_realise_distances() {
        let g = build_repetition_graph(9, 7).unwrap();
        let d = RateDistribution::bimodal(0.07, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = assign_rates(&g, &d, 0.07, TemporalMode::Static, &mut rng).unwrap();
        let metric = StaticMetric::from_assignment(&g, &a).unwrap();
        let weights = decoder_weights(&g, &a, &d, 0.07, DecoderMode::LocalRate).unwrap();
        for u in 0..g.detection_count() {
            for v in 0..g.detection_count() {
                let path = metric.path(&g, u, v).unwrap();
                let cost: f64 = path.iter().map(|&e| weights[e]).sum();
                assert!((cost - metric.distance(&g, u, v).unwrap()).abs() < 1e-9);
                let s = extract_syndrome(&g, &ErrorConfiguration::from_edges(path.clone())).unwrap();
                if u != v {
                    assert_eq!(s.defects, vec![u.min(v), u.max(v)]);
                }
            }
            let path = metric.boundary_path(&g, u).unwrap();
            let cost: f64 = path.iter().map(|&e| weights[e]).sum();
            assert!((cost - metric.boundary_distance(&g, u).unwrap().0).abs() < 1e-9);
            let s = extract_syndrome(&g, &ErrorConfiguration::from_edges(path)).unwrap();
            assert_eq!(s.defects, vec![u]);
        }
    }

    #[test]
    fn defect_graph_small_cases() {
        let g = build_surface_graph(7, 7).unwrap();
        let w = vec![ln9(); g.edge_count()];
        let empty = build_defect_graph(&Syndrome::default(), &g, &w).unwrap();
        assert_eq!(empty.node_count(), 0);
        assert!(decode(&empty).unwrap().pairs.is_empty());

        let one = Syndrome {
            defects: vec![g.detection_node(10, 3)],
        };
        let dg = build_defect_graph(&one, &g, &w).unwrap();
        let m = decode(&dg).unwrap();
        assert_eq!(m.pairs, vec![(0, 1)]);

        // sites 15 and 16 share a horizontal qubit in row 2, centre of the lattice
        let two = Syndrome {
            defects: vec![g.detection_node(15, 3), g.detection_node(16, 3)],
        };
        let dg = build_defect_graph(&two, &g, &w).unwrap();
        assert!((dg.pair_weight(0, 1) - ln9()).abs() < 1e-12);
        assert!(dg.pair_weight(0, 1) < dg.boundary_weight(0));
        assert!(dg.pair_weight(0, 1) < dg.boundary_weight(1));
        assert_eq!(dg.weight(2, 3), Some(0.0));
        assert_eq!(dg.weight(0, 3), None);
    }

    #[test]
    fn decode_dominant_options() {
        let make = |pair: f64, bound: f64| DefectGraph {
            defects: vec![0, 1],
            pair: vec![0.0, pair, pair, 0.0],
            boundary: vec![bound, bound],
            boundary_node: vec![None, None],
            paths: PathStore::Trees { stride: 0, preds: vec![] },
        };
        let m = decode(&make(1.0, 10.0)).unwrap();
        assert_eq!(m.pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(m.weight, 1.0);
        let m = decode(&make(10.0, 1.0)).unwrap();
        assert_eq!(m.pairs, vec![(0, 2), (1, 3)]);
        assert_eq!(m.weight, 2.0);
    }

    #[test]
    fn decode_matches_brute_force_on_random_defects() {
        let g = build_surface_graph(7, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let w: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen_range(0.5..3.0)).collect();
            let k = rng.gen_range(1..=6);
            let mut defects: Vec<_> = rand::seq::index::sample(&mut rng, g.detection_count(), k).into_vec();
            defects.sort_unstable();
            let dg = build_defect_graph(&Syndrome { defects }, &g, &w).unwrap();
            let m = decode(&dg).unwrap();
            let oracle = brute_force_matching(&dg.to_instance().unwrap()).unwrap();
            assert!((m.weight - oracle.weight).abs() < 1e-9);
            assert_eq!(m.pairs.len(), k);
        }
    }

    #[test]
    fn correction_examples() {
        let g = build_repetition_graph(7, 4).unwrap();
        let w = vec![ln9(); g.edge_count()];
        let m = Matching {
            pairs: vec![],
            weight: 0.0,
        };
        let dg = build_defect_graph(&Syndrome::default(), &g, &w).unwrap();
        assert!(correction_from_matching(&m, &dg, &g).unwrap().is_empty());

        // site 0 is one hop from the left boundary
        let s = Syndrome {
            defects: vec![g.detection_node(0, 1)],
        };
        let dg = build_defect_graph(&s, &g, &w).unwrap();
        let c = correction_from_matching(&decode(&dg).unwrap(), &dg, &g).unwrap();
        assert_eq!(c.edges(), &[g.space_edge(0, 1)]);

        // sites 1 and 4 in one layer: unique 3-edge geodesic along that layer
        let s = Syndrome {
            defects: vec![g.detection_node(1, 2), g.detection_node(4, 2)],
        };
        let mut w2 = w.clone();
        for e in g.edges() {
            if e.kind == EdgeKind::Time {
                w2[e.id] = 10.0;
            }
        }
        let dg = build_defect_graph(&s, &g, &w2).unwrap();
        let m = decode(&dg).unwrap();
        assert_eq!(m.pairs, vec![(0, 1), (2, 3)]);
        let c = correction_from_matching(&m, &dg, &g).unwrap();
        assert_eq!(c.edges(), &[g.space_edge(2, 2), g.space_edge(3, 2), g.space_edge(4, 2)]);
    }

    #[test]
    fn corrections_clear_syndromes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for code in [CodeKind::Repetition, CodeKind::Surface] {
            let g = crate::lattice::build_graph(code, 5, 5).unwrap();
            let d = RateDistribution::bimodal(0.08, 0.5).unwrap();
            for temporal in [TemporalMode::Static, TemporalMode::Dynamic] {
                for mode in [DecoderMode::MeanRate, DecoderMode::LocalRate] {
                    for _ in 0..50 {
                        run_trial(&g, &d, 0.08, temporal, mode, &mut rng).unwrap();
                    }
                }
            }
        }
    }

    #[test]
    fn zero_noise_never_fails() {
        let g = build_surface_graph(5, 5).unwrap();
        let d = RateDistribution::constant(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mode in [DecoderMode::MeanRate, DecoderMode::LocalRate] {
            assert!(!run_trial(&g, &d, 0.0, TemporalMode::Dynamic, mode, &mut rng).unwrap());
        }
    }

    #[test]
    fn pure_measurement_noise_uses_the_full_instance() {
        // no data errors: boundaries are unreachable and defects pair in time
        let g = build_repetition_graph(5, 5).unwrap();
        let d = RateDistribution::constant(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            assert!(!run_trial(&g, &d, 0.0, TemporalMode::Dynamic, DecoderMode::LocalRate, &mut rng).unwrap());
        }
    }

    #[test]
    fn constant_rates_decode_identically_in_both_modes() {
        let g = build_surface_graph(5, 5).unwrap();
        let d = RateDistribution::constant(0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut dec = Decoder::new(&g, d, 0.05, DistanceMetric::Dijkstra).unwrap();
        for _ in 0..100 {
            let s = sample_trial(&g, &d, 0.05, TemporalMode::Dynamic, &mut rng).unwrap();
            let a = dec.correction(&s.syndrome, &s.assignment, DecoderMode::MeanRate).unwrap();
            let b = dec.correction(&s.syndrome, &s.assignment, DecoderMode::LocalRate).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn static_metric_decoder_clears_syndromes() {
        let g = build_repetition_graph(9, 9).unwrap();
        let d = RateDistribution::bimodal(0.07, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut dec = Decoder::new(&g, d, 0.07, DistanceMetric::Static).unwrap().with_residual_check(true);
        for _ in 0..200 {
            let s = sample_trial(&g, &d, 0.07, TemporalMode::Static, &mut rng).unwrap();
            for mode in [DecoderMode::MeanRate, DecoderMode::LocalRate] {
                dec.logical_failure(&s.errors, &s.syndrome, &s.assignment, mode).unwrap();
            }
        }
    }
}
