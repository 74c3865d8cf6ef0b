//! Exact minimum-weight perfect matching on general graphs.
//!
//! The solver is the O(n^3) primal-dual blossom method of Edmonds as laid out
//! by Galil, following the structure (and variable names) of Joris van
//! Rantwijk's reference implementation. It solves maximum-weight matching;
//! minimum-weight perfect matching is obtained by asking for maximum
//! cardinality on the complemented weights `C - w`.
//!
//! Forbidden pairs are simply absent from the instance. Edges are put in
//! lexicographic `(i, j)` order before solving, which fixes the tie-break.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node count above which [`brute_force_matching`] refuses to run.
pub const BRUTE_FORCE_MAX_NODES: usize = 12;

/// Weighted undirected graph on nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingInstance {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl MatchingInstance {
    /// Validates and canonicalises an instance: each edge is stored as
    /// `(min, max, w)` and the list is sorted lexicographically.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n % 2 == 1 {
            return Err(Error::config(format!("matching instance needs an even node count, got {n}")));
        }
        let mut canon = Vec::new();
        for (i, j, w) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::config(format!("invalid edge ({i}, {j}) for {n} nodes")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::config(format!("edge ({i}, {j}) has weight {w}")));
            }
            canon.push((i.min(j), i.max(j), w));
        }
        canon.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if canon.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::config("duplicate edge in matching instance"));
        }
        Ok(MatchingInstance { n, edges: canon })
    }

    /// Complete instance from a symmetric weight function.
    pub fn complete(n: usize, mut weight: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j, weight(i, j)));
            }
        }
        Self::new(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn weight_map(&self) -> HashMap<(usize, usize), f64> {
        self.edges.iter().map(|&(i, j, w)| ((i, j), w)).collect()
    }
}

/// A set of disjoint pairs, each stored as `(min, max)` and sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub weight: f64,
}

impl Matching {
    pub(crate) fn from_pairs(mut pairs: Vec<(usize, usize)>, weight_of: impl Fn(usize, usize) -> f64) -> Self {
        for p in pairs.iter_mut() {
            if p.0 > p.1 {
                *p = (p.1, p.0);
            }
        }
        pairs.sort_unstable();
        let weight = pairs.iter().map(|&(i, j)| weight_of(i, j)).sum();
        Matching { pairs, weight }
    }

    /// Partner of every node in `0..n`, `None` when unmatched.
    pub fn mates(&self, n: usize) -> Vec<Option<usize>> {
        let mut mate = vec![None; n];
        for &(i, j) in &self.pairs {
            mate[i] = Some(j);
            mate[j] = Some(i);
        }
        mate
    }
}

/// Minimum-weight perfect matching; fails with [`Error::Infeasible`] when none exists.
pub fn min_weight_perfect_matching(inst: &MatchingInstance) -> Result<Matching> {
    let n = inst.n;
    if n == 0 {
        return Ok(Matching {
            pairs: Vec::new(),
            weight: 0.0,
        });
    }
    let top = inst.edges.iter().map(|e| e.2).fold(0.0, f64::max) + 1.0;
    let flipped: Vec<_> = inst.edges.iter().map(|&(i, j, w)| (i, j, top - w)).collect();
    let mate = max_weight_matching(n, &flipped, true);
    let mut pairs = Vec::with_capacity(n / 2);
    for (i, m) in mate.iter().enumerate() {
        match m {
            Some(j) if i < *j => pairs.push((i, *j)),
            Some(_) => {}
            None => return Err(Error::Infeasible),
        }
    }
    let weights = inst.weight_map();
    Ok(Matching::from_pairs(pairs, |i, j| weights[&(i, j)]))
}

/// Exhaustive minimum over all perfect matchings, for `n <= 12`.
pub fn brute_force_matching(inst: &MatchingInstance) -> Result<Matching> {
    brute_force_matching_counted(inst).map(|(m, _)| m)
}

/// As [`brute_force_matching`], also returning how many perfect matchings were enumerated.
pub fn brute_force_matching_counted(inst: &MatchingInstance) -> Result<(Matching, u64)> {
    let n = inst.n;
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::Size {
            n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let mut w = vec![None; n * n];
    for &(i, j, x) in &inst.edges {
        w[i * n + j] = Some(x);
        w[j * n + i] = Some(x);
    }
    struct Search<'a> {
        n: usize,
        w: &'a [Option<f64>],
        used: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: Option<(f64, Vec<(usize, usize)>)>,
        count: u64,
    }
    impl Search<'_> {
        fn go(&mut self, acc: f64) {
            let Some(i) = (0..self.n).find(|&i| !self.used[i]) else {
                self.count += 1;
                if self.best.as_ref().map_or(true, |b| acc < b.0) {
                    self.best = Some((acc, self.current.clone()));
                }
                return;
            };
            self.used[i] = true;
            for j in i + 1..self.n {
                if self.used[j] {
                    continue;
                }
                if let Some(x) = self.w[i * self.n + j] {
                    self.used[j] = true;
                    self.current.push((i, j));
                    self.go(acc + x);
                    self.current.pop();
                    self.used[j] = false;
                }
            }
            self.used[i] = false;
        }
    }
    let mut s = Search {
        n,
        w: &w,
        used: vec![false; n],
        current: Vec::new(),
        best: None,
        count: 0,
    };
    s.go(0.0);
    let count = s.count;
    let (_, pairs) = s.best.ok_or(Error::Infeasible)?;
    Ok((Matching::from_pairs(pairs, |i, j| w[i * n + j].unwrap()), count))
}

const NONE: usize = usize::MAX;

/// Maximum-weight matching on nodes `0..n`. With `max_cardinality` the
/// result is a maximum-weight matching among those of maximum size.
/// Returns the partner of each node.
pub fn max_weight_matching(n: usize, edges: &[(usize, usize, f64)], max_cardinality: bool) -> Vec<Option<usize>> {
    if edges.is_empty() || n == 0 {
        return vec![None; n];
    }
    let mut s = Blossom::new(n, edges);
    s.solve(max_cardinality);
    s.mate
        .iter()
        .map(|&p| if p == NONE { None } else { Some(s.endpoint[p]) })
        .collect()
}

/// Solver state. Vertices are `0..n`, non-trivial blossoms `n..2n`; edge `k`
/// has endpoints `2k` and `2k + 1`, and `endpoint[p]` is the vertex at `p`.
struct Blossom<'a> {
    n: usize,
    edges: &'a [(usize, usize, f64)],
    endpoint: Vec<usize>,
    /// Remote endpoints of the edges incident to each vertex.
    neighbend: Vec<Vec<usize>>,
    /// Remote endpoint of each vertex's matched edge.
    mate: Vec<usize>,
    /// 0 free, 1 S, 2 T, 5 breadcrumb during scan, -1 unused blossom.
    label: Vec<i8>,
    labelend: Vec<usize>,
    inblossom: Vec<usize>,
    blossomparent: Vec<usize>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<usize>,
    blossomendps: Vec<Vec<usize>>,
    bestedge: Vec<usize>,
    blossombestedges: Vec<Option<Vec<usize>>>,
    unusedblossoms: Vec<usize>,
    dualvar: Vec<f64>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
}

fn cyc(j: i64, len: usize) -> usize {
    j.rem_euclid(len as i64) as usize
}

impl<'a> Blossom<'a> {
    fn new(n: usize, edges: &'a [(usize, usize, f64)]) -> Self {
        let m = edges.len();
        let maxweight = edges.iter().map(|e| e.2).fold(0.0, f64::max);
        let mut endpoint = Vec::with_capacity(2 * m);
        let mut neighbend = vec![Vec::new(); n];
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            debug_assert!(i != j && i < n && j < n);
            endpoint.push(i);
            endpoint.push(j);
            neighbend[i].push(2 * k + 1);
            neighbend[j].push(2 * k);
        }
        let mut dualvar = vec![maxweight; n];
        dualvar.extend(std::iter::repeat(0.0).take(n));
        Blossom {
            n,
            edges,
            endpoint,
            neighbend,
            mate: vec![NONE; n],
            label: vec![0; 2 * n],
            labelend: vec![NONE; 2 * n],
            inblossom: (0..n).collect(),
            blossomparent: vec![NONE; 2 * n],
            blossomchilds: vec![Vec::new(); 2 * n],
            blossombase: (0..n).chain(std::iter::repeat(NONE).take(n)).collect(),
            blossomendps: vec![Vec::new(); 2 * n],
            bestedge: vec![NONE; 2 * n],
            blossombestedges: vec![None; 2 * n],
            unusedblossoms: (n..2 * n).collect(),
            dualvar,
            allowedge: vec![false; m],
            queue: Vec::new(),
        }
    }

    fn slack(&self, k: usize) -> f64 {
        let (i, j, w) = self.edges[k];
        self.dualvar[i] + self.dualvar[j] - 2.0 * w
    }

    fn leaves(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            if x < self.n {
                out.push(x);
            } else {
                stack.extend(self.blossomchilds[x].iter().rev());
            }
        }
        out
    }

    fn assign_label(&mut self, mut w: usize, mut t: i8, mut p: usize) {
        loop {
            let b = self.inblossom[w];
            debug_assert!(self.label[w] == 0 && self.label[b] == 0);
            self.label[w] = t;
            self.label[b] = t;
            self.labelend[w] = p;
            self.labelend[b] = p;
            self.bestedge[w] = NONE;
            self.bestedge[b] = NONE;
            if t == 1 {
                let leaves = self.leaves(b);
                self.queue.extend(leaves);
                return;
            }
            // T-blossom: its mate becomes an S-vertex
            let base = self.blossombase[b];
            let mb = self.mate[base];
            debug_assert!(mb != NONE);
            w = self.endpoint[mb];
            t = 1;
            p = mb ^ 1;
        }
    }

    /// Traces back from `v` and `w` towards the roots of their trees. Returns
    /// the base of a new blossom, or `NONE` if the paths reach distinct roots
    /// (an augmenting path).
    fn scan_blossom(&mut self, mut v: usize, mut w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = NONE;
        while v != NONE || w != NONE {
            let mut b = self.inblossom[v];
            if self.label[b] == 5 {
                base = self.blossombase[b];
                break;
            }
            debug_assert_eq!(self.label[b], 1);
            path.push(b);
            self.label[b] = 5;
            if self.labelend[b] == NONE {
                v = NONE;
            } else {
                v = self.endpoint[self.labelend[b]];
                b = self.inblossom[v];
                debug_assert_eq!(self.label[b], 2);
                v = self.endpoint[self.labelend[b]];
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = 1;
        }
        base
    }

    fn add_blossom(&mut self, base: usize, k: usize) {
        let (mut v, mut w, _) = self.edges[k];
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];
        let b = self.unusedblossoms.pop().expect("blossom pool exhausted");
        self.blossombase[b] = base;
        self.blossomparent[b] = NONE;
        self.blossomparent[bb] = b;
        let mut path = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossomparent[bv] = b;
            path.push(bv);
            endps.push(self.labelend[bv]);
            v = self.endpoint[self.labelend[bv]];
            bv = self.inblossom[v];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw] = b;
            path.push(bw);
            endps.push(self.labelend[bw] ^ 1);
            w = self.endpoint[self.labelend[bw]];
            bw = self.inblossom[w];
        }
        debug_assert_eq!(self.label[bb], 1);
        self.label[b] = 1;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = 0.0;
        self.blossomchilds[b] = path.clone();
        self.blossomendps[b] = endps;
        for v in self.leaves(b) {
            if self.label[self.inblossom[v]] == 2 {
                // former T-vertices become S-vertices
                self.queue.push(v);
            }
            self.inblossom[v] = b;
        }
        // least-slack edges from the new blossom to each neighbouring S-blossom
        let mut bestedgeto = vec![NONE; 2 * self.n];
        for &bv in &path {
            let lists: Vec<Vec<usize>> = match self.blossombestedges[bv].take() {
                Some(list) => vec![list],
                None => self
                    .leaves(bv)
                    .into_iter()
                    .map(|v| self.neighbend[v].iter().map(|p| p / 2).collect())
                    .collect(),
            };
            for list in lists {
                for k in list {
                    let (mut i, mut j, _) = self.edges[k];
                    if self.inblossom[j] == b {
                        std::mem::swap(&mut i, &mut j);
                    }
                    let _ = i;
                    let bj = self.inblossom[j];
                    if bj != b
                        && self.label[bj] == 1
                        && (bestedgeto[bj] == NONE || self.slack(k) < self.slack(bestedgeto[bj]))
                    {
                        bestedgeto[bj] = k;
                    }
                }
            }
            self.bestedge[bv] = NONE;
        }
        let best: Vec<usize> = bestedgeto.into_iter().filter(|&k| k != NONE).collect();
        let mut be = NONE;
        for &k in &best {
            if be == NONE || self.slack(k) < self.slack(be) {
                be = k;
            }
        }
        self.blossombestedges[b] = Some(best);
        self.bestedge[b] = be;
    }

    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        let childs = self.blossomchilds[b].clone();
        for &s in &childs {
            self.blossomparent[s] = NONE;
            if s < self.n {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == 0.0 {
                self.expand_blossom(s, endstage);
            } else {
                for v in self.leaves(s) {
                    self.inblossom[v] = s;
                }
            }
        }
        if !endstage && self.label[b] == 2 {
            // relabel the sub-blossoms on the even path from the entry child to the base
            let len = childs.len();
            let entrychild = self.inblossom[self.endpoint[self.labelend[b] ^ 1]];
            let mut j = childs.iter().position(|&c| c == entrychild).unwrap() as i64;
            let (jstep, endptrick): (i64, i64) = if j & 1 == 1 {
                j -= len as i64;
                (1, 0)
            } else {
                (-1, 1)
            };
            let endps = self.blossomendps[b].clone();
            let mut p = self.labelend[b];
            while j != 0 {
                let q = endps[cyc(j - endptrick, len)] ^ (endptrick as usize);
                self.label[self.endpoint[p ^ 1]] = 0;
                self.label[self.endpoint[q ^ 1]] = 0;
                self.assign_label(self.endpoint[p ^ 1], 2, p);
                self.allowedge[endps[cyc(j - endptrick, len)] / 2] = true;
                j += jstep;
                p = endps[cyc(j - endptrick, len)] ^ (endptrick as usize);
                self.allowedge[p / 2] = true;
                j += jstep;
            }
            let bv = childs[cyc(j, len)];
            let ep = self.endpoint[p ^ 1];
            self.label[ep] = 2;
            self.label[bv] = 2;
            self.labelend[ep] = p;
            self.labelend[bv] = p;
            self.bestedge[bv] = NONE;
            j += jstep;
            while childs[cyc(j, len)] != entrychild {
                let bv = childs[cyc(j, len)];
                if self.label[bv] == 1 {
                    j += jstep;
                    continue;
                }
                let reached = self.leaves(bv).into_iter().find(|&v| self.label[v] != 0);
                if let Some(v) = reached {
                    debug_assert_eq!(self.label[v], 2);
                    debug_assert_eq!(self.inblossom[v], bv);
                    self.label[v] = 0;
                    let m = self.mate[self.blossombase[bv]];
                    self.label[self.endpoint[m]] = 0;
                    self.assign_label(v, 2, self.labelend[v]);
                }
                j += jstep;
            }
        }
        self.label[b] = -1;
        self.labelend[b] = NONE;
        self.blossomchilds[b].clear();
        self.blossomendps[b].clear();
        self.blossombase[b] = NONE;
        self.blossombestedges[b] = None;
        self.bestedge[b] = NONE;
        self.unusedblossoms.push(b);
    }

    /// Swaps matched and unmatched edges along the even path from vertex `v`
    /// to the base of blossom `b`, making `v` the new base.
    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b {
            t = self.blossomparent[t];
        }
        if t >= self.n {
            self.augment_blossom(t, v);
        }
        let len = self.blossomchilds[b].len();
        let i = self.blossomchilds[b].iter().position(|&c| c == t).unwrap();
        let mut j = i as i64;
        let (jstep, endptrick): (i64, i64) = if i & 1 == 1 {
            j -= len as i64;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t = self.blossomchilds[b][cyc(j, len)];
            let p = self.blossomendps[b][cyc(j - endptrick, len)] ^ (endptrick as usize);
            if t >= self.n {
                self.augment_blossom(t, self.endpoint[p]);
            }
            j += jstep;
            let t = self.blossomchilds[b][cyc(j, len)];
            if t >= self.n {
                self.augment_blossom(t, self.endpoint[p ^ 1]);
            }
            self.mate[self.endpoint[p]] = p ^ 1;
            self.mate[self.endpoint[p ^ 1]] = p;
        }
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert_eq!(self.blossombase[b], v);
    }

    fn augment_matching(&mut self, k: usize) {
        let (v, w, _) = self.edges[k];
        for (mut s, mut p) in [(v, 2 * k + 1), (w, 2 * k)] {
            loop {
                let bs = self.inblossom[s];
                debug_assert_eq!(self.label[bs], 1);
                if bs >= self.n {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == NONE {
                    break;
                }
                let t = self.endpoint[self.labelend[bs]];
                let bt = self.inblossom[t];
                debug_assert_eq!(self.label[bt], 2);
                s = self.endpoint[self.labelend[bt]];
                let j = self.endpoint[self.labelend[bt] ^ 1];
                debug_assert_eq!(self.blossombase[bt], t);
                if bt >= self.n {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    fn solve(&mut self, max_cardinality: bool) {
        let n = self.n;
        for _stage in 0..n {
            self.label.iter_mut().for_each(|l| *l = 0);
            self.bestedge.iter_mut().for_each(|e| *e = NONE);
            for b in n..2 * n {
                self.blossombestedges[b] = None;
            }
            self.allowedge.iter_mut().for_each(|a| *a = false);
            self.queue.clear();
            for v in 0..n {
                if self.mate[v] == NONE && self.label[self.inblossom[v]] == 0 {
                    self.assign_label(v, 1, NONE);
                }
            }
            let mut augmented = false;
            loop {
                while let Some(v) = self.queue.pop() {
                    debug_assert_eq!(self.label[self.inblossom[v]], 1);
                    for idx in 0..self.neighbend[v].len() {
                        let p = self.neighbend[v][idx];
                        let k = p / 2;
                        let w = self.endpoint[p];
                        if self.inblossom[v] == self.inblossom[w] {
                            continue;
                        }
                        let mut kslack = 0.0;
                        if !self.allowedge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0.0 {
                                self.allowedge[k] = true;
                            }
                        }
                        if self.allowedge[k] {
                            if self.label[self.inblossom[w]] == 0 {
                                self.assign_label(w, 2, p ^ 1);
                            } else if self.label[self.inblossom[w]] == 1 {
                                let base = self.scan_blossom(v, w);
                                if base != NONE {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == 0 {
                                debug_assert_eq!(self.label[self.inblossom[w]], 2);
                                self.label[w] = 2;
                                self.labelend[w] = p ^ 1;
                            }
                        } else if self.label[self.inblossom[w]] == 1 {
                            let b = self.inblossom[v];
                            if self.bestedge[b] == NONE || kslack < self.slack(self.bestedge[b]) {
                                self.bestedge[b] = k;
                            }
                        } else if self.label[w] == 0
                            && (self.bestedge[w] == NONE || kslack < self.slack(self.bestedge[w]))
                        {
                            self.bestedge[w] = k;
                        }
                    }
                    if augmented {
                        break;
                    }
                }
                if augmented {
                    break;
                }

                // no augmenting path under the current duals: pick the dual step
                let mut deltatype = 0u8;
                let mut delta = 0.0;
                let mut deltaedge = NONE;
                let mut deltablossom = NONE;
                if !max_cardinality {
                    deltatype = 1;
                    delta = self.dualvar[..n].iter().cloned().fold(f64::INFINITY, f64::min);
                }
                for v in 0..n {
                    if self.label[self.inblossom[v]] == 0 && self.bestedge[v] != NONE {
                        let d = self.slack(self.bestedge[v]);
                        if deltatype == 0 || d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v];
                        }
                    }
                }
                for b in 0..2 * n {
                    if self.blossomparent[b] == NONE && self.label[b] == 1 && self.bestedge[b] != NONE {
                        let d = self.slack(self.bestedge[b]) / 2.0;
                        if deltatype == 0 || d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b];
                        }
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE
                        && self.blossomparent[b] == NONE
                        && self.label[b] == 2
                        && (deltatype == 0 || self.dualvar[b] < delta)
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }
                if deltatype == 0 {
                    // maximum cardinality reached: one last step to optimality
                    deltatype = 1;
                    delta = self.dualvar[..n].iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
                }

                for v in 0..n {
                    match self.label[self.inblossom[v]] {
                        1 => self.dualvar[v] -= delta,
                        2 => self.dualvar[v] += delta,
                        _ => {}
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE && self.blossomparent[b] == NONE {
                        match self.label[b] {
                            1 => self.dualvar[b] += delta,
                            2 => self.dualvar[b] -= delta,
                            _ => {}
                        }
                    }
                }

                match deltatype {
                    1 => break,
                    2 => {
                        self.allowedge[deltaedge] = true;
                        let (mut i, j, _) = self.edges[deltaedge];
                        if self.label[self.inblossom[i]] == 0 {
                            i = j;
                        }
                        debug_assert_eq!(self.label[self.inblossom[i]], 1);
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge] = true;
                        let (i, _, _) = self.edges[deltaedge];
                        debug_assert_eq!(self.label[self.inblossom[i]], 1);
                        self.queue.push(i);
                    }
                    _ => self.expand_blossom(deltablossom, false),
                }
            }
            if !augmented {
                break;
            }
            for b in n..2 * n {
                if self.blossomparent[b] == NONE
                    && self.blossombase[b] != NONE
                    && self.label[b] == 1
                    && self.dualvar[b] == 0.0
                {
                    self.expand_blossom(b, true);
                }
            }
        }
    }
}
