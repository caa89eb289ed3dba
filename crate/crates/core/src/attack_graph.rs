//! Measurement multigraph `G_H` and the cut machinery used for attack design.
//!
//! Nodes are the buses plus the reference node; each measurement row of the
//! augmented matrix is one edge between its two non-zero columns. Parallel
//! edges stay separate because every measurement carries its own secure flag.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_model::AugmentedSystem;

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
    components: usize,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect(), size: vec![1; n], components: n }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        self.components -= 1;
        true
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub measurement: usize,
    pub secure: bool,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct MeasurementGraph {
    node_count: usize,
    reference: usize,
    edges: Vec<GraphEdge>,
    incident: Vec<Vec<usize>>,
    by_measurement: HashMap<usize, usize>,
}

impl MeasurementGraph {
    pub fn new(node_count: usize, reference: usize, edges: Vec<GraphEdge>) -> Result<Self> {
        if reference >= node_count {
            return Err(Error::BadIndex(format!("reference {reference} out of {node_count} nodes")));
        }
        let mut incident = vec![Vec::new(); node_count];
        let mut by_measurement = HashMap::with_capacity(edges.len());
        for (idx, e) in edges.iter().enumerate() {
            if e.u >= node_count || e.v >= node_count || e.u == e.v {
                return Err(Error::BadIndex(format!(
                    "edge for measurement {} has endpoints ({}, {})",
                    e.measurement, e.u, e.v
                )));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::Validation(format!(
                    "edge for measurement {} has weight {}",
                    e.measurement, e.weight
                )));
            }
            if by_measurement.insert(e.measurement, idx).is_some() {
                return Err(Error::BadIndex(format!("measurement {} appears twice", e.measurement)));
            }
            incident[e.u].push(idx);
            incident[e.v].push(idx);
        }
        Ok(MeasurementGraph { node_count, reference, edges, incident, by_measurement })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn incident(&self, node: usize) -> &[usize] {
        &self.incident[node]
    }

    pub fn edge_index(&self, measurement: usize) -> Option<usize> {
        self.by_measurement.get(&measurement).copied()
    }

    pub fn secure_count(&self) -> usize {
        self.edges.iter().filter(|e| e.secure).count()
    }

    /// Same topology with each edge weight replaced by `weight(edge)`.
    pub fn reweighted(&self, weight: impl Fn(&GraphEdge) -> f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.weight = weight(e);
        }
        out
    }

    pub fn set_weight(&mut self, edge: usize, weight: f64) {
        self.edges[edge].weight = weight;
    }

    pub fn is_connected(&self) -> bool {
        self.connected_without(|_| false)
    }

    fn connected_without(&self, skip: impl Fn(&GraphEdge) -> bool) -> bool {
        let mut dsu = DisjointSet::new(self.node_count);
        for e in self.edges.iter().filter(|e| !skip(e)) {
            dsu.union(e.u, e.v);
        }
        dsu.components() == 1
    }

    /// Component label of each node once the edges flagged in `skip_edge` are removed.
    pub fn component_labels(&self, skip_edge: &[bool]) -> Vec<usize> {
        let mut dsu = DisjointSet::new(self.node_count);
        for (idx, e) in self.edges.iter().enumerate() {
            if !skip_edge[idx] {
                dsu.union(e.u, e.v);
            }
        }
        (0..self.node_count).map(|v| dsu.find(v)).collect()
    }

    /// The cut whose non-reference side is `{v : side1[v]}`.
    ///
    /// Panics if `side1` has the wrong length or marks the reference node.
    pub fn cut(&self, side1: &[bool]) -> Cut {
        assert_eq!(side1.len(), self.node_count);
        assert!(!side1[self.reference], "reference node must stay on side 0");
        let mut crossing = Vec::new();
        let (mut n_s, mut n_sc, mut weight) = (0, 0, 0.0);
        for e in &self.edges {
            if side1[e.u] != side1[e.v] {
                crossing.push(e.measurement);
                if e.secure {
                    n_s += 1;
                } else {
                    n_sc += 1;
                }
                weight += e.weight;
            }
        }
        crossing.sort_unstable();
        let side1 = (0..self.node_count).filter(|&v| side1[v]).collect();
        Cut { side1, crossing, n_s, n_sc, weight }
    }

    pub fn cut_of_nodes(&self, nodes: &[usize]) -> Cut {
        let mut mask = vec![false; self.node_count];
        for &v in nodes {
            mask[v] = true;
        }
        self.cut(&mask)
    }

    /// Cut isolating a single node. For the reference node this is the cut
    /// whose side 1 holds every other node.
    pub fn nodal_cut(&self, node: usize) -> Cut {
        let mask: Vec<bool> = if node == self.reference {
            (0..self.node_count).map(|v| v != self.reference).collect()
        } else {
            (0..self.node_count).map(|v| v == node).collect()
        };
        self.cut(&mask)
    }
}

/// Builds `G_H` from the augmented system: one edge per measurement row.
pub fn to_graph(system: &AugmentedSystem, weights: &[f64]) -> Result<MeasurementGraph> {
    if weights.len() != system.m() {
        return Err(Error::DimensionMismatch { expected: system.m(), got: weights.len() });
    }
    let edges = system
        .measurements()
        .iter()
        .map(|meas| {
            let (u, v) = system.endpoints(meas.id);
            GraphEdge { u, v, measurement: meas.id, secure: meas.secure, weight: weights[meas.id] }
        })
        .collect();
    MeasurementGraph::new(system.n() + 1, system.reference(), edges)
}

pub fn to_unit_graph(system: &AugmentedSystem) -> MeasurementGraph {
    to_graph(system, &vec![1.0; system.m()]).expect("valid system")
}

/// A bipartition of the nodes with the reference node on side 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cut {
    /// Sorted nodes on the non-reference side.
    pub side1: Vec<usize>,
    /// Sorted measurement ids of the crossing edges.
    pub crossing: Vec<usize>,
    pub n_s: usize,
    pub n_sc: usize,
    pub weight: f64,
}

impl Cut {
    pub fn size(&self) -> usize {
        self.crossing.len()
    }

    /// Strict majority of insecure crossing edges.
    pub fn is_feasible(&self) -> bool {
        is_feasible(self)
    }

    /// 0/1 node indicator of side 1 over all `node_count` nodes.
    pub fn indicator(&self, node_count: usize) -> Vec<u8> {
        let mut c = vec![0; node_count];
        for &v in &self.side1 {
            c[v] = 1;
        }
        c
    }
}

pub fn is_feasible(cut: &Cut) -> bool {
    cut.n_sc > cut.n_s
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Global minimum-weight cut by Stoer–Wagner with a lazy max-heap per phase.
///
/// Among equal-weight cuts the first one found wins; ties inside a phase go to
/// the lowest node index, so the result is a function of the graph alone.
pub fn global_min_cut(graph: &MeasurementGraph) -> Result<Cut> {
    let n = graph.node_count();
    if n < 2 || !graph.is_connected() {
        return Err(Error::Disconnected);
    }

    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for e in graph.edges() {
        *adj[e.u].entry(e.v).or_insert(0.0) += e.weight;
        *adj[e.v].entry(e.u).or_insert(0.0) += e.weight;
    }
    let mut groups: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;

    let mut keys = vec![0.0f64; n];
    let mut added = vec![false; n];
    while active.len() > 1 {
        for &v in &active {
            keys[v] = 0.0;
            added[v] = false;
        }
        let mut heap: BinaryHeap<(Key, Reverse<usize>)> =
            active.iter().map(|&v| (Key(0.0), Reverse(v))).collect();
        let (mut prev, mut last) = (usize::MAX, usize::MAX);
        while let Some((Key(k), Reverse(u))) = heap.pop() {
            if added[u] || k != keys[u] {
                continue;
            }
            added[u] = true;
            prev = last;
            last = u;
            for (&v, &w) in &adj[u] {
                if !added[v] {
                    keys[v] += w;
                    heap.push((Key(keys[v]), Reverse(v)));
                }
            }
        }
        let (s, t) = (prev, last);
        let phase_weight = keys[t];
        if best.as_ref().is_none_or(|(w, _)| phase_weight < *w) {
            best = Some((phase_weight, groups[t].clone()));
        }

        // merge t into s
        let moved = std::mem::take(&mut groups[t]);
        groups[s].extend(moved);
        let t_adj = std::mem::take(&mut adj[t]);
        for (v, w) in t_adj {
            adj[v].remove(&t);
            if v != s {
                *adj[s].entry(v).or_insert(0.0) += w;
                *adj[v].entry(s).or_insert(0.0) += w;
            }
        }
        active.retain(|&v| v != t);
    }

    let (_, group) = best.expect("at least one phase");
    let mut mask = vec![false; n];
    for v in group {
        mask[v] = true;
    }
    if mask[graph.reference()] {
        mask.iter_mut().for_each(|b| *b = !*b);
    }
    Ok(graph.cut(&mask))
}

/// Result of contracting every secure edge.
#[derive(Debug, Clone)]
pub struct Contraction {
    pub graph: MeasurementGraph,
    /// Contracted node of each original node.
    pub node_map: Vec<usize>,
}

impl Contraction {
    /// Maps a cut of the contracted graph back onto the original graph.
    pub fn lift(&self, cut: &Cut, original: &MeasurementGraph) -> Cut {
        let side: Vec<bool> = self.node_map.iter().map(|c| cut.side1.binary_search(c).is_ok()).collect();
        original.cut(&side)
    }
}

/// Merges the endpoints of every secure edge and drops the resulting self-loops.
///
/// Cuts of the contracted graph are exactly the original cuts with no secure
/// crossing edge.
pub fn contract_secure(graph: &MeasurementGraph) -> Result<Contraction> {
    let n = graph.node_count();
    let mut dsu = DisjointSet::new(n);
    for e in graph.edges().iter().filter(|e| e.secure) {
        dsu.union(e.u, e.v);
    }
    if dsu.components() == 1 {
        return Err(Error::AllContracted);
    }
    // number classes by their smallest member
    let mut class_of_root = HashMap::new();
    let mut node_map = vec![0; n];
    for (v, slot) in node_map.iter_mut().enumerate() {
        let root = dsu.find(v);
        let next = class_of_root.len();
        *slot = *class_of_root.entry(root).or_insert(next);
    }
    let edges = graph
        .edges()
        .iter()
        .filter(|e| !e.secure && node_map[e.u] != node_map[e.v])
        .map(|e| GraphEdge { u: node_map[e.u], v: node_map[e.v], ..*e })
        .collect();
    let contracted = MeasurementGraph::new(class_of_root.len(), node_map[graph.reference()], edges)?;
    Ok(Contraction { graph: contracted, node_map })
}

/// Whether the graph stays spanning-connected once `jammed` and `removed`
/// measurements are dropped; equivalent to full column rank of the surviving
/// reduced incidence matrix.
pub fn rank_after_attack(graph: &MeasurementGraph, jammed: &[usize], removed: &[usize]) -> bool {
    graph.connected_without(|e| jammed.contains(&e.measurement) || removed.contains(&e.measurement))
}

/// First nodal cut (by node index, reference last) with an insecure majority.
pub fn nodal_witness(graph: &MeasurementGraph) -> Option<Cut> {
    (0..graph.node_count()).map(|v| graph.nodal_cut(v)).find(|c| c.size() > 0 && c.is_feasible())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn edge(u: usize, v: usize, measurement: usize, secure: bool, weight: f64) -> GraphEdge {
        GraphEdge { u, v, measurement, secure, weight }
    }

    /// Nodes 0,1,2 = buses 1,2,3; node 3 = reference; edge 3 is the secure phasor.
    pub(crate) fn triangle_graph(w_secure: f64, w_insecure: f64) -> MeasurementGraph {
        MeasurementGraph::new(
            4,
            3,
            vec![
                edge(0, 1, 0, false, w_insecure),
                edge(1, 2, 1, false, w_insecure),
                edge(0, 2, 2, false, w_insecure),
                edge(0, 3, 3, true, w_secure),
            ],
        )
        .unwrap()
    }

    fn brute_min(graph: &MeasurementGraph, keep: impl Fn(&Cut) -> bool) -> Option<f64> {
        let others: Vec<usize> = (0..graph.node_count()).filter(|&v| v != graph.reference()).collect();
        (1u64..1 << others.len())
            .map(|mask| {
                let nodes: Vec<usize> =
                    others.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v).collect();
                graph.cut_of_nodes(&nodes)
            })
            .filter(|c| keep(c))
            .map(|c| c.weight)
            .min_by(f64::total_cmp)
    }

    #[test]
    fn triangle_from_system() {
        let grid = crate::grid_model::Grid::from_lines(vec![
            crate::grid_model::Line::unit(1, 2),
            crate::grid_model::Line::unit(2, 3),
            crate::grid_model::Line::unit(1, 3),
        ])
        .unwrap();
        let ms = crate::grid_model::standard_measurements(&grid, &[1]);
        let sys = crate::grid_model::build_system(grid, ms, None).unwrap();
        let g = to_unit_graph(&sys);
        let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (0, 2), (0, 3)]);
        assert_eq!(g.node_count(), 4);
        // unit weights: weight equals cardinality
        for nodes in [vec![0], vec![1, 2], vec![0, 1, 2]] {
            let c = g.cut_of_nodes(&nodes);
            assert_eq!(c.weight, c.size() as f64);
        }
    }

    #[test]
    fn parallel_edges_are_kept() {
        let g = MeasurementGraph::new(
            2,
            1,
            vec![edge(0, 1, 0, false, 1.0), edge(0, 1, 1, false, 1.0), edge(0, 1, 2, false, 1.0)],
        )
        .unwrap();
        assert_eq!(g.edges().len(), 3);
        let c = global_min_cut(&g).unwrap();
        assert_eq!(c.weight, 3.0);
        assert_eq!(c.crossing, vec![0, 1, 2]);
        assert_eq!(c.side1, vec![0]);
    }

    #[test]
    fn min_cut_canonical_unit() {
        let g = triangle_graph(1.0, 1.0);
        let c = global_min_cut(&g).unwrap();
        assert_eq!(c.weight, 1.0);
        assert_eq!(c.side1, vec![0, 1, 2]);
        assert_eq!(c.crossing, vec![3]);
        assert_eq!(brute_min(&g, |_| true), Some(1.0));
    }

    #[test]
    fn min_cut_canonical_regime_a_weights() {
        let g = triangle_graph(0.75, 0.25);
        let c = global_min_cut(&g).unwrap();
        assert_eq!(c.weight, 0.5);
        assert_eq!(brute_min(&g, |_| true), Some(0.5));
        assert!(!c.crossing.contains(&3));
    }

    #[test]
    fn disconnected_rejected() {
        let g = MeasurementGraph::new(3, 2, vec![edge(0, 1, 0, false, 1.0)]).unwrap();
        assert!(matches!(global_min_cut(&g), Err(Error::Disconnected)));
    }

    #[test]
    fn feasibility() {
        let mk = |n_s, n_sc| Cut { side1: vec![0], crossing: vec![], n_s, n_sc, weight: 0.0 };
        assert!(is_feasible(&mk(1, 2)));
        assert!(!is_feasible(&mk(1, 1)));
        assert!(is_feasible(&mk(0, 1)));
        assert!(!is_feasible(&mk(0, 0)));
    }

    #[test]
    fn contraction_canonical() {
        let g = triangle_graph(1.0, 1.0);
        let con = contract_secure(&g).unwrap();
        assert_eq!(con.graph.node_count(), 3);
        assert_eq!(con.node_map[0], con.node_map[3]);
        let c = global_min_cut(&con.graph).unwrap();
        assert_eq!(c.weight, 2.0);
        let lifted = con.lift(&c, &g);
        assert_eq!(lifted.n_s, 0);
        assert_eq!(lifted.size(), 2);
        assert_eq!(brute_min(&g, |c| c.n_s == 0), Some(2.0));
    }

    #[test]
    fn contraction_identity_without_secure() {
        let g = triangle_graph(1.0, 1.0).reweighted(|e| e.weight);
        let mut g2 = g.clone();
        g2.edges[3].secure = false;
        let g2 = MeasurementGraph::new(4, 3, g2.edges.clone()).unwrap();
        let con = contract_secure(&g2).unwrap();
        assert_eq!(con.node_map, vec![0, 1, 2, 3]);
        assert_eq!(con.graph.edges(), g2.edges());
    }

    #[test]
    fn secure_spanning_tree_collapses() {
        let g = MeasurementGraph::new(
            3,
            2,
            vec![edge(0, 1, 0, true, 1.0), edge(1, 2, 1, true, 1.0), edge(0, 2, 2, false, 1.0)],
        )
        .unwrap();
        assert!(matches!(contract_secure(&g), Err(Error::AllContracted)));
    }

    #[test]
    fn rank_checks() {
        let g = triangle_graph(1.0, 1.0);
        assert!(rank_after_attack(&g, &[0], &[]));
        assert!(!rank_after_attack(&g, &[0], &[1]));
        assert!(!rank_after_attack(&g, &[], &[3]));
        assert!(rank_after_attack(&g, &[], &[]));
    }

    #[test]
    fn nodal_cut_of_reference() {
        let g = triangle_graph(1.0, 1.0);
        let c = g.nodal_cut(3);
        assert_eq!(c.side1, vec![0, 1, 2]);
        assert_eq!(c.crossing, vec![3]);
        let w = nodal_witness(&g).unwrap();
        assert_eq!(w.side1, vec![0]);
    }
}
