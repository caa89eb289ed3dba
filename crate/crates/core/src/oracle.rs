//! Exhaustive ground truth for small instances: every cut, the exact optimal
//! jamming attack over all of them, and minimum-cardinality bad-data removal.

use itertools::Itertools;
use serde::Serialize;

use crate::attack_design::{CostParams, CutAttackOption};
use crate::attack_graph::{Cut, MeasurementGraph};
use crate::error::{Error, Result};
use crate::estimator::{estimate_state, weighted_residual_norm};
use crate::exec::{for_each_chunk_mut, Execution};
use crate::grid_model::AugmentedSystem;

/// Largest number of non-reference nodes the enumerators accept.
pub const MAX_ENUMERATION_NODES: usize = 22;

/// Cap on measurements for the exhaustive removal search.
pub const MAX_REMOVAL_MEASUREMENTS: usize = 20;

fn non_reference_nodes(graph: &MeasurementGraph) -> Result<Vec<usize>> {
    let others: Vec<usize> = (0..graph.node_count()).filter(|&v| v != graph.reference()).collect();
    if others.len() > MAX_ENUMERATION_NODES {
        return Err(Error::TooLarge { nodes: others.len(), cap: MAX_ENUMERATION_NODES });
    }
    Ok(others)
}

fn mask_to_side(others: &[usize], node_count: usize, mask: u64) -> Vec<bool> {
    let mut side = vec![false; node_count];
    for (bit, &v) in others.iter().enumerate() {
        side[v] = mask >> bit & 1 == 1;
    }
    side
}

/// Every cut of the graph: side 1 ranges over all non-empty subsets of the
/// non-reference nodes, in Gray-code order. Bit `i` of a subset mask stands
/// for the `i`-th non-reference node.
pub fn enumerate_cuts(graph: &MeasurementGraph) -> Result<impl Iterator<Item = Cut> + '_> {
    let others = non_reference_nodes(graph)?;
    let total = 1u64 << others.len();
    Ok((1..total).map(move |i| {
        let gray = i ^ (i >> 1);
        graph.cut(&mask_to_side(&others, graph.node_count(), gray))
    }))
}

/// Admissible `k_J` minimising `p_J k_J + p_I floor(1 + (|C| - k_J) / 2)` by
/// direct sweep. `None` for infeasible cuts.
pub fn sweep_jam_count(n_s: usize, n_sc: usize, params: &CostParams) -> Option<(usize, usize, f64)> {
    let size = n_s + n_sc;
    let mut best: Option<(usize, usize, f64)> = None;
    for k_j in 0..=n_sc {
        let k_i = (2 + size - k_j) / 2;
        if k_j + k_i > n_sc {
            continue;
        }
        let cost = params.p_j * k_j as f64 + params.p_i * k_i as f64;
        if best.is_none_or(|(_, _, c)| cost < c) {
            best = Some((k_j, k_i, cost));
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub best_cut: Cut,
    pub best_option: CutAttackOption,
    pub best_cost: f64,
    pub feasible_cut_count: usize,
    /// Optimal cost per cut, indexed by side-1 subset mask; infeasible cuts
    /// (and the empty mask) hold `f64::INFINITY`.
    pub all_costs: Vec<f64>,
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy)]
struct Best {
    cost: f64,
    size: usize,
    mask: u64,
}

/// Orders candidates by cost, then cut size, then lexicographic side-1 node list.
fn better(a: &Best, b: &Best, others: &[usize]) -> bool {
    if !nearly_equal(a.cost, b.cost) {
        return a.cost < b.cost;
    }
    if a.size != b.size {
        return a.size < b.size;
    }
    let nodes = |mask: u64| -> Vec<usize> {
        others.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v).collect()
    };
    nodes(a.mask) < nodes(b.mask)
}

/// Exact optimal detectable jamming attack over all cuts.
pub fn brute_force_optimal(graph: &MeasurementGraph, params: &CostParams) -> Result<Option<OracleResult>> {
    brute_force_optimal_with(graph, params, Execution::default())
}

pub fn brute_force_optimal_with(
    graph: &MeasurementGraph,
    params: &CostParams,
    exec: Execution,
) -> Result<Option<OracleResult>> {
    params.validate()?;
    let others = non_reference_nodes(graph)?;
    let n = others.len();
    let mut position = vec![usize::MAX; graph.node_count()];
    for (bit, &v) in others.iter().enumerate() {
        position[v] = bit;
    }
    let bit_of = |v: usize| -> Option<usize> { (position[v] != usize::MAX).then_some(position[v]) };

    // high bits select a contiguous block of masks, low bits are walked in Gray order
    let low_bits = n.saturating_sub(6).max(n.min(4));
    let block = 1usize << low_bits;
    let mut all_costs = vec![f64::INFINITY; 1usize << n];

    let chunk_results = for_each_chunk_mut(exec, &mut all_costs, block, |prefix, slot| {
        let base = (prefix as u64) << low_bits;
        let side_of = |mask: u64, v: usize| bit_of(v).is_some_and(|b| mask >> b & 1 == 1);
        let (mut n_s, mut n_sc) = (0usize, 0usize);
        for e in graph.edges() {
            if side_of(base, e.u) != side_of(base, e.v) {
                if e.secure {
                    n_s += 1;
                } else {
                    n_sc += 1;
                }
            }
        }
        let mut best: Option<Best> = None;
        let mut feasible = 0usize;
        let mut mask = base;
        for step in 0..block as u64 {
            if step > 0 {
                let bit = step.trailing_zeros() as usize;
                let node = others[bit];
                let before = mask;
                mask ^= 1 << bit;
                for &idx in graph.incident(node) {
                    let e = &graph.edges()[idx];
                    let was_crossing = side_of(before, e.u) != side_of(before, e.v);
                    let count = if e.secure { &mut n_s } else { &mut n_sc };
                    if was_crossing {
                        *count -= 1;
                    } else {
                        *count += 1;
                    }
                }
            }
            if mask == 0 {
                continue;
            }
            if let Some((_, _, cost)) = sweep_jam_count(n_s, n_sc, params) {
                feasible += 1;
                slot[(mask - base) as usize] = cost;
                let cand = Best { cost, size: n_s + n_sc, mask };
                if best.is_none_or(|b| better(&cand, &b, &others)) {
                    best = Some(cand);
                }
            }
        }
        (best, feasible)
    });

    let feasible_cut_count = chunk_results.iter().map(|(_, f)| f).sum();
    let best = chunk_results
        .iter()
        .filter_map(|(b, _)| *b)
        .reduce(|a, b| if better(&b, &a, &others) { b } else { a });
    let Some(best) = best else {
        return Ok(None);
    };
    let best_cut = graph.cut(&mask_to_side(&others, graph.node_count(), best.mask));
    let (k_j, k_i, cost) = sweep_jam_count(best_cut.n_s, best_cut.n_sc, params).expect("feasible best cut");
    Ok(Some(OracleResult {
        best_option: CutAttackOption { cut: best_cut.clone(), k_j, k_i, cost },
        best_cut,
        best_cost: cost,
        feasible_cut_count,
        all_costs,
    }))
}

/// Cheapest hidden attack over all cuts with no secure crossing edge: `p_I |C|`.
pub fn brute_force_hidden(graph: &MeasurementGraph, p_i: f64) -> Result<Option<f64>> {
    Ok(enumerate_cuts(graph)?
        .filter(|c| c.n_s == 0 && c.size() > 0)
        .map(|c| p_i * c.size() as f64)
        .min_by(f64::total_cmp))
}

/// Smallest set of `active` measurements whose removal passes `J <= lambda`
/// while keeping the system observable. Ties go to the lexicographically
/// smallest id set.
pub fn brute_force_removal(
    system: &AugmentedSystem,
    z: &[f64],
    active: &[usize],
    lambda: f64,
) -> Result<Vec<usize>> {
    if active.len() > MAX_REMOVAL_MEASUREMENTS {
        return Err(Error::TooLarge { nodes: active.len(), cap: MAX_REMOVAL_MEASUREMENTS });
    }
    let mut active = active.to_vec();
    active.sort_unstable();
    for k in 0..=active.len() {
        for removed in active.iter().copied().combinations(k) {
            let rest: Vec<usize> = active.iter().copied().filter(|id| !removed.contains(id)).collect();
            let Ok(x) = estimate_state(system, z, &rest) else {
                continue;
            };
            if weighted_residual_norm(system, z, &rest, &x) <= lambda {
                return Ok(removed);
            }
        }
    }
    Err(Error::NoRemovalWorks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack_graph::tests::{edge, triangle_graph};
    use crate::grid_model::{build_system, standard_measurements, true_measurements, Grid, Line};

    #[test]
    fn cut_counts() {
        let g = triangle_graph(1.0, 1.0);
        let cuts: Vec<Cut> = enumerate_cuts(&g).unwrap().collect();
        assert_eq!(cuts.len(), 7);
        let mut sides: Vec<Vec<usize>> = cuts.iter().map(|c| c.side1.clone()).collect();
        sides.sort();
        sides.dedup();
        assert_eq!(sides.len(), 7);

        let two = MeasurementGraph::new(2, 1, vec![edge(0, 1, 0, false, 1.0)]).unwrap();
        assert_eq!(enumerate_cuts(&two).unwrap().count(), 1);

        let edges = (0..23).map(|i| edge(i, 23, i, false, 1.0)).collect();
        let big = MeasurementGraph::new(24, 23, edges).unwrap();
        assert!(matches!(enumerate_cuts(&big), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn canonical_optimum() {
        let g = triangle_graph(1.0, 1.0);
        let p = CostParams::new(1.0, 0.25).unwrap();
        let r = brute_force_optimal(&g, &p).unwrap().unwrap();
        assert_eq!(r.best_cost, 1.25);
        assert_eq!(r.feasible_cut_count, 6);
        assert_eq!(r.best_cut.side1, vec![1]);
        // the all-bus cut crosses only the secure phasor
        assert!(r.all_costs[0b111].is_infinite());
        for (pj, want) in [(0.0, 1.0), (0.75, 1.75), (1.0, 2.0)] {
            let p = CostParams::new(1.0, pj).unwrap();
            assert_eq!(brute_force_optimal(&g, &p).unwrap().unwrap().best_cost, want);
        }
    }

    #[test]
    fn jamming_at_full_price_equals_detectable() {
        let g = triangle_graph(1.0, 1.0);
        let p = CostParams::new(1.0, 1.0).unwrap();
        let best = brute_force_optimal(&g, &p).unwrap().unwrap().best_cost;
        let detectable = enumerate_cuts(&g)
            .unwrap()
            .filter(|c| c.is_feasible())
            .map(|c| (1 + c.size() / 2) as f64)
            .min_by(f64::total_cmp)
            .unwrap();
        assert_eq!(best, detectable);
    }

    #[test]
    fn all_secure_has_no_optimum() {
        let g = MeasurementGraph::new(3, 2, vec![edge(0, 1, 0, true, 1.0), edge(1, 2, 1, true, 1.0)]).unwrap();
        let p = CostParams::new(1.0, 0.5).unwrap();
        assert!(brute_force_optimal(&g, &p).unwrap().is_none());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let g = triangle_graph(1.0, 1.0);
        let p = CostParams::new(1.0, 0.3).unwrap();
        let a = brute_force_optimal_with(&g, &p, Execution::Sequential).unwrap().unwrap();
        let b = brute_force_optimal_with(&g, &p, Execution::Parallel).unwrap().unwrap();
        assert_eq!(a.best_cut, b.best_cut);
        assert_eq!(a.all_costs, b.all_costs);
    }

    #[test]
    fn removal_search() {
        let grid = Grid::from_lines(vec![Line::unit(1, 2), Line::unit(2, 3), Line::unit(1, 3)]).unwrap();
        let ms = standard_measurements(&grid, &[1, 3]);
        let sys = build_system(grid, ms, None).unwrap();
        let all: Vec<usize> = (0..sys.m()).collect();
        let mut z = true_measurements(&sys, &[0.1, -0.3, 0.2], None).unwrap();
        assert!(brute_force_removal(&sys, &z, &all, 0.1).unwrap().is_empty());
        z[3] += 40.0;
        assert_eq!(brute_force_removal(&sys, &z, &all, 0.1).unwrap(), vec![3]);
    }
}
