//! Minimum-cost attack construction on the measurement graph.
//!
//! A jamming adversary working on a feasible cut `C` (insecure majority)
//! jams `k_J` insecure crossing edges and injects into
//! `k_I = floor(1 + (|C| - k_J) / 2)` of the remaining ones, paying
//! `p_J k_J + p_I k_I`. When `p_J < p_I / 2` jamming everything it can is
//! optimal and the cost of a cut is an affine function of its weight under
//! secure weight `p_I - p_J` and insecure weight `p_J`; otherwise at most one
//! edge is jammed and the cost only grows with `|C|`. Either way the search
//! is a minimum-weight feasible cut, approximated by repeated global min-cut
//! with inflation of secure edges on infeasible cuts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack_graph::{contract_secure, global_min_cut, Cut, MeasurementGraph};
use crate::error::{Error, Result};
use crate::grid_model::AugmentedSystem;

/// Inflation applied to a secure edge of an infeasible min cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Beta {
    /// The secure edge weight of the active weighting (`p_I - p_J`, or 1 for unit weights).
    SecureWeight,
    /// Effectively removes the edge from future cuts; realised as a `gamma`-sized bump.
    Infinite,
    Value(f64),
}

impl Beta {
    pub fn label(&self) -> &'static str {
        match self {
            Beta::SecureWeight | Beta::Value(_) => "finite",
            Beta::Infinite => "inf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Cost of injecting bad data into one measurement.
    pub p_i: f64,
    /// Cost of jamming one measurement, `0 <= p_j <= p_i`.
    pub p_j: f64,
    pub beta: Beta,
    /// Cut weight at which the search gives up. `None` uses `(m + 1)` times the
    /// largest base edge weight.
    pub gamma: Option<f64>,
    pub seed: u64,
}

impl CostParams {
    pub fn new(p_i: f64, p_j: f64) -> Result<Self> {
        let params = CostParams { p_i, p_j, beta: Beta::SecureWeight, gamma: None, seed: 0 };
        params.validate()?;
        Ok(params)
    }

    pub fn with_beta(mut self, beta: Beta) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_i.is_finite() && self.p_i > 0.0) {
            return Err(Error::Validation(format!("p_I must be positive, got {}", self.p_i)));
        }
        if !(self.p_j.is_finite() && (0.0..=self.p_i).contains(&self.p_j)) {
            return Err(Error::Validation(format!(
                "p_J must lie in [0, p_I = {}], got {}",
                self.p_i, self.p_j
            )));
        }
        if let Beta::Value(b) = self.beta {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Validation(format!("beta must be positive, got {b}")));
            }
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Validation(format!("gamma must be positive and finite, got {g}")));
            }
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        if self.p_j < self.p_i / 2.0 {
            Regime::Weighted
        } else {
            Regime::Cardinality
        }
    }
}

/// Which cut objective the optimal jamming attack reduces to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `p_J < p_I / 2`: min-weight feasible cut with secure `p_I - p_J`, insecure `p_J`.
    Weighted,
    /// `p_J >= p_I / 2`: min-cardinality feasible cut.
    Cardinality,
}

/// Best jam/inject split on one feasible cut.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutAttackOption {
    pub cut: Cut,
    pub k_j: usize,
    pub k_i: usize,
    pub cost: f64,
}

/// Closed-form optimal split for a feasible cut.
pub fn per_cut_optimum(cut: &Cut, params: &CostParams) -> Result<CutAttackOption> {
    if !cut.is_feasible() {
        return Err(Error::InfeasibleCut { n_s: cut.n_s, n_sc: cut.n_sc });
    }
    let size = cut.size();
    let (k_j, k_i, cost) = match params.regime() {
        Regime::Weighted => {
            let k_j = cut.n_sc - cut.n_s - 1;
            let cost = (params.p_i - params.p_j) * cut.n_s as f64
                + params.p_j * cut.n_sc as f64
                + (params.p_i - params.p_j);
            (k_j, cut.n_s + 1, cost)
        }
        Regime::Cardinality => {
            let k_j = 1 - size % 2;
            let k_i = size.div_ceil(2);
            (k_j, k_i, params.p_j * k_j as f64 + params.p_i * k_i as f64)
        }
    };
    Ok(CutAttackOption { cut: cut.clone(), k_j, k_i, cost })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Hidden,
    Detectable,
    DetectableJamming,
}

impl AttackKind {
    pub fn label(&self) -> &'static str {
        match self {
            AttackKind::Hidden => "hidden",
            AttackKind::Detectable => "detectable",
            AttackKind::DetectableJamming => "jamming",
        }
    }
}

/// A concrete attack: which measurements to jam, which to corrupt, and by how much.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackPlan {
    pub kind: AttackKind,
    pub cut: Cut,
    /// Measurement ids suppressed before they reach the estimator.
    pub jam: Vec<usize>,
    /// Measurement ids receiving bad data.
    pub inject: Vec<usize>,
    /// Side-1 indicator over all nodes; the reference entry is 0.
    pub c: Vec<u8>,
    /// Magnitude of the intended state shift on side 1.
    pub alpha: f64,
    pub cost: f64,
    /// Inflation rounds the cut search needed.
    pub rounds: usize,
}

impl AttackPlan {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Crossing measurements left untouched; the estimator should discard these.
    pub fn untouched(&self) -> Vec<usize> {
        self.cut
            .crossing
            .iter()
            .copied()
            .filter(|id| !self.jam.contains(id) && !self.inject.contains(id))
            .collect()
    }

    /// Additive attack vector over all `m` measurements: `alpha * (H c)(e)` on
    /// injected rows and zero elsewhere.
    pub fn injection(&self, system: &AugmentedSystem) -> Vec<f64> {
        let shift: Vec<f64> = self.c[..system.n()].iter().map(|&b| self.alpha * b as f64).collect();
        let mut a = vec![0.0; system.m()];
        for &id in &self.inject {
            a[id] = system.row_value(id, &shift);
        }
        a
    }
}

/// State of the iterative min-cut search after it stops.
#[derive(Debug, Clone)]
struct CutSearch {
    cut: Cut,
    rounds: usize,
}

/// Repeated global min-cut: while the min cut is infeasible and lighter than
/// `gamma`, bump a uniformly chosen secure crossing edge by `beta`.
fn iterative_min_cut(
    graph: &mut MeasurementGraph,
    beta: f64,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<CutSearch>> {
    let mut cut = global_min_cut(graph)?;
    let mut rounds = 0;
    while cut.weight < gamma && !cut.is_feasible() {
        let secure: Vec<usize> = cut
            .crossing
            .iter()
            .copied()
            .filter(|&id| graph.edges()[graph.edge_index(id).expect("crossing edge")].secure)
            .collect();
        let pick = secure[rng.gen_range(0..secure.len())];
        let idx = graph.edge_index(pick).expect("crossing edge");
        let w = graph.edges()[idx].weight;
        graph.set_weight(idx, w + beta);
        cut = global_min_cut(graph)?;
        rounds += 1;
    }
    Ok(cut.is_feasible().then_some(CutSearch { cut, rounds }))
}

/// Shrinks a feasible cut until both sides are internally connected.
///
/// A side split into several components lets the estimator lose observability
/// once the untouched and jammed crossing edges are gone. Every crossing edge
/// belongs to exactly one component on each side, so some component cut is
/// feasible; `cost` must be monotone in the crossing set so this never
/// increases the attack cost.
fn refine_connected(graph: &MeasurementGraph, mut cut: Cut, cost: impl Fn(&Cut) -> f64) -> Cut {
    loop {
        let mut side = vec![false; graph.node_count()];
        for &v in &cut.side1 {
            side[v] = true;
        }
        let skip: Vec<bool> = graph.edges().iter().map(|e| side[e.u] != side[e.v]).collect();
        let labels = graph.component_labels(&skip);

        let mut comps: Vec<(usize, bool)> = Vec::new();
        for v in 0..graph.node_count() {
            if !comps.contains(&(labels[v], side[v])) {
                comps.push((labels[v], side[v]));
            }
        }
        if comps.len() == 2 {
            return cut;
        }
        let ref_label = labels[graph.reference()];
        let best = comps
            .iter()
            .map(|&(label, _)| {
                let in_comp = |v: usize| labels[v] == label;
                let mask: Vec<bool> = if label == ref_label {
                    (0..graph.node_count()).map(|v| !in_comp(v)).collect()
                } else {
                    (0..graph.node_count()).map(in_comp).collect()
                };
                graph.cut(&mask)
            })
            .filter(|c| c.size() < cut.size() && c.is_feasible())
            .min_by(|a, b| {
                cost(a)
                    .total_cmp(&cost(b))
                    .then(a.size().cmp(&b.size()))
                    .then(a.side1.cmp(&b.side1))
            })
            .expect("a feasible cut always has a feasible component cut");
        cut = best;
    }
}

fn base_weights(graph: &MeasurementGraph, secure: f64, insecure: f64) -> MeasurementGraph {
    graph.reweighted(|e| if e.secure { secure } else { insecure })
}

fn search_params(params: &CostParams, secure_weight: f64, max_weight: f64, m: usize) -> (f64, f64) {
    let gamma = params.gamma.unwrap_or((m as f64 + 1.0) * max_weight);
    let beta = match params.beta {
        Beta::SecureWeight => secure_weight,
        Beta::Value(b) => b,
        Beta::Infinite => gamma,
    };
    (beta, gamma)
}

/// Plan built from a cut. Insecure crossing edges touching the reference are
/// injected first, then the rest by id; the next ones are jammed.
///
/// Shifting every non-reference bus on the reference side by `-alpha` also
/// explains the attacked data, at the price of discarding the reference-side
/// phasors, the injected reference edges and the untouched non-reference
/// edges. Leaving only non-reference edges untouched keeps that rival
/// explanation strictly larger than the intended one.
fn materialize(
    graph: &MeasurementGraph,
    kind: AttackKind,
    cut: Cut,
    k_j: usize,
    k_i: usize,
    cost: f64,
    rounds: usize,
) -> AttackPlan {
    let reference = graph.reference();
    let mut insecure: Vec<(bool, usize)> = cut
        .crossing
        .iter()
        .map(|&id| &graph.edges()[graph.edge_index(id).expect("crossing edge")])
        .filter(|e| !e.secure)
        .map(|e| (e.u != reference && e.v != reference, e.measurement))
        .collect();
    insecure.sort_unstable();
    let insecure: Vec<usize> = insecure.into_iter().map(|(_, id)| id).collect();
    debug_assert!(k_i + k_j <= insecure.len());
    let inject = insecure[..k_i].to_vec();
    let jam = insecure[k_i..k_i + k_j].to_vec();
    let c = cut.indicator(graph.node_count());
    AttackPlan { kind, cut, jam, inject, c, alpha: 1.0, cost, rounds }
}

/// Approximate minimum-cost detectable jamming attack.
///
/// Returns `Ok(None)` when the search reaches `gamma` without a feasible cut.
pub fn design_jamming_attack(graph: &MeasurementGraph, params: &CostParams) -> Result<Option<AttackPlan>> {
    params.validate()?;
    let m = graph.edges().len();
    let (secure_w, insecure_w) = match params.regime() {
        Regime::Weighted => (params.p_i - params.p_j, params.p_j),
        Regime::Cardinality => (1.0, 1.0),
    };
    let base = base_weights(graph, secure_w, insecure_w);
    let (beta, gamma) = search_params(params, secure_w, secure_w.max(insecure_w), m);

    let mut working = base.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let Some(search) = iterative_min_cut(&mut working, beta, gamma, &mut rng)? else {
        return Ok(None);
    };
    let found = base.cut_of_nodes(&search.cut.side1);
    let cost_of = |c: &Cut| per_cut_optimum(c, params).map(|o| o.cost).unwrap_or(f64::INFINITY);
    let cut = refine_connected(&base, found, cost_of);
    let option = per_cut_optimum(&cut, params)?;
    Ok(Some(materialize(
        &base,
        AttackKind::DetectableJamming,
        option.cut,
        option.k_j,
        option.k_i,
        option.cost,
        search.rounds,
    )))
}

/// Approximate minimum-cost detectable attack without jamming: unit weights,
/// inject `floor(1 + |C| / 2)` insecure crossing edges.
pub fn design_detectable_attack(graph: &MeasurementGraph, params: &CostParams) -> Result<Option<AttackPlan>> {
    params.validate()?;
    let m = graph.edges().len();
    let base = base_weights(graph, 1.0, 1.0);
    let (beta, gamma) = search_params(params, 1.0, 1.0, m);

    let mut working = base.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let Some(search) = iterative_min_cut(&mut working, beta, gamma, &mut rng)? else {
        return Ok(None);
    };
    let found = base.cut_of_nodes(&search.cut.side1);
    let cut = refine_connected(&base, found, |c| c.size() as f64);
    let k_i = 1 + cut.size() / 2;
    let cost = params.p_i * k_i as f64;
    Ok(Some(materialize(&base, AttackKind::Detectable, cut, 0, k_i, cost, search.rounds)))
}

/// Minimum-cardinality cut with no secure crossing edge; every crossing edge is injected.
pub fn design_hidden_attack(graph: &MeasurementGraph, params: &CostParams) -> Result<Option<AttackPlan>> {
    params.validate()?;
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let base = base_weights(graph, 1.0, 1.0);
    let contraction = match contract_secure(&base) {
        Ok(c) => c,
        Err(Error::AllContracted) => return Ok(None),
        Err(e) => return Err(e),
    };
    let cut = global_min_cut(&contraction.graph)?;
    let cut = contraction.lift(&cut, &base);
    if cut.size() == 0 || cut.n_s > 0 {
        return Ok(None);
    }
    let cost = params.p_i * cut.size() as f64;
    let c = cut.indicator(base.node_count());
    Ok(Some(AttackPlan {
        kind: AttackKind::Hidden,
        inject: cut.crossing.clone(),
        jam: Vec::new(),
        cut,
        c,
        alpha: 1.0,
        cost,
        rounds: 0,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapBound {
    pub lower_bound_gap: f64,
}

/// Guaranteed cost saving of the optimal jamming attack over a no-jam
/// detectable attack built on the cut of `plan_nojam`.
pub fn cost_gap_bounds(plan_nojam: &AttackPlan, params: &CostParams) -> GapBound {
    let cut = &plan_nojam.cut;
    let even = cut.size().is_multiple_of(2);
    let lower_bound_gap = match params.regime() {
        Regime::Weighted => {
            let half_margin = (cut.n_sc.saturating_sub(cut.n_s) / 2) as f64;
            (params.p_i - 2.0 * params.p_j) * half_margin + if even { params.p_j } else { 0.0 }
        }
        Regime::Cardinality => {
            if even {
                params.p_i - params.p_j
            } else {
                0.0
            }
        }
    };
    GapBound { lower_bound_gap }
}
