//! Monte-Carlo sweep driver over randomly protected measurement sets.
//!
//! Every trial draws one scenario and evaluates all attack kinds on it
//! (paired sampling). A trial's seed depends only on the master seed and the
//! trial index, so the same phasor placement and the same measurement
//! permutation are reused at every secure fraction: secure sets are nested
//! as the fraction grows.

use std::time::Instant;

use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attack_design::{
    design_detectable_attack, design_hidden_attack, design_jamming_attack, AttackKind, AttackPlan, Beta,
    CostParams,
};
use crate::attack_graph::{nodal_witness, to_unit_graph, MeasurementGraph};
use crate::case_io::ResultRow;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::grid_model::{build_system, standard_measurements, AugmentedSystem, Grid};

/// `ceil(fraction * count)`, ignoring floating-point fuzz just above an integer.
pub fn fraction_count(fraction: f64, count: usize) -> usize {
    let raw = fraction * count as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(count)
}

/// Flows on every line, phasors on `ceil(phasor_fraction |V|)` random buses,
/// and `ceil(secure_fraction m)` random secure measurements.
pub fn random_scenario<R: Rng + ?Sized>(
    grid: &Grid,
    phasor_fraction: f64,
    secure_fraction: f64,
    rng: &mut R,
) -> Result<AugmentedSystem> {
    for (name, f) in [("phasor_fraction", phasor_fraction), ("secure_fraction", secure_fraction)] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Validation(format!("{name} must lie in [0, 1], got {f}")));
        }
    }
    let n = grid.bus_count();
    let mut picked = sample(rng, n, fraction_count(phasor_fraction, n)).into_vec();
    picked.sort_unstable();
    let phasor_buses: Vec<usize> = picked.iter().map(|&i| grid.buses()[i]).collect();
    let mut measurements = standard_measurements(grid, &phasor_buses);

    let m = measurements.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    for &id in &order[..fraction_count(secure_fraction, m)] {
        measurements[id].secure = true;
    }
    build_system(grid.clone(), measurements, None)
}

/// Which trials enter the averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialFilter {
    All,
    /// Only trials where a hidden attack exists.
    HiddenPossible,
    /// Only trials resilient to hidden attacks.
    HiddenResilient,
}

impl TrialFilter {
    pub fn admits(&self, trial: &TrialRecord) -> bool {
        match self {
            TrialFilter::All => true,
            TrialFilter::HiddenPossible => trial.hidden_cut_size.is_some(),
            TrialFilter::HiddenResilient => trial.hidden_cut_size.is_none(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub system_name: String,
    pub grid: Grid,
    pub phasor_fraction: f64,
    pub secure_fractions: Vec<f64>,
    pub trials: usize,
    pub p_i: f64,
    pub p_j: Vec<f64>,
    pub betas: Vec<Beta>,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub filter: TrialFilter,
    /// Record wall-clock time per design; when off the runtime column is 0
    /// and the output is a pure function of the configuration.
    pub timing: bool,
}

impl SweepConfig {
    pub fn new(system_name: impl Into<String>, grid: Grid) -> Self {
        SweepConfig {
            system_name: system_name.into(),
            grid,
            phasor_fraction: 0.6,
            secure_fractions: (0..=5).map(|i| i as f64 / 10.0).collect(),
            trials: 200,
            p_i: 1.0,
            p_j: vec![0.0, 0.25, 0.75],
            betas: vec![Beta::SecureWeight, Beta::Infinite],
            gamma: None,
            seed: 0,
            filter: TrialFilter::All,
            timing: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Validation("trials must be at least 1".into()));
        }
        if let Some(f) = self.secure_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::Validation(format!("secure fraction {f} outside [0, 1]")));
        }
        if self.betas.is_empty() {
            return Err(Error::Validation("at least one beta mode is required".into()));
        }
        for &pj in &self.p_j {
            CostParams::new(self.p_i, pj)?;
        }
        CostParams::new(self.p_i, 0.0).map(|_| ())
    }
}

/// One attack design on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub kind: AttackKind,
    pub p_j: Option<f64>,
    pub beta: Option<Beta>,
    pub cost: Option<f64>,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub secure_fraction: f64,
    pub trial: usize,
    pub m: usize,
    pub secure_count: usize,
    /// Cut size of the hidden attack, when one exists.
    pub hidden_cut_size: Option<usize>,
    /// Whether some single-bus cut has an insecure majority.
    pub nodal_witness: bool,
    pub evaluations: Vec<Evaluation>,
}

impl TrialRecord {
    pub fn cost(&self, kind: AttackKind, p_j: Option<f64>, beta: Option<Beta>) -> Option<f64> {
        self.evaluations
            .iter()
            .find(|e| e.kind == kind && e.p_j == p_j && e.beta == beta)
            .and_then(|e| e.cost)
    }
}

/// Seed of trial `trial` under `master`.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = master ^ (trial as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn timed<T>(timing: bool, f: impl FnOnce() -> T) -> (T, f64) {
    if timing {
        let start = Instant::now();
        let out = f();
        (out, start.elapsed().as_secs_f64() * 1e3)
    } else {
        (f(), 0.0)
    }
}

/// Evaluates hidden, detectable (per beta) and jamming (per beta and p_J)
/// designs on one measurement graph. All searches share `seed`.
pub fn evaluate_graph(
    graph: &MeasurementGraph,
    p_i: f64,
    p_js: &[f64],
    betas: &[Beta],
    gamma: Option<f64>,
    seed: u64,
    timing: bool,
) -> Result<Vec<Evaluation>> {
    let cost = |plan: Result<Option<AttackPlan>>| plan.map(|p| p.map(|p| p.cost));
    let params = |pj: f64, beta: Beta| -> Result<CostParams> {
        let p = CostParams::new(p_i, pj)?.with_beta(beta).with_seed(seed);
        Ok(match gamma {
            Some(g) => p.with_gamma(g),
            None => p,
        })
    };
    let mut out = Vec::with_capacity(1 + betas.len() * (1 + p_js.len()));

    let base = params(0.0, Beta::SecureWeight)?;
    let (c, t) = timed(timing, || cost(design_hidden_attack(graph, &base)));
    out.push(Evaluation { kind: AttackKind::Hidden, p_j: None, beta: None, cost: c?, runtime_ms: t });
    for &beta in betas {
        let p = params(0.0, beta)?;
        let (c, t) = timed(timing, || cost(design_detectable_attack(graph, &p)));
        out.push(Evaluation { kind: AttackKind::Detectable, p_j: None, beta: Some(beta), cost: c?, runtime_ms: t });
    }
    for &beta in betas {
        for &pj in p_js {
            let p = params(pj, beta)?;
            let (c, t) = timed(timing, || cost(design_jamming_attack(graph, &p)));
            out.push(Evaluation {
                kind: AttackKind::DetectableJamming,
                p_j: Some(pj),
                beta: Some(beta),
                cost: c?,
                runtime_ms: t,
            });
        }
    }
    Ok(out)
}

/// Runs every (secure fraction, trial) pair and returns the raw records in
/// fraction-major, trial-minor order.
pub fn run_trials(config: &SweepConfig) -> Result<Vec<TrialRecord>> {
    run_trials_with(config, Execution::default())
}

pub fn run_trials_with(config: &SweepConfig, exec: Execution) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let total = config.secure_fractions.len() * config.trials;
    map_indexed(exec, total, |idx| {
        let fraction = config.secure_fractions[idx / config.trials];
        let trial = idx % config.trials;
        let seed = trial_seed(config.seed, trial);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let system = random_scenario(&config.grid, config.phasor_fraction, fraction, &mut rng)?;
        let graph = to_unit_graph(&system);
        let evaluations =
            evaluate_graph(&graph, config.p_i, &config.p_j, &config.betas, config.gamma, seed, config.timing)?;
        let hidden_cut_size = design_hidden_attack(&graph, &CostParams::new(config.p_i, 0.0)?)?
            .map(|p| p.cut.size());
        Ok(TrialRecord {
            secure_fraction: fraction,
            trial,
            m: system.m(),
            secure_count: graph.secure_count(),
            hidden_cut_size,
            nodal_witness: nodal_witness(&graph).is_some(),
            evaluations,
        })
    })
    .into_iter()
    .collect()
}

/// Averages trial records into one row per (fraction, attack, p_J, beta).
pub fn aggregate(config: &SweepConfig, records: &[TrialRecord]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for &fraction in &config.secure_fractions {
        let admitted: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.secure_fraction == fraction && config.filter.admits(r))
            .collect();
        let Some(first) = records.iter().find(|r| r.secure_fraction == fraction) else {
            continue;
        };
        for (slot, template) in first.evaluations.iter().enumerate() {
            let evals: Vec<&Evaluation> = admitted.iter().map(|r| &r.evaluations[slot]).collect();
            let costs: Vec<f64> = evals.iter().filter_map(|e| e.cost).collect();
            let trials = evals.len();
            let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
            let runtimes: Vec<f64> = evals.iter().map(|e| e.runtime_ms).collect();
            rows.push(ResultRow {
                system: config.system_name.clone(),
                secure_fraction: fraction,
                attack: template.kind.label().to_string(),
                p_j: template.p_j,
                beta: template.beta.map(|b| b.label().to_string()),
                trials,
                mean_cost: (!costs.is_empty()).then(|| mean(&costs)),
                feasible_fraction: if trials == 0 { 0.0 } else { costs.len() as f64 / trials as f64 },
                mean_runtime_ms: if trials == 0 { 0.0 } else { mean(&runtimes) },
            });
        }
    }
    rows
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<ResultRow>> {
    run_sweep_with(config, Execution::default())
}

pub fn run_sweep_with(config: &SweepConfig, exec: Execution) -> Result<Vec<ResultRow>> {
    let records = run_trials_with(config, exec)?;
    Ok(aggregate(config, &records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_io::load_topology;

    fn small_config() -> SweepConfig {
        let mut c = SweepConfig::new("ieee14", load_topology("ieee14").unwrap());
        c.trials = 3;
        c.secure_fractions = vec![0.0, 1.0];
        c.timing = false;
        c
    }

    #[test]
    fn scenario_sizes() {
        let grid = load_topology("ieee14").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sys = random_scenario(&grid, 0.6, 0.0, &mut rng).unwrap();
        assert_eq!(sys.m(), 29);
        assert!(sys.secure_ids().is_empty());
        let sys = random_scenario(&grid, 1.0, 0.5, &mut rng).unwrap();
        assert_eq!(sys.m(), 34);
        assert_eq!(sys.secure_ids().len(), 17);
        assert!(random_scenario(&grid, 1.2, 0.0, &mut rng).is_err());
    }

    #[test]
    fn nested_secure_sets() {
        let grid = load_topology("ieee14").unwrap();
        let draw = |f: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            random_scenario(&grid, 0.6, f, &mut rng).unwrap().secure_ids()
        };
        let small = draw(0.2);
        let large = draw(0.4);
        assert!(small.iter().all(|id| large.contains(id)));
    }

    #[test]
    fn fraction_rounding() {
        assert_eq!(fraction_count(0.6, 14), 9);
        assert_eq!(fraction_count(0.3, 10), 3);
        assert_eq!(fraction_count(0.1, 29), 3);
        assert_eq!(fraction_count(0.0, 29), 0);
        assert_eq!(fraction_count(1.0, 29), 29);
    }

    #[test]
    fn extreme_fractions() {
        let config = small_config();
        let rows = run_sweep(&config).unwrap();
        // hidden + 2 detectable + 2 x 3 jamming per fraction
        assert_eq!(rows.len(), 2 * 9);
        for r in &rows {
            let expected = if r.secure_fraction == 0.0 { 1.0 } else { 0.0 };
            assert_eq!(r.feasible_fraction, expected, "{r:?}");
            assert_eq!(r.mean_cost.is_none(), r.feasible_fraction == 0.0);
        }
    }

    #[test]
    fn sequential_matches_parallel() {
        let mut config = small_config();
        config.secure_fractions = vec![0.2];
        let a = run_sweep_with(&config, Execution::Sequential).unwrap();
        let b = run_sweep_with(&config, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
