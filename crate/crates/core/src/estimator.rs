//! Weighted least-squares state estimation with threshold detection and
//! greedy largest-normalized-residual bad-data removal.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::attack_design::AttackPlan;
use crate::attack_graph::DisjointSet;
use crate::error::{Error, Result};
use crate::grid_model::{true_measurements, AugmentedSystem};

/// Floor on residual variance in the normalized residual denominator.
pub const RESIDUAL_VARIANCE_FLOOR: f64 = 1e-12;

/// Relative gap under which two normalized residuals count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

/// Detection threshold `3 sqrt(m)`.
pub fn default_lambda(m: usize) -> f64 {
    3.0 * (m as f64).sqrt()
}

/// Injection magnitude `10 lambda max(1, sqrt(m)) / sigma_min`, far enough
/// above the threshold that the attacked residual always trips detection.
pub fn default_alpha(lambda: f64, system: &AugmentedSystem) -> f64 {
    let sigma_min = system.sigma().iter().copied().fold(f64::INFINITY, f64::min).sqrt();
    10.0 * lambda * (system.m() as f64).sqrt().max(1.0) / sigma_min
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationOutcome {
    /// Bus angles, reference excluded.
    pub estimate: Vec<f64>,
    /// Residual on the surviving measurements, in `surviving` order.
    pub residual: Vec<f64>,
    pub surviving: Vec<usize>,
    /// `|| Sigma^{-1/2} (z - H x*) ||_2` on the surviving set.
    pub weighted_residual_norm: f64,
    pub detected: bool,
    /// Removed measurement ids, in removal order.
    pub removed: Vec<usize>,
    pub rounds: usize,
}

struct Fit {
    estimate: DVector<f64>,
    residual: Vec<f64>,
    norm: f64,
    gain_inv: DMatrix<f64>,
}

fn observable(system: &AugmentedSystem, active: &[usize]) -> bool {
    let mut dsu = DisjointSet::new(system.n() + 1);
    for &k in active {
        let (p, q) = system.endpoints(k);
        dsu.union(p, q);
    }
    dsu.components() == 1
}

fn check_inputs(system: &AugmentedSystem, z: &[f64], active: &[usize]) -> Result<()> {
    if z.len() != system.m() {
        return Err(Error::DimensionMismatch { expected: system.m(), got: z.len() });
    }
    if let Some(&bad) = active.iter().find(|&&k| k >= system.m()) {
        return Err(Error::BadIndex(format!("active measurement {bad}")));
    }
    Ok(())
}

fn fit(system: &AugmentedSystem, z: &[f64], active: &[usize]) -> Result<Fit> {
    check_inputs(system, z, active)?;
    if !observable(system, active) {
        return Err(Error::RankDeficient);
    }
    let n = system.n();
    let h = system.matrix();
    let sigma = system.sigma();

    // weighted normal equations over the non-reference columns
    let mut gain = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for &k in active {
        let w = 1.0 / sigma[k];
        let (p, q) = system.endpoints(k);
        let cols = [p, q];
        for &a in cols.iter().filter(|&&c| c < n) {
            rhs[a] += w * h[(k, a)] * z[k];
            for &b in cols.iter().filter(|&&c| c < n) {
                gain[(a, b)] += w * h[(k, a)] * h[(k, b)];
            }
        }
    }
    let chol = gain.cholesky().ok_or(Error::RankDeficient)?;
    let estimate = chol.solve(&rhs);
    let gain_inv = chol.inverse();

    let x: Vec<f64> = estimate.iter().copied().collect();
    let residual: Vec<f64> = active.iter().map(|&k| z[k] - system.row_value(k, &x)).collect();
    let norm = active
        .iter()
        .zip(&residual)
        .map(|(&k, r)| r * r / sigma[k])
        .sum::<f64>()
        .sqrt();
    Ok(Fit { estimate, residual, norm, gain_inv })
}

/// Minimizer of the weighted residual over states with the reference pinned at zero.
pub fn estimate_state(system: &AugmentedSystem, z: &[f64], active: &[usize]) -> Result<Vec<f64>> {
    Ok(fit(system, z, active)?.estimate.iter().copied().collect())
}

/// `|| Sigma^{-1/2} (z - H [x; 0]) ||_2` over `active`.
pub fn weighted_residual_norm(system: &AugmentedSystem, z: &[f64], active: &[usize], x: &[f64]) -> f64 {
    active
        .iter()
        .map(|&k| {
            let r = z[k] - system.row_value(k, x);
            r * r / system.sigma()[k]
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedResiduals {
    /// Active measurement ids, in the order given.
    pub ids: Vec<usize>,
    pub values: Vec<f64>,
    /// Measurements whose removal would lose observability.
    pub critical: Vec<bool>,
}

fn residual_variances(system: &AugmentedSystem, active: &[usize], gain_inv: &DMatrix<f64>) -> Vec<f64> {
    let n = system.n();
    active
        .iter()
        .map(|&k| {
            let (p, q) = system.endpoints(k);
            let entries: Vec<(usize, f64)> = [p, q]
                .into_iter()
                .filter(|&c| c < n)
                .map(|c| (c, system.matrix()[(k, c)]))
                .collect();
            let mut quad = 0.0;
            for &(a, ha) in &entries {
                for &(b, hb) in &entries {
                    quad += ha * gain_inv[(a, b)] * hb;
                }
            }
            system.sigma()[k] - quad
        })
        .collect()
}

/// Active measurements that are bridges of the active measurement graph.
fn critical_flags(system: &AugmentedSystem, active: &[usize]) -> Vec<bool> {
    (0..active.len())
        .map(|skip| {
            let rest: Vec<usize> =
                active.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &k)| k).collect();
            !observable(system, &rest)
        })
        .collect()
}

/// `|r_i| / sqrt(max(R_r(i, i), eps))` with `R_r = Sigma - H (H^T Sigma^-1 H)^-1 H^T`.
pub fn normalized_residuals(
    system: &AugmentedSystem,
    z: &[f64],
    active: &[usize],
    estimate: &[f64],
) -> Result<NormalizedResiduals> {
    if estimate.len() != system.n() {
        return Err(Error::DimensionMismatch { expected: system.n(), got: estimate.len() });
    }
    let f = fit(system, z, active)?;
    let variances = residual_variances(system, active, &f.gain_inv);
    let values = active
        .iter()
        .zip(&variances)
        .map(|(&k, var)| (z[k] - system.row_value(k, estimate)).abs() / var.max(RESIDUAL_VARIANCE_FLOOR).sqrt())
        .collect();
    Ok(NormalizedResiduals { ids: active.to_vec(), values, critical: critical_flags(system, active) })
}

/// Greedy removal starting from every measurement.
pub fn remove_bad_data(system: &AugmentedSystem, z: &[f64], lambda: f64) -> Result<EstimationOutcome> {
    let all: Vec<usize> = (0..system.m()).collect();
    remove_bad_data_from(system, z, &all, lambda)
}

/// Estimate, test `J <= lambda`, and while the test fails drop the
/// non-critical measurement with the largest normalized residual (lowest id
/// on ties). Measurements outside `active` are never seen by the estimator.
pub fn remove_bad_data_from(
    system: &AugmentedSystem,
    z: &[f64],
    active: &[usize],
    lambda: f64,
) -> Result<EstimationOutcome> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::Validation(format!("lambda must be positive, got {lambda}")));
    }
    let mut surviving: Vec<usize> = active.to_vec();
    surviving.sort_unstable();
    surviving.dedup();
    let mut removed = Vec::new();
    loop {
        let f = fit(system, z, &surviving)?;
        let finish = |detected: bool, f: Fit, surviving: Vec<usize>, removed: Vec<usize>| EstimationOutcome {
            estimate: f.estimate.iter().copied().collect(),
            residual: f.residual,
            surviving,
            weighted_residual_norm: f.norm,
            detected,
            rounds: removed.len(),
            removed,
        };
        if f.norm <= lambda {
            return Ok(finish(false, f, surviving, removed));
        }
        let variances = residual_variances(system, &surviving, &f.gain_inv);
        let critical = critical_flags(system, &surviving);
        let mut pick: Option<(usize, f64)> = None;
        for (i, (&r, &var)) in f.residual.iter().zip(&variances).enumerate() {
            if critical[i] {
                continue;
            }
            let value = r.abs() / var.max(RESIDUAL_VARIANCE_FLOOR).sqrt();
            // surviving is sorted, so the first of a tie keeps the lowest id
            if pick.is_none_or(|(_, best)| value > best * (1.0 + TIE_TOLERANCE)) {
                pick = Some((i, value));
            }
        }
        let Some((i, _)) = pick else {
            return Ok(finish(true, f, surviving, removed));
        };
        removed.push(surviving.remove(i));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackVerification {
    pub success: bool,
    /// Final estimate minus the true state.
    pub estimate_shift: Vec<f64>,
    pub removed: Vec<usize>,
    pub rounds: usize,
    pub detected: bool,
}

/// Runs a plan end to end: jammed measurements never arrive, injected ones
/// carry `alpha (H c)(e)`, and the estimator removes what it flags.
///
/// Success means the final test passes, only untouched crossing edges were
/// removed, and the estimate moved by `alpha c`.
pub fn simulate_attack(
    system: &AugmentedSystem,
    plan: &AttackPlan,
    x_true: &[f64],
    lambda: f64,
    noise: Option<&[f64]>,
) -> Result<AttackVerification> {
    if plan.c.len() != system.n() + 1 {
        return Err(Error::DimensionMismatch { expected: system.n() + 1, got: plan.c.len() });
    }
    let mut z = true_measurements(system, x_true, noise)?;
    for (zk, ak) in z.iter_mut().zip(plan.injection(system)) {
        *zk += ak;
    }
    let active: Vec<usize> = (0..system.m()).filter(|k| !plan.jam.contains(k)).collect();
    let outcome = remove_bad_data_from(system, &z, &active, lambda)?;

    let estimate_shift: Vec<f64> = outcome.estimate.iter().zip(x_true).map(|(e, x)| e - x).collect();
    let noise_scale = noise.map_or(0.0, |e| e.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
    let tolerance = 10.0 * noise_scale + 1e-6 * plan.alpha.abs().max(1.0);
    let shifted = estimate_shift
        .iter()
        .zip(&plan.c)
        .all(|(d, &c)| (d - plan.alpha * c as f64).abs() <= tolerance);
    let untouched = plan.untouched();
    let removed_ok = outcome.removed.iter().all(|k| untouched.contains(k));

    Ok(AttackVerification {
        success: !outcome.detected && removed_ok && shifted,
        estimate_shift,
        removed: outcome.removed,
        rounds: outcome.rounds,
        detected: outcome.detected,
    })
}
