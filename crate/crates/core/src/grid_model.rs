//! DC grid model and the reference-augmented measurement matrix.
//!
//! Every measurement becomes one matrix row with exactly two non-zeros: a
//! line flow `B_ij (x_i - x_j)` or a phasor `x_i`, the latter rewritten as a
//! unit flow from bus `i` to an extra reference node pinned at angle zero.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::attack_graph::DisjointSet;
use crate::error::{Error, Result};

/// A transmission line between two buses, addressed by external bus ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
}

impl Line {
    pub fn new(from: usize, to: usize, susceptance: f64) -> Self {
        Line { from, to, susceptance }
    }

    pub fn unit(from: usize, to: usize) -> Self {
        Line::new(from, to, 1.0)
    }
}

/// Buses and lines of a connected grid.
///
/// Bus ids are arbitrary unique integers; internally buses are addressed by
/// their dense position in [`Grid::buses`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    buses: Vec<usize>,
    lines: Vec<Line>,
    index: HashMap<usize, usize>,
}

impl Grid {
    pub fn new(buses: Vec<usize>, lines: Vec<Line>) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::Validation("grid has no buses".into()));
        }
        let mut index = HashMap::with_capacity(buses.len());
        for (pos, &bus) in buses.iter().enumerate() {
            if index.insert(bus, pos).is_some() {
                return Err(Error::Validation(format!("duplicate bus id {bus}")));
            }
        }
        let mut dsu = DisjointSet::new(buses.len());
        for (k, line) in lines.iter().enumerate() {
            if line.from == line.to {
                return Err(Error::Validation(format!(
                    "line {k} is a self-loop on bus {}",
                    line.from
                )));
            }
            let (Some(&a), Some(&b)) = (index.get(&line.from), index.get(&line.to)) else {
                return Err(Error::BadIndex(format!(
                    "line {k} references unknown bus ({} -> {})",
                    line.from, line.to
                )));
            };
            if !(line.susceptance.is_finite() && line.susceptance > 0.0) {
                return Err(Error::Validation(format!(
                    "line {k} has non-positive susceptance {}",
                    line.susceptance
                )));
            }
            dsu.union(a, b);
        }
        if dsu.components() != 1 {
            return Err(Error::DisconnectedGrid);
        }
        Ok(Grid { buses, lines, index })
    }

    /// Builds a grid whose bus set is every endpoint mentioned by `lines`, sorted ascending.
    pub fn from_lines(lines: Vec<Line>) -> Result<Self> {
        let mut buses: Vec<usize> = lines.iter().flat_map(|l| [l.from, l.to]).collect();
        buses.sort_unstable();
        buses.dedup();
        Grid::new(buses, lines)
    }

    pub fn buses(&self) -> &[usize] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Dense 0-based index of an external bus id.
    pub fn bus_index(&self, bus: usize) -> Option<usize> {
        self.index.get(&bus).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasurementKind {
    /// Real power flow on line `line` (index into [`Grid::lines`]); `reversed`
    /// measures the to→from direction.
    Flow { line: usize, reversed: bool },
    /// Voltage angle at an external bus id.
    Phasor { bus: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Measurement {
    pub id: usize,
    pub kind: MeasurementKind,
    pub secure: bool,
}

impl Measurement {
    pub fn flow(id: usize, line: usize) -> Self {
        Measurement { id, kind: MeasurementKind::Flow { line, reversed: false }, secure: false }
    }

    pub fn phasor(id: usize, bus: usize) -> Self {
        Measurement { id, kind: MeasurementKind::Phasor { bus }, secure: false }
    }

    pub fn secured(mut self) -> Self {
        self.secure = true;
        self
    }
}

/// Grid, measurements and the `m x (n+1)` augmented measurement matrix.
///
/// Column `n` is the reference node; its state entry is always zero.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    grid: Grid,
    measurements: Vec<Measurement>,
    matrix: DMatrix<f64>,
    /// Diagonal of the noise covariance (variances).
    sigma: Vec<f64>,
    /// Column carrying the positive and negative entry of each row.
    endpoints: Vec<(usize, usize)>,
}

impl AugmentedSystem {
    /// Number of buses (state length, reference excluded).
    pub fn n(&self) -> usize {
        self.grid.bus_count()
    }

    /// Number of measurements.
    pub fn m(&self) -> usize {
        self.measurements.len()
    }

    /// Column index of the reference node.
    pub fn reference(&self) -> usize {
        self.n()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// `(positive column, negative column)` of row `k`.
    pub fn endpoints(&self, k: usize) -> (usize, usize) {
        self.endpoints[k]
    }

    pub fn secure_ids(&self) -> Vec<usize> {
        self.measurements.iter().filter(|m| m.secure).map(|m| m.id).collect()
    }

    /// `H [x; 0]` restricted to row `k`.
    pub fn row_value(&self, k: usize, x: &[f64]) -> f64 {
        let (p, q) = self.endpoints[k];
        let at = |col: usize| if col == self.reference() { 0.0 } else { x[col] };
        self.matrix[(k, p)] * (at(p) - at(q))
    }

    /// Replaces the secure flags, keeping everything else.
    pub fn with_secure(&self, secure: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        for m in &mut out.measurements {
            m.secure = false;
        }
        for &id in secure {
            let m = out
                .measurements
                .get_mut(id)
                .ok_or_else(|| Error::UnknownId(format!("secure measurement {id}")))?;
            m.secure = true;
        }
        Ok(out)
    }
}

/// Builds the augmented measurement matrix for `measurements` on `grid`.
///
/// `sigma` holds per-measurement variances and defaults to all ones.
pub fn build_system(
    grid: Grid,
    measurements: Vec<Measurement>,
    sigma: Option<Vec<f64>>,
) -> Result<AugmentedSystem> {
    let n = grid.bus_count();
    let m = measurements.len();
    let reference = n;

    let sigma = sigma.unwrap_or_else(|| vec![1.0; m]);
    if sigma.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: sigma.len() });
    }
    if let Some(bad) = sigma.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Validation(format!("variance of measurement {bad} must be positive")));
    }

    let mut matrix = DMatrix::zeros(m, n + 1);
    let mut endpoints = Vec::with_capacity(m);
    for (k, meas) in measurements.iter().enumerate() {
        if meas.id != k {
            return Err(Error::BadIndex(format!("measurement at position {k} has id {}", meas.id)));
        }
        let (p, q, b) = match meas.kind {
            MeasurementKind::Flow { line, reversed } => {
                let l = grid
                    .lines()
                    .get(line)
                    .ok_or_else(|| Error::BadIndex(format!("measurement {k}: no line {line}")))?;
                let from = grid.bus_index(l.from).expect("validated grid");
                let to = grid.bus_index(l.to).expect("validated grid");
                if reversed {
                    (to, from, l.susceptance)
                } else {
                    (from, to, l.susceptance)
                }
            }
            MeasurementKind::Phasor { bus } => {
                let i = grid
                    .bus_index(bus)
                    .ok_or_else(|| Error::BadIndex(format!("measurement {k}: no bus {bus}")))?;
                (i, reference, 1.0)
            }
        };
        matrix[(k, p)] = b;
        matrix[(k, q)] = -b;
        endpoints.push((p, q));
    }

    if !measurements.iter().any(|m| matches!(m.kind, MeasurementKind::Phasor { .. })) {
        return Err(Error::RankDeficient);
    }
    // Full column rank of the reduced matrix <=> the measurement graph spans all n+1 nodes.
    let mut dsu = DisjointSet::new(n + 1);
    for &(p, q) in &endpoints {
        dsu.union(p, q);
    }
    if dsu.components() != 1 {
        return Err(Error::RankDeficient);
    }

    Ok(AugmentedSystem { grid, measurements, matrix, sigma, endpoints })
}

/// Flow on every line (in line order) followed by a phasor at each bus in `phasor_buses`.
pub fn standard_measurements(grid: &Grid, phasor_buses: &[usize]) -> Vec<Measurement> {
    let flows = (0..grid.lines().len()).map(|l| Measurement::flow(l, l));
    let nf = grid.lines().len();
    let phasors = phasor_buses.iter().enumerate().map(|(k, &b)| Measurement::phasor(nf + k, b));
    flows.chain(phasors).collect()
}

/// Noise-free or noisy measurement vector `z = H [x; 0] + e`.
pub fn true_measurements(
    system: &AugmentedSystem,
    x: &[f64],
    noise: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if x.len() != system.n() {
        return Err(Error::DimensionMismatch { expected: system.n(), got: x.len() });
    }
    if let Some(e) = noise {
        if e.len() != system.m() {
            return Err(Error::DimensionMismatch { expected: system.m(), got: e.len() });
        }
    }
    Ok((0..system.m())
        .map(|k| system.row_value(k, x) + noise.map_or(0.0, |e| e[k]))
        .collect())
}
