//! Topology and scenario ingestion, result CSV output.
//!
//! Topology files are edge lists, one line per branch:
//!
//! ```text
//! # comment
//! from_bus to_bus [susceptance]
//! ```
//!
//! A missing susceptance defaults to 1.0. Parallel branches are kept.
//!
//! Scenario files are TOML:
//!
//! ```text
//! flows = "all"        # or a list of 0-based line indices (file order)
//! phasors = [1, 4]     # bus ids, or "all" / "none"
//! secure = [20]        # measurement ids, or "all" / "none"
//! p_I = 1.0
//! p_J = 0.25
//! lambda = 6.0         # optional
//! seed = 7             # optional
//! ```
//!
//! Measurement ids number the selected flows first, then the phasors, in
//! the listed order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::attack_design::CostParams;
use crate::error::{Error, Result};
use crate::grid_model::{Grid, Line, Measurement};

pub const IEEE14: &str = include_str!("../assets/ieee14.txt");
pub const IEEE57: &str = include_str!("../assets/ieee57.txt");

pub fn bundled_topology(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "ieee14" => Some(IEEE14),
        "ieee57" => Some(IEEE57),
        _ => None,
    }
}

pub fn parse_topology_str(text: &str) -> Result<Grid> {
    let mut lines = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::Parse {
                line: no + 1,
                msg: format!("expected 'from to [susceptance]', got {} fields", fields.len()),
            });
        }
        let bus = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse { line: no + 1, msg: format!("bus id {s:?}: {e}") })
        };
        let susceptance = match fields.get(2) {
            Some(s) => s
                .parse::<f64>()
                .map_err(|e| Error::Parse { line: no + 1, msg: format!("susceptance {s:?}: {e}") })?,
            None => 1.0,
        };
        lines.push(Line::new(bus(fields[0])?, bus(fields[1])?, susceptance));
    }
    if lines.is_empty() {
        return Err(Error::Validation("topology has no lines".into()));
    }
    Grid::from_lines(lines)
}

pub fn parse_topology(path: impl AsRef<Path>) -> Result<Grid> {
    parse_topology_str(&fs::read_to_string(path)?)
}

/// A bundled topology name (`ieee14`, `ieee57`) or a file path.
pub fn load_topology(spec: &str) -> Result<Grid> {
    if !Path::new(spec).exists() {
        if let Some(text) = bundled_topology(spec) {
            return parse_topology_str(text);
        }
    }
    parse_topology(spec)
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
enum Selection {
    Keyword(String),
    List(Vec<usize>),
}

impl Selection {
    fn resolve(&self, all: impl Fn() -> Vec<usize>, what: &str) -> Result<Vec<usize>> {
        match self {
            Selection::List(ids) => Ok(ids.clone()),
            Selection::Keyword(k) if k == "all" => Ok(all()),
            Selection::Keyword(k) if k == "none" => Ok(Vec::new()),
            Selection::Keyword(k) => Err(Error::Validation(format!("{what}: expected \"all\", \"none\" or a list, got {k:?}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    flows: Option<Selection>,
    phasors: Option<Selection>,
    secure: Option<Selection>,
    #[serde(rename = "p_I")]
    p_i: Option<f64>,
    #[serde(rename = "p_J")]
    p_j: Option<f64>,
    lambda: Option<f64>,
    seed: Option<u64>,
}

/// Measurements plus attack parameters resolved against a grid.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub measurements: Vec<Measurement>,
    pub params: CostParams,
    pub lambda: Option<f64>,
}

pub fn parse_scenario_str(text: &str, grid: &Grid) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1));
        Error::Parse { line, msg: e.message().to_string() }
    })?;

    let n_lines = grid.lines().len();
    let flows = file
        .flows
        .unwrap_or(Selection::Keyword("all".into()))
        .resolve(|| (0..n_lines).collect(), "flows")?;
    if let Some(&bad) = flows.iter().find(|&&l| l >= n_lines) {
        return Err(Error::UnknownId(format!("line {bad}")));
    }
    let phasors = file
        .phasors
        .unwrap_or(Selection::Keyword("none".into()))
        .resolve(|| grid.buses().to_vec(), "phasors")?;
    if let Some(&bad) = phasors.iter().find(|&&b| grid.bus_index(b).is_none()) {
        return Err(Error::UnknownId(format!("bus {bad}")));
    }

    let mut measurements: Vec<Measurement> =
        flows.iter().enumerate().map(|(id, &line)| Measurement::flow(id, line)).collect();
    let offset = measurements.len();
    measurements.extend(phasors.iter().enumerate().map(|(k, &bus)| Measurement::phasor(offset + k, bus)));

    let m = measurements.len();
    let secure = file
        .secure
        .unwrap_or(Selection::Keyword("none".into()))
        .resolve(|| (0..m).collect(), "secure")?;
    for &id in &secure {
        measurements
            .get_mut(id)
            .ok_or_else(|| Error::UnknownId(format!("secure measurement {id} (m = {m})")))?
            .secure = true;
    }

    let params = CostParams::new(file.p_i.unwrap_or(1.0), file.p_j.unwrap_or(0.0))?
        .with_seed(file.seed.unwrap_or(0));
    if let Some(l) = file.lambda {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Validation(format!("lambda must be positive, got {l}")));
        }
    }
    Ok(Scenario { measurements, params, lambda: file.lambda })
}

pub fn parse_scenario(path: impl AsRef<Path>, grid: &Grid) -> Result<Scenario> {
    parse_scenario_str(&fs::read_to_string(path)?, grid)
}

pub const RESULT_HEADER: [&str; 9] = [
    "system",
    "secure_fraction",
    "attack",
    "p_J",
    "beta",
    "trials",
    "mean_cost",
    "feasible_fraction",
    "mean_runtime_ms",
];

/// One aggregated sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub system: String,
    pub secure_fraction: f64,
    pub attack: String,
    /// Jamming cost; `None` for attacks that do not jam.
    pub p_j: Option<f64>,
    /// `finite` / `inf`, or `None` when the attack does not use the inflation search.
    pub beta: Option<String>,
    pub trials: usize,
    /// `None` iff no trial produced a feasible attack.
    pub mean_cost: Option<f64>,
    pub feasible_fraction: f64,
    pub mean_runtime_ms: f64,
}

const NA: &str = "NA";

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

pub fn write_results_to<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.write_record([
            r.system.clone(),
            r.secure_fraction.to_string(),
            r.attack.clone(),
            opt_f64(r.p_j),
            r.beta.clone().unwrap_or_else(|| NA.to_string()),
            r.trials.to_string(),
            opt_f64(r.mean_cost),
            r.feasible_fraction.to_string(),
            r.mean_runtime_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    write_results_to(rows, fs::File::create(path)?)
}

pub fn read_results_from<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_HEADER {
        return Err(Error::Parse { line: 1, msg: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |idx: usize| -> Result<f64> {
            rec[idx].parse().map_err(|e| Error::Parse { line, msg: format!("{}: {e}", RESULT_HEADER[idx]) })
        };
        let opt = |idx: usize| -> Result<Option<f64>> {
            if &rec[idx] == NA {
                Ok(None)
            } else {
                num(idx).map(Some)
            }
        };
        rows.push(ResultRow {
            system: rec[0].to_string(),
            secure_fraction: num(1)?,
            attack: rec[2].to_string(),
            p_j: opt(3)?,
            beta: (&rec[4] != NA).then(|| rec[4].to_string()),
            trials: rec[5].parse().map_err(|e| Error::Parse { line, msg: format!("trials: {e}") })?,
            mean_cost: opt(6)?,
            feasible_fraction: num(7)?,
            mean_runtime_ms: num(8)?,
        });
    }
    Ok(rows)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    read_results_from(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_topology() {
        let g = parse_topology_str("1 2\n2 3\n1 3").unwrap();
        assert_eq!(g.buses(), &[1, 2, 3]);
        assert_eq!(g.lines().len(), 3);
        assert!(g.lines().iter().all(|l| l.susceptance == 1.0));
    }

    #[test]
    fn topology_errors() {
        assert!(matches!(parse_topology_str("1 1"), Err(Error::Validation(_))));
        assert!(matches!(parse_topology_str("1 2\n3 4"), Err(Error::DisconnectedGrid)));
        assert!(matches!(parse_topology_str("# c\n1 x"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_topology_str("1 2 3 4"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_topology_str("1 2 -1.0"), Err(Error::Validation(_))));
    }

    #[test]
    fn bundled_cases() {
        let g14 = load_topology("ieee14").unwrap();
        assert_eq!((g14.bus_count(), g14.lines().len()), (14, 20));
        let g57 = load_topology("ieee57").unwrap();
        assert_eq!((g57.bus_count(), g57.lines().len()), (57, 80));
        // line counts agree with the non-comment rows of the files themselves
        let rows = |t: &str| t.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count();
        assert_eq!(rows(IEEE14), 20);
        assert_eq!(rows(IEEE57), 80);
    }

    #[test]
    fn scenario_defaults_and_keywords() {
        let g = parse_topology_str("1 2\n2 3\n1 3").unwrap();
        let s = parse_scenario_str("phasors = \"all\"\nsecure = \"none\"\n", &g).unwrap();
        assert_eq!(s.measurements.len(), 6);
        assert!(s.measurements.iter().all(|m| !m.secure));
        assert_eq!(s.params.p_i, 1.0);

        let s = parse_scenario_str("phasors = [1]\nsecure = [3]\np_J = 0.25\nseed = 4\n", &g).unwrap();
        assert_eq!(s.measurements.len(), 4);
        assert!(s.measurements[3].secure);
        assert_eq!(s.params.p_j, 0.25);
        assert_eq!(s.params.seed, 4);
    }

    #[test]
    fn scenario_errors() {
        let g = parse_topology_str("1 2\n2 3\n1 3").unwrap();
        assert!(matches!(parse_scenario_str("phasors = [1]\nsecure = [4]", &g), Err(Error::UnknownId(_))));
        assert!(matches!(parse_scenario_str("phasors = [9]", &g), Err(Error::UnknownId(_))));
        assert!(matches!(parse_scenario_str("flows = [3]", &g), Err(Error::UnknownId(_))));
        assert!(matches!(parse_scenario_str("p_I = 1.0\np_J = 2.0", &g), Err(Error::Validation(_))));
        assert!(matches!(parse_scenario_str("phasors = \"some\"", &g), Err(Error::Validation(_))));
        assert!(matches!(parse_scenario_str("bogus = 1", &g), Err(Error::Parse { .. })));
        assert!(matches!(parse_scenario_str("p_J = [", &g), Err(Error::Parse { .. })));
    }

    fn row(mean: Option<f64>, ff: f64) -> ResultRow {
        ResultRow {
            system: "ieee14".into(),
            secure_fraction: 0.1,
            attack: "jamming".into(),
            p_j: Some(0.25),
            beta: Some("inf".into()),
            trials: 200,
            mean_cost: mean,
            feasible_fraction: ff,
            mean_runtime_ms: 0.0123,
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_results_to(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "system,secure_fraction,attack,p_J,beta,trials,mean_cost,feasible_fraction,mean_runtime_ms\n"
        );
        let mut buf = Vec::new();
        let hidden = ResultRow { attack: "hidden".into(), p_j: None, beta: None, ..row(None, 0.0) };
        write_results_to(&[hidden], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n'));
        assert_eq!(text.lines().nth(1).unwrap(), "ieee14,0.1,hidden,NA,NA,200,NA,0,0.0123");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(Some(3.125), 0.95), row(None, 0.0), row(Some(1.0 / 3.0), 1.0)];
        let mut buf = Vec::new();
        write_results_to(&rows, &mut buf).unwrap();
        assert_eq!(read_results_from(buf.as_slice()).unwrap(), rows);
    }
}
