//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on an internal invariant failure, 2 on
//! invalid input.

use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::attack_design::{
    design_detectable_attack, design_hidden_attack, design_jamming_attack, AttackKind, AttackPlan, Beta,
    CostParams,
};
use crate::attack_graph::{to_unit_graph, MeasurementGraph};
use crate::case_io::{load_topology, parse_scenario, write_results, write_results_to};
use crate::error::{Error, Result};
use crate::estimator::{default_alpha, default_lambda, simulate_attack};
use crate::grid_model::{build_system, AugmentedSystem};
use crate::harness::{run_sweep, SweepConfig, TrialFilter};
use crate::oracle::brute_force_optimal;

#[derive(Parser, Debug)]
#[command(name = "jamcut", version, about = "Cut-based design of jamming-assisted false data injection attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design hidden, detectable and jamming attacks for one scenario.
    Attack(ScenarioArgs),
    /// Design an attack and replay it against the bad-data detector.
    Verify(VerifyArgs),
    /// Compare the jamming design with exhaustive cut enumeration.
    OracleCheck(ScenarioArgs),
    /// Monte-Carlo sweep over secure-measurement fractions; writes CSV.
    Sweep(SweepArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BetaArg {
    Finite,
    Inf,
}

impl From<BetaArg> for Beta {
    fn from(b: BetaArg) -> Beta {
        match b {
            BetaArg::Finite => Beta::SecureWeight,
            BetaArg::Inf => Beta::Infinite,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FilterArg {
    All,
    HiddenPossible,
    HiddenResilient,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Hidden,
    Detectable,
    Jamming,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Bundled case name (ieee14, ieee57) or path to an edge list.
    #[arg(long)]
    topology: String,
    /// TOML file selecting measurements, secure set and costs.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long = "p-i")]
    p_i: Option<f64>,
    #[arg(long = "p-j")]
    p_j: Option<f64>,
    #[arg(long, value_enum, default_value_t = BetaArg::Finite)]
    beta: BetaArg,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = KindArg::Jamming)]
    attack: KindArg,
    /// Detection threshold; defaults to the scenario value, then 3 sqrt(m).
    #[arg(long)]
    lambda: Option<f64>,
    /// Half-width of uniform measurement noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    topology: String,
    /// Name written to the `system` column; defaults to the topology argument.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long = "phasor-fraction", default_value_t = 0.6)]
    phasor_fraction: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])]
    fractions: Vec<f64>,
    #[arg(long = "p-i", default_value_t = 1.0)]
    p_i: f64,
    #[arg(long = "p-j", value_delimiter = ',', default_values_t = [0.0, 0.25, 0.75])]
    p_j: Vec<f64>,
    /// Repeatable; both modes by default.
    #[arg(long, value_enum)]
    beta: Vec<BetaArg>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FilterArg::All)]
    filter: FilterArg,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write 0 in the runtime column so output is byte-for-byte reproducible.
    #[arg(long = "no-timing")]
    no_timing: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Attack(a) => cmd_attack(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::OracleCheck(a) => cmd_oracle_check(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}

struct Loaded {
    system: AugmentedSystem,
    graph: MeasurementGraph,
    params: CostParams,
    lambda: Option<f64>,
}

fn load(args: &ScenarioArgs) -> Result<Loaded> {
    let grid = load_topology(&args.topology)?;
    let scenario = parse_scenario(&args.scenario, &grid)?;
    let base = scenario.params;
    let mut params = CostParams::new(args.p_i.unwrap_or(base.p_i), args.p_j.unwrap_or(base.p_j))?
        .with_beta(args.beta.into())
        .with_seed(args.seed.unwrap_or(base.seed));
    if let Some(g) = args.gamma {
        params = params.with_gamma(g);
    }
    params.validate()?;
    let system = build_system(grid, scenario.measurements, None)?;
    let graph = to_unit_graph(&system);
    Ok(Loaded { system, graph, params, lambda: scenario.lambda })
}

fn design(kind: AttackKind, graph: &MeasurementGraph, params: &CostParams) -> Result<Option<AttackPlan>> {
    match kind {
        AttackKind::Hidden => design_hidden_attack(graph, params),
        AttackKind::Detectable => design_detectable_attack(graph, params),
        AttackKind::DetectableJamming => design_jamming_attack(graph, params),
    }
}

fn bus_ids(system: &AugmentedSystem, nodes: &[usize]) -> Vec<usize> {
    nodes.iter().map(|&v| system.grid().buses()[v]).collect()
}

fn plan_json(kind: AttackKind, system: &AugmentedSystem, plan: Option<&AttackPlan>) -> serde_json::Value {
    match plan {
        None => json!({ "attack": kind.label(), "feasible": false }),
        Some(p) => json!({
            "attack": kind.label(),
            "feasible": true,
            "cost": p.cost,
            "side1_buses": bus_ids(system, &p.cut.side1),
            "cut": p.cut.crossing,
            "n_s": p.cut.n_s,
            "n_sc": p.cut.n_sc,
            "jam": p.jam,
            "inject": p.inject,
            "untouched": p.untouched(),
            "rounds": p.rounds,
        }),
    }
}

fn cmd_attack(args: &ScenarioArgs) -> Result<i32> {
    let loaded = load(args)?;
    let mut out = io::stdout().lock();
    for kind in [AttackKind::Hidden, AttackKind::Detectable, AttackKind::DetectableJamming] {
        let plan = design(kind, &loaded.graph, &loaded.params)?;
        writeln!(out, "{}", plan_json(kind, &loaded.system, plan.as_ref()))?;
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let loaded = load(&args.scenario)?;
    let system = &loaded.system;
    let lambda = args.lambda.or(loaded.lambda).unwrap_or_else(|| default_lambda(system.m()));
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Validation(format!("lambda must be positive, got {lambda}")));
    }
    if !(args.noise.is_finite() && args.noise >= 0.0) {
        return Err(Error::Validation(format!("noise must be non-negative, got {}", args.noise)));
    }
    let kind = match args.attack {
        KindArg::Hidden => AttackKind::Hidden,
        KindArg::Detectable => AttackKind::Detectable,
        KindArg::Jamming => AttackKind::DetectableJamming,
    };
    let Some(plan) = design(kind, &loaded.graph, &loaded.params)? else {
        println!("{}", plan_json(kind, system, None));
        return Ok(0);
    };
    let plan = plan.with_alpha(default_alpha(lambda, system));

    let mut rng = ChaCha8Rng::seed_from_u64(loaded.params.seed);
    let x_true: Vec<f64> = (0..system.n()).map(|_| rng.gen_range(-0.1..=0.1)).collect();
    let noise: Vec<f64> = (0..system.m()).map(|_| args.noise * rng.gen_range(-1.0..=1.0)).collect();
    let report = simulate_attack(system, &plan, &x_true, lambda, Some(&noise))?;

    let mut value = plan_json(kind, system, Some(&plan));
    let obj = value.as_object_mut().expect("plan json is an object");
    obj.insert("alpha".into(), json!(plan.alpha));
    obj.insert("lambda".into(), json!(lambda));
    obj.insert("success".into(), json!(report.success));
    obj.insert("detected".into(), json!(report.detected));
    obj.insert("removed".into(), json!(report.removed));
    obj.insert("removal_rounds".into(), json!(report.rounds));
    println!("{value}");
    Ok(0)
}

fn cmd_oracle_check(args: &ScenarioArgs) -> Result<i32> {
    let loaded = load(args)?;
    let designed = design_jamming_attack(&loaded.graph, &loaded.params)?;
    let oracle = brute_force_optimal(&loaded.graph, &loaded.params)?;
    let design_cost = designed.as_ref().map(|p| p.cost);
    let oracle_cost = oracle.as_ref().map(|o| o.best_cost);
    let sound = match (design_cost, oracle_cost) {
        (Some(d), Some(o)) => d >= o - 1e-9 * o.abs().max(1.0),
        (Some(_), None) => false,
        (None, _) => true,
    };
    println!(
        "{}",
        json!({
            "design_cost": design_cost,
            "oracle_cost": oracle_cost,
            "gap": design_cost.zip(oracle_cost).map(|(d, o)| d - o),
            "oracle_side1_buses": oracle.as_ref().map(|o| bus_ids(&loaded.system, &o.best_cut.side1)),
            "feasible_cut_count": oracle.as_ref().map_or(0, |o| o.feasible_cut_count),
            "sound": sound,
        })
    );
    Ok(if sound { 0 } else { 1 })
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let grid = load_topology(&args.topology)?;
    let mut config = SweepConfig::new(args.name.clone().unwrap_or_else(|| args.topology.clone()), grid);
    config.trials = args.trials;
    config.phasor_fraction = args.phasor_fraction;
    config.secure_fractions = args.fractions.clone();
    config.p_i = args.p_i;
    config.p_j = args.p_j.clone();
    if !args.beta.is_empty() {
        config.betas = args.beta.iter().map(|&b| b.into()).collect();
    }
    config.gamma = args.gamma;
    config.seed = args.seed;
    config.timing = !args.no_timing;
    config.filter = match args.filter {
        FilterArg::All => TrialFilter::All,
        FilterArg::HiddenPossible => TrialFilter::HiddenPossible,
        FilterArg::HiddenResilient => TrialFilter::HiddenResilient,
    };
    if !(0.0..=1.0).contains(&config.phasor_fraction) {
        return Err(Error::Validation(format!("phasor fraction {} outside [0, 1]", config.phasor_fraction)));
    }
    let rows = run_sweep(&config)?;
    match &args.out {
        Some(path) => write_results(&rows, path)?,
        None => write_results_to(&rows, io::stdout().lock())?,
    }
    Ok(0)
}
