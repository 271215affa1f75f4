//! Command-line pipeline: solve an instance end to end and emit CSV/JSON
//! reports, staged resource-reduction tables, and amplitude-encoding
//! resource accounting.
//!
//! Every report is deterministic per (flags, seed), and every number in a
//! report is recomputable from the serialized artifacts written next to it
//! (instance JSON, partition JSON, per-block Ising JSON, cut plan JSON).
//! CSV files are UTF-8 with LF line endings; column layouts are documented
//! in the repository README.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baseline::{brute_force_vrp, classical_vrp, BRUTE_FORCE_VRP_MAX_NODES};
use crate::circuit::{build_qaoa, metrics, Circuit, CircuitMetrics};
use crate::cut::{find_cut, largest_subcircuit_metrics, overhead_report, reconstruct_expectation};
use crate::encode::{
    amplitude_basis_map, build_qubo, default_lambda, qubit_count_edge, qubo_to_ising, IsingModel,
};
use crate::error::{QvrpError, Result};
use crate::instance::{RouteSet, VrpInstance};
use crate::partition::{extract_tsp, partition, Partition};
use crate::qaoa::{solve_vrp_pld, BlockReport, OptimizerKind, QaoaConfig};
use crate::sim::{expectation_ising, simulate};

/// Angles used when a circuit is built only to be measured, never run. Any
/// nonzero pair gives identical metrics.
const NOMINAL_GAMMA: f64 = 0.5;
const NOMINAL_BETA: f64 = 0.5;

#[derive(Parser, Debug)]
#[command(
    name = "qvrp",
    version,
    about = "Two-level decomposition pipeline for vehicle routing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate or load an instance, split it into tour blocks, solve each
    /// block, compare against classical baselines, and write reports.
    Solve(SolveArgs),
    /// Emit qubit/depth/two-qubit-gate counts at the three pipeline stages
    /// (full circuit, largest block, largest post-cut subcircuit) with
    /// percentage reductions.
    ReportReductions(ReductionArgs),
    /// Emit amplitude-encoding qubit counts with optional reference
    /// annotations.
    AmplitudeResources(AmplitudeArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerArg {
    Lintrust,
    Neldermead,
}

impl OptimizerArg {
    fn kind(self) -> OptimizerKind {
        match self {
            OptimizerArg::Lintrust => OptimizerKind::LinTrust,
            OptimizerArg::Neldermead => OptimizerKind::NelderMead,
        }
    }

    fn label(self) -> &'static str {
        match self {
            OptimizerArg::Lintrust => "lintrust",
            OptimizerArg::Neldermead => "neldermead",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingArg {
    Edge,
    Amplitude,
}

impl EncodingArg {
    fn label(self) -> &'static str {
        match self {
            EncodingArg::Edge => "edge",
            EncodingArg::Amplitude => "amplitude",
        }
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Total node count including the depot (generated instances).
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub vehicles: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ansatz layer count.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 100_000)]
    pub shots: u64,
    /// Penalty weight; defaults to 2·n·max(w) per block.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Lintrust)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    /// Verify each block's expectation by cutting and reconstructing it.
    #[arg(long)]
    pub cut: bool,
    /// Width budget per part for --cut.
    #[arg(long, default_value_t = 6)]
    pub xi_max: usize,
    /// Refuse cut plans whose sampling overhead exceeds 10^budget.
    #[arg(long)]
    pub overhead_budget_log10: Option<f64>,
    #[arg(long, value_enum, default_value_t = EncodingArg::Edge)]
    pub encoding: EncodingArg,
    /// Emit resource tables only; skip simulation and baselines.
    #[arg(long)]
    pub resources_only: bool,
    /// Load this instance JSON instead of generating one.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Output directory for all reports and artifacts.
    #[arg(long, default_value = "qvrp-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReductionArgs {
    /// Prior solve output: an instance JSON file or the directory holding
    /// instance.json.
    #[arg(long)]
    pub instance: PathBuf,
    /// Partition seed; use the seed of the prior solve.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub xi_max: usize,
    #[arg(long, default_value = "qvrp-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AmplitudeArgs {
    /// Instance sizes, comma separated (e.g. 4,7,10).
    #[arg(long, value_delimiter = ',', required = true)]
    pub nodes: Vec<usize>,
    /// Also list each block after splitting into this many tours.
    #[arg(long)]
    pub vehicles: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reference qubit counts to annotate, as n=q pairs (e.g. 10=8).
    #[arg(long, value_delimiter = ',')]
    pub reference: Vec<String>,
    #[arg(long, default_value = "qvrp-out")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::ReportReductions(args) => cmd_report_reductions(&args),
        Command::AmplitudeResources(args) => cmd_amplitude_resources(&args),
    }
}

#[derive(Serialize, Clone)]
struct ResourceRow {
    scope: String,
    nodes: usize,
    encoding: String,
    qubits: usize,
    depth: Option<usize>,
    two_qubit_gates: Option<usize>,
}

#[derive(Serialize, Clone)]
struct CutRow {
    block: usize,
    cuts: usize,
    gamma_total: f64,
    log10_gamma_total: f64,
    largest_part_size: usize,
    subcircuit_qubits: usize,
    subcircuit_two_qubit_gates: usize,
    uncut_expectation: f64,
    reconstructed_expectation: f64,
    delta: f64,
}

#[derive(Serialize)]
struct SolveReport {
    nodes: usize,
    vehicles: usize,
    seed: u64,
    p: usize,
    shots: u64,
    optimizer: String,
    restarts: usize,
    encoding: String,
    lambda: Option<f64>,
    resources_only: bool,
    partition: Partition,
    resources: Vec<ResourceRow>,
    blocks: Option<Vec<BlockReport>>,
    block_metrics: Option<Vec<CircuitMetrics>>,
    quantum: Option<RouteSet>,
    classical: Option<RouteSet>,
    oracle: Option<RouteSet>,
    cut: Option<Vec<CutRow>>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text.as_bytes())?;
    Ok(())
}

fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_pct(x: f64) -> String {
    format!("{x:.1}")
}

fn opt_num<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Block Ising model under the same penalty policy the solver uses.
fn block_ising(tsp: &VrpInstance, lambda: Option<f64>) -> Result<IsingModel> {
    let q = build_qubo(tsp, lambda.unwrap_or_else(|| default_lambda(tsp)))?;
    Ok(qubo_to_ising(&q))
}

fn nominal_circuit(m: &IsingModel, p: usize) -> Result<Circuit> {
    build_qaoa(m, p, &vec![NOMINAL_GAMMA; p], &vec![NOMINAL_BETA; p])
}

fn load_instance_path(path: &Path) -> Result<VrpInstance> {
    let file = if path.is_dir() { path.join("instance.json") } else { path.to_path_buf() };
    VrpInstance::load(&file)
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let inst = match (&args.instance, args.nodes) {
        (Some(path), None) => {
            if args.vehicles.is_some() {
                return Err(QvrpError::Parameter(
                    "--vehicles conflicts with --instance; the file fixes the vehicle count"
                        .into(),
                ));
            }
            load_instance_path(path)?
        }
        (None, Some(n)) => VrpInstance::generate_random(n, args.vehicles.unwrap_or(2), args.seed)?,
        (Some(_), Some(_)) => {
            return Err(QvrpError::Parameter("pass either --instance or --nodes, not both".into()))
        }
        (None, None) => {
            return Err(QvrpError::Parameter("pass --instance <path> or --nodes <n>".into()))
        }
    };
    if args.encoding == EncodingArg::Amplitude && !args.resources_only {
        return Err(QvrpError::Parameter(
            "amplitude encoding is resource accounting only; add --resources-only".into(),
        ));
    }

    fs::create_dir_all(&args.out)?;
    inst.save(&args.out.join("instance.json"))?;

    let parts = partition(&inst, args.seed)?;
    write_text(
        &args.out.join("partition.json"),
        &serde_json::to_string_pretty(&parts).expect("partition serializes"),
    )?;

    // Resource rows: full instance, then each block, in the requested
    // encoding. Edge rows carry circuit metrics at the requested depth p;
    // amplitude rows are qubit accounting only.
    let mut resources = Vec::new();
    let mut block_models = Vec::new();
    let full_ising = block_ising(&inst, args.lambda)?;
    match args.encoding {
        EncodingArg::Edge => {
            let m = metrics(&nominal_circuit(&full_ising, args.p)?);
            resources.push(ResourceRow {
                scope: "full".into(),
                nodes: inst.n,
                encoding: "edge".into(),
                qubits: m.qubits,
                depth: Some(m.depth),
                two_qubit_gates: Some(m.two_qubit_gates),
            });
        }
        EncodingArg::Amplitude => {
            resources.push(ResourceRow {
                scope: "full".into(),
                nodes: inst.n,
                encoding: "amplitude".into(),
                qubits: amplitude_basis_map(inst.n)?.num_qubits,
                depth: None,
                two_qubit_gates: None,
            });
        }
    }
    for (idx, block) in parts.blocks.iter().enumerate() {
        let tsp = extract_tsp(&inst, block)?;
        let ising = block_ising(&tsp, args.lambda)?;
        write_text(&args.out.join(format!("ising_block_{idx}.json")), &ising.to_json_string())?;
        match args.encoding {
            EncodingArg::Edge => {
                let m = metrics(&nominal_circuit(&ising, args.p)?);
                resources.push(ResourceRow {
                    scope: format!("block{idx}"),
                    nodes: tsp.n,
                    encoding: "edge".into(),
                    qubits: m.qubits,
                    depth: Some(m.depth),
                    two_qubit_gates: Some(m.two_qubit_gates),
                });
            }
            EncodingArg::Amplitude => {
                resources.push(ResourceRow {
                    scope: format!("block{idx}"),
                    nodes: tsp.n,
                    encoding: "amplitude".into(),
                    qubits: amplitude_basis_map(tsp.n)?.num_qubits,
                    depth: None,
                    two_qubit_gates: None,
                });
            }
        }
        block_models.push((tsp, ising));
    }
    write_text(&args.out.join("resources.csv"), &resources_csv(&resources))?;

    let mut report = SolveReport {
        nodes: inst.n,
        vehicles: inst.vehicles,
        seed: args.seed,
        p: args.p,
        shots: args.shots,
        optimizer: args.optimizer.label().into(),
        restarts: args.restarts,
        encoding: args.encoding.label().into(),
        lambda: args.lambda,
        resources_only: args.resources_only,
        partition: parts.clone(),
        resources,
        blocks: None,
        block_metrics: None,
        quantum: None,
        classical: None,
        oracle: None,
        cut: None,
    };

    if !args.resources_only {
        let cfg = QaoaConfig {
            p: args.p,
            shots: args.shots,
            seed: args.seed,
            restarts: args.restarts,
            optimizer: args.optimizer.kind(),
            lambda: args.lambda,
            ..QaoaConfig::default()
        };
        let (merged, blocks) = solve_vrp_pld(&inst, &cfg)?;
        let classical = classical_vrp(&inst, args.seed)?;
        let oracle = if inst.n <= BRUTE_FORCE_VRP_MAX_NODES {
            Some(brute_force_vrp(&inst)?)
        } else {
            None
        };

        let block_metrics: Vec<CircuitMetrics> = block_models
            .iter()
            .map(|(_, ising)| Ok(metrics(&nominal_circuit(ising, args.p)?)))
            .collect::<Result<_>>()?;

        let cut_rows = if args.cut {
            let mut rows = Vec::new();
            for (idx, report) in blocks.iter().enumerate() {
                let (_, ising) = &block_models[idx];
                // Cut verification runs on the first-layer ansatz at the
                // block's optimized leading angles; substituted instructions
                // must share one diagonal block.
                let gamma = report.result.best_params.0[0];
                let beta = report.result.best_params.1[0];
                let c = build_qaoa(ising, 1, &[gamma], &[beta])?;
                let plan = find_cut(&c, args.xi_max, args.seed)?;
                let over = overhead_report(&plan, args.overhead_budget_log10);
                if over.over_budget {
                    return Err(QvrpError::Resource(format!(
                        "block {idx}: sampling overhead 10^{:.2} exceeds budget 10^{:.2}",
                        over.log10_gamma_total,
                        args.overhead_budget_log10.expect("flag present"),
                    )));
                }
                write_text(
                    &args.out.join(format!("cut_plan_block_{idx}.json")),
                    &serde_json::to_string_pretty(&plan).expect("plan serializes"),
                )?;
                let uncut = expectation_ising(&simulate(&c)?, ising)?;
                let reconstructed = reconstruct_expectation(&c, &plan, ising)?;
                let sub = largest_subcircuit_metrics(&c, &plan)?;
                rows.push(CutRow {
                    block: idx,
                    cuts: plan.cuts(),
                    gamma_total: plan.gamma_total,
                    log10_gamma_total: over.log10_gamma_total,
                    largest_part_size: plan.largest_part_size,
                    subcircuit_qubits: sub.qubits,
                    subcircuit_two_qubit_gates: sub.two_qubit_gates,
                    uncut_expectation: uncut,
                    reconstructed_expectation: reconstructed,
                    delta: (reconstructed - uncut).abs(),
                });
            }
            Some(rows)
        } else {
            None
        };

        write_text(
            &args.out.join("blocks.csv"),
            &blocks_csv(&blocks, &block_metrics, cut_rows.as_deref()),
        )?;
        write_text(&args.out.join("trace.csv"), &trace_csv(&blocks))?;
        write_text(
            &args.out.join("summary.csv"),
            &summary_csv(args, &inst, &parts, &merged, &classical, oracle.as_ref()),
        )?;

        report.blocks = Some(blocks);
        report.block_metrics = Some(block_metrics);
        report.quantum = Some(merged);
        report.classical = Some(classical);
        report.oracle = oracle;
        report.cut = cut_rows;
    }

    write_text(
        &args.out.join("report.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(())
}

fn resources_csv(rows: &[ResourceRow]) -> String {
    let mut out = String::from("scope,nodes,encoding,qubits,depth,two_qubit_gates\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.scope,
            r.nodes,
            r.encoding,
            r.qubits,
            opt_num(r.depth),
            opt_num(r.two_qubit_gates),
        ));
    }
    out
}

fn blocks_csv(
    blocks: &[BlockReport],
    block_metrics: &[CircuitMetrics],
    cut_rows: Option<&[CutRow]>,
) -> String {
    let mut out = String::from(
        "block,nodes,qubits,depth,two_qubit_gates,best_expectation,route_cost,\
         feasible_hits,feasible_mass,cut_count,cut_gamma,cut_subcircuit_qubits,\
         cut_subcircuit_two_qubit_gates,cut_delta\n",
    );
    for (idx, b) in blocks.iter().enumerate() {
        let m = block_metrics[idx];
        let cut = cut_rows.map(|rows| &rows[idx]);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            idx,
            b.block.len() + 1,
            b.qubits,
            m.depth,
            m.two_qubit_gates,
            fmt_f(b.result.best_expectation),
            fmt_f(b.cost),
            b.result.feasible_hit_count,
            fmt_f(b.result.feasible_probability_mass),
            opt_num(cut.map(|c| c.cuts)),
            cut.map(|c| fmt_f(c.gamma_total)).unwrap_or_default(),
            opt_num(cut.map(|c| c.subcircuit_qubits)),
            opt_num(cut.map(|c| c.subcircuit_two_qubit_gates)),
            cut.map(|c| format!("{:.2e}", c.delta)).unwrap_or_default(),
        ));
    }
    out
}

fn trace_csv(blocks: &[BlockReport]) -> String {
    let mut out = String::from("block,eval,best_expectation\n");
    for (idx, b) in blocks.iter().enumerate() {
        for (eval, &value) in b.result.expectation_trace.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", idx, eval + 1, fmt_f(value)));
        }
    }
    out
}

fn summary_csv(
    args: &SolveArgs,
    inst: &VrpInstance,
    parts: &Partition,
    quantum: &RouteSet,
    classical: &RouteSet,
    oracle: Option<&RouteSet>,
) -> String {
    let mut out = String::from(
        "nodes,vehicles,seed,p,shots,optimizer,restarts,encoding,lambda,\
         quantum_cost,classical_cost,oracle_cost,partition_cut_weight\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        inst.n,
        inst.vehicles,
        args.seed,
        args.p,
        args.shots,
        args.optimizer.label(),
        args.restarts,
        args.encoding.label(),
        args.lambda.map(fmt_f).unwrap_or_else(|| "default".into()),
        fmt_f(quantum.total_cost),
        fmt_f(classical.total_cost),
        oracle.map(|o| fmt_f(o.total_cost)).unwrap_or_default(),
        fmt_f(parts.cut_weight),
    ));
    out
}

/// Staged resource table. Stage metrics are taken at p = 1, the convention
/// for the published counts; the cut stage also requires a single diagonal
/// block.
fn cmd_report_reductions(args: &ReductionArgs) -> Result<()> {
    let inst = load_instance_path(&args.instance)?;
    let full_ising = block_ising(&inst, None)?;
    let full = metrics(&nominal_circuit(&full_ising, 1)?);

    let parts = partition(&inst, args.seed)?;
    let mut largest: Option<(VrpInstance, IsingModel)> = None;
    for block in &parts.blocks {
        let tsp = extract_tsp(&inst, block)?;
        if largest.as_ref().map(|(t, _)| tsp.n > t.n).unwrap_or(true) {
            let ising = block_ising(&tsp, None)?;
            largest = Some((tsp, ising));
        }
    }
    let (_, block_ising_model) = largest.expect("partition yields at least one block");
    let block_circuit = nominal_circuit(&block_ising_model, 1)?;
    let post_pld = metrics(&block_circuit);

    let plan = find_cut(&block_circuit, args.xi_max, args.seed)?;
    let post_cld = largest_subcircuit_metrics(&block_circuit, &plan)?;

    fs::create_dir_all(&args.out)?;
    let mut out = String::from(
        "stage,qubits,depth,two_qubit_gates,qubit_reduction_pct,depth_reduction_pct,\
         two_qubit_gate_reduction_pct\n",
    );
    let pct = |part: usize, whole: usize| 100.0 * (1.0 - part as f64 / whole as f64);
    for (stage, m) in [("full", full), ("post_pld", post_pld), ("post_cld", post_cld)] {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            stage,
            m.qubits,
            m.depth,
            m.two_qubit_gates,
            fmt_pct(pct(m.qubits, full.qubits)),
            fmt_pct(pct(m.depth, full.depth)),
            fmt_pct(pct(m.two_qubit_gates, full.two_qubit_gates)),
        ));
    }
    write_text(&args.out.join("reductions.csv"), &out)?;
    Ok(())
}

fn cmd_amplitude_resources(args: &AmplitudeArgs) -> Result<()> {
    let mut reference = std::collections::BTreeMap::new();
    for pair in &args.reference {
        let mut split = pair.splitn(2, '=');
        let parse = |s: Option<&str>| {
            s.and_then(|x| x.trim().parse::<usize>().ok()).ok_or_else(|| {
                QvrpError::Parameter(format!("--reference wants n=q pairs, got {pair:?}"))
            })
        };
        let n = parse(split.next())?;
        let q = parse(split.next())?;
        reference.insert(n, q);
    }

    let mut out =
        String::from("scope,nodes,edge_states,amplitude_qubits,reference_qubits,note\n");
    let mut push_row = |scope: String, nodes: usize| -> Result<()> {
        let states = qubit_count_edge(nodes);
        let qubits = amplitude_basis_map(nodes)?.num_qubits;
        let (reference_col, note) = match reference.get(&nodes) {
            Some(&r) if r != qubits => (
                r.to_string(),
                format!(
                    "computed {qubits} from ceil(log2({states})) disagrees with reference {r}"
                ),
            ),
            Some(&r) => (r.to_string(), String::new()),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!("{scope},{nodes},{states},{qubits},{reference_col},{note}\n"));
        Ok(())
    };

    for &n in &args.nodes {
        push_row("full".into(), n)?;
        if let Some(vehicles) = args.vehicles {
            let inst = VrpInstance::generate_random(n, vehicles, args.seed)?;
            let parts = partition(&inst, args.seed)?;
            for (idx, block) in parts.blocks.iter().enumerate() {
                push_row(format!("block{idx}"), block.len() + 1)?;
            }
        }
    }

    fs::create_dir_all(&args.out)?;
    write_text(&args.out.join("amplitude.csv"), &out)?;
    Ok(())
}
