//! Resource accounting across the two decomposition levels: qubits, depth,
//! and two-qubit gates for the full instance, the largest tour block, and
//! the largest post-cut subexperiment.
//!
//! Run with: cargo run -p qvrp --example resource_tables

use qvrp::circuit::{build_qaoa, metrics};
use qvrp::cut::find_cut;
use qvrp::cut::largest_subcircuit_metrics;
use qvrp::encode::{build_qubo, default_lambda, qubo_to_ising};
use qvrp::instance::VrpInstance;
use qvrp::partition::{extract_tsp, partition};

fn single_layer_metrics(inst: &VrpInstance) -> qvrp::error::Result<qvrp::circuit::CircuitMetrics> {
    let q = build_qubo(inst, default_lambda(inst))?;
    let m = qubo_to_ising(&q);
    Ok(metrics(&build_qaoa(&m, 1, &[0.5], &[0.5])?))
}

fn main() -> qvrp::error::Result<()> {
    println!("single-layer circuit resources by instance size:");
    println!("{:>5} {:>9} {:>7} {:>16}", "n", "qubits", "depth", "two-qubit gates");
    for (n, vehicles) in [(3, 1), (4, 1), (7, 2), (8, 3), (9, 3), (13, 5)] {
        let inst = VrpInstance::generate_random(n, vehicles, 0)?;
        let m = single_layer_metrics(&inst)?;
        println!("{n:>5} {:>9} {:>7} {:>16}", m.qubits, m.depth, m.two_qubit_gates);
    }
    println!();

    // Staged reductions for the largest scenario: full circuit, largest
    // block after the problem-level split, largest subexperiment after
    // cutting that block to a 6-qubit budget.
    let inst = VrpInstance::generate_random(13, 5, 0)?;
    let full = single_layer_metrics(&inst)?;
    let parts = partition(&inst, 0)?;
    let largest = parts
        .blocks
        .iter()
        .max_by_key(|b| b.len())
        .expect("at least one block");
    let tsp = extract_tsp(&inst, largest)?;
    let q = build_qubo(&tsp, default_lambda(&tsp))?;
    let m = qubo_to_ising(&q);
    let block_circuit = build_qaoa(&m, 1, &[0.5], &[0.5])?;
    let block = metrics(&block_circuit);
    let plan = find_cut(&block_circuit, 6, 0)?;
    let sub = largest_subcircuit_metrics(&block_circuit, &plan)?;

    let pct = |part: usize, whole: usize| 100.0 * (1.0 - part as f64 / whole as f64);
    println!("n=13, 5 vehicles, staged:");
    println!("  full:       {:>4} qubits, depth {:>3}, {:>5} two-qubit gates", full.qubits, full.depth, full.two_qubit_gates);
    println!("  block:      {:>4} qubits, depth {:>3}, {:>5} two-qubit gates", block.qubits, block.depth, block.two_qubit_gates);
    println!("  subcircuit: {:>4} qubits, depth {:>3}, {:>5} two-qubit gates", sub.qubits, sub.depth, sub.two_qubit_gates);
    println!(
        "  reductions: {:.1}% qubits, {:.1}% depth, {:.1}% two-qubit gates",
        pct(sub.qubits, full.qubits),
        pct(sub.depth, full.depth),
        pct(sub.two_qubit_gates, full.two_qubit_gates)
    );
    Ok(())
}
