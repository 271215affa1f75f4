//! Full pipeline against classical baselines: split, solve every block
//! variationally, merge, and compare with a tuned heuristic and (when small
//! enough) exhaustive search.
//!
//! Run with: cargo run -p qvrp --example classical_vs_quantum

use qvrp::baseline::{brute_force_vrp, classical_vrp};
use qvrp::instance::VrpInstance;
use qvrp::qaoa::{solve_vrp_pld, QaoaConfig};

fn main() -> qvrp::error::Result<()> {
    let inst = VrpInstance::generate_random(7, 2, 1)?;
    let cfg = QaoaConfig { shots: 50_000, seed: 1, restarts: 3, ..QaoaConfig::default() };

    let (quantum, blocks) = solve_vrp_pld(&inst, &cfg)?;
    println!("7 nodes, 2 vehicles, p = {}", cfg.p);
    println!();
    for (idx, b) in blocks.iter().enumerate() {
        println!(
            "block {idx}: {} qubits, route {:?}, cost {:.4}, feasible shots {}",
            b.qubits, b.route, b.cost, b.result.feasible_hit_count
        );
    }
    println!();

    let heuristic = classical_vrp(&inst, 1)?;
    let oracle = brute_force_vrp(&inst)?;
    println!("merged variational routes: {:?}", quantum.routes);
    println!("  cost {:.4}", quantum.total_cost);
    println!("classical heuristic cost:  {:.4}", heuristic.total_cost);
    println!("exhaustive optimum cost:   {:.4}", oracle.total_cost);
    println!();
    println!(
        "gap to optimum: variational {:+.2}%, heuristic {:+.2}%",
        100.0 * (quantum.total_cost / oracle.total_cost - 1.0),
        100.0 * (heuristic.total_cost / oracle.total_cost - 1.0)
    );
    Ok(())
}
