//! Problem-level decomposition: split destinations into balanced tour
//! blocks, one per vehicle, minimizing the affinity cut between blocks.
//!
//! Each block becomes an independent single-tour instance over its
//! destinations plus the depot, so a 13-node, 5-vehicle problem needing 156
//! qubits turns into five blocks needing at most 12.
//!
//! Run with: cargo run -p qvrp --example partition_blocks

use qvrp::encode::qubit_count_edge;
use qvrp::instance::VrpInstance;
use qvrp::partition::{extract_tsp, partition, remap_route};

fn main() -> qvrp::error::Result<()> {
    for (n, vehicles) in [(7, 2), (9, 3), (13, 5)] {
        let inst = VrpInstance::generate_random(n, vehicles, 1)?;
        let parts = partition(&inst, 1)?;
        println!("instance n={n}, vehicles={vehicles}");
        println!("  full edge encoding: {} qubits", qubit_count_edge(n));
        println!("  inter-block cut weight: {:.4}", parts.cut_weight);
        for (idx, block) in parts.blocks.iter().enumerate() {
            let tsp = extract_tsp(&inst, block)?;
            println!(
                "  block {idx}: destinations {block:?} -> {} nodes, {} qubits",
                tsp.n,
                qubit_count_edge(tsp.n)
            );
        }
        println!();
    }

    // Routes found in block-local labels map back to original node labels.
    let inst = VrpInstance::generate_random(7, 2, 1)?;
    let parts = partition(&inst, 1)?;
    let block = &parts.blocks[0];
    let local_route = vec![0, 2, 1, 3, 0];
    println!("block {block:?}: local route {local_route:?}");
    println!("  remapped to original labels: {:?}", remap_route(block, &local_route));
    Ok(())
}
