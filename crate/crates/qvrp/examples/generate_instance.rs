//! Instance generation and serialization.
//!
//! Builds a random Euclidean routing instance, prints its weight matrix,
//! saves it to JSON, and reloads it to show the roundtrip is exact.
//!
//! Run with: cargo run -p qvrp --example generate_instance

use qvrp::instance::{count_unique_tours, VrpInstance};

fn main() -> qvrp::error::Result<()> {
    let inst = VrpInstance::generate_random(7, 2, 42)?;
    println!("nodes: {} (node 0 is the depot)", inst.n);
    println!("vehicles: {}", inst.vehicles);
    println!();

    println!("weight matrix (symmetric, zero diagonal):");
    for row in &inst.weights {
        let cells: Vec<String> = row.iter().map(|w| format!("{w:5.3}")).collect();
        println!("  [{}]", cells.join(", "));
    }
    println!("max weight: {:.3}", inst.max_weight());
    println!();

    let path = std::env::temp_dir().join("qvrp_example_instance.json");
    inst.save(&path)?;
    let reloaded = VrpInstance::load(&path)?;
    println!("saved to {} and reloaded: identical = {}", path.display(), reloaded == inst);
    println!();

    println!("unique closed tours by destination count:");
    for destinations in 3..=9 {
        println!("  {destinations} destinations -> {} tours", count_unique_tours(destinations)?);
    }
    Ok(())
}
