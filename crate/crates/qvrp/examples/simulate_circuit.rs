//! Statevector simulation primitives: gate application, expectation values,
//! sampling, and branch-weighted evaluation of mid-circuit sign
//! measurements (the mechanism behind cut reconstruction).
//!
//! Run with: cargo run -p qvrp --example simulate_circuit

use qvrp::circuit::{Circuit, Gate};
use qvrp::sim::{
    bitstring_msb, evaluate_branches, sample, simulate, signed_z_monomials,
};

fn main() -> qvrp::error::Result<()> {
    // Bell-like correlations from H + CX.
    let mut c = Circuit::new(2);
    c.push(Gate::H(0));
    c.push(Gate::CX(0, 1));
    let state = simulate(&c)?;
    println!("H then CX amplitudes:");
    for (idx, amp) in state.amps.iter().enumerate() {
        println!("  |{}>  {:.4}{:+.4}i", bitstring_msb(idx as u64, 2), amp.re, amp.im);
    }
    println!();

    let counts = sample(&state, 10_000, 7)?;
    println!("10000 shots:");
    for (state, count) in counts {
        println!("  {} -> {count}", bitstring_msb(state, 2));
    }
    println!();

    // Sign-weighted measurement: a qubit rotated by RX(theta) carries
    // <Z> = cos(theta); the signed branch mass recovers exactly that.
    let theta = 0.9f64;
    let mut c = Circuit::new(1);
    c.push(Gate::RX(0, theta));
    c.push(Gate::MeasZSign(0));
    let signed_mass = evaluate_branches(&c, &qvrp::encode::IsingModel {
        num_qubits: 1,
        h: vec![0.0],
        j: std::collections::BTreeMap::new(),
        offset: 1.0,
    })?;
    println!("signed branch mass after RX({theta}) + sign measurement: {signed_mass:.6}");
    println!("cos({theta}) = {:.6}", theta.cos());
    println!();

    // The same machinery evaluates several Z-monomials in one pass.
    let mut c = Circuit::new(3);
    for q in 0..3 {
        c.push(Gate::H(q));
    }
    c.push(Gate::RZZ(0, 1, 1.1));
    c.push(Gate::RZZ(1, 2, 0.4));
    c.push(Gate::RX(1, 0.8));
    let values = signed_z_monomials(&c, &[0b000, 0b001, 0b011, 0b111])?;
    println!("monomial expectations on a 3-qubit circuit:");
    for (mask, value) in [0b000, 0b001, 0b011, 0b111].iter().zip(values) {
        println!("  mask {mask:03b}: {value:+.6}");
    }
    Ok(())
}
