//! Gate-level circuit representation, QAOA construction, two-qubit lowering,
//! and resource metrics.
//!
//! Angle conventions: RZ(θ) = exp(−i(θ/2)Z), RX(θ) = exp(−i(θ/2)X),
//! RZZ(θ) = exp(−i(θ/2) Z⊗Z). Cost evolution exp(−iγH) then maps an Ising
//! field h to RZ(2γh) and a coupling J to RZZ(2γJ); the constant offset is a
//! global phase and emits nothing.

use std::fmt::Write as _;

use serde::Serialize;

use crate::encode::IsingModel;
use crate::error::{QvrpError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Z(usize),
    RX(usize, f64),
    RZ(usize, f64),
    RZZ(usize, usize, f64),
    CX(usize, usize),
    /// Destructive Z-basis measurement whose ±1 outcome multiplies the
    /// branch weight. Appears only in cut subexperiments.
    MeasZSign(usize),
}

impl Gate {
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Z(q) | Gate::RX(q, _) | Gate::RZ(q, _) => (q, None),
            Gate::MeasZSign(q) => (q, None),
            Gate::RZZ(a, b, _) | Gate::CX(a, b) => (a, Some(b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CircuitMetrics {
    pub qubits: usize,
    /// Longest per-qubit occupancy chain under as-soon-as-possible layering,
    /// measured after lowering RZZ to CX + RZ + CX.
    pub depth: usize,
    /// CX count after lowering.
    pub two_qubit_gates: usize,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit { num_qubits, gates: Vec::new() }
    }

    /// Appends a gate. Panics on out-of-range or duplicate operands; gate
    /// streams are built programmatically, so this is a contract bug, not
    /// input validation.
    pub fn push(&mut self, g: Gate) {
        let (a, b) = g.qubits();
        assert!(a < self.num_qubits, "qubit {a} out of range");
        if let Some(b) = b {
            assert!(b < self.num_qubits, "qubit {b} out of range");
            assert_ne!(a, b, "two-qubit gate needs distinct operands");
        }
        self.gates.push(g);
    }

    pub fn rzz_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::RZZ(..))).count()
    }

    /// Line-oriented dump, one gate per line, angles at 9 significant digits.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            match *g {
                Gate::H(q) => writeln!(out, "H {q}"),
                Gate::X(q) => writeln!(out, "X {q}"),
                Gate::Z(q) => writeln!(out, "Z {q}"),
                Gate::RX(q, t) => writeln!(out, "RX {q} {}", fmt_sig9(t)),
                Gate::RZ(q, t) => writeln!(out, "RZ {q} {}", fmt_sig9(t)),
                Gate::RZZ(a, b, t) => writeln!(out, "RZZ {a} {b} {}", fmt_sig9(t)),
                Gate::CX(c, t) => writeln!(out, "CX {c} {t}"),
                Gate::MeasZSign(q) => writeln!(out, "MEAS_Z_SIGN {q}"),
            }
            .expect("string write");
        }
        out
    }
}

/// Plain decimal with 9 significant digits.
fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Standard QAOA ansatz: Hadamard wall, then per layer the cost evolution
/// (RZ per nonzero field, RZZ per nonzero coupling, ascending qubit order)
/// followed by the transverse-field mixer RX(2β) on every qubit.
pub fn build_qaoa(m: &IsingModel, p: usize, gamma: &[f64], beta: &[f64]) -> Result<Circuit> {
    if p == 0 {
        return Err(QvrpError::Parameter("layer count must be at least 1".into()));
    }
    if gamma.len() != p || beta.len() != p {
        return Err(QvrpError::Parameter(format!(
            "expected {p} gamma and beta values, got {} and {}",
            gamma.len(),
            beta.len()
        )));
    }
    let mut c = Circuit::new(m.num_qubits);
    for q in 0..m.num_qubits {
        c.push(Gate::H(q));
    }
    for layer in 0..p {
        let (g, b) = (gamma[layer], beta[layer]);
        for (q, &hq) in m.h.iter().enumerate() {
            if hq != 0.0 {
                c.push(Gate::RZ(q, 2.0 * g * hq));
            }
        }
        for (&(a, bq), &j) in &m.j {
            if j != 0.0 {
                c.push(Gate::RZZ(a, bq, 2.0 * g * j));
            }
        }
        for q in 0..m.num_qubits {
            c.push(Gate::RX(q, 2.0 * b));
        }
    }
    Ok(c)
}

/// Rewrites every RZZ(a,b,θ) as CX(a,b), RZ(b,θ), CX(a,b).
pub fn lower_rzz(c: &Circuit) -> Circuit {
    let mut out = Circuit::new(c.num_qubits);
    for &g in &c.gates {
        if let Gate::RZZ(a, b, t) = g {
            out.push(Gate::CX(a, b));
            out.push(Gate::RZ(b, t));
            out.push(Gate::CX(a, b));
        } else {
            out.push(g);
        }
    }
    out
}

/// Resource metrics, measured on the lowered form: each gate occupies its
/// operand qubits for one layer and is scheduled as soon as every operand
/// is free.
pub fn metrics(c: &Circuit) -> CircuitMetrics {
    let lowered = lower_rzz(c);
    let mut ready = vec![0usize; lowered.num_qubits];
    let mut two_qubit_gates = 0usize;
    for g in &lowered.gates {
        let (a, b) = g.qubits();
        let layer = match b {
            Some(b) => {
                if matches!(g, Gate::CX(..)) {
                    two_qubit_gates += 1;
                }
                ready[a].max(ready[b]) + 1
            }
            None => ready[a] + 1,
        };
        ready[a] = layer;
        if let Some(b) = b {
            ready[b] = layer;
        }
    }
    CircuitMetrics {
        qubits: lowered.num_qubits,
        depth: ready.into_iter().max().unwrap_or(0),
        two_qubit_gates,
    }
}
