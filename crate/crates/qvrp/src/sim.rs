//! Exact statevector simulation.
//!
//! Indexing: qubit 0 is the least significant bit of the basis-state index.
//! Bitstrings print most-significant-qubit first, so the leftmost character
//! of a printed string is the highest qubit.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::circuit::{Circuit, Gate};
use crate::encode::IsingModel;
use crate::error::{QvrpError, Result};

/// Widest register the dense simulator will allocate. Full uncut VRP
/// circuits (42 to 156 qubits) are intentionally out of reach; they are
/// handled by resource accounting, not simulation.
pub const MAX_SIM_QUBITS: usize = 24;
/// Most mid-circuit sign measurements one branch enumeration will expand.
pub const MAX_BRANCH_MEASUREMENTS: usize = 12;

#[derive(Debug, Clone)]
pub struct StateVector {
    pub num_qubits: usize,
    pub amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { num_qubits, amps }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies a unitary gate in place. Panics on MEAS_Z_SIGN; measurement
    /// handling belongs to the branch evaluator.
    pub fn apply(&mut self, g: Gate) {
        match g {
            Gate::H(q) => self.one_qubit(q, |a, b| {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                (s * (a + b), s * (a - b))
            }),
            Gate::X(q) => self.one_qubit(q, |a, b| (b, a)),
            Gate::Z(q) => self.one_qubit(q, |a, b| (a, -b)),
            Gate::RX(q, t) => {
                let (s, c) = (t / 2.0).sin_cos();
                let is = Complex64::new(0.0, -s);
                self.one_qubit(q, |a, b| (c * a + is * b, is * a + c * b));
            }
            Gate::RZ(q, t) => {
                let (s, c) = (t / 2.0).sin_cos();
                let e_minus = Complex64::new(c, -s);
                let e_plus = Complex64::new(c, s);
                self.one_qubit(q, |a, b| (e_minus * a, e_plus * b));
            }
            Gate::RZZ(q1, q2, t) => {
                let (s, c) = (t / 2.0).sin_cos();
                let e_minus = Complex64::new(c, -s);
                let e_plus = Complex64::new(c, s);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    let parity = (i >> q1 ^ i >> q2) & 1;
                    *amp *= if parity == 0 { e_minus } else { e_plus };
                }
            }
            Gate::CX(ctrl, tgt) => {
                let (cm, tm) = (1usize << ctrl, 1usize << tgt);
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
            Gate::MeasZSign(_) => panic!("measurement gates are not unitary"),
        }
    }

    fn one_qubit(&mut self, q: usize, f: impl Fn(Complex64, Complex64) -> (Complex64, Complex64)) {
        let stride = 1usize << q;
        let mut base = 0;
        while base < self.amps.len() {
            for i in base..base + stride {
                let (a, b) = (self.amps[i], self.amps[i + stride]);
                let (na, nb) = f(a, b);
                self.amps[i] = na;
                self.amps[i + stride] = nb;
            }
            base += 2 * stride;
        }
    }

    /// Zeroes every amplitude whose bit `q` differs from `outcome`; returns
    /// the retained probability mass. The state is left unnormalized.
    fn project(&mut self, q: usize, outcome: bool) -> f64 {
        let mask = 1usize << q;
        let mut kept = 0.0;
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if (i & mask != 0) == outcome {
                kept += amp.norm_sqr();
            } else {
                *amp = Complex64::new(0.0, 0.0);
            }
        }
        kept
    }
}

fn check_width(num_qubits: usize) -> Result<()> {
    if num_qubits > MAX_SIM_QUBITS {
        return Err(QvrpError::Resource(format!(
            "dense simulation is capped at {MAX_SIM_QUBITS} qubits, got {num_qubits}"
        )));
    }
    Ok(())
}

/// Runs a measurement-free circuit from |0…0⟩.
pub fn simulate(c: &Circuit) -> Result<StateVector> {
    check_width(c.num_qubits)?;
    if c.gates.iter().any(|g| matches!(g, Gate::MeasZSign(_))) {
        return Err(QvrpError::Contract(
            "simulate handles unitary circuits; use evaluate_branches for measurements".into(),
        ));
    }
    let mut s = StateVector::zero(c.num_qubits);
    for &g in &c.gates {
        s.apply(g);
    }
    Ok(s)
}

/// ⟨Ψ|H|Ψ⟩ for a diagonal Ising observable: Σ_b |amp_b|² E(b).
pub fn expectation_ising(s: &StateVector, m: &IsingModel) -> Result<f64> {
    if s.num_qubits != m.num_qubits {
        return Err(QvrpError::Contract(format!(
            "state has {} qubits, observable {}",
            s.num_qubits, m.num_qubits
        )));
    }
    let h: Vec<(u64, f64)> =
        m.h.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(q, &v)| (q as u64, v)).collect();
    let j: Vec<(u64, u64, f64)> =
        m.j.iter().map(|(&(a, b), &v)| (a as u64, b as u64, v)).collect();
    let mut total = 0.0;
    for (b, amp) in s.amps.iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let b = b as u64;
        let mut e = m.offset;
        for &(q, hq) in &h {
            e += if b >> q & 1 == 1 { -hq } else { hq };
        }
        for &(qa, qb, jv) in &j {
            e += if (b >> qa ^ b >> qb) & 1 == 1 { -jv } else { jv };
        }
        total += p * e;
    }
    Ok(total)
}

/// Walks a circuit containing MEAS_Z_SIGN gates, expanding both outcomes of
/// every measurement, and hands each unnormalized leaf state and its
/// accumulated outcome sign to `visit`. Branches with zero mass are pruned.
fn for_each_branch(c: &Circuit, visit: &mut impl FnMut(&StateVector, f64)) -> Result<()> {
    check_width(c.num_qubits)?;
    let measurements = c.gates.iter().filter(|g| matches!(g, Gate::MeasZSign(_))).count();
    if measurements > MAX_BRANCH_MEASUREMENTS {
        return Err(QvrpError::Resource(format!(
            "branch enumeration is capped at {MAX_BRANCH_MEASUREMENTS} measurements, got {measurements}"
        )));
    }
    fn descend(
        mut s: StateVector,
        sign: f64,
        gates: &[Gate],
        visit: &mut impl FnMut(&StateVector, f64),
    ) {
        for (i, &g) in gates.iter().enumerate() {
            if let Gate::MeasZSign(q) = g {
                let rest = &gates[i + 1..];
                let mut kept = s.clone();
                if kept.project(q, false) > 0.0 {
                    descend(kept, sign, rest, visit);
                }
                if s.project(q, true) > 0.0 {
                    descend(s, -sign, rest, visit);
                }
                return;
            }
            s.apply(g);
        }
        visit(&s, sign);
    }
    descend(StateVector::zero(c.num_qubits), 1.0, &c.gates, visit);
    Ok(())
}

/// Signed expectation of a diagonal Ising observable over all measurement
/// branches: Σ_branches (outcome-sign product) · Σ_b |amp_b|² E(b). With no
/// measurements this equals the unitary expectation.
pub fn evaluate_branches(c: &Circuit, m: &IsingModel) -> Result<f64> {
    if c.num_qubits != m.num_qubits {
        return Err(QvrpError::Contract(format!(
            "circuit has {} qubits, observable {}",
            c.num_qubits, m.num_qubits
        )));
    }
    let mut total = 0.0;
    let mut err = None;
    for_each_branch(c, &mut |leaf, sign| match expectation_ising(leaf, m) {
        Ok(e) => total += sign * e,
        Err(e) => err = Some(e),
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Signed expectations of Z-monomials: for each bit mask S, returns
/// Σ_branches sign · Σ_b |amp_b|² · (−1)^{|b ∧ S|}. Mask 0 gives the signed
/// branch mass, which is 1 for measurement-free circuits.
pub fn signed_z_monomials(c: &Circuit, masks: &[u64]) -> Result<Vec<f64>> {
    let mut totals = vec![0.0; masks.len()];
    for_each_branch(c, &mut |leaf, sign| {
        for (b, amp) in leaf.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (t, &mask) in masks.iter().enumerate() {
                let parity = (b as u64 & mask).count_ones() & 1;
                totals[t] += if parity == 1 { -sign * p } else { sign * p };
            }
        }
    })?;
    Ok(totals)
}

/// Multinomial shot sampling from |amplitude|². Deterministic per seed.
pub fn sample(s: &StateVector, shots: u64, seed: u64) -> Result<BTreeMap<u64, u64>> {
    if shots == 0 {
        return Err(QvrpError::Parameter("shot count must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(s.amps.len());
    let mut acc = 0.0;
    for amp in &s.amps {
        acc += amp.norm_sqr();
        cumulative.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.gen_range(0.0..total);
        let idx = cumulative.partition_point(|&c| c <= u);
        *counts.entry(idx.min(s.amps.len() - 1) as u64).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Formats a basis-state index with the highest qubit leftmost.
pub fn bitstring_msb(state: u64, num_qubits: usize) -> String {
    (0..num_qubits).rev().map(|q| if state >> q & 1 == 1 { '1' } else { '0' }).collect()
}

/// Parses a most-significant-first bitstring into per-qubit bits
/// (index = qubit).
pub fn parse_bitstring_msb(text: &str) -> Result<Vec<bool>> {
    let mut bits = Vec::with_capacity(text.len());
    for ch in text.chars().rev() {
        match ch {
            '0' => bits.push(false),
            '1' => bits.push(true),
            _ => return Err(QvrpError::Format(format!("bitstring has non-binary char {ch:?}"))),
        }
    }
    Ok(bits)
}
