//! Optimization-model encodings for a TSP/VRP instance.
//!
//! One binary variable per directed edge (n² − n total). The penalty QUBO
//! adds λ-weighted squared degree constraints: every node must be entered
//! and left exactly once, the depot exactly `vehicles` times. The Ising form
//! substitutes x = (1 − Z)/2. The amplitude map is bookkeeping only: it
//! assigns edges to basis states and counts qubits, with no cost operator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{QvrpError, Result};
use crate::instance::{RouteSet, VrpInstance};

/// Penalty QUBO over directed-edge indicator variables.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    pub n: usize,
    pub vehicles: usize,
    pub lambda: f64,
    pub num_vars: usize,
    pub linear: Vec<f64>,
    /// Keyed by unordered variable pair (a, b) with a < b.
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

/// Ising Hamiltonian: offset + Σ h_q Z_q + Σ J_{ab} Z_a Z_b.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub num_qubits: usize,
    pub h: Vec<f64>,
    /// Keyed by unordered qubit pair (a, b) with a < b.
    pub j: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

/// Edge-to-basis-state assignment for amplitude encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeBasisMap {
    pub num_qubits: usize,
    /// Basis state s < n²−n encodes edge `edge_of_state[s]`.
    pub edge_of_state: Vec<(usize, usize)>,
    /// Basis indices beyond the last edge; padding of the register.
    pub unused_states: std::ops::Range<usize>,
}

/// Variable index of directed edge (i, j), enumerating edges in
/// lexicographic order with the diagonal skipped.
pub fn var_of_edge(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + j - usize::from(j > i)
}

/// Inverse of `var_of_edge`.
pub fn edge_of_var(n: usize, q: usize) -> (usize, usize) {
    let i = q / (n - 1);
    let r = q % (n - 1);
    let j = if r >= i { r + 1 } else { r };
    (i, j)
}

/// Qubits needed by the edge encoding: one per directed edge.
pub fn qubit_count_edge(n: usize) -> usize {
    n * n - n
}

/// Penalty weight that makes one unit of constraint violation more expensive
/// than any tour: 2 · n · max(w).
pub fn default_lambda(inst: &VrpInstance) -> f64 {
    2.0 * inst.n as f64 * inst.max_weight()
}

pub fn build_qubo(tsp: &VrpInstance, lambda: f64) -> Result<QuboModel> {
    if !(lambda > 0.0) {
        return Err(QvrpError::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    let n = tsp.n;
    let k = tsp.vehicles as f64;
    let num_vars = qubit_count_edge(n);
    let mut q = QuboModel {
        n,
        vehicles: tsp.vehicles,
        lambda,
        num_vars,
        linear: vec![0.0; num_vars],
        quadratic: BTreeMap::new(),
        offset: 0.0,
    };

    // Objective: traversed edges pay their weight.
    for i in 0..n {
        for j in 0..n {
            if i != j {
                q.linear[var_of_edge(n, i, j)] += tsp.weights[i][j];
            }
        }
    }

    // Squared degree penalties. (Σ x − r)² with binary x expands to
    // (1 − 2r)·Σ x + 2·Σ_{pairs} x x' + r².
    let add_degree_penalty = |vars: Vec<usize>, rhs: f64, q: &mut QuboModel| {
        for &v in &vars {
            q.linear[v] += lambda * (1.0 - 2.0 * rhs);
        }
        for a in 0..vars.len() {
            for b in (a + 1)..vars.len() {
                let key = (vars[a].min(vars[b]), vars[a].max(vars[b]));
                *q.quadratic.entry(key).or_insert(0.0) += 2.0 * lambda;
            }
        }
        q.offset += lambda * rhs * rhs;
    };

    for node in 0..n {
        let rhs = if node == 0 { k } else { 1.0 };
        let outgoing: Vec<usize> =
            (0..n).filter(|&j| j != node).map(|j| var_of_edge(n, node, j)).collect();
        let incoming: Vec<usize> =
            (0..n).filter(|&j| j != node).map(|j| var_of_edge(n, j, node)).collect();
        add_degree_penalty(outgoing, rhs, &mut q);
        add_degree_penalty(incoming, rhs, &mut q);
    }
    Ok(q)
}

impl QuboModel {
    pub fn energy(&self, bits: &[bool]) -> f64 {
        assert_eq!(bits.len(), self.num_vars);
        let mut e = self.offset;
        for (v, &b) in bits.iter().enumerate() {
            if b {
                e += self.linear[v];
            }
        }
        for (&(a, b), &c) in &self.quadratic {
            if bits[a] && bits[b] {
                e += c;
            }
        }
        e
    }

    /// Indicator bit vector of a route set (every traversed directed edge set).
    pub fn route_indicator(&self, rs: &RouteSet) -> Vec<bool> {
        let mut bits = vec![false; self.num_vars];
        for route in &rs.routes {
            for leg in route.windows(2) {
                bits[var_of_edge(self.n, leg[0], leg[1])] = true;
            }
        }
        bits
    }
}

pub fn qubo_to_ising(q: &QuboModel) -> IsingModel {
    let num_qubits = q.num_vars;
    let mut h = vec![0.0; num_qubits];
    let mut j = BTreeMap::new();
    let mut offset = q.offset;

    for (v, &a) in q.linear.iter().enumerate() {
        offset += a / 2.0;
        h[v] -= a / 2.0;
    }
    for (&(a, b), &c) in &q.quadratic {
        offset += c / 4.0;
        h[a] -= c / 4.0;
        h[b] -= c / 4.0;
        *j.entry((a, b)).or_insert(0.0) += c / 4.0;
    }
    IsingModel { num_qubits, h, j, offset }
}

impl IsingModel {
    /// Energy of a computational basis state: bit 0 means Z = +1, bit 1
    /// means Z = −1 (x = (1 − Z)/2).
    pub fn energy_of_index(&self, state: u64) -> f64 {
        let spin = |q: usize| if state >> q & 1 == 1 { -1.0 } else { 1.0 };
        let mut e = self.offset;
        for (q, &hq) in self.h.iter().enumerate() {
            e += hq * spin(q);
        }
        for (&(a, b), &jab) in &self.j {
            e += jab * spin(a) * spin(b);
        }
        e
    }

    pub fn energy_bits(&self, bits: &[bool]) -> f64 {
        assert_eq!(bits.len(), self.num_qubits);
        let mut state = 0u64;
        for (q, &b) in bits.iter().enumerate() {
            if b {
                state |= 1 << q;
            }
        }
        self.energy_of_index(state)
    }

    pub fn to_json_string(&self) -> String {
        let file = IsingFile {
            n_qubits: self.num_qubits,
            h: self
                .h
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(q, &v)| (q.to_string(), v))
                .collect(),
            j: self.j.iter().map(|(&(a, b), &v)| (format!("{a},{b}"), v)).collect(),
            offset: self.offset,
        };
        serde_json::to_string_pretty(&file).expect("ising model serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: IsingFile =
            serde_json::from_str(text).map_err(|e| QvrpError::Format(e.to_string()))?;
        let mut h = vec![0.0; file.n_qubits];
        for (key, v) in &file.h {
            let q: usize = key
                .parse()
                .map_err(|_| QvrpError::Format(format!("bad field key {key:?}")))?;
            if q >= file.n_qubits {
                return Err(QvrpError::Format(format!("field key {q} out of range")));
            }
            h[q] = *v;
        }
        let mut j = BTreeMap::new();
        for (key, v) in &file.j {
            let (a, b) = key
                .split_once(',')
                .ok_or_else(|| QvrpError::Format(format!("bad coupling key {key:?}")))?;
            let a: usize =
                a.parse().map_err(|_| QvrpError::Format(format!("bad coupling key {key:?}")))?;
            let b: usize =
                b.parse().map_err(|_| QvrpError::Format(format!("bad coupling key {key:?}")))?;
            if a >= b || b >= file.n_qubits {
                return Err(QvrpError::Format(format!("coupling key {key:?} out of range")));
            }
            j.insert((a, b), *v);
        }
        Ok(IsingModel { num_qubits: file.n_qubits, h, j, offset: file.offset })
    }
}

#[derive(Serialize, Deserialize)]
struct IsingFile {
    n_qubits: usize,
    h: BTreeMap<String, f64>,
    #[serde(rename = "J")]
    j: BTreeMap<String, f64>,
    offset: f64,
}

pub fn amplitude_basis_map(n: usize) -> Result<AmplitudeBasisMap> {
    if n < 3 {
        return Err(QvrpError::Parameter(format!("amplitude map needs n ≥ 3, got {n}")));
    }
    let edges = qubit_count_edge(n);
    let num_qubits = usize::BITS as usize - (edges - 1).leading_zeros() as usize;
    let edge_of_state = (0..edges).map(|q| edge_of_var(n, q)).collect();
    Ok(AmplitudeBasisMap { num_qubits, edge_of_state, unused_states: edges..(1 << num_qubits) })
}

/// Why a bit assignment is not a feasible route set.
#[derive(Debug, Clone, Default)]
pub struct InfeasibilityReport {
    pub violations: Vec<String>,
    /// Non-depot nodes whose outgoing or incoming degree is not 1.
    pub out_degree_bad: Vec<usize>,
    pub in_degree_bad: Vec<usize>,
    pub depot_out: usize,
    pub depot_in: usize,
    /// Cycles that avoid the depot, listed by ascending smallest member.
    pub subtours: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub enum DecodeOutcome {
    Routes(RouteSet),
    Infeasible(InfeasibilityReport),
}

impl DecodeOutcome {
    pub fn routes(&self) -> Option<&RouteSet> {
        match self {
            DecodeOutcome::Routes(rs) => Some(rs),
            DecodeOutcome::Infeasible(_) => None,
        }
    }
}

/// Interprets set bits as traversed directed edges and checks the full
/// constraint system: per-node degrees, depot degree = vehicles, and no
/// depot-avoiding cycles.
pub fn decode_bitstring(bits: &[bool], q: &QuboModel, tsp: &VrpInstance) -> Result<DecodeOutcome> {
    if bits.len() != q.num_vars {
        return Err(QvrpError::Parameter(format!(
            "expected {} bits, got {}",
            q.num_vars,
            bits.len()
        )));
    }
    let n = q.n;
    let k = q.vehicles;
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut in_degree = vec![0usize; n];
    for (v, &b) in bits.iter().enumerate() {
        if b {
            let (i, j) = edge_of_var(n, v);
            out_edges[i].push(j);
            in_degree[j] += 1;
        }
    }

    let mut report = InfeasibilityReport {
        depot_out: out_edges[0].len(),
        depot_in: in_degree[0],
        ..Default::default()
    };
    for node in 1..n {
        if out_edges[node].len() != 1 {
            report.out_degree_bad.push(node);
            report
                .violations
                .push(format!("node {node} has outgoing degree {}", out_edges[node].len()));
        }
        if in_degree[node] != 1 {
            report.in_degree_bad.push(node);
            report.violations.push(format!("node {node} has incoming degree {}", in_degree[node]));
        }
    }
    if report.depot_out != k {
        report.violations.push(format!("depot outgoing degree {} ≠ {k}", report.depot_out));
    }
    if report.depot_in != k {
        report.violations.push(format!("depot incoming degree {} ≠ {k}", report.depot_in));
    }
    if !report.violations.is_empty() {
        return Ok(DecodeOutcome::Infeasible(report));
    }

    // Degrees are consistent; walk the depot's successors and harvest routes.
    let mut visited = vec![false; n];
    visited[0] = true;
    let mut routes = Vec::with_capacity(k);
    for &start in &out_edges[0] {
        let mut route = vec![0, start];
        let mut here = start;
        while here != 0 {
            if visited[here] {
                // Only possible through a malformed walk; degrees forbid it.
                break;
            }
            visited[here] = true;
            here = out_edges[here][0];
            route.push(here);
        }
        routes.push(route);
    }

    // Anything unvisited sits on a cycle that never touches the depot.
    for node in 1..n {
        if !visited[node] {
            let mut cycle = vec![node];
            visited[node] = true;
            let mut here = out_edges[node][0];
            while here != node {
                visited[here] = true;
                cycle.push(here);
                here = out_edges[here][0];
            }
            report.violations.push(format!("subtour through nodes {cycle:?}"));
            report.subtours.push(cycle);
        }
    }
    if !report.subtours.is_empty() {
        return Ok(DecodeOutcome::Infeasible(report));
    }
    Ok(DecodeOutcome::Routes(tsp.route_set(routes)))
}

/// Exact minimizer over all 2^N basis states. Ties resolve to the lowest
/// state index.
pub fn brute_force_ground_state(m: &IsingModel) -> Result<(u64, f64)> {
    const MAX_QUBITS: usize = 22;
    if m.num_qubits > MAX_QUBITS {
        return Err(QvrpError::Resource(format!(
            "exhaustive sweep is capped at {MAX_QUBITS} qubits, got {}",
            m.num_qubits
        )));
    }
    let mut best_state = 0u64;
    let mut best_energy = f64::INFINITY;
    for state in 0..(1u64 << m.num_qubits) {
        let e = m.energy_of_index(state);
        if e < best_energy {
            best_energy = e;
            best_state = state;
        }
    }
    Ok((best_state, best_energy))
}
