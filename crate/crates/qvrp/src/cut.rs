//! Circuit-level decomposition: bipartition the qubit interaction graph,
//! expand the spanning RZZ gates into quasiprobability terms, evaluate the
//! per-part subexperiments, and knit the expectation value back together.
//!
//! The gate cut for RZZ(θ) used here:
//!
//!   channel(RZZ(θ)) = cos²(θ/2)·I∘I + sin²(θ/2)·Z∘Z
//!                   + (sin θ / 2)·[ M∘S⁺ − M∘S⁻ + S⁺∘M − S⁻∘M ]
//!
//! where S± conjugates by RZ(±π/2) and M is the sign-weighted Z measurement
//! ρ ↦ (Zρ + ρZ)/2. The six signed terms and their sampling weight
//! γ = 1 + 2|sin θ| are pinned by the dense channel-identity test below.
//!
//! Every substituted instruction is diagonal or a Z measurement and lands
//! inside the commuting cost layer, so per-qubit instruction stacks collapse
//! to a canonical form: a Z-rotation class (I, S⁺, Z, S⁻, the quarter-turn
//! group) plus a measurement mode (none / signed / dephased, since two sign
//! measurements square to a dephase). Term assignments folding to the same
//! canonical key are aggregated before any state is simulated.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuit::{metrics, Circuit, CircuitMetrics, Gate};
use crate::encode::IsingModel;
use crate::error::{QvrpError, Result};
use crate::sim::{expectation_ising, signed_z_monomials, simulate};

/// Hard ceiling on cut gates for exact reconstruction; 6^12 term assignments
/// is the most this evaluator will fold.
pub const MAX_CUT_GATES: usize = 12;

const FIND_CUT_RESTARTS: usize = 8;
/// Below this many candidate bipartitions the search is exhaustive.
const EXHAUSTIVE_SPLIT_LIMIT: u128 = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LocalOp {
    Identity,
    PauliZ,
    MeasZSign,
    /// RZ(+π/2).
    PhasePlus,
    /// RZ(−π/2).
    PhaseMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QpdTerm {
    pub coefficient: f64,
    pub op_a: LocalOp,
    pub op_b: LocalOp,
}

/// γ contribution of one cut gate.
pub fn gamma_of_angle(theta: f64) -> f64 {
    1.0 + 2.0 * theta.sin().abs()
}

/// The six-term quasiprobability expansion of RZZ(θ) into local
/// instructions. Σ|coefficients| = 1 + 2|sin θ|.
pub fn qpd_expand(theta: f64) -> [QpdTerm; 6] {
    let half = theta / 2.0;
    let s = theta.sin() / 2.0;
    [
        QpdTerm { coefficient: half.cos().powi(2), op_a: LocalOp::Identity, op_b: LocalOp::Identity },
        QpdTerm { coefficient: half.sin().powi(2), op_a: LocalOp::PauliZ, op_b: LocalOp::PauliZ },
        QpdTerm { coefficient: s, op_a: LocalOp::MeasZSign, op_b: LocalOp::PhasePlus },
        QpdTerm { coefficient: -s, op_a: LocalOp::MeasZSign, op_b: LocalOp::PhaseMinus },
        QpdTerm { coefficient: s, op_a: LocalOp::PhasePlus, op_b: LocalOp::MeasZSign },
        QpdTerm { coefficient: -s, op_a: LocalOp::PhaseMinus, op_b: LocalOp::MeasZSign },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutPlan {
    pub part_a: Vec<usize>,
    pub part_b: Vec<usize>,
    /// Indices into the circuit's gate list of the spanning RZZ gates.
    pub cut_gates: Vec<usize>,
    pub cut_angles: Vec<f64>,
    /// Π (1 + 2|sin θ|); may round to +∞ for pathological synthetic plans,
    /// in which case the log-space report stays exact.
    pub gamma_total: f64,
    pub largest_part_size: usize,
}

impl CutPlan {
    pub fn cuts(&self) -> usize {
        self.cut_gates.len()
    }

    fn uncut(num_qubits: usize) -> CutPlan {
        CutPlan {
            part_a: (0..num_qubits).collect(),
            part_b: Vec::new(),
            cut_gates: Vec::new(),
            cut_angles: Vec::new(),
            gamma_total: 1.0,
            largest_part_size: num_qubits,
        }
    }
}

/// One distinct evaluated unit on a single part: the canonical subcircuit
/// with local instructions substituted, the total signed weight of every
/// term assignment folding onto it (marginalized over the other part), and
/// its canonical key.
#[derive(Debug, Clone)]
pub struct Subexperiment {
    pub circuit: Circuit,
    pub weight: f64,
    pub key: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverheadReport {
    pub cuts: usize,
    pub gamma_total: f64,
    pub gamma_squared: f64,
    pub log10_gamma_total: f64,
    pub log10_gamma_squared: f64,
    /// 6^cuts raw term assignments before canonical-key aggregation.
    pub subexperiment_count: f64,
    pub log10_subexperiment_count: f64,
    /// Distinct part circuits actually simulated; filled after a
    /// reconstruction has run.
    pub memoized_count: Option<u64>,
    pub budget_log10: Option<f64>,
    pub over_budget: bool,
}

/// Exact overhead arithmetic, kept in log space so synthetic plans with
/// hundreds of cuts report cleanly instead of overflowing.
pub fn overhead_report(plan: &CutPlan, budget_log10: Option<f64>) -> OverheadReport {
    let log10_gamma: f64 = plan.cut_angles.iter().map(|&t| gamma_of_angle(t).log10()).sum();
    let cuts = plan.cuts();
    let log10_subs = cuts as f64 * 6f64.log10();
    OverheadReport {
        cuts,
        gamma_total: 10f64.powf(log10_gamma),
        gamma_squared: 10f64.powf(2.0 * log10_gamma),
        log10_gamma_total: log10_gamma,
        log10_gamma_squared: 2.0 * log10_gamma,
        subexperiment_count: 10f64.powf(log10_subs),
        log10_subexperiment_count: log10_subs,
        memoized_count: None,
        budget_log10,
        over_budget: budget_log10.map(|b| log10_gamma > b).unwrap_or(false),
    }
}

struct InteractionGraph {
    num_qubits: usize,
    /// (gate index, qubit, qubit, angle) per RZZ.
    edges: Vec<(usize, usize, usize, f64)>,
    weight: Vec<Vec<u32>>,
}

fn interaction_graph(c: &Circuit) -> Result<InteractionGraph> {
    let mut edges = Vec::new();
    let mut weight = vec![vec![0u32; c.num_qubits]; c.num_qubits];
    for (idx, &g) in c.gates.iter().enumerate() {
        match g {
            Gate::RZZ(a, b, t) => {
                edges.push((idx, a, b, t));
                weight[a][b] += 1;
                weight[b][a] += 1;
            }
            Gate::CX(..) => {
                return Err(QvrpError::Parameter(
                    "cut search needs the unlowered circuit; CX gates are not cuttable".into(),
                ));
            }
            _ => {}
        }
    }
    Ok(InteractionGraph { num_qubits: c.num_qubits, edges, weight })
}

fn spanning_count(g: &InteractionGraph, in_a: &[bool]) -> usize {
    g.edges.iter().filter(|&&(_, a, b, _)| in_a[a] != in_a[b]).count()
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Steepest-descent pair swaps until no swap lowers the spanning count.
fn refine_swap(g: &InteractionGraph, in_a: &mut [bool]) -> usize {
    // ext[q] = coupling multiplicity toward the other part, int[q] within.
    let mut best = spanning_count(g, in_a);
    loop {
        let mut gain_best = 0i64;
        let mut pick = None;
        for a in 0..g.num_qubits {
            if !in_a[a] {
                continue;
            }
            for b in 0..g.num_qubits {
                if in_a[b] {
                    continue;
                }
                let mut d = 0i64;
                for q in 0..g.num_qubits {
                    if q == a || q == b {
                        continue;
                    }
                    let wa = g.weight[a][q] as i64;
                    let wb = g.weight[b][q] as i64;
                    if in_a[q] {
                        d += wa - wb;
                    } else {
                        d += wb - wa;
                    }
                }
                if d > gain_best {
                    gain_best = d;
                    pick = Some((a, b));
                }
            }
        }
        match pick {
            Some((a, b)) => {
                in_a[a] = false;
                in_a[b] = true;
                best -= gain_best as usize;
            }
            None => return best,
        }
    }
}

fn plan_from_assignment(g: &InteractionGraph, in_a: &[bool]) -> CutPlan {
    let part_a: Vec<usize> = (0..g.num_qubits).filter(|&q| in_a[q]).collect();
    let part_b: Vec<usize> = (0..g.num_qubits).filter(|&q| !in_a[q]).collect();
    let mut cut_gates = Vec::new();
    let mut cut_angles = Vec::new();
    let mut gamma = 1.0;
    for &(idx, a, b, t) in &g.edges {
        if in_a[a] != in_a[b] {
            cut_gates.push(idx);
            cut_angles.push(t);
            gamma *= gamma_of_angle(t);
        }
    }
    let largest_part_size = part_a.len().max(part_b.len());
    CutPlan { part_a, part_b, cut_gates, cut_angles, gamma_total: gamma, largest_part_size }
}

/// Bipartitions the interaction graph of a single-cost-layer ansatz,
/// minimizing the number of spanning RZZ gates subject to both parts fitting
/// in `xi_max` qubits. Small registers are searched exhaustively (the result
/// is then seed-independent); larger ones use seeded shuffled restarts with
/// steepest-descent swap refinement. Ties prefer the more balanced split.
pub fn find_cut(c: &Circuit, xi_max: usize, seed: u64) -> Result<CutPlan> {
    if xi_max == 0 {
        return Err(QvrpError::Parameter("width budget must be at least 1".into()));
    }
    let g = interaction_graph(c)?;
    let nq = g.num_qubits;
    if xi_max >= nq {
        return Ok(CutPlan::uncut(nq));
    }
    if nq - xi_max > xi_max {
        return Err(QvrpError::Parameter(format!(
            "no bipartition of {nq} qubits fits within {xi_max} per part"
        )));
    }

    let mut best: Option<(usize, CutPlan)> = None;
    let consider = |count: usize, in_a: &[bool], best: &mut Option<(usize, CutPlan)>| {
        let size_a = in_a.iter().filter(|&&x| x).count();
        let largest = size_a.max(nq - size_a);
        let better = match best {
            None => true,
            Some((c0, p0)) => count < *c0 || (count == *c0 && largest < p0.largest_part_size),
        };
        if better {
            *best = Some((count, plan_from_assignment(&g, in_a)));
        }
    };

    // Part sizes from balanced outward; both parts must fit the budget.
    for size_a in nq.div_ceil(2)..=xi_max {
        if binomial(nq, size_a) <= EXHAUSTIVE_SPLIT_LIMIT {
            // Exhaustive only triggers for at most 18 qubits, so u64 masks
            // suffice; Gosper's hack walks all masks of fixed popcount.
            let mut mask: u64 = (1 << size_a) - 1;
            let limit: u64 = 1 << nq;
            while mask < limit {
                let in_a: Vec<bool> = (0..nq).map(|q| mask >> q & 1 == 1).collect();
                consider(spanning_count(&g, &in_a), &in_a, &mut best);
                let low = mask & mask.wrapping_neg();
                let ripple = mask + low;
                mask = (((ripple ^ mask) >> 2) / low) | ripple;
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (size_a as u64) << 32);
            for _ in 0..FIND_CUT_RESTARTS {
                let mut order: Vec<usize> = (0..nq).collect();
                order.shuffle(&mut rng);
                let mut in_a = vec![false; nq];
                for &q in &order[..size_a] {
                    in_a[q] = true;
                }
                let count = refine_swap(&g, &mut in_a);
                consider(count, &in_a, &mut best);
            }
        }
    }
    Ok(best.expect("at least one admissible split").1)
}

/// Packed per-qubit instruction stack: low 2 bits the quarter-turn class,
/// next 2 bits the measurement mode (0 none, 1 signed, 2 dephased).
fn fold_op(key: u128, local_qubit: usize, op: LocalOp) -> u128 {
    let shift = 4 * local_qubit;
    let nibble = (key >> shift & 0xF) as u8;
    let (mut z4, mut meas) = (nibble & 0b11, nibble >> 2);
    match op {
        LocalOp::Identity => {}
        LocalOp::PhasePlus => z4 = (z4 + 1) & 0b11,
        LocalOp::PauliZ => z4 = (z4 + 2) & 0b11,
        LocalOp::PhaseMinus => z4 = (z4 + 3) & 0b11,
        // M·M dephases; a further M measures the already-dephased state.
        LocalOp::MeasZSign => meas = if meas == 1 { 2 } else { 1 },
    }
    (key & !(0xF << shift)) | (((meas << 2 | z4) as u128) << shift)
}

struct PartLayout {
    /// local index per global qubit, or usize::MAX.
    local_of: Vec<usize>,
    qubits: Vec<usize>,
}

impl PartLayout {
    fn new(num_qubits: usize, part: &[usize]) -> Self {
        let mut local_of = vec![usize::MAX; num_qubits];
        for (i, &q) in part.iter().enumerate() {
            local_of[q] = i;
        }
        PartLayout { local_of, qubits: part.to_vec() }
    }

    fn local_mask(&self, global_mask: u64) -> u64 {
        let mut m = 0u64;
        for (i, &q) in self.qubits.iter().enumerate() {
            if global_mask >> q & 1 == 1 {
                m |= 1 << i;
            }
        }
        m
    }
}

fn validate_plan(c: &Circuit, plan: &CutPlan) -> Result<()> {
    let nq = c.num_qubits;
    let mut seen = vec![false; nq];
    for &q in plan.part_a.iter().chain(&plan.part_b) {
        if q >= nq || seen[q] {
            return Err(QvrpError::Contract(format!("plan parts are not a partition: qubit {q}")));
        }
        seen[q] = true;
    }
    if seen.iter().any(|&s| !s) {
        return Err(QvrpError::Contract("plan parts do not cover the register".into()));
    }
    if plan.largest_part_size != plan.part_a.len().max(plan.part_b.len()) {
        return Err(QvrpError::Contract("plan largest_part_size is inconsistent".into()));
    }
    let mut in_a = vec![false; nq];
    for &q in &plan.part_a {
        in_a[q] = true;
    }
    let cut_set: std::collections::BTreeSet<usize> = plan.cut_gates.iter().copied().collect();
    if cut_set.len() != plan.cut_gates.len() || plan.cut_angles.len() != plan.cut_gates.len() {
        return Err(QvrpError::Contract("plan cut lists are malformed".into()));
    }
    for (&idx, &angle) in plan.cut_gates.iter().zip(&plan.cut_angles) {
        match c.gates.get(idx) {
            Some(&Gate::RZZ(a, b, t)) if in_a[a] != in_a[b] => {
                if (t - angle).abs() > 1e-12 {
                    return Err(QvrpError::Contract(format!(
                        "plan angle {angle} disagrees with gate {idx} angle {t}"
                    )));
                }
            }
            _ => {
                return Err(QvrpError::Contract(format!(
                    "cut index {idx} is not a spanning RZZ gate"
                )));
            }
        }
    }
    for (idx, &g) in c.gates.iter().enumerate() {
        match g {
            Gate::RZZ(a, b, _) if in_a[a] != in_a[b] && !cut_set.contains(&idx) => {
                return Err(QvrpError::Contract(format!(
                    "gate {idx} spans the parts but is not cut"
                )));
            }
            Gate::CX(a, b) if in_a[a] != in_a[b] => {
                return Err(QvrpError::Contract(format!("CX gate {idx} spans the parts")));
            }
            _ => {}
        }
    }
    // Substituted instructions commute only inside one diagonal block; every
    // cut gate must sit in a single RZ/RZZ run (true for one cost layer).
    if let (Some(&first), Some(&last)) = (plan.cut_gates.first(), plan.cut_gates.iter().max()) {
        for idx in first..=last {
            if !matches!(c.gates[idx], Gate::RZ(..) | Gate::RZZ(..)) {
                return Err(QvrpError::Contract(
                    "cut gates span more than one diagonal block; cut a single-layer ansatz"
                        .into(),
                ));
            }
        }
    }
    Ok(())
}

/// Emits the canonical instruction stack for one qubit of a part.
fn push_key_ops(c: &mut Circuit, local: usize, nibble: u8) {
    match nibble & 0b11 {
        0 => {}
        1 => c.push(Gate::RZ(local, FRAC_PI_2)),
        2 => c.push(Gate::Z(local)),
        _ => c.push(Gate::RZ(local, -FRAC_PI_2)),
    }
    match nibble >> 2 {
        0 => {}
        1 => c.push(Gate::MeasZSign(local)),
        _ => {
            c.push(Gate::MeasZSign(local));
            c.push(Gate::MeasZSign(local));
        }
    }
}

/// Builds one part's subcircuit for a canonical key. Substituted
/// instructions are anchored at the first cut gate's position; everything in
/// the cost block commutes, so the anchor is a convention, not a choice.
fn build_part_circuit(c: &Circuit, plan: &CutPlan, layout: &PartLayout, key: u128) -> Circuit {
    let cut_set: std::collections::BTreeSet<usize> = plan.cut_gates.iter().copied().collect();
    let first_cut = plan.cut_gates.first().copied();
    let mut out = Circuit::new(layout.qubits.len());
    for (idx, &g) in c.gates.iter().enumerate() {
        if Some(idx) == first_cut {
            for local in 0..layout.qubits.len() {
                let nibble = (key >> (4 * local) & 0xF) as u8;
                push_key_ops(&mut out, local, nibble);
            }
        }
        if cut_set.contains(&idx) {
            continue;
        }
        let l = |q: usize| layout.local_of[q];
        match g {
            Gate::H(q) if l(q) != usize::MAX => out.push(Gate::H(l(q))),
            Gate::X(q) if l(q) != usize::MAX => out.push(Gate::X(l(q))),
            Gate::Z(q) if l(q) != usize::MAX => out.push(Gate::Z(l(q))),
            Gate::RX(q, t) if l(q) != usize::MAX => out.push(Gate::RX(l(q), t)),
            Gate::RZ(q, t) if l(q) != usize::MAX => out.push(Gate::RZ(l(q), t)),
            Gate::MeasZSign(q) if l(q) != usize::MAX => out.push(Gate::MeasZSign(l(q))),
            Gate::RZZ(a, b, t) if l(a) != usize::MAX && l(b) != usize::MAX => {
                out.push(Gate::RZZ(l(a), l(b), t));
            }
            Gate::CX(a, b) if l(a) != usize::MAX && l(b) != usize::MAX => {
                out.push(Gate::CX(l(a), l(b)));
            }
            _ => {}
        }
    }
    out
}

/// Neumaier-compensated accumulator; the reconstruction sum mixes huge
/// positive and negative weights, plain summation loses the 1e−6 target.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Reconstruction bookkeeping for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionStats {
    pub term_assignments: f64,
    pub distinct_key_pairs: u64,
    pub memoized_part_circuits: u64,
}

struct CutEndpoint {
    /// (side: 0 = A / 1 = B, local qubit) for the gate's first and second
    /// operand respectively.
    first: (u8, usize),
    second: (u8, usize),
    theta: f64,
}

fn monomial_table(m: &IsingModel) -> Vec<(f64, u64)> {
    let mut monomials = vec![(m.offset, 0u64)];
    for (q, &hq) in m.h.iter().enumerate() {
        if hq != 0.0 {
            monomials.push((hq, 1u64 << q));
        }
    }
    for (&(a, b), &jv) in &m.j {
        if jv != 0.0 {
            monomials.push((jv, 1u64 << a | 1u64 << b));
        }
    }
    monomials
}

fn reconstruct_impl(
    c: &Circuit,
    plan: &CutPlan,
    m: &IsingModel,
    use_cache: bool,
) -> Result<(f64, ReconstructionStats)> {
    if c.num_qubits != m.num_qubits {
        return Err(QvrpError::Contract(format!(
            "circuit has {} qubits, observable {}",
            c.num_qubits, m.num_qubits
        )));
    }
    validate_plan(c, plan)?;
    if plan.cuts() == 0 {
        let value = expectation_ising(&simulate(c)?, m)?;
        let stats = ReconstructionStats {
            term_assignments: 1.0,
            distinct_key_pairs: 1,
            memoized_part_circuits: 0,
        };
        return Ok((value, stats));
    }
    if plan.cuts() > MAX_CUT_GATES {
        let report = overhead_report(plan, None);
        return Err(QvrpError::Resource(format!(
            "{} cuts give sampling overhead gamma = 10^{:.2} ({} term assignments); \
             exact reconstruction is capped at {MAX_CUT_GATES} cuts",
            plan.cuts(),
            report.log10_gamma_total,
            report.subexperiment_count,
        )));
    }

    let layout_a = PartLayout::new(c.num_qubits, &plan.part_a);
    let layout_b = PartLayout::new(c.num_qubits, &plan.part_b);
    let mut in_a = vec![false; c.num_qubits];
    for &q in &plan.part_a {
        in_a[q] = true;
    }
    let endpoints: Vec<CutEndpoint> = plan
        .cut_gates
        .iter()
        .map(|&idx| {
            let Gate::RZZ(a, b, t) = c.gates[idx] else { unreachable!("validated above") };
            let side = |q: usize| -> (u8, usize) {
                if in_a[q] {
                    (0, layout_a.local_of[q])
                } else {
                    (1, layout_b.local_of[q])
                }
            };
            CutEndpoint { first: side(a), second: side(b), theta: t }
        })
        .collect();

    // Fold the 6^k term product into aggregated weights per canonical key
    // pair. Equal partial stacks merge as soon as they appear, so the map
    // stays near the final distinct-key count instead of 6^k.
    let mut weights: BTreeMap<(u128, u128), f64> = BTreeMap::new();
    weights.insert((0, 0), 1.0);
    for ep in &endpoints {
        let terms = qpd_expand(ep.theta);
        let mut next: BTreeMap<(u128, u128), f64> = BTreeMap::new();
        for (&(ka, kb), &w) in &weights {
            for term in &terms {
                if term.coefficient == 0.0 {
                    continue;
                }
                let mut ka2 = ka;
                let mut kb2 = kb;
                for (op, &(side, local)) in
                    [(term.op_a, &ep.first), (term.op_b, &ep.second)]
                {
                    if side == 0 {
                        ka2 = fold_op(ka2, local, op);
                    } else {
                        kb2 = fold_op(kb2, local, op);
                    }
                }
                *next.entry((ka2, kb2)).or_insert(0.0) += w * term.coefficient;
            }
        }
        weights = next;
    }

    // Observable monomials restricted to each part, deduplicated.
    let monomials = monomial_table(m);
    let mut masks_a: Vec<u64> = Vec::new();
    let mut masks_b: Vec<u64> = Vec::new();
    let mut index_a: BTreeMap<u64, usize> = BTreeMap::new();
    let mut index_b: BTreeMap<u64, usize> = BTreeMap::new();
    let mut split: Vec<(f64, usize, usize)> = Vec::with_capacity(monomials.len());
    for &(coeff, mask) in &monomials {
        let la = layout_a.local_mask(mask);
        let lb = layout_b.local_mask(mask);
        let ia = *index_a.entry(la).or_insert_with(|| {
            masks_a.push(la);
            masks_a.len() - 1
        });
        let ib = *index_b.entry(lb).or_insert_with(|| {
            masks_b.push(lb);
            masks_b.len() - 1
        });
        split.push((coeff, ia, ib));
    }

    let mut cache_a: BTreeMap<u128, Vec<f64>> = BTreeMap::new();
    let mut cache_b: BTreeMap<u128, Vec<f64>> = BTreeMap::new();
    let mut evaluated: u64 = 0;
    let part_values = |key: u128,
                           plan: &CutPlan,
                           layout: &PartLayout,
                           masks: &[u64],
                           cache: &mut BTreeMap<u128, Vec<f64>>,
                           evaluated: &mut u64|
     -> Result<Vec<f64>> {
        if use_cache {
            if let Some(v) = cache.get(&key) {
                return Ok(v.clone());
            }
        }
        let circuit = build_part_circuit(c, plan, layout, key);
        let values = signed_z_monomials(&circuit, masks)?;
        *evaluated += 1;
        if use_cache {
            cache.insert(key, values.clone());
        }
        Ok(values)
    };

    let mut total = Compensated::default();
    let distinct_pairs = weights.len() as u64;
    for (&(ka, kb), &w) in &weights {
        if w == 0.0 {
            continue;
        }
        let va = part_values(ka, plan, &layout_a, &masks_a, &mut cache_a, &mut evaluated)?;
        let vb = part_values(kb, plan, &layout_b, &masks_b, &mut cache_b, &mut evaluated)?;
        let mut inner = 0.0;
        for &(coeff, ia, ib) in &split {
            inner += coeff * va[ia] * vb[ib];
        }
        total.add(w * inner);
    }
    let stats = ReconstructionStats {
        term_assignments: 6f64.powi(plan.cuts() as i32),
        distinct_key_pairs: distinct_pairs,
        memoized_part_circuits: if use_cache {
            (cache_a.len() + cache_b.len()) as u64
        } else {
            evaluated
        },
    };
    Ok((total.value(), stats))
}

/// Exact ⟨Ĥ_c⟩ of the uncut circuit, computed from per-part subexperiments
/// only: Ĥ_c is a sum of Z-monomials, each of which factors across the
/// bipartition, so per-part signed expectations multiply term by term.
pub fn reconstruct_expectation(c: &Circuit, plan: &CutPlan, m: &IsingModel) -> Result<f64> {
    reconstruct_impl(c, plan, m, true).map(|(v, _)| v)
}

/// Reconstruction plus bookkeeping (term assignments, distinct canonical key
/// pairs, simulated part circuits). `use_cache: false` re-simulates every
/// key pair; values must not change.
pub fn reconstruct_with_stats(
    c: &Circuit,
    plan: &CutPlan,
    m: &IsingModel,
    use_cache: bool,
) -> Result<(f64, ReconstructionStats)> {
    reconstruct_impl(c, plan, m, use_cache)
}

/// Distinct canonical subexperiments for each part, with marginal signed
/// weights (assignments folding to the same part key, summed over the other
/// part). Exact-zero marginals are dropped.
pub fn subexperiments(
    c: &Circuit,
    plan: &CutPlan,
) -> Result<(Vec<Subexperiment>, Vec<Subexperiment>)> {
    validate_plan(c, plan)?;
    if plan.cuts() > MAX_CUT_GATES {
        return Err(QvrpError::Resource(format!(
            "subexperiment enumeration is capped at {MAX_CUT_GATES} cuts, got {}",
            plan.cuts()
        )));
    }
    let layout_a = PartLayout::new(c.num_qubits, &plan.part_a);
    let layout_b = PartLayout::new(c.num_qubits, &plan.part_b);
    let mut in_a = vec![false; c.num_qubits];
    for &q in &plan.part_a {
        in_a[q] = true;
    }
    let mut marg_a: BTreeMap<u128, f64> = BTreeMap::new();
    let mut marg_b: BTreeMap<u128, f64> = BTreeMap::new();
    marg_a.insert(0, 1.0);
    marg_b.insert(0, 1.0);
    // Marginal fold: each cut applies one joint term; on the side a given
    // endpoint does not touch, only the coefficient lands.
    let fold_part = |marg: &mut BTreeMap<u128, f64>,
                         layout: &PartLayout,
                         side_is_a: bool| {
        for &idx in &plan.cut_gates {
            let Gate::RZZ(a, b, t) = c.gates[idx] else { unreachable!("validated above") };
            let prev = std::mem::take(marg);
            for (&k, &w) in &prev {
                for term in qpd_expand(t) {
                    if term.coefficient == 0.0 {
                        continue;
                    }
                    let mut k2 = k;
                    if in_a[a] == side_is_a {
                        k2 = fold_op(k2, layout.local_of[a], term.op_a);
                    }
                    if in_a[b] == side_is_a {
                        k2 = fold_op(k2, layout.local_of[b], term.op_b);
                    }
                    *marg.entry(k2).or_insert(0.0) += w * term.coefficient;
                }
            }
        }
    };
    fold_part(&mut marg_a, &layout_a, true);
    fold_part(&mut marg_b, &layout_b, false);
    let build = |marg: BTreeMap<u128, f64>, layout: &PartLayout| -> Vec<Subexperiment> {
        marg.into_iter()
            .filter(|&(_, w)| w != 0.0)
            .map(|(key, weight)| Subexperiment {
                circuit: build_part_circuit(c, plan, layout, key),
                weight,
                key,
            })
            .collect()
    };
    Ok((build(marg_a, &layout_a), build(marg_b, &layout_b)))
}

/// Metrics of the wider part's subexperiment template, with a worst-case
/// single-qubit substitution occupying each cut endpoint.
pub fn largest_subcircuit_metrics(c: &Circuit, plan: &CutPlan) -> Result<CircuitMetrics> {
    validate_plan(c, plan)?;
    if plan.cuts() == 0 {
        return Ok(metrics(c));
    }
    let part =
        if plan.part_a.len() >= plan.part_b.len() { &plan.part_a } else { &plan.part_b };
    let layout = PartLayout::new(c.num_qubits, part);
    let cut_set: std::collections::BTreeSet<usize> = plan.cut_gates.iter().copied().collect();
    let mut out = Circuit::new(part.len());
    for (idx, &g) in c.gates.iter().enumerate() {
        let l = |q: usize| layout.local_of[q];
        if cut_set.contains(&idx) {
            // Worst case: the endpoint on this part carries one instruction.
            let Gate::RZZ(a, b, _) = g else { unreachable!("validated above") };
            for q in [a, b] {
                if l(q) != usize::MAX {
                    out.push(Gate::RZ(l(q), FRAC_PI_2));
                }
            }
            continue;
        }
        match g {
            Gate::H(q) if l(q) != usize::MAX => out.push(Gate::H(l(q))),
            Gate::X(q) if l(q) != usize::MAX => out.push(Gate::X(l(q))),
            Gate::Z(q) if l(q) != usize::MAX => out.push(Gate::Z(l(q))),
            Gate::RX(q, t) if l(q) != usize::MAX => out.push(Gate::RX(l(q), t)),
            Gate::RZ(q, t) if l(q) != usize::MAX => out.push(Gate::RZ(l(q), t)),
            Gate::MeasZSign(q) if l(q) != usize::MAX => out.push(Gate::MeasZSign(l(q))),
            Gate::RZZ(a, b, t) if l(a) != usize::MAX && l(b) != usize::MAX => {
                out.push(Gate::RZZ(l(a), l(b), t));
            }
            Gate::CX(a, b) if l(a) != usize::MAX && l(b) != usize::MAX => {
                out.push(Gate::CX(l(a), l(b)));
            }
            _ => {}
        }
    }
    Ok(metrics(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_qaoa;
    use crate::encode::{build_qubo, default_lambda, qubo_to_ising};
    use crate::instance::VrpInstance;
    use num_complex::Complex64;
    use rand::Rng;

    // Dense 4x4 channel oracle. Row-major matrices over (q1, q0) indexing,
    // qubit 0 least significant.
    type Mat = [Complex64; 16];

    fn zeros() -> Mat {
        [Complex64::new(0.0, 0.0); 16]
    }

    fn mat_mul(x: &Mat, y: &Mat) -> Mat {
        let mut out = zeros();
        for r in 0..4 {
            for k in 0..4 {
                let v = x[4 * r + k];
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..4 {
                    out[4 * r + c] += v * y[4 * k + c];
                }
            }
        }
        out
    }

    fn dagger(x: &Mat) -> Mat {
        let mut out = zeros();
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = x[4 * c + r].conj();
            }
        }
        out
    }

    fn one_qubit_on(q: usize, m2: [Complex64; 4]) -> Mat {
        let mut out = zeros();
        for r in 0..4 {
            for c in 0..4 {
                let (rq, cq) = (r >> q & 1, c >> q & 1);
                let (ro, co) = (r >> (1 - q) & 1, c >> (1 - q) & 1);
                if ro == co {
                    out[4 * r + c] = m2[2 * rq + cq];
                }
            }
        }
        out
    }

    fn z_mat(q: usize) -> Mat {
        one_qubit_on(
            q,
            [
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-1.0, 0.0),
            ],
        )
    }

    fn rz_mat(q: usize, theta: f64) -> Mat {
        one_qubit_on(
            q,
            [
                Complex64::from_polar(1.0, -theta / 2.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::from_polar(1.0, theta / 2.0),
            ],
        )
    }

    fn rzz_mat(theta: f64) -> Mat {
        let mut out = zeros();
        for b in 0..4 {
            let parity = (b ^ (b >> 1)) & 1;
            let phase = if parity == 0 { -theta / 2.0 } else { theta / 2.0 };
            out[4 * b + b] = Complex64::from_polar(1.0, phase);
        }
        out
    }

    fn apply_local(op: LocalOp, q: usize, rho: &Mat) -> Mat {
        match op {
            LocalOp::Identity => *rho,
            LocalOp::PauliZ => {
                let z = z_mat(q);
                mat_mul(&mat_mul(&z, rho), &dagger(&z))
            }
            LocalOp::PhasePlus => {
                let u = rz_mat(q, FRAC_PI_2);
                mat_mul(&mat_mul(&u, rho), &dagger(&u))
            }
            LocalOp::PhaseMinus => {
                let u = rz_mat(q, -FRAC_PI_2);
                mat_mul(&mat_mul(&u, rho), &dagger(&u))
            }
            LocalOp::MeasZSign => {
                let z = z_mat(q);
                let mut out = zeros();
                let left = mat_mul(&z, rho);
                let right = mat_mul(rho, &z);
                for i in 0..16 {
                    out[i] = (left[i] + right[i]) * 0.5;
                }
                out
            }
        }
    }

    fn random_density(rng: &mut ChaCha8Rng) -> Mat {
        let mut a = zeros();
        for v in a.iter_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let mut rho = mat_mul(&a, &dagger(&a));
        let trace: f64 = (0..4).map(|i| rho[4 * i + i].re).sum();
        for v in rho.iter_mut() {
            *v /= trace;
        }
        rho
    }

    #[test]
    fn qpd_channel_matches_the_exact_gate_on_random_densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let thetas = [
            0.0,
            std::f64::consts::PI / 7.0,
            -std::f64::consts::PI / 7.0,
            std::f64::consts::FRAC_PI_4,
            FRAC_PI_2,
        ];
        for &theta in &thetas {
            let u = rzz_mat(theta);
            let udag = dagger(&u);
            let terms = qpd_expand(theta);
            for _ in 0..50 {
                let rho = random_density(&mut rng);
                let exact = mat_mul(&mat_mul(&u, &rho), &udag);
                let mut knit = zeros();
                for term in &terms {
                    let step = apply_local(term.op_a, 0, &rho);
                    let step = apply_local(term.op_b, 1, &step);
                    for i in 0..16 {
                        knit[i] += step[i] * term.coefficient;
                    }
                }
                for i in 0..16 {
                    assert!(
                        (knit[i] - exact[i]).norm() < 1e-9,
                        "theta {theta}: entry {i}: {} vs {}",
                        knit[i],
                        exact[i]
                    );
                }
            }
        }
    }

    #[test]
    fn qpd_terms_are_frozen() {
        let theta = std::f64::consts::FRAC_PI_4;
        let t = qpd_expand(theta);
        let s = theta.sin() / 2.0;
        assert_eq!(t[0].op_a, LocalOp::Identity);
        assert_eq!(t[0].op_b, LocalOp::Identity);
        assert!((t[0].coefficient - (theta / 2.0).cos().powi(2)).abs() < 1e-15);
        assert_eq!(t[1].op_a, LocalOp::PauliZ);
        assert_eq!(t[1].op_b, LocalOp::PauliZ);
        assert!((t[1].coefficient - (theta / 2.0).sin().powi(2)).abs() < 1e-15);
        let cross: Vec<(f64, LocalOp, LocalOp)> =
            t[2..].iter().map(|x| (x.coefficient, x.op_a, x.op_b)).collect();
        assert_eq!(
            cross,
            vec![
                (s, LocalOp::MeasZSign, LocalOp::PhasePlus),
                (-s, LocalOp::MeasZSign, LocalOp::PhaseMinus),
                (s, LocalOp::PhasePlus, LocalOp::MeasZSign),
                (-s, LocalOp::PhaseMinus, LocalOp::MeasZSign),
            ]
        );

        let gamma: f64 = t.iter().map(|x| x.coefficient.abs()).sum();
        assert!((gamma - gamma_of_angle(theta)).abs() < 1e-12);
        assert!((gamma_of_angle(FRAC_PI_2) - 3.0).abs() < 1e-15);

        let at_zero = qpd_expand(0.0);
        assert_eq!(at_zero.iter().filter(|x| x.coefficient != 0.0).count(), 1);
        assert!((at_zero[0].coefficient - 1.0).abs() < 1e-15);
    }

    fn qaoa_circuit(n: usize, seed: u64, gamma: f64, beta: f64) -> (Circuit, IsingModel) {
        let inst = VrpInstance::generate_random(n, 1, seed).unwrap();
        let q = build_qubo(&inst, default_lambda(&inst)).unwrap();
        let m = qubo_to_ising(&q);
        let c = build_qaoa(&m, 1, &[gamma], &[beta]).unwrap();
        (c, m)
    }

    #[test]
    fn balanced_cut_anchors() {
        let (c4, _) = qaoa_circuit(4, 3, 0.3, 0.5);
        let plan = find_cut(&c4, 6, 0).unwrap();
        assert_eq!(plan.part_a.len(), 6);
        assert_eq!(plan.part_b.len(), 6);
        assert_eq!(plan.cuts(), 8);
        assert_eq!(plan.largest_part_size, 6);

        let (c3, _) = qaoa_circuit(3, 3, 0.3, 0.5);
        let plan = find_cut(&c3, 3, 0).unwrap();
        assert_eq!(plan.cuts(), 2);
        assert_eq!(plan.largest_part_size, 3);

        // Exhaustive search makes the anchors seed-independent.
        for seed in 1..4 {
            assert_eq!(find_cut(&c4, 6, seed).unwrap().cuts(), 8);
        }
    }

    #[test]
    fn degenerate_budgets() {
        let (c, _) = qaoa_circuit(3, 1, 0.2, 0.4);
        let plan = find_cut(&c, 6, 0).unwrap();
        assert_eq!(plan.cuts(), 0);
        assert_eq!(plan.gamma_total, 1.0);
        assert_eq!(plan.part_b.len(), 0);

        assert!(find_cut(&c, 2, 0).is_err());
        assert!(find_cut(&c, 0, 0).is_err());
    }

    #[test]
    fn subcircuit_metric_anchors() {
        let (c4, _) = qaoa_circuit(4, 9, 0.7, 0.2);
        let plan = find_cut(&c4, 6, 0).unwrap();
        let m = largest_subcircuit_metrics(&c4, &plan).unwrap();
        assert_eq!(m.qubits, 6);
        assert_eq!(m.two_qubit_gates, 16);

        let (c3, _) = qaoa_circuit(3, 9, 0.7, 0.2);
        let plan = find_cut(&c3, 3, 0).unwrap();
        let m = largest_subcircuit_metrics(&c3, &plan).unwrap();
        assert_eq!(m.qubits, 3);
        assert_eq!(m.two_qubit_gates, 4);

        let uncut = CutPlan::uncut(c3.num_qubits);
        assert_eq!(largest_subcircuit_metrics(&c3, &uncut).unwrap(), metrics(&c3));
    }

    #[test]
    fn reconstruction_matches_uncut_small() {
        for seed in [0u64, 1] {
            let inst = VrpInstance::generate_random(3, 1, seed).unwrap();
            let q = build_qubo(&inst, default_lambda(&inst)).unwrap();
            let m = qubo_to_ising(&q);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 10);
            for _ in 0..4 {
                let gamma = rng.gen_range(-1.0..1.0);
                let beta = rng.gen_range(-1.0..1.0);
                let c = build_qaoa(&m, 1, &[gamma], &[beta]).unwrap();
                let uncut = expectation_ising(&simulate(&c).unwrap(), &m).unwrap();
                let plan = find_cut(&c, 3, seed).unwrap();
                let rec = reconstruct_expectation(&c, &plan, &m).unwrap();
                assert!(
                    (rec - uncut).abs() < 1e-6,
                    "seed {seed}: reconstructed {rec} vs uncut {uncut}"
                );
            }
        }
    }

    #[test]
    fn reconstruction_matches_uncut_with_eight_cuts() {
        let (c, m) = qaoa_circuit(4, 2, 0.37, 0.61);
        let uncut = expectation_ising(&simulate(&c).unwrap(), &m).unwrap();
        let plan = find_cut(&c, 6, 0).unwrap();
        let (rec, stats) = reconstruct_with_stats(&c, &plan, &m, true).unwrap();
        assert!((rec - uncut).abs() < 1e-6, "reconstructed {rec} vs uncut {uncut}");
        assert_eq!(stats.term_assignments, 6f64.powi(8));
        assert!(stats.distinct_key_pairs < 6u64.pow(8));
        assert!(stats.memoized_part_circuits > 0);
    }

    #[test]
    fn zero_cut_plan_reproduces_direct_simulation() {
        let (c, m) = qaoa_circuit(3, 7, 0.51, 0.13);
        let plan = CutPlan::uncut(c.num_qubits);
        let direct = expectation_ising(&simulate(&c).unwrap(), &m).unwrap();
        let rec = reconstruct_expectation(&c, &plan, &m).unwrap();
        assert_eq!(rec, direct);
    }

    #[test]
    fn cache_does_not_change_values() {
        let (c, m) = qaoa_circuit(3, 4, 0.29, 0.83);
        let plan = find_cut(&c, 3, 1).unwrap();
        let (with_cache, s1) = reconstruct_with_stats(&c, &plan, &m, true).unwrap();
        let (without, s2) = reconstruct_with_stats(&c, &plan, &m, false).unwrap();
        assert!((with_cache - without).abs() < 1e-12);
        assert_eq!(s1.distinct_key_pairs, s2.distinct_key_pairs);
        assert!(s1.memoized_part_circuits <= s2.memoized_part_circuits);
    }

    #[test]
    fn overhead_arithmetic() {
        let plan = CutPlan {
            part_a: vec![0],
            part_b: vec![1],
            cut_gates: (0..8).collect(),
            cut_angles: vec![FRAC_PI_2; 8],
            gamma_total: 3f64.powi(8),
            largest_part_size: 1,
        };
        let report = overhead_report(&plan, None);
        assert!((report.gamma_total - 6561.0).abs() < 1e-6);
        assert!((report.subexperiment_count - 6f64.powi(8)).abs() < 0.5);
        assert!(!report.over_budget);

        let uncut = CutPlan::uncut(4);
        assert_eq!(overhead_report(&uncut, None).gamma_total, 1.0);

        let monster = CutPlan {
            part_a: vec![0],
            part_b: vec![1],
            cut_gates: (0..500).collect(),
            cut_angles: vec![FRAC_PI_2; 500],
            gamma_total: f64::INFINITY,
            largest_part_size: 1,
        };
        let report = overhead_report(&monster, Some(200.0));
        assert!((report.log10_gamma_total - 500.0 * 3f64.log10()).abs() < 1e-9);
        assert!((report.log10_gamma_total - 238.56).abs() < 0.01);
        assert!(report.over_budget);

        // Direct product and log-space agree when representable.
        let plan = CutPlan {
            part_a: vec![0],
            part_b: vec![1],
            cut_gates: vec![0, 1, 2],
            cut_angles: vec![0.3, 1.1, 2.0],
            gamma_total: 0.0,
            largest_part_size: 1,
        };
        let direct: f64 = plan.cut_angles.iter().map(|&t| gamma_of_angle(t)).product();
        let report = overhead_report(&plan, None);
        assert!((report.gamma_total - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn reconstruction_refuses_oversized_plans() {
        let mut wide = Circuit::new(2);
        let mut model = IsingModel {
            num_qubits: 2,
            h: vec![0.0; 2],
            j: BTreeMap::new(),
            offset: 0.0,
        };
        model.j.insert((0, 1), 1.0);
        for _ in 0..500 {
            wide.push(Gate::RZZ(0, 1, FRAC_PI_2));
        }
        let plan = CutPlan {
            part_a: vec![0],
            part_b: vec![1],
            cut_gates: (0..500).collect(),
            cut_angles: vec![FRAC_PI_2; 500],
            gamma_total: f64::INFINITY,
            largest_part_size: 1,
        };
        match reconstruct_expectation(&wide, &plan, &model) {
            Err(QvrpError::Resource(msg)) => {
                assert!(msg.contains("overhead"), "{msg}");
                assert!(msg.contains("238.5"), "{msg}");
            }
            other => panic!("expected resource refusal, got {other:?}"),
        }
    }

    #[test]
    fn gamma_is_invariant_under_part_relabeling() {
        let (c, _) = qaoa_circuit(3, 8, 0.4, 0.9);
        let plan = find_cut(&c, 3, 2).unwrap();
        let swapped = CutPlan {
            part_a: plan.part_b.clone(),
            part_b: plan.part_a.clone(),
            ..plan.clone()
        };
        assert_eq!(plan.gamma_total, swapped.gamma_total);
        assert_eq!(
            overhead_report(&plan, None).log10_gamma_total,
            overhead_report(&swapped, None).log10_gamma_total
        );
    }

    #[test]
    fn subexperiment_listing_is_canonical() {
        let (c, _) = qaoa_circuit(3, 6, 0.44, 0.17);
        let plan = find_cut(&c, 3, 0).unwrap();
        let (subs_a, subs_b) = subexperiments(&c, &plan).unwrap();
        assert!(!subs_a.is_empty() && !subs_b.is_empty());
        // 2 cuts: 36 assignments collapse to a handful of canonical circuits.
        assert!(subs_a.len() <= 36);
        for s in subs_a.iter().chain(&subs_b) {
            assert_eq!(s.circuit.num_qubits, 3);
            assert!(s.weight != 0.0);
        }
        let (again_a, _) = subexperiments(&c, &plan).unwrap();
        let keys: Vec<u128> = subs_a.iter().map(|s| s.key).collect();
        let keys2: Vec<u128> = again_a.iter().map(|s| s.key).collect();
        assert_eq!(keys, keys2);
    }

    #[test]
    fn plan_validation_catches_corruption() {
        let (c, m) = qaoa_circuit(3, 2, 0.3, 0.3);
        let good = find_cut(&c, 3, 0).unwrap();

        let mut bad = good.clone();
        bad.part_b.pop();
        assert!(reconstruct_expectation(&c, &bad, &m).is_err());

        let mut bad = good.clone();
        bad.cut_gates.pop();
        bad.cut_angles.pop();
        assert!(reconstruct_expectation(&c, &bad, &m).is_err());

        let mut bad = good.clone();
        bad.cut_angles[0] += 1.0;
        assert!(reconstruct_expectation(&c, &bad, &m).is_err());
    }
}
