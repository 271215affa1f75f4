//! Acceptance gate. One test per headline claim; each prints a single
//! [PASS]/[FAIL] line naming the criterion before asserting, so
//! `cargo test -p qvrp --test acceptance -- --nocapture` yields a nine-line
//! scoreboard. Tolerances are pinned as named constants below.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qvrp::baseline::{brute_force_tsp, brute_force_vrp, classical_vrp, count_tours_by_enumeration};
use qvrp::circuit::{build_qaoa, metrics, Circuit, Gate};
use qvrp::cut::{
    find_cut, gamma_of_angle, largest_subcircuit_metrics, overhead_report, qpd_expand,
    reconstruct_expectation, CutPlan, LocalOp,
};
use qvrp::encode::{
    amplitude_basis_map, brute_force_ground_state, build_qubo, decode_bitstring, default_lambda,
    qubit_count_edge, qubo_to_ising, DecodeOutcome, IsingModel, QuboModel,
};
use qvrp::error::QvrpError;
use qvrp::instance::{count_unique_tours, VrpInstance};
use qvrp::partition::{extract_tsp, partition};
use qvrp::qaoa::{solve_vrp_pld, QaoaConfig};
use qvrp::sim::{expectation_ising, simulate};

/// Route/energy comparisons against exact oracles.
const COST_TOLERANCE: f64 = 1e-9;
/// QUBO vs Ising energy per bitstring.
const ENERGY_IDENTITY_TOLERANCE: f64 = 1e-9;
/// |reconstructed - uncut| expectation after gate cutting.
const RECONSTRUCTION_TOLERANCE: f64 = 1e-6;
/// Dense channel oracle: knitted vs exact density-matrix entries.
const CHANNEL_TOLERANCE: f64 = 1e-9;
/// Sampling overhead of a 500-cut plan at theta = pi/2: 500 * log10(3).
const LOG10_GAMMA_500_CUTS: f64 = 238.56;
const LOG10_GAMMA_TOLERANCE: f64 = 0.01;
/// gamma_total is reconstituted from log space in the report.
const GAMMA_REPORT_TOLERANCE: f64 = 1e-6;

/// Frozen instance seed and solver effort for the end-to-end quality gate.
const QUALITY_SEED: u64 = 1;
const QUALITY_RESTARTS: usize = 2;

fn report(criterion: usize, ok: bool, detail: &str) {
    let tag = if ok { "[PASS]" } else { "[FAIL]" };
    println!("{tag} criterion {criterion}: {detail}");
    assert!(ok, "criterion {criterion}: {detail}");
}

fn tsp_models(n: usize, vehicles: usize, seed: u64) -> (VrpInstance, QuboModel, IsingModel) {
    let inst = VrpInstance::generate_random(n, vehicles, seed).unwrap();
    let q = build_qubo(&inst, default_lambda(&inst)).unwrap();
    let m = qubo_to_ising(&q);
    (inst, q, m)
}

fn p1_circuit(m: &IsingModel, gamma: f64, beta: f64) -> Circuit {
    build_qaoa(m, 1, &[gamma], &[beta]).unwrap()
}

#[test]
fn criterion_1_edge_encoding_qubit_counts() {
    let start = Instant::now();
    let cases = [(7, 2, 42), (8, 3, 56), (9, 3, 72), (13, 5, 156), (4, 1, 12), (3, 1, 6)];
    let mut ok = true;
    let mut seen = Vec::new();
    for (n, k, expect) in cases {
        let (_, _, m) = tsp_models(n, k, 0);
        ok &= qubit_count_edge(n) == expect && m.num_qubits == expect;
        seen.push(format!("{n}->{}", m.num_qubits));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 1.0;
    report(1, ok, &format!("edge-encoding widths {} ({elapsed:.2}s)", seen.join(", ")));
}

#[test]
fn criterion_2_two_qubit_gate_counts() {
    let start = Instant::now();
    let cases = [(7, 2, 420), (8, 3, 672), (9, 3, 1008), (13, 5, 3432), (4, 1, 48), (3, 1, 12)];
    let mut ok = true;
    let mut seen = Vec::new();
    for (n, k, expect) in cases {
        let (_, _, m) = tsp_models(n, k, 0);
        let counted = metrics(&p1_circuit(&m, 0.5, 0.5)).two_qubit_gates;
        ok &= counted == expect;
        seen.push(format!("{n}->{counted}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 1.0;
    report(2, ok, &format!("p=1 CX counts {} ({elapsed:.2}s)", seen.join(", ")));
}

#[test]
fn criterion_3_cut_anchors_and_staged_reductions() {
    let start = Instant::now();
    let mut ok = true;

    // Balanced-cut anchors on the two block sizes.
    let (_, _, m4) = tsp_models(4, 1, 0);
    let c4 = p1_circuit(&m4, 0.5, 0.5);
    let plan4 = find_cut(&c4, 6, 0).unwrap();
    let sub4 = largest_subcircuit_metrics(&c4, &plan4).unwrap();
    ok &= plan4.largest_part_size == 6 && sub4.qubits == 6 && sub4.two_qubit_gates == 16;

    let (_, _, m3) = tsp_models(3, 1, 0);
    let c3 = p1_circuit(&m3, 0.5, 0.5);
    let plan3 = find_cut(&c3, 3, 0).unwrap();
    let sub3 = largest_subcircuit_metrics(&c3, &plan3).unwrap();
    ok &= plan3.largest_part_size == 3 && sub3.qubits == 3 && sub3.two_qubit_gates == 4;

    // Staged reductions for the 13-node / 5-vehicle instance: full circuit,
    // largest partitioned block, largest post-cut fragment.
    let (_, _, m13) = tsp_models(13, 5, 0);
    let full = metrics(&p1_circuit(&m13, 0.5, 0.5));
    let pct = |part: usize, whole: usize| 100.0 * (1.0 - part as f64 / whole as f64);
    let qubit_pct = pct(sub4.qubits, full.qubits);
    let gate_pct = pct(sub4.two_qubit_gates, full.two_qubit_gates);
    let depth_pct = pct(sub4.depth, full.depth);
    ok &= full.qubits == 156 && full.two_qubit_gates == 3432;
    ok &= qubit_pct >= 96.0 && gate_pct >= 99.5 && depth_pct >= 90.0;

    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 10.0;
    report(
        3,
        ok,
        &format!(
            "anchors 6q/16cx and 3q/4cx; reductions {qubit_pct:.1}% qubits, \
             {gate_pct:.1}% two-qubit gates, {depth_pct:.1}% depth ({elapsed:.2}s)"
        ),
    );
}

#[test]
fn criterion_4_reconstruction_equality() {
    let start = Instant::now();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for n in [3usize, 4] {
        let xi = qubit_count_edge(n) / 2;
        for seed in 0..5u64 {
            let (_, _, m) = tsp_models(n, 1, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa11ce);
            for _ in 0..20 {
                let gamma = rng.gen_range(0.0..2.0 * PI);
                let beta = rng.gen_range(0.0..2.0 * PI);
                let c = p1_circuit(&m, gamma, beta);
                let plan = find_cut(&c, xi, seed).unwrap();
                let direct = expectation_ising(&simulate(&c).unwrap(), &m).unwrap();
                let knitted = reconstruct_expectation(&c, &plan, &m).unwrap();
                worst = worst.max((knitted - direct).abs());
            }
        }
    }
    ok &= worst <= RECONSTRUCTION_TOLERANCE;

    let channel_worst = channel_oracle_worst_error();
    ok &= channel_worst <= CHANNEL_TOLERANCE;

    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 300.0;
    report(
        4,
        ok,
        &format!(
            "200 reconstruction points, worst |delta| {worst:.2e} (tol {RECONSTRUCTION_TOLERANCE:.0e}); \
             channel oracle worst {channel_worst:.2e} (tol {CHANNEL_TOLERANCE:.0e}) ({elapsed:.1}s)"
        ),
    );
}

#[test]
fn criterion_5_encoding_correctness() {
    let start = Instant::now();
    let mut ok = true;

    // Exhaustive QUBO/Ising energy identity on every 6- and 12-variable state.
    let mut identity_worst: f64 = 0.0;
    for n in [3usize, 4] {
        for seed in 0..3u64 {
            let (_, q, m) = tsp_models(n, 1, seed);
            for state in 0u64..1 << m.num_qubits {
                let bits: Vec<bool> = (0..m.num_qubits).map(|i| state >> i & 1 == 1).collect();
                identity_worst = identity_worst.max((q.energy(&bits) - m.energy_bits(&bits)).abs());
            }
        }
    }
    ok &= identity_worst <= ENERGY_IDENTITY_TOLERANCE;

    // Exact ground state must decode to the optimal tour, 10 seeds per size.
    let mut hits = [0usize; 2];
    let mut note = String::new();
    for (slot, n) in [3usize, 4].into_iter().enumerate() {
        for seed in 0..10u64 {
            let (inst, q, m) = tsp_models(n, 1, seed);
            let (state, _) = brute_force_ground_state(&m).unwrap();
            let bits: Vec<bool> = (0..m.num_qubits).map(|i| state >> i & 1 == 1).collect();
            let oracle = brute_force_tsp(&inst).unwrap();
            match decode_bitstring(&bits, &q, &inst).unwrap() {
                DecodeOutcome::Routes(rs)
                    if (rs.total_cost - oracle.total_cost).abs() <= COST_TOLERANCE =>
                {
                    hits[slot] += 1;
                }
                DecodeOutcome::Routes(_) => {}
                DecodeOutcome::Infeasible(rep) if note.is_empty() => {
                    note = format!(" (n={n} seed {seed} ground: {})", rep.violations.join("; "));
                }
                DecodeOutcome::Infeasible(_) => {}
            }
        }
    }
    ok &= hits == [10, 10];

    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 60.0;
    report(
        5,
        ok,
        &format!(
            "energy identity worst {identity_worst:.2e} over 12480 states; ground decodes optimal \
             n=3 {}/10, n=4 {}/10{note} ({elapsed:.1}s)",
            hits[0], hits[1]
        ),
    );
}

#[test]
fn criterion_6_end_to_end_block_quality() {
    let start = Instant::now();
    let mut ok = true;
    let mut optimal = 0usize;
    let mut blocks = 0usize;
    let mut misses = Vec::new();
    for (n, k) in [(7usize, 2usize), (8, 2), (9, 2)] {
        let inst = VrpInstance::generate_random(n, k, QUALITY_SEED).unwrap();
        let cfg = QaoaConfig {
            p: 10,
            restarts: QUALITY_RESTARTS,
            seed: QUALITY_SEED,
            ..QaoaConfig::default()
        };
        let (merged, reports) = solve_vrp_pld(&inst, &cfg).unwrap();
        let parts = partition(&inst, QUALITY_SEED).unwrap();
        for (idx, rep) in reports.iter().enumerate() {
            let tsp = extract_tsp(&inst, &parts.blocks[idx]).unwrap();
            let oracle = brute_force_tsp(&tsp).unwrap();
            blocks += 1;
            if (rep.cost - oracle.total_cost).abs() <= COST_TOLERANCE {
                optimal += 1;
            } else {
                misses.push(format!(
                    "(n={n}) block {idx} ({}q): {:.6} vs optimal {:.6}, feasible mass {:.2e}",
                    rep.qubits, rep.cost, oracle.total_cost, rep.result.feasible_probability_mass
                ));
            }
        }
        // The decomposition can cost optimality but never beats the exact
        // optimum, and the classical baseline cannot either.
        let exact = brute_force_vrp(&inst).unwrap();
        let classical = classical_vrp(&inst, QUALITY_SEED).unwrap();
        ok &= merged.total_cost >= exact.total_cost - COST_TOLERANCE;
        ok &= classical.total_cost >= exact.total_cost - COST_TOLERANCE;
    }
    ok &= blocks == 6 && optimal + 1 >= blocks;
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 1800.0;
    let miss_note =
        if misses.is_empty() { String::new() } else { format!("; missed: {}", misses.join(" | ")) };
    report(
        6,
        ok,
        &format!("{optimal}/{blocks} blocks oracle-optimal at p=10; dominance held{miss_note} ({elapsed:.0}s)"),
    );
}

#[test]
fn criterion_7_sampling_overhead_guard() {
    let start = Instant::now();
    let mut ok = true;

    // Eight cuts at theta = pi/2.
    ok &= (gamma_of_angle(FRAC_PI_2).powi(8) - 6561.0).abs() <= COST_TOLERANCE;
    let plan8 = half_turn_plan(8);
    let rep8 = overhead_report(&plan8, None);
    ok &= (rep8.gamma_total - 6561.0).abs() <= GAMMA_REPORT_TOLERANCE;

    // A 500-cut plan is reported in log space and refused outright.
    let plan500 = half_turn_plan(500);
    let rep500 = overhead_report(&plan500, None);
    ok &= (rep500.log10_gamma_total - LOG10_GAMMA_500_CUTS).abs() <= LOG10_GAMMA_TOLERANCE;
    for budget in [0.0, 50.0, 100.0, 200.0] {
        ok &= overhead_report(&plan500, Some(budget)).over_budget;
    }
    ok &= !overhead_report(&plan500, Some(239.0)).over_budget;

    let mut wide = Circuit::new(2);
    for _ in 0..500 {
        wide.push(Gate::RZZ(0, 1, FRAC_PI_2));
    }
    let mut model = IsingModel { num_qubits: 2, h: vec![0.0; 2], j: Default::default(), offset: 0.0 };
    model.j.insert((0, 1), 1.0);
    ok &= matches!(
        reconstruct_expectation(&wide, &plan500, &model),
        Err(QvrpError::Resource(msg)) if msg.contains("overhead")
    );

    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 1.0;
    report(
        7,
        ok,
        &format!(
            "gamma(8 cuts) = {:.1}; log10 gamma(500 cuts) = {:.2}; refusal enforced ({elapsed:.2}s)",
            rep8.gamma_total, rep500.log10_gamma_total
        ),
    );
}

#[test]
fn criterion_8_tour_counting() {
    let start = Instant::now();
    let mut ok = true;
    for destinations in 3..=10usize {
        let closed_form = count_unique_tours(destinations).unwrap();
        let enumerated = count_tours_by_enumeration(destinations);
        ok &= closed_form == enumerated;
    }
    ok &= count_unique_tours(3).unwrap() == 3;
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 1.0;
    report(
        8,
        ok,
        &format!(
            "n!/2 matches enumeration for 3..=10 destinations; 3 destinations -> {} unique tours ({elapsed:.2}s)",
            count_unique_tours(3).unwrap()
        ),
    );
}

#[test]
fn criterion_9_amplitude_register_accounting() {
    let start = Instant::now();
    let mut ok = true;
    let four = amplitude_basis_map(4).unwrap();
    ok &= four.num_qubits == 4 && four.edge_of_state.len() == 12;
    let ten = amplitude_basis_map(10).unwrap();
    ok &= ten.num_qubits == 7 && ten.edge_of_state.len() == 90;
    // Published tables size this register at 8 qubits; the formula gives 7.
    let reference_qubits = 8usize;
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 1.0;
    report(
        9,
        ok,
        &format!(
            "n=4 -> {} qubits; n=10 -> {} qubits where the reference table says {reference_qubits} \
             (ceil(log2(90)) = 7; discrepancy documented, likely an ancilla) ({elapsed:.2}s)",
            four.num_qubits, ten.num_qubits
        ),
    );
}

/// Synthetic plan with `cuts` wires severed at theta = pi/2 on a two-qubit
/// template; exercises the overhead arithmetic without a search.
fn half_turn_plan(cuts: usize) -> CutPlan {
    CutPlan {
        part_a: vec![0],
        part_b: vec![1],
        cut_gates: (0..cuts).collect(),
        cut_angles: vec![FRAC_PI_2; cuts],
        gamma_total: 3f64.powi(cuts as i32),
        largest_part_size: 1,
    }
}

// Dense two-qubit channel oracle: verifies the quasiprobability identity
// sum_k c_k (A_k ⊗ B_k)(rho) = RZZ(theta) rho RZZ(theta)^dagger on random
// density matrices, entrywise. Row-major 4x4, qubit 0 least significant.
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

fn channel_oracle_worst_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let thetas = [0.0, PI / 7.0, -PI / 7.0, FRAC_PI_4, FRAC_PI_2];
    let mut worst: f64 = 0.0;
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
                worst = worst.max((knit[i] - exact[i]).norm());
            }
        }
    }
    worst
}
