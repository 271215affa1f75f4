//! The variational loop: derivative-free optimization of (γ, β), final
//! sampling, and route decoding.
//!
//! Training expectations are exact statevector values; shots enter only when
//! decoding the final state. Evaluation uses a diagonal-energy table per
//! model, so one optimizer step costs one phase pass plus one mixer pass
//! instead of a full gate-by-gate simulation.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::encode::{
    build_qubo, decode_bitstring, default_lambda, qubo_to_ising, DecodeOutcome, IsingModel,
    QuboModel,
};
use crate::error::{QvrpError, Result};
use crate::instance::{RouteSet, VrpInstance};
use crate::partition::{extract_tsp, partition, remap_route};
use crate::sim::{bitstring_msb, sample, StateVector, MAX_SIM_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OptimizerKind {
    /// Linear interpolation model over a simplex, steepest-descent step
    /// inside a shrinking trust radius.
    LinTrust,
    NelderMead,
}

#[derive(Debug, Clone, Serialize)]
pub struct QaoaConfig {
    pub p: usize,
    /// Evaluation budget per restart (every expectation evaluation counts).
    pub max_iterations: usize,
    /// Initial trust radius / simplex edge, in radians.
    pub initial_step: f64,
    /// Trust radius (or simplex spread) below which a restart stops.
    pub convergence_tolerance: f64,
    pub shots: u64,
    pub seed: u64,
    pub restarts: usize,
    pub optimizer: OptimizerKind,
    /// Penalty weight override; `None` picks the per-instance default.
    pub lambda: Option<f64>,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        QaoaConfig {
            p: 1,
            max_iterations: 120,
            initial_step: 0.15,
            convergence_tolerance: 1e-5,
            shots: 100_000,
            seed: 0,
            restarts: 5,
            optimizer: OptimizerKind::LinTrust,
            lambda: None,
        }
    }
}

impl QaoaConfig {
    pub fn check(&self) -> Result<()> {
        if self.p == 0 {
            return Err(QvrpError::Parameter("layer count must be at least 1".into()));
        }
        if self.shots == 0 {
            return Err(QvrpError::Parameter("shot count must be at least 1".into()));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(QvrpError::Parameter("convergence tolerance must be positive".into()));
        }
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(QvrpError::Parameter("restarts and iterations must be positive".into()));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(QvrpError::Parameter("penalty weight must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QaoaResult {
    pub best_params: (Vec<f64>, Vec<f64>),
    /// Best expectation seen after each evaluation, across all restarts;
    /// nonincreasing by construction.
    pub expectation_trace: Vec<f64>,
    pub best_expectation: f64,
    /// Lowest-cost feasible sampled bitstring, printed most-significant-first.
    pub best_feasible_bitstring: Option<String>,
    pub best_feasible_cost: Option<f64>,
    /// Shots whose bitstring decoded to a valid route set.
    pub feasible_hit_count: u64,
    /// Exact probability mass on feasible states in the final state; the
    /// honest failure diagnostic when no shot decodes.
    pub feasible_probability_mass: f64,
}

/// Deterministic stream splitting for sub-seeds (sampling, per-block solves).
fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut x = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x
}

/// Diagonal-energy-table QAOA state builder: cost layers are elementwise
/// phases of the precomputed Ising energies, the mixer is a per-qubit
/// butterfly pass.
pub struct FastQaoaEvaluator {
    num_qubits: usize,
    offset: f64,
    energies: Vec<f64>,
    amps: Vec<Complex64>,
}

impl FastQaoaEvaluator {
    pub fn new(m: &IsingModel) -> Result<Self> {
        if m.num_qubits > MAX_SIM_QUBITS {
            return Err(QvrpError::Resource(format!(
                "statevector evaluation is capped at {MAX_SIM_QUBITS} qubits, got {}; \
                 wider circuits need cutting",
                m.num_qubits
            )));
        }
        let size = 1usize << m.num_qubits;
        let mut energies = vec![0.0f64; size];
        for (q, &hq) in m.h.iter().enumerate() {
            if hq == 0.0 {
                continue;
            }
            let mask = 1usize << q;
            for (b, e) in energies.iter_mut().enumerate() {
                *e += if b & mask != 0 { -hq } else { hq };
            }
        }
        for (&(qa, qb), &jv) in &m.j {
            if jv == 0.0 {
                continue;
            }
            let (ma, mb) = (1usize << qa, 1usize << qb);
            for (b, e) in energies.iter_mut().enumerate() {
                let parity = (b & ma != 0) != (b & mb != 0);
                *e += if parity { -jv } else { jv };
            }
        }
        Ok(FastQaoaEvaluator {
            num_qubits: m.num_qubits,
            offset: m.offset,
            energies,
            amps: vec![Complex64::new(0.0, 0.0); size],
        })
    }

    fn run(&mut self, gamma: &[f64], beta: &[f64]) {
        let size = self.amps.len();
        let amp0 = 1.0 / (size as f64).sqrt();
        self.amps.fill(Complex64::new(amp0, 0.0));
        for (&g, &b) in gamma.iter().zip(beta) {
            for (amp, &e) in self.amps.iter_mut().zip(&self.energies) {
                let (s, c) = (g * e).sin_cos();
                *amp *= Complex64::new(c, -s);
            }
            let (sb, cb) = b.sin_cos();
            let is = Complex64::new(0.0, -sb);
            for q in 0..self.num_qubits {
                let stride = 1usize << q;
                let mut base = 0;
                while base < size {
                    for i in base..base + stride {
                        let (x, y) = (self.amps[i], self.amps[i + stride]);
                        self.amps[i] = cb * x + is * y;
                        self.amps[i + stride] = is * x + cb * y;
                    }
                    base += 2 * stride;
                }
            }
        }
    }

    /// Exact ⟨Ĥ_c⟩ at the given parameters.
    pub fn evaluate(&mut self, gamma: &[f64], beta: &[f64]) -> f64 {
        self.run(gamma, beta);
        let dot: f64 =
            self.amps.iter().zip(&self.energies).map(|(a, &e)| a.norm_sqr() * e).sum();
        self.offset + dot
    }

    /// Full state at the given parameters, for sampling.
    pub fn state(&mut self, gamma: &[f64], beta: &[f64]) -> StateVector {
        self.run(gamma, beta);
        StateVector { num_qubits: self.num_qubits, amps: self.amps.clone() }
    }
}

fn with_iteration_context(e: QvrpError, evals: usize) -> QvrpError {
    QvrpError::Contract(format!("expectation evaluation {evals} failed: {e}"))
}

struct Budget<'a, F> {
    evaluate: &'a mut F,
    remaining: usize,
    evals_done: usize,
    best_value: f64,
    best_point: Vec<f64>,
    trace: &'a mut Vec<f64>,
}

impl<'a, F: FnMut(&[f64], &[f64]) -> Result<f64>> Budget<'a, F> {
    fn call(&mut self, x: &[f64]) -> Result<Option<f64>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        self.remaining -= 1;
        self.evals_done += 1;
        let p = x.len() / 2;
        let v = (self.evaluate)(&x[..p], &x[p..])
            .map_err(|e| with_iteration_context(e, self.evals_done))?;
        if v < self.best_value {
            self.best_value = v;
            self.best_point = x.to_vec();
        }
        self.trace.push(self.best_value);
        Ok(Some(v))
    }
}

/// Gaussian elimination with partial pivoting; returns None when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let d = b.len();
    for col in 0..d {
        let pivot = (col..d).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite pivots")
        })?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..d {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..d {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for col in (0..d).rev() {
        let mut v = b[col];
        for k in (col + 1)..d {
            v -= a[col][k] * x[k];
        }
        x[col] = v / a[col][col];
    }
    Some(x)
}

/// One restart of the linear-approximation trust-region scheme: keep a
/// simplex of d+1 points, fit the interpolating linear model, step against
/// its gradient by the trust radius, expand on success, shrink otherwise.
fn lintrust_restart<F: FnMut(&[f64], &[f64]) -> Result<f64>>(
    x0: Vec<f64>,
    cfg: &QaoaConfig,
    budget: &mut Budget<'_, F>,
) -> Result<()> {
    let d = x0.len();
    let mut rho = cfg.initial_step;
    let mut points = vec![x0.clone()];
    let mut values = Vec::new();
    match budget.call(&x0)? {
        Some(v) => values.push(v),
        None => return Ok(()),
    }
    let rebuild = |points: &mut Vec<Vec<f64>>,
                       values: &mut Vec<f64>,
                       around: Vec<f64>,
                       f_around: f64,
                       rho: f64,
                       budget: &mut Budget<'_, F>|
     -> Result<bool> {
        let mut np = vec![around.clone()];
        let mut nv = vec![f_around];
        for i in 0..d {
            let mut x = around.clone();
            x[i] += rho;
            match budget.call(&x)? {
                Some(v) => {
                    np.push(x);
                    nv.push(v);
                }
                None => return Ok(false),
            }
        }
        *points = np;
        *values = nv;
        Ok(true)
    };
    let f0 = values[0];
    if !rebuild(&mut points, &mut values, x0, f0, rho, budget)? {
        return Ok(());
    }

    while rho >= cfg.convergence_tolerance && budget.remaining > 0 {
        let best = (0..values.len())
            .min_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite expectations"))
            .expect("nonempty simplex");
        let worst = (0..values.len())
            .max_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite expectations"))
            .expect("nonempty simplex");
        let rows: Vec<usize> = (0..points.len()).filter(|&i| i != best).collect();
        let a: Vec<Vec<f64>> = rows
            .iter()
            .map(|&i| (0..d).map(|k| points[i][k] - points[best][k]).collect())
            .collect();
        let rhs: Vec<f64> = rows.iter().map(|&i| values[i] - values[best]).collect();
        let Some(gradient) = solve_linear(a, rhs) else {
            let (bp, bv) = (points[best].clone(), values[best]);
            if !rebuild(&mut points, &mut values, bp, bv, rho, budget)? {
                return Ok(());
            }
            continue;
        };
        let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-12 {
            rho *= 0.5;
            continue;
        }
        let candidate: Vec<f64> = (0..d)
            .map(|k| points[best][k] - rho * gradient[k] / norm)
            .collect();
        let Some(f_new) = budget.call(&candidate)? else { return Ok(()) };
        if f_new < values[best] - 1e-12 {
            points[worst] = candidate;
            values[worst] = f_new;
            rho = (rho * 1.6).min(cfg.initial_step * 8.0);
        } else {
            if f_new < values[worst] {
                points[worst] = candidate;
                values[worst] = f_new;
            }
            rho *= 0.5;
        }
    }
    Ok(())
}

/// One restart of Nelder–Mead with the standard reflect/expand/contract/
/// shrink coefficients.
fn nelder_mead_restart<F: FnMut(&[f64], &[f64]) -> Result<f64>>(
    x0: Vec<f64>,
    cfg: &QaoaConfig,
    budget: &mut Budget<'_, F>,
) -> Result<()> {
    let d = x0.len();
    let mut points = vec![x0.clone()];
    let mut values = Vec::new();
    match budget.call(&x0)? {
        Some(v) => values.push(v),
        None => return Ok(()),
    }
    for i in 0..d {
        let mut x = x0.clone();
        x[i] += cfg.initial_step;
        match budget.call(&x)? {
            Some(v) => {
                points.push(x);
                values.push(v);
            }
            None => return Ok(()),
        }
    }

    loop {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite expectations"));
        let spread = values[order[d]] - values[order[0]];
        if spread < cfg.convergence_tolerance || budget.remaining == 0 {
            return Ok(());
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| order[..d].iter().map(|&i| points[i][k]).sum::<f64>() / d as f64)
            .collect();
        let worst = order[d];
        let at = |t: f64| -> Vec<f64> {
            (0..d).map(|k| centroid[k] + t * (centroid[k] - points[worst][k])).collect()
        };

        let reflected = at(1.0);
        let Some(fr) = budget.call(&reflected)? else { return Ok(()) };
        if fr < values[order[0]] {
            let expanded = at(2.0);
            let Some(fe) = budget.call(&expanded)? else { return Ok(()) };
            if fe < fr {
                points[worst] = expanded;
                values[worst] = fe;
            } else {
                points[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[order[d - 1]] {
            points[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        let contracted = if fr < values[worst] { at(0.5) } else { at(-0.5) };
        let Some(fc) = budget.call(&contracted)? else { return Ok(()) };
        if fc < values[worst].min(fr) {
            points[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        // Shrink toward the best point.
        let best_point = points[order[0]].clone();
        for i in 0..points.len() {
            if i == order[0] {
                continue;
            }
            let x: Vec<f64> =
                (0..d).map(|k| best_point[k] + 0.5 * (points[i][k] - best_point[k])).collect();
            match budget.call(&x)? {
                Some(v) => {
                    points[i] = x;
                    values[i] = v;
                }
                None => return Ok(()),
            }
        }
    }
}

/// Minimizes the evaluator over (γ⃗, β⃗) with `cfg.restarts` independent
/// seeded starts (each component uniform in (0, π/4)). Deterministic per
/// seed. The evaluator must be a pure function of the parameters.
pub fn optimize<F>(cfg: &QaoaConfig, mut evaluate: F) -> Result<QaoaResult>
where
    F: FnMut(&[f64], &[f64]) -> Result<f64>,
{
    cfg.check()?;
    let d = 2 * cfg.p;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::new();
    let mut best_value = f64::INFINITY;
    let mut best_point = vec![0.0; d];
    for _ in 0..cfg.restarts {
        let x0: Vec<f64> =
            (0..d).map(|_| rng.gen_range(0.0..std::f64::consts::FRAC_PI_4)).collect();
        let mut budget = Budget {
            evaluate: &mut evaluate,
            remaining: cfg.max_iterations,
            evals_done: 0,
            best_value,
            best_point: best_point.clone(),
            trace: &mut trace,
        };
        match cfg.optimizer {
            OptimizerKind::LinTrust => lintrust_restart(x0, cfg, &mut budget)?,
            OptimizerKind::NelderMead => nelder_mead_restart(x0, cfg, &mut budget)?,
        }
        best_value = budget.best_value;
        best_point = budget.best_point;
    }
    let (gamma, beta) = best_point.split_at(cfg.p);
    Ok(QaoaResult {
        best_params: (gamma.to_vec(), beta.to_vec()),
        expectation_trace: trace,
        best_expectation: best_value,
        best_feasible_bitstring: None,
        best_feasible_cost: None,
        feasible_hit_count: 0,
        feasible_probability_mass: 0.0,
    })
}

fn bits_of_state(state: u64, width: usize) -> Vec<bool> {
    (0..width).map(|v| state >> v & 1 == 1).collect()
}

fn for_each_permutation(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        for_each_permutation(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// All directed single-tour indicator states for a TSP, with their routes.
fn feasible_tour_states(q: &QuboModel, tsp: &VrpInstance) -> Vec<(u64, RouteSet)> {
    let mut destinations: Vec<usize> = (1..tsp.n).collect();
    let mut out = Vec::new();
    for_each_permutation(&mut destinations, 0, &mut |perm| {
        let mut route = vec![0];
        route.extend_from_slice(perm);
        route.push(0);
        let rs = tsp.route_set(vec![route]);
        let bits = q.route_indicator(&rs);
        let mut state = 0u64;
        for (v, &b) in bits.iter().enumerate() {
            if b {
                state |= 1 << v;
            }
        }
        out.push((state, rs));
    });
    out
}

/// QUBO → Ising → QAOA → sample → decode for a single-vehicle instance.
///
/// When no shot decodes feasibly, the returned route is the highest-
/// probability feasible state of the exact final state; hit count 0 plus the
/// feasible mass quantify the sampling failure.
pub fn solve_tsp(tsp: &VrpInstance, cfg: &QaoaConfig) -> Result<(RouteSet, QaoaResult)> {
    cfg.check()?;
    if tsp.vehicles != 1 {
        return Err(QvrpError::Parameter(format!(
            "single-tour solver needs vehicles = 1, got {}",
            tsp.vehicles
        )));
    }
    let q = build_qubo(tsp, cfg.lambda.unwrap_or_else(|| default_lambda(tsp)))?;
    let m = qubo_to_ising(&q);
    let mut evaluator = FastQaoaEvaluator::new(&m)?;
    let mut result = optimize(cfg, |gamma, beta| Ok(evaluator.evaluate(gamma, beta)))?;

    let state = evaluator.state(&result.best_params.0, &result.best_params.1);
    let counts = sample(&state, cfg.shots, derive_seed(cfg.seed, 0xBEEF))?;

    let mut best_cost = f64::INFINITY;
    let mut best_state = None;
    for (&s, &count) in &counts {
        let bits = bits_of_state(s, q.num_vars);
        if let DecodeOutcome::Routes(rs) = decode_bitstring(&bits, &q, tsp)? {
            result.feasible_hit_count += count;
            if rs.total_cost < best_cost {
                best_cost = rs.total_cost;
                best_state = Some((s, rs));
            }
        }
    }

    let tours = feasible_tour_states(&q, tsp);
    result.feasible_probability_mass =
        tours.iter().map(|&(s, _)| state.amps[s as usize].norm_sqr()).sum();

    let (chosen_state, routes) = match best_state {
        Some(found) => found,
        None => {
            // Zero feasible shots: fall back to the most probable feasible
            // state, ties to the lowest state index.
            let (s, rs) = tours
                .into_iter()
                .max_by(|(sa, _), (sb, _)| {
                    let pa = state.amps[*sa as usize].norm_sqr();
                    let pb = state.amps[*sb as usize].norm_sqr();
                    pa.partial_cmp(&pb).expect("finite probabilities").then(sb.cmp(sa))
                })
                .expect("every TSP has at least one tour");
            (s, rs)
        }
    };
    result.best_feasible_bitstring = Some(bitstring_msb(chosen_state, q.num_vars));
    result.best_feasible_cost = Some(routes.total_cost);
    Ok((routes, result))
}

/// Per-block outcome of the two-level pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    /// Destination nodes of the block, in original labels.
    pub block: Vec<usize>,
    pub qubits: usize,
    pub route: Vec<usize>,
    pub cost: f64,
    pub result: QaoaResult,
}

/// Partition the instance, solve each block as a TSP, remap and merge.
pub fn solve_vrp_pld(
    inst: &VrpInstance,
    cfg: &QaoaConfig,
) -> Result<(RouteSet, Vec<BlockReport>)> {
    cfg.check()?;
    let parts = partition(inst, cfg.seed)?;
    let mut merged = Vec::new();
    let mut reports = Vec::new();
    for (idx, block) in parts.blocks.iter().enumerate() {
        let tsp = extract_tsp(inst, block)?;
        let block_cfg = QaoaConfig { seed: derive_seed(cfg.seed, idx as u64), ..cfg.clone() };
        let (rs, result) = solve_tsp(&tsp, &block_cfg).map_err(|e| {
            QvrpError::Contract(format!("block {idx} ({block:?}) failed: {e}"))
        })?;
        let route = remap_route(block, &rs.routes[0]);
        reports.push(BlockReport {
            block: block.clone(),
            qubits: tsp.n * tsp.n - tsp.n,
            route: route.clone(),
            cost: rs.total_cost,
            result,
        });
        merged.push(route);
    }
    let merged = inst.route_set(merged);
    if !inst.validate_routes(&merged).is_valid() {
        return Err(QvrpError::Contract("merged block routes failed validation".into()));
    }
    Ok((merged, reports))
}
