//! Problem-level decomposition: split the destinations of a VRP into
//! balanced blocks, one per vehicle, so each block becomes an independent
//! small TSP.
//!
//! The splitter is recursive bisection with pairwise-swap refinement on the
//! edge weights. Block sizes are fixed up front to the balanced profile
//! (every block gets floor or ceil of (n-1)/K destinations), so refinement
//! only ever exchanges nodes between sides, never changes sizes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QvrpError, Result};
use crate::instance::VrpInstance;

/// Destination blocks plus the total weight of edges crossing between
/// different blocks. Blocks are sorted by size, then by smallest member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
    pub cut_weight: f64,
}

/// Number of swap-refined restarts per bisection. More restarts cost little
/// at these sizes and avoid the occasional bad seed assignment.
const BISECTION_RESTARTS: usize = 4;

/// Splits destinations 1..n-1 into `inst.vehicles` balanced blocks.
/// Deterministic per seed.
pub fn partition(inst: &VrpInstance, seed: u64) -> Result<Partition> {
    let m = inst.n - 1;
    let k = inst.vehicles;
    if k > m {
        return Err(QvrpError::Parameter(format!(
            "cannot split {m} destinations into {k} non-empty blocks"
        )));
    }

    // Balanced size profile, largest first so the recursive split stays even.
    let big = m.div_ceil(k);
    let small = m / k;
    let n_big = m % k;
    let mut sizes = vec![big; n_big];
    sizes.extend(std::iter::repeat(small).take(k - n_big));

    let nodes: Vec<usize> = (1..inst.n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::new();
    split_recursive(inst, &nodes, &sizes, &mut rng, &mut blocks);

    for block in &mut blocks {
        block.sort_unstable();
    }
    blocks.sort_by_key(|b| (b.len(), b[0]));

    let cut_weight = kway_cut_weight(inst, &blocks);
    Ok(Partition { blocks, cut_weight })
}

fn split_recursive(
    inst: &VrpInstance,
    nodes: &[usize],
    sizes: &[usize],
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Vec<usize>>,
) {
    if sizes.len() == 1 {
        out.push(nodes.to_vec());
        return;
    }
    let k_left = sizes.len().div_ceil(2);
    let (sizes_left, sizes_right) = sizes.split_at(k_left);
    let size_left: usize = sizes_left.iter().sum();

    let (left, right) = bisect(inst, nodes, size_left, rng);
    split_recursive(inst, &left, sizes_left, rng, out);
    split_recursive(inst, &right, sizes_right, rng, out);
}

/// Seeded random split into sides of fixed size, then steepest-descent
/// pairwise swaps until no exchange lowers the crossing weight. Several
/// restarts, best crossing weight wins; ties keep the earlier restart.
fn bisect(
    inst: &VrpInstance,
    nodes: &[usize],
    size_left: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for _ in 0..BISECTION_RESTARTS {
        let mut shuffled = nodes.to_vec();
        shuffled.shuffle(rng);
        let mut left: Vec<usize> = shuffled[..size_left].to_vec();
        let mut right: Vec<usize> = shuffled[size_left..].to_vec();
        left.sort_unstable();
        right.sort_unstable();
        let cut = refine_bisection(inst, &mut left, &mut right);
        if best.as_ref().map_or(true, |(c, _, _)| cut < *c) {
            best = Some((cut, left, right));
        }
    }
    let (_, left, right) = best.unwrap();
    (left, right)
}

/// In-place swap refinement; returns the final crossing weight. Never
/// worsens the assignment it starts from.
fn refine_bisection(inst: &VrpInstance, left: &mut [usize], right: &mut [usize]) -> f64 {
    let w = |a: usize, b: usize| inst.weights[a][b];
    loop {
        let mut best_gain = 1e-12;
        let mut best_pair = None;
        for (ia, &a) in left.iter().enumerate() {
            // D-value: external minus internal attachment of a node.
            let d_a: f64 = right.iter().map(|&x| w(a, x)).sum::<f64>()
                - left.iter().filter(|&&x| x != a).map(|&x| w(a, x)).sum::<f64>();
            for (ib, &b) in right.iter().enumerate() {
                let d_b: f64 = left.iter().map(|&x| w(b, x)).sum::<f64>()
                    - right.iter().filter(|&&x| x != b).map(|&x| w(b, x)).sum::<f64>();
                let gain = d_a + d_b - 2.0 * w(a, b);
                if gain > best_gain {
                    best_gain = gain;
                    best_pair = Some((ia, ib));
                }
            }
        }
        match best_pair {
            Some((ia, ib)) => {
                let tmp = left[ia];
                left[ia] = right[ib];
                right[ib] = tmp;
            }
            None => break,
        }
    }
    left.sort_unstable();
    right.sort_unstable();
    crossing_weight(inst, left, right)
}

fn crossing_weight(inst: &VrpInstance, left: &[usize], right: &[usize]) -> f64 {
    let mut total = 0.0;
    for &a in left {
        for &b in right {
            total += inst.weights[a][b];
        }
    }
    total
}

fn kway_cut_weight(inst: &VrpInstance, blocks: &[Vec<usize>]) -> f64 {
    let mut owner = vec![usize::MAX; inst.n];
    for (bi, block) in blocks.iter().enumerate() {
        for &v in block {
            owner[v] = bi;
        }
    }
    let mut total = 0.0;
    for i in 1..inst.n {
        for j in (i + 1)..inst.n {
            if owner[i] != owner[j] {
                total += inst.weights[i][j];
            }
        }
    }
    total
}

/// Builds the standalone TSP for one block: node 0 stays the depot, block
/// members become nodes 1..=len in ascending original order, one vehicle.
pub fn extract_tsp(inst: &VrpInstance, block: &[usize]) -> Result<VrpInstance> {
    if block.is_empty() {
        return Err(QvrpError::Parameter("cannot extract a TSP from an empty block".into()));
    }
    let mut members = block.to_vec();
    members.sort_unstable();
    members.dedup();
    if members.len() != block.len() {
        return Err(QvrpError::Parameter("block contains duplicate nodes".into()));
    }
    if members[0] == 0 || *members.last().unwrap() >= inst.n {
        return Err(QvrpError::Parameter("block members must be destinations of the instance".into()));
    }

    let locals: Vec<usize> = std::iter::once(0).chain(members.iter().copied()).collect();
    let nn = locals.len();
    let mut weights = vec![vec![0.0; nn]; nn];
    for a in 0..nn {
        for b in 0..nn {
            weights[a][b] = inst.weights[locals[a]][locals[b]];
        }
    }
    let points = inst
        .points
        .as_ref()
        .map(|pts| locals.iter().map(|&g| pts[g]).collect());
    Ok(VrpInstance { n: nn, vehicles: 1, weights, points })
}

/// Maps a route on an extracted block TSP back to original node labels.
pub fn remap_route(block: &[usize], local_route: &[usize]) -> Vec<usize> {
    let mut members = block.to_vec();
    members.sort_unstable();
    local_route
        .iter()
        .map(|&v| if v == 0 { 0 } else { members[v - 1] })
        .collect()
}
