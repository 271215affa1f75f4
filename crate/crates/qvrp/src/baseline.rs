//! Classical reference solvers.
//!
//! The brute-force routines are the ground-truth oracles for everything the
//! quantum pipeline produces, so they are written for obvious correctness:
//! plain lexicographic enumeration, no pruning beyond reversal symmetry.

use crate::error::{QvrpError, Result};
use crate::instance::{RouteSet, VrpInstance};
use crate::partition::{extract_tsp, partition, remap_route};

/// Hard ceiling for exhaustive TSP enumeration, in nodes including the
/// depot. 10 destinations mean 10!/2 tours, which is still fine; 11 are not.
pub const BRUTE_FORCE_TSP_MAX_NODES: usize = 11;

/// Hard ceiling for exhaustive VRP enumeration (set partitions times tours).
pub const BRUTE_FORCE_VRP_MAX_NODES: usize = 9;

/// Visits every permutation of `items` in lexicographic order, skipping the
/// reversal duplicate of each tour by requiring first element < last element
/// whenever there are at least two items.
fn for_each_unique_tour<F: FnMut(&[usize])>(items: &[usize], visit: &mut F) {
    let m = items.len();
    if m == 0 {
        return;
    }
    if m == 1 {
        visit(items);
        return;
    }
    let mut perm = Vec::with_capacity(m);
    let mut used = vec![false; m];
    fn rec<F: FnMut(&[usize])>(
        items: &[usize],
        perm: &mut Vec<usize>,
        used: &mut [bool],
        visit: &mut F,
    ) {
        if perm.len() == items.len() {
            if perm[0] < perm[perm.len() - 1] {
                visit(perm);
            }
            return;
        }
        for idx in 0..items.len() {
            if !used[idx] {
                used[idx] = true;
                perm.push(items[idx]);
                rec(items, perm, used, visit);
                perm.pop();
                used[idx] = false;
            }
        }
    }
    rec(items, &mut perm, &mut used, visit);
}

/// Number of tours the enumerator actually visits for `destinations` items.
/// Cross-checks the closed-form count in the instance module.
pub fn count_tours_by_enumeration(destinations: usize) -> u128 {
    let items: Vec<usize> = (1..=destinations).collect();
    let mut count: u128 = 0;
    for_each_unique_tour(&items, &mut |_| count += 1);
    count
}

fn tour_cost(inst: &VrpInstance, perm: &[usize]) -> f64 {
    let mut cost = inst.weights[0][perm[0]];
    for leg in perm.windows(2) {
        cost += inst.weights[leg[0]][leg[1]];
    }
    cost + inst.weights[perm[perm.len() - 1]][0]
}

fn close_route(perm: &[usize]) -> Vec<usize> {
    let mut route = Vec::with_capacity(perm.len() + 2);
    route.push(0);
    route.extend_from_slice(perm);
    route.push(0);
    route
}

/// Exhaustive optimal tour. Ties go to the tour enumerated first, which is
/// the lexicographically smallest, so results are deterministic.
pub fn brute_force_tsp(tsp: &VrpInstance) -> Result<RouteSet> {
    if tsp.vehicles != 1 {
        return Err(QvrpError::Parameter(format!(
            "brute-force TSP needs a single vehicle, got {}",
            tsp.vehicles
        )));
    }
    if tsp.n > BRUTE_FORCE_TSP_MAX_NODES {
        return Err(QvrpError::Resource(format!(
            "brute-force TSP is capped at {BRUTE_FORCE_TSP_MAX_NODES} nodes, got {}",
            tsp.n
        )));
    }
    let items: Vec<usize> = (1..tsp.n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_unique_tour(&items, &mut |perm| {
        let cost = tour_cost(tsp, perm);
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, perm.to_vec()));
        }
    });
    let (cost, perm) = best.expect("instance has at least one destination");
    Ok(RouteSet { routes: vec![close_route(&perm)], total_cost: cost })
}

/// Exhaustive optimal VRP: every set partition of the destinations into
/// exactly `vehicles` non-empty blocks, each block toured optimally.
pub fn brute_force_vrp(inst: &VrpInstance) -> Result<RouteSet> {
    if inst.n > BRUTE_FORCE_VRP_MAX_NODES {
        return Err(QvrpError::Resource(format!(
            "brute-force VRP is capped at {BRUTE_FORCE_VRP_MAX_NODES} nodes, got {}",
            inst.n
        )));
    }
    let m = inst.n - 1;
    let k = inst.vehicles;
    if k > m {
        return Err(QvrpError::Parameter(format!(
            "cannot split {m} destinations into {k} non-empty blocks"
        )));
    }

    // Optimal tour per destination subset, memoized by bitmask over 1..=m.
    let mut tour_table: Vec<Option<(f64, Vec<usize>)>> = vec![None; 1 << m];
    let mut tour_of = |mask: usize, inst: &VrpInstance| -> (f64, Vec<usize>) {
        if let Some(entry) = &tour_table[mask] {
            return entry.clone();
        }
        let members: Vec<usize> = (1..=m).filter(|d| mask >> (d - 1) & 1 == 1).collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for_each_unique_tour(&members, &mut |perm| {
            let cost = tour_cost(inst, perm);
            if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                best = Some((cost, close_route(perm)));
            }
        });
        let entry = best.expect("mask is non-empty");
        tour_table[mask] = Some(entry.clone());
        entry
    };

    // Restricted-growth enumeration of set partitions: destination d joins an
    // existing block or opens the next one, so each partition shows up once.
    let mut assignment = vec![0usize; m];
    let mut best: Option<(f64, Vec<usize>)> = None;

    fn rec(
        d: usize,
        open: usize,
        m: usize,
        k: usize,
        assignment: &mut Vec<usize>,
        found: &mut dyn FnMut(&[usize]),
    ) {
        if d == m {
            if open == k {
                found(assignment);
            }
            return;
        }
        // Not enough remaining destinations to open the missing blocks.
        if k - open > m - d {
            return;
        }
        let limit = (open + 1).min(k);
        for b in 0..limit {
            assignment[d] = b;
            let now_open = if b == open { open + 1 } else { open };
            rec(d + 1, now_open, m, k, assignment, found);
        }
    }

    let mut on_partition = |assignment: &[usize]| {
        let mut masks = vec![0usize; k];
        for (d0, &b) in assignment.iter().enumerate() {
            masks[b] |= 1 << d0;
        }
        let mut total = 0.0;
        for &mask in &masks {
            total += tour_of(mask, inst).0;
        }
        if best.as_ref().map_or(true, |(c, _)| total < *c) {
            best = Some((total, assignment.to_vec()));
        }
    };
    rec(0, 0, m, k, &mut assignment, &mut on_partition);

    let (total, assignment) = best.expect("at least one partition exists");
    let mut masks = vec![0usize; k];
    for (d0, &b) in assignment.iter().enumerate() {
        masks[b] |= 1 << d0;
    }
    let routes = masks.iter().map(|&mask| tour_of(mask, inst).1).collect();
    Ok(RouteSet { routes, total_cost: total })
}

/// Greedy tour from the depot, always moving to the nearest unvisited
/// destination; ties pick the lowest node index.
pub fn nearest_neighbor(tsp: &VrpInstance) -> Result<RouteSet> {
    if tsp.vehicles != 1 {
        return Err(QvrpError::Parameter("nearest neighbor expects a single-vehicle TSP".into()));
    }
    let n = tsp.n;
    let mut visited = vec![false; n];
    visited[0] = true;
    let mut route = vec![0usize];
    let mut here = 0usize;
    for _ in 1..n {
        let mut next = None;
        for cand in 1..n {
            if !visited[cand] {
                let better = match next {
                    None => true,
                    Some(best) => tsp.weights[here][cand] < tsp.weights[here][best],
                };
                if better {
                    next = Some(cand);
                }
            }
        }
        let next = next.unwrap();
        visited[next] = true;
        route.push(next);
        here = next;
    }
    route.push(0);
    Ok(tsp.route_set(vec![route]))
}

/// First-improvement 2-opt on a closed single tour: reverse the segment that
/// first yields a strictly cheaper tour, rescan, and stop at a local optimum.
pub fn two_opt(tsp: &VrpInstance, rs: &RouteSet) -> Result<RouteSet> {
    if rs.routes.len() != 1 {
        return Err(QvrpError::Parameter("2-opt expects exactly one route".into()));
    }
    let report = tsp.validate_routes(rs);
    if !report.is_valid() {
        return Err(QvrpError::Parameter(format!(
            "2-opt input route is not a feasible tour: {}",
            report.issues.join("; ")
        )));
    }
    let mut route = rs.routes[0].clone();
    let w = |a: usize, b: usize| tsp.weights[a][b];
    let last = route.len() - 2;
    'outer: loop {
        for i in 1..=last {
            for j in (i + 1)..=last {
                let (a, b) = (route[i - 1], route[i]);
                let (c, d) = (route[j], route[j + 1]);
                let delta = w(a, c) + w(b, d) - w(a, b) - w(c, d);
                if delta < -1e-12 {
                    route[i..=j].reverse();
                    continue 'outer;
                }
            }
        }
        break;
    }
    Ok(tsp.route_set(vec![route]))
}

/// Fully classical pipeline over the same decomposition the quantum solver
/// uses: balanced partition, then nearest neighbor plus 2-opt per block.
pub fn classical_vrp(inst: &VrpInstance, seed: u64) -> Result<RouteSet> {
    let parts = partition(inst, seed)?;
    let mut routes = Vec::with_capacity(parts.blocks.len());
    for block in &parts.blocks {
        let tsp = extract_tsp(inst, block)?;
        let greedy = nearest_neighbor(&tsp)?;
        let improved = two_opt(&tsp, &greedy)?;
        routes.push(remap_route(block, &improved.routes[0]));
    }
    Ok(inst.route_set(routes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::count_unique_tours;

    /// Line instance: depot at 0, destinations at x = 1, 2, 3. The only
    /// sensible tour sweeps outward and returns, total 6.
    fn line_instance() -> VrpInstance {
        let xs: [f64; 4] = [0.0, 1.0, 2.0, 3.0];
        let n = xs.len();
        let mut weights = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                weights[i][j] = (xs[i] - xs[j]).abs();
            }
        }
        VrpInstance { n, vehicles: 1, weights, points: None }
    }

    #[test]
    fn brute_force_tsp_solves_the_line() {
        let rs = brute_force_tsp(&line_instance()).unwrap();
        assert_eq!(rs.routes, vec![vec![0, 1, 2, 3, 0]]);
        assert!((rs.total_cost - 6.0).abs() < 1e-12);
    }

    #[test]
    fn enumerator_agrees_with_closed_form() {
        for m in 3..=8 {
            assert_eq!(count_tours_by_enumeration(m), count_unique_tours(m).unwrap());
        }
    }

    #[test]
    fn brute_force_guards() {
        let inst = VrpInstance::generate_random(12, 1, 0).unwrap();
        assert!(matches!(brute_force_tsp(&inst), Err(QvrpError::Resource(_))));
        let inst = VrpInstance::generate_random(10, 2, 0).unwrap();
        assert!(matches!(brute_force_vrp(&inst), Err(QvrpError::Resource(_))));
        let inst = VrpInstance::generate_random(6, 2, 0).unwrap();
        assert!(matches!(brute_force_tsp(&inst), Err(QvrpError::Parameter(_))));
    }

    #[test]
    fn vrp_oracle_matches_direct_split_enumeration() {
        // Independent check: enumerate every subset split by hand for K = 2.
        let inst = VrpInstance::generate_random(6, 2, 17).unwrap();
        let m = inst.n - 1;
        let mut best = f64::INFINITY;
        for mask in 1usize..(1 << m) - 1 {
            let block_a: Vec<usize> = (1..=m).filter(|d| mask >> (d - 1) & 1 == 1).collect();
            let block_b: Vec<usize> = (1..=m).filter(|d| mask >> (d - 1) & 1 == 0).collect();
            let tsp_a = extract_tsp(&inst, &block_a).unwrap();
            let tsp_b = extract_tsp(&inst, &block_b).unwrap();
            let cost =
                brute_force_tsp(&tsp_a).unwrap().total_cost + brute_force_tsp(&tsp_b).unwrap().total_cost;
            if cost < best {
                best = cost;
            }
        }
        let oracle = brute_force_vrp(&inst).unwrap();
        assert!((oracle.total_cost - best).abs() < 1e-12);
        assert!(inst.validate_routes(&oracle).is_valid());
    }

    #[test]
    fn vrp_oracle_with_one_vehicle_is_the_tsp_oracle() {
        let inst = VrpInstance::generate_random(7, 1, 3).unwrap();
        let vrp = brute_force_vrp(&inst).unwrap();
        let tsp = brute_force_tsp(&inst).unwrap();
        assert!((vrp.total_cost - tsp.total_cost).abs() < 1e-12);
    }

    #[test]
    fn nearest_neighbor_breaks_ties_toward_lower_index() {
        // Destinations 1 and 2 equidistant from the depot.
        let mut weights = vec![vec![0.0; 3]; 3];
        weights[0][1] = 1.0;
        weights[1][0] = 1.0;
        weights[0][2] = 1.0;
        weights[2][0] = 1.0;
        weights[1][2] = 0.5;
        weights[2][1] = 0.5;
        let inst = VrpInstance { n: 3, vehicles: 1, weights, points: None };
        let rs = nearest_neighbor(&inst).unwrap();
        assert_eq!(rs.routes, vec![vec![0, 1, 2, 0]]);
    }

    #[test]
    fn two_opt_uncrosses_and_never_worsens() {
        let inst = VrpInstance::generate_random(8, 1, 23).unwrap();
        let greedy = nearest_neighbor(&inst).unwrap();
        let improved = two_opt(&inst, &greedy).unwrap();
        assert!(improved.total_cost <= greedy.total_cost + 1e-12);
        assert!(inst.validate_routes(&improved).is_valid());

        // A deliberately bad order must strictly improve.
        let bad = inst.route_set(vec![vec![0, 5, 1, 6, 2, 7, 3, 4, 0]]);
        let fixed = two_opt(&inst, &bad).unwrap();
        assert!(fixed.total_cost < bad.total_cost);
    }

    #[test]
    fn two_opt_rejects_malformed_input() {
        let inst = VrpInstance::generate_random(5, 1, 1).unwrap();
        let rs = RouteSet { routes: vec![vec![0, 1, 2, 0]], total_cost: 0.0 };
        assert!(two_opt(&inst, &rs).is_err());
    }

    #[test]
    fn classical_vrp_is_feasible_and_close_to_oracle() {
        let inst = VrpInstance::generate_random(8, 3, 6).unwrap();
        let heuristic = classical_vrp(&inst, 6).unwrap();
        assert!(inst.validate_routes(&heuristic).is_valid());
        let oracle = brute_force_vrp(&inst).unwrap();
        assert!(heuristic.total_cost >= oracle.total_cost - 1e-12);
    }
}
