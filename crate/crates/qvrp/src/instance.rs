//! Problem instances and route containers.
//!
//! A `VrpInstance` is a complete weighted graph over `n` nodes where node 0
//! is the depot and `vehicles` tours must jointly visit every other node
//! exactly once. Instances are either generated from seeded uniform points
//! in the unit square or loaded from JSON.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QvrpError, Result};

/// Symmetric, zero-diagonal, strictly positive off-diagonal weight matrix
/// plus the vehicle count. `points` is kept when weights came from geometry
/// so saved files stay reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct VrpInstance {
    pub n: usize,
    pub vehicles: usize,
    pub weights: Vec<Vec<f64>>,
    pub points: Option<Vec<(f64, f64)>>,
}

/// A set of closed routes, one per vehicle. Every route begins and ends at
/// node 0; `total_cost` is the sum of traversed edge weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSet {
    pub routes: Vec<Vec<usize>>,
    pub total_cost: f64,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    vehicles: usize,
    weights: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<Vec<(f64, f64)>>,
}

impl VrpInstance {
    pub fn new(weights: Vec<Vec<f64>>, vehicles: usize) -> Result<Self> {
        let inst = VrpInstance { n: weights.len(), vehicles, weights, points: None };
        inst.check()?;
        Ok(inst)
    }

    /// Draws `n` points uniformly from the unit square and takes Euclidean
    /// distances as weights. Bitwise deterministic per seed.
    pub fn generate_random(n: usize, vehicles: usize, seed: u64) -> Result<Self> {
        if n < 3 {
            return Err(QvrpError::Parameter(format!("need at least 3 nodes, got {n}")));
        }
        check_vehicles(n, vehicles)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let mut weights = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = points[i].0 - points[j].0;
                let dy = points[i].1 - points[j].1;
                let w = (dx * dx + dy * dy).sqrt();
                weights[i][j] = w;
                weights[j][i] = w;
            }
        }
        Ok(VrpInstance { n, vehicles, weights, points: Some(points) })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = InstanceFile {
            n: self.n,
            vehicles: self.vehicles,
            weights: self.weights.clone(),
            points: self.points.clone(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: InstanceFile = serde_json::from_str(&text)
            .map_err(|e| QvrpError::Format(format!("{}: {e}", path.display())))?;
        if file.weights.len() != file.n {
            return Err(QvrpError::Format(format!(
                "weights has {} rows but n = {}",
                file.weights.len(),
                file.n
            )));
        }
        if let Some(p) = &file.points {
            if p.len() != file.n {
                return Err(QvrpError::Format(format!(
                    "points has {} entries but n = {}",
                    p.len(),
                    file.n
                )));
            }
        }
        let inst = VrpInstance {
            n: file.n,
            vehicles: file.vehicles,
            weights: file.weights,
            points: file.points,
        };
        inst.check()?;
        Ok(inst)
    }

    fn check(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(QvrpError::Format(format!("need at least 2 nodes, got {n}")));
        }
        check_vehicles(n, self.vehicles)?;
        for (i, row) in self.weights.iter().enumerate() {
            if row.len() != n {
                return Err(QvrpError::Format(format!("weight row {i} has length {}", row.len())));
            }
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() {
                    return Err(QvrpError::Format(format!("weight ({i},{j}) is not finite")));
                }
                if i == j && w != 0.0 {
                    return Err(QvrpError::Format(format!("diagonal weight ({i},{i}) must be 0")));
                }
                if i != j && w <= 0.0 {
                    return Err(QvrpError::Format(format!(
                        "off-diagonal weight ({i},{j}) must be positive, got {w}"
                    )));
                }
                if (w - self.weights[j][i]).abs() > 1e-12 {
                    return Err(QvrpError::Format(format!("weights not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }

    pub fn max_weight(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }

    /// Cost of a route list under this instance, counting each directed hop.
    pub fn route_cost(&self, routes: &[Vec<usize>]) -> f64 {
        let mut total = 0.0;
        for route in routes {
            for leg in route.windows(2) {
                total += self.weights[leg[0]][leg[1]];
            }
        }
        total
    }

    pub fn route_set(&self, routes: Vec<Vec<usize>>) -> RouteSet {
        let total_cost = self.route_cost(&routes);
        RouteSet { routes, total_cost }
    }

    /// Checks a route set against the degree constraints (every non-depot
    /// node entered and left exactly once, the depot exactly `vehicles`
    /// times) and single-tour structure per route.
    pub fn validate_routes(&self, rs: &RouteSet) -> RouteValidity {
        let n = self.n;
        let mut issues = Vec::new();
        let mut out_degree = vec![0usize; n];
        let mut in_degree = vec![0usize; n];

        for (r, route) in rs.routes.iter().enumerate() {
            if route.len() < 3 {
                issues.push(format!("route {r} has no destinations"));
                continue;
            }
            if route[0] != 0 || *route.last().unwrap() != 0 {
                issues.push(format!("route {r} does not start and end at the depot"));
            }
            if route[1..route.len() - 1].contains(&0) {
                issues.push(format!("route {r} passes through the depot mid-tour"));
            }
            if route.iter().any(|&v| v >= n) {
                issues.push(format!("route {r} references a node outside 0..{n}"));
                continue;
            }
            for leg in route.windows(2) {
                out_degree[leg[0]] += 1;
                in_degree[leg[1]] += 1;
            }
        }

        if rs.routes.len() != self.vehicles {
            issues.push(format!(
                "expected {} routes, got {}",
                self.vehicles,
                rs.routes.len()
            ));
        }
        for v in 1..n {
            if out_degree[v] != 1 {
                issues.push(format!("node {v} is left {} times", out_degree[v]));
            }
            if in_degree[v] != 1 {
                issues.push(format!("node {v} is entered {} times", in_degree[v]));
            }
        }
        if out_degree[0] != self.vehicles {
            issues.push(format!("depot is left {} times, expected {}", out_degree[0], self.vehicles));
        }
        if in_degree[0] != self.vehicles {
            issues.push(format!("depot is entered {} times, expected {}", in_degree[0], self.vehicles));
        }

        let cost_error = (self.route_cost(&rs.routes) - rs.total_cost).abs();
        if cost_error > 1e-9 {
            issues.push(format!("stored cost is off by {cost_error:e}"));
        }

        RouteValidity { issues, out_degree, in_degree, cost_error }
    }
}

fn check_vehicles(n: usize, vehicles: usize) -> Result<()> {
    if vehicles == 0 || vehicles > n - 1 {
        return Err(QvrpError::Parameter(format!(
            "vehicles must be in 1..={}, got {vehicles}",
            n - 1
        )));
    }
    Ok(())
}

/// Outcome of `validate_routes`. Empty `issues` means the route set is a
/// feasible solution.
#[derive(Debug, Clone)]
pub struct RouteValidity {
    pub issues: Vec<String>,
    pub out_degree: Vec<usize>,
    pub in_degree: Vec<usize>,
    pub cost_error: f64,
}

impl RouteValidity {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Number of distinct closed tours through `destinations` stops and a fixed
/// depot, identifying each tour with its reversal: `destinations`!/2.
pub fn count_unique_tours(destinations: usize) -> Result<u128> {
    if destinations < 3 {
        return Err(QvrpError::Parameter(format!(
            "tour counting needs at least 3 destinations, got {destinations}"
        )));
    }
    let mut acc: u128 = 1;
    for k in 2..=destinations as u128 {
        acc = acc.checked_mul(k).ok_or_else(|| {
            QvrpError::Parameter(format!("{destinations}! overflows 128-bit arithmetic"))
        })?;
    }
    Ok(acc / 2)
}
