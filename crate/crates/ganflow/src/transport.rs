//! Exact p-Wasserstein distances between equal-size uniform point clouds.
//!
//! 1-d clouds use the sorting formula, which is exact. General clouds go
//! through an exact solver for the linear assignment problem on the cost
//! matrix `|x_i - y_j|^p` (shortest augmenting paths, cubic time), capped at
//! [`ASSIGNMENT_CAP`] points. The indexed (non-optimized) coupling cost
//! between two ensembles is also provided; it upper-bounds the optimal
//! distance and is the quantity the coupling experiment tracks.

use crate::error::{Error, Result};
use crate::model::EnsemblePair;

/// Cost exponent for the distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderP {
    P1,
    P2,
    P4,
}

impl OrderP {
    pub fn exponent(self) -> f64 {
        match self {
            OrderP::P1 => 1.0,
            OrderP::P2 => 2.0,
            OrderP::P4 => 4.0,
        }
    }
}

/// `n` points in `R^d` with uniform weights `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter(
                "point cloud needs at least one point".into(),
            ));
        }
        let d = points[0].len();
        for p in &points {
            if p.len() != d {
                return Err(Error::ShapeMismatch {
                    context: "point cloud dimensions",
                    expected: d,
                    found: p.len(),
                });
            }
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("point cloud"));
            }
        }
        Ok(PointCloud { points })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        PointCloud::new(values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

fn check_equal_sizes(xs: &PointCloud, ys: &PointCloud) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch {
            context: "point cloud sizes",
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.dim() != ys.dim() {
        return Err(Error::ShapeMismatch {
            context: "point cloud dimensions",
            expected: xs.dim(),
            found: ys.dim(),
        });
    }
    Ok(())
}

/// Exact p-Wasserstein distance in one dimension: sort both clouds and pair
/// by rank.
pub fn wasserstein_1d(p: OrderP, xs: &PointCloud, ys: &PointCloud) -> Result<f64> {
    check_equal_sizes(xs, ys)?;
    if xs.dim() != 1 {
        return Err(Error::ShapeMismatch {
            context: "wasserstein_1d dimension",
            expected: 1,
            found: xs.dim(),
        });
    }
    let mut a: Vec<f64> = xs.points().iter().map(|v| v[0]).collect();
    let mut b: Vec<f64> = ys.points().iter().map(|v| v[0]).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    let exp = p.exponent();
    let sum: f64 = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs().powf(exp))
        .sum();
    Ok((sum / n).powf(1.0 / exp))
}

/// Size cap for the exact assignment solver.
pub const ASSIGNMENT_CAP: usize = 512;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Minimum-cost perfect matching on a square cost matrix via shortest
/// augmenting paths with dual potentials. Returns `assignment[row] = col`.
///
/// Deterministic: scan order breaks ties, no randomization.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // Potentials and matching are 1-based internally; index 0 is the virtual
    // starting column of each augmenting search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    // way[j] = previous column on the shortest path to column j.
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Augment along the path back to the virtual column.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    assignment
}

/// Cost of an assignment under exponent `p`, summed in row order so that two
/// equal assignments produce identical floating-point values.
pub fn assignment_cost(
    p: OrderP,
    xs: &PointCloud,
    ys: &PointCloud,
    assignment: &[usize],
) -> f64 {
    let n = xs.len() as f64;
    let exp = p.exponent();
    let sum: f64 = xs
        .points()
        .iter()
        .zip(assignment)
        .map(|(x, &j)| euclidean(x, &ys.points()[j]).powf(exp))
        .sum();
    (sum / n).powf(1.0 / exp)
}

/// Exact p-Wasserstein distance via the optimal assignment.
pub fn wasserstein_assignment(p: OrderP, xs: &PointCloud, ys: &PointCloud) -> Result<f64> {
    check_equal_sizes(xs, ys)?;
    let n = xs.len();
    if n > ASSIGNMENT_CAP {
        return Err(Error::SizeCapExceeded {
            n,
            cap: ASSIGNMENT_CAP,
        });
    }
    let exp = p.exponent();
    let cost: Vec<Vec<f64>> = xs
        .points()
        .iter()
        .map(|x| {
            ys.points()
                .iter()
                .map(|y| euclidean(x, y).powf(exp))
                .collect()
        })
        .collect();
    let assignment = solve_assignment(&cost);
    Ok(assignment_cost(p, xs, ys, &assignment))
}

/// Indexed coupling cost between two ensembles in the product parameter
/// space: `(mean_i (|theta_i^a - theta_i^b|^2 + |omega_i^a -
/// omega_i^b|^2)^{p/2})^{1/p}`. Pairs particles by index, so it upper-bounds
/// the optimal transport distance between the flattened clouds.
pub fn joint_param_distance(a: &EnsemblePair, b: &EnsemblePair, p: OrderP) -> Result<f64> {
    if a.n() != b.n() || a.m() != b.m() {
        return Err(Error::ShapeMismatch {
            context: "ensemble particle counts",
            expected: a.n() + a.m(),
            found: b.n() + b.m(),
        });
    }
    if a.n() != a.m() {
        return Err(Error::ShapeMismatch {
            context: "indexed coupling needs n == m",
            expected: a.n(),
            found: a.m(),
        });
    }
    if a.data_dim() != b.data_dim() || a.latent_dim() != b.latent_dim() {
        return Err(Error::ShapeMismatch {
            context: "ensemble dimensions",
            expected: a.data_dim(),
            found: b.data_dim(),
        });
    }
    let n = a.n() as f64;
    let exp = p.exponent();
    let sum: f64 = (0..a.n())
        .map(|i| {
            let dt = sq_dist(
                &a.generators()[i].to_flat(),
                &b.generators()[i].to_flat(),
            );
            let dw = sq_dist(
                &a.discriminators()[i].to_flat(),
                &b.discriminators()[i].to_flat(),
            );
            (dt + dw).powf(exp / 2.0)
        })
        .sum();
    Ok((sum / n).powf(1.0 / exp))
}

/// Flatten an ensemble into one cloud per side, in particle order.
pub fn ensemble_clouds(ens: &EnsemblePair) -> (PointCloud, PointCloud) {
    let thetas = PointCloud::new(ens.generators().iter().map(|p| p.to_flat()).collect())
        .expect("ensembles are non-empty");
    let omegas = PointCloud::new(ens.discriminators().iter().map(|p| p.to_flat()).collect())
        .expect("ensembles are non-empty");
    (thetas, omegas)
}

/// Squared 2-Wasserstein distance between ensemble pairs under the additive
/// product convention: `d2^2((mu1,nu1),(mu2,nu2)) = d2^2(mu1,mu2) +
/// d2^2(nu1,nu2)`.
pub fn ensemble_d2_squared(a: &EnsemblePair, b: &EnsemblePair) -> Result<f64> {
    let (ta, oa) = ensemble_clouds(a);
    let (tb, ob) = ensemble_clouds(b);
    let dt = wasserstein_assignment(OrderP::P2, &ta, &tb)?;
    let dw = wasserstein_assignment(OrderP::P2, &oa, &ob)?;
    Ok(dt * dt + dw * dw)
}
