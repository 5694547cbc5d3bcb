//! Quadrature rules for the two expectations in the energy and its fields:
//! `E_z` over the standard Gaussian latent law and `E_x` over the target.
//!
//! Gauss-Hermite (latent dimension 1 only) and exact atom enumeration give
//! deterministic rules for gradient checks; Monte Carlo rules cover training
//! paths and general targets.

use gauss_quad::hermite::GaussHermite;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_latent, sample_target, TargetDistribution};
use crate::rng::{substream, StreamPurpose};

/// Rule for `E_z`, `z ~ N(0, I_L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZRule {
    /// Deterministic Gauss-Hermite nodes; valid only for `L = 1`.
    GaussHermite { nodes: usize },
    MonteCarlo { seed: u64, samples: usize },
}

/// Rule for `E_x`, `x ~ P_*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum XRule {
    /// Enumerate the atoms of an atomic target with their weights.
    ExactAtomic,
    MonteCarlo { seed: u64, samples: usize },
}

/// A pair of rules, one per expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadrature {
    pub z_rule: ZRule,
    pub x_rule: XRule,
}

impl Quadrature {
    /// The deterministic default for one-dimensional latent spaces and atomic
    /// targets: 64 Gauss-Hermite nodes plus exact atom enumeration.
    pub fn deterministic_1d() -> Self {
        Quadrature {
            z_rule: ZRule::GaussHermite { nodes: 64 },
            x_rule: XRule::ExactAtomic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.z_rule {
            ZRule::GaussHermite { nodes } => {
                if nodes < 2 {
                    return Err(Error::InvalidParameter(
                        "gauss-hermite rule needs at least 2 nodes".into(),
                    ));
                }
            }
            ZRule::MonteCarlo { samples, .. } => {
                if samples == 0 {
                    return Err(Error::InvalidParameter(
                        "monte carlo z-rule needs samples >= 1".into(),
                    ));
                }
            }
        }
        if let XRule::MonteCarlo { samples, .. } = self.x_rule {
            if samples == 0 {
                return Err(Error::InvalidParameter(
                    "monte carlo x-rule needs samples >= 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// Re-key the Monte Carlo seeds by a step index so that successive steps
    /// of a run draw independent nodes. Deterministic rules are unchanged.
    pub fn rekeyed(&self, step: u64) -> Self {
        let mut out = *self;
        if let ZRule::MonteCarlo { seed, samples } = out.z_rule {
            out.z_rule = ZRule::MonteCarlo {
                seed: seed ^ step.wrapping_mul(0x9e3779b97f4a7c15),
                samples,
            };
        }
        if let XRule::MonteCarlo { seed, samples } = out.x_rule {
            out.x_rule = XRule::MonteCarlo {
                seed: seed ^ step.wrapping_mul(0xd1b54a32d192ed03),
                samples,
            };
        }
        out
    }

    /// Materialize the latent nodes and weights for dimension `l`.
    pub fn z_points(&self, l: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        match self.z_rule {
            ZRule::GaussHermite { nodes } => {
                if l != 1 {
                    return Err(Error::InvalidParameter(format!(
                        "gauss-hermite z-rule requires latent dimension 1, got {l}"
                    )));
                }
                Ok(gauss_hermite_gaussian(nodes)?
                    .into_iter()
                    .map(|(z, w)| (vec![z], w))
                    .collect())
            }
            ZRule::MonteCarlo { seed, samples } => {
                let mut rng = substream(seed, StreamPurpose::Quadrature, 0, 0);
                let w = 1.0 / samples as f64;
                Ok((0..samples)
                    .map(|_| (sample_latent(&mut rng, l), w))
                    .collect())
            }
        }
    }

    /// Materialize the target nodes and weights.
    pub fn x_points(&self, target: &TargetDistribution) -> Result<Vec<(Vec<f64>, f64)>> {
        match self.x_rule {
            XRule::ExactAtomic => match target.atoms() {
                Some(atoms) => Ok(atoms
                    .iter()
                    .map(|a| (a.point.clone(), a.weight))
                    .collect()),
                None => Err(Error::InvalidParameter(
                    "exact atomic x-rule requires an atomic target".into(),
                )),
            },
            XRule::MonteCarlo { seed, samples } => {
                let mut rng = substream(seed, StreamPurpose::Quadrature, 1, 0);
                let w = 1.0 / samples as f64;
                Ok((0..samples)
                    .map(|_| (sample_target(target, &mut rng), w))
                    .collect())
            }
        }
    }
}

/// Largest supported Gauss-Hermite rule. Above this the orthonormal Hermite
/// values used in the Newton polish approach f64 overflow.
pub const MAX_GH_NODES: usize = 200;

/// Evaluate the orthonormal Hermite values `h_0(t) .. h_n(t)` for the weight
/// `e^{-t^2}`, via the recurrence
/// `h_{k+1} = t sqrt(2/(k+1)) h_k - sqrt(k/(k+1)) h_{k-1}`.
fn orthonormal_hermite(n: usize, t: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(std::f64::consts::PI.powf(-0.25));
    if n >= 1 {
        h.push(t * std::f64::consts::SQRT_2 * h[0]);
    }
    for k in 1..n {
        let next = t * (2.0 / (k as f64 + 1.0)).sqrt() * h[k]
            - (k as f64 / (k as f64 + 1.0)).sqrt() * h[k - 1];
        h.push(next);
    }
    h
}

/// Nodes and weights for `integral f(z) dN(0,1)(z) = sum_i w_i f(z_i)`.
///
/// Takes the physicists' Gauss-Hermite rule (weight `e^{-t^2}`) from the
/// Golub-Welsch eigenvalue solve, polishes each node with Newton iterations
/// on the orthonormal Hermite polynomial (`h_n' = sqrt(2n) h_{n-1}`), and
/// recomputes the weights from the Christoffel function
/// `w_i = 1 / sum_{k<n} h_k(t_i)^2`. Rescaling by `z = sqrt(2) t`,
/// `w -> w / sqrt(pi)` turns it into a rule for the standard Gaussian.
/// Nodes are returned in ascending order.
pub fn gauss_hermite_gaussian(nodes: usize) -> Result<Vec<(f64, f64)>> {
    if nodes > MAX_GH_NODES {
        return Err(Error::InvalidParameter(format!(
            "gauss-hermite rule supports at most {MAX_GH_NODES} nodes, got {nodes}"
        )));
    }
    let rule = GaussHermite::new(nodes).map_err(|_| {
        Error::InvalidParameter("gauss-hermite rule needs at least 2 nodes".into())
    })?;
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(t, _)| {
            let mut t = t;
            for _ in 0..4 {
                let h = orthonormal_hermite(nodes, t);
                let deriv = (2.0 * nodes as f64).sqrt() * h[nodes - 1];
                let delta = h[nodes] / deriv;
                t -= delta;
                if delta.abs() <= 1e-16 * t.abs().max(1.0) {
                    break;
                }
            }
            let h = orthonormal_hermite(nodes - 1, t);
            let christoffel: f64 = h.iter().map(|v| v * v).sum();
            (
                std::f64::consts::SQRT_2 * t,
                1.0 / (christoffel * std::f64::consts::PI.sqrt()),
            )
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}
