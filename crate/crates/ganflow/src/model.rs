//! Parameter containers, the activation function, network evaluation and the
//! latent / target samplers.
//!
//! A generator particle holds `K` triples `(alpha_j, beta_j, gamma_j)` with
//! `beta_j` in `R^L`; a discriminator particle holds `(a, b, c)` with `b` in
//! `R^K`, constrained to the box `Q = [-1,1]^(K+2)`. The networks are the
//! uniform averages over the particles:
//!
//! ```text
//! G(z)_j = mean_i alpha_j^i * sigma(beta_j^i . z + gamma_j^i)
//! D(x)   = mean_i a^i * sigma(b^i . x + c^i)
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, StreamPurpose};

// ── activation ────────────────────────────────────────────────────────

/// A scalar activation together with its first two derivatives and a common
/// bound for all three. Plain function pointers so the struct stays `Copy`.
#[derive(Clone, Copy)]
pub struct Activation {
    pub eval: fn(f64) -> f64,
    pub first_derivative: fn(f64) -> f64,
    pub second_derivative: fn(f64) -> f64,
    /// sup over u of |sigma|, |sigma'|, |sigma''|.
    pub c2_bound: f64,
}

fn sigmoid(u: f64) -> f64 {
    // Split on the sign of u so neither branch can overflow.
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_d1(u: f64) -> f64 {
    let s = sigmoid(u);
    s * (1.0 - s)
}

fn sigmoid_d2(u: f64) -> f64 {
    let s = sigmoid(u);
    s * (1.0 - s) * (1.0 - 2.0 * s)
}

impl Activation {
    /// The logistic sigmoid `1 / (1 + e^{-u})`.
    pub fn sigmoid() -> Self {
        Activation {
            eval: sigmoid,
            first_derivative: sigmoid_d1,
            second_derivative: sigmoid_d2,
            c2_bound: 1.0,
        }
    }
}

impl Default for Activation {
    fn default() -> Self {
        Activation::sigmoid()
    }
}

// ── particles ─────────────────────────────────────────────────────────

/// One output slot of a generator particle: `alpha * sigma(beta . z + gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSlot {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub gamma: f64,
}

/// A single atom of the generator parameter measure: `K` slots, one per data
/// coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParticle {
    pub slots: Vec<GeneratorSlot>,
}

impl GeneratorParticle {
    pub fn data_dim(&self) -> usize {
        self.slots.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.slots[0].beta.len()
    }

    /// Flat layout: `(alpha_1, beta_1, gamma_1, alpha_2, ...)`, length `K(L+2)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for slot in &self.slots {
            out.push(slot.alpha);
            out.extend_from_slice(&slot.beta);
            out.push(slot.gamma);
        }
        out
    }

    pub fn from_flat(flat: &[f64], k: usize, l: usize) -> Result<Self> {
        if flat.len() != k * (l + 2) {
            return Err(Error::ShapeMismatch {
                context: "GeneratorParticle::from_flat",
                expected: k * (l + 2),
                found: flat.len(),
            });
        }
        let slots = flat
            .chunks_exact(l + 2)
            .map(|c| GeneratorSlot {
                alpha: c[0],
                beta: c[1..=l].to_vec(),
                gamma: c[l + 1],
            })
            .collect();
        Ok(GeneratorParticle { slots })
    }

    pub fn flat_len(&self) -> usize {
        self.data_dim() * (self.latent_dim() + 2)
    }

    fn is_finite(&self) -> bool {
        self.slots.iter().all(|s| {
            s.alpha.is_finite() && s.gamma.is_finite() && s.beta.iter().all(|b| b.is_finite())
        })
    }
}

/// A single atom of the discriminator parameter measure, constrained to
/// `Q = [-1,1]^(K+2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParticle {
    pub a: f64,
    pub b: Vec<f64>,
    pub c: f64,
}

impl DiscriminatorParticle {
    pub fn data_dim(&self) -> usize {
        self.b.len()
    }

    /// Flat layout: `(a, b, c)`, length `K + 2`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.b.len() + 2);
        out.push(self.a);
        out.extend_from_slice(&self.b);
        out.push(self.c);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() < 3 {
            return Err(Error::ShapeMismatch {
                context: "DiscriminatorParticle::from_flat",
                expected: 3,
                found: flat.len(),
            });
        }
        Ok(DiscriminatorParticle {
            a: flat[0],
            b: flat[1..flat.len() - 1].to_vec(),
            c: flat[flat.len() - 1],
        })
    }

    pub fn in_box(&self) -> bool {
        self.a.abs() <= 1.0 && self.c.abs() <= 1.0 && self.b.iter().all(|v| v.abs() <= 1.0)
    }

    fn is_finite(&self) -> bool {
        self.a.is_finite() && self.c.is_finite() && self.b.iter().all(|v| v.is_finite())
    }
}

// ── ensembles ─────────────────────────────────────────────────────────

/// `N` generator particles and `M` discriminator particles with implicit
/// uniform weights `1/N` and `1/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePair {
    generators: Vec<GeneratorParticle>,
    discriminators: Vec<DiscriminatorParticle>,
}

impl EnsemblePair {
    /// Validates: both lists non-empty, consistent dimensions, finite entries,
    /// and every discriminator inside `Q`.
    pub fn new(
        generators: Vec<GeneratorParticle>,
        discriminators: Vec<DiscriminatorParticle>,
    ) -> Result<Self> {
        if generators.is_empty() || discriminators.is_empty() {
            return Err(Error::InvalidParameter(
                "ensemble needs at least one particle on each side".into(),
            ));
        }
        let k = generators[0].data_dim();
        let l = generators[0].latent_dim();
        if k == 0 || l == 0 {
            return Err(Error::InvalidParameter(
                "dimensions K and L must be at least 1".into(),
            ));
        }
        for g in &generators {
            if g.data_dim() != k || g.slots.iter().any(|s| s.beta.len() != l) {
                return Err(Error::ShapeMismatch {
                    context: "generator particle dims",
                    expected: k * (l + 2),
                    found: g.flat_len(),
                });
            }
            if !g.is_finite() {
                return Err(Error::NonFinite("generator particle"));
            }
        }
        for d in &discriminators {
            if d.data_dim() != k {
                return Err(Error::ShapeMismatch {
                    context: "discriminator particle dims",
                    expected: k,
                    found: d.data_dim(),
                });
            }
            if !d.is_finite() {
                return Err(Error::NonFinite("discriminator particle"));
            }
            if !d.in_box() {
                return Err(Error::OutsideDomain(
                    "discriminator particle outside Q = [-1,1]^(K+2)".into(),
                ));
            }
        }
        Ok(EnsemblePair {
            generators,
            discriminators,
        })
    }

    pub fn generators(&self) -> &[GeneratorParticle] {
        &self.generators
    }

    pub fn discriminators(&self) -> &[DiscriminatorParticle] {
        &self.discriminators
    }

    pub fn n(&self) -> usize {
        self.generators.len()
    }

    pub fn m(&self) -> usize {
        self.discriminators.len()
    }

    pub fn data_dim(&self) -> usize {
        self.generators[0].data_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.generators[0].latent_dim()
    }
}

// ── target distribution ───────────────────────────────────────────────

/// One weighted atom of an atomic target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// One component of a Gaussian mixture target. `cov` is row-major `K x K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub weight: f64,
}

/// The data law `P_*` on `R^K`: a finite atomic mixture or a Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetDistribution {
    Atomic { atoms: Vec<Atom> },
    GaussianMixture { components: Vec<GaussianComponent> },
}

const WEIGHT_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor of a small SPD matrix.
fn cholesky(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = cov.len();
    let mut chol = vec![vec![0.0; n]; n];
    for i in 0..n {
        if cov[i].len() != n {
            return Err(Error::ShapeMismatch {
                context: "covariance matrix",
                expected: n,
                found: cov[i].len(),
            });
        }
        for j in 0..=i {
            let cross: f64 = chol[i][..j]
                .iter()
                .zip(&chol[j][..j])
                .map(|(a, b)| a * b)
                .sum();
            let sum = cov[i][j] - cross;
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "covariance matrix is not positive definite".into(),
                    ));
                }
                chol[i][j] = sum.sqrt();
            } else {
                chol[i][j] = sum / chol[j][j];
            }
        }
    }
    Ok(chol)
}

impl TargetDistribution {
    /// A balanced two-atom law on `{-e_1, +e_1}` in `R^K`.
    pub fn bimodal(k: usize) -> Self {
        let mut lo = vec![0.0; k];
        let mut hi = vec![0.0; k];
        lo[0] = -1.0;
        hi[0] = 1.0;
        TargetDistribution::Atomic {
            atoms: vec![
                Atom {
                    point: lo,
                    weight: 0.5,
                },
                Atom {
                    point: hi,
                    weight: 0.5,
                },
            ],
        }
    }

    /// Checks weights (nonnegative, summing to one within 1e-12), dimensions
    /// against `k`, and positive-definiteness of Gaussian covariances.
    pub fn validate(&self, k: usize) -> Result<()> {
        let weights: Vec<f64> = match self {
            TargetDistribution::Atomic { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidParameter("target has no atoms".into()));
                }
                for a in atoms {
                    if a.point.len() != k {
                        return Err(Error::ShapeMismatch {
                            context: "target atom dimension",
                            expected: k,
                            found: a.point.len(),
                        });
                    }
                    if !a.point.iter().all(|v| v.is_finite()) {
                        return Err(Error::NonFinite("target atom"));
                    }
                }
                atoms.iter().map(|a| a.weight).collect()
            }
            TargetDistribution::GaussianMixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter("target has no components".into()));
                }
                for c in components {
                    if c.mean.len() != k {
                        return Err(Error::ShapeMismatch {
                            context: "target component mean dimension",
                            expected: k,
                            found: c.mean.len(),
                        });
                    }
                    cholesky(&c.cov)?;
                }
                components.iter().map(|c| c.weight).collect()
            }
        };
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidParameter(
                "target weights must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidParameter(format!(
                "target weights sum to {total}, expected 1 within {WEIGHT_TOL:e}"
            )));
        }
        Ok(())
    }

    /// The atoms of an atomic target, or `None` for a Gaussian mixture.
    pub fn atoms(&self) -> Option<&[Atom]> {
        match self {
            TargetDistribution::Atomic { atoms } => Some(atoms),
            TargetDistribution::GaussianMixture { .. } => None,
        }
    }
}

// ── initial distribution ──────────────────────────────────────────────

/// A one-dimensional law with bounded support for a single parameter
/// coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoordLaw {
    Uniform { lo: f64, hi: f64 },
    TruncatedGaussian { mean: f64, sd: f64, lo: f64, hi: f64 },
}

impl CoordLaw {
    pub fn uniform_unit() -> Self {
        CoordLaw::Uniform { lo: -1.0, hi: 1.0 }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            CoordLaw::Uniform { lo, hi } => (lo, hi),
            CoordLaw::TruncatedGaussian { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "coordinate law needs finite bounds lo < hi, got [{lo}, {hi}]"
            )));
        }
        if let CoordLaw::TruncatedGaussian { sd, .. } = *self {
            if !(sd.is_finite() && sd > 0.0) {
                return Err(Error::InvalidParameter(
                    "truncated gaussian needs sd > 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            CoordLaw::Uniform { lo, hi } => rng.gen_range(lo..hi),
            CoordLaw::TruncatedGaussian { mean, sd, lo, hi } => loop {
                let v: f64 = mean + sd * rng.sample::<f64, _>(StandardNormal);
                if v >= lo && v <= hi {
                    return v;
                }
            },
        }
    }
}

/// Per-coordinate initialization laws for generator and discriminator
/// parameters. Bounded supports keep the alpha-marginal compactly supported;
/// the discriminator laws must live inside `[-1, 1]` so the initial ensemble
/// sits in `Q` without projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitDistribution {
    pub alpha: CoordLaw,
    pub beta: CoordLaw,
    pub gamma: CoordLaw,
    pub a: CoordLaw,
    pub b: CoordLaw,
    pub c: CoordLaw,
}

impl Default for InitDistribution {
    /// Everything uniform on `[-1, 1]`.
    fn default() -> Self {
        let u = CoordLaw::uniform_unit();
        InitDistribution {
            alpha: u,
            beta: u,
            gamma: u,
            a: u,
            b: u,
            c: u,
        }
    }
}

impl InitDistribution {
    pub fn validate(&self) -> Result<()> {
        for law in [self.alpha, self.beta, self.gamma, self.a, self.b, self.c] {
            law.validate()?;
        }
        for (name, law) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            let (lo, hi) = law.support();
            if lo < -1.0 || hi > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "discriminator law for {name} must have support inside [-1, 1], got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    fn sample_generator(&self, k: usize, l: usize, rng: &mut impl Rng) -> GeneratorParticle {
        let slots = (0..k)
            .map(|_| GeneratorSlot {
                alpha: self.alpha.sample(rng),
                beta: (0..l).map(|_| self.beta.sample(rng)).collect(),
                gamma: self.gamma.sample(rng),
            })
            .collect();
        GeneratorParticle { slots }
    }

    fn sample_discriminator(&self, k: usize, rng: &mut impl Rng) -> DiscriminatorParticle {
        DiscriminatorParticle {
            a: self.a.sample(rng),
            b: (0..k).map(|_| self.b.sample(rng)).collect(),
            c: self.c.sample(rng),
        }
    }

    /// Draw an i.i.d. ensemble. Each particle gets its own substream keyed by
    /// its index, so the first `N` particles agree across runs with larger `N`.
    pub fn sample_ensemble(
        &self,
        k: usize,
        l: usize,
        n: usize,
        m: usize,
        master_seed: u64,
    ) -> Result<EnsemblePair> {
        self.validate()?;
        let generators = (0..n)
            .map(|i| {
                let mut rng = substream(master_seed, StreamPurpose::InitGenerator, i as u64, 0);
                self.sample_generator(k, l, &mut rng)
            })
            .collect();
        let discriminators = (0..m)
            .map(|i| {
                let mut rng = substream(master_seed, StreamPurpose::InitDiscriminator, i as u64, 0);
                self.sample_discriminator(k, &mut rng)
            })
            .collect();
        EnsemblePair::new(generators, discriminators)
    }
}

// ── evaluation ────────────────────────────────────────────────────────

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `G(z)`: the mean over generator particles, coordinate by coordinate.
pub fn generator_eval(ensemble: &EnsemblePair, z: &[f64], act: &Activation) -> Vec<f64> {
    let k = ensemble.data_dim();
    let mut out = vec![0.0; k];
    for particle in ensemble.generators() {
        for (j, slot) in particle.slots.iter().enumerate() {
            out[j] += slot.alpha * (act.eval)(dot(&slot.beta, z) + slot.gamma);
        }
    }
    let scale = 1.0 / ensemble.n() as f64;
    for v in &mut out {
        *v *= scale;
    }
    out
}

/// `D(x)`: the mean over discriminator particles.
pub fn discriminator_eval(ensemble: &EnsemblePair, x: &[f64], act: &Activation) -> f64 {
    let sum: f64 = ensemble
        .discriminators()
        .iter()
        .map(|p| p.a * (act.eval)(dot(&p.b, x) + p.c))
        .sum();
    sum / ensemble.m() as f64
}

/// A standard normal draw in `R^L`.
pub fn sample_latent(rng: &mut impl Rng, l: usize) -> Vec<f64> {
    (0..l).map(|_| rng.sample(StandardNormal)).collect()
}

/// One draw from the target distribution.
pub fn sample_target(dist: &TargetDistribution, rng: &mut impl Rng) -> Vec<f64> {
    match dist {
        TargetDistribution::Atomic { atoms } => {
            let u: f64 = rng.gen::<f64>();
            let mut acc = 0.0;
            for atom in atoms {
                acc += atom.weight;
                if u < acc {
                    return atom.point.clone();
                }
            }
            atoms.last().expect("validated non-empty").point.clone()
        }
        TargetDistribution::GaussianMixture { components } => {
            let u: f64 = rng.gen::<f64>();
            let mut acc = 0.0;
            let mut chosen = components.last().expect("validated non-empty");
            for comp in components {
                acc += comp.weight;
                if u < acc {
                    chosen = comp;
                    break;
                }
            }
            let k = chosen.mean.len();
            let chol = cholesky(&chosen.cov).expect("validated covariance");
            let xi: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            (0..k)
                .map(|i| chosen.mean[i] + dot(&chol[i][..=i], &xi[..=i]))
                .collect()
        }
    }
}
