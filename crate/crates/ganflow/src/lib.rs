//! A particle-level laboratory for WGAN parameter training and its
//! mean-field limit.
//!
//! The library simulates two coupled views of the same object: the discrete
//! stochastic training loop for shallow generator / discriminator networks
//! with parameter clipping, and the limiting flow of the parameter
//! distributions, integrated as a projected characteristic system on the
//! clipped box. Exact Wasserstein diagnostics, a closed-form two-mode example
//! with a conserved oscillation energy, and rate-fitting utilities round out
//! the toolkit.
//!
//! Modules follow the pipeline: [`model`] holds parameters and networks,
//! [`geometry`] the box projections, [`quad`] the expectation rules,
//! [`fields`] the energy and its gradient fields, [`dynamics`] the
//! integrators and coupled runs, [`transport`] exact optimal-transport
//! distances, [`toy`] the closed-form example, and [`rate`] log-log rate
//! fits.

pub mod dynamics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod model;
pub mod quad;
pub mod rate;
pub mod rng;
pub mod toy;
pub mod transport;

pub use dynamics::{CoupleConfig, MeanFieldConfig, SgdConfig, TrajectoryRecord};
pub use error::{Error, Result};
pub use model::{
    Activation, Atom, CoordLaw, DiscriminatorParticle, EnsemblePair, GaussianComponent,
    GeneratorParticle, GeneratorSlot, InitDistribution, TargetDistribution,
};
pub use quad::{Quadrature, XRule, ZRule};
pub use rate::{fit_rate, RateFit};
