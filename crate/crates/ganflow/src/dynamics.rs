//! Time evolution: the stochastic training loop with clipping, the
//! mean-field particle flow via projected forward Euler, a generic projected
//! Euler integrator on boxes, trajectory interpolation, and coupled runs of
//! both paths from a shared initialization.
//!
//! One training step with learning rate `h` moves every particle by the
//! per-sample fields scaled by the induced time step `h/N` (generators) and
//! `h/M` (discriminators), then clips the discriminators back onto the box.
//! The mean-field flow replaces per-sample fields by their quadrature
//! averages, scales the discriminator field by the critic speed-up
//! `gamma_c`, and takes the same project-after-step form. Both paths live on
//! the time grid `t_n = n h/N`, which is what makes them comparable particle
//! by particle.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fields::{v_omega_all, v_omega_mean_all, v_theta_all, v_theta_mean_all};
use crate::geometry::{project_box, BoxDomain};
use crate::model::{
    sample_latent, sample_target, Activation, DiscriminatorParticle, EnsemblePair,
    GeneratorParticle, TargetDistribution,
};
use crate::quad::Quadrature;

// ── configuration ─────────────────────────────────────────────────────

/// Parameters of the stochastic training loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    /// Learning rate `h >= 0`. The induced time step is `h/N`.
    pub h: f64,
    /// Number of critic updates per outer step, at least 1.
    pub n_c: u32,
    /// Outer iterations to run.
    pub steps: u64,
    /// Master seed for the per-step sample substreams.
    pub seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(
                "learning rate h must be finite and nonnegative".into(),
            ));
        }
        if self.n_c < 1 {
            return Err(Error::InvalidParameter("n_c must be at least 1".into()));
        }
        Ok(())
    }

    /// The time step `h/N` induced on an ensemble with `n` generator
    /// particles.
    pub fn time_step(&self, n: usize) -> f64 {
        self.h / n as f64
    }
}

/// Parameters of the mean-field flow.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Critic speed-up multiplying the discriminator field.
    pub gamma_c: f64,
    pub quad: Quadrature,
}

impl MeanFieldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if !(self.gamma_c >= 0.0 && self.gamma_c.is_finite()) {
            return Err(Error::InvalidParameter(
                "gamma_c must be finite and nonnegative".into(),
            ));
        }
        self.quad.validate()
    }
}

// ── records ───────────────────────────────────────────────────────────

/// Scalar diagnostics recorded at every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub time: f64,
    pub energy: f64,
    /// Discriminator coordinates sitting exactly on a face of the box.
    pub pinned_coords: usize,
    /// Indexed coupling cost against a companion path, when one exists.
    pub coupling_error: Option<f64>,
}

/// Strided ensemble snapshots plus per-step diagnostics.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    snapshot_times: Vec<f64>,
    snapshots: Vec<EnsemblePair>,
    pub diagnostics: Vec<Diagnostics>,
}

impl TrajectoryRecord {
    fn new() -> Self {
        TrajectoryRecord {
            snapshot_times: Vec::new(),
            snapshots: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn push_snapshot(&mut self, time: f64, state: &EnsemblePair) {
        debug_assert!(self
            .snapshot_times
            .last()
            .map(|last| time > *last)
            .unwrap_or(true));
        self.snapshot_times.push(time);
        self.snapshots.push(state.clone());
    }

    pub fn snapshot_times(&self) -> &[f64] {
        &self.snapshot_times
    }

    pub fn snapshots(&self) -> &[EnsemblePair] {
        &self.snapshots
    }

    pub fn final_state(&self) -> &EnsemblePair {
        self.snapshots.last().expect("records hold >= 1 snapshot")
    }
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - s) * x + s * y).collect()
}

/// State at time `t`, linearly interpolated particle by particle between the
/// recorded snapshots (exact at snapshot times).
pub fn interpolate(record: &TrajectoryRecord, t: f64) -> Result<EnsemblePair> {
    let times = record.snapshot_times();
    let (lo, hi) = match (times.first(), times.last()) {
        (Some(lo), Some(hi)) => (*lo, *hi),
        _ => return Err(Error::InvalidParameter("empty trajectory record".into())),
    };
    if t < lo || t > hi {
        return Err(Error::TimeOutOfRange { t, lo, hi });
    }
    let idx = times.partition_point(|x| *x <= t);
    if idx == times.len() {
        return Ok(record.snapshots()[idx - 1].clone());
    }
    let (t0, t1) = (times[idx - 1], times[idx]);
    if t == t0 {
        return Ok(record.snapshots()[idx - 1].clone());
    }
    let s = (t - t0) / (t1 - t0);
    let a = &record.snapshots()[idx - 1];
    let b = &record.snapshots()[idx];
    let k = a.data_dim();
    let l = a.latent_dim();
    let generators = a
        .generators()
        .iter()
        .zip(b.generators())
        .map(|(pa, pb)| GeneratorParticle::from_flat(&lerp(&pa.to_flat(), &pb.to_flat(), s), k, l))
        .collect::<Result<Vec<_>>>()?;
    let discriminators = a
        .discriminators()
        .iter()
        .zip(b.discriminators())
        .map(|(pa, pb)| DiscriminatorParticle::from_flat(&lerp(&pa.to_flat(), &pb.to_flat(), s)))
        .collect::<Result<Vec<_>>>()?;
    EnsemblePair::new(generators, discriminators)
}

// ── training steps ────────────────────────────────────────────────────

/// The samples consumed by one outer training step.
///
/// `critic` holds one `(z, x)` pair per critic sub-step, shared by all
/// particles within the sub-step. When `generator_z` is `None` the generator
/// update reuses the single critic sample and the step-start discriminators
/// (the merged single-sample form used for coupling analysis); when it is
/// `Some`, the generator sees its own fresh latent draw and the updated
/// discriminators.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdStepSamples {
    pub critic: Vec<(Vec<f64>, Vec<f64>)>,
    pub generator_z: Option<Vec<f64>>,
}

/// Draw the samples for one outer step: `n_c` critic pairs, plus a separate
/// generator draw when `n_c > 1`.
pub fn draw_step_samples(
    cfg: &SgdConfig,
    target: &TargetDistribution,
    l: usize,
    rng: &mut impl Rng,
) -> SgdStepSamples {
    let critic = (0..cfg.n_c)
        .map(|_| (sample_latent(rng, l), sample_target(target, rng)))
        .collect();
    let generator_z = if cfg.n_c == 1 {
        None
    } else {
        Some(sample_latent(rng, l))
    };
    SgdStepSamples {
        critic,
        generator_z,
    }
}

/// One outer training step on fixed samples.
///
/// Critic sub-steps move every discriminator by `(h/M) v_omega` against the
/// step-start generators and clip back onto the box; the generator update
/// moves every generator by `(h/N) v_theta`.
pub fn sgd_step_with_samples(
    state: &EnsemblePair,
    cfg: &SgdConfig,
    samples: &SgdStepSamples,
    act: &Activation,
) -> Result<EnsemblePair> {
    cfg.validate()?;
    if samples.critic.len() != cfg.n_c as usize {
        return Err(Error::ShapeMismatch {
            context: "critic samples",
            expected: cfg.n_c as usize,
            found: samples.critic.len(),
        });
    }
    let k = state.data_dim();
    let disc_box = BoxDomain::unit(k + 2);
    let eta_disc = cfg.h / state.m() as f64;
    let eta_gen = cfg.h / state.n() as f64;

    // Critic sub-steps: the generator ensemble stays frozen, so the fields
    // only need each particle's own coordinates.
    let mut discriminators = state.discriminators().to_vec();
    for (z, x) in &samples.critic {
        let stepped = EnsemblePair::new(state.generators().to_vec(), discriminators)?;
        let fields = v_omega_all(&stepped, z, x, act);
        discriminators = stepped
            .discriminators()
            .iter()
            .zip(&fields)
            .map(|(p, v)| {
                let flat: Vec<f64> = p
                    .to_flat()
                    .iter()
                    .zip(v)
                    .map(|(w, f)| w + eta_disc * f)
                    .collect();
                DiscriminatorParticle::from_flat(&project_box(&disc_box, &flat))
            })
            .collect::<Result<Vec<_>>>()?;
    }

    // Generator update.
    let (z_gen, disc_for_gen) = match &samples.generator_z {
        None => (&samples.critic[0].0, state.discriminators().to_vec()),
        Some(z) => (z, discriminators.clone()),
    };
    let view = EnsemblePair::new(state.generators().to_vec(), disc_for_gen)?;
    let theta_fields = v_theta_all(&view, z_gen, act);
    let generators = state
        .generators()
        .iter()
        .zip(&theta_fields)
        .map(|(p, v)| {
            let flat: Vec<f64> = p
                .to_flat()
                .iter()
                .zip(v)
                .map(|(w, f)| w + eta_gen * f)
                .collect();
            GeneratorParticle::from_flat(&flat, k, state.latent_dim())
        })
        .collect::<Result<Vec<_>>>()?;

    EnsemblePair::new(generators, discriminators)
}

/// One outer training step, drawing fresh samples from `rng`.
pub fn sgd_step(
    state: &EnsemblePair,
    cfg: &SgdConfig,
    target: &TargetDistribution,
    act: &Activation,
    rng: &mut impl Rng,
) -> Result<EnsemblePair> {
    cfg.validate()?;
    let samples = draw_step_samples(cfg, target, state.latent_dim(), rng);
    sgd_step_with_samples(state, cfg, &samples, act)
}

/// One projected-Euler step of the mean-field flow, with all fields
/// evaluated on the frozen previous ensemble:
///
/// ```text
/// theta_i <- theta_i + dt v_theta_mean(theta_i)
/// omega_i <- clip(omega_i + dt gamma_c v_omega_mean(omega_i))
/// ```
///
/// `step` re-keys Monte Carlo quadrature rules so successive steps draw
/// independent nodes; deterministic rules ignore it.
pub fn meanfield_step(
    state: &EnsemblePair,
    cfg: &MeanFieldConfig,
    target: &TargetDistribution,
    act: &Activation,
    step: u64,
) -> Result<EnsemblePair> {
    let quad = cfg.quad.rekeyed(step);
    let k = state.data_dim();
    let disc_box = BoxDomain::unit(k + 2);

    let theta_fields = v_theta_mean_all(state, &quad, act)?;
    let omega_fields = v_omega_mean_all(state, target, &quad, act)?;

    let generators = state
        .generators()
        .iter()
        .zip(&theta_fields)
        .map(|(p, v)| {
            let flat: Vec<f64> = p
                .to_flat()
                .iter()
                .zip(v)
                .map(|(w, f)| w + cfg.dt * f)
                .collect();
            GeneratorParticle::from_flat(&flat, k, state.latent_dim())
        })
        .collect::<Result<Vec<_>>>()?;
    let discriminators = state
        .discriminators()
        .iter()
        .zip(&omega_fields)
        .map(|(p, v)| {
            let flat: Vec<f64> = p
                .to_flat()
                .iter()
                .zip(v)
                .map(|(w, f)| w + cfg.dt * cfg.gamma_c * f)
                .collect();
            DiscriminatorParticle::from_flat(&project_box(&disc_box, &flat))
        })
        .collect::<Result<Vec<_>>>()?;

    EnsemblePair::new(generators, discriminators)
}

// ── generic projected Euler on a box ──────────────────────────────────

/// A trajectory of the generic box integrator, recorded at every step.
#[derive(Debug, Clone)]
pub struct FlowRecord {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl FlowRecord {
    /// State at a recorded grid index.
    pub fn state(&self, idx: usize) -> &[f64] {
        &self.states[idx]
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("records hold >= 1 state")
    }
}

/// Projected forward Euler for an arbitrary vector field on a box:
/// `x_{n+1} = clip(x_n + dt V(x_n))`. The caller is responsible for the
/// field being bounded and Lipschitz on the box.
pub fn projected_euler(
    field: impl Fn(&[f64]) -> Vec<f64>,
    domain: &BoxDomain,
    x0: &[f64],
    dt: f64,
    t_final: f64,
) -> Result<FlowRecord> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    if !domain.contains(x0) {
        return Err(Error::OutsideDomain(
            "projected_euler start must lie in the box".into(),
        ));
    }
    let steps = (t_final / dt).round() as usize;
    let mut record = FlowRecord {
        dt,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
    };
    let mut x = x0.to_vec();
    record.times.push(0.0);
    record.states.push(x.clone());
    for n in 0..steps {
        let v = field(&x);
        let stepped: Vec<f64> = x.iter().zip(&v).map(|(xi, vi)| xi + dt * vi).collect();
        x = project_box(domain, &stepped);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("projected_euler state"));
        }
        record.times.push((n + 1) as f64 * dt);
        record.states.push(x.clone());
    }
    Ok(record)
}

// ── run drivers ───────────────────────────────────────────────────────

fn pinned_coordinate_count(state: &EnsemblePair) -> usize {
    state
        .discriminators()
        .iter()
        .map(|p| p.to_flat().iter().filter(|v| v.abs() == 1.0).count())
        .sum()
}

fn diagnostics_row(
    state: &EnsemblePair,
    time: f64,
    target: &TargetDistribution,
    diag_quad: &Quadrature,
    act: &Activation,
    coupling_error: Option<f64>,
) -> Result<Diagnostics> {
    let energy = crate::fields::energy(state, target, diag_quad, act)?;
    if !energy.is_finite() {
        return Err(Error::NonFinite("energy diagnostic"));
    }
    Ok(Diagnostics {
        time,
        energy,
        pinned_coords: pinned_coordinate_count(state),
        coupling_error,
    })
}

/// Run the training loop, recording diagnostics every step and snapshots
/// every `stride` steps (the initial and final states are always kept).
/// `progress` is called once per completed step.
pub fn sgd_run(
    initial: &EnsemblePair,
    cfg: &SgdConfig,
    target: &TargetDistribution,
    act: &Activation,
    diag_quad: &Quadrature,
    stride: usize,
    mut progress: impl FnMut(u64),
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let stride = stride.max(1);
    let dt = cfg.time_step(initial.n());
    let mut record = TrajectoryRecord::new();
    let mut state = initial.clone();
    record.push_snapshot(0.0, &state);
    record
        .diagnostics
        .push(diagnostics_row(&state, 0.0, target, diag_quad, act, None)?);
    for step in 0..cfg.steps {
        let mut rng = crate::rng::substream(
            cfg.seed,
            crate::rng::StreamPurpose::TrainingSamples,
            step,
            0,
        );
        state = sgd_step(&state, cfg, target, act, &mut rng)?;
        let time = (step + 1) as f64 * dt;
        record
            .diagnostics
            .push(diagnostics_row(&state, time, target, diag_quad, act, None)?);
        if (step + 1) % stride as u64 == 0 || step + 1 == cfg.steps {
            record.push_snapshot(time, &state);
        }
        progress(step + 1);
    }
    Ok(record)
}

/// Run the mean-field flow; same recording contract as [`sgd_run`].
pub fn meanfield_run(
    initial: &EnsemblePair,
    cfg: &MeanFieldConfig,
    target: &TargetDistribution,
    act: &Activation,
    stride: usize,
    mut progress: impl FnMut(u64),
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let stride = stride.max(1);
    let steps = (cfg.horizon / cfg.dt).round() as u64;
    let mut record = TrajectoryRecord::new();
    let mut state = initial.clone();
    record.push_snapshot(0.0, &state);
    record
        .diagnostics
        .push(diagnostics_row(&state, 0.0, target, &cfg.quad, act, None)?);
    for step in 0..steps {
        state = meanfield_step(&state, cfg, target, act, step)?;
        let time = (step + 1) as f64 * cfg.dt;
        record
            .diagnostics
            .push(diagnostics_row(&state, time, target, &cfg.quad, act, None)?);
        if (step + 1) % stride as u64 == 0 || step + 1 == steps {
            record.push_snapshot(time, &state);
        }
        progress(step + 1);
    }
    Ok(record)
}

// ── coupled runs ──────────────────────────────────────────────────────

/// Configuration of a coupled run: both paths share the initialization, the
/// time grid `t_n = n h/N`, and the horizon. The critic speed-up of the
/// mean-field path is forced to `gamma_c = n_c N / M`, the regime in which
/// the two paths approximate each other.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupleConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub l: usize,
    pub h: f64,
    pub n_c: u32,
    pub horizon: f64,
    /// Quadrature for the mean-field fields.
    pub quad: Quadrature,
    /// Also record the exact assignment distance (capped solver) per step.
    pub record_assignment: bool,
}

impl CoupleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.k == 0 || self.l == 0 {
            return Err(Error::InvalidParameter(
                "couple run needs n, m, k, l >= 1".into(),
            ));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(
                "couple run needs a positive learning rate".into(),
            ));
        }
        if self.n_c < 1 {
            return Err(Error::InvalidParameter("n_c must be at least 1".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        self.quad.validate()
    }

    pub fn gamma_c(&self) -> f64 {
        self.n_c as f64 * self.n as f64 / self.m as f64
    }
}

/// Per-step coupling diagnostics between the two paths.
#[derive(Debug, Clone)]
pub struct CoupledSeries {
    pub times: Vec<f64>,
    /// Indexed squared coupling cost
    /// `e(t) = mean_i (|theta_i^sgd - theta_i^mf|^2 + |omega_i^sgd - omega_i^mf|^2)`.
    pub indexed_cost_sq: Vec<f64>,
    /// Exact squared transport distance (sum of both sides), when recorded.
    pub assignment_cost_sq: Option<Vec<f64>>,
}

impl CoupledSeries {
    pub fn final_indexed_cost_sq(&self) -> f64 {
        *self
            .indexed_cost_sq
            .last()
            .expect("series holds >= 1 entry")
    }
}

fn indexed_cost_sq(a: &EnsemblePair, b: &EnsemblePair) -> f64 {
    let n = a.n();
    let mut sum = 0.0;
    for i in 0..n {
        let ta = a.generators()[i].to_flat();
        let tb = b.generators()[i].to_flat();
        sum += ta
            .iter()
            .zip(&tb)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
        let oa = a.discriminators()[i].to_flat();
        let ob = b.discriminators()[i].to_flat();
        sum += oa
            .iter()
            .zip(&ob)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
    }
    sum / n as f64
}

/// Run the training path and the mean-field path from one sampled
/// initialization and record their distance on the shared grid.
pub fn coupled_run(
    cfg: &CoupleConfig,
    target: &TargetDistribution,
    init: &crate::model::InitDistribution,
    act: &Activation,
    seed: u64,
) -> Result<CoupledSeries> {
    cfg.validate()?;
    target.validate(cfg.k)?;
    if cfg.record_assignment && cfg.n != cfg.m {
        return Err(Error::InvalidParameter(
            "assignment recording needs n == m".into(),
        ));
    }
    if cfg.n != cfg.m {
        return Err(Error::InvalidParameter(
            "the indexed coupling cost needs n == m".into(),
        ));
    }

    let initial = init.sample_ensemble(cfg.k, cfg.l, cfg.n, cfg.m, seed)?;
    let dt = cfg.h / cfg.n as f64;
    let steps = (cfg.horizon / dt).round() as u64;

    let sgd_cfg = SgdConfig {
        h: cfg.h,
        n_c: cfg.n_c,
        steps,
        seed,
    };
    let mf_cfg = MeanFieldConfig {
        dt,
        horizon: cfg.horizon,
        gamma_c: cfg.gamma_c(),
        quad: cfg.quad,
    };

    let mut sgd_state = initial.clone();
    let mut mf_state = initial;
    let mut series = CoupledSeries {
        times: Vec::with_capacity(steps as usize + 1),
        indexed_cost_sq: Vec::with_capacity(steps as usize + 1),
        assignment_cost_sq: cfg.record_assignment.then(Vec::new),
    };

    let record = |time: f64,
                      a: &EnsemblePair,
                      b: &EnsemblePair,
                      series: &mut CoupledSeries|
     -> Result<()> {
        let e = indexed_cost_sq(a, b);
        if !e.is_finite() {
            return Err(Error::NonFinite("coupling cost"));
        }
        series.times.push(time);
        series.indexed_cost_sq.push(e);
        if let Some(d2) = series.assignment_cost_sq.as_mut() {
            d2.push(crate::transport::ensemble_d2_squared(a, b)?);
        }
        Ok(())
    };

    record(0.0, &sgd_state, &mf_state, &mut series)?;
    for step in 0..steps {
        let mut rng = crate::rng::substream(
            seed,
            crate::rng::StreamPurpose::TrainingSamples,
            step,
            0,
        );
        sgd_state = sgd_step(&sgd_state, &sgd_cfg, target, act, &mut rng)?;
        mf_state = meanfield_step(&mf_state, &mf_cfg, target, act, step)?;
        record((step + 1) as f64 * dt, &sgd_state, &mf_state, &mut series)?;
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeneratorSlot, InitDistribution};
    use crate::rng::{substream, StreamPurpose};

    fn act() -> Activation {
        Activation::sigmoid()
    }

    fn bimodal() -> TargetDistribution {
        TargetDistribution::bimodal(1)
    }

    fn small_ensemble(seed: u64) -> EnsemblePair {
        InitDistribution::default()
            .sample_ensemble(1, 1, 3, 3, seed)
            .unwrap()
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let state = small_ensemble(1);
        let cfg = SgdConfig {
            h: 0.0,
            n_c: 1,
            steps: 1,
            seed: 0,
        };
        let mut rng = substream(0, StreamPurpose::SelfTest, 0, 0);
        let next = sgd_step(&state, &cfg, &bimodal(), &act(), &mut rng).unwrap();
        assert_eq!(state, next);
    }

    #[test]
    fn flat_discriminator_freezes_generators() {
        // All a^i = 0 kills the theta field; the a-components still move.
        let gens = vec![
            GeneratorParticle {
                slots: vec![GeneratorSlot {
                    alpha: 0.5,
                    beta: vec![0.3],
                    gamma: -0.1,
                }],
            };
            2
        ];
        let discs = vec![
            DiscriminatorParticle {
                a: 0.0,
                b: vec![0.4],
                c: 0.2,
            },
            DiscriminatorParticle {
                a: 0.0,
                b: vec![-0.6],
                c: 0.1,
            },
        ];
        let state = EnsemblePair::new(gens, discs).unwrap();
        let cfg = SgdConfig {
            h: 0.5,
            n_c: 1,
            steps: 1,
            seed: 0,
        };
        let mut rng = substream(9, StreamPurpose::SelfTest, 0, 0);
        let next = sgd_step(&state, &cfg, &bimodal(), &act(), &mut rng).unwrap();
        assert_eq!(state.generators(), next.generators());
        for (before, after) in state.discriminators().iter().zip(next.discriminators()) {
            assert_ne!(before.a, after.a, "a-component should move");
        }
    }

    #[test]
    fn single_particle_step_matches_hand_evaluation() {
        // K = L = N = M = 1, fixed (z, x): spell the update out by hand.
        let sigma = |u: f64| 1.0 / (1.0 + (-u).exp());
        let dsigma = |u: f64| sigma(u) * (1.0 - sigma(u));
        let (alpha, beta, gamma) = (0.6, -0.4, 0.2);
        let (a, b, c) = (0.8, -0.5, 0.3);
        let (z, x) = (0.7, -1.0);
        let h = 0.25;

        let state = EnsemblePair::new(
            vec![GeneratorParticle {
                slots: vec![GeneratorSlot {
                    alpha,
                    beta: vec![beta],
                    gamma,
                }],
            }],
            vec![DiscriminatorParticle {
                a,
                b: vec![b],
                c,
            }],
        )
        .unwrap();
        let cfg = SgdConfig {
            h,
            n_c: 1,
            steps: 1,
            seed: 0,
        };
        let samples = SgdStepSamples {
            critic: vec![(vec![z], vec![x])],
            generator_z: None,
        };
        let next = sgd_step_with_samples(&state, &cfg, &samples, &act()).unwrap();

        let u = beta * z + gamma;
        let g = alpha * sigma(u);
        let d = b * g + c;
        let dx = b * x + c;
        // Descent direction for theta, ascent for omega.
        let v_alpha = -a * b * dsigma(d) * sigma(u);
        let v_beta = -a * b * dsigma(d) * alpha * z * dsigma(u);
        let v_gamma = -a * b * dsigma(d) * alpha * dsigma(u);
        let v_a = sigma(d) - sigma(dx);
        let v_b = a * g * dsigma(d) - a * x * dsigma(dx);
        let v_c = a * dsigma(d) - a * dsigma(dx);

        let slot = &next.generators()[0].slots[0];
        assert!((slot.alpha - (alpha + h * v_alpha)).abs() < 1e-15);
        assert!((slot.beta[0] - (beta + h * v_beta)).abs() < 1e-15);
        assert!((slot.gamma - (gamma + h * v_gamma)).abs() < 1e-15);
        let disc = &next.discriminators()[0];
        assert!((disc.a - (a + h * v_a).clamp(-1.0, 1.0)).abs() < 1e-15);
        assert!((disc.b[0] - (b + h * v_b).clamp(-1.0, 1.0)).abs() < 1e-15);
        assert!((disc.c - (c + h * v_c).clamp(-1.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn discriminators_stay_feasible_under_large_steps() {
        let state = small_ensemble(3);
        let cfg = SgdConfig {
            h: 50.0,
            n_c: 2,
            steps: 1,
            seed: 0,
        };
        let mut rng = substream(10, StreamPurpose::SelfTest, 0, 0);
        let mut s = state;
        for _ in 0..20 {
            s = sgd_step(&s, &cfg, &bimodal(), &act(), &mut rng).unwrap();
            assert!(s.discriminators().iter().all(|p| p.in_box()));
        }
    }

    #[test]
    fn meanfield_zero_dt_is_identity_in_the_limit() {
        // dt must be positive; the nearby statement that survives is that the
        // update scales linearly with dt near zero.
        let state = small_ensemble(4);
        let target = bimodal();
        let mk = |dt: f64| MeanFieldConfig {
            dt,
            horizon: dt,
            gamma_c: 1.0,
            quad: Quadrature::deterministic_1d(),
        };
        let s1 = meanfield_step(&state, &mk(1e-6), &target, &act(), 0).unwrap();
        let drift: f64 = indexed_cost_sq(&state, &s1).sqrt();
        assert!(drift < 1e-5, "drift {drift}");
    }

    #[test]
    fn meanfield_pins_outward_face() {
        // A discriminator with a strongly outward field coordinate ends on
        // the face after one sufficiently large step.
        let state = small_ensemble(5);
        let target = bimodal();
        let cfg = MeanFieldConfig {
            dt: 100.0,
            horizon: 100.0,
            gamma_c: 1.0,
            quad: Quadrature::deterministic_1d(),
        };
        let next = meanfield_step(&state, &cfg, &target, &act(), 0).unwrap();
        assert!(next.discriminators().iter().all(|p| p.in_box()));
        let pinned = pinned_coordinate_count(&next);
        assert!(pinned > 0, "a 100-second step should hit the box");
    }

    #[test]
    fn projected_euler_zero_field_constant() {
        let q = BoxDomain::unit(2);
        let rec = projected_euler(|_| vec![0.0, 0.0], &q, &[0.3, -0.4], 0.01, 1.0).unwrap();
        assert_eq!(rec.states.len(), 101);
        for s in &rec.states {
            assert_eq!(s, &vec![0.3, -0.4]);
        }
    }

    #[test]
    fn projected_euler_constant_outward_field_parks_on_face() {
        let q = BoxDomain::unit(2);
        let rec = projected_euler(|_| vec![1.0, 0.0], &q, &[0.0, 0.2], 0.01, 3.0).unwrap();
        let hit = rec
            .states
            .iter()
            .position(|s| s[0] == 1.0)
            .expect("reaches the face");
        assert!(rec.times[hit] <= 1.0 + 0.011);
        for s in &rec.states[hit..] {
            assert_eq!(s[0], 1.0);
            assert_eq!(s[1], 0.2);
        }
    }

    #[test]
    fn projected_euler_rejects_outside_start() {
        let q = BoxDomain::unit(2);
        assert!(projected_euler(|_| vec![0.0, 0.0], &q, &[1.5, 0.0], 0.01, 1.0).is_err());
    }

    #[test]
    fn interpolation_grid_and_midpoint() {
        let state = small_ensemble(6);
        let cfg = SgdConfig {
            h: 0.5,
            n_c: 1,
            steps: 4,
            seed: 2,
        };
        let rec = sgd_run(
            &state,
            &cfg,
            &bimodal(),
            &act(),
            &Quadrature::deterministic_1d(),
            1,
            |_| {},
        )
        .unwrap();
        let times = rec.snapshot_times().to_vec();
        // Exact at grid points.
        for (i, t) in times.iter().enumerate() {
            assert_eq!(&interpolate(&rec, *t).unwrap(), &rec.snapshots()[i]);
        }
        // Midpoint is the per-particle average and stays feasible.
        let mid = 0.5 * (times[1] + times[2]);
        let state_mid = interpolate(&rec, mid).unwrap();
        for i in 0..state_mid.n() {
            let a = rec.snapshots()[1].generators()[i].to_flat();
            let b = rec.snapshots()[2].generators()[i].to_flat();
            let m = state_mid.generators()[i].to_flat();
            for j in 0..m.len() {
                assert!((m[j] - 0.5 * (a[j] + b[j])).abs() < 1e-15);
            }
        }
        assert!(state_mid.discriminators().iter().all(|p| p.in_box()));
        // Out of range is an error.
        assert!(interpolate(&rec, -0.1).is_err());
        assert!(interpolate(&rec, times.last().unwrap() + 0.1).is_err());
    }

    #[test]
    fn coupled_run_zero_rate_stays_together() {
        let cfg = CoupleConfig {
            n: 4,
            m: 4,
            k: 1,
            l: 1,
            h: 1e-12,
            n_c: 1,
            horizon: 1e-11,
            quad: Quadrature::deterministic_1d(),
            record_assignment: true,
        };
        let series = coupled_run(
            &cfg,
            &bimodal(),
            &InitDistribution::default(),
            &act(),
            7,
        )
        .unwrap();
        assert_eq!(series.indexed_cost_sq[0], 0.0);
        for e in &series.indexed_cost_sq {
            assert!(*e < 1e-20);
        }
        for d in series.assignment_cost_sq.as_ref().unwrap() {
            assert!(*d < 1e-20);
        }
    }

    #[test]
    fn determinism_across_repeat_runs() {
        let cfg = CoupleConfig {
            n: 8,
            m: 8,
            k: 1,
            l: 1,
            h: 0.5,
            n_c: 1,
            horizon: 0.5,
            quad: Quadrature::deterministic_1d(),
            record_assignment: false,
        };
        let target = bimodal();
        let init = InitDistribution::default();
        let s1 = coupled_run(&cfg, &target, &init, &act(), 42).unwrap();
        let s2 = coupled_run(&cfg, &target, &init, &act(), 42).unwrap();
        assert_eq!(s1.indexed_cost_sq, s2.indexed_cost_sq);
        let s3 = coupled_run(&cfg, &target, &init, &act(), 43).unwrap();
        assert_ne!(s1.indexed_cost_sq, s3.indexed_cost_sq);
    }
}
