//! The energy functional and the vector fields that drive both training
//! paths.
//!
//! ```text
//! E[mu, nu] = E_z D(G(z)) - E_x D(x)
//! ```
//!
//! Per-sample fields (`v_theta`, `v_omega`) differentiate the single-sample
//! integrands; their quadrature averages (`v_theta_mean`, `v_omega_mean`)
//! equal the energy gradients particle by particle:
//!
//! ```text
//! v_theta_mean(theta_i) = -N dE/dtheta_i      (descent)
//! v_omega_mean(omega_i) = +M dE/domega_i      (ascent)
//! ```
//!
//! The finite-difference suite in `tests/` is the arbiter for these signs and
//! for the `sigma'` factor in the theta field.
//!
//! The `*_all` variants evaluate every particle while computing the per-node
//! generator output and discriminator factor once; they produce bit-identical
//! results to the per-particle functions and are what the dynamics use.

use crate::error::Result;
use crate::model::{
    generator_eval, Activation, DiscriminatorParticle, EnsemblePair, GeneratorParticle,
    TargetDistribution,
};
use crate::quad::Quadrature;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-latent-node evaluation context shared by all particles:
/// `s_j = mean_m a^m b_j^m sigma'(b^m . G(z) + c^m)`, the common
/// discriminator factor of the theta field.
struct ZContext {
    s: Vec<f64>,
}

fn z_context(ensemble: &EnsemblePair, z: &[f64], act: &Activation) -> ZContext {
    let g = generator_eval(ensemble, z, act);
    let k = ensemble.data_dim();
    let mut s = vec![0.0; k];
    for p in ensemble.discriminators() {
        let slope = p.a * (act.first_derivative)(dot(&p.b, &g) + p.c);
        for j in 0..k {
            s[j] += p.b[j] * slope;
        }
    }
    let scale = 1.0 / ensemble.m() as f64;
    for v in &mut s {
        *v *= scale;
    }
    ZContext { s }
}

fn v_theta_at(ctx: &ZContext, theta: &GeneratorParticle, z: &[f64], act: &Activation) -> Vec<f64> {
    let l = theta.latent_dim();
    let mut out = Vec::with_capacity(theta.flat_len());
    for (j, slot) in theta.slots.iter().enumerate() {
        let u = dot(&slot.beta, z) + slot.gamma;
        let su = (act.eval)(u);
        let dsu = (act.first_derivative)(u);
        let factor = -ctx.s[j];
        out.push(factor * su);
        for r in 0..l {
            out.push(factor * slot.alpha * z[r] * dsu);
        }
        out.push(factor * slot.alpha * dsu);
    }
    out
}

/// `grad_omega [a sigma(b . y + c)]` for a fixed input `y`.
fn omega_gradient_at(
    y: &[f64],
    omega: &DiscriminatorParticle,
    act: &Activation,
) -> Vec<f64> {
    let u = dot(&omega.b, y) + omega.c;
    let su = (act.eval)(u);
    let dsu = (act.first_derivative)(u);
    let mut out = Vec::with_capacity(y.len() + 2);
    out.push(su);
    for yj in y {
        out.push(omega.a * yj * dsu);
    }
    out.push(omega.a * dsu);
    out
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn add_scaled(acc: &mut [f64], w: f64, v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += w * x;
    }
}

/// The energy `E_z D(G(z)) - E_x D(x)` under the given quadrature.
pub fn energy(
    ensemble: &EnsemblePair,
    target: &TargetDistribution,
    quad: &Quadrature,
    act: &Activation,
) -> Result<f64> {
    let z_pts = quad.z_points(ensemble.latent_dim())?;
    let x_pts = quad.x_points(target)?;
    let mut gen_term = 0.0;
    for (z, w) in &z_pts {
        let g = generator_eval(ensemble, z, act);
        gen_term += w * crate::model::discriminator_eval(ensemble, &g, act);
    }
    let mut data_term = 0.0;
    for (x, w) in &x_pts {
        data_term += w * crate::model::discriminator_eval(ensemble, x, act);
    }
    Ok(gen_term - data_term)
}

/// Per-sample theta field at latent draw `z`, flat layout `K(L+2)`.
///
/// Slot `j` is `-s_j(z) * (sigma(u_j), alpha_j z sigma'(u_j), alpha_j
/// sigma'(u_j))` with `u_j = beta_j . z + gamma_j` and `s_j` the common
/// discriminator factor averaged over `nu`.
pub fn v_theta(
    ensemble: &EnsemblePair,
    theta: &GeneratorParticle,
    z: &[f64],
    act: &Activation,
) -> Vec<f64> {
    v_theta_at(&z_context(ensemble, z, act), theta, z, act)
}

/// Per-sample omega field at draws `(z, x)`, flat layout `K + 2`:
/// `grad_omega [sigma(G(z); omega) - sigma(x; omega)]`.
pub fn v_omega(
    ensemble: &EnsemblePair,
    omega: &DiscriminatorParticle,
    z: &[f64],
    x: &[f64],
    act: &Activation,
) -> Vec<f64> {
    let g = generator_eval(ensemble, z, act);
    sub(
        &omega_gradient_at(&g, omega, act),
        &omega_gradient_at(x, omega, act),
    )
}

/// [`v_theta`] for every generator particle at a single latent draw, sharing
/// the discriminator factor. Entry `i` is bit-identical to the per-particle
/// call.
pub fn v_theta_all(ensemble: &EnsemblePair, z: &[f64], act: &Activation) -> Vec<Vec<f64>> {
    let ctx = z_context(ensemble, z, act);
    ensemble
        .generators()
        .iter()
        .map(|theta| v_theta_at(&ctx, theta, z, act))
        .collect()
}

/// [`v_omega`] for every discriminator particle at a single draw pair,
/// sharing the generator output. Entry `i` is bit-identical to the
/// per-particle call.
pub fn v_omega_all(
    ensemble: &EnsemblePair,
    z: &[f64],
    x: &[f64],
    act: &Activation,
) -> Vec<Vec<f64>> {
    let g = generator_eval(ensemble, z, act);
    ensemble
        .discriminators()
        .iter()
        .map(|omega| {
            sub(
                &omega_gradient_at(&g, omega, act),
                &omega_gradient_at(x, omega, act),
            )
        })
        .collect()
}

/// Quadrature average of [`v_theta`] over `z`.
pub fn v_theta_mean(
    ensemble: &EnsemblePair,
    theta: &GeneratorParticle,
    quad: &Quadrature,
    act: &Activation,
) -> Result<Vec<f64>> {
    let z_pts = quad.z_points(ensemble.latent_dim())?;
    let mut acc = vec![0.0; theta.flat_len()];
    for (z, w) in &z_pts {
        let ctx = z_context(ensemble, z, act);
        add_scaled(&mut acc, *w, &v_theta_at(&ctx, theta, z, act));
    }
    Ok(acc)
}

/// Quadrature average of [`v_omega`]. The two expectations factor, so this is
/// `E_z grad sigma(G(z); omega) - E_x grad sigma(x; omega)`; it depends on the
/// generator ensemble but not on the other discriminator particles.
pub fn v_omega_mean(
    ensemble: &EnsemblePair,
    omega: &DiscriminatorParticle,
    target: &TargetDistribution,
    quad: &Quadrature,
    act: &Activation,
) -> Result<Vec<f64>> {
    let z_pts = quad.z_points(ensemble.latent_dim())?;
    let x_pts = quad.x_points(target)?;
    let dim = ensemble.data_dim() + 2;
    let mut acc = vec![0.0; dim];
    for (z, w) in &z_pts {
        let g = generator_eval(ensemble, z, act);
        add_scaled(&mut acc, *w, &omega_gradient_at(&g, omega, act));
    }
    for (x, w) in &x_pts {
        add_scaled(&mut acc, -*w, &omega_gradient_at(x, omega, act));
    }
    Ok(acc)
}

/// [`v_theta_mean`] for every generator particle, sharing the per-node
/// contexts. Entry `i` is bit-identical to the per-particle call.
pub fn v_theta_mean_all(
    ensemble: &EnsemblePair,
    quad: &Quadrature,
    act: &Activation,
) -> Result<Vec<Vec<f64>>> {
    let z_pts = quad.z_points(ensemble.latent_dim())?;
    let ctxs: Vec<ZContext> = z_pts
        .iter()
        .map(|(z, _)| z_context(ensemble, z, act))
        .collect();
    Ok(ensemble
        .generators()
        .iter()
        .map(|theta| {
            let mut acc = vec![0.0; theta.flat_len()];
            for ((z, w), ctx) in z_pts.iter().zip(&ctxs) {
                add_scaled(&mut acc, *w, &v_theta_at(ctx, theta, z, act));
            }
            acc
        })
        .collect())
}

/// [`v_omega_mean`] for every discriminator particle, sharing the per-node
/// generator outputs. Entry `i` is bit-identical to the per-particle call.
pub fn v_omega_mean_all(
    ensemble: &EnsemblePair,
    target: &TargetDistribution,
    quad: &Quadrature,
    act: &Activation,
) -> Result<Vec<Vec<f64>>> {
    let z_pts = quad.z_points(ensemble.latent_dim())?;
    let x_pts = quad.x_points(target)?;
    let gs: Vec<Vec<f64>> = z_pts
        .iter()
        .map(|(z, _)| generator_eval(ensemble, z, act))
        .collect();
    let dim = ensemble.data_dim() + 2;
    Ok(ensemble
        .discriminators()
        .iter()
        .map(|omega| {
            let mut acc = vec![0.0; dim];
            for ((_, w), g) in z_pts.iter().zip(&gs) {
                add_scaled(&mut acc, *w, &omega_gradient_at(g, omega, act));
            }
            for (x, w) in &x_pts {
                add_scaled(&mut acc, -*w, &omega_gradient_at(x, omega, act));
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, GeneratorSlot, InitDistribution};
    use crate::rng::{substream, StreamPurpose};
    use rand::Rng;

    fn one_slot(alpha: f64, beta: f64, gamma: f64) -> GeneratorParticle {
        GeneratorParticle {
            slots: vec![GeneratorSlot {
                alpha,
                beta: vec![beta],
                gamma,
            }],
        }
    }

    fn disc(a: f64, b: f64, c: f64) -> DiscriminatorParticle {
        DiscriminatorParticle {
            a,
            b: vec![b],
            c,
        }
    }

    fn delta_target(x: f64) -> TargetDistribution {
        TargetDistribution::Atomic {
            atoms: vec![Atom {
                point: vec![x],
                weight: 1.0,
            }],
        }
    }

    #[test]
    fn energy_zero_discriminator() {
        let ens =
            EnsemblePair::new(vec![one_slot(0.4, 0.2, 0.1)], vec![disc(0.0, 0.5, -0.5)]).unwrap();
        let e = energy(
            &ens,
            &delta_target(0.3),
            &Quadrature::deterministic_1d(),
            &Activation::sigmoid(),
        )
        .unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn energy_constant_discriminator_cancels() {
        // D(x) = sigma(0) = 1/2 for all x, so the two terms cancel.
        let ens =
            EnsemblePair::new(vec![one_slot(0.4, 0.2, 0.1)], vec![disc(1.0, 0.0, 0.0)]).unwrap();
        let e = energy(
            &ens,
            &delta_target(0.3),
            &Quadrature::deterministic_1d(),
            &Activation::sigmoid(),
        )
        .unwrap();
        assert!(e.abs() < 1e-15);
    }

    #[test]
    fn energy_is_bounded() {
        let act = Activation::sigmoid();
        let init = InitDistribution::default();
        for seed in 0..50 {
            let ens = init.sample_ensemble(1, 1, 4, 4, seed).unwrap();
            let e = energy(
                &ens,
                &TargetDistribution::bimodal(1),
                &Quadrature::deterministic_1d(),
                &act,
            )
            .unwrap();
            assert!(e.abs() <= 2.0 * act.c2_bound);
        }
    }

    #[test]
    fn v_theta_zero_when_discriminator_flat() {
        let ens =
            EnsemblePair::new(vec![one_slot(0.7, 0.3, -0.2)], vec![disc(0.0, 0.9, 0.4)]).unwrap();
        let v = v_theta(
            &ens,
            &ens.generators()[0].clone(),
            &[0.6],
            &Activation::sigmoid(),
        );
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn v_theta_alpha_factor_structure() {
        // With alpha_j = 0 the beta and gamma components vanish; the alpha
        // component generally does not.
        let ens =
            EnsemblePair::new(vec![one_slot(0.0, 0.3, -0.2)], vec![disc(0.8, 0.9, 0.4)]).unwrap();
        let v = v_theta(
            &ens,
            &ens.generators()[0].clone(),
            &[0.6],
            &Activation::sigmoid(),
        );
        assert!(v[0] != 0.0);
        assert_eq!(v[1], 0.0);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn v_omega_vanishes_when_generator_matches_sample() {
        let ens =
            EnsemblePair::new(vec![one_slot(0.7, 0.3, -0.2)], vec![disc(0.8, 0.9, 0.4)]).unwrap();
        let act = Activation::sigmoid();
        let z = vec![0.25];
        let g = generator_eval(&ens, &z, &act);
        let v = v_omega(&ens, &ens.discriminators()[0].clone(), &z, &g, &act);
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn v_omega_a_factor_structure() {
        let ens =
            EnsemblePair::new(vec![one_slot(0.7, 0.3, -0.2)], vec![disc(0.0, 0.9, 0.4)]).unwrap();
        let v = v_omega(
            &ens,
            &ens.discriminators()[0].clone(),
            &[0.25],
            &[1.0],
            &Activation::sigmoid(),
        );
        assert!(v[0] != 0.0);
        assert_eq!(v[1], 0.0);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn v_omega_mean_vanishes_when_pushforward_matches_target() {
        // alpha = 0 makes G identically 0; against P_* = delta_0 the field is
        // zero for every omega.
        let ens =
            EnsemblePair::new(vec![one_slot(0.0, 0.3, -0.2)], vec![disc(0.8, 0.9, 0.4)]).unwrap();
        let act = Activation::sigmoid();
        let quad = Quadrature::deterministic_1d();
        let v = v_omega_mean(
            &ens,
            &ens.discriminators()[0].clone(),
            &delta_target(0.0),
            &quad,
            &act,
        )
        .unwrap();
        for c in v {
            assert!(c.abs() < 1e-14);
        }
    }

    #[test]
    fn v_theta_mean_zero_when_discriminator_flat() {
        let ens =
            EnsemblePair::new(vec![one_slot(0.7, 0.3, -0.2)], vec![disc(0.0, 0.9, 0.4)]).unwrap();
        let v = v_theta_mean(
            &ens,
            &ens.generators()[0].clone(),
            &Quadrature::deterministic_1d(),
            &Activation::sigmoid(),
        )
        .unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn batched_fields_match_per_particle_bitwise() {
        let init = InitDistribution::default();
        let ens = init.sample_ensemble(1, 1, 5, 7, 31).unwrap();
        let act = Activation::sigmoid();
        let quad = Quadrature::deterministic_1d();
        let target = TargetDistribution::bimodal(1);

        let all_theta = v_theta_mean_all(&ens, &quad, &act).unwrap();
        for (i, theta) in ens.generators().iter().enumerate() {
            assert_eq!(all_theta[i], v_theta_mean(&ens, theta, &quad, &act).unwrap());
        }
        let all_omega = v_omega_mean_all(&ens, &target, &quad, &act).unwrap();
        for (i, omega) in ens.discriminators().iter().enumerate() {
            assert_eq!(
                all_omega[i],
                v_omega_mean(&ens, omega, &target, &quad, &act).unwrap()
            );
        }
    }

    #[test]
    fn v_omega_mean_ignores_other_discriminators() {
        let init = InitDistribution::default();
        let base = init.sample_ensemble(1, 1, 4, 4, 55).unwrap();
        let target = TargetDistribution::bimodal(1);
        let quad = Quadrature::deterministic_1d();
        let act = Activation::sigmoid();
        let omega = base.discriminators()[0].clone();
        let v1 = v_omega_mean(&base, &omega, &target, &quad, &act).unwrap();

        let mut mutated = base.discriminators().to_vec();
        mutated[1] = disc(-0.3, 0.8, 0.1);
        mutated[2] = disc(0.9, -0.4, -0.6);
        let ens2 = EnsemblePair::new(base.generators().to_vec(), mutated).unwrap();
        let v2 = v_omega_mean(&ens2, &omega, &target, &quad, &act).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn sample_field_bounds() {
        // |v_omega| <= 1.5 (1 + |x| + mean|alpha|) and the componentwise
        // theta bounds with constant 1/4, on random instances.
        let init = InitDistribution::default();
        let act = Activation::sigmoid();
        let mut rng = substream(61, StreamPurpose::SelfTest, 0, 0);
        for seed in 0..10_000 {
            let ens = init.sample_ensemble(1, 1, 3, 3, seed).unwrap();
            let z = vec![rng.gen_range(-3.0..3.0)];
            let x = vec![rng.gen_range(-3.0..3.0)];
            let mean_abs_alpha: f64 = ens
                .generators()
                .iter()
                .map(|p| p.slots[0].alpha.abs())
                .sum::<f64>()
                / ens.n() as f64;

            let vo = v_omega(&ens, &ens.discriminators()[0].clone(), &z, &x, &act);
            let norm: f64 = vo.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 1.5 * (1.0 + x[0].abs() + mean_abs_alpha) + 1e-12);

            let theta = ens.generators()[0].clone();
            let vt = v_theta(&ens, &theta, &z, &act);
            assert!(vt[0].abs() <= 0.25 + 1e-12);
            let alpha = theta.slots[0].alpha.abs();
            assert!(vt[1].abs() <= 0.25 * alpha * (1.0 + z[0].abs()) + 1e-12);
            assert!(vt[2].abs() <= 0.25 * alpha * (1.0 + z[0].abs()) + 1e-12);
        }
    }
}
