//! Experiment drivers: each subcommand resolves its config sections, runs
//! the corresponding library routines, and emits CSV / JSON / plot-table
//! artifacts plus a hash manifest into the output directory.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use ganflow::dynamics::{
    coupled_run, meanfield_run, projected_euler, sgd_run, CoupleConfig, MeanFieldConfig,
    SgdConfig, TrajectoryRecord,
};
use ganflow::geometry::BoxDomain;
use ganflow::model::{Activation, EnsemblePair, TargetDistribution};
use ganflow::quad::{Quadrature, XRule, ZRule};
use ganflow::rate::{fit_rate, RateFit};
use ganflow::rng::{substream, StreamPurpose};
use ganflow::toy::{self, ToyState};
use ganflow::transport::{
    assignment_cost, solve_assignment, wasserstein_1d, wasserstein_assignment, OrderP,
    PointCloud,
};

use crate::config::{ExperimentKind, RunConfig};
use crate::emit::{dat_table, CsvBuilder, Emitter};
use crate::error::{AppError, Result};

fn run_err(e: ganflow::Error) -> AppError {
    AppError::Numerical(e.to_string())
}

/// Execute the configured experiment, writing artifacts under `out_dir`.
/// `threads` sizes the worker pool for multi-run experiments (0 = default).
pub fn execute(config: &RunConfig, out_dir: &Path, threads: usize) -> Result<()> {
    let mut emitter = Emitter::new(out_dir)?;
    // Echo the effective config (minus the output location, which must not
    // influence artifact bytes).
    let mut echo = config.clone();
    echo.out_dir = None;
    emitter.write_json("run_config.json", &echo)?;

    match config.experiment {
        ExperimentKind::Train => train(config, &mut emitter)?,
        ExperimentKind::Meanfield => meanfield(config, &mut emitter)?,
        ExperimentKind::Couple => couple(config, &mut emitter, threads)?,
        ExperimentKind::Toy => toy_experiment(config, &mut emitter)?,
        ExperimentKind::EulerRate => euler_rate(config, &mut emitter)?,
        ExperimentKind::WassersteinSelftest => wasserstein_selftest(config, &mut emitter)?,
    }
    emitter.finish()
}

// ── shared ensemble plumbing ──────────────────────────────────────────

fn build_initial(config: &RunConfig) -> Result<EnsemblePair> {
    let dims = config.dims.as_ref().expect("validated");
    let particles = config.particles.as_ref().expect("validated");
    config
        .init_distribution()
        .sample_ensemble(dims.k, dims.l, particles.n, particles.m, config.seed)
        .map_err(run_err)
}

/// Deterministic diagnostics quadrature: Gauss-Hermite plus exact atoms when
/// possible, otherwise fixed-seed Monte Carlo.
fn diagnostics_quadrature(l: usize, target: &TargetDistribution) -> Quadrature {
    let z_rule = if l == 1 {
        ZRule::GaussHermite { nodes: 64 }
    } else {
        ZRule::MonteCarlo {
            seed: 0x6469616774,
            samples: 4096,
        }
    };
    let x_rule = if target.atoms().is_some() {
        XRule::ExactAtomic
    } else {
        XRule::MonteCarlo {
            seed: 0x6469616778,
            samples: 4096,
        }
    };
    Quadrature { z_rule, x_rule }
}

fn emit_trajectory(record: &TrajectoryRecord, emitter: &mut Emitter) -> Result<()> {
    let mut csv = CsvBuilder::new(&["step", "time", "energy", "pinned_coords"]);
    for (step, d) in record.diagnostics.iter().enumerate() {
        csv.row(&[
            step.to_string(),
            format!("{}", d.time),
            format!("{}", d.energy),
            d.pinned_coords.to_string(),
        ]);
    }
    emitter.write_text("diagnostics.csv", &csv.finish())?;

    let final_state = record.final_state();
    let k = final_state.data_dim();
    let l = final_state.latent_dim();

    let mut header = vec!["particle".to_string()];
    for j in 0..k {
        header.push(format!("alpha_{j}"));
        for r in 0..l {
            header.push(format!("beta_{j}_{r}"));
        }
        header.push(format!("gamma_{j}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvBuilder::new(&header_refs);
    for (i, p) in final_state.generators().iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.to_flat().iter().map(|v| format!("{v}")));
        csv.row(&row);
    }
    emitter.write_text("generators_final.csv", &csv.finish())?;

    let mut header = vec!["particle".to_string(), "a".to_string()];
    for j in 0..k {
        header.push(format!("b_{j}"));
    }
    header.push("c".to_string());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvBuilder::new(&header_refs);
    for (i, p) in final_state.discriminators().iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.to_flat().iter().map(|v| format!("{v}")));
        csv.row(&row);
    }
    emitter.write_text("discriminators_final.csv", &csv.finish())
}

// ── train ─────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct TrainSummary {
    experiment: &'static str,
    steps: u64,
    time_step: f64,
    final_energy: f64,
    final_pinned_coords: usize,
}

fn train(config: &RunConfig, emitter: &mut Emitter) -> Result<()> {
    let sgd = config.sgd.as_ref().expect("validated");
    let target = config.target.as_ref().expect("validated");
    let initial = build_initial(config)?;
    let cfg = SgdConfig {
        h: sgd.h,
        n_c: sgd.n_c,
        steps: sgd.steps,
        seed: config.seed,
    };
    let diag_quad = diagnostics_quadrature(initial.latent_dim(), target);
    let act = Activation::sigmoid();
    let record = sgd_run(
        &initial,
        &cfg,
        target,
        &act,
        &diag_quad,
        config.snapshot_stride,
        |step| {
            if step % 1000 == 0 {
                eprintln!("[train] step {step}/{}", sgd.steps);
            }
        },
    )
    .map_err(run_err)?;

    emit_trajectory(&record, emitter)?;
    let last = record.diagnostics.last().expect("non-empty run");
    emitter.write_json(
        "summary.json",
        &TrainSummary {
            experiment: "train",
            steps: sgd.steps,
            time_step: cfg.time_step(initial.n()),
            final_energy: last.energy,
            final_pinned_coords: last.pinned_coords,
        },
    )
}

// ── meanfield ─────────────────────────────────────────────────────────

#[derive(Serialize)]
struct MeanFieldSummary {
    experiment: &'static str,
    steps: u64,
    dt: f64,
    horizon: f64,
    gamma_c: f64,
    final_energy: f64,
    final_pinned_coords: usize,
}

fn meanfield(config: &RunConfig, emitter: &mut Emitter) -> Result<()> {
    let mf = config.mean_field.as_ref().expect("validated");
    let target = config.target.as_ref().expect("validated");
    let initial = build_initial(config)?;
    let cfg = MeanFieldConfig {
        dt: mf.dt,
        horizon: mf.horizon,
        gamma_c: mf.gamma_c,
        quad: mf.quadrature,
    };
    let steps = (mf.horizon / mf.dt).round() as u64;
    let act = Activation::sigmoid();
    let record = meanfield_run(
        &initial,
        &cfg,
        target,
        &act,
        config.snapshot_stride,
        |step| {
            if step % 1000 == 0 {
                eprintln!("[meanfield] step {step}/{steps}");
            }
        },
    )
    .map_err(run_err)?;

    emit_trajectory(&record, emitter)?;
    let last = record.diagnostics.last().expect("non-empty run");
    emitter.write_json(
        "summary.json",
        &MeanFieldSummary {
            experiment: "meanfield",
            steps,
            dt: mf.dt,
            horizon: mf.horizon,
            gamma_c: mf.gamma_c,
            final_energy: last.energy,
            final_pinned_coords: last.pinned_coords,
        },
    )
}

// ── couple ────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct CoupleSummary {
    experiment: &'static str,
    h: f64,
    n_c: u32,
    horizon: f64,
    n_grid: Vec<usize>,
    seeds_per_n: u64,
    mean_costs: Vec<f64>,
    slope: Option<f64>,
    r_squared: Option<f64>,
}

fn couple(config: &RunConfig, emitter: &mut Emitter, threads: usize) -> Result<()> {
    let section = config.couple.as_ref().expect("validated");
    let dims = config.dims.as_ref().expect("validated");
    let target = config.target.as_ref().expect("validated").clone();
    let init = config.init_distribution();
    let act = Activation::sigmoid();

    let jobs: Vec<(usize, u64)> = section
        .n_grid
        .iter()
        .flat_map(|&n| (0..section.seeds_per_n).map(move |idx| (n, idx)))
        .collect();
    let total = jobs.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AppError::Io(format!("building worker pool: {e}")))?;

    // Results come back in job order regardless of scheduling, so the
    // emitted artifacts do not depend on the thread count.
    let results: Vec<std::result::Result<(f64, Option<f64>), ganflow::Error>> =
        pool.install(|| {
            jobs.par_iter()
                .enumerate()
                .map(|(job_idx, &(n, seed_idx))| {
                    let run_seed = substream(config.seed, StreamPurpose::RunSeed, n as u64, seed_idx)
                        .gen::<u64>();
                    let cfg = CoupleConfig {
                        n,
                        m: n,
                        k: dims.k,
                        l: dims.l,
                        h: section.h,
                        n_c: section.n_c,
                        horizon: section.horizon,
                        quad: section.quadrature,
                        record_assignment: section.record_assignment,
                    };
                    let series = coupled_run(&cfg, &target, &init, &act, run_seed)?;
                    eprintln!("[couple] run {}/{total} (n={n}, seed {seed_idx})", job_idx + 1);
                    let d2 = series
                        .assignment_cost_sq
                        .as_ref()
                        .map(|v| *v.last().expect("non-empty series"));
                    Ok((series.final_indexed_cost_sq(), d2))
                })
                .collect()
        });

    let mut per_run = Vec::with_capacity(total);
    for result in results {
        per_run.push(result.map_err(run_err)?);
    }

    let mut header = vec!["n", "seed_index", "coupling_cost_sq"];
    if section.record_assignment {
        header.push("d2_sq");
    }
    let mut runs_csv = CsvBuilder::new(&header);
    for (&(n, seed_idx), &(e, d2)) in jobs.iter().zip(&per_run) {
        let mut row = vec![
            n.to_string(),
            seed_idx.to_string(),
            format!("{e}"),
        ];
        if section.record_assignment {
            row.push(format!("{}", d2.expect("recorded")));
        }
        runs_csv.row(&row);
    }
    emitter.write_text("runs.csv", &runs_csv.finish())?;

    let mut means = Vec::new();
    let mut couple_csv = CsvBuilder::new(&["n", "mean_coupling_cost_sq", "stderr"]);
    for &n in &section.n_grid {
        let values: Vec<f64> = jobs
            .iter()
            .zip(&per_run)
            .filter(|((jn, _), _)| *jn == n)
            .map(|(_, (e, _))| *e)
            .collect();
        let count = values.len() as f64;
        let mean = values.iter().sum::<f64>() / count;
        let stderr = if values.len() > 1 {
            let var =
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
            (var / count).sqrt()
        } else {
            0.0
        };
        couple_csv.row(&[n.to_string(), format!("{mean}"), format!("{stderr}")]);
        means.push(mean);
    }
    emitter.write_text("couple.csv", &couple_csv.finish())?;

    let fit: Option<RateFit> = if section.n_grid.len() >= 3 {
        let xs: Vec<f64> = section.n_grid.iter().map(|&n| n as f64).collect();
        let fit = fit_rate(&xs, &means).map_err(run_err)?;
        emitter.write_json("rate_fit.json", &fit)?;
        Some(fit)
    } else {
        None
    };

    emitter.write_json(
        "summary.json",
        &CoupleSummary {
            experiment: "couple",
            h: section.h,
            n_c: section.n_c,
            horizon: section.horizon,
            n_grid: section.n_grid.clone(),
            seeds_per_n: section.seeds_per_n,
            mean_costs: means,
            slope: fit.as_ref().map(|f| f.slope),
            r_squared: fit.as_ref().map(|f| f.r_squared),
        },
    )
}

// ── toy ───────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct ToySummary {
    experiment: &'static str,
    gamma_c: f64,
    constrained: bool,
    dt: f64,
    horizon: f64,
    energy_initial: f64,
    max_relative_energy_drift: f64,
    tangency_level: f64,
    limit_bound: f64,
    sup_abs_g_second_half: f64,
    period_mean: Option<f64>,
    period_spread: Option<f64>,
}

fn toy_experiment(config: &RunConfig, emitter: &mut Emitter) -> Result<()> {
    let section = config.toy.as_ref().expect("validated");
    let s0 = ToyState::new(section.g0, section.omega0, section.gamma_c).map_err(run_err)?;
    let traj =
        toy::simulate(&s0, section.dt, section.horizon, section.constrained).map_err(run_err)?;

    let rows: Vec<Vec<f64>> = (0..traj.len())
        .map(|i| vec![traj.time(i), traj.g[i], traj.omega[i], traj.energy[i]])
        .collect();
    emitter.write_text("trajectory.dat", &dat_table(&rows))?;

    for &level in &section.contour_levels {
        emitter.write_text(
            &format!("contour_E{level}.dat"),
            &dat_table(&energy_contour(level, section.gamma_c)),
        )?;
    }

    let period = toy::detect_period(&traj);
    let half = traj.len() / 2;
    let sup_g = traj.g[half..]
        .iter()
        .fold(0.0f64, |acc, g| acc.max(g.abs()));
    emitter.write_json(
        "summary.json",
        &ToySummary {
            experiment: "toy",
            gamma_c: section.gamma_c,
            constrained: section.constrained,
            dt: section.dt,
            horizon: section.horizon,
            energy_initial: traj.energy[0],
            max_relative_energy_drift: traj.max_relative_energy_drift(),
            tangency_level: toy::tangency_level(section.gamma_c),
            limit_bound: toy::limit_bound(section.gamma_c),
            sup_abs_g_second_half: sup_g,
            period_mean: period.as_ref().map(|p| p.mean),
            period_spread: period.as_ref().map(|p| p.spread),
        },
    )
}

/// Closed polyline of the level set `2 cosh(g) + omega^2 / gamma_c = level`:
/// upper branch left to right, then lower branch back.
fn energy_contour(level: f64, gamma_c: f64) -> Vec<Vec<f64>> {
    let g_max = (level / 2.0).acosh();
    let samples = 400usize;
    let mut upper = Vec::with_capacity(samples + 1);
    for i in 0..=samples {
        let g = -g_max + 2.0 * g_max * i as f64 / samples as f64;
        let omega_sq = (gamma_c * (level - 2.0 * g.cosh())).max(0.0);
        upper.push(vec![g, omega_sq.sqrt()]);
    }
    let mut rows = upper.clone();
    for row in upper.iter().rev() {
        rows.push(vec![row[0], -row[1]]);
    }
    rows
}

// ── euler-rate ────────────────────────────────────────────────────────

#[derive(Serialize)]
struct EulerRateSummary {
    experiment: &'static str,
    t_final: f64,
    dts: Vec<f64>,
    errors: Vec<f64>,
    slope: f64,
    r_squared: f64,
}

fn rotation(x: &[f64]) -> Vec<f64> {
    vec![-x[1], x[0]]
}

fn euler_rate(config: &RunConfig, emitter: &mut Emitter) -> Result<()> {
    let section = config.euler_rate.as_ref().expect("validated");
    let domain = BoxDomain::unit(2);
    let mut errors = Vec::with_capacity(section.dts.len());
    for &dt in &section.dts {
        let coarse =
            projected_euler(rotation, &domain, &section.x0, dt, section.t_final).map_err(run_err)?;
        let fine = projected_euler(
            rotation,
            &domain,
            &section.x0,
            dt / section.reference_refinement as f64,
            section.t_final,
        )
        .map_err(run_err)?;
        let mut worst = 0.0f64;
        for (i, state) in coarse.states.iter().enumerate() {
            let reference = &fine.states[i * section.reference_refinement];
            let d: f64 = state
                .iter()
                .zip(reference)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d);
        }
        errors.push(worst);
    }

    let mut csv = CsvBuilder::new(&["dt", "sup_error"]);
    for (dt, err) in section.dts.iter().zip(&errors) {
        csv.row(&[format!("{dt}"), format!("{err}")]);
    }
    emitter.write_text("rates.csv", &csv.finish())?;

    let fit = fit_rate(&section.dts, &errors).map_err(run_err)?;
    emitter.write_json("rate_fit.json", &fit)?;
    emitter.write_json(
        "summary.json",
        &EulerRateSummary {
            experiment: "euler-rate",
            t_final: section.t_final,
            dts: section.dts.clone(),
            errors,
            slope: fit.slope,
            r_squared: fit.r_squared,
        },
    )
}

// ── wasserstein self-test ─────────────────────────────────────────────

#[derive(Serialize)]
struct SelfTestSummary {
    experiment: &'static str,
    instances: u64,
    brute_force_mismatches: u64,
    max_1d_deviation: f64,
    pass: bool,
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let smaller = all_permutations(n - 1);
    let mut out = Vec::new();
    for perm in smaller {
        for slot in 0..n {
            let mut next = perm.clone();
            next.insert(slot, n - 1);
            out.push(next);
        }
    }
    out
}

fn wasserstein_selftest(config: &RunConfig, emitter: &mut Emitter) -> Result<()> {
    let section = config.wasserstein_selftest.as_ref().expect("validated");
    let mut rng = substream(config.seed, StreamPurpose::SelfTest, 0, 0);
    let mut mismatches = 0u64;
    let mut max_dev_1d = 0.0f64;

    for _ in 0..section.instances {
        // Exactness against factorial brute force in the plane.
        let n = rng.gen_range(1..=section.max_points);
        let random_cloud = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| {
            PointCloud::new(
                (0..n)
                    .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                    .collect(),
            )
            .expect("non-empty")
        };
        let xs = random_cloud(&mut rng, n);
        let ys = random_cloud(&mut rng, n);
        let cost: Vec<Vec<f64>> = xs
            .points()
            .iter()
            .map(|x| {
                ys.points()
                    .iter()
                    .map(|y| {
                        let d2: f64 =
                            x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                        d2
                    })
                    .collect()
            })
            .collect();
        let solver_cost = assignment_cost(OrderP::P2, &xs, &ys, &solve_assignment(&cost));
        let brute = all_permutations(n)
            .into_iter()
            .map(|perm| assignment_cost(OrderP::P2, &xs, &ys, &perm))
            .min_by(f64::total_cmp)
            .expect("non-empty permutation set");
        if solver_cost != brute {
            mismatches += 1;
        }

        // Agreement with the sorting formula on the line.
        let n1 = rng.gen_range(1..=32);
        let a = PointCloud::from_scalars((0..n1).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .expect("non-empty");
        let b = PointCloud::from_scalars((0..n1).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .expect("non-empty");
        for p in [OrderP::P1, OrderP::P2, OrderP::P4] {
            let dev = (wasserstein_assignment(p, &a, &b).map_err(run_err)?
                - wasserstein_1d(p, &a, &b).map_err(run_err)?)
            .abs();
            max_dev_1d = max_dev_1d.max(dev);
        }
    }

    let pass = mismatches == 0 && max_dev_1d <= 1e-12;
    emitter.write_json(
        "selftest.json",
        &SelfTestSummary {
            experiment: "wasserstein-selftest",
            instances: section.instances,
            brute_force_mismatches: mismatches,
            max_1d_deviation: max_dev_1d,
            pass,
        },
    )?;
    if !pass {
        return Err(AppError::Numerical(format!(
            "wasserstein self-test failed: {mismatches} brute-force mismatches, max 1d deviation {max_dev_1d:e}"
        )));
    }
    Ok(())
}
