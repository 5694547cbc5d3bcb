//! The run configuration document: one JSON file per experiment, with every
//! section validated up front and unknown keys rejected so typos surface as
//! errors naming the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ganflow::model::{InitDistribution, TargetDistribution};
use ganflow::quad::Quadrature;

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Train,
    Meanfield,
    Couple,
    Toy,
    EulerRate,
    WassersteinSelftest,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Train => "train",
            ExperimentKind::Meanfield => "meanfield",
            ExperimentKind::Couple => "couple",
            ExperimentKind::Toy => "toy",
            ExperimentKind::EulerRate => "euler-rate",
            ExperimentKind::WassersteinSelftest => "wasserstein-selftest",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub k: usize,
    pub l: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Particles {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSection {
    pub h: f64,
    pub n_c: u32,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldSection {
    pub dt: f64,
    pub horizon: f64,
    pub gamma_c: f64,
    pub quadrature: Quadrature,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleSection {
    pub h: f64,
    pub n_c: u32,
    pub horizon: f64,
    pub n_grid: Vec<usize>,
    pub seeds_per_n: u64,
    pub quadrature: Quadrature,
    #[serde(default)]
    pub record_assignment: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySection {
    pub gamma_c: f64,
    pub g0: f64,
    pub omega0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub constrained: bool,
    #[serde(default)]
    pub contour_levels: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerRateSection {
    pub dts: Vec<f64>,
    pub t_final: f64,
    pub x0: Vec<f64>,
    /// The reference trajectory runs at `dt / reference_refinement`.
    pub reference_refinement: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WassersteinSection {
    pub instances: u64,
    /// Brute-force comparison covers clouds up to this many points.
    pub max_points: usize,
}

/// The whole run document. Sections irrelevant to the chosen experiment may
/// be present (they are ignored); required ones are checked by `validate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Dims>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<Particles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgd: Option<SgdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_field: Option<MeanFieldSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couple: Option<CoupleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler_rate: Option<EulerRateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wasserstein_selftest: Option<WassersteinSection>,
}

fn default_stride() -> usize {
    10
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Io(format!("reading {}: {e}", path.display())))?;
    let config: RunConfig =
        serde_json::from_str(&text).map_err(|e| AppError::Config(format!("{e}")))?;
    config.validate()?;
    Ok(config)
}

fn bad(field: &str, message: &str) -> AppError {
    AppError::Config(format!("{field}: {message}"))
}

impl RunConfig {
    /// Field-level validation of everything the chosen experiment will use.
    pub fn validate(&self) -> Result<()> {
        if self.snapshot_stride == 0 {
            return Err(bad("snapshot_stride", "must be at least 1"));
        }
        match self.experiment {
            ExperimentKind::Train => {
                let (dims, _) = self.ensemble_sections()?;
                let sgd = self
                    .sgd
                    .as_ref()
                    .ok_or_else(|| bad("sgd", "required for the train experiment"))?;
                validate_sgd(sgd)?;
                self.validate_target(dims)?;
                self.validate_init()?;
            }
            ExperimentKind::Meanfield => {
                let (dims, _) = self.ensemble_sections()?;
                let mf = self
                    .mean_field
                    .as_ref()
                    .ok_or_else(|| bad("mean_field", "required for the meanfield experiment"))?;
                validate_mean_field(mf)?;
                self.validate_target(dims)?;
                self.validate_init()?;
            }
            ExperimentKind::Couple => {
                // Particle counts come from couple.n_grid, so the particles
                // section is not consulted here.
                let dims = self.dims_section()?;
                let couple = self
                    .couple
                    .as_ref()
                    .ok_or_else(|| bad("couple", "required for the couple experiment"))?;
                validate_couple(couple)?;
                self.validate_target(dims)?;
                self.validate_init()?;
            }
            ExperimentKind::Toy => {
                let toy = self
                    .toy
                    .as_ref()
                    .ok_or_else(|| bad("toy", "required for the toy experiment"))?;
                validate_toy(toy)?;
            }
            ExperimentKind::EulerRate => {
                let er = self
                    .euler_rate
                    .as_ref()
                    .ok_or_else(|| bad("euler_rate", "required for the euler-rate experiment"))?;
                validate_euler_rate(er)?;
            }
            ExperimentKind::WassersteinSelftest => {
                let ws = self.wasserstein_selftest.as_ref().ok_or_else(|| {
                    bad(
                        "wasserstein_selftest",
                        "required for the wasserstein-selftest experiment",
                    )
                })?;
                if ws.instances == 0 {
                    return Err(bad("wasserstein_selftest.instances", "must be at least 1"));
                }
                if !(1..=9).contains(&ws.max_points) {
                    return Err(bad(
                        "wasserstein_selftest.max_points",
                        "must be between 1 and 9 (factorial brute force)",
                    ));
                }
            }
        }
        Ok(())
    }

    fn dims_section(&self) -> Result<&Dims> {
        let dims = self
            .dims
            .as_ref()
            .ok_or_else(|| bad("dims", "required for ensemble experiments"))?;
        if dims.k == 0 {
            return Err(bad("dims.k", "must be at least 1"));
        }
        if dims.l == 0 {
            return Err(bad("dims.l", "must be at least 1"));
        }
        Ok(dims)
    }

    fn ensemble_sections(&self) -> Result<(&Dims, &Particles)> {
        let dims = self.dims_section()?;
        let particles = self
            .particles
            .as_ref()
            .ok_or_else(|| bad("particles", "required for ensemble experiments"))?;
        if particles.n == 0 {
            return Err(bad("particles.n", "must be at least 1"));
        }
        if particles.m == 0 {
            return Err(bad("particles.m", "must be at least 1"));
        }
        Ok((dims, particles))
    }

    fn validate_target(&self, dims: &Dims) -> Result<()> {
        let target = self
            .target
            .as_ref()
            .ok_or_else(|| bad("target", "required for ensemble experiments"))?;
        target
            .validate(dims.k)
            .map_err(|e| bad("target", &e.to_string()))
    }

    fn validate_init(&self) -> Result<()> {
        if let Some(init) = &self.init {
            init.validate().map_err(|e| bad("init", &e.to_string()))?;
        }
        Ok(())
    }

    /// The initialization laws, defaulting to uniform on `[-1, 1]`.
    pub fn init_distribution(&self) -> InitDistribution {
        self.init.unwrap_or_default()
    }
}

fn validate_sgd(sgd: &SgdSection) -> Result<()> {
    if !(sgd.h >= 0.0 && sgd.h.is_finite()) {
        return Err(bad("sgd.h", "must be finite and nonnegative"));
    }
    if sgd.n_c == 0 {
        return Err(bad("sgd.n_c", "must be at least 1"));
    }
    if sgd.steps == 0 {
        return Err(bad("sgd.steps", "must be at least 1"));
    }
    Ok(())
}

fn validate_mean_field(mf: &MeanFieldSection) -> Result<()> {
    if !(mf.dt > 0.0 && mf.dt.is_finite()) {
        return Err(bad("mean_field.dt", "must be positive"));
    }
    if !(mf.horizon > 0.0 && mf.horizon.is_finite()) {
        return Err(bad("mean_field.horizon", "must be positive"));
    }
    if !(mf.gamma_c >= 0.0 && mf.gamma_c.is_finite()) {
        return Err(bad("mean_field.gamma_c", "must be finite and nonnegative"));
    }
    mf.quadrature
        .validate()
        .map_err(|e| bad("mean_field.quadrature", &e.to_string()))
}

fn validate_couple(couple: &CoupleSection) -> Result<()> {
    if !(couple.h > 0.0 && couple.h.is_finite()) {
        return Err(bad("couple.h", "must be positive"));
    }
    if couple.n_c == 0 {
        return Err(bad("couple.n_c", "must be at least 1"));
    }
    if !(couple.horizon > 0.0 && couple.horizon.is_finite()) {
        return Err(bad("couple.horizon", "must be positive"));
    }
    if couple.n_grid.is_empty() {
        return Err(bad("couple.n_grid", "must name at least one particle count"));
    }
    if couple.n_grid.iter().any(|n| *n == 0) {
        return Err(bad("couple.n_grid", "entries must be at least 1"));
    }
    if couple.seeds_per_n == 0 {
        return Err(bad("couple.seeds_per_n", "must be at least 1"));
    }
    couple
        .quadrature
        .validate()
        .map_err(|e| bad("couple.quadrature", &e.to_string()))
}

fn validate_toy(toy: &ToySection) -> Result<()> {
    if !(toy.gamma_c > 0.0 && toy.gamma_c.is_finite()) {
        return Err(bad("toy.gamma_c", "must be positive"));
    }
    if !(toy.dt > 0.0 && toy.dt.is_finite()) {
        return Err(bad("toy.dt", "must be positive"));
    }
    if !(toy.horizon > 0.0 && toy.horizon.is_finite()) {
        return Err(bad("toy.horizon", "must be positive"));
    }
    if toy.constrained && toy.omega0.abs() > 1.0 {
        return Err(bad("toy.omega0", "must lie in [-1, 1] for constrained runs"));
    }
    for level in &toy.contour_levels {
        if *level <= 2.0 {
            return Err(bad(
                "toy.contour_levels",
                "levels must exceed 2 (the energy of the equilibrium)",
            ));
        }
    }
    Ok(())
}

fn validate_euler_rate(er: &EulerRateSection) -> Result<()> {
    if er.dts.len() < 3 {
        return Err(bad("euler_rate.dts", "need at least 3 step sizes for a fit"));
    }
    if er.dts.iter().any(|dt| !(*dt > 0.0 && dt.is_finite())) {
        return Err(bad("euler_rate.dts", "step sizes must be positive"));
    }
    if !(er.t_final > 0.0 && er.t_final.is_finite()) {
        return Err(bad("euler_rate.t_final", "must be positive"));
    }
    if er.x0.len() != 2 {
        return Err(bad("euler_rate.x0", "the benchmark field lives on [-1,1]^2"));
    }
    if er.x0.iter().any(|v| v.abs() > 1.0) {
        return Err(bad("euler_rate.x0", "start must lie in [-1,1]^2"));
    }
    if er.reference_refinement < 10 {
        return Err(bad("euler_rate.reference_refinement", "must be at least 10"));
    }
    Ok(())
}
