//! Least-squares power-law fits on log-log axes, for empirical convergence
//! rates.

use serde::Serialize;

use crate::error::{Error, Result};

/// A fitted power law `y ~ C x^slope`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Slope of `log y` against `log x`.
    pub slope: f64,
    /// Intercept in log space, i.e. `log C`.
    pub intercept: f64,
    /// Coefficient of determination of the log-log regression.
    pub r_squared: f64,
}

/// Fit `log y = intercept + slope log x` by ordinary least squares.
/// Needs at least three strictly positive points.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch {
            context: "rate fit inputs",
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::InvalidParameter(
            "rate fit needs at least 3 points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParameter(
            "rate fit needs strictly positive finite values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mean_x = lx.iter().sum::<f64>() / n;
    let mean_y = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "rate fit needs at least two distinct x values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let syy: f64 = ly.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| {
                let fitted = intercept + slope * x;
                (y - fitted) * (y - fitted)
            })
            .sum();
        1.0 - ss_res / syy
    };
    if !slope.is_finite() {
        return Err(Error::NonFinite("rate fit slope"));
    }
    Ok(RateFit {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}
