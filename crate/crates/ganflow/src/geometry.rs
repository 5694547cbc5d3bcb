//! Convex-box geometry: projection onto the box, projection onto the tangent
//! cone at a boundary point, and the tangent/normal decomposition of a vector.
//!
//! The clipped parameter set is always a product of intervals, so every
//! projection here is coordinate-wise. Boundary membership is tested by exact
//! equality: points are snapped onto the box first, and clamping produces the
//! face values exactly in floating point.

use crate::error::{Error, Result};

/// A product of closed intervals `[lo_l, hi_l]`, stored per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Tolerance inside which a nominally-feasible point is snapped onto the box.
pub const SNAP_TOL: f64 = 1e-12;

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::ShapeMismatch {
                context: "BoxDomain bounds",
                expected: lo.len(),
                found: hi.len(),
            });
        }
        let bounds_ok = lo
            .iter()
            .zip(&hi)
            .all(|(a, b)| a.is_finite() && b.is_finite() && a < b);
        if !bounds_ok {
            return Err(Error::InvalidParameter(
                "box needs finite lo < hi in every coordinate".into(),
            ));
        }
        Ok(BoxDomain { lo, hi })
    }

    /// The unit box `[-1, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        BoxDomain {
            lo: vec![-1.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    fn check_dim(&self, x: &[f64], context: &'static str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                context,
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Snap a point onto the box if it is within `SNAP_TOL` of it; reject
    /// anything farther out. Callers must project before evaluating fields at
    /// boundary points, so a larger violation signals a bug upstream.
    fn snap(&self, x: &[f64], context: &'static str) -> Result<Vec<f64>> {
        self.check_dim(x, context)?;
        let mut out = Vec::with_capacity(x.len());
        for (v, (lo, hi)) in x.iter().zip(self.lo.iter().zip(&self.hi)) {
            if *v < lo - SNAP_TOL || *v > hi + SNAP_TOL {
                return Err(Error::OutsideDomain(format!(
                    "{context}: coordinate {v} outside [{lo}, {hi}] beyond tolerance {SNAP_TOL:e}"
                )));
            }
            out.push(v.clamp(*lo, *hi));
        }
        Ok(out)
    }
}

/// Euclidean projection onto the box: the coordinate-wise clamp.
pub fn project_box(q: &BoxDomain, x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(q.lo.iter().zip(&q.hi))
        .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
        .collect()
}

/// Projection of `v` onto the tangent cone of the box at `omega`.
///
/// Interior coordinates pass through; at a face only the inward part
/// survives. `omega` must lie in the box within [`SNAP_TOL`] (it is snapped
/// first).
pub fn project_tangent_cone(q: &BoxDomain, omega: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let omega = q.snap(omega, "project_tangent_cone")?;
    q.check_dim(v, "project_tangent_cone direction")?;
    Ok(omega
        .iter()
        .zip(v)
        .zip(q.lo.iter().zip(&q.hi))
        .map(|((w, vl), (lo, hi))| {
            if *w == *hi {
                vl.min(0.0)
            } else if *w == *lo {
                vl.max(0.0)
            } else {
                *vl
            }
        })
        .collect())
}

/// Split `v = w + n` at `omega` into the tangent-cone part `w` and the
/// normal-cone part `n`, with `<w, n> = 0`.
pub fn normal_decompose(q: &BoxDomain, omega: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = project_tangent_cone(q, omega, v)?;
    let n = v.iter().zip(&w).map(|(a, b)| a - b).collect();
    Ok((w, n))
}
