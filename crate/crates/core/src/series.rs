//! Sampled correlation curves and the fluid parameters they were computed for.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CylinderGeometry;

/// Which model produced a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelTag {
    Reflective,
    Sticky,
    Evaporating,
    Free,
    MonteCarlo,
    Fitted,
}

impl ModelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Reflective => "reflective",
            ModelTag::Sticky => "sticky",
            ModelTag::Evaporating => "evaporating",
            ModelTag::Free => "free",
            ModelTag::MonteCarlo => "monte-carlo",
            ModelTag::Fitted => "fitted",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "reflective" => ModelTag::Reflective,
            "sticky" => ModelTag::Sticky,
            "evaporating" => ModelTag::Evaporating,
            "free" => ModelTag::Free,
            "monte-carlo" | "mc" => ModelTag::MonteCarlo,
            "fitted" => ModelTag::Fitted,
            other => return Err(Error::Domain(format!("unknown model tag `{other}`"))),
        })
    }
}

/// Diffusion coefficient and evaporation time, in normalized units (D = 1 ⇒ T_D = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub diffusion: f64,
    /// `None` means no evaporation.
    pub tau_ev: Option<f64>,
}

impl Default for FluidParams {
    fn default() -> Self {
        FluidParams { diffusion: 1.0, tau_ev: None }
    }
}

impl FluidParams {
    pub fn new(diffusion: f64, tau_ev: Option<f64>) -> Result<Self> {
        crate::error::check_positive("D", diffusion)?;
        if let Some(t) = tau_ev {
            crate::error::check_positive("tau_ev", t)?;
        }
        Ok(FluidParams { diffusion, tau_ev })
    }

    pub fn evaporating(tau_ev: f64) -> Result<Self> {
        Self::new(1.0, Some(tau_ev))
    }

    /// T_D = d²/D.
    pub fn diffusion_time(&self, depth: f64) -> f64 {
        depth * depth / self.diffusion
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub g: f64,
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub model: ModelTag,
    pub geometry: CylinderGeometry,
    pub fluid: FluidParams,
    pub seed: Option<u64>,
    points: Vec<SeriesPoint>,
}

impl CorrelationSeries {
    pub fn new(model: ModelTag, geometry: CylinderGeometry, fluid: FluidParams, points: Vec<SeriesPoint>) -> Result<Self> {
        for w in points.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::Domain(format!("series times must be strictly increasing ({} then {})", w[0].t, w[1].t)));
            }
        }
        for p in &points {
            if !p.t.is_finite() || p.t < 0.0 {
                return Err(Error::Domain(format!("invalid series time {}", p.t)));
            }
            if !p.g.is_finite() {
                return Err(Error::Domain(format!("non-finite correlation at t = {}", p.t)));
            }
            if !(p.err >= 0.0) {
                return Err(Error::Domain(format!("negative or NaN error estimate at t = {}", p.t)));
            }
        }
        Ok(CorrelationSeries { model, geometry, fluid, seed: None, points })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn points(&self) -> &[SeriesPoint] {
        &self.points
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.g).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Linear interpolation in log t (values are interpolated linearly).
    /// Times before the first sample return the first value.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        let pts = &self.points;
        let (first, last) = match (pts.first(), pts.last()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Coverage("empty series".into())),
        };
        if t > last.t * (1.0 + 1e-12) {
            return Err(Error::Coverage(format!("series ends at t = {} before requested t = {t}", last.t)));
        }
        if t <= first.t {
            return Ok(first.g);
        }
        let i = pts.partition_point(|p| p.t < t).min(pts.len() - 1);
        let (a, b) = (&pts[i - 1], &pts[i]);
        if b.t == t {
            return Ok(b.g);
        }
        let u = if a.t > 0.0 { (t / a.t).ln() / (b.t / a.t).ln() } else { (t - a.t) / (b.t - a.t) };
        Ok(a.g + u * (b.g - a.g))
    }
}

/// Logarithmic time grid from `t_min` to `t_max` with `per_decade` points per decade
/// (both ends included).
pub fn log_grid(t_min: f64, t_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
        return Err(Error::InvalidParameter { name: "grid", reason: format!("need 0 < t_min < t_max, got [{t_min}, {t_max}]") });
    }
    if per_decade == 0 {
        return Err(Error::InvalidParameter { name: "points_per_decade", reason: "must be positive".into() });
    }
    let decades = (t_max / t_min).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    Ok((0..=n).map(|k| t_min * 10f64.powf(decades * k as f64 / n as f64)).collect())
}

/// Logarithmic grid with exactly `n` points.
pub fn log_grid_n(t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && n >= 2) {
        return Err(Error::InvalidParameter { name: "grid", reason: "need 0 < t_min < t_max and n >= 2".into() });
    }
    let r = (t_max / t_min).ln();
    Ok((0..n).map(|k| t_min * (r * k as f64 / (n - 1) as f64).exp()).collect())
}
