//! Confinement cylinder, the m = 0 dipolar form factor and the equal-time amplitude.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_nd, Estimate, QuadratureSpec};

/// Sample cylinder of radius `R` and height `L` whose bottom face sits a depth `d`
/// above the probe. The probe is on the cylinder axis; `z` is measured from the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderGeometry {
    pub radius: f64,
    pub height: f64,
    pub depth: f64,
}

impl CylinderGeometry {
    pub fn new(radius: f64, height: f64, depth: f64) -> Result<Self> {
        for (name, v) in [("R", radius), ("L", height), ("d", depth)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidGeometry(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(CylinderGeometry { radius, height, depth })
    }

    pub fn surface(&self) -> f64 {
        2.0 * PI * self.radius * (self.radius + self.height)
    }

    pub fn volume(&self) -> f64 {
        PI * self.radius * self.radius * self.height
    }

    /// Lower face of the sample.
    pub fn z_min(&self) -> f64 {
        self.depth
    }

    pub fn z_max(&self) -> f64 {
        self.depth + self.height
    }

    pub fn sin_alpha(&self) -> f64 {
        self.depth / self.depth.hypot(self.radius)
    }

    pub fn cos_alpha(&self) -> f64 {
        self.radius / self.depth.hypot(self.radius)
    }

    pub fn sin_beta(&self) -> f64 {
        self.radius / self.z_max().hypot(self.radius)
    }

    pub fn cos_beta(&self) -> f64 {
        self.z_max() / self.z_max().hypot(self.radius)
    }

    pub fn alpha(&self) -> f64 {
        self.depth.atan2(self.radius)
    }

    pub fn beta(&self) -> f64 {
        self.radius.atan2(self.z_max())
    }

    /// Same shape in units of the depth (d = 1).
    pub fn normalized(&self) -> Self {
        CylinderGeometry { radius: self.radius / self.depth, height: self.height / self.depth, depth: 1.0 }
    }

    pub fn contains(&self, rho: f64, z: f64) -> bool {
        rho <= self.radius && z >= self.z_min() && z <= self.z_max()
    }
}

pub fn make_geometry(radius: f64, height: f64, depth: f64) -> Result<CylinderGeometry> {
    CylinderGeometry::new(radius, height, depth)
}

/// Length and time scales of the normalized unit system (d = 1, T_D = 1, Υ = ζ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// Probe depth in metres.
    pub length_m: f64,
    /// Diffusion coefficient in m²/s.
    pub diffusion_m2_s: f64,
}

impl UnitSystem {
    pub const COUPLING: f64 = 1.0;
    pub const DENSITY: f64 = 1.0;

    pub fn new(length_m: f64, diffusion_m2_s: f64) -> Result<Self> {
        crate::error::check_positive("d", length_m)?;
        crate::error::check_positive("D", diffusion_m2_s)?;
        Ok(UnitSystem { length_m, diffusion_m2_s })
    }

    /// T_D = d²/D in seconds.
    pub fn diffusion_time_s(&self) -> f64 {
        self.length_m * self.length_m / self.diffusion_m2_s
    }

    pub fn to_normalized_time(&self, seconds: f64) -> f64 {
        seconds / self.diffusion_time_s()
    }

    pub fn to_seconds(&self, t: f64) -> f64 {
        t * self.diffusion_time_s()
    }

    pub fn to_normalized_length(&self, metres: f64) -> f64 {
        metres / self.length_m
    }
}

/// 4√π/√5, the Y₂⁰ normalization carried by the form factor.
pub const FORM_FACTOR_PREFACTOR: f64 = 3.170_661_838_084_808_8;

/// m = 0 form factor (4√π/√5)·(3z²/r² − 1)/r³.
pub fn form_factor(rho: f64, z: f64) -> Result<f64> {
    if rho == 0.0 && z == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(FORM_FACTOR_PREFACTOR * dipolar_kernel(rho, z))
}

/// Reduced kernel 3z²/r⁵ − 1/r³ used by every correlation integral.
#[inline]
pub fn dipolar_kernel(rho: f64, z: f64) -> f64 {
    let r2 = rho * rho + z * z;
    let inv_r3 = 1.0 / (r2 * r2.sqrt());
    (3.0 * z * z / r2 - 1.0) * inv_r3
}

/// Equal-time amplitude B_rms² = 2π ∫∫ ρ k(ρ, z)² dρ dz over the cylinder.
pub fn b_rms_squared(geom: &CylinderGeometry, quad: &QuadratureSpec) -> Result<f64> {
    b_rms_squared_estimate(geom, quad).map(|e| e.value)
}

pub fn b_rms_squared_estimate(geom: &CylinderGeometry, quad: &QuadratureSpec) -> Result<Estimate> {
    integrate_nd(
        |x| {
            let k = dipolar_kernel(x[0], x[1]);
            2.0 * PI * x[0] * k * k
        },
        &[(0.0, geom.radius), (geom.z_min(), geom.z_max())],
        quad,
    )
}

/// Half-space value of B_rms² (R, L → ∞) in units d = 1.
pub const B_RMS_SQUARED_HALF_SPACE: f64 = PI / 4.0;
