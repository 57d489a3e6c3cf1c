//! Magnetic-field autocorrelation of nuclei diffusing in a confined nanoscale NMR sample.
//!
//! All quantities are in normalized units: lengths in probe depths `d`, times in
//! `T_D = d²/D`, and coupling and density constants set to one. The correlation at
//! zero lag equals `B_rms²` as returned by [`geometry::b_rms_squared`].

pub mod error;
pub mod estimation;
pub mod evaporating;
pub mod freediff;
pub mod geometry;
pub mod montecarlo;
pub mod numerics;
pub mod series;
pub mod sticky;

pub use error::{Error, Result};
pub use geometry::{CylinderGeometry, UnitSystem};
pub use series::{CorrelationSeries, FluidParams, ModelTag, SeriesPoint};
