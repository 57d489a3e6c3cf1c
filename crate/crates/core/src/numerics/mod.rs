//! Quadrature, root scanning and special functions shared by the analytic modules.

pub mod quadrature;
pub mod roots;
pub mod special;

pub use quadrature::{integrate_nd, pairwise_sum, AxisGrid, Estimate, GaussLegendre, QuadratureSpec};
pub use roots::{scan_roots, RootScan, RootScanSpec};
pub use special::{bessel_i0e, bessel_j, erfcx};
