//! Sticky walls: nuclei freeze at their first wall contact and keep contributing.
//!
//! The bulk term propagates with the free-space kernel restricted to the cylinder,
//! and absorbed mass is accounted for through the surviving fraction ζ.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{b_rms_squared, dipolar_kernel, CylinderGeometry};
use crate::numerics::quadrature::graded_breaks;
use crate::numerics::special::i0e;
use crate::numerics::{pairwise_sum, AxisGrid, Estimate, GaussLegendre, QuadratureSpec};
use crate::series::{CorrelationSeries, FluidParams, ModelTag, SeriesPoint};

/// (4π²/V)(cos β − sin α)²: uniform long-time occupation of the volume.
pub fn plateau_ideal(geom: &CylinderGeometry) -> f64 {
    let c = geom.cos_beta() - geom.sin_alpha();
    4.0 * PI * PI * c * c / geom.volume()
}

/// Sticky plateau (4π²/(S·R))(cos β − sin α)[cos³α + sin α cos²α + sin³β − sin²β cos β].
///
/// The bracket times 2π/R is the surface integral of the kernel over all three faces.
pub fn plateau_sticky(geom: &CylinderGeometry) -> f64 {
    let c = geom.cos_beta() - geom.sin_alpha();
    4.0 * PI * PI * c * surface_bracket(geom) / (geom.surface() * geom.radius)
}

fn surface_bracket(geom: &CylinderGeometry) -> f64 {
    let (sa, ca) = (geom.sin_alpha(), geom.cos_alpha());
    let (sb, cb) = (geom.sin_beta(), geom.cos_beta());
    ca.powi(3) + sa * ca * ca + sb.powi(3) - sb * sb * cb
}

/// Sticky over ideal plateau, evaluated from its reduced form L·bracket/(2(R+L)(cos β − sin α)).
pub fn plateau_ratio(geom: &CylinderGeometry) -> Result<f64> {
    let c = geom.cos_beta() - geom.sin_alpha();
    if c.abs() <= 1e-15 {
        return Err(Error::UndefinedRatio);
    }
    Ok(geom.height * surface_bracket(geom) / (2.0 * (geom.radius + geom.height) * c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlateauModel {
    Reflective,
    Sticky,
}

/// Maximizes the plateau over (R, L) ∈ (0, 10d]² by a grid scan followed by
/// alternating golden-section line searches.
pub fn optimal_geometry(model: PlateauModel, depth: f64) -> Result<(f64, f64)> {
    crate::error::check_positive("d", depth)?;
    let objective = |r: f64, l: f64| -> f64 {
        let g = CylinderGeometry { radius: r, height: l, depth: 1.0 };
        match model {
            PlateauModel::Reflective => plateau_ideal(&g),
            PlateauModel::Sticky => plateau_sticky(&g),
        }
    };
    let hi = 10.0;
    let lo = 1e-3;
    let n = 200;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 1..=n {
        for j in 1..=n {
            let (r, l) = (hi * i as f64 / n as f64, hi * j as f64 / n as f64);
            let v = objective(r, l);
            if v > best.0 {
                best = (v, r, l);
            }
        }
    }
    let (_, mut r, mut l) = best;
    let mut width = 2.0 * hi / n as f64;
    for _ in 0..60 {
        let r_new = golden_max(|x| objective(x, l), (r - width).max(lo), (r + width).min(hi));
        let l_new = golden_max(|x| objective(r_new, x), (l - width).max(lo), (l + width).min(hi));
        let moved = (r_new - r).abs().max((l_new - l).abs());
        r = r_new;
        l = l_new;
        if moved < 1e-7 {
            break;
        }
        width = (2.0 * moved).max(1e-4).min(width);
    }
    Ok((r * depth, l * depth))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-9 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Axis nodes above this count are treated as unresolvable.
pub const MAX_AXIS_NODES: usize = 8000;
// Gaussian kernel is dropped beyond this many √t̃ (e^{-42} below the peak).
const BAND: f64 = 13.0;

/// Bulk correlation and surviving fraction at one time, with quadrature error estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StickyTerms {
    pub bulk: Estimate,
    pub density: Estimate,
}

struct Axis {
    x: Vec<f64>,
    w: Vec<f64>,
}

fn axis(a: f64, b: f64, t: f64, nodes: usize, offset: f64) -> Result<Axis> {
    // Panels resolve the Gaussian ridge (width ≤ 2√t̃) and the kernel near the probe.
    let cap = 2.0 * t.sqrt();
    let h0 = cap.min(0.25);
    if ((b - a) / cap).ceil() * nodes as f64 > MAX_AXIS_NODES as f64 {
        return Err(Error::Accuracy { value: f64::NAN, error: f64::INFINITY });
    }
    let breaks = graded_breaks(a, b, h0, 0.2, offset, cap);
    let g = AxisGrid::from_breaks(&breaks, &GaussLegendre::new(nodes));
    Ok(Axis { x: g.nodes, w: g.weights })
}

// For each node, the index range of nodes within the kernel band.
fn band_ranges(x: &[f64], half_width: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(x.len());
    let (mut lo, mut hi) = (0usize, 0usize);
    for &xi in x {
        while x[lo] < xi - half_width {
            lo += 1;
        }
        while hi < x.len() && x[hi] <= xi + half_width {
            hi += 1;
        }
        out.push((lo, hi));
    }
    out
}

/// Bulk term and surviving fraction at one node count per panel.
fn sticky_sums(t: f64, geom: &CylinderGeometry, nodes: usize) -> Result<(f64, f64)> {
    let rho = axis(0.0, geom.radius, t, nodes, geom.depth)?;
    let z = axis(geom.z_min(), geom.z_max(), t, nodes, geom.depth)?;
    let (nr, nz) = (rho.x.len(), z.x.len());
    let hw = BAND * t.sqrt();
    let inv4t = 0.25 / t;

    // A(i, a) = w_ρ ρ g w_z
    let a_mat: Vec<f64> = (0..nr)
        .flat_map(|i| {
            let (ri, wi) = (rho.x[i], rho.w[i]);
            let z = &z;
            (0..nz).map(move |a| wi * ri * dipolar_kernel(ri, z.x[a]) * z.w[a])
        })
        .collect();

    let zb = band_ranges(&z.x, hw);
    let kz: Vec<Vec<f64>> = (0..nz)
        .map(|b| {
            let (lo, hi) = zb[b];
            (lo..hi).map(|a| (-(z.x[a] - z.x[b]).powi(2) * inv4t).exp()).collect()
        })
        .collect();

    // M(i, b) = Σ_a A(i, a) Kz(a, b)
    let m_mat: Vec<f64> = (0..nr)
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = &a_mat[i * nz..(i + 1) * nz];
            let zb = &zb;
            let kz = &kz;
            (0..nz).map(move |b| {
                let (lo, _) = zb[b];
                kz[b].iter().enumerate().map(|(k, kv)| row[lo + k] * kv).sum::<f64>()
            })
        })
        .collect();

    let rb = band_ranges(&rho.x, hw);
    let rows: Vec<(f64, f64)> = (0..nr)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = rb[i];
            let mrow = &m_mat[i * nz..(i + 1) * nz];
            let mut bulk = Vec::with_capacity(hi - lo);
            let mut dens = Vec::with_capacity(hi - lo);
            for j in lo..hi {
                let (ri, rj) = (rho.x[i], rho.x[j]);
                let k = i0e(ri * rj * 2.0 * inv4t) * (-(ri - rj).powi(2) * inv4t).exp();
                let arow = &a_mat[j * nz..(j + 1) * nz];
                let h: f64 = mrow.iter().zip(arow).map(|(m, a)| m * a).sum();
                bulk.push(k * h);
                dens.push(k * rho.w[i] * ri * rho.w[j] * rj);
            }
            (pairwise_sum(&bulk), pairwise_sum(&dens))
        })
        .collect();
    let bulk_sum = pairwise_sum(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let rho_sum = pairwise_sum(&rows.iter().map(|r| r.1).collect::<Vec<_>>());

    let z_sum = pairwise_sum(
        &(0..nz)
            .map(|b| {
                let (lo, _) = zb[b];
                z.w[b] * kz[b].iter().enumerate().map(|(k, kv)| z.w[lo + k] * kv).sum::<f64>()
            })
            .collect::<Vec<_>>(),
    );
    let pref = PI.sqrt() / (2.0 * t * t.sqrt());
    Ok((pref * bulk_sum, pref * rho_sum * z_sum / geom.volume()))
}

/// Bulk correlation and surviving fraction; the error estimate compares `n` and `2n`
/// Gauss nodes per panel, with `n = quad.nodes[0]`.
pub fn sticky_terms(t: f64, geom: &CylinderGeometry, quad: &QuadratureSpec) -> Result<StickyTerms> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("sticky bulk terms need t > 0, got {t}")));
    }
    quad.validate()?;
    let n = quad.nodes[0];
    let (g1, z1) = sticky_sums(t, geom, n)?;
    let (g2, z2) = sticky_sums(t, geom, 2 * n)?;
    let bulk = Estimate { value: g2, error: (g2 - g1).abs() };
    let density = Estimate { value: z2.clamp(0.0, 1.0), error: (z2 - z1).abs() };
    let pl = plateau_sticky(geom);
    let g = bulk.value + pl * (1.0 - density.value);
    if !quad.accepts(g, bulk.error + pl * density.error) || !quad.accepts(density.value.max(1e-6), density.error) {
        return Err(Error::Accuracy { value: bulk.value, error: bulk.error.max(density.error) });
    }
    Ok(StickyTerms { bulk, density })
}

pub fn g_sticky_bulk(t: f64, geom: &CylinderGeometry, quad: &QuadratureSpec) -> Result<f64> {
    sticky_terms(t, geom, quad).map(|s| s.bulk.value)
}

pub fn bulk_density(t: f64, geom: &CylinderGeometry, quad: &QuadratureSpec) -> Result<f64> {
    sticky_terms(t, geom, quad).map(|s| s.density.value)
}

/// Composed sticky correlation with its error estimate; t̃ = 0 gives B_rms².
pub fn g_sticky_estimate(t: f64, geom: &CylinderGeometry, quad: &QuadratureSpec) -> Result<Estimate> {
    if t == 0.0 {
        return crate::geometry::b_rms_squared_estimate(geom, quad);
    }
    let s = sticky_terms(t, geom, quad)?;
    let pl = plateau_sticky(geom);
    Ok(Estimate { value: s.bulk.value + pl * (1.0 - s.density.value), error: s.bulk.error + pl * s.density.error })
}

pub fn g_sticky(t: f64, geom: &CylinderGeometry, quad: &QuadratureSpec) -> Result<f64> {
    g_sticky_estimate(t, geom, quad).map(|e| e.value)
}

/// Surface integral of k² over the three faces.
pub fn surface_kernel_square(geom: &CylinderGeometry) -> f64 {
    let rule = GaussLegendre::new(16);
    let r = AxisGrid::from_breaks(&graded_breaks(0.0, geom.radius, 0.05, 0.2, geom.depth, 1.0), &rule);
    let z = AxisGrid::from_breaks(&graded_breaks(geom.z_min(), geom.z_max(), 0.05, 0.2, geom.depth, 1.0), &rule);
    let (z0, z1) = (geom.z_min(), geom.z_max());
    let faces = r.integrate(|p| 2.0 * PI * p * (dipolar_kernel(p, z0).powi(2) + dipolar_kernel(p, z1).powi(2)));
    let side = z.integrate(|q| 2.0 * PI * geom.radius * dipolar_kernel(geom.radius, q).powi(2));
    faces + side
}

/// Leading short-time behaviour of g_sticky: B² − √(t̃/π)(∮k² dA − G_pl·S/V).
pub fn g_sticky_short_time(t: f64, geom: &CylinderGeometry, b2: f64) -> f64 {
    let pl = plateau_sticky(geom);
    b2 - (t / PI).sqrt() * (surface_kernel_square(geom) - pl * geom.surface() / geom.volume())
}

/// Sticky curve on a time grid. Points too early for the 4D grid fall back to the
/// short-time expansion, with the size of its correction as error estimate.
pub fn sticky_series(geom: &CylinderGeometry, times: &[f64], quad: &QuadratureSpec) -> Result<CorrelationSeries> {
    let b2 = b_rms_squared(geom, quad)?;
    let points: Vec<SeriesPoint> = times
        .iter()
        .map(|&t| match g_sticky_estimate(t, geom, quad) {
            Ok(e) => Ok(SeriesPoint { t, g: e.value, err: e.error }),
            Err(Error::Accuracy { .. }) if t < 1e-2 => {
                let g = g_sticky_short_time(t, geom, b2);
                Ok(SeriesPoint { t, g, err: (b2 - g).abs() })
            }
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    CorrelationSeries::new(ModelTag::Sticky, *geom, FluidParams::default(), points)
}
