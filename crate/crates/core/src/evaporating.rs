//! Evaporating (Robin) walls: eigenmodes of the cylinder with outward flux η₀·C,
//! the mode-sum correlation, and the dominant-mode analysis.
//!
//! η₀ = 0 gives reflecting walls; the table then contains the constant mode
//! (η = β = 0, infinite decay time) whose weight is the ideal plateau.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dipolar_kernel, CylinderGeometry};
use crate::numerics::quadrature::graded_breaks;
use crate::numerics::roots::{scan_roots, RootScanSpec};
use crate::numerics::special::{j0, j01};
use crate::numerics::{pairwise_sum, AxisGrid, GaussLegendre};

/// η₀ = d/(D·τ_ev) in units of 1/d (D = 1). Infinite τ_ev gives 0.
pub fn evaporation_rate(geom: &CylinderGeometry, tau_ev: f64) -> Result<f64> {
    if !(tau_ev > 0.0) || tau_ev.is_nan() {
        return Err(Error::InvalidParameter { name: "tau_ev", reason: format!("must be positive, got {tau_ev}") });
    }
    Ok(geom.depth / tau_ev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvapEigenSpectrum {
    pub eta0: f64,
    /// Even roots, η₀/η = tan(ηL/2).
    pub eta_plus: Vec<f64>,
    /// Odd roots, −η/η₀ = tan(ηL/2).
    pub eta_minus: Vec<f64>,
    /// Radial roots, ξJ₀′(ξ) + η₀R·J₀(ξ) = 0 with ξ = βR.
    pub beta: Vec<f64>,
}

/// Even-branch equation in the offset δ = x − kπ, x = ηL/2, h = η₀L/2.
pub fn eta_plus_residual(k: usize, h: f64, delta: f64) -> f64 {
    (k as f64 * PI + delta) * delta.sin() - h * delta.cos()
}

/// Odd-branch equation in the offset δ = x − kπ − π/2.
pub fn eta_minus_residual(k: usize, h: f64, delta: f64) -> f64 {
    h * delta.cos() - (k as f64 * PI + 0.5 * PI + delta) * delta.sin()
}

/// Radial condition −ξJ₁(ξ) + hR·J₀(ξ).
pub fn beta_residual(h_r: f64, xi: f64) -> f64 {
    let (a, b) = j01(xi);
    -xi * b + h_r * a
}

/// `count` roots per parity family, one per tan branch. Each branch is scanned in its
/// own offset variable, so the branch poles are never crossed and small roots keep
/// full relative precision.
pub fn solve_eta(geom: &CylinderGeometry, tau_ev: f64, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let eta0 = evaporation_rate(geom, tau_ev)?;
    let l = geom.height;
    let h = 0.5 * eta0 * l;
    let branch = |k: usize, odd: bool| -> Result<f64> {
        let f = |d: f64| if odd { eta_minus_residual(k, h, d) } else { eta_plus_residual(k, h, d) };
        let spec = RootScanSpec::new(0.0, 0.5 * PI, PI / 64.0).with_max_roots(1).expecting(1);
        let delta = scan_roots(f, &spec)
            .map_err(|_| Error::ScanResolution(format!("no root on {} branch {k}", if odd { "odd" } else { "even" })))?
            .roots[0];
        let x = k as f64 * PI + if odd { 0.5 * PI } else { 0.0 } + delta;
        Ok(2.0 * x / l)
    };
    let plus = (0..count).map(|k| branch(k, false)).collect::<Result<Vec<_>>>()?;
    let minus = (0..count).map(|k| branch(k, true)).collect::<Result<Vec<_>>>()?;
    Ok((plus, minus))
}

/// The first `count` radial roots β_p (p = 0, 1, ...).
pub fn solve_beta(geom: &CylinderGeometry, tau_ev: f64, count: usize) -> Result<Vec<f64>> {
    let eta0 = evaporation_rate(geom, tau_ev)?;
    let r = geom.radius;
    let h_r = eta0 * r;
    if count == 0 {
        return Ok(Vec::new());
    }
    // ξ_p < j_{0,p+1} < (p + 1)π
    let upper = (count as f64 + 0.25) * PI;
    let spec = RootScanSpec::new(0.0, upper, PI / 24.0).with_max_roots(count).expecting(count);
    let roots = scan_roots(|x| beta_residual(h_r, x), &spec)?.roots;
    Ok(roots.into_iter().map(|xi| xi / r).collect())
}

pub fn solve_spectrum(geom: &CylinderGeometry, tau_ev: f64, m: usize, p: usize) -> Result<EvapEigenSpectrum> {
    let (eta_plus, eta_minus) = solve_eta(geom, tau_ev, m)?;
    let beta = solve_beta(geom, tau_ev, p)?;
    Ok(EvapEigenSpectrum { eta0: evaporation_rate(geom, tau_ev)?, eta_plus, eta_minus, beta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> char {
        match self {
            Parity::Even => '+',
            Parity::Odd => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Axial index, starting at 1.
    pub m: usize,
    pub parity: Parity,
    /// Radial index, starting at 0.
    pub p: usize,
    pub eta: f64,
    pub beta: f64,
    /// 1/(β² + η²); infinite for the constant mode of reflecting walls.
    pub tau: f64,
    /// Correlation weight (∫ k ψ dV)².
    pub weight: f64,
    /// Survival weight (∫ ψ dV)²/V.
    pub survival: f64,
    /// 1/(2π·∫ρJ₀²dρ·∫Z²dz), the propagator normalization.
    pub norm: f64,
}

impl Mode {
    pub fn radial(&self, rho: f64) -> f64 {
        j0(self.beta * rho)
    }

    /// Axial eigenfunction about the cylinder centre `zc`.
    pub fn axial(&self, z: f64, zc: f64) -> f64 {
        match self.parity {
            Parity::Even => (self.eta * (z - zc)).cos(),
            Parity::Odd => (self.eta * (z - zc)).sin(),
        }
    }

    pub fn decay(&self, t: f64) -> f64 {
        if self.tau.is_infinite() {
            1.0
        } else {
            (-t / self.tau).exp()
        }
    }
}

/// Truncation orders: `m` roots per parity family and `p` radial roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub m: usize,
    pub p: usize,
}

/// Hard cap on either truncation order.
pub const MAX_ORDER: usize = 100;

impl Truncation {
    /// Every mode with decay rate at most `rate_max`, capped at [`MAX_ORDER`].
    pub fn by_rate(geom: &CylinderGeometry, tau_ev: f64, rate_max: f64) -> Result<Self> {
        let (plus, minus) = solve_eta(geom, tau_ev, MAX_ORDER)?;
        let beta = solve_beta(geom, tau_ev, MAX_ORDER)?;
        let b0 = beta[0] * beta[0];
        let m_plus = plus.iter().take_while(|e| *e * *e + b0 <= rate_max).count();
        let m_minus = minus.iter().take_while(|e| *e * *e + b0 <= rate_max).count();
        let e0 = plus[0] * plus[0];
        let p = beta.iter().take_while(|b| *b * *b + e0 <= rate_max).count();
        Ok(Truncation { m: m_plus.max(m_minus).clamp(1, MAX_ORDER), p: p.clamp(1, MAX_ORDER) })
    }

    /// Modes with τ ≥ τ₀₀/10⁴ (all modes up to the cap for reflecting walls).
    pub fn slowest(geom: &CylinderGeometry, tau_ev: f64) -> Result<Self> {
        let (plus, _) = solve_eta(geom, tau_ev, 1)?;
        let beta = solve_beta(geom, tau_ev, 1)?;
        let rate00 = plus[0] * plus[0] + beta[0] * beta[0];
        if rate00 == 0.0 {
            return Ok(Truncation { m: MAX_ORDER, p: MAX_ORDER });
        }
        Self::by_rate(geom, tau_ev, 1e4 * rate00)
    }

    /// Modes that still matter at `t_min`: decay factor above e⁻³⁶.
    pub fn resolving(geom: &CylinderGeometry, tau_ev: f64, t_min: f64) -> Result<Self> {
        crate::error::check_positive("t_min", t_min)?;
        Self::by_rate(geom, tau_ev, 36.0 / t_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvapModeTable {
    pub geometry: CylinderGeometry,
    /// Infinite for reflecting walls.
    pub tau_ev: f64,
    pub eta0: f64,
    pub truncation: Truncation,
    /// Sorted by decreasing decay time.
    pub modes: Vec<Mode>,
    /// Σ |w(2n) − w(n)| over modes, from the node-doubling comparison.
    pub weight_error: f64,
}

/// Reflecting-wall table (η₀ = 0).
pub fn build_reflective_table(geom: &CylinderGeometry, trunc: Truncation, nodes: usize) -> Result<EvapModeTable> {
    build_mode_table(geom, f64::INFINITY, trunc, nodes)
}

/// Solves the spectrum and computes every weight of the (M, P) block by a 2D
/// Gauss–Legendre quadrature; `nodes` per panel, with the error estimated from `2·nodes`.
pub fn build_mode_table(geom: &CylinderGeometry, tau_ev: f64, trunc: Truncation, nodes: usize) -> Result<EvapModeTable> {
    if trunc.m == 0 || trunc.p == 0 {
        return Err(Error::InvalidParameter { name: "truncation", reason: "orders must be positive".into() });
    }
    if nodes < 2 {
        return Err(Error::InvalidParameter { name: "nodes", reason: "need at least 2 nodes per panel".into() });
    }
    let spec = solve_spectrum(geom, tau_ev, trunc.m, trunc.p)?;
    let w_lo = mode_integrals(geom, &spec, nodes);
    let w_hi = mode_integrals(geom, &spec, 2 * nodes);

    let (r, l) = (geom.radius, geom.height);
    let h_r = spec.eta0 * r;
    let v = geom.volume();
    let mut modes = Vec::with_capacity(2 * trunc.m * trunc.p);
    let mut weight_error = 0.0;
    for (pi_, &beta) in spec.beta.iter().enumerate() {
        let xi = beta * r;
        let j0xi = j0(xi);
        // 1/∫ρ J0² dρ
        let inv_nr = if xi == 0.0 && h_r == 0.0 { 2.0 / (r * r) } else { 2.0 * xi * xi / (r * r * j0xi * j0xi * (xi * xi + h_r * h_r)) };
        // ∫ρ J0 dρ
        let rho_int = if xi == 0.0 { 0.5 * r * r } else { r * r * crate::numerics::special::j1(xi) / xi };
        for (parity, etas) in [(Parity::Even, &spec.eta_plus), (Parity::Odd, &spec.eta_minus)] {
            for (mi, &eta) in etas.iter().enumerate() {
                let el = eta * l;
                let sinc = if el == 0.0 { 1.0 } else { el.sin() / el };
                let inv_nz = match parity {
                    Parity::Even => 2.0 / (l * (1.0 + sinc)),
                    Parity::Odd => 2.0 / (l * (1.0 - sinc)),
                };
                let z_int = match parity {
                    Parity::Even if eta == 0.0 => l,
                    Parity::Even => 2.0 * (0.5 * el).sin() / eta,
                    Parity::Odd => 0.0,
                };
                let idx = match parity {
                    Parity::Even => 2 * mi,
                    Parity::Odd => 2 * mi + 1,
                };
                let (ilo, ihi) = (w_lo[pi_][idx], w_hi[pi_][idx]);
                let weight = 2.0 * PI * ihi * ihi * inv_nr * inv_nz;
                weight_error += 2.0 * PI * (ihi * ihi - ilo * ilo).abs() * inv_nr * inv_nz;
                let rate = beta * beta + eta * eta;
                modes.push(Mode {
                    m: mi + 1,
                    parity,
                    p: pi_,
                    eta,
                    beta,
                    tau: if rate == 0.0 { f64::INFINITY } else { 1.0 / rate },
                    weight,
                    survival: 2.0 * PI * rho_int * rho_int * z_int * z_int * inv_nr * inv_nz / v,
                    norm: inv_nr * inv_nz / (2.0 * PI),
                });
            }
        }
    }
    modes.sort_by(|a, b| b.tau.partial_cmp(&a.tau).unwrap().then(a.p.cmp(&b.p)).then(a.m.cmp(&b.m)));
    Ok(EvapModeTable { geometry: *geom, tau_ev, eta0: spec.eta0, truncation: trunc, modes, weight_error })
}

// I[p][2m + parity] = ∫∫ ρ k(ρ, z) J0(β_p ρ) Z(z) dρ dz.
fn mode_integrals(geom: &CylinderGeometry, spec: &EvapEigenSpectrum, nodes: usize) -> Vec<Vec<f64>> {
    let rule = GaussLegendre::new(nodes);
    let beta_max = spec.beta.last().copied().unwrap_or(0.0);
    let eta_max = spec.eta_plus.last().copied().unwrap_or(0.0).max(spec.eta_minus.last().copied().unwrap_or(0.0));
    let cap_r = if beta_max > 0.0 { (PI / beta_max).min(geom.radius) } else { geom.radius };
    let rho = AxisGrid::from_breaks(&graded_breaks(0.0, geom.radius, 0.25f64.min(cap_r), 0.2, geom.depth, cap_r), &rule);
    // u = distance from the centre plane; graded towards the bottom face (u = L/2)
    let half = 0.5 * geom.height;
    let cap_u = if eta_max > 0.0 { (PI / eta_max).min(half) } else { half };
    let v_breaks = graded_breaks(0.0, half, 0.25f64.min(cap_u), 0.2, geom.depth, cap_u);
    let u_breaks: Vec<f64> = v_breaks.iter().rev().map(|v| half - v).collect();
    let u = AxisGrid::from_breaks(&u_breaks, &rule);
    let zc = geom.depth + half;
    let (nr, nu) = (rho.len(), u.len());

    let mut even = vec![0.0; nr * nu];
    let mut odd = vec![0.0; nr * nu];
    for i in 0..nr {
        for a in 0..nu {
            let up = dipolar_kernel(rho.nodes[i], zc + u.nodes[a]);
            let dn = dipolar_kernel(rho.nodes[i], zc - u.nodes[a]);
            even[i * nu + a] = u.weights[a] * (up + dn);
            odd[i * nu + a] = u.weights[a] * (up - dn);
        }
    }
    let m = spec.eta_plus.len();
    // axial projections B[2m + parity][i]
    let axial: Vec<Vec<f64>> = (0..2 * m)
        .into_par_iter()
        .map(|idx| {
            let (eta, mat, is_odd) = if idx % 2 == 0 { (spec.eta_plus[idx / 2], &even, false) } else { (spec.eta_minus[idx / 2], &odd, true) };
            let zf: Vec<f64> = u.nodes.iter().map(|&x| if is_odd { (eta * x).sin() } else { (eta * x).cos() }).collect();
            (0..nr).map(|i| mat[i * nu..(i + 1) * nu].iter().zip(&zf).map(|(g, z)| g * z).sum::<f64>()).collect()
        })
        .collect();
    spec.beta
        .par_iter()
        .map(|&beta| {
            let radial: Vec<f64> = (0..nr).map(|i| rho.weights[i] * rho.nodes[i] * j0(beta * rho.nodes[i])).collect();
            axial
                .iter()
                .map(|b| pairwise_sum(&radial.iter().zip(b).map(|(r, x)| r * x).collect::<Vec<_>>()))
                .collect()
        })
        .collect()
}

impl EvapModeTable {
    pub fn tau00(&self) -> f64 {
        self.modes[0].tau
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.modes.iter().map(|m| m.weight).collect::<Vec<_>>())
    }

    /// Decay time of the fastest retained mode.
    pub fn fastest_tau(&self) -> f64 {
        self.modes.last().map(|m| m.tau).unwrap_or(f64::INFINITY)
    }

    /// Mode-sum correlation Σ w e^{−t̃/τ}.
    pub fn correlation(&self, t: f64) -> f64 {
        pairwise_sum(&self.modes.iter().map(|m| m.weight * m.decay(t)).collect::<Vec<_>>())
    }

    /// Quadrature error bound on the correlation at `t`.
    pub fn correlation_error(&self, t: f64) -> f64 {
        // weights are positive, so the decayed error is bounded by the undecayed one
        // scaled with the slowest decay factor
        self.weight_error * self.modes.first().map(|m| m.decay(t)).unwrap_or(1.0)
    }

    /// Fraction of nuclei still in the sample, for uniform initial positions.
    pub fn survival(&self, t: f64) -> f64 {
        pairwise_sum(&self.modes.iter().map(|m| m.survival * m.decay(t)).collect::<Vec<_>>())
    }

    pub fn find(&self, m: usize, parity: Parity, p: usize) -> Option<&Mode> {
        self.modes.iter().find(|x| x.m == m && x.parity == parity && x.p == p)
    }
}

pub fn g_evaporating(t: f64, table: &EvapModeTable) -> f64 {
    table.correlation(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorValue {
    pub density: f64,
    /// Set when `t` is short enough for the omitted modes to matter.
    pub truncated: bool,
}

/// Truncated mode-sum propagator P(ρ, φ, z, t̃ | ρ₀, φ₀, z₀). Only the n = 0 angular
/// sector is retained, so the azimuths do not enter.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_propagator(rho: f64, _phi: f64, z: f64, t: f64, rho0: f64, _phi0: f64, z0: f64, table: &EvapModeTable) -> Result<PropagatorValue> {
    let g = &table.geometry;
    if !g.contains(rho, z) || !g.contains(rho0, z0) {
        return Err(Error::Domain("propagator points must lie inside the cylinder".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("propagator needs t > 0, got {t}")));
    }
    let zc = g.depth + 0.5 * g.height;
    let terms: Vec<f64> = table
        .modes
        .iter()
        .map(|m| m.norm * m.radial(rho) * m.radial(rho0) * m.axial(z, zc) * m.axial(z0, zc) * m.decay(t))
        .collect();
    Ok(PropagatorValue { density: pairwise_sum(&terms), truncated: t < table.fastest_tau() })
}

/// Closed-form estimate τ₀₀ ≈ (τ_ev/d)(V/S).
pub fn tau_dominant_approx(geom: &CylinderGeometry, tau_ev: f64) -> f64 {
    tau_ev / geom.depth * geom.volume() / geom.surface()
}

/// Exact τ₀₀ from the lowest roots.
pub fn tau00_exact(geom: &CylinderGeometry, tau_ev: f64) -> Result<f64> {
    let (plus, _) = solve_eta(geom, tau_ev, 1)?;
    let beta = solve_beta(geom, tau_ev, 1)?;
    Ok(1.0 / (plus[0] * plus[0] + beta[0] * beta[0]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunnerUp {
    /// (m = 1⁺, p = 1)
    Radial,
    /// (m = 1⁻, p = 0)
    OddAxial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeDominance {
    pub tau00: f64,
    pub tau_second: f64,
    /// (τ₀₀ − τ₂ₙd)/τ₀₀
    pub gap: f64,
    pub runner_up: RunnerUp,
}

pub fn mode_dominance(geom: &CylinderGeometry, tau_ev: f64) -> Result<ModeDominance> {
    let (plus, minus) = solve_eta(geom, tau_ev, 1)?;
    let beta = solve_beta(geom, tau_ev, 2)?;
    let tau = |e: f64, b: f64| 1.0 / (e * e + b * b);
    let tau00 = tau(plus[0], beta[0]);
    let radial = tau(plus[0], beta[1]);
    let odd = tau(minus[0], beta[0]);
    // every other mode is faster than one of these two
    let (tau_second, runner_up) = if radial >= odd { (radial, RunnerUp::Radial) } else { (odd, RunnerUp::OddAxial) };
    Ok(ModeDominance { tau00, tau_second, gap: (tau00 - tau_second) / tau00, runner_up })
}
