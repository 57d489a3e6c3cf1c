//! Experiment design: volume time, diffusion-coefficient recovery, Fisher information
//! for frequency estimation, and fits of the two-term simplified model.
//!
//! Fisher information uses a fixed convention: the pair sum
//! Φ⁴ Σⱼ (N − j)(jτ̃)² sin²(δjτ̃) G(jτ̃)² with every omitted constant set to one.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::freediff::{g_free_at, LONG_TIME_COEFFICIENT};
use crate::geometry::{b_rms_squared, CylinderGeometry};
use crate::numerics::{pairwise_sum, QuadratureSpec};
use crate::series::{CorrelationSeries, FluidParams};
use crate::sticky::{plateau_ideal, plateau_sticky};

/// τ_V = [32/(15√π·G)]^{2/3}, in T_D.
pub fn volume_time(plateau: f64) -> Result<f64> {
    check_positive("plateau", plateau)?;
    Ok((LONG_TIME_COEFFICIENT / plateau).powf(2.0 / 3.0))
}

/// D = [32/(15√π·G)]^{2/3}·d²/τ_V. Units follow the inputs.
pub fn estimate_diffusion(tau_v: f64, depth: f64, plateau: f64) -> Result<f64> {
    check_positive("tau_V", tau_v)?;
    check_positive("d", depth)?;
    Ok(volume_time(plateau)? * depth * depth / tau_v)
}

/// P = [1 + Φ²cos(δt)G]/2.
pub fn signal_probability(t: f64, delta: f64, phi_rms: f64, g: f64) -> Result<f64> {
    let amp = phi_rms * phi_rms * g;
    if !(amp.abs() <= 1.0) {
        return Err(Error::Domain(format!("Φ²|G| = {} exceeds 1", amp.abs())));
    }
    Ok(0.5 * (1.0 + amp * (delta * t).cos()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherSetup {
    /// Target frequency δ (rad per T_D).
    pub delta: f64,
    /// Total experiment time T.
    pub total_time: f64,
    /// Shot time τ̃ = τ + τ_o.
    pub shot_time: f64,
    pub phi_rms: f64,
}

impl FisherSetup {
    pub fn new(delta: f64, total_time: f64, shot_time: f64, phi_rms: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter { name: "delta", reason: format!("must be finite and >= 0, got {delta}") });
        }
        check_positive("shot_time", shot_time)?;
        if !(total_time >= shot_time && total_time.is_finite()) {
            return Err(Error::InvalidParameter { name: "total_time", reason: format!("must be >= shot time {shot_time}, got {total_time}") });
        }
        if !(phi_rms > 0.0 && phi_rms * phi_rms <= 1.0) {
            return Err(Error::InvalidParameter { name: "phi_rms", reason: format!("need 0 < Φ² <= 1, got Φ = {phi_rms}") });
        }
        Ok(FisherSetup { delta, total_time, shot_time, phi_rms })
    }

    /// Number of shots N = T/τ̃.
    pub fn shots(&self) -> usize {
        (self.total_time / self.shot_time * (1.0 + 1e-12)).floor() as usize
    }
}

/// Pair sum for a correlation envelope given as a function of t̃.
pub fn fisher_direct_fn<G: Fn(f64) -> f64 + Sync>(setup: &FisherSetup, g: G) -> f64 {
    let n = setup.shots();
    let tau = setup.shot_time;
    let terms: Vec<f64> = (1..=n)
        .into_par_iter()
        .map(|j| {
            let t = j as f64 * tau;
            let s = (setup.delta * t).sin();
            let gv = g(t);
            (n - j) as f64 * t * t * s * s * gv * gv
        })
        .collect();
    setup.phi_rms.powi(4) * pairwise_sum(&terms)
}

/// Pair sum on a sampled series (log-linear interpolation between samples).
pub fn fisher_direct(setup: &FisherSetup, series: &CorrelationSeries) -> Result<f64> {
    let last = series.points().last().ok_or_else(|| Error::Coverage("empty series".into()))?.t;
    if last < setup.total_time * (1.0 - 1e-12) {
        return Err(Error::Coverage(format!("series ends at t = {last}, experiment needs T = {}", setup.total_time)));
    }
    Ok(fisher_direct_fn(setup, |t| series.interpolate(t).unwrap_or(f64::NAN)))
}

/// Parameters of G ≈ B²·g_free(t̃)·e^{−2t̃/τ_V} + G_pl·e^{−t̃/τ̃_ev}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleModelParams {
    pub b_rms2: f64,
    pub tau_v: f64,
    pub plateau: f64,
    /// τ̃_ev = Vτ_ev/(Sd); infinite for reflecting walls.
    pub tau_ev_eff: f64,
}

impl SimpleModelParams {
    pub fn new(b_rms2: f64, tau_v: f64, plateau: f64, tau_ev_eff: f64) -> Result<Self> {
        check_positive("B_rms^2", b_rms2)?;
        check_positive("tau_V", tau_v)?;
        check_positive("plateau", plateau)?;
        if !(tau_ev_eff > 0.0) {
            return Err(Error::InvalidParameter { name: "tau_ev_eff", reason: format!("must be positive, got {tau_ev_eff}") });
        }
        Ok(SimpleModelParams { b_rms2, tau_v, plateau, tau_ev_eff })
    }

    /// Parameters implied by a geometry: B² by quadrature, the ideal plateau, its
    /// volume time and τ̃_ev = (τ_ev/d)(V/S).
    pub fn from_geometry(geom: &CylinderGeometry, fluid: &FluidParams, quad: &QuadratureSpec) -> Result<Self> {
        let plateau = plateau_ideal(geom);
        let tau_ev_eff = match fluid.tau_ev {
            Some(t) => t / geom.depth * geom.volume() / geom.surface(),
            None => f64::INFINITY,
        };
        Self::new(b_rms_squared(geom, quad)?, volume_time(plateau)?, plateau, tau_ev_eff)
    }
}

pub fn g_simple_model(t: f64, p: &SimpleModelParams) -> f64 {
    let tail = if p.tau_ev_eff.is_infinite() { 1.0 } else { (-t / p.tau_ev_eff).exp() };
    p.b_rms2 * g_free_at(t) * (-2.0 * t / p.tau_v).exp() + p.plateau * tail
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FisherRegime {
    /// δT ≥ 10
    pub many_periods: bool,
    /// δτ̃_ev < 1
    pub slow_frequency: bool,
    /// T ≥ 10τ̃_ev, where the dominant term applies
    pub long_experiment: bool,
    /// T ≥ 10/(2/τ_V + 1/τ̃_ev), so the decaying terms have died out before T
    pub tails_settled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherClosed {
    /// Closed form of the pair integral for the simplified model.
    pub full: f64,
    /// The six-term reference expansion, kept for comparison (see README).
    pub printed: f64,
    /// Dominant plateau term with tanh(δ²τ̃_ev²).
    pub dominant: f64,
    pub regime: FisherRegime,
}

// ∫₀ᵀ (T − t) t² e^{−st} dt
fn pair_moment(s: Complex64, t: f64) -> Complex64 {
    let st = s * t;
    if st.norm() < 2.0 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(t.powi(4), 0.0);
        let mut fact = 1.0;
        for k in 0..80 {
            let term = pow / (fact * (k as f64 + 3.0) * (k as f64 + 4.0));
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
            pow *= -s * t;
            fact *= k as f64 + 1.0;
        }
        return sum;
    }
    let e = (-st).exp();
    let partial = |n: usize| {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..=n {
            acc += term;
            term *= st / (k as f64 + 1.0);
        }
        acc
    };
    let m2 = 2.0 / s.powi(3) * (1.0 - e * partial(2));
    let m3 = 6.0 / s.powi(4) * (1.0 - e * partial(3));
    m2 * t - m3
}

// ∫₀^∞ (T − t) t^{1/2} e^{−st} dt
fn half_moment(s: Complex64, t: f64) -> Complex64 {
    let g32 = 0.5 * PI.sqrt();
    let g52 = 0.75 * PI.sqrt();
    t * g32 * s.powf(-1.5) - g52 * s.powf(-2.5)
}

/// Closed-form information for the simplified model, from the pair integral
/// (1/τ̃²)∫₀ᵀ (T − t)t² sin²(δt) G(t)² dt split into plateau², cross and free² parts.
/// The plateau part is exact; the other two use g_free ≈ (32/15√π)t^{−3/2}.
pub fn fisher_evap_closed(setup: &FisherSetup, p: &SimpleModelParams) -> FisherClosed {
    let (delta, t, tau) = (setup.delta, setup.total_time, setup.shot_time);
    let phi4 = setup.phi_rms.powi(4);
    let c3 = LONG_TIME_COEFFICIENT;
    let two_i_delta = Complex64::new(0.0, 2.0 * delta);

    let a = if p.tau_ev_eff.is_infinite() { 0.0 } else { 2.0 / p.tau_ev_eff };
    let plateau2 = p.plateau * p.plateau * 0.5 * (pair_moment(Complex64::new(a, 0.0), t).re - pair_moment(a - two_i_delta, t).re);

    let c = 2.0 / p.tau_v + 0.5 * a;
    let cross = p.b_rms2 * p.plateau * c3 * (half_moment(Complex64::new(c, 0.0), t).re - half_moment(c - two_i_delta, t).re);

    let cf = 4.0 / p.tau_v;
    let w = 4.0 * delta * delta;
    let free2 = p.b_rms2 * p.b_rms2 * c3 * c3 * (0.25 * t * (w / (cf * cf)).ln_1p() - 0.5 * w / (cf * (cf * cf + w)));

    let full = phi4 / (tau * tau) * (plateau2 + cross + free2);

    let te = p.tau_ev_eff;
    let dominant = if te.is_infinite() {
        f64::INFINITY
    } else {
        phi4 * p.plateau * p.plateau * te * te / (16.0 * tau * tau)
            * (2.0 * te * t + 2.0 * t * t * (-2.0 * t / te).exp())
            * (delta * delta * te * te).tanh()
    };

    FisherClosed {
        full,
        printed: phi4 * fisher_evap_printed(setup, p),
        dominant,
        regime: FisherRegime {
            many_periods: delta * t >= 10.0,
            slow_frequency: delta * te < 1.0,
            long_experiment: t >= 10.0 * te,
            tails_settled: t * c >= 10.0,
        },
    }
}

/// Six-term reference expansion in normalized units (T_D = 1), evaluated term by term.
/// The cross-term exponent carries a doubled minus sign, taken here as a single one.
pub fn fisher_evap_printed(setup: &FisherSetup, p: &SimpleModelParams) -> f64 {
    let (d, t, tau) = (setup.delta, setup.total_time, setup.shot_time);
    let (b2, tv, g, te) = (p.b_rms2, p.tau_v, p.plateau, p.tau_ev_eff);
    let tau2 = tau * tau;
    let g4 = g.powi(4);
    let e2 = (-2.0 * t / te).exp();
    let root = (te / (te + tv)).sqrt();
    let t1 = b2 * b2 * tv.powi(3) * d * d / (4.0 * tau2 * (1.0 + tv.powi(3) * d * d));
    let t2 = g4 * te * t * (te * te - 2.0 * t * t * e2) / (8.0 * tau2);
    let t3 = g4 * te / (16.0 * tau2) * (3.0 * te.powi(3) - e2 * (4.0 * t.powi(3) + 6.0 * t * t * te + 6.0 * t * te * te + 3.0 * te.powi(3)));
    let t4 = b2 * g * g * te * tv / (4.0 * (te + tv).powi(2))
        * (2.0 * t.sqrt() * (3.0 * te * tv + 2.0 * t * (te + tv)) * (-t / te - t / tv).exp() - 3.0 * PI.sqrt() * te * tv * root);
    let t5 = b2 * g * g * t * te * tv * PI.sqrt() / (2.0 * (te + tv)) * root;
    let t6 = b2 * t / 8.0 * (2.0 * te * d * d + te.powi(4) * d.powi(4)).ln_1p();
    t1 + t2 + t3 + t4 + t5 + t6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherRatios {
    /// Sticky confinement over free diffusion, G⁴T²/(Φ⁴ log δT).
    pub sticky_over_free: f64,
    /// Requires T ≥ 10τ_V and δT ≥ 10.
    pub sticky_valid: bool,
    /// Fast evaporation over free diffusion, log(1 + τ²δ² + τ⁴δ⁴)/(8 log δT);
    /// `None` without evaporation.
    pub evap_over_free: Option<f64>,
    /// Requires τ_ev ≤ T_D, δT ≥ 10 and δτ_ev < 1.
    pub evap_valid: bool,
}

pub fn ratio_sticky_free(plateau: f64, setup: &FisherSetup) -> f64 {
    plateau.powi(4) * setup.total_time.powi(2) / (setup.phi_rms.powi(4) * (setup.delta * setup.total_time).ln())
}

pub fn ratio_evap_free(tau_ev: f64, setup: &FisherSetup) -> f64 {
    let x = tau_ev * setup.delta;
    (x * x + x.powi(4)).ln_1p() / (8.0 * (setup.delta * setup.total_time).ln())
}

/// Both ratio formulas with their validity flags; values are returned even when a
/// flag is false. Times are in T_D of the given fluid.
pub fn fisher_ratios(setup: &FisherSetup, geom: &CylinderGeometry, fluid: &FluidParams) -> Result<FisherRatios> {
    let plateau = plateau_sticky(geom);
    let tau_v = volume_time(plateau)?;
    let dt = setup.delta * setup.total_time;
    let (evap_over_free, evap_valid) = match fluid.tau_ev {
        Some(te) => {
            let te = te / fluid.diffusion_time(geom.depth);
            (Some(ratio_evap_free(te, setup)), te <= 1.0 && dt >= 10.0 && setup.delta * te < 1.0)
        }
        None => (None, false),
    };
    Ok(FisherRatios {
        sticky_over_free: ratio_sticky_free(plateau, setup),
        sticky_valid: setup.total_time >= 10.0 * tau_v && dt >= 10.0,
        evap_over_free,
        evap_valid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: SimpleModelParams,
    /// Weighted RMS of ln(model) − ln(data).
    pub residual_norm: f64,
    /// Standard errors of ln B², ln τ_V, ln G_pl, ln τ̃_ev (relative sensitivities).
    pub sensitivity: [f64; 4],
    pub iterations: usize,
}

fn model_log(theta: &[f64; 4], t: f64) -> f64 {
    let p = SimpleModelParams { b_rms2: theta[0].exp(), tau_v: theta[1].exp(), plateau: theta[2].exp(), tau_ev_eff: theta[3].exp() };
    g_simple_model(t, &p).ln()
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for c in 0..4 {
        let piv = (c..4).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..4 {
            let f = a[r][c] / a[c][c];
            for k in c..4 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Least squares in ln G with weights uniform in ln t: a coarse (τ_V, τ̃_ev) grid with
/// the two amplitudes solved linearly, then Levenberg–Marquardt in log-parameters.
pub fn fit_simple_model(series: &CorrelationSeries) -> Result<FitResult> {
    let pts: Vec<_> = series.points().iter().filter(|p| p.t > 0.0).copied().collect();
    if pts.len() < 8 {
        return Err(Error::FitFailure(format!("need at least 8 positive-time samples, got {}", pts.len())));
    }
    if pts.iter().any(|p| !(p.g > 0.0)) {
        return Err(Error::FitFailure("log-space fit needs positive correlation values".into()));
    }
    let n = pts.len();
    let lt: Vec<f64> = pts.iter().map(|p| p.t.ln()).collect();
    let span = lt[n - 1] - lt[0];
    let w: Vec<f64> = (0..n)
        .map(|i| {
            let lo = if i == 0 { lt[0] } else { 0.5 * (lt[i - 1] + lt[i]) };
            let hi = if i == n - 1 { lt[n - 1] } else { 0.5 * (lt[i] + lt[i + 1]) };
            (hi - lo) / span
        })
        .collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.g.ln()).collect();
    let cost = |th: &[f64; 4]| -> f64 { (0..n).map(|i| w[i] * (model_log(th, pts[i].t) - ly[i]).powi(2)).sum() };

    // seeds: amplitudes by relative linear least squares on a (τ_V, τ̃_ev) grid
    let (t0, t1) = (pts[0].t, pts[n - 1].t);
    const GRID: usize = 48;
    let mut seeds: Vec<([f64; 4], f64)> = Vec::new();
    for i in 0..GRID {
        let tv = t0 * (t1 / t0).powf(i as f64 / (GRID - 1) as f64);
        for k in 0..GRID {
            let te = t0 * (100.0 * t1 / t0).powf(k as f64 / (GRID - 1) as f64);
            let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, p) in pts.iter().enumerate() {
                let f1 = g_free_at(p.t) * (-2.0 * p.t / tv).exp() / p.g;
                let f2 = (-p.t / te).exp() / p.g;
                s11 += w[i] * f1 * f1;
                s12 += w[i] * f1 * f2;
                s22 += w[i] * f2 * f2;
                r1 += w[i] * f1;
                r2 += w[i] * f2;
            }
            let det = s11 * s22 - s12 * s12;
            if det.abs() < 1e-300 {
                continue;
            }
            let b = (r1 * s22 - r2 * s12) / det;
            let g = (s11 * r2 - s12 * r1) / det;
            if !(b > 0.0 && g > 0.0) {
                continue;
            }
            let th = [b.ln(), tv.ln(), g.ln(), te.ln()];
            let c = cost(&th);
            if c.is_finite() {
                seeds.push((th, c));
            }
        }
    }
    if seeds.is_empty() {
        return Err(Error::FitFailure("no admissible starting point on the seed grid".into()));
    }
    seeds.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());

    let jacobian = |th: &[f64; 4]| -> Vec<[f64; 4]> {
        (0..n)
            .map(|i| {
                let mut row = [0.0; 4];
                for k in 0..4 {
                    let h = 1e-6;
                    let mut a = *th;
                    let mut b = *th;
                    a[k] += h;
                    b[k] -= h;
                    row[k] = (model_log(&a, pts[i].t) - model_log(&b, pts[i].t)) / (2.0 * h);
                }
                row
            })
            .collect()
    };
    let refine = |mut th: [f64; 4], mut c: f64| -> ([f64; 4], f64, usize) {
        let mut lambda = 1e-3;
        let mut iterations = 0;
        for it in 0..500 {
            iterations = it + 1;
            let jac = jacobian(&th);
            let mut jtj = [[0.0; 4]; 4];
            let mut jtr = [0.0; 4];
            for i in 0..n {
                let r = model_log(&th, pts[i].t) - ly[i];
                for a in 0..4 {
                    jtr[a] += w[i] * jac[i][a] * r;
                    for b in 0..4 {
                        jtj[a][b] += w[i] * jac[i][a] * jac[i][b];
                    }
                }
            }
            let mut done = true;
            while lambda < 1e12 {
                let mut m = jtj;
                for a in 0..4 {
                    m[a][a] += lambda * (jtj[a][a] + 1e-12);
                }
                let Some(step) = solve4(m, jtr.map(|x| -x)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = [th[0] + step[0], th[1] + step[1], th[2] + step[2], th[3] + step[3]];
                let ct = cost(&trial);
                if ct.is_finite() && ct <= c {
                    let rel = (c - ct) / c.max(1e-300);
                    th = trial;
                    c = ct;
                    lambda = (lambda / 10.0).max(1e-12);
                    done = rel < 1e-14 || step.iter().all(|s| s.abs() < 1e-10);
                    break;
                }
                lambda *= 10.0;
            }
            if done {
                break;
            }
        }
        (th, c, iterations)
    };
    // local refinement from the best few distinct seeds
    let mut starts: Vec<[f64; 4]> = Vec::new();
    for (th, _) in &seeds {
        if starts.iter().all(|s| (s[1] - th[1]).abs() > 0.5 || (s[3] - th[3]).abs() > 0.5) {
            starts.push(*th);
        }
        if starts.len() == 6 {
            break;
        }
    }
    let (th, c, iterations) = starts
        .into_iter()
        .map(|th| refine(th, cost(&th)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    if !th.iter().all(|x| x.is_finite()) || !c.is_finite() {
        return Err(Error::FitFailure(format!("non-finite parameters after {iterations} iterations")));
    }

    let jac = jacobian(&th);
    let mut jtj = [[0.0; 4]; 4];
    for i in 0..n {
        for a in 0..4 {
            for b in 0..4 {
                jtj[a][b] += w[i] * jac[i][a] * jac[i][b];
            }
        }
    }
    let dof = (n as f64 - 4.0).max(1.0);
    let sigma2 = c * n as f64 / dof;
    let mut sensitivity = [f64::INFINITY; 4];
    for k in 0..4 {
        let mut e = [0.0; 4];
        e[k] = 1.0;
        if let Some(col) = solve4(jtj, e) {
            // weights sum to one, so rescale to per-point variance
            sensitivity[k] = (col[k] * sigma2 / n as f64).abs().sqrt();
        }
    }
    let params = SimpleModelParams::new(th[0].exp(), th[1].exp(), th[2].exp(), th[3].exp())
        .map_err(|e| Error::FitFailure(format!("fitted parameters invalid: {e}")))?;
    if t0 > 0.1 * params.tau_v || t1 < 10.0 * params.tau_v {
        return Err(Error::Coverage(format!(
            "series [{t0}, {t1}] does not span [0.1, 10]·τ_V with fitted τ_V = {}",
            params.tau_v
        )));
    }
    Ok(FitResult { params, residual_norm: c.sqrt(), sensitivity, iterations })
}

/// Settings for locating the decay/plateau crossing in a measured curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossingConfig {
    /// Fraction of the ln t span, at the end of the record, taken as the plateau.
    pub plateau_tail: f64,
    /// Upper bound of the diffusive window, in units of the first sample.
    pub diffusive_upper: f64,
    /// Lower bound of the diffusive window, in units of the plateau.
    pub diffusive_lower: f64,
    pub min_points: usize,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        CrossingConfig { plateau_tail: 0.2, diffusive_upper: 0.2, diffusive_lower: 3.0, min_points: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Plateau median relative to the first sample.
    pub plateau: f64,
    /// Fitted power law A·t^s over the diffusive window.
    pub amplitude: f64,
    pub exponent: f64,
    /// Time where the power law meets the plateau, in the units of the input times.
    pub time: f64,
    pub window_points: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Normalizes by the first sample, takes the plateau as the median of the tail, fits
/// a power law in the diffusive window and bisects for its crossing with the plateau.
pub fn detect_crossing(times: &[f64], values: &[f64], cfg: &CrossingConfig) -> Result<Crossing> {
    if times.len() != values.len() || times.len() < 2 * cfg.min_points {
        return Err(Error::FitFailure("crossing detection needs matching, non-trivial samples".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] <= 0.0 {
        return Err(Error::Domain("times must be positive and increasing".into()));
    }
    let g0 = values[0];
    check_positive("G(first)", g0)?;
    let norm: Vec<f64> = values.iter().map(|v| v / g0).collect();
    let (l0, l1) = (times[0].ln(), times[times.len() - 1].ln());
    let cut = l1 - cfg.plateau_tail * (l1 - l0);
    let tail: Vec<f64> = times.iter().zip(&norm).filter(|(t, _)| t.ln() >= cut).map(|(_, v)| *v).collect();
    let plateau = median(tail);
    check_positive("plateau", plateau)?;
    let lower = cfg.diffusive_lower * plateau;
    let (mut sx, mut sy, mut sxx, mut sxy, mut k) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for (t, v) in times.iter().zip(&norm) {
        if t.ln() < cut && *v <= cfg.diffusive_upper && *v >= lower {
            let (x, y) = (t.ln(), v.ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            k += 1;
        }
    }
    if k < cfg.min_points {
        return Err(Error::FitFailure(format!("only {k} samples in the diffusive window [{lower}, {}]", cfg.diffusive_upper)));
    }
    let kf = k as f64;
    let slope = (kf * sxy - sx * sy) / (kf * sxx - sx * sx);
    let icpt = (sy - slope * sx) / kf;
    if !(slope < 0.0) {
        return Err(Error::FitFailure(format!("diffusive window is not decaying (exponent {slope})")));
    }
    let f = |x: f64| icpt + slope * x - plateau.ln();
    let (mut a, mut b) = (l0, l1);
    if f(a) * f(b) > 0.0 {
        return Err(Error::FitFailure("power law does not cross the plateau inside the record".into()));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(a) * f(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(Crossing { plateau, amplitude: icpt.exp(), exponent: slope, time: (0.5 * (a + b)).exp(), window_points: k })
}

/// Blind D estimate from a correlation record with physical times.
pub fn estimate_diffusion_from_record(times: &[f64], values: &[f64], depth: f64, cfg: &CrossingConfig) -> Result<(f64, Crossing)> {
    let c = detect_crossing(times, values, cfg)?;
    Ok((estimate_diffusion(c.time, depth, c.plateau)?, c))
}
