//! Random-walk oracle: particles diffusing in the cylinder (or above the probe plane)
//! with reflecting, sticky or evaporating walls, and the empirical correlation
//! G(t̃) = V·⟨k(r(t̃))·k(r(0))⟩ over uniform starting points.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::estimation::volume_time;
use crate::geometry::{dipolar_kernel, CylinderGeometry};
use crate::numerics::pairwise_sum;
use crate::series::{CorrelationSeries, FluidParams, ModelTag, SeriesPoint};
use crate::sticky::plateau_ideal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WallModel {
    /// Half-space above the probe plane z = d, reflecting at the plane; no side walls.
    Free,
    Reflective,
    Sticky,
    Evaporating,
}

impl WallModel {
    pub fn tag(self) -> ModelTag {
        match self {
            WallModel::Free => ModelTag::Free,
            WallModel::Reflective => ModelTag::Reflective,
            WallModel::Sticky => ModelTag::Sticky,
            WallModel::Evaporating => ModelTag::Evaporating,
        }
    }
}

/// Wall behaviour for one step; evaporation carries its per-contact probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Wall {
    Free,
    Reflective,
    Sticky,
    Evaporating { p_abs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Bulk,
    Stuck,
    Evaporated,
}

/// p_abs = κ√(πΔt) with κ = d/τ_ev (normalized units, D = 1).
pub fn absorption_probability(geom: &CylinderGeometry, tau_ev: f64, dt: f64) -> f64 {
    geom.depth / tau_ev * (PI * dt).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MCConfig {
    /// Particles per realization.
    pub particles: usize,
    pub realizations: usize,
    /// Time step in T_D.
    pub dt: f64,
    /// Output times in T_D; each is rounded to a whole number of steps.
    pub times: Vec<f64>,
    pub wall: WallModel,
    pub seed: u64,
}

impl MCConfig {
    pub fn validate(&self, geom: &CylinderGeometry) -> Result<()> {
        if self.particles == 0 || self.realizations < 2 {
            return Err(Error::InvalidParameter { name: "particles", reason: "need particles > 0 and at least 2 realizations".into() });
        }
        check_positive("dt", self.dt)?;
        let scale = match self.wall {
            WallModel::Free => 1.0,
            _ => volume_time(plateau_ideal(geom))?.min(1.0),
        };
        if self.dt > 1e-3 * scale * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must not exceed 1e-3·min(1, τ_V) = {}", 1e-3 * scale) });
        }
        if self.times.is_empty() || self.times.windows(2).any(|w| !(w[1] > w[0])) || !(self.times[0] >= 0.0) {
            return Err(Error::InvalidParameter { name: "times", reason: "need a non-empty increasing grid of times >= 0".into() });
        }
        Ok(())
    }

    fn step_counts(&self) -> Vec<usize> {
        self.times.iter().map(|t| (t / self.dt).round() as usize).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCResult {
    pub correlation: CorrelationSeries,
    /// Fraction of particles still diffusing in the bulk (not stuck, not evaporated).
    pub survival: Vec<SeriesPoint>,
    pub config: MCConfig,
}

fn reflect_axis(mut x: f64, lo: f64, hi: f64) -> (f64, bool) {
    let mut hit = false;
    loop {
        if x < lo {
            x = 2.0 * lo - x;
            hit = true;
        } else if x > hi {
            x = 2.0 * hi - x;
            hit = true;
        } else {
            return (x, hit);
        }
    }
}

// Mirrors the radial coordinate back into the disc; returns whether the wall was hit.
fn reflect_radial(p: &mut [f64; 3], r: f64) -> bool {
    let rho = p[0].hypot(p[1]);
    if rho <= r {
        return false;
    }
    let mut m = 2.0 * r - rho;
    if m < 0.0 {
        m = m.abs().min(r);
    }
    let s = m / rho;
    p[0] *= s;
    p[1] *= s;
    true
}

// First fraction s ∈ (0, 1] of the segment a → b at which it leaves the cylinder.
fn exit_fraction(a: &[f64; 3], b: &[f64; 3], geom: &CylinderGeometry) -> f64 {
    let mut s = 1.0f64;
    let dz = b[2] - a[2];
    if b[2] < geom.z_min() && dz != 0.0 {
        s = s.min((geom.z_min() - a[2]) / dz);
    }
    if b[2] > geom.z_max() && dz != 0.0 {
        s = s.min((geom.z_max() - a[2]) / dz);
    }
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let qa = dx * dx + dy * dy;
    if b[0] * b[0] + b[1] * b[1] > geom.radius * geom.radius && qa > 0.0 {
        let qb = 2.0 * (a[0] * dx + a[1] * dy);
        let qc = a[0] * a[0] + a[1] * a[1] - geom.radius * geom.radius;
        let root = (-qb + (qb * qb - 4.0 * qa * qc).max(0.0).sqrt()) / (2.0 * qa);
        s = s.min(root);
    }
    s.clamp(0.0, 1.0)
}

/// One Euler step with Gaussian increments of standard deviation √(2Δt) per axis.
/// Positions are Cartesian with the probe at the origin and the cylinder axis along z.
pub fn step_particle<R: Rng + ?Sized>(pos: [f64; 3], dt: f64, geom: &CylinderGeometry, wall: Wall, rng: &mut R) -> ([f64; 3], Status) {
    let sigma = (2.0 * dt).sqrt();
    let mut p = pos;
    for x in p.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *x += sigma * n;
    }
    match wall {
        Wall::Free => {
            p[2] = reflect_axis(p[2], geom.z_min(), f64::INFINITY).0;
            (p, Status::Bulk)
        }
        Wall::Reflective => {
            p[2] = reflect_axis(p[2], geom.z_min(), geom.z_max()).0;
            reflect_radial(&mut p, geom.radius);
            (p, Status::Bulk)
        }
        Wall::Sticky => {
            let outside = p[2] < geom.z_min() || p[2] > geom.z_max() || p[0] * p[0] + p[1] * p[1] > geom.radius * geom.radius;
            if !outside {
                return (p, Status::Bulk);
            }
            let s = exit_fraction(&pos, &p, geom);
            let mut q = [0.0; 3];
            for k in 0..3 {
                q[k] = pos[k] + s * (p[k] - pos[k]);
            }
            q[2] = q[2].clamp(geom.z_min(), geom.z_max());
            let rho = q[0].hypot(q[1]);
            if rho > geom.radius {
                q[0] *= geom.radius / rho;
                q[1] *= geom.radius / rho;
            }
            (q, Status::Stuck)
        }
        Wall::Evaporating { p_abs } => {
            let (z, hz) = reflect_axis(p[2], geom.z_min(), geom.z_max());
            p[2] = z;
            let hr = reflect_radial(&mut p, geom.radius);
            if (hz || hr) && rng.random::<f64>() < p_abs {
                (p, Status::Evaporated)
            } else {
                (p, Status::Bulk)
            }
        }
    }
}

/// Uniform point in the cylinder: ρ² uniform, φ uniform, z uniform.
fn sample_uniform<R: Rng + ?Sized>(geom: &CylinderGeometry, rng: &mut R) -> [f64; 3] {
    let rho = geom.radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    let z = geom.z_min() + geom.height * rng.random::<f64>();
    [rho * phi.cos(), rho * phi.sin(), z]
}

/// Point above the probe plane with density r⁻⁴/π (r measured from the probe), and its
/// importance weight π·r⁴. The z marginal is 1/z² and ρ² | z follows z²U/(1 − U).
fn sample_half_space<R: Rng + ?Sized>(depth: f64, rng: &mut R) -> ([f64; 3], f64) {
    let u: f64 = 1.0 - rng.random::<f64>();
    let z = depth / u;
    let v: f64 = rng.random::<f64>();
    let rho = z * (v / (1.0 - v)).sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    let r2 = rho * rho + z * z;
    // normalized for d = 1 units: ∫_{z>d} r⁻⁴ dV = π/d
    ([rho * phi.cos(), rho * phi.sin(), z], PI / depth * r2 * r2)
}

struct Realization {
    corr: Vec<f64>,
    alive: Vec<f64>,
}

fn run_realization(cfg: &MCConfig, geom: &CylinderGeometry, wall: Wall, index: usize, steps: &[usize]) -> Realization {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let nt = steps.len();
    let mut corr = vec![0.0; nt];
    let mut alive = vec![0.0; nt];
    let mut per_particle = vec![0.0; nt];
    let volume = geom.volume();
    let mut acc: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.particles); nt];
    for _ in 0..cfg.particles {
        let (mut p, weight) = match wall {
            Wall::Free => sample_half_space(geom.depth, &mut rng),
            _ => (sample_uniform(geom, &mut rng), volume),
        };
        let k0 = weight * dipolar_kernel(p[0].hypot(p[1]), p[2]);
        let mut status = Status::Bulk;
        let mut done = 0usize;
        for (i, &target) in steps.iter().enumerate() {
            while done < target && status == Status::Bulk {
                let (q, s) = step_particle(p, cfg.dt, geom, wall, &mut rng);
                p = q;
                status = s;
                done += 1;
            }
            per_particle[i] = match status {
                Status::Evaporated => 0.0,
                _ => k0 * dipolar_kernel(p[0].hypot(p[1]), p[2]),
            };
            if status == Status::Bulk {
                alive[i] += 1.0;
            }
        }
        for i in 0..nt {
            acc[i].push(per_particle[i]);
        }
    }
    let n = cfg.particles as f64;
    for i in 0..nt {
        corr[i] = pairwise_sum(&acc[i]) / n;
        alive[i] /= n;
    }
    Realization { corr, alive }
}

fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let var = pairwise_sum(&values.iter().map(|v| (v - mean).powi(2)).collect::<Vec<_>>()) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every realization on its own ChaCha8 stream derived from (seed, index) and
/// reports across-realization means with their standard errors. Results do not depend
/// on the thread count.
pub fn simulate_correlation(cfg: &MCConfig, geom: &CylinderGeometry, fluid: &FluidParams) -> Result<MCResult> {
    cfg.validate(geom)?;
    let wall = match cfg.wall {
        WallModel::Free => Wall::Free,
        WallModel::Reflective => Wall::Reflective,
        WallModel::Sticky => Wall::Sticky,
        WallModel::Evaporating => {
            let tau = fluid.tau_ev.ok_or(Error::InvalidParameter { name: "tau_ev", reason: "evaporating walls need tau_ev".into() })?;
            let tau = tau / fluid.diffusion_time(geom.depth);
            let p_abs = absorption_probability(geom, tau, cfg.dt);
            if p_abs > 1.0 {
                return Err(Error::InvalidParameter { name: "dt", reason: format!("absorption probability {p_abs} exceeds 1") });
            }
            Wall::Evaporating { p_abs }
        }
    };
    let steps = cfg.step_counts();
    let runs: Vec<Realization> = (0..cfg.realizations).into_par_iter().map(|i| run_realization(cfg, geom, wall, i, &steps)).collect();
    let mut points = Vec::with_capacity(steps.len());
    let mut survival = Vec::with_capacity(steps.len());
    for (i, &s) in steps.iter().enumerate() {
        let t = s as f64 * cfg.dt;
        let (g, err) = mean_and_error(&runs.iter().map(|r| r.corr[i]).collect::<Vec<_>>());
        let (a, aerr) = mean_and_error(&runs.iter().map(|r| r.alive[i]).collect::<Vec<_>>());
        points.push(SeriesPoint { t, g, err });
        survival.push(SeriesPoint { t, g: a, err: aerr });
    }
    let correlation = CorrelationSeries::new(ModelTag::MonteCarlo, *geom, *fluid, points)?.with_seed(cfg.seed);
    Ok(MCResult { correlation, survival, config: cfg.clone() })
}

/// Per-point z-scores (a − b)/√(σa² + σb²); points where both errors vanish give 0 for
/// equal values and ±∞ otherwise.
pub fn z_scores(mc: &[SeriesPoint], analytic: &[SeriesPoint]) -> Result<Vec<f64>> {
    if mc.len() != analytic.len() {
        return Err(Error::Domain("z-scores need series on the same grid".into()));
    }
    mc.iter()
        .zip(analytic)
        .map(|(a, b)| {
            if (a.t - b.t).abs() > 1e-9 * a.t.abs().max(1e-300) {
                return Err(Error::Domain(format!("grid mismatch at t = {} vs {}", a.t, b.t)));
            }
            let s = (a.err * a.err + b.err * b.err).sqrt();
            let d = a.g - b.g;
            Ok(if s > 0.0 { d / s } else if d == 0.0 { 0.0 } else { d.signum() * f64::INFINITY })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{b_rms_squared, B_RMS_SQUARED_HALF_SPACE};
    use crate::numerics::QuadratureSpec;

    fn g(r: f64, l: f64) -> CylinderGeometry {
        CylinderGeometry::new(r, l, 1.0).unwrap()
    }

    fn cfg(wall: WallModel, times: Vec<f64>, particles: usize, realizations: usize) -> MCConfig {
        MCConfig { particles, realizations, dt: 1e-3, times, wall, seed: 7 }
    }

    #[test]
    fn zero_step_keeps_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = [0.3, -0.2, 1.5];
        for wall in [Wall::Free, Wall::Reflective, Wall::Sticky, Wall::Evaporating { p_abs: 0.5 }] {
            assert_eq!(step_particle(p, 0.0, &g(1.0, 1.0), wall, &mut rng), (p, Status::Bulk));
        }
    }

    #[test]
    fn reflective_containment() {
        let c = g(0.5, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = [0.1, 0.1, 1.1];
        for _ in 0..1_000_000 {
            let (q, s) = step_particle(p, 1e-3, &c, Wall::Reflective, &mut rng);
            assert_eq!(s, Status::Bulk);
            assert!(c.contains(q[0].hypot(q[1]), q[2]), "{q:?}");
            p = q;
        }
    }

    #[test]
    fn sticky_freezes_on_the_wall() {
        let c = g(1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = [0.0, 0.0, 1.5];
        let mut stuck = None;
        for _ in 0..100_000 {
            let (q, s) = step_particle(p, 1e-3, &c, Wall::Sticky, &mut rng);
            p = q;
            if s == Status::Stuck {
                stuck = Some(q);
                break;
            }
        }
        let q = stuck.expect("particle never reached the wall");
        let rho = q[0].hypot(q[1]);
        assert!(c.contains(rho, q[2]));
        let on_wall = (rho - 1.0).abs() < 1e-12 || (q[2] - 1.0).abs() < 1e-12 || (q[2] - 2.0).abs() < 1e-12;
        assert!(on_wall, "{q:?}");
    }

    #[test]
    fn config_validation() {
        let c = g(2.0, 2.0);
        let mut k = cfg(WallModel::Reflective, vec![0.1, 1.0], 10, 4);
        assert!(k.validate(&c).is_ok());
        k.dt = 1e-2;
        assert!(k.validate(&c).is_err());
        let k = cfg(WallModel::Reflective, vec![1.0, 0.1], 10, 4);
        assert!(k.validate(&c).is_err());
        let k = cfg(WallModel::Evaporating, vec![0.1], 10, 4);
        assert!(simulate_correlation(&k, &c, &FluidParams::default()).is_err());
    }

    #[test]
    fn reproducible_streams() {
        let c = g(1.0, 1.0);
        let k = cfg(WallModel::Evaporating, vec![0.0, 0.05, 0.2], 200, 4);
        let f = FluidParams::evaporating(1.0).unwrap();
        let a = simulate_correlation(&k, &c, &f).unwrap();
        let b = simulate_correlation(&k, &c, &f).unwrap();
        assert_eq!(a, b);
        let mut k2 = k.clone();
        k2.seed = 8;
        assert_ne!(simulate_correlation(&k2, &c, &f).unwrap().correlation, a.correlation);
    }

    #[test]
    fn equal_time_variance_is_b_rms() {
        let c = g(2.0, 2.0);
        let r = simulate_correlation(&cfg(WallModel::Reflective, vec![0.0], 20_000, 16), &c, &FluidParams::default()).unwrap();
        let p = r.correlation.points()[0];
        let b2 = b_rms_squared(&c, &QuadratureSpec::default()).unwrap();
        assert!(((p.g - b2) / p.err).abs() < 3.5, "{} ± {} vs {b2}", p.g, p.err);
        assert!(p.err > 0.0);
        let f = simulate_correlation(&cfg(WallModel::Free, vec![0.0], 20_000, 16), &c, &FluidParams::default()).unwrap();
        let p = f.correlation.points()[0];
        assert!(((p.g - B_RMS_SQUARED_HALF_SPACE) / p.err).abs() < 3.5, "{} ± {}", p.g, p.err);
    }

    #[test]
    fn survival_monotone() {
        let c = g(1.0, 1.0);
        let times = crate::series::log_grid_n(0.01, 1.0, 8).unwrap();
        for wall in [WallModel::Sticky, WallModel::Evaporating] {
            let r = simulate_correlation(&cfg(wall, times.clone(), 500, 4), &c, &FluidParams::evaporating(0.5).unwrap()).unwrap();
            assert!(r.survival.windows(2).all(|w| w[1].g <= w[0].g));
            assert!(r.survival.iter().all(|p| (0.0..=1.0).contains(&p.g)));
            assert!(r.survival.last().unwrap().g < 1.0);
        }
        let r = simulate_correlation(&cfg(WallModel::Reflective, times, 100, 2), &c, &FluidParams::default()).unwrap();
        assert!(r.survival.iter().all(|p| p.g == 1.0));
    }

    #[test]
    fn reflective_equilibrium_is_uniform() {
        // histogram of (ρ², z) after many relaxation times
        let c = g(1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mut hist = [[0usize; 10]; 10];
        for _ in 0..n {
            let mut p = [0.0, 0.0, 1.001];
            for _ in 0..2000 {
                p = step_particle(p, 1e-3, &c, Wall::Reflective, &mut rng).0;
            }
            let a = ((p[0] * p[0] + p[1] * p[1]) * 10.0).min(9.999) as usize;
            let b = ((p[2] - 1.0) * 10.0).min(9.999) as usize;
            hist[a][b] += 1;
        }
        let expect = n as f64 / 100.0;
        for row in hist {
            for h in row {
                assert!((h as f64 - expect).abs() < 4.0 * expect.sqrt(), "{h} vs {expect}");
            }
        }
    }

    #[test]
    fn halving_dt_within_noise() {
        let c = g(1.0, 1.0);
        let times = vec![0.1, 0.5];
        let mut a = cfg(WallModel::Reflective, times.clone(), 2000, 8);
        let b = simulate_correlation(&a, &c, &FluidParams::default()).unwrap();
        a.dt = 5e-4;
        a.seed = 99;
        let h = simulate_correlation(&a, &c, &FluidParams::default()).unwrap();
        for z in z_scores(b.correlation.points(), h.correlation.points()).unwrap() {
            assert!(z.abs() < 3.5, "{z}");
        }
    }

    #[test]
    fn z_score_grid_checks() {
        let p = |t, g, err| SeriesPoint { t, g, err };
        assert_eq!(z_scores(&[p(1.0, 2.0, 1.0)], &[p(1.0, 1.0, 0.0)]).unwrap(), vec![1.0]);
        assert!(z_scores(&[p(1.0, 2.0, 1.0)], &[p(2.0, 1.0, 0.0)]).is_err());
        assert!(z_scores(&[p(1.0, 2.0, 1.0)], &[]).is_err());
    }
}
