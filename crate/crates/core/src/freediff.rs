//! Unconfined diffusion above the probe: the normalized correlation g_free(t̃).
//!
//! Three representations are used, each where it is numerically clean:
//! an asymptotic small-t̃ series, the closed form with a scaled erfc, and a
//! convergent series in 1/√t̃ for large t̃ where the closed form cancels.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::erfcx;

/// Time in units of T_D = d²/D.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NormalizedTime(f64);

impl NormalizedTime {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t >= 0.0 {
            Ok(NormalizedTime(t))
        } else {
            Err(Error::Domain(format!("normalized time must be finite and >= 0, got {t}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Below this the asymptotic series is used.
pub const SMALL_T_SWITCH: f64 = 1e-2;
/// Above this the large-t̃ series is used.
pub const LARGE_T_SWITCH: f64 = 30.0;

/// 32/(15√π).
pub const LONG_TIME_COEFFICIENT: f64 = 1.203_604_444_901_880_1;

pub fn g_free(t: NormalizedTime) -> f64 {
    g_free_at(t.0)
}

/// g_free for a raw non-negative time; NaN for invalid input.
pub fn g_free_at(t: f64) -> f64 {
    if !(t >= 0.0) {
        return f64::NAN;
    }
    if t < SMALL_T_SWITCH {
        small_t_series(t)
    } else if t <= LARGE_T_SWITCH {
        closed_form(t)
    } else {
        large_t_series(t)
    }
}

pub fn g_free_long_asymptote(t: NormalizedTime) -> Result<f64> {
    if t.0 == 0.0 {
        return Err(Error::Domain("long-time asymptote diverges at t = 0".into()));
    }
    Ok(LONG_TIME_COEFFICIENT * t.0.powf(-1.5))
}

/// Closed form, valid for all t̃ > 0 but cancellation-prone at both ends.
pub fn closed_form(t: f64) -> f64 {
    let st = t.sqrt();
    let s = 1.0 / st;
    let sqpi = PI.sqrt();
    // sqrt(pi/t)·erfc(1/sqrt t)·e^{1/t}
    let a = sqpi * s * erfcx(s);
    let t32 = t * st;
    let poly = -1.0 / t32 + 1.5 * t32 + s - 1.75 * st;
    let rest = 1.0 / t32 - 1.5 * s - 1.5 * sqpi * t + 3.0 * st + 0.25 * sqpi;
    4.0 / sqpi * (poly * a + rest)
}

// a_n = (-1)^n (2n-1)!!/2^n, the coefficients of sqrt(pi)·x·erfcx(x) ~ sum a_n x^(-2n) scaled.
fn small_t_coefficients() -> &'static [f64] {
    static C: OnceLock<Vec<f64>> = OnceLock::new();
    C.get_or_init(|| {
        let n_max = 64;
        let mut a = vec![1.0f64; n_max + 4];
        for n in 1..a.len() {
            a[n] = -a[n - 1] * (2.0 * n as f64 - 1.0) / 2.0;
        }
        // coefficient of t^{k+1/2}, k >= 1
        (1..=n_max)
            .map(|k| -a[k + 2] + a[k + 1] - 1.75 * a[k] + 1.5 * a[k - 1])
            .collect()
    })
}

/// Asymptotic expansion 1 − 6t̃ + (4/√π)Σ c_k t̃^{k+1/2}, truncated at its smallest term.
pub fn small_t_series(t: f64) -> f64 {
    let c = small_t_coefficients();
    let mut sum = 0.0;
    let mut pow = t.sqrt() * t;
    let mut prev = f64::INFINITY;
    for &ck in c {
        let term = ck * pow;
        if term.abs() > prev || term.abs() < 1e-18 {
            break;
        }
        sum += term;
        prev = term.abs();
        pow *= t;
    }
    1.0 - 6.0 * t + 4.0 / PI.sqrt() * sum
}

// Taylor coefficients of g in s = t^{-1/2}, from erfcx(s) = Σ (−s)^n / Γ(n/2 + 1).
fn large_t_coefficients() -> &'static [f64] {
    static C: OnceLock<Vec<f64>> = OnceLock::new();
    C.get_or_init(|| {
        let n_max = 80usize;
        let sqpi = PI.sqrt();
        // e[n] = (−1)^n / Γ(n/2 + 1), built from Γ(1) = 1 and Γ(3/2) = √π/2
        let mut e = vec![0.0f64; n_max + 8];
        let mut g_int = 1.0; // Γ(m + 1)
        let mut g_half = sqpi / 2.0; // Γ(m + 3/2)
        for n in 0..e.len() {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            if n % 2 == 0 {
                e[n] = sign / g_int;
                g_int *= (n / 2 + 1) as f64;
            } else {
                e[n] = sign / g_half;
                g_half *= (n / 2) as f64 + 1.5;
            }
        }
        let at = |n: isize| if n < 0 { 0.0 } else { e[n as usize] };
        (0..=n_max as isize)
            .map(|k| {
                let mut v = sqpi * (-at(k - 4) + 1.5 * at(k + 2) + at(k - 2) - 1.75 * at(k));
                match k {
                    0 => v += 0.25 * sqpi,
                    1 => v -= 1.5,
                    3 => v += 1.0,
                    _ => {}
                }
                4.0 / sqpi * v
            })
            .collect()
    })
}

/// Convergent series in s = t̃^{-1/2}; the first non-vanishing term is the t̃^{-3/2} asymptote.
pub fn large_t_series(t: f64) -> f64 {
    let c = large_t_coefficients();
    let s = 1.0 / t.sqrt();
    let mut sum = 0.0;
    let mut pow = s * s * s;
    for &ck in &c[3..] {
        let term = ck * pow;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        pow *= s;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nt(t: f64) -> NormalizedTime {
        NormalizedTime::new(t).unwrap()
    }

    // High-precision reference values of the closed form.
    const REFERENCE: [(f64, f64); 8] = [
        (1e-3, 0.994_356_078),
        (1e-2, 0.951_055_533_400_549),
        (0.05, 0.814_963_8),
        (0.1, 0.701_492_9),
        (1.0, 0.214_312_3),
        (10.0, 0.020_525_365_953_264_5),
        (100.0, 9.818_520_351_677_67e-4),
        (1000.0, 3.565_634_071_573_12e-5),
    ];

    #[test]
    fn matches_reference_values() {
        for (t, want) in REFERENCE {
            let got = g_free(nt(t));
            let digits = if want.to_string().len() > 12 { 1e-12 } else { 2e-7 };
            assert!((got / want - 1.0).abs() < digits, "t={t}: {got} vs {want}");
        }
        assert!((large_t_series(1e4) / 1.178_911_049_290_31e-6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn starts_at_one() {
        assert_eq!(g_free(nt(0.0)), 1.0);
        assert!((g_free(nt(1e-6)) - (1.0 - 6e-6 + 20.0 / PI.sqrt() * 1e-9)).abs() < 1e-12);
    }

    #[test]
    fn leading_series_coefficient() {
        let c = small_t_coefficients();
        assert!((c[0] - 5.0).abs() < 1e-15);
        let c = large_t_coefficients();
        assert!(c[..3].iter().all(|v| v.abs() < 1e-14), "{:?}", &c[..3]);
        assert!((c[3] - LONG_TIME_COEFFICIENT).abs() < 1e-14);
        assert!((c[4] + 2.5).abs() < 1e-13);
    }

    #[test]
    fn continuous_across_switches() {
        for t in [SMALL_T_SWITCH, LARGE_T_SWITCH] {
            let lo = if t == SMALL_T_SWITCH { small_t_series(t) } else { closed_form(t) };
            let hi = if t == SMALL_T_SWITCH { closed_form(t) } else { large_t_series(t) };
            assert!((lo / hi - 1.0).abs() < 1e-8, "t={t}: {lo} vs {hi}");
        }
        // the overlap is wide
        for t in [0.5, 3.0, 60.0] {
            assert!((closed_form(t) / large_t_series(t) - 1.0).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn initial_slope() {
        // the true initial slope is 6; at t = 0.001 the t^{3/2} term is already visible
        let t = 1e-5;
        assert!(((1.0 - g_free(nt(t))) / t / 6.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn long_time_asymptote() {
        assert!((g_free_long_asymptote(nt(1.0)).unwrap() - 32.0 / (15.0 * PI.sqrt())).abs() < 1e-15);
        assert!(g_free_long_asymptote(nt(0.0)).is_err());
        let a = g_free_long_asymptote(nt(4.0)).unwrap() / g_free_long_asymptote(nt(1.0)).unwrap();
        assert_eq!(a, 0.125);
        let r = g_free(nt(100.0)) / 1.204e-3;
        assert!((r - 1.0).abs() < 0.2);
        // approach to the power law is slow: ratio ~ 1 − 2/√t̃
        for t in [1e3, 1e4, 1e6] {
            let r = g_free(nt(t)) / g_free_long_asymptote(nt(t)).unwrap();
            assert!((r - (1.0 - 2.077 / t.sqrt())).abs() < 5.0 / t, "t={t} r={r}");
        }
    }

    #[test]
    fn strictly_decreasing_and_positive() {
        let mut prev = f64::INFINITY;
        for i in 0..=2000 {
            let t = 1e-6 * 10f64.powf(i as f64 * 9.0 / 2000.0);
            let v = g_free(nt(t));
            assert!(v > 0.0 && v < prev, "t={t}");
            prev = v;
        }
    }

    #[test]
    fn rejects_negative_time() {
        assert!(NormalizedTime::new(-1.0).is_err());
        assert!(g_free_at(-1.0).is_nan());
    }
}
