//! Bracketed root scanning with pole splitting and Brent refinement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootScanSpec {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
    /// Relative refinement tolerance on the abscissa.
    pub rel_tol: f64,
    pub max_roots: usize,
    /// Known pole locations; the scan never brackets across one of these.
    pub poles: Vec<f64>,
    /// Fewer roots than this is a scan-resolution error.
    pub expect_at_least: Option<usize>,
}

impl RootScanSpec {
    pub fn new(lower: f64, upper: f64, step: f64) -> Self {
        RootScanSpec { lower, upper, step, rel_tol: 1e-12, max_roots: usize::MAX, poles: Vec::new(), expect_at_least: None }
    }

    pub fn with_poles(mut self, poles: Vec<f64>) -> Self {
        self.poles = poles;
        self
    }

    pub fn with_max_roots(mut self, n: usize) -> Self {
        self.max_roots = n;
        self
    }

    pub fn expecting(mut self, n: usize) -> Self {
        self.expect_at_least = Some(n);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower >= 0.0 && self.lower.is_finite() && self.upper.is_finite() && self.upper > self.lower) {
            return Err(Error::InvalidParameter { name: "interval", reason: format!("need 0 <= lower < upper, got [{}, {}]", self.lower, self.upper) });
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter { name: "step", reason: "must be positive".into() });
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParameter { name: "rel_tol", reason: "must lie in (0, 1)".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootScan {
    pub roots: Vec<f64>,
    /// Set when the scan stopped at `max_roots`.
    pub truncated: bool,
}

pub fn scan_roots<F: Fn(f64) -> f64>(f: F, spec: &RootScanSpec) -> Result<RootScan> {
    spec.validate()?;
    let mut poles: Vec<f64> = spec.poles.iter().copied().filter(|p| *p > spec.lower && *p < spec.upper).collect();
    poles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut segments = Vec::with_capacity(poles.len() + 1);
    let mut a = spec.lower;
    for &p in &poles {
        let gap = 1e-12 * p.abs().max(1.0);
        segments.push((a, p - gap));
        a = p + gap;
    }
    segments.push((a, spec.upper));

    let mut roots: Vec<f64> = Vec::new();
    let mut truncated = false;
    'outer: for (a, b) in segments {
        if b <= a {
            continue;
        }
        let n = ((b - a) / spec.step).ceil().max(1.0) as usize;
        let mut x0 = a;
        let mut f0 = f(x0);
        for k in 1..=n {
            let x1 = if k == n { b } else { a + (b - a) * k as f64 / n as f64 };
            let f1 = f(x1);
            let found = if f0 == 0.0 {
                Some(x0)
            } else if f0 * f1 < 0.0 {
                let r = brent(&f, x0, x1, f0, f1, spec.rel_tol);
                // A sign change through a pole leaves a large residual.
                if f(r).abs() <= 1e-6 * f0.abs().max(f1.abs()) {
                    Some(r)
                } else {
                    None
                }
            } else if k == n && f1 == 0.0 {
                Some(x1)
            } else {
                None
            };
            if let Some(r) = found {
                let dup = roots.last().is_some_and(|&last| (r - last).abs() <= spec.rel_tol * r.abs().max(1.0));
                if !dup {
                    if roots.len() == spec.max_roots {
                        truncated = true;
                        break 'outer;
                    }
                    roots.push(r);
                }
            }
            x0 = x1;
            f0 = f1;
        }
    }
    if let Some(n) = spec.expect_at_least {
        if roots.len() < n {
            return Err(Error::ScanResolution(format!("found {} roots on [{}, {}], expected at least {n}", roots.len(), spec.lower, spec.upper)));
        }
    }
    Ok(RootScan { roots, truncated })
}

/// Brent's method on a bracket with f(a)·f(b) < 0.
pub fn brent<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fb: f64, rel_tol: f64) -> f64 {
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb == 0.0 {
            return b;
        }
        if fa.signum() == fb.signum() {
            a = c;
            fa = fc;
            d = b - c;
            e = d;
        }
        if fa.abs() < fb.abs() {
            c = b;
            b = a;
            a = c;
            fc = fb;
            fb = fa;
            fa = fc;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * rel_tol * b.abs() + 1e-300;
        let m = 0.5 * (a - b);
        if m.abs() <= tol {
            return b;
        }
        if e.abs() >= tol && fc.abs() > fb.abs() {
            let s = fb / fc;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fc / fa;
                let r = fb / fa;
                p = s * (2.0 * m * qq * (qq - r) - (b - c) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        c = b;
        fc = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_zeros() {
        let s = scan_roots(f64::cos, &RootScanSpec::new(0.0, 10.0, 0.1)).unwrap();
        let want = [PI / 2.0, 1.5 * PI, 2.5 * PI];
        assert_eq!(s.roots.len(), 3);
        for (r, w) in s.roots.iter().zip(want) {
            assert!((r - w).abs() < 1e-12);
        }
        assert!(!s.truncated);
    }

    #[test]
    fn sqrt_two() {
        let s = scan_roots(|x| x * x - 2.0, &RootScanSpec::new(0.0, 2.0, 0.3)).unwrap();
        assert_eq!(s.roots.len(), 1);
        assert!((s.roots[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn poles_are_not_roots() {
        // tan has sign changes at its poles; they must not be reported.
        let poles: Vec<f64> = (0..4).map(|k| (k as f64 + 0.5) * PI).collect();
        let s = scan_roots(f64::tan, &RootScanSpec::new(0.5, 12.0, 0.05).with_poles(poles)).unwrap();
        let want = [PI, 2.0 * PI, 3.0 * PI];
        assert_eq!(s.roots.len(), 3, "{:?}", s.roots);
        for (r, w) in s.roots.iter().zip(want) {
            assert!((r - w).abs() < 1e-11);
        }
        // Without poles supplied the residual check still rejects them.
        let s = scan_roots(f64::tan, &RootScanSpec::new(0.5, 12.0, 0.05)).unwrap();
        assert_eq!(s.roots.len(), 3, "{:?}", s.roots);
    }

    #[test]
    fn tan_family_against_dense_oracle() {
        // x tan x = h: one root per branch (k pi, k pi + pi/2).
        let h = 0.7;
        let f = |x: f64| x.tan() - h / x;
        let poles: Vec<f64> = (0..6).map(|k| (k as f64 + 0.5) * PI).collect();
        let s = scan_roots(f, &RootScanSpec::new(1e-6, 5.0 * PI, 0.1).with_poles(poles)).unwrap();
        assert_eq!(s.roots.len(), 5);
        for (k, r) in s.roots.iter().enumerate() {
            let lo = k as f64 * PI + 1e-9;
            let hi = k as f64 * PI + PI / 2.0 - 1e-9;
            // dense grid: locate the sign change to 1e-4 of the branch width
            let n = 10_000;
            let mut prev = f(lo);
            let mut oracle = f64::NAN;
            for i in 1..=n {
                let x = lo + (hi - lo) * i as f64 / n as f64;
                let v = f(x);
                if prev * v <= 0.0 {
                    oracle = x;
                    break;
                }
                prev = v;
            }
            assert!((r - oracle).abs() < (hi - lo) / n as f64 * 1.01, "branch {k}: {r} vs {oracle}");
        }
    }

    #[test]
    fn truncation_and_expectation() {
        let s = scan_roots(f64::sin, &RootScanSpec::new(0.1, 40.0, 0.1).with_max_roots(3)).unwrap();
        assert_eq!(s.roots.len(), 3);
        assert!(s.truncated);
        let e = scan_roots(|x| x * x + 1.0, &RootScanSpec::new(0.0, 3.0, 0.1).expecting(1));
        assert!(matches!(e, Err(Error::ScanResolution(_))));
    }

    #[test]
    fn invalid_specs() {
        assert!(scan_roots(f64::sin, &RootScanSpec::new(-1.0, 3.0, 0.1)).is_err());
        assert!(scan_roots(f64::sin, &RootScanSpec::new(0.0, 3.0, 0.0)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sorted_dedup_small_residual(w in 0.3f64..6.0, phase in 0.0f64..3.0, step in 0.01f64..0.2) {
                let f = |x: f64| (w * x + phase).sin();
                let s = scan_roots(f, &RootScanSpec::new(0.0, 20.0, step)).unwrap();
                for pair in s.roots.windows(2) {
                    prop_assert!(pair[1] > pair[0]);
                }
                for &r in &s.roots {
                    prop_assert!(f(r).abs() < 1e-10 * w.max(1.0) * r.max(1.0));
                }
            }
        }
    }
}
