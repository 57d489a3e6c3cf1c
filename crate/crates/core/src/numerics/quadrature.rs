//! Gauss–Legendre rules, composite panel grids and tensor-product integration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[m - 1] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule on one axis: concatenated nodes/weights of mapped panels.
#[derive(Debug, Clone, Default)]
pub struct AxisGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisGrid {
    /// Panels between consecutive breakpoints, each carrying `rule`.
    pub fn from_breaks(breaks: &[f64], rule: &GaussLegendre) -> Self {
        let mut g = AxisGrid::default();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let h = 0.5 * (b - a);
            let c = 0.5 * (a + b);
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                g.nodes.push(c + h * x);
                g.weights.push(h * wt);
            }
        }
        g
    }

    pub fn uniform(a: f64, b: f64, panels: usize, rule: &GaussLegendre) -> Self {
        let panels = panels.max(1);
        let breaks: Vec<f64> =
            (0..=panels).map(|k| a + (b - a) * k as f64 / panels as f64).collect();
        Self::from_breaks(&breaks, rule)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }
}

/// Breakpoints on [a, b] whose panel width grows geometrically away from `a`:
/// width(x) = min(cap, max(h0, growth·(x − a + offset))).
pub fn graded_breaks(a: f64, b: f64, h0: f64, growth: f64, offset: f64, cap: f64) -> Vec<f64> {
    let mut breaks = vec![a];
    let mut x = a;
    while x < b {
        let w = (growth * (x - a + offset)).max(h0).min(cap);
        let next = x + w;
        if next >= b - 0.25 * w {
            breaks.push(b);
            break;
        }
        breaks.push(next);
        x = next;
    }
    if *breaks.last().unwrap() < b {
        breaks.push(b);
    }
    breaks
}

/// Summation by recursive halving; order depends only on the slice length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Per-axis tensor-product settings. Axes beyond the integrand dimension are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub nodes: [usize; 4],
    pub panels: [usize; 4],
    pub rel_tol: f64,
    pub abs_floor: f64,
    /// Number of panel doublings attempted after the first estimate.
    pub max_refinements: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nodes: [8; 4], panels: [4; 4], rel_tol: 1e-6, abs_floor: 1e-14, max_refinements: 5 }
    }
}

impl QuadratureSpec {
    pub fn uniform(nodes: usize, panels: usize) -> Self {
        QuadratureSpec { nodes: [nodes; 4], panels: [panels; 4], ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.iter().any(|&n| n < 2) {
            return Err(Error::InvalidParameter { name: "nodes", reason: "node counts must be >= 2".into() });
        }
        if self.panels.iter().any(|&p| p < 1) {
            return Err(Error::InvalidParameter { name: "panels", reason: "panel counts must be >= 1".into() });
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParameter { name: "rel_tol", reason: "must lie in (0, 1)".into() });
        }
        if !(self.abs_floor >= 0.0 && self.abs_floor.is_finite()) {
            return Err(Error::InvalidParameter { name: "abs_floor", reason: "must be finite and >= 0".into() });
        }
        Ok(())
    }

    pub fn accepts(&self, value: f64, error: f64) -> bool {
        error <= (self.rel_tol * value.abs()).max(self.abs_floor)
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Tensor-product Gauss–Legendre integral over a box of dimension 1 to 4.
///
/// Each level compares the `n`-node and `2n`-node rules on the same panels; the panel
/// count is doubled until the difference meets the tolerance.
pub fn integrate_nd<F>(f: F, bounds: &[(f64, f64)], spec: &QuadratureSpec) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    spec.validate()?;
    let k = bounds.len();
    if k == 0 || k > 4 {
        return Err(Error::Domain(format!("integrate_nd supports 1 to 4 dimensions, got {k}")));
    }
    for &(a, b) in bounds {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain("integration bounds must be finite".into()));
        }
    }
    let mut best = Estimate { value: f64::NAN, error: f64::INFINITY };
    for level in 0..=spec.max_refinements {
        let mult = 1usize << level;
        let coarse = tensor_sum(&f, bounds, spec, mult, 1);
        let fine = tensor_sum(&f, bounds, spec, mult, 2);
        let est = Estimate { value: fine, error: (fine - coarse).abs() };
        if !est.value.is_finite() {
            return Err(Error::Accuracy { value: est.value, error: est.error });
        }
        if est.error <= best.error {
            best = est;
        }
        if spec.accepts(est.value, est.error) {
            return Ok(est);
        }
    }
    Err(Error::Accuracy { value: best.value, error: best.error })
}

fn tensor_sum<F>(f: &F, bounds: &[(f64, f64)], spec: &QuadratureSpec, panel_mult: usize, node_mult: usize) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let grids: Vec<AxisGrid> = bounds
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let rule = GaussLegendre::new(spec.nodes[i] * node_mult);
            AxisGrid::uniform(a, b, spec.panels[i] * panel_mult, &rule)
        })
        .collect();
    let k = grids.len();
    let first = &grids[0];
    let partial: Vec<f64> = (0..first.len())
        .into_par_iter()
        .map(|i0| {
            let mut x = [0.0; 4];
            x[0] = first.nodes[i0];
            let mut acc = Vec::new();
            inner(f, &grids, 1, k, &mut x, 1.0, &mut acc);
            first.weights[i0] * pairwise_sum(&acc)
        })
        .collect();
    pairwise_sum(&partial)
}

fn inner<F>(f: &F, grids: &[AxisGrid], axis: usize, k: usize, x: &mut [f64; 4], w: f64, acc: &mut Vec<f64>)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if axis == k {
        acc.push(w * f(&x[..k]));
        return;
    }
    let g = &grids[axis];
    for j in 0..g.len() {
        x[axis] = g.nodes[j];
        inner(f, grids, axis + 1, k, x, w * g.weights[j], acc);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for n in 1..20 {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            // x^(2n-2) is integrated exactly: 2/(2n-1)
            let p = 2 * n - 2;
            let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(p as i32)).sum();
            assert!((q - 2.0 / (p as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn nodes_sorted_and_symmetric() {
        let r = GaussLegendre::new(12);
        for w in r.nodes.windows(2) {
            assert!(w[0] < w[1]);
        }
        for i in 0..12 {
            assert!((r.nodes[i] + r.nodes[11 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn x_squared() {
        let e = integrate_nd(|x| x[0] * x[0], &[(0.0, 1.0)], &QuadratureSpec::default()).unwrap();
        assert!((e.value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unit_hypercube() {
        let e = integrate_nd(|_| 1.0, &[(0.0, 1.0); 4], &QuadratureSpec::uniform(2, 1)).unwrap();
        assert!((e.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sine_integral() {
        let e = integrate_nd(|x| x[0].sin(), &[(0.0, std::f64::consts::PI)], &QuadratureSpec::default()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(integrate_nd(|_| 1.0, &[], &QuadratureSpec::default()).is_err());
        assert!(integrate_nd(|_| 1.0, &[(0.0, 1.0); 5], &QuadratureSpec::default()).is_err());
        assert!(integrate_nd(|_| 1.0, &[(0.0, f64::INFINITY)], &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn flags_non_convergence_with_best_value() {
        let spec = QuadratureSpec { nodes: [2; 4], panels: [1; 4], max_refinements: 0, rel_tol: 1e-12, ..Default::default() };
        match integrate_nd(|x| (40.0 * x[0]).sin(), &[(0.0, 3.0)], &spec) {
            Err(Error::Accuracy { value, error }) => assert!(value.is_finite() && error > 0.0),
            other => panic!("expected accuracy error, got {other:?}"),
        }
    }

    #[test]
    fn graded_breaks_cover_interval() {
        let b = graded_breaks(0.0, 50.0, 0.25, 0.2, 1.0, 2.0);
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 50.0);
        for w in b.windows(2) {
            assert!(w[1] > w[0] && w[1] - w[0] <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn poly(c: &[f64], x: f64) -> f64 {
            c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
        }

        proptest! {
            #[test]
            fn linearity(
                a in -5.0f64..5.0, b in -5.0f64..5.0,
                p in proptest::collection::vec(-3.0f64..3.0, 1..6),
                q in proptest::collection::vec(-3.0f64..3.0, 1..6),
            ) {
                let spec = QuadratureSpec::uniform(6, 2);
                let dom = [(0.0, 1.5), (-1.0, 0.5)];
                let fp = |x: &[f64]| poly(&p, x[0]) * poly(&q, x[1]);
                let fq = |x: &[f64]| poly(&q, x[0]) + poly(&p, x[1]);
                let ip = integrate_nd(fp, &dom, &spec).unwrap().value;
                let iq = integrate_nd(fq, &dom, &spec).unwrap().value;
                let both = integrate_nd(|x: &[f64]| a * fp(x) + b * fq(x), &dom, &spec).unwrap().value;
                let scale = 1.0 + (a * ip).abs() + (b * iq).abs();
                prop_assert!((both - (a * ip + b * iq)).abs() <= 1e-10 * scale);
            }
        }
    }
}
