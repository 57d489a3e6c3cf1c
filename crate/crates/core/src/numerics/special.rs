//! Scaled Bessel functions and the scaled complementary error function.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// I0(x)·e^(−x) for x ≥ 0. Never overflows.
pub fn bessel_i0e(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("bessel_i0e needs finite x >= 0, got {x}")));
    }
    Ok(i0e(x))
}

/// Unchecked I0e for hot loops; `x` must be finite and non-negative.
#[inline]
pub fn i0e(x: f64) -> f64 {
    if x <= 20.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // Hankel expansion: I0(x) e^-x ~ (2 pi x)^(-1/2) sum c_k x^-k, c_k = c_{k-1} (2k-1)^2 / (8k)
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
            if next.abs() < 1e-17 * sum || next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// J_n(x) and its derivative for n ∈ {0, 1}, x ≥ 0.
pub fn bessel_j(order: u32, x: f64) -> Result<(f64, f64)> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j needs finite x >= 0, got {x}")));
    }
    let (j0, j1) = j01(x);
    match order {
        0 => Ok((j0, -j1)),
        1 => Ok((j1, if x == 0.0 { 0.5 } else { j0 - j1 / x })),
        n => Err(Error::Domain(format!("bessel_j supports orders 0 and 1, got {n}"))),
    }
}

#[inline]
pub fn j0(x: f64) -> f64 {
    j01(x).0
}

#[inline]
pub fn j1(x: f64) -> f64 {
    j01(x).1
}

/// (J0(x), J1(x)) for x ≥ 0.
pub fn j01(x: f64) -> (f64, f64) {
    if x < 1e-3 {
        let q = 0.25 * x * x;
        let j0 = 1.0 - q + 0.25 * q * q;
        let j1 = 0.5 * x * (1.0 - 0.5 * q + q * q / 12.0);
        return (j0, j1);
    }
    if x < 25.0 {
        return miller(x);
    }
    hankel(x)
}

// Backward recurrence normalised by J0 + 2 sum J_2k = 1.
fn miller(x: f64) -> (f64, f64) {
    let mut m = (1.4 * x + 40.0) as usize;
    m += m % 2;
    let mut jp = 0.0; // J_{k+1}
    let mut jk = 1e-30; // J_k
    let mut norm = 0.0;
    let mut j0 = 0.0;
    let mut j1 = 0.0;
    let tx = 2.0 / x;
    for k in (1..=m).rev() {
        let jm = k as f64 * tx * jk - jp;
        jp = jk;
        jk = jm;
        // jk now holds J_{k-1}
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * jk;
        }
        if k - 1 == 1 {
            j1 = jk;
        }
        if k - 1 == 0 {
            j0 = jk;
        }
        if jk.abs() > 1e250 {
            jk *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

fn hankel(x: f64) -> (f64, f64) {
    let amp = (2.0 / (PI * x)).sqrt();
    let mut out = [0.0; 2];
    for (n, slot) in out.iter_mut().enumerate() {
        let mu = 4.0 * (n * n) as f64;
        let z = 8.0 * x;
        // P = sum (-1)^k a_{2k}/z^{2k}, Q = sum (-1)^k a_{2k+1}/z^{2k+1}, a_j = prod (mu - (2i-1)^2)/j!
        let mut p = 1.0;
        let mut q = 0.0;
        let mut term = 1.0;
        let mut prev = f64::INFINITY;
        for j in 1..60 {
            let jf = j as f64;
            term *= (mu - (2.0 * jf - 1.0).powi(2)) / (jf * z);
            if term.abs() > prev || term.abs() < 1e-18 {
                if term.abs() < 1e-18 {
                    add_term(j, term, &mut p, &mut q);
                }
                break;
            }
            prev = term.abs();
            add_term(j, term, &mut p, &mut q);
        }
        let chi = x - (0.5 * n as f64 + 0.25) * PI;
        *slot = amp * (p * chi.cos() - q * chi.sin());
    }
    (out[0], out[1])
}

fn add_term(j: usize, term: f64, p: &mut f64, q: &mut f64) {
    let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
    if j % 2 == 0 {
        *p += sign * term;
    } else {
        *q += sign * term;
    }
}

/// Scaled complementary error function e^(x²)·erfc(x).
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 26.0 {
        return libm::erfc(x) * (x * x).exp();
    }
    // Asymptotic series: (1/(x sqrt(pi))) sum (-1)^n (2n-1)!! / (2x^2)^n
    let t = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..30 {
        term *= -(2.0 * n as f64 - 1.0) * t;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    sum / (x * PI.sqrt())
}
