//! Bessel functions `J0, J1, Y0, Y1` and Hankel functions of the first kind of
//! orders 0 and 1 for real positive arguments.
//!
//! Three regimes, each accurate to ~1e-14 absolute:
//! * `x <= 8`: ascending power series;
//! * `8 < x < 25`: Miller's backward recurrence for `J_n`, with `Y0`, `Y1`
//!   obtained from Neumann's expansion in even-order `J_n`;
//! * `x >= 25`: Hankel's asymptotic amplitude/phase expansion.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// `[J0, J1, Y0, Y1]` at `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bessel {
    j0: f64,
    j1: f64,
    y0: f64,
    y1: f64,
}

fn check_positive(function: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { function, value: x })
    }
}

fn check_non_negative(function: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { function, value: x })
    }
}

pub fn bessel_j0(x: f64) -> Result<f64> {
    check_non_negative("bessel_j0", x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok(evaluate(x).j0)
}

pub fn bessel_j1(x: f64) -> Result<f64> {
    check_non_negative("bessel_j1", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(evaluate(x).j1)
}

pub fn bessel_y0(x: f64) -> Result<f64> {
    check_positive("bessel_y0", x)?;
    Ok(evaluate(x).y0)
}

pub fn bessel_y1(x: f64) -> Result<f64> {
    check_positive("bessel_y1", x)?;
    Ok(evaluate(x).y1)
}

/// `H_order^(1)(x) = J_order(x) + i Y_order(x)` for `order` 0 or 1.
pub fn hankel1(order: u32, x: f64) -> Result<Complex64> {
    check_positive("hankel1", x)?;
    let b = evaluate(x);
    match order {
        0 => Ok(Complex64::new(b.j0, b.y0)),
        1 => Ok(Complex64::new(b.j1, b.y1)),
        _ => Err(Error::Domain { function: "hankel1 (order)", value: order as f64 }),
    }
}

fn evaluate(x: f64) -> Bessel {
    if x <= SERIES_LIMIT {
        power_series(x)
    } else if x < ASYMPTOTIC_LIMIT {
        miller(x)
    } else {
        asymptotic(x)
    }
}

fn power_series(x: f64) -> Bessel {
    let z = -0.25 * x * x;
    // term_k = z^k / (k!)^2 for J0, z^k / (k!(k+1)!) for J1.
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut harmonic = 0.0;
    let (mut s_j0, mut s_j1) = (1.0, 1.0);
    let mut s_y0 = 0.0;
    // psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
    let mut s_y1 = 1.0 - 2.0 * EULER_GAMMA;
    for k in 1..80 {
        let kf = k as f64;
        t0 *= z / (kf * kf);
        t1 *= z / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        s_j0 += t0;
        s_j1 += t1;
        s_y0 += harmonic * t0;
        s_y1 += (2.0 * harmonic + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA) * t1;
        if t0.abs() < 1e-18 && t1.abs() < 1e-18 {
            break;
        }
    }
    let half = 0.5 * x;
    let j0 = s_j0;
    let j1 = half * s_j1;
    let log_term = (half.ln() + EULER_GAMMA) * 2.0 / PI;
    let y0 = log_term * j0 - 2.0 / PI * s_y0;
    let y1 = -2.0 / (PI * x) + 2.0 / PI * half.ln() * j1 - half / PI * s_y1;
    Bessel { j0, j1, y0, y1 }
}

fn miller(x: f64) -> Bessel {
    // Start well above x so that J_start is negligible at double precision.
    let mut start = (x + 20.0 + 12.0 * x.cbrt()) as usize;
    start += start % 2;
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-30;
    for n in (1..=start).rev() {
        j[n - 1] = 2.0 * n as f64 / x * j[n] - j[n + 1];
        if j[n - 1].abs() > 1e250 {
            j.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    j.iter_mut().for_each(|v| *v /= norm);

    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut even_sum = 0.0;
    let mut odd_sum = 0.0;
    let mut sign = -1.0;
    for k in 1..=start / 2 {
        let kf = k as f64;
        even_sum += sign * j[2 * k] / kf;
        odd_sum += sign * (j[2 * k - 1] - j[2 * k + 1]) / kf;
        sign = -sign;
    }
    let y0 = 2.0 / PI * log_term * j[0] - 4.0 / PI * even_sum;
    let y1 = -2.0 / (PI * x) * j[0] + 2.0 / PI * log_term * j[1] + 2.0 / PI * odd_sum;
    Bessel { j0: j[0], j1: j[1], y0, y1 }
}

/// Hankel's expansion: returns `(P, Q)` for order `nu`.
fn amplitude_phase(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let (mut p, mut q) = (1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= last || term.abs() < 1e-18 {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    (p, q)
}

fn asymptotic(x: f64) -> Bessel {
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = x.sin_cos();
    // chi0 = x - pi/4, chi1 = x - 3 pi/4
    let (cos0, sin0) = ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2);
    let (cos1, sin1) = ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2);
    let (p0, q0) = amplitude_phase(0.0, x);
    let (p1, q1) = amplitude_phase(1.0, x);
    Bessel {
        j0: amp * (p0 * cos0 - q0 * sin0),
        y0: amp * (p0 * sin0 + q0 * cos0),
        j1: amp * (p1 * cos1 - q1 * sin1),
        y1: amp * (p1 * sin1 + q1 * cos1),
    }
}
