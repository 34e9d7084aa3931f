//! Integer-order Bessel functions of real argument.
//!
//! Power series for `x <= 12`; beyond that, `J_n` comes from the periodic
//! trapezoid rule on Bessel's integral (exponentially convergent) and `Y_0`,
//! `Y_1` from the Hankel asymptotic expansion, followed by upward recurrence.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 12.0;

pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        let v = bessel_j(-n, x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x <= SERIES_LIMIT {
        j_series(n as u32, x)
    } else {
        j_trapezoid(n as u32, x)
    }
}

/// `Y_n(x)` for `x > 0`.
pub fn bessel_y(n: i32, x: f64) -> f64 {
    assert!(x > 0.0, "Y_n needs a positive argument");
    if n < 0 {
        let v = bessel_y(-n, x);
        return if n % 2 == 0 { v } else { -v };
    }
    let (y0, y1) = if x <= SERIES_LIMIT { (y_series(0, x), y_series(1, x)) } else { hankel_asymptotic(x) };
    if n == 0 {
        return y0;
    }
    let (mut prev, mut cur) = (y0, y1);
    for m in 1..n {
        let next = 2.0 * m as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `J_n'(x) = (J_{n-1} - J_{n+1}) / 2`.
pub fn bessel_j_prime(n: i32, x: f64) -> f64 {
    0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
}

pub fn bessel_y_prime(n: i32, x: f64) -> f64 {
    0.5 * (bessel_y(n - 1, x) - bessel_y(n + 1, x))
}

fn j_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for m in 1..=n {
        term *= half / m as f64;
    }
    let q = half * half;
    let mut sum = term;
    for k in 1..200 {
        term *= -q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    sum
}

fn j_trapezoid(n: u32, x: f64) -> f64 {
    // J_n(x) = (1/2π) ∫_0^{2π} cos(nτ - x sin τ) dτ over a full period.
    let points = 2 * (n as usize + x.ceil() as usize) + 64;
    let h = 2.0 * PI / points as f64;
    let sum: f64 = (0..points)
        .map(|j| {
            let t = j as f64 * h;
            (n as f64 * t - x * t.sin()).cos()
        })
        .sum();
    sum / points as f64
}

fn y_series(n: u32, x: f64) -> f64 {
    debug_assert!(n <= 1);
    let half = 0.5 * x;
    let log_term = 2.0 / PI * half.ln() * j_series(n, x);
    // digamma(m + 1) = -γ + H_m
    let digamma = |m: u32| -> f64 { -EULER_GAMMA + (1..=m).map(|j| 1.0 / j as f64).sum::<f64>() };
    let mut finite = 0.0;
    if n == 1 {
        finite = -1.0 / PI / half;
    }
    let q = half * half;
    let mut power = if n == 1 { half } else { 1.0 };
    let mut fact = 1.0; // k! (k + n)!
    let mut sum = 0.0;
    for k in 0..200u32 {
        if k > 0 {
            power *= -q;
            fact *= k as f64 * (k + n) as f64;
        }
        let term = (digamma(k) + digamma(k + n)) * power / fact;
        sum += term;
        if k > 2 && term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    finite + log_term - sum / PI
}

/// (Y_0, Y_1) from the large-argument expansion with optimal truncation.
fn hankel_asymptotic(x: f64) -> (f64, f64) {
    let pq = |nu: f64| -> (f64, f64) {
        let mu = 4.0 * nu * nu;
        let (mut p, mut q) = (1.0, 0.0);
        let mut term = 1.0;
        let mut last = f64::INFINITY;
        for k in 1..60 {
            let kf = k as f64;
            term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
            if term.abs() >= last {
                break;
            }
            last = term.abs();
            // Odd k feed Q, even k feed P, alternating sign in pairs.
            match k % 4 {
                1 => q += term,
                2 => p -= term,
                3 => q -= term,
                _ => p += term,
            }
        }
        (p, q)
    };
    let amp = (2.0 / (PI * x)).sqrt();
    let (p0, q0) = pq(0.0);
    let (p1, q1) = pq(1.0);
    let c0 = x - 0.25 * PI;
    let c1 = x - 0.75 * PI;
    let y0 = amp * (p0 * c0.sin() + q0 * c0.cos());
    let y1 = amp * (p1 * c1.sin() + q1 * c1.cos());
    (y0, y1)
}
