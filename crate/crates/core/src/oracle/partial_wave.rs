//! Partial-wave solver for radially symmetric potentials in two dimensions.
//!
//! Outside the support ψ = Σₘ iᵐ [Jₘ(kr) + aₘ Hₘ⁽¹⁾(kr)] e^{imθ}, so with
//! ψ ~ e^{ikx} + e^{ikr} r^{-1/2} f(θ):
//!
//!   f(θ) = √(2/(πk)) e^{-iπ/4} Σₘ aₘ e^{imθ},   a₋ₘ = aₘ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::special::{bessel_j, bessel_j_prime, bessel_y, bessel_y_prime};

/// Tail bound above which a truncation is flagged.
pub const TAIL_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialWaveResult {
    pub k: f64,
    pub radius: f64,
    /// aₘ for m = 0..=m_max.
    #[serde(with = "crate::serde_complex::vec")]
    pub coefficients: Vec<C64>,
    /// Bound on |f| contributed by channels beyond m_max, estimated from the last two.
    pub tail_bound: f64,
    pub flagged: bool,
}

impl PartialWaveResult {
    pub fn m_max(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn prefactor(&self) -> C64 {
        C64::from_polar((2.0 / (PI * self.k)).sqrt(), -PI / 4.0)
    }

    /// f(θ), θ measured from the incidence direction.
    pub fn amplitude(&self, theta: f64) -> C64 {
        let s: C64 = self.coefficients.iter().enumerate().map(|(m, a)| if m == 0 { *a } else { 2.0 * a * (m as f64 * theta).cos() }).sum();
        self.prefactor() * s
    }
}

/// Logarithmic derivative u'(R)/u(R) of the regular solution of
/// u'' + u'/r + (k² - v(r) - m²/r²) u = 0, integrated in t = ln r.
fn log_derivative(v: &dyn Fn(f64) -> C64, k: f64, m: usize, radius: f64, breaks: &[f64]) -> C64 {
    let r0 = 1e-3 * radius;
    let mf = m as f64;
    // u = rᵐ g with g ≈ 1 - q r²/(4(m+1)); the rᵐ factor is dropped (only u'/u matters).
    let q0 = k * k - v(r0);
    let c = q0 / (4.0 * (mf + 1.0));
    let mut u = C64::new(1.0, 0.0) - c * r0 * r0;
    let mut du = mf * u - 2.0 * c * r0 * r0; // du/dt
    let rhs = |t: f64, u: C64| -> C64 {
        let r = t.exp();
        (mf * mf - (k * k - v(r)) * r * r) * u
    };
    let mut cuts = vec![r0.ln()];
    cuts.extend(breaks.iter().filter(|&&b| b > r0 && b < radius).map(|b| b.ln()));
    cuts.push(radius.ln());
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let n = ((hi - lo) / 2e-4).ceil().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        // Evaluate strictly inside the piece so jumps at the ends are not straddled.
        let clamp = |t: f64| t.clamp(lo + 1e-12 * h, hi - 1e-12 * h);
        for s in 0..n {
            let t = lo + s as f64 * h;
            let t1 = if s + 1 == n { hi } else { t + h };
            let tm = 0.5 * (t + t1);
            let (k1u, k1d) = (du, rhs(clamp(t), u));
            let (k2u, k2d) = (du + 0.5 * h * k1d, rhs(tm, u + 0.5 * h * k1u));
            let (k3u, k3d) = (du + 0.5 * h * k2d, rhs(tm, u + 0.5 * h * k2u));
            let (k4u, k4d) = (du + h * k3d, rhs(clamp(t1), u + h * k3u));
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            du += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            // Keep magnitudes tame for large m.
            let s = u.norm();
            if s > 1e100 {
                u /= s;
                du /= s;
            }
        }
    }
    // du/dr = (du/dt)/r
    du / (u * radius)
}

/// aₘ from the interior log-derivative L at the support radius.
fn channel_coefficient(k: f64, m: i32, radius: f64, l: C64) -> C64 {
    let x = k * radius;
    let j = bessel_j(m, x);
    let jp = bessel_j_prime(m, x);
    let h = C64::new(j, bessel_y(m, x));
    let hp = C64::new(jp, bessel_y_prime(m, x));
    -(k * jp - l * j) / (k * hp - l * h)
}

/// Solves the radial equations for channels 0..=m_max of a potential v(r)
/// vanishing for r ≥ `radius`. `breaks` lists radii where v jumps.
pub fn partial_wave_2d(v: &dyn Fn(f64) -> C64, radius: f64, breaks: &[f64], k: f64, m_max: usize) -> Result<PartialWaveResult> {
    if !(k > 0.0) || !(radius > 0.0) {
        return Err(Error::InvalidConfig("partial waves need k > 0 and a positive radius".into()));
    }
    let coefficients: Vec<C64> =
        (0..=m_max).map(|m| channel_coefficient(k, m as i32, radius, log_derivative(v, k, m, radius, breaks))).collect();
    let tail_bound = tail_estimate(&coefficients, k);
    Ok(PartialWaveResult { k, radius, flagged: !(tail_bound < TAIL_THRESHOLD), coefficients, tail_bound })
}

/// Circular well v = -depth for r < radius.
pub fn circular_well_2d(depth: C64, radius: f64, k: f64, m_max: usize) -> Result<PartialWaveResult> {
    partial_wave_2d(&|r| if r < radius { -depth } else { ZERO }, radius, &[], k, m_max)
}

/// Closed form for a real circular well: interior solution Jₘ(κr), κ = √(k² + depth).
pub fn circular_well_2d_exact(depth: f64, radius: f64, k: f64, m_max: usize) -> Result<PartialWaveResult> {
    let kappa2 = k * k + depth;
    if !(kappa2 > 0.0) {
        return Err(Error::InvalidConfig("closed form needs k² + depth > 0".into()));
    }
    let kappa = kappa2.sqrt();
    let coefficients: Vec<C64> = (0..=m_max as i32)
        .map(|m| {
            let z = kappa * radius;
            let l = C64::new(kappa * bessel_j_prime(m, z) / bessel_j(m, z), 0.0);
            channel_coefficient(k, m, radius, l)
        })
        .collect();
    let tail_bound = tail_estimate(&coefficients, k);
    Ok(PartialWaveResult { k, radius, flagged: !(tail_bound < TAIL_THRESHOLD), coefficients, tail_bound })
}

/// Geometric-tail estimate of the omitted |f| contribution: 2·√(2/(πk))·|a_M|·ρ/(1-ρ),
/// ρ = |a_M/a_{M-1}| (clamped; ρ ≥ 1 means no decay and an infinite bound).
fn tail_estimate(a: &[C64], k: f64) -> f64 {
    let n = a.len();
    let scale = 2.0 * (2.0 / (PI * k)).sqrt();
    match n {
        0 => 0.0,
        1 => scale * a[0].norm(),
        _ => {
            let (last, prev) = (a[n - 1].norm(), a[n - 2].norm());
            if last == 0.0 {
                return 0.0;
            }
            let rho = if prev > 0.0 { last / prev } else { 1.0 };
            if rho >= 1.0 {
                f64::INFINITY
            } else {
                scale * last * rho / (1.0 - rho)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::born_amplitude;
    use crate::potential::PotentialModel;

    #[test]
    fn zero_potential_has_vanishing_coefficients() {
        let r = partial_wave_2d(&|_| ZERO, 1.0, &[], 1.0, 6).unwrap();
        for a in &r.coefficients {
            assert!(a.norm() < 1e-10, "{a}");
        }
        assert!(r.amplitude(0.3).norm() < 1e-9);
    }

    #[test]
    fn numerical_well_matches_closed_form() {
        let num = circular_well_2d(C64::new(0.5, 0.0), 1.0, 1.0, 12).unwrap();
        let exact = circular_well_2d_exact(0.5, 1.0, 1.0, 12).unwrap();
        for (m, (a, b)) in num.coefficients.iter().zip(&exact.coefficients).enumerate() {
            assert!((a - b).norm() <= 1e-9 * b.norm().max(1e-30) + 1e-15, "m={m}: {a} vs {b}");
        }
        assert!(!num.flagged, "tail {}", num.tail_bound);
    }

    #[test]
    fn real_well_is_unitary_per_channel() {
        // |1 + 2aₘ| = 1 for real potentials.
        let r = circular_well_2d(C64::new(0.5, 0.0), 1.0, 1.0, 8).unwrap();
        for a in &r.coefficients {
            assert!(((1.0 + 2.0 * a).norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn coefficients_decay_beyond_kr() {
        let r = circular_well_2d(C64::new(0.5, 0.2), 1.0, 1.0, 12).unwrap();
        for w in r.coefficients.windows(2).skip(2) {
            assert!(w[1].norm() < w[0].norm());
        }
    }

    #[test]
    fn weak_well_approaches_born() {
        let depth = C64::new(1e-4, 0.0);
        let pw = circular_well_2d(depth, 1.0, 1.0, 14).unwrap();
        let v = PotentialModel::CircularWell { depth, radius: 1.0, center_x: 0.0 };
        for th in [0.0f64, 0.7, 1.9, 3.0] {
            let born = born_amplitude(&v, 1.0, &[1.0, 0.0], &[th.cos(), th.sin()]).unwrap();
            let ratio = pw.amplitude(th) / born;
            assert!((ratio - 1.0).norm() < 1e-3, "θ={th}: ratio {ratio}");
        }
    }

    #[test]
    fn truncation_is_flagged() {
        let r = circular_well_2d(C64::new(0.5, 0.0), 1.0, 1.0, 1).unwrap();
        assert!(r.flagged);
    }
}
