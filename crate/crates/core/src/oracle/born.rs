//! First Born approximation from the full (d+1)-dimensional Fourier transform.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{C64, I, ZERO};
use crate::potential::{PotentialModel, Profile, Transverse};
use crate::special::bessel_j;

/// ∫₀ᴸ uⁿ e^{-iqu} du for n ∈ {0, 1}.
fn ramp_moments(q: f64, l: f64) -> (C64, C64) {
    let z = q * l;
    if z.abs() < 1e-2 {
        // Series in (-iqL): Σ (-iqL)ʲ / (j! (j+n+1)) · L^{n+1}
        let (mut e0, mut e1) = (ZERO, ZERO);
        let mut term = C64::new(1.0, 0.0);
        for j in 0..10 {
            e0 += term / (j as f64 + 1.0);
            e1 += term / (j as f64 + 2.0);
            term *= -I * z / (j as f64 + 1.0);
        }
        (e0 * l, e1 * l * l)
    } else {
        let e = (-I * z).exp();
        let e0 = (ONE_C - e) / (I * q);
        // ∫ u e^{-iqu} = [i u e^{-iqu}/q] + [e^{-iqu}/q²]
        let e1 = I * l * e / q + (e - ONE_C) / (q * q);
        (e0, e1)
    }
}

const ONE_C: C64 = C64::new(1.0, 0.0);

/// ∫ₐᵇ (f_a + (f_b - f_a)(x-a)/(b-a)) e^{-iqx} dx.
fn linear_piece(q: f64, a: f64, b: f64, fa: C64, fb: C64) -> C64 {
    let l = b - a;
    if !(l > 0.0) {
        return ZERO;
    }
    let (e0, e1) = ramp_moments(q, l);
    C64::from_polar(1.0, -q * a) * (fa * e0 + (fb - fa) / l * e1)
}

/// ∫ dx e^{-iqx} u(x).
pub fn profile_fourier(profile: &Profile, q: f64) -> C64 {
    match profile {
        Profile::Slab { left, right, value } => linear_piece(q, *left, *right, *value, *value),
        Profile::Piecewise { segments } => segments.iter().map(|s| linear_piece(q, s.left, s.right, s.value, s.value)).sum(),
        Profile::Gaussian { amplitude, center, width } => {
            amplitude * (width * PI.sqrt() * (-width * width * q * q / 4.0).exp()) * C64::from_polar(1.0, -q * center)
        }
        Profile::Sech2 { amplitude, center, width } => {
            let z = PI * q * width / 2.0;
            let shape = if z.abs() < 1e-8 { 2.0 * width } else { 2.0 * width * z / z.sinh() };
            amplitude * shape * C64::from_polar(1.0, -q * center)
        }
        Profile::Triangle { amplitude, left, peak, right } => {
            linear_piece(q, *left, *peak, ZERO, *amplitude) + linear_piece(q, *peak, *right, *amplitude, ZERO)
        }
        Profile::Sum { terms } => terms.iter().map(|t| profile_fourier(t, q)).sum(),
    }
}

/// ∫ dᴰr e^{-iq·r} over the ball of radius R, D = 1, 2, 3.
fn ball_fourier(dim: usize, q: f64, radius: f64) -> f64 {
    let z = q * radius;
    match dim {
        1 => {
            if z.abs() < 1e-8 {
                2.0 * radius
            } else {
                2.0 * z.sin() / q
            }
        }
        2 => {
            if z.abs() < 1e-8 {
                PI * radius * radius
            } else {
                2.0 * PI * radius * bessel_j(1, z) / q
            }
        }
        _ => {
            if z.abs() < 1e-2 {
                let z2 = z * z;
                4.0 * PI * radius.powi(3) * (1.0 / 3.0 - z2 / 30.0 + z2 * z2 / 840.0)
            } else {
                4.0 * PI * (z.sin() - z * z.cos()) / q.powi(3)
            }
        }
    }
}

/// Full Fourier transform ∫ d^{d+1}r e^{-iq·r} v(r), with q = (q_x, q⊥) and d = q⊥.len().
pub fn full_fourier(v: &PotentialModel, q: &[f64]) -> Result<C64> {
    let (qx, qt) = q.split_first().ok_or_else(|| Error::InvalidConfig("empty momentum transfer".into()))?;
    Ok(match v {
        PotentialModel::Zero => ZERO,
        PotentialModel::XOnly { profile } => {
            if !qt.is_empty() {
                return Err(Error::InvalidConfig("an x-only potential has no regular transform for d > 0".into()));
            }
            profile_fourier(profile, *qx)
        }
        PotentialModel::SeparableProduct { profile, transverse } => {
            if matches!(transverse, Transverse::Uniform) && !qt.is_empty() {
                return Err(Error::InvalidConfig("uniform transverse factor has no regular transform for d > 0".into()));
            }
            let tq = if qt.is_empty() { C64::new(1.0, 0.0) } else { transverse.spectrum(qt).regular };
            profile_fourier(profile, *qx) * tq
        }
        PotentialModel::GaussianMixture { bumps } => bumps
            .iter()
            .map(|b| {
                let px = Profile::Gaussian { amplitude: b.amplitude, center: b.center_x, width: b.width_x };
                let t = Transverse::Gaussian { width: b.width_r, center: b.center_r.clone() };
                let tq = if qt.is_empty() { C64::new(1.0, 0.0) } else { t.spectrum(qt).regular };
                profile_fourier(&px, *qx) * tq
            })
            .sum(),
        PotentialModel::CircularWell { depth, radius, center_x } => {
            let qn = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            -depth * ball_fourier(q.len(), qn, *radius) * C64::from_polar(1.0, -qx * center_x)
        }
        PotentialModel::Sampled { .. } => {
            return Err(Error::InvalidConfig("Born amplitude is not available for sampled potentials".into()))
        }
        PotentialModel::Sum { terms } => {
            let mut acc = ZERO;
            for t in terms {
                acc += full_fourier(t, q)?;
            }
            acc
        }
    })
}

/// First Born scattering amplitude f_B(n₀, n) = -C_D ṽ(k(n - n₀)) in the
/// ψ ~ e^{ik₀·r} + e^{ikr} r^{-d/2} f normalization, D = d + 1:
/// C₁ = i/(2k), C₂ = e^{iπ/4}/√(8πk), C₃ = 1/(4π).
pub fn born_amplitude(v: &PotentialModel, k: f64, n0: &[f64], n: &[f64]) -> Result<C64> {
    if n0.len() != n.len() || n0.is_empty() || n0.len() > 3 {
        return Err(Error::InvalidConfig("directions must share a dimension in 1..=3".into()));
    }
    let q: Vec<f64> = n.iter().zip(n0).map(|(a, b)| k * (a - b)).collect();
    Ok(-born_constant(n0.len(), k) * full_fourier(v, &q)?)
}

/// C_D of the first Born term, D = d + 1 spatial dimensions.
pub fn born_constant(dim: usize, k: f64) -> C64 {
    match dim {
        1 => I / (2.0 * k),
        2 => C64::from_polar(1.0, PI / 4.0) / (8.0 * PI * k).sqrt(),
        _ => C64::new(1.0 / (4.0 * PI), 0.0),
    }
}
