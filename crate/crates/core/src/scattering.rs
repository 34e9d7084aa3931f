//! Scattering amplitudes, reflection/transmission kernels and S-matrices from
//! the transfer matrix, plus spectral-singularity scans.
//!
//! Kernel convention: a matrix L acting on grid values has kernel
//! ⟨pᵢ|L|pⱼ⟩ = L[i, j] / wⱼ, and the identity has kernel δᵢⱼ / wⱼ.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{integrate_transfer, Stepper, TransferMatrix};
use crate::grid::{MomentumGrid, ScatteringConfig};
use crate::linalg::{singular_extremes, BlockOperator, CMatrix, C64, ONE, ZERO};
use crate::potential::PotentialModel;

/// Directions with |n_x| below this are grazing and rejected.
pub const GRAZING_CUTOFF: f64 = 1e-6;

/// M₂₂ with a larger 2-norm condition number is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// A unit vector in d+1 dimensions, x component first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction(Vec<f64>);

impl Direction {
    pub fn new(n: Vec<f64>) -> Result<Self> {
        let norm = n.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n.is_empty() || n.len() > 3 || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("direction {n:?} is not a unit vector in 1..=3 dimensions")));
        }
        Ok(Self(n))
    }

    /// Normalizes `n` first.
    pub fn normalized(n: Vec<f64>) -> Result<Self> {
        let norm = n.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidConfig("zero direction".into()));
        }
        Self::new(n.into_iter().map(|c| c / norm).collect())
    }

    /// (cos θ, sin θ) in the x-y plane.
    pub fn planar(theta: f64) -> Self {
        Self(vec![theta.cos(), theta.sin()])
    }

    /// The direction whose transverse wavevector is `kt` and whose x component has sign `sign`.
    pub fn from_transverse(kt: &[f64], k: f64, sign: f64) -> Result<Self> {
        let nt: Vec<f64> = kt.iter().map(|c| c / k).collect();
        let s2: f64 = nt.iter().map(|c| c * c).sum();
        if s2 >= 1.0 {
            return Err(Error::Evanescent { norm: s2.sqrt() * k, k });
        }
        let mut n = vec![sign.signum() * (1.0 - s2).sqrt()];
        n.extend(nt);
        Ok(Self(n))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn nx(&self) -> f64 {
        self.0[0]
    }

    pub fn transverse(&self) -> &[f64] {
        &self.0[1..]
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }
}

/// Grid node of a direction's transverse wavevector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Snap {
    /// Global grid index.
    pub index: usize,
    /// Position within the propagating subset.
    pub position: usize,
    /// max-norm distance between k n⊥ and the node.
    pub distance: f64,
}

/// Snaps k·n⊥ to the nearest propagating node.
pub fn snap_direction(grid: &MomentumGrid, n: &Direction) -> Result<Snap> {
    if n.components().len() != grid.d() + 1 {
        return Err(Error::InvalidConfig(format!("direction has {} components, expected {}", n.components().len(), grid.d() + 1)));
    }
    if n.nx().abs() < GRAZING_CUTOFF {
        return Err(Error::Grazing { nx: n.nx() });
    }
    let k = grid.k();
    let kt: Vec<f64> = n.transverse().iter().map(|c| k * c).collect();
    let (index, distance) = grid.nearest_propagating(&kt).ok_or(Error::Evanescent { norm: 0.0, k })?;
    let half_cell = 0.5 * grid.spacing();
    if grid.d() > 0 && distance > half_cell * (1.0 + 1e-12) {
        return Err(Error::OffGrid { distance, half_cell });
    }
    let position = grid.propagating_position(index).expect("nearest propagating node");
    Ok(Snap { index, position, distance })
}

/// c_d = (2πi)^{d/2} k^{1-d/2}.
pub fn c_d(d: usize, k: f64) -> C64 {
    let half = d as f64 / 2.0;
    C64::from_polar((2.0 * PI).powf(half), PI / 2.0 * half) * k.powf(1.0 - half)
}

/// Which sign quadrant of (n₀ₓ, nₓ) a pair falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// n₀ₓ > 0, nₓ > 0
    TransmissionLeft,
    /// n₀ₓ > 0, nₓ < 0
    ReflectionLeft,
    /// n₀ₓ < 0, nₓ > 0
    ReflectionRight,
    /// n₀ₓ < 0, nₓ < 0
    TransmissionRight,
}

impl Channel {
    pub fn of(n0: &Direction, n: &Direction) -> Self {
        match (n0.nx() > 0.0, n.nx() > 0.0) {
            (true, true) => Channel::TransmissionLeft,
            (true, false) => Channel::ReflectionLeft,
            (false, true) => Channel::ReflectionRight,
            (false, false) => Channel::TransmissionRight,
        }
    }

    /// Block (row, col) of S whose kernel gives the channel.
    fn block(self) -> (usize, usize) {
        match self {
            Channel::TransmissionLeft => (0, 0),
            Channel::ReflectionLeft => (1, 0),
            Channel::ReflectionRight => (0, 1),
            Channel::TransmissionRight => (1, 1),
        }
    }
}

/// S = [[M₁₁ - M₁₂M₂₂⁻¹M₂₁, M₁₂M₂₂⁻¹], [-M₂₂⁻¹M₂₁, M₂₂⁻¹]] on the propagating modes.
#[derive(Clone, Debug)]
pub struct SMatrix {
    pub s11: CMatrix,
    pub s12: CMatrix,
    pub s21: CMatrix,
    pub s22: CMatrix,
    pub sigma_min: f64,
    pub cond: f64,
}

impl SMatrix {
    pub fn block(&self, row: usize, col: usize) -> &CMatrix {
        match (row, col) {
            (0, 0) => &self.s11,
            (0, 1) => &self.s12,
            (1, 0) => &self.s21,
            _ => &self.s22,
        }
    }

    pub fn operator(&self) -> BlockOperator {
        BlockOperator::from_blocks(&self.s11, &self.s12, &self.s21, &self.s22)
    }

    /// S′ = σ₁S: the block rows swapped.
    pub fn prime(&self) -> BlockOperator {
        BlockOperator::from_blocks(&self.s21, &self.s22, &self.s11, &self.s12)
    }
}

/// σ_min and condition number of M₂₂.
pub fn m22_conditioning(m: &TransferMatrix) -> (f64, f64) {
    let (max, min) = singular_extremes(&m.m22);
    (min, if min > 0.0 { max / min } else { f64::INFINITY })
}

/// Assembles S with LU solves against M₂₂.
pub fn assemble_s(m: &TransferMatrix) -> Result<SMatrix> {
    let (sigma_min, cond) = m22_conditioning(m);
    if !(cond <= SINGULAR_CONDITION) {
        return Err(Error::NearSpectralSingularity { sigma_min, cond });
    }
    let np = m.len();
    let lu = m.m22.clone().lu();
    let singular = || Error::NearSpectralSingularity { sigma_min, cond };
    let s22 = lu.solve(&CMatrix::identity(np, np)).ok_or_else(singular)?;
    let x = lu.solve(&m.m21).ok_or_else(singular)?; // M₂₂⁻¹M₂₁
                                                    // M₁₂M₂₂⁻¹ = (M₂₂ᵀ⁻¹ M₁₂ᵀ)ᵀ
    let y = m.m22.transpose().lu().solve(&m.m12.transpose()).ok_or_else(singular)?.transpose();
    let s11 = &m.m11 - &m.m12 * &x;
    Ok(SMatrix { s11, s12: y, s21: -x, s22, sigma_min, cond })
}

pub fn assemble_s_prime(m: &TransferMatrix) -> Result<BlockOperator> {
    Ok(assemble_s(m)?.prime())
}

/// One sampled amplitude.
#[derive(Clone, Debug, Serialize)]
pub struct AmplitudeSample {
    pub n0: Direction,
    pub n: Direction,
    #[serde(with = "crate::serde_complex")]
    pub f: C64,
    /// Larger of the two snap distances.
    pub snap_distance: f64,
}

/// A reflection or transmission amplitude split into its δ̌ part and the c_d f part.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RtAmplitude {
    pub channel: Channel,
    /// k^{d-1} δ̌_{k₀}(k) on the grid (zero for reflections and for k ≠ k₀).
    #[serde(with = "crate::serde_complex")]
    pub singular: C64,
    /// k^{d-1} c_d f(n₀, n).
    #[serde(with = "crate::serde_complex")]
    pub smooth: C64,
    #[serde(with = "crate::serde_complex")]
    pub total: C64,
    /// T^l from (2π)^d k^{d-1} ϖ(k) ⟨k₀|P M₂₂⁻¹ P|k⟩, for left transmission only.
    #[serde(with = "crate::serde_complex::option")]
    pub total_alt: Option<C64>,
}

/// S-matrix kernels on a grid, ready for amplitude extraction.
#[derive(Clone, Debug)]
pub struct ScatteringData {
    pub transfer: TransferMatrix,
    pub s: SMatrix,
    pub c_d: C64,
    pub samples: Vec<AmplitudeSample>,
}

impl ScatteringData {
    pub fn new(m: TransferMatrix) -> Result<Self> {
        let s = assemble_s(&m)?;
        let c = c_d(m.grid.d(), m.k());
        Ok(Self { transfer: m, s, c_d: c, samples: Vec::new() })
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.transfer.grid
    }

    pub fn k(&self) -> f64 {
        self.transfer.k()
    }

    fn weight(&self, snap: &Snap) -> f64 {
        self.grid().weights()[snap.index]
    }

    /// Kernel of S_block - [diagonal block]·I between two snapped nodes, times (2π)^d ϖ(k₀).
    fn scaled_kernel(&self, channel: Channel, s0: &Snap, s: &Snap, subtract_identity: bool) -> C64 {
        let (r, c) = channel.block();
        let mut entry = self.s.block(r, c)[(s.position, s0.position)];
        if subtract_identity && r == c && s.position == s0.position {
            entry -= ONE;
        }
        let d = self.grid().d() as i32;
        let varpi0 = self.grid().cell_varpi(s0.index);
        (2.0 * PI).powi(d) * varpi0 * entry / self.weight(s0)
    }

    /// f(n₀, n).
    pub fn amplitude(&self, n0: &Direction, n: &Direction) -> Result<AmplitudeSample> {
        let s0 = snap_direction(self.grid(), n0)?;
        let s = snap_direction(self.grid(), n)?;
        let f = self.scaled_kernel(Channel::of(n0, n), &s0, &s, true) / self.c_d;
        Ok(AmplitudeSample { n0: n0.clone(), n: n.clone(), f, snap_distance: s0.distance.max(s.distance) })
    }

    /// Samples f on each pair and stores the results.
    pub fn sample(&mut self, pairs: &[(Direction, Direction)]) -> Result<&[AmplitudeSample]> {
        let out = pairs.iter().map(|(a, b)| self.amplitude(a, b)).collect::<Result<Vec<_>>>()?;
        self.samples.extend(out);
        Ok(&self.samples)
    }

    /// R/T amplitude of the pair's channel.
    pub fn rt_amplitude(&self, n0: &Direction, n: &Direction) -> Result<RtAmplitude> {
        let grid = self.grid();
        let s0 = snap_direction(grid, n0)?;
        let s = snap_direction(grid, n)?;
        let channel = Channel::of(n0, n);
        let d = grid.d() as i32;
        let kd = self.k().powi(d - 1);
        let total = kd * self.scaled_kernel(channel, &s0, &s, false);
        let singular = match channel {
            Channel::TransmissionLeft | Channel::TransmissionRight if s.position == s0.position => {
                kd * (2.0 * PI).powi(d) * grid.cell_varpi(s0.index) / self.weight(&s0)
            }
            _ => ZERO,
        };
        let total_alt = (channel == Channel::TransmissionLeft).then(|| {
            let perm = grid.parity_perm();
            let (pi, pj) = (perm[s.index], perm[s0.index]);
            let (qi, qj) = (grid.propagating_position(pi).unwrap(), grid.propagating_position(pj).unwrap());
            // ⟨k₀|P M₂₂⁻¹ P|k⟩ = ⟨-k₀|M₂₂⁻¹|-k⟩
            kd * (2.0 * PI).powi(d) * grid.cell_varpi(s.index) * self.s.s22[(qj, qi)] / grid.weights()[pi]
        });
        Ok(RtAmplitude { channel, singular, smooth: total - singular, total, total_alt })
    }
}

/// f(n₀, n) straight from a transfer matrix.
pub fn scattering_amplitude(m: &TransferMatrix, n0: &Direction, n: &Direction) -> Result<AmplitudeSample> {
    ScatteringData::new(m.clone())?.amplitude(n0, n)
}

pub fn rt_amplitudes(m: &TransferMatrix, n0: &Direction, n: &Direction) -> Result<RtAmplitude> {
    ScatteringData::new(m.clone())?.rt_amplitude(n0, n)
}

/// Every on-grid direction pair (n₀, n) with both transverse wavevectors at
/// propagating nodes, for the given x-signs.
pub fn on_grid_directions(grid: &MomentumGrid, sign: f64) -> Vec<Direction> {
    grid.propagating().iter().filter_map(|&i| Direction::from_transverse(grid.point(i), grid.k(), sign).ok()).collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResidualFlag {
    pub residual: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DirectionalCheck {
    pub transparent: ResidualFlag,
    pub reflectionless: ResidualFlag,
}

/// Directional transparency and reflectionlessness along n₀.
///
/// n₀ₓ > 0: ‖(M₂₂† - I)|-k₀⟩‖ and ‖M₂₁|k₀⟩‖;
/// n₀ₓ < 0: ‖(M₂₂ - I)|k₀⟩‖ and ‖M₁₂†|-k₀⟩‖.
pub fn transparency_reflectionless_check(m: &TransferMatrix, n0: &Direction, tol: f64) -> Result<DirectionalCheck> {
    let grid = &m.grid;
    let s0 = snap_direction(grid, n0)?;
    let minus = grid.propagating_position(grid.parity_perm()[s0.index]).unwrap();
    let np = m.len();
    let col = |a: &CMatrix, j: usize, adjoint: bool| -> Vec<C64> {
        (0..np).map(|i| if adjoint { a[(j, i)].conj() } else { a[(i, j)] }).collect()
    };
    let norm_minus_unit = |v: Vec<C64>, j: usize| -> f64 {
        v.iter().enumerate().map(|(i, z)| (if i == j { z - ONE } else { *z }).norm_sqr()).sum::<f64>().sqrt()
    };
    let norm = |v: Vec<C64>| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let (t, r) = if n0.nx() > 0.0 {
        (norm_minus_unit(col(&m.m22, minus, true), minus), norm(col(&m.m21, s0.position, false)))
    } else {
        (norm_minus_unit(col(&m.m22, s0.position, false), s0.position), norm(col(&m.m12, minus, true)))
    };
    Ok(DirectionalCheck {
        transparent: ResidualFlag { residual: t, pass: t < tol },
        reflectionless: ResidualFlag { residual: r, pass: r < tol },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanSample {
    pub k: f64,
    pub sigma_min: f64,
    pub cond: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularityScan {
    pub samples: Vec<ScanSample>,
    /// Golden-section refinements of every interior local minimum of σ_min.
    pub minima: Vec<ScanSample>,
    /// Refined minima below the threshold, smallest σ_min first.
    pub candidates: Vec<ScanSample>,
    pub threshold: f64,
}

/// Relative threshold for candidates: this times the median σ_min of the scan.
pub const CANDIDATE_FRACTION: f64 = 1e-3;

/// σ_min(M₂₂) and cond(M₂₂) at wavenumber k; p_max keeps its ratio to k.
fn m22_at(v: &PotentialModel, cfg: &ScatteringConfig, stepper: &Stepper, k: f64) -> Result<ScanSample> {
    let ratio = cfg.p_max / cfg.k;
    let c = ScatteringConfig { k, p_max: ratio * k, ..cfg.clone() };
    let grid = MomentumGrid::build(&c)?;
    let m = integrate_transfer(v, &grid, stepper)?;
    let (sigma_min, cond) = m22_conditioning(&m);
    Ok(ScanSample { k, sigma_min, cond })
}

/// Scans σ_min(M₂₂) over `n_samples` evenly spaced k in `k_range`, refines each
/// local minimum by golden-section search to `k_tol`, and flags minima below
/// [`CANDIDATE_FRACTION`] × median as spectral-singularity candidates.
pub fn spectral_singularity_scan(
    v: &PotentialModel,
    cfg: &ScatteringConfig,
    stepper: &Stepper,
    k_range: (f64, f64),
    n_samples: usize,
    k_tol: f64,
) -> Result<SingularityScan> {
    let (k0, k1) = k_range;
    if !(k0 > 0.0 && k1 > k0) || n_samples < 3 {
        return Err(Error::InvalidConfig("k scan needs 0 < k_min < k_max and at least 3 samples".into()));
    }
    let ks: Vec<f64> = (0..n_samples).map(|i| k0 + (k1 - k0) * i as f64 / (n_samples - 1) as f64).collect();
    let samples = ks.par_iter().map(|&k| m22_at(v, cfg, stepper, k)).collect::<Result<Vec<_>>>()?;

    let mut sorted: Vec<f64> = samples.iter().map(|s| s.sigma_min).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let threshold = CANDIDATE_FRACTION * median;

    let brackets: Vec<(f64, f64)> = (1..n_samples - 1)
        .filter(|&i| samples[i].sigma_min < samples[i - 1].sigma_min && samples[i].sigma_min <= samples[i + 1].sigma_min)
        .map(|i| (samples[i - 1].k, samples[i + 1].k))
        .collect();
    let mut minima =
        brackets.par_iter().map(|&(a, b)| golden_section(|k| m22_at(v, cfg, stepper, k), a, b, k_tol)).collect::<Result<Vec<_>>>()?;
    minima.sort_by(|a, b| a.k.total_cmp(&b.k));
    let mut candidates: Vec<ScanSample> = minima.iter().copied().filter(|s| s.sigma_min < threshold).collect();
    candidates.sort_by(|a, b| a.sigma_min.total_cmp(&b.sigma_min));
    Ok(SingularityScan { samples, minima, candidates, threshold })
}

fn golden_section(f: impl Fn(f64) -> Result<ScanSample>, mut a: f64, mut b: f64, tol: f64) -> Result<ScanSample> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc.sigma_min < fd.sigma_min {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc.sigma_min < fd.sigma_min { fc } else { fd })
}
