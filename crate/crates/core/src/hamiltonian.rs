//! The effective non-Hermitian Hamiltonian
//!
//! H(x) = ½ E(-x) [V(x) ϖ⁻¹ ⊗ K] E(x) - i ϖ_i σ₃,   K = [[1, 1], [-1, -1]],
//!
//! with E(x) = diag(e^{ixϖ_r}, e^{-ixϖ_r}) and V(x) the discretized convolution
//! by ṽ(x, ·). The evolution loop never forms H: because K has rank one,
//! H·U only needs one N×N product (see [`Generator::apply`]).

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::grid::{MomentumGrid, VarpiFamily};
use crate::linalg::{gemm, BlockOperator, CMatrix, C64, I, ONE, ZERO};
use crate::potential::{Locus, PotentialModel, Profile, Spectral};

/// Discretized convolution with entries
/// `[ṽ_reg(p_i - p_j) w_j + ṽ_delta(p_i - p_j) (2π)ᵈ] / (2π)ᵈ`.
///
/// ṽ is evaluated once per lattice index difference, so entries that share a
/// difference vector are bitwise equal; this makes `P Vᵀ P = V` exact.
pub fn convolution_matrix(grid: &MomentumGrid, spectrum: impl Fn(&[f64]) -> Result<Spectral>) -> Result<CMatrix> {
    let d = grid.d();
    let n = grid.len();
    let norm = (2.0 * PI).powi(d as i32);
    let entry = |s: Spectral, w: f64| (s.regular * w + s.delta * norm) / norm;
    match d {
        0 => {
            let s = spectrum(&[])?;
            Ok(CMatrix::from_element(1, 1, s.regular + s.delta))
        }
        1 => {
            let m = grid.n_per_axis() as i64;
            let table: Vec<C64> = (-(m - 1)..m)
                .map(|off| spectrum(&[off as f64 * grid.spacing()]).map(|s| entry(s, grid.weights()[0])))
                .collect::<Result<_>>()?;
            Ok(CMatrix::from_fn(n, n, |i, j| table[(i as i64 - j as i64 + m - 1) as usize]))
        }
        _ => {
            let m = grid.n_per_axis() as i64;
            let side = (2 * m - 1) as usize;
            let mut table = vec![ZERO; side * side];
            for a in 0..side {
                for b in 0..side {
                    let q = [(a as i64 - (m - 1)) as f64 * grid.spacing(), (b as i64 - (m - 1)) as f64 * grid.spacing()];
                    table[a * side + b] = entry(spectrum(&q)?, grid.weights()[0]);
                }
            }
            let mu = m as usize;
            Ok(CMatrix::from_fn(n, n, |i, j| {
                let (ia, ib) = (i / mu, i % mu);
                let (ja, jb) = (j / mu, j % mu);
                let a = ia + mu - 1 - ja;
                let b = ib + mu - 1 - jb;
                table[a * side + b]
            }))
        }
    }
}

enum Kernel {
    /// V(x) = Σ u_m(x) F_m.
    Separable(Vec<(Profile, CMatrix)>),
    Direct(PotentialModel),
}

/// H(x) for one potential on one grid, with x-independent pieces cached.
pub struct EffectiveHamiltonian {
    grid: MomentumGrid,
    varpi: VarpiFamily,
    inv_varpi: Vec<C64>,
    kernel: Kernel,
}

impl EffectiveHamiltonian {
    pub fn new(v: &PotentialModel, grid: &MomentumGrid) -> Result<Self> {
        v.validate()?;
        let kernel = match v.separable_terms() {
            Some(terms) => Kernel::Separable(
                terms.into_iter().map(|t| Ok((t.profile, convolution_matrix(grid, |q| (t.spectrum)(q))?))).collect::<Result<_>>()?,
            ),
            None => Kernel::Direct(v.clone()),
        };
        let varpi = grid.varpi_family();
        let inv_varpi = (0..grid.len()).map(|i| grid.mean_inverse_varpi(i)).collect();
        Ok(Self { grid: grid.clone(), varpi, inv_varpi, kernel })
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn varpi(&self) -> &VarpiFamily {
        &self.varpi
    }

    /// V(x), or `None` where the potential vanishes identically.
    fn potential_matrix_opt(&self, at: Locus) -> Result<Option<CMatrix>> {
        match &self.kernel {
            Kernel::Separable(terms) => {
                let mut acc: Option<CMatrix> = None;
                for (profile, f) in terms {
                    let u = profile.value(at);
                    if u == ZERO {
                        continue;
                    }
                    match acc.as_mut() {
                        Some(a) => a.zip_apply(f, |a, b| *a += u * b),
                        None => acc = Some(f * u),
                    }
                }
                Ok(acc)
            }
            Kernel::Direct(v) => {
                let m = convolution_matrix(&self.grid, |q| v.transverse_fourier_at(at, q))?;
                Ok(if m.iter().all(|z| *z == ZERO) { None } else { Some(m) })
            }
        }
    }

    /// V(x) with `V[i,j] = ṽ(x, p_i - p_j) w_j / (2π)ᵈ`.
    pub fn potential_matrix(&self, at: Locus) -> Result<CMatrix> {
        let n = self.grid.len();
        Ok(self.potential_matrix_opt(at)?.unwrap_or_else(|| CMatrix::zeros(n, n)))
    }

    /// The x-dependent data needed to apply H(x).
    pub fn generator(&self, at: Locus) -> Result<Generator<'_>> {
        let coupling = self.potential_matrix_opt(at)?.map(|mut v| {
            for (j, mut col) in v.column_iter_mut().enumerate() {
                col *= self.inv_varpi[j];
            }
            v
        });
        let phase = self.varpi.real.iter().map(|&r| C64::from_polar(1.0, at.x * r)).collect();
        Ok(Generator { coupling, phase, imag: &self.varpi.imag })
    }

    /// Dense H(x).
    pub fn assemble(&self, at: Locus) -> Result<BlockOperator> {
        let n = self.grid.len();
        let g = self.generator(at)?;
        let mut h = CMatrix::zeros(2 * n, 2 * n);
        if let Some(c) = &g.coupling {
            for j in 0..n {
                for i in 0..n {
                    let z = 0.5 * c[(i, j)];
                    let (pi, pj) = (g.phase[i], g.phase[j]);
                    h[(i, j)] = pi.conj() * z * pj;
                    h[(i, n + j)] = pi.conj() * z * pj.conj();
                    h[(n + i, j)] = -pi * z * pj;
                    h[(n + i, n + j)] = -pi * z * pj.conj();
                }
            }
        }
        for i in 0..n {
            h[(i, i)] -= I * g.imag[i];
            h[(n + i, n + i)] += I * g.imag[i];
        }
        Ok(BlockOperator::from_matrix(h))
    }
}

/// H at one x, in factored form.
pub struct Generator<'a> {
    /// G = V ϖ⁻¹, absent where the potential vanishes.
    pub coupling: Option<CMatrix>,
    /// e^{ixϖ_r} per grid point.
    pub phase: Vec<C64>,
    pub imag: &'a [f64],
}

impl Generator<'_> {
    /// `out = -i H u` for a 2N×m block `u`.
    ///
    /// With Φ = e^{ixϖ_r}: Z = G (Φ u₁ + Φ̄ u₂), (Hu)₁ = ½ Φ̄ Z - iϖ_i u₁,
    /// (Hu)₂ = -½ Φ Z + iϖ_i u₂.
    pub fn apply(&self, u: &CMatrix, out: &mut CMatrix, scratch: &mut Scratch) {
        let n = self.phase.len();
        let m = u.ncols();
        debug_assert_eq!(u.nrows(), 2 * n);
        // Free part: -i(-iϖ_i) u₁ = -ϖ_i u₁ ;  -i(iϖ_i) u₂ = ϖ_i u₂.
        for j in 0..m {
            for i in 0..n {
                out[(i, j)] = u[(i, j)] * (-self.imag[i]);
                out[(n + i, j)] = u[(n + i, j)] * self.imag[i];
            }
        }
        let Some(g) = &self.coupling else { return };
        scratch.ensure(n, m);
        let y = &mut scratch.y;
        for j in 0..m {
            for i in 0..n {
                let ph = self.phase[i];
                y[(i, j)] = ph * u[(i, j)] + ph.conj() * u[(n + i, j)];
            }
        }
        gemm(ONE, g, y, ZERO, &mut scratch.z);
        let z = &scratch.z;
        // -i·(½ Φ̄ Z) and -i·(-½ Φ Z)
        let half_minus_i = C64::new(0.0, -0.5);
        for j in 0..m {
            for i in 0..n {
                let ph = self.phase[i];
                out[(i, j)] += half_minus_i * ph.conj() * z[(i, j)];
                out[(n + i, j)] -= half_minus_i * ph * z[(i, j)];
            }
        }
    }

    /// ‖G‖_∞ (max absolute row sum), 0 where the potential vanishes.
    pub fn coupling_norm(&self) -> f64 {
        self.coupling.as_ref().map_or(0.0, |g| g.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max))
    }
}

/// Reusable work buffers for [`Generator::apply`].
#[derive(Default)]
pub struct Scratch {
    y: CMatrix,
    z: CMatrix,
}

impl Scratch {
    fn ensure(&mut self, n: usize, m: usize) {
        if self.y.shape() != (n, m) {
            self.y = CMatrix::zeros(n, m);
            self.z = CMatrix::zeros(n, m);
        }
    }
}

/// V(x) on `grid`.
pub fn assemble_v(v: &PotentialModel, grid: &MomentumGrid, x: f64) -> Result<CMatrix> {
    EffectiveHamiltonian::new(v, grid)?.potential_matrix(Locus::at(x))
}

/// Dense H(x) on `grid`.
pub fn assemble_h(v: &PotentialModel, grid: &MomentumGrid, x: f64) -> Result<BlockOperator> {
    EffectiveHamiltonian::new(v, grid)?.assemble(Locus::at(x))
}

/// The 2×2 Hamiltonian of the one-dimensional problem:
/// (v(x)/2k) [[1, e^{-2ikx}], [-e^{2ikx}, -1]].
pub fn assemble_h_1d(v: &PotentialModel, k: f64, x: f64) -> Result<Matrix2<C64>> {
    if !(k > 0.0) {
        return Err(Error::InvalidConfig(format!("k must be positive, got {k}")));
    }
    let s = v.transverse_fourier(x, &[])?;
    let c = (s.regular + s.delta) / (2.0 * k);
    let e = C64::from_polar(1.0, 2.0 * k * x);
    Ok(Matrix2::new(c, c * e.conj(), -c * e, -c))
}
