//! Parity, dispersion and block operators on the propagating modes, and the
//! reciprocity identities of the transfer and scattering matrices as residuals.
//!
//! The antilinear operator 𝔗 = ϖ⁻¹·P·(conjugation) is never formed. With
//! B := W⁻¹P, every identity X† = 𝔗X𝔗⁻¹ becomes the linear statement
//! Xᵀ = B X B⁻¹, and the anti-pseudo-unitarity of M becomes
//! J⁻¹ Mᵀ J M = I with J = Ω ⊗ B.
//!
//! On a grid W is diag ϖ̄ (the cell-averaged dispersion the coupling uses, see
//! [`MomentumGrid::cell_varpi`]); only transposes appear, so the identities
//! hold exactly for the discretized problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::TransferMatrix;
use crate::grid::MomentumGrid;
use crate::linalg::{diagonal, frobenius, permutation_matrix, BlockOperator, CMatrix, C64};
use crate::scattering::{assemble_s, Channel, Direction, SMatrix, ScatteringData};

#[derive(Clone, Debug)]
pub struct SymmetryOperators {
    /// Parity on propagating positions: `perm[a]` is the position of -p_a.
    pub perm: Vec<usize>,
    pub p: CMatrix,
    /// diag ϖ̄ on the propagating modes (real and positive unless a cell straddles |p| = k).
    pub w: CMatrix,
    pub winv: CMatrix,
    /// Ω = [[0, I], [-I, 0]]
    pub omega: BlockOperator,
    /// σ₁ = [[0, I], [I, 0]]
    pub sigma1: BlockOperator,
}

impl SymmetryOperators {
    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// B = W⁻¹P.
    pub fn b(&self) -> CMatrix {
        &self.winv * &self.p
    }

    /// B⁻¹ = PW.
    pub fn b_inv(&self) -> CMatrix {
        &self.p * &self.w
    }

    /// B⁻¹XB = PWXW⁻¹P, entrywise X[Pa, Pb]·(w_Pa / w_Pb) so that X = I maps to I exactly.
    pub fn sim_inv(&self, x: &CMatrix) -> CMatrix {
        let w = |a: usize| self.w[(a, a)];
        CMatrix::from_fn(x.nrows(), x.ncols(), |a, b| {
            let (pa, pb) = (self.perm[a], self.perm[b]);
            x[(pa, pb)] * (w(pa) / w(pb))
        })
    }

    /// BXB⁻¹ = W⁻¹PXPW, entrywise X[Pa, Pb]·(w_b / w_a).
    pub fn sim(&self, x: &CMatrix) -> CMatrix {
        let w = |a: usize| self.w[(a, a)];
        CMatrix::from_fn(x.nrows(), x.ncols(), |a, b| x[(self.perm[a], self.perm[b])] * (w(b) / w(a)))
    }

    /// J = Ω ⊗ B and J⁻¹ as dense matrices.
    pub fn j(&self) -> (CMatrix, CMatrix) {
        let n = self.len();
        let z = CMatrix::zeros(n, n);
        let (b, bi) = (self.b(), self.b_inv());
        (BlockOperator::from_blocks(&z, &b, &(-&b), &z).into_matrix(), BlockOperator::from_blocks(&z, &(-&bi), &bi, &z).into_matrix())
    }
}

/// Builds P, W, Ω and σ₁ on the propagating subset and checks P² = I and PW = WP exactly.
pub fn build_symmetry(grid: &MomentumGrid) -> Result<SymmetryOperators> {
    let prop = grid.propagating();
    let perm = prop
        .iter()
        .map(|&i| grid.propagating_position(grid.parity_perm()[i]).ok_or(Error::ParityClosure { index: i }))
        .collect::<Result<Vec<_>>>()?;
    let varpi: Vec<C64> = prop.iter().map(|&i| grid.cell_varpi(i)).collect();
    for (a, &b) in perm.iter().enumerate() {
        if perm[b] != a || varpi[a] != varpi[b] || !(varpi[a].norm() > 0.0 && varpi[a].is_finite()) {
            return Err(Error::ParityClosure { index: prop[a] });
        }
    }
    let n = prop.len();
    let (id, z) = (CMatrix::identity(n, n), CMatrix::zeros(n, n));
    Ok(SymmetryOperators {
        p: permutation_matrix(&perm),
        w: diagonal(&varpi),
        winv: diagonal(&prop.iter().map(|&i| grid.mean_inverse_varpi(i)).collect::<Vec<_>>()),
        omega: BlockOperator::from_blocks(&z, &id, &(-&id), &z),
        sigma1: BlockOperator::from_blocks(&z, &id, &id, &z),
        perm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identity_name: String,
    pub residual: f64,
    pub reference_tol: f64,
    pub pass: bool,
}

impl ResidualReport {
    fn new(name: &str, residual: f64, reference_tol: f64) -> Self {
        Self { identity_name: name.to_string(), residual, reference_tol, pass: residual < reference_tol }
    }
}

/// max(10⁻⁶, 50·rtol·cond(M₂₂)).
pub fn reference_tolerance(m: &TransferMatrix) -> f64 {
    let cond = crate::scattering::m22_conditioning(m).1;
    let scaled = 50.0 * m.report.rtol * cond;
    if scaled.is_finite() {
        scaled.max(1e-6)
    } else {
        1e-6
    }
}

/// ‖lhs − rhs‖_F / ‖lhs‖_F, or the absolute difference when lhs vanishes.
fn rel(lhs: &CMatrix, rhs: &CMatrix) -> f64 {
    crate::linalg::relative_residual(lhs, rhs)
}

/// ‖J⁻¹MᵀJM − I‖_F / ‖M‖_F, using
/// J⁻¹MᵀJ = [[B⁻¹M₂₂ᵀB, −B⁻¹M₁₂ᵀB], [−B⁻¹M₂₁ᵀB, B⁻¹M₁₁ᵀB]].
pub fn m_anti_pseudo_unitarity(m: &TransferMatrix, ops: &SymmetryOperators) -> f64 {
    let f = |x: &CMatrix| ops.sim_inv(&x.transpose());
    let lhs = BlockOperator::from_blocks(&f(&m.m22), &(-f(&m.m12)), &(-f(&m.m21)), &f(&m.m11));
    unit_defect(&lhs, m)
}

/// ‖J Mᵀ J⁻¹ M − I‖_F / ‖M‖_F: the ordering obtained by moving the antilinear
/// factor past the transpose without conjugating it. Reported only to
/// document that this ordering is not an identity for d > 0.
pub fn m_identity_swapped_order(m: &TransferMatrix, ops: &SymmetryOperators) -> f64 {
    let f = |x: &CMatrix| ops.sim(&x.transpose());
    let lhs = BlockOperator::from_blocks(&f(&m.m22), &(-f(&m.m12)), &(-f(&m.m21)), &f(&m.m11));
    unit_defect(&lhs, m)
}

fn unit_defect(lhs: &BlockOperator, m: &TransferMatrix) -> f64 {
    let mm = m.block_operator();
    let prod = lhs.compose(&mm).into_matrix();
    let n = prod.nrows();
    frobenius(&(prod - CMatrix::identity(n, n))) / frobenius(mm.matrix())
}

pub fn check_m_anti_pseudo_unitarity(m: &TransferMatrix, ops: &SymmetryOperators) -> ResidualReport {
    ResidualReport::new("m_anti_pseudo_unitarity", m_anti_pseudo_unitarity(m, ops), reference_tolerance(m))
}

/// The four entry identities on S-matrix blocks, B = W⁻¹P:
///   (a) (M₂₂⁻¹M₂₁)ᵀ = B (M₂₂⁻¹M₂₁) B⁻¹
///   (b) (M₁₂M₂₂⁻¹)ᵀ = B (M₁₂M₂₂⁻¹) B⁻¹
///   (c) M₂₂⁻ᵀ = B (M₁₁ − M₁₂M₂₂⁻¹M₂₁) B⁻¹
///   (d) M₁₁M₂₂ − M₁₂M₂₂⁻¹M₂₁M₂₂ = B⁻¹ M₂₂⁻ᵀ B M₂₂
pub fn entry_identity_residuals(m: &TransferMatrix, s: &SMatrix, ops: &SymmetryOperators) -> [f64; 4] {
    let x = -&s.s21;
    let a = rel(&x.transpose(), &ops.sim(&x));
    let bb = rel(&s.s12.transpose(), &ops.sim(&s.s12));
    let m22_inv_t = s.s22.transpose();
    let c = rel(&m22_inv_t, &ops.sim(&s.s11));
    let lhs_d = &m.m11 * &m.m22 - &s.s12 * &m.m21 * &m.m22;
    let d = rel(&lhs_d, &(ops.sim_inv(&m22_inv_t) * &m.m22));
    [a, bb, c, d]
}

pub fn check_entry_identities(m: &TransferMatrix, ops: &SymmetryOperators) -> Result<Vec<ResidualReport>> {
    let s = assemble_s(m)?;
    let tol = reference_tolerance(m);
    let r = entry_identity_residuals(m, &s, ops);
    Ok(["reflection_left_kernel", "reflection_right_kernel", "transmission_kernels", "determinant_generalization"]
        .iter()
        .zip(r)
        .map(|(name, v)| ResidualReport::new(name, v, tol))
        .collect())
}

/// (S, S′) residuals: ‖B′⁻¹SᵀB′ − S‖/‖S‖ with B′ = σ₁ ⊗ W⁻¹P, and
/// ‖B″⁻¹S′ᵀB″ − S′‖/‖S′‖ with B″ = I ⊗ W⁻¹P.
pub fn s_identity_residuals(s: &SMatrix, ops: &SymmetryOperators) -> [f64; 2] {
    let t = |x: &CMatrix| ops.sim_inv(&x.transpose());
    // (σ₁⊗B⁻¹) Sᵀ (σ₁⊗B): block (i, j) is B⁻¹ (Sᵀ)_{σi,σj} B, and (Sᵀ)_{ij} = S_{ji}ᵀ.
    let lhs1 = BlockOperator::from_blocks(&t(&s.s22), &t(&s.s12), &t(&s.s21), &t(&s.s11));
    let sp = s.prime();
    let (p11, p12, p21, p22) = (sp.block(0, 0), sp.block(0, 1), sp.block(1, 0), sp.block(1, 1));
    let lhs2 = BlockOperator::from_blocks(&t(&p11), &t(&p21), &t(&p12), &t(&p22));
    let r1 = rel(s.operator().matrix(), lhs1.matrix());
    let r2 = rel(sp.matrix(), lhs2.matrix());
    [r1, r2]
}

pub fn check_s_identities(m: &TransferMatrix, ops: &SymmetryOperators) -> Result<Vec<ResidualReport>> {
    let s = assemble_s(m)?;
    let tol = reference_tolerance(m);
    let [r1, r2] = s_identity_residuals(&s, ops);
    Ok(vec![ResidualReport::new("s_anti_pseudo_hermiticity", r1, tol), ResidualReport::new("s_prime_anti_hermiticity", r2, tol)])
}

/// Every identity on M and S, in a fixed order.
pub fn verify_all(m: &TransferMatrix) -> Result<Vec<ResidualReport>> {
    let ops = build_symmetry(&m.grid)?;
    let mut out = vec![check_m_anti_pseudo_unitarity(m, &ops)];
    out.extend(check_entry_identities(m, &ops)?);
    out.extend(check_s_identities(m, &ops)?);
    Ok(out)
}

/// J⁻¹UᵀJU − I on the full grid (complex ϖ̄ on evanescent nodes), relative to ‖U‖.
pub fn full_grid_residual(u: &BlockOperator, grid: &MomentumGrid) -> f64 {
    let n = grid.len();
    let p = permutation_matrix(grid.parity_perm());
    let b = diagonal(&(0..n).map(|i| grid.mean_inverse_varpi(i)).collect::<Vec<_>>()) * &p;
    let bi = &p * diagonal(&(0..n).map(|i| grid.cell_varpi(i)).collect::<Vec<_>>());
    let z = CMatrix::zeros(n, n);
    let j = BlockOperator::from_blocks(&z, &b, &(-&b), &z).into_matrix();
    let ji = BlockOperator::from_blocks(&z, &(-&bi), &bi, &z).into_matrix();
    let lhs = ji * u.matrix().transpose() * j * u.matrix();
    frobenius(&(lhs - CMatrix::identity(2 * n, 2 * n))) / frobenius(u.matrix())
}

#[derive(Clone, Debug, Serialize)]
pub struct AmplitudeReciprocity {
    /// max |f(n₀, n) − f(−n, −n₀)|.
    pub max_abs: f64,
    /// max |f| over the sampled pairs.
    pub max_f: f64,
    pub pairs: usize,
    /// max |R^l(n₀,n) − R^l(−n,−n₀)|.
    pub reflection_left: f64,
    /// max |R^r(n₀,n) − R^r(−n,−n₀)|.
    pub reflection_right: f64,
    /// max |T^l(n₀,n) − T^r(−n,−n₀)| on the smooth parts.
    pub transmission: f64,
}

/// Reciprocity of the sampled amplitudes over the given pairs.
pub fn check_amplitude_reciprocity(data: &ScatteringData, pairs: &[(Direction, Direction)]) -> Result<AmplitudeReciprocity> {
    let mut out = AmplitudeReciprocity {
        max_abs: 0.0,
        max_f: 0.0,
        pairs: pairs.len(),
        reflection_left: 0.0,
        reflection_right: 0.0,
        transmission: 0.0,
    };
    for (n0, n) in pairs {
        let (a, b) = (n.neg(), n0.neg());
        let f = data.amplitude(n0, n)?.f;
        let g = data.amplitude(&a, &b)?.f;
        out.max_abs = out.max_abs.max((f - g).norm());
        out.max_f = out.max_f.max(f.norm()).max(g.norm());
        let r1 = data.rt_amplitude(n0, n)?;
        let r2 = data.rt_amplitude(&a, &b)?;
        let diff = (r1.smooth - r2.smooth).norm();
        match r1.channel {
            Channel::ReflectionLeft => out.reflection_left = out.reflection_left.max(diff),
            Channel::ReflectionRight => out.reflection_right = out.reflection_right.max(diff),
            _ => out.transmission = out.transmission.max(diff),
        }
    }
    Ok(out)
}

/// All pairs of on-grid directions covering the four sign quadrants.
pub fn on_grid_pairs(grid: &MomentumGrid) -> Vec<(Direction, Direction)> {
    let dirs: Vec<Direction> =
        crate::scattering::on_grid_directions(grid, 1.0).into_iter().chain(crate::scattering::on_grid_directions(grid, -1.0)).collect();
    dirs.iter().flat_map(|a| dirs.iter().map(move |b| (a.clone(), b.clone()))).collect()
}
