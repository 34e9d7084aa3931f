//! Integration of i ∂ₓU = H(x) U across the support of the potential, and the
//! reduction of the evolution operator to the transfer matrix on propagating
//! modes.

use std::time::Instant;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{MomentumGrid, ScatteringConfig};
use crate::hamiltonian::{EffectiveHamiltonian, Generator, Scratch};
use crate::linalg::{is_finite, submatrix, BlockOperator, CMatrix, C64, ONE, ZERO};
use crate::potential::{Locus, PotentialModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical fixed-step Runge–Kutta.
    #[default]
    Rk4,
    /// Adaptive Dormand–Prince 5(4).
    Dopri5,
}

/// How the evolution operator is reduced to propagating modes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    /// Impose boundedness of the evanescent components outside the support:
    /// the component decaying to the right vanishes at the left end and the
    /// component growing to the right vanishes at the right end. This is the
    /// Schur complement of U on its block-2 evanescent rows and columns.
    #[default]
    EvanescentMatched,
    /// Plain propagating submatrix of U.
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stepper {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Cap on max Im ϖ × window length.
    pub growth_budget: f64,
    pub restriction: Restriction,
}

impl Default for Stepper {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            rtol: 1e-8,
            atol: 1e-12,
            max_step: 0.25,
            growth_budget: 40.0,
            restriction: Restriction::EvanescentMatched,
        }
    }
}

impl Stepper {
    pub fn rk4(rtol: f64) -> Self {
        Self { rtol, ..Self::default() }
    }

    pub fn dopri5(rtol: f64, atol: f64) -> Self {
        Self { method: Method::Dopri5, rtol, atol, ..Self::default() }
    }

    pub fn with_restriction(mut self, r: Restriction) -> Self {
        self.restriction = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos("rtol", self.rtol)?;
        pos("max_step", self.max_step)?;
        pos("growth_budget", self.growth_budget)?;
        if !(self.atol >= 0.0) {
            return Err(Error::InvalidConfig(format!("atol must be non-negative, got {}", self.atol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorReport {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Integration window; `None` when the potential vanishes.
    pub window: Option<(f64, f64)>,
    pub steps: usize,
    pub rejected: usize,
    pub h_min: f64,
    pub h_max: f64,
    /// Stiffness estimate max Im ϖ + 2 max Re ϖ + max ‖V ϖ⁻¹‖_∞ used for step selection.
    pub rate_bound: f64,
    /// max Im ϖ × window length.
    pub growth_exponent: f64,
    pub columns: usize,
    pub seconds: f64,
}

/// The four blocks of the transfer matrix on the propagating modes.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub m11: CMatrix,
    pub m12: CMatrix,
    pub m21: CMatrix,
    pub m22: CMatrix,
    pub grid: MomentumGrid,
    pub report: IntegratorReport,
    pub restriction: Restriction,
}

impl TransferMatrix {
    pub fn identity(grid: &MomentumGrid) -> Self {
        let np = grid.propagating().len();
        Self {
            m11: CMatrix::identity(np, np),
            m12: CMatrix::zeros(np, np),
            m21: CMatrix::zeros(np, np),
            m22: CMatrix::identity(np, np),
            grid: grid.clone(),
            report: IntegratorReport::default(),
            restriction: Restriction::default(),
        }
    }

    pub fn k(&self) -> f64 {
        self.grid.k()
    }

    /// Number of propagating modes.
    pub fn len(&self) -> usize {
        self.m11.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block_operator(&self) -> BlockOperator {
        BlockOperator::from_blocks(&self.m11, &self.m12, &self.m21, &self.m22)
    }

    /// Restricts a full-grid evolution operator to the propagating modes.
    pub fn from_evolution(u: &BlockOperator, grid: &MomentumGrid, restriction: Restriction, report: IntegratorReport) -> Result<Self> {
        let n = grid.len();
        let prop = grid.propagating();
        let evan: Vec<usize> = (0..n).filter(|i| grid.propagating_position(*i).is_none()).collect();
        // Column layout expected by `reduce`: P₁, P₂, then E₂.
        let mut cols: Vec<usize> = prop.to_vec();
        cols.extend(prop.iter().map(|i| n + i));
        if restriction == Restriction::EvanescentMatched {
            cols.extend(evan.iter().map(|i| n + i));
        }
        let all: Vec<usize> = (0..2 * n).collect();
        let sub = submatrix(u.matrix(), &all, &cols);
        reduce(&sub, grid, restriction, report)
    }

    /// 2×2 matrix of a d = 0 transfer matrix.
    pub fn as_2x2(&self) -> Option<Matrix2<C64>> {
        (self.len() == 1 && self.grid.d() == 0)
            .then(|| Matrix2::new(self.m11[(0, 0)], self.m12[(0, 0)], self.m21[(0, 0)], self.m22[(0, 0)]))
    }
}

/// Reduces integrated columns (layout P₁, P₂[, E₂], all 2N rows) to M.
fn reduce(cols: &CMatrix, grid: &MomentumGrid, restriction: Restriction, report: IntegratorReport) -> Result<TransferMatrix> {
    let n = grid.len();
    let prop = grid.propagating();
    let np = prop.len();
    let rows_p: Vec<usize> = prop.iter().copied().chain(prop.iter().map(|i| n + i)).collect();
    let cp: Vec<usize> = (0..2 * np).collect();
    let mut m = submatrix(cols, &rows_p, &cp);
    let ne = cols.ncols() - 2 * np;
    if restriction == Restriction::EvanescentMatched && ne > 0 {
        let evan_rows: Vec<usize> = (0..n).filter(|i| grid.propagating_position(*i).is_none()).map(|i| n + i).collect();
        let ce: Vec<usize> = (2 * np..2 * np + ne).collect();
        let u_ee = submatrix(cols, &evan_rows, &ce);
        let u_ep = submatrix(cols, &evan_rows, &cp);
        let u_pe = submatrix(cols, &rows_p, &ce);
        let lu = u_ee.lu();
        let sol = lu.solve(&u_ep).ok_or(Error::NonFinite { x: report.window.map_or(0.0, |w| w.1) })?;
        m -= &u_pe * sol;
    }
    if !is_finite(&m) {
        return Err(Error::NonFinite { x: report.window.map_or(0.0, |w| w.1) });
    }
    let b = |r: usize, c: usize| m.view((r * np, c * np), (np, np)).into_owned();
    Ok(TransferMatrix { m11: b(0, 0), m12: b(0, 1), m21: b(1, 0), m22: b(1, 1), grid: grid.clone(), report, restriction })
}

/// Pieces between consecutive breakpoints inside `[a, b]`.
fn pieces(a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

fn check_growth(grid: &MomentumGrid, window: (f64, f64), budget: f64) -> Result<f64> {
    let fam = grid.varpi_family();
    let (idx, max_imag) = fam.imag.iter().copied().enumerate().fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let exponent = max_imag * (window.1 - window.0);
    if exponent > budget {
        return Err(Error::GrowthBudget { shell: grid.norm(idx), exponent, budget });
    }
    Ok(exponent)
}

/// Samples the coupling norm to bound the rate of change of U.
fn rate_bound(ham: &EffectiveHamiltonian, pieces: &[(f64, f64)]) -> Result<f64> {
    let fam = ham.varpi();
    let free = fam.max_imag() + 2.0 * fam.real.iter().copied().fold(0.0, f64::max);
    let mut coupling: f64 = 0.0;
    for &(a, b) in pieces {
        let mid = 0.5 * (a + b);
        for s in 0..=16 {
            let x = a + (b - a) * s as f64 / 16.0;
            coupling = coupling.max(ham.generator(Locus::within(x, mid))?.coupling_norm());
        }
    }
    Ok(free + coupling)
}

struct Workspace {
    k: [CMatrix; 7],
    tmp: CMatrix,
    scratch: Scratch,
}

impl Workspace {
    fn new(rows: usize, cols: usize) -> Self {
        let z = || CMatrix::zeros(rows, cols);
        Self { k: [z(), z(), z(), z(), z(), z(), z()], tmp: z(), scratch: Scratch::default() }
    }
}

/// `out = y + Σ c_i k_i`.
fn combine(out: &mut CMatrix, y: &CMatrix, terms: &[(&CMatrix, f64)]) {
    out.copy_from(y);
    for (k, c) in terms {
        if *c != 0.0 {
            out.zip_apply(*k, |o, v| *o += v * *c);
        }
    }
}

fn apply(g: &Generator, y: &CMatrix, out: &mut CMatrix, scratch: &mut Scratch) {
    g.apply(y, out, scratch);
}

/// Propagates the columns `y` from `window.0` to `window.1`.
fn propagate(
    ham: &EffectiveHamiltonian,
    window: (f64, f64),
    breaks: &[f64],
    mut y: CMatrix,
    stepper: &Stepper,
) -> Result<(CMatrix, IntegratorReport)> {
    let start = Instant::now();
    let pcs = pieces(window.0, window.1, breaks);
    let lambda = rate_bound(ham, &pcs)?;
    let mut report = IntegratorReport {
        method: stepper.method,
        rtol: stepper.rtol,
        atol: stepper.atol,
        window: Some(window),
        h_min: f64::INFINITY,
        h_max: 0.0,
        rate_bound: lambda,
        columns: y.ncols(),
        ..Default::default()
    };
    let mut ws = Workspace::new(y.nrows(), y.ncols());
    for &(a, b) in &pcs {
        match stepper.method {
            Method::Rk4 => rk4_piece(ham, a, b, lambda, &mut y, stepper, &mut ws, &mut report)?,
            Method::Dopri5 => dopri5_piece(ham, a, b, lambda, &mut y, stepper, &mut ws, &mut report)?,
        }
        if !is_finite(&y) {
            return Err(Error::NonFinite { x: b });
        }
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok((y, report))
}

/// hλ = 5·rtol^{1/4} puts the global relative error of M near rtol/10 on the
/// smooth and piecewise test potentials (measured; the error is ∝ h⁴).
const RK4_SCALE: f64 = 5.0;

#[allow(clippy::too_many_arguments)]
fn rk4_piece(
    ham: &EffectiveHamiltonian,
    a: f64,
    b: f64,
    lambda: f64,
    y: &mut CMatrix,
    stepper: &Stepper,
    ws: &mut Workspace,
    report: &mut IntegratorReport,
) -> Result<()> {
    let mid = 0.5 * (a + b);
    let h_target = stepper.max_step.min((RK4_SCALE * stepper.rtol.powf(0.25)).min(1.0) / lambda.max(f64::MIN_POSITIVE));
    let steps = ((b - a) / h_target).ceil().max(1.0) as usize;
    let h = (b - a) / steps as f64;
    report.h_min = report.h_min.min(h);
    report.h_max = report.h_max.max(h);
    let at = |x: f64| Locus::within(x, mid);
    let mut g0 = ham.generator(at(a))?;
    for s in 0..steps {
        let x = a + s as f64 * h;
        let x1 = if s + 1 == steps { b } else { a + (s + 1) as f64 * h };
        let gm = ham.generator(at(0.5 * (x + x1)))?;
        let g1 = ham.generator(at(x1))?;
        let [k1, k2, k3, k4, ..] = &mut ws.k;
        apply(&g0, y, k1, &mut ws.scratch);
        combine(&mut ws.tmp, y, &[(k1, 0.5 * h)]);
        apply(&gm, &ws.tmp, k2, &mut ws.scratch);
        combine(&mut ws.tmp, y, &[(k2, 0.5 * h)]);
        apply(&gm, &ws.tmp, k3, &mut ws.scratch);
        combine(&mut ws.tmp, y, &[(k3, h)]);
        apply(&g1, &ws.tmp, k4, &mut ws.scratch);
        let (c1, c2) = (h / 6.0, h / 3.0);
        y.zip_zip_apply(k1, k2, |v, p, q| *v += p * c1 + q * c2);
        y.zip_zip_apply(k3, k4, |v, p, q| *v += p * c2 + q * c1);
        g0 = g1;
        report.steps += 1;
    }
    Ok(())
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// b - b* (fifth minus embedded fourth order weights).
const DP_E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

#[allow(clippy::too_many_arguments)]
fn dopri5_piece(
    ham: &EffectiveHamiltonian,
    a: f64,
    b: f64,
    lambda: f64,
    y: &mut CMatrix,
    stepper: &Stepper,
    ws: &mut Workspace,
    report: &mut IntegratorReport,
) -> Result<()> {
    let mid = 0.5 * (a + b);
    let at = |x: f64| Locus::within(x, mid);
    let mut x = a;
    let mut h = stepper.max_step.min(stepper.rtol.powf(0.2) / lambda.max(f64::MIN_POSITIVE)).min(b - a);
    let h_floor = 1e-12 * (b - a).max(1.0);
    let stiffest = {
        let fam = ham.varpi();
        let i = (0..fam.len()).max_by(|&i, &j| fam.imag[i].total_cmp(&fam.imag[j])).unwrap_or(0);
        ham.grid().norm(i)
    };
    let mut y_new = y.clone();
    let mut err = y.clone();
    let mut have_k0 = false;
    while x < b {
        let last = x + h >= b;
        let step = if last { b - x } else { h };
        if !have_k0 {
            let g = ham.generator(at(x))?;
            apply(&g, y, &mut ws.k[0], &mut ws.scratch);
        }
        for s in 1..7 {
            let (done, rest) = ws.k.split_at_mut(s);
            let terms: Vec<(&CMatrix, f64)> = (0..s).map(|j| (&done[j], step * DP_A[s][j])).collect();
            combine(&mut ws.tmp, y, &terms);
            let xs = if s >= 5 { x + step } else { x + DP_C[s] * step };
            let g = ham.generator(at(xs))?;
            apply(&g, &ws.tmp, &mut rest[0], &mut ws.scratch);
            if s == 6 {
                // Stage 6 input is the fifth-order solution (FSAL).
                y_new.copy_from(&ws.tmp);
            }
        }
        err.fill(ZERO);
        for (j, e) in DP_E.iter().enumerate() {
            if *e != 0.0 {
                err.zip_apply(&ws.k[j], |o, v| *o += v * (step * e));
            }
        }
        let mut ratio: f64 = 0.0;
        for ((e, y0), y1) in err.iter().zip(y.iter()).zip(y_new.iter()) {
            let scale = stepper.atol + stepper.rtol * y0.norm().max(y1.norm());
            ratio = ratio.max(e.norm() / scale);
        }
        if !ratio.is_finite() {
            return Err(Error::NonFinite { x });
        }
        if ratio <= 1.0 {
            std::mem::swap(y, &mut y_new);
            ws.k.swap(0, 6);
            have_k0 = true;
            x = if last { b } else { x + step };
            report.steps += 1;
            report.h_min = report.h_min.min(step);
            report.h_max = report.h_max.max(step);
        } else {
            report.rejected += 1;
            have_k0 = true;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h = (step * factor).min(stepper.max_step);
        if h < h_floor && x < b {
            return Err(Error::StepUnderflow { x, h, shell: stiffest });
        }
    }
    Ok(())
}

fn identity_columns(n: usize, cols: &[usize]) -> CMatrix {
    let mut y = CMatrix::zeros(2 * n, cols.len());
    for (j, &c) in cols.iter().enumerate() {
        y[(c, j)] = ONE;
    }
    y
}

/// The transfer matrix of `v` on `grid`.
///
/// Only the columns of U that the restriction needs are integrated: the
/// propagating columns of both blocks, plus the block-2 evanescent columns for
/// [`Restriction::EvanescentMatched`].
pub fn integrate_transfer(v: &PotentialModel, grid: &MomentumGrid, stepper: &Stepper) -> Result<TransferMatrix> {
    stepper.validate()?;
    let Some(window) = v.support_bounds() else {
        return Ok(TransferMatrix { restriction: stepper.restriction, ..TransferMatrix::identity(grid) });
    };
    let growth = check_growth(grid, window, stepper.growth_budget)?;
    let ham = EffectiveHamiltonian::new(v, grid)?;
    let n = grid.len();
    let prop = grid.propagating();
    let mut cols: Vec<usize> = prop.to_vec();
    cols.extend(prop.iter().map(|i| n + i));
    if stepper.restriction == Restriction::EvanescentMatched {
        cols.extend((0..n).filter(|i| grid.propagating_position(*i).is_none()).map(|i| n + i));
    }
    let (y, mut report) = propagate(&ham, window, &v.breakpoints(), identity_columns(n, &cols), stepper)?;
    report.growth_exponent = growth;
    reduce(&y, grid, stepper.restriction, report)
}

/// Full-grid evolution operator U(x1, x0).
pub fn evolve(v: &PotentialModel, grid: &MomentumGrid, stepper: &Stepper, x0: f64, x1: f64) -> Result<(BlockOperator, IntegratorReport)> {
    stepper.validate()?;
    if !(x1 >= x0) {
        return Err(Error::InvalidConfig(format!("evolution window [{x0}, {x1}] is reversed")));
    }
    let n = grid.len();
    if x1 == x0 {
        return Ok((BlockOperator::identity(n), IntegratorReport::default()));
    }
    let growth = check_growth(grid, (x0, x1), stepper.growth_budget)?;
    let ham = EffectiveHamiltonian::new(v, grid)?;
    let cols: Vec<usize> = (0..2 * n).collect();
    let (y, mut report) = propagate(&ham, (x0, x1), &v.breakpoints(), identity_columns(n, &cols), stepper)?;
    report.growth_exponent = growth;
    Ok((BlockOperator::from_matrix(y), report))
}

/// Full-grid U across the support together with its restriction.
pub fn integrate_transfer_full(v: &PotentialModel, grid: &MomentumGrid, stepper: &Stepper) -> Result<(BlockOperator, TransferMatrix)> {
    let Some((a, b)) = v.support_bounds() else {
        return Ok((BlockOperator::identity(grid.len()), TransferMatrix::identity(grid)));
    };
    let (u, report) = evolve(v, grid, stepper, a, b)?;
    let m = TransferMatrix::from_evolution(&u, grid, stepper.restriction, report)?;
    Ok((u, m))
}

/// 2×2 transfer matrix of a one-dimensional potential.
pub fn transfer_1d(v: &PotentialModel, k: f64, stepper: &Stepper) -> Result<(Matrix2<C64>, IntegratorReport)> {
    let grid = MomentumGrid::build(&ScatteringConfig::one_dimensional(k))?;
    let m = integrate_transfer(v, &grid, stepper)?;
    let m2 = m.as_2x2().expect("one-point grid");
    Ok((m2, m.report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matmul, relative_residual};
    use crate::potential::{seeded_mixture, Profile};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn barrier(v0: f64, l: f64) -> PotentialModel {
        PotentialModel::XOnly { profile: Profile::Slab { left: 0.0, right: l, value: c(v0, 0.0) } }
    }

    #[test]
    fn zero_potential_gives_identity() {
        let (m, rep) = transfer_1d(&PotentialModel::Zero, 1.3, &Stepper::default()).unwrap();
        assert_eq!(m, Matrix2::identity());
        assert_eq!(rep.steps, 0);
        let grid = MomentumGrid::build(&ScatteringConfig::new(1.0, 1, 8)).unwrap();
        let t = integrate_transfer(&PotentialModel::Zero, &grid, &Stepper::default()).unwrap();
        assert_eq!(t.block_operator(), BlockOperator::identity(4));
    }

    #[test]
    fn determinant_error_tracks_tolerance() {
        let v = PotentialModel::XOnly { profile: Profile::Gaussian { amplitude: c(1.2, 0.7), center: 0.0, width: 0.6 } };
        let errs: Vec<f64> = [1e-6, 1e-8, 1e-10]
            .iter()
            .map(|&rtol| {
                let (m, _) = transfer_1d(&v, 1.5, &Stepper::rk4(rtol)).unwrap();
                (m.determinant() - ONE).norm()
            })
            .collect();
        assert!(errs[2] < 1e-9, "{errs:?}");
        assert!(errs[0] > 10.0 * errs[1] && errs[1] > 10.0 * errs[2], "{errs:?}");
    }

    #[test]
    fn adaptive_and_fixed_steppers_agree() {
        let v = barrier(1.0, 2.0);
        let (a, _) = transfer_1d(&v, 2.0, &Stepper::rk4(1e-11)).unwrap();
        let (b, rep) = transfer_1d(&v, 2.0, &Stepper::dopri5(1e-11, 1e-13)).unwrap();
        assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        assert!(rep.steps > 0);
    }

    #[test]
    fn composition_on_the_full_grid() {
        let grid = MomentumGrid::build(&ScatteringConfig::new(1.0, 1, 12)).unwrap();
        let v = PotentialModel::GaussianMixture { bumps: seeded_mixture(7, 3, 1, 0.5) };
        let (a, b) = v.support_bounds().unwrap();
        let xm = 0.3 * a + 0.7 * b;
        let st = Stepper::rk4(1e-10);
        let (u, _) = evolve(&v, &grid, &st, a, b).unwrap();
        let (u1, _) = evolve(&v, &grid, &st, a, xm).unwrap();
        let (u2, _) = evolve(&v, &grid, &st, xm, b).unwrap();
        let r = relative_residual(u.matrix(), &matmul(u2.matrix(), u1.matrix()));
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn column_subset_matches_full_restriction() {
        let grid = MomentumGrid::build(&ScatteringConfig::new(1.0, 1, 12)).unwrap();
        let v = PotentialModel::GaussianMixture { bumps: seeded_mixture(3, 3, 1, 0.5) };
        for r in [Restriction::EvanescentMatched, Restriction::Plain] {
            let st = Stepper::rk4(1e-10).with_restriction(r);
            let fast = integrate_transfer(&v, &grid, &st).unwrap();
            let (_, full) = integrate_transfer_full(&v, &grid, &st).unwrap();
            assert!(relative_residual(fast.block_operator().matrix(), full.block_operator().matrix()) < 1e-12);
        }
    }

    #[test]
    fn matched_transfer_matrix_is_window_independent() {
        let grid = MomentumGrid::build(&ScatteringConfig::new(1.0, 1, 12)).unwrap();
        let v = PotentialModel::GaussianMixture { bumps: seeded_mixture(3, 3, 1, 0.5) };
        let st = Stepper::rk4(1e-10);
        let (a, b) = v.support_bounds().unwrap();
        let m = integrate_transfer(&v, &grid, &st).unwrap();
        let (u, rep) = evolve(&v, &grid, &st, a - 1.0, b + 0.5).unwrap();
        let wide = TransferMatrix::from_evolution(&u, &grid, Restriction::EvanescentMatched, rep).unwrap();
        let r = relative_residual(m.block_operator().matrix(), wide.block_operator().matrix());
        assert!(r < 1e-9, "{r}");
    }

    #[test]
    fn growth_budget_is_enforced() {
        let grid = MomentumGrid::build(&ScatteringConfig::new(1.0, 1, 10).with_p_max(8.0)).unwrap();
        let v = barrier(0.1, 10.0);
        let st = Stepper { growth_budget: 5.0, ..Stepper::default() };
        assert!(matches!(integrate_transfer(&v, &grid, &st), Err(Error::GrowthBudget { .. })));
    }

    #[test]
    fn invalid_stepper_is_rejected() {
        let st = Stepper { rtol: 0.0, ..Stepper::default() };
        assert!(matches!(transfer_1d(&barrier(1.0, 1.0), 1.0, &st), Err(Error::InvalidConfig(_))));
    }
}
