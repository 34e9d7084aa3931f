//! One-dimensional position-space solvers for −ψ'' + v ψ = k² ψ.
//!
//! Asymptotics ψ → A± e^{ikx} + B± e^{−ikx} as x → ±∞; M maps (A₋, B₋) to (A₊, B₊).

use nalgebra::Matrix2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{C64, I, ONE};
use crate::potential::{Locus, PotentialModel, Segment};

#[derive(Clone, Debug, Serialize)]
pub struct Oracle1DResult {
    #[serde(serialize_with = "ser_matrix2")]
    pub m: Matrix2<C64>,
    #[serde(with = "crate::serde_complex")]
    pub r_left: C64,
    #[serde(with = "crate::serde_complex")]
    pub t_left: C64,
    #[serde(with = "crate::serde_complex")]
    pub r_right: C64,
    #[serde(with = "crate::serde_complex")]
    pub t_right: C64,
    /// max |W(x) − W(x₀)| / |W(x₀)| along the integration (0 for exact matching).
    pub wronskian_drift: f64,
}

fn ser_matrix2<S: serde::Serializer>(m: &Matrix2<C64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
        .iter()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .serialize(s)
}

impl Oracle1DResult {
    /// R/T coefficients read off a 2×2 transfer matrix.
    pub fn from_m(m: Matrix2<C64>, wronskian_drift: f64) -> Self {
        let (m11, m12, m21, m22) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        Self { m, r_left: -m21 / m22, t_left: (m11 * m22 - m12 * m21) / m22, r_right: m12 / m22, t_right: ONE / m22, wronskian_drift }
    }
}

/// Values (ψ, ψ') of e^{iκx}, e^{−iκx} at x, as columns.
fn plane_waves(kappa: C64, x: f64) -> Matrix2<C64> {
    let e = (I * kappa * x).exp();
    let f = (-I * kappa * x).exp();
    Matrix2::new(e, f, I * kappa * e, -I * kappa * f)
}

fn plane_waves_inv(kappa: C64, x: f64) -> Matrix2<C64> {
    let e = (I * kappa * x).exp();
    let f = (-I * kappa * x).exp();
    let h = 0.5 / (I * kappa);
    Matrix2::new(0.5 * f, h * f, 0.5 * e, -h * e)
}

/// √(k² − v) on the branch with non-negative imaginary part.
fn local_wavenumber(k: f64, v: C64) -> C64 {
    let z = (C64::new(k * k, 0.0) - v).sqrt();
    if z.im < 0.0 {
        -z
    } else {
        z
    }
}

/// Exact transfer matrix of a piecewise-constant potential by matching
/// e^{±iκx} at every interface.
pub fn match_piecewise_1d(segments: &[Segment], k: f64) -> Result<Oracle1DResult> {
    if !(k > 0.0) {
        return Err(Error::InvalidConfig(format!("k must be positive, got {k}")));
    }
    let mut segs = segments.to_vec();
    segs.sort_by(|a, b| a.left.total_cmp(&b.left));
    for (i, s) in segs.iter().enumerate() {
        if !(s.left < s.right) {
            return Err(Error::InvalidConfig(format!("segment {i} is empty")));
        }
        if i > 0 && s.left < segs[i - 1].right {
            return Err(Error::InvalidConfig("segments overlap".into()));
        }
    }
    // Regions in order: free, seg, (gap), seg, ..., free. Each interface maps
    // coefficients of the region on its left to those on its right.
    let free = C64::new(k, 0.0);
    let mut m = Matrix2::identity();
    let mut current = free;
    for (i, s) in segs.iter().enumerate() {
        let kappa = local_wavenumber(k, s.value);
        if kappa.norm() < 1e-12 * k {
            return Err(Error::VanishingWavenumber { segment: i });
        }
        m = plane_waves_inv(kappa, s.left) * plane_waves(current, s.left) * m;
        let next_left = segs.get(i + 1).map(|n| n.left);
        let after = if next_left == Some(s.right) { local_wavenumber(k, segs[i + 1].value) } else { free };
        m = plane_waves_inv(after, s.right) * plane_waves(kappa, s.right) * m;
        // For adjacent segments the next left interface maps κ to itself (identity).
        current = after;
    }
    Ok(Oracle1DResult::from_m(m, 0.0))
}

/// Integrates two solutions of −ψ'' + vψ = k²ψ across `span` with classical
/// RK4 on (ψ, ψ'), seeded with e^{ikx} and e^{−ikx} at the left end, and reads
/// off M at the right end.
///
/// `steps_per_unit` is a floor; the step also satisfies h·max|κ| ≤ 2·10⁻³.
pub fn integrate_schrodinger_1d(v: &PotentialModel, k: f64, span: (f64, f64), steps_per_unit: usize) -> Result<Oracle1DResult> {
    if !(k > 0.0) {
        return Err(Error::InvalidConfig(format!("k must be positive, got {k}")));
    }
    let (a, b) = span;
    if !(b > a) {
        return Ok(Oracle1DResult::from_m(Matrix2::identity(), 0.0));
    }
    let mut cuts = vec![a];
    cuts.extend(v.breakpoints().into_iter().filter(|&x| x > a && x < b));
    cuts.push(b);

    let pot = |x: f64, hint: f64| -> Result<C64> {
        v.value_at(Locus::within(x, hint), &[]).ok_or_else(|| Error::InvalidConfig("potential has no position-space form".into()))
    };
    // Columns: solution seeded with e^{ikx}, and with e^{-ikx}.
    let mut y = plane_waves(C64::new(k, 0.0), a);
    let w0 = y.determinant();
    let mut drift: f64 = 0.0;
    let rhs = |x: f64, hint: f64, y: &Matrix2<C64>| -> Result<Matrix2<C64>> {
        let q = pot(x, hint)? - k * k;
        Ok(Matrix2::new(y[(1, 0)], y[(1, 1)], q * y[(0, 0)], q * y[(0, 1)]))
    };
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let mut vmax: f64 = 0.0;
        for s in 0..=32 {
            vmax = vmax.max(pot(lo + (hi - lo) * s as f64 / 32.0, mid)?.norm());
        }
        let kappa = (k * k + vmax).sqrt();
        let n = (((hi - lo) * steps_per_unit as f64).ceil() as usize).max(((hi - lo) * kappa / 2e-3).ceil() as usize).max(1);
        let h = (hi - lo) / n as f64;
        for s in 0..n {
            let x = lo + s as f64 * h;
            let x1 = if s + 1 == n { hi } else { lo + (s + 1) as f64 * h };
            let xm = 0.5 * (x + x1);
            let (half, full, two) = (C64::from(0.5 * h), C64::from(h), C64::from(2.0));
            let k1 = rhs(x, mid, &y)?;
            let k2 = rhs(xm, mid, &(y + k1 * half))?;
            let k3 = rhs(xm, mid, &(y + k2 * half))?;
            let k4 = rhs(x1, mid, &(y + k3 * full))?;
            y += (k1 + k2 * two + k3 * two + k4) * C64::from(h / 6.0);
            drift = drift.max((y.determinant() - w0).norm() / w0.norm());
        }
    }
    // (ψ, ψ')(b) = P_k(b) (A₊, B₊), columns for the two seeds.
    let m = plane_waves_inv(C64::new(k, 0.0), b) * y;
    Ok(Oracle1DResult::from_m(m, drift))
}

/// Transfer matrix of g·δ(x − x₀): M = I + (g/2ik) [[1, e^{−2ikx₀}], [−e^{2ikx₀}, −1]].
pub fn delta_transfer(g: C64, x0: f64, k: f64) -> Matrix2<C64> {
    let c = g / (2.0 * I * k);
    let e = C64::from_polar(1.0, 2.0 * k * x0);
    Matrix2::new(ONE + c, c * e.conj(), -c * e, ONE - c)
}

/// Convenience wrapper: oracle for a potential whose x-profile is piecewise constant.
pub fn match_potential_1d(v: &PotentialModel, k: f64) -> Result<Oracle1DResult> {
    let segs = v.constant_segments().ok_or_else(|| Error::InvalidConfig("potential is not piecewise constant in x".into()))?;
    match_piecewise_1d(&segs, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::potential::Profile;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn no_segments_is_the_identity() {
        let r = match_piecewise_1d(&[], 1.0).unwrap();
        assert_eq!(r.m, Matrix2::identity());
        assert_eq!(r.r_left, ZERO);
        assert_eq!(r.t_left, ONE);
    }

    #[test]
    fn barrier_matching_is_unimodular_and_flux_conserving() {
        let seg = [Segment { left: 0.0, right: 2.0, value: c(1.0, 0.0) }];
        let r = match_piecewise_1d(&seg, 2.0).unwrap();
        assert!((r.m.determinant() - ONE).norm() < 1e-14);
        assert!((r.r_left.norm_sqr() + r.t_left.norm_sqr() - 1.0).abs() < 1e-14);
        // Textbook square barrier transmission for k² > v₀.
        let (k, v0, l) = (2.0f64, 1.0f64, 2.0f64);
        let q = (k * k - v0).sqrt();
        let t_abs2 = 1.0 / (1.0 + v0 * v0 * (q * l).sin().powi(2) / (4.0 * k * k * q * q));
        assert!((r.t_left.norm_sqr() - t_abs2).abs() < 1e-14);
    }

    #[test]
    fn adjacent_segments_match_a_merged_segment() {
        let split = [Segment { left: 0.0, right: 0.7, value: c(0.5, 0.2) }, Segment { left: 0.7, right: 1.5, value: c(0.5, 0.2) }];
        let merged = [Segment { left: 0.0, right: 1.5, value: c(0.5, 0.2) }];
        let a = match_piecewise_1d(&split, 1.3).unwrap();
        let b = match_piecewise_1d(&merged, 1.3).unwrap();
        assert!((a.m - b.m).norm() < 1e-13);
    }

    #[test]
    fn vanishing_wavenumber_is_reported() {
        let seg = [Segment { left: 0.0, right: 1.0, value: c(4.0, 0.0) }];
        assert!(matches!(match_piecewise_1d(&seg, 2.0), Err(Error::VanishingWavenumber { segment: 0 })));
    }

    #[test]
    fn ode_agrees_with_matching() {
        let v = PotentialModel::XOnly {
            profile: Profile::Piecewise {
                segments: vec![
                    Segment { left: -0.5, right: 0.3, value: c(1.5, -0.4) },
                    Segment { left: 0.3, right: 1.0, value: c(-0.7, 0.9) },
                ],
            },
        };
        let exact = match_potential_1d(&v, 1.1).unwrap();
        let ode = integrate_schrodinger_1d(&v, 1.1, (-1.0, 1.5), 100).unwrap();
        for (a, b) in [(exact.r_left, ode.r_left), (exact.t_left, ode.t_left), (exact.r_right, ode.r_right)] {
            assert!((a - b).norm() < 1e-9 * a.norm().max(1.0), "{a} vs {b}");
        }
        assert!(ode.wronskian_drift < 1e-9);
    }

    #[test]
    fn free_ode_has_trivial_coefficients() {
        let r = integrate_schrodinger_1d(&PotentialModel::Zero, 1.0, (-1.0, 1.0), 100).unwrap();
        assert!((r.m - Matrix2::identity()).norm() < 1e-12);
    }

    #[test]
    fn narrow_barrier_converges_to_delta() {
        let (g, x0, k) = (c(0.8, -0.3), 0.4, 1.7);
        let want = delta_transfer(g, x0, k);
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let seg = [Segment { left: x0 - eps / 2.0, right: x0 + eps / 2.0, value: g / eps }];
            let err = (match_piecewise_1d(&seg, k).unwrap().m - want).norm();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn delta_matrix_is_unimodular() {
        let m = delta_transfer(c(0.8, -0.3), 0.4, 1.7);
        assert!((m.determinant() - ONE).norm() < 1e-15);
    }
}
