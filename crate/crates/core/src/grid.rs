//! Transverse momentum lattice and the dispersion function ϖ(p).
//!
//! The lattice lives on `[-p_max, p_max]^d` with spacing `Δp = 2 p_max / n` and,
//! by default, a half-cell stagger so that the origin is not a node. Every node
//! `p` has its mirror `-p` in the lattice, which the symmetry checks rely on.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Default relative half-width of the band around `|p| = k` that no node may enter.
pub const DEFAULT_EXCLUSION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringConfig {
    /// Wavenumber, > 0.
    pub k: f64,
    /// Transverse dimension: 0 (plain 1D), 1 (2D) or 2 (3D).
    pub d: usize,
    /// Momentum cutoff, >= k.
    pub p_max: f64,
    /// Nodes per transverse axis; even.
    pub n_per_axis: usize,
    /// Half-cell stagger (default on).
    #[serde(default = "default_true")]
    pub grid_offset: bool,
    /// Relative width of the forbidden band around |p| = k.
    #[serde(default = "default_exclusion")]
    pub exclusion: f64,
}

fn default_true() -> bool {
    true
}

fn default_exclusion() -> f64 {
    DEFAULT_EXCLUSION
}

impl ScatteringConfig {
    /// `p_max = 2k`, staggered.
    pub fn new(k: f64, d: usize, n_per_axis: usize) -> Self {
        Self { k, d, p_max: 2.0 * k, n_per_axis, grid_offset: true, exclusion: DEFAULT_EXCLUSION }
    }

    pub fn one_dimensional(k: f64) -> Self {
        Self { k, d: 0, p_max: k, n_per_axis: 2, grid_offset: true, exclusion: DEFAULT_EXCLUSION }
    }

    pub fn with_p_max(mut self, p_max: f64) -> Self {
        self.p_max = p_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::InvalidConfig(format!("k must be positive, got {}", self.k)));
        }
        if self.d > 2 {
            return Err(Error::InvalidConfig(format!("d must be 0, 1 or 2, got {}", self.d)));
        }
        if self.d > 0 {
            if !(self.p_max.is_finite() && self.p_max >= self.k) {
                return Err(Error::InvalidConfig(format!("p_max = {} must be >= k = {}", self.p_max, self.k)));
            }
            if self.n_per_axis == 0 || !self.n_per_axis.is_multiple_of(2) {
                return Err(Error::InvalidConfig(format!("n_per_axis must be even and positive, got {}", self.n_per_axis)));
            }
        }
        if !(self.exclusion >= 0.0) {
            return Err(Error::InvalidConfig("exclusion band must be non-negative".into()));
        }
        Ok(())
    }
}

/// ϖ(p) = sqrt(k² - p²) inside the disk |p| < k, i sqrt(p² - k²) outside.
pub fn varpi(p: &[f64], k: f64) -> C64 {
    varpi_sq(p.iter().map(|c| c * c).sum(), k)
}

fn varpi_sq(p2: f64, k: f64) -> C64 {
    let k2 = k * k;
    if p2 < k2 {
        C64::new((k2 - p2).sqrt(), 0.0)
    } else {
        C64::new(0.0, (p2 - k2).sqrt())
    }
}

#[derive(Clone, Debug)]
pub struct MomentumGrid {
    d: usize,
    k: f64,
    spacing: f64,
    n_per_axis: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    propagating: Vec<usize>,
    parity_perm: Vec<usize>,
    mean_inverse_varpi: Vec<C64>,
}

impl MomentumGrid {
    pub fn build(cfg: &ScatteringConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.d == 0 {
            return Ok(Self {
                d: 0,
                k: cfg.k,
                spacing: 0.0,
                n_per_axis: 1,
                points: vec![Vec::new()],
                weights: vec![1.0],
                propagating: vec![0],
                parity_perm: vec![0],
                mean_inverse_varpi: vec![C64::new(1.0 / cfg.k, 0.0)],
            });
        }

        let n = cfg.n_per_axis;
        let spacing = 2.0 * cfg.p_max / n as f64;
        let half = 0.5 * spacing;
        // Integer multiples of half a cell so mirrored nodes are exact negatives.
        let axis: Vec<f64> = if cfg.grid_offset {
            (0..n).map(|j| (2 * j as i64 - n as i64 + 1) as f64 * half).collect()
        } else {
            (0..=n).map(|j| (j as i64 - (n / 2) as i64) as f64 * spacing).collect()
        };
        let m = axis.len();
        let mirror = |j: usize| m - 1 - j;

        let (points, parity_perm): (Vec<Vec<f64>>, Vec<usize>) = match cfg.d {
            1 => (0..m).map(|j| (vec![axis[j]], mirror(j))).unzip(),
            _ => (0..m * m)
                .map(|idx| {
                    let (a, b) = (idx / m, idx % m);
                    (vec![axis[a], axis[b]], mirror(a) * m + mirror(b))
                })
                .unzip(),
        };

        let band = cfg.exclusion * cfg.k;
        let mut propagating = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (norm - cfg.k).abs() < band || norm == cfg.k {
                return Err(Error::ResonantGrid { norm, k: cfg.k, band });
            }
            if norm < cfg.k {
                propagating.push(i);
            }
        }

        let weight = spacing.powi(cfg.d as i32);
        let mean_inverse_varpi = points
            .iter()
            .map(|p| match p.as_slice() {
                [x] => cell_inverse_varpi_1d(x.abs(), spacing, cfg.k),
                [x, y] => cell_inverse_varpi_2d(x.abs(), y.abs(), spacing, cfg.k),
                _ => unreachable!(),
            })
            .collect();
        Ok(Self {
            mean_inverse_varpi,
            d: cfg.d,
            k: cfg.k,
            spacing,
            n_per_axis: m,
            weights: vec![weight; points.len()],
            points,
            propagating,
            parity_perm,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Lattice spacing Δp (0 for the one-point grid).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices with |p| < k, in lattice order.
    pub fn propagating(&self) -> &[usize] {
        &self.propagating
    }

    pub fn parity_perm(&self) -> &[usize] {
        &self.parity_perm
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.points[i].iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn varpi(&self, i: usize) -> C64 {
        varpi(&self.points[i], self.k)
    }

    /// Position of grid index `i` inside the propagating list.
    pub fn propagating_position(&self, i: usize) -> Option<usize> {
        self.propagating.binary_search(&i).ok()
    }

    /// Nearest propagating node to `p` (max-norm distance).
    pub fn nearest_propagating(&self, p: &[f64]) -> Option<(usize, f64)> {
        self.propagating
            .iter()
            .map(|&i| {
                let dist = self.points[i].iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                (i, dist)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// ⟨1/ϖ⟩ over the quadrature cell of node i. The coupling uses this in
    /// place of 1/ϖ(p_i): 1/ϖ has an inverse-square-root singularity on |p| = k
    /// that the midpoint rule resolves only to O(√Δp).
    pub fn mean_inverse_varpi(&self, i: usize) -> C64 {
        self.mean_inverse_varpi[i]
    }

    /// ϖ̄_i := 1/⟨1/ϖ⟩, the dispersion that pairs with the coupling in the
    /// symmetry operators and the amplitude normalization. Equals ϖ(p_i) up to O(Δp²) away from |p| = k.
    pub fn cell_varpi(&self, i: usize) -> C64 {
        self.mean_inverse_varpi[i].inv()
    }

    pub fn varpi_family(&self) -> VarpiFamily {
        VarpiFamily::new(self)
    }
}

/// ∫ dp/ϖ(p) = asin(p/k) for |p| ≤ k, continued as π/2 - i·acosh(p/k) beyond; odd in p.
fn antiderivative_inverse_varpi(p: f64, k: f64) -> C64 {
    let a = p.abs();
    let v = if a <= k { C64::new((a / k).asin(), 0.0) } else { C64::new(FRAC_PI_2, -(a / k).acosh()) };
    if p < 0.0 {
        -v
    } else {
        v
    }
}

/// Mean of 1/ϖ over [c - h/2, c + h/2]. Callers pass c ≥ 0 so that mirrored
/// cells get bitwise-identical values.
fn cell_inverse_varpi_1d(c: f64, h: f64, k: f64) -> C64 {
    (antiderivative_inverse_varpi(c + 0.5 * h, k) - antiderivative_inverse_varpi(c - 0.5 * h, k)) / h
}

/// Mean of 1/ϖ over the square cell centred at (cx, cy): exact in p_y, tanh-sinh in p_x
/// with the interval split where the integrand has kinks or the log singularity at |p_x| = k.
fn cell_inverse_varpi_2d(cx: f64, cy: f64, h: f64, k: f64) -> C64 {
    let (x0, x1) = (cx - 0.5 * h, cx + 0.5 * h);
    let (y0, y1) = (cy - 0.5 * h, cy + 0.5 * h);
    let inner = |px: f64| -> C64 {
        let kappa2 = k * k - px * px;
        if kappa2 > 0.0 {
            let kappa = kappa2.sqrt();
            antiderivative_inverse_varpi(y1, kappa) - antiderivative_inverse_varpi(y0, kappa)
        } else {
            // ϖ = i√(p_y² + a²)
            let a = (-kappa2).sqrt();
            C64::new(0.0, -((y1 / a).asinh() - (y0 / a).asinh()))
        }
    };
    let mut cuts = vec![x0, x1, k, -k];
    for y in [y0, y1] {
        if y.abs() < k {
            let r = (k * k - y * y).sqrt();
            cuts.extend([r, -r]);
        }
    }
    cuts.retain(|&c| c >= x0 && c <= x1);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let total: C64 = cuts.windows(2).map(|w| tanh_sinh(&inner, w[0], w[1])).sum();
    total / (h * h)
}

/// Tanh-sinh quadrature on [a, b]; tolerates integrable endpoint singularities.
fn tanh_sinh(f: &dyn Fn(f64) -> C64, a: f64, b: f64) -> C64 {
    const STEP: f64 = 1.0 / 32.0;
    const SPAN: i32 = 128; // |t| ≤ 4
    let half = 0.5 * (b - a);
    if !(half > 0.0) {
        return C64::new(0.0, 0.0);
    }
    let mut acc = C64::new(0.0, 0.0);
    for j in -SPAN..=SPAN {
        let t = j as f64 * STEP;
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cu * cu);
        // Distance from the nearer endpoint, computed without cancellation.
        let gap = half / (u.abs().exp() * cu);
        if gap == 0.0 {
            continue;
        }
        let x = if u < 0.0 { a + gap } else { b - gap };
        if x <= a || x >= b {
            continue;
        }
        acc += f(x) * w;
    }
    acc * half * STEP
}

/// Diagonals of ϖ, ϖ_r and ϖ_i on a grid; ϖ_i := i(ϖ_r - ϖ), so ϖ = ϖ_r + i ϖ_i.
#[derive(Clone, Debug)]
pub struct VarpiFamily {
    pub full: Vec<C64>,
    pub real: Vec<f64>,
    pub imag: Vec<f64>,
}

impl VarpiFamily {
    pub fn new(grid: &MomentumGrid) -> Self {
        let full: Vec<C64> = (0..grid.len()).map(|i| grid.varpi(i)).collect();
        let real: Vec<f64> = full.iter().map(|w| w.re).collect();
        // ϖ_i := i(ϖ_r - ϖ); with ϖ purely real or purely imaginary this is Im ϖ.
        let imag: Vec<f64> = full.iter().zip(&real).map(|(w, r)| (C64::i() * (C64::new(*r, 0.0) - w)).re).collect();
        Self { full, real, imag }
    }

    pub fn len(&self) -> usize {
        self.full.len()
    }

    pub fn is_empty(&self) -> bool {
        self.full.is_empty()
    }

    pub fn max_imag(&self) -> f64 {
        self.imag.iter().cloned().fold(0.0, f64::max)
    }

    /// The three diagonal matrices (ϖ, ϖ_r, ϖ_i).
    pub fn matrices(&self) -> (crate::linalg::CMatrix, crate::linalg::CMatrix, crate::linalg::CMatrix) {
        use crate::linalg::diagonal;
        let r: Vec<C64> = self.real.iter().map(|&x| C64::new(x, 0.0)).collect();
        let i: Vec<C64> = self.imag.iter().map(|&x| C64::new(x, 0.0)).collect();
        (diagonal(&self.full), diagonal(&r), diagonal(&i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_grid_is_a_single_point() {
        let g = MomentumGrid::build(&ScatteringConfig::one_dimensional(1.3)).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.point(0).is_empty());
        assert_eq!(g.weights(), &[1.0]);
        assert_eq!(g.propagating(), &[0]);
        assert_eq!(g.parity_perm(), &[0]);
        assert_eq!(g.varpi(0), C64::new(1.3, 0.0));
    }

    #[test]
    fn staggered_line_enumeration() {
        let cfg = ScatteringConfig { k: 1.0, d: 1, p_max: 2.0, n_per_axis: 8, grid_offset: true, exclusion: 1e-6 };
        let g = MomentumGrid::build(&cfg).unwrap();
        let coords: Vec<f64> = g.points().iter().map(|p| p[0]).collect();
        assert_eq!(coords, vec![-1.75, -1.25, -0.75, -0.25, 0.25, 0.75, 1.25, 1.75]);
        let prop: Vec<f64> = g.propagating().iter().map(|&i| g.point(i)[0]).collect();
        assert_eq!(prop, vec![-0.75, -0.25, 0.25, 0.75]);
        assert!(g.weights().iter().all(|&w| w == 0.5));
    }

    #[test]
    fn varpi_branches() {
        assert_eq!(varpi(&[0.0], 1.0), C64::new(1.0, 0.0));
        assert!((varpi(&[0.6], 1.0) - C64::new(0.8, 0.0)).norm() < 1e-15);
        assert!((varpi(&[1.25], 1.0) - C64::new(0.0, 0.75)).norm() < 1e-15);
        assert!((varpi(&[0.6, 0.0], 1.0) - C64::new(0.8, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn varpi_family_on_propagating_and_evanescent_nodes() {
        let cfg = ScatteringConfig { k: 1.0, d: 1, p_max: 2.0, n_per_axis: 8, grid_offset: true, exclusion: 1e-6 };
        let g = MomentumGrid::build(&cfg).unwrap();
        let fam = g.varpi_family();
        for &i in g.propagating() {
            assert_eq!(fam.imag[i], 0.0);
        }
        // |p| = 1.25 sits at index 1 and 6.
        assert_eq!(fam.real[6], 0.0);
        assert!((fam.imag[6] - 0.75).abs() < 1e-15);
        for i in 0..g.len() {
            assert_eq!(C64::new(fam.real[i], fam.imag[i]), fam.full[i]);
        }
    }

    #[test]
    fn resonant_grid_is_rejected() {
        // Δp = 0.5 staggered puts a node at exactly 0.75 = k.
        let cfg = ScatteringConfig { k: 0.75, d: 1, p_max: 2.0, n_per_axis: 8, grid_offset: true, exclusion: 1e-6 };
        assert!(matches!(MomentumGrid::build(&cfg), Err(Error::ResonantGrid { .. })));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ScatteringConfig::new(1.0, 1, 8);
        cfg.n_per_axis = 7;
        assert!(cfg.validate().is_err());
        cfg.n_per_axis = 8;
        cfg.p_max = 0.5;
        assert!(cfg.validate().is_err());
        assert!(ScatteringConfig::new(1.0, 3, 8).validate().is_err());
        assert!(ScatteringConfig::new(-1.0, 1, 8).validate().is_err());
    }

    #[test]
    fn unstaggered_grid_contains_origin() {
        let cfg = ScatteringConfig { k: 1.1, d: 1, p_max: 2.0, n_per_axis: 8, grid_offset: false, exclusion: 1e-6 };
        let g = MomentumGrid::build(&cfg).unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.points().iter().any(|p| p[0] == 0.0));
    }

    fn arb_config() -> impl Strategy<Value = ScatteringConfig> {
        (0.3f64..3.0, 1usize..=2, 1usize..=8, 1.0f64..3.0, any::<bool>()).prop_map(|(k, d, half_n, ratio, offset)| ScatteringConfig {
            k,
            d,
            p_max: k * ratio,
            n_per_axis: 2 * half_n,
            grid_offset: offset,
            exclusion: 1e-9,
        })
    }

    proptest! {
        #[test]
        fn parity_is_an_exact_involution(cfg in arb_config()) {
            if let Ok(g) = MomentumGrid::build(&cfg) {
                let perm = g.parity_perm();
                for i in 0..g.len() {
                    prop_assert_eq!(perm[perm[i]], i);
                    let neg: Vec<f64> = g.point(i).iter().map(|c| -c).collect();
                    prop_assert_eq!(g.point(perm[i]), &neg[..]);
                    prop_assert_eq!(g.varpi(perm[i]), g.varpi(i));
                }
            }
        }

        #[test]
        fn varpi_lies_in_closed_first_quadrant(p in -5.0f64..5.0, q in -5.0f64..5.0, k in 0.1f64..3.0) {
            let w = varpi(&[p, q], k);
            prop_assert!(w.re >= 0.0 && w.im >= 0.0);
            prop_assert!(w.re == 0.0 || w.im == 0.0);
        }

        #[test]
        fn refinement_preserves_classification(cfg in arb_config()) {
            // Tripling keeps every staggered node; doubling keeps none, so use 3n.
            let mut fine = cfg.clone();
            fine.n_per_axis *= 3;
            if !cfg.grid_offset { return Ok(()); }
            if let (Ok(a), Ok(b)) = (MomentumGrid::build(&cfg), MomentumGrid::build(&fine)) {
                for i in 0..a.len() {
                    let p = a.point(i);
                    let j = b.points().iter().position(|q| q.iter().zip(p).all(|(x, y)| (x - y).abs() < 1e-12));
                    let j = j.expect("staggered node persists under tripling");
                    prop_assert_eq!(a.propagating_position(i).is_some(), b.propagating_position(j).is_some());
                }
            }
        }
    }

    /// Fine midpoint sum of 1/ϖ over a cell, offset to avoid |p| = k.
    fn brute_cell_mean(c: &[f64], h: f64, k: f64, n: usize) -> C64 {
        let sub = h / n as f64;
        let off = |j: usize, c: f64| c - 0.5 * h + (j as f64 + 0.5) * sub;
        let mut acc = C64::new(0.0, 0.0);
        let mut count = 0.0;
        if c.len() == 1 {
            for j in 0..n {
                acc += varpi(&[off(j, c[0])], k).inv();
                count += 1.0;
            }
        } else {
            for j in 0..n {
                for l in 0..n {
                    acc += varpi(&[off(j, c[0]), off(l, c[1])], k).inv();
                    count += 1.0;
                }
            }
        }
        acc / count
    }

    #[test]
    fn cell_means_match_fine_sums() {
        let k = 1.0;
        for (c, h) in [(0.3, 0.1), (0.96, 0.1), (1.02, 0.1), (1.6, 0.2)] {
            let exact = cell_inverse_varpi_1d(c, h, k);
            let fine = brute_cell_mean(&[c], h, k, 200_000);
            assert!((exact - fine).norm() < 2e-3 * exact.norm(), "c={c}: {exact} vs {fine}");
        }
        for (c, h) in [([0.2, 0.3], 0.1), ([0.68, 0.7], 0.1), ([0.75, 0.75], 0.1), ([1.1, 0.4], 0.2)] {
            let exact = cell_inverse_varpi_2d(c[0], c[1], h, k);
            let fine = brute_cell_mean(&c, h, k, 1500);
            assert!((exact - fine).norm() < 2e-3 * exact.norm(), "c={c:?}: {exact} vs {fine}");
        }
    }

    #[test]
    fn cell_means_approach_point_values_away_from_the_circle() {
        for h in [1e-2, 1e-3] {
            let m = cell_inverse_varpi_1d(0.4, h, 1.0);
            let p = varpi(&[0.4], 1.0).inv();
            assert!((m - p).norm() < h * h * p.norm());
            let m2 = cell_inverse_varpi_2d(0.4, 1.3, h, 1.0);
            let p2 = varpi(&[0.4, 1.3], 1.0).inv();
            assert!((m2 - p2).norm() < h * h * p2.norm(), "{m2} vs {p2}");
        }
    }

    #[test]
    fn cell_means_are_parity_symmetric_and_trivial_in_one_dimension() {
        let g = MomentumGrid::build(&ScatteringConfig::new(1.0, 2, 12)).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.mean_inverse_varpi(i), g.mean_inverse_varpi(g.parity_perm()[i]));
        }
        let g0 = MomentumGrid::build(&ScatteringConfig::one_dimensional(1.3)).unwrap();
        assert_eq!(g0.cell_varpi(0), C64::new(1.3, 0.0));
    }
}
