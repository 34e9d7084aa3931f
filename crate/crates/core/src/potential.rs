//! Complex short-range potentials v(x, r) and their transverse Fourier transforms
//! ṽ(x, p) = ∫ dᵈr e^{-i p·r} v(x, r).
//!
//! Transforms are returned as a [`Spectral`] value so that potentials that do
//! not depend on r (whose transform is a delta function in p) can be carried
//! exactly until they meet a grid.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::special::bessel_j;

/// Relative envelope level below which a smooth profile counts as zero.
pub const SUPPORT_LEVEL: f64 = 1e-12;

/// ṽ(p) = `regular` + `delta`·(2π)ᵈ δᵈ(p).
///
/// `delta` is only nonzero when p is exactly the origin; in d = 0 the delta
/// is the number 1 and both parts simply add.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Spectral {
    pub regular: C64,
    pub delta: C64,
}

impl Spectral {
    pub fn regular(z: C64) -> Self {
        Self { regular: z, delta: ZERO }
    }

    pub fn is_zero(&self) -> bool {
        self.regular == ZERO && self.delta == ZERO
    }
}

impl std::ops::Add for Spectral {
    type Output = Spectral;
    fn add(self, rhs: Spectral) -> Spectral {
        Spectral { regular: self.regular + rhs.regular, delta: self.delta + rhs.delta }
    }
}

impl std::ops::Mul<C64> for Spectral {
    type Output = Spectral;
    fn mul(self, rhs: C64) -> Spectral {
        Spectral { regular: self.regular * rhs, delta: self.delta * rhs }
    }
}

/// Where a potential is evaluated: the point `x` plus a point `hint` inside the
/// same smooth piece. Piecewise-constant profiles use the hint to decide which
/// side of a jump `x` belongs to, so an integrator can evaluate at both ends of
/// a piece and see the same constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Locus {
    pub x: f64,
    pub hint: f64,
}

impl Locus {
    pub fn at(x: f64) -> Self {
        Self { x, hint: x }
    }

    pub fn within(x: f64, hint: f64) -> Self {
        Self { x, hint }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub left: f64,
    pub right: f64,
    #[serde(with = "crate::serde_complex")]
    pub value: C64,
}

/// A function of x alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Profile {
    /// Constant `value` on `[left, right]`.
    Slab {
        left: f64,
        right: f64,
        #[serde(with = "crate::serde_complex")]
        value: C64,
    },
    Piecewise {
        segments: Vec<Segment>,
    },
    /// A e^{-(x-c)²/w²}
    Gaussian {
        #[serde(with = "crate::serde_complex")]
        amplitude: C64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    /// A sech²((x-c)/w)
    Sech2 {
        #[serde(with = "crate::serde_complex")]
        amplitude: C64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    /// Piecewise-linear hat rising from `left` to `amplitude` at `peak`, back to 0 at `right`.
    Triangle {
        #[serde(with = "crate::serde_complex")]
        amplitude: C64,
        left: f64,
        peak: f64,
        right: f64,
    },
    Sum {
        terms: Vec<Profile>,
    },
}

impl Profile {
    pub fn value(&self, at: Locus) -> C64 {
        let x = at.x;
        match self {
            Profile::Slab { left, right, value } => {
                if (*left..=*right).contains(&at.hint) && (*left..=*right).contains(&x) {
                    *value
                } else {
                    ZERO
                }
            }
            Profile::Piecewise { segments } => segments
                .iter()
                .find(|s| (s.left..=s.right).contains(&at.hint))
                .filter(|s| (s.left..=s.right).contains(&x))
                .map_or(ZERO, |s| s.value),
            Profile::Gaussian { amplitude, center, width } => {
                let t = (x - center) / width;
                amplitude * (-t * t).exp()
            }
            Profile::Sech2 { amplitude, center, width } => {
                let c = ((x - center) / width).cosh();
                amplitude / (c * c)
            }
            Profile::Triangle { amplitude, left, peak, right } => {
                if x < *left || x > *right {
                    ZERO
                } else if x <= *peak {
                    if peak > left {
                        amplitude * ((x - left) / (peak - left))
                    } else {
                        *amplitude
                    }
                } else {
                    amplitude * ((right - x) / (right - peak))
                }
            }
            Profile::Sum { terms } => terms.iter().map(|t| t.value(at)).sum(),
        }
    }

    /// Interval outside which the profile is below [`SUPPORT_LEVEL`] of its peak.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Profile::Slab { left, right, .. } => Some((*left, *right)),
            Profile::Piecewise { segments } => segments.iter().map(|s| (s.left, s.right)).reduce(|a, b| (a.0.min(b.0), a.1.max(b.1))),
            Profile::Gaussian { center, width, .. } => {
                let half = width.abs() * (1.0 / SUPPORT_LEVEL).ln().sqrt();
                Some((center - half, center + half))
            }
            Profile::Sech2 { center, width, .. } => {
                // sech² t < level  <=>  cosh t > level^{-1/2}
                let half = width.abs() * (1.0 / SUPPORT_LEVEL).sqrt().acosh();
                Some((center - half, center + half))
            }
            Profile::Triangle { left, right, .. } => Some((*left, *right)),
            Profile::Sum { terms } => hull(terms.iter().map(Profile::support)),
        }
    }

    /// Points where the profile or its derivative jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Profile::Slab { left, right, .. } => vec![*left, *right],
            Profile::Piecewise { segments } => segments.iter().flat_map(|s| [s.left, s.right]).collect(),
            Profile::Triangle { left, peak, right, .. } => vec![*left, *peak, *right],
            Profile::Gaussian { .. } | Profile::Sech2 { .. } => Vec::new(),
            Profile::Sum { terms } => terms.iter().flat_map(Profile::breakpoints).collect(),
        }
    }

    pub fn scaled(&self, factor: C64) -> Profile {
        match self {
            Profile::Slab { left, right, value } => Profile::Slab { left: *left, right: *right, value: value * factor },
            Profile::Piecewise { segments } => {
                Profile::Piecewise { segments: segments.iter().map(|s| Segment { value: s.value * factor, ..s.clone() }).collect() }
            }
            Profile::Gaussian { amplitude, center, width } => {
                Profile::Gaussian { amplitude: amplitude * factor, center: *center, width: *width }
            }
            Profile::Sech2 { amplitude, center, width } => Profile::Sech2 { amplitude: amplitude * factor, center: *center, width: *width },
            Profile::Triangle { amplitude, left, peak, right } => {
                Profile::Triangle { amplitude: amplitude * factor, left: *left, peak: *peak, right: *right }
            }
            Profile::Sum { terms } => Profile::Sum { terms: terms.iter().map(|t| t.scaled(factor)).collect() },
        }
    }

    /// Piecewise-constant pieces, if the profile is one.
    pub fn constant_segments(&self) -> Option<Vec<Segment>> {
        match self {
            Profile::Slab { left, right, value } => Some(vec![Segment { left: *left, right: *right, value: *value }]),
            Profile::Piecewise { segments } => Some(segments.clone()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self {
            Profile::Slab { left, right, .. } if !(left < right) => bad(format!("slab needs left < right, got [{left}, {right}]")),
            Profile::Piecewise { segments } => {
                let mut sorted: Vec<&Segment> = segments.iter().collect();
                sorted.sort_by(|a, b| a.left.total_cmp(&b.left));
                for s in &sorted {
                    if !(s.left < s.right) {
                        return bad(format!("segment [{}, {}] is empty", s.left, s.right));
                    }
                }
                for w in sorted.windows(2) {
                    if w[1].left < w[0].right {
                        return bad("piecewise segments overlap".into());
                    }
                }
                Ok(())
            }
            Profile::Gaussian { width, .. } | Profile::Sech2 { width, .. } if !(*width > 0.0) => {
                bad(format!("profile width must be positive, got {width}"))
            }
            Profile::Triangle { left, peak, right, .. } if !(left <= peak && peak <= right && left < right) => {
                bad("triangle needs left <= peak <= right".into())
            }
            Profile::Sum { terms } => terms.iter().try_for_each(Profile::validate),
            _ => Ok(()),
        }
    }
}

fn hull(it: impl Iterator<Item = Option<(f64, f64)>>) -> Option<(f64, f64)> {
    it.flatten().reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
}

/// r-dependence of a separable potential u(x)·t(r).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Transverse {
    /// t(r) = 1.
    Uniform,
    /// t(r) = e^{-|r-c|²/b²}
    Gaussian {
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
}

impl Transverse {
    pub fn spectrum(&self, p: &[f64]) -> Spectral {
        match self {
            Transverse::Uniform => {
                if p.iter().all(|&c| c == 0.0) {
                    Spectral { regular: ZERO, delta: C64::new(1.0, 0.0) }
                } else {
                    Spectral::default()
                }
            }
            Transverse::Gaussian { width, center } => Spectral::regular(gaussian_transverse(*width, center, p)),
        }
    }

    pub fn value(&self, r: &[f64]) -> f64 {
        match self {
            Transverse::Uniform => 1.0,
            Transverse::Gaussian { width, center } => {
                let s: f64 = r.iter().enumerate().map(|(i, &x)| (x - center.get(i).copied().unwrap_or(0.0)).powi(2)).sum();
                (-s / (width * width)).exp()
            }
        }
    }
}

/// ∫ dᵈr e^{-ip·r} e^{-|r-c|²/b²} = (b√π)ᵈ e^{-b²|p|²/4} e^{-ip·c}
fn gaussian_transverse(width: f64, center: &[f64], p: &[f64]) -> C64 {
    let d = p.len() as i32;
    let p2: f64 = p.iter().map(|c| c * c).sum();
    let phase: f64 = p.iter().enumerate().map(|(i, &pi)| pi * center.get(i).copied().unwrap_or(0.0)).sum();
    let mag = (width * PI.sqrt()).powi(d) * (-width * width * p2 / 4.0).exp();
    C64::from_polar(mag, -phase)
}

/// A e^{-(x-x₀)²/a²} e^{-|r-c|²/b²}
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    #[serde(with = "crate::serde_complex")]
    pub amplitude: C64,
    #[serde(default)]
    pub center_x: f64,
    pub width_x: f64,
    #[serde(default)]
    pub center_r: Vec<f64>,
    pub width_r: f64,
}

impl GaussianBump {
    fn profile(&self) -> Profile {
        Profile::Gaussian { amplitude: self.amplitude, center: self.center_x, width: self.width_x }
    }

    fn transverse(&self) -> Transverse {
        Transverse::Gaussian { width: self.width_r, center: self.center_r.clone() }
    }
}

/// Seeded random mixture of complex Gaussian bumps: amplitudes `coupling·(a + ib)`
/// with a, b uniform in [-1, 1], x-centres in [-0.5, 0.5], x-widths in
/// [0.3, 0.5], transverse centres in [-1, 1]ᵈ and widths in [0.5, 1].
pub fn seeded_mixture(seed: u64, count: usize, d: usize, coupling: f64) -> Vec<GaussianBump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let amplitude = C64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)) * coupling;
            let center_x = rng.random_range(-0.5..=0.5);
            let width_x = rng.random_range(0.3..=0.5);
            let center_r = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let width_r = rng.random_range(0.5..=1.0);
            GaussianBump { amplitude, center_x, width_x, center_r, width_r }
        })
        .collect()
}

/// Samples of v on a rectangular lattice in (x, r).
///
/// Values are stored x-major: `values[ix * n_r + ir]` where `ir` runs over the
/// transverse lattice in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPotential {
    xs: Vec<f64>,
    axes: Vec<Vec<f64>>,
    #[serde(with = "complex_vec")]
    values: Vec<C64>,
}

mod complex_vec {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?.into_iter().map(|[a, b]| C64::new(a, b)).collect())
    }
}

impl SampledPotential {
    /// Builds from (coordinates, value) rows; coordinates are `[x, r_1, .., r_d]`.
    pub fn from_rows(d: usize, rows: &[(Vec<f64>, C64)]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidSamples("no samples".into()));
        }
        let uniq = |axis: usize| -> Vec<f64> {
            let mut v: Vec<f64> = rows.iter().map(|(c, _)| c[axis]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        for (c, z) in rows {
            if c.len() != d + 1 {
                return Err(Error::InvalidSamples(format!("row has {} coordinates, expected {}", c.len(), d + 1)));
            }
            if !(z.re.is_finite() && z.im.is_finite()) || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSamples("non-finite sample".into()));
            }
        }
        let xs = uniq(0);
        let axes: Vec<Vec<f64>> = (1..=d).map(uniq).collect();
        let n_r: usize = axes.iter().map(Vec::len).product();
        if xs.len() * n_r != rows.len() {
            return Err(Error::InvalidSamples(format!(
                "{} rows do not form a rectangular lattice ({} x-values, {} transverse points)",
                rows.len(),
                xs.len(),
                n_r
            )));
        }
        for axis in &axes {
            if axis.len() < 2 {
                return Err(Error::InvalidSamples("each transverse axis needs at least two samples".into()));
            }
            let h = axis[1] - axis[0];
            if axis.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs()) {
                return Err(Error::InvalidSamples("transverse sample spacing must be uniform".into()));
            }
        }
        let mut values = vec![ZERO; rows.len()];
        let mut seen = vec![false; rows.len()];
        for (c, z) in rows {
            let ix = xs.binary_search_by(|v| v.total_cmp(&c[0])).unwrap();
            let mut ir = 0;
            for (a, axis) in axes.iter().enumerate() {
                ir = ir * axis.len() + axis.binary_search_by(|v| v.total_cmp(&c[a + 1])).unwrap();
            }
            let slot = ix * n_r + ir;
            if seen[slot] {
                return Err(Error::InvalidSamples("duplicate sample point".into()));
            }
            seen[slot] = true;
            values[slot] = *z;
        }
        Ok(Self { xs, axes, values })
    }

    /// Reads CSV with header `x[,y[,z]],re_v,im_v`; the transverse dimension
    /// is the number of columns minus three.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let cols = reader.headers()?.len();
        if !(3..=5).contains(&cols) {
            return Err(Error::InvalidSamples(format!("expected 3 to 5 columns, found {cols}")));
        }
        let d = cols - 3;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidSamples(format!("bad number {s:?}: {e}"))))
                .collect::<Result<_>>()?;
            rows.push((nums[..=d].to_vec(), C64::new(nums[d + 1], nums[d + 2])));
        }
        Self::from_rows(d, &rows)
    }

    /// Reads JSON `{"d": 1, "rows": [[x, y, re, im], ...]}`.
    pub fn from_json(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            d: usize,
            rows: Vec<Vec<f64>>,
        }
        let file: File = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        let mut rows = Vec::with_capacity(file.rows.len());
        for r in &file.rows {
            if r.len() != file.d + 3 {
                return Err(Error::InvalidSamples(format!("row of length {} for d = {}", r.len(), file.d)));
            }
            rows.push((r[..=file.d].to_vec(), C64::new(r[file.d + 1], r[file.d + 2])));
        }
        Self::from_rows(file.d, &rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(path),
            _ => Self::from_csv(path),
        }
    }

    pub fn d(&self) -> usize {
        self.axes.len()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    fn n_r(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    fn spacings(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[1] - a[0]).collect()
    }

    /// Largest |p| component the transverse sampling resolves: π/Δr.
    pub fn nyquist(&self) -> Vec<f64> {
        self.spacings().iter().map(|h| PI / h).collect()
    }

    fn row(&self, ix: usize) -> &[C64] {
        let n = self.n_r();
        &self.values[ix * n..(ix + 1) * n]
    }

    /// Discrete transform of row `ix`: Σ_r v e^{-ip·r} Δrᵈ.
    pub fn row_transform(&self, ix: usize, p: &[f64]) -> Result<C64> {
        if p.len() != self.d() {
            return Err(Error::InvalidConfig(format!("sampled potential has d = {}, grid has d = {}", self.d(), p.len())));
        }
        for (pc, ny) in p.iter().zip(self.nyquist()) {
            if pc.abs() > ny * (1.0 + 1e-12) {
                return Err(Error::AliasingRisk { requested: pc.abs(), nyquist: ny });
            }
        }
        let row = self.row(ix);
        let cell: f64 = self.spacings().iter().product();
        let mut sum = ZERO;
        let mut idx = vec![0usize; self.d()];
        for &v in row {
            let phase: f64 = idx.iter().enumerate().map(|(a, &i)| p[a] * self.axes[a][i]).sum();
            sum += v * C64::from_polar(1.0, -phase);
            for a in (0..idx.len()).rev() {
                idx[a] += 1;
                if idx[a] < self.axes[a].len() {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(sum * cell)
    }

    /// Tent weights for linear interpolation in x: (row, weight) pairs.
    fn interpolation(&self, x: f64) -> Vec<(usize, f64)> {
        let xs = &self.xs;
        if xs.len() == 1 {
            return if x == xs[0] { vec![(0, 1.0)] } else { Vec::new() };
        }
        if x < xs[0] || x > xs[xs.len() - 1] {
            return Vec::new();
        }
        let hi = xs.partition_point(|&v| v < x).max(1).min(xs.len() - 1);
        let lo = hi - 1;
        let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
        vec![(lo, 1.0 - t), (hi, t)]
    }

    fn tent(&self, ix: usize) -> Profile {
        let xs = &self.xs;
        let left = if ix > 0 { xs[ix - 1] } else { xs[0] };
        let right = if ix + 1 < xs.len() { xs[ix + 1] } else { xs[ix] };
        Profile::Triangle { amplitude: C64::new(1.0, 0.0), left, peak: xs[ix], right }
    }

    /// Advisory short-range check: finite samples that decay toward the edges of
    /// the window (edge magnitude below 1% of the peak).
    pub fn looks_short_range(&self) -> bool {
        let peak = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return true;
        }
        let n_r = self.n_r();
        let mut edge: f64 = 0.0;
        for ix in 0..self.xs.len() {
            let mut idx = vec![0usize; self.d()];
            for ir in 0..n_r {
                let on_edge = ix == 0 || ix + 1 == self.xs.len() || idx.iter().zip(&self.axes).any(|(&i, a)| i == 0 || i + 1 == a.len());
                if on_edge {
                    edge = edge.max(self.values[ix * n_r + ir].norm());
                }
                for a in (0..idx.len()).rev() {
                    idx[a] += 1;
                    if idx[a] < self.axes[a].len() {
                        break;
                    }
                    idx[a] = 0;
                }
            }
        }
        edge <= 1e-2 * peak
    }
}

/// Transverse spectrum t̃(p) of a separable term.
pub type SpectrumFn = Arc<dyn Fn(&[f64]) -> Result<Spectral> + Send + Sync>;

/// One term u(x)·t̃(p) of a separable decomposition.
#[derive(Clone)]
pub struct SeparableTerm {
    pub profile: Profile,
    pub spectrum: SpectrumFn,
}

/// A complex short-range potential in d+1 dimensions.
///
/// Analytic kinds take their transverse dimension from the length of the
/// momentum vector they are evaluated at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialModel {
    Zero,
    /// v(x, r) = u(x).
    XOnly {
        profile: Profile,
    },
    /// v(x, r) = u(x)·t(r).
    SeparableProduct {
        profile: Profile,
        transverse: Transverse,
    },
    GaussianMixture {
        bumps: Vec<GaussianBump>,
    },
    /// v = -depth inside the ball |(x - x₀, r)| < radius.
    CircularWell {
        #[serde(with = "crate::serde_complex")]
        depth: C64,
        radius: f64,
        #[serde(default)]
        center_x: f64,
    },
    Sampled {
        samples: SampledPotential,
    },
    Sum {
        terms: Vec<PotentialModel>,
    },
}

impl PotentialModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialModel::XOnly { profile } | PotentialModel::SeparableProduct { profile, .. } => profile.validate()?,
            PotentialModel::GaussianMixture { bumps } => {
                for b in bumps {
                    if !(b.width_x > 0.0 && b.width_r > 0.0) {
                        return Err(Error::InvalidConfig("Gaussian bump widths must be positive".into()));
                    }
                }
            }
            PotentialModel::CircularWell { radius, .. } if !(*radius > 0.0) => {
                return Err(Error::InvalidConfig(format!("well radius must be positive, got {radius}")));
            }
            PotentialModel::Sum { terms } => terms.iter().try_for_each(PotentialModel::validate)?,
            _ => {}
        }
        if let PotentialModel::SeparableProduct { transverse: Transverse::Gaussian { width, .. }, .. } = self {
            if !(*width > 0.0) {
                return Err(Error::InvalidConfig("transverse width must be positive".into()));
            }
        }
        Ok(())
    }

    /// Transverse Fourier transform at `x`.
    pub fn transverse_fourier(&self, x: f64, p: &[f64]) -> Result<Spectral> {
        self.transverse_fourier_at(Locus::at(x), p)
    }

    pub fn transverse_fourier_at(&self, at: Locus, p: &[f64]) -> Result<Spectral> {
        let x = at.x;
        Ok(match self {
            PotentialModel::Zero => Spectral::default(),
            PotentialModel::XOnly { profile } => Transverse::Uniform.spectrum(p) * profile.value(at),
            PotentialModel::SeparableProduct { profile, transverse } => transverse.spectrum(p) * profile.value(at),
            PotentialModel::GaussianMixture { bumps } => {
                bumps.iter().map(|b| b.transverse().spectrum(p) * b.profile().value(at)).fold(Spectral::default(), |a, b| a + b)
            }
            PotentialModel::CircularWell { depth, radius, center_x } => {
                let h2 = radius * radius - (x - center_x).powi(2);
                if h2 <= 0.0 {
                    return Ok(Spectral::default());
                }
                let h = h2.sqrt();
                let q = p.iter().map(|c| c * c).sum::<f64>().sqrt();
                let area = match p.len() {
                    0 => 1.0,
                    // ∫_{-h}^{h} e^{-ipy} dy
                    1 => {
                        if q * h < 1e-8 {
                            2.0 * h
                        } else {
                            2.0 * (q * h).sin() / q
                        }
                    }
                    // ∫_{|r|<h} e^{-ip·r} d²r
                    2 => {
                        if q * h < 1e-8 {
                            PI * h2
                        } else {
                            2.0 * PI * h * bessel_j(1, q * h) / q
                        }
                    }
                    n => return Err(Error::InvalidConfig(format!("transverse dimension {n} not supported"))),
                };
                Spectral::regular(-depth * area)
            }
            PotentialModel::Sampled { samples } => {
                let mut acc = ZERO;
                for (ix, w) in samples.interpolation(x) {
                    if w != 0.0 {
                        acc += samples.row_transform(ix, p)? * w;
                    }
                }
                Spectral::regular(acc)
            }
            PotentialModel::Sum { terms } => {
                let mut acc = Spectral::default();
                for t in terms {
                    acc = acc + t.transverse_fourier_at(at, p)?;
                }
                acc
            }
        })
    }

    /// v(x, r) in position space, where the kind has a closed form.
    pub fn value(&self, x: f64, r: &[f64]) -> Option<C64> {
        self.value_at(Locus::at(x), r)
    }

    pub fn value_at(&self, at: Locus, r: &[f64]) -> Option<C64> {
        let x = at.x;
        match self {
            PotentialModel::Zero => Some(ZERO),
            PotentialModel::XOnly { profile } => Some(profile.value(at)),
            PotentialModel::SeparableProduct { profile, transverse } => Some(profile.value(at) * transverse.value(r)),
            PotentialModel::GaussianMixture { bumps } => Some(bumps.iter().map(|b| b.profile().value(at) * b.transverse().value(r)).sum()),
            PotentialModel::CircularWell { depth, radius, center_x } => {
                let s = (x - center_x).powi(2) + r.iter().map(|c| c * c).sum::<f64>();
                Some(if s < radius * radius { -depth } else { ZERO })
            }
            PotentialModel::Sampled { .. } => None,
            PotentialModel::Sum { terms } => terms.iter().map(|t| t.value_at(at, r)).sum(),
        }
    }

    /// Longitudinal window outside which ṽ vanishes to [`SUPPORT_LEVEL`];
    /// `None` for the zero potential.
    pub fn support_bounds(&self) -> Option<(f64, f64)> {
        match self {
            PotentialModel::Zero => None,
            PotentialModel::XOnly { profile } | PotentialModel::SeparableProduct { profile, .. } => profile.support(),
            PotentialModel::GaussianMixture { bumps } => hull(bumps.iter().map(|b| b.profile().support())),
            PotentialModel::CircularWell { radius, center_x, .. } => Some((center_x - radius, center_x + radius)),
            PotentialModel::Sampled { samples } => Some((samples.xs[0], samples.xs[samples.xs.len() - 1])),
            PotentialModel::Sum { terms } => hull(terms.iter().map(PotentialModel::support_bounds)),
        }
    }

    /// Points inside the support where ṽ is not smooth in x.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = match self {
            PotentialModel::XOnly { profile } | PotentialModel::SeparableProduct { profile, .. } => profile.breakpoints(),
            PotentialModel::CircularWell { radius, center_x, .. } => vec![center_x - radius, center_x + radius],
            PotentialModel::Sampled { samples } => samples.xs.clone(),
            PotentialModel::Sum { terms } => terms.iter().flat_map(PotentialModel::breakpoints).collect(),
            _ => Vec::new(),
        };
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// The same potential multiplied by a complex constant.
    pub fn scaled(&self, factor: C64) -> PotentialModel {
        match self {
            PotentialModel::Zero => PotentialModel::Zero,
            PotentialModel::XOnly { profile } => PotentialModel::XOnly { profile: profile.scaled(factor) },
            PotentialModel::SeparableProduct { profile, transverse } => {
                PotentialModel::SeparableProduct { profile: profile.scaled(factor), transverse: transverse.clone() }
            }
            PotentialModel::GaussianMixture { bumps } => PotentialModel::GaussianMixture {
                bumps: bumps.iter().map(|b| GaussianBump { amplitude: b.amplitude * factor, ..b.clone() }).collect(),
            },
            PotentialModel::CircularWell { depth, radius, center_x } => {
                PotentialModel::CircularWell { depth: depth * factor, radius: *radius, center_x: *center_x }
            }
            PotentialModel::Sampled { samples } => PotentialModel::Sampled {
                samples: SampledPotential { values: samples.values.iter().map(|v| v * factor).collect(), ..samples.clone() },
            },
            PotentialModel::Sum { terms } => PotentialModel::Sum { terms: terms.iter().map(|t| t.scaled(factor)).collect() },
        }
    }

    /// Decomposition ṽ(x, p) = Σ_m u_m(x) t̃_m(p), when one exists.
    pub fn separable_terms(&self) -> Option<Vec<SeparableTerm>> {
        match self {
            PotentialModel::Zero => Some(Vec::new()),
            PotentialModel::XOnly { profile } => {
                Some(vec![SeparableTerm { profile: profile.clone(), spectrum: Arc::new(|p: &[f64]| Ok(Transverse::Uniform.spectrum(p))) }])
            }
            PotentialModel::SeparableProduct { profile, transverse } => {
                let t = transverse.clone();
                Some(vec![SeparableTerm { profile: profile.clone(), spectrum: Arc::new(move |p: &[f64]| Ok(t.spectrum(p))) }])
            }
            PotentialModel::GaussianMixture { bumps } => Some(
                bumps
                    .iter()
                    .map(|b| {
                        let t = b.transverse();
                        SeparableTerm { profile: b.profile(), spectrum: Arc::new(move |p: &[f64]| Ok(t.spectrum(p))) }
                    })
                    .collect(),
            ),
            PotentialModel::CircularWell { .. } => None,
            PotentialModel::Sampled { samples } => {
                let shared = Arc::new(samples.clone());
                Some(
                    (0..samples.xs.len())
                        .map(|ix| {
                            let s = Arc::clone(&shared);
                            SeparableTerm {
                                profile: samples.tent(ix),
                                spectrum: Arc::new(move |p: &[f64]| s.row_transform(ix, p).map(Spectral::regular)),
                            }
                        })
                        .collect(),
                )
            }
            PotentialModel::Sum { terms } => {
                let mut all = Vec::new();
                for t in terms {
                    all.extend(t.separable_terms()?);
                }
                Some(all)
            }
        }
    }

    /// Advisory short-range flag: analytic kinds are short-range by construction.
    pub fn is_short_range(&self) -> bool {
        match self {
            PotentialModel::Sampled { samples } => samples.looks_short_range(),
            PotentialModel::Sum { terms } => terms.iter().all(PotentialModel::is_short_range),
            _ => true,
        }
    }

    /// Whether v is real-valued everywhere.
    pub fn is_real(&self) -> bool {
        let real = |z: &C64| z.im == 0.0;
        match self {
            PotentialModel::Zero => true,
            PotentialModel::XOnly { profile } | PotentialModel::SeparableProduct { profile, .. } => profile_is_real(profile),
            PotentialModel::GaussianMixture { bumps } => bumps.iter().all(|b| real(&b.amplitude)),
            PotentialModel::CircularWell { depth, .. } => real(depth),
            PotentialModel::Sampled { samples } => samples.values.iter().all(real),
            PotentialModel::Sum { terms } => terms.iter().all(PotentialModel::is_real),
        }
    }

    /// Piecewise-constant x-profile, for potentials that are one.
    pub fn constant_segments(&self) -> Option<Vec<Segment>> {
        match self {
            PotentialModel::Zero => Some(Vec::new()),
            PotentialModel::XOnly { profile } => profile.constant_segments(),
            _ => None,
        }
    }
}

fn profile_is_real(p: &Profile) -> bool {
    match p {
        Profile::Slab { value, .. } => value.im == 0.0,
        Profile::Piecewise { segments } => segments.iter().all(|s| s.value.im == 0.0),
        Profile::Gaussian { amplitude, .. } | Profile::Sech2 { amplitude, .. } | Profile::Triangle { amplitude, .. } => amplitude.im == 0.0,
        Profile::Sum { terms } => terms.iter().all(profile_is_real),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_potential_vanishes_everywhere() {
        let v = PotentialModel::Zero;
        assert!(v.transverse_fourier(0.3, &[0.1]).unwrap().is_zero());
        assert_eq!(v.support_bounds(), None);
    }

    #[test]
    fn x_only_transform_is_a_delta() {
        let v = PotentialModel::XOnly { profile: Profile::Slab { left: -0.5, right: 0.5, value: c(2.0, 1.0) } };
        let s = v.transverse_fourier(0.1, &[0.0]).unwrap();
        assert_eq!(s, Spectral { regular: ZERO, delta: c(2.0, 1.0) });
        assert!(v.transverse_fourier(0.1, &[0.25]).unwrap().is_zero());
        assert!(v.transverse_fourier(0.7, &[0.0]).unwrap().is_zero());
        assert_eq!(v.support_bounds(), Some((-0.5, 0.5)));
    }

    #[test]
    fn gaussian_transform_matches_quadrature() {
        let (g, a, b) = (c(0.7, -0.2), 1.0, 0.8);
        let v = PotentialModel::SeparableProduct {
            profile: Profile::Gaussian { amplitude: g, center: 0.0, width: a },
            transverse: Transverse::Gaussian { width: b, center: vec![0.3] },
        };
        let (x, p) = (0.4, 1.3);
        let got = v.transverse_fourier(x, &[p]).unwrap().regular;
        // Trapezoid over a wide window; the integrand is entire and decays fast.
        let h = 1e-3;
        let quad: C64 = (-12000..=12000)
            .map(|j| {
                let y = j as f64 * h;
                v.value(x, &[y]).unwrap() * C64::from_polar(1.0, -p * y) * h
            })
            .sum();
        assert!((got - quad).norm() < 1e-12 * quad.norm(), "{got} vs {quad}");
        let closed = g * (-x * x / (a * a)).exp() * b * PI.sqrt() * (-b * b * p * p / 4.0).exp() * C64::from_polar(1.0, -p * 0.3);
        assert!((got - closed).norm() < 1e-15);
    }

    #[test]
    fn real_potentials_have_conjugate_symmetric_transforms() {
        let kinds = [
            PotentialModel::SeparableProduct {
                profile: Profile::Sech2 { amplitude: c(1.5, 0.0), center: 0.2, width: 0.7 },
                transverse: Transverse::Gaussian { width: 0.6, center: vec![0.4, -0.1] },
            },
            PotentialModel::CircularWell { depth: c(0.5, 0.0), radius: 1.0, center_x: 0.0 },
            PotentialModel::GaussianMixture {
                bumps: seeded_mixture(3, 4, 2, 1.0).into_iter().map(|b| GaussianBump { amplitude: c(b.amplitude.re, 0.0), ..b }).collect(),
            },
        ];
        for v in &kinds {
            assert!(v.is_real());
            for p in [[0.3, -1.1], [1.7, 0.25]] {
                let plus = v.transverse_fourier(0.15, &p).unwrap().regular;
                let minus = v.transverse_fourier(0.15, &[-p[0], -p[1]]).unwrap().regular;
                assert_eq!(minus, plus.conj());
            }
        }
    }

    #[test]
    fn circular_well_transform_matches_quadrature() {
        let v = PotentialModel::CircularWell { depth: c(0.5, 0.1), radius: 1.0, center_x: 0.0 };
        let (x, p): (f64, [f64; 2]) = (0.3, [0.9, -0.4]);
        let h = (1.0f64 - x * x).sqrt();
        // Polar quadrature of ∫_{|r|<h} e^{-ip·r} d²r, exact in angle via J0.
        let q = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let n = 4000;
        let dr = h / n as f64;
        let radial: f64 = (0..n)
            .map(|j| {
                let r = (j as f64 + 0.5) * dr;
                2.0 * PI * r * bessel_j(0, q * r) * dr
            })
            .sum();
        let got = v.transverse_fourier(x, &p).unwrap().regular;
        assert!((got - (-c(0.5, 0.1) * radial)).norm() < 1e-6);
        let one_d = v.transverse_fourier(x, &[0.9]).unwrap().regular;
        assert!((one_d - (-c(0.5, 0.1) * 2.0 * (0.9 * h).sin() / 0.9)).norm() < 1e-15);
        assert!(v.transverse_fourier(1.2, &p).unwrap().is_zero());
    }

    #[test]
    fn support_bounds_follow_the_envelope_level() {
        let g = Profile::Gaussian { amplitude: c(1.0, 0.0), center: 0.0, width: 1.0 };
        let (lo, hi) = g.support().unwrap();
        assert!((hi - 5.2565).abs() < 1e-4 && (lo + hi).abs() < 1e-15);
        assert!((g.value(Locus::at(hi)).norm() - 1e-12).abs() < 1e-20);
        let s = Profile::Sech2 { amplitude: c(1.0, 0.0), center: 1.0, width: 2.0 };
        let (_, hi) = s.support().unwrap();
        assert!((s.value(Locus::at(hi)).norm() - 1e-12).abs() < 1e-18);
    }

    #[test]
    fn hint_selects_the_side_of_a_jump() {
        let p = Profile::Piecewise {
            segments: vec![Segment { left: 0.0, right: 1.0, value: c(1.0, 0.0) }, Segment { left: 1.0, right: 2.0, value: c(3.0, 0.0) }],
        };
        assert_eq!(p.value(Locus::within(1.0, 0.5)), c(1.0, 0.0));
        assert_eq!(p.value(Locus::within(1.0, 1.5)), c(3.0, 0.0));
        assert_eq!(p.value(Locus::within(2.0, 1.5)), c(3.0, 0.0));
        assert_eq!(p.value(Locus::at(2.5)), ZERO);
    }

    fn gaussian_samples(d: usize, n: usize, h: f64) -> (SampledPotential, PotentialModel) {
        let analytic = PotentialModel::GaussianMixture {
            bumps: vec![GaussianBump { amplitude: c(0.8, 0.3), center_x: 0.0, width_x: 0.7, center_r: vec![0.2; d], width_r: 0.6 }],
        };
        let xs = [-0.5, 0.0, 0.5];
        let axis: Vec<f64> = (0..n).map(|j| (j as f64 - (n as f64 - 1.0) / 2.0) * h).collect();
        let mut rows = Vec::new();
        for &x in &xs {
            match d {
                1 => {
                    for &y in &axis {
                        rows.push((vec![x, y], analytic.value(x, &[y]).unwrap()));
                    }
                }
                _ => {
                    for &y in &axis {
                        for &z in &axis {
                            rows.push((vec![x, y, z], analytic.value(x, &[y, z]).unwrap()));
                        }
                    }
                }
            }
        }
        (SampledPotential::from_rows(d, &rows).unwrap(), analytic)
    }

    #[test]
    fn sampled_transform_matches_analytic_on_nodes() {
        let (s, analytic) = gaussian_samples(1, 160, 0.05);
        let v = PotentialModel::Sampled { samples: s };
        for p in [0.0, 1.0, -3.5] {
            let got = v.transverse_fourier(0.5, &[p]).unwrap().regular;
            let want = analytic.transverse_fourier(0.5, &[p]).unwrap().regular;
            assert!((got - want).norm() < 1e-12, "p={p}: {got} vs {want}");
        }
        // Linear interpolation between rows.
        let mid = v.transverse_fourier(0.25, &[1.0]).unwrap().regular;
        let a = v.transverse_fourier(0.0, &[1.0]).unwrap().regular;
        let b = v.transverse_fourier(0.5, &[1.0]).unwrap().regular;
        assert!((mid - 0.5 * (a + b)).norm() < 1e-14);
        assert!(v.transverse_fourier(0.6, &[1.0]).unwrap().is_zero());
    }

    #[test]
    fn sampled_parseval_on_the_dft_lattice() {
        let (n, h) = (24usize, 0.25);
        let (s, _) = gaussian_samples(2, n, h);
        let v = PotentialModel::Sampled { samples: s.clone() };
        let dp = 2.0 * PI / (n as f64 * h);
        let mut lhs = 0.0;
        for a in 0..n {
            for b in 0..n {
                let p = [(a as f64 - (n / 2) as f64) * dp, (b as f64 - (n / 2) as f64) * dp];
                lhs += v.transverse_fourier(0.0, &p).unwrap().regular.norm_sqr() * dp * dp;
            }
        }
        let rhs: f64 = s.row(1).iter().map(|z| z.norm_sqr()).sum::<f64>() * h * h * (2.0 * PI).powi(2);
        assert!((lhs - rhs).abs() < 1e-6 * rhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn sampled_aliasing_is_reported() {
        let (s, _) = gaussian_samples(1, 40, 0.1);
        let v = PotentialModel::Sampled { samples: s };
        assert!(matches!(v.transverse_fourier(0.0, &[40.0]), Err(Error::AliasingRisk { .. })));
    }

    #[test]
    fn sampled_rejects_ragged_lattices() {
        let rows = vec![(vec![0.0, 0.0], ZERO), (vec![0.0, 1.0], ZERO), (vec![1.0, 0.0], ZERO)];
        assert!(matches!(SampledPotential::from_rows(1, &rows), Err(Error::InvalidSamples(_))));
    }

    #[test]
    fn separable_terms_reproduce_the_transform() {
        let models = [
            PotentialModel::GaussianMixture { bumps: seeded_mixture(11, 3, 1, 0.5) },
            PotentialModel::Sampled { samples: gaussian_samples(1, 40, 0.1).0 },
        ];
        for v in &models {
            let terms = v.separable_terms().unwrap();
            for x in [-0.3, 0.0, 0.21] {
                for p in [0.0, 0.4, -1.7] {
                    let direct = v.transverse_fourier(x, &[p]).unwrap().regular;
                    let sum: C64 = terms.iter().map(|t| (t.spectrum)(&[p]).unwrap().regular * t.profile.value(Locus::at(x))).sum();
                    assert!((direct - sum).norm() < 1e-14);
                }
            }
        }
        assert!(PotentialModel::CircularWell { depth: ZERO, radius: 1.0, center_x: 0.0 }.separable_terms().is_none());
    }

    #[test]
    fn seeded_mixture_is_deterministic() {
        assert_eq!(seeded_mixture(42, 5, 2, 0.3), seeded_mixture(42, 5, 2, 0.3));
        assert_ne!(seeded_mixture(42, 5, 2, 0.3), seeded_mixture(43, 5, 2, 0.3));
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{"kind": "separable_product",
            "profile": {"shape": "gaussian", "amplitude": [0.1, 0.2], "width": 0.5},
            "transverse": {"shape": "gaussian", "width": 0.8}}"#;
        let v: PotentialModel = serde_json::from_str(text).unwrap();
        v.validate().unwrap();
        let back: PotentialModel = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(v, back);
    }
}
