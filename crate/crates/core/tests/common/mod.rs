#![allow(dead_code)]

use std::time::Duration;

use ftm_core::grid::MomentumGrid;
use ftm_core::oracle::match_piecewise_1d;
use ftm_core::potential::{seeded_mixture, PotentialModel, Profile, Segment};
use ftm_core::scattering::{on_grid_directions, Direction};
use num_complex::Complex64 as C64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn barrier(v0: f64, length: f64) -> PotentialModel {
    PotentialModel::XOnly { profile: Profile::Slab { left: 0.0, right: length, value: c(v0, 0.0) } }
}

pub fn complex_slab() -> PotentialModel {
    PotentialModel::XOnly { profile: Profile::Slab { left: -0.5, right: 1.0, value: c(0.3, 0.8) } }
}

/// Smooth complex potential shared by the 1D, 2D and 3D checks.
pub fn seeded(d: usize) -> PotentialModel {
    PotentialModel::GaussianMixture { bumps: seeded_mixture(7, 4, d, 0.5) }
}

pub fn circular_well() -> PotentialModel {
    PotentialModel::CircularWell { depth: c(0.5, 0.0), radius: 1.0, center_x: 0.0 }
}

pub const GAIN_LENGTH: f64 = 5.0;

/// v = i·s on [0, L]; gain for s > 0 with e^{ikx} outgoing on the right.
pub fn gain_slab(strength: f64) -> PotentialModel {
    PotentialModel::XOnly { profile: Profile::Slab { left: 0.0, right: GAIN_LENGTH, value: c(0.0, strength) } }
}

fn gain_m22(strength: f64, k: f64) -> C64 {
    let seg = [Segment { left: 0.0, right: GAIN_LENGTH, value: c(0.0, strength) }];
    match_piecewise_1d(&seg, k).unwrap().m[(1, 1)]
}

/// Newton in (strength, k) on M₂₂ = 0 from exact matching, started near the
/// first threshold above k = 2: a spectral singularity at real k.
pub fn gain_threshold() -> (f64, f64) {
    let (mut s, mut k) = (1.94, 2.11);
    for _ in 0..50 {
        let f = gain_m22(s, k);
        let e = 1e-7;
        let ds = (gain_m22(s + e, k) - gain_m22(s - e, k)) / (2.0 * e);
        let dk = (gain_m22(s, k + e) - gain_m22(s, k - e)) / (2.0 * e);
        // Solve [Re ds, Re dk; Im ds, Im dk] δ = -[Re f, Im f].
        let det = ds.re * dk.im - dk.re * ds.im;
        let d_s = -(f.re * dk.im - dk.re * f.im) / det;
        let d_k = -(ds.re * f.im - f.re * ds.im) / det;
        s += d_s;
        k += d_k;
        if d_s.abs() + d_k.abs() < 1e-14 {
            break;
        }
    }
    assert!(gain_m22(s, k).norm() < 1e-10, "threshold Newton did not converge");
    (s, k)
}

/// Every on-grid direction, forward half first.
pub fn all_directions(grid: &MomentumGrid) -> Vec<Direction> {
    on_grid_directions(grid, 1.0).into_iter().chain(on_grid_directions(grid, -1.0)).collect()
}

pub fn planar_angle(a: &Direction, b: &Direction) -> f64 {
    let dot: f64 = a.components().iter().zip(b.components()).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

/// Prints one verdict line and returns `pass`. Writes to the process stdout
/// directly so the line shows up without `--nocapture`.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration) -> bool {
    use std::io::Write;
    let line = format!("{} [{id}] {name}: {detail} ({:.2}s)\n", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    pass
}
