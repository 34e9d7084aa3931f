//! Independent position-space reference solvers.

mod born;
mod one_d;
mod partial_wave;

pub use born::{born_amplitude, born_constant, full_fourier, profile_fourier};
pub use one_d::{delta_transfer, integrate_schrodinger_1d, match_piecewise_1d, match_potential_1d, Oracle1DResult};
pub use partial_wave::{circular_well_2d, circular_well_2d_exact, partial_wave_2d, PartialWaveResult, TAIL_THRESHOLD};
