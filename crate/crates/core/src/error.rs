use thiserror::Error;

/// Everything that can go wrong between building a grid and reporting residuals.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A staggered lattice point landed inside the exclusion band around |p| = k.
    #[error("grid resonant with dispersion circle: point |p| = {norm:.17e} is within {band:.3e} of k = {k}; change n_per_axis or p_max")]
    ResonantGrid { norm: f64, k: f64, band: f64 },

    #[error("propagating subset is not closed under p -> -p (index {index})")]
    ParityClosure { index: usize },

    #[error("aliasing risk: |p| component {requested:.6} exceeds the sample Nyquist limit {nyquist:.6}")]
    AliasingRisk { requested: f64, nyquist: f64 },

    #[error("invalid potential samples: {0}")]
    InvalidSamples(String),

    /// The growing evanescent component would exceed the dynamic-range budget.
    #[error(
        "evanescent growth exp({exponent:.2}) exceeds budget exp({budget:.2}) at |p| shell {shell:.6}; shrink p_max or the support window"
    )]
    GrowthBudget { shell: f64, exponent: f64, budget: f64 },

    #[error("step size underflow at x = {x:.6} (h = {h:.3e}); stiffest |p| shell {shell:.6}")]
    StepUnderflow { x: f64, h: f64, shell: f64 },

    #[error("non-finite entry in the evolution operator at x = {x:.6}")]
    NonFinite { x: f64 },

    #[error("near spectral singularity: sigma_min(M22) = {sigma_min:.3e}, cond = {cond:.3e}")]
    NearSpectralSingularity { sigma_min: f64, cond: f64 },

    #[error("direction is off-grid: transverse momentum snaps by {distance:.3e} (half cell {half_cell:.3e})")]
    OffGrid { distance: f64, half_cell: f64 },

    #[error("direction is not propagating: |k n_perp| = {norm:.6} >= k = {k}")]
    Evanescent { norm: f64, k: f64 },

    #[error("grazing direction: |n_x| = {nx:.3e} is below the cutoff")]
    Grazing { nx: f64 },

    #[error("quadrant not available: {0}")]
    Quadrant(&'static str),

    /// Plane-wave matching needs a nonzero local wavenumber in every segment.
    #[error("local wavenumber vanishes in segment {segment}; perturb k")]
    VanishingWavenumber { segment: usize },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::GrowthBudget { .. }
                | Error::StepUnderflow { .. }
                | Error::NonFinite { .. }
                | Error::NearSpectralSingularity { .. }
                | Error::VanishingWavenumber { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
