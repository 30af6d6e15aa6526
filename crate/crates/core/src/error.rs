use thiserror::Error;

/// Errors produced by the numerical kernels.
///
/// Variants are grouped by how a front end should react: configuration
/// problems (bad input files, inconsistent parameters) versus numerical
/// validity problems (gap closures, degenerate symplectic forms, aliasing)
/// that mean the model left its regime of applicability.
#[derive(Error, Debug)]
pub enum Error {
    #[error("degenerate lattice: basis vectors are linearly dependent (|det| = {det:.3e})")]
    DegenerateLattice { det: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("eigensolver failed at k = ({k0:.6}, {k1:.6}) with cutoff {cutoff:.3}")]
    EigenFailure { k0: f64, k1: f64, cutoff: f64 },

    #[error("band {band} gap {gap:.3e} below threshold {threshold:.3e}; geometry and flow refuse this band")]
    GapClosure { band: usize, gap: f64, threshold: f64 },

    #[error("near-degenerate denominator |E_m - E_n| = {separation:.3e} at band {band}")]
    NearDegeneracy { band: usize, separation: f64 },

    #[error("k-grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("curvature sum is not quantized: distance {residual:.3e} from the nearest integer")]
    NonQuantized { residual: f64 },

    #[error("invalid magnetic flux {p}/{q}: numerator and denominator must be coprime (q in 1..=64)")]
    InvalidFlux { p: i64, q: i64 },

    #[error("operation requires dimension {expected}, lattice has dimension {got}")]
    UnsupportedDimension { expected: usize, got: usize },

    #[error("symplectic form degenerate: |det Theta| = {det:.3e} (epsilon too large for this band)")]
    SymplecticDegeneracy { det: f64 },

    #[error("trajectory truncated at t = {t:.6}: {reason}")]
    TruncatedTrajectory { t: f64, reason: String },

    #[error("packet width error: envelope at the zone boundary is {edge_ratio:.3e} of the peak (limit {limit:.1e})")]
    WidthError { edge_ratio: f64, limit: f64 },

    #[error("box incommensurate with the lattice: {0}")]
    IncommensurateBox(String),

    #[error("grid alignment error: {0}")]
    GridAlignment(String),

    #[error("aliasing: {0}")]
    Aliasing(String),

    #[error("wave packet touched the box boundary: mass {mass:.3e} inside the margin")]
    BoundaryContact { mass: f64 },

    #[error("propagation unstable: norm drift {drift:.3e}")]
    Instability { drift: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that signal the computation left its numerical
    /// validity regime rather than being misconfigured.
    pub fn is_validity(&self) -> bool {
        matches!(
            self,
            Error::GapClosure { .. }
                | Error::NearDegeneracy { .. }
                | Error::GridTooCoarse(_)
                | Error::NonQuantized { .. }
                | Error::SymplecticDegeneracy { .. }
                | Error::TruncatedTrajectory { .. }
                | Error::WidthError { .. }
                | Error::Aliasing(_)
                | Error::BoundaryContact { .. }
                | Error::Instability { .. }
                | Error::EigenFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
