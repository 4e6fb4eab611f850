//! Error type shared by all modules.

use thiserror::Error;

/// Everything that can go wrong while classifying boundary conditions,
/// hunting roots, or assembling a trace verdict.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Boundary rows are linearly dependent (or a row is identically zero).
    #[error("degenerate boundary rows: {0}")]
    DegenerateRows(String),

    /// Birkhoff regularity fails (`A = 0` in the mixed case, or the
    /// analogous determinant condition).
    #[error("irregular boundary conditions: {0}")]
    IrregularBc(String),

    /// The operation is not defined for this boundary-condition shape.
    #[error("unsupported boundary-condition form: {0}")]
    UnsupportedForm(String),

    /// An atom sits at an interval endpoint where a one-sided density
    /// derivative is required.
    #[error("atom at interval endpoint x = {0}")]
    EndpointAtom(f64),

    /// A root could not be recovered (Newton divergence, winding mismatch
    /// that homotopy could not repair).
    #[error("root lost near lambda = {lambda:?}: {detail}")]
    RootLoss {
        lambda: num_complex::Complex64,
        detail: String,
    },

    /// A counting or integration circle passes too close to a zero of the
    /// characteristic function.
    #[error("contour of radius {radius} passes too close to a characteristic zero")]
    CircleTooClose { radius: f64 },

    /// Eigenvalue moduli cannot be separated into the cluster structure the
    /// classification promises.
    #[error("unseparable spectrum near |z| = {z_abs}: {detail}")]
    UnseparableSpectrum { z_abs: f64, detail: String },

    /// Perturbed and unperturbed spectra disagree on cluster sizes.
    #[error("cluster mismatch at cluster {index}: expected {expected} roots, found {found}")]
    ClusterMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    /// `<y, z>` vanishes for an eigenvalue that is not part of a declared
    /// Jordan block.
    #[error("biorthogonal normalization breakdown at lambda = {lambda:?}")]
    NormalizationBreakdown { lambda: num_complex::Complex64 },

    /// An asymptotic expansion was requested for the wrong case tag.
    #[error("expansion not defined for case {tag}: {detail}")]
    WrongCase { tag: String, detail: String },

    /// `sin(alpha)` (or another required denominator) vanishes.
    #[error("singular alpha: {0}")]
    SingularAlpha(String),

    /// The Cesaro diagnostic exceeds the requested tolerance.
    #[error("insufficient terms: cesaro diagnostic {diagnostic:.3e} exceeds tolerance {tolerance:.3e}")]
    InsufficientTerms { diagnostic: f64, tolerance: f64 },

    /// `lambda` is too close to an eigenvalue for a resolvent evaluation.
    #[error("lambda = {lambda:?} is too close to an eigenvalue")]
    NearPole { lambda: num_complex::Complex64 },

    /// Problem-file parse or validation failure.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}
