use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative Fourier coefficient {value} at mode {mode}")]
    NegativeCoefficient { mode: i64, value: f64 },

    #[error("spectrum is not even: v({mode}) = {value} but v({}) = {mirror}", -mode)]
    OddSpectrum { mode: i64, value: f64, mirror: f64 },

    #[error("operation needs a {expected} potential")]
    WrongPotentialClass { expected: &'static str },

    #[error(
        "radial quadrature unresolved (relative change {change:.3e}); refine to at least {suggested_points} points"
    )]
    QuadratureUnresolved { change: f64, suggested_points: usize },

    #[error("Hartree iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    HartreeNotConverged { iterations: usize, residual: f64 },

    #[error("condensate is not positive (minimum {min:.3e}); the trap is probably not confining")]
    DensityCollapse { min: f64 },

    #[error("no spectral gap above the condensate: tau = {tau:.3e}")]
    NoGap { tau: f64 },

    #[error("Fock space dimension {dimension} exceeds budget {budget}")]
    BudgetExceeded { dimension: usize, budget: usize },

    #[error("mode basis is not orthonormal or not orthogonal to the condensate (deviation {deviation:.3e})")]
    ModesNotOrthonormal { deviation: f64 },

    #[error("mode {index} is not an eigenfunction of qhq (residual {residual:.3e})")]
    NotAnEigenmode { index: usize, residual: f64 },

    #[error("kernel {kernel} disagrees between quadrature and Fourier paths by {deviation:.3e} at {entry:?}")]
    KernelMismatch { kernel: &'static str, deviation: f64, entry: Vec<usize> },

    #[error("kernel {kernel} has imaginary part {imag:.3e} in the chosen mode basis")]
    ComplexKernel { kernel: &'static str, imag: f64 },

    #[error("block {block} has an entry from sector {from} to sector {to}")]
    SectorSignature { block: &'static str, from: usize, to: usize },

    #[error("particle number {n_particles} must exceed the occupation cutoff {cutoff} (and be at least 2)")]
    CutoffTooLarge { n_particles: usize, cutoff: usize },

    #[error("operator is not Hermitian (max asymmetry {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("Lanczos did not converge after {iterations} iterations (residual {residual:.3e})")]
    LanczosNotConverged { iterations: usize, residual: f64, ritz_history: Vec<f64> },

    #[error("dense diagonalization limited to dimension {limit}, got {dimension}")]
    DimensionGuard { dimension: usize, limit: usize },

    #[error(
        "Bogoliubov pair with momentum {momentum} is unstable: |coupling| {coupling:.6} >= diagonal {diagonal:.6}"
    )]
    IllPosedPair { momentum: i64, diagonal: f64, coupling: f64 },

    #[error("kernels are not pair-diagonal: {0}")]
    NotPairDiagonal(String),

    #[error("window around sector {ell} leaves the valid range [0, {valid_max}]")]
    WindowOutOfRange { ell: i64, valid_max: usize },

    #[error("window sum vanishes at sector {ell}")]
    DegenerateWindow { ell: i64 },

    #[error("second-difference inequality violated at index {index}: sigma*G = {lhs:.6e} > {rhs:.6e}")]
    InequalityViolated { index: usize, lhs: f64, rhs: f64 },

    #[error("certificate needs sigma > 2, got {sigma}")]
    SigmaTooSmall { sigma: f64 },

    #[error("fit needs at least 3 points with positive probability, got {points}")]
    TooFewPoints { points: usize },

    #[error(
        "residual sup-norm is not decreasing: delta({kappa}) = {value:.6e} >= delta({previous_kappa}) = {previous:.6e}"
    )]
    NonMonotoneResidual { kappa: f64, value: f64, previous_kappa: f64, previous: f64 },

    #[error("geometry is not a homogeneous torus")]
    NotHomogeneous,
}
