//! Numerical tolerances shared by every module.
//!
//! Validation checks compare against these values; tests import them rather
//! than repeating literals.

/// Elementwise comparison of matrices that should agree exactly
/// (Hermiticity, Kraus completeness, unit trace, replayed frames).
pub const ELEMENTWISE: f64 = 1e-12;

/// Eigenvalue-level comparisons. Eigenvalues in `[-SPECTRAL, 0)` are
/// treated as zero before taking logarithms.
pub const SPECTRAL: f64 = 1e-10;

/// Norm slack accepted for Bloch vectors and POVM positivity.
pub const BLOCH: f64 = 1e-12;

/// Target agreement between the brute-force discord minimiser and the
/// closed form.
pub const DISCORD_BRUTE_FORCE: f64 = 1e-6;
