//! Small-dimension complex linear algebra and entropy primitives.
//!
//! Matrices are dense `DMatrix<Complex64>` values of dimension at most 16
//! (a two-qubit state together with a four-level purifying system). Every
//! entropy is measured in bits.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::tolerances::{ELEMENTWISE, SPECTRAL};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// `v · σ` for a real three-vector.
pub fn bloch_operator(v: [f64; 3]) -> CMatrix {
    pauli_x() * c(v[0], 0.0) + pauli_y() * c(v[1], 0.0) + pauli_z() * c(v[2], 0.0)
}

/// Binary entropy `h(p) = -p log2 p - (1-p) log2 (1-p)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("p", p, "[0, 1]"));
    }
    Ok(h(p))
}

/// Binary entropy for arguments already known to lie in `[0, 1]` up to
/// rounding; the argument is clamped.
pub(crate) fn h(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Shannon entropy (bits) of a probability vector. Entries in
/// `[-SPECTRAL, 0]` count as zero.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .map(|&p| if p <= 0.0 { 0.0 } else { -p * p.log2() })
        .sum()
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

/// `Re Tr[rho · op]`.
pub fn expectation(rho: &CMatrix, op: &CMatrix) -> f64 {
    (rho * op).trace().re
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

/// Eigenvalues of a Hermitian matrix, sorted in descending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    // Symmetrise first so rounding noise in the lower triangle is ignored.
    let sym = (m + m.adjoint()) * c(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Checks that `rho` is Hermitian, has unit trace and no eigenvalue below
/// `-SPECTRAL`.
pub fn validate_density(rho: &CMatrix) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::Validation(format!(
            "density matrix must be square, got {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if !is_hermitian(rho, ELEMENTWISE) {
        return Err(Error::Validation("density matrix is not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > ELEMENTWISE || tr.im.abs() > ELEMENTWISE {
        return Err(Error::Validation(format!(
            "density matrix trace is {tr}, expected 1"
        )));
    }
    let min_ev = hermitian_eigenvalues(rho).last().copied().unwrap_or(0.0);
    if min_ev < -SPECTRAL {
        return Err(Error::Validation(format!(
            "density matrix has negative eigenvalue {min_ev:e}"
        )));
    }
    Ok(())
}

/// Von Neumann entropy in bits of a validated density matrix.
pub fn von_neumann_entropy(rho: &CMatrix) -> Result<f64> {
    validate_density(rho)?;
    Ok(entropy_unchecked(rho))
}

/// Entropy of a matrix the caller has already validated (or constructed to
/// be a density matrix). Tiny negative eigenvalues are clamped.
pub(crate) fn entropy_unchecked(rho: &CMatrix) -> f64 {
    let ev = hermitian_eigenvalues(rho);
    shannon_entropy(&ev)
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Traces out the factors listed in `trace_out` from an operator on
/// `⊗ dims[k]`. Factor 0 is the most significant index.
pub fn partial_trace(rho: &CMatrix, dims: &[usize], trace_out: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) || total != rho.nrows() || !rho.is_square() {
        return Err(Error::Validation(format!(
            "factor dimensions {dims:?} do not match a {}x{} operator",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if let Some(&bad) = trace_out.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::Validation(format!(
            "cannot trace out factor {bad} of {} factors",
            dims.len()
        )));
    }
    let keep: Vec<usize> = (0..dims.len()).filter(|k| !trace_out.contains(k)).collect();
    let out_dim: usize = keep.iter().map(|&k| dims[k]).product();

    let digits = |mut idx: usize| -> Vec<usize> {
        let mut d = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            d[k] = idx % dims[k];
            idx /= dims[k];
        }
        d
    };
    let kept_index = |d: &[usize]| keep.iter().fold(0, |acc, &k| acc * dims[k] + d[k]);

    let all_digits: Vec<Vec<usize>> = (0..total).map(digits).collect();
    let mut out = CMatrix::zeros(out_dim, out_dim);
    for r in 0..total {
        let dr = &all_digits[r];
        for col in 0..total {
            let dc = &all_digits[col];
            if trace_out.iter().all(|&k| dr[k] == dc[k]) {
                out[(kept_index(dr), kept_index(dc))] += rho[(r, col)];
            }
        }
    }
    Ok(out)
}

/// Projector `|ψ⟩⟨ψ|` for an amplitude vector (not normalised here).
pub fn projector(amplitudes: &[C64]) -> CMatrix {
    let n = amplitudes.len();
    CMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj())
}

/// Haar-random unitary via QR of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = ginibre(rng, dim);
    let qr = g.qr();
    let (q, r) = qr.unpack();
    let phases = CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c(1.0, 0.0)
            }
        } else {
            c(0.0, 0.0)
        }
    });
    q * phases
}

/// Random full-rank density matrix `G G† / Tr[G G†]`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = ginibre(rng, dim);
    let m = &g * g.adjoint();
    let tr = m.trace();
    let m = m / tr;
    (&m + m.adjoint()) * c(0.5, 0.0)
}

fn ginibre<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}
