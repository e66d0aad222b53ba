//! Bell-diagonal two-qubit states.
//!
//! A Bell-diagonal state is stored through its Bell-basis weights
//! `λ = (λ₁, λ₂, λ₃, λ₄)` on `(|Φ⁺⟩, |Φ⁻⟩, |Ψ⁺⟩, |Ψ⁻⟩)`. The equivalent
//! correlation triple satisfies
//!
//! ```text
//!  T_z = λ₁ + λ₂ − λ₃ − λ₄
//!  T_x = λ₁ − λ₂ + λ₃ − λ₄
//! −T_y = λ₁ − λ₂ − λ₃ + λ₄
//! ```
//!
//! and the state reads `¼(𝕀⊗𝕀 + T_x σx⊗σx + T_y σy⊗σy + T_z σz⊗σz)`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{self, c, identity, pauli_x, pauli_y, pauli_z, tensor, CMatrix, C64};
use crate::tolerances::ELEMENTWISE;

/// The correlation triple `(T_x, T_y, T_z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl Correlations {
    pub fn new(tx: f64, ty: f64, tz: f64) -> Self {
        Self { tx, ty, tz }
    }
}

/// The four Bell states, in the order used for `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];

    /// Amplitudes in the computational basis `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn amplitudes(self) -> [f64; 4] {
        let s = FRAC_1_SQRT_2;
        match self {
            BellLabel::PhiPlus => [s, 0.0, 0.0, s],
            BellLabel::PhiMinus => [s, 0.0, 0.0, -s],
            BellLabel::PsiPlus => [0.0, s, s, 0.0],
            BellLabel::PsiMinus => [0.0, s, -s, 0.0],
        }
    }

    pub fn projector(self) -> CMatrix {
        let amps: Vec<C64> = self.amplitudes().iter().map(|&a| c(a, 0.0)).collect();
        qmath::projector(&amps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonal {
    lambdas: [f64; 4],
}

impl BellDiagonal {
    /// Builds a state from Bell-basis weights. Weights must be non-negative
    /// and sum to one within [`ELEMENTWISE`]; tiny negatives are clamped.
    pub fn from_lambdas(lambdas: [f64; 4]) -> Result<Self> {
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::Validation(format!("non-finite weights {lambdas:?}")));
        }
        if let Some(l) = lambdas.iter().find(|&&l| l < -ELEMENTWISE) {
            return Err(Error::Validation(format!(
                "Bell-diagonal weight {l} is negative"
            )));
        }
        let sum: f64 = lambdas.iter().sum();
        if (sum - 1.0).abs() > ELEMENTWISE {
            return Err(Error::Validation(format!(
                "Bell-diagonal weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self {
            lambdas: lambdas.map(|l| l.max(0.0)),
        })
    }

    /// Builds a state from the correlation triple. Triples outside the
    /// tetrahedron of valid states are rejected.
    pub fn from_correlations(t: Correlations) -> Result<Self> {
        let Correlations { tx, ty, tz } = t;
        let lambdas = [
            (1.0 + tx - ty + tz) / 4.0,
            (1.0 - tx + ty + tz) / 4.0,
            (1.0 + tx + ty - tz) / 4.0,
            (1.0 - tx - ty - tz) / 4.0,
        ];
        Self::from_lambdas(lambdas).map_err(|_| {
            Error::Validation(format!(
                "correlations ({tx}, {ty}, {tz}) do not describe a valid state (weights {lambdas:?})"
            ))
        })
    }

    pub fn lambdas(&self) -> [f64; 4] {
        self.lambdas
    }

    pub fn correlations(&self) -> Correlations {
        let [l1, l2, l3, l4] = self.lambdas;
        Correlations {
            tx: l1 - l2 + l3 - l4,
            ty: -(l1 - l2 - l3 + l4),
            tz: l1 + l2 - l3 - l4,
        }
    }

    /// `T_z ≥ T_x ≥ |T_y|`, equivalently `λ₁ ≥ λ₂ ≥ λ₃ ≥ λ₄`.
    pub fn is_canonical(&self) -> bool {
        let t = self.correlations();
        t.tz + ELEMENTWISE >= t.tx && t.tx + ELEMENTWISE >= t.ty.abs()
    }

    /// Uniform sample from the simplex of weights (Dirichlet(1,1,1,1) via
    /// sorted uniforms).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut cuts = [
            rng.random::<f64>(),
            rng.random::<f64>(),
            rng.random::<f64>(),
        ];
        cuts.sort_by(|a, b| a.total_cmp(b));
        let lambdas = [cuts[0], cuts[1] - cuts[0], cuts[2] - cuts[1], 1.0 - cuts[2]];
        Self { lambdas }
    }

    /// A random state already in canonical order.
    pub fn random_canonical<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut s = Self::random(rng);
        s.lambdas.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// The 4×4 density matrix in its Bloch (Pauli-correlation) form.
    pub fn to_density_matrix(&self) -> CMatrix {
        let t = self.correlations();
        let rho = identity(4)
            + tensor(&pauli_x(), &pauli_x()) * c(t.tx, 0.0)
            + tensor(&pauli_y(), &pauli_y()) * c(t.ty, 0.0)
            + tensor(&pauli_z(), &pauli_z()) * c(t.tz, 0.0);
        rho * c(0.25, 0.0)
    }
}

impl fmt::Display for BellDiagonal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c_, d] = self.lambdas;
        write!(f, "λ=({a:.6}, {b:.6}, {c_:.6}, {d:.6})")
    }
}

/// Local unitaries used to bring a Bell-diagonal state to canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalGate {
    /// `(σz + σx)/√2`
    Hzx,
    /// `(σy + σz)/√2`
    Hyz,
    /// `(σx + σy)/√2`
    Hxy,
    PauliX,
    PauliY,
    PauliZ,
}

impl LocalGate {
    pub fn matrix(self) -> CMatrix {
        let s = c(FRAC_1_SQRT_2, 0.0);
        match self {
            LocalGate::Hzx => (pauli_z() + pauli_x()) * s,
            LocalGate::Hyz => (pauli_y() + pauli_z()) * s,
            LocalGate::Hxy => (pauli_x() + pauli_y()) * s,
            LocalGate::PauliX => pauli_x(),
            LocalGate::PauliY => pauli_y(),
            LocalGate::PauliZ => pauli_z(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Both,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalOp {
    pub gate: LocalGate,
    pub side: Side,
}

impl LocalOp {
    /// The two-qubit unitary `U⊗U` or `𝕀⊗U`.
    pub fn unitary(&self) -> CMatrix {
        let u = self.gate.matrix();
        match self.side {
            Side::Both => tensor(&u, &u),
            Side::Bob => tensor(&identity(2), &u),
        }
    }
}

/// Ordered list of local unitaries applied during canonicalisation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalFrameRecord {
    ops: Vec<LocalOp>,
}

impl LocalFrameRecord {
    pub fn ops(&self) -> &[LocalOp] {
        &self.ops
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn push(&mut self, gate: LocalGate, side: Side) {
        self.ops.push(LocalOp { gate, side });
    }

    /// Applies the recorded unitaries, in order, to a two-qubit operator.
    pub fn replay(&self, rho: &CMatrix) -> CMatrix {
        self.ops.iter().fold(rho.clone(), |acc, op| {
            let u = op.unitary();
            &u * acc * u.adjoint()
        })
    }
}

/// Brings a Bell-diagonal state to `T_z ≥ T_x ≥ |T_y|` using local
/// unitaries, returning the new state and the unitaries applied.
///
/// Steps run in a fixed order: three magnitude swaps (`H_zx`, `H_yz`,
/// `H_xy` on both qubits) followed by one sign fix on Bob's qubit. Each
/// comparison is strict, so ties never trigger a gate and the map is
/// idempotent. The triple is transformed symbolically:
///
/// | gate        | action on `(T_x, T_y, T_z)` |
/// |-------------|-----------------------------|
/// | `H_zx` both | swap `T_x ↔ T_z`            |
/// | `H_yz` both | swap `T_y ↔ T_z`            |
/// | `H_xy` both | swap `T_x ↔ T_y`            |
/// | `σ_z` Bob   | negate `T_x, T_y`           |
/// | `σ_x` Bob   | negate `T_y, T_z`           |
/// | `σ_y` Bob   | negate `T_x, T_z`           |
pub fn canonicalize(s: &BellDiagonal) -> (BellDiagonal, LocalFrameRecord) {
    let Correlations {
        mut tx,
        mut ty,
        mut tz,
    } = s.correlations();
    let mut record = LocalFrameRecord::default();

    if tz.abs() < tx.abs() {
        std::mem::swap(&mut tx, &mut tz);
        record.push(LocalGate::Hzx, Side::Both);
    }
    if tz.abs() < ty.abs() {
        std::mem::swap(&mut ty, &mut tz);
        record.push(LocalGate::Hyz, Side::Both);
    }
    if tx.abs() < ty.abs() {
        std::mem::swap(&mut tx, &mut ty);
        record.push(LocalGate::Hxy, Side::Both);
    }

    match (tz < 0.0, tx < 0.0) {
        (false, false) => {}
        (false, true) => {
            tx = -tx;
            ty = -ty;
            record.push(LocalGate::PauliZ, Side::Bob);
        }
        (true, false) => {
            ty = -ty;
            tz = -tz;
            record.push(LocalGate::PauliX, Side::Bob);
        }
        (true, true) => {
            tx = -tx;
            tz = -tz;
            record.push(LocalGate::PauliY, Side::Bob);
        }
    }

    if record.is_empty() {
        return (*s, record);
    }
    // Every step permutes the weights, so the conversion is exact up to
    // rounding and the result is a valid state.
    let canonical = BellDiagonal::from_correlations(Correlations { tx, ty, tz })
        .expect("canonicalisation permutes valid weights");
    (canonical, record)
}

/// Pure state `|Ψ⟩_ABE = Σₖ √λₖ |Bellₖ⟩|eₖ⟩` on `2 ⊗ 2 ⊗ 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripartitePurification {
    amplitudes: Vec<C64>,
    source: BellDiagonal,
}

/// Factor dimensions of the purification, Alice ⊗ Bob ⊗ Eve.
pub const PURIFICATION_DIMS: [usize; 3] = [2, 2, 4];

impl TripartitePurification {
    /// Amplitudes indexed by `(2a + b) * 4 + e`.
    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn source(&self) -> &BellDiagonal {
        &self.source
    }

    /// `(Bell label, Eve index)` for each term with non-zero weight.
    pub fn components(&self) -> Vec<(BellLabel, usize)> {
        self.source
            .lambdas()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0.0)
            .map(|(k, _)| (BellLabel::ALL[k], k))
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn density(&self) -> CMatrix {
        qmath::projector(&self.amplitudes)
    }

    /// `ρ_AB = Tr_E |Ψ⟩⟨Ψ|`.
    pub fn reduced_ab(&self) -> CMatrix {
        qmath::partial_trace(&self.density(), &PURIFICATION_DIMS, &[2])
            .expect("purification dimensions are fixed")
    }

    /// `ρ_E = Tr_AB |Ψ⟩⟨Ψ|`.
    pub fn reduced_eve(&self) -> CMatrix {
        qmath::partial_trace(&self.density(), &PURIFICATION_DIMS, &[0, 1])
            .expect("purification dimensions are fixed")
    }
}

/// Gives Eve the purification of a Bell-diagonal state.
pub fn purify(s: &BellDiagonal) -> TripartitePurification {
    let mut amplitudes = vec![c(0.0, 0.0); 16];
    for (k, (&lambda, label)) in s.lambdas().iter().zip(BellLabel::ALL).enumerate() {
        let weight = lambda.sqrt();
        for (ab, &amp) in label.amplitudes().iter().enumerate() {
            amplitudes[ab * 4 + k] += c(weight * amp, 0.0);
        }
    }
    TripartitePurification {
        amplitudes,
        source: *s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{hermitian_eigenvalues, max_abs_diff, shannon_entropy, von_neumann_entropy};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bell_sum(s: &BellDiagonal) -> CMatrix {
        s.lambdas()
            .iter()
            .zip(BellLabel::ALL)
            .fold(CMatrix::zeros(4, 4), |acc, (&l, label)| {
                acc + label.projector() * c(l, 0.0)
            })
    }

    #[test]
    fn conversion_identities() {
        let s = BellDiagonal::from_lambdas([0.75, 0.25, 0.0, 0.0]).unwrap();
        let t = s.correlations();
        assert_abs_diff_eq!(t.tx, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.ty, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.tz, 1.0, epsilon = 1e-15);
        let back = BellDiagonal::from_correlations(t).unwrap();
        for (a, b) in back.lambdas().iter().zip(s.lambdas()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn density_matrix_matches_bell_projector_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = BellDiagonal::random(&mut rng);
            assert!(max_abs_diff(&s.to_density_matrix(), &bell_sum(&s)) < 1e-12);
        }
    }

    #[test]
    fn reference_density_matrices() {
        let phi = BellDiagonal::from_lambdas([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(max_abs_diff(&phi.to_density_matrix(), &BellLabel::PhiPlus.projector()) < 1e-15);

        let mixed = BellDiagonal::from_correlations(Correlations::new(0.0, 0.0, 0.0)).unwrap();
        assert!(max_abs_diff(&mixed.to_density_matrix(), &(identity(4) * c(0.25, 0.0))) < 1e-15);

        let s = BellDiagonal::from_lambdas([0.75, 0.25, 0.0, 0.0]).unwrap();
        let ev = hermitian_eigenvalues(&s.to_density_matrix());
        for (a, b) in ev.iter().zip([0.75, 0.25, 0.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn marginals_are_maximally_mixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let half = identity(2) * c(0.5, 0.0);
        for _ in 0..20 {
            let rho = BellDiagonal::random(&mut rng).to_density_matrix();
            let a = qmath::partial_trace(&rho, &[2, 2], &[1]).unwrap();
            let b = qmath::partial_trace(&rho, &[2, 2], &[0]).unwrap();
            assert!(max_abs_diff(&a, &half) < 1e-12);
            assert!(max_abs_diff(&b, &half) < 1e-12);
        }
    }

    #[test]
    fn invalid_states_rejected() {
        assert!(BellDiagonal::from_lambdas([0.5, 0.5, 0.1, -0.1]).is_err());
        assert!(BellDiagonal::from_lambdas([0.5, 0.5, 0.1, 0.0]).is_err());
        assert!(BellDiagonal::from_correlations(Correlations::new(1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn canonical_input_is_untouched() {
        let s = BellDiagonal::from_correlations(Correlations::new(0.5, -0.3, 0.8)).unwrap();
        let (out, record) = canonicalize(&s);
        assert!(record.is_empty());
        assert_eq!(out, s);
    }

    #[test]
    fn canonicalize_traced_example() {
        let s = BellDiagonal::from_correlations(Correlations::new(0.3, -0.8, 0.5)).unwrap();
        let (out, record) = canonicalize(&s);
        let t = out.correlations();
        assert_abs_diff_eq!(t.tx, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.ty, -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(t.tz, 0.8, epsilon = 1e-12);
        assert_eq!(
            record.ops(),
            &[
                LocalOp {
                    gate: LocalGate::Hyz,
                    side: Side::Both
                },
                LocalOp {
                    gate: LocalGate::Hxy,
                    side: Side::Both
                },
                LocalOp {
                    gate: LocalGate::PauliX,
                    side: Side::Bob
                },
            ]
        );
        let replayed = record.replay(&s.to_density_matrix());
        assert!(max_abs_diff(&replayed, &out.to_density_matrix()) < 1e-12);
    }

    #[test]
    fn canonicalize_singlet() {
        let s = BellDiagonal::from_correlations(Correlations::new(-1.0, -1.0, -1.0)).unwrap();
        assert_abs_diff_eq!(s.lambdas()[3], 1.0, epsilon = 1e-15);
        let (out, record) = canonicalize(&s);
        assert_abs_diff_eq!(out.correlations().tz, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.lambdas()[0], 1.0, epsilon = 1e-12);
        assert_eq!(
            record.ops(),
            &[LocalOp {
                gate: LocalGate::PauliY,
                side: Side::Bob
            }]
        );
        let replayed = record.replay(&s.to_density_matrix());
        assert!(max_abs_diff(&replayed, &out.to_density_matrix()) < 1e-12);
    }

    #[test]
    fn purification_of_pure_and_two_term_states() {
        let phi = purify(&BellDiagonal::from_lambdas([1.0, 0.0, 0.0, 0.0]).unwrap());
        assert_eq!(phi.components(), vec![(BellLabel::PhiPlus, 0)]);
        let s = FRAC_1_SQRT_2;
        // |Φ⁺⟩|e₁⟩ has amplitude 1/√2 on |00⟩|e₁⟩ and |11⟩|e₁⟩.
        assert_abs_diff_eq!(phi.amplitudes()[0].re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.amplitudes()[12].re, s, epsilon = 1e-15);

        let two = purify(&BellDiagonal::from_lambdas([0.5, 0.5, 0.0, 0.0]).unwrap());
        assert_eq!(two.components().len(), 2);
        let eve = two.reduced_eve();
        let expected = CMatrix::from_fn(4, 4, |i, j| {
            if i == j && i < 2 {
                c(0.5, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        assert!(max_abs_diff(&eve, &expected) < 1e-12);
    }

    #[test]
    fn eve_entropy_equals_weight_entropy() {
        let s = BellDiagonal::from_lambdas([0.4, 0.3, 0.2, 0.1]).unwrap();
        let p = purify(&s);
        let h_e = von_neumann_entropy(&p.reduced_eve()).unwrap();
        assert_abs_diff_eq!(h_e, shannon_entropy(&s.lambdas()), epsilon = 1e-12);
        assert_abs_diff_eq!(h_e, 1.846439, epsilon = 1e-6);
    }

    #[test]
    fn purification_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let s = BellDiagonal::random(&mut rng);
            let p = purify(&s);
            assert_abs_diff_eq!(p.norm(), 1.0, epsilon = 1e-12);
            assert!(max_abs_diff(&p.reduced_ab(), &s.to_density_matrix()) < 1e-12);
        }
    }
}
