//! Single-qubit channels in Kraus form.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::qmath::{self, bloch_operator, c, identity, pauli_x, pauli_y, pauli_z, tensor, CMatrix};
use crate::tolerances::{BLOCH, ELEMENTWISE};

/// A real three-vector of norm at most one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Self { x, y, z };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) || v.norm() > 1.0 + BLOCH {
            return Err(Error::Validation(format!(
                "Bloch vector ({x}, {y}, {z}) has norm {} > 1",
                v.norm()
            )));
        }
        Ok(v)
    }

    pub fn zero() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Unit vector in the x-z plane at angle `phi` from +z towards +x.
    pub fn xz(phi: f64) -> Self {
        Self {
            x: phi.sin(),
            y: 0.0,
            z: phi.cos(),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_pure(&self) -> bool {
        (self.norm() - 1.0).abs() <= BLOCH
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            x: self.x * k,
            y: self.y * k,
            z: self.z * k,
        }
    }

    /// `v · σ`.
    pub fn operator(&self) -> CMatrix {
        bloch_operator(self.as_array())
    }

    /// `(𝕀 + v · σ)/2`.
    pub fn density(&self) -> CMatrix {
        (identity(2) + self.operator()) * c(0.5, 0.0)
    }

    /// `(Tr ρσx, Tr ρσy, Tr ρσz)` of a qubit state.
    pub fn from_density(rho: &CMatrix) -> Self {
        Self {
            x: qmath::expectation(rho, &pauli_x()),
            y: qmath::expectation(rho, &pauli_y()),
            z: qmath::expectation(rho, &pauli_z()),
        }
    }

    /// The vector `v` of a traceless observable `v · σ`.
    pub fn from_observable(m: &CMatrix) -> Self {
        Self::from_density(m).scale(0.5)
    }

    fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    fn from_vector(v: Vector3<f64>) -> Self {
        Self {
            x: v.x,
            y: v.y,
            z: v.z,
        }
    }
}

/// Completely positive map given by operation elements `{E_k}`.
///
/// Instances built by [`KrausChannel::new`] are trace preserving. The
/// [`dual`](KrausChannel::dual) of a non-unital channel is only unital, so it
/// is meant for [`apply_operator`](KrausChannel::apply_operator).
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    ops: Vec<CMatrix>,
}

impl KrausChannel {
    /// Validates shape and `Σ E_k† E_k = 𝕀`.
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = ops.first() else {
            return Err(Error::Validation(
                "channel needs at least one operation element".into(),
            ));
        };
        let dim = first.nrows();
        if ops.iter().any(|e| e.shape() != (dim, dim)) {
            return Err(Error::Validation(
                "operation elements must share a square shape".into(),
            ));
        }
        let ch = Self { ops };
        let dev = qmath::max_abs_diff(&ch.completeness(), &identity(dim));
        if dev > ELEMENTWISE {
            return Err(Error::Validation(format!(
                "Kraus completeness violated by {dev:e}"
            )));
        }
        Ok(ch)
    }

    pub fn identity() -> Self {
        Self {
            ops: vec![identity(2)],
        }
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    /// `Σ E_k† E_k`.
    pub fn completeness(&self) -> CMatrix {
        self.ops
            .iter()
            .fold(CMatrix::zeros(self.dim(), self.dim()), |acc, e| {
                acc + e.adjoint() * e
            })
    }

    pub fn is_trace_preserving(&self) -> bool {
        qmath::max_abs_diff(&self.completeness(), &identity(self.dim())) <= ELEMENTWISE
    }

    /// `Σ E_k E_k† = 𝕀`.
    pub fn is_unital(&self) -> bool {
        let s = self
            .ops
            .iter()
            .fold(CMatrix::zeros(self.dim(), self.dim()), |acc, e| {
                acc + e * e.adjoint()
            });
        qmath::max_abs_diff(&s, &identity(self.dim())) <= ELEMENTWISE
    }

    /// `Σ E_k ρ E_k†` for a density matrix.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.shape() != (self.dim(), self.dim()) {
            return Err(Error::Validation(format!(
                "expected a {0}×{0} state, got {1}×{2}",
                self.dim(),
                rho.nrows(),
                rho.ncols()
            )));
        }
        qmath::validate_density(rho)?;
        Ok(self.apply_operator(rho))
    }

    /// `Σ E_k M E_k†` for any operator of matching size.
    pub fn apply_operator(&self, m: &CMatrix) -> CMatrix {
        self.ops
            .iter()
            .fold(CMatrix::zeros(m.nrows(), m.ncols()), |acc, e| {
                acc + e * m * e.adjoint()
            })
    }

    /// `(𝟙 ⊗ ℰ)(ρ_AB)` for a two-qubit state.
    pub fn apply_to_bob(&self, rho_ab: &CMatrix) -> Result<CMatrix> {
        if rho_ab.shape() != (4, 4) || self.dim() != 2 {
            return Err(Error::Validation(
                "apply_to_bob needs a qubit channel and a 4×4 state".into(),
            ));
        }
        qmath::validate_density(rho_ab)?;
        let id = identity(2);
        Ok(self.ops.iter().fold(CMatrix::zeros(4, 4), |acc, e| {
            let lifted = tensor(&id, e);
            acc + &lifted * rho_ab * lifted.adjoint()
        }))
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &KrausChannel) -> KrausChannel {
        let ops = self
            .ops
            .iter()
            .flat_map(|f| inner.ops.iter().map(move |e| f * e))
            .collect();
        KrausChannel { ops }
    }

    /// Adjoint map with elements `{E_k†}`, so that
    /// `Tr[ρ ℰ†(M)] = Tr[ℰ(ρ) M]`.
    pub fn dual(&self) -> KrausChannel {
        KrausChannel {
            ops: self.ops.iter().map(|e| e.adjoint()).collect(),
        }
    }

    /// Conjugates every element by a fixed unitary: `E_k → V E_k V†`.
    pub fn conjugated(&self, v: &CMatrix) -> KrausChannel {
        KrausChannel {
            ops: self.ops.iter().map(|e| v * e * v.adjoint()).collect(),
        }
    }
}

/// Depolarizing channel with error probability `q`; Bloch vectors shrink by
/// `1 − 2q`.
pub fn depolarizing(q: f64) -> Result<KrausChannel> {
    if !(0.0..=0.5).contains(&q) {
        return Err(domain("Q", q, "[0, 0.5]"));
    }
    let a = c((1.0 - 1.5 * q).sqrt(), 0.0);
    let b = c((q / 2.0).sqrt(), 0.0);
    KrausChannel::new(vec![
        identity(2) * a,
        pauli_x() * b,
        pauli_y() * b,
        pauli_z() * b,
    ])
}

/// Rotation in the x-z plane with `U|0⟩ = cos(θ/2)|0⟩ − sin(θ/2)|1⟩`.
pub fn rotation(theta: f64) -> KrausChannel {
    KrausChannel {
        ops: vec![rotation_unitary(theta)],
    }
}

pub fn rotation_unitary(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(s, 0.0), c(-s, 0.0), c(co, 0.0)])
}

/// A unital channel together with the pure source observables it maps onto
/// the requested targets.
#[derive(Debug, Clone)]
pub struct UnitalMap {
    pub channel: KrausChannel,
    /// `A₀`, `A₁` as Bloch vectors of unit length.
    pub sources: [BlochVector; 2],
    /// Rotation angle of the dephasing stage.
    pub theta: f64,
}

impl UnitalMap {
    pub fn source_operator(&self, x: usize) -> CMatrix {
        self.sources[x].operator()
    }
}

/// Builds a unital channel `ℰ` and pure observables `A₀, A₁` with
/// `ℰ(A₀) = S₀z σz` and `ℰ(A₁) = S₁x σx + S₁z σz`.
///
/// `ℰ = ℰ₁∘ℰ₂`, where `ℰ₂` mixes `𝕀` and `R_z(θ)` equally and `ℰ₁` mixes
/// `𝕀` and `σy` with weights `(1 ± S₀z)/2`. `A₁` has a `σy` component of
/// length `√(S₀z² − S₁x² − S₁z²)` that `ℰ₂` rotates into the x axis before
/// `ℰ₁` shrinks the x-z plane by `S₀z`.
pub fn construct_unital_map(s0z: f64, s1x: f64, s1z: f64) -> Result<UnitalMap> {
    if !(0.0..=1.0).contains(&s0z) {
        return Err(domain("S0z", s0z, "[0, 1]"));
    }
    if !(s1x.is_finite() && s1z.is_finite()) {
        return Err(Error::Validation("target components must be finite".into()));
    }
    let gap = s0z * s0z - s1x * s1x - s1z * s1z;
    if gap < -ELEMENTWISE {
        return Err(Error::Infeasible(format!(
            "S0z² = {} is smaller than S1x² + S1z² = {}",
            s0z * s0z,
            s1x * s1x + s1z * s1z
        )));
    }
    let r = gap.max(0.0).sqrt();
    // atan2 gives θ = π when S1x = 0 and θ = 0 on the boundary r = 0.
    let theta = 2.0 * r.atan2(s1x);

    let half = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let (sh, ch) = (theta / 2.0).sin_cos();
    let rz = identity(2) * c(ch, 0.0) + pauli_z() * c(0.0, sh);
    let e2 = KrausChannel {
        ops: vec![identity(2) * half, rz * half],
    };
    let e1 = KrausChannel {
        ops: vec![
            identity(2) * c(((1.0 + s0z) / 2.0).sqrt(), 0.0),
            pauli_y() * c(((1.0 - s0z) / 2.0).sqrt(), 0.0),
        ],
    };
    let channel = KrausChannel::new(e1.compose(&e2).ops)?;

    let a1 = if s0z > 0.0 {
        BlochVector {
            x: s1x / s0z,
            y: r / s0z,
            z: s1z / s0z,
        }
    } else {
        // Only the zero target is feasible here; any pure A₁ maps to zero.
        BlochVector {
            x: 1.0,
            y: 0.0,
            z: 0.0,
        }
    };
    let a1 = a1.scale(1.0 / a1.norm());
    Ok(UnitalMap {
        channel,
        sources: [
            BlochVector {
                x: 0.0,
                y: 0.0,
                z: 1.0,
            },
            a1,
        ],
        theta,
    })
}

/// Proper rotation taking a target pair into the frame used by
/// [`construct_unital_map`]: `S₀` along +z and `S₁` in the x-z plane with
/// non-negative x component.
#[derive(Debug, Clone)]
pub struct FrameRotation {
    rotation: Rotation3<f64>,
}

impl FrameRotation {
    pub fn for_targets(s0: &BlochVector, s1: &BlochVector) -> Self {
        let v0 = s0.to_vector();
        let v1 = s1.to_vector();
        let e3 = if v0.norm() > ELEMENTWISE {
            v0.normalize()
        } else if v1.norm() > ELEMENTWISE {
            v1.normalize()
        } else {
            Vector3::z()
        };
        let perp = v1 - e3 * v1.dot(&e3);
        let e1 = if perp.norm() > ELEMENTWISE {
            perp.normalize()
        } else {
            let trial = if e3.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            (trial - e3 * trial.dot(&e3)).normalize()
        };
        let e2 = e3.cross(&e1);
        let m = Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]);
        Self {
            rotation: Rotation3::from_matrix_unchecked(m),
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        *self.rotation.matrix()
    }

    pub fn apply(&self, v: &BlochVector) -> BlochVector {
        BlochVector::from_vector(self.rotation * v.to_vector())
    }

    pub fn apply_inverse(&self, v: &BlochVector) -> BlochVector {
        BlochVector::from_vector(self.rotation.inverse() * v.to_vector())
    }

    /// `U` with `U (v·σ) U† = (Rv)·σ`.
    pub fn unitary(&self) -> CMatrix {
        let q = UnitQuaternion::from_rotation_matrix(&self.rotation);
        identity(2) * c(q.w, 0.0)
            - (pauli_x() * c(q.i, 0.0) + pauli_y() * c(q.j, 0.0) + pauli_z() * c(q.k, 0.0))
                * c(0.0, 1.0)
    }
}

/// [`construct_unital_map`] for targets in an arbitrary orientation. The
/// returned channel and sources live in the caller's frame.
pub fn construct_unital_map_for(
    s0: &BlochVector,
    s1: &BlochVector,
) -> Result<(UnitalMap, FrameRotation)> {
    let frame = FrameRotation::for_targets(s0, s1);
    let t0 = frame.apply(s0);
    let t1 = frame.apply(s1);
    let map = construct_unital_map(t0.z.max(0.0), t1.x.max(0.0), t1.z)?;
    let u = frame.unitary();
    let channel = map.channel.conjugated(&u.adjoint());
    let sources = map.sources.map(|a| frame.apply_inverse(&a));
    Ok((
        UnitalMap {
            channel,
            sources,
            theta: map.theta,
        },
        frame,
    ))
}
