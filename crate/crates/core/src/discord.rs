//! Quantum discord of two-qubit states and its witness.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::BlochVector;
use crate::error::{domain, Error, Result};
use crate::qmath::{self, c, h, identity, tensor, CMatrix, C64};
use crate::states::{purify, BellDiagonal};
use crate::tolerances::{BLOCH, ELEMENTWISE};

/// Two-outcome qubit measurement `B_{b} = ((1 ± C)𝕀 ± T·σ)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovmPair {
    bloch: BlochVector,
    bias: f64,
}

impl PovmPair {
    pub fn new(bloch: BlochVector, bias: f64) -> Result<Self> {
        if !bias.is_finite() || bias.abs() > 1.0 - bloch.norm() + BLOCH {
            return Err(Error::Validation(format!(
                "bias {bias} exceeds 1 − |T| = {}",
                1.0 - bloch.norm()
            )));
        }
        Ok(Self { bloch, bias })
    }

    /// Projective measurement along a unit vector.
    pub fn projective(direction: BlochVector) -> Result<Self> {
        if !direction.is_pure() {
            return Err(Error::Validation(format!(
                "projective direction must be a unit vector, got norm {}",
                direction.norm()
            )));
        }
        Ok(Self {
            bloch: direction,
            bias: 0.0,
        })
    }

    pub fn sigma_z() -> Self {
        Self {
            bloch: BlochVector {
                x: 0.0,
                y: 0.0,
                z: 1.0,
            },
            bias: 0.0,
        }
    }

    pub fn sigma_x() -> Self {
        Self {
            bloch: BlochVector {
                x: 1.0,
                y: 0.0,
                z: 0.0,
            },
            bias: 0.0,
        }
    }

    /// `(σz, σx)`.
    pub fn bb84() -> [Self; 2] {
        [Self::sigma_z(), Self::sigma_x()]
    }

    pub fn bloch(&self) -> BlochVector {
        self.bloch
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn is_projective(&self) -> bool {
        self.bloch.is_pure() && self.bias == 0.0
    }

    /// `[B₀, B₁]`.
    pub fn elements(&self) -> [CMatrix; 2] {
        let t = self.bloch.operator();
        let id = identity(2);
        [
            (&id * c(1.0 + self.bias, 0.0) + &t) * c(0.5, 0.0),
            (&id * c(1.0 - self.bias, 0.0) - &t) * c(0.5, 0.0),
        ]
    }

    /// `B₀ − B₁ = C𝕀 + T·σ`.
    pub fn observable(&self) -> CMatrix {
        identity(2) * c(self.bias, 0.0) + self.bloch.operator()
    }

    /// Probability of outcome 0 on a state with Bloch vector `r`.
    pub fn prob_zero(&self, r: &BlochVector) -> f64 {
        0.5 * (1.0 + self.bias + self.bloch.dot(r))
    }
}

/// The 2×2 table of centred correlators `Q_xy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessTable {
    pub q: [[f64; 2]; 2],
}

impl WitnessTable {
    pub fn new(q: [[f64; 2]; 2]) -> Result<Self> {
        if q.iter()
            .flatten()
            .any(|v| !v.is_finite() || v.abs() > 1.0 + ELEMENTWISE)
        {
            return Err(Error::Validation(format!(
                "correlators {q:?} outside [−1, 1]"
            )));
        }
        Ok(Self { q })
    }

    /// `W = Q₀₀Q₁₁ − Q₀₁Q₁₀`.
    pub fn witness(&self) -> f64 {
        self.q[0][0] * self.q[1][1] - self.q[0][1] * self.q[1][0]
    }
}

/// `Q_xy = ⟨A_x⊗B_y⟩ − ⟨A_x⟩⟨B_y⟩` for the ±1-valued observables of each pair.
pub fn correlators_eb(
    rho: &CMatrix,
    alice: &[PovmPair; 2],
    bob: &[PovmPair; 2],
) -> Result<WitnessTable> {
    if rho.shape() != (4, 4) {
        return Err(Error::Validation(
            "correlators need a two-qubit state".into(),
        ));
    }
    qmath::validate_density(rho)?;
    let rho_a = qmath::partial_trace(rho, &[2, 2], &[1])?;
    let rho_b = qmath::partial_trace(rho, &[2, 2], &[0])?;
    let mut q = [[0.0; 2]; 2];
    for (x, a) in alice.iter().enumerate() {
        let oa = a.observable();
        let ea = qmath::expectation(&rho_a, &oa);
        for (y, b) in bob.iter().enumerate() {
            let ob = b.observable();
            let joint = qmath::expectation(rho, &tensor(&oa, &ob));
            q[x][y] = joint - ea * qmath::expectation(&rho_b, &ob);
        }
    }
    WitnessTable::new(q)
}

pub fn witness(w: &WitnessTable) -> f64 {
    w.witness()
}

/// Prepare-and-measure statistics `p(b = 0 | x, a, y)`, indexed `[x][a][y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmStatistics {
    pub p: [[[f64; 2]; 2]; 2],
}

impl PmStatistics {
    pub fn new(p: [[[f64; 2]; 2]; 2]) -> Result<Self> {
        if let Some(v) = p
            .iter()
            .flatten()
            .flatten()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(domain("p(b=0|x,a,y)", *v, "[0, 1]"));
        }
        Ok(Self { p })
    }

    /// `Q_xy = p(x0y) − p(x1y)`.
    pub fn correlators(&self) -> [[f64; 2]; 2] {
        let mut q = [[0.0; 2]; 2];
        for (x, row) in q.iter_mut().enumerate() {
            for (y, v) in row.iter_mut().enumerate() {
                *v = self.p[x][0][y] - self.p[x][1][y];
            }
        }
        q
    }

    pub fn table(&self) -> WitnessTable {
        WitnessTable {
            q: self.correlators(),
        }
    }
}

pub fn witness_pm(stats: &PmStatistics) -> f64 {
    stats.table().witness()
}

fn check_abs_ordering(s: &BellDiagonal) -> Result<()> {
    let t = s.correlations();
    if t.tz.abs() + ELEMENTWISE < t.tx.abs() || t.tx.abs() + ELEMENTWISE < t.ty.abs() {
        return Err(Error::Validation(format!(
            "state {s} is not canonical (|Tz| ≥ |Tx| ≥ |Ty| required); canonicalize first"
        )));
    }
    Ok(())
}

/// `W_max = |T_z T_x|` for a canonical state.
pub fn witness_max(s: &BellDiagonal) -> Result<f64> {
    check_abs_ordering(s)?;
    let t = s.correlations();
    Ok((t.tz * t.tx).abs())
}

/// `1 − (λ₁+λ₂) h(λ₂/(λ₁+λ₂)) − (λ₃+λ₄) h(λ₄/(λ₃+λ₄))` for `λ₁ ≥ λ₂ ≥ λ₃ ≥ λ₄`.
pub fn discord_closed_form(s: &BellDiagonal) -> Result<f64> {
    let [l1, l2, l3, l4] = s.lambdas();
    if l1 + ELEMENTWISE < l2 || l2 + ELEMENTWISE < l3 || l3 + ELEMENTWISE < l4 {
        return Err(Error::Validation(format!(
            "state {s} is not canonical (λ₁ ≥ λ₂ ≥ λ₃ ≥ λ₄ required); canonicalize first"
        )));
    }
    let group = |a: f64, b: f64| {
        if a + b > 0.0 {
            (a + b) * h(b / (a + b))
        } else {
            0.0
        }
    };
    Ok((1.0 - group(l1, l2) - group(l3, l4)).clamp(0.0, 1.0))
}

/// `1 − h((1 − |W|)/2)`.
pub fn discord_lower_bound(w: f64) -> Result<f64> {
    if !w.is_finite() || w.abs() > 1.0 + ELEMENTWISE {
        return Err(domain("W", w, "[-1, 1]"));
    }
    Ok(1.0 - h((1.0 - w.abs().min(1.0)) / 2.0))
}

/// Grid and refinement settings for minimising over measurement directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereSearch {
    /// Azimuth samples on `[0, 2π]`.
    pub n_phi: usize,
    /// Polar samples on `[0, π]`.
    pub n_theta: usize,
    /// Pattern-search iterations after the grid.
    pub iterations: usize,
    pub shrink: f64,
}

impl Default for SphereSearch {
    fn default() -> Self {
        Self {
            n_phi: 181,
            n_theta: 91,
            iterations: 40,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereMinimum {
    pub value: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SphereMinimum {
    pub fn direction(&self) -> BlochVector {
        direction(self.theta, self.phi)
    }
}

pub fn direction(theta: f64, phi: f64) -> BlochVector {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    BlochVector {
        x: st * cp,
        y: st * sp,
        z: ct,
    }
}

/// Grid search over `(θ, φ)` followed by a compass pattern search.
///
/// Grid points are evaluated in parallel. Ties are broken towards the
/// smallest `(i_phi, i_theta)` index so the result does not depend on
/// scheduling.
pub fn minimize_over_sphere<F>(f: F, search: &SphereSearch) -> SphereMinimum
where
    F: Fn(BlochVector) -> f64 + Sync,
{
    let n_phi = search.n_phi.max(2);
    let n_theta = search.n_theta.max(2);
    let d_phi = 2.0 * PI / (n_phi - 1) as f64;
    let d_theta = PI / (n_theta - 1) as f64;

    let (value, _, theta, phi) = (0..n_phi)
        .into_par_iter()
        .flat_map_iter(|i| (0..n_theta).map(move |j| (i, j)))
        .map(|(i, j)| {
            let phi = i as f64 * d_phi;
            let theta = j as f64 * d_theta;
            (f(direction(theta, phi)), (i, j), theta, phi)
        })
        .reduce(
            || (f64::INFINITY, (usize::MAX, usize::MAX), 0.0, 0.0),
            |a, b| match a.0.total_cmp(&b.0) {
                std::cmp::Ordering::Less => a,
                std::cmp::Ordering::Greater => b,
                std::cmp::Ordering::Equal => {
                    if a.1 <= b.1 {
                        a
                    } else {
                        b
                    }
                }
            },
        );

    let mut best = SphereMinimum { value, theta, phi };
    let mut step = d_theta.min(d_phi);
    for _ in 0..search.iterations {
        let candidates = [
            (best.theta + step, best.phi),
            (best.theta - step, best.phi),
            (best.theta, best.phi + step),
            (best.theta, best.phi - step),
        ];
        let mut moved = false;
        for (theta, phi) in candidates {
            let v = f(direction(theta, phi));
            if v < best.value {
                best = SphereMinimum {
                    value: v,
                    theta,
                    phi,
                };
                moved = true;
            }
        }
        if !moved {
            step *= search.shrink;
        }
    }
    best
}

/// Unnormalised `Tr_B[(𝕀⊗P) ρ]` for `P = (𝕀 ± n·σ)/2`.
fn conditional_block(rho: &CMatrix, n: &BlochVector, sign: f64) -> [[C64; 2]; 2] {
    let p = [
        [
            c(0.5 * (1.0 + sign * n.z), 0.0),
            c(0.5 * sign * n.x, -0.5 * sign * n.y),
        ],
        [
            c(0.5 * sign * n.x, 0.5 * sign * n.y),
            c(0.5 * (1.0 - sign * n.z), 0.0),
        ],
    ];
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (ip, v) in row.iter_mut().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    *v += rho[(2 * i + j, 2 * ip + k)] * p[k][j];
                }
            }
        }
    }
    out
}

/// `p · S(M/p)` for an unnormalised positive 2×2 block of trace `p`.
fn weighted_entropy_2x2(m: &[[C64; 2]; 2]) -> f64 {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let p = a + d;
    if p <= 0.0 {
        return 0.0;
    }
    let r = (0.25 * (a - d) * (a - d) + m[0][1].norm_sqr()).sqrt();
    let mut s = p * p.log2();
    for mu in [0.5 * p + r, 0.5 * p - r] {
        if mu > 0.0 {
            s -= mu * mu.log2();
        }
    }
    s
}

/// `Σ_b p_b S(ρ_{A|b})` after measuring Bob along `n`.
fn measured_conditional_entropy(rho: &CMatrix, n: &BlochVector) -> f64 {
    weighted_entropy_2x2(&conditional_block(rho, n, 1.0))
        + weighted_entropy_2x2(&conditional_block(rho, n, -1.0))
}

/// `D(A|B) = min_n Σ_b p_b S(ρ_{A|b}) + S(B) − S(AB)` over projective
/// measurements on Bob's qubit.
pub fn discord_brute_force(rho: &CMatrix) -> Result<f64> {
    Ok(discord_brute_force_with(rho, &SphereSearch::default())?.value)
}

/// As [`discord_brute_force`], also reporting the minimising direction.
pub fn discord_brute_force_with(rho: &CMatrix, search: &SphereSearch) -> Result<SphereMinimum> {
    if rho.shape() != (4, 4) {
        return Err(Error::Validation("discord needs a two-qubit state".into()));
    }
    qmath::validate_density(rho)?;
    let rho_b = qmath::partial_trace(rho, &[2, 2], &[0])?;
    let offset = qmath::entropy_unchecked(&rho_b) - qmath::entropy_unchecked(rho);
    let mut best = minimize_over_sphere(|n| measured_conditional_entropy(rho, &n), search);
    best.value = (best.value + offset).max(0.0);
    Ok(best)
}

/// `H(B₀|E)` for Eve holding the purification of `s` and Bob measuring
/// along the unit vector `b0`.
///
/// Built literally from `|Ψ⟩_ABE`: Bob's outcome is recorded in a classical
/// register, Alice is traced out and `H(B₀E) − H(E)` is returned.
pub fn conditional_entropy_b0(s: &BellDiagonal, b0: &BlochVector) -> Result<f64> {
    if !b0.is_pure() {
        return Err(Error::Validation(format!(
            "measurement direction must be a unit vector, got norm {}",
            b0.norm()
        )));
    }
    let psi = purify(s);
    let rho = psi.density();
    let projectors = PovmPair::projective(*b0)?.elements();
    let id2 = identity(2);
    let id4 = identity(4);
    let mut rho_b0e = CMatrix::zeros(8, 8);
    for (b, p) in projectors.iter().enumerate() {
        let lifted = tensor(&tensor(&id2, p), &id4);
        let post = &lifted * &rho * &lifted;
        let be = qmath::partial_trace(&post, &crate::states::PURIFICATION_DIMS, &[0])?;
        // Bob's qubit now carries only the classical outcome b.
        let eve = qmath::partial_trace(&be, &[2, 4], &[0])?;
        rho_b0e.view_mut((4 * b, 4 * b), (4, 4)).copy_from(&eve);
    }
    let h_be = qmath::entropy_unchecked(&rho_b0e);
    let h_e = qmath::entropy_unchecked(&psi.reduced_eve());
    Ok(h_be - h_e)
}

/// `H(AB₀) − H(AB)`, the same quantity evaluated without Eve.
pub fn conditional_entropy_b0_via_ab(s: &BellDiagonal, b0: &BlochVector) -> f64 {
    let rho = s.to_density_matrix();
    let blocks = [
        conditional_block(&rho, b0, 1.0),
        conditional_block(&rho, b0, -1.0),
    ];
    let probs: Vec<f64> = blocks.iter().map(|m| m[0][0].re + m[1][1].re).collect();
    let h_ab0 =
        qmath::shannon_entropy(&probs) + blocks.iter().map(weighted_entropy_2x2).sum::<f64>();
    h_ab0 - qmath::entropy_unchecked(&rho)
}
