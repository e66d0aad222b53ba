//! Asymptotic key rates and channel sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::qmath::h;
use crate::tolerances::ELEMENTWISE;

fn check_qber(q: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&q) {
        return Err(domain("Q", q, "[0, 0.5]"));
    }
    Ok(())
}

/// `1 − h(Q) − h((1 − |W|)/2)`. May be negative.
pub fn key_rate_qpi(q: f64, w: f64) -> Result<f64> {
    check_qber(q)?;
    if !w.is_finite() || w.abs() > 1.0 + ELEMENTWISE {
        return Err(domain("W", w, "[-1, 1]"));
    }
    Ok(1.0 - h(q) - h((1.0 - w.abs().min(1.0)) / 2.0))
}

/// `1 − 2h(Q)`. May be negative.
pub fn key_rate_bb84(q: f64) -> Result<f64> {
    check_qber(q)?;
    Ok(1.0 - 2.0 * h(q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    /// Channel parameter: `Q` for depolarizing sweeps, `θ` for rotation sweeps.
    pub parameter: f64,
    pub qber: f64,
    pub witness: f64,
    pub rate_qpi_raw: f64,
    pub rate_qpi: f64,
    pub rate_bb84_raw: f64,
    pub rate_bb84: f64,
}

impl RatePoint {
    fn new(parameter: f64, qber: f64, witness: f64) -> Result<Self> {
        // Above one half Bob relabels his outcomes; h is symmetric anyway.
        let q = qber.min(1.0 - qber);
        let rate_qpi_raw = key_rate_qpi(q, witness)?;
        let rate_bb84_raw = key_rate_bb84(q)?;
        Ok(Self {
            parameter,
            qber,
            witness,
            rate_qpi_raw,
            rate_qpi: rate_qpi_raw.max(0.0),
            rate_bb84_raw,
            rate_bb84: rate_bb84_raw.max(0.0),
        })
    }
}

/// `n` evenly spaced points on `[lo, hi]`, both ends included.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub const DEFAULT_GRID_POINTS: usize = 501;

/// Depolarizing channel: `W = (1 − 2Q)²`.
pub fn sweep_depolarizing(q_grid: &[f64]) -> Result<Vec<RatePoint>> {
    q_grid
        .par_iter()
        .map(|&q| {
            check_qber(q)?;
            RatePoint::new(q, q, (1.0 - 2.0 * q).powi(2))
        })
        .collect()
}

/// Rotation channel: `Q = (1 − cos θ)/2`, `W = 1`.
///
/// For `θ > π/2` the reported `qber` exceeds one half; the rates are then
/// evaluated at `1 − Q`, which is the error rate after Bob flips his bits.
pub fn sweep_rotation(theta_grid: &[f64]) -> Result<Vec<RatePoint>> {
    theta_grid
        .par_iter()
        .map(|&theta| {
            if !(0.0..=std::f64::consts::PI).contains(&theta) {
                return Err(domain("theta", theta, "[0, π]"));
            }
            let q = ((1.0 - theta.cos()) / 2.0).clamp(0.0, 1.0);
            RatePoint::new(theta, q, 1.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    /// The rate changes sign at `qber`.
    Root { qber: f64 },
    /// No sign change inside `[lo, hi)`; the rate stays positive up to `hi`.
    NoInteriorRoot { upper: f64 },
}

impl Threshold {
    pub fn qber(&self) -> f64 {
        match *self {
            Threshold::Root { qber } => qber,
            Threshold::NoInteriorRoot { upper } => upper,
        }
    }
}

pub const THRESHOLD_TOLERANCE: f64 = 1e-6;

/// Bisection for the QBER at which a decreasing rate curve crosses zero on
/// `[0, 0.5]`.
pub fn threshold_qber<F: Fn(f64) -> f64>(rate: F) -> Threshold {
    let (mut lo, mut hi) = (0.0, 0.5);
    if rate(lo) <= 0.0 || rate(hi) >= 0.0 {
        return Threshold::NoInteriorRoot { upper: hi };
    }
    while hi - lo > THRESHOLD_TOLERANCE / 4.0 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Threshold::Root {
        qber: 0.5 * (lo + hi),
    }
}

/// QPI rate under depolarizing noise, `1 − h(Q) − h(2Q − 2Q²)`.
pub fn depolarizing_qpi_rate(q: f64) -> f64 {
    1.0 - h(q) - h(2.0 * q - 2.0 * q * q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{depolarizing, rotation};
    use crate::discord::{correlators_eb, discord_lower_bound, PovmPair};
    use crate::states::BellLabel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn qpi_examples() {
        assert_abs_diff_eq!(key_rate_qpi(0.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(key_rate_qpi(0.05, 0.81).unwrap(), 0.2607, epsilon = 1e-4);
        let q = (1.0 - (std::f64::consts::PI / 9.0).cos()) / 2.0;
        assert_abs_diff_eq!(q, 0.03015, epsilon = 1e-5);
        assert_abs_diff_eq!(key_rate_qpi(q, 1.0).unwrap(), 0.8049, epsilon = 1e-4);
        assert!(key_rate_qpi(0.6, 1.0).is_err());
        assert!(key_rate_qpi(0.1, 1.5).is_err());
    }

    #[test]
    fn bb84_examples() {
        assert_abs_diff_eq!(key_rate_bb84(0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(key_rate_bb84(0.05).unwrap(), 0.42720, epsilon = 1e-5);
        let r = key_rate_bb84(0.11).unwrap();
        assert!(r.abs() < 1e-3, "{r}");
        assert!(key_rate_bb84(-0.01).is_err());
    }

    #[test]
    fn thresholds() {
        let bb84 = threshold_qber(|q| 1.0 - 2.0 * h(q)).qber();
        assert_abs_diff_eq!(bb84, 0.1100, epsilon = 1e-4);
        match threshold_qber(depolarizing_qpi_rate) {
            Threshold::Root { qber } => assert!(qber > 0.075 && qber < 0.085, "{qber}"),
            t => panic!("unexpected {t:?}"),
        }
        assert_eq!(
            threshold_qber(|q| 1.0 - h(q)),
            Threshold::NoInteriorRoot { upper: 0.5 }
        );
    }

    #[test]
    fn depolarizing_sweep() {
        let pts = sweep_depolarizing(&uniform_grid(0.0, 0.5, DEFAULT_GRID_POINTS)).unwrap();
        assert_eq!(pts.len(), 501);
        assert_abs_diff_eq!(pts[0].rate_qpi, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pts[0].rate_bb84, 1.0, epsilon = 1e-15);
        for p in &pts {
            assert_abs_diff_eq!(
                p.rate_qpi_raw,
                depolarizing_qpi_rate(p.qber),
                epsilon = 1e-12
            );
            assert!(p.rate_qpi >= 0.0 && p.rate_bb84 >= 0.0);
            if p.qber > 0.0 && p.qber < 0.11 {
                assert!(p.rate_qpi_raw < p.rate_bb84_raw);
            }
        }
        assert!(sweep_depolarizing(&[0.7]).is_err());
    }

    #[test]
    fn rotation_sweep() {
        let pts = sweep_rotation(&uniform_grid(
            0.0,
            std::f64::consts::PI,
            DEFAULT_GRID_POINTS,
        ))
        .unwrap();
        assert_abs_diff_eq!(pts[0].rate_qpi, 1.0, epsilon = 1e-15);
        for p in &pts {
            assert_abs_diff_eq!(p.witness, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(p.rate_qpi_raw, 1.0 - h(p.qber), epsilon = 1e-12);
            if (p.qber - 0.5).abs() > 1e-12 {
                assert!(p.rate_qpi_raw > 0.0);
            }
        }
        let q = 0.2;
        let theta = (1.0f64 - 2.0 * q).acos();
        let p = sweep_rotation(&[theta]).unwrap()[0];
        assert_abs_diff_eq!(p.rate_qpi, 0.2781, epsilon = 1e-4);
        assert!(p.rate_bb84_raw < 0.0);
    }

    #[test]
    fn sweep_witness_matches_channel_correlators() {
        let phi = BellLabel::PhiPlus.projector();
        for q in [0.0, 0.03, 0.2, 0.5] {
            let rho = depolarizing(q).unwrap().apply_to_bob(&phi).unwrap();
            let w = correlators_eb(&rho, &PovmPair::bb84(), &PovmPair::bb84())
                .unwrap()
                .witness();
            assert_abs_diff_eq!(
                w,
                sweep_depolarizing(&[q]).unwrap()[0].witness,
                epsilon = 1e-12
            );
        }
        for theta in [0.0, 0.5, 2.5] {
            let rho = rotation(theta).apply_to_bob(&phi).unwrap();
            let t = correlators_eb(&rho, &PovmPair::bb84(), &PovmPair::bb84()).unwrap();
            let p = sweep_rotation(&[theta]).unwrap()[0];
            assert_abs_diff_eq!(t.witness(), p.witness, epsilon = 1e-12);
            assert_abs_diff_eq!((1.0 - t.q[0][0]) / 2.0, p.qber, epsilon = 1e-12);
        }
    }

    #[test]
    fn monotonicity_and_consistency() {
        let grid = uniform_grid(0.0, 0.5, 51);
        let ws = uniform_grid(-1.0, 1.0, 41);
        for &w in &ws {
            for pair in grid.windows(2) {
                assert!(
                    key_rate_qpi(pair[1], w).unwrap() <= key_rate_qpi(pair[0], w).unwrap() + 1e-15
                );
            }
        }
        for &q in &grid {
            assert_eq!(key_rate_qpi(q, 1.0).unwrap(), 1.0 - h(q));
            for pair in uniform_grid(0.0, 1.0, 41).windows(2) {
                assert!(
                    key_rate_qpi(q, pair[1]).unwrap() + 1e-15 >= key_rate_qpi(q, pair[0]).unwrap()
                );
            }
            for &w in &ws {
                assert_abs_diff_eq!(
                    key_rate_qpi(q, w).unwrap(),
                    discord_lower_bound(w).unwrap() - h(q),
                    epsilon = 1e-15
                );
            }
        }
    }
}
