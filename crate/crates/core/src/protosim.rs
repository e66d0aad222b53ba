//! Round-by-round Monte Carlo of the prepare-and-measure protocol.
//!
//! Each round draws `x, a, y` uniformly, sends `ℰ(τ_{x,a})` and samples
//! Bob's outcome `b` from the Born rule. Rounds are grouped into blocks of
//! [`BLOCK_ROUNDS`]; block `k` uses a ChaCha8 generator seeded from the run
//! seed with stream `k`, so results do not depend on the thread count.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{BlochVector, KrausChannel};
use crate::discord::{PmStatistics, PovmPair};
use crate::error::{Error, Result};
use crate::qmath::{self, CMatrix};

pub const BLOCK_ROUNDS: usize = 1 << 16;

/// Recorded in every report that depends on simulated data.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng (rand_chacha 0.9), seed_from_u64, one stream per 65536-round block";

pub const DEFAULT_ESTIMATION_FRACTION: f64 = 0.1;

/// The four states `τ_{x,a}` Alice actually prepares, indexed `[x][a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub states: [[BlochVector; 2]; 2],
}

/// Rotates a vector in the x-z plane by `delta` (from +z towards +x).
fn rotate_xz(v: &BlochVector, delta: f64) -> BlochVector {
    let (s, c) = delta.sin_cos();
    BlochVector {
        x: c * v.x + s * v.z,
        y: v.y,
        z: c * v.z - s * v.x,
    }
}

fn bb84_vectors() -> [[BlochVector; 2]; 2] {
    let z = BlochVector {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };
    let x = BlochVector {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    [[z, z.scale(-1.0)], [x, x.scale(-1.0)]]
}

impl SourceSpec {
    pub fn from_bloch(states: [[BlochVector; 2]; 2]) -> Result<Self> {
        for v in states.iter().flatten() {
            BlochVector::new(v.x, v.y, v.z)?;
        }
        Ok(Self { states })
    }

    pub fn from_densities(states: &[[CMatrix; 2]; 2]) -> Result<Self> {
        let mut out = [[BlochVector::zero(); 2]; 2];
        for x in 0..2 {
            for a in 0..2 {
                let rho = &states[x][a];
                if rho.shape() != (2, 2) {
                    return Err(Error::Validation(format!(
                        "τ[{x}][{a}] is not a qubit state"
                    )));
                }
                qmath::validate_density(rho)?;
                out[x][a] = BlochVector::from_density(rho);
            }
        }
        Ok(Self { states: out })
    }

    /// `|0⟩, |1⟩` for `x = 0` and `|+⟩, |−⟩` for `x = 1`.
    pub fn bb84() -> Self {
        Self {
            states: bb84_vectors(),
        }
    }

    /// Equal mixture of the BB84 states and the BB84 states rotated by
    /// `delta` in the x-z plane.
    pub fn uncharacterized(delta: f64) -> Self {
        let states = bb84_vectors().map(|row| {
            row.map(|v| {
                let r = rotate_xz(&v, delta);
                BlochVector {
                    x: 0.5 * (v.x + r.x),
                    y: 0.5 * (v.y + r.y),
                    z: 0.5 * (v.z + r.z),
                }
            })
        });
        Self { states }
    }

    /// `τ̄_{x,a} = 𝕀 − τ_{x,a⊕1}`, whose Bloch vector is `−s_{x,a⊕1}`.
    pub fn complement(&self) -> Self {
        let s = &self.states;
        Self {
            states: [
                [s[0][1].scale(-1.0), s[0][0].scale(-1.0)],
                [s[1][1].scale(-1.0), s[1][0].scale(-1.0)],
            ],
        }
    }

    pub fn density(&self, x: usize, a: usize) -> CMatrix {
        self.states[x][a].density()
    }

    /// `S_x = (s_{x,0} − s_{x,1})/2`.
    pub fn effective_bloch(&self, x: usize) -> BlochVector {
        let [v0, v1] = self.states[x];
        BlochVector {
            x: 0.5 * (v0.x - v1.x),
            y: 0.5 * (v0.y - v1.y),
            z: 0.5 * (v0.z - v1.z),
        }
    }
}

/// Bob's two POVMs, indexed by `y`, and per-outcome detection efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasSpec {
    pub povms: [PovmPair; 2],
    /// Probability that outcome `b` produces a click. Rounds without a click
    /// are dropped from the log.
    pub efficiency: [f64; 2],
}

impl MeasSpec {
    pub fn new(povms: [PovmPair; 2]) -> Self {
        Self {
            povms,
            efficiency: [1.0, 1.0],
        }
    }

    pub fn bb84() -> Self {
        Self::new(PovmPair::bb84())
    }

    /// BB84 measurements mixed with their `delta`-rotated versions.
    pub fn uncharacterized(delta: f64) -> Self {
        let src = SourceSpec::uncharacterized(delta);
        let povms = [0, 1]
            .map(|y| PovmPair::new(src.effective_bloch(y), 0.0).expect("mixture of unit vectors"));
        Self::new(povms)
    }

    /// Replaces the bias of each POVM; fails if a bias is not admissible.
    pub fn with_bias(&self, bias: [f64; 2]) -> Result<Self> {
        Ok(Self {
            povms: [
                PovmPair::new(self.povms[0].bloch(), bias[0])?,
                PovmPair::new(self.povms[1].bloch(), bias[1])?,
            ],
            efficiency: self.efficiency,
        })
    }

    pub fn with_efficiency(&self, efficiency: [f64; 2]) -> Result<Self> {
        if efficiency.iter().any(|e| !(0.0..=1.0).contains(e))
            || efficiency.iter().all(|&e| e == 0.0)
        {
            return Err(Error::Validation(format!(
                "invalid detection efficiencies {efficiency:?}"
            )));
        }
        Ok(Self {
            povms: self.povms,
            efficiency,
        })
    }
}

/// One protocol round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Round {
    pub x: u8,
    pub a: u8,
    pub y: u8,
    pub b: u8,
}

impl Round {
    fn pack(&self) -> u8 {
        (self.x << 3) | (self.a << 2) | (self.y << 1) | self.b
    }

    fn unpack(r: u8) -> Self {
        Self {
            x: (r >> 3) & 1,
            a: (r >> 2) & 1,
            y: (r >> 1) & 1,
            b: r & 1,
        }
    }
}

/// Index into [`RoundLog::counts`].
pub fn cell_index(x: usize, a: usize, y: usize, b: usize) -> usize {
    (x << 3) | (a << 2) | (y << 1) | b
}

/// Per-round records packed as `x a y b` bits, plus their 16 counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundLog {
    records: Vec<u8>,
    counts: [u64; 16],
}

impl RoundLog {
    pub fn from_rounds<I: IntoIterator<Item = Round>>(rounds: I) -> Self {
        Self::from_packed(rounds.into_iter().map(|r| r.pack()).collect())
    }

    fn from_packed(records: Vec<u8>) -> Self {
        let mut counts = [0u64; 16];
        for &r in &records {
            counts[r as usize] += 1;
        }
        Self { records, counts }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rounds(&self) -> impl Iterator<Item = Round> + '_ {
        self.records.iter().map(|&r| Round::unpack(r))
    }

    pub fn counts(&self) -> &[u64; 16] {
        &self.counts
    }

    pub fn count(&self, x: usize, a: usize, y: usize, b: usize) -> u64 {
        self.counts[cell_index(x, a, y, b)]
    }

    /// `N(x, a, y)` summed over `b`.
    pub fn cell_total(&self, x: usize, a: usize, y: usize) -> u64 {
        self.count(x, a, y, 0) + self.count(x, a, y, 1)
    }

    fn filter_indices(&self, keep: &[bool]) -> Self {
        let records = self
            .records
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(&r, _)| r)
            .collect();
        Self::from_packed(records)
    }
}

/// Bloch vectors arriving at Bob, `[x][a]`.
fn received_states(src: &SourceSpec, ch: &KrausChannel) -> Result<[[BlochVector; 2]; 2]> {
    if ch.dim() != 2 || !ch.is_trace_preserving() {
        return Err(Error::Validation(
            "simulation needs a trace-preserving qubit channel".into(),
        ));
    }
    let mut out = [[BlochVector::zero(); 2]; 2];
    for x in 0..2 {
        for a in 0..2 {
            let rho = ch.apply(&src.density(x, a))?;
            out[x][a] = BlochVector::from_density(&rho);
        }
    }
    Ok(out)
}

/// Exact `p(b = 0 | x, a, y)` for lossless detection.
pub fn analytic_statistics(
    src: &SourceSpec,
    ch: &KrausChannel,
    meas: &MeasSpec,
) -> Result<PmStatistics> {
    let received = received_states(src, ch)?;
    let mut p = [[[0.0; 2]; 2]; 2];
    for x in 0..2 {
        for a in 0..2 {
            for y in 0..2 {
                p[x][a][y] = meas.povms[y].prob_zero(&received[x][a]).clamp(0.0, 1.0);
            }
        }
    }
    PmStatistics::new(p)
}

/// Expected statistics after bit-flip symmetrisation:
/// `½[p(0|x,0,y) + 1 − p(0|x,1,y)]` for `a = 0` and its complement for `a = 1`.
pub fn symmetrized(stats: &PmStatistics) -> PmStatistics {
    let mut p = [[[0.0; 2]; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            let s = 0.5 * (stats.p[x][0][y] + 1.0 - stats.p[x][1][y]);
            p[x][0][y] = s;
            p[x][1][y] = 1.0 - s;
        }
    }
    PmStatistics { p }
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

pub fn run_rounds(
    n: usize,
    src: &SourceSpec,
    ch: &KrausChannel,
    meas: &MeasSpec,
    seed: u64,
) -> Result<RoundLog> {
    if n == 0 {
        return Err(Error::Validation("round count must be at least 1".into()));
    }
    let received = received_states(src, ch)?;
    let mut p0 = [[[0.0; 2]; 2]; 2];
    for x in 0..2 {
        for a in 0..2 {
            for y in 0..2 {
                p0[x][a][y] = meas.povms[y].prob_zero(&received[x][a]);
            }
        }
    }
    let eff = meas.efficiency;
    let lossy = eff.iter().any(|&e| e < 1.0);
    let blocks = n.div_ceil(BLOCK_ROUNDS);
    let chunks: Vec<Vec<u8>> = (0..blocks)
        .into_par_iter()
        .map(|k| {
            let mut rng = block_rng(seed, k as u64);
            let len = BLOCK_ROUNDS.min(n - k * BLOCK_ROUNDS);
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let bits: u32 = rng.random();
                let (x, a, y) = (
                    (bits & 1) as usize,
                    ((bits >> 1) & 1) as usize,
                    ((bits >> 2) & 1) as usize,
                );
                let b = usize::from(rng.random::<f64>() >= p0[x][a][y]);
                if lossy && rng.random::<f64>() >= eff[b] {
                    continue;
                }
                out.push(cell_index(x, a, y, b) as u8);
            }
            out
        })
        .collect();
    Ok(RoundLog::from_packed(chunks.concat()))
}

/// Discards random rounds from the over-represented `a` value in every
/// `(x, y)` cell until both values occur equally often.
pub fn preprocess(log: &RoundLog, seed: u64) -> RoundLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; log.len()];
    for x in 0..2 {
        for y in 0..2 {
            let n0 = log.cell_total(x, 0, y);
            let n1 = log.cell_total(x, 1, y);
            if n0 == n1 {
                continue;
            }
            let major = usize::from(n1 > n0);
            let excess = n0.abs_diff(n1) as usize;
            let members: Vec<usize> = log
                .rounds()
                .enumerate()
                .filter(|(_, r)| r.x as usize == x && r.y as usize == y && r.a as usize == major)
                .map(|(i, _)| i)
                .collect();
            for j in sample(&mut rng, members.len(), excess).iter() {
                keep[members[j]] = false;
            }
        }
    }
    log.filter_indices(&keep)
}

/// The shared random string used to flip `a` and `b` together.
pub fn flip_string(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

pub fn apply_flips(log: &RoundLog, flips: &[bool]) -> Result<RoundLog> {
    if flips.len() != log.len() {
        return Err(Error::Validation(format!(
            "flip string has {} bits for {} rounds",
            flips.len(),
            log.len()
        )));
    }
    let records = log
        .records
        .iter()
        .zip(flips)
        .map(|(&r, &f)| if f { r ^ 0b0101 } else { r })
        .collect();
    Ok(RoundLog::from_packed(records))
}

/// Flips `a` and `b` together on a uniformly random subset of rounds.
pub fn bit_flip_symmetrize(log: &RoundLog, seed: u64) -> RoundLog {
    apply_flips(log, &flip_string(log.len(), seed)).expect("flip string matches the log")
}

/// Empirical statistics of a log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub stats: PmStatistics,
    pub witness: f64,
    /// `(1 − Q₀₀)/2`.
    pub qber: f64,
    pub rounds: u64,
}

pub fn estimate_statistics(log: &RoundLog) -> Result<Estimate> {
    let mut p = [[[0.0; 2]; 2]; 2];
    for x in 0..2 {
        for a in 0..2 {
            for y in 0..2 {
                let total = log.cell_total(x, a, y);
                if total == 0 {
                    return Err(Error::InsufficientData(format!(
                        "no rounds with x={x}, a={a}, y={y}"
                    )));
                }
                p[x][a][y] = log.count(x, a, y, 0) as f64 / total as f64;
            }
        }
    }
    let stats = PmStatistics { p };
    let q00 = p[0][0][0] - p[0][1][0];
    Ok(Estimate {
        stats,
        witness: stats.table().witness(),
        qber: (1.0 - q00) / 2.0,
        rounds: log.len() as u64,
    })
}

/// Announces a random `fraction` of rounds for parameter estimation and
/// returns `(estimation, key)` logs.
pub fn split_for_estimation(
    log: &RoundLog,
    fraction: f64,
    seed: u64,
) -> Result<(RoundLog, RoundLog)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(crate::error::domain(
            "estimation fraction",
            fraction,
            "[0, 1]",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = (fraction * log.len() as f64).round() as usize;
    let mut announced = vec![false; log.len()];
    for i in sample(&mut rng, log.len(), m).iter() {
        announced[i] = true;
    }
    let key: Vec<bool> = announced.iter().map(|&a| !a).collect();
    Ok((log.filter_indices(&announced), log.filter_indices(&key)))
}
