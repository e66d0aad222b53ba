//! Three-intensity decoy-state estimation from count tables.
//!
//! A [`CountTable`] holds, for each intensity `μ > ν > ω` and each basis pair,
//! the number of pulses sent, detections `n` and errors `m`. Counts are first
//! replaced by confidence bounds ([`chernoff_interval`]) and then fed into the
//! decoy formulas for the vacuum yield, single-photon yield and single-photon
//! error rate. The four single-photon error intervals constrain the witness.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::qmath::h;

/// Vacuum error rate.
pub const E0: f64 = 0.5;

/// Error-correction efficiency used by [`AnalysisProfile::published`].
pub const PUBLISHED_F_EC: f64 = 1.16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    Mu,
    Nu,
    Omega,
}

impl Intensity {
    pub const ALL: [Intensity; 3] = [Intensity::Mu, Intensity::Nu, Intensity::Omega];

    pub fn label(self) -> &'static str {
        match self {
            Intensity::Mu => "mu",
            Intensity::Nu => "nu",
            Intensity::Omega => "omega",
        }
    }
}

impl FromStr for Intensity {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_lowercase().as_str() {
            "mu" | "μ" | "signal" => Ok(Intensity::Mu),
            "nu" | "ν" => Ok(Intensity::Nu),
            "omega" | "ω" => Ok(Intensity::Omega),
            other => Err(format!(
                "unknown intensity label {other:?} (expected mu, nu or omega)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl FromStr for Basis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            other => Err(format!("unknown basis {other:?} (expected Z or X)")),
        }
    }
}

/// Alice's and Bob's bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisPair {
    pub alice: Basis,
    pub bob: Basis,
}

impl BasisPair {
    pub const ZZ: BasisPair = BasisPair {
        alice: Basis::Z,
        bob: Basis::Z,
    };
    pub const ZX: BasisPair = BasisPair {
        alice: Basis::Z,
        bob: Basis::X,
    };
    pub const XZ: BasisPair = BasisPair {
        alice: Basis::X,
        bob: Basis::Z,
    };
    pub const XX: BasisPair = BasisPair {
        alice: Basis::X,
        bob: Basis::X,
    };
    /// Order used for the witness matrix: `[[ZZ, ZX], [XZ, XX]]`.
    pub const ALL: [BasisPair; 4] = [Self::ZZ, Self::ZX, Self::XZ, Self::XX];

    /// `(x, y)` with `Z ↦ 0`, `X ↦ 1`.
    pub fn indices(&self) -> (usize, usize) {
        let i = |b: Basis| usize::from(b == Basis::X);
        (i(self.alice), i(self.bob))
    }
}

impl fmt::Display for BasisPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{:?}", self.alice, self.bob)
    }
}

/// Values printed alongside the raw counts in a published table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PublishedRow {
    pub gain: Option<f64>,
    pub error_rate: Option<f64>,
    pub n_lower: Option<u64>,
    pub n_upper: Option<u64>,
    pub m_lower: Option<u64>,
    pub m_upper: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub intensity: Intensity,
    /// Mean photon number.
    pub mu_value: f64,
    pub pair: BasisPair,
    pub sent: u64,
    pub n: u64,
    pub m: u64,
    #[serde(default)]
    pub published: PublishedRow,
    /// 1-based line in the source file, if parsed.
    #[serde(default)]
    pub line: Option<usize>,
}

impl CountRow {
    pub fn gain(&self) -> f64 {
        self.n as f64 / self.sent as f64
    }

    pub fn error_gain(&self) -> f64 {
        self.m as f64 / self.sent as f64
    }

    /// `m / n`, zero when nothing was detected.
    pub fn error_rate(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.m as f64 / self.n as f64
        }
    }
}

/// Discrepancy between a published value and its recomputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableWarning {
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    rows: Vec<CountRow>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    intensity_label: String,
    mu_value: f64,
    alice_basis: String,
    bob_basis: String,
    sent: u64,
    n_detected: u64,
    m_errors: u64,
    #[serde(default)]
    gain: Option<f64>,
    #[serde(default)]
    error_rate: Option<f64>,
    #[serde(default)]
    n_lower: Option<u64>,
    #[serde(default)]
    n_upper: Option<u64>,
    #[serde(default)]
    m_lower: Option<u64>,
    #[serde(default)]
    m_upper: Option<u64>,
}

pub const CSV_COLUMNS: [&str; 7] = [
    "intensity_label",
    "mu_value",
    "alice_basis",
    "bob_basis",
    "sent",
    "n_detected",
    "m_errors",
];

impl CountTable {
    /// Validates `m ≤ n ≤ sent`, unique `(intensity, pair)` keys, one mean
    /// photon number per label and `μ > ν > ω > 0`.
    pub fn new(rows: Vec<CountRow>) -> Result<Self> {
        let fail = |row: &CountRow, message: String| match row.line {
            Some(line) => Error::Parse { line, message },
            None => Error::Validation(message),
        };
        for (i, row) in rows.iter().enumerate() {
            if row.sent == 0 {
                return Err(fail(row, "sent must be positive".into()));
            }
            if row.n > row.sent || row.m > row.n {
                return Err(fail(
                    row,
                    format!(
                        "counts violate m ≤ n ≤ sent (m={}, n={}, sent={})",
                        row.m, row.n, row.sent
                    ),
                ));
            }
            if !(row.mu_value.is_finite() && row.mu_value > 0.0) {
                return Err(fail(
                    row,
                    format!("mean photon number {} must be positive", row.mu_value),
                ));
            }
            for other in &rows[..i] {
                if other.intensity == row.intensity && other.pair == row.pair {
                    return Err(fail(
                        row,
                        format!("duplicate row for {} {}", row.intensity.label(), row.pair),
                    ));
                }
                if other.intensity == row.intensity && other.mu_value != row.mu_value {
                    return Err(fail(
                        row,
                        format!(
                            "{} has two mean photon numbers ({} and {})",
                            row.intensity.label(),
                            other.mu_value,
                            row.mu_value
                        ),
                    ));
                }
            }
        }
        let table = Self { rows };
        let values: Vec<Option<f64>> = Intensity::ALL
            .iter()
            .map(|&i| table.intensity_value(i))
            .collect();
        if let [Some(mu), Some(nu), Some(om)] = values[..] {
            if !(mu > nu && nu > om) {
                return Err(Error::Validation(format!(
                    "intensities must satisfy μ > ν > ω > 0, got μ={mu}, ν={nu}, ω={om}"
                )));
            }
        }
        Ok(table)
    }

    pub fn rows(&self) -> &[CountRow] {
        &self.rows
    }

    pub fn get(&self, intensity: Intensity, pair: BasisPair) -> Option<&CountRow> {
        self.rows
            .iter()
            .find(|r| r.intensity == intensity && r.pair == pair)
    }

    fn require(&self, intensity: Intensity, pair: BasisPair) -> Result<&CountRow> {
        self.get(intensity, pair).ok_or_else(|| {
            Error::InsufficientData(format!(
                "table has no row for {} {}",
                intensity.label(),
                pair
            ))
        })
    }

    pub fn intensity_value(&self, intensity: Intensity) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.intensity == intensity)
            .map(|r| r.mu_value)
    }

    /// `(μ, ν, ω)`.
    pub fn intensities(&self) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (slot, i) in out.iter_mut().zip(Intensity::ALL) {
            *slot = self.intensity_value(i).ok_or_else(|| {
                Error::InsufficientData(format!("table has no {} rows", i.label()))
            })?;
        }
        Ok(out)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        if headers.is_empty() {
            return Err(Error::Validation("no data rows".into()));
        }
        for col in CSV_COLUMNS {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("missing required column {col:?}"),
                });
            }
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let raw: RawRow = record
                .deserialize(Some(&headers))
                .map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?;
            let parse_err = |message: String| Error::Parse { line, message };
            rows.push(CountRow {
                intensity: raw.intensity_label.parse().map_err(parse_err)?,
                mu_value: raw.mu_value,
                pair: BasisPair {
                    alice: raw.alice_basis.parse().map_err(parse_err)?,
                    bob: raw.bob_basis.parse().map_err(parse_err)?,
                },
                sent: raw.sent,
                n: raw.n_detected,
                m: raw.m_errors,
                published: PublishedRow {
                    gain: raw.gain,
                    error_rate: raw.error_rate,
                    n_lower: raw.n_lower,
                    n_upper: raw.n_upper,
                    m_lower: raw.m_lower,
                    m_upper: raw.m_upper,
                },
                line: Some(line),
            });
        }
        if rows.is_empty() {
            return Err(Error::Validation("no data rows".into()));
        }
        Self::new(rows)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| {
            Error::Validation(format!("cannot open {}: {e}", path.as_ref().display()))
        })?;
        Self::from_csv_reader(file)
    }

    /// Writes the seven required columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e: csv::Error| Error::Validation(format!("CSV write failed: {e}"));
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_COLUMNS).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.intensity.label().to_string(),
                r.mu_value.to_string(),
                format!("{:?}", r.pair.alice),
                format!("{:?}", r.pair.bob),
                r.sent.to_string(),
                r.n.to_string(),
                r.m.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Validation(format!("CSV write failed: {e}")))?;
        Ok(())
    }

    /// Compares published gains, error rates and count bounds with their
    /// recomputation. Gains and error rates are checked at 1% relative, with
    /// an absolute allowance of one unit in the second printed decimal of a
    /// percentage; bounds at ±5 counts.
    pub fn cross_check(&self, cfg: &ChernoffConfig) -> Vec<TableWarning> {
        let mut out = Vec::new();
        for r in &self.rows {
            let mut warn = |message: String| {
                out.push(TableWarning {
                    line: r.line,
                    message,
                })
            };
            let tag = format!("{} {}", r.intensity.label(), r.pair);
            if let Some(g) = r.published.gain {
                let ours = r.gain();
                if (g - ours).abs() > 0.01 * ours.abs() {
                    warn(format!("{tag}: published gain {g:e} vs n/sent = {ours:e}"));
                }
            }
            if let Some(e) = r.published.error_rate {
                let ours = r.error_rate();
                if (e - ours).abs() > (0.01 * ours.abs()).max(1e-4) {
                    warn(format!(
                        "{tag}: published error rate {e} vs m/n = {ours:.6}"
                    ));
                }
            }
            let checks = [
                ("n_lower", r.published.n_lower, r.n, true),
                ("n_upper", r.published.n_upper, r.n, false),
                ("m_lower", r.published.m_lower, r.m, true),
                ("m_upper", r.published.m_upper, r.m, false),
            ];
            for (name, published, count, lower) in checks {
                if let Some(p) = published {
                    let (l, u) = chernoff_interval(count as f64, cfg).rounded();
                    let ours = if lower { l } else { u };
                    if p.abs_diff(ours) > 5 {
                        warn(format!("{tag}: published {name} {p} vs recomputed {ours}"));
                    }
                }
            }
        }
        out
    }
}

/// Failure probability of the Chernoff bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub small_count_rule: SmallCountRule,
}

/// How the deviations are solved when `X < 6β`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallCountRule {
    /// Both sides from `δ²X / (2(1 − δ)) = β`. Reproduces the published
    /// bound columns.
    #[default]
    Symmetric,
    /// Lower side from `δ²X / (4(1 + δ)) = β`, upper side as above.
    SplitEquations,
}

impl Default for ChernoffConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-9,
            small_count_rule: SmallCountRule::Symmetric,
        }
    }
}

impl ChernoffConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(domain("epsilon", epsilon, "(0, 1)"));
        }
        Ok(Self {
            epsilon,
            small_count_rule: SmallCountRule::default(),
        })
    }

    pub fn with_rule(mut self, rule: SmallCountRule) -> Self {
        self.small_count_rule = rule;
        self
    }

    /// `β = −ln(ε/2)`.
    pub fn beta(&self) -> f64 {
        -(self.epsilon / 2.0).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ChernoffInterval {
    /// `(⌊Xᴸ⌋, ⌈Xᵁ⌉)`, the integer form printed in tables.
    pub fn rounded(&self) -> (u64, u64) {
        (self.lower.floor() as u64, self.upper.ceil() as u64)
    }
}

/// Root of an increasing function on `[lo, hi]` by bisection.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Multiplicative Chernoff bounds `Xᴸ = X/(1+δᴸ)`, `Xᵁ = X/(1−δᵁ)`.
///
/// For `X ≥ 6β` both deviations take the closed form
/// `(3β + √(8βX + β²)) / (2(X − β))`. Below that the deviations are solved
/// numerically according to [`SmallCountRule`]. `X = 0` gives `Xᴸ = 0` and
/// the limit `Xᵁ = 2β`.
///
/// The closed form approaches `δ = 1` from below as `X` falls to `6β`, so
/// `Xᵁ` jumps by orders of magnitude just above the switch point.
pub fn chernoff_interval(x: f64, cfg: &ChernoffConfig) -> ChernoffInterval {
    let beta = cfg.beta();
    if x <= 0.0 {
        return ChernoffInterval {
            lower: 0.0,
            upper: 2.0 * beta,
        };
    }
    if x >= 6.0 * beta {
        let d = (3.0 * beta + (8.0 * beta * x + beta * beta).sqrt()) / (2.0 * (x - beta));
        return ChernoffInterval {
            lower: x / (1.0 + d),
            upper: x / (1.0 - d),
        };
    }
    let d_upper = bisect(|d| d * d * x / (2.0 * (1.0 - d)) - beta, 0.0, 1.0);
    let d_lower = match cfg.small_count_rule {
        SmallCountRule::Symmetric => d_upper,
        SmallCountRule::SplitEquations => {
            let g = |d: f64| d * d * x / (4.0 * (1.0 + d)) - beta;
            let mut hi = 1.0;
            while g(hi) < 0.0 {
                hi *= 2.0;
            }
            bisect(g, 0.0, hi)
        }
    };
    ChernoffInterval {
        lower: x / (1.0 + d_lower),
        upper: x / (1.0 - d_upper),
    }
}

/// How observed counts become the gains used in the decoy formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountBounding {
    /// Each count replaced by its pessimistic Chernoff bound.
    Chernoff(ChernoffConfig),
    /// Counts used as observed.
    Observed,
}

/// Lower and upper estimates of a rate.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bounded {
    l: f64,
    u: f64,
}

fn bounded_rate(count: u64, sent: u64, bounding: &CountBounding) -> Bounded {
    let s = sent as f64;
    match bounding {
        CountBounding::Observed => Bounded {
            l: count as f64 / s,
            u: count as f64 / s,
        },
        CountBounding::Chernoff(cfg) => {
            let iv = chernoff_interval(count as f64, cfg);
            Bounded {
                l: iv.lower / s,
                u: iv.upper / s,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyFlag {
    /// `Y₁ᴸ` evaluated negative and was clamped to zero.
    NegativeY1Lower,
    /// `Y₁ᴸ > Y₁ᵁ`, usually from statistical noise in uncorrected counts.
    InvertedYieldInterval,
    /// `e₁ᴸ > e₁ᵁ`; the error interval is empty.
    InvertedErrorInterval,
    /// A value left `[0, 1]` and was clamped.
    Clamped,
}

/// Decoy estimates for one basis pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub y0_l: f64,
    pub y1_l: f64,
    pub y1_u: f64,
    pub e1_l: f64,
    pub e1_u: f64,
    pub flags: Vec<DecoyFlag>,
}

/// Evaluates the vacuum, single-photon yield and single-photon error bounds
/// for one basis pair.
///
/// Each gain `Q_κ` and error gain `EQ_κ` enters with the bound that makes the
/// result pessimistic:
///
/// | quantity | lower-bounded terms   | upper-bounded terms        |
/// |----------|-----------------------|----------------------------|
/// | `Y₀ᴸ`    | `Q_ω`                 | `Q_ν`, `Q_μ`               |
/// | `Y₁ᴸ`    | `Q_ν`                 | `Q_ω`, `Q_μ`               |
/// | `Y₁ᵁ`    | subtracted gains      | leading gains              |
/// | `e₁ᴸ`    | `EQ_ν`                | `EQ_ω`, `EQ_μ`, `Y₁ᵁ`      |
/// | `e₁ᵁ`    | subtracted, `Y₁ᴸ`     | leading error gains        |
///
/// `Y₀ᴸ` keeps its repeated first candidate.
pub fn decoy_bounds(
    table: &CountTable,
    pair: BasisPair,
    bounding: &CountBounding,
) -> Result<DecoyBounds> {
    let [mu, nu, om] = table.intensities()?;
    let rows = [
        table.require(Intensity::Mu, pair)?,
        table.require(Intensity::Nu, pair)?,
        table.require(Intensity::Omega, pair)?,
    ];
    let q: Vec<Bounded> = rows
        .iter()
        .map(|r| bounded_rate(r.n, r.sent, bounding))
        .collect();
    let eq: Vec<Bounded> = rows
        .iter()
        .map(|r| bounded_rate(r.m, r.sent, bounding))
        .collect();
    let (qm, qn, qo) = (q[0], q[1], q[2]);
    let (em, en, eo) = (eq[0], eq[1], eq[2]);
    let (xm, xn, xo) = (mu.exp(), nu.exp(), om.exp());

    let y0_first = (nu * qo.l * xo - om * qn.u * xn) / (nu - om);
    let y0_l = [
        y0_first,
        (mu * qo.l * xo - om * qm.u * xm) / (mu - om),
        y0_first,
        0.0,
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);

    let k = (nu * nu - om * om) / (mu * mu);
    let y1_l_raw = mu / (mu * nu - mu * om - nu * nu + om * om)
        * (qn.l * xn - qo.u * xo - k * (qm.u * xm - y0_l));
    let y1_u_raw = [
        (qm.u * xm - y0_l) / mu,
        (qn.u * xn - y0_l) / nu,
        (qo.u * xo - y0_l) / om,
        (qm.u * xm - qo.l * xo) / (mu - om),
        (qn.u * xn - qo.l * xo) / (nu - om),
        (qm.u * xm - qn.l * xn) / (mu - nu),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);

    let mut flags = Vec::new();
    let clamp = |v: f64, flags: &mut Vec<DecoyFlag>| {
        if !(0.0..=1.0).contains(&v) && !flags.contains(&DecoyFlag::Clamped) {
            flags.push(DecoyFlag::Clamped);
        }
        v.clamp(0.0, 1.0)
    };
    if y1_l_raw < 0.0 {
        flags.push(DecoyFlag::NegativeY1Lower);
    }
    let y1_l = clamp(y1_l_raw, &mut flags);
    let y1_u = clamp(y1_u_raw, &mut flags);

    let e1_l_raw = (xn * en.l - xo * eo.u - k * (em.u * xm - E0 * y0_l))
        / ((nu - om - (nu * nu - om * om) / mu) * y1_u);
    let e1_u_raw = [
        (en.u * xn - eo.l * xo) / ((nu - om) * y1_l),
        (em.u * xm - eo.l * xo) / ((mu - om) * y1_l),
        (em.u * xm - en.l * xn) / ((mu - nu) * y1_l),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    // A zero yield makes the ratios undefined; fall back to the trivial range.
    let e1_l = if e1_l_raw.is_nan() {
        0.0
    } else {
        clamp(e1_l_raw, &mut flags)
    };
    let e1_u = if e1_u_raw.is_nan() {
        1.0
    } else {
        clamp(e1_u_raw, &mut flags)
    };
    if y1_l > y1_u {
        flags.push(DecoyFlag::InvertedYieldInterval);
    }
    if e1_l > e1_u {
        flags.push(DecoyFlag::InvertedErrorInterval);
    }
    Ok(DecoyBounds {
        y0_l: clamp(y0_l, &mut flags),
        y1_l,
        y1_u,
        e1_l,
        e1_u,
        flags,
    })
}

/// Witness value at one vertex of the error box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessPoint {
    pub w: f64,
    /// Single-photon error rates used, in `[ZZ, ZX, XZ, XX]` order.
    pub errors: [f64; 4],
}

/// `det[[1 − 2e_ZZ, 1 − 2e_ZX], [1 − 2e_XZ, 1 − 2e_XX]]`.
pub fn witness_from_errors(e: &[f64; 4]) -> f64 {
    (1.0 - 2.0 * e[0]) * (1.0 - 2.0 * e[3]) - (1.0 - 2.0 * e[1]) * (1.0 - 2.0 * e[2])
}

/// Minimum of the witness over the box `e ∈ [e₁ᴸ, e₁ᵁ]⁴`.
///
/// The determinant is affine in each entry, so the minimum sits on one of
/// the 16 vertices. Ties resolve to the first vertex in enumeration order.
pub fn minimize_witness(intervals: &[(f64, f64); 4]) -> Result<WitnessPoint> {
    for (k, &(l, u)) in intervals.iter().enumerate() {
        if !(l <= u) {
            return Err(Error::Validation(format!(
                "empty error interval for {}: [{l}, {u}]",
                BasisPair::ALL[k]
            )));
        }
    }
    let mut best: Option<WitnessPoint> = None;
    for v in 0..16u32 {
        let errors: [f64; 4] = std::array::from_fn(|k| {
            let (l, u) = intervals[k];
            if v >> k & 1 == 0 {
                l
            } else {
                u
            }
        });
        let w = witness_from_errors(&errors);
        if best.is_none_or(|b| w < b.w) {
            best = Some(WitnessPoint { w, errors });
        }
    }
    Ok(best.expect("16 vertices evaluated"))
}

/// Witness with every basis pair at its lower error bound.
pub fn witness_at_lower_bounds(intervals: &[(f64, f64); 4]) -> WitnessPoint {
    let errors = intervals.map(|(l, _)| l);
    WitnessPoint {
        w: witness_from_errors(&errors),
        errors,
    }
}

/// Where in the error box the witness is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessSelection {
    /// Minimum over the 16 box vertices.
    BoxMinimum,
    /// All four errors at `e₁ᴸ`.
    LowerBounds,
}

/// Settings for [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisProfile {
    pub bounding: CountBounding,
    pub witness: WitnessSelection,
    /// Error-correction efficiency `f`.
    pub f_ec: f64,
}

impl AnalysisProfile {
    /// Chernoff-bounded counts, witness minimised over the box.
    pub fn finite_size(cfg: ChernoffConfig, f_ec: f64) -> Self {
        Self {
            bounding: CountBounding::Chernoff(cfg),
            witness: WitnessSelection::BoxMinimum,
            f_ec,
        }
    }

    /// Observed counts, witness at the lower error bounds, `f = 1.16`. This
    /// combination reproduces the published witness values and key rates.
    pub fn published() -> Self {
        Self {
            bounding: CountBounding::Observed,
            witness: WitnessSelection::LowerBounds,
            f_ec: PUBLISHED_F_EC,
        }
    }

    pub fn with_f_ec(mut self, f_ec: f64) -> Self {
        self.f_ec = f_ec;
        self
    }
}

impl Default for AnalysisProfile {
    fn default() -> Self {
        Self::finite_size(ChernoffConfig::default(), 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub pair: BasisPair,
    pub bounds: DecoyBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyReport {
    pub per_basis_pair: Vec<PairReport>,
    pub w_min: f64,
    pub witness_errors: [f64; 4],
    pub one_minus_w_over_2: f64,
    /// Signal gain `Q_μ` and error rate `E_μ` in the key basis pair.
    pub signal_gain: f64,
    pub signal_error: f64,
    /// `μ e^{−μ} Y₁ᴸ` in the key basis pair.
    pub single_photon_gain: f64,
    /// Per sent signal pulse.
    pub key_rate_raw: f64,
    pub key_rate_clamped: f64,
    /// `key_rate_raw / Q_μ`, per detected signal event.
    pub key_rate_per_detection_raw: f64,
    pub profile: AnalysisProfile,
    pub warnings: Vec<TableWarning>,
}

fn all_pair_bounds(table: &CountTable, bounding: &CountBounding) -> Result<Vec<PairReport>> {
    BasisPair::ALL
        .par_iter()
        .map(|&pair| {
            Ok(PairReport {
                pair,
                bounds: decoy_bounds(table, pair, bounding)?,
            })
        })
        .collect()
}

/// Runs the decoy estimation on all four basis pairs, evaluates the witness
/// and the key rate
/// `R = μe^{−μ} Y₁ᴸ (1 − h((1 − W)/2)) − f Q_μ h(E_μ)` in the ZZ pair.
pub fn analyze(table: &CountTable, profile: &AnalysisProfile) -> Result<DecoyReport> {
    if !(profile.f_ec.is_finite() && profile.f_ec >= 1.0) {
        return Err(domain("f", profile.f_ec, "[1, ∞)"));
    }
    let per_basis_pair = all_pair_bounds(table, &profile.bounding)?;
    let intervals: [(f64, f64); 4] =
        std::array::from_fn(|k| (per_basis_pair[k].bounds.e1_l, per_basis_pair[k].bounds.e1_u));
    let point = match profile.witness {
        WitnessSelection::BoxMinimum => minimize_witness(&intervals)?,
        WitnessSelection::LowerBounds => witness_at_lower_bounds(&intervals),
    };
    let mu = table.intensities()?[0];
    let signal = table.require(Intensity::Mu, BasisPair::ZZ)?;
    let single_photon_gain = mu * (-mu).exp() * per_basis_pair[0].bounds.y1_l;
    let rate = decoy_key_rate(
        single_photon_gain,
        point.w,
        signal.gain(),
        signal.error_rate(),
        profile.f_ec,
    );
    let warnings = match profile.bounding {
        CountBounding::Chernoff(cfg) => table.cross_check(&cfg),
        CountBounding::Observed => table.cross_check(&ChernoffConfig::default()),
    };
    Ok(DecoyReport {
        per_basis_pair,
        w_min: point.w,
        witness_errors: point.errors,
        one_minus_w_over_2: (1.0 - point.w) / 2.0,
        signal_gain: signal.gain(),
        signal_error: signal.error_rate(),
        single_photon_gain,
        key_rate_raw: rate,
        key_rate_clamped: rate.max(0.0),
        key_rate_per_detection_raw: rate / signal.gain(),
        profile: *profile,
        warnings,
    })
}

/// `Q₁ (1 − h((1 − |W|)/2)) − f Q_μ h(E_μ)`.
pub fn decoy_key_rate(
    single_photon_gain: f64,
    w: f64,
    signal_gain: f64,
    signal_error: f64,
    f_ec: f64,
) -> f64 {
    let w = w.abs().min(1.0);
    single_photon_gain * (1.0 - h((1.0 - w) / 2.0)) - f_ec * signal_gain * h(signal_error)
}

/// BB84 comparison figure from a table of the same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bb84Report {
    pub per_basis_pair: Vec<PairReport>,
    /// `e₁ᵁ` in the ZZ pair.
    pub phase_error: f64,
    pub single_photon_gain: f64,
    pub key_rate_raw: f64,
    pub key_rate_clamped: f64,
}

/// `R = μe^{−μ} Y₁ᴸ (1 − h(e₁ᵁ)) − f Q_μ h(E_μ)`, all in the ZZ pair.
pub fn analyze_bb84(table: &CountTable, profile: &AnalysisProfile) -> Result<Bb84Report> {
    let per_basis_pair = all_pair_bounds(table, &profile.bounding)?;
    let mu = table.intensities()?[0];
    let signal = table.require(Intensity::Mu, BasisPair::ZZ)?;
    let single_photon_gain = mu * (-mu).exp() * per_basis_pair[0].bounds.y1_l;
    let phase_error = per_basis_pair[0].bounds.e1_u;
    let rate = single_photon_gain * (1.0 - h(phase_error))
        - profile.f_ec * signal.gain() * h(signal.error_rate());
    Ok(Bb84Report {
        per_basis_pair,
        phase_error,
        single_photon_gain,
        key_rate_raw: rate,
        key_rate_clamped: rate.max(0.0),
    })
}

/// Weak-coherent-pulse link used to generate synthetic count tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WcpSystem {
    pub channel_loss_db: f64,
    pub receiver_loss_db: f64,
    pub detector_efficiency: f64,
    /// Background yield `Y₀` per pulse.
    pub dark_count_rate: f64,
    /// Reference-frame rotation `θ` between Alice and Bob.
    pub misalignment_theta: f64,
    /// `(μ, ν, ω)`.
    pub intensities: [f64; 3],
    /// Pulses sent per intensity and basis pair.
    pub sent: [u64; 3],
}

impl WcpSystem {
    pub fn validate(&self) -> Result<()> {
        let [mu, nu, om] = self.intensities;
        if !(mu > nu && nu > om && om > 0.0) {
            return Err(Error::Validation(format!(
                "intensities must satisfy μ > ν > ω > 0, got {:?}",
                self.intensities
            )));
        }
        if !(self.channel_loss_db >= 0.0 && self.receiver_loss_db >= 0.0) {
            return Err(Error::Validation("losses must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.detector_efficiency) {
            return Err(domain(
                "detector_efficiency",
                self.detector_efficiency,
                "[0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.dark_count_rate) {
            return Err(domain("dark_count_rate", self.dark_count_rate, "[0, 1]"));
        }
        if self.sent.contains(&0) {
            return Err(Error::Validation("sent counts must be positive".into()));
        }
        Ok(())
    }

    /// Overall transmittance `η`.
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-(self.channel_loss_db + self.receiver_loss_db) / 10.0)
            * self.detector_efficiency
    }

    /// Single-photon error rate of the qubit channel alone, `(1 − Q_xy(θ))/2`.
    pub fn intrinsic_error(&self, pair: BasisPair) -> f64 {
        let (s, c) = self.misalignment_theta.sin_cos();
        let q = match pair.indices() {
            (0, 0) | (1, 1) => c,
            (0, 1) => -s,
            _ => s,
        };
        (1.0 - q) / 2.0
    }

    /// Expected gain `Q_κ = Y₀ + 1 − e^{−ηκ}`.
    pub fn gain(&self, kappa: f64) -> f64 {
        (self.dark_count_rate + 1.0 - (-self.transmittance() * kappa).exp()).min(1.0)
    }

    /// Expected error gain `EQ_κ = e₀Y₀ + e_d(1 − e^{−ηκ})`.
    pub fn error_gain(&self, kappa: f64, pair: BasisPair) -> f64 {
        E0 * self.dark_count_rate
            + self.intrinsic_error(pair) * (1.0 - (-self.transmittance() * kappa).exp())
    }

    /// `(Y₁, e₁)` of the model: `Y_n = Y₀ + 1 − (1 − η)ⁿ` and
    /// `e_n Y_n = e₀Y₀ + e_d(1 − (1 − η)ⁿ)` reproduce the gains above.
    pub fn single_photon_truth(&self, pair: BasisPair) -> (f64, f64) {
        let eta = self.transmittance();
        let y1 = self.dark_count_rate + eta;
        let e1 = (E0 * self.dark_count_rate + self.intrinsic_error(pair) * eta) / y1;
        (y1, e1)
    }
}

/// Samples a count table from the WCP model: `n ~ Bin(sent, Q_κ)` and
/// `m ~ Bin(n, EQ_κ/Q_κ)`. Row `k` uses stream `k` of a ChaCha8 generator
/// seeded with `seed`.
pub fn simulate_wcp_statistics(sys: &WcpSystem, seed: u64) -> Result<CountTable> {
    sys.validate()?;
    let mut rows = Vec::with_capacity(12);
    for (i, intensity) in Intensity::ALL.into_iter().enumerate() {
        let kappa = sys.intensities[i];
        for (j, pair) in BasisPair::ALL.into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((4 * i + j) as u64);
            let q = sys.gain(kappa);
            let e = if q > 0.0 {
                (sys.error_gain(kappa, pair) / q).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let sample = |n: u64, p: f64, rng: &mut ChaCha8Rng| -> Result<u64> {
                Binomial::new(n, p)
                    .map(|d| d.sample(rng))
                    .map_err(|err| Error::Validation(format!("binomial({n}, {p}): {err}")))
            };
            let n = sample(sys.sent[i], q, &mut rng)?;
            let m = sample(n, e, &mut rng)?;
            rows.push(CountRow {
                intensity,
                mu_value: kappa,
                pair,
                sent: sys.sent[i],
                n,
                m,
                published: PublishedRow::default(),
                line: None,
            });
        }
    }
    CountTable::new(rows)
}
