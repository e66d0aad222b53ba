//! `qkdd`: decoy-table analysis, rate sweeps, protocol simulation and
//! discord evaluation from the command line.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use discord_qkd::channels::{depolarizing, rotation, BlochVector, KrausChannel};
use discord_qkd::decoy::{
    analyze, analyze_bb84, simulate_wcp_statistics, AnalysisProfile, BasisPair, ChernoffConfig,
    SmallCountRule, WcpSystem,
};
use discord_qkd::discord::{
    discord_brute_force_with, discord_closed_form, discord_lower_bound, witness_max, PovmPair,
    SphereSearch,
};
use discord_qkd::keyrate::{
    depolarizing_qpi_rate, key_rate_qpi, sweep_depolarizing, sweep_rotation, threshold_qber,
    uniform_grid, Threshold, DEFAULT_GRID_POINTS,
};
use discord_qkd::protosim::{
    analytic_statistics, bit_flip_symmetrize, cell_index, estimate_statistics, run_rounds,
    split_for_estimation, symmetrized, MeasSpec, SourceSpec, DEFAULT_ESTIMATION_FRACTION,
    RNG_ALGORITHM,
};
use discord_qkd::qmath::binary_entropy;
use discord_qkd::states::{canonicalize, BellDiagonal, Correlations};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "qkdd", version, about = "Discord-witness QKD analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decoy-state analysis of a count table (CSV).
    Analyze(AnalyzeArgs),
    /// Asymptotic key-rate curves for a qubit channel.
    Sweep(SweepArgs),
    /// Monte Carlo run of the prepare-and-measure protocol.
    Simulate(SimulateArgs),
    /// Synthetic decoy count table from a weak-coherent-pulse link model.
    Wcp(WcpArgs),
    /// Discord, witness and bound for a Bell-diagonal state.
    Discord(DiscordArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Chernoff-bounded counts, witness minimised over the error box.
    Finite,
    /// Observed counts, witness at the lower error bounds, f = 1.16.
    Published,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Symmetric,
    Split,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, value_enum, default_value_t = Profile::Finite)]
    profile: Profile,
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    /// Error-correction efficiency [default: 1.0, or 1.16 with --profile published].
    #[arg(long)]
    f_ec: Option<f64>,
    /// Chernoff deviation rule below 6β.
    #[arg(long, value_enum, default_value_t = Rule::Symmetric)]
    small_count_rule: Rule,
    /// Also report the BB84 rate from the same table.
    #[arg(long)]
    bb84: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepChannel {
    Depolarizing,
    Rotation,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    channel: SweepChannel,
    /// Number of grid points.
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Bb84,
    Uncharacterized,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimChannel {
    Identity,
    Depolarizing,
    Rotation,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Preset::Bb84, conflicts_with = "spec")]
    preset: Preset,
    /// JSON file with `source` and `povms` (see README).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Mixing angle of the uncharacterized preset.
    #[arg(long, default_value_t = PI / 9.0)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = SimChannel::Identity)]
    channel: SimChannel,
    /// Depolarizing strength.
    #[arg(long, default_value_t = 0.0)]
    qber: f64,
    /// Rotation angle.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 1_000_000)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ESTIMATION_FRACTION)]
    estimation_fraction: f64,
    /// JSON summary path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-cell counts CSV.
    #[arg(long)]
    counts: Option<PathBuf>,
}

#[derive(Args)]
struct WcpArgs {
    #[arg(long, default_value_t = 22.5)]
    channel_loss_db: f64,
    #[arg(long, default_value_t = 4.9)]
    receiver_loss_db: f64,
    #[arg(long, default_value_t = 0.8)]
    detector_efficiency: f64,
    #[arg(long, default_value_t = 1e-6)]
    dark_count_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.862, 0.002, 0.001])]
    intensities: Vec<f64>,
    /// Pulses per intensity and basis pair.
    #[arg(long, default_value_t = 5_000_000_000)]
    sent: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DiscordArgs {
    /// Bell-basis weights λ₁..λ₄ (Φ⁺, Φ⁻, Ψ⁺, Ψ⁻).
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "correlations"
    )]
    lambdas: Option<Vec<f64>>,
    /// Correlation triple tx,ty,tz.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    correlations: Option<Vec<f64>>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_json(output: Option<&Path>, value: &Value) -> Result<()> {
    emit(output, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// CSV goes to `output`; its metadata goes next to it as `<output>.meta.json`.
fn emit_csv_with_meta(output: Option<&Path>, csv_text: &str, meta: &Value) -> Result<()> {
    emit(output, csv_text)?;
    if let Some(path) = output {
        let mut meta_path = path.as_os_str().to_owned();
        meta_path.push(".meta.json");
        emit_json(Some(Path::new(&meta_path)), meta)?;
    }
    Ok(())
}

fn csv_string<T: serde::Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Binary entropy on `[0, 1/2]`, where it cannot fail.
fn h(q: f64) -> f64 {
    binary_entropy(q).expect("argument in [0, 1/2]")
}

fn envelope(command: &str, config: Value) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("tool_version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(command));
    m.insert("config".into(), config);
    m
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let table = discord_qkd::decoy::CountTable::from_csv_path(&a.input)?;
    let rule = match a.small_count_rule {
        Rule::Symmetric => SmallCountRule::Symmetric,
        Rule::Split => SmallCountRule::SplitEquations,
    };
    let chernoff = ChernoffConfig::new(a.epsilon)?.with_rule(rule);
    let profile = match a.profile {
        Profile::Finite => AnalysisProfile::finite_size(chernoff, a.f_ec.unwrap_or(1.0)),
        Profile::Published => AnalysisProfile::published()
            .with_f_ec(a.f_ec.unwrap_or(AnalysisProfile::published().f_ec)),
    };
    let report = analyze(&table, &profile)?;
    for w in &report.warnings {
        match w.line {
            Some(line) => eprintln!("warning: line {line}: {}", w.message),
            None => eprintln!("warning: {}", w.message),
        }
    }
    let config = json!({
        "input": a.input.display().to_string(),
        "profile": match a.profile { Profile::Finite => "finite", Profile::Published => "published" },
        "epsilon": a.epsilon,
        "small_count_rule": rule,
        "f": profile.f_ec,
        "count_bounding": profile.bounding,
        "witness_selection": profile.witness,
        "rng": Value::Null,
    });
    let bb84 = if a.bb84 {
        Some(analyze_bb84(&table, &profile)?)
    } else {
        None
    };

    match a.format {
        Format::Json => {
            let mut m = envelope("analyze", config);
            let pairs: serde_json::Map<String, Value> = report
                .per_basis_pair
                .iter()
                .map(|p| (p.pair.to_string(), serde_json::to_value(&p.bounds).unwrap()))
                .collect();
            m.insert("per_basis_pair".into(), Value::Object(pairs));
            for (k, v) in [
                ("w_min", report.w_min),
                ("one_minus_w_over_2", report.one_minus_w_over_2),
                ("signal_gain", report.signal_gain),
                ("signal_error", report.signal_error),
                ("single_photon_gain", report.single_photon_gain),
                ("key_rate_raw", report.key_rate_raw),
                ("key_rate_clamped", report.key_rate_clamped),
                (
                    "key_rate_per_detection_raw",
                    report.key_rate_per_detection_raw,
                ),
            ] {
                m.insert(k.into(), json!(v));
            }
            m.insert("witness_errors".into(), json!(report.witness_errors));
            m.insert("warnings".into(), serde_json::to_value(&report.warnings)?);
            if let Some(b) = bb84 {
                m.insert(
                    "bb84".into(),
                    json!({
                        "e1_upper_zz": b.phase_error,
                        "single_photon_gain": b.single_photon_gain,
                        "key_rate_raw": b.key_rate_raw,
                        "key_rate_clamped": b.key_rate_clamped,
                    }),
                );
            }
            emit_json(a.output.as_deref(), &Value::Object(m))
        }
        Format::Csv => {
            #[derive(serde::Serialize)]
            struct Row {
                pair: String,
                y0_l: f64,
                y1_l: f64,
                y1_u: f64,
                e1_l: f64,
                e1_u: f64,
            }
            let rows: Vec<Row> = report
                .per_basis_pair
                .iter()
                .map(|p| Row {
                    pair: p.pair.to_string(),
                    y0_l: p.bounds.y0_l,
                    y1_l: p.bounds.y1_l,
                    y1_u: p.bounds.y1_u,
                    e1_l: p.bounds.e1_l,
                    e1_u: p.bounds.e1_u,
                })
                .collect();
            let mut meta = envelope("analyze", config);
            meta.insert("w_min".into(), json!(report.w_min));
            meta.insert("key_rate_raw".into(), json!(report.key_rate_raw));
            emit_csv_with_meta(
                a.output.as_deref(),
                &csv_string(&rows)?,
                &Value::Object(meta),
            )
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    if a.grid == 0 {
        bail!(discord_qkd::Error::Validation(
            "grid must have at least one point".into()
        ));
    }
    let (name, points, qpi_threshold) = match a.channel {
        SweepChannel::Depolarizing => (
            "depolarizing",
            sweep_depolarizing(&uniform_grid(0.0, 0.5, a.grid))?,
            threshold_qber(depolarizing_qpi_rate),
        ),
        SweepChannel::Rotation => (
            "rotation",
            sweep_rotation(&uniform_grid(0.0, PI, a.grid))?,
            threshold_qber(|q| 1.0 - h(q)),
        ),
    };
    let bb84_threshold: Threshold = threshold_qber(|q| 1.0 - 2.0 * h(q));
    let config = json!({
        "channel": name,
        "grid": a.grid,
        "parameter": match a.channel { SweepChannel::Depolarizing => "qber", SweepChannel::Rotation => "theta" },
        "rng": Value::Null,
    });
    let mut m = envelope("sweep", config);
    m.insert("threshold_qpi".into(), serde_json::to_value(qpi_threshold)?);
    m.insert(
        "threshold_bb84".into(),
        serde_json::to_value(bb84_threshold)?,
    );
    match a.format {
        Format::Csv => emit_csv_with_meta(
            a.output.as_deref(),
            &csv_string(&points)?,
            &Value::Object(m),
        ),
        Format::Json => {
            m.insert("points".into(), serde_json::to_value(&points)?);
            emit_json(a.output.as_deref(), &Value::Object(m))
        }
    }
}

#[derive(Deserialize)]
struct PovmFile {
    bloch: [f64; 3],
    #[serde(default)]
    bias: f64,
}

/// `source[x][a]` Bloch vectors and Bob's two POVMs.
#[derive(Deserialize)]
struct ProtocolFile {
    source: [[[f64; 3]; 2]; 2],
    povms: [PovmFile; 2],
    #[serde(default)]
    efficiency: Option<[f64; 2]>,
}

fn load_protocol(path: &Path) -> Result<(SourceSpec, MeasSpec)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ProtocolFile = serde_json::from_str(&text)
        .map_err(|e| discord_qkd::Error::Validation(format!("{}: {e}", path.display())))?;
    let bloch = |v: [f64; 3]| BlochVector::new(v[0], v[1], v[2]);
    let mut states = [[BlochVector::zero(); 2]; 2];
    for x in 0..2 {
        for a in 0..2 {
            states[x][a] = bloch(file.source[x][a])?;
        }
    }
    let povm =
        |p: &PovmFile| -> discord_qkd::Result<PovmPair> { PovmPair::new(bloch(p.bloch)?, p.bias) };
    let mut meas = MeasSpec::new([povm(&file.povms[0])?, povm(&file.povms[1])?]);
    if let Some(eff) = file.efficiency {
        meas = meas.with_efficiency(eff)?;
    }
    Ok((SourceSpec::from_bloch(states)?, meas))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let (src, meas, preset) = match &a.spec {
        Some(path) => {
            let (s, m) = load_protocol(path)?;
            (s, m, Value::String(path.display().to_string()))
        }
        None => match a.preset {
            Preset::Bb84 => (SourceSpec::bb84(), MeasSpec::bb84(), json!("bb84")),
            Preset::Uncharacterized => (
                SourceSpec::uncharacterized(a.delta),
                MeasSpec::uncharacterized(a.delta),
                json!("uncharacterized"),
            ),
        },
    };
    let ch: KrausChannel = match a.channel {
        SimChannel::Identity => KrausChannel::identity(),
        SimChannel::Depolarizing => depolarizing(a.qber)?,
        SimChannel::Rotation => rotation(a.theta),
    };
    let flip_seed = a.seed.wrapping_add(1);
    let split_seed = a.seed.wrapping_add(2);
    let log = run_rounds(a.rounds, &src, &ch, &meas, a.seed)?;
    let sym = bit_flip_symmetrize(&log, flip_seed);
    let (est_log, key_log) = split_for_estimation(&sym, a.estimation_fraction, split_seed)?;
    let est = estimate_statistics(&est_log)?;
    let q = est.qber.min(1.0 - est.qber).clamp(0.0, 0.5);
    let rate = key_rate_qpi(q, est.witness.clamp(-1.0, 1.0))?;
    let expected = symmetrized(&analytic_statistics(&src, &ch, &meas)?);

    let config = json!({
        "source": preset,
        "source_states": src.states,
        "povms": meas.povms,
        "delta": matches!(a.preset, Preset::Uncharacterized).then_some(a.delta),
        "channel": match a.channel {
            SimChannel::Identity => json!({"kind": "identity"}),
            SimChannel::Depolarizing => json!({"kind": "depolarizing", "qber": a.qber}),
            SimChannel::Rotation => json!({"kind": "rotation", "theta": a.theta}),
        },
        "rounds": a.rounds,
        "estimation_fraction": a.estimation_fraction,
        "bit_flip_symmetrized": true,
        "rng": {
            "algorithm": RNG_ALGORITHM,
            "seed": a.seed,
            "flip_seed": flip_seed,
            "split_seed": split_seed,
        },
    });
    let mut m = envelope("simulate", config);
    m.insert("p_table".into(), json!(est.stats.p));
    m.insert("witness".into(), json!(est.witness));
    m.insert("qber".into(), json!(est.qber));
    m.insert("key_rate_qpi".into(), json!(rate));
    m.insert("estimation_rounds".into(), json!(est_log.len()));
    m.insert("key_rounds".into(), json!(key_log.len()));
    m.insert(
        "expected".into(),
        json!({
            "p_table": expected.p,
            "witness": expected.table().witness(),
            "qber": (1.0 - expected.correlators()[0][0]) / 2.0,
        }),
    );
    emit_json(a.output.as_deref(), &Value::Object(m))?;

    if let Some(path) = &a.counts {
        let mut text = String::from("x,a,y,b,count\n");
        for x in 0..2 {
            for al in 0..2 {
                for y in 0..2 {
                    for b in 0..2 {
                        let n = sym.counts()[cell_index(x, al, y, b)];
                        text.push_str(&format!("{x},{al},{y},{b},{n}\n"));
                    }
                }
            }
        }
        emit(Some(path), &text)?;
    }
    Ok(())
}

fn exactly<const N: usize>(flag: &str, values: &[f64]) -> Result<[f64; N]> {
    values.try_into().map_err(|_| {
        discord_qkd::Error::Validation(format!(
            "{flag} takes {N} comma-separated values, got {}",
            values.len()
        ))
        .into()
    })
}

fn cmd_wcp(a: &WcpArgs) -> Result<()> {
    let sys = WcpSystem {
        channel_loss_db: a.channel_loss_db,
        receiver_loss_db: a.receiver_loss_db,
        detector_efficiency: a.detector_efficiency,
        dark_count_rate: a.dark_count_rate,
        misalignment_theta: a.theta,
        intensities: exactly::<3>("--intensities", &a.intensities)?,
        sent: [a.sent; 3],
    };
    let table = simulate_wcp_statistics(&sys, a.seed)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    let truth: serde_json::Map<String, Value> = BasisPair::ALL
        .iter()
        .map(|&p| {
            let (y1, e1) = sys.single_photon_truth(p);
            (p.to_string(), json!({"y1": y1, "e1": e1}))
        })
        .collect();
    let mut meta = envelope(
        "wcp",
        json!({
            "system": sys,
            "transmittance": sys.transmittance(),
            "rng": {"algorithm": "ChaCha8Rng (rand_chacha 0.9), seed_from_u64, stream = row index", "seed": a.seed},
        }),
    );
    meta.insert("single_photon_truth".into(), Value::Object(truth));
    emit_csv_with_meta(
        a.output.as_deref(),
        &String::from_utf8(buf)?,
        &Value::Object(meta),
    )
}

fn cmd_discord(a: &DiscordArgs) -> Result<()> {
    let state = match (&a.lambdas, &a.correlations) {
        (Some(l), None) => BellDiagonal::from_lambdas(exactly::<4>("--lambdas", l)?)?,
        (None, Some(t)) => {
            let [tx, ty, tz] = exactly::<3>("--correlations", t)?;
            BellDiagonal::from_correlations(Correlations::new(tx, ty, tz))?
        }
        _ => bail!(discord_qkd::Error::Validation(
            "give exactly one of --lambdas or --correlations".into()
        )),
    };
    let (canonical, frame) = canonicalize(&state);
    let closed = discord_closed_form(&canonical)?;
    let brute = discord_brute_force_with(&state.to_density_matrix(), &SphereSearch::default())?;
    let w = witness_max(&canonical)?;
    let bound = discord_lower_bound(w)?;
    let c = canonical.correlations();
    let mut m = envelope(
        "discord",
        json!({
            "lambdas": state.lambdas(),
            "sphere_search": SphereSearch::default(),
            "rng": Value::Null,
        }),
    );
    m.insert("canonical_lambdas".into(), json!(canonical.lambdas()));
    m.insert(
        "canonical_correlations".into(),
        json!({"tx": c.tx, "ty": c.ty, "tz": c.tz}),
    );
    m.insert("frame_ops".into(), serde_json::to_value(frame.ops())?);
    m.insert("discord_closed".into(), json!(closed));
    m.insert("discord_brute".into(), json!(brute.value));
    m.insert(
        "brute_direction".into(),
        json!(brute.direction().as_array()),
    );
    m.insert("w_max".into(), json!(w));
    m.insert("lower_bound".into(), json!(bound));
    m.insert(
        "agreement".into(),
        json!({
            "closed_minus_brute": closed - brute.value,
            "closed_minus_bound": closed - bound,
        }),
    );
    emit_json(a.output.as_deref(), &Value::Object(m))
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("QKDD_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            discord_qkd::Error::Validation(format!(
                "QKDD_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<discord_qkd::Error>() {
        Some(discord_qkd::Error::InsufficientData(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Wcp(a) => cmd_wcp(a),
        Command::Discord(a) => cmd_discord(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
