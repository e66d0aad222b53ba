use std::path::PathBuf;

use discord_qkd::decoy::{
    analyze, analyze_bb84, decoy_bounds, simulate_wcp_statistics, AnalysisProfile, BasisPair,
    ChernoffConfig, CountBounding, CountTable, WcpSystem,
};

fn fixture(name: &str) -> CountTable {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name]
        .iter()
        .collect();
    CountTable::from_csv_path(path).unwrap()
}

fn link(theta: f64, sent: u64) -> WcpSystem {
    WcpSystem {
        channel_loss_db: 10.0,
        receiver_loss_db: 2.0,
        detector_efficiency: 0.5,
        dark_count_rate: 1e-5,
        misalignment_theta: theta,
        intensities: [0.6, 0.1, 0.02],
        sent: [sent; 3],
    }
}

#[test]
fn bb84_reference_rates() {
    let profile = AnalysisProfile::published();
    let std = analyze_bb84(&fixture("standard_bb84.csv"), &profile).unwrap();
    println!(
        "standard BB84: e1 {:.4e} R {:.4e}",
        std.phase_error, std.key_rate_raw
    );
    assert!((std.key_rate_raw - 4.36e-4).abs() / 4.36e-4 < 0.01);
    assert_eq!(std.key_rate_clamped, std.key_rate_raw);
    assert!((std.phase_error - 5.05e-3).abs() / 5.05e-3 < 0.05);

    let pi9 = analyze_bb84(&fixture("misaligned_pi9_bb84.csv"), &profile).unwrap();
    println!(
        "pi/9 BB84: e1 {:.4e} R {:.4e}",
        pi9.phase_error, pi9.key_rate_raw
    );
    assert!((pi9.phase_error - 3.98e-2).abs() / 3.98e-2 < 0.05);
    assert!((pi9.key_rate_raw - 1.86e-4).abs() / 1.86e-4 < 0.01);
}

#[test]
fn synthetic_bounds_bracket_truth() {
    let cfg = CountBounding::Chernoff(ChernoffConfig::default());
    let mut misses = Vec::new();
    for seed in 0..100 {
        let sys = link(0.15, 1_000_000_000);
        let table = simulate_wcp_statistics(&sys, seed).unwrap();
        for pair in BasisPair::ALL {
            let b = decoy_bounds(&table, pair, &cfg).unwrap();
            let (y1, e1) = sys.single_photon_truth(pair);
            if !(b.y1_l <= y1 && y1 <= b.y1_u && b.e1_l <= e1 && e1 <= b.e1_u) {
                misses.push((seed, pair, b, y1, e1));
            }
        }
    }
    assert!(misses.is_empty(), "{misses:#?}");
}

#[test]
fn looser_confidence_never_widens_error_interval() {
    let tables = [
        fixture("standard_qpi.csv"),
        simulate_wcp_statistics(&link(0.3, 200_000_000), 9).unwrap(),
    ];
    for table in &tables {
        for pair in BasisPair::ALL {
            let mut prev = f64::INFINITY;
            for eps in [1e-15, 1e-12, 1e-9, 1e-6, 1e-3, 0.1] {
                let cfg = CountBounding::Chernoff(ChernoffConfig::new(eps).unwrap());
                let b = decoy_bounds(table, pair, &cfg).unwrap();
                let width = b.e1_u - b.e1_l;
                assert!(width <= prev + 1e-15, "{pair} eps {eps}: {width} > {prev}");
                prev = width;
            }
        }
    }
}

#[test]
fn lossless_single_photon_limit() {
    let mu = 0.05;
    let sys = WcpSystem {
        channel_loss_db: 0.0,
        receiver_loss_db: 0.0,
        detector_efficiency: 1.0,
        dark_count_rate: 0.0,
        misalignment_theta: 0.2,
        intensities: [mu, 0.02, 0.01],
        sent: [10_000_000_000; 3],
    };
    let table = simulate_wcp_statistics(&sys, 4).unwrap();
    let r = analyze(&table, &AnalysisProfile::published().with_f_ec(1.0)).unwrap();
    let e = (1.0 - 0.2f64.cos()) / 2.0;
    let h = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
    // Per detection the rate tends to 1 − h((1 − W)/2) − h(E) with W = 1.
    let single_fraction = mu * (-mu).exp() / (1.0 - (-mu).exp());
    let expected = single_fraction - h(e);
    assert!(r.w_min > 0.98, "{}", r.w_min);
    assert!(
        (r.key_rate_per_detection_raw - expected).abs() < 0.03,
        "{} vs {expected}",
        r.key_rate_per_detection_raw
    );
}

#[test]
fn finite_size_is_more_pessimistic_than_published() {
    for file in [
        "standard_qpi.csv",
        "misaligned_pi9_qpi.csv",
        "misaligned_2pi9_qpi.csv",
        "uncharacterized_qpi.csv",
    ] {
        let t = fixture(file);
        let published = analyze(&t, &AnalysisProfile::published()).unwrap();
        let finite = analyze(
            &t,
            &AnalysisProfile::finite_size(ChernoffConfig::default(), 1.16),
        )
        .unwrap();
        assert!(finite.w_min <= published.w_min, "{file}");
        assert!(finite.key_rate_raw <= published.key_rate_raw, "{file}");
        assert_eq!(finite.key_rate_clamped, finite.key_rate_raw.max(0.0));
    }
}

#[test]
fn simulation_is_deterministic() {
    let a = simulate_wcp_statistics(&link(0.1, 1_000_000), 5).unwrap();
    let b = simulate_wcp_statistics(&link(0.1, 1_000_000), 5).unwrap();
    let c = simulate_wcp_statistics(&link(0.1, 1_000_000), 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
