use mmlab_core::book::{BookSnapshot, EventKind, LevelQty, MarketEvent, OrderBook, Side};
use mmlab_core::ingest::{
    decode_record, encode_record, export_dataset, generate_synthetic, label_windows, normalize_window, write_events,
    EventFileHeader, EventReader, ExportConfig, IngestError, NormStats, SyntheticMarketConfig,
};
use mmlab_core::book::LobWindow;
use proptest::prelude::*;

fn book_with_mid(mid2: i64, vol: u64) -> BookSnapshot {
    // Odd mid2 puts the spread at one tick, even at two.
    let ask = (mid2 + 2) / 2;
    let bid = mid2 - ask;
    BookSnapshot {
        levels: 1,
        seq: 0,
        asks: vec![LevelQty { price: ask, volume: vol }],
        bids: vec![LevelQty { price: bid, volume: vol }],
    }
}

fn ramp(start_mid: i64, step_ticks: i64, n: usize) -> Vec<BookSnapshot> {
    (0..n as i64).map(|i| book_with_mid(2 * (start_mid + step_ticks * i), 100)).collect()
}

#[test]
fn ramp_labels_follow_direction() {
    let (k, alpha) = (10usize, 1e-5);
    for step in [1i64, -1] {
        let snaps = ramp(100_000, step, 200);
        let samples: Vec<_> = label_windows(&snaps, k, alpha, 1).unwrap().collect();
        assert_eq!(samples.len(), 200 - 2 * k);
        for s in samples {
            // Sum of future mids minus sum of past mids over k+1 terms each
            // is step·k(k+1); the past sum is (k+1)(p − step·k/2).
            let p = (100_000 + step * s.index as i64) as f64;
            let expected = step as f64 * k as f64 / (p - step as f64 * k as f64 / 2.0);
            assert!((s.movement - expected).abs() <= 1e-15, "{} vs {}", s.movement, expected);
            assert!(s.movement.abs() > 9.9e-5);
            assert_eq!(s.label, step as i8);
        }
    }
}

#[test]
fn flat_mid_labels_zero_and_short_streams_fail() {
    let snaps = vec![book_with_mid(20_001, 100); 50];
    assert!(label_windows(&snaps, 10, 1e-5, 5).unwrap().all(|s| s.movement == 0.0 && s.label == 0));
    assert!(matches!(
        label_windows(&snaps[..20], 10, 1e-5, 5),
        Err(IngestError::InsufficientHistory { needed: 21, available: 20 })
    ));
}

proptest! {
    #[test]
    fn labels_are_scale_invariant(steps in prop::collection::vec(-3i64..4, 30..80), c in 2i64..50) {
        let mut mid = 5_000i64;
        let mids: Vec<i64> = steps.iter().map(|d| { mid += d; mid }).collect();
        let base: Vec<_> = mids.iter().map(|&m| book_with_mid(2 * m, 100)).collect();
        let scaled: Vec<_> = mids.iter().map(|&m| book_with_mid(2 * m * c, 100)).collect();
        let a: Vec<_> = label_windows(&base, 5, 1e-4, 3).unwrap().map(|s| (s.movement, s.label)).collect();
        let b: Vec<_> = label_windows(&scaled, 5, 1e-4, 3).unwrap().map(|s| (s.movement, s.label)).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn record_codec_round_trips(rows in 1usize..6, cols in 1usize..9, seed in any::<u64>(), label in -1i8..=1) {
        let data: Vec<f64> = (0..rows * cols).map(|i| ((seed.wrapping_mul(i as u64 + 1) % 10_007) as f64 - 5000.0) / 37.0).collect();
        let w = LobWindow { rows, cols, data: data.clone() };
        let mut bytes = Vec::new();
        encode_record(&w, label, &mut bytes);
        prop_assert_eq!(bytes.len(), rows * cols * 4 + 1);
        let (values, l) = decode_record(&bytes, rows, cols).unwrap();
        prop_assert_eq!(l, label);
        for (v, d) in values.iter().zip(&data) {
            prop_assert_eq!(*v, *d as f32);
        }
        prop_assert!(decode_record(&bytes[1..], rows, cols).is_err());
    }
}

fn mid_series(cfg: &SyntheticMarketConfig) -> Vec<f64> {
    let mut book = OrderBook::new();
    generate_synthetic(cfg)
        .unwrap()
        .iter()
        .filter_map(|e| {
            book.apply(e).unwrap();
            book.mid2().map(|m| m as f64 / 2.0)
        })
        .collect()
}

#[test]
fn mean_reversion_rate_is_recovered_by_least_squares() {
    for seed in 0..8 {
        let cfg = SyntheticMarketConfig {
            seed,
            event_count: 10_000,
            ..Default::default()
        };
        let mids = mid_series(&cfg);
        let mu = cfg.initial_mid as f64;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for w in mids.windows(2) {
            let x = mu - w[0];
            sxy += x * (w[1] - w[0]);
            sxx += x * x;
        }
        let theta = sxy / sxx;
        let rel = (theta - cfg.mean_reversion).abs() / cfg.mean_reversion;
        assert!(rel <= 0.3, "seed {seed}: fitted {theta}");
    }
}

#[test]
fn synthetic_streams_are_seeded_and_never_cross() {
    let cfg = SyntheticMarketConfig {
        seed: 11,
        event_count: 5_000,
        ..Default::default()
    };
    let a = generate_synthetic(&cfg).unwrap();
    assert_eq!(a, generate_synthetic(&cfg).unwrap());
    let b = generate_synthetic(&SyntheticMarketConfig { seed: 12, ..cfg.clone() }).unwrap();
    assert_ne!(a, b);
    let mut book = OrderBook::new();
    for e in &a {
        book.apply(e).unwrap();
        if let (Some(a), Some(b)) = (book.best_ask(), book.best_bid()) {
            assert!(a > b);
        }
    }
    let still = SyntheticMarketConfig {
        volatility: 0.0,
        market_order_prob: 0.0,
        ..cfg
    };
    let mids = mid_series(&still);
    assert!(mids.iter().all(|&m| m == mids[0]));
}

#[test]
fn up_and_down_labels_balance_on_symmetric_dynamics() {
    // Neighbouring labels share most of their mids; keeping every (2k+1)-th
    // sample leaves disjoint windows, so the binomial bound applies.
    let k = 10;
    let mut up = 0.0;
    let mut down = 0.0;
    for seed in 0..8 {
        let cfg = SyntheticMarketConfig {
            seed,
            event_count: 50_000,
            levels: 2,
            ..Default::default()
        };
        let snaps = mmlab_core::ingest::reconstruct(&generate_synthetic(&cfg).unwrap(), 1).unwrap().snapshots;
        for s in label_windows(&snaps, k, 1e-5, 1).unwrap().filter(|s| s.index % (2 * k + 1) == 0) {
            match s.label {
                1 => up += 1.0,
                -1 => down += 1.0,
                _ => {}
            }
        }
    }
    let n: f64 = up + down;
    let sigma = (n * 0.25).sqrt();
    assert!((up - n / 2.0).abs() <= 3.0 * sigma, "up {up} down {down}");
}

#[test]
fn exported_training_prices_are_standardized() {
    let events = generate_synthetic(&SyntheticMarketConfig {
        seed: 5,
        event_count: 6_000,
        levels: 6,
        ..Default::default()
    })
    .unwrap();
    let cfg = ExportConfig {
        window: 8,
        levels: 4,
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let m = export_dataset(&events, &cfg, dir.path()).unwrap();
    let bytes = std::fs::read(dir.path().join("train.bin")).unwrap();
    assert_eq!(bytes.len(), m.train_samples * m.record_bytes);
    let mut sum = vec![0.0f64; m.cols];
    let mut sq = vec![0.0f64; m.cols];
    let mut n = vec![0.0f64; m.cols];
    let mut max_vol = 0.0f32;
    for rec in bytes.chunks(m.record_bytes) {
        let (values, label) = decode_record(rec, m.rows, m.cols).unwrap();
        assert!((-1..=1).contains(&label));
        for row in values.chunks(m.cols) {
            for (c, &v) in row.iter().enumerate() {
                // Empty levels carry zero volume and are not part of the fit.
                if c % 2 == 0 && row[c + 1] > 0.0 {
                    n[c] += 1.0;
                    sum[c] += v as f64;
                    sq[c] += (v as f64).powi(2);
                } else if c % 2 == 1 {
                    max_vol = max_vol.max(v);
                }
            }
        }
    }
    for c in (0..m.cols).step_by(2) {
        let mean = sum[c] / n[c];
        let std = (sq[c] / n[c] - mean * mean).sqrt();
        assert!(mean.abs() <= 1e-6, "column {c}: mean {mean}");
        assert!((std - 1.0).abs() <= 1e-6, "column {c}: std {std}");
    }
    assert_eq!(max_vol, 1.0);
    assert_eq!(m.train_labels.iter().sum::<usize>(), m.train_samples);
}

#[test]
fn normalization_fixed_points() {
    let raw = LobWindow {
        rows: 1,
        cols: 4,
        data: vec![100.0, 500.0, 100.0, 250.0],
    };
    let stats = NormStats {
        cols: 4,
        mean: vec![0.25, 0.0, -0.5, 0.0],
        std: vec![2.0, 0.0, 0.5, 0.0],
        max_volume: 500.0,
        samples: 1,
    };
    let out = normalize_window(&raw, &stats);
    assert_eq!(out.data, vec![-0.125, 1.0, 1.0, 0.5]);
    // Volumes already on the unit scale only survive a second pass when the max is one.
    let unit = NormStats { max_volume: 1.0, ..stats.clone() };
    let again = normalize_window(&LobWindow { data: vec![100.0, 1.0, 100.0, 0.5], ..raw.clone() }, &unit);
    assert_eq!((again.data[1], again.data[3]), (1.0, 0.5));
    let degenerate = NormStats { std: vec![0.0; 4], ..stats };
    assert_eq!(normalize_window(&raw, &degenerate).data[0], 0.0);
}

#[test]
fn csv_row_and_round_trip() {
    let text = "XYZ,0.01,2019-11-01,10,1\n5,171000000,ADD,42,B,1000,100\n";
    let reader = EventReader::new(text.as_bytes()).unwrap();
    let header = reader.header().clone();
    let events: Vec<MarketEvent> = reader.collect::<Result<_, _>>().unwrap();
    assert_eq!(
        events,
        vec![MarketEvent {
            seq: 5,
            timestamp_ns: 171_000_000,
            kind: EventKind::AddLimit,
            order_id: 42,
            side: Side::Bid,
            price: 1000,
            volume: 100,
        }]
    );
    let mut out = Vec::new();
    write_events(&mut out, &header, &events).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), text);

    let stream = generate_synthetic(&SyntheticMarketConfig {
        event_count: 3_000,
        ..Default::default()
    })
    .unwrap();
    let header = EventFileHeader {
        instrument: "SYNTH".into(),
        tick_size: 0.01,
        date: "2019-11-01".into(),
        levels: 10,
        count: stream.len() as u64,
    };
    let mut first = Vec::new();
    write_events(&mut first, &header, &stream).unwrap();
    let reread: Vec<MarketEvent> = EventReader::new(&first[..]).unwrap().collect::<Result<_, _>>().unwrap();
    assert_eq!(reread, stream);
    let mut second = Vec::new();
    write_events(&mut second, &header, &reread).unwrap();
    assert_eq!(first, second);
}

#[test]
fn malformed_files_are_rejected() {
    let cases = [
        ("", "empty"),
        ("X,zero,d,1,0\n", "tick"),
        ("X,0.01,d,1,2\n1,1,ADD,1,B,10,100\n", "count"),
        ("X,0.01,d,1,2\n2,1,ADD,1,B,10,100\n2,2,ADD,2,B,10,100\n", "seq"),
        ("X,0.01,d,1,1\n1,1,BUY,1,B,10,100\n", "kind"),
        ("X,0.01,d,1,1\n1,1,ADD,1,S,10,100\n", "side"),
        ("X,0.01,d,1,1\n1,1,ADD,1,B,10\n", "fields"),
    ];
    for (text, what) in cases {
        let r: Result<Vec<MarketEvent>, _> = EventReader::new(text.as_bytes()).and_then(|r| r.collect());
        assert!(r.is_err(), "{what}");
    }
}
