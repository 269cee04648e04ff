//! Mid-price direction labels, window normalization and dataset export.
//!
//! Record layout (little endian): `rows × cols` `f32` values of the
//! normalized window followed by one `i8` label in `{-1, 0, 1}`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::book::{BookSnapshot, LobWindow, MarketEvent, OrderBook};

/// Per-event snapshots and timestamps of a replayed stream.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub snapshots: Vec<BookSnapshot>,
    pub timestamps: Vec<u64>,
}

pub fn reconstruct(events: &[MarketEvent], levels: usize) -> Result<Reconstruction, IngestError> {
    let mut book = OrderBook::new();
    let mut snapshots = Vec::with_capacity(events.len());
    let mut timestamps = Vec::with_capacity(events.len());
    for ev in events {
        snapshots.push(book.apply_event(ev, levels)?);
        timestamps.push(ev.timestamp_ns);
    }
    Ok(Reconstruction { snapshots, timestamps })
}

/// `(m₊ − m₋) / m₋` with `m± = (1/k) Σ_{i=0..k} p_{t±i}`. The common `1/k`
/// cancels, so the ratio is taken on the raw sums. `None` unless every mid in
/// `t−k ..= t+k` exists.
pub fn movement_ratio(mids2: &[Option<i64>], t: usize, k: usize) -> Option<f64> {
    if t < k || t + k >= mids2.len() {
        return None;
    }
    let mut past = 0i64;
    let mut future = 0i64;
    for i in 0..=k {
        past += mids2[t - i]?;
        future += mids2[t + i]?;
    }
    Some((future - past) as f64 / past as f64)
}

pub fn label_for(movement: f64, alpha: f64) -> i8 {
    if movement > alpha {
        1
    } else if movement < -alpha {
        -1
    } else {
        0
    }
}

/// Window of `t_window` snapshots ending at index `end` (inclusive).
pub fn window_at(snapshots: &[BookSnapshot], end: usize, t_window: usize) -> Option<LobWindow> {
    if t_window == 0 || end + 1 < t_window || end >= snapshots.len() {
        return None;
    }
    let cols = 4 * snapshots[end].levels;
    let mut data = Vec::with_capacity(t_window * cols);
    for s in &snapshots[end + 1 - t_window..=end] {
        s.flatten_into(&mut data);
    }
    Some(LobWindow {
        rows: t_window,
        cols,
        data,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    /// Index of the last snapshot in the window.
    pub index: usize,
    pub movement: f64,
    pub label: i8,
    pub window: LobWindow,
}

/// Lazily labels every index with full window history and a defined label.
pub fn label_windows<'a>(
    snapshots: &'a [BookSnapshot],
    k: usize,
    alpha: f64,
    t_window: usize,
) -> Result<impl Iterator<Item = LabeledSample> + 'a, IngestError> {
    let first = k.max(t_window.saturating_sub(1));
    if t_window == 0 || snapshots.len() < first + k + 1 {
        return Err(IngestError::InsufficientHistory {
            needed: first + k + 1,
            available: snapshots.len(),
        });
    }
    let mids: Vec<Option<i64>> = snapshots.iter().map(BookSnapshot::mid2).collect();
    Ok((first..snapshots.len() - k).filter_map(move |t| {
        let movement = movement_ratio(&mids, t, k)?;
        Some(LabeledSample {
            index: t,
            movement,
            label: label_for(movement, alpha),
            window: window_at(snapshots, t, t_window)?,
        })
    }))
}

/// Training-split statistics: per-column z-score moments for the stationary
/// price columns and the maximum volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub cols: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub max_volume: f64,
    pub samples: u64,
}

fn is_price_col(c: usize) -> bool {
    c % 2 == 0
}

/// Mid (ticks) of the last row of a raw window.
fn final_mid(raw: &LobWindow) -> Option<f64> {
    let last = raw.row(raw.rows - 1);
    let (ask, bid) = (last[0], last[2]);
    (ask > 0.0 && bid > 0.0).then(|| (ask + bid) / 2.0)
}

/// Replaces each present price by its fractional offset from the window's
/// final mid; empty levels become 0.
fn stationary_prices(raw: &LobWindow) -> Vec<Option<f64>> {
    let mid = final_mid(raw);
    raw.data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if !is_price_col(i % raw.cols) {
                return Some(v);
            }
            match mid {
                Some(m) if v > 0.0 => Some((v - m) / m),
                _ => None,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
struct StatsAccumulator {
    cols: usize,
    count: Vec<u64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    max_volume: f64,
    samples: u64,
}

impl StatsAccumulator {
    fn new(cols: usize) -> Self {
        Self {
            cols,
            count: vec![0; cols],
            sum: vec![0.0; cols],
            sum_sq: vec![0.0; cols],
            max_volume: 0.0,
            samples: 0,
        }
    }

    fn add(&mut self, raw: &LobWindow) {
        self.samples += 1;
        for (i, v) in stationary_prices(raw).into_iter().enumerate() {
            let c = i % self.cols;
            let Some(v) = v else { continue };
            if is_price_col(c) {
                self.count[c] += 1;
                self.sum[c] += v;
                self.sum_sq[c] += v * v;
            } else {
                self.max_volume = self.max_volume.max(v);
            }
        }
    }

    fn finish(self) -> NormStats {
        let mut mean = vec![0.0; self.cols];
        let mut std = vec![0.0; self.cols];
        for c in (0..self.cols).filter(|c| is_price_col(*c)) {
            if self.count[c] == 0 {
                continue;
            }
            let n = self.count[c] as f64;
            let m = self.sum[c] / n;
            mean[c] = m;
            std[c] = (self.sum_sq[c] / n - m * m).max(0.0).sqrt();
        }
        NormStats {
            cols: self.cols,
            mean,
            std,
            max_volume: self.max_volume,
            samples: self.samples,
        }
    }
}

impl NormStats {
    pub fn fit<'a>(windows: impl IntoIterator<Item = &'a LobWindow>) -> NormStats {
        let mut acc: Option<StatsAccumulator> = None;
        for w in windows {
            acc.get_or_insert_with(|| StatsAccumulator::new(w.cols)).add(w);
        }
        acc.map_or(
            NormStats {
                cols: 0,
                mean: Vec::new(),
                std: Vec::new(),
                max_volume: 0.0,
                samples: 0,
            },
            StatsAccumulator::finish,
        )
    }
}

/// Stationary transform plus z-norm (prices) and max-norm (volumes).
/// Degenerate statistics yield zeros for the affected feature.
pub fn normalize_window(raw: &LobWindow, stats: &NormStats) -> LobWindow {
    let mut warned = false;
    let data = stationary_prices(raw)
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let c = i % raw.cols;
            let Some(v) = v else { return 0.0 };
            if is_price_col(c) {
                let sd = stats.std.get(c).copied().unwrap_or(0.0);
                if sd > 0.0 {
                    (v - stats.mean[c]) / sd
                } else {
                    if !warned {
                        log::warn!("zero price variance in column {c}; emitting zeros");
                        warned = true;
                    }
                    0.0
                }
            } else if stats.max_volume > 0.0 {
                v / stats.max_volume
            } else {
                0.0
            }
        })
        .collect();
    LobWindow {
        rows: raw.rows,
        cols: raw.cols,
        data,
    }
}

pub fn encode_record(window: &LobWindow, label: i8, out: &mut Vec<u8>) {
    out.reserve(window.data.len() * 4 + 1);
    for v in &window.data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.push(label as u8);
}

/// Decodes one record of `rows × cols` floats plus label.
pub fn decode_record(bytes: &[u8], rows: usize, cols: usize) -> Result<(Vec<f32>, i8), IngestError> {
    let n = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(1))
        .ok_or(IngestError::BadRecord {
            expected: usize::MAX,
            got: bytes.len(),
        })?;
    if bytes.len() != n {
        return Err(IngestError::BadRecord {
            expected: n,
            got: bytes.len(),
        });
    }
    let values = bytes[..n - 1]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let label = bytes[n - 1] as i8;
    if !(-1..=1).contains(&label) {
        return Err(IngestError::BadRecord { expected: n, got: n });
    }
    Ok((values, label))
}

/// Trading-session filter on nanoseconds-since-midnight timestamps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionFilter {
    #[default]
    Off,
    /// 10:00–11:30 and 13:00–14:30.
    StableSessions,
}

impl SessionFilter {
    pub fn accepts(self, timestamp_ns: u64) -> bool {
        const MIN: u64 = 60 * 1_000_000_000;
        match self {
            SessionFilter::Off => true,
            SessionFilter::StableSessions => {
                let m = (timestamp_ns / MIN) % (24 * 60);
                (600..690).contains(&m) || (780..870).contains(&m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportConfig {
    pub k: usize,
    pub alpha: f64,
    pub window: usize,
    pub levels: usize,
    /// Leading fraction of samples (in time order) used for training.
    pub train_fraction: f64,
    pub session_filter: SessionFilter,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            k: 10,
            alpha: 1e-5,
            window: 50,
            levels: 10,
            train_fraction: 0.8,
            session_filter: SessionFilter::Off,
        }
    }
}

/// Sidecar file written next to the record files.
pub const DATASET_MANIFEST: &str = "dataset.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: ExportConfig,
    pub rows: usize,
    pub cols: usize,
    pub record_bytes: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Counts of labels `[-1, 0, 1]` per split.
    pub train_labels: [usize; 3],
    pub test_labels: [usize; 3],
    pub stats: NormStats,
    pub files: Vec<String>,
}

/// Labels, normalizes and writes `train.bin`, `test.bin` and `dataset.json`.
pub fn export_dataset(events: &[MarketEvent], cfg: &ExportConfig, out_dir: &Path) -> Result<DatasetManifest, IngestError> {
    let recon = reconstruct(events, cfg.levels)?;
    let samples: Vec<(usize, i8)> = label_windows(&recon.snapshots, cfg.k, cfg.alpha, cfg.window)?
        .filter(|s| cfg.session_filter.accepts(recon.timestamps[s.index]))
        .filter(|s| final_mid(&s.window).is_some())
        .map(|s| (s.index, s.label))
        .collect();
    let n_train = ((samples.len() as f64) * cfg.train_fraction.clamp(0.0, 1.0)).floor() as usize;
    let (train, test) = samples.split_at(n_train);

    let mut acc = StatsAccumulator::new(4 * cfg.levels);
    for &(t, _) in train {
        acc.add(&window_at(&recon.snapshots, t, cfg.window).expect("labelled index has a window"));
    }
    let stats = acc.finish();

    fs::create_dir_all(out_dir)?;
    let write_split = |name: &str, split: &[(usize, i8)]| -> Result<[usize; 3], IngestError> {
        let mut w = BufWriter::new(File::create(out_dir.join(name))?);
        let mut counts = [0usize; 3];
        let mut buf = Vec::new();
        for &(t, label) in split {
            let raw = window_at(&recon.snapshots, t, cfg.window).expect("labelled index has a window");
            buf.clear();
            encode_record(&normalize_window(&raw, &stats), label, &mut buf);
            w.write_all(&buf)?;
            counts[(label + 1) as usize] += 1;
        }
        w.flush()?;
        Ok(counts)
    };
    let train_labels = write_split("train.bin", train)?;
    let test_labels = write_split("test.bin", test)?;

    let cols = 4 * cfg.levels;
    let manifest = DatasetManifest {
        config: cfg.clone(),
        rows: cfg.window,
        cols,
        record_bytes: cfg.window * cols * 4 + 1,
        train_samples: train.len(),
        test_samples: test.len(),
        train_labels,
        test_labels,
        stats,
        files: vec!["train.bin".into(), "test.bin".into()],
    };
    fs::write(out_dir.join(DATASET_MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}
