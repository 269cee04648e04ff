#![no_main]

use libfuzzer_sys::fuzz_target;
use mmlab_core::book::LobWindow;
use mmlab_core::ingest::{decode_record, encode_record};

fuzz_target!(|data: &[u8]| {
    let [rows, cols, record @ ..] = data else { return };
    let (rows, cols) = (*rows as usize % 64, *cols as usize % 64);
    let Ok((values, label)) = decode_record(record, rows, cols) else { return };
    let window = LobWindow {
        rows,
        cols,
        data: values.iter().map(|&v| v as f64).collect(),
    };
    let mut again = Vec::new();
    encode_record(&window, label, &mut again);
    assert_eq!(again.len(), record.len());
    let (back, l) = decode_record(&again, rows, cols).unwrap();
    assert_eq!(l, label);
    for (a, b) in back.iter().zip(&values) {
        assert!(a == b || (a.is_nan() && b.is_nan()));
    }
});
