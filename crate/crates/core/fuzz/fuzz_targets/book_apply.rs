#![no_main]

use libfuzzer_sys::fuzz_target;
use mmlab_core::book::{EventKind, MarketEvent, OrderBook, Side};

// Six bytes per event: kind, side, price, volume, order id, sequence step.
fuzz_target!(|data: &[u8]| {
    let mut book = OrderBook::new();
    let mut seq = 0u64;
    for chunk in data.chunks_exact(6) {
        seq += u64::from(chunk[5] % 3);
        let ev = MarketEvent {
            seq,
            timestamp_ns: seq,
            kind: match chunk[0] % 3 {
                0 => EventKind::AddLimit,
                1 => EventKind::Cancel,
                _ => EventKind::Trade,
            },
            order_id: u64::from(chunk[4] % 32),
            side: if chunk[1] & 1 == 0 { Side::Bid } else { Side::Ask },
            price: 90 + i64::from(chunk[2] % 20),
            volume: u64::from(chunk[3]) * 10,
        };
        let before = book.snapshot(32);
        let live = book.live_orders();
        if book.apply(&ev).is_err() {
            assert_eq!(book.snapshot(32), before);
            assert_eq!(book.live_orders(), live);
        }
        let snap = book.snapshot(32);
        assert!(snap.is_well_formed());
        for side in [Side::Bid, Side::Ask] {
            for (price, volume) in book.levels(side) {
                let queued: u64 = book.queue_at(side, price).iter().filter_map(|id| book.order_volume(*id)).sum();
                assert_eq!(queued, volume);
            }
        }
    }
});
