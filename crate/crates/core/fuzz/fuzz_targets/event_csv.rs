#![no_main]

use libfuzzer_sys::fuzz_target;
use mmlab_core::ingest::{write_events, EventReader};

fuzz_target!(|data: &[u8]| {
    let Ok(reader) = EventReader::new(data) else { return };
    let header = reader.header().clone();
    let Ok(events) = reader.collect::<Result<Vec<_>, _>>() else { return };
    // Anything accepted must survive a write/read cycle unchanged.
    let mut out = Vec::new();
    write_events(&mut out, &header, &events).unwrap();
    let again: Vec<_> = EventReader::new(&out[..]).unwrap().collect::<Result<_, _>>().unwrap();
    assert_eq!(again, events);
});
