#![no_main]

use libfuzzer_sys::fuzz_target;
use mmlab_core::bridge::decode_server_payload;
use mmlab_core::bridge::wire::{decode_binary, encode_binary, read_frame, split_frame};

fuzz_target!(|data: &[u8]| {
    let mut cursor = data;
    while let Ok(Some(payload)) = read_frame(&mut cursor) {
        let _ = decode_server_payload(&payload);
    }
    if let Ok((payload, rest)) = split_frame(data) {
        assert_eq!(payload.len() + rest.len() + 4, data.len());
    }
    if let Ok((header, values)) = decode_binary(data) {
        let again = encode_binary(header, &values);
        assert_eq!(again.len(), data.len());
    }
});
