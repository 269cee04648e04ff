#![no_main]

use std::sync::Arc;

use libfuzzer_sys::fuzz_target;
use mmlab_core::bridge::{ClientMessage, ServerMessage, Session, SessionConfig};
use mmlab_core::sim::DataSource;

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<ServerMessage>(data);
    let Ok(msg) = serde_json::from_slice::<ClientMessage>(data) else { return };
    // Only stateless requests reach a session: configure/reset would let the
    // input pick arbitrarily long episodes.
    if matches!(msg, ClientMessage::Configure { .. } | ClientMessage::Reset { .. }) {
        return;
    }
    let source = Arc::new(DataSource::events(Vec::new(), 0.01));
    let mut session = Session::new(&source, SessionConfig::default(), 0);
    let reply = session.handle_payload(data);
    let _ = session.encode_reply(&reply);
    let reply = session.handle(ClientMessage::Hello { version: 1, encoding: Default::default() });
    assert!(matches!(reply.message, ServerMessage::Hello { .. }));
    let _ = session.handle_payload(data);
});
