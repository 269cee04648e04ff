//! Environment protocol: the simulator served to external agents over
//! length-prefixed frames, one simulator per session.

pub mod client;
pub mod protocol;
pub mod server;
pub mod session;
pub mod wire;

pub use client::{decode_server_payload, Client};
pub use protocol::{
    ClientMessage, Encoding, LayoutGroup, ObservationLayout, ObservationParts, ObservationToggles, OutcomeBody,
    ServerMessage, SessionConfig, WireAction, PROTOCOL_VERSION,
};
pub use server::{serve_session, serve_stdio, spawn_server, ServerHandle, ServerOptions};
pub use session::{Reply, Session};
