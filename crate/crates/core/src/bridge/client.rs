//! Minimal blocking client, used by tests and tooling.

use std::io::{BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};

use super::protocol::{ClientMessage, ServerMessage};
use super::wire::{decode_binary, read_frame, write_frame, WireError, BINARY_TAG};

/// Decodes a server payload in either encoding. Binary observations are
/// widened back to f64.
pub fn decode_server_payload(payload: &[u8]) -> Result<ServerMessage, String> {
    if payload.first() == Some(&BINARY_TAG) {
        let (header, values) = decode_binary(payload).map_err(|e| e.to_string())?;
        let mut msg: ServerMessage = serde_json::from_slice(header).map_err(|e| e.to_string())?;
        match &mut msg {
            ServerMessage::Outcome(body) => body.observation = values.into_iter().map(f64::from).collect(),
            _ => return Err("binary frame without an outcome header".into()),
        }
        Ok(msg)
    } else {
        serde_json::from_slice(payload).map_err(|e| e.to_string())
    }
}

pub struct Client<R: Read, W: Write> {
    reader: R,
    writer: W,
}

impl Client<BufReader<TcpStream>, TcpStream> {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> std::io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
        })
    }
}

impl<R: Read, W: Write> Client<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self { reader, writer }
    }

    pub fn send_raw(&mut self, payload: &[u8]) -> Result<ServerMessage, WireError> {
        write_frame(&mut self.writer, payload)?;
        let reply = read_frame(&mut self.reader)?.ok_or(WireError::Truncated { expected: 4, got: 0 })?;
        decode_server_payload(&reply).map_err(|e| WireError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
    }

    pub fn request(&mut self, msg: &ClientMessage) -> Result<ServerMessage, WireError> {
        self.send_raw(&serde_json::to_vec(msg).expect("serializable"))
    }
}
