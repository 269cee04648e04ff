//! Length-prefixed frames.
//!
//! ```text
//! u32 LE payload length | payload
//! ```
//!
//! A payload starting with `{` is a JSON message. A payload starting with
//! [`BINARY_TAG`] is a binary outcome:
//!
//! ```text
//! 0xB1 | u32 LE header length | JSON header | u32 LE n | n × f32 LE
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAX_FRAME: usize = 16 * 1024 * 1024;
pub const BINARY_TAG: u8 = 0xB1;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("frame of {0} bytes exceeds the {MAX_FRAME}-byte limit")]
    Oversized(usize),
    #[error("truncated frame: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("empty payload")]
    Empty,
    #[error("malformed binary payload: {0}")]
    BadBinary(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads one frame. `Ok(None)` on a clean end of stream between frames.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, WireError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(WireError::Truncated { expected: 4, got }),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let n = u32::from_le_bytes(len) as usize;
    if n > MAX_FRAME {
        return Err(WireError::Oversized(n));
    }
    let mut payload = vec![0u8; n];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => WireError::Truncated { expected: n, got: 0 },
        _ => e.into(),
    })?;
    Ok(Some(payload))
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<(), WireError> {
    if payload.len() > MAX_FRAME {
        return Err(WireError::Oversized(payload.len()));
    }
    w.write_all(&(payload.len() as u32).to_le_bytes())?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// Splits one frame off the front of `bytes`; returns the payload and the
/// remainder.
pub fn split_frame(bytes: &[u8]) -> Result<(&[u8], &[u8]), WireError> {
    if bytes.len() < 4 {
        return Err(WireError::Truncated { expected: 4, got: bytes.len() });
    }
    let n = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    if n > MAX_FRAME {
        return Err(WireError::Oversized(n));
    }
    let rest = &bytes[4..];
    if rest.len() < n {
        return Err(WireError::Truncated { expected: n, got: rest.len() });
    }
    Ok(rest.split_at(n))
}

pub fn encode_binary(header: &[u8], values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + header.len() + 4 * values.len());
    out.push(BINARY_TAG);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Inverse of [`encode_binary`]; the whole payload must be consumed.
pub fn decode_binary(payload: &[u8]) -> Result<(&[u8], Vec<f32>), WireError> {
    let take_u32 = |b: &[u8]| -> Result<usize, WireError> {
        b.get(..4)
            .map(|s| u32::from_le_bytes(s.try_into().expect("4 bytes")) as usize)
            .ok_or(WireError::BadBinary("short length field"))
    };
    match payload.first() {
        None => return Err(WireError::Empty),
        Some(&BINARY_TAG) => {}
        Some(_) => return Err(WireError::BadBinary("missing tag")),
    }
    let body = &payload[1..];
    let hlen = take_u32(body)?;
    let body = &body[4..];
    if body.len() < hlen {
        return Err(WireError::BadBinary("short header"));
    }
    let (header, body) = body.split_at(hlen);
    let n = take_u32(body)?;
    let body = &body[4..];
    if body.len() != n.checked_mul(4).ok_or(WireError::BadBinary("count overflow"))? {
        return Err(WireError::BadBinary("value count mismatch"));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"{\"type\":\"bye\"}").unwrap();
        write_frame(&mut buf, b"").unwrap();
        assert_eq!(&buf[..4], &14u32.to_le_bytes());
        let mut r = buf.as_slice();
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"{\"type\":\"bye\"}");
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"");
        assert!(read_frame(&mut r).unwrap().is_none());
        let (p, rest) = split_frame(&buf).unwrap();
        assert_eq!(p.len(), 14);
        assert_eq!(rest.len(), 4);
    }

    #[test]
    fn rejects_bad_frames() {
        let mut r: &[u8] = &[1, 0];
        assert!(matches!(read_frame(&mut r), Err(WireError::Truncated { .. })));
        let huge = ((MAX_FRAME + 1) as u32).to_le_bytes();
        assert!(matches!(read_frame(&mut &huge[..]), Err(WireError::Oversized(_))));
        assert!(matches!(split_frame(&[5, 0, 0, 0, 1]), Err(WireError::Truncated { .. })));
    }

    #[test]
    fn binary_round_trip() {
        let vals = [1.5f32, -0.25, f32::MAX];
        let p = encode_binary(b"{}", &vals);
        let (h, v) = decode_binary(&p).unwrap();
        assert_eq!(h, b"{}");
        assert_eq!(v, vals);
        assert!(decode_binary(&p[..p.len() - 1]).is_err());
        assert!(decode_binary(b"{").is_err());
    }
}
