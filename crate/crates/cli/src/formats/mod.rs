//! Binary artifact formats.
//!
//! Every container follows the same envelope: a 4-byte magic, a little-endian
//! u32 header length, a UTF-8 JSON header, a format-specific payload, and a
//! trailing CRC32 over header plus payload. Readers check magic, version,
//! counts, and checksum, and distinguish truncation from corruption.

pub mod checkpoint;
pub mod complexbin;
pub mod dataset;
pub mod index;

use crate::CliError;

pub(crate) fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

/// Cursor-style reader over an in-memory artifact.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CliError> {
        if self.pos + n > self.bytes.len() {
            return Err(data_err(format!(
                "truncated file: expected {n} bytes of {what} at offset {}",
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u16(&mut self, what: &str) -> Result<u16, CliError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self, what: &str) -> Result<u32, CliError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f32(&mut self, what: &str) -> Result<f32, CliError> {
        let b = self.take(4, what)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Serialize a header, frame it with magic + length, append the payload and
/// the checksum.
pub(crate) fn frame(magic: &[u8; 4], header: &impl serde::Serialize, payload: &[u8]) -> Vec<u8> {
    let header_bytes = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + header_bytes.len() + payload.len() + 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(payload);
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&header_bytes);
    hasher.update(payload);
    out.extend_from_slice(&hasher.finalize().to_le_bytes());
    out
}

/// Split a framed artifact into header and payload, verifying the envelope.
pub(crate) fn unframe<'a, H: serde::de::DeserializeOwned>(
    magic: &[u8; 4],
    bytes: &'a [u8],
    what: &str,
) -> Result<(H, &'a [u8]), CliError> {
    let mut r = Reader::new(bytes);
    let found = r.take(4, "magic")?;
    if found != magic {
        return Err(data_err(format!(
            "{what}: bad magic {found:02x?}, expected {magic:02x?}"
        )));
    }
    let header_len = r.u32("header length")? as usize;
    let header_bytes = r.take(header_len, "header")?;
    if r.remaining() < 4 {
        return Err(data_err(format!("{what}: truncated before checksum")));
    }
    let payload = &bytes[r.offset()..bytes.len() - 4];
    let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(header_bytes);
    hasher.update(payload);
    if hasher.finalize() != stored_crc {
        return Err(data_err(format!("{what}: checksum mismatch")));
    }
    let header: H = serde_json::from_slice(header_bytes)
        .map_err(|e| data_err(format!("{what}: header parse error: {e}")))?;
    Ok((header, payload))
}
