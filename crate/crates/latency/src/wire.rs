use std::io::Read;

use crate::LatencyError;

/// Frame marker; frames with any other prefix are dropped.
pub const MAGIC: [u8; 4] = *b"RTD1";
/// Fixed part of every frame: magic, sequence, send timestamp, payload
/// length.
pub const FRAME_HEADER_LEN: usize = 4 + 4 + 8 + 2;

/// One probe (or acknowledgement) frame. All integer fields are
/// big-endian on the wire; total size is `18 + payload.len()` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeMessage {
    pub seq: u32,
    /// Monotonic send time in nanoseconds; echoed back unchanged.
    pub t_send_ns: u64,
    pub payload: Vec<u8>,
}

impl ProbeMessage {
    pub fn wire_len(&self) -> usize {
        FRAME_HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>, LatencyError> {
        if self.payload.len() > u16::MAX as usize {
            return Err(LatencyError::Wire(format!(
                "payload of {} bytes exceeds the 16-bit length field",
                self.payload.len()
            )));
        }
        let mut buf = Vec::with_capacity(self.wire_len());
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&self.seq.to_be_bytes());
        buf.extend_from_slice(&self.t_send_ns.to_be_bytes());
        buf.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        buf.extend_from_slice(&self.payload);
        Ok(buf)
    }

    pub fn decode(buf: &[u8]) -> Result<Self, LatencyError> {
        if buf.len() < FRAME_HEADER_LEN {
            return Err(LatencyError::Wire(format!(
                "frame of {} bytes shorter than the {FRAME_HEADER_LEN}-byte header",
                buf.len()
            )));
        }
        if buf[0..4] != MAGIC {
            return Err(LatencyError::Wire(format!(
                "bad magic {:02x?}",
                &buf[0..4]
            )));
        }
        let seq = u32::from_be_bytes(buf[4..8].try_into().expect("sized"));
        let t_send_ns = u64::from_be_bytes(buf[8..16].try_into().expect("sized"));
        let payload_len = u16::from_be_bytes(buf[16..18].try_into().expect("sized")) as usize;
        if buf.len() != FRAME_HEADER_LEN + payload_len {
            return Err(LatencyError::Wire(format!(
                "frame length {} disagrees with declared payload of {payload_len}",
                buf.len()
            )));
        }
        Ok(Self {
            seq,
            t_send_ns,
            payload: buf[FRAME_HEADER_LEN..].to_vec(),
        })
    }
}

/// Raw frame as read off a stream, before magic validation.
pub(crate) struct RawFrame {
    pub magic_ok: bool,
    pub bytes: Vec<u8>,
}

/// Reads exactly one length-delimited frame from a stream. The header is
/// fixed-layout, so even a frame with a corrupt magic can be skipped by
/// trusting its declared payload length.
pub(crate) fn read_raw_frame(stream: &mut impl Read) -> std::io::Result<RawFrame> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    stream.read_exact(&mut header)?;
    let payload_len = u16::from_be_bytes(header[16..18].try_into().expect("sized")) as usize;
    let mut bytes = Vec::with_capacity(FRAME_HEADER_LEN + payload_len);
    bytes.extend_from_slice(&header);
    bytes.resize(FRAME_HEADER_LEN + payload_len, 0);
    stream.read_exact(&mut bytes[FRAME_HEADER_LEN..])?;
    Ok(RawFrame {
        magic_ok: header[0..4] == MAGIC,
        bytes,
    })
}

/// Reads and decodes one valid frame; a corrupt magic is an error.
pub fn read_frame(stream: &mut impl Read) -> Result<ProbeMessage, LatencyError> {
    let raw = read_raw_frame(stream)?;
    ProbeMessage::decode(&raw.bytes)
}
