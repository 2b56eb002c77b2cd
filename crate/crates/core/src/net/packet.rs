//! Fixed 56-byte vehicle-to-RSU watermark packet.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "WMK1"
//!      4     1  version
//!      5     1  msg_type (0x01 = watermark sample)
//!      6     2  reserved, zero
//!      8     4  seq           u32
//!     12     8  timestamp_us  u64, microseconds since scenario epoch
//!     20     8  u_g_v         f64
//!     28     8  u_g_omega     f64
//!     36     8  e_v           f64
//!     44     8  e_omega       f64
//!     52     4  CRC-32/ISO-HDLC of bytes 0..52
//! ```
//!
//! All integers and floats are little-endian. The sender's address is the
//! transport source address and is not part of the payload.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"WMK1";
pub const VERSION: u8 = 1;
pub const MSG_WATERMARK: u8 = 0x01;
pub const PACKET_LEN: usize = 56;
const CRC_OFFSET: usize = 52;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WatermarkPacket {
    pub version: u8,
    pub seq: u32,
    pub timestamp_us: u64,
    pub u_g_v: f64,
    pub u_g_omega: f64,
    pub e_v: f64,
    pub e_omega: f64,
}

impl WatermarkPacket {
    pub fn new(seq: u32, timestamp_us: u64, u_g_v: f64, u_g_omega: f64, e_v: f64, e_omega: f64) -> Self {
        Self {
            version: VERSION,
            seq,
            timestamp_us,
            u_g_v,
            u_g_omega,
            e_v,
            e_omega,
        }
    }

    /// Bitwise equality, so that NaN payloads and signed zeros compare as
    /// the bytes on the wire do.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.seq == other.seq
            && self.timestamp_us == other.timestamp_us
            && self.u_g_v.to_bits() == other.u_g_v.to_bits()
            && self.u_g_omega.to_bits() == other.u_g_omega.to_bits()
            && self.e_v.to_bits() == other.e_v.to_bits()
            && self.e_omega.to_bits() == other.e_omega.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated packet: {0} bytes, expected {PACKET_LEN}")]
    Truncated(usize),
    #[error("oversized datagram: {0} bytes, expected {PACKET_LEN}")]
    Oversized(usize),
    #[error("foreign packet: magic {0:02x?}")]
    Foreign([u8; 4]),
    #[error("corrupted packet: crc {computed:#010x} != {stored:#010x}")]
    Corrupted { stored: u32, computed: u32 },
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownMessageType(u8),
}

pub fn encode(pkt: &WatermarkPacket) -> [u8; PACKET_LEN] {
    let mut buf = [0u8; PACKET_LEN];
    buf[0..4].copy_from_slice(&MAGIC);
    buf[4] = pkt.version;
    buf[5] = MSG_WATERMARK;
    // bytes 6..8 reserved, left zero
    buf[8..12].copy_from_slice(&pkt.seq.to_le_bytes());
    buf[12..20].copy_from_slice(&pkt.timestamp_us.to_le_bytes());
    buf[20..28].copy_from_slice(&pkt.u_g_v.to_le_bytes());
    buf[28..36].copy_from_slice(&pkt.u_g_omega.to_le_bytes());
    buf[36..44].copy_from_slice(&pkt.e_v.to_le_bytes());
    buf[44..52].copy_from_slice(&pkt.e_omega.to_le_bytes());
    let crc = crc32fast::hash(&buf[..CRC_OFFSET]);
    buf[CRC_OFFSET..].copy_from_slice(&crc.to_le_bytes());
    buf
}

/// Parses one datagram.
///
/// A magic within one bit of `WMK1` is treated as our own packet damaged in
/// transit and reported through the CRC check; anything further away is
/// foreign traffic.
pub fn decode(bytes: &[u8]) -> Result<WatermarkPacket, DecodeError> {
    if bytes.len() < PACKET_LEN {
        return Err(DecodeError::Truncated(bytes.len()));
    }
    if bytes.len() > PACKET_LEN {
        return Err(DecodeError::Oversized(bytes.len()));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic_distance(&magic) > 1 {
        return Err(DecodeError::Foreign(magic));
    }
    let stored = u32::from_le_bytes(bytes[CRC_OFFSET..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..CRC_OFFSET]);
    if stored != computed {
        return Err(DecodeError::Corrupted { stored, computed });
    }
    if magic != MAGIC {
        return Err(DecodeError::Foreign(magic));
    }
    if bytes[4] != VERSION {
        return Err(DecodeError::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != MSG_WATERMARK {
        return Err(DecodeError::UnknownMessageType(bytes[5]));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    Ok(WatermarkPacket {
        version: bytes[4],
        seq: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
        timestamp_us: u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
        u_g_v: f64_at(20),
        u_g_omega: f64_at(28),
        e_v: f64_at(36),
        e_omega: f64_at(44),
    })
}

fn magic_distance(magic: &[u8; 4]) -> u32 {
    magic
        .iter()
        .zip(MAGIC.iter())
        .map(|(a, b)| (a ^ b).count_ones())
        .sum()
}
