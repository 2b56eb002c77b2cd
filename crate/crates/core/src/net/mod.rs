//! Vehicle-to-RSU transport: wire format, UDP ingestion, CSV replay and
//! alignment of packet and observation streams.

pub mod align;
pub mod packet;
pub mod queue;
pub mod replay;
pub mod udp;

pub(crate) use align::seconds_to_us;
pub use align::{align, AddressStats, AlignOutput, AlignPolicy, AlignedSample, Aligner};
pub use packet::{decode, encode, DecodeError, WatermarkPacket, PACKET_LEN, VERSION};
pub use replay::{load_replay, ReplayStreams};
pub use udp::{IngestCounters, UdpIngest, UdpSender, DEFAULT_PORT};

use serde::{Deserialize, Serialize};

/// A packet together with the address it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub address: String,
    pub packet: WatermarkPacket,
}
