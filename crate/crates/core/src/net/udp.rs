use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::packet::{decode, encode, DecodeError, WatermarkPacket, PACKET_LEN};
use super::queue::DropOldestQueue;
use super::PacketRecord;

pub const DEFAULT_PORT: u16 = 47808;
const DEFAULT_QUEUE: usize = 4096;

#[derive(Debug, Default)]
struct Counters {
    datagrams: AtomicU64,
    decoded: AtomicU64,
    truncated: AtomicU64,
    foreign: AtomicU64,
    corrupted: AtomicU64,
    rejected: AtomicU64,
}

/// Snapshot of receive-side counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounters {
    pub datagrams: u64,
    pub decoded: u64,
    pub truncated: u64,
    pub foreign: u64,
    pub corrupted: u64,
    /// Oversized, wrong version or unknown message type.
    pub rejected: u64,
    /// Packets evicted from the full ingest queue.
    pub queue_evicted: u64,
}

/// Background UDP receiver. Decoded packets are tagged with their source
/// address and queued for a single consumer.
pub struct UdpIngest {
    local: SocketAddr,
    queue: Arc<DropOldestQueue<PacketRecord>>,
    counters: Arc<Counters>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl UdpIngest {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Self::bind_with_capacity(addr, DEFAULT_QUEUE)
    }

    pub fn bind_with_capacity(addr: impl ToSocketAddrs, capacity: usize) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(20)))?;
        let local = socket.local_addr()?;
        let queue = Arc::new(DropOldestQueue::new(capacity));
        let counters = Arc::new(Counters::default());
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let (queue, counters, stop) = (queue.clone(), counters.clone(), stop.clone());
            std::thread::Builder::new()
                .name("wmatch-udp".into())
                .spawn(move || receive_loop(socket, &queue, &counters, &stop))?
        };
        Ok(Self {
            local,
            queue,
            counters,
            stop,
            handle: Some(handle),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    pub fn drain(&self) -> Vec<PacketRecord> {
        self.queue.drain()
    }

    pub fn counters(&self) -> IngestCounters {
        let c = &self.counters;
        IngestCounters {
            datagrams: c.datagrams.load(Ordering::Relaxed),
            decoded: c.decoded.load(Ordering::Relaxed),
            truncated: c.truncated.load(Ordering::Relaxed),
            foreign: c.foreign.load(Ordering::Relaxed),
            corrupted: c.corrupted.load(Ordering::Relaxed),
            rejected: c.rejected.load(Ordering::Relaxed),
            queue_evicted: self.queue.evicted(),
        }
    }

    pub fn shutdown(mut self) -> Vec<PacketRecord> {
        self.stop_thread();
        self.queue.drain()
    }

    fn stop_thread(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for UdpIngest {
    fn drop(&mut self) {
        self.stop_thread();
    }
}

fn receive_loop(socket: UdpSocket, queue: &DropOldestQueue<PacketRecord>, c: &Counters, stop: &AtomicBool) {
    let mut buf = [0u8; 2048];
    while !stop.load(Ordering::Relaxed) {
        let (n, src) = match socket.recv_from(&mut buf) {
            Ok(x) => x,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
            Err(e) => {
                warn!("udp receive failed: {e}");
                continue;
            }
        };
        c.datagrams.fetch_add(1, Ordering::Relaxed);
        match decode(&buf[..n]) {
            Ok(packet) => {
                c.decoded.fetch_add(1, Ordering::Relaxed);
                queue.push(PacketRecord {
                    address: src.to_string(),
                    packet,
                });
            }
            Err(e) => {
                debug!("dropping datagram from {src}: {e}");
                let counter = match e {
                    DecodeError::Truncated(_) => &c.truncated,
                    DecodeError::Foreign(_) => &c.foreign,
                    DecodeError::Corrupted { .. } => &c.corrupted,
                    _ => &c.rejected,
                };
                counter.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
}

/// Vehicle-side sender. Its local address is the vehicle's communication
/// address as seen by the RSU.
pub struct UdpSender {
    socket: UdpSocket,
}

impl UdpSender {
    pub fn connect(local: impl ToSocketAddrs, rsu: impl ToSocketAddrs) -> io::Result<Self> {
        let socket = UdpSocket::bind(local)?;
        socket.connect(rsu)?;
        Ok(Self { socket })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn send(&self, pkt: &WatermarkPacket) -> io::Result<()> {
        let n = self.socket.send(&encode(pkt))?;
        debug_assert_eq!(n, PACKET_LEN);
        Ok(())
    }

    pub fn send_raw(&self, bytes: &[u8]) -> io::Result<()> {
        self.socket.send(bytes).map(|_| ())
    }
}
