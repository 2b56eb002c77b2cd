//! Time alignment of observation and packet streams.
//!
//! An observation stamped `t` was produced by the inputs applied during the
//! preceding control step, so for every address the aligner pairs it with
//! the latest packet stamped at or before `t - period/2`. A pairing is
//! dropped when that packet is older than the staleness bound or was already
//! used for the same visual ID. Packets may arrive out of order by up to
//! `reorder_capacity` positions; anything later is discarded, and an
//! observation is only resolved once enough newer packets have been seen
//! that no admissible packet can still change the choice.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{PacketRecord, WatermarkPacket};
use crate::sim::Observation;

pub const DEFAULT_STALENESS_PERIODS: u64 = 3;
pub const DEFAULT_REORDER_CAPACITY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignPolicy {
    /// Control period in microseconds; learned from the first two packets of
    /// a sender when `None`.
    pub period_us: Option<u64>,
    /// Maximum packet age relative to the observation, in control periods.
    pub staleness_periods: u64,
    pub reorder_capacity: usize,
}

impl Default for AlignPolicy {
    fn default() -> Self {
        Self {
            period_us: None,
            staleness_periods: DEFAULT_STALENESS_PERIODS,
            reorder_capacity: DEFAULT_REORDER_CAPACITY,
        }
    }
}

/// One observation paired with the packet whose inputs produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSample {
    pub address: String,
    pub visual_id: String,
    /// Packet sequence number (the control tick of the inputs).
    pub tick: u64,
    /// Observation time, s.
    pub t: f64,
    pub o_v: f64,
    pub o_omega: f64,
    pub u_g_v: f64,
    pub u_g_omega: f64,
    pub e_v: f64,
    pub e_omega: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressStats {
    pub observations: u64,
    pub aligned: u64,
    /// No packet at or before the cutoff.
    pub dropped_no_packet: u64,
    /// Latest eligible packet older than the staleness bound.
    pub dropped_stale: u64,
    /// Latest eligible packet already paired with this visual ID.
    pub dropped_reused: u64,
    pub packets_accepted: u64,
    pub packets_duplicate: u64,
    pub packets_late: u64,
}

impl AddressStats {
    pub fn dropped(&self) -> u64 {
        self.dropped_no_packet + self.dropped_stale + self.dropped_reused
    }
}

#[derive(Debug)]
struct Pending {
    index: u64,
    t_us: u64,
    obs: Arc<Observation>,
}

#[derive(Debug, Default)]
struct AddressState {
    /// Accepted packets keyed by timestamp.
    packets: BTreeMap<u64, WatermarkPacket>,
    seen_seqs: BTreeSet<u32>,
    max_seq: Option<u32>,
    first_seq_ts: Option<(u32, u64)>,
    pending: VecDeque<Pending>,
    last_used: HashMap<String, u32>,
    stats: AddressStats,
}

/// Incremental aligner. Feed packets and observations in arrival order and
/// collect resolved samples; call [`Aligner::flush`] at end of stream.
#[derive(Debug)]
pub struct Aligner {
    policy: AlignPolicy,
    period_us: Option<u64>,
    addresses: BTreeMap<String, AddressState>,
    /// Registration order, used to order output.
    address_order: Vec<String>,
    /// Recent observations, replayed to addresses that register late.
    recent: VecDeque<Pending>,
    observations: u64,
    newest_obs_us: u64,
    ready: Vec<(u64, usize, AlignedSample)>,
}

pub(crate) fn seconds_to_us(t: f64) -> u64 {
    (t * 1e6).round().max(0.0) as u64
}

impl Aligner {
    pub fn new(policy: AlignPolicy) -> Self {
        Self {
            policy,
            period_us: policy.period_us.filter(|&p| p > 0),
            addresses: BTreeMap::new(),
            address_order: Vec::new(),
            recent: VecDeque::new(),
            observations: 0,
            newest_obs_us: 0,
            ready: Vec::new(),
        }
    }

    pub fn policy(&self) -> &AlignPolicy {
        &self.policy
    }

    pub fn period_us(&self) -> Option<u64> {
        self.period_us
    }

    pub fn addresses(&self) -> &[String] {
        &self.address_order
    }

    pub fn stats(&self) -> BTreeMap<String, AddressStats> {
        self.addresses
            .iter()
            .map(|(a, s)| (a.clone(), s.stats))
            .collect()
    }

    fn staleness_us(&self) -> Option<u64> {
        self.period_us.map(|p| p * self.policy.staleness_periods)
    }

    /// Registers an address. Observations already retained are queued for it;
    /// older ones count as dropped.
    pub fn register_address(&mut self, address: &str) {
        if self.addresses.contains_key(address) {
            return;
        }
        let mut st = AddressState::default();
        for p in &self.recent {
            st.pending.push_back(Pending {
                index: p.index,
                t_us: p.t_us,
                obs: Arc::clone(&p.obs),
            });
        }
        let backlog = self.observations - self.recent.len() as u64;
        st.stats.observations = backlog;
        st.stats.dropped_no_packet = backlog;
        st.stats.observations += self.recent.len() as u64;
        self.addresses.insert(address.to_owned(), st);
        self.address_order.push(address.to_owned());
    }

    pub fn push_packet(&mut self, address: &str, pkt: WatermarkPacket) {
        self.register_address(address);
        let capacity = self.policy.reorder_capacity as u64;
        let st = self.addresses.get_mut(address).expect("registered");
        if st.seen_seqs.contains(&pkt.seq) {
            st.stats.packets_duplicate += 1;
            return;
        }
        if let Some(max) = st.max_seq {
            if (pkt.seq as u64) + capacity <= max as u64 {
                st.stats.packets_late += 1;
                return;
            }
        }
        st.seen_seqs.insert(pkt.seq);
        st.max_seq = Some(st.max_seq.map_or(pkt.seq, |m| m.max(pkt.seq)));
        if let Some(max) = st.max_seq {
            let floor = (max as u64).saturating_sub(2 * capacity) as u32;
            while st.seen_seqs.first().is_some_and(|&s| s < floor) {
                st.seen_seqs.pop_first();
            }
        }
        st.packets.insert(pkt.timestamp_us, pkt);
        st.stats.packets_accepted += 1;

        if self.period_us.is_none() {
            match st.first_seq_ts {
                None => st.first_seq_ts = Some((pkt.seq, pkt.timestamp_us)),
                Some((s0, t0)) => {
                    let dseq = (pkt.seq as i64 - s0 as i64).unsigned_abs();
                    let dts = (pkt.timestamp_us as i64 - t0 as i64).unsigned_abs();
                    if dseq > 0 && dts > 0 {
                        self.period_us = Some((dts + dseq / 2) / dseq);
                    }
                }
            }
        }
        self.resolve(false);
    }

    pub fn push_observation(&mut self, obs: Observation) {
        let t_us = seconds_to_us(obs.t);
        let index = self.observations;
        self.observations += 1;
        self.newest_obs_us = self.newest_obs_us.max(t_us);
        let obs = Arc::new(obs);
        for st in self.addresses.values_mut() {
            st.stats.observations += 1;
            st.pending.push_back(Pending {
                index,
                t_us,
                obs: Arc::clone(&obs),
            });
        }
        self.recent.push_back(Pending { index, t_us, obs });
        self.trim_recent();
        self.resolve(false);
    }

    fn trim_recent(&mut self) {
        // keep roughly what a late-registering sender could still match
        let horizon = match self.period_us {
            Some(p) => p * (self.policy.staleness_periods + self.policy.reorder_capacity as u64 + 2),
            None => return,
        };
        let cutoff = self.newest_obs_us.saturating_sub(horizon);
        while self.recent.front().is_some_and(|p| p.t_us < cutoff) {
            self.recent.pop_front();
        }
    }

    /// Resolves every pending observation; use at end of stream.
    pub fn flush(&mut self) {
        self.resolve(true);
    }

    /// Takes resolved samples ordered by (observation index, address
    /// registration order).
    pub fn drain(&mut self) -> Vec<AlignedSample> {
        let mut out = std::mem::take(&mut self.ready);
        out.sort_by_key(|(i, a, _)| (*i, *a));
        out.into_iter().map(|(_, _, s)| s).collect()
    }

    fn resolve(&mut self, force: bool) {
        let Some(period) = self.period_us else {
            if force {
                // no period can ever be learned: nothing aligns
                for st in self.addresses.values_mut() {
                    let n = st.pending.len() as u64;
                    st.pending.clear();
                    st.stats.dropped_no_packet += n;
                }
            }
            return;
        };
        let staleness = self.staleness_us().expect("period known");
        let capacity = self.policy.reorder_capacity;
        let order: HashMap<&String, usize> = self
            .address_order
            .iter()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        let newest_obs = self.newest_obs_us;

        for (address, st) in self.addresses.iter_mut() {
            let addr_rank = order[address];
            while let Some(front) = st.pending.front() {
                let half = period / 2;
                let eligible_cutoff = front.t_us.checked_sub(half);
                if !force {
                    if let Some(cutoff) = eligible_cutoff {
                        let newer = st.packets.range(cutoff + 1..).take(capacity).count();
                        if newer < capacity {
                            break;
                        }
                    }
                }
                let p = st.pending.pop_front().expect("front exists");
                let candidate = eligible_cutoff
                    .and_then(|c| st.packets.range(..=c).next_back().map(|(_, pkt)| *pkt));
                let Some(pkt) = candidate else {
                    st.stats.dropped_no_packet += 1;
                    continue;
                };
                if pkt.timestamp_us + staleness < p.t_us {
                    st.stats.dropped_stale += 1;
                    continue;
                }
                let vid = &p.obs.visual_id;
                if st.last_used.get(vid).is_some_and(|&s| pkt.seq <= s) {
                    st.stats.dropped_reused += 1;
                    continue;
                }
                st.last_used.insert(vid.clone(), pkt.seq);
                st.stats.aligned += 1;
                self.ready.push((
                    p.index,
                    addr_rank,
                    AlignedSample {
                        address: address.clone(),
                        visual_id: vid.clone(),
                        tick: pkt.seq as u64,
                        t: p.obs.t,
                        o_v: p.obs.v,
                        o_omega: p.obs.omega,
                        u_g_v: pkt.u_g_v,
                        u_g_omega: pkt.u_g_omega,
                        e_v: pkt.e_v,
                        e_omega: pkt.e_omega,
                    },
                ));
            }
            // packets too old for any current or future observation
            let oldest_needed = st
                .pending
                .front()
                .map_or(newest_obs, |p| p.t_us.min(newest_obs))
                .saturating_sub(staleness + period);
            // keep the newest packet before the horizon so that a stale
            // pairing is still classified as stale
            while st.packets.range(..oldest_needed).nth(1).is_some() {
                st.packets.pop_first();
            }
        }
    }
}

/// Result of aligning complete streams.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignOutput {
    pub samples: Vec<AlignedSample>,
    pub stats: BTreeMap<String, AddressStats>,
    pub period_us: Option<u64>,
}

/// Aligns complete streams. Addresses are registered in order of first
/// packet, packets are fed in the given (arrival) order, then observations.
pub fn align(observations: &[Observation], packets: &[PacketRecord], policy: AlignPolicy) -> AlignOutput {
    let mut aligner = Aligner::new(policy);
    for p in packets {
        aligner.push_packet(&p.address, p.packet);
    }
    for o in observations {
        aligner.push_observation(o.clone());
    }
    aligner.flush();
    AlignOutput {
        samples: aligner.drain(),
        stats: aligner.stats(),
        period_us: aligner.period_us(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: u64 = 50_000;

    fn packet(k: u32) -> WatermarkPacket {
        WatermarkPacket::new(k, k as u64 * DT, 1.0 + k as f64, 0.1, 0.01 * k as f64, -0.01)
    }

    fn obs(k: u64, vid: &str) -> Observation {
        Observation {
            visual_id: vid.into(),
            t: (k * DT) as f64 / 1e6,
            x: 0.0,
            y: 0.0,
            theta: 0.0,
            v: 2.0 + k as f64,
            omega: 0.2,
        }
    }

    fn interleaved(n: u32) -> (Vec<Observation>, Vec<PacketRecord>) {
        let mut o = Vec::new();
        let mut p = Vec::new();
        for k in 0..n {
            for a in ["IP_1", "IP_2"] {
                p.push(PacketRecord {
                    address: a.into(),
                    packet: packet(k),
                });
            }
            o.push(obs(k as u64 + 1, "ID_A"));
            o.push(obs(k as u64 + 1, "ID_B"));
        }
        (o, p)
    }

    #[test]
    fn interleaved_streams_align_completely() {
        let (o, p) = interleaved(50);
        let out = align(&o, &p, AlignPolicy::default());
        assert_eq!(out.period_us, Some(DT));
        assert_eq!(out.samples.len(), 200);
        for s in &out.samples {
            // packet tick precedes observation tick by exactly one
            assert_eq!(seconds_to_us(s.t), (s.tick + 1) * DT);
        }
        for st in out.stats.values() {
            assert_eq!(st.dropped(), 0);
            assert_eq!(st.aligned, 100);
        }
    }

    #[test]
    fn lost_packet_loses_exactly_one_sample() {
        let (o, mut p) = interleaved(50);
        let lost = p
            .iter()
            .position(|r| r.address == "IP_1" && r.packet.seq == 20)
            .unwrap();
        p.remove(lost);
        let out = align(&o, &p, AlignPolicy::default());
        let s1 = out.stats["IP_1"];
        let s2 = out.stats["IP_2"];
        assert_eq!(s2.aligned, 100);
        // both visual IDs lose their pairing with tick 20
        assert_eq!(s1.aligned, 98);
        let per_pair = |a: &str, v: &str| out.samples.iter().filter(|s| s.address == a && s.visual_id == v).count();
        assert_eq!(per_pair("IP_1", "ID_A"), per_pair("IP_2", "ID_A") - 1);
        for st in out.stats.values() {
            assert_eq!(st.aligned + st.dropped(), st.observations);
        }
    }

    #[test]
    fn reversed_pairs_give_same_stream() {
        let (o, p) = interleaved(40);
        let mut swapped = p.clone();
        // swap consecutive packets of the same sender: indices 2k and 2k+2
        for i in (0..swapped.len() - 2).step_by(4) {
            swapped.swap(i, i + 2);
        }
        assert_ne!(p, swapped);
        let a = align(&o, &p, AlignPolicy::default());
        let b = align(&o, &swapped, AlignPolicy::default());
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn duplicates_discarded_and_counted() {
        let (o, mut p) = interleaved(30);
        let dup = p[10].clone();
        p.insert(11, dup);
        let out = align(&o, &p, AlignPolicy::default());
        assert_eq!(out.samples.len(), 120);
        assert_eq!(out.stats.values().map(|s| s.packets_duplicate).sum::<u64>(), 1);
    }

    #[test]
    fn packets_beyond_reorder_bound_are_late() {
        let (o, mut p) = interleaved(40);
        let idx = p.iter().position(|r| r.address == "IP_1" && r.packet.seq == 5).unwrap();
        let rec = p.remove(idx);
        p.insert(idx + 2 * 12, rec); // 12 newer IP_1 packets precede it
        let out = align(&o, &p, AlignPolicy::default());
        assert_eq!(out.stats["IP_1"].packets_late, 1);
        assert_eq!(out.stats["IP_1"].aligned, 78);
    }

    #[test]
    fn stale_packets_dropped() {
        let mut p = Vec::new();
        for k in [0u32, 1, 2] {
            p.push(PacketRecord {
                address: "IP_1".into(),
                packet: packet(k),
            });
        }
        let o = vec![obs(3, "ID_A"), obs(10, "ID_A")];
        let out = align(&o, &p, AlignPolicy::default());
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.stats["IP_1"].dropped_stale, 1);
    }

    #[test]
    fn observation_before_first_packet_dropped() {
        let p = vec![
            PacketRecord { address: "IP_1".into(), packet: packet(0) },
            PacketRecord { address: "IP_1".into(), packet: packet(1) },
        ];
        let o = vec![obs(0, "ID_A"), obs(1, "ID_A"), obs(2, "ID_A")];
        let out = align(&o, &p, AlignPolicy::default());
        assert_eq!(out.samples.len(), 2);
        assert_eq!(out.stats["IP_1"].dropped_no_packet, 1);
    }

    #[test]
    fn incremental_matches_batch_and_late_registration_is_accounted() {
        let (o, p) = interleaved(60);
        let batch = align(&o, &p, AlignPolicy::default());

        // live-style interleaving: packet k arrives just before observation k+1
        let mut live = Aligner::new(AlignPolicy::default());
        let mut out = Vec::new();
        let mut oi = o.iter();
        for pair in p.chunks(2) {
            for r in pair {
                live.push_packet(&r.address, r.packet);
            }
            live.push_observation(oi.next().unwrap().clone());
            live.push_observation(oi.next().unwrap().clone());
            out.extend(live.drain());
        }
        live.flush();
        out.extend(live.drain());
        let key = |s: &AlignedSample| (s.address.clone(), s.visual_id.clone(), s.tick);
        let mut a: Vec<_> = batch.samples.iter().map(key).collect();
        let mut b: Vec<_> = out.iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);

        // an address that only starts transmitting later
        let mut late = Aligner::new(AlignPolicy { period_us: Some(DT), ..Default::default() });
        for k in 1..=30 {
            late.push_observation(obs(k, "ID_A"));
        }
        for k in 29..40u32 {
            late.push_packet("IP_9", packet(k));
        }
        late.flush();
        let st = late.stats()["IP_9"];
        assert_eq!(st.observations, 30);
        assert_eq!(st.aligned + st.dropped(), 30);
        assert_eq!(st.aligned, 1);
    }

    #[test]
    fn accounting_identity_under_random_loss() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (o, p) = interleaved(200);
        let p: Vec<_> = p.into_iter().filter(|_| rng.gen_bool(0.9)).collect();
        let out = align(&o, &p, AlignPolicy::default());
        for st in out.stats.values() {
            assert_eq!(st.observations, o.len() as u64);
            assert_eq!(st.aligned + st.dropped(), st.observations);
        }
    }
}
