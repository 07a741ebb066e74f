use std::collections::{BTreeMap, BTreeSet};

use crate::net::SimTime;

use super::packet::{Packet, DATA_HEADER_LEN};
use super::rate::RateControl;
use super::{Result, TransferConfig, TransferError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SenderStats {
    pub data_packets: u64,
    /// DATA bytes on the wire, headers included.
    pub data_wire_bytes: u64,
    pub retransmits: u64,
    pub naks_received: u64,
    pub acks_received: u64,
    /// Rate after every change, starting with the initial rate.
    pub rate_trace: Vec<f64>,
}

/// Sending half of a session. Emits at most one packet per pacing slot.
#[derive(Debug)]
pub struct Sender {
    session_id: u32,
    data: Vec<u8>,
    mss: usize,
    total: u32,
    next_seq: u32,
    cumulative_ack: u32,
    in_flight: BTreeMap<u32, SimTime>,
    retransmit: BTreeSet<u32>,
    /// Last retransmission time per seq; a NAK arriving within one ACK
    /// interval of it is treated as already served.
    resent_at: BTreeMap<u32, SimTime>,
    rate: RateControl,
    ack_interval: SimTime,
    window: u32,
    nak_in_interval: bool,
    fin_sent_at: Option<SimTime>,
    finished: bool,
    progress_mark: u32,
    stats: SenderStats,
}

impl Sender {
    pub fn new(session_id: u32, data: Vec<u8>, config: &TransferConfig) -> Result<Self> {
        let total = data.len().div_ceil(config.mss);
        let total = u32::try_from(total)
            .ok()
            .filter(|&t| t < u32::MAX)
            .ok_or_else(|| TransferError::InvalidConfig("stream too long".into()))?;
        let rate = config.rate_control()?;
        let stats = SenderStats {
            rate_trace: vec![rate.rate()],
            ..SenderStats::default()
        };
        Ok(Self {
            session_id,
            data,
            mss: config.mss,
            total,
            next_seq: 0,
            cumulative_ack: 0,
            in_flight: BTreeMap::new(),
            retransmit: BTreeSet::new(),
            resent_at: BTreeMap::new(),
            rate,
            ack_interval: config.ack_interval,
            window: config.window,
            nak_in_interval: false,
            fin_sent_at: None,
            finished: false,
            progress_mark: 0,
            stats,
        })
    }

    pub fn total_packets(&self) -> u32 {
        self.total
    }

    pub fn next_seq(&self) -> u32 {
        self.next_seq
    }

    pub fn cumulative_ack(&self) -> u32 {
        self.cumulative_ack
    }

    pub fn in_flight(&self) -> Vec<u32> {
        self.in_flight.keys().copied().collect()
    }

    pub fn rate(&self) -> &RateControl {
        &self.rate
    }

    pub fn stats(&self) -> &SenderStats {
        &self.stats
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn bytes_acked(&self) -> u64 {
        (self.cumulative_ack as u64 * self.mss as u64).min(self.data.len() as u64)
    }

    pub fn stream_len(&self) -> usize {
        self.data.len()
    }

    /// Gap between paced emissions at the current rate.
    pub fn pace_gap(&self) -> SimTime {
        SimTime((self.ack_interval.as_micros() as f64 / self.rate.rate()).ceil().max(1.0) as u64)
    }

    fn data_packet(&mut self, seq: u32, now: SimTime) -> Packet {
        let start = seq as usize * self.mss;
        let end = (start + self.mss).min(self.data.len());
        let payload = self.data[start..end].to_vec();
        self.in_flight.insert(seq, now);
        self.stats.data_packets += 1;
        self.stats.data_wire_bytes += (DATA_HEADER_LEN + payload.len()) as u64;
        Packet::Data {
            session_id: self.session_id,
            seq,
            payload,
        }
    }

    /// The packet for the next pacing slot, if there is anything to send.
    pub fn next_packet(&mut self, now: SimTime) -> Option<Packet> {
        if self.finished {
            return None;
        }
        while let Some(seq) = self.retransmit.pop_first() {
            if seq >= self.cumulative_ack && self.in_flight.contains_key(&seq) {
                self.stats.retransmits += 1;
                self.resent_at.insert(seq, now);
                return Some(self.data_packet(seq, now));
            }
        }
        if self.next_seq < self.total {
            if self.next_seq - self.cumulative_ack >= self.window {
                return None;
            }
            let seq = self.next_seq;
            self.next_seq += 1;
            return Some(self.data_packet(seq, now));
        }
        if self.fin_sent_at.is_none() {
            self.fin_sent_at = Some(now);
            return Some(self.fin());
        }
        None
    }

    pub fn has_work(&self) -> bool {
        !self.finished
            && (!self.retransmit.is_empty()
                || (self.next_seq < self.total && self.next_seq - self.cumulative_ack < self.window)
                || (self.next_seq == self.total && self.fin_sent_at.is_none()))
    }

    pub fn fin(&self) -> Packet {
        Packet::Fin {
            session_id: self.session_id,
            total: self.total,
        }
    }

    pub fn on_ack(&mut self, ack_seq: u32) -> Result<()> {
        if ack_seq > self.next_seq {
            return Err(TransferError::ProtocolViolation(format!(
                "ACK {ack_seq} beyond next sequence {}",
                self.next_seq
            )));
        }
        self.stats.acks_received += 1;
        if ack_seq > self.cumulative_ack {
            self.cumulative_ack = ack_seq;
            self.in_flight = self.in_flight.split_off(&ack_seq);
            self.retransmit = self.retransmit.split_off(&ack_seq);
            self.resent_at = self.resent_at.split_off(&ack_seq);
        }
        if !self.nak_in_interval {
            self.rate.on_loss_free_interval();
            self.stats.rate_trace.push(self.rate.rate());
        }
        self.nak_in_interval = false;
        Ok(())
    }

    pub fn on_nak(&mut self, ranges: &[(u32, u32)], now: SimTime) {
        self.stats.naks_received += 1;
        for &(a, b) in ranges {
            let lo = a.max(self.cumulative_ack);
            let hi = b.min(self.next_seq.saturating_sub(1));
            if lo <= hi {
                let listed: Vec<u32> = self
                    .in_flight
                    .range(lo..=hi)
                    .map(|(s, _)| *s)
                    .filter(|s| self.resent_at.get(s).is_none_or(|&t| t + self.ack_interval <= now))
                    .collect();
                self.retransmit.extend(listed);
            }
        }
        self.rate.on_nak();
        self.stats.rate_trace.push(self.rate.rate());
        self.nak_in_interval = true;
    }

    /// Receiver's FIN echo; returns whether the stream is now complete.
    pub fn on_fin_echo(&mut self, total: u32) -> bool {
        if total == self.total && self.next_seq == self.total {
            self.finished = true;
            self.cumulative_ack = self.total;
            self.in_flight.clear();
            self.retransmit.clear();
        }
        self.finished
    }

    /// Slow recovery for lost NAKs, ACKs or retransmissions: when the
    /// cumulative ACK has not moved since the previous check, requeue every
    /// packet outstanding for longer than `rto`. Returns a FIN to resend, if
    /// one is overdue.
    pub fn on_rto(&mut self, now: SimTime, rto: SimTime) -> Option<Packet> {
        if self.finished {
            return None;
        }
        let stalled = self.cumulative_ack == self.progress_mark;
        self.progress_mark = self.cumulative_ack;
        if stalled {
            let stale: Vec<u32> = self
                .in_flight
                .iter()
                .filter(|(_, &sent)| sent + rto <= now)
                .map(|(s, _)| *s)
                .collect();
            self.retransmit.extend(stale);
        }
        match self.fin_sent_at {
            Some(at) if stalled && at + rto <= now && self.retransmit.is_empty() => {
                self.fin_sent_at = Some(now);
                Some(self.fin())
            }
            _ => None,
        }
    }
}
