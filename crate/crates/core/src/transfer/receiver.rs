use std::collections::BTreeMap;

use super::packet::{to_ranges, Packet};

/// Longest loss list carried by one NAK.
const MAX_NAK_RANGES: usize = 512;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReceiverStats {
    pub data_packets: u64,
    pub duplicates: u64,
    pub naks_sent: u64,
    pub acks_sent: u64,
}

/// Receiving half of a session: reorders DATA into the output stream and
/// reports gaps immediately.
#[derive(Debug)]
pub struct Receiver {
    session_id: u32,
    expected: u32,
    highest_seen: Option<u32>,
    pending: BTreeMap<u32, Vec<u8>>,
    output: Vec<u8>,
    total: Option<u32>,
    stats: ReceiverStats,
}

impl Receiver {
    pub fn new(session_id: u32) -> Self {
        Self {
            session_id,
            expected: 0,
            highest_seen: None,
            pending: BTreeMap::new(),
            output: Vec::new(),
            total: None,
            stats: ReceiverStats::default(),
        }
    }

    /// All packets below this seq have been received.
    pub fn cumulative_ack(&self) -> u32 {
        self.expected
    }

    pub fn output(&self) -> &[u8] {
        &self.output
    }

    pub fn take_output(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.output)
    }

    pub fn stats(&self) -> &ReceiverStats {
        &self.stats
    }

    pub fn is_complete(&self) -> bool {
        self.total == Some(self.expected)
    }

    fn nak(&mut self, ranges: Vec<(u32, u32)>) -> Option<Packet> {
        if ranges.is_empty() {
            return None;
        }
        self.stats.naks_sent += 1;
        Some(Packet::Nak {
            session_id: self.session_id,
            ranges,
        })
    }

    /// Handles one DATA packet; a gap yields a NAK for exactly the newly
    /// revealed missing range.
    pub fn on_data(&mut self, seq: u32, payload: Vec<u8>) -> Option<Packet> {
        if seq < self.expected || self.pending.contains_key(&seq) || self.total.is_some_and(|t| seq >= t) {
            self.stats.duplicates += 1;
            return None;
        }
        self.stats.data_packets += 1;
        let gap_start = self.highest_seen.map_or(0, |h| h + 1);
        let nak = if seq > gap_start {
            self.nak(vec![(gap_start, seq - 1)])
        } else {
            None
        };
        self.highest_seen = Some(self.highest_seen.map_or(seq, |h| h.max(seq)));
        self.pending.insert(seq, payload);
        while let Some(chunk) = self.pending.remove(&self.expected) {
            self.output.extend_from_slice(&chunk);
            self.expected += 1;
        }
        nak
    }

    pub fn ack(&mut self) -> Packet {
        self.stats.acks_sent += 1;
        Packet::Ack {
            session_id: self.session_id,
            ack_seq: self.expected,
        }
    }

    /// Missing seqs below `upto`, as NAK ranges.
    fn missing_below(&self, upto: u32) -> Vec<(u32, u32)> {
        let mut ranges = to_ranges((self.expected..upto).filter(|s| !self.pending.contains_key(s)));
        ranges.truncate(MAX_NAK_RANGES);
        ranges
    }

    /// Handles the sender's FIN: echoes it once complete, otherwise NAKs
    /// everything still missing.
    pub fn on_fin(&mut self, total: u32) -> Option<Packet> {
        if self.total.is_none() {
            if total < self.expected {
                return None;
            }
            self.total = Some(total);
            self.pending.retain(|&s, _| s < total);
            if total > 0 {
                self.highest_seen = Some(self.highest_seen.map_or(total - 1, |h| h.max(total - 1)));
            }
        }
        if self.is_complete() {
            return Some(Packet::Fin {
                session_id: self.session_id,
                total: self.expected,
            });
        }
        let missing = self.missing_below(self.total.unwrap_or(total));
        self.nak(missing)
    }

    /// The FIN echo once the stream is complete.
    pub fn completion(&self) -> Option<Packet> {
        self.is_complete().then_some(Packet::Fin {
            session_id: self.session_id,
            total: self.expected,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn in_order_packets_produce_no_nak() {
        let mut r = Receiver::new(1);
        for s in 0..5 {
            assert!(r.on_data(s, vec![s as u8]).is_none());
        }
        assert_eq!(r.output(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn gap_yields_immediate_nak() {
        let mut r = Receiver::new(1);
        for s in 0..5 {
            r.on_data(s, vec![]);
        }
        assert_eq!(r.on_data(8, vec![]), Some(Packet::Nak { session_id: 1, ranges: vec![(5, 7)] }));
        assert_eq!(r.on_data(10, vec![]), Some(Packet::Nak { session_id: 1, ranges: vec![(9, 9)] }));
        assert_eq!(r.on_data(6, vec![]), None);
    }

    #[test]
    fn duplicates_change_nothing() {
        let mut r = Receiver::new(1);
        r.on_data(0, vec![1]);
        r.on_data(2, vec![3]);
        let before = (r.cumulative_ack(), r.output().to_vec(), r.stats().naks_sent);
        assert_eq!(r.on_data(0, vec![9]), None);
        assert_eq!(r.on_data(2, vec![9]), None);
        assert_eq!((r.cumulative_ack(), r.output().to_vec(), r.stats().naks_sent), before);
        assert_eq!(r.stats().duplicates, 2);
    }

    #[test]
    fn cumulative_ack_stops_at_first_gap() {
        let mut r = Receiver::new(1);
        assert_eq!(r.ack(), Packet::Ack { session_id: 1, ack_seq: 0 });
        for s in [0, 1, 2, 5] {
            r.on_data(s, vec![]);
        }
        assert_eq!(r.ack(), Packet::Ack { session_id: 1, ack_seq: 3 });
        r.on_data(3, vec![]);
        r.on_data(4, vec![]);
        assert_eq!(r.ack(), Packet::Ack { session_id: 1, ack_seq: 6 });
    }

    #[test]
    fn fin_naks_missing_tail_then_completes() {
        let mut r = Receiver::new(1);
        r.on_data(0, b"ab".to_vec());
        assert_eq!(r.on_fin(4), Some(Packet::Nak { session_id: 1, ranges: vec![(1, 3)] }));
        r.on_data(2, b"ef".to_vec());
        r.on_data(1, b"cd".to_vec());
        assert!(!r.is_complete());
        r.on_data(3, b"gh".to_vec());
        assert!(r.is_complete());
        assert_eq!(r.on_fin(4), Some(Packet::Fin { session_id: 1, total: 4 }));
        assert_eq!(r.output(), b"abcdefgh");
    }

    #[test]
    fn empty_stream_completes_on_fin() {
        let mut r = Receiver::new(3);
        assert_eq!(r.on_fin(0), Some(Packet::Fin { session_id: 3, total: 0 }));
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn any_arrival_order_reassembles(order in Just((0u32..40).collect::<Vec<_>>()).prop_shuffle()) {
            let mut r = Receiver::new(1);
            let mut last_len = 0;
            for &s in &order {
                r.on_data(s, s.to_le_bytes().to_vec());
                prop_assert!(r.output().len() >= last_len);
                last_len = r.output().len();
            }
            for &s in &order {
                r.on_data(s, vec![0xff]);
            }
            let expected: Vec<u8> = (0u32..40).flat_map(|s| s.to_le_bytes()).collect();
            prop_assert_eq!(r.output(), &expected[..]);
        }
    }
}
