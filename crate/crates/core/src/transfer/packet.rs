//! `u8 kind, u32 session_id`, then kind-specific fields, little-endian.

use crate::net::Reader;

use super::{Result, TransferError};

pub const DATA: u8 = 1;
pub const ACK: u8 = 2;
pub const NAK: u8 = 3;
pub const HANDSHAKE: u8 = 4;
pub const HANDSHAKE_ACK: u8 = 5;
pub const FIN: u8 = 6;

/// Bytes a DATA packet adds on top of its payload.
pub const DATA_HEADER_LEN: usize = 11;
pub const MAC_LEN: usize = 16;
/// FIN total that tears a session down instead of closing it.
pub const FIN_RESET: u32 = u32::MAX;

pub const STATUS_OK: u8 = 0;
pub const STATUS_AUTH_REFUSED: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Data { session_id: u32, seq: u32, payload: Vec<u8> },
    Ack { session_id: u32, ack_seq: u32 },
    /// Inclusive `(start, end)` ranges, sorted and non-empty.
    Nak { session_id: u32, ranges: Vec<(u32, u32)> },
    Handshake { session_id: u32, nonce: u32, mac: [u8; MAC_LEN] },
    HandshakeAck { session_id: u32, nonce: u32, status: u8, mac: [u8; MAC_LEN] },
    Fin { session_id: u32, total: u32 },
}

impl Packet {
    pub fn session_id(&self) -> u32 {
        match self {
            Packet::Data { session_id, .. }
            | Packet::Ack { session_id, .. }
            | Packet::Nak { session_id, .. }
            | Packet::Handshake { session_id, .. }
            | Packet::HandshakeAck { session_id, .. }
            | Packet::Fin { session_id, .. } => *session_id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Packet::Data { .. } => "DATA",
            Packet::Ack { .. } => "ACK",
            Packet::Nak { .. } => "NAK",
            Packet::Handshake { .. } => "HANDSHAKE",
            Packet::HandshakeAck { .. } => "HANDSHAKE_ACK",
            Packet::Fin { .. } => "FIN",
        }
    }

    fn code(&self) -> u8 {
        match self {
            Packet::Data { .. } => DATA,
            Packet::Ack { .. } => ACK,
            Packet::Nak { .. } => NAK,
            Packet::Handshake { .. } => HANDSHAKE,
            Packet::HandshakeAck { .. } => HANDSHAKE_ACK,
            Packet::Fin { .. } => FIN,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.code()];
        out.extend_from_slice(&self.session_id().to_le_bytes());
        match self {
            Packet::Data { seq, payload, .. } => {
                out.extend_from_slice(&seq.to_le_bytes());
                out.extend_from_slice(&(payload.len() as u16).to_le_bytes());
                out.extend_from_slice(payload);
            }
            Packet::Ack { ack_seq, .. } => out.extend_from_slice(&ack_seq.to_le_bytes()),
            Packet::Nak { ranges, .. } => {
                out.extend_from_slice(&(ranges.len() as u16).to_le_bytes());
                for (a, b) in ranges {
                    out.extend_from_slice(&a.to_le_bytes());
                    out.extend_from_slice(&b.to_le_bytes());
                }
            }
            Packet::Handshake { nonce, mac, .. } => {
                out.extend_from_slice(&nonce.to_le_bytes());
                out.extend_from_slice(mac);
            }
            Packet::HandshakeAck { nonce, status, mac, .. } => {
                out.extend_from_slice(&nonce.to_le_bytes());
                out.push(*status);
                out.extend_from_slice(mac);
            }
            Packet::Fin { total, .. } => out.extend_from_slice(&total.to_le_bytes()),
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let short = || TransferError::Wire("truncated packet".into());
        let mut r = Reader::new(buf);
        let code = r.u8().ok_or_else(short)?;
        let session_id = r.u32().ok_or_else(short)?;
        let mac = |r: &mut Reader<'_>| -> Option<[u8; MAC_LEN]> { r.bytes(MAC_LEN)?.try_into().ok() };
        let pkt = match code {
            DATA => {
                let seq = r.u32().ok_or_else(short)?;
                let len = r.u16().ok_or_else(short)? as usize;
                let payload = r.bytes(len).ok_or_else(short)?.to_vec();
                Packet::Data {
                    session_id,
                    seq,
                    payload,
                }
            }
            ACK => Packet::Ack {
                session_id,
                ack_seq: r.u32().ok_or_else(short)?,
            },
            NAK => {
                let n = r.u16().ok_or_else(short)?;
                let ranges = (0..n)
                    .map(|_| Some((r.u32()?, r.u32()?)))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(short)?;
                let sorted = ranges.iter().all(|(a, b)| a <= b)
                    && ranges.windows(2).all(|w| w[0].1 < w[1].0);
                if ranges.is_empty() || !sorted {
                    return Err(TransferError::Wire("NAK loss list must be non-empty and sorted".into()));
                }
                Packet::Nak { session_id, ranges }
            }
            HANDSHAKE => Packet::Handshake {
                session_id,
                nonce: r.u32().ok_or_else(short)?,
                mac: mac(&mut r).ok_or_else(short)?,
            },
            HANDSHAKE_ACK => Packet::HandshakeAck {
                session_id,
                nonce: r.u32().ok_or_else(short)?,
                status: r.u8().ok_or_else(short)?,
                mac: mac(&mut r).ok_or_else(short)?,
            },
            FIN => Packet::Fin {
                session_id,
                total: r.u32().ok_or_else(short)?,
            },
            other => return Err(TransferError::Wire(format!("unknown packet kind {other}"))),
        };
        if r.remaining() != 0 {
            return Err(TransferError::Wire("trailing bytes".into()));
        }
        Ok(pkt)
    }
}

/// Collapses a sorted sequence of numbers into inclusive ranges.
pub fn to_ranges(seqs: impl IntoIterator<Item = u32>) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = Vec::new();
    for s in seqs {
        match out.last_mut() {
            Some((_, end)) if *end + 1 == s => *end = s,
            _ => out.push((s, s)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<Packet> {
        vec![
            Packet::Data { session_id: 7, seq: 3, payload: vec![1, 2, 3] },
            Packet::Data { session_id: 7, seq: 4, payload: vec![] },
            Packet::Ack { session_id: 7, ack_seq: 9 },
            Packet::Nak { session_id: 7, ranges: vec![(5, 7), (9, 9)] },
            Packet::Handshake { session_id: 7, nonce: 11, mac: [4; MAC_LEN] },
            Packet::HandshakeAck { session_id: 7, nonce: 11, status: STATUS_AUTH_REFUSED, mac: [0; MAC_LEN] },
            Packet::Fin { session_id: 7, total: 8 },
        ]
    }

    #[test]
    fn round_trips() {
        for p in samples() {
            assert_eq!(Packet::decode(&p.encode()).unwrap(), p);
        }
    }

    #[test]
    fn data_layout() {
        let bytes = Packet::Data { session_id: 1, seq: 2, payload: vec![0xaa] }.encode();
        assert_eq!(bytes, vec![DATA, 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0xaa]);
        assert_eq!(bytes.len(), DATA_HEADER_LEN + 1);
    }

    #[test]
    fn rejects_truncation_and_bad_naks() {
        for p in samples() {
            let b = p.encode();
            for cut in 0..b.len() {
                assert!(Packet::decode(&b[..cut]).is_err());
            }
        }
        let empty = Packet::Nak { session_id: 1, ranges: vec![] }.encode();
        assert!(Packet::decode(&empty).is_err());
        let unsorted = Packet::Nak { session_id: 1, ranges: vec![(5, 6), (2, 3)] }.encode();
        assert!(Packet::decode(&unsorted).is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(to_ranges([5, 6, 7, 9, 11, 12]), vec![(5, 7), (9, 9), (11, 12)]);
        assert!(to_ranges([]).is_empty());
    }
}
