//! Reliable, rate-controlled stream transfer over datagrams: sequencing,
//! periodic cumulative ACKs, immediate NAKs, multiplicative rate control
//! and a pre-shared-key handshake.

pub mod packet;
mod rate;
mod receiver;
mod sender;
mod stack;

use thiserror::Error;

use crate::net::{Endpoint, SimTime};

pub use packet::{Packet, DATA_HEADER_LEN};
pub use rate::{RateControl, DEFAULT_DECREASE, DEFAULT_INCREASE};
pub use receiver::{Receiver, ReceiverStats};
pub use sender::{Sender, SenderStats};
pub use stack::{SessionInfo, SessionPhase, TransferEvent, TransferStack, TransferTimer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("invalid transfer configuration: {0}")]
    InvalidConfig(String),
    #[error("authentication with {0} failed")]
    AuthFailed(Endpoint),
    #[error("could not reach {endpoint} after {attempts} handshake attempts")]
    ConnectFailed { endpoint: Endpoint, attempts: u32 },
    #[error("transfer aborted after {bytes_acked} bytes acknowledged: {reason}")]
    Aborted { bytes_acked: u64, reason: String },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("unknown session {0}")]
    UnknownSession(u32),
    #[error("malformed packet: {0}")]
    Wire(String),
}

pub type Result<T> = std::result::Result<T, TransferError>;

pub const DEFAULT_MSS: usize = 1400;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    /// Largest DATA payload.
    pub mss: usize,
    pub ack_interval: SimTime,
    /// Packets per ACK interval.
    pub initial_rate: f64,
    pub rate_floor: f64,
    pub rate_ceiling: f64,
    pub increase_factor: f64,
    pub decrease_factor: f64,
    /// Most unacknowledged packets in flight.
    pub window: u32,
    pub handshake_timeout: SimTime,
    pub handshake_retries: u32,
    /// Retransmit timer period in ACK intervals.
    pub rto_multiplier: u32,
    pub dead_timeout: SimTime,
    pub seed: u64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            mss: DEFAULT_MSS,
            ack_interval: SimTime::from_millis(10),
            initial_rate: 16.0,
            rate_floor: 1.0,
            rate_ceiling: 4096.0,
            increase_factor: DEFAULT_INCREASE,
            decrease_factor: DEFAULT_DECREASE,
            window: 1024,
            handshake_timeout: SimTime::from_millis(50),
            handshake_retries: 8,
            rto_multiplier: 4,
            dead_timeout: SimTime::from_secs(5),
            seed: 0,
        }
    }
}

impl TransferConfig {
    pub fn rate_control(&self) -> Result<RateControl> {
        RateControl::new(
            self.initial_rate,
            self.increase_factor,
            self.decrease_factor,
            self.rate_floor,
            self.rate_ceiling,
        )
    }

    pub fn rto(&self) -> SimTime {
        SimTime(self.ack_interval.as_micros() * u64::from(self.rto_multiplier))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TransferError::InvalidConfig(m.to_string()));
        if self.mss == 0 || self.mss > u16::MAX as usize - DATA_HEADER_LEN {
            return bad("MSS must lie in 1..=65524");
        }
        if self.ack_interval == SimTime::ZERO {
            return bad("ACK interval must be positive");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.handshake_timeout == SimTime::ZERO {
            return bad("handshake timeout must be positive");
        }
        if self.rto_multiplier == 0 {
            return bad("retransmit multiplier must be at least 1");
        }
        if self.dead_timeout <= self.rto() {
            return bad("dead timeout must exceed the retransmit period");
        }
        self.rate_control().map(|_| ())
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TransferConfig::default().validate().unwrap();
        assert_eq!(TransferConfig::default().rto(), SimTime::from_millis(40));
        let bad = TransferConfig { mss: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TransferConfig { rate_floor: 20.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
