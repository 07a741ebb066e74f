use super::{Result, TransferError};

/// Multiplicative-increase, multiplicative-decrease sending rate in packets
/// per ACK interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RateControl {
    rate: f64,
    increase_factor: f64,
    decrease_factor: f64,
    floor: f64,
    ceiling: f64,
}

pub const DEFAULT_INCREASE: f64 = 1.125;
pub const DEFAULT_DECREASE: f64 = 0.875;

impl RateControl {
    pub fn new(initial: f64, increase_factor: f64, decrease_factor: f64, floor: f64, ceiling: f64) -> Result<Self> {
        let bad = |m: String| Err(TransferError::InvalidConfig(m));
        if !(floor > 0.0 && floor <= ceiling && ceiling.is_finite()) {
            return bad(format!("rate bounds [{floor}, {ceiling}] are invalid"));
        }
        if !(floor..=ceiling).contains(&initial) {
            return bad(format!("initial rate {initial} outside [{floor}, {ceiling}]"));
        }
        if !(increase_factor > 1.0 && increase_factor.is_finite()) {
            return bad(format!("increase factor {increase_factor} must exceed 1"));
        }
        if !(decrease_factor > 0.0 && decrease_factor < 1.0) {
            return bad(format!("decrease factor {decrease_factor} must lie in (0, 1)"));
        }
        Ok(Self {
            rate: initial,
            increase_factor,
            decrease_factor,
            floor,
            ceiling,
        })
    }

    pub fn with_defaults(initial: f64, floor: f64, ceiling: f64) -> Result<Self> {
        Self::new(initial, DEFAULT_INCREASE, DEFAULT_DECREASE, floor, ceiling)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Whole packets the sender may emit per interval.
    pub fn packets_per_interval(&self) -> u32 {
        self.rate.floor() as u32
    }

    pub fn on_loss_free_interval(&mut self) {
        self.rate = (self.rate * self.increase_factor).min(self.ceiling);
    }

    pub fn on_nak(&mut self) {
        self.rate = (self.rate * self.decrease_factor).max(self.floor);
    }
}
