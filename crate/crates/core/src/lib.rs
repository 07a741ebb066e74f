//! Multimedia grid stack: the dWave wavelet video codec, a super-node
//! discovery overlay, a UDT-style reliable UDP transfer engine and a
//! deterministic network simulator to exercise them.

pub mod codec;
pub mod corpus;
pub mod grid;
pub mod metrics;
pub mod net;
pub mod simnet;
pub mod overlay;
pub mod transfer;
pub mod udp;
