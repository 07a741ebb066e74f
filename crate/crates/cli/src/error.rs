use std::path::Path;

use mmgp_core::codec::CodecError;
use mmgp_core::grid::GridError;
use mmgp_core::metrics::MetricsError;
use mmgp_core::overlay::OverlayError;
use mmgp_core::transfer::TransferError;
use mmgp_core::udp::UdpError;
use thiserror::Error;

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Exit {
    Ok = 0,
    Usage = 1,
    /// Unreadable input, invalid configuration or bind failure.
    Input = 2,
    /// Corrupt or unsupported bitstream.
    Corrupt = 3,
    /// Service not found or discovery timed out.
    Discovery = 4,
    /// Connection failed, transfer aborted or timed out.
    Transfer = 5,
    /// Handshake credentials rejected.
    Auth = 6,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Udp(#[from] UdpError),
    #[error("timed out waiting for {0}")]
    Timeout(String),
}

impl CliError {
    pub fn read(path: &Path, source: std::io::Error) -> Self {
        Self::Read {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn write(path: &Path, source: std::io::Error) -> Self {
        Self::Write {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit(&self) -> Exit {
        match self {
            Self::Usage(_) => Exit::Usage,
            Self::Config(_) | Self::Read { .. } | Self::Write { .. } | Self::Udp(_) | Self::Metrics(_) => {
                Exit::Input
            }
            Self::Codec(e) => codec_exit(e),
            Self::Grid(e) => grid_exit(e),
            Self::Timeout(_) => Exit::Discovery,
        }
    }
}

fn codec_exit(e: &CodecError) -> Exit {
    match e {
        CodecError::InvalidInput(_) | CodecError::Io(_) => Exit::Input,
        CodecError::CorruptData(_) | CodecError::UnsupportedFormat(_) => Exit::Corrupt,
    }
}

fn grid_exit(e: &GridError) -> Exit {
    match e {
        GridError::Overlay(o) => match o {
            OverlayError::InvalidInput(_) | OverlayError::AlreadyExists(_) => Exit::Input,
            OverlayError::ConnectFailed { .. } | OverlayError::Wire(_) => Exit::Transfer,
            _ => Exit::Discovery,
        },
        GridError::Transfer(t) => transfer_exit(t),
        GridError::Codec(c) => codec_exit(c),
        GridError::Sim(_) | GridError::UnknownNode(_) => Exit::Input,
        GridError::NotServed(_) => Exit::Discovery,
        GridError::Timeout(_) => Exit::Transfer,
    }
}

pub fn transfer_exit(e: &TransferError) -> Exit {
    match e {
        TransferError::AuthFailed(_) => Exit::Auth,
        TransferError::InvalidConfig(_) => Exit::Input,
        _ => Exit::Transfer,
    }
}
