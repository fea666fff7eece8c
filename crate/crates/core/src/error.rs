use thiserror::Error;

use crate::cell::CellState;
use crate::device::PhysicalAddress;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot program a cell downward from {from} to {to} without an erase")]
    DownwardProgram { from: CellState, to: CellState },
    #[error("bad length: {0}")]
    BadLength(String),
    #[error("address out of bounds: {0}")]
    OutOfBounds(String),
    #[error("non-ASCII character {0:?} in payload")]
    NonAscii(char),
    #[error("device full: no free page left")]
    DeviceFull,
    #[error("logical page {0} is not mapped")]
    Unmapped(u64),
    #[error("payload of {bits} bits does not fit a page of {capacity} bits")]
    PayloadTooLarge { bits: usize, capacity: usize },
    #[error("insufficient free space for garbage collection: {0}")]
    InsufficientFree(String),
    #[error("ddp cannot exceed ecc capability t={t} on {cells}-cell pages")]
    Unreachable { cells: usize, t: u32 },
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
    #[error("destruction verification failed on {} page(s): {}", .pages.len(), fmt_addrs(.pages))]
    VerificationFailed { pages: Vec<PhysicalAddress> },
    #[error("simulator and cost model disagree: {0}")]
    Mismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("line {line}: {message}")]
    ParseLine { line: usize, message: String },
    #[error("device file {0} is locked by another invocation")]
    Locked(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_addrs(pages: &[PhysicalAddress]) -> String {
    pages.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}
