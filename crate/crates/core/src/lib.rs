//! Deterministic TLC NAND flash simulator with a page-mapping FTL and
//! in-place destruction of invalidated privacy pages.

pub mod cell;
pub mod cli;
pub mod codec;
pub mod cost;
pub mod device;
pub mod error;
pub mod ftl;
pub mod sanitizer;
pub mod sim;

pub use cell::{CellState, DdpParams, ProgramMode, PulseParams};
pub use codec::{BitString, ScramblerKey};
pub use cost::{CostParams, CostReport, CostScheme, Scenario};
pub use device::{Device, EccParams, Geometry, PhysicalAddress};
pub use error::{Error, Result};
pub use ftl::{Ftl, GcReport};
pub use sanitizer::{DestructionReport, SanitizeScheme};
pub use sim::{RunConfig, Simulator};
