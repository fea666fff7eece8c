//! Per-cell model of a triple-level cell.
//!
//! A cell holds one of eight threshold-voltage states, `E < P1 < ... < P7`.
//! Thresholds are ordinal here: programming can only move a cell upward and
//! only an erase brings it back to `E`. Each state carries a 3-bit code
//! (MSB, CSB, LSB) following a Gray sequence, so adjacent states differ in
//! exactly one bit.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold-voltage state of one TLC cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
#[repr(u8)]
pub enum CellState {
    E = 0,
    P1 = 1,
    P2 = 2,
    P3 = 3,
    P4 = 4,
    P5 = 5,
    P6 = 6,
    P7 = 7,
}

/// Codes indexed by ordinal, packed as `MSB << 2 | CSB << 1 | LSB`.
const CODES: [u8; 8] = [0b111, 0b011, 0b001, 0b000, 0b010, 0b110, 0b100, 0b101];

impl CellState {
    pub const ALL: [CellState; 8] = [
        CellState::E,
        CellState::P1,
        CellState::P2,
        CellState::P3,
        CellState::P4,
        CellState::P5,
        CellState::P6,
        CellState::P7,
    ];

    pub const TOP: CellState = CellState::P7;

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(ordinal: u8) -> Option<CellState> {
        Self::ALL.get(ordinal as usize).copied()
    }

    /// Packed 3-bit code, MSB in bit 2.
    pub fn code(self) -> u8 {
        CODES[self as usize]
    }

    pub fn from_code(code: u8) -> CellState {
        let code = code & 0b111;
        // CODES is a permutation of 0..8, so the search always hits.
        let ordinal = CODES.iter().position(|&c| c == code).unwrap_or(0);
        Self::ALL[ordinal]
    }

    /// The state one step higher, saturating at `P7`.
    pub fn step_up(self) -> CellState {
        Self::from_ordinal(self.ordinal().saturating_add(1).min(7)).unwrap_or(CellState::P7)
    }

    pub fn name(self) -> &'static str {
        match self {
            CellState::E => "E",
            CellState::P1 => "P1",
            CellState::P2 => "P2",
            CellState::P3 => "P3",
            CellState::P4 => "P4",
            CellState::P5 => "P5",
            CellState::P6 => "P6",
            CellState::P7 => "P7",
        }
    }
}

impl fmt::Display for CellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|st| st.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown cell state {s:?}")))
    }
}

impl From<CellState> for String {
    fn from(s: CellState) -> String {
        s.name().to_string()
    }
}

impl TryFrom<String> for CellState {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        // Dumps spell states exactly; no case folding on load.
        CellState::ALL
            .iter()
            .copied()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown cell state {s:?}")))
    }
}

/// Three code bits in (MSB, CSB, LSB) order, each 0 or 1.
pub type Bits3 = [u8; 3];

pub fn state_to_bits(state: CellState) -> Bits3 {
    let c = state.code();
    [(c >> 2) & 1, (c >> 1) & 1, c & 1]
}

pub fn bits_to_state(bits: Bits3) -> CellState {
    CellState::from_code(((bits[0] & 1) << 2) | ((bits[1] & 1) << 1) | (bits[2] & 1))
}

/// Number of differing code bits between two states.
pub fn code_distance(a: CellState, b: CellState) -> u32 {
    (a.code() ^ b.code()).count_ones()
}

/// Every state reachable from `state` by programming, in ascending order.
pub fn overwritable_states(state: CellState) -> Vec<CellState> {
    CellState::ALL[state as usize + 1..].to_vec()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramMode {
    Normal,
    PartialOverwrite,
}

/// Dimensionless ISPP parameters.
///
/// Levels are only used to order pulses against each other; the pulse count
/// model is one program pulse per ordinal step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseParams {
    pub pgm_start: f64,
    pub po_start: f64,
    pub step: f64,
    pub verify_per_pulse_normal: u32,
    pub verify_per_target_po: u32,
    pub v_pass: f64,
}

impl Default for PulseParams {
    fn default() -> Self {
        PulseParams {
            pgm_start: 1.0,
            po_start: 2.0,
            step: 0.5,
            verify_per_pulse_normal: 1,
            verify_per_target_po: 1,
            v_pass: 1.5,
        }
    }
}

impl PulseParams {
    pub fn validate(&self) -> Result<()> {
        let positive =
            [self.pgm_start, self.po_start, self.step, self.v_pass].iter().all(|v| v.is_finite() && *v > 0.0);
        if !positive || self.verify_per_pulse_normal == 0 || self.verify_per_target_po == 0 {
            return Err(Error::InvalidConfig("pulse parameters must all be > 0".into()));
        }
        if self.po_start <= self.pgm_start {
            return Err(Error::InvalidConfig("po_start must exceed pgm_start".into()));
        }
        if self.v_pass >= self.po_start {
            return Err(Error::InvalidConfig("v_pass must be below po_start".into()));
        }
        Ok(())
    }
}

/// Deletion duty pulse parameters: `k` unverified pulses, each advancing a
/// cell by one state with probability `p_adv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdpParams {
    pub p_adv: f64,
    pub k: u32,
}

impl Default for DdpParams {
    fn default() -> Self {
        DdpParams { p_adv: 0.5, k: 3 }
    }
}

impl DdpParams {
    pub fn new(p_adv: f64, k: u32) -> Result<Self> {
        let p = DdpParams { p_adv, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_adv > 0.0 && self.p_adv <= 1.0) {
            return Err(Error::InvalidConfig(format!("ddp advance probability must be in (0, 1], got {}", self.p_adv)));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("ddp pulse count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Pulse accounting for one or more program operations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseStats {
    pub program_pulses: u64,
    pub verify_pulses: u64,
}

impl std::ops::AddAssign for PulseStats {
    fn add_assign(&mut self, rhs: Self) {
        self.program_pulses += rhs.program_pulses;
        self.verify_pulses += rhs.verify_pulses;
    }
}

/// Raise `cell` to `target` with the unit-step ISPP model.
pub fn program_cell(
    cell: CellState,
    target: CellState,
    mode: ProgramMode,
    params: &PulseParams,
) -> Result<(CellState, PulseStats)> {
    if target < cell {
        return Err(Error::DownwardProgram { from: cell, to: target });
    }
    let steps = u64::from(target.ordinal() - cell.ordinal());
    let verify_pulses = match mode {
        ProgramMode::Normal => steps * u64::from(params.verify_per_pulse_normal),
        // A partial overwrite verifies only once the target is reached, and
        // never more often than a normal program would for the same move.
        ProgramMode::PartialOverwrite if steps == 0 => 0,
        ProgramMode::PartialOverwrite => {
            u64::from(params.verify_per_target_po).min(steps * u64::from(params.verify_per_pulse_normal))
        }
    };
    Ok((target, PulseStats { program_pulses: steps, verify_pulses }))
}

/// Apply `ddp.k` unverified pulses to one cell.
pub fn ddp_cell<R: Rng + ?Sized>(cell: CellState, ddp: &DdpParams, rng: &mut R) -> CellState {
    let mut state = cell;
    for _ in 0..ddp.k {
        if state == CellState::P7 {
            break;
        }
        if rng.random_bool(ddp.p_adv) {
            state = state.step_up();
        }
    }
    state
}
