//! Payload modulation: ASCII text to bits, data scrambling, and the mapping
//! between bit triples and cell states.
//!
//! Two scramblers are available. `XorKeystream` XORs the data with a ChaCha8
//! keystream seeded per physical page, which is invertible and balances ones
//! and zeros. `Shift2` is a left shift by two bits with zero fill; it only
//! round-trips when the two leading bits of the input are zero and exists to
//! reproduce the worked `661004` example.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{bits_to_state, state_to_bits, CellState};
use crate::device::PhysicalAddress;
use crate::error::{Error, Result};

/// An ordered sequence of bits, each stored as 0 or 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    /// Builds from any iterator of bits; nonzero values count as 1.
    pub fn from_bits<I: IntoIterator<Item = u8>>(bits: I) -> Self {
        BitString(bits.into_iter().map(|b| u8::from(b != 0)).collect())
    }

    pub fn zeros(len: usize) -> Self {
        BitString(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn push(&mut self, bit: u8) {
        self.0.push(u8::from(bit != 0));
    }

    pub fn truncate(&mut self, len: usize) {
        self.0.truncate(len);
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|b| **b == 1).count()
    }

    /// Hamming distance; lengths must match.
    pub fn distance(&self, other: &BitString) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::BadLength(format!("cannot compare {} bits with {} bits", self.len(), other.len())));
        }
        Ok(self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count())
    }

    /// Offsets (multiples of `align`) at which `needle` occurs.
    pub fn find_aligned(&self, needle: &BitString, align: usize) -> Vec<usize> {
        let align = align.max(1);
        if needle.is_empty() || needle.len() > self.len() {
            return Vec::new();
        }
        (0..=self.len() - needle.len())
            .step_by(align)
            .filter(|&off| self.0[off..off + needle.len()] == needle.0[..])
            .collect()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!("invalid bit {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(BitString)
    }
}

/// Scrambler selection. Page-specific keys come from [`ScramblerKey::for_page`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScramblerKey {
    Shift2,
    XorKeystream { seed: u64 },
}

impl Default for ScramblerKey {
    fn default() -> Self {
        ScramblerKey::XorKeystream { seed: 0 }
    }
}

impl ScramblerKey {
    /// Derives the key used for one physical page.
    pub fn for_page(self, addr: PhysicalAddress) -> ScramblerKey {
        match self {
            ScramblerKey::Shift2 => ScramblerKey::Shift2,
            ScramblerKey::XorKeystream { seed } => {
                let page_id = (u64::from(addr.block) << 32) | u64::from(addr.page);
                ScramblerKey::XorKeystream { seed: splitmix64(seed ^ splitmix64(page_id)) }
            }
        }
    }

    /// Whether `descramble` exactly inverts `scramble` for every input.
    pub fn is_invertible(self) -> bool {
        matches!(self, ScramblerKey::XorKeystream { .. })
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn keystream(seed: u64, len: usize) -> impl Iterator<Item = u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut word = 0u64;
    (0..len).map(move |i| {
        if i % 64 == 0 {
            word = rng.next_u64();
        }
        ((word >> (63 - i % 64)) & 1) as u8
    })
}

/// 8-bit ASCII codes, most significant bit first.
pub fn text_to_bits(text: &str) -> Result<BitString> {
    let mut out = BitString(Vec::with_capacity(text.len() * 8));
    for ch in text.chars() {
        if !ch.is_ascii() {
            return Err(Error::NonAscii(ch));
        }
        let byte = ch as u8;
        out.0.extend((0..8).rev().map(|i| (byte >> i) & 1));
    }
    Ok(out)
}

pub fn bits_to_bytes(bits: &BitString) -> Result<Vec<u8>> {
    if !bits.len().is_multiple_of(8) {
        return Err(Error::BadLength(format!("{} bits is not a whole number of bytes", bits.len())));
    }
    Ok(bits.0.chunks(8).map(|c| c.iter().fold(0u8, |acc, b| (acc << 1) | b)).collect())
}

/// Inverse of [`text_to_bits`]. Bytes outside printable ASCII come out as
/// `\xNN` escapes.
pub fn bits_to_text(bits: &BitString) -> Result<String> {
    let bytes = bits_to_bytes(bits)?;
    let mut out = String::with_capacity(bytes.len());
    for b in bytes {
        if (0x20..0x7f).contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("\\x{b:02x}"));
        }
    }
    Ok(out)
}

pub fn scramble(bits: &BitString, key: ScramblerKey) -> BitString {
    match key {
        ScramblerKey::Shift2 => {
            let mut v: Vec<u8> = bits.0.iter().skip(2).copied().collect();
            v.resize(bits.len(), 0);
            BitString(v)
        }
        ScramblerKey::XorKeystream { seed } => {
            BitString(bits.0.iter().zip(keystream(seed, bits.len())).map(|(b, k)| b ^ k).collect())
        }
    }
}

/// Inverse scrambler. For `Shift2` this is a right shift with zero fill and
/// loses the two leading bits of the original; see [`ScramblerKey::is_invertible`].
pub fn descramble(bits: &BitString, key: ScramblerKey) -> BitString {
    match key {
        ScramblerKey::Shift2 => {
            let n = bits.len();
            let v = std::iter::repeat_n(0u8, n.min(2)).chain(bits.0.iter().take(n.saturating_sub(2)).copied());
            BitString(v.collect())
        }
        ScramblerKey::XorKeystream { .. } => scramble(bits, key),
    }
}

pub fn bits_to_states(bits: &BitString) -> Result<Vec<CellState>> {
    if !bits.len().is_multiple_of(3) {
        return Err(Error::BadLength(format!("{} bits is not a multiple of 3", bits.len())));
    }
    Ok(bits.0.chunks(3).map(|c| bits_to_state([c[0], c[1], c[2]])).collect())
}

pub fn states_to_bits(states: &[CellState]) -> BitString {
    BitString(states.iter().flat_map(|s| state_to_bits(*s)).collect())
}

/// Number of cells needed to hold `bits` payload bits.
pub fn cells_for_bits(bits: usize) -> usize {
    bits.div_ceil(3)
}

/// Zero-pads `bits` to a whole number of cells, scrambles and maps to states.
pub fn encode_bits(bits: &BitString, key: ScramblerKey) -> Vec<CellState> {
    let mut padded = bits.clone();
    padded.0.resize(cells_for_bits(bits.len()) * 3, 0);
    // Padded length is a multiple of 3 by construction.
    bits_to_states(&scramble(&padded, key)).unwrap_or_default()
}

/// Recovers `len` payload bits from the leading cells of `states`.
pub fn decode_bits(states: &[CellState], key: ScramblerKey, len: usize) -> Result<BitString> {
    let cells = cells_for_bits(len);
    if states.len() < cells {
        return Err(Error::BadLength(format!("{len} bits need {cells} cells, got {}", states.len())));
    }
    let mut bits = descramble(&states_to_bits(&states[..cells]), key);
    bits.truncate(len);
    Ok(bits)
}

pub fn encode_payload(text: &str, key: ScramblerKey) -> Result<Vec<CellState>> {
    Ok(encode_bits(&text_to_bits(text)?, key))
}

/// Inverse of [`encode_payload`]. The zero padding added on encode is always
/// shorter than one byte and is dropped here.
pub fn decode_payload(states: &[CellState], key: ScramblerKey) -> Result<String> {
    let total = states.len() * 3;
    let bytes = total / 8;
    if total - bytes * 8 > 2 {
        return Err(Error::BadLength(format!("{} cells do not hold a whole number of encoded bytes", states.len())));
    }
    bits_to_text(&decode_bits(states, key, bytes * 8)?)
}
