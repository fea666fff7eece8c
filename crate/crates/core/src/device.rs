//! The physical TLC device: page program and read, block erase, raw scans and
//! per-block wear counters.
//!
//! Reads are exact. There is no read noise or retention model, so the only
//! stochastic operation on a device is the deletion duty pulse.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{ddp_cell, program_cell, CellState, DdpParams, ProgramMode, PulseParams, PulseStats};
use crate::codec::{splitmix64, states_to_bits};
use crate::cost::CostParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub num_blocks: u32,
    pub pages_per_block: u32,
    pub cells_per_page: u32,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { num_blocks: 8, pages_per_block: 16, cells_per_page: 48 }
    }
}

impl Geometry {
    pub fn new(num_blocks: u32, pages_per_block: u32, cells_per_page: u32) -> Result<Self> {
        let g = Geometry { num_blocks, pages_per_block, cells_per_page };
        g.validate()?;
        Ok(g)
    }

    /// Full-size blocks of 1024 pages.
    pub fn large_block(num_blocks: u32, cells_per_page: u32) -> Self {
        Geometry { num_blocks, pages_per_block: 1024, cells_per_page }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 || self.pages_per_block == 0 || self.cells_per_page == 0 {
            return Err(Error::InvalidConfig(format!("geometry dimensions must be >= 1: {self:?}")));
        }
        Ok(())
    }

    pub fn total_pages(&self) -> usize {
        self.num_blocks as usize * self.pages_per_block as usize
    }

    pub fn page_bits(&self) -> usize {
        self.cells_per_page as usize * 3
    }

    pub fn contains(&self, addr: PhysicalAddress) -> bool {
        addr.block < self.num_blocks && addr.page < self.pages_per_block
    }

    /// All page addresses in block-major order.
    pub fn addresses(&self) -> impl Iterator<Item = PhysicalAddress> + '_ {
        (0..self.num_blocks).flat_map(move |b| (0..self.pages_per_block).map(move |p| PhysicalAddress::new(b, p)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhysicalAddress {
    pub block: u32,
    pub page: u32,
}

impl PhysicalAddress {
    pub const fn new(block: u32, page: u32) -> Self {
        PhysicalAddress { block, page }
    }
}

impl fmt::Display for PhysicalAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.block, self.page)
    }
}

/// Maximum correctable bit flips per page codeword.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EccParams {
    pub t: u32,
}

impl Default for EccParams {
    fn default() -> Self {
        EccParams { t: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanFilter {
    All,
    Mapped,
    Unmapped,
}

/// Source of page validity for scans; the FTL is the usual implementor.
pub trait PageValidity {
    fn is_valid(&self, addr: PhysicalAddress) -> bool;
}

/// Validity view for a bare device with no mapping: nothing is valid.
pub struct NoMapping;

impl PageValidity for NoMapping {
    fn is_valid(&self, _addr: PhysicalAddress) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScannedPage {
    pub addr: PhysicalAddress,
    pub states: Vec<CellState>,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub erase_count: u64,
    pub pgm_count: u64,
    pub pages: Vec<Vec<CellState>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockWear {
    pub block: u32,
    pub pgm_count: u64,
    pub erase_count: u64,
    pub degradation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Device {
    geometry: Geometry,
    seed: u64,
    epoch: u64,
    pulse: PulseParams,
    blocks: Vec<Block>,
}

impl Device {
    pub fn new(geometry: Geometry, seed: u64) -> Result<Self> {
        Self::with_pulse_params(geometry, seed, PulseParams::default())
    }

    pub fn with_pulse_params(geometry: Geometry, seed: u64, pulse: PulseParams) -> Result<Self> {
        geometry.validate()?;
        pulse.validate()?;
        let page = vec![CellState::E; geometry.cells_per_page as usize];
        let block = Block { erase_count: 0, pgm_count: 0, pages: vec![page; geometry.pages_per_block as usize] };
        Ok(Device { geometry, seed, epoch: 0, pulse, blocks: vec![block; geometry.num_blocks as usize] })
    }

    /// Rebuilds a device from its persisted parts.
    pub fn from_parts(
        geometry: Geometry,
        seed: u64,
        epoch: u64,
        pulse: PulseParams,
        blocks: Vec<Block>,
    ) -> Result<Self> {
        geometry.validate()?;
        pulse.validate()?;
        if blocks.len() != geometry.num_blocks as usize {
            return Err(Error::BadLength(format!("expected {} blocks, got {}", geometry.num_blocks, blocks.len())));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.pages.len() != geometry.pages_per_block as usize
                || b.pages.iter().any(|p| p.len() != geometry.cells_per_page as usize)
            {
                return Err(Error::BadLength(format!("block {i} does not match geometry")));
            }
        }
        Ok(Device { geometry, seed, epoch, pulse, blocks })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn pulse_params(&self) -> &PulseParams {
        &self.pulse
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Next deterministic random stream. Each call advances the device epoch,
    /// so a persisted device resumes the same sequence.
    pub fn next_rng(&mut self) -> ChaCha8Rng {
        let stream = splitmix64(self.seed ^ splitmix64(self.epoch.wrapping_add(0xD1B5_4A32_D192_ED03)));
        self.epoch += 1;
        ChaCha8Rng::seed_from_u64(stream)
    }

    fn check_addr(&self, addr: PhysicalAddress) -> Result<()> {
        if self.geometry.contains(addr) {
            Ok(())
        } else {
            Err(Error::OutOfBounds(format!("page {addr} outside {:?}", self.geometry)))
        }
    }

    fn check_block(&self, block: u32) -> Result<()> {
        if block < self.geometry.num_blocks {
            Ok(())
        } else {
            Err(Error::OutOfBounds(format!("block {block} of {}", self.geometry.num_blocks)))
        }
    }

    /// Programs a whole page. Every target must be at or above the cell's
    /// current state; nothing is changed if any cell would move down.
    pub fn program_page(
        &mut self,
        addr: PhysicalAddress,
        states: &[CellState],
        mode: ProgramMode,
    ) -> Result<PulseStats> {
        self.check_addr(addr)?;
        if states.len() != self.geometry.cells_per_page as usize {
            return Err(Error::BadLength(format!(
                "page takes {} cells, got {}",
                self.geometry.cells_per_page,
                states.len()
            )));
        }
        let pulse = self.pulse;
        let block = &mut self.blocks[addr.block as usize];
        let page = &mut block.pages[addr.page as usize];
        let mut total = PulseStats::default();
        let mut next = Vec::with_capacity(page.len());
        for (&cur, &target) in page.iter().zip(states) {
            let (s, stats) = program_cell(cur, target, mode, &pulse)?;
            next.push(s);
            total += stats;
        }
        *page = next;
        block.pgm_count += 1;
        Ok(total)
    }

    pub fn read_page(&self, addr: PhysicalAddress) -> Result<&[CellState]> {
        self.check_addr(addr)?;
        Ok(&self.blocks[addr.block as usize].pages[addr.page as usize])
    }

    pub fn erase_block(&mut self, block: u32) -> Result<()> {
        self.check_block(block)?;
        let b = &mut self.blocks[block as usize];
        for page in &mut b.pages {
            page.fill(CellState::E);
        }
        b.erase_count += 1;
        Ok(())
    }

    /// Applies deletion duty pulses to every cell of a page. This is not a
    /// program operation: no verify, and `pgm_count` is left alone.
    pub fn apply_ddp<R: Rng + ?Sized>(&mut self, addr: PhysicalAddress, ddp: &DdpParams, rng: &mut R) -> Result<()> {
        self.check_addr(addr)?;
        ddp.validate()?;
        for cell in &mut self.blocks[addr.block as usize].pages[addr.page as usize] {
            *cell = ddp_cell(*cell, ddp, rng);
        }
        Ok(())
    }

    pub fn scan_pages(&self, filter: ScanFilter, view: &dyn PageValidity) -> Vec<ScannedPage> {
        self.geometry
            .addresses()
            .filter_map(|addr| {
                let valid = view.is_valid(addr);
                let keep = match filter {
                    ScanFilter::All => true,
                    ScanFilter::Mapped => valid,
                    ScanFilter::Unmapped => !valid,
                };
                keep.then(|| ScannedPage {
                    addr,
                    states: self.blocks[addr.block as usize].pages[addr.page as usize].clone(),
                    valid,
                })
            })
            .collect()
    }

    pub fn wear_report(&self, params: &CostParams) -> Vec<BlockWear> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| BlockWear {
                block: i as u32,
                pgm_count: b.pgm_count,
                erase_count: b.erase_count,
                degradation: params.degradation(b.erase_count, b.pgm_count),
            })
            .collect()
    }

    pub fn total_pgm_count(&self) -> u64 {
        self.blocks.iter().map(|b| b.pgm_count).sum()
    }

    pub fn total_erase_count(&self) -> u64 {
        self.blocks.iter().map(|b| b.erase_count).sum()
    }
}

/// Whether an ECC with capability `t` could restore `reference` from `observed`.
pub fn ecc_correctable(reference: &[CellState], observed: &[CellState], ecc: &EccParams) -> Result<bool> {
    let flips = states_to_bits(reference).distance(&states_to_bits(observed))?;
    Ok(flips <= ecc.t as usize)
}
