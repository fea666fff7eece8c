//! Page-mapped flash translation layer.
//!
//! Updates are out of place: the old physical page is marked invalid and
//! recorded in the invalid-page registry together with the privacy flag of
//! the logical page it used to hold. Garbage collection copies valid pages to
//! a fresh block and retires the victims without erasing them, so every
//! payload they held stays physically readable until the erase policy fires.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cell::{CellState, ProgramMode};
use crate::codec::{cells_for_bits, decode_bits, encode_bits, BitString, ScramblerKey};
use crate::device::{Device, Geometry, PageValidity, PhysicalAddress};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEntry {
    pub lpn: u64,
    pub block: u32,
    pub page: u32,
    /// Payload length in bits.
    pub bits: usize,
    pub privacy: bool,
}

impl MapEntry {
    pub fn addr(&self) -> PhysicalAddress {
        PhysicalAddress::new(self.block, self.page)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub block: u32,
    pub page: u32,
    /// Logical page this physical page used to hold.
    pub lpn: u64,
    pub bits: usize,
    pub privacy: bool,
}

impl RegistryEntry {
    pub fn addr(&self) -> PhysicalAddress {
        PhysicalAddress::new(self.block, self.page)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStatus {
    Free,
    Open,
    /// Unmapped by garbage collection; waiting for the erase policy.
    Retired,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcReport {
    pub victims: Vec<u32>,
    pub destination: Option<u32>,
    /// Valid pages copied out of the victims.
    pub moved: u64,
    /// Invalid pages left intact in the victims.
    pub residual: u64,
}

/// Persisted form of the mapping state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtlState {
    pub key: ScramblerKey,
    pub map: Vec<MapEntry>,
    pub registry: Vec<RegistryEntry>,
    pub free_pool: Vec<u32>,
    pub block_status: Vec<BlockStatus>,
    pub write_ptr: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ftl {
    geometry: Geometry,
    key: ScramblerKey,
    map: BTreeMap<u64, MapEntry>,
    owner: BTreeMap<PhysicalAddress, u64>,
    registry: BTreeMap<PhysicalAddress, RegistryEntry>,
    status: Vec<BlockStatus>,
    write_ptr: Vec<u32>,
}

impl Ftl {
    pub fn new(geometry: Geometry, key: ScramblerKey) -> Self {
        Ftl {
            geometry,
            key,
            map: BTreeMap::new(),
            owner: BTreeMap::new(),
            registry: BTreeMap::new(),
            status: vec![BlockStatus::Free; geometry.num_blocks as usize],
            write_ptr: vec![0; geometry.num_blocks as usize],
        }
    }

    pub fn key(&self) -> ScramblerKey {
        self.key
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn page_key(&self, addr: PhysicalAddress) -> ScramblerKey {
        self.key.for_page(addr)
    }

    pub fn mapping(&self, lpn: u64) -> Option<&MapEntry> {
        self.map.get(&lpn)
    }

    pub fn mappings(&self) -> impl Iterator<Item = &MapEntry> {
        self.map.values()
    }

    pub fn registry(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.registry.values()
    }

    pub fn registry_entry(&self, addr: PhysicalAddress) -> Option<&RegistryEntry> {
        self.registry.get(&addr)
    }

    pub fn block_status(&self, block: u32) -> Option<BlockStatus> {
        self.status.get(block as usize).copied()
    }

    pub fn free_pool(&self) -> Vec<u32> {
        self.blocks_with(BlockStatus::Free)
    }

    fn blocks_with(&self, st: BlockStatus) -> Vec<u32> {
        (0..self.geometry.num_blocks).filter(|b| self.status[*b as usize] == st).collect()
    }

    /// Whether `addr` has been programmed since its block was last erased.
    pub fn is_written(&self, addr: PhysicalAddress) -> bool {
        self.geometry.contains(addr) && addr.page < self.write_ptr[addr.block as usize]
    }

    pub fn lpn_at(&self, addr: PhysicalAddress) -> Option<u64> {
        self.owner.get(&addr).copied()
    }

    fn allocate(&mut self) -> Result<PhysicalAddress> {
        let ppb = self.geometry.pages_per_block;
        let open = (0..self.geometry.num_blocks)
            .find(|b| self.status[*b as usize] == BlockStatus::Open && self.write_ptr[*b as usize] < ppb);
        let block = match open {
            Some(b) => b,
            None => {
                let b = self.free_pool().first().copied().ok_or(Error::DeviceFull)?;
                self.status[b as usize] = BlockStatus::Open;
                b
            }
        };
        Ok(self.take_page(block))
    }

    fn take_page(&mut self, block: u32) -> PhysicalAddress {
        let page = self.write_ptr[block as usize];
        self.write_ptr[block as usize] += 1;
        PhysicalAddress::new(block, page)
    }

    fn program_payload(&self, device: &mut Device, addr: PhysicalAddress, bits: &BitString) -> Result<()> {
        let cells = self.geometry.cells_per_page as usize;
        let mut states = encode_bits(bits, self.page_key(addr));
        states.resize(cells, CellState::E);
        device.program_page(addr, &states, ProgramMode::Normal)?;
        Ok(())
    }

    fn check_fits(&self, bits: &BitString) -> Result<()> {
        let capacity = self.geometry.page_bits();
        if cells_for_bits(bits.len()) > self.geometry.cells_per_page as usize {
            return Err(Error::PayloadTooLarge { bits: bits.len(), capacity });
        }
        Ok(())
    }

    fn invalidate(&mut self, entry: MapEntry) {
        let addr = entry.addr();
        self.owner.remove(&addr);
        self.registry.insert(
            addr,
            RegistryEntry {
                block: entry.block,
                page: entry.page,
                lpn: entry.lpn,
                bits: entry.bits,
                privacy: entry.privacy,
            },
        );
    }

    fn place(&mut self, device: &mut Device, lpn: u64, bits: &BitString, privacy: bool) -> Result<PhysicalAddress> {
        self.check_fits(bits)?;
        let addr = self.allocate()?;
        self.program_payload(device, addr, bits)?;
        if let Some(old) =
            self.map.insert(lpn, MapEntry { lpn, block: addr.block, page: addr.page, bits: bits.len(), privacy })
        {
            self.invalidate(old);
        }
        self.owner.insert(addr, lpn);
        Ok(addr)
    }

    /// Host write. Writing an already mapped page behaves like an update
    /// that also replaces its privacy flag.
    pub fn write_logical(
        &mut self,
        device: &mut Device,
        lpn: u64,
        payload: &BitString,
        privacy: bool,
    ) -> Result<PhysicalAddress> {
        self.place(device, lpn, payload, privacy)
    }

    /// Out-of-place update; the previous copy stays intact in the registry.
    pub fn update_logical(&mut self, device: &mut Device, lpn: u64, payload: &BitString) -> Result<PhysicalAddress> {
        let privacy = self.map.get(&lpn).ok_or(Error::Unmapped(lpn))?.privacy;
        self.place(device, lpn, payload, privacy)
    }

    pub fn read_logical(&self, device: &Device, lpn: u64) -> Result<BitString> {
        let e = self.map.get(&lpn).ok_or(Error::Unmapped(lpn))?;
        decode_bits(device.read_page(e.addr())?, self.page_key(e.addr()), e.bits)
    }

    /// Payload a registry page held when it was last valid.
    pub fn read_registry_payload(&self, device: &Device, addr: PhysicalAddress) -> Result<Option<BitString>> {
        match self.registry.get(&addr) {
            Some(e) => Ok(Some(decode_bits(device.read_page(addr)?, self.page_key(addr), e.bits)?)),
            None => Ok(None),
        }
    }

    /// Copies every valid page of `victims` into one fresh block and retires
    /// the victims. Nothing is erased.
    pub fn garbage_collect(&mut self, device: &mut Device, victims: &[u32]) -> Result<GcReport> {
        let victims: BTreeSet<u32> = victims.iter().copied().collect();
        if let Some(b) = victims.iter().find(|b| **b >= self.geometry.num_blocks) {
            return Err(Error::OutOfBounds(format!("victim block {b}")));
        }
        let victims: Vec<u32> = victims.into_iter().filter(|b| self.status[*b as usize] != BlockStatus::Free).collect();
        if victims.is_empty() {
            return Ok(GcReport::default());
        }

        let mut valid = Vec::new();
        let mut occupied = 0u64;
        for &b in &victims {
            for p in 0..self.write_ptr[b as usize] {
                occupied += 1;
                let addr = PhysicalAddress::new(b, p);
                if let Some(lpn) = self.owner.get(&addr) {
                    valid.push((addr, *lpn));
                }
            }
        }

        let destination = if valid.is_empty() {
            None
        } else {
            if valid.len() > self.geometry.pages_per_block as usize {
                return Err(Error::InsufficientFree(format!(
                    "{} valid pages exceed one block of {}",
                    valid.len(),
                    self.geometry.pages_per_block
                )));
            }
            let dest = self
                .free_pool()
                .into_iter()
                .find(|b| !victims.contains(b))
                .ok_or_else(|| Error::InsufficientFree("no free block for copies".into()))?;
            self.status[dest as usize] = BlockStatus::Open;
            for (old, lpn) in &valid {
                let entry = self.map[lpn];
                let bits = decode_bits(device.read_page(*old)?, self.page_key(*old), entry.bits)?;
                let new = self.take_page(dest);
                self.program_payload(device, new, &bits)?;
                self.invalidate(entry);
                self.map.insert(*lpn, MapEntry { block: new.block, page: new.page, ..entry });
                self.owner.insert(new, *lpn);
            }
            Some(dest)
        };

        for &b in &victims {
            self.status[b as usize] = BlockStatus::Retired;
        }
        let moved = valid.len() as u64;
        Ok(GcReport { victims, destination, moved, residual: occupied - moved })
    }

    /// Blocks ordered by descending invalid-page count, lowest index first on
    /// ties. Free and retired blocks are never picked.
    pub fn select_victims_greedy(&self, count: usize) -> Vec<u32> {
        let mut cands: Vec<(usize, u32)> = (0..self.geometry.num_blocks)
            .filter(|b| self.status[*b as usize] == BlockStatus::Open)
            .map(|b| (self.registry.range(block_range(b)).count(), b))
            .filter(|(n, _)| *n > 0)
            .collect();
        cands.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        cands.into_iter().take(count).map(|(_, b)| b).collect()
    }

    /// Registry pages still flagged as privacy data, in address order.
    pub fn invalid_privacy_pages(&self) -> Vec<PhysicalAddress> {
        self.registry.values().filter(|e| e.privacy).map(|e| e.addr()).collect()
    }

    /// Drops the privacy flag of a registry page once its data is destroyed.
    pub fn clear_privacy(&mut self, addr: PhysicalAddress) -> bool {
        match self.registry.get_mut(&addr) {
            Some(e) if e.privacy => {
                e.privacy = false;
                true
            }
            _ => false,
        }
    }

    fn has_valid(&self, block: u32) -> bool {
        self.owner.range(block_range(block)).next().is_some()
    }

    fn erasable(&self, block: u32) -> bool {
        let full = self.write_ptr[block as usize] == self.geometry.pages_per_block;
        let st = self.status[block as usize];
        !self.has_valid(block)
            && self.write_ptr[block as usize] > 0
            && (st == BlockStatus::Retired || (st == BlockStatus::Open && full))
    }

    fn erase_now(&mut self, device: &mut Device, block: u32) -> Result<()> {
        device.erase_block(block)?;
        let stale: Vec<PhysicalAddress> = self.registry.range(block_range(block)).map(|(a, _)| *a).collect();
        for a in stale {
            self.registry.remove(&a);
        }
        self.status[block as usize] = BlockStatus::Free;
        self.write_ptr[block as usize] = 0;
        Ok(())
    }

    /// Erase policy: reclaims blocks holding only invalid pages, but only
    /// once the free pool has shrunk below `policy_threshold` blocks.
    pub fn background_erase(&mut self, device: &mut Device, policy_threshold: usize) -> Result<Vec<u32>> {
        if self.free_pool().len() >= policy_threshold {
            return Ok(Vec::new());
        }
        let eligible: Vec<u32> = (0..self.geometry.num_blocks).filter(|b| self.erasable(*b)).collect();
        for &b in &eligible {
            self.erase_now(device, b)?;
        }
        Ok(eligible)
    }

    /// Immediate erase of specific blocks regardless of policy. Blocks that
    /// still hold a valid page are refused.
    pub fn erase_blocks(&mut self, device: &mut Device, blocks: &[u32]) -> Result<Vec<u32>> {
        let blocks: BTreeSet<u32> = blocks.iter().copied().collect();
        for &b in &blocks {
            if b >= self.geometry.num_blocks {
                return Err(Error::OutOfBounds(format!("block {b}")));
            }
            if self.has_valid(b) {
                return Err(Error::InvalidConfig(format!("block {b} still holds valid pages")));
            }
        }
        for &b in &blocks {
            self.erase_now(device, b)?;
        }
        Ok(blocks.into_iter().collect())
    }

    pub fn to_state(&self) -> FtlState {
        FtlState {
            key: self.key,
            map: self.map.values().copied().collect(),
            registry: self.registry.values().copied().collect(),
            free_pool: self.free_pool(),
            block_status: self.status.clone(),
            write_ptr: self.write_ptr.clone(),
        }
    }

    pub fn from_state(geometry: Geometry, state: FtlState) -> Result<Self> {
        let n = geometry.num_blocks as usize;
        if state.block_status.len() != n || state.write_ptr.len() != n {
            return Err(Error::BadLength("ftl block tables do not match geometry".into()));
        }
        if state.write_ptr.iter().any(|w| *w > geometry.pages_per_block) {
            return Err(Error::Parse("write pointer beyond block end".into()));
        }
        let mut ftl = Ftl::new(geometry, state.key);
        ftl.status = state.block_status;
        ftl.write_ptr = state.write_ptr;
        if ftl.free_pool() != state.free_pool {
            return Err(Error::Parse("free pool disagrees with block status".into()));
        }
        for e in state.map {
            if !ftl.is_written(e.addr()) || ftl.owner.insert(e.addr(), e.lpn).is_some() {
                return Err(Error::Parse(format!("bad mapping entry for lpn {}", e.lpn)));
            }
            if ftl.map.insert(e.lpn, e).is_some() {
                return Err(Error::Parse(format!("lpn {} mapped twice", e.lpn)));
            }
        }
        for e in state.registry {
            if !ftl.is_written(e.addr()) || ftl.owner.contains_key(&e.addr()) {
                return Err(Error::Parse(format!("bad registry entry at {}", e.addr())));
            }
            ftl.registry.insert(e.addr(), e);
        }
        Ok(ftl)
    }
}

fn block_range(block: u32) -> std::ops::RangeInclusive<PhysicalAddress> {
    PhysicalAddress::new(block, 0)..=PhysicalAddress::new(block, u32::MAX)
}

impl PageValidity for Ftl {
    fn is_valid(&self, addr: PhysicalAddress) -> bool {
        self.owner.contains_key(&addr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::text_to_bits;

    fn setup() -> (Ftl, Device) {
        let g = Geometry::new(4, 4, 16).unwrap();
        (Ftl::new(g, ScramblerKey::XorKeystream { seed: 3 }), Device::new(g, 3).unwrap())
    }

    fn bits(s: &str) -> BitString {
        text_to_bits(s).unwrap()
    }

    #[test]
    fn write_read_update() {
        let (mut ftl, mut dev) = setup();
        let a = ftl.write_logical(&mut dev, 0, &bits("661004"), true).unwrap();
        assert_eq!(a, PhysicalAddress::new(0, 0));
        assert!(ftl.mapping(0).unwrap().privacy);
        assert_eq!(ftl.read_logical(&dev, 0).unwrap(), bits("661004"));

        let b = ftl.update_logical(&mut dev, 0, &bits("777777")).unwrap();
        assert_eq!(b, PhysicalAddress::new(0, 1));
        assert_eq!(ftl.read_logical(&dev, 0).unwrap(), bits("777777"));
        assert_eq!(ftl.invalid_privacy_pages(), vec![a]);
        assert_eq!(ftl.read_registry_payload(&dev, a).unwrap(), Some(bits("661004")));

        assert!(matches!(ftl.update_logical(&mut dev, 9, &bits("x")), Err(Error::Unmapped(9))));
        assert!(matches!(ftl.read_logical(&dev, 9), Err(Error::Unmapped(9))));
        assert!(matches!(
            ftl.write_logical(&mut dev, 1, &bits("toolongpayload"), false),
            Err(Error::PayloadTooLarge { .. })
        ));
    }

    #[test]
    fn repeated_updates_leave_one_valid_copy() {
        let (mut ftl, mut dev) = setup();
        ftl.write_logical(&mut dev, 5, &bits("v0"), true).unwrap();
        for k in 1..=6 {
            ftl.update_logical(&mut dev, 5, &bits(&format!("v{k}"))).unwrap();
        }
        assert_eq!(ftl.registry().count(), 6);
        assert_eq!(ftl.mappings().count(), 1);
        assert_eq!(ftl.read_logical(&dev, 5).unwrap(), bits("v6"));
    }

    #[test]
    fn gc_leaves_residual_copies() {
        let g = Geometry::new(6, 4, 16).unwrap();
        let (mut ftl, mut dev) = (Ftl::new(g, ScramblerKey::XorKeystream { seed: 3 }), Device::new(g, 3).unwrap());
        // Block 0: lpn 0..4; block 1: lpn 4..8. Invalidate 5 of the 8 pages.
        for lpn in 0..8 {
            ftl.write_logical(&mut dev, lpn, &bits(&format!("d{lpn}")), lpn == 0).unwrap();
        }
        for lpn in [1, 2, 4, 5, 6] {
            ftl.update_logical(&mut dev, lpn, &bits(&format!("n{lpn}"))).unwrap();
        }
        let erases = dev.total_erase_count();
        let pgms = dev.total_pgm_count();
        let rep = ftl.garbage_collect(&mut dev, &[0, 1]).unwrap();
        assert_eq!((rep.moved, rep.residual), (3, 5));
        assert_eq!(dev.total_erase_count(), erases);
        assert_eq!(dev.total_pgm_count() - pgms, 3);
        let dest = rep.destination.unwrap();
        assert_eq!(dev.blocks()[dest as usize].pgm_count, 3);
        for lpn in [0, 3, 7] {
            assert_eq!(ftl.read_logical(&dev, lpn).unwrap(), bits(&format!("d{lpn}")));
            assert_eq!(ftl.mapping(lpn).unwrap().block, dest);
        }
        assert!(ftl.invalid_privacy_pages().contains(&PhysicalAddress::new(0, 0)));
        assert_eq!(ftl.block_status(0), Some(BlockStatus::Retired));
        assert_eq!(ftl.garbage_collect(&mut dev, &[]).unwrap(), GcReport::default());
    }

    #[test]
    fn background_erase_policy() {
        let (mut ftl, mut dev) = setup();
        for lpn in 0..4 {
            ftl.write_logical(&mut dev, lpn, &bits("ab"), true).unwrap();
        }
        ftl.update_logical(&mut dev, 0, &bits("cd")).unwrap();
        ftl.garbage_collect(&mut dev, &[0]).unwrap();
        assert!(ftl.background_erase(&mut dev, 1).unwrap().is_empty());
        assert!(!ftl.invalid_privacy_pages().is_empty());
        let erased = ftl.background_erase(&mut dev, 4).unwrap();
        assert_eq!(erased, vec![0]);
        assert_eq!(dev.blocks()[0].erase_count, 1);
        assert!(ftl.registry().all(|e| e.block != 0));
        // Blocks with valid data are never erased.
        for b in 1..4 {
            assert_eq!(dev.blocks()[b].erase_count, 0);
        }
        assert!(ftl.erase_blocks(&mut dev, &[ftl.mapping(1).unwrap().block]).is_err());
    }

    #[test]
    fn gc_needs_free_block() {
        let g = Geometry::new(2, 2, 16).unwrap();
        let mut ftl = Ftl::new(g, ScramblerKey::Shift2);
        let mut dev = Device::new(g, 0).unwrap();
        for lpn in 0..4 {
            ftl.write_logical(&mut dev, lpn, &bits("zz"), false).unwrap();
        }
        assert!(matches!(ftl.write_logical(&mut dev, 9, &bits("zz"), false), Err(Error::DeviceFull)));
        assert!(matches!(ftl.garbage_collect(&mut dev, &[0]), Err(Error::InsufficientFree(_))));
    }

    #[test]
    fn greedy_picks_most_invalid() {
        let (mut ftl, mut dev) = setup();
        for lpn in 0..8 {
            ftl.write_logical(&mut dev, lpn, &bits("q"), false).unwrap();
        }
        for lpn in [4, 5, 6, 0] {
            ftl.update_logical(&mut dev, lpn, &bits("r")).unwrap();
        }
        assert_eq!(ftl.select_victims_greedy(2), vec![1, 0]);
    }

    #[test]
    fn state_round_trip() {
        let (mut ftl, mut dev) = setup();
        ftl.write_logical(&mut dev, 0, &bits("abc"), true).unwrap();
        ftl.update_logical(&mut dev, 0, &bits("def")).unwrap();
        let back = Ftl::from_state(ftl.geometry(), ftl.to_state()).unwrap();
        assert_eq!(back, ftl);
        let mut broken = ftl.to_state();
        broken.free_pool.clear();
        assert!(Ftl::from_state(ftl.geometry(), broken).is_err());
    }
}
