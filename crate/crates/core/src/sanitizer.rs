//! In-place destruction of residual privacy data.
//!
//! All three schemes only ever raise cell thresholds, so they run on
//! programmed pages without an erase:
//!
//! * partial overwrite moves every cell to a strictly higher state (random
//!   mode) or folds every cell below a reference state up to it;
//! * SLC fold programs one page of random single-bit data on top of the
//!   multi-level data, raising the cells whose bit is 0 to the reference;
//! * deletion duty pulses push cells up stochastically, with the pulse count
//!   chosen so the damage exceeds the ECC capability.
//!
//! [`destroy`] is the controller-side driver: it resolves the privacy pages
//! from the FTL registry, applies a scheme page by page and checks each page
//! with the same forensic search used by [`verify_destruction`].

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{code_distance, ddp_cell, overwritable_states, CellState, DdpParams, ProgramMode, PulseStats};
use crate::codec::{descramble, states_to_bits, BitString};
use crate::cost::{gc_case, CostParams, CostScheme};
use crate::device::{Device, PageValidity, PhysicalAddress};
use crate::error::{Error, Result};
use crate::ftl::Ftl;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SanitizeScheme {
    PartialOverwriteRandom,
    PartialOverwriteFold { reference: CellState },
    SlcFold { reference: CellState },
    Ddp { params: DdpParams },
}

impl SanitizeScheme {
    pub fn validate(&self) -> Result<()> {
        match self {
            SanitizeScheme::PartialOverwriteRandom => Ok(()),
            SanitizeScheme::PartialOverwriteFold { reference } | SanitizeScheme::SlcFold { reference } => {
                if *reference == CellState::E {
                    Err(Error::InvalidConfig("fold reference must be one of P1..P7".into()))
                } else {
                    Ok(())
                }
            }
            SanitizeScheme::Ddp { params } => params.validate(),
        }
    }

    pub fn cost_scheme(&self) -> CostScheme {
        match self {
            SanitizeScheme::PartialOverwriteRandom | SanitizeScheme::PartialOverwriteFold { .. } => {
                CostScheme::PartialOverwrite
            }
            SanitizeScheme::SlcFold { .. } => CostScheme::Slc,
            SanitizeScheme::Ddp { .. } => CostScheme::Ddp,
        }
    }

    /// Parses the command-line names `po`, `fold`, `slc` and `ddp`.
    pub fn from_name(name: &str, reference: Option<CellState>, ddp: DdpParams) -> Result<Self> {
        let scheme = match name {
            "po" | "po-random" => SanitizeScheme::PartialOverwriteRandom,
            "fold" | "po-fold" => {
                SanitizeScheme::PartialOverwriteFold { reference: reference.unwrap_or(CellState::P5) }
            }
            "slc" => SanitizeScheme::SlcFold { reference: reference.unwrap_or(CellState::P4) },
            "ddp" => SanitizeScheme::Ddp { params: ddp },
            other => return Err(Error::UnknownScheme(other.to_string())),
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoMode {
    Random,
    Fold(CellState),
}

/// Target states for a partial overwrite of `states`.
pub fn partial_overwrite_targets<R: Rng + ?Sized>(states: &[CellState], mode: PoMode, rng: &mut R) -> Vec<CellState> {
    states
        .iter()
        .map(|&s| match mode {
            PoMode::Random => overwritable_states(s).choose(rng).copied().unwrap_or(s),
            PoMode::Fold(reference) => s.max(reference),
        })
        .collect()
}

/// Target states for an SLC program of `slc_bits` (0 = program) at `reference`.
pub fn slc_targets(states: &[CellState], slc_bits: &[u8], reference: CellState) -> Vec<CellState> {
    states.iter().zip(slc_bits).map(|(&s, &bit)| if bit == 0 { s.max(reference) } else { s }).collect()
}

/// Programs `targets` unless they equal the current page, in which case no
/// program operation is issued.
fn program_if_changed(device: &mut Device, addr: PhysicalAddress, targets: &[CellState]) -> Result<PulseStats> {
    if device.read_page(addr)? == targets {
        return Ok(PulseStats::default());
    }
    device.program_page(addr, targets, ProgramMode::PartialOverwrite)
}

pub fn partial_overwrite_page<R: Rng + ?Sized>(
    device: &mut Device,
    addr: PhysicalAddress,
    mode: PoMode,
    rng: &mut R,
) -> Result<PulseStats> {
    let targets = partial_overwrite_targets(device.read_page(addr)?, mode, rng);
    program_if_changed(device, addr, &targets)
}

/// One SLC program of random data. Draws that would not raise any cell are
/// redrawn; a page with no cell below `reference` is left alone.
pub fn slc_fold_page<R: Rng + ?Sized>(
    device: &mut Device,
    addr: PhysicalAddress,
    reference: CellState,
    rng: &mut R,
) -> Result<PulseStats> {
    let states = device.read_page(addr)?.to_vec();
    if states.iter().all(|s| *s >= reference) {
        return Ok(PulseStats::default());
    }
    let targets = loop {
        let bits: Vec<u8> = (0..states.len()).map(|_| rng.random_range(0..=1u8)).collect();
        let targets = slc_targets(&states, &bits, reference);
        if targets != states {
            break targets;
        }
    };
    program_if_changed(device, addr, &targets)
}

pub fn ddp_page<R: Rng + ?Sized>(
    device: &mut Device,
    addr: PhysicalAddress,
    ddp: &DdpParams,
    rng: &mut R,
) -> Result<()> {
    device.apply_ddp(addr, ddp, rng)
}

/// Highest pulse count tried before declaring a target unreachable.
pub const CALIBRATION_MAX_K: u32 = 64;

/// Smallest DDP pulse count whose Monte Carlo probability of leaving a page
/// ECC-correctable is at most `target_fail_prob`.
///
/// Pages are uniformly random programmed pages, excluding the all-`P7` page.
/// At least 10^4 pages are sampled per candidate, and enough that the target
/// corresponds to ten or more expected failures.
pub fn calibrate_ddp(cells_per_page: usize, t: u32, p_adv: f64, target_fail_prob: f64, seed: u64) -> Result<u32> {
    DdpParams::new(p_adv, 1)?;
    if cells_per_page == 0 {
        return Err(Error::InvalidConfig("cells_per_page must be >= 1".into()));
    }
    if !(target_fail_prob > 0.0 && target_fail_prob < 1.0) {
        return Err(Error::InvalidConfig(format!("target probability must be in (0, 1), got {target_fail_prob}")));
    }
    if t as usize >= 3 * cells_per_page {
        return Err(Error::Unreachable { cells: cells_per_page, t });
    }
    let trials = 10_000u64.max((10.0 / target_fail_prob).ceil() as u64);
    let allowed = (target_fail_prob * trials as f64).floor() as u64;
    let mut page = vec![CellState::E; cells_per_page];
    for k in 1..=CALIBRATION_MAX_K {
        let ddp = DdpParams { p_adv, k };
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(u64::from(k)));
        let mut correctable = 0u64;
        for _ in 0..trials {
            loop {
                for c in page.iter_mut() {
                    *c = CellState::ALL[rng.random_range(0..8)];
                }
                if page.iter().any(|c| *c != CellState::P7) {
                    break;
                }
            }
            let flips: u32 = page.iter().map(|&c| code_distance(c, ddp_cell(c, &ddp, &mut rng))).sum();
            if flips <= t {
                correctable += 1;
                if correctable > allowed {
                    break;
                }
            }
        }
        if correctable <= allowed {
            return Ok(k);
        }
    }
    Err(Error::Unreachable { cells: cells_per_page, t })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Targets {
    AllPrivacy,
    Addresses(Vec<PhysicalAddress>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DestroyOptions {
    pub cost: CostParams,
    /// Scheme applications per page before it is reported as failed.
    pub max_passes: u32,
}

impl Default for DestroyOptions {
    fn default() -> Self {
        DestroyOptions { cost: CostParams::default(), max_passes: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageOutcome {
    pub block: u32,
    pub page: u32,
    pub pulses: u64,
    pub verified: bool,
    /// Page program operations issued; DDP issues none.
    pub programs: u32,
}

impl PageOutcome {
    pub fn addr(&self) -> PhysicalAddress {
        PhysicalAddress::new(self.block, self.page)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DestructionReport {
    pub scheme: SanitizeScheme,
    pub pages: Vec<PageOutcome>,
    pub model_time: f64,
}

impl DestructionReport {
    pub fn failed_pages(&self) -> Vec<PhysicalAddress> {
        self.pages.iter().filter(|p| !p.verified).map(|p| p.addr()).collect()
    }

    pub fn all_verified(&self) -> bool {
        self.pages.iter().all(|p| p.verified)
    }
}

/// Where a page's payload could be recovered from, if anywhere.
fn page_hits(ftl: &Ftl, addr: PhysicalAddress, states: &[CellState], payload: &BitString) -> (bool, bool) {
    let raw = states_to_bits(states);
    let raw_hit = !raw.find_aligned(payload, 3).is_empty();
    let clear = descramble(&raw, ftl.page_key(addr));
    let clear_hit = !clear.find_aligned(payload, 3).is_empty();
    (raw_hit, clear_hit)
}

/// Payloads shorter than this turn up by chance in most pages, so a treated
/// page only has to stop yielding them at the position they were stored.
pub const MIN_SEARCH_BITS: usize = 24;

/// Whether `payload` can no longer be read back from the treated page.
fn page_destroyed(ftl: &Ftl, addr: PhysicalAddress, states: &[CellState], payload: &BitString) -> bool {
    let raw = states_to_bits(states);
    let at_start =
        |bits: &BitString| bits.len() >= payload.len() && bits.as_slice()[..payload.len()] == *payload.as_slice();
    let clear = descramble(&raw, ftl.page_key(addr));
    if at_start(&raw) || at_start(&clear) {
        return false;
    }
    if payload.len() < MIN_SEARCH_BITS {
        return true;
    }
    let (raw_hit, clear_hit) = page_hits(ftl, addr, states, payload);
    !(raw_hit || clear_hit)
}

fn original_payload(ftl: &Ftl, device: &Device, addr: PhysicalAddress) -> Result<BitString> {
    if let Some(bits) = ftl.read_registry_payload(device, addr)? {
        return Ok(bits);
    }
    if let Some(lpn) = ftl.lpn_at(addr) {
        return ftl.read_logical(device, lpn);
    }
    // Untracked page: treat its whole descrambled content as the payload.
    Ok(descramble(&states_to_bits(device.read_page(addr)?), ftl.page_key(addr)))
}

fn apply_once<R: Rng + ?Sized>(
    device: &mut Device,
    addr: PhysicalAddress,
    scheme: &SanitizeScheme,
    rng: &mut R,
) -> Result<u64> {
    Ok(match scheme {
        SanitizeScheme::PartialOverwriteRandom => {
            partial_overwrite_page(device, addr, PoMode::Random, rng)?.program_pulses
        }
        SanitizeScheme::PartialOverwriteFold { reference } => {
            partial_overwrite_page(device, addr, PoMode::Fold(*reference), rng)?.program_pulses
        }
        SanitizeScheme::SlcFold { reference } => slc_fold_page(device, addr, *reference, rng)?.program_pulses,
        SanitizeScheme::Ddp { params } => {
            ddp_page(device, addr, params, rng)?;
            u64::from(params.k)
        }
    })
}

/// Applies `scheme` to every target page and verifies each one, returning
/// the report even when some pages fail verification.
pub fn run_destroy(
    ftl: &mut Ftl,
    device: &mut Device,
    scheme: &SanitizeScheme,
    targets: &Targets,
    opts: &DestroyOptions,
) -> Result<DestructionReport> {
    scheme.validate()?;
    let pages = match targets {
        Targets::AllPrivacy => ftl.invalid_privacy_pages(),
        Targets::Addresses(list) => {
            let mut list = list.clone();
            list.sort();
            list.dedup();
            list
        }
    };
    let geometry = device.geometry();
    if let Some(bad) = pages.iter().find(|a| !geometry.contains(**a)) {
        return Err(Error::OutOfBounds(format!("page {bad}")));
    }

    let mut rng = device.next_rng();
    let mut outcomes = Vec::with_capacity(pages.len());
    for addr in pages {
        let payload = original_payload(ftl, device, addr)?;
        let mut outcome = PageOutcome { block: addr.block, page: addr.page, pulses: 0, verified: false, programs: 0 };
        for _ in 0..opts.max_passes.max(1) {
            let before = device.read_page(addr)?.to_vec();
            let pgm_before = device.blocks()[addr.block as usize].pgm_count;
            outcome.pulses += apply_once(device, addr, scheme, &mut rng)?;
            outcome.programs += (device.blocks()[addr.block as usize].pgm_count - pgm_before) as u32;
            let after = device.read_page(addr)?;
            outcome.verified = page_destroyed(ftl, addr, after, &payload);
            if outcome.verified || after == before.as_slice() {
                break;
            }
        }
        if outcome.verified {
            ftl.clear_privacy(addr);
        }
        outcomes.push(outcome);
    }

    let model_time =
        gc_case(scheme.cost_scheme(), 0, outcomes.len() as u64, &opts.cost).destruction_time.value().unwrap_or(0.0);
    Ok(DestructionReport { scheme: *scheme, pages: outcomes, model_time })
}

/// Like [`run_destroy`], but any page that still yields its payload turns
/// into [`Error::VerificationFailed`].
pub fn destroy(
    ftl: &mut Ftl,
    device: &mut Device,
    scheme: &SanitizeScheme,
    targets: &Targets,
    opts: &DestroyOptions,
) -> Result<DestructionReport> {
    let report = run_destroy(ftl, device, scheme, targets, opts)?;
    let failed = report.failed_pages();
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(Error::VerificationFailed { pages: failed })
    }
}

/// Conventional baseline: erase whole blocks.
pub fn block_erase(ftl: &mut Ftl, device: &mut Device, blocks: &[u32]) -> Result<Vec<u32>> {
    ftl.erase_blocks(device, blocks)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub block: u32,
    pub page: u32,
    pub mapped: bool,
    /// Payload bits appear directly in the cell codes.
    pub raw: bool,
    /// Payload bits appear after descrambling with the page key.
    pub descrambled: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub found: bool,
    pub locations: Vec<Hit>,
}

impl VerifyOutcome {
    pub fn mapped_hits(&self) -> usize {
        self.locations.iter().filter(|h| h.mapped).count()
    }

    pub fn unmapped_hits(&self) -> usize {
        self.locations.iter().filter(|h| !h.mapped).count()
    }
}

/// Forensic search of every page, mapped or not, for `payload` at any
/// cell-aligned offset, both as stored and after descrambling.
pub fn verify_destruction(ftl: &Ftl, device: &Device, payload: &BitString) -> VerifyOutcome {
    let locations: Vec<Hit> = device
        .geometry()
        .addresses()
        .filter_map(|addr| {
            let states = device.read_page(addr).ok()?;
            let (raw, descrambled) = page_hits(ftl, addr, states, payload);
            (raw || descrambled).then(|| Hit {
                block: addr.block,
                page: addr.page,
                mapped: ftl.is_valid(addr),
                raw,
                descrambled,
            })
        })
        .collect();
    VerifyOutcome { found: !locations.is_empty(), locations }
}
