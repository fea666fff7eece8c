//! A device, its FTL and the run configuration, persisted together as one
//! versioned JSON dump.

use serde::{Deserialize, Serialize};

use crate::cell::{CellState, DdpParams, PulseParams};
use crate::codec::ScramblerKey;
use crate::cost::CostParams;
use crate::device::{Block, Device, EccParams, Geometry, PageValidity, PhysicalAddress};
use crate::error::{Error, Result};
use crate::ftl::{Ftl, FtlState};

pub const DUMP_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScramblerMode {
    #[default]
    XorKeystream,
    Shift2,
}

impl std::str::FromStr for ScramblerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xor" | "xor_keystream" => Ok(ScramblerMode::XorKeystream),
            "shift2" => Ok(ScramblerMode::Shift2),
            _ => Err(Error::Parse(format!("unknown scrambler mode {s:?}"))),
        }
    }
}

/// Everything needed to build and drive a simulated device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub seed: u64,
    pub scrambler: ScramblerMode,
    pub cost: CostParams,
    pub ecc: EccParams,
    pub ddp: DdpParams,
    pub pulse: PulseParams,
    pub fold_reference: CellState,
    pub slc_reference: CellState,
    /// Background erase runs once fewer than this many blocks are free.
    pub erase_threshold: usize,
    pub max_passes: u32,
    /// Target probability that a DDP-treated page stays ECC-correctable.
    pub ddp_target_fail_prob: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: Geometry::default(),
            seed: 0,
            scrambler: ScramblerMode::default(),
            cost: CostParams::default(),
            ecc: EccParams::default(),
            ddp: DdpParams::default(),
            pulse: PulseParams::default(),
            fold_reference: CellState::P5,
            slc_reference: CellState::P4,
            erase_threshold: 1,
            max_passes: 4,
            ddp_target_fail_prob: 1e-4,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.cost.validate()?;
        self.ddp.validate()?;
        self.pulse.validate()?;
        if self.fold_reference == CellState::E || self.slc_reference == CellState::E {
            return Err(Error::InvalidConfig("fold and SLC references must be P1..P7".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidConfig("max_passes must be >= 1".into()));
        }
        if !(self.ddp_target_fail_prob > 0.0 && self.ddp_target_fail_prob < 1.0) {
            return Err(Error::InvalidConfig("ddp_target_fail_prob must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scrambler_key(&self) -> ScramblerKey {
        match self.scrambler {
            ScramblerMode::XorKeystream => ScramblerKey::XorKeystream { seed: self.seed },
            ScramblerMode::Shift2 => ScramblerKey::Shift2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageDump {
    pub states: Vec<CellState>,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDump {
    pub erase_count: u64,
    pub pgm_count: u64,
    pub pages: Vec<PageDump>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dump {
    pub version: u32,
    pub geometry: Geometry,
    pub seed: u64,
    /// Random streams already handed out by the device.
    pub epoch: u64,
    pub config: RunConfig,
    pub blocks: Vec<BlockDump>,
    pub ftl: FtlState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulator {
    pub config: RunConfig,
    pub device: Device,
    pub ftl: Ftl,
}

impl Simulator {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let device = Device::with_pulse_params(config.geometry, config.seed, config.pulse)?;
        let ftl = Ftl::new(config.geometry, config.scrambler_key());
        Ok(Simulator { config, device, ftl })
    }

    pub fn to_dump(&self) -> Dump {
        let blocks = self
            .device
            .blocks()
            .iter()
            .enumerate()
            .map(|(b, blk)| BlockDump {
                erase_count: blk.erase_count,
                pgm_count: blk.pgm_count,
                pages: blk
                    .pages
                    .iter()
                    .enumerate()
                    .map(|(p, states)| PageDump {
                        states: states.clone(),
                        valid: self.ftl.is_valid(PhysicalAddress::new(b as u32, p as u32)),
                    })
                    .collect(),
            })
            .collect();
        Dump {
            version: DUMP_VERSION,
            geometry: self.device.geometry(),
            seed: self.device.seed(),
            epoch: self.device.epoch(),
            config: self.config.clone(),
            blocks,
            ftl: self.ftl.to_state(),
        }
    }

    pub fn from_dump(dump: Dump) -> Result<Self> {
        if dump.version != DUMP_VERSION {
            return Err(Error::Parse(format!("unsupported dump version {}", dump.version)));
        }
        if dump.config.geometry != dump.geometry || dump.config.seed != dump.seed {
            return Err(Error::Parse("dump geometry/seed disagree with its config".into()));
        }
        dump.config.validate()?;
        let mut valid_flags = Vec::new();
        let blocks = dump
            .blocks
            .into_iter()
            .enumerate()
            .map(|(b, blk)| {
                let pages = blk
                    .pages
                    .into_iter()
                    .enumerate()
                    .map(|(p, page)| {
                        valid_flags.push((PhysicalAddress::new(b as u32, p as u32), page.valid));
                        page.states
                    })
                    .collect();
                Block { erase_count: blk.erase_count, pgm_count: blk.pgm_count, pages }
            })
            .collect();
        let device = Device::from_parts(dump.geometry, dump.seed, dump.epoch, dump.config.pulse, blocks)?;
        let ftl = Ftl::from_state(dump.geometry, dump.ftl)?;
        if let Some((addr, _)) = valid_flags.iter().find(|(a, v)| ftl.is_valid(*a) != *v) {
            return Err(Error::Parse(format!("page {addr} validity disagrees with the mapping table")));
        }
        Ok(Simulator { config: dump.config, device, ftl })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_dump()).expect("dump serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_dump(serde_json::from_str(text)?)
    }
}
