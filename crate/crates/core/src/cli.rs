//! Command-line front end.
//!
//! Device state lives in a JSON dump (`--device`, default `./device.json`)
//! between invocations; every mutating subcommand loads it, applies one
//! operation and writes it back. `replay` runs an op log of the same
//! subcommands against an in-memory device instead.
//!
//! Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cell::{overwritable_states, CellState, DdpParams};
use crate::codec::{bits_to_text, states_to_bits, text_to_bits, BitString};
use crate::cost::{compare, render_table, CostParams, CostScheme, Scenario};
use crate::device::{Geometry, PhysicalAddress};
use crate::error::{Error, Result};
use crate::sanitizer::{
    block_erase, calibrate_ddp, run_destroy, verify_destruction, DestroyOptions, SanitizeScheme, Targets,
};
use crate::sim::{RunConfig, ScramblerMode, Simulator};

#[derive(Parser, Debug)]
#[command(name = "nandscrub", version, about = "TLC NAND flash simulator with in-place privacy data destruction")]
pub struct Cli {
    /// Device dump file carried between invocations.
    #[arg(long, global = true, default_value = "device.json")]
    pub device: PathBuf,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Create a fresh, fully erased device.
    Init(InitArgs),
    /// Host write of an ASCII payload to a logical page.
    Write {
        #[arg(long)]
        lpn: u64,
        #[arg(long)]
        text: String,
        #[arg(long)]
        privacy: bool,
    },
    /// Out-of-place update of a mapped logical page.
    Update {
        #[arg(long)]
        lpn: u64,
        #[arg(long)]
        text: String,
    },
    /// Read a logical page back as text.
    Read {
        #[arg(long)]
        lpn: u64,
    },
    /// Garbage-collect victim blocks without erasing them.
    Gc {
        #[arg(long, value_delimiter = ',')]
        victims: Vec<u32>,
        /// Pick this many victims greedily instead.
        #[arg(long, conflicts_with = "victims")]
        greedy: Option<usize>,
    },
    /// Run the background erase policy.
    BgErase {
        #[arg(long)]
        threshold: Option<usize>,
    },
    /// Conventional block erase of blocks holding no valid page.
    Erase {
        #[arg(long, value_delimiter = ',', required = true)]
        blocks: Vec<u32>,
    },
    /// Destroy residual privacy data in place.
    Sanitize(SanitizeArgs),
    /// Forensic scan of every page for a payload.
    Scan {
        #[arg(long)]
        payload: String,
    },
    /// Check that a payload no longer survives in unmapped pages.
    Verify {
        #[arg(long)]
        payload: String,
        /// Also fail on hits in mapped pages.
        #[arg(long)]
        strict: bool,
    },
    /// Wear and destruction-time comparison table.
    Costs(CostsArgs),
    /// Smallest DDP pulse count that defeats the ECC.
    Calibrate(CalibrateArgs),
    /// Per-block wear counters.
    Wear,
    /// Print the device dump.
    Dump,
    /// Re-execute an op log from a fresh default device.
    Replay {
        oplog: PathBuf,
        /// Write the final dump here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct InitArgs {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub blocks: Option<u32>,
    #[arg(long)]
    pub pages: Option<u32>,
    #[arg(long)]
    pub cells: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub scrambler: Option<ScramblerMode>,
    #[arg(long)]
    pub ecc_t: Option<u32>,
}

#[derive(Args, Debug)]
pub struct SanitizeArgs {
    /// po | fold | slc | ddp
    #[arg(long)]
    pub scheme: String,
    /// Reference state for fold and slc.
    #[arg(long = "ref")]
    pub reference: Option<CellState>,
    /// DDP pulse count, or `auto` to calibrate against the ECC.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub p_adv: Option<f64>,
    /// Explicit pages as block:page; default is every flagged invalid page.
    #[arg(long, value_delimiter = ',')]
    pub pages: Vec<String>,
    /// Show the bit and state rows of each treated page.
    #[arg(long)]
    pub explain: bool,
}

#[derive(Args, Debug)]
pub struct CostsArgs {
    #[arg(long)]
    pub scenario: Scenario,
    #[arg(long = "M", default_value_t = 0)]
    pub m: u64,
    #[arg(long = "N", default_value_t = 0)]
    pub n: u64,
    #[arg(long, value_delimiter = ',')]
    pub schemes: Vec<CostScheme>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub t_pgm: Option<f64>,
    #[arg(long)]
    pub t_rdg: Option<f64>,
    #[arg(long)]
    pub t_sdg: Option<f64>,
    #[arg(long)]
    pub t_pow: Option<f64>,
    #[arg(long)]
    pub t_slcp: Option<f64>,
    #[arg(long)]
    pub t_ddp: Option<f64>,
    #[arg(long)]
    pub t_oneshot: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 16)]
    pub cells: usize,
    #[arg(long, default_value_t = 4)]
    pub t: u32,
    #[arg(long, default_value_t = 0.5)]
    pub p_adv: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub target: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl CostsArgs {
    fn params(&self) -> Result<CostParams> {
        let d = CostParams::default();
        let p = CostParams {
            a: self.a.unwrap_or(d.a),
            b: self.b.unwrap_or(d.b),
            t_pgm: self.t_pgm.unwrap_or(d.t_pgm),
            t_rdg: self.t_rdg.unwrap_or(d.t_rdg),
            t_sdg: self.t_sdg.unwrap_or(d.t_sdg),
            t_pow: self.t_pow.unwrap_or(d.t_pow),
            t_slcp: self.t_slcp.unwrap_or(d.t_slcp),
            t_ddp: self.t_ddp.unwrap_or(d.t_ddp),
            t_oneshot: self.t_oneshot.unwrap_or(d.t_oneshot),
            t_erase: None,
        };
        p.validate()?;
        Ok(p)
    }
}

fn parse_addr(s: &str) -> Result<PhysicalAddress> {
    let (b, p) = s.split_once(':').ok_or_else(|| Error::Parse(format!("expected block:page, got {s:?}")))?;
    let num = |x: &str| x.trim().parse::<u32>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    Ok(PhysicalAddress::new(num(b)?, num(p)?))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn require(sim: &mut Option<Simulator>) -> Result<&mut Simulator> {
    sim.as_mut().ok_or_else(|| Error::InvalidConfig("no device; run `init` first".into()))
}

fn init_config(args: &InitArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_json(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    let g = cfg.geometry;
    cfg.geometry = Geometry::new(
        args.blocks.unwrap_or(g.num_blocks),
        args.pages.unwrap_or(g.pages_per_block),
        args.cells.unwrap_or(g.cells_per_page),
    )?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = args.scrambler {
        cfg.scrambler = mode;
    }
    if let Some(t) = args.ecc_t {
        cfg.ecc.t = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sanitize_scheme(sim: &Simulator, args: &SanitizeArgs) -> Result<SanitizeScheme> {
    let mut ddp = sim.config.ddp;
    if let Some(p) = args.p_adv {
        ddp.p_adv = p;
    }
    match args.k.as_deref() {
        None => {}
        Some("auto") => {
            ddp.k = calibrate_ddp(
                sim.config.geometry.cells_per_page as usize,
                sim.config.ecc.t,
                ddp.p_adv,
                sim.config.ddp_target_fail_prob,
                sim.config.seed,
            )?;
        }
        Some(k) => ddp.k = k.parse().map_err(|e| Error::Parse(format!("--k {k:?}: {e}")))?,
    }
    let reference = args.reference.or(match args.scheme.as_str() {
        "fold" | "po-fold" => Some(sim.config.fold_reference),
        "slc" => Some(sim.config.slc_reference),
        _ => None,
    });
    SanitizeScheme::from_name(&args.scheme, reference, ddp)
}

struct Snapshot {
    addr: PhysicalAddress,
    payload: Option<BitString>,
    before: Vec<CellState>,
}

fn states_row(states: &[CellState]) -> String {
    states.iter().map(|s| s.name()).collect::<Vec<_>>().join(" ")
}

fn explain(out: &mut String, sim: &Simulator, snaps: &[Snapshot]) {
    for s in snaps {
        let after = sim.device.read_page(s.addr).map(|p| p.to_vec()).unwrap_or_default();
        let used = match &s.payload {
            Some(bits) => bits.len().div_ceil(3),
            None => s.before.len(),
        };
        let before = &s.before[..used];
        let after = &after[..used.min(after.len())];
        let _ = writeln!(out, "page {}", s.addr);
        if let Some(bits) = &s.payload {
            let _ = writeln!(out, "  Payload   {}", bits_to_text(bits).unwrap_or_else(|_| bits.to_string()));
            let _ = writeln!(out, "  Binary Bits ({})   {bits}", bits.len());
        }
        let raw = states_to_bits(before);
        let _ = writeln!(out, "  Random Bits ({})   {raw}", raw.len());
        let _ = writeln!(out, "  State Mapping ({})   {}", before.len(), states_row(before));
        let over: Vec<String> = before
            .iter()
            .map(|st| match overwritable_states(*st).as_slice() {
                [] => "-".to_string(),
                [one] => one.to_string(),
                [first, .., last] => format!("{first}-{last}"),
            })
            .collect();
        let _ = writeln!(out, "  Partial Overwritable States ({})   {}", before.len(), over.join(" "));
        let _ = writeln!(out, "  Selected State ({})   {}", after.len(), states_row(after));
        let po = states_to_bits(after);
        let _ = writeln!(out, "  PO Bits ({})   {po}", po.len());
    }
}

/// Runs one subcommand against `sim`. Returns the text to print.
pub fn execute(command: &Command, sim: &mut Option<Simulator>, as_json: bool) -> Result<String> {
    let mut out = String::new();
    match command {
        Command::Init(args) => {
            let s = Simulator::new(init_config(args)?)?;
            for w in s.config.cost.warnings() {
                let _ = writeln!(out, "warning: {w}");
            }
            let g = s.config.geometry;
            if !as_json {
                let _ = writeln!(
                    out,
                    "initialized {} blocks x {} pages x {} cells, seed {}",
                    g.num_blocks, g.pages_per_block, g.cells_per_page, s.config.seed
                );
            } else {
                out = json(&s.config);
            }
            *sim = Some(s);
        }
        Command::Write { lpn, text, privacy } => {
            let s = require(sim)?;
            let addr = s.ftl.write_logical(&mut s.device, *lpn, &text_to_bits(text)?, *privacy)?;
            out = if as_json { json(&addr) } else { format!("lpn {lpn} -> {addr}\n") };
        }
        Command::Update { lpn, text } => {
            let s = require(sim)?;
            let addr = s.ftl.update_logical(&mut s.device, *lpn, &text_to_bits(text)?)?;
            out = if as_json { json(&addr) } else { format!("lpn {lpn} -> {addr}\n") };
        }
        Command::Read { lpn } => {
            let s = require(sim)?;
            let text = bits_to_text(&s.ftl.read_logical(&s.device, *lpn)?)?;
            out = if as_json { json(&text) } else { format!("{text}\n") };
        }
        Command::Gc { victims, greedy } => {
            let s = require(sim)?;
            let victims = match greedy {
                Some(n) => s.ftl.select_victims_greedy(*n),
                None => victims.clone(),
            };
            let rep = s.ftl.garbage_collect(&mut s.device, &victims)?;
            out = if as_json {
                json(&rep)
            } else {
                format!(
                    "gc victims {:?} -> {:?}: moved {} valid, left {} invalid (no erase)\n",
                    rep.victims, rep.destination, rep.moved, rep.residual
                )
            };
        }
        Command::BgErase { threshold } => {
            let s = require(sim)?;
            let th = threshold.unwrap_or(s.config.erase_threshold);
            let erased = s.ftl.background_erase(&mut s.device, th)?;
            out = if as_json { json(&erased) } else { format!("erased blocks {erased:?}\n") };
        }
        Command::Erase { blocks } => {
            let s = require(sim)?;
            let erased = block_erase(&mut s.ftl, &mut s.device, blocks)?;
            out = if as_json { json(&erased) } else { format!("erased blocks {erased:?}\n") };
        }
        Command::Sanitize(args) => {
            let s = require(sim)?;
            let scheme = sanitize_scheme(s, args)?;
            let targets = if args.pages.is_empty() {
                Targets::AllPrivacy
            } else {
                Targets::Addresses(args.pages.iter().map(|p| parse_addr(p)).collect::<Result<_>>()?)
            };
            let addrs = match &targets {
                Targets::AllPrivacy => s.ftl.invalid_privacy_pages(),
                Targets::Addresses(a) => a.clone(),
            };
            let mut snaps = Vec::new();
            if args.explain {
                for addr in addrs {
                    let payload = s.ftl.read_registry_payload(&s.device, addr)?;
                    snaps.push(Snapshot { addr, payload, before: s.device.read_page(addr)?.to_vec() });
                }
            }
            let opts = DestroyOptions { cost: s.config.cost, max_passes: s.config.max_passes };
            let report = run_destroy(&mut s.ftl, &mut s.device, &scheme, &targets, &opts)?;
            if as_json {
                out = json(&report);
            } else {
                if args.explain {
                    explain(&mut out, s, &snaps);
                }
                for p in &report.pages {
                    let _ = writeln!(
                        out,
                        "{}:{} pulses {} programs {} {}",
                        p.block,
                        p.page,
                        p.pulses,
                        p.programs,
                        if p.verified { "verified" } else { "FAILED" }
                    );
                }
                let _ = writeln!(out, "treated {} page(s), model time {}", report.pages.len(), report.model_time);
            }
            let failed = report.failed_pages();
            if !failed.is_empty() {
                return Err(Error::VerificationFailed { pages: failed });
            }
        }
        Command::Scan { payload } | Command::Verify { payload, .. } => {
            let s = require(sim)?;
            let outcome = verify_destruction(&s.ftl, &s.device, &text_to_bits(payload)?);
            if as_json {
                out = json(&outcome);
            } else {
                for h in &outcome.locations {
                    let _ = writeln!(
                        out,
                        "hit {}:{} {}{}{}",
                        h.block,
                        h.page,
                        if h.mapped { "mapped" } else { "unmapped" },
                        if h.raw { " raw" } else { "" },
                        if h.descrambled { " descrambled" } else { "" }
                    );
                }
                let _ = writeln!(
                    out,
                    "hits {} (mapped {}, unmapped {})",
                    outcome.locations.len(),
                    outcome.mapped_hits(),
                    outcome.unmapped_hits()
                );
            }
            if let Command::Verify { strict, .. } = command {
                let bad = if *strict { outcome.locations.len() } else { outcome.unmapped_hits() };
                if bad > 0 {
                    let pages = outcome
                        .locations
                        .iter()
                        .filter(|h| *strict || !h.mapped)
                        .map(|h| PhysicalAddress::new(h.block, h.page))
                        .collect();
                    return Err(Error::VerificationFailed { pages });
                }
            }
        }
        Command::Costs(args) => {
            let params = args.params()?;
            let schemes = if args.schemes.is_empty() { CostScheme::ALL.to_vec() } else { args.schemes.clone() };
            let rows = compare(args.scenario, &schemes, args.m, args.n, &params);
            out = if as_json { json(&rows) } else { render_table(&rows) };
        }
        Command::Calibrate(args) => {
            let k = calibrate_ddp(args.cells, args.t, args.p_adv, args.target, args.seed)?;
            let params = DdpParams::new(args.p_adv, k)?;
            out = if as_json { json(&params) } else { format!("k_min {k}\n") };
        }
        Command::Wear => {
            let s = require(sim)?;
            let rows = s.device.wear_report(&s.config.cost);
            if as_json {
                out = json(&rows);
            } else {
                let _ = writeln!(out, "block  pgm_count  erase_count  degradation");
                for r in rows {
                    let _ =
                        writeln!(out, "{:<5}  {:<9}  {:<11}  {}", r.block, r.pgm_count, r.erase_count, r.degradation);
                }
            }
        }
        Command::Dump => {
            out = require(sim)?.to_json();
        }
        Command::Replay { .. } => {
            return Err(Error::InvalidConfig("replay cannot be nested".into()));
        }
    }
    Ok(out)
}

fn mutates(command: &Command) -> bool {
    matches!(
        command,
        Command::Write { .. }
            | Command::Update { .. }
            | Command::Gc { .. }
            | Command::BgErase { .. }
            | Command::Erase { .. }
            | Command::Sanitize(_)
    )
}

/// Replays an op log against a fresh default device and returns the final
/// dump. Blank lines and `#` comments are skipped.
pub fn replay(log: &str) -> Result<Simulator> {
    let mut sim = Some(Simulator::new(RunConfig::default())?);
    for (i, line) in log.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let words = shlex::split(line)
            .ok_or_else(|| Error::ParseLine { line: line_no, message: "unbalanced quotes".into() })?;
        let cli = Cli::try_parse_from(std::iter::once("nandscrub".to_string()).chain(words))
            .map_err(|e| Error::ParseLine { line: line_no, message: e.kind().to_string() + ": " + line })?;
        execute(&cli.command, &mut sim, false)
            .map_err(|e| Error::ParseLine { line: line_no, message: e.to_string() })?;
    }
    sim.ok_or_else(|| Error::InvalidConfig("replay produced no device".into()))
}

struct DeviceLock(PathBuf);

impl DeviceLock {
    fn acquire(device: &Path) -> Result<Self> {
        let path = PathBuf::from(format!("{}.lock", device.display()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DeviceLock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(device.display().to_string())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DeviceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn save(path: &Path, sim: &Simulator) -> Result<()> {
    let tmp = PathBuf::from(format!("{}.tmp", path.display()));
    fs::write(&tmp, sim.to_json())?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn run_cli(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Replay { oplog, out } => {
            let sim = replay(&fs::read_to_string(oplog)?)?;
            match out {
                Some(path) => fs::write(path, sim.to_json())?,
                None => stdout.write_all(sim.to_json().as_bytes())?,
            }
            Ok(())
        }
        Command::Costs(_) | Command::Calibrate(_) => {
            let text = execute(&cli.command, &mut None, cli.json)?;
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
        Command::Init(_) => {
            let _lock = DeviceLock::acquire(&cli.device)?;
            let mut sim = None;
            let text = execute(&cli.command, &mut sim, cli.json)?;
            if let Some(s) = &sim {
                save(&cli.device, s)?;
            }
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
        command => {
            let _lock = DeviceLock::acquire(&cli.device)?;
            let mut sim = Some(Simulator::from_json(&fs::read_to_string(&cli.device)?)?);
            let result = execute(command, &mut sim, cli.json);
            // A sanitize that fails verification has still changed the device.
            let changed =
                mutates(command) && (result.is_ok() || matches!(result, Err(Error::VerificationFailed { .. })));
            if changed {
                if let Some(s) = &sim {
                    save(&cli.device, s)?;
                }
            }
            match result {
                Ok(text) => {
                    stdout.write_all(text.as_bytes())?;
                    Ok(())
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run_cli(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}
