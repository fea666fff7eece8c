//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nandscrub::cell::{
    bits_to_state, code_distance, overwritable_states, state_to_bits, CellState, DdpParams, ProgramMode,
};
use nandscrub::codec::{
    bits_to_states, decode_bits, decode_payload, encode_payload, scramble, states_to_bits, text_to_bits, ScramblerKey,
};
use nandscrub::cost::{gc_case, update_case, CostParams, CostScheme, DestructionTime, Tally};
use nandscrub::device::{ecc_correctable, Device, EccParams, Geometry, PhysicalAddress};
use nandscrub::ftl::Ftl;
use nandscrub::sanitizer::{
    block_erase, calibrate_ddp, ddp_page, destroy, partial_overwrite_page, slc_fold_page, verify_destruction,
    DestroyOptions, PoMode, SanitizeScheme, Targets,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use CellState::*;

// Pinned limits.
const C1_TIME: Duration = Duration::from_secs(1);
const C3_TRIALS: u64 = 1000;
const C3_TIME: Duration = Duration::from_secs(60);
const C4_OPS: usize = 100_000;
const C5_SETS: usize = 100;
const C6_POINTS: [u64; 4] = [1, 999, 1000, 1001];
const C7_FIXTURE_K: u32 = 3;
const C7_TARGET: f64 = 1e-4;
const C7_TRIALS: usize = 10_000;
const C7_Z95: f64 = 1.96;
const C7_TIME: Duration = Duration::from_secs(30);
const C8_STRINGS: usize = 10_000;
const C8_SEEDS: u64 = 10_000;
const C8_BALANCE_TOL: f64 = 0.02;
const C9_OPS: usize = 50;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_worked_example() -> Outcome {
    let start = Instant::now();
    let binary = "001101100011011000110001001100000011000000110100";
    let random = "110110001101100011000100110000001100000011010000";
    let mapping = [P5, P5, P2, P7, P6, P1, P3, P6, P5, P3, P2, P6, P3, P1, P4, P3];
    let selected = [P6, P7, P3, P7, P7, P4, P5, P7, P6, P4, P5, P7, P5, P2, P5, P4];
    let po_bits = "100101000101101010110101100010110101110001110010";

    let bits = text_to_bits("661004").map_err(|e| e.to_string())?;
    check(bits.to_string() == binary, || format!("binary bits {bits}"))?;
    let scrambled = scramble(&bits, ScramblerKey::Shift2);
    check(scrambled.to_string() == random, || format!("random bits {scrambled}"))?;
    let states = bits_to_states(&scrambled).map_err(|e| e.to_string())?;
    check(states == mapping, || format!("state mapping {states:?}"))?;
    let po = states_to_bits(&selected);
    check(po.to_string() == po_bits, || format!("PO bits {po}"))?;
    let enc = encode_payload("661004", ScramblerKey::Shift2).map_err(|e| e.to_string())?;
    check(enc == mapping, || "encode_payload(shift2) differs from the state mapping row".into())?;
    let elapsed = start.elapsed();
    check(elapsed < C1_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!("4 rows exact in {elapsed:?}"))
}

fn c2_state_map() -> Outcome {
    let codes: BTreeSet<[u8; 3]> = CellState::ALL.iter().map(|s| state_to_bits(*s)).collect();
    check(codes.len() == 8, || "codes are not distinct".into())?;
    for s in CellState::ALL {
        check(bits_to_state(state_to_bits(s)) == s, || format!("{s} does not round-trip"))?;
    }
    for w in CellState::ALL.windows(2) {
        check(code_distance(w[0], w[1]) == 1, || format!("{} -> {} is not a 1-bit step", w[0], w[1]))?;
    }
    for (k, s) in CellState::ALL.iter().enumerate() {
        let over = overwritable_states(*s);
        let expect: Vec<CellState> = CellState::ALL[k + 1..].to_vec();
        check(over == expect && over.len() == 7 - k, || format!("overwritable({s}) = {over:?}"))?;
    }
    check(overwritable_states(P4) == vec![P5, P6, P7], || "P4 overwritable set".into())?;
    Ok("bijection, Gray steps and overwritable sets hold".into())
}

fn printable(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| rng.random_range(0x20u8..0x7f) as char).collect()
}

fn c3_residual_and_destruction() -> Outcome {
    let start = Instant::now();
    let g = Geometry::new(3, 4, 16).unwrap();
    let ecc = EccParams::default();
    let k = calibrate_ddp(16, ecc.t, 0.5, C7_TARGET, 0).map_err(|e| e.to_string())?;
    let schemes = [
        SanitizeScheme::PartialOverwriteRandom,
        SanitizeScheme::PartialOverwriteFold { reference: P5 },
        SanitizeScheme::SlcFold { reference: P4 },
        SanitizeScheme::Ddp { params: DdpParams::new(0.5, k).unwrap() },
    ];
    let opts = DestroyOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut passes = [0u64; 4];
    for trial in 0..C3_TRIALS {
        let seed: u64 = rng.random();
        let text = printable(&mut rng, 6);
        let payload = text_to_bits(&text).unwrap();
        let mut dev = Device::new(g, seed).unwrap();
        let mut ftl = Ftl::new(g, ScramblerKey::XorKeystream { seed });
        let e = |e: nandscrub::Error| format!("trial {trial}: {e}");
        ftl.write_logical(&mut dev, 0, &payload, true).map_err(e)?;
        ftl.write_logical(&mut dev, 1, &text_to_bits("filler").unwrap(), false).map_err(e)?;
        ftl.garbage_collect(&mut dev, &[0]).map_err(e)?;
        let before = verify_destruction(&ftl, &dev, &payload);
        check(before.locations.len() >= 2 && before.mapped_hits() == 1, || {
            format!(
                "trial {trial} ({text:?}): {} hits, {} mapped before destroy",
                before.locations.len(),
                before.mapped_hits()
            )
        })?;

        for (i, scheme) in schemes.iter().enumerate() {
            let (mut f, mut d) = (ftl.clone(), dev.clone());
            let erases: Vec<u64> = d.blocks().iter().map(|b| b.erase_count).collect();
            let report = destroy(&mut f, &mut d, scheme, &Targets::AllPrivacy, &opts)
                .map_err(|err| format!("trial {trial} {scheme:?}: {err}"))?;
            let after = verify_destruction(&f, &d, &payload);
            check(after.unmapped_hits() == 0, || {
                format!("trial {trial} {scheme:?}: {} unmapped hits", after.unmapped_hits())
            })?;
            check(!report.pages.is_empty(), || format!("trial {trial} {scheme:?}: nothing treated"))?;
            for p in &report.pages {
                let addr = PhysicalAddress::new(p.block, p.page);
                let decoded = decode_bits(d.read_page(addr).unwrap(), f.page_key(addr), payload.len()).unwrap();
                check(decoded != payload, || format!("trial {trial} {scheme:?}: {addr} still decodes"))?;
            }
            let now: Vec<u64> = d.blocks().iter().map(|b| b.erase_count).collect();
            check(now == erases, || format!("trial {trial} {scheme:?}: erase count changed"))?;
            passes[i] += 1;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < C3_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!("{C3_TRIALS} payloads x 4 schemes (ddp k={k}) clean, passes {passes:?}, {elapsed:?}"))
}

fn ordinals(dev: &Device) -> Vec<u8> {
    dev.blocks().iter().flat_map(|b| b.pages.iter().flatten().map(|s| s.ordinal())).collect()
}

fn erase_counts(dev: &Device) -> Vec<u64> {
    dev.blocks().iter().map(|b| b.erase_count).collect()
}

fn random_state(rng: &mut ChaCha8Rng) -> CellState {
    CellState::ALL[rng.random_range(0..8)]
}

fn c4_monotonicity_and_erase() -> Outcome {
    let g = Geometry::new(4, 8, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut ops = 0usize;
    let mut rejected = 0usize;

    // Raw device operations.
    let mut dev = Device::new(g, 1).unwrap();
    while ops < C4_OPS / 2 {
        if ops.is_multiple_of(500) {
            dev = Device::new(g, ops as u64).unwrap();
        }
        let before = ordinals(&dev);
        let erases = erase_counts(&dev);
        let addr = PhysicalAddress::new(rng.random_range(0..g.num_blocks), rng.random_range(0..g.pages_per_block));
        let cur = dev.read_page(addr).unwrap().to_vec();
        match rng.random_range(0..6) {
            0 => {
                let targets: Vec<CellState> = cur.iter().map(|&c| c.max(random_state(&mut rng))).collect();
                let mode = if rng.random_bool(0.5) { ProgramMode::Normal } else { ProgramMode::PartialOverwrite };
                dev.program_page(addr, &targets, mode).unwrap();
            }
            1 => {
                let targets: Vec<CellState> = cur.iter().map(|_| random_state(&mut rng)).collect();
                if dev.program_page(addr, &targets, ProgramMode::Normal).is_err() {
                    rejected += 1;
                }
            }
            2 => {
                let ddp = DdpParams::new(rng.random_range(0.05..=1.0), rng.random_range(1..5)).unwrap();
                let mut r = dev.next_rng();
                ddp_page(&mut dev, addr, &ddp, &mut r).unwrap();
            }
            3 => {
                let mut r = dev.next_rng();
                partial_overwrite_page(&mut dev, addr, PoMode::Random, &mut r).unwrap();
            }
            4 => {
                let reference = CellState::ALL[rng.random_range(1..8)];
                let mut r = dev.next_rng();
                partial_overwrite_page(&mut dev, addr, PoMode::Fold(reference), &mut r).unwrap();
            }
            _ => {
                let reference = CellState::ALL[rng.random_range(1..8)];
                let mut r = dev.next_rng();
                slc_fold_page(&mut dev, addr, reference, &mut r).unwrap();
            }
        }
        ops += 1;
        let after = ordinals(&dev);
        check(before.iter().zip(&after).all(|(a, b)| b >= a), || format!("op {ops}: an ordinal decreased"))?;
        check(erase_counts(&dev) == erases, || format!("op {ops}: erase count changed"))?;
    }

    // FTL workloads with destroy requests; a full device starts a new workload.
    let schemes = [
        SanitizeScheme::PartialOverwriteRandom,
        SanitizeScheme::PartialOverwriteFold { reference: P5 },
        SanitizeScheme::SlcFold { reference: P4 },
        SanitizeScheme::Ddp { params: DdpParams::default() },
    ];
    let opts = DestroyOptions::default();
    let mut workloads = 0;
    let mut unverified = 0;
    let fresh = |n: u64| (Device::new(g, n).unwrap(), Ftl::new(g, ScramblerKey::XorKeystream { seed: n }));
    let (mut dev, mut ftl) = fresh(0);
    while ops < C4_OPS {
        let before = ordinals(&dev);
        let lpn = rng.random_range(0..12u64);
        let len = rng.random_range(1..7);
        let text = printable(&mut rng, len);
        let bits = text_to_bits(&text).unwrap();
        let res = match rng.random_range(0..10) {
            0..=3 => ftl.write_logical(&mut dev, lpn, &bits, rng.random_bool(0.5)).map(|_| ()),
            4..=6 => match ftl.mapping(lpn) {
                Some(_) => ftl.update_logical(&mut dev, lpn, &bits).map(|_| ()),
                None => Ok(()),
            },
            7 => {
                let victims = ftl.select_victims_greedy(rng.random_range(1..3));
                ftl.garbage_collect(&mut dev, &victims).map(|_| ())
            }
            _ => {
                let scheme = schemes[rng.random_range(0..4)];
                destroy(&mut ftl, &mut dev, &scheme, &Targets::AllPrivacy, &opts).map(|_| ())
            }
        };
        ops += 1;
        let after = ordinals(&dev);
        check(before.iter().zip(&after).all(|(a, b)| b >= a), || format!("ftl op {ops}: an ordinal decreased"))?;
        check(dev.total_erase_count() == 0, || format!("ftl op {ops}: erase performed"))?;
        match res {
            Ok(()) => {}
            // Fold and SLC cannot move cells already at or above the
            // reference, so short payloads may survive; verification says so.
            Err(nandscrub::Error::VerificationFailed { .. }) => unverified += 1,
            Err(nandscrub::Error::DeviceFull | nandscrub::Error::InsufficientFree(_)) => {
                workloads += 1;
                (dev, ftl) = fresh(workloads);
            }
            Err(e) => return Err(format!("ftl op {ops}: {e}")),
        }
    }

    // Block-erase flow: +1 per victim, nothing else.
    let (mut dev, mut ftl) = fresh(99);
    for lpn in 0..8 {
        ftl.write_logical(&mut dev, lpn, &text_to_bits("secret").unwrap(), true).unwrap();
    }
    for lpn in 0..8 {
        ftl.update_logical(&mut dev, lpn, &text_to_bits("public").unwrap()).unwrap();
    }
    ftl.garbage_collect(&mut dev, &[0]).map_err(|e| e.to_string())?;
    let before = erase_counts(&dev);
    let erased = block_erase(&mut ftl, &mut dev, &[0]).map_err(|e| e.to_string())?;
    let after = erase_counts(&dev);
    let expect: Vec<u64> =
        before.iter().enumerate().map(|(b, c)| c + u64::from(erased.contains(&(b as u32)))).collect();
    check(erased == vec![0] && after == expect, || format!("block erase {erased:?}: {before:?} -> {after:?}"))?;
    check(block_erase(&mut ftl, &mut dev, &[1]).is_err(), || "erased a block holding valid pages".into())?;

    Ok(format!("{ops} ops, {rejected} downward programs rejected, {workloads} FTL workloads ({unverified} destroys left short payloads), block erase +1"))
}

// Hand-written formula table, kept separate from the cost module.
struct Oracle {
    pgm: Option<u64>,
    erase: Option<u64>,
    degradation: Option<f64>,
    time: Option<f64>,
    lower_bound: Option<f64>,
}

fn oracle_gc(s: &str, m: f64, n: u64, p: &CostParams) -> Oracle {
    let nf = n as f64;
    let (pgm, erase, deg, time, lb) = match s {
        "block_erase" => (Some(0), Some(1), Some(p.a), None, Some(m * p.t_pgm)),
        "lin" => (None, None, None, None, None),
        "po" => (Some(n), Some(0), Some(p.b * nf), Some(m * p.t_pgm + nf * p.t_rdg + p.t_pow), None),
        "slc" => (Some(n), Some(0), Some(p.b * nf), Some(m * p.t_pgm + nf * p.t_sdg + p.t_slcp), None),
        "ddp" => (Some(n), Some(0), Some(p.b * nf), Some(m * p.t_pgm + nf * p.t_ddp), None),
        _ => unreachable!(),
    };
    Oracle { pgm, erase, degradation: deg, time, lower_bound: lb }
}

fn oracle_update(s: &str, m: f64, p: &CostParams) -> Oracle {
    let (pgm, erase, deg, time) = match s {
        "block_erase" => (0, 1, p.a, None),
        "lin" => (1, 0, p.b, Some(m * p.t_pgm + p.t_oneshot)),
        "po" => (1, 0, p.b, Some(m * p.t_pgm + p.t_rdg + p.t_pow)),
        "slc" => (1, 0, p.b, Some(m * p.t_pgm + p.t_sdg + p.t_slcp)),
        "ddp" => (1, 0, p.b, Some(m * p.t_pgm + p.t_ddp)),
        _ => unreachable!(),
    };
    Oracle { pgm: Some(pgm), erase: Some(erase), degradation: Some(deg), time, lower_bound: None }
}

fn matches(r: &nandscrub::CostReport, o: &Oracle) -> bool {
    let (time, lb) = match r.destruction_time {
        DestructionTime::Exact { value } => (Some(value), None),
        DestructionTime::PolicyDependent { lower_bound } => (None, lower_bound),
        DestructionTime::NotApplicable => (None, None),
    };
    r.pgm_count.value() == o.pgm
        && r.erase_count.value() == o.erase
        && r.degradation.value() == o.degradation
        && time == o.time
        && lb == o.lower_bound
}

fn c5_cost_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let names = ["block_erase", "lin", "po", "slc", "ddp"];
    for set in 0..C5_SETS {
        // Integer-valued inputs keep every sum exact in f64.
        let mut int = |lo: u32, hi: u32| f64::from(rng.random_range(lo..hi));
        let b = int(1, 10);
        let p = CostParams {
            a: 1000.0 * b,
            b,
            t_pgm: int(1, 2000),
            t_rdg: int(1, 200),
            t_sdg: int(1, 200),
            t_pow: int(1, 2000),
            t_slcp: int(1, 2000),
            t_ddp: int(1, 500),
            t_oneshot: int(1, 3000),
            t_erase: None,
        };
        let m = rng.random_range(0..2000u64);
        let n = rng.random_range(0..2000u64);
        for name in names {
            let scheme: CostScheme = name.parse().map_err(|e: nandscrub::Error| e.to_string())?;
            let g = gc_case(scheme, m, n, &p);
            check(matches(&g, &oracle_gc(name, m as f64, n, &p)), || format!("set {set} gc {name}: {g:?}"))?;
            let u = update_case(scheme, m, &p);
            check(matches(&u, &oracle_update(name, m as f64, &p)), || format!("set {set} update {name}: {u:?}"))?;
            if let (Some(t0), Some(t1)) =
                (g.destruction_time.value(), gc_case(scheme, m + 1, n, &p).destruction_time.value())
            {
                check(t1 - t0 == p.t_pgm, || format!("set {set} {name}: time not linear in M"))?;
            }
        }
    }
    let spot = CostParams { t_pgm: 200.0, t_rdg: 10.0, t_pow: 400.0, t_oneshot: 300.0, ..CostParams::default() };
    let po = gc_case(CostScheme::PartialOverwrite, 4, 6, &spot).destruction_time.value();
    check(po == Some(1260.0), || format!("PO gc time {po:?}"))?;
    let lin = update_case(CostScheme::Lin, 4, &spot).destruction_time.value();
    check(lin == Some(1100.0), || format!("Lin update time {lin:?}"))?;
    for b in [1.0, 2.5, 7.0] {
        let p = CostParams { a: 1000.0 * b, b, ..CostParams::default() };
        let d = gc_case(CostScheme::BlockErase, 3, 5, &p).degradation;
        check(d == Tally::Exact(1000.0 * b), || format!("block erase degradation {d:?} at b={b}"))?;
    }
    Ok(format!("{C5_SETS} parameter sets x 5 schemes x 2 scenarios agree; 1260, 1100, 1000b"))
}

fn c6_crossover() -> Outcome {
    let p = CostParams::default();
    check(p.a == 1000.0 * p.b, || "defaults are not a = 1000b".into())?;
    for n in C6_POINTS {
        let erase = gc_case(CostScheme::BlockErase, 0, n, &p).degradation.value().unwrap();
        for s in [CostScheme::PartialOverwrite, CostScheme::Slc, CostScheme::Ddp] {
            let d = gc_case(s, 0, n, &p).degradation.value().unwrap();
            check((d < erase) == (n < 1000), || format!("N={n} {}: {d} vs {erase}", s.name()))?;
        }
    }
    Ok(format!("proposed < block erase exactly for N < 1000 at N in {C6_POINTS:?}"))
}

fn c7_ddp_calibration() -> Outcome {
    let start = Instant::now();
    let ecc = EccParams { t: 4 };
    let k = calibrate_ddp(16, ecc.t, 0.5, C7_TARGET, 0).map_err(|e| e.to_string())?;
    check(k == C7_FIXTURE_K, || format!("k_min {k}, fixture {C7_FIXTURE_K}"))?;
    let ddp = DdpParams::new(0.5, k).unwrap();

    let g = Geometry::new(1, 1, 16).unwrap();
    let addr = PhysicalAddress::new(0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut correctable = 0usize;
    for trial in 0..C7_TRIALS {
        let mut dev = Device::new(g, trial as u64).unwrap();
        let page = loop {
            let page: Vec<CellState> = (0..16).map(|_| random_state(&mut rng)).collect();
            if page.iter().any(|s| *s != P7) {
                break page;
            }
        };
        dev.program_page(addr, &page, ProgramMode::Normal).unwrap();
        ddp_page(&mut dev, addr, &ddp, &mut rng).unwrap();
        if ecc_correctable(&page, dev.read_page(addr).unwrap(), &ecc).unwrap() {
            correctable += 1;
        }
    }
    let n = C7_TRIALS as f64;
    let frac = correctable as f64 / n;
    let bound = C7_TARGET + C7_Z95 * (C7_TARGET * (1.0 - C7_TARGET) / n).sqrt();
    check(frac <= bound, || format!("correctable fraction {frac} > {bound}"))?;

    let trivial = calibrate_ddp(16, 0, 1.0, C7_TARGET, 0).map_err(|e| e.to_string())?;
    check(trivial == 1, || format!("trivial case gave {trivial}"))?;
    check(calibrate_ddp(16, 48, 0.5, C7_TARGET, 0).is_err(), || "t = 3 x cells should be unreachable".into())?;
    let elapsed = start.elapsed();
    check(elapsed < C7_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!("k_min {k}; {correctable}/{C7_TRIALS} correctable (bound {bound:.2e}); trivial k 1; {elapsed:?}"))
}

fn c8_codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    for i in 0..C8_STRINGS {
        let len = rng.random_range(0..40);
        let text = printable(&mut rng, len);
        let key = ScramblerKey::XorKeystream { seed: rng.random() };
        let key = key.for_page(PhysicalAddress::new(rng.random_range(0..64), rng.random_range(0..64)));
        let states = encode_payload(&text, key).map_err(|e| e.to_string())?;
        let back = decode_payload(&states, key).map_err(|e| e.to_string())?;
        check(back == text, || format!("string {i}: {text:?} -> {back:?}"))?;
    }
    let constant = text_to_bits("AAAAAAAA").unwrap();
    let (mut ones, mut total) = (0usize, 0usize);
    for seed in 0..C8_SEEDS {
        let s = scramble(&constant, ScramblerKey::XorKeystream { seed }.for_page(PhysicalAddress::new(0, 0)));
        ones += s.ones();
        total += s.len();
    }
    let frac = ones as f64 / total as f64;
    check((frac - 0.5).abs() <= C8_BALANCE_TOL, || format!("ones fraction {frac}"))?;
    Ok(format!("{C8_STRINGS} round trips; ones fraction {frac:.4} over {C8_SEEDS} seeds"))
}

/// A 50-operation log covering every mutating subcommand.
pub fn replay_log() -> String {
    let mut ops = vec!["init --blocks 6 --pages 8 --cells 16 --seed 42".to_string()];
    for lpn in 0..8 {
        ops.push(format!("write --lpn {lpn} --text 'rec {lpn}' {}", if lpn % 2 == 0 { "--privacy" } else { "" }));
    }
    for lpn in 0..8 {
        ops.push(format!("update --lpn {lpn} --text \"new {lpn}\""));
    }
    ops.push("gc --victims 0".into());
    ops.push("sanitize --scheme po".into());
    for lpn in 8..14 {
        ops.push(format!("write --lpn {lpn} --text id{lpn} --privacy"));
    }
    for lpn in 8..11 {
        ops.push(format!("update --lpn {lpn} --text v2-{lpn}"));
    }
    ops.push("gc --victims 2".into());
    ops.push("scan --payload id8".into());
    ops.push("sanitize --scheme fold".into());
    ops.push("update --lpn 11 --text v2-11".into());
    ops.push("update --lpn 12 --text v2-12".into());
    ops.push("sanitize --scheme slc --ref P3".into());
    ops.push("update --lpn 13 --text v2-13".into());
    ops.push("sanitize --scheme ddp --k auto".into());
    ops.push("verify --payload id13".into());
    ops.push("erase --blocks 0".into());
    ops.push("bg-erase --threshold 10".into());
    ops.push("write --lpn 20 --text after".into());
    ops.push("read --lpn 20".into());
    ops.push("costs --scenario gc --M 4 --N 6".into());
    ops.push("gc --greedy 1".into());
    ops.push("write --lpn 21 --text again --privacy".into());
    assert!(ops.len() < C9_OPS);
    while ops.len() < C9_OPS {
        let lpn = ops.len() % 3;
        ops.push(format!("update --lpn {lpn} --text fill{}", ops.len()));
    }
    let mut log = String::from("# acceptance replay log\n\n");
    for op in ops {
        log.push_str(&op);
        log.push('\n');
    }
    log
}

fn c9_replay_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("ops.log");
    let text = replay_log();
    let ops = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count();
    check(ops == C9_OPS, || format!("log has {ops} ops"))?;
    std::fs::write(&log, &text).map_err(|e| e.to_string())?;
    let mut dumps = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("dump{run}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_nandscrub"))
            .arg("replay")
            .arg(&log)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        check(status.status.success(), || format!("replay {run} failed: {}", String::from_utf8_lossy(&status.stderr)))?;
        dumps.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    check(dumps[0] == dumps[1], || "dumps differ".into())?;
    Ok(format!("{ops}-op log, two replays, {} identical bytes", dumps[0].len()))
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters from the default harness are not
    // supported; everything runs.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [Criterion; 9] = [
        ("worked example", c1_worked_example),
        ("state map", c2_state_map),
        ("residual data and destruction", c3_residual_and_destruction),
        ("monotonicity and zero erase", c4_monotonicity_and_erase),
        ("cost oracle", c5_cost_oracle),
        ("degradation crossover", c6_crossover),
        ("ddp calibration", c7_ddp_calibration),
        ("codec round trip", c8_codec),
        ("replay determinism", c9_replay_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail}) [{:.2?}]", i + 1, start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL ({detail}) [{:.2?}]", i + 1, start.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
