//! C ABI over the simulator.
//!
//! Every function returns an [`NsStatus`]. On anything other than
//! `NS_STATUS_OK` a description is available from
//! [`ns_last_error_message`] on the same thread. Strings handed out by the
//! library must be released with [`ns_string_free`], simulators with
//! [`ns_sim_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nandscrub::codec::text_to_bits;
use nandscrub::cost::{gc_case, update_case, CostParams, CostScheme, DestructionTime};
use nandscrub::sanitizer::{run_destroy, verify_destruction, DestroyOptions, SanitizeScheme, Targets};
use nandscrub::{Error, PhysicalAddress, RunConfig, Simulator};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The simulator rejected the operation (full device, unmapped page, ...).
    Domain = 3,
    /// Destruction ran but some page still yields its payload.
    VerificationFailed = 4,
    /// The requested figure has no numeric value for this scheme.
    NotApplicable = 5,
    Panic = 6,
}

/// Opaque simulator handle.
pub struct NsSimulator {
    inner: Simulator,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NsCostParams {
    pub a: f64,
    pub b: f64,
    pub t_pgm: f64,
    pub t_rdg: f64,
    pub t_sdg: f64,
    pub t_pow: f64,
    pub t_slcp: f64,
    pub t_ddp: f64,
    pub t_oneshot: f64,
}

impl From<CostParams> for NsCostParams {
    fn from(p: CostParams) -> Self {
        NsCostParams {
            a: p.a,
            b: p.b,
            t_pgm: p.t_pgm,
            t_rdg: p.t_rdg,
            t_sdg: p.t_sdg,
            t_pow: p.t_pow,
            t_slcp: p.t_slcp,
            t_ddp: p.t_ddp,
            t_oneshot: p.t_oneshot,
        }
    }
}

impl From<NsCostParams> for CostParams {
    fn from(p: NsCostParams) -> Self {
        CostParams {
            a: p.a,
            b: p.b,
            t_pgm: p.t_pgm,
            t_rdg: p.t_rdg,
            t_sdg: p.t_sdg,
            t_pow: p.t_pow,
            t_slcp: p.t_slcp,
            t_ddp: p.t_ddp,
            t_oneshot: p.t_oneshot,
            t_erase: None,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NsGcReport {
    pub moved: u64,
    pub residual: u64,
    /// Block that received the copies, or -1 when nothing was moved.
    pub destination: i64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NsScanResult {
    pub mapped_hits: u64,
    pub unmapped_hits: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(NsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::VerificationFailed { .. } => NsStatus::VerificationFailed,
            Error::Parse(_)
            | Error::Json(_)
            | Error::InvalidConfig(_)
            | Error::UnknownScheme(_)
            | Error::NonAscii(_)
            | Error::OutOfBounds(_) => NsStatus::InvalidArgument,
            _ => NsStatus::Domain,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(NsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn sim_arg<'a>(p: *mut NsSimulator) -> Result<&'a mut Simulator, Failure> {
    p.as_mut().map(|s| &mut s.inner).ok_or_else(|| null("sim"))
}

unsafe fn put<T>(out: *mut T, value: T) {
    if !out.is_null() {
        out.write(value);
    }
}

fn boxed(sim: Simulator) -> *mut NsSimulator {
    Box::into_raw(Box::new(NsSimulator { inner: sim }))
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ns_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ns_cost_params_default() -> NsCostParams {
    CostParams::default().into()
}

/// Builds a fresh device. `config_json` may be NULL for the default
/// configuration.
///
/// # Safety
/// `config_json` must be NULL or a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ns_sim_new(config_json: *const c_char, out: *mut *mut NsSimulator) -> NsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = if config_json.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_json(str_arg(config_json, "config_json")?)?
        };
        out.write(boxed(Simulator::new(config)?));
        Ok(())
    })
}

/// Restores a device from a dump produced by [`ns_sim_to_json`].
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ns_sim_from_json(json: *const c_char, out: *mut *mut NsSimulator) -> NsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sim = Simulator::from_json(str_arg(json, "json")?)?;
        out.write(boxed(sim));
        Ok(())
    })
}

/// # Safety
/// `sim` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ns_sim_free(sim: *mut NsSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Serializes the device. Free the result with [`ns_string_free`].
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ns_sim_to_json(sim: *mut NsSimulator, out: *mut *mut c_char) -> NsStatus {
    guard(|| {
        let sim = sim_arg(sim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = CString::new(sim.to_json()).expect("json has no nul");
        out.write(c.into_raw());
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ns_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Host write of ASCII `text` to `lpn`. The physical location is stored in
/// `out_block`/`out_page` when they are not NULL.
///
/// # Safety
/// `sim` must be a live handle and `text` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ns_sim_write(
    sim: *mut NsSimulator,
    lpn: u64,
    text: *const c_char,
    privacy: bool,
    out_block: *mut u32,
    out_page: *mut u32,
) -> NsStatus {
    guard(|| {
        let sim = sim_arg(sim)?;
        let bits = text_to_bits(str_arg(text, "text")?)?;
        let addr = sim.ftl.write_logical(&mut sim.device, lpn, &bits, privacy)?;
        put(out_block, addr.block);
        put(out_page, addr.page);
        Ok(())
    })
}

/// Out-of-place update of a mapped `lpn`.
///
/// # Safety
/// `sim` must be a live handle and `text` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ns_sim_update(
    sim: *mut NsSimulator,
    lpn: u64,
    text: *const c_char,
    out_block: *mut u32,
    out_page: *mut u32,
) -> NsStatus {
    guard(|| {
        let sim = sim_arg(sim)?;
        let bits = text_to_bits(str_arg(text, "text")?)?;
        let addr = sim.ftl.update_logical(&mut sim.device, lpn, &bits)?;
        put(out_block, addr.block);
        put(out_page, addr.page);
        Ok(())
    })
}

/// Garbage-collects `count` victim blocks without erasing them.
///
/// # Safety
/// `victims` must point at `count` readable values (or be NULL with count 0).
#[no_mangle]
pub unsafe extern "C" fn ns_sim_gc(
    sim: *mut NsSimulator,
    victims: *const u32,
    count: usize,
    out: *mut NsGcReport,
) -> NsStatus {
    guard(|| {
        let sim = sim_arg(sim)?;
        let victims: &[u32] = match (victims.is_null(), count) {
            (_, 0) => &[],
            (true, _) => return Err(null("victims")),
            (false, n) => std::slice::from_raw_parts(victims, n),
        };
        let rep = sim.ftl.garbage_collect(&mut sim.device, victims)?;
        put(
            out,
            NsGcReport { moved: rep.moved, residual: rep.residual, destination: rep.destination.map_or(-1, i64::from) },
        );
        Ok(())
    })
}

/// Destroys every flagged invalid page with `scheme` ("po", "fold", "slc" or
/// "ddp"), using the reference states and DDP parameters from the device
/// configuration. The number of treated pages goes to `out_pages`.
///
/// # Safety
/// `sim` must be a live handle and `scheme` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ns_sim_destroy(
    sim: *mut NsSimulator,
    scheme: *const c_char,
    out_pages: *mut usize,
) -> NsStatus {
    guard(|| {
        let sim = sim_arg(sim)?;
        let name = str_arg(scheme, "scheme")?;
        let reference = match name {
            "fold" | "po-fold" => Some(sim.config.fold_reference),
            "slc" => Some(sim.config.slc_reference),
            _ => None,
        };
        let scheme = SanitizeScheme::from_name(name, reference, sim.config.ddp)?;
        let opts = DestroyOptions { cost: sim.config.cost, max_passes: sim.config.max_passes };
        let report = run_destroy(&mut sim.ftl, &mut sim.device, &scheme, &Targets::AllPrivacy, &opts)?;
        put(out_pages, report.pages.len());
        let failed: Vec<PhysicalAddress> = report.failed_pages();
        if !failed.is_empty() {
            return Err(Error::VerificationFailed { pages: failed }.into());
        }
        Ok(())
    })
}

/// Forensic scan of every page for the ASCII `payload`.
///
/// # Safety
/// `sim` must be a live handle and `payload` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ns_sim_scan(
    sim: *mut NsSimulator,
    payload: *const c_char,
    out: *mut NsScanResult,
) -> NsStatus {
    guard(|| {
        let sim = sim_arg(sim)?;
        let bits = text_to_bits(str_arg(payload, "payload")?)?;
        let outcome = verify_destruction(&sim.ftl, &sim.device, &bits);
        put(
            out,
            NsScanResult { mapped_hits: outcome.mapped_hits() as u64, unmapped_hits: outcome.unmapped_hits() as u64 },
        );
        Ok(())
    })
}

unsafe fn cost_inputs(scheme: *const c_char, params: *const NsCostParams) -> Result<(CostScheme, CostParams), Failure> {
    let scheme: CostScheme = str_arg(scheme, "scheme")?.parse()?;
    let params: CostParams = params.as_ref().map_or_else(CostParams::default, |p| (*p).into());
    params.validate()?;
    Ok((scheme, params))
}

fn time_out(time: DestructionTime, out: *mut f64) -> Result<(), Failure> {
    match time {
        DestructionTime::Exact { value } => {
            unsafe { put(out, value) };
            Ok(())
        }
        DestructionTime::PolicyDependent { lower_bound } => {
            if let Some(lb) = lower_bound {
                unsafe { put(out, lb) };
            }
            Err(Failure(NsStatus::NotApplicable, "destruction time depends on the erase policy".into()))
        }
        DestructionTime::NotApplicable => {
            Err(Failure(NsStatus::NotApplicable, "scheme does not apply to this scenario".into()))
        }
    }
}

/// Destruction time after a GC of `m` valid and `n` invalid pages. `params`
/// may be NULL for the defaults. Block erase reports `NS_STATUS_NOT_APPLICABLE`
/// with its lower bound written to `out`.
///
/// # Safety
/// `scheme` must be a valid C string; `params` NULL or readable.
#[no_mangle]
pub unsafe extern "C" fn ns_cost_gc_time(
    scheme: *const c_char,
    m: u64,
    n: u64,
    params: *const NsCostParams,
    out: *mut f64,
) -> NsStatus {
    guard(|| {
        let (scheme, params) = cost_inputs(scheme, params)?;
        time_out(gc_case(scheme, m, n, &params).destruction_time, out)
    })
}

/// Destruction time of a single-page update after `m` GC copies.
///
/// # Safety
/// `scheme` must be a valid C string; `params` NULL or readable.
#[no_mangle]
pub unsafe extern "C" fn ns_cost_update_time(
    scheme: *const c_char,
    m: u64,
    params: *const NsCostParams,
    out: *mut f64,
) -> NsStatus {
    guard(|| {
        let (scheme, params) = cost_inputs(scheme, params)?;
        time_out(update_case(scheme, m, &params).destruction_time, out)
    })
}
