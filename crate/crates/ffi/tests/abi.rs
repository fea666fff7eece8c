use std::ffi::{CStr, CString};
use std::ptr;

use nandscrub_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = ns_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_sim() -> *mut NsSimulator {
    let cfg = c(r#"{"geometry": {"num_blocks": 4, "pages_per_block": 4, "cells_per_page": 16}, "seed": 11}"#);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { ns_sim_new(cfg.as_ptr(), &mut sim) }, NsStatus::Ok);
    assert!(!sim.is_null());
    sim
}

#[test]
fn write_update_gc_destroy_scan() {
    let sim = small_sim();
    let (mut b, mut p) = (u32::MAX, u32::MAX);
    unsafe {
        assert_eq!(ns_sim_write(sim, 0, c("661004").as_ptr(), true, &mut b, &mut p), NsStatus::Ok);
        assert_eq!((b, p), (0, 0));
        assert_eq!(ns_sim_write(sim, 1, c("keepme").as_ptr(), false, ptr::null_mut(), ptr::null_mut()), NsStatus::Ok);
        assert_eq!(ns_sim_update(sim, 0, c("000000").as_ptr(), &mut b, &mut p), NsStatus::Ok);
        assert_eq!((b, p), (0, 2));

        let victims = [0u32];
        let mut gc = NsGcReport::default();
        assert_eq!(ns_sim_gc(sim, victims.as_ptr(), 1, &mut gc), NsStatus::Ok);
        assert_eq!((gc.moved, gc.residual, gc.destination), (2, 1, 1));

        let mut scan = NsScanResult::default();
        assert_eq!(ns_sim_scan(sim, c("661004").as_ptr(), &mut scan), NsStatus::Ok);
        assert_eq!(scan.unmapped_hits, 1);

        let mut pages = 0usize;
        assert_eq!(ns_sim_destroy(sim, c("slc").as_ptr(), &mut pages), NsStatus::Ok);
        assert_eq!(pages, 2);
        assert_eq!(ns_sim_scan(sim, c("661004").as_ptr(), &mut scan), NsStatus::Ok);
        assert_eq!(scan, NsScanResult { mapped_hits: 0, unmapped_hits: 0 });
        assert_eq!(ns_sim_scan(sim, c("keepme").as_ptr(), &mut scan), NsStatus::Ok);
        assert_eq!(scan.mapped_hits, 1);
        ns_sim_free(sim);
    }
}

#[test]
fn json_round_trip() {
    let sim = small_sim();
    unsafe {
        assert_eq!(ns_sim_write(sim, 3, c("abc").as_ptr(), true, ptr::null_mut(), ptr::null_mut()), NsStatus::Ok);
        let mut text = ptr::null_mut();
        assert_eq!(ns_sim_to_json(sim, &mut text), NsStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ns_sim_from_json(text, &mut back), NsStatus::Ok);
        let mut text2 = ptr::null_mut();
        assert_eq!(ns_sim_to_json(back, &mut text2), NsStatus::Ok);
        assert_eq!(CStr::from_ptr(text), CStr::from_ptr(text2));
        ns_string_free(text);
        ns_string_free(text2);
        ns_sim_free(back);
        ns_sim_free(sim);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut sim = ptr::null_mut();
        assert_eq!(ns_sim_new(c("{\"bogus\": 1}").as_ptr(), &mut sim), NsStatus::InvalidArgument);
        assert!(sim.is_null());
        assert!(last_error().contains("bogus"));
        assert_eq!(ns_sim_new(ptr::null(), ptr::null_mut()), NsStatus::NullPointer);

        let sim = small_sim();
        assert!(ns_last_error_message().is_null());
        assert_eq!(ns_sim_update(sim, 9, c("x").as_ptr(), ptr::null_mut(), ptr::null_mut()), NsStatus::Domain);
        assert_eq!(
            ns_sim_write(sim, 0, c("é").as_ptr(), false, ptr::null_mut(), ptr::null_mut()),
            NsStatus::InvalidArgument
        );
        assert_eq!(ns_sim_destroy(sim, c("shred").as_ptr(), ptr::null_mut()), NsStatus::InvalidArgument);
        assert_eq!(ns_sim_gc(sim, ptr::null(), 2, ptr::null_mut()), NsStatus::NullPointer);
        assert_eq!(ns_sim_gc(ptr::null_mut(), ptr::null(), 0, ptr::null_mut()), NsStatus::NullPointer);
        ns_sim_free(sim);
        ns_sim_free(ptr::null_mut());
        ns_string_free(ptr::null_mut());
    }
}

#[test]
fn cost_queries() {
    let mut t = 0.0;
    unsafe {
        let p = ns_cost_params_default();
        assert_eq!(ns_cost_gc_time(c("po").as_ptr(), 1, 1, &p, &mut t), NsStatus::Ok);
        assert_eq!(t, 200.0 + 10.0 + 400.0);
        assert_eq!(ns_cost_gc_time(c("slc").as_ptr(), 0, 3, ptr::null(), &mut t), NsStatus::Ok);
        assert_eq!(t, 3.0 * 5.0 + 150.0);
        assert_eq!(ns_cost_update_time(c("ddp").as_ptr(), 2, &p, &mut t), NsStatus::Ok);
        assert_eq!(t, 400.0 + 50.0);

        assert_eq!(ns_cost_gc_time(c("block_erase").as_ptr(), 3, 5, &p, &mut t), NsStatus::NotApplicable);
        assert_eq!(t, 600.0);
        assert_eq!(ns_cost_gc_time(c("lin").as_ptr(), 3, 5, &p, &mut t), NsStatus::NotApplicable);
        assert_eq!(ns_cost_gc_time(c("nope").as_ptr(), 3, 5, &p, &mut t), NsStatus::InvalidArgument);
        let bad = NsCostParams { t_pgm: -1.0, ..p };
        assert_eq!(ns_cost_gc_time(c("po").as_ptr(), 3, 5, &bad, &mut t), NsStatus::InvalidArgument);
    }
}
