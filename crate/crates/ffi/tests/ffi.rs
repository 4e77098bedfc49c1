use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use twistlab::correlators::{order_disorder_two_point, TwistKind};
use twistlab::edcore::{Boundary, ChainModel};
use twistlab::gaussian::chain_ground_covariance;
use twistlab_ffi::*;

fn last_error() -> String {
    let n = twistlab_last_error_length();
    let mut buf = vec![0 as c_char; n.max(1)];
    let needed = unsafe { twistlab_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(needed, n);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

fn chain(family: TwistlabFamily, h: f64, l: usize, b: TwistlabBoundary) -> *mut TwistlabChain {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { twistlab_chain_new(family, 1.0, h, l, b, &mut c) }, TwistlabStatus::Ok);
    c
}

fn ground(c: *const TwistlabChain) -> (*mut TwistlabCovariance, f64) {
    let mut cov = ptr::null_mut();
    let mut e = 0.0;
    assert_eq!(unsafe { twistlab_ground_covariance(c, &mut cov, &mut e) }, TwistlabStatus::Ok);
    (cov, e)
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(twistlab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn two_point_agrees_with_the_library() {
    let c = chain(TwistlabFamily::TransverseIsing, 0.6, 16, TwistlabBoundary::Open);
    let (cov, e) = ground(c);
    let model = ChainModel::transverse_ising(16, 1.0, 0.6, Boundary::Open);
    let (direct, e_direct) = chain_ground_covariance(&model).unwrap();
    assert_eq!(e, e_direct);
    let mut sites = 0;
    assert_eq!(unsafe { twistlab_covariance_sites(cov, &mut sites) }, TwistlabStatus::Ok);
    assert_eq!(sites, 16);
    for (kind, k) in [(TwistlabTwistKind::Order, TwistKind::Order), (TwistlabTwistKind::Disorder, TwistKind::Disorder)] {
        let mut v = 0.0;
        assert_eq!(unsafe { twistlab_two_point(cov, kind, 3, 9, &mut v) }, TwistlabStatus::Ok);
        assert_eq!(v, order_disorder_two_point(&direct, k, 3, 9).unwrap());
    }
    unsafe {
        twistlab_covariance_free(cov);
        twistlab_chain_free(c);
    }
}

#[test]
fn fcs_and_entropy_of_a_free_fermion_region() {
    let c = chain(TwistlabFamily::Xx, 0.0, 12, TwistlabBoundary::Open);
    let mut cov = ptr::null_mut();
    assert_eq!(unsafe { twistlab_thermal_covariance(c, 0.7, &mut cov) }, TwistlabStatus::Ok);
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { twistlab_fcs(cov, 2, 5, 0.0, &mut re, &mut im) }, TwistlabStatus::Ok);
    assert!((re - 1.0).abs() < 1e-14 && im.abs() < 1e-14);
    assert_eq!(unsafe { twistlab_fcs(cov, 2, 5, 0.4, &mut re, &mut im) }, TwistlabStatus::Ok);
    assert!(re * re + im * im <= 1.0 + 1e-12);
    let mut s2 = 0.0;
    let mut s1 = 0.0;
    assert_eq!(unsafe { twistlab_renyi(cov, 0, 6, 2.0, &mut s2) }, TwistlabStatus::Ok);
    assert_eq!(unsafe { twistlab_renyi(cov, 0, 6, 1.0, &mut s1) }, TwistlabStatus::Ok);
    assert!(s2 > 0.0 && s1 >= s2);
    assert_eq!(unsafe { twistlab_renyi(cov, 10, 5, 2.0, &mut s2) }, TwistlabStatus::InvalidArgument);
    unsafe {
        twistlab_covariance_free(cov);
        twistlab_chain_free(c);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut c = ptr::null_mut();
    let st = unsafe { twistlab_chain_new(TwistlabFamily::Xx, f64::NAN, 0.0, 8, TwistlabBoundary::Open, &mut c) };
    assert_eq!(st, TwistlabStatus::InvalidArgument);
    assert!(c.is_null());
    assert!(!last_error().is_empty());

    let st = unsafe { twistlab_chain_new(TwistlabFamily::Xx, 1.0, 0.0, 8, TwistlabBoundary::Open, ptr::null_mut()) };
    assert_eq!(st, TwistlabStatus::NullPointer);
    assert!(last_error().contains("out_chain"));

    let mut v = 0.0;
    let st = unsafe { twistlab_two_point(ptr::null(), TwistlabTwistKind::Order, 0, 1, &mut v) };
    assert_eq!(st, TwistlabStatus::NullPointer);

    let p = chain(TwistlabFamily::TransverseIsing, 1.0, 8, TwistlabBoundary::Periodic);
    let mut cov = ptr::null_mut();
    assert_eq!(unsafe { twistlab_thermal_covariance(p, 1.0, &mut cov) }, TwistlabStatus::InvalidArgument);
    assert!(last_error().contains("open"));
    unsafe { twistlab_chain_free(p) };

    let hb = chain(TwistlabFamily::Heisenberg, 0.0, 6, TwistlabBoundary::Open);
    let mut e = 0.0;
    assert_ne!(unsafe { twistlab_ground_covariance(hb, &mut cov, &mut e) }, TwistlabStatus::Ok);
    unsafe { twistlab_chain_free(hb) };

    assert_eq!(unsafe { twistlab_toda_oracle(1.0, 2.0, 2.5, 3, &mut v) }, TwistlabStatus::Divergence);
    assert_eq!(unsafe { twistlab_ising_series(1.0, 1.0, -1.0, 2, &mut v) }, TwistlabStatus::InvalidArgument);

    // truncated copy stays NUL-terminated and reports the full size
    let mut small = [1 as c_char; 4];
    let needed = unsafe { twistlab_last_error_message(small.as_mut_ptr(), small.len()) };
    assert!(needed > 4);
    assert_eq!(small[3], 0);
    unsafe {
        twistlab_chain_free(ptr::null_mut());
        twistlab_covariance_free(ptr::null_mut());
        twistlab_toda_free(ptr::null_mut());
        twistlab_string_free(ptr::null_mut());
    }
}

#[test]
fn last_error_is_per_thread() {
    let mut v = 0.0;
    unsafe { twistlab_toda_oracle(-1.0, 2.0, 0.5, 3, &mut v) };
    assert!(twistlab_last_error_length() > 0);
    std::thread::spawn(|| assert_eq!(twistlab_last_error_length(), 0)).join().unwrap();
}

#[test]
fn toda_estimate_and_oracle() {
    let mut ens = ptr::null_mut();
    assert_eq!(unsafe { twistlab_toda_sample(1.0, 3.0, 6, 40_000, 4, &mut ens) }, TwistlabStatus::Ok);
    let (mut m, mut s, mut o) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { twistlab_toda_estimate(ens, 0.5, 6, &mut m, &mut s) }, TwistlabStatus::Ok);
    assert_eq!(unsafe { twistlab_toda_oracle(1.0, 3.0, 0.5, 6, &mut o) }, TwistlabStatus::Ok);
    assert!((m - o).abs() <= 4.0 * s, "{m} ± {s} vs {o}");
    assert_eq!(unsafe { twistlab_toda_estimate(ens, 0.5, 7, &mut m, ptr::null_mut()) }, TwistlabStatus::InvalidArgument);
    unsafe { twistlab_toda_free(ens) };
    assert_eq!(unsafe { twistlab_toda_sample(1.0, 3.0, 1 << 20, 1 << 20, 4, &mut ens) }, TwistlabStatus::Capacity);
}

#[test]
fn run_config_matches_the_cli_library() {
    let json = CString::new(r#"{"experiment": "formfactor", "seed": 2}"#).unwrap();
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { twistlab_run_config(json.as_ptr(), TwistlabFormat::Csv, &mut text) }, TwistlabStatus::Ok);
    let got = unsafe { CStr::from_ptr(text) }.to_str().unwrap().to_string();
    unsafe { twistlab_string_free(text) };
    let cfg = twistlab::cli::RunConfig::from_json(json.to_str().unwrap(), None).unwrap();
    let set = twistlab::cli::run_experiment(&cfg).unwrap();
    assert_eq!(got, twistlab::cli::emit_csv(&set));

    let bad = CString::new(r#"{"experiment": "fcs", "bogus": true}"#).unwrap();
    assert_eq!(unsafe { twistlab_run_config(bad.as_ptr(), TwistlabFormat::Json, &mut text) }, TwistlabStatus::Config);
    assert!(text.is_null());
    assert_eq!(twistlab_status_exit_code(TwistlabStatus::Config), 2);

    let failing = CString::new(r#"{"experiment": "toda", "params": {"pressure": 2.0, "lambdas": [1.0], "xs": [20], "draws": 20000}}"#).unwrap();
    let st = unsafe { twistlab_run_config(failing.as_ptr(), TwistlabFormat::Json, &mut text) };
    assert_eq!(st, TwistlabStatus::InvariantFailed);
    assert!(!text.is_null());
    unsafe { twistlab_string_free(text) };
}

fn find_static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    [profile_dir.join("libtwistlab_ffi.a"), profile_dir.join("deps/libtwistlab_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "twistlab.h"

int main(void) {
    TwistlabChain *chain = NULL;
    TwistlabCovariance *cov = NULL;
    double energy = 0.0, order = 0.0, value = 0.0;
    if (twistlab_chain_new(TWISTLAB_FAMILY_TRANSVERSE_ISING, 1.0, 0.5, 10, TWISTLAB_BOUNDARY_OPEN, &chain) != TWISTLAB_STATUS_OK) return 10;
    if (twistlab_ground_covariance(chain, &cov, &energy) != TWISTLAB_STATUS_OK) return 11;
    if (twistlab_two_point(cov, TWISTLAB_TWIST_KIND_ORDER, 2, 7, &order) != TWISTLAB_STATUS_OK) return 12;
    if (twistlab_toda_oracle(1.0, 2.0, 3.0, 1, &value) != TWISTLAB_STATUS_DIVERGENCE) return 13;
    char msg[256];
    if (twistlab_last_error_message(msg, sizeof msg) == 0) return 14;
    printf("%.17g %.17g\n", energy, order);
    twistlab_covariance_free(cov);
    twistlab_chain_free(chain);
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_static_library() {
    let Some(lib) = find_static_lib() else {
        eprintln!("skipping: libtwistlab_ffi.a not found next to the test binary");
        return;
    };
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("skipping: no C compiler");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.path().join("smoke");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8(run.stdout).unwrap();
    let nums: Vec<f64> = text.split_whitespace().map(|t| t.parse().unwrap()).collect();

    let model = ChainModel::transverse_ising(10, 1.0, 0.5, Boundary::Open);
    let (cov, e) = chain_ground_covariance(&model).unwrap();
    assert_eq!(nums[0], e);
    assert_eq!(nums[1], order_disorder_two_point(&cov, TwistKind::Order, 2, 7).unwrap());
}
