use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use lmabo_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let s = unsafe { lmabo_last_error(buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(s, LmaboStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn problem_handle_lifecycle() {
    let name = CString::new("Hartmann").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lmabo_problem_new(name.as_ptr(), &mut p) }, LmaboStatus::Ok);
    let mut dim = 0usize;
    assert_eq!(unsafe { lmabo_problem_dim(p, &mut dim) }, LmaboStatus::Ok);
    assert_eq!(dim, 6);
    let (mut lo, mut hi) = (vec![0.0; 6], vec![0.0; 6]);
    assert_eq!(unsafe { lmabo_problem_bounds(p, lo.as_mut_ptr(), hi.as_mut_ptr(), 6) }, LmaboStatus::Ok);
    assert!(lo.iter().all(|v| *v == 0.0) && hi.iter().all(|v| *v == 1.0));
    let mut opt = 0.0;
    assert_eq!(unsafe { lmabo_problem_optimum(p, &mut opt) }, LmaboStatus::Ok);
    assert!((opt + 3.32237).abs() < 1e-4);

    let outside = [2.0; 6];
    let mut v = 0.0;
    assert_eq!(unsafe { lmabo_problem_evaluate(p, outside.as_ptr(), 6, &mut v) }, LmaboStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { lmabo_problem_evaluate(p, outside.as_ptr(), 3, &mut v) }, LmaboStatus::InvalidArgument);
    assert_eq!(unsafe { lmabo_problem_dim(ptr::null(), &mut dim) }, LmaboStatus::NullPointer);
    unsafe { lmabo_problem_free(p) };
    unsafe { lmabo_problem_free(ptr::null_mut()) };
}

#[test]
fn gp_fit_interpolates() {
    let xs: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x).sin()).collect();
    let mut gp = ptr::null_mut();
    let s = unsafe { lmabo_gp_fit(xs.as_ptr(), ys.as_ptr(), 8, 1, [0.0].as_ptr(), [1.0].as_ptr(), 3, &mut gp) };
    assert_eq!(s, LmaboStatus::Ok, "{}", last_error());
    let (mut mean, mut var) = (vec![0.0; 8], vec![0.0; 8]);
    assert_eq!(unsafe { lmabo_gp_predict(gp, xs.as_ptr(), 8, 1, mean.as_mut_ptr(), var.as_mut_ptr()) }, LmaboStatus::Ok);
    for (m, y) in mean.iter().zip(&ys) {
        assert!((m - y).abs() < 5e-2, "{m} vs {y}");
    }
    assert!(var.iter().all(|v| *v >= 0.0));
    let mut ls = [0.0];
    assert_eq!(unsafe { lmabo_gp_lengthscales(gp, ls.as_mut_ptr(), 1) }, LmaboStatus::Ok);
    assert!(ls[0] > 0.0);
    assert_eq!(unsafe { lmabo_gp_predict(gp, xs.as_ptr(), 4, 2, mean.as_mut_ptr(), var.as_mut_ptr()) }, LmaboStatus::InvalidArgument);
    unsafe { lmabo_gp_free(gp) };
}

#[test]
fn run_record_accessors() {
    let (prob, strat) = (CString::new("SixHumpCamel").unwrap(), CString::new("Scripted-EI-TS").unwrap());
    let mut rec = ptr::null_mut();
    let s = unsafe { lmabo_run(prob.as_ptr(), strat.as_ptr(), 2, 4, ptr::null(), &mut rec) };
    assert_eq!(s, LmaboStatus::Ok, "{}", last_error());
    let mut len = 0;
    assert_eq!(unsafe { lmabo_record_len(rec, &mut len) }, LmaboStatus::Ok);
    assert_eq!(len, 4);
    let mut inc = vec![0.0; 4];
    assert_eq!(unsafe { lmabo_record_incumbents(rec, inc.as_mut_ptr(), 4) }, LmaboStatus::Ok);
    assert!(inc.windows(2).all(|w| w[1] <= w[0]));
    let mut tag = [0 as c_char; 8];
    for (i, want) in ["EI", "TS", "EI", "TS"].iter().enumerate() {
        assert_eq!(unsafe { lmabo_record_choice(rec, i, tag.as_mut_ptr(), tag.len(), ptr::null_mut()) }, LmaboStatus::Ok);
        assert_eq!(unsafe { CStr::from_ptr(tag.as_ptr()) }.to_str().unwrap(), *want);
    }
    let mut needed = 0;
    assert_eq!(unsafe { lmabo_record_choice(rec, 0, tag.as_mut_ptr(), 2, &mut needed) }, LmaboStatus::BufferTooSmall);
    assert_eq!(needed, 3);
    unsafe { lmabo_record_free(rec) };

    let llm = CString::new("LLM").unwrap();
    assert_eq!(unsafe { lmabo_run(prob.as_ptr(), llm.as_ptr(), 0, 2, ptr::null(), &mut rec) }, LmaboStatus::InvalidArgument);
    let bad = CString::new("Nope").unwrap();
    assert_eq!(unsafe { lmabo_run(prob.as_ptr(), bad.as_ptr(), 0, 2, ptr::null(), &mut rec) }, LmaboStatus::InvalidArgument);
}

#[test]
fn statistics_and_parsing() {
    let ranks = [1.0, 2.0, 3.0].repeat(4);
    let (mut stat, mut p) = (0.0, 0.0);
    assert_eq!(unsafe { lmabo_friedman(ranks.as_ptr(), 4, 3, &mut stat, &mut p) }, LmaboStatus::Ok);
    assert!((stat - 8.0).abs() < 1e-12 && (p - 0.0183).abs() < 1e-3);
    let mut adj = [0.0; 2];
    assert_eq!(unsafe { lmabo_holm([0.01, 0.04].as_ptr(), 2, adj.as_mut_ptr()) }, LmaboStatus::Ok);
    assert_eq!(adj, [0.02, 0.04]);
    assert_eq!(unsafe { lmabo_holm([1.5].as_ptr(), 1, adj.as_mut_ptr()) }, LmaboStatus::InvalidArgument);

    let reply = CString::new("not a decision").unwrap();
    let mut tag = [0 as c_char; 8];
    let mut fb = 0;
    assert_eq!(unsafe { lmabo_parse_decision(reply.as_ptr(), tag.as_mut_ptr(), 8, ptr::null_mut(), &mut fb) }, LmaboStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(tag.as_ptr()) }.to_str().unwrap(), "UCB");
    assert_eq!(fb, 1);
}

/// `target/<profile>` of the running test binary.
fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let include = crate_dir.join("include");
    assert!(include.join("lmabo.h").exists(), "header is generated by the build script");
    let lib = target_dir().join("liblmabo_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("lmabo_smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&out)
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
