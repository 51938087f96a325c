use std::ffi::CStr;
use std::ptr;

use mixlfsm_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mlfsm_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn model(b: &[f64], h: &[f64], beta: &[f64]) -> *mut MlfsmModel {
    let mut m = ptr::null_mut();
    let rc = unsafe { mlfsm_model_new(b.len(), b.as_ptr(), h.as_ptr(), beta.as_ptr(), &mut m) };
    assert_eq!(rc, MLFSM_OK, "{}", last_error());
    m
}

#[test]
fn simulate_estimate_round_trip() {
    let m = model(&[1.0], &[0.7], &[1.5]);
    let mut p = ptr::null_mut();
    let n = 5000;
    let rc = unsafe { mlfsm_simulate(m, n, 1.0 / n as f64, 2, 2, 11, &mut p) };
    assert_eq!(rc, MLFSM_OK, "{}", last_error());
    assert_eq!(unsafe { mlfsm_path_len(p) }, n);
    let mut e = ptr::null_mut();
    let rc = unsafe { mlfsm_estimate_adaptive(p, 1, 2, &mut e) };
    assert_eq!(rc, MLFSM_OK, "{}", last_error());
    assert_eq!(unsafe { mlfsm_estimate_dim(e) }, 3);
    assert_eq!(unsafe { mlfsm_estimate_converged(e) }, 1);
    let mut theta = [0.0; 3];
    assert_eq!(unsafe { mlfsm_estimate_theta(e, theta.as_mut_ptr(), 3) }, MLFSM_OK);
    assert!((theta[1] - 0.7).abs() < 0.1, "{theta:?}");
    let mut small = [0.0; 2];
    assert_eq!(unsafe { mlfsm_estimate_theta(e, small.as_mut_ptr(), 2) }, MLFSM_ERR_CAPACITY);
    assert!(last_error().contains("buffer"));
    unsafe {
        mlfsm_estimate_free(e);
        mlfsm_path_free(p);
        mlfsm_model_free(m);
    }
}

#[test]
fn paths_copy_out_and_in() {
    let values = [0.0, 1.0, 4.0, 9.0, 16.0];
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { mlfsm_path_from_values(values.as_ptr(), 5, 0.2, &mut p) }, MLFSM_OK);
    let mut back = [0.0; 5];
    assert_eq!(unsafe { mlfsm_path_values(p, back.as_mut_ptr(), 5) }, MLFSM_OK);
    assert_eq!(back, values);
    unsafe { mlfsm_path_free(p) };
    let bad = [f64::NAN];
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { mlfsm_path_from_values(bad.as_ptr(), 1, 0.2, &mut q) }, MLFSM_ERR_INPUT);
    assert!(q.is_null());
}

#[test]
fn errors_map_to_codes_and_messages() {
    let mut m = ptr::null_mut();
    let rc = unsafe { mlfsm_model_new(1, [1.0].as_ptr(), [0.5].as_ptr(), [2.5].as_ptr(), &mut m) };
    assert_eq!(rc, MLFSM_ERR_CONFIG);
    assert!(m.is_null());
    assert!(last_error().contains("2.5"), "{}", last_error());
    let rc = unsafe { mlfsm_model_new(1, ptr::null(), [0.5].as_ptr(), [2.0].as_ptr(), &mut m) };
    assert_eq!(rc, MLFSM_ERR_NULL);
    let mut out = 0.0;
    assert_eq!(unsafe { mlfsm_btilde(2.0, 0.7, 2.0, 1, &mut out) }, MLFSM_OK);
    assert!(last_error().is_empty());
    assert!(out > 0.0);
    unsafe {
        mlfsm_model_free(ptr::null_mut());
        mlfsm_path_free(ptr::null_mut());
        mlfsm_estimate_free(ptr::null_mut());
    }
}

#[test]
fn stable_draws_are_reproducible() {
    let mut a = vec![0.0; 100];
    let mut b = vec![0.0; 100];
    unsafe {
        assert_eq!(mlfsm_sample_stable(1.2, 1.0, 100, 5, 2, a.as_mut_ptr()), MLFSM_OK);
        assert_eq!(mlfsm_sample_stable(1.2, 1.0, 100, 5, 2, b.as_mut_ptr()), MLFSM_OK);
    }
    assert_eq!(a, b);
    let v = unsafe { CStr::from_ptr(mlfsm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_interface() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mixlfsm.h")).unwrap();
    for f in [
        "mlfsm_last_error_message",
        "mlfsm_model_new",
        "mlfsm_simulate",
        "mlfsm_estimate_adaptive",
        "mlfsm_estimate_theta",
        "mlfsm_sample_stable",
        "typedef struct MlfsmModel MlfsmModel",
    ] {
        assert!(h.contains(f), "header lacks {f}");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if std::process::Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let target = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = target.join("libmixlfsm_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "mixlfsm.h"
int main(void) {
    double b = 1.0, h = 0.3, beta = 2.0;
    MlfsmModel *m = NULL;
    MlfsmPath *p = NULL;
    if (mlfsm_model_new(1, &b, &h, &beta, &m) != MLFSM_OK) return 1;
    if (mlfsm_simulate(m, 200, 0.005, 2, 2, 1, &p) != MLFSM_OK) return 2;
    if (mlfsm_path_len(p) != 200) return 3;
    double bad = 3.0;
    MlfsmModel *m2 = NULL;
    if (mlfsm_model_new(1, &b, &h, &bad, &m2) != MLFSM_ERR_CONFIG) return 4;
    if (mlfsm_last_error_message()[0] == '\0') return 5;
    mlfsm_path_free(p);
    mlfsm_model_free(m);
    printf("ok\n");
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let status = std::process::Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
