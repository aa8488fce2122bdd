use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use obslearn_ffi::*;

fn last_error() -> String {
    let p = obs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn circuit_round_trip_and_transfer() {
    unsafe {
        let text = CString::new("qubits 2\nH 0\nCNOT 0 1\n").unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(obs_circuit_parse(text.as_ptr(), &mut c), ObsStatus::Ok);
        assert_eq!(obs_circuit_n_qubits(c), 2);
        assert_eq!(obs_circuit_len(c), 2);

        let mut s = ptr::null_mut();
        assert_eq!(obs_circuit_to_string(c, &mut s), ObsStatus::Ok);
        assert!(CStr::from_ptr(s).to_str().unwrap().contains("CNOT"));
        obs_string_free(s);

        let re = [0.6, 0.0, 0.0, 0.8];
        let im = [0.0; 4];
        let mut f = 0.0;
        assert_eq!(obs_verify_transfer(c, re.as_ptr(), im.as_ptr(), 4, 1e-9, &mut f), ObsStatus::Ok);
        assert!((f - 1.0).abs() < 1e-9);
        // wrong state length
        assert_eq!(obs_verify_transfer(c, re.as_ptr(), im.as_ptr(), 2, 1e-9, &mut f), ObsStatus::Invalid);
        assert!(!last_error().is_empty());
        obs_circuit_free(c);
    }
}

#[test]
fn random_circuit_is_seeded() {
    unsafe {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(obs_circuit_random(3, 7, 11, &mut a), ObsStatus::Ok);
        assert_eq!(obs_circuit_random(3, 7, 11, &mut b), ObsStatus::Ok);
        let (mut sa, mut sb) = (ptr::null_mut(), ptr::null_mut());
        obs_circuit_to_string(a, &mut sa);
        obs_circuit_to_string(b, &mut sb);
        assert_eq!(CStr::from_ptr(sa), CStr::from_ptr(sb));
        obs_string_free(sa);
        obs_string_free(sb);
        obs_circuit_free(a);
        obs_circuit_free(b);
    }
}

#[test]
fn bad_input_sets_error() {
    unsafe {
        let text = CString::new("FROB 0\n").unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(obs_circuit_parse(text.as_ptr(), &mut c), ObsStatus::Invalid);
        assert!(c.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(obs_circuit_parse(ptr::null(), &mut c), ObsStatus::NullPointer);
        // success clears the error
        let mut n = 0u64;
        assert_eq!(obs_sample_complexity(1.0, 4, 0.1, 0.4, &mut n), ObsStatus::Ok);
        assert!(obs_last_error().is_null());
        assert_eq!(n, 38);
        assert_eq!(obs_sample_complexity(1.0, 0, 0.1, 0.4, &mut n), ObsStatus::Invalid);
    }
}

#[test]
fn l1_projection_in_place() {
    let mut v = [3.0, -1.0, 0.5];
    unsafe { assert_eq!(obs_project_l1(v.as_mut_ptr(), 3, 1.0), ObsStatus::Ok) };
    assert!((v.iter().map(|x| x.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(v, [1.0, 0.0, 0.0]);
}

#[test]
fn lasso_handle() {
    let n = 50;
    let mut feats = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let a = (i as f64 * 0.7).sin();
        let b = (i as f64 * 0.3).cos();
        feats.extend([a, b]);
        y.push(0.3 * a + 0.2 * b);
    }
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(obs_lasso_train(feats.as_ptr(), y.as_ptr(), n, 2, 1.0, 1e-4, &mut m), ObsStatus::Ok);
        assert_eq!(obs_lasso_dim(m), 2);
        let mut w = [0.0; 2];
        assert_eq!(obs_lasso_weights(m, w.as_mut_ptr(), 1), ObsStatus::Invalid);
        assert_eq!(obs_lasso_weights(m, w.as_mut_ptr(), 2), ObsStatus::Ok);
        assert!((w[0] - 0.3).abs() < 1e-2 && (w[1] - 0.2).abs() < 1e-2, "{w:?}");
        let mut p = 0.0;
        assert_eq!(obs_lasso_predict(m, [1.0, 1.0].as_ptr(), 2, &mut p), ObsStatus::Ok);
        assert!((p - w[0] - w[1]).abs() < 1e-12);
        let mut mse = -1.0;
        assert_eq!(obs_lasso_train_mse(m, &mut mse), ObsStatus::Ok);
        assert!((0.0..1e-3).contains(&mse));
        obs_lasso_free(m);
    }
}

#[test]
fn experiment_from_json() {
    let cfg = CString::new(
        r#"{"concept": {"source": "hard_instance", "n_work": 1, "gates": 2, "circuit_seed": 5},
            "n_train": 400, "n_test": 100, "learner": {"kind": "lasso", "eps3": 0.05}, "eps": 0.1, "seed": 1}"#,
    )
    .unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(obs_run_experiment(cfg.as_ptr(), &mut out), ObsStatus::Ok, "{}", last_error_or_none());
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        assert_eq!(v["pass"], true);
        assert_eq!(v["n_train"], 400);
        obs_string_free(out);

        let bad = CString::new(r#"{"eps": 0.1}"#).unwrap();
        assert_eq!(obs_run_experiment(bad.as_ptr(), &mut out), ObsStatus::Invalid);
        assert!(out.is_null());
    }
}

fn last_error_or_none() -> String {
    let p = obs_last_error();
    if p.is_null() {
        String::new()
    } else {
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/obslearn.h");
    let src = std::env::temp_dir().join(format!("obslearn_header_{}.c", std::process::id()));
    std::fs::write(
        &src,
        format!("#include \"{header}\"\nint main(void) {{ obs_circuit *c = 0; return obs_circuit_parse(\"H 0\", &c) == OBS_STATUS_OK ? 0 : 1; }}\n"),
    )
    .unwrap();
    let out = match Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).output() {
        Ok(o) => o,
        Err(_) => {
            eprintln!("no C compiler; skipping header check");
            return;
        }
    };
    std::fs::remove_file(&src).ok();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
