use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lagsurge_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { ls_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn index_of_real_and_imaginary_planes() {
    let mut p0 = ptr::null_mut();
    let mut p1 = ptr::null_mut();
    unsafe {
        assert_eq!(ls_plane_real(3, 0.0, &mut p0), LsStatus::Ok);
        assert_eq!(ls_plane_conormal(3, 0, -1.5, &mut p1), LsStatus::Ok);
        let (mut raw, mut rounded) = (0.0, 0i64);
        assert_eq!(ls_index(p0, p1, &mut raw, &mut rounded), LsStatus::Ok);
        assert_eq!(rounded, 0);
        assert!((raw - rounded as f64).abs() < 1e-9);
        ls_plane_free(p0);
        ls_plane_free(p1);
    }
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        let (mut raw, mut rounded) = (0.0, 0i64);
        assert_eq!(ls_index(ptr::null(), ptr::null(), &mut raw, &mut rounded), LsStatus::NullPointer);
        assert!(last_error().contains("null"));
        ls_plane_free(ptr::null_mut());
        ls_curve_free(ptr::null_mut());
        ls_complex_free(ptr::null_mut());
        ls_string_free(ptr::null_mut());
    }
}

#[test]
fn curve_floer_homology() {
    let zero = CString::new(r#"{"type":"zero_section"}"#).unwrap();
    let fiber = CString::new(r#"{"type":"fiber","q":1.0}"#).unwrap();
    unsafe {
        let mut c0 = ptr::null_mut();
        let mut c1 = ptr::null_mut();
        assert_eq!(ls_curve_from_json(zero.as_ptr(), &mut c0), LsStatus::Ok);
        assert_eq!(ls_curve_from_json(fiber.as_ptr(), &mut c1), LsStatus::Ok);
        let mut cx = ptr::null_mut();
        assert_eq!(ls_floer_complex(c0, c1, &mut cx), LsStatus::Ok);
        assert_eq!(ls_complex_len(cx), 1);
        let mut degs = [0i64; 4];
        let mut ranks = [0usize; 4];
        let mut len = 0usize;
        assert_eq!(ls_complex_homology(cx, degs.as_mut_ptr(), ranks.as_mut_ptr(), 4, &mut len), LsStatus::Ok);
        assert_eq!(len, 1);
        assert_eq!(ranks[0], 1);
        assert_eq!(ls_complex_homology(cx, degs.as_mut_ptr(), ranks.as_mut_ptr(), 0, &mut len), LsStatus::BufferTooSmall);
        ls_complex_free(cx);
        ls_curve_free(c0);
        ls_curve_free(c1);
    }
}

#[test]
fn bad_json_is_a_schema_error() {
    let bad = CString::new("{not json").unwrap();
    let unknown = CString::new(r#"{"type":"spiral"}"#).unwrap();
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(ls_curve_from_json(bad.as_ptr(), &mut c), LsStatus::Schema);
        assert_eq!(ls_curve_from_json(unknown.as_ptr(), &mut c), LsStatus::Schema);
        assert!(c.is_null());
    }
}

#[test]
fn run_config_returns_canonical_report() {
    let cfg = CString::new(r#"{"command":"index","builtin":"rn-nrk","n":4,"seed":0}"#).unwrap();
    unsafe {
        let mut report = ptr::null_mut();
        assert_eq!(ls_run_config(cfg.as_ptr(), &mut report), LsStatus::Ok);
        let text = CStr::from_ptr(report).to_str().unwrap().to_owned();
        ls_string_free(report);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["pass"], true);
        let mut again = ptr::null_mut();
        ls_run_config(cfg.as_ptr(), &mut again);
        assert_eq!(CStr::from_ptr(again).to_str().unwrap(), text);
        ls_string_free(again);

        let bad = CString::new(r#"{"command":"nope"}"#).unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(ls_run_config(bad.as_ptr(), &mut r), LsStatus::Schema);
        assert!(r.is_null());
    }
}

#[test]
fn header_declares_every_entry_point_and_compiles() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/lagsurge.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build script");
    for f in [
        "ls_version",
        "ls_last_error",
        "ls_string_free",
        "ls_plane_real",
        "ls_plane_conormal",
        "ls_plane_from_frame",
        "ls_plane_free",
        "ls_index",
        "ls_curve_from_json",
        "ls_curve_free",
        "ls_floer_complex",
        "ls_complex_from_json",
        "ls_complex_free",
        "ls_complex_homology",
        "ls_complex_len",
        "ls_run_config",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }
    let src = std::env::temp_dir().join(format!("lagsurge_hdr_{}.c", std::process::id()));
    std::fs::write(&src, "#include \"lagsurge.h\"\nint main(void){LsPlane*p=0;(void)p;return LS_STATUS_OK;}\n").unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(dir.join("include")).arg(&src).status() {
        Ok(s) => assert!(s.success(), "header does not compile as C"),
        Err(_) => eprintln!("no C compiler found, syntax check skipped"),
    }
    let _ = std::fs::remove_file(src);
}
