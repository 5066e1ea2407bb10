use std::ffi::{CStr, CString};
use std::ptr;

use treeflow_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

struct Handle(*mut TfTree);

impl Handle {
    fn new(q: u32) -> Self {
        let mut h = ptr::null_mut();
        assert_eq!(unsafe { tf_tree_new(q, &mut h) }, TfStatus::Ok);
        assert!(!h.is_null());
        Handle(h)
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { tf_tree_free(self.0) };
    }
}

fn last_error() -> String {
    let p = tf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn heat_kernel_matches_the_library() {
    let h = Handle::new(2);
    let (x, y) = (c("0:"), c("3:1.0.1"));
    let mut v = 0.0;
    assert_eq!(unsafe { tf_flow_heat_kernel(h.0, 1.5, x.as_ptr(), y.as_ptr(), &mut v) }, TfStatus::Ok);
    let tree = treeflow::Tree::new(2).unwrap();
    let q = treeflow::KernelQuery::from_vertices(&tree.parse_vertex("0:").unwrap(), &tree.parse_vertex("3:1.0.1").unwrap(), 1.5).unwrap();
    assert_eq!(v, treeflow::flow::flow_heat_kernel(&tree, &q).unwrap());

    let mut d = 0u64;
    assert_eq!(unsafe { tf_vertex_distance(h.0, x.as_ptr(), y.as_ptr(), &mut d) }, TfStatus::Ok);
    assert_eq!(d, 6);
}

#[test]
fn uniformization_agrees_within_its_bound() {
    let h = Handle::new(3);
    let (x, y) = (c("1:"), c("0:2"));
    let (mut k, mut u, mut b) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(tf_flow_heat_kernel(h.0, 2.0, x.as_ptr(), y.as_ptr(), &mut k), TfStatus::Ok);
        assert_eq!(tf_uniformization_heat(h.0, 2.0, x.as_ptr(), y.as_ptr(), 80, &mut u, &mut b), TfStatus::Ok);
    }
    assert!((k - u).abs() <= b + 1e-12, "{k} {u} {b}");
}

#[test]
fn scalar_and_sup_entry_points() {
    let mut v = 0.0;
    assert_eq!(unsafe { tf_heat_kernel_z(0.0, 0, &mut v) }, TfStatus::Ok);
    assert_eq!(v, 1.0);

    let h = Handle::new(2);
    let o = c("0:");
    let (mut s, mut arg) = (0.0, 0.0);
    // at d = 0 the sup is attained at t = 0 where H = 1 / mu(o)
    assert_eq!(unsafe { tf_heat_sup(h.0, o.as_ptr(), o.as_ptr(), false, &mut s, &mut arg) }, TfStatus::Ok);
    assert_eq!(s, 1.0);
    assert_eq!(unsafe { tf_heat_sup(h.0, o.as_ptr(), o.as_ptr(), true, &mut s, ptr::null_mut()) }, TfStatus::Ok);

    let mut p = 0.0;
    assert_eq!(unsafe { tf_poisson_kernel(h.0, 1.0, o.as_ptr(), o.as_ptr(), 1e-10, &mut p) }, TfStatus::Ok);
    assert!(p > 0.0 && p < 1.0);
    let mut r = 0.0;
    assert_eq!(unsafe { tf_riesz_kernel(h.0, o.as_ptr(), o.as_ptr(), &mut r) }, TfStatus::Ok);
    assert!(r > 0.0);
    let mut th = 0.0;
    assert_eq!(unsafe { tf_tree_heat_kernel(h.0, 1.0, 0, &mut th) }, TfStatus::Ok);
    assert!(th > 0.0 && th < 1.0);
}

#[test]
fn errors_map_to_status_codes() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { tf_tree_new(1, &mut h) }, TfStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(last_error().contains("at least 2"));

    let h = Handle::new(2);
    let (bad, o) = (c("0:7"), c("0:"));
    let mut v = 0.0;
    assert_eq!(unsafe { tf_flow_heat_kernel(h.0, 1.0, bad.as_ptr(), o.as_ptr(), &mut v) }, TfStatus::ParseError);
    assert_eq!(unsafe { tf_flow_heat_kernel(h.0, -1.0, o.as_ptr(), o.as_ptr(), &mut v) }, TfStatus::InvalidArgument);
    assert_eq!(unsafe { tf_flow_heat_kernel(ptr::null(), 1.0, o.as_ptr(), o.as_ptr(), &mut v) }, TfStatus::NullPointer);
    assert_eq!(unsafe { tf_flow_heat_kernel(h.0, 1.0, o.as_ptr(), ptr::null(), &mut v) }, TfStatus::NullPointer);
    assert_eq!(unsafe { tf_flow_heat_kernel(h.0, 1.0, o.as_ptr(), o.as_ptr(), ptr::null_mut()) }, TfStatus::NullPointer);
    assert!(last_error().contains("null pointer"));

    unsafe { tf_tree_free(ptr::null_mut()) };
}

#[test]
fn header_declares_the_surface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/treeflow.h")).unwrap();
    for name in [
        "tf_tree_new",
        "tf_tree_free",
        "tf_last_error",
        "tf_heat_kernel_z",
        "tf_vertex_distance",
        "tf_flow_heat_kernel",
        "tf_tree_heat_kernel",
        "tf_poisson_kernel",
        "tf_riesz_kernel",
        "tf_heat_sup",
        "tf_uniformization_heat",
        "TF_STATUS_NON_CONVERGENCE",
        "typedef struct TfTree TfTree;",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a small C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| std::process::Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = env!("CARGO_MANIFEST_DIR");
    // target/<profile>/deps/c_abi-* -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libtreeflow_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = std::env::temp_dir().join(format!("treeflow_ffi_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "treeflow.h"
int main(void) {
    TfTree *tree = NULL;
    if (tf_tree_new(2, &tree) != TF_STATUS_OK) return 1;
    double h = 0.0;
    if (tf_flow_heat_kernel(tree, 1.0, "0:", "0:", &h) != TF_STATUS_OK) return 2;
    if (tf_flow_heat_kernel(tree, 1.0, "0:", "0:9", &h) != TF_STATUS_PARSE_ERROR) return 3;
    if (tf_last_error() == NULL) return 4;
    tf_flow_heat_kernel(tree, 1.0, "0:", "0:", &h);
    printf("%.17g\n", h);
    tf_tree_free(tree);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.join("main");
    let status = std::process::Command::new(cc)
        .arg(&src)
        .arg(format!("-I{manifest}/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    let h: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((h - 0.440_537_450_149_306_2).abs() < 1e-15, "{h}");
    let _ = std::fs::remove_dir_all(&dir);
}
