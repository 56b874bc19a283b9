//! Compiles a small C program against the generated header and links it to the
//! static library built for this test run.

use std::path::{Path, PathBuf};
use std::process::Command;

const SOURCE: &str = r#"
#include <math.h>
#include <stdio.h>
#include "dcbell.h"

int main(void) {
    DcbState *st = NULL;
    if (dcb_state_new_overlap(0.7853981633974483, 0.0, 0.0, 256, -8.0, 8.0, &st) != DCB_STATUS_OK) return 1;
    DcbSettings s;
    dcb_canonical_settings(&s);
    double b = 0.0;
    if (dcb_bell_value(st, &s, &b) != DCB_STATUS_OK) return 2;
    if (fabs(b - 2.0 * sqrt(2.0)) > 1e-10) return 3;
    DcbStatus rc = dcb_bell_value(NULL, &s, &b);
    if (rc != DCB_STATUS_NULL_POINTER) return 4;
    printf("%.12f %s\n", b, dcb_last_error_message());
    dcb_state_free(st);
    return 0;
}
"#;

fn artifact_dir() -> PathBuf {
    // target/<profile>/deps/<this test> → target/<profile>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = artifact_dir().join("libdcbell_ffi.a");
    if !lib.exists() {
        panic!("static library missing at {}", lib.display());
    }
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let exe = dir.path().join("client");
    std::fs::write(&src, SOURCE).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "C client failed to compile");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "client exited with {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("2.828427124746"), "{text}");
    assert!(text.contains("null pointer"), "{text}");
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dcbell.h")).unwrap();
    for sym in [
        "typedef struct DcbState DcbState;",
        "dcb_state_new_overlap",
        "dcb_state_new_gaussians",
        "dcb_state_new_tabulated",
        "dcb_state_from_config",
        "dcb_state_free",
        "dcb_state_schmidt",
        "dcb_bell_value",
        "dcb_optimize_settings",
        "dcb_four_photon_probability",
        "dcb_protocol_bell",
        "dcb_mc_estimate_bell",
        "dcb_last_error_message",
        "DCB_STATUS_DEGENERATE_INPUT = 2",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}
