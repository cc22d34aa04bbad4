use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use bend_ffi::*;

fn handle(m: usize, n: usize, preds: &[u32], target: &[u32]) -> *mut BendPredictions {
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(bend_predictions_new(m, n, preds.as_ptr(), &mut h), BendStatus::Ok);
        assert_eq!(
            bend_predictions_set_target(h, target.as_ptr(), target.len()),
            BendStatus::Ok
        );
    }
    h
}

fn last_error() -> String {
    let p = bend_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn votes_and_baselines() {
    // Each classifier misses a different sample.
    let h = handle(3, 3, &[1, 0, 0, 0, 1, 0, 0, 0, 1], &[0, 0, 0]);
    unsafe {
        let mut inferred = [9u32; 3];
        let mut acc = 0.0;
        assert_eq!(bend_sbend(h, inferred.as_mut_ptr(), &mut acc), BendStatus::Ok);
        assert_eq!((inferred, acc), ([0, 0, 0], 1.0));
        assert!(bend_last_error().is_null());

        let mut a = 0.0;
        let mut b = 0.0;
        assert_eq!(bend_abend(h, 11, ptr::null_mut(), &mut a), BendStatus::Ok);
        assert_eq!(bend_abend(h, 11, ptr::null_mut(), &mut b), BendStatus::Ok);
        assert_eq!(a, b);

        let mut t = BendTrials::default();
        assert_eq!(bend_abend_trials(h, 0, 20_000, &mut t), BendStatus::Ok);
        assert!((t.mean - 2.0 / 3.0).abs() < 0.01, "{}", t.mean);

        let mut s = BendBaseline::default();
        assert_eq!(bend_baseline(h, &mut s), BendStatus::Ok);
        assert_eq!((s.max, s.mean, s.potential), (2.0 / 3.0, 2.0 / 3.0, 1.0));

        let mut d = BendDiversity::default();
        assert_eq!(bend_diversity(h, ptr::null(), &mut d), BendStatus::Ok);
        assert_eq!(d.d_i_raw, 6.0);
        assert!(d.d_o.is_nan());
        assert_eq!(bend_diversity(h, h, &mut d), BendStatus::Ok);
        assert_eq!(d.d_o, 0.0);

        let mut iou = BendIou::default();
        assert_eq!(bend_wrong_set_iou(h, &mut iou), BendStatus::Ok);
        assert_eq!((iou.allway, iou.pairwise_mean), (0.0, 0.0));
        bend_predictions_free(h);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(bend_predictions_new(2, 2, ptr::null(), &mut h), BendStatus::NullPointer);
        assert!(last_error().contains("preds"));
        assert_eq!(
            bend_predictions_new(0, 2, [0u32; 0].as_ptr(), &mut h),
            BendStatus::Input
        );

        let h = handle(2, 2, &[0, 1, 1, 0], &[0, 1]);
        assert_eq!(bend_predictions_set_target(h, [0u32].as_ptr(), 1), BendStatus::Shape);
        let other = handle(1, 2, &[0, 1], &[0, 1]);
        let mut d = BendDiversity::default();
        assert_eq!(bend_diversity(h, other, &mut d), BendStatus::Shape);
        assert_eq!(bend_diversity(other, ptr::null(), &mut d), BendStatus::Input);
        bend_predictions_free(other);

        let mut bare = ptr::null_mut();
        assert_eq!(
            bend_predictions_new(2, 1, [0u32, 1].as_ptr(), &mut bare),
            BendStatus::Ok
        );
        let mut acc = 0.0;
        assert_eq!(bend_sbend(bare, ptr::null_mut(), &mut acc), BendStatus::MissingTarget);
        assert_eq!(
            bend_sbend(bare, ptr::null_mut(), ptr::null_mut()),
            BendStatus::MissingTarget
        );
        assert_eq!(bend_sbend(h, ptr::null_mut(), ptr::null_mut()), BendStatus::NullPointer);
        bend_predictions_free(bare);
        bend_predictions_free(h);
        bend_predictions_free(ptr::null_mut());
    }
}

#[test]
fn load_reads_target_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    std::fs::write(&path, "classifier_id,s_0,s_1\n0,1,0\n1,1,1\ntarget,1,0\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(bend_predictions_load(c.as_ptr(), &mut h), BendStatus::Ok);
        let (mut m, mut n) = (0, 0);
        assert_eq!(bend_predictions_shape(h, &mut m, &mut n), BendStatus::Ok);
        assert_eq!((m, n), (2, 2));
        let mut s = BendBaseline::default();
        assert_eq!(bend_baseline(h, &mut s), BendStatus::Ok);
        assert_eq!(s.mean, 0.75);
        bend_predictions_free(h);

        std::fs::write(&path, "classifier_id,s_0,s_1\n0,1\n").unwrap();
        assert_eq!(bend_predictions_load(c.as_ptr(), &mut h), BendStatus::Format);
        let missing = CString::new("/nonexistent/p.csv").unwrap();
        assert_eq!(bend_predictions_load(missing.as_ptr(), &mut h), BendStatus::Io);
    }
}

#[test]
fn cost_model_reference_and_undefined() {
    let reference = bend_cost_reference();
    let mut e = BendCostEstimate::default();
    unsafe {
        assert_eq!(bend_cost_model(&reference, 1, &mut e), BendStatus::Ok);
        assert!((e.breakeven_m - 3.6418).abs() < 1e-3);
        assert_eq!(e.t_trad, 2800.0);
        let bad = BendCostInputs {
            t_sgen: 1e9,
            ..reference
        };
        assert_eq!(bend_cost_model(&bad, 1, &mut e), BendStatus::UndefinedBreakEven);
        assert!(last_error().contains("break-even"));
    }
}

/// Compiles and runs a C program against the generated header and the
/// static library. Skipped when no C compiler is on PATH.
#[test]
fn header_links_from_c() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("cc not found; skipping");
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libbend_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "bend.h"
int main(void) {
    uint32_t preds[] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    uint32_t target[] = {0, 0, 0};
    BendPredictions *h = NULL;
    double acc = 0;
    if (bend_predictions_new(3, 3, preds, &h) != BEND_STATUS_OK) return 1;
    if (bend_sbend(h, NULL, &acc) != BEND_STATUS_MISSING_TARGET) return 2;
    if (bend_last_error() == NULL) return 3;
    bend_predictions_set_target(h, target, 3);
    if (bend_sbend(h, NULL, &acc) != BEND_STATUS_OK || acc != 1.0) return 4;
    BendCostInputs in = bend_cost_reference();
    BendCostEstimate est;
    if (bend_cost_model(&in, 1, &est) != BEND_STATUS_OK) return 5;
    printf("%.4f\n", est.breakeven_m);
    bend_predictions_free(h);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout), "3.6418\n");
}
