use std::ffi::CStr;
use std::ptr;

use wtacrs::estimators::wta_crs_estimate;
use wtacrs::lab::power_law_instance;
use wtacrs::tensor::{DenseMatrix, RandomSource};
use wtacrs_ffi::*;

fn handle(m: &DenseMatrix) -> *mut WtaMatrix {
    let mut out = ptr::null_mut();
    let s = unsafe { wta_matrix_new(m.rows(), m.cols(), m.data().as_ptr(), &mut out) };
    assert_eq!(s, WtaStatus::Ok);
    out
}

fn read(m: *const WtaMatrix) -> DenseMatrix {
    unsafe {
        let (r, c) = (wta_matrix_rows(m), wta_matrix_cols(m));
        let mut buf = vec![0.0; r * c];
        assert_eq!(wta_matrix_copy_data(m, buf.as_mut_ptr(), buf.len()), WtaStatus::Ok);
        DenseMatrix::new(r, c, buf).unwrap()
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(wta_last_error()).to_string_lossy().into_owned() }
}

#[test]
fn matmul_round_trip() {
    let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    let (hx, hy) = (handle(&x), handle(&x));
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(wta_matmul(hx, hy, &mut out), WtaStatus::Ok);
        assert_eq!(read(out), x.matmul(&x).unwrap());
        wta_matrix_free(out);
        wta_matrix_free(hx);
        wta_matrix_free(hy);
    }
}

#[test]
fn estimates_match_the_library() {
    let (x, y) = power_law_instance(6, 20, 4, 1.0, &mut RandomSource::new(3, 0));
    let (hx, hy) = (handle(&x), handle(&y));
    unsafe {
        let rng = wta_rng_new(9, 2);
        let mut out = ptr::null_mut();
        assert_eq!(wta_estimate_wta_crs(hx, hy, 5, rng, &mut out), WtaStatus::Ok);
        let want = wta_crs_estimate(&x, &y, 5, &mut RandomSource::new(9, 2)).unwrap();
        assert_eq!(read(out), want);
        wta_matrix_free(out);

        assert_eq!(wta_estimate_crs(hx, hy, 5, rng, &mut out), WtaStatus::Ok);
        wta_matrix_free(out);
        assert_eq!(wta_estimate_deterministic(hx, hy, 20, &mut out), WtaStatus::Ok);
        assert!(read(out).max_abs_diff(&x.matmul(&y).unwrap()).unwrap() < 1e-12);
        wta_matrix_free(out);

        let mut crs = 0.0;
        let mut wta = 0.0;
        assert_eq!(wta_theoretical_crs_variance(hx, hy, 5, &mut crs), WtaStatus::Ok);
        assert_eq!(wta_theoretical_wta_variance(hx, hy, 5, &mut wta), WtaStatus::Ok);
        assert!(wta <= crs);

        let mut probs = vec![0.0; 20];
        assert_eq!(wta_col_row_distribution(hx, hy, probs.as_mut_ptr(), 20), WtaStatus::Ok);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut s = 0usize;
        assert_eq!(wta_optimal_det_size(probs.as_ptr(), 20, 5, &mut s), WtaStatus::Ok);
        assert!(s < 5);
        wta_rng_free(rng);
        wta_matrix_free(hx);
        wta_matrix_free(hy);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut out = ptr::null_mut();
        let data = [1.0, f64::NAN];
        assert_eq!(wta_matrix_new(1, 2, data.as_ptr(), &mut out), WtaStatus::NonFinite);
        assert!(!last_error().is_empty());

        let a = handle(&DenseMatrix::zeros(2, 3));
        assert_eq!(wta_matmul(a, a, &mut out), WtaStatus::Shape);
        assert!(last_error().contains("matmul"));
        assert_eq!(wta_matmul(a, ptr::null(), &mut out), WtaStatus::NullPointer);

        let rng = wta_rng_new(0, 0);
        let z = handle(&DenseMatrix::zeros(3, 2));
        assert_eq!(wta_estimate_crs(a, z, 2, rng, &mut out), WtaStatus::Degenerate);
        let mut small = [0.0; 2];
        assert_eq!(wta_matrix_copy_data(a, small.as_mut_ptr(), 2), WtaStatus::BufferTooSmall);
        let mut s = 0usize;
        let probs = [0.5, 0.5];
        assert_eq!(wta_optimal_det_size(probs.as_ptr(), 2, 3, &mut s), WtaStatus::InvalidArgument);
        wta_rng_free(rng);
        wta_matrix_free(a);
        wta_matrix_free(z);
        wta_matrix_free(ptr::null_mut());
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(wta_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/wtacrs.h")).unwrap();
    for name in [
        "WTA_STATUS_OK",
        "WTA_STATUS_DEGENERATE",
        "typedef struct WtaMatrix WtaMatrix",
        "typedef struct WtaRng WtaRng",
        "wta_matrix_new",
        "wta_matrix_free",
        "wta_matrix_copy_data",
        "wta_rng_new",
        "wta_matmul",
        "wta_estimate_crs",
        "wta_estimate_wta_crs",
        "wta_estimate_deterministic",
        "wta_col_row_distribution",
        "wta_optimal_det_size",
        "wta_theoretical_crs_variance",
        "wta_theoretical_wta_variance",
        "wta_last_error",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, "#include \"wtacrs.h\"\nint main(void) { return wta_matrix_rows(NULL) == 0 ? 0 : 1; }\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
