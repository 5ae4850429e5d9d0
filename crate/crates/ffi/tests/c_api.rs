use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use collapse_kinetics::correlators::NoiseModel;
use collapse_kinetics::dynamics::expected_p1p2_closed;
use collapse_kinetics_ffi::*;

fn last_error() -> String {
    let p = ck_last_error_message();
    assert!(!p.is_null());
    // SAFETY: non-null pointers from the library are valid C strings.
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn thermal() -> *mut CkModel {
    let mut model = ptr::null_mut();
    assert_eq!(
        ck_model_new_thermal(1.0, 0.5, -0.2, 1.0, &mut model),
        CkStatus::Ok
    );
    assert!(!model.is_null());
    model
}

#[test]
fn kernels_match_the_library() {
    let model = thermal();
    let reference = NoiseModel::thermal(1.0, 0.5, -0.2, 1.0).unwrap();
    let mut v = 0.0;
    for (kind, expected) in [
        (CK_KERNEL_D, reference.corr_d(1.5, 2.0).unwrap()),
        (CK_KERNEL_F, reference.corr_f(1.5, 2.0).unwrap()),
        (CK_KERNEL_I, reference.corr_i(1.5, 2.0).unwrap()),
        (CK_KERNEL_I_DIFF, reference.corr_i_diff(1.5, 2.0).unwrap()),
        (
            CK_KERNEL_FOURIER_F,
            reference.fourier_fhat(1.5, 2.0).unwrap(),
        ),
    ] {
        assert_eq!(
            unsafe { ck_model_kernel(model, kind, 1.5, 2.0, &mut v) },
            CkStatus::Ok
        );
        assert_eq!(v, expected);
    }
    assert_eq!(
        unsafe { ck_model_kernel(model, 99, 1.0, 1.0, &mut v) },
        CkStatus::Validation
    );
    assert!(last_error().contains("99"));
    unsafe { ck_model_free(model) };
}

#[test]
fn construction_errors_are_reported() {
    let mut model = ptr::null_mut();
    assert_eq!(
        ck_model_new_thermal(1.0, 1.0, 0.5, 1.0, &mut model),
        CkStatus::Validation
    );
    assert!(model.is_null());
    assert!(last_error().contains("chemical potential"));
    assert_eq!(
        ck_model_new_white(1.0, 1.0, ptr::null_mut()),
        CkStatus::NullPointer
    );
    assert_eq!(
        ck_model_new_unparticle(0.0, 1.0, 1.0, 0.0, 1.0, &mut model),
        CkStatus::Validation
    );
    ck_clear_last_error();
    assert!(ck_last_error_message().is_null());
    unsafe { ck_model_free(ptr::null_mut()) };
}

#[test]
fn distributional_kernel_is_a_validation_error() {
    let mut model = ptr::null_mut();
    assert_eq!(ck_model_new_white(1.0, 1.0, &mut model), CkStatus::Ok);
    let mut v = 0.0;
    assert_eq!(
        unsafe { ck_model_kernel(model, CK_KERNEL_D, 0.0, 1.0, &mut v) },
        CkStatus::Validation
    );
    assert_eq!(
        unsafe { ck_model_kernel(ptr::null(), CK_KERNEL_F, 0.0, 1.0, &mut v) },
        CkStatus::NullPointer
    );
    unsafe { ck_model_free(model) };
}

#[test]
fn pair_rate_and_closed_forms() {
    let mut model = ptr::null_mut();
    assert_eq!(ck_model_new_white(1.0, 1.0, &mut model), CkStatus::Ok);
    let a = [0.0, 0.0, 0.0];
    let b = [30.0, 0.0, 0.0];
    let c = [1.0];
    let mut gamma = 0.0;
    let status = unsafe {
        ck_gamma_pair(
            model,
            a.as_ptr(),
            c.as_ptr(),
            1,
            b.as_ptr(),
            c.as_ptr(),
            1,
            2.0,
            &mut gamma,
        )
    };
    assert_eq!(status, CkStatus::Ok);
    // Far apart, Γ = 2t·F(0) for unit couplings.
    let f0 = 0.5 * (4.0 * std::f64::consts::PI).powf(-1.5);
    assert!((gamma - 4.0 * f0).abs() < 1e-12 * gamma);
    let status = unsafe {
        ck_gamma_pair(
            model,
            a.as_ptr(),
            ptr::null(),
            1,
            b.as_ptr(),
            c.as_ptr(),
            1,
            2.0,
            &mut gamma,
        )
    };
    assert_eq!(status, CkStatus::NullPointer);
    unsafe { ck_model_free(model) };

    let mut e = 0.0;
    assert_eq!(ck_expected_p1p2(0.7, 0.3, 0.7, &mut e), CkStatus::Ok);
    assert_eq!(e, expected_p1p2_closed(0.7, 0.3, 0.7).unwrap());
    let mut bounds = CkBounds::default();
    assert_eq!(ck_reduction_bounds(0.7, 0.21, &mut bounds), CkStatus::Ok);
    assert!(bounds.lower <= e && e <= bounds.upper);
    assert_eq!(
        ck_reduction_bounds(-1.0, 0.21, &mut bounds),
        CkStatus::Validation
    );

    let mut z = 0.0;
    assert_eq!(ck_bose_integral(1.0, 0.0, 1.0, &mut z), CkStatus::Ok);
    assert!((z - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-8);
}

#[test]
fn scenario_derivation() {
    let kev = 1e-6;
    let scenario = CkScenario {
        mass: kev,
        v_rms: 7.3e-4,
        density: 1e-42,
        coupling: 1e-6,
        nucleons_per_bunch: 1e10,
        bunches: 1.0,
        fifth_force_scale: 1e-12,
    };
    let mut d = CkScenarioDerived::default();
    assert_eq!(unsafe { ck_dm_derived(&scenario, &mut d) }, CkStatus::Ok);
    assert!(
        (d.correlation_length - 1.5f64.sqrt() / (kev * 7.3e-4)).abs() < 1e-6 * d.correlation_length
    );
    assert!((d.reduction_time * d.temperature - 1.0).abs() < 1e-15);
    assert_eq!(d.non_dilute, 0);
    let bad = CkScenario {
        v_rms: 2.0,
        ..scenario
    };
    assert_eq!(unsafe { ck_dm_derived(&bad, &mut d) }, CkStatus::Validation);
    assert_eq!(
        unsafe { ck_dm_derived(ptr::null(), &mut d) },
        CkStatus::NullPointer
    );
}

#[test]
fn errors_are_thread_local() {
    let mut model = ptr::null_mut();
    assert_eq!(
        ck_model_new_white(-1.0, 1.0, &mut model),
        CkStatus::Validation
    );
    std::thread::spawn(|| assert!(ck_last_error_message().is_null()))
        .join()
        .unwrap();
    assert!(!ck_last_error_message().is_null());
}

/// The generated header compiles as C.
#[test]
fn header_is_valid_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("probe.c");
    std::fs::write(
        &source,
        "#include \"collapse_kinetics.h\"\n\
         int main(void) {\n\
           CkModel *m = 0;\n\
           double v = 0.0;\n\
           if (ck_model_new_white(1.0, 1.0, &m) != CK_STATUS_OK) return 1;\n\
           CkStatus s = ck_model_kernel(m, CK_KERNEL_F, 0.0, 1.0, &v);\n\
           ck_model_free(m);\n\
           return s == CK_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&source)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
}
