use std::ffi::CString;
use std::ptr;

use planewave_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { pw_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn benchmark_simulation_round_trip() {
    let name = CString::new("wscc9").unwrap();
    let mut case = ptr::null_mut();
    assert_eq!(
        unsafe { pw_case_load_benchmark(name.as_ptr(), &mut case) },
        PwStatus::Ok
    );
    let (mut buses, mut gens) = (0usize, 0usize);
    assert_eq!(
        unsafe { pw_case_size(case, &mut buses, &mut gens) },
        PwStatus::Ok
    );
    assert_eq!((buses, gens), (9, 3));

    let mut traj = ptr::null_mut();
    assert_eq!(
        unsafe { pw_simulate(case, PwModel::PlaneWave, 2.0, &mut traj) },
        PwStatus::Ok
    );
    let (mut n, mut nodes) = (0usize, 0usize);
    assert_eq!(
        unsafe { pw_trajectory_size(traj, &mut n, &mut nodes) },
        PwStatus::Ok
    );
    assert_eq!(nodes, 3);
    assert_eq!(n, 2001);
    let mut t = vec![0.0; n];
    assert_eq!(
        unsafe { pw_trajectory_times(traj, t.as_mut_ptr(), n) },
        PwStatus::Ok
    );
    assert_eq!(t[0], 0.0);
    assert!((t[n - 1] - 2.0).abs() < 1e-9);
    let mut w = vec![0.0; n];
    assert_eq!(
        unsafe { pw_trajectory_omega(traj, 0, w.as_mut_ptr(), n) },
        PwStatus::Ok
    );
    assert!(w[n - 1] < 0.0);
    let mut rocof = 0.0;
    assert_eq!(
        unsafe { pw_measure_rocof(traj, 1.0, 0.05, &mut rocof) },
        PwStatus::Ok
    );
    assert!(rocof > 0.0);

    let mut small = vec![0.0; 3];
    assert_eq!(
        unsafe { pw_trajectory_omega(traj, 0, small.as_mut_ptr(), small.len()) },
        PwStatus::Validation
    );
    assert!(last_error().contains("buffer"));
    unsafe {
        pw_trajectory_free(traj);
        pw_case_free(case);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let name = CString::new("nosuch").unwrap();
    let mut case = ptr::null_mut();
    assert_eq!(
        unsafe { pw_case_load_benchmark(name.as_ptr(), &mut case) },
        PwStatus::Validation
    );
    assert!(case.is_null());
    assert!(last_error().contains("nosuch"));

    let path = CString::new("/nonexistent/case.toml").unwrap();
    assert_eq!(
        unsafe { pw_case_parse_file(path.as_ptr(), &mut case) },
        PwStatus::Io
    );

    assert_eq!(
        unsafe { pw_case_load_benchmark(ptr::null(), &mut case) },
        PwStatus::NullPointer
    );
    assert_eq!(
        unsafe { pw_case_set_inertia(ptr::null_mut(), 1.0) },
        PwStatus::NullPointer
    );

    let zeros = [0.0; 64];
    let mut modes = ptr::null_mut();
    assert_eq!(
        unsafe { pw_prony_fit(zeros.as_ptr(), zeros.len(), 0.01, 2, &mut modes) },
        PwStatus::Numerical
    );
    unsafe {
        pw_case_free(ptr::null_mut());
        pw_trajectory_free(ptr::null_mut());
        pw_modes_free(ptr::null_mut());
    }
}

#[test]
fn prony_through_the_abi() {
    let dt = 0.01;
    let x: Vec<f64> = (0..400)
        .map(|k| {
            let t = k as f64 * dt;
            (-0.3 * t).exp() * (2.0 * std::f64::consts::PI * 0.7 * t).cos()
        })
        .collect();
    let mut modes = ptr::null_mut();
    assert_eq!(
        unsafe { pw_prony_fit(x.as_ptr(), x.len(), dt, 2, &mut modes) },
        PwStatus::Ok
    );
    let mut count = 0;
    assert_eq!(unsafe { pw_modes_count(modes, &mut count) }, PwStatus::Ok);
    assert_eq!(count, 1);
    let mut m = PwMode {
        sigma: 0.0,
        omega: 0.0,
        amplitude: 0.0,
        phase: 0.0,
        energy: 0.0,
        damping_ratio: 0.0,
    };
    assert_eq!(unsafe { pw_modes_get(modes, 0, &mut m) }, PwStatus::Ok);
    assert!((m.sigma + 0.3).abs() < 1e-6);
    assert!((m.omega - 2.0 * std::f64::consts::PI * 0.7).abs() < 1e-6);
    assert!((m.amplitude - 1.0).abs() < 1e-6);
    assert_eq!(
        unsafe { pw_modes_get(modes, 5, &mut m) },
        PwStatus::Validation
    );
    unsafe { pw_modes_free(modes) };
}

#[test]
fn line_momentum_and_kappa() {
    let mut p = 0.0;
    assert_eq!(
        unsafe { pw_line_momentum(10.0, 160_934.0, 100.0, &mut p) },
        PwStatus::Ok
    );
    assert!((p - 1.7907e-3).abs() < 1e-7);
    assert_eq!(
        unsafe { pw_line_momentum(1.0, -1.0, 100.0, &mut p) },
        PwStatus::Validation
    );
    let mut k = 0.0;
    assert_eq!(unsafe { pw_reference_kappa(&mut k) }, PwStatus::Ok);
    assert!(k > 0.0);
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/planewave.h"))
            .unwrap();
    for f in [
        "pw_last_error_message",
        "pw_case_load_benchmark",
        "pw_case_parse_file",
        "pw_case_free",
        "pw_case_size",
        "pw_case_set_inertia",
        "pw_simulate",
        "pw_trajectory_free",
        "pw_trajectory_size",
        "pw_trajectory_times",
        "pw_trajectory_omega",
        "pw_trajectory_voltage",
        "pw_measure_rocof",
        "pw_reference_kappa",
        "pw_line_momentum",
        "pw_prony_fit",
        "pw_modes_count",
        "pw_modes_get",
        "pw_modes_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct PwCase PwCase;"));
    assert!(header.contains("PW_STATUS_NUMERICAL = 3"));
}
