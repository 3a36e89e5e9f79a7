use std::ffi::{CStr, CString};
use std::ptr;

use frameguide_ffi::*;

const MI: [f64; 1] = [-1.0];
const MF: [f64; 1] = [1.0];
const MN: [f64; 1] = [0.0];
const VAR: [f64; 1] = [0.1];

fn canonical_engine() -> *mut FgEngine {
    let mut e = ptr::null_mut();
    let s = unsafe { fg_engine_new(32, 1, 50, MI.as_ptr(), MF.as_ptr(), MN.as_ptr(), VAR.as_ptr(), &mut e) };
    assert_eq!(s, FgStatus::Ok);
    e
}

fn defaults() -> FgGuidanceParams {
    let mut p = std::mem::MaybeUninit::uninit();
    assert_eq!(unsafe { fg_guidance_params_default(p.as_mut_ptr()) }, FgStatus::Ok);
    unsafe { p.assume_init() }
}

fn final_state(traj: *const FgTrajectory) -> Vec<f64> {
    let mut buf = vec![0.0; 32];
    assert_eq!(unsafe { fg_trajectory_state(traj, 0, buf.as_mut_ptr(), 32) }, FgStatus::Ok);
    buf
}

fn last_error() -> String {
    let p = fg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn sample_and_score_round_trip() {
    let e = canonical_engine();
    let p = defaults();
    assert_eq!(p.omega, 12.0);
    assert_eq!(p.tau, 5);
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { fg_sample(e, &p, 3, &mut t) }, FgStatus::Ok);
    assert_eq!(unsafe { fg_trajectory_steps(t) }, 50);
    let z0 = final_state(t);
    assert!(z0[31] > z0[16] && z0[16] > z0[0]);

    let (mut w, mut f, mut sp) = (0.0, 0.0, 0usize);
    assert_eq!(unsafe { fg_scores(e, t, &mut w, &mut f, &mut sp) }, FgStatus::Ok);
    assert_eq!(w, 1.0);
    assert!(f > 0.9);

    let mut t2 = ptr::null_mut();
    assert_eq!(unsafe { fg_sample(e, &p, 3, &mut t2) }, FgStatus::Ok);
    assert_eq!(final_state(t2), z0);

    unsafe {
        fg_trajectory_free(t);
        fg_trajectory_free(t2);
        fg_engine_free(e);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let e = canonical_engine();
    let p = defaults();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { fg_sample(ptr::null(), &p, 0, &mut t) }, FgStatus::NullPointer);
    assert!(last_error().contains("engine"));

    let bad = FgGuidanceParams { tau: 80, ..p };
    assert_eq!(unsafe { fg_sample(e, &bad, 0, &mut t) }, FgStatus::Config);

    let mut buf = [0.0; 4];
    assert_eq!(unsafe { fg_sample(e, &p, 0, &mut t) }, FgStatus::Ok);
    assert_eq!(unsafe { fg_trajectory_state(t, 0, buf.as_mut_ptr(), 4) }, FgStatus::ShapeMismatch);
    assert_eq!(unsafe { fg_trajectory_state(t, 51, buf.as_mut_ptr(), 4) }, FgStatus::InvalidArgument);

    let mut out = 0.0;
    let zero = [0.0, 0.0];
    let one = [1.0, 0.0];
    assert_eq!(
        unsafe { fg_directional_similarity(zero.as_ptr(), one.as_ptr(), 2, &mut out) },
        FgStatus::ZeroVector
    );
    assert_eq!(
        unsafe { fg_directional_similarity(one.as_ptr(), one.as_ptr(), 2, &mut out) },
        FgStatus::Ok
    );
    assert_eq!(out, 1.0);

    let mut e2 = ptr::null_mut();
    let s = unsafe { fg_engine_new(32, 1, 50, MI.as_ptr(), MI.as_ptr(), MN.as_ptr(), VAR.as_ptr(), &mut e2) };
    assert_eq!(s, FgStatus::InvalidArgument);
    let neg = [-0.1];
    let s = unsafe { fg_engine_new(32, 1, 50, MI.as_ptr(), MF.as_ptr(), MN.as_ptr(), neg.as_ptr(), &mut e2) };
    assert_eq!(s, FgStatus::InvalidArgument);

    unsafe {
        fg_trajectory_free(t);
        fg_engine_free(e);
        fg_engine_free(ptr::null_mut());
        fg_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn epsilon_matches_closed_form() {
    let e = canonical_engine();
    let z = vec![0.25; 32];
    let mut out = vec![0.0; 32];
    assert_eq!(
        unsafe { fg_epsilon(e, z.as_ptr(), 32, 10, FgCondition::Final, out.as_mut_ptr()) },
        FgStatus::Ok
    );
    let sched = frameguide::diffusion::ScheduleParams::for_steps(50).build().unwrap();
    let ab = sched.alpha_bar(10);
    let want = sched.sigma(10) * (0.25 - ab.sqrt()) / (ab * 0.1 + 1.0 - ab);
    assert!(out.iter().all(|v| (v - want).abs() < 1e-14));
    assert_eq!(
        unsafe { fg_epsilon(e, z.as_ptr(), 32, 0, FgCondition::Final, out.as_mut_ptr()) },
        FgStatus::InvalidArgument
    );
    unsafe { fg_engine_free(e) };
}

#[test]
fn scenario_file_and_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core");
    let scen = CString::new(root.join("scenarios/canonical.toml").to_str().unwrap()).unwrap();
    let id = CString::new("canonical_1d").unwrap();
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { fg_engine_from_scenario_file(scen.as_ptr(), id.as_ptr(), 50, &mut e) }, FgStatus::Ok);
    let (mut f, mut d) = (0, 0);
    assert_eq!(unsafe { fg_engine_shape(e, &mut f, &mut d) }, FgStatus::Ok);
    assert_eq!((f, d), (32, 1));

    // the harness path and the C path agree on the same cell
    let p = defaults();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { fg_sample_cell(e, &p, 0, 4, &mut t) }, FgStatus::Ok);
    let sched = frameguide::diffusion::ScheduleParams::for_steps(50).build().unwrap();
    let specs = frameguide::bench::load_scenarios(root.join("scenarios/canonical.toml")).unwrap();
    let rt = frameguide::bench::ScenarioRuntime::new(&specs[0], &sched).unwrap();
    let cfg = frameguide::bench::RunConfig::default();
    let traj = frameguide::bench::run_scenario_mode(
        &cfg.guidance,
        cfg.sampler,
        0,
        &rt,
        frameguide::guidance::GuidanceMode::OursAnchored,
        4,
    )
    .unwrap();
    assert_eq!(final_state(t), traj.final_sample().as_slice());

    let missing = CString::new("nope").unwrap();
    let mut e2 = ptr::null_mut();
    assert_eq!(
        unsafe { fg_engine_from_scenario_file(scen.as_ptr(), missing.as_ptr(), 50, &mut e2) },
        FgStatus::InvalidArgument
    );

    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg_path,
        format!(
            "schema_version = 1\nscenarios = {:?}\nseeds = [0, 1]\nmodes = [\"ours_anchored\"]\n",
            root.join("scenarios/canonical.toml").to_str().unwrap()
        ),
    )
    .unwrap();
    let cfg_c = CString::new(cfg_path.to_str().unwrap()).unwrap();
    let out_c = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let mut had = -1;
    assert_eq!(unsafe { fg_run_benchmark(cfg_c.as_ptr(), out_c.as_ptr(), 1, &mut had) }, FgStatus::Ok);
    assert_eq!(had, 0);
    let csv = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 9 * 2);

    let bogus = CString::new(dir.path().join("missing.toml").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { fg_run_benchmark(bogus.as_ptr(), ptr::null(), 0, ptr::null_mut()) }, FgStatus::Io);

    unsafe {
        fg_trajectory_free(t);
        fg_engine_free(e);
    }
}
