//! C ABI over the frameguide engine.
//!
//! Objects cross the boundary as opaque handles (`FgEngine`, `FgTrajectory`)
//! that the caller releases with the matching `*_free`. Every fallible call
//! returns an [`FgStatus`]; on failure a message is kept per thread and can be
//! read with [`fg_last_error_message`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use frameguide::bench::{load_scenarios, run_benchmark, run_scenario_mode, write_report, RunConfig, ScenarioRuntime};
use frameguide::denoiser::{AnalyticDenoiser, ConditionId, ConditionSet, Denoiser, GaussianCondition};
use frameguide::diffusion::{LatentVideo, ScheduleParams};
use frameguide::guidance::{GuidanceMode, GuidanceSpec};
use frameguide::metrics::{directional_similarity, framewise_score, wholistic_score, ToyLinearEmbedder};
use frameguide::sampler::{sample_video, SamplerKind, Trajectory};
use frameguide::diffusion::NoiseRng;
use frameguide::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    DegenerateDirection = 4,
    ZeroVector = 5,
    Parse = 6,
    Validation = 7,
    Config = 8,
    Io = 9,
    Numeric = 10,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgMode {
    OursAnchored = 0,
    NaiveAdditive = 1,
    SinglePrompt = 2,
    PromptInterpolation = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgCondition {
    Initial = 0,
    Final = 1,
    Neutral = 2,
    Null = 3,
}

/// Sampling parameters. `middle_frame < 0` selects `frames / 2`;
/// `ddpm != 0` selects ancestral sampling and ignores `eta`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgGuidanceParams {
    pub omega: f64,
    pub tau: usize,
    pub alpha_max: f64,
    pub middle_frame: i64,
    pub mode: FgMode,
    pub eta: f64,
    pub ddpm: c_int,
}

/// Scenario runtime: schedule, analytic denoiser and embedder.
pub struct FgEngine {
    runtime: ScenarioRuntime,
}

pub struct FgTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> FgStatus {
    match e {
        Error::ShapeMismatch { .. } | Error::DimMismatch { .. } => FgStatus::ShapeMismatch,
        Error::DegenerateDirection { .. } => FgStatus::DegenerateDirection,
        Error::ZeroVector => FgStatus::ZeroVector,
        Error::Parse { .. } | Error::Json(_) => FgStatus::Parse,
        Error::Validation { .. } => FgStatus::Validation,
        Error::Config(_) | Error::Embedder(_) => FgStatus::Config,
        Error::Io(_) | Error::Csv(_) => FgStatus::Io,
        Error::NonFinite(_) => FgStatus::Numeric,
        Error::InvalidScheduleParams(_)
        | Error::NonPositiveVariance { .. }
        | Error::EmptyMixture
        | Error::WeightsNotNormalized { .. }
        | Error::StepOutOfRange { .. }
        | Error::InvalidLatent(_) => FgStatus::InvalidArgument,
    }
}

/// Runs `f`, records any error or panic and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), (FgStatus, String)>) -> FgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside frameguide");
            FgStatus::Panic
        }
    }
}

fn lift(e: Error) -> (FgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FgStatus, String) {
    (FgStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> (FgStatus, String) {
    (FgStatus::InvalidArgument, msg.into())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (FgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (FgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn mode_of(m: FgMode) -> GuidanceMode {
    match m {
        FgMode::OursAnchored => GuidanceMode::OursAnchored,
        FgMode::NaiveAdditive => GuidanceMode::NaiveAdditive,
        FgMode::SinglePrompt => GuidanceMode::SinglePrompt,
        FgMode::PromptInterpolation => GuidanceMode::PromptInterpolation,
    }
}

fn condition_of(c: FgCondition) -> ConditionId {
    match c {
        FgCondition::Initial => ConditionId::Initial,
        FgCondition::Final => ConditionId::Final,
        FgCondition::Neutral => ConditionId::Neutral,
        FgCondition::Null => ConditionId::Null,
    }
}

fn spec_of(p: &FgGuidanceParams) -> (GuidanceSpec, SamplerKind) {
    let spec = GuidanceSpec {
        omega: p.omega,
        tau: p.tau,
        alpha_max: p.alpha_max,
        middle_frame: usize::try_from(p.middle_frame).ok(),
        mode: mode_of(p.mode),
        ..GuidanceSpec::default()
    };
    let kind = if p.ddpm != 0 {
        SamplerKind::DdpmAncestral
    } else {
        SamplerKind::Ddim { eta: p.eta }
    };
    (spec, kind)
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Fills `out` with the reference defaults (omega 12, tau 5, alpha_max 1,
/// anchored mode, deterministic DDIM).
///
/// # Safety
/// `out` must be null or point to writable memory for one `FgGuidanceParams`.
#[no_mangle]
pub unsafe extern "C" fn fg_guidance_params_default(out: *mut FgGuidanceParams) -> FgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = GuidanceSpec::default();
        out.write(FgGuidanceParams {
            omega: d.omega,
            tau: d.tau,
            alpha_max: d.alpha_max,
            middle_frame: -1,
            mode: FgMode::OursAnchored,
            eta: 0.0,
            ddpm: 0,
        });
        Ok(())
    })
}

/// Builds an engine for isotropic-per-coordinate Gaussian conditions. Each of
/// the three mean arrays and `var` hold `dim` values; `var` is shared.
///
/// # Safety
/// Array pointers must reference `dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_engine_new(
    frames: usize,
    dim: usize,
    steps: usize,
    mean_initial: *const f64,
    mean_final: *const f64,
    mean_neutral: *const f64,
    var: *const f64,
    out: *mut *mut FgEngine,
) -> FgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if frames < 2 || dim == 0 {
            return Err(invalid("need frames >= 2 and dim >= 1"));
        }
        let var = slice_arg(var, dim, "var")?.to_vec();
        let sched = ScheduleParams::for_steps(steps).build().map_err(lift)?;
        let mut den = AnalyticDenoiser::new(sched, dim);
        let mut emb = ToyLinearEmbedder::identity(dim);
        for (id, p, name) in [
            (ConditionId::Initial, mean_initial, "mean_initial"),
            (ConditionId::Final, mean_final, "mean_final"),
            (ConditionId::Neutral, mean_neutral, "mean_neutral"),
        ] {
            let mean = slice_arg(p, dim, name)?.to_vec();
            emb.register_condition(id.clone(), &mean).map_err(lift)?;
            den.register(id, GaussianCondition::new(mean, var.clone()).map_err(lift)?)
                .map_err(lift)?;
        }
        if den.condition(&ConditionId::Initial).ok() == den.condition(&ConditionId::Final).ok() {
            return Err(invalid("initial and final conditions are identical"));
        }
        let spec = frameguide::bench::ScenarioSpec {
            id: "ffi".into(),
            category: frameguide::bench::Category::Custom,
            frames,
            dim,
            notes: String::new(),
            conditions: [ConditionId::Initial, ConditionId::Final, ConditionId::Neutral]
                .into_iter()
                .map(|id| {
                    let c = den.condition(&id).expect("registered").clone();
                    (id, c)
                })
                .collect(),
            single: ConditionId::Neutral,
            null_weights: None,
            projection: None,
        };
        let runtime = ScenarioRuntime {
            spec,
            denoiser: den,
            embedder: emb,
            conditions: ConditionSet::default(),
        };
        out.write(Box::into_raw(Box::new(FgEngine { runtime })));
        Ok(())
    })
}

/// Builds an engine from one scenario of a scenario file. A null
/// `scenario_id` picks the first scenario.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_engine_from_scenario_file(
    path: *const c_char,
    scenario_id: *const c_char,
    steps: usize,
    out: *mut *mut FgEngine,
) -> FgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let specs = load_scenarios(path).map_err(lift)?;
        let spec = if scenario_id.is_null() {
            specs.first().ok_or_else(|| invalid("scenario file is empty"))?
        } else {
            let id = str_arg(scenario_id, "scenario_id")?;
            specs
                .iter()
                .find(|s| s.id == id)
                .ok_or_else(|| invalid(format!("scenario `{id}` not found")))?
        };
        let sched = ScheduleParams::for_steps(steps).build().map_err(lift)?;
        let runtime = ScenarioRuntime::new(spec, &sched).map_err(lift)?;
        out.write(Box::into_raw(Box::new(FgEngine { runtime })));
        Ok(())
    })
}

/// # Safety
/// `engine` must be null or a handle from an `fg_engine_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn fg_engine_free(engine: *mut FgEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Writes `frames` and `dim` of the engine's scenario.
///
/// # Safety
/// `engine` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_engine_shape(engine: *const FgEngine, frames: *mut usize, dim: *mut usize) -> FgStatus {
    guard(|| {
        let e = engine.as_ref().ok_or_else(|| null("engine"))?;
        if frames.is_null() || dim.is_null() {
            return Err(null("frames/dim"));
        }
        frames.write(e.runtime.spec.frames);
        dim.write(e.runtime.spec.dim);
        Ok(())
    })
}

/// Evaluates the analytic denoiser on a `frames x dim` row-major latent.
///
/// # Safety
/// `zt` and `out` must each reference `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fg_epsilon(
    engine: *const FgEngine,
    zt: *const f64,
    len: usize,
    t: usize,
    condition: FgCondition,
    out: *mut f64,
) -> FgStatus {
    guard(|| {
        let e = engine.as_ref().ok_or_else(|| null("engine"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let dim = e.runtime.spec.dim;
        if len == 0 || !len.is_multiple_of(dim) {
            return Err(invalid(format!("len {len} is not a multiple of dim {dim}")));
        }
        let z = LatentVideo::from_vec(len / dim, dim, slice_arg(zt, len, "zt")?.to_vec()).map_err(lift)?;
        let eps = e.runtime.denoiser.evaluate(&z, t, &condition_of(condition)).map_err(lift)?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(eps.as_slice());
        Ok(())
    })
}

/// Samples one video. The noise seed is used as given.
///
/// # Safety
/// `engine` and `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_sample(
    engine: *const FgEngine,
    params: *const FgGuidanceParams,
    seed: u64,
    out: *mut *mut FgTrajectory,
) -> FgStatus {
    guard(|| {
        let e = engine.as_ref().ok_or_else(|| null("engine"))?;
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (spec, kind) = spec_of(p);
        e.runtime.spec.check_mode(spec.mode).map_err(lift)?;
        let rt = &e.runtime;
        let mut rng = NoiseRng::new(seed);
        let traj = sample_video(
            &spec,
            kind,
            &rt.conditions,
            rt.spec.frames,
            rt.spec.dim,
            &rt.denoiser,
            rt.denoiser.schedule(),
            &mut rng,
        )
        .map_err(lift)?;
        out.write(Box::into_raw(Box::new(FgTrajectory { inner: traj })));
        Ok(())
    })
}

/// Samples like the benchmark harness does, deriving the noise seed from
/// `master_seed`, the scenario id and `seed`.
///
/// # Safety
/// As for [`fg_sample`].
#[no_mangle]
pub unsafe extern "C" fn fg_sample_cell(
    engine: *const FgEngine,
    params: *const FgGuidanceParams,
    master_seed: u64,
    seed: u64,
    out: *mut *mut FgTrajectory,
) -> FgStatus {
    guard(|| {
        let e = engine.as_ref().ok_or_else(|| null("engine"))?;
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (spec, kind) = spec_of(p);
        let traj = run_scenario_mode(&spec, kind, master_seed, &e.runtime, spec.mode, seed).map_err(lift)?;
        out.write(Box::into_raw(Box::new(FgTrajectory { inner: traj })));
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn fg_trajectory_free(traj: *mut FgTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of reverse steps `T`; states are indexed `0..=T`.
///
/// # Safety
/// `traj` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn fg_trajectory_steps(traj: *const FgTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.steps())
}

/// Copies the state at step `t` (0 = clean sample) into `buf`, which must
/// hold exactly `frames * dim` doubles.
///
/// # Safety
/// `buf` must reference `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fg_trajectory_state(
    traj: *const FgTrajectory,
    t: usize,
    buf: *mut f64,
    len: usize,
) -> FgStatus {
    guard(|| {
        let tr = traj.as_ref().ok_or_else(|| null("traj"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let z = tr
            .inner
            .zs
            .get(t)
            .ok_or_else(|| invalid(format!("state {t} out of range 0..={}", tr.inner.steps())))?;
        if z.as_slice().len() != len {
            return Err((
                FgStatus::ShapeMismatch,
                format!("buffer holds {len} values, state has {}", z.as_slice().len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(z.as_slice());
        Ok(())
    })
}

/// Transition metrics of the clean sample. `wholistic` is set to NaN and
/// `FG_STATUS_ZERO_VECTOR` returned when the first and last frames embed
/// identically; the frame-wise outputs are still written in that case.
///
/// # Safety
/// Handles must be live; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_scores(
    engine: *const FgEngine,
    traj: *const FgTrajectory,
    wholistic: *mut f64,
    framewise: *mut f64,
    static_pairs: *mut usize,
) -> FgStatus {
    guard(|| {
        let e = engine.as_ref().ok_or_else(|| null("engine"))?;
        let tr = traj.as_ref().ok_or_else(|| null("traj"))?;
        if wholistic.is_null() || framewise.is_null() || static_pairs.is_null() {
            return Err(null("score outputs"));
        }
        let z0 = tr.inner.final_sample();
        let (ci, cf) = (&ConditionId::Initial, &ConditionId::Final);
        let fw = framewise_score(z0, ci, cf, &e.runtime.embedder).map_err(lift)?;
        framewise.write(fw.mean);
        static_pairs.write(fw.static_pairs);
        match wholistic_score(z0, ci, cf, &e.runtime.embedder) {
            Ok(w) => {
                wholistic.write(w);
                Ok(())
            }
            Err(err) => {
                wholistic.write(f64::NAN);
                Err(lift(err))
            }
        }
    })
}

/// Cosine similarity of two vectors of length `len`.
///
/// # Safety
/// `a` and `b` must reference `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_directional_similarity(
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> FgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = slice_arg(a, len, "a")?;
        let b = slice_arg(b, len, "b")?;
        out.write(directional_similarity(a, b).map_err(lift)?);
        Ok(())
    })
}

/// Runs the benchmark described by a config file and writes reports into
/// `out_dir` (or the config's output when null). `had_cell_errors` is set to
/// 1 when any cell recorded an error.
///
/// # Safety
/// Strings must be NUL-terminated; `had_cell_errors` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn fg_run_benchmark(
    config_path: *const c_char,
    out_dir: *const c_char,
    parallel: c_int,
    had_cell_errors: *mut c_int,
) -> FgStatus {
    guard(|| {
        let cfg_path = str_arg(config_path, "config_path")?;
        let mut cfg = RunConfig::load(cfg_path).map_err(lift)?;
        if !out_dir.is_null() {
            cfg.output = str_arg(out_dir, "out_dir")?.into();
        }
        let scen = cfg
            .scenarios
            .clone()
            .ok_or_else(|| (FgStatus::Config, "config names no scenario file".to_string()))?;
        let specs = load_scenarios(&scen).map_err(lift)?;
        let report = run_benchmark(&cfg, &specs, parallel != 0).map_err(lift)?;
        write_report(&report, Path::new(&cfg.output), None).map_err(lift)?;
        if !had_cell_errors.is_null() {
            had_cell_errors.write(c_int::from(report.has_errors()));
        }
        Ok(())
    })
}
