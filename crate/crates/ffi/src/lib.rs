//! C interface to `dynalab`.
//!
//! Every fallible function returns a [`DynalabStatus`]; on failure a message
//! is kept per thread and can be read with [`dynalab_last_error`]. Objects
//! are opaque handles created by `*_new` and released by the matching
//! `*_free`. Handles are not thread-safe; use one per thread.
//!
//! Pointer arguments must be null or valid for the access the name implies:
//! handles live and freed at most once, `out` pointers writable, strings
//! NUL-terminated, arrays at least as long as the stated dimensions. Null
//! pointers are reported as [`DynalabStatus::NullPointer`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use dynalab::envs::GridWorld;
use dynalab::harness::{load_config, run, write_output, ExperimentConfig};
use dynalab::linalg::Matrix;
use dynalab::models::DirichletTabularModel;
use dynalab::replay::ReplayBuffer;
use dynalab::stability::{expected_td_outcome, stability_verdict, two_state_mrp, key_matrix, Verdict};
use dynalab::{Error, Transition};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynalabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidState = 3,
    InvalidAction = 4,
    EmptyBuffer = 5,
    ModelDirection = 6,
    ComponentMismatch = 7,
    Config = 8,
    Numeric = 9,
    Io = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynalabVerdict {
    Stable = 0,
    Marginal = 1,
    Divergent = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynalabDirection {
    Forward = 0,
    Backward = 1,
}

/// Plain-data mirror of one experience tuple.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DynalabTransition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub discount: f64,
    pub next_state: usize,
}

impl From<Transition> for DynalabTransition {
    fn from(t: Transition) -> Self {
        DynalabTransition {
            state: t.state,
            action: t.action,
            reward: t.reward,
            discount: t.discount,
            next_state: t.next_state,
        }
    }
}

impl From<DynalabTransition> for Transition {
    fn from(t: DynalabTransition) -> Self {
        Transition::new(t.state, t.action, t.reward, t.discount, t.next_state)
    }
}

pub struct DynalabRng(dynalab::Rng);
pub struct DynalabGrid(GridWorld);
pub struct DynalabReplay(ReplayBuffer);
pub struct DynalabTabularModel(DirichletTabularModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DynalabStatus {
    match e {
        Error::InvalidState(_) => DynalabStatus::InvalidState,
        Error::InvalidAction { .. } => DynalabStatus::InvalidAction,
        Error::EmptyBuffer | Error::EmptyBatch => DynalabStatus::EmptyBuffer,
        Error::ModelDirection { .. } => DynalabStatus::ModelDirection,
        Error::ComponentMismatch(_) => DynalabStatus::ComponentMismatch,
        Error::Config { .. } | Error::Parse(_) | Error::Layout(_) => DynalabStatus::Config,
        Error::Singular(_) | Error::NoConvergence => DynalabStatus::Numeric,
        Error::Io(_) | Error::Csv(_) => DynalabStatus::Io,
        _ => DynalabStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), DynalabStatus>) -> DynalabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DynalabStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            DynalabStatus::Panic
        }
    }
}

fn check<T>(r: dynalab::Result<T>) -> Result<T, DynalabStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null(what: &str) -> DynalabStatus {
    set_error(format!("{what} is null"));
    DynalabStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, DynalabStatus> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, DynalabStatus> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, DynalabStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        DynalabStatus::InvalidArgument
    })
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), DynalabStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    unsafe { out.write(value) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn dynalab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn dynalab_rng_new(seed: u64) -> *mut DynalabRng {
    Box::into_raw(Box::new(DynalabRng(dynalab::rng_from_seed(seed))))
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_rng_free(rng: *mut DynalabRng) {
    if !rng.is_null() {
        drop(unsafe { Box::from_raw(rng) });
    }
}

/// Creates a built-in grid world (`"four_rooms"` or `"dyna_maze"`).
#[no_mangle]
pub unsafe extern "C" fn dynalab_grid_new(
    name: *const c_char,
    slip_probability: f64,
    out: *mut *mut DynalabGrid,
) -> DynalabStatus {
    guard(|| {
        let name = unsafe { c_str(name, "name") }?;
        let grid = check(GridWorld::builtin(name, slip_probability))?;
        unsafe { write_out(out, Box::into_raw(Box::new(DynalabGrid(grid))), "out") }
    })
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_grid_free(grid: *mut DynalabGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Number of free cells, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dynalab_grid_num_states(grid: *const DynalabGrid) -> usize {
    unsafe { grid.as_ref() }.map_or(0, |g| g.0.num_states())
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_grid_num_actions(grid: *const DynalabGrid) -> usize {
    unsafe { grid.as_ref() }.map_or(0, |g| g.0.num_actions())
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_grid_reset(
    grid: *const DynalabGrid,
    rng: *mut DynalabRng,
    out_state: *mut usize,
) -> DynalabStatus {
    guard(|| {
        let grid = unsafe { deref(grid, "grid") }?;
        let rng = unsafe { deref_mut(rng, "rng") }?;
        let s = grid.0.reset(&mut rng.0);
        unsafe { write_out(out_state, s, "out_state") }
    })
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_grid_step(
    grid: *const DynalabGrid,
    state: usize,
    action: usize,
    rng: *mut DynalabRng,
    out: *mut DynalabTransition,
) -> DynalabStatus {
    guard(|| {
        let grid = unsafe { deref(grid, "grid") }?;
        let rng = unsafe { deref_mut(rng, "rng") }?;
        let t = check(grid.0.step(state, action, &mut rng.0))?;
        unsafe { write_out(out, t.into(), "out") }
    })
}

/// Creates a replay buffer evicting single transitions; capacity 0 means
/// unbounded.
#[no_mangle]
pub extern "C" fn dynalab_replay_new(capacity: usize) -> *mut DynalabReplay {
    let buffer = if capacity == 0 {
        ReplayBuffer::unbounded()
    } else {
        ReplayBuffer::with_capacity(capacity)
    };
    Box::into_raw(Box::new(DynalabReplay(buffer)))
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_replay_free(replay: *mut DynalabReplay) {
    if !replay.is_null() {
        drop(unsafe { Box::from_raw(replay) });
    }
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_replay_append(
    replay: *mut DynalabReplay,
    t: *const DynalabTransition,
) -> DynalabStatus {
    guard(|| {
        let replay = unsafe { deref_mut(replay, "replay") }?;
        let t = unsafe { deref(t, "transition") }?;
        replay.0.append((*t).into());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_replay_len(replay: *const DynalabReplay) -> usize {
    unsafe { replay.as_ref() }.map_or(0, |r| r.0.len())
}

/// Draws one stored transition uniformly at random.
#[no_mangle]
pub unsafe extern "C" fn dynalab_replay_sample(
    replay: *const DynalabReplay,
    rng: *mut DynalabRng,
    out: *mut DynalabTransition,
) -> DynalabStatus {
    guard(|| {
        let replay = unsafe { deref(replay, "replay") }?;
        let rng = unsafe { deref_mut(rng, "rng") }?;
        let t = *check(replay.0.sample_one(&mut rng.0))?;
        unsafe { write_out(out, t.into(), "out") }
    })
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_tabular_model_new(
    direction: DynalabDirection,
    num_states: usize,
    num_actions: usize,
    out: *mut *mut DynalabTabularModel,
) -> DynalabStatus {
    guard(|| {
        let model = check(match direction {
            DynalabDirection::Forward => DirichletTabularModel::forward(num_states, num_actions),
            DynalabDirection::Backward => DirichletTabularModel::backward(num_states, num_actions),
        })?;
        unsafe { write_out(out, Box::into_raw(Box::new(DynalabTabularModel(model))), "out") }
    })
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_tabular_model_free(model: *mut DynalabTabularModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

#[no_mangle]
pub unsafe extern "C" fn dynalab_tabular_model_update(
    model: *mut DynalabTabularModel,
    t: *const DynalabTransition,
) -> DynalabStatus {
    guard(|| {
        let model = unsafe { deref_mut(model, "model") }?;
        let t = unsafe { deref(t, "transition") }?;
        check(model.0.update(&(*t).into()))
    })
}

/// Posterior predictive probability of `next` after `(state, action)`.
#[no_mangle]
pub unsafe extern "C" fn dynalab_tabular_model_next_state_probability(
    model: *const DynalabTabularModel,
    state: usize,
    action: usize,
    next: usize,
    out: *mut f64,
) -> DynalabStatus {
    guard(|| {
        let model = unsafe { deref(model, "model") }?;
        let p = check(model.0.next_state_probability(state, action, next))?;
        unsafe { write_out(out, p, "out") }
    })
}

/// Samples `(r, γ, s′)` for `(state, action)` from a forward model.
#[no_mangle]
pub unsafe extern "C" fn dynalab_tabular_model_sample_forward(
    model: *const DynalabTabularModel,
    state: usize,
    action: usize,
    rng: *mut DynalabRng,
    out: *mut DynalabTransition,
) -> DynalabStatus {
    guard(|| {
        let model = unsafe { deref(model, "model") }?;
        let rng = unsafe { deref_mut(rng, "rng") }?;
        let t = check(model.0.sample_forward(state, action, &mut rng.0))?;
        unsafe { write_out(out, t.into(), "out") }
    })
}

/// Samples a predecessor pair for the reward, discount and next state of
/// `anchor` from a backward model.
#[no_mangle]
pub unsafe extern "C" fn dynalab_tabular_model_sample_backward(
    model: *const DynalabTabularModel,
    anchor: *const DynalabTransition,
    rng: *mut DynalabRng,
    out: *mut DynalabTransition,
) -> DynalabStatus {
    guard(|| {
        let model = unsafe { deref(model, "model") }?;
        let anchor = unsafe { deref(anchor, "anchor") }?;
        let rng = unsafe { deref_mut(rng, "rng") }?;
        let t = check(model.0.sample_backward(&(*anchor).into(), &mut rng.0))?;
        unsafe { write_out(out, t.into(), "out") }
    })
}

/// Verdict of expected linear TD for the row-major `n × n` key matrix `a`.
#[no_mangle]
pub unsafe extern "C" fn dynalab_stability_verdict(
    a: *const f64,
    n: usize,
    step_size: f64,
    out: *mut DynalabVerdict,
) -> DynalabStatus {
    guard(|| {
        if a.is_null() {
            return Err(null("a"));
        }
        let data = unsafe { std::slice::from_raw_parts(a, n * n) }.to_vec();
        let m = check(Matrix::from_vec(n, n, data))?;
        let report = check(stability_verdict(&m, step_size))?;
        let v = match report.verdict {
            Verdict::Stable => DynalabVerdict::Stable,
            Verdict::Marginal => DynalabVerdict::Marginal,
            Verdict::Divergent => DynalabVerdict::Divergent,
        };
        unsafe { write_out(out, v, "out") }
    })
}

/// The scalar key matrix of the two-state chain with sampling
/// distribution `(d1, 1 − d1)` and transition probability `p`.
#[no_mangle]
pub unsafe extern "C" fn dynalab_two_state_key_value(
    d1: f64,
    p: f64,
    discount: f64,
    out: *mut f64,
) -> DynalabStatus {
    guard(|| {
        let mrp = check(two_state_mrp(d1, p, discount))?;
        let (a, _) = check(key_matrix(&mrp))?;
        unsafe { write_out(out, a[(0, 0)], "out") }
    })
}

/// Iterates `w ← w + α(b − Aw)` from `w0` for at most `steps` steps or until
/// `‖w‖` exceeds `threshold`. Writes the final weights over `w0` and whether
/// the iterate blew up.
#[no_mangle]
pub unsafe extern "C" fn dynalab_iterate_expected_td(
    a: *const f64,
    b: *const f64,
    w: *mut f64,
    n: usize,
    step_size: f64,
    steps: usize,
    threshold: f64,
    out_diverged: *mut bool,
) -> DynalabStatus {
    guard(|| {
        if a.is_null() || b.is_null() || w.is_null() {
            return Err(null("matrix or vector argument"));
        }
        let m = check(Matrix::from_vec(n, n, unsafe { std::slice::from_raw_parts(a, n * n) }.to_vec()))?;
        let b = unsafe { std::slice::from_raw_parts(b, n) };
        let w = unsafe { std::slice::from_raw_parts_mut(w, n) };
        let outcome = check(expected_td_outcome(&m, b, w, step_size, steps, threshold))?;
        w.copy_from_slice(&outcome.final_weights);
        unsafe { write_out(out_diverged, outcome.diverged, "out_diverged") }
    })
}

/// Runs an experiment given a config file path or built-in name and writes
/// its CSV (and figure) into `out_dir`. A null `out_dir` uses the config's
/// own output directory.
#[no_mangle]
pub unsafe extern "C" fn dynalab_run_experiment(
    config: *const c_char,
    out_dir: *const c_char,
) -> DynalabStatus {
    guard(|| {
        let config: ExperimentConfig = check(load_config(unsafe { c_str(config, "config") }?))?;
        let dir = if out_dir.is_null() {
            config.output_dir.clone()
        } else {
            Path::new(unsafe { c_str(out_dir, "out_dir") }?).to_path_buf()
        };
        let output = check(run(&config))?;
        check(write_output(&config, &output, &dir)).map(|_| ())
    })
}
