//! C ABI over the simulation core: opaque handles, integer status codes,
//! caller-owned output parameters. Strings returned by this library must
//! be released with `evsim_string_free`.

use std::ffi::{c_char, CStr, CString};

use evsim::bandits::{ContextVector, LinUcb, LinUcbConfig, QLearnerConfig, QTable};
use evsim::rng::{RngStreams, RunRng, Stream};

pub const EVSIM_OK: i32 = 0;
pub const EVSIM_ERR_NULL_POINTER: i32 = 1;
pub const EVSIM_ERR_INVALID_ARGUMENT: i32 = 2;
pub const EVSIM_ERR_CONTRACT: i32 = 3;
pub const EVSIM_ERR_UTF8: i32 = 4;
pub const EVSIM_ERR_RUN_FAILED: i32 = 5;

/// Opaque LinUCB learner handle.
pub struct EvsimLinUcb {
    inner: LinUcb,
    rng: RunRng,
}

/// Opaque tabular Q-learner handle.
pub struct EvsimQLearner {
    table: QTable,
    config: QLearnerConfig,
    rng: RunRng,
}

fn context_from_raw(ptr: *const f64, len: usize) -> Option<ContextVector> {
    if ptr.is_null() {
        return None;
    }
    let slice = unsafe { std::slice::from_raw_parts(ptr, len) };
    ContextVector::new(slice.to_vec()).ok()
}

fn string_out(s: String, out: *mut *mut c_char) -> i32 {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            EVSIM_OK
        }
        Err(_) => EVSIM_ERR_UTF8,
    }
}

/// Creates a LinUCB learner. `shared_dimension` 0 selects the disjoint
/// model; nonzero the hybrid model. `seed` drives tie breaking.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn evsim_linucb_new(
    alpha: f64,
    dimension: usize,
    shared_dimension: usize,
    arm_count: usize,
    seed: u64,
    out: *mut *mut EvsimLinUcb,
) -> i32 {
    if out.is_null() {
        return EVSIM_ERR_NULL_POINTER;
    }
    match LinUcb::new(LinUcbConfig { alpha, dimension, shared_dimension, arm_count }) {
        Ok(inner) => {
            let rng = RngStreams::new(seed).stream(Stream::TieBreak);
            *out = Box::into_raw(Box::new(EvsimLinUcb { inner, rng }));
            EVSIM_OK
        }
        Err(_) => EVSIM_ERR_INVALID_ARGUMENT,
    }
}

/// # Safety
/// `handle` must come from `evsim_linucb_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn evsim_linucb_free(handle: *mut EvsimLinUcb) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Upper-confidence prediction for one arm. `z`/`z_len` are ignored in
/// disjoint mode and required in hybrid mode.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn evsim_linucb_predict(
    handle: *const EvsimLinUcb,
    arm: usize,
    x: *const f64,
    x_len: usize,
    z: *const f64,
    z_len: usize,
    out: *mut f64,
) -> i32 {
    let Some(h) = handle.as_ref() else { return EVSIM_ERR_NULL_POINTER };
    if out.is_null() {
        return EVSIM_ERR_NULL_POINTER;
    }
    if arm >= h.inner.arms.len() {
        return EVSIM_ERR_INVALID_ARGUMENT;
    }
    let Some(ctx) = context_from_raw(x, x_len) else { return EVSIM_ERR_INVALID_ARGUMENT };
    let zctx = if h.inner.config.is_hybrid() {
        match context_from_raw(z, z_len) {
            Some(c) => Some(c),
            None => return EVSIM_ERR_INVALID_ARGUMENT,
        }
    } else {
        None
    };
    match evsim::bandits::linucb_predict(
        &h.inner.arms[arm],
        h.inner.shared.as_ref(),
        &ctx,
        zctx.as_ref(),
        h.inner.config.alpha,
    ) {
        Ok(p) => {
            *out = p;
            EVSIM_OK
        }
        Err(_) => EVSIM_ERR_CONTRACT,
    }
}

/// Selects the best arm for a context shared by all arms; ties are broken
/// by the handle's seeded rng.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn evsim_linucb_select(
    handle: *mut EvsimLinUcb,
    x: *const f64,
    x_len: usize,
    z: *const f64,
    z_len: usize,
    out: *mut usize,
) -> i32 {
    let Some(h) = handle.as_mut() else { return EVSIM_ERR_NULL_POINTER };
    if out.is_null() {
        return EVSIM_ERR_NULL_POINTER;
    }
    let Some(ctx) = context_from_raw(x, x_len) else { return EVSIM_ERR_INVALID_ARGUMENT };
    let arm_count = h.inner.config.arm_count;
    let contexts: Vec<ContextVector> = (0..arm_count).map(|_| ctx.clone()).collect();
    let shared_contexts: Option<Vec<ContextVector>> = if h.inner.config.is_hybrid() {
        match context_from_raw(z, z_len) {
            Some(zc) => Some((0..arm_count).map(|_| zc.clone()).collect()),
            None => return EVSIM_ERR_INVALID_ARGUMENT,
        }
    } else {
        None
    };
    let valid: Vec<usize> = (0..arm_count).collect();
    match h.inner.select(&contexts, shared_contexts.as_deref(), &valid, &mut h.rng) {
        Ok(arm) => {
            *out = arm;
            EVSIM_OK
        }
        Err(_) => EVSIM_ERR_CONTRACT,
    }
}

/// Feeds an observed reward back into the chosen arm.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn evsim_linucb_update(
    handle: *mut EvsimLinUcb,
    arm: usize,
    x: *const f64,
    x_len: usize,
    z: *const f64,
    z_len: usize,
    reward: f64,
) -> i32 {
    let Some(h) = handle.as_mut() else { return EVSIM_ERR_NULL_POINTER };
    if arm >= h.inner.arms.len() {
        return EVSIM_ERR_INVALID_ARGUMENT;
    }
    let Some(ctx) = context_from_raw(x, x_len) else { return EVSIM_ERR_INVALID_ARGUMENT };
    let zctx = if h.inner.config.is_hybrid() {
        match context_from_raw(z, z_len) {
            Some(c) => Some(c),
            None => return EVSIM_ERR_INVALID_ARGUMENT,
        }
    } else {
        None
    };
    match h.inner.update(arm, &ctx, zctx.as_ref(), reward) {
        Ok(()) => EVSIM_OK,
        Err(_) => EVSIM_ERR_CONTRACT,
    }
}

/// Serializes the learner to its versioned text snapshot.
///
/// # Safety
/// `out` must be a valid pointer; release the string with
/// `evsim_string_free`.
#[no_mangle]
pub unsafe extern "C" fn evsim_linucb_snapshot(
    handle: *const EvsimLinUcb,
    out: *mut *mut c_char,
) -> i32 {
    let Some(h) = handle.as_ref() else { return EVSIM_ERR_NULL_POINTER };
    if out.is_null() {
        return EVSIM_ERR_NULL_POINTER;
    }
    string_out(h.inner.to_snapshot(), out)
}

/// Restores a learner from a snapshot produced by
/// `evsim_linucb_snapshot`.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn evsim_linucb_from_snapshot(
    text: *const c_char,
    seed: u64,
    out: *mut *mut EvsimLinUcb,
) -> i32 {
    if text.is_null() || out.is_null() {
        return EVSIM_ERR_NULL_POINTER;
    }
    let Ok(text) = CStr::from_ptr(text).to_str() else { return EVSIM_ERR_UTF8 };
    match LinUcb::from_snapshot(text) {
        Ok(inner) => {
            let rng = RngStreams::new(seed).stream(Stream::TieBreak);
            *out = Box::into_raw(Box::new(EvsimLinUcb { inner, rng }));
            EVSIM_OK
        }
        Err(_) => EVSIM_ERR_INVALID_ARGUMENT,
    }
}

/// Creates a tabular Q-learner handle.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn evsim_qlearner_new(
    learning_rate: f64,
    discount: f64,
    epsilon: f64,
    initial_value: f64,
    action_count: u32,
    seed: u64,
    out: *mut *mut EvsimQLearner,
) -> i32 {
    if out.is_null() {
        return EVSIM_ERR_NULL_POINTER;
    }
    let config = QLearnerConfig { learning_rate, discount, epsilon, initial_value };
    if config.validate().is_err() || action_count == 0 {
        return EVSIM_ERR_INVALID_ARGUMENT;
    }
    let rng = RngStreams::new(seed).stream(Stream::EpsilonGreedy);
    let table = QTable::new(initial_value, action_count);
    *out = Box::into_raw(Box::new(EvsimQLearner { table, config, rng }));
    EVSIM_OK
}

/// # Safety
/// `handle` must come from `evsim_qlearner_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn evsim_qlearner_free(handle: *mut EvsimQLearner) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Reads the current action value for a state/action pair.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evsim_qlearner_get(
    handle: *const EvsimQLearner,
    state: u32,
    action: u32,
    out: *mut f64,
) -> i32 {
    let Some(h) = handle.as_ref() else { return EVSIM_ERR_NULL_POINTER };
    if out.is_null() {
        return EVSIM_ERR_NULL_POINTER;
    }
    *out = h.table.get(state, action);
    EVSIM_OK
}

/// One Bellman update for an observed transition.
///
/// # Safety
/// `handle` must be valid.
#[no_mangle]
pub unsafe extern "C" fn evsim_qlearner_update(
    handle: *mut EvsimQLearner,
    state: u32,
    action: u32,
    reward: f64,
    next_state: u32,
) -> i32 {
    let Some(h) = handle.as_mut() else { return EVSIM_ERR_NULL_POINTER };
    match evsim::bandits::q_update(&mut h.table, &h.config, state, action, reward, next_state) {
        Ok(()) => EVSIM_OK,
        Err(_) => EVSIM_ERR_CONTRACT,
    }
}

/// Epsilon-greedy action choice over all actions of the table.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evsim_qlearner_select(
    handle: *mut EvsimQLearner,
    state: u32,
    out: *mut u32,
) -> i32 {
    let Some(h) = handle.as_mut() else { return EVSIM_ERR_NULL_POINTER };
    if out.is_null() {
        return EVSIM_ERR_NULL_POINTER;
    }
    let valid: Vec<u32> = (0..h.table.action_count).collect();
    match evsim::bandits::epsilon_greedy_select(&h.table, &h.config, state, &valid, &mut h.rng) {
        Ok(a) => {
            *out = a;
            EVSIM_OK
        }
        Err(_) => EVSIM_ERR_CONTRACT,
    }
}

/// Runs a full scenario from its TOML text and returns the metrics as a
/// JSON string.
///
/// # Safety
/// `config_toml` must be a valid NUL-terminated string; release the
/// output with `evsim_string_free`.
#[no_mangle]
pub unsafe extern "C" fn evsim_run_scenario(
    config_toml: *const c_char,
    out_metrics_json: *mut *mut c_char,
) -> i32 {
    if config_toml.is_null() || out_metrics_json.is_null() {
        return EVSIM_ERR_NULL_POINTER;
    }
    let Ok(text) = CStr::from_ptr(config_toml).to_str() else { return EVSIM_ERR_UTF8 };
    let config = match evsim::scenario::ScenarioConfig::from_toml(text) {
        Ok(c) => c,
        Err(_) => return EVSIM_ERR_INVALID_ARGUMENT,
    };
    match evsim::engine::run(&config) {
        Ok(metrics) => string_out(metrics.to_json(), out_metrics_json),
        Err(_) => EVSIM_ERR_RUN_FAILED,
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn evsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn linucb_handle_lifecycle() {
        unsafe {
            let mut h: *mut EvsimLinUcb = ptr::null_mut();
            assert_eq!(evsim_linucb_new(1.0, 3, 0, 2, 7, &mut h), EVSIM_OK);
            let x = [1.0, 0.0, 0.0];
            let mut p = 0.0;
            assert_eq!(evsim_linucb_predict(h, 0, x.as_ptr(), 3, ptr::null(), 0, &mut p), EVSIM_OK);
            assert!((p - 1.0).abs() < 1e-12); // fresh arm: 0 + sqrt(1)
            assert_eq!(evsim_linucb_update(h, 0, x.as_ptr(), 3, ptr::null(), 0, 0.5), EVSIM_OK);
            let mut arm = usize::MAX;
            assert_eq!(evsim_linucb_select(h, x.as_ptr(), 3, ptr::null(), 0, &mut arm), EVSIM_OK);
            assert!(arm < 2);
            let mut snap: *mut c_char = ptr::null_mut();
            assert_eq!(evsim_linucb_snapshot(h, &mut snap), EVSIM_OK);
            let mut h2: *mut EvsimLinUcb = ptr::null_mut();
            assert_eq!(evsim_linucb_from_snapshot(snap, 7, &mut h2), EVSIM_OK);
            let mut p2 = 0.0;
            assert_eq!(evsim_linucb_predict(h2, 0, x.as_ptr(), 3, ptr::null(), 0, &mut p2), EVSIM_OK);
            let mut p1 = 0.0;
            assert_eq!(evsim_linucb_predict(h, 0, x.as_ptr(), 3, ptr::null(), 0, &mut p1), EVSIM_OK);
            assert_eq!(p1, p2);
            evsim_string_free(snap);
            evsim_linucb_free(h);
            evsim_linucb_free(h2);
        }
    }

    #[test]
    fn null_and_invalid_arguments_are_reported() {
        unsafe {
            assert_eq!(
                evsim_linucb_new(1.0, 3, 0, 2, 7, ptr::null_mut()),
                EVSIM_ERR_NULL_POINTER
            );
            let mut h: *mut EvsimLinUcb = ptr::null_mut();
            assert_eq!(evsim_linucb_new(-1.0, 3, 0, 2, 7, &mut h), EVSIM_ERR_INVALID_ARGUMENT);
            assert_eq!(evsim_linucb_new(1.0, 3, 0, 2, 7, &mut h), EVSIM_OK);
            let mut p = 0.0;
            assert_eq!(
                evsim_linucb_predict(h, 9, [0.0; 3].as_ptr(), 3, ptr::null(), 0, &mut p),
                EVSIM_ERR_INVALID_ARGUMENT
            );
            assert_eq!(
                evsim_linucb_predict(ptr::null(), 0, [0.0; 3].as_ptr(), 3, ptr::null(), 0, &mut p),
                EVSIM_ERR_NULL_POINTER
            );
            evsim_linucb_free(h);
            evsim_linucb_free(ptr::null_mut()); // tolerated
        }
    }

    #[test]
    fn qlearner_handle_lifecycle() {
        unsafe {
            let mut h: *mut EvsimQLearner = ptr::null_mut();
            assert_eq!(evsim_qlearner_new(0.5, 0.9, 0.1, 0.0, 2, 3, &mut h), EVSIM_OK);
            assert_eq!(evsim_qlearner_update(h, 0, 1, 1.0, 0), EVSIM_OK);
            let mut q = 0.0;
            assert_eq!(evsim_qlearner_get(h, 0, 1, &mut q), EVSIM_OK);
            assert!((q - 0.5).abs() < 1e-12);
            let mut a = u32::MAX;
            assert_eq!(evsim_qlearner_select(h, 0, &mut a), EVSIM_OK);
            assert!(a < 2);
            evsim_qlearner_free(h);
        }
    }

    #[test]
    fn run_scenario_from_toml() {
        unsafe {
            let cfg = evsim::scenario::generate_desk(
                1,
                evsim::scenario::desk_agents(evsim::agents::Profile::ConstantLoading),
                evsim::scenario::desk_vehicles(
                    evsim::mobility::ChargingBehavior::AlwaysLoad,
                    evsim::mobility::DiversionBehavior::DoNotDivert,
                ),
                &evsim::scenario::DeskParams {
                    substation_count: 8,
                    station_count: 6,
                    vehicle_count: 5,
                    days: 1,
                    skew: 0.3,
                    spaces_per_station: 3,
                },
            );
            let toml = CString::new(cfg.to_toml()).unwrap();
            let mut out: *mut c_char = ptr::null_mut();
            assert_eq!(evsim_run_scenario(toml.as_ptr(), &mut out), EVSIM_OK);
            let json = CStr::from_ptr(out).to_str().unwrap();
            let metrics = evsim::metrics::MetricsRecord::from_json(json).unwrap();
            assert_eq!(metrics.vehicles.len(), 5);
            evsim_string_free(out);

            let bad = CString::new("not toml").unwrap();
            assert_eq!(evsim_run_scenario(bad.as_ptr(), &mut out), EVSIM_ERR_INVALID_ARGUMENT);
        }
    }
}
