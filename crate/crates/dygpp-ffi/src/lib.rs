//! C ABI over the dygpp pipeline: opaque handles, integer status codes, and
//! a thread-local last-error message.
//!
//! Conventions:
//! - Every fallible call returns a status code: 0 success, 1 usage error,
//!   2 data/io error, 3 numeric error, 4 gradient-check failure. On any
//!   nonzero status the thread-local error message is set and readable via
//!   [`dygpp_last_error`].
//! - Objects are created behind opaque pointers and released with their
//!   matching `_free` function exactly once. All pointers must come from
//!   this library; null is rejected as a usage error where a handle is
//!   required.
//! - Strings are NUL-terminated UTF-8. Strings returned by the library are
//!   owned by the caller and must be released with [`dygpp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use dygpp::baselines::{evaluate_baseline, BaselineMethod};
use dygpp::config::Config;
use dygpp::error::{DygppError, Result};
use dygpp::event_store::{chronological_split, EventLog, NodeKind};
use dygpp::metrics::{evaluate_model, EvalScope};
use dygpp::model::DygppModel;
use dygpp::synth::{generate_log, GeneratorConfig};
use dygpp::trainer::train;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let cleaned: String = message.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = Some(CString::new(cleaned).expect("no interior NUL"));
    });
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_from(err: &DygppError) -> c_int {
    set_error(&err.to_string());
    c_int::from(err.exit_code())
}

/// Run a fallible body, translating errors and panics into status codes.
fn guarded(body: impl FnOnce() -> Result<()>) -> c_int {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => status_from(&e),
        Err(_) => {
            set_error("internal panic");
            3
        }
    }
}

fn usage(message: &str) -> DygppError {
    DygppError::Usage(message.to_string())
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string or the call is rejected.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str> {
    if ptr.is_null() {
        return Err(usage(&format!("{what} must not be null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| usage(&format!("{what} must be valid UTF-8")))
}

unsafe fn optional_path(ptr: *const c_char, what: &str) -> Result<Option<PathBuf>> {
    if ptr.is_null() {
        return Ok(None);
    }
    Ok(Some(PathBuf::from(required_str(ptr, what)?)))
}

unsafe fn handle_ref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T> {
    ptr.as_ref()
        .ok_or_else(|| usage(&format!("{what} handle must not be null")))
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    Config::resolve(path, &[])
}

/// Opaque event-log handle.
pub struct DygppLog {
    log: EventLog,
}

/// Opaque handle bundling a trained model with its parameters, the log it
/// was built over, and the resolved configuration.
pub struct DygppPredictor {
    model: DygppModel,
    store: dygpp::autodiff::params::ParameterStore,
    log: EventLog,
    config: Config,
}

/// Copy the last error message for this thread into `buf` (truncated to
/// `cap - 1` bytes, always NUL-terminated when `cap > 0`). Returns the full
/// message length in bytes, or 0 when there is no pending error.
///
/// # Safety
/// `buf` must point to `cap` writable bytes (or be null with `cap == 0`).
#[no_mangle]
pub unsafe extern "C" fn dygpp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let borrowed = e.borrow();
        let Some(msg) = borrowed.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Parse an event CSV into a new log handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn dygpp_log_open_csv(
    path: *const c_char,
    out: *mut *mut DygppLog,
) -> c_int {
    guarded(|| {
        if out.is_null() {
            return Err(usage("out must not be null"));
        }
        let path = required_str(path, "path")?;
        let log = EventLog::load_csv(Path::new(path))?;
        *out = Box::into_raw(Box::new(DygppLog { log }));
        Ok(())
    })
}

/// Generate a synthetic commuter log (see the library's generator module).
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn dygpp_log_generate(
    passengers: u32,
    stations: u32,
    days: u32,
    commuter_fraction: f64,
    noise_rate: f64,
    seed: u64,
    out: *mut *mut DygppLog,
) -> c_int {
    guarded(|| {
        if out.is_null() {
            return Err(usage("out must not be null"));
        }
        let cfg = GeneratorConfig {
            passengers,
            stations,
            days,
            commuter_fraction,
            noise_rate,
            seed,
        };
        let log = generate_log(&cfg)?;
        *out = Box::into_raw(Box::new(DygppLog { log }));
        Ok(())
    })
}

/// Write a log back out as CSV.
///
/// # Safety
/// `log` must be a live handle from this library; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn dygpp_log_write_csv(
    log: *const DygppLog,
    path: *const c_char,
) -> c_int {
    guarded(|| {
        let log = handle_ref(log, "log")?;
        let path = required_str(path, "path")?;
        let file = std::fs::File::create(path).map_err(|e| DygppError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        log.log.write_csv(&mut w)?;
        use std::io::Write as _;
        w.flush().map_err(|e| DygppError::io(path, e))
    })
}

/// Number of events in the log; 0 for a null handle.
///
/// # Safety
/// `log` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dygpp_log_events(log: *const DygppLog) -> u64 {
    log.as_ref().map_or(0, |l| l.log.len() as u64)
}

/// Number of distinct passengers; 0 for a null handle.
///
/// # Safety
/// `log` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dygpp_log_passengers(log: *const DygppLog) -> u32 {
    log.as_ref().map_or(0, |l| l.log.num_passengers())
}

/// Number of distinct stations; 0 for a null handle.
///
/// # Safety
/// `log` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dygpp_log_stations(log: *const DygppLog) -> u32 {
    log.as_ref().map_or(0, |l| l.log.num_stations())
}

/// Release a log handle. Null is a no-op.
///
/// # Safety
/// `log` must be null or a handle not previously freed.
#[no_mangle]
pub unsafe extern "C" fn dygpp_log_free(log: *mut DygppLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

fn build_predictor(
    log: &EventLog,
    config_path: Option<&Path>,
    ckpt: Option<&Path>,
    train_out: Option<&Path>,
) -> Result<DygppPredictor> {
    let config = load_config(config_path)?;
    let split = chronological_split(log, &config.split)?;
    let (model, store) = match ckpt {
        Some(path) => {
            let (mut store, _) = dygpp::autodiff::checkpoint::load_checkpoint(path)?;
            let model = DygppModel::attach(
                &config.model,
                split.log.num_passengers(),
                split.log.num_stations(),
                &mut store,
            )?;
            (model, store)
        }
        None => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.train.seed);
            let (model, mut store) = DygppModel::init(
                &config.model,
                split.log.num_passengers(),
                split.log.num_stations(),
                &mut rng,
            )?;
            let mut run_cfg = config.train.clone();
            run_cfg.checkpoint_path = train_out.map(Path::to_path_buf);
            let outcome = train(&model, &mut store, &split, &run_cfg, |_| {})?;
            (model, outcome.best_store)
        }
    };
    Ok(DygppPredictor {
        model,
        store,
        log: split.log,
        config,
    })
}

/// Load a trained checkpoint against a log, producing a predictor handle.
/// `config_path` may be null to use built-in defaults; it must match the
/// checkpoint's architecture.
///
/// # Safety
/// `log` must be a live handle; paths valid strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dygpp_predictor_open(
    log: *const DygppLog,
    config_path: *const c_char,
    ckpt_path: *const c_char,
    out: *mut *mut DygppPredictor,
) -> c_int {
    guarded(|| {
        if out.is_null() {
            return Err(usage("out must not be null"));
        }
        let log = handle_ref(log, "log")?;
        let config_path = optional_path(config_path, "config_path")?;
        let ckpt = required_str(ckpt_path, "ckpt_path")?;
        let predictor = build_predictor(
            &log.log,
            config_path.as_deref(),
            Some(Path::new(ckpt)),
            None,
        )?;
        *out = Box::into_raw(Box::new(predictor));
        Ok(())
    })
}

/// Train a model on the log and return the resulting predictor. The best
/// checkpoint is additionally written to `ckpt_out` unless it is null.
///
/// # Safety
/// `log` must be a live handle; paths valid strings or null; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dygpp_predictor_train(
    log: *const DygppLog,
    config_path: *const c_char,
    ckpt_out: *const c_char,
    out: *mut *mut DygppPredictor,
) -> c_int {
    guarded(|| {
        if out.is_null() {
            return Err(usage("out must not be null"));
        }
        let log = handle_ref(log, "log")?;
        let config_path = optional_path(config_path, "config_path")?;
        let ckpt_out = optional_path(ckpt_out, "ckpt_out")?;
        let predictor = build_predictor(
            &log.log,
            config_path.as_deref(),
            None,
            ckpt_out.as_deref(),
        )?;
        *out = Box::into_raw(Box::new(predictor));
        Ok(())
    })
}

/// Probability that the passenger interacts with the station at `time`.
/// Ids are the raw ids from the CSV.
///
/// # Safety
/// `predictor` must be a live handle; `out_probability` writable.
#[no_mangle]
pub unsafe extern "C" fn dygpp_predict(
    predictor: *const DygppPredictor,
    passenger: u64,
    station: u64,
    time: i64,
    out_probability: *mut f64,
) -> c_int {
    guarded(|| {
        let p = handle_ref(predictor, "predictor")?;
        if out_probability.is_null() {
            return Err(usage("out_probability must not be null"));
        }
        let u = p
            .log
            .passenger_id(passenger)
            .ok_or_else(|| DygppError::Data(format!("unknown passenger id {passenger}")))?;
        let s = p
            .log
            .station_id(station)
            .ok_or_else(|| DygppError::Data(format!("unknown station id {station}")))?;
        let h_u = p.model.embed_node(&p.store, &p.log, NodeKind::Passenger, u, s, time);
        let h_s = p.model.embed_node(&p.store, &p.log, NodeKind::Station, s, u, time);
        let (_, probability) = p.model.predict_link(&p.store, &h_u, &h_s);
        *out_probability = probability;
        Ok(())
    })
}

fn scope_from(mode: &str) -> Result<EvalScope> {
    match mode {
        "transductive" => Ok(EvalScope::Transductive),
        "inductive" => Ok(EvalScope::Inductive),
        other => Err(usage(&format!("unknown mode `{other}`"))),
    }
}

/// Evaluate the model on a split ("test" or "val") and return the metrics
/// as a JSON string (caller frees with `dygpp_string_free`).
///
/// # Safety
/// `predictor` must be a live handle; strings valid; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn dygpp_evaluate_json(
    predictor: *const DygppPredictor,
    split: *const c_char,
    mode: *const c_char,
    out_json: *mut *mut c_char,
) -> c_int {
    guarded(|| {
        let p = handle_ref(predictor, "predictor")?;
        if out_json.is_null() {
            return Err(usage("out_json must not be null"));
        }
        let split_name = required_str(split, "split")?;
        let scope = scope_from(required_str(mode, "mode")?)?;
        let ds = chronological_split(&p.log, &p.config.split)?;
        let report = evaluate_model(
            &p.model,
            &p.store,
            &ds,
            split_name,
            scope,
            p.config.train.eval_seed,
        )?;
        let json = serde_json::to_string(&report).expect("report serializes");
        *out_json = CString::new(json)
            .expect("json has no NUL")
            .into_raw();
        Ok(())
    })
}

/// Evaluate a frequency baseline ("top" or "ptop") over the same split and
/// negative sampling as the model, returning metrics JSON.
///
/// # Safety
/// `log` must be a live handle; strings valid; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn dygpp_baseline_json(
    log: *const DygppLog,
    method: *const c_char,
    split: *const c_char,
    mode: *const c_char,
    config_path: *const c_char,
    out_json: *mut *mut c_char,
) -> c_int {
    guarded(|| {
        let log = handle_ref(log, "log")?;
        if out_json.is_null() {
            return Err(usage("out_json must not be null"));
        }
        let method = BaselineMethod::parse(required_str(method, "method")?)?;
        let split_name = required_str(split, "split")?;
        let scope = scope_from(required_str(mode, "mode")?)?;
        let config_path = optional_path(config_path, "config_path")?;
        let config = load_config(config_path.as_deref())?;
        let ds = chronological_split(&log.log, &config.split)?;
        let report = evaluate_baseline(method, &ds, split_name, scope, config.train.eval_seed)?;
        let json = serde_json::to_string(&report).expect("report serializes");
        *out_json = CString::new(json)
            .expect("json has no NUL")
            .into_raw();
        Ok(())
    })
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn dygpp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release a predictor handle. Null is a no-op.
///
/// # Safety
/// `predictor` must be null or a handle not previously freed.
#[no_mangle]
pub unsafe extern "C" fn dygpp_predictor_free(predictor: *mut DygppPredictor) {
    if !predictor.is_null() {
        drop(Box::from_raw(predictor));
    }
}
