//! C interface to the `coeba` library.
//!
//! Objects cross the boundary as opaque handles created by `coeba_*_new`/`_load`
//! functions and released with the matching `_free`. Every fallible call returns a
//! [`CoebaStatus`]; on failure [`coeba_last_error`] describes the problem on the
//! calling thread. Strings returned to the caller are freed with [`coeba_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coeba::checkpoint::Checkpoint;
use coeba::config::ExperimentConfig;
use coeba::eba::eba_augment;
use coeba::error::Error;
use coeba::graph::{degrees, Graph};
use coeba::model::{decode_pairs, EncoderParams};
use coeba::report::RunReport;
use coeba::trainer::{embed, run_experiment, train, GraphView, TrainData};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoebaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Config = 3,
    Parse = 4,
    Io = 5,
    Shape = 6,
    Data = 7,
    Numeric = 8,
    Training = 9,
    Checkpoint = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

impl From<&Error> for CoebaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => CoebaStatus::Config,
            Error::Parse { .. } => CoebaStatus::Parse,
            Error::Io { .. } => CoebaStatus::Io,
            Error::Shape(_) | Error::Range { .. } => CoebaStatus::Shape,
            Error::Numeric(_) => CoebaStatus::Numeric,
            Error::Training { .. } => CoebaStatus::Training,
            Error::Checkpoint(_) => CoebaStatus::Checkpoint,
            Error::Split(_) | Error::Sampling(_) | Error::Metric(_) | Error::Precondition(_) | Error::Clustering(_) => {
                CoebaStatus::Data
            }
        }
    }
}

/// Undirected graph with node features.
pub struct CoebaGraph(Graph);

/// Experiment configuration.
pub struct CoebaConfig(ExperimentConfig);

/// Trained encoder.
pub struct CoebaModel(Checkpoint);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CoebaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(CoebaStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> CoebaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CoebaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CoebaStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| Failure(CoebaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| Failure(CoebaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure(CoebaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CoebaStatus::InvalidString, format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(CoebaStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure(CoebaStatus::NullPointer, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure(CoebaStatus::NullPointer, "output pointer is null".into()));
    }
    *out = CString::new(s)
        .map_err(|_| Failure(CoebaStatus::InvalidString, "string contains a nul byte".into()))?
        .into_raw();
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn coeba_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn coeba_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn coeba_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a graph from an edge-list file and a feature file.
///
/// # Safety
/// Paths must be nul-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coeba_graph_load(
    edges_path: *const c_char,
    features_path: *const c_char,
    out: *mut *mut CoebaGraph,
) -> CoebaStatus {
    guard(|| {
        let g = Graph::load(
            string(edges_path, "edges_path")?,
            string(features_path, "features_path")?,
        )?;
        put(out, CoebaGraph(g))
    })
}

/// Builds a graph from `n_edges` pairs `(src[i], dst[i])` and a row-major
/// `n_nodes x feature_dim` feature matrix.
///
/// # Safety
/// Arrays must hold the stated number of elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coeba_graph_new(
    n_nodes: usize,
    src: *const usize,
    dst: *const usize,
    n_edges: usize,
    features: *const f64,
    feature_dim: usize,
    out: *mut *mut CoebaGraph,
) -> CoebaStatus {
    guard(|| {
        let src = slice(src, n_edges, "src")?;
        let dst = slice(dst, n_edges, "dst")?;
        let len = n_nodes
            .checked_mul(feature_dim)
            .ok_or_else(|| Failure(CoebaStatus::Shape, "feature matrix too large".into()))?;
        let x = slice(features, len, "features")?.to_vec();
        let x = Array2::from_shape_vec((n_nodes, feature_dim), x).expect("length checked");
        let g = Graph::new(n_nodes, src.iter().copied().zip(dst.iter().copied()), x)?;
        put(out, CoebaGraph(g))
    })
}

/// # Safety
/// `g` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coeba_graph_free(g: *mut CoebaGraph) {
    free(g)
}

/// Writes a graph in the formats [`coeba_graph_load`] reads.
///
/// # Safety
/// `g` must be a valid handle; paths must be nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn coeba_graph_save(
    g: *const CoebaGraph,
    edges_path: *const c_char,
    features_path: *const c_char,
) -> CoebaStatus {
    guard(|| {
        get(g, "graph")?.0.save(
            string(edges_path, "edges_path")?,
            string(features_path, "features_path")?,
        )?;
        Ok(())
    })
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn coeba_graph_num_nodes(g: *const CoebaGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.n_nodes())
}

/// Number of undirected edges, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn coeba_graph_num_edges(g: *const CoebaGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.n_edges())
}

/// Smallest node degree, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn coeba_graph_min_degree(g: *const CoebaGraph) -> usize {
    g.as_ref().map_or(0, |g| degrees(&g.0).min)
}

/// Copies the edges as `(src[i], dst[i])` with `src[i] < dst[i]`.
///
/// # Safety
/// `src` and `dst` must each have room for `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn coeba_graph_edges(
    g: *const CoebaGraph,
    src: *mut usize,
    dst: *mut usize,
    capacity: usize,
) -> CoebaStatus {
    guard(|| {
        let edges = get(g, "graph")?.0.edges();
        if capacity < edges.len() {
            return Err(Failure(
                CoebaStatus::BufferTooSmall,
                format!("need room for {} edges", edges.len()),
            ));
        }
        if src.is_null() || dst.is_null() {
            return Err(Failure(CoebaStatus::NullPointer, "edge buffers are null".into()));
        }
        for (i, &(u, v)) in edges.iter().enumerate() {
            *src.add(i) = u;
            *dst.add(i) = v;
        }
        Ok(())
    })
}

/// Default configuration.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coeba_config_new(out: *mut *mut CoebaConfig) -> CoebaStatus {
    guard(|| put(out, CoebaConfig(ExperimentConfig::default())))
}

/// Reads a `key = value` configuration file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coeba_config_load(path: *const c_char, out: *mut *mut CoebaConfig) -> CoebaStatus {
    guard(|| put(out, CoebaConfig(ExperimentConfig::load(string(path, "path")?)?)))
}

/// # Safety
/// `c` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coeba_config_free(c: *mut CoebaConfig) {
    free(c)
}

/// Sets one key, e.g. `"eba.r_m"` to `"0.2"`.
///
/// # Safety
/// `c` must be a valid handle; `key` and `value` nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn coeba_config_set(
    c: *mut CoebaConfig,
    key: *const c_char,
    value: *const c_char,
) -> CoebaStatus {
    guard(|| {
        get_mut(c, "config")?
            .0
            .set(string(key, "key")?, string(value, "value")?)?;
        Ok(())
    })
}

/// Current value of a key as a newly allocated string.
///
/// # Safety
/// `c` must be a valid handle; `key` a nul-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coeba_config_get(
    c: *const CoebaConfig,
    key: *const c_char,
    out: *mut *mut c_char,
) -> CoebaStatus {
    guard(|| {
        let key = string(key, "key")?;
        let v = get(c, "config")?
            .0
            .get(key)
            .ok_or_else(|| Failure(CoebaStatus::Config, format!("unknown key `{key}`")))?;
        put_string(out, v)
    })
}

/// Runs the configured experiment over all splits and returns the report as JSON.
///
/// # Safety
/// Handles must be valid; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coeba_run_experiment(
    g: *const CoebaGraph,
    c: *const CoebaConfig,
    out_json: *mut *mut c_char,
) -> CoebaStatus {
    guard(|| {
        let (g, c) = (get(g, "graph")?, get(c, "config")?);
        c.0.validate()?;
        let exp = run_experiment(&g.0, &c.0.train)?;
        let run = RunReport::new("CoEBA", &c.0, exp.report);
        let json = serde_json::to_string_pretty(&run).map_err(|e| Failure(CoebaStatus::Data, e.to_string()))?;
        put_string(out_json, json)
    })
}

/// Trains on every edge of `g` without held-out data and returns the final encoder.
///
/// # Safety
/// Handles must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coeba_train(
    g: *const CoebaGraph,
    c: *const CoebaConfig,
    out: *mut *mut CoebaModel,
) -> CoebaStatus {
    guard(|| {
        let (g, c) = (get(g, "graph")?, get(c, "config")?);
        c.0.validate()?;
        let outcome = train(TrainData::unsupervised(&g.0), &c.0.train)?;
        let epoch = outcome.log.records.last().map_or(0, |r| r.epoch);
        put(
            out,
            CoebaModel(Checkpoint {
                encoder: c.0.train.encoder.clone(),
                params: outcome.final_params,
                epoch,
            }),
        )
    })
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coeba_model_load(path: *const c_char, out: *mut *mut CoebaModel) -> CoebaStatus {
    guard(|| put(out, CoebaModel(Checkpoint::load(string(path, "path")?)?)))
}

/// # Safety
/// `m` must be a valid handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn coeba_model_save(m: *const CoebaModel, path: *const c_char) -> CoebaStatus {
    guard(|| {
        get(m, "model")?.0.save(string(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coeba_model_free(m: *mut CoebaModel) {
    free(m)
}

/// Embedding dimension, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn coeba_model_embedding_dim(m: *const CoebaModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.encoder.out_dim)
}

fn latent(m: &CoebaModel, g: &CoebaGraph) -> FfiResult<Array2<f64>> {
    let params: &EncoderParams = &m.0.params;
    if params.in_dim() != g.0.feature_dim() {
        return Err(Failure(
            CoebaStatus::Shape,
            format!(
                "model expects {} features, graph has {}",
                params.in_dim(),
                g.0.feature_dim()
            ),
        ));
    }
    Ok(embed(params, &GraphView::new(g.0.clone()), &m.0.encoder)?.z)
}

/// Writes the row-major `num_nodes x embedding_dim` embedding matrix.
///
/// # Safety
/// Handles must be valid; `out` must have room for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn coeba_model_embed(
    m: *const CoebaModel,
    g: *const CoebaGraph,
    out: *mut f64,
    capacity: usize,
) -> CoebaStatus {
    guard(|| {
        let z = latent(get(m, "model")?, get(g, "graph")?)?;
        if capacity < z.len() {
            return Err(Failure(
                CoebaStatus::BufferTooSmall,
                format!("need room for {} values", z.len()),
            ));
        }
        if out.is_null() {
            return Err(Failure(CoebaStatus::NullPointer, "output buffer is null".into()));
        }
        for (i, v) in z.iter().enumerate() {
            *out.add(i) = *v;
        }
        Ok(())
    })
}

/// Link probabilities of the pairs `(src[i], dst[i])`.
///
/// # Safety
/// Handles must be valid; all arrays must hold `n_pairs` elements.
#[no_mangle]
pub unsafe extern "C" fn coeba_model_score(
    m: *const CoebaModel,
    g: *const CoebaGraph,
    src: *const usize,
    dst: *const usize,
    n_pairs: usize,
    out: *mut f64,
) -> CoebaStatus {
    guard(|| {
        let z = latent(get(m, "model")?, get(g, "graph")?)?;
        let pairs: Vec<_> = slice(src, n_pairs, "src")?
            .iter()
            .copied()
            .zip(slice(dst, n_pairs, "dst")?.iter().copied())
            .collect();
        let p = decode_pairs(&z, &pairs)?;
        if n_pairs > 0 && out.is_null() {
            return Err(Failure(CoebaStatus::NullPointer, "output buffer is null".into()));
        }
        for (i, v) in p.into_iter().enumerate() {
            *out.add(i) = v;
        }
        Ok(())
    })
}

/// Builds an augmented view of `g` from the model's embeddings, using the
/// configuration's removal, addition and masking ratios.
///
/// # Safety
/// Handles must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coeba_augment(
    g: *const CoebaGraph,
    m: *const CoebaModel,
    c: *const CoebaConfig,
    seed: u64,
    out: *mut *mut CoebaGraph,
) -> CoebaStatus {
    guard(|| {
        let (g, m, c) = (get(g, "graph")?, get(m, "model")?, get(c, "config")?);
        c.0.train.eba.validate()?;
        let z = latent(m, g)?;
        let a_pred = coeba::model::decode_full(&z);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let view = eba_augment(&g.0, &z, &a_pred, &c.0.train.eba, m.0.epoch, &mut rng)?;
        put(out, CoebaGraph(view.graph))
    })
}
