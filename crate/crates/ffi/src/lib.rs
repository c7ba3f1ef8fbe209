//! C ABI over the hetgnn pipeline.
//!
//! Objects cross the boundary as opaque handles (`HgGraph`, `HgModel`,
//! `HgEmbeddings`) created by `hg_*_open` / `hg_train` / `hg_infer` and
//! released with the matching `hg_*_free`. Every fallible call returns an
//! `HgStatus`; on failure `hg_last_error` describes the problem for the
//! calling thread. Strings handed out by the library are freed with
//! `hg_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use hetgnn::gconstruct::construct_graph;
use hetgnn::model::ModelState;
use hetgnn::partition::{load_all_partitions, random_partition, shuffle_to_partitions, Partition, PartitionManifest};
use hetgnn::pipeline::{construct_featureless_inputs, infer_embeddings, train, TrainHooks, TrainReport};
use hetgnn::schema::{parse_schema, parse_train_config};
use hetgnn::Error;
use ndarray::Array2;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Validation = 5,
    Data = 6,
    Shape = 7,
    Manifest = 8,
    Checkpoint = 9,
    Runtime = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// A partitioned graph loaded from its manifest.
pub struct HgGraph {
    manifest: PartitionManifest,
    parts: Vec<Arc<Partition>>,
}

/// A trained or restored model, with the report of the run that produced it.
pub struct HgModel {
    state: ModelState,
    report: Option<TrainReport>,
}

/// Per-node-type embedding matrices in global id order.
pub struct HgEmbeddings {
    names: Vec<String>,
    matrices: Vec<Array2<f64>>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> HgStatus {
    match e {
        Error::Io { .. } => HgStatus::Io,
        Error::Parse { .. } | Error::Validation { .. } => HgStatus::Validation,
        Error::Data { .. } | Error::MissingColumn { .. } | Error::UnknownIds { .. } => HgStatus::Data,
        Error::Shape(_) => HgStatus::Shape,
        Error::Manifest(_) => HgStatus::Manifest,
        Error::Checkpoint(_) => HgStatus::Checkpoint,
        Error::Invalid(_) => HgStatus::InvalidArgument,
        Error::NonFinite(_) | Error::Worker(_) => HgStatus::Runtime,
    }
}

struct Failure(HgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording any error or panic for `hg_last_error`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HgStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("panic: {msg}"));
            HgStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(HgStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(HgStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn path(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    text(p, what).map(PathBuf::from)
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(HgStatus::NullArgument, format!("{what} handle is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(HgStatus::NullArgument, format!("{what} output pointer is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next `hg_*` call on the same thread.
#[no_mangle]
pub extern "C" fn hg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds the graph described by the schema at `schema_path` (input files
/// are resolved against its directory), splits it into `num_partitions`
/// random partitions and writes them with `<graph_name>.json` under
/// `output_dir`.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn hg_gconstruct(
    schema_path: *const c_char,
    output_dir: *const c_char,
    graph_name: *const c_char,
    num_partitions: usize,
    seed: u64,
) -> HgStatus {
    guard(|| {
        let schema_path = path(schema_path, "schema_path")?;
        let output_dir = path(output_dir, "output_dir")?;
        let name = text(graph_name, "graph_name")?;
        let schema = parse_schema(&schema_path)?;
        let input_dir = schema_path.parent().map(PathBuf::from).unwrap_or_default();
        let mut graph = construct_graph(&schema, &input_dir, seed)?;
        graph.name = name.to_string();
        let assignment = random_partition(&graph, num_partitions, seed)?;
        shuffle_to_partitions(&graph, &assignment)?.save(&output_dir)?;
        Ok(())
    })
}

/// Loads every partition listed in a partition manifest.
///
/// # Safety
/// `manifest_path` must be a valid string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hg_graph_open(manifest_path: *const c_char, out: *mut *mut HgGraph) -> HgStatus {
    guard(|| {
        out_ptr(out, "graph")?;
        let (manifest, parts) = load_all_partitions(&path(manifest_path, "manifest_path")?)?;
        *out = Box::into_raw(Box::new(HgGraph { manifest, parts }));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from `hg_graph_open` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hg_graph_free(graph: *mut HgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hg_graph_num_partitions(graph: *const HgGraph, out: *mut usize) -> HgStatus {
    guard(|| {
        out_ptr(out, "count")?;
        *out = handle(graph, "graph")?.manifest.num_parts;
        Ok(())
    })
}

/// Number of nodes of the named node type.
///
/// # Safety
/// `graph` must be a live handle, `node_type` a valid string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hg_graph_num_nodes(graph: *const HgGraph, node_type: *const c_char, out: *mut usize) -> HgStatus {
    guard(|| {
        out_ptr(out, "count")?;
        let g = handle(graph, "graph")?;
        let name = text(node_type, "node_type")?;
        let t = g
            .manifest
            .meta
            .node_type(name)
            .ok_or_else(|| Failure(HgStatus::InvalidArgument, format!("unknown node type `{name}`")))?;
        *out = g.manifest.meta.node_types[t].count;
        Ok(())
    })
}

/// Trains with the JSON training config at `config_path`, one in-process
/// worker per partition (the config's `num_workers` is overridden).
///
/// # Safety
/// `graph` must be a live handle, `config_path` a valid string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hg_train(graph: *const HgGraph, config_path: *const c_char, out: *mut *mut HgModel) -> HgStatus {
    guard(|| {
        out_ptr(out, "model")?;
        let g = handle(graph, "graph")?;
        let mut config = parse_train_config(&path(config_path, "config_path")?)?;
        config.num_workers = g.parts.len();
        let run = train(&g.parts, &config, None, &TrainHooks::default())?;
        *out = Box::into_raw(Box::new(HgModel {
            state: run.model,
            report: Some(run.report),
        }));
        Ok(())
    })
}

/// Restores a model checkpoint directory.
///
/// # Safety
/// `dir` must be a valid string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hg_model_load(dir: *const c_char, out: *mut *mut HgModel) -> HgStatus {
    guard(|| {
        out_ptr(out, "model")?;
        let state = ModelState::restore(&path(dir, "dir")?)?;
        *out = Box::into_raw(Box::new(HgModel { state, report: None }));
        Ok(())
    })
}

/// Writes the model checkpoint to `dir`.
///
/// # Safety
/// `model` must be a live handle and `dir` a valid string.
#[no_mangle]
pub unsafe extern "C" fn hg_model_save(model: *const HgModel, dir: *const c_char) -> HgStatus {
    guard(|| {
        handle(model, "model")?.state.save(&path(dir, "dir")?)?;
        Ok(())
    })
}

/// The training report as JSON, or null for a restored model. Free the
/// result with `hg_string_free`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hg_model_report_json(model: *const HgModel, out: *mut *mut c_char) -> HgStatus {
    guard(|| {
        out_ptr(out, "report")?;
        *out = match &handle(model, "model")?.report {
            Some(r) => {
                let json = serde_json::to_string(r).map_err(|e| Failure(HgStatus::Runtime, e.to_string()))?;
                CString::new(json).map_err(|e| Failure(HgStatus::Runtime, e.to_string()))?.into_raw()
            }
            None => ptr::null_mut(),
        };
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hg_model_free(model: *mut HgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Full-neighbor embeddings of every node. Validation and test link
/// prediction edges are hidden when `exclude_eval_edges` is true. Models
/// trained on constructed features get them rebuilt first.
///
/// # Safety
/// `graph` and `model` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hg_infer(graph: *const HgGraph, model: *const HgModel, exclude_eval_edges: bool, out: *mut *mut HgEmbeddings) -> HgStatus {
    guard(|| {
        out_ptr(out, "embeddings")?;
        let g = handle(graph, "graph")?;
        let m = &handle(model, "model")?.state;
        let meta = &g.manifest.meta;
        let constructed = meta.node_types.iter().zip(&m.spec.node_types).any(|(n, s)| n.is_featureless() && s.input_dim > 0);
        let parts = if constructed {
            construct_featureless_inputs(&g.parts, exclude_eval_edges)?
        } else {
            g.parts.clone()
        };
        let matrices = infer_embeddings(&parts, m, exclude_eval_edges)?;
        let names = meta.node_types.iter().map(|n| n.name.clone()).collect();
        *out = Box::into_raw(Box::new(HgEmbeddings { names, matrices }));
        Ok(())
    })
}

unsafe fn matrix<'a>(emb: *const HgEmbeddings, node_type: *const c_char) -> Result<&'a Array2<f64>, Failure> {
    let e = handle(emb, "embeddings")?;
    let name = text(node_type, "node_type")?;
    let t = e
        .names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Failure(HgStatus::InvalidArgument, format!("unknown node type `{name}`")))?;
    Ok(&e.matrices[t])
}

/// Rows and columns of one node type's embedding matrix.
///
/// # Safety
/// `emb` must be a live handle, `node_type` a valid string, outputs writable.
#[no_mangle]
pub unsafe extern "C" fn hg_embeddings_shape(emb: *const HgEmbeddings, node_type: *const c_char, rows: *mut usize, cols: *mut usize) -> HgStatus {
    guard(|| {
        out_ptr(rows, "rows")?;
        out_ptr(cols, "cols")?;
        let m = matrix(emb, node_type)?;
        *rows = m.nrows();
        *cols = m.ncols();
        Ok(())
    })
}

/// Copies one node type's embeddings, row-major, into `buf` of `len`
/// doubles. Fails with `BufferTooSmall` when `len < rows * cols`.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hg_embeddings_copy(emb: *const HgEmbeddings, node_type: *const c_char, buf: *mut f64, len: usize) -> HgStatus {
    guard(|| {
        out_ptr(buf, "buffer")?;
        let m = matrix(emb, node_type)?;
        if len < m.len() {
            return Err(Failure(HgStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", m.len())));
        }
        let dst = std::slice::from_raw_parts_mut(buf, m.len());
        for (d, s) in dst.iter_mut().zip(m.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// # Safety
/// `emb` must come from `hg_infer` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hg_embeddings_free(emb: *mut HgEmbeddings) {
    if !emb.is_null() {
        drop(Box::from_raw(emb));
    }
}
