//! C ABI for embedding the link predictor: build or load graphs, score
//! node pairs with the classical heuristics or a trained model
//! checkpoint, and compute AUC.
//!
//! Handles are opaque pointers owned by this library; every `*_free`
//! accepts null. Functions return [`WpStatus`]; on any non-`Ok` status
//! the thread-local message read by [`wp_last_error_message`] describes
//! the failure. Panics are caught at the boundary and reported as
//! `WpStatus::Internal`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use walkpool::dataset::load_edge_list;
use walkpool::graph::Graph;
use walkpool::heuristics::{score_pairs, HeuristicParams, Method};
use walkpool::metrics;
use walkpool::trainer::{load_model, predict, InitMode, TrainedModel};

/// Result of every fallible call in this ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArg = 1,
    /// Argument values were rejected (unknown method, bad node ids,
    /// wrong model kind).
    InvalidArg = 2,
    /// The file could not be read or written.
    Io = 3,
    /// The file was read but not understood.
    Parse = 4,
    /// The computation itself failed.
    Compute = 5,
    /// A bug: a panic crossed the boundary.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: WpStatus, message: impl std::fmt::Display) -> WpStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.to_string());
    status
}

fn ok() -> WpStatus {
    LAST_ERROR.with(|slot| slot.borrow_mut().clear());
    WpStatus::Ok
}

fn guarded(body: impl FnOnce() -> WpStatus) -> WpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(WpStatus::Internal, format!("panic: {msg}"))
        }
    }
}

/// Copies the message for the most recent failure on this thread into
/// `buf` (NUL-terminated, truncated to `cap` bytes including the NUL)
/// and returns the full message length in bytes. `buf` may be null or
/// `cap` zero to query the length alone.
///
/// # Safety
/// When `buf` is non-null it must point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wp_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// An undirected graph handle.
pub struct WpGraph {
    graph: Graph,
}

/// A trained model handle.
pub struct WpModel {
    model: TrainedModel,
}

unsafe fn read_path(path: *const c_char) -> Result<String, WpStatus> {
    if path.is_null() {
        return Err(fail(WpStatus::NullArg, "path is null"));
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(s.to_string()),
        Err(_) => Err(fail(WpStatus::InvalidArg, "path is not valid UTF-8")),
    }
}

unsafe fn read_pairs(
    pairs: *const u64,
    num_pairs: usize,
    num_nodes: usize,
) -> Result<Vec<(usize, usize)>, WpStatus> {
    if pairs.is_null() && num_pairs > 0 {
        return Err(fail(WpStatus::NullArg, "pairs is null"));
    }
    let flat = std::slice::from_raw_parts(pairs, num_pairs * 2);
    let mut out = Vec::with_capacity(num_pairs);
    for chunk in flat.chunks_exact(2) {
        let (u, v) = (chunk[0] as usize, chunk[1] as usize);
        if u >= num_nodes || v >= num_nodes {
            return Err(fail(
                WpStatus::InvalidArg,
                format!("pair ({u}, {v}) exceeds node count {num_nodes}"),
            ));
        }
        out.push((u, v));
    }
    Ok(out)
}

/// Parses an edge-list file (one `u v` pair per line) into a new graph
/// handle stored in `*out`. Node ids are remapped to a contiguous range
/// exactly as the CLI does.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wp_graph_load(path: *const c_char, out: *mut *mut WpGraph) -> WpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(WpStatus::NullArg, "out is null");
        }
        let path = match read_path(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_edge_list(&path) {
            Ok(loaded) => {
                *out = Box::into_raw(Box::new(WpGraph {
                    graph: loaded.graph,
                }));
                ok()
            }
            Err(e) => {
                let status = match &e {
                    walkpool::dataset::DatasetError::Io { .. } => WpStatus::Io,
                    _ => WpStatus::Parse,
                };
                fail(status, e)
            }
        }
    })
}

/// Builds a graph from `num_pairs` edges given as interleaved
/// `[u0, v0, u1, v1, ..]` node ids below `num_nodes`. Self-loops are
/// rejected; duplicate edges collapse.
///
/// # Safety
/// `edges` must point to `2 * num_pairs` readable u64 values (null is
/// accepted when `num_pairs` is zero) and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wp_graph_build(
    num_nodes: u64,
    edges: *const u64,
    num_pairs: usize,
    out: *mut *mut WpGraph,
) -> WpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(WpStatus::NullArg, "out is null");
        }
        let pairs = match read_pairs(edges, num_pairs, num_nodes as usize) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match Graph::build(num_nodes as usize, &pairs) {
            Ok(graph) => {
                *out = Box::into_raw(Box::new(WpGraph { graph }));
                ok()
            }
            Err(e) => fail(WpStatus::InvalidArg, e),
        }
    })
}

/// Releases a graph handle; null is a no-op.
///
/// # Safety
/// `g` must be a pointer from `wp_graph_load`/`wp_graph_build`, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn wp_graph_free(g: *mut WpGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn wp_graph_num_nodes(g: *const WpGraph) -> u64 {
    if g.is_null() {
        return 0;
    }
    (*g).graph.num_nodes() as u64
}

/// Number of undirected edges, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn wp_graph_edge_count(g: *const WpGraph) -> u64 {
    if g.is_null() {
        return 0;
    }
    (*g).graph.edge_count() as u64
}

/// Scores `num_pairs` node pairs with a heuristic named `method` (one
/// of "cn", "aa", "katz", "pr") and writes one score per pair into
/// `scores`. Pass non-finite or non-positive `beta`/`alpha`/`l_max` to
/// use the defaults (beta 0.001, 32 walk lengths, alpha 0.85).
///
/// # Safety
/// `g` must be a live graph handle, `method` NUL-terminated, `pairs`
/// readable for `2 * num_pairs` u64 values, and `scores` writable for
/// `num_pairs` doubles.
#[no_mangle]
pub unsafe extern "C" fn wp_heuristic_scores(
    g: *const WpGraph,
    method: *const c_char,
    pairs: *const u64,
    num_pairs: usize,
    beta: f64,
    l_max: u64,
    alpha: f64,
    scores: *mut f64,
) -> WpStatus {
    guarded(|| {
        if g.is_null() {
            return fail(WpStatus::NullArg, "graph is null");
        }
        if scores.is_null() && num_pairs > 0 {
            return fail(WpStatus::NullArg, "scores is null");
        }
        let method = match read_path(method) {
            Ok(m) => m,
            Err(status) => return status,
        };
        let method: Method = match method.parse() {
            Ok(m) => m,
            Err(e) => return fail(WpStatus::InvalidArg, e),
        };
        let graph = &(*g).graph;
        let pairs = match read_pairs(pairs, num_pairs, graph.num_nodes()) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let mut params = HeuristicParams::default();
        if beta.is_finite() && beta > 0.0 {
            params.beta = beta;
        }
        if l_max > 0 {
            params.l_max = l_max as usize;
        }
        if alpha.is_finite() && alpha > 0.0 {
            params.alpha = alpha;
        }
        match score_pairs(graph, method, &pairs, &params) {
            Ok(values) => {
                let out = std::slice::from_raw_parts_mut(scores, num_pairs);
                for (slot, s) in out.iter_mut().zip(values) {
                    *slot = s.value;
                }
                ok()
            }
            Err(e) => fail(WpStatus::Compute, e),
        }
    })
}

/// AUC of positive scores against negative scores (ties count half)
/// written to `*out`.
///
/// # Safety
/// `pos` and `neg` must be readable for their counts; `out` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn wp_auc(
    pos: *const f64,
    num_pos: usize,
    neg: *const f64,
    num_neg: usize,
    out: *mut f64,
) -> WpStatus {
    guarded(|| {
        if out.is_null() || (pos.is_null() && num_pos > 0) || (neg.is_null() && num_neg > 0) {
            return fail(WpStatus::NullArg, "pos, neg, or out is null");
        }
        let pos = std::slice::from_raw_parts(pos, num_pos);
        let neg = std::slice::from_raw_parts(neg, num_neg);
        match metrics::auc(pos, neg) {
            Ok(value) => {
                *out = value;
                ok()
            }
            Err(e) => fail(WpStatus::InvalidArg, e),
        }
    })
}

/// Loads a model checkpoint written by the trainer into `*out`.
/// Checkpoints trained with file-based initial features are rejected
/// here, since this ABI passes no embedding table.
///
/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wp_model_load(path: *const c_char, out: *mut *mut WpModel) -> WpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(WpStatus::NullArg, "out is null");
        }
        let path = match read_path(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_model(&path) {
            Ok(model) => {
                if model.config.init_mode == InitMode::File {
                    return fail(
                        WpStatus::InvalidArg,
                        "checkpoint uses file-based initial features, unsupported over this ABI",
                    );
                }
                *out = Box::into_raw(Box::new(WpModel { model }));
                ok()
            }
            Err(e) => fail(WpStatus::Parse, e),
        }
    })
}

/// Releases a model handle; null is a no-op.
///
/// # Safety
/// `m` must be a pointer from `wp_model_load`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wp_model_free(m: *mut WpModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Link probability for each of `num_pairs` node pairs against the
/// observed graph `g`, written into `scores`. Pairs may be existing
/// edges or candidates; each is scored from its own enclosing subgraph
/// exactly as during training.
///
/// # Safety
/// `m` and `g` must be live handles, `pairs` readable for
/// `2 * num_pairs` u64 values, `scores` writable for `num_pairs`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn wp_model_predict(
    m: *const WpModel,
    g: *const WpGraph,
    pairs: *const u64,
    num_pairs: usize,
    scores: *mut f64,
) -> WpStatus {
    guarded(|| {
        if m.is_null() || g.is_null() {
            return fail(WpStatus::NullArg, "model or graph is null");
        }
        if scores.is_null() && num_pairs > 0 {
            return fail(WpStatus::NullArg, "scores is null");
        }
        let graph = &(*g).graph;
        let pairs = match read_pairs(pairs, num_pairs, graph.num_nodes()) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match predict(&(*m).model, graph, &pairs, None) {
            Ok(values) => {
                let out = std::slice::from_raw_parts_mut(scores, num_pairs);
                for (slot, v) in out.iter_mut().zip(values) {
                    *slot = v;
                }
                ok()
            }
            Err(e) => fail(WpStatus::Compute, e),
        }
    })
}
