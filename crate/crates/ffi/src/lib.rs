//! C ABI over the `treeflow` kernels.
//!
//! Every function returns a [`TfStatus`] and writes results through out-pointers.
//! On failure the message is available from [`tf_last_error`] on the same thread.
//! Vertices are passed as NUL-terminated strings `h:w1.w2...`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use treeflow::flow::{flow_heat_kernel, poisson_kernel, tree_heat_kernel, KernelQuery};
use treeflow::oracles::uniformization_heat;
use treeflow::scalar::heat_kernel_z;
use treeflow::{Kernels, Tree, TreeError, Vertex};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    NonConvergence = 4,
    Panic = 5,
}

/// A tree together with its kernel caches. Create with [`tf_tree_new`], release with [`tf_tree_free`].
pub struct TfTree {
    kernels: Kernels,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &TreeError) -> TfStatus {
    match e {
        TreeError::Parse { .. } | TreeError::LetterOutOfRange { .. } | TreeError::NonCanonical { .. } => TfStatus::ParseError,
        TreeError::Quadrature { .. } | TreeError::TailExtrapolation { .. } | TreeError::InsufficientRadius { .. } => {
            TfStatus::NonConvergence
        }
        _ => TfStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Tree(TreeError),
}

impl From<TreeError> for Fail {
    fn from(e: TreeError) -> Self {
        Fail::Tree(e)
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TfStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            TfStatus::NullPointer
        }
        Ok(Err(Fail::Tree(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TfStatus::Panic
        }
    }
}

unsafe fn tree_ref<'a>(tree: *const TfTree) -> Result<&'a TfTree, Fail> {
    tree.as_ref().ok_or(Fail::Null("tree"))
}

unsafe fn vertex(tree: &Tree, s: *const c_char, what: &'static str) -> Result<Vertex, Fail> {
    if s.is_null() {
        return Err(Fail::Null(what));
    }
    let text = CStr::from_ptr(s)
        .to_str()
        .map_err(|e| TreeError::Parse { input: what.into(), reason: e.to_string() })?;
    Ok(tree.parse_vertex(text)?)
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn tf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Allocates a tree with branching number `q >= 2`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tf_tree_new(q: u32, out: *mut *mut TfTree) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let tree = Tree::new(q)?;
        let handle = Box::into_raw(Box::new(TfTree { kernels: Kernels::new(tree) }));
        write(out, handle, "out")
    })
}

/// Releases a tree. NULL is ignored.
///
/// # Safety
/// `tree` must come from [`tf_tree_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tf_tree_free(tree: *mut TfTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// `e^{-t} I_j(t)`, the heat kernel on the integers.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tf_heat_kernel_z(t: f64, j: u32, out: *mut f64) -> TfStatus {
    guard(|| write(out, heat_kernel_z(t, j)?, "out"))
}

/// Graph distance between two vertices.
///
/// # Safety
/// `tree` must be a live handle, `x` and `y` NUL-terminated strings, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tf_vertex_distance(tree: *const TfTree, x: *const c_char, y: *const c_char, out: *mut u64) -> TfStatus {
    guard(|| {
        let t = tree_ref(tree)?.kernels.tree();
        let (x, y) = (vertex(t, x, "x")?, vertex(t, y, "y")?);
        write(out, x.distance(&y), "out")
    })
}

/// Heat kernel of the flow Laplacian with respect to the flow measure.
///
/// # Safety
/// As for [`tf_vertex_distance`].
#[no_mangle]
pub unsafe extern "C" fn tf_flow_heat_kernel(tree: *const TfTree, t: f64, x: *const c_char, y: *const c_char, out: *mut f64) -> TfStatus {
    guard(|| {
        let tr = tree_ref(tree)?.kernels.tree();
        let (x, y) = (vertex(tr, x, "x")?, vertex(tr, y, "y")?);
        write(out, flow_heat_kernel(tr, &KernelQuery::from_vertices(&x, &y, t)?)?, "out")
    })
}

/// Heat kernel of the combinatorial Laplacian at distance `d`.
///
/// # Safety
/// `tree` must be a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tf_tree_heat_kernel(tree: *const TfTree, t: f64, d: u32, out: *mut f64) -> TfStatus {
    guard(|| {
        let tr = tree_ref(tree)?.kernels.tree();
        write(out, tree_heat_kernel(tr, t, d)?, "out")
    })
}

/// Poisson kernel by subordination, to relative tolerance `rel_tol`.
///
/// # Safety
/// As for [`tf_vertex_distance`].
#[no_mangle]
pub unsafe extern "C" fn tf_poisson_kernel(
    tree: *const TfTree,
    t: f64,
    x: *const c_char,
    y: *const c_char,
    rel_tol: f64,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        let tr = tree_ref(tree)?.kernels.tree();
        let (x, y) = (vertex(tr, x, "x")?, vertex(tr, y, "y")?);
        write(out, poisson_kernel(tr, &KernelQuery::from_vertices(&x, &y, t)?, rel_tol)?, "out")
    })
}

/// Riesz transform kernel `R(x, y)`.
///
/// # Safety
/// As for [`tf_vertex_distance`].
#[no_mangle]
pub unsafe extern "C" fn tf_riesz_kernel(tree: *const TfTree, x: *const c_char, y: *const c_char, out: *mut f64) -> TfStatus {
    guard(|| {
        let k = &tree_ref(tree)?.kernels;
        let (x, y) = (vertex(k.tree(), x, "x")?, vertex(k.tree(), y, "y")?);
        write(out, k.riesz_kernel(&x, &y)?, "out")
    })
}

/// `sup_t H_t(x, y)`, or `sup_t (d/t) H_t(x, y)` when `weighted`, and the maximiser.
///
/// # Safety
/// As for [`tf_vertex_distance`]; `argmax` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn tf_heat_sup(
    tree: *const TfTree,
    x: *const c_char,
    y: *const c_char,
    weighted: bool,
    sup: *mut f64,
    argmax: *mut f64,
) -> TfStatus {
    guard(|| {
        let k = &tree_ref(tree)?.kernels;
        let (x, y) = (vertex(k.tree(), x, "x")?, vertex(k.tree(), y, "y")?);
        let s = k.heat_sup(x.level(), y.level(), x.distance(&y) as u32, weighted)?;
        write(sup, s.sup, "sup")?;
        if !argmax.is_null() {
            argmax.write(s.argmax_t);
        }
        Ok(())
    })
}

/// Heat kernel by truncated uniformization of order `order`, with its certified error bound.
///
/// # Safety
/// As for [`tf_vertex_distance`]; both out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tf_uniformization_heat(
    tree: *const TfTree,
    t: f64,
    x: *const c_char,
    y: *const c_char,
    order: u64,
    value: *mut f64,
    bound: *mut f64,
) -> TfStatus {
    guard(|| {
        let tr = tree_ref(tree)?.kernels.tree();
        let (x, y) = (vertex(tr, x, "x")?, vertex(tr, y, "y")?);
        let r = uniformization_heat(tr, t, &x, &y, order)?;
        write(value, r.value, "value")?;
        write(bound, r.error_bound, "bound")
    })
}
