//! C ABI over `pdkit`.
//!
//! Every fallible function returns a [`PdStatus`] and writes results through out-pointers;
//! on failure the out-pointers are untouched and [`pd_last_error`] describes the error on the
//! calling thread. Handles are created by `pd_*_new`/sampling functions and released by the
//! matching `pd_*_free`; freeing `NULL` is a no-op.

use pdkit::operators::{coag, frag};
use pdkit::rectree::{grow, strip};
use pdkit::samplers::{branching_sample, crp_sample, pd_sample, subordinator_pd};
use pdkit::{Error, MassPartition, Params, RngStream, SetPartition, Truncation};
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Consistency = 3,
    Size = 4,
    Numeric = 5,
    Unsupported = 6,
    Usage = 7,
    Parse = 8,
    Io = 9,
    OutOfRange = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Independent random stream.
pub struct PdRng(RngStream);

/// Ranked mass partition with residual.
pub struct PdMassPartition(MassPartition);

/// Recursive tree on vertices `0..=n`.
pub struct PdTree(pdkit::rectree::RecursiveTree);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PdStatus {
    match e {
        Error::Domain(_) => PdStatus::Domain,
        Error::Consistency(_) => PdStatus::Consistency,
        Error::Size(_) => PdStatus::Size,
        Error::Numeric(_) => PdStatus::Numeric,
        Error::Unsupported(_) => PdStatus::Unsupported,
        Error::Usage(_) => PdStatus::Usage,
        Error::Parse { .. } => PdStatus::Parse,
        Error::Io(_) => PdStatus::Io,
    }
}

fn fail(status: PdStatus, msg: impl Into<String>) -> PdStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, mapping library errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), PdStatus>) -> PdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(PdStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, PdStatus>;
}

impl<T> OrStatus<T> for pdkit::Result<T> {
    fn or_status(self) -> Result<T, PdStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, PdStatus> {
    p.as_ref().ok_or_else(|| fail(PdStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, PdStatus> {
    p.as_mut().ok_or_else(|| fail(PdStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), PdStatus> {
    if out.is_null() {
        return Err(fail(PdStatus::NullPointer, "output pointer is NULL"));
    }
    out.write(v);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn params(alpha: f64, theta: f64) -> Result<Params, PdStatus> {
    Params::new(alpha, theta).or_status()
}

fn truncation(eps: f64, max_atoms: usize) -> Result<Truncation, PdStatus> {
    Truncation::new(eps, max_atoms).or_status()
}

/// Message of the last failed call on this thread; empty if none. Valid until the next call
/// that fails on the same thread.
#[no_mangle]
pub extern "C" fn pd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn pd_status_name(status: PdStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        PdStatus::Ok => b"ok\0",
        PdStatus::NullPointer => b"null pointer\0",
        PdStatus::Domain => b"domain error\0",
        PdStatus::Consistency => b"consistency error\0",
        PdStatus::Size => b"size error\0",
        PdStatus::Numeric => b"numeric error\0",
        PdStatus::Unsupported => b"unsupported parameters\0",
        PdStatus::Usage => b"usage error\0",
        PdStatus::Parse => b"parse error\0",
        PdStatus::Io => b"i/o error\0",
        PdStatus::OutOfRange => b"index out of range\0",
        PdStatus::BufferTooSmall => b"buffer too small\0",
        PdStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

/// Stream `stream` of the master seed `seed`. Never returns NULL.
#[no_mangle]
pub extern "C" fn pd_rng_new(seed: u64, stream: u64) -> *mut PdRng {
    boxed(PdRng(RngStream::new(seed, stream)))
}

/// # Safety
/// `rng` is NULL or a handle from [`pd_rng_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_rng_free(rng: *mut PdRng) {
    free(rng)
}

/// Uniform draw in `[0, 1)`.
///
/// # Safety
/// `rng` is a live handle and `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn pd_rng_uniform(rng: *mut PdRng, out: *mut f64) -> PdStatus {
    guard(|| {
        let r = deref_mut(rng, "rng")?;
        write_out(out, r.0.uniform())
    })
}

/// Validated partition from `len` nonincreasing positive atoms and a residual.
///
/// # Safety
/// `atoms` points to `len` readable doubles (may be NULL when `len = 0`); `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_partition_new(
    atoms: *const f64,
    len: usize,
    residual: f64,
    out: *mut *mut PdMassPartition,
) -> PdStatus {
    guard(|| {
        let a = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(deref(atoms, "atoms")?, len).to_vec()
        };
        let x = MassPartition::new(a, residual).or_status()?;
        write_out(out, boxed(PdMassPartition(x)))
    })
}

/// # Safety
/// `x` is NULL or a partition handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_partition_free(x: *mut PdMassPartition) {
    free(x)
}

/// Number of stored atoms; 0 for NULL.
///
/// # Safety
/// `x` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pd_partition_len(x: *const PdMassPartition) -> usize {
    x.as_ref().map_or(0, |x| x.0.len())
}

/// Atom `i` (zero-based, largest first).
///
/// # Safety
/// `x` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_partition_atom(x: *const PdMassPartition, i: usize, out: *mut f64) -> PdStatus {
    guard(|| {
        let x = deref(x, "partition")?;
        let a = x.0.atoms().get(i).copied().ok_or_else(|| {
            fail(PdStatus::OutOfRange, format!("atom {i} out of range for {} atoms", x.0.len()))
        })?;
        write_out(out, a)
    })
}

/// Residual mass `1 - sum(atoms)`.
///
/// # Safety
/// `x` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_partition_residual(x: *const PdMassPartition, out: *mut f64) -> PdStatus {
    guard(|| write_out(out, deref(x, "partition")?.0.residual()))
}

/// Copies all atoms into `buf`; `cap` must be at least [`pd_partition_len`].
///
/// # Safety
/// `x` is a live handle and `buf` points to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pd_partition_copy_atoms(x: *const PdMassPartition, buf: *mut f64, cap: usize) -> PdStatus {
    guard(|| {
        let atoms = deref(x, "partition")?.0.atoms();
        if cap < atoms.len() {
            return Err(fail(PdStatus::BufferTooSmall, format!("need {} doubles, got {cap}", atoms.len())));
        }
        if !atoms.is_empty() {
            ptr::copy_nonoverlapping(atoms.as_ptr(), deref_mut(buf, "buffer")?, atoms.len());
        }
        Ok(())
    })
}

/// `PD(alpha, theta)` by stick-breaking, truncated at residual `eps` or `max_atoms` atoms.
///
/// # Safety
/// `rng` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_sample_pd(
    alpha: f64,
    theta: f64,
    eps: f64,
    max_atoms: usize,
    rng: *mut PdRng,
    out: *mut *mut PdMassPartition,
) -> PdStatus {
    guard(|| {
        let (p, t) = (params(alpha, theta)?, truncation(eps, max_atoms)?);
        let x = pd_sample(p, t, &mut deref_mut(rng, "rng")?.0).or_status()?;
        write_out(out, boxed(PdMassPartition(x)))
    })
}

/// `PD(alpha, theta)` as normalized subordinator jumps; requires `theta > 0`. The total mass
/// before normalization goes to `total` unless it is NULL.
///
/// # Safety
/// `rng` is a live handle, `out` is writable and `total` is NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pd_sample_subordinator(
    alpha: f64,
    theta: f64,
    eps: f64,
    max_atoms: usize,
    rng: *mut PdRng,
    out: *mut *mut PdMassPartition,
    total: *mut f64,
) -> PdStatus {
    guard(|| {
        let (p, t) = (params(alpha, theta)?, truncation(eps, max_atoms)?);
        let (x, s) = subordinator_pd(p, t, &mut deref_mut(rng, "rng")?.0).or_status()?;
        if !total.is_null() {
            total.write(s.total_mass);
        }
        write_out(out, boxed(PdMassPartition(x)))
    })
}

/// One `Frag_alpha` step applied to `x`.
///
/// # Safety
/// `x` and `rng` are live handles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_frag(
    alpha: f64,
    x: *const PdMassPartition,
    eps: f64,
    max_atoms: usize,
    rng: *mut PdRng,
    out: *mut *mut PdMassPartition,
) -> PdStatus {
    guard(|| {
        let t = truncation(eps, max_atoms)?;
        let x = deref(x, "partition")?;
        let (y, _) = frag(alpha, &x.0, t, &mut deref_mut(rng, "rng")?.0).or_status()?;
        write_out(out, boxed(PdMassPartition(y)))
    })
}

/// One `Coag_{alpha,theta}` step applied to `x`.
///
/// # Safety
/// `x` and `rng` are live handles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_coag(
    alpha: f64,
    theta: f64,
    x: *const PdMassPartition,
    rng: *mut PdRng,
    out: *mut *mut PdMassPartition,
) -> PdStatus {
    guard(|| {
        let p = params(alpha, theta)?;
        let x = deref(x, "partition")?;
        let (y, _) = coag(p, &x.0, &mut deref_mut(rng, "rng")?.0).or_status()?;
        write_out(out, boxed(PdMassPartition(y)))
    })
}

unsafe fn write_labels(p: &SetPartition, labels: *mut usize, len: usize, blocks: *mut usize) -> Result<(), PdStatus> {
    let ids = p.block_of();
    if len < ids.len() {
        return Err(fail(PdStatus::BufferTooSmall, format!("need {} labels, got {len}", ids.len())));
    }
    ptr::copy_nonoverlapping(ids.as_ptr(), deref_mut(labels, "labels")?, ids.len());
    if !blocks.is_null() {
        blocks.write(p.num_blocks());
    }
    Ok(())
}

/// Chinese restaurant partition of `{1..n}`: `labels[k]` is the zero-based block of label
/// `k + 1`, blocks numbered by least element. The block count goes to `blocks` unless NULL.
///
/// # Safety
/// `rng` is a live handle, `labels` points to `n` writable `size_t`, `blocks` is NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pd_crp(
    alpha: f64,
    theta: f64,
    n: usize,
    rng: *mut PdRng,
    labels: *mut usize,
    blocks: *mut usize,
) -> PdStatus {
    guard(|| {
        let p = crp_sample(params(alpha, theta)?, n, &mut deref_mut(rng, "rng")?.0).or_status()?;
        write_labels(&p, labels, n, blocks)
    })
}

/// Colour partition of the first `n` individuals of the branching model, laid out as in
/// [`pd_crp`].
///
/// # Safety
/// As for [`pd_crp`].
#[no_mangle]
pub unsafe extern "C" fn pd_branching(
    alpha: f64,
    theta: f64,
    n: usize,
    rng: *mut PdRng,
    labels: *mut usize,
    blocks: *mut usize,
) -> PdStatus {
    guard(|| {
        let p = branching_sample(params(alpha, theta)?, n, &mut deref_mut(rng, "rng")?.0).or_status()?;
        write_labels(&p, labels, n, blocks)
    })
}

/// `(alpha, theta)`-recursive tree on vertices `0..=n`.
///
/// # Safety
/// `rng` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_tree_grow(alpha: f64, theta: f64, n: usize, rng: *mut PdRng, out: *mut *mut PdTree) -> PdStatus {
    guard(|| {
        let t = grow(params(alpha, theta)?, n, &mut deref_mut(rng, "rng")?.0).or_status()?;
        write_out(out, boxed(PdTree(t)))
    })
}

/// # Safety
/// `t` is NULL or a tree handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_tree_free(t: *mut PdTree) {
    free(t)
}

/// Number of non-root vertices; 0 for NULL.
///
/// # Safety
/// `t` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pd_tree_n(t: *const PdTree) -> usize {
    t.as_ref().map_or(0, |t| t.0.n())
}

/// Parent of vertex `v` in `1..=n`.
///
/// # Safety
/// `t` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_tree_parent(t: *const PdTree, v: usize, out: *mut usize) -> PdStatus {
    guard(|| {
        let t = deref(t, "tree")?;
        if v == 0 || v > t.0.n() {
            return Err(fail(PdStatus::OutOfRange, format!("vertex {v} must lie in 1..={}", t.0.n())));
        }
        write_out(out, t.0.parent(v))
    })
}

/// Components after deleting vertices `0..=depth`: `labels[k]` is the zero-based block of
/// vertex `depth + 1 + k`. Needs `depth < n` and room for `n - depth` labels.
///
/// # Safety
/// `t` is a live handle, `labels` points to `len` writable `size_t`, `blocks` is NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pd_tree_strip(
    t: *const PdTree,
    depth: usize,
    labels: *mut usize,
    len: usize,
    blocks: *mut usize,
) -> PdStatus {
    guard(|| {
        let p = strip(&deref(t, "tree")?.0, depth).or_status()?;
        write_labels(&p, labels, len, blocks)
    })
}
