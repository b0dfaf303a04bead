//! C ABI for martlab.
//!
//! Spaces and adapted families are opaque heap handles. Every fallible call
//! returns an [`MlStatus`]; on failure the message is available from
//! [`ml_last_error_message`] until the next call on the same thread.
//! Panics are caught at the boundary and reported as [`MlStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use martlab::constants::{self, ConstantReport};
use martlab::verify::{run_suite, SuiteName, SuiteParams};
use martlab::{operators, AdaptedFamily, FilteredSpace, LabError, MassRule};

/// Opaque filtered space.
pub struct MlSpace {
    inner: FilteredSpace,
}

/// Opaque adapted family (one value per block of every level).
pub struct MlFamily {
    inner: AdaptedFamily,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Capacity = 3,
    Parameter = 4,
    DegenerateWeight = 5,
    DegenerateInput = 6,
    EmptyEstimate = 7,
    UnknownSuite = 8,
    Schema = 9,
    Io = 10,
    InvalidUtf8 = 11,
    Panic = 12,
}

/// A constant and the block attaining it; `witness_level` and
/// `witness_block` are -1 when there is no witness.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlConstant {
    pub value: f64,
    pub witness_level: i64,
    pub witness_block: i64,
}

impl From<&ConstantReport> for MlConstant {
    fn from(r: &ConstantReport) -> Self {
        let (level, block) = match &r.witness {
            Some(w) => (w.level as i64, w.blocks.first().map_or(-1, |&b| b as i64)),
            None => (-1, -1),
        };
        MlConstant {
            value: r.value,
            witness_level: level,
            witness_block: block,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &LabError) -> MlStatus {
    match e {
        LabError::Validation { .. } => MlStatus::Validation,
        LabError::Capacity { .. } => MlStatus::Capacity,
        LabError::Parameter(_) => MlStatus::Parameter,
        LabError::DegenerateWeight { .. } => MlStatus::DegenerateWeight,
        LabError::DegenerateInput(_) => MlStatus::DegenerateInput,
        LabError::EmptyEstimate => MlStatus::EmptyEstimate,
        LabError::UnknownSuite(_) => MlStatus::UnknownSuite,
        LabError::Schema(_) => MlStatus::Schema,
        LabError::Io(_) => MlStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Utf8,
    Lab(LabError),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MlStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MlStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            MlStatus::NullPointer
        }
        Ok(Err(Failure::Utf8)) => {
            set_error("string argument is not valid UTF-8");
            MlStatus::InvalidUtf8
        }
        Ok(Err(Failure::Lab(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            MlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

/// Reads `n` values, which must equal the number of atoms.
unsafe fn atoms<'a>(space: &FilteredSpace, p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    if n != space.num_atoms() {
        return Err(Failure::Lab(LabError::Validation {
            level: 0,
            message: format!("{what}: {n} values for {} atoms", space.num_atoms()),
        }));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8)
}

/// Message of the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ml_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Uniform dyadic space of the given depth.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ml_space_dyadic(depth: usize, out_space: *mut *mut MlSpace) -> MlStatus {
    guard(|| {
        let slot = out(out_space, "out_space")?;
        let inner = FilteredSpace::dyadic(depth, &MassRule::Uniform)?;
        *slot = Box::into_raw(Box::new(MlSpace { inner }));
        Ok(())
    })
}

/// Space from `{"masses": [...], "partitions": [[...], ...]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_space` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ml_space_from_json(json: *const c_char, out_space: *mut *mut MlSpace) -> MlStatus {
    guard(|| {
        let slot = out(out_space, "out_space")?;
        let s = text(json, "json")?;
        let inner: FilteredSpace = serde_json::from_str(s).map_err(LabError::from)?;
        *slot = Box::into_raw(Box::new(MlSpace { inner }));
        Ok(())
    })
}

/// # Safety
/// `space` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ml_space_free(space: *mut MlSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// # Safety
/// `space` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ml_space_num_atoms(space: *const MlSpace) -> usize {
    space.as_ref().map_or(0, |s| s.inner.num_atoms())
}

/// # Safety
/// `space` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ml_space_num_levels(space: *const MlSpace) -> usize {
    space.as_ref().map_or(0, |s| s.inner.num_levels())
}

/// # Safety
/// `space` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ml_space_num_blocks(space: *const MlSpace, level: usize) -> usize {
    space
        .as_ref()
        .filter(|s| level < s.inner.num_levels())
        .map_or(0, |s| s.inner.num_blocks(level))
}

/// Family from block values concatenated level by level
/// (`num_blocks(0) + ... + num_blocks(L)` values in total).
///
/// # Safety
/// `values` must point to `len` readable doubles; `space` must be live and
/// `out_family` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ml_family_new(
    space: *const MlSpace,
    values: *const f64,
    len: usize,
    out_family: *mut *mut MlFamily,
) -> MlStatus {
    guard(|| {
        let space = &deref(space, "space")?.inner;
        let slot = out(out_family, "out_family")?;
        if values.is_null() && len > 0 {
            return Err(Failure::Null("values"));
        }
        let total: usize = (0..space.num_levels()).map(|i| space.num_blocks(i)).sum();
        if len != total {
            return Err(Failure::Lab(LabError::Validation {
                level: 0,
                message: format!("family needs {total} block values, got {len}"),
            }));
        }
        let flat = if len == 0 { &[][..] } else { slice::from_raw_parts(values, len) };
        let mut levels = Vec::with_capacity(space.num_levels());
        let mut at = 0;
        for i in 0..space.num_levels() {
            let nb = space.num_blocks(i);
            levels.push(flat[at..at + nb].to_vec());
            at += nb;
        }
        let inner = AdaptedFamily { levels };
        inner.validate(space)?;
        *slot = Box::into_raw(Box::new(MlFamily { inner }));
        Ok(())
    })
}

/// The family equal to 1 on every block.
///
/// # Safety
/// `space` must be live and `out_family` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ml_family_ones(space: *const MlSpace, out_family: *mut *mut MlFamily) -> MlStatus {
    guard(|| {
        let space = &deref(space, "space")?.inner;
        let slot = out(out_family, "out_family")?;
        *slot = Box::into_raw(Box::new(MlFamily {
            inner: AdaptedFamily::ones(space),
        }));
        Ok(())
    })
}

/// # Safety
/// `family` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ml_family_free(family: *mut MlFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// `out = E_level f`; both buffers hold one value per atom.
///
/// # Safety
/// `f` and `out_values` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ml_cond_exp(
    space: *const MlSpace,
    level: usize,
    f: *const f64,
    n: usize,
    out_values: *mut f64,
) -> MlStatus {
    guard(|| {
        let space = &deref(space, "space")?.inner;
        let f = atoms(space, f, n, "f")?;
        if out_values.is_null() {
            return Err(Failure::Null("out_values"));
        }
        if level >= space.num_levels() {
            return Err(Failure::Lab(LabError::Parameter(format!(
                "level {level} out of range 0..{}",
                space.num_levels()
            ))));
        }
        let r = operators::cond_exp(space, level, f);
        ptr::copy_nonoverlapping(r.as_ptr(), out_values, n);
        Ok(())
    })
}

/// `out = sup_i |E_i f|`.
///
/// # Safety
/// `f` and `out_values` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ml_doob_max(space: *const MlSpace, f: *const f64, n: usize, out_values: *mut f64) -> MlStatus {
    guard(|| {
        let space = &deref(space, "space")?.inner;
        let f = atoms(space, f, n, "f")?;
        if out_values.is_null() {
            return Err(Failure::Null("out_values"));
        }
        let r = operators::doob_max(space, f);
        ptr::copy_nonoverlapping(r.as_ptr(), out_values, n);
        Ok(())
    })
}

/// `[w]_{A_p}`.
///
/// # Safety
/// `w` must point to `n` doubles and `out_constant` be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ml_ap_constant(
    space: *const MlSpace,
    w: *const f64,
    n: usize,
    p: f64,
    out_constant: *mut MlConstant,
) -> MlStatus {
    guard(|| {
        let space = &deref(space, "space")?.inner;
        let w = atoms(space, w, n, "w")?;
        let slot = out(out_constant, "out_constant")?;
        *slot = (&constants::ap_constant(space, w, p)?).into();
        Ok(())
    })
}

/// `[w]_{A_inf}`.
///
/// # Safety
/// `w` must point to `n` doubles and `out_constant` be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ml_ainfty_constant(
    space: *const MlSpace,
    w: *const f64,
    n: usize,
    out_constant: *mut MlConstant,
) -> MlStatus {
    guard(|| {
        let space = &deref(space, "space")?.inner;
        let w = atoms(space, w, n, "w")?;
        let slot = out(out_constant, "out_constant")?;
        *slot = (&constants::ainfty_constant(space, w)?).into();
        Ok(())
    })
}

/// Carleson constant of the block masses `nu` with exponent `theta`.
///
/// # Safety
/// Handles must be live and `out_constant` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ml_carleson_constant(
    space: *const MlSpace,
    nu: *const MlFamily,
    theta: f64,
    out_constant: *mut MlConstant,
) -> MlStatus {
    guard(|| {
        let space = &deref(space, "space")?.inner;
        let nu = &deref(nu, "nu")?.inner;
        let slot = out(out_constant, "out_constant")?;
        *slot = (&constants::carleson_constant(space, nu, theta)?).into();
        Ok(())
    })
}

/// Testing constant of `M_alpha: L^p(sigma^{1-p}) -> L^q(u)`.
///
/// # Safety
/// `u` and `sigma` must point to `n` doubles; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ml_sawyer_max_constant(
    space: *const MlSpace,
    alpha: *const MlFamily,
    u: *const f64,
    sigma: *const f64,
    n: usize,
    p: f64,
    q: f64,
    out_constant: *mut MlConstant,
) -> MlStatus {
    guard(|| {
        let space = &deref(space, "space")?.inner;
        let alpha = &deref(alpha, "alpha")?.inner;
        let u = atoms(space, u, n, "u")?;
        let sigma = atoms(space, sigma, n, "sigma")?;
        let slot = out(out_constant, "out_constant")?;
        *slot = (&constants::sawyer_max_constant(space, alpha, u, sigma, p, q)?).into();
        Ok(())
    })
}

/// `||W_alpha[w]^{1/p'}||_{L^r(w)}` with `1/r = 1/q - 1/p`.
///
/// # Safety
/// `w` must point to `n` doubles; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ml_wolff_norm(
    space: *const MlSpace,
    alpha: *const MlFamily,
    w: *const f64,
    n: usize,
    p: f64,
    q: f64,
    out_value: *mut f64,
) -> MlStatus {
    guard(|| {
        let space = &deref(space, "space")?.inner;
        let alpha = &deref(alpha, "alpha")?.inner;
        let w = atoms(space, w, n, "w")?;
        let slot = out(out_value, "out_value")?;
        *slot = constants::wolff_norm(space, alpha, w, p, q)?;
        Ok(())
    })
}

/// Runs a suite with default generators on all cores and returns its JSON
/// result in `*out_json`; free it with [`ml_string_free`]. The status is
/// `Ok` even when assertions fail; inspect the `passed` field.
///
/// # Safety
/// `suite` must be a NUL-terminated string and `out_json` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ml_run_suite_json(
    suite: *const c_char,
    trials: u64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> MlStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let name: SuiteName = text(suite, "suite")?.parse()?;
        let result = run_suite(name, &SuiteParams::default(), trials, seed, 0)?;
        let s = serde_json::to_string(&result).map_err(LabError::from)?;
        *slot = CString::new(s).map_err(|_| Failure::Utf8)?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ml_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
