//! C interface to lmabo.
//!
//! Every function returns an [`LmaboStatus`]; on failure a message is kept
//! per thread and can be read with [`lmabo_last_error`]. Objects are opaque
//! handles created by `*_new`/`*_fit`/`*_run` functions and released with the
//! matching `*_free`. Arrays are caller-owned, row-major `double` buffers.
//! Panics never cross the boundary; they surface as `LMABO_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use lmabo::acquisition::AcquisitionKind;
use lmabo::analysis::{friedman_test, holm_bonferroni, RankMatrix};
use lmabo::benchmarks::{find_problem, Problem};
use lmabo::harness::{run_with, RunConfig, RunRecord};
use lmabo::rng::seeded;
use lmabo::space::Bounds;
use lmabo::surrogate::{fit, Dataset, FitConfig, GpModel};
use lmabo::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmaboStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    NotFound = 4,
    Config = 5,
    Evaluation = 6,
    Transport = 7,
    Data = 8,
    Io = 9,
    /// The output buffer is too small; the required size was written.
    BufferTooSmall = 10,
    Panic = 11,
    Internal = 12,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LmaboStatus {
    match e {
        Error::Argument(_) | Error::Validation(_) | Error::Undefined(_) => LmaboStatus::InvalidArgument,
        Error::Numerical { .. } | Error::Fit(_) => LmaboStatus::Numerical,
        Error::NotFound(_) => LmaboStatus::NotFound,
        Error::Config(_) => LmaboStatus::Config,
        Error::Evaluation(_) => LmaboStatus::Evaluation,
        Error::Transport(_) => LmaboStatus::Transport,
        Error::Data(_) | Error::Json(_) => LmaboStatus::Data,
        Error::Io(_) => LmaboStatus::Io,
        _ => LmaboStatus::Internal,
    }
}

enum Failure {
    Status(LmaboStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(LmaboStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Status(LmaboStatus::InvalidArgument, msg.into())
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LmaboStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LmaboStatus::Ok
        }
        Ok(Err(Failure::Status(s, m))) => {
            set_error(m);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("panic: {}", msg.unwrap_or_else(|| "unknown".into())));
            LmaboStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_out<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

/// Copies `s` NUL-terminated into `buf`; reports the needed size in `needed`.
unsafe fn write_str(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Failure> {
    let need = s.len() + 1;
    if !needed.is_null() {
        needed.write(need);
    }
    if buf.is_null() || len < need {
        return Err(Failure::Status(LmaboStatus::BufferTooSmall, format!("buffer of {len} bytes, {need} needed")));
    }
    std::ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, s.len());
    buf.add(s.len()).write(0);
    Ok(())
}

/// Copies the calling thread's last error message into `buf`. Writes an
/// empty string when the last call succeeded.
///
/// # Safety
/// `buf` must point to `len` writable bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn lmabo_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> LmaboStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().as_ref().map(|c| c.to_string_lossy().into_owned()).unwrap_or_default());
    match write_str(&msg, buf, len, needed) {
        Ok(()) => LmaboStatus::Ok,
        Err(Failure::Status(s, _)) => s,
        Err(Failure::Lib(_)) => LmaboStatus::Internal,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lmabo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// A benchmark problem.
pub struct LmaboProblem(Problem);

/// Looks up a registry problem (`Name` or `Name-kD`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmabo_problem_new(name: *const c_char, out: *mut *mut LmaboProblem) -> LmaboStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = find_problem(name)?;
        out.write(Box::into_raw(Box::new(LmaboProblem(p))));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from `lmabo_problem_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lmabo_problem_free(problem: *mut LmaboProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle; `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmabo_problem_dim(problem: *const LmaboProblem, dim: *mut usize) -> LmaboStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        write_out(dim, p.0.dim, "dim")
    })
}

/// Box bounds; `lower` and `upper` hold `dim` values each.
///
/// # Safety
/// `problem` must be a live handle; both outputs must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn lmabo_problem_bounds(
    problem: *const LmaboProblem,
    lower: *mut f64,
    upper: *mut f64,
    dim: usize,
) -> LmaboStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if dim != p.0.dim {
            return Err(invalid(format!("problem has {} dimensions, buffers have {dim}", p.0.dim)));
        }
        let (lo, hi) = (slice_out(lower, dim, "lower")?, slice_out(upper, dim, "upper")?);
        for (i, (a, b)) in p.0.bounds.limits().iter().enumerate() {
            lo[i] = *a;
            hi[i] = *b;
        }
        Ok(())
    })
}

/// Noise-free objective value at `x`.
///
/// # Safety
/// `problem` must be a live handle; `x` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn lmabo_problem_evaluate(
    problem: *const LmaboProblem,
    x: *const f64,
    dim: usize,
    value: *mut f64,
) -> LmaboStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let v = p.0.evaluate_true(slice_arg(x, dim, "x")?)?;
        write_out(value, v, "value")
    })
}

/// Known global minimum; `LMABO_STATUS_NOT_FOUND` when unknown.
///
/// # Safety
/// `problem` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmabo_problem_optimum(problem: *const LmaboProblem, value: *mut f64) -> LmaboStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let v = p.0.known_optimum.ok_or_else(|| Failure::Status(LmaboStatus::NotFound, format!("{} has no known optimum", p.0.name)))?;
        write_out(value, v, "value")
    })
}

/// A Gaussian-process surrogate with fitted hyperparameters.
pub struct LmaboGp(GpModel);

/// Fits a GP to `n` points of dimension `dim` inside the box
/// `[lower, upper]`. `points` is row-major `n × dim`.
///
/// # Safety
/// All arrays must hold the stated number of doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmabo_gp_fit(
    points: *const f64,
    values: *const f64,
    n: usize,
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    seed: u64,
    out: *mut *mut LmaboGp,
) -> LmaboStatus {
    guard(|| {
        if dim == 0 || n == 0 {
            return Err(invalid("need at least one point and one dimension"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let flat = slice_arg(points, n.checked_mul(dim).ok_or_else(|| invalid("size overflow"))?, "points")?;
        let ys = slice_arg(values, n, "values")?;
        let (lo, hi) = (slice_arg(lower, dim, "lower")?, slice_arg(upper, dim, "upper")?);
        let bounds = Bounds::new(lo.iter().copied().zip(hi.iter().copied()).collect())?;
        let ds = Dataset::new(flat.chunks(dim).map(<[f64]>::to_vec).collect(), ys.to_vec(), bounds)?;
        let model = fit(&ds, &FitConfig::default(), &mut seeded(seed))?;
        out.write(Box::into_raw(Box::new(LmaboGp(model))));
        Ok(())
    })
}

/// # Safety
/// `gp` must come from `lmabo_gp_fit` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lmabo_gp_free(gp: *mut LmaboGp) {
    if !gp.is_null() {
        drop(Box::from_raw(gp));
    }
}

/// Posterior mean and variance (original output units) at `m` query points.
///
/// # Safety
/// `gp` must be a live handle; `x` holds `m × dim` doubles, `mean` and
/// `variance` `m` each.
#[no_mangle]
pub unsafe extern "C" fn lmabo_gp_predict(
    gp: *const LmaboGp,
    x: *const f64,
    m: usize,
    dim: usize,
    mean: *mut f64,
    variance: *mut f64,
) -> LmaboStatus {
    guard(|| {
        let g = gp.as_ref().ok_or_else(|| null("gp"))?;
        if dim != g.0.dim() {
            return Err(invalid(format!("model has {} dimensions, got {dim}", g.0.dim())));
        }
        let flat = slice_arg(x, m * dim, "x")?;
        let pts: Vec<Vec<f64>> = flat.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        let post = g.0.posterior(&pts, true)?;
        slice_out(mean, m, "mean")?.copy_from_slice(&post.mean);
        slice_out(variance, m, "variance")?.copy_from_slice(&post.variance);
        Ok(())
    })
}

/// Fitted lengthscales (unit-cube units), `dim` values.
///
/// # Safety
/// `gp` must be a live handle; `out` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn lmabo_gp_lengthscales(gp: *const LmaboGp, out: *mut f64, dim: usize) -> LmaboStatus {
    guard(|| {
        let g = gp.as_ref().ok_or_else(|| null("gp"))?;
        let ls = &g.0.params().lengthscales;
        if dim != ls.len() {
            return Err(invalid(format!("model has {} dimensions, got {dim}", ls.len())));
        }
        slice_out(out, dim, "out")?.copy_from_slice(ls);
        Ok(())
    })
}

/// A finished optimization run.
pub struct LmaboRecord(RunRecord);

/// Runs one optimization without an LLM strategist. `budget` 0 picks the
/// default; `output_dir` may be null to keep the record in memory only.
///
/// # Safety
/// String arguments must be NUL-terminated (or null where allowed); `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmabo_run(
    problem: *const c_char,
    strategist: *const c_char,
    seed: u64,
    budget: usize,
    output_dir: *const c_char,
    out: *mut *mut LmaboRecord,
) -> LmaboStatus {
    guard(|| {
        let problem = str_arg(problem, "problem")?;
        let kind = str_arg(strategist, "strategist")?.parse()?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut c = RunConfig::new(problem, kind, seed);
        if budget > 0 {
            c.budget = Some(budget);
        }
        if !output_dir.is_null() {
            c.output_dir = Some(PathBuf::from(str_arg(output_dir, "output_dir")?));
        }
        if c.strategist == lmabo::strategist::StrategistKind::Llm {
            return Err(invalid("the LLM strategist is only available through the command-line tool"));
        }
        let p = c.resolve_problem()?;
        let rec = run_with(&c, &p, None)?;
        out.write(Box::into_raw(Box::new(LmaboRecord(rec))));
        Ok(())
    })
}

/// # Safety
/// `record` must come from `lmabo_run` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lmabo_record_free(record: *mut LmaboRecord) {
    if !record.is_null() {
        drop(Box::from_raw(record));
    }
}

/// Number of loop iterations recorded.
///
/// # Safety
/// `record` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmabo_record_len(record: *const LmaboRecord, len: *mut usize) -> LmaboStatus {
    guard(|| {
        let r = record.as_ref().ok_or_else(|| null("record"))?;
        write_out(len, r.0.iterations.len(), "len")
    })
}

/// Best value seen after each iteration; `out` holds `len` doubles.
///
/// # Safety
/// `record` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lmabo_record_incumbents(record: *const LmaboRecord, out: *mut f64, len: usize) -> LmaboStatus {
    guard(|| {
        let r = record.as_ref().ok_or_else(|| null("record"))?;
        let inc = r.0.incumbents();
        if len != inc.len() {
            return Err(invalid(format!("record has {} iterations, buffer holds {len}", inc.len())));
        }
        slice_out(out, len, "out")?.copy_from_slice(&inc);
        Ok(())
    })
}

/// Acquisition function chosen at `iteration` (0-based) as its short tag.
///
/// # Safety
/// `record` must be a live handle; `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lmabo_record_choice(
    record: *const LmaboRecord,
    iteration: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> LmaboStatus {
    guard(|| {
        let r = record.as_ref().ok_or_else(|| null("record"))?;
        let it = r.0.iterations.get(iteration).ok_or_else(|| invalid(format!("iteration {iteration} out of range")))?;
        write_str(it.chosen.abbrev(), buf, len, needed)
    })
}

/// Friedman test on a row-major `n_problems × n_methods` rank matrix.
///
/// # Safety
/// `ranks` must hold `n_problems × n_methods` doubles; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn lmabo_friedman(
    ranks: *const f64,
    n_problems: usize,
    n_methods: usize,
    statistic: *mut f64,
    p_value: *mut f64,
) -> LmaboStatus {
    guard(|| {
        if n_methods == 0 {
            return Err(invalid("no methods"));
        }
        let flat = slice_arg(ranks, n_problems * n_methods, "ranks")?;
        let rows: Vec<Vec<f64>> = flat.chunks(n_methods).map(<[f64]>::to_vec).collect();
        let (s, p) = friedman_test(&RankMatrix::from_problem_rows(&rows)?)?;
        write_out(statistic, s, "statistic")?;
        write_out(p_value, p, "p_value")
    })
}

/// Holm step-down adjustment of `n` p-values, in input order.
///
/// # Safety
/// `p_values` and `adjusted` must hold `n` doubles each.
#[no_mangle]
pub unsafe extern "C" fn lmabo_holm(p_values: *const f64, n: usize, adjusted: *mut f64) -> LmaboStatus {
    guard(|| {
        let p = slice_arg(p_values, n, "p_values")?;
        if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("p-value {bad} outside [0, 1]")));
        }
        slice_out(adjusted, n, "adjusted")?.copy_from_slice(&holm_bonferroni(p));
        Ok(())
    })
}

/// Parses a strategist reply into an acquisition tag. Invalid replies give
/// `UCB` with `*fallback_used = 1`.
///
/// # Safety
/// `reply` must be NUL-terminated; `buf` must hold `len` bytes;
/// `fallback_used` and `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn lmabo_parse_decision(
    reply: *const c_char,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
    fallback_used: *mut i32,
) -> LmaboStatus {
    guard(|| {
        let d = lmabo::llm::parse_decision(str_arg(reply, "reply")?, &AcquisitionKind::ALL);
        if !fallback_used.is_null() {
            fallback_used.write(d.fallback_used as i32);
        }
        write_str(d.kind.abbrev(), buf, len, needed)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::NotFound("x".into())), LmaboStatus::NotFound);
        assert_eq!(status_of(&Error::Config("x".into())), LmaboStatus::Config);
        assert_eq!(status_of(&Error::Data("x".into())), LmaboStatus::Data);
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), LmaboStatus::Panic);
        let mut buf = [0 as c_char; 64];
        unsafe { lmabo_last_error(buf.as_mut_ptr(), buf.len(), std::ptr::null_mut()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
    }
}
