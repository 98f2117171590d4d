//! C ABI for the reflectwalk library.
//!
//! Every fallible call returns an [`RwStatus`] and writes results through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`rw_last_error_message`]. Laws are opaque [`RwLaw`] handles owned by
//! the caller and released with [`rw_law_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use reflectwalk::asymptotics::{asymptotic_law, leading_term};
use reflectwalk::chain::return_probabilities;
use reflectwalk::law::DRIFT_TOL;
use reflectwalk::montecarlo::{estimate_pxy, SimConfig};
use reflectwalk::{Error, LatticeLaw, Regime};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidLaw = 2,
    InvalidArgument = 3,
    /// The law's regime is outside what the call supports.
    Unsupported = 4,
    /// A numerical check or solver failed.
    Numerical = 5,
    /// The requested table exceeds the memory cap.
    TooLarge = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RwRegime {
    Centered = 0,
    PositiveDrift = 1,
    NegativeDrift = 2,
}

impl From<Regime> for RwRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::Centered => RwRegime::Centered,
            Regime::PositiveDrift => RwRegime::PositiveDrift,
            Regime::NegativeDrift => RwRegime::NegativeDrift,
        }
    }
}

/// Opaque increment law.
pub struct RwLaw(LatticeLaw);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwMoments {
    pub drift: f64,
    pub variance: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwTilt {
    pub r0: f64,
    pub rho0: f64,
    /// `1/rho0`.
    pub radius: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwHypotheses {
    pub adapted: bool,
    pub aperiodic: bool,
    pub drift: f64,
    pub regime: RwRegime,
}

/// Leading term `C·ρⁿ·n^(−β)` of `P_x[X_n = y]`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwAsymptotic {
    pub regime: RwRegime,
    pub rho: f64,
    pub beta: f64,
    pub constant: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwEstimate {
    pub point: f64,
    pub stderr: f64,
    pub count: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RwStatus {
    match e {
        Error::InvalidLaw(_) | Error::HypothesesFailed(_) => RwStatus::InvalidLaw,
        Error::NonPositiveArgument(_) | Error::OutOfRange(_) | Error::HorizonMismatch { .. } => {
            RwStatus::InvalidArgument
        }
        Error::NotCentered { .. } | Error::NegativeDriftUnsupported { .. } => RwStatus::Unsupported,
        Error::HorizonTooLarge { .. } => RwStatus::TooLarge,
        _ => RwStatus::Numerical,
    }
}

/// Runs `f` behind a panic guard, recording any error message.
fn guard<F: FnOnce() -> Result<(), (RwStatus, String)>>(f: F) -> RwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside reflectwalk".into());
            RwStatus::Panic
        }
    }
}

fn lib<T>(r: reflectwalk::Result<T>) -> Result<T, (RwStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RwStatus, String) {
    (RwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn law_ref<'a>(law: *const RwLaw) -> Result<&'a LatticeLaw, (RwStatus, String)> {
    law.as_ref().map(|l| &l.0).ok_or_else(|| null("law"))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (RwStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn usize_arg(v: i64, what: &str) -> Result<usize, (RwStatus, String)> {
    usize::try_from(v).map_err(|_| (RwStatus::InvalidArgument, format!("{what} must be nonnegative, got {v}")))
}

/// Builds a law from `len` masses at `lo, lo+1, …`.
///
/// # Safety
/// `masses` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_law_new(lo: i64, masses: *const f64, len: usize, out: *mut *mut RwLaw) -> RwStatus {
    guard(|| {
        if masses.is_null() {
            return Err(null("masses"));
        }
        let m = std::slice::from_raw_parts(masses, len).to_vec();
        let law = lib(LatticeLaw::new(lo, m))?;
        write(out, Box::into_raw(Box::new(RwLaw(law))), "out")
    })
}

/// Parses a law from its JSON text, e.g. `{"masses": {"-1": 0.5, "1": 0.5}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_law_from_json(json: *const c_char, out: *mut *mut RwLaw) -> RwStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (RwStatus::InvalidLaw, format!("law text is not UTF-8: {e}")))?;
        let law = lib(LatticeLaw::from_json_str(text))?;
        write(out, Box::into_raw(Box::new(RwLaw(law))), "out")
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `law` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rw_law_free(law: *mut RwLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// `μ̂(r) = Σ μ(k) rᵏ` for `r > 0`.
///
/// # Safety
/// `law` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_law_mgf(law: *const RwLaw, r: f64, out: *mut f64) -> RwStatus {
    guard(|| {
        let v = lib(law_ref(law)?.mgf(r))?;
        write(out, v, "out")
    })
}

/// # Safety
/// `law` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_law_moments(law: *const RwLaw, out: *mut RwMoments) -> RwStatus {
    guard(|| {
        let m = law_ref(law)?.moments();
        write(
            out,
            RwMoments {
                drift: m.drift,
                variance: m.variance,
            },
            "out",
        )
    })
}

/// # Safety
/// `law` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_law_minimize_mgf(law: *const RwLaw, out: *mut RwTilt) -> RwStatus {
    guard(|| {
        let t = lib(law_ref(law)?.minimize_mgf())?;
        write(
            out,
            RwTilt {
                r0: t.r0,
                rho0: t.rho0,
                radius: t.radius,
            },
            "out",
        )
    })
}

/// Pass `drift_tol <= 0` for the library default.
///
/// # Safety
/// `law` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_law_check_hypotheses(law: *const RwLaw, drift_tol: f64, out: *mut RwHypotheses) -> RwStatus {
    guard(|| {
        let tol = if drift_tol > 0.0 { drift_tol } else { DRIFT_TOL };
        let h = law_ref(law)?.check_hypotheses(tol);
        write(
            out,
            RwHypotheses {
                adapted: h.adapted,
                aperiodic: h.aperiodic,
                drift: h.drift,
                regime: h.regime.into(),
            },
            "out",
        )
    })
}

/// New handle for the law tilted by `r`: `μ_r(k) = μ(k) rᵏ / μ̂(r)`.
///
/// # Safety
/// `law` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_law_tilt(law: *const RwLaw, r: f64, out: *mut *mut RwLaw) -> RwStatus {
    guard(|| {
        let tilted = lib(law_ref(law)?.tilt(r))?;
        write(out, Box::into_raw(Box::new(RwLaw(tilted))), "out")
    })
}

/// Exact `P_x[X_n = y]` by dynamic programming.
///
/// # Safety
/// `law` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_exact_probability(law: *const RwLaw, x: i64, y: i64, n: i64, out: *mut f64) -> RwStatus {
    guard(|| {
        let law = law_ref(law)?;
        let (x, y, n) = (usize_arg(x, "x")?, usize_arg(y, "y")?, usize_arg(n, "n")?);
        if n > reflectwalk::chain::MAX_HORIZON {
            return Err((RwStatus::TooLarge, format!("n = {n} exceeds {}", reflectwalk::chain::MAX_HORIZON)));
        }
        let p = return_probabilities(law, x, &[y], n)[n][0];
        write(out, p, "out")
    })
}

/// Asymptotic law of `P_x[X_n = y]` for a centered or positively drifted law.
///
/// # Safety
/// `law` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_constant(law: *const RwLaw, x: i64, y: i64, out: *mut RwAsymptotic) -> RwStatus {
    guard(|| {
        let law = law_ref(law)?;
        let a = lib(asymptotic_law(law, usize_arg(x, "x")?, usize_arg(y, "y")?))?;
        write(
            out,
            RwAsymptotic {
                regime: a.regime.into(),
                rho: a.rho,
                beta: a.beta,
                constant: a.constant,
            },
            "out",
        )
    })
}

/// Evaluates the leading term at `n >= 1`.
///
/// # Safety
/// `asym` must be readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_predict(asym: *const RwAsymptotic, n: u64, out: *mut f64) -> RwStatus {
    guard(|| {
        let a = asym.as_ref().ok_or_else(|| null("asym"))?;
        if n == 0 {
            return Err((RwStatus::InvalidArgument, "n must be at least 1".into()));
        }
        write(out, leading_term(a.constant, a.rho, a.beta, n), "out")
    })
}

/// Monte Carlo estimate of `P_x[X_n = y]` from `paths` seeded paths.
///
/// # Safety
/// `law` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_simulate_pxy(
    law: *const RwLaw,
    x: i64,
    y: i64,
    n: i64,
    paths: u64,
    seed: u64,
    out: *mut RwEstimate,
) -> RwStatus {
    guard(|| {
        let config = SimConfig {
            law: law_ref(law)?.clone(),
            start: usize_arg(x, "x")?,
            horizon: usize_arg(n, "n")?,
            paths,
            seed,
        };
        let e = lib(estimate_pxy(&config, usize_arg(y, "y")?))?;
        write(
            out,
            RwEstimate {
                point: e.point,
                stderr: e.stderr,
                count: e.count,
            },
            "out",
        )
    })
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns its full length in bytes
/// without the terminator; 0 when no error has been recorded. A null `buf`
/// only queries the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static version string.
#[no_mangle]
pub extern "C" fn rw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
