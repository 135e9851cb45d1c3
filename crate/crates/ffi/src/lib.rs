//! C interface to the rule language, resolution, certificates and verdict
//! lattice.
//!
//! Objects cross the boundary as opaque handles created by `st_*_new` or
//! `st_*_parse` and released by the matching `st_*_free`. Every fallible
//! call returns an [`StStatus`]; on failure [`st_last_error`] describes the
//! problem for the calling thread. Strings returned through `char **`
//! out-parameters are owned by the caller and must be released with
//! [`st_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use slicetrust::credentials::{self, KeyPair, PropertyCertificate, PublicKey};
use slicetrust::lopat::{self, RuleBase};
use slicetrust::resolution::{self, FactBase, FailureReason, Limits, Provenance};
use slicetrust::trustmgr::{self, Status};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Signature = 5,
    Key = 6,
    Resolution = 7,
    Panic = 99,
}

/// Outcome of resolving one goal.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StOutcome {
    Satisfied = 0,
    NoDerivation = 1,
    Cycle = 2,
    Budget = 3,
    Prereq = 4,
}

/// Trust status, ordered trusted < uncertain < untrusted.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StTrust {
    Trusted = 0,
    Uncertain = 1,
    Untrusted = 2,
}

impl From<Status> for StTrust {
    fn from(s: Status) -> Self {
        match s {
            Status::Trusted => StTrust::Trusted,
            Status::Uncertain => StTrust::Uncertain,
            Status::Untrusted => StTrust::Untrusted,
        }
    }
}

impl From<StTrust> for Status {
    fn from(s: StTrust) -> Self {
        match s {
            StTrust::Trusted => Status::Trusted,
            StTrust::Uncertain => Status::Uncertain,
            StTrust::Untrusted => Status::Untrusted,
        }
    }
}

/// Opaque rule base handle.
pub struct StRuleBase(RuleBase);

/// Opaque fact base handle.
pub struct StFactBase(FactBase);

/// Opaque property certificate handle.
pub struct StCertificate(PropertyCertificate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(StStatus, String);

impl Fail {
    fn new(status: StStatus, msg: impl ToString) -> Self {
        Fail(status, msg.to_string())
    }
}

/// Runs `f`, recording its error and converting panics to [`StStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> StStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            StStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            StStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::new(StStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::new(StStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::new(StStatus::NullArgument, format!("{what} is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::new(StStatus::NullArgument, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::new(StStatus::NullArgument, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s.replace('\0', " ")).expect("interior nul removed");
    put(out, c.into_raw(), "string out-parameter")
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn st_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn st_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn st_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// An empty rule base for `realm`.
///
/// # Safety
/// `realm` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_rulebase_new(realm: *const c_char, out: *mut *mut StRuleBase) -> StStatus {
    guard(|| {
        let realm = text(realm, "realm")?;
        put(out, Box::into_raw(Box::new(StRuleBase(RuleBase::new(realm)))), "out")
    })
}

/// Parses and validates a rule file.
///
/// # Safety
/// `realm` and `rules` must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_rulebase_parse(
    realm: *const c_char,
    rules: *const c_char,
    out: *mut *mut StRuleBase,
) -> StStatus {
    guard(|| {
        let realm = text(realm, "realm")?;
        let rules = text(rules, "rules")?;
        let rb = RuleBase::from_text(realm, rules).map_err(|e| Fail::new(StStatus::Parse, e))?;
        put(out, Box::into_raw(Box::new(StRuleBase(rb))), "out")
    })
}

/// Parses, validates and appends one rule.
///
/// # Safety
/// `rb` must be a live handle; `rule` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn st_rulebase_add(rb: *mut StRuleBase, rule: *const c_char) -> StStatus {
    guard(|| {
        let rb = handle_mut(rb, "rule base")?;
        let parsed = lopat::parse_rule(text(rule, "rule")?).map_err(|e| Fail::new(StStatus::Parse, e))?;
        rb.0.add(parsed).map_err(|e| Fail::new(StStatus::Validation, e))
    })
}

/// Number of rules; 0 for null.
///
/// # Safety
/// `rb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn st_rulebase_len(rb: *const StRuleBase) -> usize {
    rb.as_ref().map_or(0, |r| r.0.len())
}

/// Canonical text of the rule base.
///
/// # Safety
/// `rb` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_rulebase_to_text(rb: *const StRuleBase, out: *mut *mut c_char) -> StStatus {
    guard(|| put_string(out, handle(rb, "rule base")?.0.to_text()))
}

/// # Safety
/// `rb` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn st_rulebase_free(rb: *mut StRuleBase) {
    if !rb.is_null() {
        drop(Box::from_raw(rb));
    }
}

/// An empty fact base.
#[no_mangle]
pub extern "C" fn st_factbase_new() -> *mut StFactBase {
    Box::into_raw(Box::new(StFactBase(FactBase::new())))
}

/// Asserts a ground literal such as `SatC(vm1, no_malware)`.
///
/// # Safety
/// `fb` must be a live handle; `fact` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn st_factbase_assert(fb: *mut StFactBase, fact: *const c_char) -> StStatus {
    guard(|| {
        let fb = handle_mut(fb, "fact base")?;
        let lit = lopat::parse_literal(text(fact, "fact")?).map_err(|e| Fail::new(StStatus::Parse, e))?;
        fb.0.insert(lit, Provenance::Asserted).map(|_| ()).map_err(|e| Fail::new(StStatus::Validation, e))
    })
}

/// Whether the ground literal is present. Parse failures report `false`
/// and set the last error.
///
/// # Safety
/// `fb` must be a live handle; `fact` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn st_factbase_contains(fb: *const StFactBase, fact: *const c_char) -> bool {
    let mut found = false;
    guard(|| {
        let fb = handle(fb, "fact base")?;
        let lit = lopat::parse_literal(text(fact, "fact")?).map_err(|e| Fail::new(StStatus::Parse, e))?;
        found = fb.0.contains(&lit);
        Ok(())
    });
    found
}

/// Number of facts; 0 for null.
///
/// # Safety
/// `fb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn st_factbase_len(fb: *const StFactBase) -> usize {
    fb.as_ref().map_or(0, |f| f.0.len())
}

/// Closes `facts` under `rules` into a new fact base.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_forward_close(
    facts: *const StFactBase,
    rules: *const StRuleBase,
    out: *mut *mut StFactBase,
) -> StStatus {
    guard(|| {
        let closed = resolution::forward_close(&handle(facts, "fact base")?.0, &handle(rules, "rule base")?.0)
            .map_err(|e| Fail::new(StStatus::Resolution, e))?;
        put(out, Box::into_raw(Box::new(StFactBase(closed))), "out")
    })
}

/// # Safety
/// `fb` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn st_factbase_free(fb: *mut StFactBase) {
    if !fb.is_null() {
        drop(Box::from_raw(fb));
    }
}

/// Resolves one goal by backward chaining. A zero limit selects the
/// default (depth 64, 100000 steps). `trace` may be null; otherwise it
/// receives the derivation trace as text.
///
/// # Safety
/// Handles must be live; `goal` a valid C string; `outcome` writable.
#[no_mangle]
pub unsafe extern "C" fn st_resolve(
    facts: *const StFactBase,
    rules: *const StRuleBase,
    goal: *const c_char,
    max_depth: u32,
    max_steps: u32,
    outcome: *mut StOutcome,
    trace: *mut *mut c_char,
) -> StStatus {
    guard(|| {
        let facts = handle(facts, "fact base")?;
        let rules = handle(rules, "rule base")?;
        let goal = lopat::parse_literal(text(goal, "goal")?).map_err(|e| Fail::new(StStatus::Parse, e))?;
        let defaults = Limits::default();
        let limits = Limits {
            max_depth: if max_depth == 0 { defaults.max_depth } else { max_depth as usize },
            max_steps: if max_steps == 0 { defaults.max_steps } else { max_steps as usize },
        };
        let r = resolution::cp_resolve(&goal, &facts.0, &rules.0, limits);
        let o = match (r.satisfied, r.reason) {
            (true, _) => StOutcome::Satisfied,
            (false, Some(FailureReason::Cycle)) => StOutcome::Cycle,
            (false, Some(FailureReason::Budget)) => StOutcome::Budget,
            (false, Some(FailureReason::Prereq)) => StOutcome::Prereq,
            (false, _) => StOutcome::NoDerivation,
        };
        put(outcome, o, "outcome")?;
        if !trace.is_null() {
            put_string(trace, r.trace.to_text())?;
        }
        Ok(())
    })
}

/// Parses a property certificate document.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_certificate_parse(data: *const u8, len: usize, out: *mut *mut StCertificate) -> StStatus {
    guard(|| {
        if data.is_null() {
            return Err(Fail::new(StStatus::NullArgument, "data is null"));
        }
        let bytes = std::slice::from_raw_parts(data, len);
        let cert = credentials::parse_certificate(bytes).map_err(|e| Fail::new(StStatus::Parse, e))?;
        put(out, Box::into_raw(Box::new(StCertificate(cert))), "out")
    })
}

/// Serialises the certificate in its canonical document form.
///
/// # Safety
/// `cert` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_certificate_to_xml(cert: *const StCertificate, out: *mut *mut c_char) -> StStatus {
    guard(|| put_string(out, handle(cert, "certificate")?.0.to_xml()))
}

/// Certificate id.
///
/// # Safety
/// `cert` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_certificate_id(cert: *const StCertificate, out: *mut *mut c_char) -> StStatus {
    guard(|| put_string(out, handle(cert, "certificate")?.0.info.id.clone()))
}

/// Re-signs the certificate with the key derived from `seed`.
///
/// # Safety
/// `cert` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn st_certificate_sign_with_seed(cert: *mut StCertificate, seed: u64) -> StStatus {
    guard(|| {
        let cert = handle_mut(cert, "certificate")?;
        let signed = credentials::canonicalize_and_sign(cert.0.clone(), &KeyPair::from_seed(seed))
            .map_err(|e| Fail::new(StStatus::Signature, e))?;
        cert.0 = signed;
        Ok(())
    })
}

/// PEM public key for the signing key derived from `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_public_key_from_seed(seed: u64, out: *mut *mut c_char) -> StStatus {
    guard(|| put_string(out, KeyPair::from_seed(seed).public().to_pem()))
}

/// Checks the certificate signature against a PEM public key. A bad
/// signature is not an error: `valid` is set to false.
///
/// # Safety
/// `cert` must be a live handle; `public_key_pem` a valid C string; `valid`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn st_certificate_verify(
    cert: *const StCertificate,
    public_key_pem: *const c_char,
    valid: *mut bool,
) -> StStatus {
    guard(|| {
        let cert = handle(cert, "certificate")?;
        let key = PublicKey::from_pem(text(public_key_pem, "public key")?).map_err(|e| Fail::new(StStatus::Key, e))?;
        put(valid, credentials::verify_signature(&cert.0, &key), "valid")
    })
}

/// # Safety
/// `cert` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn st_certificate_free(cert: *mut StCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Least upper bound of `n` statuses; trusted when `n` is 0.
///
/// # Safety
/// `statuses` must point to `n` readable values, or be null with `n == 0`.
#[no_mangle]
pub unsafe extern "C" fn st_trust_aggregate(statuses: *const StTrust, n: usize) -> StTrust {
    if statuses.is_null() || n == 0 {
        return StTrust::Trusted;
    }
    let items = std::slice::from_raw_parts(statuses, n);
    trustmgr::aggregate(items.iter().map(|&s| Status::from(s))).into()
}

/// `(with_trust - base) / base`.
#[no_mangle]
pub extern "C" fn st_overhead_ratio(base: f64, with_trust: f64) -> f64 {
    slicetrust::nfvsim::overhead_ratio(base, with_trust)
}
