//! C ABI for the evalplan planner and engine.
//!
//! Programs and plans are opaque handles created and freed here; every
//! function returns an [`EpStatus`] and reports detail through
//! [`ep_last_error`]. Strings returned through out-parameters are owned by
//! the caller and must be released with [`ep_string_free`].
//!
//! The generated header lives at `include/evalplan.h`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use evalplan::cost::Strategy;
use evalplan::engine::{evaluate, PlanChoice};
use evalplan::interop::{apply_planner_facts, emit_annotations, emit_asp_facts, parse_planner_facts};
use evalplan::optimizer::optimize;
use evalplan::parser::{parse_program_with, Profile};
use evalplan::plan::{read_plan, write_plan, EvaluationPlan, PlannerInput};
use evalplan::program::Program;

/// Result of every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpStatus {
    Ok = 0,
    /// The input text did not parse; see `ep_last_error`.
    ParseError = 1,
    /// No admissible plan exists for the given constraints.
    Unsat = 2,
    /// The plan is not wellformed or not admissible for the program.
    NotAdmissible = 3,
    /// A null pointer, bad UTF-8, or an otherwise invalid argument.
    InvalidArgument = 4,
    /// Evaluation failed (e.g. the program is not stratifiable).
    EvalError = 5,
    /// An internal invariant failed; see `ep_last_error`.
    InternalError = 6,
}

/// Opaque parsed program handle.
pub struct EpProgram {
    program: Program,
}

/// Opaque evaluation plan handle.
pub struct EpPlan {
    plan: EvaluationPlan,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: impl AsRef<str>) {
    let sanitized: String =
        message.as_ref().chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("no interior NUL");
    });
}

/// A message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn ep_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// The crate version as a static string; do not free.
#[no_mangle]
pub extern "C" fn ep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

fn guard(status: &mut EpStatus, body: impl FnOnce() -> EpStatus) {
    *status = match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            EpStatus::InternalError
        }
    };
}

unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, EpStatus> {
    if ptr.is_null() {
        set_error(format!("{} must not be null", what));
        return Err(EpStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{} is not valid UTF-8", what));
        EpStatus::InvalidArgument
    })
}

unsafe fn optional_str<'a>(ptr: *const c_char, what: &str) -> Result<Option<&'a str>, EpStatus> {
    if ptr.is_null() {
        return Ok(None);
    }
    required_str(ptr, what).map(Some)
}

fn give_string(out: *mut *mut c_char, content: String) -> EpStatus {
    if out.is_null() {
        set_error("output pointer must not be null");
        return EpStatus::InvalidArgument;
    }
    let sanitized: String = content.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    let cstring = CString::new(sanitized).expect("no interior NUL");
    unsafe { *out = cstring.into_raw() };
    EpStatus::Ok
}

/// Builds the planner input a handful of entry points share: the program's
/// strategy and optional constraint facts.
fn build_input(
    program: &Program,
    strategy: Option<&str>,
    constraints: Option<&str>,
) -> Result<PlannerInput, (EpStatus, String)> {
    let strategy = match strategy {
        None => Strategy::sigma2(),
        Some("sigma1") => Strategy::sigma1(),
        Some("sigma2") => Strategy::sigma2(),
        Some(text) => Strategy::parse(text)
            .map_err(|e| (EpStatus::InvalidArgument, e.to_string()))?,
    };
    let mut builder = PlannerInput::builder(program.clone()).strategy(strategy);
    if let Some(text) = constraints {
        let facts = parse_planner_facts(text)
            .map_err(|e| (EpStatus::InvalidArgument, e.to_string()))?;
        builder = apply_planner_facts(builder, &facts)
            .map_err(|e| (EpStatus::InvalidArgument, e.to_string()))?;
    }
    builder.build().map_err(|e| (EpStatus::InvalidArgument, e.to_string()))
}

/// Parses Datalog text into a program handle. With `allow_negation` the full
/// profile (stratified negation) is accepted; otherwise only positive rules
/// parse, as the planner requires.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ep_program_parse(
    text: *const c_char,
    allow_negation: bool,
    out: *mut *mut EpProgram,
) -> EpStatus {
    let mut status = EpStatus::Ok;
    guard(&mut status, || {
        if out.is_null() {
            set_error("output pointer must not be null");
            return EpStatus::InvalidArgument;
        }
        let text = match required_str(text, "program text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let profile = if allow_negation { Profile::Full } else { Profile::Planner };
        match parse_program_with(text, profile) {
            Ok(program) => {
                *out = Box::into_raw(Box::new(EpProgram { program }));
                EpStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                EpStatus::ParseError
            }
        }
    });
    status
}

/// Frees a program handle; a null pointer is ignored.
///
/// # Safety
/// `program` must have come from `ep_program_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ep_program_free(program: *mut EpProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Frees a plan handle; a null pointer is ignored.
///
/// # Safety
/// `plan` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ep_plan_free(plan: *mut EpPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Frees a string returned through any `char **` out-parameter.
///
/// # Safety
/// `s` must have been returned by this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ep_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Computes an optimal evaluation plan. `strategy` is a comma list such as
/// `"w1,w2,w3,w4"`, a preset name (`"sigma1"`, `"sigma2"`), or null for the
/// default; `constraints` is optional constraint-fact text (`relation/2`,
/// `index/3`, `key/2`, `fixedIndex/2`, `fixedPosition/3`).
///
/// # Safety
/// All pointers must be valid; string arguments NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ep_plan_compute(
    program: *const EpProgram,
    strategy: *const c_char,
    constraints: *const c_char,
    out: *mut *mut EpPlan,
) -> EpStatus {
    let mut status = EpStatus::Ok;
    guard(&mut status, || {
        let Some(handle) = program.as_ref() else {
            set_error("program must not be null");
            return EpStatus::InvalidArgument;
        };
        if out.is_null() {
            set_error("output pointer must not be null");
            return EpStatus::InvalidArgument;
        }
        let strategy = match optional_str(strategy, "strategy") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let constraints = match optional_str(constraints, "constraints") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let input = match build_input(&handle.program, strategy, constraints) {
            Ok(i) => i,
            Err((status, message)) => {
                set_error(message);
                return status;
            }
        };
        match optimize(&input) {
            Ok(optimized) => {
                *out = Box::into_raw(Box::new(EpPlan { plan: optimized.plan }));
                EpStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                match e {
                    evalplan::optimizer::OptimizeError::Unsat { .. } => EpStatus::Unsat,
                    evalplan::optimizer::OptimizeError::Cost(_) => EpStatus::InvalidArgument,
                }
            }
        }
    });
    status
}

/// Parses a plan file (the `schema`/`order` line format) against a program.
///
/// # Safety
/// All pointers must be valid; `text` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ep_plan_parse(
    program: *const EpProgram,
    text: *const c_char,
    out: *mut *mut EpPlan,
) -> EpStatus {
    let mut status = EpStatus::Ok;
    guard(&mut status, || {
        let Some(handle) = program.as_ref() else {
            set_error("program must not be null");
            return EpStatus::InvalidArgument;
        };
        if out.is_null() {
            set_error("output pointer must not be null");
            return EpStatus::InvalidArgument;
        }
        let text = match required_str(text, "plan text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match read_plan(text, &handle.program) {
            Ok(plan) => {
                *out = Box::into_raw(Box::new(EpPlan { plan }));
                EpStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                EpStatus::ParseError
            }
        }
    });
    status
}

/// Serializes a plan in the plan-file format.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ep_plan_render(
    program: *const EpProgram,
    plan: *const EpPlan,
    out: *mut *mut c_char,
) -> EpStatus {
    let mut status = EpStatus::Ok;
    guard(&mut status, || {
        match (program.as_ref(), plan.as_ref()) {
            (Some(p), Some(pl)) => give_string(out, write_plan(&pl.plan, &p.program)),
            _ => {
                set_error("program and plan must not be null");
                EpStatus::InvalidArgument
            }
        }
    });
    status
}

/// Checks wellformedness and admissibility. Returns `Ok` for an admissible
/// plan, `NotAdmissible` otherwise; the verdict report (one line per rule)
/// is written to `report` when it is non-null.
///
/// # Safety
/// `program` and `plan` must be valid handles.
#[no_mangle]
pub unsafe extern "C" fn ep_plan_check(
    program: *const EpProgram,
    plan: *const EpPlan,
    report: *mut *mut c_char,
) -> EpStatus {
    let mut status = EpStatus::Ok;
    guard(&mut status, || {
        let (Some(handle), Some(plan)) = (program.as_ref(), plan.as_ref()) else {
            set_error("program and plan must not be null");
            return EpStatus::InvalidArgument;
        };
        let input = match build_input(&handle.program, None, None) {
            Ok(i) => i,
            Err((status, message)) => {
                set_error(message);
                return status;
            }
        };
        let mut ok = true;
        let mut text = String::new();
        for diag in evalplan::plan::wellformedness_diagnostics(&plan.plan, &input) {
            ok = false;
            text.push_str(&format!("wellformedness: {}\n", diag));
        }
        for rule in handle.program.planner_rules() {
            if let Some(ordering) = plan.plan.ordering(rule.id) {
                if ordering.len() != rule.body.len() {
                    continue;
                }
                match evalplan::admissibility::is_admissible(rule, ordering, &plan.plan.schema) {
                    Ok(()) => text.push_str(&format!("rule {}: admissible\n", rule.id)),
                    Err(v) => {
                        ok = false;
                        text.push_str(&format!(
                            "rule {}: violation: {}\n",
                            rule.id,
                            v.display(&handle.program, rule)
                        ));
                    }
                }
            }
        }
        if !report.is_null() {
            let s = give_string(report, text);
            if s != EpStatus::Ok {
                return s;
            }
        }
        if ok {
            EpStatus::Ok
        } else {
            set_error("plan is not admissible");
            EpStatus::NotAdmissible
        }
    });
    status
}

/// Emits the solver-facing fact stream for the program (optionally with a
/// strategy and constraint facts, as in `ep_plan_compute`).
///
/// # Safety
/// All pointers must be valid; string arguments NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ep_emit_facts(
    program: *const EpProgram,
    strategy: *const c_char,
    constraints: *const c_char,
    out: *mut *mut c_char,
) -> EpStatus {
    let mut status = EpStatus::Ok;
    guard(&mut status, || {
        let Some(handle) = program.as_ref() else {
            set_error("program must not be null");
            return EpStatus::InvalidArgument;
        };
        let strategy = match optional_str(strategy, "strategy") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let constraints = match optional_str(constraints, "constraints") {
            Ok(s) => s,
            Err(s) => return s,
        };
        match build_input(&handle.program, strategy, constraints) {
            Ok(input) => give_string(out, emit_asp_facts(&input)),
            Err((status, message)) => {
                set_error(message);
                status
            }
        }
    });
    status
}

/// Renders the program annotated with the plan's order and index directives.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ep_annotate(
    program: *const EpProgram,
    plan: *const EpPlan,
    out: *mut *mut c_char,
) -> EpStatus {
    let mut status = EpStatus::Ok;
    guard(&mut status, || match (program.as_ref(), plan.as_ref()) {
        (Some(p), Some(pl)) => give_string(out, emit_annotations(&p.program, &pl.plan)),
        _ => {
            set_error("program and plan must not be null");
            EpStatus::InvalidArgument
        }
    });
    status
}

/// Evaluates the program. With a plan the engine follows it; with a null
/// plan the per-rule baseline policy applies. `query` selects one relation
/// to print as fact lines (`"t/2"`); null prints per-relation counts.
/// `metrics_json`, when non-null, receives the evaluation metrics as JSON.
///
/// # Safety
/// All pointers must be valid; string arguments NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ep_evaluate(
    program: *const EpProgram,
    plan: *const EpPlan,
    query: *const c_char,
    result: *mut *mut c_char,
    metrics_json: *mut *mut c_char,
) -> EpStatus {
    let mut status = EpStatus::Ok;
    guard(&mut status, || {
        let Some(handle) = program.as_ref() else {
            set_error("program must not be null");
            return EpStatus::InvalidArgument;
        };
        let query = match optional_str(query, "query") {
            Ok(q) => q,
            Err(s) => return s,
        };
        let choice = match plan.as_ref() {
            Some(p) => PlanChoice::Plan(&p.plan),
            None => PlanChoice::Baseline,
        };
        let (model, metrics) = match evaluate(&handle.program, choice, &[]) {
            Ok(r) => r,
            Err(e) => {
                set_error(e.to_string());
                return match e {
                    evalplan::engine::EngineError::PlanMismatch(_) => EpStatus::InvalidArgument,
                    evalplan::engine::EngineError::Stratify(_) => EpStatus::EvalError,
                };
            }
        };
        let text = match query {
            Some(tag) => {
                let Some(pred) = handle.program.pred_by_tag(tag) else {
                    set_error(format!("unknown predicate `{}` (use name/arity)", tag));
                    return EpStatus::InvalidArgument;
                };
                let mut text = String::new();
                if let Some(rel) = model.relation(pred) {
                    for tuple in rel {
                        let atom = evalplan::ast::Atom {
                            predicate: pred,
                            terms: tuple
                                .iter()
                                .cloned()
                                .map(evalplan::ast::Term::Constant)
                                .collect(),
                        };
                        text.push_str(&handle.program.atom_text(&atom));
                        text.push_str(".\n");
                    }
                }
                text
            }
            None => {
                let mut text = String::new();
                for (pred, rel) in model.relations() {
                    text.push_str(&format!(
                        "{}: {}\n",
                        handle.program.pred(pred).tag(),
                        rel.len()
                    ));
                }
                text
            }
        };
        if !result.is_null() {
            let s = give_string(result, text);
            if s != EpStatus::Ok {
                return s;
            }
        }
        if !metrics_json.is_null() {
            let s = give_string(metrics_json, metrics.to_json().to_string());
            if s != EpStatus::Ok {
                return s;
            }
        }
        EpStatus::Ok
    });
    status
}
