use std::ffi::{c_char, CStr, CString};
use std::ptr;

use acd::*;

fn last_error() -> String {
    let need = unsafe { acd_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; need];
    unsafe { acd_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn ridge(n: usize) -> *mut AcdProblem {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { acd_problem_ridge(n, 1, 1.0, &mut p) }, AcdStatus::Ok);
    p
}

const CCD: &str = "[solver]\nengine = \"ccd\"\nepochs = 200\n";

#[test]
fn solve_audit_and_read_back() {
    let p = ridge(8);
    unsafe {
        assert_eq!(acd_problem_dim(p), 8);
        let mut t = ptr::null_mut();
        assert_eq!(acd_solve(p, cstr(CCD).as_ptr(), -1, false, &mut t), AcdStatus::Ok, "{}", last_error());
        assert_eq!(acd_trace_len(t), 1600);
        assert!(acd_trace_gamma(t) > 0.0);
        assert_eq!(acd_trace_audit(p, t), AcdStatus::Ok, "{}", last_error());

        let mut rec = AcdRecord::default();
        assert_eq!(acd_trace_record(t, 9, &mut rec), AcdStatus::Ok);
        assert_eq!((rec.t, rec.coordinate), (10, 1));
        assert_eq!(acd_trace_record(t, 1600, &mut rec), AcdStatus::InvalidParameter);
        assert!(last_error().contains("record 1600"));

        let mut x = [0.0; 8];
        assert_eq!(acd_trace_final_x(t, x.as_mut_ptr(), 8), AcdStatus::Ok);
        let mut direct = 0.0;
        assert_eq!(acd_problem_value(p, x.as_ptr(), 8, &mut direct), AcdStatus::Ok);
        let mut replayed = 0.0;
        assert_eq!(acd_trace_final_value(p, t, &mut replayed), AcdStatus::Ok);
        assert!((direct - replayed).abs() <= 1e-9 * direct.abs().max(1.0));
        assert_eq!(acd_trace_final_x(t, x.as_mut_ptr(), 7), AcdStatus::InvalidParameter);

        // Text round trip through the export format.
        let need = acd_trace_format(t, ptr::null_mut(), 0);
        let mut buf = vec![0 as c_char; need];
        assert_eq!(acd_trace_format(t, buf.as_mut_ptr(), need), need);
        let mut back = ptr::null_mut();
        assert_eq!(acd_trace_parse(buf.as_ptr(), &mut back), AcdStatus::Ok, "{}", last_error());
        assert_eq!(acd_trace_len(back), 1600);
        let mut y = [0.0; 8];
        acd_trace_final_x(back, y.as_mut_ptr(), 8);
        assert_eq!(x.map(f64::to_bits), y.map(f64::to_bits));

        acd_trace_free(back);
        acd_trace_free(t);
        acd_problem_free(p);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(acd_problem_ridge(8, 1, 1.0, ptr::null_mut()), AcdStatus::NullPointer);
        assert_eq!(acd_problem_from_toml(ptr::null(), &mut p), AcdStatus::NullPointer);
        assert_eq!(acd_problem_from_toml(cstr("kind = \"cubic\"").as_ptr(), &mut p), AcdStatus::Parse);
        assert!(!last_error().is_empty());
        assert_eq!(acd_problem_ridge(0, 1, 1.0, &mut p), AcdStatus::InvalidParameter);

        let p = ridge(4);
        let mut t = ptr::null_mut();
        let low = cstr("[solver]\nengine = \"ccd\"\ngamma = 1e-3\n");
        assert_eq!(acd_solve(p, low.as_ptr(), 0, false, &mut t), AcdStatus::InvalidParameter);
        assert!(t.is_null());
        assert!(last_error().contains("force"));
        // Forced, the run happens and the audit reports the broken guarantees.
        assert_eq!(acd_solve(p, low.as_ptr(), 0, true, &mut t), AcdStatus::Ok);
        assert_eq!(acd_trace_audit(p, t), AcdStatus::AuditFailed);
        assert!(last_error().starts_with("audit failed"));
        acd_trace_free(t);

        // A successful call clears the message.
        assert_eq!(acd_problem_dim(p), 4);
        let mut v = 0.0;
        assert_eq!(acd_problem_value(p, [0.0; 4].as_ptr(), 4, &mut v), AcdStatus::Ok);
        assert_eq!(last_error(), "");
        assert_eq!(acd_last_error_message(ptr::null_mut(), 0), 1);
        acd_problem_free(p);

        assert_eq!(acd_problem_dim(ptr::null()), 0);
        assert_eq!(acd_trace_len(ptr::null()), 0);
        assert!(acd_trace_gamma(ptr::null()).is_nan());
        acd_problem_free(ptr::null_mut());
        acd_trace_free(ptr::null_mut());
        acd_market_free(ptr::null_mut());
    }
}

#[test]
fn truncated_message_is_terminated() {
    unsafe {
        let mut p = ptr::null_mut();
        acd_problem_ridge(0, 1, 1.0, &mut p);
        let full = last_error();
        let mut buf = [1 as c_char; 6];
        let need = acd_last_error_message(buf.as_mut_ptr(), buf.len());
        assert_eq!(need, full.len() + 1);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), &full[..5]);
    }
}

#[test]
fn market_round() {
    let text = cstr(
        "goods = 2\ninitial_prices = [3.0, 0.5]\n\n[[buyers]]\nbudget = 1.0\nutility = { kind = \"ces\", rho = -1.0, coeffs = [1.0, 1.0] }\n\n[tatonnement]\nlambda = 0.02702702702702703\nhorizon = 300.0\n",
    );
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(acd_market_from_toml(text.as_ptr(), &mut m), AcdStatus::Ok, "{}", last_error());
        assert_eq!(acd_market_goods(m), 2);

        let mut z = [0.0; 2];
        assert_eq!(acd_market_excess_demand(m, [0.5, 0.5].as_ptr(), z.as_mut_ptr(), 2), AcdStatus::Ok);
        assert!(z.iter().all(|v| v.abs() < 1e-12));

        let mut prices = [0.0; 2];
        let mut s = AcdMarketSummary::default();
        assert_eq!(acd_market_run(m, ptr::null(), 0.0, 0.0, 5, false, prices.as_mut_ptr(), 2, &mut s), AcdStatus::Ok);
        assert!(s.updates > 0);
        assert!(s.final_residual < s.initial_residual);
        assert!(s.final_potential <= s.initial_potential);
        let mut r = 0.0;
        assert_eq!(acd_market_residual(m, prices.as_ptr(), 2, &mut r), AcdStatus::Ok);
        assert_eq!(r, s.final_residual);

        // Beyond the guaranteed step factor only with force.
        let st = acd_market_run(m, ptr::null(), 0.5, 10.0, 5, false, prices.as_mut_ptr(), 2, &mut s);
        assert_eq!(st, AcdStatus::InvalidParameter);
        let st = acd_market_run(m, ptr::null(), 0.5, 10.0, 5, true, prices.as_mut_ptr(), 2, ptr::null_mut());
        assert_eq!(st, AcdStatus::Ok, "{}", last_error());

        let st = acd_market_run(m, [1.0, -1.0].as_ptr(), 0.0, 0.0, 5, false, prices.as_mut_ptr(), 2, &mut s);
        assert_eq!(st, AcdStatus::Domain);
        assert_eq!(acd_market_excess_demand(m, [1.0].as_ptr(), z.as_mut_ptr(), 1), AcdStatus::InvalidParameter);
        acd_market_free(m);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(acd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/acd.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for ty in ["typedef struct AcdProblem AcdProblem;", "typedef struct AcdTrace AcdTrace;", "ACD_STATUS_AUDIT_FAILED = 12"] {
        assert!(header.contains(ty), "{ty}");
    }
}
