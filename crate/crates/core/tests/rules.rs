use egen::expr::Op;
use egen::rules::selftest::self_test;
use egen::rules::{builtin, load_library, parse_library, RuleError};

#[test]
fn every_builtin_rule_is_numerically_sound() {
    let mut failures = Vec::new();
    for name in ["fig1", "full"] {
        for (i, rule) in builtin(name).unwrap().iter().enumerate() {
            let report = self_test(rule, 200, 1000 + i as u64);
            if !report.passed() {
                failures.push(format!("{name}/{}: {report:?}", rule.name));
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn full_library_covers_every_unary_derivative() {
    let rules = builtin("full").unwrap();
    for op in Op::unary_functions() {
        let lhs = format!("(d/dx ({} ?u))", op.token());
        assert!(
            rules.iter().any(|r| r.lhs.to_string() == lhs),
            "no chain rule for {}",
            op.token()
        );
    }
    for op in Op::binary_arith() {
        let lhs = format!("(d/dx ({} ?u ?v))", op.token());
        assert!(rules.iter().any(|r| r.lhs.to_string() == lhs), "{lhs}");
    }
}

#[test]
fn full_library_spans_categories() {
    let rules = builtin("full").unwrap();
    for required in [
        "add-comm",
        "add-assoc-fwd",
        "distribute-fwd",
        "neg-neg",
        "sqrt-square",
        "abs-mul",
        "ln-exp",
        "sec-recip-fwd",
        "tanh-recip",
        "sin-phase",
        "sin-period",
        "sin-asin",
        "csc-asin",
        "sinh-asinh",
    ] {
        assert!(rules.iter().any(|r| r.name == required), "{required}");
    }
    let expansive: Vec<_> = rules.iter().filter(|r| r.expansive).map(|r| &r.name).collect();
    assert_eq!(expansive, ["add-zero-rev", "mul-one-rev"]);
}

#[test]
fn loading_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.rules");
    std::fs::write(&path, egen::rules::builtin_source("full").unwrap()).unwrap();
    let a = load_library(path.to_str().unwrap(), &[]).unwrap();
    let b = load_library(path.to_str().unwrap(), &[]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, builtin("full").unwrap());
}

#[test]
fn missing_file_is_an_error() {
    let err = egen::rules::load_file(std::path::Path::new("/nonexistent/x.rules")).unwrap_err();
    assert!(matches!(err, RuleError::Io { .. }));
    assert!(parse_library("").unwrap().is_empty());
}
