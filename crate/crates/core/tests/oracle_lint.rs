//! The oracle must stay independent of the execution engine.

const FORBIDDEN: &[&str] = &["exec", "recursion", "blocks", "plan", "source", "metrics"];

#[test]
fn oracle_imports_no_engine_modules() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/src/oracle.rs");
    let src = std::fs::read_to_string(path).unwrap();
    let mut offences = Vec::new();
    for (n, line) in src.lines().enumerate() {
        let code = line.split("//").next().unwrap_or("");
        for m in FORBIDDEN {
            if code.contains(&format!("crate::{m}")) || code.contains(&format!("super::{m}")) {
                offences.push(format!("line {}: {}", n + 1, line.trim()));
            }
        }
    }
    assert!(offences.is_empty(), "oracle.rs depends on engine code:\n{}", offences.join("\n"));
}
