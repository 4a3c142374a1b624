//! Plan documents: JSON text to [`PlanSpec`] and back.

use posrec_core::plan::{PlanSpec, OP_NAMES};
use serde_json::Value as Json;

use crate::error::{PosrecError, Result};

/// Parses a plan document. Unknown `op` tags are reported with their node
/// path before structural decoding, so they are never mistaken for
/// missing fields.
pub fn parse_plan(text: &str) -> Result<PlanSpec> {
    let doc: Json = serde_json::from_str(text).map_err(|e| PosrecError::Json(e.to_string()))?;
    if let Some(root) = doc.get("root") {
        check_ops(root, "root")?;
    }
    serde_json::from_value(doc).map_err(|e| {
        let msg = e.to_string();
        if msg.starts_with("missing field") {
            PosrecError::MissingField(msg)
        } else {
            PosrecError::Json(msg)
        }
    })
}

fn check_ops(node: &Json, path: &str) -> Result<()> {
    let Json::Object(map) = node else { return Ok(()) };
    match map.get("op") {
        Some(Json::String(op)) if !OP_NAMES.contains(&op.as_str()) => {
            return Err(PosrecError::UnknownOp { op: op.clone(), path: path.to_string() })
        }
        Some(Json::String(_)) => {}
        Some(other) => return Err(PosrecError::Json(format!("{path}: `op` must be a string, got {other}"))),
        None => return Err(PosrecError::MissingField(format!("missing field `op` at {path}"))),
    }
    for key in ["input", "build", "probe", "seed", "recursive"] {
        if let Some(child) = map.get(key) {
            check_ops(child, &format!("{path}.{key}"))?;
        }
    }
    Ok(())
}

pub fn plan_to_json(spec: &PlanSpec) -> String {
    serde_json::to_string_pretty(spec).expect("plan trees always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_plan() {
        let text = r#"{"tables":["edges"],"root":{"op":"materialize","attrs":["id"],
            "input":{"op":"scan","table":"edges"}}}"#;
        let spec = parse_plan(text).unwrap();
        assert_eq!(spec.root.node_count(), 2);
        assert_eq!(spec.block_capacity, 1024);
    }

    #[test]
    fn unknown_op_and_missing_field() {
        let sort = r#"{"tables":[],"root":{"op":"materialize","attrs":[],"input":{"op":"sort"}}}"#;
        assert!(matches!(parse_plan(sort), Err(PosrecError::UnknownOp { op, path }) if op == "sort" && path == "root.input"));
        let missing = r#"{"tables":[],"root":{"op":"scan"}}"#;
        assert!(matches!(parse_plan(missing), Err(PosrecError::MissingField(_))));
        assert!(matches!(parse_plan("{"), Err(PosrecError::Json(_))));
        let extra = r#"{"tables":[],"root":{"op":"scan","table":"t","bogus":1}}"#;
        assert!(matches!(parse_plan(extra), Err(PosrecError::Json(_))));
    }
}
