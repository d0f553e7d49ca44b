//! Canonical text rendering for reports: key-sorted, pretty-printed JSON
//! with a trailing LF, so identical values always produce identical bytes.

use serde::Serialize;
use serde_json::Value;

/// Renders `value` with object keys in sorted order.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    // serde_json's default map is a BTreeMap, which sorts keys on the way in
    let tree: Value = serde_json::to_value(value).expect("report types serialize to JSON");
    let mut out = serde_json::to_string_pretty(&sort(tree)).expect("values serialize");
    out.push('\n');
    out
}

fn sort(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort).collect()),
        other => other,
    }
}

/// Stable 32-hex-character digest of any serializable configuration.
pub fn config_digest<T: Serialize + ?Sized>(value: &T) -> String {
    crate::preprocess::digest_hex(to_canonical_json(value).as_bytes())
}
