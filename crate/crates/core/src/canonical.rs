// SPDX-License-Identifier: Apache-2.0

//! Canonical JSON: sorted object keys, two-space indent, `\n` line endings
//! and a trailing newline. Golden files in the test corpus are compared
//! byte for byte against this output.

use serde::Serialize;

/// Serializes `value` canonically.
///
/// Key order comes from round-tripping through [`serde_json::Value`], whose
/// object map is ordered by key.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}

/// Hex SHA-256 of the canonical serialization.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    use sha2::{Digest, Sha256};
    let text = to_string(value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_recursively() {
        let v = json!({"b": 1, "a": {"z": true, "m": [1, 2]}});
        assert_eq!(
            to_string(&v).unwrap(),
            "{\n  \"a\": {\n    \"m\": [\n      1,\n      2\n    ],\n    \"z\": true\n  },\n  \"b\": 1\n}\n"
        );
    }

    #[test]
    fn digest_is_stable() {
        let a = json!({"x": 1, "y": 2});
        let b = json!({"y": 2, "x": 1});
        assert_eq!(digest(&a).unwrap(), digest(&b).unwrap());
        assert_eq!(digest(&a).unwrap().len(), 64);
    }
}
