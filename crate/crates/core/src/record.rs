//! Flat `key = value` text records with round-trip float formatting.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub fn write(pairs: &[(&str, f64)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v:.16e}\n")).collect()
}

pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: n + 1,
            msg: "expected `key = value`".into(),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn get(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    map.get(key)
        .ok_or_else(|| Error::input(format!("record is missing `{key}`")))?
        .parse()
        .map_err(|_| Error::input(format!("`{key}` is not a number")))
}
