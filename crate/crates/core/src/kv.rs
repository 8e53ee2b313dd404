//! `key = value` text files, one entry per line, sorted by key so equal maps
//! produce equal bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type KvMap = BTreeMap<String, String>;

pub fn render_kv(map: &KvMap) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn write_kv(path: &Path, map: &KvMap) -> Result<()> {
    fs::write(path, render_kv(map)).map_err(|e| Error::io(path, e))
}

pub fn parse_kv(text: &str, source: &str) -> Result<KvMap> {
    let mut map = KvMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(source, i + 1, "expected `key = value`"))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn read_kv(path: &Path) -> Result<KvMap> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kv(&text, &path.display().to_string())
}

pub fn require<'a>(map: &'a KvMap, key: &str, source: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::parse(source, 0, format!("missing key `{key}`")))
}
