use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};

use super::{AdRecord, CategoryTriple};
use crate::{Error, Result};

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct RecordRow {
    #[serde(deserialize_with = "string_or_number")]
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    desc: String,
    cat1: String,
    cat2: String,
    cat3: String,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(serde::de::Error::custom(format!("id must be a string or number, got {other}"))),
    }
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<AdRecord>> {
    let rows: Vec<RecordRow> = read_jsonl(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            let cat = CategoryTriple::new(row.cat1, row.cat2, row.cat3).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            Ok(AdRecord {
                id: row.id,
                title: row.title,
                desc: row.desc,
                cat,
                extra: row.extra,
            })
        })
        .collect()
}

pub fn write_records(path: impl AsRef<Path>, records: &[AdRecord]) -> Result<()> {
    let rows: Vec<RecordRow> = records
        .iter()
        .map(|r| RecordRow {
            id: r.id.clone(),
            title: r.title.clone(),
            desc: r.desc.clone(),
            cat1: r.cat.cat1.clone(),
            cat2: r.cat.cat2.clone(),
            cat3: r.cat.cat3.clone(),
            extra: r.extra.clone(),
        })
        .collect();
    write_jsonl(path, &rows)
}
