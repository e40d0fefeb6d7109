use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{check_rating, pad_history, InteractionRecord, ItemProfile, SENTINEL_ITEM};
use crate::error::{Error, Result};

/// Source field names for each record attribute. The defaults are the
/// on-disk contract (`user_id`, `item_id`, `rating`, `ts`, `history` and
/// `item_id`, `name`, `profile` for the profile file).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMapping {
    pub user_id: String,
    pub item_id: String,
    pub rating: String,
    pub ts: String,
    pub history: String,
    pub name: String,
    pub profile: String,
}

impl Default for FieldMapping {
    fn default() -> Self {
        FieldMapping {
            user_id: "user_id".into(),
            item_id: "item_id".into(),
            rating: "rating".into(),
            ts: "ts".into(),
            history: "history".into(),
            name: "name".into(),
            profile: "profile".into(),
        }
    }
}

fn id_field(obj: &Value, field: &str) -> std::result::Result<String, String> {
    match obj.get(field) {
        Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(_) => Err(format!("field `{field}` must be a non-empty string")),
        None => Err(format!("missing field `{field}`")),
    }
}

fn parse_record(
    obj: &Value,
    m: &FieldMapping,
    history_len: usize,
) -> std::result::Result<InteractionRecord, String> {
    let user_id = id_field(obj, &m.user_id)?;
    let item_id = id_field(obj, &m.item_id)?;
    if item_id == SENTINEL_ITEM {
        return Err(format!("item id `{SENTINEL_ITEM}` is reserved"));
    }
    let rating = obj
        .get(&m.rating)
        .and_then(Value::as_f64)
        .ok_or_else(|| format!("field `{}` must be a number", m.rating))?;
    let timestamp = obj
        .get(&m.ts)
        .and_then(Value::as_i64)
        .ok_or_else(|| format!("field `{}` must be an integer", m.ts))?;
    let history = match obj.get(&m.history) {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(format!("`{}` entries must be ids", m.history)),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?,
        None | Some(Value::Null) => Vec::new(),
        Some(_) => return Err(format!("field `{}` must be an array", m.history)),
    };
    Ok(InteractionRecord {
        user_id,
        item_id,
        rating,
        timestamp,
        history: pad_history(&history, history_len),
    })
}

/// Reads one JSON object per line. Blank lines are skipped; line numbers in
/// errors are 1-based.
fn read_lines(path: &Path) -> Result<Vec<(usize, Value)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

pub fn load_records(
    path: &Path,
    mapping: &FieldMapping,
    history_len: usize,
) -> Result<Vec<InteractionRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, value) in read_lines(path)? {
        let rec = parse_record(&value, mapping, history_len).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })?;
        check_rating(rec.rating).map_err(|_| {
            Error::validation(format!(
                "{}:{line}: rating {} outside [1, 5]",
                path.display(),
                rec.rating
            ))
        })?;
        if !seen.insert((rec.user_id.clone(), rec.item_id.clone(), rec.timestamp)) {
            return Err(Error::validation(format!(
                "{}:{line}: duplicate (user, item, ts) = ({}, {}, {})",
                path.display(),
                rec.user_id,
                rec.item_id,
                rec.timestamp
            )));
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn load_profiles(path: &Path, mapping: &FieldMapping) -> Result<Vec<ItemProfile>> {
    let mut profiles = Vec::new();
    for (line, value) in read_lines(path)? {
        let parsed = (|| {
            let item_id = id_field(&value, &mapping.item_id)?;
            let name = id_field(&value, &mapping.name)?;
            let augmented_profile = match value.get(&mapping.profile) {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) if !s.trim().is_empty() => Some(s.clone()),
                Some(Value::String(_)) => None,
                Some(_) => return Err(format!("field `{}` must be a string", mapping.profile)),
            };
            Ok(ItemProfile {
                item_id,
                name,
                augmented_profile,
            })
        })();
        profiles.push(parsed.map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })?);
    }
    Ok(profiles)
}

pub fn load_dataset(
    records_path: &Path,
    profiles_path: &Path,
    mapping: &FieldMapping,
    history_len: usize,
) -> Result<(Vec<InteractionRecord>, Vec<ItemProfile>)> {
    Ok((
        load_records(records_path, mapping, history_len)?,
        load_profiles(profiles_path, mapping)?,
    ))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
