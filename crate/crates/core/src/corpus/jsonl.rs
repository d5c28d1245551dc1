//! Line-delimited JSON corpus files: `{"id": .., "genre": .., "text": ..}`.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde_json::{Map, Value};

use super::{Corpus, Document, NormalizeOptions};
use crate::error::{Error, Result};
use crate::fsutil;

pub fn ingest(path: &Path) -> Result<Corpus> {
    ingest_with(path, NormalizeOptions::default())
}

pub fn ingest_with(path: &Path, opts: NormalizeOptions) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let docs = parse_lines(BufReader::new(file), path, opts)?;
    Corpus::new(docs)
}

/// Parse corpus records from a reader. Blank lines are skipped; `origin` is
/// only used in error messages.
pub fn parse_lines<R: BufRead>(reader: R, origin: &Path, opts: NormalizeOptions) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: lineno,
            message,
        };
        let mut record: Map<String, Value> = match serde_json::from_str(&line) {
            Ok(Value::Object(map)) => map,
            Ok(_) => return Err(parse_err("record is not a JSON object".into())),
            Err(e) => return Err(parse_err(e.to_string())),
        };
        let mut take = |field: &str| -> Result<String> {
            match record.shift_remove(field) {
                Some(Value::String(s)) if !s.is_empty() => Ok(s),
                Some(Value::String(_)) => Err(parse_err(format!("field {field:?} is empty"))),
                Some(_) => Err(parse_err(format!("field {field:?} is not a string"))),
                None => Err(parse_err(format!("missing field {field:?}"))),
            }
        };
        let id = take("id")?;
        let genre = take("genre")?;
        let text = take("text")?;
        let mut doc = Document::with_options(id, genre, text, opts);
        doc.extra = record;
        docs.push(doc);
    }
    Ok(docs)
}

/// Serialize documents in the corpus line format, extra fields after the
/// three required ones.
pub fn write_lines<'a, I>(docs: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut out = Vec::new();
    for doc in docs {
        let mut record = Map::new();
        record.insert("id".into(), Value::String(doc.id.clone()));
        record.insert("genre".into(), Value::String(doc.genre.clone()));
        record.insert("text".into(), Value::String(doc.raw_text.clone()));
        for (k, v) in &doc.extra {
            record.insert(k.clone(), v.clone());
        }
        serde_json::to_writer(&mut out, &record)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn emit<'a, I>(docs: I, path: &Path) -> Result<()>
where
    I: IntoIterator<Item = &'a Document>,
{
    fsutil::write_atomic(path, &write_lines(docs)?)
}
