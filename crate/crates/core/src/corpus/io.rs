//! JSONL and TSV files. Everything is UTF-8 with LF line endings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::CorpusError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CorpusError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>, CorpusError> {
    let f = File::open(path).map_err(io_err(path))?;
    Ok(BufReader::new(f).lines().enumerate().map(|(i, l)| (i + 1, l)))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (line, text) in lines(path)? {
        let text = text.map_err(io_err(path))?;
        if text.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&text).map_err(|e| CorpusError::Format {
            path: path.display().to_string(),
            line,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// One row per item, fields joined by tabs. Fields must not contain tabs or newlines.
pub fn write_tsv<'a, I, R>(path: &Path, rows: I) -> Result<usize, CorpusError>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[&'a str]>,
{
    let mut w = create(path)?;
    let mut n = 0;
    for row in rows {
        let line = row.as_ref().join("\t");
        debug_assert!(!line.contains('\n'));
        w.write_all(line.as_bytes()).map_err(io_err(path))?;
        w.write_all(b"\n").map_err(io_err(path))?;
        n += 1;
    }
    w.flush().map_err(io_err(path))?;
    Ok(n)
}

/// Rows with exactly `width` tab-separated fields.
pub fn read_tsv(path: &Path, width: usize) -> Result<Vec<Vec<String>>, CorpusError> {
    let mut out = Vec::new();
    for (line, text) in lines(path)? {
        let text = text.map_err(io_err(path))?;
        if text.is_empty() {
            continue;
        }
        let fields: Vec<String> = text.split('\t').map(str::to_owned).collect();
        if fields.len() != width {
            return Err(CorpusError::Format {
                path: path.display().to_string(),
                line,
                msg: format!("expected {width} tab-separated fields, found {}", fields.len()),
            });
        }
        out.push(fields);
    }
    Ok(out)
}

pub fn write_pairs<'a>(path: &Path, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<usize, CorpusError> {
    write_tsv(path, pairs.into_iter().map(|(a, b)| [a, b]))
}

pub fn write_triplets<'a>(path: &Path, triplets: &[(&'a str, &'a str, &'a str)]) -> Result<usize, CorpusError> {
    write_tsv(path, triplets.iter().map(|&(a, p, n)| [a, p, n]))
}
