//! JSON and JSON-lines file helpers shared by every stage.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

pub fn write_json<T: Serialize + ?Sized>(stage: &'static str, path: &Path, value: &T) -> Result<()> {
    let werr = |source| Error::Write {
        stage,
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(werr)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| werr(e.into()))?;
    writeln!(w).map_err(werr)?;
    w.flush().map_err(werr)
}

pub fn read_json<T: DeserializeOwned>(stage: &'static str, path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|source| Error::Read {
        stage,
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
        stage,
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes one compact JSON document per line.
pub fn write_jsonl<'a, T, I>(stage: &'static str, path: &Path, items: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let werr = |source| Error::Write {
        stage,
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(werr)?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| werr(e.into()))?;
        w.write_all(b"\n").map_err(werr)?;
    }
    w.flush().map_err(werr)
}

pub fn read_jsonl<T: DeserializeOwned>(stage: &'static str, path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|source| Error::Read {
        stage,
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Read {
            stage,
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
            stage,
            path: path.to_path_buf(),
            message: format!("line {}: {e}", lineno + 1),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn create_dir(stage: &'static str, path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Write {
        stage,
        path: path.to_path_buf(),
        source,
    })
}
