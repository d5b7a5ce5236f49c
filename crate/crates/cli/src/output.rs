//! Ordered output sinks with a config header line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// `# qrelscore <command> <effective config as JSON>`
pub fn header<C: Serialize>(command: &str, config: &C) -> Result<String> {
    Ok(format!("# qrelscore {command} {}\n", serde_json::to_string(config)?))
}

pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            ))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes the header and one JSON object per row.
pub fn write_jsonl<T: Serialize>(path: Option<&Path>, head: &str, rows: &[T]) -> Result<()> {
    let mut w = open(path)?;
    w.write_all(head.as_bytes())?;
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the header and the rows as CSV.
pub fn write_csv<T: Serialize>(path: Option<&Path>, head: &str, rows: &[T]) -> Result<()> {
    let mut w = open(path)?;
    w.write_all(head.as_bytes())?;
    qrelscore::analysis::write_csv(rows, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn is_csv(path: Option<&Path>) -> bool {
    path.and_then(|p| p.extension())
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
