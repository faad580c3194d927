//! Report writers. Every file is produced in one deterministic pass.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use diffeq::fields::io::fmt_f64;
use diffeq::Error;
use serde::Serialize;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    /// Creates the directory (and parents) if missing.
    pub fn create(root: &Path) -> Result<Self, Error> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), Error> {
        fs::write(self.path(name), text)?;
        Ok(())
    }

    pub fn write_jsonl<S: Serialize>(&self, name: &str, rows: &[S]) -> Result<(), Error> {
        let mut buf = Vec::new();
        for r in rows {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        fs::write(self.path(name), buf)?;
        Ok(())
    }

    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> Result<(), Error> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        fs::write(self.path(name), buf)?;
        Ok(())
    }

    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), Error> {
        let mut w = csv::Writer::from_path(self.path(name)).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// CSV cell for a float; NaN becomes `nan`.
pub fn num(x: f64) -> String {
    fmt_f64(x)
}

pub fn grid_label(grid: &[usize]) -> String {
    grid.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
}

/// Left-aligned plain-text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = Vec::new();
    let line = |cells: Vec<&str>, out: &mut Vec<u8>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        writeln!(out, "{}", padded.join("  ").trim_end()).unwrap();
    };
    line(header.to_vec(), &mut out);
    line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect(), &mut out);
    for r in rows {
        line(r.iter().map(|s| s.as_str()).collect(), &mut out);
    }
    String::from_utf8(out).unwrap()
}
