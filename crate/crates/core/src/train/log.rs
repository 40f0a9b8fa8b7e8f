use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const LOG_HEADER: &str = "iter,stage,loss_color,loss_normal,loss_eikonal,total,r,l_i,lr";

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iter: u64,
    pub stage: u8,
    pub color: f64,
    pub normal: f64,
    pub eikonal: f64,
    pub total: f64,
    pub r: f64,
    /// Mean per-view intensity threshold of the active level.
    pub l_i: f64,
    pub lr: f64,
}

impl LogRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.6},{:.6e},{:.6e}",
            self.iter, self.stage, self.color, self.normal, self.eikonal, self.total, self.r, self.l_i, self.lr
        )
    }
}

/// Append-only CSV metrics log.
pub struct MetricsLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsLog {
    /// Opens `path` for appending, writing the header if the file is new.
    pub fn open(path: &Path) -> Result<Self> {
        let fresh = !path.exists() || std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut log = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(f),
        };
        if fresh {
            log.line(LOG_HEADER)?;
        }
        Ok(log)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn append(&mut self, row: &LogRow) -> Result<()> {
        self.line(&row.to_csv())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

impl Drop for MetricsLog {
    fn drop(&mut self) {
        let _ = self.out.flush();
    }
}

/// Parses a log written by [`MetricsLog`].
pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::malformed(path, format!("line {}: {line:?}", n + 1));
        if f.len() != 9 {
            return Err(bad());
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
        rows.push(LogRow {
            iter: f[0].parse().map_err(|_| bad())?,
            stage: f[1].parse().map_err(|_| bad())?,
            color: num(2)?,
            normal: num(3)?,
            eikonal: num(4)?,
            total: num(5)?,
            r: num(6)?,
            l_i: num(7)?,
            lr: num(8)?,
        });
    }
    Ok(rows)
}
