//! Plain-text file formats.
//!
//! Result tables are comma-separated with a block of `# key: value` lines on
//! top. Spike trains and threshold samples are one number per line; `#`
//! lines are skipped on read. Numbers are written in Rust's shortest
//! round-trip form, so every file reads back to the exact values written.

use crate::circuit::PhaseState;
use crate::error::{Error, Result};
use crate::sim::{FhnSample, FullSample, ReducedSample, SpikeTrain};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// A delimited table with its metadata block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            meta: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parses column `name` as numbers; empty cells become `None`.
    pub fn numbers(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let j = self
            .column(name)
            .ok_or_else(|| Error::Config(format!("table has no column '{name}'")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = r[j].trim();
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse().map(Some).map_err(|_| Error::Parse {
                        path: String::new(),
                        line: i + 1,
                        message: format!("'{cell}' is not a number"),
                    })
                }
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.columns).expect("writing to memory");
        for r in &self.rows {
            w.write_record(r).expect("writing to memory");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 input"));
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Table> {
        let mut meta = Vec::new();
        let mut body_start = 0;
        for line in text.lines() {
            match line.strip_prefix('#') {
                Some(rest) => {
                    if let Some((k, v)) = rest.split_once(':') {
                        meta.push((k.trim().to_string(), v.trim().to_string()));
                    }
                    body_start += line.len() + 1;
                }
                None => break,
            }
        }
        let body = text.get(body_start..).unwrap_or("");
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let parse_err = |line: usize, e: csv::Error| Error::Parse {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        };
        let columns = reader
            .headers()
            .map_err(|e| parse_err(meta.len() + 1, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| parse_err(meta.len() + i + 2, e))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table { meta, columns, rows })
    }

    pub fn read(path: &Path) -> Result<Table> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Table::parse(&text, path)
    }

    /// Writes the table and returns the SHA-256 of the bytes written.
    pub fn write(&self, path: &Path) -> Result<String> {
        write_text(path, &self.to_text())
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Shortest round-trip text for a float, in exponent form outside
/// `[1e-4, 1e16)` where plain decimals get long.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Writes `text`, creating parent directories, and returns its SHA-256.
pub fn write_text(path: &Path, text: &str) -> Result<String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Reads one number per line, skipping blanks and `#` lines.
pub fn read_column(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_column(&text, path)
}

pub fn parse_column(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: format!("'{line}' is not a number"),
        })?);
    }
    Ok(out)
}

/// Threshold samples in volts, one per line.
pub fn read_threshold_samples(path: &Path) -> Result<Vec<f64>> {
    read_column(path)
}

pub fn spike_train_text(train: &SpikeTrain, meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}: {v}");
    }
    let _ = writeln!(out, "# truncated_last: {}", train.truncated_last);
    for &t in &train.spike_times {
        let _ = writeln!(out, "{}", num(t));
    }
    out
}

pub fn write_spike_train(path: &Path, train: &SpikeTrain, meta: &[(String, String)]) -> Result<String> {
    write_text(path, &spike_train_text(train, meta))
}

/// Reads a spike-time file back into a train.
pub fn read_spike_train(path: &Path) -> Result<SpikeTrain> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let truncated = text
        .lines()
        .find_map(|l| l.strip_prefix("# truncated_last:"))
        .is_some_and(|v| v.trim() == "true");
    let times = parse_column(&text, path)?;
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: "spike times are not strictly increasing".into(),
        });
    }
    Ok(SpikeTrain::from_times(times, truncated))
}

pub fn full_trace_table(trace: &[FullSample]) -> Table {
    let mut t = Table::new(["t", "i_i", "v_o", "s"]);
    for r in trace {
        t.push(vec![num(r.t), num(r.i_i), num(r.v_o), r.s.code().to_string()]);
    }
    t
}

pub fn reduced_trace_table(trace: &[ReducedSample]) -> Table {
    let mut t = Table::new(["t", "v_i"]);
    for r in trace {
        t.push(vec![num(r.t), num(r.v_i)]);
    }
    t
}

pub fn fhn_trace_table(trace: &[FhnSample]) -> Table {
    let mut t = Table::new(["t", "u", "w"]);
    for r in trace {
        t.push(vec![num(r.t), num(r.u), num(r.w)]);
    }
    t
}

/// Reads a full-model trace written by [`full_trace_table`].
pub fn read_full_trace(path: &Path) -> Result<Vec<FullSample>> {
    let table = Table::read(path)?;
    let cols: Vec<Vec<Option<f64>>> = ["t", "i_i", "v_o", "s"]
        .iter()
        .map(|c| table.numbers(c))
        .collect::<Result<_>>()?;
    let missing = || Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: "empty cell in trace".into(),
    };
    (0..table.rows.len())
        .map(|i| {
            let get = |j: usize| cols[j][i].ok_or_else(missing);
            Ok(FullSample {
                t: get(0)?,
                i_i: get(1)?,
                v_o: get(2)?,
                s: if get(3)? == 0.0 { PhaseState::Insulating } else { PhaseState::Metallic },
            })
        })
        .collect()
}

/// Reads a reduced-model trace written by [`reduced_trace_table`].
pub fn read_reduced_trace(path: &Path) -> Result<Vec<ReducedSample>> {
    let table = Table::read(path)?;
    let t = table.numbers("t")?;
    let v = table.numbers("v_i")?;
    t.into_iter()
        .zip(v)
        .map(|pair| match pair {
            (Some(t), Some(v_i)) => Ok(ReducedSample { t, v_i }),
            _ => Err(Error::Parse {
                path: path.display().to_string(),
                line: 0,
                message: "empty cell in trace".into(),
            }),
        })
        .collect()
}

/// One emitted file, relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<OutputRecord>,
}

fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, config_text: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config_sha256: sha256_hex(config_text.as_bytes()),
            config: config_text.to_string(),
            started_unix: unix_now(),
            finished_unix: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path, sha256: String) {
        self.outputs.push(OutputRecord {
            path: path.to_path_buf(),
            sha256,
        });
    }

    /// Stamps the finish time and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = unix_now();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self).map_err(|e| Error::Config(e.to_string()))?;
        write_text(&path, &text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Recomputes every output checksum and lists the files that changed.
    pub fn verify(&self) -> Result<Vec<PathBuf>> {
        let mut changed = Vec::new();
        for o in &self.outputs {
            let bytes = fs::read(&o.path).map_err(|e| Error::io(&o.path, e))?;
            if sha256_hex(&bytes) != o.sha256 {
                changed.push(o.path.clone());
            }
        }
        Ok(changed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(["a", "b"]).with_meta("config_sha256", "abc");
        t.push(vec!["0.1".into(), "x, y".into()]);
        t.push(vec![(1.0f64 / 3.0).to_string(), String::new()]);
        let back = Table::parse(&t.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.numbers("a").unwrap()[1], Some(1.0 / 3.0));
        assert_eq!(back.meta_value("config_sha256"), Some("abc"));
    }

    #[test]
    fn column_parser_reports_line() {
        let err = parse_column("1.0\n# note\nabc\n", Path::new("f")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
