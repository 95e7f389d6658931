//! Result files. Every file starts with a header naming the tool version and
//! the SHA-256 of the effective configuration; floats are written with 17
//! significant digits so tables round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bgk_ness::config::{OutputSettings, RunConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL: &str = "bgk-ness";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything that can change a result, as TOML. The output directory and
/// worker count are reset: results do not depend on either.
pub fn canonical_config(config: &RunConfig) -> String {
    let mut canonical = config.clone();
    canonical.output = OutputSettings::default();
    canonical.to_toml_string()
}

pub fn config_hash(config: &RunConfig) -> String {
    hex::encode(Sha256::digest(canonical_config(config).as_bytes()))
}

pub fn header_line(hash: &str) -> String {
    format!("# {TOOL} {VERSION} config-sha256={hash}")
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Tab-separated table with the header line and a column-name line.
pub struct Table {
    text: String,
    columns: usize,
}

impl Table {
    pub fn new(hash: &str, columns: &[&str]) -> Self {
        let mut text = header_line(hash);
        text.push('\n');
        text.push_str(&columns.join("\t"));
        text.push('\n');
        Table { text, columns: columns.len() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.columns, "row width does not match the header");
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                self.text.push('\t');
            }
            match c {
                Cell::F(v) => self.text.push_str(&float(*v)),
                Cell::I(v) => write!(self.text, "{v}").unwrap(),
                // tabs and newlines would break the layout
                Cell::S(s) => self.text.push_str(&s.replace(['\t', '\n'], " ")),
            }
        }
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.text)
    }
}

pub enum Cell {
    F(f64),
    I(u64),
    S(String),
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    report: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, hash: &str, report: &T) -> Result<(), CliError> {
    let env = Envelope { tool: TOOL, version: VERSION, config_sha256: hash, report };
    let mut text = serde_json::to_string_pretty(&env).expect("reports always serialize");
    text.push('\n');
    write_file(path, &text)
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

pub fn prepare_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_owned(), source })?;
    Ok(dir.to_owned())
}

/// Reads the `x` and `tau` columns of a profile table written by `solve`,
/// plus the SHA-256 of the file, which identifies it independently of where
/// it lives.
pub fn read_profile_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>, String), CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let names: Vec<&str> = lines.next().ok_or_else(|| bad("empty profile table".into()))?.split('\t').collect();
    let col = |name: &str| names.iter().position(|n| *n == name).ok_or_else(|| bad(format!("missing column `{name}`")));
    let (ix, it) = (col("x")?, col("tau")?);
    let (mut xs, mut ts) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split('\t').collect();
        let get = |i: usize| -> Result<f64, CliError> {
            cells
                .get(i)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| bad(format!("row {}: unreadable cell in column {i}", k + 1)))
        };
        xs.push(get(ix)?);
        ts.push(get(it)?);
    }
    Ok((xs, ts, digest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300, -123456.789e10, 0.0] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn hash_ignores_output_settings() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.dir = "elsewhere".into();
        b.output.workers = 7;
        assert_eq!(config_hash(&a), config_hash(&b));
        b.monte_carlo.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn table_cells_are_sanitised() {
        let mut t = Table::new("abc", &["a", "b"]);
        t.row(&[Cell::S("x\ty".into()), Cell::I(3)]);
        assert!(t.text.ends_with("x y\t3\n"));
        assert!(t.text.starts_with("# bgk-ness "));
    }
}
