//! Tab-separated reports with a commented prelude, and plain numeric plot tables.
//!
//! Report layout:
//!
//! ```text
//! # heis <version>
//! # command<TAB><name>
//! # config-begin
//! # <resolved config, one TOML line per comment line>
//! # config-end
//! # <key><TAB><value>           (zero or more notes)
//! <column><TAB><column>...      (header row)
//! <value><TAB><value>...        (records)
//! # verdict<TAB>pass|fail
//! ```

use crate::config::RunConfig;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

pub fn version_tag() -> String {
    format!("heis {} (core {})", env!("CARGO_PKG_VERSION"), heis_core::VERSION)
}

/// Shortest round-trip representation, so reports are exact and stable.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub struct Report {
    pub command: &'static str,
    pub notes: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub verdict: bool,
}

impl Report {
    pub fn new(command: &'static str, columns: &[&'static str]) -> Report {
        Report { command, notes: Vec::new(), columns: columns.to_vec(), rows: Vec::new(), verdict: true }
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.notes.push((key.to_string(), value.into()));
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn render(&self, cfg: &RunConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", version_tag());
        let _ = writeln!(s, "# command\t{}", self.command);
        s.push_str("# config-begin\n");
        for line in cfg.to_toml().lines() {
            let _ = writeln!(s, "# {line}");
        }
        s.push_str("# config-end\n");
        for (k, v) in &self.notes {
            let _ = writeln!(s, "# {k}\t{v}");
        }
        let _ = writeln!(s, "{}", self.columns.join("\t"));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join("\t"));
        }
        let _ = writeln!(s, "# verdict\t{}", if self.verdict { "pass" } else { "fail" });
        s
    }

    pub fn write(&self, cfg: &RunConfig, out: &Path) -> io::Result<PathBuf> {
        std::fs::create_dir_all(out)?;
        let path = out.join(format!("{}_{}.tsv", cfg.run.name, self.command));
        std::fs::write(&path, self.render(cfg))?;
        Ok(path)
    }
}

/// Whitespace-separated numeric columns under a single `#` header line.
pub fn write_plot(out: &Path, file: &str, header: &[&str], rows: &[Vec<f64>]) -> io::Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let mut s = format!("# {}\n", header.join(" "));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| num(*v)).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    let path = out.join(file);
    std::fs::write(&path, s)?;
    Ok(path)
}
