use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::SpecError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Recorded at the top of every output file.
pub struct Provenance {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            seed: cfg.seed(),
            config_hash: cfg.hash(),
        }
    }

    fn header(&self) -> String {
        format!(
            "# possim {VERSION}\n# command: {}\n# seed: {}\n# config-sha256: {}\n",
            self.command, self.seed, self.config_hash
        )
    }
}

/// Comma-separated table with provenance comments and optional extra comment lines.
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            comments: Vec::new(),
            columns,
            rows: Vec::new(),
        }
    }

    fn body(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            let _ = writeln!(s, "# {c}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| quote(c)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

pub fn csv_document(prov: &Provenance, tables: &[Table]) -> String {
    let mut s = prov.header();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        s.push_str(&t.body());
    }
    s
}

pub fn json_document(prov: &Provenance, cfg: &RunConfig, result: impl Serialize) -> Result<String> {
    let doc = json!({
        "version": VERSION,
        "command": prov.command,
        "seed": prov.seed,
        "config_sha256": prov.config_hash,
        "config": cfg,
        "result": result,
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Write to `out`, or stdout when `None`.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| SpecError(format!("--out: cannot write {}: {e}", p.display())).into()),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

/// Shortest round-trip form, in exponent notation outside `[1e-5, 1e16)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.0, 5.0, 0.5787037037037038, 6.125827399780673e-39, 2e20, -3e-7] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(5.0), "5");
        assert_eq!(num(6.125827399780673e-39), "6.125827399780673e-39");
    }

    #[test]
    fn cells_with_commas_are_quoted() {
        assert_eq!(quote("[5,19]"), "\"[5,19]\"");
        assert_eq!(quote("a\"b,"), "\"a\"\"b,\"");
        assert_eq!(quote("0.5"), "0.5");
    }
}
