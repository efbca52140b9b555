use std::fs;
use std::path::{Path, PathBuf};

use ruelle_lab::Check;
use serde_json::{json, Value};

use crate::Failure;

/// Files and checks produced by one command, flushed with a manifest.
pub struct Run {
    dir: PathBuf,
    command: String,
    config: Value,
    outputs: Vec<PathBuf>,
    checks: Vec<Check>,
}

impl Run {
    pub fn new(dir: &Path, command: &str, config: Value) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Usage(format!("output directory '{}' cannot be created: {e}", dir.display())))?;
        Ok(Run { dir: dir.to_path_buf(), command: command.into(), config, outputs: Vec::new(), checks: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::Usage(format!("cannot write '{}': {e}", path.display())))?;
        self.outputs.push(path);
        Ok(())
    }

    pub fn json(&mut self, name: &str, v: &Value) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(v).expect("serializable");
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn checks(&mut self, cs: impl IntoIterator<Item = Check>) {
        self.checks.extend(cs);
    }

    /// Writes `<command>.manifest.json`; a failed check is a contract failure.
    pub fn finish(self) -> Result<(), Failure> {
        let manifest = json!({
            "config": self.config,
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "checks": self.checks,
        });
        let path = self.dir.join(format!("{}.manifest.json", self.command));
        let mut s = serde_json::to_string_pretty(&manifest).expect("serializable");
        s.push('\n');
        fs::write(&path, s).map_err(|e| Failure::Usage(format!("cannot write '{}': {e}", path.display())))?;
        for c in &self.checks {
            println!("{} {} residual={:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.residual);
        }
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Contract(format!("failed checks: {}", failed.join(", "))))
        }
    }
}

/// `{:.16e}`: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with a header row.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}
