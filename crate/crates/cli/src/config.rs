//! `key = value` config files, merged beneath command-line flags.

use std::fs;

/// Lines are `key = value`; blank lines and `#` comments are skipped.
/// `true` becomes a bare flag and `false` drops the key.
pub fn parse(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", no + 1))?;
        let key = k.trim().replace('_', "-");
        let value = v.trim();
        if key.is_empty() {
            return Err(format!("config line {}: empty key", no + 1));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out)
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Splices the config entries right after the subcommand so that later
/// flags on the command line override them.
pub fn merge(argv: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("config file '{path}': {e}"))?;
    let entries = parse(&text).map_err(|e| format!("config file '{path}': {e}"))?;
    let Some(pos) = argv.iter().skip(1).position(|a| subcommands.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let at = pos + 2;
    let mut merged = argv[..at].to_vec();
    merged.extend(entries);
    merged.extend_from_slice(&argv[at..]);
    Ok(merged)
}

/// Whether the user passed `flag` on the command line itself.
pub fn has_flag(argv: &[String], flag: &str) -> bool {
    argv.iter().any(|a| a == flag || a.starts_with(&format!("{flag}=")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_flags() {
        let p = parse("# grid\nn = 64\nweight_expr = 1 - y\nexact = true\nquiet = false\n").unwrap();
        assert_eq!(p, vec!["--n=64", "--weight-expr=1 - y", "--exact"]);
        assert!(parse("nonsense").is_err());
    }

    #[test]
    fn flags_after_config() {
        let dir = std::env::temp_dir().join(format!("ruelle-cfg-{}", std::process::id()));
        fs::write(&dir, "n = 64\n").unwrap();
        let argv: Vec<String> =
            ["bin", "--config", dir.to_str().unwrap(), "table1", "--n", "128"].iter().map(|s| s.to_string()).collect();
        let m = merge(argv, &["table1"]).unwrap();
        assert_eq!(&m[3..], &["table1", "--n=64", "--n", "128"]);
        fs::remove_file(dir).unwrap();
    }
}
