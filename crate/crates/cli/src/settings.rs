use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use crate::UsageError;

const COMMANDS: [&str; 7] = ["generate", "preprocess", "eda", "train", "evaluate", "aggregate", "serve"];

/// Settings for `command`, from the config file then `--set` flags, in
/// order. Keys scoped to another command are skipped.
pub fn collect(config: Option<&Path>, command: &str, sets: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    if let Some(path) = config {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                UsageError(format!("{}:{}: expected `key = value`", path.display(), i + 1))
            })?;
            let k = k.trim();
            match k.split_once('.') {
                Some((scope, key)) if COMMANDS.contains(&scope) => {
                    if scope == command {
                        out.push((key.to_string(), v.trim().to_string()));
                    }
                }
                _ => out.push((k.to_string(), v.trim().to_string())),
            }
        }
    }
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got `{s}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scoping_and_override_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        fs::write(&p, "# c\nseed = 1\ntrain.trees_per_forest = 9\ngenerate.n_cases = 5\n").unwrap();
        let got = collect(Some(&p), "train", &["seed=2".into()]).unwrap();
        let want: Vec<(String, String)> = [("seed", "1"), ("trees_per_forest", "9"), ("seed", "2")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(got, want);
        assert!(collect(None, "train", &["oops".into()]).is_err());
    }
}
