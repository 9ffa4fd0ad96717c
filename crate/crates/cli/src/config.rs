//! Config-file overrides and resolved-config echo.
//!
//! A config file holds one `key = value` pair per line, where `key` is the
//! long name of a flag of the invoked subcommand (or a global flag) without
//! the leading dashes. Blank lines and lines starting with `#` are ignored.
//! Boolean flags take `true` or `false`. Flags given on the command line win
//! over the file.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

/// Turns a config file into command-line arguments.
pub fn file_args(path: &Path) -> Result<Vec<OsString>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("config {}: {e}", path.display()))
}

pub fn parse(text: &str) -> Result<Vec<OsString>, String> {
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", i + 1));
        };
        let key = key.trim().trim_start_matches('-');
        let value = value.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        if key == "config" {
            return Err(format!(
                "line {}: config files cannot include other config files",
                i + 1
            ));
        }
        match value {
            "true" => args.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                args.push(OsString::from(format!("--{key}")));
                args.push(OsString::from(value));
            }
        }
    }
    Ok(args)
}

/// Finds `--config PATH` or `--config=PATH` in raw arguments.
pub fn find_config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(OsString::from(rest));
        }
    }
    None
}

/// Inserts `extra` right after the subcommand name so that later, explicit
/// flags override it.
pub fn splice(args: Vec<OsString>, subcommands: &[&str], extra: Vec<OsString>) -> Vec<OsString> {
    let Some(pos) = args
        .iter()
        .skip(1)
        .position(|a| subcommands.iter().any(|s| a == s))
        .map(|p| p + 1)
    else {
        return args;
    };
    let mut out = args[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos + 1..]);
    out
}

/// Renders a serialized argument struct as config-file lines.
pub fn render(value: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = value {
        for (k, v) in map {
            let v = match v {
                Value::Null => continue,
                Value::String(s) => s.clone(),
                Value::Array(a) => a
                    .iter()
                    .map(|x| x.as_str().map_or_else(|| x.to_string(), str::to_string))
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            out.push_str(&format!("{k} = {v}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_flags() {
        let args = parse("# comment\n\neta = 1.5\n--seed=3\nquiet = false\nverbose = true\n").unwrap();
        let args: Vec<String> = args.into_iter().map(|a| a.into_string().unwrap()).collect();
        assert_eq!(args, ["--eta", "1.5", "--seed", "3", "--verbose"]);
        assert!(parse("eta 1").is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let os = |v: &[&str]| v.iter().map(OsString::from).collect::<Vec<_>>();
        let out = splice(
            os(&["harvest", "--jobs", "2", "simulate", "--eta", "2"]),
            &["simulate"],
            os(&["--eta", "1"]),
        );
        assert_eq!(
            out,
            os(&["harvest", "--jobs", "2", "simulate", "--eta", "1", "--eta", "2"])
        );
    }
}
