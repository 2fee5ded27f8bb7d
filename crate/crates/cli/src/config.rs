//! Plain-text `key = value` configuration files.
//!
//! Keys are long flag names of the chosen subcommand (`j_max` and `j-max`
//! are the same key). Lines starting with `#` are comments. A value of
//! `true` turns a switch on, `false` leaves it off. File entries are placed
//! before the command-line flags, so flags win.

use std::fs;
use std::path::Path;

use crate::error::CliError;

pub const SUBCOMMANDS: [&str; 6] = ["spectrum", "resolvent", "simulate", "sweep", "presets", "check"];

pub fn parse_config(text: &str) -> Result<Vec<String>, CliError> {
    let mut args = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("config line {}: expected `key = value`", no + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() || key.starts_with('-') {
            return Err(CliError::Validation(format!("config line {}: invalid key `{key}`", no + 1)));
        }
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => {
                args.push(format!("--{key}"));
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

/// Removes `--config <path>` from `argv` and splices the file's flags in
/// right after the subcommand name.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut out = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| CliError::Validation("--config needs a path".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            out.push(a);
        }
    }
    let Some(path) = path else { return Ok(out) };
    let text = fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Validation(format!("cannot read config {path}: {e}")))?;
    let extra = parse_config(&text)?;
    let pos = out
        .iter()
        .skip(1)
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .ok_or_else(|| CliError::Validation("--config given without a subcommand".into()))?;
    let at = pos + 2;
    out.splice(at..at, extra);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn parses_pairs_and_switches() {
        let a = parse_config("# c\nj_max = 12\n\nprobe = true\nfull = false\nvariant = \"delay-heat\"\n").unwrap();
        assert_eq!(a, s(&["--j-max", "12", "--probe", "--variant", "delay-heat"]));
        assert!(parse_config("oops").is_err());
    }

    #[test]
    fn no_config_is_identity() {
        let argv = s(&["delaytherm", "presets"]);
        assert_eq!(expand_config(argv.clone()).unwrap(), argv);
    }
}
