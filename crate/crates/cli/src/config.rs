//! `key = value` config files merged under the command-line flags.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory};

use crate::args::Cli;
use crate::error::CliError;

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// keys may use `_` or `-`, values may be quoted.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = k.trim().replace('_', "-");
        let value = v.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", n + 1)));
        }
        out.push((key, value));
    }
    Ok(out)
}

fn from_cli(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Appends config values for every flag not given on the command line.
pub fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let cmd = Cli::command();
    let matches = cmd.clone().try_get_matches_from(&argv)?;
    let Some(path) = matches.get_one::<PathBuf>("config").cloned() else {
        return Ok(argv);
    };
    let Some((sub_name, sub)) = matches.subcommand() else {
        return Ok(argv);
    };
    let sub_cmd = cmd.find_subcommand(sub_name).expect("parsed subcommand exists");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;

    let mut out = argv;
    for (key, value) in parse_config(&text)? {
        if key == "config" {
            return Err(CliError::Usage("config files cannot nest".into()));
        }
        let global = cmd.get_arguments().find(|a| a.get_long() == Some(key.as_str()));
        let arg = global
            .or_else(|| sub_cmd.get_arguments().find(|a| a.get_long() == Some(key.as_str())))
            .ok_or_else(|| CliError::Usage(format!("unknown config key `{key}` for {sub_name}")))?;
        let id = arg.get_id().as_str();
        let given = from_cli(sub, id) || (global.is_some() && from_cli(&matches, id));
        if given {
            continue;
        }
        if arg.get_action().takes_values() {
            out.push(format!("--{key}").into());
            out.push(value.into());
        } else {
            match value.as_str() {
                "true" => out.push(format!("--{key}").into()),
                "false" => {}
                other => return Err(CliError::Usage(format!("config key `{key}` expects true or false, got `{other}`"))),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[test]
    fn parses_lines() {
        let kv = parse_config("# c\nalpha0 = 0.1\n\nrho_grid=\"0:1:0.5\"\n").unwrap();
        assert_eq!(kv, vec![("alpha0".into(), "0.1".into()), ("rho-grid".into(), "0:1:0.5".into())]);
        assert!(parse_config("novalue").is_err());
    }

    #[test]
    fn flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "lambda = 0.4\nconfidence = 0.9\nquiet = true\nseed = 9\n").unwrap();
        let argv: Vec<OsString> = ["replicate", "fdp", "--lambda", "0.6", "--config"]
            .iter()
            .map(OsString::from)
            .chain([cfg.clone().into_os_string()])
            .collect();
        let cli = Cli::try_parse_from(merge_config(argv).unwrap()).unwrap();
        assert!(cli.quiet);
        assert_eq!(cli.seed, 9);
        match cli.command {
            crate::args::Command::Fdp(a) => {
                assert_eq!(a.lambda, 0.6);
                assert_eq!(a.confidence, 0.9);
            }
            _ => panic!("wrong subcommand"),
        }
    }

    #[test]
    fn unknown_key_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.cfg");
        std::fs::write(&cfg, "rho-grid = 0:1:0.1\n").unwrap();
        let argv: Vec<OsString> = vec!["replicate".into(), "fdp".into(), "--config".into(), cfg.into_os_string()];
        assert_eq!(merge_config(argv).unwrap_err().exit_code(), 2);
    }
}
