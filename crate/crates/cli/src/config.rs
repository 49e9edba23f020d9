//! TOML config files, merged under the command line.
//!
//! Top-level keys apply to every subcommand that has a flag of that name;
//! keys in a `[subcommand]` table apply to that subcommand only and must
//! exist there. Values become `--key=value` arguments; a key the user also
//! gave on the command line is skipped, so flags win.

use std::path::Path;

use clap::Command;
use nonconv_core::Error;
use toml::{Table, Value};

/// Rewrite `args` (without the program name) to include config-file values.
pub fn merge(cmd: &Command, args: Vec<String>, path: &Path) -> Result<Vec<String>, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
    let table: Table = text
        .parse()
        .map_err(|e| Error::Input(format!("config {}: {e}", path.display())))?;

    let Some(pos) = args.iter().position(|a| cmd.find_subcommand(a).is_some()) else {
        return Ok(args);
    };
    let sub_name = args[pos].clone();
    let sub = cmd.find_subcommand(&sub_name).expect("found above");
    let known = |key: &str| {
        sub.get_arguments()
            .chain(cmd.get_arguments())
            .any(|a| a.get_long() == Some(key))
    };

    let given = |key: &str| {
        let flag = format!("--{key}");
        args.iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };

    let mut injected = Vec::new();
    for (key, value) in &table {
        match value {
            Value::Table(_) => continue,
            _ if key == "config" || given(key) => continue,
            _ if known(key) => push_flag(&mut injected, key, value)?,
            _ => {}
        }
    }
    if let Some(section) = table.get(&sub_name) {
        let Value::Table(section) = section else {
            return Err(Error::Input(format!(
                "config key `{sub_name}` must be a table"
            )));
        };
        for (key, value) in section {
            if !known(key) {
                return Err(Error::Input(format!(
                    "config [{sub_name}]: unknown option `{key}`"
                )));
            }
            if given(key) {
                continue;
            }
            push_flag(&mut injected, key, value)?;
        }
    }

    let mut out = vec![sub_name];
    out.extend(injected);
    out.extend(args[..pos].iter().cloned());
    out.extend(args[pos + 1..].iter().cloned());
    Ok(out)
}

fn scalar(key: &str, value: &Value) -> Result<String, Error> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        _ => Err(Error::Input(format!(
            "config `{key}`: unsupported value {value}"
        ))),
    }
}

fn push_flag(out: &mut Vec<String>, key: &str, value: &Value) -> Result<(), Error> {
    match value {
        Value::Boolean(true) => out.push(format!("--{key}")),
        Value::Boolean(false) => {}
        Value::Array(items) => {
            let parts = items
                .iter()
                .map(|v| scalar(key, v))
                .collect::<Result<Vec<_>, _>>()?;
            out.push(format!("--{key}={}", parts.join(",")));
        }
        v => out.push(format!("--{key}={}", scalar(key, v)?)),
    }
    Ok(())
}
