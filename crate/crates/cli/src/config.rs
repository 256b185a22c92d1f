//! Config files: a TOML table per subcommand whose keys are flag names.
//!
//! ```toml
//! [tour]
//! sigma = 0.5
//! distance = "maxnorm"
//! model = ["linear", "knn:7"]
//! ```
//!
//! Values are spliced into the argument list as if typed, but only for flags
//! the command line left unset, so flags always win over the file.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgMatches, Command};

use crate::CliError;

pub fn load(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.parse::<toml::Table>().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Extra arguments for subcommand `name` drawn from `config`.
pub fn overrides(config: &toml::Table, cmd: &Command, sub: &ArgMatches) -> Result<Vec<OsString>, CliError> {
    let name = cmd.get_name();
    let Some(section) = config.get(name) else {
        return Ok(Vec::new());
    };
    let table = section
        .as_table()
        .ok_or_else(|| CliError::Usage(format!("config entry `{name}` must be a table")))?;
    let mut out = Vec::new();
    for (key, value) in table {
        let id = key.replace('-', "_");
        let flag = format!("--{}", key.replace('_', "-"));
        if !cmd.get_arguments().any(|a| a.get_id() == id.as_str() && a.get_long().is_some()) {
            return Err(CliError::Usage(format!("config key `{name}.{key}` is not a flag of `{name}`")));
        }
        if sub.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for item in items {
                    out.push(flag.clone().into());
                    out.push(scalar(name, key, item)?.into());
                }
            }
            other => {
                out.push(flag.into());
                out.push(scalar(name, key, other)?.into());
            }
        }
    }
    Ok(out)
}

fn scalar(name: &str, key: &str, v: &toml::Value) -> Result<String, CliError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        _ => Err(CliError::Usage(format!("config key `{name}.{key}` must be a string, number or list of them"))),
    }
}
