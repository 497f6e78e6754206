use std::path::{Path, PathBuf};

use crate::args::Common;
use crate::CliError;

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config: cannot parse {key} = {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

/// Fills every option not given on the command line from a flat
/// `key = value` file. Keys are the long flag names; `#` starts a comment.
pub fn merge_file(common: &mut Common, path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("config {}: {e}", path.display())))?;
    let adaptive_given = !common.eta2.is_empty() || common.edge_budget.is_some();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config {}:{}: expected key = value",
                path.display(),
                lineno + 1
            )));
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "image" if common.image.is_empty() => common.image = parse_list(&key, value)?,
            "eta1" if common.eta1.is_empty() => common.eta1 = parse_list(&key, value)?,
            "eta2" if !adaptive_given => common.eta2 = parse_list(&key, value)?,
            "edge-budget" if !adaptive_given => common.edge_budget = Some(parse(&key, value)?),
            "strategy" if common.strategy.is_empty() => common.strategy = parse_list(&key, value)?,
            "morph" if common.morph.is_none() => common.morph = Some(value.to_string()),
            "factor" if common.factor.is_none() => common.factor = Some(parse(&key, value)?),
            "alpha" if common.alpha.is_none() => common.alpha = Some(parse(&key, value)?),
            "iters" if common.iters.is_none() => common.iters = Some(parse(&key, value)?),
            "seed" if common.seed.is_empty() => common.seed = parse_list(&key, value)?,
            "out" if common.out.is_none() => common.out = Some(PathBuf::from(value)),
            "format" if common.format.is_none() => common.format = Some(value.to_string()),
            "image" | "eta1" | "eta2" | "edge-budget" | "strategy" | "morph" | "factor" | "alpha" | "iters"
            | "seed" | "out" | "format" => {}
            other => {
                return Err(CliError::Usage(format!(
                    "config {}:{}: unknown key {other:?}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}
