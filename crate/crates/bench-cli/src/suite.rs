//! Sequential experiment runner.
//!
//! A config lists named experiments, each given as the argument vector of
//! one `sg-bench` command:
//!
//! ```json
//! { "experiments": [
//!     { "name": "fixture", "args": ["generate", "--states", "3", "--rows", "2",
//!                                   "--cols", "2", "--branching", "2", "--out", "g.json"] },
//!     { "name": "gaps", "args": ["gap-experiment", "--game", "g.json", "--horizon", "3",
//!                                "--out", "gaps.csv"] }
//! ] }
//! ```
//!
//! Relative paths resolve against the working directory. The first failing
//! experiment stops the run.

use std::io::Write;
use std::path::Path;

use clap::Parser;
use serde::Deserialize;

use crate::cli::{execute, Cli};
use crate::{CliError, EXIT_OK};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub args: Vec<String>,
}

pub fn load_config(path: &Path) -> Result<SuiteConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn run_suite(config: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    let suite = load_config(config)?;
    for experiment in suite.experiments {
        let failed = |code: i32, message: String| CliError::Experiment {
            name: experiment.name.clone(),
            code,
            message,
        };
        let argv = std::iter::once("sg-bench".to_string()).chain(experiment.args.iter().cloned());
        let cli = Cli::try_parse_from(argv).map_err(|e| failed(crate::EXIT_INPUT, e.kind().to_string()))?;
        match execute(cli.command, out) {
            Ok(EXIT_OK) => {}
            Ok(code) => return Err(failed(code, "command reported failure".into())),
            Err(e) => return Err(failed(e.exit_code(), e.to_string())),
        }
    }
    Ok(EXIT_OK)
}
