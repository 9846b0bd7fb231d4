//! `fbsys`: solve, continue, analyze and verify the constrained Lane–Emden
//! system from a TOML run file.
//!
//! Exit status: 0 success, 1 verification failure, 2 invalid configuration,
//! 3 solver failure. Errors go to stderr as one JSON object.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, Command};
use serde_json::json;

#[derive(Debug)]
pub enum Failure {
    Config { constraint: &'static str, detail: String },
    Solver(String),
    Verification(Vec<String>),
}

impl Failure {
    /// Errors raised while validating the configuration or building the mesh.
    pub fn from_core(e: fbsys::Error) -> Failure {
        match e {
            fbsys::Error::InvalidParams { constraint, detail } => Failure::Config { constraint, detail },
            fbsys::Error::InvalidDomain(d) => Failure::Config { constraint: "domain", detail: d },
            fbsys::Error::ResolutionTooSmall { n, min } => {
                Failure::Config { constraint: "mesh_resolution", detail: format!("n = {n} < {min}") }
            }
            other => Failure::Solver(other.to_string()),
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Config { .. } => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn report(&self) -> serde_json::Value {
        match self {
            Failure::Config { constraint, detail } => {
                json!({ "status": "config_invalid", "constraint": constraint, "detail": detail })
            }
            Failure::Solver(d) => json!({ "status": "solver_failure", "detail": d }),
            Failure::Verification(failed) => json!({ "status": "verification_failed", "failed": failed }),
        }
    }
}

impl From<fbsys::Error> for Failure {
    fn from(e: fbsys::Error) -> Self {
        Failure::Solver(e.to_string())
    }
}

fn cli() -> Command {
    let mut cmd = Command::new("fbsys")
        .allow_negative_numbers(true)
        .about("Constrained Lane–Emden system: solve, branch, spectrum, verify, oracle")
        .after_help("Every config key is also a flag, e.g. --params.p1 2 --sweep.lambdas '[1, 2, 4]'.")
        .arg(Arg::new("config").short('c').long("config").value_name("FILE").value_parser(clap::value_parser!(PathBuf)).help("TOML run file"));
    for (key, help) in config::KEYS {
        cmd = cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").action(ArgAction::Set).help(*help));
    }
    cmd
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let f = Failure::Config { constraint: "command_line", detail: e.to_string().trim().to_string() };
            eprintln!("{}", f.report());
            return ExitCode::from(f.code());
        }
    };
    let overrides: Vec<(String, String)> = config::KEYS
        .iter()
        .filter_map(|(k, _)| matches.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect();
    let file = matches.get_one::<PathBuf>("config");
    let result = config::load(file.map(PathBuf::as_path), &overrides).and_then(|cfg| run::run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.report());
            ExitCode::from(f.code())
        }
    }
}
