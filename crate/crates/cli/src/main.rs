//! `trigroots`: sample, count, sweep and summarize random trigonometric
//! polynomials.
//!
//! Exit codes: 0 success, 1 usage or parameter error (or a failed `verify`),
//! 2 I/O error.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};

use config::Settings;
use trigroots::Error;

/// Keys accepted by each subcommand.
const SUBCOMMANDS: &[(&str, &str, &[&str])] = &[
    ("sample", "draw polynomials and print their coefficients", &["n", "ensemble", "seed", "trial", "count", "format"]),
    ("count", "count the roots of one polynomial", &["n", "ensemble", "seed", "trial", "domain", "path", "certified", "grid", "budget", "input"]),
    ("sweep", "Monte Carlo sweep of root counts, one JSON record per trial", &["n", "ensemble", "seed", "trials", "domain", "path", "certified", "grid", "audit_every", "threads", "output", "resume", "timings"]),
    ("tails", "deviation probabilities of normalized counts", &["input", "eps"]),
    ("repulsion", "small-ball frequency of (P(t), P'(t)/n)", &["n", "ensemble", "seed", "trials", "t", "alpha", "beta", "threads"]),
    ("geometry", "stable/unstable window classification", &["n", "ensemble", "seed", "trial", "trials", "eps", "c0", "r", "window_fraction", "verdicts", "threads"]),
    ("verify", "randomized checks of the deterministic inequalities", &["suite", "trials", "seed"]),
    ("report", "summary statistics of sweep outputs", &["input", "eps", "plot_data", "bootstrap"]),
];

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn cli() -> Command {
    let mut cmd = Command::new("trigroots")
        .version(trigroots::VERSION)
        .about("Monte Carlo laboratory for the real roots of random trigonometric polynomials")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("config file: key = value lines, a JSON object, or a previous output"),
        );
    for (name, about, keys) in SUBCOMMANDS {
        let mut sub = Command::new(*name).about(*about);
        for k in keys.iter() {
            let key = config::key(k).expect("registered key");
            let mut arg = Arg::new(key.name).long(flag_name(key.name)).help(key.help);
            arg = if key.switch {
                arg.action(ArgAction::SetTrue)
            } else {
                arg.value_name(key.name.to_ascii_uppercase()).allow_hyphen_values(true)
            };
            sub = sub.arg(arg);
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn flags(m: &ArgMatches, keys: &[&str]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for &k in keys {
        if m.value_source(k) != Some(ValueSource::CommandLine) {
            continue;
        }
        let switch = config::key(k).is_some_and(|key| key.switch);
        let v = if switch {
            m.get_flag(k).to_string()
        } else {
            match m.get_one::<String>(k) {
                Some(v) => v.clone(),
                None => continue,
            }
        };
        out.insert(k.to_string(), v);
    }
    out
}

fn settings(m: &ArgMatches, sub: &ArgMatches, keys: &[&str]) -> trigroots::Result<Settings> {
    let file = match m.get_one::<String>("config").or_else(|| sub.get_one::<String>("config")) {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            config::parse_config(&text, path)?
        }
        None => BTreeMap::new(),
    };
    let env = config::from_env(std::env::vars())?;
    Ok(Settings::resolve(keys, &file, &env, &flags(sub, keys)))
}

fn report(e: &Error) -> ExitCode {
    eprintln!("trigroots: {e}");
    if e.is_io() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let m = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (name, sub) = m.subcommand().expect("subcommand required");
    let keys = SUBCOMMANDS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, _, k)| *k)
        .expect("known subcommand");
    let s = match settings(&m, sub, keys) {
        Ok(s) => s,
        Err(e) => {
            let code = report(&e);
            if !e.is_io() {
                eprintln!("see `trigroots {name} --help`");
            }
            return code;
        }
    };
    match commands::run(name, &s) {
        Ok(code) => ExitCode::from(code),
        Err(e) => report(&e),
    }
}
