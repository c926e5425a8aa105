//! `cqed`: runs one scenario and writes its data files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use cqed_core::experiments::config::KEYS;
use cqed_core::experiments::{
    run_cat_metrics, run_collapse_revival, run_echo, run_fig2, run_fig3, run_split, run_wigner,
    ExperimentConfig, ScenarioResult,
};
use cqed_core::selftest::run_selftest;
use cqed_core::Error;

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("rabi", "Rabi collapse and revival, exact vs expansion vs damped"),
    ("split", "Undamped and damped phase splitting at one photon number"),
    ("fig2", "Phase splitting over n_bar_list"),
    ("fig3", "Conditioned single-peak scans for both dipole preparations"),
    ("echo", "Sign-flip echo for each of echo_times"),
    ("cat", "Cat-state distances, decoherence times and the Wigner snapshot"),
    ("wigner", "Wigner snapshot of the conditioned field"),
    ("selftest", "Invariant checks of every module"),
];

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn command() -> Command {
    let mut sub_args = vec![
        Arg::new("config").long("config").short('c').value_name("FILE").help("key = value file"),
        Arg::new("output-dir")
            .long("output-dir")
            .short('o')
            .value_name("DIR")
            .default_value("output")
            .help("Where data files go; nothing is written elsewhere"),
        Arg::new("set")
            .long("set")
            .value_name("KEY=VALUE")
            .action(ArgAction::Append)
            .help("Override any config key (repeatable)"),
        Arg::new("threads")
            .long("threads")
            .value_name("N")
            .value_parser(clap::value_parser!(usize))
            .help("Cap worker threads (default: machine parallelism)"),
    ];
    for key in KEYS {
        let mut arg = Arg::new(*key).long(flag_name(key)).value_name("VALUE").help(format!("Sets `{key}`"));
        if *key == "damping_enabled" {
            arg = arg.visible_alias("damping").help("Sets `damping_enabled` (on/off)");
        }
        sub_args.push(arg);
    }
    let mut cmd = Command::new("cqed")
        .about("Atom and mesoscopic field in a damped cavity: scenario runner")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about).args(sub_args.clone()));
    }
    cmd
}

/// Defaults, then the file, then `--set`, then dedicated flags.
fn build_config(m: &ArgMatches) -> cqed_core::Result<ExperimentConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => {
            let path = PathBuf::from(path);
            if !path.is_file() {
                return Err(Error::Config(format!("config file {} not found", path.display())));
            }
            ExperimentConfig::from_file(&path)?
        }
        None => ExperimentConfig::default(),
    };
    for item in m.get_many::<String>("set").into_iter().flatten() {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set {item:?}: expected KEY=VALUE")))?;
        cfg.set(k.trim(), v)?;
    }
    for key in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(name: &str, cfg: &ExperimentConfig) -> cqed_core::Result<ScenarioResult> {
    match name {
        "rabi" => run_collapse_revival(cfg, cfg.horizon),
        "split" => run_split(cfg),
        "fig2" => {
            let list = cfg.n_bar.map_or_else(|| cfg.n_bar_list.clone(), |n| vec![n]);
            run_fig2(cfg, &list)
        }
        "fig3" => run_fig3(cfg),
        "echo" => run_echo(cfg, &cfg.echo_times),
        "cat" => run_cat_metrics(cfg),
        "wigner" => run_wigner(cfg),
        other => unreachable!("unregistered subcommand {other}"),
    }
}

fn usage_error(subcommand: &str, msg: &str) -> ExitCode {
    eprintln!("error: {msg}\n");
    let mut cmd = command();
    let usage = match cmd.find_subcommand_mut(subcommand) {
        Some(sub) => sub.render_usage(),
        None => cmd.render_usage(),
    };
    eprintln!("{usage}");
    eprintln!("Run `cqed --help` for the list of subcommands.");
    ExitCode::from(2)
}

fn selftest() -> ExitCode {
    let checks = run_selftest();
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} [{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.module,
            c.name,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let matches = command().get_matches();
    let (name, m) = matches.subcommand().expect("subcommand is required");

    if let Some(&n) = m.get_one::<usize>("threads") {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool already set up: {e}");
        }
    }

    let cfg = match build_config(m) {
        Ok(c) => c,
        Err(Error::Config(msg)) => return usage_error(name, &msg),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    if name == "selftest" {
        return selftest();
    }

    let result = match dispatch(name, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for line in &result.summary {
        println!("{line}");
    }
    let dir = PathBuf::from(m.get_one::<String>("output-dir").expect("has default"));
    if let Err(e) = result.write_to(&dir) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    println!("wrote {} files to {}", result.files().len(), dir.display());
    ExitCode::SUCCESS
}
