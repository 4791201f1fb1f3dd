use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use spatialgp_cli::{run, CliError, RunConfig, COMMANDS, KEYS};

fn cli() -> Command {
    let mut root = Command::new("spatialgp")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Matérn Gaussian-process fitting, prediction and benchmarking")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in COMMANDS {
        let mut cmd = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("`key = value` run configuration; flags override it"),
        );
        for k in KEYS {
            let help = match k.default {
                Some(d) => format!("{} [default: {d}]", k.doc),
                None => k.doc.to_string(),
            };
            cmd = cmd.arg(Arg::new(k.name).long(k.name).value_name("VALUE").action(ArgAction::Set).help(help));
        }
        root = root.subcommand(cmd);
    }
    root
}

fn resolve(matches: &ArgMatches) -> Result<RunConfig, CliError> {
    let mut cfg = match matches.get_one::<PathBuf>("config") {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for k in KEYS {
        if let Some(v) = matches.get_one::<String>(k.name) {
            cfg.set(k.name, v)?;
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (command, sub) = matches.subcommand().expect("subcommand required");
    let result = resolve(sub).and_then(|cfg| {
        if let Some(n) = cfg.workers()? {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
        }
        run(command, &cfg)
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for p in &outcome.outputs {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
