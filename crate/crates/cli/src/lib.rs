//! The `wg` command line: one binary over the whole data cloud.
//!
//! [`run`] takes an argument vector and two output streams and returns the
//! process exit code: 0 on success, 1 on a domain error, 2 on bad usage.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
pub mod exec;
pub mod report;
pub mod scenario;
pub mod serve;
pub mod state;

use args::{AuditCmd, Cli, Command, ScenarioCmd};
use exec::{Outcome, Session};
use state::{StateError, Store, DEFAULT_STATE_PATH};

pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(f) => {
            if let Some(msg) = f.message() {
                let _ = writeln!(err, "{msg}");
            }
            f.exit_code()
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Outcome {
    if exec::is_stateless(&cli.command) {
        return exec::run_stateless(&cli.command, out);
    }
    let path = cli
        .state
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_STATE_PATH));
    let store = Store::open(&path)?;
    match &cli.command {
        Command::Init(args) => {
            if store.exists() && !args.force {
                return Err(StateError::StateExists(path).into());
            }
            let state = exec::init_state(args)?;
            store.save(&state, None)?;
            exec::describe_init(&state, out)
        }
        Command::Audit(AuditCmd::Verify) => {
            if !store.exists() {
                return Err(StateError::NoState(path).into());
            }
            let data = match fs::read(store.audit_path()) {
                Ok(d) => d,
                Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
                Err(e) => return Err(e.into()),
            };
            exec::verify_log_bytes(&data, out)
        }
        Command::Scenario(ScenarioCmd::Replay { file }) => {
            let steps = scenario::parse(&fs::read_to_string(file)?)?;
            let mut session = if store.exists() {
                let (state, n) = store.load()?;
                Session::loaded(state, n)
            } else {
                Session::default()
            };
            scenario::replay(&mut session, &steps, &cli.actor, out)?;
            save_if_changed(&store, &session)
        }
        Command::Serve(args) => {
            let (state, n) = store.load()?;
            serve::serve(store, Session::loaded(state, n), &cli.actor, &args.bind, args.port, out)
        }
        cmd => {
            let (state, n) = store.load()?;
            let mut session = Session::loaded(state, n);
            let result = exec::dispatch(&mut session, cmd, &cli.actor, cli.now, out);
            // Refused attempts are audited too, so save whatever the outcome.
            save_if_changed(&store, &session)?;
            result
        }
    }
}

fn save_if_changed(store: &Store, session: &Session) -> Outcome {
    if let Some(state) = &session.state {
        if session.persisted != Some(state.cloud.audit().len()) {
            store.save(state, session.persisted)?;
        }
    }
    Ok(())
}
