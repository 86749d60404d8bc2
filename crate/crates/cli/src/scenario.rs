//! Scenario files: one `@<now> <command>` per line, replayed in order.
//!
//! ```text
//! # comment
//! @0    init --seed 7
//! @10   project create p1 --base
//! @20   vm launch p1 --vcpus 17
//! ```
//!
//! Every step is echoed, followed by its output. Failed steps print their
//! error and exit code on the same stream, so two replays from the same
//! seed produce byte-identical transcripts.

use std::io::Write;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::exec::{self, Failure, Outcome, Session};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub line: usize,
    pub now: u64,
    pub text: String,
    pub argv: Vec<String>,
}

/// Parses the whole script up front; a malformed line rejects all of it.
pub fn parse(text: &str) -> Result<Vec<Step>, Failure> {
    let mut steps = Vec::new();
    let mut last = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = |why: &str| Failure::Usage(format!("scenario line {line}: {why}"));
        let rest = trimmed
            .strip_prefix('@')
            .ok_or_else(|| bad("expected `@<now> <command>`"))?;
        let (clock, cmd) = rest
            .split_once(char::is_whitespace)
            .ok_or_else(|| bad("missing command"))?;
        let now: u64 = clock.parse().map_err(|_| bad("clock must be a whole number"))?;
        if now < last {
            return Err(bad("clock goes backwards"));
        }
        last = now;
        let argv = shlex::split(cmd).ok_or_else(|| bad("unbalanced quotes"))?;
        steps.push(Step {
            line,
            now,
            text: cmd.trim().to_string(),
            argv,
        });
    }
    Ok(steps)
}

/// Replays `steps` against `session`, writing the transcript to `out`.
/// Returns the number of failed steps.
pub fn replay(session: &mut Session, steps: &[Step], actor: &str, out: &mut dyn Write) -> Result<usize, Failure> {
    let mut failed = 0;
    for step in steps {
        writeln!(out, "@{} {}", step.now, step.text)?;
        let mut buf = Vec::new();
        let result = run_step(session, step, actor, &mut buf);
        out.write_all(&buf)?;
        if !buf.is_empty() && !buf.ends_with(b"\n") {
            writeln!(out)?;
        }
        if let Err(f) = result {
            failed += 1;
            if let Some(msg) = f.message() {
                writeln!(out, "{msg}")?;
            }
            writeln!(out, "exit {}", f.exit_code())?;
        }
    }
    writeln!(out, "replayed {} step(s), {failed} failed", steps.len())?;
    Ok(failed)
}

fn run_step(session: &mut Session, step: &Step, actor: &str, out: &mut dyn Write) -> Outcome {
    let mut argv = vec!["wg".to_string(), "--now".to_string(), step.now.to_string()];
    if !step.argv.iter().any(|a| a == "--actor" || a.starts_with("--actor=")) {
        argv.extend(["--actor".to_string(), actor.to_string()]);
    }
    argv.extend(step.argv.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| {
        Failure::Usage(e.render().to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string())
    })?;
    match &cli.command {
        Command::Scenario(_) | Command::Serve(_) => {
            Err(Failure::Usage("scenario and serve cannot run inside a scenario".into()))
        }
        Command::Init(args) => {
            if session.state.is_some() && !args.force {
                return Err(Failure::domain(
                    "StateExists",
                    "state already exists; pass --force to replace it",
                ));
            }
            let state = exec::init_state(args)?;
            exec::describe_init(&state, out)?;
            session.state = Some(state);
            session.persisted = None;
            Ok(())
        }
        cmd if exec::is_stateless(cmd) => exec::run_stateless(cmd, out),
        cmd => exec::dispatch(session, cmd, &cli.actor, cli.now, out),
    }
}
