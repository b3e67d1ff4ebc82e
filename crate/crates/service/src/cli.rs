//! `sensation` command line.
//!
//! Exit codes: 0 clean, 1 findings or a grade below S, 2 rejected input,
//! 3 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use sensation_core::capability::{load_registry, CapabilityRegistry};
use sensation_core::diagnostic::render as render_diagnostics;
use sensation_core::dsl::print_rules_file;
use sensation_core::engine::{EmissionTrace, Timeline, TraceEntry};
use sensation_core::fixtures;
use sensation_core::rule::Rule;
use sensation_core::scenario::{self, Scenario};

use crate::api::{router, AppState};
use crate::error::OpError;
use crate::ops::{self, render};
use crate::store::{Fault, FaultPoint, RuleStore};

/// Names a store write point at which `serve` aborts, for crash tests.
pub const CRASH_ENV: &str = "SENSATION_CRASH_AT";

#[derive(Parser, Debug)]
#[command(name = "sensation", version, about = "Author, check, run and grade event-state trigger-action rules")]
pub struct Cli {
    /// Capability registry file; defaults to the bundled smart-home registry.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a rules file.
    Check {
        #[arg(long)]
        rules: PathBuf,
    },
    /// Print a rules file in canonical form.
    Fmt {
        #[arg(long)]
        rules: PathBuf,
        /// Rewrite the file in place.
        #[arg(long)]
        write: bool,
    },
    /// Report contradictions, loops and redundancy.
    Analyze {
        #[arg(long)]
        rules: PathBuf,
    },
    /// Run rules over a scenario's probes or over a timeline file.
    Simulate {
        #[arg(long)]
        rules: PathBuf,
        /// Bundled scenario id (T1..T4) or scenario file.
        #[arg(long, required_unless_present = "timeline", conflicts_with = "timeline")]
        scenario: Option<String>,
        #[arg(long)]
        timeline: Option<PathBuf>,
    },
    /// Grade rules against a task.
    Grade {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        task: String,
    },
    /// Convert legacy IF-triggers-THEN-actions rules.
    ImportLegacy { file: PathBuf },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = ".")]
        data_dir: PathBuf,
    },
}

/// What a command produced: a document and whether it counts as findings.
struct Outcome {
    json: String,
    text: String,
    findings: bool,
}

fn read(path: &Path) -> Result<String, OpError> {
    std::fs::read_to_string(path).map_err(|e| OpError::Storage(format!("cannot read {}: {e}", path.display())))
}

fn read_rules(path: &Path) -> Result<Vec<Rule>, OpError> {
    ops::parse_rules_text(&read(path)?)
}

fn registry(path: Option<&Path>) -> Result<CapabilityRegistry, OpError> {
    match path {
        Some(p) => Ok(load_registry(&read(p)?)?),
        None => Ok(fixtures::smart_home()),
    }
}

fn scenario_arg(arg: &str) -> Result<Scenario, OpError> {
    if let Some(s) = scenario::bundled(arg) {
        return Ok(s);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(OpError::UnknownScenario(arg.to_owned()));
    }
    let text = read(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(scenario::load_scenario_with(&text, |name| {
        fixtures::resolve_registry(name)
            .map(str::to_owned)
            .or_else(|| std::fs::read_to_string(base.join(name)).ok())
    })?)
}

fn doc<T: Serialize>(value: &T, text: String, findings: bool) -> Outcome {
    Outcome {
        json: render(value),
        text,
        findings,
    }
}

fn trace_text(trace: &EmissionTrace, out: &mut String) {
    if trace.entries.is_empty() {
        out.push_str("  (nothing fired)\n");
    }
    for entry in &trace.entries {
        match entry {
            TraceEntry::Fire {
                t,
                depth,
                rule,
                event,
                actions,
                ..
            } => {
                let actions: Vec<String> = actions.iter().map(|a| a.to_string()).collect();
                out.push_str(&format!("  t={t} depth={depth} {rule} on {event}: {}\n", actions.join(", ")));
            }
            TraceEntry::LoopAborted { t, depth, chain } => {
                let chain: Vec<&str> = chain.iter().map(|r| r.as_str()).collect();
                out.push_str(&format!("  t={t} loop aborted after depth {depth}: {}\n", chain.join(" -> ")));
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<Outcome, OpError> {
    let reg = || registry(cli.registry.as_deref());
    match &cli.command {
        Command::Check { rules } => {
            let rules = read_rules(rules)?;
            let out = ops::check(&rules, &reg()?)?;
            let mut text = format!("{} rules ok\n", out.rules.len());
            for r in &out.rules {
                text.push_str(&format!("{}: {}\n", r.id, r.dsl));
            }
            Ok(doc(&out, text, false))
        }
        Command::Fmt { rules: path, write } => {
            let rules = read_rules(path)?;
            let formatted = print_rules_file(&rules);
            if *write {
                std::fs::write(path, &formatted)
                    .map_err(|e| OpError::Storage(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(Outcome {
                json: render(&serde_json::json!({ "formatted": formatted })),
                text: formatted,
                findings: false,
            })
        }
        Command::Analyze { rules } => {
            let rules = read_rules(rules)?;
            let out = ops::analyze(&rules, &reg()?)?;
            let text = if out.diagnostics.is_empty() {
                "no findings\n".to_owned()
            } else {
                render_diagnostics(&out.diagnostics)
            };
            let findings = !out.diagnostics.is_empty();
            Ok(doc(&out, text, findings))
        }
        Command::Simulate {
            rules,
            scenario,
            timeline,
        } => {
            let rules = read_rules(rules)?;
            let out = match (scenario, timeline) {
                (Some(id), _) => ops::simulate_scenario(&scenario_arg(id)?, &rules)?,
                (None, Some(path)) => {
                    let timeline: Timeline =
                        serde_json::from_str(&read(path)?).map_err(|e| OpError::Timeline(e.to_string()))?;
                    ops::simulate_timeline(&rules, &timeline, &reg()?)?
                }
                (None, None) => return Err(OpError::BadRequest("give --scenario or --timeline".into())),
            };
            let mut text = String::new();
            for (i, trace) in out.traces.iter().enumerate() {
                text.push_str(&format!("probe {i}:\n"));
                trace_text(trace, &mut text);
            }
            let mut findings = false;
            if let Some(report) = &out.report {
                text.push_str(&format!("grade {}: {} ({})\n", report.scenario, report.grade, report.grade.score()));
                text.push_str(&render_diagnostics(&report.diagnostics));
                findings = ops::below_s(report.grade);
            }
            Ok(doc(&out, text, findings))
        }
        Command::Grade { rules, task } => {
            let rules = read_rules(rules)?;
            let out = ops::grade(&ops::bundled_task(task)?, &rules)?;
            let mut text = format!("{}: {} ({})\n", out.task, out.label, out.score);
            for m in &out.matches {
                let c: Vec<&str> = m.candidates.iter().map(|r| r.as_str()).collect();
                text.push_str(&format!("  {}: {} [{}]\n", m.reference, format!("{:?}", m.class).to_lowercase(), c.join(", ")));
            }
            if !out.unmatched.is_empty() {
                let u: Vec<&str> = out.unmatched.iter().map(|r| r.as_str()).collect();
                text.push_str(&format!("  unmatched: {}\n", u.join(", ")));
            }
            let findings = ops::below_s(out.label);
            Ok(doc(&out, text, findings))
        }
        Command::ImportLegacy { file } => {
            let out = ops::import_legacy(&read(file)?, &reg()?)?;
            let mut text = String::new();
            let mut findings = false;
            for entry in &out.rules {
                match &entry.dsl {
                    Some(dsl) => text.push_str(&format!("{}: {dsl}\n", entry.index + 1)),
                    None => text.push_str(&format!("{}: not converted\n", entry.index + 1)),
                }
                for d in &entry.report.diagnostics {
                    findings = true;
                    text.push_str(&format!("  {d}\n"));
                }
            }
            Ok(doc(&out, text, findings))
        }
        Command::Serve { .. } => unreachable!("serve is handled by run"),
    }
}

fn serve(registry: CapabilityRegistry, port: u16, data_dir: &Path, err: &mut dyn Write) -> Result<(), OpError> {
    let mut store = RuleStore::open(data_dir)?;
    if let Ok(point) = std::env::var(CRASH_ENV) {
        let point = FaultPoint::parse(&point).ok_or_else(|| OpError::BadRequest(format!("{CRASH_ENV}: unknown point `{point}`")))?;
        store.set_fault(Some(Fault::Abort(point)));
    }
    let state = AppState::new(registry, store);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| OpError::Internal(e.to_string()))?;
    runtime.block_on(async {
        let addr = SocketAddr::from(([127, 0, 0, 1], port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| OpError::Storage(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| OpError::Storage(e.to_string()))?;
        let _ = writeln!(err, "listening on http://{local}");
        let _ = err.flush();
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| OpError::Storage(e.to_string()))
    })
}

fn report_error(e: &OpError, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    if json {
        let _ = out.write_all(e.to_json().as_bytes());
    } else {
        let _ = writeln!(err, "error[{}]: {e}", e.code());
    }
    e.exit_code()
}

/// Runs the command line with `args` (program name first) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Command::Serve { port, data_dir } = &cli.command {
        return match registry(cli.registry.as_deref()).and_then(|reg| serve(reg, *port, data_dir, err)) {
            Ok(()) => 0,
            Err(e) => report_error(&e, cli.json, out, err),
        };
    }
    match execute(&cli) {
        Ok(outcome) => {
            let body = if cli.json { outcome.json } else { outcome.text };
            if out.write_all(body.as_bytes()).is_err() {
                return 3;
            }
            u8::from(outcome.findings)
        }
        Err(e) => report_error(&e, cli.json, out, err),
    }
}
