//! The `svan` command line.
//!
//! Exit codes: 0 when the verdict holds (or the analysis succeeded), 1 when
//! it does not hold, 2 on usage, parse or semantic errors. Errors are one
//! line on stderr: `svan: error: <kind>: <message>`.

use std::fmt::Display;
use std::fs;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};

use svan_core::adaptation::{parse_contract, synthesize_adaptor, verify_adaptation, AdaptError};
use svan_core::choreography::{conformance, parse_diagram, project, projections, realizable, CollaborationDiagram};
use svan_core::compatibility::{check_compat, compat_degree, FloodParams, Notion};
use svan_core::composition::{async_product, sync_product, CompositeLts, Mode};
use svan_core::equivalences::{bisimilar, trace_equivalent, Relation};
use svan_core::model::{parse_lts, parse_lts_unchecked, validate, Lts, Severity};
use svan_core::verdict::{Evidence, Side, Verdict};

#[derive(Parser, Debug)]
#[command(name = "svan", version, about = "Service protocol analyses over labelled transition systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Comm {
    Sync,
    Async,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum NotionArg {
    Df,
    Uc,
    Ur,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RelationArg {
    Trace,
    Strong,
    Weak,
    Branching,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Check {
    Realizability,
    Projection,
}

#[derive(Args, Debug)]
struct CommArgs {
    #[arg(long, value_enum, default_value = "sync")]
    comm: Comm,
    /// Mailbox bound for asynchronous communication.
    #[arg(long, default_value_t = 1)]
    bound: usize,
}

impl CommArgs {
    fn mode(&self) -> Mode {
        match self.comm {
            Comm::Sync => Mode::Sync,
            Comm::Async => Mode::Async { bound: self.bound },
        }
    }
}

#[derive(Args, Debug)]
struct NotionArgs {
    #[arg(long, value_enum)]
    notion: NotionArg,
    /// For `uc`: which service (1 or 2) must complement the other.
    #[arg(long, default_value_t = 2)]
    big: usize,
}

impl NotionArgs {
    fn notion(&self) -> Notion {
        match self.notion {
            NotionArg::Df => Notion::DeadlockFree,
            NotionArg::Uc => Notion::UnidirectionalComplement { big: self.big },
            NotionArg::Ur => Notion::UnspecifiedReceptions,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check an LTS document and list diagnostics.
    Validate {
        file: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Build the synchronous or asynchronous product of services.
    Product {
        #[arg(required = true, num_args = 2..)]
        files: Vec<String>,
        #[command(flatten)]
        comm: CommArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Report deadlocks of the composed services.
    Deadlocks {
        #[arg(required = true, num_args = 2..)]
        files: Vec<String>,
        #[command(flatten)]
        comm: CommArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Compare two protocols under an equivalence.
    Equiv {
        #[arg(long, value_enum)]
        relation: RelationArg,
        /// Erase τ from traces (trace relation only).
        #[arg(long)]
        observable_only: bool,
        left: String,
        right: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Decide a compatibility notion.
    Compat {
        #[command(flatten)]
        notion: NotionArgs,
        left: String,
        right: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Compute the compatibility-degree matrix by flooding.
    CompatDegree {
        #[command(flatten)]
        notion: NotionArgs,
        left: String,
        right: String,
        #[arg(long, default_value_t = 0.5)]
        w: f64,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        /// Weights of the state-nature, label and parameter scores.
        #[arg(long, default_value = "0.2,0.5,0.3")]
        static_weights: String,
        /// Count initial-status agreement in the state-nature score.
        #[arg(long)]
        include_initial: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Synthesize an adaptor from a contract; services as ID=FILE.
    Adapt {
        #[arg(long)]
        contract: String,
        #[arg(required = true)]
        services: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Verify a closed system of services and an adaptor.
    VerifyAdapt {
        #[arg(long)]
        adaptor: String,
        #[arg(required = true)]
        services: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Realizability or projection of a collaboration diagram.
    Choreo {
        #[arg(long, value_enum, default_value = "realizability")]
        check: Check,
        /// Peer to project (all peers when omitted).
        #[arg(long)]
        peer: Option<String>,
        diagram: String,
        #[command(flatten)]
        comm: CommArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Conformance of peer implementations (PEER=FILE) to a diagram.
    Conformance {
        diagram: String,
        #[arg(required = true)]
        impls: Vec<String>,
        #[command(flatten)]
        comm: CommArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
}

fn fail(kind: &'static str, message: impl Display) -> Failure {
    Failure { kind, message: message.to_string() }
}

type Outcome = Result<i32, Failure>;

struct Style {
    color: bool,
}

impl Style {
    fn verdict(&self, holds: bool) -> String {
        let (word, code) = if holds { ("holds", "32") } else { ("does not hold", "31") };
        if self.color {
            format!("\x1b[{code}m{word}\x1b[0m")
        } else {
            word.to_string()
        }
    }
}

fn read(path: &str) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail("io", format!("{path}: {e}")))
}

fn load_lts(path: &str) -> Result<Lts, Failure> {
    parse_lts(&read(path)?).map_err(|e| fail("parse", format!("{path}: {e}")))
}

fn load_diagram(path: &str) -> Result<CollaborationDiagram, Failure> {
    parse_diagram(&read(path)?).map_err(|e| fail("parse", format!("{path}: {e}")))
}

fn named(specs: &[String]) -> Result<Vec<(String, Lts)>, Failure> {
    specs
        .iter()
        .map(|s| {
            let (id, path) = s
                .split_once('=')
                .ok_or_else(|| fail("usage", format!("expected ID=FILE, got `{s}`")))?;
            Ok((id.to_string(), load_lts(path)?))
        })
        .collect()
}

fn only(format: Format, allowed: &[Format]) -> Result<(), Failure> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        Err(fail("usage", format!("format {format:?} is not available for this command").to_lowercase()))
    }
}

fn exit(holds: bool) -> i32 {
    if holds {
        0
    } else {
        1
    }
}

fn evidence_text(e: &Evidence) -> Vec<String> {
    let trace = |t: &[String]| format!("[{}]", t.join(", "));
    match e {
        Evidence::None => vec![],
        Evidence::Witness { trace: t } => vec![format!("witness: {}", trace(t))],
        Evidence::DistinguishingTrace { trace: t, only_in } => {
            let side = match only_in {
                Side::Left => "left",
                Side::Right => "right",
            };
            vec![format!("distinguishing trace: {} (only in {side})", trace(t))]
        }
        Evidence::Relation { blocks } => {
            let mut lines = vec!["partition:".to_string()];
            lines.extend(blocks.iter().map(|(s, b)| format!("  {s} -> {b}")));
            lines
        }
        Evidence::Separated { left, right, splitter, .. } => vec![
            format!("{left} and {right} are separated"),
            format!("splitter: {}", trace(splitter)),
        ],
        Evidence::Deadlock { state, trace: t } => {
            vec![format!("deadlock at {state}"), format!("trace: {}", trace(t))]
        }
        Evidence::NoFinalPath { state, trace: t } => vec![
            format!("no final state reachable from {state}"),
            format!("trace: {}", trace(t)),
        ],
        Evidence::Unmatched { state, service, label, trace: t } => vec![
            format!("unmatched {label} of service {service} at {state}"),
            format!("trace: {}", trace(t)),
        ],
        Evidence::Frontier { states } => vec![format!("frontier: {}", states.join(" "))],
        Evidence::Violation { trace: t, expected } => vec![
            format!("violation: {}", trace(t)),
            format!("expected: {}", trace(expected)),
        ],
        Evidence::Unreached { expected } => vec![format!("never completes: {}", trace(expected))],
    }
}

const VERDICT_FORMATS: &[Format] = &[Format::Text, Format::Json];

fn emit_verdict(v: &Verdict, format: Format, style: &Style, out: &mut dyn Write) -> Outcome {
    let text = match format {
        Format::Json => v.to_json(),
        _ => {
            let mut s = format!("{}: {}\n", v.relation, style.verdict(v.holds));
            for line in evidence_text(&v.evidence) {
                s.push_str(&line);
                s.push('\n');
            }
            s
        }
    };
    write_out(out, &text)?;
    Ok(exit(v.holds))
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| fail("io", e))
}

fn compose(ltss: &[Lts], mode: Mode) -> Result<CompositeLts, Failure> {
    match mode {
        Mode::Sync => sync_product(ltss),
        Mode::Async { bound } => async_product(ltss, bound),
    }
    .map_err(|e| fail("composition", e))
}

fn product_text(c: &CompositeLts) -> String {
    let mut s = format!(
        "{} product: {} states, {} transitions\n",
        c.mode(),
        c.states().len(),
        c.transitions().len()
    );
    for (i, st) in c.states().iter().enumerate() {
        let mark = if c.is_final(i) { " (final)" } else { "" };
        s.push_str(&format!("{i}: {st}{mark}\n"));
    }
    for t in c.transitions() {
        s.push_str(&format!("{} -{}-> {}\n", t.source, t.label, t.target));
    }
    s
}

fn run_command(cmd: Command, style: &Style, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Validate { file, format } => {
            only(format, &[Format::Text, Format::Json])?;
            let lts = parse_lts_unchecked(&read(&file)?).map_err(|e| fail("parse", format!("{file}: {e}")))?;
            let diags = validate(&lts);
            let ok = diags.iter().all(|d| d.severity != Severity::Error);
            let text = match format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&diags).map_err(|e| fail("io", e))?;
                    s.push('\n');
                    s
                }
                _ if diags.is_empty() => "valid\n".to_string(),
                _ => diags.iter().map(|d| format!("{d}\n")).collect(),
            };
            write_out(out, &text)?;
            Ok(exit(ok))
        }
        Command::Product { files, comm, format } => {
            only(format, &[Format::Text, Format::Json, Format::Dot])?;
            let ltss = files.iter().map(|f| load_lts(f)).collect::<Result<Vec<_>, _>>()?;
            let c = compose(&ltss, comm.mode())?;
            let text = match format {
                Format::Json => c.to_json(),
                Format::Dot => c.to_dot(),
                _ => product_text(&c),
            };
            write_out(out, &text)?;
            Ok(0)
        }
        Command::Deadlocks { files, comm, format } => {
            only(format, &[Format::Text, Format::Json])?;
            let ltss = files.iter().map(|f| load_lts(f)).collect::<Result<Vec<_>, _>>()?;
            let c = compose(&ltss, comm.mode())?;
            let found = c.deadlocks();
            let text = match format {
                Format::Json => {
                    let list: Vec<serde_json::Value> = found
                        .iter()
                        .map(|(s, t)| serde_json::json!({ "state": s.to_string(), "trace": t.rendered() }))
                        .collect();
                    let mut s = serde_json::to_string_pretty(&serde_json::json!({ "deadlocks": list }))
                        .map_err(|e| fail("io", e))?;
                    s.push('\n');
                    s
                }
                _ if found.is_empty() => "no deadlocks\n".to_string(),
                _ => found
                    .iter()
                    .map(|(s, t)| format!("deadlock at {s} via [{}]\n", t.rendered().join(", ")))
                    .collect(),
            };
            write_out(out, &text)?;
            Ok(exit(found.is_empty()))
        }
        Command::Equiv { relation, observable_only, left, right, format } => {
            only(format, VERDICT_FORMATS)?;
            let (l1, l2) = (load_lts(&left)?, load_lts(&right)?);
            let v = match relation {
                RelationArg::Trace => trace_equivalent(&l1, &l2, observable_only),
                RelationArg::Strong => bisimilar(&l1, &l2, Relation::Strong),
                RelationArg::Weak => bisimilar(&l1, &l2, Relation::Weak),
                RelationArg::Branching => bisimilar(&l1, &l2, Relation::Branching),
            };
            emit_verdict(&v, format, style, out)
        }
        Command::Compat { notion, left, right, format } => {
            only(format, VERDICT_FORMATS)?;
            let (l1, l2) = (load_lts(&left)?, load_lts(&right)?);
            let v = check_compat(&l1, &l2, notion.notion()).map_err(|e| fail("usage", e))?;
            emit_verdict(&v, format, style, out)
        }
        Command::CompatDegree {
            notion,
            left,
            right,
            w,
            epsilon,
            max_iter,
            static_weights,
            include_initial,
            format,
        } => {
            only(format, &[Format::Text, Format::Json, Format::Csv])?;
            let weights: Vec<f64> = static_weights
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| fail("usage", format!("--static-weights: {e}")))?;
            let weights: [f64; 3] = weights
                .try_into()
                .map_err(|_| fail("usage", "--static-weights takes exactly three numbers"))?;
            let params = FloodParams { w, epsilon, max_iter, static_weights: weights, include_initial };
            let (l1, l2) = (load_lts(&left)?, load_lts(&right)?);
            let m = compat_degree(&l1, &l2, notion.notion(), &params).map_err(|e| fail("params", e))?;
            if !m.converged {
                let _ = writeln!(err, "svan: warning: not-converged after {} sweeps", m.iterations);
            }
            let text = match format {
                Format::Json => m.to_json(),
                Format::Csv => m.to_csv(),
                _ => m.to_table(),
            };
            write_out(out, &text)?;
            Ok(0)
        }
        Command::Adapt { contract, services, format } => {
            only(format, &[Format::Text, Format::Json, Format::Dot])?;
            let c = parse_contract(&read(&contract)?).map_err(|e| fail("parse", format!("{contract}: {e}")))?;
            let services = named(&services)?;
            match synthesize_adaptor(&services, &c) {
                Ok(a) => {
                    let text = match format {
                        Format::Json => a.to_json(),
                        Format::Dot => a.to_dot(),
                        _ => {
                            let mut s = format!(
                                "adaptor: {} states, {} transitions\n",
                                a.lts.states().len(),
                                a.lts.transitions().len()
                            );
                            for t in a.lts.transitions() {
                                let notes: Vec<String> =
                                    a.annotations.get(t).into_iter().flatten().map(ToString::to_string).collect();
                                s.push_str(&format!("{t}  [{}]\n", notes.join(" ")));
                            }
                            s
                        }
                    };
                    write_out(out, &text)?;
                    Ok(0)
                }
                Err(AdaptError::Unadaptable) => {
                    let text = match format {
                        Format::Json => "{\n  \"holds\": false,\n  \"reason\": \"unadaptable\"\n}\n".to_string(),
                        _ => format!("{}\n", AdaptError::Unadaptable),
                    };
                    write_out(out, &text)?;
                    Ok(1)
                }
                Err(e) => Err(fail(e.kind(), e)),
            }
        }
        Command::VerifyAdapt { adaptor, services, format } => {
            only(format, VERDICT_FORMATS)?;
            let a = load_lts(&adaptor)?;
            let ltss: Vec<Lts> = match services.iter().all(|s| s.contains('=')) {
                true => named(&services)?.into_iter().map(|(_, l)| l).collect(),
                false => services.iter().map(|f| load_lts(f)).collect::<Result<_, _>>()?,
            };
            emit_verdict(&verify_adaptation(&ltss, &a), format, style, out)
        }
        Command::Choreo { check, peer, diagram, comm, format } => {
            let cd = load_diagram(&diagram)?;
            match check {
                Check::Projection => {
                    only(format, &[Format::Text, Format::Json, Format::Dot])?;
                    let peers = match peer {
                        Some(p) => vec![(p.clone(), project(&cd, &p).map_err(|e| fail("choreography", e))?)],
                        None => projections(&cd),
                    };
                    let mut text = String::new();
                    for (p, l) in &peers {
                        match format {
                            Format::Json => {
                                if peers.len() > 1 {
                                    return Err(fail("usage", "json projection needs --peer"));
                                }
                                text.push_str(&l.to_json());
                            }
                            Format::Dot => {
                                if peers.len() > 1 {
                                    return Err(fail("usage", "dot projection needs --peer"));
                                }
                                text.push_str(&l.to_dot());
                            }
                            _ => {
                                let steps: Vec<String> = l.transitions().iter().map(|t| t.label.to_string()).collect();
                                text.push_str(&format!("{p}: {}\n", if steps.is_empty() { "(empty)".into() } else { steps.join(" . ") }));
                            }
                        }
                    }
                    write_out(out, &text)?;
                    Ok(0)
                }
                Check::Realizability => {
                    only(format, &[Format::Text, Format::Json])?;
                    let v = realizable(&cd, comm.mode()).map_err(|e| fail("choreography", e))?;
                    let text = match format {
                        Format::Json => v.to_json(),
                        _ => {
                            let mut s = format!("realizability ({}): {}\n", v.mode, style.verdict(v.holds));
                            for line in evidence_text(&v.to_verdict("realizability").evidence) {
                                s.push_str(&line);
                                s.push('\n');
                            }
                            s
                        }
                    };
                    write_out(out, &text)?;
                    Ok(exit(v.holds))
                }
            }
        }
        Command::Conformance { diagram, impls, comm, format } => {
            only(format, VERDICT_FORMATS)?;
            let cd = load_diagram(&diagram)?;
            let impls = named(&impls)?;
            let v = conformance(&cd, &impls, comm.mode()).map_err(|e| fail("choreography", e))?;
            emit_verdict(&v, format, style, out)
        }
    }
}

/// Runs one invocation and returns its exit code. Colour is used only when
/// `SVAN_COLOR` is set to something other than `0`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let color = std::env::var("SVAN_COLOR").is_ok_and(|v| v != "0");
    run_styled(args, color, out, err)
}

pub fn run_styled<I, T>(args: I, color: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let first = e.to_string();
            let line = first
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let _ = writeln!(err, "svan: error: usage: {line}");
            return 2;
        }
    };
    match run_command(cli.command, &Style { color }, out, err) {
        Ok(code) => code,
        Err(f) => {
            let msg = f.message.replace('\n', " ");
            let _ = writeln!(err, "svan: error: {}: {msg}", f.kind);
            2
        }
    }
}
