use std::fs;
use std::io::{self, BufRead, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use ledgerfit::blueprint::{self, ReportFormat, ReportOptions, ViewKind};
use ledgerfit::catalog::{self, Catalog, Severity};
use ledgerfit::engine::{self, Eligibility, OverrideFlag, Session, SessionMeta};
use ledgerfit::outcomes::{self, Verdict};
use ledgerfit::service::{self, ServeConfig};
use ledgerfit::store::{CatalogRegistry, Store, STORE_ENV};

#[derive(Parser)]
#[command(name = "ledgerfit", version, about = "Evaluate, elicit and design distributed-ledger use cases")]
struct Cli {
    /// Store directory holding sessions and catalogs.
    #[arg(long, global = true, env = STORE_ENV, default_value = ".ledgerfit")]
    store: PathBuf,
    /// Catalog file used for new sessions (bundled default when omitted).
    #[arg(long, global = true, env = "LEDGERFIT_CATALOG")]
    catalog: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a catalog file; exits 1 when any error is reported.
    Validate {
        /// Catalog to check; defaults to --catalog or the bundled one.
        path: Option<PathBuf>,
        /// Print diagnostics as JSON lines on stdout.
        #[arg(long)]
        jsonl: bool,
    },
    /// Answer questions interactively on the terminal.
    Run {
        #[command(flatten)]
        target: Target,
    },
    /// Apply a batch answers file to a session.
    Apply {
        #[command(flatten)]
        target: Target,
        /// JSON file: {"catalog_hash": ..., "answers": [{"question_id", "option_id", "note"?}]}
        answers: PathBuf,
    },
    /// Export a session report.
    Report {
        session: String,
        #[arg(long, default_value = "markdown", value_parser = parse_format)]
        format: ReportFormat,
        /// View to include (repeatable); all three when omitted.
        #[arg(long = "view", value_parser = parse_view)]
        views: Vec<ViewKind>,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "LEDGERFIT_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Copy a session under a new name.
    Clone { session: String, name: String },
    /// List stored sessions.
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Target {
    /// Existing session id.
    #[arg(long)]
    session: Option<String>,
    /// Create a new session with this name.
    #[arg(long = "new", value_name = "NAME")]
    new: Option<String>,
}

fn parse_view(s: &str) -> Result<ViewKind, String> {
    s.parse::<ViewKind>().map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse::<ReportFormat>().map_err(|e| e.to_string())
}

/// Failure classes mapped to exit codes 2 and 1.
enum Failure {
    Usage(String),
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Domain(e)
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Validate { path, jsonl } => validate(path.as_deref().or(cli.catalog.as_deref()), *jsonl),
        Command::Run { target } => {
            let (store, registry, catalog) = open(cli)?;
            let stdin = io::stdin();
            run(&store, &registry, &catalog, target, &mut stdin.lock(), &mut io::stdout())
        }
        Command::Apply { target, answers } => {
            let (store, registry, catalog) = open(cli)?;
            apply(&store, &registry, &catalog, target, answers)
        }
        Command::Report { session, format, views, out } => {
            let (store, registry, _) = open(cli)?;
            report(&store, &registry, session, *format, views, out.as_deref())
        }
        Command::Serve { port, host } => {
            let config = ServeConfig { addr: SocketAddr::new(*host, *port), store: cli.store.clone(), catalog: cli.catalog.clone() };
            let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
            runtime.block_on(service::serve(config))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Clone { session, name } => {
            let (store, registry, _) = open(cli)?;
            let clone = store.clone_session(session, name, &registry, Utc::now()).map_err(anyhow::Error::from)?;
            println!("{}", clone.id);
            Ok(ExitCode::SUCCESS)
        }
        Command::List { json } => {
            let (store, registry, _) = open(cli)?;
            let listings = store.list_sessions(&registry).map_err(anyhow::Error::from)?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&listings).map_err(anyhow::Error::from)?);
            } else {
                for l in listings {
                    println!(
                        "{}\t{}\t{}\t{}",
                        l.id,
                        l.version.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                        l.verdict.as_deref().unwrap_or(match l.status {
                            ledgerfit::store::ListingStatus::Ok => "-",
                            ledgerfit::store::ListingStatus::Unreadable => "unreadable",
                            ledgerfit::store::ListingStatus::CatalogMismatch => "catalog_mismatch",
                        }),
                        l.name.as_deref().unwrap_or("-"),
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_catalog(path: Option<&Path>) -> Result<Catalog, Failure> {
    match path {
        None => Ok(catalog::load_default_catalog()),
        Some(p) if !p.exists() => Err(Failure::Usage(format!("catalog file not found: {}", p.display()))),
        Some(p) => catalog::load_catalog_file(p).map_err(|e| Failure::Domain(e.into())),
    }
}

fn open(cli: &Cli) -> Result<(Store, CatalogRegistry, Arc<Catalog>), Failure> {
    let catalog = Arc::new(load_catalog(cli.catalog.as_deref())?);
    let store = Store::open(&cli.store).map_err(anyhow::Error::from)?;
    store.save_catalog(&catalog).map_err(anyhow::Error::from)?;
    let registry = store.registry([Arc::clone(&catalog)]).map_err(anyhow::Error::from)?;
    Ok((store, registry, catalog))
}

fn validate(path: Option<&Path>, jsonl: bool) -> CmdResult {
    let (label, text) = match path {
        None => ("bundled catalog".to_string(), catalog::default_catalog_document().to_string()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| match e.kind() {
                io::ErrorKind::NotFound => Failure::Usage(format!("catalog file not found: {}", p.display())),
                _ => Failure::Domain(anyhow!("cannot read {}: {e}", p.display())),
            })?;
            (p.display().to_string(), text)
        }
    };
    let parsed = catalog::parse_catalog(&text).map_err(|e| anyhow!("{label}: {e}"))?;
    let report = catalog::validate_catalog(&parsed);
    if jsonl {
        print!("{}", report.to_jsonl());
    } else {
        for d in &report.diagnostics {
            eprintln!("{d}");
        }
    }
    let errors = report.diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
    let warnings = report.diagnostics.len() - errors;
    let counts: Vec<String> = catalog::StageKind::ALL.iter().map(|s| parsed.stage_question_count(*s).to_string()).collect();
    let summary = format!(
        "{label}: {} {} with {} questions ({}), {errors} error(s), {warnings} warning(s), hash {}",
        parsed.id(),
        parsed.version(),
        parsed.question_count(),
        counts.join("/"),
        parsed.hash()
    );
    if jsonl {
        eprintln!("{summary}");
    } else {
        println!("{summary}");
    }
    Ok(if errors > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn target_session(store: &Store, registry: &CatalogRegistry, catalog: &Arc<Catalog>, target: &Target) -> anyhow::Result<(Session, Arc<Catalog>)> {
    match (&target.session, &target.new) {
        (Some(id), _) => Ok(store.load_session(id, registry)?),
        (None, Some(name)) => Ok((Session::new(catalog, SessionMeta::new(name.clone(), Utc::now())), Arc::clone(catalog))),
        (None, None) => bail!("either --session or --new is required"),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswersFile {
    catalog_hash: String,
    answers: Vec<AnswerLine>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerLine {
    question_id: String,
    option_id: String,
    #[serde(default)]
    note: Option<String>,
}

fn apply(store: &Store, registry: &CatalogRegistry, catalog: &Arc<Catalog>, target: &Target, path: &Path) -> CmdResult {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Failure::Usage(format!("answers file not found: {}", path.display())),
        _ => Failure::Domain(anyhow!("cannot read {}: {e}", path.display())),
    })?;
    let file: AnswersFile = serde_json::from_str(&text).with_context(|| format!("malformed answers file {}", path.display()))?;
    let (mut session, catalog) = target_session(store, registry, catalog, target)?;
    if file.catalog_hash != session.catalog_hash {
        return Err(Failure::Domain(anyhow!(
            "stale answers file: written for catalog {}, session uses {}; nothing applied",
            file.catalog_hash,
            session.catalog_hash
        )));
    }
    let at = Utc::now();
    for (i, line) in file.answers.into_iter().enumerate() {
        let version = session.version;
        let summary = session
            .record_answer(&catalog, &line.question_id, &line.option_id, line.note, version, at)
            .map_err(|e| anyhow!("answer #{} ({}): {e}; nothing saved", i + 1, line.question_id))?;
        eprintln!("#{} {} = {} -> version {}", i + 1, line.question_id, line.option_id, summary.version);
        report_change(&mut io::stderr(), &summary).context("writing summary")?;
    }
    store.save_session(&session).map_err(anyhow::Error::from)?;
    let verdict = outcomes::evaluate_suitability(&catalog, &session);
    println!("{}", session.id);
    eprintln!("session {} at version {}: {}", session.id, session.version, verdict.label());
    Ok(ExitCode::SUCCESS)
}

fn report(
    store: &Store,
    registry: &CatalogRegistry,
    id: &str,
    format: ReportFormat,
    views: &[ViewKind],
    out: Option<&Path>,
) -> CmdResult {
    let (session, catalog) = store.load_session(id, registry).map_err(anyhow::Error::from)?;
    let views = if views.is_empty() { ViewKind::ALL.to_vec() } else { views.to_vec() };
    let bytes = blueprint::export_report(&catalog, &session, format, &views, &ReportOptions::default());
    match out {
        Some(path) => fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().write_all(&bytes).context("writing report")?,
    }
    Ok(ExitCode::SUCCESS)
}

const RUN_HELP: &str = "commands: <number> answer, s skip, r <question> retract, o override a not-suitable verdict, w <term> wiki, q quit";

/// Interactive questionnaire. The session is saved after every change and
/// on exit, including end of input.
fn run(
    store: &Store,
    registry: &CatalogRegistry,
    catalog: &Arc<Catalog>,
    target: &Target,
    input: &mut impl BufRead,
    out: &mut impl Write,
) -> CmdResult {
    let (mut session, catalog) = target_session(store, registry, catalog, target)?;
    let save = |s: &Session| store.save_session(s).map_err(anyhow::Error::from);
    save(&session)?;
    writeln!(out, "session {} ({})\n{RUN_HELP}", session.id, session.meta.name).map_err(anyhow::Error::from)?;
    let mut skipped: Vec<String> = Vec::new();
    let mut last_verdict = outcomes::evaluate_suitability(&catalog, &session).label();
    let mut line = String::new();

    loop {
        let statuses = engine::eligible_questions(&catalog, &session, None);
        let next = statuses
            .iter()
            .find(|s| s.status == Eligibility::Eligible && !skipped.contains(&s.question_id));
        let Some(next) = next else {
            let verdict = outcomes::evaluate_suitability(&catalog, &session);
            writeln!(out, "no more eligible questions; verdict: {}", verdict.label()).map_err(anyhow::Error::from)?;
            let locked = matches!(verdict, Verdict::NotSuitable { .. })
                && !session.has_override(OverrideFlag::ProceedDespiteNotSuitable);
            let hint = if locked {
                "later stages are locked; enter o to override or q to quit"
            } else {
                "enter r <question> to revise an answer or q to quit"
            };
            writeln!(out, "{hint}").map_err(anyhow::Error::from)?;
            if !prompt_command(&mut session, &catalog, input, out, &mut line, &save)? {
                break;
            }
            continue;
        };
        let question = catalog.question(&next.question_id).expect("status lists catalog questions");
        writeln!(out, "\n[{}/{}] {}: {}", next.stage, next.substage, question.id, question.text).map_err(anyhow::Error::from)?;
        for (i, o) in question.options.iter().enumerate() {
            writeln!(out, "  {}) {}", i + 1, o.label).map_err(anyhow::Error::from)?;
        }
        loop {
            write!(out, "> ").map_err(anyhow::Error::from)?;
            out.flush().map_err(anyhow::Error::from)?;
            line.clear();
            if input.read_line(&mut line).map_err(anyhow::Error::from)? == 0 {
                save(&session)?;
                writeln!(out, "\nsaved {} at version {}", session.id, session.version).map_err(anyhow::Error::from)?;
                return Ok(ExitCode::SUCCESS);
            }
            let cmd = line.trim();
            if let Ok(n) = cmd.parse::<usize>() {
                match question.options.get(n.wrapping_sub(1)) {
                    Some(o) => {
                        let version = session.version;
                        match session.record_answer(&catalog, &question.id, &o.id, None, version, Utc::now()) {
                            Ok(summary) => {
                                save(&session)?;
                                report_change(out, &summary).map_err(anyhow::Error::from)?;
                                let verdict = outcomes::evaluate_suitability(&catalog, &session);
                                if verdict.label() != last_verdict {
                                    last_verdict = verdict.label();
                                    writeln!(out, "verdict: {last_verdict}").map_err(anyhow::Error::from)?;
                                }
                            }
                            Err(e) => writeln!(out, "{e}").map_err(anyhow::Error::from)?,
                        }
                        break;
                    }
                    None => {
                        writeln!(out, "invalid choice; enter 1-{}", question.options.len()).map_err(anyhow::Error::from)?;
                        continue;
                    }
                }
            }
            match cmd {
                "s" => {
                    skipped.push(question.id.clone());
                    break;
                }
                "q" => {
                    save(&session)?;
                    writeln!(out, "saved {} at version {}", session.id, session.version).map_err(anyhow::Error::from)?;
                    return Ok(ExitCode::SUCCESS);
                }
                _ => {
                    if apply_command(&mut session, &catalog, cmd, out, &save)? {
                        break;
                    }
                }
            }
        }
    }
    save(&session)?;
    writeln!(out, "saved {} at version {}", session.id, session.version).map_err(anyhow::Error::from)?;
    Ok(ExitCode::SUCCESS)
}

/// Reads one command when no question is pending. Returns false on quit or
/// end of input.
fn prompt_command(
    session: &mut Session,
    catalog: &Catalog,
    input: &mut impl BufRead,
    out: &mut impl Write,
    line: &mut String,
    save: &impl Fn(&Session) -> anyhow::Result<ledgerfit::store::Revision>,
) -> Result<bool, Failure> {
    write!(out, "> ").map_err(anyhow::Error::from)?;
    out.flush().map_err(anyhow::Error::from)?;
    line.clear();
    if input.read_line(line).map_err(anyhow::Error::from)? == 0 {
        return Ok(false);
    }
    let cmd = line.trim().to_string();
    if cmd == "q" {
        return Ok(false);
    }
    apply_command(session, catalog, &cmd, out, save)?;
    Ok(true)
}

/// Handles retract, override and wiki commands. Returns true when the
/// session changed so the caller should pick the next question again.
fn apply_command(
    session: &mut Session,
    catalog: &Catalog,
    cmd: &str,
    out: &mut impl Write,
    save: &impl Fn(&Session) -> anyhow::Result<ledgerfit::store::Revision>,
) -> Result<bool, Failure> {
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| Failure::Domain(e.into()));
    if let Some(qid) = cmd.strip_prefix("r ") {
        let version = session.version;
        return match session.retract_answer(catalog, qid.trim(), version, Utc::now()) {
            Ok(summary) => {
                save(session)?;
                report_change(out, &summary).map_err(anyhow::Error::from)?;
                Ok(true)
            }
            Err(e) => w(out, e.to_string()).map(|_| false),
        };
    }
    if cmd == "o" {
        let version = session.version;
        return match session.set_override(catalog, OverrideFlag::ProceedDespiteNotSuitable, None, version, Utc::now()) {
            Ok(_) => {
                save(session)?;
                w(out, "override recorded: proceed_despite_not_suitable".to_string())?;
                Ok(true)
            }
            Err(e) => w(out, e.to_string()).map(|_| false),
        };
    }
    if let Some(term) = cmd.strip_prefix("w ") {
        let text = match catalog.glossary_entry(term.trim()) {
            Some(g) => format!("{}: {}", g.term, g.definition),
            None => format!("no glossary entry for `{}`", term.trim()),
        };
        return w(out, text).map(|_| false);
    }
    w(out, format!("unrecognized input; {RUN_HELP}")).map(|_| false)
}

fn report_change(out: &mut impl Write, summary: &engine::ChangeSummary) -> io::Result<()> {
    for q in &summary.invalidated {
        writeln!(out, "invalidated: {q}")?;
    }
    for c in &summary.contradictions {
        writeln!(out, "contradiction on {}", c.subject)?;
    }
    for h in &summary.reopen_hints {
        writeln!(out, "hint: {}", h.message)?;
    }
    Ok(())
}
