mod interview;

use std::fs;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use ckb_core::breach::{self, assess_notification, assessment_report, fine_exposure, Assessment, BreachCase};
use ckb_core::disclosure::{generate_disclosure, render_disclosure_text, DisclosureMeta};
use ckb_core::explain::{
    build_trace, redact_trace, render_argument, render_argument_text, render_trace_text, DisclosureLevel,
};
use ckb_core::journal::{replay_journal, JournalStore};
use ckb_core::risk::{calibrate_rules, parse_cases_csv, rules_over};
use ckb_core::validate::validate_source;
use ckb_core::KnowledgeBase;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ckb", version, about = "Rule-based GDPR compliance decision support")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    /// JSON on stdout.
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a knowledge base.
    Validate { kb: PathBuf },
    /// Run an interview, interactively or from an answer file.
    Interview {
        kb: PathBuf,
        #[arg(long)]
        goal: String,
        /// `question_id = value` lines; omit for an interactive prompt.
        #[arg(long)]
        answers: Option<PathBuf>,
        /// Detail of the explanation in the report.
        #[arg(long, default_value = "full")]
        level: DisclosureLevel,
        /// Journal the session into this directory.
        #[arg(long)]
        journal: Option<PathBuf>,
        /// Session id for the journal.
        #[arg(long, requires = "journal")]
        session: Option<String>,
    },
    /// Personal-data breach tools.
    Breach {
        #[command(subcommand)]
        command: BreachCommand,
    },
    /// Find the lowest risk threshold that flags no negative case.
    Calibrate {
        kb: PathBuf,
        cases: PathBuf,
        /// Only use risk rules of this category.
        #[arg(long)]
        category: Option<String>,
    },
    /// Explain a journaled session.
    Explain {
        /// Journal directory, or one session's `.jsonl` file.
        journal: PathBuf,
        /// Defaults to the file name when a `.jsonl` file is given.
        #[arg(long)]
        session: Option<String>,
        #[arg(long, default_value = "full")]
        level: DisclosureLevel,
        /// Knowledge base the session was recorded against; the seed KB when omitted.
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Render the argument document for this pattern instead of the rule trace.
        #[arg(long)]
        pattern: Option<String>,
    },
    /// Generate an automated-decision disclosure from model metadata.
    Disclose { meta: PathBuf },
    /// Run the HTTP service.
    Serve {
        /// Knowledge base; the seed KB when omitted.
        #[arg(long, env = ckb_service::ENV_KB)]
        kb: Option<PathBuf>,
        #[arg(long, env = ckb_service::ENV_JOURNAL_DIR, default_value = "journal")]
        journal: PathBuf,
        #[arg(long, env = ckb_service::ENV_PORT, default_value_t = ckb_service::DEFAULT_PORT)]
        port: u16,
        #[arg(long, env = ckb_service::ENV_LISTEN, default_value = "127.0.0.1")]
        listen: IpAddr,
    },
}

#[derive(Subcommand)]
enum BreachCommand {
    /// Decide whether a breach case must be notified. Exits 3 when it must.
    Assess {
        case: PathBuf,
        /// Knowledge base; the seed KB when omitted.
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Evaluation time for the lateness check (RFC 3339); defaults to now.
        #[arg(long)]
        now: Option<DateTime<Utc>>,
    },
    /// Maximum administrative fine for an annual turnover.
    Fine {
        /// Worldwide annual turnover in whole euros.
        #[arg(long, allow_negative_numbers = true)]
        turnover: i64,
        #[arg(long, value_enum)]
        severity: SeverityArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SeverityArg {
    Lesser,
    Serious,
}

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOTIFY: u8 = 3;

/// A failure reported on stderr, with its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let format = cli.format;
    match cli.command {
        Command::Validate { kb } => validate(&kb, format),
        Command::Interview { kb, goal, answers, level, journal, session } => {
            let kb = load_kb(&kb)?;
            let opts = interview::Options { goal, answers, level, journal, session };
            interview::run(&kb, &opts, format)
        }
        Command::Breach { command: BreachCommand::Assess { case, kb, now } } => {
            breach_assess(&case, kb.as_deref(), now, format)
        }
        Command::Breach { command: BreachCommand::Fine { turnover, severity } } => fine(turnover, severity, format),
        Command::Calibrate { kb, cases, category } => calibrate(&kb, &cases, category.as_deref(), format),
        Command::Explain { journal, session, level, kb, pattern } => {
            explain(&journal, session, level, kb.as_deref(), pattern.as_deref(), format)
        }
        Command::Disclose { meta } => disclose(&meta, format),
        Command::Serve { kb, journal, port, listen } => {
            serve(ckb_service::Config { listen, port, kb_path: kb, journal_dir: journal })
        }
    }
}

pub fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

pub fn load_kb(path: &Path) -> Result<KnowledgeBase, Failure> {
    let text = read(path)?;
    ckb_core::dsl::parse_kb_named(&text, &path.display().to_string())
        .map_err(|e| Failure::input(format!("invalid knowledge base:\n{e}")))
}

fn load_kb_or_seed(path: Option<&Path>) -> Result<KnowledgeBase, Failure> {
    match path {
        Some(p) => load_kb(p),
        None => ckb_core::seed::seed_kb().map_err(|e| Failure::input(e.to_string())),
    }
}

pub fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

fn validate(path: &Path, format: Format) -> Outcome {
    let report = validate_source(&read(path)?, &path.display().to_string());
    let (errors, warnings) = (report.error_count(), report.warning_count());
    match format {
        Format::Structured => print_json(&serde_json::json!({
            "valid": report.is_valid(),
            "errors": errors,
            "warnings": warnings,
            "diagnostics": report.diagnostics,
        })),
        Format::Text => {
            for d in &report.diagnostics {
                println!("{d}");
            }
            println!("{errors} errors, {warnings} warnings");
        }
    }
    Ok(if report.is_valid() { 0 } else { EXIT_INPUT })
}

fn breach_assess(case: &Path, kb: Option<&Path>, now: Option<DateTime<Utc>>, format: Format) -> Outcome {
    let kb = load_kb_or_seed(kb)?;
    let case = BreachCase::parse(&kb, &read(case)?).map_err(|e| Failure::input(e.to_string()))?;
    let assessment =
        assess_notification(&kb, &case, now.unwrap_or_else(Utc::now)).map_err(|e| Failure::input(e.to_string()))?;
    match format {
        Format::Structured => print_json(&assessment),
        Format::Text => print!("{}", assessment_report(&kb, &assessment)),
    }
    let notify = matches!(&assessment, Assessment::Decided(d) if d.notify_required);
    Ok(if notify { EXIT_NOTIFY } else { 0 })
}

fn fine(turnover: i64, severity: SeverityArg, format: Format) -> Outcome {
    let severity = match severity {
        SeverityArg::Lesser => breach::Severity::Lesser,
        SeverityArg::Serious => breach::Severity::Serious,
    };
    let exposure = fine_exposure(turnover, severity).map_err(|e| Failure::usage(e.to_string()))?;
    match format {
        Format::Structured => print_json(&exposure),
        Format::Text => {
            println!("Turnover: {}", exposure.turnover);
            println!("Maximum fine: {}", exposure.cap);
            println!("{}", ckb_core::DISCLAIMER);
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct CalibrationOutput<'a> {
    rules: Vec<&'a str>,
    #[serde(flatten)]
    calibration: ckb_core::risk::Calibration,
}

fn calibrate(kb_path: &Path, cases: &Path, category: Option<&str>, format: Format) -> Outcome {
    let kb = load_kb(kb_path)?;
    let (header, cases) = parse_cases_csv(&kb, &read(cases)?).map_err(|e| Failure::input(e.to_string()))?;
    let rules: Vec<_> =
        rules_over(&kb, &header).into_iter().filter(|r| category.is_none_or(|c| r.category == c)).collect();
    if rules.is_empty() {
        return Err(Failure::input("no risk rule is fully covered by the case columns"));
    }
    let cal = calibrate_rules(&kb, &rules, &cases).map_err(|e| Failure::input(e.to_string()))?;
    match format {
        Format::Structured => {
            print_json(&CalibrationOutput { rules: rules.iter().map(|r| r.id.as_str()).collect(), calibration: cal })
        }
        Format::Text => {
            let ids: Vec<&str> = rules.iter().map(|r| r.id.as_str()).collect();
            println!("Rules: {}", ids.join(", "));
            println!("Cases: {} ({} positive, {} negative)", cases.len(), cal.positives, cal.negatives);
            println!("Threshold: {}", cal.threshold);
            println!("Recall: {:.3} ({}/{})", cal.recall, cal.positives_flagged, cal.positives);
            println!("False positives: {}", cal.false_positives);
        }
    }
    Ok(0)
}

fn explain(
    journal: &Path,
    session: Option<String>,
    level: DisclosureLevel,
    kb: Option<&Path>,
    pattern: Option<&str>,
    format: Format,
) -> Outcome {
    let (dir, session) = if journal.is_file() {
        let stem = journal.file_stem().and_then(|s| s.to_str()).map(str::to_string);
        let dir = journal.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        (dir, session.or(stem))
    } else {
        (journal.to_path_buf(), session)
    };
    let session = session.ok_or_else(|| Failure::usage("--session is required with a journal directory"))?;
    let kb = load_kb_or_seed(kb)?;
    let store = JournalStore::open(&dir).map_err(|e| Failure::input(e.to_string()))?;
    let s = replay_journal(&store, &kb, &session).map_err(|e| Failure::input(e.to_string()))?;
    if let Some(p) = pattern {
        let doc = render_argument(&kb, p, &s).map_err(|e| Failure::input(e.to_string()))?;
        match format {
            Format::Structured => print_json(&doc),
            Format::Text => print!("{}", render_argument_text(&doc)),
        }
        return Ok(0);
    }
    let trace = build_trace(&kb, &s).map_err(|e| Failure::input(e.to_string()))?;
    let trace = redact_trace(&trace, level);
    match format {
        Format::Structured => print_json(&trace),
        Format::Text => print!("{}", render_trace_text(&trace)),
    }
    Ok(0)
}

fn disclose(meta: &Path, format: Format) -> Outcome {
    let meta = DisclosureMeta::parse(&read(meta)?).map_err(|e| Failure::input(e.to_string()))?;
    let doc = generate_disclosure(&meta).map_err(|e| Failure::input(e.to_string()))?;
    match format {
        Format::Structured => print_json(&doc),
        Format::Text => print!("{}", render_disclosure_text(&doc)),
    }
    Ok(0)
}

fn serve(config: ckb_service::Config) -> Outcome {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::input(e.to_string()))?;
    runtime.block_on(ckb_service::serve(config)).map_err(|e| Failure::input(e.to_string()))?;
    Ok(0)
}
