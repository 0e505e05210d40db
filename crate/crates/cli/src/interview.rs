//! Terminal interviews: scripted from an answer file or prompted on stdin.

use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use chrono::Utc;
use ckb_core::engine::{self, NextStep, Session, Verdict, VerdictValue};
use ckb_core::explain::{build_trace, redact_trace, render_trace_text, DisclosureLevel, ExplanationTrace};
use ckb_core::journal::JournalStore;
use ckb_core::model::{Question, Value};
use ckb_core::textio::{expected_form, parse_answers, parse_value, value_to_json};
use ckb_core::KnowledgeBase;
use serde::Serialize;

use crate::{print_json, read, Failure, Format, Outcome};

pub struct Options {
    pub goal: String,
    pub answers: Option<PathBuf>,
    pub level: DisclosureLevel,
    pub journal: Option<PathBuf>,
    pub session: Option<String>,
}

/// Writes new session events to the journal as the interview proceeds.
struct Recorder {
    store: JournalStore,
    persisted: u64,
}

impl Recorder {
    fn flush(&mut self, session: &Session) -> Result<(), Failure> {
        self.store.append_session_events(session, self.persisted).map_err(|e| Failure::input(e.to_string()))?;
        self.persisted = session.events.last().map_or(0, |e| e.seq);
        Ok(())
    }
}

pub fn run(kb: &KnowledgeBase, opts: &Options, format: Format) -> Outcome {
    let session_id = opts
        .session
        .clone()
        .unwrap_or_else(|| format!("{}-{}", opts.goal.replace('.', "_"), Utc::now().format("%Y%m%dT%H%M%S")));
    let mut session =
        engine::start_session(kb, &opts.goal, session_id, Utc::now()).map_err(|e| Failure::usage(e.to_string()))?;
    let mut recorder = match &opts.journal {
        Some(dir) => {
            Some(Recorder { store: JournalStore::open(dir).map_err(|e| Failure::input(e.to_string()))?, persisted: 0 })
        }
        None => None,
    };
    let script = match &opts.answers {
        Some(path) => {
            Some(parse_answers(kb, &read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };

    let stdin = io::stdin();
    let mut input = stdin.lock();
    let verdict = loop {
        if let Some(r) = recorder.as_mut() {
            r.flush(&session)?;
        }
        let question = match engine::next_question(kb, &mut session, Utc::now()) {
            NextStep::Concluded { verdict } => break verdict,
            NextStep::Question { question } => question,
        };
        let value = match &script {
            Some(answers) => answers.iter().find(|(q, _)| *q == question.id).map(|(_, v)| v.clone()),
            None => prompt(kb, &question, &mut input).map_err(|e| Failure::input(e.to_string()))?,
        };
        // An unscripted question or end of input leaves the goal undecided.
        let Some(value) = value else { break engine::evaluate_goal(kb, &session) };
        engine::submit_answer(kb, &mut session, &question.id, value, Utc::now())
            .map_err(|e| Failure::input(e.to_string()))?;
    };
    if let Some(r) = recorder.as_mut() {
        r.flush(&session)?;
    }

    let not_asked: Vec<String> =
        script.iter().flatten().filter(|(q, _)| !session.answers.contains_key(q)).map(|(q, _)| q.clone()).collect();
    let trace = build_trace(kb, &session).ok().map(|t| redact_trace(&t, opts.level));
    let report =
        Report { session_id: &session.session_id, verdict: &verdict, asked: asked(&session), not_asked, trace };
    match format {
        Format::Structured => print_json(&report),
        Format::Text => print!("{}", report.text(kb)),
    }
    Ok(0)
}

#[derive(Serialize)]
struct AskedQuestion {
    question_id: String,
    value: serde_json::Value,
    #[serde(skip)]
    display: String,
}

fn asked(session: &Session) -> Vec<AskedQuestion> {
    session
        .answers
        .values()
        .map(|a| AskedQuestion {
            question_id: a.question_id.clone(),
            value: value_to_json(&a.value),
            display: a.value.to_string(),
        })
        .collect()
}

#[derive(Serialize)]
struct Report<'a> {
    session_id: &'a str,
    verdict: &'a Verdict,
    asked: Vec<AskedQuestion>,
    /// Scripted answers the interview never needed.
    not_asked: Vec<String>,
    trace: Option<ExplanationTrace>,
}

impl Report<'_> {
    /// Human-readable report. Contains no timestamps or session ids, so the
    /// same KB and answer file always give the same bytes.
    fn text(&self, kb: &KnowledgeBase) -> String {
        let mut out = String::new();
        out.push_str(&format!("Questions asked: {}\n", self.asked.len()));
        for a in &self.asked {
            out.push_str(&format!("  {} = {}\n", a.question_id, a.display));
        }
        if !self.not_asked.is_empty() {
            out.push_str(&format!("Not needed: {}\n", self.not_asked.join(", ")));
        }
        out.push('\n');
        match (&self.trace, self.verdict.value) {
            (Some(trace), v) if v != VerdictValue::Unknown => out.push_str(&render_trace_text(trace)),
            _ => {
                out.push_str(&format!("Goal: {}\nVerdict: unknown\n", self.verdict.goal));
                let pending: Vec<String> =
                    self.verdict.pending.iter().map(|q| format!("  {q}: {}", kb.questions[q.as_str()].text)).collect();
                out.push_str(&format!("Still needed:\n{}\n", pending.join("\n")));
                out.push_str(ckb_core::DISCLAIMER);
                out.push('\n');
            }
        }
        out
    }
}

/// Ask on stderr until a valid answer arrives. `?` shows the question's help
/// and provisions; end of input or `quit` stops the interview.
fn prompt(kb: &KnowledgeBase, q: &Question, input: &mut impl BufRead) -> io::Result<Option<Value>> {
    let mut err = io::stderr();
    loop {
        write!(err, "{}\n  [{}, ? for help] > ", q.text, expected_form(&q.answer_kind))?;
        err.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            writeln!(err)?;
            return Ok(None);
        }
        let line = line.trim();
        match line {
            "quit" | "exit" => return Ok(None),
            "?" => writeln!(err, "{}", help(kb, q))?,
            _ => match parse_value(q, line) {
                Some(v) => return Ok(Some(v)),
                None => writeln!(err, "  expected {}", expected_form(&q.answer_kind))?,
            },
        }
    }
}

fn help(kb: &KnowledgeBase, q: &Question) -> String {
    let mut lines = Vec::new();
    if let Some(h) = &q.help_text {
        lines.push(format!("  {h}"));
    }
    if q.interpretive {
        lines.push("  This question turns on a term that is open to interpretation.".to_string());
    }
    for id in &q.provision_refs {
        let Some(p) = kb.provisions.get(id) else { continue };
        let binding = if p.binding { "" } else { " (non-binding)" };
        lines.push(format!("  {} {}{binding}", p.instrument, p.article_or_recital));
        if let Some(quote) = &p.quote {
            lines.push(format!("    \"{quote}\""));
        }
    }
    if lines.is_empty() {
        lines.push("  No further guidance for this question.".to_string());
    }
    lines.join("\n")
}
