//! Personal-data breach assessment: taxonomy classification, the
//! notification decision, the 72-hour deadline and fine exposure.
//!
//! The taxonomy is read from fixed question ids (see [`taxonomy`]). The
//! notification exception is the KB rule [`EXCEPTION_RULE`]; risk rules whose
//! category starts with `breach` make up the attached risk report.

use std::fmt::{self, Write as _};

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::eval::{Evaluator, Facts, Tri};
use crate::explain::{self, ExplanationTrace};
use crate::model::{Expr, KnowledgeBase, Value};
use crate::risk::{self, RiskReport};
use crate::textio::{self, TextError};
use crate::DISCLAIMER;

pub const EXCEPTION_RULE: &str = "breach.unlikely_risk";
pub const RISK_CATEGORY_PREFIX: &str = "breach";
pub const NOTIFICATION_WINDOW_SECS: i64 = 72 * 3600;

pub mod taxonomy {
    pub const PERSONAL_DATA: &str = "breach.personal_data";
    pub const DESTRUCTION: &str = "breach.destruction";
    pub const LOSS: &str = "breach.loss";
    pub const ALTERATION: &str = "breach.alteration";
    pub const DISCLOSURE: &str = "breach.disclosure";
    pub const ACCESS: &str = "breach.access";
    /// Enum question with labels `accidental` and `unlawful`.
    pub const CAUSE: &str = "breach.cause";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreachCategory {
    Destruction,
    Loss,
    Alteration,
    UnauthorizedDisclosure,
    UnauthorizedAccess,
}

impl BreachCategory {
    pub const ALL: [BreachCategory; 5] = [
        BreachCategory::Destruction,
        BreachCategory::Loss,
        BreachCategory::Alteration,
        BreachCategory::UnauthorizedDisclosure,
        BreachCategory::UnauthorizedAccess,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BreachCategory::Destruction => "destruction",
            BreachCategory::Loss => "loss",
            BreachCategory::Alteration => "alteration",
            BreachCategory::UnauthorizedDisclosure => "unauthorized_disclosure",
            BreachCategory::UnauthorizedAccess => "unauthorized_access",
        }
    }

    /// The taxonomy question that justifies this category.
    pub fn question(self) -> &'static str {
        match self {
            BreachCategory::Destruction => taxonomy::DESTRUCTION,
            BreachCategory::Loss => taxonomy::LOSS,
            BreachCategory::Alteration => taxonomy::ALTERATION,
            BreachCategory::UnauthorizedDisclosure => taxonomy::DISCLOSURE,
            BreachCategory::UnauthorizedAccess => taxonomy::ACCESS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreachCause {
    Accidental,
    Unlawful,
}

impl BreachCause {
    pub fn as_str(self) -> &'static str {
        match self {
            BreachCause::Accidental => "accidental",
            BreachCause::Unlawful => "unlawful",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryJustification {
    pub category: BreachCategory,
    pub question_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreachClass {
    /// Non-empty, in taxonomy order.
    pub categories: Vec<BreachCategory>,
    pub cause: BreachCause,
    /// Links each category to the answered fact that justifies it.
    pub justification: Vec<CategoryJustification>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BreachError {
    #[error("taxonomy questions unanswered: {}", .0.join(", "))]
    MissingTaxonomy(Vec<String>),
    #[error("not a personal-data breach: {0}")]
    NoCategory(String),
    #[error("knowledge base has no rule {0}")]
    MissingExceptionRule(String),
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("{question}: expected {expected}")]
    TypeMismatch { question: String, expected: String },
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("invalid awareness_time {0:?} (expected RFC 3339 UTC)")]
    BadTimestamp(String),
    #[error("negative turnover {0}")]
    NegativeTurnover(i64),
    #[error("fine computation overflows for turnover {0}")]
    Overflow(i64),
    #[error(transparent)]
    Text(#[from] TextError),
}

pub fn classify_breach(facts: &Facts) -> Result<BreachClass, BreachError> {
    let missing: Vec<String> = [taxonomy::PERSONAL_DATA]
        .into_iter()
        .chain(BreachCategory::ALL.iter().map(|c| c.question()))
        .chain([taxonomy::CAUSE])
        .filter(|q| !facts.contains_key(*q))
        .map(str::to_string)
        .collect();
    // Without personal data the remaining answers do not matter.
    if facts.get(taxonomy::PERSONAL_DATA) == Some(&Value::Bool(false)) {
        return Err(BreachError::NoCategory("no personal data was affected".into()));
    }
    if !missing.is_empty() {
        return Err(BreachError::MissingTaxonomy(missing));
    }
    let mut categories = Vec::new();
    let mut justification = Vec::new();
    for c in BreachCategory::ALL {
        if facts.get(c.question()) == Some(&Value::Bool(true)) {
            categories.push(c);
            justification.push(CategoryJustification { category: c, question_id: c.question().to_string() });
        }
    }
    if categories.is_empty() {
        return Err(BreachError::NoCategory(
            "none of destruction, loss, alteration, disclosure or access occurred".into(),
        ));
    }
    let cause = match facts.get(taxonomy::CAUSE) {
        Some(Value::Label(l)) if l == "accidental" => BreachCause::Accidental,
        Some(Value::Label(l)) if l == "unlawful" => BreachCause::Unlawful,
        _ => {
            return Err(BreachError::TypeMismatch {
                question: taxonomy::CAUSE.to_string(),
                expected: "accidental or unlawful".into(),
            })
        }
    };
    Ok(BreachClass { categories, cause, justification })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreachCase {
    pub case_id: String,
    pub awareness_time: DateTime<Utc>,
    pub facts: Facts,
    #[serde(default)]
    pub narrative: String,
}

impl BreachCase {
    /// Read the `key = value` form: `case_id`, `awareness_time`, `narrative`,
    /// and one line per answered KB question.
    pub fn parse(kb: &KnowledgeBase, text: &str) -> Result<BreachCase, BreachError> {
        let mut case_id = None;
        let mut awareness = None;
        let mut narrative = String::new();
        let mut facts = Facts::new();
        for kv in textio::parse_key_values(text)? {
            match kv.key.as_str() {
                "case_id" => case_id = Some(kv.value),
                "awareness_time" => {
                    let t = DateTime::parse_from_rfc3339(&kv.value)
                        .map_err(|_| BreachError::BadTimestamp(kv.value.clone()))?;
                    awareness = Some(t.with_timezone(&Utc));
                }
                "narrative" => narrative = kv.value,
                _ => {
                    if facts.contains_key(&kv.key) {
                        return Err(TextError::Duplicate { line: kv.line, id: kv.key }.into());
                    }
                    let v = textio::answer_value(kb, &kv)?;
                    facts.insert(kv.key, v);
                }
            }
        }
        Ok(BreachCase {
            case_id: case_id.ok_or(BreachError::MissingField("case_id"))?,
            awareness_time: awareness.ok_or(BreachError::MissingField("awareness_time"))?,
            facts,
            narrative,
        })
    }

    /// Check every fact against the KB's questions.
    pub fn check(&self, kb: &KnowledgeBase) -> Result<(), BreachError> {
        for (q, v) in &self.facts {
            let question = kb.question(q).ok_or_else(|| BreachError::UnknownQuestion(q.clone()))?;
            if !v.matches(&question.answer_kind) {
                return Err(BreachError::TypeMismatch {
                    question: q.clone(),
                    expected: textio::expected_form(&question.answer_kind),
                });
            }
        }
        Ok(())
    }
}

pub fn notification_deadline(awareness: DateTime<Utc>) -> DateTime<Utc> {
    awareness + Duration::seconds(NOTIFICATION_WINDOW_SECS)
}

/// Reasons for lateness are owed only strictly after the deadline.
pub fn late_reasons_required(deadline: DateTime<Utc>, now: DateTime<Utc>) -> bool {
    now > deadline
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationDecision {
    pub case_id: String,
    pub classification: BreachClass,
    pub notify_required: bool,
    pub exception_rule: String,
    pub exception_holds: bool,
    pub rationale: ExplanationTrace,
    pub risk_report: RiskReport,
    pub awareness_time: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<DateTime<Utc>>,
    pub late_reasons_required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Assessment {
    Decided(NotificationDecision),
    /// Some risk rule or the exception cannot be decided yet.
    NeedsMoreFacts {
        case_id: String,
        classification: BreachClass,
        pending: Vec<String>,
        undetermined: Vec<String>,
    },
}

pub fn assess_notification(
    kb: &KnowledgeBase,
    case: &BreachCase,
    now: DateTime<Utc>,
) -> Result<Assessment, BreachError> {
    case.check(kb)?;
    let exception =
        kb.rule(EXCEPTION_RULE).ok_or_else(|| BreachError::MissingExceptionRule(EXCEPTION_RULE.to_string()))?;
    let classification = classify_breach(&case.facts)?;

    let breach_rules: Vec<_> =
        kb.risk_rules.values().filter(|r| r.category.starts_with(RISK_CATEGORY_PREFIX)).collect();
    let risk_report = risk::score_rules(kb, breach_rules.iter().copied(), &case.facts);
    let ev = Evaluator::new(kb);
    let exception_value = ev.value(&exception.expr, &case.facts);

    let mut undetermined = risk_report.undetermined.clone();
    if exception_value == Tri::Unknown {
        undetermined.push(EXCEPTION_RULE.to_string());
    }
    if !undetermined.is_empty() {
        let mut pending: Vec<String> = Vec::new();
        let mut exprs: Vec<&Expr> =
            breach_rules.iter().filter(|r| risk_report.undetermined.contains(&r.id)).map(|r| &r.expr).collect();
        if exception_value == Tri::Unknown {
            exprs.push(&exception.expr);
        }
        for e in exprs {
            for q in ev.open_questions(e, &case.facts) {
                if !pending.contains(&q) && ev.is_relevant(e, &case.facts, &q) {
                    pending.push(q);
                }
            }
        }
        return Ok(Assessment::NeedsMoreFacts { case_id: case.case_id.clone(), classification, pending, undetermined });
    }

    let exception_holds = exception_value == Tri::True;
    let notify_required = !exception_holds;
    let fired: Vec<String> = risk_report.fired.iter().map(|f| f.risk_rule_id.clone()).collect();
    let rationale = explain::trace_facts(kb, &case.facts, EXCEPTION_RULE, &fired)
        .expect("exception rule is determined, so the trace has a step");
    let deadline = notify_required.then(|| notification_deadline(case.awareness_time));
    Ok(Assessment::Decided(NotificationDecision {
        case_id: case.case_id.clone(),
        classification,
        notify_required,
        exception_rule: EXCEPTION_RULE.to_string(),
        exception_holds,
        rationale,
        risk_report,
        awareness_time: case.awareness_time,
        late_reasons_required: deadline.is_some_and(|d| late_reasons_required(d, now)),
        deadline,
    }))
}

fn ts(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// The assessment in `key = value` form; list fields repeat their key.
pub fn assessment_to_text(a: &Assessment) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: &str| {
        let _ = writeln!(out, "{k} = {v}");
    };
    match a {
        Assessment::Decided(d) => {
            kv("case_id", &d.case_id);
            kv("outcome", if d.notify_required { "notify" } else { "no_notify" });
            kv("notify_required", yes_no(d.notify_required));
            for c in &d.classification.categories {
                kv("category", c.as_str());
            }
            kv("cause", d.classification.cause.as_str());
            kv("exception_rule", &d.exception_rule);
            kv("exception_holds", yes_no(d.exception_holds));
            kv("awareness_time", &ts(d.awareness_time));
            if let Some(deadline) = d.deadline {
                kv("deadline", &ts(deadline));
            }
            kv("late_reasons_required", yes_no(d.late_reasons_required));
            kv("risk_total", &d.risk_report.total.to_string());
            for (cat, score) in &d.risk_report.per_category {
                kv(&format!("risk.{cat}"), &score.to_string());
            }
            for f in &d.risk_report.fired {
                kv("fired", &f.risk_rule_id);
            }
        }
        Assessment::NeedsMoreFacts { case_id, classification, pending, undetermined } => {
            kv("case_id", case_id);
            kv("outcome", "needs_more_facts");
            for c in &classification.categories {
                kv("category", c.as_str());
            }
            kv("cause", classification.cause.as_str());
            for p in pending {
                kv("pending", p);
            }
            for u in undetermined {
                kv("undetermined", u);
            }
        }
    }
    out
}

pub fn assessment_report(kb: &KnowledgeBase, a: &Assessment) -> String {
    let mut out = String::new();
    match a {
        Assessment::Decided(d) => {
            let _ = writeln!(out, "Breach case {}", d.case_id);
            let cats: Vec<_> = d.classification.categories.iter().map(|c| c.as_str()).collect();
            let _ = writeln!(out, "Classification: {} ({})", cats.join(", "), d.classification.cause.as_str());
            if d.notify_required {
                let deadline = d.deadline.expect("deadline set when notifying");
                let _ = writeln!(out, "Decision: notify the supervisory authority by {}", ts(deadline));
                if d.late_reasons_required {
                    let _ = writeln!(
                        out,
                        "The deadline has passed: reasons for the delay must accompany the notification."
                    );
                }
            } else {
                let _ = writeln!(out, "Decision: notification not required ({} holds)", d.exception_rule);
            }
            let _ = writeln!(out, "Risk score: {}", d.risk_report.total);
            for f in &d.risk_report.fired {
                let _ = writeln!(out, "  - {} [{}] {} (+{})", f.risk_rule_id, f.category, f.level.keyword(), f.weight);
            }
            let _ = writeln!(out, "Rationale:");
            for line in explain::render_trace_text(&d.rationale).lines() {
                if line != DISCLAIMER {
                    let _ = writeln!(out, "  {line}");
                }
            }
        }
        Assessment::NeedsMoreFacts { case_id, pending, undetermined, .. } => {
            let _ = writeln!(out, "Breach case {case_id}");
            let _ = writeln!(out, "Decision: more facts needed");
            let _ = writeln!(out, "Undetermined: {}", undetermined.join(", "));
            let _ = writeln!(out, "Please answer:");
            for q in pending {
                let text = kb.question(q).map_or("", |q| q.text.as_str());
                let _ = writeln!(out, "  - {q}: {text}");
            }
        }
    }
    let _ = writeln!(out, "{DISCLAIMER}");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Lesser,
    Serious,
}

impl Severity {
    /// Fixed floor and turnover percentage of the cap.
    fn terms(self) -> (i64, i64) {
        match self {
            Severity::Lesser => (10_000_000, 2),
            Severity::Serious => (20_000_000, 4),
        }
    }
}

/// An amount of euros held as integer cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Money {
    pub cents: i64,
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let euros = self.cents / 100;
        let digits = euros.to_string();
        let mut grouped = String::new();
        for (i, ch) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i).is_multiple_of(3) {
                grouped.push(',');
            }
            grouped.push(ch);
        }
        write!(f, "EUR {grouped}.{:02}", self.cents % 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineExposure {
    pub severity: Severity,
    pub turnover: Money,
    pub cap: Money,
}

/// Maximum fine: the larger of the tier's fixed floor and its percentage of
/// annual turnover. Turnover is in whole euros.
pub fn fine_exposure(turnover_eur: i64, severity: Severity) -> Result<FineExposure, BreachError> {
    if turnover_eur < 0 {
        return Err(BreachError::NegativeTurnover(turnover_eur));
    }
    let (floor_eur, percent) = severity.terms();
    // percent% of T euros is exactly percent * T cents.
    let share = turnover_eur.checked_mul(percent).ok_or(BreachError::Overflow(turnover_eur))?;
    let turnover = turnover_eur.checked_mul(100).ok_or(BreachError::Overflow(turnover_eur))?;
    Ok(FineExposure { severity, turnover: Money { cents: turnover }, cap: Money { cents: share.max(floor_eur * 100) } })
}
