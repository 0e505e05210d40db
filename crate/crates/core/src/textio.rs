//! Plain-text `key = value` documents: answer files, breach cases and
//! disclosure metadata all use this format. Blank lines and `#` comments are
//! ignored; a key may repeat where a list is expected.

use chrono::NaiveDate;

use crate::model::{AnswerKind, KnowledgeBase, Question, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown question {id}")]
    UnknownQuestion { line: usize, id: String },
    #[error("line {line}: {id}: expected {expected}, got {got:?}")]
    BadValue { line: usize, id: String, expected: String, got: String },
    #[error("line {line}: {id} given more than once")]
    Duplicate { line: usize, id: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyValue {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_key_values(text: &str) -> Result<Vec<KeyValue>, TextError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(TextError::Syntax { line: i + 1 })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(TextError::Syntax { line: i + 1 });
        }
        out.push(KeyValue { line: i + 1, key: key.to_string(), value: unquote(value.trim()).to_string() });
    }
    Ok(out)
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(s)
}

/// Read an answer typed at a prompt or in a file.
pub fn parse_value(question: &Question, raw: &str) -> Option<Value> {
    let raw = unquote(raw.trim());
    match &question.answer_kind {
        AnswerKind::Boolean => match raw.to_ascii_lowercase().as_str() {
            "yes" | "y" | "true" => Some(Value::Bool(true)),
            "no" | "n" | "false" => Some(Value::Bool(false)),
            _ => None,
        },
        AnswerKind::Enum { labels } => labels.iter().find(|l| *l == raw).map(|l| Value::Label(l.clone())),
        AnswerKind::Number { .. } => raw.parse::<f64>().ok().filter(|n| n.is_finite()).map(Value::Number),
        AnswerKind::Date => NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok().map(Value::Date),
    }
}

/// Read a plain JSON scalar as an answer: booleans, label strings, numbers
/// and `YYYY-MM-DD` strings.
pub fn value_from_json(question: &Question, json: &serde_json::Value) -> Option<Value> {
    use serde_json::Value as J;
    match (&question.answer_kind, json) {
        (AnswerKind::Boolean, J::Bool(b)) => Some(Value::Bool(*b)),
        (AnswerKind::Enum { labels }, J::String(s)) => labels.contains(s).then(|| Value::Label(s.clone())),
        (AnswerKind::Number { .. }, J::Number(n)) => n.as_f64().filter(|n| n.is_finite()).map(Value::Number),
        (AnswerKind::Date, J::String(s)) => NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(Value::Date),
        _ => None,
    }
}

pub fn value_to_json(value: &Value) -> serde_json::Value {
    match value {
        Value::Bool(b) => serde_json::Value::Bool(*b),
        Value::Label(l) => serde_json::Value::String(l.clone()),
        Value::Number(n) => serde_json::Number::from_f64(*n).map_or(serde_json::Value::Null, serde_json::Value::Number),
        Value::Date(d) => serde_json::Value::String(d.format("%Y-%m-%d").to_string()),
    }
}

/// Parse a scripted answer file, keeping the file's order.
pub fn parse_answers(kb: &KnowledgeBase, text: &str) -> Result<Vec<(String, Value)>, TextError> {
    let mut out: Vec<(String, Value)> = Vec::new();
    for kv in parse_key_values(text)? {
        if out.iter().any(|(q, _)| *q == kv.key) {
            return Err(TextError::Duplicate { line: kv.line, id: kv.key });
        }
        let value = answer_value(kb, &kv)?;
        out.push((kv.key, value));
    }
    Ok(out)
}

/// Type-check one `question = value` entry against the knowledge base.
pub fn answer_value(kb: &KnowledgeBase, kv: &KeyValue) -> Result<Value, TextError> {
    let q = kb.question(&kv.key).ok_or_else(|| TextError::UnknownQuestion { line: kv.line, id: kv.key.clone() })?;
    parse_value(q, &kv.value).ok_or_else(|| TextError::BadValue {
        line: kv.line,
        id: kv.key.clone(),
        expected: expected_form(&q.answer_kind),
        got: kv.value.clone(),
    })
}

pub fn expected_form(kind: &AnswerKind) -> String {
    match kind {
        AnswerKind::Boolean => "yes or no".into(),
        AnswerKind::Enum { labels } => format!("one of {}", labels.join(", ")),
        AnswerKind::Number { unit } if !unit.is_empty() => format!("a number ({unit})"),
        AnswerKind::Number { .. } => "a number".into(),
        AnswerKind::Date => "a date (YYYY-MM-DD)".into(),
    }
}
