//! Profiling disclosures built from operator-supplied model metadata.
//!
//! The document explains what an automated decision system does, what
//! follows from its errors, and what a data subject gains or loses by opting
//! out. Nothing here inspects the model itself.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::textio::{self, TextError};
use crate::DISCLAIMER;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosureMeta {
    pub model_name: Option<String>,
    #[serde(default)]
    pub data_sources: Vec<String>,
    pub method: Option<String>,
    pub feature_count: Option<u32>,
    #[serde(default)]
    pub decisions_made: Vec<String>,
    pub false_positive_consequence: Option<String>,
    pub omission_consequence: Option<String>,
    #[serde(default)]
    pub benefits: Vec<String>,
    #[serde(default)]
    pub downsides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DisclosureError {
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("field {0} must not be empty")]
    EmptyField(&'static str),
    #[error("line {line}: unknown field {key}")]
    UnknownField { line: usize, key: String },
    #[error("line {line}: feature_count must be a non-negative integer")]
    BadFeatureCount { line: usize },
    #[error(transparent)]
    Text(#[from] TextError),
}

impl DisclosureMeta {
    /// Read the `key = value` form. List fields use the singular key once per
    /// item: `data_source`, `decision`, `benefit`, `downside`.
    pub fn parse(text: &str) -> Result<DisclosureMeta, DisclosureError> {
        let mut m = DisclosureMeta::default();
        for kv in textio::parse_key_values(text)? {
            let v = kv.value;
            match kv.key.as_str() {
                "model_name" => m.model_name = Some(v),
                "data_source" => m.data_sources.push(v),
                "method" => m.method = Some(v),
                "feature_count" => {
                    m.feature_count = Some(v.parse().map_err(|_| DisclosureError::BadFeatureCount { line: kv.line })?)
                }
                "decision" => m.decisions_made.push(v),
                "false_positive_consequence" => m.false_positive_consequence = Some(v),
                "omission_consequence" => m.omission_consequence = Some(v),
                "benefit" => m.benefits.push(v),
                "downside" => m.downsides.push(v),
                _ => return Err(DisclosureError::UnknownField { line: kv.line, key: kv.key }),
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TechnicalDescription {
    pub data_sources: Vec<String>,
    pub method: String,
    pub feature_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionContext {
    pub decisions_made: Vec<String>,
    pub false_positive_consequence: String,
    pub omission_consequence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptOutTradeoffs {
    pub benefits: Vec<String>,
    pub downsides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosureDocument {
    pub model_name: String,
    pub technical_description: TechnicalDescription,
    pub decision_context: DecisionContext,
    pub optout_tradeoffs: OptOutTradeoffs,
}

fn text(v: &Option<String>, name: &'static str) -> Result<String, DisclosureError> {
    match v.as_deref().map(str::trim) {
        None => Err(DisclosureError::MissingField(name)),
        Some("") => Err(DisclosureError::EmptyField(name)),
        Some(s) => Ok(s.to_string()),
    }
}

fn list(v: &[String], name: &'static str) -> Result<Vec<String>, DisclosureError> {
    let items: Vec<String> = v.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(DisclosureError::EmptyField(name));
    }
    Ok(items)
}

pub fn generate_disclosure(meta: &DisclosureMeta) -> Result<DisclosureDocument, DisclosureError> {
    Ok(DisclosureDocument {
        model_name: text(&meta.model_name, "model_name")?,
        technical_description: TechnicalDescription {
            data_sources: list(&meta.data_sources, "data_sources")?,
            method: text(&meta.method, "method")?,
            feature_count: meta.feature_count.ok_or(DisclosureError::MissingField("feature_count"))?,
        },
        decision_context: DecisionContext {
            decisions_made: list(&meta.decisions_made, "decisions_made")?,
            false_positive_consequence: text(&meta.false_positive_consequence, "false_positive_consequence")?,
            omission_consequence: text(&meta.omission_consequence, "omission_consequence")?,
        },
        optout_tradeoffs: OptOutTradeoffs {
            benefits: list(&meta.benefits, "benefits")?,
            downsides: list(&meta.downsides, "downsides")?,
        },
    })
}

pub fn render_disclosure_text(doc: &DisclosureDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Automated decision-making disclosure: {}", doc.model_name);
    let _ = writeln!(out);
    let t = &doc.technical_description;
    let _ = writeln!(out, "1. How the system works");
    let _ = writeln!(out, "   Data sources: {}", t.data_sources.join("; "));
    let _ = writeln!(out, "   Method: {}", t.method);
    let _ = writeln!(out, "   Features used: {}", t.feature_count);
    let c = &doc.decision_context;
    let _ = writeln!(out, "2. Significance and consequences");
    let _ = writeln!(out, "   Decisions made: {}", c.decisions_made.join("; "));
    let _ = writeln!(out, "   If it wrongly flags you: {}", c.false_positive_consequence);
    let _ = writeln!(out, "   If it wrongly misses a case: {}", c.omission_consequence);
    let o = &doc.optout_tradeoffs;
    let _ = writeln!(out, "3. Opting out");
    let _ = writeln!(out, "   Benefits of automated processing:");
    for b in &o.benefits {
        let _ = writeln!(out, "   - {b}");
    }
    let _ = writeln!(out, "   Downsides of opting out:");
    for d in &o.downsides {
        let _ = writeln!(out, "   - {d}");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{DISCLAIMER}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const META: &str = "\
model_name = Loan pre-screen
data_source = application form
method = production rules
feature_count = 12
decision = refer application for manual review
false_positive_consequence = application delayed while a person reviews it
omission_consequence = unaffordable credit may be offered
benefit = decision within minutes
downside = manual review takes up to ten days
";

    #[test]
    fn complete_metadata() {
        let doc = generate_disclosure(&DisclosureMeta::parse(META).unwrap()).unwrap();
        assert_eq!(doc.technical_description.feature_count, 12);
        assert_eq!(doc.technical_description.data_sources, ["application form"]);
        assert!(render_disclosure_text(&doc).contains("3. Opting out"));
    }

    #[test]
    fn missing_field_is_named() {
        let text: String = META.lines().filter(|l| !l.starts_with("omission")).map(|l| format!("{l}\n")).collect();
        let err = generate_disclosure(&DisclosureMeta::parse(&text).unwrap()).unwrap_err();
        assert_eq!(err, DisclosureError::MissingField("omission_consequence"));
        assert!(err.to_string().contains("omission_consequence"));
    }

    #[test]
    fn empty_benefits_rejected() {
        let text: String = META.lines().filter(|l| !l.starts_with("benefit")).map(|l| format!("{l}\n")).collect();
        let err = generate_disclosure(&DisclosureMeta::parse(&text).unwrap()).unwrap_err();
        assert_eq!(err, DisclosureError::EmptyField("benefits"));
    }

    #[test]
    fn empty_consequence_rejected() {
        let text = META.replace("omission_consequence = unaffordable credit may be offered", "omission_consequence =");
        let err = generate_disclosure(&DisclosureMeta::parse(&text).unwrap()).unwrap_err();
        assert_eq!(err, DisclosureError::EmptyField("omission_consequence"));
    }
}
