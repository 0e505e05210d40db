//! Additive risk scoring.
//!
//! Each risk rule that holds contributes the weight of its level; scores are
//! summed per category and overall. Rules whose value is still unknown
//! contribute nothing and are listed as undetermined.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eval::{Evaluator, Facts, Tri};
use crate::model::{KnowledgeBase, RiskLevel, RiskRule};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RiskError {
    #[error("no labeled cases")]
    NoCases,
    #[error("case {case}: risk rules undetermined: {}", rules.join(", "))]
    Undetermined { case: usize, rules: Vec<String> },
    #[error("report has undetermined risk rules: {}", .0.join(", "))]
    UndeterminedReport(Vec<String>),
    #[error("cases file line {line}: {message}")]
    Csv { line: u64, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiredRisk {
    pub risk_rule_id: String,
    pub category: String,
    pub level: RiskLevel,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RiskReport {
    pub fired: Vec<FiredRisk>,
    /// Every category of the scored rules, including those that scored zero.
    pub per_category: BTreeMap<String, u64>,
    pub total: u64,
    pub undetermined: Vec<String>,
}

pub fn score_case(kb: &KnowledgeBase, facts: &Facts) -> RiskReport {
    score_rules(kb, kb.risk_rules.values(), facts)
}

/// Score a subset of the KB's risk rules.
pub fn score_rules<'a>(kb: &KnowledgeBase, rules: impl IntoIterator<Item = &'a RiskRule>, facts: &Facts) -> RiskReport {
    let ev = Evaluator::new(kb);
    let mut report = RiskReport::default();
    for r in rules {
        let slot = report.per_category.entry(r.category.clone()).or_insert(0);
        match ev.value(&r.expr, facts) {
            Tri::True => {
                let weight = kb.weights.get(r.level);
                *slot += weight;
                report.total += weight;
                report.fired.push(FiredRisk {
                    risk_rule_id: r.id.clone(),
                    category: r.category.clone(),
                    level: r.level,
                    weight,
                });
            }
            Tri::False => {}
            Tri::Unknown => report.undetermined.push(r.id.clone()),
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCase {
    pub facts: Facts,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: u64,
    /// Negative cases scoring at or above the threshold. Zero by construction.
    pub false_positives: usize,
    /// Fraction of positive cases flagged; 1.0 when there are no positives.
    pub recall: f64,
    pub positives_flagged: usize,
    pub positives: usize,
    pub negatives: usize,
}

/// Lowest threshold that flags no negative case: one above the highest
/// negative score, or zero when there are no negatives.
pub fn calibrate_threshold(kb: &KnowledgeBase, cases: &[LabeledCase]) -> Result<Calibration, RiskError> {
    let rules: Vec<&RiskRule> = kb.risk_rules.values().collect();
    calibrate_rules(kb, &rules, cases)
}

/// Calibrate against a subset of the risk rules.
pub fn calibrate_rules(
    kb: &KnowledgeBase,
    rules: &[&RiskRule],
    cases: &[LabeledCase],
) -> Result<Calibration, RiskError> {
    if cases.is_empty() {
        return Err(RiskError::NoCases);
    }
    let mut scored = Vec::with_capacity(cases.len());
    for (i, c) in cases.iter().enumerate() {
        let report = score_rules(kb, rules.iter().copied(), &c.facts);
        if !report.undetermined.is_empty() {
            return Err(RiskError::Undetermined { case: i + 1, rules: report.undetermined });
        }
        scored.push((report.total, c.label));
    }
    Ok(calibrate_scores(&scored))
}

pub fn calibrate_scores(scored: &[(u64, Label)]) -> Calibration {
    let threshold = scored.iter().filter(|(_, l)| *l == Label::Negative).map(|(s, _)| s + 1).max().unwrap_or(0);
    let positives = scored.iter().filter(|(_, l)| *l == Label::Positive).count();
    let negatives = scored.len() - positives;
    let positives_flagged = scored.iter().filter(|(s, l)| *l == Label::Positive && *s >= threshold).count();
    let false_positives = scored.iter().filter(|(s, l)| *l == Label::Negative && *s >= threshold).count();
    let recall = if positives == 0 { 1.0 } else { positives_flagged as f64 / positives as f64 };
    Calibration { threshold, false_positives, recall, positives_flagged, positives, negatives }
}

/// Risk rules that can be decided from the given questions alone.
pub fn rules_over<'a>(kb: &'a KnowledgeBase, questions: &[String]) -> Vec<&'a RiskRule> {
    kb.risk_rules.values().filter(|r| kb.reachable_questions(&r.expr).iter().all(|q| questions.contains(q))).collect()
}

/// Labeled cases in CSV form: a header of question ids followed by a final
/// `label` column holding `positive` or `negative`. An empty cell leaves the
/// question unanswered. Returns the header's question ids with the cases.
pub fn parse_cases_csv(kb: &KnowledgeBase, text: &str) -> Result<(Vec<String>, Vec<LabeledCase>), RiskError> {
    let err = |line: u64, message: String| RiskError::Csv { line, message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| err(1, e.to_string()))?.iter().map(str::to_string).collect();
    let Some((last, questions)) = header.split_last() else {
        return Err(err(1, "empty header".into()));
    };
    if last != "label" {
        return Err(err(1, "last column must be `label`".into()));
    }
    for q in questions {
        if kb.question(q).is_none() {
            return Err(err(1, format!("unknown question {q}")));
        }
    }
    let mut cases = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut facts = Facts::new();
        for (q, cell) in questions.iter().zip(record.iter()) {
            if cell.is_empty() {
                continue;
            }
            let question = kb.question(q).expect("checked above");
            let v = crate::textio::parse_value(question, cell).ok_or_else(|| {
                err(
                    line,
                    format!("{q}: expected {}, got {cell:?}", crate::textio::expected_form(&question.answer_kind)),
                )
            })?;
            facts.insert(q.clone(), v);
        }
        let label = match record.get(questions.len()) {
            Some("positive") => Label::Positive,
            Some("negative") => Label::Negative,
            other => {
                return Err(err(line, format!("label must be positive or negative, got {:?}", other.unwrap_or(""))))
            }
        };
        cases.push(LabeledCase { facts, label });
    }
    Ok((questions.to_vec(), cases))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub flagged: bool,
    pub margin: i64,
}

pub fn classify_case(report: &RiskReport, calibration: &Calibration) -> Result<Classification, RiskError> {
    if !report.undetermined.is_empty() {
        return Err(RiskError::UndeterminedReport(report.undetermined.clone()));
    }
    Ok(Classification {
        flagged: report.total >= calibration.threshold,
        margin: report.total as i64 - calibration.threshold as i64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_kb;
    use crate::model::Value;

    const KB: &str = r#"
question a: boolean
  text "a"
question b: boolean
  text "b"
riskrule low_a [budgeting]: if a then low
riskrule high_b [fraud]: if b then high
"#;

    fn facts(a: Option<bool>, b: Option<bool>) -> Facts {
        let mut f = Facts::new();
        if let Some(a) = a {
            f.insert("a".into(), Value::Bool(a));
        }
        if let Some(b) = b {
            f.insert("b".into(), Value::Bool(b));
        }
        f
    }

    #[test]
    fn nothing_fires() {
        let kb = parse_kb(KB).unwrap();
        let r = score_case(&kb, &facts(Some(false), Some(false)));
        assert_eq!(r.total, 0);
        assert!(r.fired.is_empty());
    }

    #[test]
    fn low_plus_high_under_default_weights() {
        let kb = parse_kb(KB).unwrap();
        let r = score_case(&kb, &facts(Some(true), Some(true)));
        assert_eq!(r.total, 5);
        assert_eq!(r.per_category["budgeting"], 1);
        assert_eq!(r.per_category["fraud"], 4);
    }

    #[test]
    fn unknown_rule_contributes_zero() {
        let kb = parse_kb(KB).unwrap();
        let r = score_case(&kb, &facts(Some(true), None));
        assert_eq!(r.total, 1);
        assert_eq!(r.undetermined, vec!["high_b"]);
    }

    fn cal(threshold: u64) -> Calibration {
        Calibration { threshold, false_positives: 0, recall: 1.0, positives_flagged: 0, positives: 0, negatives: 0 }
    }

    fn report(total: u64) -> RiskReport {
        RiskReport { total, ..Default::default() }
    }

    #[test]
    fn classification_boundary_is_inclusive() {
        assert_eq!(classify_case(&report(5), &cal(4)).unwrap(), Classification { flagged: true, margin: 1 });
        assert_eq!(classify_case(&report(3), &cal(4)).unwrap(), Classification { flagged: false, margin: -1 });
        assert_eq!(classify_case(&report(4), &cal(4)).unwrap(), Classification { flagged: true, margin: 0 });
        let undetermined = RiskReport { undetermined: vec!["x".into()], ..Default::default() };
        assert!(classify_case(&undetermined, &cal(4)).is_err());
    }

    #[test]
    fn csv_cases() {
        let kb = parse_kb(KB).unwrap();
        let text = "a,b,label\nyes,no,positive\nno,,negative\n";
        let (qs, cases) = parse_cases_csv(&kb, text).unwrap();
        assert_eq!(qs, ["a", "b"]);
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[1].facts.len(), 1);
        assert_eq!(rules_over(&kb, &["a".to_string()]).len(), 1);
        let bad = parse_cases_csv(&kb, "a,label\nmaybe,positive\n").unwrap_err();
        assert!(matches!(bad, RiskError::Csv { line: 2, .. }), "{bad}");
        assert!(parse_cases_csv(&kb, "a,b\nyes,no\n").is_err());
    }

    #[test]
    fn calibration_requires_cases_and_full_facts() {
        let kb = parse_kb(KB).unwrap();
        assert_eq!(calibrate_threshold(&kb, &[]), Err(RiskError::NoCases));
        let partial = LabeledCase { facts: facts(Some(true), None), label: Label::Negative };
        assert!(matches!(calibrate_threshold(&kb, &[partial]), Err(RiskError::Undetermined { case: 1, .. })));
    }
}
