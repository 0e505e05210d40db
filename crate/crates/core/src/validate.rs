//! Whole-KB validation.
//!
//! Validation never fails: every problem is returned as a [`Diagnostic`].

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{AnswerKind, CompliancePattern, Expr, KnowledgeBase, PremiseKind, SourceSpan, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Entity description, e.g. `rule dpo.required (seed.ckb:12:1)`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn warning_count(&self) -> usize {
        self.warnings().count()
    }

    pub fn is_valid(&self) -> bool {
        self.error_count() == 0
    }

    fn error(&mut self, location: String, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic { severity: Severity::Error, location, message: message.into() });
    }

    fn warning(&mut self, location: String, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic { severity: Severity::Warning, location, message: message.into() });
    }
}

fn loc(kind: &str, id: &str, span: Option<&SourceSpan>) -> String {
    match span {
        Some(s) => format!("{kind} {id} ({s})"),
        None => format!("{kind} {id}"),
    }
}

/// Parse and validate KB source text. Parse failures become error
/// diagnostics; a KB that parses is reported with its warnings.
pub fn validate_source(text: &str, file: &str) -> ValidationReport {
    match crate::dsl::parse_kb_named(text, file) {
        Ok(kb) => validate_kb(&kb),
        Err(errors) => ValidationReport {
            diagnostics: errors
                .0
                .into_iter()
                .map(|e| Diagnostic { severity: Severity::Error, location: e.location, message: e.message })
                .collect(),
        },
    }
}

pub fn validate_kb(kb: &KnowledgeBase) -> ValidationReport {
    let mut report = ValidationReport::default();

    for p in kb.provisions.values() {
        if !p.binding && !p.is_recital() {
            report.error(loc("provision", &p.id, p.span.as_ref()), "only recitals may be non-binding");
        }
    }

    for q in kb.questions.values() {
        let at = loc("question", &q.id, q.span.as_ref());
        if kb.rules.contains_key(&q.id) {
            report.error(at.clone(), format!("id {} is declared as both a question and a rule", q.id));
        }
        if let AnswerKind::Enum { labels } = &q.answer_kind {
            let distinct: HashSet<&String> = labels.iter().collect();
            if distinct.len() < 2 {
                report.error(at.clone(), "enum questions need at least two distinct labels");
            } else if distinct.len() != labels.len() {
                report.error(at.clone(), "enum labels must be distinct");
            }
        }
        check_provisions(kb, &q.provision_refs, &at, &mut report);
    }

    for r in kb.rules.values() {
        let at = loc("rule", &r.id, r.span.as_ref());
        check_expr(kb, &r.expr, &at, &mut report);
        check_provisions(kb, &r.provision_refs, &at, &mut report);
    }
    check_cycles(kb, &mut report);

    let mut seen_goals = HashSet::new();
    for g in &kb.goals {
        if !kb.rules.contains_key(g) {
            report.error(format!("goal {g}"), format!("unknown rule {g}"));
        }
        if !seen_goals.insert(g) {
            report.error(format!("goal {g}"), "goal declared twice");
        }
    }

    for p in kb.patterns.values() {
        check_pattern(kb, p, &mut report);
    }

    for r in kb.risk_rules.values() {
        let at = loc("riskrule", &r.id, r.span.as_ref());
        if r.category.trim().is_empty() {
            report.error(at.clone(), "risk category must be non-empty");
        }
        check_expr(kb, &r.expr, &at, &mut report);
        check_provisions(kb, &r.provision_refs, &at, &mut report);
    }

    if !kb.weights.strictly_increasing() {
        let w = kb.weights;
        report.error(
            "weights".to_string(),
            format!(
                "weights not strictly increasing (low={} medium={} high={} very_high={})",
                w.low, w.medium, w.high, w.very_high
            ),
        );
    }

    unreferenced_questions(kb, &mut report);
    report
}

fn check_provisions(kb: &KnowledgeBase, refs: &[String], at: &str, report: &mut ValidationReport) {
    for p in refs {
        if !kb.provisions.contains_key(p) {
            report.error(at.to_string(), format!("unknown provision {p}"));
        }
    }
}

fn check_expr(kb: &KnowledgeBase, expr: &Expr, at: &str, report: &mut ValidationReport) {
    match expr {
        Expr::Atom { question } => match kb.questions.get(question) {
            None => report.error(at.to_string(), format!("unknown question {question}")),
            Some(q) if q.answer_kind != AnswerKind::Boolean => report
                .error(at.to_string(), format!("{question} is a {} question; use a comparison", q.answer_kind.name())),
            Some(_) => {}
        },
        Expr::RuleRef { rule } => {
            if !kb.rules.contains_key(rule) {
                report.error(at.to_string(), format!("unknown rule {rule}"));
            }
        }
        Expr::Not { expr } => check_expr(kb, expr, at, report),
        Expr::And { args } | Expr::Or { args } => {
            if args.is_empty() {
                report.error(at.to_string(), "and/or needs at least one operand");
            }
            for a in args {
                check_expr(kb, a, at, report);
            }
        }
        Expr::Cmp { question, cmp, literal } => {
            let Some(q) = kb.questions.get(question) else {
                report.error(at.to_string(), format!("unknown question {question}"));
                return;
            };
            match (&q.answer_kind, literal) {
                (AnswerKind::Boolean, _) => {
                    report.error(at.to_string(), format!("comparison over boolean question {question}"))
                }
                (AnswerKind::Enum { labels }, Value::Label(l)) => {
                    if cmp.is_ordering() {
                        report.error(at.to_string(), format!("ordering comparison over enum question {question}"));
                    }
                    if !labels.contains(l) {
                        report.error(at.to_string(), format!("{question} has no label \"{l}\""));
                    }
                }
                (AnswerKind::Number { .. }, Value::Number(n)) if n.is_finite() => {}
                (AnswerKind::Date, Value::Date(_)) => {}
                (kind, _) => {
                    report.error(at.to_string(), format!("literal does not match {} question {question}", kind.name()))
                }
            }
        }
    }
}

fn check_cycles(kb: &KnowledgeBase, report: &mut ValidationReport) {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }

    fn visit<'a>(
        kb: &'a KnowledgeBase,
        id: &'a str,
        marks: &mut HashMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
        report: &mut ValidationReport,
    ) {
        marks.insert(id, Mark::Active);
        stack.push(id);
        if let Some(rule) = kb.rules.get(id) {
            for dep in rule.expr.direct_rules() {
                let Some((dep, _)) = kb.rules.get_key_value(dep) else { continue };
                match marks.get(dep.as_str()) {
                    Some(Mark::Active) => {
                        let start = stack.iter().position(|s| *s == dep).unwrap_or(0);
                        let mut path: Vec<&str> = stack[start..].to_vec();
                        if path.len() > 1 {
                            path.push(dep);
                        }
                        let r = kb.rules.get(dep.as_str());
                        report.error(
                            loc("rule", dep, r.and_then(|r| r.span.as_ref())),
                            format!("cycle: {}", path.join(" -> ")),
                        );
                    }
                    Some(Mark::Done) => {}
                    None => visit(kb, dep, marks, stack, report),
                }
            }
        }
        stack.pop();
        marks.insert(id, Mark::Done);
    }

    let mut marks = HashMap::new();
    let mut stack = Vec::new();
    for id in kb.rules.keys() {
        if !marks.contains_key(id.as_str()) {
            visit(kb, id, &mut marks, &mut stack, report);
        }
    }
}

fn check_pattern(kb: &KnowledgeBase, p: &CompliancePattern, report: &mut ValidationReport) {
    let at = loc("pattern", &p.id, p.span.as_ref());
    check_provisions(kb, &p.provision_refs, &at, report);

    let slots = [
        (PremiseKind::GeneralRule, &p.claim.general_rule),
        (PremiseKind::Performance, &p.claim.performance),
        (PremiseKind::Warrant, &p.claim.warrant),
        (PremiseKind::EstablishedRule, &p.action.established_rule),
        (PremiseKind::Remedies, &p.action.remedies),
        (PremiseKind::Violation, &p.action.violation),
    ]
    .into_iter()
    .chain(p.exceptions.iter().map(|e| (PremiseKind::Exception, &e.premise)));

    let mut premise_ids = HashSet::new();
    for (slot, premise) in slots {
        let pat = format!("{at}, premise {}", premise.id);
        if premise.kind != slot {
            report.error(pat.clone(), format!("premise kind {} in {} slot", premise.kind.keyword(), slot.keyword()));
        }
        if !premise_ids.insert(premise.id.as_str()) {
            report.error(pat.clone(), format!("duplicate premise id {}", premise.id));
        }
        match &premise.expr {
            Some(e) => check_expr(kb, e, &pat, report),
            None if slot.requires_expr() => {
                report.error(pat.clone(), format!("{} premise must carry an expression", slot.keyword()))
            }
            None => {}
        }
    }

    let mut exception_ids = HashSet::new();
    for e in &p.exceptions {
        if !exception_ids.insert(e.id.as_str()) {
            report.error(format!("{at}, exception {}", e.id), format!("duplicate exception id {}", e.id));
        }
    }
    if p.exceptions.is_empty() {
        report.warning(at, "pattern has no exceptional cases");
    }
}

fn unreferenced_questions(kb: &KnowledgeBase, report: &mut ValidationReport) {
    let mut exprs: Vec<&Expr> = kb.rules.values().map(|r| &r.expr).collect();
    exprs.extend(kb.risk_rules.values().map(|r| &r.expr));
    for p in kb.patterns.values() {
        exprs.extend(p.premises().into_iter().filter_map(|(_, pr)| pr.expr.as_ref()));
    }
    let used: HashSet<&str> = exprs.iter().flat_map(|e| e.direct_questions()).collect();
    for q in kb.questions.values() {
        if !used.contains(q.id.as_str()) {
            report
                .warning(loc("question", &q.id, q.span.as_ref()), "question is not referenced by any rule or pattern");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn bool_q(id: &str) -> Question {
        Question {
            id: id.into(),
            text: id.into(),
            answer_kind: AnswerKind::Boolean,
            help_text: None,
            provision_refs: vec![],
            interpretive: false,
            span: None,
        }
    }

    fn rule(id: &str, expr: Expr) -> Rule {
        Rule { id: id.into(), expr, provision_refs: vec![], holds_text: None, fails_text: None, span: None }
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let mut kb = KnowledgeBase::default();
        kb.rules.insert("A".into(), rule("A", Expr::rule("A")));
        let report = validate_kb(&kb);
        let msgs: Vec<_> = report.errors().map(|d| d.message.as_str()).collect();
        assert_eq!(msgs, vec!["cycle: A"]);
    }

    #[test]
    fn longer_cycle_names_the_path() {
        let mut kb = KnowledgeBase::default();
        kb.rules.insert("A".into(), rule("A", Expr::rule("B")));
        kb.rules.insert("B".into(), rule("B", Expr::rule("A")));
        let report = validate_kb(&kb);
        assert_eq!(report.error_count(), 1);
        assert!(report.errors().next().unwrap().message.starts_with("cycle: A -> B -> A"));
    }

    #[test]
    fn flat_weights_rejected() {
        let kb = KnowledgeBase { weights: Weights { low: 2, medium: 2, high: 4, very_high: 8 }, ..Default::default() };
        let report = validate_kb(&kb);
        assert!(report.errors().any(|d| d.message.starts_with("weights not strictly increasing")));
    }

    #[test]
    fn enum_needs_two_labels() {
        let mut kb = KnowledgeBase::default();
        let mut q = bool_q("e");
        q.answer_kind = AnswerKind::Enum { labels: vec!["a".into(), "a".into()] };
        kb.questions.insert("e".into(), q);
        kb.rules.insert("r".into(), rule("r", Expr::cmp("e", CmpOp::Eq, Value::Label("a".into()))));
        assert_eq!(validate_kb(&kb).error_count(), 1);
    }

    #[test]
    fn article_cannot_be_non_binding() {
        let mut kb = KnowledgeBase::default();
        let mk = |id: &str, art: &str| Provision {
            id: id.into(),
            instrument: "GDPR".into(),
            article_or_recital: art.into(),
            binding: false,
            quote: None,
            span: None,
        };
        kb.provisions.insert("r71".into(), mk("r71", "Recital 71"));
        kb.provisions.insert("a39".into(), mk("a39", "Article 39"));
        let errors: Vec<_> = validate_kb(&kb).errors().cloned().collect();
        assert_eq!(errors.len(), 1);
        assert!(errors[0].location.contains("a39"));
    }

    #[test]
    fn comparison_type_checks() {
        let mut kb = KnowledgeBase::default();
        let mut n = bool_q("n");
        n.answer_kind = AnswerKind::Number { unit: String::new() };
        kb.questions.insert("n".into(), n);
        kb.questions.insert("b".into(), bool_q("b"));
        kb.rules.insert("r1".into(), rule("r1", Expr::cmp("n", CmpOp::Lt, Value::Label("x".into()))));
        kb.rules.insert("r2".into(), rule("r2", Expr::cmp("b", CmpOp::Eq, Value::Bool(true))));
        kb.rules.insert("r3".into(), rule("r3", Expr::atom("n")));
        kb.rules.insert("r4".into(), rule("r4", Expr::and(vec![])));
        let report = validate_kb(&kb);
        assert_eq!(report.error_count(), 4, "{report:?}");
    }

    #[test]
    fn unreferenced_question_is_a_warning() {
        let mut kb = KnowledgeBase::default();
        kb.questions.insert("lonely".into(), bool_q("lonely"));
        let report = validate_kb(&kb);
        assert_eq!(report.error_count(), 0);
        assert_eq!(report.warning_count(), 1);
    }
}
