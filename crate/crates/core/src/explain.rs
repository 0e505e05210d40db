//! Rule traces, argument documents and robustness summaries.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{self, ChallengeOutcome, EngineError, PremiseState, Session, VerdictValue};
use crate::eval::{Evaluator, Facts, Tri};
use crate::model::{KnowledgeBase, PremiseKind, Rule, Value};
use crate::plan::compile_question_plan;
use crate::DISCLAIMER;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisclosureLevel {
    #[default]
    Full,
    Summary,
    Redacted,
}

impl DisclosureLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            DisclosureLevel::Full => "full",
            DisclosureLevel::Summary => "summary",
            DisclosureLevel::Redacted => "redacted",
        }
    }
}

impl FromStr for DisclosureLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(DisclosureLevel::Full),
            "summary" => Ok(DisclosureLevel::Summary),
            "redacted" => Ok(DisclosureLevel::Redacted),
            other => Err(format!("unknown disclosure level {other:?} (expected full, summary or redacted)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Rule,
    RiskRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggeringFact {
    pub question_id: String,
    pub value: Value,
}

/// One determined rule. Fields are dropped as the disclosure level narrows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<StepKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<VerdictValue>,
    /// Absent once the disclosure level drops it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triggering_facts: Option<Vec<TriggeringFact>>,
    pub conclusion: String,
    pub provision_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationTrace {
    pub level: DisclosureLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
    pub verdict: VerdictValue,
    pub significance: String,
    /// In firing order.
    pub steps: Vec<TraceStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("no rule is determined yet")]
    NothingDetermined,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Author-supplied text for the verdict, or a neutral sentence. Never the rule id.
pub fn significance(rule: &Rule, verdict: VerdictValue) -> String {
    let authored = match verdict {
        VerdictValue::Holds => rule.holds_text.clone(),
        VerdictValue::Fails => rule.fails_text.clone(),
        VerdictValue::Unknown => None,
    };
    authored.unwrap_or_else(|| {
        match verdict {
            VerdictValue::Holds => "The assessed requirement holds.",
            VerdictValue::Fails => "The assessed requirement does not hold.",
            VerdictValue::Unknown => "The assessment is not yet complete.",
        }
        .to_string()
    })
}

fn rule_step(ev: &Evaluator<'_>, rule: &Rule, value: Tri, facts: &Facts) -> TraceStep {
    let holds = value == Tri::True;
    TraceStep {
        kind: Some(StepKind::Rule),
        rule_id: Some(rule.id.clone()),
        value: Some(value.into()),
        triggering_facts: Some(triggering(ev, &rule.expr, facts, value)),
        conclusion: rule.conclusion(holds),
        provision_refs: rule.provision_refs.clone(),
    }
}

fn triggering(ev: &Evaluator<'_>, expr: &crate::model::Expr, facts: &Facts, value: Tri) -> Vec<TriggeringFact> {
    ev.sufficient_facts(expr, facts, value)
        .into_iter()
        .map(|q| TriggeringFact { value: facts[&q].clone(), question_id: q })
        .collect()
}

/// Trace of a session: one step per rule reachable from the goal, in the
/// order the answers determined them. Triggering facts are taken from the
/// answers known when the rule became determined.
pub fn build_trace(kb: &KnowledgeBase, session: &Session) -> Result<ExplanationTrace, TraceError> {
    let plan = compile_question_plan(kb, &session.goal).map_err(EngineError::from)?;
    let ev = Evaluator::new(kb);
    let mut facts = Facts::new();
    let mut done: HashSet<&str> = HashSet::new();
    let mut steps = Vec::new();

    let mut sweep = |facts: &Facts, steps: &mut Vec<TraceStep>| {
        for r in &plan.rules {
            if done.contains(r.as_str()) {
                continue;
            }
            let rule = &kb.rules[r.as_str()];
            let v = ev.value(&rule.expr, facts);
            if v.is_known() {
                done.insert(r.as_str());
                steps.push(rule_step(&ev, rule, v, facts));
            }
        }
    };
    sweep(&facts, &mut steps);
    for (q, a) in &session.answers {
        facts.insert(q.clone(), a.value.clone());
        sweep(&facts, &mut steps);
    }
    if steps.is_empty() {
        return Err(TraceError::NothingDetermined);
    }
    let verdict = engine::evaluate_goal(kb, session).value;
    Ok(ExplanationTrace {
        level: DisclosureLevel::Full,
        goal: Some(session.goal.clone()),
        verdict,
        significance: significance(&kb.rules[session.goal.as_str()], verdict),
        steps,
    })
}

/// Trace over a fixed fact set: the determined rules behind `goal`, in
/// dependency order, followed by the listed risk rules that hold.
pub fn trace_facts(
    kb: &KnowledgeBase,
    facts: &Facts,
    goal: &str,
    fired_risk_rules: &[String],
) -> Result<ExplanationTrace, TraceError> {
    let plan = compile_question_plan(kb, goal).map_err(EngineError::from)?;
    let ev = Evaluator::new(kb);
    let mut steps = Vec::new();
    for r in &plan.rules {
        let rule = &kb.rules[r.as_str()];
        let v = ev.value(&rule.expr, facts);
        if v.is_known() {
            steps.push(rule_step(&ev, rule, v, facts));
        }
    }
    for id in fired_risk_rules {
        let Some(rr) = kb.risk_rules.get(id) else { continue };
        steps.push(TraceStep {
            kind: Some(StepKind::RiskRule),
            rule_id: Some(rr.id.clone()),
            value: Some(VerdictValue::Holds),
            triggering_facts: Some(triggering(&ev, &rr.expr, facts, Tri::True)),
            conclusion: format!("{} risk ({}): {}", rr.level.keyword(), kb.weights.get(rr.level), rr.category),
            provision_refs: rr.provision_refs.clone(),
        });
    }
    if steps.is_empty() {
        return Err(TraceError::NothingDetermined);
    }
    let verdict: VerdictValue = ev.rule_value(goal, facts).into();
    Ok(ExplanationTrace {
        level: DisclosureLevel::Full,
        goal: Some(goal.to_string()),
        verdict,
        significance: significance(&kb.rules[goal], verdict),
        steps,
    })
}

/// Narrow a trace for disclosure. `summary` drops triggering facts;
/// `redacted` keeps one step carrying the significance text and the union of
/// provision references, and nothing that names a question or an answer.
pub fn redact_trace(trace: &ExplanationTrace, level: DisclosureLevel) -> ExplanationTrace {
    match level {
        DisclosureLevel::Full => trace.clone(),
        DisclosureLevel::Summary => {
            let mut t = trace.clone();
            t.level = DisclosureLevel::Summary;
            for s in &mut t.steps {
                s.triggering_facts = None;
            }
            t
        }
        DisclosureLevel::Redacted => {
            let mut refs: Vec<String> = Vec::new();
            for r in trace.steps.iter().flat_map(|s| &s.provision_refs) {
                if !refs.contains(r) {
                    refs.push(r.clone());
                }
            }
            ExplanationTrace {
                level: DisclosureLevel::Redacted,
                goal: None,
                verdict: trace.verdict,
                significance: trace.significance.clone(),
                steps: vec![TraceStep {
                    kind: None,
                    rule_id: None,
                    value: None,
                    triggering_facts: None,
                    conclusion: trace.significance.clone(),
                    provision_refs: refs,
                }],
            }
        }
    }
}

pub fn render_trace_text(trace: &ExplanationTrace) -> String {
    let mut out = String::new();
    if let Some(goal) = &trace.goal {
        let _ = writeln!(out, "Goal: {goal}");
    }
    let _ = writeln!(out, "Verdict: {}", trace.verdict.as_str());
    let _ = writeln!(out, "Significance: {}", trace.significance);
    let _ = writeln!(out, "Level: {}", trace.level.as_str());
    for (i, s) in trace.steps.iter().enumerate() {
        match (&s.rule_id, s.value) {
            (Some(id), Some(v)) => {
                let _ = writeln!(out, "{}. {} {}: {}", i + 1, id, v.as_str(), s.conclusion);
            }
            _ => {
                let _ = writeln!(out, "{}. {}", i + 1, s.conclusion);
            }
        }
        for f in s.triggering_facts.iter().flatten() {
            let _ = writeln!(out, "   because {} = {}", f.question_id, f.value);
        }
        if !s.provision_refs.is_empty() {
            let _ = writeln!(out, "   provisions: {}", s.provision_refs.join(", "));
        }
    }
    let _ = writeln!(out, "{DISCLAIMER}");
    out
}

/// What a rendered section stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionRole {
    Premise(PremiseKind),
    Conclusion,
    Else,
    ExceptionStatement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocSection {
    pub label: String,
    pub heading: String,
    pub role: SectionRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise_id: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<PremiseState>,
    pub interpretive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionDoc {
    pub exception_id: String,
    pub outcome: ChallengeOutcome,
    pub sections: Vec<DocSection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentDocument {
    pub pattern_id: String,
    pub provision_refs: Vec<String>,
    pub legal_claim: Vec<DocSection>,
    pub legal_action: Vec<DocSection>,
    pub exceptional_cases: Vec<ExceptionDoc>,
    /// Set when an established exception replaces the claim's conclusion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim_overridden_by: Option<String>,
    pub interpretation_points: Vec<String>,
    pub disclaimer: String,
}

impl ArgumentDocument {
    pub fn sections(&self) -> impl Iterator<Item = &DocSection> {
        self.legal_claim.iter().chain(&self.legal_action).chain(self.exceptional_cases.iter().flat_map(|e| &e.sections))
    }
}

fn label(i: usize) -> String {
    char::from(b'a' + i as u8).to_string()
}

pub fn render_argument(
    kb: &KnowledgeBase,
    pattern_id: &str,
    session: &Session,
) -> Result<ArgumentDocument, EngineError> {
    render_argument_facts(kb, pattern_id, &session.facts())
}

pub fn render_argument_facts(
    kb: &KnowledgeBase,
    pattern_id: &str,
    facts: &Facts,
) -> Result<ArgumentDocument, EngineError> {
    let pattern = kb.pattern(pattern_id).ok_or_else(|| EngineError::UnknownPattern(pattern_id.to_string()))?;
    let ev = Evaluator::new(kb);
    let mut interpretation_points = Vec::new();
    let mut premise_section = |i: usize, kind: PremiseKind, p: &crate::model::Premise| {
        let interpretive = engine::premise_is_interpretive(kb, p);
        if interpretive {
            interpretation_points.push(p.id.clone());
        }
        DocSection {
            label: label(i),
            heading: kind.heading().to_string(),
            role: SectionRole::Premise(kind),
            premise_id: Some(p.id.clone()),
            text: p.text.clone(),
            status: Some(engine::premise_state(&ev, p, facts)),
            interpretive,
        }
    };
    let plain = |i: usize, heading: &str, role: SectionRole, text: &str| DocSection {
        label: label(i),
        heading: heading.to_string(),
        role,
        premise_id: None,
        text: text.to_string(),
        status: None,
        interpretive: false,
    };

    let claim = &pattern.claim;
    let mut legal_claim = vec![
        premise_section(0, PremiseKind::GeneralRule, &claim.general_rule),
        premise_section(1, PremiseKind::Performance, &claim.performance),
        premise_section(2, PremiseKind::Warrant, &claim.warrant),
    ];
    let action = &pattern.action;
    let mut legal_action = vec![
        premise_section(0, PremiseKind::EstablishedRule, &action.established_rule),
        premise_section(1, PremiseKind::Remedies, &action.remedies),
        premise_section(2, PremiseKind::Violation, &action.violation),
    ];

    let mut exceptional_cases = Vec::new();
    let mut claim_overridden_by = None;
    for ex in &pattern.exceptions {
        let outcome = match &ex.premise.expr {
            Some(_) => engine::challenge_facts(kb, facts, pattern_id, &ex.id)?.outcome,
            None => ChallengeOutcome::Undetermined,
        };
        if outcome == ChallengeOutcome::ExceptionEstablished && claim_overridden_by.is_none() {
            claim_overridden_by = Some(ex.id.clone());
        }
        let statement = match outcome {
            ChallengeOutcome::ExceptionEstablished => "The case cited is an exception: established on the facts.",
            ChallengeOutcome::ExceptionDefeated => "The case cited is an exception: defeated on the facts.",
            ChallengeOutcome::Undetermined => "The case cited is an exception: not yet determined.",
        };
        exceptional_cases.push(ExceptionDoc {
            exception_id: ex.id.clone(),
            outcome,
            sections: vec![
                premise_section(0, PremiseKind::Exception, &ex.premise),
                plain(1, "Exception", SectionRole::ExceptionStatement, statement),
                plain(2, "Conclusion", SectionRole::Conclusion, &ex.conclusion),
            ],
        });
    }

    let claim_conclusion = match &claim_overridden_by {
        Some(id) => {
            let ex = pattern.exception(id).expect("exception exists");
            format!("{} (overridden by exceptional case {id})", ex.conclusion)
        }
        None => claim.conclusion.clone(),
    };
    legal_claim.push(plain(3, "Conclusion", SectionRole::Conclusion, &claim_conclusion));
    legal_claim.push(plain(4, "Else", SectionRole::Else, &claim.else_consequence));
    legal_action.push(plain(3, "Conclusion", SectionRole::Conclusion, &action.conclusion));

    Ok(ArgumentDocument {
        pattern_id: pattern_id.to_string(),
        provision_refs: pattern.provision_refs.clone(),
        legal_claim,
        legal_action,
        exceptional_cases,
        claim_overridden_by,
        interpretation_points,
        disclaimer: DISCLAIMER.to_string(),
    })
}

fn write_section(out: &mut String, s: &DocSection) {
    let mut tags = Vec::new();
    if let Some(st) = s.status {
        tags.push(st.as_str());
    }
    if s.interpretive {
        tags.push("interpretive");
    }
    let tags = if tags.is_empty() { String::new() } else { format!(" [{}]", tags.join(", ")) };
    let _ = writeln!(out, "   {}. {}{}", s.label, s.heading, tags);
    let _ = writeln!(out, "      {}", s.text);
}

/// Plain-text rendering with a fixed layout, suitable for golden files.
pub fn render_argument_text(doc: &ArgumentDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Compliance pattern: {}", doc.pattern_id);
    if !doc.provision_refs.is_empty() {
        let _ = writeln!(out, "Provisions: {}", doc.provision_refs.join(", "));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "1. Legal claim");
    doc.legal_claim.iter().for_each(|s| write_section(&mut out, s));
    let _ = writeln!(out, "2. Legal action");
    doc.legal_action.iter().for_each(|s| write_section(&mut out, s));
    for (i, ex) in doc.exceptional_cases.iter().enumerate() {
        let _ = writeln!(out, "{}. Exceptional case {} [{}]", i + 3, ex.exception_id, ex.outcome.as_str());
        ex.sections.iter().for_each(|s| write_section(&mut out, s));
    }
    let _ = writeln!(out);
    if doc.interpretation_points.is_empty() {
        let _ = writeln!(out, "Interpretation points: none");
    } else {
        let _ = writeln!(out, "Interpretation points:");
        for p in &doc.interpretation_points {
            let _ = writeln!(out, "  - {p}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{}", doc.disclaimer);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakPremise {
    pub premise_id: String,
    pub text: String,
    pub status: PremiseState,
    pub interpretive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub pattern_id: String,
    pub exception_id: String,
    pub outcome: ChallengeOutcome,
    /// Conjuncts that are not supported, or that rest on interpretation;
    /// contradicted first, then unknown, then supported-but-interpretive.
    pub weak_premises: Vec<WeakPremise>,
    pub interpretation_points: Vec<String>,
    pub narrative: String,
}

pub fn robustness_check(
    kb: &KnowledgeBase,
    session: &Session,
    pattern_id: &str,
    exception_id: &str,
) -> Result<RobustnessSummary, EngineError> {
    robustness_facts(kb, &session.facts(), pattern_id, exception_id)
}

pub fn robustness_facts(
    kb: &KnowledgeBase,
    facts: &Facts,
    pattern_id: &str,
    exception_id: &str,
) -> Result<RobustnessSummary, EngineError> {
    let result = engine::challenge_facts(kb, facts, pattern_id, exception_id)?;
    let mut weak: Vec<WeakPremise> = result
        .premise_statuses
        .iter()
        .filter(|s| s.status != PremiseState::Supported || s.interpretive)
        .map(|s| WeakPremise {
            premise_id: s.premise_id.clone(),
            text: s.text.clone(),
            status: s.status,
            interpretive: s.interpretive,
        })
        .collect();
    weak.sort_by_key(|w| w.status);

    let list = |pred: &dyn Fn(&WeakPremise) -> bool| {
        weak.iter().filter(|w| pred(w)).map(|w| w.premise_id.as_str()).collect::<Vec<_>>().join(", ")
    };
    let mut narrative = match result.outcome {
        ChallengeOutcome::ExceptionEstablished => {
            format!("Exception {exception_id} is established on the current facts.")
        }
        ChallengeOutcome::ExceptionDefeated => format!(
            "Exception {exception_id} is defeated; contradicted: {}.",
            list(&|w| w.status == PremiseState::Contradicted)
        ),
        ChallengeOutcome::Undetermined => format!(
            "Exception {exception_id} is undetermined; still open: {}.",
            list(&|w| w.status == PremiseState::Unknown)
        ),
    };
    if !result.interpretation_points.is_empty() {
        let _ = write!(narrative, " Open to interpretation: {}.", result.interpretation_points.join(", "));
    }
    Ok(RobustnessSummary {
        pattern_id: result.pattern_id,
        exception_id: result.exception_id,
        outcome: result.outcome,
        weak_premises: weak,
        interpretation_points: result.interpretation_points,
        narrative,
    })
}
