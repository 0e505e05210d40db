//! Interview sessions.
//!
//! A session pursues one goal rule. Questions come from the goal's static
//! [`QuestionPlan`](crate::plan::QuestionPlan) order, but a question is only
//! offered while it can still change the goal's value. Unanswered questions
//! are never defaulted.

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::eval::{Evaluator, Facts, Tri};
use crate::journal::{EventBody, JournalEvent};
use crate::model::{Expr, KnowledgeBase, Premise, Question, Value};
use crate::plan::{compile_question_plan, PlanError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown goal {0}")]
    UnknownGoal(String),
    #[error("session {0} is concluded")]
    SessionConcluded(String),
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("question {0} is not part of this session's goal")]
    NotInPlan(String),
    #[error("question {question} expects a {expected} answer")]
    TypeMismatch { question: String, expected: String },
    #[error("question {0} is already answered")]
    AlreadyAnswered(String),
    #[error("question {0} can no longer affect the goal")]
    NotRelevant(String),
    #[error("unknown pattern {0}")]
    UnknownPattern(String),
    #[error("pattern {pattern} has no exception {exception}")]
    UnknownException { pattern: String, exception: String },
    #[error("exception premise {0} is not bound to facts")]
    UnboundException(String),
}

impl From<PlanError> for EngineError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::UnknownGoal(g) => EngineError::UnknownGoal(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub question_id: String,
    pub value: Value,
    pub answered_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Concluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictValue {
    Holds,
    Fails,
    Unknown,
}

impl From<Tri> for VerdictValue {
    fn from(t: Tri) -> Self {
        match t {
            Tri::True => VerdictValue::Holds,
            Tri::False => VerdictValue::Fails,
            Tri::Unknown => VerdictValue::Unknown,
        }
    }
}

impl VerdictValue {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictValue::Holds => "holds",
            VerdictValue::Fails => "fails",
            VerdictValue::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiredRule {
    pub rule_id: String,
    pub value: VerdictValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub goal: String,
    pub value: VerdictValue,
    /// Still-relevant unanswered questions, in plan order. Empty unless unknown.
    pub pending: Vec<String>,
    /// Rules reachable from the goal whose value is determined, dependencies first.
    pub fired_rules: Vec<FiredRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub kb_fingerprint: String,
    pub goal: String,
    pub plan: Vec<String>,
    pub answers: IndexMap<String, Answer>,
    pub events: Vec<JournalEvent>,
    pub status: SessionStatus,
    /// Frozen when the session concludes.
    pub verdict: Option<Verdict>,
}

impl Session {
    pub fn facts(&self) -> Facts {
        self.answers.iter().map(|(k, a)| (k.clone(), a.value.clone())).collect()
    }

    pub fn is_open(&self) -> bool {
        self.status == SessionStatus::Open
    }

    /// Events appended after `seq`.
    pub fn events_after(&self, seq: u64) -> &[JournalEvent] {
        let start = self.events.iter().position(|e| e.seq > seq).unwrap_or(self.events.len());
        &self.events[start..]
    }

    fn push_event(&mut self, ts: DateTime<Utc>, body: EventBody) {
        let seq = self.events.len() as u64 + 1;
        self.events.push(JournalEvent { seq, ts, session_id: self.session_id.clone(), body });
    }

    /// Journal an exception challenge. Concluded sessions accept no further
    /// events, so challenges against them are evaluated but not recorded.
    pub fn record_exception(&mut self, result: &ChallengeResult, now: DateTime<Utc>) -> bool {
        if !self.is_open() {
            return false;
        }
        self.push_event(
            now,
            EventBody::ExceptionApplied {
                pattern_id: result.pattern_id.clone(),
                exception_id: result.exception_id.clone(),
                outcome: result.outcome,
            },
        );
        true
    }

    pub(crate) fn conclude(&mut self, verdict: Verdict, now: DateTime<Utc>) {
        self.push_event(now, EventBody::SessionConcluded { verdict: verdict.value });
        self.status = SessionStatus::Concluded;
        self.verdict = Some(verdict);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextStep {
    Question { question: Question },
    Concluded { verdict: Verdict },
}

pub fn start_session(
    kb: &KnowledgeBase,
    goal: &str,
    session_id: impl Into<String>,
    now: DateTime<Utc>,
) -> Result<Session, EngineError> {
    let plan = compile_question_plan(kb, goal)?;
    let kb_fingerprint = kb.fingerprint();
    let mut session = Session {
        session_id: session_id.into(),
        kb_fingerprint: kb_fingerprint.clone(),
        goal: goal.to_string(),
        plan: plan.order,
        answers: IndexMap::new(),
        events: Vec::new(),
        status: SessionStatus::Open,
        verdict: None,
    };
    session.push_event(now, EventBody::SessionStarted { goal: goal.to_string(), kb_hash: kb_fingerprint });
    Ok(session)
}

/// The earliest unanswered plan question that can still change the goal, or
/// the verdict once the goal is decided. Deciding the goal concludes the session.
pub fn next_question(kb: &KnowledgeBase, session: &mut Session, now: DateTime<Utc>) -> NextStep {
    if let Some(v) = &session.verdict {
        return NextStep::Concluded { verdict: v.clone() };
    }
    let ev = Evaluator::new(kb);
    let goal = Expr::rule(session.goal.clone());
    let facts = session.facts();
    if ev.value(&goal, &facts).is_known() {
        let verdict = evaluate_with(&ev, session, &facts);
        session.conclude(verdict.clone(), now);
        return NextStep::Concluded { verdict };
    }
    for q in &session.plan {
        if ev.is_relevant(&goal, &facts, q) {
            return NextStep::Question { question: kb.questions[q.as_str()].clone() };
        }
    }
    // Unreachable for a valid KB: an undecided goal always has a relevant question.
    let verdict = evaluate_with(&ev, session, &facts);
    NextStep::Concluded { verdict }
}

pub fn submit_answer(
    kb: &KnowledgeBase,
    session: &mut Session,
    question_id: &str,
    value: Value,
    now: DateTime<Utc>,
) -> Result<(), EngineError> {
    if !session.is_open() {
        return Err(EngineError::SessionConcluded(session.session_id.clone()));
    }
    let question =
        kb.questions.get(question_id).ok_or_else(|| EngineError::UnknownQuestion(question_id.to_string()))?;
    if !session.plan.iter().any(|q| q == question_id) {
        return Err(EngineError::NotInPlan(question_id.to_string()));
    }
    if session.answers.contains_key(question_id) {
        return Err(EngineError::AlreadyAnswered(question_id.to_string()));
    }
    if !value.matches(&question.answer_kind) {
        return Err(EngineError::TypeMismatch {
            question: question_id.to_string(),
            expected: question.answer_kind.name().to_string(),
        });
    }
    let ev = Evaluator::new(kb);
    if !ev.is_relevant(&Expr::rule(session.goal.clone()), &session.facts(), question_id) {
        return Err(EngineError::NotRelevant(question_id.to_string()));
    }
    session.answers.insert(
        question_id.to_string(),
        Answer { question_id: question_id.to_string(), value: value.clone(), answered_at: now },
    );
    session.push_event(now, EventBody::AnswerSubmitted { question_id: question_id.to_string(), value });
    Ok(())
}

pub fn evaluate_goal(kb: &KnowledgeBase, session: &Session) -> Verdict {
    if let Some(v) = &session.verdict {
        return v.clone();
    }
    let ev = Evaluator::new(kb);
    evaluate_with(&ev, session, &session.facts())
}

fn evaluate_with(ev: &Evaluator<'_>, session: &Session, facts: &Facts) -> Verdict {
    let kb = ev.kb();
    let goal = Expr::rule(session.goal.clone());
    let value = ev.value(&goal, facts);
    let pending = if value.is_known() {
        Vec::new()
    } else {
        session.plan.iter().filter(|q| ev.is_relevant(&goal, facts, q)).cloned().collect()
    };
    let rules = compile_question_plan(kb, &session.goal).map(|p| p.rules).unwrap_or_default();
    let fired_rules = rules
        .into_iter()
        .filter_map(|r| {
            let v = ev.rule_value(&r, facts);
            v.is_known().then(|| FiredRule { rule_id: r, value: v.into() })
        })
        .collect();
    Verdict { goal: session.goal.clone(), value: value.into(), pending, fired_rules }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PremiseState {
    Contradicted,
    Unknown,
    Supported,
    /// The premise carries no expression.
    Unbound,
}

impl PremiseState {
    pub fn as_str(self) -> &'static str {
        match self {
            PremiseState::Supported => "supported",
            PremiseState::Contradicted => "contradicted",
            PremiseState::Unknown => "unknown",
            PremiseState::Unbound => "unbound",
        }
    }
}

impl From<Tri> for PremiseState {
    fn from(t: Tri) -> Self {
        match t {
            Tri::True => PremiseState::Supported,
            Tri::False => PremiseState::Contradicted,
            Tri::Unknown => PremiseState::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeOutcome {
    ExceptionEstablished,
    ExceptionDefeated,
    Undetermined,
}

impl ChallengeOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            ChallengeOutcome::ExceptionEstablished => "exception_established",
            ChallengeOutcome::ExceptionDefeated => "exception_defeated",
            ChallengeOutcome::Undetermined => "undetermined",
        }
    }
}

/// Status of one conjunct of an exception premise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PremiseStatus {
    /// The question id for single-question conjuncts, else `<premise>.<n>`.
    pub premise_id: String,
    pub text: String,
    pub status: PremiseState,
    pub interpretive: bool,
    pub questions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeResult {
    pub pattern_id: String,
    pub exception_id: String,
    pub premise_statuses: Vec<PremiseStatus>,
    pub interpretation_points: Vec<String>,
    pub outcome: ChallengeOutcome,
    /// The exception's conclusion, present when the exception is established.
    pub conclusion: Option<String>,
}

/// Test an exceptional case against the session's facts without changing the session.
pub fn apply_exception(
    kb: &KnowledgeBase,
    session: &Session,
    pattern_id: &str,
    exception_id: &str,
) -> Result<ChallengeResult, EngineError> {
    challenge_facts(kb, &session.facts(), pattern_id, exception_id)
}

pub fn challenge_facts(
    kb: &KnowledgeBase,
    facts: &Facts,
    pattern_id: &str,
    exception_id: &str,
) -> Result<ChallengeResult, EngineError> {
    let pattern = kb.patterns.get(pattern_id).ok_or_else(|| EngineError::UnknownPattern(pattern_id.to_string()))?;
    let exception = pattern.exception(exception_id).ok_or_else(|| EngineError::UnknownException {
        pattern: pattern_id.to_string(),
        exception: exception_id.to_string(),
    })?;
    let premise = &exception.premise;
    let expr = premise.expr.as_ref().ok_or_else(|| EngineError::UnboundException(premise.id.clone()))?;
    let ev = Evaluator::new(kb);

    let conjuncts: Vec<&Expr> = match expr {
        Expr::And { args } => args.iter().collect(),
        other => vec![other],
    };
    let premise_statuses: Vec<PremiseStatus> =
        conjuncts.iter().enumerate().map(|(i, c)| conjunct_status(kb, &ev, premise, c, i, facts)).collect();

    let mut interpretation_points = Vec::new();
    if premise.interpretive {
        interpretation_points.push(premise.id.clone());
    }
    interpretation_points.extend(premise_statuses.iter().filter(|s| s.interpretive).map(|s| s.premise_id.clone()));

    let outcome = if premise_statuses.iter().any(|s| s.status == PremiseState::Contradicted) {
        ChallengeOutcome::ExceptionDefeated
    } else if premise_statuses.iter().all(|s| s.status == PremiseState::Supported) {
        ChallengeOutcome::ExceptionEstablished
    } else {
        ChallengeOutcome::Undetermined
    };
    Ok(ChallengeResult {
        pattern_id: pattern_id.to_string(),
        exception_id: exception_id.to_string(),
        premise_statuses,
        interpretation_points,
        conclusion: (outcome == ChallengeOutcome::ExceptionEstablished).then(|| exception.conclusion.clone()),
        outcome,
    })
}

fn conjunct_status(
    kb: &KnowledgeBase,
    ev: &Evaluator<'_>,
    premise: &Premise,
    conjunct: &Expr,
    index: usize,
    facts: &Facts,
) -> PremiseStatus {
    let questions = kb.reachable_questions(conjunct);
    let interpretive = questions.iter().any(|q| kb.questions.get(q).is_some_and(|q| q.interpretive));
    let (premise_id, text) = match (conjunct, questions.as_slice()) {
        (Expr::Not { expr }, [q]) if matches!(**expr, Expr::Atom { .. }) => {
            (q.clone(), format!("{} (expected answer: no)", kb.questions[q.as_str()].text))
        }
        (Expr::Atom { .. }, [q]) => (q.clone(), format!("{} (expected answer: yes)", kb.questions[q.as_str()].text)),
        (Expr::Cmp { cmp, literal, .. }, [q]) => (
            q.clone(),
            format!(
                "{} (expected: {} {})",
                kb.questions[q.as_str()].text,
                cmp.symbol(),
                crate::dsl::literal_to_string(literal)
            ),
        ),
        _ => (format!("{}.{}", premise.id, index + 1), crate::dsl::expr_to_string(conjunct)),
    };
    PremiseStatus { premise_id, text, status: ev.value(conjunct, facts).into(), interpretive, questions }
}

/// Effective interpretive flag: flagged on the premise, or bound to an interpretive question.
pub fn premise_is_interpretive(kb: &KnowledgeBase, premise: &Premise) -> bool {
    premise.interpretive
        || premise.expr.as_ref().is_some_and(|e| {
            kb.reachable_questions(e).iter().any(|q| kb.questions.get(q).is_some_and(|q| q.interpretive))
        })
}

pub fn premise_state(ev: &Evaluator<'_>, premise: &Premise, facts: &Facts) -> PremiseState {
    match &premise.expr {
        Some(e) => ev.value(e, facts).into(),
        None => PremiseState::Unbound,
    }
}
