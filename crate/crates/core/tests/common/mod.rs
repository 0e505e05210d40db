//! Random knowledge bases and interview drivers shared by the integration tests.
#![allow(dead_code)]

use chrono::{DateTime, NaiveDate, Utc};
use ckb_core::engine::{self, NextStep, Session};
use ckb_core::model::{
    AnswerKind, CmpOp, CompliancePattern, ExceptionalCase, Expr, KnowledgeBase, LegalAction, LegalClaim, Premise,
    PremiseKind, Provision, Question, RiskLevel, RiskRule, Rule, Value, Weights,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct GenOpts {
    pub max_questions: usize,
    pub max_rules: usize,
    pub max_depth: usize,
    pub mixed_kinds: bool,
    pub extras: bool,
}

impl Default for GenOpts {
    fn default() -> Self {
        GenOpts { max_questions: 10, max_rules: 5, max_depth: 3, mixed_kinds: true, extras: true }
    }
}

const WORDS: &[&str] = &["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet"];
const NUMBER_LITERALS: &[f64] = &[0.0, 2.5, 10.0, 25.0, 100.0, -4.0];

fn text(rng: &mut StdRng) -> String {
    let n = rng.gen_range(1..5);
    let mut words: Vec<String> = (0..n).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
    if rng.gen_bool(0.2) {
        words.push("\"quoted\"".into());
    }
    if rng.gen_bool(0.1) {
        words.push("back\\slash".into());
    }
    words.join(" ")
}

fn date(rng: &mut StdRng) -> NaiveDate {
    NaiveDate::from_ymd_opt(2018, rng.gen_range(1..=12), rng.gen_range(1..=28)).unwrap()
}

pub fn random_kb(rng: &mut StdRng, o: &GenOpts) -> KnowledgeBase {
    let mut kb = KnowledgeBase::default();

    if o.extras {
        for i in 0..rng.gen_range(0..3) {
            let recital = rng.gen_bool(0.3);
            let id = format!("prov{i}.x");
            kb.provisions.insert(
                id.clone(),
                Provision {
                    id,
                    instrument: "GDPR".into(),
                    article_or_recital: if recital {
                        format!("Recital {}", i + 1)
                    } else {
                        format!("Article {}", i + 30)
                    },
                    binding: !recital || rng.gen_bool(0.5),
                    quote: rng.gen_bool(0.5).then(|| text(rng)),
                    span: None,
                },
            );
        }
    }
    let provision_ids: Vec<String> = kb.provisions.keys().cloned().collect();
    let refs =
        |rng: &mut StdRng| -> Vec<String> { provision_ids.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect() };

    let nq = rng.gen_range(1..=o.max_questions);
    for i in 0..nq {
        let suffix: String = (0..3).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
        let id = format!("q{i}_{suffix}");
        let kind = if !o.mixed_kinds {
            AnswerKind::Boolean
        } else {
            match rng.gen_range(0..10) {
                0..=4 => AnswerKind::Boolean,
                5 | 6 => {
                    AnswerKind::Enum { labels: (0..rng.gen_range(2..=3)).map(|j| format!("lbl{i}{j}z")).collect() }
                }
                7 | 8 => AnswerKind::Number { unit: if rng.gen_bool(0.5) { "eur".into() } else { String::new() } },
                _ => AnswerKind::Date,
            }
        };
        kb.questions.insert(
            id.clone(),
            Question {
                id,
                text: text(rng),
                answer_kind: kind,
                help_text: rng.gen_bool(0.3).then(|| text(rng)),
                provision_refs: refs(rng),
                interpretive: rng.gen_bool(0.2),
                span: None,
            },
        );
    }

    let nr = rng.gen_range(1..=o.max_rules);
    for i in 0..nr {
        let id = format!("r{i}");
        let earlier: Vec<String> = kb.rules.keys().cloned().collect();
        let depth = rng.gen_range(1..=o.max_depth);
        let expr = gen_expr(rng, &kb, &earlier, depth);
        kb.rules.insert(
            id.clone(),
            Rule {
                id,
                expr,
                provision_refs: refs(rng),
                holds_text: rng.gen_bool(0.3).then(|| text(rng)),
                fails_text: rng.gen_bool(0.3).then(|| text(rng)),
                span: None,
            },
        );
    }
    let rule_ids: Vec<String> = kb.rules.keys().cloned().collect();
    kb.goals.push(rule_ids.last().unwrap().clone());
    if nr > 1 && rng.gen_bool(0.3) {
        kb.goals.push(rule_ids[0].clone());
    }

    if o.extras {
        for i in 0..rng.gen_range(0..3) {
            let depth = rng.gen_range(1..=o.max_depth);
            let e = gen_expr(rng, &kb, &rule_ids, depth);
            kb.risk_rules.insert(
                format!("risk{i}"),
                RiskRule {
                    id: format!("risk{i}"),
                    category: ["alpha", "beta"].choose(rng).unwrap().to_string(),
                    expr: e,
                    level: *RiskLevel::ALL.choose(rng).unwrap(),
                    provision_refs: refs(rng),
                    span: None,
                },
            );
        }
        for i in 0..rng.gen_range(0..2) {
            let provisions = refs(rng);
            let p = random_pattern(rng, &kb, &rule_ids, &format!("pat{i}"), o.max_depth, provisions);
            kb.patterns.insert(p.id.clone(), p);
        }
        if rng.gen_bool(0.3) {
            let base = rng.gen_range(1..5);
            kb.weights = Weights { low: base, medium: base * 3, high: base * 7, very_high: base * 20 };
        }
    }
    kb
}

fn random_pattern(
    rng: &mut StdRng,
    kb: &KnowledgeBase,
    rules: &[String],
    id: &str,
    depth: usize,
    provision_refs: Vec<String>,
) -> CompliancePattern {
    let premise = |rng: &mut StdRng, name: &str, kind: PremiseKind| Premise {
        id: name.to_string(),
        kind,
        text: text(rng),
        expr: (kind.requires_expr() || rng.gen_bool(0.5)).then(|| {
            let d = rng.gen_range(1..=depth);
            gen_expr(rng, kb, rules, d)
        }),
        interpretive: rng.gen_bool(0.3),
    };
    let claim = LegalClaim {
        general_rule: premise(rng, "gr", PremiseKind::GeneralRule),
        performance: premise(rng, "perf", PremiseKind::Performance),
        warrant: premise(rng, "war", PremiseKind::Warrant),
        conclusion: text(rng),
        else_consequence: text(rng),
    };
    let action = LegalAction {
        established_rule: premise(rng, "est", PremiseKind::EstablishedRule),
        remedies: premise(rng, "rem", PremiseKind::Remedies),
        violation: premise(rng, "vio", PremiseKind::Violation),
        conclusion: text(rng),
    };
    let exceptions = (0..rng.gen_range(1..=2))
        .map(|i| ExceptionalCase {
            id: format!("ex{i}"),
            premise: premise(rng, &format!("exp{i}"), PremiseKind::Exception),
            conclusion: text(rng),
        })
        .collect();
    CompliancePattern { id: id.to_string(), provision_refs, claim, action, exceptions, span: None }
}

/// Expression of depth at most `depth` (leaves count as depth 1).
pub fn gen_expr(rng: &mut StdRng, kb: &KnowledgeBase, rules: &[String], depth: usize) -> Expr {
    if depth <= 1 || rng.gen_bool(0.25) {
        return leaf(rng, kb, rules);
    }
    match rng.gen_range(0..10) {
        0 | 1 => Expr::not(gen_expr(rng, kb, rules, depth - 1)),
        n => {
            let arity = if rng.gen_bool(0.1) { 1 } else { rng.gen_range(2..=3) };
            let args = (0..arity).map(|_| gen_expr(rng, kb, rules, depth - 1)).collect();
            if n % 2 == 0 {
                Expr::and(args)
            } else {
                Expr::or(args)
            }
        }
    }
}

fn leaf(rng: &mut StdRng, kb: &KnowledgeBase, rules: &[String]) -> Expr {
    if !rules.is_empty() && rng.gen_bool(0.25) {
        return Expr::rule(rules.choose(rng).unwrap().clone());
    }
    let q = kb.questions.values().collect::<Vec<_>>().choose(rng).copied().unwrap().clone();
    match &q.answer_kind {
        AnswerKind::Boolean => Expr::atom(q.id),
        AnswerKind::Enum { labels } => {
            let op = if rng.gen_bool(0.5) { CmpOp::Eq } else { CmpOp::Ne };
            Expr::cmp(q.id, op, Value::Label(labels.choose(rng).unwrap().clone()))
        }
        AnswerKind::Number { .. } => {
            Expr::cmp(q.id, *CmpOp::ALL.choose(rng).unwrap(), Value::Number(*NUMBER_LITERALS.choose(rng).unwrap()))
        }
        AnswerKind::Date => Expr::cmp(q.id, *CmpOp::ALL.choose(rng).unwrap(), Value::Date(date(rng))),
    }
}

/// How generated answers look. `Distinctive` values never occur as
/// substrings of generated ids or fixed report text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answers {
    Plain,
    Distinctive,
}

pub fn random_value(rng: &mut StdRng, q: &Question, style: Answers) -> Value {
    match &q.answer_kind {
        AnswerKind::Boolean => Value::Bool(rng.gen_bool(0.5)),
        AnswerKind::Enum { labels } => Value::Label(labels.choose(rng).unwrap().clone()),
        AnswerKind::Number { .. } => match style {
            Answers::Plain => {
                let base = *NUMBER_LITERALS.choose(rng).unwrap();
                Value::Number(base + [-1.0, 0.0, 1.0].choose(rng).unwrap())
            }
            Answers::Distinctive => Value::Number(rng.gen_range(-90_000..-10_000) as f64 - 0.375),
        },
        AnswerKind::Date => Value::Date(date(rng)),
    }
}

pub fn t(n: i64) -> DateTime<Utc> {
    DateTime::from_timestamp(1_530_000_000 + n, 0).unwrap()
}

/// Run an interview driven only by `next_question`, answering at random.
/// Stops after `max_answers` answers if the goal is still open.
pub fn drive(
    rng: &mut StdRng,
    kb: &KnowledgeBase,
    goal: &str,
    id: &str,
    max_answers: usize,
    style: Answers,
) -> Session {
    let mut s = engine::start_session(kb, goal, id, t(0)).unwrap();
    let mut clock = 1;
    for _ in 0..max_answers {
        match engine::next_question(kb, &mut s, t(clock)) {
            NextStep::Concluded { .. } => break,
            NextStep::Question { question } => {
                let v = random_value(rng, &question, style);
                engine::submit_answer(kb, &mut s, &question.id, v, t(clock)).unwrap();
            }
        }
        clock += 1;
    }
    if s.is_open() {
        engine::next_question(kb, &mut s, t(clock));
    }
    s
}

pub const GOLDEN_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden");

/// Compare against a checked-in golden file; with `UPDATE_GOLDEN` set the
/// file is rewritten instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = format!("{GOLDEN_DIR}/{name}");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b).map_or(0, |i| i + 1);
        Err(format!("{name} differs from golden file (first difference at line {line})"))
    }
}

/// The seed KB session with all three DPO conditions answered "no".
pub fn dpo_exempt_session(kb: &KnowledgeBase) -> Session {
    let mut s = engine::start_session(kb, "art39.training_required", "dpo-exempt", t(0)).unwrap();
    for (i, q) in
        ["dpo.public_authority", "dpo.large_scale_monitoring", "dpo.special_category_processing"].iter().enumerate()
    {
        engine::submit_answer(kb, &mut s, q, Value::Bool(false), t(i as i64 + 1)).unwrap();
    }
    s
}
