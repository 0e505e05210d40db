//! Three-valued evaluation over partially answered facts.
//!
//! [`kleene`] folds answered facts into an expression using strong Kleene
//! connectives. Kleene logic is sound but incomplete when an atom occurs more
//! than once (`x or not x` stays unknown), so [`Evaluator::value`] refines an
//! unknown result by splitting on unanswered questions. The result is unknown
//! exactly when two completions of the facts disagree.
//!
//! Splitting needs a finite set of values per question. Comparisons only
//! test a question against literals, so the literals of all comparisons on a
//! question partition its domain into finitely many classes, and one
//! representative per class is enough.

use std::collections::{HashMap, HashSet};

use chrono::Duration;

use crate::model::{AnswerKind, Expr, KnowledgeBase, Value};

pub type Facts = HashMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    pub fn from_bool(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }

    pub fn is_known(self) -> bool {
        self != Tri::Unknown
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Tri::True => Some(true),
            Tri::False => Some(false),
            Tri::Unknown => None,
        }
    }

    pub fn negate(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }

    pub fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    pub fn or(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::True, _) | (_, Tri::True) => Tri::True,
            (Tri::False, Tri::False) => Tri::False,
            _ => Tri::Unknown,
        }
    }
}

/// Strong Kleene evaluation. Unanswered questions are unknown.
pub fn kleene(kb: &KnowledgeBase, expr: &Expr, facts: &Facts) -> Tri {
    let mut memo = HashMap::new();
    kleene_memo(kb, expr, facts, &mut memo)
}

fn kleene_memo<'a>(kb: &'a KnowledgeBase, expr: &'a Expr, facts: &Facts, memo: &mut HashMap<&'a str, Tri>) -> Tri {
    match expr {
        Expr::Atom { question } => match facts.get(question) {
            Some(Value::Bool(b)) => Tri::from_bool(*b),
            _ => Tri::Unknown,
        },
        Expr::Cmp { question, cmp, literal } => match (facts.get(question), literal) {
            (Some(Value::Number(a)), Value::Number(b)) => Tri::from_bool(cmp.test(a, b)),
            (Some(Value::Date(a)), Value::Date(b)) => Tri::from_bool(cmp.test(a, b)),
            (Some(Value::Label(a)), Value::Label(b)) => Tri::from_bool(cmp.test(a, b)),
            _ => Tri::Unknown,
        },
        Expr::RuleRef { rule } => {
            if let Some(v) = memo.get(rule.as_str()) {
                return *v;
            }
            let v = match kb.rules.get(rule) {
                Some(r) => kleene_memo(kb, &r.expr, facts, memo),
                None => Tri::Unknown,
            };
            memo.insert(rule, v);
            v
        }
        Expr::Not { expr } => kleene_memo(kb, expr, facts, memo).negate(),
        Expr::And { args } => {
            let mut acc = Tri::True;
            for a in args {
                acc = acc.and(kleene_memo(kb, a, facts, memo));
                if acc == Tri::False {
                    break;
                }
            }
            acc
        }
        Expr::Or { args } => {
            let mut acc = Tri::False;
            for a in args {
                acc = acc.or(kleene_memo(kb, a, facts, memo));
                if acc == Tri::True {
                    break;
                }
            }
            acc
        }
    }
}

/// Exact three-valued evaluation and relevance testing against one knowledge base.
pub struct Evaluator<'kb> {
    kb: &'kb KnowledgeBase,
    representatives: HashMap<&'kb str, Vec<Value>>,
}

impl<'kb> Evaluator<'kb> {
    pub fn new(kb: &'kb KnowledgeBase) -> Self {
        let mut literals: HashMap<&str, Vec<&Value>> = HashMap::new();
        let mut exprs: Vec<&Expr> = kb.rules.values().map(|r| &r.expr).collect();
        exprs.extend(kb.risk_rules.values().map(|r| &r.expr));
        for p in kb.patterns.values() {
            exprs.extend(p.premises().into_iter().filter_map(|(_, pr)| pr.expr.as_ref()));
        }
        for e in exprs {
            e.walk(&mut |node| {
                if let Expr::Cmp { question, literal, .. } = node {
                    literals.entry(question.as_str()).or_default().push(literal);
                }
            });
        }
        let representatives = kb
            .questions
            .values()
            .map(|q| {
                let lits = literals.get(q.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                (q.id.as_str(), representatives(&q.answer_kind, lits))
            })
            .collect();
        Evaluator { kb, representatives }
    }

    pub fn kb(&self) -> &'kb KnowledgeBase {
        self.kb
    }

    /// One value from each equivalence class of the question's domain.
    pub fn representatives(&self, question: &str) -> &[Value] {
        self.representatives.get(question).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn kleene(&self, expr: &Expr, facts: &Facts) -> Tri {
        kleene(self.kb, expr, facts)
    }

    /// Unknown iff two completions of `facts` give different values.
    pub fn value(&self, expr: &Expr, facts: &Facts) -> Tri {
        let fast = self.kleene(expr, facts);
        if fast.is_known() {
            return fast;
        }
        let open = self.open_questions(expr, facts);
        let mut work = facts.clone();
        self.split(expr, &mut work, &open)
    }

    pub fn rule_value(&self, rule: &str, facts: &Facts) -> Tri {
        match self.kb.rules.get(rule) {
            Some(r) => self.value(&r.expr, facts),
            None => Tri::Unknown,
        }
    }

    /// Unanswered questions reachable from `expr`, in order of first appearance.
    pub fn open_questions(&self, expr: &Expr, facts: &Facts) -> Vec<String> {
        self.kb.reachable_questions(expr).into_iter().filter(|q| !facts.contains_key(q)).collect()
    }

    fn split(&self, expr: &Expr, facts: &mut Facts, open: &[String]) -> Tri {
        let k = self.kleene(expr, facts);
        if k.is_known() {
            return k;
        }
        let Some((q, rest)) = open.split_first() else { return k };
        let mut seen = None;
        for v in self.representatives(q) {
            facts.insert(q.clone(), v.clone());
            let r = self.split(expr, facts, rest);
            facts.remove(q);
            match (r, seen) {
                (Tri::Unknown, _) => return Tri::Unknown,
                (r, Some(s)) if r != s => return Tri::Unknown,
                (r, _) => seen = Some(r),
            }
        }
        seen.unwrap_or(Tri::Unknown)
    }

    /// A question is relevant when it is unanswered and some completion of
    /// the other unanswered questions makes the expression's value depend on it.
    pub fn is_relevant(&self, expr: &Expr, facts: &Facts, question: &str) -> bool {
        if facts.contains_key(question) {
            return false;
        }
        let open = self.open_questions(expr, facts);
        if !open.iter().any(|q| q == question) {
            return false;
        }
        let others: Vec<String> = open.into_iter().filter(|q| q != question).collect();
        let mut work = facts.clone();
        self.relevance_split(expr, &mut work, question, &others)
    }

    fn relevance_split(&self, expr: &Expr, facts: &mut Facts, question: &str, open: &[String]) -> bool {
        let mut definite = None;
        let mut undecided = false;
        for v in self.representatives(question) {
            facts.insert(question.to_string(), v.clone());
            let r = self.kleene(expr, facts);
            facts.remove(question);
            match (r, definite) {
                (Tri::Unknown, _) => undecided = true,
                (r, Some(d)) if r != d => return true,
                (r, _) => definite = Some(r),
            }
        }
        if !undecided {
            return false;
        }
        let Some((q, rest)) = open.split_first() else { return false };
        for v in self.representatives(q) {
            facts.insert(q.clone(), v.clone());
            let found = self.relevance_split(expr, facts, question, rest);
            facts.remove(q);
            if found {
                return true;
            }
        }
        false
    }

    /// An irredundant subset of the answered facts under which `expr` still
    /// evaluates to `target`. Later-appearing facts are dropped first, so the
    /// result favours the atoms a left-to-right short-circuit would cite.
    pub fn sufficient_facts(&self, expr: &Expr, facts: &Facts, target: Tri) -> Vec<String> {
        let candidates: Vec<String> =
            self.kb.reachable_questions(expr).into_iter().filter(|q| facts.contains_key(q)).collect();
        let mut work: Facts = candidates.iter().map(|q| (q.clone(), facts[q].clone())).collect();
        let mut keep: HashSet<String> = candidates.iter().cloned().collect();
        for q in candidates.iter().rev() {
            let v = work.remove(q).expect("candidate present");
            if self.value(expr, &work) == target {
                keep.remove(q);
            } else {
                work.insert(q.clone(), v);
            }
        }
        candidates.into_iter().filter(|q| keep.contains(q)).collect()
    }
}

fn representatives(kind: &AnswerKind, literals: &[&Value]) -> Vec<Value> {
    match kind {
        AnswerKind::Boolean => vec![Value::Bool(true), Value::Bool(false)],
        AnswerKind::Enum { labels } => labels.iter().cloned().map(Value::Label).collect(),
        AnswerKind::Number { .. } => {
            let mut points: Vec<f64> = literals
                .iter()
                .filter_map(|v| match v {
                    Value::Number(n) => Some(*n),
                    _ => None,
                })
                .collect();
            points.sort_by(|a, b| a.total_cmp(b));
            points.dedup();
            if points.is_empty() {
                return vec![Value::Number(0.0)];
            }
            let mut out = vec![points[0] - 1.0];
            for w in points.windows(2) {
                out.push(w[0]);
                out.push(w[0] + (w[1] - w[0]) / 2.0);
            }
            let last = *points.last().unwrap();
            out.push(last);
            out.push(last + 1.0);
            out.into_iter().map(Value::Number).collect()
        }
        AnswerKind::Date => {
            let mut points: Vec<_> = literals
                .iter()
                .filter_map(|v| match v {
                    Value::Date(d) => Some(*d),
                    _ => None,
                })
                .collect();
            points.sort();
            points.dedup();
            let Some(&first) = points.first() else {
                return vec![Value::Date(chrono::NaiveDate::from_ymd_opt(2000, 1, 1).unwrap())];
            };
            let day = Duration::days(1);
            let mut out = vec![first - day];
            for w in points.windows(2) {
                out.push(w[0]);
                if w[0] + day < w[1] {
                    out.push(w[0] + day);
                }
            }
            let last = *points.last().unwrap();
            out.push(last);
            out.push(last + day);
            out.into_iter().map(Value::Date).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_kb;

    fn facts(pairs: &[(&str, Value)]) -> Facts {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    const KB: &str = r#"
question x: boolean
  text "x"
question y: boolean
  text "y"
question n: number
  text "n"
rule any: if x or y
rule both: if x and y
rule taut: if x or not x
rule band: if n > 3 and n < 5
rule gap: if n > 3 and n < 3
"#;

    #[test]
    fn or_short_circuits() {
        let kb = parse_kb(KB).unwrap();
        let ev = Evaluator::new(&kb);
        let f = facts(&[("x", Value::Bool(true))]);
        assert_eq!(ev.rule_value("any", &f), Tri::True);
        assert_eq!(ev.rule_value("both", &f), Tri::Unknown);
        assert!(ev.is_relevant(&kb.rules["both"].expr, &f, "y"));
        assert!(!ev.is_relevant(&kb.rules["any"].expr, &f, "y"));
    }

    #[test]
    fn exact_semantics_beyond_kleene() {
        let kb = parse_kb(KB).unwrap();
        let ev = Evaluator::new(&kb);
        let empty = Facts::new();
        assert_eq!(kleene(&kb, &kb.rules["taut"].expr, &empty), Tri::Unknown);
        assert_eq!(ev.rule_value("taut", &empty), Tri::True);
        assert!(!ev.is_relevant(&kb.rules["taut"].expr, &empty, "x"));
        assert_eq!(ev.rule_value("gap", &empty), Tri::False);
        assert_eq!(ev.rule_value("band", &empty), Tri::Unknown);
    }

    #[test]
    fn number_representatives_cover_every_interval() {
        let kb = parse_kb(KB).unwrap();
        let ev = Evaluator::new(&kb);
        assert_eq!(ev.representatives("n"), &[2.0, 3.0, 4.0, 5.0, 6.0].map(Value::Number));
    }

    #[test]
    fn sufficient_facts_cite_the_deciding_atom() {
        let kb = parse_kb(KB).unwrap();
        let ev = Evaluator::new(&kb);
        let f = facts(&[("x", Value::Bool(true)), ("y", Value::Bool(false))]);
        assert_eq!(ev.sufficient_facts(&kb.rules["any"].expr, &f, Tri::True), vec!["x"]);
        let f = facts(&[("x", Value::Bool(true)), ("y", Value::Bool(true))]);
        assert_eq!(ev.sufficient_facts(&kb.rules["any"].expr, &f, Tri::True), vec!["x"]);
        assert_eq!(ev.sufficient_facts(&kb.rules["both"].expr, &f, Tri::True), vec!["x", "y"]);
    }
}
