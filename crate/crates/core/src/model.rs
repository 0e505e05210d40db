//! Knowledge-base domain types.
//!
//! A [`KnowledgeBase`] holds provisions, questions, rules, compliance
//! patterns and risk rules, each keyed by id in declaration order. It is
//! treated as immutable once it has been parsed and validated.

use std::fmt;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Location of a declaration in a `.ckb` source file. Line and column are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// An article or recital of a legal instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provision {
    pub id: String,
    pub instrument: String,
    pub article_or_recital: String,
    /// Recitals are explanatory and non-binding; articles are binding.
    pub binding: bool,
    pub quote: Option<String>,
    #[serde(skip)]
    pub span: Option<SourceSpan>,
}

impl Provision {
    pub fn is_recital(&self) -> bool {
        self.article_or_recital.trim_start().to_ascii_lowercase().starts_with("recital")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnswerKind {
    Boolean,
    Enum { labels: Vec<String> },
    Number { unit: String },
    Date,
}

impl AnswerKind {
    pub fn name(&self) -> &'static str {
        match self {
            AnswerKind::Boolean => "boolean",
            AnswerKind::Enum { .. } => "enum",
            AnswerKind::Number { .. } => "number",
            AnswerKind::Date => "date",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub answer_kind: AnswerKind,
    pub help_text: Option<String>,
    /// Provisions shown alongside the question on request.
    pub provision_refs: Vec<String>,
    /// The question hinges on a term that is open to interpretation.
    pub interpretive: bool,
    #[serde(skip)]
    pub span: Option<SourceSpan>,
}

impl Question {
    pub fn enum_labels(&self) -> &[String] {
        match &self.answer_kind {
            AnswerKind::Enum { labels } => labels,
            _ => &[],
        }
    }
}

/// A recorded or literal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    Bool(bool),
    Label(String),
    Number(f64),
    Date(NaiveDate),
}

impl Value {
    pub fn matches(&self, kind: &AnswerKind) -> bool {
        match (self, kind) {
            (Value::Bool(_), AnswerKind::Boolean) => true,
            (Value::Label(l), AnswerKind::Enum { labels }) => labels.contains(l),
            (Value::Number(n), AnswerKind::Number { .. }) => n.is_finite(),
            (Value::Date(_), AnswerKind::Date) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(true) => f.write_str("yes"),
            Value::Bool(false) => f.write_str("no"),
            Value::Label(l) => f.write_str(l),
            Value::Number(n) => write!(f, "{n}"),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    pub fn test<T: PartialOrd>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

/// Propositional expression with comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Expr {
    /// A boolean question.
    Atom {
        question: String,
    },
    RuleRef {
        rule: String,
    },
    Not {
        expr: Box<Expr>,
    },
    And {
        args: Vec<Expr>,
    },
    Or {
        args: Vec<Expr>,
    },
    Cmp {
        question: String,
        cmp: CmpOp,
        literal: Value,
    },
}

impl Expr {
    pub fn atom(q: impl Into<String>) -> Expr {
        Expr::Atom { question: q.into() }
    }

    pub fn rule(r: impl Into<String>) -> Expr {
        Expr::RuleRef { rule: r.into() }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Not { expr: Box::new(e) }
    }

    pub fn and(args: Vec<Expr>) -> Expr {
        Expr::And { args }
    }

    pub fn or(args: Vec<Expr>) -> Expr {
        Expr::Or { args }
    }

    pub fn cmp(q: impl Into<String>, cmp: CmpOp, literal: Value) -> Expr {
        Expr::Cmp { question: q.into(), cmp, literal }
    }

    /// Questions referenced directly (not through rule references), in order of first appearance.
    pub fn direct_questions(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| match e {
            Expr::Atom { question } | Expr::Cmp { question, .. } if !out.contains(&question.as_str()) => {
                out.push(question.as_str());
            }
            _ => {}
        });
        out
    }

    /// Rules referenced directly, in order of first appearance.
    pub fn direct_rules(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::RuleRef { rule } = e {
                if !out.contains(&rule.as_str()) {
                    out.push(rule.as_str());
                }
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Not { expr } => expr.walk(f),
            Expr::And { args } | Expr::Or { args } => args.iter().for_each(|a| a.walk(f)),
            _ => {}
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Not { expr } => 1 + expr.depth(),
            Expr::And { args } | Expr::Or { args } => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub expr: Expr,
    pub provision_refs: Vec<String>,
    /// Conclusion text used when the rule holds.
    pub holds_text: Option<String>,
    /// Conclusion text used when the rule fails.
    pub fails_text: Option<String>,
    #[serde(skip)]
    pub span: Option<SourceSpan>,
}

impl Rule {
    pub fn conclusion(&self, holds: bool) -> String {
        let text = if holds { &self.holds_text } else { &self.fails_text };
        match text {
            Some(t) => t.clone(),
            None => format!("{} {}", self.id, if holds { "holds" } else { "fails" }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PremiseKind {
    GeneralRule,
    Performance,
    Warrant,
    EstablishedRule,
    Remedies,
    Violation,
    Exception,
}

impl PremiseKind {
    pub const ALL: [PremiseKind; 7] = [
        PremiseKind::GeneralRule,
        PremiseKind::Performance,
        PremiseKind::Warrant,
        PremiseKind::EstablishedRule,
        PremiseKind::Remedies,
        PremiseKind::Violation,
        PremiseKind::Exception,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            PremiseKind::GeneralRule => "general_rule",
            PremiseKind::Performance => "performance",
            PremiseKind::Warrant => "warrant",
            PremiseKind::EstablishedRule => "established_rule",
            PremiseKind::Remedies => "remedies",
            PremiseKind::Violation => "violation",
            PremiseKind::Exception => "exception",
        }
    }

    pub fn from_keyword(s: &str) -> Option<PremiseKind> {
        PremiseKind::ALL.into_iter().find(|k| k.keyword() == s)
    }

    /// Heading used in rendered argument documents.
    pub fn heading(self) -> &'static str {
        match self {
            PremiseKind::GeneralRule => "General rule premise",
            PremiseKind::Performance => "Performance premise",
            PremiseKind::Warrant => "Warrant",
            PremiseKind::EstablishedRule => "Established rule premise",
            PremiseKind::Remedies => "Remedies premise",
            PremiseKind::Violation => "Violation premise",
            PremiseKind::Exception => "Exception premise",
        }
    }

    pub fn requires_expr(self) -> bool {
        matches!(self, PremiseKind::Warrant | PremiseKind::Exception)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Premise {
    pub id: String,
    pub kind: PremiseKind,
    pub text: String,
    /// Binds the premise to interview facts.
    pub expr: Option<Expr>,
    pub interpretive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegalClaim {
    pub general_rule: Premise,
    pub performance: Premise,
    pub warrant: Premise,
    pub conclusion: String,
    pub else_consequence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegalAction {
    pub established_rule: Premise,
    pub remedies: Premise,
    pub violation: Premise,
    pub conclusion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalCase {
    pub id: String,
    pub premise: Premise,
    pub conclusion: String,
}

/// Opening-stage argument for a compliance question: the claim made against
/// the organisation, the action that follows from it, and the exceptional
/// cases the organisation may raise in response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompliancePattern {
    pub id: String,
    pub provision_refs: Vec<String>,
    pub claim: LegalClaim,
    pub action: LegalAction,
    pub exceptions: Vec<ExceptionalCase>,
    #[serde(skip)]
    pub span: Option<SourceSpan>,
}

impl CompliancePattern {
    /// All premises in document order, paired with the slot kind they occupy.
    pub fn premises(&self) -> Vec<(PremiseKind, &Premise)> {
        let mut out = vec![
            (PremiseKind::GeneralRule, &self.claim.general_rule),
            (PremiseKind::Performance, &self.claim.performance),
            (PremiseKind::Warrant, &self.claim.warrant),
            (PremiseKind::EstablishedRule, &self.action.established_rule),
            (PremiseKind::Remedies, &self.action.remedies),
            (PremiseKind::Violation, &self.action.violation),
        ];
        out.extend(self.exceptions.iter().map(|e| (PremiseKind::Exception, &e.premise)));
        out
    }

    pub fn exception(&self, id: &str) -> Option<&ExceptionalCase> {
        self.exceptions.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskLevel {
    Low,
    Medium,
    High,
    VeryHigh,
}

impl RiskLevel {
    pub const ALL: [RiskLevel; 4] = [RiskLevel::Low, RiskLevel::Medium, RiskLevel::High, RiskLevel::VeryHigh];

    pub fn keyword(self) -> &'static str {
        match self {
            RiskLevel::Low => "low",
            RiskLevel::Medium => "medium",
            RiskLevel::High => "high",
            RiskLevel::VeryHigh => "very_high",
        }
    }

    pub fn from_keyword(s: &str) -> Option<RiskLevel> {
        RiskLevel::ALL.into_iter().find(|l| l.keyword() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRule {
    pub id: String,
    pub category: String,
    pub expr: Expr,
    pub level: RiskLevel,
    pub provision_refs: Vec<String>,
    #[serde(skip)]
    pub span: Option<SourceSpan>,
}

/// Integer weight per risk level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weights {
    pub low: u64,
    pub medium: u64,
    pub high: u64,
    pub very_high: u64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { low: 1, medium: 2, high: 4, very_high: 8 }
    }
}

impl Weights {
    pub fn get(&self, level: RiskLevel) -> u64 {
        match level {
            RiskLevel::Low => self.low,
            RiskLevel::Medium => self.medium,
            RiskLevel::High => self.high,
            RiskLevel::VeryHigh => self.very_high,
        }
    }

    pub fn set(&mut self, level: RiskLevel, w: u64) {
        match level {
            RiskLevel::Low => self.low = w,
            RiskLevel::Medium => self.medium = w,
            RiskLevel::High => self.high = w,
            RiskLevel::VeryHigh => self.very_high = w,
        }
    }

    pub fn strictly_increasing(&self) -> bool {
        self.low < self.medium && self.medium < self.high && self.high < self.very_high
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub provisions: IndexMap<String, Provision>,
    pub questions: IndexMap<String, Question>,
    pub rules: IndexMap<String, Rule>,
    pub patterns: IndexMap<String, CompliancePattern>,
    pub risk_rules: IndexMap<String, RiskRule>,
    pub weights: Weights,
    /// Rule ids offered as interview goals.
    pub goals: Vec<String>,
}

impl KnowledgeBase {
    pub fn question(&self, id: &str) -> Option<&Question> {
        self.questions.get(id)
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.get(id)
    }

    pub fn pattern(&self, id: &str) -> Option<&CompliancePattern> {
        self.patterns.get(id)
    }

    /// Copy with every source span cleared, for structural comparison.
    pub fn without_spans(&self) -> KnowledgeBase {
        let mut kb = self.clone();
        kb.provisions.values_mut().for_each(|p| p.span = None);
        kb.questions.values_mut().for_each(|q| q.span = None);
        kb.rules.values_mut().for_each(|r| r.span = None);
        kb.patterns.values_mut().for_each(|p| p.span = None);
        kb.risk_rules.values_mut().for_each(|r| r.span = None);
        kb
    }

    /// Content hash of the canonical text form.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = crate::dsl::serialize_kb(self);
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Questions reachable from an expression, following rule references,
    /// in order of first appearance.
    pub fn reachable_questions(&self, expr: &Expr) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut seen_rules: Vec<&str> = Vec::new();
        self.collect_questions(expr, &mut out, &mut seen_rules);
        out
    }

    fn collect_questions<'a>(&'a self, expr: &'a Expr, out: &mut Vec<String>, seen: &mut Vec<&'a str>) {
        match expr {
            Expr::Atom { question } | Expr::Cmp { question, .. } => {
                if !out.iter().any(|q| q == question) {
                    out.push(question.clone());
                }
            }
            Expr::RuleRef { rule } => {
                if seen.contains(&rule.as_str()) {
                    return;
                }
                seen.push(rule);
                if let Some(r) = self.rules.get(rule) {
                    self.collect_questions(&r.expr, out, seen);
                }
            }
            Expr::Not { expr } => self.collect_questions(expr, out, seen),
            Expr::And { args } | Expr::Or { args } => {
                for a in args {
                    self.collect_questions(a, out, seen);
                }
            }
        }
    }

    pub fn question_index(&self, id: &str) -> usize {
        self.questions.get_index_of(id).unwrap_or(usize::MAX)
    }

    pub fn rule_index(&self, id: &str) -> usize {
        self.rules.get_index_of(id).unwrap_or(usize::MAX)
    }
}
