//! Recursive-descent parser for the `.ckb` knowledge-base format.

use std::collections::HashMap;

use indexmap::IndexMap;

use super::lexer::{tokenize, Line, Tok, Token};
use super::{ParseError, ParseErrorKind, ParseErrors};
use crate::model::*;
use crate::validate::{validate_kb, Severity};

const TOP_LEVEL: [&str; 8] = ["ckb", "provision", "question", "rule", "goal", "pattern", "riskrule", "weights"];
pub(crate) const RESERVED: [&str; 5] = ["if", "then", "and", "or", "not"];

pub fn parse(text: &str, file: &str) -> Result<KnowledgeBase, ParseErrors> {
    let (lines, lex_errors) = tokenize(text);
    let mut p = Parser {
        file,
        lines,
        idx: 0,
        kb: KnowledgeBase::default(),
        errors: lex_errors
            .into_iter()
            .map(|e| ParseError {
                kind: ParseErrorKind::Syntax,
                location: format!("{file}:{}:{}", e.line, e.column),
                message: e.message,
            })
            .collect(),
        names: HashMap::new(),
        weights_seen: false,
    };
    p.run();
    p.resolve_refs();
    if !p.errors.is_empty() {
        return Err(ParseErrors(p.errors));
    }
    let report = validate_kb(&p.kb);
    if !report.is_valid() {
        let errors = report
            .diagnostics
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| ParseError {
                kind: if d.message.starts_with("cycle:") {
                    ParseErrorKind::Cycle
                } else if d.message.starts_with("unknown ") {
                    ParseErrorKind::UnknownReference
                } else {
                    ParseErrorKind::Invalid
                },
                location: d.location,
                message: d.message,
            })
            .collect();
        return Err(ParseErrors(errors));
    }
    Ok(p.kb)
}

struct Cursor<'a> {
    file: &'a str,
    line: &'a Line,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Cursor<'a> {
    fn new(file: &'a str, line: &'a Line) -> Self {
        Cursor { file, line, pos: 0 }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.line.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Tok> {
        self.line.tokens.get(self.pos + n).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.line.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.line.tokens.len()
    }

    fn column(&self) -> usize {
        match self.line.tokens.get(self.pos) {
            Some(t) => t.column,
            None => self.line.tokens.last().map(|t| t.column + 1).unwrap_or(1),
        }
    }

    fn span(&self) -> SourceSpan {
        SourceSpan { file: self.file.to_string(), line: self.line.number, column: self.line.column }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Syntax,
            location: format!("{}:{}:{}", self.file, self.line.number, self.column()),
            message: msg.into(),
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        match self.peek() {
            Some(t) => self.err(format!("expected {wanted}, found {}", t.describe())),
            None => self.err(format!("expected {wanted}, found end of line")),
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(self.unexpected(what)),
        }
    }

    /// An entity id; expression keywords are not allowed.
    fn id(&mut self, what: &str) -> PResult<String> {
        let s = self.ident(what)?;
        if RESERVED.contains(&s.as_str()) {
            self.pos -= 1;
            return Err(self.err(format!("`{s}` is a reserved word and cannot be used as an id")));
        }
        Ok(s)
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{kw}`"))),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn sym(&mut self, sym: &str) -> PResult<()> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == sym => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{sym}`"))),
        }
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym)
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn end(&self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.unexpected("end of line"))
        }
    }

    fn id_list(&mut self) -> PResult<Vec<String>> {
        let mut out = Vec::new();
        while !self.at_end() {
            out.push(self.ident("provision id")?);
        }
        if out.is_empty() {
            return Err(self.unexpected("provision id"));
        }
        Ok(out)
    }

    // expr := and ('or' and)*
    fn expr(&mut self) -> PResult<Expr> {
        let mut args = vec![self.conj()?];
        while self.is_keyword("or") {
            self.pos += 1;
            args.push(self.conj()?);
        }
        Ok(if args.len() == 1 { args.pop().unwrap() } else { Expr::Or { args } })
    }

    fn conj(&mut self) -> PResult<Expr> {
        let mut args = vec![self.unary()?];
        while self.is_keyword("and") {
            self.pos += 1;
            args.push(self.unary()?);
        }
        Ok(if args.len() == 1 { args.pop().unwrap() } else { Expr::And { args } })
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.is_keyword("not") {
            self.pos += 1;
            return Ok(Expr::not(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        if self.is_sym("(") {
            self.pos += 1;
            let e = self.expr()?;
            self.sym(")")?;
            return Ok(e);
        }
        if let (Some(Tok::Ident(op)), Some(Tok::Sym("("))) = (self.peek(), self.peek_at(1)) {
            if op == "and" || op == "or" {
                let is_and = op == "and";
                self.pos += 2;
                let mut args = vec![self.expr()?];
                while self.is_sym(",") {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.sym(")")?;
                return Ok(if is_and { Expr::And { args } } else { Expr::Or { args } });
            }
        }
        let name = self.id("question or rule id")?;
        let cmp = match self.peek() {
            Some(Tok::Sym("=")) => Some(CmpOp::Eq),
            Some(Tok::Sym("!=")) => Some(CmpOp::Ne),
            Some(Tok::Sym("<")) => Some(CmpOp::Lt),
            Some(Tok::Sym("<=")) => Some(CmpOp::Le),
            Some(Tok::Sym(">")) => Some(CmpOp::Gt),
            Some(Tok::Sym(">=")) => Some(CmpOp::Ge),
            _ => None,
        };
        let Some(cmp) = cmp else {
            return Ok(Expr::Atom { question: name });
        };
        self.pos += 1;
        let literal = match self.next().map(|t| &t.tok) {
            Some(Tok::Number(n)) => Value::Number(*n),
            Some(Tok::Date(d)) => Value::Date(*d),
            Some(Tok::Str(s)) => Value::Label(s.clone()),
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("number, date or quoted label"));
            }
        };
        Ok(Expr::Cmp { question: name, cmp, literal })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Namespace {
    QuestionOrRule,
    Provision,
    Pattern,
    RiskRule,
}

struct Parser<'a> {
    file: &'a str,
    lines: Vec<Line>,
    idx: usize,
    kb: KnowledgeBase,
    errors: Vec<ParseError>,
    names: HashMap<(Namespace, String), SourceSpan>,
    weights_seen: bool,
}

fn first_ident(line: &Line) -> Option<&str> {
    match line.tokens.first().map(|t| &t.tok) {
        Some(Tok::Ident(s)) => Some(s),
        _ => None,
    }
}

fn is_top_level(line: &Line) -> bool {
    first_ident(line).is_some_and(|s| TOP_LEVEL.contains(&s))
}

impl<'a> Parser<'a> {
    fn run(&mut self) {
        while self.idx < self.lines.len() {
            let start = self.idx;
            let kw = first_ident(&self.lines[start]).unwrap_or("").to_string();
            let result = match kw.as_str() {
                "ckb" => self.header(),
                "provision" => self.provision(),
                "question" => self.question(),
                "rule" => self.rule(),
                "goal" => self.goal(),
                "pattern" => self.pattern(),
                "riskrule" => self.riskrule(),
                "weights" => self.weights(),
                _ => {
                    let c = Cursor::new(self.file, &self.lines[start]);
                    Err(c.unexpected("a declaration (provision, question, rule, goal, pattern, riskrule, weights)"))
                }
            };
            if let Err(e) = result {
                self.errors.push(e);
                // Resynchronise on the next declaration.
                self.idx = self.idx.max(start + 1);
                while self.idx < self.lines.len() && !is_top_level(&self.lines[self.idx]) {
                    self.idx += 1;
                }
            }
        }
    }

    fn declare(&mut self, ns: Namespace, id: &str, span: &SourceSpan, what: &str) -> PResult<()> {
        if let Some(first) = self.names.get(&(ns, id.to_string())) {
            return Err(ParseError {
                kind: ParseErrorKind::DuplicateId,
                location: span.to_string(),
                message: format!("duplicate id {id} ({what}); first declared at {first}"),
            });
        }
        self.names.insert((ns, id.to_string()), span.clone());
        Ok(())
    }

    /// Take the header line of the current stanza.
    fn head(&mut self) -> &Line {
        let i = self.idx;
        self.idx += 1;
        &self.lines[i]
    }

    /// Attribute lines belonging to the current stanza.
    fn body(&mut self) -> Vec<Line> {
        let start = self.idx;
        while self.idx < self.lines.len() && !is_top_level(&self.lines[self.idx]) {
            self.idx += 1;
        }
        self.lines[start..self.idx].to_vec()
    }

    fn header(&mut self) -> PResult<()> {
        let file = self.file;
        let line = self.head().clone();
        let mut c = Cursor::new(file, &line);
        c.keyword("ckb")?;
        match c.next().map(|t| &t.tok) {
            Some(Tok::Number(n)) if *n == 1.0 => {}
            _ => {
                c.pos = c.pos.saturating_sub(1);
                return Err(c.err("unsupported format version (expected `ckb 1`)"));
            }
        }
        c.end()
    }

    fn provision(&mut self) -> PResult<()> {
        let file = self.file;
        let line = self.head().clone();
        let mut c = Cursor::new(file, &line);
        c.keyword("provision")?;
        let id = c.ident("provision id")?;
        c.end()?;
        let span = c.span();
        let (mut instrument, mut reference, mut binding, mut quote) = (None, None, true, None);
        for l in self.body() {
            let mut c = Cursor::new(file, &l);
            match c.ident("provision attribute")?.as_str() {
                "instrument" => instrument = Some(c.string("quoted instrument name")?),
                "ref" => reference = Some(c.string("quoted article or recital")?),
                "binding" => {
                    binding = match c.ident("true or false")?.as_str() {
                        "true" => true,
                        "false" => false,
                        _ => {
                            c.pos -= 1;
                            return Err(c.unexpected("true or false"));
                        }
                    }
                }
                "quote" => quote = Some(c.string("quoted excerpt")?),
                other => {
                    c.pos -= 1;
                    return Err(c.err(format!("unknown provision attribute `{other}`")));
                }
            }
            c.end()?;
        }
        let missing = |what: &str| ParseError {
            kind: ParseErrorKind::Syntax,
            location: span.to_string(),
            message: format!("provision {id} is missing `{what}`"),
        };
        let instrument = instrument.ok_or_else(|| missing("instrument"))?;
        let article_or_recital = reference.ok_or_else(|| missing("ref"))?;
        self.declare(Namespace::Provision, &id, &span, "provision")?;
        self.kb
            .provisions
            .insert(id.clone(), Provision { id, instrument, article_or_recital, binding, quote, span: Some(span) });
        Ok(())
    }

    fn question(&mut self) -> PResult<()> {
        let file = self.file;
        let line = self.head().clone();
        let mut c = Cursor::new(file, &line);
        c.keyword("question")?;
        let id = c.id("question id")?;
        c.sym(":")?;
        let kind = match c.ident("answer kind")?.as_str() {
            "boolean" => AnswerKind::Boolean,
            "date" => AnswerKind::Date,
            "number" => {
                let mut unit = String::new();
                if c.is_sym("(") {
                    c.pos += 1;
                    unit = c.ident("unit")?;
                    c.sym(")")?;
                }
                AnswerKind::Number { unit }
            }
            "enum" => {
                c.sym("(")?;
                let mut labels = vec![c.string("quoted label")?];
                while c.is_sym(",") {
                    c.pos += 1;
                    labels.push(c.string("quoted label")?);
                }
                c.sym(")")?;
                AnswerKind::Enum { labels }
            }
            other => {
                c.pos -= 1;
                return Err(c.err(format!("unknown answer kind `{other}` (boolean, enum, number, date)")));
            }
        };
        c.end()?;
        let span = c.span();
        let (mut text, mut help, mut provisions, mut interpretive) = (None, None, Vec::new(), false);
        for l in self.body() {
            let mut c = Cursor::new(file, &l);
            match c.ident("question attribute")?.as_str() {
                "text" => text = Some(c.string("quoted question text")?),
                "help" => help = Some(c.string("quoted help text")?),
                "provisions" => provisions.extend(c.id_list()?),
                "interpretive" => interpretive = true,
                other => {
                    c.pos -= 1;
                    return Err(c.err(format!("unknown question attribute `{other}`")));
                }
            }
            c.end()?;
        }
        let text = text.ok_or_else(|| ParseError {
            kind: ParseErrorKind::Syntax,
            location: span.to_string(),
            message: format!("question {id} is missing `text`"),
        })?;
        self.declare(Namespace::QuestionOrRule, &id, &span, "question")?;
        self.kb.questions.insert(
            id.clone(),
            Question {
                id,
                text,
                answer_kind: kind,
                help_text: help,
                provision_refs: provisions,
                interpretive,
                span: Some(span),
            },
        );
        Ok(())
    }

    fn rule(&mut self) -> PResult<()> {
        let file = self.file;
        let line = self.head().clone();
        let mut c = Cursor::new(file, &line);
        c.keyword("rule")?;
        let id = c.id("rule id")?;
        c.sym(":")?;
        c.keyword("if")?;
        let expr = c.expr()?;
        c.end()?;
        let span = c.span();
        let (mut provisions, mut holds, mut fails) = (Vec::new(), None, None);
        for l in self.body() {
            let mut c = Cursor::new(file, &l);
            match c.ident("rule attribute")?.as_str() {
                "provisions" => provisions.extend(c.id_list()?),
                "holds" => holds = Some(c.string("quoted conclusion")?),
                "fails" => fails = Some(c.string("quoted conclusion")?),
                other => {
                    c.pos -= 1;
                    return Err(c.err(format!("unknown rule attribute `{other}`")));
                }
            }
            c.end()?;
        }
        self.declare(Namespace::QuestionOrRule, &id, &span, "rule")?;
        self.kb.rules.insert(
            id.clone(),
            Rule { id, expr, provision_refs: provisions, holds_text: holds, fails_text: fails, span: Some(span) },
        );
        Ok(())
    }

    fn goal(&mut self) -> PResult<()> {
        let file = self.file;
        let line = self.head().clone();
        let mut c = Cursor::new(file, &line);
        c.keyword("goal")?;
        let id = c.id("rule id")?;
        c.end()?;
        let stray = self.body();
        if let Some(l) = stray.first() {
            return Err(Cursor::new(file, l).err("unexpected attribute after goal"));
        }
        self.kb.goals.push(id);
        Ok(())
    }

    fn riskrule(&mut self) -> PResult<()> {
        let file = self.file;
        let line = self.head().clone();
        let mut c = Cursor::new(file, &line);
        c.keyword("riskrule")?;
        let id = c.id("risk rule id")?;
        c.sym("[")?;
        let category = c.ident("risk category")?;
        c.sym("]")?;
        c.sym(":")?;
        c.keyword("if")?;
        let expr = c.expr()?;
        c.keyword("then")?;
        let lvl = c.ident("risk level")?;
        let level = RiskLevel::from_keyword(&lvl).ok_or_else(|| {
            c.pos -= 1;
            c.err(format!("unknown risk level `{lvl}` (low, medium, high, very_high)"))
        })?;
        c.end()?;
        let span = c.span();
        let mut provisions = Vec::new();
        for l in self.body() {
            let mut c = Cursor::new(file, &l);
            match c.ident("risk rule attribute")?.as_str() {
                "provisions" => provisions.extend(c.id_list()?),
                other => {
                    c.pos -= 1;
                    return Err(c.err(format!("unknown risk rule attribute `{other}`")));
                }
            }
            c.end()?;
        }
        self.declare(Namespace::RiskRule, &id, &span, "risk rule")?;
        self.kb
            .risk_rules
            .insert(id.clone(), RiskRule { id, category, expr, level, provision_refs: provisions, span: Some(span) });
        Ok(())
    }

    fn weights(&mut self) -> PResult<()> {
        let file = self.file;
        let line = self.head().clone();
        let mut c = Cursor::new(file, &line);
        c.keyword("weights")?;
        if self.weights_seen {
            return Err(ParseError {
                kind: ParseErrorKind::DuplicateId,
                location: c.span().to_string(),
                message: "weights declared twice".into(),
            });
        }
        self.weights_seen = true;
        let mut seen = Vec::new();
        let mut weights = Weights::default();
        while !c.at_end() {
            let name = c.ident("risk level")?;
            let Some(level) = RiskLevel::from_keyword(&name) else {
                c.pos -= 1;
                return Err(c.err(format!("unknown risk level `{name}`")));
            };
            if seen.contains(&level) {
                c.pos -= 1;
                return Err(c.err(format!("weight for {name} given twice")));
            }
            c.sym("=")?;
            let w = match c.next().map(|t| &t.tok) {
                Some(Tok::Number(n)) if *n >= 0.0 && n.fract() == 0.0 && *n <= u32::MAX as f64 => *n as u64,
                _ => {
                    c.pos -= 1;
                    return Err(c.unexpected("non-negative integer weight"));
                }
            };
            weights.set(level, w);
            seen.push(level);
        }
        if let Some(missing) = RiskLevel::ALL.into_iter().find(|l| !seen.contains(l)) {
            return Err(c.err(format!("weights must define all four levels; {} is missing", missing.keyword())));
        }
        self.kb.weights = weights;
        Ok(())
    }

    fn pattern(&mut self) -> PResult<()> {
        let file = self.file;
        let line = self.head().clone();
        let mut c = Cursor::new(file, &line);
        c.keyword("pattern")?;
        let id = c.id("pattern id")?;
        c.end()?;
        let span = c.span();
        let body = self.body();

        let mut b = PatternBuilder::default();
        let mut i = 0;
        while i < body.len() {
            let l = &body[i];
            i += 1;
            let mut c = Cursor::new(file, l);
            match c.ident("pattern attribute")?.as_str() {
                "provisions" => {
                    b.provisions.extend(c.id_list()?);
                    c.end()?;
                }
                section @ ("claim" | "action") => {
                    let what = c.ident("premise kind or conclusion")?;
                    let slot = match (section, what.as_str()) {
                        ("claim", "conclusion") => &mut b.claim_conclusion,
                        ("claim", "else") => &mut b.claim_else,
                        ("action", "conclusion") => &mut b.action_conclusion,
                        _ => {
                            let kind = PremiseKind::from_keyword(&what)
                                .filter(|k| match section {
                                    "claim" => matches!(
                                        k,
                                        PremiseKind::GeneralRule | PremiseKind::Performance | PremiseKind::Warrant
                                    ),
                                    _ => matches!(
                                        k,
                                        PremiseKind::EstablishedRule | PremiseKind::Remedies | PremiseKind::Violation
                                    ),
                                })
                                .ok_or_else(|| {
                                    c.pos -= 1;
                                    c.err(format!("`{what}` is not part of a legal {section}"))
                                })?;
                            let premise = premise_decl(&mut c, kind, &body, &mut i, file)?;
                            if b.premises.insert(kind, premise).is_some() {
                                return Err(Cursor::new(file, l).err(format!("{section} {what} given twice")));
                            }
                            continue;
                        }
                    };
                    let text = c.string("quoted text")?;
                    c.end()?;
                    if slot.replace(text).is_some() {
                        return Err(Cursor::new(file, l).err(format!("{section} {what} given twice")));
                    }
                }
                "exception" => {
                    let ex_id = c.id("exception id")?;
                    c.end()?;
                    let ex_line = l;
                    let (mut premise, mut conclusion) = (None, None);
                    while i < body.len() {
                        let l = &body[i];
                        let mut c = Cursor::new(file, l);
                        if c.is_keyword("premise") {
                            i += 1;
                            c.pos += 1;
                            if premise.is_some() {
                                return Err(c.err(format!("exception {ex_id} has two premises")));
                            }
                            premise = Some(premise_decl(&mut c, PremiseKind::Exception, &body, &mut i, file)?);
                        } else if c.is_keyword("conclusion") {
                            i += 1;
                            c.pos += 1;
                            conclusion = Some(c.string("quoted conclusion")?);
                            c.end()?;
                        } else {
                            break;
                        }
                    }
                    let c = Cursor::new(file, ex_line);
                    let premise = premise.ok_or_else(|| c.err(format!("exception {ex_id} needs a premise")))?;
                    let conclusion =
                        conclusion.ok_or_else(|| c.err(format!("exception {ex_id} needs a conclusion")))?;
                    b.exceptions.push(ExceptionalCase { id: ex_id, premise, conclusion });
                }
                other => {
                    c.pos -= 1;
                    return Err(c.err(format!("unknown pattern attribute `{other}`")));
                }
            }
        }

        let missing = |what: &str| ParseError {
            kind: ParseErrorKind::Syntax,
            location: span.to_string(),
            message: format!("pattern {id} is missing {what}"),
        };
        let mut take = |k: PremiseKind, section: &str| {
            b.premises.shift_remove(&k).ok_or_else(|| missing(&format!("{section} {}", k.keyword())))
        };
        let claim = LegalClaim {
            general_rule: take(PremiseKind::GeneralRule, "claim")?,
            performance: take(PremiseKind::Performance, "claim")?,
            warrant: take(PremiseKind::Warrant, "claim")?,
            conclusion: String::new(),
            else_consequence: String::new(),
        };
        let action = LegalAction {
            established_rule: take(PremiseKind::EstablishedRule, "action")?,
            remedies: take(PremiseKind::Remedies, "action")?,
            violation: take(PremiseKind::Violation, "action")?,
            conclusion: String::new(),
        };
        let claim = LegalClaim {
            conclusion: b.claim_conclusion.ok_or_else(|| missing("claim conclusion"))?,
            else_consequence: b.claim_else.ok_or_else(|| missing("claim else"))?,
            ..claim
        };
        let action =
            LegalAction { conclusion: b.action_conclusion.ok_or_else(|| missing("action conclusion"))?, ..action };
        self.declare(Namespace::Pattern, &id, &span, "pattern")?;
        self.kb.patterns.insert(
            id.clone(),
            CompliancePattern {
                id,
                provision_refs: b.provisions,
                claim,
                action,
                exceptions: b.exceptions,
                span: Some(span),
            },
        );
        Ok(())
    }

    /// Turn bare identifiers naming rules into rule references and report
    /// names that are neither questions nor rules.
    fn resolve_refs(&mut self) {
        let mut errors = Vec::new();
        let kb = &mut self.kb;
        let is_rule: std::collections::HashSet<String> = kb.rules.keys().cloned().collect();
        let is_question: std::collections::HashSet<String> = kb.questions.keys().cloned().collect();
        let mut fix = |e: &mut Expr, at: String| resolve_expr(e, &is_rule, &is_question, &at, &mut errors);
        for r in kb.rules.values_mut() {
            fix(&mut r.expr, loc_of("rule", &r.id, r.span.as_ref()));
        }
        for r in kb.risk_rules.values_mut() {
            fix(&mut r.expr, loc_of("riskrule", &r.id, r.span.as_ref()));
        }
        for p in kb.patterns.values_mut() {
            let at = loc_of("pattern", &p.id, p.span.as_ref());
            let premises = [
                &mut p.claim.general_rule,
                &mut p.claim.performance,
                &mut p.claim.warrant,
                &mut p.action.established_rule,
                &mut p.action.remedies,
                &mut p.action.violation,
            ]
            .into_iter()
            .chain(p.exceptions.iter_mut().map(|e| &mut e.premise));
            for pr in premises {
                if let Some(e) = pr.expr.as_mut() {
                    fix(e, format!("{at}, premise {}", pr.id));
                }
            }
        }
        self.errors.extend(errors);
    }
}

fn loc_of(kind: &str, id: &str, span: Option<&SourceSpan>) -> String {
    match span {
        Some(s) => format!("{kind} {id} ({s})"),
        None => format!("{kind} {id}"),
    }
}

fn resolve_expr(
    e: &mut Expr,
    rules: &std::collections::HashSet<String>,
    questions: &std::collections::HashSet<String>,
    at: &str,
    errors: &mut Vec<ParseError>,
) {
    match e {
        Expr::Atom { question } => {
            if questions.contains(question) {
                return;
            }
            if rules.contains(question) {
                *e = Expr::RuleRef { rule: std::mem::take(question) };
            } else {
                errors.push(ParseError {
                    kind: ParseErrorKind::UnknownReference,
                    location: at.to_string(),
                    message: format!("unknown reference {question}"),
                });
            }
        }
        Expr::Cmp { question, .. } => {
            if !questions.contains(question) {
                errors.push(ParseError {
                    kind: ParseErrorKind::UnknownReference,
                    location: at.to_string(),
                    message: format!("unknown question {question}"),
                });
            }
        }
        Expr::RuleRef { .. } => {}
        Expr::Not { expr } => resolve_expr(expr, rules, questions, at, errors),
        Expr::And { args } | Expr::Or { args } => {
            for a in args {
                resolve_expr(a, rules, questions, at, errors);
            }
        }
    }
}

#[derive(Default)]
struct PatternBuilder {
    provisions: Vec<String>,
    premises: IndexMap<PremiseKind, Premise>,
    claim_conclusion: Option<String>,
    claim_else: Option<String>,
    action_conclusion: Option<String>,
    exceptions: Vec<ExceptionalCase>,
}

/// `<id>: "<text>"` followed by optional `when <expr>` / `interpretive` lines.
fn premise_decl(c: &mut Cursor<'_>, kind: PremiseKind, body: &[Line], i: &mut usize, file: &str) -> PResult<Premise> {
    let id = c.id("premise id")?;
    c.sym(":")?;
    let text = c.string("quoted premise text")?;
    c.end()?;
    let (mut expr, mut interpretive) = (None, false);
    while *i < body.len() {
        let l = &body[*i];
        let mut c = Cursor::new(file, l);
        if c.is_keyword("when") {
            c.pos += 1;
            if expr.is_some() {
                return Err(c.err(format!("premise {id} has two `when` clauses")));
            }
            expr = Some(c.expr()?);
            c.end()?;
        } else if c.is_keyword("interpretive") {
            c.pos += 1;
            c.end()?;
            interpretive = true;
        } else {
            break;
        }
        *i += 1;
    }
    Ok(Premise { id, kind, text, expr, interpretive })
}
