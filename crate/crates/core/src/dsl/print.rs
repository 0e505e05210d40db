//! Canonical text form of a knowledge base.
//!
//! Output is byte-stable: entities in declaration order, grouped by kind,
//! two-space attribute indentation, single spaces between tokens, LF endings.

use std::fmt::Write;

use crate::model::*;

pub fn serialize(kb: &KnowledgeBase) -> String {
    let mut out = String::from("ckb 1\n");

    for p in kb.provisions.values() {
        out.push('\n');
        let _ = writeln!(out, "provision {}", p.id);
        let _ = writeln!(out, "  instrument {}", quote(&p.instrument));
        let _ = writeln!(out, "  ref {}", quote(&p.article_or_recital));
        if !p.binding {
            out.push_str("  binding false\n");
        }
        if let Some(q) = &p.quote {
            let _ = writeln!(out, "  quote {}", quote(q));
        }
    }

    for q in kb.questions.values() {
        out.push('\n');
        let kind = match &q.answer_kind {
            AnswerKind::Boolean => "boolean".to_string(),
            AnswerKind::Date => "date".to_string(),
            AnswerKind::Number { unit } if unit.is_empty() => "number".to_string(),
            AnswerKind::Number { unit } => format!("number({unit})"),
            AnswerKind::Enum { labels } => {
                format!("enum({})", labels.iter().map(|l| quote(l)).collect::<Vec<_>>().join(", "))
            }
        };
        let _ = writeln!(out, "question {}: {kind}", q.id);
        let _ = writeln!(out, "  text {}", quote(&q.text));
        if let Some(h) = &q.help_text {
            let _ = writeln!(out, "  help {}", quote(h));
        }
        provisions(&mut out, "  ", &q.provision_refs);
        if q.interpretive {
            out.push_str("  interpretive\n");
        }
    }

    for r in kb.rules.values() {
        out.push('\n');
        let _ = writeln!(out, "rule {}: if {}", r.id, expr_to_string(&r.expr));
        provisions(&mut out, "  ", &r.provision_refs);
        if let Some(t) = &r.holds_text {
            let _ = writeln!(out, "  holds {}", quote(t));
        }
        if let Some(t) = &r.fails_text {
            let _ = writeln!(out, "  fails {}", quote(t));
        }
    }

    if !kb.goals.is_empty() {
        out.push('\n');
        for g in &kb.goals {
            let _ = writeln!(out, "goal {g}");
        }
    }

    for p in kb.patterns.values() {
        out.push('\n');
        let _ = writeln!(out, "pattern {}", p.id);
        provisions(&mut out, "  ", &p.provision_refs);
        premise(&mut out, "  claim", &p.claim.general_rule);
        premise(&mut out, "  claim", &p.claim.performance);
        premise(&mut out, "  claim", &p.claim.warrant);
        let _ = writeln!(out, "  claim conclusion {}", quote(&p.claim.conclusion));
        let _ = writeln!(out, "  claim else {}", quote(&p.claim.else_consequence));
        premise(&mut out, "  action", &p.action.established_rule);
        premise(&mut out, "  action", &p.action.remedies);
        premise(&mut out, "  action", &p.action.violation);
        let _ = writeln!(out, "  action conclusion {}", quote(&p.action.conclusion));
        for e in &p.exceptions {
            let _ = writeln!(out, "  exception {}", e.id);
            let pr = &e.premise;
            let _ = writeln!(out, "    premise {}: {}", pr.id, quote(&pr.text));
            premise_attrs(&mut out, "      ", pr);
            let _ = writeln!(out, "    conclusion {}", quote(&e.conclusion));
        }
    }

    for r in kb.risk_rules.values() {
        out.push('\n');
        let _ = writeln!(
            out,
            "riskrule {} [{}]: if {} then {}",
            r.id,
            r.category,
            expr_to_string(&r.expr),
            r.level.keyword()
        );
        provisions(&mut out, "  ", &r.provision_refs);
    }

    if kb.weights != Weights::default() {
        let w = kb.weights;
        out.push('\n');
        let _ = writeln!(out, "weights low={} medium={} high={} very_high={}", w.low, w.medium, w.high, w.very_high);
    }
    out
}

fn provisions(out: &mut String, indent: &str, refs: &[String]) {
    if !refs.is_empty() {
        let _ = writeln!(out, "{indent}provisions {}", refs.join(" "));
    }
}

fn premise(out: &mut String, prefix: &str, p: &Premise) {
    let _ = writeln!(out, "{prefix} {} {}: {}", p.kind.keyword(), p.id, quote(&p.text));
    premise_attrs(out, "    ", p);
}

fn premise_attrs(out: &mut String, indent: &str, p: &Premise) {
    if let Some(e) = &p.expr {
        let _ = writeln!(out, "{indent}when {}", expr_to_string(e));
    }
    if p.interpretive {
        let _ = writeln!(out, "{indent}interpretive");
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn literal_to_string(v: &Value) -> String {
    match v {
        Value::Bool(b) => b.to_string(),
        Value::Label(l) => quote(l),
        Value::Number(n) => format!("{n}"),
        Value::Date(d) => d.format("%Y-%m-%d").to_string(),
    }
}

/// Render an expression with the minimum parentheses needed to parse back
/// to the same tree. Single-operand `and`/`or` use the prefix form.
pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Atom { question } => out.push_str(question),
        Expr::RuleRef { rule } => out.push_str(rule),
        Expr::Cmp { question, cmp, literal } => {
            let _ = write!(out, "{question} {} {}", cmp.symbol(), literal_to_string(literal));
        }
        Expr::Not { expr } => {
            out.push_str("not ");
            match **expr {
                Expr::And { ref args } | Expr::Or { ref args } if args.len() > 1 => {
                    out.push('(');
                    write_expr(out, expr);
                    out.push(')');
                }
                _ => write_expr(out, expr),
            }
        }
        Expr::And { args } | Expr::Or { args } if args.len() == 1 => {
            out.push_str(if matches!(e, Expr::And { .. }) { "and(" } else { "or(" });
            write_expr(out, &args[0]);
            out.push(')');
        }
        Expr::And { args } => {
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(" and ");
                }
                let wrap = matches!(a, Expr::And { args } | Expr::Or { args } if args.len() > 1);
                wrap_expr(out, a, wrap);
            }
        }
        Expr::Or { args } => {
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(" or ");
                }
                let wrap = matches!(a, Expr::Or { args } if args.len() > 1);
                wrap_expr(out, a, wrap);
            }
        }
    }
}

fn wrap_expr(out: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}
