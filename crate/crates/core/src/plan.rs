//! Static question ordering for a goal.
//!
//! Questions are asked in reverse order of dependency: a depth-first
//! post-order over the rule graph emits each rule's own questions only after
//! the questions of every rule it depends on. Siblings are visited in
//! declaration order.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::model::KnowledgeBase;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("unknown goal {0}")]
    UnknownGoal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionPlan {
    pub goal: String,
    /// Every question reachable from the goal, deepest dependencies first.
    pub order: Vec<String>,
    /// Rules reachable from the goal, in post-order (the goal is last).
    pub rules: Vec<String>,
    /// For each question, the rules whose value can depend on it.
    pub supports: IndexMap<String, Vec<String>>,
}

pub fn compile_question_plan(kb: &KnowledgeBase, goal: &str) -> Result<QuestionPlan, PlanError> {
    if !kb.rules.contains_key(goal) {
        return Err(PlanError::UnknownGoal(goal.to_string()));
    }

    let mut visited = HashSet::new();
    let mut rules = Vec::new();
    let mut order: Vec<String> = Vec::new();
    visit(kb, goal, &mut visited, &mut rules, &mut order);

    // Transitive question sets, computed bottom-up along the post-order.
    let mut reach: IndexMap<&str, Vec<&str>> = IndexMap::new();
    for r in &rules {
        let rule = &kb.rules[r.as_str()];
        let mut qs: Vec<&str> = rule.expr.direct_questions();
        for dep in rule.expr.direct_rules() {
            for q in reach.get(dep).into_iter().flatten() {
                if !qs.contains(q) {
                    qs.push(q);
                }
            }
        }
        reach.insert(r.as_str(), qs);
    }

    let mut supports: IndexMap<String, Vec<String>> = order.iter().map(|q| (q.clone(), Vec::new())).collect();
    for (rule, qs) in &reach {
        for q in qs {
            if let Some(s) = supports.get_mut(*q) {
                s.push(rule.to_string());
            }
        }
    }

    Ok(QuestionPlan { goal: goal.to_string(), order, rules, supports })
}

fn visit(
    kb: &KnowledgeBase,
    id: &str,
    visited: &mut HashSet<String>,
    rules: &mut Vec<String>,
    order: &mut Vec<String>,
) {
    if !visited.insert(id.to_string()) {
        return;
    }
    let Some(rule) = kb.rules.get(id) else { return };
    let mut deps = rule.expr.direct_rules();
    deps.sort_by_key(|d| kb.rule_index(d));
    for d in deps {
        visit(kb, d, visited, rules, order);
    }
    let mut qs = rule.expr.direct_questions();
    qs.sort_by_key(|q| kb.question_index(q));
    for q in qs {
        if !order.iter().any(|o| o == q) {
            order.push(q.to_string());
        }
    }
    rules.push(id.to_string());
}
