//! The `.ckb` knowledge-base format.
//!
//! ```text
//! ckb 1
//!
//! question dpo.public_authority: boolean
//!   text "Is the organisation a public authority or body?"
//!
//! rule dpo.required: if dpo.public_authority or dpo.large_scale_monitoring
//!   provisions gdpr.art37
//! ```
//!
//! See `docs/ckb-grammar.md` for the full grammar.

mod lexer;
mod parser;
mod print;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::KnowledgeBase;

pub use print::{expr_to_string, literal_to_string, quote};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    Syntax,
    DuplicateId,
    UnknownReference,
    Cycle,
    /// Any other knowledge-base invariant reported by the validator.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub location: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub struct ParseErrors(pub Vec<ParseError>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Parse and validate a knowledge base. Spans name the file `<input>`.
pub fn parse_kb(text: &str) -> Result<KnowledgeBase, ParseErrors> {
    parser::parse(text, "<input>")
}

/// Parse with spans attributed to `file`.
pub fn parse_kb_named(text: &str, file: &str) -> Result<KnowledgeBase, ParseErrors> {
    parser::parse(text, file)
}

pub fn serialize_kb(kb: &KnowledgeBase) -> String {
    print::serialize(kb)
}

pub fn is_reserved(word: &str) -> bool {
    parser::RESERVED.contains(&word)
}
