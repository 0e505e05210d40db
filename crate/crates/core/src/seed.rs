//! The bundled GDPR seed knowledge base.

use crate::dsl::{parse_kb_named, ParseErrors};
use crate::model::KnowledgeBase;

pub const SEED_KB_TEXT: &str = include_str!("../kb/gdpr_seed.ckb");

pub fn seed_kb() -> Result<KnowledgeBase, ParseErrors> {
    parse_kb_named(SEED_KB_TEXT, "gdpr_seed.ckb")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate_kb;

    #[test]
    fn seed_is_clean() {
        let kb = seed_kb().unwrap_or_else(|e| panic!("{e}"));
        let report = validate_kb(&kb);
        assert!(report.diagnostics.is_empty(), "{:#?}", report.diagnostics);
    }
}
