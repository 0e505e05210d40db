mod common;

use ckb_core::engine;
use ckb_core::explain::{
    build_trace, redact_trace, render_argument, render_argument_text, render_trace_text, DisclosureLevel,
};
use ckb_core::seed::seed_kb;
use common::{check_golden, dpo_exempt_session, t};

#[test]
fn article39_argument_empty_session() {
    let kb = seed_kb().unwrap();
    let s = engine::start_session(&kb, "art39.training_required", "empty", t(0)).unwrap();
    let doc = render_argument(&kb, "art39.training", &s).unwrap();
    check_golden("art39_training_empty.txt", &render_argument_text(&doc)).unwrap();
}

#[test]
fn article39_argument_dpo_exempt() {
    let kb = seed_kb().unwrap();
    let s = dpo_exempt_session(&kb);
    let doc = render_argument(&kb, "art39.training", &s).unwrap();
    check_golden("art39_training_dpo_exempt.txt", &render_argument_text(&doc)).unwrap();
}

#[test]
fn dpo_trace_at_each_level() {
    let kb = seed_kb().unwrap();
    let s = dpo_exempt_session(&kb);
    let trace = build_trace(&kb, &s).unwrap();
    for level in [DisclosureLevel::Full, DisclosureLevel::Summary, DisclosureLevel::Redacted] {
        let text = render_trace_text(&redact_trace(&trace, level));
        check_golden(&format!("dpo_trace_{}.txt", level.as_str()), &text).unwrap();
    }
}
