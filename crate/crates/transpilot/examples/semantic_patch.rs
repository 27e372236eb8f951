//! Generate a value-aware cloze patch for a localized error block and
//! splice it into the target program.
//!
//! Needs `python3` on PATH (spliced candidates are syntax-checked).
//! Run with: `cargo run --example semantic_patch`

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use transpilot::aligner::{BlockMapping, SpanEntry, TargetBlock};
use transpilot::frontend::partition;
use transpilot::lang::{SourceUnit, SubjectLanguage};
use transpilot::llm::{FnBackend, LlmClient};
use transpilot::runner::{Limits, Toolchains};
use transpilot::semantic_fixer::{
    generate_patch, DivergenceKind, ErrorBlockReport, PatchStrategy,
};
use transpilot::trace::{CanonicalValue, ValueDiff};

fn main() -> transpilot::Result<()> {
    let tc = Toolchains::detect();
    if !tc.available(SubjectLanguage::Python) {
        eprintln!("python3 not found on PATH; spliced patches cannot be checked");
        return Ok(());
    }

    let source = SourceUnit::new(
        SubjectLanguage::Python,
        "def f(x):\n    y = x * 2\n    return y\n",
        "f",
    );
    let target = SourceUnit::new(
        SubjectLanguage::Python,
        "def f(x):\n    y = x + 2\n    return y\n",
        "f",
    );
    let blocks = partition(&source)?;
    let mapping = BlockMapping {
        entries: vec![SpanEntry {
            source_block: 1,
            start_line: 2,
            end_line: 3,
        }],
        targets: vec![TargetBlock {
            id: 1,
            start_line: 2,
            end_line: 3,
            control_flow: false,
        }],
        map: BTreeMap::from([(1, 1)]),
    };

    // What localization reported: block 1 computes y=7 where the source
    // computed y=10 on test input [5].
    let report = ErrorBlockReport {
        error_block: 1,
        kind: DivergenceKind::ValueMismatch,
        test_id: 1,
        seq: 0,
        diffs: vec![ValueDiff {
            var: "y".to_string(),
            source: Some(CanonicalValue::int(10)),
            target: Some(CanonicalValue::int(7)),
        }],
        source_block: Some(1),
    };

    let seen_prompt: Arc<Mutex<String>> = Arc::default();
    let capture = seen_prompt.clone();
    let client = LlmClient::with_backend(Box::new(FnBackend::new(move |req| {
        *capture.lock().unwrap() = req.messages.last()?.text.clone();
        Some("```\n    y = x * 2\n    return y\n```".to_string())
    })));

    let outcome = generate_patch(
        &client,
        &tc,
        &report,
        &source,
        &blocks,
        &target,
        &mapping,
        PatchStrategy::ValueAware,
        Limits::default(),
    )?;

    println!("value-aware prompt sent to the model:");
    println!("----------------------------------------");
    println!("{}", seen_prompt.lock().unwrap());
    println!("----------------------------------------");
    println!(
        "patch for block {} replaced lines {:?} with {} line(s)",
        outcome.patch.error_block, outcome.patch.replaced_span, outcome.fill_lines
    );
    println!("\npatched program:\n{}", outcome.program.text);
    Ok(())
}
