//! Map source blocks onto target line spans with a scripted model and
//! show how sloppy replies are normalized into a usable mapping.
//!
//! Run with: `cargo run --example align_blocks`

use transpilot::aligner::align;
use transpilot::frontend::partition;
use transpilot::lang::{SourceUnit, SubjectLanguage};
use transpilot::llm::{FnBackend, LlmClient};

fn main() -> transpilot::Result<()> {
    let source = SourceUnit::new(
        SubjectLanguage::Python,
        "\
def total(xs):
    acc = 0
    for x in xs:
        acc += x
    return acc
",
        "total",
    );
    let target = SourceUnit::new(
        SubjectLanguage::Cpp,
        "\
int total(std::vector<int> xs) {
    int acc = 0;
    for (int x : xs) {
        acc += x;
    }
    return acc;
}
",
        "total",
    );

    // The reply mixes arrow spellings, repeats a block, and leaves the
    // loop's closing brace out of every span; normalization copes.
    let client = LlmClient::with_backend(Box::new(FnBackend::new(|req| {
        match req.template.as_str() {
            "align_blocks" => Some(
                "BLOCK1 -> lines 2-2\n\
                 BLOCK2 maps to line 3\n\
                 BLOCK3: lines 4-4\n\
                 BLOCK4 -> lines 6\n\
                 BLOCK4 -> lines 6-6\n"
                    .to_string(),
            ),
            _ => None,
        }
    })));

    let blocks = partition(&source)?;
    let report = align(&client, &source, &blocks, &target)?;

    println!("f_map (source block -> target block):");
    for entry in &report.mapping.entries {
        println!(
            "  BLOCK{} -> target lines {}-{} (target block {:?})",
            entry.source_block,
            entry.start_line,
            entry.end_line,
            report.mapping.f_map(entry.source_block),
        );
    }
    println!("\ntarget blocks:");
    for tb in &report.mapping.targets {
        println!(
            "  block {} lines {}-{} control_flow={}",
            tb.id, tb.start_line, tb.end_line, tb.control_flow
        );
    }
    if !report.absorbed_lines.is_empty() {
        println!("\nabsorbed gap lines: {:?}", report.absorbed_lines);
    }
    if !report.unmapped_lines.is_empty() {
        println!("unmapped executable lines: {:?}", report.unmapped_lines);
    }
    for warning in &report.warnings {
        println!("warning: {warning}");
    }
    Ok(())
}
