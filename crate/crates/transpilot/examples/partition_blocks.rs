//! Split an entry function into its ordered block partition and show the
//! annotated listing that alignment prompts are built from.
//!
//! Run with: `cargo run --example partition_blocks`

use transpilot::aligner::annotate_blocks;
use transpilot::frontend::{partition, BlockKind};
use transpilot::lang::{SourceUnit, SubjectLanguage};

fn main() -> transpilot::Result<()> {
    let program = "\
def classify(values):
    positives = 0
    negatives = 0
    for v in values:
        if v > 0:
            positives += 1
        elif v < 0:
            negatives += 1
    if positives > negatives:
        return \"mostly positive\"
    return [positives, negatives]
";
    let unit = SourceUnit::new(SubjectLanguage::Python, program, "classify");
    let blocks = partition(&unit)?;

    println!("{} blocks:", blocks.blocks.len());
    for block in &blocks.blocks {
        let kind = match block.kind {
            BlockKind::Straight => "straight",
            BlockKind::ControlFlow => "control-flow",
        };
        println!(
            "  BLOCK{} [{kind:>12}] lines {}-{}  {}",
            block.id, block.start_line, block.end_line, block.header_text
        );
    }

    println!("\nannotated for the aligner:");
    println!("{}", annotate_blocks(&unit, &blocks));
    Ok(())
}
