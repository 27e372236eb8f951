//! Walk two block-level traces in lockstep and localize the first
//! divergence, the way the semantic fixer decides which block to patch.
//!
//! Traces are built by hand here, so this runs without any toolchain.
//! Run with: `cargo run --example localize_divergence`

use std::collections::BTreeMap;

use transpilot::aligner::{BlockMapping, SpanEntry, TargetBlock};
use transpilot::exec::TestCase;
use transpilot::semantic_fixer::localize;
use transpilot::trace::{
    BlockInstance, CanonicalValue, ExecutionTrace, FloatTolerance, Placement, TraceBundle,
};

fn instance(seq: usize, block: usize, vars: &[(&str, CanonicalValue)]) -> BlockInstance {
    BlockInstance {
        test_id: 1,
        seq,
        block_id: Some(block),
        placement: Some(Placement::Exit),
        vars: vars
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
    }
}

fn bundle(instances: Vec<BlockInstance>) -> TraceBundle {
    let mut b = TraceBundle::default();
    b.insert(ExecutionTrace {
        test_id: 1,
        instances,
        crashed: false,
        program_stdout: String::new(),
    });
    b
}

fn main() -> transpilot::Result<()> {
    // A 64-bit target mangles what the source computes exactly:
    // spend = years * price with years=23, price=100000013.
    let exact = CanonicalValue::parse("2300000299")?;
    let wrapped = CanonicalValue::parse("-1994967379")?; // fictional 32-bit wrap

    let source = bundle(vec![
        instance(0, 1, &[("years", CanonicalValue::int(23))]),
        instance(1, 2, &[("spend", exact.clone())]),
    ]);
    let target = bundle(vec![
        instance(0, 1, &[("years", CanonicalValue::int(23))]),
        instance(1, 2, &[("spend", wrapped.clone())]),
    ]);

    // Identity mapping over two blocks, as the aligner would produce for
    // a line-for-line translation.
    let mapping = BlockMapping {
        entries: vec![
            SpanEntry {
                source_block: 1,
                start_line: 2,
                end_line: 2,
            },
            SpanEntry {
                source_block: 2,
                start_line: 3,
                end_line: 3,
            },
        ],
        targets: vec![
            TargetBlock {
                id: 1,
                start_line: 2,
                end_line: 2,
                control_flow: false,
            },
            TargetBlock {
                id: 2,
                start_line: 3,
                end_line: 3,
                control_flow: false,
            },
        ],
        map: BTreeMap::from([(1, 1), (2, 2)]),
    };
    let suite = vec![TestCase {
        id: 1,
        input: "[23]".to_string(),
        expected_output: exact.to_canonical_string(),
    }];

    let report = localize(&source, &target, &mapping, &suite, FloatTolerance::default())?
        .expect("the traces diverge");
    println!("error block:   {}", report.error_block);
    println!("kind:          {:?}", report.kind);
    println!("test / seq:    {} / {}", report.test_id, report.seq);
    for diff in &report.diffs {
        println!(
            "value diff:    {} source={:?} target={:?}",
            diff.var,
            diff.source.as_ref().map(CanonicalValue::to_canonical_string),
            diff.target.as_ref().map(CanonicalValue::to_canonical_string),
        );
    }
    Ok(())
}
