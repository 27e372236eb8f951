//! Reference first-divergence scanner, written independently of the
//! library's localizer so the two can be checked against each other.
//!
//! The scan is a literal transcription of the walk definition: visit
//! tests in suite order; within a test, compare instance `l` of the
//! target against instance `l` of the source for every `l` the target
//! executed; stop at the first position where the aligned pair is not
//! equivalent. Only the variable comparator is shared with the library
//! (`values_equal` is a primitive of the definition itself, not part of
//! the walk under test).

use transpilot::aligner::BlockMapping;
use transpilot::exec::TestCase;
use transpilot::semantic_fixer::DivergenceKind;
use transpilot::trace::{values_equal, BlockInstance, FloatTolerance, TraceBundle};

/// What the reference scan decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Every walk completed without divergence.
    Clean,
    /// First divergence, with the target block it blames.
    Diverged {
        test_id: usize,
        seq: usize,
        kind: DivergenceKind,
        error_block: usize,
        source_block: Option<usize>,
    },
    /// The walk reached a position it cannot attribute (a source-side
    /// crash marker, or a target crash past the source's last instance).
    Unattributable { test_id: usize, seq: usize },
}

pub fn scan(
    source: &TraceBundle,
    target: &TraceBundle,
    mapping: &BlockMapping,
    suite: &[TestCase],
    tol: FloatTolerance,
) -> Verdict {
    for test in suite {
        let s: &[BlockInstance] = &source.get(test.id).expect("source trace").instances;
        let t: &[BlockInstance] = &target.get(test.id).expect("target trace").instances;
        for seq in 0..t.len() {
            // The source side at this position is one of three things:
            // absent entirely, a crash marker, or a live block.
            let source_here: Option<Option<usize>> = s.get(seq).map(|i| i.block_id);
            if source_here == Some(None) {
                return Verdict::Unattributable {
                    test_id: test.id,
                    seq,
                };
            }
            let verdict = step(
                source_here.flatten(),
                s.get(seq),
                &t[seq],
                mapping,
                tol,
                test.id,
                seq,
            );
            if verdict != Verdict::Clean {
                return verdict;
            }
        }
    }
    Verdict::Clean
}

/// Judge one aligned position. `Verdict::Clean` means "keep walking".
fn step(
    source_block: Option<usize>,
    source_inst: Option<&BlockInstance>,
    target_inst: &BlockInstance,
    mapping: &BlockMapping,
    tol: FloatTolerance,
    test_id: usize,
    seq: usize,
) -> Verdict {
    let Some(tb) = target_inst.block_id else {
        // Target crash marker: attributable only while the source still
        // has a live block at this position.
        return match source_block {
            Some(sb) => Verdict::Diverged {
                test_id,
                seq,
                kind: DivergenceKind::TargetCrash,
                error_block: mapping.f_map(sb).expect("total mapping"),
                source_block: Some(sb),
            },
            None => Verdict::Unattributable { test_id, seq },
        };
    };
    let Some(sb) = source_block else {
        // The source finished while the target still ran a real block.
        return Verdict::Diverged {
            test_id,
            seq,
            kind: DivergenceKind::ControlFlowMismatch,
            error_block: tb,
            source_block: None,
        };
    };
    let expected_target = mapping.f_map(sb).expect("total mapping");
    if expected_target != tb {
        // Path divergence. Blame the target block when it is itself a
        // control-flow decision, else the block the source expected.
        let target_is_control = mapping.targets.iter().any(|t| t.id == tb && t.control_flow);
        return Verdict::Diverged {
            test_id,
            seq,
            kind: DivergenceKind::ControlFlowMismatch,
            error_block: if target_is_control { tb } else { expected_target },
            source_block: Some(sb),
        };
    }
    let source_vars = &source_inst.expect("live source instance").vars;
    if !values_equal(source_vars, &target_inst.vars, tol).equal {
        return Verdict::Diverged {
            test_id,
            seq,
            kind: DivergenceKind::ValueMismatch,
            error_block: tb,
            source_block: Some(sb),
        };
    }
    Verdict::Clean
}
