//! Execution traces: the probe wire format, parsing, and comparison.
//!
//! Instrumented programs interleave ordinary stdout with probe lines of
//! the form
//!
//! ```text
//! __TRACE__ {"b":3,"i":0,"p":"exit","v":{"x":1}}
//! ```
//!
//! where `b` is the 1-based block id, `i` the emitter's own running
//! counter, `p` the probe placement, and `v` the captured variable
//! state. Parsing splits that interleaving back into an
//! [`ExecutionTrace`] (probe instances in emission order) plus the
//! program's own stdout with trace lines removed byte-for-byte.
//!
//! A run that exits uncleanly (crash or timeout) gets one synthetic
//! *null instance* appended so the localizer can observe where the
//! target fell off the rails.

pub mod compare;
pub mod value;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use compare::{tolerant_equal, values_equal, Comparison, FloatTolerance, ValueDiff};
pub use value::{canonicalize_json_text, outputs_match, CanonicalValue};

/// Prefix marking a probe line in stdout. Includes the trailing space.
pub const TRACE_SENTINEL: &str = "__TRACE__ ";

/// Where the probe that produced an instance was physically placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Probe runs before the block's terminating jump takes effect
    /// (used for blocks ending in `return`).
    Entry,
    /// Probe runs after the block's computation.
    Exit,
}

/// One dynamic execution of a block during one test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInstance {
    pub test_id: usize,
    /// 0-based position of this instance within its trace.
    pub seq: usize,
    /// `None` marks the synthetic crash instance appended when the run
    /// exited uncleanly.
    pub block_id: Option<usize>,
    pub placement: Option<Placement>,
    pub vars: BTreeMap<String, CanonicalValue>,
}

impl BlockInstance {
    pub fn is_null(&self) -> bool {
        self.block_id.is_none()
    }
}

/// All block instances observed while running one test input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub test_id: usize,
    pub instances: Vec<BlockInstance>,
    /// True when the run exited uncleanly; the final instance is then
    /// the synthetic null instance.
    pub crashed: bool,
    /// The program's own stdout with probe lines stripped.
    pub program_stdout: String,
}

impl ExecutionTrace {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Traces for a whole test suite, keyed by test id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceBundle {
    pub traces: BTreeMap<usize, ExecutionTrace>,
}

impl TraceBundle {
    pub fn insert(&mut self, trace: ExecutionTrace) {
        self.traces.insert(trace.test_id, trace);
    }

    pub fn get(&self, test_id: usize) -> Option<&ExecutionTrace> {
        self.traces.get(&test_id)
    }

    pub fn test_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.traces.keys().copied()
    }
}

#[derive(Deserialize)]
struct RawProbe {
    b: usize,
    #[allow(dead_code)]
    i: u64,
    p: String,
    v: serde_json::Map<String, serde_json::Value>,
}

/// Parse the stdout of an instrumented run into a trace.
///
/// `clean_exit` is false when the process crashed or timed out; that
/// appends the synthetic null instance. Trace lines must be valid probe
/// records; anything else starting with the sentinel is an error.
pub fn parse_trace_output(stdout: &str, clean_exit: bool, test_id: usize) -> Result<ExecutionTrace> {
    let mut instances = Vec::new();
    for (idx, line) in stdout.lines().enumerate() {
        let Some(payload) = line.strip_prefix(TRACE_SENTINEL) else {
            continue;
        };
        let line_no = idx + 1;
        let raw: RawProbe =
            serde_json::from_str(payload).map_err(|e| Error::MalformedTraceLine {
                line_no,
                detail: e.to_string(),
            })?;
        let placement = match raw.p.as_str() {
            "entry" => Placement::Entry,
            "exit" => Placement::Exit,
            other => {
                return Err(Error::MalformedTraceLine {
                    line_no,
                    detail: format!("unknown placement {other:?}"),
                })
            }
        };
        if raw.b == 0 {
            return Err(Error::MalformedTraceLine {
                line_no,
                detail: "block id must be >= 1".to_string(),
            });
        }
        let vars = raw
            .v
            .iter()
            .map(|(k, v)| (k.clone(), CanonicalValue::from_json(v)))
            .collect();
        instances.push(BlockInstance {
            test_id,
            seq: instances.len(),
            block_id: Some(raw.b),
            placement: Some(placement),
            vars,
        });
    }
    let crashed = !clean_exit;
    if crashed {
        instances.push(BlockInstance {
            test_id,
            seq: instances.len(),
            block_id: None,
            placement: None,
            vars: BTreeMap::new(),
        });
    }
    Ok(ExecutionTrace {
        test_id,
        instances,
        crashed,
        program_stdout: strip_trace(stdout),
    })
}

/// Remove probe lines from stdout, preserving all other bytes exactly
/// (including the presence or absence of a final newline).
pub fn strip_trace(stdout: &str) -> String {
    stdout
        .split_inclusive('\n')
        .filter(|segment| !segment.starts_with(TRACE_SENTINEL))
        .collect()
}

/// Render one probe line exactly as the embedded emitters do. This is
/// the reference implementation the language shims are tested against.
pub fn format_trace_line(
    block_id: usize,
    counter: u64,
    placement: Placement,
    vars: &BTreeMap<String, CanonicalValue>,
) -> String {
    let p = match placement {
        Placement::Entry => "entry",
        Placement::Exit => "exit",
    };
    let v = CanonicalValue::Object(vars.clone()).to_canonical_string();
    format!("{TRACE_SENTINEL}{{\"b\":{block_id},\"i\":{counter},\"p\":\"{p}\",\"v\":{v}}}")
}
