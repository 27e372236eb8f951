//! `transpilot` — a multi-agent source-to-source translation pipeline.
//!
//! The library translates a single-function program between Python, Java,
//! and C++ using a pluggable LLM backend, then *verifies and repairs* the
//! translation with program-analysis machinery:
//!
//! 1. **Frontend** ([`syntax`], [`frontend`]) parses the program, builds a
//!    statement-level control-flow graph, and partitions the entry function
//!    into numbered blocks: maximal straight-line statement runs plus
//!    singleton blocks for every control-flow header.
//! 2. **Translator** ([`translator`]) generates test inputs, derives
//!    expected outputs by executing the source, and produces the initial
//!    target program.
//! 3. **Syntax fixer** ([`syntax_fixer`]) iterates compiler/interpreter
//!    validation with model-proposed patches until the candidate is clean
//!    or the same diagnostic recurs.
//! 4. **Aligner** ([`aligner`]) maps every source block to a target line
//!    span (the mapping function `f_map`), yielding a derived target
//!    partition that is instrumented index-for-index with the source.
//! 5. **Instrumenter** ([`instrument`], [`runner`]) injects one trace probe
//!    per block and drives the language toolchains to execute tests.
//! 6. **Trace** ([`trace`]) parses probe output into execution traces over
//!    a language-neutral canonical value model and implements the tolerant
//!    `Equal()` comparator.
//! 7. **Semantic fixer** ([`semantic_fixer`]) localizes the first diverging
//!    block by walking aligned traces, then attempts value-aware and
//!    vanilla cloze-style patches, validating each by re-execution.
//! 8. **Pipeline** ([`pipeline`]) wires the stages end-to-end, computes the
//!    computational-accuracy (CA) metric over task batches, and owns
//!    configuration and task manifests. A thin CLI binary (`transpilot`)
//!    exposes `translate`, `bench`, and `align` subcommands.
//!
//! Every LLM interaction flows through [`llm`], which supports `live`,
//! `record`, and `replay` backends; with the replay backend the whole
//! pipeline is deterministic and runs offline. See the `examples/`
//! directory for one runnable walkthrough per stage.

pub mod aligner;
pub mod error;
pub mod exec;
pub mod frontend;
pub mod instrument;
pub mod lang;
pub mod llm;
pub mod pipeline;
pub mod runner;
pub mod semantic_fixer;
pub mod syntax;
pub mod syntax_fixer;
pub mod trace;
pub mod translator;

pub use error::{Error, Result};
pub use frontend::{Block, BlockKind, BlockPartition, Cfg};
pub use lang::{SourceUnit, SubjectLanguage};
pub use trace::{
    BlockInstance, CanonicalValue, Comparison, ExecutionTrace, FloatTolerance, TraceBundle,
};
