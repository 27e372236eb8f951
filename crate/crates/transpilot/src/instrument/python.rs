//! Python probe emission.
//!
//! The shim is prepended to the program and provides `__tp_emit`, which
//! canonicalizes `locals()` and prints one trace line. Canonicalization
//! mirrors [`crate::trace::CanonicalValue`]: tuples/deques become lists,
//! sets become lists sorted by canonical serialization, dict keys are
//! stringified, non-finite floats become `{"__repr__": …}` markers, and
//! anything else falls back to a truncated `repr`. `json.dumps` with
//! `sort_keys` + compact separators + `ensure_ascii=False` emits the
//! exact byte format the Rust side and the C++ emitter produce.

use super::{Edit, ProbeAction, ProbeSite};
use crate::lang::SourceUnit;

/// Canonicalizer function text, parameterized on a name prefix so the
/// shim (`__tp`) and the self-contained driver (`__drv`) stay in sync.
fn canon_fn(prefix: &str) -> String {
    format!(
        r#"def {p}_canon(v):
    if isinstance(v, bool):
        return v
    if v is None or isinstance(v, (int, str)):
        return v
    if isinstance(v, float):
        if not {p}_math.isfinite(v):
            return {{"__repr__": repr(v)}}
        return v
    if isinstance(v, (list, tuple, {p}_deque)):
        return [{p}_canon(x) for x in v]
    if isinstance(v, (set, frozenset)):
        return sorted(
            ({p}_canon(x) for x in v),
            key=lambda x: {p}_json.dumps(x, sort_keys=True, separators=(",", ":"), ensure_ascii=False),
        )
    if isinstance(v, dict):
        out = {{}}
        for k, s in v.items():
            if isinstance(k, str):
                kk = k
            else:
                kk = {p}_json.dumps({p}_canon(k), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
            out[kk] = {p}_canon(s)
        return out
    return {{"__repr__": repr(v)[:256]}}"#,
        p = prefix
    )
}

/// The emitter shim, prepended to instrumented Python programs.
pub static SHIM: std::sync::LazyLock<String> = std::sync::LazyLock::new(|| {
    format!(
        r#"# {sentinel} probe runtime; emits __TRACE__ lines on stdout.
import json as __tp_json
import math as __tp_math
from collections import deque as __tp_deque

__tp_i = [0]


{canon}


def __tp_emit(b, p, vs):
    vals = {{}}
    for k, v in vs.items():
        if k.startswith("__tp") or k == "self":
            continue
        vals[k] = __tp_canon(v)
    rec = {{"b": b, "i": __tp_i[0], "p": p, "v": vals}}
    line = __tp_json.dumps(rec, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    if len(line) > 65536:
        rec["v"] = {{"__truncated__": True}}
        line = __tp_json.dumps(rec, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    __tp_i[0] += 1
    print("__TRACE__ " + line, flush=True)

"#,
        sentinel = super::INSTRUMENT_SENTINEL,
        canon = canon_fn("__tp")
    )
});

fn emit_call(block_id: usize, placement: &str) -> String {
    format!("__tp_emit({block_id}, \"{placement}\", dict(locals()))")
}

/// Render one probe as a text edit. Python needs no static capture:
/// `locals()` is taken at the splice point.
pub(crate) fn render_site(unit: &SourceUnit, site: &ProbeSite) -> Edit {
    match &site.action {
        ProbeAction::AfterStmt { line, col } => Edit::Insert {
            line: *line,
            col: *col,
            text: format!("; {}", emit_call(site.block_id, "exit")),
        },
        ProbeAction::BeforeJump { line, col } => Edit::Insert {
            line: *line,
            col: *col,
            text: format!("{}; ", emit_call(site.block_id, "exit")),
        },
        ProbeAction::OwnLineBefore { line, col } => {
            let indent = super::indent_of(unit, *line, *col);
            let placement = match site.placement {
                crate::trace::Placement::Entry => "entry",
                crate::trace::Placement::Exit => "exit",
            };
            Edit::Insert {
                line: *line,
                col: 0,
                text: format!("{indent}{}\n", emit_call(site.block_id, placement)),
            }
        }
        ProbeAction::RewriteReturn {
            line,
            col,
            end_line,
            end_col,
            expr,
        } => {
            let bind = match expr {
                Some(e) => format!("__tp_ret = ({e})"),
                None => "__tp_ret = None".to_string(),
            };
            Edit::Replace {
                start: (*line, *col),
                end: (*end_line, *end_col),
                text: format!(
                    "{bind}; __tp_emit({}, \"entry\", dict(locals(), __ret__=__tp_ret)); return __tp_ret",
                    site.block_id
                ),
            }
        }
    }
}

/// Self-contained driver for `args`-encoded tasks: reads a JSON argument
/// array from stdin, calls the entry function, prints a canonical JSON
/// result. Identical for baseline and instrumented program variants.
pub fn driver(entry: &str) -> String {
    format!(
        r#"if __name__ == "__main__":
    import sys as __drv_sys
    import json as __drv_json
    import math as __drv_math
    from collections import deque as __drv_deque

{canon}

    __drv_args = __drv_json.loads(__drv_sys.stdin.read() or "[]")
    __drv_res = {entry}(*__drv_args)
    if __drv_res is not None:
        print(__drv_json.dumps(__drv_canon(__drv_res), sort_keys=True, separators=(",", ":"), ensure_ascii=False))
"#,
        canon = indent_block(&canon_fn("__drv"), "    "),
        entry = entry
    )
}

fn indent_block(text: &str, indent: &str) -> String {
    text.lines()
        .map(|l| {
            if l.is_empty() {
                l.to_string()
            } else {
                format!("{indent}{l}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
