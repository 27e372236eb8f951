//! Property tests over the library's structural invariants: block
//! partitions stay well-formed on generated programs, canonical JSON is
//! a fixed point, state comparison counts exactly what it should, splice
//! bookkeeping never corrupts a mapping, and probe lines round-trip
//! through the trace parser.

use std::collections::BTreeMap;

use proptest::prelude::*;

use transpilot::aligner::{BlockMapping, SpanEntry, TargetBlock};
use transpilot::frontend::{self, BlockKind};
use transpilot::lang::SubjectLanguage;
use transpilot::trace::{self, values_equal, CanonicalValue, FloatTolerance, Placement};

// ---------- generated Python functions ----------

#[derive(Debug, Clone)]
enum Stmt {
    Assign,
    /// An assignment whose list literal spans four lines.
    MultiLine,
    Ret,
    /// `break` (true) or `continue` (false); degrades to an assignment
    /// outside a loop, where it would not be valid Python.
    Jump(bool),
    If(Vec<Stmt>, Option<Vec<Stmt>>),
    For(Vec<Stmt>),
    While(Vec<Stmt>),
}

fn arb_stmt() -> impl Strategy<Value = Stmt> {
    let leaf = prop_oneof![
        5 => Just(Stmt::Assign),
        1 => Just(Stmt::MultiLine),
        1 => Just(Stmt::Ret),
        1 => Just(Stmt::Jump(true)),
        1 => Just(Stmt::Jump(false)),
    ];
    leaf.prop_recursive(3, 20, 4, |inner| {
        let body = prop::collection::vec(inner.clone(), 1..4);
        let else_body = prop::option::of(prop::collection::vec(inner.clone(), 1..4));
        let for_body = prop::collection::vec(inner.clone(), 1..4);
        let while_body = prop::collection::vec(inner, 1..4);
        prop_oneof![
            3 => (body, else_body).prop_map(|(t, e)| Stmt::If(t, e)),
            2 => for_body.prop_map(Stmt::For),
            2 => while_body.prop_map(Stmt::While),
        ]
    })
}

fn render(stmts: &[Stmt], indent: usize, in_loop: bool, n: &mut usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    for s in stmts {
        match s {
            Stmt::Assign => {
                *n += 1;
                out.push_str(&format!("{pad}v{n} = a + {n}\n"));
            }
            Stmt::MultiLine => {
                *n += 1;
                out.push_str(&format!("{pad}v{n} = [\n"));
                out.push_str(&format!("{pad}    1,\n"));
                out.push_str(&format!("{pad}    2,\n"));
                out.push_str(&format!("{pad}]\n"));
            }
            Stmt::Ret => out.push_str(&format!("{pad}return a\n")),
            Stmt::Jump(brk) => {
                if in_loop {
                    out.push_str(&format!("{pad}{}\n", if *brk { "break" } else { "continue" }));
                } else {
                    *n += 1;
                    out.push_str(&format!("{pad}v{n} = a - {n}\n"));
                }
            }
            Stmt::If(then, els) => {
                out.push_str(&format!("{pad}if a > {n}:\n"));
                render(then, indent + 1, in_loop, n, out);
                if let Some(els) = els {
                    out.push_str(&format!("{pad}else:\n"));
                    render(els, indent + 1, in_loop, n, out);
                }
            }
            Stmt::For(body) => {
                out.push_str(&format!("{pad}for i in range(3):\n"));
                render(body, indent + 1, true, n, out);
            }
            Stmt::While(body) => {
                out.push_str(&format!("{pad}while a < {n}:\n"));
                render(body, indent + 1, true, n, out);
            }
        }
    }
}

fn render_function(stmts: &[Stmt]) -> String {
    let mut out = String::from("def gen(a):\n");
    let mut n = 0usize;
    render(stmts, 1, false, &mut n, &mut out);
    out
}

fn is_clause_header(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("if ")
        || t.starts_with("elif ")
        || t.starts_with("else:")
        || t.starts_with("for ")
        || t.starts_with("while ")
        || t.starts_with("try:")
        || t.starts_with("except")
        || t.starts_with("finally:")
}

proptest! {
    #[test]
    fn partition_invariants_hold_on_generated_functions(
        stmts in prop::collection::vec(arb_stmt(), 1..5),
    ) {
        let text = render_function(&stmts);
        let unit = frontend::parse(text.clone(), SubjectLanguage::Python, "gen")
            .expect("generated function parses");
        let partition = frontend::partition(&unit).expect("generated function partitions");

        prop_assert!(!partition.blocks.is_empty());
        for (idx, b) in partition.blocks.iter().enumerate() {
            prop_assert_eq!(b.id, idx + 1, "ids are 1..n in order");
            prop_assert!(b.start_line <= b.end_line);
            if b.kind == BlockKind::ControlFlow {
                prop_assert_eq!(b.start_line, b.end_line, "headers are singletons");
            }
        }
        for w in partition.blocks.windows(2) {
            prop_assert!(
                w[1].start_line > w[0].end_line,
                "spans are ordered and disjoint: {:?}",
                partition.blocks
            );
        }

        // Totality over the body, judged from the raw text: every line
        // after the signature is covered exactly once, and it is the
        // start of a control-flow block iff it opens a clause.
        let (def_line, end_line) = partition.function_span;
        for (no, line) in text.lines().enumerate() {
            let line_no = no + 1;
            if line_no <= def_line || line_no > end_line {
                continue;
            }
            let covering: Vec<_> = partition
                .blocks
                .iter()
                .filter(|b| b.contains_line(line_no))
                .collect();
            prop_assert_eq!(
                covering.len(),
                1,
                "line {} of:\n{}",
                line_no,
                text
            );
            let control_here = covering[0].kind == BlockKind::ControlFlow
                && covering[0].start_line == line_no;
            prop_assert_eq!(is_clause_header(line), control_here, "line {}: {:?}", line_no, line);
        }
    }
}

// ---------- canonical JSON ----------

fn arb_json_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        any::<i64>().prop_map(|n| n.to_string()),
        // Integers well past 64 bits, plus zero.
        prop_oneof![Just("0".to_string()), "-?[1-9][0-9]{0,28}".prop_map(String::from)],
        any::<f64>()
            .prop_filter("finite", |f| f.is_finite())
            .prop_map(|f| serde_json::Number::from_f64(f).expect("finite").to_string()),
        any::<bool>().prop_map(|b| b.to_string()),
        Just("null".to_string()),
        any::<String>().prop_map(|s| serde_json::to_string(&s).expect("string encodes")),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        let arr = prop::collection::vec(inner.clone(), 0..4)
            .prop_map(|xs| format!("[{}]", xs.join(",")));
        let obj = prop::collection::btree_map("[a-z]{0,5}", inner, 0..4).prop_map(|m| {
            let body: Vec<String> = m
                .into_iter()
                .map(|(k, v)| format!("{}:{}", serde_json::to_string(&k).expect("key"), v))
                .collect();
            format!("{{{}}}", body.join(","))
        });
        prop_oneof![arr, obj]
    })
}

proptest! {
    #[test]
    fn canonicalization_is_a_fixed_point(text in arb_json_text()) {
        let c1 = trace::canonicalize_json_text(&text).expect("generated JSON canonicalizes");
        let c2 = trace::canonicalize_json_text(&c1).expect("canonical form re-parses");
        prop_assert_eq!(&c1, &c2);
        // Canonicalization changes spelling, never the value.
        let before = CanonicalValue::parse(&text).expect("parses");
        let after = CanonicalValue::parse(&c1).expect("parses");
        prop_assert_eq!(before, after);
    }

    #[test]
    fn object_key_order_is_irrelevant(
        pairs in prop::collection::btree_map("[a-z]{1,6}", any::<i64>(), 1..6),
    ) {
        let render = |it: Box<dyn Iterator<Item = (&String, &i64)>>| {
            let body: Vec<String> = it.map(|(k, v)| format!("\"{k}\":{v}")).collect();
            format!("{{{}}}", body.join(","))
        };
        let forward = render(Box::new(pairs.iter()));
        let backward = render(Box::new(pairs.iter().rev()));
        let cf = trace::canonicalize_json_text(&forward).expect("forward parses");
        let cb = trace::canonicalize_json_text(&backward).expect("backward parses");
        prop_assert_eq!(cf, cb);
    }

    #[test]
    fn big_integers_round_trip_exactly(digits in "-?[1-9][0-9]{0,38}") {
        prop_assert_eq!(
            trace::canonicalize_json_text(&digits).expect("integer parses"),
            digits
        );
    }
}

// ---------- variable-state comparison ----------

fn int_vars(m: &BTreeMap<String, i32>) -> BTreeMap<String, CanonicalValue> {
    m.iter()
        .map(|(k, v)| (k.clone(), CanonicalValue::int(*v)))
        .collect()
}

fn tol() -> FloatTolerance {
    FloatTolerance::default()
}

proptest! {
    #[test]
    fn identical_states_compare_equal(
        m in prop::collection::btree_map("[a-z]{1,8}", any::<i32>(), 0..6),
    ) {
        let vars = int_vars(&m);
        let cmp = values_equal(&vars, &vars.clone(), tol());
        prop_assert!(cmp.equal);
        prop_assert!(cmp.diffs.is_empty());
    }

    #[test]
    fn changed_paired_value_counts(
        m in prop::collection::btree_map("[a-z]{1,8}", any::<i32>(), 1..6),
        pick in any::<prop::sample::Index>(),
        delta in 1i64..1000,
    ) {
        let source = int_vars(&m);
        let key = source.keys().nth(pick.index(source.len())).cloned().expect("non-empty");
        let mut target = source.clone();
        let old = i64::from(m[&key]);
        target.insert(key.clone(), CanonicalValue::int(old + delta));
        let cmp = values_equal(&source, &target, tol());
        prop_assert!(!cmp.equal);
        prop_assert!(cmp.diffs.iter().any(|d| d.is_counting()));
    }

    #[test]
    fn one_sided_extra_variable_is_informational(
        m in prop::collection::btree_map("[a-z]{1,8}", any::<i32>(), 0..6),
        fresh in "[a-z]{1,8}",
        value in any::<i32>(),
    ) {
        prop_assume!(!m.contains_key(&fresh));
        let source = int_vars(&m);
        let mut target = source.clone();
        target.insert(fresh, CanonicalValue::int(value));
        prop_assert!(values_equal(&source, &target, tol()).equal);
        // And symmetrically when the source carries the extra.
        prop_assert!(values_equal(&target, &source, tol()).equal);
    }

    #[test]
    fn one_sided_return_value_counts(
        m in prop::collection::btree_map("[a-z]{1,8}", any::<i32>(), 0..6),
        value in any::<i32>(),
    ) {
        // `ret` would pair with `__ret__` after name normalization and
        // dilute the scenario; keep the return slot genuinely one-sided.
        prop_assume!(!m.contains_key("ret"));
        let source = int_vars(&m);
        let mut target = source.clone();
        target.insert("__ret__".to_string(), CanonicalValue::int(value));
        prop_assert!(!values_equal(&source, &target, tol()).equal);
        prop_assert!(!values_equal(&target, &source, tol()).equal);
    }

    #[test]
    fn truncated_state_compares_equal(
        a in prop::collection::btree_map("[a-z]{1,8}", any::<i32>(), 0..6),
        b in prop::collection::btree_map("[a-z]{1,8}", any::<i32>(), 0..6),
        on_source in any::<bool>(),
    ) {
        let mut source = int_vars(&a);
        let mut target = int_vars(&b);
        let side = if on_source { &mut source } else { &mut target };
        side.insert("__truncated__".to_string(), CanonicalValue::str("true"));
        prop_assert!(values_equal(&source, &target, tol()).equal);
    }
}

// ---------- mapping splice bookkeeping ----------

#[derive(Debug, Clone)]
struct SpliceCase {
    mapping: BlockMapping,
    /// Index into `targets` of the block being respliced.
    k: usize,
    new_len: usize,
}

fn arb_splice_case() -> impl Strategy<Value = SpliceCase> {
    (
        prop::collection::vec((1usize..=3, 0usize..=3, any::<bool>()), 1..8),
        prop::collection::vec(any::<prop::sample::Index>(), 1..8),
        any::<prop::sample::Index>(),
        0usize..=6,
    )
        .prop_map(|(shape, picks, spliced, new_len)| {
            let mut targets = Vec::new();
            let mut line = 1usize;
            for (i, (gap, extra, cf)) in shape.iter().enumerate() {
                let start = line + gap;
                let end = start + extra;
                targets.push(TargetBlock {
                    id: i + 1,
                    start_line: start,
                    end_line: end,
                    control_flow: *cf,
                });
                line = end;
            }
            let mut map = BTreeMap::new();
            let mut entries = Vec::new();
            for (sb, pick) in picks.iter().enumerate() {
                let t = &targets[pick.index(targets.len())];
                map.insert(sb + 1, t.id);
                entries.push(SpanEntry {
                    source_block: sb + 1,
                    start_line: t.start_line,
                    end_line: t.end_line,
                });
            }
            let k = spliced.index(targets.len());
            SpliceCase {
                mapping: BlockMapping {
                    entries,
                    targets,
                    map,
                },
                k,
                new_len,
            }
        })
}

proptest! {
    #[test]
    fn splice_preserves_mapping_shape(case in arb_splice_case()) {
        let before = case.mapping.clone();
        let span = (
            before.targets[case.k].start_line,
            before.targets[case.k].end_line,
        );
        let effective = case.new_len.max(1);
        let delta = effective as isize - (span.1 - span.0 + 1) as isize;

        let mut after = case.mapping;
        after.apply_splice(span, case.new_len);

        prop_assert_eq!(&after.map, &before.map, "block identity never moves");

        let expect = |old: (usize, usize)| -> (usize, usize) {
            if old == span {
                (span.0, span.0 + effective - 1)
            } else if old.0 > span.1 {
                (
                    old.0.checked_add_signed(delta).expect("stays positive"),
                    old.1.checked_add_signed(delta).expect("stays positive"),
                )
            } else {
                old
            }
        };
        for (a, b) in before.targets.iter().zip(&after.targets) {
            prop_assert_eq!(b.id, a.id);
            prop_assert_eq!(b.control_flow, a.control_flow);
            let want = expect((a.start_line, a.end_line));
            prop_assert_eq!((b.start_line, b.end_line), want);
        }
        for (a, b) in before.entries.iter().zip(&after.entries) {
            prop_assert_eq!(b.source_block, a.source_block);
            let want = expect((a.start_line, a.end_line));
            prop_assert_eq!((b.start_line, b.end_line), want);
        }
        for w in after.targets.windows(2) {
            prop_assert!(
                w[1].start_line > w[0].end_line,
                "spans stay ordered after splice: {:?}",
                after.targets
            );
        }
    }
}

// ---------- probe lines round-trip the trace parser ----------

#[derive(Debug, Clone)]
enum OutLine {
    Payload(String),
    Probe {
        block: usize,
        entry: bool,
        vars: BTreeMap<String, i64>,
    },
}

fn arb_out_line() -> impl Strategy<Value = OutLine> {
    prop_oneof![
        2 => "[ -~]{0,24}"
            .prop_filter("payload must not look like a probe", |s| {
                !s.starts_with(trace::TRACE_SENTINEL)
            })
            .prop_map(OutLine::Payload),
        3 => (
            1usize..=9,
            any::<bool>(),
            prop::collection::btree_map("[a-z]{1,6}", any::<i64>(), 0..4),
        )
            .prop_map(|(block, entry, vars)| OutLine::Probe { block, entry, vars }),
    ]
}

proptest! {
    #[test]
    fn probe_lines_round_trip_through_the_parser(
        lines in prop::collection::vec(arb_out_line(), 0..8),
        clean in any::<bool>(),
    ) {
        let mut stdout = String::new();
        let mut payload_only = String::new();
        let mut probes = Vec::new();
        for line in &lines {
            match line {
                OutLine::Payload(text) => {
                    stdout.push_str(text);
                    stdout.push('\n');
                    payload_only.push_str(text);
                    payload_only.push('\n');
                }
                OutLine::Probe { block, entry, vars } => {
                    let placement = if *entry { Placement::Entry } else { Placement::Exit };
                    let cvars: BTreeMap<String, CanonicalValue> = vars
                        .iter()
                        .map(|(k, v)| (k.clone(), CanonicalValue::int(*v)))
                        .collect();
                    stdout.push_str(&trace::format_trace_line(
                        *block,
                        probes.len() as u64,
                        placement,
                        &cvars,
                    ));
                    stdout.push('\n');
                    probes.push((*block, placement, cvars));
                }
            }
        }

        prop_assert_eq!(&trace::strip_trace(&stdout), &payload_only);

        let parsed = trace::parse_trace_output(&stdout, clean, 7).expect("well-formed probes");
        prop_assert_eq!(parsed.crashed, !clean);
        prop_assert_eq!(&parsed.program_stdout, &payload_only);
        let expected_len = probes.len() + usize::from(!clean);
        prop_assert_eq!(parsed.instances.len(), expected_len);
        for (seq, inst) in parsed.instances.iter().enumerate() {
            prop_assert_eq!(inst.seq, seq);
            prop_assert_eq!(inst.test_id, 7);
        }
        for (inst, (block, placement, cvars)) in parsed.instances.iter().zip(&probes) {
            prop_assert_eq!(inst.block_id, Some(*block));
            prop_assert_eq!(inst.placement, Some(*placement));
            prop_assert_eq!(&inst.vars, cvars);
        }
        if !clean {
            let last = parsed.instances.last().expect("crash marker present");
            prop_assert_eq!(last.block_id, None);
            prop_assert_eq!(last.placement, None);
        }
    }
}
