//! Canonical runtime values: parsing, normalization across language
//! spellings, and tolerance-aware comparison of variable snapshots.
//!
//! Run with: `cargo run --example compare_values`

use std::collections::BTreeMap;

use transpilot::trace::{values_equal, CanonicalValue, FloatTolerance};

fn main() -> transpilot::Result<()> {
    // Probe emitters print runtime values as JSON; this layer parses them
    // without losing precision and renders one canonical spelling.
    let literals = [
        ("1e3", "scientific float"),
        ("1000.0", "plain float"),
        ("9223372036854775807", "i64::MAX"),
        ("170141183460469231731687303715884105727", "beyond 64 bits"),
        ("[1, [2,   3]]", "nested list, loose spacing"),
        ("{\"b\": 2, \"a\": 1}", "object, unsorted keys"),
    ];
    println!("canonical forms:");
    for (text, label) in literals {
        let value = CanonicalValue::parse(text)?;
        println!(
            "  {label:<28} {text:<42} -> {} ({})",
            value.to_canonical_string(),
            value.kind_name()
        );
    }

    // Variable snapshots from two runs of "the same" block.
    let snapshot = |pairs: &[(&str, CanonicalValue)]| -> BTreeMap<String, CanonicalValue> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    };
    let source = snapshot(&[
        ("total", CanonicalValue::float(0.30000000000000004)),
        ("count", CanonicalValue::int(3)),
        ("label", CanonicalValue::str("sum")),
    ]);
    let target = snapshot(&[
        ("total", CanonicalValue::float(0.3)),
        ("count", CanonicalValue::int(4)),
        ("label", CanonicalValue::str("sum")),
    ]);

    let tol = FloatTolerance::default();
    let comparison = values_equal(&source, &target, tol);
    println!("\nsnapshots equal: {}", comparison.equal);
    for diff in &comparison.diffs {
        println!(
            "  {} differs: source={:?} target={:?}",
            diff.var,
            diff.source.as_ref().map(CanonicalValue::to_canonical_string),
            diff.target.as_ref().map(CanonicalValue::to_canonical_string),
        );
    }
    println!("(floats compare inside rel {} / abs {})", tol.relative, tol.absolute);
    Ok(())
}
