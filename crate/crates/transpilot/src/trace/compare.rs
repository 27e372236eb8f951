//! Tolerant cross-language comparison of block-level variable states.
//!
//! Variable names are normalized (case and underscores dropped) before
//! pairing so that `my_var`/`myVar` line up across languages. Paired
//! values that differ are *counting* diffs: they make the two states
//! unequal. Variables left over after name pairing are matched as a
//! value multiset; anything still unmatched is reported as an
//! informational diff but does not by itself make the states unequal,
//! because translations legitimately introduce or drop bookkeeping
//! variables (loop indices, temporaries). The one exception is
//! `__ret__`: an unmatched return value always counts, since returns
//! are semantically load-bearing.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::value::CanonicalValue;

pub const RETURN_VAR: &str = "__ret__";
pub const TRUNCATED_VAR: &str = "__truncated__";

/// Tolerance for float comparison: `|a-b| <= max(absolute, relative * max(|a|,|b|))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FloatTolerance {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for FloatTolerance {
    fn default() -> Self {
        FloatTolerance {
            relative: 1e-6,
            absolute: 1e-9,
        }
    }
}

fn floats_close(a: f64, b: f64, tol: FloatTolerance) -> bool {
    if a == b {
        return true;
    }
    let diff = (a - b).abs();
    diff <= tol.absolute.max(tol.relative * a.abs().max(b.abs()))
}

/// Structural equality with float tolerance. Exact integers compare
/// exactly; an integer against a float compares tolerantly through f64.
pub fn tolerant_equal(a: &CanonicalValue, b: &CanonicalValue, tol: FloatTolerance) -> bool {
    use CanonicalValue::*;
    match (a, b) {
        (Null, Null) => true,
        (Bool(x), Bool(y)) => x == y,
        (Int(x), Int(y)) => x == y,
        (Float(x), Float(y)) => floats_close(*x, *y, tol),
        (Int(x), Float(y)) | (Float(y), Int(x)) => x
            .to_f64()
            .map_or(false, |xf| floats_close(xf, *y, tol)),
        (Str(x), Str(y)) => x == y,
        (Array(xs), Array(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| tolerant_equal(x, y, tol))
        }
        (Object(xm), Object(ym)) => {
            xm.len() == ym.len()
                && xm
                    .iter()
                    .zip(ym)
                    .all(|((kx, vx), (ky, vy))| kx == ky && tolerant_equal(vx, vy, tol))
        }
        _ => false,
    }
}

/// Pairing key: lowercase with underscores removed, so `__ret__` also
/// pairs with a target variable literally named `ret`.
fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| *c != '_')
        .flat_map(|c| c.to_lowercase())
        .collect()
}

/// One variable-level discrepancy between a source and a target state.
/// `None` on a side means the variable had no counterpart there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueDiff {
    pub var: String,
    pub source: Option<CanonicalValue>,
    pub target: Option<CanonicalValue>,
}

impl ValueDiff {
    /// Whether this diff makes the two states unequal (see module docs).
    pub fn is_counting(&self) -> bool {
        match (&self.source, &self.target) {
            (Some(_), Some(_)) => true,
            _ => self.var == RETURN_VAR,
        }
    }
}

/// Result of comparing two variable states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub equal: bool,
    pub diffs: Vec<ValueDiff>,
}

impl Comparison {
    pub fn equal_no_diffs() -> Self {
        Comparison {
            equal: true,
            diffs: Vec::new(),
        }
    }
}

/// Compare the variable state captured at a source block instance with
/// the state at its aligned target instance.
pub fn values_equal(
    source: &BTreeMap<String, CanonicalValue>,
    target: &BTreeMap<String, CanonicalValue>,
    tol: FloatTolerance,
) -> Comparison {
    // A truncated state carries no comparable content; treat it as
    // vacuously equal rather than steering the fixer at a phantom.
    if source.contains_key(TRUNCATED_VAR) || target.contains_key(TRUNCATED_VAR) {
        return Comparison::equal_no_diffs();
    }

    let mut src_groups: BTreeMap<String, Vec<(&String, &CanonicalValue)>> = BTreeMap::new();
    for (k, v) in source {
        src_groups.entry(normalize_name(k)).or_default().push((k, v));
    }
    let mut tgt_groups: BTreeMap<String, Vec<(&String, &CanonicalValue)>> = BTreeMap::new();
    for (k, v) in target {
        tgt_groups.entry(normalize_name(k)).or_default().push((k, v));
    }

    let mut diffs: Vec<ValueDiff> = Vec::new();
    let mut src_residual: Vec<(&String, &CanonicalValue)> = Vec::new();
    let mut tgt_residual: Vec<(&String, &CanonicalValue)> = Vec::new();

    let keys: std::collections::BTreeSet<&String> =
        src_groups.keys().chain(tgt_groups.keys()).collect();
    for key in keys {
        let empty = Vec::new();
        let ss = src_groups.get(key).unwrap_or(&empty);
        let ts = tgt_groups.get(key).unwrap_or(&empty);
        let paired = ss.len().min(ts.len());
        for i in 0..paired {
            if !tolerant_equal(ss[i].1, ts[i].1, tol) {
                diffs.push(ValueDiff {
                    var: ss[i].0.clone(),
                    source: Some(ss[i].1.clone()),
                    target: Some(ts[i].1.clone()),
                });
            }
        }
        src_residual.extend(ss.iter().skip(paired).copied());
        tgt_residual.extend(ts.iter().skip(paired).copied());
    }

    // Greedy multiset matching of leftovers, ordered deterministically
    // by canonical serialization so renamed-but-equal variables cancel.
    let canon_order = |(_, v): &(&String, &CanonicalValue)| v.to_canonical_string();
    src_residual.sort_by_key(canon_order);
    tgt_residual.sort_by_key(canon_order);
    let mut taken = vec![false; tgt_residual.len()];
    for (name, val) in &src_residual {
        let mut matched = false;
        for (j, (_, tval)) in tgt_residual.iter().enumerate() {
            if !taken[j] && tolerant_equal(val, tval, tol) {
                taken[j] = true;
                matched = true;
                break;
            }
        }
        if !matched {
            diffs.push(ValueDiff {
                var: (*name).clone(),
                source: Some((*val).clone()),
                target: None,
            });
        }
    }
    for (j, (name, val)) in tgt_residual.iter().enumerate() {
        if !taken[j] {
            diffs.push(ValueDiff {
                var: (*name).clone(),
                source: None,
                target: Some((*val).clone()),
            });
        }
    }

    let equal = !diffs.iter().any(ValueDiff::is_counting);
    Comparison { equal, diffs }
}
