//! C++ probe emission and the static capture gate.
//!
//! C++ has no `locals()`, so each probe explicitly lists the variables
//! visible at its location (parameters plus in-scope declarations from
//! the IR). A declaration is *capturable* when its declared type is one
//! the prelude's `canon` overloads can serialize — scalars, `string`,
//! and the common standard containers over capturable types. Anything
//! else (pointers, arrays, user types) is reported as a
//! `{"__repr__": "<type>"}` marker instead, so instrumented programs
//! always compile for the supported subset and never dereference
//! arbitrary memory. `auto` declarations are attempted optimistically; if
//! the deduced type has no overload the compile fails and surfaces as an
//! instrumentation failure rather than a wrong trace.

use super::{ProbeAction, ProbeSite};
use crate::error::{Error, Result};
use crate::lang::SourceUnit;
use crate::syntax::FunctionIr;
use crate::trace::Placement;

/// Emitter prelude, prepended to instrumented C++ programs. `canon`
/// mirrors the canonical value model: exact integers via `to_string`,
/// shortest-round-trip floats with a `.0` suffix when integral, sets
/// sorted by canonical serialization, maps with stringified keys sorted
/// lexicographically, pairs as two-element arrays.
pub const PRELUDE: &str = r#"// __TP_INSTRUMENTED__ probe runtime; emits __TRACE__ lines on stdout.
#include <bits/stdc++.h>

namespace __tp {

inline long long i_counter = 0;

inline std::string esc(const std::string &s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    return out;
}

inline std::string canon(bool v) { return v ? "true" : "false"; }
inline std::string canon(char v) { return "\"" + esc(std::string(1, v)) + "\""; }
inline std::string canon(const std::string &v) { return "\"" + esc(v) + "\""; }
inline std::string canon(const char *v) { return canon(std::string(v)); }

template <class T,
          std::enable_if_t<std::is_integral_v<T> && !std::is_same_v<T, bool> &&
                               !std::is_same_v<T, char>,
                           int> = 0>
std::string canon(T v) {
    return std::to_string(v);
}

template <class T, std::enable_if_t<std::is_floating_point_v<T>, int> = 0>
std::string canon(T v) {
    double d = static_cast<double>(v);
    if (!std::isfinite(d)) {
        std::ostringstream os;
        os << d;
        return std::string("{\"__repr__\":\"") + esc(os.str()) + "\"}";
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), d);
    std::string s(buf, res.ptr);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
    return s;
}

template <class A, class B> std::string canon(const std::pair<A, B> &v);
template <class T> std::string canon(const std::vector<T> &v);
template <class T> std::string canon(const std::deque<T> &v);
template <class T> std::string canon(const std::list<T> &v);
template <class T, class C> std::string canon(const std::set<T, C> &v);
template <class T, class H, class E> std::string canon(const std::unordered_set<T, H, E> &v);
template <class K, class V, class C> std::string canon(const std::map<K, V, C> &v);
template <class K, class V, class H, class E>
std::string canon(const std::unordered_map<K, V, H, E> &v);

template <class It> std::string canon_seq(It b, It e) {
    std::string out = "[";
    bool first = true;
    for (; b != e; ++b) {
        if (!first) out += ",";
        first = false;
        out += canon(*b);
    }
    out += "]";
    return out;
}

template <class T> std::string canon(const std::vector<T> &v) { return canon_seq(v.begin(), v.end()); }
template <class T> std::string canon(const std::deque<T> &v) { return canon_seq(v.begin(), v.end()); }
template <class T> std::string canon(const std::list<T> &v) { return canon_seq(v.begin(), v.end()); }

template <class It> std::string canon_set(It b, It e) {
    std::vector<std::string> items;
    for (; b != e; ++b) items.push_back(canon(*b));
    std::sort(items.begin(), items.end());
    std::string out = "[";
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    out += "]";
    return out;
}

template <class T, class C> std::string canon(const std::set<T, C> &v) { return canon_set(v.begin(), v.end()); }
template <class T, class H, class E> std::string canon(const std::unordered_set<T, H, E> &v) {
    return canon_set(v.begin(), v.end());
}

inline std::string key_str(const std::string &k) { return k; }
inline std::string key_str(const char *k) { return std::string(k); }
inline std::string key_str(char k) { return std::string(1, k); }
template <class K> std::string key_str(const K &k) { return canon(k); }

template <class It> std::string canon_map(It b, It e) {
    std::vector<std::pair<std::string, std::string>> items;
    for (; b != e; ++b) items.emplace_back(key_str(b->first), canon(b->second));
    std::sort(items.begin(), items.end());
    std::string out = "{";
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += "\"" + esc(items[i].first) + "\":" + items[i].second;
    }
    out += "}";
    return out;
}

template <class K, class V, class C> std::string canon(const std::map<K, V, C> &v) {
    return canon_map(v.begin(), v.end());
}
template <class K, class V, class H, class E>
std::string canon(const std::unordered_map<K, V, H, E> &v) {
    return canon_map(v.begin(), v.end());
}

template <class A, class B> std::string canon(const std::pair<A, B> &v) {
    return "[" + canon(v.first) + "," + canon(v.second) + "]";
}

inline void emit(long long b, const char *p,
                 std::initializer_list<std::pair<const char *, std::string>> vars) {
    std::vector<std::pair<std::string, std::string>> vs;
    for (const auto &kv : vars) vs.emplace_back(kv.first, kv.second);
    std::sort(vs.begin(), vs.end());
    std::string v = "{";
    bool first = true;
    for (const auto &kv : vs) {
        if (!first) v += ",";
        first = false;
        v += "\"" + esc(kv.first) + "\":" + kv.second;
    }
    v += "}";
    std::string head = "{\"b\":" + std::to_string(b) + ",\"i\":" + std::to_string(i_counter) +
                       ",\"p\":\"" + std::string(p) + "\",\"v\":";
    std::string line = head + v + "}";
    if (line.size() > 65536) line = head + "{\"__truncated__\":true}" + "}";
    ++i_counter;
    std::cout << "__TRACE__ " << line << "\n" << std::flush;
}

}  // namespace __tp
"#;

/// Normalize a declared type for the capture gate: drop `std::`,
/// `const`, references, and noise whitespace (keeping the space in
/// multi-word types like `long long`).
pub(crate) fn norm_type(t: &str) -> String {
    let no_amp = t.replace('&', " ");
    let collapsed: String = no_amp
        .replace("std::", "")
        .split_whitespace()
        .filter(|w| *w != "const")
        .collect::<Vec<_>>()
        .join(" ");
    collapsed
        .replace(" <", "<")
        .replace("< ", "<")
        .replace(" >", ">")
        .replace("> ", ">")
        .replace(" ,", ",")
        .replace(", ", ",")
}

fn split_top_level(inner: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in inner.char_indices() {
        match c {
            '<' => depth += 1,
            '>' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(inner[start..].trim());
    parts
}

const SCALARS: &[&str] = &[
    "int",
    "long",
    "long long",
    "long int",
    "long long int",
    "short",
    "short int",
    "unsigned",
    "unsigned int",
    "unsigned long",
    "unsigned long long",
    "unsigned short",
    "size_t",
    "int32_t",
    "int64_t",
    "uint32_t",
    "uint64_t",
    "char",
    "bool",
    "float",
    "double",
    "long double",
    "string",
    "auto",
];

/// Whether the prelude can serialize a value of this (normalized) type.
pub(crate) fn is_capturable(norm: &str) -> bool {
    if norm.starts_with('*') {
        return false;
    }
    if SCALARS.contains(&norm) {
        return true;
    }
    let Some(lt) = norm.find('<') else {
        return false;
    };
    if !norm.ends_with('>') {
        return false;
    }
    let outer = &norm[..lt];
    let inner = &norm[lt + 1..norm.len() - 1];
    let parts = split_top_level(inner);
    match outer {
        "vector" | "deque" | "list" | "set" | "unordered_set" => {
            parts.len() == 1 && is_capturable(parts[0])
        }
        "map" | "unordered_map" | "pair" => {
            parts.len() == 2 && parts.iter().all(|p| is_capturable(p))
        }
        _ => false,
    }
}

/// Human-readable display of an uncapturable type (the lowering marks
/// pointers/arrays with a leading `*`).
fn type_display(type_text: &str) -> String {
    match type_text.strip_prefix('*') {
        Some(base) if !base.is_empty() => format!("{base}*"),
        Some(_) => "pointer".to_string(),
        None if type_text.is_empty() => "unknown".to_string(),
        None => type_text.to_string(),
    }
}

/// The `{name, value}` expression for one captured variable.
fn capture_expr(name: &str, type_text: &str) -> String {
    if is_capturable(&norm_type(type_text)) {
        format!("{{\"{name}\", __tp::canon({name})}}")
    } else {
        let display = type_display(type_text);
        format!("{{\"{name}\", std::string(\"{{\\\"__repr__\\\":\\\"{display}\\\"}}\")}}")
    }
}

fn capture_pairs(ir: &FunctionIr, site: &ProbeSite, extra_first: Option<String>) -> String {
    let mut pairs: Vec<String> = extra_first.into_iter().collect();
    for d in super::visible_decls(ir, site.capture_line, &site.capture_path) {
        pairs.push(capture_expr(&d.name, &d.type_text));
    }
    pairs.join(", ")
}

fn placement_str(p: Placement) -> &'static str {
    match p {
        Placement::Entry => "entry",
        Placement::Exit => "exit",
    }
}

fn emit_stmt(block_id: usize, placement: Placement, pairs: &str) -> String {
    format!(
        "__tp::emit({block_id}, \"{}\", {{{pairs}}});",
        placement_str(placement)
    )
}

/// Render one probe as a text edit.
pub(crate) fn render_site(
    unit: &SourceUnit,
    ir: &FunctionIr,
    site: &ProbeSite,
) -> Result<super::Edit> {
    Ok(match &site.action {
        ProbeAction::AfterStmt { line, col } => super::Edit::Insert {
            line: *line,
            col: *col,
            text: format!(
                " {}",
                emit_stmt(site.block_id, site.placement, &capture_pairs(ir, site, None))
            ),
        },
        ProbeAction::BeforeJump { line, col } => super::Edit::Insert {
            line: *line,
            col: *col,
            text: format!(
                "{} ",
                emit_stmt(site.block_id, site.placement, &capture_pairs(ir, site, None))
            ),
        },
        ProbeAction::OwnLineBefore { line, col } => {
            let indent = super::indent_of(unit, *line, *col);
            super::Edit::Insert {
                line: *line,
                col: 0,
                text: format!(
                    "{indent}{}\n",
                    emit_stmt(site.block_id, site.placement, &capture_pairs(ir, site, None))
                ),
            }
        }
        ProbeAction::RewriteReturn {
            line,
            col,
            end_line,
            end_col,
            expr,
        } => {
            let text = rewrite_return(ir, site, expr.as_deref())?;
            super::Edit::Replace {
                start: (*line, *col),
                end: (*end_line, *end_col),
                text,
            }
        }
    })
}

fn rewrite_return(ir: &FunctionIr, site: &ProbeSite, expr: Option<&str>) -> Result<String> {
    let Some(expr) = expr else {
        // `return;` from a void function: __ret__ is null.
        let pairs = capture_pairs(ir, site, Some("{\"__ret__\", std::string(\"null\")}".into()));
        return Ok(format!(
            "{{ {} return; }}",
            emit_stmt(site.block_id, Placement::Entry, &pairs)
        ));
    };
    let ret_type = ir.ret_type.as_deref().unwrap_or("auto");
    let braced_init = expr.trim_start().starts_with('{');
    if braced_init && (ret_type == "auto" || ret_type.is_empty()) {
        return Err(Error::InstrumentationFailure {
            block_id: site.block_id,
            reason: format!(
                "cannot rewrite `return {expr}`: braced initializer with no named return type"
            ),
        });
    }
    let bind = if braced_init {
        format!("{ret_type} __tp_ret = {expr};")
    } else {
        format!("{ret_type} __tp_ret = ({expr});")
    };
    let ret_value = if is_capturable(&norm_type(ret_type)) {
        "{\"__ret__\", __tp::canon(__tp_ret)}".to_string()
    } else {
        let display = type_display(ret_type);
        format!("{{\"__ret__\", std::string(\"{{\\\"__repr__\\\":\\\"{display}\\\"}}\")}}")
    };
    let pairs = capture_pairs(ir, site, Some(ret_value));
    Ok(format!(
        "{{ {bind} {} return __tp_ret; }}",
        emit_stmt(site.block_id, Placement::Entry, &pairs)
    ))
}

// ---------- args-mode driver ----------

/// JSON argument parser + adapters + `main` for `args`-encoded tasks.
/// Relies on the prelude's `canon` for result printing, so the caller
/// always pairs it with [`PRELUDE`].
const DRIVER_RUNTIME: &str = r#"
namespace __tp {

struct Json {
    int kind = 0; // 0 null, 1 bool, 2 int, 3 double, 4 string, 5 array
    bool b = false;
    long long i = 0;
    double d = 0;
    std::string s;
    std::vector<Json> a;
};

struct JsonParser {
    const std::string &t;
    size_t p = 0;
    explicit JsonParser(const std::string &text) : t(text) {}
    void ws() {
        while (p < t.size() && (t[p] == ' ' || t[p] == '\t' || t[p] == '\n' || t[p] == '\r')) ++p;
    }
    Json parse() { return value(); }
    Json value() {
        ws();
        if (p >= t.size()) return Json{};
        char c = t[p];
        if (c == 'n') { p += 4; return Json{}; }
        if (c == 't') { p += 4; Json j; j.kind = 1; j.b = true; return j; }
        if (c == 'f') { p += 5; Json j; j.kind = 1; j.b = false; return j; }
        if (c == '"') return str();
        if (c == '[') return arr();
        return num();
    }
    Json str() {
        Json j; j.kind = 4; ++p;
        while (p < t.size() && t[p] != '"') {
            if (t[p] == '\\' && p + 1 < t.size()) {
                ++p;
                char e = t[p];
                if (e == 'n') j.s += '\n';
                else if (e == 't') j.s += '\t';
                else if (e == 'r') j.s += '\r';
                else if (e == 'b') j.s += '\b';
                else if (e == 'f') j.s += '\f';
                else if (e == 'u') {
                    int code = (int)std::stol(t.substr(p + 1, 4), nullptr, 16);
                    p += 4;
                    if (code < 0x80) j.s += (char)code;
                    else if (code < 0x800) {
                        j.s += (char)(0xC0 | (code >> 6));
                        j.s += (char)(0x80 | (code & 0x3F));
                    } else {
                        j.s += (char)(0xE0 | (code >> 12));
                        j.s += (char)(0x80 | ((code >> 6) & 0x3F));
                        j.s += (char)(0x80 | (code & 0x3F));
                    }
                } else j.s += e;
            } else {
                j.s += t[p];
            }
            ++p;
        }
        ++p;
        return j;
    }
    Json arr() {
        Json j; j.kind = 5; ++p; ws();
        if (p < t.size() && t[p] == ']') { ++p; return j; }
        while (p < t.size()) {
            j.a.push_back(value());
            ws();
            if (p < t.size() && t[p] == ',') { ++p; continue; }
            if (p < t.size() && t[p] == ']') ++p;
            break;
        }
        return j;
    }
    Json num() {
        size_t start = p;
        while (p < t.size() && (std::isdigit((unsigned char)t[p]) || t[p] == '-' || t[p] == '+' ||
                                t[p] == '.' || t[p] == 'e' || t[p] == 'E')) ++p;
        std::string raw = t.substr(start, p - start);
        Json j;
        if (raw.find('.') != std::string::npos || raw.find('e') != std::string::npos ||
            raw.find('E') != std::string::npos) {
            j.kind = 3; j.d = std::stod(raw);
        } else {
            j.kind = 2; j.i = std::stoll(raw);
        }
        return j;
    }
};

inline long long as_ll(const Json &j) { return j.kind == 3 ? (long long)j.d : j.i; }
inline int as_int(const Json &j) { return (int)as_ll(j); }
inline double as_dbl(const Json &j) { return j.kind == 2 ? (double)j.i : j.d; }
inline bool as_bool(const Json &j) { return j.b; }
inline std::string as_str(const Json &j) { return j.s; }
inline std::vector<int> as_vec_int(const Json &j) {
    std::vector<int> v; for (const auto &x : j.a) v.push_back(as_int(x)); return v;
}
inline std::vector<long long> as_vec_ll(const Json &j) {
    std::vector<long long> v; for (const auto &x : j.a) v.push_back(as_ll(x)); return v;
}
inline std::vector<double> as_vec_dbl(const Json &j) {
    std::vector<double> v; for (const auto &x : j.a) v.push_back(as_dbl(x)); return v;
}
inline std::vector<std::string> as_vec_str(const Json &j) {
    std::vector<std::string> v; for (const auto &x : j.a) v.push_back(as_str(x)); return v;
}
inline std::vector<std::vector<int>> as_vec_vec_int(const Json &j) {
    std::vector<std::vector<int>> v; for (const auto &x : j.a) v.push_back(as_vec_int(x)); return v;
}
inline std::vector<std::vector<long long>> as_vec_vec_ll(const Json &j) {
    std::vector<std::vector<long long>> v; for (const auto &x : j.a) v.push_back(as_vec_ll(x)); return v;
}

}  // namespace __tp
"#;

/// Adapter expression turning `args.a[i]` into the declared param type.
fn adapter_for(norm: &str) -> Option<&'static str> {
    match norm {
        "int" | "short" | "short int" => Some("__tp::as_int"),
        "long" | "long long" | "long int" | "long long int" | "int64_t" | "size_t"
        | "unsigned" | "unsigned int" | "unsigned long" | "unsigned long long" | "int32_t"
        | "uint32_t" | "uint64_t" => Some("__tp::as_ll"),
        "double" | "float" | "long double" => Some("__tp::as_dbl"),
        "bool" => Some("__tp::as_bool"),
        "string" => Some("__tp::as_str"),
        "vector<int>" | "vector<short>" => Some("__tp::as_vec_int"),
        "vector<long>" | "vector<long long>" | "vector<int64_t>" | "vector<size_t>" => {
            Some("__tp::as_vec_ll")
        }
        "vector<double>" | "vector<float>" => Some("__tp::as_vec_dbl"),
        "vector<string>" => Some("__tp::as_vec_str"),
        "vector<vector<int>>" => Some("__tp::as_vec_vec_int"),
        "vector<vector<long>>" | "vector<vector<long long>>" => Some("__tp::as_vec_vec_ll"),
        _ => None,
    }
}

/// Generate the `main` driver for an `args`-encoded C++ entry function.
pub fn driver(ir: &FunctionIr) -> Result<String> {
    let mut calls = Vec::new();
    for (i, name) in ir.params.iter().enumerate() {
        let decl = ir
            .decls
            .iter()
            .find(|d| d.line == ir.def_line && &d.name == name)
            .ok_or_else(|| Error::Infra {
                detail: format!("parameter `{name}` has no recorded declaration"),
            })?;
        let norm = norm_type(&decl.type_text);
        let adapter = adapter_for(&norm).ok_or_else(|| Error::CapabilityUnsupported {
            language: crate::lang::SubjectLanguage::Cpp,
            operation: "driver generation".to_string(),
            detail: format!("no stdin adapter for parameter type `{}`", decl.type_text),
        })?;
        calls.push(format!("{adapter}(__tp_args.a[{i}])"));
    }
    let call_args = calls.join(", ");
    let entry = &ir.name;
    let ret = ir.ret_type.as_deref().unwrap_or("auto").trim();
    let body = if ret == "void" {
        format!("    {entry}({call_args});")
    } else {
        format!(
            "    auto __tp_res = {entry}({call_args});\n    std::cout << __tp::canon(__tp_res) << std::endl;"
        )
    };
    Ok(format!(
        "{DRIVER_RUNTIME}\nint main() {{\n    std::string __tp_input((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());\n    __tp::JsonParser __tp_parser(__tp_input);\n    __tp::Json __tp_args = __tp_parser.parse();\n{body}\n    return 0;\n}}\n"
    ))
}
