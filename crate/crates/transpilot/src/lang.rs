//! Subject languages and raw program units.
//!
//! The *subject* languages are the languages the pipeline translates
//! between; they are unrelated to the implementation language of this
//! crate.

use serde::{Deserialize, Serialize};

/// A programming language the pipeline can analyze and translate.
///
/// Python support is mandatory; Java and C++ are optional capabilities
/// whose availability depends on the local toolchains (see
/// [`crate::runner::Toolchains::capability_report`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectLanguage {
    Python,
    Java,
    Cpp,
}

impl SubjectLanguage {
    pub const ALL: [SubjectLanguage; 3] = [
        SubjectLanguage::Python,
        SubjectLanguage::Java,
        SubjectLanguage::Cpp,
    ];

    /// Lower-case canonical name, matching manifest/config spelling.
    pub fn name(self) -> &'static str {
        match self {
            SubjectLanguage::Python => "python",
            SubjectLanguage::Java => "java",
            SubjectLanguage::Cpp => "cpp",
        }
    }

    /// Conventional source-file extension.
    pub fn file_extension(self) -> &'static str {
        match self {
            SubjectLanguage::Python => "py",
            SubjectLanguage::Java => "java",
            SubjectLanguage::Cpp => "cpp",
        }
    }

    /// Parse a manifest/CLI spelling. Accepts a few common aliases.
    pub fn from_name(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "python" | "py" | "python3" => Some(SubjectLanguage::Python),
            "java" => Some(SubjectLanguage::Java),
            "cpp" | "c++" | "cxx" | "cc" => Some(SubjectLanguage::Cpp),
            _ => None,
        }
    }

    /// Line-comment leader for this language.
    pub fn line_comment(self) -> &'static str {
        match self {
            SubjectLanguage::Python => "#",
            SubjectLanguage::Java | SubjectLanguage::Cpp => "//",
        }
    }
}

impl std::fmt::Display for SubjectLanguage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How test inputs reach a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputEncoding {
    /// Tests are JSON argument arrays. A generated driver reads the array
    /// from stdin, calls the entry function, and prints its result in
    /// canonical JSON.
    Args,
    /// Tests are raw stdin text consumed by the program's own main or
    /// top-level code.
    Stdin,
}

impl std::str::FromStr for SubjectLanguage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SubjectLanguage::from_name(s).ok_or_else(|| format!("unknown subject language `{s}`"))
    }
}

/// A raw program plus the identity of the function under translation.
///
/// `SourceUnit` itself performs no validation; [`crate::frontend::parse`]
/// is the checked constructor that guarantees the text parses and the
/// entry function exists. Candidate programs coming back from a model are
/// deliberately held as unvalidated `SourceUnit`s until they clear syntax
/// validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub language: SubjectLanguage,
    pub text: String,
    /// Name of the function under translation (the probe/alignment scope).
    pub entry_name: String,
    pub line_count: usize,
}

impl SourceUnit {
    pub fn new(
        language: SubjectLanguage,
        text: impl Into<String>,
        entry_name: impl Into<String>,
    ) -> Self {
        let text = text.into();
        let line_count = count_lines(&text);
        SourceUnit {
            language,
            text,
            entry_name: entry_name.into(),
            line_count,
        }
    }

    /// 1-based line lookup. Returns `""` for out-of-range lines.
    pub fn line(&self, n: usize) -> &str {
        if n == 0 {
            return "";
        }
        self.text.lines().nth(n - 1).unwrap_or("")
    }

    /// All lines, 0-indexed by `line - 1`.
    pub fn lines(&self) -> Vec<&str> {
        self.text.lines().collect()
    }

    /// Replace the program text, recomputing `line_count`.
    pub fn with_text(&self, text: impl Into<String>) -> Self {
        SourceUnit::new(self.language, text, self.entry_name.clone())
    }
}

fn count_lines(text: &str) -> usize {
    text.lines().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn language_names_round_trip() {
        for lang in SubjectLanguage::ALL {
            assert_eq!(SubjectLanguage::from_name(lang.name()), Some(lang));
        }
        assert_eq!(SubjectLanguage::from_name("C++"), Some(SubjectLanguage::Cpp));
        assert_eq!(SubjectLanguage::from_name("nope"), None);
    }

    #[test]
    fn source_unit_counts_lines() {
        let u = SourceUnit::new(SubjectLanguage::Python, "a = 1\nb = 2\n", "f");
        assert_eq!(u.line_count, 2);
        assert_eq!(u.line(1), "a = 1");
        assert_eq!(u.line(2), "b = 2");
        assert_eq!(u.line(3), "");
    }
}
