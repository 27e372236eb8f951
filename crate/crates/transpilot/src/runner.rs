//! Subprocess execution and language toolchain management.
//!
//! Everything that touches an external toolchain goes through here: tool
//! discovery with environment overrides, bounded process execution
//! (timeout + output cap), per-language syntax validation, and a
//! content-addressed compile cache for C++ and Java artifacts.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lang::SubjectLanguage;

/// Timeout for compiler invocations, which are allowed to take longer
/// than subject-program runs.
const COMPILE_TIMEOUT_MS: u64 = 60_000;

/// Paths (or bare names resolved via `PATH`) of the language toolchains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toolchains {
    pub python: String,
    pub javac: String,
    pub java: String,
    pub gxx: String,
}

impl Default for Toolchains {
    fn default() -> Self {
        Toolchains {
            python: "python3".to_string(),
            javac: "javac".to_string(),
            java: "java".to_string(),
            gxx: "g++".to_string(),
        }
    }
}

impl Toolchains {
    /// Defaults plus `TRANSPILOT_*` environment overrides.
    pub fn detect() -> Self {
        Self::default().with_env_overrides()
    }

    pub fn with_env_overrides(mut self) -> Self {
        let take = |var: &str, slot: &mut String| {
            if let Ok(v) = std::env::var(var) {
                if !v.is_empty() {
                    *slot = v;
                }
            }
        };
        take("TRANSPILOT_PYTHON", &mut self.python);
        take("TRANSPILOT_JAVAC", &mut self.javac);
        take("TRANSPILOT_JAVA", &mut self.java);
        take("TRANSPILOT_GXX", &mut self.gxx);
        self
    }

    fn bins_for(&self, language: SubjectLanguage) -> Vec<&str> {
        match language {
            SubjectLanguage::Python => vec![self.python.as_str()],
            SubjectLanguage::Java => vec![self.javac.as_str(), self.java.as_str()],
            SubjectLanguage::Cpp => vec![self.gxx.as_str()],
        }
    }

    pub fn available(&self, language: SubjectLanguage) -> bool {
        self.bins_for(language).iter().all(|b| which(b).is_some())
    }

    pub fn require(&self, language: SubjectLanguage) -> Result<()> {
        if self.available(language) {
            Ok(())
        } else {
            let missing: Vec<&str> = self
                .bins_for(language)
                .into_iter()
                .filter(|b| which(b).is_none())
                .collect();
            Err(Error::ToolchainMissing {
                language,
                detail: format!("not on PATH: {}", missing.join(", ")),
            })
        }
    }

    /// Which subject languages can actually be processed on this host.
    pub fn capability_report(&self) -> Vec<Capability> {
        SubjectLanguage::ALL
            .iter()
            .map(|&language| {
                let mut notes = Vec::new();
                for bin in self.bins_for(language) {
                    match which(bin) {
                        Some(path) => notes.push(format!("{bin} at {}", path.display())),
                        None => notes.push(format!("{bin} not found")),
                    }
                }
                Capability {
                    language,
                    available: self.available(language),
                    detail: notes.join("; "),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Capability {
    pub language: SubjectLanguage,
    pub available: bool,
    pub detail: String,
}

/// Resolve a binary name against `PATH` (or verify an explicit path).
pub fn which(bin: &str) -> Option<PathBuf> {
    let p = Path::new(bin);
    if p.components().count() > 1 {
        return is_executable(p).then(|| p.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(bin))
        .find(|c| is_executable(c))
}

#[cfg(unix)]
fn is_executable(p: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    p.is_file()
        && p.metadata()
            .map(|m| m.permissions().mode() & 0o111 != 0)
            .unwrap_or(false)
}

#[cfg(not(unix))]
fn is_executable(p: &Path) -> bool {
    p.is_file()
}

/// Resource bounds for one subject-program run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub run_timeout_ms: u64,
    pub max_output_bytes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            run_timeout_ms: 10_000,
            max_output_bytes: 8 * 1024 * 1024,
        }
    }
}

/// Outcome of one bounded subprocess run. A timeout is an *outcome*,
/// not an error: crashing and hanging targets are normal pipeline
/// events that the trace layer turns into null instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Process exit code; `None` when killed by signal or timeout.
    pub exit_status: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub duration_ms: u64,
    pub timed_out: bool,
    pub output_truncated: bool,
}

impl RunResult {
    pub fn clean_exit(&self) -> bool {
        !self.timed_out && self.exit_status == Some(0)
    }
}

fn spawn_reader<R: Read + Send + 'static>(mut r: R, cap: usize) -> JoinHandle<(Vec<u8>, bool)> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let mut truncated = false;
        let mut chunk = [0u8; 8192];
        loop {
            match r.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    if buf.len() < cap {
                        let take = n.min(cap - buf.len());
                        buf.extend_from_slice(&chunk[..take]);
                        if take < n {
                            truncated = true;
                        }
                    } else {
                        truncated = true; // keep draining so the child never blocks
                    }
                }
            }
        }
        (buf, truncated)
    })
}

/// Run a command with optional stdin data, a wall-clock timeout, and an
/// output size cap. Output beyond the cap is drained but discarded.
pub fn run_command(cmd: &mut Command, stdin_data: Option<&str>, limits: Limits) -> Result<RunResult> {
    cmd.stdin(if stdin_data.is_some() {
        Stdio::piped()
    } else {
        Stdio::null()
    })
    .stdout(Stdio::piped())
    .stderr(Stdio::piped());

    let start = Instant::now();
    let mut child = cmd.spawn()?;

    let stdin_thread = stdin_data.map(|data| {
        let mut pipe = child.stdin.take().expect("stdin was piped");
        let owned = data.to_owned();
        std::thread::spawn(move || {
            let _ = pipe.write_all(owned.as_bytes());
        })
    });
    let out_thread = spawn_reader(child.stdout.take().expect("stdout piped"), limits.max_output_bytes);
    let err_thread = spawn_reader(child.stderr.take().expect("stderr piped"), limits.max_output_bytes);

    let deadline = start + Duration::from_millis(limits.run_timeout_ms);
    let mut timed_out = false;
    let status = loop {
        if let Some(s) = child.try_wait()? {
            break Some(s);
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            timed_out = true;
            break None;
        }
        std::thread::sleep(Duration::from_millis(2));
    };

    let (out_bytes, out_trunc) = out_thread.join().unwrap_or_default();
    let (err_bytes, err_trunc) = err_thread.join().unwrap_or_default();
    if let Some(t) = stdin_thread {
        let _ = t.join();
    }

    Ok(RunResult {
        exit_status: status.and_then(|s| s.code()),
        stdout: String::from_utf8_lossy(&out_bytes).into_owned(),
        stderr: String::from_utf8_lossy(&err_bytes).into_owned(),
        duration_ms: start.elapsed().as_millis() as u64,
        timed_out,
        output_truncated: out_trunc || err_trunc,
    })
}

/// One compiler/interpreter error with its (best-effort) line number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

/// Result of a syntax validation pass. `raw` is the untouched tool
/// output, kept for fixer prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntaxCheck {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub raw: String,
}

/// Validate that a program is syntactically well-formed using the
/// language's own toolchain (never our parser: the fixer must see the
/// same diagnostics a developer would).
pub fn check_syntax(
    tc: &Toolchains,
    language: SubjectLanguage,
    source: &str,
    limits: Limits,
) -> Result<SyntaxCheck> {
    tc.require(language)?;
    let dir = tempfile::tempdir()?;
    let check_limits = Limits {
        run_timeout_ms: COMPILE_TIMEOUT_MS.max(limits.run_timeout_ms),
        max_output_bytes: limits.max_output_bytes,
    };
    let run = match language {
        SubjectLanguage::Python => {
            let path = dir.path().join("main.py");
            std::fs::write(&path, source)?;
            run_command(
                Command::new(&tc.python)
                    .args(["-m", "py_compile"])
                    .arg(&path)
                    .current_dir(dir.path()),
                None,
                check_limits,
            )?
        }
        SubjectLanguage::Cpp => {
            let path = dir.path().join("main.cpp");
            std::fs::write(&path, source)?;
            run_command(
                Command::new(&tc.gxx)
                    .args(["-fsyntax-only", "-std=c++17"])
                    .arg(&path)
                    .current_dir(dir.path()),
                None,
                check_limits,
            )?
        }
        SubjectLanguage::Java => {
            let name = java_class_name(source);
            let path = dir.path().join(format!("{name}.java"));
            std::fs::write(&path, source)?;
            run_command(
                Command::new(&tc.javac)
                    .arg("-d")
                    .arg(dir.path())
                    .arg(&path)
                    .current_dir(dir.path()),
                None,
                check_limits,
            )?
        }
    };
    if run.timed_out {
        return Err(Error::ToolchainTimeout {
            ms: check_limits.run_timeout_ms,
        });
    }
    let raw = format!("{}{}", run.stderr, run.stdout);
    if run.clean_exit() {
        return Ok(SyntaxCheck {
            ok: true,
            diagnostics: Vec::new(),
            raw,
        });
    }
    let mut diagnostics = match language {
        SubjectLanguage::Python => parse_python_diagnostics(&raw),
        SubjectLanguage::Cpp => parse_gcc_diagnostics(&raw),
        SubjectLanguage::Java => parse_javac_diagnostics(&raw),
    };
    if diagnostics.is_empty() {
        let first_line = raw
            .lines()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("tool failed without diagnostics");
        diagnostics.push(Diagnostic {
            line: None,
            message: first_line.trim().to_string(),
        });
    }
    Ok(SyntaxCheck {
        ok: false,
        diagnostics,
        raw,
    })
}

/// Pick the file name javac requires: the public class, else the first
/// class, else `Main`.
pub fn java_class_name(source: &str) -> String {
    let public_re = regex::Regex::new(r"public\s+(?:final\s+)?class\s+([A-Za-z_$][A-Za-z0-9_$]*)")
        .expect("static regex");
    if let Some(c) = public_re.captures(source) {
        return c[1].to_string();
    }
    let any_re = regex::Regex::new(r"class\s+([A-Za-z_$][A-Za-z0-9_$]*)").expect("static regex");
    if let Some(c) = any_re.captures(source) {
        return c[1].to_string();
    }
    "Main".to_string()
}

fn parse_python_diagnostics(raw: &str) -> Vec<Diagnostic> {
    let line_re = regex::Regex::new(r#"File "[^"]*", line (\d+)"#).expect("static regex");
    let msg_re = regex::Regex::new(r"(?m)^\s*(\w*(?:Error|Warning)\b.*)$").expect("static regex");
    let line = line_re
        .captures_iter(raw)
        .last()
        .and_then(|c| c[1].parse().ok());
    let message = msg_re
        .captures_iter(raw)
        .last()
        .map(|c| c[1].trim().to_string())
        .or_else(|| raw.lines().rev().find(|l| !l.trim().is_empty()).map(|l| l.trim().to_string()));
    match message {
        Some(message) => vec![Diagnostic { line, message }],
        None => Vec::new(),
    }
}

fn parse_gcc_diagnostics(raw: &str) -> Vec<Diagnostic> {
    let re = regex::Regex::new(r"(?m)^[^:\n]+:(\d+):(?:\d+:)?\s*(?:fatal )?error:\s*(.+)$")
        .expect("static regex");
    re.captures_iter(raw)
        .map(|c| Diagnostic {
            line: c[1].parse().ok(),
            message: c[2].trim().to_string(),
        })
        .collect()
}

fn parse_javac_diagnostics(raw: &str) -> Vec<Diagnostic> {
    let re = regex::Regex::new(r"(?m)^[^:\n]+:(\d+):\s*error:\s*(.+)$").expect("static regex");
    re.captures_iter(raw)
        .map(|c| Diagnostic {
            line: c[1].parse().ok(),
            message: c[2].trim().to_string(),
        })
        .collect()
}

fn content_key(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Compile a C++ program, caching the binary by source content. Safe
/// for concurrent callers: the binary is moved into place atomically.
pub fn compile_cpp(
    tc: &Toolchains,
    source: &str,
    cache_dir: &Path,
    limits: Limits,
) -> Result<PathBuf> {
    tc.require(SubjectLanguage::Cpp)?;
    let key = content_key(&[&tc.gxx, "-std=c++17 -O0", source]);
    let bin = cache_dir.join(format!("prog-{key}"));
    if bin.is_file() {
        return Ok(bin);
    }
    std::fs::create_dir_all(cache_dir)?;
    let src_path = cache_dir.join(format!("src-{key}.cpp"));
    std::fs::write(&src_path, source)?;
    let tmp_bin = cache_dir.join(format!(".prog-{key}-{}", std::process::id()));
    let run = run_command(
        Command::new(&tc.gxx)
            .args(["-std=c++17", "-O0", "-o"])
            .arg(&tmp_bin)
            .arg(&src_path),
        None,
        Limits {
            run_timeout_ms: COMPILE_TIMEOUT_MS,
            max_output_bytes: limits.max_output_bytes,
        },
    )?;
    if run.timed_out {
        return Err(Error::ToolchainTimeout {
            ms: COMPILE_TIMEOUT_MS,
        });
    }
    if !run.clean_exit() {
        let diags = parse_gcc_diagnostics(&run.stderr);
        let first = diags.first();
        return Err(Error::Syntax {
            line: first.and_then(|d| d.line),
            message: first
                .map(|d| d.message.clone())
                .unwrap_or_else(|| truncate_for_message(&run.stderr)),
        });
    }
    if std::fs::rename(&tmp_bin, &bin).is_err() && !bin.is_file() {
        return Err(Error::Infra {
            detail: format!("failed to move compiled binary into {}", bin.display()),
        });
    }
    Ok(bin)
}

/// A compiled Java program: where its classes live and the class whose
/// `main` should run.
#[derive(Debug, Clone)]
pub struct JavaProgram {
    pub classes_dir: PathBuf,
    pub main_class: String,
}

/// Compile a Java program, caching classes by source content.
pub fn compile_java(
    tc: &Toolchains,
    source: &str,
    cache_dir: &Path,
    limits: Limits,
) -> Result<JavaProgram> {
    tc.require(SubjectLanguage::Java)?;
    let main_class = java_class_name(source);
    let key = content_key(&[&tc.javac, &main_class, source]);
    let classes_dir = cache_dir.join(format!("classes-{key}"));
    let stamp = classes_dir.join(".ok");
    if stamp.is_file() {
        return Ok(JavaProgram {
            classes_dir,
            main_class,
        });
    }
    std::fs::create_dir_all(&classes_dir)?;
    let src_path = classes_dir.join(format!("{main_class}.java"));
    std::fs::write(&src_path, source)?;
    let run = run_command(
        Command::new(&tc.javac)
            .arg("-d")
            .arg(&classes_dir)
            .arg(&src_path),
        None,
        Limits {
            run_timeout_ms: COMPILE_TIMEOUT_MS,
            max_output_bytes: limits.max_output_bytes,
        },
    )?;
    if run.timed_out {
        return Err(Error::ToolchainTimeout {
            ms: COMPILE_TIMEOUT_MS,
        });
    }
    if !run.clean_exit() {
        let diags = parse_javac_diagnostics(&run.stderr);
        let first = diags.first();
        return Err(Error::Syntax {
            line: first.and_then(|d| d.line),
            message: first
                .map(|d| d.message.clone())
                .unwrap_or_else(|| truncate_for_message(&run.stderr)),
        });
    }
    std::fs::write(&stamp, b"ok")?;
    Ok(JavaProgram {
        classes_dir,
        main_class,
    })
}

fn truncate_for_message(s: &str) -> String {
    let t = s.trim();
    if t.len() <= 400 {
        t.to_string()
    } else {
        let mut end = 400;
        while !t.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &t[..end])
    }
}

/// Run a Python script file with the given stdin.
pub fn run_python_file(
    tc: &Toolchains,
    script: &Path,
    stdin_data: Option<&str>,
    limits: Limits,
) -> Result<RunResult> {
    tc.require(SubjectLanguage::Python)?;
    run_command(Command::new(&tc.python).arg(script), stdin_data, limits)
}

/// Run a compiled binary with the given stdin.
pub fn run_binary(bin: &Path, stdin_data: Option<&str>, limits: Limits) -> Result<RunResult> {
    run_command(&mut Command::new(bin), stdin_data, limits)
}

/// Run a compiled Java program's main class with the given stdin.
pub fn run_java(
    tc: &Toolchains,
    program: &JavaProgram,
    stdin_data: Option<&str>,
    limits: Limits,
) -> Result<RunResult> {
    tc.require(SubjectLanguage::Java)?;
    run_command(
        Command::new(&tc.java)
            .arg("-cp")
            .arg(&program.classes_dir)
            .arg(&program.main_class),
        stdin_data,
        limits,
    )
}
