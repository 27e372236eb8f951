//! End-to-end task run: suite assembly, direct translation, a semantic
//! fix round, and the artifact directory the pipeline leaves behind.
//!
//! The model is scripted (the "translation" drops a `* 2`), so this runs
//! offline; `python3` must be on PATH. Run with:
//! `cargo run --example translate_task`

use std::fs;

use transpilot::lang::SubjectLanguage;
use transpilot::llm::{FnBackend, LlmClient};
use transpilot::pipeline::{run_task_with, PipelineConfig};
use transpilot::runner::Toolchains;

fn main() -> anyhow::Result<()> {
    if !Toolchains::detect().available(SubjectLanguage::Python) {
        eprintln!("python3 not found on PATH; the pipeline cannot execute tests");
        return Ok(());
    }

    // A task directory: manifest plus source program.
    let root = tempfile::tempdir()?;
    let task_dir = root.path().join("double");
    fs::create_dir_all(&task_dir)?;
    fs::write(
        task_dir.join("task.json"),
        serde_json::json!({
            "id": "double",
            "source_language": "python",
            "target_language": "python",
            "entry_name": "f",
            "input_encoding": "args",
            "tests": [
                {"input": "[5]", "expected_output": "10"},
                {"input": "[3]", "expected_output": "6"},
            ],
        })
        .to_string(),
    )?;
    fs::write(task_dir.join("source.py"), "def f(x):\n    y = x * 2\n    return y\n")?;

    let mut config = PipelineConfig::default();
    config.tests.generated = 0; // manifest tests only; no input-generation call
    config.out_dir = root.path().join("out");

    // Scripted model: a flawed first translation, then an honest repair.
    let client = LlmClient::with_backend(Box::new(FnBackend::new(|req| {
        match req.template.as_str() {
            "direct_translate" => {
                Some("```\ndef f(x):\n    y = x + 2\n    return y\n```".to_string())
            }
            "align_blocks" => Some("BLOCK1 -> lines 2-3".to_string()),
            "semantic_value_aware" => {
                Some("```\n    y = x * 2\n    return y\n```".to_string())
            }
            _ => None,
        }
    })));

    let result = run_task_with(&task_dir, &config, &client)?;

    println!("status:            {}", result.status);
    println!(
        "tests:             {}/{} passed",
        result.tests_passed, result.tests_total
    );
    println!(
        "iterations:        {} outer / {} syntax / {} semantic patches",
        result.outer_iterations_used,
        result.syntax_iterations_used,
        result.semantic_patches_used
    );
    println!("llm calls:         {}", result.llm_calls);
    println!(
        "final program:\n{}",
        result.final_program.as_ref().map_or("", |p| p.text.as_str())
    );

    let out = config.out_dir.join("double");
    println!("artifacts under {}:", out.display());
    let mut names: Vec<String> = Vec::new();
    collect_files(&out, &out, &mut names)?;
    names.sort();
    for name in names {
        println!("  {name}");
    }
    Ok(())
}

fn collect_files(
    root: &std::path::Path,
    dir: &std::path::Path,
    out: &mut Vec<String>,
) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.display().to_string());
        }
    }
    Ok(())
}
