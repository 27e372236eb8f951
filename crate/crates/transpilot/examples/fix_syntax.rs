//! Drive the syntax-fixing loop on a broken translation with a scripted
//! model: validate, plan, patch, re-validate, stop on a fixpoint.
//!
//! Needs `python3` on PATH for the syntax check itself.
//! Run with: `cargo run --example fix_syntax`

use transpilot::lang::{SourceUnit, SubjectLanguage};
use transpilot::llm::{FnBackend, LlmClient};
use transpilot::runner::{Limits, Toolchains};
use transpilot::syntax_fixer::fix_syntax;

fn main() -> transpilot::Result<()> {
    let tc = Toolchains::detect();
    if !tc.available(SubjectLanguage::Python) {
        eprintln!("python3 not found on PATH; nothing to check");
        return Ok(());
    }

    // A translation with two independent syntax errors: a missing colon
    // and a stray closing paren.
    let broken = "\
def mean(xs)
    total = sum(xs))
    return total / len(xs)
";

    // Scripted model fixing one reported diagnostic per round: python
    // complains about the stray paren first, then the missing colon.
    // Real backends are swapped in the same way; the loop never knows
    // the difference.
    let client = LlmClient::with_backend(Box::new(FnBackend::new(|req| {
        let prompt = &req.messages.last()?.text;
        match req.template.as_str() {
            "syntax_plan" => Some("fix the reported line only".to_string()),
            "syntax_patch" if prompt.contains("sum(xs))") => Some(
                "```\ndef mean(xs)\n    total = sum(xs)\n    return total / len(xs)\n```"
                    .to_string(),
            ),
            "syntax_patch" => Some(
                "```\ndef mean(xs):\n    total = sum(xs)\n    return total / len(xs)\n```"
                    .to_string(),
            ),
            _ => None,
        }
    })));

    let candidate = SourceUnit::new(SubjectLanguage::Python, broken, "mean");
    let outcome = fix_syntax(&client, &tc, &candidate, 6, Limits::default())?;

    println!("clean: {} after {} attempts", outcome.clean, outcome.iterations);
    for attempt in &outcome.attempts {
        println!(
            "  attempt {}: line {:?}: {}",
            attempt.iteration, attempt.line, attempt.message
        );
    }
    println!("stop: {:?}", outcome.stop);
    println!("\nfinal program:\n{}", outcome.program.text);
    Ok(())
}
