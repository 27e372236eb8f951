//! Command-line front end over the library pipeline.
//!
//! Exit code 0 means the requested operation completed; a failed
//! translation (syntax_fail / semantic_fail) still exits 0 because the
//! verdict itself is the product. Infrastructure faults exit 1.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use transpilot::lang::SourceUnit;
use transpilot::llm::{LlmClient, LlmMode};
use transpilot::pipeline::{self, PipelineConfig, TaskStatus};
use transpilot::runner::Toolchains;
use transpilot::{aligner, frontend};

#[derive(Parser)]
#[command(
    name = "transpilot",
    version,
    about = "Block-aligned, trace-guided code translation between Python, Java, and C++"
)]
struct Cli {
    /// Pipeline configuration file (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the configured LLM mode.
    #[arg(long, global = true, value_name = "live|replay|record")]
    llm_mode: Option<LlmMode>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate one task directory end to end and persist its artifacts.
    Translate {
        /// Task directory holding task.json and source.<ext>.
        #[arg(long, value_name = "DIR")]
        task: PathBuf,
    },
    /// Run every task under a directory and report computational accuracy.
    Bench {
        /// Directory whose subdirectories are task directories.
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
        /// Tasks to run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write the full report as JSON.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Align source blocks to a translated program, without any fixing.
    Align {
        /// Task directory holding task.json and source.<ext>.
        #[arg(long, value_name = "DIR")]
        task: PathBuf,
        /// Target program to align against; defaults to the task's
        /// persisted translation artifact.
        #[arg(long, value_name = "FILE")]
        target: Option<PathBuf>,
    },
    /// Show which language toolchains this machine can run.
    Capabilities,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(mode) = cli.llm_mode {
        config.llm.mode = mode;
    }

    let tc = Toolchains::detect();
    if !matches!(cli.command, Command::Capabilities) {
        let summary: Vec<String> = tc
            .capability_report()
            .iter()
            .map(|c| {
                format!(
                    "{} {}",
                    c.language.name(),
                    if c.available { "ok" } else { "unavailable" }
                )
            })
            .collect();
        eprintln!("toolchains: {}", summary.join(", "));
    }

    match cli.command {
        Command::Translate { task } => translate(&task, &config),
        Command::Bench { dir, jobs, report } => bench(&dir, &config, jobs, report.as_deref()),
        Command::Align { task, target } => align(&task, target.as_deref(), &config),
        Command::Capabilities => {
            for cap in tc.capability_report() {
                println!(
                    "{}: {}",
                    cap.language.name(),
                    if cap.available {
                        "available"
                    } else {
                        "unavailable"
                    }
                );
                println!("  {}", cap.detail);
            }
            Ok(())
        }
    }
}

fn translate(task_dir: &std::path::Path, config: &PipelineConfig) -> anyhow::Result<()> {
    let result = pipeline::run_task(task_dir, config)?;
    println!("task {}: {}", result.task_id, result.status);
    println!(
        "  tests: {}/{} passed",
        result.tests_passed, result.tests_total
    );
    println!(
        "  iterations: {} outer, {} syntax attempts, {} semantic patches",
        result.outer_iterations_used, result.syntax_iterations_used, result.semantic_patches_used
    );
    println!("  llm calls: {}", result.llm_calls);
    println!("  wall: {} ms", result.wall_ms);
    println!(
        "  artifacts: {}",
        config.out_dir.join(&result.task_id).display()
    );
    for note in &result.notes {
        println!("  note: {note}");
    }
    if result.status == TaskStatus::InfraError {
        let detail = result
            .error
            .unwrap_or_else(|| "unspecified infrastructure fault".to_string());
        return Err(anyhow!(detail).context("task did not complete"));
    }
    Ok(())
}

fn bench(
    dir: &std::path::Path,
    config: &PipelineConfig,
    jobs: usize,
    report_path: Option<&std::path::Path>,
) -> anyhow::Result<()> {
    let report = pipeline::run_benchmark(dir, config, jobs)?;
    print!("{}", report.render_table());
    for result in &report.results {
        if result.status == TaskStatus::InfraError {
            eprintln!(
                "task {} hit an infrastructure error: {}",
                result.task_id,
                result.error.as_deref().unwrap_or("unspecified")
            );
        }
    }
    if let Some(path) = report_path {
        let rendered = serde_json::to_string_pretty(&report)?;
        fs::write(path, rendered + "\n")
            .with_context(|| format!("cannot write report to {}", path.display()))?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn align(
    task_dir: &std::path::Path,
    target_path: Option<&std::path::Path>,
    config: &PipelineConfig,
) -> anyhow::Result<()> {
    let loaded = pipeline::load_task(task_dir)?;
    let default_target = config.out_dir.join(&loaded.manifest.id).join(format!(
        "target.{}",
        loaded.manifest.target_language.file_extension()
    ));
    let target_path = target_path.unwrap_or(&default_target);
    let text = fs::read_to_string(target_path).with_context(|| {
        format!(
            "cannot read target program {}; run `transpilot translate` first or pass --target",
            target_path.display()
        )
    })?;
    let target = SourceUnit::new(
        loaded.manifest.target_language,
        text,
        &loaded.manifest.entry_name,
    );

    let partition = frontend::partition(&loaded.source)?;
    let client = LlmClient::from_settings(&config.llm)?;
    let report = aligner::align(&client, &loaded.source, &partition, &target)?;

    for entry in &report.mapping.entries {
        let target_block = report.mapping.f_map(entry.source_block);
        println!(
            "block {} -> lines {}-{} (target block {})",
            entry.source_block,
            entry.start_line,
            entry.end_line,
            target_block.map_or_else(|| "?".to_string(), |b| b.to_string()),
        );
    }
    if !report.unmapped_lines.is_empty() {
        println!("unmapped executable lines: {:?}", report.unmapped_lines);
    }
    for warning in &report.warnings {
        println!("warning: {warning}");
    }

    let out_dir = config.out_dir.join(&loaded.manifest.id);
    fs::create_dir_all(&out_dir)?;
    let mapping_path = out_dir.join("mapping.json");
    let rendered = serde_json::to_string_pretty(&report)?;
    fs::write(&mapping_path, rendered + "\n")?;
    println!("mapping written to {}", mapping_path.display());
    Ok(())
}
