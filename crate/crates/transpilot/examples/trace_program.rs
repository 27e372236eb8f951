//! Instrument a program with block probes, execute it on a test input,
//! and print the block-level execution trace the comparator works on.
//!
//! Needs a `python3` on PATH. Run with: `cargo run --example trace_program`

use transpilot::exec::{collect_traces, TestCase};
use transpilot::frontend::partition;
use transpilot::instrument::instrument_source;
use transpilot::lang::{InputEncoding, SourceUnit, SubjectLanguage};
use transpilot::runner::{Limits, Toolchains};

fn main() -> transpilot::Result<()> {
    let tc = Toolchains::detect();
    if !tc.available(SubjectLanguage::Python) {
        eprintln!("python3 not found on PATH; nothing to trace");
        return Ok(());
    }

    let program = "\
def running_max(xs):
    best = None
    for x in xs:
        if best is None or x > best:
            best = x
    return best
";
    let unit = SourceUnit::new(SubjectLanguage::Python, program, "running_max");
    let blocks = partition(&unit)?;
    let instrumented = instrument_source(&unit, &blocks)?;

    println!("instrumented program:\n{}", instrumented.text);

    let suite = vec![TestCase {
        id: 1,
        input: "[[3,1,4,1,5]]".to_string(),
        expected_output: "5".to_string(),
    }];
    let workdir = tempfile::tempdir()?;
    let bundle = collect_traces(
        &tc,
        &instrumented,
        &unit.entry_name,
        InputEncoding::Args,
        &suite,
        workdir.path(),
        Limits::default(),
    )?;

    let trace = bundle.get(1).expect("test 1 ran");
    println!("trace for input [[3,1,4,1,5]]:");
    for instance in &trace.instances {
        let block = instance
            .block_id
            .map_or_else(|| "<crash>".to_string(), |b| format!("BLOCK{b}"));
        let placement = instance
            .placement
            .map_or("", |p| if p == transpilot::trace::Placement::Entry {
                "entry"
            } else {
                "exit "
            });
        let vars: Vec<String> = instance
            .vars
            .iter()
            .map(|(k, v)| format!("{k}={}", v.to_canonical_string()))
            .collect();
        println!(
            "  #{:<2} {block:<8} {placement} {}",
            instance.seq,
            vars.join(", ")
        );
    }
    println!("program stdout: {:?}", trace.program_stdout);
    Ok(())
}
