//! Full attribution of one failed run with reference history, printed as markdown.

use mas_attribution::config::Config;
use mas_attribution::features::LexicalSimilarity;
use mas_attribution::pipeline::attribute;
use mas_attribution::trace::{read_bundle_file, read_trace_file};

fn main() -> mas_attribution::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/synth_step4");
    let trace = read_trace_file(format!("{dir}/step4.trace.jsonl").as_ref())?;
    let reference = read_bundle_file(format!("{dir}/step4.reference.jsonl").as_ref())?;
    let run = attribute(&trace, Some(&reference), &Config::default(), &LexicalSimilarity)?;
    println!("{}", run.report.to_markdown(Some(&run.timings)));
    Ok(())
}
