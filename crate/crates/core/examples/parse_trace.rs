//! Reads a trace in either format and prints its steps and inferred links.
//!
//! cargo run --example parse_trace -- tests/fixtures/whowhen/websurfer.json

use mas_attribution::trace::{infer_io_links, read_trace_file, write_native, DEFAULT_OVERLAP_THRESHOLD};

fn main() -> mas_attribution::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/native/planner_chain.trace.jsonl").into());
    let trace = read_trace_file(path.as_ref())?;
    println!("task: {}", trace.task);
    println!("outcome {:.2}, {} steps, agents {:?}", trace.outcome, trace.len(), trace.agents());
    for s in &trace.steps {
        let preview: String = s.action.payload.chars().take(60).collect();
        println!("  [{}] {:<12} {:<10} {preview}", s.index, s.agent, s.action.kind);
    }
    let linked = infer_io_links(&trace, DEFAULT_OVERLAP_THRESHOLD);
    println!("links before inference: {:?}", trace.links());
    println!("links after inference:  {:?}", linked.links());
    println!("\nnative form:\n{}", write_native(&linked));
    Ok(())
}
