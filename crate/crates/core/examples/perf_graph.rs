//! Builds the data-dependency graph of a trace, inverts it and projects it to agents.

use mas_attribution::graph::{build_data_graph, invert, project_to_agent_graph};
use mas_attribution::trace::read_trace_file;

fn main() -> mas_attribution::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/native/planner_chain.trace.jsonl");
    let trace = read_trace_file(path.as_ref())?;
    let data = build_data_graph(&trace);
    println!("data edges (producer -> consumer): {:?}", data.edges);
    let perf = invert(&data);
    println!("performance edges (consumer -> producer): {:?}", perf.edges);
    println!("sinks: {:?}", perf.sinks());
    let agents = project_to_agent_graph(&perf);
    println!("agent edges: {:?}", agents.edge_names());
    println!("\n{}", perf.to_dot("perf"));
    Ok(())
}
