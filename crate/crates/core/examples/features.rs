//! Step feature vectors and the trace context vector.

use mas_attribution::features::{encode_context, extract_features, LexicalSimilarity, DEFAULT_WINDOW, FEATURE_NAMES};
use mas_attribution::graph::build_data_graph;
use mas_attribution::trace::read_trace_file;

fn main() -> mas_attribution::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/whowhen/websurfer.json");
    let trace = read_trace_file(path.as_ref())?;
    let graph = build_data_graph(&trace);
    let set = extract_features(&trace, &graph, &LexicalSimilarity, DEFAULT_WINDOW);
    print!("{:>4}", "step");
    for name in FEATURE_NAMES {
        print!(" {:>8.8}", name);
    }
    println!();
    for (k, f) in set.raw.iter().enumerate() {
        print!("{k:>4}");
        for v in f.to_array() {
            print!(" {v:>8.3}");
        }
        println!();
    }
    let ctx = encode_context(&trace, &set.raw);
    println!("context ({:?}): {:.3?}", ctx.provenance, ctx.values);
    Ok(())
}
