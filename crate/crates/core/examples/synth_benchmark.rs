//! Generates a small corpus and scores the causal method against the random baseline.

use mas_attribution::config::Config;
use mas_attribution::features::LexicalSimilarity;
use mas_attribution::pipeline::{evaluate_corpus, Method};
use mas_attribution::synth::{generate_corpus, load_corpus, write_corpus, SynthSpec};

fn main() -> mas_attribution::Result<()> {
    let count = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let spec = SynthSpec::default();
    let dir = std::env::temp_dir().join("mas-attribution-synth-example");
    write_corpus(&dir, &generate_corpus(&spec, count)?)?;
    let entries = load_corpus(&dir)?;
    println!("{} instances in {}", entries.len(), dir.display());

    let mut config = Config::default();
    config.ranking.bootstrap = 50;
    for method in [Method::Causal, Method::Random] {
        let m = evaluate_corpus(&entries, method, &config, &LexicalSimilarity);
        println!("{method:?}: agent {:.3}, step {:.3}", m.agent_accuracy, m.step_accuracy);
    }
    Ok(())
}
