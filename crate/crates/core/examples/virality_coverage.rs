// Boosting a watched topic in a views-ranked queue.
//
// With a fixed review budget, raising the topic weight buys topic coverage
// at the expense of overall coverage of high-view content. Weight zero is
// the same ranking as predicted views alone.
//
//     cargo run --release --example virality_coverage

use rqsim::casebook::ViralityCase;
use rqsim::runner::simulate;

fn main() -> rqsim::Result<()> {
    let case = ViralityCase::default();
    let (_, baseline) = simulate(&case.views_only())?;
    println!(
        "views only: coverage {:.1}%, topic coverage {:.1}%\n",
        baseline.coverage.unwrap_or(0.0) * 100.0,
        baseline.topic_coverage[0].unwrap_or(0.0) * 100.0
    );
    println!("{:>4} {:>10} {:>10}", "W", "coverage", "topic");
    for w in [0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let (_, s) = simulate(&case.virality(w))?;
        println!(
            "{w:>4} {:>9.1}% {:>9.1}%",
            s.coverage.unwrap_or(0.0) * 100.0,
            s.topic_coverage[0].unwrap_or(0.0) * 100.0
        );
    }
    Ok(())
}
