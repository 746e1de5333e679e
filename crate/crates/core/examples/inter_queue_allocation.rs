// Stack ranking vs a fixed percentage split, across staffing levels.
//
// Loads the shipped 51-queue fixture and scales supply. Strict ranking wins
// while reviewers are scarce; once the top segment is drained it pours all
// spare capacity into the low-value backlog and the split pulls ahead.
//
//     cargo run --release --example inter_queue_allocation

use std::path::Path;

use rqsim::casebook::{CrossoverCase, Strategy};
use rqsim::runner::simulate;
use rqsim::scenario::Scenario;

fn main() -> rqsim::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/crossover/scenario.toml");
    let base = Scenario::load(&path)?;

    println!("{:>7} {:>14} {:>14}", "supply", "stack rank RV", "60:40 RV");
    for supply in [0.5, 1.0, 1.5, 2.0] {
        let (_, a) = simulate(&CrossoverCase::with(&base, Strategy::StackRank, supply))?;
        let (_, b) = simulate(&CrossoverCase::with(&base, Strategy::Split, supply))?;
        let mark = if a.total_rv > b.total_rv {
            "<- stack"
        } else {
            "<- split"
        };
        println!(
            "{supply:>7} {:>14.0} {:>14.0}  {mark}",
            a.total_rv, b.total_rv
        );
    }
    Ok(())
}
