// A single reviewer facing a fixed backlog: ordering by weight per second of
// handle time minimizes total weighted completion time.
//
//     cargo run --example smith_rule

use rqsim::casebook::single_machine;
use rqsim::runner::simulate;

fn main() -> rqsim::Result<()> {
    let weights = [3.0, 1.0, 4.0, 1.5, 9.0];
    let handle_ms = [20_000, 5_000, 60_000, 10_000, 30_000];
    let (out, _) = simulate(&single_machine(&weights, &handle_ms))?;

    let mut order: Vec<_> = out.jobs.iter().collect();
    order.sort_by_key(|j| j.final_decision_time());
    let mut total = 0.0;
    println!(
        "{:>4} {:>7} {:>9} {:>10} {:>12}",
        "job", "weight", "handle s", "w/p", "completed s"
    );
    for j in order {
        let i = j.id.0 as usize;
        let done = j.final_decision_time().map_or(0, |t| t.0) as f64 / 1000.0;
        total += weights[i] * done;
        println!(
            "{i:>4} {:>7} {:>9} {:>10.3} {:>12}",
            weights[i],
            handle_ms[i] / 1000,
            weights[i] / (handle_ms[i] as f64 / 1000.0),
            done
        );
    }
    println!("weighted completion time {total:.0}");
    Ok(())
}
