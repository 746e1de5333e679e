// How much machine-decided content to send back for human validation.
//
// Sweeps the reaper's sample fraction and reports the share of violating,
// high-severity candidates that never reach a reviewer.
//
//     cargo run --release --example reaper_thresholds

use rqsim::casebook::ReaperCase;
use rqsim::runner::simulate;

fn main() -> rqsim::Result<()> {
    let case = ReaperCase::default();
    println!(
        "{:>9} {:>12} {:>18}",
        "fraction", "validations", "misspecification"
    );
    for f in [0.0, 0.1, 0.25, 0.5, 1.0] {
        let (_, s) = simulate(&case.scenario(f))?;
        println!(
            "{f:>9} {:>12} {:>17.1}%",
            s.reaper_validations,
            s.misspecification_rate.unwrap_or(f64::NAN) * 100.0
        );
    }
    Ok(())
}
