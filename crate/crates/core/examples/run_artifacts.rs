// Writing a scenario to disk and running it the way the `rqsim run`
// subcommand does, leaving the event log, trace, summary and load series in
// a directory.
//
//     cargo run --example run_artifacts -- /tmp/rqsim-demo

use std::path::PathBuf;

use rqsim::casebook::mm1;
use rqsim::runner;

fn main() -> rqsim::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rqsim-demo"));
    let config = mm1(0.08, 0.1, 5_000, 1).write_to(&root.join("scenario"))?;
    let out = root.join("out");
    let report = runner::cmd_run(&config, &out, None, None)?;
    println!("{}", report.summary.to_json());
    println!(
        "{} events, {:.0} events/s; artifacts in {}",
        report.summary.events_processed,
        report.events_per_sec(),
        out.display()
    );
    Ok(())
}
