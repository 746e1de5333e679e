// The engine against textbook M/M/1: mean time in system 1/(mu - lambda)
// and Little's law on the waiting line.
//
//     cargo run --release --example mm1_validation

use rqsim::casebook::mm1;
use rqsim::domain::SimTime;
use rqsim::metrics;
use rqsim::runner::simulate;

fn main() -> rqsim::Result<()> {
    let (lambda, mu) = (0.08, 0.1);
    println!(
        "rho {:.2}, expected W {:.1} s",
        lambda / mu,
        1.0 / (mu - lambda)
    );
    println!(
        "{:>5} {:>10} {:>10} {:>12}",
        "seed", "W s", "Lq", "lambda*Wq"
    );
    for seed in 1..=5 {
        let (out, s) = simulate(&mm1(lambda, mu, 100_000, seed))?;
        let tl = metrics::timelines(&out.log);
        let end = tl
            .iter()
            .filter_map(|t| t.closed)
            .max()
            .unwrap_or(out.horizon);
        let lq = metrics::total_load_series(&out.log)
            .time_average(SimTime::ZERO, end)
            .unwrap_or(0.0);
        let wq = metrics::mean_wait_s(&tl).unwrap_or(0.0);
        println!(
            "{seed:>5} {:>10.2} {:>10.3} {:>12.3}",
            s.avg_tat_s.unwrap_or(f64::NAN),
            lq,
            lambda * wq
        );
    }
    Ok(())
}
