// Trading escalated-job turnaround against SLA compliance.
//
// Sweeps the wait weight of the escalation priority over a workload with a
// daily overload. Larger weights let long-waiting routine jobs overtake fresh
// escalations.
//
//     cargo run --release --example escalation_sweep

use rqsim::casebook::EscalationCase;
use rqsim::runner::run_sweep;
use serde_json::json;

fn main() -> rqsim::Result<()> {
    let case = EscalationCase::default();
    let base = case.scenario(0.0, 1);
    let alphas: Vec<_> = [0.0, 0.25, 0.5, 1.0, 2.0]
        .iter()
        .map(|a| json!(a))
        .collect();
    let seeds = [1, 2, 3];
    let rows = run_sweep(&base, &["queues.main.formula.alpha"], &alphas, &seeds, 0);

    println!(
        "{:>6} {:>16} {:>14} {:>14}",
        "alpha", "escalated TAT s", "other TAT s", "SLA violated"
    );
    for chunk in rows.chunks(seeds.len()) {
        let mut esc = 0.0;
        let mut other = 0.0;
        let mut sla = 0.0;
        for (_, _, summary) in chunk {
            let s = summary
                .as_ref()
                .map_err(|e| rqsim::Error::Runtime(e.to_string()))?;
            esc += s.escalated_avg_tat_s.unwrap_or(0.0);
            other += s.other_avg_tat_s.unwrap_or(0.0);
            sla += s.sla_violation_rate.unwrap_or(0.0);
        }
        let n = chunk.len() as f64;
        println!(
            "{:>6} {:>16.0} {:>14.0} {:>13.1}%",
            chunk[0].0,
            esc / n,
            other / n,
            sla / n * 100.0
        );
    }
    Ok(())
}
