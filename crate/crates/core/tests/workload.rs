use std::fs;

use rqsim::casebook::{mm1, CrossoverCase};
use rqsim::domain::{Job, Reviewer, Shift, SimTime};
use rqsim::error::Error;
use rqsim::scenario::Scenario;
use rqsim::workload::{
    generate_synthetic, resample_demand, resample_supply, Arrival, HandleTime, SyntheticSpec,
};

/// Two-sided Kolmogorov-Smirnov statistic against a continuous CDF.
fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

// critical value at alpha = 0.01
fn ks_limit(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[test]
fn exponential_handle_times_and_poisson_gaps_pass_ks() {
    let (rate, mu) = (0.05, 1.0 / 90.0);
    let mut spec = SyntheticSpec::new(
        Arrival::Poisson { rate_per_s: rate },
        HandleTime::Exponential { rate_per_s: mu },
    );
    spec.count = Some(20_000);
    let jobs = generate_synthetic(&spec, 99, 0, &[]).unwrap();
    assert_eq!(jobs.len(), 20_000);

    let handles: Vec<f64> = jobs
        .iter()
        .map(|j| j.handle_time_ms as f64 / 1000.0)
        .collect();
    let d = ks(handles, |x| 1.0 - (-mu * x).exp());
    assert!(d < ks_limit(jobs.len()), "handle KS {d}");

    let gaps: Vec<f64> = jobs
        .windows(2)
        .map(|w| (w[1].enqueue_time.0 - w[0].enqueue_time.0) as f64 / 1000.0)
        .collect();
    // millisecond rounding shifts the CDF by at most half a step
    let d = ks(gaps.clone(), |x| 1.0 - (-rate * (x + 0.0005)).exp());
    assert!(d < ks_limit(gaps.len()), "gap KS {d}");
}

fn trace(n: u64) -> Vec<Job> {
    (0..n)
        .map(|i| {
            let mut j = Job::new(i, SimTime(i * 1_733 % (48 * 3_600_000)), 60_000);
            j.initial_queue = Some("q".into());
            j
        })
        .collect()
}

// |observed - expected| within 4 standard deviations
fn assert_binomial(observed: usize, trials: f64, p: f64, offset: f64) {
    let mean = offset + trials * p;
    let sd = (trials * p * (1.0 - p)).sqrt();
    assert!(
        (observed as f64 - mean).abs() <= 4.0 * sd,
        "observed {observed}, expected {mean} +- {sd}"
    );
}

#[test]
fn demand_resampling_counts_are_binomial() {
    let jobs = trace(10_000);
    assert_binomial(resample_demand(&jobs, 0.3, 1).unwrap().len(), 1e4, 0.3, 0.0);
    assert_binomial(resample_demand(&jobs, 2.5, 2).unwrap().len(), 1e4, 0.5, 2e4);
    let grown = resample_demand(&jobs, 3.0, 3).unwrap();
    assert_eq!(grown.len(), 30_000);
    // every replica stays inside its source hour
    let hour = |t: SimTime| t.0 / 3_600_000;
    let by_hour = |js: &[Job]| {
        let mut h = std::collections::BTreeMap::new();
        for j in js {
            *h.entry(hour(j.enqueue_time)).or_insert(0) += 1;
        }
        h
    };
    let (src, out) = (by_hour(&jobs), by_hour(&grown));
    assert!(src.iter().all(|(h, n)| out[h] == 3 * n));
}

#[test]
fn supply_thinning_keeps_whole_reviewers() {
    let revs: Vec<Reviewer> = (0..2_000)
        .map(|i| {
            let mut r = Reviewer::new(i);
            r.shifts
                .push(Shift::new(SimTime(0), SimTime(8 * 3_600_000)));
            r
        })
        .collect();
    let out = resample_supply(&revs, 0.4, 5).unwrap();
    assert_binomial(out.len(), 2_000.0, 0.4, 0.0);
    assert!(out.iter().all(|r| r.scheduled_ms() == 8 * 3_600_000));
}

#[test]
fn written_scenario_reloads_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let original = mm1(0.05, 0.1, 2_000, 3);
    let path = original.write_to(dir.path()).unwrap();
    let loaded = Scenario::load(&path).unwrap();
    assert_eq!(loaded.config, {
        let mut c = original.config.clone();
        c.inputs = loaded.config.inputs.clone();
        c
    });
    assert_eq!(original.run().unwrap().log, loaded.run().unwrap().log);
}

#[test]
fn shipped_crossover_fixture_matches_its_builder() {
    let path =
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/crossover/scenario.toml");
    let shipped = Scenario::load(&path).unwrap();
    let built = CrossoverCase::default().base();
    assert_eq!(shipped.jobs, built.jobs);
    assert_eq!(shipped.config.queues, built.config.queues);
    assert_eq!(shipped.config.segments, built.config.segments);
    assert_eq!(shipped.config.reviewer_pools, built.config.reviewer_pools);
}

#[test]
fn bad_job_lines_are_reported_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("jobs.ndjson"),
        concat!(
            "{\"id\":1,\"enqueue_time_ms\":0,\"handle_time_ms\":1000,\"queue\":\"q\"}\n",
            "{\"id\":2,\"enqueue_time_ms\":0,\"handle_time_ms\":0,\"queue\":\"q\"}\n",
            "not json\n",
            "{\"id\":1,\"enqueue_time_ms\":5,\"handle_time_ms\":1000,\"queue\":\"q\"}\n",
            "{\"id\":3,\"enqueue_time_ms\":5,\"handle_time_ms\":1000,\"queue\":\"nowhere\"}\n",
        ),
    )
    .unwrap();
    fs::write(
        dir.path().join("scenario.toml"),
        "horizon_ms = 1000\n[inputs]\njobs = \"jobs.ndjson\"\n[[queues]]\nid = \"q\"\n",
    )
    .unwrap();
    let (_, diags) = Scenario::read(&dir.path().join("scenario.toml")).unwrap();
    let text: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
    assert!(
        text.iter()
            .any(|d| d.contains("job 2") && d.contains("handle_time_ms")),
        "{text:?}"
    );
    assert!(text.iter().any(|d| d.contains("line 3")), "{text:?}");
    assert!(
        text.iter().any(|d| d.contains("duplicate id on line 4")),
        "{text:?}"
    );
    assert!(
        text.iter()
            .any(|d| d.contains("job 3") && d.contains("nowhere")),
        "{text:?}"
    );
    match Scenario::load(&dir.path().join("scenario.toml")) {
        Err(Error::Invalid(d)) => assert_eq!(d.len(), diags.len()),
        other => panic!("expected Invalid, got {other:?}"),
    }
}

#[test]
fn missing_inputs_and_unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("scenario.toml");
    fs::write(
        &p,
        "horizon_ms = 1000\n[inputs]\njobs = \"absent.ndjson\"\n",
    )
    .unwrap();
    let e = Scenario::load(&p).unwrap_err();
    assert!(e.is_config_error(), "{e}");
    fs::write(&p, "horizon_ms = 1000\nhorizon_hours = 3\n").unwrap();
    let e = Scenario::load(&p).unwrap_err();
    assert!(
        e.is_config_error() && e.to_string().contains("horizon_hours"),
        "{e}"
    );
}
