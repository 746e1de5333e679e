//! Demand and supply resampling. Thinning keeps each entity independently with
//! probability `factor`; growth keeps everything and adds
//! `floor(factor - 1) + Bernoulli(frac(factor))` replicas per entity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{Job, JobId, Reviewer, ReviewerId, SimTime};
use crate::error::{Error, Result};

pub const HOUR_MS: u64 = 3_600_000;

fn check_factor(factor: f64) -> Result<()> {
    if factor.is_finite() && factor > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "resampling factor must be positive, got {factor}"
        )))
    }
}

/// How many copies of one entity survive, original included.
fn copies<R: Rng>(factor: f64, rng: &mut R) -> u64 {
    if factor == 1.0 {
        1
    } else if factor < 1.0 {
        u64::from(rng.random::<f64>() < factor)
    } else {
        let extra = factor - 1.0;
        1 + extra.floor() as u64 + u64::from(rng.random::<f64>() < extra.fract())
    }
}

/// Resamples a job trace. Replicas get fresh ids above the current maximum,
/// an arrival drawn uniformly within the source job's hour, view trajectories
/// shifted by the same offset, and no recorded trajectory.
pub fn resample_demand(jobs: &[Job], factor: f64, seed: u64) -> Result<Vec<Job>> {
    check_factor(factor)?;
    let mut sorted: Vec<&Job> = jobs.iter().collect();
    sorted.sort_by_key(|j| (j.enqueue_time, j.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next_id = jobs.iter().map(|j| j.id.0 + 1).max().unwrap_or(0);
    let mut out = Vec::with_capacity((jobs.len() as f64 * factor.max(1.0)) as usize + 1);
    for j in sorted {
        let n = copies(factor, &mut rng);
        if n == 0 {
            continue;
        }
        out.push(j.clone());
        let bucket = j.enqueue_time.0 / HOUR_MS * HOUR_MS;
        for _ in 1..n {
            let t = bucket + rng.random_range(0..HOUR_MS);
            let delta = t as i64 - j.enqueue_time.0 as i64;
            let mut r = j.clone();
            r.id = JobId(next_id);
            next_id += 1;
            r.enqueue_time = SimTime(t);
            r.content_view_trajectory = j.content_view_trajectory.shifted(delta);
            r.predicted_view_trajectory = j.predicted_view_trajectory.shifted(delta);
            r.recorded.clear();
            out.push(r);
        }
    }
    out.sort_by_key(|j| (j.enqueue_time, j.id));
    Ok(out)
}

/// Resamples a reviewer pool; replicas copy location, skills and shifts.
pub fn resample_supply(reviewers: &[Reviewer], factor: f64, seed: u64) -> Result<Vec<Reviewer>> {
    check_factor(factor)?;
    let mut sorted: Vec<&Reviewer> = reviewers.iter().collect();
    sorted.sort_by_key(|r| r.id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next_id = reviewers.iter().map(|r| r.id.0 + 1).max().unwrap_or(0);
    let mut out = Vec::new();
    for r in sorted {
        let n = copies(factor, &mut rng);
        for k in 0..n {
            let mut c = r.clone();
            if k > 0 {
                c.id = ReviewerId(next_id);
                next_id += 1;
            }
            out.push(c);
        }
    }
    out.sort_by_key(|r| r.id);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shift;

    fn trace(n: u64) -> Vec<Job> {
        (0..n)
            .map(|i| Job::new(i, SimTime(i * 7_919 % (24 * HOUR_MS)), 1_000 + i % 50))
            .collect()
    }

    #[test]
    fn factor_one_is_identity() {
        let jobs = trace(500);
        let mut expect = jobs.clone();
        expect.sort_by_key(|j| (j.enqueue_time, j.id));
        assert_eq!(resample_demand(&jobs, 1.0, 3).unwrap(), expect);
        let revs: Vec<_> = (0..5).map(Reviewer::new).collect();
        assert_eq!(resample_supply(&revs, 1.0, 3).unwrap(), revs);
    }

    #[test]
    fn non_positive_factor_rejected() {
        assert!(resample_supply(&[], 0.0, 1).is_err());
        assert!(resample_demand(&[], -1.0, 1).is_err());
        assert!(resample_demand(&[], f64::NAN, 1).is_err());
    }

    #[test]
    fn replicas_stay_in_source_hour_and_keep_metadata() {
        let jobs = trace(300);
        let out = resample_demand(&jobs, 2.5, 8).unwrap();
        let ids: std::collections::HashSet<_> = out.iter().map(|j| j.id).collect();
        assert_eq!(ids.len(), out.len());
        for r in out.iter().filter(|j| j.id.0 >= 300) {
            // replica metadata is the source's; the source is findable by handle time here
            assert!(r.handle_time_ms >= 1_000 && r.handle_time_ms < 1_050);
        }
        assert!(out
            .windows(2)
            .all(|w| (w[0].enqueue_time, w[0].id) <= (w[1].enqueue_time, w[1].id)));
        let count = out.len() as f64;
        assert!((count / 300.0 - 2.5).abs() < 0.2, "{count}");
    }

    #[test]
    fn supply_doubling_doubles_hours() {
        let revs: Vec<_> = (0..10)
            .map(|i| {
                let mut r = Reviewer::new(i);
                r.shifts.push(Shift::new(SimTime(0), SimTime(8 * HOUR_MS)));
                r.skills.insert("en".into());
                r
            })
            .collect();
        let out = resample_supply(&revs, 2.0, 1).unwrap();
        let hours = |rs: &[Reviewer]| rs.iter().map(Reviewer::scheduled_ms).sum::<u64>();
        assert_eq!(hours(&out), 2 * hours(&revs));
        assert!(out.iter().all(|r| r.skills.contains("en")));
    }

    #[test]
    fn deterministic() {
        let jobs = trace(100);
        assert_eq!(
            resample_demand(&jobs, 0.5, 42).unwrap(),
            resample_demand(&jobs, 0.5, 42).unwrap()
        );
    }
}
