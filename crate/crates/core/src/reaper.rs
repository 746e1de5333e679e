//! Periodic sampling of machine-decisioned content into human validation queues.

use serde::{Deserialize, Serialize};

use crate::domain::{ContentType, Job, SimTime, Source};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaperCriteria {
    pub scan_period_ms: u64,
    #[serde(default)]
    pub first_scan_ms: u64,
    /// Empty means every content type.
    #[serde(default)]
    pub content_types: Vec<ContentType>,
    #[serde(default)]
    pub min_views: u64,
    pub score_threshold: f64,
    pub sample_fraction: f64,
    pub target_queue: String,
    /// Restricts the block to one market.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<String>,
}

impl ReaperCriteria {
    fn type_matches(&self, t: ContentType) -> bool {
        self.content_types.is_empty() || self.content_types.contains(&t)
    }

    fn market_matches(&self, m: &str) -> bool {
        self.market.as_deref().is_none_or(|x| x == m)
    }

    /// Conjuncts that do not change over time.
    pub fn statically_admits(&self, candidate: &Job, seed: u64) -> bool {
        self.type_matches(candidate.content_type)
            && self.market_matches(&candidate.market)
            && candidate.classifier_score < self.score_threshold
            && sample_draw(candidate.id.0, seed) < self.sample_fraction
    }
}

/// The reaper draws from machine-decisioned proactive content only.
pub fn is_candidate(job: &Job) -> bool {
    job.source == Source::ProactiveClassifier && job.initial_queue.is_none()
}

pub fn should_enqueue(candidate: &Job, t: SimTime, criteria: &ReaperCriteria, seed: u64) -> bool {
    criteria.statically_admits(candidate, seed)
        && candidate.content_view_trajectory.views_at(t) >= criteria.min_views
}

/// Fixed uniform draw in [0, 1) per (candidate, seed), independent of run order.
pub fn sample_draw(candidate_id: u64, seed: u64) -> f64 {
    let h = splitmix64(splitmix64(seed ^ 0x5EED_0F2E_A9E4) ^ candidate_id);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scan state for one criteria block. Candidates become visible in creation
/// order; those failing a static conjunct are dropped for good, the rest wait
/// until their views reach `min_views`.
#[derive(Debug, Clone)]
pub struct ReaperProcess {
    pub criteria: ReaperCriteria,
    pub target: usize,
    /// (creation time, job slot), sorted.
    pool: Vec<(SimTime, usize)>,
    cursor: usize,
    waiting: Vec<usize>,
}

impl ReaperProcess {
    pub fn new(criteria: ReaperCriteria, target: usize, mut pool: Vec<(SimTime, usize)>) -> Self {
        pool.sort();
        Self {
            criteria,
            target,
            pool,
            cursor: 0,
            waiting: Vec::new(),
        }
    }

    /// Slots to validate at time `t`, in ascending job-id order. `taken`
    /// reports candidates already validated by any block.
    pub fn scan(
        &mut self,
        t: SimTime,
        jobs: &[Job],
        seed: u64,
        taken: impl Fn(usize) -> bool,
    ) -> Vec<usize> {
        while self.cursor < self.pool.len() && self.pool[self.cursor].0 <= t {
            let slot = self.pool[self.cursor].1;
            if self.criteria.statically_admits(&jobs[slot], seed) {
                self.waiting.push(slot);
            }
            self.cursor += 1;
        }
        let mut picked = Vec::new();
        let crit = &self.criteria;
        self.waiting.retain(|&slot| {
            if taken(slot) {
                return false;
            }
            if jobs[slot].content_view_trajectory.views_at(t) >= crit.min_views {
                picked.push(slot);
                false
            } else {
                true
            }
        });
        picked.sort_by_key(|&s| jobs[s].id);
        picked
    }

    pub fn next_scan(&self, t: SimTime) -> SimTime {
        t + self.criteria.scan_period_ms
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ContentViewTrajectory;

    fn criteria(threshold: f64, fraction: f64) -> ReaperCriteria {
        ReaperCriteria {
            scan_period_ms: 60_000,
            first_scan_ms: 0,
            content_types: vec![ContentType::Video],
            min_views: 100,
            score_threshold: threshold,
            sample_fraction: fraction,
            target_queue: "validation".into(),
            market: None,
        }
    }

    fn candidate(id: u64, score: f64, views: u64) -> Job {
        let mut j = Job::new(id, SimTime(0), 1_000);
        j.source = Source::ProactiveClassifier;
        j.content_type = ContentType::Video;
        j.classifier_score = score;
        j.content_view_trajectory = ContentViewTrajectory::constant(SimTime(0), views);
        j
    }

    #[test]
    fn conjuncts() {
        let c = candidate(1, 0.2, 1000);
        assert!(should_enqueue(&c, SimTime(0), &criteria(0.5, 1.0), 7));
        let c = candidate(1, 0.7, 1000);
        assert!(!should_enqueue(&c, SimTime(0), &criteria(0.5, 1.0), 7));
        let c = candidate(1, 0.2, 10);
        assert!(!should_enqueue(&c, SimTime(0), &criteria(0.5, 1.0), 7));
        let mut c = candidate(1, 0.2, 1000);
        c.content_type = ContentType::Text;
        assert!(!should_enqueue(&c, SimTime(0), &criteria(0.5, 1.0), 7));
        for id in 0..1000 {
            let c = candidate(id, 0.2, 1000);
            assert!(!should_enqueue(&c, SimTime(0), &criteria(0.5, 0.0), 7));
        }
    }

    #[test]
    fn draw_is_uniformish_and_stable() {
        let n = 100_000;
        let mean: f64 = (0..n).map(|i| sample_draw(i, 3)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
        assert_eq!(sample_draw(42, 3), sample_draw(42, 3));
        assert_ne!(sample_draw(42, 3), sample_draw(42, 4));
        assert!((0..n).all(|i| (0.0..1.0).contains(&sample_draw(i, 9))));
    }

    #[test]
    fn threshold_and_fraction_monotone() {
        let jobs: Vec<Job> = (0..2000)
            .map(|i| candidate(i, (i % 97) as f64 / 97.0, 50 + (i % 300)))
            .collect();
        let selected = |th: f64, fr: f64| -> Vec<bool> {
            jobs.iter()
                .map(|j| should_enqueue(j, SimTime(0), &criteria(th, fr), 11))
                .collect()
        };
        let pairs = [(0.2, 0.3), (0.5, 0.3), (0.9, 0.3), (0.9, 0.6), (1.0, 1.0)];
        for w in pairs.windows(2) {
            let lo = selected(w[0].0, w[0].1);
            let hi = selected(w[1].0, w[1].1);
            assert!(lo.iter().zip(&hi).all(|(a, b)| !a || *b));
        }
    }

    #[test]
    fn process_waits_for_views_and_never_repeats() {
        let mut slow = candidate(2, 0.1, 0);
        slow.content_view_trajectory =
            ContentViewTrajectory::new(vec![(SimTime(0), 0), (SimTime(120_000), 500)]).unwrap();
        let jobs = vec![candidate(1, 0.1, 1000), slow, candidate(3, 0.9, 1000)];
        let mut p = ReaperProcess::new(
            criteria(0.5, 1.0),
            0,
            vec![(SimTime(0), 0), (SimTime(0), 1), (SimTime(0), 2)],
        );
        let mut taken = [false; 3];
        let got = p.scan(SimTime(0), &jobs, 1, |s| taken[s]);
        assert_eq!(got, vec![0]);
        taken[0] = true;
        assert!(p.scan(SimTime(60_000), &jobs, 1, |s| taken[s]).is_empty());
        assert_eq!(p.scan(SimTime(120_000), &jobs, 1, |s| taken[s]), vec![1]);
        taken[1] = true;
        assert!(p.scan(SimTime(180_000), &jobs, 1, |s| taken[s]).is_empty());
    }
}
