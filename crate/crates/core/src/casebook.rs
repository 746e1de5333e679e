//! Ready-made scenarios for the standard planning questions. Each builder
//! returns a self-contained [`Scenario`]; the examples and the acceptance
//! suite run these, and [`Scenario::write_to`] turns any of them into files.

use std::collections::BTreeMap;

use crate::allocation::{AllocationConfig, GroupConfig};
use crate::domain::{Job, Severity, SimTime, SlaPolicy, Source};
use crate::policy::{Feature, PriorityFormula};
use crate::reaper::ReaperCriteria;
use crate::scenario::{QueueConfig, ReviewerPool, Scenario, ScenarioConfig, SegmentConfig};
use crate::workload::{Arrival, Dist, HandleTime, SyntheticSpec};

pub const SECOND: u64 = 1_000;
pub const MINUTE: u64 = 60 * SECOND;
pub const HOUR: u64 = 60 * MINUTE;

fn pool(first_id: u64, count: u64, location: &str, skills: &[&str]) -> ReviewerPool {
    ReviewerPool {
        first_id,
        count,
        location: location.into(),
        skills: skills.iter().map(|s| s.to_string()).collect(),
        shifts: Vec::new(),
        always_on: true,
    }
}

fn queue(id: &str, skill: &str, formula: PriorityFormula) -> QueueConfig {
    let mut q = QueueConfig::new(id);
    q.required_skills = vec![skill.into()];
    q.formula = formula;
    q
}

fn poisson(
    queue: &str,
    rate_per_s: f64,
    start_ms: u64,
    duration_ms: u64,
    handle: HandleTime,
) -> SyntheticSpec {
    let mut s = SyntheticSpec::new(Arrival::Poisson { rate_per_s }, handle);
    s.queue = Some(queue.into());
    s.start_ms = start_ms;
    s.duration_ms = Some(duration_ms);
    s
}

// ---- capacity planning ----

/// Knobs for the reviewer-move question: a site staffed for queue A is asked
/// to absorb queue B as well.
#[derive(Debug, Clone)]
pub struct CapacityCase {
    pub site_reviewers: u64,
    pub days: u64,
    pub mean_handle_s: f64,
    /// Offered load of A on the site, as a fraction of its capacity.
    pub load_a: f64,
    /// Extra offered load B brings if moved.
    pub load_b: f64,
    pub seed: u64,
}

impl Default for CapacityCase {
    fn default() -> Self {
        Self {
            site_reviewers: 10,
            days: 7,
            mean_handle_s: 120.0,
            load_a: 0.97,
            load_b: 0.05,
            seed: 11,
        }
    }
}

impl CapacityCase {
    /// Ids of the reviewers at the site being re-planned.
    pub fn site_ids(&self) -> Vec<crate::domain::ReviewerId> {
        (1..=self.site_reviewers)
            .map(crate::domain::ReviewerId)
            .collect()
    }

    /// `moved = false` keeps B with its own team elsewhere; `true` gives B to the site.
    pub fn scenario(&self, moved: bool) -> Scenario {
        let horizon = self.days * 24 * HOUR;
        let mut cfg = ScenarioConfig::new(
            SimTime(horizon),
            vec![
                queue("queue_a", "a", PriorityFormula::Fifo),
                queue("queue_b", "b", PriorityFormula::Fifo),
            ],
        );
        cfg.seed = self.seed;
        let capacity_per_s = self.site_reviewers as f64 / self.mean_handle_s;
        let handle = HandleTime::Exponential {
            rate_per_s: 1.0 / self.mean_handle_s,
        };
        cfg.synthetic.push(poisson(
            "queue_a",
            self.load_a * capacity_per_s,
            0,
            horizon,
            handle.clone(),
        ));
        let mut b = poisson("queue_b", self.load_b * capacity_per_s, 0, horizon, handle);
        b.seed_offset = 1;
        cfg.synthetic.push(b);
        if moved {
            cfg.reviewer_pools
                .push(pool(1, self.site_reviewers, "site", &["a", "b"]));
        } else {
            cfg.reviewer_pools
                .push(pool(1, self.site_reviewers, "site", &["a"]));
            cfg.reviewer_pools.push(pool(1_000, 2, "elsewhere", &["b"]));
        }
        Scenario::new(cfg, Vec::new(), Vec::new())
    }
}

// ---- escalation vs SLA ----

/// Two-class single-queue workload with a daily overload: days run at
/// `day_load` of capacity and nights at `night_load`.
#[derive(Debug, Clone)]
pub struct EscalationCase {
    pub reviewers: u64,
    pub mean_handle_s: f64,
    pub days: u64,
    pub day_load: f64,
    pub night_load: f64,
    pub escalated_share: f64,
    pub sla_window_ms: u64,
    pub reorder_period_ms: u64,
}

impl Default for EscalationCase {
    fn default() -> Self {
        Self {
            reviewers: 20,
            mean_handle_s: 300.0,
            days: 2,
            day_load: 1.3,
            night_load: 0.4,
            escalated_share: 0.2,
            sla_window_ms: 4 * HOUR,
            reorder_period_ms: 5 * MINUTE,
        }
    }
}

impl EscalationCase {
    pub fn scenario(&self, alpha: f64, seed: u64) -> Scenario {
        let horizon = (self.days * 24 + 12) * HOUR;
        let mut q = queue("main", "review", PriorityFormula::Escalation { alpha });
        q.sla_window_ms = Some(self.sla_window_ms);
        q.reorder_period_ms = Some(self.reorder_period_ms);
        let mut cfg = ScenarioConfig::new(SimTime(horizon), vec![q]);
        cfg.seed = seed;
        cfg.sla.push(SlaPolicy {
            bound_ms: self.sla_window_ms,
            queues: Vec::new(),
        });
        cfg.reviewer_pools
            .push(pool(1, self.reviewers, "", &["review"]));
        let capacity = self.reviewers as f64 / self.mean_handle_s;
        let handle = HandleTime::Exponential {
            rate_per_s: 1.0 / self.mean_handle_s,
        };
        let mut k = 0;
        for day in 0..self.days {
            for (half, load) in [(0, self.day_load), (1, self.night_load)] {
                let start = day * 24 * HOUR + half * 12 * HOUR;
                for (share, p) in [
                    (
                        self.escalated_share,
                        Dist::Uniform {
                            low: 0.6,
                            high: 1.0,
                        },
                    ),
                    (
                        1.0 - self.escalated_share,
                        Dist::Uniform {
                            low: 0.0,
                            high: 0.4,
                        },
                    ),
                ] {
                    let mut s = poisson(
                        "main",
                        load * capacity * share,
                        start,
                        12 * HOUR,
                        handle.clone(),
                    );
                    s.p_escalate = p;
                    s.seed_offset = k;
                    k += 1;
                    cfg.synthetic.push(s);
                }
            }
        }
        Scenario::new(cfg, Vec::new(), Vec::new())
    }
}

// ---- virality / topic coverage ----

/// A backlog present at time zero, a share of which is on a watched topic.
/// Reviewers get through `reviewers * horizon / handle` jobs before the horizon.
#[derive(Debug, Clone)]
pub struct ViralityCase {
    pub backlog: u64,
    pub topic_share: f64,
    pub reviewers: u64,
    pub handle_ms: u64,
    pub horizon_ms: u64,
    pub seed: u64,
}

impl Default for ViralityCase {
    fn default() -> Self {
        Self {
            backlog: 2_000,
            topic_share: 0.3,
            reviewers: 5,
            handle_ms: MINUTE,
            horizon_ms: 30 * MINUTE,
            seed: 5,
        }
    }
}

impl ViralityCase {
    pub fn scenario(&self, formula: PriorityFormula) -> Scenario {
        let mut cfg = ScenarioConfig::new(
            SimTime(self.horizon_ms),
            vec![queue("feed", "review", formula)],
        );
        cfg.seed = self.seed;
        cfg.reviewer_pools
            .push(pool(1, self.reviewers, "", &["review"]));
        let topic = (self.backlog as f64 * self.topic_share).round() as u64;
        for (k, (count, p)) in [(topic, 1.0), (self.backlog - topic, 0.0)]
            .into_iter()
            .enumerate()
        {
            let mut s =
                SyntheticSpec::new(Arrival::Burst, HandleTime::Constant { ms: self.handle_ms });
            s.queue = Some("feed".into());
            s.count = Some(count);
            s.p_violating = 0.5;
            s.views = Dist::LogNormal {
                mu: 5.0,
                sigma: 1.5,
            };
            s.topic_scores[0] = Dist::Fixed { value: p };
            s.seed_offset = k as u64;
            cfg.synthetic.push(s);
        }
        Scenario::new(cfg, Vec::new(), Vec::new())
    }

    pub fn virality(&self, w: f64) -> Scenario {
        self.scenario(PriorityFormula::Virality {
            weights: [w, 0.0, 0.0],
        })
    }

    /// Ranking by predicted views alone.
    pub fn views_only(&self) -> Scenario {
        let coeffs = BTreeMap::from([(Feature::PredictedViews, 1.0)]);
        self.scenario(PriorityFormula::Linear { coeffs })
    }
}

// ---- inter-queue allocation ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Segments served strictly in rank order.
    StackRank,
    /// 60:40 between the high-value segments and the low-value one.
    Split,
}

/// Three ranked segments of 17 queues each. Segments A (rank 1) and C (rank 3)
/// hold high-value work arriving over time; B (rank 2) holds a large backlog
/// of low-value work.
#[derive(Debug, Clone)]
pub struct CrossoverCase {
    pub queues_per_segment: usize,
    pub reviewers: u64,
    pub horizon_ms: u64,
    pub handle_ms: u64,
    /// Arrival rate of A and of C, each as a fraction of base capacity.
    pub high_value_load: f64,
    /// B backlog at time zero, as a multiple of base capacity over the horizon.
    pub backlog_factor: f64,
    pub seed: u64,
}

impl Default for CrossoverCase {
    fn default() -> Self {
        Self {
            queues_per_segment: 17,
            reviewers: 40,
            horizon_ms: 2 * HOUR,
            handle_ms: 2 * MINUTE,
            high_value_load: 0.4,
            backlog_factor: 2.0,
            seed: 3,
        }
    }
}

impl CrossoverCase {
    pub fn queue_ids(&self, segment: &str) -> Vec<String> {
        (1..=self.queues_per_segment)
            .map(|i| format!("{segment}{i:02}"))
            .collect()
    }

    /// Jobs and reviewers shared by every strategy and supply level.
    pub fn base(&self) -> Scenario {
        let mut queues = Vec::new();
        let mut segments = Vec::new();
        for (rank, seg) in ["a", "b", "c"].into_iter().enumerate() {
            let ids = self.queue_ids(seg);
            for id in &ids {
                queues.push(queue(id, "review", PriorityFormula::Fifo));
            }
            segments.push(SegmentConfig {
                id: seg.into(),
                rank: Some(rank as i64 + 1),
                queues: ids,
                daily_cap_ms: None,
            });
        }
        let mut cfg = ScenarioConfig::new(SimTime(self.horizon_ms), queues);
        cfg.seed = self.seed;
        cfg.segments = segments;
        cfg.reviewer_pools
            .push(pool(1, self.reviewers, "", &["review"]));

        let capacity_jobs = self.reviewers as f64 * self.horizon_ms as f64 / self.handle_ms as f64;
        let mut jobs = Vec::new();
        let mut rng = crate::reaper::splitmix64(self.seed);
        let mut draw = move || {
            rng = crate::reaper::splitmix64(rng);
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut id = 0;
        let mut push = |jobs: &mut Vec<Job>, seg: &str, t: u64, high: bool, k: usize| {
            let mut j = Job::new(id, SimTime(t), self.handle_ms);
            id += 1;
            j.initial_queue = Some(format!("{seg}{:02}", k % self.queues_per_segment + 1));
            j.true_label = crate::domain::Label::Violating;
            let (sev, views) = if high {
                (Severity::VeryHigh, 1_000)
            } else {
                (Severity::Low, 10)
            };
            j.severity = sev;
            j.predicted_severity = Some(sev);
            j.predicted_view_trajectory =
                crate::domain::ContentViewTrajectory::constant(SimTime(t), views);
            j.content_view_trajectory = j.predicted_view_trajectory.clone();
            jobs.push(j);
        };
        let backlog = (self.backlog_factor * capacity_jobs).round() as usize;
        for k in 0..backlog {
            push(&mut jobs, "b", 0, false, k);
        }
        let per_segment = (self.high_value_load * capacity_jobs).round() as usize;
        for seg in ["a", "c"] {
            for k in 0..per_segment {
                let t = (draw() * self.horizon_ms as f64) as u64;
                push(&mut jobs, seg, t, true, k);
            }
        }
        jobs.sort_by_key(|j| (j.enqueue_time, j.id));
        Scenario::new(cfg, jobs, Vec::new())
    }

    pub fn with(base: &Scenario, strategy: Strategy, supply: f64) -> Scenario {
        let mut s = base.clone();
        s.config.resample.supply = supply;
        s.config.allocation = match strategy {
            Strategy::StackRank => AllocationConfig::StackRank,
            Strategy::Split => AllocationConfig::Percentage {
                groups: vec![
                    GroupConfig {
                        segments: vec!["a".into(), "c".into()],
                        queues: Vec::new(),
                        weight: 60.0,
                        daily_weights: Vec::new(),
                    },
                    GroupConfig {
                        segments: vec!["b".into()],
                        queues: Vec::new(),
                        weight: 40.0,
                        daily_weights: Vec::new(),
                    },
                ],
            },
        };
        s
    }
}

// ---- reaper sampling ----

/// A day of machine-decided proactive content, half of it violating, and one
/// reaper block with permissive criteria feeding a validation queue.
#[derive(Debug, Clone)]
pub struct ReaperCase {
    pub candidates: u64,
    pub scan_period_ms: u64,
    pub seed: u64,
}

impl Default for ReaperCase {
    fn default() -> Self {
        Self {
            candidates: 10_000,
            scan_period_ms: HOUR,
            seed: 17,
        }
    }
}

impl ReaperCase {
    pub fn scenario(&self, sample_fraction: f64) -> Scenario {
        let day = 24 * HOUR;
        let mut cfg = ScenarioConfig::new(
            SimTime(day + HOUR),
            vec![queue("validation", "review", PriorityFormula::Fifo)],
        );
        cfg.seed = self.seed;
        cfg.reviewer_pools.push(pool(1, 5, "", &["review"]));
        let mut s = SyntheticSpec::new(
            Arrival::Poisson {
                rate_per_s: self.candidates as f64 / (day as f64 / 1000.0),
            },
            HandleTime::Constant { ms: 30 * SECOND },
        );
        s.count = Some(self.candidates);
        s.source = Source::ProactiveClassifier;
        s.p_violating = 0.5;
        s.severity = Severity::High;
        s.classifier_score = Dist::Uniform {
            low: 0.0,
            high: 0.9,
        };
        s.views = Dist::Fixed { value: 100.0 };
        cfg.synthetic.push(s);
        cfg.reaper.push(ReaperCriteria {
            scan_period_ms: self.scan_period_ms,
            first_scan_ms: self.scan_period_ms,
            content_types: Vec::new(),
            min_views: 0,
            score_threshold: 1.0,
            sample_fraction,
            target_queue: "validation".into(),
            market: None,
        });
        Scenario::new(cfg, Vec::new(), Vec::new())
    }
}

// ---- textbook queues ----

/// One always-on reviewer, one FIFO queue, Poisson arrivals and exponential
/// handle times. The horizon leaves room for the backlog to clear.
pub fn mm1(lambda_per_s: f64, mu_per_s: f64, jobs: u64, seed: u64) -> Scenario {
    let span_s = jobs as f64 / lambda_per_s;
    let horizon = ((span_s * 1.2 + 3600.0) * 1000.0) as u64;
    let mut cfg = ScenarioConfig::new(
        SimTime(horizon),
        vec![queue("q", "review", PriorityFormula::Fifo)],
    );
    cfg.seed = seed;
    cfg.reviewer_pools.push(pool(1, 1, "", &["review"]));
    let mut s = SyntheticSpec::new(
        Arrival::Poisson {
            rate_per_s: lambda_per_s,
        },
        HandleTime::Exponential {
            rate_per_s: mu_per_s,
        },
    );
    s.queue = Some("q".into());
    s.count = Some(jobs);
    cfg.synthetic.push(s);
    Scenario::new(cfg, Vec::new(), Vec::new())
}

/// All jobs waiting at time zero for a single reviewer, ordered by weight per
/// second of handle time.
pub fn single_machine(weights: &[f64], handle_ms: &[u64]) -> Scenario {
    let total: u64 = handle_ms.iter().sum();
    let formula = PriorityFormula::Smith {
        severity_weights: Default::default(),
    };
    let mut cfg = ScenarioConfig::new(SimTime(total + 1), vec![queue("q", "review", formula)]);
    cfg.reviewer_pools.push(pool(1, 1, "", &["review"]));
    let jobs = weights
        .iter()
        .zip(handle_ms)
        .enumerate()
        .map(|(i, (&w, &h))| {
            let mut j = Job::new(i as u64, SimTime::ZERO, h);
            j.initial_queue = Some("q".into());
            j.weight = Some(w);
            j
        })
        .collect();
    Scenario::new(cfg, jobs, Vec::new())
}
