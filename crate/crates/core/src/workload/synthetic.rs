//! Synthetic job generation for volume injections and controlled experiments.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use super::resample::HOUR_MS;
use crate::domain::{ContentType, ContentViewTrajectory, Job, Label, Severity, SimTime, Source};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arrival {
    Poisson {
        rate_per_s: f64,
    },
    /// Arrival hours are drawn from the base trace, uniformly jittered within the hour.
    ReplayJittered,
    /// Every job arrives at `start_ms`.
    Burst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HandleTime {
    Exponential {
        rate_per_s: f64,
    },
    Constant {
        ms: u64,
    },
    /// Draws uniformly from `values_ms`; when empty, from `file` (one value per
    /// line, resolved by the scenario loader) or else the base trace.
    Empirical {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        values_ms: Vec<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dist {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { mean: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl Default for Dist {
    fn default() -> Self {
        Dist::Fixed { value: 0.0 }
    }
}

impl Dist {
    fn check(&self, name: &str) -> std::result::Result<(), String> {
        let ok = match *self {
            Dist::Fixed { value } => value.is_finite(),
            Dist::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Dist::Exponential { mean } => mean.is_finite() && mean > 0.0,
            Dist::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("{name}: invalid distribution {self:?}"))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Fixed { value } => value,
            Dist::Uniform { low, high } if low == high => low,
            Dist::Uniform { low, high } => rng.random_range(low..high),
            Dist::Exponential { mean } => Exp::new(1.0 / mean).expect("checked").sample(rng),
            Dist::LogNormal { mu, sigma } => {
                LogNormal::new(mu, sigma).expect("checked").sample(rng)
            }
        }
    }
}

/// Recipe for a batch of synthetic jobs. Exactly one of `count`,
/// `duration_ms` and `target_hours` sets the volume; `target_hours` is review
/// effort and is divided by the mean handle time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub arrival: Arrival,
    pub handle_time: HandleTime,
    #[serde(default)]
    pub start_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_hours: Option<f64>,

    /// Initial queue; omitted means automatically decided.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue: Option<String>,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub content_type: ContentType,
    #[serde(default)]
    pub market: String,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub violation_type: String,
    #[serde(default)]
    pub p_violating: f64,
    #[serde(default)]
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_severity: Option<Severity>,
    #[serde(default)]
    pub classifier_score: Dist,
    #[serde(default)]
    pub p_escalate: Dist,
    #[serde(default)]
    pub topic_scores: [Dist; 3],
    /// Views, held constant from arrival; also used as the prediction.
    #[serde(default)]
    pub views: Dist,
    #[serde(default)]
    pub pauses: u32,
    #[serde(default)]
    pub seed_offset: u64,
}

impl SyntheticSpec {
    pub fn new(arrival: Arrival, handle_time: HandleTime) -> Self {
        Self {
            arrival,
            handle_time,
            start_ms: 0,
            count: None,
            duration_ms: None,
            target_hours: None,
            queue: None,
            source: Source::default(),
            content_type: ContentType::default(),
            market: String::new(),
            language: String::new(),
            violation_type: String::new(),
            p_violating: 0.0,
            severity: Severity::default(),
            predicted_severity: None,
            classifier_score: Dist::default(),
            p_escalate: Dist::default(),
            topic_scores: Default::default(),
            views: Dist::default(),
            pauses: 0,
            seed_offset: 0,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let volume = [
            self.count.is_some(),
            self.duration_ms.is_some(),
            self.target_hours.is_some(),
        ];
        if volume.iter().filter(|&&b| b).count() != 1 {
            return Err("set exactly one of count, duration_ms, target_hours".into());
        }
        match self.arrival {
            Arrival::Poisson { rate_per_s } if !(rate_per_s.is_finite() && rate_per_s > 0.0) => {
                return Err(format!("arrival rate must be positive, got {rate_per_s}"));
            }
            Arrival::ReplayJittered | Arrival::Burst if self.duration_ms.is_some() => {
                return Err("duration_ms needs poisson arrivals".into());
            }
            _ => {}
        }
        match &self.handle_time {
            HandleTime::Exponential { rate_per_s }
                if !(rate_per_s.is_finite() && *rate_per_s > 0.0) =>
            {
                return Err(format!("handle rate must be positive, got {rate_per_s}"));
            }
            HandleTime::Constant { ms: 0 } => {
                return Err("constant handle time must be positive".into())
            }
            HandleTime::Empirical { values_ms, .. } if values_ms.contains(&0) => {
                return Err("empirical handle times must be positive".into());
            }
            _ => {}
        }
        if let Some(h) = self.target_hours {
            if !(h.is_finite() && h > 0.0) {
                return Err(format!("target_hours must be positive, got {h}"));
            }
        }
        if !(0.0..=1.0).contains(&self.p_violating) {
            return Err(format!(
                "p_violating {} is outside [0, 1]",
                self.p_violating
            ));
        }
        self.classifier_score.check("classifier_score")?;
        self.p_escalate.check("p_escalate")?;
        for (i, d) in self.topic_scores.iter().enumerate() {
            d.check(&format!("topic_scores[{i}]"))?;
        }
        self.views.check("views")
    }
}

/// Mean handle time in seconds implied by a handle-time model.
pub fn mean_handle_secs(h: &HandleTime, base: &[Job]) -> Option<f64> {
    match h {
        HandleTime::Exponential { rate_per_s } => Some(1.0 / rate_per_s),
        HandleTime::Constant { ms } => Some(*ms as f64 / 1000.0),
        HandleTime::Empirical { values_ms, .. } => {
            let vals: Vec<u64> = if values_ms.is_empty() {
                base.iter().map(|j| j.handle_time_ms).collect()
            } else {
                values_ms.clone()
            };
            (!vals.is_empty()).then(|| vals.iter().sum::<u64>() as f64 / vals.len() as f64 / 1000.0)
        }
    }
}

/// Number of jobs that make up `hours` of review effort at `mean_handle_secs` each.
pub fn jobs_for_hours(hours: f64, mean_handle_secs: f64) -> u64 {
    (hours * 3600.0 / mean_handle_secs).round() as u64
}

/// Generates jobs with ids starting at `first_id`, sorted by (arrival, id).
/// `base` feeds replay-jittered arrivals and empirical handle times without values.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    seed: u64,
    first_id: u64,
    base: &[Job],
) -> Result<Vec<Job>> {
    spec.validate().map_err(Error::config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let handle_pool: Vec<u64> = match &spec.handle_time {
        HandleTime::Empirical { values_ms, .. } if values_ms.is_empty() => {
            base.iter().map(|j| j.handle_time_ms).collect()
        }
        HandleTime::Empirical { values_ms, .. } => values_ms.clone(),
        _ => Vec::new(),
    };
    if matches!(spec.handle_time, HandleTime::Empirical { .. }) && handle_pool.is_empty() {
        return Err(Error::config(
            "empirical handle times need values or a base trace",
        ));
    }
    if spec.arrival == Arrival::ReplayJittered && base.is_empty() {
        return Err(Error::config("replay_jittered arrivals need a base trace"));
    }

    let count = match (spec.count, spec.target_hours) {
        (Some(n), _) => Some(n),
        (None, Some(h)) => {
            let mean = mean_handle_secs(&spec.handle_time, base)
                .ok_or_else(|| Error::config("cannot size target_hours without handle times"))?;
            Some(jobs_for_hours(h, mean))
        }
        (None, None) => None,
    };
    let end = spec.duration_ms.map(|d| spec.start_ms + d);

    let mut jobs = Vec::new();
    let mut clock = spec.start_ms as f64;
    let mut id = first_id;
    loop {
        if count.is_some_and(|n| jobs.len() as u64 >= n) {
            break;
        }
        let t = match spec.arrival {
            Arrival::Poisson { rate_per_s } => {
                clock += Exp::new(rate_per_s).expect("validated").sample(&mut rng) * 1000.0;
                clock.floor() as u64
            }
            Arrival::Burst => spec.start_ms,
            Arrival::ReplayJittered => {
                let src = &base[rng.random_range(0..base.len())];
                src.enqueue_time.0 / HOUR_MS * HOUR_MS + rng.random_range(0..HOUR_MS)
            }
        };
        if end.is_some_and(|e| t >= e) {
            break;
        }
        let handle_ms = match &spec.handle_time {
            HandleTime::Exponential { rate_per_s } => {
                let s = Exp::new(*rate_per_s).expect("validated").sample(&mut rng);
                ((s * 1000.0).round() as u64).max(1)
            }
            HandleTime::Constant { ms } => *ms,
            HandleTime::Empirical { .. } => handle_pool[rng.random_range(0..handle_pool.len())],
        };
        let mut j = Job::new(id, SimTime(t), handle_ms);
        id += 1;
        j.initial_queue = spec.queue.clone();
        j.source = spec.source;
        j.content_type = spec.content_type;
        j.market = spec.market.clone();
        j.language = spec.language.clone();
        j.violation_type = spec.violation_type.clone();
        j.true_label = if spec.p_violating > 0.0 && rng.random::<f64>() < spec.p_violating {
            Label::Violating
        } else {
            Label::Benign
        };
        j.severity = spec.severity;
        j.predicted_severity = spec.predicted_severity;
        j.classifier_score = spec.classifier_score.sample(&mut rng).clamp(0.0, 1.0);
        j.p_escalate = spec.p_escalate.sample(&mut rng).clamp(0.0, 1.0);
        for i in 0..3 {
            j.topic_scores[i] = spec.topic_scores[i].sample(&mut rng).clamp(0.0, 1.0);
        }
        let views = spec.views.sample(&mut rng).max(0.0).round() as u64;
        j.content_view_trajectory = ContentViewTrajectory::constant(SimTime(t), views);
        j.predicted_view_trajectory = j.content_view_trajectory.clone();
        j.pauses = spec.pauses;
        jobs.push(j);
    }
    jobs.sort_by_key(|j| (j.enqueue_time, j.id));
    Ok(jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_hundred_hours_at_two_minutes() {
        let mut spec = SyntheticSpec::new(Arrival::Burst, HandleTime::Constant { ms: 120_000 });
        spec.target_hours = Some(200.0);
        let jobs = generate_synthetic(&spec, 1, 0, &[]).unwrap();
        assert_eq!(jobs.len(), 6000);
        assert_eq!(jobs_for_hours(200.0, 120.0), 6000);
    }

    #[test]
    fn volume_must_be_unique() {
        let mut spec = SyntheticSpec::new(Arrival::Burst, HandleTime::Constant { ms: 1 });
        assert!(spec.validate().is_err());
        spec.count = Some(1);
        spec.duration_ms = Some(1);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rates_must_be_positive() {
        let mut spec = SyntheticSpec::new(
            Arrival::Poisson { rate_per_s: 0.0 },
            HandleTime::Constant { ms: 1 },
        );
        spec.count = Some(1);
        assert!(spec.validate().is_err());
        spec.arrival = Arrival::Poisson { rate_per_s: 1.0 };
        spec.handle_time = HandleTime::Exponential { rate_per_s: -1.0 };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn deterministic_and_sorted() {
        let mut spec = SyntheticSpec::new(
            Arrival::Poisson { rate_per_s: 2.0 },
            HandleTime::Exponential { rate_per_s: 0.1 },
        );
        spec.count = Some(500);
        spec.p_violating = 0.3;
        spec.views = Dist::LogNormal {
            mu: 3.0,
            sigma: 1.0,
        };
        let a = generate_synthetic(&spec, 9, 100, &[]).unwrap();
        assert_eq!(a, generate_synthetic(&spec, 9, 100, &[]).unwrap());
        assert_ne!(a, generate_synthetic(&spec, 10, 100, &[]).unwrap());
        assert_eq!(a[0].id.0, 100);
        assert!(a.windows(2).all(|w| w[0].enqueue_time <= w[1].enqueue_time));
    }

    #[test]
    fn empirical_uses_given_values() {
        let mut spec = SyntheticSpec::new(
            Arrival::Burst,
            HandleTime::Empirical {
                values_ms: vec![5, 7],
                file: None,
            },
        );
        spec.count = Some(200);
        let jobs = generate_synthetic(&spec, 2, 0, &[]).unwrap();
        assert!(jobs
            .iter()
            .all(|j| j.handle_time_ms == 5 || j.handle_time_ms == 7));
        assert!(jobs.iter().any(|j| j.handle_time_ms == 5));
        assert!(jobs.iter().any(|j| j.handle_time_ms == 7));
    }
}
