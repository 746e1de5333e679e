//! Intra-queue prioritization: scoring formulas and the ordered container
//! each queue keeps its open jobs in.
//!
//! Higher score is served first; equal scores fall back to ascending job id.
//! Scores are computed on insertion and refreshed only when the queue is
//! re-sorted, so between re-sorts they may be stale.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::domain::{JobId, JobView, Severity, SimTime};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityWeights {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
    pub very_high: f64,
}

impl Default for SeverityWeights {
    fn default() -> Self {
        Self {
            low: 1.0,
            medium: 2.0,
            high: 5.0,
            very_high: 10.0,
        }
    }
}

impl SeverityWeights {
    pub fn weight(&self, s: Severity) -> f64 {
        match s {
            Severity::Low => self.low,
            Severity::Medium => self.medium,
            Severity::High => self.high,
            Severity::VeryHigh => self.very_high,
        }
    }
}

/// Features a linear formula may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    ClassifierScore,
    PEscalate,
    Topic1,
    Topic2,
    Topic3,
    /// Predicted cumulative views at scoring time.
    PredictedViews,
    /// Seconds since first enqueue, at scoring time.
    Wait,
    HandleTime,
}

impl Feature {
    pub fn value(self, job: &JobView<'_>, t: SimTime) -> f64 {
        match self {
            Feature::ClassifierScore => job.classifier_score(),
            Feature::PEscalate => job.p_escalate(),
            Feature::Topic1 => job.topic_scores()[0],
            Feature::Topic2 => job.topic_scores()[1],
            Feature::Topic3 => job.topic_scores()[2],
            Feature::PredictedViews => job.predicted_views_at(t) as f64,
            Feature::Wait => t.since(job.enqueue_time()) as f64 / 1000.0,
            Feature::HandleTime => job.handle_time_ms() as f64 / 1000.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorityFormula {
    #[default]
    Fifo,
    Smith {
        #[serde(default)]
        severity_weights: SeverityWeights,
    },
    Linear {
        coeffs: BTreeMap<Feature, f64>,
    },
    Escalation {
        alpha: f64,
    },
    Virality {
        weights: [f64; 3],
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityScore {
    pub value: f64,
    pub computed_at: SimTime,
}

impl PriorityFormula {
    /// Parameter checks that do not depend on any job.
    pub fn validate(&self, sla_window_ms: Option<u64>) -> std::result::Result<(), String> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(format!("{what} must be finite"))
            }
        };
        match self {
            PriorityFormula::Fifo => Ok(()),
            PriorityFormula::Smith {
                severity_weights: w,
            } => {
                for x in [w.low, w.medium, w.high, w.very_high] {
                    finite(x, "severity weight")?;
                }
                Ok(())
            }
            PriorityFormula::Linear { coeffs } => {
                coeffs.values().try_for_each(|&c| finite(c, "coefficient"))
            }
            PriorityFormula::Escalation { alpha } => {
                finite(*alpha, "alpha")?;
                if *alpha < 0.0 {
                    return Err("alpha must be non-negative".into());
                }
                match sla_window_ms {
                    Some(w) if w > 0 => Ok(()),
                    _ => Err("escalation formula needs a positive sla_window_ms".into()),
                }
            }
            PriorityFormula::Virality { weights } => {
                for &w in weights {
                    finite(w, "virality weight")?;
                    if w < 0.0 {
                        return Err("virality weights must be non-negative".into());
                    }
                }
                Ok(())
            }
        }
    }

    pub fn score(
        &self,
        job: &JobView<'_>,
        t: SimTime,
        sla_window_ms: Option<u64>,
    ) -> Result<PriorityScore> {
        match self {
            PriorityFormula::Fifo => Ok(score_fifo(job, t)),
            PriorityFormula::Smith { severity_weights } => score_smith(job, t, severity_weights),
            PriorityFormula::Linear { coeffs } => Ok(score_linear(job, t, coeffs)),
            PriorityFormula::Escalation { alpha } => score_escalation(
                job,
                t,
                *alpha,
                sla_window_ms.ok_or_else(|| Error::config("escalation needs sla_window_ms"))?,
            ),
            PriorityFormula::Virality { weights } => Ok(score_virality(job, t, *weights)),
        }
    }
}

/// Earlier arrival scores higher.
pub fn score_fifo(job: &JobView<'_>, t: SimTime) -> PriorityScore {
    PriorityScore {
        value: -(job.enqueue_time().0 as f64),
        computed_at: t,
    }
}

/// Weight per second of handle time. The weight is the job's explicit weight
/// if present, else the weight of its predicted severity, else 1.
pub fn score_smith(
    job: &JobView<'_>,
    t: SimTime,
    weights: &SeverityWeights,
) -> Result<PriorityScore> {
    if job.handle_time_ms() == 0 {
        return Err(Error::ZeroHandleTime(job.id()));
    }
    let w = job
        .weight()
        .or_else(|| job.predicted_severity().map(|s| weights.weight(s)))
        .unwrap_or(1.0);
    Ok(PriorityScore {
        value: w / (job.handle_time_ms() as f64 / 1000.0),
        computed_at: t,
    })
}

/// Linear ramp from 0 at enqueue to 1 once the job has waited a full SLA window.
pub fn commit(job: &JobView<'_>, t: SimTime, sla_window_ms: u64) -> f64 {
    (t.since(job.enqueue_time()) as f64 / sla_window_ms as f64).min(1.0)
}

pub fn score_escalation(
    job: &JobView<'_>,
    t: SimTime,
    alpha: f64,
    sla_window_ms: u64,
) -> Result<PriorityScore> {
    if sla_window_ms == 0 {
        return Err(Error::config("sla_window_ms must be positive"));
    }
    Ok(PriorityScore {
        value: job.p_escalate() + alpha * commit(job, t, sla_window_ms),
        computed_at: t,
    })
}

pub fn score_virality(job: &JobView<'_>, t: SimTime, w: [f64; 3]) -> PriorityScore {
    let p = job.topic_scores();
    let boost = (0..3).map(|i| w[i] * p[i]).fold(1.0_f64, f64::max);
    PriorityScore {
        value: job.predicted_views_at(t) as f64 * boost,
        computed_at: t,
    }
}

pub fn score_linear(
    job: &JobView<'_>,
    t: SimTime,
    coeffs: &BTreeMap<Feature, f64>,
) -> PriorityScore {
    PriorityScore {
        value: coeffs.iter().map(|(f, c)| c * f.value(job, t)).sum(),
        computed_at: t,
    }
}

/// Ordering key: score descending, then job id ascending.
#[derive(Debug, Clone, Copy)]
struct Ranked {
    score: f64,
    id: JobId,
    slot: usize,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.id.cmp(&other.id))
    }
}

/// Ordered pool of open jobs. `slot` is the caller's handle for a job
/// (the engine uses its job-table index).
#[derive(Debug, Clone, Default)]
pub struct QueueBook {
    ranked: BTreeSet<Ranked>,
    scores: HashMap<usize, (f64, JobId)>,
}

impl QueueBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn contains(&self, slot: usize) -> bool {
        self.scores.contains_key(&slot)
    }

    pub fn insert(&mut self, slot: usize, id: JobId, score: f64) {
        if let Some((old, old_id)) = self.scores.insert(slot, (score, id)) {
            self.ranked.remove(&Ranked {
                score: old,
                id: old_id,
                slot,
            });
        }
        self.ranked.insert(Ranked { score, id, slot });
    }

    pub fn remove(&mut self, slot: usize) -> bool {
        match self.scores.remove(&slot) {
            Some((score, id)) => self.ranked.remove(&Ranked { score, id, slot }),
            None => false,
        }
    }

    /// Highest-priority slot and its score.
    pub fn peek_top(&self) -> Option<(usize, f64)> {
        self.ranked.first().map(|r| (r.slot, r.score))
    }

    pub fn pop_top(&mut self) -> Option<usize> {
        let r = self.ranked.pop_first()?;
        self.scores.remove(&r.slot);
        Some(r.slot)
    }

    pub fn pop_lowest(&mut self) -> Option<usize> {
        let r = self.ranked.pop_last()?;
        self.scores.remove(&r.slot);
        Some(r.slot)
    }

    /// Slots in service order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranked.iter().map(|r| r.slot)
    }

    /// Recomputes every score with `score_of` and rebuilds the order.
    pub fn rescore<F>(&mut self, mut score_of: F) -> Result<()>
    where
        F: FnMut(usize) -> Result<f64>,
    {
        let mut rebuilt = BTreeSet::new();
        for (slot, entry) in self.scores.iter_mut() {
            entry.0 = score_of(*slot)?;
            rebuilt.insert(Ranked {
                score: entry.0,
                id: entry.1,
                slot: *slot,
            });
        }
        self.ranked = rebuilt;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ContentViewTrajectory, Job};
    use proptest::prelude::*;

    fn job(id: u64, enq: u64, handle_ms: u64) -> Job {
        Job::new(id, SimTime(enq), handle_ms)
    }

    #[test]
    fn fifo_earlier_wins_and_ties_by_id() {
        let a = job(2, 5, 1);
        let b = job(1, 9, 1);
        let t = SimTime(10);
        assert!(score_fifo(&a.view(), t).value > score_fifo(&b.view(), t).value);

        let mut book = QueueBook::new();
        let c = job(7, 5, 1);
        book.insert(0, a.id, score_fifo(&a.view(), t).value);
        book.insert(1, c.id, score_fifo(&c.view(), t).value);
        book.insert(2, b.id, score_fifo(&b.view(), t).value);
        assert_eq!(book.pop_top(), Some(0));
        assert_eq!(book.pop_top(), Some(1));
        assert_eq!(book.pop_top(), Some(2));
        assert_eq!(book.pop_top(), None);
    }

    #[test]
    fn smith_ratio() {
        let mut j = job(1, 0, 2_000);
        j.weight = Some(10.0);
        let s = score_smith(&j.view(), SimTime(0), &SeverityWeights::default()).unwrap();
        assert_eq!(s.value, 5.0);

        let mut a = job(1, 0, 3_000);
        a.weight = Some(6.0);
        let mut b = job(2, 0, 2_000);
        b.weight = Some(10.0);
        let w = SeverityWeights::default();
        assert_eq!(score_smith(&a.view(), SimTime(0), &w).unwrap().value, 2.0);
        assert_eq!(score_smith(&b.view(), SimTime(0), &w).unwrap().value, 5.0);
    }

    #[test]
    fn smith_weight_falls_back_to_predicted_severity() {
        let mut j = job(1, 0, 2_000);
        j.predicted_severity = Some(Severity::VeryHigh);
        let s = score_smith(&j.view(), SimTime(0), &SeverityWeights::default()).unwrap();
        assert_eq!(s.value, 5.0);
        j.predicted_severity = None;
        let s = score_smith(&j.view(), SimTime(0), &SeverityWeights::default()).unwrap();
        assert_eq!(s.value, 0.5);
    }

    #[test]
    fn smith_rejects_zero_handle_time() {
        let j = job(1, 0, 0);
        assert!(matches!(
            score_smith(&j.view(), SimTime(0), &SeverityWeights::default()),
            Err(Error::ZeroHandleTime(_))
        ));
    }

    #[test]
    fn escalation_values() {
        let mut j = job(1, 0, 1);
        j.p_escalate = 0.3;
        let v = |alpha, wait| {
            score_escalation(&j.view(), SimTime(wait), alpha, 1_000)
                .unwrap()
                .value
        };
        assert_eq!(v(0.0, 0), 0.3);
        assert_eq!(v(0.0, 5_000), 0.3);
        assert!((v(0.5, 1_000) - 0.8).abs() < 1e-12);
        assert!((v(0.5, 500) - 0.55).abs() < 1e-12);
        assert!((v(0.5, 10_000) - 0.8).abs() < 1e-12);
        assert!(score_escalation(&j.view(), SimTime(0), 0.5, 0).is_err());
    }

    #[test]
    fn virality_values() {
        let mut j = job(1, 0, 1);
        j.predicted_view_trajectory = ContentViewTrajectory::constant(SimTime(0), 100);
        assert_eq!(
            score_virality(&j.view(), SimTime(1), [4.0, 4.0, 4.0]).value,
            100.0
        );
        j.topic_scores = [0.5, 0.0, 0.0];
        assert_eq!(
            score_virality(&j.view(), SimTime(1), [4.0, 0.0, 0.0]).value,
            200.0
        );
    }

    #[test]
    fn virality_zero_weights_is_views_only() {
        let jobs: Vec<Job> = (0..20)
            .map(|i| {
                let mut j = job(i, 0, 1);
                j.predicted_view_trajectory =
                    ContentViewTrajectory::constant(SimTime(0), (i * 37) % 11);
                j.topic_scores = [(i % 3) as f64 / 2.0, 0.9, 0.1];
                j
            })
            .collect();
        let t = SimTime(5);
        for j in &jobs {
            assert_eq!(
                score_virality(&j.view(), t, [0.0; 3]).value,
                j.view().predicted_views_at(t) as f64
            );
        }
    }

    #[test]
    fn linear_values() {
        let mut j = job(1, 0, 1);
        j.classifier_score = 0.7;
        let coeffs = BTreeMap::from([(Feature::ClassifierScore, 1.0)]);
        assert_eq!(score_linear(&j.view(), SimTime(0), &coeffs).value, 0.7);
        let zero = BTreeMap::from([(Feature::ClassifierScore, 0.0), (Feature::Wait, 0.0)]);
        assert_eq!(score_linear(&j.view(), SimTime(9), &zero).value, 0.0);
    }

    #[test]
    fn unknown_feature_is_a_config_error() {
        let bad: std::result::Result<PriorityFormula, _> =
            serde_json::from_str(r#"{"kind":"linear","coeffs":{"vibes":1.0}}"#);
        assert!(bad.is_err());
        let ok: PriorityFormula =
            serde_json::from_str(r#"{"kind":"linear","coeffs":{"wait":1.0}}"#).unwrap();
        assert!(matches!(ok, PriorityFormula::Linear { .. }));
    }

    #[test]
    fn formula_validation() {
        assert!(PriorityFormula::Escalation { alpha: 1.0 }
            .validate(None)
            .is_err());
        assert!(PriorityFormula::Escalation { alpha: -1.0 }
            .validate(Some(5))
            .is_err());
        assert!(PriorityFormula::Escalation { alpha: 1.0 }
            .validate(Some(5))
            .is_ok());
        assert!(PriorityFormula::Virality {
            weights: [1.0, -1.0, 0.0]
        }
        .validate(None)
        .is_err());
    }

    #[test]
    fn book_remove_and_lowest() {
        let mut book = QueueBook::new();
        book.insert(0, JobId(1), 0.9);
        book.insert(1, JobId(2), 0.7);
        book.insert(2, JobId(3), 0.1);
        assert!(book.remove(1));
        assert!(!book.remove(1));
        assert_eq!(book.pop_lowest(), Some(2));
        assert_eq!(book.pop_top(), Some(0));
        assert!(book.is_empty());
    }

    #[test]
    fn rescore_reorders() {
        let mut book = QueueBook::new();
        book.insert(0, JobId(1), 1.0);
        book.insert(1, JobId(2), 2.0);
        book.rescore(|slot| Ok(if slot == 0 { 3.0 } else { 2.0 }))
            .unwrap();
        assert_eq!(book.iter().collect::<Vec<_>>(), vec![0, 1]);
    }

    /// Naive oracle: sort by (score desc, id asc).
    fn sorted_oracle(items: &[(u64, f64)]) -> Vec<u64> {
        let mut v = items.to_vec();
        v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        v.into_iter().map(|(id, _)| id).collect()
    }

    proptest! {
        #[test]
        fn dequeue_order_matches_full_sort(
            scores in prop::collection::vec(-5i32..5, 0..60),
        ) {
            let items: Vec<(u64, f64)> = scores
                .iter()
                .enumerate()
                .map(|(i, &s)| (((i * 7919) % 1000) as u64, s as f64 / 2.0))
                .collect();
            let mut book = QueueBook::new();
            let mut seen = std::collections::HashSet::new();
            let items: Vec<_> = items.into_iter().filter(|(id, _)| seen.insert(*id)).collect();
            for (slot, &(id, s)) in items.iter().enumerate() {
                book.insert(slot, JobId(id), s);
            }
            let mut got = Vec::new();
            while let Some(slot) = book.pop_top() {
                got.push(items[slot].0);
            }
            prop_assert_eq!(got, sorted_oracle(&items));
        }

        #[test]
        fn smith_scaling_keeps_order(
            raw in prop::collection::vec((1u64..50_000, 0.1f64..50.0), 1..30),
            c in 0.01f64..100.0,
        ) {
            let order = |scale: f64| {
                let mut book = QueueBook::new();
                for (i, &(p, w)) in raw.iter().enumerate() {
                    let mut j = job(i as u64, 0, p);
                    j.weight = Some(w * scale);
                    let s = score_smith(&j.view(), SimTime(0), &SeverityWeights::default()).unwrap();
                    book.insert(i, j.id, s.value);
                }
                book.iter().collect::<Vec<_>>()
            };
            // Floating-point scaling can flip exact ties only; compare on ties-free inputs.
            let ratios: Vec<f64> = raw.iter().map(|&(p, w)| w / p as f64).collect();
            let mut sorted = ratios.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| (w[1] - w[0]).abs() > 1e-9 * w[1].abs()));
            prop_assert_eq!(order(1.0), order(c));
        }

        #[test]
        fn virality_monotone_in_weights_and_views(
            p in prop::array::uniform3(0.0f64..1.0),
            w in prop::array::uniform3(0.0f64..20.0),
            bump in 0.0f64..5.0,
            i in 0usize..3,
            views in 0u64..10_000,
            extra in 0u64..10_000,
        ) {
            let mut j = job(1, 0, 1);
            j.topic_scores = p;
            j.predicted_view_trajectory = ContentViewTrajectory::constant(SimTime(0), views);
            let base = score_virality(&j.view(), SimTime(0), w).value;
            let mut w2 = w;
            w2[i] += bump;
            prop_assert!(score_virality(&j.view(), SimTime(0), w2).value >= base);
            j.predicted_view_trajectory = ContentViewTrajectory::constant(SimTime(0), views + extra);
            prop_assert!(score_virality(&j.view(), SimTime(0), w).value >= base);
        }

        #[test]
        fn escalation_monotone_in_wait(
            p in 0.0f64..1.0,
            alpha in 0.0f64..3.0,
            a in 0u64..20_000,
            b in 0u64..20_000,
        ) {
            let mut j = job(1, 0, 1);
            j.p_escalate = p;
            let window = 10_000;
            let (lo, hi) = (a.min(b), a.max(b));
            let s = |t| score_escalation(&j.view(), SimTime(t), alpha, window).unwrap().value;
            prop_assert!(s(lo) <= s(hi));
            if alpha > 0.0 && lo < hi && hi <= window {
                prop_assert!(s(lo) < s(hi));
            }
        }

        #[test]
        fn wait_coefficient_orders_like_fifo(
            arrivals in prop::collection::vec(0u64..100_000, 1..40),
            extra in 0u64..50_000,
        ) {
            let now = SimTime(100_000 + extra);
            let coeffs = BTreeMap::from([(Feature::Wait, 1.0)]);
            let mut by_wait = QueueBook::new();
            let mut by_fifo = QueueBook::new();
            for (i, &a) in arrivals.iter().enumerate() {
                let j = job(i as u64, a, 1);
                by_wait.insert(i, j.id, score_linear(&j.view(), now, &coeffs).value);
                by_fifo.insert(i, j.id, score_fifo(&j.view(), now).value);
            }
            prop_assert_eq!(by_wait.iter().collect::<Vec<_>>(), by_fifo.iter().collect::<Vec<_>>());
        }
    }
}
