//! Inter-queue selection for an available reviewer.
//!
//! Queues are grouped into ranked segments. A reviewer may serve a queue only
//! if the queue's required skills are a subset of theirs. Under stack ranking
//! the reviewer takes from the first non-empty eligible queue in
//! (segment rank, position in segment) order. Under percentage allocation the
//! queues are partitioned into weighted groups; a group is drawn with
//! probability proportional to its weight among the groups that currently
//! have work, then stack ranking applies inside the group.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Reviewer, SimTime};

pub const DAY_MS: u64 = 86_400_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queues: Vec<String>,
    pub weight: f64,
    /// Weight per simulated day; the last entry repeats. Overrides `weight`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub daily_weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum AllocationConfig {
    #[default]
    StackRank,
    Percentage {
        groups: Vec<GroupConfig>,
    },
}

/// Static queue/segment layout the allocator ranks over.
#[derive(Debug, Clone, Default)]
pub struct Topology {
    pub queues: Vec<QueueNode>,
    pub segments: Vec<SegmentNode>,
}

#[derive(Debug, Clone)]
pub struct QueueNode {
    pub id: String,
    pub segment: usize,
    pub position: usize,
    pub required_skills: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct SegmentNode {
    pub id: String,
    pub rank: i64,
    pub queues: Vec<usize>,
    pub daily_cap_ms: Option<u64>,
}

impl Topology {
    fn rank_key(&self, q: usize) -> (i64, usize, usize) {
        let node = &self.queues[q];
        (
            self.segments[node.segment].rank,
            node.segment,
            node.position,
        )
    }
}

/// Queues the reviewer is skilled for, in stack-rank order.
pub fn eligible_queues(reviewer: &Reviewer, topo: &Topology) -> Vec<usize> {
    let mut out: Vec<usize> = (0..topo.queues.len())
        .filter(|&q| reviewer.qualifies_for(&topo.queues[q].required_skills))
        .collect();
    out.sort_by_key(|&q| topo.rank_key(q));
    out
}

/// First queue in `eligible` for which `open` holds.
pub fn pick_stack_rank(eligible: &[usize], open: impl Fn(usize) -> bool) -> Option<usize> {
    eligible.iter().copied().find(|&q| open(q))
}

#[derive(Debug, Clone)]
pub struct Group {
    pub weight: f64,
    pub daily_weights: Vec<f64>,
}

impl Group {
    pub fn weight_on(&self, t: SimTime) -> f64 {
        if self.daily_weights.is_empty() {
            return self.weight;
        }
        let day = (t.0 / DAY_MS) as usize;
        self.daily_weights[day.min(self.daily_weights.len() - 1)]
    }
}

/// Percentage draw. `group_of[q]` maps each queue to its group. Consumes one
/// uniform draw from `rng` only when two or more groups have work.
pub fn pick_percentage<R: Rng + ?Sized>(
    groups: &[Group],
    group_of: &[Option<usize>],
    eligible: &[usize],
    t: SimTime,
    open: impl Fn(usize) -> bool,
    rng: &mut R,
) -> Option<usize> {
    // Best queue per group, in eligible (stack-rank) order.
    let mut best: Vec<Option<usize>> = vec![None; groups.len()];
    let mut candidates = 0usize;
    for &q in eligible {
        let Some(g) = group_of[q] else { continue };
        if best[g].is_none() && open(q) {
            best[g] = Some(q);
            candidates += 1;
        }
    }
    match candidates {
        0 => None,
        1 => best.into_iter().flatten().next(),
        _ => {
            let total: f64 = best
                .iter()
                .enumerate()
                .filter(|(_, b)| b.is_some())
                .map(|(g, _)| groups[g].weight_on(t))
                .sum();
            let mut u = rng.random::<f64>() * total;
            let mut last = None;
            for (g, b) in best.iter().enumerate() {
                let Some(q) = *b else { continue };
                let w = groups[g].weight_on(t);
                if u < w {
                    return Some(q);
                }
                u -= w;
                last = Some(q);
            }
            last
        }
    }
}

#[derive(Debug, Clone)]
enum Strategy {
    StackRank,
    Percentage {
        groups: Vec<Group>,
        group_of: Vec<Option<usize>>,
    },
}

/// Per-run allocator: eligibility is resolved once per reviewer.
#[derive(Debug, Clone)]
pub struct Allocator {
    strategy: Strategy,
    eligible: Vec<Vec<usize>>,
}

impl Allocator {
    /// `config` must already be validated against `topo`.
    pub fn new(config: &AllocationConfig, topo: &Topology, reviewers: &[Reviewer]) -> Self {
        let strategy = match config {
            AllocationConfig::StackRank => Strategy::StackRank,
            AllocationConfig::Percentage { groups } => {
                let mut group_of = vec![None; topo.queues.len()];
                for (g, gc) in groups.iter().enumerate() {
                    for q in resolve_group(gc, topo).unwrap_or_default() {
                        group_of[q] = Some(g);
                    }
                }
                Strategy::Percentage {
                    groups: groups
                        .iter()
                        .map(|g| Group {
                            weight: g.weight,
                            daily_weights: g.daily_weights.clone(),
                        })
                        .collect(),
                    group_of,
                }
            }
        };
        Self {
            strategy,
            eligible: reviewers.iter().map(|r| eligible_queues(r, topo)).collect(),
        }
    }

    pub fn eligible(&self, reviewer: usize) -> &[usize] {
        &self.eligible[reviewer]
    }

    pub fn select<R: Rng + ?Sized>(
        &self,
        reviewer: usize,
        t: SimTime,
        open: impl Fn(usize) -> bool,
        rng: &mut R,
    ) -> Option<usize> {
        let eligible = &self.eligible[reviewer];
        match &self.strategy {
            Strategy::StackRank => pick_stack_rank(eligible, open),
            Strategy::Percentage { groups, group_of } => {
                pick_percentage(groups, group_of, eligible, t, open, rng)
            }
        }
    }
}

/// Queue indices covered by a group config.
pub fn resolve_group(g: &GroupConfig, topo: &Topology) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for s in &g.segments {
        let seg = topo
            .segments
            .iter()
            .find(|x| &x.id == s)
            .ok_or_else(|| format!("unknown segment `{s}`"))?;
        out.extend(seg.queues.iter().copied());
    }
    for q in &g.queues {
        let idx = topo
            .queues
            .iter()
            .position(|x| &x.id == q)
            .ok_or_else(|| format!("unknown queue `{q}`"))?;
        out.push(idx);
    }
    Ok(out)
}

/// Checks group references, weights and disjointness. Returns one message per problem.
pub fn validate(config: &AllocationConfig, topo: &Topology) -> Vec<String> {
    let AllocationConfig::Percentage { groups } = config else {
        return Vec::new();
    };
    let mut problems = Vec::new();
    if groups.is_empty() {
        problems.push("percentage allocation needs at least one group".to_owned());
    }
    let mut owner: Vec<Option<usize>> = vec![None; topo.queues.len()];
    for (g, gc) in groups.iter().enumerate() {
        let weights = std::iter::once(gc.weight).chain(gc.daily_weights.iter().copied());
        for w in weights {
            if !(w.is_finite() && w > 0.0) {
                problems.push(format!("group {g}: weight {w} must be positive"));
            }
        }
        match resolve_group(gc, topo) {
            Err(e) => problems.push(format!("group {g}: {e}")),
            Ok(qs) => {
                if qs.is_empty() {
                    problems.push(format!("group {g}: covers no queues"));
                }
                for q in qs {
                    if let Some(prev) = owner[q] {
                        problems.push(format!(
                            "queue `{}` is in groups {prev} and {g}",
                            topo.queues[q].id
                        ));
                    }
                    owner[q] = Some(g);
                }
            }
        }
    }
    for (q, o) in owner.iter().enumerate() {
        if o.is_none() && !groups.is_empty() {
            problems.push(format!(
                "queue `{}` is in no allocation group",
                topo.queues[q].id
            ));
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn skills(s: &[&str]) -> BTreeSet<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    /// Segments A (rank 0), B (rank 1), C (rank 2), one queue each, plus a
    /// French queue in A.
    fn topo() -> Topology {
        let q = |id: &str, segment, position, req: &[&str]| QueueNode {
            id: id.into(),
            segment,
            position,
            required_skills: skills(req),
        };
        Topology {
            queues: vec![
                q("c1", 2, 0, &[]),
                q("b1", 1, 0, &[]),
                q("a1", 0, 0, &["en"]),
                q("a2", 0, 1, &["fr"]),
            ],
            segments: vec![
                SegmentNode {
                    id: "A".into(),
                    rank: 0,
                    queues: vec![2, 3],
                    daily_cap_ms: None,
                },
                SegmentNode {
                    id: "B".into(),
                    rank: 1,
                    queues: vec![1],
                    daily_cap_ms: None,
                },
                SegmentNode {
                    id: "C".into(),
                    rank: 2,
                    queues: vec![0],
                    daily_cap_ms: None,
                },
            ],
        }
    }

    fn reviewer(sk: &[&str]) -> Reviewer {
        let mut r = Reviewer::new(1);
        r.skills = skills(sk);
        r
    }

    #[test]
    fn eligibility_is_subset_and_ranked() {
        let t = topo();
        assert_eq!(
            eligible_queues(&reviewer(&["en", "hate_speech"]), &t),
            vec![2, 1, 0]
        );
        assert_eq!(eligible_queues(&reviewer(&[]), &t), vec![1, 0]);
        assert_eq!(
            eligible_queues(&reviewer(&["en", "fr"]), &t),
            vec![2, 3, 1, 0]
        );
    }

    #[test]
    fn stack_rank_prefers_higher_segment() {
        let elig = [2, 1, 0];
        assert_eq!(pick_stack_rank(&elig, |_| true), Some(2));
        assert_eq!(pick_stack_rank(&elig, |q| q != 2), Some(1));
        assert_eq!(pick_stack_rank(&elig, |q| q == 0), Some(0));
        assert_eq!(pick_stack_rank(&elig, |_| false), None);
    }

    fn groups_ac_b() -> (Vec<Group>, Vec<Option<usize>>) {
        let groups = vec![
            Group {
                weight: 60.0,
                daily_weights: vec![],
            },
            Group {
                weight: 40.0,
                daily_weights: vec![],
            },
        ];
        // a1,a2,c1 -> group 0; b1 -> group 1
        (groups, vec![Some(0), Some(1), Some(0), Some(0)])
    }

    #[test]
    fn percentage_renormalizes_over_nonempty_groups() {
        let (groups, group_of) = groups_ac_b();
        let elig = [2, 3, 1, 0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let q = pick_percentage(&groups, &group_of, &elig, SimTime(0), |q| q != 1, &mut rng);
            assert_eq!(q, Some(2));
        }
        // inside A∪C, A goes before C
        let q = pick_percentage(
            &groups,
            &group_of,
            &elig,
            SimTime(0),
            |q| q == 0 || q == 2,
            &mut rng,
        );
        assert_eq!(q, Some(2));
        let q = pick_percentage(&groups, &group_of, &elig, SimTime(0), |q| q == 0, &mut rng);
        assert_eq!(q, Some(0));
        assert_eq!(
            pick_percentage(&groups, &group_of, &elig, SimTime(0), |_| false, &mut rng),
            None
        );
    }

    /// Counts draws consumed by wrapping the generator.
    struct Counting<R> {
        inner: R,
        draws: usize,
    }

    impl<R: rand::RngCore> rand::RngCore for Counting<R> {
        fn next_u32(&mut self) -> u32 {
            self.draws += 1;
            self.inner.next_u32()
        }
        fn next_u64(&mut self) -> u64 {
            self.draws += 1;
            self.inner.next_u64()
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            self.draws += 1;
            self.inner.fill_bytes(dst)
        }
    }

    #[test]
    fn draw_accounting() {
        let (groups, group_of) = groups_ac_b();
        let elig = [2, 3, 1, 0];
        let mut rng = Counting {
            inner: ChaCha8Rng::seed_from_u64(3),
            draws: 0,
        };
        pick_percentage(&groups, &group_of, &elig, SimTime(0), |q| q == 0, &mut rng);
        assert_eq!(rng.draws, 0);
        pick_percentage(&groups, &group_of, &elig, SimTime(0), |_| true, &mut rng);
        assert_eq!(rng.draws, 1);
        pick_percentage(&groups, &group_of, &elig, SimTime(0), |_| false, &mut rng);
        assert_eq!(rng.draws, 1);
    }

    #[test]
    fn daily_weights_switch_by_day() {
        let g = Group {
            weight: 1.0,
            daily_weights: vec![60.0, 50.0],
        };
        assert_eq!(g.weight_on(SimTime(0)), 60.0);
        assert_eq!(g.weight_on(SimTime(DAY_MS)), 50.0);
        assert_eq!(g.weight_on(SimTime(10 * DAY_MS)), 50.0);
    }

    #[test]
    fn validate_catches_overlap_and_gaps() {
        let t = topo();
        let cfg = AllocationConfig::Percentage {
            groups: vec![
                GroupConfig {
                    segments: vec!["A".into()],
                    queues: vec!["b1".into()],
                    weight: 1.0,
                    daily_weights: vec![],
                },
                GroupConfig {
                    segments: vec!["B".into()],
                    queues: vec![],
                    weight: 0.0,
                    daily_weights: vec![],
                },
            ],
        };
        let problems = validate(&cfg, &t);
        assert!(problems.iter().any(|p| p.contains("in groups 0 and 1")));
        assert!(problems.iter().any(|p| p.contains("must be positive")));
        assert!(problems
            .iter()
            .any(|p| p.contains("`c1` is in no allocation group")));
        assert!(validate(&AllocationConfig::StackRank, &t).is_empty());
    }
}
