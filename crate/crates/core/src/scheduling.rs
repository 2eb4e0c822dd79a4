//! Minimum-degree greedy partition of the conflict graph into SDMA groups.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::graphs::ConflictGraph;
use crate::model::LinkId;

/// Groups of links transmitting simultaneously, in extraction order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdmaGroups {
    pub groups: Vec<Vec<LinkId>>,
}

impl SdmaGroups {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group_of(&self, link: LinkId) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&link))
    }

    /// One singleton group per link, in the given order.
    pub fn singletons(links: &[LinkId]) -> Self {
        Self {
            groups: links.iter().map(|&l| vec![l]).collect(),
        }
    }
}

/// Size bookkeeping of one greedy extraction, for bound checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractionStep {
    pub group_size: usize,
    pub residual_vertices: usize,
    pub residual_max_degree: usize,
}

pub fn cg_mis_schedule(cg: &ConflictGraph) -> SdmaGroups {
    cg_mis_schedule_traced(cg).0
}

/// Greedy schedule plus the residual-graph statistics seen at each extraction.
pub fn cg_mis_schedule_traced(cg: &ConflictGraph) -> (SdmaGroups, Vec<ExtractionStep>) {
    let n = cg.len();
    let mut unscheduled: BTreeSet<usize> = (0..n).collect();
    let mut groups = Vec::new();
    let mut steps = Vec::new();

    while !unscheduled.is_empty() {
        let residual_max_degree = unscheduled
            .iter()
            .map(|&v| cg.adjacent(v).intersection(&unscheduled).count())
            .max()
            .unwrap_or(0);
        let mut candidates = unscheduled.clone();
        let mut group = Vec::new();
        while !candidates.is_empty() {
            // Vertices are indexed in link id order, so the first minimum is the lowest id.
            let v = *candidates
                .iter()
                .min_by_key(|&&v| cg.adjacent(v).intersection(&candidates).count())
                .expect("non-empty");
            group.push(v);
            candidates.remove(&v);
            for u in cg.adjacent(v) {
                candidates.remove(u);
            }
        }
        steps.push(ExtractionStep {
            group_size: group.len(),
            residual_vertices: unscheduled.len(),
            residual_max_degree,
        });
        for v in &group {
            unscheduled.remove(v);
        }
        group.sort_unstable();
        groups.push(group.into_iter().map(|i| cg.vertices()[i]).collect());
    }
    (SdmaGroups { groups }, steps)
}

/// True iff the groups partition the vertex set into independent sets.
pub fn validate_schedule(cg: &ConflictGraph, groups: &SdmaGroups) -> bool {
    let mut seen = BTreeSet::new();
    for g in &groups.groups {
        for (x, &a) in g.iter().enumerate() {
            if cg.position(a).is_none() || !seen.insert(a) {
                return false;
            }
            if g[x + 1..].iter().any(|&b| cg.has_edge(a, b)) {
                return false;
            }
        }
    }
    seen.len() == cg.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[usize]) -> Vec<LinkId> {
        v.iter().map(|&i| LinkId(i)).collect()
    }

    #[test]
    fn edgeless_graph_is_one_group() {
        let g = ConflictGraph::from_edges(5, &[]);
        assert_eq!(cg_mis_schedule(&g).groups, vec![ids(&[0, 1, 2, 3, 4])]);
    }

    #[test]
    fn triangle_is_three_singletons() {
        let g = ConflictGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(
            cg_mis_schedule(&g).groups,
            vec![ids(&[0]), ids(&[1]), ids(&[2])]
        );
    }

    #[test]
    fn star_leaves_then_center() {
        let g = ConflictGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(
            cg_mis_schedule(&g).groups,
            vec![ids(&[1, 2, 3, 4]), ids(&[0])]
        );
    }

    #[test]
    fn five_cycle() {
        let g = ConflictGraph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let s = cg_mis_schedule(&g);
        assert_eq!(s.groups, vec![ids(&[0, 2]), ids(&[1, 3]), ids(&[4])]);
        assert!(validate_schedule(&g, &s));
    }

    #[test]
    fn validation_catches_violations() {
        let g = ConflictGraph::from_edges(3, &[(0, 1)]);
        let twice = SdmaGroups {
            groups: vec![ids(&[0, 2]), ids(&[1, 2])],
        };
        assert!(!validate_schedule(&g, &twice));
        let adjacent = SdmaGroups {
            groups: vec![ids(&[0, 1]), ids(&[2])],
        };
        assert!(!validate_schedule(&g, &adjacent));
        let missing = SdmaGroups {
            groups: vec![ids(&[0, 2])],
        };
        assert!(!validate_schedule(&g, &missing));
        let ok = SdmaGroups {
            groups: vec![ids(&[0, 2]), ids(&[1])],
        };
        assert!(validate_schedule(&g, &ok));
    }

    fn graph_strategy() -> impl Strategy<Value = ConflictGraph> {
        (1usize..30, 0.0f64..1.0, any::<u64>()).prop_map(|(n, p, seed)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random::<f64>() < p {
                        edges.push((a, b));
                    }
                }
            }
            ConflictGraph::from_edges(n, &edges)
        })
    }

    proptest! {
        #[test]
        fn greedy_output_is_valid_and_bounded(g in graph_strategy()) {
            let (s, steps) = cg_mis_schedule_traced(&g);
            prop_assert!(validate_schedule(&g, &s));
            prop_assert_eq!(s.groups.len(), steps.len());
            for step in &steps {
                prop_assert!(step.group_size * (step.residual_max_degree + 1) >= step.residual_vertices);
            }
            prop_assert!(s.groups[0].len() * (g.max_degree() + 1) >= g.len());
            prop_assert_eq!(cg_mis_schedule(&g), s);
        }
    }
}
