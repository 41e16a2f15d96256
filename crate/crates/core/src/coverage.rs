//! Function-to-node coverage graphs and maximum matchings.
//!
//! Node `i` covers function `k` when it holds both of the function's inputs.
//! A maximum matching in the coverage graph is the best zero-communication
//! flexible assignment; the functions it leaves unmatched are the minimum
//! number of uncovered functions.

use std::collections::VecDeque;

use thiserror::Error;

use crate::bits::BitSet;
use crate::instance::{Instance, Pair};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignmentError {
    #[error("function {function} mapped to node {node}, but only {n_nodes} nodes exist")]
    NodeOutOfRange {
        function: usize,
        node: usize,
        n_nodes: usize,
    },
    #[error("node {node} assigned to both function {first} and function {second}")]
    NotInjective {
        node: usize,
        first: usize,
        second: usize,
    },
}

/// Bipartite graph between functions and the nodes that cover them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageGraph {
    n_nodes: usize,
    adjacency: Vec<Vec<usize>>,
}

impl CoverageGraph {
    /// Adjacency lists are sorted and deduplicated on construction.
    pub fn from_adjacency(n_nodes: usize, mut adjacency: Vec<Vec<usize>>) -> Self {
        for list in adjacency.iter_mut() {
            list.sort_unstable();
            list.dedup();
            assert!(list.iter().all(|&i| i < n_nodes), "node index out of range");
        }
        Self { n_nodes, adjacency }
    }

    /// Coverage given per-message holder sets: `holders[j]` is the set of
    /// nodes that have message `j` available.
    pub fn from_holders(n_nodes: usize, functions: &[Pair], holders: &[BitSet]) -> Self {
        let adjacency = functions
            .iter()
            .map(|f| holders[f.lo].and(&holders[f.hi]).iter().collect())
            .collect();
        Self { n_nodes, adjacency }
    }

    pub fn k_functions(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Nodes covering function `k`, ascending.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.adjacency[k]
    }

    pub fn has_edge(&self, k: usize, node: usize) -> bool {
        self.adjacency[k].binary_search(&node).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }
}

/// Holder set of every message in `instance`.
pub fn message_holders(instance: &Instance) -> Vec<BitSet> {
    let n = instance.n();
    let mut holders = vec![BitSet::new(n); instance.m()];
    for (i, s) in instance.placement.side_infos().iter().enumerate() {
        for j in s.iter() {
            holders[j].insert(i);
        }
    }
    holders
}

pub fn build_coverage_graph(instance: &Instance) -> CoverageGraph {
    CoverageGraph::from_holders(instance.n(), instance.workload.pairs(), &message_holders(instance))
}

/// Coverage when every message in `broadcast` is additionally available at
/// every node (side information `S_i ∪ X`).
pub fn build_augmented_graph(instance: &Instance, broadcast: &BitSet) -> CoverageGraph {
    let mut holders = message_holders(instance);
    let all = BitSet::full(instance.n());
    for j in broadcast.iter() {
        holders[j] = all.clone();
    }
    CoverageGraph::from_holders(instance.n(), instance.workload.pairs(), &holders)
}

/// Partial injective map from functions to nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    map: Vec<Option<usize>>,
    n_nodes: usize,
}

impl Assignment {
    pub fn new(map: Vec<Option<usize>>, n_nodes: usize) -> Result<Self, AssignmentError> {
        let mut owner = vec![None; n_nodes];
        for (k, node) in map.iter().enumerate() {
            if let Some(i) = *node {
                if i >= n_nodes {
                    return Err(AssignmentError::NodeOutOfRange {
                        function: k,
                        node: i,
                        n_nodes,
                    });
                }
                if let Some(first) = owner[i] {
                    return Err(AssignmentError::NotInjective {
                        node: i,
                        first,
                        second: k,
                    });
                }
                owner[i] = Some(k);
            }
        }
        Ok(Self { map, n_nodes })
    }

    /// Total assignment from a function-indexed node list.
    pub fn total(nodes: &[usize], n_nodes: usize) -> Result<Self, AssignmentError> {
        Self::new(nodes.iter().map(|&i| Some(i)).collect(), n_nodes)
    }

    pub fn node_of(&self, k: usize) -> Option<usize> {
        self.map[k]
    }

    pub fn k_functions(&self) -> usize {
        self.map.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.map
    }

    pub fn matched(&self) -> usize {
        self.map.iter().flatten().count()
    }

    pub fn is_total(&self) -> bool {
        self.map.iter().all(Option::is_some)
    }

    /// `(function, node)` pairs of the mapped functions.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.map
            .iter()
            .enumerate()
            .filter_map(|(k, n)| n.map(|i| (k, i)))
    }

    /// Every mapped pair is an edge of `graph`.
    pub fn is_valid_in(&self, graph: &CoverageGraph) -> bool {
        self.map.len() == graph.k_functions() && self.pairs().all(|(k, i)| graph.has_edge(k, i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingResult {
    pub assignment: Assignment,
    /// Functions covered without communication (`Y^C`).
    pub matched: usize,
    /// Minimum number of uncovered functions (`Y = K - Y^C`).
    pub uncovered: usize,
}

/// Maximum-cardinality matching by Hopcroft-Karp.
///
/// Augmenting paths are explored in ascending node order, so the result is
/// a deterministic function of the graph.
pub fn max_matching(graph: &CoverageGraph) -> MatchingResult {
    max_matching_from(graph, &vec![None; graph.k_functions()])
}

/// Hopcroft-Karp started from an existing matching.
///
/// Used by the shuffle search, where augmenting the side information only
/// adds edges and the previous matching stays valid.
///
/// # Panics
///
/// Panics if `start` is not a matching of `graph`.
pub fn max_matching_from(graph: &CoverageGraph, start: &[Option<usize>]) -> MatchingResult {
    let k = graph.k_functions();
    let n = graph.n_nodes();
    assert_eq!(start.len(), k);
    let mut fwd: Vec<Option<usize>> = start.to_vec();
    let mut bwd: Vec<Option<usize>> = vec![None; n];
    for (f, node) in fwd.iter().enumerate() {
        if let Some(i) = *node {
            assert!(graph.has_edge(f, i), "start matching uses non-edge ({f}, {i})");
            assert!(bwd[i].is_none(), "start matching is not injective at node {i}");
            bwd[i] = Some(f);
        }
    }

    const INF: u32 = u32::MAX;
    let mut dist = vec![INF; k];
    loop {
        // BFS layers from free functions.
        let mut queue = VecDeque::new();
        for f in 0..k {
            if fwd[f].is_none() {
                dist[f] = 0;
                queue.push_back(f);
            } else {
                dist[f] = INF;
            }
        }
        let mut found = false;
        while let Some(f) = queue.pop_front() {
            for &i in graph.neighbors(f) {
                match bwd[i] {
                    None => found = true,
                    Some(g) if dist[g] == INF => {
                        dist[g] = dist[f] + 1;
                        queue.push_back(g);
                    }
                    Some(_) => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut used = vec![false; k];
        let mut progressed = false;
        for f in 0..k {
            if fwd[f].is_none() && augment(f, graph, &dist, &mut used, &mut fwd, &mut bwd) {
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }

    let matched = fwd.iter().flatten().count();
    MatchingResult {
        assignment: Assignment { map: fwd, n_nodes: n },
        matched,
        uncovered: k - matched,
    }
}

fn augment(
    f: usize,
    graph: &CoverageGraph,
    dist: &[u32],
    used: &mut [bool],
    fwd: &mut [Option<usize>],
    bwd: &mut [Option<usize>],
) -> bool {
    used[f] = true;
    for &i in graph.neighbors(f) {
        let ok = match bwd[i] {
            None => true,
            Some(g) => !used[g] && dist[g] == dist[f] + 1 && augment(g, graph, dist, used, fwd, bwd),
        };
        if ok {
            fwd[f] = Some(i);
            bwd[i] = Some(f);
            return true;
        }
    }
    false
}

/// Minimum number of functions left uncovered by any zero-communication
/// flexible assignment.
pub fn uncovered_count(instance: &Instance) -> usize {
    max_matching(&build_coverage_graph(instance)).uncovered
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{demo_instance, generate_functions, generate_placement, FunctionSet, Placement};
    use proptest::prelude::*;

    /// Exhaustive search over all partial injective assignments.
    fn brute_force_matching(graph: &CoverageGraph) -> usize {
        fn rec(k: usize, graph: &CoverageGraph, used: &mut Vec<bool>) -> usize {
            if k == graph.k_functions() {
                return 0;
            }
            let mut best = rec(k + 1, graph, used);
            for &i in graph.neighbors(k) {
                if !used[i] {
                    used[i] = true;
                    best = best.max(1 + rec(k + 1, graph, used));
                    used[i] = false;
                }
            }
            best
        }
        rec(0, graph, &mut vec![false; graph.n_nodes()])
    }

    fn instance(m: usize, sets: &[Vec<usize>], pairs: &[(usize, usize)]) -> Instance {
        let pl = Placement::from_sets(m, sets, 0.5, 0).unwrap();
        let f = FunctionSet::new(
            m,
            pairs.iter().map(|&(a, b)| Pair::new(a, b).unwrap()).collect(),
            m,
        )
        .unwrap();
        Instance::new(pl, f).unwrap()
    }

    #[test]
    fn demo_graph_is_empty() {
        let g = build_coverage_graph(&demo_instance());
        assert_eq!(g.edge_count(), 0);
        let r = max_matching(&g);
        assert_eq!((r.matched, r.uncovered), (0, 3));
        assert_eq!(uncovered_count(&demo_instance()), 3);
    }

    #[test]
    fn full_placement_gives_complete_graph() {
        let pl = generate_placement(8, 5, 1.0, 0);
        let f = generate_functions(8, 4, 2, 0).unwrap();
        let inst = Instance::new(pl, f).unwrap();
        let g = build_coverage_graph(&inst);
        assert_eq!(g.edge_count(), 4 * 5);
        assert_eq!(uncovered_count(&inst), 0);
    }

    #[test]
    fn single_cover() {
        let inst = instance(3, &[vec![2], vec![0, 1]], &[(0, 1)]);
        assert_eq!(build_coverage_graph(&inst).neighbors(0), &[1]);
    }

    #[test]
    fn contested_nodes() {
        let g = CoverageGraph::from_adjacency(3, vec![vec![0, 1], vec![0, 1], vec![1]]);
        let r = max_matching(&g);
        assert_eq!((r.matched, r.uncovered), (2, 1));
        assert_eq!(brute_force_matching(&g), 2);
        assert!(r.assignment.is_valid_in(&g));
    }

    #[test]
    fn one_function_nowhere_covered() {
        // f0 = {0,1} is held together by no node; f1, f2 by distinct nodes.
        let inst = instance(
            6,
            &[vec![0, 2, 3], vec![1, 4, 5], vec![2, 3]],
            &[(0, 1), (2, 3), (4, 5)],
        );
        assert_eq!(uncovered_count(&inst), 1);
        assert_eq!(brute_force_matching(&build_coverage_graph(&inst)), 2);
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let g = CoverageGraph::from_adjacency(4, vec![vec![0, 1], vec![0], vec![1, 2, 3], vec![3]]);
        let cold = max_matching(&g);
        let warm = max_matching_from(&g, &[Some(0), None, Some(3), None]);
        assert_eq!(cold.matched, warm.matched);
        assert_eq!(warm.matched, 4);
    }

    #[test]
    fn assignment_rejects_collisions() {
        assert_eq!(
            Assignment::total(&[1, 1], 3),
            Err(AssignmentError::NotInjective { node: 1, first: 0, second: 1 })
        );
        assert!(Assignment::total(&[0, 5], 3).is_err());
    }

    fn tiny_instance() -> impl Strategy<Value = Instance> {
        (2usize..=8, 1usize..=6, 0.0f64..=1.0, any::<u64>(), 1usize..=6).prop_map(|(m, n, p, seed, k)| {
            let pl = generate_placement(m, n, p, seed);
            let k = k.min(m * (m - 1) / 2);
            let f = generate_functions(m, k, m, seed ^ 0x9e37).unwrap();
            Instance::new(pl, f).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn matches_exhaustive_search(inst in tiny_instance()) {
            let g = build_coverage_graph(&inst);
            let r = max_matching(&g);
            prop_assert_eq!(r.matched, brute_force_matching(&g));
            prop_assert_eq!(r.matched + r.uncovered, inst.k());
            prop_assert!(r.assignment.is_valid_in(&g));
        }

        #[test]
        fn node_permutation_invariant(inst in tiny_instance(), rot in 0usize..6) {
            let n = inst.n();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
            let permuted = inst.with_placement(inst.placement.permute_nodes(&perm));
            prop_assert_eq!(uncovered_count(&inst), uncovered_count(&permuted));
        }

        #[test]
        fn one_lipschitz_in_nodes(inst in tiny_instance(), which in 0usize..6, extra in proptest::collection::vec(0usize..8, 0..5)) {
            let y = uncovered_count(&inst);
            if inst.n() > 1 {
                let removed = inst.with_placement(inst.placement.without_node(which % inst.n()));
                let y_removed = uncovered_count(&removed);
                prop_assert!(y_removed >= y && y_removed <= y + 1);
            }
            let extra: Vec<usize> = extra.into_iter().filter(|&j| j < inst.m()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            let added = inst.with_placement(inst.placement.with_node(&extra));
            let y_added = uncovered_count(&added);
            prop_assert!(y_added <= y && y_added + 1 >= y);
        }

        #[test]
        fn adding_side_info_never_hurts(inst in tiny_instance(), node in 0usize..6, msg in 0usize..8) {
            let node = node % inst.n();
            let msg = msg % inst.m();
            let more = inst.with_placement(inst.placement.with_message(node, msg));
            prop_assert!(uncovered_count(&more) <= uncovered_count(&inst));
        }
    }
}
