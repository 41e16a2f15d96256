//! Minimum uncoded shuffling cost.
//!
//! Two transmission models are supported:
//!
//! * raw messages: a set `X` of messages is broadcast, after which node `i`
//!   holds `S_i ∪ X`; the cost `T_un` is the smallest `|X|` for which the
//!   augmented coverage graph has a matching of size `K`;
//! * intermediate values: each assigned node receives the values it cannot
//!   compute itself, one transmission each; the cost `T'_un` is a min-cost
//!   perfect matching of functions into nodes.

use thiserror::Error;

use crate::bits::BitSet;
use crate::coverage::{
    build_coverage_graph, max_matching, max_matching_from, message_holders, Assignment, CoverageGraph,
    MatchingResult,
};
use crate::hungarian::min_cost_assignment;
use crate::instance::Instance;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShuffleError {
    #[error("outage: message(s) {messages:?} are needed but held by no node")]
    Outage { messages: Vec<usize> },
    #[error("no uncoded plan with at most {budget} broadcasts")]
    BudgetExceeded { budget: usize },
    #[error("K = {k} functions cannot be assigned to {n} distinct nodes")]
    Infeasible { k: usize, n: usize },
}

/// Record of the exact search: every broadcast set with fewer than
/// `exhausted_below` messages was checked and found insufficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchTrace {
    pub exhausted_below: usize,
    pub subsets_examined: u64,
}

/// Raw-message broadcast plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UncodedPlan {
    /// Broadcast messages `X`, ascending.
    pub broadcast: Vec<usize>,
    /// Lowest-index holder of each broadcast message.
    pub senders: Vec<usize>,
    /// Total assignment valid under side information `S_i ∪ X`.
    pub assignment: Assignment,
    /// Present when the plan came out of the exact search.
    pub trace: Option<SearchTrace>,
}

impl UncodedPlan {
    pub fn size(&self) -> usize {
        self.broadcast.len()
    }
}

/// One intermediate value sent to the node assigned to its function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntermediateTransfer {
    pub function: usize,
    /// 0 for the smaller input, 1 for the larger.
    pub slot: usize,
    pub message: usize,
    pub sender: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntermediatePlan {
    pub assignment: Assignment,
    pub cost_per_function: Vec<usize>,
    pub transfers: Vec<IntermediateTransfer>,
    /// `T'_un`.
    pub total: usize,
}

fn preflight(instance: &Instance) -> Result<(), ShuffleError> {
    let absent = instance.absent_messages();
    if !absent.is_empty() {
        return Err(ShuffleError::Outage { messages: absent });
    }
    if instance.k() > instance.n() {
        return Err(ShuffleError::Infeasible {
            k: instance.k(),
            n: instance.n(),
        });
    }
    Ok(())
}

/// Incremental evaluator for broadcast sets over a fixed instance.
struct Augmenter<'a> {
    instance: &'a Instance,
    holders: Vec<BitSet>,
    all_nodes: BitSet,
}

impl<'a> Augmenter<'a> {
    fn new(instance: &'a Instance) -> Self {
        Self {
            instance,
            holders: message_holders(instance),
            all_nodes: BitSet::full(instance.n()),
        }
    }

    fn graph(&self, broadcast: &BitSet) -> CoverageGraph {
        let adjacency = self
            .instance
            .workload
            .pairs()
            .iter()
            .map(|f| {
                let lo = if broadcast.contains(f.lo) { &self.all_nodes } else { &self.holders[f.lo] };
                let hi = if broadcast.contains(f.hi) { &self.all_nodes } else { &self.holders[f.hi] };
                lo.and(hi).iter().collect()
            })
            .collect();
        CoverageGraph::from_adjacency(self.instance.n(), adjacency)
    }

    fn neighbors(&self, broadcast: &BitSet, f: usize) -> BitSet {
        let pair = self.instance.workload.pair(f);
        let lo = if broadcast.contains(pair.lo) { &self.all_nodes } else { &self.holders[pair.lo] };
        let hi = if broadcast.contains(pair.hi) { &self.all_nodes } else { &self.holders[pair.hi] };
        lo.and(hi)
    }

    /// Size of a maximum matching with `broadcast` added, found by single
    /// augmenting searches from the functions `start` leaves unmatched.
    fn matched_size(&self, broadcast: &BitSet, start: &MatchingResult) -> usize {
        fn dfs(
            aug: &Augmenter,
            broadcast: &BitSet,
            f: usize,
            seen: &mut BitSet,
            fwd: &mut [Option<usize>],
            bwd: &mut [Option<usize>],
        ) -> bool {
            for i in aug.neighbors(broadcast, f).iter() {
                if seen.contains(i) {
                    continue;
                }
                seen.insert(i);
                if bwd[i].is_none_or(|g| dfs(aug, broadcast, g, seen, fwd, bwd)) {
                    fwd[f] = Some(i);
                    bwd[i] = Some(f);
                    return true;
                }
            }
            false
        }
        let n = self.instance.n();
        let mut fwd = start.assignment.as_slice().to_vec();
        let mut bwd = vec![None; n];
        for (f, i) in start.assignment.pairs() {
            bwd[i] = Some(f);
        }
        let mut matched = start.matched;
        for f in 0..fwd.len() {
            if fwd[f].is_none() {
                let mut seen = BitSet::new(n);
                if dfs(self, broadcast, f, &mut seen, &mut fwd, &mut bwd) {
                    matched += 1;
                }
            }
        }
        matched
    }

    /// Maximum matching with `broadcast` added, warm-started from `start`
    /// (which must be a matching for a subset of `broadcast`).
    fn matching(&self, broadcast: &BitSet, start: &MatchingResult) -> MatchingResult {
        max_matching_from(&self.graph(broadcast), start.assignment.as_slice())
    }

    fn plan(&self, broadcast: &BitSet, matching: MatchingResult, trace: Option<SearchTrace>) -> UncodedPlan {
        debug_assert_eq!(matching.uncovered, 0);
        let pl = &self.instance.placement;
        let messages: Vec<usize> = broadcast.iter().collect();
        let senders = messages
            .iter()
            .map(|&j| pl.first_holder(j).expect("broadcast messages are held"))
            .collect();
        UncodedPlan {
            broadcast: messages,
            senders,
            assignment: matching.assignment,
            trace,
        }
    }

    /// Drops broadcast messages that are not needed for feasibility,
    /// trying them in ascending order.
    fn prune(&self, broadcast: &mut BitSet, base: &MatchingResult) -> MatchingResult {
        let k = self.instance.k();
        for j in broadcast.clone().iter() {
            broadcast.remove(j);
            if self.matching(broadcast, base).matched < k {
                broadcast.insert(j);
            }
        }
        self.matching(broadcast, base)
    }
}

/// Upper-bound heuristic for `T_un`.
///
/// Repeatedly broadcasts the message with the largest matching gain (ties to
/// the lowest index). If no single message helps, both inputs of the lowest
/// unmatched function are broadcast. Redundant messages are then pruned, and
/// the result is compared with broadcasting the inputs of every function the
/// base matching leaves unmatched; the smaller plan wins.
pub fn tun_greedy(instance: &Instance) -> Result<UncodedPlan, ShuffleError> {
    preflight(instance)?;
    let k = instance.k();
    let aug = Augmenter::new(instance);
    let empty = BitSet::new(instance.m());
    let base = max_matching(&build_coverage_graph(instance));
    if base.uncovered == 0 {
        return Ok(aug.plan(&empty, base, None));
    }
    let candidates: Vec<usize> = instance.needed_messages().iter().collect();
    let mut uses = vec![0usize; instance.m()];
    for pair in instance.workload.pairs() {
        uses[pair.lo] += 1;
        uses[pair.hi] += 1;
    }

    let mut x = empty.clone();
    let mut current = base.clone();
    while current.matched < k {
        // A message gains at most one matched function per function using it.
        let mut best: Option<(usize, usize)> = None;
        for &j in &candidates {
            let best_gain = best.map_or(0, |(_, size)| size - current.matched);
            if x.contains(j) || uses[j] <= best_gain {
                continue;
            }
            x.insert(j);
            let size = aug.matched_size(&x, &current);
            x.remove(j);
            if size > current.matched + best_gain {
                best = Some((j, size));
            }
        }
        match best {
            Some((j, size)) => {
                x.insert(j);
                current = aug.matching(&x, &current);
                debug_assert_eq!(current.matched, size);
            }
            None => {
                let f = (0..k)
                    .find(|&f| current.assignment.node_of(f).is_none())
                    .expect("unmatched function exists");
                for j in instance.workload.pair(f).inputs() {
                    x.insert(j);
                }
                current = aug.matching(&x, &current);
            }
        }
    }
    let greedy_match = aug.prune(&mut x, &base);

    let mut fallback = empty;
    for f in (0..k).filter(|&f| base.assignment.node_of(f).is_none()) {
        for j in instance.workload.pair(f).inputs() {
            fallback.insert(j);
        }
    }
    let fallback_match = aug.prune(&mut fallback, &base);
    debug_assert_eq!(fallback_match.matched, k);

    if fallback.count() < x.count() {
        Ok(aug.plan(&fallback, fallback_match, None))
    } else {
        Ok(aug.plan(&x, greedy_match, None))
    }
}

/// Exact `T_un` by iterative deepening over the broadcast-set size.
///
/// Sets of each size are enumerated lexicographically over the needed
/// messages. Broadcasting message `j` can enlarge a matching by at most the
/// number of functions using `j`, so sets whose multiplicities sum below the
/// current deficit are skipped without a matching computation. The greedy
/// plan bounds the search from above: once every size below its length is
/// exhausted, it is optimal.
pub fn tun_exact(instance: &Instance, budget: usize) -> Result<UncodedPlan, ShuffleError> {
    preflight(instance)?;
    let k = instance.k();
    let aug = Augmenter::new(instance);
    let base = max_matching(&build_coverage_graph(instance));
    if base.uncovered == 0 {
        let trace = SearchTrace {
            exhausted_below: 0,
            subsets_examined: 1,
        };
        return Ok(aug.plan(&BitSet::new(instance.m()), base, Some(trace)));
    }
    let greedy = tun_greedy(instance)?;
    let upper = greedy.size();

    let candidates: Vec<usize> = instance.needed_messages().iter().collect();
    let mut multiplicity = vec![0usize; instance.m()];
    for f in instance.workload.pairs() {
        for j in f.inputs() {
            multiplicity[j] += 1;
        }
    }
    let deficit = base.uncovered;
    let mut examined = 1u64;

    let last_size = upper.saturating_sub(1).min(budget);
    for size in 1..=last_size {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let gain_bound: usize = idx.iter().map(|&c| multiplicity[candidates[c]]).sum();
            if gain_bound >= deficit {
                examined += 1;
                let x = BitSet::from_indices(instance.m(), idx.iter().map(|&c| candidates[c]));
                let r = aug.matching(&x, &base);
                if r.matched == k {
                    let trace = SearchTrace {
                        exhausted_below: size,
                        subsets_examined: examined,
                    };
                    return Ok(aug.plan(&x, r, Some(trace)));
                }
            }
            if !next_combination(&mut idx, candidates.len()) {
                break;
            }
        }
    }

    if upper <= budget {
        let x = BitSet::from_indices(instance.m(), greedy.broadcast.iter().copied());
        let r = aug.matching(&x, &base);
        let trace = SearchTrace {
            exhausted_below: upper,
            subsets_examined: examined,
        };
        Ok(aug.plan(&x, r, Some(trace)))
    } else {
        Err(ShuffleError::BudgetExceeded { budget })
    }
}

/// Advances `idx` to the next `idx.len()`-subset of `0..n` in lexicographic
/// order; returns `false` after the last one.
pub(crate) fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let r = idx.len();
    if r == 0 || r > n {
        return false;
    }
    let mut i = r;
    while i > 0 {
        i -= 1;
        if idx[i] < n - r + i {
            idx[i] += 1;
            for t in i + 1..r {
                idx[t] = idx[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Per-node cost of computing each function: inputs missing at the node.
pub fn intermediate_costs(instance: &Instance) -> Vec<Vec<i64>> {
    let pl = &instance.placement;
    instance
        .workload
        .pairs()
        .iter()
        .map(|f| {
            (0..instance.n())
                .map(|i| f.inputs().iter().filter(|&&j| !pl.holds(i, j)).count() as i64)
                .collect()
        })
        .collect()
}

/// Exact `T'_un` via min-cost assignment on the `K x n` cost matrix.
pub fn tprime_un(instance: &Instance) -> Result<IntermediatePlan, ShuffleError> {
    preflight(instance)?;
    let pl = &instance.placement;
    let costs = intermediate_costs(instance);
    let (nodes, total) = min_cost_assignment(&costs);
    let assignment = Assignment::total(&nodes, instance.n()).expect("hungarian output is injective");
    let mut cost_per_function = Vec::with_capacity(nodes.len());
    let mut transfers = Vec::new();
    for (k, &i) in nodes.iter().enumerate() {
        let f = instance.workload.pair(k);
        let mut c = 0;
        for (slot, j) in f.inputs().into_iter().enumerate() {
            if !pl.holds(i, j) {
                c += 1;
                transfers.push(IntermediateTransfer {
                    function: k,
                    slot,
                    message: j,
                    sender: pl.first_holder(j).expect("preflight rules out outage"),
                });
            }
        }
        cost_per_function.push(c);
    }
    debug_assert_eq!(total as usize, cost_per_function.iter().sum::<usize>());
    Ok(IntermediatePlan {
        assignment,
        cost_per_function,
        transfers,
        total: total as usize,
    })
}
