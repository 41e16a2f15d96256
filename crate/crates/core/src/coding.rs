//! Coded shuffling over GF(2).
//!
//! Fixing a total assignment turns the shuffle into an index-coding problem:
//! every assigned node that lacks an input of its function becomes a receiver
//! demanding that message, with the node's side information. A linear code
//! serves all receivers iff every receiver finds, in the code's span, a row
//! that is 1 on its demand, 0 outside its side information and arbitrary
//! inside it. The fitting matrix records that pattern and its minrank is the
//! shortest such code.
//!
//! On top of plain minrank, [`optimal_coded_flexible`] also requires every
//! transmission to be sendable: each must combine messages that a single
//! node holds.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::bits::BitSet;
use crate::coverage::Assignment;
use crate::gf2::{rank, Basis};
use crate::instance::Instance;

pub const DEFAULT_FREE_CAP: u32 = 20;
pub const DEFAULT_ASSIGNMENT_CAP: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodingError {
    #[error("{what}: {count} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        count: u64,
        cap: u64,
    },
    #[error("outage: message(s) {messages:?} are needed but held by no node")]
    Outage { messages: Vec<usize> },
    #[error("K = {k} functions cannot be assigned to {n} distinct nodes")]
    Infeasible { k: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receiver {
    pub node: usize,
    pub function: usize,
    pub demand: usize,
    pub side_info: BitSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexCodingInstance {
    pub receivers: Vec<Receiver>,
    /// Messages appearing as a demand or in some receiver's side information.
    pub universe: BitSet,
}

impl IndexCodingInstance {
    pub fn is_empty(&self) -> bool {
        self.receivers.is_empty()
    }

    /// Distinct demanded messages in order of first appearance.
    pub fn demanded(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for r in &self.receivers {
            if !out.contains(&r.demand) {
                out.push(r.demand);
            }
        }
        out
    }
}

/// One receiver per (assigned node, input it lacks), ordered by node and
/// then by demanded message. A node lacking both inputs yields two
/// receivers with the same side information.
///
/// # Panics
///
/// Panics if `assignment` is not total over the instance's functions.
pub fn extract_instance(instance: &Instance, assignment: &Assignment) -> IndexCodingInstance {
    assert!(assignment.is_total(), "assignment must cover every function");
    assert_eq!(assignment.k_functions(), instance.k());
    let pl = &instance.placement;
    let mut receivers = Vec::new();
    let mut universe = BitSet::new(instance.m());
    for (k, node) in assignment.pairs() {
        let side = pl.side_info(node);
        for j in instance.workload.pair(k).inputs() {
            if !side.contains(j) {
                receivers.push(Receiver {
                    node,
                    function: k,
                    demand: j,
                    side_info: side.clone(),
                });
                universe.insert(j);
                universe.union_with(side);
            }
        }
    }
    receivers.sort_by_key(|r| (r.node, r.demand));
    IndexCodingInstance { receivers, universe }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    One,
    Zero,
    Free,
}

/// Cell pattern over receivers (rows) and demanded messages (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FittingMatrix {
    /// Message index of each column.
    pub columns: Vec<usize>,
    /// Column holding each row's demand.
    pub demand_column: Vec<usize>,
    cells: Vec<Vec<Cell>>,
}

impl FittingMatrix {
    pub fn rows(&self) -> usize {
        self.cells.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn cell(&self, r: usize, c: usize) -> Cell {
        self.cells[r][c]
    }

    pub fn row_cells(&self, r: usize) -> &[Cell] {
        &self.cells[r]
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        (0..self.rows())
            .flat_map(|r| (0..self.cols()).filter(move |&c| self.cells[r][c] == Cell::Free).map(move |c| (r, c)))
            .collect()
    }

    fn free_columns(&self, r: usize) -> Vec<usize> {
        (0..self.cols()).filter(|&c| self.cells[r][c] == Cell::Free).collect()
    }

    fn unit(&self, r: usize) -> BitSet {
        BitSet::from_indices(self.cols(), [self.demand_column[r]])
    }

    /// Whether `rows` is a completion of this pattern.
    pub fn fits(&self, rows: &[BitSet]) -> bool {
        rows.len() == self.rows()
            && rows.iter().enumerate().all(|(r, row)| {
                (0..self.cols()).all(|c| match self.cells[r][c] {
                    Cell::One => row.contains(c),
                    Cell::Zero => !row.contains(c),
                    Cell::Free => true,
                })
            })
    }
}

pub fn build_fitting_matrix(ic: &IndexCodingInstance) -> FittingMatrix {
    let columns = ic.demanded();
    let demand_column = ic
        .receivers
        .iter()
        .map(|r| columns.iter().position(|&j| j == r.demand).unwrap())
        .collect();
    let cells = ic
        .receivers
        .iter()
        .map(|r| {
            columns
                .iter()
                .map(|&j| {
                    if j == r.demand {
                        Cell::One
                    } else if r.side_info.contains(j) {
                        Cell::Free
                    } else {
                        Cell::Zero
                    }
                })
                .collect()
        })
        .collect();
    FittingMatrix {
        columns,
        demand_column,
        cells,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinrankResult {
    pub rank: usize,
    /// A completion achieving `rank`, one row per receiver.
    pub witness: Vec<BitSet>,
}

fn completion(fm: &FittingMatrix, free: &[(usize, usize)], index: u64) -> Vec<BitSet> {
    let mut rows: Vec<BitSet> = (0..fm.rows()).map(|r| fm.unit(r)).collect();
    for (t, &(r, c)) in free.iter().enumerate() {
        if index >> t & 1 == 1 {
            rows[r].insert(c);
        }
    }
    rows
}

/// Minimum GF(2) rank over all completions, by exhaustive enumeration.
///
/// Completions are indexed by the bits of a counter over the free cells in
/// row-major order; the witness is the lowest-indexed completion of minimum
/// rank. Ranges of the counter are evaluated in parallel.
pub fn minrank_gf2(fm: &FittingMatrix, free_cap: u32) -> Result<MinrankResult, CodingError> {
    let free = fm.free_cells();
    if free.len() as u64 > free_cap as u64 || free.len() >= 63 {
        return Err(CodingError::CapExceeded {
            what: "free cells",
            count: free.len() as u64,
            cap: free_cap as u64,
        });
    }
    if fm.rows() == 0 {
        return Ok(MinrankResult {
            rank: 0,
            witness: Vec::new(),
        });
    }
    let total = 1u64 << free.len();
    let chunks = total.min(256);
    let per = total.div_ceil(chunks);
    let (best_rank, best_index) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut best = (usize::MAX, u64::MAX);
            for idx in c * per..((c + 1) * per).min(total) {
                let r = rank(&completion(fm, &free, idx));
                if r < best.0 {
                    best = (r, idx);
                    if r <= 1 {
                        break;
                    }
                }
            }
            best
        })
        .reduce(|| (usize::MAX, u64::MAX), |a, b| a.min(b));
    Ok(MinrankResult {
        rank: best_rank,
        witness: completion(fm, &free, best_index),
    })
}

/// One broadcast: the XOR of `support`, sent by a node holding all of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedTransmission {
    pub sender: usize,
    /// Message indices, ascending.
    pub support: Vec<usize>,
}

/// A sendable linear code together with the assignment it serves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPlan {
    pub assignment: Assignment,
    pub index_coding: IndexCodingInstance,
    pub matrix: FittingMatrix,
    /// Completion of `matrix` whose row space the transmissions span.
    pub completion: Vec<BitSet>,
    pub transmissions: Vec<CodedTransmission>,
}

impl CodedPlan {
    pub fn len(&self) -> usize {
        self.transmissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmissions.is_empty()
    }
}

/// Side information of every node restricted to the matrix columns.
fn column_masks(instance: &Instance, fm: &FittingMatrix) -> Vec<BitSet> {
    instance
        .placement
        .side_infos()
        .iter()
        .map(|s| BitSet::from_indices(fm.cols(), (0..fm.cols()).filter(|&c| s.contains(fm.columns[c]))))
        .collect()
}

/// A basis of `span` made of vectors each held entirely by one node, with
/// the lowest such node as sender; `None` if no such basis exists.
fn sendable_basis(span: &Basis, masks: &[BitSet]) -> Option<Vec<(usize, BitSet)>> {
    let mut picked = Basis::new(span.dim());
    let mut out = Vec::with_capacity(span.rank());
    for v in span.span_vectors() {
        if picked.rank() == span.rank() {
            break;
        }
        if v.is_empty() || picked.contains(&v) {
            continue;
        }
        if let Some(sender) = masks.iter().position(|m| v.is_subset(m)) {
            picked.insert(&v);
            out.push((sender, v));
        }
    }
    (picked.rank() == span.rank()).then_some(out)
}

struct CodeSearch<'a> {
    fm: &'a FittingMatrix,
    masks: &'a [BitSet],
    free_cols: Vec<Vec<usize>>,
    bound: usize,
    best: Option<(Vec<BitSet>, Vec<(usize, BitSet)>)>,
    visited: u64,
    limit: u64,
}

impl CodeSearch<'_> {
    /// Depth-first over receivers. A receiver's row choices only matter
    /// modulo the span built so far, so choices are deduplicated by their
    /// reduced form; the in-span choice (if any) keeps the rank.
    fn go(&mut self, r: usize, basis: &Basis, chosen: &mut Vec<BitSet>) -> Result<(), CodingError> {
        if basis.rank() >= self.bound {
            return Ok(());
        }
        if r == self.fm.rows() {
            if let Some(tx) = sendable_basis(basis, self.masks) {
                self.bound = basis.rank();
                self.best = Some((chosen.clone(), tx));
            }
            return Ok(());
        }
        let free = &self.free_cols[r];
        if free.len() >= 32 {
            return Err(self.cap_error(1u64 << free.len().min(63)));
        }
        let unit = self.fm.unit(r);
        let mut in_span: Option<BitSet> = None;
        let mut fresh: Vec<BitSet> = Vec::new();
        let mut seen: HashMap<BitSet, ()> = HashMap::new();
        for mask in 0u32..(1 << free.len()) {
            self.visited += 1;
            if self.visited > self.limit {
                return Err(self.cap_error(self.visited));
            }
            let mut g = unit.clone();
            for (t, &c) in free.iter().enumerate() {
                if mask >> t & 1 == 1 {
                    g.insert(c);
                }
            }
            let red = basis.reduce(&g);
            if red.is_empty() {
                if in_span.is_none() {
                    in_span = Some(g);
                }
            } else if seen.insert(red, ()).is_none() {
                fresh.push(g);
            }
        }
        if let Some(g) = in_span {
            chosen.push(g);
            self.go(r + 1, basis, chosen)?;
            chosen.pop();
        }
        for g in fresh {
            if basis.rank() + 1 >= self.bound {
                break;
            }
            let mut next = basis.clone();
            next.insert(&g);
            chosen.push(g);
            self.go(r + 1, &next, chosen)?;
            chosen.pop();
        }
        Ok(())
    }

    fn cap_error(&self, count: u64) -> CodingError {
        CodingError::CapExceeded {
            what: "code search nodes for one assignment",
            count,
            cap: self.limit,
        }
    }
}

fn plan_from(
    instance: &Instance,
    assignment: &Assignment,
    ic: IndexCodingInstance,
    fm: FittingMatrix,
    completion: Vec<BitSet>,
    tx: Vec<(usize, BitSet)>,
) -> CodedPlan {
    let transmissions = tx
        .into_iter()
        .map(|(sender, v)| {
            let mut support: Vec<usize> = v.iter().map(|c| fm.columns[c]).collect();
            support.sort_unstable();
            debug_assert!(support.iter().all(|&j| instance.placement.holds(sender, j)));
            CodedTransmission { sender, support }
        })
        .collect();
    CodedPlan {
        assignment: assignment.clone(),
        index_coding: ic,
        matrix: fm,
        completion,
        transmissions,
    }
}

/// Shortest sendable code for a fixed total assignment, if one shorter than
/// `bound` exists.
///
/// The search examines at most `2^free_cap` candidate rows.
pub fn best_code_for_assignment(
    instance: &Instance,
    assignment: &Assignment,
    bound: usize,
    free_cap: u32,
) -> Result<Option<CodedPlan>, CodingError> {
    let ic = extract_instance(instance, assignment);
    let fm = build_fitting_matrix(&ic);
    let masks = column_masks(instance, &fm);
    let mut search = CodeSearch {
        fm: &fm,
        masks: &masks,
        free_cols: (0..fm.rows()).map(|r| fm.free_columns(r)).collect(),
        bound,
        best: None,
        visited: 0,
        limit: 1u64 << free_cap.min(62),
    };
    search.go(0, &Basis::new(fm.cols()), &mut Vec::new())?;
    Ok(search
        .best
        .map(|(completion, tx)| plan_from(instance, assignment, ic, fm.clone(), completion, tx)))
}

/// Uncoded code for an assignment: each demanded message once, from its
/// lowest-index holder.
fn uncoded_code(instance: &Instance, assignment: &Assignment) -> CodedPlan {
    let ic = extract_instance(instance, assignment);
    let fm = build_fitting_matrix(&ic);
    let completion: Vec<BitSet> = (0..fm.rows()).map(|r| fm.unit(r)).collect();
    let tx = (0..fm.cols())
        .map(|c| {
            let sender = instance
                .placement
                .first_holder(fm.columns[c])
                .expect("outage ruled out");
            (sender, BitSet::from_indices(fm.cols(), [c]))
        })
        .collect();
    plan_from(instance, assignment, ic, fm, completion, tx)
}

fn injective_count(n: usize, k: usize) -> Option<u64> {
    (0..k).try_fold(1u64, |acc, t| acc.checked_mul((n - t) as u64))
}

/// Fewest coded broadcasts over all flexible assignments.
///
/// Every injective total assignment is tried. For each, the shortest code is
/// the least-rank completion of its fitting matrix whose row space has a
/// basis of sendable rows; a minimum-rank completion that fails this is
/// passed over in favor of other completions, at equal rank first. Ties
/// between assignments go to the first in lexicographic order.
pub fn optimal_coded_flexible(
    instance: &Instance,
    assignment_cap: u64,
    free_cap: u32,
) -> Result<CodedPlan, CodingError> {
    let absent = instance.absent_messages();
    if !absent.is_empty() {
        return Err(CodingError::Outage { messages: absent });
    }
    let (k, n) = (instance.k(), instance.n());
    if k > n {
        return Err(CodingError::Infeasible { k, n });
    }
    let count = injective_count(n, k).unwrap_or(u64::MAX);
    if count > assignment_cap {
        return Err(CodingError::CapExceeded {
            what: "assignments",
            count,
            cap: assignment_cap,
        });
    }

    let mut best: Option<CodedPlan> = None;
    let mut nodes = Vec::with_capacity(k);
    let mut used = vec![false; n];
    enumerate_assignments(&mut nodes, &mut used, k, &mut |nodes| {
        let bound = best.as_ref().map_or(usize::MAX, CodedPlan::len);
        if bound == 0 {
            return Ok(());
        }
        let assignment = Assignment::total(nodes, n).expect("enumeration is injective");
        let uncoded = uncoded_code(instance, &assignment);
        let bound = if uncoded.len() < bound {
            let len = uncoded.len();
            best = Some(uncoded);
            len
        } else {
            bound
        };
        if let Some(plan) = best_code_for_assignment(instance, &assignment, bound, free_cap)? {
            best = Some(plan);
        }
        Ok(())
    })?;
    Ok(best.expect("at least one assignment exists when K <= n"))
}

fn enumerate_assignments(
    nodes: &mut Vec<usize>,
    used: &mut [bool],
    k: usize,
    visit: &mut dyn FnMut(&[usize]) -> Result<(), CodingError>,
) -> Result<(), CodingError> {
    if nodes.len() == k {
        return visit(nodes);
    }
    for i in 0..used.len() {
        if !used[i] {
            used[i] = true;
            nodes.push(i);
            enumerate_assignments(nodes, used, k, visit)?;
            nodes.pop();
            used[i] = false;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{demo_instance, generate_functions, generate_placement};
    use crate::shuffle::tun_exact;
    use proptest::prelude::*;
    use Cell::*;

    fn demo_assignment() -> Assignment {
        // {A,B} -> node 3, {B,C} -> node 2, {D,E} -> node 1 (1-based).
        Assignment::total(&[2, 1, 0], 4).unwrap()
    }

    fn ic_from(receivers: &[(usize, &[usize])], m: usize) -> IndexCodingInstance {
        let receivers: Vec<Receiver> = receivers
            .iter()
            .enumerate()
            .map(|(node, &(demand, side))| Receiver {
                node,
                function: node,
                demand,
                side_info: BitSet::from_indices(m, side.iter().copied()),
            })
            .collect();
        let mut universe = BitSet::new(m);
        for r in &receivers {
            universe.insert(r.demand);
            universe.union_with(&r.side_info);
        }
        IndexCodingInstance { receivers, universe }
    }

    /// Rank computed by listing every completion explicitly and eliminating
    /// over plain `Vec<bool>` rows.
    fn brute_minrank(fm: &FittingMatrix) -> usize {
        fn rank_bool(mut rows: Vec<Vec<bool>>) -> usize {
            let cols = rows.first().map_or(0, Vec::len);
            let mut rank = 0;
            for c in 0..cols {
                if let Some(p) = (rank..rows.len()).find(|&r| rows[r][c]) {
                    rows.swap(rank, p);
                    for r in 0..rows.len() {
                        if r != rank && rows[r][c] {
                            let pivot = rows[rank].clone();
                            for (x, y) in rows[r].iter_mut().zip(pivot) {
                                *x ^= y;
                            }
                        }
                    }
                    rank += 1;
                }
            }
            rank
        }
        let free = fm.free_cells();
        (0..1u64 << free.len())
            .map(|idx| {
                let mut rows: Vec<Vec<bool>> =
                    (0..fm.rows()).map(|r| (0..fm.cols()).map(|c| fm.cell(r, c) == One).collect()).collect();
                for (t, &(r, c)) in free.iter().enumerate() {
                    rows[r][c] = idx >> t & 1 == 1;
                }
                rank_bool(rows)
            })
            .min()
            .unwrap_or(0)
    }

    #[test]
    fn demo_extraction() {
        let ic = extract_instance(&demo_instance(), &demo_assignment());
        let got: Vec<(usize, usize, Vec<usize>)> = ic
            .receivers
            .iter()
            .map(|r| (r.node, r.demand, r.side_info.iter().collect()))
            .collect();
        assert_eq!(
            got,
            vec![(0, 3, vec![0, 2, 4]), (1, 2, vec![1, 3, 5]), (2, 0, vec![1, 4, 5])]
        );
    }

    #[test]
    fn full_placement_has_no_receivers() {
        let inst = Instance::new(generate_placement(6, 4, 1.0, 1), generate_functions(6, 3, 1, 1).unwrap()).unwrap();
        let ic = extract_instance(&inst, &Assignment::total(&[0, 1, 2], 4).unwrap());
        assert!(ic.is_empty());
        assert_eq!(optimal_coded_flexible(&inst, DEFAULT_ASSIGNMENT_CAP, DEFAULT_FREE_CAP).unwrap().len(), 0);
    }

    #[test]
    fn node_missing_both_inputs_splits() {
        // Node 0 holds neither input of {0,1}.
        let pl = crate::instance::Placement::from_sets(4, &[vec![2, 3], vec![0, 1]], 0.5, 0).unwrap();
        let f = crate::instance::FunctionSet::new(4, vec![crate::instance::Pair::new(0, 1).unwrap()], 1).unwrap();
        let inst = Instance::new(pl, f).unwrap();
        let ic = extract_instance(&inst, &Assignment::total(&[0], 2).unwrap());
        assert_eq!(ic.receivers.len(), 2);
        assert_eq!(ic.receivers[0].side_info, ic.receivers[1].side_info);
        assert_eq!((ic.receivers[0].demand, ic.receivers[1].demand), (0, 1));
    }

    #[test]
    fn demo_fitting_matrix() {
        let fm = build_fitting_matrix(&extract_instance(&demo_instance(), &demo_assignment()));
        assert_eq!(fm.columns, vec![3, 2, 0]);
        assert_eq!(fm.row_cells(0), &[One, Free, Free]);
        assert_eq!(fm.row_cells(1), &[Free, One, Zero]);
        assert_eq!(fm.row_cells(2), &[Zero, Zero, One]);
    }

    #[test]
    fn identity_pattern() {
        let ic = ic_from(&[(0, &[]), (1, &[]), (2, &[])], 3);
        let fm = build_fitting_matrix(&ic);
        assert!(fm.free_cells().is_empty());
        assert_eq!(minrank_gf2(&fm, 20).unwrap().rank, 3);
    }

    #[test]
    fn duplicate_demands_share_a_row() {
        let ic = ic_from(&[(0, &[]), (0, &[])], 2);
        let fm = build_fitting_matrix(&ic);
        assert_eq!(fm.row_cells(0), fm.row_cells(1));
        assert_eq!(minrank_gf2(&fm, 20).unwrap().rank, 1);
    }

    #[test]
    fn three_cycle() {
        let ic = ic_from(&[(0, &[1]), (1, &[2]), (2, &[0])], 3);
        let fm = build_fitting_matrix(&ic);
        assert_eq!(fm.free_cells().len(), 3);
        let r = minrank_gf2(&fm, 20).unwrap();
        assert_eq!(r.rank, 2);
        assert_eq!(brute_minrank(&fm), 2);
        assert!(fm.fits(&r.witness));
        assert_eq!(rank(&r.witness), 2);
    }

    #[test]
    fn demo_minrank() {
        let fm = build_fitting_matrix(&extract_instance(&demo_instance(), &demo_assignment()));
        let r = minrank_gf2(&fm, 20).unwrap();
        assert_eq!(r.rank, 2);
        assert_eq!(brute_minrank(&fm), 2);
        // row1 = (1,1,0), row2 = (1,1,0), row3 = (0,0,1) in column order (D, C, A).
        let w = vec![
            BitSet::from_indices(3, [0, 1]),
            BitSet::from_indices(3, [0, 1]),
            BitSet::from_indices(3, [2]),
        ];
        assert!(fm.fits(&w));
        assert_eq!(rank(&w), 2);
    }

    #[test]
    fn cap_is_enforced() {
        let ic = ic_from(&[(0, &[1, 2, 3]), (1, &[0, 2, 3]), (2, &[0, 1, 3]), (3, &[0, 1, 2])], 4);
        let fm = build_fitting_matrix(&ic);
        assert_eq!(
            minrank_gf2(&fm, 5),
            Err(CodingError::CapExceeded { what: "free cells", count: 12, cap: 5 })
        );
        assert_eq!(minrank_gf2(&fm, 12).unwrap().rank, 1);
    }

    #[test]
    fn demo_coded_optimum() {
        let inst = demo_instance();
        let plan = optimal_coded_flexible(&inst, DEFAULT_ASSIGNMENT_CAP, DEFAULT_FREE_CAP).unwrap();
        assert_eq!(plan.len(), 2);
        assert!(plan.matrix.fits(&plan.completion));
        for t in &plan.transmissions {
            assert!(t.support.iter().all(|&j| inst.placement.holds(t.sender, j)));
        }
    }

    #[test]
    fn assignment_cap_is_enforced() {
        assert!(matches!(
            optimal_coded_flexible(&demo_instance(), 23, 20),
            Err(CodingError::CapExceeded { what: "assignments", count: 24, .. })
        ));
    }

    /// Each receiver's completion row lies in the span of the transmissions.
    fn decodable(plan: &CodedPlan) -> bool {
        let fm = &plan.matrix;
        let mut span = Basis::new(fm.cols());
        for t in &plan.transmissions {
            span.insert(&BitSet::from_indices(
                fm.cols(),
                t.support.iter().map(|j| fm.columns.iter().position(|c| c == j).unwrap()),
            ));
        }
        plan.completion.iter().all(|row| span.contains(row)) && fm.fits(&plan.completion)
    }

    fn tiny() -> impl Strategy<Value = Instance> {
        (2usize..=7, 1usize..=5, 0.2f64..=0.9, any::<u64>(), 1usize..=3).prop_filter_map("outage", |(m, n, p, seed, k)| {
            let k = k.min(n).min(m * (m - 1) / 2);
            let inst = Instance::new(generate_placement(m, n, p, seed), generate_functions(m, k, m, !seed).ok()?).ok()?;
            inst.absent_messages().is_empty().then_some(inst)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn minrank_matches_enumeration(inst in tiny(), pick in any::<u64>()) {
            let n = inst.n();
            let mut nodes: Vec<usize> = (0..n).collect();
            let rot = (pick as usize) % n;
            nodes.rotate_left(rot);
            let a = Assignment::total(&nodes[..inst.k()], n).unwrap();
            let ic = extract_instance(&inst, &a);
            let fm = build_fitting_matrix(&ic);
            prop_assume!(fm.free_cells().len() <= 12);
            let r = minrank_gf2(&fm, 12).unwrap();
            prop_assert_eq!(r.rank, brute_minrank(&fm));
            prop_assert!(r.rank <= ic.receivers.len());
            prop_assert!(r.rank <= ic.demanded().len());
            prop_assert!(fm.fits(&r.witness));
        }

        #[test]
        fn coded_bounded_by_uncoded(inst in tiny()) {
            let plan = optimal_coded_flexible(&inst, DEFAULT_ASSIGNMENT_CAP, DEFAULT_FREE_CAP).unwrap();
            let tun = tun_exact(&inst, 8).unwrap().size();
            prop_assert!(plan.len() <= tun);
            prop_assert!(decodable(&plan));
        }

        #[test]
        fn more_side_info_never_raises_minrank(inst in tiny(), which in any::<usize>(), msg in any::<usize>()) {
            let n = inst.n();
            let a = Assignment::total(&(0..inst.k()).collect::<Vec<_>>(), n).unwrap();
            let ic = extract_instance(&inst, &a);
            prop_assume!(!ic.is_empty());
            let mut richer = ic.clone();
            let r = which % richer.receivers.len();
            let j = msg % inst.m();
            if j != richer.receivers[r].demand {
                richer.receivers[r].side_info.insert(j);
            }
            let base = build_fitting_matrix(&ic);
            let more = build_fitting_matrix(&richer);
            prop_assume!(more.free_cells().len() <= 14);
            prop_assert!(minrank_gf2(&more, 14).unwrap().rank <= minrank_gf2(&base, 14).unwrap().rank);
        }
    }
}
