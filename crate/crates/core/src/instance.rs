//! Problem instances: random message placement plus a two-input workload.
//!
//! Messages and nodes are 0-based. A [`Placement`] records which messages
//! each node holds (its side information); a [`FunctionSet`] lists the
//! unordered message pairs whose functions must be computed.
//!
//! # Text format
//!
//! ```text
//! flexshuffle-instance schema=1
//! m 6
//! n 4
//! K 3
//! d 2
//! p 1
//! seed 0
//! node 0: 0 2 4
//! node 1: 1 3 5
//! node 2: 1 4 5
//! node 3: 0 2 3
//! func 0: 0 1
//! func 1: 1 2
//! func 2: 3 4
//! ```
//!
//! The first non-comment line is the header. Then the scalar fields `m`, `n`,
//! `K`, `d`, `p`, `seed` in that order, one per line; then exactly `n` node
//! lines numbered `0..n` listing the held message indices in ascending order
//! (possibly none); then exactly `K` function lines numbered `0..K`, each with
//! two message indices, smaller first. Blank lines and lines starting with `#`
//! are ignored. `p` is written in shortest round-trip decimal form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bits::BitSet;

pub const FORMAT_HEADER: &str = "flexshuffle-instance schema=1";

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("infeasible workload: {0}")]
    Infeasible(String),
    #[error("line {line}: field `{field}`: {reason}")]
    Parse {
        line: usize,
        field: String,
        reason: String,
    },
    #[error("line {line}: message index {index} out of range (m = {m})")]
    OutOfRange { line: usize, index: usize, m: usize },
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which messages each node holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    m: usize,
    n: usize,
    side_info: Vec<BitSet>,
    /// Allocation probability the placement was drawn with (metadata only).
    pub p: f64,
    /// Generator seed (metadata only).
    pub seed: u64,
}

impl Placement {
    /// Builds a placement from explicit side-information lists.
    pub fn from_sets<S: AsRef<[usize]>>(
        m: usize,
        side_info: &[S],
        p: f64,
        seed: u64,
    ) -> Result<Self, InstanceError> {
        let mut sets = Vec::with_capacity(side_info.len());
        for (i, s) in side_info.iter().enumerate() {
            let mut set = BitSet::new(m);
            for &j in s.as_ref() {
                if j >= m {
                    return Err(InstanceError::Invariant {
                        invariant: "message_index_in_range",
                        detail: format!("node {i} holds message {j} but m = {m}"),
                    });
                }
                set.insert(j);
            }
            sets.push(set);
        }
        Ok(Self {
            m,
            n: sets.len(),
            side_info: sets,
            p,
            seed,
        })
    }

    pub(crate) fn from_bitsets(m: usize, side_info: Vec<BitSet>, p: f64, seed: u64) -> Self {
        debug_assert!(side_info.iter().all(|s| s.len() == m));
        Self {
            m,
            n: side_info.len(),
            side_info,
            p,
            seed,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Side information `S_i` of node `i`.
    pub fn side_info(&self, node: usize) -> &BitSet {
        &self.side_info[node]
    }

    pub fn side_infos(&self) -> &[BitSet] {
        &self.side_info
    }

    pub fn holds(&self, node: usize, message: usize) -> bool {
        self.side_info[node].contains(message)
    }

    /// Nodes holding `message`.
    pub fn holders(&self, message: usize) -> BitSet {
        BitSet::from_indices(
            self.n,
            (0..self.n).filter(|&i| self.side_info[i].contains(message)),
        )
    }

    /// Lowest-index node holding `message`.
    pub fn first_holder(&self, message: usize) -> Option<usize> {
        (0..self.n).find(|&i| self.side_info[i].contains(message))
    }

    pub fn total_cardinality(&self) -> usize {
        self.side_info.iter().map(BitSet::count).sum()
    }

    /// Copy with `message` added to `node`'s side information.
    pub fn with_message(&self, node: usize, message: usize) -> Self {
        let mut out = self.clone();
        out.side_info[node].insert(message);
        out
    }

    /// Copy with `node` removed; higher node indices shift down by one.
    pub fn without_node(&self, node: usize) -> Self {
        let mut out = self.clone();
        out.side_info.remove(node);
        out.n -= 1;
        out
    }

    /// Copy with an extra node holding `messages`.
    pub fn with_node(&self, messages: &[usize]) -> Self {
        let mut out = self.clone();
        out.side_info
            .push(BitSet::from_indices(self.m, messages.iter().copied()));
        out.n += 1;
        out
    }

    /// Copy with nodes relabeled so that new node `perm[i]` is old node `i`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let mut sets = vec![BitSet::new(self.m); self.n];
        for (old, &new) in perm.iter().enumerate() {
            sets[new] = self.side_info[old].clone();
        }
        Self::from_bitsets(self.m, sets, self.p, self.seed)
    }
}

/// An unordered pair of distinct message indices, stored smaller first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub lo: usize,
    pub hi: usize,
}

impl Pair {
    /// `None` when `a == b`.
    pub fn new(a: usize, b: usize) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Self { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Some(Self { lo: b, hi: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn inputs(self) -> [usize; 2] {
        [self.lo, self.hi]
    }

    pub fn contains(self, j: usize) -> bool {
        self.lo == j || self.hi == j
    }
}

/// The two-input workload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSet {
    functions: Vec<Pair>,
    cap: usize,
}

impl FunctionSet {
    /// Validates the workload invariants against a message count.
    pub fn new(m: usize, functions: Vec<Pair>, cap: usize) -> Result<Self, InstanceError> {
        let fs = Self { functions, cap };
        fs.validate(m)?;
        Ok(fs)
    }

    fn validate(&self, m: usize) -> Result<(), InstanceError> {
        let k = self.functions.len();
        if k > m * m.saturating_sub(1) / 2 {
            return Err(InstanceError::Invariant {
                invariant: "pair_count_bound",
                detail: format!("K = {k} exceeds m(m-1)/2 for m = {m}"),
            });
        }
        let mut seen = std::collections::HashSet::new();
        let mut mult = vec![0usize; m];
        for (idx, f) in self.functions.iter().enumerate() {
            if f.lo >= f.hi {
                return Err(InstanceError::Invariant {
                    invariant: "pair_distinct_inputs",
                    detail: format!("function {idx} has inputs {} and {}", f.lo, f.hi),
                });
            }
            if f.hi >= m {
                return Err(InstanceError::Invariant {
                    invariant: "message_index_in_range",
                    detail: format!("function {idx} uses message {} but m = {m}", f.hi),
                });
            }
            if !seen.insert(*f) {
                return Err(InstanceError::Invariant {
                    invariant: "pairs_distinct",
                    detail: format!("function {idx} repeats pair {{{}, {}}}", f.lo, f.hi),
                });
            }
            for j in f.inputs() {
                mult[j] += 1;
                if mult[j] > self.cap {
                    return Err(InstanceError::Invariant {
                        invariant: "multiplicity_cap",
                        detail: format!("message {j} appears in more than d = {} functions", self.cap),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.functions
    }

    pub fn pair(&self, k: usize) -> Pair {
        self.functions[k]
    }

    /// Multiplicity cap `d`.
    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Largest number of functions any single message appears in.
    pub fn observed_multiplicity(&self) -> usize {
        let mut counts = std::collections::HashMap::new();
        for f in &self.functions {
            for j in f.inputs() {
                *counts.entry(j).or_insert(0usize) += 1;
            }
        }
        counts.values().copied().max().unwrap_or(0)
    }
}

/// Placement plus workload.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub placement: Placement,
    pub workload: FunctionSet,
}

impl Instance {
    pub fn new(placement: Placement, workload: FunctionSet) -> Result<Self, InstanceError> {
        workload.validate(placement.m())?;
        Ok(Self {
            placement,
            workload,
        })
    }

    pub fn m(&self) -> usize {
        self.placement.m()
    }

    pub fn n(&self) -> usize {
        self.placement.n()
    }

    pub fn k(&self) -> usize {
        self.workload.len()
    }

    /// Messages some function depends on.
    pub fn needed_messages(&self) -> BitSet {
        BitSet::from_indices(
            self.m(),
            self.workload.pairs().iter().flat_map(|p| p.inputs()),
        )
    }

    /// Needed messages that no node holds, ascending.
    pub fn absent_messages(&self) -> Vec<usize> {
        let mut held = BitSet::new(self.m());
        for s in self.placement.side_infos() {
            held.union_with(s);
        }
        let mut missing = self.needed_messages();
        missing.difference_with(&held);
        missing.iter().collect()
    }

    /// Same workload over a different placement.
    pub fn with_placement(&self, placement: Placement) -> Self {
        Self {
            placement,
            workload: self.workload.clone(),
        }
    }
}

/// Draws every (node, message) membership as an independent Bernoulli(p).
///
/// Cells are visited node-major; cell `(i, j)` is set iff its uniform draw
/// is below `p`, so placements with the same seed are nested in `p`.
pub fn generate_placement(m: usize, n: usize, p: f64, seed: u64) -> Placement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side_info = (0..n)
        .map(|_| {
            let mut s = BitSet::new(m);
            for j in 0..m {
                if rng.gen::<f64>() < p {
                    s.insert(j);
                }
            }
            s
        })
        .collect();
    Placement::from_bitsets(m, side_info, p, seed)
}

/// The six-message, four-node placement of the common-friends example
/// (messages A..F are 0..5).
pub fn demo_placement() -> Placement {
    Placement::from_sets(6, &[[0, 2, 4], [1, 3, 5], [1, 4, 5], [0, 2, 3]], 0.5, 0)
        .expect("demo placement is valid")
}

/// `{A,B}, {B,C}, {D,E}`.
pub fn demo_functions() -> FunctionSet {
    let pairs = [(0, 1), (1, 2), (3, 4)]
        .iter()
        .map(|&(a, b)| Pair::new(a, b).unwrap())
        .collect();
    FunctionSet::new(6, pairs, 2).expect("demo workload is valid")
}

pub fn demo_instance() -> Instance {
    Instance::new(demo_placement(), demo_functions()).expect("demo instance is valid")
}

const RESTART_FACTOR: usize = 1000;

/// Draws `k` distinct pairs with per-message multiplicity at most `cap`.
///
/// Rejection sampling: a draw is rejected if its two messages coincide, the
/// pair was already taken, or either message is at its cap. After
/// `1000 * k` rejections in a row the partial set is discarded and sampling
/// restarts.
pub fn generate_functions(m: usize, k: usize, cap: usize, seed: u64) -> Result<FunctionSet, InstanceError> {
    if cap == 0 && k > 0 {
        return Err(InstanceError::Infeasible("multiplicity cap d must be at least 1".into()));
    }
    if k > m * m.saturating_sub(1) / 2 {
        return Err(InstanceError::Infeasible(format!(
            "K = {k} exceeds the {} distinct pairs over m = {m} messages",
            m * m.saturating_sub(1) / 2
        )));
    }
    if cap.saturating_mul(m) < 2 * k {
        return Err(InstanceError::Infeasible(format!(
            "K = {k} functions need {} message slots but d*m = {}",
            2 * k,
            cap * m
        )));
    }
    // Distinct stream from the placement generator for the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let max_failures = RESTART_FACTOR * k.max(1);
    'restart: loop {
        let mut taken = std::collections::HashSet::with_capacity(k);
        let mut pairs = Vec::with_capacity(k);
        let mut mult = vec![0usize; m];
        let mut failures = 0usize;
        while pairs.len() < k {
            let a = rng.gen_range(0..m);
            let b = rng.gen_range(0..m);
            let ok = match Pair::new(a, b) {
                Some(pair) if mult[a] < cap && mult[b] < cap && !taken.contains(&pair) => {
                    taken.insert(pair);
                    pairs.push(pair);
                    mult[a] += 1;
                    mult[b] += 1;
                    true
                }
                _ => false,
            };
            if !ok {
                failures += 1;
                if failures >= max_failures {
                    continue 'restart;
                }
            } else {
                failures = 0;
            }
        }
        return FunctionSet::new(m, pairs, cap);
    }
}

/// Serializes an instance to the text format described in the module docs.
pub fn to_text(instance: &Instance) -> String {
    let pl = &instance.placement;
    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_HEADER}");
    let _ = writeln!(out, "m {}", pl.m());
    let _ = writeln!(out, "n {}", pl.n());
    let _ = writeln!(out, "K {}", instance.k());
    let _ = writeln!(out, "d {}", instance.workload.cap());
    let _ = writeln!(out, "p {}", pl.p);
    let _ = writeln!(out, "seed {}", pl.seed);
    for (i, s) in pl.side_infos().iter().enumerate() {
        let _ = write!(out, "node {i}:");
        for j in s.iter() {
            let _ = write!(out, " {j}");
        }
        out.push('\n');
    }
    for (k, f) in instance.workload.pairs().iter().enumerate() {
        let _ = writeln!(out, "func {k}: {} {}", f.lo, f.hi);
    }
    out
}

fn parse_err(line: usize, field: &str, reason: impl Into<String>) -> InstanceError {
    InstanceError::Parse {
        line,
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, field: &str, tok: &str) -> Result<T, InstanceError> {
    tok.parse()
        .map_err(|_| parse_err(line, field, format!("cannot parse `{tok}`")))
}

/// Parses the text format; see the module docs for the grammar.
pub fn from_text(text: &str) -> Result<Instance, InstanceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "header", "empty input"))?;
    if header != FORMAT_HEADER {
        return Err(parse_err(ln, "header", format!("expected `{FORMAT_HEADER}`")));
    }

    let mut scalar = |name: &str| -> Result<(usize, String), InstanceError> {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, name, "unexpected end of input"))?;
        let mut it = l.split_whitespace();
        let key = it.next().unwrap_or_default();
        if key != name {
            return Err(parse_err(ln, name, format!("expected `{name}`, found `{key}`")));
        }
        let val = it
            .next()
            .ok_or_else(|| parse_err(ln, name, "missing value"))?;
        if it.next().is_some() {
            return Err(parse_err(ln, name, "trailing tokens"));
        }
        Ok((ln, val.to_string()))
    };

    let (l_m, v) = scalar("m")?;
    let m: usize = parse_num(l_m, "m", &v)?;
    let (l_n, v) = scalar("n")?;
    let n: usize = parse_num(l_n, "n", &v)?;
    let (l_k, v) = scalar("K")?;
    let k: usize = parse_num(l_k, "K", &v)?;
    let (l_d, v) = scalar("d")?;
    let d: usize = parse_num(l_d, "d", &v)?;
    let (l_p, v) = scalar("p")?;
    let p: f64 = parse_num(l_p, "p", &v)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(parse_err(l_p, "p", "must lie in [0, 1]"));
    }
    let (l_s, v) = scalar("seed")?;
    let seed: u64 = parse_num(l_s, "seed", &v)?;

    let mut indexed_line = |kind: &str, expected: usize| -> Result<(usize, Vec<usize>), InstanceError> {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, kind, format!("missing `{kind} {expected}` line")))?;
        let (head, rest) = l
            .split_once(':')
            .ok_or_else(|| parse_err(ln, kind, "missing `:`"))?;
        let mut h = head.split_whitespace();
        if h.next() != Some(kind) {
            return Err(parse_err(ln, kind, format!("expected `{kind} {expected}:`")));
        }
        let idx: usize = parse_num(ln, kind, h.next().unwrap_or_default())?;
        if idx != expected || h.next().is_some() {
            return Err(parse_err(ln, kind, format!("expected index {expected}")));
        }
        let vals = rest
            .split_whitespace()
            .map(|t| parse_num::<usize>(ln, kind, t))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(&bad) = vals.iter().find(|&&j| j >= m) {
            return Err(InstanceError::OutOfRange { line: ln, index: bad, m });
        }
        Ok((ln, vals))
    };

    let mut side_info = Vec::with_capacity(n);
    for i in 0..n {
        let (ln, vals) = indexed_line("node", i)?;
        if vals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(parse_err(ln, "node", "message indices must be strictly ascending"));
        }
        side_info.push(BitSet::from_indices(m, vals));
    }
    let mut pairs = Vec::with_capacity(k);
    for idx in 0..k {
        let (ln, vals) = indexed_line("func", idx)?;
        if vals.len() != 2 {
            return Err(parse_err(ln, "func", "expected exactly two message indices"));
        }
        let pair = Pair::new(vals[0], vals[1]).ok_or_else(|| InstanceError::Invariant {
            invariant: "pair_distinct_inputs",
            detail: format!("line {ln}: function {idx} has both inputs equal to {}", vals[0]),
        })?;
        if vals[0] > vals[1] {
            return Err(parse_err(ln, "func", "smaller message index must come first"));
        }
        pairs.push(pair);
    }
    if let Some((ln, l)) = lines.next() {
        return Err(parse_err(ln, "trailer", format!("unexpected line `{l}`")));
    }
    let placement = Placement::from_bitsets(m, side_info, p, seed);
    let workload = FunctionSet::new(m, pairs, d)?;
    Instance::new(placement, workload)
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    fs::write(path, to_text(instance))?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    from_text(&fs::read_to_string(path)?)
}
