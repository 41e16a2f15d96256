use rayon::prelude::*;

use super::{
    domain, expected_nowhere_covered, z95, AnalysisError, MeanEstimate, Proportion, UncodedExpectation,
};
use crate::coverage::uncovered_count;
use crate::instance::{generate_functions, generate_placement, Instance};
use crate::numeric::Real;
use crate::shuffle::tun_greedy;

/// Trial count, master seed and worker threads (`0` = one per core).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub threads: usize,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self { trials, seed, threads: 0 }
    }

    pub fn with_threads(self, threads: usize) -> Self {
        Self { threads, ..self }
    }
}

/// SplitMix64 finalizer applied to `master` advanced by `index + 1` steps.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f` on every trial seed; results come back in trial order.
pub(crate) fn run_trials<R, F>(cfg: &McConfig, f: F) -> Result<Vec<R>, AnalysisError>
where
    R: Send,
    F: Fn(u64) -> Result<R, AnalysisError> + Sync,
{
    if cfg.trials == 0 {
        return Err(domain("trials", "at least one trial is required"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| AnalysisError::ThreadPool(e.to_string()))?;
    pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| f(derive_seed(cfg.seed, t)))
            .collect()
    })
}

/// Placement and workload drawn from one trial seed.
pub(crate) fn trial_instance(m: usize, n: usize, k: usize, d: usize, p: f64, seed: u64) -> Result<Instance, AnalysisError> {
    let workload = generate_functions(m, k, d, seed)?;
    Ok(Instance::new(generate_placement(m, n, p, seed), workload)?)
}

fn check_p<T: Real>(p: T) -> Result<f64, AnalysisError> {
    let p = p.as_f64();
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(domain("p", format!("{p} outside [0, 1]")))
    }
}

fn count<R>(xs: &[R], pred: impl Fn(&R) -> bool) -> u64 {
    xs.iter().filter(|x| pred(x)).count() as u64
}

/// Fraction of instances whose functions can all be assigned locally.
pub fn mc_no_shuffle_prob<T: Real>(
    m: usize,
    n: usize,
    k: usize,
    d: usize,
    p: T,
    cfg: &McConfig,
) -> Result<Proportion<T>, AnalysisError> {
    let pf = check_p(p)?;
    let ok = run_trials(cfg, |seed| Ok(uncovered_count(&trial_instance(m, n, k, d, pf, seed)?) == 0))?;
    Ok(Proportion::new(count(&ok, |&b| b), cfg.trials, z95()))
}

/// Empirical `P(E[Y] - Y >= a)` next to the bound `exp(-a^2 / 2n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheck<T> {
    pub a: T,
    pub empirical: T,
    /// Standard error of `empirical`.
    pub se: T,
    pub bound: T,
}

impl<T: Real> TailCheck<T> {
    /// `empirical <= bound + k_se * se`.
    pub fn holds(&self, k_se: T) -> bool {
        self.empirical <= self.bound + k_se * self.se
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncoveredStats<T> {
    /// Minimum number of uncovered functions `Y`.
    pub y: MeanEstimate<T>,
    /// `histogram[y]` = number of trials with `Y = y`, for `y` in `0..=K`.
    pub histogram: Vec<u64>,
    /// Functions whose two inputs share no node.
    pub nowhere: MeanEstimate<T>,
    /// `K (1-p^2)^n`, exact for the nowhere count when `d = 1`.
    pub nowhere_expected: T,
    /// Deviations below the sample mean of `Y`.
    pub tails: Vec<TailCheck<T>>,
}

pub fn mc_uncovered_stats<T: Real>(
    m: usize,
    n: usize,
    k: usize,
    d: usize,
    p: T,
    deviations: &[T],
    cfg: &McConfig,
) -> Result<UncoveredStats<T>, AnalysisError> {
    let pf = check_p(p)?;
    if let Some(a) = deviations.iter().find(|a| !(**a > T::zero())) {
        return Err(domain("mc_uncovered_stats", format!("deviation a = {a} must be positive")));
    }
    let samples = run_trials(cfg, |seed| {
        let inst = trial_instance(m, n, k, d, pf, seed)?;
        let holders = crate::coverage::message_holders(&inst);
        let nowhere = inst
            .workload
            .pairs()
            .iter()
            .filter(|pr| !holders[pr.lo].intersects(&holders[pr.hi]))
            .count();
        Ok((uncovered_count(&inst), nowhere))
    })?;
    let mut histogram = vec![0u64; k + 1];
    for &(y, _) in &samples {
        histogram[y] += 1;
    }
    let y = MeanEstimate::from_samples(samples.iter().map(|&(y, _)| T::of_count(y as u64)), z95())
        .expect("at least one trial");
    let nowhere = MeanEstimate::from_samples(samples.iter().map(|&(_, c)| T::of_count(c as u64)), z95())
        .expect("at least one trial");
    let nf = T::of_count(n as u64);
    let tails = deviations
        .iter()
        .map(|&a| {
            let hits = count(&samples, |&(yv, _)| y.mean - T::of_count(yv as u64) >= a);
            let prop = Proportion::<T>::new(hits, cfg.trials, z95());
            TailCheck {
                a,
                empirical: prop.estimate,
                se: prop.se(),
                bound: super::azuma_bound(a, nf),
            }
        })
        .collect();
    Ok(UncoveredStats {
        y,
        histogram,
        nowhere,
        nowhere_expected: expected_nowhere_covered(nf, T::of_count(k as u64), p)?,
        tails,
    })
}

/// Fraction of placements leaving at least one of the `m` messages on no node.
pub fn mc_outage<T: Real>(m: usize, n: usize, p: T, cfg: &McConfig) -> Result<Proportion<T>, AnalysisError> {
    let pf = check_p(p)?;
    let out = run_trials(cfg, |seed| {
        let pl = generate_placement(m, n, pf, seed);
        let mut stored = crate::bits::BitSet::new(m);
        for s in pl.side_infos() {
            stored.union_with(s);
        }
        Ok(stored.count() < m)
    })?;
    Ok(Proportion::new(count(&out, |&b| b), cfg.trials, z95()))
}

/// Node blocks of a fixed assignment: function `k` gets `sizes[k]`
/// consecutive nodes starting where the previous block ended (mod `n`).
/// With uniform size `C` the block of `k` starts at `k * C mod n`.
pub fn fixed_node_sets(n: usize, sizes: &[usize]) -> Result<Vec<Vec<usize>>, AnalysisError> {
    if sizes.contains(&0) {
        return Err(domain("fixed_node_sets", "every function needs at least one node"));
    }
    let total: usize = sizes.iter().sum();
    if total > n {
        return Err(domain(
            "fixed_node_sets",
            format!("{total} designated nodes do not fit disjointly into n = {n}"),
        ));
    }
    let mut start = 0;
    Ok(sizes
        .iter()
        .map(|&c| {
            let block = (start..start + c).map(|i| i % n).collect();
            start += c;
            block
        })
        .collect())
}

/// Outcome of assigning every function to its designated nodes up front.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedStats<T> {
    /// Every function has a designated node storing both inputs.
    pub no_shuffle: Proportion<T>,
    /// Sum over functions of the inputs missing at its best designated node.
    pub uncoded: MeanEstimate<T>,
    /// Closed forms for one designated node per function.
    pub expected: UncodedExpectation<T>,
}

/// `(no shuffle, uncoded transmissions)` of one instance under a fixed assignment.
pub(crate) fn fixed_outcome(inst: &Instance, blocks: &[Vec<usize>]) -> (bool, usize) {
    let pl = &inst.placement;
    let mut all_local = true;
    let mut total = 0;
    for (pair, block) in inst.workload.pairs().iter().zip(blocks) {
        let best = block
            .iter()
            .map(|&i| 2 - pl.holds(i, pair.lo) as usize - pl.holds(i, pair.hi) as usize)
            .min()
            .unwrap_or(2);
        all_local &= best == 0;
        total += best;
    }
    (all_local, total)
}

pub fn mc_fixed<T: Real>(
    m: usize,
    n: usize,
    k: usize,
    d: usize,
    p: T,
    sizes: &[usize],
    cfg: &McConfig,
) -> Result<FixedStats<T>, AnalysisError> {
    let pf = check_p(p)?;
    if sizes.len() != k {
        return Err(domain("mc_fixed", format!("{} block sizes for K = {k}", sizes.len())));
    }
    let blocks = fixed_node_sets(n, sizes)?;
    let out = run_trials(cfg, |seed| Ok(fixed_outcome(&trial_instance(m, n, k, d, pf, seed)?, &blocks)))?;
    Ok(FixedStats {
        no_shuffle: Proportion::new(count(&out, |o| o.0), cfg.trials, z95()),
        uncoded: MeanEstimate::from_samples(out.iter().map(|o| T::of_count(o.1 as u64)), z95())
            .expect("at least one trial"),
        expected: super::expected_uncoded_fixed(T::of_count(k as u64), p)?,
    })
}

/// Per-trial record used by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TrialOutcome {
    pub outage: bool,
    pub uncovered: usize,
    pub tun_greedy: Option<usize>,
    pub fixed: Option<(bool, usize)>,
}

pub(crate) fn sweep_trial(
    (m, n, k, d): (usize, usize, usize, usize),
    p: f64,
    seed: u64,
    with_tun: bool,
    fixed: Option<&[Vec<usize>]>,
) -> Result<TrialOutcome, AnalysisError> {
    let inst = trial_instance(m, n, k, d, p, seed)?;
    let outage = !inst.absent_messages().is_empty();
    let uncovered = uncovered_count(&inst);
    let tun_greedy = match (with_tun, outage, uncovered) {
        (false, _, _) | (_, true, _) => None,
        (true, false, 0) => Some(0),
        (true, false, _) => Some(tun_greedy(&inst).map_err(|e| domain("tun_greedy", e.to_string()))?.size()),
    };
    Ok(TrialOutcome {
        outage,
        uncovered,
        tun_greedy,
        fixed: fixed.map(|b| fixed_outcome(&inst, b)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
    }

    #[test]
    fn extremes_of_no_shuffle() {
        let cfg = McConfig::new(50, 1);
        assert_eq!(mc_no_shuffle_prob(10, 8, 5, 2, 1.0f64, &cfg).unwrap().estimate, 1.0);
        assert_eq!(mc_no_shuffle_prob(10, 8, 5, 2, 0.0f64, &cfg).unwrap().estimate, 0.0);
    }

    #[test]
    fn zero_p_leaves_everything_uncovered() {
        let s = mc_uncovered_stats(20, 10, 6, 1, 0.0f64, &[1.0], &McConfig::new(30, 2)).unwrap();
        assert_eq!(s.y.mean, 6.0);
        assert_eq!(s.y.sd, 0.0);
        assert_eq!(s.histogram[6], 30);
        assert_eq!(s.tails[0].empirical, 0.0);
    }

    #[test]
    fn outage_extremes() {
        let cfg = McConfig::new(40, 3);
        assert_eq!(mc_outage(10, 5, 1.0f64, &cfg).unwrap().estimate, 0.0);
        assert_eq!(mc_outage(10, 5, 0.0f64, &cfg).unwrap().estimate, 1.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let a = mc_uncovered_stats(30, 20, 10, 2, 0.2f64, &[1.0, 2.0], &McConfig::new(200, 9).with_threads(1)).unwrap();
        let b = mc_uncovered_stats(30, 20, 10, 2, 0.2f64, &[1.0, 2.0], &McConfig::new(200, 9).with_threads(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_blocks() {
        assert_eq!(fixed_node_sets(6, &[2, 2, 2]).unwrap(), vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        assert_eq!(fixed_node_sets(5, &[1, 3]).unwrap(), vec![vec![0], vec![1, 2, 3]]);
        assert!(fixed_node_sets(5, &[2, 2, 2]).is_err());
        assert!(fixed_node_sets(5, &[0]).is_err());
    }

    #[test]
    fn coupled_estimates_rise_with_p() {
        // Trials reuse their seeds across p, so placements are nested.
        let cfg = McConfig::new(200, 11);
        let mut last = 0.0;
        for p in [0.1, 0.2, 0.3, 0.4, 0.6, 0.8] {
            let q = mc_no_shuffle_prob(20, 20, 8, 2, p, &cfg).unwrap().estimate;
            assert!(q >= last, "{q} < {last} at p = {p}");
            last = q;
            let f = mc_fixed(20, 20, 8, 2, p, &[1; 8], &cfg).unwrap();
            assert!(f.no_shuffle.estimate <= q);
        }
    }

    #[test]
    fn fixed_single_node_matches_exact_expectation() {
        let f = mc_fixed(40, 20, 20, 1, 0.5f64, &[1; 20], &McConfig::new(2000, 5)).unwrap();
        assert!((f.uncoded.mean - f.expected.exact_value).abs() <= 4.0 * f.uncoded.se);
    }
}
