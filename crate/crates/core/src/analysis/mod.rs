//! Closed-form thresholds and expectations, and Monte Carlo estimators over
//! random instances.
//!
//! Logarithms are natural. Probabilities derived from asymptotic
//! thresholds are clamped into `[0, 1]`.

mod montecarlo;
mod sweep;

use thiserror::Error;

use crate::instance::InstanceError;
use crate::numeric::Real;

pub use montecarlo::{
    derive_seed, fixed_node_sets, mc_fixed, mc_no_shuffle_prob, mc_outage, mc_uncovered_stats, FixedStats, McConfig,
    TailCheck, UncoveredStats,
};
pub use sweep::{format_g6, sweep, to_json, write_csv, PGrid, SweepPoint, SweepSpec, SWEEP_SCHEMA};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },
    #[error(transparent)]
    Generation(#[from] InstanceError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

fn domain(what: &'static str, detail: impl Into<String>) -> AnalysisError {
    AnalysisError::Domain {
        what,
        detail: detail.into(),
    }
}

fn clamp01<T: Real>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

fn check_probability<T: Real>(what: &'static str, p: T) -> Result<(), AnalysisError> {
    if p >= T::zero() && p <= T::one() {
        Ok(())
    } else {
        Err(domain(what, format!("p = {p} outside [0, 1]")))
    }
}

/// `sqrt(ln K / n)`, at most 1.
pub fn p_threshold<T: Real>(n: T, k: T) -> Result<T, AnalysisError> {
    if !(k >= T::of_count(2)) {
        return Err(domain("p_threshold", format!("K = {k} < 2")));
    }
    if !(n >= T::one()) {
        return Err(domain("p_threshold", format!("n = {n} < 1")));
    }
    Ok(clamp01((k.ln() / n).sqrt()))
}

/// `ln m / n`, at most 1.
pub fn p_outage<T: Real>(m: T, n: T) -> Result<T, AnalysisError> {
    if !(m >= T::of_count(2)) {
        return Err(domain("p_outage", format!("m = {m} < 2")));
    }
    if !(n > T::zero()) {
        return Err(domain("p_outage", format!("n = {n} <= 0")));
    }
    Ok(clamp01(m.ln() / n))
}

/// Probability that at least one of `m` messages is stored nowhere:
/// `1 - (1 - (1-p)^n)^m`.
pub fn p_miss_exact<T: Real>(m: T, n: T, p: T) -> Result<T, AnalysisError> {
    check_probability("p_miss_exact", p)?;
    let nowhere = (T::one() - p).powf(n);
    Ok(T::one() - (T::one() - nowhere).powf(m))
}

/// `1 - (ln K / K)^(1/C)` for a fixed assignment with `C` nodes per function.
pub fn p_threshold_fixed<T: Real>(k: T, c: T) -> Result<T, AnalysisError> {
    if !(k >= T::of_count(2)) {
        return Err(domain("p_threshold_fixed", format!("K = {k} < 2")));
    }
    if !(c >= T::one()) {
        return Err(domain("p_threshold_fixed", format!("C = {c} < 1")));
    }
    let ratio = k.ln() / k;
    // ln K / K peaks at 1/e, so this only guards non-finite input.
    if !(ratio < T::one()) {
        return Err(domain("p_threshold_fixed", format!("ln K / K = {ratio} >= 1")));
    }
    Ok(clamp01(T::one() - ratio.powf(c.recip())))
}

/// Expected raw transmissions when every function has one designated node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncodedExpectation<T> {
    /// `K (2 - 2p + p^2)`, from outcome probabilities that sum to `1 + p^2`.
    pub unnormalized_value: T,
    /// `2K (1 - p)`: each input is missing independently with probability `1 - p`.
    pub exact_value: T,
}

impl<T: Real> UncodedExpectation<T> {
    pub fn discrepancy(&self) -> T {
        self.unnormalized_value - self.exact_value
    }
}

pub fn expected_uncoded_fixed<T: Real>(k: T, p: T) -> Result<UncodedExpectation<T>, AnalysisError> {
    check_probability("expected_uncoded_fixed", p)?;
    let two = T::of_count(2);
    Ok(UncodedExpectation {
        unnormalized_value: k * (two - two * p + p * p),
        exact_value: two * k * (T::one() - p),
    })
}

/// `K (1-p^2)^n`: expected number of functions no node can compute locally
/// when the pairs are disjoint.
pub fn expected_nowhere_covered<T: Real>(n: T, k: T, p: T) -> Result<T, AnalysisError> {
    check_probability("expected_nowhere_covered", p)?;
    Ok(k * (T::one() - p * p).powf(n))
}

/// Union bound `K (1-p^2)^(n-K)` on the probability that shuffling is needed.
pub fn no_shuffle_failure_bound<T: Real>(n: T, k: T, p: T) -> Result<T, AnalysisError> {
    check_probability("no_shuffle_failure_bound", p)?;
    if k > n {
        return Err(domain("no_shuffle_failure_bound", format!("K = {k} > n = {n}")));
    }
    Ok(k * (T::one() - p * p).powf(n - k))
}

/// `exp(-a^2 / 2n)`.
pub fn azuma_bound<T: Real>(a: T, n: T) -> T {
    (-(a * a) / (T::of_count(2) * n)).exp()
}

/// Normal quantile for two-sided 95% intervals.
pub fn z95<T: Real>() -> T {
    T::of_f64(1.959_963_984_540_054)
}

/// Binomial proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion<T> {
    pub successes: u64,
    pub trials: u64,
    pub estimate: T,
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Proportion<T> {
    pub fn new(successes: u64, trials: u64, z: T) -> Self {
        assert!(trials > 0 && successes <= trials);
        let (lo, hi) = wilson_interval(successes, trials, z);
        Self {
            successes,
            trials,
            estimate: T::of_count(successes) / T::of_count(trials),
            lo,
            hi,
        }
    }

    /// Plug-in standard error `sqrt(q(1-q)/N)`.
    pub fn se(&self) -> T {
        (self.estimate * (T::one() - self.estimate) / T::of_count(self.trials)).sqrt()
    }

    pub fn half_width(&self) -> T {
        (self.hi - self.lo) / T::of_count(2)
    }
}

pub fn wilson_interval<T: Real>(successes: u64, trials: u64, z: T) -> (T, T) {
    let n = T::of_count(trials);
    let q = T::of_count(successes) / n;
    let z2 = z * z;
    let two = T::of_count(2);
    let four = T::of_count(4);
    let denom = T::one() + z2 / n;
    let centre = (q + z2 / (two * n)) / denom;
    let spread = z * (q * (T::one() - q) / n + z2 / (four * n * n)).sqrt() / denom;
    let lo = if successes == 0 { T::zero() } else { clamp01(centre - spread) };
    let hi = if successes == trials { T::one() } else { clamp01(centre + spread) };
    (lo, hi)
}

/// Sample mean with a normal interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate<T> {
    pub trials: u64,
    pub mean: T,
    /// Sample standard deviation (`N - 1` denominator).
    pub sd: T,
    pub se: T,
    pub half_width: T,
}

impl<T: Real> MeanEstimate<T> {
    pub fn from_samples<I: IntoIterator<Item = T>>(samples: I, z: T) -> Option<Self> {
        let xs: Vec<T> = samples.into_iter().collect();
        let n = xs.len() as u64;
        if n == 0 {
            return None;
        }
        let nf = T::of_count(n);
        let mean = xs.iter().fold(T::zero(), |a, &x| a + x) / nf;
        let ss = xs.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean));
        let sd = if n > 1 { (ss / T::of_count(n - 1)).sqrt() } else { T::zero() };
        let se = sd / nf.sqrt();
        Some(Self {
            trials: n,
            mean,
            sd,
            se,
            half_width: z * se,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn thresholds() {
        assert!(close(p_threshold(4.0, E).unwrap(), 0.5, 1e-12));
        assert!(close(p_threshold(100.0, E.powi(4)).unwrap(), 0.2, 1e-12));
        assert!(close(p_threshold(200.0, 100.0).unwrap(), 0.151_743, 1e-6));
        assert_eq!(p_threshold(1.0, 1e6).unwrap(), 1.0);
        assert!(p_threshold(10.0, 1.5).is_err());
    }

    #[test]
    fn outage_probabilities() {
        assert!(close(p_outage(E, 10.0).unwrap(), 0.1, 1e-12));
        assert!(close(p_outage(100.0, 1000.0).unwrap(), 0.004_605_17, 1e-8));
        assert!(close(p_outage(2.0, 1.0).unwrap(), 2f64.ln(), 1e-12));
        assert!(p_outage(1.0, 5.0).is_err());
        assert_eq!(p_miss_exact(7.0, 3.0, 1.0).unwrap(), 0.0);
        assert_eq!(p_miss_exact(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(close(p_miss_exact(10.0, 20.0, 0.2).unwrap(), 0.109_491, 1e-6));
        assert!(p_miss_exact(10.0, 20.0, 1.2).is_err());
    }

    #[test]
    fn miss_probability_matches_enumeration() {
        // All 2^(m n) placements of a 2 x 3 grid.
        let (m, n, p) = (2usize, 3usize, 0.3f64);
        let mut total = 0.0;
        for mask in 0u32..(1 << (m * n)) {
            let ones = mask.count_ones() as i32;
            let prob = p.powi(ones) * (1.0 - p).powi((m * n) as i32 - ones);
            let missing = (0..m).any(|j| (0..n).all(|i| mask & (1 << (i * m + j)) == 0));
            if missing {
                total += prob;
            }
        }
        assert!(close(p_miss_exact(m as f64, n as f64, p).unwrap(), total, 1e-12));
    }

    #[test]
    fn fixed_thresholds() {
        assert!(close(p_threshold_fixed(100.0, 1.0).unwrap(), 0.953_948, 1e-6));
        assert!(close(p_threshold_fixed(100.0, 2.0).unwrap(), 0.785_403, 1e-6));
        assert!(p_threshold_fixed(1e12, 1.0).unwrap() > 0.999_999_99);
        assert!(p_threshold_fixed(1.0, 1.0).is_err());
        assert!(p_threshold_fixed(10.0, 0.5).is_err());
    }

    #[test]
    fn uncoded_expectations() {
        let e = expected_uncoded_fixed(10.0, 0.0).unwrap();
        assert_eq!((e.unnormalized_value, e.exact_value), (20.0, 20.0));
        let e = expected_uncoded_fixed(10.0, 1.0).unwrap();
        assert_eq!((e.unnormalized_value, e.exact_value), (10.0, 0.0));
        let e = expected_uncoded_fixed(10.0, 0.5).unwrap();
        assert_eq!((e.unnormalized_value, e.exact_value), (12.5, 10.0));
        assert_eq!(e.discrepancy(), 2.5);
    }

    #[test]
    fn exact_value_matches_enumeration() {
        // Both inputs at one node: four outcomes with weights p, 1-p.
        let p = 0.37f64;
        let mut expect = 0.0;
        for a in [false, true] {
            for b in [false, true] {
                let w = (if a { p } else { 1.0 - p }) * (if b { p } else { 1.0 - p });
                expect += w * ((!a) as u8 + (!b) as u8) as f64;
            }
        }
        assert!(close(expected_uncoded_fixed(1.0, p).unwrap().exact_value, expect, 1e-12));
    }

    #[test]
    fn generic_in_f32() {
        let t: f32 = p_threshold(4.0f32, std::f32::consts::E).unwrap();
        assert!((t - 0.5).abs() < 1e-6);
        let e = expected_uncoded_fixed(10.0f32, 0.5).unwrap();
        assert_eq!(e.exact_value, 10.0f32);
    }

    #[test]
    fn wilson_edges() {
        let all = Proportion::<f64>::new(50, 50, z95());
        assert_eq!(all.hi, 1.0);
        assert!(all.lo > 0.9 && all.lo < 1.0);
        let none = Proportion::<f64>::new(0, 50, z95());
        assert_eq!(none.lo, 0.0);
        assert!(none.hi > 0.0 && none.hi < 0.1);
        // Reference value for 7 of 20 at 95%: (0.1812, 0.5671).
        let (lo, hi) = wilson_interval::<f64>(7, 20, z95());
        assert!(close(lo, 0.1812, 1e-4) && close(hi, 0.5671, 1e-4));
    }

    #[test]
    fn mean_estimate() {
        let e = MeanEstimate::<f64>::from_samples([1.0, 2.0, 3.0, 4.0], z95()).unwrap();
        assert_eq!(e.mean, 2.5);
        assert!(close(e.sd, (5.0f64 / 3.0).sqrt(), 1e-12));
        assert!(close(e.se, e.sd / 2.0, 1e-12));
        assert!(MeanEstimate::<f64>::from_samples([], z95()).is_none());
    }

    #[test]
    fn bounds() {
        assert!(close(azuma_bound(10.0, 100.0), (-0.5f64).exp(), 1e-12));
        assert!(close(
            expected_nowhere_covered(100.0, 50.0, 0.05).unwrap(),
            50.0 * 0.9975f64.powi(100),
            1e-9
        ));
        assert!(no_shuffle_failure_bound(10.0, 20.0, 0.5).is_err());
    }
}
