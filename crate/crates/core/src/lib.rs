//! Flexible function assignment and data shuffling over random data
//! placements.
//!
//! Messages are stored on nodes at random; each two-input function is then
//! assigned to a distinct node. [`coverage`] finds assignments that need no
//! communication, [`shuffle`] and [`coding`] size the broadcast phase when
//! one is needed, [`exec`] runs plans on real payloads, and [`analysis`]
//! holds the closed forms and Monte Carlo estimators.

pub mod analysis;
pub mod bits;
pub mod cli;
pub mod coding;
pub mod coverage;
pub mod exec;
pub mod gf2;
pub mod hungarian;
pub mod instance;
pub mod numeric;
pub mod shuffle;

pub use bits::BitSet;
pub use coding::{optimal_coded_flexible, CodedPlan, CodingError};
pub use coverage::{max_matching, uncovered_count, Assignment, CoverageGraph};
pub use exec::{run_demo, run_plan, ExecError, ShufflePlan, Transcript};
pub use instance::{generate_functions, generate_placement, FunctionSet, Instance, InstanceError, Pair, Placement};
pub use numeric::Real;
pub use shuffle::{tprime_un, tun_exact, tun_greedy, ShuffleError, UncodedPlan};

/// Default scalar for statistics.
pub type Scalar = f64;
pub type Proportion = analysis::Proportion<Scalar>;
pub type MeanEstimate = analysis::MeanEstimate<Scalar>;
pub type TailCheck = analysis::TailCheck<Scalar>;
pub type UncoveredStats = analysis::UncoveredStats<Scalar>;
pub type FixedStats = analysis::FixedStats<Scalar>;
pub type UncodedExpectation = analysis::UncodedExpectation<Scalar>;
pub type SweepSpec = analysis::SweepSpec<Scalar>;
pub type SweepPoint = analysis::SweepPoint<Scalar>;
pub type PGrid = analysis::PGrid<Scalar>;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED;
