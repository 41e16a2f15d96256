use std::io::Write;

use serde_json::{json, Map, Value};

use super::montecarlo::{fixed_node_sets, run_trials, sweep_trial, McConfig, TrialOutcome};
use super::{p_threshold, z95, AnalysisError, MeanEstimate, Proportion};
use crate::numeric::Real;

pub const SWEEP_SCHEMA: u32 = 1;

/// Allocation probabilities to visit for each parameter tuple.
#[derive(Debug, Clone, PartialEq)]
pub enum PGrid<T> {
    Absolute(Vec<T>),
    /// Multiples of `p_threshold(n, K)`, clamped into `[0, 1]`.
    RelativeToThreshold(Vec<T>),
}

impl<T> PGrid<T> {
    fn len(&self) -> usize {
        match self {
            PGrid::Absolute(v) | PGrid::RelativeToThreshold(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec<T> {
    pub ms: Vec<usize>,
    pub ns: Vec<usize>,
    pub ks: Vec<usize>,
    pub ds: Vec<usize>,
    pub p: PGrid<T>,
    pub trials: u64,
    pub seed: u64,
    pub threads: usize,
    /// Designated nodes per function for the fixed-assignment columns.
    pub compare_fixed: Option<usize>,
    /// Also estimate the greedy uncoded shuffle size.
    pub with_tun: bool,
}

/// One row of a sweep. Statistics are `None` when the row failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint<T> {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub p: Option<T>,
    pub p_rel: Option<T>,
    pub trials: u64,
    /// Seed shared by every `p` of this `(m, n, K, d)`.
    pub seed: u64,
    pub no_shuffle: Option<Proportion<T>>,
    pub uncovered: Option<MeanEstimate<T>>,
    /// Over trials without outage.
    pub tun_greedy: Option<MeanEstimate<T>>,
    pub outage: Option<Proportion<T>>,
    pub fixed_nodes: Option<usize>,
    pub fixed_no_shuffle: Option<Proportion<T>>,
    pub fixed_uncoded: Option<MeanEstimate<T>>,
    pub error: Option<String>,
}

fn empty_point<T>(m: usize, n: usize, k: usize, d: usize, trials: u64, seed: u64) -> SweepPoint<T> {
    SweepPoint {
        m,
        n,
        k,
        d,
        p: None,
        p_rel: None,
        trials,
        seed,
        no_shuffle: None,
        uncovered: None,
        tun_greedy: None,
        outage: None,
        fixed_nodes: None,
        fixed_no_shuffle: None,
        fixed_uncoded: None,
        error: None,
    }
}

fn summarize<T: Real>(point: &mut SweepPoint<T>, out: &[TrialOutcome], fixed: bool) {
    let trials = out.len() as u64;
    let z = z95::<T>();
    let count = |f: &dyn Fn(&TrialOutcome) -> bool| out.iter().filter(|o| f(o)).count() as u64;
    point.no_shuffle = Some(Proportion::new(count(&|o| o.uncovered == 0), trials, z));
    point.outage = Some(Proportion::new(count(&|o| o.outage), trials, z));
    point.uncovered = MeanEstimate::from_samples(out.iter().map(|o| T::of_count(o.uncovered as u64)), z);
    point.tun_greedy = MeanEstimate::from_samples(out.iter().filter_map(|o| o.tun_greedy).map(|t| T::of_count(t as u64)), z);
    if fixed {
        point.fixed_no_shuffle = Some(Proportion::new(count(&|o| o.fixed.is_some_and(|f| f.0)), trials, z));
        point.fixed_uncoded = MeanEstimate::from_samples(out.iter().filter_map(|o| o.fixed).map(|f| T::of_count(f.1 as u64)), z);
    }
}

/// Monte Carlo over the grid `ms x ns x ks x ds x p`, in that nesting order.
///
/// The trial seeds of a point depend only on the master seed and the
/// position of `(m, n, K, d)` in the grid, so the rows for different `p`
/// share placements draw for draw.
pub fn sweep<T: Real>(spec: &SweepSpec<T>) -> Result<Vec<SweepPoint<T>>, AnalysisError> {
    if spec.trials == 0 {
        return Err(super::domain("sweep", "at least one trial is required"));
    }
    if spec.p.len() == 0 {
        return Err(super::domain("sweep", "empty p grid"));
    }
    let mut points = Vec::new();
    let mut tuple = 0u64;
    for &m in &spec.ms {
        for &n in &spec.ns {
            for &k in &spec.ks {
                for &d in &spec.ds {
                    let seed = super::derive_seed(spec.seed, tuple);
                    tuple += 1;
                    for idx in 0..spec.p.len() {
                        points.push(sweep_point(spec, (m, n, k, d), idx, seed)?);
                    }
                }
            }
        }
    }
    Ok(points)
}

fn sweep_point<T: Real>(
    spec: &SweepSpec<T>,
    (m, n, k, d): (usize, usize, usize, usize),
    idx: usize,
    seed: u64,
) -> Result<SweepPoint<T>, AnalysisError> {
    let mut point = empty_point(m, n, k, d, spec.trials, seed);
    let p = match &spec.p {
        PGrid::Absolute(v) => Ok(v[idx]),
        PGrid::RelativeToThreshold(v) => {
            point.p_rel = Some(v[idx]);
            p_threshold(T::of_count(n as u64), T::of_count(k as u64)).map(|t| (v[idx] * t).max(T::zero()).min(T::one()))
        }
    };
    let p = match p {
        Ok(p) if p >= T::zero() && p <= T::one() => p,
        Ok(p) => {
            point.error = Some(format!("p = {p} outside [0, 1]"));
            return Ok(point);
        }
        Err(e) => {
            point.error = Some(e.to_string());
            return Ok(point);
        }
    };
    point.p = Some(p);
    let mut blocks = None;
    if let Some(c) = spec.compare_fixed {
        point.fixed_nodes = Some(c);
        match fixed_node_sets(n, &vec![c; k]) {
            Ok(b) => blocks = Some(b),
            Err(e) => point.error = Some(format!("fixed assignment: {e}")),
        }
    }
    let cfg = McConfig {
        trials: spec.trials,
        seed,
        threads: spec.threads,
    };
    let pf = p.as_f64();
    match run_trials(&cfg, |s| sweep_trial((m, n, k, d), pf, s, spec.with_tun, blocks.as_deref())) {
        Ok(out) => summarize(&mut point, &out, blocks.is_some()),
        Err(AnalysisError::ThreadPool(e)) => return Err(AnalysisError::ThreadPool(e)),
        Err(e) => {
            let msg = e.to_string();
            point.error = Some(match point.error.take() {
                Some(prev) => format!("{msg}; {prev}"),
                None => msg,
            });
        }
    }
    Ok(point)
}

/// Six significant digits in the style of C's `%g`; empty for NaN.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&e) {
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        return format!("{mant}e{e}");
    }
    let fixed = format!("{:.*}", (5 - e) as usize, x);
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

enum Field {
    Int(u64),
    Float(f64),
    Text(String),
    Missing,
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) => format_g6(*v),
            Field::Text(s) => s.clone(),
            Field::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Int(v) => json!(v),
            Field::Float(v) => format_g6(*v).parse::<f64>().ok().map_or(Value::Null, |f| json!(f)),
            Field::Text(s) => json!(s),
            Field::Missing => Value::Null,
        }
    }
}

fn opt<T: Real>(x: Option<T>) -> Field {
    x.map_or(Field::Missing, |v| Field::Float(v.as_f64()))
}

impl<T: Real> SweepPoint<T> {
    fn fields(&self, fixed: bool) -> Vec<(&'static str, Field)> {
        let mut f = vec![
            ("schema", Field::Int(SWEEP_SCHEMA as u64)),
            ("m", Field::Int(self.m as u64)),
            ("n", Field::Int(self.n as u64)),
            ("K", Field::Int(self.k as u64)),
            ("d", Field::Int(self.d as u64)),
            ("p", opt(self.p)),
            ("p_rel", opt(self.p_rel)),
            ("trials", Field::Int(self.trials)),
            ("seed", Field::Int(self.seed)),
            ("no_shuffle_fraction", opt(self.no_shuffle.map(|x| x.estimate))),
            ("no_shuffle_fraction_hw", opt(self.no_shuffle.map(|x| x.half_width()))),
            ("mean_uncovered", opt(self.uncovered.map(|x| x.mean))),
            ("mean_uncovered_hw", opt(self.uncovered.map(|x| x.half_width))),
            ("mean_tun_greedy", opt(self.tun_greedy.map(|x| x.mean))),
            ("mean_tun_greedy_hw", opt(self.tun_greedy.map(|x| x.half_width))),
            ("tun_trials", self.tun_greedy.map_or(Field::Missing, |x| Field::Int(x.trials))),
            ("outage_fraction", opt(self.outage.map(|x| x.estimate))),
            ("outage_fraction_hw", opt(self.outage.map(|x| x.half_width()))),
        ];
        if fixed {
            f.extend([
                ("fixed_nodes", self.fixed_nodes.map_or(Field::Missing, |c| Field::Int(c as u64))),
                ("fixed_no_shuffle_fraction", opt(self.fixed_no_shuffle.map(|x| x.estimate))),
                ("fixed_no_shuffle_fraction_hw", opt(self.fixed_no_shuffle.map(|x| x.half_width()))),
                ("fixed_mean_uncoded", opt(self.fixed_uncoded.map(|x| x.mean))),
                ("fixed_mean_uncoded_hw", opt(self.fixed_uncoded.map(|x| x.half_width))),
            ]);
        }
        f.push(("error", self.error.clone().map_or(Field::Missing, Field::Text)));
        f
    }
}

/// CSV with a header row; `fixed` adds the fixed-assignment columns.
pub fn write_csv<T: Real, W: Write>(points: &[SweepPoint<T>], fixed: bool, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    let header: Vec<&str> = empty_point::<T>(0, 0, 0, 0, 0, 0)
        .fields(fixed)
        .iter()
        .map(|(name, _)| *name)
        .collect();
    w.write_record(&header)?;
    for p in points {
        w.write_record(p.fields(fixed).iter().map(|(_, v)| v.csv()))?;
    }
    w.flush()?;
    Ok(())
}

/// `{"schema": 1, "points": [...]}`, pretty-printed.
pub fn to_json<T: Real>(points: &[SweepPoint<T>], fixed: bool) -> String {
    let rows: Vec<Value> = points
        .iter()
        .map(|p| {
            let mut obj = Map::new();
            for (name, v) in p.fields(fixed) {
                if name != "schema" {
                    obj.insert(name.to_string(), v.json());
                }
            }
            Value::Object(obj)
        })
        .collect();
    let doc = json!({ "schema": SWEEP_SCHEMA, "points": rows });
    serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n"
}
