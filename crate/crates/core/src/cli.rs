//! The `flexshuffle` command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O or other failure |
//! | 2 | usage error (bad flag, bad config, parameter out of range) |
//! | 3 | infeasible (workload cannot be drawn, or `K > n`) |
//! | 4 | outage: a needed message is stored on no node |
//! | 5 | exact `T_un` over budget; the report carries the greedy value |
//! | 6 | a coding cap was exceeded; the report omits the coded optimum |
//! | 7 | instance file failed to parse or validate |
//! | 8 | demo decode failure or output mismatch |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use crate::analysis::{self, PGrid, SweepSpec};
use crate::coding::{optimal_coded_flexible, CodingError, DEFAULT_ASSIGNMENT_CAP, DEFAULT_FREE_CAP};
use crate::coverage::{build_coverage_graph, max_matching};
use crate::exec::{run_demo_with, ExecError, ShufflePlan};
use crate::instance::{
    demo_instance, from_text, generate_functions, generate_placement, to_text, Instance, InstanceError,
};
use crate::shuffle::{tprime_un, tun_exact, tun_greedy, ShuffleError};
use crate::DEFAULT_SEED;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_OUTAGE: i32 = 4;
pub const EXIT_BUDGET: i32 = 5;
pub const EXIT_CAP: i32 = 6;
pub const EXIT_PARSE: i32 = 7;
pub const EXIT_DECODE: i32 = 8;

pub const DEFAULT_BUDGET: usize = 6;
pub const SOLVE_HEADER: &str = "flexshuffle-solve schema=1";

#[derive(Debug, Parser)]
#[command(name = "flexshuffle", version, about = "Flexible assignment and shuffling over random placements")]
pub struct Cli {
    /// TOML file with default values for any flag (flags win).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Report Y, T_un, T'_un and the coded optimum of an instance.
    Solve(SolveArgs),
    /// Monte Carlo sweep over a parameter grid.
    Sweep(SweepArgs),
    /// Run the common-friends example end to end.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Write the six-user, four-node example instead of a random instance.
    #[arg(long)]
    pub demo: bool,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "K", alias = "k")]
    pub k: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    /// Largest broadcast set the exact uncoded search may try.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub free_cap: Option<u32>,
    #[arg(long)]
    pub assignment_cap: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long = "K", alias = "k", value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub d: Vec<usize>,
    /// Absolute allocation probabilities.
    #[arg(long, value_delimiter = ',', conflicts_with = "p_rel")]
    pub p: Vec<f64>,
    /// Multiples of p_threshold(n, K).
    #[arg(long, value_delimiter = ',')]
    pub p_rel: Vec<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Add fixed-assignment columns with C designated nodes per function.
    #[arg(long, value_name = "C", num_args = 0..=1, default_missing_value = "1")]
    pub compare_fixed: Option<usize>,
    /// Skip the greedy uncoded shuffle estimate.
    #[arg(long)]
    pub skip_tun: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoPlan {
    /// Raw b_A and coded b_C + b_D from node 3.
    Reference,
    /// No transmissions.
    Empty,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, value_enum)]
    pub plan: Option<DemoPlan>,
    /// Include per-decode lines in the transcript.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    fn single(&self, key: &str) -> Result<T, CliError> {
        match self {
            OneOrMany::One(x) => Ok(x.clone()),
            OneOrMany::Many(v) if v.len() == 1 => Ok(v[0].clone()),
            OneOrMany::Many(_) => Err(CliError::usage(format!("config key `{key}` must be a single value here"))),
        }
    }
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    m: Option<OneOrMany<usize>>,
    n: Option<OneOrMany<usize>>,
    #[serde(rename = "K")]
    k: Option<OneOrMany<usize>>,
    d: Option<OneOrMany<usize>>,
    p: Option<OneOrMany<f64>>,
    p_rel: Option<OneOrMany<f64>>,
    seed: Option<u64>,
    trials: Option<u64>,
    threads: Option<usize>,
    compare_fixed: Option<usize>,
    skip_tun: Option<bool>,
    out: Option<PathBuf>,
    format: Option<Format>,
    budget: Option<usize>,
    free_cap: Option<u32>,
    assignment_cap: Option<u64>,
    plan: Option<DemoPlan>,
    verbose: Option<bool>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }
}

fn instance_error(e: InstanceError) -> CliError {
    let code = match e {
        InstanceError::Infeasible(_) => EXIT_INFEASIBLE,
        InstanceError::Io(_) => EXIT_OTHER,
        _ => EXIT_PARSE,
    };
    CliError::new(code, e.to_string())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(EXIT_OTHER, format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_error(p, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::new(EXIT_OTHER, e.to_string())),
    }
}

fn scalar<T: Clone>(flag: Option<T>, cfg: &Option<OneOrMany<T>>, key: &str, default: T) -> Result<T, CliError> {
    match (flag, cfg) {
        (Some(v), _) => Ok(v),
        (None, Some(c)) => c.single(key),
        (None, None) => Ok(default),
    }
}

fn list<T: Clone>(flag: Vec<T>, cfg: &Option<OneOrMany<T>>, default: Vec<T>) -> Vec<T> {
    if !flag.is_empty() {
        flag
    } else {
        cfg.as_ref().map_or(default, OneOrMany::to_vec)
    }
}

fn cmd_gen(args: GenArgs, cfg: &FileConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let instance = if args.demo {
        let inst = demo_instance();
        for (name, flag, want) in [("m", args.m, inst.m()), ("n", args.n, inst.n()), ("K", args.k, inst.k())] {
            if flag.is_some_and(|v| v != want) {
                return Err(CliError::usage(format!("--demo has {name} = {want}")));
            }
        }
        inst
    } else {
        let m = scalar(args.m, &cfg.m, "m", 20)?;
        let n = scalar(args.n, &cfg.n, "n", 10)?;
        let k = scalar(args.k, &cfg.k, "K", 5)?;
        let d = scalar(args.d, &cfg.d, "d", 2)?;
        let p = scalar(args.p, &cfg.p, "p", 0.5)?;
        let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::usage(format!("p = {p} outside [0, 1]")));
        }
        if m == 0 || n == 0 {
            return Err(CliError::usage("m and n must be positive"));
        }
        let workload = generate_functions(m, k, d, seed).map_err(instance_error)?;
        Instance::new(generate_placement(m, n, p, seed), workload).map_err(instance_error)?
    };
    emit(out, args.out.as_deref().or(cfg.out.as_deref()), &to_text(&instance))?;
    Ok(EXIT_OK)
}

/// Everything `solve` reports; `None` marks a value that was not computed.
#[derive(Debug, Default)]
struct SolveReport {
    m: usize,
    n: usize,
    k: usize,
    y: usize,
    outage: Vec<usize>,
    tun: Option<usize>,
    tun_exact: bool,
    exhausted_below: Option<usize>,
    broadcast: Vec<usize>,
    senders: Vec<usize>,
    tprime: Option<usize>,
    coded: Option<usize>,
    notes: Vec<String>,
}

impl SolveReport {
    fn text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let opt = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
        let mut s = format!("{SOLVE_HEADER}\nm={} n={} K={}\nY={}\n", self.m, self.n, self.k, self.y);
        if !self.outage.is_empty() {
            s += &format!("outage={}\n", join(&self.outage));
        }
        s += &format!("T_un={} exact={}", opt(self.tun), self.tun_exact);
        if let Some(b) = self.exhausted_below {
            s += &format!(" exhausted_below={b}");
        }
        s += "\n";
        if self.tun.is_some() {
            s += &format!("broadcast={} senders={}\n", join(&self.broadcast), join(&self.senders));
        }
        s += &format!("T'_un={}\ncoded={}\n", opt(self.tprime), opt(self.coded));
        for n in &self.notes {
            s += &format!("note: {n}\n");
        }
        s
    }

    fn json(&self) -> String {
        let doc = json!({
            "schema": 1,
            "m": self.m,
            "n": self.n,
            "K": self.k,
            "Y": self.y,
            "outage": self.outage,
            "T_un": self.tun,
            "T_un_exact": self.tun_exact,
            "exhausted_below": self.exhausted_below,
            "broadcast": self.broadcast,
            "senders": self.senders,
            "T_prime_un": self.tprime,
            "coded": self.coded,
            "notes": self.notes,
        });
        serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n"
    }
}

/// Keeps the first non-zero exit code.
fn raise(code: &mut i32, c: i32) {
    if *code == EXIT_OK {
        *code = c;
    }
}

fn cmd_solve(args: SolveArgs, cfg: &FileConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let budget = args.budget.or(cfg.budget).unwrap_or(DEFAULT_BUDGET);
    let free_cap = args.free_cap.or(cfg.free_cap).unwrap_or(DEFAULT_FREE_CAP);
    let assignment_cap = args.assignment_cap.or(cfg.assignment_cap).unwrap_or(DEFAULT_ASSIGNMENT_CAP);
    let format = args.format.or(cfg.format).unwrap_or(Format::Text);
    if format == Format::Csv {
        return Err(CliError::usage("solve supports --format text or json"));
    }
    let text = fs::read_to_string(&args.instance).map_err(|e| io_error(&args.instance, e))?;
    let inst = from_text(&text).map_err(instance_error)?;

    let mut code = EXIT_OK;
    let mut r = SolveReport {
        m: inst.m(),
        n: inst.n(),
        k: inst.k(),
        y: max_matching(&build_coverage_graph(&inst)).uncovered,
        ..SolveReport::default()
    };
    let uncoded = match tun_exact(&inst, budget) {
        Err(ShuffleError::BudgetExceeded { budget }) => {
            raise(&mut code, EXIT_BUDGET);
            r.notes.push(format!("no exact plan within budget {budget}; T_un is the greedy value"));
            tun_greedy(&inst)
        }
        other => other,
    };
    match uncoded {
        Ok(plan) => {
            r.tun = Some(plan.size());
            r.tun_exact = plan.trace.is_some();
            r.exhausted_below = plan.trace.map(|t| t.exhausted_below);
            r.broadcast = plan.broadcast;
            r.senders = plan.senders;
        }
        Err(ShuffleError::Outage { messages }) => {
            raise(&mut code, EXIT_OUTAGE);
            r.outage = messages;
        }
        Err(ShuffleError::Infeasible { k, n }) => {
            raise(&mut code, EXIT_INFEASIBLE);
            r.notes.push(format!("K = {k} functions cannot go to {n} distinct nodes"));
        }
        Err(e @ ShuffleError::BudgetExceeded { .. }) => return Err(CliError::new(EXIT_OTHER, e.to_string())),
    }
    if code == EXIT_OK || code == EXIT_BUDGET {
        r.tprime = tprime_un(&inst).ok().map(|p| p.total);
        match optimal_coded_flexible(&inst, assignment_cap, free_cap) {
            Ok(plan) => r.coded = Some(plan.len()),
            Err(e @ CodingError::CapExceeded { .. }) => {
                raise(&mut code, EXIT_CAP);
                r.notes.push(format!("coded optimum skipped: {e}"));
            }
            Err(e) => r.notes.push(e.to_string()),
        }
    }
    let body = match format {
        Format::Json => r.json(),
        _ => r.text(),
    };
    emit(out, None, &body)?;
    Ok(code)
}

fn cmd_sweep(args: SweepArgs, cfg: &FileConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let p = list(args.p, &cfg.p, Vec::new());
    let p_rel = list(args.p_rel, &cfg.p_rel, Vec::new());
    let grid = match (p.is_empty(), p_rel.is_empty()) {
        (false, true) => PGrid::Absolute(p),
        (true, false) => PGrid::RelativeToThreshold(p_rel),
        (true, true) => return Err(CliError::usage("sweep needs --p or --p-rel")),
        (false, false) => return Err(CliError::usage("--p and --p-rel are exclusive")),
    };
    let spec = SweepSpec {
        ms: list(args.m, &cfg.m, vec![100]),
        ns: list(args.n, &cfg.n, vec![100]),
        ks: list(args.k, &cfg.k, vec![50]),
        ds: list(args.d, &cfg.d, vec![2]),
        p: grid,
        trials: args.trials.or(cfg.trials).unwrap_or(200),
        seed: args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        threads: args.threads.or(cfg.threads).unwrap_or(0),
        compare_fixed: args.compare_fixed.or(cfg.compare_fixed),
        with_tun: !(args.skip_tun || cfg.skip_tun.unwrap_or(false)),
    };
    if spec.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    if spec.compare_fixed == Some(0) {
        return Err(CliError::usage("--compare-fixed needs at least one node per function"));
    }
    let points = analysis::sweep(&spec).map_err(|e| CliError::new(EXIT_OTHER, e.to_string()))?;
    let fixed = spec.compare_fixed.is_some();
    let body = match args.format.or(cfg.format).unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            analysis::write_csv(&points, fixed, &mut buf).map_err(|e| CliError::new(EXIT_OTHER, e.to_string()))?;
            String::from_utf8(buf).expect("CSV output is UTF-8")
        }
        Format::Json => analysis::to_json(&points, fixed),
        Format::Text => return Err(CliError::usage("sweep supports --format csv or json")),
    };
    emit(out, args.out.as_deref().or(cfg.out.as_deref()), &body)?;
    Ok(EXIT_OK)
}

fn cmd_demo(args: DemoArgs, cfg: &FileConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let plan = match args.plan.or(cfg.plan).unwrap_or(DemoPlan::Reference) {
        DemoPlan::Reference => ShufflePlan::demo(),
        DemoPlan::Empty => ShufflePlan::empty(),
    };
    let verbose = args.verbose || cfg.verbose.unwrap_or(false);
    let (body, code) = match run_demo_with(&plan) {
        Ok(t) => (
            format!("{}PASS transmissions={} bytes={}\n", t.to_log(verbose), t.transmissions.len(), t.total_bytes()),
            EXIT_OK,
        ),
        Err(ExecError::DecodeFailure { failures }) => {
            let mut s = String::new();
            for f in &failures {
                s += &format!(
                    "missing node={} function={} message={}\n",
                    f.node, f.function, f.message
                );
            }
            let mut fs: Vec<usize> = failures.iter().map(|f| f.function).collect();
            fs.dedup();
            s += &format!("FAIL decode failure in {} functions\n", fs.len());
            (s, EXIT_DECODE)
        }
        Err(e) => (format!("FAIL {e}\n"), EXIT_DECODE),
    };
    emit(out, None, &body)?;
    Ok(code)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let result = load_config(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Gen(a) => cmd_gen(a, &cfg, out),
        Command::Solve(a) => cmd_solve(a, &cfg, out),
        Command::Sweep(a) => cmd_sweep(a, &cfg, out),
        Command::Demo(a) => cmd_demo(a, &cfg, out),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
