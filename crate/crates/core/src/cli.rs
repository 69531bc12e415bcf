//! Command-line front end: flat JSON configs, flag overrides, reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::coupling::{build_filtration, conditional_expectation_step, good_atoms, side_condition_start, simulate_coupling, FILTRATION_LIMIT};
use crate::diophantine::{clt_condition_profile, count_solutions, lil_condition_profile, DiophantineQuery, NuRange};
use crate::discrepancy::{discrepancy, koksma_check, star_discrepancy, PointSet};
use crate::error::LabError;
use crate::limits::{
    clt_experiment, discrepancy_limit_experiment, erdos_fortet_experiment, frechet_experiment, gaussian_covariance, kac_variance,
    lil_trace, lil_trace_csv, stable_experiment, ExperimentConfig, ExperimentReport, Normalization, PointSource,
};
use crate::orbit::{condition_maingap, PeriodicFunction};
use crate::par::{with_threads, Execution};
use crate::seqgen::{dyer_harman_sum, gcd_sum, gcd_sum_f64, generate, GapExponent, IntegerSequence, SequenceKind, SequenceSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable giving the worker count; `--threads` wins.
pub const THREADS_ENV: &str = "LACLAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Options that steer execution but never change results.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Flat JSON file with parameters; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: LACLAB_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Add wall-clock runtime to the report (output is then not reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Also write the raw experiment samples, one per line.
    #[arg(long, global = true)]
    pub samples: Option<PathBuf>,
}

macro_rules! params {
    ($(#[$sm:meta])* $name:ident { $($body:tt)* }) => {
        $(#[$sm])*
        #[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $($body)*
        }
    };
}

macro_rules! params_seq {
    ($(#[$sm:meta])* $name:ident { $($body:tt)* }) => {
        params!($(#[$sm])* $name {
            /// geometric | geometric_minus_one | power_gap | superlacunary_square | explicit
            #[arg(long)]
            pub kind: Option<String>,
            #[arg(long)]
            pub theta: Option<u64>,
            /// Gap exponent γ, e.g. `11` or `3/2`.
            #[arg(long)]
            pub gamma: Option<String>,
            #[arg(long)]
            pub n1: Option<String>,
            #[arg(long)]
            pub base: Option<u64>,
            /// Comma-separated terms for `explicit`.
            #[arg(long)]
            pub terms: Option<String>,
            /// File with one decimal term per line.
            #[arg(long = "seq-file")]
            pub seq_file: Option<PathBuf>,
            $($body)*
        });
        impl HasSequence for $name {
            fn seq_params(&self) -> SeqParams {
                SeqParams {
                    kind: self.kind.clone(),
                    theta: self.theta,
                    gamma: self.gamma.clone(),
                    n1: self.n1.clone(),
                    base: self.base,
                    terms: self.terms.clone(),
                    seq_file: self.seq_file.clone(),
                }
            }
            fn set_kind_default(&mut self, kind: &str) {
                self.kind.get_or_insert_with(|| kind.to_string());
            }
        }
    };
}

pub struct SeqParams {
    kind: Option<String>,
    theta: Option<u64>,
    gamma: Option<String>,
    n1: Option<String>,
    base: Option<u64>,
    terms: Option<String>,
    seq_file: Option<PathBuf>,
}

trait HasSequence {
    fn seq_params(&self) -> SeqParams;
    fn set_kind_default(&mut self, kind: &str);
}

params_seq!(GenParams {
    /// Number of terms.
    #[arg(long)]
    pub n: Option<usize>,
});

params_seq!(SumParams {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
});

params!(DiscParams {
    /// CSV file with one point in [0, 1) per line.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Also check the Koksma inequality for this function.
    #[arg(long)]
    pub function: Option<String>,
});

params_seq!(DiophParams {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    #[arg(long)]
    pub d: Option<u64>,
    /// Count solutions for this single offset.
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<String>,
    /// `clt` or `lil` profile over a range of offsets.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub nu_lo: Option<String>,
    #[arg(long)]
    pub nu_hi: Option<String>,
    #[arg(long)]
    pub include_zero: Option<bool>,
    #[arg(long)]
    pub eps: Option<f64>,
});

params_seq!(CoupleParams {
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub big_k: Option<usize>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub big_m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
});

params_seq!(ConditionParams {
    #[arg(long)]
    pub function: Option<String>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub big_k: Option<usize>,
});

params_seq!(CltParams {
    #[arg(long)]
    pub function: Option<String>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub big_m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// auto | harmonic | kac | sample | sqrt_n
    #[arg(long)]
    pub normalization: Option<String>,
});

params!(EfParams {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub big_m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
});

params_seq!(KdistParams {
    /// `sequence` or `iid`.
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub big_m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
});

params_seq!(HeavyParams {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub big_m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
});

params_seq!(LilParams {
    #[arg(long)]
    pub function: Option<String>,
    /// Largest N; rows at N = 16, 32, …
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
});

params!(GammaParams {
    #[arg(long)]
    pub a: Option<u64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub kmax: Option<usize>,
});

params!(KacParams {
    #[arg(long)]
    pub function: Option<String>,
    #[arg(long)]
    pub kmax: Option<usize>,
});

#[derive(Parser, Debug)]
#[command(name = "laclab", version, about = "Computational laboratory for lacunary systems f(n_k x)")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Print the terms of a sequence, one per line.
    Gen(GenParams),
    /// Exact GCD sum of the first N terms.
    Gcdsum(SumParams),
    /// Dyer–Harman sum of the first N terms.
    DhSum(SumParams),
    /// Extreme and star discrepancy of a point file.
    Disc(DiscParams),
    /// Diophantine counts or condition profiles.
    Dioph(DiophParams),
    /// Coupling simulation and filtration checks.
    Couple(CoupleParams),
    /// Main gap condition report.
    Condition(ConditionParams),
    /// Central limit experiment.
    Clt(CltParams),
    /// Erdős–Fortet experiment.
    Ef(EfParams),
    /// Kolmogorov law for the discrepancy.
    Kdist(KdistParams),
    /// Stable limit experiment.
    Stable(HeavyParams),
    /// Fréchet limit for maxima.
    Frechet(HeavyParams),
    /// Exploratory LIL trace for one sample point.
    LilTrace(LilParams),
    /// Covariance of the limiting Gaussian process.
    Gamma(GammaParams),
    /// Kac variance.
    Kac(KacParams),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Gcdsum(_) => "gcdsum",
            Command::DhSum(_) => "dh-sum",
            Command::Disc(_) => "disc",
            Command::Dioph(_) => "dioph",
            Command::Couple(_) => "couple",
            Command::Condition(_) => "condition",
            Command::Clt(_) => "clt",
            Command::Ef(_) => "ef",
            Command::Kdist(_) => "kdist",
            Command::Stable(_) => "stable",
            Command::Frechet(_) => "frechet",
            Command::LilTrace(_) => "lil-trace",
            Command::Gamma(_) => "gamma",
            Command::Kac(_) => "kac",
        }
    }
}

/// A validated, fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl PartialEq for Command {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name() && self.params_value() == other.params_value()
    }
}

impl Command {
    fn params_value(&self) -> Value {
        let v = match self {
            Command::Gen(p) => serde_json::to_value(p),
            Command::Gcdsum(p) | Command::DhSum(p) => serde_json::to_value(p),
            Command::Disc(p) => serde_json::to_value(p),
            Command::Dioph(p) => serde_json::to_value(p),
            Command::Couple(p) => serde_json::to_value(p),
            Command::Condition(p) => serde_json::to_value(p),
            Command::Clt(p) => serde_json::to_value(p),
            Command::Ef(p) => serde_json::to_value(p),
            Command::Kdist(p) => serde_json::to_value(p),
            Command::Stable(p) | Command::Frechet(p) => serde_json::to_value(p),
            Command::LilTrace(p) => serde_json::to_value(p),
            Command::Gamma(p) => serde_json::to_value(p),
            Command::Kac(p) => serde_json::to_value(p),
        }
        .expect("parameters serialize");
        strip_nulls(v)
    }
}

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        other => other,
    }
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}

/// Reads a flat JSON object and checks every key against `P`, collecting
/// all problems instead of stopping at the first.
fn parse_file_params<P: DeserializeOwned>(text: &str, errors: &mut Vec<String>) -> (Map<String, Value>, Option<usize>, Option<PathBuf>, Option<String>) {
    let mut params = Map::new();
    let (mut threads, mut out, mut command) = (None, None, None);
    let root: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            errors.push(format!("line {}: {}", e.line(), e));
            return (params, threads, out, command);
        }
    };
    let Value::Object(map) = root else {
        errors.push("line 1: config must be a flat JSON object".into());
        return (params, threads, out, command);
    };
    for (key, value) in map {
        let line = key_line(text, &key);
        match key.as_str() {
            "command" => match value.as_str() {
                Some(s) => command = Some(s.to_string()),
                None => errors.push(format!("line {line}: key 'command' must be a string")),
            },
            "threads" => match value.as_u64() {
                Some(t) => threads = Some(t as usize),
                None => errors.push(format!("line {line}: key 'threads' must be a positive integer")),
            },
            "out" => match value.as_str() {
                Some(s) => out = Some(PathBuf::from(s)),
                None => errors.push(format!("line {line}: key 'out' must be a string")),
            },
            _ => {
                if value.is_object() || (value.is_array()) {
                    errors.push(format!("line {line}: key '{key}' must be a scalar (flat config)"));
                    continue;
                }
                let single = Value::Object(Map::from_iter([(key.clone(), value.clone())]));
                match serde_json::from_value::<P>(single) {
                    Ok(_) => {
                        params.insert(key, value);
                    }
                    Err(e) if e.to_string().starts_with("unknown field") => {
                        errors.push(format!("line {line}: unknown key '{key}'"));
                    }
                    Err(e) => errors.push(format!("line {line}: key '{key}': {e}")),
                }
            }
        }
    }
    (params, threads, out, command)
}

/// Overlays the flag values on the file values.
fn merge<P: Serialize + DeserializeOwned>(file: Map<String, Value>, flags: &P) -> P {
    let mut merged = file;
    if let Value::Object(f) = strip_nulls(serde_json::to_value(flags).expect("parameters serialize")) {
        merged.extend(f);
    }
    serde_json::from_value(Value::Object(merged)).expect("keys were checked one by one")
}

fn merge_command(cmd: &Command, file: Map<String, Value>) -> Command {
    match cmd {
        Command::Gen(p) => Command::Gen(merge(file, p)),
        Command::Gcdsum(p) => Command::Gcdsum(merge(file, p)),
        Command::DhSum(p) => Command::DhSum(merge(file, p)),
        Command::Disc(p) => Command::Disc(merge(file, p)),
        Command::Dioph(p) => Command::Dioph(merge(file, p)),
        Command::Couple(p) => Command::Couple(merge(file, p)),
        Command::Condition(p) => Command::Condition(merge(file, p)),
        Command::Clt(p) => Command::Clt(merge(file, p)),
        Command::Ef(p) => Command::Ef(merge(file, p)),
        Command::Kdist(p) => Command::Kdist(merge(file, p)),
        Command::Stable(p) => Command::Stable(merge(file, p)),
        Command::Frechet(p) => Command::Frechet(merge(file, p)),
        Command::LilTrace(p) => Command::LilTrace(merge(file, p)),
        Command::Gamma(p) => Command::Gamma(merge(file, p)),
        Command::Kac(p) => Command::Kac(merge(file, p)),
    }
}

fn check_file_keys(cmd: &Command, text: &str, errors: &mut Vec<String>) -> (Map<String, Value>, Option<usize>, Option<PathBuf>, Option<String>) {
    match cmd {
        Command::Gen(_) => parse_file_params::<GenParams>(text, errors),
        Command::Gcdsum(_) | Command::DhSum(_) => parse_file_params::<SumParams>(text, errors),
        Command::Disc(_) => parse_file_params::<DiscParams>(text, errors),
        Command::Dioph(_) => parse_file_params::<DiophParams>(text, errors),
        Command::Couple(_) => parse_file_params::<CoupleParams>(text, errors),
        Command::Condition(_) => parse_file_params::<ConditionParams>(text, errors),
        Command::Clt(_) => parse_file_params::<CltParams>(text, errors),
        Command::Ef(_) => parse_file_params::<EfParams>(text, errors),
        Command::Kdist(_) => parse_file_params::<KdistParams>(text, errors),
        Command::Stable(_) | Command::Frechet(_) => parse_file_params::<HeavyParams>(text, errors),
        Command::LilTrace(_) => parse_file_params::<LilParams>(text, errors),
        Command::Gamma(_) => parse_file_params::<GammaParams>(text, errors),
        Command::Kac(_) => parse_file_params::<KacParams>(text, errors),
    }
}

fn empty_command(name: &str) -> Option<Command> {
    Some(match name {
        "gen" => Command::Gen(Default::default()),
        "gcdsum" => Command::Gcdsum(Default::default()),
        "dh-sum" => Command::DhSum(Default::default()),
        "disc" => Command::Disc(Default::default()),
        "dioph" => Command::Dioph(Default::default()),
        "couple" => Command::Couple(Default::default()),
        "condition" => Command::Condition(Default::default()),
        "clt" => Command::Clt(Default::default()),
        "ef" => Command::Ef(Default::default()),
        "kdist" => Command::Kdist(Default::default()),
        "stable" => Command::Stable(Default::default()),
        "frechet" => Command::Frechet(Default::default()),
        "lil-trace" => Command::LilTrace(Default::default()),
        "gamma" => Command::Gamma(Default::default()),
        "kac" => Command::Kac(Default::default()),
        _ => return None,
    })
}

/// Validates a config file that names its command under `"command"`.
pub fn validate_config(path: &Path) -> std::result::Result<RunConfig, Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?;
    let root: Value = serde_json::from_str(&text).map_err(|e| vec![format!("line {}: {e}", e.line())])?;
    let name = root.get("command").and_then(Value::as_str).ok_or_else(|| vec!["line 1: missing key 'command'".to_string()])?;
    let cmd = empty_command(name).ok_or_else(|| vec![format!("line {}: unknown command '{name}'", key_line(&text, "command"))])?;
    resolve(&cmd, &Common::default(), Some((&text, path)))
}

fn resolve(cmd: &Command, common: &Common, file: Option<(&str, &Path)>) -> std::result::Result<RunConfig, Vec<String>> {
    let mut errors = Vec::new();
    let (mut threads, mut out, mut merged) = (None, None, cmd.clone());
    if let Some((text, path)) = file {
        let (params, t, o, command) = check_file_keys(cmd, text, &mut errors);
        if let Some(c) = command {
            if c != cmd.name() {
                errors.push(format!("line {}: config is for '{c}', not '{}' ({})", key_line(text, "command"), cmd.name(), path.display()));
            }
        }
        if errors.is_empty() {
            merged = merge_command(cmd, params);
        }
        threads = t;
        out = o;
    }
    let threads = common.threads.or(threads).or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if threads == Some(0) {
        errors.push("threads must be >= 1".into());
    }
    if errors.is_empty() {
        fill_defaults(&mut merged);
        errors.extend(guards(&merged));
    }
    if errors.is_empty() {
        Ok(RunConfig {
            command: merged,
            out: common.out.clone().or(out),
            threads,
        })
    } else {
        Err(errors)
    }
}

fn fill_seq<P: HasSequence>(p: &mut P, kind: &str) {
    p.set_kind_default(kind);
}

fn fill_defaults(cmd: &mut Command) {
    match cmd {
        Command::Gen(p) => {
            fill_seq(p, "geometric");
            p.n.get_or_insert(10);
        }
        Command::Gcdsum(p) | Command::DhSum(p) => {
            fill_seq(p, "geometric");
            p.big_n.get_or_insert(16);
        }
        Command::Disc(_) => {}
        Command::Dioph(p) => {
            fill_seq(p, "geometric_minus_one");
            p.big_n.get_or_insert(64);
            p.d.get_or_insert(2);
            if p.nu.is_none() {
                p.profile.get_or_insert_with(|| "clt".into());
            }
            if p.profile.as_deref() == Some("lil") {
                p.eps.get_or_insert(0.1);
            }
        }
        Command::Couple(p) => {
            if p.kind.is_none() {
                p.theta.get_or_insert(8);
            }
            fill_seq(p, "geometric");
            p.big_k.get_or_insert(6);
            p.big_m.get_or_insert(10_000);
            p.seed.get_or_insert(1);
        }
        Command::Condition(p) => {
            fill_seq(p, "superlacunary_square");
            p.function.get_or_insert_with(|| "cos".into());
            p.big_k.get_or_insert(8);
        }
        Command::Clt(p) => {
            fill_seq(p, "geometric");
            p.function.get_or_insert_with(|| "cos".into());
            p.big_n.get_or_insert(4096);
            p.big_m.get_or_insert(20_000);
            p.seed.get_or_insert(7);
            p.normalization.get_or_insert_with(|| "auto".into());
        }
        Command::Ef(p) => {
            p.big_n.get_or_insert(4096);
            p.big_m.get_or_insert(20_000);
            p.seed.get_or_insert(7);
        }
        Command::Kdist(p) => {
            let src = p.source.get_or_insert_with(|| "sequence".into()).clone();
            if src == "sequence" {
                fill_seq(p, "superlacunary_square");
            }
            p.big_n.get_or_insert(256);
            p.big_m.get_or_insert(10_000);
            p.seed.get_or_insert(7);
        }
        Command::Stable(p) => {
            p.alpha.get_or_insert(1.5);
            p.big_n.get_or_insert(1024);
            p.big_m.get_or_insert(10_000);
            p.seed.get_or_insert(7);
        }
        Command::Frechet(p) => {
            p.alpha.get_or_insert(1.0);
            p.big_n.get_or_insert(1024);
            p.big_m.get_or_insert(10_000);
            p.seed.get_or_insert(7);
        }
        Command::LilTrace(p) => {
            fill_seq(p, "geometric");
            p.function.get_or_insert_with(|| "cos".into());
            p.big_n.get_or_insert(1 << 16);
            p.seed.get_or_insert(1);
        }
        Command::Gamma(p) => {
            p.a.get_or_insert(2);
            p.s.get_or_insert(0.5);
            p.t.get_or_insert(0.5);
            p.kmax.get_or_insert(40);
        }
        Command::Kac(p) => {
            p.function.get_or_insert_with(|| "cos".into());
            p.kmax.get_or_insert(20);
        }
    }
}

fn positive(errors: &mut Vec<String>, name: &str, v: Option<usize>) {
    if v == Some(0) {
        errors.push(format!("{name} must be >= 1, got 0"));
    }
}

fn check_function(errors: &mut Vec<String>, f: &Option<String>) {
    if let Some(s) = f {
        if let Err(e) = s.parse::<PeriodicFunction>().and_then(|f| f.validate().map(|_| f)) {
            errors.push(format!("function: {e}"));
        }
    }
}

fn check_seq<P: HasSequence>(errors: &mut Vec<String>, p: &P) {
    let s = p.seq_params();
    match s.kind.as_deref() {
        Some("geometric" | "geometric_minus_one") => {
            if s.theta.is_some_and(|t| t < 2) {
                errors.push("theta must be >= 2".into());
            }
        }
        Some("superlacunary_square") => {
            if s.base.is_some_and(|b| b < 2) {
                errors.push("base must be >= 2".into());
            }
        }
        Some("power_gap") => {
            if let Some(g) = &s.gamma {
                if let Err(e) = parse_gamma(g) {
                    errors.push(format!("gamma: {e}"));
                }
            }
        }
        Some("explicit") => {
            if s.terms.is_none() && s.seq_file.is_none() {
                errors.push("explicit sequences need 'terms' or 'seq_file'".into());
            }
        }
        Some(k) => errors.push(format!("unknown sequence kind '{k}'")),
        None => {}
    }
}

fn guards(cmd: &Command) -> Vec<String> {
    let mut e = Vec::new();
    match cmd {
        Command::Gen(p) => {
            check_seq(&mut e, p);
            positive(&mut e, "n", p.n);
        }
        Command::Gcdsum(p) | Command::DhSum(p) => {
            check_seq(&mut e, p);
            positive(&mut e, "N", p.big_n);
        }
        Command::Disc(p) => {
            if p.points.is_none() {
                e.push("disc needs 'points'".into());
            }
            check_function(&mut e, &p.function);
        }
        Command::Dioph(p) => {
            check_seq(&mut e, p);
            positive(&mut e, "N", p.big_n);
            if p.d == Some(0) {
                e.push("d must be >= 1, got 0".into());
            }
            if let Some(nu) = &p.nu {
                if nu.parse::<num_bigint::BigInt>().is_err() {
                    e.push(format!("nu must be an integer, got '{nu}'"));
                }
            }
            if let Some(pr) = &p.profile {
                if pr != "clt" && pr != "lil" {
                    e.push(format!("profile must be 'clt' or 'lil', got '{pr}'"));
                }
            }
            for (name, v) in [("nu_lo", &p.nu_lo), ("nu_hi", &p.nu_hi)] {
                if v.as_ref().is_some_and(|s| s.parse::<num_bigint::BigInt>().is_err()) {
                    e.push(format!("{name} must be an integer"));
                }
            }
            if p.nu_lo.is_some() != p.nu_hi.is_some() {
                e.push("nu_lo and nu_hi go together".into());
            }
        }
        Command::Couple(p) => {
            check_seq(&mut e, p);
            positive(&mut e, "K", p.big_k);
            positive(&mut e, "M", p.big_m);
        }
        Command::Condition(p) => {
            check_seq(&mut e, p);
            check_function(&mut e, &p.function);
            positive(&mut e, "K", p.big_k);
        }
        Command::Clt(p) => {
            check_seq(&mut e, p);
            check_function(&mut e, &p.function);
            positive(&mut e, "N", p.big_n);
            positive(&mut e, "M", p.big_m);
            if let Some(n) = &p.normalization {
                if n.parse::<Normalization>().is_err() {
                    e.push(format!("unknown normalization '{n}'"));
                }
            }
        }
        Command::Ef(p) => {
            positive(&mut e, "N", p.big_n);
            positive(&mut e, "M", p.big_m);
        }
        Command::Kdist(p) => {
            check_seq(&mut e, p);
            positive(&mut e, "N", p.big_n);
            positive(&mut e, "M", p.big_m);
            if let Some(s) = &p.source {
                if s != "sequence" && s != "iid" {
                    e.push(format!("source must be 'sequence' or 'iid', got '{s}'"));
                }
            }
        }
        Command::Stable(p) | Command::Frechet(p) => {
            check_seq(&mut e, p);
            positive(&mut e, "N", p.big_n);
            positive(&mut e, "M", p.big_m);
            if p.alpha.is_some_and(|a| !(a > 0.0 && a < 2.0)) {
                e.push("alpha must lie in (0, 2)".into());
            }
        }
        Command::LilTrace(p) => {
            check_seq(&mut e, p);
            check_function(&mut e, &p.function);
            if p.big_n.is_some_and(|n| n < 16) {
                e.push("N must be >= 16".into());
            }
        }
        Command::Gamma(p) => {
            if p.a.is_some_and(|a| a < 2) {
                e.push("a must be >= 2".into());
            }
            for (name, v) in [("s", p.s), ("t", p.t)] {
                if v.is_some_and(|v| !(0.0..=1.0).contains(&v)) {
                    e.push(format!("{name} must lie in [0, 1]"));
                }
            }
        }
        Command::Kac(p) => check_function(&mut e, &p.function),
    }
    e
}

fn parse_gamma(s: &str) -> crate::Result<GapExponent> {
    match s.split_once('/') {
        Some((a, b)) => {
            let num = a.trim().parse().map_err(|_| LabError::InvalidParameter(format!("bad gamma '{s}'")))?;
            let den = b.trim().parse().map_err(|_| LabError::InvalidParameter(format!("bad gamma '{s}'")))?;
            GapExponent::new(num, den)
        }
        None => GapExponent::from_f64(s.trim().parse().map_err(|_| LabError::InvalidParameter(format!("bad gamma '{s}'")))?),
    }
}

fn parse_terms(text: &str, sep: char) -> crate::Result<Vec<BigUint>> {
    text.split(sep)
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| LabError::InvalidParameter(format!("bad term '{t}'"))))
        .collect()
}

fn sequence_spec<P: HasSequence>(p: &P, length: usize) -> crate::Result<SequenceSpec> {
    let s = p.seq_params();
    let kind = match s.kind.as_deref().unwrap_or("geometric") {
        "geometric" => SequenceKind::Geometric { theta: s.theta.unwrap_or(2) },
        "geometric_minus_one" => SequenceKind::GeometricMinusOne { theta: s.theta.unwrap_or(2) },
        "superlacunary_square" => SequenceKind::SuperlacunarySquare { base: s.base.unwrap_or(2) },
        "power_gap" => SequenceKind::PowerGap {
            gamma: parse_gamma(s.gamma.as_deref().unwrap_or("1"))?,
            n1: s.n1.as_deref().unwrap_or("1").parse().map_err(|_| LabError::InvalidParameter("bad n1".into()))?,
        },
        "explicit" => {
            let terms = match (&s.terms, &s.seq_file) {
                (Some(t), _) => parse_terms(t, ',')?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path).map_err(|e| LabError::InvalidParameter(format!("{}: {e}", path.display())))?;
                    IntegerSequence::parse_lines(&text)?.terms().to_vec()
                }
                (None, None) => return Err(LabError::InvalidParameter("explicit sequence without terms".into())),
            };
            let spec = SequenceSpec::explicit(terms);
            return Ok(SequenceSpec::new(spec.kind, length.min(spec.length)));
        }
        k => return Err(LabError::InvalidParameter(format!("unknown sequence kind '{k}'"))),
    };
    Ok(SequenceSpec::new(kind, length))
}

fn build_sequence<P: HasSequence>(p: &P, length: usize) -> crate::Result<IntegerSequence> {
    let spec = sequence_spec(p, length)?;
    let seq = generate(&spec)?;
    if seq.len() < length {
        return Err(LabError::SequenceTooShort { needed: length, have: seq.len() });
    }
    Ok(seq.prefix(length))
}

fn parse_function(s: &Option<String>) -> crate::Result<PeriodicFunction> {
    s.as_deref().unwrap_or("cos").parse()
}

/// What a command produced.
struct Outcome {
    results: Value,
    pass: bool,
    csv: Option<String>,
    /// Plain text that replaces the JSON report (`gen`).
    plain: Option<String>,
    samples: Option<Vec<f64>>,
}

impl Outcome {
    fn json(results: Value, pass: bool) -> Self {
        Self {
            results,
            pass,
            csv: None,
            plain: None,
            samples: None,
        }
    }

    fn experiment(report: ExperimentReport) -> Self {
        let samples = report.samples.clone();
        let pass = report.pass;
        Self {
            results: serde_json::to_value(&report).expect("report serializes"),
            pass,
            csv: None,
            plain: None,
            samples: Some(samples),
        }
    }
}

fn execute(cmd: &Command) -> crate::Result<Outcome> {
    let exec = Execution::Parallel;
    match cmd {
        Command::Gen(p) => {
            let seq = build_sequence(p, p.n.unwrap_or(10))?;
            Ok(Outcome {
                plain: Some(seq.to_lines()),
                ..Outcome::json(Value::Null, true)
            })
        }
        Command::Gcdsum(p) => {
            let seq = build_sequence(p, p.big_n.unwrap_or(16))?;
            Ok(Outcome::json(json!({ "N": seq.len(), "gcd_sum": gcd_sum(&seq).to_string(), "value": gcd_sum_f64(&seq) }), true))
        }
        Command::DhSum(p) => {
            let seq = build_sequence(p, p.big_n.unwrap_or(16))?;
            Ok(Outcome::json(json!({ "N": seq.len(), "value": dyer_harman_sum(&seq) }), true))
        }
        Command::Disc(p) => {
            let path = p.points.as_ref().expect("validated");
            let text = std::fs::read_to_string(path).map_err(|e| LabError::InvalidParameter(format!("{}: {e}", path.display())))?;
            let ps = PointSet::parse_csv(&text)?;
            let mut results = json!({ "N": ps.len(), "D_N": discrepancy(&ps)?, "D_star_N": star_discrepancy(&ps)? });
            let mut pass = true;
            if let Some(f) = &p.function {
                let k = koksma_check(&f.parse()?, &ps)?;
                pass = k.holds;
                results["koksma"] = serde_json::to_value(k).expect("serializable");
            }
            Ok(Outcome::json(results, pass))
        }
        Command::Dioph(p) => {
            let n = p.big_n.unwrap_or(64);
            let d = p.d.unwrap_or(2);
            let seq = build_sequence(p, n)?;
            if let Some(nu) = &p.nu {
                let nu: num_bigint::BigInt = nu.parse().map_err(|_| LabError::InvalidParameter("bad nu".into()))?;
                let count = count_solutions(&DiophantineQuery { seq: &seq, n, d, nu: nu.clone() })?;
                return Ok(Outcome::json(json!({ "N": n, "d": d, "nu": nu.to_string(), "L": count }), true));
            }
            let range = match (&p.nu_lo, &p.nu_hi) {
                (Some(lo), Some(hi)) => Some(NuRange::Symmetric {
                    lo: lo.parse().map_err(|_| LabError::InvalidParameter("bad nu_lo".into()))?,
                    hi: hi.parse().map_err(|_| LabError::InvalidParameter("bad nu_hi".into()))?,
                    include_zero: p.include_zero.unwrap_or(false),
                }),
                _ => None,
            };
            let profile = if p.profile.as_deref() == Some("lil") {
                lil_condition_profile(&seq, n, d, range, p.eps.unwrap_or(0.1))?
            } else {
                clt_condition_profile(&seq, n, d, range)?
            };
            Ok(Outcome {
                csv: Some(profile.to_csv()),
                ..Outcome::json(serde_json::to_value(&profile).expect("serializable"), true)
            })
        }
        Command::Couple(p) => {
            let k = p.big_k.unwrap_or(6);
            let seq = build_sequence(p, k + 1)?;
            let report = simulate_coupling(&seq, k, p.big_m.unwrap_or(10_000), p.seed.unwrap_or(1), exec)?;
            let mut exact = Vec::new();
            let k0 = side_condition_start(&seq, k);
            for j in 1..=k {
                if seq.term(j + 1) > &BigUint::from(FILTRATION_LIMIT) {
                    break;
                }
                let step = conditional_expectation_step(&build_filtration(&seq, j)?)?;
                let good = good_atoms(&seq, j)?;
                exact.push(json!({ "k": j, "expectation": step, "good_atoms": good }));
            }
            let exact_ok = exact.iter().all(|row| {
                row["expectation"]["bound_holds"] == true && (row["good_atoms"]["side_condition"] == false || row["good_atoms"]["bound_holds"] == true)
            });
            let pass = report.pass && exact_ok;
            Ok(Outcome {
                csv: Some(report.to_csv()),
                ..Outcome::json(json!({ "simulation": report, "exact": exact, "k0": k0 }), pass)
            })
        }
        Command::Condition(p) => {
            let k = p.big_k.unwrap_or(8);
            let seq = build_sequence(p, k + 1)?;
            let report = condition_maingap(&parse_function(&p.function)?, &seq, k)?;
            Ok(Outcome {
                csv: Some(report.to_csv()),
                ..Outcome::json(serde_json::to_value(&report).expect("serializable"), true)
            })
        }
        Command::Clt(p) => {
            let n = p.big_n.unwrap_or(4096);
            let cfg = ExperimentConfig {
                function: parse_function(&p.function)?,
                sequence: sequence_spec(p, n)?,
                n,
                m: p.big_m.unwrap_or(20_000),
                seed: p.seed.unwrap_or(7),
                normalization: p.normalization.as_deref().unwrap_or("auto").parse()?,
            };
            Ok(Outcome::experiment(clt_experiment(&cfg, exec)?))
        }
        Command::Ef(p) => Ok(Outcome::experiment(erdos_fortet_experiment(
            p.big_n.unwrap_or(4096),
            p.big_m.unwrap_or(20_000),
            p.seed.unwrap_or(7),
            exec,
        )?)),
        Command::Kdist(p) => {
            let n = p.big_n.unwrap_or(256);
            let source = if p.source.as_deref() == Some("iid") {
                PointSource::IidUniform
            } else {
                PointSource::Sequence(sequence_spec(p, n)?)
            };
            Ok(Outcome::experiment(discrepancy_limit_experiment(&source, n, p.big_m.unwrap_or(10_000), p.seed.unwrap_or(7), exec)?))
        }
        Command::Stable(p) | Command::Frechet(p) => {
            let n = p.big_n.unwrap_or(1024);
            let spec = if p.kind.is_some() { Some(sequence_spec(p, n)?) } else { None };
            let run = if matches!(cmd, Command::Stable(_)) { stable_experiment } else { frechet_experiment };
            let alpha = p.alpha.unwrap_or(if matches!(cmd, Command::Stable(_)) { 1.5 } else { 1.0 });
            Ok(Outcome::experiment(run(alpha, spec.as_ref(), n, p.big_m.unwrap_or(10_000), p.seed.unwrap_or(7), exec)?))
        }
        Command::LilTrace(p) => {
            let n = p.big_n.unwrap_or(1 << 16);
            let rows = lil_trace(&parse_function(&p.function)?, &sequence_spec(p, n)?, p.seed.unwrap_or(1), n)?;
            Ok(Outcome {
                csv: Some(lil_trace_csv(&rows)),
                ..Outcome::json(json!({ "rows": rows }), true)
            })
        }
        Command::Gamma(p) => {
            let v = gaussian_covariance(p.a.unwrap_or(2), p.s.unwrap_or(0.5), p.t.unwrap_or(0.5), p.kmax.unwrap_or(40))?;
            Ok(Outcome::json(json!({ "gamma": v }), true))
        }
        Command::Kac(p) => {
            let v = kac_variance(&parse_function(&p.function)?, p.kmax.unwrap_or(20))?;
            Ok(Outcome::json(serde_json::to_value(v).expect("serializable"), true))
        }
    }
}

/// SHA-256 of the canonical (key-sorted) resolved parameters.
pub fn config_hash(command: &str, params: &Value) -> String {
    let canonical = serde_json::to_string(&json!({ "command": command, "config": params })).expect("serializable");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let text = match &cli.common.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_USAGE;
            }
        },
        None => None,
    };
    let file = text.as_deref().zip(cli.common.config.as_deref());
    let cfg = match resolve(&cli.command, &cli.common, file) {
        Ok(c) => c,
        Err(errors) => {
            for e in errors {
                eprintln!("error: {e}");
            }
            return EXIT_USAGE;
        }
    };
    let start = Instant::now();
    let outcome = with_threads(cfg.threads, || execute(&cfg.command));
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let exit_code = if outcome.pass { EXIT_OK } else { EXIT_ASSERTION };
    let name = cfg.command.name();
    let params = cfg.command.params_value();
    let hash = config_hash(name, &params);
    if let (Some(path), Some(samples)) = (&cli.common.samples, &outcome.samples) {
        let body: String = samples.iter().map(|v| format!("{v:.17e}\n")).collect();
        if let Err(e) = std::fs::write(path, body) {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_USAGE;
        }
    }
    let text = if let Some(plain) = outcome.plain {
        plain
    } else if let (Some(OutputFormat::Csv), Some(csv)) = (cli.common.format, &outcome.csv) {
        format!("# laclab {VERSION} {name} config_hash={hash}\n{csv}")
    } else {
        let mut report: BTreeMap<&str, Value> = BTreeMap::new();
        report.insert("command", json!(name));
        report.insert("version", json!(VERSION));
        report.insert("config_hash", json!(hash));
        report.insert("config", params);
        report.insert("results", outcome.results);
        report.insert("pass", json!(outcome.pass));
        report.insert("exit_code", json!(exit_code));
        if cli.common.timing {
            report.insert("runtime_ms", json!(start.elapsed().as_millis() as u64));
        }
        let mut s = serde_json::to_string_pretty(&report).expect("serializable");
        s.push('\n');
        s
    };
    if let Err(e) = emit(&cfg.out, &text) {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    exit_code
}
