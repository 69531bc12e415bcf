//! Monte Carlo experiments comparing lacunary sums with their limit laws.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::ecdf::{dkw_slack, effective_size, ks_distance, two_sample_ks, EmpiricalCDF};
use super::reference::{erdos_fortet_cdf, frechet_cdf, heavy_tail_quantile, kac_variance, kolmogorov_k, normal_cdf, DEFAULT_NODES};
use crate::diophantine::{clt_condition_profile, NuRange};
use crate::discrepancy::{lil_statistic, star_discrepancy_f64, PointSet};
use crate::error::{LabError, Result};
use crate::orbit::{sample_point, OrbitPlan, PeriodicFunction};
use crate::par::{map_replicas, Execution};
use crate::rng::{replica_rng, uniform53, uniform_open, Lane};
use crate::seqgen::{check_polynomial_gap, generate, GapExponent, IntegerSequence, SequenceKind, SequenceSpec};

/// KS tolerance of the main comparisons.
pub const KS_TOLERANCE: f64 = 0.05;
/// KS tolerance of i.i.d. calibration controls.
pub const CALIBRATION_TOLERANCE: f64 = 0.03;
/// Lower KS bound required of the `N = 1` CLT negative control.
pub const CLT_CONTROL_MIN: f64 = 0.1;
/// Lower KS bound separating the Erdős–Fortet mixture from the normal law.
pub const EF_CONTROL_MIN: f64 = 0.05;

/// How `S_N` is scaled before comparison with `N(0, 1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `Harmonic` for a single harmonic, `Kac` along `2^k`, else `Sample`.
    #[default]
    Auto,
    /// `√(N ‖f‖₂²)`.
    Harmonic,
    /// `√(N σ²)` with the Kac variance.
    Kac,
    /// Sample standard deviation over the replicas.
    Sample,
    /// `√N`.
    SqrtN,
}

impl std::str::FromStr for Normalization {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(json!(s)).map_err(|_| LabError::InvalidParameter(format!("unknown normalization '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(serialize_with = "as_display")]
    pub function: PeriodicFunction,
    pub sequence: SequenceSpec,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub normalization: Normalization,
}

fn as_display<S: serde::Serializer>(f: &PeriodicFunction, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&f.to_string())
}

/// One KS comparison with its pass rule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KsCheck {
    pub name: String,
    pub ks: f64,
    pub threshold: f64,
    /// `true`: pass iff `ks <= threshold`; `false`: pass iff `ks > threshold`.
    pub below: bool,
    pub pass: bool,
}

impl KsCheck {
    pub fn below(name: &str, ks: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            ks,
            threshold,
            below: true,
            pass: ks <= threshold,
        }
    }

    pub fn above(name: &str, ks: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            ks,
            threshold,
            below: false,
            pass: ks > threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: serde_json::Value,
    /// Main KS statistic.
    pub ks: f64,
    /// Stated tolerance before the DKW slack.
    pub tolerance: f64,
    pub threshold: f64,
    pub pass: bool,
    pub controls: Vec<KsCheck>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl ExperimentReport {
    fn new(experiment: &str, config: serde_json::Value, main: KsCheck, tolerance: f64, controls: Vec<KsCheck>, samples: Vec<f64>) -> Self {
        Self {
            experiment: experiment.into(),
            config,
            ks: main.ks,
            tolerance,
            threshold: main.threshold,
            pass: main.pass && controls.iter().all(|c| c.pass),
            controls,
            warnings: Vec::new(),
            samples,
        }
    }
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(LabError::InvalidParameter(format!("N and M must be >= 1, got N = {n}, M = {m}")));
    }
    Ok(())
}

fn sequence_prefix(spec: &SequenceSpec, n: usize) -> Result<IntegerSequence> {
    let seq = generate(spec)?;
    if seq.len() < n {
        return Err(LabError::SequenceTooShort { needed: n, have: seq.len() });
    }
    Ok(seq.prefix(n))
}

/// `stat(plan, x)` over `m` replicas of `x` on the guarded grid.
fn orbit_replicas<F>(seq: &IntegerSequence, m: usize, seed: u64, exec: Execution, stat: F) -> Result<Vec<f64>>
where
    F: Fn(&OrbitPlan, &crate::orbit::FixedPointSample) -> Result<f64> + Sync + Send,
{
    let plan = OrbitPlan::for_sequence(seq)?;
    map_replicas(exec, m, |r| stat(&plan, &sample_point(seed, r as u64, plan.bits()))).into_iter().collect()
}

fn single_harmonic(f: &PeriodicFunction) -> bool {
    f.trig_coefficients()
        .is_some_and(|c| c.iter().filter(|(a, b)| *a != 0.0 || *b != 0.0).count() == 1)
}

fn resolve_normalization(cfg: &ExperimentConfig) -> Normalization {
    match cfg.normalization {
        Normalization::Auto if single_harmonic(&cfg.function) => Normalization::Harmonic,
        Normalization::Auto if cfg.sequence.kind == (SequenceKind::Geometric { theta: 2 }) => Normalization::Kac,
        Normalization::Auto => Normalization::Sample,
        other => other,
    }
}

/// `S_N / normalizer` over `M` replicas, KS against `Φ`.
pub fn clt_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentReport> {
    check_sizes(cfg.n, cfg.m)?;
    cfg.function.validate()?;
    let seq = sequence_prefix(&cfg.sequence, cfg.n)?;
    let f = &cfg.function;
    let raw = orbit_replicas(&seq, cfg.m, cfg.seed, exec, |plan, x| plan.sum(f, x))?;
    let n = cfg.n as f64;
    let mode = resolve_normalization(cfg);
    let centre = n * f.mean();
    let scale = match mode {
        Normalization::Harmonic => (n * f.l2_norm_sq()?).sqrt(),
        Normalization::Kac => {
            let kmax = if f.trig_coefficients().is_some() { 64 } else { 12 };
            (n * kac_variance(f, kmax)?.value).sqrt()
        }
        Normalization::SqrtN => n.sqrt(),
        Normalization::Sample | Normalization::Auto => {
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            (raw.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / raw.len() as f64).sqrt()
        }
    };
    if !(scale > 0.0) {
        return Err(LabError::ZeroVariance(format!("{f} along the first {} terms", cfg.n)));
    }
    let samples: Vec<f64> = raw.iter().map(|s| (s - centre) / scale).collect();
    let ecdf = EmpiricalCDF::new(samples.clone())?;
    let ks = ks_distance(&ecdf, normal_cdf);
    let main = KsCheck::below("normal", ks, KS_TOLERANCE + dkw_slack(cfg.m as f64));
    let mut config = serde_json::to_value(cfg).expect("serializable config");
    config["normalization_resolved"] = json!(mode);
    Ok(ExperimentReport::new("clt", config, main, KS_TOLERANCE, Vec::new(), samples))
}

/// `S_N / √N` for `cos 2πx + cos 4πx` along `2^k - 1`, KS against the
/// variance mixture; the same sample against `Φ` is the negative control.
pub fn erdos_fortet_experiment(n: usize, m: usize, seed: u64, exec: Execution) -> Result<ExperimentReport> {
    check_sizes(n, m)?;
    let seq = sequence_prefix(&SequenceSpec::geometric_minus_one(2, n), n)?;
    let f = PeriodicFunction::ErdosFortet;
    let root = (n as f64).sqrt();
    let samples = orbit_replicas(&seq, m, seed, exec, |plan, x| Ok(plan.sum(&f, x)? / root))?;
    let ecdf = EmpiricalCDF::new(samples.clone())?;
    let ks = ks_distance(&ecdf, |t| erdos_fortet_cdf(t, DEFAULT_NODES).expect("valid node count"));
    let ks_normal = ks_distance(&ecdf, normal_cdf);
    let main = KsCheck::below("mixture", ks, KS_TOLERANCE + dkw_slack(m as f64));
    let controls = vec![KsCheck::above("normal", ks_normal, EF_CONTROL_MIN)];
    let config = json!({ "function": f.to_string(), "sequence": SequenceSpec::geometric_minus_one(2, n), "n": n, "m": m, "seed": seed, "normalization": Normalization::SqrtN });
    Ok(ExperimentReport::new("ef", config, main, KS_TOLERANCE, controls, samples))
}

/// Where the points of the discrepancy experiment come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    Sequence(SequenceSpec),
    IidUniform,
}

/// `√N D*_N` of `{n_k x}` (or of i.i.d. uniforms), KS against `K`.
pub fn discrepancy_limit_experiment(source: &PointSource, n: usize, m: usize, seed: u64, exec: Execution) -> Result<ExperimentReport> {
    check_sizes(n, m)?;
    let root = (n as f64).sqrt();
    let mut warnings = Vec::new();
    let samples = match source {
        PointSource::Sequence(spec) => {
            let seq = sequence_prefix(spec, n)?;
            if n >= 2 {
                let range = NuRange::Symmetric {
                    lo: 1.into(),
                    hi: 16.into(),
                    include_zero: false,
                };
                let profile = clt_condition_profile(&seq, n, 2, Some(range))?;
                if profile.diagnostic == "non-vanishing" {
                    warnings.push(format!("Diophantine counts for d = 2 do not vanish ({})", profile.diagnostic));
                }
            }
            orbit_replicas(&seq, m, seed, exec, |plan, x| {
                let mut pts = plan.orbit_f64(x);
                Ok(root * star_discrepancy_f64(&mut pts))
            })?
        }
        PointSource::IidUniform => map_replicas(exec, m, |r| {
            let mut rng = replica_rng(seed, r as u64, Lane::Control);
            let mut pts: Vec<f64> = (0..n).map(|_| uniform53(&mut rng)).collect();
            root * star_discrepancy_f64(&mut pts)
        }),
    };
    let ecdf = EmpiricalCDF::new(samples.clone())?;
    let ks = ks_distance(&ecdf, kolmogorov_k);
    let main = KsCheck::below("kolmogorov", ks, KS_TOLERANCE + dkw_slack(m as f64));
    let config = json!({ "source": source, "n": n, "m": m, "seed": seed });
    let mut report = ExperimentReport::new("kdist", config, main, KS_TOLERANCE, Vec::new(), samples);
    report.warnings = warnings;
    Ok(report)
}

/// Smallest integer `γ` for which `n_{k+1}/n_k >= k^γ` makes the main gap
/// series converge for `f_α` with levels `T_k = (2k²)^{1/α}`: both
/// `T_k δ_k^{1/4}` and `(Lip_k δ_k^{1/2})^{1/2}`, `Lip_k ~ T_k^{1+α}`, must be
/// `O(k^{-1-η})` with `δ_k ~ k^{-γ}`.
pub fn gap_exponent_for(alpha: f64) -> Result<GapExponent> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(LabError::InvalidParameter(format!("α must lie in (0, 2), got {alpha}")));
    }
    let need = 4.0 * (1.0 + 2.0f64.max(1.0 + alpha) / alpha);
    Ok(GapExponent::integer(need.floor() as u32 + 1))
}

fn heavy_tail_setup(alpha: f64, spec: Option<&SequenceSpec>, n: usize) -> Result<(PeriodicFunction, SequenceSpec, IntegerSequence, Vec<String>)> {
    let f = PeriodicFunction::heavy_tail(alpha)?;
    let gamma = gap_exponent_for(alpha)?;
    let spec = spec.cloned().unwrap_or_else(|| SequenceSpec::power_gap(gamma, 1, n));
    let seq = sequence_prefix(&spec, n)?;
    let mut warnings = Vec::new();
    if n >= 2 && !check_polynomial_gap(&seq, gamma)? {
        warnings.push(format!("sequence does not satisfy n_(k+1)/n_k >= k^{gamma}"));
    }
    Ok((f, spec, seq, warnings))
}

fn iid_heavy_tail<T: Send>(alpha: f64, n: usize, m: usize, seed: u64, exec: Execution, reduce: impl Fn(&mut dyn Iterator<Item = f64>) -> T + Sync + Send) -> Vec<(T, T)> {
    map_replicas(exec, m, |r| {
        let mut rng = replica_rng(seed, r as u64, Lane::Control);
        let a = reduce(&mut (0..n).map(|_| heavy_tail_quantile(alpha, uniform_open(&mut rng))));
        let b = reduce(&mut (0..n).map(|_| heavy_tail_quantile(alpha, uniform_open(&mut rng))));
        (a, b)
    })
}

/// Two-sample KS between `S_N / N^{1/α}` along the sequence and the same
/// statistic of i.i.d. draws from the law of `f_α`.
pub fn stable_experiment(alpha: f64, spec: Option<&SequenceSpec>, n: usize, m: usize, seed: u64, exec: Execution) -> Result<ExperimentReport> {
    check_sizes(n, m)?;
    let (f, spec, seq, warnings) = heavy_tail_setup(alpha, spec, n)?;
    let b_n = (n as f64).powf(1.0 / alpha);
    let samples = orbit_replicas(&seq, m, seed, exec, |plan, x| Ok(plan.sum(&f, x)? / b_n))?;
    let iid = iid_heavy_tail(alpha, n, m, seed, exec, |it| it.sum::<f64>() / b_n);
    let a = EmpiricalCDF::new(samples.clone())?;
    let b = EmpiricalCDF::new(iid.iter().map(|p| p.0).collect())?;
    let b2 = EmpiricalCDF::new(iid.iter().map(|p| p.1).collect())?;
    let slack = dkw_slack(effective_size(m, m));
    let main = KsCheck::below("iid_sums", two_sample_ks(&a, &b), KS_TOLERANCE + slack);
    let controls = vec![KsCheck::below("iid_calibration", two_sample_ks(&b, &b2), CALIBRATION_TOLERANCE + slack)];
    let config = json!({ "alpha": alpha, "function": f.to_string(), "sequence": spec, "n": n, "m": m, "seed": seed, "centering": 0.0, "norming": b_n });
    let mut report = ExperimentReport::new("stable", config, main, KS_TOLERANCE, controls, samples);
    report.warnings = warnings;
    Ok(report)
}

/// `max_{k<=n} f_α(n_k x) / n^{1/α}` against `exp(-x^{-α})`, with an i.i.d. control.
pub fn frechet_experiment(alpha: f64, spec: Option<&SequenceSpec>, n: usize, m: usize, seed: u64, exec: Execution) -> Result<ExperimentReport> {
    check_sizes(n, m)?;
    let (f, spec, seq, warnings) = heavy_tail_setup(alpha, spec, n)?;
    let b_n = (n as f64).powf(1.0 / alpha);
    let samples = orbit_replicas(&seq, m, seed, exec, |plan, x| {
        let mut top = f64::NEG_INFINITY;
        plan.walk(x, |k, y| {
            top = top.max(f.eval_fixed(y).map_err(|_| LabError::SingularTerm { k })?);
            Ok::<(), LabError>(())
        })?;
        Ok(top / b_n)
    })?;
    let iid = iid_heavy_tail(alpha, n, m, seed, exec, |it| it.fold(f64::NEG_INFINITY, f64::max) / b_n);
    let g = |t: f64| frechet_cdf(t, alpha);
    let a = EmpiricalCDF::new(samples.clone())?;
    let control = EmpiricalCDF::new(iid.iter().map(|p| p.0).collect())?;
    let slack = dkw_slack(m as f64);
    let main = KsCheck::below("frechet", ks_distance(&a, g), KS_TOLERANCE + slack);
    let controls = vec![KsCheck::below("iid_frechet", ks_distance(&control, g), CALIBRATION_TOLERANCE + slack)];
    let config = json!({ "alpha": alpha, "function": f.to_string(), "sequence": spec, "n": n, "m": m, "seed": seed, "centering": 0.0, "norming": b_n });
    let mut report = ExperimentReport::new("frechet", config, main, KS_TOLERANCE, controls, samples);
    report.warnings = warnings;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LilRow {
    pub n: usize,
    pub sum: f64,
    /// `S_N / √(N log log N)`.
    pub normalized: f64,
    /// `N D_N / √(2N log log N)`.
    pub discrepancy_lil: f64,
}

/// Running normalized sums and discrepancies at `N = 16, 32, …, <= n_max`
/// for one sample point; exploratory only.
pub fn lil_trace(f: &PeriodicFunction, spec: &SequenceSpec, seed: u64, n_max: usize) -> Result<Vec<LilRow>> {
    if n_max < 16 {
        return Err(LabError::InvalidParameter(format!("LIL trace needs N >= 16, got {n_max}")));
    }
    f.validate()?;
    let seq = sequence_prefix(spec, n_max)?;
    let plan = OrbitPlan::for_sequence(&seq)?;
    let x = sample_point(seed, 0, plan.bits());
    let sums = plan.prefix_sums(f, &x)?;
    let points = plan.orbit_f64(&x);
    let mut rows = Vec::new();
    let mut n = 16;
    while n <= n_max {
        let nf = n as f64;
        let s = sums[n - 1];
        rows.push(LilRow {
            n,
            sum: s,
            normalized: s / (nf * nf.ln().ln()).sqrt(),
            discrepancy_lil: lil_statistic(&PointSet::new(points[..n].to_vec())?)?,
        });
        n *= 2;
    }
    Ok(rows)
}

pub fn lil_trace_csv(rows: &[LilRow]) -> String {
    let mut out = String::from("N,S_N,normalized,discrepancy_lil\n");
    for r in rows {
        out.push_str(&format!("{},{:.12e},{:.12e},{:.12e}\n", r.n, r.sum, r.normalized, r.discrepancy_lil));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clt_cfg(f: PeriodicFunction, spec: SequenceSpec, n: usize, m: usize) -> ExperimentConfig {
        ExperimentConfig {
            function: f,
            sequence: spec,
            n,
            m,
            seed: 5,
            normalization: Normalization::Auto,
        }
    }

    #[test]
    fn gap_exponents() {
        assert_eq!(gap_exponent_for(1.5).unwrap(), GapExponent::integer(11));
        assert_eq!(gap_exponent_for(1.0).unwrap(), GapExponent::integer(13));
        assert!(gap_exponent_for(2.0).is_err());
    }

    #[test]
    fn clt_small_run_is_close_to_normal() {
        let cfg = clt_cfg(PeriodicFunction::cos(), SequenceSpec::geometric(2, 256), 256, 4000);
        let rep = clt_experiment(&cfg, Execution::Parallel).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.config["normalization_resolved"], "harmonic");
    }

    #[test]
    fn cos_sum_sample_variance_is_half_n() {
        let mut cfg = clt_cfg(PeriodicFunction::cos(), SequenceSpec::geometric(3, 64), 64, 10_000);
        cfg.normalization = Normalization::SqrtN;
        let rep = clt_experiment(&cfg, Execution::Parallel).unwrap();
        let var = EmpiricalCDF::new(rep.samples).unwrap().variance();
        assert!((var - 0.5).abs() < 0.025, "{var}");
    }

    #[test]
    fn zero_function_has_zero_variance() {
        let cfg = clt_cfg(PeriodicFunction::Harmonic(vec![(0.0, 0.0)]), SequenceSpec::geometric(2, 8), 8, 10);
        let mut c = cfg.clone();
        c.normalization = Normalization::Sample;
        assert!(matches!(clt_experiment(&c, Execution::Sequential), Err(LabError::ZeroVariance(_))));
    }

    #[test]
    fn single_replica_runs() {
        let rep = erdos_fortet_experiment(16, 1, 3, Execution::Sequential).unwrap();
        assert!(rep.ks <= 1.0);
    }

    #[test]
    fn discrepancy_single_point_law() {
        // √1 D*_1 = max(x, 1 - x) is uniform on [1/2, 1].
        let rep = discrepancy_limit_experiment(&PointSource::IidUniform, 1, 4000, 1, Execution::Parallel).unwrap();
        assert!(rep.samples.iter().all(|&v| (0.5..=1.0).contains(&v)));
        assert!(rep.ks > 0.1);
    }

    #[test]
    fn lil_trace_is_well_formed() {
        let spec = SequenceSpec::geometric(2, 1 << 12);
        let a = lil_trace(&PeriodicFunction::cos(), &spec, 1, 1 << 12).unwrap();
        let b = lil_trace(&PeriodicFunction::cos(), &spec, 2, 1 << 12).unwrap();
        assert_eq!(a.len(), 9);
        assert!(a.windows(2).all(|w| w[1].n > w[0].n));
        assert!(a.iter().all(|r| r.normalized.is_finite() && r.normalized.abs() <= 3.0));
        assert_ne!(a, b);
        assert!(lil_trace_csv(&a).starts_with("N,S_N,normalized,discrepancy_lil\n"));
    }

    #[test]
    fn reports_are_thread_independent() {
        let a = stable_experiment(1.5, None, 32, 300, 9, Execution::Sequential).unwrap();
        let b = stable_experiment(1.5, None, 32, 300, 9, Execution::Parallel).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.samples, b.samples);
    }
}
