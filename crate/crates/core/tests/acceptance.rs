//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL` line.

use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use laclab::coupling::{
    build_filtration, conditional_expectation_step, good_atoms, prohorov_distance, prohorov_distance_exact, simulate_coupling,
    strassen_coupling, DiscreteDistribution, FILTRATION_LIMIT,
};
use laclab::diophantine::{count_solutions, count_solutions_bruteforce, DiophantineQuery};
use laclab::discrepancy::{discrepancy, discrepancy_bruteforce, fukuyama_constant, koksma_check, star_discrepancy, PointSet};
use laclab::limits::{
    clt_experiment, discrepancy_limit_experiment, erdos_fortet_experiment, erdos_fortet_variance, frechet_experiment, gaussian_covariance,
    kac_variance, stable_experiment, ExperimentConfig, ExperimentReport, Normalization, PointSource, DEFAULT_NODES,
};
use laclab::orbit::{l2_modulus, PeriodicFunction};
use laclab::par::Execution;
use laclab::seqgen::{gcd_sum, generate, IntegerSequence, SequenceSpec};

const KS_LIMIT: f64 = 0.05;
const CALIBRATION_LIMIT: f64 = 0.03;
const CLT_CONTROL_LIMIT: f64 = 0.1;
const EF_NORMAL_LIMIT: f64 = 0.05;

/// Criteria expected to fail at this scale, with the reason.
const KNOWN_UNATTAINABLE: &[(u32, &str)] = &[(
    5,
    "the N = 1 control is √2·cos 2πU, whose exact KS distance to Φ is about 0.097 < 0.1",
)];

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn criterion(id: u32, name: &'static str, limit: Duration, body: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = body();
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    let out = Outcome {
        id,
        name,
        pass: ok && in_time,
        detail: if in_time {
            detail
        } else {
            format!("{detail}; runtime {elapsed:.1?} over {limit:?}")
        },
        elapsed,
    };
    println!(
        "[{}] {:>2} {}: {} ({:.1?})",
        if out.pass { "PASS" } else { "FAIL" },
        out.id,
        out.name,
        out.detail,
        out.elapsed
    );
    out
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    match rng.gen_range(0..3) {
        // Coarse grids create ties and points at 0.
        0 => {
            let den = rng.gen_range(1..40) as f64;
            (0..n).map(|_| rng.gen_range(0..den as u32) as f64 / den).collect()
        }
        1 => (0..n).map(|_| rng.gen::<f64>().powi(3)).collect(),
        _ => (0..n).map(|_| rng.gen::<f64>()).collect(),
    }
}

fn c1_discrepancy_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=200);
        let ps = PointSet::new(random_points(&mut rng, n)).unwrap();
        let fast = discrepancy(&ps).unwrap();
        let slow = discrepancy_bruteforce(&ps).unwrap();
        worst = worst.max((fast - slow).abs());
        assert!(star_discrepancy(&ps).unwrap() <= fast + 1e-15);
    }
    (worst <= 1e-12, format!("max |D_N - brute force| = {worst:.2e} over 1000 sets"))
}

fn random_function(rng: &mut ChaCha8Rng) -> PeriodicFunction {
    match rng.gen_range(0..7) {
        0 => PeriodicFunction::cos(),
        1 => PeriodicFunction::CenteredFrac,
        2 => PeriodicFunction::SignSine,
        3 => PeriodicFunction::ErdosFortet,
        4 => PeriodicFunction::CenteredIndicator { t: rng.gen_range(0.01..0.99) },
        5 => PeriodicFunction::Harmonic((0..rng.gen_range(1..5)).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()),
        _ => PeriodicFunction::truncated(PeriodicFunction::heavy_tail(1.5).unwrap(), rng.gen_range(2.0..20.0)).unwrap(),
    }
}

fn c2_koksma() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..1000 {
        let f = random_function(&mut rng);
        let n = rng.gen_range(1..=200);
        let ps = PointSet::new(random_points(&mut rng, n)).unwrap();
        let k = koksma_check(&f, &ps).unwrap();
        if !k.holds {
            violations += 1;
        }
        if k.rhs > 0.0 {
            tightest = tightest.min(k.rhs - k.lhs);
        }
    }
    (violations == 0, format!("{violations} violations in 1000 instances, min slack {tightest:.3e}"))
}

fn random_sequence(rng: &mut ChaCha8Rng, n: usize) -> IntegerSequence {
    let mut terms: Vec<BigUint> = Vec::with_capacity(n);
    let mut last = BigUint::zero();
    let geometric = rng.gen_bool(0.3);
    for _ in 0..n {
        last = if geometric {
            &last * BigUint::from(rng.gen_range(2u32..4)) + BigUint::from(rng.gen_range(1u32..3))
        } else {
            &last + BigUint::from(rng.gen_range(1u32..50))
        };
        terms.push(last.clone());
    }
    IntegerSequence::from_terms(terms).unwrap()
}

/// `Σ_{i<=j} gcd/lcm` by summing every ordered pair.
fn gcd_sum_oracle(seq: &IntegerSequence) -> BigRational {
    let t = seq.terms();
    let mut all = BigRational::zero();
    for a in t {
        for b in t {
            let g = a.gcd(b);
            all += BigRational::new(BigInt::from(g.clone()), BigInt::from(a * b / g));
        }
    }
    (all + BigRational::from_integer(t.len().into())) / BigRational::from_integer(2.into())
}

fn c3_gcd_dioph() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut gcd_bad, mut count_bad, mut queries) = (0, 0, 0);
    for _ in 0..100 {
        let n = rng.gen_range(1..=64);
        let seq = random_sequence(&mut rng, n);
        if gcd_sum(&seq) != gcd_sum_oracle(&seq) {
            gcd_bad += 1;
        }
        for d in 1..=4u64 {
            let nk = seq.terms()[rng.gen_range(0..n)].clone();
            let nl = seq.terms()[rng.gen_range(0..n)].clone();
            let hit = BigInt::from(nk * BigUint::from(rng.gen_range(1..=d))) - BigInt::from(nl * BigUint::from(rng.gen_range(1..=d)));
            for nu in [BigInt::zero(), hit, BigInt::from(rng.gen_range(-100i64..100))] {
                let q = DiophantineQuery { seq: &seq, n, d, nu };
                queries += 1;
                if count_solutions(&q).unwrap() != count_solutions_bruteforce(&q).unwrap() {
                    count_bad += 1;
                }
            }
        }
    }
    (
        gcd_bad == 0 && count_bad == 0,
        format!("gcd_sum mismatches {gcd_bad}/100, count mismatches {count_bad}/{queries}"),
    )
}

fn c4_coupling() -> (bool, String) {
    let k = 6;
    let seq = generate(&SequenceSpec::geometric(8, k + 1)).unwrap();
    let report = simulate_coupling(&seq, k, 100_000, 1, Execution::Parallel).unwrap();
    let rows_ok = report.rows.iter().all(|r| r.pass);
    let worst = report
        .rows
        .iter()
        .map(|r| format!("k={} {:.4}<=δ={:.3}", r.k, r.exceedance, r.delta_k))
        .collect::<Vec<_>>()
        .join(" ");
    let mut exact_ok = true;
    let mut checked = 0;
    for j in 1..=k {
        if seq.term(j + 1) > &BigUint::from(FILTRATION_LIMIT) {
            break;
        }
        let step = conditional_expectation_step(&build_filtration(&seq, j).unwrap()).unwrap();
        let good = good_atoms(&seq, j).unwrap();
        exact_ok &= step.bound_holds && (!good.side_condition || good.bound_holds);
        checked += 1;
    }
    (
        rows_ok && exact_ok && checked > 0,
        format!("{worst}; exact inequalities hold for k<={checked}: {exact_ok}"),
    )
}

fn c5_clt() -> (bool, String, bool) {
    let cfg = ExperimentConfig {
        function: PeriodicFunction::cos(),
        sequence: SequenceSpec::geometric(2, 4096),
        n: 4096,
        m: 20_000,
        seed: 7,
        normalization: Normalization::Auto,
    };
    let main = clt_experiment(&cfg, Execution::Parallel).unwrap();
    let control = clt_experiment(
        &ExperimentConfig {
            n: 1,
            sequence: SequenceSpec::geometric(2, 1),
            ..cfg
        },
        Execution::Parallel,
    )
    .unwrap();
    let main_ok = main.ks <= KS_LIMIT;
    (
        main_ok && control.ks > CLT_CONTROL_LIMIT,
        format!("KS(N=4096) = {:.4} <= {KS_LIMIT}; KS(N=1) = {:.4} > {CLT_CONTROL_LIMIT}", main.ks, control.ks),
        main_ok,
    )
}

fn c6_erdos_fortet() -> (bool, String) {
    let r = erdos_fortet_experiment(4096, 20_000, 7, Execution::Parallel).unwrap();
    let normal = r.controls.iter().find(|c| c.name == "normal").expect("normal control").ks;
    (
        r.ks <= KS_LIMIT && normal > EF_NORMAL_LIMIT,
        format!("KS vs mixture = {:.4} <= {KS_LIMIT}; KS vs Φ = {normal:.4} > {EF_NORMAL_LIMIT}", r.ks),
    )
}

fn c7_kolmogorov() -> (bool, String) {
    let seq = discrepancy_limit_experiment(
        &PointSource::Sequence(SequenceSpec::superlacunary_square(2, 256)),
        256,
        10_000,
        7,
        Execution::Parallel,
    )
    .unwrap();
    let iid = discrepancy_limit_experiment(&PointSource::IidUniform, 256, 10_000, 7, Execution::Parallel).unwrap();
    (
        seq.ks <= KS_LIMIT && iid.ks <= KS_LIMIT,
        format!("KS superlacunary = {:.4}, KS iid = {:.4}, both <= {KS_LIMIT}", seq.ks, iid.ks),
    )
}

fn calibration(r: &ExperimentReport) -> f64 {
    r.controls.iter().find(|c| c.name == "iid_calibration").expect("calibration").ks
}

fn c8_stable() -> (bool, String) {
    let r = stable_experiment(1.5, None, 1024, 10_000, 7, Execution::Parallel).unwrap();
    let cal = calibration(&r);
    let gap_ok = r.warnings.is_empty();
    (
        r.ks <= KS_LIMIT && cal <= CALIBRATION_LIMIT && gap_ok,
        format!(
            "two-sample KS = {:.4} <= {KS_LIMIT}; calibration = {cal:.4} <= {CALIBRATION_LIMIT}; sequence {}",
            r.ks, r.config["sequence"]
        ),
    )
}

fn c9_frechet() -> (bool, String) {
    let r = frechet_experiment(1.0, None, 1024, 10_000, 7, Execution::Parallel).unwrap();
    (r.ks <= KS_LIMIT, format!("KS vs exp(-1/x) = {:.4} <= {KS_LIMIT}", r.ks))
}

fn c10_reference() -> (bool, String) {
    let checks = [
        ("kac(cos)", kac_variance(&PeriodicFunction::cos(), 20).unwrap().value, 0.5, 1e-8),
        ("kac(erdos_fortet)", kac_variance(&PeriodicFunction::ErdosFortet, 20).unwrap().value, 2.0, 1e-6),
        ("fukuyama(2)", fukuyama_constant(2).unwrap(), 42f64.sqrt() / 9.0, 1e-12),
        ("Γ(1/2,1/2)", gaussian_covariance(2, 0.5, 0.5, 40).unwrap(), 0.25, 1e-9),
        ("ω₂(cos,1/8)", l2_modulus(&PeriodicFunction::cos(), 0.125).unwrap(), 1.0, 1e-9),
        ("EF variance", erdos_fortet_variance(DEFAULT_NODES).unwrap(), 1.0, 1e-6),
    ];
    let mut ok = true;
    let detail = checks
        .iter()
        .map(|(name, got, want, tol)| {
            let good = (got - want).abs() <= *tol;
            ok &= good;
            format!("{name}={got:.12}{}", if good { "" } else { "(!)" })
        })
        .collect::<Vec<_>>()
        .join(", ");
    (ok, detail)
}

fn random_dist(rng: &mut ChaCha8Rng) -> DiscreteDistribution {
    let den = [8i64, 10, 16, 30, 64][rng.gen_range(0..5)];
    let n = rng.gen_range(1..=8);
    let pairs: Vec<(BigRational, BigRational)> = (0..n)
        .map(|_| {
            (
                BigRational::new(rng.gen_range(0..=den).into(), den.into()),
                BigRational::from_integer(rng.gen_range(1..10).into()),
            )
        })
        .collect();
    let total: BigRational = pairs.iter().map(|(_, w)| w.clone()).sum();
    DiscreteDistribution::from_pairs(pairs.into_iter().map(|(x, w)| (x, w / &total))).unwrap()
}

fn c11_prohorov() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut violations = Vec::new();
    for case in 0..100 {
        let (p, q, r) = (random_dist(&mut rng), random_dist(&mut rng), random_dist(&mut rng));
        let pq = prohorov_distance_exact(&p, &q).unwrap();
        let qp = prohorov_distance_exact(&q, &p).unwrap();
        let pr = prohorov_distance_exact(&p, &r).unwrap();
        let qr = prohorov_distance_exact(&q, &r).unwrap();
        let zero = prohorov_distance_exact(&p, &p).unwrap();
        let one = BigRational::from_integer(1.into());
        if !zero.is_zero() || pq != qp || pr > &pq + &qr || pq < BigRational::zero() || pq > one {
            violations.push(format!("metric#{case}"));
        }
        let pi = prohorov_distance(&p, &q).unwrap();
        match strassen_coupling(&p, &q, pi) {
            Ok(c) => {
                let ex = c.exceedance().to_f64().unwrap();
                if !c.marginals_exact() || ex > pi + 1e-9 {
                    violations.push(format!("coupling#{case}"));
                }
            }
            Err(_) => violations.push(format!("infeasible#{case}")),
        }
    }
    (violations.is_empty(), format!("{} violations in 100 triples {violations:?}", violations.len()))
}

fn run_cli(args: &[&str], threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_laclab"))
        .args(args)
        .args(["--threads", threads])
        .env_remove("LACLAB_THREADS")
        .output()
        .expect("binary runs");
    assert!(out.status.code().is_some_and(|c| c == 0 || c == 2), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn c12_determinism() -> (bool, String) {
    let runs: [&[&str]; 5] = [
        &["clt", "--theta", "2", "--N", "4096", "--M", "2000", "--seed", "7"],
        &["ef", "--N", "1024", "--M", "2000"],
        &["kdist", "--N", "256", "--M", "2000"],
        &["stable", "--N", "256", "--M", "1000"],
        &["couple", "--M", "20000"],
    ];
    let mut mismatched = Vec::new();
    for args in runs {
        let base = run_cli(args, "1");
        for t in ["1", "2", "8"] {
            if run_cli(args, t) != base {
                mismatched.push(format!("{} threads={t}", args[0]));
            }
        }
    }
    (
        mismatched.is_empty(),
        format!("{} experiments x threads {{1,1,2,8}}, mismatches {mismatched:?}", runs.len()),
    )
}

fn main() {
    let mut results = vec![
        criterion(1, "discrepancy oracle", secs(30), c1_discrepancy_oracle),
        criterion(2, "Koksma inequality", secs(600), c2_koksma),
        criterion(3, "GCD-sum and Diophantine oracles", secs(30), c3_gcd_dioph),
        criterion(4, "coupling bound", secs(300), c4_coupling),
    ];
    let mut clt_main_ok = false;
    results.push(criterion(5, "CLT for cos 2πx", secs(120), || {
        let (ok, detail, main) = c5_clt();
        clt_main_ok = main;
        (ok, detail)
    }));
    results.push(criterion(6, "Erdős–Fortet mixture", secs(120), c6_erdos_fortet));
    results.push(criterion(7, "Kolmogorov law", secs(300), c7_kolmogorov));
    results.push(criterion(8, "stable limit", secs(300), c8_stable));
    results.push(criterion(9, "Fréchet limit", secs(120), c9_frechet));
    results.push(criterion(10, "reference values", secs(60), c10_reference));
    results.push(criterion(11, "Prohorov and Strassen", secs(60), c11_prohorov));
    results.push(criterion(12, "determinism across threads", secs(600), c12_determinism));

    let passed = results.iter().filter(|r| r.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    for r in results.iter().filter(|r| !r.pass) {
        if let Some((_, why)) = KNOWN_UNATTAINABLE.iter().find(|(id, _)| *id == r.id) {
            println!("  criterion {} fails as expected: {why}", r.id);
        }
    }
    let unexpected: Vec<u32> = results
        .iter()
        .filter(|r| !r.pass && !KNOWN_UNATTAINABLE.iter().any(|(id, _)| *id == r.id))
        .map(|r| r.id)
        .collect();
    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:?}");
    // The attainable half of criterion 5 must still hold.
    assert!(clt_main_ok, "CLT KS at N = 4096 above {KS_LIMIT}");
}
