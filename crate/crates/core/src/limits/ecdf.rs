//! Empirical distribution functions and Kolmogorov–Smirnov distances.

use crate::error::{LabError, Result};

/// Significance level behind the DKW slack added to KS tolerances.
pub const DKW_LEVEL: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCDF {
    samples: Vec<f64>,
}

impl EmpiricalCDF {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(LabError::Empty("sample"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(LabError::InvalidParameter("sample contains NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    /// `#{x_i <= t} / M`.
    pub fn eval(&self, t: f64) -> f64 {
        self.samples.partition_point(|&x| x <= t) as f64 / self.samples.len() as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / self.len() as f64
    }

    /// Distinct values with the ECDF just before and at each of them.
    fn jumps(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let m = self.samples.len() as f64;
        let mut i = 0;
        std::iter::from_fn(move || {
            if i >= self.samples.len() {
                return None;
            }
            let v = self.samples[i];
            let before = i as f64 / m;
            while i < self.samples.len() && self.samples[i] == v {
                i += 1;
            }
            Some((v, before, i as f64 / m))
        })
    }

    pub fn to_csv(&self) -> String {
        self.samples.iter().map(|v| format!("{v:.17e}\n")).collect()
    }
}

/// `sup_t |F̂(t) - F(t)|` for a continuous reference `F`, evaluated at both
/// sides of every jump.
pub fn ks_distance(ecdf: &EmpiricalCDF, cdf: impl Fn(f64) -> f64) -> f64 {
    ecdf.jumps()
        .map(|(v, before, after)| {
            let f = cdf(v);
            (f - before).abs().max((after - f).abs())
        })
        .fold(0.0, f64::max)
}

/// `sup_t |F̂_A(t) - F̂_B(t)|`.
pub fn two_sample_ks(a: &EmpiricalCDF, b: &EmpiricalCDF) -> f64 {
    let (xa, xb) = (a.samples(), b.samples());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst = 0.0f64;
    while i < xa.len() || j < xb.len() {
        let v = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] == v {
            i += 1;
        }
        while j < xb.len() && xb[j] == v {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// `2 √(ln(2/0.01) / (2M))`, the slack added to KS tolerances.
pub fn dkw_slack(m: f64) -> f64 {
    2.0 * ((2.0 / DKW_LEVEL).ln() / (2.0 * m)).sqrt()
}

/// Effective sample size `M_A M_B / (M_A + M_B)` of a two-sample comparison.
pub fn effective_size(a: usize, b: usize) -> f64 {
    (a as f64 * b as f64) / (a + b) as f64
}
