//! Finite distributions on `[0, 1]` with exact masses, the Prohorov
//! distance and Strassen couplings.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{LabError, Result};
use crate::numeric::{f64_to_rational, rational_to_f64};

/// Largest combined support accepted by the Prohorov routines.
pub const SUPPORT_LIMIT: usize = 10_000;
/// Largest `n · m` for which every pairwise distance is enumerated.
pub const EXACT_CANDIDATES_LIMIT: usize = 1_000_000;
/// Relative widening applied to `ε` for the open neighbourhood convention.
pub const BOUNDARY_WIDENING: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteDistribution {
    support: Vec<BigRational>,
    masses: Vec<BigRational>,
}

impl DiscreteDistribution {
    /// Sorts the support, merges repeated points and checks the masses.
    pub fn new(support: Vec<BigRational>, masses: Vec<BigRational>) -> Result<Self> {
        if support.len() != masses.len() {
            return Err(LabError::InvalidDistribution("support and masses differ in length".into()));
        }
        Self::from_pairs(support.into_iter().zip(masses))
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (BigRational, BigRational)>) -> Result<Self> {
        let mut v: Vec<(BigRational, BigRational)> = pairs.into_iter().collect();
        if v.is_empty() {
            return Err(LabError::InvalidDistribution("empty support".into()));
        }
        v.sort_by(|a, b| a.0.cmp(&b.0));
        let mut support: Vec<BigRational> = Vec::with_capacity(v.len());
        let mut masses: Vec<BigRational> = Vec::with_capacity(v.len());
        let (zero, one) = (BigRational::zero(), BigRational::one());
        for (x, m) in v {
            if x < zero || x > one {
                return Err(LabError::InvalidDistribution(format!("support point {x} outside [0, 1]")));
            }
            if m <= zero {
                return Err(LabError::InvalidDistribution(format!("non-positive mass {m}")));
            }
            if support.last() == Some(&x) {
                *masses.last_mut().expect("paired") += m;
            } else {
                support.push(x);
                masses.push(m);
            }
        }
        let d = Self { support, masses };
        if d.total_mass() != one {
            return Err(LabError::InvalidDistribution(format!("masses sum to {}", d.total_mass())));
        }
        Ok(d)
    }

    /// From doubles, converted exactly; masses are normalized by their exact sum.
    pub fn from_f64(support: &[f64], weights: &[f64]) -> Result<Self> {
        let w: Vec<BigRational> = weights.iter().map(|&m| f64_to_rational(m)).collect();
        let total: BigRational = w.iter().sum();
        if total.is_zero() {
            return Err(LabError::InvalidDistribution("zero total weight".into()));
        }
        Self::new(support.iter().map(|&x| f64_to_rational(x)).collect(), w.into_iter().map(|m| m / &total).collect())
    }

    pub fn point_mass(x: BigRational) -> Result<Self> {
        Self::new(vec![x], vec![BigRational::one()])
    }

    /// Uniform law on the cell midpoints `(l + 1/2) / L`.
    pub fn uniform_grid(l: u64) -> Self {
        let den = BigInt::from(2 * l);
        let mass = BigRational::new(BigInt::one(), BigInt::from(l));
        Self {
            support: (0..l).map(|i| BigRational::new(BigInt::from(2 * i + 1), den.clone())).collect(),
            masses: vec![mass; l as usize],
        }
    }

    pub fn support(&self) -> &[BigRational] {
        &self.support
    }

    pub fn masses(&self) -> &[BigRational] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_mass(&self) -> BigRational {
        self.masses.iter().sum()
    }
}

/// Neighbourhood rule for the bipartite graph between two supports.
#[derive(Clone, Debug)]
enum Adjacency {
    /// `|x - y| <= d`.
    Closed(BigRational),
    /// `x == y` or `|x - y| < d`.
    Open(BigRational),
}

impl Adjacency {
    fn admits(&self, x: &BigRational, y: &BigRational) -> bool {
        let gap = (x - y).abs();
        match self {
            Adjacency::Closed(d) => gap <= *d,
            Adjacency::Open(d) => gap.is_zero() || gap < *d,
        }
    }
}

/// Maximum flow on an interval bipartite graph: each `x_i` reaches a
/// contiguous block of `y`, and the blocks move right with `i`. Filling the
/// leftmost open `y` first is optimal for such graphs.
fn greedy_flow(p: &DiscreteDistribution, q: &DiscreteDistribution, adj: &Adjacency) -> (BigRational, Vec<(usize, usize, BigRational)>) {
    let mut cap: Vec<BigRational> = q.masses.clone();
    let mut flow = BigRational::zero();
    let mut pairs = Vec::new();
    let mut lo = 0usize;
    for (i, x) in p.support.iter().enumerate() {
        // Skip y's too far to the left of x; they stay unreachable for later x.
        while lo < q.len() && !adj.admits(x, &q.support[lo]) && q.support[lo] < *x {
            lo += 1;
        }
        let mut need = p.masses[i].clone();
        let mut j = lo;
        while j < q.len() && !need.is_zero() && adj.admits(x, &q.support[j]) {
            if !cap[j].is_zero() {
                let take = if cap[j] < need { cap[j].clone() } else { need.clone() };
                cap[j] -= &take;
                need -= &take;
                flow += &take;
                pairs.push((i, j, take));
            }
            j += 1;
        }
        while lo < q.len() && cap[lo].is_zero() {
            lo += 1;
        }
    }
    (flow, pairs)
}

fn guard(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.len() + q.len() > SUPPORT_LIMIT {
        return Err(LabError::SizeGuard {
            what: "combined support",
            value: (p.len() + q.len()).to_string(),
            limit: SUPPORT_LIMIT.to_string(),
        });
    }
    Ok(())
}

/// Mass left unmatched when pairs within closed distance `d` may be matched.
fn defect(p: &DiscreteDistribution, q: &DiscreteDistribution, d: &BigRational) -> BigRational {
    BigRational::one() - greedy_flow(p, q, &Adjacency::Closed(d.clone())).0
}

/// Exact Prohorov distance when every pairwise distance can be listed.
/// `π = min_d max(d, 1 - F(d))` over the candidate distances `d`, where
/// `F(d)` is the maximum mass transportable within distance `d`.
pub fn prohorov_distance_exact(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<BigRational> {
    guard(p, q)?;
    if p.len() * q.len() > EXACT_CANDIDATES_LIMIT {
        return Err(LabError::SizeGuard {
            what: "pairwise distance candidates",
            value: (p.len() * q.len()).to_string(),
            limit: EXACT_CANDIDATES_LIMIT.to_string(),
        });
    }
    let mut cand: Vec<BigRational> = vec![BigRational::zero()];
    for x in &p.support {
        for y in &q.support {
            cand.push((x - y).abs());
        }
    }
    cand.sort();
    cand.dedup();
    // d_i - (1 - F_i) is nondecreasing; find the first index where it is >= 0.
    let (mut a, mut b) = (0usize, cand.len() - 1);
    let value = |i: usize| -> (BigRational, BigRational) { (cand[i].clone(), defect(p, q, &cand[i])) };
    if value(0).1 <= value(0).0 {
        return Ok(value(0).0);
    }
    while b - a > 1 {
        let m = (a + b) / 2;
        let (d, g) = value(m);
        if g <= d {
            b = m;
        } else {
            a = m;
        }
    }
    let (_, g_a) = value(a);
    let d_b = cand[b].clone();
    Ok(if g_a < d_b { g_a } else { d_b })
}

/// Prohorov distance, exact when the candidate list is small and otherwise
/// by bisection on `ε` to `1e-12` with exact feasibility.
pub fn prohorov_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    guard(p, q)?;
    if p.len() * q.len() <= EXACT_CANDIDATES_LIMIT {
        return Ok(rational_to_f64(&prohorov_distance_exact(p, q)?));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let d = f64_to_rational(mid);
        if defect(p, q, &d) <= d {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// A joint law with given marginals, as weighted index pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    pub p: DiscreteDistribution,
    pub q: DiscreteDistribution,
    pub pairs: Vec<(usize, usize, BigRational)>,
    /// Widened radius actually used for adjacency.
    pub radius: BigRational,
}

impl Coupling {
    /// Row and column sums equal the two marginals exactly.
    pub fn marginals_exact(&self) -> bool {
        let mut rows = vec![BigRational::zero(); self.p.len()];
        let mut cols = vec![BigRational::zero(); self.q.len()];
        for (i, j, m) in &self.pairs {
            rows[*i] += m;
            cols[*j] += m;
        }
        rows == self.p.masses && cols == self.q.masses
    }

    /// Mass on pairs outside the (widened, open) radius.
    pub fn exceedance(&self) -> BigRational {
        let adj = Adjacency::Open(self.radius.clone());
        self.pairs
            .iter()
            .filter(|(i, j, _)| !adj.admits(&self.p.support[*i], &self.q.support[*j]))
            .map(|(_, _, m)| m.clone())
            .sum()
    }

    /// Mass on `{|x - y| >= r}` for an arbitrary radius.
    pub fn mass_at_distance_at_least(&self, r: &BigRational) -> BigRational {
        self.pairs
            .iter()
            .filter(|(i, j, _)| (&self.p.support[*i] - &self.q.support[*j]).abs() >= *r)
            .map(|(_, _, m)| m.clone())
            .sum()
    }

    /// Outgoing pairs `(j, mass)` of each row.
    pub fn rows(&self) -> Vec<Vec<(usize, BigRational)>> {
        let mut out = vec![Vec::new(); self.p.len()];
        for (i, j, m) in &self.pairs {
            out[*i].push((*j, m.clone()));
        }
        out
    }
}

/// Joint law with marginals `p`, `q` and `P(|X - Y| >= ε) <= ε`, built from a
/// maximum flow on `{x == y or |x - y| < ε(1 + 1e-12)}` and a north-west
/// corner matching of the leftover mass.
pub fn strassen_coupling(p: &DiscreteDistribution, q: &DiscreteDistribution, eps: f64) -> Result<Coupling> {
    guard(p, q)?;
    if !(eps >= 0.0) {
        return Err(LabError::InvalidParameter(format!("ε must be >= 0, got {eps}")));
    }
    let radius = f64_to_rational(eps) * f64_to_rational(1.0 + BOUNDARY_WIDENING);
    let (flow, mut pairs) = greedy_flow(p, q, &Adjacency::Open(radius.clone()));
    let unmatched = BigRational::one() - &flow;
    if unmatched > f64_to_rational(eps + 1e-9) {
        return Err(LabError::Infeasible {
            eps,
            flow: rational_to_f64(&flow),
        });
    }
    let mut rr = p.masses.clone();
    let mut cc = q.masses.clone();
    for (i, j, m) in &pairs {
        rr[*i] -= m;
        cc[*j] -= m;
    }
    let (mut i, mut j) = (0usize, 0usize);
    while i < rr.len() && j < cc.len() {
        if rr[i].is_zero() {
            i += 1;
            continue;
        }
        if cc[j].is_zero() {
            j += 1;
            continue;
        }
        let take = if rr[i] < cc[j] { rr[i].clone() } else { cc[j].clone() };
        rr[i] -= &take;
        cc[j] -= &take;
        pairs.push((i, j, take));
    }
    pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut merged: Vec<(usize, usize, BigRational)> = Vec::with_capacity(pairs.len());
    for (i, j, m) in pairs {
        match merged.last_mut() {
            Some(last) if last.0 == i && last.1 == j => last.2 += m,
            _ => merged.push((i, j, m)),
        }
    }
    Ok(Coupling {
        p: p.clone(),
        q: q.clone(),
        pairs: merged,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn random_dist(rng: &mut ChaCha8Rng, max_len: usize) -> DiscreteDistribution {
        let n = rng.gen_range(1..=max_len);
        let den = 64;
        let pts: Vec<BigRational> = (0..n).map(|_| r(rng.gen_range(0..=den), den)).collect();
        let w: Vec<i64> = (0..n).map(|_| rng.gen_range(1..10)).collect();
        let total: i64 = w.iter().sum();
        DiscreteDistribution::new(pts, w.iter().map(|&x| r(x, total)).collect()).unwrap()
    }

    /// Edmonds–Karp on the full bipartite network.
    fn max_flow_oracle(p: &DiscreteDistribution, q: &DiscreteDistribution, d: &BigRational) -> BigRational {
        let (n, m) = (p.len(), q.len());
        let size = n + m + 2;
        let (s, t) = (n + m, n + m + 1);
        let mut cap = vec![vec![BigRational::zero(); size]; size];
        for i in 0..n {
            cap[s][i] = p.masses()[i].clone();
            for j in 0..m {
                if (&p.support()[i] - &q.support()[j]).abs() <= *d {
                    cap[i][n + j] = BigRational::one();
                }
            }
        }
        for j in 0..m {
            cap[n + j][t] = q.masses()[j].clone();
        }
        let mut flow = BigRational::zero();
        loop {
            let mut prev = vec![usize::MAX; size];
            prev[s] = s;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for v in 0..size {
                    if prev[v] == usize::MAX && cap[u][v] > BigRational::zero() {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                return flow;
            }
            let mut bottleneck = None::<BigRational>;
            let mut v = t;
            while v != s {
                let c = cap[prev[v]][v].clone();
                bottleneck = Some(match bottleneck {
                    Some(b) if b < c => b,
                    _ => c,
                });
                v = prev[v];
            }
            let b = bottleneck.expect("path");
            let mut v = t;
            while v != s {
                let u = prev[v];
                cap[u][v] -= &b;
                cap[v][u] += &b;
                v = u;
            }
            flow += b;
        }
    }

    /// inf ε over the definition, enumerating every subset of both supports.
    fn prohorov_bruteforce(p: &DiscreteDistribution, q: &DiscreteDistribution) -> BigRational {
        fn one_side(a: &DiscreteDistribution, b: &DiscreteDistribution) -> BigRational {
            let mut worst = BigRational::zero();
            for mask in 1u32..(1 << a.len()) {
                let set: Vec<usize> = (0..a.len()).filter(|i| mask >> i & 1 == 1).collect();
                let pa: BigRational = set.iter().map(|&i| a.masses()[i].clone()).sum();
                // distance of each point of b to the set
                let dist: Vec<BigRational> = b
                    .support()
                    .iter()
                    .map(|y| set.iter().map(|&i| (&a.support()[i] - y).abs()).min().expect("nonempty"))
                    .collect();
                let mut levels: Vec<BigRational> = dist.clone();
                levels.push(BigRational::zero());
                levels.sort();
                levels.dedup();
                // For ε in (d_i, d_{i+1}], A^ε holds the points at distance <= d_i.
                let mut best = None::<BigRational>;
                for (li, d) in levels.iter().enumerate() {
                    let covered: BigRational =
                        dist.iter().zip(b.masses()).filter(|(x, _)| *x <= d).map(|(_, m)| m.clone()).sum();
                    let need = &pa - covered;
                    let cand = if need > *d { need } else { d.clone() };
                    let upper = levels.get(li + 1);
                    if upper.is_none_or(|u| cand <= *u) {
                        best = Some(match best {
                            Some(b) if b < cand => b,
                            _ => cand,
                        });
                    }
                }
                let v = best.expect("last level always feasible");
                if v > worst {
                    worst = v;
                }
            }
            worst
        }
        let a = one_side(p, q);
        let b = one_side(q, p);
        if a > b {
            a
        } else {
            b
        }
    }

    #[test]
    fn worked_examples() {
        let a = DiscreteDistribution::point_mass(r(0, 1)).unwrap();
        let b = DiscreteDistribution::point_mass(r(3, 10)).unwrap();
        assert_eq!(prohorov_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(prohorov_distance_exact(&a, &b).unwrap(), r(3, 10));
        let half = DiscreteDistribution::new(vec![r(0, 1), r(1, 2)], vec![r(1, 2), r(1, 2)]).unwrap();
        assert_eq!(prohorov_distance_exact(&half, &a).unwrap(), r(1, 2));

        let c = strassen_coupling(&half, &half, 0.0).unwrap();
        assert!(c.marginals_exact());
        assert!(c.exceedance().is_zero());
        assert!(c.pairs.iter().all(|(i, j, _)| i == j));
        // At exactly ε = 0.3 the widened open radius admits the pair.
        let c = strassen_coupling(&a, &b, 0.3).unwrap();
        assert_eq!(c.pairs, vec![(0, 0, BigRational::one())]);
        assert!(c.exceedance().is_zero());
        assert!(matches!(strassen_coupling(&a, &b, 0.2), Err(LabError::Infeasible { .. })));
    }

    #[test]
    fn greedy_matches_generic_max_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = random_dist(&mut rng, 7);
            let q = random_dist(&mut rng, 7);
            let d = r(rng.gen_range(0..20), 64);
            assert_eq!(greedy_flow(&p, &q, &Adjacency::Closed(d.clone())).0, max_flow_oracle(&p, &q, &d));
        }
    }

    #[test]
    fn prohorov_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..150 {
            let p = random_dist(&mut rng, 5);
            let q = random_dist(&mut rng, 5);
            assert_eq!(prohorov_distance_exact(&p, &q).unwrap(), prohorov_bruteforce(&p, &q));
        }
    }

    #[test]
    fn grid_uniform_law() {
        let u = DiscreteDistribution::uniform_grid(8);
        assert_eq!(u.total_mass(), BigRational::one());
        assert_eq!(u.support()[0], r(1, 16));
        let v = DiscreteDistribution::uniform_grid(16);
        // Midpoint grids sit 1/32 apart.
        assert_eq!(prohorov_distance_exact(&u, &v).unwrap(), r(1, 32));
    }

    #[test]
    fn invalid_distributions() {
        assert!(DiscreteDistribution::new(vec![r(1, 2)], vec![r(1, 3)]).is_err());
        assert!(DiscreteDistribution::new(vec![r(3, 2)], vec![r(1, 1)]).is_err());
        assert!(DiscreteDistribution::new(vec![r(1, 2), r(1, 3)], vec![r(3, 2), r(-1, 2)]).is_err());
        let merged = DiscreteDistribution::new(vec![r(1, 2), r(1, 2)], vec![r(1, 2), r(1, 2)]).unwrap();
        assert_eq!(merged.len(), 1);
    }
}
