//! Goodness-of-fit tests and exact combinatorial oracles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{erfc, reg_inc_gamma_upper};
use crate::partition::{Params, SetPartition};
use crate::rectree::RecursiveTree;

/// Default per-test significance threshold.
pub const DEFAULT_LEVEL: f64 = 1e-3;

/// Outcome of one hypothesis test. `pass` holds iff `p_value >= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n_samples: u64,
}

impl TestResult {
    pub fn new(name: impl Into<String>, statistic: f64, p_value: f64, threshold: f64, n: u64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            name: name.into(),
            statistic,
            p_value,
            threshold,
            pass: p_value >= threshold,
            n_samples: n,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn at_level(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.pass = self.p_value >= threshold;
        self
    }

    /// A deterministic check reported with `p = 1` on success and `p = 0` on failure.
    pub fn check(name: impl Into<String>, ok: bool, statistic: f64, n: u64) -> Self {
        TestResult::new(name, statistic, if ok { 1.0 } else { 0.0 }, DEFAULT_LEVEL, n)
    }
}

/// Kolmogorov survival function `Q(l) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 l^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form: 1 - sqrt(2 pi)/l sum_{k odd} exp(-k^2 pi^2 / (8 l^2)).
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in (1..40).step_by(2) {
            let term = (c * (k * k) as f64).exp();
            s += term;
            if term < 1e-17 {
                break;
            }
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a continuous `cdf`.
///
/// A sample value stands for the reals rounding to it, so the ECDF is compared against `cdf`
/// one ulp above each value from below and one ulp below it from above. Ties piled up by
/// rounding at the edge of the support are therefore not mistaken for atoms.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    if samples.is_empty() {
        return domain("ks_one_sample needs at least one sample");
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        d = d.max(cdf(x.next_down()) - i as f64 / n).max((i + 1) as f64 / n - cdf(x.next_up()));
    }
    let p = kolmogorov_q(n.sqrt() * d);
    Ok(TestResult::new("ks_one_sample", d, p, DEFAULT_LEVEL, xs.len() as u64))
}

/// Two-sample Kolmogorov-Smirnov test; the p-value uses `n = n_a n_b / (n_a + n_b)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return domain("ks_two_sample needs two nonempty samples");
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let p = kolmogorov_q(ne.sqrt() * d);
    Ok(TestResult::new("ks_two_sample", d, p, DEFAULT_LEVEL, (xa.len() + xb.len()) as u64))
}

fn check_probs(observed: &[u64], probs: &[f64]) -> Result<u64> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(Error::Usage(format!(
            "chi-square needs matching cell vectors of length >= 2, got {} and {}",
            observed.len(),
            probs.len()
        )));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > 1e-9 || probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Usage(format!("cell probabilities must be >= 0 and sum to 1, got {s}")));
    }
    Ok(observed.iter().sum())
}

/// Pearson chi-square test with `cells - 1` degrees of freedom. Every expected count must be
/// at least 5.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> Result<TestResult> {
    let n = check_probs(observed, probs)?;
    let nf = n as f64;
    if let Some(k) = probs.iter().position(|p| p * nf < 5.0) {
        return Err(Error::Usage(format!(
            "expected count {} in cell {k} is below 5; pool cells first",
            probs[k] * nf
        )));
    }
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * nf;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    let p = reg_inc_gamma_upper(df / 2.0, stat / 2.0)?;
    Ok(TestResult::new("chi_square", stat, p, DEFAULT_LEVEL, n))
}

/// Merges cells with expected count below 5, smallest first, until every cell reaches 5, then
/// runs [`chi_square`].
pub fn chi_square_pooled(observed: &[u64], probs: &[f64]) -> Result<TestResult> {
    let n = check_probs(observed, probs)? as f64;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let mut used = vec![false; probs.len()];
    let mut pool = (0u64, 0.0f64);
    for &k in &order {
        if pool.1 * n >= 5.0 || (pool.1 == 0.0 && probs[k] * n >= 5.0) {
            break;
        }
        pool.0 += observed[k];
        pool.1 += probs[k];
        used[k] = true;
    }
    if pool.1 == 0.0 && pool.0 > 0 {
        // Counts in cells of probability zero refute the model outright.
        return Ok(TestResult::new("chi_square", f64::INFINITY, 0.0, DEFAULT_LEVEL, n as u64));
    }
    let mut cells: Vec<(u64, f64)> = Vec::new();
    for k in 0..probs.len() {
        if !used[k] {
            cells.push((observed[k], probs[k]));
        }
    }
    if pool.1 > 0.0 {
        if pool.1 * n < 5.0 {
            // Fold an underfull pool into the smallest remaining cell.
            let (i, _) = cells
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .ok_or_else(|| Error::Usage("too few samples for any chi-square cell".into()))?;
            cells[i].0 += pool.0;
            cells[i].1 += pool.1;
        } else {
            cells.push(pool);
        }
    }
    if cells.len() < 2 {
        return Err(Error::Usage("pooling left fewer than two cells".into()));
    }
    let (obs, pr): (Vec<u64>, Vec<f64>) = cells.into_iter().unzip();
    chi_square(&obs, &pr)
}

/// Chi-square test that two count vectors over the same cells share one distribution.
/// Cells are pooled, rarest first, until every expected count is at least 5.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!("{} and {} cells", a.len(), b.len())));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Usage("both samples must be nonempty".into()));
    }
    let small = na.min(nb) / (na + nb);
    let mut order: Vec<usize> = (0..a.len()).filter(|&k| a[k] + b[k] > 0).collect();
    order.sort_by_key(|&k| a[k] + b[k]);
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut pool = (0u64, 0u64);
    for &k in &order {
        if ((pool.0 + pool.1) as f64 * small) < 5.0 {
            pool.0 += a[k];
            pool.1 += b[k];
        } else {
            cells.push((a[k], b[k]));
        }
    }
    if pool.0 + pool.1 > 0 {
        if ((pool.0 + pool.1) as f64 * small) < 5.0 && !cells.is_empty() {
            cells[0].0 += pool.0;
            cells[0].1 += pool.1;
        } else {
            cells.push(pool);
        }
    }
    if cells.len() < 2 {
        return Err(Error::Usage("pooling left fewer than two cells".into()));
    }
    let n = na + nb;
    let mut stat = 0.0;
    for &(x, y) in &cells {
        let tot = (x + y) as f64;
        let (ea, eb) = (tot * na / n, tot * nb / n);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let df = (cells.len() - 1) as f64;
    let p = reg_inc_gamma_upper(df / 2.0, stat / 2.0)?;
    Ok(TestResult::new("chi_square_homogeneity", stat, p, DEFAULT_LEVEL, n as u64))
}

/// Two-sided z-test for a Monte Carlo mean; passes iff `|z| <= 3`.
pub fn z_test(name: impl Into<String>, observed: f64, expected: f64, std_error: f64, n: u64) -> TestResult {
    let z = if std_error > 0.0 { (observed - expected) / std_error } else if observed == expected { 0.0 } else { f64::INFINITY };
    let p = erfc(z.abs() / std::f64::consts::SQRT_2);
    TestResult::new(name, z, p, erfc(3.0 / std::f64::consts::SQRT_2), n)
}

/// All set partitions of `{1..n}` in canonical form, sorted.
pub fn enumerate_set_partitions(n: usize) -> Result<Vec<SetPartition>> {
    if !(1..=12).contains(&n) {
        return Err(Error::Size(format!("enumerate_set_partitions supports 1 <= n <= 12, got {n}")));
    }
    // Restricted growth strings: a_0 = 0, a_k <= 1 + max(a_0..a_{k-1}).
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    let mut maxes = vec![0usize; n];
    loop {
        out.push(SetPartition::from_labels(1, &rgs));
        let mut k = n - 1;
        loop {
            if k == 0 {
                out.sort();
                return Ok(out);
            }
            if rgs[k] <= maxes[k - 1] {
                rgs[k] += 1;
                maxes[k] = maxes[k - 1].max(rgs[k]);
                for j in k + 1..n {
                    rgs[j] = 0;
                    maxes[j] = maxes[k];
                }
                break;
            }
            k -= 1;
        }
    }
}

/// Exact CRP law on `{1..n}` by exhaustive depth-first enumeration of seating decisions.
pub fn crp_seating_oracle(params: Params, n: usize) -> Result<BTreeMap<SetPartition, f64>> {
    if !(1..=8).contains(&n) {
        return Err(Error::Size(format!("crp_seating_oracle supports 1 <= n <= 8, got {n}")));
    }
    fn dfs(
        a: f64,
        t: f64,
        n: usize,
        seats: &mut Vec<usize>,
        sizes: &mut Vec<usize>,
        prob: f64,
        out: &mut BTreeMap<SetPartition, f64>,
    ) {
        let m = seats.len();
        if m == n {
            *out.entry(SetPartition::from_labels(1, seats)).or_insert(0.0) += prob;
            return;
        }
        let denom = m as f64 + t;
        for j in 0..=sizes.len() {
            let w = if j == sizes.len() { t + a * sizes.len() as f64 } else { sizes[j] as f64 - a };
            if j == sizes.len() {
                sizes.push(0);
            }
            sizes[j] += 1;
            seats.push(j);
            dfs(a, t, n, seats, sizes, prob * w / denom, out);
            seats.pop();
            sizes[j] -= 1;
            if sizes[j] == 0 {
                sizes.pop();
            }
        }
    }
    let mut out = BTreeMap::new();
    let mut seats = vec![0];
    let mut sizes = vec![1];
    dfs(params.alpha(), params.theta(), n, &mut seats, &mut sizes, 1.0, &mut out);
    Ok(out)
}

/// All `n!` recursive trees on `{0..n}` with vertex 1 attached to the root.
pub fn enumerate_recursive_trees(n: usize) -> Result<Vec<RecursiveTree>> {
    if !(1..=8).contains(&n) {
        return Err(Error::Size(format!("enumerate_recursive_trees supports 1 <= n <= 8, got {n}")));
    }
    let mut out = Vec::new();
    let mut parents = vec![0usize];
    fn rec(n: usize, parents: &mut Vec<usize>, out: &mut Vec<RecursiveTree>) {
        let v = parents.len() + 1;
        if v > n {
            out.push(RecursiveTree::from_parents(parents).expect("valid by construction"));
            return;
        }
        for p in 0..v {
            parents.push(p);
            rec(n, parents, out);
            parents.pop();
        }
    }
    rec(n, &mut parents, &mut out);
    Ok(out)
}
