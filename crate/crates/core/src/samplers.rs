//! Samplers for `PD(alpha, theta)`, `GEM(alpha, theta)` and exchangeable `(alpha, theta)`
//! partitions.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fenwick::WeightTree;
use crate::numerics::{sample_beta_pair, sample_exponential, sample_gamma, LevyTail, RngStream};
use crate::partition::{MassPartition, Params, SetPartition, SizeBiasedWeights, Tail, TailLaw};

/// Stopping rule for infinite constructions: stop once the residual is below `eps` or
/// `max_atoms` atoms exist, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub eps: f64,
    pub max_atoms: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { eps: 1e-8, max_atoms: 100_000 }
    }
}

impl Truncation {
    pub fn new(eps: f64, max_atoms: usize) -> Result<Self> {
        let t = Truncation { eps, max_atoms };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return domain(format!("truncation eps must lie in (0, 1), got {}", self.eps));
        }
        if self.max_atoms == 0 {
            return domain("max_atoms must be at least 1");
        }
        Ok(())
    }
}

/// Stick-breaking `GEM(alpha, theta)` with `B_n ~ Beta(1 - alpha, theta + n alpha)`.
///
/// The undiscovered weights are `residual * PD(alpha, theta + K alpha)` after `K` sticks.
pub fn gem_sticks(params: Params, trunc: Truncation, rng: &mut RngStream) -> Result<SizeBiasedWeights> {
    trunc.validate()?;
    let (a, t) = (params.alpha(), params.theta());
    let mut weights = Vec::new();
    let mut rest = 1.0;
    let mut n = 0;
    while rest >= trunc.eps && n < trunc.max_atoms {
        n += 1;
        let (b, c) = sample_beta_pair(1.0 - a, t + n as f64 * a, rng)?;
        weights.push(rest * b);
        rest *= c;
    }
    Ok(SizeBiasedWeights {
        weights,
        residual: rest,
        tail: Some(TailLaw::PoissonDirichlet { alpha: a, theta: t + n as f64 * a }),
        truncated: rest >= trunc.eps,
    })
}

/// Ranked stick-breaking weights: a `PD(alpha, theta)` draw whose residual keeps its exact law.
pub fn pd_sample(params: Params, trunc: Truncation, rng: &mut RngStream) -> Result<MassPartition> {
    Ok(gem_to_mass_partition(gem_sticks(params, trunc, rng)?))
}

pub(crate) fn gem_to_mass_partition(g: SizeBiasedWeights) -> MassPartition {
    let tails = match g.tail {
        Some(law) if g.residual > 0.0 => vec![Tail { mass: g.residual, law }],
        _ => Vec::new(),
    };
    MassPartition::from_parts(g.weights, g.residual, tails, g.truncated)
}

/// Chinese restaurant process on customers `1..=n`.
pub fn crp_sample(params: Params, n: usize, rng: &mut RngStream) -> Result<SetPartition> {
    if n == 0 {
        return domain("crp_sample requires n >= 1");
    }
    let (a, t) = (params.alpha(), params.theta());
    let mut tables = WeightTree::with_capacity(64);
    let mut table_of = Vec::with_capacity(n);
    tables.push(1.0 - a);
    table_of.push(0usize);
    for m in 1..n {
        // Occupied tables hold total weight m - k alpha; a new table has theta + k alpha.
        let u = rng.uniform() * (m as f64 + t);
        let k = tables.len();
        let occupied = m as f64 - k as f64 * a;
        let j = if u < occupied { tables.find(u) } else { tables.push(0.0) };
        tables.add(j, if j == k { 1.0 - a } else { 1.0 });
        table_of.push(j);
    }
    Ok(SetPartition::from_labels(1, &table_of))
}

/// Probability that the CRP seats customers `1..=n` as `p`, seating in label order.
pub fn crp_exact_prob(params: Params, p: &SetPartition) -> Result<f64> {
    let n = p.num_labels();
    if p.lo() != 1 {
        return domain(format!("crp_exact_prob needs a partition of {{1..n}}, got lo = {}", p.lo()));
    }
    if n > 12 {
        return Err(Error::Size(format!("crp_exact_prob supports n <= 12, got {n}")));
    }
    let (a, t) = (params.alpha(), params.theta());
    let block_of = p.block_of();
    let mut sizes = vec![0usize; p.num_blocks()];
    let mut k = 0;
    let mut prob = 1.0;
    for (m, &b) in block_of.iter().enumerate() {
        if m > 0 {
            let denom = m as f64 + t;
            prob *= if sizes[b] == 0 { (t + k as f64 * a) / denom } else { (sizes[b] as f64 - a) / denom };
        }
        if sizes[b] == 0 {
            k += 1;
        }
        sizes[b] += 1;
    }
    Ok(prob)
}

/// Raw output of the subordinator construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorSample {
    #[serde(skip)]
    pub ranked_jumps: Vec<f64>,
    pub total_mass: f64,
    pub horizon: f64,
    pub residual_mass: f64,
}

/// `PD(alpha, theta)` as normalised ranked jumps of a subordinator (Ferguson-Klass).
///
/// `alpha = 0`: gamma subordinator on `[0, theta]`. `alpha > 0`: jumps of the subordinator with
/// Lévy density `alpha x^(-alpha-1) e^-x` on `[0, S]`, `S ~ Gamma(theta/alpha, rate Gamma(1-alpha))`.
/// Undrawn jumps below the last one are kept as a [`TailLaw::LevyCutoff`] tail.
pub fn subordinator_pd(
    params: Params,
    trunc: Truncation,
    rng: &mut RngStream,
) -> Result<(MassPartition, SubordinatorSample)> {
    trunc.validate()?;
    let (a, t) = (params.alpha(), params.theta());
    if t <= 0.0 {
        return Err(Error::Unsupported(format!(
            "subordinator representation needs theta > 0, got {t}; use stick-breaking"
        )));
    }
    let levy = LevyTail::new(a)?;
    let horizon = if a == 0.0 { t } else { sample_gamma(t / a, levy.gamma_one_minus_alpha(), rng)? };
    let mut jumps: Vec<f64> = Vec::new();
    let mut arrival = 0.0;
    let mut drawn = 0.0;
    let mut small = 0.0;
    while jumps.len() < trunc.max_atoms {
        arrival += sample_exponential(rng);
        let y = arrival / horizon;
        let xi = match jumps.last() {
            Some(&prev) => levy.inverse_below(y, prev),
            None => levy.inverse(y),
        };
        let xi = match xi {
            Ok(x) if x > 0.0 => x,
            // Remaining jumps are below the smallest positive double.
            Err(Error::Numeric(_)) | Ok(_) => {
                small = 0.0;
                break;
            }
            Err(e) => return Err(e),
        };
        jumps.push(xi);
        drawn += xi;
        small = horizon * levy.small_mass(xi);
        if small < trunc.eps * drawn {
            break;
        }
    }
    let total = drawn + small;
    let truncated = small >= trunc.eps * drawn;
    let atoms: Vec<f64> = jumps.iter().map(|&x| x / total).collect();
    let residual = small / total;
    let tails = match jumps.last() {
        Some(&c) if residual > 0.0 => {
            vec![Tail { mass: residual, law: TailLaw::LevyCutoff { alpha: a, cutoff: c, scale: total } }]
        }
        _ => Vec::new(),
    };
    let x = MassPartition::from_parts(atoms, residual, tails, truncated);
    Ok((x, SubordinatorSample { ranked_jumps: jumps, total_mass: total, horizon, residual_mass: small }))
}

/// Pitman's novel/clone branching population, run until `n` individuals exist; returns the
/// colour partition of individuals `1..=n` in birth order.
///
/// The first individual begets novel offspring at rate `theta + alpha` and clones at rate
/// `1 - alpha`; later novel individuals at rates `alpha` and `1 - alpha`; clones beget clones at
/// rate `1`. Only the order of births matters, so each birth picks a parent in proportion to
/// its total rate and then the offspring type in proportion to the parent's type rates.
pub fn branching_sample(params: Params, n: usize, rng: &mut RngStream) -> Result<SetPartition> {
    if n == 0 {
        return domain("branching_sample requires n >= 1");
    }
    let (a, t) = (params.alpha(), params.theta());
    #[derive(Clone, Copy)]
    enum Kind {
        First,
        Novel,
        Clone,
    }
    let mut rates = WeightTree::with_capacity(n);
    let mut kind = Vec::with_capacity(n);
    let mut colour = Vec::with_capacity(n);
    rates.push(t + 1.0);
    kind.push(Kind::First);
    colour.push(0usize);
    let mut colours = 1;
    while kind.len() < n {
        let parent = rates.find(rng.uniform() * rates.total());
        let novel = match kind[parent] {
            Kind::First => rng.uniform() * (t + 1.0) < t + a,
            Kind::Novel => rng.uniform() < a,
            Kind::Clone => false,
        };
        if novel {
            kind.push(Kind::Novel);
            colour.push(colours);
            colours += 1;
        } else {
            kind.push(Kind::Clone);
            colour.push(colour[parent]);
        }
        rates.push(1.0);
    }
    Ok(SetPartition::from_labels(1, &colour))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::reg_inc_beta;
    use crate::stattest::{chi_square_pooled, enumerate_set_partitions, ks_one_sample};

    fn p(a: f64, t: f64) -> Params {
        Params::new(a, t).unwrap()
    }

    #[test]
    fn injected_sticks_product_formula() {
        let w = SizeBiasedWeights::from_sticks(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(w.weights, vec![0.5, 0.25, 0.125]);
        assert_eq!(w.residual, 0.125);
    }

    #[test]
    fn gem_residual_is_product_and_stops() {
        let mut rng = RngStream::new(1, 0);
        let g = gem_sticks(p(0.0, 1.0), Truncation::default(), &mut rng).unwrap();
        assert!(g.residual < 1e-8 && !g.truncated);
        let total: f64 = g.weights.iter().sum::<f64>() + g.residual;
        assert!((total - 1.0).abs() < 1e-12);
        let g = gem_sticks(p(0.9, 2.0), Truncation::new(1e-8, 50).unwrap(), &mut rng).unwrap();
        assert_eq!(g.weights.len(), 50);
        assert!(g.truncated);
        assert_eq!(g.tail, Some(TailLaw::PoissonDirichlet { alpha: 0.9, theta: 2.0 + 45.0 }));
    }

    #[test]
    fn first_weight_is_size_biased_beta() {
        let params = p(0.5, 0.5);
        let mut rng = RngStream::new(2, 0);
        let trunc = Truncation::new(1e-8, 1).unwrap();
        let xs: Vec<f64> = (0..20_000)
            .map(|_| gem_sticks(params, trunc, &mut rng).unwrap().weights[0])
            .collect();
        let r = ks_one_sample(&xs, |x| reg_inc_beta(0.5, 1.0, x.clamp(0.0, 1.0)).unwrap()).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn pd_sample_invariants() {
        let mut rng = RngStream::new(3, 0);
        for params in [p(0.0, 1.0), p(0.5, 0.5), p(0.3, -0.2), p(0.9, 2.0)] {
            let x = pd_sample(params, Truncation::new(1e-8, 500).unwrap(), &mut rng).unwrap();
            assert!(x.atoms().windows(2).all(|w| w[0] >= w[1]));
            assert!((x.stored_mass() + x.residual() - 1.0).abs() < 1e-12);
            assert!(x.largest() >= x.stored_mass() / (x.len() as f64 + 1.0));
            assert!((x.tails()[0].mass - x.residual()).abs() == 0.0 || x.residual() == 0.0);
        }
    }

    #[test]
    fn crp_examples() {
        let mut rng = RngStream::new(4, 0);
        assert_eq!(crp_sample(p(0.5, 0.5), 1, &mut rng).unwrap().blocks(), &[vec![1]]);
        let q = SetPartition::new(1, vec![vec![1], vec![2]]).unwrap();
        assert!((crp_exact_prob(p(0.0, 1.0), &q).unwrap() - 0.5).abs() < 1e-15);
        let q = SetPartition::new(1, vec![vec![1, 2], vec![3]]).unwrap();
        assert!((crp_exact_prob(p(0.5, 0.5), &q).unwrap() - 2.0 / 15.0).abs() < 1e-15);
        let big = SetPartition::new(1, vec![(1..=13).collect()]).unwrap();
        assert!(matches!(crp_exact_prob(p(0.5, 0.5), &big), Err(Error::Size(_))));
    }

    #[test]
    fn crp_exact_prob_sums_to_one() {
        for params in [p(0.0, 1.0), p(0.5, 0.5), p(0.3, -0.2)] {
            let s: f64 = enumerate_set_partitions(4)
                .unwrap()
                .iter()
                .map(|q| crp_exact_prob(params, q).unwrap())
                .sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    fn partition_counts(
        n: usize,
        params: Params,
        reps: usize,
        mut draw: impl FnMut(&mut RngStream) -> SetPartition,
    ) -> (Vec<u64>, Vec<f64>) {
        let all = enumerate_set_partitions(n).unwrap();
        let probs: Vec<f64> = all.iter().map(|q| crp_exact_prob(params, q).unwrap()).collect();
        let mut counts = vec![0u64; all.len()];
        let mut rng = RngStream::new(77, 0);
        for _ in 0..reps {
            let q = draw(&mut rng);
            counts[all.binary_search(&q).unwrap()] += 1;
        }
        (counts, probs)
    }

    #[test]
    fn crp_and_branching_match_exact_law() {
        let params = p(0.3, 1.0);
        let (c, pr) = partition_counts(4, params, 20_000, |r| crp_sample(params, 4, r).unwrap());
        assert!(chi_square_pooled(&c, &pr).unwrap().pass);
        let (c, pr) = partition_counts(4, params, 20_000, |r| branching_sample(params, 4, r).unwrap());
        assert!(chi_square_pooled(&c, &pr).unwrap().pass);
    }

    #[test]
    fn subordinator_invariants() {
        let mut rng = RngStream::new(5, 0);
        for params in [p(0.0, 2.0), p(0.5, 1.5)] {
            let (x, s) = subordinator_pd(params, Truncation::new(1e-8, 2000).unwrap(), &mut rng).unwrap();
            assert!(s.ranked_jumps.windows(2).all(|w| w[0] > w[1]));
            let sum: f64 = s.ranked_jumps.iter().sum::<f64>() + s.residual_mass;
            assert!(((sum - s.total_mass) / s.total_mass).abs() < 1e-9);
            assert!((x.stored_mass() + x.residual() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            subordinator_pd(p(0.5, -0.1), Truncation::default(), &mut rng),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn branching_examples() {
        let mut rng = RngStream::new(6, 0);
        assert_eq!(branching_sample(p(0.3, 1.0), 1, &mut rng).unwrap().num_blocks(), 1);
        let reps = 40_000;
        let same = (0..reps)
            .filter(|_| branching_sample(p(0.3, 1.0), 2, &mut rng).unwrap().num_blocks() == 1)
            .count();
        let want = 0.7 / 2.0;
        let se = (want * (1.0 - want) / reps as f64).sqrt();
        assert!((same as f64 / reps as f64 - want).abs() < 3.5 * se);
    }
}
