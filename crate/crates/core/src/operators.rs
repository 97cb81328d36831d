//! The random operators `Frag_alpha` and `Coag_{alpha,theta}`, their deterministic cores, the
//! size-biased insertion map and Pitman's `(alpha, -alpha beta)`-FRAG / `(beta, theta/alpha)`-COAG.
//!
//! Operators act exactly on residual mass with a known [`TailLaw`]: a size-biased pick that
//! lands in a tail materialises an atom from it, and coagulation thins tails by the same
//! Bernoulli marks as the stored atoms.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{sample_beta, RngStream};
use crate::partition::{Location, MassPartition, Params, SizeBiasedWeights, Tail, TailLaw};
use crate::samplers::{gem_sticks, Truncation};

/// Internal randomness of one `Frag_alpha` step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragWitness {
    /// Index of the split atom in the partition the split acted on.
    pub chosen_index: usize,
    /// Mass of the split atom.
    pub split_mass: f64,
    /// The pick fell in residual mass of unknown law and was renormalised over stored atoms.
    pub residual_hit: bool,
    /// The pick fell in a tail and the split atom was materialised from it.
    pub tail_hit: bool,
    /// The `GEM(alpha, 1 - alpha)` splitter.
    pub splitter: SizeBiasedWeights,
}

/// Internal randomness of one `Coag_{alpha,theta}` step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoagWitness {
    /// Selection probability `B`.
    pub b: f64,
    /// Marks aligned to the stored atoms of the input.
    pub indicators: Vec<bool>,
    /// Mass drawn from the input tails into the merged block.
    pub tail_merged_mass: f64,
}

/// Replaces atom `i` of `x` by `x_i * eta_j`; the splitter residual joins the output residual,
/// carrying `eta`'s tail law when known.
pub fn frag_det(x: &MassPartition, i: usize, eta: &SizeBiasedWeights) -> Result<MassPartition> {
    if i >= x.len() {
        return domain(format!("atom index {i} out of range for {} atoms", x.len()));
    }
    let (mut atoms, mut residual, mut tails, truncated) = x.clone().into_parts();
    let xi = atoms.swap_remove(i);
    atoms.extend(eta.weights.iter().map(|w| xi * w));
    let r = xi * eta.residual;
    residual += r;
    if let Some(law) = eta.tail {
        if r > 0.0 {
            tails.push(Tail { mass: r, law });
        }
    }
    Ok(MassPartition::from_parts(atoms, residual, tails, truncated || eta.truncated))
}

/// Picks an atom of `x` in a size-biased way. Picks in a tail materialise a new atom; picks in
/// unknown residual mass are mapped affinely onto the stored atoms.
fn size_biased_atom(x: &mut MassPartition, rng: &mut RngStream) -> Result<(usize, bool, bool)> {
    let u = rng.uniform();
    match x.locate(u) {
        Location::Atom(i) => Ok((i, false, false)),
        Location::Tail(j) => Ok((x.materialize_tail(j, rng)?, false, true)),
        Location::Unknown => {
            let stored = x.stored_mass();
            if stored <= 0.0 {
                return domain("size-biased pick from a partition without atoms or tail laws");
            }
            let known = stored + x.tails().iter().map(|t| t.mass).sum::<f64>();
            let unknown = (1.0 - known).max(f64::MIN_POSITIVE);
            let v = ((u - known) / unknown).clamp(0.0, 1.0) * stored;
            let mut acc = 0.0;
            let mut idx = x.len() - 1;
            for (k, &a) in x.atoms().iter().enumerate() {
                acc += a;
                if v < acc {
                    idx = k;
                    break;
                }
            }
            Ok((idx, true, false))
        }
    }
}

/// `Frag_alpha`: splits a size-biased atom by an independent `PD(alpha, 1 - alpha)` vector.
pub fn frag(
    alpha: f64,
    x: &MassPartition,
    trunc: Truncation,
    rng: &mut RngStream,
) -> Result<(MassPartition, FragWitness)> {
    let splitter_params = Params::new(alpha, 1.0 - alpha)?;
    let mut work = x.clone();
    let (i, residual_hit, tail_hit) = size_biased_atom(&mut work, rng)?;
    let eta = gem_sticks(splitter_params, trunc, rng)?;
    let out = frag_det(&work, i, &eta)?;
    let w = FragWitness {
        chosen_index: i,
        split_mass: work.atoms()[i],
        residual_hit,
        tail_hit,
        splitter: eta,
    };
    Ok((out, w))
}

/// Merges the atoms with `indicators[j] = true` into one block; the residual passes through.
pub fn coag_det(x: &MassPartition, indicators: &[bool]) -> Result<MassPartition> {
    if indicators.len() != x.len() {
        return domain(format!(
            "{} indicators for {} atoms",
            indicators.len(),
            x.len()
        ));
    }
    Ok(merge_marked(x.clone(), indicators, 0.0, None))
}

/// The merged atom is the complement of everything else, so that `1 - merged` keeps full
/// relative precision when nearly all mass merges.
fn merge_marked(x: MassPartition, marks: &[bool], extra: f64, tails: Option<Vec<Tail>>) -> MassPartition {
    let unknown = x.unknown_residual();
    let (atoms, residual, old_tails, truncated) = x.into_parts();
    let any_marked = extra > 0.0 || marks.iter().any(|&m| m);
    let tails = tails.unwrap_or(old_tails);
    let residual = if extra > 0.0 { unknown + tails.iter().map(|t| t.mass).sum::<f64>() } else { residual };
    let mut out: Vec<f64> = atoms.iter().zip(marks).filter(|(_, &m)| !m).map(|(&a, _)| a).collect();
    if any_marked {
        let rest: f64 = out.iter().sum::<f64>() + residual;
        out.push((1.0 - rest).max(0.0));
    }
    MassPartition::from_parts(out, residual, tails, truncated)
}

/// Selection probability of `Coag_{alpha,theta}`: `Beta((1-alpha)/alpha, (theta+alpha)/alpha)`,
/// or `1/(theta + 1)` when `alpha = 0`.
pub fn coag_fraction(params: Params, rng: &mut RngStream) -> Result<f64> {
    let (a, t) = (params.alpha(), params.theta());
    if a == 0.0 {
        Ok(1.0 / (t + 1.0))
    } else {
        sample_beta((1.0 - a) / a, (t + a) / a, rng)
    }
}

/// `Coag_{alpha,theta}`: merges the atoms selected by i.i.d. `Bernoulli(B)` marks.
pub fn coag(params: Params, x: &MassPartition, rng: &mut RngStream) -> Result<(MassPartition, CoagWitness)> {
    let b = coag_fraction(params, rng)?;
    let indicators: Vec<bool> = (0..x.len()).map(|_| rng.bernoulli(b)).collect();
    let mut tail_merged = 0.0;
    let mut tails = Vec::with_capacity(x.tails().len());
    for t in x.tails() {
        let (sel, rest) = t.thin(b, rng)?;
        tail_merged += sel;
        tails.extend(rest);
    }
    let out = merge_marked(x.clone(), &indicators, tail_merged, Some(tails));
    Ok((out, CoagWitness { b, indicators, tail_merged_mass: tail_merged }))
}

/// Scales `y` by `1 - b` and inserts an atom `b`.
pub fn insert_size_biased(y: &MassPartition, b: f64) -> Result<MassPartition> {
    if !(b > 0.0 && b < 1.0) {
        return domain(format!("inserted mass must lie in (0, 1), got {b}"));
    }
    let f = 1.0 - b;
    let mut atoms: Vec<f64> = y.atoms().iter().map(|a| a * f).collect();
    atoms.push(b);
    let tails = y.tails().iter().map(|t| t.scaled(f)).collect();
    Ok(MassPartition::from_parts(atoms, y.residual() * f, tails, y.truncated()))
}

/// Splits atom `j` of `x` by `splitters[j]`. Splitter residuals join the output residual with
/// their tail laws; the tails of `x` pass through.
pub fn pitman_frag_det(x: &MassPartition, splitters: &[SizeBiasedWeights]) -> Result<MassPartition> {
    if splitters.len() != x.len() {
        return domain(format!("{} splitters for {} atoms", splitters.len(), x.len()));
    }
    let mut atoms = Vec::new();
    let mut residual = x.residual();
    let mut tails = x.tails().to_vec();
    let mut truncated = x.truncated();
    for (&xj, s) in x.atoms().iter().zip(splitters) {
        atoms.extend(s.weights.iter().map(|w| xj * w));
        let r = xj * s.residual;
        residual += r;
        if let (Some(law), true) = (s.tail, r > 0.0) {
            tails.push(Tail { mass: r, law });
        }
        truncated |= s.truncated;
    }
    Ok(MassPartition::from_parts(atoms, residual, tails, truncated))
}

fn check_pitman(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("Pitman operators need 0 < alpha < 1, got {alpha}"));
    }
    if !(0.0..1.0).contains(&beta) {
        return domain(format!("Pitman operators need 0 <= beta < 1, got {beta}"));
    }
    Ok(())
}

/// `(alpha, -alpha beta)`-FRAG: splits every atom by an independent `PD(alpha, -alpha beta)`.
///
/// A tail `PD(alpha beta, theta_t)` of the input becomes `PD(alpha, theta_t)`, which is the
/// law of splitting all its blocks; tails of any other law are forgotten.
pub fn pitman_frag(
    x: &MassPartition,
    alpha: f64,
    beta: f64,
    trunc: Truncation,
    rng: &mut RngStream,
) -> Result<MassPartition> {
    check_pitman(alpha, beta)?;
    let split = Params::new(alpha, -alpha * beta)?;
    let splitters = (0..x.len())
        .map(|_| gem_sticks(split, trunc, rng))
        .collect::<Result<Vec<_>>>()?;
    let ab = alpha * beta;
    let (atoms, residual, tails, truncated) = x.clone().into_parts();
    let tails = tails
        .into_iter()
        .filter_map(|t| match t.law {
            TailLaw::PoissonDirichlet { alpha: a, theta } if (a - ab).abs() <= 1e-12 => {
                Some(Tail::pd(t.mass, alpha, theta))
            }
            _ => None,
        })
        .collect();
    pitman_frag_det(&MassPartition::from_parts(atoms, residual, tails, truncated), &splitters)
}

/// Groups atom `j` of `y` into the interval of `q` containing `u[j]`, sums per group and
/// reranks. The residual of `y` passes through as mass of unknown law.
pub fn pitman_coag_det(y: &MassPartition, q: &SizeBiasedWeights, u: &[f64]) -> Result<MassPartition> {
    if u.len() != y.len() {
        return domain(format!("{} uniforms for {} atoms", u.len(), y.len()));
    }
    let bounds = cumulative(&q.weights);
    let mut groups = vec![0.0; q.weights.len()];
    for (&a, &uj) in y.atoms().iter().zip(u) {
        let g = bounds.partition_point(|&c| c <= uj);
        if g >= groups.len() {
            return domain(format!("uniform {uj} is not covered by the interval lengths"));
        }
        groups[g] += a;
    }
    Ok(MassPartition::from_parts(groups, y.residual(), Vec::new(), y.truncated()))
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// `(beta, theta/alpha)`-COAG: throws a uniform per atom of `y` onto intervals with
/// `GEM(beta, theta/alpha)` lengths and merges atoms sharing an interval.
///
/// Intervals are discovered lazily up to `trunc.max_atoms`; atoms beyond the discovered
/// intervals stay singletons. Tail mass of `y` consists of infinitely many small atoms, so each
/// discovered interval receives its length times the tail mass and the undiscovered intervals'
/// share joins the residual.
pub fn pitman_coag(
    y: &MassPartition,
    beta: f64,
    theta_over_alpha: f64,
    trunc: Truncation,
    rng: &mut RngStream,
) -> Result<MassPartition> {
    trunc.validate()?;
    let qp = Params::new(beta, theta_over_alpha)
        .map_err(|e| Error::Domain(format!("Q ~ GEM(beta, theta/alpha): {e}")))?;
    let u: Vec<f64> = (0..y.len()).map(|_| rng.uniform()).collect();
    let umax = u.iter().copied().fold(0.0, f64::max);
    // Extend sticks until every throw is covered and the uncovered length is below eps.
    let (a, t) = (qp.alpha(), qp.theta());
    let mut weights = Vec::new();
    let mut covered = 0.0;
    let mut rest = 1.0;
    while (covered <= umax || rest >= trunc.eps) && weights.len() < trunc.max_atoms {
        let n = weights.len() + 1;
        let b = sample_beta(1.0 - a, t + n as f64 * a, rng)?;
        weights.push(rest * b);
        covered += rest * b;
        rest *= 1.0 - b;
    }
    let bounds = cumulative(&weights);
    let tail_mass: f64 = y.tails().iter().map(|t| t.mass).sum();
    let mut groups: Vec<f64> = weights.iter().map(|q| q * tail_mass).collect();
    let mut singles = Vec::new();
    for (&mass, &uj) in y.atoms().iter().zip(&u) {
        let g = bounds.partition_point(|&c| c <= uj);
        if g < groups.len() {
            groups[g] += mass;
        } else {
            singles.push(mass);
        }
    }
    groups.extend(singles);
    let residual = y.unknown_residual() + tail_mass * rest;
    let truncated = y.truncated() || rest >= trunc.eps;
    Ok(MassPartition::from_parts(groups, residual, Vec::new(), truncated))
}
