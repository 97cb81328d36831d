//! Mass partitions, size-biased weight sequences, set partitions and the deterministic
//! algebra shared by samplers and operators.
//!
//! A [`MassPartition`] stores finitely many ranked atoms plus a residual. Part of the residual
//! may carry a known law (a [`Tail`]); operators use it to act exactly on mass that was never
//! materialised as atoms. Residual mass without a recorded law is "unknown".

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{sample_beta_pair, sample_exponential, sample_gamma, RngStream};

/// Tolerance on `sum(atoms) + residual = 1` for validated constructors.
pub const MASS_TOL: f64 = 1e-12;
/// Largest deviation from unit total that [`rank_normalize`] silently rescales.
pub const RESCALE_TOL: f64 = 1e-9;

/// Validated pair `(alpha, theta)` with `0 <= alpha < 1` and `theta > -alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct Params {
    alpha: f64,
    theta: f64,
}

#[derive(Deserialize)]
struct RawParams {
    alpha: f64,
    theta: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        Params::new(r.alpha, r.theta)
    }
}

impl Params {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return domain(format!("alpha must satisfy 0 <= alpha < 1, got {alpha}"));
        }
        if !(theta.is_finite() && theta > -alpha) {
            return domain(format!("theta must satisfy theta > -alpha = {}, got {theta}", -alpha));
        }
        Ok(Params { alpha, theta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `(alpha, theta + by)`.
    pub fn shift_theta(&self, by: f64) -> Result<Self> {
        Params::new(self.alpha, self.theta + by)
    }

    /// Mean `(1 - alpha)/(1 + theta)` of a size-biased pick from `PD(alpha, theta)`.
    pub fn size_biased_mean(&self) -> f64 {
        (1.0 - self.alpha) / (1.0 + self.theta)
    }
}

/// Law of a block of residual mass, relative to that block's own total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum TailLaw {
    /// The tail is `mass * PD(alpha, theta)`.
    PoissonDirichlet { alpha: f64, theta: f64 },
    /// The tail is the set of subordinator jumps below `cutoff` (Lévy density
    /// `alpha t^(-alpha-1) e^-t`, or `t^-1 e^-t` when `alpha = 0`), divided by `scale`.
    LevyCutoff { alpha: f64, cutoff: f64, scale: f64 },
}

/// Residual mass with a known law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub mass: f64,
    pub law: TailLaw,
}

impl Tail {
    pub fn pd(mass: f64, alpha: f64, theta: f64) -> Tail {
        Tail { mass, law: TailLaw::PoissonDirichlet { alpha, theta } }
    }

    pub fn scaled(&self, f: f64) -> Tail {
        Tail { mass: self.mass * f, law: self.law }
    }

    /// Draws a size-biased atom out of the tail. Returns the atom mass and what is left.
    ///
    /// For a Poisson-Dirichlet tail this is exact: the atom is `mass * B` with
    /// `B ~ Beta(1 - alpha, theta + alpha)` and the remainder is `mass (1 - B) PD(alpha, theta + alpha)`.
    pub fn materialize(&self, rng: &mut RngStream) -> Result<(f64, Option<Tail>)> {
        match self.law {
            TailLaw::PoissonDirichlet { alpha, theta } => {
                let (b, rest) = sample_beta_pair(1.0 - alpha, theta + alpha, rng)?;
                let atom = self.mass * b;
                let left = self.mass * rest;
                let tail = (left > 0.0).then(|| Tail::pd(left, alpha, theta + alpha));
                Ok((atom, tail))
            }
            TailLaw::LevyCutoff { alpha, cutoff, scale } => {
                let t = sample_truncated_gamma(1.0 - alpha, cutoff, rng)?;
                let atom = (t / scale).min(self.mass);
                let left = self.mass - atom;
                let tail = (left > 0.0).then_some(Tail { mass: left, law: self.law });
                Ok((atom, tail))
            }
        }
    }

    /// Splits the tail by independent `Bernoulli(b)` marks on its atoms. Returns the marked
    /// mass and the unmarked remainder.
    ///
    /// Poisson-Dirichlet tails: the marked fraction is exact (see [`pd_unmarked_fraction`]); the
    /// remainder is given the law `PD(alpha, (1 - b) theta)`, exact when `alpha = 0`.
    /// Lévy tails hold infinitely many small jumps, so the marked mass is `b * mass`.
    pub fn thin(&self, b: f64, rng: &mut RngStream) -> Result<(f64, Option<Tail>)> {
        if !(0.0..=1.0).contains(&b) {
            return domain(format!("thinning probability must lie in [0,1], got {b}"));
        }
        if b == 0.0 {
            return Ok((0.0, Some(*self)));
        }
        if b == 1.0 {
            return Ok((self.mass, None));
        }
        match self.law {
            TailLaw::PoissonDirichlet { alpha, theta } if theta <= 0.0 => {
                // One size-biased atom leaves a rest with theta + alpha > 0.
                let (atom, rest) = self.materialize(rng)?;
                let sel = match rest {
                    Some(t) => t.thin(b, rng)?.0,
                    None => 0.0,
                };
                let marked = sel + if rng.bernoulli(b) { atom } else { 0.0 };
                let unmarked = self.mass - marked;
                Ok((marked, (unmarked > 0.0).then(|| Tail::pd(unmarked, alpha, (1.0 - b) * (theta + alpha)))))
            }
            TailLaw::PoissonDirichlet { alpha, theta } => {
                let u = pd_unmarked_fraction(alpha, theta, b, rng)?;
                let tail = Tail::pd(self.mass * u, alpha, (1.0 - b) * theta);
                Ok((self.mass * (1.0 - u), (u > 0.0).then_some(tail)))
            }
            TailLaw::LevyCutoff { .. } => {
                Ok((self.mass * b, Some(Tail { mass: self.mass * (1.0 - b), law: self.law })))
            }
        }
    }
}

/// Total mass of the atoms of `V ~ PD(alpha, theta)`, `theta > 0`, left unmarked by
/// independent `Bernoulli(b)` marks.
///
/// `alpha = 0`: `Beta((1 - b) theta, b theta)`. `alpha > 0`: splitting the atoms of
/// `W ~ PD(0, theta)` by independent `PD(alpha, 0)` vectors yields `PD(alpha, theta)`, and the
/// unmarked fraction of `PD(alpha, 0)` is `c S_2 / (m S_1 + c S_2)` with `S_1, S_2` independent
/// positive `alpha`-stable, `m = b^(1/alpha)` and `c = (1 - b)^(1/alpha)`. The series over the
/// atoms of `W` stops once the expected contribution of the rest is below `1e-6` of the sum.
pub fn pd_unmarked_fraction(alpha: f64, theta: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) || !(theta > 0.0) || !(b > 0.0 && b < 1.0) {
        return domain(format!("unmarked fraction needs 0 <= alpha < 1, theta > 0, 0 < b < 1; got {alpha}, {theta}, {b}"));
    }
    if alpha == 0.0 {
        return Ok(sample_beta_pair((1.0 - b) * theta, b * theta, rng)?.0);
    }
    let shift = (b.ln() - (1.0 - b).ln()) / alpha;
    let mut u = 0.0;
    let mut rest = 1.0;
    for _ in 0..1_000_000 {
        let w = 1.0 - rng.open_uniform().powf(1.0 / theta);
        let d = shift + ln_positive_stable(alpha, rng) - ln_positive_stable(alpha, rng);
        // 1 / (1 + e^d) without overflow.
        let g = if d > 0.0 { (-d).exp() / (1.0 + (-d).exp()) } else { 1.0 / (1.0 + d.exp()) };
        u += rest * w * g;
        rest *= 1.0 - w;
        if rest * (1.0 - b) <= 1e-6 * u || rest < 1e-300 {
            break;
        }
    }
    Ok((u + rest * (1.0 - b)).min(1.0))
}

/// `ln S` for `S` positive `alpha`-stable with `E[e^(-l S)] = e^(-l^alpha)` (Kanter's representation).
fn ln_positive_stable(alpha: f64, rng: &mut RngStream) -> f64 {
    let u = std::f64::consts::PI * rng.open_uniform();
    let e = sample_exponential(rng);
    let ln_a = alpha / (1.0 - alpha) * (alpha * u).sin().ln() + ((1.0 - alpha) * u).sin().ln()
        - (u.sin()).ln() / (1.0 - alpha);
    (1.0 - alpha) / alpha * (ln_a - e.ln())
}

/// Draws from the density proportional to `t^(shape-1) e^-t` on `(0, c)`.
fn sample_truncated_gamma(shape: f64, c: f64, rng: &mut RngStream) -> Result<f64> {
    if !(c > 0.0) {
        return domain(format!("truncation point must be positive, got {c}"));
    }
    if c <= 1.0 {
        // Power-law proposal on (0, c), accepted with probability e^-t >= e^-1.
        loop {
            let t = c * rng.open_uniform().powf(1.0 / shape);
            if rng.uniform() < (-t).exp() {
                return Ok(t);
            }
        }
    }
    loop {
        let t = sample_gamma(shape, 1.0, rng)?;
        if t < c {
            return Ok(t);
        }
    }
}

/// Index returned by [`size_biased_index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SbIndex {
    Atom(usize),
    Residual,
}

/// Where a uniform variate lands in a [`MassPartition`], tails included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Atom(usize),
    Tail(usize),
    Unknown,
}

/// Finite ranked mass vector with an explicit residual.
///
/// Invariants: atoms are positive and nonincreasing, `sum(atoms) + residual = 1`, and the tail
/// masses sum to at most `residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassPartition {
    atoms: Vec<f64>,
    residual: f64,
    tails: Vec<Tail>,
    truncated: bool,
}

impl MassPartition {
    /// Validating constructor: atoms positive, nonincreasing, total one within [`MASS_TOL`].
    pub fn new(atoms: Vec<f64>, residual: f64) -> Result<Self> {
        if !(residual >= 0.0 && residual.is_finite()) {
            return domain(format!("residual must be finite and >= 0, got {residual}"));
        }
        for (i, &a) in atoms.iter().enumerate() {
            if !(a > 0.0 && a.is_finite()) {
                return domain(format!("atom {i} must be finite and positive, got {a}"));
            }
            if i > 0 && a > atoms[i - 1] {
                return domain(format!("atoms must be nonincreasing (atom {i})"));
            }
        }
        let total: f64 = atoms.iter().sum::<f64>() + residual;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Consistency(format!("atoms + residual sum to {total}, not 1")));
        }
        Ok(MassPartition { atoms, residual, tails: Vec::new(), truncated: false })
    }

    /// The trivial partition `(1)`.
    pub fn unit() -> Self {
        MassPartition { atoms: vec![1.0], residual: 0.0, tails: Vec::new(), truncated: false }
    }

    /// Ranks `atoms` (stable, decreasing), drops zeros and attaches residual and tails without
    /// rescaling. For internal use by constructions that conserve mass by design.
    pub(crate) fn from_parts(
        mut atoms: Vec<f64>,
        residual: f64,
        tails: Vec<Tail>,
        truncated: bool,
    ) -> Self {
        atoms.retain(|&a| a > 0.0);
        atoms.sort_by(|a, b| b.total_cmp(a));
        let tails: Vec<Tail> = tails.into_iter().filter(|t| t.mass > 0.0).collect();
        let residual = residual.max(0.0);
        debug_assert!(
            (atoms.iter().sum::<f64>() + residual - 1.0).abs() < 1e-9,
            "mass not conserved"
        );
        MassPartition { atoms, residual, tails, truncated }
    }

    /// A partition whose whole residual is `PD(alpha, theta)`-distributed.
    pub fn with_pd_tail(mut self, alpha: f64, theta: f64) -> Self {
        self.tails = if self.residual > 0.0 {
            vec![Tail::pd(self.residual, alpha, theta)]
        } else {
            Vec::new()
        };
        self
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn tails(&self) -> &[Tail] {
        &self.tails
    }

    /// Whether a sampler stopped at its atom cap before reaching its residual target.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.atoms.first().copied().unwrap_or(0.0)
    }

    pub fn stored_mass(&self) -> f64 {
        self.atoms.iter().sum()
    }

    /// Residual mass not covered by any tail.
    pub fn unknown_residual(&self) -> f64 {
        let known: f64 = self.tails.iter().map(|t| t.mass).sum();
        (self.residual - known).max(0.0)
    }

    /// Forgets all tail laws; the residual becomes unknown mass.
    pub fn without_tails(&self) -> Self {
        MassPartition { tails: Vec::new(), ..self.clone() }
    }

    pub(crate) fn into_parts(self) -> (Vec<f64>, f64, Vec<Tail>, bool) {
        (self.atoms, self.residual, self.tails, self.truncated)
    }

    /// Locates `u in [0, 1)` in the layout atoms, then tails, then unknown residual.
    pub fn locate(&self, u: f64) -> Location {
        let mut acc = 0.0;
        for (i, &a) in self.atoms.iter().enumerate() {
            acc += a;
            if u < acc {
                return Location::Atom(i);
            }
        }
        for (j, t) in self.tails.iter().enumerate() {
            acc += t.mass;
            if u < acc {
                return Location::Tail(j);
            }
        }
        Location::Unknown
    }

    /// Replaces tail `j` by a freshly materialised atom and its remainder; returns the atom's
    /// index in the reranked atom vector.
    pub fn materialize_tail(&mut self, j: usize, rng: &mut RngStream) -> Result<usize> {
        let tail = self.tails[j];
        let (atom, rest) = tail.materialize(rng)?;
        match rest {
            Some(t) => self.tails[j] = t,
            None => {
                self.tails.remove(j);
            }
        }
        self.residual = (self.residual - atom).max(0.0);
        let pos = self.atoms.partition_point(|&a| a >= atom);
        self.atoms.insert(pos, atom);
        Ok(pos)
    }

    /// Mass of a size-biased pick: an atom, a materialised tail atom, or `0.0` when the pick
    /// falls in unknown residual mass.
    pub fn size_biased_value(&self, rng: &mut RngStream) -> Result<f64> {
        let u = rng.uniform();
        Ok(match self.locate(u) {
            Location::Atom(i) => self.atoms[i],
            Location::Tail(j) => self.tails[j].materialize(rng)?.0,
            Location::Unknown => 0.0,
        })
    }

    /// Elementwise comparison of atoms and residual.
    pub fn approx_eq(&self, other: &MassPartition, tol: f64) -> bool {
        self.atoms.len() == other.atoms.len()
            && (self.residual - other.residual).abs() <= tol
            && self.atoms.iter().zip(&other.atoms).all(|(a, b)| (a - b).abs() <= tol)
    }
}

#[derive(Serialize, Deserialize)]
struct MassPartitionWire {
    atoms: Vec<f64>,
    residual: f64,
}

impl Serialize for MassPartition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MassPartitionWire { atoms: self.atoms.clone(), residual: self.residual }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MassPartition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = MassPartitionWire::deserialize(d)?;
        rank_normalize(&w.atoms, w.residual).map_err(serde::de::Error::custom)
    }
}

/// Drops zeros, sorts decreasingly (ties by original index) and rescales the atoms so the
/// total is one, provided the input total is within [`RESCALE_TOL`] of one.
pub fn rank_normalize(weights: &[f64], residual: f64) -> Result<MassPartition> {
    if !(residual >= 0.0 && residual.is_finite()) {
        return domain(format!("residual must be finite and >= 0, got {residual}"));
    }
    if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
        return domain(format!("weight {i} must be finite and >= 0, got {w}"));
    }
    let sum: f64 = weights.iter().sum();
    let total = sum + residual;
    if (total - 1.0).abs() > RESCALE_TOL {
        return Err(Error::Consistency(format!(
            "weights + residual sum to {total}, deviating from 1 by more than {RESCALE_TOL}"
        )));
    }
    let mut atoms: Vec<f64> = weights.iter().copied().filter(|&w| w > 0.0).collect();
    atoms.sort_by(|a, b| b.total_cmp(a));
    // Totals within rounding of one are kept as is, so normalising twice changes nothing.
    if sum > 0.0 && (total - 1.0).abs() > f64::EPSILON * (atoms.len() + 1) as f64 {
        let f = (1.0 - residual) / sum;
        for a in &mut atoms {
            *a *= f;
        }
    }
    Ok(MassPartition { atoms, residual, tails: Vec::new(), truncated: false })
}

/// Least `i` with cumulative atom mass `> u`, or [`SbIndex::Residual`] beyond the stored mass.
pub fn size_biased_index(x: &MassPartition, u: f64) -> Result<SbIndex> {
    if !(0.0..1.0).contains(&u) {
        return domain(format!("u must lie in [0, 1), got {u}"));
    }
    let mut acc = 0.0;
    for (i, &a) in x.atoms.iter().enumerate() {
        acc += a;
        if u < acc {
            return Ok(SbIndex::Atom(i));
        }
    }
    Ok(SbIndex::Residual)
}

/// Stick-breaking weights in discovery order.
///
/// `residual` is the exact product of the unconsumed stick fractions; `tail`, when known, is the
/// law of the undiscovered weights relative to `residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBiasedWeights {
    pub weights: Vec<f64>,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tail: Option<TailLaw>,
    #[serde(default)]
    pub truncated: bool,
}

impl SizeBiasedWeights {
    /// Validated explicit weights.
    pub fn new(weights: Vec<f64>, residual: f64) -> Result<Self> {
        if !(residual >= 0.0) {
            return domain(format!("residual must be >= 0, got {residual}"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return domain("weights must be finite and positive");
        }
        let total: f64 = weights.iter().sum::<f64>() + residual;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Consistency(format!("weights + residual sum to {total}, not 1")));
        }
        Ok(SizeBiasedWeights { weights, residual, tail: None, truncated: false })
    }

    /// Weights `B_n prod_{i<n}(1 - B_i)` from explicit stick fractions in `(0, 1]`.
    pub fn from_sticks(sticks: &[f64]) -> Result<Self> {
        let mut weights = Vec::with_capacity(sticks.len());
        let mut rest = 1.0;
        for (i, &b) in sticks.iter().enumerate() {
            if !(b > 0.0 && b <= 1.0) {
                return domain(format!("stick {i} must lie in (0, 1], got {b}"));
            }
            if rest == 0.0 {
                return domain(format!("stick {i} follows a full stick"));
            }
            weights.push(rest * b);
            rest *= 1.0 - b;
        }
        Ok(SizeBiasedWeights { weights, residual: rest, tail: None, truncated: false })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Partition of `{lo, ..., n}` into blocks listed by increasing least element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSetPartition")]
pub struct SetPartition {
    lo: usize,
    blocks: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawSetPartition {
    lo: usize,
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<RawSetPartition> for SetPartition {
    type Error = Error;
    fn try_from(r: RawSetPartition) -> Result<Self> {
        SetPartition::new(r.lo, r.blocks)
    }
}

impl SetPartition {
    /// Validates that `blocks` are sorted, nonempty, ordered by least element and cover
    /// `{lo, ..., lo + total - 1}` exactly once.
    pub fn new(lo: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let total: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; total];
        let mut prev_min = None;
        for (k, b) in blocks.iter().enumerate() {
            let Some(&first) = b.first() else {
                return domain(format!("block {k} is empty"));
            };
            if b.windows(2).any(|w| w[0] >= w[1]) {
                return domain(format!("block {k} is not strictly increasing"));
            }
            if prev_min.is_some_and(|p| p >= first) {
                return domain(format!("block {k} is out of least-element order"));
            }
            prev_min = Some(first);
            for &l in b {
                if l < lo || l - lo >= total {
                    return domain(format!("label {l} outside {{{lo}, ..., {}}}", lo + total - 1));
                }
                if std::mem::replace(&mut seen[l - lo], true) {
                    return domain(format!("label {l} appears twice"));
                }
            }
        }
        Ok(SetPartition { lo, blocks })
    }

    /// Sorts labels within blocks and blocks by least element, then validates.
    pub fn from_blocks(lo: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.retain(|b| !b.is_empty());
        blocks.sort_by_key(|b| b[0]);
        SetPartition::new(lo, blocks)
    }

    /// Builds the partition in which label `lo + k` lies in the block tagged `tags[k]`.
    pub fn from_labels<T: Ord + Clone>(lo: usize, tags: &[T]) -> Self {
        let mut index: BTreeMap<T, usize> = BTreeMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (k, t) in tags.iter().enumerate() {
            let next = blocks.len();
            let b = *index.entry(t.clone()).or_insert(next);
            if b == blocks.len() {
                blocks.push(Vec::new());
            }
            blocks[b].push(lo + k);
        }
        SetPartition { lo, blocks }
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    /// Largest label, `lo - 1` for the empty partition.
    pub fn hi(&self) -> usize {
        self.lo + self.num_labels() - 1
    }

    pub fn num_labels(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// `block_of()[l - lo]` is the index of the block holding label `l`.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_labels()];
        for (k, b) in self.blocks.iter().enumerate() {
            for &l in b {
                out[l - self.lo] = k;
            }
        }
        out
    }

    /// Block sizes in block order.
    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Whether every block of `finer` lies inside a block of `self`.
    pub fn is_coarser_than(&self, finer: &SetPartition) -> bool {
        if finer.lo < self.lo || finer.hi() > self.hi() {
            return false;
        }
        let of = self.block_of();
        finer
            .blocks
            .iter()
            .all(|b| b.iter().all(|&l| of[l - self.lo] == of[b[0] - self.lo]))
    }
}

impl std::fmt::Display for SetPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_char('{')?;
        for (k, b) in self.blocks.iter().enumerate() {
            if k > 0 {
                f.write_char(',')?;
            }
            f.write_char('{')?;
            for (j, l) in b.iter().enumerate() {
                if j > 0 {
                    f.write_char(',')?;
                }
                write!(f, "{l}")?;
            }
            f.write_char('}')?;
        }
        f.write_char('}')
    }
}

/// Block frequencies in block (least-element) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFrequencies {
    pub freqs: Vec<f64>,
}

impl BlockFrequencies {
    /// The frequencies as a ranked mass partition.
    pub fn ranked(&self) -> MassPartition {
        MassPartition::from_parts(self.freqs.clone(), 0.0, Vec::new(), false)
    }
}

/// `|block_k| / (number of labels)` per block.
pub fn empirical_frequencies(p: &SetPartition) -> BlockFrequencies {
    let n = p.num_labels() as f64;
    BlockFrequencies { freqs: p.blocks.iter().map(|b| b.len() as f64 / n).collect() }
}

/// CSV with header `w1,...,wK,residual`; shorter rows are padded with zeros.
pub fn write_csv<W: std::io::Write>(out: &mut W, rows: &[MassPartition]) -> Result<()> {
    let k = rows.iter().map(MassPartition::len).max().unwrap_or(0);
    let mut header = String::new();
    for i in 1..=k {
        write!(header, "w{i},").unwrap();
    }
    header.push_str("residual\n");
    out.write_all(header.as_bytes())?;
    for r in rows {
        out.write_all(csv_row(r, k).as_bytes())?;
    }
    Ok(())
}

/// One CSV row padded to `k` atom columns, newline-terminated.
pub fn csv_row(x: &MassPartition, k: usize) -> String {
    let mut line = String::new();
    for i in 0..k {
        let a = x.atoms.get(i).copied().unwrap_or(0.0);
        write!(line, "{a},").unwrap();
    }
    writeln!(line, "{}", x.residual).unwrap();
    line
}

/// Parses the CSV written by [`write_csv`]. A header line is optional; rows are renormalised
/// with [`rank_normalize`]. Errors carry the 1-based line number.
pub fn read_csv(text: &str) -> Result<Vec<MassPartition>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.ends_with("residual")) {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        let Some((&residual, atoms)) = vals.split_last() else {
            return Err(Error::Parse { row, msg: "empty row".into() });
        };
        let x = rank_normalize(atoms, residual)
            .map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(a: &[f64], r: f64) -> MassPartition {
        MassPartition::new(a.to_vec(), r).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(0.0, 1.0).is_ok());
        assert!(Params::new(0.3, -0.2).is_ok());
        assert!(Params::new(0.3, -0.3).is_err());
        assert!(Params::new(1.0, 1.0).is_err());
        assert!(Params::new(-0.1, 1.0).is_err());
        assert!(Params::new(0.5, f64::NAN).is_err());
        let p: Params = serde_json::from_str(r#"{"alpha":0.5,"theta":0.5}"#).unwrap();
        assert_eq!(p, Params::new(0.5, 0.5).unwrap());
        assert!(serde_json::from_str::<Params>(r#"{"alpha":0.5,"theta":-0.6}"#).is_err());
    }

    #[test]
    fn rank_normalize_examples() {
        let x = rank_normalize(&[0.2, 0.5, 0.3], 0.0).unwrap();
        assert_eq!(x.atoms(), &[0.5, 0.3, 0.2]);
        assert_eq!(x.residual(), 0.0);
        let x = rank_normalize(&[0.5, 0.0, 0.5], 0.0).unwrap();
        assert_eq!(x.atoms(), &[0.5, 0.5]);
        let x = rank_normalize(&[0.4, 0.4], 0.2).unwrap();
        assert_eq!(x.atoms(), &[0.4, 0.4]);
        assert_eq!(x.residual(), 0.2);
    }

    #[test]
    fn rank_normalize_rescales_and_rejects() {
        let x = rank_normalize(&[0.6, 0.4 + 5e-10], 0.0).unwrap();
        assert!((x.stored_mass() - 1.0).abs() < 1e-15);
        assert!(matches!(rank_normalize(&[0.6, 0.5], 0.0), Err(Error::Consistency(_))));
        assert!(matches!(rank_normalize(&[0.6, -0.1, 0.5], 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rank_normalize_idempotent() {
        let x = rank_normalize(&[0.1, 0.25, 0.05, 0.35], 0.25).unwrap();
        let y = rank_normalize(x.atoms(), x.residual()).unwrap();
        assert!(x.approx_eq(&y, 1e-12));
    }

    #[test]
    fn size_biased_index_examples() {
        let x = mp(&[0.6, 0.4], 0.0);
        assert_eq!(size_biased_index(&x, 0.5).unwrap(), SbIndex::Atom(0));
        assert_eq!(size_biased_index(&x, 0.7).unwrap(), SbIndex::Atom(1));
        let y = mp(&[0.9], 0.1);
        assert_eq!(size_biased_index(&y, 0.95).unwrap(), SbIndex::Residual);
        assert!(size_biased_index(&x, 1.0).is_err());
        assert!(size_biased_index(&x, -0.1).is_err());
    }

    #[test]
    fn size_biased_index_grid_recovers_masses() {
        let x = mp(&[0.5, 0.25, 0.125, 0.0625], 0.0625);
        let m = 1 << 16;
        let mut hits = [0usize; 5];
        for k in 0..m {
            match size_biased_index(&x, k as f64 / m as f64).unwrap() {
                SbIndex::Atom(i) => hits[i] += 1,
                SbIndex::Residual => hits[4] += 1,
            }
        }
        let want = [0.5, 0.25, 0.125, 0.0625, 0.0625];
        for (h, w) in hits.iter().zip(want) {
            assert!((*h as f64 / m as f64 - w).abs() <= 1.0 / m as f64);
        }
    }

    #[test]
    fn mass_partition_validation() {
        assert!(MassPartition::new(vec![0.3, 0.7], 0.0).is_err());
        assert!(MassPartition::new(vec![0.7, 0.0, 0.3], 0.0).is_err());
        assert!(MassPartition::new(vec![0.7, 0.2], 0.0).is_err());
        assert!(MassPartition::new(vec![0.7, 0.2], 0.1).is_ok());
        assert_eq!(MassPartition::unit().atoms(), &[1.0]);
    }

    #[test]
    fn json_roundtrip() {
        let x = mp(&[0.5, 0.3], 0.2);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"atoms":[0.5,0.3],"residual":0.2}"#);
        let y: MassPartition = serde_json::from_str(&s).unwrap();
        assert!(x.approx_eq(&y, 0.0));
        let p = SetPartition::new(1, vec![vec![1, 2], vec![3]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"lo":1,"blocks":[[1,2],[3]]}"#);
        assert_eq!(serde_json::from_str::<SetPartition>(&s).unwrap(), p);
        assert!(serde_json::from_str::<SetPartition>(r#"{"lo":1,"blocks":[[3],[1,2]]}"#).is_err());
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let rows = vec![mp(&[0.5, 0.3, 0.2], 0.0), mp(&[0.9], 0.1)];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "w1,w2,w3,residual\n0.5,0.3,0.2,0\n0.9,0,0,0.1\n");
        let back = read_csv(&text).unwrap();
        assert!(back[0].approx_eq(&rows[0], 1e-15) && back[1].approx_eq(&rows[1], 1e-15));
        let bad = "w1,w2,residual\n0.5,0.5,0\n0.5,x,0\n";
        assert!(matches!(read_csv(bad), Err(Error::Parse { row: 3, .. })));
        let bad = "0.5,0.6,0\n";
        assert!(matches!(read_csv(bad), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn unmarked_fraction_matches_brute_force_marking() {
        let (a, t, b) = (0.5, 1.0, 0.3);
        let n = 4000;
        let fast: Vec<f64> = (0..n)
            .map(|r| pd_unmarked_fraction(a, t, b, &mut RngStream::new(21, r)).unwrap())
            .collect();
        let brute: Vec<f64> = (0..n)
            .map(|r| {
                let mut rng = RngStream::new(22, r);
                let (mut u, mut rest) = (0.0, 1.0);
                for k in 1..=2000 {
                    let (w, c) = sample_beta_pair(1.0 - a, t + k as f64 * a, &mut rng).unwrap();
                    if !rng.bernoulli(b) {
                        u += rest * w;
                    }
                    rest *= c;
                }
                u + rest * (1.0 - b)
            })
            .collect();
        assert!(crate::stattest::ks_two_sample(&fast, &brute).unwrap().pass);
        let mean = fast.iter().sum::<f64>() / n as f64;
        let var = fast.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let want_var = b * (1.0 - b) * (1.0 - a) / (t + 1.0);
        assert!((mean - (1.0 - b)).abs() < 4.0 * (want_var / n as f64).sqrt());
        assert!((var / want_var - 1.0).abs() < 0.1);
    }

    #[test]
    fn set_partition_validation() {
        assert!(SetPartition::new(1, vec![vec![1, 2], vec![3]]).is_ok());
        assert!(SetPartition::new(1, vec![vec![2], vec![1]]).is_err());
        assert!(SetPartition::new(1, vec![vec![1, 1]]).is_err());
        assert!(SetPartition::new(1, vec![vec![1], vec![3]]).is_err());
        assert!(SetPartition::new(1, vec![vec![1], vec![]]).is_err());
        let e = SetPartition::new(4, vec![]).unwrap();
        assert_eq!(e.num_labels(), 0);
        assert_eq!(e.hi(), 3);
        let p = SetPartition::from_blocks(2, vec![vec![4, 2], vec![3]]).unwrap();
        assert_eq!(p.blocks(), &[vec![2, 4], vec![3]]);
        let q = SetPartition::from_labels(1, &['b', 'a', 'b', 'c']);
        assert_eq!(q.blocks(), &[vec![1, 3], vec![2], vec![4]]);
        assert_eq!(q.to_string(), "{{1,3},{2},{4}}");
        assert!(q.is_coarser_than(&SetPartition::new(2, vec![vec![2], vec![3], vec![4]]).unwrap()));
        assert!(!q.is_coarser_than(&SetPartition::new(2, vec![vec![2, 3], vec![4]]).unwrap()));
    }

    #[test]
    fn empirical_frequency_examples() {
        let p = SetPartition::new(1, vec![vec![1, 2], vec![3]]).unwrap();
        assert_eq!(empirical_frequencies(&p).freqs, vec![2.0 / 3.0, 1.0 / 3.0]);
        let p = SetPartition::new(1, vec![(1..=7).collect()]).unwrap();
        assert_eq!(empirical_frequencies(&p).freqs, vec![1.0]);
        let p = SetPartition::from_labels(1, &[0, 1, 2, 3]);
        assert_eq!(empirical_frequencies(&p).freqs, vec![0.25; 4]);
    }

    #[test]
    fn tail_materialize_conserves_mass() {
        let mut rng = RngStream::new(3, 0);
        let t = Tail::pd(0.3, 0.5, 2.0);
        for _ in 0..100 {
            let (a, rest) = t.materialize(&mut rng).unwrap();
            let rest = rest.unwrap();
            assert!((a + rest.mass - 0.3).abs() < 1e-16);
            assert_eq!(rest.law, TailLaw::PoissonDirichlet { alpha: 0.5, theta: 2.5 });
        }
        let lt = Tail { mass: 1e-3, law: TailLaw::LevyCutoff { alpha: 0.5, cutoff: 1e-4, scale: 2.0 } };
        for _ in 0..100 {
            let (a, rest) = lt.materialize(&mut rng).unwrap();
            assert!(a > 0.0 && a <= 0.5e-4);
            assert!((a + rest.unwrap().mass - 1e-3).abs() < 1e-18);
        }
    }

    #[test]
    fn tail_thin_mean_matches_mark_probability() {
        let mut rng = RngStream::new(4, 0);
        let t = Tail::pd(1.0, 0.5, 0.5);
        let n = 20_000;
        let mean: f64 = (0..n).map(|_| t.thin(0.3, &mut rng).unwrap().0).sum::<f64>() / n as f64;
        // Var = b(1-b)(1-alpha)/(1+theta) = 0.07 per draw.
        assert!((mean - 0.3).abs() < 4.0 * (0.07f64 / n as f64).sqrt());
    }

    #[test]
    fn materialize_tail_in_partition() {
        let mut rng = RngStream::new(5, 0);
        let mut x = mp(&[0.5], 0.5).with_pd_tail(0.0, 1.0);
        assert_eq!(x.locate(0.7), Location::Tail(0));
        let i = x.materialize_tail(0, &mut rng).unwrap();
        assert!(x.atoms().windows(2).all(|w| w[0] >= w[1]));
        assert!((x.stored_mass() + x.residual() - 1.0).abs() < 1e-15);
        assert!((x.residual() - x.tails()[0].mass).abs() < 1e-15);
        assert!(i < x.len());
        assert_eq!(x.without_tails().unknown_residual(), x.residual());
    }
}
