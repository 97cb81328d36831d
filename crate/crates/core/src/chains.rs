//! The discrete fragmentation chain `X(i+1) ~ Frag_alpha(X(i))`, its Poissonisation
//! `Y(t) = X(N(t))`, and the level-indexed coagulation chain `X(i) ~ Coag_{alpha,theta+i}(X(i+1))`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::{sample_exponential, RngStream};
use crate::operators::{coag, frag, CoagWitness, FragWitness};
use crate::partition::{MassPartition, Params};
use crate::samplers::Truncation;

/// Which states a trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retain {
    #[default]
    All,
    /// Only the last state and no witnesses.
    FinalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StepWitness {
    Frag(FragWitness),
    Coag(CoagWitness),
}

/// States of a chain with per-step witnesses.
///
/// Fragmentation chains store `states[i] = X(i)`. Coagulation chains store states by level, so
/// `states[0]` is the final, most coagulated state; `witnesses[i]` maps level `i + 1` to `i`.
/// With [`Retain::FinalOnly`] `states` holds the last computed state only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrajectory {
    pub params: Params,
    pub states: Vec<MassPartition>,
    pub witnesses: Vec<StepWitness>,
    pub steps: usize,
}

impl ChainTrajectory {
    /// The state produced by the last step.
    pub fn final_state(&self) -> &MassPartition {
        match self.witnesses.first() {
            Some(StepWitness::Coag(_)) => &self.states[0],
            _ => self.states.last().expect("trajectory holds at least one state"),
        }
    }

    /// Trajectory CSV: `step,w1,...,wK,residual`.
    pub fn to_csv(&self) -> String {
        let k = self.states.iter().map(MassPartition::len).max().unwrap_or(0);
        let mut s = String::from("step,");
        for i in 1..=k {
            s.push_str(&format!("w{i},"));
        }
        s.push_str("residual\n");
        for (i, x) in self.states.iter().enumerate() {
            s.push_str(&format!("{i},{}", crate::partition::csv_row(x, k)));
        }
        s
    }
}

/// `steps` applications of `Frag_alpha` starting at `x0`.
pub fn frag_chain(
    params: Params,
    x0: &MassPartition,
    steps: usize,
    trunc: Truncation,
    retain: Retain,
    rng: &mut RngStream,
) -> Result<ChainTrajectory> {
    let mut states = vec![x0.clone()];
    let mut witnesses = Vec::new();
    for _ in 0..steps {
        let (next, w) = frag(params.alpha(), states.last().unwrap(), trunc, rng)?;
        match retain {
            Retain::All => {
                states.push(next);
                witnesses.push(StepWitness::Frag(w));
            }
            Retain::FinalOnly => states[0] = next,
        }
    }
    Ok(ChainTrajectory { params, states, witnesses, steps })
}

/// Continuous-time chain `Y(t) = X(N(t))` for a Poisson process `N` of the given rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonPath {
    pub rate: f64,
    pub t_max: f64,
    pub jump_times: Vec<f64>,
    pub trajectory: ChainTrajectory,
}

impl PoissonPath {
    /// `N(t)` for `0 <= t <= t_max`.
    pub fn jumps_by(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }

    /// `Y(t)`; requires a trajectory built with [`Retain::All`].
    pub fn state_at(&self, t: f64) -> &MassPartition {
        &self.trajectory.states[self.jumps_by(t).min(self.trajectory.states.len() - 1)]
    }
}

pub fn poissonized_path(
    params: Params,
    x0: &MassPartition,
    rate: f64,
    t_max: f64,
    trunc: Truncation,
    retain: Retain,
    rng: &mut RngStream,
) -> Result<PoissonPath> {
    if !(rate > 0.0 && rate.is_finite()) || !(t_max > 0.0 && t_max.is_finite()) {
        return domain(format!("rate and t_max must be positive, got {rate} and {t_max}"));
    }
    let mut jump_times = Vec::new();
    let mut t = sample_exponential(rng) / rate;
    while t <= t_max {
        jump_times.push(t);
        t += sample_exponential(rng) / rate;
    }
    let trajectory = frag_chain(params, x0, jump_times.len(), trunc, retain, rng)?;
    Ok(PoissonPath { rate, t_max, jump_times, trajectory })
}

/// Coagulates `y_end` (level `steps`) down to level 0, using `Coag_{alpha,theta+i}` from level
/// `i + 1` to level `i`.
pub fn coag_chain(
    params: Params,
    y_end: &MassPartition,
    steps: usize,
    retain: Retain,
    rng: &mut RngStream,
) -> Result<ChainTrajectory> {
    if steps == 0 {
        return domain("coag_chain requires at least one step");
    }
    let mut rev_states = vec![y_end.clone()];
    let mut rev_witnesses = Vec::new();
    for i in (0..steps).rev() {
        let p = params.shift_theta(i as f64)?;
        let (next, w) = coag(p, rev_states.last().unwrap(), rng)?;
        match retain {
            Retain::All => {
                rev_states.push(next);
                rev_witnesses.push(StepWitness::Coag(w));
            }
            Retain::FinalOnly => rev_states[0] = next,
        }
    }
    rev_states.reverse();
    rev_witnesses.reverse();
    Ok(ChainTrajectory { params, states: rev_states, witnesses: rev_witnesses, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::pd_sample;

    fn p(a: f64, t: f64) -> Params {
        Params::new(a, t).unwrap()
    }

    #[test]
    fn zero_steps_is_identity() {
        let mut rng = RngStream::new(1, 0);
        let x = MassPartition::unit();
        let tr = frag_chain(p(0.5, 0.5), &x, 0, Truncation::default(), Retain::All, &mut rng).unwrap();
        assert_eq!(tr.states, vec![x]);
    }

    #[test]
    fn chains_conserve_mass_and_are_reproducible() {
        let trunc = Truncation::new(1e-8, 100).unwrap();
        let run = |seed| {
            let mut rng = RngStream::new(seed, 3);
            let x0 = pd_sample(p(0.5, 0.5), trunc, &mut rng).unwrap();
            frag_chain(p(0.5, 0.5), &x0, 5, trunc, Retain::All, &mut rng).unwrap()
        };
        let a = run(9);
        assert_eq!(a, run(9));
        assert_eq!(a.states.len(), 6);
        for s in &a.states {
            assert!((s.stored_mass() + s.residual() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coag_chain_levels() {
        let mut rng = RngStream::new(2, 0);
        let y = MassPartition::new(vec![0.4, 0.3, 0.2, 0.1], 0.0).unwrap();
        let tr = coag_chain(p(0.5, 0.5), &y, 3, Retain::All, &mut rng).unwrap();
        assert_eq!(tr.states.len(), 4);
        assert_eq!(&tr.states[3], &y);
        for i in 0..3 {
            assert!(tr.states[i].len() <= tr.states[i + 1].len());
        }
        assert_eq!(tr.final_state(), &tr.states[0]);
        let one = coag_chain(p(0.5, 0.5), &y, 1, Retain::FinalOnly, &mut rng).unwrap();
        assert_eq!(one.states.len(), 1);
    }

    #[test]
    fn poisson_path_structure() {
        let mut rng = RngStream::new(3, 0);
        let x0 = MassPartition::unit();
        let path = poissonized_path(p(0.0, 1.0), &x0, 2.0, 3.0, Truncation::new(1e-8, 50).unwrap(), Retain::All, &mut rng)
            .unwrap();
        assert!(path.jump_times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(path.jump_times.len() + 1, path.trajectory.states.len());
        assert_eq!(path.state_at(0.0), &x0);
    }
}
