//! Exact joint inference over world-belief hypotheses.
//!
//! The observer never sees inside unopened boxes, so it entertains every
//! pair (candidate initial world, candidate initial belief) as a joint
//! hypothesis — an *atom*. Each atom is rolled forward deterministically
//! through the watched actions; its posterior weight is the product of the
//! action probabilities the agent model assigns along the way, and atoms
//! whose simulated views ever disagree with what was actually seen (or
//! whose belief annihilates) drop out. Priors over worlds and beliefs are
//! uniform, so they contribute only a constant that normalization removes.
//!
//! On top of the filtered atoms this module computes two per-statement
//! quantities:
//!
//! * **accuracy** — how probable it is that the statement is true of the
//!   agent, reweighted to a 50-50 prior between true and false so that
//!   baseline plausibility does not masquerade as evidence;
//! * **informativity** — how much a naive listener (who models actions as
//!   uniform noise) learns from being told the statement is true, measured
//!   as the KL divergence from the listener's prior to its conditioned
//!   posterior.

use crate::belief::Belief;
use crate::elot::{eval_epistemic, EpistemicFormula, ModalThresholds};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{observe, transition, Action, GridMap, Observation, WorldState};
use crate::planner::{rollout, ActionModel, CostOracle, PolicyParams, RolloutTrace};

/// One surviving joint hypothesis.
#[derive(Debug, Clone)]
pub struct Atom {
    /// Index into the candidate initial worlds.
    pub world: usize,
    /// Index into the candidate initial beliefs.
    pub belief: usize,
    /// Normalized posterior mass.
    pub weight: f64,
    /// Normalized prior mass (uniform over surviving atoms).
    pub prior_weight: f64,
    /// The atom's full forward simulation.
    pub trace: RolloutTrace,
}

/// The filtered joint distribution after watching a trajectory.
#[derive(Debug, Clone)]
pub struct JointPosterior {
    pub atoms: Vec<Atom>,
    /// Number of actions conditioned on.
    pub n_steps: usize,
    pub n_worlds: usize,
    pub n_beliefs: usize,
}

impl JointPosterior {
    /// Posterior mass of atoms satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&Atom) -> bool) -> f64 {
        self.atoms
            .iter()
            .filter(|a| pred(a))
            .map(|a| a.weight)
            .sum()
    }
}

/// Rolls the actual world forward, returning the observer's per-step views.
/// Errors if an action is illegal, naming the offending step (1-based).
pub fn observation_sequence(
    map: &GridMap,
    true_s0: &WorldState,
    actions: &[Action],
) -> Result<Vec<Observation>> {
    let mut views = Vec::with_capacity(actions.len() + 1);
    let mut state = true_s0.clone();
    views.push(observe(&state));
    for (i, &a) in actions.iter().enumerate() {
        state = transition(map, &state, a).map_err(|_| Error::IllegalAction {
            action: a.to_string(),
            msg: format!("illegal at trajectory step {}", i + 1),
        })?;
        views.push(observe(&state));
    }
    Ok(views)
}

/// Filters the joint hypothesis space against a watched trajectory.
///
/// `model` picks the action likelihood (softmax-rational for the observer
/// proper, uniform for listeners); when `condition_on_views` is false the
/// views of the actual world are ignored entirely (the fully ignorant
/// listener). Errors if no atom survives.
#[allow(clippy::too_many_arguments)]
pub fn joint_filter(
    oracle: &CostOracle,
    worlds: &[WorldState],
    beliefs: &[Belief],
    true_s0: &WorldState,
    actions: &[Action],
    model: ActionModel,
    params: &PolicyParams,
    condition_on_views: bool,
) -> Result<JointPosterior> {
    let views = if condition_on_views {
        Some(observation_sequence(oracle.map(), true_s0, actions)?)
    } else {
        None
    };
    let n_atoms = worlds.len() * beliefs.len();
    let traces = exec::map_indexed(n_atoms, |i| {
        let world = i / beliefs.len();
        let belief = i % beliefs.len();
        rollout(
            oracle,
            worlds,
            &worlds[world],
            &beliefs[belief],
            actions,
            model,
            params,
            views.as_deref(),
        )
    });
    let mut atoms: Vec<Atom> = traces
        .into_iter()
        .enumerate()
        .filter(|(_, t)| t.alive && t.likelihood > 0.0)
        .map(|(i, trace)| Atom {
            world: i / beliefs.len(),
            belief: i % beliefs.len(),
            weight: trace.likelihood,
            prior_weight: 1.0,
            trace,
        })
        .collect();
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    if atoms.is_empty() || total <= 0.0 {
        return Err(Error::ImpossibleTrajectory);
    }
    let survivors = atoms.len() as f64;
    for a in &mut atoms {
        a.weight /= total;
        a.prior_weight /= survivors;
    }
    Ok(JointPosterior {
        atoms,
        n_steps: actions.len(),
        n_worlds: worlds.len(),
        n_beliefs: beliefs.len(),
    })
}

/// The two listener variants used for informativity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListenerModel {
    /// Watches the environment (conditions on the views) but treats
    /// actions as uniform noise.
    SeesEnvironment,
    /// Ignores everything: uniform actions, no view conditioning.
    Ignorant,
}

/// Builds the listener's base distribution over atoms.
pub fn listener_posterior(
    oracle: &CostOracle,
    worlds: &[WorldState],
    beliefs: &[Belief],
    true_s0: &WorldState,
    actions: &[Action],
    params: &PolicyParams,
    listener: ListenerModel,
) -> Result<JointPosterior> {
    joint_filter(
        oracle,
        worlds,
        beliefs,
        true_s0,
        actions,
        ActionModel::UniformLegal,
        params,
        listener == ListenerModel::SeesEnvironment,
    )
}

/// Truth of the statement for one atom at the end of its trace: the final
/// simulated world together with the agent's final belief particles.
pub fn atom_truth(
    map: &GridMap,
    formula: &EpistemicFormula,
    atom: &Atom,
    thresholds: &ModalThresholds,
) -> bool {
    let snap = atom.trace.last();
    let particles = snap
        .belief
        .particles()
        .iter()
        .zip(&snap.particle_states)
        .map(|(&(_, w), (_, ps))| (w, ps));
    eval_epistemic(formula, map, &snap.state, particles, thresholds)
}

/// Statement accuracy under a 50-50 prior between true and false.
///
/// Posterior mass is split by the statement's truth value and reweighted
/// by the corresponding prior masses, so a statement that was likely a
/// priori gets no credit for that. If the prior puts no mass on one truth
/// value the statement is trivially settled: accuracy is 1 when falsity is
/// impossible a priori and 0 when truth is.
pub fn accuracy(
    map: &GridMap,
    formula: &EpistemicFormula,
    posterior: &JointPosterior,
    thresholds: &ModalThresholds,
) -> f64 {
    let mut post_true = 0.0;
    let mut prior_true = 0.0;
    let mut prior_false = 0.0;
    let mut post_false = 0.0;
    for atom in &posterior.atoms {
        if atom_truth(map, formula, atom, thresholds) {
            post_true += atom.weight;
            prior_true += atom.prior_weight;
        } else {
            post_false += atom.weight;
            prior_false += atom.prior_weight;
        }
    }
    if prior_false == 0.0 {
        return 1.0;
    }
    if prior_true == 0.0 {
        return 0.0;
    }
    let odds_true = post_true / prior_true;
    let odds_false = post_false / prior_false;
    odds_true / (odds_true + odds_false)
}

/// How much the listener learns from hearing the statement is true: the
/// KL divergence between its belief over atoms conditioned on the
/// statement and its unconditioned base. Errors with [`Error::Unassertable`]
/// if the listener gives the statement zero probability.
pub fn informativity(
    map: &GridMap,
    formula: &EpistemicFormula,
    listener: &JointPosterior,
    thresholds: &ModalThresholds,
) -> Result<f64> {
    let truths: Vec<bool> = listener
        .atoms
        .iter()
        .map(|a| atom_truth(map, formula, a, thresholds))
        .collect();
    let mass_true: f64 = listener
        .atoms
        .iter()
        .zip(&truths)
        .filter(|(_, &t)| t)
        .map(|(a, _)| a.weight)
        .sum();
    if mass_true <= 0.0 {
        return Err(Error::Unassertable);
    }
    let mut kl = 0.0;
    for (atom, &truth) in listener.atoms.iter().zip(&truths) {
        if !truth {
            continue; // conditioned probability is 0; contributes nothing
        }
        let conditioned = atom.weight / mass_true;
        if conditioned > 0.0 {
            kl += conditioned * (conditioned / atom.weight).ln();
        }
    }
    // KL is nonnegative; rounding can leave the sum a hair below zero when
    // the statement is already certain.
    Ok(kl.max(0.0))
}
