//! Counterfactual tests: did the believed-of state actually drive the
//! behavior?
//!
//! A statement can be accurate and informative yet explanatorily inert —
//! the agent would have acted the same way regardless. To measure causal
//! relevance we rewind to the *intervention point*: the step right after
//! the agent's belief last changed (step 1 if it never did). There we take
//! the posterior conditioned only on the actions watched so far, force the
//! statement true or false by conditioning the hypothesis atoms on its
//! truth value, and replay the remaining actions under the agent model:
//!
//! * **normality** — how strongly the pre-intervention posterior already
//!   expected the statement to be true;
//! * **sufficiency** — the probability of the remaining actions given the
//!   statement made true;
//! * **necessity** — one minus that probability given the statement made
//!   false.
//!
//! Causal strength combines them so that both "it had to be believed"
//! (necessity, weighted by the statement being abnormal) and "believing it
//! produces exactly this behavior" (sufficiency, weighted by normality)
//! must hold.

use crate::belief::Belief;
use crate::elot::{EpistemicFormula, ModalThresholds};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{Action, GridMap, WorldState};
use crate::observer::{atom_truth, joint_filter, JointPosterior};
use crate::planner::{continue_rollout, ActionModel, CostOracle, PolicyParams};

/// Exponents weighting the necessity and sufficiency halves of causal
/// strength. An exponent of 0 disables its half entirely (0^0 = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalParams {
    pub alpha_necessity: f64,
    pub alpha_sufficiency: f64,
}

impl Default for CausalParams {
    fn default() -> Self {
        CausalParams {
            alpha_necessity: 1.0,
            alpha_sufficiency: 1.0,
        }
    }
}

/// Where the hypothetical branches off: step `t_c` (1-based) is the first
/// action replayed; `past` is the joint posterior conditioned on
/// everything watched before it.
#[derive(Debug)]
pub struct InterventionPoint {
    pub t_c: usize,
    pub past: JointPosterior,
}

/// Finds the last belief change over the posterior-supported atoms and
/// builds the pre-intervention posterior.
///
/// The belief "changed at step τ" when some surviving atom's belief after
/// the step-τ action differs from before it; `t_c` is one past the last
/// such τ, so the intervention happens with the newly settled belief in
/// hand. Without any change, `t_c` is 1 and the past posterior is just the
/// initial-view filter.
pub fn find_intervention_point(
    oracle: &CostOracle,
    worlds: &[WorldState],
    beliefs: &[Belief],
    true_s0: &WorldState,
    actions: &[Action],
    params: &PolicyParams,
) -> Result<InterventionPoint> {
    let full = joint_filter(
        oracle,
        worlds,
        beliefs,
        true_s0,
        actions,
        ActionModel::Boltzmann,
        params,
        true,
    )?;
    let mut last_change = 0usize;
    for atom in &full.atoms {
        let steps = &atom.trace.steps;
        for tau in (1..steps.len()).rev() {
            if tau <= last_change {
                break;
            }
            if steps[tau].belief != steps[tau - 1].belief {
                last_change = tau;
                break;
            }
        }
    }
    let t_c = last_change + 1;
    let past = joint_filter(
        oracle,
        worlds,
        beliefs,
        true_s0,
        &actions[..t_c - 1],
        ActionModel::Boltzmann,
        params,
        true,
    )?;
    Ok(InterventionPoint { t_c, past })
}

/// Pre-intervention probability that the statement is true: the past
/// posterior mass on atoms satisfying it at the intervention point.
pub fn causal_normality(
    map: &GridMap,
    formula: &EpistemicFormula,
    point: &InterventionPoint,
    thresholds: &ModalThresholds,
) -> f64 {
    point
        .past
        .mass_where(|atom| atom_truth(map, formula, atom, thresholds))
        .clamp(0.0, 1.0)
}

/// Conditions the past posterior on the statement having the given truth
/// value: atoms of the other value are dropped and the rest renormalized.
/// Returns `(atom index, conditioned weight)` pairs; errors if no atom has
/// the requested value.
pub fn intervene(
    map: &GridMap,
    formula: &EpistemicFormula,
    past: &JointPosterior,
    value: bool,
    thresholds: &ModalThresholds,
) -> Result<Vec<(usize, f64)>> {
    let selected: Vec<(usize, f64)> = past
        .atoms
        .iter()
        .enumerate()
        .filter(|(_, atom)| atom_truth(map, formula, atom, thresholds) == value)
        .map(|(i, atom)| (i, atom.weight))
        .collect();
    let total: f64 = selected.iter().map(|&(_, w)| w).sum();
    if selected.is_empty() || total <= 0.0 {
        return Err(Error::ImpossibleIntervention { value });
    }
    Ok(selected.into_iter().map(|(i, w)| (i, w / total)).collect())
}

/// Probability of the remaining actions when the statement is forced to
/// `value`: each conditioned atom replays `actions[t_c-1..]` from its
/// intervention-point snapshot under the agent model, using its own
/// simulated observations along the way.
#[allow(clippy::too_many_arguments)]
fn replay_probability(
    oracle: &CostOracle,
    map: &GridMap,
    formula: &EpistemicFormula,
    point: &InterventionPoint,
    actions: &[Action],
    params: &PolicyParams,
    thresholds: &ModalThresholds,
    value: bool,
) -> Option<f64> {
    let conditioned = intervene(map, formula, &point.past, value, thresholds).ok()?;
    let tail = &actions[point.t_c - 1..];
    let contributions = exec::map_indexed(conditioned.len(), |j| {
        let (atom_index, weight) = conditioned[j];
        let start = point.past.atoms[atom_index].trace.last().clone();
        let replay = continue_rollout(oracle, start, tail, ActionModel::Boltzmann, params, None);
        weight * replay.likelihood
    });
    Some(contributions.into_iter().sum())
}

/// How necessary the belief was: 1 minus the probability of the remaining
/// actions had the statement been false. When the statement cannot be made
/// false (normality 1), necessity is 0 — though causal strength already
/// vanishes through the normality weight in that case.
pub fn causal_necessity(
    oracle: &CostOracle,
    formula: &EpistemicFormula,
    point: &InterventionPoint,
    actions: &[Action],
    params: &PolicyParams,
    thresholds: &ModalThresholds,
) -> f64 {
    match replay_probability(
        oracle,
        oracle.map(),
        formula,
        point,
        actions,
        params,
        thresholds,
        false,
    ) {
        Some(p) => (1.0 - p).clamp(0.0, 1.0),
        None => 0.0,
    }
}

/// How sufficient the belief was: the probability of the remaining actions
/// with the statement made true. When it cannot be made true (normality
/// 0), sufficiency is 0.
pub fn causal_sufficiency(
    oracle: &CostOracle,
    formula: &EpistemicFormula,
    point: &InterventionPoint,
    actions: &[Action],
    params: &PolicyParams,
    thresholds: &ModalThresholds,
) -> f64 {
    match replay_probability(
        oracle,
        oracle.map(),
        formula,
        point,
        actions,
        params,
        thresholds,
        true,
    ) {
        Some(p) => p.clamp(0.0, 1.0),
        None => 0.0,
    }
}

/// Combines the causal factors:
/// `[(1-normality)*necessity]^α_necc * [normality*sufficiency]^α_suff`.
///
/// Guaranteed beliefs (normality 1) and impossible ones (normality 0) get
/// strength 0 whenever the corresponding exponent is positive.
pub fn causal_strength(
    normality: f64,
    necessity: f64,
    sufficiency: f64,
    params: &CausalParams,
) -> f64 {
    let necessity_part = ((1.0 - normality).max(0.0) * necessity.max(0.0))
        .powf(params.alpha_necessity);
    let sufficiency_part = (normality.max(0.0) * sufficiency.max(0.0))
        .powf(params.alpha_sufficiency);
    necessity_part * sufficiency_part
}
