//! Goal-directed planning and the rational action model.
//!
//! The agent wants the chest in as few actions as possible but is unsure
//! which world it is in. Our action model scores each action by its
//! expected cost-to-go — one step plus the optimal remaining plan length,
//! averaged over the belief particles as if all uncertainty resolved after
//! this action — and turns costs into choice probabilities with a softmax:
//! `P(a) ∝ exp(-beta * q(b, a))`. Worlds where the chest is unreachable
//! contribute a large fixed penalty instead of a plan length.
//!
//! [`CostOracle`] memoizes optimal plan lengths. On a cache miss it
//! explores the full forward closure of the queried state, then labels the
//! whole component by a multi-source backward sweep from the goal states,
//! so each reachable component is solved exactly once.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use dashmap::DashMap;

use crate::belief::{weight_to_f64, Belief};
use crate::error::{Error, Result};
use crate::grid::{
    is_legal, legal_actions, observe, transition, Action, GridMap, Observation, WorldState,
};

/// Parameters of the action model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    /// Softmax rationality; 0 is uniform over legal actions, larger is
    /// greedier.
    pub beta: f64,
    /// Stand-in cost for worlds where the chest cannot be reached. Must
    /// exceed any achievable plan length on the map.
    pub unreachable_penalty: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            beta: 1.0,
            unreachable_penalty: 1000.0,
        }
    }
}

/// The agent's objective. Only chest-seeking is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Goal {
    #[default]
    Chest,
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("chest")
    }
}

impl FromStr for Goal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chest" => Ok(Goal::Chest),
            other => Err(Error::InvalidArgument(format!("unknown goal `{other}`"))),
        }
    }
}

/// Memoized optimal plan lengths (`None` = chest unreachable).
///
/// Concurrent queries share the cache, so parallel rollouts over the same
/// map reuse each other's work.
pub struct CostOracle {
    map: GridMap,
    cache: DashMap<WorldState, Option<u32>>,
}

impl CostOracle {
    pub fn new(map: &GridMap) -> Self {
        CostOracle {
            map: map.clone(),
            cache: DashMap::new(),
        }
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    /// Minimal number of actions to take the chest from `state`, or `None`
    /// if no action sequence reaches it.
    pub fn plan_cost(&self, state: &WorldState) -> Option<u32> {
        if state.chest_taken {
            return Some(0);
        }
        if let Some(cached) = self.cache.get(state) {
            return *cached;
        }
        self.label_component(state);
        *self
            .cache
            .get(state)
            .expect("component labeling covers the query state")
    }

    /// `plan_cost` as an `f64`, substituting the unreachable penalty.
    pub fn expected_cost(&self, state: &WorldState, params: &PolicyParams) -> f64 {
        match self.plan_cost(state) {
            Some(c) => c as f64,
            None => params.unreachable_penalty,
        }
    }

    /// Explores everything reachable from `start`, then computes exact
    /// costs for the whole component by a backward breadth-first sweep
    /// from its goal states.
    fn label_component(&self, start: &WorldState) {
        let mut index: HashMap<WorldState, usize> = HashMap::new();
        let mut states: Vec<WorldState> = Vec::new();
        let mut preds: Vec<Vec<usize>> = Vec::new();
        let mut goals: Vec<usize> = Vec::new();
        let mut queue = VecDeque::new();

        index.insert(start.clone(), 0);
        states.push(start.clone());
        preds.push(Vec::new());
        if start.chest_taken {
            goals.push(0);
        }
        queue.push_back(0usize);

        while let Some(si) = queue.pop_front() {
            if states[si].chest_taken {
                // Plans end at the first goal state; no need to look past it.
                continue;
            }
            let here = states[si].clone();
            for a in legal_actions(&self.map, &here) {
                if a == Action::NoOp {
                    continue;
                }
                let next = transition(&self.map, &here, a).expect("legal action transitions");
                let ti = match index.get(&next) {
                    Some(&ti) => ti,
                    None => {
                        let ti = states.len();
                        index.insert(next.clone(), ti);
                        states.push(next.clone());
                        preds.push(Vec::new());
                        if next.chest_taken {
                            goals.push(ti);
                        }
                        queue.push_back(ti);
                        ti
                    }
                };
                preds[ti].push(si);
            }
        }

        let mut dist: Vec<Option<u32>> = vec![None; states.len()];
        let mut back = VecDeque::new();
        for &g in &goals {
            dist[g] = Some(0);
            back.push_back(g);
        }
        while let Some(ti) = back.pop_front() {
            let d = dist[ti].expect("queued states are labeled");
            for &pi in &preds[ti] {
                if dist[pi].is_none() {
                    dist[pi] = Some(d + 1);
                    back.push_back(pi);
                }
            }
        }

        for (s, d) in states.into_iter().zip(dist) {
            self.cache.insert(s, d);
        }
    }
}

/// Expected cost-to-go of taking `action` now: one step plus the optimal
/// remaining cost, averaged over weighted belief particles. Errors if the
/// action is illegal in any particle's world.
pub fn q_value(
    oracle: &CostOracle,
    particles: &[(f64, &WorldState)],
    action: Action,
    params: &PolicyParams,
) -> Result<f64> {
    if particles.is_empty() {
        return Err(Error::InvalidArgument("q_value needs particles".into()));
    }
    let mut total = 0.0;
    for &(w, s) in particles {
        let next = transition(oracle.map(), s, action)?;
        total += w * (1.0 + oracle.expected_cost(&next, params));
    }
    Ok(total)
}

/// The softmax action distribution over the legal actions, in canonical
/// action order. Probabilities are computed with the max-shifted exponent
/// so extreme `beta` values stay finite.
///
/// The legal set is taken from the first particle's world; belief particles
/// that survive observation filtering agree on every observable feature, so
/// they share it.
pub fn action_distribution(
    oracle: &CostOracle,
    particles: &[(f64, &WorldState)],
    params: &PolicyParams,
) -> Result<Vec<(Action, f64)>> {
    if particles.is_empty() {
        return Err(Error::InvalidArgument(
            "action_distribution needs particles".into(),
        ));
    }
    let legal = legal_actions(oracle.map(), particles[0].1);
    debug_assert!(
        particles
            .iter()
            .all(|&(_, s)| legal_actions(oracle.map(), s) == legal),
        "belief particles must agree on the legal action set"
    );
    let mut exponents = Vec::with_capacity(legal.len());
    for &a in &legal {
        let q = q_value(oracle, particles, a, params)?;
        exponents.push(-params.beta * q);
    }
    let max = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(legal
        .into_iter()
        .zip(weights)
        .map(|(a, w)| (a, w / total))
        .collect())
}

/// How rollouts choose action probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionModel {
    /// The softmax-rational agent model.
    Boltzmann,
    /// Uniform over the legal actions; the naive model used by listeners.
    UniformLegal,
}

/// One timestep of a rollout: the world after the step's action, the
/// agent's updated belief, each surviving particle's evolved world, and
/// the probability the model assigned to the action taken (1 at step 0).
#[derive(Debug, Clone)]
pub struct StepSnapshot {
    pub action_prob: f64,
    pub state: WorldState,
    pub belief: Belief,
    /// Evolved candidate worlds, aligned with `belief.particles()`.
    pub particle_states: Vec<(usize, WorldState)>,
}

/// A simulated trajectory. `alive` is false if the rollout hit an illegal
/// action, an observation mismatch, or belief annihilation; `likelihood`
/// is then 0 and `steps` stops at the last consistent snapshot.
#[derive(Debug, Clone)]
pub struct RolloutTrace {
    pub steps: Vec<StepSnapshot>,
    pub likelihood: f64,
    pub alive: bool,
}

impl RolloutTrace {
    fn dead(steps: Vec<StepSnapshot>) -> Self {
        RolloutTrace {
            steps,
            likelihood: 0.0,
            alive: false,
        }
    }

    /// The last snapshot (panics on a rollout that died at step 0).
    pub fn last(&self) -> &StepSnapshot {
        self.steps.last().expect("trace has steps")
    }
}

fn belief_particle_refs<'a>(
    belief: &Belief,
    particle_states: &'a [(usize, WorldState)],
) -> Vec<(f64, &'a WorldState)> {
    debug_assert_eq!(belief.support_size(), particle_states.len());
    belief
        .particles()
        .iter()
        .zip(particle_states)
        .map(|(&(idx, w), (pidx, s))| {
            debug_assert_eq!(idx, *pidx);
            (weight_to_f64(w), s)
        })
        .collect()
}

/// Simulates `actions` from an initial world and belief.
///
/// The belief is first conditioned on the agent's own view of the initial
/// world, then evolves with each action: every particle's candidate world
/// advances deterministically and particles that disagree with the agent's
/// next observation are dropped. When `condition_obs` is given (the
/// observer's per-step views, length `actions.len() + 1`), the rollout
/// additionally dies on any mismatch with the simulated world's views —
/// this is how hypothetical worlds are scored against what was actually
/// seen.
#[allow(clippy::too_many_arguments)]
pub fn rollout(
    oracle: &CostOracle,
    initial_worlds: &[WorldState],
    s0: &WorldState,
    b0: &Belief,
    actions: &[Action],
    model: ActionModel,
    params: &PolicyParams,
    condition_obs: Option<&[Observation]>,
) -> RolloutTrace {
    if let Some(cond) = condition_obs {
        debug_assert_eq!(cond.len(), actions.len() + 1);
    }
    let obs0 = observe(s0);
    if let Some(cond) = condition_obs {
        if obs0 != cond[0] {
            return RolloutTrace::dead(Vec::new());
        }
    }
    let belief0 = match b0.filter(|idx| observe(&initial_worlds[idx]) == obs0) {
        Ok(b) => b,
        Err(_) => return RolloutTrace::dead(Vec::new()),
    };
    let particle_states: Vec<(usize, WorldState)> = belief0
        .support()
        .map(|idx| (idx, initial_worlds[idx].clone()))
        .collect();
    let start = StepSnapshot {
        action_prob: 1.0,
        state: s0.clone(),
        belief: belief0,
        particle_states,
    };
    continue_rollout(
        oracle,
        start,
        actions,
        model,
        params,
        condition_obs.map(|c| &c[1..]),
    )
}

/// Extends a rollout from an existing snapshot through `actions`.
/// `condition_obs`, if given, holds the observer's views for the new steps
/// only (length `actions.len()`).
pub fn continue_rollout(
    oracle: &CostOracle,
    start: StepSnapshot,
    actions: &[Action],
    model: ActionModel,
    params: &PolicyParams,
    condition_obs: Option<&[Observation]>,
) -> RolloutTrace {
    if let Some(cond) = condition_obs {
        debug_assert_eq!(cond.len(), actions.len());
    }
    let map = oracle.map();
    let mut steps = vec![start];
    let mut likelihood = 1.0;

    for (i, &a) in actions.iter().enumerate() {
        let cur = steps.last().expect("steps is never empty");
        if !is_legal(map, &cur.state, a) {
            return RolloutTrace::dead(steps);
        }
        let prob = match model {
            ActionModel::UniformLegal => 1.0 / legal_actions(map, &cur.state).len() as f64,
            ActionModel::Boltzmann => {
                let particles = belief_particle_refs(&cur.belief, &cur.particle_states);
                let dist = match action_distribution(oracle, &particles, params) {
                    Ok(d) => d,
                    Err(_) => return RolloutTrace::dead(steps),
                };
                dist.iter()
                    .find(|&&(act, _)| act == a)
                    .map(|&(_, p)| p)
                    .expect("legal actions appear in the distribution")
            }
        };
        likelihood *= prob;

        let next_state = transition(map, &cur.state, a).expect("checked legality above");
        let next_obs = observe(&next_state);
        if let Some(cond) = condition_obs {
            if next_obs != cond[i] {
                return RolloutTrace::dead(steps);
            }
        }

        // Evolve each particle's candidate world; particles where the
        // action is illegal or the evolved view disagrees with what the
        // agent sees are discarded.
        let mut evolved: HashMap<usize, WorldState> = HashMap::new();
        for (idx, ps) in &cur.particle_states {
            if let Ok(next_ps) = transition(map, ps, a) {
                evolved.insert(*idx, next_ps);
            }
        }
        let next_belief = match cur.belief.filter(|idx| {
            evolved
                .get(&idx)
                .is_some_and(|ps| observe(ps) == next_obs)
        }) {
            Ok(b) => b,
            Err(_) => return RolloutTrace::dead(steps),
        };
        let next_particles: Vec<(usize, WorldState)> = next_belief
            .support()
            .map(|idx| (idx, evolved.remove(&idx).expect("supported particle evolved")))
            .collect();

        steps.push(StepSnapshot {
            action_prob: prob,
            state: next_state,
            belief: next_belief,
            particle_states: next_particles,
        });
    }

    RolloutTrace {
        steps,
        likelihood,
        alive: true,
    }
}

/// Probability of the agent producing `actions` from `(s0, b0)` under the
/// softmax model, including the agent's own belief updates along the way.
/// Zero if the trajectory is illegal or annihilates the belief.
pub fn trajectory_likelihood(
    oracle: &CostOracle,
    initial_worlds: &[WorldState],
    s0: &WorldState,
    b0: &Belief,
    actions: &[Action],
    params: &PolicyParams,
) -> f64 {
    rollout(
        oracle,
        initial_worlds,
        s0,
        b0,
        actions,
        ActionModel::Boltzmann,
        params,
        None,
    )
    .likelihood
}
