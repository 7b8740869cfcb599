//! Independent brute-force recomputation of every reported quantity.
//!
//! This module re-derives the whole model with the plainest machinery
//! available -- per-query breadth-first searches instead of the shared
//! component-labeled cost cache, dense `f64` weight vectors instead of
//! exact rationals, straight sequential loops instead of parallel maps,
//! its own modal-threshold evaluation -- so that a defect in the main
//! pipeline and a defect here would have to coincide exactly to escape
//! notice. Only the world dynamics (`transition`, `observe`,
//! `legal_actions`) and the propositional formula semantics are shared:
//! they define the problem rather than solve it.
//!
//! [`compare`] runs the pipeline and the recomputation side by side and
//! reports the worst absolute deviation per quantity; [`check`] wraps it
//! with the acceptance tolerance.

use std::collections::{HashMap, VecDeque};

use crate::attribution::FactorVector;
use crate::belief::DEFAULT_PARTICLE_COUNT;
use crate::causal::{
    causal_necessity, causal_normality, causal_sufficiency, find_intervention_point,
};
use crate::elot::{eval_inner, EpistemicFormula, Modal, ModalThresholds};
use crate::error::{Error, Result};
use crate::grid::{
    enumerate_initial_states, legal_actions, observe, transition, Action, GridMap, Observation,
    WorldState,
};
use crate::observer::{accuracy, informativity, joint_filter, listener_posterior, ListenerModel};
use crate::planner::{ActionModel, CostOracle, PolicyParams};
use crate::scenario::Scenario;

/// Largest joint hypothesis count the oracle will enumerate.
pub const DEFAULT_MAX_ATOMS: usize = 5000;

/// Comparison tolerance for acceptance checks.
pub const TOLERANCE: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Plain shortest-path search, memoized per start state only.

struct BfsCosts<'m> {
    map: &'m GridMap,
    memo: HashMap<WorldState, Option<u32>>,
}

impl<'m> BfsCosts<'m> {
    fn new(map: &'m GridMap) -> Self {
        BfsCosts {
            map,
            memo: HashMap::new(),
        }
    }

    /// Minimal action count to take the chest, by uninformed breadth-first
    /// search over full world states.
    fn cost(&mut self, start: &WorldState) -> Option<u32> {
        if start.chest_taken {
            return Some(0);
        }
        if let Some(&c) = self.memo.get(start) {
            return c;
        }
        let mut dist: HashMap<WorldState, u32> = HashMap::new();
        let mut queue = VecDeque::new();
        dist.insert(start.clone(), 0);
        queue.push_back(start.clone());
        let mut answer = None;
        'search: while let Some(s) = queue.pop_front() {
            let d = dist[&s];
            for a in legal_actions(self.map, &s) {
                let t = transition(self.map, &s, a).expect("legal action");
                if t.chest_taken {
                    answer = Some(d + 1);
                    break 'search;
                }
                if !dist.contains_key(&t) {
                    dist.insert(t.clone(), d + 1);
                    queue.push_back(t);
                }
            }
        }
        self.memo.insert(start.clone(), answer);
        answer
    }

    fn cost_or_penalty(&mut self, state: &WorldState, params: &PolicyParams) -> f64 {
        match self.cost(state) {
            Some(c) => c as f64,
            None => params.unreachable_penalty,
        }
    }
}

// ---------------------------------------------------------------------------
// Dense belief states and rollouts.

/// A belief as parallel arrays: supported world indices, their weights
/// (positive, summing to 1), and each one's forward-simulated world.
#[derive(Debug, Clone)]
struct DenseBelief {
    support: Vec<usize>,
    weights: Vec<f64>,
    sims: Vec<WorldState>,
}

impl DenseBelief {
    /// Keeps the entries whose flag is set and renormalizes; `None` when
    /// nothing survives.
    fn retained(&self, keep: &[bool]) -> Option<DenseBelief> {
        let mut support = Vec::new();
        let mut weights = Vec::new();
        let mut sims = Vec::new();
        for (j, ((&idx, &w), sim)) in self
            .support
            .iter()
            .zip(&self.weights)
            .zip(&self.sims)
            .enumerate()
        {
            if keep[j] {
                support.push(idx);
                weights.push(w);
                sims.push(sim.clone());
            }
        }
        let total: f64 = weights.iter().sum();
        if support.is_empty() || total <= 0.0 {
            return None;
        }
        for w in &mut weights {
            *w /= total;
        }
        Some(DenseBelief {
            support,
            weights,
            sims,
        })
    }
}

/// One step of a brute-force rollout.
#[derive(Debug, Clone)]
struct DenseStep {
    state: WorldState,
    belief: DenseBelief,
}

#[derive(Debug)]
struct DenseTrace {
    steps: Vec<DenseStep>,
    likelihood: f64,
    alive: bool,
}

/// Softmax-rational action probabilities from a dense belief. Exponents
/// are shifted by the smallest q so uniformly huge costs stay finite.
fn dense_policy(
    costs: &mut BfsCosts,
    state: &WorldState,
    belief: &DenseBelief,
    params: &PolicyParams,
) -> Vec<(Action, f64)> {
    let legal = legal_actions(costs.map, state);
    let mut qs = Vec::with_capacity(legal.len());
    for &a in &legal {
        let mut q = 0.0;
        for (&w, sim) in belief.weights.iter().zip(&belief.sims) {
            let next = transition(costs.map, sim, a)
                .expect("belief particles share the legal action set");
            q += w * (1.0 + costs.cost_or_penalty(&next, params));
        }
        qs.push(q);
    }
    let min_q = qs.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = qs.iter().map(|q| (-params.beta * (q - min_q)).exp()).collect();
    let total: f64 = weights.iter().sum();
    legal
        .into_iter()
        .zip(weights)
        .map(|(a, w)| (a, w / total))
        .collect()
}

/// Brute-force rollout of one joint hypothesis through the given actions.
///
/// Mirrors the generative model: condition the initial belief on the
/// agent's first view; per action, multiply in the model's probability for
/// it, advance the hypothesis world (dying if the action is illegal
/// there), check the new view against `condition` if given, advance every
/// belief particle, and drop particles that disagree with the agent's new
/// view.
fn dense_rollout(
    costs: &mut BfsCosts,
    start: DenseStep,
    actions: &[Action],
    uniform: bool,
    params: &PolicyParams,
    condition: Option<&[Observation]>,
) -> DenseTrace {
    let mut steps = vec![start];
    let mut likelihood = 1.0;
    for (i, &a) in actions.iter().enumerate() {
        let cur = steps.last().expect("nonempty");
        let legal = legal_actions(costs.map, &cur.state);
        if !legal.contains(&a) {
            return DenseTrace {
                steps,
                likelihood: 0.0,
                alive: false,
            };
        }
        let prob = if uniform {
            1.0 / legal.len() as f64
        } else {
            dense_policy(costs, &cur.state, &cur.belief, params)
                .into_iter()
                .find(|&(act, _)| act == a)
                .map(|(_, p)| p)
                .expect("legal action has a probability")
        };
        likelihood *= prob;

        let next_state = transition(costs.map, &cur.state, a).expect("checked legality");
        let next_view = observe(&next_state);
        if let Some(cond) = condition {
            if next_view != cond[i] {
                return DenseTrace {
                    steps,
                    likelihood: 0.0,
                    alive: false,
                };
            }
        }

        let mut advanced = cur.belief.clone();
        let mut ok = vec![false; advanced.sims.len()];
        for (j, sim) in advanced.sims.iter_mut().enumerate() {
            if let Ok(next) = transition(costs.map, sim, a) {
                ok[j] = observe(&next) == next_view;
                *sim = next;
            }
        }
        let Some(next_belief) = advanced.retained(&ok) else {
            return DenseTrace {
                steps,
                likelihood: 0.0,
                alive: false,
            };
        };
        steps.push(DenseStep {
            state: next_state,
            belief: next_belief,
        });
    }
    DenseTrace {
        steps,
        likelihood,
        alive: true,
    }
}

fn initial_step(
    worlds: &[WorldState],
    w0: usize,
    counts: &[u32],
    condition: Option<&Observation>,
) -> Option<DenseStep> {
    let state = worlds[w0].clone();
    let view = observe(&state);
    if let Some(cond) = condition {
        if view != *cond {
            return None;
        }
    }
    let total: u32 = counts.iter().sum();
    let full = DenseBelief {
        support: (0..worlds.len()).filter(|&i| counts[i] > 0).collect(),
        weights: counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| c as f64 / total as f64)
            .collect(),
        sims: (0..worlds.len())
            .filter(|&i| counts[i] > 0)
            .map(|i| worlds[i].clone())
            .collect(),
    };
    let visible: Vec<bool> = full.sims.iter().map(|sim| observe(sim) == view).collect();
    let belief = full.retained(&visible)?;
    Some(DenseStep { state, belief })
}

/// All count vectors of `DEFAULT_PARTICLE_COUNT` particles over `n`
/// worlds, in ascending lexicographic order (the shared index scheme).
fn particle_count_vectors(n: usize) -> Vec<Vec<u32>> {
    fn rec(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n - 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=remaining {
            prefix.push(c);
            rec(n, remaining - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, DEFAULT_PARTICLE_COUNT, &mut Vec::new(), &mut out);
    out
}

/// A surviving joint hypothesis with its full trace.
struct DenseAtom {
    world: usize,
    belief: usize,
    weight: f64,
    trace: DenseTrace,
}

/// Enumerates and filters the whole joint hypothesis space sequentially.
#[allow(clippy::too_many_arguments)]
fn dense_filter(
    costs: &mut BfsCosts,
    worlds: &[WorldState],
    count_vectors: &[Vec<u32>],
    true_s0: &WorldState,
    actions: &[Action],
    uniform: bool,
    params: &PolicyParams,
    condition: bool,
) -> Result<Vec<DenseAtom>> {
    let views = if condition {
        let mut v = Vec::with_capacity(actions.len() + 1);
        let mut s = true_s0.clone();
        v.push(observe(&s));
        for &a in actions {
            s = transition(costs.map, &s, a)?;
            v.push(observe(&s));
        }
        Some(v)
    } else {
        None
    };

    let mut atoms = Vec::new();
    for w0 in 0..worlds.len() {
        for (b0, counts) in count_vectors.iter().enumerate() {
            let Some(start) = initial_step(worlds, w0, counts, views.as_ref().map(|v| &v[0]))
            else {
                continue;
            };
            let trace = dense_rollout(
                costs,
                start,
                actions,
                uniform,
                params,
                views.as_deref().map(|v| &v[1..]),
            );
            if trace.alive && trace.likelihood > 0.0 {
                atoms.push(DenseAtom {
                    world: w0,
                    belief: b0,
                    weight: trace.likelihood,
                    trace,
                });
            }
        }
    }
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    if atoms.is_empty() || total <= 0.0 {
        return Err(Error::ImpossibleTrajectory);
    }
    for a in &mut atoms {
        a.weight /= total;
    }
    Ok(atoms)
}

// ---------------------------------------------------------------------------
// Statement truth over dense beliefs (own modal evaluation).

fn dense_truth(
    map: &GridMap,
    formula: &EpistemicFormula,
    step: &DenseStep,
    thresholds: &ModalThresholds,
) -> bool {
    let degree: f64 = step
        .belief
        .weights
        .iter()
        .zip(&step.belief.sims)
        .filter(|(_, sim)| eval_inner(&formula.inner, map, sim))
        .map(|(&w, _)| w)
        .sum();
    match formula.modal {
        Modal::Believes => degree >= thresholds.believes,
        Modal::Certain => degree >= thresholds.certain,
        Modal::Knows => degree >= thresholds.knows && eval_inner(&formula.inner, map, &step.state),
    }
}

fn final_truth(
    map: &GridMap,
    formula: &EpistemicFormula,
    atom: &DenseAtom,
    thresholds: &ModalThresholds,
) -> bool {
    dense_truth(
        map,
        formula,
        atom.trace.steps.last().expect("alive trace"),
        thresholds,
    )
}

// ---------------------------------------------------------------------------
// The recomputed quantities.

/// Everything the oracle recomputes for one scenario.
#[derive(Debug, Clone)]
pub struct OracleQuantities {
    /// Sorted `((world index, belief index), posterior weight)`.
    pub posterior: Vec<((usize, usize), f64)>,
    /// Per statement: the six factors, in scenario statement order.
    pub factors: Vec<FactorVector>,
    /// Intervention step (1-based).
    pub t_c: usize,
}

/// Recomputes the posterior and all per-statement factors by direct
/// enumeration. Refuses hypothesis spaces larger than `max_atoms`.
pub fn recompute(sc: &Scenario, max_atoms: usize) -> Result<OracleQuantities> {
    let worlds = enumerate_initial_states(&sc.map, &sc.hidden_keys)?;
    let count_vectors = particle_count_vectors(worlds.len());
    let atoms_total = worlds.len() * count_vectors.len();
    if atoms_total > max_atoms {
        return Err(Error::OracleTooLarge {
            atoms: atoms_total,
            limit: max_atoms,
        });
    }
    let mut costs = BfsCosts::new(&sc.map);
    let actions = &sc.trajectory;

    let posterior_atoms = dense_filter(
        &mut costs,
        &worlds,
        &count_vectors,
        &sc.true_world,
        actions,
        false,
        &sc.params,
        true,
    )?;
    let watching = dense_filter(
        &mut costs,
        &worlds,
        &count_vectors,
        &sc.true_world,
        actions,
        true,
        &sc.params,
        true,
    )?;
    let ignorant = dense_filter(
        &mut costs,
        &worlds,
        &count_vectors,
        &sc.true_world,
        actions,
        true,
        &sc.params,
        false,
    )?;

    // Intervention step: one past the last step at which any surviving
    // hypothesis' belief support shrank.
    let mut last_change = 0usize;
    for atom in &posterior_atoms {
        let steps = &atom.trace.steps;
        for tau in (1..steps.len()).rev() {
            if tau <= last_change {
                break;
            }
            if steps[tau].belief.support != steps[tau - 1].belief.support {
                last_change = tau;
                break;
            }
        }
    }
    let t_c = last_change + 1;
    let past_atoms = dense_filter(
        &mut costs,
        &worlds,
        &count_vectors,
        &sc.true_world,
        &actions[..t_c - 1],
        false,
        &sc.params,
        true,
    )?;

    let mut factors = Vec::with_capacity(sc.statements.len());
    for formula in &sc.statements {
        let acc = dense_accuracy(&sc.map, formula, &posterior_atoms, &sc.thresholds);
        let info = dense_informativity(&sc.map, formula, &watching, &sc.thresholds)?;
        let info_star = dense_informativity(&sc.map, formula, &ignorant, &sc.thresholds)?;

        let normality: f64 = past_atoms
            .iter()
            .filter(|a| final_truth(&sc.map, formula, a, &sc.thresholds))
            .map(|a| a.weight)
            .sum();
        let necessity = match dense_replay(
            &mut costs,
            &sc.map,
            formula,
            &past_atoms,
            &actions[t_c - 1..],
            &sc.params,
            &sc.thresholds,
            false,
        ) {
            Some(p) => (1.0 - p).clamp(0.0, 1.0),
            None => 0.0,
        };
        let sufficiency = match dense_replay(
            &mut costs,
            &sc.map,
            formula,
            &past_atoms,
            &actions[t_c - 1..],
            &sc.params,
            &sc.thresholds,
            true,
        ) {
            Some(p) => p.clamp(0.0, 1.0),
            None => 0.0,
        };

        factors.push(FactorVector {
            accuracy: acc,
            informativity: info,
            informativity_ignorant: info_star,
            normality: normality.clamp(0.0, 1.0),
            necessity,
            sufficiency,
        });
    }

    let mut posterior: Vec<((usize, usize), f64)> = posterior_atoms
        .iter()
        .map(|a| ((a.world, a.belief), a.weight))
        .collect();
    posterior.sort_by_key(|&(key, _)| key);

    Ok(OracleQuantities {
        posterior,
        factors,
        t_c,
    })
}

fn dense_accuracy(
    map: &GridMap,
    formula: &EpistemicFormula,
    atoms: &[DenseAtom],
    thresholds: &ModalThresholds,
) -> f64 {
    let n = atoms.len() as f64;
    let mut post_true = 0.0;
    let mut post_false = 0.0;
    let mut prior_true = 0.0;
    let mut prior_false = 0.0;
    for atom in atoms {
        if final_truth(map, formula, atom, thresholds) {
            post_true += atom.weight;
            prior_true += 1.0 / n;
        } else {
            post_false += atom.weight;
            prior_false += 1.0 / n;
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

fn dense_informativity(
    map: &GridMap,
    formula: &EpistemicFormula,
    atoms: &[DenseAtom],
    thresholds: &ModalThresholds,
) -> Result<f64> {
    let truths: Vec<bool> = atoms
        .iter()
        .map(|a| final_truth(map, formula, a, thresholds))
        .collect();
    let mass: f64 = atoms
        .iter()
        .zip(&truths)
        .filter(|&(_, &t)| t)
        .map(|(a, _)| a.weight)
        .sum();
    if mass <= 0.0 {
        return Err(Error::Unassertable);
    }
    let mut kl = 0.0;
    for (atom, &truth) in atoms.iter().zip(&truths) {
        if truth {
            let q = atom.weight / mass;
            kl += q * (q / atom.weight).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// Probability of the post-intervention actions after conditioning the
/// past on the statement's truth `value`; `None` when no past atom has it.
#[allow(clippy::too_many_arguments)]
fn dense_replay(
    costs: &mut BfsCosts,
    map: &GridMap,
    formula: &EpistemicFormula,
    past_atoms: &[DenseAtom],
    tail: &[Action],
    params: &PolicyParams,
    thresholds: &ModalThresholds,
    value: bool,
) -> Option<f64> {
    let selected: Vec<&DenseAtom> = past_atoms
        .iter()
        .filter(|a| final_truth(map, formula, a, thresholds) == value)
        .collect();
    let total: f64 = selected.iter().map(|a| a.weight).sum();
    if selected.is_empty() || total <= 0.0 {
        return None;
    }
    let mut prob = 0.0;
    for atom in selected {
        let start = atom.trace.steps.last().expect("alive trace").clone();
        let replay = dense_rollout(costs, start, tail, false, params, None);
        prob += (atom.weight / total) * replay.likelihood;
    }
    Some(prob)
}

// ---------------------------------------------------------------------------
// Pipeline-side extraction and comparison.

/// The pipeline's values for the quantities the oracle recomputes,
/// extracted through the ordinary public entry points.
#[derive(Debug, Clone)]
pub struct PipelineQuantities {
    pub posterior: Vec<((usize, usize), f64)>,
    pub factors: Vec<FactorVector>,
    pub t_c: usize,
}

/// Computes the pipeline's quantities for a scenario.
pub fn pipeline_quantities(sc: &Scenario) -> Result<PipelineQuantities> {
    let worlds = enumerate_initial_states(&sc.map, &sc.hidden_keys)?;
    let beliefs = crate::belief::enumerate_belief_prior(worlds.len(), DEFAULT_PARTICLE_COUNT);
    let oracle = CostOracle::new(&sc.map);
    let posterior = joint_filter(
        &oracle,
        &worlds,
        &beliefs,
        &sc.true_world,
        &sc.trajectory,
        ActionModel::Boltzmann,
        &sc.params,
        true,
    )?;
    let watching = listener_posterior(
        &oracle,
        &worlds,
        &beliefs,
        &sc.true_world,
        &sc.trajectory,
        &sc.params,
        ListenerModel::SeesEnvironment,
    )?;
    let ignorant = listener_posterior(
        &oracle,
        &worlds,
        &beliefs,
        &sc.true_world,
        &sc.trajectory,
        &sc.params,
        ListenerModel::Ignorant,
    )?;
    let point = find_intervention_point(
        &oracle,
        &worlds,
        &beliefs,
        &sc.true_world,
        &sc.trajectory,
        &sc.params,
    )?;

    let mut factors = Vec::with_capacity(sc.statements.len());
    for formula in &sc.statements {
        factors.push(FactorVector {
            accuracy: accuracy(&sc.map, formula, &posterior, &sc.thresholds),
            informativity: informativity(&sc.map, formula, &watching, &sc.thresholds)?,
            informativity_ignorant: informativity(&sc.map, formula, &ignorant, &sc.thresholds)?,
            normality: causal_normality(&sc.map, formula, &point, &sc.thresholds),
            necessity: causal_necessity(
                &oracle,
                formula,
                &point,
                &sc.trajectory,
                &sc.params,
                &sc.thresholds,
            ),
            sufficiency: causal_sufficiency(
                &oracle,
                formula,
                &point,
                &sc.trajectory,
                &sc.params,
                &sc.thresholds,
            ),
        });
    }

    let mut posterior_weights: Vec<((usize, usize), f64)> = posterior
        .atoms
        .iter()
        .map(|a| ((a.world, a.belief), a.weight))
        .collect();
    posterior_weights.sort_by_key(|&(key, _)| key);

    Ok(PipelineQuantities {
        posterior: posterior_weights,
        factors,
        t_c: point.t_c,
    })
}

/// One compared quantity.
#[derive(Debug, Clone)]
pub struct DeviationRow {
    /// Quantity name, e.g. `acc`, `posterior`, `t_c`.
    pub quantity: String,
    /// 1-based statement index for per-statement quantities.
    pub statement: Option<usize>,
    pub pipeline: f64,
    pub oracle: f64,
    pub deviation: f64,
}

/// The outcome of comparing pipeline values against the recomputation.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub scenario_id: String,
    /// Joint hypothesis count before filtering.
    pub prior_atoms: usize,
    pub rows: Vec<DeviationRow>,
    pub max_deviation: f64,
}

impl ComparisonReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_deviation <= tolerance
    }

    /// Rows exceeding the tolerance, worst first.
    pub fn failures(&self, tolerance: f64) -> Vec<&DeviationRow> {
        let mut rows: Vec<&DeviationRow> = self
            .rows
            .iter()
            .filter(|r| r.deviation > tolerance)
            .collect();
        rows.sort_by(|a, b| b.deviation.partial_cmp(&a.deviation).expect("finite"));
        rows
    }

    /// The worst row per quantity name, in first-appearance order.
    pub fn per_quantity_max(&self) -> Vec<&DeviationRow> {
        let mut order: Vec<&str> = Vec::new();
        let mut best: HashMap<&str, &DeviationRow> = HashMap::new();
        for row in &self.rows {
            match best.get(row.quantity.as_str()) {
                Some(prev) if prev.deviation >= row.deviation => {}
                Some(_) => {
                    best.insert(&row.quantity, row);
                }
                None => {
                    order.push(&row.quantity);
                    best.insert(&row.quantity, row);
                }
            }
        }
        order.into_iter().map(|q| best[q]).collect()
    }
}

/// Diffs already-computed pipeline values against oracle values. Public so
/// fault-injection tests can corrupt one side.
pub fn compare_quantities(
    scenario_id: &str,
    prior_atoms: usize,
    pipeline: &PipelineQuantities,
    oracle: &OracleQuantities,
) -> ComparisonReport {
    let mut rows = Vec::new();

    // Posterior masses over the union of both supports; a hypothesis
    // missing on one side counts as weight 0 there.
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut oracle_map: HashMap<(usize, usize), f64> = oracle.posterior.iter().copied().collect();
    for &(key, pw) in &pipeline.posterior {
        let ow = oracle_map.remove(&key).unwrap_or(0.0);
        let dev = (pw - ow).abs();
        if dev > worst.0 {
            worst = (dev, pw, ow);
        }
    }
    for (_, ow) in oracle_map {
        if ow.abs() > worst.0 {
            worst = (ow.abs(), 0.0, ow);
        }
    }
    rows.push(DeviationRow {
        quantity: "posterior".into(),
        statement: None,
        pipeline: worst.1,
        oracle: worst.2,
        deviation: worst.0,
    });

    rows.push(DeviationRow {
        quantity: "t_c".into(),
        statement: None,
        pipeline: pipeline.t_c as f64,
        oracle: oracle.t_c as f64,
        deviation: (pipeline.t_c as f64 - oracle.t_c as f64).abs(),
    });

    for (i, (pf, of)) in pipeline.factors.iter().zip(&oracle.factors).enumerate() {
        let pairs = [
            ("acc", pf.accuracy, of.accuracy),
            ("info", pf.informativity, of.informativity),
            (
                "info_star",
                pf.informativity_ignorant,
                of.informativity_ignorant,
            ),
            ("cnorm", pf.normality, of.normality),
            ("cnecc", pf.necessity, of.necessity),
            ("csuff", pf.sufficiency, of.sufficiency),
        ];
        for (name, p, o) in pairs {
            rows.push(DeviationRow {
                quantity: name.into(),
                statement: Some(i + 1),
                pipeline: p,
                oracle: o,
                deviation: (p - o).abs(),
            });
        }
    }

    let max_deviation = rows
        .iter()
        .map(|r| r.deviation)
        .fold(0.0f64, f64::max);
    ComparisonReport {
        scenario_id: scenario_id.to_string(),
        prior_atoms,
        rows,
        max_deviation,
    }
}

/// Runs the pipeline and the brute-force recomputation on a scenario and
/// compares every quantity.
pub fn compare(sc: &Scenario, max_atoms: usize) -> Result<ComparisonReport> {
    let oracle_q = recompute(sc, max_atoms)?;
    let pipeline_q = pipeline_quantities(sc)?;
    let worlds = enumerate_initial_states(&sc.map, &sc.hidden_keys)?;
    let beliefs = particle_count_vectors(worlds.len());
    Ok(compare_quantities(
        &sc.id,
        worlds.len() * beliefs.len(),
        &pipeline_q,
        &oracle_q,
    ))
}

/// [`compare`] with the standard atom limit and tolerance.
pub fn check(sc: &Scenario) -> Result<ComparisonReport> {
    let report = compare(sc, DEFAULT_MAX_ATOMS)?;
    if !report.passes(TOLERANCE) {
        let worst = &report.failures(TOLERANCE)[0];
        return Err(Error::Scenario(format!(
            "oracle deviation {:.3e} on `{}`{} (pipeline {} vs oracle {})",
            worst.deviation,
            worst.quantity,
            worst
                .statement
                .map(|s| format!(" of statement {s}"))
                .unwrap_or_default(),
            worst.pipeline,
            worst.oracle,
        )));
    }
    Ok(report)
}
