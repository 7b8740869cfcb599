//! End-to-end runs: scenario in, factor tables, rankings, and fits out.
//!
//! `analyze` does the heavy lifting once per scenario -- enumerate the
//! hypothesis space, filter it against the trajectory, build both listener
//! baselines, locate the intervention point -- and returns the six factor
//! values for each statement. Scoring and ranking ([`rank`]) and
//! coefficient fitting ([`fit_to_human`]) are cheap re-combinations of
//! those factors, so different factor subsets or coefficients never rerun
//! the simulation.
//!
//! Exports are deterministic: CSV columns are fixed, floats are printed
//! with nine significant digits, and identical inputs produce byte-identical
//! files.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::attribution::{
    attribute_probabilities, fit, pooled_model_ranks, ranking_distribution, score,
    BootstrapInterval, Coefficients, FactorSelection, FactorVector, GridResolution, RankResult,
};
use crate::belief::{enumerate_belief_prior, DEFAULT_PARTICLE_COUNT};
use crate::causal::{
    causal_necessity, causal_normality, causal_strength, causal_sufficiency,
    find_intervention_point, CausalParams,
};
use crate::error::{Error, Result};
use crate::grid::{enumerate_initial_states, BoxView};
use crate::observer::{
    accuracy, informativity, joint_filter, listener_posterior, observation_sequence, ListenerModel,
};
use crate::planner::{ActionModel, CostOracle};
use crate::scenario::{load_manifest, load_scenario, load_scenario_set, HumanRankings, Scenario};

/// One statement's computed factors.
#[derive(Debug, Clone)]
pub struct StatementFactors {
    /// 1-based, matching the human-data statement ids.
    pub statement_id: usize,
    pub text: String,
    pub factors: FactorVector,
}

/// Everything `analyze` learns about one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioAnalysis {
    pub scenario_id: String,
    pub n_worlds: usize,
    pub n_beliefs: usize,
    /// Hypothesis count before filtering (worlds × beliefs).
    pub prior_atoms: usize,
    pub surviving_atoms: usize,
    /// The step at which hypothetical belief changes are applied (1-based).
    pub intervention_step: usize,
    pub statements: Vec<StatementFactors>,
}

/// Runs the full inference pipeline for one scenario.
pub fn analyze(sc: &Scenario) -> Result<ScenarioAnalysis> {
    let worlds = enumerate_initial_states(&sc.map, &sc.hidden_keys)?;
    let beliefs = enumerate_belief_prior(worlds.len(), DEFAULT_PARTICLE_COUNT);
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

    let mut statements = Vec::with_capacity(sc.statements.len());
    for (i, formula) in sc.statements.iter().enumerate() {
        let acc = accuracy(&sc.map, formula, &posterior, &sc.thresholds);
        let info = informativity(&sc.map, formula, &watching, &sc.thresholds)?;
        let info_star = informativity(&sc.map, formula, &ignorant, &sc.thresholds)?;
        let normality = causal_normality(&sc.map, formula, &point, &sc.thresholds);
        let necessity = causal_necessity(
            &oracle,
            formula,
            &point,
            &sc.trajectory,
            &sc.params,
            &sc.thresholds,
        );
        let sufficiency = causal_sufficiency(
            &oracle,
            formula,
            &point,
            &sc.trajectory,
            &sc.params,
            &sc.thresholds,
        );
        statements.push(StatementFactors {
            statement_id: i + 1,
            text: sc.statement_texts[i].clone(),
            factors: FactorVector {
                accuracy: acc,
                informativity: info,
                informativity_ignorant: info_star,
                normality,
                necessity,
                sufficiency,
            },
        });
    }

    Ok(ScenarioAnalysis {
        scenario_id: sc.id.clone(),
        n_worlds: worlds.len(),
        n_beliefs: beliefs.len(),
        prior_atoms: worlds.len() * beliefs.len(),
        surviving_atoms: posterior.atoms.len(),
        intervention_step: point.t_c,
        statements,
    })
}

/// One step of the actual trajectory, for `simulate` output.
#[derive(Debug, Clone)]
pub struct SimulationStep {
    /// 0 for the initial view, then the 1-based action step.
    pub step: usize,
    /// The action taken to reach this view (`None` for the initial view).
    pub action: Option<String>,
    pub agent_pos: (usize, usize),
    pub inventory: String,
    /// Per box: what an onlooker sees.
    pub box_views: Vec<String>,
    pub chest_taken: bool,
}

/// Replays the scenario's trajectory in its true world, returning the
/// observer-visible view after every step.
pub fn simulate(sc: &Scenario) -> Result<Vec<SimulationStep>> {
    let views = observation_sequence(&sc.map, &sc.true_world, &sc.trajectory)?;
    Ok(views
        .iter()
        .enumerate()
        .map(|(step, view)| SimulationStep {
            step,
            action: step.checked_sub(1).map(|i| sc.trajectory[i].to_string()),
            agent_pos: (view.agent_pos.x, view.agent_pos.y),
            inventory: view.inventory.to_string(),
            box_views: view
                .box_view
                .iter()
                .map(|v| match v {
                    BoxView::Unknown => "closed".to_string(),
                    BoxView::Empty => "open: empty".to_string(),
                    BoxView::Contains(c) => format!("open: {c} key"),
                })
                .collect(),
            chest_taken: view.chest_taken,
        })
        .collect())
}

/// Scores, attribution probabilities, and the ranking distribution for one
/// analyzed scenario.
#[derive(Debug, Clone)]
pub struct RankReport {
    pub scenario_id: String,
    pub factors_label: String,
    pub scores: Vec<f64>,
    pub attribution: Vec<f64>,
    pub ranking: RankResult,
}

/// Combines an analysis's factors under the given coefficients.
pub fn rank(
    analysis: &ScenarioAnalysis,
    coeffs: &Coefficients,
    selection: &FactorSelection,
) -> RankReport {
    let scores: Vec<f64> = analysis
        .statements
        .iter()
        .map(|s| score(&s.factors, coeffs, selection))
        .collect();
    RankReport {
        scenario_id: analysis.scenario_id.clone(),
        factors_label: selection.label(),
        attribution: attribute_probabilities(&scores),
        ranking: ranking_distribution(&scores),
        scores,
    }
}

/// Per-scenario model and human average ranks after a fit.
#[derive(Debug, Clone)]
pub struct FitScenarioRanks {
    pub scenario_id: String,
    pub model: Vec<f64>,
    pub human: Vec<f64>,
}

/// A complete fit: coefficients, achieved correlation, bootstrap interval,
/// and the rank pairs behind them.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub factors_label: String,
    pub coefficients: Coefficients,
    pub correlation: f64,
    pub interval: BootstrapInterval,
    pub scenarios: Vec<FitScenarioRanks>,
}

/// Settings for [`fit_to_human`] beyond the factor subset.
#[derive(Debug, Clone, Copy)]
pub struct FitSettings {
    pub grid: GridResolution,
    pub epsilon: f64,
    pub bootstrap_resamples: usize,
    pub bootstrap_level: f64,
    pub seed: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            grid: GridResolution::Fine,
            epsilon: crate::attribution::DEFAULT_EPSILON,
            bootstrap_resamples: crate::attribution::DEFAULT_BOOTSTRAP_RESAMPLES,
            bootstrap_level: crate::attribution::DEFAULT_BOOTSTRAP_LEVEL,
            seed: 0,
        }
    }
}

/// Fits coefficients against human rankings over analyzed scenarios.
pub fn fit_to_human(
    analyses: &[ScenarioAnalysis],
    human: &HumanRankings,
    selection: &FactorSelection,
    settings: &FitSettings,
) -> Result<FitReport> {
    let scenario_factors: Vec<Vec<FactorVector>> = analyses
        .iter()
        .map(|a| a.statements.iter().map(|s| s.factors).collect())
        .collect();
    let human_ranks: Vec<Vec<f64>> = analyses
        .iter()
        .map(|a| {
            human
                .ranks_for(&a.scenario_id)
                .map(|r| r.to_vec())
                .ok_or_else(|| {
                    Error::HumanData(format!("no rankings for scenario `{}`", a.scenario_id))
                })
        })
        .collect::<Result<_>>()?;

    let outcome = fit(
        &scenario_factors,
        &human_ranks,
        selection,
        settings.grid,
        settings.epsilon,
    )?;

    let model_by_scenario: Vec<Vec<f64>> = scenario_factors
        .iter()
        .map(|factors| {
            pooled_model_ranks(
                std::slice::from_ref(factors),
                &outcome.coefficients,
                selection,
            )
        })
        .collect();
    let interval = crate::attribution::bootstrap_ci(
        &model_by_scenario,
        &human_ranks,
        settings.bootstrap_resamples,
        settings.bootstrap_level,
        settings.seed,
    )?;

    Ok(FitReport {
        factors_label: selection.label(),
        coefficients: outcome.coefficients,
        correlation: outcome.correlation,
        interval,
        scenarios: analyses
            .iter()
            .zip(model_by_scenario)
            .zip(human_ranks)
            .map(|((a, model), human)| FitScenarioRanks {
                scenario_id: a.scenario_id.clone(),
                model,
                human,
            })
            .collect(),
    })
}

/// Loads scenarios from a path that is either a single scenario file or a
/// manifest (recognized by its `scenarios` list).
pub fn load_inputs(path: impl AsRef<Path>) -> Result<Vec<Scenario>> {
    let path = path.as_ref();
    if let Ok(manifest) = load_manifest(path) {
        return load_scenario_set(&manifest);
    }
    Ok(vec![load_scenario(path)?])
}

/// Formats with nine significant digits, the fixed export precision.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.8e}")
}

/// Unit-exponent causal strength, the combined column exported next to
/// its three ingredients.
fn unit_causal_strength(f: &crate::attribution::FactorVector) -> f64 {
    causal_strength(
        f.normality,
        f.necessity,
        f.sufficiency,
        &CausalParams::default(),
    )
}

/// Writes the factor table: one row per statement.
///
/// Columns: `scenario_id, statement_id, statement, acc, info, info_star,
/// cnorm, cnecc, csuff, causal`.
pub fn write_factors_csv(out: impl Write, analyses: &[ScenarioAnalysis]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario_id",
        "statement_id",
        "statement",
        "acc",
        "info",
        "info_star",
        "cnorm",
        "cnecc",
        "csuff",
        "causal",
    ])?;
    for a in analyses {
        for s in &a.statements {
            w.write_record([
                a.scenario_id.as_str(),
                &s.statement_id.to_string(),
                &s.text,
                &fmt_sig(s.factors.accuracy),
                &fmt_sig(s.factors.informativity),
                &fmt_sig(s.factors.informativity_ignorant),
                &fmt_sig(s.factors.normality),
                &fmt_sig(s.factors.necessity),
                &fmt_sig(s.factors.sufficiency),
                &fmt_sig(unit_causal_strength(&s.factors)),
            ])?;
        }
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

/// Writes ranking results: one row per statement.
///
/// Columns: `scenario_id, factors, statement_id, statement, score,
/// attribute_prob, average_rank`.
pub fn write_rank_csv(
    out: impl Write,
    analyses: &[ScenarioAnalysis],
    reports: &[RankReport],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario_id",
        "factors",
        "statement_id",
        "statement",
        "score",
        "attribute_prob",
        "average_rank",
    ])?;
    for (a, r) in analyses.iter().zip(reports) {
        for (i, s) in a.statements.iter().enumerate() {
            w.write_record([
                a.scenario_id.as_str(),
                &r.factors_label,
                &s.statement_id.to_string(),
                &s.text,
                &fmt_sig(r.scores[i]),
                &fmt_sig(r.attribution[i]),
                &fmt_sig(r.ranking.average_ranks[i]),
            ])?;
        }
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

/// Writes a fit as a single flat table: one row per statement, fit-level
/// values repeated on every row.
///
/// Columns: `scenario_id, statement_id, model_rank, human_rank, factors,
/// correlation, ci_lower, ci_upper, ci_used, ci_requested, alpha_acc,
/// alpha_info, alpha_cnecc, alpha_csuff, epsilon`.
pub fn write_fit_csv(out: impl Write, report: &FitReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario_id",
        "statement_id",
        "model_rank",
        "human_rank",
        "factors",
        "correlation",
        "ci_lower",
        "ci_upper",
        "ci_used",
        "ci_requested",
        "alpha_acc",
        "alpha_info",
        "alpha_cnecc",
        "alpha_csuff",
        "epsilon",
    ])?;
    for sc in &report.scenarios {
        for (i, (model, human)) in sc.model.iter().zip(&sc.human).enumerate() {
            w.write_record([
                sc.scenario_id.as_str(),
                &(i + 1).to_string(),
                &fmt_sig(*model),
                &fmt_sig(*human),
                &report.factors_label,
                &fmt_sig(report.correlation),
                &fmt_sig(report.interval.lower),
                &fmt_sig(report.interval.upper),
                &report.interval.used.to_string(),
                &report.interval.requested.to_string(),
                &fmt_sig(report.coefficients.accuracy),
                &fmt_sig(report.coefficients.informativity),
                &fmt_sig(report.coefficients.necessity),
                &fmt_sig(report.coefficients.sufficiency),
                &fmt_sig(report.coefficients.epsilon),
            ])?;
        }
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

/// Writes the simulated trajectory: one row per view.
///
/// Columns: `scenario_id, step, action, x, y, inventory, boxes,
/// chest_taken`; `boxes` joins the per-box views with `; `.
pub fn write_simulate_csv(
    out: impl Write,
    scenario_id: &str,
    steps: &[SimulationStep],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario_id",
        "step",
        "action",
        "x",
        "y",
        "inventory",
        "boxes",
        "chest_taken",
    ])?;
    for s in steps {
        w.write_record([
            scenario_id,
            &s.step.to_string(),
            s.action.as_deref().unwrap_or(""),
            &s.agent_pos.0.to_string(),
            &s.agent_pos.1.to_string(),
            &s.inventory,
            &s.box_views.join("; "),
            if s.chest_taken { "true" } else { "false" },
        ])?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

/// Writes a brute-force cross-check report: the worst deviation per
/// quantity, one row each.
///
/// Columns: `scenario_id, quantity, statement_id, pipeline, oracle,
/// max_deviation, pass`; `statement_id` is empty for scenario-level
/// quantities.
pub fn write_oracle_csv(
    out: impl Write,
    reports: &[crate::oracle::ComparisonReport],
    tolerance: f64,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario_id",
        "quantity",
        "statement_id",
        "pipeline",
        "oracle",
        "max_deviation",
        "pass",
    ])?;
    for report in reports {
        for row in report.per_quantity_max() {
            w.write_record([
                report.scenario_id.as_str(),
                &row.quantity,
                &row.statement.map(|s| s.to_string()).unwrap_or_default(),
                &fmt_sig(row.pipeline),
                &fmt_sig(row.oracle),
                &fmt_sig(row.deviation),
                if row.deviation <= tolerance {
                    "true"
                } else {
                    "false"
                },
            ])?;
        }
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct StatementFactorsJson<'a> {
    statement_id: usize,
    statement: &'a str,
    acc: f64,
    info: f64,
    info_star: f64,
    cnorm: f64,
    cnecc: f64,
    csuff: f64,
    causal: f64,
}

#[derive(Serialize)]
struct ScenarioFactorsJson<'a> {
    scenario_id: &'a str,
    n_worlds: usize,
    n_beliefs: usize,
    prior_atoms: usize,
    surviving_atoms: usize,
    intervention_step: usize,
    statements: Vec<StatementFactorsJson<'a>>,
}

/// JSON counterpart of [`write_factors_csv`], with hypothesis-space sizes.
pub fn write_factors_json(out: impl Write, analyses: &[ScenarioAnalysis]) -> Result<()> {
    let doc: Vec<ScenarioFactorsJson> = analyses
        .iter()
        .map(|a| ScenarioFactorsJson {
            scenario_id: &a.scenario_id,
            n_worlds: a.n_worlds,
            n_beliefs: a.n_beliefs,
            prior_atoms: a.prior_atoms,
            surviving_atoms: a.surviving_atoms,
            intervention_step: a.intervention_step,
            statements: a
                .statements
                .iter()
                .map(|s| StatementFactorsJson {
                    statement_id: s.statement_id,
                    statement: &s.text,
                    acc: s.factors.accuracy,
                    info: s.factors.informativity,
                    info_star: s.factors.informativity_ignorant,
                    cnorm: s.factors.normality,
                    cnecc: s.factors.necessity,
                    csuff: s.factors.sufficiency,
                    causal: unit_causal_strength(&s.factors),
                })
                .collect(),
        })
        .collect();
    write_json(out, &doc)
}

#[derive(Serialize)]
struct RankStatementJson<'a> {
    statement_id: usize,
    statement: &'a str,
    score: f64,
    attribute_prob: f64,
    average_rank: f64,
}

#[derive(Serialize)]
struct PermutationJson {
    /// Statement ids, best rank first.
    order: Vec<usize>,
    probability: f64,
}

#[derive(Serialize)]
struct RankJson<'a> {
    scenario_id: &'a str,
    factors: &'a str,
    statements: Vec<RankStatementJson<'a>>,
    permutations: Vec<PermutationJson>,
}

/// JSON counterpart of [`write_rank_csv`], including the full permutation
/// distribution.
pub fn write_rank_json(
    out: impl Write,
    analyses: &[ScenarioAnalysis],
    reports: &[RankReport],
) -> Result<()> {
    let doc: Vec<RankJson> = analyses
        .iter()
        .zip(reports)
        .map(|(a, r)| RankJson {
            scenario_id: &a.scenario_id,
            factors: &r.factors_label,
            statements: a
                .statements
                .iter()
                .enumerate()
                .map(|(i, s)| RankStatementJson {
                    statement_id: s.statement_id,
                    statement: &s.text,
                    score: r.scores[i],
                    attribute_prob: r.attribution[i],
                    average_rank: r.ranking.average_ranks[i],
                })
                .collect(),
            permutations: r
                .ranking
                .permutations
                .iter()
                .map(|(order, p)| PermutationJson {
                    order: order.iter().map(|&i| i + 1).collect(),
                    probability: *p,
                })
                .collect(),
        })
        .collect();
    write_json(out, &doc)
}

#[derive(Serialize)]
struct FitRanksJson<'a> {
    scenario_id: &'a str,
    model_ranks: &'a [f64],
    human_ranks: &'a [f64],
}

#[derive(Serialize)]
struct FitJson<'a> {
    factors: &'a str,
    alpha_acc: f64,
    alpha_info: f64,
    alpha_cnecc: f64,
    alpha_csuff: f64,
    epsilon: f64,
    correlation: f64,
    ci_lower: f64,
    ci_upper: f64,
    ci_used: usize,
    ci_requested: usize,
    scenarios: Vec<FitRanksJson<'a>>,
}

/// JSON counterpart of [`write_fit_csv`].
pub fn write_fit_json(out: impl Write, report: &FitReport) -> Result<()> {
    let doc = FitJson {
        factors: &report.factors_label,
        alpha_acc: report.coefficients.accuracy,
        alpha_info: report.coefficients.informativity,
        alpha_cnecc: report.coefficients.necessity,
        alpha_csuff: report.coefficients.sufficiency,
        epsilon: report.coefficients.epsilon,
        correlation: report.correlation,
        ci_lower: report.interval.lower,
        ci_upper: report.interval.upper,
        ci_used: report.interval.used,
        ci_requested: report.interval.requested,
        scenarios: report
            .scenarios
            .iter()
            .map(|s| FitRanksJson {
                scenario_id: &s.scenario_id,
                model_ranks: &s.model,
                human_ranks: &s.human,
            })
            .collect(),
    };
    write_json(out, &doc)
}

#[derive(Serialize)]
struct SimulateStepJson<'a> {
    step: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    action: Option<&'a str>,
    x: usize,
    y: usize,
    inventory: &'a str,
    boxes: &'a [String],
    chest_taken: bool,
}

#[derive(Serialize)]
struct SimulateJson<'a> {
    scenario_id: &'a str,
    steps: Vec<SimulateStepJson<'a>>,
}

/// JSON counterpart of [`write_simulate_csv`].
pub fn write_simulate_json(
    out: impl Write,
    scenario_id: &str,
    steps: &[SimulationStep],
) -> Result<()> {
    let doc = SimulateJson {
        scenario_id,
        steps: steps
            .iter()
            .map(|s| SimulateStepJson {
                step: s.step,
                action: s.action.as_deref(),
                x: s.agent_pos.0,
                y: s.agent_pos.1,
                inventory: &s.inventory,
                boxes: &s.box_views,
                chest_taken: s.chest_taken,
            })
            .collect(),
    };
    write_json(out, &doc)
}

#[derive(Serialize)]
struct OracleQuantityJson<'a> {
    quantity: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    statement_id: Option<usize>,
    pipeline: f64,
    oracle: f64,
    max_deviation: f64,
    pass: bool,
}

#[derive(Serialize)]
struct OracleJson<'a> {
    scenario_id: &'a str,
    prior_atoms: usize,
    tolerance: f64,
    max_deviation: f64,
    pass: bool,
    quantities: Vec<OracleQuantityJson<'a>>,
}

/// JSON counterpart of [`write_oracle_csv`].
pub fn write_oracle_json(
    out: impl Write,
    reports: &[crate::oracle::ComparisonReport],
    tolerance: f64,
) -> Result<()> {
    let doc: Vec<OracleJson> = reports
        .iter()
        .map(|report| OracleJson {
            scenario_id: &report.scenario_id,
            prior_atoms: report.prior_atoms,
            tolerance,
            max_deviation: report.max_deviation,
            pass: report.passes(tolerance),
            quantities: report
                .per_quantity_max()
                .into_iter()
                .map(|row| OracleQuantityJson {
                    quantity: &row.quantity,
                    statement_id: row.statement,
                    pipeline: row.pipeline,
                    oracle: row.oracle,
                    max_deviation: row.deviation,
                    pass: row.deviation <= tolerance,
                })
                .collect(),
        })
        .collect();
    write_json(out, &doc)
}

fn write_json(mut out: impl Write, doc: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, doc)?;
    out.write_all(b"\n").map_err(Error::from)
}
