//! From factor values to statement rankings and coefficient fits.
//!
//! Each statement gets a scalar score: a weighted sum of log accuracy, the
//! listener informativity (already in log space), and the two log causal
//! composites. Scores feed a sequential-choice (Plackett-Luce) ranking
//! model: the best-ranked statement is drawn softmax-first, removed, and
//! the process repeats, giving a full distribution over orderings and an
//! expected rank per statement.
//!
//! Coefficients are fit to human average ranks by exhaustive grid search
//! maximizing the Pearson correlation between model and human ranks pooled
//! over scenarios, with a coarse pass over `[0, 10]` and an optional fine
//! refinement around the winner. Confidence intervals come from a seeded
//! scenario-level bootstrap.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;

/// The per-statement factor values produced by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorVector {
    pub accuracy: f64,
    /// Informativity for the environment-watching listener.
    pub informativity: f64,
    /// Informativity for the fully ignorant listener.
    pub informativity_ignorant: f64,
    pub normality: f64,
    pub necessity: f64,
    pub sufficiency: f64,
}

/// Score weights. `epsilon` floors the log arguments so impossible factor
/// values stay finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub accuracy: f64,
    pub informativity: f64,
    pub necessity: f64,
    pub sufficiency: f64,
    pub epsilon: f64,
}

pub const DEFAULT_EPSILON: f64 = 1e-6;

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients {
            accuracy: 1.0,
            informativity: 1.0,
            necessity: 1.0,
            sufficiency: 1.0,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Which factors contribute to the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorSelection {
    pub accuracy: bool,
    pub informativity: bool,
    /// Use the ignorant listener's informativity instead of the watching
    /// listener's.
    pub ignorant_listener: bool,
    pub necessity: bool,
    pub sufficiency: bool,
}

impl Default for FactorSelection {
    fn default() -> Self {
        FactorSelection {
            accuracy: true,
            informativity: true,
            ignorant_listener: false,
            necessity: true,
            sufficiency: true,
        }
    }
}

impl FactorSelection {
    /// Parses a comma-separated factor list: `acc`, `info`, `info*`
    /// (ignorant listener), and `causal` (necessity + sufficiency).
    pub fn parse(text: &str) -> Result<FactorSelection> {
        let mut sel = FactorSelection {
            accuracy: false,
            informativity: false,
            ignorant_listener: false,
            necessity: false,
            sufficiency: false,
        };
        for raw in text.split(',') {
            let token = raw.trim();
            match token.to_ascii_lowercase().as_str() {
                "" => continue,
                "acc" | "accuracy" => sel.accuracy = true,
                "info" => {
                    if sel.ignorant_listener {
                        return Err(Error::InvalidArgument(
                            "`info` and `info*` are mutually exclusive".into(),
                        ));
                    }
                    sel.informativity = true;
                }
                "info*" => {
                    if sel.informativity && !sel.ignorant_listener {
                        return Err(Error::InvalidArgument(
                            "`info` and `info*` are mutually exclusive".into(),
                        ));
                    }
                    sel.informativity = true;
                    sel.ignorant_listener = true;
                }
                "causal" => {
                    sel.necessity = true;
                    sel.sufficiency = true;
                }
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown factor `{other}` (expected acc, info, info*, or causal)"
                    )));
                }
            }
        }
        if !(sel.accuracy || sel.informativity || sel.necessity || sel.sufficiency) {
            return Err(Error::InvalidArgument("no factors selected".into()));
        }
        Ok(sel)
    }

    /// A canonical label like `acc+info+causal`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.accuracy {
            parts.push("acc");
        }
        if self.informativity {
            parts.push(if self.ignorant_listener { "info*" } else { "info" });
        }
        if self.necessity && self.sufficiency {
            parts.push("causal");
        } else {
            if self.necessity {
                parts.push("cnecc");
            }
            if self.sufficiency {
                parts.push("csuff");
            }
        }
        parts.join("+")
    }
}

/// The scalar score of one statement.
pub fn score(factors: &FactorVector, coeffs: &Coefficients, selection: &FactorSelection) -> f64 {
    let eps = coeffs.epsilon;
    let mut total = 0.0;
    if selection.accuracy {
        total += coeffs.accuracy * factors.accuracy.max(eps).ln();
    }
    if selection.informativity {
        let info = if selection.ignorant_listener {
            factors.informativity_ignorant
        } else {
            factors.informativity
        };
        total += coeffs.informativity * info;
    }
    if selection.necessity {
        let necessity_part = (1.0 - factors.normality).max(0.0) * factors.necessity;
        total += coeffs.necessity * necessity_part.max(eps).ln();
    }
    if selection.sufficiency {
        let sufficiency_part = factors.normality * factors.sufficiency;
        total += coeffs.sufficiency * sufficiency_part.max(eps).ln();
    }
    total
}

/// Softmax over scores: the probability of naming each statement as *the*
/// explanation. Max-shifted, so widely spread scores stay finite.
pub fn attribute_probabilities(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// A full ranking distribution over statements.
#[derive(Debug, Clone)]
pub struct RankResult {
    /// Each ordering (statement indices, best first) with its probability,
    /// in lexicographic order of the ordering.
    pub permutations: Vec<(Vec<usize>, f64)>,
    /// Expected 1-based rank per statement.
    pub average_ranks: Vec<f64>,
}

/// Expected 1-based rank of each statement under the sequential-choice
/// model.
///
/// Uses the choice axiom's pairwise marginal -- the probability that `j`
/// precedes `i` is `s_j / (s_i + s_j)` -- so expected ranks come out in
/// closed form without enumerating orderings:
/// `E[rank_i] = 1 + sum over j != i of s_j / (s_i + s_j)`.
pub fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let strengths: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    strengths
        .iter()
        .map(|&si| {
            // Start from 0.5 so the i == j term (always exactly 1/2)
            // cancels against the +1 without a branch in the loop.
            let mut rank = 0.5;
            for &sj in &strengths {
                rank += sj / (si + sj);
            }
            rank
        })
        .collect()
}

/// Plackett-Luce ranking distribution: statements are chosen best-first by
/// repeated softmax without replacement.
pub fn ranking_distribution(scores: &[f64]) -> RankResult {
    let n = scores.len();
    assert!((1..=8).contains(&n), "rankings are enumerated exhaustively");
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let strengths: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();

    let mut permutations = Vec::new();
    let mut ordering: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    enumerate_orderings(&strengths, &mut ordering, &mut used, 1.0, &mut permutations);

    RankResult {
        permutations,
        average_ranks: average_ranks(scores),
    }
}

fn enumerate_orderings(
    strengths: &[f64],
    ordering: &mut Vec<usize>,
    used: &mut Vec<bool>,
    prob_so_far: f64,
    out: &mut Vec<(Vec<usize>, f64)>,
) {
    if ordering.len() == strengths.len() {
        out.push((ordering.clone(), prob_so_far));
        return;
    }
    let remaining: f64 = strengths
        .iter()
        .enumerate()
        .filter(|&(i, _)| !used[i])
        .map(|(_, &s)| s)
        .sum();
    for i in 0..strengths.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        ordering.push(i);
        enumerate_orderings(
            strengths,
            ordering,
            used,
            prob_so_far * strengths[i] / remaining,
            out,
        );
        ordering.pop();
        used[i] = false;
    }
}

/// Pearson correlation. Errors on mismatched lengths, fewer than two
/// points, or zero variance in either input.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "correlation inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        cov += (a - mean_x) * (b - mean_y);
        var_x += (a - mean_x) * (a - mean_x);
        var_y += (b - mean_y) * (b - mean_y);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::DegenerateCorrelation(
            "an input has zero variance".into(),
        ));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Which grid-search schedule to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridResolution {
    /// Coarse pass only: step 0.2 over `[0, 10]` per active coefficient.
    Coarse,
    /// Coarse pass, then step 0.02 within ±0.2 of the coarse winner.
    Fine,
}

impl std::str::FromStr for GridResolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coarse" => Ok(GridResolution::Coarse),
            "fine" => Ok(GridResolution::Fine),
            other => Err(Error::InvalidArgument(format!(
                "unknown grid resolution `{other}` (expected coarse or fine)"
            ))),
        }
    }
}

/// The result of a coefficient fit.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub coefficients: Coefficients,
    pub correlation: f64,
    /// Model average ranks pooled over scenarios at the fitted
    /// coefficients, aligned with the pooled human ranks.
    pub model_ranks: Vec<f64>,
}

const COARSE_STEP: f64 = 0.2;
const COARSE_MAX: f64 = 10.0;
const FINE_STEP: f64 = 0.02;
const FINE_WINDOW: f64 = 0.2;

// Candidate ordering: higher correlation wins; exact ties go to the
// lexicographically smallest coefficient vector, making the search result
// independent of evaluation order.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    correlation: f64,
    coeffs: [f64; 4],
}

fn candidate_better(a: &Candidate, b: &Candidate) -> bool {
    if a.correlation != b.correlation {
        return a.correlation > b.correlation;
    }
    a.coeffs < b.coeffs
}

fn active_dims(selection: &FactorSelection) -> Vec<usize> {
    let mut dims = Vec::new();
    if selection.accuracy {
        dims.push(0);
    }
    if selection.informativity {
        dims.push(1);
    }
    if selection.necessity {
        dims.push(2);
    }
    if selection.sufficiency {
        dims.push(3);
    }
    dims
}

fn coefficients_from_array(values: [f64; 4], epsilon: f64) -> Coefficients {
    Coefficients {
        accuracy: values[0],
        informativity: values[1],
        necessity: values[2],
        sufficiency: values[3],
        epsilon,
    }
}

/// Model average ranks for every scenario at the given coefficients,
/// pooled into one vector (scenario-major, statement-minor).
pub fn pooled_model_ranks(
    scenario_factors: &[Vec<FactorVector>],
    coeffs: &Coefficients,
    selection: &FactorSelection,
) -> Vec<f64> {
    let mut pooled = Vec::new();
    for factors in scenario_factors {
        let scores: Vec<f64> = factors.iter().map(|f| score(f, coeffs, selection)).collect();
        pooled.extend(average_ranks(&scores));
    }
    pooled
}

/// Fits the active coefficients to human average ranks by grid search.
///
/// `scenario_factors[i]` and `human_ranks[i]` describe scenario `i`'s
/// statements in the same order. Grid cells where the correlation is
/// undefined are skipped; if every cell is undefined the human data (or
/// the model) is degenerate and an error is returned.
pub fn fit(
    scenario_factors: &[Vec<FactorVector>],
    human_ranks: &[Vec<f64>],
    selection: &FactorSelection,
    grid: GridResolution,
    epsilon: f64,
) -> Result<FitOutcome> {
    if scenario_factors.len() != human_ranks.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scenarios of factors but {} of human ranks",
            scenario_factors.len(),
            human_ranks.len()
        )));
    }
    if scenario_factors.is_empty() {
        return Err(Error::InvalidArgument("no scenarios to fit".into()));
    }
    for (factors, ranks) in scenario_factors.iter().zip(human_ranks) {
        if factors.len() != ranks.len() {
            return Err(Error::InvalidArgument(
                "statement counts differ between factors and human ranks".into(),
            ));
        }
    }
    let pooled_human: Vec<f64> = human_ranks.iter().flatten().copied().collect();

    // Precompute each statement's per-factor log contributions so a grid
    // cell's scores are dot products.
    let log_terms: Vec<Vec<[f64; 4]>> = scenario_factors
        .iter()
        .map(|factors| {
            factors
                .iter()
                .map(|f| {
                    let info = if selection.ignorant_listener {
                        f.informativity_ignorant
                    } else {
                        f.informativity
                    };
                    [
                        f.accuracy.max(epsilon).ln(),
                        info,
                        ((1.0 - f.normality).max(0.0) * f.necessity).max(epsilon).ln(),
                        (f.normality * f.sufficiency).max(epsilon).ln(),
                    ]
                })
                .collect()
        })
        .collect();

    // The grid has millions of cells and this host may be a single core,
    // so the per-cell evaluation stays allocation-free: fixed-size stack
    // buffers hold each scenario's scores and strengths.
    const MAX_STATEMENTS: usize = 8;
    if log_terms.iter().any(|t| t.len() > MAX_STATEMENTS) {
        return Err(Error::InvalidArgument(format!(
            "fitting supports at most {MAX_STATEMENTS} statements per scenario"
        )));
    }

    let dims = active_dims(selection);
    let evaluate = |coeffs: [f64; 4]| -> Option<Candidate> {
        let mut pooled_model = Vec::with_capacity(pooled_human.len());
        let mut strengths = [0.0f64; MAX_STATEMENTS];
        for terms in &log_terms {
            let k = terms.len();
            let mut max_score = f64::NEG_INFINITY;
            for (slot, t) in strengths.iter_mut().zip(terms) {
                let s: f64 = dims.iter().map(|&d| coeffs[d] * t[d]).sum();
                *slot = s;
                max_score = max_score.max(s);
            }
            for slot in strengths.iter_mut().take(k) {
                *slot = (*slot - max_score).exp();
            }
            for i in 0..k {
                let mut rank = 0.5; // 1 + (own pair term 0.5 subtracted)
                for j in 0..k {
                    rank += strengths[j] / (strengths[i] + strengths[j]);
                }
                pooled_model.push(rank);
            }
        }
        pearson(&pooled_model, &pooled_human)
            .ok()
            .map(|correlation| Candidate {
                correlation,
                coeffs,
            })
    };

    let coarse_axis: Vec<f64> = (0..=((COARSE_MAX / COARSE_STEP).round() as usize))
        .map(|i| i as f64 * COARSE_STEP)
        .collect();
    let best = search_grid(&dims, &coarse_axis_per_dim(&dims, &coarse_axis), &evaluate)
        .ok_or_else(|| {
            Error::DegenerateCorrelation(
                "correlation is undefined at every grid cell; ranks have no variance".into(),
            )
        })?;

    let best = if grid == GridResolution::Fine {
        let fine_axes: Vec<Vec<f64>> = dims
            .iter()
            .map(|&d| {
                let center = best.coeffs[d];
                let lo = (center - FINE_WINDOW).max(0.0);
                let hi = (center + FINE_WINDOW).min(COARSE_MAX);
                let steps = ((hi - lo) / FINE_STEP).round() as usize;
                (0..=steps).map(|i| lo + i as f64 * FINE_STEP).collect()
            })
            .collect();
        search_grid(&dims, &fine_axes, &evaluate).unwrap_or(best)
    } else {
        best
    };

    let coefficients = coefficients_from_array(best.coeffs, epsilon);
    let model_ranks = pooled_model_ranks(scenario_factors, &coefficients, selection);
    Ok(FitOutcome {
        coefficients,
        correlation: best.correlation,
        model_ranks,
    })
}

fn coarse_axis_per_dim(dims: &[usize], axis: &[f64]) -> Vec<Vec<f64>> {
    dims.iter().map(|_| axis.to_vec()).collect()
}

/// Exhaustively evaluates the cross product of per-dimension axes,
/// returning the best defined candidate.
fn search_grid(
    dims: &[usize],
    axes: &[Vec<f64>],
    evaluate: &(impl Fn([f64; 4]) -> Option<Candidate> + Sync),
) -> Option<Candidate> {
    let total: usize = axes.iter().map(|a| a.len()).product();
    exec::fold_best(
        total,
        |cell| {
            let mut coeffs = [0.0; 4];
            let mut rest = cell;
            for (axis, &dim) in axes.iter().zip(dims) {
                coeffs[dim] = axis[rest % axis.len()];
                rest /= axis.len();
            }
            evaluate(coeffs)
        },
        candidate_better,
    )
}

/// A percentile bootstrap interval for the model-human correlation.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapInterval {
    pub lower: f64,
    pub upper: f64,
    /// Resamples where the correlation was defined.
    pub used: usize,
    pub requested: usize,
}

impl BootstrapInterval {
    /// True when some resamples had to be dropped (e.g. near-constant
    /// ranks), so the interval is built on fewer samples than requested.
    pub fn is_degenerate(&self) -> bool {
        self.used < self.requested
    }
}

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;
pub const DEFAULT_BOOTSTRAP_LEVEL: f64 = 0.95;

/// Scenario-level percentile bootstrap of the pooled correlation between
/// model and human average ranks. Deterministic for a fixed seed.
pub fn bootstrap_ci(
    model_ranks: &[Vec<f64>],
    human_ranks: &[Vec<f64>],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapInterval> {
    if model_ranks.len() != human_ranks.len() || model_ranks.is_empty() {
        return Err(Error::InvalidArgument(
            "bootstrap needs matching, nonempty per-scenario rank lists".into(),
        ));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let n = model_ranks.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut correlations = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut model = Vec::new();
        let mut human = Vec::new();
        for _ in 0..n {
            let pick = rng.gen_range(0..n);
            model.extend_from_slice(&model_ranks[pick]);
            human.extend_from_slice(&human_ranks[pick]);
        }
        if let Ok(r) = pearson(&model, &human) {
            correlations.push(r);
        }
    }
    if correlations.is_empty() {
        return Err(Error::DegenerateCorrelation(
            "no bootstrap resample had a defined correlation".into(),
        ));
    }
    correlations.sort_by(|a, b| a.partial_cmp(b).expect("correlations are finite"));
    let used = correlations.len();
    let quantile = |p: f64| -> f64 {
        let idx = ((used - 1) as f64 * p).round() as usize;
        correlations[idx]
    };
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapInterval {
        lower: quantile(tail),
        upper: quantile(1.0 - tail),
        used,
        requested: resamples,
    })
}
