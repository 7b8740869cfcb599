//! Scenario files, scenario-set manifests, and human ranking data.
//!
//! A scenario is one TOML file bundling a map, the hidden-key setup, the
//! agent's observed trajectory, and the three belief statements to rank.
//! Loading validates everything up front -- the map parses, the true key
//! placement is one of the candidate worlds, the trajectory is legal step
//! by step, and every statement parses and refers to boxes that exist --
//! so downstream code never sees a half-formed scenario.
//!
//! ```toml
//! id = "corridor-peek"
//! map = """
//! #######
//! #P.B..#
//! #.....#
//! #..B.C#
//! #######
//! """
//! hidden_keys = ["red"]
//! true_contents = { box1 = "red" }
//! goal = "chest"
//! trajectory = ["E", "E", "open"]
//! statements = [
//!   "believes(player, inside(red, box1))",
//!   "believes(player, empty(box2))",
//!   "knows(player, exists K. iscolor(K, red))",
//! ]
//! [params]
//! beta = 1.0
//! [thresholds]
//! certain = 0.99
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::elot::{self, EpistemicFormula, ModalThresholds};
use crate::error::{Error, Result};
use crate::grid::{self, Action, GridMap, KeyColor, WorldState};
use crate::planner::PolicyParams;

/// Every scenario ranks exactly this many statements.
pub const STATEMENT_COUNT: usize = 3;

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub map: GridMap,
    /// Colors of the keys hidden in boxes (the observer's uncertainty).
    pub hidden_keys: Vec<KeyColor>,
    /// The actual initial world: where the hidden keys really are.
    pub true_world: WorldState,
    pub trajectory: Vec<Action>,
    pub statements: Vec<EpistemicFormula>,
    /// The statement source texts, for reports.
    pub statement_texts: Vec<String>,
    pub params: PolicyParams,
    pub thresholds: ModalThresholds,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    id: String,
    map: String,
    #[serde(default)]
    hidden_keys: Vec<String>,
    #[serde(default)]
    true_contents: BTreeMap<String, String>,
    #[serde(default = "default_goal")]
    goal: String,
    trajectory: Vec<String>,
    statements: Vec<String>,
    #[serde(default)]
    params: RawParams,
    #[serde(default)]
    thresholds: RawThresholds,
}

fn default_goal() -> String {
    "chest".to_string()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    beta: Option<f64>,
    unreachable_penalty: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThresholds {
    believes: Option<f64>,
    knows: Option<f64>,
    certain: Option<f64>,
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Scenario(format!("cannot read {}: {e}", path.display()))
    })?;
    parse_scenario(&text)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))
}

/// Parses and validates scenario TOML text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text)?;
    validate(raw)
}

fn parse_box_name(name: &str, n_boxes: usize) -> Result<usize> {
    let unknown = || Error::UnknownBox {
        name: name.to_string(),
        count: n_boxes,
    };
    let digits = name.strip_prefix("box").ok_or_else(unknown)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(unknown());
    }
    let number: usize = digits.parse().map_err(|_| unknown())?;
    if number == 0 || number > n_boxes {
        return Err(unknown());
    }
    Ok(number - 1)
}

fn validate(raw: RawScenario) -> Result<Scenario> {
    if raw.id.trim().is_empty() {
        return Err(Error::Scenario("id: must be nonempty".into()));
    }
    let map = grid::parse_map(&raw.map)?;

    if raw.goal != "chest" {
        return Err(Error::Scenario(format!(
            "goal: `{}` is not supported (only `chest`)",
            raw.goal
        )));
    }

    let mut hidden_keys = Vec::with_capacity(raw.hidden_keys.len());
    for (i, color) in raw.hidden_keys.iter().enumerate() {
        let parsed: KeyColor = color
            .parse()
            .map_err(|e| Error::Scenario(format!("hidden_keys[{i}]: {e}")))?;
        hidden_keys.push(parsed);
    }

    // The true placement must assign exactly the declared hidden keys to
    // distinct existing boxes.
    let mut contents: Vec<Option<KeyColor>> = vec![None; map.boxes.len()];
    for (box_name, color) in &raw.true_contents {
        let index = parse_box_name(box_name, map.boxes.len())
            .map_err(|e| Error::Scenario(format!("true_contents: {e}")))?;
        let parsed: KeyColor = color
            .parse()
            .map_err(|e| Error::Scenario(format!("true_contents.{box_name}: {e}")))?;
        if contents[index].is_some() {
            return Err(Error::Scenario(format!(
                "true_contents: {box_name} assigned twice"
            )));
        }
        contents[index] = Some(parsed);
    }
    let mut placed: Vec<KeyColor> = contents.iter().filter_map(|c| *c).collect();
    let mut declared = hidden_keys.clone();
    placed.sort();
    declared.sort();
    if placed != declared {
        return Err(Error::Scenario(format!(
            "true_contents: placed keys [{}] do not match hidden_keys [{}]",
            placed.iter().map(|c| c.name()).collect::<Vec<_>>().join(", "),
            declared.iter().map(|c| c.name()).collect::<Vec<_>>().join(", "),
        )));
    }

    // The true world must be one of the candidate worlds the observer
    // entertains (in particular, the chest must be winnable from it).
    let candidates = grid::enumerate_initial_states(&map, &hidden_keys)?;
    let true_world = map.initial_state(contents)?;
    if !candidates.contains(&true_world) {
        return Err(Error::Scenario(
            "true_contents: the chest cannot be reached from this placement".into(),
        ));
    }

    let mut trajectory = Vec::with_capacity(raw.trajectory.len());
    for (i, name) in raw.trajectory.iter().enumerate() {
        let action: Action = name
            .parse()
            .map_err(|e| Error::Scenario(format!("trajectory[{i}]: {e}")))?;
        trajectory.push(action);
    }
    if trajectory.is_empty() {
        return Err(Error::Scenario("trajectory: must be nonempty".into()));
    }
    // Walk the trajectory in the true world; any inapplicable action is
    // reported with its (1-based) step.
    let mut state = true_world.clone();
    for (i, &action) in trajectory.iter().enumerate() {
        state = grid::transition(&map, &state, action).map_err(|e| {
            Error::Scenario(format!("trajectory step {}: {e}", i + 1))
        })?;
    }

    if raw.statements.len() != STATEMENT_COUNT {
        return Err(Error::Scenario(format!(
            "statements: expected exactly {STATEMENT_COUNT}, got {}",
            raw.statements.len()
        )));
    }
    let mut statements = Vec::with_capacity(STATEMENT_COUNT);
    for (i, text) in raw.statements.iter().enumerate() {
        let formula = elot::parse(text)
            .map_err(|e| Error::Scenario(format!("statements[{i}]: {e}")))?;
        elot::validate_against_map(&formula, &map)
            .map_err(|e| Error::Scenario(format!("statements[{i}]: {e}")))?;
        statements.push(formula);
    }

    let defaults = PolicyParams::default();
    let params = PolicyParams {
        beta: raw.params.beta.unwrap_or(defaults.beta),
        unreachable_penalty: raw
            .params
            .unreachable_penalty
            .unwrap_or(defaults.unreachable_penalty),
    };
    if !(params.beta >= 0.0 && params.beta.is_finite()) {
        return Err(Error::Scenario(format!(
            "params.beta: must be finite and non-negative, got {}",
            params.beta
        )));
    }
    if !(params.unreachable_penalty > 0.0 && params.unreachable_penalty.is_finite()) {
        return Err(Error::Scenario(format!(
            "params.unreachable_penalty: must be finite and positive, got {}",
            params.unreachable_penalty
        )));
    }

    let default_thresholds = ModalThresholds::default();
    let thresholds = ModalThresholds {
        believes: raw.thresholds.believes.unwrap_or(default_thresholds.believes),
        knows: raw.thresholds.knows.unwrap_or(default_thresholds.knows),
        certain: raw.thresholds.certain.unwrap_or(default_thresholds.certain),
    };
    thresholds
        .validate()
        .map_err(|e| Error::Scenario(format!("thresholds: {e}")))?;

    Ok(Scenario {
        id: raw.id,
        map,
        hidden_keys,
        true_world,
        trajectory,
        statements,
        statement_texts: raw.statements,
        params,
        thresholds,
    })
}

/// An ordered scenario set, as listed in a manifest file.
#[derive(Debug, Clone)]
pub struct Manifest {
    /// Scenario file paths, resolved relative to the manifest's directory.
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    scenarios: Vec<String>,
}

/// Loads a manifest: a TOML file with a `scenarios` list of file paths,
/// relative paths taken from the manifest's own directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Scenario(format!("cannot read {}: {e}", path.display()))
    })?;
    let raw: RawManifest = toml::from_str(&text)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    if raw.scenarios.is_empty() {
        return Err(Error::Scenario(format!(
            "{}: scenarios list is empty",
            path.display()
        )));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(Manifest {
        paths: raw.scenarios.iter().map(|p| base.join(p)).collect(),
    })
}

/// Loads every scenario in a manifest, requiring distinct ids.
pub fn load_scenario_set(manifest: &Manifest) -> Result<Vec<Scenario>> {
    let mut scenarios = Vec::with_capacity(manifest.paths.len());
    let mut seen = std::collections::BTreeSet::new();
    for path in &manifest.paths {
        let scenario = load_scenario(path)?;
        if !seen.insert(scenario.id.clone()) {
            return Err(Error::Scenario(format!(
                "duplicate scenario id `{}` in manifest",
                scenario.id
            )));
        }
        scenarios.push(scenario);
    }
    Ok(scenarios)
}

/// Average human rank per statement, by scenario id.
#[derive(Debug, Clone, Default)]
pub struct HumanRankings {
    by_scenario: BTreeMap<String, [f64; STATEMENT_COUNT]>,
}

impl HumanRankings {
    pub fn ranks_for(&self, scenario_id: &str) -> Option<&[f64; STATEMENT_COUNT]> {
        self.by_scenario.get(scenario_id)
    }

    pub fn scenario_ids(&self) -> impl Iterator<Item = &str> {
        self.by_scenario.keys().map(|s| s.as_str())
    }

    /// Average ranks in scenario order, erroring on scenarios without data.
    pub fn aligned_with(&self, scenarios: &[Scenario]) -> Result<Vec<Vec<f64>>> {
        scenarios
            .iter()
            .map(|s| {
                self.ranks_for(&s.id)
                    .map(|ranks| ranks.to_vec())
                    .ok_or_else(|| {
                        Error::HumanData(format!("no rankings for scenario `{}`", s.id))
                    })
            })
            .collect()
    }
}

#[derive(Debug, Deserialize)]
struct RankRow {
    scenario_id: String,
    participant_id: String,
    statement_id: usize,
    rank: usize,
}

/// Loads human ranking data from CSV with columns
/// `scenario_id, participant_id, statement_id, rank`.
///
/// Each participant must rank each scenario's three statements exactly
/// once, using ranks 1..=3 exactly once (1 = most likely attribution).
/// The result is the mean rank per statement.
pub fn load_human_rankings(path: impl AsRef<Path>) -> Result<HumanRankings> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::HumanData(format!("cannot read {}: {e}", path.display())))?;
    // (scenario, participant) -> rank given to each statement
    let mut per_pair: BTreeMap<(String, String), [Option<usize>; STATEMENT_COUNT]> =
        BTreeMap::new();
    for (i, row) in reader.deserialize::<RankRow>().enumerate() {
        let row = row.map_err(|e| Error::HumanData(format!("row {}: {e}", i + 2)))?;
        if !(1..=STATEMENT_COUNT).contains(&row.statement_id) {
            return Err(Error::HumanData(format!(
                "row {}: statement_id {} out of range 1..={STATEMENT_COUNT}",
                i + 2,
                row.statement_id
            )));
        }
        if !(1..=STATEMENT_COUNT).contains(&row.rank) {
            return Err(Error::HumanData(format!(
                "row {}: rank {} out of range 1..={STATEMENT_COUNT}",
                i + 2,
                row.rank
            )));
        }
        let slot = &mut per_pair
            .entry((row.scenario_id, row.participant_id))
            .or_default()[row.statement_id - 1];
        if slot.is_some() {
            return Err(Error::HumanData(format!(
                "row {}: duplicate statement_id {}",
                i + 2,
                row.statement_id
            )));
        }
        *slot = Some(row.rank);
    }
    if per_pair.is_empty() {
        return Err(Error::HumanData("no ranking rows".into()));
    }

    let mut sums: BTreeMap<String, ([f64; STATEMENT_COUNT], usize)> = BTreeMap::new();
    for ((scenario, participant), ranks) in per_pair {
        let mut seen = [false; STATEMENT_COUNT];
        let mut resolved = [0usize; STATEMENT_COUNT];
        for (statement, rank) in ranks.iter().enumerate() {
            let rank = rank.ok_or_else(|| {
                Error::HumanData(format!(
                    "participant `{participant}` did not rank statement {} of `{scenario}`",
                    statement + 1
                ))
            })?;
            if seen[rank - 1] {
                return Err(Error::HumanData(format!(
                    "participant `{participant}` used rank {rank} twice in `{scenario}`"
                )));
            }
            seen[rank - 1] = true;
            resolved[statement] = rank;
        }
        let entry = sums.entry(scenario).or_default();
        for (total, rank) in entry.0.iter_mut().zip(resolved) {
            *total += rank as f64;
        }
        entry.1 += 1;
    }

    let by_scenario = sums
        .into_iter()
        .map(|(scenario, (totals, n))| {
            (scenario, totals.map(|t| t / n as f64))
        })
        .collect();
    Ok(HumanRankings { by_scenario })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    const MAP: &str = "#######\n#P.B..#\n#.....#\n#..B.C#\n#######\n";

    fn scenario_text() -> String {
        format!(
            r#"
id = "corridor-peek"
map = """
{MAP}"""
hidden_keys = ["red"]
true_contents = {{ box1 = "red" }}
trajectory = ["E", "E", "open"]
statements = [
  "believes(player, inside(red, box1))",
  "believes(player, empty(box2))",
  "knows(player, exists K. iscolor(K, red))",
]
"#
        )
    }

    #[test]
    fn valid_scenario_loads() {
        let sc = parse_scenario(&scenario_text()).unwrap();
        assert_eq!(sc.id, "corridor-peek");
        assert_eq!(sc.hidden_keys, vec![KeyColor::Red]);
        assert_eq!(sc.trajectory.len(), 3);
        assert_eq!(sc.statements.len(), 3);
        assert_eq!(sc.true_world.box_contents, vec![Some(KeyColor::Red), None]);
        assert_eq!(sc.params.beta, 1.0);
        assert_eq!(sc.thresholds.certain, 0.99);
    }

    #[test]
    fn file_roundtrip_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let sc_path = dir.path().join("one.toml");
        std::fs::write(&sc_path, scenario_text()).unwrap();
        let manifest_path = dir.path().join("set.toml");
        std::fs::write(&manifest_path, "scenarios = [\"one.toml\"]\n").unwrap();

        let manifest = load_manifest(&manifest_path).unwrap();
        assert_eq!(manifest.paths, vec![sc_path]);
        let set = load_scenario_set(&manifest).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set[0].id, "corridor-peek");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.toml"), scenario_text()).unwrap();
        std::fs::write(dir.path().join("b.toml"), scenario_text()).unwrap();
        std::fs::write(
            dir.path().join("set.toml"),
            "scenarios = [\"a.toml\", \"b.toml\"]\n",
        )
        .unwrap();
        let manifest = load_manifest(dir.path().join("set.toml")).unwrap();
        let err = load_scenario_set(&manifest).unwrap_err();
        assert!(err.to_string().contains("duplicate scenario id"));
    }

    #[test]
    fn illegal_trajectory_names_step() {
        let text = scenario_text().replace(
            r#"trajectory = ["E", "E", "open"]"#,
            r#"trajectory = ["E", "open"]"#,
        );
        let err = parse_scenario(&text).unwrap_err();
        assert!(
            err.to_string().contains("trajectory step 2"),
            "got: {err}"
        );
    }

    #[test]
    fn wrong_statement_count_rejected() {
        let text = scenario_text().replace(
            "  \"knows(player, exists K. iscolor(K, red))\",\n",
            "",
        );
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("expected exactly 3"), "got: {err}");
    }

    #[test]
    fn contents_must_match_hidden_keys() {
        let text = scenario_text().replace("box1 = \"red\"", "box1 = \"blue\"");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("do not match hidden_keys"), "got: {err}");

        let text = scenario_text().replace(
            "true_contents = { box1 = \"red\" }",
            "true_contents = { box7 = \"red\" }",
        );
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("box7"), "got: {err}");
    }

    #[test]
    fn statements_are_validated_against_the_map() {
        let text = scenario_text().replace("empty(box2)", "empty(box9)");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("statements[1]"), "got: {err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = format!("{}\nextra_field = 3\n", scenario_text());
        assert!(parse_scenario(&text).is_err());
    }

    #[test]
    fn param_overrides_apply() {
        let text = format!(
            "{}\n[params]\nbeta = 2.5\n[thresholds]\ncertain = 0.9\n",
            scenario_text()
        );
        let sc = parse_scenario(&text).unwrap();
        assert_eq!(sc.params.beta, 2.5);
        assert_eq!(sc.thresholds.certain, 0.9);
        assert_eq!(sc.thresholds.believes, 0.5);
    }

    fn write_csv(rows: &[(&str, &str, usize, usize)]) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "scenario_id,participant_id,statement_id,rank").unwrap();
        for (sc, p, st, r) in rows {
            writeln!(file, "{sc},{p},{st},{r}").unwrap();
        }
        file.flush().unwrap();
        file
    }

    #[test]
    fn human_rankings_average_over_participants() {
        let file = write_csv(&[
            ("s1", "p1", 1, 1),
            ("s1", "p1", 2, 2),
            ("s1", "p1", 3, 3),
            ("s1", "p2", 1, 2),
            ("s1", "p2", 2, 1),
            ("s1", "p2", 3, 3),
        ]);
        let data = load_human_rankings(file.path()).unwrap();
        let ranks = data.ranks_for("s1").unwrap();
        assert_eq!(ranks, &[1.5, 1.5, 3.0]);
        assert!(data.ranks_for("s2").is_none());
    }

    #[test]
    fn incomplete_or_invalid_rankings_rejected() {
        let missing = write_csv(&[("s1", "p1", 1, 1), ("s1", "p1", 2, 2)]);
        let err = load_human_rankings(missing.path()).unwrap_err();
        assert!(err.to_string().contains("did not rank"), "got: {err}");

        let repeated_rank = write_csv(&[
            ("s1", "p1", 1, 1),
            ("s1", "p1", 2, 1),
            ("s1", "p1", 3, 3),
        ]);
        let err = load_human_rankings(repeated_rank.path()).unwrap_err();
        assert!(err.to_string().contains("used rank 1 twice"), "got: {err}");

        let out_of_range = write_csv(&[("s1", "p1", 4, 1)]);
        assert!(load_human_rankings(out_of_range.path()).is_err());
    }
}
