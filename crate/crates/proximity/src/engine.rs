//! Scenario evaluation shared by the CLI and the HTTP service.
//!
//! Requests arrive as JSON-shaped values ([`ScenarioRequest`] and friends),
//! are validated into core types, and are evaluated against a loaded
//! [`Store`]. Indexes are cached per sorted set-name union.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use proximity_core::coverage::{
    self, CoverageError, CoverageTable, DecileHistogram, DistanceEntry, DistanceTable, GoalCheck, ScenarioDelta,
    StateRate,
};
use proximity_core::model::{in_region, validate_thresholds};
use proximity_core::{DemographicGroup, FacilityIndex, FacilitySet, Miles, Region, Scenario, StateCode, Tract};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{self, CoverageJson, DecileJson, DeltaJson, GoalJson, DEFAULT_DECIMALS};
use crate::store::{sha256_hex, Store};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid request: {}", .0.iter().map(|e| format!("{}: {}", e.field, e.message)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
    #[error("unknown facility set {0:?}")]
    UnknownSet(String),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// `"all"`, `"conus"`, `"PA,NJ"`, or `["PA", "NJ"]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionSpec {
    Name(String),
    States(Vec<String>),
}

impl Default for RegionSpec {
    fn default() -> Self {
        RegionSpec::Name("all".to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default)]
    pub group: Option<String>,
}

/// Scenario fields accepted by `analyze` (CLI flags, scenario files and
/// `POST /analyze` all map onto this).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRequest {
    #[serde(default)]
    pub name: Option<String>,
    pub sets: Vec<String>,
    #[serde(default)]
    pub region: Option<RegionSpec>,
    #[serde(default)]
    pub thresholds: Option<Vec<f64>>,
    #[serde(default)]
    pub groups: Option<Vec<String>>,
    /// Tract state -> extra states whose facilities it may use.
    #[serde(default)]
    pub cross_state: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub per_state: Option<bool>,
    #[serde(default)]
    pub goal: Option<GoalSpec>,
    #[serde(default)]
    pub decimals: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRequest {
    pub base: Vec<String>,
    pub augmented: Vec<String>,
    #[serde(default)]
    pub region: Option<RegionSpec>,
    #[serde(default)]
    pub thresholds: Option<Vec<f64>>,
    #[serde(default)]
    pub groups: Option<Vec<String>>,
    #[serde(default)]
    pub cross_state: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub decimals: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SviHistRequest {
    pub sets: Vec<String>,
    #[serde(default)]
    pub decimals: Option<usize>,
}

/// A file of named scenarios, same fields as [`ScenarioRequest`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenarios: Vec<ScenarioRequest>,
}

/// Normalized echo of a validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedScenario {
    pub name: String,
    pub sets: Vec<String>,
    pub region: String,
    pub thresholds: Vec<f64>,
    pub groups: Vec<String>,
    pub cross_state: BTreeMap<String, Vec<String>>,
    pub per_state: bool,
    pub goal: GoalJsonSpec,
    pub decimals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoalJsonSpec {
    pub threshold: f64,
    pub target: f64,
    pub group: String,
}

struct Validated {
    scenario: Scenario,
    groups: Vec<DemographicGroup>,
    per_state: bool,
    goal_threshold: Miles,
    goal_target: f64,
    goal_group: DemographicGroup,
    decimals: usize,
}

impl Validated {
    fn echo(&self) -> ResolvedScenario {
        let s = &self.scenario;
        ResolvedScenario {
            name: s.name().to_string(),
            sets: s.sets().to_vec(),
            region: region_text(s.region()),
            thresholds: s.thresholds().iter().map(Miles::value).collect(),
            groups: self.groups.iter().map(|g| g.as_str().to_string()).collect(),
            cross_state: s
                .cross_state()
                .iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(StateCode::to_string).collect()))
                .collect(),
            per_state: self.per_state,
            goal: GoalJsonSpec {
                threshold: self.goal_threshold.value(),
                target: self.goal_target,
                group: self.goal_group.as_str().to_string(),
            },
            decimals: self.decimals,
        }
    }
}

fn region_text(r: &Region) -> String {
    match r {
        Region::All => "all".to_string(),
        Region::Conus { .. } => "conus".to_string(),
        Region::States(set) => set.iter().map(StateCode::to_string).collect::<Vec<_>>().join(","),
    }
}

fn parse_states(items: impl IntoIterator<Item = String>, field: &str, errors: &mut Vec<FieldError>) -> BTreeSet<StateCode> {
    let mut out = BTreeSet::new();
    for s in items {
        match StateCode::parse(&s) {
            Ok(c) => {
                out.insert(c);
            }
            Err(_) => errors.push(FieldError::new(field, format!("invalid state code {s:?}"))),
        }
    }
    out
}

fn split_list(s: &str) -> Vec<String> {
    s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect()
}

pub fn parse_region(spec: &RegionSpec, errors: &mut Vec<FieldError>) -> Region {
    match spec {
        RegionSpec::Name(n) if n.trim().eq_ignore_ascii_case("all") => Region::All,
        RegionSpec::Name(n) if n.trim().eq_ignore_ascii_case("conus") => Region::conus(),
        RegionSpec::Name(n) => {
            let states = parse_states(split_list(n), "region", errors);
            if states.is_empty() {
                errors.push(FieldError::new("region", "expected all, conus, or a state list"));
            }
            Region::States(states)
        }
        RegionSpec::States(list) => {
            let states = parse_states(list.iter().cloned(), "region", errors);
            if states.is_empty() {
                errors.push(FieldError::new("region", "state list must not be empty"));
            }
            Region::States(states)
        }
    }
}

fn parse_thresholds(values: Option<&[f64]>, errors: &mut Vec<FieldError>) -> Vec<Miles> {
    let Some(values) = values else {
        return proximity_core::model::DEFAULT_THRESHOLDS.iter().filter_map(|&t| Miles::new(t).ok()).collect();
    };
    let miles: Result<Vec<Miles>, _> = values.iter().map(|&v| Miles::new(v)).collect();
    match miles {
        Ok(m) if !m.is_empty() && validate_thresholds(&m).is_ok() => m,
        _ => {
            errors.push(FieldError::new("thresholds", "must be a nonempty list of positive, strictly increasing miles"));
            Vec::new()
        }
    }
}

fn parse_groups(values: Option<&[String]>, errors: &mut Vec<FieldError>) -> Vec<DemographicGroup> {
    let Some(values) = values else {
        return DemographicGroup::ALL.to_vec();
    };
    if values.is_empty() {
        errors.push(FieldError::new("groups", "must not be empty"));
    }
    let mut out = Vec::new();
    for (i, g) in values.iter().enumerate() {
        match DemographicGroup::parse(g) {
            Ok(g) if !out.contains(&g) => out.push(g),
            Ok(g) => errors.push(FieldError::new(format!("groups[{i}]"), format!("duplicate group {:?}", g.as_str()))),
            Err(_) => errors.push(FieldError::new(format!("groups[{i}]"), format!("unknown group {g:?}"))),
        }
    }
    out
}

fn parse_sets(sets: &[String], field: &str, errors: &mut Vec<FieldError>) -> Vec<String> {
    if sets.is_empty() {
        errors.push(FieldError::new(field, "at least one facility set is required"));
    }
    let mut out: Vec<String> = Vec::new();
    for s in sets {
        let s = s.trim().to_string();
        if s.is_empty() {
            errors.push(FieldError::new(field, "set names must not be empty"));
        } else if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn apply_cross_state(
    mut scenario: Scenario,
    cross: &BTreeMap<String, Vec<String>>,
    errors: &mut Vec<FieldError>,
) -> Scenario {
    for (state, extra) in cross {
        let field = format!("cross_state.{state}");
        let from = match StateCode::parse(state) {
            Ok(s) => s,
            Err(_) => {
                errors.push(FieldError::new(field, format!("invalid state code {state:?}")));
                continue;
            }
        };
        let extra = parse_states(extra.iter().cloned(), &field, errors);
        scenario = scenario.with_cross_state(from, extra);
    }
    scenario
}

fn resolve_decimals(d: Option<usize>, errors: &mut Vec<FieldError>) -> usize {
    match d {
        Some(d) if d > 12 => {
            errors.push(FieldError::new("decimals", "must be at most 12"));
            DEFAULT_DECIMALS
        }
        Some(d) => d,
        None => DEFAULT_DECIMALS,
    }
}

fn validate(req: &ScenarioRequest) -> Result<Validated, EngineError> {
    let mut errors = Vec::new();
    let sets = parse_sets(&req.sets, "sets", &mut errors);
    let region = parse_region(req.region.as_ref().unwrap_or(&RegionSpec::default()), &mut errors);
    let thresholds = parse_thresholds(req.thresholds.as_deref(), &mut errors);
    let groups = parse_groups(req.groups.as_deref(), &mut errors);
    let goal = req.goal.clone().unwrap_or_default();
    let goal_threshold = match Miles::new(goal.threshold.unwrap_or(coverage::GOAL_THRESHOLD_MILES)) {
        Ok(m) if m.value() > 0.0 => m,
        _ => {
            errors.push(FieldError::new("goal.threshold", "must be a positive number of miles"));
            Miles::ZERO
        }
    };
    let goal_target = goal.target.unwrap_or(coverage::GOAL_TARGET_PERCENT);
    if !(0.0..=100.0).contains(&goal_target) {
        errors.push(FieldError::new("goal.target", "must be a percentage in [0, 100]"));
    }
    let goal_group = match goal.group.as_deref().map(DemographicGroup::parse) {
        None => DemographicGroup::AllAdults,
        Some(Ok(g)) => g,
        Some(Err(_)) => {
            errors.push(FieldError::new("goal.group", format!("unknown group {:?}", goal.group.unwrap_or_default())));
            DemographicGroup::AllAdults
        }
    };
    let decimals = resolve_decimals(req.decimals, &mut errors);
    let name = req.name.clone().filter(|n| !n.trim().is_empty()).unwrap_or_else(|| sets.join("+"));
    let mut scenario = Scenario::new(name, sets).with_region(region);
    if !thresholds.is_empty() {
        if let Ok(s) = scenario.clone().with_thresholds(thresholds) {
            scenario = s;
        }
    }
    let scenario = apply_cross_state(scenario, &req.cross_state, &mut errors);
    if !errors.is_empty() {
        return Err(EngineError::Invalid(errors));
    }
    Ok(Validated {
        scenario,
        groups,
        per_state: req.per_state.unwrap_or(true),
        goal_threshold,
        goal_target,
        goal_group,
        decimals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisJson {
    pub scenario: ResolvedScenario,
    pub cache_key: String,
    pub facility_count: usize,
    pub tract_count: usize,
    pub coverage: CoverageJson,
    pub goal: GoalJson,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub scenario: ResolvedScenario,
    pub cache_key: String,
    pub distances: DistanceTable,
    pub coverage: CoverageTable,
    pub goal: GoalCheck,
    pub rates: Vec<StateRate>,
}

impl Analysis {
    pub fn to_json(&self) -> AnalysisJson {
        AnalysisJson {
            scenario: self.scenario.clone(),
            cache_key: self.cache_key.clone(),
            facility_count: self.distances.facility_count(),
            tract_count: self.distances.len(),
            coverage: report::coverage_json(&self.coverage, self.scenario.decimals),
            goal: report::goal_json(&self.goal, self.scenario.decimals),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareJson {
    pub base: ResolvedScenario,
    pub augmented: ResolvedScenario,
    pub cache_key: String,
    pub delta: DeltaJson,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub base: ResolvedScenario,
    pub augmented: ResolvedScenario,
    pub cache_key: String,
    pub delta: ScenarioDelta,
}

impl Comparison {
    pub fn to_json(&self) -> CompareJson {
        CompareJson {
            base: self.base.clone(),
            augmented: self.augmented.clone(),
            cache_key: self.cache_key.clone(),
            delta: report::delta_json(&self.delta, self.base.decimals),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SviHistJson {
    pub sets: Vec<String>,
    pub cache_key: String,
    pub facility_count: usize,
    pub histogram: DecileJson,
}

#[derive(Debug, Clone)]
pub struct SviHist {
    pub sets: Vec<String>,
    pub decimals: usize,
    pub cache_key: String,
    pub facility_count: usize,
    pub histogram: DecileHistogram,
}

impl SviHist {
    pub fn to_json(&self) -> SviHistJson {
        SviHistJson {
            sets: self.sets.clone(),
            cache_key: self.cache_key.clone(),
            facility_count: self.facility_count,
            histogram: report::decile_json(&self.histogram, self.decimals),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SetInfo {
    pub name: String,
    pub facilities: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub regions: Vec<String>,
    pub groups: Vec<String>,
    pub states: Vec<String>,
    pub default_thresholds: Vec<f64>,
    pub store: String,
}

type IndexCell = Arc<OnceLock<Arc<FacilityIndex>>>;

/// Loaded store plus a per-union index cache. Safe to share across threads.
pub struct Engine {
    store: Arc<Store>,
    pool: Option<rayon::ThreadPool>,
    cache: Mutex<HashMap<Vec<String>, IndexCell>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("store", &self.store.manifest_hash).finish_non_exhaustive()
    }
}

impl Engine {
    /// `jobs`: worker threads for distance computation; `None` uses rayon's
    /// global pool, `Some(1)` runs serially.
    pub fn new(store: Arc<Store>, jobs: Option<usize>) -> Result<Self, EngineError> {
        let pool = match jobs {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| EngineError::Pool(e.to_string()))?,
            ),
            None => None,
        };
        Ok(Engine { store, pool, cache: Mutex::new(HashMap::new()) })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn sets(&self) -> Vec<SetInfo> {
        self.store
            .manifest
            .sets
            .iter()
            .map(|s| SetInfo { name: s.name.clone(), facilities: s.file.records })
            .collect()
    }

    pub fn meta(&self) -> Meta {
        let states: BTreeSet<String> = self.store.tracts.iter().map(|t| t.state().to_string()).collect();
        Meta {
            regions: vec!["all".to_string(), "conus".to_string(), "<state list>".to_string()],
            groups: DemographicGroup::ALL.iter().map(|g| g.as_str().to_string()).collect(),
            states: states.into_iter().collect(),
            default_thresholds: proximity_core::model::DEFAULT_THRESHOLDS.to_vec(),
            store: self.store.manifest_hash.clone(),
        }
    }

    fn resolve<'a>(&'a self, names: &[String]) -> Result<Vec<&'a FacilitySet>, EngineError> {
        names
            .iter()
            .map(|n| self.store.sets.iter().find(|s| s.name() == n).ok_or_else(|| EngineError::UnknownSet(n.clone())))
            .collect()
    }

    /// Index over the union of the named sets, built once per distinct union.
    pub fn index_for(&self, names: &[String]) -> Result<Arc<FacilityIndex>, EngineError> {
        let sets = self.resolve(names)?;
        let mut key: Vec<String> = names.to_vec();
        key.sort();
        key.dedup();
        let cell = {
            let mut cache = self.cache.lock().unwrap_or_else(|p| p.into_inner());
            cache.entry(key).or_default().clone()
        };
        // OnceLock blocks concurrent initializers, so each union is built once
        let index = cell.get_or_init(|| Arc::new(FacilityIndex::build(sets.iter().flat_map(|s| s.facilities()))));
        Ok(index.clone())
    }

    pub fn cached_indexes(&self) -> usize {
        self.cache.lock().map(|c| c.values().filter(|c| c.get().is_some()).count()).unwrap_or(0)
    }

    fn cache_key(&self, kind: &str, echo: &impl Serialize) -> String {
        let body = serde_json::to_string(echo).unwrap_or_default();
        sha256_hex(format!("{kind}\n{}\n{body}", self.store.manifest_hash).as_bytes())
    }

    fn distances(&self, scenario: &Scenario) -> Result<DistanceTable, EngineError> {
        let index = self.index_for(scenario.sets())?;
        let tracts: Vec<&Tract> = self.store.tracts.iter().filter(|t| in_region(t, scenario.region())).collect();
        let run = || -> Vec<DistanceEntry> {
            tracts.par_iter().map(|t| coverage::distance_entry(&index, t, scenario)).collect()
        };
        let entries = match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        };
        Ok(DistanceTable::from_entries(scenario.name(), index.len(), entries)?)
    }

    pub fn analyze(&self, req: &ScenarioRequest) -> Result<Analysis, EngineError> {
        let v = validate(req)?;
        let sets = self.resolve(v.scenario.sets())?;
        let distances = self.distances(&v.scenario)?;
        let tracts = &self.store.tracts;
        let cov = coverage::coverage_table(
            &distances,
            tracts,
            &v.groups,
            v.scenario.thresholds(),
            &v.scenario.region().label(),
            v.per_state,
        )?;
        let goal = coverage::goal_check(&distances, tracts, v.goal_threshold, v.goal_target, v.goal_group)?;
        let region_tracts: Vec<Tract> =
            tracts.iter().filter(|t| in_region(t, v.scenario.region())).cloned().collect();
        let region = v.scenario.region();
        let rates = coverage::stores_per_100k(
            sets.iter().flat_map(|s| s.facilities()).filter(|f| region.contains(f.state())),
            &region_tracts,
        );
        let echo = v.echo();
        Ok(Analysis { cache_key: self.cache_key("analyze", &echo), scenario: echo, distances, coverage: cov, goal, rates })
    }

    pub fn compare(&self, req: &CompareRequest) -> Result<Comparison, EngineError> {
        let shared = |sets: &Vec<String>| ScenarioRequest {
            name: None,
            sets: sets.clone(),
            region: req.region.clone(),
            thresholds: req.thresholds.clone(),
            groups: req.groups.clone(),
            cross_state: req.cross_state.clone(),
            per_state: Some(false),
            goal: None,
            decimals: req.decimals,
        };
        let (b, a) = match (validate(&shared(&req.base)), validate(&shared(&req.augmented))) {
            (Ok(b), Ok(a)) => (b, a),
            (b, a) => {
                let mut errors = Vec::new();
                for (label, r) in [("base", b), ("augmented", a)] {
                    if let Err(EngineError::Invalid(es)) = r {
                        for e in es {
                            let field = if e.field == "sets" { label.to_string() } else { e.field };
                            let fe = FieldError::new(field, e.message);
                            if !errors.contains(&fe) {
                                errors.push(fe);
                            }
                        }
                    }
                }
                return Err(EngineError::Invalid(errors));
            }
        };
        let base = self.distances(&b.scenario)?;
        let augmented = self.distances(&a.scenario)?;
        let delta =
            coverage::compare_scenarios(&base, &augmented, &self.store.tracts, &b.groups, b.scenario.thresholds())?;
        let (be, ae) = (b.echo(), a.echo());
        Ok(Comparison { cache_key: self.cache_key("compare", &(&be, &ae)), base: be, augmented: ae, delta })
    }

    pub fn svi_hist(&self, req: &SviHistRequest) -> Result<SviHist, EngineError> {
        let mut errors = Vec::new();
        let names = parse_sets(&req.sets, "sets", &mut errors);
        let decimals = resolve_decimals(req.decimals, &mut errors);
        if !errors.is_empty() {
            return Err(EngineError::Invalid(errors));
        }
        let sets = self.resolve(&names)?;
        let histogram = coverage::svi_decile_distribution(sets.iter().flat_map(|s| s.facilities()), &self.store.tracts);
        let facility_count = sets.iter().map(|s| s.len()).sum();
        Ok(SviHist {
            cache_key: self.cache_key("svi-hist", &(&names, decimals)),
            sets: names,
            decimals,
            facility_count,
            histogram,
        })
    }
}
