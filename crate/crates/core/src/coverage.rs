//! Coverage metrics over per-tract minimum distances.
//!
//! Weights are summed as integers, so every share is a single division of
//! two exact totals and does not depend on the order tracts were processed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::geo::Miles;
use crate::index::FacilityIndex;
use crate::model::{in_region, DemographicGroup, Facility, FacilitySet, Scenario, StateCode, Tract};

#[derive(Debug, Clone, PartialEq)]
pub enum CoverageError {
    UnknownSet(String),
    DuplicateTract(String),
    UnknownTract(String),
    MismatchedTracts { only_base: usize, only_augmented: usize },
}

impl fmt::Display for CoverageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoverageError::UnknownSet(name) => write!(f, "unknown facility set {name:?}"),
            CoverageError::DuplicateTract(id) => write!(f, "tract {id:?} appears more than once"),
            CoverageError::UnknownTract(id) => write!(f, "distance table refers to unknown tract {id:?}"),
            CoverageError::MismatchedTracts { only_base, only_augmented } => write!(
                f,
                "distance tables cover different tracts ({only_base} only in base, {only_augmented} only in augmented)"
            ),
        }
    }
}

impl core::error::Error for CoverageError {}

/// Looks up every set named by the scenario, in scenario order.
pub fn resolve_sets<'a>(scenario: &Scenario, sets: &'a [FacilitySet]) -> Result<Vec<&'a FacilitySet>, CoverageError> {
    scenario
        .sets()
        .iter()
        .map(|name| {
            sets.iter()
                .find(|s| s.name() == name)
                .ok_or_else(|| CoverageError::UnknownSet(name.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearestFacility {
    pub facility_id: String,
    pub miles: Miles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEntry {
    pub tract_id: String,
    pub state: StateCode,
    pub nearest: Option<NearestFacility>,
}

impl DistanceEntry {
    pub fn miles(&self) -> Option<Miles> {
        self.nearest.as_ref().map(|n| n.miles)
    }
}

/// Minimum eligible distance for every in-region tract, ordered by tract id.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    scenario: String,
    facility_count: usize,
    entries: Vec<DistanceEntry>,
}

impl DistanceTable {
    pub fn from_entries(
        scenario: impl Into<String>,
        facility_count: usize,
        mut entries: Vec<DistanceEntry>,
    ) -> Result<Self, CoverageError> {
        entries.sort_by(|a, b| a.tract_id.cmp(&b.tract_id));
        if let Some(w) = entries.windows(2).find(|w| w[0].tract_id == w[1].tract_id) {
            return Err(CoverageError::DuplicateTract(w[0].tract_id.clone()));
        }
        Ok(DistanceTable { scenario: scenario.into(), facility_count, entries })
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn facility_count(&self) -> usize {
        self.facility_count
    }

    pub fn entries(&self) -> &[DistanceEntry] {
        &self.entries
    }

    pub fn get(&self, tract_id: &str) -> Option<&DistanceEntry> {
        self.entries
            .binary_search_by(|e| e.tract_id.as_str().cmp(tract_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Distance entry for one tract against a prebuilt index of the scenario's union.
pub fn distance_entry(index: &FacilityIndex, tract: &Tract, scenario: &Scenario) -> DistanceEntry {
    let states = scenario.eligible_states(tract.state());
    DistanceEntry {
        tract_id: tract.id().to_string(),
        state: tract.state(),
        nearest: index.nearest(tract.centroid(), &states).map(|n| NearestFacility {
            facility_id: n.id.to_string(),
            miles: n.miles,
        }),
    }
}

/// Builds the distance table serially against an existing index.
pub fn distances_with_index(
    tracts: &[Tract],
    scenario: &Scenario,
    index: &FacilityIndex,
) -> Result<DistanceTable, CoverageError> {
    let entries = tracts
        .iter()
        .filter(|t| in_region(t, scenario.region()))
        .map(|t| distance_entry(index, t, scenario))
        .collect();
    DistanceTable::from_entries(scenario.name(), index.len(), entries)
}

/// Resolves the scenario's sets, indexes their union and computes the
/// same-state minimum distance of every in-region tract.
pub fn min_distance_table(
    tracts: &[Tract],
    scenario: &Scenario,
    sets: &[FacilitySet],
) -> Result<DistanceTable, CoverageError> {
    let resolved = resolve_sets(scenario, sets)?;
    let index = FacilityIndex::build(resolved.iter().flat_map(|s| s.facilities()));
    distances_with_index(tracts, scenario, &index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    /// Every tract in the distance table.
    National,
    State(StateCode),
}

/// Population-weighted coverage of one group in one scope.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub group: DemographicGroup,
    pub scope: Scope,
    /// Weight of tracts strictly within each threshold.
    pub covered: Vec<u64>,
    pub total: u64,
    /// Percentages per threshold; `None` when the scope has zero weight.
    pub shares: Option<Vec<f64>>,
}

fn tract_lookup(tracts: &[Tract]) -> BTreeMap<&str, &Tract> {
    tracts.iter().map(|t| (t.id(), t)).collect()
}

fn share_row(
    table: &DistanceTable,
    lookup: &BTreeMap<&str, &Tract>,
    group: DemographicGroup,
    thresholds: &[Miles],
    scope: Scope,
) -> Result<CoverageRow, CoverageError> {
    let mut covered = alloc::vec![0u64; thresholds.len()];
    let mut total = 0u64;
    for e in table.entries() {
        if let Scope::State(s) = scope {
            if e.state != s {
                continue;
            }
        }
        let tract = lookup.get(e.tract_id.as_str()).ok_or_else(|| CoverageError::UnknownTract(e.tract_id.clone()))?;
        let w = tract.group_weight(group);
        total = total.saturating_add(w);
        if let Some(d) = e.miles() {
            for (c, t) in covered.iter_mut().zip(thresholds) {
                if d < *t {
                    *c = c.saturating_add(w);
                }
            }
        }
    }
    let shares = (total > 0).then(|| covered.iter().map(|&c| 100.0 * c as f64 / total as f64).collect());
    Ok(CoverageRow { group, scope, covered, total, shares })
}

/// Share of `group` living strictly within each threshold of an eligible
/// facility. Tracts without one count only toward the denominator.
pub fn threshold_share(
    table: &DistanceTable,
    tracts: &[Tract],
    group: DemographicGroup,
    thresholds: &[Miles],
    scope: Scope,
) -> Result<CoverageRow, CoverageError> {
    share_row(table, &tract_lookup(tracts), group, thresholds, scope)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTable {
    /// Label for the national rows (`US`, `CONUS`, ...).
    pub region: String,
    pub scenario: String,
    pub thresholds: Vec<Miles>,
    /// National rows first (groups in request order), then per-state rows
    /// with states ascending.
    pub rows: Vec<CoverageRow>,
}

/// National rows for every group, followed by per-state rows when `per_state`.
pub fn coverage_table(
    table: &DistanceTable,
    tracts: &[Tract],
    groups: &[DemographicGroup],
    thresholds: &[Miles],
    region_label: &str,
    per_state: bool,
) -> Result<CoverageTable, CoverageError> {
    let lookup = tract_lookup(tracts);
    let mut rows = Vec::new();
    for &g in groups {
        rows.push(share_row(table, &lookup, g, thresholds, Scope::National)?);
    }
    if per_state {
        let states: BTreeSet<StateCode> = table.entries().iter().map(|e| e.state).collect();
        for s in states {
            for &g in groups {
                rows.push(share_row(table, &lookup, g, thresholds, Scope::State(s))?);
            }
        }
    }
    Ok(CoverageTable {
        region: region_label.to_string(),
        scenario: table.scenario().to_string(),
        thresholds: thresholds.to_vec(),
        rows,
    })
}

/// Facilities per SVI decile of the tract they sit in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecileHistogram {
    /// `counts[k]` holds decile `k + 1`.
    pub counts: [u64; 10],
    /// Facilities in tracts without an SVI value.
    pub unmatched: u64,
}

impl DecileHistogram {
    pub fn base(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.base() + self.unmatched
    }

    /// Percent of the matched base per decile; all zero when nothing matched.
    pub fn shares(&self) -> [f64; 10] {
        let base = self.base();
        let mut out = [0.0; 10];
        if base > 0 {
            for (o, &c) in out.iter_mut().zip(&self.counts) {
                *o = 100.0 * c as f64 / base as f64;
            }
        }
        out
    }
}

/// Assigns each facility to a tract and bins it by that tract's SVI.
///
/// An explicit tract id on the facility wins when it names a known tract.
/// Otherwise the facility goes to the nearest tract centroid in its own
/// state, or the nearest centroid anywhere if its state has no tracts.
pub fn svi_decile_distribution<'a, I>(facilities: I, tracts: &[Tract]) -> DecileHistogram
where
    I: IntoIterator<Item = &'a Facility>,
{
    let lookup = tract_lookup(tracts);
    let centroids = FacilityIndex::from_sites(tracts.iter().map(|t| (t.state(), t.id().to_string(), t.centroid())));
    let mut hist = DecileHistogram::default();
    for f in facilities {
        let pinned = f.tract_id().and_then(|id| lookup.get(id).copied());
        let tract = pinned.or_else(|| {
            let own: BTreeSet<StateCode> = core::iter::once(f.state()).collect();
            centroids
                .nearest(f.coordinate(), &own)
                .or_else(|| centroids.nearest_any(f.coordinate()))
                .and_then(|n| lookup.get(n.id).copied())
        });
        match tract.and_then(|t| t.svi()) {
            Some(svi) => hist.counts[svi.decile() - 1] += 1,
            None => hist.unmatched += 1,
        }
    }
    hist
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRate {
    pub state: StateCode,
    pub facilities: u64,
    pub population: u64,
    /// `None` when the state has no recorded population.
    pub per_100k: Option<f64>,
}

/// Facility count per state and per 100,000 residents (`pop_total`).
pub fn stores_per_100k<'a, I>(facilities: I, tracts: &[Tract]) -> Vec<StateRate>
where
    I: IntoIterator<Item = &'a Facility>,
{
    let mut acc: BTreeMap<StateCode, (u64, u64)> = BTreeMap::new();
    for t in tracts {
        let e = acc.entry(t.state()).or_default();
        e.1 = e.1.saturating_add(t.counts().raw().pop_total);
    }
    for f in facilities {
        acc.entry(f.state()).or_default().0 += 1;
    }
    acc.into_iter()
        .map(|(state, (facilities, population))| StateRate {
            state,
            facilities,
            population,
            per_100k: (population > 0).then(|| facilities as f64 / population as f64 * 100_000.0),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub group: DemographicGroup,
    pub threshold: Miles,
    pub base: Option<f64>,
    pub augmented: Option<f64>,
    /// `augmented - base`, when both shares exist.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TractDelta {
    pub tract_id: String,
    pub base: Option<Miles>,
    pub augmented: Option<Miles>,
    /// `augmented - base` in miles, when both distances exist.
    pub change: Option<f64>,
}

impl TractDelta {
    /// No eligible facility before, one after.
    pub fn newly_covered(&self) -> bool {
        self.base.is_none() && self.augmented.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDelta {
    pub base_scenario: String,
    pub augmented_scenario: String,
    pub rows: Vec<DeltaRow>,
    pub tracts: Vec<TractDelta>,
}

/// Share and per-tract distance differences between two scenarios evaluated
/// over the same tracts.
pub fn compare_scenarios(
    base: &DistanceTable,
    augmented: &DistanceTable,
    tracts: &[Tract],
    groups: &[DemographicGroup],
    thresholds: &[Miles],
) -> Result<ScenarioDelta, CoverageError> {
    let base_ids: BTreeSet<&str> = base.entries().iter().map(|e| e.tract_id.as_str()).collect();
    let aug_ids: BTreeSet<&str> = augmented.entries().iter().map(|e| e.tract_id.as_str()).collect();
    if base_ids != aug_ids {
        return Err(CoverageError::MismatchedTracts {
            only_base: base_ids.difference(&aug_ids).count(),
            only_augmented: aug_ids.difference(&base_ids).count(),
        });
    }
    let lookup = tract_lookup(tracts);
    let mut rows = Vec::new();
    for &g in groups {
        let b = share_row(base, &lookup, g, thresholds, Scope::National)?;
        let a = share_row(augmented, &lookup, g, thresholds, Scope::National)?;
        for (i, &t) in thresholds.iter().enumerate() {
            let bs = b.shares.as_ref().map(|s| s[i]);
            let as_ = a.shares.as_ref().map(|s| s[i]);
            let delta = bs.zip(as_).map(|(x, y)| y - x);
            rows.push(DeltaRow { group: g, threshold: t, base: bs, augmented: as_, delta });
        }
    }
    // both tables are sorted by tract id and hold the same ids
    let tracts = base
        .entries()
        .iter()
        .zip(augmented.entries())
        .map(|(b, a)| TractDelta {
            tract_id: b.tract_id.clone(),
            base: b.miles(),
            augmented: a.miles(),
            change: b.miles().zip(a.miles()).map(|(x, y)| y.value() - x.value()),
        })
        .collect();
    Ok(ScenarioDelta {
        base_scenario: base.scenario().to_string(),
        augmented_scenario: augmented.scenario().to_string(),
        rows,
        tracts,
    })
}

pub const GOAL_THRESHOLD_MILES: f64 = 5.0;
pub const GOAL_TARGET_PERCENT: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalCheck {
    pub group: DemographicGroup,
    pub threshold: Miles,
    pub target: f64,
    pub share: Option<f64>,
    pub met: bool,
}

impl GoalCheck {
    /// `met` holds iff a share exists and reaches `target`.
    pub fn evaluate(group: DemographicGroup, threshold: Miles, target: f64, share: Option<f64>) -> Self {
        GoalCheck { group, threshold, target, share, met: share.is_some_and(|s| s >= target) }
    }
}

/// Whether at least `target` percent of `group` is strictly within `threshold`.
pub fn goal_check(
    table: &DistanceTable,
    tracts: &[Tract],
    threshold: Miles,
    target: f64,
    group: DemographicGroup,
) -> Result<GoalCheck, CoverageError> {
    let row = threshold_share(table, tracts, group, &[threshold], Scope::National)?;
    Ok(GoalCheck::evaluate(group, threshold, target, row.shares.map(|s| s[0])))
}
