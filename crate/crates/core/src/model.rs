//! Domain records. Every invariant is checked when a value is built, so the
//! rest of the crate can take them as given.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::geo::{Coordinate, GeoError, Miles};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    EmptyId,
    State(String),
    Coordinate(GeoError),
    RaceSum { parts: u64, total: u64 },
    EthnicitySum { parts: u64, total: u64 },
    IncomeSum { low: u64, high: u64, total: u64 },
    SviRange(f64),
    DuplicateId(String),
    Thresholds,
    UnknownRole(String),
    UnknownQuality(String),
    UnknownGroup(String),
}

impl ModelError {
    /// Short, stable label used when tallying rejected rows.
    pub fn reason(&self) -> &'static str {
        match self {
            ModelError::EmptyId => "empty-id",
            ModelError::State(_) => "state",
            ModelError::Coordinate(_) => "coordinate",
            ModelError::RaceSum { .. } => "race-sum",
            ModelError::EthnicitySum { .. } => "ethnicity-sum",
            ModelError::IncomeSum { .. } => "income-sum",
            ModelError::SviRange(_) => "svi-range",
            ModelError::DuplicateId(_) => "duplicate-id",
            ModelError::Thresholds => "thresholds",
            ModelError::UnknownRole(_) => "role",
            ModelError::UnknownQuality(_) => "geocode-quality",
            ModelError::UnknownGroup(_) => "group",
        }
    }
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::EmptyId => f.write_str("id must not be empty"),
            ModelError::State(s) => write!(f, "invalid state code {s:?}"),
            ModelError::Coordinate(e) => write!(f, "invalid coordinate: {e}"),
            ModelError::RaceSum { parts, total } => write!(
                f,
                "race-sum: pop_white + pop_black + pop_aapi + pop_other = {parts}, pop_total = {total}"
            ),
            ModelError::EthnicitySum { parts, total } => write!(
                f,
                "ethnicity-sum: pop_hispanic + pop_non_hispanic = {parts}, pop_total = {total}"
            ),
            ModelError::IncomeSum { low, high, total } => write!(
                f,
                "income-sum: hh_lt_35k + hh_gt_100k = {} exceeds households_total = {total}",
                low + high
            ),
            ModelError::SviRange(v) => write!(f, "svi percentile {v} outside [0, 1]"),
            ModelError::DuplicateId(id) => write!(f, "duplicate id {id:?}"),
            ModelError::Thresholds => f.write_str("thresholds must be positive and strictly increasing"),
            ModelError::UnknownRole(s) => write!(f, "unknown location role {s:?}"),
            ModelError::UnknownQuality(s) => write!(f, "unknown geocode quality {s:?}"),
            ModelError::UnknownGroup(s) => write!(f, "unknown demographic group {s:?}"),
        }
    }
}

impl core::error::Error for ModelError {}

impl From<GeoError> for ModelError {
    fn from(e: GeoError) -> Self {
        ModelError::Coordinate(e)
    }
}

/// Two-letter upper-case state or territory code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateCode([u8; 2]);

impl StateCode {
    /// Accepts two ASCII letters in either case; surrounding whitespace is trimmed.
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let t = s.trim().as_bytes();
        if t.len() == 2 && t.iter().all(u8::is_ascii_alphabetic) {
            Ok(StateCode([t[0].to_ascii_uppercase(), t[1].to_ascii_uppercase()]))
        } else {
            Err(ModelError::State(s.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        // always two ASCII letters
        core::str::from_utf8(&self.0).unwrap_or("??")
    }
}

impl fmt::Display for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateCode({})", self.as_str())
    }
}

fn codes(list: &[&str]) -> BTreeSet<StateCode> {
    list.iter().filter_map(|s| StateCode::parse(s).ok()).collect()
}

/// States, DC and territories outside the continental US.
pub const DEFAULT_NON_CONTINENTAL: [&str; 7] = ["AK", "HI", "PR", "VI", "GU", "MP", "AS"];

const US_CODES: [&str; 57] = [
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "DC", "FL", "GA", "HI", "ID", "IL", "IN", "IA",
    "KS", "KY", "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM",
    "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA",
    "WV", "WI", "WY", "PR", "VI", "GU", "MP", "AS", "UM",
];

/// The set of state codes a dataset may use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateUniverse {
    /// 50 states, DC and the inhabited territories.
    Us,
    /// Any syntactically valid two-letter code.
    Any,
    Custom(BTreeSet<StateCode>),
}

impl StateUniverse {
    pub fn contains(&self, state: StateCode) -> bool {
        match self {
            StateUniverse::Us => US_CODES.contains(&state.as_str()),
            StateUniverse::Any => true,
            StateUniverse::Custom(set) => set.contains(&state),
        }
    }
}

/// Raw tract-level counts, before the sum identities are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RawCounts {
    pub adults_total: u64,
    pub households_total: u64,
    pub households_low_income: u64,
    pub households_high_income: u64,
    pub pop_total: u64,
    pub pop_white: u64,
    pub pop_black: u64,
    pub pop_aapi: u64,
    pub pop_other: u64,
    pub pop_hispanic: u64,
    pub pop_non_hispanic: u64,
}

/// Tract counts satisfying the race, ethnicity and income identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemographicCounts(RawCounts);

impl DemographicCounts {
    pub fn new(raw: RawCounts) -> Result<Self, ModelError> {
        let race = [raw.pop_white, raw.pop_black, raw.pop_aapi, raw.pop_other]
            .iter()
            .try_fold(0u64, |acc, &v| acc.checked_add(v));
        match race {
            Some(parts) if parts == raw.pop_total => {}
            parts => {
                return Err(ModelError::RaceSum { parts: parts.unwrap_or(u64::MAX), total: raw.pop_total })
            }
        }
        match raw.pop_hispanic.checked_add(raw.pop_non_hispanic) {
            Some(parts) if parts == raw.pop_total => {}
            parts => {
                return Err(ModelError::EthnicitySum {
                    parts: parts.unwrap_or(u64::MAX),
                    total: raw.pop_total,
                })
            }
        }
        match raw.households_low_income.checked_add(raw.households_high_income) {
            Some(sum) if sum <= raw.households_total => {}
            _ => {
                return Err(ModelError::IncomeSum {
                    low: raw.households_low_income,
                    high: raw.households_high_income,
                    total: raw.households_total,
                })
            }
        }
        Ok(DemographicCounts(raw))
    }

    pub fn raw(&self) -> &RawCounts {
        &self.0
    }
}

/// SVI overall percentile rank.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SviPercentile(f64);

impl SviPercentile {
    pub fn new(value: f64) -> Result<Self, ModelError> {
        if (0.0..=1.0).contains(&value) {
            Ok(SviPercentile(value + 0.0))
        } else {
            Err(ModelError::SviRange(value))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Decile bin 1..=10; bin k covers `[(k-1)/10, k/10)` and bin 10 also takes 1.0.
    pub fn decile(&self) -> usize {
        let k = libm::floor(self.0 * 10.0) as usize;
        k.min(9) + 1
    }
}

/// A population unit located at its centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct Tract {
    id: String,
    state: StateCode,
    centroid: Coordinate,
    counts: DemographicCounts,
    svi: Option<SviPercentile>,
}

impl Tract {
    pub fn new(
        id: impl Into<String>,
        state: StateCode,
        centroid: Coordinate,
        counts: DemographicCounts,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(ModelError::EmptyId);
        }
        Ok(Tract { id, state, centroid, counts, svi: None })
    }

    pub fn with_svi(mut self, svi: Option<SviPercentile>) -> Self {
        self.svi = svi;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> StateCode {
        self.state
    }

    pub fn centroid(&self) -> Coordinate {
        self.centroid
    }

    pub fn counts(&self) -> &DemographicCounts {
        &self.counts
    }

    pub fn svi(&self) -> Option<SviPercentile> {
        self.svi
    }

    /// The count that weights this tract for `group`.
    pub fn group_weight(&self, group: DemographicGroup) -> u64 {
        let c = self.counts.raw();
        match group {
            DemographicGroup::AllAdults => c.adults_total,
            DemographicGroup::HouseholdsLowIncome => c.households_low_income,
            DemographicGroup::HouseholdsHighIncome => c.households_high_income,
            DemographicGroup::PopBlack => c.pop_black,
            DemographicGroup::PopWhite => c.pop_white,
            DemographicGroup::PopAapi => c.pop_aapi,
            DemographicGroup::PopOther => c.pop_other,
            DemographicGroup::PopHispanic => c.pop_hispanic,
            DemographicGroup::PopNonHispanic => c.pop_non_hispanic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Retail,
    Headquarters,
    DistributionCenter,
    OtherNonRetail,
}

impl Role {
    pub const ALL: [Role; 4] =
        [Role::Retail, Role::Headquarters, Role::DistributionCenter, Role::OtherNonRetail];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Retail => "retail",
            Role::Headquarters => "headquarters",
            Role::DistributionCenter => "distribution_center",
            Role::OtherNonRetail => "other_non_retail",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let t = s.trim();
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| ModelError::UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeocodeQuality {
    Success,
    Doubt,
    Failed,
    /// Coordinates supplied by the data vendor rather than a geocoder.
    Authoritative,
}

impl GeocodeQuality {
    pub const ALL: [GeocodeQuality; 4] = [
        GeocodeQuality::Success,
        GeocodeQuality::Doubt,
        GeocodeQuality::Failed,
        GeocodeQuality::Authoritative,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GeocodeQuality::Success => "success",
            GeocodeQuality::Doubt => "doubt",
            GeocodeQuality::Failed => "failed",
            GeocodeQuality::Authoritative => "authoritative",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let t = s.trim();
        GeocodeQuality::ALL
            .into_iter()
            .find(|q| q.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| ModelError::UnknownQuality(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facility {
    id: String,
    chain: String,
    state: StateCode,
    coordinate: Coordinate,
    role: Role,
    quality: GeocodeQuality,
    tract_id: Option<String>,
}

impl Facility {
    pub fn new(
        id: impl Into<String>,
        chain: impl Into<String>,
        state: StateCode,
        coordinate: Coordinate,
        role: Role,
        quality: GeocodeQuality,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(ModelError::EmptyId);
        }
        Ok(Facility { id, chain: chain.into(), state, coordinate, role, quality, tract_id: None })
    }

    /// Pins the facility to a tract, overriding nearest-centroid assignment.
    pub fn with_tract(mut self, tract_id: Option<String>) -> Self {
        self.tract_id = tract_id.filter(|t| !t.trim().is_empty());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn chain(&self) -> &str {
        &self.chain
    }

    pub fn state(&self) -> StateCode {
        self.state
    }

    pub fn coordinate(&self) -> Coordinate {
        self.coordinate
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn quality(&self) -> GeocodeQuality {
        self.quality
    }

    pub fn tract_id(&self) -> Option<&str> {
        self.tract_id.as_deref()
    }
}

/// Named collection of facilities with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FacilitySet {
    name: String,
    facilities: Vec<Facility>,
}

impl FacilitySet {
    pub fn new(name: impl Into<String>, facilities: Vec<Facility>) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for f in &facilities {
            if !seen.insert(f.id()) {
                return Err(ModelError::DuplicateId(f.id().to_string()));
            }
        }
        Ok(FacilitySet { name: name.into(), facilities })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        FacilitySet { name: name.into(), facilities: Vec::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn facilities(&self) -> &[Facility] {
        &self.facilities
    }

    pub fn len(&self) -> usize {
        self.facilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facilities.is_empty()
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.facilities.iter().any(|f| f.id() == id)
    }

    /// Keeps one facility per exact coordinate pair, the one with the
    /// lexicographically smallest id. Output is ordered by id.
    pub fn dedupe_coordinates(&self) -> FacilitySet {
        let mut best: BTreeMap<(u64, u64), &Facility> = BTreeMap::new();
        for f in &self.facilities {
            best.entry(f.coordinate().bits())
                .and_modify(|cur| {
                    if f.id() < cur.id() {
                        *cur = f;
                    }
                })
                .or_insert(f);
        }
        let mut facilities: Vec<Facility> = best.into_values().cloned().collect();
        facilities.sort_by(|a, b| a.id().cmp(b.id()));
        FacilitySet { name: self.name.clone(), facilities }
    }
}

/// Population-weighting group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DemographicGroup {
    AllAdults,
    HouseholdsLowIncome,
    HouseholdsHighIncome,
    PopBlack,
    PopWhite,
    PopAapi,
    PopOther,
    PopHispanic,
    PopNonHispanic,
}

impl DemographicGroup {
    pub const ALL: [DemographicGroup; 9] = [
        DemographicGroup::AllAdults,
        DemographicGroup::HouseholdsLowIncome,
        DemographicGroup::HouseholdsHighIncome,
        DemographicGroup::PopBlack,
        DemographicGroup::PopWhite,
        DemographicGroup::PopAapi,
        DemographicGroup::PopOther,
        DemographicGroup::PopHispanic,
        DemographicGroup::PopNonHispanic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DemographicGroup::AllAdults => "all_adults",
            DemographicGroup::HouseholdsLowIncome => "households_low_income",
            DemographicGroup::HouseholdsHighIncome => "households_high_income",
            DemographicGroup::PopBlack => "pop_black",
            DemographicGroup::PopWhite => "pop_white",
            DemographicGroup::PopAapi => "pop_aapi",
            DemographicGroup::PopOther => "pop_other",
            DemographicGroup::PopHispanic => "pop_hispanic",
            DemographicGroup::PopNonHispanic => "pop_non_hispanic",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let t = s.trim();
        DemographicGroup::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| ModelError::UnknownGroup(s.to_string()))
    }
}

impl fmt::Display for DemographicGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Region {
    All,
    /// Continental US: everything except the listed states.
    Conus { excluded: BTreeSet<StateCode> },
    States(BTreeSet<StateCode>),
}

impl Region {
    pub fn conus() -> Self {
        Region::Conus { excluded: codes(&DEFAULT_NON_CONTINENTAL) }
    }

    pub fn contains(&self, state: StateCode) -> bool {
        match self {
            Region::All => true,
            Region::Conus { excluded } => !excluded.contains(&state),
            Region::States(set) => set.contains(&state),
        }
    }

    /// Label of the national scope row: `US`, `CONUS`, or the joined state list.
    pub fn label(&self) -> String {
        match self {
            Region::All => "US".to_string(),
            Region::Conus { .. } => "CONUS".to_string(),
            Region::States(set) => {
                let parts: Vec<&str> = set.iter().map(StateCode::as_str).collect();
                parts.join("+")
            }
        }
    }
}

pub fn in_region(tract: &Tract, region: &Region) -> bool {
    region.contains(tract.state())
}

pub const DEFAULT_THRESHOLDS: [f64; 3] = [1.0, 2.0, 5.0];

/// Checks that thresholds are positive and strictly increasing.
pub fn validate_thresholds(thresholds: &[Miles]) -> Result<(), ModelError> {
    let positive = thresholds.iter().all(|t| t.value() > 0.0);
    let increasing = thresholds.windows(2).all(|w| w[0] < w[1]);
    if positive && increasing {
        Ok(())
    } else {
        Err(ModelError::Thresholds)
    }
}

/// A union of facility sets evaluated under one region and in-state rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    name: String,
    sets: Vec<String>,
    region: Region,
    cross_state: BTreeMap<StateCode, BTreeSet<StateCode>>,
    thresholds: Vec<Miles>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, sets: Vec<String>) -> Self {
        Scenario {
            name: name.into(),
            sets,
            region: Region::All,
            cross_state: BTreeMap::new(),
            thresholds: DEFAULT_THRESHOLDS.iter().filter_map(|&t| Miles::new(t).ok()).collect(),
        }
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    pub fn with_thresholds(mut self, thresholds: Vec<Miles>) -> Result<Self, ModelError> {
        validate_thresholds(&thresholds)?;
        self.thresholds = thresholds;
        Ok(self)
    }

    /// Lets tracts in `state` also use facilities in `extra`.
    pub fn with_cross_state(mut self, state: StateCode, extra: BTreeSet<StateCode>) -> Self {
        self.cross_state.entry(state).or_default().extend(extra);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sets(&self) -> &[String] {
        &self.sets
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn cross_state(&self) -> &BTreeMap<StateCode, BTreeSet<StateCode>> {
        &self.cross_state
    }

    pub fn thresholds(&self) -> &[Miles] {
        &self.thresholds
    }

    /// States whose facilities may serve a tract in `state`.
    pub fn eligible_states(&self, state: StateCode) -> BTreeSet<StateCode> {
        let mut out = BTreeSet::new();
        out.insert(state);
        if let Some(extra) = self.cross_state.get(&state) {
            out.extend(extra.iter().copied());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(s: &str) -> StateCode {
        StateCode::parse(s).unwrap()
    }

    pub(crate) fn counts() -> RawCounts {
        RawCounts {
            adults_total: 200,
            households_total: 100,
            households_low_income: 0,
            households_high_income: 30,
            pop_total: 300,
            pop_white: 150,
            pop_black: 30,
            pop_aapi: 100,
            pop_other: 20,
            pop_hispanic: 60,
            pop_non_hispanic: 240,
        }
    }

    fn tract(state: &str) -> Tract {
        Tract::new(
            "42101000100",
            st(state),
            Coordinate::new(40.0, -75.0).unwrap(),
            DemographicCounts::new(counts()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn group_weight_selects_field() {
        let t = tract("PA");
        assert_eq!(t.group_weight(DemographicGroup::PopBlack), 30);
        assert_eq!(t.group_weight(DemographicGroup::HouseholdsLowIncome), 0);
        assert_eq!(t.group_weight(DemographicGroup::AllAdults), 200);
        for g in DemographicGroup::ALL {
            assert_eq!(DemographicGroup::parse(g.as_str()).unwrap(), g);
        }
    }

    #[test]
    fn sum_identities_are_enforced() {
        let mut raw = counts();
        raw.pop_black += 1;
        let err = DemographicCounts::new(raw).unwrap_err();
        assert_eq!(err.reason(), "race-sum");
        assert!(err.to_string().contains("pop_white + pop_black"));

        let mut raw = counts();
        raw.pop_hispanic -= 1;
        assert_eq!(DemographicCounts::new(raw).unwrap_err().reason(), "ethnicity-sum");

        let mut raw = counts();
        raw.households_low_income = 71;
        assert_eq!(DemographicCounts::new(raw).unwrap_err().reason(), "income-sum");

        let mut raw = counts();
        raw.pop_white = u64::MAX;
        assert_eq!(DemographicCounts::new(raw).unwrap_err().reason(), "race-sum");
    }

    #[test]
    fn region_membership() {
        assert!(!in_region(&tract("HI"), &Region::conus()));
        assert!(in_region(&tract("KS"), &Region::conus()));
        assert!(in_region(&tract("KS"), &Region::All));
        let list = Region::States([st("AL"), st("AR")].into_iter().collect());
        assert!(!in_region(&tract("KS"), &list));
        assert!(in_region(&tract("AR"), &list));
        assert_eq!(list.label(), "AL+AR");
    }

    #[test]
    fn state_codes() {
        assert_eq!(st(" pa ").as_str(), "PA");
        assert!(StateCode::parse("P").is_err());
        assert!(StateCode::parse("P1").is_err());
        assert!(StateUniverse::Us.contains(st("PR")));
        assert!(!StateUniverse::Us.contains(st("AA")));
        assert!(StateUniverse::Any.contains(st("AA")));
    }

    #[test]
    fn svi_deciles() {
        let d = |v: f64| SviPercentile::new(v).unwrap().decile();
        assert_eq!(d(0.95), 10);
        assert_eq!(d(0.15), 2);
        assert_eq!(d(1.0), 10);
        assert_eq!(d(0.0), 1);
        assert_eq!(d(0.1), 2);
        assert_eq!(d(0.0999), 1);
        assert!(SviPercentile::new(1.01).is_err());
        assert!(SviPercentile::new(-999.0).is_err());
    }

    #[test]
    fn thresholds_validation() {
        let m = |v: &[f64]| v.iter().map(|&x| Miles::new(x).unwrap()).collect::<Vec<_>>();
        assert!(validate_thresholds(&m(&[1.0, 2.0, 5.0])).is_ok());
        assert!(validate_thresholds(&m(&[1.0, 1.0])).is_err());
        assert!(validate_thresholds(&m(&[0.0, 1.0])).is_err());
        assert!(validate_thresholds(&m(&[2.0, 1.0])).is_err());
        let s = Scenario::new("x", Vec::new());
        assert_eq!(s.thresholds().len(), 3);
    }

    #[test]
    fn facility_set_rejects_duplicates_and_dedupes() {
        let f = |id: &str, lon: f64| {
            Facility::new(
                id,
                "pharm",
                st("PA"),
                Coordinate::new(40.0, lon).unwrap(),
                Role::Retail,
                GeocodeQuality::Success,
            )
            .unwrap()
        };
        assert!(FacilitySet::new("a", alloc::vec![f("F1", -75.0), f("F1", -75.1)]).is_err());

        let set = FacilitySet::new("a", alloc::vec![f("F2", -75.0), f("F1", -75.0)]).unwrap();
        let d = set.dedupe_coordinates();
        assert_eq!(d.len(), 1);
        assert_eq!(d.facilities()[0].id(), "F1");

        let set = FacilitySet::new("a", alloc::vec![f("F1", -75.0), f("F2", -75.000001)]).unwrap();
        assert_eq!(set.dedupe_coordinates().len(), 2);
        assert!(FacilitySet::empty("e").dedupe_coordinates().is_empty());
    }

    #[test]
    fn cross_state_expands_eligibility() {
        let s = Scenario::new("x", Vec::new())
            .with_cross_state(st("ND"), [st("MN"), st("SD")].into_iter().collect());
        assert_eq!(s.eligible_states(st("ND")).len(), 3);
        assert_eq!(s.eligible_states(st("PA")).len(), 1);
    }
}
