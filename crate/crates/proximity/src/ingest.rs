//! Delimited-text readers and writers for tract, facility, SVI and
//! state-site files.
//!
//! A bad header is fatal. A bad row is counted under a short reason label in
//! the [`IngestReport`] and skipped.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use proximity_core::model::{RawCounts, StateUniverse};
use proximity_core::{
    Coordinate, DemographicCounts, Facility, FacilitySet, GeocodeQuality, ModelError, Role, StateCode, SviPercentile,
    Tract,
};
use serde::{Deserialize, Serialize};

pub const TRACT_COLUMNS: [&str; 15] = [
    "tract_id",
    "state",
    "lat",
    "lon",
    "adults_total",
    "households_total",
    "hh_lt_35k",
    "hh_gt_100k",
    "pop_total",
    "pop_white",
    "pop_black",
    "pop_aapi",
    "pop_other",
    "pop_hispanic",
    "pop_non_hispanic",
];
pub const FACILITY_COLUMNS: [&str; 7] = ["facility_id", "chain", "state", "lat", "lon", "role", "geocode_quality"];
/// Optional facility column pinning a facility to a tract for SVI profiling.
pub const FACILITY_TRACT_COLUMN: &str = "tract_id";
pub const SVI_COLUMNS: [&str; 2] = ["tract_id", "rpl_themes"];
pub const STATE_SITE_COLUMNS: [&str; 5] = ["site_id", "state", "lat", "lon", "geocode_quality"];

/// Missing-value marker in the CDC SVI release.
pub const SVI_SENTINEL: f64 = -999.0;

/// Matches any chain label in [`parse_facilities`].
pub const ANY_CHAIN: &str = "*";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("missing required column(s): {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("duplicate column {0:?} in header")]
    DuplicateColumn(String),
    #[error("could not read header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Row bookkeeping for one parse: `records_read = records_accepted + Σ rejected`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records_read: u64,
    pub records_accepted: u64,
    pub rejected: BTreeMap<String, u64>,
    /// Tracts that received an SVI value (SVI joins only).
    #[serde(default)]
    pub svi_matched: u64,
    /// Accepted rows whose geocode was only a "doubt" match.
    #[serde(default)]
    pub doubt_geocodes: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl IngestReport {
    fn reject(&mut self, reason: &str) {
        *self.rejected.entry(reason.to_string()).or_default() += 1;
    }

    fn accept(&mut self) {
        self.records_accepted += 1;
    }

    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.records_read == self.records_accepted + self.rejected_total()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextFormat {
    pub delimiter: u8,
    pub universe: StateUniverse,
}

impl Default for TextFormat {
    fn default() -> Self {
        TextFormat { delimiter: b',', universe: StateUniverse::Us }
    }
}

struct Columns(HashMap<String, usize>);

impl Columns {
    fn get<'r>(&self, row: &'r csv::StringRecord, name: &str) -> &'r str {
        self.0.get(name).and_then(|&i| row.get(i)).unwrap_or("").trim()
    }

    fn has(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }
}

fn reader<R: Read>(source: R, delimiter: u8) -> csv::Reader<R> {
    csv::ReaderBuilder::new().delimiter(delimiter).has_headers(true).flexible(true).from_reader(source)
}

fn header<R: Read>(rdr: &mut csv::Reader<R>, required: &[&str]) -> Result<(Columns, usize), IngestError> {
    let h = rdr.headers().map_err(|e| IngestError::Header(e.to_string()))?.clone();
    let mut map = HashMap::new();
    for (i, name) in h.iter().enumerate() {
        let key = name.trim().trim_start_matches('\u{feff}').to_ascii_lowercase();
        if map.insert(key.clone(), i).is_some() {
            return Err(IngestError::DuplicateColumn(key));
        }
    }
    let missing: Vec<String> = required.iter().filter(|c| !map.contains_key(**c)).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingColumns(missing));
    }
    Ok((Columns(map), h.len()))
}

/// Iterates data rows. Structural problems (field count, bad UTF-8) become
/// `Err(())` for the caller to count as malformed; I/O failures are fatal.
fn rows<R: Read>(
    rdr: &mut csv::Reader<R>,
    width: usize,
) -> impl Iterator<Item = Result<Result<csv::StringRecord, ()>, IngestError>> + '_ {
    rdr.records().map(move |r| match r {
        Ok(rec) if rec.len() == width => Ok(Ok(rec)),
        Ok(_) => Ok(Err(())),
        Err(e) => match e.kind() {
            csv::ErrorKind::Io(_) => Err(IngestError::Csv(e)),
            _ => Ok(Err(())),
        },
    })
}

#[derive(Debug)]
enum RowError {
    Malformed,
    Model(ModelError),
    Filtered(&'static str),
}

impl RowError {
    fn reason(&self) -> &'static str {
        match self {
            RowError::Malformed => "malformed",
            RowError::Model(e) => e.reason(),
            RowError::Filtered(r) => r,
        }
    }
}

impl From<ModelError> for RowError {
    fn from(e: ModelError) -> Self {
        RowError::Model(e)
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T, RowError> {
    s.parse().map_err(|_| RowError::Malformed)
}

fn coordinate(lat: &str, lon: &str) -> Result<Coordinate, RowError> {
    Ok(Coordinate::new(num(lat)?, num(lon)?).map_err(ModelError::from)?)
}

fn state(s: &str, universe: &StateUniverse) -> Result<StateCode, RowError> {
    let code = StateCode::parse(s)?;
    if universe.contains(code) {
        Ok(code)
    } else {
        Err(ModelError::State(s.to_string()).into())
    }
}

fn tract_row(cols: &Columns, row: &csv::StringRecord, fmt: &TextFormat) -> Result<Tract, RowError> {
    let g = |name| cols.get(row, name);
    let raw = RawCounts {
        adults_total: num(g("adults_total"))?,
        households_total: num(g("households_total"))?,
        households_low_income: num(g("hh_lt_35k"))?,
        households_high_income: num(g("hh_gt_100k"))?,
        pop_total: num(g("pop_total"))?,
        pop_white: num(g("pop_white"))?,
        pop_black: num(g("pop_black"))?,
        pop_aapi: num(g("pop_aapi"))?,
        pop_other: num(g("pop_other"))?,
        pop_hispanic: num(g("pop_hispanic"))?,
        pop_non_hispanic: num(g("pop_non_hispanic"))?,
    };
    let centroid = coordinate(g("lat"), g("lon"))?;
    let st = state(g("state"), &fmt.universe)?;
    let counts = DemographicCounts::new(raw)?;
    Ok(Tract::new(g("tract_id"), st, centroid, counts)?)
}

/// Reads a tract file. Rows breaking a count identity, carrying an invalid
/// coordinate or state, or repeating an earlier id are rejected.
pub fn parse_tracts<R: Read>(source: R, fmt: &TextFormat) -> Result<(Vec<Tract>, IngestReport), IngestError> {
    let mut rdr = reader(source, fmt.delimiter);
    let (cols, width) = header(&mut rdr, &TRACT_COLUMNS)?;
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut tracts = Vec::new();
    for row in rows(&mut rdr, width) {
        report.records_read += 1;
        let parsed = row?.map_err(|_| RowError::Malformed).and_then(|r| tract_row(&cols, &r, fmt));
        match parsed {
            Ok(t) if !seen.insert(t.id().to_string()) => report.reject("duplicate-id"),
            Ok(t) => {
                report.accept();
                tracts.push(t);
            }
            Err(e) => report.reject(e.reason()),
        }
    }
    Ok((tracts, report))
}

fn chain_matches(wanted: &str, got: &str) -> bool {
    let wanted = wanted.trim();
    wanted == ANY_CHAIN || wanted.eq_ignore_ascii_case(got.trim())
}

struct SiteRow<'a> {
    id: &'a str,
    chain: &'a str,
    state: &'a str,
    lat: &'a str,
    lon: &'a str,
    role: Option<&'a str>,
    quality: &'a str,
    tract: Option<&'a str>,
}

fn site(row: SiteRow<'_>, state_override: Option<StateCode>, fmt: &TextFormat) -> Result<Facility, RowError> {
    let c = coordinate(row.lat, row.lon)?;
    let st = match state_override {
        Some(s) => s,
        None => state(row.state, &fmt.universe)?,
    };
    let role = match row.role {
        Some(r) => Role::parse(r)?,
        None => Role::Retail,
    };
    let quality = GeocodeQuality::parse(row.quality)?;
    if role != Role::Retail {
        return Err(RowError::Filtered("non-retail"));
    }
    if quality == GeocodeQuality::Failed {
        return Err(RowError::Filtered("geocode-failed"));
    }
    let tract = row.tract.filter(|t| !t.is_empty()).map(str::to_string);
    Ok(Facility::new(row.id, row.chain.trim(), st, c, role, quality)?.with_tract(tract))
}

fn collect_sites(
    name: &str,
    parsed: impl Iterator<Item = Result<Result<Facility, RowError>, IngestError>>,
) -> Result<(FacilitySet, IngestReport), IngestError> {
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in parsed {
        report.records_read += 1;
        match item? {
            Ok(f) if !seen.insert(f.id().to_string()) => report.reject("duplicate-id"),
            Ok(f) => {
                if f.quality() == GeocodeQuality::Doubt {
                    report.doubt_geocodes += 1;
                }
                report.accept();
                out.push(f);
            }
            Err(e) => report.reject(e.reason()),
        }
    }
    // ids were deduplicated above
    let set = FacilitySet::new(name, out).unwrap_or_else(|_| FacilitySet::empty(name));
    Ok((set, report))
}

/// Reads a facility file into a set named `chain`, keeping retail rows whose
/// geocode did not fail and whose chain label equals `chain` (trimmed,
/// case-insensitive; [`ANY_CHAIN`] accepts every label).
pub fn parse_facilities<R: Read>(
    source: R,
    chain: &str,
    state_override: Option<StateCode>,
    fmt: &TextFormat,
) -> Result<(FacilitySet, IngestReport), IngestError> {
    let mut rdr = reader(source, fmt.delimiter);
    let (cols, width) = header(&mut rdr, &FACILITY_COLUMNS)?;
    let has_tract = cols.has(FACILITY_TRACT_COLUMN);
    let parsed = rows(&mut rdr, width).map(|row| {
        Ok(row?.map_err(|_| RowError::Malformed).and_then(|r| {
            let g = |name| cols.get(&r, name);
            let f = site(
                SiteRow {
                    id: g("facility_id"),
                    chain: g("chain"),
                    state: g("state"),
                    lat: g("lat"),
                    lon: g("lon"),
                    role: Some(g("role")),
                    quality: g("geocode_quality"),
                    tract: has_tract.then(|| g(FACILITY_TRACT_COLUMN)),
                },
                state_override,
                fmt,
            )?;
            if chain_matches(chain, f.chain()) {
                Ok(f)
            } else {
                Err(RowError::Filtered("chain-mismatch"))
            }
        }))
    });
    let (set, mut report) = collect_sites(chain.trim(), parsed)?;
    if set.is_empty() && report.records_read > 0 {
        report.warnings.push(format!("no rows matched chain {:?}", chain.trim()));
    }
    Ok((set, report))
}

/// Chain label given to sites read from a state's own site list.
pub fn state_chain(state: StateCode) -> String {
    format!("state:{state}")
}

/// Reads a state-published site list. Every site is retail and carries the
/// chain label `state:<STATE>`; duplicate coordinates are kept.
pub fn parse_state_sites<R: Read>(
    source: R,
    state: StateCode,
    fmt: &TextFormat,
) -> Result<(FacilitySet, IngestReport), IngestError> {
    let chain = state_chain(state);
    let mut rdr = reader(source, fmt.delimiter);
    let (cols, width) = header(&mut rdr, &STATE_SITE_COLUMNS)?;
    let parsed = rows(&mut rdr, width).map(|row| {
        Ok(row?.map_err(|_| RowError::Malformed).and_then(|r| {
            let g = |name| cols.get(&r, name);
            site(
                SiteRow {
                    id: g("site_id"),
                    chain: &chain,
                    state: g("state"),
                    lat: g("lat"),
                    lon: g("lon"),
                    role: None,
                    quality: g("geocode_quality"),
                    tract: None,
                },
                None,
                fmt,
            )
        }))
    });
    collect_sites(&chain, parsed)
}

/// Attaches SVI percentiles to tracts by id.
///
/// The [`SVI_SENTINEL`] value and ids absent from the file leave a tract
/// without SVI. Values outside `[0, 1]` reject the row as `svi-range`.
pub fn join_svi<R: Read>(
    tracts: Vec<Tract>,
    svi_source: R,
    fmt: &TextFormat,
) -> Result<(Vec<Tract>, IngestReport), IngestError> {
    let mut rdr = reader(svi_source, fmt.delimiter);
    let (cols, width) = header(&mut rdr, &SVI_COLUMNS)?;
    let mut report = IngestReport::default();
    let mut values: HashMap<String, Option<SviPercentile>> = HashMap::new();
    let mut sentinels = 0u64;
    for row in rows(&mut rdr, width) {
        report.records_read += 1;
        let parsed = row?.map_err(|_| RowError::Malformed).and_then(|r| {
            let id = cols.get(&r, "tract_id");
            if id.is_empty() {
                return Err(RowError::Model(ModelError::EmptyId));
            }
            let v: f64 = num(cols.get(&r, "rpl_themes"))?;
            let svi = if v == SVI_SENTINEL { None } else { Some(SviPercentile::new(v)?) };
            Ok((id.to_string(), svi))
        });
        match parsed {
            Ok((id, _)) if values.contains_key(&id) => report.reject("duplicate-id"),
            Ok((id, svi)) => {
                sentinels += u64::from(svi.is_none());
                values.insert(id, svi);
                report.accept();
            }
            Err(e) => report.reject(e.reason()),
        }
    }
    let tracts: Vec<Tract> = tracts
        .into_iter()
        .map(|t| {
            let svi = values.get(t.id()).copied().flatten();
            report.svi_matched += u64::from(svi.is_some());
            t.with_svi(svi)
        })
        .collect();
    if sentinels > 0 {
        report.warnings.push(format!("{sentinels} row(s) carried the missing-value sentinel {SVI_SENTINEL}"));
    }
    Ok((tracts, report))
}

fn writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink)
}

pub fn write_tracts<W: Write>(sink: W, tracts: &[Tract]) -> Result<(), IngestError> {
    let mut w = writer(sink);
    w.write_record(TRACT_COLUMNS)?;
    for t in tracts {
        let c = t.counts().raw();
        let nums = [
            c.adults_total,
            c.households_total,
            c.households_low_income,
            c.households_high_income,
            c.pop_total,
            c.pop_white,
            c.pop_black,
            c.pop_aapi,
            c.pop_other,
            c.pop_hispanic,
            c.pop_non_hispanic,
        ];
        let mut rec = vec![
            t.id().to_string(),
            t.state().to_string(),
            t.centroid().lat().to_string(),
            t.centroid().lon().to_string(),
        ];
        rec.extend(nums.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the SVI rows of tracts that carry a value.
pub fn write_svi<W: Write>(sink: W, tracts: &[Tract]) -> Result<(), IngestError> {
    let mut w = writer(sink);
    w.write_record(SVI_COLUMNS)?;
    for t in tracts {
        if let Some(svi) = t.svi() {
            w.write_record([t.id().to_string(), svi.value().to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a facility file; the `tract_id` column is added when any facility is pinned.
pub fn write_facilities<W: Write>(sink: W, set: &FacilitySet) -> Result<(), IngestError> {
    let pinned = set.facilities().iter().any(|f| f.tract_id().is_some());
    let mut w = writer(sink);
    let mut head: Vec<&str> = FACILITY_COLUMNS.to_vec();
    if pinned {
        head.push(FACILITY_TRACT_COLUMN);
    }
    w.write_record(&head)?;
    for f in set.facilities() {
        let mut rec = vec![
            f.id().to_string(),
            f.chain().to_string(),
            f.state().to_string(),
            f.coordinate().lat().to_string(),
            f.coordinate().lon().to_string(),
            f.role().as_str().to_string(),
            f.quality().as_str().to_string(),
        ];
        if pinned {
            rec.push(f.tract_id().unwrap_or("").to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
