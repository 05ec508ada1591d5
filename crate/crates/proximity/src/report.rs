//! CSV and JSON renderings of coverage results.
//!
//! Percentages are rounded half-to-even at `decimals` places only here. The
//! JSON number for a cell is the parsed value of the CSV text for the same
//! cell, so both formats carry identical numbers.

use std::fmt::Write as _;

use proximity_core::coverage::{CoverageTable, DecileHistogram, DistanceTable, GoalCheck, ScenarioDelta, Scope, StateRate};
use proximity_core::Miles;
use serde::Serialize;

pub const DEFAULT_DECIMALS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// `x` rounded to `decimals` places, ties to even.
///
/// `format!` rounds the exact binary value; a tie only arises when the value
/// is exactly representable, and then goes to the even digit.
pub fn round_text(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    // avoid "-0.00"
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn round(x: f64, decimals: usize) -> f64 {
    round_text(x, decimals).parse().unwrap_or(x)
}

fn opt_text(x: Option<f64>, decimals: usize) -> String {
    x.map(|v| round_text(v, decimals)).unwrap_or_default()
}

/// Column label for a threshold: `lt_1`, `lt_2.5`, ...
pub fn threshold_label(t: Miles) -> String {
    format!("lt_{}", t.value())
}

pub fn scope_label(scope: Scope, region: &str) -> String {
    match scope {
        Scope::National => region.to_string(),
        Scope::State(s) => s.to_string(),
    }
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    // writing into a Vec cannot fail
    let _ = w.write_record(header);
    for r in rows {
        let _ = w.write_record(r);
    }
    w.into_inner().unwrap_or_default()
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).unwrap_or_default();
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CoverageRowJson {
    pub group: String,
    pub scope: String,
    pub shares: Vec<Option<f64>>,
    pub covered: Vec<u64>,
    pub weighted_total: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CoverageJson {
    pub scenario: String,
    pub region: String,
    pub thresholds: Vec<f64>,
    pub decimals: usize,
    pub rows: Vec<CoverageRowJson>,
}

pub fn coverage_json(table: &CoverageTable, decimals: usize) -> CoverageJson {
    let n = table.thresholds.len();
    CoverageJson {
        scenario: table.scenario.clone(),
        region: table.region.clone(),
        thresholds: table.thresholds.iter().map(Miles::value).collect(),
        decimals,
        rows: table
            .rows
            .iter()
            .map(|r| CoverageRowJson {
                group: r.group.as_str().to_string(),
                scope: scope_label(r.scope, &table.region),
                shares: match &r.shares {
                    Some(s) => s.iter().map(|&v| Some(round(v, decimals))).collect(),
                    None => vec![None; n],
                },
                covered: r.covered.clone(),
                weighted_total: r.total,
            })
            .collect(),
    }
}

/// Columns: group, scope, one share column per threshold, weighted_total.
pub fn render_coverage(table: &CoverageTable, format: Format, decimals: usize) -> Vec<u8> {
    match format {
        Format::Json => json_bytes(&coverage_json(table, decimals)),
        Format::Csv => {
            let mut header = vec!["group".to_string(), "scope".to_string()];
            header.extend(table.thresholds.iter().map(|&t| threshold_label(t)));
            header.push("weighted_total".to_string());
            let rows: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|r| {
                    let mut rec = vec![r.group.as_str().to_string(), scope_label(r.scope, &table.region)];
                    for i in 0..table.thresholds.len() {
                        rec.push(opt_text(r.shares.as_ref().map(|s| s[i]), decimals));
                    }
                    rec.push(r.total.to_string());
                    rec
                })
                .collect();
            csv_bytes(&header, &rows)
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DecileBinJson {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    pub share: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DecileJson {
    pub base: u64,
    pub unmatched: u64,
    pub decimals: usize,
    pub bins: Vec<DecileBinJson>,
}

pub fn decile_json(h: &DecileHistogram, decimals: usize) -> DecileJson {
    let shares = h.shares();
    DecileJson {
        base: h.base(),
        unmatched: h.unmatched,
        decimals,
        bins: (0..10)
            .map(|k| DecileBinJson {
                bin: k + 1,
                lower: k as f64 / 10.0,
                upper: (k + 1) as f64 / 10.0,
                count: h.counts[k],
                share: round(shares[k], decimals),
            })
            .collect(),
    }
}

/// Ten rows, one per decile, then an `unmatched` row with the count of
/// facilities in tracts without SVI.
pub fn render_decile(h: &DecileHistogram, format: Format, decimals: usize) -> Vec<u8> {
    match format {
        Format::Json => json_bytes(&decile_json(h, decimals)),
        Format::Csv => {
            let shares = h.shares();
            let header: Vec<String> = ["bin", "count", "share"].map(String::from).to_vec();
            let mut rows: Vec<Vec<String>> = (0..10)
                .map(|k| vec![(k + 1).to_string(), h.counts[k].to_string(), round_text(shares[k], decimals)])
                .collect();
            rows.push(vec!["unmatched".to_string(), h.unmatched.to_string(), String::new()]);
            csv_bytes(&header, &rows)
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DeltaRowJson {
    pub group: String,
    pub threshold: f64,
    pub base: Option<f64>,
    pub augmented: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TractDeltaJson {
    pub tract_id: String,
    pub base_miles: Option<f64>,
    pub augmented_miles: Option<f64>,
    pub change_miles: Option<f64>,
    pub newly_covered: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DeltaJson {
    pub base_scenario: String,
    pub augmented_scenario: String,
    pub decimals: usize,
    pub rows: Vec<DeltaRowJson>,
    pub tracts: Vec<TractDeltaJson>,
}

pub fn delta_json(d: &ScenarioDelta, decimals: usize) -> DeltaJson {
    DeltaJson {
        base_scenario: d.base_scenario.clone(),
        augmented_scenario: d.augmented_scenario.clone(),
        decimals,
        rows: d
            .rows
            .iter()
            .map(|r| DeltaRowJson {
                group: r.group.as_str().to_string(),
                threshold: r.threshold.value(),
                base: r.base.map(|v| round(v, decimals)),
                augmented: r.augmented.map(|v| round(v, decimals)),
                delta: r.delta.map(|v| round(v, decimals)),
            })
            .collect(),
        tracts: d
            .tracts
            .iter()
            .map(|t| TractDeltaJson {
                tract_id: t.tract_id.clone(),
                base_miles: t.base.map(|m| m.value()),
                augmented_miles: t.augmented.map(|m| m.value()),
                change_miles: t.change,
                newly_covered: t.newly_covered(),
            })
            .collect(),
    }
}

/// Share deltas per (group, threshold). Per-tract deltas go through
/// [`render_tract_deltas`].
pub fn render_delta(d: &ScenarioDelta, format: Format, decimals: usize) -> Vec<u8> {
    match format {
        Format::Json => json_bytes(&delta_json(d, decimals)),
        Format::Csv => {
            let header: Vec<String> = ["group", "threshold", "base", "augmented", "delta"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = d
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.group.as_str().to_string(),
                        r.threshold.value().to_string(),
                        opt_text(r.base, decimals),
                        opt_text(r.augmented, decimals),
                        opt_text(r.delta, decimals),
                    ]
                })
                .collect();
            csv_bytes(&header, &rows)
        }
    }
}

fn opt_miles(m: Option<Miles>) -> String {
    m.map(|m| m.value().to_string()).unwrap_or_default()
}

/// Per-tract distances before and after, at full precision.
pub fn render_tract_deltas(d: &ScenarioDelta) -> Vec<u8> {
    let header: Vec<String> = ["tract_id", "base_miles", "augmented_miles", "change_miles", "newly_covered"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = d
        .tracts
        .iter()
        .map(|t| {
            vec![
                t.tract_id.clone(),
                opt_miles(t.base),
                opt_miles(t.augmented),
                t.change.map(|c| c.to_string()).unwrap_or_default(),
                t.newly_covered().to_string(),
            ]
        })
        .collect();
    csv_bytes(&header, &rows)
}

/// Distance-table dump at full precision (shortest round-trip decimal).
pub fn render_distances(table: &DistanceTable) -> Vec<u8> {
    let header: Vec<String> = ["tract_id", "state", "facility_id", "miles"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = table
        .entries()
        .iter()
        .map(|e| {
            let (id, miles) = match &e.nearest {
                Some(n) => (n.facility_id.clone(), n.miles.value().to_string()),
                None => (String::new(), String::new()),
            };
            vec![e.tract_id.clone(), e.state.to_string(), id, miles]
        })
        .collect();
    csv_bytes(&header, &rows)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StateRateJson {
    pub state: String,
    pub facilities: u64,
    pub population: u64,
    pub per_100k: Option<f64>,
}

pub fn render_rates(rates: &[StateRate], format: Format, decimals: usize) -> Vec<u8> {
    match format {
        Format::Json => {
            let rows: Vec<StateRateJson> = rates
                .iter()
                .map(|r| StateRateJson {
                    state: r.state.to_string(),
                    facilities: r.facilities,
                    population: r.population,
                    per_100k: r.per_100k.map(|v| round(v, decimals)),
                })
                .collect();
            json_bytes(&rows)
        }
        Format::Csv => {
            let header: Vec<String> = ["state", "facilities", "population", "per_100k"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = rates
                .iter()
                .map(|r| {
                    vec![
                        r.state.to_string(),
                        r.facilities.to_string(),
                        r.population.to_string(),
                        opt_text(r.per_100k, decimals),
                    ]
                })
                .collect();
            csv_bytes(&header, &rows)
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GoalJson {
    pub group: String,
    pub threshold: f64,
    pub target: f64,
    pub share: Option<f64>,
    pub met: bool,
}

pub fn goal_json(g: &GoalCheck, decimals: usize) -> GoalJson {
    GoalJson {
        group: g.group.as_str().to_string(),
        threshold: g.threshold.value(),
        target: g.target,
        share: g.share.map(|v| round(v, decimals)),
        met: g.met,
    }
}

/// One line, e.g. `goal all_adults <5 mi: 86.30% vs target 90% -> not met`.
pub fn render_goal(g: &GoalCheck, decimals: usize) -> String {
    let mut s = String::new();
    let share = g.share.map(|v| format!("{}%", round_text(v, decimals))).unwrap_or_else(|| "n/a".to_string());
    let _ = writeln!(
        s,
        "goal {} <{} mi: {} vs target {}% -> {}",
        g.group,
        g.threshold,
        share,
        g.target,
        if g.met { "met" } else { "not met" }
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proximity_core::coverage::CoverageRow;
    use proximity_core::DemographicGroup;

    fn miles(v: &[f64]) -> Vec<Miles> {
        v.iter().map(|&x| Miles::new(x).unwrap()).collect()
    }

    fn table(rows: Vec<CoverageRow>) -> CoverageTable {
        CoverageTable { region: "US".into(), scenario: "pharm".into(), thresholds: miles(&[1.0, 2.0, 5.0]), rows }
    }

    #[test]
    fn half_to_even() {
        assert_eq!(round_text(0.125, 2), "0.12");
        assert_eq!(round_text(0.375, 2), "0.38");
        assert_eq!(round_text(0.25, 1), "0.2");
        assert_eq!(round_text(2.5, 0), "2");
        assert_eq!(round_text(-0.001, 2), "0.00");
        assert_eq!(round_text(86.3, 1), "86.3");
    }

    #[test]
    fn coverage_csv_row_layout() {
        let row = CoverageRow {
            group: DemographicGroup::AllAdults,
            scope: Scope::National,
            covered: vec![483, 727, 863],
            total: 1000,
            shares: Some(vec![48.3, 72.7, 86.3]),
        };
        let csv = String::from_utf8(render_coverage(&table(vec![row]), Format::Csv, 1)).unwrap();
        assert_eq!(csv, "group,scope,lt_1,lt_2,lt_5,weighted_total\nall_adults,US,48.3,72.7,86.3,1000\n");
    }

    #[test]
    fn empty_table_is_header_only() {
        let csv = String::from_utf8(render_coverage(&table(Vec::new()), Format::Csv, 2)).unwrap();
        assert_eq!(csv, "group,scope,lt_1,lt_2,lt_5,weighted_total\n");
    }

    #[test]
    fn absent_shares_are_blank_and_null() {
        let row = CoverageRow {
            group: DemographicGroup::PopBlack,
            scope: Scope::State(proximity_core::StateCode::parse("KS").unwrap()),
            covered: vec![0, 0, 0],
            total: 0,
            shares: None,
        };
        let t = table(vec![row]);
        let csv = String::from_utf8(render_coverage(&t, Format::Csv, 2)).unwrap();
        assert!(csv.ends_with("pop_black,KS,,,,0\n"));
        let json: serde_json::Value = serde_json::from_slice(&render_coverage(&t, Format::Json, 2)).unwrap();
        assert!(json["rows"][0]["shares"][0].is_null());
    }

    #[test]
    fn csv_and_json_numbers_agree() {
        let row = CoverageRow {
            group: DemographicGroup::AllAdults,
            scope: Scope::National,
            covered: vec![1, 2, 3],
            total: 7,
            shares: Some(vec![100.0 / 7.0, 200.0 / 7.0, 300.0 / 7.0]),
        };
        let t = table(vec![row]);
        let csv = String::from_utf8(render_coverage(&t, Format::Csv, 2)).unwrap();
        let json: serde_json::Value = serde_json::from_slice(&render_coverage(&t, Format::Json, 2)).unwrap();
        let line = csv.lines().nth(1).unwrap();
        let cells: Vec<f64> = line.split(',').skip(2).take(3).map(|c| c.parse().unwrap()).collect();
        let nums: Vec<f64> = json["rows"][0]["shares"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(cells, nums);
    }

    #[test]
    fn decile_renderings() {
        let uniform = DecileHistogram { counts: [1; 10], unmatched: 0 };
        let csv = String::from_utf8(render_decile(&uniform, Format::Csv, 1)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 12);
        assert!(lines[1..11].iter().all(|l| l.ends_with(",1,10.0")));
        assert_eq!(lines[11], "unmatched,0,");

        let empty = DecileHistogram::default();
        let json = decile_json(&empty, 2);
        assert_eq!(json.base, 0);
        assert!(json.bins.iter().all(|b| b.share == 0.0));

        let mut top = DecileHistogram::default();
        top.counts[9] = 1;
        assert_eq!(decile_json(&top, 2).bins[9].share, 100.0);
    }

    #[test]
    fn goal_line() {
        let g = GoalCheck::evaluate(DemographicGroup::AllAdults, Miles::new(5.0).unwrap(), 90.0, Some(86.3));
        assert_eq!(render_goal(&g, 1), "goal all_adults <5 mi: 86.3% vs target 90% -> not met\n");
    }
}
