//! Randomized properties of the distance and coverage pipeline.

use std::collections::BTreeSet;

use proptest::prelude::*;
use proximity_core::coverage::{
    coverage_table, min_distance_table, svi_decile_distribution, threshold_share, DistanceEntry, DistanceTable,
    NearestFacility, Scope,
};
use proximity_core::model::RawCounts;
use proximity_core::{
    nearest_bruteforce, Coordinate, DemographicCounts, DemographicGroup, Facility, FacilitySet, GeocodeQuality, Miles,
    Role, Scenario, StateCode, SviPercentile, Tract,
};

const STATES: [&str; 3] = ["AA", "BB", "CC"];

fn st(s: &str) -> StateCode {
    StateCode::parse(s).unwrap()
}

fn thresholds() -> Vec<Miles> {
    [1.0, 2.0, 5.0].iter().map(|&m| Miles::new(m).unwrap()).collect()
}

fn arb_tract(i: usize) -> impl Strategy<Value = Tract> {
    (0..3usize, 39.5..40.5f64, -75.5..-74.5f64, 0u64..50, 0u64..50, 0u64..50, 0u64..50, 0u64..60, 0u64..40, proptest::option::of(0.0..=1.0f64))
        .prop_map(move |(s, lat, lon, w, b, a, o, hisp_cut, hh, svi)| {
            let total = w + b + a + o;
            let hisp = hisp_cut.min(total);
            let raw = RawCounts {
                adults_total: total * 3 / 4,
                households_total: hh + 10,
                households_low_income: hh / 2,
                households_high_income: hh / 3,
                pop_total: total,
                pop_white: w,
                pop_black: b,
                pop_aapi: a,
                pop_other: o,
                pop_hispanic: hisp,
                pop_non_hispanic: total - hisp,
            };
            Tract::new(format!("T{i:03}"), st(STATES[s]), Coordinate::new(lat, lon).unwrap(), DemographicCounts::new(raw).unwrap())
                .unwrap()
                .with_svi(svi.map(|v| SviPercentile::new(v).unwrap()))
        })
}

fn arb_tracts(max: usize) -> impl Strategy<Value = Vec<Tract>> {
    (1..max).prop_flat_map(|n| (0..n).map(arb_tract).collect::<Vec<_>>())
}

fn arb_facilities(prefix: &'static str, max: usize) -> impl Strategy<Value = Vec<Facility>> {
    prop::collection::vec((0..3usize, 39.4..40.6f64, -75.6..-74.4f64), 0..max).prop_map(move |v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (s, lat, lon))| {
                Facility::new(format!("{prefix}{i}"), prefix, st(STATES[s]), Coordinate::new(lat, lon).unwrap(), Role::Retail, GeocodeQuality::Success)
                    .unwrap()
            })
            .collect()
    })
}

fn scenario(sets: &[&str]) -> Scenario {
    Scenario::new(sets.join("+"), sets.iter().map(|s| s.to_string()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn superset_never_loses_coverage(tracts in arb_tracts(40), a in arb_facilities("a", 30), b in arb_facilities("b", 30)) {
        let sets = vec![FacilitySet::new("a", a).unwrap(), FacilitySet::new("b", b).unwrap()];
        let small = min_distance_table(&tracts, &scenario(&["a"]), &sets).unwrap();
        let large = min_distance_table(&tracts, &scenario(&["a", "b"]), &sets).unwrap();
        for (s, l) in small.entries().iter().zip(large.entries()) {
            prop_assert_eq!(&s.tract_id, &l.tract_id);
            match (s.miles(), l.miles()) {
                (Some(x), Some(y)) => prop_assert!(y <= x),
                (Some(_), None) => prop_assert!(false, "coverage lost"),
                _ => {}
            }
        }
        let th = thresholds();
        let cs = coverage_table(&small, &tracts, &DemographicGroup::ALL, &th, "US", true).unwrap();
        let cl = coverage_table(&large, &tracts, &DemographicGroup::ALL, &th, "US", true).unwrap();
        for (rs, rl) in cs.rows.iter().zip(&cl.rows) {
            prop_assert_eq!(rs.total, rl.total);
            for (x, y) in rs.covered.iter().zip(&rl.covered) {
                prop_assert!(y >= x);
            }
            if let (Some(xs), Some(ys)) = (&rs.shares, &rl.shares) {
                for (x, y) in xs.iter().zip(ys) {
                    prop_assert!(y >= x);
                }
            }
        }
    }

    #[test]
    fn shares_are_monotone_and_bounded(tracts in arb_tracts(40), a in arb_facilities("a", 30)) {
        let sets = vec![FacilitySet::new("a", a).unwrap()];
        let table = min_distance_table(&tracts, &scenario(&["a"]), &sets).unwrap();
        let cov = coverage_table(&table, &tracts, &DemographicGroup::ALL, &thresholds(), "US", true).unwrap();
        for row in &cov.rows {
            prop_assert!(row.covered.iter().all(|&c| c <= row.total));
            if let Some(s) = &row.shares {
                prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(s.iter().all(|&v| (0.0..=100.0).contains(&v)));
            } else {
                prop_assert_eq!(row.total, 0);
            }
        }
    }

    #[test]
    fn ethnicity_partition_recombines(tracts in arb_tracts(40), a in arb_facilities("a", 30)) {
        let sets = vec![FacilitySet::new("a", a).unwrap()];
        let table = min_distance_table(&tracts, &scenario(&["a"]), &sets).unwrap();
        let th = thresholds();
        let h = threshold_share(&table, &tracts, DemographicGroup::PopHispanic, &th, Scope::National).unwrap();
        let n = threshold_share(&table, &tracts, DemographicGroup::PopNonHispanic, &th, Scope::National).unwrap();
        let pop_total: u64 = tracts.iter().map(|t| t.counts().raw().pop_total).sum();
        prop_assume!(pop_total > 0);
        for (i, &t) in th.iter().enumerate() {
            let covered_total: u64 = table
                .entries()
                .iter()
                .filter(|e| e.miles().is_some_and(|d| d < t))
                .map(|e| tracts.iter().find(|x| x.id() == e.tract_id).unwrap().counts().raw().pop_total)
                .sum();
            let direct = 100.0 * covered_total as f64 / pop_total as f64;
            let part = |r: &proximity_core::coverage::CoverageRow| r.shares.as_ref().map_or(0.0, |s| s[i]) * r.total as f64;
            let combined = (part(&h) + part(&n)) / pop_total as f64;
            prop_assert!((combined - direct).abs() < 1e-9, "{} vs {}", combined, direct);
        }
    }

    #[test]
    fn indexed_pipeline_matches_bruteforce(tracts in arb_tracts(50), a in arb_facilities("a", 50)) {
        let sets = vec![FacilitySet::new("a", a.clone()).unwrap()];
        let s = scenario(&["a"]);
        let indexed = min_distance_table(&tracts, &s, &sets).unwrap();
        let entries = tracts
            .iter()
            .map(|t| DistanceEntry {
                tract_id: t.id().to_string(),
                state: t.state(),
                nearest: nearest_bruteforce(&a, t.centroid(), &BTreeSet::from([t.state()]))
                    .map(|n| NearestFacility { facility_id: n.id.to_string(), miles: n.miles }),
            })
            .collect();
        let brute = DistanceTable::from_entries("a", a.len(), entries).unwrap();
        prop_assert_eq!(&indexed, &brute);
        let th = thresholds();
        let ci = coverage_table(&indexed, &tracts, &DemographicGroup::ALL, &th, "US", true).unwrap();
        let cb = coverage_table(&brute, &tracts, &DemographicGroup::ALL, &th, "US", true).unwrap();
        prop_assert_eq!(ci, cb);
    }

    #[test]
    fn decile_base_plus_unmatched_is_total(tracts in arb_tracts(30), a in arb_facilities("a", 40)) {
        let h = svi_decile_distribution(&a, &tracts);
        prop_assert_eq!(h.base() + h.unmatched, a.len() as u64);
        if h.base() > 0 {
            prop_assert!((h.shares().iter().sum::<f64>() - 100.0).abs() < 1e-9);
        }
    }
}
