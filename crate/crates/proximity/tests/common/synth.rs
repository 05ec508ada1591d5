//! Seeded synthetic tracts and facility sets.

use proximity_core::model::RawCounts;
use proximity_core::{
    Coordinate, DemographicCounts, Facility, FacilitySet, GeocodeQuality, Role, StateCode, SviPercentile, Tract,
};
use rand::rngs::StdRng;
use rand::Rng;

type Range = (f64, f64);

/// (state, lat range, lon range)
pub const BOXES: [(&str, Range, Range); 10] = [
    ("PA", (39.7, 42.0), (-80.5, -74.7)),
    ("NJ", (38.9, 41.3), (-75.5, -73.9)),
    ("NY", (40.5, 45.0), (-79.7, -71.9)),
    ("OH", (38.4, 41.9), (-84.8, -80.5)),
    ("KS", (37.0, 40.0), (-102.0, -94.6)),
    ("TX", (25.8, 36.5), (-106.6, -93.5)),
    ("CA", (32.5, 42.0), (-124.4, -114.1)),
    ("ND", (45.9, 49.0), (-104.0, -96.6)),
    ("AK", (54.0, 71.0), (-165.0, -141.0)),
    ("HI", (18.9, 22.2), (-160.2, -154.8)),
];

pub fn point(rng: &mut StdRng, b: usize) -> (StateCode, Coordinate) {
    let (s, lat, lon) = BOXES[b];
    (StateCode::parse(s).unwrap(), Coordinate::new(rng.gen_range(lat.0..lat.1), rng.gen_range(lon.0..lon.1)).unwrap())
}

pub fn tract(rng: &mut StdRng, i: usize) -> Tract {
    let b = rng.gen_range(0..BOXES.len());
    let (state, c) = point(rng, b);
    let races: [u64; 4] = [rng.gen_range(0..4000), rng.gen_range(0..1500), rng.gen_range(0..600), rng.gen_range(0..400)];
    let total: u64 = races.iter().sum();
    let hisp = rng.gen_range(0..=total);
    let hh = rng.gen_range(0..2500u64);
    let low = rng.gen_range(0..=hh);
    let high = rng.gen_range(0..=hh - low);
    let raw = RawCounts {
        adults_total: total * 3 / 4,
        households_total: hh,
        households_low_income: low,
        households_high_income: high,
        pop_total: total,
        pop_white: races[0],
        pop_black: races[1],
        pop_aapi: races[2],
        pop_other: races[3],
        pop_hispanic: hisp,
        pop_non_hispanic: total - hisp,
    };
    let svi = (rng.gen_range(0..20) != 0).then(|| SviPercentile::new(rng.gen_range(0.0..=1.0)).unwrap());
    Tract::new(format!("{b:02}{i:09}"), state, c, DemographicCounts::new(raw).unwrap()).unwrap().with_svi(svi)
}

pub fn tracts(rng: &mut StdRng, n: usize) -> Vec<Tract> {
    (0..n).map(|i| tract(rng, i)).collect()
}

pub fn facilities(rng: &mut StdRng, name: &str, n: usize) -> FacilitySet {
    let fs = (0..n)
        .map(|i| {
            let b = rng.gen_range(0..BOXES.len());
            let (state, c) = point(rng, b);
            let q = if rng.gen_range(0..10) == 0 { GeocodeQuality::Doubt } else { GeocodeQuality::Success };
            Facility::new(format!("{name}{i:06}"), name, state, c, Role::Retail, q).unwrap()
        })
        .collect();
    FacilitySet::new(name, fs).unwrap()
}
