//! Geographic access metrics for population units and service facilities.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line driver and the HTTP facade live in the `proximity` crate.
//!
//! The pipeline is:
//!
//! 1. [`model`] records ([`Tract`], [`Facility`], [`FacilitySet`], [`Scenario`]),
//!    validated at construction.
//! 2. [`index::FacilityIndex`] answers exact same-state nearest-facility
//!    queries under the [`geo::haversine_miles`] kernel.
//! 3. [`coverage`] turns per-tract minimum distances into population-weighted
//!    threshold shares, SVI decile histograms, per-capita counts, goal checks
//!    and scenario deltas.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod coverage;
pub mod geo;
pub mod index;
pub mod model;

pub use geo::{haversine_miles, Coordinate, GeoError, Miles, EARTH_RADIUS_MILES};
pub use index::{nearest_bruteforce, FacilityIndex, Nearest};
pub use model::{
    DemographicCounts, DemographicGroup, Facility, FacilitySet, GeocodeQuality, ModelError,
    Region, Role, Scenario, StateCode, SviPercentile, Tract,
};
