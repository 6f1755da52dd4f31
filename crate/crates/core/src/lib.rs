//! Offline driving-affordance labeling from OSM road networks and
//! street-level camera poses.
//!
//! The crate matches geotagged camera poses against an extracted road
//! network and derives per-pose affordance labels (heading angle, drivable
//! headings, intersection proximity, lane count, wrong-way flag, bike-lane
//! flag), producing training manifests, dataset splits, evaluation reports,
//! and perspective crop mappings for equirectangular panoramas.

pub mod geo;
pub mod index;
pub mod label;
pub mod manifest;
pub mod metrics;
pub mod osm;
pub mod pano;
pub mod pipeline;
pub mod pose;

#[cfg(test)]
pub(crate) mod testutil;
