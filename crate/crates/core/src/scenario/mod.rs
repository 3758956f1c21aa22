//! Ground-truth world: participants, road geometry, kinematics, multi-hypothesis
//! trajectories, the model-based POG and randomized dataset generation.

mod dataset;
mod file;
mod hypotheses;
mod kinematics;
mod oracle;
pub mod road;

use serde::{Deserialize, Serialize};

use crate::grid::{rasterize_footprint, CellIndex, GridSpec};

pub use dataset::{sample_dataset, sample_scene, Dataset, DatasetConfig, Sample};
pub use file::{ScenarioFile, ScenarioHeader, SCENARIO_VERSION};
pub use hypotheses::{
    generate_all_hypotheses, generate_hypotheses, rollout, Hypothesis, HypothesisConfig,
    HypothesisSet, Lateral, Longitudinal, Maneuver, ParticipantHypotheses, Rollout, Steering,
};
pub use kinematics::{
    normalize_angle, propagate, LAT_ACCEL_MAX, LONG_ACCEL_MAX, LONG_DECEL_MAX,
};
pub use oracle::{occupancy_indicator, oracle_pog, oracle_pogs};
pub use road::{EgoRoute, IntendedPath, Lane, Road, RoadClass, RoadStrip};

pub const DEFAULT_VEHICLE_LENGTH: f64 = 4.5;
pub const DEFAULT_VEHICLE_WIDTH: f64 = 2.0;

/// `[X, Y, v, psi, m_ego]`: position of the center of gravity, absolute speed,
/// orientation and the slope of the EGO lane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub psi: f64,
    #[serde(default)]
    pub m_ego: f64,
}

impl StateVector {
    pub fn new(x: f64, y: f64, v: f64, psi: f64) -> Self {
        StateVector {
            x,
            y,
            v,
            psi: normalize_angle(psi),
            m_ego: 0.0,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficParticipant {
    pub id: u32,
    pub state: StateVector,
    pub accel_long: f64,
    pub accel_lat: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_length() -> f64 {
    DEFAULT_VEHICLE_LENGTH
}

fn default_width() -> f64 {
    DEFAULT_VEHICLE_WIDTH
}

impl TrafficParticipant {
    pub fn new(id: u32, state: StateVector, accel_long: f64, accel_lat: f64) -> Self {
        TrafficParticipant {
            id,
            state,
            accel_long,
            accel_lat,
            length: DEFAULT_VEHICLE_LENGTH,
            width: DEFAULT_VEHICLE_WIDTH,
        }
    }

    pub fn footprint_cells(&self, spec: &GridSpec) -> Vec<CellIndex> {
        rasterize_footprint(
            self.state.position(),
            self.state.psi,
            self.length,
            self.width,
            spec,
        )
    }

    /// Checks the acceleration envelope of the simulated vehicles.
    pub fn within_limits(&self) -> bool {
        self.accel_long >= -LONG_DECEL_MAX
            && self.accel_long <= LONG_ACCEL_MAX
            && self.accel_lat.abs() <= LAT_ACCEL_MAX
            && self.state.v >= 0.0
    }
}

/// A traffic scene seen from the EGO vehicle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub ego: TrafficParticipant,
    pub participants: Vec<TrafficParticipant>,
    pub road: Road,
    #[serde(default)]
    pub t0: f64,
}

impl Scene {
    /// EGO first, then the other participants.
    pub fn vehicles(&self) -> impl Iterator<Item = &TrafficParticipant> {
        std::iter::once(&self.ego).chain(self.participants.iter())
    }

    /// First pair of vehicles whose rasterized footprints share a cell.
    pub fn overlapping_pair(&self, spec: &GridSpec) -> Option<(u32, u32)> {
        let sets: Vec<(u32, Vec<CellIndex>)> = self
            .vehicles()
            .map(|v| (v.id, v.footprint_cells(spec)))
            .collect();
        for a in 0..sets.len() {
            for b in a + 1..sets.len() {
                if sets[a].1.iter().any(|c| sets[b].1.binary_search_by(|x| (x.j, x.i).cmp(&(c.j, c.i))).is_ok()) {
                    return Some((sets[a].0, sets[b].0));
                }
            }
        }
        None
    }
}
