//! JSON scenario files.
//!
//! ```text
//! {
//!   "version": 1,
//!   "header": { "grid": GridSpec, "horizon": s, "kappa": n, "seed": u64 },
//!   "body": { "road": Road, "ego": Participant, "participants": [Participant], "t0": s }
//! }
//! ```
//!
//! A participant is `{id, state: {x, y, v, psi, m_ego}, accel_long, accel_lat, length,
//! width}`; a road is `{lanes: [{centerline}], drivable: [{centerline, width}],
//! infrastructure: [{i, j}], ego_routes: [{path, points}]}`. Points are `[x, y]` in meters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HypothesisConfig, Road, Scene, TrafficParticipant};
use crate::grid::GridSpec;
use crate::{Error, Result};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioHeader {
    pub grid: GridSpec,
    pub horizon: f64,
    pub kappa: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBody {
    pub road: Road,
    pub ego: TrafficParticipant,
    pub participants: Vec<TrafficParticipant>,
    #[serde(default)]
    pub t0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: u32,
    pub header: ScenarioHeader,
    pub body: ScenarioBody,
}

impl ScenarioFile {
    pub fn new(scene: &Scene, grid: GridSpec, hypotheses: &HypothesisConfig, seed: u64) -> Self {
        ScenarioFile {
            version: SCENARIO_VERSION,
            header: ScenarioHeader {
                grid,
                horizon: hypotheses.horizon,
                kappa: hypotheses.kappa,
                seed,
            },
            body: ScenarioBody {
                road: scene.road.clone(),
                ego: scene.ego.clone(),
                participants: scene.participants.clone(),
                t0: scene.t0,
            },
        }
    }

    pub fn scene(&self) -> Scene {
        Scene {
            ego: self.body.ego.clone(),
            participants: self.body.participants.clone(),
            road: self.body.road.clone(),
            t0: self.body.t0,
        }
    }

    /// Default hypothesis settings with the header's horizon and `kappa`.
    pub fn hypothesis_config(&self) -> HypothesisConfig {
        HypothesisConfig {
            horizon: self.header.horizon,
            kappa: self.header.kappa,
            ..HypothesisConfig::default()
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ScenarioFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if file.version != SCENARIO_VERSION {
            return Err(Error::UnknownVersion {
                path: path.to_path_buf(),
                kind: "scenario",
                found: file.version,
                expected: SCENARIO_VERSION,
            });
        }
        file.header.grid.validate()?;
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
