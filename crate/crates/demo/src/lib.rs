//! Browser demo over `pog-core`: model-based occupancy of a sampled scene, safe
//! trajectory selection on it, and road classification of a perturbed template.
//! Exports return JSON strings so they can be exercised natively as well.

use pog_core::grid::GridSpec;
use pog_core::planner::{plan, PlannerConfig};
use pog_core::scenario::{
    generate_all_hypotheses, oracle_pogs, sample_scene, DatasetConfig, RoadClass, Scene, TrafficParticipant,
};
use pog_core::seed::rng;
use pog_core::situation::{classify_road, rank_templates, TemplateLibrary, TEMPLATE_SIZE};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// 1 m cells over the 40 m area.
const DEMO_CELLS: usize = 40;
const DELTA: usize = 2;

#[derive(Serialize)]
struct Vehicle {
    id: u32,
    x: f64,
    y: f64,
    psi: f64,
    v: f64,
    length: f64,
    width: f64,
}

impl From<&TrafficParticipant> for Vehicle {
    fn from(p: &TrafficParticipant) -> Self {
        Vehicle {
            id: p.id,
            x: p.state.x,
            y: p.state.y,
            psi: p.state.psi,
            v: p.state.v,
            length: p.length,
            width: p.width,
        }
    }
}

#[derive(Serialize)]
struct Grid {
    cols: usize,
    rows: usize,
    cell: f64,
    origin: [f64; 2],
}

#[derive(Serialize)]
struct ScenePogs {
    grid: Grid,
    ego: Vehicle,
    participants: Vec<Vehicle>,
    instants: Vec<f64>,
    /// One probability vector per instant, index `j * cols + i`.
    pogs: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Pose {
    x: f64,
    y: f64,
    psi: f64,
}

#[derive(Serialize)]
struct Candidate {
    index: usize,
    maneuver: String,
    poses: Vec<Pose>,
    costs: Vec<f64>,
    worst: f64,
}

#[derive(Serialize)]
struct Plan {
    candidates: Vec<Candidate>,
    selected: usize,
}

#[derive(Serialize)]
struct Neighbour {
    label: String,
    distance: f64,
}

#[derive(Serialize)]
struct Classification {
    truth: String,
    predicted: String,
    rows: usize,
    cols: usize,
    /// Row-major `0`/`1` characters.
    pixels: String,
    neighbours: Vec<Neighbour>,
}

fn config() -> DatasetConfig {
    DatasetConfig {
        grid: GridSpec::square(DEMO_CELLS),
        ..DatasetConfig::desk()
    }
}

fn scene(seed: u32, index: u32) -> Result<Scene, String> {
    let cfg = config();
    let road = cfg.road.layout().with_infrastructure(&cfg.grid);
    sample_scene(&cfg, &road, seed as u64, index as u64).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Scene `index` of the junction dataset drawn with `seed`, with its POG at every
/// prediction instant.
#[wasm_bindgen]
pub fn scene_pogs(seed: u32, index: u32) -> Result<String, String> {
    let cfg = config();
    let scene = scene(seed, index)?;
    let hypos = generate_all_hypotheses(&scene, &cfg.hypotheses).map_err(|e| e.to_string())?;
    let pogs = oracle_pogs(&scene, &hypos, &cfg.grid).map_err(|e| e.to_string())?;
    to_json(&ScenePogs {
        grid: Grid {
            cols: cfg.grid.cols,
            rows: cfg.grid.rows,
            cell: cfg.grid.cell_length,
            origin: cfg.grid.origin,
        },
        ego: (&scene.ego).into(),
        participants: scene.participants.iter().map(Vehicle::from).collect(),
        instants: hypos.instants,
        pogs: pogs.into_iter().map(|g| g.probs).collect(),
    })
}

/// `candidates` EGO trajectories scored against the scene's POGs and the min-max
/// choice among them.
#[wasm_bindgen]
pub fn plan_scene(seed: u32, index: u32, candidates: u32) -> Result<String, String> {
    let cfg = config();
    let scene = scene(seed, index)?;
    let hypos = generate_all_hypotheses(&scene, &cfg.hypotheses).map_err(|e| e.to_string())?;
    let pogs = oracle_pogs(&scene, &hypos, &cfg.grid).map_err(|e| e.to_string())?;
    let pcfg = PlannerConfig {
        candidates: candidates as usize,
        motion: cfg.hypotheses,
    };
    let report = plan(&scene.ego, &scene.road, &pogs, &pcfg).map_err(|e| e.to_string())?;
    to_json(&Plan {
        candidates: report
            .candidates
            .iter()
            .zip(&report.costs)
            .map(|(c, cost)| Candidate {
                index: c.index,
                maneuver: c.maneuver.clone(),
                poses: c.poses.iter().map(|p| Pose { x: p.x, y: p.y, psi: p.psi }).collect(),
                costs: cost.costs.clone(),
                worst: cost.worst,
            })
            .collect(),
        selected: report.selected,
    })
}

/// Shifts and flip-corrupts the template of road class `class` (index into the
/// nine classes), then classifies it by IDM nearest neighbour.
#[wasm_bindgen]
pub fn classify_template(class: u32, shift_rows: i32, shift_cols: i32, flip: f64, seed: u32) -> Result<String, String> {
    let lib = TemplateLibrary::synthetic(TEMPLATE_SIZE);
    let truth = *RoadClass::ALL
        .get(class as usize)
        .ok_or_else(|| format!("class must be below {}", RoadClass::ALL.len()))?;
    if !(0.0..=1.0).contains(&flip) {
        return Err("flip fraction must lie in [0, 1]".into());
    }
    let template = &lib.templates[class as usize].image;
    let noisy = template
        .shifted(shift_rows as i64, shift_cols as i64)
        .with_flips(flip, &mut rng(seed as u64));
    let predicted = classify_road(&noisy, &lib, 1, DELTA).map_err(|e| e.to_string())?;
    let neighbours = rank_templates(&noisy, &lib, DELTA)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|n| Neighbour {
            label: n.label.to_string(),
            distance: n.distance,
        })
        .collect();
    to_json(&Classification {
        truth: truth.to_string(),
        predicted: predicted.to_string(),
        rows: noisy.rows,
        cols: noisy.cols,
        pixels: noisy.pixels.iter().map(|&b| if b { '1' } else { '0' }).collect(),
        neighbours,
    })
}
