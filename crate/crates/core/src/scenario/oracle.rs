//! Model-based POG: per cell, the probability mass of all participant hypotheses
//! whose footprint covers it, clamped to 1.

use super::{HypothesisSet, ParticipantHypotheses, Scene};
use crate::grid::{footprint_contains, rasterize_footprint, CellIndex, GridSpec, PredictedOccupancyGrid};
use crate::Result;

/// Binary vector `z` over the hypotheses of one participant at instant `k`: entry `s`
/// is true iff hypothesis `s` covers `cell`.
pub fn occupancy_indicator(
    entry: &ParticipantHypotheses,
    k: usize,
    cell: CellIndex,
    spec: &GridSpec,
) -> Vec<bool> {
    let center = spec.cell_center(cell);
    entry
        .hypotheses
        .iter()
        .map(|h| {
            let st = &h.states[k];
            footprint_contains(st.position(), st.psi, entry.length, entry.width, center)
        })
        .collect()
}

/// POG at `t_pred`, which must be one of the prediction instants of `hypos`.
/// Infrastructure cells are set to 1. The EGO is not predicted.
pub fn oracle_pog(
    scene: &Scene,
    hypos: &HypothesisSet,
    t_pred: f64,
    spec: &GridSpec,
) -> Result<PredictedOccupancyGrid> {
    spec.validate()?;
    let k = hypos.instant_index(t_pred)?;
    let mut pog = PredictedOccupancyGrid::zeros(*spec, t_pred);
    for entry in &hypos.entries {
        for (s, h) in entry.hypotheses.iter().enumerate() {
            let st = &h.states[k];
            let p = entry.probs[k][s];
            for cell in rasterize_footprint(st.position(), st.psi, entry.length, entry.width, spec) {
                pog.probs[spec.linear(cell)] += p;
            }
        }
    }
    for p in &mut pog.probs {
        *p = p.min(1.0);
    }
    for cell in &scene.road.infrastructure {
        if cell.i < spec.cols && cell.j < spec.rows {
            pog.set(*cell, 1.0);
        }
    }
    Ok(pog)
}

/// POGs at every prediction instant.
pub fn oracle_pogs(
    scene: &Scene,
    hypos: &HypothesisSet,
    spec: &GridSpec,
) -> Result<Vec<PredictedOccupancyGrid>> {
    hypos
        .instants
        .iter()
        .map(|&t| oracle_pog(scene, hypos, t, spec))
        .collect()
}
