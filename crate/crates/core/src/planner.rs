//! EGO candidate trajectories scored against predicted occupancy, and min-max
//! selection of the safe one.

use serde::{Deserialize, Serialize};

use crate::grid::{rasterize_footprint, GridSpec, PredictedOccupancyGrid};
use crate::scenario::{
    rollout, HypothesisConfig, Road, StateVector, Steering, TrafficParticipant, LONG_ACCEL_MAX,
    LONG_DECEL_MAX,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Number of candidates `U`.
    pub candidates: usize,
    pub motion: HypothesisConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            candidates: 15,
            motion: HypothesisConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrajectory {
    pub index: usize,
    pub maneuver: String,
    pub accel: f64,
    /// EGO state at each prediction instant.
    pub poses: Vec<StateVector>,
    pub instants: Vec<f64>,
}

const LATERALS: [(&str, Steering); 3] = [
    ("left", Steering::Bear(1.0)),
    ("keep", Steering::LaneFollow),
    ("right", Steering::Bear(-1.0)),
];

/// `U` feasible maneuvers: `ceil(U / 3)` accelerations evenly spaced over the full
/// braking-to-accelerating range, each combined with bearing left, lane keeping and
/// bearing right, truncated to `U`.
pub fn generate_candidates(
    ego: &TrafficParticipant,
    road: &Road,
    cfg: &PlannerConfig,
) -> Result<Vec<CandidateTrajectory>> {
    if cfg.candidates == 0 {
        return Err(Error::InvalidArgument("at least one candidate trajectory is required".into()));
    }
    let levels = cfg.candidates.div_ceil(LATERALS.len());
    let accel = |k: usize| {
        if levels == 1 {
            0.0
        } else {
            -LONG_DECEL_MAX + (LONG_ACCEL_MAX + LONG_DECEL_MAX) * k as f64 / (levels - 1) as f64
        }
    };
    let instants = cfg.motion.instants();
    let mut out = Vec::with_capacity(cfg.candidates);
    'outer: for k in 0..levels {
        let a = accel(k);
        for (name, steering) in LATERALS {
            if out.len() == cfg.candidates {
                break 'outer;
            }
            let r = rollout(&ego.state, a, steering, road, &cfg.motion)?;
            out.push(CandidateTrajectory {
                index: out.len(),
                maneuver: format!("{a:+.3}/{name}"),
                accel: a,
                poses: r.states,
                instants: instants.clone(),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryCost {
    pub index: usize,
    /// `c_{u,t}` per prediction instant.
    pub costs: Vec<f64>,
    pub worst: f64,
    pub total: f64,
}

impl TrajectoryCost {
    pub fn new(index: usize, costs: Vec<f64>) -> Self {
        TrajectoryCost {
            index,
            worst: costs.iter().copied().fold(0.0, f64::max),
            total: costs.iter().sum(),
            costs,
        }
    }
}

/// Sum of the POG probabilities under the EGO footprint at every instant. `pogs`
/// must hold one grid per instant of `traj`, in order.
pub fn occupancy_cost(
    traj: &CandidateTrajectory,
    pogs: &[PredictedOccupancyGrid],
    ego_length: f64,
    ego_width: f64,
) -> Result<TrajectoryCost> {
    if pogs.len() != traj.poses.len() {
        return Err(Error::DimensionMismatch {
            expected: traj.poses.len(),
            got: pogs.len(),
        });
    }
    let costs = traj
        .poses
        .iter()
        .zip(pogs)
        .zip(&traj.instants)
        .map(|((pose, pog), &t)| {
            if (pog.t_pred - t).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "POG for t_pred {} paired with instant {t}",
                    pog.t_pred
                )));
            }
            Ok(footprint_cost(pose, ego_length, ego_width, pog))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryCost::new(traj.index, costs))
}

fn footprint_cost(pose: &StateVector, length: f64, width: f64, pog: &PredictedOccupancyGrid) -> f64 {
    let spec: &GridSpec = &pog.spec;
    rasterize_footprint(pose.position(), pose.psi, length, width, spec)
        .into_iter()
        .map(|c| pog.get(c))
        .sum()
}

/// Position in `costs` minimizing the worst instant cost; ties go to the smaller
/// total, then to the lower candidate index.
pub fn select_safe(costs: &[TrajectoryCost]) -> Result<usize> {
    if costs.is_empty() {
        return Err(Error::Empty("candidate costs"));
    }
    let mut best = 0;
    for k in 1..costs.len() {
        let (a, b) = (&costs[k], &costs[best]);
        let better = a
            .worst
            .total_cmp(&b.worst)
            .then(a.total.total_cmp(&b.total))
            .then(a.index.cmp(&b.index))
            .is_lt();
        if better {
            best = k;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub candidates: Vec<CandidateTrajectory>,
    pub costs: Vec<TrajectoryCost>,
    /// Position of the safe trajectory in `candidates`.
    pub selected: usize,
}

/// Generates, scores and selects in one go.
pub fn plan(
    ego: &TrafficParticipant,
    road: &Road,
    pogs: &[PredictedOccupancyGrid],
    cfg: &PlannerConfig,
) -> Result<PlanReport> {
    let candidates = generate_candidates(ego, road, cfg)?;
    let costs = candidates
        .iter()
        .map(|c| occupancy_cost(c, pogs, ego.length, ego.width))
        .collect::<Result<Vec<_>>>()?;
    let selected = select_safe(&costs)?;
    Ok(PlanReport {
        candidates,
        costs,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellIndex;
    use crate::scenario::RoadClass;
    use proptest::prelude::*;

    fn ego() -> TrafficParticipant {
        TrafficParticipant::new(0, StateVector::new(2.5, 0.0, 10.0, 0.0), 0.0, 0.0)
    }

    fn pogs(spec: GridSpec, fill: impl Fn(CellIndex) -> f64) -> Vec<PredictedOccupancyGrid> {
        HypothesisConfig::default()
            .instants()
            .into_iter()
            .map(|t| {
                let mut g = PredictedOccupancyGrid::zeros(spec, t);
                for c in spec.cells() {
                    g.set(c, fill(c));
                }
                g
            })
            .collect()
    }

    #[test]
    fn candidate_grid() {
        let c = generate_candidates(&ego(), &RoadClass::Straight.layout(), &PlannerConfig::default()).unwrap();
        assert_eq!(c.len(), 15);
        assert_eq!(c[0].accel, -9.0);
        assert_eq!(c[14].accel, 4.5);
        assert_eq!(c[3].accel, -5.625);
        for cand in &c {
            assert_eq!(cand.poses.len(), 4);
            for p in &cand.poses {
                assert!(p.v >= 0.0);
            }
        }
        let seven = generate_candidates(&ego(), &Road::default(), &PlannerConfig { candidates: 7, ..Default::default() }).unwrap();
        assert_eq!(seven.len(), 7);
        assert_eq!(seven[6].maneuver, "+4.500/left");
    }

    #[test]
    fn costs_by_hand() {
        let spec = GridSpec::full_scale();
        let c = generate_candidates(&ego(), &Road::default(), &PlannerConfig::default()).unwrap();
        let zero = pogs(spec, |_| 0.0);
        assert_eq!(occupancy_cost(&c[0], &zero, 4.5, 2.0).unwrap().worst, 0.0);

        let tenth = pogs(spec, |_| 0.1);
        // axis-aligned 4.5 x 2.0 footprint centred on a cell corner covers 36 cells
        let t = CandidateTrajectory {
            index: 0,
            maneuver: "test".into(),
            accel: 0.0,
            poses: vec![StateVector::new(20.0, 5.0, 0.0, 0.0); 4],
            instants: HypothesisConfig::default().instants(),
        };
        let cost = occupancy_cost(&t, &tenth, 4.5, 2.0).unwrap();
        assert!((cost.costs[0] - 3.6).abs() < 1e-12);

        let mut one = pogs(spec, |_| 0.0);
        one[2].set(CellIndex::new(40, 50), 1.0);
        let cost = occupancy_cost(&t, &one, 4.5, 2.0).unwrap();
        assert_eq!((cost.worst, cost.costs[2]), (1.0, 1.0));

        let mut shifted = zero.clone();
        shifted[1].t_pred = 0.75;
        assert!(occupancy_cost(&t, &shifted, 4.5, 2.0).is_err());
        assert!(occupancy_cost(&t, &zero[..3], 4.5, 2.0).is_err());
    }

    #[test]
    fn selection_rules() {
        let tc = |i, c: Vec<f64>| TrajectoryCost::new(i, c);
        assert_eq!(select_safe(&[tc(0, vec![0.3])]).unwrap(), 0);
        let worsts = [tc(0, vec![0.9]), tc(1, vec![0.0]), tc(2, vec![0.4])];
        assert_eq!(select_safe(&worsts).unwrap(), 1);
        let tie = [tc(0, vec![0.5, 0.5]), tc(1, vec![0.5, 0.1]), tc(2, vec![0.1, 0.5])];
        assert_eq!(select_safe(&tie).unwrap(), 1);
        assert!(select_safe(&[]).is_err());
    }

    #[test]
    fn avoids_a_blocked_lane() {
        let spec = GridSpec::full_scale();
        // a wall across the lane ahead of the EGO, open on the left
        let wall = pogs(spec, |c| {
            let p = spec.cell_center(c);
            if p[0] > 14.0 && p[0] < 30.0 && p[1] < 1.5 { 1.0 } else { 0.0 }
        });
        let report = plan(&ego(), &Road::default(), &wall, &PlannerConfig::default()).unwrap();
        let best = &report.costs[report.selected];
        assert_eq!(best.worst, 0.0, "{:?}", report.candidates[report.selected].maneuver);
    }

    proptest! {
        #[test]
        fn monotone_transform_keeps_choice(rows in proptest::collection::vec(proptest::collection::vec(0.0..10.0f64, 4), 1..12)) {
            let costs: Vec<TrajectoryCost> = rows.iter().enumerate().map(|(i, r)| TrajectoryCost::new(i, r.clone())).collect();
            let squashed: Vec<TrajectoryCost> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| TrajectoryCost::new(i, r.iter().map(|v| 3.0 * v + 1.0).collect()))
                .collect();
            prop_assert_eq!(select_safe(&costs).unwrap(), select_safe(&squashed).unwrap());
        }

        #[test]
        fn more_candidates_never_hurt(rows in proptest::collection::vec(proptest::collection::vec(0.0..10.0f64, 3), 2..12)) {
            let costs: Vec<TrajectoryCost> = rows.iter().enumerate().map(|(i, r)| TrajectoryCost::new(i, r.clone())).collect();
            let fewer = &costs[..costs.len() - 1];
            prop_assert!(costs[select_safe(&costs).unwrap()].worst <= fewer[select_safe(fewer).unwrap()].worst);
        }
    }
}
