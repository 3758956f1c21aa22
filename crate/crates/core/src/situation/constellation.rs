//! Rule-based constellations and safety relevance of the traffic participants.
//!
//! Constellations are named from the EGO's point of view: a participant arriving
//! from the EGO's right side and heading left is `CrossingFromRight`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scenario::road::polyline_distance;
use crate::scenario::{
    normalize_angle, HypothesisSet, IntendedPath, RoadClass, Scene, StateVector,
    TrafficParticipant,
};
use crate::Error;

/// Half-width of the EGO lane corridor separating longitudinal traffic from
/// traffic on the neighbouring lanes.
pub const LANE_CORRIDOR_HALF_WIDTH: f64 = 2.0;
/// Clearance added to the EGO route corridor for relevance.
pub const DEFAULT_RELEVANCE_MARGIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Longitudinal,
    Oncoming,
    CrossingFromLeft,
    CrossingFromRight,
    OnTheLeft,
    OnTheRight,
}

impl Constellation {
    pub const ALL: [Constellation; 6] = [
        Constellation::Longitudinal,
        Constellation::Oncoming,
        Constellation::CrossingFromLeft,
        Constellation::CrossingFromRight,
        Constellation::OnTheLeft,
        Constellation::OnTheRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Constellation::Longitudinal => "longitudinal",
            Constellation::Oncoming => "oncoming",
            Constellation::CrossingFromLeft => "crossing_from_left",
            Constellation::CrossingFromRight => "crossing_from_right",
            Constellation::OnTheLeft => "on_the_left",
            Constellation::OnTheRight => "on_the_right",
        }
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Constellation::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// Classifies by the relative heading `delta = psi - psi_ego - atan(m_ego)`:
///
/// - `|delta| <= pi/4`: same direction; longitudinal inside the lane corridor, else
///   on the left / right by the sign of the lateral offset.
/// - `pi/4 < delta < 3pi/4`: crossing from the right.
/// - `-3pi/4 < delta < -pi/4`: crossing from the left.
/// - otherwise oncoming.
pub fn classify_constellation(participant: &StateVector, ego: &StateVector) -> Constellation {
    let lane = ego.psi + ego.m_ego.atan();
    let delta = normalize_angle(participant.psi - lane);
    if delta.abs() <= FRAC_PI_4 {
        let (s, c) = lane.sin_cos();
        let lateral = -s * (participant.x - ego.x) + c * (participant.y - ego.y);
        if lateral > LANE_CORRIDOR_HALF_WIDTH {
            Constellation::OnTheLeft
        } else if lateral < -LANE_CORRIDOR_HALF_WIDTH {
            Constellation::OnTheRight
        } else {
            Constellation::Longitudinal
        }
    } else if delta > FRAC_PI_4 && delta < 3.0 * FRAC_PI_4 {
        Constellation::CrossingFromRight
    } else if delta < -FRAC_PI_4 && delta > -3.0 * FRAC_PI_4 {
        Constellation::CrossingFromLeft
    } else {
        Constellation::Oncoming
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantVerdict {
    pub id: u32,
    pub constellation: Constellation,
    pub relevant: bool,
    /// Closest approach of any hypothesis to the EGO route, meters.
    pub clearance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceVerdict {
    pub path: IntendedPath,
    pub participants: Vec<ParticipantVerdict>,
}

impl RelevanceVerdict {
    pub fn relevant_ids(&self) -> Vec<u32> {
        self.participants
            .iter()
            .filter(|p| p.relevant)
            .map(|p| p.id)
            .collect()
    }
}

/// A participant is relevant when any of its hypotheses comes within
/// `ego_width / 2 + width / 2 + margin` of the EGO route for `path`.
pub fn select_relevant(
    scene: &Scene,
    hypos: &HypothesisSet,
    path: IntendedPath,
    margin: f64,
) -> RelevanceVerdict {
    let ego = &scene.ego;
    let route = scene.road.ego_route(path, ego.state.position(), ego.state.psi);
    let participants = scene
        .participants
        .iter()
        .map(|p| {
            let clearance = hypos
                .entries
                .iter()
                .filter(|e| e.participant == p.id)
                .flat_map(|e| e.hypotheses.iter())
                .flat_map(|h| h.trace.iter())
                .map(|&pt| polyline_distance(&route, pt))
                .fold(polyline_distance(&route, p.state.position()), f64::min);
            let corridor = 0.5 * ego.width + 0.5 * p.width + margin;
            ParticipantVerdict {
                id: p.id,
                constellation: classify_constellation(&p.state, &ego.state),
                relevant: clearance <= corridor,
                clearance,
            }
        })
        .collect();
    RelevanceVerdict { path, participants }
}

/// Two vehicles crossing a junction ahead of the EGO, one from each side. When the
/// EGO turns right only the one from the right can reach its path within the
/// horizon; going straight, both can.
pub fn crossing_scene() -> Scene {
    let road = RoadClass::Crossroads.layout();
    let ego = TrafficParticipant::new(0, StateVector::new(2.5, 0.0, 8.0, 0.0), 0.0, 0.0);
    let from_right = TrafficParticipant::new(1, StateVector::new(23.25, -14.0, 8.0, FRAC_PI_2), 0.0, 0.0);
    let from_left = TrafficParticipant::new(2, StateVector::new(19.75, 19.0, 4.0, -FRAC_PI_2), 0.0, 0.0);
    Scene {
        ego,
        participants: vec![from_right, from_left],
        road,
        t0: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_all_hypotheses, HypothesisConfig};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ego() -> StateVector {
        StateVector::new(2.5, 0.0, 10.0, 0.0)
    }

    fn at(x: f64, y: f64, psi: f64) -> StateVector {
        StateVector::new(x, y, 5.0, psi)
    }

    #[test]
    fn basic_cases() {
        use Constellation::*;
        assert_eq!(classify_constellation(&at(20.0, 0.0, 0.0), &ego()), Longitudinal);
        assert_eq!(classify_constellation(&at(-8.0, 1.0, 0.1), &ego()), Longitudinal);
        assert_eq!(classify_constellation(&at(20.0, 3.5, PI), &ego()), Oncoming);
        assert_eq!(classify_constellation(&at(20.0, 3.5, 0.0), &ego()), OnTheLeft);
        assert_eq!(classify_constellation(&at(20.0, -3.5, 0.0), &ego()), OnTheRight);
        assert_eq!(classify_constellation(&at(20.0, -10.0, FRAC_PI_2), &ego()), CrossingFromRight);
        assert_eq!(classify_constellation(&at(20.0, 10.0, -FRAC_PI_2), &ego()), CrossingFromLeft);
    }

    #[test]
    fn boundaries_are_closed_toward_the_lane() {
        use Constellation::*;
        assert_eq!(classify_constellation(&at(20.0, 0.0, FRAC_PI_4), &ego()), Longitudinal);
        assert_eq!(classify_constellation(&at(20.0, 0.0, -FRAC_PI_4), &ego()), Longitudinal);
        assert_eq!(classify_constellation(&at(20.0, 0.0, 3.0 * FRAC_PI_4), &ego()), Oncoming);
        assert_eq!(classify_constellation(&at(20.0, 2.0, 0.0), &ego()), Longitudinal);
    }

    #[test]
    fn lane_slope_rotates_the_reference() {
        let mut e = ego();
        e.m_ego = 1.0; // lane at 45 degrees
        assert_eq!(
            classify_constellation(&at(10.0, 10.0, FRAC_PI_4), &e),
            Constellation::Longitudinal
        );
        assert_eq!(
            classify_constellation(&at(10.0, 10.0, FRAC_PI_4 + PI), &e),
            Constellation::Oncoming
        );
    }

    #[test]
    fn crossing_scene_relevance() {
        let scene = crossing_scene();
        let hypos = generate_all_hypotheses(&scene, &HypothesisConfig::default()).unwrap();
        let right = select_relevant(&scene, &hypos, IntendedPath::Right, DEFAULT_RELEVANCE_MARGIN);
        assert_eq!(right.relevant_ids(), vec![1], "{right:?}");
        let straight = select_relevant(&scene, &hypos, IntendedPath::Straight, DEFAULT_RELEVANCE_MARGIN);
        assert_eq!(straight.relevant_ids(), vec![1, 2], "{straight:?}");
        assert_eq!(right.participants[0].constellation, Constellation::CrossingFromRight);
        assert_eq!(right.participants[1].constellation, Constellation::CrossingFromLeft);
    }

    #[test]
    fn no_participants_nothing_relevant() {
        let mut scene = crossing_scene();
        scene.participants.clear();
        let hypos = generate_all_hypotheses(&scene, &HypothesisConfig::default()).unwrap();
        assert!(select_relevant(&scene, &hypos, IntendedPath::Straight, 0.5)
            .participants
            .is_empty());
    }

    proptest! {
        #[test]
        fn total_and_deterministic(x in -20.0..40.0f64, y in -20.0..20.0f64, psi in -4.0..4.0f64, m in -1.0..1.0f64) {
            let mut e = ego();
            e.m_ego = m;
            let p = at(x, y, psi);
            prop_assert_eq!(classify_constellation(&p, &e), classify_constellation(&p, &e));
        }

        #[test]
        fn wider_margin_keeps_relevance(m0 in 0.0..2.0f64, extra in 0.0..3.0f64) {
            let scene = crossing_scene();
            let hypos = generate_all_hypotheses(&scene, &HypothesisConfig::default()).unwrap();
            for path in [IntendedPath::Straight, IntendedPath::Left, IntendedPath::Right] {
                let a = select_relevant(&scene, &hypos, path, m0).relevant_ids();
                let b = select_relevant(&scene, &hypos, path, m0 + extra).relevant_ids();
                prop_assert!(a.iter().all(|id| b.contains(id)));
            }
        }
    }
}
