//! Road geometry: drivable strips around centerlines, directed lanes, infrastructure
//! cells and EGO routes, plus the synthetic layouts used for data and templates.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grid::{CellIndex, GridSpec};
use crate::Error;

pub const LANE_WIDTH: f64 = 3.5;
/// Lateral position of the main road's centerline; the EGO lane is centered on `y = 0`.
pub const MAIN_ROAD_Y: f64 = 1.75;
/// Longitudinal position of the side roads' centerline at junctions.
pub const JUNCTION_X: f64 = 21.5;

const SAMPLE_STEP: f64 = 0.5;

/// Points within `width / 2` of the polyline are drivable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadStrip {
    pub centerline: Vec<[f64; 2]>,
    pub width: f64,
}

/// Directed lane centerline; travel follows point order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub centerline: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntendedPath {
    Straight,
    Left,
    Right,
}

impl fmt::Display for IntendedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntendedPath::Straight => "straight",
            IntendedPath::Left => "left",
            IntendedPath::Right => "right",
        })
    }
}

impl FromStr for IntendedPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "straight" => Ok(IntendedPath::Straight),
            "left" => Ok(IntendedPath::Left),
            "right" => Ok(IntendedPath::Right),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoRoute {
    pub path: IntendedPath,
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Road {
    #[serde(default)]
    pub lanes: Vec<Lane>,
    #[serde(default)]
    pub drivable: Vec<RoadStrip>,
    /// Cells holding road infrastructure (the band bordering the drivable area).
    #[serde(default)]
    pub infrastructure: Vec<CellIndex>,
    #[serde(default)]
    pub ego_routes: Vec<EgoRoute>,
}

impl Road {
    /// Builds a road from two-lane strips, adding one lane per travel direction
    /// (right-hand traffic).
    pub fn from_strips(strips: Vec<RoadStrip>) -> Self {
        let mut lanes = Vec::new();
        for strip in &strips {
            if strip.centerline.len() < 2 {
                continue;
            }
            let offset = 0.25 * strip.width;
            lanes.push(Lane {
                centerline: offset_polyline(&strip.centerline, -offset),
            });
            let mut back = offset_polyline(&strip.centerline, offset);
            back.reverse();
            lanes.push(Lane { centerline: back });
        }
        Road {
            lanes,
            drivable: strips,
            infrastructure: Vec::new(),
            ego_routes: Vec::new(),
        }
    }

    pub fn is_drivable(&self, p: [f64; 2]) -> bool {
        self.drivable
            .iter()
            .any(|s| polyline_distance(&s.centerline, p) <= 0.5 * s.width)
    }

    /// Drivable flag per cell (cell-center test), row-major over `(j, i)`.
    pub fn drivable_mask(&self, spec: &GridSpec) -> Vec<bool> {
        spec.cells()
            .map(|c| self.is_drivable(spec.cell_center(c)))
            .collect()
    }

    /// Non-drivable cells with a drivable 4-neighbour.
    pub fn derive_infrastructure(&self, spec: &GridSpec) -> Vec<CellIndex> {
        let mask = self.drivable_mask(spec);
        let at = |i: i64, j: i64| -> bool {
            i >= 0
                && j >= 0
                && (i as usize) < spec.cols
                && (j as usize) < spec.rows
                && mask[j as usize * spec.cols + i as usize]
        };
        spec.cells()
            .filter(|c| {
                let (i, j) = (c.i as i64, c.j as i64);
                !at(i, j) && (at(i - 1, j) || at(i + 1, j) || at(i, j - 1) || at(i, j + 1))
            })
            .collect()
    }

    pub fn with_infrastructure(mut self, spec: &GridSpec) -> Self {
        self.infrastructure = self.derive_infrastructure(spec);
        self
    }

    /// Route polyline for the EGO; falls back to a generic maneuver shape starting at
    /// `start` when the road declares none.
    pub fn ego_route(&self, path: IntendedPath, start: [f64; 2], heading: f64) -> Vec<[f64; 2]> {
        if let Some(r) = self.ego_routes.iter().find(|r| r.path == path) {
            return r.points.clone();
        }
        let radius = 10.0;
        let lead = 10.0;
        match path {
            IntendedPath::Straight => line(start, heading, 45.0),
            IntendedPath::Left => turn(start, heading, lead, radius, 1.0, 30.0),
            IntendedPath::Right => turn(start, heading, lead, radius, -1.0, 30.0),
        }
    }

    /// Pure-pursuit target on the best matching lane: the nearest lane within 3 m whose
    /// local direction is within 45 degrees of `heading`.
    pub fn lane_target(&self, p: [f64; 2], heading: f64, lookahead: f64) -> Option<[f64; 2]> {
        let mut best: Option<(f64, usize, f64)> = None;
        for (k, lane) in self.lanes.iter().enumerate() {
            let Some(proj) = project(&lane.centerline, p) else {
                continue;
            };
            let diff = super::normalize_angle(proj.heading - heading).abs();
            if proj.distance > 3.0 || diff > PI / 4.0 {
                continue;
            }
            if best.is_none_or(|(d, _, _)| proj.distance < d) {
                best = Some((proj.distance, k, proj.arc));
            }
        }
        let (_, k, arc) = best?;
        Some(point_at(&self.lanes[k].centerline, arc + lookahead))
    }
}

pub(crate) struct Projection {
    pub distance: f64,
    /// arc length of the closest point from the polyline start
    pub arc: f64,
    pub heading: f64,
}

pub(crate) fn project(points: &[[f64; 2]], p: [f64; 2]) -> Option<Projection> {
    if points.len() < 2 {
        return None;
    }
    let mut best: Option<Projection> = None;
    let mut arc0 = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let len = len2.sqrt();
        if len2 == 0.0 {
            continue;
        }
        let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
        let q = [a[0] + t * d[0], a[1] + t * d[1]];
        let dist = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        if best.as_ref().is_none_or(|b| dist < b.distance) {
            best = Some(Projection {
                distance: dist,
                arc: arc0 + t * len,
                heading: d[1].atan2(d[0]),
            });
        }
        arc0 += len;
    }
    best
}

pub fn polyline_distance(points: &[[f64; 2]], p: [f64; 2]) -> f64 {
    match points.len() {
        0 => f64::INFINITY,
        1 => ((p[0] - points[0][0]).powi(2) + (p[1] - points[0][1]).powi(2)).sqrt(),
        _ => project(points, p).map_or(f64::INFINITY, |pr| pr.distance),
    }
}

/// Point at arc length `s`, extrapolating past either end along the end segments.
pub(crate) fn point_at(points: &[[f64; 2]], s: f64) -> [f64; 2] {
    let mut remaining = s.max(0.0);
    for (k, w) in points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let last = k + 2 == points.len();
        if remaining <= len || last {
            let t = if len > 0.0 { remaining / len } else { 0.0 };
            return [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        }
        remaining -= len;
    }
    points[0]
}

/// Shifts a polyline sideways; positive offsets move it to the left of travel.
pub fn offset_polyline(points: &[[f64; 2]], offset: f64) -> Vec<[f64; 2]> {
    let n = points.len();
    (0..n)
        .map(|k| {
            let (a, b) = if k + 1 < n {
                (points[k], points[k + 1])
            } else {
                (points[k - 1], points[k])
            };
            let d = [b[0] - a[0], b[1] - a[1]];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt().max(f64::MIN_POSITIVE);
            let normal = [-d[1] / len, d[0] / len];
            [
                points[k][0] + offset * normal[0],
                points[k][1] + offset * normal[1],
            ]
        })
        .collect()
}

fn line(start: [f64; 2], heading: f64, length: f64) -> Vec<[f64; 2]> {
    let (s, c) = heading.sin_cos();
    vec![start, [start[0] + length * c, start[1] + length * s]]
}

/// Sampled circular arc starting at `start` with `heading`, turning by `sweep` radians
/// (positive = left) on `radius`.
pub fn arc(start: [f64; 2], heading: f64, radius: f64, sweep: f64) -> Vec<[f64; 2]> {
    let sign = sweep.signum();
    let center = [
        start[0] - sign * radius * heading.sin(),
        start[1] + sign * radius * heading.cos(),
    ];
    let n = ((radius * sweep.abs()) / SAMPLE_STEP).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| {
            let h = heading + sweep * k as f64 / n as f64;
            [
                center[0] + sign * radius * h.sin(),
                center[1] - sign * radius * h.cos(),
            ]
        })
        .collect()
}

/// Straight lead-in, quarter turn, straight exit.
fn turn(start: [f64; 2], heading: f64, lead: f64, radius: f64, sign: f64, exit: f64) -> Vec<[f64; 2]> {
    let mut pts = line(start, heading, lead);
    let bend = arc(pts[1], heading, radius, sign * FRAC_PI_2);
    let end = *bend.last().unwrap();
    pts.extend_from_slice(&bend[1..]);
    let tail = line(end, heading + sign * FRAC_PI_2, exit);
    pts.push(tail[1]);
    pts
}

/// Road geometry classes of the synthetic template library.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadClass {
    Straight,
    CurveLeft,
    CurveRight,
    TJunction,
    JunctionLeft,
    JunctionRight,
    Crossroads,
    Roundabout,
    Fork,
}

impl RoadClass {
    pub const ALL: [RoadClass; 9] = [
        RoadClass::Straight,
        RoadClass::CurveLeft,
        RoadClass::CurveRight,
        RoadClass::TJunction,
        RoadClass::JunctionLeft,
        RoadClass::JunctionRight,
        RoadClass::Crossroads,
        RoadClass::Roundabout,
        RoadClass::Fork,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoadClass::Straight => "straight",
            RoadClass::CurveLeft => "curve_left",
            RoadClass::CurveRight => "curve_right",
            RoadClass::TJunction => "t_junction",
            RoadClass::JunctionLeft => "junction_left",
            RoadClass::JunctionRight => "junction_right",
            RoadClass::Crossroads => "crossroads",
            RoadClass::Roundabout => "roundabout",
            RoadClass::Fork => "fork",
        }
    }

    /// Synthetic layout of this class in the EGO frame (no infrastructure cells yet).
    pub fn layout(self) -> Road {
        let w = 2.0 * LANE_WIDTH;
        let strip = |pts: Vec<[f64; 2]>| RoadStrip {
            centerline: pts,
            width: w,
        };
        let main = || strip(vec![[-10.0, MAIN_ROAD_Y], [50.0, MAIN_ROAD_Y]]);
        let stem = |to: f64| strip(vec![[-10.0, MAIN_ROAD_Y], [to, MAIN_ROAD_Y]]);
        let branch_left = || strip(vec![[JUNCTION_X, MAIN_ROAD_Y], [JUNCTION_X, 50.0]]);
        let branch_right = || strip(vec![[JUNCTION_X, MAIN_ROAD_Y], [JUNCTION_X, -50.0]]);
        let curve = |sign: f64| {
            let mut pts = vec![[-10.0, MAIN_ROAD_Y]];
            pts.extend(arc([8.0, MAIN_ROAD_Y], 0.0, 22.0, sign * FRAC_PI_2));
            let end = *pts.last().unwrap();
            pts.push([end[0], end[1] + sign * 30.0]);
            strip(pts)
        };
        let strips = match self {
            RoadClass::Straight => vec![main()],
            RoadClass::CurveLeft => vec![curve(1.0)],
            RoadClass::CurveRight => vec![curve(-1.0)],
            RoadClass::TJunction => vec![
                stem(JUNCTION_X),
                strip(vec![[JUNCTION_X, -50.0], [JUNCTION_X, 50.0]]),
            ],
            RoadClass::JunctionLeft => vec![main(), branch_left()],
            RoadClass::JunctionRight => vec![main(), branch_right()],
            RoadClass::Crossroads => vec![main(), branch_left(), branch_right()],
            RoadClass::Roundabout => {
                let center = [22.0, MAIN_ROAD_Y];
                let radius = 9.0;
                let ring: Vec<[f64; 2]> = (0..=72)
                    .map(|k| {
                        let a = 2.0 * PI * k as f64 / 72.0;
                        [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
                    })
                    .collect();
                vec![
                    stem(center[0] - radius),
                    RoadStrip {
                        centerline: ring,
                        width: 6.0,
                    },
                    strip(vec![[center[0] + radius, MAIN_ROAD_Y], [50.0, MAIN_ROAD_Y]]),
                    strip(vec![[center[0], center[1] + radius], [center[0], 50.0]]),
                    strip(vec![[center[0], center[1] - radius], [center[0], -50.0]]),
                ]
            }
            RoadClass::Fork => {
                let split = [14.0, MAIN_ROAD_Y];
                vec![
                    stem(split[0]),
                    strip(vec![split, [46.0, MAIN_ROAD_Y + 20.0]]),
                    strip(vec![split, [46.0, MAIN_ROAD_Y - 20.0]]),
                ]
            }
        };
        let mut road = Road::from_strips(strips);
        road.ego_routes = self.ego_routes();
        road
    }

    fn ego_routes(self) -> Vec<EgoRoute> {
        let start = [2.5, 0.0];
        let straight = EgoRoute {
            path: IntendedPath::Straight,
            points: line(start, 0.0, 45.0),
        };
        // turn into the lane that leaves the junction on each side
        let right_lane_x = JUNCTION_X - 0.25 * 2.0 * LANE_WIDTH;
        let left_lane_x = JUNCTION_X + 0.25 * 2.0 * LANE_WIDTH;
        let right = EgoRoute {
            path: IntendedPath::Right,
            points: turn(start, 0.0, right_lane_x - 6.0 - start[0], 6.0, -1.0, 30.0),
        };
        let left = EgoRoute {
            path: IntendedPath::Left,
            points: turn(start, 0.0, left_lane_x - 10.0 - start[0], 10.0, 1.0, 30.0),
        };
        match self {
            RoadClass::Straight | RoadClass::CurveLeft | RoadClass::CurveRight => vec![straight],
            RoadClass::TJunction => vec![left, right],
            RoadClass::JunctionLeft => vec![straight, left],
            RoadClass::JunctionRight => vec![straight, right],
            RoadClass::Crossroads => vec![straight, left, right],
            RoadClass::Roundabout | RoadClass::Fork => vec![straight],
        }
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoadClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoadClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanes_follow_right_hand_traffic() {
        let road = RoadClass::JunctionLeft.layout();
        // EGO lane centered on y = 0 heading +x
        let ego_lane = &road.lanes[0].centerline;
        assert!((ego_lane[0][1]).abs() < 1e-12 && ego_lane[1][0] > ego_lane[0][0]);
        // inbound side-road lane heads -y at x = 19.75
        let inbound = road
            .lanes
            .iter()
            .find(|l| l.centerline[0][1] > l.centerline[1][1])
            .unwrap();
        assert!((inbound.centerline[0][0] - 19.75).abs() < 1e-12);
    }

    #[test]
    fn drivable_and_infrastructure_are_disjoint() {
        let spec = GridSpec::desk();
        let road = RoadClass::JunctionLeft.layout();
        let mask = road.drivable_mask(&spec);
        let infra = road.derive_infrastructure(&spec);
        assert!(!infra.is_empty());
        assert!(infra.iter().all(|c| !mask[spec.linear(*c)]));
        assert!(road.is_drivable([2.5, 0.0]));
        assert!(!road.is_drivable([10.0, -10.0]));
    }

    #[test]
    fn lane_target_tracks_the_aligned_lane() {
        let road = RoadClass::Straight.layout();
        let t = road.lane_target([5.0, 0.3], 0.0, 8.0).unwrap();
        assert!((t[0] - 13.0).abs() < 1e-9 && t[1].abs() < 1e-12);
        // heading against traffic picks the oncoming lane
        let t = road.lane_target([20.0, 3.2], PI, 5.0).unwrap();
        assert!((t[0] - 15.0).abs() < 1e-9 && (t[1] - 3.5).abs() < 1e-12);
        assert!(road.lane_target([20.0, -15.0], 0.0, 5.0).is_none());
    }

    #[test]
    fn arc_ends_a_quarter_turn_away() {
        let pts = arc([0.0, 0.0], 0.0, 10.0, -FRAC_PI_2);
        let end = pts.last().unwrap();
        assert!((end[0] - 10.0).abs() < 1e-9 && (end[1] + 10.0).abs() < 1e-9);
    }

    #[test]
    fn class_names_round_trip() {
        for c in RoadClass::ALL {
            assert_eq!(c.as_str().parse::<RoadClass>().unwrap(), c);
        }
        assert!("highway".parse::<RoadClass>().is_err());
    }
}
