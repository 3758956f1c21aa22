//! Multi-hypothesis trajectories: every participant gets a fixed maneuver set
//! `{brake, hold, accelerate} x {bear left, straight, bear right}`.

use serde::{Deserialize, Serialize};

use super::kinematics::{propagate, LAT_ACCEL_MAX, LONG_ACCEL_MAX, LONG_DECEL_MAX};
use super::{Road, Scene, StateVector, TrafficParticipant};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HypothesisConfig {
    /// Prediction horizon in seconds.
    pub horizon: f64,
    /// Number of prediction instants (equal intervals) over the horizon.
    pub kappa: usize,
    /// Acceleration of the braking hypotheses.
    pub brake: f64,
    /// Acceleration of the accelerating hypotheses.
    pub accelerate: f64,
    /// Lateral acceleration targeted by the bearing hypotheses.
    pub bear_lateral_accel: f64,
    pub min_turn_radius: f64,
    /// Integration step inside each prediction interval.
    pub substep: f64,
    /// Straight hypotheses steer along the matching lane when one is found.
    pub lane_following: bool,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        HypothesisConfig {
            horizon: 2.0,
            kappa: 4,
            brake: -LONG_DECEL_MAX,
            accelerate: LONG_ACCEL_MAX,
            bear_lateral_accel: 0.5 * LAT_ACCEL_MAX,
            min_turn_radius: 6.0,
            substep: 0.05,
            lane_following: true,
        }
    }
}

impl HypothesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || self.kappa == 0 {
            return Err(Error::InvalidArgument("horizon must be positive and kappa >= 1".into()));
        }
        if !(self.substep > 0.0) || !(self.min_turn_radius > 0.0) {
            return Err(Error::InvalidArgument("substep and turn radius must be positive".into()));
        }
        if self.brake < -LONG_DECEL_MAX || self.accelerate > LONG_ACCEL_MAX {
            return Err(Error::InvalidArgument("maneuver accelerations exceed vehicle limits".into()));
        }
        if self.bear_lateral_accel < 0.0 || self.bear_lateral_accel > LAT_ACCEL_MAX {
            return Err(Error::InvalidArgument("bearing lateral acceleration out of range".into()));
        }
        Ok(())
    }

    /// Prediction instants `t_k = k * horizon / kappa`, `k = 1..=kappa`.
    pub fn instants(&self) -> Vec<f64> {
        (1..=self.kappa)
            .map(|k| self.horizon * k as f64 / self.kappa as f64)
            .collect()
    }

    fn substeps_per_interval(&self) -> usize {
        ((self.horizon / self.kappa as f64) / self.substep).round().max(1.0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Longitudinal {
    Brake,
    /// Keeps the currently measured longitudinal acceleration.
    Hold,
    Accelerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lateral {
    BearLeft,
    Straight,
    BearRight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Maneuver {
    pub longitudinal: Longitudinal,
    pub lateral: Lateral,
}

const fn m(longitudinal: Longitudinal, lateral: Lateral) -> Maneuver {
    Maneuver {
        longitudinal,
        lateral,
    }
}

impl Maneuver {
    pub const ALL: [Maneuver; 9] = {
        use Lateral::*;
        use Longitudinal::*;
        [
            m(Brake, BearLeft),
            m(Brake, Straight),
            m(Brake, BearRight),
            m(Hold, BearLeft),
            m(Hold, Straight),
            m(Hold, BearRight),
            m(Accelerate, BearLeft),
            m(Accelerate, Straight),
            m(Accelerate, BearRight),
        ]
    };

    pub fn tag(&self) -> String {
        format!("{:?}/{:?}", self.longitudinal, self.lateral).to_lowercase()
    }
}

/// Steering law of a rollout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Steering {
    /// Constant bearing toward the left (`+1`) or right (`-1`) at the configured
    /// lateral acceleration, bounded by the minimum turn radius.
    Bear(f64),
    /// Pure pursuit on the matching lane; zero curvature without one.
    LaneFollow,
    Straight,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    /// State at each prediction instant.
    pub states: Vec<StateVector>,
    /// Positions at every integration substep, starting with the initial position.
    pub trace: Vec<[f64; 2]>,
}

/// Integrates one maneuver over the horizon. Curvature is clamped each substep so
/// the lateral acceleration limit always holds.
pub fn rollout(
    start: &StateVector,
    accel: f64,
    steering: Steering,
    road: &Road,
    cfg: &HypothesisConfig,
) -> Result<Rollout> {
    cfg.validate()?;
    let per_interval = cfg.substeps_per_interval();
    let dt = cfg.horizon / (cfg.kappa * per_interval) as f64;
    let mut state = *start;
    let mut states = Vec::with_capacity(cfg.kappa);
    let mut trace = Vec::with_capacity(cfg.kappa * per_interval + 1);
    trace.push(state.position());
    for _ in 0..cfg.kappa {
        for _ in 0..per_interval {
            let v_end = (state.v + accel * dt).max(0.0);
            let v_peak = state.v.max(v_end);
            let limit = if v_peak > 0.0 {
                (LAT_ACCEL_MAX / (v_peak * v_peak)).min(1.0 / cfg.min_turn_radius)
            } else {
                1.0 / cfg.min_turn_radius
            };
            let curvature = match steering {
                Steering::Straight => 0.0,
                Steering::Bear(sign) => {
                    let k = if v_peak > 0.0 {
                        cfg.bear_lateral_accel / (v_peak * v_peak)
                    } else {
                        f64::INFINITY
                    };
                    sign.signum() * k.min(limit)
                }
                Steering::LaneFollow => {
                    let lookahead = (1.0 * state.v).max(5.0);
                    match road.lane_target(state.position(), state.psi, lookahead) {
                        Some(target) => {
                            let (s, c) = state.psi.sin_cos();
                            let dx = target[0] - state.x;
                            let dy = target[1] - state.y;
                            let lx = c * dx + s * dy;
                            let ly = -s * dx + c * dy;
                            let l2 = lx * lx + ly * ly;
                            if l2 > 0.0 {
                                (2.0 * ly / l2).clamp(-limit, limit)
                            } else {
                                0.0
                            }
                        }
                        None => 0.0,
                    }
                }
            };
            state = propagate(&state, accel, curvature, dt)?;
            trace.push(state.position());
        }
        states.push(state);
    }
    Ok(Rollout { states, trace })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub maneuver: Maneuver,
    pub states: Vec<StateVector>,
    pub trace: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticipantHypotheses {
    pub participant: u32,
    pub length: f64,
    pub width: f64,
    pub hypotheses: Vec<Hypothesis>,
    /// `probs[k][s]`: probability of hypothesis `s` at instant `k`.
    pub probs: Vec<Vec<f64>>,
}

impl ParticipantHypotheses {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisSet {
    pub instants: Vec<f64>,
    pub entries: Vec<ParticipantHypotheses>,
}

impl HypothesisSet {
    /// Index of the instant equal to `t_pred` (within 1e-9 s).
    pub fn instant_index(&self, t_pred: f64) -> Result<usize> {
        self.instants
            .iter()
            .position(|t| (t - t_pred).abs() < 1e-9)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "t_pred {t_pred} is not a prediction instant of {:?}",
                    self.instants
                ))
            })
    }
}

/// Generates the nine maneuver hypotheses of one participant with uniform,
/// time-constant probabilities.
pub fn generate_hypotheses(
    participant: &TrafficParticipant,
    road: &Road,
    cfg: &HypothesisConfig,
) -> Result<ParticipantHypotheses> {
    let hypotheses = Maneuver::ALL
        .iter()
        .map(|&maneuver| {
            let accel = match maneuver.longitudinal {
                Longitudinal::Brake => cfg.brake,
                Longitudinal::Hold => participant.accel_long,
                Longitudinal::Accelerate => cfg.accelerate,
            };
            let steering = match maneuver.lateral {
                Lateral::BearLeft => Steering::Bear(1.0),
                Lateral::BearRight => Steering::Bear(-1.0),
                Lateral::Straight if cfg.lane_following => Steering::LaneFollow,
                Lateral::Straight => Steering::Straight,
            };
            let r = rollout(&participant.state, accel, steering, road, cfg)?;
            Ok(Hypothesis {
                maneuver,
                states: r.states,
                trace: r.trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let s = hypotheses.len();
    let probs = vec![vec![1.0 / s as f64; s]; cfg.kappa];
    Ok(ParticipantHypotheses {
        participant: participant.id,
        length: participant.length,
        width: participant.width,
        hypotheses,
        probs,
    })
}

/// Hypotheses for every non-EGO participant of the scene.
pub fn generate_all_hypotheses(scene: &Scene, cfg: &HypothesisConfig) -> Result<HypothesisSet> {
    let entries = scene
        .participants
        .iter()
        .map(|p| generate_hypotheses(p, &scene.road, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(HypothesisSet {
        instants: cfg.instants(),
        entries,
    })
}
