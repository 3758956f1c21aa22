//! Randomized scenes on a three-way junction with their AOGs and ground-truth POGs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    generate_all_hypotheses, oracle_pogs, HypothesisConfig, Road, RoadClass, Scene, StateVector,
    TrafficParticipant,
};
use crate::grid::{encode_aog, AugmentedOccupancyGrid, GridSpec, PredictedOccupancyGrid};
use crate::seed::derived_rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub count: usize,
    /// Samples `0..train_count` form the training split.
    pub train_count: usize,
    pub min_participants: usize,
    pub max_participants: usize,
    /// Speed range in km/h, EGO included.
    pub speed_kmh: [f64; 2],
    /// Longitudinal acceleration range in m/s^2.
    pub accel_long: [f64; 2],
    /// Length of the along-lane jitter window in meters.
    pub jitter: f64,
    pub road: RoadClass,
    pub max_rejections: usize,
    pub grid: GridSpec,
    pub hypotheses: HypothesisConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            count: 2850,
            train_count: 1950,
            min_participants: 1,
            max_participants: 3,
            speed_kmh: [10.0, 50.0],
            accel_long: [-2.5, 2.5],
            jitter: 10.0,
            road: RoadClass::JunctionLeft,
            max_rejections: 100,
            grid: GridSpec::full_scale(),
            hypotheses: HypothesisConfig::default(),
        }
    }
}

impl DatasetConfig {
    /// 300 scenes (200 train) on the 20 x 20 grid.
    pub fn desk() -> Self {
        DatasetConfig {
            count: 300,
            train_count: 200,
            grid: GridSpec::desk(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.hypotheses.validate()?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.train_count > self.count {
            return bad("train_count exceeds count");
        }
        if self.min_participants == 0
            || self.min_participants > self.max_participants
            || self.max_participants > SLOTS.len()
        {
            return bad("participant counts must satisfy 1 <= min <= max <= 3");
        }
        if !(self.speed_kmh[0] >= 0.0 && self.speed_kmh[0] <= self.speed_kmh[1]) {
            return bad("invalid speed range");
        }
        if !(self.accel_long[0] <= self.accel_long[1])
            || self.accel_long[0] < -super::LONG_DECEL_MAX
            || self.accel_long[1] > super::LONG_ACCEL_MAX
        {
            return bad("acceleration range outside the vehicle limits");
        }
        if !(self.jitter >= 0.0) {
            return bad("jitter must be non-negative");
        }
        Ok(())
    }
}

/// Starting slot along a lane: base position, heading and jitter direction.
struct Slot {
    base: [f64; 2],
    heading: f64,
}

const SLOTS: [Slot; 3] = [
    // oncoming on the main road
    Slot {
        base: [28.0, 3.5],
        heading: std::f64::consts::PI,
    },
    // entering from the side road
    Slot {
        base: [19.75, 9.0],
        heading: -std::f64::consts::FRAC_PI_2,
    },
    // leading in the EGO lane
    Slot {
        base: [10.0, 0.0],
        heading: 0.0,
    },
];

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub scene: Scene,
    pub aog: AugmentedOccupancyGrid,
    /// Ground truth at every prediction instant.
    pub pogs: Vec<PredictedOccupancyGrid>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub seed: u64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn train(&self) -> &[Sample] {
        &self.samples[..self.config.train_count]
    }

    pub fn test(&self) -> &[Sample] {
        &self.samples[self.config.train_count..]
    }

    /// Number of scenes with 1, 2 and 3 participants.
    pub fn participant_histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for s in &self.samples {
            let n = s.scene.participants.len();
            if (1..=3).contains(&n) {
                h[n - 1] += 1;
            }
        }
        h
    }
}

fn speed<R: Rng>(rng: &mut R, cfg: &DatasetConfig) -> f64 {
    rng.random_range(cfg.speed_kmh[0]..=cfg.speed_kmh[1]) / 3.6
}

/// Draws scene `index` from its own derived stream; resamples until no footprints
/// overlap.
pub fn sample_scene(cfg: &DatasetConfig, road: &Road, seed: u64, index: u64) -> Result<Scene> {
    let mut rng = derived_rng(seed, index);
    for _ in 0..=cfg.max_rejections {
        let ego = TrafficParticipant::new(
            0,
            StateVector::new(cfg.grid.ego_cg[0], cfg.grid.ego_cg[1], speed(&mut rng, cfg), 0.0),
            rng.random_range(cfg.accel_long[0]..=cfg.accel_long[1]),
            0.0,
        );
        let n = rng.random_range(cfg.min_participants..=cfg.max_participants);
        let mut slots: Vec<usize> = (0..SLOTS.len()).collect();
        slots.shuffle(&mut rng);
        slots.truncate(n);
        slots.sort_unstable();
        let participants = slots
            .iter()
            .enumerate()
            .map(|(k, &slot)| {
                let Slot { base, heading } = SLOTS[slot];
                // jitter along the direction away from the junction
                let d = rng.random_range(0.0..=cfg.jitter);
                let back = [-heading.cos(), -heading.sin()];
                let (x, y) = if slot == 2 {
                    (base[0] + d, base[1])
                } else {
                    (base[0] + back[0] * d, base[1] + back[1] * d)
                };
                TrafficParticipant::new(
                    k as u32 + 1,
                    StateVector::new(x, y, speed(&mut rng, cfg), heading),
                    rng.random_range(cfg.accel_long[0]..=cfg.accel_long[1]),
                    0.0,
                )
            })
            .collect();
        let scene = Scene {
            ego,
            participants,
            road: road.clone(),
            t0: 0.0,
        };
        if scene.overlapping_pair(&cfg.grid).is_none() {
            return Ok(scene);
        }
    }
    Err(Error::TooManyRejections(cfg.max_rejections))
}

/// Deterministic dataset for `seed`. Every scene uses its own derived seed, so the
/// result does not depend on generation order.
pub fn sample_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let road = cfg.road.layout().with_infrastructure(&cfg.grid);
    let samples = (0..cfg.count as u64)
        .map(|index| {
            let scene = sample_scene(cfg, &road, seed, index)?;
            let aog = encode_aog(&scene, &cfg.grid)?;
            let hypos = generate_all_hypotheses(&scene, &cfg.hypotheses)?;
            let pogs = oracle_pogs(&scene, &hypos, &cfg.grid)?;
            Ok(Sample { scene, aog, pogs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        config: cfg.clone(),
        seed,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetConfig {
        DatasetConfig {
            count: 30,
            train_count: 20,
            ..DatasetConfig::desk()
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = sample_dataset(&small(), 7).unwrap();
        let b = sample_dataset(&small(), 7).unwrap();
        assert_eq!(a, b);
        let c = sample_dataset(&small(), 8).unwrap();
        assert_ne!(a.samples[0].scene, c.samples[0].scene);
    }

    #[test]
    fn default_split() {
        let cfg = DatasetConfig::default();
        assert_eq!((cfg.count, cfg.train_count, cfg.count - cfg.train_count), (2850, 1950, 900));
        let d = sample_dataset(&small(), 1).unwrap();
        assert_eq!((d.train().len(), d.test().len()), (20, 10));
    }

    #[test]
    fn covers_all_participant_counts_within_ranges() {
        let d = sample_dataset(&small(), 3).unwrap();
        assert!(d.participant_histogram().iter().all(|&n| n > 0));
        for s in &d.samples {
            for v in s.scene.vehicles() {
                assert!(v.state.v >= 10.0 / 3.6 - 1e-12 && v.state.v <= 50.0 / 3.6 + 1e-12);
                assert!(v.accel_long.abs() <= 2.5);
                assert!(v.within_limits());
            }
            assert_eq!(s.pogs.len(), 4);
        }
    }

    #[test]
    fn scene_order_does_not_matter() {
        let cfg = small();
        let road = cfg.road.layout().with_infrastructure(&cfg.grid);
        let late = sample_scene(&cfg, &road, 5, 17).unwrap();
        let d = sample_dataset(&cfg, 5).unwrap();
        assert_eq!(d.samples[17].scene, late);
    }

    #[test]
    fn bounded_rejections() {
        let cfg = DatasetConfig {
            jitter: 0.0,
            ..small()
        };
        let mut road = cfg.road.layout();
        road.infrastructure.clear();
        // an EGO placed on the leading slot always overlaps it
        let cfg = DatasetConfig {
            grid: GridSpec {
                ego_cg: [10.0, 0.0],
                ..cfg.grid
            },
            min_participants: 3,
            max_rejections: 4,
            ..cfg
        };
        assert!(matches!(
            sample_scene(&cfg, &road, 0, 0),
            Err(Error::TooManyRejections(4))
        ));
    }
}
